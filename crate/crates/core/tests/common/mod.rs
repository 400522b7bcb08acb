#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;
use qhweak::linalg::{CMat, C64};
use qhweak::metric::{gram_from_states, BiorthoBasis, MetricWorkspace, DEFAULT_TOL};

/// Ambient-space instance: states are the columns of T, unit quadrature
/// weights, so the Gram matrix is TᴴT.
#[derive(Clone, Debug)]
pub struct Instance {
    pub t: CMat,
    pub energies: Vec<f64>,
    pub hermitian: CMat,
    pub pre: Vec<C64>,
    pub post: Vec<C64>,
    pub time: f64,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.energies.len()
    }

    pub fn basis(&self) -> BiorthoBasis {
        BiorthoBasis::from_columns(self.energies.clone(), self.t.clone(), vec![1.0; self.n()]).unwrap()
    }

    pub fn workspace(&self, basis: &BiorthoBasis) -> MetricWorkspace {
        MetricWorkspace::decompose(gram_from_states(basis).unwrap(), DEFAULT_TOL).unwrap()
    }
}

fn complex_matrix(n: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec(-1.0f64..1.0, 2 * n * n)
        .prop_map(move |v| CMat::from_fn(n, n, |i, j| C64::new(v[2 * (i * n + j)], v[2 * (i * n + j) + 1])))
}

fn complex_vector(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| v.into_iter().map(|(re, im)| C64::new(re, im)).collect())
}

/// T = I + R·0.3/n keeps ‖T − I‖₂ < 0.43, so T is invertible with
/// condition number below 2.6.
pub fn similarity(n: usize) -> impl Strategy<Value = CMat> {
    complex_matrix(n).prop_map(move |r| CMat::identity(n, n) + r * C64::new(0.3 / n as f64, 0.0))
}

pub fn hermitian(n: usize) -> impl Strategy<Value = CMat> {
    complex_matrix(n).prop_map(|m| (&m + m.adjoint()) * C64::new(0.5, 0.0))
}

pub fn increasing_energies(n: usize) -> impl Strategy<Value = Vec<f64>> {
    (-2.0f64..0.0, prop::collection::vec(0.05f64..1.0, n)).prop_map(|(start, gaps)| {
        gaps.iter()
            .scan(start, |e, g| {
                *e += g;
                Some(*e)
            })
            .collect()
    })
}

pub fn instance(max_dim: usize) -> impl Strategy<Value = Instance> {
    (2..=max_dim).prop_flat_map(|n| {
        (similarity(n), increasing_energies(n), hermitian(n), complex_vector(n), complex_vector(n), 0.0f64..20.0)
            .prop_map(|(t, energies, hermitian, pre, post, time)| Instance {
                t,
                energies,
                hermitian,
                pre,
                post,
                time,
            })
    })
}

/// Hermitian square root and inverse square root through nalgebra's own
/// eigensolver, independent of the crate's spectral helpers.
pub fn hermitian_powers(g: &CMat) -> (CMat, CMat) {
    let eig = g.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| C64::new(x.sqrt(), 0.0)));
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| C64::new(1.0 / x.sqrt(), 0.0)));
    (v * sqrt * v.adjoint(), v * inv_sqrt * v.adjoint())
}

pub fn max_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
}
