use nalgebra::DMatrix;

use super::radial::{self, ChannelTable, GridSolution, RadialPair};
use super::{ChannelSet, RadialGrid, ReactionModel, ReferencePair};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::metric::BiorthoBasis;
use crate::par::{self, Execution};

/// Root refinement stops once the bracket is narrower than this (au)...
pub const ROOT_TOL: f64 = 1e-12;
/// ...and than this fraction of the local level spacing.
pub const ROOT_SPACING_FRACTION: f64 = 1e-10;
/// Allowed |u(Rmax)| relative to max |u|.
pub const DECAY_TOL: f64 = 1e-6;
/// Scan step as a fraction of the local level spacing.
pub const SCAN_FRACTION: f64 = 0.25;
const NULLITY_FLOOR: f64 = 1e-6;

/// A located bound state. `gridfun[j]` is the channel-j radial function on the
/// grid; the stack over channels has unit trapezoid norm.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundState {
    pub energy: f64,
    pub z: Vec<f64>,
    pub c: Vec<f64>,
    pub gridfun: Vec<Vec<f64>>,
}

impl BoundState {
    /// Largest |u_j(Rmax)| over channels relative to the overall max |u|.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.gridfun.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let edge = self.gridfun.iter().map(|u| u.last().map_or(0.0, |v| v.abs())).fold(0.0, f64::max);
        edge / peak
    }
}

/// Outcome of a window search.
#[derive(Clone, Debug)]
pub struct BoundSearch {
    pub states: Vec<BoundState>,
    /// Roots that were bracketed but could not be turned into a state.
    pub skipped: Vec<(f64, String)>,
    /// Level count predicted from the change of Σν_j and Σδ_α across the window.
    pub expected_count: f64,
    /// Largest |det| seen during the scan.
    pub scan_scale: f64,
    /// Largest |det| at a refined root.
    pub max_root_residual: f64,
    pub scan_points: usize,
}

struct ChannelSolution {
    matching: usize,
    pair: RadialPair,
    chi: GridSolution,
}

/// Channels, reaction model, grid and reference pair: everything needed to
/// locate bound states.
#[derive(Clone, Debug)]
pub struct ScatteringSystem {
    channels: ChannelSet,
    reaction: ReactionModel,
    grid: RadialGrid,
    reference: ReferencePair,
    tables: Vec<ChannelTable>,
}

impl ScatteringSystem {
    pub fn new(channels: ChannelSet, reaction: ReactionModel, grid: RadialGrid, reference: ReferencePair) -> Result<Self> {
        if channels.len() != reaction.n_channels() {
            return Err(Error::DimensionMismatch {
                context: "reaction model vs channels",
                expected: channels.len(),
                found: reaction.n_channels(),
            });
        }
        let tables = (0..channels.len())
            .map(|j| ChannelTable::new(grid, channels.potential(j)))
            .collect();
        Ok(Self {
            channels,
            reaction,
            grid,
            reference,
            tables,
        })
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn reaction(&self) -> &ReactionModel {
        &self.reaction
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn reference(&self) -> ReferencePair {
        self.reference
    }

    pub fn with_grid(&self, grid: RadialGrid) -> Result<Self> {
        Self::new(self.channels.clone(), self.reaction.clone(), grid, self.reference)
    }

    /// Grid index of the outer classical turning point. Beyond it the
    /// outward solutions grow and lose the decaying component to rounding,
    /// while the inward solution stays accurate all the way in.
    fn matching_index(&self, channel: usize, eps: f64) -> usize {
        let pot = self.channels.potential(channel);
        let tp = pot.outer_turning_point(eps).unwrap_or(self.grid.r0());
        self.grid.nearest_index(tp).clamp(1, self.grid.n_pts() - 2)
    }

    fn channel_solutions(&self, energy: f64) -> Result<Vec<ChannelSolution>> {
        let eps = self.channels.channel_energies(energy)?;
        eps.iter()
            .enumerate()
            .map(|(j, &e)| {
                let m = self.matching_index(j, e);
                let pair = self.tables[j].pair(e, self.reference, m)?;
                let chi = self.tables[j].inward(e, m)?;
                Ok(ChannelSolution { matching: m, pair, chi })
            })
            .collect()
    }

    /// Matching matrix B with B·A = 0 at a bound state, where A are the
    /// eigenchannel amplitudes: Z = O cos δ A, K Z = O sin δ A. Each row is
    /// scaled by the size of its two Wronskians, which makes B independent of
    /// the normalization of the decaying solutions and finite at K poles.
    fn matching_matrix(&self, energy: f64, sols: &[ChannelSolution]) -> DMatrix<f64> {
        let n = self.channels.len();
        let o = self.reaction.mixing();
        let deltas = self.reaction.eigenphases(energy);
        let mut b = DMatrix::zeros(n, n);
        for (j, s) in sols.iter().enumerate() {
            let chi = s.chi.at(s.matching);
            let wf = radial::wronskian(s.pair.f.at(s.matching), chi);
            let wg = radial::wronskian(s.pair.g.at(s.matching), chi);
            let scale = wf.hypot(wg);
            for (alpha, &d) in deltas.iter().enumerate() {
                let (sd, cd) = d.sin_cos();
                b[(j, alpha)] = o[(j, alpha)] * (cd * wf + sd * wg) / scale;
            }
        }
        b
    }

    /// Scaled determinant whose zeros are the bound energies. Continuous in E
    /// and bounded by 1 in magnitude.
    pub fn bound_det(&self, energy: f64) -> Result<f64> {
        let sols = self.channel_solutions(energy)?;
        Ok(self.matching_matrix(energy, &sols).determinant())
    }

    /// Local level density: Σ_j ν_j³/Z² + Σ_α |dδ_α/dE|/π.
    fn level_density(&self, energy: f64) -> Result<f64> {
        let z2 = self.channels.z_core().powi(2).max(f64::MIN_POSITIVE);
        let nu = self.channels.effective_quantum_numbers(energy)?;
        let coulomb: f64 = nu.iter().map(|v| v.powi(3) / z2).sum();
        let short: f64 = self
            .reaction
            .phases()
            .iter()
            .map(|p| p.derivative(energy).abs())
            .sum::<f64>()
            / std::f64::consts::PI;
        Ok(coulomb + short)
    }

    fn expected_count(&self, lo: f64, hi: f64) -> Result<f64> {
        let nu_lo: f64 = self.channels.effective_quantum_numbers(lo)?.iter().sum();
        let nu_hi: f64 = self.channels.effective_quantum_numbers(hi)?.iter().sum();
        let d_lo: f64 = self.reaction.eigenphases(lo).iter().sum();
        let d_hi: f64 = self.reaction.eigenphases(hi).iter().sum();
        Ok(nu_hi - nu_lo + (d_hi - d_lo) / std::f64::consts::PI)
    }

    fn scan_energies(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let mut es = vec![lo];
        let mut e = lo;
        while e < hi {
            let step = SCAN_FRACTION / self.level_density(e)?;
            e = (e + step).min(hi);
            es.push(e);
        }
        Ok(es)
    }

    /// Locates every bound state in `[lo, hi]`: scans the determinant on a
    /// grid finer than the local level spacing, refines each sign change to
    /// [`ROOT_TOL`] or [`ROOT_SPACING_FRACTION`] of the level spacing, whichever is
    /// tighter, and recovers the channel amplitudes from the null vector.
    pub fn find_bound_states(&self, window: (f64, f64), exec: Execution) -> Result<BoundSearch> {
        let (lo, hi) = window;
        if !(lo < hi) {
            return Err(Error::InputData(format!("empty energy window [{lo}, {hi}]")));
        }
        self.channels.channel_energies(hi)?;
        let es = self.scan_energies(lo, hi)?;
        let dets: Vec<f64> = par::map(exec, &es, |&e| self.bound_det(e)).into_iter().collect::<Result<_>>()?;
        let scan_scale = dets.iter().fold(0.0f64, |m, d| m.max(d.abs()));

        let mut brackets = Vec::new();
        for i in 0..es.len() - 1 {
            if dets[i] == 0.0 {
                brackets.push((es[i], es[i], dets[i], dets[i]));
            } else if dets[i] * dets[i + 1] < 0.0 {
                brackets.push((es[i], es[i + 1], dets[i], dets[i + 1]));
            }
        }
        if dets[es.len() - 1] == 0.0 {
            let e = es[es.len() - 1];
            brackets.push((e, e, 0.0, 0.0));
        }

        let refined = par::map(exec, &brackets, |&(a, b, da, db)| self.refine_root(a, b, da, db));
        let mut states = Vec::new();
        let mut skipped = Vec::new();
        let mut max_root_residual: f64 = 0.0;
        for r in refined {
            let (energy, residual) = r?;
            max_root_residual = max_root_residual.max(residual.abs());
            match self.solve_state(energy) {
                Ok(s) => states.push(s),
                Err(e @ Error::DegenerateRoot { .. }) => {
                    log::warn!("{e}; skipped");
                    skipped.push((energy, e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
        let expected = self.expected_count(lo, hi)?;
        let found = (states.len() + skipped.len()) as f64;
        if (found - expected).abs() > 1.0 {
            log::warn!(
                "found {} roots in [{lo:.6e}, {hi:.6e}] but level counting predicts {expected:.2}; some may be missed",
                found
            );
        }
        Ok(BoundSearch {
            states,
            skipped,
            expected_count: expected,
            scan_scale,
            max_root_residual,
            scan_points: es.len(),
        })
    }

    /// Illinois false position on a sign-change bracket, falling back to a
    /// bisection step whenever the bracket fails to halve.
    fn refine_root(&self, mut a: f64, mut b: f64, mut da: f64, mut db: f64) -> Result<(f64, f64)> {
        if da == 0.0 {
            return Ok((a, 0.0));
        }
        if db == 0.0 {
            return Ok((b, 0.0));
        }
        // The determinant's slope grows like the level density, so the
        // energy tolerance shrinks with it to keep |det| at the root small.
        let tol = ROOT_TOL.min(ROOT_SPACING_FRACTION / self.level_density(0.5 * (a + b))?);
        let mut side = 0i8;
        let mut width = b - a;
        // Illinois scaling alters da/db, so the smallest |det| actually
        // evaluated is tracked separately.
        let mut best = if da.abs() <= db.abs() { (a, da) } else { (b, db) };
        while b - a > tol {
            let secant = a - da * (b - a) / (db - da);
            let m = if (b - a) > 0.5 * width || !(secant > a && secant < b) {
                width = b - a;
                0.5 * (a + b)
            } else {
                secant
            };
            if m <= a || m >= b {
                break;
            }
            let dm = self.bound_det(m)?;
            if dm.abs() <= best.1.abs() {
                best = (m, dm);
            }
            if dm == 0.0 {
                break;
            }
            if da * dm < 0.0 {
                b = m;
                db = dm;
                if side == -1 {
                    da *= 0.5;
                }
                side = -1;
            } else {
                a = m;
                da = dm;
                if side == 1 {
                    db *= 0.5;
                }
                side = 1;
            }
        }
        Ok(best)
    }

    /// Builds the bound state at a root of [`Self::bound_det`].
    pub fn solve_state(&self, energy: f64) -> Result<BoundState> {
        let n_ch = self.channels.len();
        let sols = self.channel_solutions(energy)?;
        let b = self.matching_matrix(energy, &sols);
        let amp = null_vector(&b, energy)?;

        let deltas = self.reaction.eigenphases(energy);
        let o = self.reaction.mixing();
        // Z = O cos δ A, K Z = O sin δ A
        let mut z = vec![0.0; n_ch];
        let mut kz = vec![0.0; n_ch];
        for j in 0..n_ch {
            for (alpha, &d) in deltas.iter().enumerate() {
                let (sd, cd) = d.sin_cos();
                z[j] += o[(j, alpha)] * cd * amp[alpha];
                kz[j] += o[(j, alpha)] * sd * amp[alpha];
            }
        }

        let n_pts = self.grid.n_pts();
        let mut gridfun = Vec::with_capacity(n_ch);
        let mut cvec = Vec::with_capacity(n_ch);
        for (j, s) in sols.iter().enumerate() {
            let mut u = vec![0.0; n_pts];
            for (i, ui) in u.iter_mut().enumerate().take(s.matching + 1) {
                *ui = z[j] * s.pair.f.values[i] + kz[j] * s.pair.g.values[i];
            }
            // χ is 1 at the matching point
            let cj = u[s.matching];
            for i in s.matching + 1..n_pts {
                u[i] = cj * s.chi.values[i - s.chi.first];
            }
            cvec.push(cj);
            gridfun.push(u);
        }

        let weights = self.grid.trapezoid_weights();
        let norm2: f64 = gridfun
            .iter()
            .map(|u| u.iter().zip(&weights).map(|(v, w)| w * v * v).sum::<f64>())
            .sum();
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return Err(Error::Overflow { energy });
        }
        let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lead = if zmax > 1e-12 * amp.iter().fold(0.0f64, |m, v| m.max(v.abs())) {
            z.iter().copied().fold(0.0, |best: f64, v| if v.abs() > best.abs() { v } else { best })
        } else {
            gridfun
                .iter()
                .flatten()
                .copied()
                .fold(0.0, |best: f64, v| if v.abs() > best.abs() { v } else { best })
        };
        let scale = lead.signum() / norm2.sqrt();
        for v in z.iter_mut().chain(cvec.iter_mut()) {
            *v *= scale;
        }
        for u in &mut gridfun {
            for v in u.iter_mut() {
                *v *= scale;
            }
        }
        let state = BoundState {
            energy,
            z,
            c: cvec,
            gridfun,
        };
        let ratio = state.boundary_ratio();
        if !(ratio < DECAY_TOL) {
            return Err(Error::BoundaryDecay { energy, ratio });
        }
        Ok(state)
    }
}

/// Unit null vector of `b` from its smallest singular direction.
fn null_vector(b: &DMatrix<f64>, energy: f64) -> Result<Vec<f64>> {
    let n = b.nrows();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let svd = b.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let s_max = svd.singular_values[order[n - 1]];
    let second = svd.singular_values[order[1]];
    if second <= NULLITY_FLOOR * s_max {
        let nullity = order.iter().filter(|&&k| svd.singular_values[k] <= NULLITY_FLOOR * s_max).count();
        return Err(Error::DegenerateRoot { energy, nullity });
    }
    Ok(v_t.row(order[0]).iter().copied().collect())
}

/// Stacks bound states into a basis ordered by energy.
pub fn assemble_basis(states: &[BoundState], grid: &RadialGrid) -> Result<BiorthoBasis> {
    if states.len() < 2 {
        return Err(Error::InputData(format!("a basis needs at least 2 states, got {}", states.len())));
    }
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by(|&a, &b| states[a].energy.total_cmp(&states[b].energy));
    for w in order.windows(2) {
        let (e0, e1) = (states[w[0]].energy, states[w[1]].energy);
        if (e1 - e0).abs() <= ROOT_TOL {
            return Err(Error::DuplicateEnergy(e1));
        }
    }
    let n_pts = grid.n_pts();
    let n_ch = states[0].gridfun.len();
    let weights = grid.trapezoid_weights();
    let mut m = CMat::zeros(n_ch * n_pts, states.len());
    for (col, &k) in order.iter().enumerate() {
        let s = &states[k];
        if s.gridfun.len() != n_ch || s.gridfun.iter().any(|u| u.len() != n_pts) {
            return Err(Error::DimensionMismatch {
                context: "bound-state grid function",
                expected: n_ch * n_pts,
                found: s.gridfun.iter().map(Vec::len).sum(),
            });
        }
        let norm2: f64 = s
            .gridfun
            .iter()
            .map(|u| u.iter().zip(&weights).map(|(v, w)| w * v * v).sum::<f64>())
            .sum();
        let inv = 1.0 / norm2.sqrt();
        for (j, u) in s.gridfun.iter().enumerate() {
            for (i, v) in u.iter().enumerate() {
                m[(j * n_pts + i, col)] = c(v * inv);
            }
        }
    }
    let energies = order.iter().map(|&k| states[k].energy).collect();
    BiorthoBasis::new(energies, m, weights)
}
