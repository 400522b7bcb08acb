use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input data: {0}")]
    InputData(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error(
        "metric not positive definite / basis numerically dependent: \
         eigenvalue #{index} = {eigenvalue:.6e} is below the floor {floor:.6e}"
    )]
    NotPositiveDefinite {
        index: usize,
        eigenvalue: f64,
        floor: f64,
    },

    #[error("grid resolution too coarse: Wronskian drift {drift:.3e} exceeds {tolerance:.1e}")]
    GridResolution { drift: f64, tolerance: f64 },

    #[error("reaction matrix pole in eigenchannel {channel} at E = {energy:.12e}; perturb the energy")]
    KMatrixPole { channel: usize, energy: f64 },

    #[error("channel {channel} is open at E = {energy:.6e} (threshold {threshold:.6e})")]
    OpenChannel {
        channel: usize,
        energy: f64,
        threshold: f64,
    },

    #[error("inward solution overflow at E = {energy:.6e} could not be rescaled")]
    Overflow { energy: f64 },

    #[error("degenerate root at E = {energy:.12e}: matching matrix null space has dimension {nullity}")]
    DegenerateRoot { energy: f64, nullity: usize },

    #[error(
        "bound state at E = {energy:.12e} does not decay inside the box: \
         |u(Rmax)|/max|u| = {ratio:.3e}; enlarge Rmax or lower the window top"
    )]
    BoundaryDecay { energy: f64, ratio: f64 },

    #[error("duplicate basis energies {0:.12e}")]
    DuplicateEnergy(f64),

    #[error(
        "postselection nearly orthogonal: |naive denominator| = {naive:.3e}, \
         |corrected denominator| = {corrected:.3e}"
    )]
    NearlyOrthogonal { naive: f64, corrected: f64 },

    #[error("wavepacket reconstruction fidelity {fidelity:.4} below {minimum}; widen the basis window")]
    LowFidelity { fidelity: f64, minimum: f64 },

    #[error("no recurrence found: autocorrelation stays below {threshold} up to t = {horizon:.6e}")]
    NoRecurrence { threshold: f64, horizon: f64 },

    #[error("meter grid under-resolved: max pointer wavenumber {wavenumber:.3e} vs Nyquist {nyquist:.3e}")]
    Nyquist { wavenumber: f64, nyquist: f64 },

    #[error("post-selection probability {probability:.3e} below 1e-12")]
    PostSelection { probability: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures map to exit code 2, everything the user can fix in
    /// their invocation or files maps to 1.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Config(_) | Error::ModelFile(_) | Error::Io(_) | Error::InputData(_)
        )
    }
}
