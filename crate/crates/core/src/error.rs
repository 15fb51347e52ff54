use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension {0} outside the supported range 1..=8")]
    DimensionOutOfRange(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric at entry ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("matrix must be square with at least one row")]
    NotSquare,
    #[error("basis is not orthonormal (Gram deviation {0:e})")]
    NonOrthonormalBasis(f64),
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("ambient dimension {0} is odd; a complex structure needs an even dimension")]
    OddDimension(usize),
    #[error("source term is negative ({value}) at the queried point")]
    NegativeSource { value: f64 },
    #[error("phase {phase} outside (-n pi/2, n pi/2) for n = {n}")]
    PhaseOutOfRange { phase: f64, n: usize },
    #[error("directionality g(p+q) >= g(p) violated at p = {p:?}, q = {q:?}")]
    DirectionalityViolation { p: Vec<f64>, q: Vec<f64> },
    #[error("alpha must exceed 1, got {0}")]
    BadAlpha(f64),
    #[error("reference jet is not in the interior of the monotonicity cone")]
    ReferenceJetNotInterior,
    #[error("polynomial has non-real roots (imaginary residue {residue:e})")]
    NonRealRoots { residue: f64 },
    #[error("leading coefficient of the restricted polynomial vanishes")]
    DegenerateLeadingCoefficient,
    #[error("operator {0} has no hyperbolicity certificate")]
    HyperbolicityNotVerified(String),
    #[error("operator is not I-hyperbolic: eval(I) = {0} is not positive")]
    NonPositiveAtIdentity(f64),
    #[error("could not bracket the boundary crossing within radius {radius:e}")]
    BracketingFailure { radius: f64 },
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("point is not on the boundary (phi = {value:e})")]
    NotOnBoundary { value: f64 },
    #[error("gradient of the defining function is singular (|grad| = {norm:e})")]
    SingularGradient { norm: f64 },
    #[error("stencil leaves the grid at node {0}")]
    StencilOutOfBounds(usize),
    #[error("node {0} lies on the boundary layer")]
    BoundaryNode(usize),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("residual grew for 100 consecutive steps (iteration {iteration})")]
    UnstableStep { iteration: usize },
    #[error("family of subsolutions is empty")]
    EmptyFamily,
    #[error("family member exceeds the boundary data at node {node} by {excess:e}")]
    BoundaryViolation { node: usize, excess: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
