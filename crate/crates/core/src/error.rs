use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("driving function has a non-finite sample at index {0}")]
    NonFiniteDriving(usize),
    #[error("integrator could not resolve the flow near t = {t} (substep budget exhausted)")]
    StepTooLarge { t: f64 },
    #[error("interior point {0} is not inside the unit disk")]
    PointOutsideDisk(String),
    #[error("trace resolution too coarse: composition error estimate {estimate:.3e} exceeds {bound:.3e}")]
    ResolutionTooCoarse { estimate: f64, bound: f64 },
    #[error("input polyline intersects itself")]
    SelfIntersectingInput,
    #[error("polyline segment {0} has zero length")]
    DegenerateSegment(usize),
    #[error("point lies on the slit; the branch is ambiguous")]
    BranchAmbiguity,
    #[error("particles collided at t = {t} (step halving limit reached)")]
    CollisionDetected { t: f64 },
    #[error("state left its domain at t = {t} (value {value})")]
    StateEscaped { t: f64, value: f64 },
    #[error("clock Y^R - Y^L decreased at index {0}")]
    NonMonotoneClock(usize),
    #[error("force point {index} swallowed at t = {t}")]
    ForcePointSwallowed { index: usize, t: f64 },
    #[error("configuration is outside the chamber: {0}")]
    ChamberViolation(String),
    #[error("conformal map realization failed: {0}")]
    MapRealizationFailed(String),
    #[error("curves touch or cross")]
    CurvesTouch,
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("horizon too short: no sample reached the exit radius")]
    HorizonTooShort,
    #[error("parameter outside the lemma's range: {0}")]
    ParameterOutOfLemmaRange(String),
    #[error("burn-in {given} is shorter than the required {required}")]
    InsufficientBurnIn { given: f64, required: f64 },
    #[error("event probability {p:.3e} is below the resolvable level {floor:.3e}")]
    ProbabilityUnderflow { p: f64, floor: f64 },
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
