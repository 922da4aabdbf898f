use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetonaError {
    #[error("non-physical state: {0}")]
    NonPhysical(String),
    #[error("Hugoniot curve evaluated at its pole tau0 = {0}")]
    PoleAt(f64),
    #[error("no Rayleigh/Hugoniot intersection with tau > tau_minus")]
    NoIntersection,
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("regime violated: {0}")]
    RegimeViolated(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("truncation too short: endpoint mismatch {0:e}")]
    TruncationTooShort(f64),
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("neutral mode: |Re mu| = {0:e}")]
    NeutralMode(f64),
    #[error("stiffness failure at x = {0}")]
    StiffnessFailure(f64),
    #[error("refinement limit reached: {0}")]
    RefinementLimit(String),
    #[error("degenerate eigenvector")]
    DegenerateEigenvector,
    #[error("sign of D'(0) inconsistent with gamma*delta")]
    InconsistentSign,
    #[error("tracking lost at eps = {0}")]
    TrackingLost(f64),
    #[error("degenerate crossing: {0}")]
    Degenerate(String),
    #[error("CFL violation: dt = {dt:e} exceeds {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("blow-up at t = {0}")]
    BlowUp(f64),
    #[error("series too short")]
    TooShort,
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("io: {0}")]
    Io(String),
}

impl DetonaError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        use DetonaError::*;
        match self {
            NonPhysical(_) => "non_physical",
            PoleAt(_) => "pole_at",
            NoIntersection => "no_intersection",
            ConstraintViolated(_) => "constraint_violated",
            RegimeViolated(_) => "regime_violated",
            NoConvergence(_) => "no_convergence",
            TruncationTooShort(_) => "truncation_too_short",
            IllConditioned(_) => "ill_conditioned",
            NeutralMode(_) => "neutral_mode",
            StiffnessFailure(_) => "stiffness_failure",
            RefinementLimit(_) => "refinement_limit",
            DegenerateEigenvector => "degenerate_eigenvector",
            InconsistentSign => "inconsistent_sign",
            TrackingLost(_) => "tracking_lost",
            Degenerate(_) => "degenerate",
            CflViolation { .. } => "cfl_violation",
            BlowUp(_) => "blow_up",
            TooShort => "too_short",
            Config { .. } => "config",
            Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, DetonaError>;

impl From<std::io::Error> for DetonaError {
    fn from(e: std::io::Error) -> Self {
        DetonaError::Io(e.to_string())
    }
}

impl From<csv::Error> for DetonaError {
    fn from(e: csv::Error) -> Self {
        DetonaError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for DetonaError {
    fn from(e: serde_json::Error) -> Self {
        DetonaError::Io(e.to_string())
    }
}
