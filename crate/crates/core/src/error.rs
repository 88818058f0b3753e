use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error(
        "no sign change of the signed dressed detuning in [{lo}, {hi}] \
         (grid minimum |Δ'_12| = {min_abs_detuning:e} at ω_d = {at})"
    )]
    NoRootInBracket {
        lo: f64,
        hi: f64,
        min_abs_detuning: f64,
        at: f64,
    },

    #[error("on-regime drive frequency is not set and could not be solved for")]
    MissingDriveFrequency,

    #[error(
        "time step too coarse: doubling steps_per_period from {steps} changed the result by \
         {change:e} (tolerance {tol:e})"
    )]
    StepTooCoarse { steps: usize, change: f64, tol: f64 },

    #[error("propagator unitarity defect {defect:e} exceeds tolerance {tol:e}")]
    NonUnitary { defect: f64, tol: f64 },

    #[error("branch assignment ambiguous at sweep point {point} (value {value})")]
    BranchTrackingAmbiguous { point: usize, value: f64 },

    #[error("branch `{0}` not present in spectrum")]
    BranchNotFound(String),

    #[error("local eigenbasis of H'_1 is ill-defined (ω'_1 = {omega_1_prime:e})")]
    DegenerateEigenbasis { omega_1_prime: f64 },

    #[error("Choi matrix defect: {0}")]
    ChoiDefect(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
