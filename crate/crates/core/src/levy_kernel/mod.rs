//! Analytic kernel: lifespan measures, the Laplace exponent
//! `psi(lambda) = lambda - int (1 - e^{-lambda r}) Lambda(dr)`, its largest
//! root `eta`, the inverse `phi`, and the scale function `W`.

mod config;
mod exponent;
mod measure;
mod scale;

pub use config::{ComponentConfig, LawConfig, Level, MeasureConfig};
pub use exponent::{hazard_spec, ClosedFormScale, Criticality, PsiModel, ROOT_TOLERANCE};
pub use measure::{
    LifespanLaw, LifespanSpec, PiecewiseHazard, Window, REJECTION_CAP, WEIGHT_TOLERANCE,
};
pub use scale::{ScaleFunction, ScaleTable, STABILITY_LIMIT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("total mass b must be positive and finite, got {0}")]
    NonPositiveMass(f64),
    #[error("parameter {0} must be positive")]
    NegativeParameter(&'static str),
    #[error("mixture weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("mixture has no components")]
    EmptyMixture,
    #[error("empirical sample is empty")]
    EmptySample,
    #[error("invalid hazard: {0}")]
    InvalidHazard(String),
    #[error("argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("argument {0} outside [0, 1]")]
    OutOfUnitInterval(f64),
    #[error("offspring numbers are infinite with positive probability (q > 0)")]
    InfiniteOffspring,
    #[error("conditioning on extinction requires a supercritical measure")]
    NotSupercritical,
    #[error("extinction has probability zero for this measure")]
    ExtinctionImpossible,
    #[error("rejection sampler exhausted {0} attempts; measure is pathological")]
    RejectionExhausted(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("step h={h} too coarse for b={b}: h*b must stay below {limit}")]
    UnstableStep { h: f64, b: f64, limit: f64 },
}
