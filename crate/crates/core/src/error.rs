use thiserror::Error;

use crate::wideband::WidebandFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gray code length must be between 1 and {max}, got {k}")]
    InvalidGrayLength { k: usize, max: usize },

    #[error("square QAM needs an even, positive number of bits, got m = {0}")]
    OddBitCount(usize),

    #[error("label position {position} out of range for m = {m}")]
    PositionOutOfRange { position: usize, m: usize },

    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid probability {value} at index {index}")]
    InvalidProbability { index: usize, value: f64 },

    #[error("distribution sums to {0}, expected 1")]
    NotNormalized(f64),

    #[error("distribution puts all of its mass on zero-energy points")]
    ZeroEnergy,

    #[error("distribution has mean modulus {0:e} after scaling; it is not symmetric")]
    NonzeroMean(f64),

    #[error("constellation has average energy {0} under the input distribution, expected 1")]
    Unnormalized(f64),

    #[error("cannot condition on bit {bit} at position {position}: it has zero probability")]
    ZeroProbabilityCondition { position: usize, bit: u8 },

    #[error("quadrature order {0} outside the supported range 2..=256")]
    QuadratureOrder(usize),

    #[error("integrand is not finite at a quadrature node")]
    NonFinite,

    #[error("sample count must be positive")]
    EmptySample,

    #[error("operation needs a square QAM constellation")]
    NotQam,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rate function returned a negative value {value} at snr {snr}")]
    NegativeRate { snr: f64, value: f64 },

    #[error("wideband fit is unstable under grid halving (c1 = {c1}, c2 = {c2})", c1 = .0.c1, c2 = .0.c2)]
    UnstableFit(Box<WidebandFit>),
}
