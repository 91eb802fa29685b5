//! Achievable information rates and random-coding error exponents of coded
//! modulation (CM), multilevel coding (MLC) and bit-interleaved coded
//! modulation (BICM) on the complex AWGN channel, with shaping of the
//! symbol or bit probabilities.
//!
//! Rates and exponents are in nats unless a name says otherwise.

pub mod channel;
pub mod constellation;
mod ensemble;
pub mod error;
pub mod exponents;
pub mod optim;
pub mod oracle;
pub mod rates;
pub mod shaping;
pub mod wideband;

pub use channel::{
    db_to_linear, default_rule, expect_given_x, gauss_hermite, linear_to_db, panel_rule, sample_channel,
    transition_density, ChannelSampler, ChannelSpec, QuadratureKind, QuadratureRule, DEFAULT_QUADRATURE_ORDER,
};
pub use constellation::{
    brgc, build_qam, free_parameter_map, label_subset, normalize, product_distribution, BitMarginals,
    Constellation, FreeParameterMap, Label, QamLayout, Scheme, Shaping, SymbolDistribution,
};
pub use error::{Error, Result};
pub use exponents::{
    e0_bicm, e0_cm, mlc_msd_exponent, parallel_channel_exponent, random_coding_exponent,
    ExponentPoint, ExponentScheme, GallagerFunction, RateAllocation,
};
pub use rates::{
    bicm_gmi, bicm_rate, binary_channel_density, bit_level_mi, gaussian_capacity, gmi_sup_s,
    mutual_information, GmiOptimum, Integration, MetricVariant, RatePoint, RateScheme,
};
pub use shaping::{optimize, optimize_bicm, optimize_cm, optimize_mlc, ShapingProblem, ShapingResult};
pub use wideband::{ebn0_limit, fit_c1_c2, qpsk_limit_marginals, WidebandFit};
