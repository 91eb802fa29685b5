//! Fixtures shared by the benchmarks.

use bicm_core::{build_qam, normalize, BitMarginals, ChannelSpec, Constellation, Result};

/// Unit-energy `2^m`-QAM under the given bit marginals.
pub fn shaped_qam(m: usize, p0: &[f64]) -> Result<(Constellation, BitMarginals)> {
    let marg = BitMarginals::new(p0.to_vec())?;
    let qam = build_qam(m)?;
    let d = bicm_core::product_distribution(&qam, &marg)?;
    Ok((normalize(&qam, &d)?, marg))
}

pub fn channel_db(db: f64) -> ChannelSpec {
    ChannelSpec::from_db(db).expect("finite snr")
}
