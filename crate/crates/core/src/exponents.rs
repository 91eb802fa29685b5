//! Gallager functions and random-coding error exponents.
//!
//! Every Gallager function is evaluated in expectation form,
//! `E0 = -ln E[(Σ_{x'} P(x') (q(x',Y)/q(X,Y))^s)^ρ]`, with the matched
//! (likelihood) metric and `s = 1/(1+ρ)` for CM, the BICM bit metric for the
//! mismatched decoder, and the binary equivalent channels for the
//! parallel-channel model and the multilevel stages.
//!
//! The multistage-decoding MLC exponent is a reconstruction: each level
//! `j` is a binary code on the channel `B_j → (Y, B_<j)` at rate `R_j`,
//! and the block exponent is the smallest level exponent.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::OnceLock;

use crate::channel::{ChannelSpec, QuadratureRule};
use crate::constellation::{BitMarginals, Constellation, SymbolDistribution};
use crate::ensemble::GallagerTable;
use crate::error::{Error, Result};
use crate::optim::golden_section_max;
use crate::rates::{Integration, MetricVariant, Model, S_MAX, S_MIN};

const RHO_TOL: f64 = 1e-8;
const LN_S_TOL: f64 = 1e-6;

/// Largest precomputed table kept per Gallager function, in values.
const TABLE_LIMIT: usize = 1 << 23;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentScheme {
    Cm,
    Bicm,
    Parallel,
    MlcLevel,
    MlcMsd,
}

impl fmt::Display for ExponentScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExponentScheme::Cm => "cm",
            ExponentScheme::Bicm => "bicm",
            ExponentScheme::Parallel => "parallel",
            ExponentScheme::MlcLevel => "mlc-level",
            ExponentScheme::MlcMsd => "mlc-msd",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPoint {
    /// Rate in nats per channel use.
    pub rate: f64,
    /// Exponent in nats.
    pub exponent: f64,
    pub rho: f64,
    /// Maximizing metric exponent for the mismatched decoder.
    pub s: Option<f64>,
    pub scheme: ExponentScheme,
}

enum Kind {
    Cm,
    Bicm(MetricVariant),
    Parallel,
    Level { position: usize, mask: u32 },
}

/// A Gallager function `E0(ρ)` or `E0(ρ, s)` ready for evaluation.
///
/// The metric ratios on the quadrature grid do not depend on `ρ` or `s`, so
/// they are tabulated on first use when small enough; larger problems are
/// evaluated directly every time.
pub struct GallagerFunction<'a> {
    kind: Kind,
    model: Model,
    rule: &'a QuadratureRule,
    tables: OnceLock<Option<Vec<GallagerTable>>>,
}

impl<'a> GallagerFunction<'a> {
    /// ML decoding with input distribution `d`.
    pub fn cm(
        c: &Constellation,
        d: &SymbolDistribution,
        ch: &ChannelSpec,
        rule: &'a QuadratureRule,
    ) -> Result<Self> {
        Self::cm_with(c, d, ch, rule, Integration::Auto)
    }

    pub fn cm_with(
        c: &Constellation,
        d: &SymbolDistribution,
        ch: &ChannelSpec,
        rule: &'a QuadratureRule,
        integration: Integration,
    ) -> Result<Self> {
        Ok(GallagerFunction {
            kind: Kind::Cm,
            model: Model::new(c, d, ch, integration)?,
            rule,
            tables: OnceLock::new(),
        })
    }

    /// The BICM bit-metric decoder.
    pub fn bicm(
        c: &Constellation,
        marg: &BitMarginals,
        ch: &ChannelSpec,
        rule: &'a QuadratureRule,
        variant: MetricVariant,
    ) -> Result<Self> {
        Self::bicm_with(c, marg, ch, rule, variant, Integration::Auto)
    }

    pub fn bicm_with(
        c: &Constellation,
        marg: &BitMarginals,
        ch: &ChannelSpec,
        rule: &'a QuadratureRule,
        variant: MetricVariant,
        integration: Integration,
    ) -> Result<Self> {
        Ok(GallagerFunction {
            kind: Kind::Bicm(variant),
            model: Model::for_bits(c, marg, ch, integration)?,
            rule,
            tables: OnceLock::new(),
        })
    }

    /// Sum of the binary Gallager functions of the equivalent bit channels.
    pub fn parallel(
        c: &Constellation,
        marg: &BitMarginals,
        ch: &ChannelSpec,
        rule: &'a QuadratureRule,
    ) -> Result<Self> {
        Ok(GallagerFunction {
            kind: Kind::Parallel,
            model: Model::for_bits(c, marg, ch, Integration::Auto)?,
            rule,
            tables: OnceLock::new(),
        })
    }

    /// Level `position` of a multistage decoder that has already decoded
    /// the positions in `decoded`.
    pub fn mlc_level(
        c: &Constellation,
        marg: &BitMarginals,
        ch: &ChannelSpec,
        rule: &'a QuadratureRule,
        position: usize,
        decoded: &[usize],
    ) -> Result<Self> {
        let model = Model::for_bits(c, marg, ch, Integration::Auto)?;
        let (_, _, mask) = model.conditioning(position, decoded)?;
        Ok(GallagerFunction {
            kind: Kind::Level { position, mask },
            model,
            rule,
            tables: OnceLock::new(),
        })
    }

    pub fn is_mismatched(&self) -> bool {
        matches!(self.kind, Kind::Bicm(_))
    }

    pub fn scheme(&self) -> ExponentScheme {
        match self.kind {
            Kind::Cm => ExponentScheme::Cm,
            Kind::Bicm(_) => ExponentScheme::Bicm,
            Kind::Parallel => ExponentScheme::Parallel,
            Kind::Level { .. } => ExponentScheme::MlcLevel,
        }
    }

    /// `E0(ρ, s)`; `s` is ignored by the matched functions.
    pub fn e0(&self, rho: f64, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!("rho must lie in [0, 1], got {rho}")));
        }
        if rho == 0.0 {
            return Ok(0.0);
        }
        if self.is_mismatched() && !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("s must be positive, got {s}")));
        }
        if let Some(tables) = self.tables.get_or_init(|| self.build_tables()) {
            let c = if self.is_mismatched() { s } else { 1.0 / (1.0 + rho) };
            let v: f64 = tables.iter().map(|t| t.e0(rho, c)).sum();
            return if v.is_finite() { Ok(v) } else { Err(Error::NonFinite) };
        }
        self.e0_direct(rho, s)
    }

    fn build_tables(&self) -> Option<Vec<GallagerTable>> {
        let size: usize = self.model.parts().map(|e| e.table_size(self.rule)).sum();
        if size > TABLE_LIMIT {
            return None;
        }
        let tables: Result<Vec<_>> = match self.kind {
            Kind::Cm => self.model.parts().map(|e| e.matched_table(self.rule)).collect(),
            Kind::Bicm(variant) => self
                .model
                .parts()
                .map(|e| e.mismatched_table(self.rule, variant))
                .collect(),
            Kind::Parallel => (0..self.model.m())
                .filter_map(|j| {
                    let (e, r) = self.model.locate(j).ok()?;
                    (!e.bit_is_degenerate(r)).then(|| e.level_table(self.rule, r, 0))
                })
                .collect(),
            Kind::Level { position, mask } => {
                let (e, r) = self.model.locate(position).ok()?;
                if e.bit_is_degenerate(r) {
                    Ok(Vec::new())
                } else {
                    e.level_table(self.rule, r, mask).map(|t| vec![t])
                }
            }
        };
        tables.ok()
    }

    fn e0_direct(&self, rho: f64, s: f64) -> Result<f64> {
        match self.kind {
            Kind::Cm => self.model.parts().map(|e| e.e0_matched(self.rule, rho)).sum(),
            Kind::Bicm(variant) => self
                .model
                .parts()
                .map(|e| e.e0_mismatched(self.rule, rho, s, variant))
                .sum(),
            Kind::Parallel => (0..self.model.m())
                .map(|j| {
                    let (e, r) = self.model.locate(j)?;
                    e.e0_bit(self.rule, r, rho)
                })
                .sum(),
            Kind::Level { position, mask } => {
                let (e, r) = self.model.locate(position)?;
                e.e0_level(self.rule, r, mask, rho)
            }
        }
    }

    /// Slope of `E0` at `ρ = 0`: the information rate the function belongs
    /// to (for the mismatched decoder, the GMI at the given `s`).
    pub fn rate(&self, s: f64) -> Result<f64> {
        match self.kind {
            Kind::Cm => self.model.mutual_information(self.rule),
            Kind::Bicm(variant) => self.model.gmi(self.rule, s, variant),
            Kind::Parallel => self.model.bicm_rate(self.rule),
            Kind::Level { position, mask } => {
                let (e, r) = self.model.locate(position)?;
                e.level_mutual_information(self.rule, r, mask)
            }
        }
    }

    /// `max_s E0(ρ, s)` for the mismatched decoder; `E0(ρ)` otherwise.
    pub fn e0_best_s(&self, rho: f64) -> Result<(f64, Option<f64>)> {
        if !self.is_mismatched() {
            return Ok((self.e0(rho, 1.0 / (1.0 + rho))?, None));
        }
        let guess = 1.0 / (1.0 + rho);
        if rho == 0.0 {
            return Ok((0.0, Some(guess)));
        }
        let mut err = None;
        let (t, v) = golden_section_max(
            |t| match self.e0(rho, t.exp()) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            S_MIN.ln(),
            S_MAX.ln(),
            LN_S_TOL,
        );
        if let Some(e) = err {
            return Err(e);
        }
        let at_guess = self.e0(rho, guess)?;
        Ok(if at_guess > v { (at_guess, Some(guess)) } else { (v, Some(t.exp())) })
    }
}

/// `sup_{0≤ρ≤1} E0(ρ) - ρR`, jointly with `s > 0` for the mismatched
/// decoder.
pub fn random_coding_exponent(g: &GallagerFunction<'_>, rate: f64) -> Result<ExponentPoint> {
    if !(rate >= 0.0) {
        return Err(Error::InvalidParameter(format!("rate must be >= 0, got {rate}")));
    }
    let mut err = None;
    let mut objective = |rho: f64| match g.e0_best_s(rho) {
        Ok((v, _)) => v - rho * rate,
        Err(e) => {
            err.get_or_insert(e);
            f64::NEG_INFINITY
        }
    };
    let (rho, v) = golden_section_max(&mut objective, 0.0, 1.0, RHO_TOL);
    let at_one = objective(1.0);
    if let Some(e) = err {
        return Err(e);
    }
    let (rho, v) = if at_one >= v { (1.0, at_one) } else { (rho, v) };
    let (rho, exponent) = if v > 0.0 { (rho, v) } else { (0.0, 0.0) };
    let s = if g.is_mismatched() { g.e0_best_s(rho)?.1 } else { None };
    Ok(ExponentPoint {
        rate,
        exponent,
        rho,
        s,
        scheme: g.scheme(),
    })
}

pub fn e0_cm(
    c: &Constellation,
    d: &SymbolDistribution,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
    rho: f64,
) -> Result<f64> {
    GallagerFunction::cm(c, d, ch, rule)?.e0(rho, 0.0)
}

pub fn e0_bicm(
    c: &Constellation,
    marg: &BitMarginals,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
    rho: f64,
    s: f64,
    variant: MetricVariant,
) -> Result<f64> {
    GallagerFunction::bicm(c, marg, ch, rule, variant)?.e0(rho, s)
}

pub fn parallel_channel_exponent(
    c: &Constellation,
    marg: &BitMarginals,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
    rate: f64,
) -> Result<ExponentPoint> {
    random_coding_exponent(&GallagerFunction::parallel(c, marg, ch, rule)?, rate)
}

/// Split of the total rate across MLC levels.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateAllocation {
    /// `R_j = R · I_j / Σ_k I_k` with `I_j` the chain-rule level rates.
    #[default]
    Proportional,
    /// Explicit per-level rates (nats), indexed by label position.
    Custom(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelExponent {
    pub position: usize,
    pub rate: f64,
    pub capacity: f64,
    pub exponent: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlcExponent {
    pub point: ExponentPoint,
    pub levels: Vec<LevelExponent>,
    /// Some level was asked to run at or above its capacity.
    pub overloaded: bool,
}

/// Multistage-decoding MLC exponent: the minimum of the level exponents.
///
/// Levels are decoded in `order` (label order if `None`); deterministic
/// bits carry no code and are skipped.
pub fn mlc_msd_exponent(
    c: &Constellation,
    marg: &BitMarginals,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
    rate: f64,
    allocation: &RateAllocation,
    order: Option<&[usize]>,
) -> Result<MlcExponent> {
    let m = c.m();
    let order: Vec<usize> = order.map(<[usize]>::to_vec).unwrap_or_else(|| (0..m).collect());
    let mut sorted = order.clone();
    sorted.sort_unstable();
    if sorted != (0..m).collect::<Vec<_>>() {
        return Err(Error::InvalidParameter(format!("{order:?} is not a decoding order")));
    }
    if marg.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: marg.len() });
    }
    let mut stages = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        if marg.is_degenerate(j) {
            continue;
        }
        let g = GallagerFunction::mlc_level(c, marg, ch, rule, j, &order[..k])?;
        let capacity = g.rate(1.0)?;
        stages.push((j, g, capacity));
    }
    let total: f64 = stages.iter().map(|s| s.2).sum();
    let rates: Vec<f64> = match allocation {
        RateAllocation::Proportional => stages
            .iter()
            .map(|s| if total > 0.0 { rate * s.2 / total } else { 0.0 })
            .collect(),
        RateAllocation::Custom(per) => {
            if per.len() != m {
                return Err(Error::LengthMismatch { expected: m, got: per.len() });
            }
            stages.iter().map(|s| per[s.0]).collect()
        }
    };
    let mut levels = Vec::with_capacity(stages.len());
    let mut overloaded = false;
    for ((j, g, capacity), r) in stages.iter().zip(&rates) {
        let p = random_coding_exponent(g, *r)?;
        if *r >= *capacity {
            overloaded = true;
        }
        let exponent = if *r >= *capacity { 0.0 } else { p.exponent };
        levels.push(LevelExponent {
            position: *j,
            rate: *r,
            capacity: *capacity,
            exponent,
            rho: p.rho,
        });
    }
    let worst = levels
        .iter()
        .min_by(|a, b| a.exponent.total_cmp(&b.exponent));
    let point = ExponentPoint {
        rate,
        exponent: worst.map_or(0.0, |l| l.exponent),
        rho: worst.map_or(0.0, |l| l.rho),
        s: None,
        scheme: ExponentScheme::MlcMsd,
    };
    Ok(MlcExponent {
        point,
        levels,
        overloaded,
    })
}
