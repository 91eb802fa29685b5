//! Achievable rates: symbol mutual information, the equivalent binary
//! channels of the bit labels, the BICM rate `Σ_j I(B_j;Y)` and the BICM
//! generalized mutual information as a function of the metric exponent `s`.
//!
//! All values are in nats. When the constellation is square QAM and the
//! input distribution factors across the two axes, every integral is split
//! into two one-dimensional ones; otherwise the full two-dimensional tensor
//! grid is used. [`Integration::Tensor`] forces the latter.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::channel::{transition_density, ChannelSpec, QuadratureRule};
use crate::constellation::{label_subset, product_distribution, BitMarginals, Constellation, SymbolDistribution};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::optim::golden_section_max;

const ENERGY_TOL: f64 = 1e-9;
const FACTOR_TOL: f64 = 1e-13;

/// Bit metric used by the BICM decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricVariant {
    /// `q_j(b, y) = Σ_{x ∈ X_b^j} P(y|x) P_X(x)`.
    Classical,
    /// `q_j(b, y) = P_j(y|b)`, the classical metric divided by `P_{B_j}(b)`.
    Normalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Integration {
    #[default]
    Auto,
    Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateScheme {
    Cm,
    Mlc,
    Bicm,
    BicmUniform,
    Gaussian,
}

impl fmt::Display for RateScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateScheme::Cm => "cm",
            RateScheme::Mlc => "mlc",
            RateScheme::Bicm => "bicm",
            RateScheme::BicmUniform => "bicm-uniform",
            RateScheme::Gaussian => "gaussian",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub snr: f64,
    pub rate_bits: f64,
    pub rate_nats: f64,
    pub scheme: RateScheme,
    /// Free shaping parameters; empty for the uniform input and the Gaussian
    /// reference.
    pub shaping: Vec<f64>,
}

impl RatePoint {
    pub fn new(snr: f64, rate_nats: f64, scheme: RateScheme, shaping: Vec<f64>) -> Self {
        RatePoint {
            snr,
            rate_bits: rate_nats / std::f64::consts::LN_2,
            rate_nats,
            scheme,
            shaping,
        }
    }
}

/// A decomposition of the channel into independent parts, each with the
/// global label positions its local bits carry.
pub(crate) struct Model {
    parts: Vec<(Ensemble, Vec<usize>)>,
}

fn check_normalized(c: &Constellation, d: &SymbolDistribution) -> Result<()> {
    if d.len() != c.size() {
        return Err(Error::LengthMismatch {
            expected: c.size(),
            got: d.len(),
        });
    }
    let e = c.energy(d);
    if (e - 1.0).abs() > ENERGY_TOL {
        return Err(Error::Unnormalized(e));
    }
    Ok(())
}

/// Axis marginals if `d` is the product of them.
fn axis_marginals(c: &Constellation, d: &SymbolDistribution) -> Option<[Vec<f64>; 2]> {
    let l = c.layout()?.pam_size();
    let p = d.probs();
    let mut re = vec![0.0; l];
    let mut im = vec![0.0; l];
    for i in 0..l {
        for k in 0..l {
            re[i] += p[i * l + k];
            im[k] += p[i * l + k];
        }
    }
    for i in 0..l {
        for k in 0..l {
            if (p[i * l + k] - re[i] * im[k]).abs() > FACTOR_TOL {
                return None;
            }
        }
    }
    Some([re, im])
}

impl Model {
    pub fn new(c: &Constellation, d: &SymbolDistribution, ch: &ChannelSpec, integration: Integration) -> Result<Self> {
        check_normalized(c, d)?;
        let amp = ch.amplitude();
        if integration == Integration::Auto {
            if let (Some(lay), Some(axes)) = (c.layout(), axis_marginals(c, d)) {
                let labels: Vec<u32> = lay.pam_labels.iter().map(|l| l.value()).collect();
                let parts = (0..2)
                    .map(|k| {
                        let pts: Vec<[f64; 2]> = lay.pam[k].iter().map(|&a| [a, 0.0]).collect();
                        (
                            Ensemble::new(1, &pts, &axes[k], labels.clone(), lay.bits_per_dim(), amp),
                            lay.positions[k].clone(),
                        )
                    })
                    .collect();
                return Ok(Model { parts });
            }
        }
        let pts: Vec<[f64; 2]> = c.points().iter().map(|x| [x.re, x.im]).collect();
        let labels = c.labels().iter().map(|l| l.value()).collect();
        Ok(Model {
            parts: vec![(
                Ensemble::new(2, &pts, d.probs(), labels, c.m(), amp),
                (0..c.m()).collect(),
            )],
        })
    }

    pub fn for_bits(c: &Constellation, marg: &BitMarginals, ch: &ChannelSpec, integration: Integration) -> Result<Self> {
        let d = product_distribution(c, marg)?;
        Model::new(c, &d, ch, integration)
    }

    pub fn m(&self) -> usize {
        self.parts.iter().map(|(_, p)| p.len()).sum()
    }

    /// Part and local bit carrying global position `j`.
    pub fn locate(&self, j: usize) -> Result<(&Ensemble, usize)> {
        self.parts
            .iter()
            .find_map(|(e, pos)| pos.iter().position(|&p| p == j).map(|r| (e, r)))
            .ok_or(Error::PositionOutOfRange {
                position: j,
                m: self.m(),
            })
    }

    /// Part, local bit and local mask of the already `decoded` positions
    /// that share a part with position `j`.
    pub fn conditioning(&self, j: usize, decoded: &[usize]) -> Result<(&Ensemble, usize, u32)> {
        let (ens, pos) = self
            .parts
            .iter()
            .find(|(_, pos)| pos.contains(&j))
            .ok_or(Error::PositionOutOfRange {
                position: j,
                m: self.m(),
            })?;
        let r = pos.iter().position(|&p| p == j).unwrap();
        let mask = ens.mask_of(
            pos.iter()
                .enumerate()
                .filter(|(_, p)| decoded.contains(p))
                .map(|(r, _)| r),
        );
        Ok((ens, r, mask))
    }

    pub fn parts(&self) -> impl Iterator<Item = &Ensemble> {
        self.parts.iter().map(|(e, _)| e)
    }

    pub fn mutual_information(&self, rule: &QuadratureRule) -> Result<f64> {
        self.parts().map(|e| e.mutual_information(rule)).sum()
    }

    pub fn bit_mutual_information(&self, rule: &QuadratureRule, j: usize) -> Result<f64> {
        let (e, r) = self.locate(j)?;
        e.bit_mutual_information(rule, r)
    }

    pub fn bicm_rate(&self, rule: &QuadratureRule) -> Result<f64> {
        (0..self.m()).map(|j| self.bit_mutual_information(rule, j)).sum()
    }

    pub fn gmi(&self, rule: &QuadratureRule, s: f64, variant: MetricVariant) -> Result<f64> {
        (0..self.m())
            .map(|j| {
                let (e, r) = self.locate(j)?;
                e.bit_gmi(rule, r, s, variant)
            })
            .sum()
    }
}

pub fn mutual_information(
    c: &Constellation,
    d: &SymbolDistribution,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
) -> Result<f64> {
    mutual_information_with(c, d, ch, rule, Integration::Auto)
}

pub fn mutual_information_with(
    c: &Constellation,
    d: &SymbolDistribution,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
    integration: Integration,
) -> Result<f64> {
    Model::new(c, d, ch, integration)?.mutual_information(rule)
}

/// Density `P_j(y|b)` of the equivalent binary channel of position `j`.
pub fn binary_channel_density(
    c: &Constellation,
    marg: &BitMarginals,
    ch: &ChannelSpec,
    j: usize,
    b: u8,
    y: Complex64,
) -> Result<f64> {
    let d = product_distribution(c, marg)?;
    let subset = label_subset(c, j, b)?;
    let mass: f64 = subset.iter().map(|&i| d.probs()[i]).sum();
    if mass <= 0.0 {
        return Err(Error::ZeroProbabilityCondition { position: j, bit: b });
    }
    Ok(subset
        .iter()
        .map(|&i| transition_density(y, c.points()[i], ch) * d.probs()[i])
        .sum::<f64>()
        / mass)
}

/// `I(B_j; Y)`; exactly 0 for a deterministic bit.
pub fn bit_level_mi(
    c: &Constellation,
    marg: &BitMarginals,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
    j: usize,
) -> Result<f64> {
    if j >= c.m() {
        return Err(Error::PositionOutOfRange { position: j, m: c.m() });
    }
    if marg.len() == c.m() && marg.is_degenerate(j) {
        return Ok(0.0);
    }
    Model::for_bits(c, marg, ch, Integration::Auto)?.bit_mutual_information(rule, j)
}

/// `Σ_j I(B_j; Y)`.
pub fn bicm_rate(c: &Constellation, marg: &BitMarginals, ch: &ChannelSpec, rule: &QuadratureRule) -> Result<f64> {
    bicm_rate_with(c, marg, ch, rule, Integration::Auto)
}

pub fn bicm_rate_with(
    c: &Constellation,
    marg: &BitMarginals,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
    integration: Integration,
) -> Result<f64> {
    Model::for_bits(c, marg, ch, integration)?.bicm_rate(rule)
}

/// Generalized mutual information of the BICM decoder at fixed `s`.
pub fn bicm_gmi(
    c: &Constellation,
    marg: &BitMarginals,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
    s: f64,
    variant: MetricVariant,
) -> Result<f64> {
    bicm_gmi_with(c, marg, ch, rule, s, variant, Integration::Auto)
}

pub fn bicm_gmi_with(
    c: &Constellation,
    marg: &BitMarginals,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
    s: f64,
    variant: MetricVariant,
    integration: Integration,
) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("s must be positive, got {s}")));
    }
    Model::for_bits(c, marg, ch, integration)?.gmi(rule, s, variant)
}

pub const S_MIN: f64 = 0.05;
pub const S_MAX: f64 = 20.0;
const S_GRID: usize = 41;
const LN_S_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmiOptimum {
    pub s: f64,
    pub gmi: f64,
    /// False if the coarse scan saw more than one sign change of the
    /// discrete gradient; the search then ran over the whole bracket.
    pub concave: bool,
}

/// Maximizes `f(ln s)` over `[ln S_MIN, ln S_MAX]`: a coarse scan to check
/// the shape and locate the peak, then golden section to `|Δ ln s| < 1e-6`.
pub(crate) fn maximize_over_log_s<F>(mut f: F) -> Result<GmiOptimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (lo, hi) = (S_MIN.ln(), S_MAX.ln());
    let step = (hi - lo) / (S_GRID - 1) as f64;
    let grid: Vec<f64> = (0..S_GRID).map(|i| lo + i as f64 * step).collect();
    let values = grid.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let signs: Vec<i8> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.abs() > 1e-13 * scale)
        .map(|d| if d > 0.0 { 1 } else { -1 })
        .collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let concave = changes <= 1;
    let best = (0..S_GRID).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    let (a, b) = if concave {
        (grid[best.saturating_sub(1)], grid[(best + 1).min(S_GRID - 1)])
    } else {
        (lo, hi)
    };
    let mut err = None;
    let (t, v) = golden_section_max(
        |t| match f(t) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        a,
        b,
        LN_S_TOL,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let (t, v) = if v >= values[best] { (t, v) } else { (grid[best], values[best]) };
    Ok(GmiOptimum {
        s: t.exp(),
        gmi: v,
        concave,
    })
}

/// `sup_s` of [`bicm_gmi`] by golden section on `ln s`.
pub fn gmi_sup_s(
    c: &Constellation,
    marg: &BitMarginals,
    ch: &ChannelSpec,
    rule: &QuadratureRule,
    variant: MetricVariant,
) -> Result<GmiOptimum> {
    let model = Model::for_bits(c, marg, ch, Integration::Auto)?;
    maximize_over_log_s(|t| model.gmi(rule, t.exp(), variant))
}

/// `ln(1 + snr)`.
pub fn gaussian_capacity(ch: &ChannelSpec) -> f64 {
    ch.snr().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::gauss_hermite;
    use crate::constellation::{build_qam, normalize};
    use std::f64::consts::{E, LN_2};

    fn setup(m: usize, marg: &BitMarginals) -> (Constellation, SymbolDistribution) {
        let c = build_qam(m).unwrap();
        let d = product_distribution(&c, marg).unwrap();
        (normalize(&c, &d).unwrap(), d)
    }

    #[test]
    fn gaussian_reference() {
        assert_eq!(gaussian_capacity(&ChannelSpec::new(0.0).unwrap()), 0.0);
        assert!((gaussian_capacity(&ChannelSpec::new(1.0).unwrap()) - LN_2).abs() < 1e-15);
        assert!((gaussian_capacity(&ChannelSpec::new(E - 1.0).unwrap()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_snr_rates_vanish() {
        let rule = gauss_hermite(64).unwrap();
        let ch = ChannelSpec::new(0.0).unwrap();
        for m in [2, 4, 6] {
            let marg = BitMarginals::uniform(m);
            let (c, d) = setup(m, &marg);
            assert!(mutual_information(&c, &d, &ch, &rule).unwrap().abs() < 1e-10);
            assert!(bicm_rate(&c, &marg, &ch, &rule).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_ceiling_at_high_snr() {
        let rule = gauss_hermite(64).unwrap();
        let marg = BitMarginals::uniform(4);
        let (c, d) = setup(4, &marg);
        let mi = mutual_information(&c, &d, &ChannelSpec::new(1e6).unwrap(), &rule).unwrap();
        assert!((mi - 4.0 * LN_2).abs() < 1e-3, "{mi}");
    }

    #[test]
    fn unnormalized_input_rejected() {
        let rule = gauss_hermite(16).unwrap();
        let c = build_qam(4).unwrap();
        let d = SymbolDistribution::uniform(16);
        let ch = ChannelSpec::new(1.0).unwrap();
        assert!(matches!(mutual_information(&c, &d, &ch, &rule), Err(Error::Unnormalized(_))));
    }

    #[test]
    fn degenerate_bit_has_zero_rate() {
        let rule = gauss_hermite(32).unwrap();
        let marg = BitMarginals::new(vec![0.5, 1.0, 0.5, 0.0]).unwrap();
        let (c, _) = setup(4, &marg);
        let ch = ChannelSpec::new(3.0).unwrap();
        assert_eq!(bit_level_mi(&c, &marg, &ch, &rule, 1).unwrap(), 0.0);
        assert_eq!(bit_level_mi(&c, &marg, &ch, &rule, 3).unwrap(), 0.0);
        assert!(bit_level_mi(&c, &marg, &ch, &rule, 0).unwrap() > 0.0);
        assert!(bit_level_mi(&c, &marg, &ch, &rule, 4).is_err());
    }

    #[test]
    fn binary_density_uniform_and_collapsed() {
        let ch = ChannelSpec::new(2.0).unwrap();
        let marg = BitMarginals::uniform(4);
        let (c, _) = setup(4, &marg);
        let y = Complex64::new(0.3, -0.2);
        let subset = label_subset(&c, 1, 1).unwrap();
        let avg = subset
            .iter()
            .map(|&i| transition_density(y, c.points()[i], &ch))
            .sum::<f64>()
            / subset.len() as f64;
        let v = binary_channel_density(&c, &marg, &ch, 1, 1, y).unwrap();
        assert!((v - avg).abs() < 1e-15);

        // Amplitude bits pinned to 0: only the four outer corners survive.
        let marg = BitMarginals::new(vec![0.5, 1.0, 0.5, 1.0]).unwrap();
        let (c, d) = setup(4, &marg);
        let alive: Vec<usize> = label_subset(&c, 0, 0)
            .unwrap()
            .into_iter()
            .filter(|&i| d.probs()[i] > 0.0)
            .collect();
        assert_eq!(alive.len(), 2);
        let avg = alive
            .iter()
            .map(|&i| transition_density(y, c.points()[i], &ch))
            .sum::<f64>()
            / 2.0;
        let v = binary_channel_density(&c, &marg, &ch, 0, 0, y).unwrap();
        assert!((v - avg).abs() < 1e-15);
        assert!(matches!(
            binary_channel_density(&c, &marg, &ch, 1, 1, y),
            Err(Error::ZeroProbabilityCondition { position: 1, bit: 1 })
        ));
    }

    #[test]
    fn binary_density_integrates_to_one() {
        let rule = gauss_hermite(64).unwrap();
        let ch = ChannelSpec::new(5.0).unwrap();
        let marg = BitMarginals::new(vec![0.5, 0.7, 0.5, 0.3]).unwrap();
        let (c, _) = setup(4, &marg);
        for j in 0..4 {
            for b in 0..2 {
                let mut total = 0.0;
                for (t, wt) in rule.nodes().iter().zip(rule.weights()) {
                    for (u, wu) in rule.nodes().iter().zip(rule.weights()) {
                        let y = Complex64::new(*t, *u);
                        let p = binary_channel_density(&c, &marg, &ch, j, b, y).unwrap();
                        total += wt * wu * p * (t * t + u * u).exp();
                    }
                }
                assert!((total - 1.0).abs() < 1e-9, "j={j} b={b}: {total}");
            }
        }
    }

    #[test]
    fn normalized_metric_at_unit_s_is_the_bicm_rate() {
        let rule = gauss_hermite(64).unwrap();
        let ch = ChannelSpec::from_db(6.0).unwrap();
        let marg = BitMarginals::new(vec![0.5, 0.8, 0.5, 0.8]).unwrap();
        let (c, _) = setup(4, &marg);
        let rate = bicm_rate(&c, &marg, &ch, &rule).unwrap();
        let g = bicm_gmi(&c, &marg, &ch, &rule, 1.0, MetricVariant::Normalized).unwrap();
        assert!((g - rate).abs() < 1e-9);
        let opt = gmi_sup_s(&c, &marg, &ch, &rule, MetricVariant::Normalized).unwrap();
        assert!(opt.concave);
        assert!((opt.s - 1.0).abs() < 1e-3, "{}", opt.s);
        assert!((opt.gmi - rate).abs() < 1e-8);
    }

    #[test]
    fn variants_agree_for_uniform_bits() {
        let rule = gauss_hermite(48).unwrap();
        let ch = ChannelSpec::from_db(3.0).unwrap();
        let marg = BitMarginals::uniform(4);
        let (c, _) = setup(4, &marg);
        for s in [0.1, 0.5, 1.0, 2.0, 7.0] {
            let a = bicm_gmi(&c, &marg, &ch, &rule, s, MetricVariant::Classical).unwrap();
            let b = bicm_gmi(&c, &marg, &ch, &rule, s, MetricVariant::Normalized).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        let opt = gmi_sup_s(&c, &marg, &ch, &rule, MetricVariant::Classical).unwrap();
        assert!((opt.s - 1.0).abs() < 1e-3);
        assert!(bicm_gmi(&c, &marg, &ch, &rule, -1.0, MetricVariant::Classical).is_err());
    }

    #[test]
    fn gmi_vanishes_as_s_goes_to_zero() {
        let rule = gauss_hermite(48).unwrap();
        let ch = ChannelSpec::from_db(8.0).unwrap();
        let marg = BitMarginals::new(vec![0.5, 0.65, 0.5, 0.65]).unwrap();
        let (c, _) = setup(4, &marg);
        let mut prev = f64::INFINITY;
        for s in [1e-2, 1e-3, 1e-4, 1e-5] {
            let g = bicm_gmi(&c, &marg, &ch, &rule, s, MetricVariant::Classical).unwrap();
            assert!(g.abs() < prev);
            prev = g.abs();
        }
        assert!(prev < 1e-4);
    }
}
