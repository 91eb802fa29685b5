//! Complex AWGN channel `Y = √snr·X + Z`, `Z` circularly symmetric with
//! unit total variance (1/2 per real dimension).
//!
//! Gaussian expectations are sums over a [`QuadratureRule`] for the weight
//! `e^{-t²}`, which matches the per-axis noise density `e^{-z²}/√π`: either
//! Gauss–Hermite in the physicists' convention or the composite
//! [`panel_rule`], the default for rates and exponents.
//!
//! The sampler is pinned so runs are reproducible everywhere: ChaCha8
//! seeded with `seed_from_u64(seed)` (stream `k` for batch `k`), uniforms
//! from the top 53 bits of `next_u64`, symbols by inverse CDF over the
//! cumulative probabilities in index order, and noise by the polar form of
//! Box–Muller, `√(-ln u₁)·e^{2πi u₂}` with `u₁ = 1 - uniform`.

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constellation::{Constellation, SymbolDistribution};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    snr: f64,
}

impl ChannelSpec {
    pub fn new(snr: f64) -> Result<Self> {
        if !(snr >= 0.0 && snr.is_finite()) {
            return Err(Error::InvalidParameter(format!("snr must be >= 0, got {snr}")));
        }
        Ok(ChannelSpec { snr })
    }

    pub fn from_db(snr_db: f64) -> Result<Self> {
        Self::new(db_to_linear(snr_db))
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn amplitude(&self) -> f64 {
        self.snr.sqrt()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `P(y|x) = exp(-|y - √snr·x|²) / π`.
pub fn transition_density(y: Complex64, x: Complex64, ch: &ChannelSpec) -> f64 {
    (-(y - x * ch.amplitude()).norm_sqr()).exp() / PI
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub const DEFAULT_QUADRATURE_ORDER: usize = 64;

/// Gauss–Hermite rule of the given order, nodes ascending.
///
/// Each root is bracketed by bisection on the Sturm count of the Jacobi
/// matrix and then polished by Newton iteration on the orthonormal Hermite
/// recurrence, which also yields the weight.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if !(2..=256).contains(&order) {
        return Err(Error::QuadratureOrder(order));
    }
    let n = order;
    let nf = n as f64;
    let pim4 = PI.powf(-0.25);
    // squared off-diagonal of the Jacobi matrix: k/2
    let below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = -x;
        for k in 0..n {
            if k > 0 {
                let d = if q == 0.0 { f64::EPSILON } else { q };
                q = -x - (k as f64 / 2.0) / d;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let bound = (2.0 * nf + 1.0).sqrt() + 1.0;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in n / 2..n {
        // i-th smallest eigenvalue
        let (mut lo, mut hi) = (0.0, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if below(mid) > i {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut z = 0.5 * (lo + hi);
        let mut pp = 0.0;
        for it in 0..4 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            if it < 3 {
                z -= p1 / pp;
            }
        }
        x[i] = z;
        w[i] = 2.0 / (pp * pp);
        x[n - 1 - i] = -z;
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        nodes: x,
        weights: w,
    })
}

/// Family of the 1-D rule behind rate and exponent integrals. `order` is the
/// node count for Gauss–Hermite and the panel count for the composite rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureKind {
    #[default]
    Panel,
    Hermite,
}

impl QuadratureKind {
    pub fn rule(self, order: usize) -> Result<QuadratureRule> {
        match self {
            QuadratureKind::Panel => panel_rule(order),
            QuadratureKind::Hermite => gauss_hermite(order),
        }
    }
}

impl std::str::FromStr for QuadratureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "panel" => Ok(QuadratureKind::Panel),
            "hermite" => Ok(QuadratureKind::Hermite),
            other => Err(Error::InvalidParameter(format!("unknown quadrature '{other}'"))),
        }
    }
}

/// The composite rule with [`DEFAULT_QUADRATURE_ORDER`] panels.
pub fn default_rule() -> QuadratureRule {
    panel_rule(DEFAULT_QUADRATURE_ORDER).expect("default order is in range")
}

/// Half-width of the interval covered by [`panel_rule`]; `e^{-t²}` is below
/// `1e-35` outside it.
pub const PANEL_SPAN: f64 = 9.0;
/// Gauss–Legendre points per panel in [`panel_rule`].
pub const PANEL_POINTS: usize = 8;

/// Composite rule for the weight `e^{-t²}`: `[-9, 9]` cut into `panels`
/// equal panels with an 8-point Gauss–Legendre rule on each.
///
/// Log-likelihood integrands at moderate and high snr have soft kinks a few
/// tenths of a noise standard deviation wide, which a single Gauss–Hermite
/// rule of practical order resolves only to about `1e-6`. Equal panels keep
/// the node spacing uniform where the kinks are.
pub fn panel_rule(panels: usize) -> Result<QuadratureRule> {
    if !(2..=1024).contains(&panels) {
        return Err(Error::QuadratureOrder(panels));
    }
    let (gl_x, gl_w) = gauss_legendre(PANEL_POINTS);
    let h = 2.0 * PANEL_SPAN / panels as f64;
    let mut nodes = Vec::with_capacity(panels * PANEL_POINTS);
    let mut weights = Vec::with_capacity(panels * PANEL_POINTS);
    for k in 0..panels {
        let mid = -PANEL_SPAN + (k as f64 + 0.5) * h;
        for (x, w) in gl_x.iter().zip(&gl_w) {
            let t = mid + 0.5 * h * x;
            nodes.push(t);
            weights.push(0.5 * h * w * (-t * t).exp());
        }
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for it in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-16 || it == 99 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[g(Y) | X = x]` by tensor-product quadrature.
pub fn expect_given_x<G>(x: Complex64, ch: &ChannelSpec, rule: &QuadratureRule, mut g: G) -> Result<f64>
where
    G: FnMut(Complex64) -> f64,
{
    let center = x * ch.amplitude();
    let mut acc = 0.0;
    for (tr, wr) in rule.nodes.iter().zip(&rule.weights) {
        for (ti, wi) in rule.nodes.iter().zip(&rule.weights) {
            let v = g(center + Complex64::new(*tr, *ti));
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            acc += wr * wi * v;
        }
    }
    Ok(acc / PI)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSample {
    pub index: usize,
    pub x: Complex64,
    pub y: Complex64,
}

/// Seeded draws of `(X, Y)`.
pub struct ChannelSampler<'a> {
    points: &'a [Complex64],
    cumulative: Vec<f64>,
    last: usize,
    amplitude: f64,
    rng: ChaCha8Rng,
}

impl<'a> ChannelSampler<'a> {
    pub fn new(
        c: &'a Constellation,
        d: &SymbolDistribution,
        ch: &ChannelSpec,
        seed: u64,
    ) -> Result<Self> {
        Self::with_stream(c, d, ch, seed, 0)
    }

    pub fn with_stream(
        c: &'a Constellation,
        d: &SymbolDistribution,
        ch: &ChannelSpec,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        if d.len() != c.size() {
            return Err(Error::LengthMismatch {
                expected: c.size(),
                got: d.len(),
            });
        }
        let mut cumulative = Vec::with_capacity(d.len());
        let mut acc = 0.0;
        for p in d.probs() {
            acc += p;
            cumulative.push(acc);
        }
        let last = d.probs().iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(ChannelSampler {
            points: c.points(),
            cumulative,
            last,
            amplitude: ch.amplitude(),
            rng,
        })
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn noise(&mut self) -> Complex64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        Complex64::new(r * c, r * s)
    }

    pub fn draw(&mut self) -> ChannelSample {
        let u = self.uniform();
        let index = self.cumulative.partition_point(|&c| c <= u).min(self.last);
        let x = self.points[index];
        let y = x * self.amplitude + self.noise();
        ChannelSample { index, x, y }
    }
}

/// `n` independent `(x, y)` draws; identical seeds give identical output.
pub fn sample_channel(
    d: &SymbolDistribution,
    c: &Constellation,
    ch: &ChannelSpec,
    seed: u64,
    n: usize,
) -> Result<Vec<(Complex64, Complex64)>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut sampler = ChannelSampler::new(c, d, ch, seed)?;
    Ok((0..n)
        .map(|_| {
            let s = sampler.draw();
            (s.x, s.y)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_qam, normalize};

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    #[test]
    fn order_two_closed_form() {
        let r = gauss_hermite(2).unwrap();
        let a = 0.5f64.sqrt();
        assert!((r.nodes()[0] + a).abs() < 1e-15 && (r.nodes()[1] - a).abs() < 1e-15);
        for w in r.weights() {
            assert!((w - SQRT_PI / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_nodes_and_moments() {
        for n in [2, 3, 7, 16, 64, 65, 128, 200, 256] {
            let r = gauss_hermite(n).unwrap();
            let total: f64 = r.weights().iter().sum();
            assert!((total - SQRT_PI).abs() < 1e-10, "order {n}: {total}");
            for i in 0..n {
                assert!((r.nodes()[i] + r.nodes()[n - 1 - i]).abs() < 1e-12);
            }
            assert!(r.nodes().windows(2).all(|p| p[0] < p[1]));
            let second: f64 = r.nodes().iter().zip(r.weights()).map(|(t, w)| w * t * t).sum();
            assert!((second - SQRT_PI / 2.0).abs() < 1e-10, "order {n}: {second}");
        }
        assert!(matches!(gauss_hermite(1), Err(Error::QuadratureOrder(1))));
        assert!(matches!(gauss_hermite(257), Err(Error::QuadratureOrder(257))));
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        // ∫ t^{2k} e^{-t²} dt = Γ(k + 1/2) = (2k-1)!! √π / 2^k
        let r = gauss_hermite(10).unwrap();
        let mut expect = SQRT_PI;
        for k in 1..=9 {
            expect *= (2 * k - 1) as f64 / 2.0;
            let got: f64 = r
                .nodes()
                .iter()
                .zip(r.weights())
                .map(|(t, w)| w * t.powi(2 * k))
                .sum();
            assert!((got - expect).abs() < 1e-12 * expect, "k={k}");
        }
    }

    #[test]
    fn cosine_against_trapezoid() {
        let r = gauss_hermite(64).unwrap();
        let gh: f64 = r.nodes().iter().zip(r.weights()).map(|(t, w)| w * t.cos()).sum();
        // 10^6-point trapezoid on [-12, 12]
        let n = 1_000_000;
        let h = 24.0 / n as f64;
        let mut trap = 0.0;
        for i in 0..=n {
            let t = -12.0 + i as f64 * h;
            let f = (-t * t).exp() * t.cos();
            trap += if i == 0 || i == n { 0.5 * f } else { f };
        }
        trap *= h;
        assert!((gh - trap).abs() < 1e-12, "{gh} vs {trap}");
    }

    #[test]
    fn panel_rule_moments_and_kinks() {
        let r = panel_rule(64).unwrap();
        assert_eq!(r.order(), 64 * PANEL_POINTS);
        let sum = |f: &dyn Fn(f64) -> f64| -> f64 { r.nodes().iter().zip(r.weights()).map(|(t, w)| w * f(*t)).sum() };
        assert!((sum(&|_| 1.0) - SQRT_PI).abs() < 1e-14);
        assert!((sum(&|t| t * t) - SQRT_PI / 2.0).abs() < 1e-14);
        assert!((sum(&|t| t.powi(4)) - 3.0 * SQRT_PI / 4.0).abs() < 1e-14);
        assert!((sum(&|t| t.cos()) - SQRT_PI * (-0.25f64).exp()).abs() < 1e-14);

        // softplus with a kink 0.1 wide: panels converge, a single rule does not
        let kink = |t: f64| (10.0 * (t - 0.7)).exp().ln_1p() / 10.0;
        let reference: f64 = {
            let fine = panel_rule(1024).unwrap();
            fine.nodes().iter().zip(fine.weights()).map(|(t, w)| w * kink(*t)).sum()
        };
        assert!((sum(&kink) - reference).abs() < 1e-12, "{}", sum(&kink) - reference);
        let gh = gauss_hermite(64).unwrap();
        let v: f64 = gh.nodes().iter().zip(gh.weights()).map(|(t, w)| w * kink(*t)).sum();
        assert!((v - reference).abs() > 1e-9, "{}", v - reference);

        assert!(panel_rule(1).is_err());
        assert_eq!("hermite".parse::<QuadratureKind>().unwrap(), QuadratureKind::Hermite);
        assert!("simpson".parse::<QuadratureKind>().is_err());
    }

    #[test]
    fn density_values_and_normalization() {
        let ch = ChannelSpec::new(2.5).unwrap();
        let x = Complex64::new(0.3, -0.7);
        let y = x * ch.amplitude();
        assert!((transition_density(y, x, &ch) - 1.0 / PI).abs() < 1e-15);
        let y1 = y + Complex64::new(0.6, 0.8);
        assert!((transition_density(y1, x, &ch) - (-1.0f64).exp() / PI).abs() < 1e-15);

        let rule = gauss_hermite(64).unwrap();
        // ∫ P(y|x) dy with y = t + i u: weight e^{-t²-u²} absorbed.
        let mut total = 0.0;
        for (t, wt) in rule.nodes().iter().zip(rule.weights()) {
            for (u, wu) in rule.nodes().iter().zip(rule.weights()) {
                let yy = Complex64::new(*t, *u);
                total += wt * wu * transition_density(yy, x, &ch) * (t * t + u * u).exp();
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn expectation_moments() {
        let rule = gauss_hermite(64).unwrap();
        let ch = ChannelSpec::new(7.0).unwrap();
        let one = expect_given_x(Complex64::new(0.4, 0.1), &ch, &rule, |_| 1.0).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        let e = expect_given_x(Complex64::new(0.0, 0.0), &ch, &rule, |y| y.norm_sqr()).unwrap();
        assert!((e - 1.0).abs() < 1e-10);
        let ch4 = ChannelSpec::new(4.0).unwrap();
        let e = expect_given_x(Complex64::new(1.0, 0.0), &ch4, &rule, |y| y.norm_sqr()).unwrap();
        assert!((e - 5.0).abs() < 1e-10);
        assert!(matches!(
            expect_given_x(Complex64::new(0.0, 0.0), &ch, &rule, |_| f64::NAN),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn sampler_statistics_and_repeatability() {
        let c = build_qam(4).unwrap();
        let marg = crate::constellation::BitMarginals::new(vec![0.5, 0.7, 0.5, 0.3]).unwrap();
        let d = crate::constellation::product_distribution(&c, &marg).unwrap();
        let c = normalize(&c, &d).unwrap();
        let ch = ChannelSpec::new(3.0).unwrap();
        let n = 1_000_000;
        let mut counts = [0usize; 16];
        let mut energy = Vec::with_capacity(n);
        let mut sampler = ChannelSampler::new(&c, &d, &ch, 11).unwrap();
        for _ in 0..n {
            let s = sampler.draw();
            counts[s.index] += 1;
            energy.push(s.y.norm_sqr());
        }
        for (k, p) in counts.iter().zip(d.probs()) {
            let freq = *k as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "{freq} vs {p}");
        }
        let mean = energy.iter().sum::<f64>() / n as f64;
        let var = energy.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 4.0).abs() < 4.0 * se, "{mean}");

        let a = sample_channel(&d, &c, &ch, 5, 1000).unwrap();
        let b = sample_channel(&d, &c, &ch, 5, 1000).unwrap();
        assert_eq!(a, b);
        let other = sample_channel(&d, &c, &ch, 6, 1000).unwrap();
        assert_ne!(a, other);
        assert!(matches!(sample_channel(&d, &c, &ch, 5, 0), Err(Error::EmptySample)));
    }
}
