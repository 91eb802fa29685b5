//! Quadrature engine shared by the rate and exponent computations.
//!
//! An [`Ensemble`] is a discrete input on one or two real axes observed in
//! Gaussian noise of variance 1/2 per axis. Every quantity is written as
//! `Σ_a p_a E[f(a, Y) | X = a]` and `f` only sees the log-likelihoods
//! `ℓ_{a'}(y) = -|y - √snr·x_{a'}|²`. The dropped normalizing constant is
//! common to all points and cancels in every expression below.

use std::f64::consts::PI;

use crate::channel::QuadratureRule;
use crate::error::{Error, Result};
use crate::rates::MetricVariant;

pub(crate) fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for t in terms {
        if t == f64::NEG_INFINITY {
            continue;
        }
        if t > hi {
            acc = acc * (hi - t).exp() + 1.0;
            hi = t;
        } else {
            acc += (t - hi).exp();
        }
    }
    if hi == f64::NEG_INFINITY {
        hi
    } else {
        hi + acc.ln()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Ensemble {
    dim: usize,
    centers: Vec<[f64; 2]>,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    labels: Vec<u32>,
    nbits: usize,
    active: Vec<usize>,
}

impl Ensemble {
    /// `points` are unscaled coordinates; the second coordinate is ignored
    /// when `dim == 1`.
    pub fn new(
        dim: usize,
        points: &[[f64; 2]],
        probs: &[f64],
        labels: Vec<u32>,
        nbits: usize,
        amplitude: f64,
    ) -> Self {
        debug_assert!(dim == 1 || dim == 2);
        let centers = points
            .iter()
            .map(|p| [p[0] * amplitude, if dim == 2 { p[1] * amplitude } else { 0.0 }])
            .collect();
        let log_probs = probs
            .iter()
            .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            .collect();
        let active = (0..probs.len()).filter(|&a| probs[a] > 0.0).collect();
        Ensemble {
            dim,
            centers,
            probs: probs.to_vec(),
            log_probs,
            labels,
            nbits,
            active,
        }
    }

    fn bit(&self, a: usize, r: usize) -> u8 {
        ((self.labels[a] >> (self.nbits - 1 - r)) & 1) as u8
    }

    /// `P(bit r = b)`.
    pub fn bit_prob(&self, r: usize, b: u8) -> f64 {
        self.active
            .iter()
            .filter(|&&a| self.bit(a, r) == b)
            .map(|&a| self.probs[a])
            .sum()
    }

    pub fn bit_is_degenerate(&self, r: usize) -> bool {
        self.active.iter().all(|&a| self.bit(a, r) == 0)
            || self.active.iter().all(|&a| self.bit(a, r) == 1)
    }

    /// Calls `f(a, weight, ℓ(y))` for every active point `a` and every node
    /// `y` of its quadrature grid; `weight` includes `p_a` and the Gaussian
    /// normalization.
    fn for_each_node<F>(&self, rule: &QuadratureRule, mut f: F) -> Result<()>
    where
        F: FnMut(usize, f64, &[f64]) -> Result<()>,
    {
        let nodes = rule.nodes();
        let weights = rule.weights();
        let mut ll = vec![f64::NEG_INFINITY; self.centers.len()];
        let norm = PI.powf(-(self.dim as f64) / 2.0);
        for &a in &self.active {
            let c = self.centers[a];
            let pa = self.probs[a] * norm;
            let mut visit = |y: [f64; 2], w: f64| -> Result<()> {
                for &b in &self.active {
                    let d0 = y[0] - self.centers[b][0];
                    let d1 = y[1] - self.centers[b][1];
                    ll[b] = -(d0 * d0 + d1 * d1);
                }
                f(a, pa * w, &ll)
            };
            if self.dim == 1 {
                for (t, w) in nodes.iter().zip(weights) {
                    visit([c[0] + t, 0.0], *w)?;
                }
            } else {
                for (t, wt) in nodes.iter().zip(weights) {
                    for (u, wu) in nodes.iter().zip(weights) {
                        visit([c[0] + t, c[1] + u], wt * wu)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// `Σ_a p_a E[f(a, ℓ(Y)) | a]`.
    pub fn expect<F>(&self, rule: &QuadratureRule, mut f: F) -> Result<f64>
    where
        F: FnMut(usize, &[f64]) -> f64,
    {
        let mut total = 0.0;
        self.for_each_node(rule, |a, w, ll| {
            let v = f(a, ll);
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            total += w * v;
            Ok(())
        })?;
        Ok(total)
    }

    /// Upper bound on the number of values in a [`GallagerTable`] of this
    /// ensemble.
    pub fn table_size(&self, rule: &QuadratureRule) -> usize {
        self.active.len().pow(2) * rule.order().pow(self.dim as u32)
    }

    fn table<F>(&self, rule: &QuadratureRule, alpha: Vec<f64>, mut delta: F) -> Result<GallagerTable>
    where
        F: FnMut(usize, &[f64], &mut [f64]),
    {
        let k = alpha.len();
        let entries = self.active.len() * rule.order().pow(self.dim as u32);
        let mut weights = Vec::with_capacity(entries);
        let mut deltas = Vec::with_capacity(entries * k);
        let mut row = vec![0.0; k];
        self.for_each_node(rule, |a, w, ll| {
            delta(a, ll, &mut row);
            if row.iter().any(|d| d.is_nan()) {
                return Err(Error::NonFinite);
            }
            weights.push(w);
            deltas.extend_from_slice(&row);
            Ok(())
        })?;
        Ok(GallagerTable {
            alpha,
            weights,
            deltas,
        })
    }

    /// Table of [`Ensemble::e0_matched`]; evaluate with `c = 1/(1+ρ)`.
    pub fn matched_table(&self, rule: &QuadratureRule) -> Result<GallagerTable> {
        let alpha = self.active.iter().map(|&b| self.log_probs[b]).collect();
        self.table(rule, alpha, |a, ll, row| {
            for (d, &b) in row.iter_mut().zip(&self.active) {
                *d = ll[b] - ll[a];
            }
        })
    }

    /// Table of [`Ensemble::e0_mismatched`]; evaluate with `c = s`.
    pub fn mismatched_table(&self, rule: &QuadratureRule, variant: MetricVariant) -> Result<GallagerTable> {
        let bits = self.coded_bits();
        let alpha = self.active.iter().map(|&b| self.log_probs[b]).collect();
        let mut log_q = vec![0.0; self.centers.len()];
        self.table(rule, alpha, |a, ll, row| {
            self.fill_log_q(ll, &bits, variant, &mut log_q);
            for (d, &b) in row.iter_mut().zip(&self.active) {
                *d = log_q[b] - log_q[a];
            }
        })
    }

    /// Table of [`Ensemble::e0_level`]; evaluate with `c = 1/(1+ρ)`.
    pub fn level_table(&self, rule: &QuadratureRule, r: usize, cond_mask: u32) -> Result<GallagerTable> {
        let lp = [self.bit_prob(r, 0).ln(), self.bit_prob(r, 1).ln()];
        self.table(rule, lp.to_vec(), |a, ll, row| {
            let l = self.log_level_pair(ll, r, cond_mask, a, &lp);
            let b = self.bit(a, r) as usize;
            row[0] = l[0] - l[b];
            row[1] = l[1] - l[b];
        })
    }

    fn log_mix<'a>(&'a self, ll: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.active.iter().map(move |&b| self.log_probs[b] + ll[b])
    }

    /// `ln Σ_{a': bit r = b} p_{a'} e^{ℓ_{a'}}`.
    fn log_subset(&self, ll: &[f64], r: usize, b: u8) -> f64 {
        log_sum_exp(
            self.active
                .iter()
                .filter(|&&a| self.bit(a, r) == b)
                .map(|&a| self.log_probs[a] + ll[a]),
        )
    }

    /// Symbol-level mutual information `I(X;Y)`.
    pub fn mutual_information(&self, rule: &QuadratureRule) -> Result<f64> {
        self.expect(rule, |a, ll| ll[a] - log_sum_exp(self.log_mix(ll)))
    }

    /// `I(B_r; Y)` of the equivalent binary channel.
    pub fn bit_mutual_information(&self, rule: &QuadratureRule, r: usize) -> Result<f64> {
        if self.bit_is_degenerate(r) {
            return Ok(0.0);
        }
        let lp = [self.bit_prob(r, 0).ln(), self.bit_prob(r, 1).ln()];
        self.expect(rule, |a, ll| {
            let b = self.bit(a, r);
            self.log_subset(ll, r, b) - lp[b as usize] - log_sum_exp(self.log_mix(ll))
        })
    }

    fn log_metric(&self, ll: &[f64], r: usize, b: u8, lp: &[f64; 2], variant: MetricVariant) -> f64 {
        let q = self.log_subset(ll, r, b);
        match variant {
            MetricVariant::Classical => q,
            MetricVariant::Normalized => q - lp[b as usize],
        }
    }

    /// One summand of the BICM generalized mutual information at fixed `s`.
    pub fn bit_gmi(
        &self,
        rule: &QuadratureRule,
        r: usize,
        s: f64,
        variant: MetricVariant,
    ) -> Result<f64> {
        if self.bit_is_degenerate(r) {
            return Ok(0.0);
        }
        let lp = [self.bit_prob(r, 0).ln(), self.bit_prob(r, 1).ln()];
        self.expect(rule, |a, ll| {
            let q = [
                self.log_metric(ll, r, 0, &lp, variant),
                self.log_metric(ll, r, 1, &lp, variant),
            ];
            let b = self.bit(a, r) as usize;
            s * q[b] - log_sum_exp([s * q[0] + lp[0], s * q[1] + lp[1]])
        })
    }

    /// Gallager's `E0(ρ)` for ML decoding.
    pub fn e0_matched(&self, rule: &QuadratureRule, rho: f64) -> Result<f64> {
        if rho == 0.0 {
            return Ok(0.0);
        }
        let t = 1.0 / (1.0 + rho);
        let mean = self.expect(rule, |a, ll| {
            let inner = log_sum_exp(self.active.iter().map(|&b| self.log_probs[b] + t * (ll[b] - ll[a])));
            (rho * inner).exp()
        })?;
        Ok(-mean.ln())
    }

    fn coded_bits(&self) -> Vec<(usize, [f64; 2])> {
        (0..self.nbits)
            .filter(|&r| !self.bit_is_degenerate(r))
            .map(|r| (r, [self.bit_prob(r, 0).ln(), self.bit_prob(r, 1).ln()]))
            .collect()
    }

    /// `ln q(x_b, y)` of the bit-metric decoder for every active `b`.
    fn fill_log_q(&self, ll: &[f64], bits: &[(usize, [f64; 2])], variant: MetricVariant, log_q: &mut [f64]) {
        for &b in &self.active {
            log_q[b] = 0.0;
        }
        for (r, lp) in bits {
            let q = [
                self.log_metric(ll, *r, 0, lp, variant),
                self.log_metric(ll, *r, 1, lp, variant),
            ];
            for &b in &self.active {
                log_q[b] += q[self.bit(b, *r) as usize];
            }
        }
    }

    /// Generalized Gallager function of the bit-metric decoder over all bits
    /// of this ensemble.
    pub fn e0_mismatched(
        &self,
        rule: &QuadratureRule,
        rho: f64,
        s: f64,
        variant: MetricVariant,
    ) -> Result<f64> {
        if rho == 0.0 {
            return Ok(0.0);
        }
        let bits = self.coded_bits();
        let mut log_q = vec![0.0; self.centers.len()];
        let mean = self.expect(rule, |a, ll| {
            self.fill_log_q(ll, &bits, variant, &mut log_q);
            let inner = log_sum_exp(
                self.active
                    .iter()
                    .map(|&b| self.log_probs[b] + s * (log_q[b] - log_q[a])),
            );
            (rho * inner).exp()
        })?;
        Ok(-mean.ln())
    }

    /// Matched binary Gallager function of the bit-`r` channel.
    pub fn e0_bit(&self, rule: &QuadratureRule, r: usize, rho: f64) -> Result<f64> {
        self.e0_level(rule, r, 0, rho)
    }

    fn log_level(&self, ll: &[f64], r: usize, mask: u32, key: u32, b: u8) -> f64 {
        log_sum_exp(
            self.active
                .iter()
                .filter(|&&a| self.labels[a] & mask == key && self.bit(a, r) == b)
                .map(|&a| self.log_probs[a] + ll[a]),
        )
    }

    /// Bits of this ensemble as an `nbits`-wide mask selector: local bit `r`
    /// maps to `1 << (nbits - 1 - r)`.
    pub fn mask_of(&self, bits: impl IntoIterator<Item = usize>) -> u32 {
        bits.into_iter().fold(0, |m, r| m | (1 << (self.nbits - 1 - r)))
    }

    /// `I(B_r; Y, U)` where `U` are the label bits selected by `cond_mask`,
    /// known at the receiver.
    pub fn level_mutual_information(&self, rule: &QuadratureRule, r: usize, cond_mask: u32) -> Result<f64> {
        if self.bit_is_degenerate(r) {
            return Ok(0.0);
        }
        let lp = [self.bit_prob(r, 0).ln(), self.bit_prob(r, 1).ln()];
        self.expect(rule, |a, ll| {
            let key = self.labels[a] & cond_mask;
            let l = [
                self.log_level(ll, r, cond_mask, key, 0),
                self.log_level(ll, r, cond_mask, key, 1),
            ];
            let b = self.bit(a, r) as usize;
            l[b] - log_sum_exp(l) - lp[b]
        })
    }

    /// `ln P(y | B_r = b, U = u(a))` for both `b`, up to a term common to
    /// both.
    fn log_level_pair(&self, ll: &[f64], r: usize, cond_mask: u32, a: usize, lp: &[f64; 2]) -> [f64; 2] {
        let key = self.labels[a] & cond_mask;
        [
            self.log_level(ll, r, cond_mask, key, 0) - lp[0],
            self.log_level(ll, r, cond_mask, key, 1) - lp[1],
        ]
    }

    /// Matched binary Gallager function of the channel `B_r → (Y, U)`.
    pub fn e0_level(&self, rule: &QuadratureRule, r: usize, cond_mask: u32, rho: f64) -> Result<f64> {
        if rho == 0.0 || self.bit_is_degenerate(r) {
            return Ok(0.0);
        }
        let lp = [self.bit_prob(r, 0).ln(), self.bit_prob(r, 1).ln()];
        let t = 1.0 / (1.0 + rho);
        let mean = self.expect(rule, |a, ll| {
            let l = self.log_level_pair(ll, r, cond_mask, a, &lp);
            let b = self.bit(a, r) as usize;
            let inner = log_sum_exp([lp[0] + t * (l[0] - l[b]), lp[1] + t * (l[1] - l[b])]);
            (rho * inner).exp()
        })?;
        Ok(-mean.ln())
    }
}

/// A Gallager function with the metric ratios precomputed on the quadrature
/// grid: `E0 = -ln Σ_e w_e (Σ_k e^{α_k + c·Δ_{e,k}})^ρ`.
#[derive(Clone, Debug)]
pub(crate) struct GallagerTable {
    alpha: Vec<f64>,
    weights: Vec<f64>,
    deltas: Vec<f64>,
}

impl GallagerTable {
    pub fn e0(&self, rho: f64, c: f64) -> f64 {
        if rho == 0.0 {
            return 0.0;
        }
        let k = self.alpha.len();
        let mut total = 0.0;
        let mut terms = vec![0.0; k];
        for (w, row) in self.weights.iter().zip(self.deltas.chunks_exact(k)) {
            let mut hi = f64::NEG_INFINITY;
            for ((t, a), d) in terms.iter_mut().zip(&self.alpha).zip(row) {
                *t = a + c * d;
                hi = hi.max(*t);
            }
            let sum: f64 = terms.iter().map(|t| (t - hi).exp()).sum();
            total += w * (rho * (hi + sum.ln())).exp();
        }
        -total.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_handles_empty_and_infinite_terms() {
        assert_eq!(log_sum_exp([]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, 0.0]), 0.0);
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let v = log_sum_exp([-2.0, 3.0, 0.5]);
        let direct = ((-2f64).exp() + 3f64.exp() + 0.5f64.exp()).ln();
        assert!((v - direct).abs() < 1e-14);
    }
}
