//! Shaping optimizers for the CM, MLC and BICM capacities of square QAM.
//!
//! Each objective renormalizes the constellation to unit energy before
//! integrating. Parameters are searched in unconstrained coordinates
//! (logistic or softmax, see [`FreeParameterMap`]) by Nelder–Mead from five
//! pinned starts; one-parameter problems are also solved by golden section
//! directly on the parameter and the better answer is kept.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSpec, QuadratureRule};
use crate::constellation::{
    build_qam, free_parameter_map, normalize, BitMarginals, Constellation, FreeParameterMap, Scheme,
    Shaping, SymbolDistribution, PARAM_EPS,
};
use crate::error::{Error, Result};
use crate::optim::{golden_section_max, nelder_mead_max, NelderMeadOptions};
use crate::rates::{bicm_rate, mutual_information};

/// Offsets of the restart points from the uniform start, applied along the
/// alternating direction `(1, -1, 1, ...)` in unconstrained coordinates.
const RESTART_OFFSETS: [f64; 5] = [0.0, 1.5, -1.5, 3.0, -3.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub restarts: usize,
    pub iterations: usize,
    /// Best objective minus the best value of the other restarts (nats).
    pub best_gap: f64,
    pub converged: bool,
    pub golden_checked: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapingResult {
    pub scheme: Scheme,
    pub m: usize,
    pub snr: f64,
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub params: Vec<f64>,
    pub shaping: Shaping,
    pub distribution: SymbolDistribution,
    pub diagnostics: SolverDiagnostics,
}

impl ShapingResult {
    pub fn marginals(&self) -> Option<&BitMarginals> {
        match &self.shaping {
            Shaping::Bits(b) => Some(b),
            Shaping::Symbols(_) => None,
        }
    }
}

/// One shaping problem: scheme, constellation size, channel and quadrature.
pub struct ShapingProblem<'a> {
    scheme: Scheme,
    qam: Constellation,
    map: FreeParameterMap,
    ch: ChannelSpec,
    rule: &'a QuadratureRule,
}

impl<'a> ShapingProblem<'a> {
    pub fn new(scheme: Scheme, m: usize, ch: &ChannelSpec, rule: &'a QuadratureRule) -> Result<Self> {
        Ok(ShapingProblem {
            scheme,
            qam: build_qam(m)?,
            map: free_parameter_map(m, scheme)?,
            ch: *ch,
            rule,
        })
    }

    pub fn map(&self) -> &FreeParameterMap {
        &self.map
    }

    pub fn constellation(&self) -> &Constellation {
        &self.qam
    }

    /// Objective at a parameter vector (nats), and the normalized
    /// constellation it was evaluated on.
    pub fn evaluate_with(&self, params: &[f64]) -> Result<(f64, Shaping, Constellation)> {
        let shaping = self.map.expand(&self.qam, params)?;
        let d = shaping.symbol_distribution(&self.qam)?;
        let c = normalize(&self.qam, &d)?;
        let rate = match (&self.scheme, &shaping) {
            (Scheme::Bicm, Shaping::Bits(b)) => bicm_rate(&c, b, &self.ch, self.rule)?,
            _ => mutual_information(&c, &d, &self.ch, self.rule)?,
        };
        Ok((rate, shaping, c))
    }

    pub fn evaluate(&self, params: &[f64]) -> Result<f64> {
        self.evaluate_with(params).map(|r| r.0)
    }

    pub fn optimize(&self) -> Result<ShapingResult> {
        let n = self.map.count();
        let mut err = None;
        let mut objective = |z: &[f64]| -> f64 {
            match self.evaluate(&self.map.from_unconstrained(z)) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        };
        let opts = NelderMeadOptions::default();
        let start = self.map.to_unconstrained(&self.map.barycenter());
        let mut runs = Vec::new();
        if n == 0 {
            runs.push((vec![], objective(&[]), 0, true));
        } else {
            for off in RESTART_OFFSETS {
                let z0: Vec<f64> = start
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z + if i % 2 == 0 { off } else { -off })
                    .collect();
                let r = nelder_mead_max(&mut objective, &z0, &opts);
                runs.push((self.map.from_unconstrained(&r.x), r.value, r.iterations, r.converged));
            }
        }
        if let Some(e) = err.take() {
            return Err(e);
        }
        runs.sort_by(|a, b| b.1.total_cmp(&a.1));
        let best_gap = if runs.len() > 1 { runs[0].1 - runs[1].1 } else { 0.0 };
        let restarts = runs.len();
        let iterations = runs.iter().map(|r| r.2).sum();
        let converged = runs[0].3;
        let (mut params, mut value) = (runs[0].0.clone(), runs[0].1);

        let golden_checked = n == 1;
        if golden_checked {
            let mut gerr = None;
            let (p, v) = golden_section_max(
                |p| match self.evaluate(&[p]) {
                    Ok(v) => v,
                    Err(e) => {
                        gerr.get_or_insert(e);
                        f64::NEG_INFINITY
                    }
                },
                PARAM_EPS,
                1.0 - PARAM_EPS,
                1e-10,
            );
            if let Some(e) = gerr {
                return Err(e);
            }
            if v > value {
                params = vec![p];
                value = v;
            }
        }

        let (rate, shaping, _) = self.evaluate_with(&params)?;
        if !rate.is_finite() {
            return Err(Error::NonFinite);
        }
        debug_assert!((rate - value).abs() < 1e-12);
        let distribution = shaping.symbol_distribution(&self.qam)?;
        Ok(ShapingResult {
            scheme: self.scheme,
            m: self.map.m(),
            snr: self.ch.snr(),
            rate_nats: rate,
            rate_bits: rate / std::f64::consts::LN_2,
            params,
            shaping,
            distribution,
            diagnostics: SolverDiagnostics {
                restarts,
                iterations,
                best_gap,
                converged,
                golden_checked,
            },
        })
    }
}

/// `C_cm` over symmetric per-axis PAM distributions.
pub fn optimize_cm(m: usize, ch: &ChannelSpec, rule: &QuadratureRule) -> Result<ShapingResult> {
    ShapingProblem::new(Scheme::Cm, m, ch, rule)?.optimize()
}

/// `C_mlc`: symbol mutual information over product-form bit distributions.
pub fn optimize_mlc(m: usize, ch: &ChannelSpec, rule: &QuadratureRule) -> Result<ShapingResult> {
    ShapingProblem::new(Scheme::Mlc, m, ch, rule)?.optimize()
}

/// `C_bicm`: `Σ_j I(B_j;Y)` over bit marginals.
pub fn optimize_bicm(m: usize, ch: &ChannelSpec, rule: &QuadratureRule) -> Result<ShapingResult> {
    ShapingProblem::new(Scheme::Bicm, m, ch, rule)?.optimize()
}

pub fn optimize(scheme: Scheme, m: usize, ch: &ChannelSpec, rule: &QuadratureRule) -> Result<ShapingResult> {
    ShapingProblem::new(scheme, m, ch, rule)?.optimize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::gauss_hermite;

    #[test]
    fn qpsk_has_nothing_to_shape() {
        let rule = gauss_hermite(64).unwrap();
        let ch = ChannelSpec::from_db(5.0).unwrap();
        let cm = optimize_cm(2, &ch, &rule).unwrap();
        let mlc = optimize_mlc(2, &ch, &rule).unwrap();
        let bicm = optimize_bicm(2, &ch, &rule).unwrap();
        assert!(cm.params.is_empty());
        assert!((cm.rate_nats - mlc.rate_nats).abs() < 1e-12);
        assert!((cm.rate_nats - bicm.rate_nats).abs() < 1e-10);
    }

    #[test]
    fn sixteen_qam_cm_equals_mlc() {
        let rule = gauss_hermite(64).unwrap();
        let ch = ChannelSpec::from_db(8.0).unwrap();
        let cm = optimize_cm(4, &ch, &rule).unwrap();
        let mlc = optimize_mlc(4, &ch, &rule).unwrap();
        assert!((cm.rate_nats - mlc.rate_nats).abs() < 1e-6);
        // same parameter: mass of the outer amplitude pair
        assert!((cm.params[0] - mlc.params[0]).abs() < 1e-3);
        assert!(cm.diagnostics.golden_checked);
    }

    #[test]
    fn result_is_reproducible() {
        let rule = gauss_hermite(32).unwrap();
        let ch = ChannelSpec::from_db(10.0).unwrap();
        let a = optimize_bicm(6, &ch, &rule).unwrap();
        let b = optimize_bicm(6, &ch, &rule).unwrap();
        assert_eq!(a, b);
    }
}
