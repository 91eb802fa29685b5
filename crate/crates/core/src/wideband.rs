//! Low-snr behaviour: `R(snr) = c1·snr + c2·snr² + o(snr²)` in nats.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::constellation::BitMarginals;
use crate::error::{Error, Result};

/// Default fit grid (linear snr), largest first.
pub const DEFAULT_GRID: [f64; 5] = [0.1, 0.05, 0.025, 0.0125, 0.00625];

/// Largest admissible change of `(c1, c2)` when the grid is halved.
pub const STABILITY_TOL: (f64, f64) = (1e-3, 1e-2);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidebandFit {
    pub c1: f64,
    pub c2: f64,
    /// Cubic coefficient absorbed by the fit; not reported as a figure of
    /// merit.
    pub c3: f64,
    /// RMS residual of `R/snr` against the fitted polynomial.
    pub residual: f64,
    pub grid: Vec<f64>,
    pub ebn0_lim_db: f64,
    /// `(|Δc1|, |Δc2|)` against the fit on the halved grid.
    pub halving_shift: (f64, f64),
}

/// Fits `R(snr)/snr = c1 + c2·snr + c3·snr²` by least squares.
///
/// The quadratic term of `R/snr` is a nuisance parameter that soaks up the
/// third-order term of the expansion so that `c1` and `c2` are not biased by
/// the largest grid points. The fit is repeated on the grid scaled by 1/2
/// and rejected as unstable if `(c1, c2)` move by more than
/// [`STABILITY_TOL`].
pub fn fit_c1_c2<F>(mut rate_fn: F, grid: &[f64]) -> Result<WidebandFit>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    if grid.len() < 4 {
        return Err(Error::InvalidParameter("wideband grid needs at least 4 points".into()));
    }
    if grid.iter().any(|&s| !(s > 0.0 && s <= 0.1)) {
        return Err(Error::InvalidParameter("wideband grid must lie in (0, 0.1]".into()));
    }
    let ratio = grid[1] / grid[0];
    if grid.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) || ratio >= 1.0 {
        return Err(Error::InvalidParameter(
            "wideband grid must be strictly decreasing with geometric spacing".into(),
        ));
    }
    let mut sample = |g: &[f64]| -> Result<Vec<f64>> {
        g.iter()
            .map(|&snr| {
                let r = rate_fn(snr)?;
                if r < 0.0 {
                    return Err(Error::NegativeRate { snr, value: r });
                }
                Ok(r / snr)
            })
            .collect()
    };
    let y = sample(&grid)?;
    let (coef, residual) = least_squares_quadratic(&grid, &y);
    let half: Vec<f64> = grid.iter().map(|s| s / 2.0).collect();
    let y_half = sample(&half)?;
    let (coef_half, _) = least_squares_quadratic(&half, &y_half);
    let shift = ((coef[0] - coef_half[0]).abs(), (coef[1] - coef_half[1]).abs());
    let fit = WidebandFit {
        c1: coef[0],
        c2: coef[1],
        c3: coef[2],
        residual,
        grid,
        ebn0_lim_db: if coef[0] > 0.0 { 10.0 * (LN_2 / coef[0]).log10() } else { f64::NAN },
        halving_shift: shift,
    };
    if shift.0 >= STABILITY_TOL.0 || shift.1 >= STABILITY_TOL.1 {
        return Err(Error::UnstableFit(Box::new(fit)));
    }
    Ok(fit)
}

/// Least squares for `y ≈ a + b x + c x²` in the scaled variable
/// `x / max(x)`; returns the unscaled `[a, b, c]` and the RMS residual.
fn least_squares_quadratic(x: &[f64], y: &[f64]) -> ([f64; 3], f64) {
    let scale = x.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (xi, yi) in x.iter().zip(y) {
        let u = xi / scale;
        let row = [1.0, u, u * u];
        for r in 0..3 {
            aty[r] += row[r] * yi;
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let sol = solve3(ata, aty);
    let coef = [sol[0], sol[1] / scale, sol[2] / (scale * scale)];
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - coef[0] - coef[1] * xi - coef[2] * xi * xi).powi(2))
        .sum();
    (coef, (rss / x.len() as f64).sqrt())
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Marginals that keep each axis sign bit at 1/2 and pin every other bit to
/// 0, leaving one antipodal pair per axis (QPSK) on the labels of
/// [`crate::build_qam`].
pub fn qpsk_limit_marginals(m: usize) -> Result<BitMarginals> {
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::OddBitCount(m));
    }
    let k = m / 2;
    BitMarginals::new((0..m).map(|j| if j % k == 0 { 0.5 } else { 1.0 }).collect())
}

/// `10·log10(ln 2 / c1)` in dB.
pub fn ebn0_limit(c1: f64) -> Result<f64> {
    if !(c1 > 0.0) {
        return Err(Error::InvalidParameter(format!("c1 must be positive, got {c1}")));
    }
    Ok(10.0 * (LN_2 / c1).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_expansions() {
        let fit = fit_c1_c2(|s| Ok(s.ln_1p()), &DEFAULT_GRID).unwrap();
        assert!((fit.c1 - 1.0).abs() < 1e-4, "{}", fit.c1);
        assert!((fit.c2 + 0.5).abs() < 1e-2, "{}", fit.c2);
        assert!((fit.ebn0_lim_db + 1.5917).abs() < 1e-3);

        let fit = fit_c1_c2(Ok, &DEFAULT_GRID).unwrap();
        assert!((fit.c1 - 1.0).abs() < 1e-12);
        assert!(fit.c2.abs() < 1e-9);
    }

    #[test]
    fn grid_and_sign_checks() {
        assert!(fit_c1_c2(Ok, &[0.1, 0.05, 0.025]).is_err());
        assert!(fit_c1_c2(Ok, &[0.2, 0.1, 0.05, 0.025]).is_err());
        assert!(fit_c1_c2(Ok, &[0.1, 0.05, 0.02, 0.01]).is_err());
        assert!(matches!(
            fit_c1_c2(|s| Ok(-s), &DEFAULT_GRID),
            Err(Error::NegativeRate { .. })
        ));
    }

    #[test]
    fn unstable_fit_is_reported_with_values() {
        // oscillating in log snr, which no low-order polynomial follows
        let r = fit_c1_c2(|s| Ok(s * (1.0 + 0.2 * (40.0 * s.ln()).sin())), &DEFAULT_GRID);
        match r {
            Err(Error::UnstableFit(fit)) => assert!(fit.halving_shift.0 >= STABILITY_TOL.0),
            other => panic!("expected an unstable fit, got {other:?}"),
        }
    }

    #[test]
    fn ebn0_values() {
        assert!((ebn0_limit(1.0).unwrap() + 1.59).abs() < 0.005);
        assert!(ebn0_limit(LN_2).unwrap().abs() < 1e-12);
        let expect = 10.0 * (2.0 * LN_2).log10();
        assert!((ebn0_limit(0.5).unwrap() - expect).abs() < 1e-12);
        assert!((ebn0_limit(0.5).unwrap() - 1.42).abs() < 0.005);
        assert!(ebn0_limit(0.0).is_err());
    }

    #[test]
    fn qpsk_limit_layout() {
        assert_eq!(qpsk_limit_marginals(2).unwrap().p0(), &[0.5, 0.5]);
        assert_eq!(qpsk_limit_marginals(4).unwrap().p0(), &[0.5, 1.0, 0.5, 1.0]);
        assert_eq!(
            qpsk_limit_marginals(6).unwrap().p0(),
            &[0.5, 1.0, 1.0, 0.5, 1.0, 1.0]
        );
        assert!(qpsk_limit_marginals(3).is_err());
    }
}
