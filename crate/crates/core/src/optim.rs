//! Derivative-free maximizers for the low-dimensional problems in this
//! crate: golden-section search on an interval and Nelder–Mead on `R^n`.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes a unimodal `f` on `[lo, hi]` until the bracket is narrower
/// than `tol`. Returns the best abscissa seen and its value.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    /// Stop when every vertex lies within this distance of the best one.
    pub diameter_tol: f64,
    pub max_iterations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            initial_step: 0.5,
            diameter_tol: 1e-7,
            max_iterations: 500,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `f` with the standard reflection/expansion/contraction/shrink
/// moves (coefficients 1, 2, 1/2, 1/2).
pub fn nelder_mead_max<F>(mut f: F, start: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    if n == 0 {
        return NelderMeadResult {
            x: vec![],
            value: f(&[]),
            iterations: 0,
            converged: true,
        };
    }
    // minimize g = -f
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), -f(start)));
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.initial_step;
        let g = -f(&v);
        simplex.push((v, g));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| dist(v, &simplex[0].0))
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let reflected = along(1.0);
        let gr = -f(&reflected);
        if gr < simplex[0].1 {
            let expanded = along(2.0);
            let ge = -f(&expanded);
            simplex[n] = if ge < gr { (expanded, ge) } else { (reflected, gr) };
        } else if gr < simplex[n - 1].1 {
            simplex[n] = (reflected, gr);
        } else {
            let (trial, gt) = if gr < simplex[n].1 {
                let v = along(0.5);
                let g = -f(&v);
                (v, g)
            } else {
                let v = along(-0.5);
                let g = -f(&v);
                (v, g)
            };
            if gt < simplex[n].1.min(gr) {
                simplex[n] = (trial, gt);
            } else {
                let best = simplex[0].0.clone();
                for (v, g) in simplex.iter_mut().skip(1) {
                    for (x, b) in v.iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    *g = -f(v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, g) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        value: -g,
        iterations,
        converged,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
