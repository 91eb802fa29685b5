//! The four subcommands. Sweep points run on the rayon pool and rows are
//! written in input order.

use std::f64::consts::LN_2;

use bicm_core::oracle::{mc_gmi, mc_mutual_information};
use bicm_core::wideband::qpsk_limit_marginals;
use bicm_core::*;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    read_marginals, CapacityArgs, CapacityScheme, ExponentArgs, ExponentSchemeArg, OptimizeArgs, ShapingMode,
    WidebandArgs,
};
use crate::output::{finite, list, num, opt, write_json, write_rows, Row};
use crate::{Failure, Outcome};

/// Slack for the ordering checks; rates agree to roundoff when shaping
/// has nothing to gain.
const ORDER_SLACK: f64 = 1e-12;
const EXPONENT_SLACK: f64 = 1e-9;

fn input(m: usize, marg: &BitMarginals) -> Result<(Constellation, SymbolDistribution)> {
    let qam = build_qam(m)?;
    let d = product_distribution(&qam, marg)?;
    Ok((normalize(&qam, &d)?, d))
}

fn file_marginals(mode: ShapingMode, path: Option<&std::path::Path>, m: usize) -> std::result::Result<Option<BitMarginals>, Failure> {
    if mode != ShapingMode::File {
        if path.is_some() {
            return Err(Failure::Usage("--marginals needs --shaping file".into()));
        }
        return Ok(None);
    }
    let Some(path) = path else {
        return Err(Failure::Usage("--shaping file needs --marginals".into()));
    };
    let p0 = read_marginals(path, m)?;
    let marg = BitMarginals::new(p0).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    input(m, &marg).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(Some(marg))
}

#[derive(Debug, Serialize)]
pub struct CapacityRow {
    pub snr_db: f64,
    pub ebn0_db: Option<f64>,
    pub scheme: RateScheme,
    pub rate_bits: f64,
    pub rate_nats: f64,
    pub shaping: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_rate_nats: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_std_error: Option<f64>,
    #[serde(skip)]
    mc_columns: bool,
}

impl CapacityRow {
    fn new(snr_db: f64, p: RatePoint) -> Self {
        let ebn0 = snr_db - 10.0 * p.rate_bits.log10();
        CapacityRow {
            snr_db,
            ebn0_db: finite(ebn0),
            scheme: p.scheme,
            rate_bits: p.rate_bits,
            rate_nats: p.rate_nats,
            shaping: p.shaping,
            mc_rate_nats: None,
            mc_std_error: None,
            mc_columns: false,
        }
    }
}

impl Row for CapacityRow {
    fn header(&self) -> Vec<&'static str> {
        let mut h = vec!["snr_db", "ebn0_db", "scheme", "rate_bits", "rate_nats", "shaping"];
        if self.mc_columns {
            h.extend(["mc_rate_nats", "mc_std_error"]);
        }
        h
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![
            num(self.snr_db),
            opt(self.ebn0_db),
            self.scheme.to_string(),
            num(self.rate_bits),
            num(self.rate_nats),
            list(&self.shaping),
        ];
        if self.mc_columns {
            r.extend([opt(self.mc_rate_nats), opt(self.mc_std_error)]);
        }
        r
    }
}

pub const CAPACITY_HEADER: [&str; 6] = ["snr_db", "ebn0_db", "scheme", "rate_bits", "rate_nats", "shaping"];

struct Point {
    rows: Vec<CapacityRow>,
    flags: Vec<String>,
}

/// Rate, shaping parameters and the input it was evaluated on.
type Evaluated = (f64, Vec<f64>, Constellation, Shaping);

fn capacity_point(a: &CapacityArgs, rule: &QuadratureRule, file: Option<&BitMarginals>, k: usize, db: f64) -> Result<Point> {
    let m = a.common.m;
    let ch = ChannelSpec::from_db(db)?;
    let uniform = BitMarginals::uniform(m);
    let mut flags = Vec::new();
    let mut rows = Vec::new();

    let from_bits = |scheme: CapacityScheme, marg: &BitMarginals, params: Vec<f64>| -> Result<Evaluated> {
        let (c, d) = input(m, marg)?;
        let rate = match scheme {
            CapacityScheme::Bicm | CapacityScheme::BicmUniform => bicm_rate(&c, marg, &ch, rule)?,
            _ => mutual_information(&c, &d, &ch, rule)?,
        };
        Ok((rate, params, c, Shaping::Bits(marg.clone())))
    };

    for (i, &scheme) in a.schemes.iter().enumerate() {
        let (rate, params, c, shaping) = match (scheme, a.shaping) {
            (CapacityScheme::BicmUniform, _) | (_, ShapingMode::Uniform) => from_bits(scheme, &uniform, Vec::new())?,
            (_, ShapingMode::File) => {
                let marg = file.expect("marginals were loaded for --shaping file");
                from_bits(scheme, marg, marg.p0().to_vec())?
            }
            (_, ShapingMode::Optimized) => {
                let s = match scheme {
                    CapacityScheme::Cm => Scheme::Cm,
                    CapacityScheme::Mlc => Scheme::Mlc,
                    _ => Scheme::Bicm,
                };
                let r = optimize(s, m, &ch, rule)?;
                if !r.diagnostics.converged {
                    flags.push(format!("{db} dB {s}: shaping optimizer did not converge"));
                }
                let d = r.shaping.symbol_distribution(&build_qam(m)?)?;
                let c = normalize(&build_qam(m)?, &d)?;
                (r.rate_nats, r.params, c, r.shaping)
            }
        };
        let rs = match scheme {
            CapacityScheme::Cm => RateScheme::Cm,
            CapacityScheme::Mlc => RateScheme::Mlc,
            CapacityScheme::Bicm => RateScheme::Bicm,
            CapacityScheme::BicmUniform => RateScheme::BicmUniform,
        };
        let mut row = CapacityRow::new(db, RatePoint::new(ch.snr(), rate, rs, params));
        if a.mc_samples > 0 {
            let seed = a.seed.wrapping_add((k * 8 + i) as u64);
            let est = match (&shaping, rs) {
                (Shaping::Bits(marg), RateScheme::Bicm | RateScheme::BicmUniform) => {
                    mc_gmi(&c, marg, &ch, 1.0, MetricVariant::Normalized, seed, a.mc_samples)?
                }
                _ => mc_mutual_information(&c, &shaping.symbol_distribution(&c)?, &ch, seed, a.mc_samples)?,
            };
            row.mc_rate_nats = Some(est.mean);
            row.mc_std_error = Some(est.std_error);
            row.mc_columns = true;
        }
        rows.push(row);
    }
    let mut gaussian = CapacityRow::new(
        db,
        RatePoint::new(ch.snr(), gaussian_capacity(&ch), RateScheme::Gaussian, Vec::new()),
    );
    gaussian.mc_columns = a.mc_samples > 0;
    rows.push(gaussian);
    flags.extend(check_capacity_order(&rows, m, a.shaping != ShapingMode::File));
    Ok(Point { rows, flags })
}

/// `bicm-uniform ≤ bicm ≤ mlc ≤ cm ≤ gaussian` among the rows present.
/// Explicit marginals need not beat the uniform input, so the first link
/// is only checked for optimized or uniform shaping.
fn check_capacity_order(rows: &[CapacityRow], m: usize, uniform_first: bool) -> Vec<String> {
    let get = |s: RateScheme| rows.iter().find(|r| r.scheme == s).map(|r| r.rate_nats);
    let mut chain = vec![RateScheme::Bicm, RateScheme::Mlc, RateScheme::Cm, RateScheme::Gaussian];
    if uniform_first {
        chain.insert(0, RateScheme::BicmUniform);
    }
    let present: Vec<(RateScheme, f64)> = chain.iter().filter_map(|&s| get(s).map(|v| (s, v))).collect();
    let mut flags = Vec::new();
    let db = rows.first().map_or(f64::NAN, |r| r.snr_db);
    for w in present.windows(2) {
        if w[0].1 > w[1].1 + ORDER_SLACK {
            flags.push(format!("{db} dB: {} rate {} exceeds {} rate {}", w[0].0, w[0].1, w[1].0, w[1].1));
        }
    }
    for r in rows {
        let ceiling = if r.scheme == RateScheme::Gaussian {
            f64::INFINITY
        } else {
            (m as f64 * LN_2).min(get(RateScheme::Gaussian).unwrap_or(f64::INFINITY))
        };
        if !(r.rate_nats >= 0.0 && r.rate_nats <= ceiling + ORDER_SLACK) {
            flags.push(format!("{db} dB: {} rate {} out of range", r.scheme, r.rate_nats));
        }
    }
    flags
}

pub fn capacity(a: &CapacityArgs) -> std::result::Result<Outcome, Failure> {
    a.common.check_m()?;
    if a.schemes.is_empty() {
        return Err(Failure::Usage("--schemes is empty".into()));
    }
    if a.mc_samples > 0 && a.mc_samples < bicm_core::oracle::MIN_SAMPLES {
        return Err(Failure::Usage(format!(
            "--mc-samples must be 0 or at least {}",
            bicm_core::oracle::MIN_SAMPLES
        )));
    }
    let rule = a.common.rule()?;
    let file = file_marginals(a.shaping, a.marginals.as_deref(), a.common.m)?;
    let points: Vec<Result<Point>> = a
        .snr_db
        .0
        .par_iter()
        .enumerate()
        .map(|(k, &db)| capacity_point(a, &rule, file.as_ref(), k, db))
        .collect();
    let mut rows = Vec::new();
    let mut flags = Vec::new();
    for (p, db) in points.into_iter().zip(&a.snr_db.0) {
        match p {
            Ok(p) => {
                rows.extend(p.rows);
                flags.extend(p.flags);
            }
            Err(e) => flags.push(format!("{db} dB: {e}")),
        }
    }
    write_rows(&rows, a.common.format, a.common.out.as_deref(), &CAPACITY_HEADER)?;
    Ok(Outcome { flags })
}

#[derive(Debug, Serialize)]
pub struct ExponentRow {
    pub snr_db: f64,
    pub input: &'static str,
    pub scheme: ExponentScheme,
    pub rate_bits: f64,
    pub rate_nats: f64,
    pub exponent: f64,
    pub rho_star: f64,
    pub s_star: Option<f64>,
}

pub const EXPONENT_HEADER: [&str; 8] = [
    "snr_db", "input", "scheme", "rate_bits", "rate_nats", "exponent", "rho_star", "s_star",
];

impl Row for ExponentRow {
    fn header(&self) -> Vec<&'static str> {
        EXPONENT_HEADER.to_vec()
    }

    fn record(&self) -> Vec<String> {
        vec![
            num(self.snr_db),
            self.input.to_string(),
            self.scheme.to_string(),
            num(self.rate_bits),
            num(self.rate_nats),
            num(self.exponent),
            num(self.rho_star),
            opt(self.s_star),
        ]
    }
}

/// Inputs of one exponent sweep: the CM distribution and the marginals of
/// the bit-level schemes.
struct Inputs {
    name: &'static str,
    cm: (Constellation, SymbolDistribution),
    bicm: (Constellation, BitMarginals),
    mlc: (Constellation, BitMarginals),
}

fn inputs(a: &ExponentArgs, ch: &ChannelSpec, rule: &QuadratureRule, file: Option<&BitMarginals>) -> Result<Vec<Inputs>> {
    let m = a.common.m;
    let from = |name, marg: &BitMarginals| -> Result<Inputs> {
        let (c, d) = input(m, marg)?;
        Ok(Inputs {
            name,
            cm: (c.clone(), d),
            bicm: (c.clone(), marg.clone()),
            mlc: (c, marg.clone()),
        })
    };
    let mut out = vec![from("uniform", &BitMarginals::uniform(m))?];
    match a.shaping {
        ShapingMode::Uniform => {}
        ShapingMode::File => out.push(from("file", file.expect("marginals were loaded for --shaping file"))?),
        ShapingMode::Optimized => {
            let qam = build_qam(m)?;
            let cm = optimize_cm(m, ch, rule)?;
            let d = cm.shaping.symbol_distribution(&qam)?;
            let bits = |s: Scheme| -> Result<(Constellation, BitMarginals)> {
                let r = optimize(s, m, ch, rule)?;
                let marg = r.marginals().expect("bit-level schemes shape bits").clone();
                Ok((input(m, &marg)?.0, marg))
            };
            out.push(Inputs {
                name: "optimized",
                cm: (normalize(&qam, &d)?, d),
                bicm: bits(Scheme::Bicm)?,
                mlc: bits(Scheme::Mlc)?,
            });
        }
    }
    Ok(out)
}

fn curve(
    a: &ExponentArgs,
    rule: &QuadratureRule,
    ch: &ChannelSpec,
    inp: &Inputs,
    scheme: ExponentSchemeArg,
) -> Result<Vec<(f64, ExponentPoint)>> {
    let rates: Vec<f64> = a.rates.0.iter().map(|r| r * LN_2).collect();
    let point = |g: &GallagerFunction<'_>| -> Result<Vec<(f64, ExponentPoint)>> {
        g.e0(0.5, 1.0)?;
        rates
            .par_iter()
            .map(|&r| Ok((r, random_coding_exponent(g, r)?)))
            .collect()
    };
    match scheme {
        ExponentSchemeArg::Cm => point(&GallagerFunction::cm(&inp.cm.0, &inp.cm.1, ch, rule)?),
        ExponentSchemeArg::Bicm => point(&GallagerFunction::bicm(
            &inp.bicm.0,
            &inp.bicm.1,
            ch,
            rule,
            a.metric.into(),
        )?),
        ExponentSchemeArg::Parallel => point(&GallagerFunction::parallel(&inp.bicm.0, &inp.bicm.1, ch, rule)?),
        ExponentSchemeArg::Mlc => rates
            .par_iter()
            .map(|&r| {
                let e = mlc_msd_exponent(&inp.mlc.0, &inp.mlc.1, ch, rule, r, &RateAllocation::Proportional, None)?;
                Ok((r, e.point))
            })
            .collect(),
    }
}

fn check_exponents(rows: &[ExponentRow]) -> Vec<String> {
    let mut flags = Vec::new();
    let mut curves: Vec<(f64, &str, ExponentScheme)> = Vec::new();
    for r in rows {
        let key = (r.snr_db, r.input, r.scheme);
        if !curves.contains(&key) {
            curves.push(key);
        }
        if !(r.exponent >= 0.0) {
            flags.push(format!("{} dB {} {}: negative exponent at {} bit", r.snr_db, r.input, r.scheme, r.rate_bits));
        }
    }
    for (db, inp, scheme) in curves {
        let mut c: Vec<&ExponentRow> = rows
            .iter()
            .filter(|r| r.snr_db == db && r.input == inp && r.scheme == scheme)
            .collect();
        c.sort_by(|x, y| x.rate_nats.total_cmp(&y.rate_nats));
        if c.windows(2).any(|w| w[1].exponent > w[0].exponent + EXPONENT_SLACK) {
            flags.push(format!("{db} dB {inp} {scheme}: exponent increases with rate"));
        }
    }
    for cm in rows.iter().filter(|r| r.scheme == ExponentScheme::Cm && r.input == "uniform") {
        let bicm = rows.iter().find(|r| {
            r.scheme == ExponentScheme::Bicm && r.input == cm.input && r.snr_db == cm.snr_db && r.rate_nats == cm.rate_nats
        });
        if let Some(b) = bicm {
            if b.exponent > cm.exponent + EXPONENT_SLACK {
                flags.push(format!("{} dB: bicm exponent above cm at {} bit", cm.snr_db, cm.rate_bits));
            }
        }
    }
    flags
}

pub fn exponent(a: &ExponentArgs) -> std::result::Result<Outcome, Failure> {
    a.common.check_m()?;
    if a.schemes.is_empty() {
        return Err(Failure::Usage("--schemes is empty".into()));
    }
    if a.rates.0.iter().any(|&r| r < 0.0) {
        return Err(Failure::Usage("--rates must be nonnegative".into()));
    }
    let rule = a.common.rule()?;
    let file = file_marginals(a.shaping, a.marginals.as_deref(), a.common.m)?;
    let mut rows = Vec::new();
    let mut flags = Vec::new();
    for &db in &a.snr_db.0 {
        let ch = ChannelSpec::from_db(db).map_err(|e| Failure::Usage(format!("--snr-db: {e}")))?;
        let inputs = match inputs(a, &ch, &rule, file.as_ref()) {
            Ok(i) => i,
            Err(e) => {
                flags.push(format!("{db} dB: {e}"));
                continue;
            }
        };
        for inp in &inputs {
            for &scheme in &a.schemes {
                match curve(a, &rule, &ch, inp, scheme) {
                    Ok(points) => rows.extend(points.into_iter().map(|(r, p)| ExponentRow {
                        snr_db: db,
                        input: inp.name,
                        scheme: p.scheme,
                        rate_bits: r / LN_2,
                        rate_nats: r,
                        exponent: p.exponent,
                        rho_star: p.rho,
                        s_star: p.s,
                    })),
                    Err(e) => flags.push(format!("{db} dB {} {scheme:?}: {e}", inp.name)),
                }
            }
        }
    }
    flags.extend(check_exponents(&rows));
    write_rows(&rows, a.common.format, a.common.out.as_deref(), &EXPONENT_HEADER)?;
    Ok(Outcome { flags })
}

#[derive(Debug, Serialize)]
pub struct WidebandRow {
    pub scheme: &'static str,
    pub shaping: &'static str,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub ebn0_lim_db: Option<f64>,
    pub residual: Option<f64>,
    pub shift_c1: Option<f64>,
    pub shift_c2: Option<f64>,
    pub stable: bool,
}

pub const WIDEBAND_HEADER: [&str; 9] = [
    "scheme", "shaping", "c1", "c2", "ebn0_lim_db", "residual", "shift_c1", "shift_c2", "stable",
];

impl Row for WidebandRow {
    fn header(&self) -> Vec<&'static str> {
        WIDEBAND_HEADER.to_vec()
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.scheme.to_string(),
            self.shaping.to_string(),
            opt(self.c1),
            opt(self.c2),
            opt(self.ebn0_lim_db),
            opt(self.residual),
            opt(self.shift_c1),
            opt(self.shift_c2),
            self.stable.to_string(),
        ]
    }
}

fn wideband_row(scheme: &'static str, shaping: &'static str, fit: Result<WidebandFit>) -> Result<WidebandRow> {
    let (fit, stable) = match fit {
        Ok(f) => (f, true),
        Err(Error::UnstableFit(f)) => (*f, false),
        Err(e) => return Err(e),
    };
    Ok(WidebandRow {
        scheme,
        shaping,
        c1: finite(fit.c1),
        c2: finite(fit.c2),
        ebn0_lim_db: finite(fit.ebn0_lim_db),
        residual: finite(fit.residual),
        shift_c1: finite(fit.halving_shift.0),
        shift_c2: finite(fit.halving_shift.1),
        stable,
    })
}

pub fn wideband(a: &WidebandArgs) -> std::result::Result<Outcome, Failure> {
    a.common.check_m()?;
    let rule = a.common.rule()?;
    let m = a.common.m;
    let grid = &a.grid;
    // an invalid grid is a usage error, not an unstable fit
    fit_c1_c2(Ok, grid).map_err(|e| Failure::Usage(format!("--grid: {e}")))?;

    let uniform = BitMarginals::uniform(m);
    let limit = qpsk_limit_marginals(m).map_err(|e| Failure::Usage(e.to_string()))?;
    let (cu, du) = input(m, &uniform)?;
    let (cl, _) = input(m, &limit)?;
    let jobs: Vec<(&'static str, &'static str)> = vec![
        ("gaussian", "none"),
        ("cm", "uniform"),
        ("bicm", "uniform"),
        ("bicm", "qpsk-limit"),
    ];
    let results: Vec<Result<WidebandRow>> = jobs
        .par_iter()
        .map(|&(scheme, shaping)| {
            let fit = match (scheme, shaping) {
                ("gaussian", _) => fit_c1_c2(|s| Ok(gaussian_capacity(&ChannelSpec::new(s)?)), grid),
                ("cm", _) => fit_c1_c2(|s| mutual_information(&cu, &du, &ChannelSpec::new(s)?, &rule), grid),
                (_, "uniform") => fit_c1_c2(|s| bicm_rate(&cu, &uniform, &ChannelSpec::new(s)?, &rule), grid),
                _ => fit_c1_c2(|s| bicm_rate(&cl, &limit, &ChannelSpec::new(s)?, &rule), grid),
            };
            wideband_row(scheme, shaping, fit)
        })
        .collect();
    let mut rows = Vec::new();
    let mut flags = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => flags.push(e.to_string()),
        }
    }
    write_rows(&rows, a.common.format, a.common.out.as_deref(), &WIDEBAND_HEADER)?;
    Ok(Outcome { flags })
}

pub fn optimize_one(a: &OptimizeArgs) -> std::result::Result<Outcome, Failure> {
    a.common.check_m()?;
    let rule = a.common.rule()?;
    let ch = ChannelSpec::from_db(a.snr_db).map_err(|e| Failure::Usage(format!("--snr-db: {e}")))?;
    let r = optimize(a.scheme, a.common.m, &ch, &rule)?;
    write_json(&r, a.common.out.as_deref())?;
    let mut flags = Vec::new();
    if !r.diagnostics.converged {
        flags.push(format!("{} at {} dB: shaping optimizer did not converge", a.scheme, a.snr_db));
    }
    Ok(Outcome { flags })
}
