//! Square QAM signal sets with binary reflected Gray labels, input
//! distributions over them, and the symmetric shaping parameterizations.
//!
//! Conventions used throughout the crate:
//!
//! * Label positions are zero-based, position 0 being the most significant
//!   bit.
//! * For QAM built by [`build_qam`], the first `m/2` positions label the
//!   in-phase PAM dimension and the last `m/2` the quadrature one.
//! * Per dimension the PAM amplitudes are listed in ascending order and take
//!   the Gray labels of [`brgc`] in list order, so a most significant bit of
//!   0 selects the negative half.
//! * Point index `i` of a QAM constellation is `i_re * L + i_im` with `L`
//!   the PAM size.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Longest Gray code [`brgc`] will build.
pub const MAX_GRAY_BITS: usize = 20;

/// Lower bound kept away from 0 and 1 by interior shaping parameters.
pub const PARAM_EPS: f64 = 1e-9;

const SUM_TOL: f64 = 1e-12;
const MEAN_TOL: f64 = 1e-12;

/// Binary label of a constellation point; bit 0 is the most significant.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Label {
    value: u32,
    len: u8,
}

impl Label {
    pub fn new(value: u32, len: usize) -> Self {
        debug_assert!(len <= 32 && (len == 32 || value >> len == 0));
        Label {
            value,
            len: len as u8,
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The label read as an unsigned integer, MSB first.
    pub fn value(&self) -> u32 {
        self.value
    }

    /// Bit at position `j` (0 = most significant).
    pub fn bit(&self, j: usize) -> u8 {
        debug_assert!(j < self.len());
        ((self.value >> (self.len() - 1 - j)) & 1) as u8
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len()).map(|j| self.bit(j)).collect()
    }

    /// Concatenation `self · other`.
    pub fn concat(&self, other: &Label) -> Label {
        Label::new(
            (self.value << other.len) | other.value,
            self.len() + other.len(),
        )
    }

    /// Hamming distance to a label of the same length.
    pub fn distance(&self, other: &Label) -> u32 {
        (self.value ^ other.value).count_ones()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.len() {
            write!(f, "{}", self.bit(j))?;
        }
        Ok(())
    }
}

/// Binary reflected Gray code on `k` bits:
/// `code(k) = 0·code(k-1)` followed by `1·reverse(code(k-1))`.
pub fn brgc(k: usize) -> Result<Vec<Label>> {
    if k == 0 || k > MAX_GRAY_BITS {
        return Err(Error::InvalidGrayLength {
            k,
            max: MAX_GRAY_BITS,
        });
    }
    let mut code = vec![Label::new(0, 1), Label::new(1, 1)];
    for len in 2..=k {
        let prefix = 1u32 << (len - 1);
        let reflected: Vec<Label> = code
            .iter()
            .rev()
            .map(|l| Label::new(prefix | l.value, len))
            .collect();
        code = code
            .iter()
            .map(|l| Label::new(l.value, len))
            .chain(reflected)
            .collect();
    }
    Ok(code)
}

/// Per-dimension structure of a square QAM constellation.
#[derive(Clone, Debug, PartialEq)]
pub struct QamLayout {
    /// PAM amplitudes (ascending) for the in-phase and quadrature axes.
    pub pam: [Vec<f64>; 2],
    /// Gray labels of the PAM amplitudes, in amplitude order.
    pub pam_labels: Vec<Label>,
    /// `positions[d][r]`: global label position carrying bit `r` of axis `d`.
    pub positions: [Vec<usize>; 2],
}

impl QamLayout {
    pub fn bits_per_dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn pam_size(&self) -> usize {
        self.pam[0].len()
    }

    /// Axis and per-axis bit index carrying global position `j`.
    pub fn locate(&self, j: usize) -> Option<(usize, usize)> {
        (0..2).find_map(|d| self.positions[d].iter().position(|&p| p == j).map(|r| (d, r)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    m: usize,
    points: Vec<Complex64>,
    labels: Vec<Label>,
    layout: Option<QamLayout>,
}

impl Constellation {
    /// Arbitrary labeled signal set. Labels must enumerate every `m`-bit
    /// string exactly once.
    pub fn from_points(points: Vec<Complex64>, labels: Vec<Label>) -> Result<Self> {
        let n = points.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "constellation size {n} is not a power of two"
            )));
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        let m = n.trailing_zeros() as usize;
        let mut seen = vec![false; n];
        for l in &labels {
            if l.len() != m || seen[l.value() as usize] {
                return Err(Error::InvalidParameter(
                    "labels must be distinct m-bit strings".into(),
                ));
            }
            seen[l.value() as usize] = true;
        }
        Ok(Constellation {
            m,
            points,
            labels,
            layout: None,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn layout(&self) -> Option<&QamLayout> {
        self.layout.as_ref()
    }

    pub fn bit(&self, i: usize, j: usize) -> u8 {
        self.labels[i].bit(j)
    }

    /// Average energy `Σ d_i |x_i|²`.
    pub fn energy(&self, d: &SymbolDistribution) -> f64 {
        self.points
            .iter()
            .zip(&d.probs)
            .map(|(x, p)| p * x.norm_sqr())
            .sum()
    }

    pub fn mean(&self, d: &SymbolDistribution) -> Complex64 {
        self.points
            .iter()
            .zip(&d.probs)
            .map(|(x, p)| x * p)
            .sum()
    }

    /// Rearranges label positions: bit `j` of every old label moves to
    /// position `perm[j]`.
    pub fn permute_label_positions(&self, perm: &[usize]) -> Result<Constellation> {
        check_permutation(perm, self.m)?;
        let labels = self
            .labels
            .iter()
            .map(|l| {
                let mut v = 0u32;
                for (j, &p) in perm.iter().enumerate() {
                    v |= (l.bit(j) as u32) << (self.m - 1 - p);
                }
                Label::new(v, self.m)
            })
            .collect();
        let layout = self.layout.as_ref().map(|lay| QamLayout {
            positions: [
                lay.positions[0].iter().map(|&p| perm[p]).collect(),
                lay.positions[1].iter().map(|&p| perm[p]).collect(),
            ],
            ..lay.clone()
        });
        Ok(Constellation {
            m: self.m,
            points: self.points.clone(),
            labels,
            layout,
        })
    }

    fn scaled(&self, factor: f64) -> Constellation {
        Constellation {
            m: self.m,
            points: self.points.iter().map(|x| x * factor).collect(),
            labels: self.labels.clone(),
            layout: self.layout.as_ref().map(|lay| QamLayout {
                pam: [
                    lay.pam[0].iter().map(|a| a * factor).collect(),
                    lay.pam[1].iter().map(|a| a * factor).collect(),
                ],
                ..lay.clone()
            }),
        }
    }
}

fn check_permutation(perm: &[usize], m: usize) -> Result<()> {
    if perm.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: perm.len(),
        });
    }
    let mut seen = vec![false; m];
    for &p in perm {
        if p >= m || seen[p] {
            return Err(Error::InvalidParameter(format!(
                "{perm:?} is not a permutation of 0..{m}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Unnormalized square `2^m`-QAM with Gray labels per axis.
pub fn build_qam(m: usize) -> Result<Constellation> {
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::OddBitCount(m));
    }
    let k = m / 2;
    let pam_labels = brgc(k)?;
    let size = 1usize << k;
    let pam: Vec<f64> = (0..size)
        .map(|i| (2 * i) as f64 - (size - 1) as f64)
        .collect();
    let mut points = Vec::with_capacity(size * size);
    let mut labels = Vec::with_capacity(size * size);
    for (re, lre) in pam.iter().zip(&pam_labels) {
        for (im, lim) in pam.iter().zip(&pam_labels) {
            points.push(Complex64::new(*re, *im));
            labels.push(lre.concat(lim));
        }
    }
    Ok(Constellation {
        m,
        points,
        labels,
        layout: Some(QamLayout {
            pam: [pam.clone(), pam],
            pam_labels,
            positions: [(0..k).collect(), (k..m).collect()],
        }),
    })
}

/// Indices of the points whose label has bit `b` at position `j`.
pub fn label_subset(c: &Constellation, j: usize, b: u8) -> Result<Vec<usize>> {
    if j >= c.m {
        return Err(Error::PositionOutOfRange {
            position: j,
            m: c.m,
        });
    }
    Ok((0..c.size()).filter(|&i| c.bit(i, j) == b).collect())
}

/// Per-position probabilities of a 0 bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitMarginals {
    p0: Vec<f64>,
}

impl BitMarginals {
    pub fn new(p0: Vec<f64>) -> Result<Self> {
        for (index, &value) in p0.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability { index, value });
            }
        }
        Ok(BitMarginals { p0 })
    }

    pub fn uniform(m: usize) -> Self {
        BitMarginals { p0: vec![0.5; m] }
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn len(&self) -> usize {
        self.p0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p0.is_empty()
    }

    /// `P(B_j = b)`.
    pub fn prob(&self, j: usize, b: u8) -> f64 {
        if b == 0 {
            self.p0[j]
        } else {
            1.0 - self.p0[j]
        }
    }

    /// True if bit `j` is deterministic.
    pub fn is_degenerate(&self, j: usize) -> bool {
        self.p0[j] == 0.0 || self.p0[j] == 1.0
    }

    /// Binary entropy of bit `j` in nats.
    pub fn entropy(&self, j: usize) -> f64 {
        [self.p0[j], 1.0 - self.p0[j]]
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }

    /// Same marginals after [`Constellation::permute_label_positions`].
    pub fn permuted(&self, perm: &[usize]) -> Result<BitMarginals> {
        check_permutation(perm, self.p0.len())?;
        let mut p0 = vec![0.0; self.p0.len()];
        for (j, &p) in perm.iter().enumerate() {
            p0[p] = self.p0[j];
        }
        Ok(BitMarginals { p0 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolDistribution {
    probs: Vec<f64>,
}

impl SymbolDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        for (index, &value) in probs.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidProbability { index, value });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::NotNormalized(total));
        }
        Ok(SymbolDistribution { probs })
    }

    pub fn uniform(size: usize) -> Self {
        SymbolDistribution {
            probs: vec![1.0 / size as f64; size],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }
}

/// `P_X(x) = Π_j P_{B_j}(b_j(x))`.
pub fn product_distribution(c: &Constellation, marg: &BitMarginals) -> Result<SymbolDistribution> {
    if marg.len() != c.m {
        return Err(Error::LengthMismatch {
            expected: c.m,
            got: marg.len(),
        });
    }
    let probs = c
        .labels
        .iter()
        .map(|l| (0..c.m).map(|j| marg.prob(j, l.bit(j))).product())
        .collect();
    SymbolDistribution::new(probs)
}

/// Scales the constellation so that `E|X|² = 1` under `d`. The mean must
/// already vanish.
pub fn normalize(c: &Constellation, d: &SymbolDistribution) -> Result<Constellation> {
    if d.len() != c.size() {
        return Err(Error::LengthMismatch {
            expected: c.size(),
            got: d.len(),
        });
    }
    let energy = c.energy(d);
    if energy <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let scaled = c.scaled(1.0 / energy.sqrt());
    let mean = scaled.mean(d).norm();
    if mean >= MEAN_TOL {
        return Err(Error::NonzeroMean(mean));
    }
    Ok(scaled)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Cm,
    Mlc,
    Bicm,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Cm => "cm",
            Scheme::Mlc => "mlc",
            Scheme::Bicm => "bicm",
        })
    }
}

/// Input distribution produced by a shaping parameterization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shaping {
    Symbols(SymbolDistribution),
    Bits(BitMarginals),
}

impl Shaping {
    pub fn symbol_distribution(&self, c: &Constellation) -> Result<SymbolDistribution> {
        match self {
            Shaping::Symbols(d) => Ok(d.clone()),
            Shaping::Bits(b) => product_distribution(c, b),
        }
    }
}

/// Symmetric shaping parameterization of square QAM.
///
/// CM: the per-axis PAM distribution is symmetric about zero and shared by
/// both axes. Parameter `i` (`i = 0..L/2-1`) is the total mass on the
/// amplitude pair `±(2i + 3)`; the innermost pair `±1` takes the rest. The
/// domain is the open simplex and its barycenter is the uniform input.
///
/// BICM/MLC: both axes share the marginals of their non-sign bits, and the
/// sign bits are fixed at 1/2. Parameter `r - 1` is `P(B = 0)` for per-axis
/// bit `r ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeParameterMap {
    m: usize,
    scheme: Scheme,
}

pub fn free_parameter_map(m: usize, scheme: Scheme) -> Result<FreeParameterMap> {
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::OddBitCount(m));
    }
    Ok(FreeParameterMap { m, scheme })
}

impl FreeParameterMap {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn count(&self) -> usize {
        let k = self.m / 2;
        match self.scheme {
            Scheme::Cm => (1usize << (k - 1)) - 1,
            Scheme::Mlc | Scheme::Bicm => k - 1,
        }
    }

    /// Parameters of the uniform input.
    pub fn barycenter(&self) -> Vec<f64> {
        let n = self.count();
        match self.scheme {
            Scheme::Cm => vec![1.0 / (n + 1) as f64; n],
            Scheme::Mlc | Scheme::Bicm => vec![0.5; n],
        }
    }

    /// Logistic (BICM/MLC) or softmax (CM) image of an unconstrained vector,
    /// clipped to `[PARAM_EPS, 1 - PARAM_EPS]`.
    pub fn from_unconstrained(&self, z: &[f64]) -> Vec<f64> {
        let clip = |p: f64| p.clamp(PARAM_EPS, 1.0 - PARAM_EPS);
        match self.scheme {
            Scheme::Mlc | Scheme::Bicm => z.iter().map(|&t| clip(logistic(t))).collect(),
            Scheme::Cm => {
                let hi = z.iter().fold(0.0f64, |a, &b| a.max(b));
                let denom = (-hi).exp() + z.iter().map(|t| (t - hi).exp()).sum::<f64>();
                z.iter().map(|t| clip((t - hi).exp() / denom)).collect()
            }
        }
    }

    /// Inverse of [`Self::from_unconstrained`] on the open domain.
    pub fn to_unconstrained(&self, params: &[f64]) -> Vec<f64> {
        match self.scheme {
            Scheme::Mlc | Scheme::Bicm => params.iter().map(|&p| (p / (1.0 - p)).ln()).collect(),
            Scheme::Cm => {
                let rest = 1.0 - params.iter().sum::<f64>();
                params.iter().map(|p| (p / rest).ln()).collect()
            }
        }
    }

    fn check_domain(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.count() {
            return Err(Error::LengthMismatch {
                expected: self.count(),
                got: params.len(),
            });
        }
        for (index, &value) in params.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidProbability { index, value });
            }
        }
        if self.scheme == Scheme::Cm {
            let total: f64 = params.iter().sum();
            if total >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "CM parameters sum to {total}, outside the open simplex"
                )));
            }
        }
        Ok(())
    }

    /// Per-axis PAM probabilities (ascending amplitude order) for CM.
    pub fn pam_distribution(&self, params: &[f64]) -> Result<Vec<f64>> {
        if self.scheme != Scheme::Cm {
            return Err(Error::InvalidParameter(
                "pam_distribution applies to CM only".into(),
            ));
        }
        self.check_domain(params)?;
        let half = 1usize << (self.m / 2 - 1);
        let inner = 1.0 - params.iter().sum::<f64>();
        let mass = |i: usize| if i == 0 { inner } else { params[i - 1] };
        let mut pam = vec![0.0; 2 * half];
        for i in 0..half {
            pam[half + i] = mass(i) / 2.0;
            pam[half - 1 - i] = mass(i) / 2.0;
        }
        Ok(pam)
    }

    /// Bit marginals for BICM/MLC, laid out on `c`'s label positions.
    pub fn marginals(&self, c: &Constellation, params: &[f64]) -> Result<BitMarginals> {
        if self.scheme == Scheme::Cm {
            return Err(Error::InvalidParameter(
                "CM is parameterized by symbol probabilities".into(),
            ));
        }
        self.check_domain(params)?;
        let layout = self.layout_of(c)?;
        let mut p0 = vec![0.0; self.m];
        for positions in &layout.positions {
            for (r, &pos) in positions.iter().enumerate() {
                p0[pos] = if r == 0 { 0.5 } else { params[r - 1] };
            }
        }
        BitMarginals::new(p0)
    }

    pub fn expand(&self, c: &Constellation, params: &[f64]) -> Result<Shaping> {
        match self.scheme {
            Scheme::Cm => {
                self.layout_of(c)?;
                let pam = self.pam_distribution(params)?;
                let probs: Vec<f64> = pam
                    .iter()
                    .flat_map(|pr| pam.iter().map(move |pi| pr * pi))
                    .collect();
                let total: f64 = probs.iter().sum();
                SymbolDistribution::new(probs.into_iter().map(|p| p / total).collect())
                    .map(Shaping::Symbols)
            }
            Scheme::Mlc | Scheme::Bicm => self.marginals(c, params).map(Shaping::Bits),
        }
    }

    fn layout_of<'a>(&self, c: &'a Constellation) -> Result<&'a QamLayout> {
        match c.layout() {
            Some(l) if c.m() == self.m => Ok(l),
            Some(_) => Err(Error::LengthMismatch {
                expected: self.m,
                got: c.m(),
            }),
            None => Err(Error::NotQam),
        }
    }
}

pub(crate) fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
