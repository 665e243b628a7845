//! Self-similar (Moran-type) probability measures on `[0, 1]`.
//!
//! A measure is described by `b` child intervals `[offset_i, offset_i + c_i]`
//! and branch weights `p_i`. The mass of the cell with digit word `w` is the
//! product of the weights along `w` and its length the product of the ratios.
//! All queries descend the digit tree, so cell masses are exact and ball
//! masses are exact up to float rounding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ p_i = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Digit-descent depth cap for CDF and interval queries.
pub const DESCENT_DEPTH_CAP: usize = 64;
/// Descent stops once the straddled cell carries less than this (relative) mass.
pub const RESIDUAL_MASS_CUTOFF: f64 = 1e-15;
/// Guard on explicit cell enumeration: `n * log2(b)` may not exceed this.
pub const ENUMERATION_BITS: f64 = 40.0;

const GEOMETRY_TOL: f64 = 1e-15;

/// Unevaluated sum `hi + lo` of two doubles.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn renorm(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        Dd {
            hi: s,
            lo: lo - (s - hi),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let e = (self.hi - (s - bb)) + (o.hi - bb);
        Dd::renorm(s, e + self.lo + o.lo)
    }

    fn mul(self, w: f64) -> Dd {
        let p = self.hi * w;
        let e = self.hi.mul_add(w, -p);
        Dd::renorm(p, e + self.lo * w)
    }

    fn mul_dd(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::renorm(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    /// Nearest double. Sums lying within rounding noise of a midpoint go to
    /// the even neighbour, so equal true values never round apart.
    fn value(self) -> f64 {
        if self.hi > 0.0 && self.hi.is_finite() && self.lo != 0.0 {
            let bits = self.hi.to_bits();
            let other = f64::from_bits(if self.lo > 0.0 { bits + 1 } else { bits - 1 });
            let half = 0.5 * (other - self.hi).abs();
            if (self.lo.abs() - half).abs() <= half * 1e-9 {
                return if bits.is_multiple_of(2) {
                    self.hi
                } else {
                    other
                };
            }
        }
        self.hi + self.lo
    }

    /// `w / s` to double-double accuracy.
    fn ratio(w: f64, s: Dd) -> Dd {
        let q1 = w / s.hi;
        let p = s.mul(q1);
        let rem = Dd { hi: w, lo: 0.0 }.add(Dd {
            hi: -p.hi,
            lo: -p.lo,
        });
        Dd::renorm(q1, rem.value() / s.hi)
    }
}

/// Construction parameters of a cascade measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    pub base_count: usize,
    pub ratios: Vec<f64>,
    /// Left endpoints of the children. Tight packing when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl CascadeSpec {
    pub fn new(ratios: Vec<f64>, offsets: Option<Vec<f64>>, weights: Vec<f64>) -> Self {
        CascadeSpec {
            base_count: ratios.len(),
            ratios,
            offsets,
            weights,
        }
    }

    /// `b` equal children tiling `[0, 1]` with the given weights.
    pub fn equal_split(weights: Vec<f64>) -> Self {
        let b = weights.len();
        CascadeSpec::new(vec![1.0 / b as f64; b], None, weights)
    }

    /// Lebesgue measure on `[0, 1]` as a dyadic cascade.
    pub fn lebesgue() -> Self {
        CascadeSpec::equal_split(vec![0.5, 0.5])
    }

    /// Binomial cascade on the dyadic intervals.
    pub fn binomial(p0: f64) -> Self {
        CascadeSpec::equal_split(vec![p0, 1.0 - p0])
    }

    /// Middle-thirds Cantor construction with the given two weights.
    pub fn cantor(weights: [f64; 2]) -> Self {
        CascadeSpec::new(
            vec![1.0 / 3.0, 1.0 / 3.0],
            Some(vec![0.0, 2.0 / 3.0]),
            weights.to_vec(),
        )
    }

    pub fn build(&self) -> Result<SelfSimilarMeasure> {
        SelfSimilarMeasure::new(self)
    }

    fn resolved_offsets(&self) -> Vec<f64> {
        match &self.offsets {
            Some(o) => o.clone(),
            None => {
                let mut acc = 0.0;
                self.ratios
                    .iter()
                    .map(|c| {
                        let left = acc;
                        acc += c;
                        left
                    })
                    .collect()
            }
        }
    }
}

/// An exact self-similar probability measure on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarMeasure {
    ratios: Vec<f64>,
    offsets: Vec<f64>,
    weights: Vec<f64>,
    /// Weights renormalized to sum to one in double-double; used by the CDF
    /// descent so that a cell equals the sum of its children.
    unit_weights: Vec<Dd>,
    ln_weights: Vec<f64>,
    ln_ratios: Vec<f64>,
}

impl SelfSimilarMeasure {
    pub fn new(spec: &CascadeSpec) -> Result<Self> {
        let b = spec.base_count;
        if b < 2 {
            return Err(Error::InvalidSpec(format!("base_count {b} < 2")));
        }
        let offsets = spec.resolved_offsets();
        if spec.ratios.len() != b || spec.weights.len() != b || offsets.len() != b {
            return Err(Error::InvalidSpec(format!(
                "expected {b} ratios, offsets and weights, got {}, {} and {}",
                spec.ratios.len(),
                offsets.len(),
                spec.weights.len()
            )));
        }
        for (i, &c) in spec.ratios.iter().enumerate() {
            if !(c.is_finite() && c > 0.0 && c < 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "ratio {i} = {c} must lie in (0, 1)"
                )));
            }
        }
        let ratio_sum: f64 = spec.ratios.iter().sum();
        if ratio_sum > 1.0 + GEOMETRY_TOL {
            return Err(Error::InvalidSpec(format!("ratios sum to {ratio_sum} > 1")));
        }
        for i in 0..b {
            let (lo, hi) = (offsets[i], offsets[i] + spec.ratios[i]);
            if !lo.is_finite() || lo < -GEOMETRY_TOL || hi > 1.0 + GEOMETRY_TOL {
                return Err(Error::Overlap {
                    first: i,
                    second: i,
                });
            }
            if i > 0 && lo < offsets[i - 1] + spec.ratios[i - 1] - GEOMETRY_TOL {
                return Err(Error::Overlap {
                    first: i - 1,
                    second: i,
                });
            }
        }
        if spec.weights.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidSpec("weights must be finite and >= 0".into()));
        }
        let sum: f64 = spec.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSum { sum });
        }
        if spec.weights.iter().filter(|&&p| p > 0.0).count() < 2 {
            return Err(Error::Atomic);
        }
        let total = spec
            .weights
            .iter()
            .fold(Dd::ZERO, |acc, &p| acc.add(Dd { hi: p, lo: 0.0 }));
        Ok(SelfSimilarMeasure {
            unit_weights: spec.weights.iter().map(|&p| Dd::ratio(p, total)).collect(),
            ln_weights: spec.weights.iter().map(|p| p.ln()).collect(),
            ln_ratios: spec.ratios.iter().map(|c| c.ln()).collect(),
            ratios: spec.ratios.clone(),
            offsets,
            weights: spec.weights.clone(),
        })
    }

    pub fn base_count(&self) -> usize {
        self.ratios.len()
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ln p_i`, `-inf` for empty branches.
    pub fn ln_weights(&self) -> &[f64] {
        &self.ln_weights
    }

    pub fn ln_ratios(&self) -> &[f64] {
        &self.ln_ratios
    }

    pub fn spec(&self) -> CascadeSpec {
        CascadeSpec::new(
            self.ratios.clone(),
            Some(self.offsets.clone()),
            self.weights.clone(),
        )
    }

    /// Same child intervals (weights may differ).
    pub fn same_geometry(&self, other: &SelfSimilarMeasure) -> bool {
        self.base_count() == other.base_count()
            && self
                .ratios
                .iter()
                .zip(&other.ratios)
                .all(|(a, b)| (a - b).abs() <= GEOMETRY_TOL)
            && self
                .offsets
                .iter()
                .zip(&other.offsets)
                .all(|(a, b)| (a - b).abs() <= GEOMETRY_TOL)
    }

    /// Same geometry with a new weight vector.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<SelfSimilarMeasure> {
        SelfSimilarMeasure::new(&CascadeSpec::new(
            self.ratios.clone(),
            Some(self.offsets.clone()),
            weights,
        ))
    }

    /// `m([0, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        self.lower_local(x)
    }

    /// Mass of `[0, x]` for `x` in local cell coordinates.
    ///
    /// Accumulates in double-double so that points reaching the same gap
    /// along different paths round to the same value.
    fn lower_local(&self, x: f64) -> f64 {
        let mut acc = Dd::ZERO;
        let mut scale = Dd::ONE;
        let mut local = x;
        let last = self.base_count() - 1;
        for _ in 0..DESCENT_DEPTH_CAP {
            if local <= 0.0 {
                return acc.value();
            }
            if local >= 1.0 || local >= self.offsets[last] + self.ratios[last] {
                return acc.add(scale).value();
            }
            if scale.hi < RESIDUAL_MASS_CUTOFF {
                break;
            }
            let mut inside = None;
            for i in 0..self.base_count() {
                let lo = self.offsets[i];
                if local >= lo + self.ratios[i] {
                    acc = acc.add(scale.mul_dd(self.unit_weights[i]));
                } else {
                    if local > lo {
                        inside = Some(i);
                    }
                    break;
                }
            }
            match inside {
                None => return acc.value(),
                Some(i) => {
                    scale = scale.mul_dd(self.unit_weights[i]);
                    if scale.hi == 0.0 {
                        return acc.value();
                    }
                    local = (local - self.offsets[i]) / self.ratios[i];
                }
            }
        }
        // residual cell: linear share of what is left
        acc.add(scale.mul(local.clamp(0.0, 1.0))).value()
    }

    /// Mass of `[x, 1]` for `x` in local cell coordinates.
    fn upper_local(&self, x: f64) -> f64 {
        let mut acc = Dd::ZERO;
        let mut scale = Dd::ONE;
        let mut local = x;
        for _ in 0..DESCENT_DEPTH_CAP {
            if local >= 1.0 {
                return acc.value();
            }
            if local <= 0.0 || local <= self.offsets[0] {
                return acc.add(scale).value();
            }
            if scale.hi < RESIDUAL_MASS_CUTOFF {
                break;
            }
            let mut inside = None;
            for i in (0..self.base_count()).rev() {
                let lo = self.offsets[i];
                if local <= lo {
                    acc = acc.add(scale.mul_dd(self.unit_weights[i]));
                } else {
                    if local < lo + self.ratios[i] {
                        inside = Some(i);
                    }
                    break;
                }
            }
            match inside {
                None => return acc.value(),
                Some(i) => {
                    scale = scale.mul_dd(self.unit_weights[i]);
                    if scale.hi == 0.0 {
                        return acc.value();
                    }
                    local = (local - self.offsets[i]) / self.ratios[i];
                }
            }
        }
        acc.add(scale.mul((1.0 - local).clamp(0.0, 1.0))).value()
    }

    /// Mass of the closed interval `[a, b]`.
    ///
    /// Descends while both endpoints share a child so that small intervals
    /// keep full relative precision instead of cancelling two CDF values.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        let (mut lo, mut hi) = (a.max(0.0), b.min(1.0));
        if !(lo < hi) {
            return 0.0;
        }
        let mut scale = 1.0;
        for _ in 0..DESCENT_DEPTH_CAP {
            if lo <= 0.0 && hi >= 1.0 {
                return scale;
            }
            let shared = (0..self.base_count()).find(|&i| {
                let clo = self.offsets[i];
                lo >= clo && hi <= clo + self.ratios[i]
            });
            match shared {
                Some(i) => {
                    scale *= self.weights[i];
                    if scale == 0.0 {
                        return 0.0;
                    }
                    lo = (lo - self.offsets[i]) / self.ratios[i];
                    hi = (hi - self.offsets[i]) / self.ratios[i];
                }
                None => {
                    let mut total = 0.0;
                    for i in 0..self.base_count() {
                        let clo = self.offsets[i];
                        let chi = clo + self.ratios[i];
                        let p = self.weights[i];
                        if hi <= clo || lo >= chi || p == 0.0 {
                            continue;
                        }
                        if lo <= clo && hi >= chi {
                            total += p;
                        } else if lo > clo {
                            total += p * self.upper_local((lo - clo) / self.ratios[i]);
                        } else {
                            total += p * self.lower_local((hi - clo) / self.ratios[i]);
                        }
                    }
                    return scale * total;
                }
            }
        }
        // below double resolution: treat the residual cell as uniform
        scale * (hi - lo).clamp(0.0, 1.0)
    }

    /// `m(B(x, r))` for the closed ball `[x - r, x + r]`.
    pub fn ball_mass(&self, x: f64, r: f64) -> f64 {
        self.interval_mass(x - r, x + r)
    }

    /// Geometry of the cell with the given digit word.
    pub fn cell(&self, digits: &[u8]) -> Result<Cell> {
        let mut left = 0.0;
        let mut len = 1.0;
        for &d in digits {
            let d = d as usize;
            if d >= self.base_count() {
                return Err(Error::InvalidArgument(format!(
                    "digit {d} out of range for base {}",
                    self.base_count()
                )));
            }
            left += len * self.offsets[d];
            len *= self.ratios[d];
        }
        Ok(Cell {
            digits: digits.to_vec(),
            left,
            len,
        })
    }

    /// Product of the weights along the word.
    pub fn cell_mass(&self, digits: &[u8]) -> f64 {
        digits.iter().map(|&d| self.weights[d as usize]).product()
    }

    /// Fixed point of the `i`-th similarity, in `[0, 1]`.
    pub fn fixed_point(&self, digit: usize) -> f64 {
        self.offsets[digit] / (1.0 - self.ratios[digit])
    }

    /// Smallest local dimension exponent `min_i ln p_i / ln c_i` over
    /// branches with positive weight.
    pub fn min_scaling_exponent(&self) -> f64 {
        self.ln_weights
            .iter()
            .zip(&self.ln_ratios)
            .filter(|(lw, _)| lw.is_finite())
            .map(|(lw, lr)| lw / lr)
            .fold(f64::INFINITY, f64::min)
    }
}

/// A construction cell identified by its digit word.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub digits: Vec<u8>,
    pub left: f64,
    pub len: f64,
}

impl Cell {
    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn right(&self) -> f64 {
        self.left + self.len
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.left && x <= self.right()
    }
}

/// One enumerated cell with its masses under every measure of a vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMasses {
    pub cell: Cell,
    pub mu: Vec<f64>,
    pub nu: f64,
    pub diameter: f64,
}

/// A set `E` made of whole construction cells.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum Region {
    /// The whole attractor.
    #[default]
    Support,
    /// Disjoint union of cylinders, none a prefix of another.
    Cylinders(Vec<Vec<u8>>),
}

impl Region {
    pub fn prefixes(&self) -> Vec<Vec<u8>> {
        match self {
            Region::Support => vec![Vec::new()],
            Region::Cylinders(words) => words.clone(),
        }
    }

    pub fn max_prefix_len(&self) -> usize {
        self.prefixes().iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn validate(&self, base_count: usize) -> Result<()> {
        let Region::Cylinders(words) = self else {
            return Ok(());
        };
        if words.is_empty() {
            return Err(Error::InvalidArgument("empty cylinder region".into()));
        }
        for (i, w) in words.iter().enumerate() {
            if w.iter().any(|&d| d as usize >= base_count) {
                return Err(Error::InvalidArgument(format!(
                    "cylinder {i} has a digit >= {base_count}"
                )));
            }
            for (j, v) in words.iter().enumerate() {
                if i != j && v.len() >= w.len() && v[..w.len()] == w[..] {
                    return Err(Error::InvalidArgument(format!(
                        "cylinder {i} is a prefix of cylinder {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mass of `[a, b] ∩ E`.
    pub fn interval_mass(&self, m: &SelfSimilarMeasure, a: f64, b: f64) -> f64 {
        match self {
            Region::Support => m.interval_mass(a, b),
            Region::Cylinders(words) => words
                .iter()
                .filter_map(|w| m.cell(w).ok())
                .map(|c| m.interval_mass(a.max(c.left), b.min(c.right())))
                .sum(),
        }
    }

    pub fn total_mass(&self, m: &SelfSimilarMeasure) -> f64 {
        match self {
            Region::Support => 1.0,
            Region::Cylinders(words) => words.iter().map(|w| m.cell_mass(w)).sum(),
        }
    }
}

/// The vector `μ = (μ_1, …, μ_k)` together with the reference measure `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMeasure {
    components: Vec<SelfSimilarMeasure>,
    reference: SelfSimilarMeasure,
}

impl VectorMeasure {
    pub fn new(components: Vec<SelfSimilarMeasure>, reference: SelfSimilarMeasure) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument(
                "vector measure needs at least one component".into(),
            ));
        }
        if components.iter().any(|m| !m.same_geometry(&reference)) {
            return Err(Error::GeometryMismatch);
        }
        let vm = VectorMeasure {
            components,
            reference,
        };
        if vm.active_digits().len() < 2 {
            return Err(Error::Atomic);
        }
        Ok(vm)
    }

    pub fn from_specs(components: &[CascadeSpec], reference: &CascadeSpec) -> Result<Self> {
        let comps = components
            .iter()
            .map(CascadeSpec::build)
            .collect::<Result<Vec<_>>>()?;
        VectorMeasure::new(comps, reference.build()?)
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[SelfSimilarMeasure] {
        &self.components
    }

    pub fn reference(&self) -> &SelfSimilarMeasure {
        &self.reference
    }

    /// Shared geometry, taken from the reference measure.
    pub fn geometry(&self) -> &SelfSimilarMeasure {
        &self.reference
    }

    pub fn base_count(&self) -> usize {
        self.reference.base_count()
    }

    /// Digits on which every measure has positive weight.
    pub fn active_digits(&self) -> Vec<usize> {
        (0..self.base_count())
            .filter(|&i| {
                self.reference.weights()[i] > 0.0
                    && self.components.iter().all(|m| m.weights()[i] > 0.0)
            })
            .collect()
    }

    /// Largest child ratio; `δ` at depth `n` is its `n`-th power.
    pub fn max_ratio(&self) -> f64 {
        self.reference.ratios().iter().cloned().fold(0.0, f64::max)
    }

    fn check_enumeration(&self, depth: usize) -> Result<()> {
        let bits = depth as f64 * (self.base_count() as f64).log2();
        if bits > ENUMERATION_BITS {
            return Err(Error::Resource {
                what: format!(
                    "enumerating depth {depth} in base {} needs 2^{bits:.1} cells",
                    self.base_count()
                ),
                limit: ENUMERATION_BITS as u64,
                hint: "lower the maximum depth".into(),
            });
        }
        Ok(())
    }

    /// Every depth-`n` cell inside `region` carrying positive mass for all
    /// measures, in lexicographic digit order.
    pub fn cells_in(&self, region: &Region, depth: usize) -> Result<Vec<CellMasses>> {
        self.check_enumeration(depth)?;
        region.validate(self.base_count())?;
        let mut out = Vec::new();
        self.visit_cells(region, depth, |word, left, len, ln_mu, ln_nu| {
            out.push(CellMasses {
                cell: Cell {
                    digits: word.to_vec(),
                    left,
                    len,
                },
                mu: ln_mu.iter().map(|l| l.exp()).collect(),
                nu: ln_nu.exp(),
                diameter: len,
            });
        })?;
        Ok(out)
    }

    /// Depth-first walk over the positive-mass cells of depth `depth` below
    /// each cylinder of `region`. The callback receives the digit word, the
    /// left endpoint and length, `ln μ_j(C)` and `ln ν(C)`.
    pub fn visit_cells<F>(&self, region: &Region, depth: usize, mut f: F) -> Result<()>
    where
        F: FnMut(&[u8], f64, f64, &[f64], f64),
    {
        let active = self.active_digits();
        for prefix in region.prefixes() {
            if prefix.len() > depth {
                return Err(Error::InvalidArgument(format!(
                    "depth {depth} is shallower than a region cylinder of length {}",
                    prefix.len()
                )));
            }
            let cell = self.reference.cell(&prefix)?;
            if prefix.iter().any(|d| !active.contains(&(*d as usize))) {
                continue;
            }
            let mut ln_mu: Vec<f64> = self
                .components
                .iter()
                .map(|m| prefix.iter().map(|&d| m.ln_weights()[d as usize]).sum())
                .collect();
            let ln_nu: f64 = prefix
                .iter()
                .map(|&d| self.reference.ln_weights()[d as usize])
                .sum();
            let mut word = prefix.clone();
            let mut walker = Walker {
                vm: self,
                active: &active,
                target: depth,
            };
            walker.descend(&mut word, cell.left, cell.len, &mut ln_mu, ln_nu, &mut f);
        }
        Ok(())
    }

    /// Random support point: `depth` digits drawn uniformly from the active
    /// digits, followed by the fixed point of the first active digit.
    pub fn sample_support_point<R: Rng>(&self, rng: &mut R, depth: usize) -> (Vec<u8>, f64) {
        let active = self.active_digits();
        let word: Vec<u8> = (0..depth)
            .map(|_| active[rng.gen_range(0..active.len())] as u8)
            .collect();
        (word.clone(), self.point_of_word(&word))
    }

    /// Point of the attractor coded by `word` followed by the first active
    /// digit repeated forever.
    pub fn point_of_word(&self, word: &[u8]) -> f64 {
        let tail = self.active_digits()[0];
        let cell = self
            .reference
            .cell(word)
            .expect("word digits come from the active set");
        cell.left + cell.len * self.reference.fixed_point(tail)
    }
}

struct Walker<'a> {
    vm: &'a VectorMeasure,
    active: &'a [usize],
    target: usize,
}

impl Walker<'_> {
    fn descend<F>(
        &mut self,
        word: &mut Vec<u8>,
        left: f64,
        len: f64,
        ln_mu: &mut Vec<f64>,
        ln_nu: f64,
        f: &mut F,
    ) where
        F: FnMut(&[u8], f64, f64, &[f64], f64),
    {
        if word.len() == self.target {
            f(word, left, len, ln_mu, ln_nu);
            return;
        }
        let geo = self.vm.reference();
        for &d in self.active {
            for (l, m) in ln_mu.iter_mut().zip(&self.vm.components) {
                *l += m.ln_weights()[d];
            }
            word.push(d as u8);
            self.descend(
                word,
                left + len * geo.offsets()[d],
                len * geo.ratios()[d],
                ln_mu,
                ln_nu + geo.ln_weights()[d],
                f,
            );
            word.pop();
            for (l, m) in ln_mu.iter_mut().zip(&self.vm.components) {
                *l -= m.ln_weights()[d];
            }
        }
    }
}

/// Cells of the whole support at depth `n`.
pub fn cells_at_depth(vm: &VectorMeasure, depth: usize) -> Result<Vec<CellMasses>> {
    vm.cells_in(&Region::Support, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn binomial() -> SelfSimilarMeasure {
        CascadeSpec::binomial(0.25).build().unwrap()
    }

    #[test]
    fn lebesgue_cdf_is_identity() {
        let m = CascadeSpec::lebesgue().build().unwrap();
        assert_relative_eq!(m.cdf(0.7), 0.7, epsilon = 1e-14);
        assert_eq!(m.cdf(-1.0), 0.0);
        assert_eq!(m.cdf(2.0), 1.0);
    }

    #[test]
    fn binomial_first_level_and_third() {
        let m = binomial();
        assert_relative_eq!(m.cdf(0.5), 0.25, epsilon = 1e-15);
        assert_relative_eq!(m.cdf(1.0 / 3.0), 1.0 / 13.0, epsilon = 1e-14);
    }

    #[test]
    fn cantor_cdf_on_gap() {
        let m = CascadeSpec::cantor([0.5, 0.5]).build().unwrap();
        assert_relative_eq!(m.cdf(0.5), 0.5, epsilon = 1e-15);
        assert_relative_eq!(m.cdf(1.0 / 3.0), 0.5, epsilon = 1e-15);
        assert_eq!(m.ball_mass(0.5, 1.0 / 6.0 - 1e-12), 0.0);
    }

    #[test]
    fn ball_masses() {
        let leb = CascadeSpec::lebesgue().build().unwrap();
        assert_relative_eq!(leb.ball_mass(0.5, 0.1), 0.2, epsilon = 1e-14);
        assert_relative_eq!(binomial().ball_mass(0.75, 0.25), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        let overlap = CascadeSpec::new(vec![0.6, 0.4], Some(vec![0.0, 0.5]), vec![0.5, 0.5]);
        assert!(matches!(overlap.build(), Err(Error::Overlap { .. })));
        let sum = CascadeSpec::equal_split(vec![0.5, 0.6]);
        assert!(matches!(sum.build(), Err(Error::WeightSum { .. })));
        let atomic = CascadeSpec::equal_split(vec![0.0, 1.0]);
        assert_eq!(atomic.build(), Err(Error::Atomic));
        let outside = CascadeSpec::new(vec![0.5, 0.5], Some(vec![0.0, 0.6]), vec![0.5, 0.5]);
        assert!(outside.build().is_err());
    }

    #[test]
    fn default_offsets_pack_tightly() {
        let spec = CascadeSpec::new(vec![0.2, 0.3, 0.5], None, vec![0.2, 0.3, 0.5]);
        let m = spec.build().unwrap();
        assert_eq!(m.offsets(), &[0.0, 0.2, 0.5]);
        // weights equal ratios: Lebesgue again
        assert_relative_eq!(m.cdf(0.37), 0.37, epsilon = 1e-13);
    }

    #[test]
    fn enumerates_depth_two() {
        let vm =
            VectorMeasure::new(vec![binomial()], CascadeSpec::lebesgue().build().unwrap()).unwrap();
        let cells = cells_at_depth(&vm, 2).unwrap();
        let masses: Vec<f64> = cells.iter().map(|c| c.mu[0]).collect();
        let expected = [1.0 / 16.0, 3.0 / 16.0, 3.0 / 16.0, 9.0 / 16.0];
        for (m, e) in masses.iter().zip(expected) {
            assert_relative_eq!(*m, e, epsilon = 1e-15);
        }
        assert!(cells.iter().all(|c| (c.diameter - 0.25).abs() < 1e-15));
        assert!(cells.iter().all(|c| (c.nu - 0.25).abs() < 1e-15));
        assert_eq!(cells[2].cell.digits, vec![1, 0]);
        assert_relative_eq!(cells[2].cell.left, 0.5);
    }

    #[test]
    fn zero_weight_branches_are_skipped() {
        let m = CascadeSpec::equal_split(vec![0.5, 0.0, 0.5])
            .build()
            .unwrap();
        let vm = VectorMeasure::new(vec![m.clone()], m).unwrap();
        let cells = cells_at_depth(&vm, 3).unwrap();
        assert_eq!(cells.len(), 8);
        assert!(cells.iter().all(|c| c.mu[0] > 0.0));
    }

    #[test]
    fn enumeration_guard() {
        let vm = VectorMeasure::new(vec![binomial()], binomial()).unwrap();
        assert!(matches!(
            cells_at_depth(&vm, 41),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let cantor = CascadeSpec::cantor([0.5, 0.5]).build().unwrap();
        assert_eq!(
            VectorMeasure::new(vec![cantor], binomial()),
            Err(Error::GeometryMismatch)
        );
    }

    #[test]
    fn region_masses() {
        let m = binomial();
        let region = Region::Cylinders(vec![vec![0], vec![1, 1]]);
        region.validate(2).unwrap();
        assert_relative_eq!(region.total_mass(&m), 0.25 + 0.5625);
        assert_relative_eq!(region.interval_mass(&m, 0.0, 1.0), 0.8125, epsilon = 1e-15);
        let bad = Region::Cylinders(vec![vec![0], vec![0, 1]]);
        assert!(bad.validate(2).is_err());
    }

    #[test]
    fn support_points_are_in_cells() {
        use rand::SeedableRng;
        let cantor = CascadeSpec::cantor([0.25, 0.75]).build().unwrap();
        let vm = VectorMeasure::new(vec![cantor.clone()], cantor.clone()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (word, x) = vm.sample_support_point(&mut rng, 20);
            assert!(cantor.cell(&word).unwrap().contains(x));
            assert!(cantor.ball_mass(x, 1e-9) > 0.0);
        }
    }
}
