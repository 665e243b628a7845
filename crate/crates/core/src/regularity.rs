//! Quasi-Ahlfors index and doubling constants.

use serde::{Deserialize, Serialize};

use crate::density::sample_points;
use crate::dimension::linear_slope;
use crate::error::{Error, Result};
use crate::measure::{Region, SelfSimilarMeasure, VectorMeasure};

/// Number of trailing depths inspected by the trend checks.
pub const TREND_WINDOW: usize = 5;
/// Allowed growth over the trend window for a "bounded" trajectory.
pub const TREND_TOLERANCE: f64 = 0.10;
/// Offset above the index at which the scan must diverge.
pub const DIVERGENCE_PROBE: f64 = 0.05;
pub const MIN_DOUBLING_SAMPLES: usize = 64;
/// Largest growth rate of `ln sup` per depth still read as bounded.
pub const DOUBLING_SLOPE_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AhlforsVerdict {
    QuasiAhlfors,
    NotAtThisAlpha,
    ExactAhlfors,
}

/// Per-depth extremes of `ν(C) / |C|^α` over construction cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhlforsScan {
    pub alpha: f64,
    /// `(depth, max ratio, min ratio)`.
    pub per_depth: Vec<(usize, f64, f64)>,
    pub bounded: bool,
    pub bounded_below: bool,
}

impl AhlforsScan {
    pub fn verdict(&self) -> AhlforsVerdict {
        match (self.bounded, self.bounded_below) {
            (true, true) => AhlforsVerdict::ExactAhlfors,
            (true, false) => AhlforsVerdict::QuasiAhlfors,
            _ => AhlforsVerdict::NotAtThisAlpha,
        }
    }

    pub fn max_ratio(&self) -> f64 {
        self.per_depth.iter().map(|p| p.1).fold(1.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub alpha_hat: f64,
    pub m_hat: f64,
    pub per_depth: Vec<(usize, f64)>,
    pub verdict: AhlforsVerdict,
    pub scan: AhlforsScan,
    /// The same scan at `alpha_hat + DIVERGENCE_PROBE`.
    pub probe: AhlforsScan,
}

fn single(m: &SelfSimilarMeasure) -> Result<VectorMeasure> {
    VectorMeasure::new(vec![m.clone()], m.clone())
}

fn sorted(depths: &[usize]) -> Result<Vec<usize>> {
    if depths.is_empty() {
        return Err(Error::InvalidArgument("no depths given".into()));
    }
    let mut d = depths.to_vec();
    d.sort_unstable();
    d.dedup();
    Ok(d)
}

/// Scan of `ν(C)/|C|^α` over all positive-mass cells at each depth.
pub fn ahlfors_scan(nu: &SelfSimilarMeasure, alpha: f64, depths: &[usize]) -> Result<AhlforsScan> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "index must be positive, got {alpha}"
        )));
    }
    let vm = single(nu)?;
    let depths = sorted(depths)?;
    let mut per_depth = Vec::with_capacity(depths.len());
    for &n in &depths {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        if n as f64 * (nu.base_count() as f64).log2() > crate::measure::ENUMERATION_BITS {
            return Err(Error::Resource {
                what: format!("Ahlfors scan at depth {n}"),
                limit: crate::measure::ENUMERATION_BITS as u64,
                hint: "lower the maximum depth".into(),
            });
        }
        vm.visit_cells(&Region::Support, n, |_, _, len, _, ln_nu| {
            let r = ln_nu - alpha * len.ln();
            hi = hi.max(r);
            lo = lo.min(r);
        })?;
        per_depth.push((n, hi.exp(), lo.exp()));
    }
    let w = per_depth.len().min(TREND_WINDOW);
    let window = &per_depth[per_depth.len() - w..];
    let (first, last) = (window[0], window[w - 1]);
    let grow = 1.0 + TREND_TOLERANCE;
    Ok(AhlforsScan {
        alpha,
        bounded: last.1 <= first.1 * grow,
        bounded_below: last.2 * grow >= first.2,
        per_depth,
    })
}

/// `α̂ = min_i ln p_i / ln c_i`, checked by scanning at `α̂` and `α̂ + 0.05`.
pub fn quasi_ahlfors_index(nu: &SelfSimilarMeasure, depths: &[usize]) -> Result<RegularityReport> {
    let alpha_hat = nu.min_scaling_exponent();
    let scan = ahlfors_scan(nu, alpha_hat, depths)?;
    let probe = ahlfors_scan(nu, alpha_hat + DIVERGENCE_PROBE, depths)?;
    Ok(RegularityReport {
        alpha_hat,
        m_hat: scan.max_ratio(),
        per_depth: scan.per_depth.iter().map(|p| (p.0, p.1)).collect(),
        verdict: scan.verdict(),
        scan,
        probe,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub a: f64,
    /// `(depth, sup_x m(B(x, a r)) / m(B(x, r)))` at `r = b^-depth`.
    pub per_depth_sup: Vec<(usize, f64)>,
    /// Max over the last three depths.
    pub p_a_hat: f64,
    /// Regression slope of `ln sup` against depth.
    pub log_slope: f64,
    /// The sweep shows no sustained growth.
    pub bounded: bool,
    pub skipped_points: usize,
    pub samples: usize,
    pub seed: u64,
}

impl DoublingReport {
    /// Finite `P_a` as far as the sweep can tell.
    pub fn is_finite(&self) -> bool {
        self.p_a_hat.is_finite() && self.bounded
    }
}

/// Empirical `P_a(m)` from a depth sweep over sampled support points.
pub fn doubling_constant(
    m: &SelfSimilarMeasure,
    a: f64,
    depths: &[usize],
    samples: usize,
    seed: u64,
) -> Result<DoublingReport> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "doubling factor must exceed 1, got {a}"
        )));
    }
    if samples < MIN_DOUBLING_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "doubling needs at least {MIN_DOUBLING_SAMPLES} samples, got {samples}"
        )));
    }
    let depths = sorted(depths)?;
    let vm = single(m)?;
    let points = sample_points(&vm, &Region::Support, samples, seed)?;
    let b = m.base_count() as f64;
    let mut skipped = 0;
    let mut per_depth_sup = Vec::with_capacity(depths.len());
    for &n in &depths {
        let r = b.powi(-(n as i32));
        let mut sup = 0.0f64;
        for (_, x) in &points {
            let small = m.ball_mass(*x, r);
            if !(small > 0.0) {
                skipped += 1;
                continue;
            }
            sup = sup.max(m.ball_mass(*x, a * r) / small);
        }
        per_depth_sup.push((n, sup));
    }
    let tail = per_depth_sup.len().saturating_sub(3);
    let p_a_hat = per_depth_sup[tail..]
        .iter()
        .map(|p| p.1)
        .fold(0.0, f64::max);
    let log_slope = if per_depth_sup.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = per_depth_sup
            .iter()
            .map(|&(n, s)| (n as f64, s.ln()))
            .unzip();
        linear_slope(&x, &y)
    } else {
        0.0
    };
    Ok(DoublingReport {
        a,
        per_depth_sup,
        p_a_hat,
        log_slope,
        bounded: log_slope <= DOUBLING_SLOPE_LIMIT,
        skipped_points: skipped,
        samples,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorDoublingReport {
    pub components: Vec<DoublingReport>,
    pub reference: DoublingReport,
    /// `Π_i P_a(μ_i)`.
    pub product_p_a: f64,
    /// Every component and the reference measure have finite `P_a`.
    pub in_pd: bool,
}

pub fn is_doubling(
    vm: &VectorMeasure,
    a: f64,
    depths: &[usize],
    samples: usize,
    seed: u64,
) -> Result<VectorDoublingReport> {
    let components = vm
        .components()
        .iter()
        .map(|m| doubling_constant(m, a, depths, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let reference = doubling_constant(vm.reference(), a, depths, samples, seed)?;
    let product_p_a = components.iter().map(|r| r.p_a_hat).product();
    let in_pd = components.iter().all(DoublingReport::is_finite) && reference.is_finite();
    Ok(VectorDoublingReport {
        components,
        reference,
        product_p_a,
        in_pd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::CascadeSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lebesgue_is_exact_ahlfors() {
        let leb = CascadeSpec::lebesgue().build().unwrap();
        let r = quasi_ahlfors_index(&leb, &(1..=12).collect::<Vec<_>>()).unwrap();
        assert_abs_diff_eq!(r.alpha_hat, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.m_hat, 1.0, epsilon = 1e-12);
        assert_eq!(r.verdict, AhlforsVerdict::ExactAhlfors);
    }

    #[test]
    fn binomial_index() {
        let m = CascadeSpec::binomial(0.25).build().unwrap();
        let r = quasi_ahlfors_index(&m, &(1..=16).collect::<Vec<_>>()).unwrap();
        assert_abs_diff_eq!(r.alpha_hat, (4.0f64 / 3.0).log2(), epsilon = 1e-12);
        assert_eq!(r.verdict, AhlforsVerdict::QuasiAhlfors);
        assert!(r.per_depth.iter().all(|p| p.1 <= 1.0 + 1e-12));
        assert_eq!(r.probe.verdict(), AhlforsVerdict::NotAtThisAlpha);
    }

    #[test]
    fn cantor_index() {
        let m = CascadeSpec::cantor([0.5, 0.5]).build().unwrap();
        let r = quasi_ahlfors_index(&m, &(1..=12).collect::<Vec<_>>()).unwrap();
        assert_abs_diff_eq!(r.alpha_hat, 2f64.ln() / 3f64.ln(), epsilon = 1e-12);
        assert_eq!(r.verdict, AhlforsVerdict::ExactAhlfors);
        for (_, hi, lo) in &r.scan.per_depth {
            assert_abs_diff_eq!(*hi, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(*lo, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn lebesgue_doubles_by_two() {
        let leb = CascadeSpec::lebesgue().build().unwrap();
        let r = doubling_constant(&leb, 2.0, &[4, 6, 8, 10], 64, 5).unwrap();
        assert_abs_diff_eq!(r.p_a_hat, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn binomial_is_not_doubling() {
        // adjacent dyadic cells at 1/2 have mass ratio (p1/p0)^n
        let m = CascadeSpec::binomial(0.25).build().unwrap();
        let r = doubling_constant(&m, 2.0, &(4..=16).collect::<Vec<_>>(), 128, 3).unwrap();
        assert!(r.log_slope > 0.2);
        assert!(!r.is_finite());
        let c = CascadeSpec::cantor([0.25, 0.75]).build().unwrap();
        let r = doubling_constant(&c, 2.0, &(4..=16).collect::<Vec<_>>(), 128, 3).unwrap();
        assert!(r.is_finite());
        assert!(r.p_a_hat < 6.0);
    }

    #[test]
    fn doubling_argument_checks() {
        let leb = CascadeSpec::lebesgue().build().unwrap();
        assert!(doubling_constant(&leb, 1.0, &[4], 64, 1).is_err());
        assert!(doubling_constant(&leb, 2.0, &[4], 10, 1).is_err());
        assert!(ahlfors_scan(&leb, 0.0, &[3]).is_err());
    }
}
