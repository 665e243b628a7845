//! Cutoff dimensions `dim^q_{μ,ν}`, `Dim^q_{μ,ν}`, `Δ^q_{μ,ν}` and the
//! Legendre spectrum.
//!
//! For each depth `n` the root `t_n` of `S_n(q, t) = 1` is found by
//! bisection; `S_n` is strictly decreasing in `t` because every grid cell of
//! positive depth has reference mass below one. On the grid the covering and
//! packing sums coincide, so all three cutoffs come out equal here even
//! though in general only `dim ≤ Dim ≤ Δ` holds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{CellTable, KernelParams, QTable, Reference, EXPONENT_BOUND};
use crate::measure::{Region, VectorMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionKind {
    Hausdorff,
    Packing,
    Prepacking,
}

impl DimensionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DimensionKind::Hausdorff => "hausdorff",
            DimensionKind::Packing => "packing",
            DimensionKind::Prepacking => "prepacking",
        }
    }
}

/// Bisection settings for the cutoff search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionConfig {
    pub lo: f64,
    pub hi: f64,
    /// Stop once `|S - 1|` is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        BisectionConfig {
            lo: -EXPONENT_BOUND,
            hi: EXPONENT_BOUND,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRoot {
    pub depth: usize,
    /// `±inf` when the root is outside the bracket.
    pub root: f64,
    /// `S_n(q, root) - 1`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub q: Vec<f64>,
    pub kind: DimensionKind,
    pub reference: Reference,
    pub per_depth_roots: Vec<DepthRoot>,
    /// Root at the deepest depth.
    pub limit: f64,
    /// Regression slope of `ln S_n(q, limit)` against `n`.
    pub slope_check: f64,
    pub oracle: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl DimensionEstimate {
    pub fn is_saturated(&self) -> bool {
        !self.limit.is_finite()
    }

    pub fn oracle_error(&self) -> Option<f64> {
        self.oracle.map(|o| (self.limit - o).abs())
    }
}

/// Cutoff of the `ν`-kernel sums over the whole support.
pub fn cutoff_t(
    vm: &VectorMeasure,
    q: &[f64],
    kind: DimensionKind,
    depths: &[usize],
) -> Result<DimensionEstimate> {
    cutoff_t_with(
        vm,
        q,
        kind,
        depths,
        Reference::Measure,
        &Region::Support,
        &BisectionConfig::default(),
    )
}

pub fn dim_q(vm: &VectorMeasure, q: &[f64], depths: &[usize]) -> Result<DimensionEstimate> {
    cutoff_t(vm, q, DimensionKind::Hausdorff, depths)
}

#[allow(non_snake_case)]
pub fn Dim_q(vm: &VectorMeasure, q: &[f64], depths: &[usize]) -> Result<DimensionEstimate> {
    cutoff_t(vm, q, DimensionKind::Packing, depths)
}

#[allow(non_snake_case)]
pub fn Delta_q(vm: &VectorMeasure, q: &[f64], depths: &[usize]) -> Result<DimensionEstimate> {
    cutoff_t(vm, q, DimensionKind::Prepacking, depths)
}

fn check_q(vm: &VectorMeasure, q: &[f64]) -> Result<()> {
    if q.len() != vm.k() {
        return Err(Error::InvalidArgument(format!(
            "q has {} entries, vector measure has {} components",
            q.len(),
            vm.k()
        )));
    }
    KernelParams::new(q.to_vec(), 0.0).map(|_| ())
}

fn sorted_depths(depths: &[usize]) -> Result<Vec<usize>> {
    if depths.is_empty() {
        return Err(Error::InvalidArgument("no depths given".into()));
    }
    let mut d = depths.to_vec();
    d.sort_unstable();
    d.dedup();
    if d[0] == 0 {
        return Err(Error::InvalidArgument(
            "depth 0 has a single cell of reference mass 1; use depths >= 1".into(),
        ));
    }
    Ok(d)
}

pub fn cutoff_t_with(
    vm: &VectorMeasure,
    q: &[f64],
    kind: DimensionKind,
    depths: &[usize],
    reference: Reference,
    region: &Region,
    cfg: &BisectionConfig,
) -> Result<DimensionEstimate> {
    check_q(vm, q)?;
    let depths = sorted_depths(depths)?;
    let mut diagnostics = Vec::new();

    // deepest first: its root is the limit used for the slope check
    let deepest = *depths.last().unwrap();
    let table = CellTable::build(vm, region, deepest, reference)?;
    let qt = table.with_q(q)?;
    let top = bisect_root(&qt, cfg);
    let limit = top.root;
    let mut roots = vec![top];
    let mut slope_pts = vec![(
        deepest as f64,
        if limit.is_finite() {
            qt.ln_sum(limit)
        } else {
            f64::NAN
        },
    )];
    drop(qt);
    drop(table);

    for &n in depths.iter().rev().skip(1) {
        let table = CellTable::build(vm, region, n, reference)?;
        let qt = table.with_q(q)?;
        roots.push(bisect_root(&qt, cfg));
        if limit.is_finite() {
            slope_pts.push((n as f64, qt.ln_sum(limit)));
        }
    }
    roots.reverse();
    slope_pts.reverse();

    for r in &roots {
        if !r.root.is_finite() {
            diagnostics.push(format!(
                "depth {}: no sign change of S-1 on [{}, {}]; dimension saturated at {}",
                r.depth, cfg.lo, cfg.hi, r.root
            ));
        } else if r.residual.abs() > cfg.tol {
            diagnostics.push(format!(
                "depth {}: residual {:e} after {} iterations",
                r.depth, r.residual, r.iterations
            ));
        }
    }
    let slope_check = if limit.is_finite() && slope_pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = slope_pts.into_iter().unzip();
        linear_slope(&x, &y)
    } else {
        f64::NAN
    };
    let oracle = match region {
        Region::Support => closed_form_root(vm, q, reference, cfg),
        Region::Cylinders(_) => None,
    };
    Ok(DimensionEstimate {
        q: q.to_vec(),
        kind,
        reference,
        per_depth_roots: roots,
        limit,
        slope_check,
        oracle,
        diagnostics,
    })
}

fn bisect_root(qt: &QTable<'_>, cfg: &BisectionConfig) -> DepthRoot {
    let depth = qt.depth();
    let (mut lo, mut hi) = (cfg.lo, cfg.hi);
    let f_lo = qt.ln_sum(lo);
    let f_hi = qt.ln_sum(hi);
    if f_lo < 0.0 {
        return DepthRoot {
            depth,
            root: f64::NEG_INFINITY,
            residual: f_lo.exp_m1(),
            iterations: 0,
        };
    }
    if f_hi > 0.0 {
        return DepthRoot {
            depth,
            root: f64::INFINITY,
            residual: f_hi.exp_m1(),
            iterations: 0,
        };
    }
    let mut mid = 0.5 * (lo + hi);
    let mut residual = f64::NAN;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        mid = 0.5 * (lo + hi);
        let f = qt.ln_sum(mid);
        residual = f.exp_m1();
        if residual.abs() <= cfg.tol {
            break;
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    DepthRoot {
        depth,
        root: mid,
        residual,
        iterations,
    }
}

/// Root of the depth-one moment equation
/// `Σ_i Π_j p_{j,i}^{q_j} · w_i^t = 1`, `w_i` the reference weights (or the
/// ratios for the diameter kernel). Exact for shared-geometry cascades.
pub fn closed_form_root(
    vm: &VectorMeasure,
    q: &[f64],
    reference: Reference,
    cfg: &BisectionConfig,
) -> Option<f64> {
    let terms: Vec<(f64, f64)> = vm
        .active_digits()
        .into_iter()
        .map(|i| {
            let a: f64 = vm
                .components()
                .iter()
                .zip(q)
                .map(|(m, qj)| qj * m.ln_weights()[i])
                .sum();
            let w = match reference {
                Reference::Measure => vm.reference().ln_weights()[i],
                Reference::Diameter => vm.reference().ln_ratios()[i],
            };
            (a, w)
        })
        .collect();
    let g = |t: f64| -> f64 {
        let m = terms
            .iter()
            .map(|(a, w)| a + t * w)
            .fold(f64::NEG_INFINITY, f64::max);
        m + terms
            .iter()
            .map(|(a, w)| (a + t * w - m).exp())
            .sum::<f64>()
            .ln()
    };
    let (mut lo, mut hi) = (cfg.lo, cfg.hi);
    if g(lo) < 0.0 || g(hi) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// The `t` at which `ln S_n(E; q, t)` stops growing with `n`: the root of
/// `ln S_{n2} - ln S_{n1}` in `t`. Used where the region is a finite union
/// of cylinders and single-depth roots carry an `O(1/n)` offset.
pub fn growth_rate_cutoff(
    vm: &VectorMeasure,
    q: &[f64],
    region: &Region,
    reference: Reference,
    n1: usize,
    n2: usize,
) -> Result<f64> {
    check_q(vm, q)?;
    if n2 <= n1 {
        return Err(Error::InvalidArgument(format!(
            "growth-rate depths must increase, got {n1} and {n2}"
        )));
    }
    let t1 = CellTable::build(vm, region, n1, reference)?;
    let t2 = CellTable::build(vm, region, n2, reference)?;
    let (q1, q2) = (t1.with_q(q)?, t2.with_q(q)?);
    let g = |t: f64| q2.ln_sum(t) - q1.ln_sum(t);
    let (mut lo, mut hi) = (-EXPONENT_BOUND, EXPONENT_BOUND);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if g_lo < 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if g_hi > 0.0 {
        return Ok(f64::INFINITY);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub q: f64,
    pub tau: f64,
    pub alpha: f64,
    pub f_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub axis: usize,
    pub points: Vec<SpectrumPoint>,
    pub estimates: Vec<DimensionEstimate>,
    pub skipped: Vec<(f64, String)>,
}

/// `τ(q) = dim^q`, `α = -dτ/dq` by central differences (one-sided at the
/// ends), `f(α) = α q + τ(q)`. Only component `axis` of `frozen` varies.
pub fn legendre_spectrum(
    vm: &VectorMeasure,
    q_grid: &[f64],
    axis: usize,
    frozen: &[f64],
    depths: &[usize],
) -> Result<Spectrum> {
    if q_grid.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "spectrum needs at least 3 grid points, got {}",
            q_grid.len()
        )));
    }
    if q_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "q grid must be strictly increasing".into(),
        ));
    }
    if frozen.len() != vm.k() || axis >= vm.k() {
        return Err(Error::InvalidArgument(format!(
            "frozen q needs {} entries and axis < {}",
            vm.k(),
            vm.k()
        )));
    }
    let mut taus = Vec::new();
    let mut estimates = Vec::new();
    let mut skipped = Vec::new();
    for &qv in q_grid {
        let mut q = frozen.to_vec();
        q[axis] = qv;
        match cutoff_t(vm, &q, DimensionKind::Hausdorff, depths) {
            Ok(est) if !est.is_saturated() => {
                taus.push((qv, est.limit));
                estimates.push(est);
            }
            Ok(est) => {
                skipped.push((qv, format!("cutoff saturated at {}", est.limit)));
                estimates.push(est);
            }
            Err(e) => skipped.push((qv, e.to_string())),
        }
    }
    let mut points = Vec::with_capacity(taus.len());
    for i in 0..taus.len() {
        let (qv, tau) = taus[i];
        let (a, b) = match (i.checked_sub(1), taus.get(i + 1)) {
            (Some(p), Some(&next)) => (taus[p], next),
            (None, Some(&next)) => (taus[i], next),
            (Some(p), None) => (taus[p], taus[i]),
            (None, None) => {
                skipped.push((qv, "no neighbour for a finite difference".into()));
                continue;
            }
        };
        let alpha = -(b.1 - a.1) / (b.0 - a.0);
        points.push(SpectrumPoint {
            q: qv,
            tau,
            alpha,
            f_alpha: alpha * qv + tau,
        });
    }
    Ok(Spectrum {
        axis,
        points,
        estimates,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::CascadeSpec;
    use approx::assert_abs_diff_eq;

    fn vm(components: &[CascadeSpec], reference: CascadeSpec) -> VectorMeasure {
        VectorMeasure::from_specs(components, &reference).unwrap()
    }

    #[test]
    fn uniform_cutoff_is_one_minus_q() {
        let v = vm(&[CascadeSpec::lebesgue()], CascadeSpec::lebesgue());
        for q in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            let e = dim_q(&v, &[q], &[4, 8]).unwrap();
            assert_abs_diff_eq!(e.limit, 1.0 - q, epsilon = 1e-9);
            for r in &e.per_depth_roots {
                assert!(r.residual.abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn three_cutoffs_coincide_on_grid() {
        let v = vm(&[CascadeSpec::binomial(0.25)], CascadeSpec::lebesgue());
        let a = dim_q(&v, &[2.0], &[6]).unwrap();
        let b = Dim_q(&v, &[2.0], &[6]).unwrap();
        let c = Delta_q(&v, &[2.0], &[6]).unwrap();
        assert_eq!(a.limit, b.limit);
        assert_eq!(b.limit, c.limit);
        assert_eq!(c.kind, DimensionKind::Prepacking);
    }

    #[test]
    fn self_reference_at_q_one_is_zero() {
        let b = CascadeSpec::binomial(0.25);
        let v = vm(&[b.clone(), CascadeSpec::lebesgue()], b);
        let e = dim_q(&v, &[1.0, 0.0], &[5]).unwrap();
        assert_abs_diff_eq!(e.limit, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn cantor_against_its_own_mass() {
        let v = vm(
            &[CascadeSpec::cantor([0.5, 0.5])],
            CascadeSpec::cantor([0.5, 0.5]),
        );
        let e = dim_q(&v, &[0.0], &[6]).unwrap();
        assert_abs_diff_eq!(e.limit, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn saturates_outside_bracket() {
        let v = vm(&[CascadeSpec::lebesgue()], CascadeSpec::lebesgue());
        let cfg = BisectionConfig {
            lo: -1.0,
            hi: 1.0,
            ..Default::default()
        };
        let e = cutoff_t_with(
            &v,
            &[-5.0],
            DimensionKind::Hausdorff,
            &[3],
            Reference::Measure,
            &Region::Support,
            &cfg,
        )
        .unwrap();
        assert_eq!(e.limit, f64::INFINITY);
        assert!(!e.diagnostics.is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        let v = vm(&[CascadeSpec::lebesgue()], CascadeSpec::lebesgue());
        assert!(dim_q(&v, &[1.0, 1.0], &[3]).is_err());
        assert!(dim_q(&v, &[1.0], &[]).is_err());
        assert!(dim_q(&v, &[1.0], &[0]).is_err());
        assert!(legendre_spectrum(&v, &[0.0, 1.0], 0, &[0.0], &[3]).is_err());
        assert!(legendre_spectrum(&v, &[0.0, 2.0, 1.0], 0, &[0.0], &[3]).is_err());
    }

    #[test]
    fn uniform_spectrum_is_flat() {
        let v = vm(&[CascadeSpec::lebesgue()], CascadeSpec::lebesgue());
        let s = legendre_spectrum(&v, &[-1.0, 0.0, 1.0, 2.0], 0, &[0.0], &[6]).unwrap();
        for p in &s.points {
            assert_abs_diff_eq!(p.alpha, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(p.f_alpha, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn growth_rate_on_cylinders() {
        let v = vm(&[CascadeSpec::binomial(0.25)], CascadeSpec::lebesgue());
        let region = Region::Cylinders(vec![vec![0, 1], vec![1, 1, 0]]);
        let t = growth_rate_cutoff(&v, &[2.0], &region, Reference::Measure, 6, 10).unwrap();
        assert_abs_diff_eq!(t, (5.0f64 / 8.0).log2(), epsilon = 1e-9);
    }

    #[test]
    fn slope_of_line() {
        assert_abs_diff_eq!(
            linear_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]),
            2.0,
            epsilon = 1e-15
        );
    }
}
