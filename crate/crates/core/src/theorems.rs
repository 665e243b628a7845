//! End-to-end numerical checks: the density sandwich, the dimension of the
//! density level sets and the Billingsley-type relations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::density::{
    sample_points, sandwich_check, Classifier, IntervalMeasure, RadiusSchedule, SandwichReport,
    DEFAULT_BAND,
};
use crate::dimension::{cutoff_t_with, dim_q, growth_rate_cutoff, BisectionConfig, DimensionKind};
use crate::error::{Error, Result};
use crate::kernel::{KernelParams, Reference};
use crate::measure::{Region, VectorMeasure};
use crate::regularity::{is_doubling, quasi_ahlfors_index, AhlforsVerdict};

pub const BILLINGSLEY_TOL: f64 = 1e-6;
pub const CLASSIFIED_FRACTION: f64 = 0.95;
pub const REESTIMATE_TOL: f64 = 0.02;
const DOUBLING_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NonInformative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem_id: String,
    pub inputs: String,
    pub quantities: BTreeMap<String, f64>,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
}

impl TheoremReport {
    fn new(id: &str, inputs: String, tolerance: f64, seed: Option<u64>) -> Self {
        TheoremReport {
            theorem_id: id.into(),
            inputs,
            quantities: BTreeMap::new(),
            verdict: Verdict::Pass,
            tolerance,
            seed,
            notes: Vec::new(),
        }
    }

    fn set(&mut self, key: impl Into<String>, v: f64) {
        self.quantities.insert(key.into(), v);
    }
}

fn describe(vm: &VectorMeasure) -> String {
    let w = |m: &crate::measure::SelfSimilarMeasure| format!("{:?}", m.weights());
    format!(
        "ratios={:?} offsets={:?} mu={} nu={}",
        vm.geometry().ratios(),
        vm.geometry().offsets(),
        vm.components().iter().map(w).collect::<Vec<_>>().join(","),
        w(vm.reference())
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BillingsleyMode {
    /// Equality when `ν` is exactly Ahlfors, the two-sided bound otherwise.
    #[default]
    Auto,
    Equality,
    Inequality,
}

/// Compares `dim_μ^q` (diameter kernel) with `α · dim_{μ,ν}^q`.
///
/// Equality mode checks `|dim_μ^q − α dim_{μ,ν}^q| ≤ 1e-6`; inequality mode
/// checks `(dim_μ^q)_− ≤ α dim_{μ,ν}^q ≤ (dim_μ^q)_+` with
/// `(x)_+ = max(x, 0)`, `(x)_− = min(x, 0)`.
pub fn verify_billingsley(
    vm: &VectorMeasure,
    q_grid: &[Vec<f64>],
    depths: &[usize],
    mode: BillingsleyMode,
) -> Result<TheoremReport> {
    if q_grid.is_empty() {
        return Err(Error::InvalidArgument("empty q grid".into()));
    }
    let reg = quasi_ahlfors_index(vm.reference(), depths)?;
    let exact = reg.verdict == AhlforsVerdict::ExactAhlfors;
    let equality = match mode {
        BillingsleyMode::Equality if !exact => {
            return Err(Error::Config(format!(
                "equality mode needs an exactly Ahlfors reference measure; scan verdict is {:?}",
                reg.verdict
            )))
        }
        BillingsleyMode::Equality => true,
        BillingsleyMode::Inequality => false,
        BillingsleyMode::Auto => exact,
    };
    let alpha = reg.alpha_hat;
    let mut report = TheoremReport::new("billingsley", describe(vm), BILLINGSLEY_TOL, None);
    report
        .notes
        .push("(dim)_+ is read as max(dim, 0) and (dim)_- as min(dim, 0)".into());
    report.notes.push(format!(
        "reference regularity {:?}, mode {}",
        reg.verdict,
        if equality { "equality" } else { "inequality" }
    ));
    report.set("alpha", alpha);
    report.set("M", reg.m_hat);
    let cfg = BisectionConfig::default();
    let mut ok = true;
    for (i, q) in q_grid.iter().enumerate() {
        let dim_mu = cutoff_t_with(
            vm,
            q,
            DimensionKind::Hausdorff,
            depths,
            Reference::Diameter,
            &Region::Support,
            &cfg,
        )?
        .limit;
        let dim_mu_nu = dim_q(vm, q, depths)?.limit;
        let scaled = alpha * dim_mu_nu;
        report.set(format!("q{i}.q0"), q[0]);
        report.set(format!("q{i}.dim_mu"), dim_mu);
        report.set(format!("q{i}.dim_mu_nu"), dim_mu_nu);
        report.set(format!("q{i}.alpha_dim_mu_nu"), scaled);
        let pass = if equality {
            let gap = (dim_mu - scaled).abs();
            report.set(format!("q{i}.gap"), gap);
            gap <= BILLINGSLEY_TOL
        } else {
            let (lhs, rhs) = (dim_mu.min(0.0), dim_mu.max(0.0));
            report.set(format!("q{i}.lhs"), lhs);
            report.set(format!("q{i}.rhs"), rhs);
            lhs - BILLINGSLEY_TOL <= scaled && scaled <= rhs + BILLINGSLEY_TOL
        };
        if !pass {
            report.notes.push(format!("relation fails at q = {q:?}"));
        }
        ok &= pass;
    }
    report.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    Ok(report)
}

/// Samples support points, classifies them against the grid pre-measure at
/// `(q, t)` (`t` defaults to the cutoff) and re-estimates the dimension of
/// the cells covering the classified points.
pub fn verify_dimension_of_density_sets(
    vm: &VectorMeasure,
    q: &[f64],
    t: Option<f64>,
    depths: &[usize],
    samples: usize,
    schedule: RadiusSchedule,
    seed: u64,
) -> Result<TheoremReport> {
    let deepest = *depths
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidArgument("no depths given".into()))?;
    if deepest < 4 {
        return Err(Error::InvalidArgument(format!(
            "density-set check needs a depth of at least 4, got {deepest}"
        )));
    }
    let cutoff = dim_q(vm, q, depths)?.limit;
    let t = t.unwrap_or(cutoff);
    let params = KernelParams::new(q.to_vec(), t)?;
    let mut report = TheoremReport::new("density-sets", describe(vm), REESTIMATE_TOL, Some(seed));
    report.set("t", t);
    report.set("cutoff", cutoff);

    let doubling = is_doubling(vm, 2.0, depths, DOUBLING_SAMPLES, seed)?;
    report.set("product_p_2", doubling.product_p_a);
    report.set("reference_p_2", doubling.reference.p_a_hat);

    let classifier = Classifier::new(
        vm,
        &params,
        &Region::Support,
        deepest,
        schedule,
        DEFAULT_BAND,
    )?;
    let mut k_upper = Vec::new();
    let mut t_lower = Vec::new();
    let (mut n_k, mut n_t, mut n_e1, mut n_e2, mut evaluated) = (0usize, 0usize, 0, 0, 0usize);
    for (word, x) in sample_points(vm, &Region::Support, samples, seed)? {
        let c = match classifier.classify(x) {
            Ok(c) => c,
            Err(Error::OutsideSupport { .. }) => continue,
            Err(e) => return Err(e),
        };
        evaluated += 1;
        if c.in_k_upper {
            k_upper.push(word.clone());
        }
        if c.in_t_lower {
            t_lower.push(word);
        }
        n_k += c.in_k() as usize;
        n_t += c.in_t() as usize;
        n_e1 += c.in_e1(DEFAULT_BAND) as usize;
        n_e2 += c.in_e2(DEFAULT_BAND) as usize;
    }
    let frac = |n: usize| {
        if evaluated == 0 {
            0.0
        } else {
            n as f64 / evaluated as f64
        }
    };
    report.set("points", evaluated as f64);
    report.set("fraction_k_upper", frac(k_upper.len()));
    report.set("fraction_t_lower", frac(t_lower.len()));
    report.set("fraction_k", frac(n_k));
    report.set("fraction_t", frac(n_t));
    report.set("fraction_e1", frac(n_e1));
    report.set("fraction_e2", frac(n_e2));

    if k_upper.is_empty() || t_lower.is_empty() {
        report.verdict = Verdict::NonInformative;
        report
            .notes
            .push("no sampled point has density 1 at this t".into());
        return Ok(report);
    }
    if !doubling.in_pd {
        report
            .notes
            .push("doubling hypothesis not met empirically".into());
    }

    let cover_depth = deepest / 2;
    let n1 = cover_depth + 1;
    let reestimate = |words: &[Vec<u8>]| -> Result<f64> {
        let mut cyl: Vec<Vec<u8>> = words.iter().map(|w| w[..cover_depth].to_vec()).collect();
        cyl.sort();
        cyl.dedup();
        growth_rate_cutoff(
            vm,
            q,
            &Region::Cylinders(cyl),
            Reference::Measure,
            n1,
            deepest,
        )
    };
    let dim_k = reestimate(&k_upper)?;
    let dim_t = reestimate(&t_lower)?;
    report.set("dim_k_upper", dim_k);
    report.set("dim_t_lower", dim_t);

    let pass = frac(k_upper.len()) >= CLASSIFIED_FRACTION
        && frac(t_lower.len()) >= CLASSIFIED_FRACTION
        && (dim_k - t).abs() <= REESTIMATE_TOL
        && (dim_t - t).abs() <= REESTIMATE_TOL;
    report.verdict = if pass { Verdict::Pass } else { Verdict::Fail };
    Ok(report)
}

/// Wraps [`sandwich_check`] as a theorem report.
#[allow(clippy::too_many_arguments)]
pub fn verify_sandwich<M: IntervalMeasure + ?Sized>(
    vm: &VectorMeasure,
    region: &Region,
    params: &KernelParams,
    theta: &M,
    samples: usize,
    depths: &[usize],
    schedule: &RadiusSchedule,
    seed: u64,
) -> Result<(TheoremReport, SandwichReport)> {
    let s = sandwich_check(region, params, theta, vm, samples, depths, schedule, seed)?;
    let mut report = TheoremReport::new("sandwich", describe(vm), s.slack, Some(seed));
    report.set("theta_e", s.theta_e);
    report.set("h_hat", s.h_hat);
    report.set("p_hat", s.p_hat);
    report.set("h_inf_upper", s.h_hat * s.inf_upper);
    report.set("h_sup_upper", s.h_hat * s.sup_upper);
    report.set("p_inf_lower", s.p_hat * s.inf_lower);
    report.set("p_sup_lower", s.p_hat * s.sup_lower);
    report.set("premeasure_slope", s.premeasure_slope);
    report.notes.push("constants C1 = C2 = 1".into());
    report.verdict = if !s.informative {
        report
            .notes
            .push("pre-measure still drifts with depth: t is not the cutoff".into());
        Verdict::NonInformative
    } else if s.hausdorff_holds && s.packing_holds {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok((report, s))
}
