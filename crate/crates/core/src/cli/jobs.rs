use serde::Serialize;

use super::config::{JobConfig, JobKind};
use super::output::{Field, Table, Writer};
use crate::density::{
    sample_points, Classifier, IntervalMeasure, PreMeasure, SandwichReport, DEFAULT_BAND,
    MIN_SANDWICH_POINTS,
};
use crate::dimension::{
    cutoff_t_with, legendre_spectrum, BisectionConfig, DimensionEstimate, DimensionKind,
};
use crate::error::{Error, Result};
use crate::kernel::{KernelParams, Reference};
use crate::measure::{Region, VectorMeasure};
use crate::regularity::{is_doubling, quasi_ahlfors_index, RegularityReport, VectorDoublingReport};
use crate::theorems::{
    verify_billingsley, verify_dimension_of_density_sets, verify_sandwich, TheoremReport, Verdict,
};

/// Runs the configured job; returns `true` when a verification failed.
pub(super) fn dispatch(cfg: &JobConfig, out: &mut Writer) -> Result<bool> {
    let vm = cfg.build_vector()?;
    match cfg.job.kind {
        JobKind::Spectrum => spectrum(cfg, &vm, out).map(|_| false),
        JobKind::Density => density(cfg, &vm, out).map(|_| false),
        JobKind::Regularity => regularity(cfg, &vm, out).map(|_| false),
        JobKind::Verify => verify(cfg, &vm, out),
    }
}

fn q_columns(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("q{j}")).collect()
}

fn region_cutoff(cfg: &JobConfig, vm: &VectorMeasure, q: &[f64]) -> Result<DimensionEstimate> {
    cutoff_t_with(
        vm,
        q,
        DimensionKind::Hausdorff,
        &cfg.depths(),
        Reference::Measure,
        &cfg.region(),
        &BisectionConfig::default(),
    )
}

fn spectrum(cfg: &JobConfig, vm: &VectorMeasure, out: &mut Writer) -> Result<()> {
    let job = &cfg.job;
    let depths = cfg.depths();
    let frozen = job.frozen.clone().unwrap_or_else(|| vec![0.0; vm.k()]);
    let spec = legendre_spectrum(vm, &job.q_grid, job.axis, &frozen, &depths)?;

    let mut table = Table::new(&["q", "tau", "alpha", "f_alpha"]);
    for p in &spec.points {
        table.push(vec![
            Field::Num(p.q),
            Field::Num(p.tau),
            Field::Num(p.alpha),
            Field::Num(p.f_alpha),
        ]);
    }
    out.table("spectrum", &table)?;

    let kinds = job
        .kinds
        .clone()
        .unwrap_or_else(|| vec![DimensionKind::Hausdorff]);
    let mut cols = q_columns(vm.k());
    cols.extend(
        ["kind", "depth", "root", "residual", "oracle", "abs_err"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut roots = Table::new(&cols);
    for &qv in &job.q_grid {
        let mut q = frozen.clone();
        q[job.axis] = qv;
        for &kind in &kinds {
            let est = if kind == DimensionKind::Hausdorff {
                spec.estimates.iter().find(|e| e.q == q).cloned()
            } else {
                None
            };
            let est = match est {
                Some(e) => e,
                None => match cutoff_t_with(
                    vm,
                    &q,
                    kind,
                    &depths,
                    Reference::Measure,
                    &Region::Support,
                    &BisectionConfig::default(),
                ) {
                    Ok(e) => e,
                    Err(Error::InvalidArgument(_)) | Err(Error::Contract(_)) => continue,
                    Err(e) => return Err(e),
                },
            };
            let oracle = est.oracle.unwrap_or(f64::NAN);
            for r in &est.per_depth_roots {
                let mut row: Vec<Field> = q.iter().map(|v| Field::Num(*v)).collect();
                row.push(Field::Text(kind.as_str().into()));
                row.push(Field::Int(r.depth as i64));
                row.push(Field::Num(r.root));
                row.push(Field::Num(r.residual));
                row.push(Field::Num(oracle));
                row.push(Field::Num((r.root - oracle).abs()));
                roots.push(row);
            }
        }
    }
    out.table("roots", &roots)
}

#[derive(Serialize)]
struct DensitySummary {
    q: Vec<f64>,
    t: f64,
    cutoff: Option<DimensionEstimate>,
    theta: String,
    points: usize,
    skipped_points: Vec<(f64, String)>,
    sandwich: SandwichReport,
}

fn density(cfg: &JobConfig, vm: &VectorMeasure, out: &mut Writer) -> Result<()> {
    let job = &cfg.job;
    let q = cfg.q(vm.k());
    let region = cfg.region();
    let (t, cutoff) = match job.t {
        Some(t) => (t, None),
        None => {
            let est = region_cutoff(cfg, vm, &q)?;
            (est.limit, Some(est))
        }
    };
    let params = KernelParams::new(q.clone(), t)?;
    let depths = cfg.depths();
    let band = job.band.unwrap_or(DEFAULT_BAND);
    let classifier = Classifier::new(vm, &params, &region, cfg.deepest(), cfg.schedule(), band)?;

    let named = match &job.theta {
        Some(name) => Some(cfg.measures[name].build()?),
        None => None,
    };
    let theta: &dyn IntervalMeasure = match &named {
        Some(m) => m,
        None => classifier.hausdorff_premeasure(),
    };

    let mut xs: Vec<f64> = sample_points(vm, &region, job.samples, cfg.seed)?
        .into_iter()
        .map(|(_, x)| x)
        .collect();
    xs.extend(job.points.iter().copied());

    let mut cols = vec!["x".to_string()];
    cols.extend(q_columns(vm.k()));
    cols.extend(
        ["t", "lower", "upper", "in_K", "in_T"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut table = Table::new(&cols);
    let mut skipped = Vec::new();
    for &x in &xs {
        let d = match crate::density::density_at(x, theta, vm, &params, &cfg.schedule()) {
            Ok(d) => d,
            Err(e @ Error::OutsideSupport { .. }) => {
                skipped.push((x, e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let near = |v: f64| (v - 1.0).abs() <= band;
        let mut row = vec![Field::Num(x)];
        row.extend(q.iter().map(|v| Field::Num(*v)));
        row.push(Field::Num(t));
        row.push(Field::Num(d.lower));
        row.push(Field::Num(d.upper));
        row.push(Field::Bool(near(d.upper)));
        row.push(Field::Bool(near(d.lower)));
        table.push(row);
    }
    out.table("density", &table)?;

    let sandwich = crate::density::sandwich_check(
        &region,
        &params,
        theta,
        vm,
        job.samples.max(MIN_SANDWICH_POINTS),
        &depths,
        &cfg.schedule(),
        cfg.seed,
    )?;
    let summary = DensitySummary {
        q,
        t,
        cutoff,
        theta: job.theta.clone().unwrap_or_else(|| "premeasure".into()),
        points: table.rows.len(),
        skipped_points: skipped,
        sandwich,
    };
    out.summary("sandwich", &summary)
}

#[derive(Serialize)]
struct RegularitySummary {
    measures: Vec<(String, RegularityReport)>,
    doubling: VectorDoublingReport,
}

fn regularity(cfg: &JobConfig, vm: &VectorMeasure, out: &mut Writer) -> Result<()> {
    let depths = cfg.depths();
    let doubling = is_doubling(vm, cfg.job.a, &depths, cfg.job.samples, cfg.seed)?;
    let names: Vec<String> = cfg
        .vector
        .components
        .iter()
        .cloned()
        .chain(std::iter::once(cfg.vector.reference.clone()))
        .collect();
    let measures = vm
        .components()
        .iter()
        .chain(std::iter::once(vm.reference()));
    let dreports = doubling
        .components
        .iter()
        .chain(std::iter::once(&doubling.reference));

    let mut table = Table::new(&[
        "measure",
        "role",
        "depth",
        "alpha_hat",
        "scan_max",
        "scan_min",
        "doubling_sup",
    ]);
    let mut reports = Vec::new();
    for (j, ((name, m), dr)) in names.iter().zip(measures).zip(dreports).enumerate() {
        let role = if j < vm.k() {
            format!("mu{j}")
        } else {
            "nu".into()
        };
        let reg = quasi_ahlfors_index(m, &depths)?;
        for &(depth, max, min) in &reg.scan.per_depth {
            let sup = dr
                .per_depth_sup
                .iter()
                .find(|(d, _)| *d == depth)
                .map_or(f64::NAN, |(_, s)| *s);
            table.push(vec![
                Field::Text(name.clone()),
                Field::Text(role.clone()),
                Field::Int(depth as i64),
                Field::Num(reg.alpha_hat),
                Field::Num(max),
                Field::Num(min),
                Field::Num(sup),
            ]);
        }
        reports.push((name.clone(), reg));
    }
    out.table("regularity", &table)?;
    out.summary(
        "regularity",
        &RegularitySummary {
            measures: reports,
            doubling,
        },
    )
}

#[derive(Serialize)]
struct VerifySummary {
    billingsley: TheoremReport,
    density_sets: TheoremReport,
    sandwich: TheoremReport,
    sandwich_detail: SandwichReport,
}

fn verify(cfg: &JobConfig, vm: &VectorMeasure, out: &mut Writer) -> Result<bool> {
    let job = &cfg.job;
    let depths = cfg.depths();
    let grid: Vec<Vec<f64>> = job.q_grid.iter().map(|q| vec![*q]).collect();
    let billingsley = verify_billingsley(vm, &grid, &depths, job.billingsley_mode)?;

    let q = job.q.clone().unwrap_or_else(|| grid[0].clone());
    let density_sets = verify_dimension_of_density_sets(
        vm,
        &q,
        job.t,
        &depths,
        job.samples,
        cfg.schedule(),
        cfg.seed,
    )?;

    let region = cfg.region();
    let t = match job.t {
        Some(t) => t,
        None => region_cutoff(cfg, vm, &q)?.limit,
    };
    let params = KernelParams::new(q, t)?;
    let theta = PreMeasure::new(vm, &params, &region, cfg.deepest())?;
    let (sandwich, sandwich_detail) = verify_sandwich(
        vm,
        &region,
        &params,
        &theta,
        job.samples,
        &depths,
        &cfg.schedule(),
        cfg.seed,
    )?;

    let failed = [&billingsley, &density_sets, &sandwich]
        .iter()
        .any(|r| r.verdict == Verdict::Fail);
    out.summary(
        "verify",
        &VerifySummary {
            billingsley,
            density_sets,
            sandwich,
            sandwich_detail,
        },
    )?;
    Ok(failed)
}
