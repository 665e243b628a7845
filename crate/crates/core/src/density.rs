//! Pointwise `(q,t)`-densities of a measure `θ` relative to `(μ, ν)`, the
//! density-level classification and the two-sided sandwich check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dimension::linear_slope;
use crate::error::{Error, Result};
use crate::kernel::{partition_sum_in, KernelParams, Reference, SumKind};
use crate::measure::{Region, SelfSimilarMeasure, VectorMeasure};

/// Membership band for "density = 1".
pub const DEFAULT_BAND: f64 = 0.05;
/// Depth of the random words used as sample points.
pub const SAMPLE_WORD_DEPTH: usize = 20;
/// Sandwich slack factor.
pub const SANDWICH_SLACK: f64 = 0.05;
/// Largest per-depth drift of `ln S_n` for which the pre-measure is
/// considered converged.
pub const INFORMATIVE_SLOPE: f64 = 1e-3;

/// Anything whose interval masses can be queried.
pub trait IntervalMeasure {
    fn interval_mass(&self, a: f64, b: f64) -> f64;
    /// Mass of the region `E`.
    fn region_mass(&self, region: &Region) -> f64;
}

impl IntervalMeasure for SelfSimilarMeasure {
    fn interval_mass(&self, a: f64, b: f64) -> f64 {
        SelfSimilarMeasure::interval_mass(self, a, b)
    }

    fn region_mass(&self, region: &Region) -> f64 {
        region.total_mass(self)
    }
}

/// The grid pre-measure at depth `N` restricted to `E`:
/// `θ(A) = Σ_{C ⊂ E, |w(C)| = N} Γ^{q,t}(C) · σ(A | C)`, where `σ` is the
/// self-similar measure with weights proportional to `Π_j p_{j,i}^{q_j} w_i^t`.
/// It assigns exactly `Γ^{q,t}(C)` to each depth-`N` cell, and at the cutoff
/// it is the natural probability measure on `E`.
#[derive(Debug, Clone)]
pub struct PreMeasure {
    shape: SelfSimilarMeasure,
    region: Region,
    ln_scale: f64,
    ln_total: f64,
    depth: usize,
}

impl PreMeasure {
    pub fn new(
        vm: &VectorMeasure,
        params: &KernelParams,
        region: &Region,
        depth: usize,
    ) -> Result<PreMeasure> {
        params.validate()?;
        if params.q.len() != vm.k() {
            return Err(Error::InvalidArgument(format!(
                "q has {} entries, vector measure has {} components",
                params.q.len(),
                vm.k()
            )));
        }
        let active = vm.active_digits();
        let logs: Vec<f64> = (0..vm.base_count())
            .map(|i| {
                if !active.contains(&i) {
                    return f64::NEG_INFINITY;
                }
                vm.components()
                    .iter()
                    .zip(&params.q)
                    .map(|(m, q)| q * m.ln_weights()[i])
                    .sum::<f64>()
                    + params.t * vm.reference().ln_weights()[i]
            })
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        let shape = vm
            .geometry()
            .with_weights(raw.iter().map(|w| w / total).collect())?;
        let ln_total = partition_sum_in(
            vm,
            params,
            region,
            depth,
            SumKind::Covering,
            Reference::Measure,
        )?
        .ln_value;
        let shape_mass = region.total_mass(&shape);
        Ok(PreMeasure {
            ln_scale: ln_total - shape_mass.ln(),
            ln_total,
            shape,
            region: region.clone(),
            depth,
        })
    }

    /// `ln θ(E)`, the grid pre-measure `ln S_N(E)`.
    pub fn ln_total(&self) -> f64 {
        self.ln_total
    }

    pub fn shape(&self) -> &SelfSimilarMeasure {
        &self.shape
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}

impl IntervalMeasure for PreMeasure {
    fn interval_mass(&self, a: f64, b: f64) -> f64 {
        self.ln_scale.exp() * self.region.interval_mass(&self.shape, a, b)
    }

    fn region_mass(&self, region: &Region) -> f64 {
        self.ln_scale.exp() * region.total_mass(&self.shape)
    }
}

/// Geometric radii `r_j = r0 · ρ^j`, `j < steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    pub r0: f64,
    pub rho: f64,
    pub steps: usize,
}

impl Default for RadiusSchedule {
    fn default() -> Self {
        RadiusSchedule {
            r0: 0.25,
            rho: 0.5,
            steps: 40,
        }
    }
}

impl RadiusSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0.is_finite()) || !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "radius schedule needs r0 > 0 and 0 < rho < 1, got {} and {}",
                self.r0, self.rho
            )));
        }
        if self.steps < 2 {
            return Err(Error::InvalidArgument(
                "radius schedule needs >= 2 steps".into(),
            ));
        }
        Ok(())
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(move |j| self.r0 * self.rho.powi(j as i32))
    }

    /// Index of the first radius kept for the liminf/limsup.
    pub fn tail_start(&self) -> usize {
        self.steps / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub x: f64,
    pub lower: f64,
    pub upper: f64,
    pub schedule: RadiusSchedule,
    /// `(r, θ(B(x,r)) / Γ^{q,t}(B(x,r)))` for every scheduled radius.
    pub ratio_trace: Vec<(f64, f64)>,
}

/// `ln θ(B) - ln Γ^{q,t}(B)` over the schedule; lower and upper densities are
/// the min and max over its second half.
pub fn density_at<M: IntervalMeasure + ?Sized>(
    x: f64,
    theta: &M,
    vm: &VectorMeasure,
    params: &KernelParams,
    schedule: &RadiusSchedule,
) -> Result<DensityEstimate> {
    params.validate()?;
    schedule.validate()?;
    if params.q.len() != vm.k() {
        return Err(Error::InvalidArgument(format!(
            "q has {} entries, vector measure has {} components",
            params.q.len(),
            vm.k()
        )));
    }
    let mut trace = Vec::with_capacity(schedule.steps);
    for r in schedule.radii() {
        let vanish = |name: String| Error::OutsideSupport {
            x,
            measure: name,
            radius: r,
        };
        let th = theta.interval_mass(x - r, x + r);
        if !(th > 0.0) {
            return Err(vanish("theta".into()));
        }
        let mut ln_gamma = 0.0;
        for (j, (m, q)) in vm.components().iter().zip(&params.q).enumerate() {
            let mass = m.ball_mass(x, r);
            if !(mass > 0.0) {
                return Err(vanish(format!("mu[{j}]")));
            }
            ln_gamma += q * mass.ln();
        }
        let nu = vm.reference().ball_mass(x, r);
        if !(nu > 0.0) {
            return Err(vanish("nu".into()));
        }
        ln_gamma += params.t * nu.ln();
        trace.push((r, (th.ln() - ln_gamma).exp()));
    }
    let tail = &trace[schedule.tail_start()..];
    let lower = tail.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let upper = tail.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(DensityEstimate {
        x,
        lower,
        upper,
        schedule: *schedule,
        ratio_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointClassification {
    pub x: f64,
    /// `D̄` (Hausdorff flavour).
    pub upper_d: f64,
    /// `D̲`.
    pub lower_d: f64,
    /// `Δ̄` (packing flavour).
    pub upper_delta: f64,
    /// `Δ̲`.
    pub lower_delta: f64,
    pub in_k_upper: bool,
    pub in_k_lower: bool,
    pub in_t_upper: bool,
    pub in_t_lower: bool,
}

impl PointClassification {
    pub fn in_k(&self) -> bool {
        self.in_k_upper && self.in_k_lower
    }

    pub fn in_t(&self) -> bool {
        self.in_t_upper && self.in_t_lower
    }

    /// `E_1`: upper and lower Hausdorff-flavour densities agree within the band.
    pub fn in_e1(&self, band: f64) -> bool {
        (self.upper_d - self.lower_d).abs() <= band
    }

    /// `E_2`: same for the packing flavour.
    pub fn in_e2(&self, band: f64) -> bool {
        (self.upper_delta - self.lower_delta).abs() <= band
    }
}

/// Classifies points of `E` by their densities against the grid
/// pre-measures of `E` at parameters `(q, t)`.
#[derive(Debug, Clone)]
pub struct Classifier<'a> {
    vm: &'a VectorMeasure,
    params: KernelParams,
    hausdorff: PreMeasure,
    packing: PreMeasure,
    schedule: RadiusSchedule,
    band: f64,
}

impl<'a> Classifier<'a> {
    pub fn new(
        vm: &'a VectorMeasure,
        params: &KernelParams,
        region: &Region,
        depth: usize,
        schedule: RadiusSchedule,
        band: f64,
    ) -> Result<Self> {
        schedule.validate()?;
        // covering and packing grid sums coincide, so do the two pre-measures
        let hausdorff = PreMeasure::new(vm, params, region, depth)?;
        let packing = hausdorff.clone();
        Ok(Classifier {
            vm,
            params: params.clone(),
            hausdorff,
            packing,
            schedule,
            band,
        })
    }

    pub fn hausdorff_premeasure(&self) -> &PreMeasure {
        &self.hausdorff
    }

    pub fn classify(&self, x: f64) -> Result<PointClassification> {
        let h = density_at(x, &self.hausdorff, self.vm, &self.params, &self.schedule)?;
        let p = density_at(x, &self.packing, self.vm, &self.params, &self.schedule)?;
        let near = |v: f64| (v - 1.0).abs() <= self.band;
        Ok(PointClassification {
            x,
            upper_d: h.upper,
            lower_d: h.lower,
            upper_delta: p.upper,
            lower_delta: p.lower,
            in_k_upper: near(h.upper),
            in_k_lower: near(h.lower),
            in_t_upper: near(p.upper),
            in_t_lower: near(p.lower),
        })
    }
}

pub fn classify_point(
    x: f64,
    region: &Region,
    vm: &VectorMeasure,
    params: &KernelParams,
    depth: usize,
    schedule: RadiusSchedule,
) -> Result<PointClassification> {
    Classifier::new(vm, params, region, depth, schedule, DEFAULT_BAND)?.classify(x)
}

/// Seeded sample of support points inside `region`: a uniformly chosen
/// cylinder extended by random active digits, then the tail fixed point.
pub fn sample_points(
    vm: &VectorMeasure,
    region: &Region,
    count: usize,
    seed: u64,
) -> Result<Vec<(Vec<u8>, f64)>> {
    use rand::Rng;
    region.validate(vm.base_count())?;
    let active = vm.active_digits();
    let prefixes: Vec<Vec<u8>> = region
        .prefixes()
        .into_iter()
        .filter(|p| p.iter().all(|d| active.contains(&(*d as usize))))
        .collect();
    if prefixes.is_empty() {
        return Err(Error::InvalidArgument("region carries no mass".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let mut word = prefixes[rng.gen_range(0..prefixes.len())].clone();
            while word.len() < SAMPLE_WORD_DEPTH {
                word.push(active[rng.gen_range(0..active.len())] as u8);
            }
            let x = vm.point_of_word(&word);
            (word, x)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub q: Vec<f64>,
    pub t: f64,
    pub theta_e: f64,
    /// Grid Hausdorff pre-measure of `E` at the deepest depth.
    pub h_hat: f64,
    /// Grid packing pre-measure (same grid sum).
    pub p_hat: f64,
    pub inf_upper: f64,
    pub sup_upper: f64,
    pub inf_lower: f64,
    pub sup_lower: f64,
    pub hausdorff_holds: bool,
    pub packing_holds: bool,
    /// `false` when `ln S_n` still drifts with depth, i.e. `t` is not the
    /// cutoff and the pre-measure is heading to 0 or infinity.
    pub informative: bool,
    pub premeasure_slope: f64,
    pub slack: f64,
    pub points: usize,
    pub skipped_points: usize,
    pub seed: u64,
}

pub const MIN_SANDWICH_POINTS: usize = 8;

/// `Ĥ·inf d̄ ≤ θ(E) ≤ Ĥ·sup d̄` and the packing analogue with `d̲`, with
/// both constants equal to one.
#[allow(clippy::too_many_arguments)]
pub fn sandwich_check<M: IntervalMeasure + ?Sized>(
    region: &Region,
    params: &KernelParams,
    theta: &M,
    vm: &VectorMeasure,
    sample_count: usize,
    depths: &[usize],
    schedule: &RadiusSchedule,
    seed: u64,
) -> Result<SandwichReport> {
    if sample_count < MIN_SANDWICH_POINTS {
        return Err(Error::InvalidArgument(format!(
            "sandwich check needs at least {MIN_SANDWICH_POINTS} points, got {sample_count}"
        )));
    }
    if depths.is_empty() {
        return Err(Error::InvalidArgument("no depths given".into()));
    }
    let mut depths = depths.to_vec();
    depths.sort_unstable();
    depths.dedup();
    let ln_sums = depths
        .iter()
        .map(|&n| {
            partition_sum_in(vm, params, region, n, SumKind::Covering, Reference::Measure)
                .map(|s| s.ln_value)
        })
        .collect::<Result<Vec<_>>>()?;
    let premeasure_slope = if depths.len() >= 2 {
        let x: Vec<f64> = depths.iter().map(|&n| n as f64).collect();
        linear_slope(&x, &ln_sums)
    } else {
        0.0
    };
    let h_hat = ln_sums.last().unwrap().exp();
    let p_hat = h_hat;

    let mut uppers = Vec::new();
    let mut lowers = Vec::new();
    let mut skipped = 0;
    for (_, x) in sample_points(vm, region, sample_count, seed)? {
        match density_at(x, theta, vm, params, schedule) {
            Ok(d) => {
                uppers.push(d.upper);
                lowers.push(d.lower);
            }
            Err(Error::OutsideSupport { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if uppers.len() < MIN_SANDWICH_POINTS {
        return Err(Error::InvalidArgument(format!(
            "only {} of {sample_count} sample points had positive masses",
            uppers.len()
        )));
    }
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (inf_upper, sup_upper) = (min(&uppers), max(&uppers));
    let (inf_lower, sup_lower) = (min(&lowers), max(&lowers));
    let theta_e = theta.region_mass(region);
    let grow = 1.0 + SANDWICH_SLACK;
    let holds =
        |pre: f64, lo: f64, hi: f64| pre * lo <= theta_e * grow && theta_e <= pre * hi * grow;
    let finite = [h_hat, inf_upper, sup_upper, inf_lower, sup_lower]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
    Ok(SandwichReport {
        q: params.q.clone(),
        t: params.t,
        theta_e,
        h_hat,
        p_hat,
        inf_upper,
        sup_upper,
        inf_lower,
        sup_lower,
        hausdorff_holds: holds(h_hat, inf_upper, sup_upper),
        packing_holds: holds(p_hat, inf_lower, sup_lower),
        informative: finite && premeasure_slope.abs() <= INFORMATIVE_SLOPE,
        premeasure_slope,
        slack: SANDWICH_SLACK,
        points: uppers.len(),
        skipped_points: skipped,
        seed,
    })
}
