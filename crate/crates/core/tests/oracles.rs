//! Library results against values computed here by separate means.

use approx::assert_abs_diff_eq;
use mmfa::density::{density_at, RadiusSchedule};
use mmfa::dimension::{cutoff_t, cutoff_t_with, legendre_spectrum, BisectionConfig, DimensionKind};
use mmfa::kernel::{gamma, partition_sum, KernelParams, Reference, SumKind};
use mmfa::measure::{CascadeSpec, Region, VectorMeasure};
use mmfa::regularity::{doubling_constant, is_doubling, quasi_ahlfors_index, AhlforsVerdict};
use mmfa::theorems::{verify_billingsley, BillingsleyMode, Verdict};

fn binomial_vs_lebesgue() -> VectorMeasure {
    VectorMeasure::from_specs(&[CascadeSpec::binomial(0.25)], &CascadeSpec::lebesgue()).unwrap()
}

/// All depth-`n` binary words as weight products, enumerated by bit masks.
fn binary_cells(p: [f64; 2], n: usize) -> Vec<f64> {
    (0u32..1 << n)
        .map(|w| (0..n).map(|k| p[((w >> k) & 1) as usize]).product())
        .collect()
}

#[test]
fn binomial_cdf_at_one_third() {
    // 1/3 = 0.010101... in binary: sum the cells left of the point digit by digit
    let p = [0.25, 0.75];
    let mut left = 0.0;
    let mut prefix = 1.0;
    for k in 0..40 {
        let digit = k % 2;
        if digit == 1 {
            left += prefix * p[0];
        }
        prefix *= p[digit];
    }
    let m = CascadeSpec::binomial(0.25).build().unwrap();
    assert_abs_diff_eq!(left, 1.0 / 13.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.cdf(1.0 / 3.0), left, epsilon = 1e-12);
}

#[test]
fn kernel_direct_product() {
    let g = gamma(
        &KernelParams::new(vec![2.0, -1.0], 0.5).unwrap(),
        &[0.2, 0.4],
        0.09,
    )
    .unwrap();
    assert_abs_diff_eq!(g.value, 0.2f64 * 0.2 / 0.4 * 0.3, epsilon = 1e-15);
}

#[test]
fn binomial_second_moment_by_enumeration() {
    let brute: f64 = binary_cells([0.25, 0.75], 3).iter().map(|m| m * m).sum();
    assert_abs_diff_eq!(brute, 0.244140625, epsilon = 1e-15);
    let s = partition_sum(
        &binomial_vs_lebesgue(),
        &KernelParams::new(vec![2.0], 0.0).unwrap(),
        3,
        SumKind::Covering,
    )
    .unwrap();
    assert_abs_diff_eq!(s.value(), brute, epsilon = 1e-14);
}

#[test]
fn cutoff_by_brute_force_bisection() {
    let n = 12;
    let cells = binary_cells([0.25, 0.75], n);
    let ln_cell = -(n as f64) * 2f64.ln();
    let sum = |t: f64| {
        cells
            .iter()
            .map(|m| m * m * (t * ln_cell).exp())
            .sum::<f64>()
    };
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let brute = 0.5 * (lo + hi);
    let est = cutoff_t(
        &binomial_vs_lebesgue(),
        &[2.0],
        DimensionKind::Hausdorff,
        &[n],
    )
    .unwrap();
    assert_abs_diff_eq!(brute, (5.0f64 / 8.0).log2(), epsilon = 1e-9);
    assert_abs_diff_eq!(est.limit, brute, epsilon = 1e-9);
}

#[test]
fn two_components_depth_one() {
    let vm = VectorMeasure::from_specs(
        &[
            CascadeSpec::binomial(0.25),
            CascadeSpec::binomial(1.0 / 3.0),
        ],
        &CascadeSpec::lebesgue(),
    )
    .unwrap();
    let s = partition_sum(
        &vm,
        &KernelParams::new(vec![1.0, 1.0], 0.0).unwrap(),
        1,
        SumKind::Covering,
    )
    .unwrap();
    assert_abs_diff_eq!(s.value(), 1.0 / 12.0 + 0.5, epsilon = 1e-15);
}

#[test]
fn uniform_three_cutoffs() {
    let vm =
        VectorMeasure::from_specs(&[CascadeSpec::lebesgue()], &CascadeSpec::lebesgue()).unwrap();
    for q in [-3.0, -0.5, 0.0, 2.0, 5.0] {
        for kind in [
            DimensionKind::Hausdorff,
            DimensionKind::Packing,
            DimensionKind::Prepacking,
        ] {
            let est = cutoff_t(&vm, &[q], kind, &[3, 6, 9]).unwrap();
            assert_abs_diff_eq!(est.limit, 1.0 - q, epsilon = 1e-9);
        }
    }
}

#[test]
fn cantor_zero_moment_against_measure_and_diameter() {
    let vm = VectorMeasure::from_specs(
        &[CascadeSpec::cantor([0.25, 0.75])],
        &CascadeSpec::cantor([0.5, 0.5]),
    )
    .unwrap();
    let against_nu = cutoff_t(&vm, &[0.0], DimensionKind::Hausdorff, &[4, 8]).unwrap();
    assert_abs_diff_eq!(against_nu.limit, 1.0, epsilon = 1e-9);
    let against_diam = cutoff_t_with(
        &vm,
        &[0.0],
        DimensionKind::Hausdorff,
        &[4, 8],
        Reference::Diameter,
        &Region::Support,
        &BisectionConfig::default(),
    )
    .unwrap();
    assert_abs_diff_eq!(against_diam.limit, 2f64.ln() / 3f64.ln(), epsilon = 1e-9);

    let r = verify_billingsley(&vm, &[vec![0.0]], &[4, 8], BillingsleyMode::Equality).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert_abs_diff_eq!(r.quantities["q0.dim_mu_nu"], 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(
        r.quantities["q0.dim_mu"],
        2f64.ln() / 3f64.ln(),
        epsilon = 1e-9
    );
}

#[test]
fn legendre_slopes_of_the_binomial() {
    let p: [f64; 2] = [0.25, 0.75];
    let entropy = -p.iter().map(|x| x * x.log2()).sum::<f64>();
    let mean_info = -p.iter().map(|x| x.log2()).sum::<f64>() / 2.0;
    let grid: Vec<f64> = (-2..=2).map(|i| 1.0 + i as f64 * 0.005).collect();
    let s = legendre_spectrum(&binomial_vs_lebesgue(), &grid, 0, &[0.0], &[6]).unwrap();
    assert_abs_diff_eq!(s.points[2].alpha, entropy, epsilon = 1e-4);
    // at q = 1, tau = 0 so f = alpha
    assert_abs_diff_eq!(s.points[2].f_alpha, entropy, epsilon = 1e-4);

    let grid: Vec<f64> = (-2..=2).map(|i| i as f64 * 0.005).collect();
    let s = legendre_spectrum(&binomial_vs_lebesgue(), &grid, 0, &[0.0], &[6]).unwrap();
    assert_abs_diff_eq!(s.points[2].alpha, mean_info, epsilon = 1e-4);
    assert_abs_diff_eq!(s.points[2].f_alpha, 1.0, epsilon = 1e-9);

    let wide =
        legendre_spectrum(&binomial_vs_lebesgue(), &[-2.0, 0.0, 2.0], 0, &[0.0], &[6]).unwrap();
    assert!(wide.points[0].alpha > wide.points[1].alpha);
    assert!(wide.points[1].alpha > wide.points[2].alpha);
}

#[test]
fn quasi_ahlfors_reference_cases() {
    let depths: Vec<usize> = (1..=16).collect();
    let leb = quasi_ahlfors_index(&CascadeSpec::lebesgue().build().unwrap(), &depths).unwrap();
    assert_abs_diff_eq!(leb.alpha_hat, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(leb.m_hat, 1.0, epsilon = 1e-9);
    assert_eq!(leb.verdict, AhlforsVerdict::ExactAhlfors);

    let cantor =
        quasi_ahlfors_index(&CascadeSpec::cantor([0.5, 0.5]).build().unwrap(), &depths).unwrap();
    assert_abs_diff_eq!(cantor.alpha_hat, 2f64.ln() / 3f64.ln(), epsilon = 1e-12);
    assert_eq!(cantor.verdict, AhlforsVerdict::ExactAhlfors);

    let binom =
        quasi_ahlfors_index(&CascadeSpec::binomial(0.25).build().unwrap(), &depths).unwrap();
    assert_abs_diff_eq!(binom.alpha_hat, (4.0f64 / 3.0).log2(), epsilon = 1e-12);
    assert!(binom
        .scan
        .per_depth
        .iter()
        .all(|&(_, max, _)| max <= 1.0 + 1e-12));
}

#[test]
fn doubling_reference_cases() {
    let depths: Vec<usize> = (4..=12).collect();
    let leb = CascadeSpec::lebesgue().build().unwrap();
    let r2 = doubling_constant(&leb, 2.0, &depths, 128, 1).unwrap();
    assert_abs_diff_eq!(r2.p_a_hat, 2.0, epsilon = 1e-9);
    let cantor = CascadeSpec::cantor([0.3, 0.7]).build().unwrap();
    let c2 = doubling_constant(&cantor, 2.0, &depths, 128, 1).unwrap();
    let c_small = doubling_constant(&cantor, 1.01, &depths, 128, 1).unwrap();
    assert!(c_small.p_a_hat <= c2.p_a_hat);
    assert!(c2.is_finite());

    let vm = VectorMeasure::from_specs(
        &[CascadeSpec::cantor([0.3, 0.7])],
        &CascadeSpec::cantor([0.5, 0.5]),
    )
    .unwrap();
    let v = is_doubling(&vm, 2.0, &depths, 128, 1).unwrap();
    assert_eq!(v.components[0], c2);
    assert_eq!(v.product_p_a, c2.p_a_hat);
}

#[test]
fn lebesgue_density_against_binomial_at_zero_moment() {
    let vm = binomial_vs_lebesgue();
    let theta = CascadeSpec::lebesgue().build().unwrap();
    let params = KernelParams::new(vec![0.0], 1.0).unwrap();
    let schedule = RadiusSchedule {
        r0: 0.5,
        rho: 0.5,
        steps: 30,
    };
    let d = density_at(0.5, &theta, &vm, &params, &schedule).unwrap();
    for (r, ratio) in &d.ratio_trace {
        assert!(*r <= 0.5);
        assert_abs_diff_eq!(*ratio, 1.0, epsilon = 1e-12);
    }
}
