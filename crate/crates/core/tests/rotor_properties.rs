use std::f64::consts::{FRAC_PI_2, PI};

use hkt_ccd::rotor::{
    power_coefficient, rotor_torque, solve_bem_section, AirfoilPolar, BladeGeometry, FluidEnvironment,
    GeometryBounds, Segment, BETZ_LIMIT,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Momentum/blade-element residual and section torque written out directly
/// from the Ning formulation (turbine branch only).
fn oracle(seg: &Segment, g: &BladeGeometry, polar: &AirfoilPolar, v: f64, w: f64, phi: f64) -> (f64, f64) {
    let b = g.num_blades as f64;
    let (s, c) = phi.sin_cos();
    let (cl, cd) = polar.interpolate((phi - seg.twist).to_degrees()).unwrap();
    let cn = cl * c + cd * s;
    let ct = cl * s - cd * c;
    let sigma = b * seg.chord / (2.0 * PI * seg.r_mid);
    let prandtl = |x: f64| 2.0 / PI * (-x).exp().acos();
    let f = prandtl(b / 2.0 * (g.tip_radius - seg.r_mid) / (seg.r_mid * s))
        * prandtl(b / 2.0 * (seg.r_mid - g.hub_radius) / (g.hub_radius * s));
    let k = sigma * cn / (4.0 * f * s * s);
    let kp = sigma * ct / (4.0 * f * s * c);
    let a = if k <= 2.0 / 3.0 {
        k / (1.0 + k)
    } else {
        let g1 = 2.0 * f * k - (10.0 / 9.0 - f);
        let g2 = 2.0 * f * k - f * (4.0 / 3.0 - f);
        let g3 = 2.0 * f * k - (25.0 / 9.0 - 2.0 * f);
        (g1 - g2.sqrt()) / g3
    };
    let ap = kp / (1.0 - kp);
    let residual = s / (1.0 - a) - c * (1.0 - kp) * v / (w * seg.r_mid);
    let w2 = (v * (1.0 - a)).powi(2) + (w * seg.r_mid * (1.0 + ap)).powi(2);
    let dq = b * 0.5 * 1000.0 * w2 * seg.chord * ct * seg.r_mid * seg.dr;
    (residual, dq)
}

fn random_geometry(rng: &mut ChaCha8Rng) -> BladeGeometry {
    let base = BladeGeometry::baseline();
    let b = GeometryBounds::default();
    let n = base.num_segments();
    let chords: Vec<f64> = (0..n).map(|_| rng.random_range(b.chord_min..=b.chord_max)).collect();
    let twists: Vec<f64> = (0..n).map(|_| rng.random_range(b.twist_min..=b.twist_max)).collect();
    base.with_design(&chords, &twists)
}

#[test]
fn section_matches_dense_phi_grid() {
    let g = BladeGeometry::baseline();
    let polar = AirfoilPolar::default_section();
    let fluid = FluidEnvironment::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    const N: usize = 1_000_000;
    let lo = 1e-6;
    let step = (FRAC_PI_2 - lo) / N as f64;
    for _ in 0..20 {
        let seg = g.segments[rng.random_range(0..g.num_segments())];
        let v = rng.random_range(1.0..2.0);
        let w = rng.random_range(2.0..10.0) * v / g.tip_radius;
        let loads = solve_bem_section(&seg, &g.constants(), v, w, &polar, &fluid).unwrap();
        // every sign change on the dense grid, refined by linear interpolation
        let mut roots = Vec::new();
        let mut prev = (lo, oracle(&seg, &g, &polar, v, w, lo).0);
        for i in 1..=N {
            let phi = lo + i as f64 * step;
            let r = oracle(&seg, &g, &polar, v, w, phi).0;
            if prev.1.signum() != r.signum() && (r - prev.1).abs() < 1.0 {
                roots.push(prev.0 + step * prev.1 / (prev.1 - r));
            }
            prev = (phi, r);
        }
        let nearest = roots
            .iter()
            .copied()
            .min_by(|a, b| (a - loads.phi).abs().total_cmp(&(b - loads.phi).abs()))
            .expect("dense grid finds a root");
        assert!((nearest - loads.phi).abs() <= step, "phi {} vs grid {}", loads.phi, nearest);
        let dq = oracle(&seg, &g, &polar, v, w, nearest).1;
        let rel = (dq - loads.dq).abs() / loads.dq.abs().max(1e-12);
        assert!(rel < 5e-5, "r={} v={v} w={w}: dq {} vs grid {dq}", seg.r_mid, loads.dq);
    }
}

#[test]
fn section_residuals_are_converged() {
    let polar = AirfoilPolar::default_section();
    let fluid = FluidEnvironment::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let g = random_geometry(&mut rng);
        let v = rng.random_range(0.8..2.5);
        let w = rng.random_range(1.0..12.0) * v / g.tip_radius;
        for seg in &g.segments {
            let l = solve_bem_section(seg, &g.constants(), v, w, &polar, &fluid).unwrap();
            assert!(l.residual.abs() < 1e-10, "{l:?}");
            assert!(l.loss_factor > 0.0 && l.loss_factor <= 1.0);
        }
    }
}

#[test]
fn torque_is_exact_sum_of_sections() {
    let polar = AirfoilPolar::default_section();
    let fluid = FluidEnvironment::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let g = random_geometry(&mut rng);
        let (v, w) = (1.5, rng.random_range(2.0..12.0));
        let sum: f64 = g
            .segments
            .iter()
            .map(|s| solve_bem_section(s, &g.constants(), v, w, &polar, &fluid).unwrap().dq)
            .sum();
        assert_eq!(rotor_torque(&g, v, w, &polar, &fluid).unwrap(), sum);
    }
}

#[test]
fn power_coefficient_below_betz_for_random_designs() {
    let polar = AirfoilPolar::default_section();
    let fluid = FluidEnvironment::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut geometries = vec![BladeGeometry::baseline()];
    geometries.extend((0..15).map(|_| random_geometry(&mut rng)));
    for g in &geometries {
        for i in 0..=110 {
            let tsr = 1.0 + 0.1 * i as f64;
            let cp = power_coefficient(g, &polar, &fluid, tsr).unwrap();
            assert!(cp <= BETZ_LIMIT, "tsr {tsr}: cp {cp}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn torque_scales_with_speed_squared(
        v in 0.8f64..2.5,
        tsr in 1.0f64..12.0,
        k in prop::sample::select(vec![0.5, 2.0]),
        seed in 0u64..1000,
    ) {
        let g = if seed % 4 == 0 { BladeGeometry::baseline() } else { random_geometry(&mut ChaCha8Rng::seed_from_u64(seed)) };
        let polar = AirfoilPolar::default_section();
        let fluid = FluidEnvironment::default();
        let w = tsr * v / g.tip_radius;
        let q = rotor_torque(&g, v, w, &polar, &fluid).unwrap();
        let qk = rotor_torque(&g, k * v, k * w, &polar, &fluid).unwrap();
        prop_assert!((qk - k * k * q).abs() <= 1e-6 * (k * k * q).abs().max(1e-9), "{} vs {}", qk, k * k * q);
    }
}
