//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! The design campaigns (criteria 5, 6, 7, 9) are solved once and shared.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::time::Instant;

use hkt_ccd::ccd::{compare_controllers, resimulate, run_ccd, CcdResult, CcdSpec, ComparisonReport, ControlMode};
use hkt_ccd::dynamics::{
    hard_sat, simulate, smoothed_sat, Butterworth2, ControlLaw, FlowProfile, SensorModel, SimulationSettings,
    DEFAULT_SAT_NU,
};
use hkt_ccd::nlp::{check_gradient, SolverSettings};
use hkt_ccd::oloc::{solve_oloc, transcribe, CollocationGrid, GeometryBox, OlocSetup, TranscribedProblem};
use hkt_ccd::rotor::{
    cp_curve, default_tsr_grid, power_coefficient, rotor_inertia, rotor_torque, solve_bem_section, AirfoilPolar,
    BladeGeometry, BladeMaterial, FluidEnvironment, GeometryBounds, Segment, TorqueTable, BETZ_LIMIT,
};
use hkt_ccd::sensitivity::{sensitivity_table, SensitivitySettings, UncertaintyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const U_MAX: f64 = 700.0;
const HORIZON: f64 = 50.0;

type Verdict = Result<(bool, String), String>;

struct Line {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
}

fn run(id: u8, name: &'static str, f: impl FnOnce() -> Verdict) -> Line {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let line = Line { id, name, pass, detail, secs: start.elapsed().as_secs_f64() };
    println!(
        "criterion {:>2} {} {:<32} {} [{:.1} s]",
        line.id,
        if line.pass { "PASS" } else { "FAIL" },
        line.name,
        line.detail,
        line.secs
    );
    line
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn c1_saturation() -> Verdict {
    let n = 700_000;
    let worst = (0..=n)
        .map(|i| {
            let u = U_MAX * i as f64 / n as f64;
            (smoothed_sat(u, U_MAX, DEFAULT_SAT_NU) - hard_sat(u, U_MAX)).abs()
        })
        .fold(0.0, f64::max);
    Ok((worst <= 7.0, format!("max |sat~ - sat| = {worst:.4} N m on [0, 700] (limit 7)")))
}

/// Steady-state output amplitude for a unit sine at `f`, measured over the
/// last ten periods after a long settle.
fn driven_gain(cutoff: f64, fs: f64, f: f64) -> f64 {
    let mut filt = Butterworth2::new(cutoff, fs).unwrap();
    let period = (fs / f).round() as usize;
    let settle = 20 * fs as usize + 20 * period;
    let mut peak: f64 = 0.0;
    for k in 0..settle + 10 * period {
        let y = filt.step((2.0 * PI * f * k as f64 / fs).sin());
        if k >= settle {
            peak = peak.max(y.abs());
        }
    }
    peak
}

fn c2_filter() -> Verdict {
    let s = SensorModel::default();
    let fs = 100.0;
    let filt = Butterworth2::new(s.cutoff_hz, fs).map_err(err)?;
    let dc = filt.gain(0.0, fs);
    let at_cut = filt.gain(0.5, fs);
    let at_5 = filt.gain(5.0, fs);
    let db_5 = -20.0 * at_5.log10();
    let measured_cut = driven_gain(s.cutoff_hz, fs, 0.5);
    let measured_5 = driven_gain(s.cutoff_hz, fs, 5.0);
    let target = std::f64::consts::FRAC_1_SQRT_2;
    let pass = (dc - 1.0).abs() <= 1e-3
        && (at_cut - target).abs() <= 0.01 * target
        && (measured_cut - target).abs() <= 0.01 * target
        && db_5 >= 35.0
        && -20.0 * measured_5.log10() >= 35.0;
    Ok((
        pass,
        format!("DC {dc:.6}, 0.5 Hz {at_cut:.5} (driven {measured_cut:.5}), 5 Hz -{db_5:.1} dB at fs 100 Hz"),
    ))
}

/// Momentum/blade-element residual and section torque, turbine branch.
fn bem_oracle(seg: &Segment, g: &BladeGeometry, polar: &AirfoilPolar, v: f64, w: f64, phi: f64) -> (f64, f64) {
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
    (residual, b * 0.5 * 1000.0 * w2 * seg.chord * ct * seg.r_mid * seg.dr)
}

fn random_geometry(rng: &mut ChaCha8Rng) -> BladeGeometry {
    let base = BladeGeometry::baseline();
    let b = GeometryBounds::default();
    let n = base.num_segments();
    let chords: Vec<f64> = (0..n).map(|_| rng.random_range(b.chord_min..=b.chord_max)).collect();
    let twists: Vec<f64> = (0..n).map(|_| rng.random_range(b.twist_min..=b.twist_max)).collect();
    base.with_design(&chords, &twists)
}

fn c3_bem() -> Verdict {
    let polar = AirfoilPolar::default_section();
    let fluid = FluidEnvironment::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut geometries = vec![BladeGeometry::baseline()];
    geometries.extend((0..10).map(|_| random_geometry(&mut rng)));

    let mut worst_residual: f64 = 0.0;
    for g in &geometries {
        for _ in 0..4 {
            let v = rng.random_range(0.8..2.5);
            let w = rng.random_range(1.0..12.0) * v / g.tip_radius;
            for seg in &g.segments {
                let l = solve_bem_section(seg, &g.constants(), v, w, &polar, &fluid).map_err(err)?;
                worst_residual = worst_residual.max(l.residual.abs());
            }
        }
    }

    let mut max_cp = f64::NEG_INFINITY;
    for g in &geometries {
        for i in 0..=110 {
            max_cp = max_cp.max(power_coefficient(g, &polar, &fluid, 1.0 + 0.1 * i as f64).map_err(err)?);
        }
    }

    let mut worst_scaling: f64 = 0.0;
    for g in &geometries {
        let tsr = rng.random_range(2.0..10.0);
        let q1 = rotor_torque(g, 1.0, tsr / g.tip_radius, &polar, &fluid).map_err(err)?;
        for v in [0.7, 1.5, 2.3] {
            let q = rotor_torque(g, v, tsr * v / g.tip_radius, &polar, &fluid).map_err(err)?;
            worst_scaling = worst_scaling.max((q - v * v * q1).abs() / (v * v * q1).abs());
        }
    }

    // dense phi grid: every sign change of the residual, refined linearly
    let g = BladeGeometry::baseline();
    const N: usize = 1_000_000;
    let lo = 1e-6;
    let step = (FRAC_PI_2 - lo) / N as f64;
    let mut worst_oracle: f64 = 0.0;
    for _ in 0..20 {
        let seg = g.segments[rng.random_range(0..g.num_segments())];
        let v = rng.random_range(1.0..2.0);
        let w = rng.random_range(2.0..10.0) * v / g.tip_radius;
        let loads = solve_bem_section(&seg, &g.constants(), v, w, &polar, &fluid).map_err(err)?;
        let mut best: Option<f64> = None;
        let mut prev = (lo, bem_oracle(&seg, &g, &polar, v, w, lo).0);
        for i in 1..=N {
            let phi = lo + i as f64 * step;
            let r = bem_oracle(&seg, &g, &polar, v, w, phi).0;
            if prev.1.signum() != r.signum() && (r - prev.1).abs() < 1.0 {
                let root = prev.0 + step * prev.1 / (prev.1 - r);
                if best.is_none_or(|b| (root - loads.phi).abs() < (b - loads.phi).abs()) {
                    best = Some(root);
                }
            }
            prev = (phi, r);
        }
        let root = best.ok_or("dense grid found no root")?;
        let dq = bem_oracle(&seg, &g, &polar, v, w, root).1;
        worst_oracle = worst_oracle.max((dq - loads.dq).abs() / loads.dq.abs().max(1e-12));
    }

    let pass = worst_residual < 1e-10 && max_cp <= BETZ_LIMIT && worst_scaling <= 1e-6 && worst_oracle < 5e-5;
    Ok((
        pass,
        format!(
            "residual {worst_residual:.1e}, max Cp {max_cp:.4} (1 <= tsr <= 12), v^2 scaling {worst_scaling:.1e}, dense-phi dQ {worst_oracle:.1e}"
        ),
    ))
}

fn fixed_setup(profile: FlowProfile, u_max: Option<f64>) -> OlocSetup {
    OlocSetup {
        geometry: BladeGeometry::baseline(),
        geometry_box: None,
        polar: AirfoilPolar::default_section(),
        fluid: FluidEnvironment::default(),
        material: BladeMaterial::default(),
        profile,
        grid: CollocationGrid::new(HORIZON, 50).unwrap(),
        u_max,
        initial_omega: None,
    }
}

fn c4_tsr_tracking() -> Verdict {
    let s = fixed_setup(FlowProfile::Constant { speed: 1.5 }, None);
    let curve = cp_curve(&s.geometry, &s.polar, &s.fluid, &default_tsr_grid()).map_err(err)?;
    let r = s.geometry.tip_radius;
    let out = solve_oloc(s, &SolverSettings::default(), None).map_err(err)?;
    let tsr = out.trajectory.tsr(r, |_| 1.5);
    let worst = out
        .trajectory
        .t
        .iter()
        .zip(&tsr)
        .filter(|(t, _)| (0.1 * HORIZON..=0.9 * HORIZON).contains(*t))
        .map(|(_, l)| (l - curve.optimal_tsr).abs() / curve.optimal_tsr)
        .fold(0.0, f64::max);
    Ok((
        worst <= 0.01,
        format!("worst |tsr - {:.4}| / tsr* = {:.2e} over t in [5, 45] s", curve.optimal_tsr, worst),
    ))
}

struct Campaign {
    u_max: Option<f64>,
    report: ComparisonReport,
}

impl Campaign {
    fn solve(u_max: Option<f64>) -> Result<Self, String> {
        let specs: Vec<CcdSpec> = ControlMode::ALL
            .iter()
            .map(|&m| CcdSpec::new(m, FlowProfile::sinusoid_scenario(), HORIZON, u_max))
            .collect();
        let report = compare_controllers(&specs, true).map_err(err)?;
        Ok(Self { u_max, report })
    }

    fn get(&self, label: &str) -> Result<&CcdResult, String> {
        self.report.result(label).ok_or_else(|| {
            let row = self.report.rows.iter().find(|r| r.label == label);
            format!("{label} failed: {:?}", row.and_then(|r| r.error.clone()))
        })
    }

    fn tag(&self) -> String {
        self.u_max.map_or("unconstrained".into(), |u| format!("u_max {u}"))
    }

    fn spec(&self, mode: ControlMode) -> CcdSpec {
        CcdSpec::new(mode, FlowProfile::sinusoid_scenario(), HORIZON, self.u_max)
    }
}

fn c5_ordering(campaigns: &[Campaign]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in campaigns {
        let oloc = c.get("oloc")?;
        let (e0, eq, el) = (oloc.energy, c.get("quadratic")?.energy, c.get("linear")?.energy);
        let ok = oloc.max_violation <= SolverSettings::default().feasibility_tol
            && eq <= e0 * 1.0005
            && el <= eq * 1.0005
            && eq >= 0.995 * e0
            && el >= 0.99 * e0;
        pass &= ok;
        parts.push(format!(
            "{}: OLOC {e0:.0}, quad {eq:.0} ({:.4}), lin {el:.0} ({:.4})",
            c.tag(),
            eq / e0,
            el / e0
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn c6_benefit(campaigns: &[Campaign]) -> Verdict {
    let gain = |c: &Campaign| -> Result<f64, String> {
        Ok(100.0 * (c.get("oloc")?.energy / c.get("baseline_oloc")?.energy - 1.0))
    };
    let unconstrained = gain(&campaigns[0])?;
    let constrained = gain(&campaigns[1])?;
    Ok((
        unconstrained >= 3.0,
        format!("CCD-OLOC over baseline-blade OLOC: {unconstrained:+.3}% unconstrained ({constrained:+.3}% at u_max 700); need >= +3%"),
    ))
}

fn c7_constraint(constrained: &Campaign) -> Verdict {
    let oloc = constrained.get("oloc")?;
    let base = constrained.get("baseline_oloc")?;
    let quad = constrained.get("quadratic")?;
    let lin = constrained.get("linear")?;
    let schedule_max = |r: &CcdResult| match &r.control {
        hkt_ccd::ccd::DesignedControl::Trajectory { schedule, .. } => schedule.u.iter().copied().fold(0.0, f64::max),
        _ => 0.0,
    };
    let open = oloc.trajectory.max_u().max(schedule_max(oloc)).max(base.trajectory.max_u()).max(schedule_max(base));
    let feedback = quad.trajectory.max_u().max(lin.trajectory.max_u());
    Ok((
        open <= U_MAX && feedback <= 707.0,
        format!("max OLOC u {open:.6} N m (<= 700), max feedback u {feedback:.4} N m (<= 707)"),
    ))
}

fn c8_gain() -> Verdict {
    let spec = CcdSpec {
        freeze_geometry: true,
        ..CcdSpec::new(ControlMode::QuadraticFb, FlowProfile::Constant { speed: 1.5 }, HORIZON, None)
    };
    let r = run_ccd(&spec).map_err(err)?;
    let curve = cp_curve(&spec.geometry, &spec.polar, &spec.fluid, &default_tsr_grid()).map_err(err)?;
    let k_star = curve.optimal_quadratic_gain(&spec.geometry, &spec.fluid);
    let k = r.gain().ok_or("no gain")?;
    let rel = (k - k_star).abs() / k_star;
    Ok((rel <= 0.05, format!("K2 {k:.4} vs K* {k_star:.4} ({:.2}% apart, limit 5%)", 100.0 * rel)))
}

fn c9_robustness(constrained: &Campaign) -> Verdict {
    let designs: Vec<(String, CcdResult)> = ["oloc", "quadratic", "linear"]
        .iter()
        .map(|l| constrained.get(l).map(|r| (l.to_string(), r.clone())))
        .collect::<Result<_, _>>()?;
    let base = constrained.spec(ControlMode::Oloc);
    let report = sensitivity_table(&designs, &base, &SensitivitySettings::default()).map_err(err)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in UncertaintyKind::ALL {
        let cell = |name: &str| report.cell(name, kind).ok_or(format!("missing {name} cell"));
        let (q, l, o) = (cell("quadratic")?, cell("linear")?, cell("oloc")?);
        if let Some(e) = q.error.as_ref().or(l.error.as_ref()).or(o.error.as_ref()) {
            return Err(format!("type {}: {e}", kind.label()));
        }
        let qp = q.percent_of_ceiling.ok_or("no quadratic ceiling")?;
        let lp = l.percent_of_ceiling.ok_or("no linear ceiling")?;
        let (qe, le) = (q.energy.unwrap_or(0.0), l.energy.unwrap_or(0.0));
        let mut ok = !q.stalled && !l.stalled && qp >= 98.0 && lp >= 97.5 && qe >= le * (1.0 - 5e-4);
        let oloc_text = if o.stalled { "stall".to_string() } else { format!("{:.2}%", o.percent_of_ceiling.unwrap_or(0.0)) };
        if kind != UncertaintyKind::A {
            ok &= o.stalled || o.energy.unwrap_or(0.0) < qe.min(le);
        }
        pass &= ok;
        parts.push(format!("{}: quad {qp:.2}% lin {lp:.2}% oloc {oloc_text}", kind.label()));
    }
    Ok((pass, parts.join("; ")))
}

/// Seeded point inside the bounds near torque balance.
fn random_point(p: &TranscribedProblem, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = p.layout();
    let g = &p.setup().geometry;
    let w: Vec<f64> = (0..l.n_omega).map(|_| rng.random_range(6.0..9.0)).collect();
    let u: Vec<f64> = (0..l.n_u).map(|_| rng.random_range(250.0..450.0)).collect();
    let c: Vec<f64> = g.chords().iter().map(|c| c * rng.random_range(0.7..1.3)).collect();
    let t: Vec<f64> = g.twists().iter().map(|t| t + rng.random_range(-0.05..0.05)).collect();
    p.encode(&w, &u, &g.with_design(&c, &t)).unwrap()
}

fn c10_hygiene(unconstrained: &Campaign) -> Verdict {
    let mut worst_gradient: f64 = 0.0;
    for (free, u_max) in [(false, None), (true, None), (true, Some(U_MAX))] {
        let mut s = fixed_setup(FlowProfile::sinusoid_scenario(), u_max);
        if free {
            s.geometry_box = Some(GeometryBox::uniform(&GeometryBounds::default(), s.geometry.num_segments()));
        }
        let p = transcribe(s).map_err(err)?;
        for seed in 0..3 {
            worst_gradient = worst_gradient.max(check_gradient(&p, &random_point(&p, seed), 1e-6).map_err(err)?);
        }
    }

    let g = BladeGeometry::baseline();
    let polar = AirfoilPolar::default_section();
    let fluid = FluidEnvironment::default();
    let table = TorqueTable::new(g.clone(), polar.clone(), fluid);
    let k = cp_curve(&g, &polar, &fluid, &default_tsr_grid()).map_err(err)?.optimal_quadratic_gain(&g, &fluid);
    let inertia = rotor_inertia(&g, &BladeMaterial::default());
    let energy = |dt: f64| -> Result<f64, String> {
        let s = SimulationSettings::new(HORIZON, dt, inertia);
        Ok(simulate(&table, &ControlLaw::quadratic(k), &FlowProfile::sinusoid_scenario(), &s, None).map_err(err)?.energy)
    };
    let (e1, e2) = (energy(0.01)?, energy(0.005)?);
    let halving = (e1 - e2).abs() / e2;

    let mut worst_gap: f64 = 0.0;
    for label in ["oloc", "baseline_oloc"] {
        let r = unconstrained.get(label)?;
        let spec = unconstrained.spec(ControlMode::Oloc);
        let replay = resimulate(r, &spec, &spec.profile, spec.dt, None).map_err(err)?;
        worst_gap = worst_gap.max((replay.energy - r.energy).abs() / r.energy);
    }

    Ok((
        worst_gradient < 1e-5 && halving < 1e-6 && worst_gap < 0.01,
        format!("gradient check {worst_gradient:.1e}, RK4 dt-halving {halving:.1e}, collocation vs replay {worst_gap:.2e}"),
    ))
}

fn cli_outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    std::env::set_var("HKT_CCD_OUT", dir);
    let runs: [&[&str]; 4] = [
        &["bem-curve"],
        &["simulate", "--law", "quadratic", "--noise", "--seed", "3"],
        &["ccd", "--freeze-geometry", "--horizon", "20", "--segments", "20"],
        &["ccd", "--mode", "quadratic", "--horizon", "20", "--constraint", "700"],
    ];
    for args in runs {
        let argv = std::iter::once("hkt-ccd").chain(args.iter().copied());
        let code = hkt_ccd_cli::run(argv);
        if code != 0 {
            return Err(format!("{args:?} exited {code}"));
        }
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.join("out"))
        .map_err(err)?
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn c11_determinism() -> Verdict {
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    let fa = cli_outputs(a.path())?;
    let fb = cli_outputs(b.path())?;
    let csv = fa.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    let differing: Vec<&str> =
        fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    Ok((
        fa.len() == fb.len() && differing.is_empty() && csv > 0,
        format!("{} files ({csv} CSV) compared byte for byte, {} differ {:?}", fa.len(), differing.len(), differing),
    ))
}

fn main() {
    let start = Instant::now();
    let mut lines = vec![
        run(1, "smoothed saturation", c1_saturation),
        run(2, "Butterworth sensor filter", c2_filter),
        run(3, "BEM correctness", c3_bem),
        run(4, "optimal-TSR tracking", c4_tsr_tracking),
    ];

    let solved = Instant::now();
    let campaigns = [Campaign::solve(None), Campaign::solve(Some(U_MAX))];
    println!("design campaigns solved in {:.0} s", solved.elapsed().as_secs_f64());
    match campaigns {
        [Ok(free), Ok(limited)] => {
            let both = [free, limited];
            lines.push(run(5, "CCD ordering and closeness", || c5_ordering(&both)));
            lines.push(run(6, "CCD benefit over baseline", || c6_benefit(&both)));
            lines.push(run(7, "constraint satisfaction", || c7_constraint(&both[1])));
            lines.push(run(8, "K w^2 analytic consistency", c8_gain));
            lines.push(run(9, "robustness under inflow error", || c9_robustness(&both[1])));
            lines.push(run(10, "numerical hygiene", || c10_hygiene(&both[0])));
        }
        [a, b] => {
            let why = a.err().or(b.err()).unwrap_or_default();
            for (id, name) in [
                (5, "CCD ordering and closeness"),
                (6, "CCD benefit over baseline"),
                (7, "constraint satisfaction"),
                (9, "robustness under inflow error"),
                (10, "numerical hygiene"),
            ] {
                lines.push(run(id, name, || Err(format!("campaign failed: {why}"))));
            }
            lines.push(run(8, "K w^2 analytic consistency", c8_gain));
        }
    }
    lines.push(run(11, "determinism", c11_determinism));

    lines.sort_by_key(|l| l.id);
    let failed: Vec<u8> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.0} s{}",
        lines.len() - failed.len(),
        lines.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failing: {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
