//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p clickdyn-cli --test acceptance`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use clickdyn::elliptic::{complete_k, jacobi_sn_cn_dn};
use clickdyn::equilibria::{equilibria_in_period, EquilibriumKind};
use clickdyn::freevib::{
    band_energies, energy_bands, orbit_at_energy, period_of_energy, period_of_orbit, AfBranch, OrbitShape,
};
use clickdyn::hbm::{sweep_hysteresis, FrfProblem, SweepSpec, SweepSystem};
use clickdyn::melnikov::{
    melnikov_numeric, printed_value, reduce, separatrix, threshold_derived, threshold_grid, OrbitSource, PrintedForm,
    ReducedSystem, Reduction, ThresholdMethod,
};
use clickdyn::model::{barrier_energies, moment, potential, stiffness};
use clickdyn::odeint::{
    integrate, largest_lyapunov, measure_free_oscillation, poincare_section, IntegratorSpec, LyapunovSpec,
};
use clickdyn::{Params, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Largest central-difference errors of PEN -> M and M -> K over `n`
/// samples with spring length at least `d_min`.
fn field_errors(seed: u64, n: usize, alpha_max: f64, d_min: f64) -> Result<(f64, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let (mut e_moment, mut e_stiff) = (0.0f64, 0.0f64);
    let mut samples = 0;
    while samples < n {
        let alpha: f64 = rng.gen_range(0.1..alpha_max);
        let beta: f64 = rng.gen_range(0.1..alpha_max);
        let gamma = rng.gen_range(0.0..1.0);
        let theta: f64 = rng.gen_range(-PI..PI);
        let d = (alpha * alpha + beta * beta - 2.0 * alpha * beta * theta.cos()).sqrt();
        if alpha == beta || d < d_min {
            continue;
        }
        samples += 1;
        let p = Params::new(alpha, beta).with_gamma(gamma);
        let d_pen = (potential(&p, theta + h) - potential(&p, theta - h)) / (2.0 * h);
        let d_mom = (moment(&p, theta + h) - moment(&p, theta - h)) / (2.0 * h);
        e_moment = e_moment.max((d_pen - moment(&p, theta)).abs());
        e_stiff = e_stiff.max((d_mom - stiffness(&p, theta).map_err(|e| e.to_string())?).abs());
    }
    Ok((e_moment, e_stiff))
}

fn field_consistency() -> Outcome {
    // the h^2 truncation term of the step-1e-5 stencil exceeds 1e-8 near
    // the alpha = beta cusp, so samples keep D >= 0.4
    let (e_moment, e_stiff) = field_errors(1, 1000, 2.0, 0.4)?;
    let (raw_moment, raw_stiff) = field_errors(1, 1000, 3.0, 0.0)?;
    ensure(e_moment <= 1e-8 && e_stiff <= 1e-8, || {
        format!("max |dPEN - M| = {e_moment:.2e}, max |dM - K| = {e_stiff:.2e} (limit 1e-8)")
    })?;
    Ok(format!(
        "1000 samples (alpha, beta < 2, D >= 0.4), max |dPEN - M| = {e_moment:.2e}, max |dM - K| = {e_stiff:.2e}; \
         unrestricted box (informational): {raw_moment:.2e} / {raw_stiff:.2e}"
    ))
}

fn equilibrium_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 200 {
        let alpha: f64 = rng.gen_range(0.05..3.0);
        let beta = rng.gen_range(0.05..3.0);
        if !((alpha - beta).abs() < 1.0 && 1.0 < alpha + beta) {
            continue;
        }
        n += 1;
        let p = Params::new(alpha, beta);
        let eqs = equilibria_in_period(&p);
        let saddles = eqs.iter().filter(|e| e.kind == EquilibriumKind::Saddle).count();
        let centers = eqs.iter().filter(|e| e.kind == EquilibriumKind::Center).count();
        let inside = eqs.iter().all(|e| e.theta > -PI && e.theta <= PI);
        ensure(eqs.len() == 4 && saddles == 2 && centers == 2 && inside, || {
            format!("alpha = {alpha}, beta = {beta}: {eqs:?}")
        })?;
        let cos3 = (alpha * alpha + beta * beta - 1.0) / (2.0 * alpha * beta);
        for e in eqs.iter().filter(|e| e.kind == EquilibriumKind::Center) {
            worst = worst.max((e.theta.cos() - cos3).abs());
        }
    }
    ensure(worst <= 1e-10, || {
        format!("max |cos theta3 - closed form| = {worst:.2e}")
    })?;
    Ok(format!(
        "200 samples, 4 equilibria each (2 saddles, 2 centers), max |cos theta3 error| = {worst:.2e}"
    ))
}

fn barrier_values() -> Outcome {
    let (pen1, _) = barrier_energies(&Params::new(0.5, 1.0));
    let (_, pen2) = barrier_energies(&Params::new(1.0, 1.0));
    ensure((pen1 - 0.125).abs() <= 1e-15 && (pen2 - 0.5).abs() <= 1e-15, || {
        format!("PEN1 = {pen1:.17}, PEN2 = {pen2:.17}")
    })?;
    Ok(format!("PEN1 = {pen1}, PEN2 = {pen2}"))
}

fn energy_conservation() -> Outcome {
    let p = Params::new(1.5, 1.0);
    let spec = IntegratorSpec::default()
        .with_tolerances(1e-10, 1e-12)
        .with_t_end(100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s0 = State::new(rng.gen_range(-PI..PI), rng.gen_range(-2.0..2.0));
        let traj = integrate(&p, s0, &spec).map_err(|e| e.to_string())?;
        worst = worst.max(traj.energy_drift.unwrap_or(f64::INFINITY));
    }
    ensure(worst <= 1e-8, || format!("max |dH| = {worst:.2e} (limit 1e-8)"))?;
    Ok(format!("50 starts, max |dH| = {worst:.2e}"))
}

fn start_state(p: &Params, h: f64) -> Result<State, String> {
    let orbit = orbit_at_energy(p, h).map_err(|e| e.to_string())?;
    Ok(match orbit.shape {
        OrbitShape::Libration { lo, .. } => State::new(lo, 0.0),
        OrbitShape::Rotation => {
            let top = if potential(p, 0.0) > potential(p, PI) { 0.0 } else { PI };
            State::new(top, (2.0 * (h - potential(p, top)) / p.kappa).sqrt())
        }
    })
}

fn period_agreement() -> Outcome {
    let p = Params::new(1.5, 1.0);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for band in energy_bands(&p) {
        ensure(
            matches!(band.branch, AfBranch::Af3 | AfBranch::Af4 | AfBranch::Af5),
            || format!("unexpected band {:?}", band.branch),
        )?;
        for h in band_energies(&band, 20) {
            let orbit = orbit_at_energy(&p, h).map_err(|e| e.to_string())?;
            let quad = period_of_orbit(&p, &orbit).map_err(|e| e.to_string())?;
            let meas = measure_free_oscillation(&p, start_state(&p, h)?)
                .map_err(|e| e.to_string())?
                .period;
            let rel = (quad - meas).abs() / quad;
            ensure(rel <= 1e-4, || {
                format!("{:?} at H = {h}: quadrature {quad}, integration {meas}", band.branch)
            })?;
            worst = worst.max(rel);
            count += 1;
        }
    }
    let h1 = barrier_energies(&p).0;
    let near = period_of_energy(&p, h1 - 1e-8).map_err(|e| e.to_string())?;
    let far = period_of_energy(&p, h1 - 1e-4).map_err(|e| e.to_string())?;
    ensure(near > far, || format!("T(H1 - 1e-8) = {near} <= T(H1 - 1e-4) = {far}"))?;
    Ok(format!(
        "{count} energies over 3 bands, max rel error = {worst:.2e}; T(H1-1e-8) = {near:.3} > T(H1-1e-4) = {far:.3}"
    ))
}

fn elliptic_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let u = rng.gen_range(-50.0..50.0);
        let k = rng.gen_range(0.0..0.999);
        let (sn, cn, dn) = jacobi_sn_cn_dn(u, k).map_err(|e| e.to_string())?;
        worst = worst
            .max((sn * sn + cn * cn - 1.0).abs())
            .max((dn * dn + k * k * sn * sn - 1.0).abs());
    }
    let k0 = complete_k(0.0).map_err(|e| e.to_string())?;
    ensure(k0 == FRAC_PI_2, || format!("K(0) = {k0:.17}"))?;
    let mut quarter: f64 = 0.0;
    for i in 1..=9 {
        let k = i as f64 / 10.0;
        let (sn, _, _) = jacobi_sn_cn_dn(complete_k(k).map_err(|e| e.to_string())?, k).map_err(|e| e.to_string())?;
        quarter = quarter.max((sn - 1.0).abs());
    }
    ensure(worst <= 1e-12 && quarter <= 1e-12, || {
        format!("identity error {worst:.2e}, |sn(K) - 1| = {quarter:.2e}")
    })?;
    Ok(format!(
        "identity error {worst:.2e} on 1e4 samples; K(0) = pi/2; max |sn(K) - 1| = {quarter:.2e}"
    ))
}

fn hbm_checks() -> Outcome {
    let s_grid: Vec<f64> = (1..=800).map(|i| 2.0 * i as f64 / 800.0).collect();
    let mut linear: f64 = 0.0;
    for (kappa, xi, b) in [(1.0, 0.05, 0.1), (2.0, 0.01, 0.5), (0.5, 0.2, 1.0)] {
        let prob = FrfProblem {
            epsilon: 0.0,
            kappa,
            xi,
            b,
        };
        for &s in &s_grid {
            let roots = prob.amplitudes(s);
            ensure(roots.len() == 1, || {
                format!("linear problem has {} roots at s = {s}", roots.len())
            })?;
            let exact = b / ((1.0 - kappa * s * s).powi(2) + (2.0 * xi * s).powi(2)).sqrt();
            linear = linear.max((roots[0].amplitude - exact).abs());
        }
    }
    let (mut res, mut pair) = (0.0f64, 0.0f64);
    let mut bands = Vec::new();
    for prob in [
        FrfProblem {
            epsilon: -0.48024,
            kappa: 1.0,
            xi: 0.01,
            b: 0.01,
        },
        FrfProblem {
            epsilon: -0.93787,
            kappa: 2.0,
            xi: 0.02,
            b: 0.01,
        },
        FrfProblem {
            epsilon: 0.5,
            kappa: 1.0,
            xi: 0.02,
            b: 0.1,
        },
    ] {
        for &s in &s_grid {
            let roots = prob.amplitudes(s);
            for r in &roots {
                res = res.max(prob.residual(s, r.amplitude).abs());
                let (a, b) = prob.balance_residuals(s, r);
                pair = pair.max(a.abs()).max(b.abs());
            }
        }
        if prob.epsilon < 0.0 {
            // contiguous three-root run closest below resonance
            let edge = 1.0 / prob.kappa.sqrt();
            let run: Vec<f64> = s_grid
                .iter()
                .rev()
                .copied()
                .skip_while(|&s| s >= edge || prob.amplitudes(s).len() != 3)
                .take_while(|&s| prob.amplitudes(s).len() == 3)
                .collect();
            match (run.last(), run.first()) {
                (Some(&lo), Some(&hi)) => bands.push(format!("kappa {}: [{lo:.4}, {hi:.4}]", prob.kappa)),
                _ => return Err(format!("no three-root band below resonance for {prob:?}")),
            }
        }
    }
    ensure(linear <= 1e-12, || format!("linear FRF error {linear:.2e}"))?;
    ensure(res <= 1e-10 && pair <= 1e-8, || {
        format!("amplitude residual {res:.2e}, balance residual {pair:.2e}")
    })?;
    Ok(format!(
        "linear error {linear:.2e}; residuals {res:.2e} / {pair:.2e}; three-root bands below resonance {}",
        bands.join(", ")
    ))
}

fn jump_hysteresis() -> Outcome {
    let prob = FrfProblem {
        epsilon: -0.48024,
        kappa: 1.0,
        xi: 0.01,
        b: 0.01,
    };
    let spec = SweepSpec {
        s_lo: 0.92,
        s_hi: 1.0,
        n_steps: 41,
        ..SweepSpec::default()
    };
    let step = (spec.s_hi - spec.s_lo) / (spec.n_steps - 1) as f64;
    let folds = prob.folds(spec.s_lo, spec.s_hi, 4000);
    ensure(folds.len() == 2, || format!("expected two folds, got {folds:?}"))?;
    let h = sweep_hysteresis(&SweepSystem::Cubic(prob), &spec).map_err(|e| e.to_string())?;
    let (up, down) = match (h.up_jumps.as_slice(), h.down_jumps.as_slice()) {
        ([u], [d]) => (*u, *d),
        _ => {
            return Err(format!(
                "expected one jump per direction: up {:?}, down {:?}",
                h.up_jumps, h.down_jumps
            ))
        }
    };
    let within = |j: &clickdyn::hbm::Jump, f: f64| {
        let (lo, hi) = (j.s_from.min(j.s_to), j.s_from.max(j.s_to));
        f >= lo - step && f <= hi + step
    };
    ensure(up.s_from != down.s_from, || "up and down jumps coincide".into())?;
    ensure(within(&up, folds[1]) && within(&down, folds[0]), || {
        format!(
            "jumps up {:?}, down {:?} vs folds {folds:?}",
            (up.s_from, up.s_to),
            (down.s_from, down.s_to)
        )
    })?;
    Ok(format!(
        "up jump {:.3}->{:.3} at fold {:.5}, down jump {:.3}->{:.3} at fold {:.5} (grid step {step})",
        up.s_from, up.s_to, folds[1], down.s_from, down.s_to, folds[0]
    ))
}

fn unit_pendulum() -> ReducedSystem {
    ReducedSystem {
        variant: Reduction::Pendulum,
        coefficient: 1.0,
        kappa: 1.0,
        xi0: 0.1,
        m_big0: 0.0,
        omega_big0: 1.0,
        origin: PI,
        source_theta3: None,
    }
}

fn melnikov_checks() -> Outcome {
    let omegas: Vec<f64> = (0..=56).map(|i| 0.2 + 2.8 * i as f64 / 56.0).collect();
    let xis = [0.1, 0.4];
    let pendulum = unit_pendulum();
    let orbit = separatrix(&pendulum, OrbitSource::ClosedForm).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for &w in &omegas {
        let m = melnikov_numeric(&orbit, w).map_err(|e| e.to_string())?;
        // transform of 2 sech T at frequency w is 2π sech(πw/2)
        let kernel = 2.0 * PI / (PI * w / 2.0).cosh();
        for &xi in &xis {
            let closed = xi * 16.0 / kernel;
            worst = worst.max((m.threshold(xi) - closed).abs() / closed);
            worst = worst.max((threshold_derived(&pendulum, xi, w) - closed).abs() / closed);
        }
    }
    ensure(worst <= 0.02, || format!("pendulum threshold error {worst:.2e}"))?;

    let systems = [
        reduce(&Params::new(1.5, 1.0), Reduction::DuffingDoubleWell),
        reduce(&Params::new(1.5, 1.0), Reduction::Pendulum),
        reduce(&Params::new(0.3, 0.4), Reduction::SoftCubic),
    ];
    let mut linear: f64 = 0.0;
    let mut report = Vec::new();
    for sys in systems {
        let sys = sys.map_err(|e| e.to_string())?;
        let orbit = separatrix(&sys, OrbitSource::ClosedForm).map_err(|e| e.to_string())?;
        let form = PrintedForm::for_variant(sys.variant);
        for method in [
            ThresholdMethod::Numeric,
            ThresholdMethod::Derived,
            ThresholdMethod::Printed(form),
        ] {
            let g = threshold_grid(&sys, &orbit, &omegas, &xis, method).map_err(|e| e.to_string())?;
            for (a, b) in g.m0_crit[0].iter().zip(&g.m0_crit[1]) {
                if a.is_finite() {
                    linear = linear.max((b / a - 4.0).abs() / 4.0);
                }
            }
        }
        let mut disagree: f64 = 0.0;
        for &w in &omegas {
            let num = melnikov_numeric(&orbit, w).map_err(|e| e.to_string())?.threshold(0.1);
            if let Some(v) = printed_value(form, &sys, 0.1, w) {
                disagree = disagree.max((v - num).abs() / num);
            }
        }
        report.push(format!(
            "{} vs {} numeric: max rel disagreement {disagree:.3}",
            form.as_str(),
            sys.variant.as_str()
        ));
    }
    ensure(linear <= 1e-12, || format!("threshold not linear in xi0: {linear:.2e}"))?;
    Ok(format!(
        "pendulum error {worst:.2e}; linearity {linear:.1e}; printed forms (reported only): {}",
        report.join("; ")
    ))
}

fn chaos_indication() -> Outcome {
    let xi = 0.08;
    let w = 0.8;
    let base = Params::new(1.5, 1.0).with_damping(xi);
    let sys = reduce(&base.with_forcing(1.0, w), Reduction::DuffingDoubleWell).map_err(|e| e.to_string())?;
    let orbit = separatrix(&sys, OrbitSource::ClosedForm).map_err(|e| e.to_string())?;
    let crit = melnikov_numeric(&orbit, w).map_err(|e| e.to_string())?.threshold(xi);
    let s0 = State::new(0.72, 0.0);
    let probe = |factor: f64| -> Result<(f64, usize, usize), String> {
        let p = base.with_forcing(factor * crit, w);
        let ly = largest_lyapunov(&p, s0, &LyapunovSpec::default(), State::new(1.0, 1.0)).map_err(|e| e.to_string())?;
        let map = poincare_section(&p, s0, 300, 200).map_err(|e| e.to_string())?;
        Ok((ly.mean, map.cluster_count(1e-6), map.cluster_count(1e-3)))
    };
    let (l_hi, distinct_hi, _) = probe(1.5)?;
    let (l_lo, _, clusters_lo) = probe(0.2)?;
    ensure(l_hi > 0.01 && distinct_hi > 100, || {
        format!("at 1.5x: exponent {l_hi:.4}, {distinct_hi} distinct points")
    })?;
    ensure(l_lo <= 0.01 && clusters_lo <= 2, || {
        format!("at 0.2x: exponent {l_lo:.4}, {clusters_lo} clusters")
    })?;
    Ok(format!(
        "alpha 1.5, beta 1, xi 0.08, Omega0 0.8, M0c = {crit:.5}: 1.5x -> exponent {l_hi:.4}, {distinct_hi} distinct points; 0.2x -> exponent {l_lo:.4}, {clusters_lo} cluster(s)"
    ))
}

const DETERMINISM_RUNS: &[(&str, &[&str])] = &[
    ("energy", &["--alpha", "1.5", "--set", "energy.alphas=[0.5,1.5]"]),
    ("moment", &["--alpha", "1.5"]),
    (
        "phase-portrait",
        &[
            "--alpha",
            "0.5",
            "--set",
            "phase-portrait.n_theta=101",
            "--set",
            "phase-portrait.n_omega=101",
        ],
    ),
    ("equilibria", &["--alpha", "1.5"]),
    ("stiffness", &["--alpha", "1.5"]),
    (
        "bifurcation-set",
        &["--alpha", "1.5", "--set", "bifurcation-set.n_beta=20"],
    ),
    (
        "freevib",
        &[
            "--alpha",
            "1.5",
            "--set",
            "freevib.n=10",
            "--set",
            "freevib.waveforms=[\"cn\"]",
        ],
    ),
    ("hbm", &["--alpha", "1.5", "--xi", "0.01", "--m0", "0.01"]),
    (
        "melnikov",
        &[
            "--alpha",
            "1.5",
            "--set",
            "melnikov.n_omega=8",
            "--set",
            "melnikov.orbit=\"continued\"",
        ],
    ),
    ("simulate", &["--alpha", "1.5", "--set", "simulate.t_end=20"]),
    (
        "sweep",
        &[
            "--alpha",
            "1.5",
            "--set",
            "sweep.system=\"cubic\"",
            "--set",
            "sweep.epsilon=-0.48",
            "--set",
            "sweep.zeta=0.01",
            "--set",
            "sweep.b=0.01",
            "--set",
            "sweep.s_min=0.93",
            "--set",
            "sweep.s_max=0.99",
            "--set",
            "sweep.n_steps=7",
        ],
    ),
    (
        "lyapunov",
        &[
            "--alpha",
            "1.5",
            "--xi",
            "0.08",
            "--m0",
            "0.1",
            "--omega0",
            "0.8",
            "--set",
            "lyapunov.horizon=200",
            "--set",
            "lyapunov.n_starts=3",
            "--seed",
            "7",
        ],
    ),
    (
        "poincare",
        &[
            "--alpha",
            "1.5",
            "--xi",
            "0.08",
            "--m0",
            "0.1",
            "--omega0",
            "0.8",
            "--set",
            "poincare.n_points=50",
        ],
    ),
];

fn run_cli(cmd: &str, args: &[&str], out: &Path, jobs: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_clickdyn"))
        .arg(cmd)
        .args(args)
        .arg("--out")
        .arg(out)
        .args(["--jobs", jobs])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr).trim())
    })
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.map_err(|e| e.to_string())?;
            let bytes = std::fs::read(e.path()).map_err(|e| e.to_string())?;
            Ok((e.file_name().to_string_lossy().into_owned(), bytes))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (cmd, args) in DETERMINISM_RUNS {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        run_cli(cmd, args, &a, "1")?;
        run_cli(cmd, args, &b, "4")?;
        let (fa, fb) = (read_dir_sorted(&a)?, read_dir_sorted(&b)?);
        ensure(!fa.is_empty() && fa == fb, || {
            format!("{cmd}: outputs differ between runs")
        })?;
        files += fa.len();
    }
    Ok(format!(
        "{} subcommands run twice (--jobs 1 and 4), {files} files byte-identical",
        DETERMINISM_RUNS.len()
    ))
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "field consistency",
            budget: Duration::from_secs(1),
            run: field_consistency,
        },
        Criterion {
            id: 2,
            name: "equilibrium structure",
            budget: Duration::from_secs(1),
            run: equilibrium_structure,
        },
        Criterion {
            id: 3,
            name: "barrier values",
            budget: Duration::from_secs(1),
            run: barrier_values,
        },
        Criterion {
            id: 4,
            name: "energy conservation",
            budget: Duration::from_secs(10),
            run: energy_conservation,
        },
        Criterion {
            id: 5,
            name: "period agreement",
            budget: Duration::from_secs(30),
            run: period_agreement,
        },
        Criterion {
            id: 6,
            name: "elliptic identities",
            budget: Duration::from_secs(1),
            run: elliptic_identities,
        },
        Criterion {
            id: 7,
            name: "harmonic balance",
            budget: Duration::from_secs(5),
            run: hbm_checks,
        },
        Criterion {
            id: 8,
            name: "jump hysteresis",
            budget: Duration::from_secs(300),
            run: jump_hysteresis,
        },
        Criterion {
            id: 9,
            name: "melnikov thresholds",
            budget: Duration::from_secs(60),
            run: melnikov_checks,
        },
        Criterion {
            id: 10,
            name: "chaos indication",
            budget: Duration::from_secs(300),
            run: chaos_indication,
        },
        Criterion {
            id: 11,
            name: "determinism",
            budget: Duration::from_secs(300),
            run: determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > c.budget => Err(format!("{msg}; runtime {took:.2?} over budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS {:>2} {}: {msg} [{took:.2?}]", c.id, c.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {}: {msg} [{took:.2?}]", c.id, c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
