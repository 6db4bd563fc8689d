//! Subcommand dispatch: each command turns a resolved configuration into a
//! set of in-memory datasets.

use std::f64::consts::PI;

use clickdyn::elliptic::WaveformKind;
use clickdyn::equilibria::{
    bifurcation_set, classify_region, equilibria_in_period, stiffness_at_poles, zero_stiffness_set, BifurcationVariant,
    Branch, EquilibriumKind, Linspace,
};
use clickdyn::freevib::{amplitude_frequency_curve, elliptic_approximation, energy_bands, AfBranch};
use clickdyn::hbm::{backbone, fit_cubic, frf_scan, sweep_hysteresis, CubicApprox, FrfProblem, SweepSpec, SweepSystem};
use clickdyn::melnikov::{
    reduce, separatrix, threshold_closed_form, threshold_grid, OrbitSource, PrintedForm, Reduction, ThresholdMethod,
};
use clickdyn::model::{
    barrier_energies, damping_factor, hamiltonian, moment, potential, radicand, stiffness, wrap_angle,
};
use clickdyn::odeint::{integrate, largest_lyapunov, poincare_section, IntegratorSpec, LyapunovSpec};
use clickdyn::{Params, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{CurveSection, RunConfig};
use crate::contour::Grid;
use crate::dataset::{Cell, ColumnType, Dataset, Output};
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Command {
    Energy,
    Moment,
    PhasePortrait,
    Equilibria,
    Stiffness,
    BifurcationSet,
    Freevib,
    Hbm,
    Melnikov,
    Simulate,
    Sweep,
    Lyapunov,
    Poincare,
}

impl Command {
    pub const ALL: [Command; 13] = [
        Self::Energy,
        Self::Moment,
        Self::PhasePortrait,
        Self::Equilibria,
        Self::Stiffness,
        Self::BifurcationSet,
        Self::Freevib,
        Self::Hbm,
        Self::Melnikov,
        Self::Simulate,
        Self::Sweep,
        Self::Lyapunov,
        Self::Poincare,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Energy => "energy",
            Self::Moment => "moment",
            Self::PhasePortrait => "phase-portrait",
            Self::Equilibria => "equilibria",
            Self::Stiffness => "stiffness",
            Self::BifurcationSet => "bifurcation-set",
            Self::Freevib => "freevib",
            Self::Hbm => "hbm",
            Self::Melnikov => "melnikov",
            Self::Simulate => "simulate",
            Self::Sweep => "sweep",
            Self::Lyapunov => "lyapunov",
            Self::Poincare => "poincare",
        }
    }
}

/// A failed command, possibly with the output computed before the failure.
#[derive(Debug)]
pub struct Failure {
    pub error: CliError,
    pub partial: Option<Output>,
}

impl From<CliError> for Failure {
    fn from(error: CliError) -> Self {
        Self { error, partial: None }
    }
}

impl From<clickdyn::Error> for Failure {
    fn from(e: clickdyn::Error) -> Self {
        CliError::from(e).into()
    }
}

pub fn compute(cmd: Command, cfg: &RunConfig) -> Result<Output, Failure> {
    match cmd {
        Command::Energy => theta_curves(
            cfg,
            &cfg.energy,
            "energy",
            &["theta", "spring_length", "potential"],
            |p, t| vec![t, radicand(p, t).sqrt(), potential(p, t)],
        ),
        Command::Moment => theta_curves(cfg, &cfg.moment, "moment", &["theta", "moment"], |p, t| {
            vec![t, moment(p, t)]
        }),
        Command::Stiffness => theta_curves(
            cfg,
            &cfg.stiffness,
            "stiffness",
            &["theta", "stiffness", "damping_factor"],
            |p, t| vec![t, stiffness(p, t).unwrap_or(f64::NAN), damping_factor(p, t)],
        ),
        Command::PhasePortrait => phase_portrait(cfg),
        Command::Equilibria => equilibria(cfg),
        Command::BifurcationSet => bifurcation(cfg),
        Command::Freevib => freevib(cfg),
        Command::Hbm => hbm(cfg),
        Command::Melnikov => melnikov(cfg),
        Command::Simulate => simulate(cfg),
        Command::Sweep => sweep(cfg),
        Command::Lyapunov => lyapunov(cfg),
        Command::Poincare => poincare(cfg),
    }
}

fn bad(field: &str, reason: &str) -> CliError {
    CliError::Config(format!("invalid value for `{field}`: {reason}"))
}

fn grid(field: &str, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if n < 2 {
        return Err(bad(field, "grid needs at least 2 points"));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(bad(field, "grid bounds must be finite with max > min"));
    }
    Ok(Linspace::new(lo, hi, n).values())
}

fn file_name(stem: &str, index: usize, total: usize) -> String {
    if total == 1 {
        format!("{stem}.csv")
    } else {
        format!("{stem}_{index:02}.csv")
    }
}

fn theta_curves(
    cfg: &RunConfig,
    sec: &CurveSection,
    stem: &str,
    columns: &[&str],
    row: impl Fn(&Params, f64) -> Vec<f64> + Sync,
) -> Result<Output, Failure> {
    let base = cfg.params()?;
    let thetas = grid("theta_min", sec.theta_min, sec.theta_max, sec.n)?;
    let alphas = if sec.alphas.is_empty() {
        vec![base.alpha]
    } else {
        sec.alphas.clone()
    };
    let sets = alphas
        .par_iter()
        .enumerate()
        .map(|(i, &alpha)| -> Result<Dataset, CliError> {
            let p = Params { alpha, ..base };
            p.validate()?;
            let mut d = Dataset::floats(file_name(stem, i, alphas.len()), columns).with_meta("alpha", alpha);
            for &t in &thetas {
                d.push_floats(&row(&p, t));
            }
            Ok(d)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Output::default();
    for d in sets {
        out.add(d);
    }
    Ok(out)
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    v
}

/// Barrier energies and levels between and around them.
fn auto_levels(p: &Params) -> (Vec<f64>, Vec<f64>) {
    let (b0, bpi) = barrier_energies(p);
    let seps = distinct(vec![b0, bpi]);
    let floor = equilibria_in_period(p)
        .iter()
        .filter(|e| e.kind == EquilibriumKind::Center)
        .map(|e| potential(p, e.theta))
        .fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 0.0 };
    let low = seps[0];
    let top = *seps.last().unwrap();
    let mut levels: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|f| floor + f * (low - floor)).collect();
    if seps.len() == 2 {
        levels.push(0.5 * (seps[0] + seps[1]));
    }
    levels.push(top + 0.5 * (top - floor));
    levels.extend(&seps);
    (distinct(levels), seps)
}

fn phase_portrait(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.params()?;
    let sec = &cfg.phase_portrait;
    let xs = grid("theta_min", sec.theta_min, sec.theta_max, sec.n_theta)?;
    let ys = grid("omega_min", sec.omega_min, sec.omega_max, sec.n_omega)?;
    let values: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&t| ys.iter().map(|&w| hamiltonian(&p, State::new(t, w))).collect())
        .collect();
    let (auto, seps) = auto_levels(&p);
    let levels = if sec.levels.is_empty() {
        auto
    } else {
        sec.levels.clone()
    };
    let g = Grid {
        xs: &xs,
        ys: &ys,
        values: &values,
    };
    let mut out = Output::default();
    let sets: Vec<Dataset> = levels
        .par_iter()
        .enumerate()
        .map(|(i, &level)| {
            let lines = g.level_set(level);
            let is_sep = seps.iter().any(|s| (s - level).abs() <= 1e-12 * s.abs().max(1.0));
            let mut d = Dataset::new(
                format!("contour_{i:02}.csv"),
                &[
                    ("polyline", ColumnType::Int),
                    ("theta", ColumnType::F64),
                    ("omega", ColumnType::F64),
                ],
            )
            .with_meta("level", level)
            .with_meta("separatrix", is_sep)
            .with_meta("polylines", lines.len())
            .with_meta("closed", lines.iter().filter(|l| l.closed).count());
            for (k, line) in lines.iter().enumerate() {
                for (t, w) in &line.points {
                    d.push(vec![k.into(), (*t).into(), (*w).into()]);
                }
            }
            d
        })
        .collect();
    for d in sets {
        out.add(d);
    }
    out.result("separatrix_levels", &seps);
    out.result("levels", &levels);
    Ok(out)
}

fn equilibria(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.params()?;
    let mut d = Dataset::new(
        "equilibria.csv",
        &[
            ("theta", ColumnType::F64),
            ("stiffness", ColumnType::F64),
            ("kind", ColumnType::Str),
            ("branch", ColumnType::Str),
            ("lambda_re", ColumnType::F64),
            ("lambda_im", ColumnType::F64),
        ],
    );
    for e in equilibria_in_period(&p) {
        let (re, im) = e.eigenvalues.map_or((f64::NAN, f64::NAN), |l| (l[0].re, l[0].im));
        d.push(vec![
            e.theta.into(),
            e.k_local.into(),
            e.kind.as_str().into(),
            e.branch.as_str().into(),
            re.into(),
            im.into(),
        ]);
    }
    let mut out = Output::default();
    out.result("region", classify_region(&p).as_str());
    out.add(d);
    Ok(out)
}

fn bifurcation(cfg: &RunConfig) -> Result<Output, Failure> {
    let sec = &cfg.bifurcation_set;
    grid("alpha_min", sec.alpha_min, sec.alpha_max, sec.n_alpha)?;
    grid("beta_min", sec.beta_min, sec.beta_max, sec.n_beta)?;
    if !(cfg.gamma >= 0.0 && cfg.beta > 0.0) {
        return Err(bad("gamma", "requires gamma >= 0 and beta > 0").into());
    }
    let alpha = Linspace::new(sec.alpha_min, sec.alpha_max, sec.n_alpha);
    let beta = Linspace::new(sec.beta_min, sec.beta_max, sec.n_beta);
    let mut out = Output::default();
    for (variant, name) in [(BifurcationVariant::B1, "b1.csv"), (BifurcationVariant::B2, "b2.csv")] {
        let curve = bifurcation_set(variant, cfg.gamma, alpha, beta)?;
        let mut d = Dataset::floats(name, &["alpha", "beta"]).with_meta("gamma", cfg.gamma);
        for s in &curve.samples {
            d.push_floats(&[s.alpha, s.beta]);
        }
        out.add(d);
    }
    let zero = zero_stiffness_set(cfg.beta, cfg.gamma, alpha, sec.theta_cells);
    let mut d = Dataset::floats("b0.csv", &["alpha", "theta"])
        .with_meta("beta", cfg.beta)
        .with_meta("gamma", cfg.gamma);
    for s in &zero.samples {
        d.push_floats(&[s.alpha, s.theta.unwrap_or(f64::NAN)]);
    }
    out.add(d);
    Ok(out)
}

fn waveform_kind(s: &str) -> Result<WaveformKind, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "sn" => Ok(WaveformKind::Sn),
        "cn" => Ok(WaveformKind::Cn),
        "dn" => Ok(WaveformKind::Dn),
        _ => Err(bad(
            "waveforms",
            &format!("unknown waveform `{s}` (expected sn, cn or dn)"),
        )),
    }
}

fn opt(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

fn freevib(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.params()?;
    let sec = &cfg.freevib;
    if sec.n < 2 {
        return Err(bad("n", "needs at least 2 samples").into());
    }
    let branches: Vec<AfBranch> = if sec.branches.is_empty() {
        energy_bands(&p).iter().map(|b| b.branch).collect()
    } else {
        sec.branches
            .iter()
            .map(|b| b.parse::<AfBranch>())
            .collect::<Result<_, _>>()?
    };
    let kinds: Vec<WaveformKind> = sec
        .waveforms
        .iter()
        .map(|w| waveform_kind(w))
        .collect::<Result<_, _>>()?;
    let curves = branches
        .par_iter()
        .map(|&b| amplitude_frequency_curve(&p, b, sec.n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Output::default();
    for c in curves {
        let mut d = Dataset::floats(
            format!("freevib_{}.csv", c.branch.as_str().to_ascii_lowercase()),
            &["energy", "theta_ini", "theta_fin", "amplitude", "period", "frequency"],
        )
        .with_meta("branch", c.branch.as_str());
        if let Some(diag) = &c.diagnostic {
            d = d.with_meta("diagnostic", diag);
        }
        for pt in &c.points {
            d.push_floats(&[
                pt.energy,
                opt(pt.theta_ini),
                opt(pt.theta_fin),
                pt.amplitude,
                pt.period,
                pt.frequency,
            ]);
        }
        out.add(d);
    }
    for kind in kinds {
        let r = elliptic_approximation(&p, kind, sec.waveform_theta0, sec.waveform_samples)?;
        let mut d = Dataset::floats(format!("waveform_{}.csv", kind.as_str()), &["t", "theta"])
            .with_meta("energy", r.energy)
            .with_meta("modulus", r.modulus)
            .with_meta("max_deviation", r.max_deviation)
            .with_meta("rejection", &r.rejection);
        if let Some(w) = r.waveform {
            let n = sec.waveform_samples.max(2);
            for i in 0..=n {
                let t = w.period() * i as f64 / n as f64;
                d.push_floats(&[t, w.eval(t)]);
            }
        }
        out.add(d);
    }
    Ok(out)
}

/// Center the cubic fit expands about.
fn fit_center(p: &Params, center: &str) -> Result<CubicApprox, CliError> {
    let eqs = equilibria_in_period(p);
    let pick = |b: Branch| eqs.iter().find(|e| e.branch == b);
    let eq = match center {
        "auto" => pick(Branch::Theta3).or_else(|| eqs.iter().find(|e| e.kind == EquilibriumKind::Center)),
        "interior" => pick(Branch::Theta3),
        "zero" => pick(Branch::Theta1),
        "pi" => pick(Branch::Theta2),
        other => {
            return Err(bad(
                "center",
                &format!("unknown center `{other}` (expected auto, interior, zero or pi)"),
            ))
        }
    };
    let eq = eq.ok_or_else(|| CliError::Config(format!("no equilibrium of type `{center}` for these parameters")))?;
    Ok(fit_cubic(p, eq)?)
}

/// The normalized problem, fitted unless `epsilon` is given.
fn frf_setup(
    p: &Params,
    center: &str,
    epsilon: Option<f64>,
    zeta: Option<f64>,
    b: Option<f64>,
) -> Result<(CubicApprox, FrfProblem), CliError> {
    let (cubic, mut problem) = match epsilon {
        Some(eps) => {
            let cubic = CubicApprox {
                omega_n: 1.0,
                epsilon: eps,
                origin_theta: 0.0,
            };
            let prob = FrfProblem {
                epsilon: eps,
                kappa: p.kappa,
                xi: p.xi,
                b: p.m_big0,
            };
            (cubic, prob)
        }
        None => {
            let cubic = fit_center(p, center)?;
            (cubic, cubic.frf_problem(p))
        }
    };
    if let Some(z) = zeta {
        problem.xi = z;
    }
    if let Some(b) = b {
        problem.b = b;
    }
    problem.validate()?;
    Ok((cubic, problem))
}

fn hbm(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.params()?;
    let sec = &cfg.hbm;
    let (cubic, problem) = frf_setup(&p, &sec.center, sec.epsilon, sec.zeta, sec.b)?;
    if !(sec.s_min > 0.0) {
        return Err(bad("s_min", "frequency ratios must be > 0").into());
    }
    let s = grid("s_min", sec.s_min, sec.s_max, sec.n)?;
    let branch = frf_scan(&problem, &s)?;
    let mut frf = Dataset::new(
        "frf.csv",
        &[
            ("s", ColumnType::F64),
            ("root", ColumnType::Int),
            ("amplitude", ColumnType::F64),
            ("phase", ColumnType::F64),
        ],
    );
    let mut three: Option<(f64, f64)> = None;
    let mut max_roots = 0;
    for (s, roots) in branch.s_values.iter().zip(&branch.roots) {
        max_roots = max_roots.max(roots.len());
        if roots.len() == 3 {
            three = Some(three.map_or((*s, *s), |(lo, hi)| (lo.min(*s), hi.max(*s))));
        }
        for (k, r) in roots.iter().enumerate() {
            frf.push(vec![(*s).into(), k.into(), r.amplitude.into(), r.phase.into()]);
        }
    }
    if !(sec.backbone_amplitude_max > 0.0) || sec.n_backbone < 2 {
        return Err(bad(
            "backbone_amplitude_max",
            "needs a positive maximum and at least 2 points",
        )
        .into());
    }
    let a_grid: Vec<f64> = (1..=sec.n_backbone)
        .map(|i| sec.backbone_amplitude_max * i as f64 / sec.n_backbone as f64)
        .collect();
    let bb = backbone(&cubic, problem.kappa, &a_grid)?;
    let mut bd = Dataset::floats("backbone.csv", &["amplitude", "s"]).with_meta("dropped", bb.dropped.len());
    for pt in &bb.points {
        bd.push_floats(&[pt.amplitude, pt.s]);
    }
    let mut fd = Dataset::floats("folds.csv", &["s"]);
    for f in &branch.folds {
        fd.push_floats(&[*f]);
    }
    let mut out = Output::default();
    out.result("problem", problem);
    out.result("omega_n", cubic.omega_n);
    out.result("origin_theta", cubic.origin_theta);
    out.result("max_roots", max_roots);
    out.result("three_root_band", three);
    out.add(frf);
    out.add(bd);
    out.add(fd);
    Ok(out)
}

fn auto_reduction(p: &Params) -> Reduction {
    let (k1, _) = stiffness_at_poles(p);
    if clickdyn::equilibria::interior_equilibrium(p).is_some() {
        Reduction::DuffingDoubleWell
    } else if k1 < 0.0 && k1.is_finite() {
        Reduction::Pendulum
    } else {
        Reduction::SoftCubic
    }
}

fn melnikov(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.params()?;
    let sec = &cfg.melnikov;
    let variant = match sec.variant.as_str() {
        "auto" => auto_reduction(&p),
        v => v.parse::<Reduction>()?,
    };
    let source = match sec.orbit.as_str() {
        "closed-form" => OrbitSource::ClosedForm,
        "continued" => OrbitSource::Continued,
        o => {
            return Err(bad(
                "orbit",
                &format!("unknown orbit source `{o}` (expected closed-form or continued)"),
            )
            .into())
        }
    };
    if !(sec.omega_min > 0.0) {
        return Err(bad("omega_min", "frequencies must be > 0").into());
    }
    let omegas = grid("omega_min", sec.omega_min, sec.omega_max, sec.n_omega)?;
    let xis = if !sec.xis.is_empty() {
        sec.xis.clone()
    } else if cfg.xi > 0.0 {
        vec![cfg.xi]
    } else {
        vec![0.1, 0.4]
    };
    let sys = reduce(&p, variant)?;
    let orbit = separatrix(&sys, source)?;
    let printed = PrintedForm::for_variant(variant);
    let methods: Vec<ThresholdMethod> = sec
        .methods
        .iter()
        .map(|m| {
            if m == "printed" {
                Ok(ThresholdMethod::Printed(printed))
            } else {
                m.parse::<ThresholdMethod>()
            }
        })
        .collect::<Result<_, _>>()?;

    let mut out = Output::default();
    let mut sd = Dataset::floats("separatrix.csv", &["t", "theta", "omega"])
        .with_meta("origin", sys.origin)
        .with_meta("source", sec.orbit.as_str());
    for (t, s) in orbit.times.iter().zip(&orbit.states) {
        sd.push_floats(&[*t, s.theta, s.omega]);
    }
    out.add(sd);
    let grids = methods
        .par_iter()
        .map(|&m| threshold_grid(&sys, &orbit, &omegas, &xis, m))
        .collect::<Result<Vec<_>, _>>()?;
    for g in grids {
        let mut d = Dataset::floats(
            format!("threshold_{}.csv", g.method.as_str().to_ascii_lowercase()),
            &["xi0", "omega0", "m0_crit"],
        )
        .with_meta("method", g.method.as_str());
        for (xi, row) in g.xi_grid.iter().zip(&g.m0_crit) {
            for (w, m) in g.omega_grid.iter().zip(row) {
                d.push_floats(&[*xi, *w, *m]);
            }
        }
        out.add(d);
    }
    let mut pd = Dataset::floats(
        "printed.csv",
        &["xi0", "omega0", "printed", "numeric", "rel_disagreement"],
    )
    .with_meta("form", printed.as_str());
    let mut worst: f64 = 0.0;
    for &xi in &xis {
        for &w in &omegas {
            let r = threshold_closed_form(&sys, &orbit, xi, w)?;
            if let Some(d) = r.rel_disagreement {
                worst = worst.max(d);
            }
            pd.push_floats(&[xi, w, opt(r.value), r.numeric, opt(r.rel_disagreement)]);
        }
    }
    out.add(pd);
    out.result("variant", variant.as_str());
    out.result("coefficient", sys.coefficient);
    out.result("origin", sys.origin);
    out.result("saddle_rate", sys.saddle_rate());
    out.result("printed_form", printed.as_str());
    out.result("printed_max_rel_disagreement", worst);
    Ok(out)
}

fn simulate(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.params()?;
    let sec = &cfg.simulate;
    let mut spec = match sec.method.as_str() {
        "rk45" => IntegratorSpec::default()
            .with_tolerances(sec.rel_tol, sec.abs_tol)
            .with_t_end(sec.t_end),
        "rk4" => IntegratorSpec::rk4(sec.h, sec.t_end),
        m => return Err(bad("method", &format!("unknown method `{m}` (expected rk45 or rk4)")).into()),
    };
    spec.sample_interval = sec.sample_interval;
    let s0 = State::new(sec.theta_init, sec.omega_init);
    let table = |traj: &clickdyn::Trajectory| {
        let mut d = Dataset::floats("trajectory.csv", &["t", "theta", "omega", "energy"]);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            d.push_floats(&[*t, s.theta, s.omega, hamiltonian(&p, *s)]);
        }
        d
    };
    match integrate(&p, s0, &spec) {
        Ok(traj) => {
            let mut out = Output::default();
            out.result("accepted_steps", traj.step_stats.accepted);
            out.result("rejected_steps", traj.step_stats.rejected);
            out.result("energy_drift", traj.energy_drift);
            out.add(table(&traj));
            Ok(out)
        }
        Err(clickdyn::Error::StepSizeUnderflow { t, partial }) => {
            let mut out = Output::default();
            out.result("partial", true);
            out.add(table(&partial));
            Err(Failure {
                error: CliError::Numeric(format!("step size underflow at t = {t}")),
                partial: Some(out),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn sweep(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.params()?;
    let sec = &cfg.sweep;
    let (cubic, problem) = frf_setup(&p, &sec.center, sec.epsilon, sec.zeta, sec.b)?;
    let sys = match sec.system.as_str() {
        "cubic" => SweepSystem::Cubic(problem),
        "full" => {
            if sec.epsilon.is_some() {
                return Err(bad("epsilon", "only applies to the cubic system").into());
            }
            SweepSystem::Full { params: p, cubic }
        }
        s => return Err(bad("system", &format!("unknown system `{s}` (expected full or cubic)")).into()),
    };
    let spec = SweepSpec {
        s_lo: sec.s_min,
        s_hi: sec.s_max,
        n_steps: sec.n_steps,
        steady_tol: sec.steady_tol,
        min_periods: sec.min_periods,
        max_periods: sec.max_periods,
        ..SweepSpec::default()
    };
    let h = sweep_hysteresis(&sys, &spec)?;
    let mut out = Output::default();
    for (name, curve) in [("sweep_up.csv", &h.up), ("sweep_down.csv", &h.down)] {
        let mut d = Dataset::new(
            name,
            &[
                ("s", ColumnType::F64),
                ("amplitude", ColumnType::F64),
                ("steady", ColumnType::Int),
            ],
        );
        for i in 0..curve.s.len() {
            d.push(vec![
                curve.s[i].into(),
                curve.amplitude[i].into(),
                curve.steady[i].into(),
            ]);
        }
        out.add(d);
    }
    let mut jd = Dataset::new(
        "jumps.csv",
        &[
            ("direction", ColumnType::Str),
            ("s_from", ColumnType::F64),
            ("s_to", ColumnType::F64),
            ("amplitude_from", ColumnType::F64),
            ("amplitude_to", ColumnType::F64),
        ],
    );
    for (dir, jumps) in [("up", &h.up_jumps), ("down", &h.down_jumps)] {
        for j in jumps {
            jd.push(vec![
                Cell::from(dir),
                j.s_from.into(),
                j.s_to.into(),
                j.amplitude_from.into(),
                j.amplitude_to.into(),
            ]);
        }
    }
    out.add(jd);
    out.result("hbm_folds", problem.folds(sec.s_min, sec.s_max, 4 * sec.n_steps.max(2)));
    out.result("problem", problem);
    Ok(out)
}

fn lyapunov(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.params()?;
    let sec = &cfg.lyapunov;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = sec.n_starts.max(1);
    let starts: Vec<(State, State)> = (0..n)
        .map(|i| {
            let s0 = if i == 0 {
                State::new(sec.theta_init, sec.omega_init)
            } else {
                State::new(
                    sec.theta_init + rng.gen_range(-0.5..0.5),
                    sec.omega_init + rng.gen_range(-0.5..0.5),
                )
            };
            let a: f64 = rng.gen_range(0.0..2.0 * PI);
            (s0, State::new(a.cos(), a.sin()))
        })
        .collect();
    let spec = LyapunovSpec {
        horizon: sec.horizon,
        renorm_interval: sec.renorm_interval,
        discard_periods: sec.discard_periods,
        d0: sec.d0,
        ..LyapunovSpec::default()
    };
    let runs = starts
        .par_iter()
        .map(|(s0, dir)| largest_lyapunov(&p, *s0, &spec, *dir))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Output::default();
    let mut summary = Dataset::new(
        "lyapunov_summary.csv",
        &[
            ("start", ColumnType::Int),
            ("theta0", ColumnType::F64),
            ("omega0", ColumnType::F64),
            ("mean", ColumnType::F64),
            ("last_quartile_mean", ColumnType::F64),
            ("retries", ColumnType::Int),
        ],
    );
    for (i, ((s0, _), est)) in starts.iter().zip(&runs).enumerate() {
        summary.push(vec![
            i.into(),
            s0.theta.into(),
            s0.omega.into(),
            est.mean.into(),
            est.last_quartile_mean.into(),
            est.retries.into(),
        ]);
        let mut d = Dataset::floats(format!("lyapunov_{i:02}.csv"), &["t", "estimate"]);
        for (k, v) in est.running.iter().enumerate() {
            d.push_floats(&[est.renorm_interval * (k + 1) as f64, *v]);
        }
        out.add(d);
    }
    out.result("mean", runs.iter().map(|r| r.mean).sum::<f64>() / runs.len() as f64);
    out.add(summary);
    Ok(out)
}

fn poincare(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.params()?;
    let sec = &cfg.poincare;
    if sec.n_points == 0 {
        return Err(bad("n_points", "must be >= 1").into());
    }
    let map = poincare_section(
        &p,
        State::new(sec.theta_init, sec.omega_init),
        sec.n_points,
        sec.discard,
    )?;
    let mut d = Dataset::new(
        "poincare.csv",
        &[
            ("n", ColumnType::Int),
            ("theta", ColumnType::F64),
            ("omega", ColumnType::F64),
        ],
    )
    .with_meta("section_period", map.section_period);
    for (i, s) in map.points.iter().enumerate() {
        d.push(vec![
            (map.discard + i + 1).into(),
            wrap_angle(s.theta).into(),
            s.omega.into(),
        ]);
    }
    let mut out = Output::default();
    out.result("clusters", map.cluster_count(sec.cluster_tol));
    out.result("cluster_tol", sec.cluster_tol);
    out.result("diameter", map.diameter());
    out.add(d);
    Ok(out)
}
