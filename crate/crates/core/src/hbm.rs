//! Single-harmonic balance for the cubic approximation of the oscillator.
//!
//! About a center `θc` with stiffness `K` the moment is truncated to
//! `K·x + c₃·x³` (`x = θ − θc`). Dividing by `K` and rescaling time by
//! `√K` gives the normalized Duffing form
//!
//! ```text
//! κ x'' + 2ζ x' + x + ε x³ = B sin(s τ)
//! ```
//!
//! with `ε = c₃/K`, `ζ = ξ·damping_factor(θc)/√K`, `B = M₀/K` (the static
//! deflection) and `s = Ω₀/√K`. Harmonic balance with `x = A sin(sτ − φ)`
//! gives `((1 − κs² + ¾εA²)² + (2ζs)²)·A² = B²`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::equilibria::{Equilibrium, EquilibriumKind};
use crate::error::{domain, Error, Result};
use crate::model::{damping_factor, rhs_perturbed, stiffness, Params, State};
use crate::odeint::{IntegratorSpec, Stepper};
use crate::roots::brent;

/// Step used for the stiffness second difference.
pub const FIT_STEP: f64 = 1e-3;

/// Second derivative by central differences at `h` and `h/2`, combined by
/// Richardson extrapolation (fourth order).
pub fn second_difference_richardson<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Cubic truncation of the restoring moment about a center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicApprox {
    /// `√K`, the time scale of the normalized equation.
    pub omega_n: f64,
    pub epsilon: f64,
    pub origin_theta: f64,
}

impl CubicApprox {
    /// Build from a stiffness function: `c₃ = K''(θc)/6`.
    pub fn from_stiffness<F: Fn(f64) -> f64>(k: F, center: f64) -> Result<Self> {
        let k0 = k(center);
        if !(k0 > 0.0) {
            return Err(Error::NotCenter { theta: center });
        }
        let cubic = second_difference_richardson(&k, center, FIT_STEP) / 6.0;
        Ok(Self {
            omega_n: k0.sqrt(),
            epsilon: cubic / k0,
            origin_theta: center,
        })
    }

    pub fn linear_stiffness(&self) -> f64 {
        self.omega_n * self.omega_n
    }

    /// Map the forcing and damping of `p` into the normalized problem.
    pub fn frf_problem(&self, p: &Params) -> FrfProblem {
        FrfProblem {
            epsilon: self.epsilon,
            kappa: p.kappa,
            xi: p.xi * damping_factor(p, self.origin_theta) / self.omega_n,
            b: p.m_big0 / self.linear_stiffness(),
        }
    }

    /// Frequency ratio of a dimensionless drive frequency.
    pub fn ratio(&self, omega_big0: f64) -> f64 {
        omega_big0 / self.omega_n
    }
}

pub fn fit_cubic(p: &Params, eq: &Equilibrium) -> Result<CubicApprox> {
    match eq.kind {
        EquilibriumKind::Center => {}
        EquilibriumKind::Saddle => return Err(Error::NotCenter { theta: eq.theta }),
        EquilibriumKind::Degenerate => return Err(Error::Degenerate { theta: eq.theta }),
    }
    CubicApprox::from_stiffness(|t| stiffness(p, t).unwrap_or(f64::NAN), eq.theta)
}

/// Coefficients of the balanced amplitude equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrfProblem {
    pub epsilon: f64,
    pub kappa: f64,
    /// Normalized damping ratio `ζ`.
    pub xi: f64,
    /// Normalized forcing amplitude.
    pub b: f64,
}

/// One harmonic-balance solution at a frequency ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrfRoot {
    pub amplitude: f64,
    /// Response phase lag in `[0, π]`.
    pub phase: f64,
}

/// Sign of the discriminant of the cubic in `u = A²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootStructure {
    Single,
    /// Double root: a fold.
    Fold,
    Triple,
}

fn cubic_discriminant(a: f64, b: f64, c: f64, d: f64) -> f64 {
    18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c - 4.0 * a * c.powi(3) - 27.0 * a * a * d * d
}

/// Real roots of `a u³ + b u² + c u + d`, each polished by Newton steps.
pub fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let poly = |u: f64| ((a * u + b) * u + c) * u + d;
    let dpoly = |u: f64| (3.0 * a * u + 2.0 * b) * u + c;
    let scale = b.abs().max(c.abs()).max(d.abs());
    let mut roots = if a.abs() <= 1e-300 || a.abs() < 1e-14 * scale {
        real_quadratic_roots(b, c, d)
    } else {
        let (p2, p1, p0) = (b / a, c / a, d / a);
        let shift = p2 / 3.0;
        let pp = p1 - p2 * p2 / 3.0;
        let qq = 2.0 * p2.powi(3) / 27.0 - p2 * p1 / 3.0 + p0;
        let disc = -(4.0 * pp.powi(3) + 27.0 * qq * qq);
        if disc > 0.0 && pp < 0.0 {
            let r = 2.0 * (-pp / 3.0).sqrt();
            let arg = (3.0 * qq / (pp * r)).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            (0..3).map(|k| r * (phi - TAU * k as f64 / 3.0).cos() - shift).collect()
        } else {
            let sq = (qq * qq / 4.0 + pp.powi(3) / 27.0).max(0.0).sqrt();
            let t = (-qq / 2.0 + sq).cbrt() + (-qq / 2.0 - sq).cbrt();
            vec![t - shift]
        }
    };
    for r in &mut roots {
        for _ in 0..3 {
            let dp = dpoly(*r);
            if dp == 0.0 {
                break;
            }
            let next = *r - poly(*r) / dp;
            if !next.is_finite() || poly(next).abs() > poly(*r).abs() {
                break;
            }
            *r = next;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

fn real_quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { Vec::new() } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + disc.sqrt().copysign(b));
    let mut v = vec![q / a];
    if q != 0.0 {
        v.push(c / q);
    }
    v
}

impl FrfProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(domain("kappa", "must be > 0"));
        }
        if !(self.b >= 0.0) {
            return Err(domain("b", "forcing amplitude must be >= 0"));
        }
        if !(self.xi >= 0.0) {
            return Err(domain("xi", "damping must be >= 0"));
        }
        Ok(())
    }

    fn detuning(&self, s: f64) -> f64 {
        1.0 - self.kappa * s * s
    }

    /// Coefficients of the cubic in `u = A²`, highest power first.
    pub fn cubic_in_amplitude_squared(&self, s: f64) -> [f64; 4] {
        let c = self.detuning(s);
        let d = 2.0 * self.xi * s;
        let e = self.epsilon;
        [9.0 / 16.0 * e * e, 1.5 * e * c, c * c + d * d, -self.b * self.b]
    }

    /// `((1 − κs² + ¾εA²)² + (2ξs)²)·A² − B²`.
    pub fn residual(&self, s: f64, amplitude: f64) -> f64 {
        let u = amplitude * amplitude;
        let c = self.detuning(s) + 0.75 * self.epsilon * u;
        let d = 2.0 * self.xi * s;
        (c * c + d * d) * u - self.b * self.b
    }

    /// Residuals of the cosine and sine balance equations.
    pub fn balance_residuals(&self, s: f64, root: &FrfRoot) -> (f64, f64) {
        let a = root.amplitude;
        let cos_eq = a * self.detuning(s) + 0.75 * self.epsilon * a.powi(3) - self.b * root.phase.cos();
        let sin_eq = 2.0 * self.xi * s * a - self.b * root.phase.sin();
        (cos_eq, sin_eq)
    }

    pub fn root_structure(&self, s: f64) -> RootStructure {
        let [a, b, c, d] = self.cubic_in_amplitude_squared(s);
        let disc = cubic_discriminant(a, b, c, d);
        let scale = (b * b * c * c)
            .abs()
            .max((27.0 * a * a * d * d).abs())
            .max(f64::MIN_POSITIVE);
        if self.epsilon == 0.0 || disc < -1e-14 * scale {
            RootStructure::Single
        } else if disc > 1e-14 * scale {
            RootStructure::Triple
        } else {
            RootStructure::Fold
        }
    }

    fn discriminant(&self, s: f64) -> f64 {
        let [a, b, c, d] = self.cubic_in_amplitude_squared(s);
        cubic_discriminant(a, b, c, d)
    }

    /// All positive amplitudes at ratio `s`, ascending.
    pub fn amplitudes(&self, s: f64) -> Vec<FrfRoot> {
        let c = self.detuning(s);
        let d = 2.0 * self.xi * s;
        let phase = |u: f64| d.atan2(c + 0.75 * self.epsilon * u);
        if self.b == 0.0 {
            return vec![FrfRoot {
                amplitude: 0.0,
                phase: phase(0.0),
            }];
        }
        let [a3, a2, a1, a0] = self.cubic_in_amplitude_squared(s);
        let mut us: Vec<f64> = if self.epsilon == 0.0 {
            vec![self.b * self.b / (c * c + d * d)]
        } else {
            real_cubic_roots(a3, a2, a1, a0)
        };
        us.retain(|&u| u > 0.0 && u.is_finite());
        us.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs());
        us.into_iter()
            .map(|u| FrfRoot {
                amplitude: u.sqrt(),
                phase: phase(u),
            })
            .collect()
    }

    /// Ratios in `[s_lo, s_hi]` where two positive-amplitude branches meet.
    ///
    /// An `n`-cell scan flags cells where the number of positive roots
    /// changes; the fold is then located by bisection on the discriminant
    /// sign. Double roots at negative `A²` are ignored.
    pub fn folds(&self, s_lo: f64, s_hi: f64, n: usize) -> Vec<f64> {
        if self.epsilon == 0.0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        let h = (s_hi - s_lo) / n as f64;
        let mut x0 = s_lo;
        let mut f0 = self.discriminant(x0);
        let mut c0 = self.amplitudes(x0).len();
        for i in 1..=n {
            let x1 = if i == n { s_hi } else { s_lo + h * i as f64 };
            let f1 = self.discriminant(x1);
            let c1 = self.amplitudes(x1).len();
            if c0 != c1 && f0.signum() != f1.signum() && f0 != 0.0 && f1 != 0.0 {
                if let Ok(r) = brent(|s| self.discriminant(s), x0, x1, 1e-13) {
                    out.push(r);
                }
            }
            x0 = x1;
            f0 = f1;
            c0 = c1;
        }
        out
    }
}

pub fn frf_amplitudes(cubic: &CubicApprox, kappa: f64, xi: f64, b: f64, s: f64) -> Result<Vec<FrfRoot>> {
    if !(s > 0.0) {
        return Err(domain("s", "frequency ratio must be > 0"));
    }
    let problem = FrfProblem {
        epsilon: cubic.epsilon,
        kappa,
        xi,
        b,
    };
    problem.validate()?;
    Ok(problem.amplitudes(s))
}

/// Roots at every ratio of a grid, with the fold ratios inside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrfBranch {
    pub s_values: Vec<f64>,
    pub roots: Vec<Vec<FrfRoot>>,
    pub folds: Vec<f64>,
}

pub fn frf_scan(problem: &FrfProblem, s_values: &[f64]) -> Result<FrfBranch> {
    problem.validate()?;
    if let Some(bad) = s_values.iter().find(|s| !(**s > 0.0)) {
        return Err(domain("s", format!("frequency ratio must be > 0, got {bad}")));
    }
    let roots = s_values.iter().map(|&s| problem.amplitudes(s)).collect();
    let folds = match (s_values.first(), s_values.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => problem.folds(lo, hi, 4 * s_values.len()),
        _ => Vec::new(),
    };
    Ok(FrfBranch {
        s_values: s_values.to_vec(),
        roots,
        folds,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackbonePoint {
    pub amplitude: f64,
    /// `√((1 + ¾εa²)/κ)`.
    pub s: f64,
    /// `1 + ¾εa²`, the κ = 1 form.
    pub s_unit_inertia: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Backbone {
    pub points: Vec<BackbonePoint>,
    /// Amplitudes dropped because `1 + ¾εa² < 0`.
    pub dropped: Vec<f64>,
}

pub fn backbone(cubic: &CubicApprox, kappa: f64, a_grid: &[f64]) -> Result<Backbone> {
    if !(kappa > 0.0) {
        return Err(domain("kappa", "must be > 0"));
    }
    let mut out = Backbone {
        points: Vec::new(),
        dropped: Vec::new(),
    };
    for &a in a_grid {
        if !(a > 0.0) {
            return Err(domain("a_grid", "amplitudes must be > 0"));
        }
        let r = 1.0 + 0.75 * cubic.epsilon * a * a;
        if r < 0.0 {
            out.dropped.push(a);
            continue;
        }
        out.points.push(BackbonePoint {
            amplitude: a,
            s: (r / kappa).sqrt(),
            s_unit_inertia: r,
        });
    }
    Ok(out)
}

/// The system driven through a frequency sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SweepSystem {
    /// The normalized cubic oscillator.
    Cubic(FrfProblem),
    /// The full oscillator; `s` is converted through the cubic fit about
    /// `cubic.origin_theta`, and amplitudes are measured in `θ`.
    Full { params: Params, cubic: CubicApprox },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub s_lo: f64,
    pub s_hi: f64,
    pub n_steps: usize,
    /// Periods over which the amplitude spread is measured.
    pub window: usize,
    /// Relative spread `(max − min)/mean` accepted as steady.
    pub steady_tol: f64,
    pub min_periods: usize,
    pub max_periods: usize,
    pub samples_per_period: usize,
    pub integrator: IntegratorSpec,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            s_lo: 0.8,
            s_hi: 1.2,
            n_steps: 81,
            window: 20,
            steady_tol: 1e-3,
            min_periods: 40,
            max_periods: 600,
            samples_per_period: 64,
            integrator: IntegratorSpec::default().with_tolerances(1e-9, 1e-11),
        }
    }
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_steps.max(2);
        (0..n)
            .map(|i| self.s_lo + (self.s_hi - self.s_lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.s_lo > 0.0 && self.s_hi > self.s_lo) {
            return Err(domain("s_lo", "require 0 < s_lo < s_hi"));
        }
        if self.window < 2 || self.min_periods < self.window || self.max_periods < self.min_periods {
            return Err(domain("window", "require 2 <= window <= min_periods <= max_periods"));
        }
        if self.samples_per_period < 8 {
            return Err(domain("samples_per_period", "must be >= 8"));
        }
        self.integrator.validate()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub s: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// Whether the steady-state test passed before the period cap.
    pub steady: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub s_from: f64,
    pub s_to: f64,
    pub amplitude_from: f64,
    pub amplitude_to: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hysteresis {
    pub up: SweepCurve,
    pub down: SweepCurve,
    pub up_jumps: Vec<Jump>,
    pub down_jumps: Vec<Jump>,
}

impl SweepSystem {
    fn validate(&self) -> Result<()> {
        match self {
            Self::Cubic(p) => {
                p.validate()?;
                if !(p.xi > 0.0 && p.b > 0.0) {
                    return Err(domain("xi", "sweep needs damping and forcing"));
                }
                Ok(())
            }
            Self::Full { params, .. } => {
                params.validate()?;
                if !(params.xi > 0.0 && params.m_big0 > 0.0) {
                    return Err(domain("xi", "sweep needs damping and forcing"));
                }
                Ok(())
            }
        }
    }

    fn origin(&self) -> State {
        match self {
            Self::Cubic(_) => State::default(),
            Self::Full { cubic, .. } => State::new(cubic.origin_theta, 0.0),
        }
    }

    /// Drive frequency in the system's own time unit.
    fn drive(&self, s: f64) -> f64 {
        match self {
            Self::Cubic(_) => s,
            Self::Full { cubic, .. } => s * cubic.omega_n,
        }
    }

    fn rhs(&self, drive: f64, phase: f64) -> impl Fn(f64, State) -> State + '_ {
        move |t, y| match self {
            Self::Cubic(p) => {
                let force =
                    p.b * (drive * t + phase).sin() - 2.0 * p.xi * y.omega - y.theta - p.epsilon * y.theta.powi(3);
                State::new(y.omega, force / p.kappa)
            }
            Self::Full { params, .. } => {
                let mut q = *params;
                q.omega_big0 = drive;
                q.phi = phase;
                rhs_perturbed(&q, t, y)
            }
        }
    }
}

/// Settle at one ratio; returns the steady amplitude, the steadiness flag,
/// the final state and the forcing phase reached.
fn settle(sys: &SweepSystem, spec: &SweepSpec, s: f64, state: State, phase: f64) -> Result<(f64, bool, State, f64)> {
    let drive = sys.drive(s);
    let period = TAU / drive;
    let rhs = sys.rhs(drive, phase);
    let mut stepper = Stepper::new(rhs, 0.0, state, spec.integrator);
    let mut amps: Vec<f64> = Vec::with_capacity(spec.max_periods);
    let dt = period / spec.samples_per_period as f64;
    let mut steady = false;
    for n in 0..spec.max_periods {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 1..=spec.samples_per_period {
            let t = period * n as f64 + dt * j as f64;
            let y = stepper.advance_to(t)?;
            lo = lo.min(y.theta);
            hi = hi.max(y.theta);
        }
        amps.push(0.5 * (hi - lo));
        if amps.len() >= spec.min_periods {
            let w = &amps[amps.len() - spec.window..];
            let (mn, mx) = w
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            if mx - mn <= spec.steady_tol * mean {
                steady = true;
                break;
            }
        }
    }
    let w = &amps[amps.len().saturating_sub(spec.window)..];
    let amp = w.iter().sum::<f64>() / w.len() as f64;
    let elapsed = stepper.time();
    let next_phase = (phase + drive * elapsed).rem_euclid(TAU);
    Ok((amp, steady, stepper.state(), next_phase))
}

fn sweep_direction(sys: &SweepSystem, spec: &SweepSpec, grid: &[f64]) -> Result<SweepCurve> {
    let mut curve = SweepCurve::default();
    let mut state = sys.origin();
    let mut phase = 0.0;
    for &s in grid {
        let (a, steady, y, ph) = settle(sys, spec, s, state, phase)?;
        curve.s.push(s);
        curve.amplitude.push(a);
        curve.steady.push(steady);
        state = y;
        phase = ph;
    }
    Ok(curve)
}

/// Indices `i` where `|A[i+1] − A[i]|` exceeds `factor` times the median
/// increment over a window of `±half` neighbors.
pub fn detect_jumps(curve: &SweepCurve, factor: f64, half: usize) -> Vec<Jump> {
    let inc: Vec<f64> = curve.amplitude.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut jumps = Vec::new();
    for i in 0..inc.len() {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(inc.len());
        let mut local: Vec<f64> = (lo..hi).filter(|&j| j != i).map(|j| inc[j]).collect();
        if local.is_empty() {
            continue;
        }
        local.sort_by(f64::total_cmp);
        let median = local[local.len() / 2];
        let scale = curve.amplitude[i].abs().max(curve.amplitude[i + 1].abs());
        if inc[i] > factor * median && inc[i] > 1e-6 * scale {
            jumps.push(Jump {
                s_from: curve.s[i],
                s_to: curve.s[i + 1],
                amplitude_from: curve.amplitude[i],
                amplitude_to: curve.amplitude[i + 1],
            });
        }
    }
    jumps
}

/// Jump threshold relative to the local median increment.
pub const JUMP_FACTOR: f64 = 5.0;
const JUMP_WINDOW: usize = 5;

/// Up and down quasi-static sweeps, carrying the attractor between steps.
///
/// The two directions run on separate threads.
pub fn sweep_hysteresis(sys: &SweepSystem, spec: &SweepSpec) -> Result<Hysteresis> {
    sys.validate()?;
    spec.validate()?;
    let grid = spec.grid();
    let mut rev = grid.clone();
    rev.reverse();
    let (up, down) = std::thread::scope(|scope| {
        let up = scope.spawn(|| sweep_direction(sys, spec, &grid));
        let down = sweep_direction(sys, spec, &rev);
        (up.join().expect("sweep thread panicked"), down)
    });
    let up = up?;
    let down = down?;
    let up_jumps = detect_jumps(&up, JUMP_FACTOR, JUMP_WINDOW);
    let down_jumps = detect_jumps(&down, JUMP_FACTOR, JUMP_WINDOW);
    Ok(Hysteresis {
        up,
        down,
        up_jumps,
        down_jumps,
    })
}
