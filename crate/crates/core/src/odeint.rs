//! Time integration of the oscillator.
//!
//! Two methods are available: classical fixed-step RK4 and the adaptive
//! Dormand–Prince 5(4) pair with FSAL. Dense output between accepted steps is
//! a cubic Hermite interpolant built from the end-point states and slopes.
//! Event times are seeded on the interpolant and then refined by re-stepping
//! from the start of the enclosing step, so they carry the accuracy of the
//! integrator rather than that of the interpolant.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{hamiltonian, rhs_perturbed, wrap_angle, Params, State};
use crate::roots::brent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Classical Runge–Kutta, fixed step `h_init`.
    Rk4,
    /// Dormand–Prince 5(4), adaptive.
    Rk45,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub t_end: f64,
    /// Record states on a uniform time grid (dense output) instead of at
    /// every accepted step.
    pub sample_interval: Option<f64>,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            method: Method::Rk45,
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            h_init: 1e-3,
            h_min: 1e-14,
            h_max: 1.0,
            t_end: 100.0,
            sample_interval: None,
        }
    }
}

impl IntegratorSpec {
    pub fn rk4(h: f64, t_end: f64) -> Self {
        Self {
            method: Method::Rk4,
            h_init: h,
            h_min: h,
            h_max: h,
            t_end,
            ..Self::default()
        }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(domain("tolerance", "abs_tol and rel_tol must be > 0"));
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(domain("h_init", "require 0 < h_min <= h_init <= h_max"));
        }
        if !self.t_end.is_finite() {
            return Err(domain("t_end", "must be finite"));
        }
        if let Some(dt) = self.sample_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(domain("sample_interval", "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Smallest and largest accepted step magnitude.
    pub h_smallest: f64,
    pub h_largest: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub step_stats: StepStats,
    /// `max |H(t) − H(0)|` over accepted steps, for conservative runs.
    pub energy_drift: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, State)> {
        Some((*self.times.last()?, *self.states.last()?))
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (error weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One accepted step, with enough data for Hermite interpolation.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    pub t0: f64,
    pub y0: State,
    pub f0: State,
    pub t1: f64,
    pub y1: State,
    pub f1: State,
}

impl StepRecord {
    /// Cubic Hermite interpolant at `t`.
    pub fn interpolate(&self, t: f64) -> State {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.y0 * h00 + self.f0 * (h10 * h) + self.y1 * h01 + self.f1 * (h11 * h)
    }
}

/// Incremental integrator over a vector field `f(t, y)`.
pub struct Stepper<F> {
    f: F,
    spec: IntegratorSpec,
    t: f64,
    y: State,
    dy: State,
    h: f64,
    stats: StepStats,
}

impl<F: Fn(f64, State) -> State> Stepper<F> {
    pub fn new(f: F, t0: f64, y0: State, spec: IntegratorSpec) -> Self {
        let dy = f(t0, y0);
        Self {
            f,
            spec,
            t: t0,
            y: y0,
            dy,
            h: spec.h_init,
            stats: StepStats {
                h_smallest: f64::INFINITY,
                ..StepStats::default()
            },
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> State {
        self.y
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Restart from a new point, keeping the current step-size estimate.
    pub fn reset(&mut self, t: f64, y: State) {
        self.t = t;
        self.y = y;
        self.dy = (self.f)(t, y);
    }

    fn dopri(&self, t: f64, y: State, k1: State, h: f64) -> (State, State, State) {
        let f = &self.f;
        let k2 = f(t + C2 * h, y + k1 * (A21 * h));
        let k3 = f(t + C3 * h, y + (k1 * A31 + k2 * A32) * h);
        let k4 = f(t + C4 * h, y + (k1 * A41 + k2 * A42 + k3 * A43) * h);
        let k5 = f(t + C5 * h, y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h);
        let k6 = f(t + h, y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h);
        let y1 = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
        let k7 = f(t + h, y1);
        let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        (y1, k7, err)
    }

    fn rk4(&self, t: f64, y: State, k1: State, h: f64) -> State {
        let f = &self.f;
        let k2 = f(t + 0.5 * h, y + k1 * (0.5 * h));
        let k3 = f(t + 0.5 * h, y + k2 * (0.5 * h));
        let k4 = f(t + h, y + k3 * h);
        y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }

    /// State after a single step of size `tau` from the start of `step`.
    pub fn substep(&self, step: &StepRecord, tau: f64) -> State {
        if tau == 0.0 {
            return step.y0;
        }
        match self.spec.method {
            Method::Rk45 => self.dopri(step.t0, step.y0, step.f0, tau).0,
            Method::Rk4 => self.rk4(step.t0, step.y0, step.f0, tau),
        }
    }

    fn error_norm(&self, y0: State, y1: State, err: State) -> f64 {
        let sc = |a: f64, b: f64| self.spec.abs_tol + self.spec.rel_tol * a.abs().max(b.abs());
        let e1 = err.theta / sc(y0.theta, y1.theta);
        let e2 = err.omega / sc(y0.omega, y1.omega);
        (0.5 * (e1 * e1 + e2 * e2)).sqrt()
    }

    /// Take one accepted step without passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<StepRecord> {
        let dir = if t_limit >= self.t { 1.0 } else { -1.0 };
        let remaining = (t_limit - self.t).abs();
        if remaining == 0.0 {
            return Err(Error::Integration("step requested with zero span".into()));
        }
        let (t0, y0, f0) = (self.t, self.y, self.dy);
        match self.spec.method {
            Method::Rk4 => {
                let mut h = self.spec.h_init;
                let last = h >= remaining * (1.0 - 1e-12);
                if last {
                    h = remaining;
                }
                let y1 = self.rk4(t0, y0, f0, dir * h);
                let t1 = if last { t_limit } else { t0 + dir * h };
                self.commit(t0, y0, f0, t1, y1, h)
            }
            Method::Rk45 => loop {
                let mut h = self.h.min(self.spec.h_max);
                let last = h >= remaining * (1.0 - 1e-12);
                if last {
                    h = remaining;
                }
                if h < self.spec.h_min && !last {
                    return Err(Error::StepSizeUnderflow {
                        t: t0,
                        partial: Box::default(),
                    });
                }
                let (y1, k7, err) = self.dopri(t0, y0, f0, dir * h);
                let en = self.error_norm(y0, y1, err);
                if !en.is_finite() || !y1.is_finite() {
                    self.stats.rejected += 1;
                    self.h = h * 0.2;
                    if self.h < self.spec.h_min {
                        return Err(Error::StepSizeUnderflow {
                            t: t0,
                            partial: Box::default(),
                        });
                    }
                    continue;
                }
                if en <= 1.0 {
                    let factor = if en == 0.0 {
                        5.0
                    } else {
                        (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    // keep the step estimate from shrinking because of a
                    // truncated final step
                    let proposal = h * factor;
                    self.h = if last { self.h.max(proposal) } else { proposal };
                    let t1 = if last { t_limit } else { t0 + dir * h };
                    self.t = t1;
                    self.y = y1;
                    self.dy = k7;
                    self.record(h);
                    return Ok(StepRecord {
                        t0,
                        y0,
                        f0,
                        t1,
                        y1,
                        f1: k7,
                    });
                }
                self.stats.rejected += 1;
                self.h = h * (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
                if self.h < self.spec.h_min {
                    return Err(Error::StepSizeUnderflow {
                        t: t0,
                        partial: Box::default(),
                    });
                }
            },
        }
    }

    fn commit(&mut self, t0: f64, y0: State, f0: State, t1: f64, y1: State, h: f64) -> Result<StepRecord> {
        if !y1.is_finite() {
            return Err(Error::Integration(format!("non-finite state at t = {t1}")));
        }
        let f1 = (self.f)(t1, y1);
        self.t = t1;
        self.y = y1;
        self.dy = f1;
        self.record(h);
        Ok(StepRecord { t0, y0, f0, t1, y1, f1 })
    }

    fn record(&mut self, h: f64) {
        self.stats.accepted += 1;
        self.stats.h_smallest = self.stats.h_smallest.min(h);
        self.stats.h_largest = self.stats.h_largest.max(h);
    }

    /// Step until the state sits exactly at `t_target`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<State> {
        while self.t != t_target {
            self.step(t_target)?;
        }
        Ok(self.y)
    }

    /// Time in `(step.t0, step.t1]` where `g` changes sign, if it does.
    pub fn locate<G: Fn(State) -> f64>(&self, step: &StepRecord, g: G) -> Option<(f64, State)> {
        let g0 = g(step.y0);
        let g1 = g(step.y1);
        if g1 == 0.0 {
            return Some((step.t1, step.y1));
        }
        if g0 == 0.0 || g0.signum() == g1.signum() {
            return None;
        }
        let h = step.t1 - step.t0;
        let seed = brent(
            |tau| g(step.interpolate(step.t0 + tau)),
            0.0,
            h,
            1e-14 * h.abs().max(1.0),
        )
        .unwrap_or(0.5 * h);
        let exact = |tau: f64| g(self.substep(step, tau));
        let width = 1e-6 * h;
        let (mut lo, mut hi) = (seed - width, seed + width);
        if h < 0.0 {
            std::mem::swap(&mut lo, &mut hi);
        }
        let (lo, hi) = if h > 0.0 {
            (lo.max(0.0), hi.min(h))
        } else {
            (lo.min(0.0), hi.max(h))
        };
        let tau = match brent(exact, lo, hi, 1e-13) {
            Ok(t) => t,
            Err(_) => brent(exact, 0.0, h, 1e-13).ok()?,
        };
        Some((step.t0 + tau, self.substep(step, tau)))
    }
}

/// Integrate an arbitrary field from `t0` to `spec.t_end`.
///
/// `energy` enables drift monitoring.
pub fn integrate_field<F, E>(f: F, t0: f64, y0: State, spec: &IntegratorSpec, energy: Option<E>) -> Result<Trajectory>
where
    F: Fn(f64, State) -> State,
    E: Fn(State) -> f64,
{
    spec.validate()?;
    if !y0.is_finite() {
        return Err(domain("state0", "must be finite"));
    }
    let mut stepper = Stepper::new(f, t0, y0, *spec);
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y0],
        ..Trajectory::default()
    };
    let h0 = energy.as_ref().map(|e| e(y0));
    let mut drift = 0.0f64;
    let dir = if spec.t_end >= t0 { 1.0 } else { -1.0 };
    let mut next_sample = spec.sample_interval.map(|dt| t0 + dir * dt);
    let mut k = 1usize;
    while stepper.time() != spec.t_end {
        let step = match stepper.step(spec.t_end) {
            Ok(s) => s,
            Err(Error::StepSizeUnderflow { t, .. }) => {
                traj.step_stats = stepper.stats();
                traj.energy_drift = h0.map(|_| drift);
                return Err(Error::StepSizeUnderflow {
                    t,
                    partial: Box::new(traj),
                });
            }
            Err(e) => return Err(e),
        };
        if let (Some(e), Some(h0)) = (energy.as_ref(), h0) {
            drift = drift.max((e(step.y1) - h0).abs());
        }
        match (spec.sample_interval, next_sample) {
            (Some(dt), Some(mut ts)) => {
                while dir * (ts - step.t1) <= 0.0 {
                    traj.times.push(ts);
                    traj.states
                        .push(if ts == step.t1 { step.y1 } else { step.interpolate(ts) });
                    k += 1;
                    ts = t0 + dir * dt * k as f64;
                }
                next_sample = Some(ts);
            }
            _ => {
                traj.times.push(step.t1);
                traj.states.push(step.y1);
            }
        }
    }
    if traj.times.last() != Some(&spec.t_end) {
        traj.times.push(spec.t_end);
        traj.states.push(stepper.state());
    }
    traj.step_stats = stepper.stats();
    traj.energy_drift = h0.map(|_| drift);
    Ok(traj)
}

/// Integrate the oscillator from `T = 0`.
pub fn integrate(p: &Params, state0: State, spec: &IntegratorSpec) -> Result<Trajectory> {
    p.validate()?;
    let rhs = |t: f64, s: State| rhs_perturbed(p, t, s);
    if p.is_conservative() {
        integrate_field(rhs, 0.0, state0, spec, Some(|s: State| hamiltonian(p, s)))
    } else {
        integrate_field(rhs, 0.0, state0, spec, None::<fn(State) -> f64>)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitKind {
    /// Oscillation between two turning angles.
    Libration,
    /// Angle advances monotonically by 2π per period.
    Rotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeOscillation {
    /// `½ |θ_max − θ_min|`; `π` for rotations.
    pub amplitude: f64,
    pub period: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub kind: OrbitKind,
}

/// Longest simulated time spent looking for a period.
const MAX_MEASURE_TIME: f64 = 1e5;

/// Period and amplitude of a free oscillation by event detection.
///
/// The period is the time between successive downward zero crossings of `ω`.
/// A trajectory whose angle advances by 2π before `ω` changes sign is a
/// rotation; its period is the time taken to advance by 2π.
pub fn measure_free_oscillation(p: &Params, state0: State) -> Result<FreeOscillation> {
    measure_free_oscillation_with(p, state0, &IntegratorSpec::default())
}

pub fn measure_free_oscillation_with(p: &Params, state0: State, spec: &IntegratorSpec) -> Result<FreeOscillation> {
    p.validate()?;
    if !p.is_conservative() {
        return Err(domain("xi", "free oscillation requires xi = 0 and m0 = 0"));
    }
    if !state0.is_finite() {
        return Err(domain("state0", "must be finite"));
    }
    let rhs = |t: f64, s: State| rhs_perturbed(p, t, s);
    let mut stepper = Stepper::new(rhs, 0.0, state0, *spec);
    let mut down: Vec<(f64, f64)> = Vec::new();
    let mut up: Vec<f64> = Vec::new();
    let mut seen_sign_change = false;
    while stepper.time() < MAX_MEASURE_TIME {
        let step = stepper.step(MAX_MEASURE_TIME)?;
        if step.y0.omega > 0.0 && step.y1.omega <= 0.0 {
            seen_sign_change = true;
            if let Some((t, s)) = stepper.locate(&step, |s| s.omega) {
                down.push((t, s.theta));
            }
        } else if step.y0.omega < 0.0 && step.y1.omega >= 0.0 {
            seen_sign_change = true;
            if let Some((_, s)) = stepper.locate(&step, |s| s.omega) {
                up.push(s.theta);
            }
        }
        if down.len() >= 2 && !up.is_empty() {
            let theta_max = down[1].1;
            let theta_min = *up.last().unwrap();
            return Ok(FreeOscillation {
                amplitude: 0.5 * (theta_max - theta_min).abs(),
                period: down[1].0 - down[0].0,
                theta_min,
                theta_max,
                kind: OrbitKind::Libration,
            });
        }
        if !seen_sign_change {
            let delta = step.y1.theta - state0.theta;
            if delta.abs() >= TAU {
                let target = state0.theta + TAU.copysign(delta);
                let (t, _) = stepper
                    .locate(&step, |s| s.theta - target)
                    .ok_or_else(|| Error::Integration("rotation crossing not bracketed".into()))?;
                return Ok(FreeOscillation {
                    amplitude: std::f64::consts::PI,
                    period: t,
                    theta_min: state0.theta.min(target),
                    theta_max: state0.theta.max(target),
                    kind: OrbitKind::Rotation,
                });
            }
        }
    }
    Err(Error::Integration(format!(
        "no period detected within T = {MAX_MEASURE_TIME}"
    )))
}

/// Stroboscopic samples of a forced response, one per drive period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareMap {
    /// Drive period `2π/Ω₀`; samples are taken at `T = n·period`.
    pub section_period: f64,
    pub points: Vec<State>,
    /// Number of drive periods discarded as transient.
    pub discard: usize,
}

/// Transient discarded by default before sampling a forced response.
pub const DEFAULT_DISCARD_PERIODS: usize = 200;

impl PoincareMap {
    /// Distance on the cylinder `S¹ × ℝ`.
    pub fn distance(a: &State, b: &State) -> f64 {
        wrap_angle(a.theta - b.theta).hypot(a.omega - b.omega)
    }

    /// Greedy clustering: a point joins the first cluster whose seed is
    /// within `tol`; otherwise it seeds a new one.
    pub fn clusters(&self, tol: f64) -> Vec<State> {
        let mut seeds: Vec<State> = Vec::new();
        for p in &self.points {
            if !seeds.iter().any(|s| Self::distance(s, p) <= tol) {
                seeds.push(*p);
            }
        }
        seeds
    }

    pub fn cluster_count(&self, tol: f64) -> usize {
        self.clusters(tol).len()
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max(Self::distance(a, b));
            }
        }
        d
    }
}

fn require_forcing(p: &Params) -> Result<()> {
    if !(p.omega_big0 > 0.0) {
        return Err(domain("omega0", "stroboscopic sampling requires omega0 > 0"));
    }
    if !(p.m_big0 > 0.0) {
        return Err(domain("m0", "stroboscopic sampling requires m0 > 0"));
    }
    Ok(())
}

pub fn poincare_section(p: &Params, state0: State, n_points: usize, discard: usize) -> Result<PoincareMap> {
    poincare_section_with(p, state0, n_points, discard, &IntegratorSpec::default())
}

pub fn poincare_section_with(
    p: &Params,
    state0: State,
    n_points: usize,
    discard: usize,
    spec: &IntegratorSpec,
) -> Result<PoincareMap> {
    p.validate()?;
    require_forcing(p)?;
    let period = TAU / p.omega_big0;
    let rhs = |t: f64, s: State| rhs_perturbed(p, t, s);
    let mut stepper = Stepper::new(rhs, 0.0, state0, *spec);
    let mut points = Vec::with_capacity(n_points);
    for n in 1..=(discard + n_points) {
        let s = stepper.advance_to(period * n as f64)?;
        if n > discard {
            points.push(s);
        }
    }
    Ok(PoincareMap {
        section_period: period,
        points,
        discard,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpec {
    /// Measurement time after the transient.
    pub horizon: f64,
    /// Time between renormalizations.
    pub renorm_interval: f64,
    /// Transient length in drive periods.
    pub discard_periods: usize,
    /// Initial separation.
    pub d0: f64,
    pub integrator: IntegratorSpec,
}

impl Default for LyapunovSpec {
    fn default() -> Self {
        Self {
            horizon: 2000.0,
            renorm_interval: 1.0,
            discard_periods: DEFAULT_DISCARD_PERIODS,
            d0: 1e-8,
            integrator: IntegratorSpec::default().with_tolerances(1e-10, 1e-12),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Average growth rate over the whole horizon.
    pub mean: f64,
    /// Average over the final quarter of renormalization intervals.
    pub last_quartile_mean: f64,
    /// Running estimate after each renormalization.
    pub running: Vec<f64>,
    pub renorm_interval: f64,
    pub retries: usize,
}

/// Benettin two-trajectory estimate of the largest Lyapunov exponent.
///
/// `direction` is the initial separation direction; it is normalized.
pub fn largest_lyapunov(p: &Params, state0: State, spec: &LyapunovSpec, direction: State) -> Result<LyapunovEstimate> {
    p.validate()?;
    if !(p.xi > 0.0 || p.m_big0 > 0.0) {
        return Err(domain("xi", "Lyapunov estimate expects a forced or damped system"));
    }
    if !(spec.horizon > 0.0 && spec.renorm_interval > 0.0 && spec.d0 > 0.0) {
        return Err(domain("horizon", "horizon, renorm_interval and d0 must be > 0"));
    }
    let dir_norm = direction.norm();
    if !(dir_norm > 0.0 && dir_norm.is_finite()) {
        return Err(domain("direction", "must be a nonzero finite vector"));
    }
    let unit = direction * (1.0 / dir_norm);

    let rhs = |t: f64, s: State| rhs_perturbed(p, t, s);
    let t_start = if p.omega_big0 > 0.0 {
        TAU / p.omega_big0 * spec.discard_periods as f64
    } else {
        0.0
    };
    let mut base = Stepper::new(rhs, 0.0, state0, spec.integrator);
    let start_state = if t_start > 0.0 {
        base.advance_to(t_start)?
    } else {
        state0
    };

    let mut interval = spec.renorm_interval;
    for retry in 0..=3 {
        match benettin(&rhs, t_start, start_state, unit, interval, spec) {
            Ok(mut est) => {
                est.retries = retry;
                return Ok(est);
            }
            Err(Error::Integration(msg)) if msg.starts_with("separation overflow") && retry < 3 => {
                interval *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("retry loop returns on its last iteration")
}

fn benettin<F: Fn(f64, State) -> State + Copy>(
    rhs: &F,
    t_start: f64,
    start: State,
    unit: State,
    interval: f64,
    spec: &LyapunovSpec,
) -> Result<LyapunovEstimate> {
    let n = (spec.horizon / interval).ceil().max(1.0) as usize;
    let mut a = Stepper::new(*rhs, t_start, start, spec.integrator);
    let mut b = Stepper::new(*rhs, t_start, start + unit * spec.d0, spec.integrator);
    let mut sum = 0.0;
    let mut local = Vec::with_capacity(n);
    let mut running = Vec::with_capacity(n);
    for i in 1..=n {
        let t = t_start + interval * i as f64;
        let ya = a.advance_to(t)?;
        let yb = b.advance_to(t)?;
        let sep = yb - ya;
        let d = sep.norm();
        if !d.is_finite() || d > 1e150 || d == 0.0 {
            return Err(Error::Integration(format!("separation overflow at t = {t}")));
        }
        let growth = (d / spec.d0).ln();
        sum += growth;
        local.push(growth / interval);
        running.push(sum / (interval * i as f64));
        b.reset(t, ya + sep * (spec.d0 / d));
    }
    let q = (local.len() * 3) / 4;
    let tail = &local[q..];
    Ok(LyapunovEstimate {
        mean: sum / (interval * n as f64),
        last_quartile_mean: tail.iter().sum::<f64>() / tail.len() as f64,
        running,
        renorm_interval: interval,
        retries: 0,
    })
}
