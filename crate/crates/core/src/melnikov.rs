//! Melnikov thresholds for polynomial and pendulum reductions of the
//! oscillator.
//!
//! Each reduction keeps the saddle–center topology of the full field around
//! one orbit family and replaces the restoring moment by a simpler one with a
//! closed-form separatrix:
//!
//! * `DuffingDoubleWell`: `κẍ = c²x − x³` with `c` the interior well angle;
//!   homoclinic to the saddle at the origin.
//! * `Pendulum`: `κψ̈ = −k sin ψ` with `k = −K(0)`, in coordinates centered on
//!   `θ = π`; heteroclinic between `ψ = ±π`.
//! * `SoftCubic`: `κψ̈ = −Kπ²ψ + Kψ³` with `K = K(center)/π²`, centered on the
//!   center pole; heteroclinic between `ψ = ±π`.
//!
//! With constant damping `2ξ₀` and forcing `M₀ sin(Ω₀T)` the Melnikov function
//! has a simple zero iff `M₀·|∫ω e^{iΩ₀T} dT| > 2ξ₀ ∫ω² dT`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibria::{interior_equilibrium, stiffness_at_poles};
use crate::error::{domain, Error, Result};
use crate::model::{Params, State};
use crate::odeint::{IntegratorSpec, Stepper};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reduction {
    DuffingDoubleWell,
    Pendulum,
    SoftCubic,
}

impl Reduction {
    pub const ALL: [Reduction; 3] = [Self::DuffingDoubleWell, Self::Pendulum, Self::SoftCubic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::DuffingDoubleWell => "duffing",
            Self::Pendulum => "pendulum",
            Self::SoftCubic => "soft-cubic",
        }
    }
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s).ok_or_else(|| {
            domain(
                "variant",
                format!("unknown reduction `{s}` (expected duffing, pendulum or soft-cubic)"),
            )
        })
    }
}

/// A reduced oscillator together with its perturbation amplitudes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSystem {
    pub variant: Reduction,
    /// `c` (Duffing), `k` (pendulum) or `K` (soft cubic).
    pub coefficient: f64,
    pub kappa: f64,
    pub xi0: f64,
    pub m_big0: f64,
    pub omega_big0: f64,
    /// Angle of the local origin in the full system.
    pub origin: f64,
    /// Interior well angle of the source parameters, if any.
    pub source_theta3: Option<f64>,
}

/// Build the reduction of `p` for `variant`.
pub fn reduce(p: &Params, variant: Reduction) -> Result<ReducedSystem> {
    p.validate()?;
    let (k1, k2) = stiffness_at_poles(p);
    let theta3 = interior_equilibrium(p);
    let (coefficient, origin) = match variant {
        Reduction::DuffingDoubleWell => {
            let t = theta3.ok_or_else(|| {
                Error::IncompatibleRegion("double-well reduction needs an interior center (two wells)".into())
            })?;
            (t, 0.0)
        }
        Reduction::Pendulum => {
            if !(k1 < 0.0 && k1.is_finite()) {
                return Err(Error::IncompatibleRegion(format!(
                    "pendulum reduction needs a hyperbolic saddle at theta = 0 (K(0) = {k1})"
                )));
            }
            (-k1, PI)
        }
        Reduction::SoftCubic => {
            let (center, k) = if k1 < 0.0 && k2 > 0.0 {
                (PI, k2)
            } else if k1 > 0.0 && k2 < 0.0 {
                (0.0, k1)
            } else {
                return Err(Error::IncompatibleRegion(format!(
                    "soft-cubic reduction needs one pole to be a center and the other a saddle (K(0) = {k1}, K(pi) = {k2})"
                )));
            };
            (k / (PI * PI), center)
        }
    };
    Ok(ReducedSystem {
        variant,
        coefficient,
        kappa: p.kappa,
        xi0: p.xi,
        m_big0: p.m_big0,
        omega_big0: p.omega_big0,
        origin,
        source_theta3: theta3,
    })
}

impl ReducedSystem {
    /// Conservative restoring torque.
    pub fn force(&self, x: f64) -> f64 {
        let c = self.coefficient;
        match self.variant {
            Reduction::DuffingDoubleWell => c * c * x - x * x * x,
            Reduction::Pendulum => -c * x.sin(),
            Reduction::SoftCubic => c * x * (x * x - PI * PI),
        }
    }

    pub fn potential(&self, x: f64) -> f64 {
        let c = self.coefficient;
        match self.variant {
            Reduction::DuffingDoubleWell => 0.25 * (x * x - c * c).powi(2),
            Reduction::Pendulum => c * (1.0 - x.cos()),
            Reduction::SoftCubic => -0.25 * c * (x * x - PI * PI).powi(2),
        }
    }

    pub fn hamiltonian(&self, s: State) -> f64 {
        0.5 * self.kappa * s.omega * s.omega + self.potential(s.theta)
    }

    pub fn orbit_kind(&self) -> OrbitKind {
        match self.variant {
            Reduction::DuffingDoubleWell => OrbitKind::Homoclinic,
            _ => OrbitKind::Heteroclinic,
        }
    }

    /// Saddles the separatrix leaves and reaches.
    pub fn saddles(&self) -> (f64, f64) {
        match self.variant {
            Reduction::DuffingDoubleWell => (0.0, 0.0),
            _ => (-PI, PI),
        }
    }

    /// Unstable eigenvalue of the saddles.
    pub fn saddle_rate(&self) -> f64 {
        let c = self.coefficient;
        let k = match self.variant {
            Reduction::DuffingDoubleWell => c * c,
            Reduction::Pendulum => c,
            Reduction::SoftCubic => 2.0 * c * PI * PI,
        };
        (k / self.kappa).sqrt()
    }

    /// Time-scale parameter of the closed-form separatrix.
    pub fn orbit_rate(&self) -> f64 {
        match self.variant {
            Reduction::SoftCubic => 0.5 * self.saddle_rate(),
            _ => self.saddle_rate(),
        }
    }

    /// Closed-form separatrix at time `t`; the apex is at `t = 0`.
    pub fn closed_form(&self, t: f64) -> State {
        let l = self.orbit_rate();
        let x = l * t;
        let sech = 1.0 / x.cosh();
        match self.variant {
            Reduction::DuffingDoubleWell => {
                let a = SQRT_2 * self.coefficient;
                State::new(a * sech, -a * l * sech * x.tanh())
            }
            Reduction::Pendulum => State::new(2.0 * x.sinh().atan(), 2.0 * l * sech),
            Reduction::SoftCubic => State::new(PI * x.tanh(), PI * l * sech * sech),
        }
    }

    /// Unperturbed vector field.
    pub fn rhs(&self, s: State) -> State {
        State::new(s.omega, self.force(s.theta) / self.kappa)
    }

    /// Damped and forced vector field with constant damping `2ξ₀`.
    pub fn rhs_perturbed(&self, t: f64, s: State) -> State {
        let torque = self.force(s.theta) - 2.0 * self.xi0 * s.omega + self.m_big0 * (self.omega_big0 * t).sin();
        State::new(s.omega, torque / self.kappa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitKind {
    Homoclinic,
    Heteroclinic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitSource {
    ClosedForm,
    Continued,
}

/// Symmetric uniform time grid `T_j = −t_max + j·dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitGrid {
    pub t_max: f64,
    pub dt: f64,
    /// Apex time of the sampled orbit.
    pub shift: f64,
}

/// Half-width of the default grid in units of `1/λ`.
pub const DEFAULT_T_MAX: f64 = 40.0;
const GRID_STEP: f64 = 0.01;

impl OrbitGrid {
    /// Default grid scaled to the decay rate of the orbit's velocity.
    pub fn for_system(sys: &ReducedSystem) -> Self {
        let rate = sys.saddle_rate();
        Self {
            t_max: DEFAULT_T_MAX / rate,
            dt: GRID_STEP / rate,
            shift: 0.0,
        }
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn times(&self) -> Vec<f64> {
        let n = (2.0 * self.t_max / self.dt).round() as usize;
        (0..=n).map(|j| -self.t_max + self.dt * j as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixOrbit {
    pub kind: OrbitKind,
    pub source: OrbitSource,
    pub grid: OrbitGrid,
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

/// Initial offset from the saddle along the unstable direction.
pub const CONTINUATION_OFFSET: f64 = 1e-8;
/// Arrival distance at the target saddle.
pub const ARRIVAL_TOL: f64 = 1e-6;
/// Continuation horizon in units of `1/λ`.
pub const CONTINUATION_HORIZON: f64 = 50.0;

pub fn separatrix(sys: &ReducedSystem, source: OrbitSource) -> Result<SeparatrixOrbit> {
    separatrix_on(sys, source, OrbitGrid::for_system(sys))
}

pub fn separatrix_on(sys: &ReducedSystem, source: OrbitSource, grid: OrbitGrid) -> Result<SeparatrixOrbit> {
    if !(sys.coefficient > 0.0 && sys.kappa > 0.0) {
        return Err(domain("coefficient", "reduced system coefficients must be > 0"));
    }
    if !(grid.t_max > 0.0 && grid.dt > 0.0) {
        return Err(domain("t_max", "grid must have t_max > 0 and dt > 0"));
    }
    let times = grid.times();
    let states = match source {
        OrbitSource::ClosedForm => times.iter().map(|&t| sys.closed_form(t - grid.shift)).collect(),
        OrbitSource::Continued => continue_separatrix(sys, &times, grid.shift)?,
    };
    Ok(SeparatrixOrbit {
        kind: sys.orbit_kind(),
        source,
        grid,
        times,
        states,
    })
}

fn continuation_spec() -> IntegratorSpec {
    IntegratorSpec {
        h_max: 0.1,
        ..IntegratorSpec::default().with_tolerances(1e-13, 1e-15)
    }
}

fn continue_separatrix(sys: &ReducedSystem, times: &[f64], shift: f64) -> Result<Vec<State>> {
    let lam = sys.saddle_rate();
    let (from, to) = sys.saddles();
    let dir = State::new(1.0, lam) * (1.0 / lam.hypot(1.0));
    let saddle_from = State::new(from, 0.0);
    let saddle_to = State::new(to, 0.0);
    let start = saddle_from + dir * CONTINUATION_OFFSET;
    let horizon = CONTINUATION_HORIZON / lam;
    let rhs = |_: f64, s: State| sys.rhs(s);
    let apex_fn = |s: State| match sys.orbit_kind() {
        OrbitKind::Homoclinic => s.omega,
        OrbitKind::Heteroclinic => s.theta,
    };

    let mut stepper = Stepper::new(rhs, 0.0, start, continuation_spec());
    let mut apex = None;
    let arrival = loop {
        if stepper.time() >= horizon {
            let gap = (stepper.state() - saddle_to).norm();
            return Err(Error::Continuation(format!(
                "orbit did not reach the target saddle within T = {horizon} (distance {gap:.3e})"
            )));
        }
        let step = stepper.step(horizon)?;
        if apex.is_none() {
            apex = stepper.locate(&step, apex_fn).map(|(t, _)| t);
        }
        if apex.is_some() && (step.y1 - saddle_to).norm() <= ARRIVAL_TOL {
            break step.t1;
        }
    };
    let apex = apex.expect("arrival implies the apex was crossed");
    let end_state = stepper.state();

    let mut replay = Stepper::new(rhs, 0.0, start, continuation_spec());
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let local = apex + (t - shift);
        let s = if local <= 0.0 {
            saddle_from + dir * (CONTINUATION_OFFSET * (lam * local).exp())
        } else if local >= arrival {
            saddle_to + (end_state - saddle_to) * (-lam * (local - arrival)).exp()
        } else {
            replay.advance_to(local)?
        };
        out.push(s);
    }
    Ok(out)
}

/// Integrals entering the Melnikov function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelnikovIntegrals {
    /// `2∫ω² dT`.
    pub damping_integral: f64,
    /// `|∫ω(T) e^{iΩ₀T} dT|`.
    pub forcing_amplitude: f64,
}

impl MelnikovIntegrals {
    /// Smallest forcing amplitude for a simple zero at damping `xi0`.
    pub fn threshold(&self, xi0: f64) -> f64 {
        if xi0 == 0.0 {
            return 0.0;
        }
        xi0 * self.damping_integral / self.forcing_amplitude
    }
}

/// Largest velocity tolerated at the ends of the grid.
pub const TAIL_TOL: f64 = 1e-12;

/// Trapezoidal quadrature on the uniform orbit grid; spectrally accurate for
/// the exponentially decaying, analytic integrands involved.
pub fn melnikov_numeric(orbit: &SeparatrixOrbit, omega0: f64) -> Result<MelnikovIntegrals> {
    if !(omega0 > 0.0) {
        return Err(domain("omega0", "must be > 0"));
    }
    let n = orbit.states.len();
    if n < 3 {
        return Err(domain("orbit", "needs at least three samples"));
    }
    let tail = orbit.states[0].omega.abs().max(orbit.states[n - 1].omega.abs());
    if !(tail <= TAIL_TOL) {
        return Err(Error::NonDecaying(format!(
            "orbit velocity at the grid ends is {tail:.3e} (> {TAIL_TOL:e})"
        )));
    }
    let dt = orbit.grid.dt;
    let mut energy = 0.0;
    let mut kernel = Complex64::new(0.0, 0.0);
    for (i, (t, s)) in orbit.times.iter().zip(&orbit.states).enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        energy += w * s.omega * s.omega;
        kernel += Complex64::from_polar(w * s.omega, omega0 * t);
    }
    Ok(MelnikovIntegrals {
        damping_integral: 2.0 * energy * dt,
        forcing_amplitude: kernel.norm() * dt,
    })
}

/// Thresholds obtained by evaluating the Melnikov integrals analytically on
/// the closed-form separatrices.
pub fn threshold_derived(sys: &ReducedSystem, xi0: f64, omega0: f64) -> f64 {
    let l = sys.orbit_rate();
    let arg = PI * omega0 / (2.0 * l);
    match sys.variant {
        Reduction::Pendulum => 8.0 * l * xi0 / PI * arg.cosh(),
        Reduction::DuffingDoubleWell => 8.0 * sys.coefficient * l * l * xi0 / (3.0 * SQRT_2 * PI * omega0) * arg.cosh(),
        Reduction::SoftCubic => 8.0 * l * l * xi0 / (3.0 * omega0) * arg.sinh(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrintedForm {
    /// `(4c³ξ₀/(3√2πΩ₀))·cosh(πΩ₀/(2c))`, `c` the well angle.
    R1,
    /// `(2θ₃ξ₀/(3π))·coth(πΩ₀/2)`.
    R2,
    /// `(2π³ξ₀/(3π))·csch(πΩ₀/2)`.
    R3,
}

impl PrintedForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::R1 => "R1",
            Self::R2 => "R2",
            Self::R3 => "R3",
        }
    }

    pub fn for_variant(v: Reduction) -> Self {
        match v {
            Reduction::DuffingDoubleWell => Self::R1,
            Reduction::Pendulum => Self::R2,
            Reduction::SoftCubic => Self::R3,
        }
    }
}

/// A printed closed-form threshold next to the numeric one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrintedThreshold {
    pub form: PrintedForm,
    /// `None` when the formula needs an angle the parameters do not have.
    pub value: Option<f64>,
    pub numeric: f64,
    /// `|printed − numeric| / numeric`.
    pub rel_disagreement: Option<f64>,
}

/// Evaluate a printed form without comparing it.
pub fn printed_value(form: PrintedForm, sys: &ReducedSystem, xi0: f64, omega0: f64) -> Option<f64> {
    let x = PI * omega0 / 2.0;
    match form {
        PrintedForm::R1 => {
            let c = match sys.variant {
                Reduction::DuffingDoubleWell => sys.coefficient,
                _ => sys.source_theta3?,
            };
            Some(4.0 * c.powi(3) * xi0 / (3.0 * SQRT_2 * PI * omega0) * (PI * omega0 / (2.0 * c)).cosh())
        }
        PrintedForm::R2 => Some(2.0 * sys.source_theta3? * xi0 / (3.0 * PI) / x.tanh()),
        PrintedForm::R3 => Some(2.0 * PI.powi(3) * xi0 / (3.0 * PI) / x.sinh()),
    }
}

/// The printed threshold for the variant of `sys`, with its disagreement
/// against the numeric quadrature on `orbit`.
pub fn threshold_closed_form(
    sys: &ReducedSystem,
    orbit: &SeparatrixOrbit,
    xi0: f64,
    omega0: f64,
) -> Result<PrintedThreshold> {
    let numeric = melnikov_numeric(orbit, omega0)?.threshold(xi0);
    let form = PrintedForm::for_variant(sys.variant);
    let value = printed_value(form, sys, xi0, omega0);
    let rel_disagreement = value.and_then(|v| (numeric > 0.0).then(|| (v - numeric).abs() / numeric));
    Ok(PrintedThreshold {
        form,
        value,
        numeric,
        rel_disagreement,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdMethod {
    Printed(PrintedForm),
    Derived,
    Numeric,
}

impl ThresholdMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Printed(f) => f.as_str(),
            Self::Derived => "derived",
            Self::Numeric => "numeric",
        }
    }
}

impl std::str::FromStr for ThresholdMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r1" => Ok(Self::Printed(PrintedForm::R1)),
            "r2" => Ok(Self::Printed(PrintedForm::R2)),
            "r3" => Ok(Self::Printed(PrintedForm::R3)),
            "derived" => Ok(Self::Derived),
            "numeric" => Ok(Self::Numeric),
            _ => Err(domain(
                "method",
                format!("unknown method `{s}` (expected numeric, derived, r1, r2 or r3)"),
            )),
        }
    }
}

/// Critical forcing over a frequency × damping grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub omega_grid: Vec<f64>,
    pub xi_grid: Vec<f64>,
    /// `m0_crit[i][j]` at `xi_grid[i]`, `omega_grid[j]`; NaN where a printed
    /// form is undefined.
    pub m0_crit: Vec<Vec<f64>>,
    pub method: ThresholdMethod,
}

pub fn threshold_grid(
    sys: &ReducedSystem,
    orbit: &SeparatrixOrbit,
    omega_grid: &[f64],
    xi_grid: &[f64],
    method: ThresholdMethod,
) -> Result<ThresholdGrid> {
    if omega_grid.iter().any(|w| !(*w > 0.0)) {
        return Err(domain("omega_grid", "frequencies must be > 0"));
    }
    if xi_grid.iter().any(|x| !(*x >= 0.0)) {
        return Err(domain("xi_grid", "damping values must be >= 0"));
    }
    let per_omega: Vec<Box<dyn Fn(f64) -> f64>> = omega_grid
        .iter()
        .map(|&w| -> Result<Box<dyn Fn(f64) -> f64>> {
            Ok(match method {
                ThresholdMethod::Numeric => {
                    let m = melnikov_numeric(orbit, w)?;
                    Box::new(move |xi| m.threshold(xi))
                }
                ThresholdMethod::Derived => {
                    let unit = threshold_derived(sys, 1.0, w);
                    Box::new(move |xi| xi * unit)
                }
                ThresholdMethod::Printed(form) => {
                    let unit = printed_value(form, sys, 1.0, w).unwrap_or(f64::NAN);
                    Box::new(move |xi| xi * unit)
                }
            })
        })
        .collect::<Result<_>>()?;
    let m0_crit = xi_grid
        .iter()
        .map(|&xi| per_omega.iter().map(|f| f(xi)).collect())
        .collect();
    Ok(ThresholdGrid {
        omega_grid: omega_grid.to_vec(),
        xi_grid: xi_grid.to_vec(),
        m0_crit,
        method,
    })
}
