//! Dimensionless click-mechanism oscillator.
//!
//! The restoring moment comes from two linear springs attached at the ends of
//! arms `alpha` and `beta` (in units of the spring free length) that rotate
//! about a common hinge. With `D(θ)² = α² + β² − 2αβ cos θ` the governing
//! equation is
//!
//! ```text
//! κ θ'' + 2ξ (αβ sin θ)² / D² · θ' + [αβ (1 − 1/D) + γ] sin θ = M₀ sin(Ω₀ T + φ)
//! ```
//!
//! All radicals are evaluated through the half-angle form
//! `D² = (α − β)² + 4αβ sin²(θ/2)`, which is non-negative by construction.
//! When `α == β` the spring can pass through the hinge at `θ = 2nπ`; there the
//! moment has a jump and the stiffness is unbounded. The moment takes the
//! average of its one-sided limits at the cusp (zero) and is continuous from
//! either side elsewhere.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Dimensional parameters of the mechanism (SI units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Lumped wing mass (kg).
    pub m: f64,
    /// Spring stiffness (N/m).
    pub k: f64,
    /// Viscous damping (N·s/m).
    pub c: f64,
    /// Arm length OA (m).
    pub a: f64,
    /// Arm length OB (m).
    pub b: f64,
    /// Spring free length (m).
    pub l: f64,
    /// Radius of gyration of the wings (m).
    pub d: f64,
    /// Moment amplitude (N·m).
    pub m0: f64,
    /// Drive frequency (rad/s).
    pub omega0: f64,
    /// Gravitational acceleration (m/s²).
    pub g: f64,
}

/// Dimensionless parameters of the oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub xi: f64,
    pub m_big0: f64,
    pub omega_big0: f64,
    /// Drive phase (rad).
    pub phi: f64,
}

impl Params {
    /// Conservative system with the common defaults `κ = 1`, `γ = 0`.
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma: 0.0,
            kappa: 1.0,
            xi: 0.0,
            m_big0: 0.0,
            omega_big0: 0.0,
            phi: 0.0,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_damping(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_forcing(mut self, m_big0: f64, omega_big0: f64) -> Self {
        self.m_big0 = m_big0;
        self.omega_big0 = omega_big0;
        self
    }

    /// Same geometry with damping and forcing removed.
    pub fn unperturbed(&self) -> Self {
        Self {
            xi: 0.0,
            m_big0: 0.0,
            ..*self
        }
    }

    pub fn is_conservative(&self) -> bool {
        self.xi == 0.0 && self.m_big0 == 0.0
    }

    /// Springs attached symmetrically; the moment has a cusp at `θ = 2nπ`.
    pub fn is_nonsmooth(&self) -> bool {
        self.alpha == self.beta
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        positive("kappa", self.kappa)?;
        non_negative("gamma", self.gamma)?;
        non_negative("xi", self.xi)?;
        non_negative("m0", self.m_big0)?;
        non_negative("omega0", self.omega_big0)?;
        if !self.phi.is_finite() {
            return Err(domain("phi", "must be finite"));
        }
        Ok(())
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(domain(field, format!("must be > 0, got {v}")))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(domain(field, format!("must be >= 0, got {v}")))
    }
}

/// Phase point of the oscillator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub theta: f64,
    pub omega: f64,
}

impl State {
    pub const fn new(theta: f64, omega: f64) -> Self {
        Self { theta, omega }
    }

    pub fn norm(&self) -> f64 {
        self.theta.hypot(self.omega)
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.omega.is_finite()
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State::new(self.theta + o.theta, self.omega + o.omega)
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State::new(self.theta - o.theta, self.omega - o.omega)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, s: f64) -> State {
        State::new(self.theta * s, self.omega * s)
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State::new(-self.theta, -self.omega)
    }
}

/// Whether the fields are differentiable at an evaluation point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    Smooth,
    /// `α == β` and `θ ≡ 0 (mod 2π)`.
    Cusp,
}

/// Counterpart of [`Params::validate`] for the dimensional description.
pub fn nondimensionalize(p: &PhysicalParams) -> Result<(Params, f64)> {
    for (field, v) in [("m", p.m), ("k", p.k), ("a", p.a), ("b", p.b), ("l", p.l), ("d", p.d)] {
        positive(field, v)?;
    }
    non_negative("c", p.c)?;
    non_negative("m0", p.m0)?;
    non_negative("omega0", p.omega0)?;
    non_negative("g", p.g)?;
    let omega_n = (p.k / p.m).sqrt();
    let kl2 = p.k * p.l * p.l;
    let inertia = 2.0 * p.m * p.d * p.d;
    let params = Params {
        alpha: p.a / p.l,
        beta: p.b / p.l,
        gamma: 2.0 * p.m * p.g / kl2,
        kappa: inertia / (p.m * p.l * p.l),
        xi: p.c / (2.0 * (p.m * p.k).sqrt()),
        m_big0: p.m0 / kl2,
        omega_big0: p.omega0 / omega_n,
        phi: 0.0,
    };
    Ok((params, omega_n))
}

/// Geometric quantities shared by every field evaluation.
#[derive(Clone, Copy, Debug)]
struct Geometry {
    ab: f64,
    sin: f64,
    cos: f64,
    /// Spring length `D`.
    d: f64,
    /// `sin θ / D`, finite at the cusp.
    sin_over_d: f64,
    cusp: bool,
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Reduce an angle to `[−π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = (theta + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

fn geometry(p: &Params, theta: f64) -> Geometry {
    let ab = p.alpha * p.beta;
    let (sin, cos) = theta.sin_cos();
    if p.is_nonsmooth() {
        let half = 0.5 * wrap_angle(theta);
        let (s2, c2) = half.sin_cos();
        let d = 2.0 * p.alpha * s2.abs();
        Geometry {
            ab,
            sin,
            cos,
            d,
            sin_over_d: sgn(s2) * c2 / p.alpha,
            cusp: s2 == 0.0,
        }
    } else {
        let s2 = (0.5 * theta).sin();
        let diff = p.alpha - p.beta;
        let d2 = (diff * diff + 4.0 * ab * s2 * s2).max(0.0);
        let d = d2.sqrt();
        Geometry {
            ab,
            sin,
            cos,
            d,
            sin_over_d: sin / d,
            cusp: false,
        }
    }
}

/// Squared spring length `α² + β² − 2αβ cos θ`.
pub fn radicand(p: &Params, theta: f64) -> f64 {
    let s2 = (0.5 * theta).sin();
    let diff = p.alpha - p.beta;
    diff * diff + 4.0 * p.alpha * p.beta * s2 * s2
}

/// Potential energy `½(D − 1)² + γ(1 − cos θ)`.
pub fn potential(p: &Params, theta: f64) -> f64 {
    let s2 = (0.5 * theta).sin();
    let d = radicand(p, theta).max(0.0).sqrt();
    0.5 * (d - 1.0).powi(2) + 2.0 * p.gamma * s2 * s2
}

/// `potential(from) − potential(to)` without cancellation when the angles
/// are close.
pub fn potential_drop(p: &Params, from: f64, to: f64) -> f64 {
    // sin²x − sin²y = sin(x − y) sin(x + y)
    let dsin2 = (0.5 * (from - to)).sin() * (0.5 * (from + to)).sin();
    let d_from = radicand(p, from).max(0.0).sqrt();
    let d_to = radicand(p, to).max(0.0).sqrt();
    let sum = d_from + d_to;
    let elastic = if sum > 0.0 {
        let dd = 4.0 * p.alpha * p.beta * dsin2 / sum;
        0.5 * dd * (sum - 2.0)
    } else {
        0.0
    };
    elastic + 2.0 * p.gamma * dsin2
}

/// Barrier energies `(PEN₁, PEN₂)`: the potential at `θ = 0` and `θ = π`.
pub fn barrier_energies(p: &Params) -> (f64, f64) {
    (potential(p, 0.0), potential(p, std::f64::consts::PI))
}

/// Restoring moment `[αβ(1 − 1/D) + γ] sin θ`, equal to `dPEN/dθ`.
pub fn moment(p: &Params, theta: f64) -> f64 {
    moment_flagged(p, theta).0
}

/// [`moment`] together with the smoothness of the field at `theta`.
pub fn moment_flagged(p: &Params, theta: f64) -> (f64, Smoothness) {
    let g = geometry(p, theta);
    let m = (g.ab + p.gamma) * g.sin - g.ab * g.sin_over_d;
    let flag = if g.cusp { Smoothness::Cusp } else { Smoothness::Smooth };
    (m, flag)
}

/// Stiffness `dM/dθ`.
pub fn stiffness(p: &Params, theta: f64) -> Result<f64> {
    let g = geometry(p, theta);
    if g.cusp {
        return Err(Error::Nonsmooth { theta });
    }
    let s = g.ab * g.sin_over_d;
    Ok((g.ab + p.gamma - g.ab / g.d) * g.cos + s * s / g.d)
}

/// Coefficient `(αβ sin θ)² / D²` multiplying `2ξω` in the damping term.
///
/// Finite everywhere; at the `α == β` cusp it takes the limiting value `α²`.
pub fn damping_factor(p: &Params, theta: f64) -> f64 {
    let g = geometry(p, theta);
    if g.cusp {
        return p.alpha * p.beta;
    }
    let s = g.ab * g.sin_over_d;
    s * s
}

/// Total energy `½κω² + PEN(θ)`.
pub fn hamiltonian(p: &Params, s: State) -> f64 {
    0.5 * p.kappa * s.omega * s.omega + potential(p, s.theta)
}

/// Vector field of the damped, harmonically forced oscillator.
pub fn rhs_perturbed(p: &Params, t: f64, s: State) -> State {
    let m = moment(p, s.theta);
    let mut torque = -m;
    if p.xi != 0.0 {
        torque -= 2.0 * p.xi * damping_factor(p, s.theta) * s.omega;
    }
    if p.m_big0 != 0.0 {
        torque += p.m_big0 * (p.omega_big0 * t + p.phi).sin();
    }
    State::new(s.omega, torque / p.kappa)
}

/// Vector field with damping and forcing removed.
pub fn rhs_unperturbed(p: &Params, s: State) -> State {
    State::new(s.omega, -moment(p, s.theta) / p.kappa)
}
