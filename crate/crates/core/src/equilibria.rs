//! Equilibria of the conservative system, their linear stability, and the
//! bifurcation sets in the `(α, β, γ)` parameter space.
//!
//! Equilibria are the zeros of the restoring moment. `θ = 0` and `θ = π` are
//! always equilibria; an interior pair `±θ*` exists when
//! `αβ(1 − 1/D(θ)) + γ` changes sign on `(0, π)`. That factor is strictly
//! increasing in `θ`, so there is at most one interior pair.
//!
//! The linearization `[[0, 1], [−K/κ, 0]]` is trace-free, hence every
//! equilibrium is a saddle (`K < 0`), a center (`K > 0`) or degenerate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{moment, radicand, stiffness, Params};
use crate::roots::{all_roots, brent, X_TOL};

/// Stiffness magnitude below which an equilibrium is reported degenerate.
pub const KIND_TOL: f64 = 1e-10;

/// Residual below which a parameter point is reported on a bifurcation set.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    Saddle,
    Center,
    Degenerate,
}

impl EquilibriumKind {
    pub fn from_stiffness(k: f64) -> Self {
        if k < -KIND_TOL {
            Self::Saddle
        } else if k > KIND_TOL {
            Self::Center
        } else {
            Self::Degenerate
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Saddle => "saddle",
            Self::Center => "center",
            Self::Degenerate => "degenerate",
        }
    }
}

/// Which of the four equilibrium families a root belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `θ = 2nπ`
    Theta1,
    /// `θ = (2n + 1)π`
    Theta2,
    /// interior root in `(0, π)`
    Theta3,
    /// its mirror image in `(−π, 0)`
    Theta4,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Theta1 => "theta1",
            Self::Theta2 => "theta2",
            Self::Theta3 => "theta3",
            Self::Theta4 => "theta4",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub theta: f64,
    /// Stiffness at `theta`; `−∞` for the `α == β` cusp.
    pub k_local: f64,
    pub kind: EquilibriumKind,
    /// `None` for degenerate points.
    pub eigenvalues: Option<[Complex64; 2]>,
    pub branch: Branch,
}

fn make_equilibrium(p: &Params, theta: f64, k_local: f64, branch: Branch) -> Equilibrium {
    let kind = EquilibriumKind::from_stiffness(k_local);
    let kind = if k_local.is_finite() {
        kind
    } else {
        EquilibriumKind::Degenerate
    };
    let eigenvalues = match kind {
        EquilibriumKind::Degenerate => None,
        _ => Some(linear_eigenvalues(k_local, p.kappa)),
    };
    Equilibrium {
        theta,
        k_local,
        kind,
        eigenvalues,
        branch,
    }
}

fn linear_eigenvalues(k: f64, kappa: f64) -> [Complex64; 2] {
    let lam = Complex64::new(-k / kappa, 0.0).sqrt();
    [lam, -lam]
}

/// `αβ(1 − 1/D) + γ`; the moment is this factor times `sin θ`.
fn moment_factor(p: &Params, theta: f64) -> f64 {
    let ab = p.alpha * p.beta;
    ab * (1.0 - 1.0 / radicand(p, theta).sqrt()) + p.gamma
}

/// Interior equilibrium angle `θ* ∈ (0, π)`, if one exists.
pub fn interior_equilibrium(p: &Params) -> Option<f64> {
    let lo = if p.is_nonsmooth() { 1e-100 } else { 0.0 };
    let f_lo = moment_factor(p, lo);
    let f_hi = moment_factor(p, PI);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return None;
    }
    let root = brent(|t| moment_factor(p, t), lo, PI, X_TOL).ok()?;
    (root > X_TOL && root < PI - X_TOL).then_some(root)
}

/// All equilibria in `(−π, π]`, sorted by angle.
pub fn equilibria_in_period(p: &Params) -> Vec<Equilibrium> {
    let (k1, k2) = stiffness_at_poles(p);
    let mut out = vec![
        make_equilibrium(p, 0.0, k1, Branch::Theta1),
        make_equilibrium(p, PI, k2, Branch::Theta2),
    ];
    if let Some(t) = interior_equilibrium(p) {
        let k = stiffness(p, t).unwrap_or(f64::NAN);
        out.push(make_equilibrium(p, t, k, Branch::Theta3));
        out.push(make_equilibrium(p, -t, k, Branch::Theta4));
    }
    out.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    out
}

/// Stiffness at the poles `θ = 0` and `θ = π`.
///
/// `K1` is `−∞` when `α == β` (the cusp is not linearizable).
pub fn stiffness_at_poles(p: &Params) -> (f64, f64) {
    let ab = p.alpha * p.beta;
    let k1 = if p.is_nonsmooth() {
        f64::NEG_INFINITY
    } else {
        ab + p.gamma - ab / (p.alpha - p.beta).abs()
    };
    let k2 = -(ab + p.gamma - ab / (p.alpha + p.beta));
    (k1, k2)
}

/// Eigenvalues `±√(−K/κ)` of the linearization.
pub fn eigenvalues_at(eq: &Equilibrium, p: &Params) -> Result<[Complex64; 2]> {
    match eq.kind {
        EquilibriumKind::Degenerate => Err(Error::Degenerate { theta: eq.theta }),
        _ => Ok(linear_eigenvalues(eq.k_local, p.kappa)),
    }
}

/// Eigenvector `(1, λ)` for each eigenvalue, as columns of the mode matrix.
pub fn eigenvectors_at(eq: &Equilibrium, p: &Params) -> Result<[[Complex64; 2]; 2]> {
    let [l1, l2] = eigenvalues_at(eq, p)?;
    let one = Complex64::new(1.0, 0.0);
    Ok([[one, l1], [one, l2]])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionLabel {
    /// Saddles at both poles, two interior centers.
    DoubleWell,
    /// Center at `θ = π`, saddle at `θ = 0`.
    SingleWellSoft,
    /// Center at `θ = 0`.
    SingleWellHard,
    /// On `B₁` or `B₂`.
    Boundary,
    /// `α == β`.
    Degenerate,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::DoubleWell => "double_well",
            Self::SingleWellSoft => "single_well_soft",
            Self::SingleWellHard => "single_well_hard",
            Self::Boundary => "boundary",
            Self::Degenerate => "degenerate",
        }
    }
}

/// Residual of `B₁`: the stiffness at `θ = 0`.
pub fn b1_residual(alpha: f64, beta: f64, gamma: f64) -> f64 {
    let ab = alpha * beta;
    ab + gamma - ab / (alpha - beta).abs()
}

/// Residual of `B₂`: minus the stiffness at `θ = π`.
pub fn b2_residual(alpha: f64, beta: f64, gamma: f64) -> f64 {
    let ab = alpha * beta;
    ab + gamma - ab / (alpha + beta)
}

/// `B₂` with the gravity term entering with a negative sign. Agrees with
/// [`b2_residual`] only at `γ = 0`; kept for reference.
pub fn b2_residual_printed(alpha: f64, beta: f64, gamma: f64) -> f64 {
    let ab = alpha * beta;
    ab - ab / (alpha + beta) - gamma
}

pub fn classify_region(p: &Params) -> RegionLabel {
    if p.is_nonsmooth() {
        return RegionLabel::Degenerate;
    }
    let r1 = b1_residual(p.alpha, p.beta, p.gamma);
    let r2 = b2_residual(p.alpha, p.beta, p.gamma);
    if r1.abs() < BOUNDARY_TOL || r2.abs() < BOUNDARY_TOL {
        return RegionLabel::Boundary;
    }
    let (k1, _) = stiffness_at_poles(p);
    if k1 > 0.0 {
        RegionLabel::SingleWellHard
    } else if interior_equilibrium(p).is_some() {
        RegionLabel::DoubleWell
    } else {
        RegionLabel::SingleWellSoft
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BifurcationVariant {
    /// Zero-stiffness set `K(θ; α, β, γ) = 0`.
    B0,
    /// Pitchfork at `θ = 0`.
    B1,
    /// Pitchfork at `θ = π`.
    B2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Angle of the zero-stiffness point (`B0` only).
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationCurve {
    pub variant: BifurcationVariant,
    pub samples: Vec<CurvePoint>,
}

/// Uniform 1-D sampling `lo, …, hi` with `n` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linspace {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Linspace {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.n {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// `B₁` or `B₂` traced over `β ∈ grid.beta`, solving for `α` on
/// `grid.alpha`. Each `β` row may contribute several roots.
pub fn bifurcation_set(
    variant: BifurcationVariant,
    gamma: f64,
    alpha: Linspace,
    beta: Linspace,
) -> Result<BifurcationCurve> {
    let residual: fn(f64, f64, f64) -> f64 = match variant {
        BifurcationVariant::B1 => b1_residual,
        BifurcationVariant::B2 => b2_residual,
        BifurcationVariant::B0 => {
            return Err(Error::Domain {
                field: "variant",
                reason: "use zero_stiffness_set for B0".into(),
            })
        }
    };
    let mut samples = Vec::new();
    for b in beta.values() {
        let f = |a: f64| residual(a, b, gamma);
        for a in all_roots(f, alpha.lo, alpha.hi, alpha.n.max(2)) {
            if f(a).abs() <= BOUNDARY_TOL {
                samples.push(CurvePoint {
                    alpha: a,
                    beta: b,
                    gamma,
                    theta: None,
                });
            }
        }
    }
    Ok(BifurcationCurve { variant, samples })
}

/// Zero set of the stiffness in the `(θ, α)` plane at fixed `β`, `γ`.
///
/// `theta_cells` subintervals of `(−π, π]` are scanned for sign changes at
/// every `α` in `alpha`.
pub fn zero_stiffness_set(beta: f64, gamma: f64, alpha: Linspace, theta_cells: usize) -> BifurcationCurve {
    let mut samples = Vec::new();
    for a in alpha.values() {
        let p = Params::new(a, beta).with_gamma(gamma);
        let k = |t: f64| stiffness(&p, t).unwrap_or(f64::NAN);
        for t in all_roots(k, -PI, PI, theta_cells.max(2)) {
            if t > -PI && k(t).abs() <= BOUNDARY_TOL {
                samples.push(CurvePoint {
                    alpha: a,
                    beta,
                    gamma,
                    theta: Some(t),
                });
            }
        }
    }
    BifurcationCurve {
        variant: BifurcationVariant::B0,
        samples,
    }
}

/// Largest residual `|moment|` over a set of equilibria.
pub fn max_moment_residual(p: &Params, eqs: &[Equilibrium]) -> f64 {
    eqs.iter().map(|e| moment(p, e.theta).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent oracle: bisection on the moment over a fine sign scan.
    fn bisect_moment_roots(p: &Params) -> Vec<f64> {
        let n = 20_000;
        let mut roots = Vec::new();
        let f = |t: f64| moment(p, t);
        for i in 1..n {
            let (mut a, mut b) = (PI * i as f64 / n as f64, PI * (i + 1) as f64 / n as f64);
            if i + 1 == n {
                break;
            }
            if f(a).signum() != f(b).signum() {
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if f(a).signum() == f(m).signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        roots
    }

    #[test]
    fn double_well_structure() {
        let p = Params::new(1.5, 1.0);
        let eqs = equilibria_in_period(&p);
        assert_eq!(eqs.len(), 4);
        let theta3 = 0.75f64.acos();
        assert_abs_diff_eq!(eqs[0].theta, -theta3, epsilon = 1e-12);
        assert_eq!(eqs[0].branch, Branch::Theta4);
        assert_eq!(eqs[1].theta, 0.0);
        assert_eq!(eqs[1].kind, EquilibriumKind::Saddle);
        assert_abs_diff_eq!(eqs[1].k_local, -1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(eqs[2].theta, theta3, epsilon = 1e-12);
        assert_eq!(eqs[2].kind, EquilibriumKind::Center);
        assert_eq!(eqs[3].theta, PI);
        assert_abs_diff_eq!(eqs[3].k_local, -0.9, epsilon = 1e-14);
        let oracle = bisect_moment_roots(&p);
        assert_eq!(oracle.len(), 1);
        assert_abs_diff_eq!(oracle[0], eqs[2].theta, epsilon = 1e-10);
        assert!(max_moment_residual(&p, &eqs) <= 1e-10);
    }

    #[test]
    fn equal_arms_interior_centers() {
        let p = Params::new(1.0, 1.0);
        let t = interior_equilibrium(&p).unwrap();
        assert_abs_diff_eq!(t, PI / 3.0, epsilon = 1e-12);
        let eqs = equilibria_in_period(&p);
        let origin = eqs.iter().find(|e| e.branch == Branch::Theta1).unwrap();
        assert_eq!(origin.kind, EquilibriumKind::Degenerate);
        assert!(origin.eigenvalues.is_none());
    }

    #[test]
    fn hard_single_well_has_no_interior_root() {
        let p = Params::new(3.0, 1.0);
        let eqs = equilibria_in_period(&p);
        assert_eq!(eqs.len(), 2);
        assert_eq!(eqs[0].kind, EquilibriumKind::Center);
        assert!(bisect_moment_roots(&p).is_empty());
        let (k1, k2) = stiffness_at_poles(&p);
        assert_abs_diff_eq!(k1, 1.5, epsilon = 1e-14);
        assert_eq!(eqs[1].kind, EquilibriumKind::from_stiffness(k2));
    }

    #[test]
    fn pole_stiffness_matches_field() {
        let p = Params::new(0.5, 1.0);
        let (k1, k2) = stiffness_at_poles(&p);
        assert_abs_diff_eq!(k1, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(k2, -(0.5 - 1.0 / 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(k1, stiffness(&p, 0.0).unwrap(), epsilon = 1e-14);
        assert_abs_diff_eq!(k2, stiffness(&p, PI).unwrap(), epsilon = 1e-14);
        assert_eq!(stiffness_at_poles(&Params::new(1.0, 1.0)).0, f64::NEG_INFINITY);
        // gravity stabilizes θ = 0
        assert!(stiffness_at_poles(&p.with_gamma(10.0)).0 > 0.0);
    }

    #[test]
    fn eigenvalues_against_matrix() {
        let p = Params::new(1.5, 1.0);
        let saddle = make_equilibrium(&p, 0.0, -1.5, Branch::Theta1);
        let [l1, l2] = eigenvalues_at(&saddle, &p).unwrap();
        assert_abs_diff_eq!(l1.re, 1.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(l1.im, 0.0);
        assert_abs_diff_eq!(l2.re, -1.224_744_871_391_589, epsilon = 1e-15);
        // characteristic polynomial of [[0,1],[-K/κ,0]]: λ² + K/κ
        let center = make_equilibrium(&p, 0.7, 0.75, Branch::Theta3);
        let [l1, _] = eigenvalues_at(&center, &p).unwrap();
        assert_abs_diff_eq!(l1.im.abs(), 0.866_025_403_784_438_6, epsilon = 1e-15);
        assert_abs_diff_eq!((l1 * l1 + 0.75).norm(), 0.0, epsilon = 1e-15);
        let heavy = p.with_kappa(3.0);
        let [l1, l2] = eigenvalues_at(&center, &heavy).unwrap();
        assert_abs_diff_eq!(l1.im.abs(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!((l1 * l2).re, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!((l1 + l2).norm(), 0.0, epsilon = 1e-15);
        let vecs = eigenvectors_at(&saddle, &p).unwrap();
        assert_eq!(vecs[0][1], l1_of(&saddle, &p));
        let degenerate = make_equilibrium(&p, 0.0, 0.0, Branch::Theta1);
        assert!(eigenvalues_at(&degenerate, &p).is_err());
    }

    fn l1_of(e: &Equilibrium, p: &Params) -> Complex64 {
        eigenvalues_at(e, p).unwrap()[0]
    }

    #[test]
    fn region_labels() {
        assert_eq!(classify_region(&Params::new(1.5, 1.0)), RegionLabel::DoubleWell);
        assert_eq!(classify_region(&Params::new(2.5, 1.0)), RegionLabel::SingleWellHard);
        assert_eq!(classify_region(&Params::new(0.3, 0.4)), RegionLabel::SingleWellSoft);
        assert_eq!(classify_region(&Params::new(2.0, 1.0)), RegionLabel::Boundary);
        assert_eq!(classify_region(&Params::new(0.5, 0.5)), RegionLabel::Degenerate);
        // single sign change of the moment on (0, π) for the hard well
        let p = Params::new(2.5, 1.0);
        assert!(bisect_moment_roots(&p).is_empty());
        // soft single well: π is a center
        let soft = Params::new(0.3, 0.4);
        let eqs = equilibria_in_period(&soft);
        assert_eq!(eqs.len(), 2);
        assert_eq!(eqs[1].kind, EquilibriumKind::Center);
    }

    #[test]
    fn bifurcation_sets_at_zero_gravity() {
        let alpha = Linspace::new(0.05, 3.0, 300);
        let beta = Linspace::new(1.0, 1.0, 1);
        let b1 = bifurcation_set(BifurcationVariant::B1, 0.0, alpha, beta).unwrap();
        assert!(b1.samples.iter().any(|s| (s.alpha - 2.0).abs() < 1e-10));
        let beta = Linspace::new(0.5, 0.5, 1);
        let b2 = bifurcation_set(BifurcationVariant::B2, 0.0, alpha, beta).unwrap();
        assert!(b2.samples.iter().any(|s| (s.alpha - 0.5).abs() < 1e-10));
        for s in b1.samples.iter().chain(&b2.samples) {
            let r = if s.beta == 1.0 {
                b1_residual(s.alpha, s.beta, 0.0)
            } else {
                b2_residual(s.alpha, s.beta, 0.0)
            };
            assert!(r.abs() <= 1e-9);
        }
    }

    #[test]
    fn b1_with_gravity() {
        // oracle: bisection on αβ(1 − 1/|α − β|) + 0.5 in α > β at β = 1
        let f = |a: f64| a * (1.0 - 1.0 / (a - 1.0)) + 0.5;
        let (mut lo, mut hi) = (1.2, 3.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(lo).signum() == f(m).signum() {
                lo = m;
            } else {
                hi = m;
            }
        }
        let curve = bifurcation_set(
            BifurcationVariant::B1,
            0.5,
            Linspace::new(1.01, 3.0, 200),
            Linspace::new(1.0, 1.0, 1),
        )
        .unwrap();
        assert!(curve.samples.iter().any(|s| (s.alpha - lo).abs() < 1e-10));
    }

    #[test]
    fn zero_stiffness_between_center_and_saddle() {
        let curve = zero_stiffness_set(1.0, 0.0, Linspace::new(1.5, 1.5, 1), 400);
        let theta3 = 0.75f64.acos();
        let positive: Vec<f64> = curve
            .samples
            .iter()
            .filter_map(|s| s.theta)
            .filter(|&t| t > 0.0)
            .collect();
        assert!(positive.iter().any(|&t| t > theta3 && t < PI));
        // symmetric under θ → −θ
        for s in &curve.samples {
            let t = s.theta.unwrap();
            assert!(curve.samples.iter().any(|o| (o.theta.unwrap() + t).abs() < 1e-9));
        }
        let p = Params::new(1.5, 1.0);
        assert!(stiffness(&p, theta3).unwrap() > 0.0 && stiffness(&p, PI).unwrap() < 0.0);
    }

    #[test]
    fn zero_stiffness_with_gravity_is_multivalued() {
        let curve = zero_stiffness_set(1.0, 0.5, Linspace::new(0.2, 2.0, 91), 720);
        let mut counts = std::collections::BTreeMap::new();
        for s in &curve.samples {
            *counts.entry((s.alpha * 1e6) as i64).or_insert(0usize) += 1;
        }
        assert!(counts.values().any(|&c| c >= 4));
    }
}
