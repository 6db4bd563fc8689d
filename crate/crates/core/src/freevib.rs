//! Free vibration of the conservative oscillator.
//!
//! Orbits are classified from the barrier structure of the potential: with an
//! interior well (double-well parameters) the bands are intra-well, inter-well
//! and rotation; with a single well at a pole they are libration and
//! rotation. Periods come from `T = √(κ/2)·∮ dθ/√(H − PEN(θ))` with a
//! square-root substitution at each turning point.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::elliptic::{freevib_waveform, Waveform, WaveformKind};
use crate::equilibria::{interior_equilibrium, Equilibrium, EquilibriumKind};
use crate::error::{domain, Error, Result};
use crate::model::{potential, potential_drop, Params, State};
use crate::odeint::{integrate, IntegratorSpec};
use crate::quad::integrate as quadrature;
use crate::roots::brent;

/// Energies within this distance of a barrier are treated as separatrix.
pub const BARRIER_TOL: f64 = 1e-12;

const QUAD_ABS_TOL: f64 = 1e-10;
const QUAD_REL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AfBranch {
    /// Single well: libration about the center pole.
    Af1,
    /// Single well: rotation.
    Af2,
    /// Double well: oscillation inside one well.
    Af3,
    /// Double well: oscillation spanning both wells.
    Af4,
    /// Double well: rotation.
    Af5,
}

impl AfBranch {
    pub const ALL: [AfBranch; 5] = [Self::Af1, Self::Af2, Self::Af3, Self::Af4, Self::Af5];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Af1 => "AF1",
            Self::Af2 => "AF2",
            Self::Af3 => "AF3",
            Self::Af4 => "AF4",
            Self::Af5 => "AF5",
        }
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self, Self::Af2 | Self::Af5)
    }
}

impl std::str::FromStr for AfBranch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| domain("branch", format!("unknown branch `{s}` (expected AF1..AF5)")))
    }
}

/// Open energy interval `(lo, hi)` occupied by one orbit family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBand {
    pub branch: AfBranch,
    pub lo: f64,
    pub hi: f64,
}

impl EnergyBand {
    pub fn contains(&self, h: f64) -> bool {
        h > self.lo && h < self.hi
    }
}

struct Wells {
    /// Interior center angle in `(0, π)`, when the potential has one.
    interior: Option<f64>,
    e0: f64,
    e_pi: f64,
}

impl Wells {
    fn new(p: &Params) -> Self {
        let interior = interior_equilibrium(p);
        Self {
            interior,
            e0: potential(p, 0.0),
            e_pi: potential(p, PI),
        }
    }

    fn low_pole(&self) -> f64 {
        if self.e0 <= self.e_pi {
            0.0
        } else {
            PI
        }
    }

    fn low(&self) -> f64 {
        self.e0.min(self.e_pi)
    }

    fn high(&self) -> f64 {
        self.e0.max(self.e_pi)
    }
}

/// Orbit families present for `p`, ordered by energy.
pub fn energy_bands(p: &Params) -> Vec<EnergyBand> {
    let w = Wells::new(p);
    match w.interior {
        Some(t) => {
            let floor = potential(p, t);
            vec![
                EnergyBand {
                    branch: AfBranch::Af3,
                    lo: floor,
                    hi: w.low(),
                },
                EnergyBand {
                    branch: AfBranch::Af4,
                    lo: w.low(),
                    hi: w.high(),
                },
                EnergyBand {
                    branch: AfBranch::Af5,
                    lo: w.high(),
                    hi: f64::INFINITY,
                },
            ]
        }
        None => vec![
            EnergyBand {
                branch: AfBranch::Af1,
                lo: w.low(),
                hi: w.high(),
            },
            EnergyBand {
                branch: AfBranch::Af2,
                lo: w.high(),
                hi: f64::INFINITY,
            },
        ],
    }
}

/// Shape of the level set `H(θ, ω) = h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OrbitShape {
    /// Closed orbit between turning angles `lo < hi` (unwrapped).
    Libration {
        lo: f64,
        hi: f64,
    },
    Rotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub energy: f64,
    pub branch: AfBranch,
    pub shape: OrbitShape,
}

impl Orbit {
    /// `½(hi − lo)` for librations, `π` for rotations.
    pub fn amplitude(&self) -> f64 {
        match self.shape {
            OrbitShape::Libration { lo, hi } => 0.5 * (hi - lo),
            OrbitShape::Rotation => PI,
        }
    }
}

fn level_root(p: &Params, h: f64, lo: f64, hi: f64) -> Result<f64> {
    brent(|t| potential(p, t) - h, lo, hi, 1e-15)
}

/// Classify the level set at energy `h` and locate its turning angles.
pub fn orbit_at_energy(p: &Params, h: f64) -> Result<Orbit> {
    p.validate()?;
    if !h.is_finite() {
        return Err(domain("energy", "must be finite"));
    }
    let w = Wells::new(p);
    for barrier in [w.e0, w.e_pi] {
        if (h - barrier).abs() <= BARRIER_TOL {
            return Err(Error::InfinitePeriod { energy: h });
        }
    }
    let band = energy_bands(p)
        .into_iter()
        .find(|b| b.contains(h))
        .ok_or_else(|| Error::NoOrbit {
            energy: h,
            reason: "energy lies below the bottom of every well".into(),
        })?;
    let shape = match band.branch {
        AfBranch::Af3 => {
            let c = w.interior.expect("double-well band without an interior center");
            OrbitShape::Libration {
                lo: level_root(p, h, 0.0, c)?,
                hi: level_root(p, h, c, PI)?,
            }
        }
        AfBranch::Af1 | AfBranch::Af4 => {
            let t = level_root(p, h, 0.0, PI)?;
            if w.low_pole() == 0.0 {
                OrbitShape::Libration { lo: -t, hi: t }
            } else {
                OrbitShape::Libration { lo: t, hi: TAU - t }
            }
        }
        AfBranch::Af2 | AfBranch::Af5 => OrbitShape::Rotation,
    };
    Ok(Orbit {
        energy: h,
        branch: band.branch,
        shape,
    })
}

/// Turning angles of an intra-well orbit at energy `h`, sorted.
///
/// With `γ = 0` the closed form `cos θ = (α² + β² − (1 ± √(2H))²)/(2αβ)` is
/// used; otherwise the level set is root-found on either side of the center.
pub fn turning_angles(p: &Params, h: f64) -> Result<(f64, f64)> {
    if p.gamma == 0.0 {
        return turning_angles_closed_form(p, h);
    }
    match orbit_at_energy(p, h)? {
        Orbit {
            branch: AfBranch::Af3,
            shape: OrbitShape::Libration { lo, hi },
            ..
        } => Ok((lo, hi)),
        _ => Err(Error::NoOrbit {
            energy: h,
            reason: "no intra-well orbit at this energy".into(),
        }),
    }
}

/// Closed-form turning angles for `γ = 0`.
pub fn turning_angles_closed_form(p: &Params, h: f64) -> Result<(f64, f64)> {
    p.validate()?;
    if !(h > 0.0) {
        return Err(domain("energy", "must be > 0"));
    }
    let r = (2.0 * h).sqrt();
    let ab2 = 2.0 * p.alpha * p.beta;
    let sq = p.alpha * p.alpha + p.beta * p.beta;
    let angle = |d: f64| {
        let c = (sq - d * d) / ab2;
        if (-1.0..=1.0).contains(&c) {
            Ok(c.acos())
        } else {
            Err(Error::NoOrbit {
                energy: h,
                reason: format!("turning point with spring length {d} does not exist"),
            })
        }
    };
    let a = angle(1.0 - r)?;
    let b = angle(1.0 + r)?;
    Ok((a.min(b), a.max(b)))
}

/// `∫ dθ / √(PEN(x) − PEN(θ))` from turning point `x` to `m`.
fn half_integral(p: &Params, x: f64, m: f64) -> Result<f64> {
    let dir = (m - x).signum();
    let span = (m - x).abs().sqrt();
    quadrature(
        |s| {
            let drop = potential_drop(p, x, x + dir * s * s);
            if drop > 0.0 {
                2.0 * s / drop.sqrt()
            } else {
                0.0
            }
        },
        0.0,
        span,
        QUAD_ABS_TOL,
        QUAD_REL_TOL,
    )
}

/// Period of the orbit through energy `h`.
pub fn period_of_energy(p: &Params, h: f64) -> Result<f64> {
    period_of_orbit(p, &orbit_at_energy(p, h)?)
}

pub fn period_of_orbit(p: &Params, orbit: &Orbit) -> Result<f64> {
    let scale = (0.5 * p.kappa).sqrt();
    match orbit.shape {
        OrbitShape::Libration { lo, hi } if matches!(orbit.branch, AfBranch::Af1 | AfBranch::Af4) => {
            // symmetric about a pole the orbit may skim just above; integrate
            // outward from the pole on geometric breakpoints
            let m = 0.5 * (lo + hi);
            let c = 0.5 * (m + hi);
            let excess = orbit.energy - potential(p, m);
            let mut edges = vec![0.0];
            edges.extend((0..=6).rev().map(|j| 10f64.powi(-j)));
            let mut inner = 0.0;
            for w in edges.windows(2) {
                inner += quadrature(
                    |t| 1.0 / (excess + potential_drop(p, m, t)).sqrt(),
                    m + (c - m) * w[0],
                    m + (c - m) * w[1],
                    QUAD_ABS_TOL,
                    QUAD_REL_TOL,
                )?;
            }
            Ok(4.0 * scale * (inner + half_integral(p, hi, c)?))
        }
        OrbitShape::Libration { lo, hi } => {
            let m = 0.5 * (lo + hi);
            let i = half_integral(p, lo, m)? + half_integral(p, hi, m)?;
            Ok(2.0 * scale * i)
        }
        OrbitShape::Rotation => {
            // measure H − PEN from the higher barrier so the integrand stays
            // accurate where the orbit skims it
            let w = Wells::new(p);
            let top = if w.e0 >= w.e_pi { 0.0 } else { PI };
            let excess = orbit.energy - w.high();
            let i = quadrature(
                |t| 1.0 / (excess + potential_drop(p, top, t)).sqrt(),
                0.0,
                PI,
                QUAD_ABS_TOL,
                QUAD_REL_TOL,
            )?;
            Ok(2.0 * scale * i)
        }
    }
}

/// A sample of an amplitude–frequency branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeVibPoint {
    pub energy: f64,
    pub theta_ini: Option<f64>,
    pub theta_fin: Option<f64>,
    pub amplitude: f64,
    pub period: f64,
    pub frequency: f64,
    pub branch: AfBranch,
}

pub fn free_vib_point(p: &Params, h: f64) -> Result<FreeVibPoint> {
    let orbit = orbit_at_energy(p, h)?;
    let period = period_of_orbit(p, &orbit)?;
    let (theta_ini, theta_fin) = match orbit.shape {
        OrbitShape::Libration { lo, hi } => (Some(lo), Some(hi)),
        OrbitShape::Rotation => (None, None),
    };
    Ok(FreeVibPoint {
        energy: h,
        theta_ini,
        theta_fin,
        amplitude: orbit.amplitude(),
        period,
        frequency: TAU / period,
        branch: orbit.branch,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AfCurve {
    pub branch: AfBranch,
    pub points: Vec<FreeVibPoint>,
    /// Set when the branch does not exist for the given parameters.
    pub diagnostic: Option<String>,
}

/// Energies log-spaced away from the lower edge of `band`, staying a
/// relative `1e-6` clear of both edges.
pub fn band_energies(band: &EnergyBand, n: usize) -> Vec<f64> {
    let (a, b) = if band.hi.is_finite() {
        let w = band.hi - band.lo;
        (1e-6 * w, (1.0 - 1e-6) * w)
    } else {
        let s = band.lo.abs().max(1.0);
        (1e-6 * s, 10.0 * s)
    };
    if n == 1 {
        return vec![band.lo + (a * b).sqrt()];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| band.lo + (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn amplitude_frequency_curve(p: &Params, branch: AfBranch, n_samples: usize) -> Result<AfCurve> {
    p.validate()?;
    let Some(band) = energy_bands(p).into_iter().find(|b| b.branch == branch) else {
        return Ok(AfCurve {
            branch,
            points: Vec::new(),
            diagnostic: Some(format!("{} does not exist for these parameters", branch.as_str())),
        });
    };
    let points = band_energies(&band, n_samples)
        .into_iter()
        .map(|h| free_vib_point(p, h))
        .collect::<Result<Vec<_>>>()?;
    Ok(AfCurve {
        branch,
        points,
        diagnostic: None,
    })
}

/// Linear natural frequency `√(K/κ)` at a center.
pub fn natural_frequency(p: &Params, eq: &Equilibrium) -> Result<f64> {
    match eq.kind {
        EquilibriumKind::Center => Ok((eq.k_local / p.kappa).sqrt()),
        EquilibriumKind::Saddle => Err(Error::NotCenter { theta: eq.theta }),
        EquilibriumKind::Degenerate => Err(Error::Degenerate { theta: eq.theta }),
    }
}

/// Comparison of a closed-form elliptic waveform against the integrated orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveformReport {
    pub kind: WaveformKind,
    pub energy: f64,
    /// Modulus as given by the band formula; may fall outside `[0, 1)`.
    pub modulus: f64,
    pub waveform: Option<Waveform>,
    /// `max |θ_wave − θ_int|` over one waveform period.
    pub max_deviation: Option<f64>,
    pub rejection: Option<String>,
}

/// Modulus attached to each waveform: `2H/(1 − |α − β|)²` for sn and cn and
/// its reciprocal for dn.
pub fn waveform_modulus(p: &Params, kind: WaveformKind, h: f64) -> f64 {
    let scale = (1.0 - (p.alpha - p.beta).abs()).powi(2);
    match kind {
        WaveformKind::Sn | WaveformKind::Cn => 2.0 * h / scale,
        WaveformKind::Dn => scale / (2.0 * h),
    }
}

/// Build the waveform for amplitude `theta0` and compare it with direct
/// integration from the matching initial state.
pub fn elliptic_approximation(p: &Params, kind: WaveformKind, theta0: f64, samples: usize) -> Result<WaveformReport> {
    p.validate()?;
    let start = match kind {
        WaveformKind::Sn => State::new(0.0, theta0),
        WaveformKind::Cn | WaveformKind::Dn => State::new(theta0, 0.0),
    };
    let h = crate::model::hamiltonian(p, start);
    let k = waveform_modulus(p, kind, h);
    let waveform = match freevib_waveform(kind, theta0, k) {
        Ok(w) => w,
        Err(e) => {
            return Ok(WaveformReport {
                kind,
                energy: h,
                modulus: k,
                waveform: None,
                max_deviation: None,
                rejection: Some(e.to_string()),
            })
        }
    };
    let mut spec = IntegratorSpec::default().with_t_end(waveform.period());
    spec.sample_interval = Some(waveform.period() / samples.max(1) as f64);
    let traj = integrate(&p.unperturbed(), start, &spec)?;
    let dev = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| (waveform.eval(*t) - s.theta).abs())
        .fold(0.0, f64::max);
    Ok(WaveformReport {
        kind,
        energy: h,
        modulus: k,
        waveform: Some(waveform),
        max_deviation: Some(dev),
        rejection: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::equilibria_in_period;
    use crate::model::stiffness;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dw() -> Params {
        Params::new(1.5, 1.0)
    }

    #[test]
    fn bands_for_double_well() {
        let bands = energy_bands(&dw());
        assert_eq!(bands.len(), 3);
        assert_abs_diff_eq!(bands[0].lo, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bands[0].hi, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(bands[1].hi, 1.125, epsilon = 1e-15);
        assert_eq!(bands[2].hi, f64::INFINITY);
    }

    #[test]
    fn bands_for_single_well() {
        let bands = energy_bands(&Params::new(0.3, 0.4));
        assert_eq!(
            bands.iter().map(|b| b.branch).collect::<Vec<_>>(),
            [AfBranch::Af1, AfBranch::Af2]
        );
        // center at π, saddle at 0
        assert_abs_diff_eq!(bands[0].lo, 0.5 * 0.3f64.powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(bands[0].hi, 0.5 * 0.9f64.powi(2), epsilon = 1e-15);
    }

    #[test]
    fn turning_angles_reference() {
        let (a, b) = turning_angles(&dw(), 0.1).unwrap();
        assert_abs_diff_eq!(a, 0.192_778_345_787_6, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 1.175_381_611_678_7, epsilon = 1e-12);
        let p = dw();
        let c = interior_equilibrium(&p).unwrap();
        assert_abs_diff_eq!(a, level_root(&p, 0.1, 0.0, c).unwrap(), epsilon = 1e-10);
        assert_abs_diff_eq!(b, level_root(&p, 0.1, c, PI).unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn turning_angles_shrink_and_reach_saddle() {
        let p = dw();
        let c = interior_equilibrium(&p).unwrap();
        let (a, b) = turning_angles(&p, 1e-14).unwrap();
        assert_abs_diff_eq!(a, c, epsilon = 1e-6);
        assert_abs_diff_eq!(b, c, epsilon = 1e-6);
        let (a, _) = turning_angles(&p, 0.125 - 1e-12).unwrap();
        assert!(a < 1e-5);
    }

    #[test]
    fn gravity_uses_root_finding() {
        let p = dw().with_gamma(0.05);
        let floor = potential(&p, interior_equilibrium(&p).unwrap());
        let h = floor + 0.02;
        let (a, b) = turning_angles(&p, h).unwrap();
        assert_abs_diff_eq!(potential(&p, a), h, epsilon = 1e-10);
        assert_abs_diff_eq!(potential(&p, b), h, epsilon = 1e-10);
    }

    #[test]
    fn small_energy_period_is_linear() {
        let p = dw();
        let c = interior_equilibrium(&p).unwrap();
        let k = stiffness(&p, c).unwrap();
        let t = period_of_energy(&p, 1e-6 * k).unwrap();
        let lin = TAU / (k / p.kappa).sqrt();
        assert!((t - lin).abs() / lin < 1e-3);
    }

    #[test]
    fn period_diverges_at_separatrix() {
        let p = dw();
        let t_far = period_of_energy(&p, 0.125 - 1e-4).unwrap();
        let t_near = period_of_energy(&p, 0.125 - 1e-8).unwrap();
        assert!(t_near > t_far);
        assert!(matches!(period_of_energy(&p, 0.125), Err(Error::InfinitePeriod { .. })));
        assert!(matches!(period_of_energy(&p, -0.1), Err(Error::NoOrbit { .. })));
    }

    #[test]
    fn kappa_scales_period() {
        let p1 = dw();
        let p3 = dw().with_kappa(3.0);
        for h in [0.05, 0.5, 2.0] {
            let r = period_of_energy(&p3, h).unwrap() / period_of_energy(&p1, h).unwrap();
            assert_abs_diff_eq!(r, 3f64.sqrt(), epsilon = 1e-9);
        }
    }

    #[test]
    fn natural_frequencies() {
        let p = dw();
        let eqs = equilibria_in_period(&p);
        let center = eqs.iter().find(|e| e.kind == EquilibriumKind::Center).unwrap();
        let w = natural_frequency(&p, center).unwrap();
        assert_abs_diff_eq!(w, stiffness(&p, center.theta).unwrap().sqrt(), epsilon = 1e-15);
        let saddle = eqs.iter().find(|e| e.kind == EquilibriumKind::Saddle).unwrap();
        assert!(matches!(natural_frequency(&p, saddle), Err(Error::NotCenter { .. })));
        let mut fake = *center;
        fake.k_local = 0.75;
        assert_abs_diff_eq!(natural_frequency(&p, &fake).unwrap(), 0.75f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            natural_frequency(&p.with_kappa(3.0), &fake).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn intra_well_branch_softens() {
        let curve = amplitude_frequency_curve(&dw(), AfBranch::Af3, 30).unwrap();
        let w = &curve.points;
        assert!(w.windows(2).all(|q| q[1].amplitude > q[0].amplitude));
        let tail = &w[w.len() - 10..];
        assert!(tail.windows(2).all(|q| q[1].frequency < q[0].frequency));
    }

    #[test]
    fn rotation_branch_stiffens() {
        let curve = amplitude_frequency_curve(&dw(), AfBranch::Af5, 25).unwrap();
        assert!(curve.points.windows(2).all(|q| q[1].frequency > q[0].frequency));
        assert!(curve.points.iter().all(|q| q.amplitude == PI && q.theta_ini.is_none()));
    }

    #[test]
    fn missing_branch_is_empty() {
        let curve = amplitude_frequency_curve(&dw(), AfBranch::Af1, 10).unwrap();
        assert!(curve.points.is_empty());
        assert!(curve.diagnostic.is_some());
    }

    #[test]
    fn branch_names_round_trip() {
        for b in AfBranch::ALL {
            assert_eq!(b.as_str().parse::<AfBranch>().unwrap(), b);
        }
        assert!("AF9".parse::<AfBranch>().is_err());
    }

    #[test]
    fn waveform_modulus_rejection_is_reported() {
        let p = dw();
        // dn with small amplitude gives k = (1 − |α − β|)² / 2H > 1
        let r = elliptic_approximation(&p, WaveformKind::Dn, 0.8, 100).unwrap();
        assert!(r.modulus >= 1.0);
        assert!(r.waveform.is_none() && r.rejection.is_some());
        let r = elliptic_approximation(&p, WaveformKind::Cn, 0.5, 200).unwrap();
        assert!(r.modulus < 1.0);
        assert!(r.max_deviation.unwrap().is_finite());
    }

    proptest! {
        #[test]
        fn turning_points_lie_on_level_set(h in 1e-4f64..0.1249) {
            let p = dw();
            let (a, b) = turning_angles(&p, h).unwrap();
            prop_assert!(a < b);
            prop_assert!((potential(&p, a) - h).abs() <= 1e-10);
            prop_assert!((potential(&p, b) - h).abs() <= 1e-10);
            let o = orbit_at_energy(&p, h).unwrap();
            let OrbitShape::Libration { lo, hi } = o.shape else { panic!() };
            prop_assert!((lo - a).abs() <= 1e-10 && (hi - b).abs() <= 1e-10);
        }

        #[test]
        fn inter_well_orbits_are_symmetric(h in 0.13f64..1.12) {
            let o = orbit_at_energy(&dw(), h).unwrap();
            prop_assert_eq!(o.branch, AfBranch::Af4);
            let OrbitShape::Libration { lo, hi } = o.shape else { panic!() };
            prop_assert!((lo + hi).abs() <= 1e-15);
        }
    }
}
