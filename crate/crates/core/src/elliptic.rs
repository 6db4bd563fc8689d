//! Jacobi elliptic functions and the complete elliptic integral of the first
//! kind.
//!
//! Everything here takes the *modulus* `k` (not the parameter `m = k²`).

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

const AGM_TOL: f64 = 1e-15;
const AGM_MAX_ITER: usize = 64;

/// Elliptic modulus `k ∈ [0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EllipticModulus(f64);

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&k) {
            return Err(domain("k", format!("modulus must lie in [0, 1), got {k}")));
        }
        Ok(Self(k))
    }

    pub fn k(self) -> f64 {
        self.0
    }

    /// Complementary modulus `√(1 − k²)`.
    pub fn complement(self) -> f64 {
        ((1.0 - self.0) * (1.0 + self.0)).sqrt()
    }

    /// Quarter period `K(k)`.
    pub fn quarter_period(self) -> f64 {
        FRAC_PI_2 / agm(1.0, self.complement())
    }
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= AGM_TOL * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    a
}

/// Complete elliptic integral of the first kind, `K(k)`.
pub fn complete_k(k: f64) -> Result<f64> {
    Ok(EllipticModulus::new(k)?.quarter_period())
}

/// `(sn, cn, dn)` at `u` for modulus `k`.
pub fn jacobi_sn_cn_dn(u: f64, k: f64) -> Result<(f64, f64, f64)> {
    if !u.is_finite() {
        return Err(domain("u", "argument must be finite"));
    }
    Ok(sn_cn_dn(u, EllipticModulus::new(k)?))
}

/// Descending-AGM evaluation after reducing `u` modulo the real period `4K`.
pub fn sn_cn_dn(u: f64, m: EllipticModulus) -> (f64, f64, f64) {
    let k = m.k();
    if k == 0.0 {
        let (s, c) = u.sin_cos();
        return (s, c, 1.0);
    }
    let quarter = m.quarter_period();
    let u = (u + 2.0 * quarter).rem_euclid(4.0 * quarter) - 2.0 * quarter;

    let mut a = [0.0f64; AGM_MAX_ITER + 1];
    let mut c = [0.0f64; AGM_MAX_ITER + 1];
    a[0] = 1.0;
    let mut b = m.complement();
    c[0] = k;
    let mut n = 0;
    while n < AGM_MAX_ITER && c[n].abs() > AGM_TOL {
        let an = 0.5 * (a[n] + b);
        let cn = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        n += 1;
        a[n] = an;
        c[n] = cn;
    }
    let mut phi = (1u64 << n) as f64 * a[n] * u;
    let mut prev = phi;
    for j in (1..=n).rev() {
        prev = phi;
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    let mut dn = cn / (prev - phi).cos();
    let lhs = dn * dn + k * k * sn * sn;
    if !(dn.is_finite() && (lhs - 1.0).abs() <= 1e-13) {
        dn = (1.0 - k * k * sn * sn).max(0.0).sqrt();
    }
    (sn, cn, dn)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveformKind {
    Sn,
    Cn,
    Dn,
}

impl WaveformKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sn => "sn",
            Self::Cn => "cn",
            Self::Dn => "dn",
        }
    }
}

/// Closed-form waveform `θ₀·f(T, k)` with `f ∈ {sn, cn, dn}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub kind: WaveformKind,
    pub amplitude: f64,
    pub modulus: EllipticModulus,
}

impl Waveform {
    pub fn eval(&self, t: f64) -> f64 {
        let (sn, cn, dn) = sn_cn_dn(t, self.modulus);
        self.amplitude
            * match self.kind {
                WaveformKind::Sn => sn,
                WaveformKind::Cn => cn,
                WaveformKind::Dn => dn,
            }
    }

    /// `4K` for sn and cn, `2K` for dn.
    pub fn period(&self) -> f64 {
        let quarter = self.modulus.quarter_period();
        match self.kind {
            WaveformKind::Sn | WaveformKind::Cn => 4.0 * quarter,
            WaveformKind::Dn => 2.0 * quarter,
        }
    }
}

pub fn freevib_waveform(kind: WaveformKind, theta0: f64, k: f64) -> Result<Waveform> {
    if !theta0.is_finite() {
        return Err(domain("theta0", "amplitude must be finite"));
    }
    Ok(Waveform {
        kind,
        amplitude: theta0,
        modulus: EllipticModulus::new(k)?,
    })
}
