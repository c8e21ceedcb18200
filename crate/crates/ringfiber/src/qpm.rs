//! Periodically poled chi(2) grating with 50% duty cycle.
//!
//! The grating consists of 2N+1 poled blocks of length Period/2 occupying
//! `[-(j + 1/2) Period, -j Period]` for `j = 0..=2N`. Its spatial spectrum is
//! `(1/sqrt(2 pi)) int chi(z) exp(-i beta z) dz`, which is conjugate-symmetric:
//! `spectrum(-beta) = conj(spectrum(beta))`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

pub const CHI_XXX_PM_PER_V: f64 = 0.063;
pub const CHI_XYY_PM_PER_V: f64 = 0.021;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpmGrating {
    /// poling period in um
    pub period: f64,
    pub n_half: u64,
    /// pm/V
    pub chi_xxx: f64,
    /// pm/V, equal to chi_yyx and chi_yxy
    pub chi_xyy: f64,
}

impl QpmGrating {
    pub fn new(period: f64, n_half: u64, chi_xxx: f64, chi_xyy: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Config(format!("poling period must be positive, got {period}")));
        }
        let ratio = chi_xxx / chi_xyy;
        if !(ratio.is_finite() && (ratio / 3.0 - 1.0).abs() <= 0.1) {
            log::warn!("chi_xxx/chi_xyy = {ratio:.4}, expected about 3");
        }
        Ok(QpmGrating { period, n_half, chi_xxx, chi_xyy })
    }

    /// Grating with the number of periods closest to `length_um / period`.
    pub fn from_length(period: f64, length_um: f64, chi_xxx: f64, chi_xyy: f64) -> Result<Self> {
        if !(length_um >= period && period > 0.0) {
            return Err(Error::Config(format!("grating length {length_um} um shorter than period {period} um")));
        }
        let n_half = ((length_um / period - 1.0) / 2.0).round().max(0.0) as u64;
        Self::new(period, n_half, chi_xxx, chi_xyy)
    }

    pub fn with_period(&self, period: f64) -> Result<Self> {
        Self::new(period, self.n_half, self.chi_xxx, self.chi_xyy)
    }

    pub fn periods(&self) -> u64 {
        2 * self.n_half + 1
    }

    /// L = (2N+1) Period, um.
    pub fn length_um(&self) -> f64 {
        self.periods() as f64 * self.period
    }

    /// Unit-height poling profile at z (um).
    pub fn profile(&self, z: f64) -> f64 {
        if z > 0.0 {
            return 0.0;
        }
        let u = -z / self.period;
        let j = u.floor();
        if j > 2.0 * self.n_half as f64 {
            return 0.0;
        }
        if u - j <= 0.5 {
            1.0
        } else {
            0.0
        }
    }

    /// Structure factor multiplying the chi tensor, in metres, for beta in rad/m.
    pub fn spectrum(&self, beta: f64) -> Complex64 {
        let lam = self.period * 1e-6;
        let x = beta * lam;
        // 2 sin(beta Lam/4)/beta as (Lam/2) sinc
        let q = 0.25 * x;
        let block = 0.5 * lam * if q.abs() < 1e-8 { 1.0 - q * q / 6.0 } else { q.sin() / q };
        let kernel = dirichlet(self.n_half, x);
        let phase = 0.25 * x + (self.n_half as f64 * x).rem_euclid(2.0 * PI);
        Complex64::from_polar(block * kernel / (2.0 * PI).sqrt(), phase)
    }

    /// First-order phase-matching wavenumber 2 pi / Period, rad/m.
    pub fn k_grating(&self) -> f64 {
        2.0 * PI / (self.period * 1e-6)
    }

    /// Full width at half maximum of |spectrum|^2 around beta = 2 pi m / Period, rad/m.
    pub fn fwhm(&self, order: i32) -> f64 {
        let b0 = order as f64 * self.k_grating();
        let peak = self.spectrum(b0).norm_sqr();
        let half = |b: f64| self.spectrum(b).norm_sqr() - 0.5 * peak;
        let first_zero = 2.0 * PI / (self.length_um() * 1e-6);
        let edge = |dir: f64| {
            let (mut lo, mut hi) = (0.0, first_zero);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if half(b0 + dir * mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        edge(1.0) + edge(-1.0)
    }

    /// sum chi_jkl e_p,j conj(e_s,k) conj(e_i,l) over the xxx, xyy, yyx, yxy elements, pm/V.
    pub fn chi_contract(&self, e_p: [Complex64; 3], e_s: [Complex64; 3], e_i: [Complex64; 3]) -> Complex64 {
        let (s, i) = (e_s.map(|v| v.conj()), e_i.map(|v| v.conj()));
        self.chi_xxx * e_p[0] * s[0] * i[0] + self.chi_xyy * (e_p[0] * s[1] * i[1] + e_p[1] * s[1] * i[0] + e_p[1] * s[0] * i[1])
    }
}

/// sin((N + 1/2) x)/sin(x/2) with removable singularities at multiples of 2 pi.
fn dirichlet(n_half: u64, x: f64) -> f64 {
    let e = x - 2.0 * PI * (x / (2.0 * PI)).round();
    let m = 2.0 * n_half as f64 + 1.0;
    if e.abs() < 1e-7 / m {
        m * (1.0 - (m * m - 1.0) * e * e / 24.0)
    } else {
        (0.5 * m * e).sin() / (0.5 * e).sin()
    }
}
