//! Physical constants (SI) and wavelength/frequency conversions.

use std::f64::consts::PI;

pub const C: f64 = 299_792_458.0;
pub const C_UM_PER_S: f64 = C * 1e6;
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
pub const HBAR: f64 = 1.054_571_817e-34;

/// Angular frequency in rad/s for a vacuum wavelength in micrometres.
pub fn omega_from_um(lambda_um: f64) -> f64 {
    2.0 * PI * C_UM_PER_S / lambda_um
}

/// Vacuum wavelength in micrometres for an angular frequency in rad/s.
pub fn um_from_omega(omega: f64) -> f64 {
    2.0 * PI * C_UM_PER_S / omega
}

/// Vacuum wavenumber in rad/um.
pub fn k0_per_um(omega: f64) -> f64 {
    omega / C_UM_PER_S
}

/// Converts a wavelength width (nm) at centre `lambda_um` into an angular-frequency width.
pub fn domega_from_dlambda_nm(dlambda_nm: f64, lambda_um: f64) -> f64 {
    2.0 * PI * C_UM_PER_S * dlambda_nm * 1e-3 / (lambda_um * lambda_um)
}
