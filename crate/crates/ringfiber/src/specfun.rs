//! Cylinder functions J_n, Y_n, I_n, K_n of integer order 0..=6 and real argument.
//!
//! Every evaluation builds the whole ladder of orders 0..=7 at once (order 7 is
//! needed for the derivative of order 6). Regimes:
//!
//! * J: power series for x < 1, Miller downward recurrence normalized by
//!   J0 + 2 sum J_2k = 1 for x < 25, Hankel asymptotics plus upward recurrence beyond.
//! * Y: power series for x < 1, Neumann series over the Miller ladder for x < 25,
//!   Hankel asymptotics beyond; always upward recurrence from Y0, Y1.
//! * I: exponentially scaled; ascending series for x <= 30, asymptotic series beyond.
//! * K: exponentially scaled; ascending series for x <= 2, Steed's continued
//!   fraction beyond, K1 from the Wronskian for small x, upward recurrence.

use crate::error::{Error, Result};
use std::f64::consts::PI;

pub const MAX_ORDER: u32 = 6;
const LADDER: usize = 8;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_MAX: f64 = 1.0;
const HANKEL_MIN: f64 = 25.0;
const I_SERIES_MAX: f64 = 30.0;
const K_SERIES_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CylinderKind {
    J,
    Y,
    I,
    K,
}

impl CylinderKind {
    pub const ALL: [CylinderKind; 4] = [Self::J, Self::Y, Self::I, Self::K];
}

/// Value of the function of the given kind and order at `x`.
pub fn eval(kind: CylinderKind, order: u32, x: f64) -> Result<f64> {
    value_and_deriv(kind, order, x).map(|(v, _)| v)
}

/// First derivative with respect to `x`.
pub fn eval_deriv(kind: CylinderKind, order: u32, x: f64) -> Result<f64> {
    value_and_deriv(kind, order, x).map(|(_, d)| d)
}

/// Exponentially scaled value: `e^{-x} I_n(x)` and `e^{x} K_n(x)`; J and Y unscaled.
pub fn eval_scaled(kind: CylinderKind, order: u32, x: f64) -> Result<f64> {
    check(kind, order, x)?;
    let l = ladder(kind, x)?;
    Ok(l.values[order as usize])
}

/// Value and derivative from a single ladder evaluation.
pub fn value_and_deriv(kind: CylinderKind, order: u32, x: f64) -> Result<(f64, f64)> {
    check(kind, order, x)?;
    let l = ladder(kind, x)?;
    let n = order as usize;
    let v = &l.values;
    let d = match kind {
        CylinderKind::J | CylinderKind::Y => {
            if n == 0 {
                -v[1]
            } else {
                0.5 * (v[n - 1] - v[n + 1])
            }
        }
        CylinderKind::I => {
            if n == 0 {
                v[1]
            } else {
                0.5 * (v[n - 1] + v[n + 1])
            }
        }
        CylinderKind::K => {
            if n == 0 {
                -v[1]
            } else {
                -0.5 * (v[n - 1] + v[n + 1])
            }
        }
    };
    let scale = l.log_scale;
    if scale == 0.0 {
        return Ok((v[n], d));
    }
    let f = scale.exp();
    let (vs, ds) = (v[n] * f, d * f);
    let representable = |s: f64, raw: f64| s.is_finite() && (raw == 0.0 || s.abs() >= f64::MIN_POSITIVE);
    if !representable(vs, v[n]) || !representable(ds, d) {
        return Err(Error::Overflow(format!("{kind:?}_{order}({x}) outside f64 range")));
    }
    Ok((vs, ds))
}

fn check(kind: CylinderKind, order: u32, x: f64) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::Range(format!("order {order} exceeds {MAX_ORDER}")));
    }
    if x.is_nan() {
        return Err(Error::Domain("argument is NaN".into()));
    }
    match kind {
        CylinderKind::J | CylinderKind::I if x < 0.0 => Err(Error::Domain(format!("{kind:?} needs x >= 0, got {x}"))),
        CylinderKind::Y | CylinderKind::K if x <= 0.0 => Err(Error::Domain(format!("{kind:?} needs x > 0, got {x}"))),
        _ => Ok(()),
    }
}

/// Scaled values of orders 0..=7; true value = values[n] * exp(log_scale).
struct Ladder {
    values: [f64; LADDER],
    log_scale: f64,
}

fn ladder(kind: CylinderKind, x: f64) -> Result<Ladder> {
    match kind {
        CylinderKind::J => Ok(Ladder { values: j_ladder(x), log_scale: 0.0 }),
        CylinderKind::Y => {
            let v = y_ladder(x);
            if v.iter().any(|y| !y.is_finite()) {
                return Err(Error::Overflow(format!("Y ladder at x = {x}")));
            }
            Ok(Ladder { values: v, log_scale: 0.0 })
        }
        CylinderKind::I => Ok(Ladder { values: i_scaled_ladder(x), log_scale: x }),
        CylinderKind::K => {
            let v = k_scaled_ladder(x);
            if v.iter().any(|k| !k.is_finite()) {
                return Err(Error::Overflow(format!("K ladder at x = {x}")));
            }
            Ok(Ladder { values: v, log_scale: -x })
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn j_series(n: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let q = -h * h;
    let mut term = h.powi(n as i32) / factorial(n);
    let mut sum = term;
    for k in 1..60 {
        term *= q / (k as f64 * (n + k) as f64);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Miller ladder J_0..J_m for 0 < x < HANKEL_MIN, normalized by J0 + 2 sum J_2k = 1.
fn miller(x: f64) -> Vec<f64> {
    let m = 2 * ((x.ceil() as usize + 40) / 2);
    let mut j = vec![0.0; m + 2];
    j[m] = 1e-30;
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
            norm *= 1e-250;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j[k - 1];
        }
    }
    norm += j[0];
    for v in j.iter_mut() {
        *v /= norm;
    }
    j.truncate(m + 1);
    j
}

/// Hankel asymptotic P, Q for orders 0 and 1.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    (p, q)
}

fn hankel_jy(nu: f64, x: f64) -> (f64, f64) {
    let (p, q) = hankel_pq(nu, x);
    let chi = x - (0.5 * nu + 0.25) * PI;
    let (s, c) = chi.sin_cos();
    let a = (2.0 / (PI * x)).sqrt();
    (a * (p * c - q * s), a * (p * s + q * c))
}

fn j_ladder(x: f64) -> [f64; LADDER] {
    let mut out = [0.0; LADDER];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if x < SERIES_MAX {
        for (n, v) in out.iter_mut().enumerate() {
            *v = j_series(n, x);
        }
    } else if x < HANKEL_MIN {
        let j = miller(x);
        out.copy_from_slice(&j[..LADDER]);
    } else {
        out[0] = hankel_jy(0.0, x).0;
        out[1] = hankel_jy(1.0, x).0;
        for n in 1..LADDER - 1 {
            out[n + 1] = 2.0 * n as f64 / x * out[n] - out[n - 1];
        }
    }
    out
}

fn y01_series(x: f64) -> (f64, f64) {
    let h = 0.5 * x;
    let q = h * h;
    let lg = h.ln() + EULER_GAMMA;
    let j0 = j_series(0, x);
    let j1 = j_series(1, x);
    // Y0: sum_{k>=1} (-1)^{k+1} H_k q^k / (k!)^2
    let mut s0 = 0.0;
    let mut t = 1.0;
    let mut hk = 0.0;
    for k in 1..40 {
        t *= -q / (k as f64 * k as f64);
        hk += 1.0 / k as f64;
        s0 -= hk * t;
        if t.abs() < 1e-20 {
            break;
        }
    }
    let y0 = 2.0 / PI * (lg * j0 + s0);
    // Y1: -(1/pi) sum_k (-1)^k (psi(k+1) + psi(k+2)) h^{2k+1} / (k!(k+1)!)
    let mut s1 = 0.0;
    let mut t = h;
    let mut hk = 0.0;
    for k in 0..40 {
        if k > 0 {
            t *= -q / (k as f64 * (k + 1) as f64);
            hk += 1.0 / k as f64;
        }
        let psi_sum = 2.0 * hk + 1.0 / (k + 1) as f64 - 2.0 * EULER_GAMMA;
        s1 += psi_sum * t;
        if t.abs() < 1e-20 {
            break;
        }
    }
    let y1 = -2.0 / (PI * x) + 2.0 / PI * h.ln() * j1 - s1 / PI;
    (y0, y1)
}

fn y_ladder(x: f64) -> [f64; LADDER] {
    let (y0, y1) = if x < SERIES_MAX {
        y01_series(x)
    } else if x < HANKEL_MIN {
        let j = miller(x);
        let lg = (0.5 * x).ln() + EULER_GAMMA;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut k = 1;
        while 2 * k + 1 < j.len() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s0 += sign * j[2 * k] / k as f64;
            s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
            k += 1;
        }
        let y0 = 2.0 / PI * lg * j[0] - 4.0 / PI * s0;
        let y1 = -2.0 / PI * j[0] / x + 2.0 / PI * lg * j[1] + 2.0 / PI * s1;
        (y0, y1)
    } else {
        (hankel_jy(0.0, x).1, hankel_jy(1.0, x).1)
    };
    let mut out = [0.0; LADDER];
    out[0] = y0;
    out[1] = y1;
    for n in 1..LADDER - 1 {
        out[n + 1] = 2.0 * n as f64 / x * out[n] - out[n - 1];
    }
    out
}

fn i_scaled_ladder(x: f64) -> [f64; LADDER] {
    let mut out = [0.0; LADDER];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if x <= I_SERIES_MAX {
        let h = 0.5 * x;
        let q = h * h;
        let ex = (-x).exp();
        for (n, v) in out.iter_mut().enumerate() {
            let mut term = h.powi(n as i32) / factorial(n);
            let mut sum = term;
            for k in 1..200 {
                term *= q / (k as f64 * (n + k) as f64);
                sum += term;
                if term < 1e-18 * sum {
                    break;
                }
            }
            *v = sum * ex;
        }
    } else {
        let pre = 1.0 / (2.0 * PI * x).sqrt();
        for (n, v) in out.iter_mut().enumerate() {
            let mu = 4.0 * (n * n) as f64;
            let mut term = 1.0;
            let mut sum = 1.0;
            let mut last = f64::INFINITY;
            for k in 1..200 {
                let odd = (2 * k - 1) as f64;
                term *= -(mu - odd * odd) / (k as f64 * 8.0 * x);
                if term.abs() > last {
                    break;
                }
                last = term.abs();
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            *v = pre * sum;
        }
    }
    out
}

fn k0_scaled_series(x: f64) -> f64 {
    let h = 0.5 * x;
    let q = h * h;
    let i0 = {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= q / (k as f64 * k as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    };
    let mut term = 1.0;
    let mut hk = 0.0;
    let mut s = 0.0;
    for k in 1..60 {
        term *= q / (k as f64 * k as f64);
        hk += 1.0 / k as f64;
        s += term * hk;
        if term < 1e-18 {
            break;
        }
    }
    (-(h.ln() + EULER_GAMMA) * i0 + s) * x.exp()
}

/// Steed's CF2 (Temme) for K0, K1 at x > 2, scaled by e^x.
fn k01_scaled_cf(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        a -= 2.0 * i as f64;
        c = -a * c / (i as f64 + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

fn k_scaled_ladder(x: f64) -> [f64; LADDER] {
    let (k0, k1) = if x <= K_SERIES_MAX {
        let k0 = k0_scaled_series(x);
        let i = i_scaled_ladder(x);
        (k0, (1.0 / x - i[1] * k0) / i[0])
    } else {
        k01_scaled_cf(x)
    };
    let mut out = [0.0; LADDER];
    out[0] = k0;
    out[1] = k1;
    for n in 1..LADDER - 1 {
        out[n + 1] = out[n - 1] + 2.0 * n as f64 / x * out[n];
    }
    out
}
