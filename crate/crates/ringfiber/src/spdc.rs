//! Down-conversion amplitudes, densities and process enumeration.
//!
//! Conventions: frequencies in rad/s, propagation constants in rad/m, poling periods
//! in um. The pump amplitude is |A_p|^2 = P / (4 pi n_p eps0 c) for a pump of
//! (average) power P, so that `sum |Phi|^2 dw dw` is a pair rate in 1/s and the cw
//! marginal is a rate density in 1/s per rad/s. A QPM order m matches
//! `Delta beta = 2 pi m / Period`.

use crate::error::{Error, Result};
use crate::modesolver::{Component, GuidedMode, ModeProfile};
use crate::oam::{decompose, dominant_oam, selection_rule_ok, DEFAULT_L_MAX};
use crate::qpm::QpmGrating;
use crate::quadrature::RadialGrid;
use crate::units::{omega_from_um, um_from_omega, C, EPSILON_0};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Gaussian amplitudes beyond this many sigma are treated as zero.
const PUMP_CUTOFF_SIGMAS: f64 = 8.0;
/// Target spacing of overlap-table nodes, rad/s.
const TABLE_SPACING: f64 = 4e12;

#[derive(Debug, Clone)]
pub struct ProcessTriple {
    pub pump: GuidedMode,
    pub signal: GuidedMode,
    pub idler: GuidedMode,
    pub oam_tuple: (i32, i32, i32),
    /// every l tied for the top weight (two values for TE and TM)
    pub oam_sets: [Vec<i32>; 3],
}

fn mode_oam(m: &GuidedMode) -> Result<(i32, Vec<i32>)> {
    let (lo, hi) = m.omega_range();
    let w = 0.5 * (lo + hi);
    let w = if m.profile(w).is_ok() { w } else { lo };
    let s = decompose(m, Component::X, w, DEFAULT_L_MAX.max(m.n() as i32 + 2))?;
    let top = s.top();
    let set = s.probs.iter().filter(|(_, &p)| p >= top - 1e-9).map(|(&l, _)| l).collect();
    Ok((dominant_oam(&s)?, set))
}

impl ProcessTriple {
    pub fn new(pump: GuidedMode, signal: GuidedMode, idler: GuidedMode) -> Result<Self> {
        let (p, s, i) = (mode_oam(&pump)?, mode_oam(&signal)?, mode_oam(&idler)?);
        let oam_tuple = (p.0, s.0, i.0);
        Ok(ProcessTriple { pump, signal, idler, oam_tuple, oam_sets: [p.1, s.1, i.1] })
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.pump.full_label(), self.signal.full_label(), self.idler.full_label())
    }

    /// l_p = l_s + l_i for some choice of dominant values.
    pub fn oam_conserved(&self) -> bool {
        let [p, s, i] = &self.oam_sets;
        p.iter().any(|&lp| s.iter().any(|&ls| i.iter().any(|&li| selection_rule_ok(lp, ls, li))))
    }

    /// True when some transverse harmonics satisfy l_p = l_s + l_i. The overlap
    /// vanishes identically otherwise; unlike [`Self::oam_conserved`] this also
    /// counts weak sub-dominant harmonics.
    pub fn azimuthally_allowed(&self) -> bool {
        let (p, s, i) = (harmonic_support(&self.pump), harmonic_support(&self.signal), harmonic_support(&self.idler));
        p.iter().any(|&lp| s.iter().any(|&ls| i.iter().any(|&li| selection_rule_ok(lp, ls, li))))
    }

    /// Same process with signal and idler exchanged.
    pub fn swapped(&self) -> Self {
        let (p, s, i) = self.oam_tuple;
        let [sp, ss, si] = self.oam_sets.clone();
        ProcessTriple {
            pump: self.pump.clone(),
            signal: self.idler.clone(),
            idler: self.signal.clone(),
            oam_tuple: (p, i, s),
            oam_sets: [sp, si, ss],
        }
    }
}

/// Azimuthal orders present in the transverse (x, y) field of a mode.
pub fn harmonic_support(m: &GuidedMode) -> Vec<i32> {
    let h = m.harmonics();
    let mut ls: Vec<i32> = h.x.iter().chain(h.y.iter()).filter(|(_, w)| w.iter().any(|c| c.norm() > 0.0)).map(|(&l, _)| l).collect();
    ls.sort_unstable();
    ls.dedup();
    ls
}

/// beta_p(ws + wi) - beta_s(ws) - beta_i(wi), rad/m.
pub fn phase_mismatch(triple: &ProcessTriple, omega_s: f64, omega_i: f64) -> Result<f64> {
    Ok(triple.pump.beta(omega_s + omega_i)? - triple.signal.beta(omega_s)? - triple.idler.beta(omega_i)?)
}

/// Period (um) placing order-m phase matching exactly at (lambda_s, lambda_i).
pub fn recalibrate_period(triple: &ProcessTriple, lambda_s: f64, lambda_i: f64, order: i32) -> Result<f64> {
    if order == 0 {
        return Err(Error::Config("QPM order must be nonzero".into()));
    }
    let db = phase_mismatch(triple, omega_from_um(lambda_s), omega_from_um(lambda_i))?;
    if db == 0.0 {
        return Err(Error::Degenerate(format!("{} is phase matched without poling", triple.label())));
    }
    let period = 2.0 * PI * order as f64 / db * 1e6;
    if period <= 0.0 {
        return Err(Error::Degenerate(format!("order {order} has the wrong sign for mismatch {db:.6e} rad/m of {}", triple.label())));
    }
    Ok(period)
}

/// Real radial functions (a, b, F) of one mode on the quadrature nodes.
fn radial_table(p: &ModeProfile, nodes: &[f64]) -> Result<Vec<[f64; 3]>> {
    nodes
        .iter()
        .map(|&r| {
            let v = p.radial(r)?;
            Ok([v.a, v.b, v.f])
        })
        .collect()
}

/// Harmonic (l, weights) lists of the x and y components.
struct Harm {
    x: Vec<(i32, [Complex64; 3])>,
    y: Vec<(i32, [Complex64; 3])>,
}

impl Harm {
    fn of(m: &GuidedMode) -> Self {
        let h = m.harmonics();
        Harm { x: h.x.into_iter().collect(), y: h.y.into_iter().collect() }
    }
}

fn values(h: &[(i32, [Complex64; 3])], f: &[f64; 3]) -> Vec<(i32, Complex64)> {
    h.iter().map(|(l, w)| (*l, w[0] * f[0] + w[1] * f[1] + w[2] * f[2])).collect()
}

/// Transverse overlap evaluator with fixed quadrature nodes.
struct Contractor {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    hp: Harm,
    hs: Harm,
    hi: Harm,
    chi_xxx: f64,
    chi_xyy: f64,
}

impl Contractor {
    fn new(triple: &ProcessTriple, grating: &QpmGrating, ws: f64, wi: f64) -> Result<Self> {
        let p = triple.pump.profile(clamp_to(&triple.pump, ws + wi))?;
        let s = triple.signal.profile(ws)?;
        let i = triple.idler.profile(wi)?;
        let w = 0.5 * (p.transverse_wavenumbers()[2] + s.transverse_wavenumbers()[2] + i.transverse_wavenumbers()[2]);
        let geo = triple.signal.curve().fiber.geometry;
        let grid = RadialGrid::new(geo.r1, geo.r2, w, 1e-13);
        Ok(Contractor {
            nodes: grid.nodes,
            weights: grid.weights,
            hp: Harm::of(&triple.pump),
            hs: Harm::of(&triple.signal),
            hi: Harm::of(&triple.idler),
            chi_xxx: grating.chi_xxx,
            chi_xyy: grating.chi_xyy,
        })
    }

    /// int dA chi : e_p conj(e_s) conj(e_i) in SI units (1/V) from tables of radial functions.
    fn contract(&self, rp: &[[f64; 3]], rs: &[[f64; 3]], ri: &[[f64; 3]]) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for k in 0..self.nodes.len() {
            let (px, py) = (values(&self.hp.x, &rp[k]), values(&self.hp.y, &rp[k]));
            let (sx, sy) = (values(&self.hs.x, &rs[k]), values(&self.hs.y, &rs[k]));
            let (ix, iy) = (values(&self.hi.x, &ri[k]), values(&self.hi.y, &ri[k]));
            let pick = |v: &[(i32, Complex64)], l: i32| v.iter().find(|(m, _)| *m == l).map(|(_, c)| *c);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut term = |p: &[(i32, Complex64)], s: &[(i32, Complex64)], i: &[(i32, Complex64)], chi: f64| {
                for (ls, cs) in s {
                    for (li, ci) in i {
                        if let Some(cp) = pick(p, ls + li) {
                            acc += chi * cp * cs.conj() * ci.conj();
                        }
                    }
                }
            };
            term(&px, &sx, &ix, self.chi_xxx);
            term(&px, &sy, &iy, self.chi_xyy);
            term(&py, &sy, &ix, self.chi_xyy);
            term(&py, &sx, &iy, self.chi_xyy);
            total += self.weights[k] * self.nodes[k] * acc;
        }
        // 2 pi from the azimuthal integral; pm/V -> m/V and um-normalized fields -> SI
        2.0 * PI * total * 1e-12 * 1e6
    }

    fn direct(&self, triple: &ProcessTriple, ws: f64, wi: f64) -> Result<Complex64> {
        let rp = radial_table(&triple.pump.profile(clamp_to(&triple.pump, ws + wi))?, &self.nodes)?;
        let rs = radial_table(&triple.signal.profile(ws)?, &self.nodes)?;
        let ri = radial_table(&triple.idler.profile(wi)?, &self.nodes)?;
        Ok(self.contract(&rp, &rs, &ri))
    }
}

fn clamp_to(m: &GuidedMode, w: f64) -> f64 {
    let (lo, hi) = m.omega_range();
    w.clamp(lo, hi)
}

/// Transverse integral int dA chi : e_p(ws+wi) conj(e_s(ws)) conj(e_i(wi)), 1/V.
pub fn transverse_overlap(triple: &ProcessTriple, grating: &QpmGrating, omega_s: f64, omega_i: f64) -> Result<Complex64> {
    Contractor::new(triple, grating, omega_s, omega_i)?.direct(triple, omega_s, omega_i)
}

/// sqrt(2 pi) chi~(-Delta beta) times the transverse integral, m/V.
pub fn overlap(triple: &ProcessTriple, omega_s: f64, omega_i: f64, grating: &QpmGrating) -> Result<Complex64> {
    let db = phase_mismatch(triple, omega_s, omega_i)?;
    Ok((2.0 * PI).sqrt() * grating.spectrum(-db) * transverse_overlap(triple, grating, omega_s, omega_i)?)
}

fn lagrange4(t: f64, n: usize) -> (usize, [f64; 4], usize) {
    if n == 1 {
        return (0, [1.0, 0.0, 0.0, 0.0], 1);
    }
    let m = n.min(4);
    let base = ((t.floor() as isize) - (m as isize / 2 - 1)).clamp(0, (n - m) as isize) as usize;
    let u = t - base as f64;
    let mut w = [0.0; 4];
    for j in 0..m {
        let mut p = 1.0;
        for k in 0..m {
            if k != j {
                p *= (u - k as f64) / (j as f64 - k as f64);
            }
        }
        w[j] = p;
    }
    (base, w, m)
}

/// Transverse overlap sampled on a coarse uniform grid and interpolated (cubic).
#[derive(Debug, Clone)]
pub struct OverlapTable {
    s0: f64,
    ds: f64,
    ns: usize,
    i0: f64,
    di: f64,
    ni: usize,
    /// along the line w_i = pump_omega - w_s when set
    line: Option<f64>,
    vals: Vec<Complex64>,
}

fn node_count(span: f64) -> usize {
    ((span / TABLE_SPACING).ceil() as usize + 1).clamp(6, 64)
}

impl OverlapTable {
    /// Rectangle [s_lo, s_hi] x [i_lo, i_hi] of signal and idler frequencies.
    pub fn build(triple: &ProcessTriple, grating: &QpmGrating, s: (f64, f64), i: (f64, f64)) -> Result<Self> {
        let (ns, ni) = (node_count(s.1 - s.0), node_count(i.1 - i.0));
        let ds = (s.1 - s.0) / (ns - 1) as f64;
        let di = (i.1 - i.0) / (ni - 1) as f64;
        let c = Contractor::new(triple, grating, 0.5 * (s.0 + s.1), 0.5 * (i.0 + i.1))?;
        let rs: Vec<_> = (0..ns).map(|k| radial_table(&triple.signal.profile(s.0 + ds * k as f64)?, &c.nodes)).collect::<Result<_>>()?;
        let ri: Vec<_> = (0..ni).map(|k| radial_table(&triple.idler.profile(i.0 + di * k as f64)?, &c.nodes)).collect::<Result<_>>()?;
        let vals = (0..ns * ni)
            .into_par_iter()
            .map(|idx| {
                let (a, b) = (idx / ni, idx % ni);
                let wp = clamp_to(&triple.pump, s.0 + ds * a as f64 + i.0 + di * b as f64);
                let rp = radial_table(&triple.pump.profile(wp)?, &c.nodes)?;
                Ok(c.contract(&rp, &rs[a], &ri[b]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OverlapTable { s0: s.0, ds, ns, i0: i.0, di, ni, line: None, vals })
    }

    /// Samples along w_i = omega_p - w_s for w_s in [s_lo, s_hi] (cw pumping).
    pub fn along_line(triple: &ProcessTriple, grating: &QpmGrating, omega_p: f64, s: (f64, f64)) -> Result<Self> {
        let ns = node_count(s.1 - s.0);
        let ds = (s.1 - s.0) / (ns - 1) as f64;
        let c = Contractor::new(triple, grating, 0.5 * (s.0 + s.1), omega_p - 0.5 * (s.0 + s.1))?;
        let rp = radial_table(&triple.pump.profile(clamp_to(&triple.pump, omega_p))?, &c.nodes)?;
        let vals = (0..ns)
            .into_par_iter()
            .map(|k| {
                let ws = s.0 + ds * k as f64;
                let rs = radial_table(&triple.signal.profile(ws)?, &c.nodes)?;
                let ri = radial_table(&triple.idler.profile(omega_p - ws)?, &c.nodes)?;
                Ok(c.contract(&rp, &rs, &ri))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OverlapTable { s0: s.0, ds, ns, i0: 0.0, di: 0.0, ni: 1, line: Some(omega_p), vals })
    }

    pub fn eval(&self, omega_s: f64, omega_i: f64) -> Complex64 {
        let ts = if self.ns > 1 { ((omega_s - self.s0) / self.ds).clamp(0.0, (self.ns - 1) as f64) } else { 0.0 };
        let (bs, ws, ms) = lagrange4(ts, self.ns);
        if self.line.is_some() {
            return (0..ms).map(|a| ws[a] * self.vals[bs + a]).sum();
        }
        let ti = if self.ni > 1 { ((omega_i - self.i0) / self.di).clamp(0.0, (self.ni - 1) as f64) } else { 0.0 };
        let (bi, wi, mi) = lagrange4(ti, self.ni);
        let mut v = Complex64::new(0.0, 0.0);
        for a in 0..ms {
            for b in 0..mi {
                v += ws[a] * wi[b] * self.vals[(bs + a) * self.ni + bi + b];
            }
        }
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PumpKind {
    Cw,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSpectrum {
    pub kind: PumpKind,
    pub omega0: f64,
    /// rad/s; ignored for cw
    pub sigma: f64,
    /// W (cw power or average power)
    pub power: f64,
}

impl PumpSpectrum {
    pub fn cw(lambda_um: f64, power: f64) -> Self {
        PumpSpectrum { kind: PumpKind::Cw, omega0: omega_from_um(lambda_um), sigma: 0.0, power }
    }

    /// Gaussian amplitude with width sigma given in nm of wavelength.
    pub fn gaussian(lambda_um: f64, sigma_nm: f64, power: f64) -> Self {
        PumpSpectrum { kind: PumpKind::Gaussian, omega0: omega_from_um(lambda_um), sigma: domega(lambda_um, sigma_nm), power }
    }

    pub fn lambda_um(&self) -> f64 {
        um_from_omega(self.omega0)
    }

    /// Normalized amplitude sqrt(sqrt(2/pi)/s) exp(-(w - w0)^2/s^2) with the given width.
    pub fn amplitude_with(&self, sigma: f64, omega: f64) -> f64 {
        let x = (omega - self.omega0) / sigma;
        ((2.0 / PI).sqrt() / sigma).sqrt() * (-x * x).exp()
    }

    pub fn amplitude(&self, omega: f64) -> f64 {
        self.amplitude_with(self.sigma, omega)
    }

    /// |A_p|^2 in V^2 for pump effective index n_p.
    pub fn a_p_sq(&self, n_p: f64) -> f64 {
        self.power / (4.0 * PI * n_p * EPSILON_0 * C)
    }
}

/// Width in rad/s of a wavelength interval (nm) at lambda (um).
pub fn domega(lambda_um: f64, dlambda_nm: f64) -> f64 {
    2.0 * PI * C * dlambda_nm * 1e-9 / (lambda_um * 1e-6).powi(2)
}

/// Converts a density per rad/s at lambda (um) into a density per nm.
pub fn per_nm(lambda_um: f64, per_omega: f64) -> f64 {
    per_omega * domega(lambda_um, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0 && len >= 2 && start > 0.0) {
            return Err(Error::Config(format!("bad frequency grid start {start} step {step} len {len}")));
        }
        Ok(FrequencyGrid { start, step, len })
    }

    pub fn centered(center: f64, span: f64, len: usize) -> Result<Self> {
        Self::new(center - 0.5 * span, span / (len - 1).max(1) as f64, len)
    }

    /// Grid spanning a wavelength interval (um), uniform in frequency.
    pub fn from_wavelengths(lambda_lo: f64, lambda_hi: f64, len: usize) -> Result<Self> {
        let (a, b) = (omega_from_um(lambda_hi), omega_from_um(lambda_lo));
        Self::new(a, (b - a) / (len - 1).max(1) as f64, len)
    }

    pub fn at(&self, k: usize) -> f64 {
        self.start + self.step * k as f64
    }

    pub fn end(&self) -> f64 {
        self.at(self.len - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.at(k)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Jsa {
    pub omega_s: FrequencyGrid,
    pub omega_i: FrequencyGrid,
    /// rows: signal, columns: idler
    pub values: DMatrix<Complex64>,
    pub triple_label: String,
    pub normalized: bool,
    /// effective indices of signal and idler along the axes
    pub n_s: Vec<f64>,
    pub n_i: Vec<f64>,
}

/// Pump width used on a grid for cw pumping: two sigma span three samples.
pub fn cw_grid_sigma(ws: &FrequencyGrid, wi: &FrequencyGrid) -> f64 {
    1.5 * ws.step.max(wi.step)
}

/// Prefactor -i sqrt(ws wi)/(c sqrt(ns ni)), 1/m.
fn prefactor(triple: &ProcessTriple, ws: f64, wi: f64) -> Result<Complex64> {
    let (ns, ni) = (triple.signal.n_eff(ws)?, triple.idler.n_eff(wi)?);
    Ok(Complex64::new(0.0, -(ws * wi).sqrt() / (C * (ns * ni).sqrt())))
}

/// Two-photon spectral amplitude on a grid (1/sqrt(rad/s) scaled to pairs).
pub fn jsa(triple: &ProcessTriple, pump: &PumpSpectrum, grating: &QpmGrating, ws: &FrequencyGrid, wi: &FrequencyGrid) -> Result<Jsa> {
    let sigma = match pump.kind {
        PumpKind::Cw => cw_grid_sigma(ws, wi),
        PumpKind::Gaussian => pump.sigma,
    };
    let table = OverlapTable::build(triple, grating, (ws.start, ws.end()), (wi.start, wi.end()))?;
    jsa_with_table(triple, pump, grating, ws, wi, sigma, &table)
}

pub fn jsa_with_table(
    triple: &ProcessTriple,
    pump: &PumpSpectrum,
    grating: &QpmGrating,
    ws: &FrequencyGrid,
    wi: &FrequencyGrid,
    sigma: f64,
    table: &OverlapTable,
) -> Result<Jsa> {
    let n_p = triple.pump.n_eff(clamp_to(&triple.pump, pump.omega0))?;
    let ap = pump.a_p_sq(n_p).sqrt();
    let root2pi = (2.0 * PI).sqrt();
    let sig: Vec<f64> = (0..ws.len).map(|k| triple.signal.beta(ws.at(k))).collect::<Result<_>>()?;
    let idl: Vec<f64> = (0..wi.len).map(|k| triple.idler.beta(wi.at(k))).collect::<Result<_>>()?;
    let rows: Vec<Vec<Complex64>> = (0..ws.len)
        .into_par_iter()
        .map(|a| {
            let w_s = ws.at(a);
            let mut row = vec![Complex64::new(0.0, 0.0); wi.len];
            for (b, out) in row.iter_mut().enumerate() {
                let w_i = wi.at(b);
                let x = (w_s + w_i - pump.omega0) / sigma;
                if x.abs() > PUMP_CUTOFF_SIGMAS {
                    continue;
                }
                let db = triple.pump.beta(w_s + w_i)? - sig[a] - idl[b];
                let i_val = root2pi * grating.spectrum(-db) * table.eval(w_s, w_i);
                *out = prefactor(triple, w_s, w_i)? * ap * pump.amplitude_with(sigma, w_s + w_i) * i_val;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(ws.len, wi.len, |a, b| rows[a][b]);
    let n_s = (0..ws.len).map(|k| triple.signal.n_eff(ws.at(k))).collect::<Result<_>>()?;
    let n_i = (0..wi.len).map(|k| triple.idler.n_eff(wi.at(k))).collect::<Result<_>>()?;
    Ok(Jsa { omega_s: *ws, omega_i: *wi, values, triple_label: triple.label(), normalized: false, n_s, n_i })
}

impl Jsa {
    /// sum |Phi|^2 dws dwi (pairs per second for the configured pump power).
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.omega_s.step * self.omega_i.step
    }

    pub fn normalized(&self) -> Result<Jsa> {
        let n = self.norm_sq();
        if !(n > 0.0) {
            return Err(Error::Degenerate(format!("zero two-photon amplitude for {}", self.triple_label)));
        }
        let mut out = self.clone();
        out.values /= Complex64::new(n.sqrt(), 0.0);
        out.normalized = true;
        Ok(out)
    }

    /// Samples |Phi| along a line through (ws0, wi0) with direction (dws, dwi) per unit t.
    pub fn cut(&self, ws0: f64, wi0: f64, dir: (f64, f64), ts: &[f64]) -> Vec<f64> {
        let a = pair_density(self).map(|v| v.sqrt());
        ts.iter()
            .map(|&t| {
                let x = (ws0 + t * dir.0 - self.omega_s.start) / self.omega_s.step;
                let y = (wi0 + t * dir.1 - self.omega_i.start) / self.omega_i.step;
                if x < 0.0 || y < 0.0 || x > (self.omega_s.len - 1) as f64 || y > (self.omega_i.len - 1) as f64 {
                    return 0.0;
                }
                let (i, j) = ((x.floor() as usize).min(self.omega_s.len - 2), (y.floor() as usize).min(self.omega_i.len - 2));
                let (u, v) = (x - i as f64, y - j as f64);
                (1.0 - u) * (1.0 - v) * a[(i, j)]
                    + u * (1.0 - v) * a[(i + 1, j)]
                    + (1.0 - u) * v * a[(i, j + 1)]
                    + u * v * a[(i + 1, j + 1)]
            })
            .collect()
    }
}

pub fn pair_density(jsa: &Jsa) -> DMatrix<f64> {
    jsa.values.map(|v| v.norm_sqr())
}

/// N_s(ws) = int N(ws, wi) dwi.
pub fn signal_density(jsa: &Jsa) -> Vec<f64> {
    jsa.values.row_iter().map(|r| r.iter().map(|v| v.norm_sqr()).sum::<f64>() * jsa.omega_i.step).collect()
}

/// N_i(wi) = int N(ws, wi) dws.
pub fn idler_density(jsa: &Jsa) -> Vec<f64> {
    jsa.values.column_iter().map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>() * jsa.omega_s.step).collect()
}

/// Exact cw limit of the signal marginal: pairs per second per rad/s at each signal
/// frequency, with the idler at omega_p - omega_s.
pub fn cw_signal_density(triple: &ProcessTriple, pump: &PumpSpectrum, grating: &QpmGrating, ws: &FrequencyGrid) -> Result<Vec<f64>> {
    let table = OverlapTable::along_line(triple, grating, pump.omega0, (ws.start, ws.end()))?;
    cw_signal_density_with_table(triple, pump, grating, ws, &table)
}

pub fn cw_signal_density_with_table(
    triple: &ProcessTriple,
    pump: &PumpSpectrum,
    grating: &QpmGrating,
    ws: &FrequencyGrid,
    table: &OverlapTable,
) -> Result<Vec<f64>> {
    Ok(cw_amplitude_with_table(triple, pump, grating, ws, table)?.iter().map(|v| v.norm_sqr()).collect())
}

/// Complex cw amplitude K(w_s) with |K|^2 the rate density of [`cw_signal_density`].
pub fn cw_amplitude(triple: &ProcessTriple, pump: &PumpSpectrum, grating: &QpmGrating, ws: &FrequencyGrid) -> Result<Vec<Complex64>> {
    let table = OverlapTable::along_line(triple, grating, pump.omega0, (ws.start, ws.end()))?;
    cw_amplitude_with_table(triple, pump, grating, ws, &table)
}

pub fn cw_amplitude_with_table(
    triple: &ProcessTriple,
    pump: &PumpSpectrum,
    grating: &QpmGrating,
    ws: &FrequencyGrid,
    table: &OverlapTable,
) -> Result<Vec<Complex64>> {
    let n_p = triple.pump.n_eff(pump.omega0)?;
    let ap = pump.a_p_sq(n_p).sqrt();
    let root2pi = (2.0 * PI).sqrt();
    (0..ws.len)
        .map(|k| {
            let w_s = ws.at(k);
            let w_i = pump.omega0 - w_s;
            let db = phase_mismatch(triple, w_s, w_i)?;
            let i_val = root2pi * grating.spectrum(-db) * table.eval(w_s, w_i);
            Ok(prefactor(triple, w_s, w_i)? * i_val * ap)
        })
        .collect()
}

/// Full width at half maximum of the peak containing the global maximum of y(x),
/// with linear interpolation of the crossings. None when a crossing is off-grid.
pub fn fwhm(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (k, &m) = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(m > 0.0) {
        return None;
    }
    let h = 0.5 * m;
    let mut lo = None;
    for j in (0..k).rev() {
        if ys[j] < h {
            let t = (h - ys[j]) / (ys[j + 1] - ys[j]);
            lo = Some(xs[j] + t * (xs[j + 1] - xs[j]));
            break;
        }
    }
    let mut hi = None;
    for j in k + 1..ys.len() {
        if ys[j] < h {
            let t = (h - ys[j - 1]) / (ys[j] - ys[j - 1]);
            hi = Some(xs[j - 1] + t * (xs[j] - xs[j - 1]));
            break;
        }
    }
    Some((hi? - lo?).abs())
}

/// Indices of resolvable peaks of y: local maxima above `rel_threshold` of the global
/// maximum, where two maxima count once unless y dips below half the smaller one
/// between them.
pub fn count_peaks(ys: &[f64], rel_threshold: f64) -> Vec<usize> {
    let top = ys.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(top > 0.0) {
        return Vec::new();
    }
    let mut peaks: Vec<usize> = Vec::new();
    for k in 0..ys.len() {
        let left = k == 0 || ys[k - 1] < ys[k];
        let right = k + 1 == ys.len() || ys[k + 1] <= ys[k];
        if !(left && right && ys[k] >= rel_threshold * top) {
            continue;
        }
        if let Some(&last) = peaks.last() {
            let dip = ys[last..=k].iter().fold(f64::INFINITY, |a, &b| a.min(b));
            if dip >= 0.5 * ys[last].min(ys[k]) {
                if ys[k] > ys[last] {
                    *peaks.last_mut().unwrap() = k;
                }
                continue;
            }
        }
        peaks.push(k);
    }
    peaks
}

/// A triple found by [`enumerate_triples`] with its strongest point in the window.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub triple: ProcessTriple,
    pub order: i32,
    /// min over the window of |Delta beta - 2 pi m / Period|, rad/m
    pub detuning: f64,
    /// signal wavelength (um) of the strongest |overlap|
    pub peak_lambda_s: f64,
    /// max |sqrt(2 pi) chi~ T| over the window, m/V
    pub peak: f64,
}

/// Every (signal, idler) pair from `modes` that couples to `pump` and is quasi-phase
/// matched somewhere in the signal window, strongest first.
pub fn enumerate_triples(
    pump: &GuidedMode,
    modes: &[GuidedMode],
    grating: &QpmGrating,
    omega_p: f64,
    lambda_s: (f64, f64),
    orders: &[i32],
) -> Result<Vec<Candidate>> {
    let samples = 400;
    let lobe = 2.0 * PI / (grating.length_um() * 1e-6);
    let ws: Vec<f64> =
        (0..samples).map(|k| omega_from_um(lambda_s.0 + (lambda_s.1 - lambda_s.0) * k as f64 / (samples - 1) as f64)).collect();
    let centre = omega_from_um(0.5 * (lambda_s.0 + lambda_s.1));
    let mut raw = Vec::new();
    for s in modes {
        for i in modes {
            let covered = |m: &GuidedMode, w: f64| m.n_eff(w).is_ok();
            if !ws.iter().all(|&w| covered(s, w) && covered(i, omega_p - w)) {
                continue;
            }
            let triple = ProcessTriple::new(pump.clone(), s.clone(), i.clone())?;
            let t0 = transverse_overlap(&triple, grating, centre, omega_p - centre)?;
            raw.push((triple, t0));
        }
    }
    let tmax = raw.iter().fold(0.0f64, |m, (_, t)| m.max(t.norm()));
    let mut out = Vec::new();
    for (triple, t0) in raw {
        if !(t0.norm() > 1e-10 * tmax) {
            continue;
        }
        let db: Vec<f64> = ws.iter().map(|&w| phase_mismatch(&triple, w, omega_p - w)).collect::<Result<_>>()?;
        for &m in orders {
            let k = 2.0 * PI * m as f64 / (grating.period * 1e-6);
            let det: Vec<f64> = db.iter().map(|d| d - k).collect();
            let crosses = det.windows(2).any(|p| p[0] * p[1] <= 0.0);
            let detuning = det.iter().fold(f64::INFINITY, |a, d| a.min(d.abs()));
            if !(crosses || detuning <= lobe) {
                continue;
            }
            let c = Contractor::new(&triple, grating, centre, omega_p - centre)?;
            let mut best = (0.0, lambda_s.0);
            for (j, &w) in ws.iter().enumerate() {
                let v = (2.0 * PI).sqrt() * grating.spectrum(-db[j]).norm() * c.direct(&triple, w, omega_p - w)?.norm();
                if v > best.0 {
                    best = (v, um_from_omega(w));
                }
            }
            out.push(Candidate {
                triple: triple.clone(),
                order: m,
                detuning: if crosses { 0.0 } else { detuning },
                peak_lambda_s: best.1,
                peak: best.0,
            });
        }
    }
    out.sort_by(|a, b| b.peak.total_cmp(&a.peak));
    Ok(out)
}
