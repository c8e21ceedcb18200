//! Vector guided modes of a three-layer ring fiber.
//!
//! Longitudinal fields are written as
//! `e_z = F(r) sin(n theta + phi)` and `Z0 h_z = G(r) cos(n theta + phi)`, with
//! `G = A0 I | A1 J + B1 Y | B2 K` and `F = C0 I | C1 J + D1 Y | D2 K` in the inner
//! cladding, ring core and outer cladding. The coefficient octet is stored in the
//! order `[A0, A1, B1, B2, C0, C1, D1, D2]`. Magnetic fields are reported as
//! `Z0 h`, which carries the same units as `e`.
//!
//! Lengths are in micrometres, propagation constants in rad/um internally;
//! [`GuidedMode::beta`] reports rad/m.

use crate::error::{Error, Result};
use crate::materials::RegionStack;
use crate::quadrature::RadialGrid;
use crate::specfun::{value_and_deriv, CylinderKind, MAX_ORDER};
use crate::units::{k0_per_um, omega_from_um, um_from_omega};
use nalgebra::{DMatrix, SMatrix};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_SCAN_POINTS: usize = 400;
pub const ROOT_TOL: f64 = 1e-12;
pub const SINGULAR_RATIO_MAX: f64 = 1e-8;
pub const CONTINUITY_TOL: f64 = 1e-6;
pub const DEFAULT_STEP_NM: f64 = 0.25;
const WINDOW_MARGIN: f64 = 1e-9;
const TAIL_TOL: f64 = 1e-12;

type M8 = SMatrix<f64, 8, 8>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberGeometry {
    pub r1: f64,
    pub r2: f64,
}

impl FiberGeometry {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        if !(r1 > 0.0 && r2 > r1 && r2.is_finite()) {
            return Err(Error::Config(format!("ring radii must satisfy 0 < r1 < r2, got {r1}, {r2}")));
        }
        Ok(FiberGeometry { r1, r2 })
    }

    pub fn standard() -> Self {
        FiberGeometry { r1: 4.0, r2: 5.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingFiber {
    pub geometry: FiberGeometry,
    pub stack: RegionStack,
}

impl RingFiber {
    pub fn new(geometry: FiberGeometry, stack: RegionStack) -> Self {
        RingFiber { geometry, stack }
    }

    pub fn standard() -> Self {
        RingFiber { geometry: FiberGeometry::standard(), stack: RegionStack::standard() }
    }

    /// Open interval of effective indices in which a mode is guided.
    pub fn guidance_window(&self, omega: f64) -> Result<(f64, f64)> {
        let e = self.stack.permittivities(omega)?;
        Ok((e[0].max(e[2]).sqrt(), e[1].sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    TE,
    TM,
    HE,
    EH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    V,
    H,
    R,
    L,
    TE,
    TM,
}

impl Polarization {
    /// Weights of the phi = 0 and phi = pi/2 solutions.
    pub fn weights(self) -> [Complex64; 2] {
        let s = FRAC_1_SQRT_2;
        match self {
            Polarization::V | Polarization::TE => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            Polarization::H | Polarization::TM => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            Polarization::R => [Complex64::new(s, 0.0), Complex64::new(0.0, -s)],
            Polarization::L => [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Polarization::V => "V",
            Polarization::H => "H",
            Polarization::R => "R",
            Polarization::L => "L",
            Polarization::TE | Polarization::TM => "",
        }
    }
}

/// Which part of the boundary system is scanned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Full,
    TE,
    TM,
}

const TE_ROWS: [usize; 4] = [1, 2, 5, 6];
const TM_ROWS: [usize; 4] = [0, 3, 4, 7];

/// Transverse wavenumbers (w0, w1, w2) in rad/um.
pub fn transverse_wavenumbers(stack: &RegionStack, geometry: &FiberGeometry, n_eff: f64, omega: f64) -> Result<[f64; 3]> {
    let _ = geometry;
    let eps = stack.permittivities(omega)?;
    check_window(&eps, n_eff)?;
    let k0 = k0_per_um(omega);
    Ok([k0 * (n_eff * n_eff - eps[0]).sqrt(), k0 * (eps[1] - n_eff * n_eff).sqrt(), k0 * (n_eff * n_eff - eps[2]).sqrt()])
}

fn check_window(eps: &[f64; 3], n_eff: f64) -> Result<()> {
    let (lo, hi) = (eps[0].max(eps[2]).sqrt(), eps[1].sqrt());
    if !(n_eff > lo && n_eff < hi) {
        return Err(Error::Domain(format!("n_eff {n_eff} outside guidance window ({lo}, {hi})")));
    }
    Ok(())
}

/// Everything fixed by (n, omega, n_eff).
#[derive(Debug, Clone, Copy)]
struct Setup {
    n: u32,
    k0: f64,
    beta: f64,
    eps: [f64; 3],
    kappa: [f64; 3],
    w: [f64; 3],
    r1: f64,
    r2: f64,
}

impl Setup {
    fn new(fiber: &RingFiber, n: u32, omega: f64, n_eff: f64) -> Result<Self> {
        let eps = fiber.stack.permittivities(omega)?;
        check_window(&eps, n_eff)?;
        let k0 = k0_per_um(omega);
        let beta = n_eff * k0;
        let kappa = [eps[0] * k0 * k0 - beta * beta, eps[1] * k0 * k0 - beta * beta, eps[2] * k0 * k0 - beta * beta];
        let w = [(-kappa[0]).sqrt(), kappa[1].sqrt(), (-kappa[2]).sqrt()];
        Ok(Setup { n, k0, beta, eps, kappa, w, r1: fiber.geometry.r1, r2: fiber.geometry.r2 })
    }

    fn region(&self, r: f64) -> usize {
        if r < self.r1 {
            0
        } else if r <= self.r2 {
            1
        } else {
            2
        }
    }

    /// Unscaled basis function of column slot 0..3 (I, J, Y, K) and its r-derivative.
    fn basis(&self, slot: usize, r: f64) -> Result<(f64, f64)> {
        let (kind, w) = match slot {
            0 => (CylinderKind::I, self.w[0]),
            1 => (CylinderKind::J, self.w[1]),
            2 => (CylinderKind::Y, self.w[1]),
            _ => (CylinderKind::K, self.w[2]),
        };
        let (v, d) = value_and_deriv(kind, self.n, w * r)?;
        Ok((v, w * d))
    }

    fn slot_region(slot: usize) -> usize {
        match slot {
            0 => 0,
            1 | 2 => 1,
            _ => 2,
        }
    }

    fn column_scales(&self) -> Result<[f64; 4]> {
        let i = self.basis(0, self.r1)?.0;
        let j = (self.basis(1, self.r1)?.0.powi(2) + self.basis(1, self.r2)?.0.powi(2)).sqrt();
        let y = (self.basis(2, self.r1)?.0.powi(2) + self.basis(2, self.r2)?.0.powi(2)).sqrt();
        let k = self.basis(3, self.r2)?.0;
        let s = [i, j, y, k];
        if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Overflow(format!("basis scaling {s:?}")));
        }
        Ok(s)
    }

    /// Column-scaled boundary matrix (rows not yet normalized) and the column scales.
    fn matrix(&self) -> Result<(M8, [f64; 4])> {
        let s = self.column_scales()?;
        let mut m = M8::zeros();
        let nf = self.n as f64;
        for (idx, (r, inside, outside)) in [(self.r1, 0usize, 1usize), (self.r2, 1, 2)].into_iter().enumerate() {
            let row = 4 * idx;
            for slot in 0..4 {
                let q = Self::slot_region(slot);
                let sign = if q == inside {
                    1.0
                } else if q == outside {
                    -1.0
                } else {
                    continue;
                };
                let (v, d) = self.basis(slot, r)?;
                let (v, d) = (v / s[slot], d / s[slot]);
                let kap = self.kappa[q];
                // G column
                m[(row + 1, slot)] += sign * v;
                m[(row + 2, slot)] += sign * (-self.k0 * d) / kap;
                m[(row + 3, slot)] += sign * (-nf * self.beta * v / r) / kap;
                // F column
                m[(row, 4 + slot)] += sign * v;
                m[(row + 2, 4 + slot)] += sign * (nf * self.beta * v / r) / kap;
                m[(row + 3, 4 + slot)] += sign * (self.k0 * self.eps[q] * d) / kap;
            }
        }
        Ok((m, s))
    }
}

fn normalize_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let mx = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if mx > 0.0 {
            row /= mx;
        }
    }
}

fn block_matrix(m: &M8, block: Block) -> DMatrix<f64> {
    let mut out = match block {
        Block::Full => DMatrix::from_iterator(8, 8, m.iter().copied()),
        Block::TE => DMatrix::from_fn(4, 4, |i, j| m[(TE_ROWS[i], j)]),
        Block::TM => DMatrix::from_fn(4, 4, |i, j| m[(TM_ROWS[i], 4 + j)]),
    };
    normalize_rows(&mut out);
    out
}

/// Row-normalized 8x8 boundary matrix at the given effective index.
pub fn boundary_matrix(fiber: &RingFiber, n: u32, omega: f64, n_eff: f64) -> Result<DMatrix<f64>> {
    let (m, _) = Setup::new(fiber, n, omega, n_eff)?.matrix()?;
    Ok(block_matrix(&m, Block::Full))
}

/// Determinant of the row-normalized boundary system for one block.
pub fn block_det(fiber: &RingFiber, n: u32, omega: f64, n_eff: f64, block: Block) -> Result<f64> {
    let (m, _) = Setup::new(fiber, n, omega, n_eff)?.matrix()?;
    Ok(block_matrix(&m, block).determinant())
}

/// Determinant of the full row-normalized 8x8 boundary system.
pub fn dispersion_det(stack: &RegionStack, geometry: &FiberGeometry, n: u32, omega: f64, n_eff: f64) -> Result<f64> {
    let fiber = RingFiber { geometry: *geometry, stack: stack.clone() };
    block_det(&fiber, n, omega, n_eff, Block::Full)
}

/// A root of the dispersion equation with its nullspace coefficients (phi = 0 convention
/// for TE and hybrid modes, phi = pi/2 for TM), normalized to unit power-free norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub n_eff: f64,
    pub family: Family,
    pub coeffs: [f64; 8],
    pub singular_ratio: f64,
    pub continuity: f64,
}

/// Solution of one mode at one frequency.
#[derive(Debug, Clone, Copy)]
pub struct ModeProfile {
    setup: Setup,
    pub omega: f64,
    pub n_eff: f64,
    pub coeffs: [f64; 8],
}

/// Radial functions at one radius: F, F', G, G' and the transverse factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radial {
    pub f: f64,
    pub df: f64,
    pub g: f64,
    pub dg: f64,
    /// e_r = i a S(theta), e_theta = i b C(theta), e_z = F S(theta)
    pub a: f64,
    pub b: f64,
    /// Z0 h_r = i c C(theta), Z0 h_theta = i d S(theta), Z0 h_z = G C(theta)
    pub c: f64,
    pub d: f64,
}

impl ModeProfile {
    fn new(fiber: &RingFiber, n: u32, omega: f64, n_eff: f64, coeffs: [f64; 8]) -> Result<Self> {
        Ok(ModeProfile { setup: Setup::new(fiber, n, omega, n_eff)?, omega, n_eff, coeffs })
    }

    pub fn n(&self) -> u32 {
        self.setup.n
    }

    /// Propagation constant in rad/um.
    pub fn beta_per_um(&self) -> f64 {
        self.setup.beta
    }

    pub fn transverse_wavenumbers(&self) -> [f64; 3] {
        self.setup.w
    }

    pub fn permittivities(&self) -> [f64; 3] {
        self.setup.eps
    }

    /// Radial functions evaluated with the expansion of a given region.
    pub fn radial_in(&self, region: usize, r: f64) -> Result<Radial> {
        let s = &self.setup;
        let r = r.max(1e-9 * s.r1);
        let slots: &[usize] = match region {
            0 => &[0],
            1 => &[1, 2],
            _ => &[3],
        };
        let (mut f, mut df, mut g, mut dg) = (0.0, 0.0, 0.0, 0.0);
        for &slot in slots {
            let (v, d) = s.basis(slot, r)?;
            g += self.coeffs[slot] * v;
            dg += self.coeffs[slot] * d;
            f += self.coeffs[4 + slot] * v;
            df += self.coeffs[4 + slot] * d;
        }
        let nf = s.n as f64;
        let kap = s.kappa[region];
        let eps = s.eps[region];
        Ok(Radial {
            f,
            df,
            g,
            dg,
            a: (s.beta * df - nf * s.k0 * g / r) / kap,
            b: (nf * s.beta * f / r - s.k0 * dg) / kap,
            c: (s.beta * dg - nf * s.k0 * eps * f / r) / kap,
            d: (s.k0 * eps * df - nf * s.beta * g / r) / kap,
        })
    }

    pub fn radial(&self, r: f64) -> Result<Radial> {
        if r < 0.0 {
            return Err(Error::Domain(format!("negative radius {r}")));
        }
        self.radial_in(self.setup.region(r), r)
    }

    /// Full field at (r, theta) for the given phi-weights.
    pub fn field(&self, weights: [Complex64; 2], r: f64, theta: f64) -> Result<FieldSample> {
        let rad = self.radial(r)?;
        Ok(field_from_radial(&rad, self.setup.n, weights, theta))
    }

    /// Radial integrals int r f_j f_k dr over (a, b, F) on the given grid.
    pub fn gram(&self, grid: &RadialGrid) -> Result<[[f64; 3]; 3]> {
        let mut g = [[0.0; 3]; 3];
        for (&r, &w) in grid.nodes.iter().zip(&grid.weights) {
            let rad = self.radial(r)?;
            let v = [rad.a, rad.b, rad.f];
            for j in 0..3 {
                for k in j..3 {
                    g[j][k] += w * r * v[j] * v[k];
                }
            }
        }
        for j in 0..3 {
            for k in 0..j {
                g[j][k] = g[k][j];
            }
        }
        Ok(g)
    }

    /// Quadrature grid adequate for this mode's evanescent tail.
    pub fn grid(&self) -> RadialGrid {
        RadialGrid::new(self.setup.r1, self.setup.r2, self.setup.w[2], TAIL_TOL)
    }

    /// int r dr dtheta |e|^2 for the given phi-weights.
    pub fn norm_sq(&self, weights: [Complex64; 2]) -> Result<f64> {
        let grid = self.grid();
        let g = self.gram(&grid)?;
        Ok(harmonics(self.setup.n, weights).norm_sq(&g))
    }

    /// Largest relative jump of the tangential fields across r1 and r2.
    pub fn continuity_residual(&self) -> Result<f64> {
        let s = self.setup;
        let nf = s.n as f64;
        let mut worst = 0.0f64;
        for (r, qi, qo) in [(s.r1, 0, 1), (s.r2, 1, 2)] {
            let a = self.radial_in(qi, r)?;
            let b = self.radial_in(qo, r)?;
            // e_theta, e_z, h_theta, h_z amplitudes
            let ta = [a.b, a.f, a.d, a.g];
            let tb = [b.b, b.f, b.d, b.g];
            let scale = ta.iter().chain(&tb).fold(0.0f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                continue;
            }
            for k in 0..4 {
                worst = worst.max((ta[k] - tb[k]).abs() / scale);
            }
            let _ = nf;
        }
        Ok(worst)
    }
}

/// Six complex field components at one point; magnetic ones are Z0 h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub e_r: Complex64,
    pub e_theta: Complex64,
    pub e_z: Complex64,
    pub h_r: Complex64,
    pub h_theta: Complex64,
    pub h_z: Complex64,
}

impl FieldSample {
    /// (e_x, e_y) by rotation of (e_r, e_theta).
    pub fn cartesian(&self, theta: f64) -> (Complex64, Complex64) {
        let (s, c) = theta.sin_cos();
        (c * self.e_r - s * self.e_theta, s * self.e_r + c * self.e_theta)
    }
}

fn field_from_radial(rad: &Radial, n: u32, w: [Complex64; 2], theta: f64) -> FieldSample {
    let (sn, cn) = (n as f64 * theta).sin_cos();
    let s = w[0] * sn + w[1] * cn;
    let c = w[0] * cn - w[1] * sn;
    let i = Complex64::i();
    FieldSample { e_r: i * rad.a * s, e_theta: i * rad.b * c, e_z: rad.f * s, h_r: i * rad.c * c, h_theta: i * rad.d * s, h_z: rad.g * c }
}

/// Azimuthal harmonic content of one mode: for each cartesian component, the map
/// l -> complex weights on the real radial functions (a, b, F).
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonics {
    pub x: BTreeMap<i32, [Complex64; 3]>,
    pub y: BTreeMap<i32, [Complex64; 3]>,
    pub z: BTreeMap<i32, [Complex64; 3]>,
}

fn add(map: &mut BTreeMap<i32, [Complex64; 3]>, l: i32, v: [Complex64; 3], f: Complex64) {
    let e = map.entry(l).or_insert([Complex64::new(0.0, 0.0); 3]);
    for k in 0..3 {
        e[k] += f * v[k];
    }
}

/// Harmonic expansion of e_x, e_y, e_z for azimuthal order n and phi-weights.
pub fn harmonics(n: u32, w: [Complex64; 2]) -> Harmonics {
    let i = Complex64::i();
    let half = Complex64::new(0.5, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let n = n as i32;
    // S = w0 sin(n th) + w1 cos(n th), C = w0 cos(n th) - w1 sin(n th)
    let mut s_h: BTreeMap<i32, Complex64> = BTreeMap::new();
    let mut c_h: BTreeMap<i32, Complex64> = BTreeMap::new();
    *s_h.entry(n).or_insert(zero) += half * (w[1] - i * w[0]);
    *s_h.entry(-n).or_insert(zero) += half * (w[1] + i * w[0]);
    *c_h.entry(n).or_insert(zero) += half * (w[0] + i * w[1]);
    *c_h.entry(-n).or_insert(zero) += half * (w[0] - i * w[1]);
    let mut er = BTreeMap::new();
    let mut et = BTreeMap::new();
    let mut ez = BTreeMap::new();
    for (&l, &v) in &s_h {
        add(&mut er, l, [i * v, zero, zero], one);
        add(&mut ez, l, [zero, zero, v], one);
    }
    for (&l, &v) in &c_h {
        add(&mut et, l, [zero, i * v, zero], one);
    }
    let mut x = BTreeMap::new();
    let mut y = BTreeMap::new();
    // cos = (e^{i} + e^{-i})/2, sin = (e^{i} - e^{-i})/(2i)
    for (&l, &v) in &er {
        add(&mut x, l + 1, v, half);
        add(&mut x, l - 1, v, half);
        add(&mut y, l + 1, v, -half * i);
        add(&mut y, l - 1, v, half * i);
    }
    for (&l, &v) in &et {
        add(&mut x, l + 1, v, half * i);
        add(&mut x, l - 1, v, -half * i);
        add(&mut y, l + 1, v, half);
        add(&mut y, l - 1, v, half);
    }
    let prune = |m: BTreeMap<i32, [Complex64; 3]>| -> BTreeMap<i32, [Complex64; 3]> {
        m.into_iter().filter(|(_, v)| v.iter().any(|c| c.norm() > 1e-15)).collect()
    };
    Harmonics { x: prune(x), y: prune(y), z: prune(ez) }
}

/// 2 pi sum_l w_l^H G w_l for one component.
pub fn component_norm_sq(comp: &BTreeMap<i32, [Complex64; 3]>, gram: &[[f64; 3]; 3]) -> f64 {
    comp.values().map(|w| harmonic_power(w, gram)).sum()
}

/// 2 pi int r |sum_k w_k f_k|^2 dr.
pub fn harmonic_power(w: &[Complex64; 3], gram: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for j in 0..3 {
        for k in 0..3 {
            s += (w[j].conj() * w[k]).re * gram[j][k];
        }
    }
    2.0 * PI * s
}

impl Harmonics {
    pub fn component(&self, c: Component) -> &BTreeMap<i32, [Complex64; 3]> {
        match c {
            Component::X => &self.x,
            Component::Y => &self.y,
            Component::Z => &self.z,
        }
    }

    /// int conj(self) . other dA when both share the same radial functions.
    pub fn inner(&self, other: &Harmonics, gram: &[[f64; 3]; 3]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for c in [Component::X, Component::Y, Component::Z] {
            let b = other.component(c);
            for (l, u) in self.component(c) {
                if let Some(v) = b.get(l) {
                    for j in 0..3 {
                        for k in 0..3 {
                            s += u[j].conj() * v[k] * gram[j][k];
                        }
                    }
                }
            }
        }
        2.0 * PI * s
    }

    pub fn norm_sq(&self, gram: &[[f64; 3]; 3]) -> f64 {
        component_norm_sq(&self.x, gram) + component_norm_sq(&self.y, gram) + component_norm_sq(&self.z, gram)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    X,
    Y,
    Z,
}

fn base_weights(family: Family) -> [Complex64; 2] {
    match family {
        Family::TM => Polarization::TM.weights(),
        _ => Polarization::V.weights(),
    }
}

/// Solver settings for one fiber.
#[derive(Debug, Clone)]
pub struct ModeSolver {
    pub fiber: RingFiber,
    pub scan_points: usize,
}

impl ModeSolver {
    pub fn new(fiber: RingFiber) -> Self {
        ModeSolver { fiber, scan_points: DEFAULT_SCAN_POINTS }
    }

    pub fn with_scan_points(mut self, scan_points: usize) -> Self {
        self.scan_points = scan_points;
        self
    }

    fn det(&self, n: u32, omega: f64, n_eff: f64, block: Block) -> Result<f64> {
        block_det(&self.fiber, n, omega, n_eff, block)
    }

    fn bisect(&self, n: u32, omega: f64, block: Block, mut lo: f64, mut hi: f64, mut dlo: f64) -> Result<f64> {
        while hi - lo > ROOT_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let dm = self.det(n, omega, mid, block)?;
            if dm == 0.0 {
                return Ok(mid);
            }
            if (dm > 0.0) == (dlo > 0.0) {
                lo = mid;
                dlo = dm;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Nullspace, phase convention, normalization, classification and acceptance tests.
    fn finish_root(&self, n: u32, omega: f64, n_eff: f64, block: Block) -> Result<Option<Root>> {
        let setup = Setup::new(&self.fiber, n, omega, n_eff)?;
        let (m, scales) = setup.matrix()?;
        let mb = block_matrix(&m, block);
        let svd = mb.clone().svd(false, true);
        let sv = &svd.singular_values;
        let (imin, smin) = sv.iter().enumerate().fold((0, f64::INFINITY), |a, (k, &v)| if v < a.1 { (k, v) } else { a });
        let smax = sv.iter().fold(0.0f64, |a, &v| a.max(v));
        let ratio = smin / smax;
        if !(ratio < SINGULAR_RATIO_MAX) {
            return Ok(None);
        }
        let vt = svd.v_t.expect("requested V^T");
        let x: Vec<f64> = vt.row(imin).iter().copied().collect();
        let mut coeffs = [0.0; 8];
        match block {
            Block::Full => {
                for c in 0..8 {
                    coeffs[c] = x[c] / scales[c % 4];
                }
            }
            Block::TE => {
                for c in 0..4 {
                    coeffs[c] = x[c] / scales[c];
                }
            }
            Block::TM => {
                for c in 0..4 {
                    coeffs[4 + c] = x[c] / scales[c];
                }
            }
        }
        apply_phase_convention(&mut coeffs);
        let mut profile = ModeProfile { setup, omega, n_eff, coeffs };
        let family = match block {
            Block::TE => Family::TE,
            Block::TM => Family::TM,
            Block::Full => {
                let g = profile.gram(&profile.grid())?;
                if g[0][1] > 0.0 {
                    Family::HE
                } else {
                    Family::EH
                }
            }
        };
        let norm = profile.norm_sq(base_weights(family))?;
        for c in profile.coeffs.iter_mut() {
            *c /= norm.sqrt();
        }
        let continuity = profile.continuity_residual()?;
        if !(continuity < CONTINUITY_TOL) {
            return Ok(None);
        }
        Ok(Some(Root { n_eff, family, coeffs: profile.coeffs, singular_ratio: ratio, continuity }))
    }

    /// All accepted roots for one block, sorted by decreasing n_eff.
    pub fn roots(&self, n: u32, omega: f64, block: Block) -> Result<Vec<Root>> {
        self.roots_with(n, omega, block, self.scan_points)
    }

    fn roots_with(&self, n: u32, omega: f64, block: Block, points: usize) -> Result<Vec<Root>> {
        let (lo, hi) = self.fiber.guidance_window(omega)?;
        let (lo, hi) = (lo + WINDOW_MARGIN, hi - WINDOW_MARGIN);
        let points = points.max(2);
        let xs: Vec<f64> = (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect();
        let ds = xs.iter().map(|&x| self.det(n, omega, x, block)).collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for k in 0..points - 1 {
            if ds[k] == 0.0 || (ds[k] > 0.0) != (ds[k + 1] > 0.0) {
                let root = if ds[k] == 0.0 { xs[k] } else { self.bisect(n, omega, block, xs[k], xs[k + 1], ds[k])? };
                if let Some(r) = self.finish_root(n, omega, root, block)? {
                    out.push(r);
                }
            }
        }
        out.sort_by(|a, b| b.n_eff.total_cmp(&a.n_eff));
        Ok(out)
    }

    /// Roots at azimuthal order n: TE then TM block for n = 0, full system otherwise.
    pub fn all_roots(&self, n: u32, omega: f64) -> Result<Vec<Root>> {
        let mut r = if n == 0 {
            let mut v = self.roots(0, omega, Block::TE)?;
            v.extend(self.roots(0, omega, Block::TM)?);
            v
        } else {
            self.roots(n, omega, Block::Full)?
        };
        r.sort_by(|a, b| b.n_eff.total_cmp(&a.n_eff));
        Ok(r)
    }

    /// One mode per root at a single frequency (V polarization for n >= 1).
    pub fn find_modes(&self, n: u32, omega: f64) -> Result<Vec<GuidedMode>> {
        let roots = self.all_roots(n, omega)?;
        let lambda = um_from_omega(omega);
        let mut rank: BTreeMap<Family, usize> = BTreeMap::new();
        let mut out = Vec::new();
        for r in roots {
            let k = rank.entry(r.family).or_insert(0);
            *k += 1;
            let curve = ModeCurve {
                fiber: self.fiber.clone(),
                n,
                family: r.family,
                radial_index: *k,
                lambdas: vec![lambda],
                n_eff: vec![r.n_eff],
                coeffs: vec![r.coeffs],
            };
            let pol = match r.family {
                Family::TE => Polarization::TE,
                Family::TM => Polarization::TM,
                _ => Polarization::V,
            };
            out.push(GuidedMode { polarization: pol, curve: Arc::new(curve) });
        }
        Ok(out)
    }

    /// Every guided mode with n <= n_max, hybrid modes split into R and L,
    /// sorted by decreasing n_eff.
    pub fn census(&self, omega: f64, n_max: u32) -> Result<Vec<GuidedMode>> {
        let mut out = Vec::new();
        for n in 0..=n_max {
            if n > MAX_ORDER {
                return Err(Error::Range(format!("modes still guided at order {MAX_ORDER}, solver stops there")));
            }
            let found = self.find_modes(n, omega)?;
            // once an order is cut off, every higher order is as well
            if found.is_empty() && n > 0 {
                break;
            }
            for m in found {
                if n == 0 {
                    out.push(m);
                } else {
                    out.push(m.with_polarization(Polarization::R)?);
                    out.push(m.with_polarization(Polarization::L)?);
                }
            }
        }
        out.sort_by(|a, b| {
            let (x, y) = (a.curve.n_eff[0], b.curve.n_eff[0]);
            y.total_cmp(&x).then(a.polarization.cmp(&b.polarization))
        });
        Ok(out)
    }

    /// Root of (family, radial_index) at one frequency by a full scan.
    fn locate(&self, n: u32, family: Family, radial_index: usize, omega: f64) -> Result<Root> {
        let block = match family {
            Family::TE => Block::TE,
            Family::TM => Block::TM,
            _ => Block::Full,
        };
        self.roots(n, omega, block)?
            .into_iter()
            .filter(|r| r.family == family)
            .nth(radial_index - 1)
            .ok_or_else(|| Error::NoMode(format!("{} not guided at {:.6} um", mode_label(family, n, radial_index), um_from_omega(omega))))
    }

    /// Solves one mode on a uniform wavelength grid covering [lambda_min, lambda_max].
    pub fn track(&self, n: u32, family: Family, radial_index: usize, lambda_min: f64, lambda_max: f64, step_nm: f64) -> Result<GuidedMode> {
        if !(lambda_max >= lambda_min && step_nm > 0.0) {
            return Err(Error::Config(format!("bad wavelength band {lambda_min}..{lambda_max} um")));
        }
        if radial_index == 0 || ((family == Family::TE || family == Family::TM) != (n == 0)) {
            return Err(Error::Config(format!("no mode {}", mode_label(family, n, radial_index))));
        }
        let h = step_nm * 1e-3;
        let count = ((lambda_max - lambda_min) / h).ceil() as usize + 1;
        let count = count.max(4);
        let start = 0.5 * (lambda_min + lambda_max) - 0.5 * h * (count - 1) as f64;
        let lambdas: Vec<f64> = (0..count).map(|k| start + h * k as f64).collect();
        let block = match family {
            Family::TE => Block::TE,
            Family::TM => Block::TM,
            _ => Block::Full,
        };
        let mut n_eff = vec![0.0; count];
        let mut coeffs = vec![[0.0; 8]; count];
        let mid = count / 2;
        let first = self.locate(n, family, radial_index, omega_from_um(lambdas[mid]))?;
        n_eff[mid] = first.n_eff;
        coeffs[mid] = first.coeffs;
        // continue outward in both directions from the centre
        for dir in [1isize, -1] {
            let mut prev = mid as isize;
            let mut prev2: Option<isize> = None;
            loop {
                let k = prev + dir;
                if k < 0 || k >= count as isize {
                    break;
                }
                let (ku, pu) = (k as usize, prev as usize);
                let guess = match prev2 {
                    Some(p2) => 2.0 * n_eff[pu] - n_eff[p2 as usize],
                    None => n_eff[pu],
                };
                let slope = prev2.map(|p2| (n_eff[pu] - n_eff[p2 as usize]).abs()).unwrap_or(1e-5);
                let omega = omega_from_um(lambdas[ku]);
                let root = match self.local_root(n, omega, block, family, guess, slope)? {
                    Some(r) => r,
                    None => self.locate(n, family, radial_index, omega)?,
                };
                let mut c = root.coeffs;
                let dot: f64 = c.iter().zip(&coeffs[pu]).map(|(a, b)| a * b).sum();
                if dot < 0.0 {
                    c.iter_mut().for_each(|v| *v = -*v);
                }
                n_eff[ku] = root.n_eff;
                coeffs[ku] = c;
                prev2 = Some(prev);
                prev = k;
            }
        }
        let curve = ModeCurve { fiber: self.fiber.clone(), n, family, radial_index, lambdas, n_eff, coeffs };
        let pol = match family {
            Family::TE => Polarization::TE,
            Family::TM => Polarization::TM,
            _ => Polarization::V,
        };
        Ok(GuidedMode { polarization: pol, curve: Arc::new(curve) })
    }

    /// Tracks the mode named by a label such as "HE21R" or "TE01".
    pub fn track_label(&self, label: &str, lambda_min: f64, lambda_max: f64, step_nm: f64) -> Result<GuidedMode> {
        let (family, n, idx, pol) = parse_label(label)?;
        self.track(n, family, idx, lambda_min, lambda_max, step_nm)?.with_polarization(pol)
    }

    /// Tracks every curve of `modes` once over the band, keeping each polarization.
    /// Curves cut off inside the band are dropped.
    pub fn track_all(&self, modes: &[GuidedMode], lambda_min: f64, lambda_max: f64, step_nm: f64) -> Result<Vec<GuidedMode>> {
        let mut done: Vec<((u32, Family, usize), GuidedMode)> = Vec::new();
        let mut out = Vec::new();
        for m in modes {
            let key = (m.n(), m.family(), m.radial_index());
            let base = match done.iter().find(|(k, _)| *k == key) {
                Some((_, g)) => g.clone(),
                None => match self.track(key.0, key.1, key.2, lambda_min, lambda_max, step_nm) {
                    Ok(g) => {
                        done.push((key, g.clone()));
                        g
                    }
                    Err(Error::NoMode(msg)) => {
                        log::warn!("dropping {}: {msg}", m.label());
                        continue;
                    }
                    Err(e) => return Err(e),
                },
            };
            out.push(base.with_polarization(m.polarization)?);
        }
        Ok(out)
    }

    /// Root near a predicted n_eff, found by widening brackets around the guess.
    fn local_root(&self, n: u32, omega: f64, block: Block, family: Family, guess: f64, slope: f64) -> Result<Option<Root>> {
        let (lo_w, hi_w) = self.fiber.guidance_window(omega)?;
        let (lo_w, hi_w) = (lo_w + WINDOW_MARGIN, hi_w - WINDOW_MARGIN);
        let mut delta = (4.0 * slope).max(1e-7);
        for _ in 0..6 {
            let lo = (guess - delta).max(lo_w);
            let hi = (guess + delta).min(hi_w);
            if hi > lo {
                let pts = 9;
                let xs: Vec<f64> = (0..pts).map(|k| lo + (hi - lo) * k as f64 / (pts - 1) as f64).collect();
                let ds = xs.iter().map(|&x| self.det(n, omega, x, block)).collect::<Result<Vec<_>>>()?;
                let mut found = Vec::new();
                for k in 0..pts - 1 {
                    if ds[k] == 0.0 || (ds[k] > 0.0) != (ds[k + 1] > 0.0) {
                        found.push(k);
                    }
                }
                if found.len() > 1 {
                    return Ok(None);
                }
                if let Some(&k) = found.first() {
                    let root = if ds[k] == 0.0 { xs[k] } else { self.bisect(n, omega, block, xs[k], xs[k + 1], ds[k])? };
                    return Ok(self.finish_root(n, omega, root, block)?.filter(|r| r.family == family));
                }
            }
            delta *= 4.0;
        }
        Ok(None)
    }
}

/// Free-function form of [`ModeSolver::find_modes`].
pub fn find_modes(stack: &RegionStack, geometry: &FiberGeometry, n: u32, omega: f64, scan_points: usize) -> Result<Vec<GuidedMode>> {
    ModeSolver::new(RingFiber::new(*geometry, stack.clone())).with_scan_points(scan_points).find_modes(n, omega)
}

pub fn mode_label(family: Family, n: u32, radial_index: usize) -> String {
    match family {
        Family::TE => format!("TE0{radial_index}"),
        Family::TM => format!("TM0{radial_index}"),
        Family::HE => format!("HE{n}{radial_index}"),
        Family::EH => format!("EH{n}{radial_index}"),
    }
}

fn apply_phase_convention(c: &mut [f64; 8]) {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pick = if c[5].abs() > 1e-12 * scale { c[5] } else { c[1] };
    if pick < 0.0 {
        c.iter_mut().for_each(|v| *v = -*v);
    }
}

/// A mode solved on a wavelength grid (shared by all polarization variants).
#[derive(Debug, Clone)]
pub struct ModeCurve {
    pub fiber: RingFiber,
    pub n: u32,
    pub family: Family,
    pub radial_index: usize,
    lambdas: Vec<f64>,
    n_eff: Vec<f64>,
    coeffs: Vec<[f64; 8]>,
}

impl ModeCurve {
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn n_eff_samples(&self) -> &[f64] {
        &self.n_eff
    }

    pub fn coeff_samples(&self) -> &[[f64; 8]] {
        &self.coeffs
    }

    pub fn lambda_range(&self) -> (f64, f64) {
        (self.lambdas[0], *self.lambdas.last().unwrap())
    }

    /// 4-point Lagrange stencil (index of first point, weights) at lambda.
    fn stencil(&self, lambda: f64) -> Result<(usize, [f64; 4], usize)> {
        let m = self.lambdas.len();
        let (lo, hi) = self.lambda_range();
        let tol = 1e-9 * lambda;
        if lambda < lo - tol || lambda > hi + tol {
            return Err(Error::Range(format!(
                "{} sampled on [{lo:.6}, {hi:.6}] um, asked for {lambda:.6} um",
                mode_label(self.family, self.n, self.radial_index)
            )));
        }
        if m == 1 {
            return Ok((0, [1.0, 0.0, 0.0, 0.0], 1));
        }
        if m < 4 {
            return Err(Error::Range("curve needs at least 4 samples to interpolate".into()));
        }
        let h = (hi - lo) / (m - 1) as f64;
        let t = ((lambda - lo) / h).clamp(0.0, (m - 1) as f64);
        let base = (t.floor() as isize - 1).clamp(0, m as isize - 4) as usize;
        let u = t - base as f64;
        let mut w = [0.0; 4];
        for (j, wj) in w.iter_mut().enumerate() {
            let mut p = 1.0;
            for k in 0..4 {
                if k != j {
                    p *= (u - k as f64) / (j as f64 - k as f64);
                }
            }
            *wj = p;
        }
        Ok((base, w, 4))
    }

    pub fn n_eff_at(&self, lambda: f64) -> Result<f64> {
        let (b, w, len) = self.stencil(lambda)?;
        Ok((0..len).map(|k| w[k] * self.n_eff[b + k]).sum())
    }

    pub fn profile_at(&self, omega: f64) -> Result<ModeProfile> {
        let lambda = um_from_omega(omega);
        let (b, w, len) = self.stencil(lambda)?;
        let n_eff: f64 = (0..len).map(|k| w[k] * self.n_eff[b + k]).sum();
        let mut c = [0.0; 8];
        for k in 0..len {
            for j in 0..8 {
                c[j] += w[k] * self.coeffs[b + k][j];
            }
        }
        ModeProfile::new(&self.fiber, self.n, omega, n_eff, c)
    }
}

/// One polarization variant of a solved mode.
#[derive(Debug, Clone)]
pub struct GuidedMode {
    pub polarization: Polarization,
    curve: Arc<ModeCurve>,
}

impl GuidedMode {
    pub fn curve(&self) -> &ModeCurve {
        &self.curve
    }

    pub fn n(&self) -> u32 {
        self.curve.n
    }

    pub fn family(&self) -> Family {
        self.curve.family
    }

    pub fn radial_index(&self) -> usize {
        self.curve.radial_index
    }

    pub fn weights(&self) -> [Complex64; 2] {
        self.polarization.weights()
    }

    /// Mode name without polarization, e.g. "HE21".
    pub fn label(&self) -> String {
        mode_label(self.curve.family, self.curve.n, self.curve.radial_index)
    }

    /// Mode name with polarization, e.g. "HE21R" or "TE01".
    pub fn full_label(&self) -> String {
        format!("{}{}", self.label(), self.polarization.suffix())
    }

    pub fn same_curve(&self, other: &GuidedMode) -> bool {
        Arc::ptr_eq(&self.curve, &other.curve)
    }

    pub fn with_polarization(&self, p: Polarization) -> Result<GuidedMode> {
        let ok = match self.curve.family {
            Family::TE => p == Polarization::TE,
            Family::TM => p == Polarization::TM,
            _ => matches!(p, Polarization::V | Polarization::H | Polarization::R | Polarization::L),
        };
        if !ok {
            return Err(Error::Mismatch(format!("{} has no {p:?} variant", self.label())));
        }
        Ok(GuidedMode { polarization: p, curve: self.curve.clone() })
    }

    pub fn omega_range(&self) -> (f64, f64) {
        let (lo, hi) = self.curve.lambda_range();
        (omega_from_um(hi), omega_from_um(lo))
    }

    pub fn n_eff(&self, omega: f64) -> Result<f64> {
        self.curve.n_eff_at(um_from_omega(omega))
    }

    /// Propagation constant in rad/m.
    pub fn beta(&self, omega: f64) -> Result<f64> {
        Ok(self.n_eff(omega)? * omega / crate::units::C)
    }

    pub fn profile(&self, omega: f64) -> Result<ModeProfile> {
        self.curve.profile_at(omega)
    }

    pub fn field_at(&self, r: f64, theta: f64, omega: f64) -> Result<FieldSample> {
        self.profile(omega)?.field(self.weights(), r, theta)
    }

    pub fn cartesian_field_at(&self, r: f64, theta: f64, omega: f64) -> Result<(Complex64, Complex64)> {
        Ok(self.field_at(r, theta, omega)?.cartesian(theta))
    }

    pub fn harmonics(&self) -> Harmonics {
        harmonics(self.curve.n, self.weights())
    }

    /// int r dr dtheta |e|^2 at omega.
    pub fn norm_sq(&self, omega: f64) -> Result<f64> {
        self.profile(omega)?.norm_sq(self.weights())
    }
}

/// int conj(e_a) . e_b dA for two modes at the same frequency.
pub fn mode_inner(a: &GuidedMode, b: &GuidedMode, omega: f64) -> Result<Complex64> {
    let pa = a.profile(omega)?;
    let pb = b.profile(omega)?;
    let w = pa.setup.w[2].min(pb.setup.w[2]);
    let grid = RadialGrid::new(pa.setup.r1, pa.setup.r2, w, TAIL_TOL);
    let mut g = [[0.0; 3]; 3];
    for (&r, &wt) in grid.nodes.iter().zip(&grid.weights) {
        let (x, y) = (pa.radial(r)?, pb.radial(r)?);
        let (u, v) = ([x.a, x.b, x.f], [y.a, y.b, y.f]);
        for j in 0..3 {
            for k in 0..3 {
                g[j][k] += wt * r * u[j] * v[k];
            }
        }
    }
    Ok(a.harmonics().inner(&b.harmonics(), &g))
}

/// (fields_V -/+ i fields_H)/sqrt(2) for R/L.
pub fn circular_superposition(mode_v: &GuidedMode, mode_h: &GuidedMode, handedness: Polarization) -> Result<GuidedMode> {
    if mode_v.polarization != Polarization::V || mode_h.polarization != Polarization::H {
        return Err(Error::Mismatch("expected a V and an H mode".into()));
    }
    if !matches!(handedness, Polarization::R | Polarization::L) {
        return Err(Error::Mismatch(format!("handedness must be R or L, got {handedness:?}")));
    }
    let (a, b) = (mode_v.curve(), mode_h.curve());
    if !mode_v.same_curve(mode_h) {
        let same = a.n == b.n
            && a.family == b.family
            && a.radial_index == b.radial_index
            && a.lambdas == b.lambdas
            && a.n_eff.iter().zip(&b.n_eff).all(|(x, y)| (x - y).abs() <= 1e-10 * x);
        if !same {
            return Err(Error::Mismatch(format!("{} and {} are not a degenerate pair", mode_v.label(), mode_h.label())));
        }
    }
    mode_v.with_polarization(handedness)
}

/// Rescales every stored sample to unit norm (idempotent for solver output).
pub fn normalize(mode: &GuidedMode) -> Result<GuidedMode> {
    let c = mode.curve();
    let mut coeffs = c.coeffs.clone();
    for (k, lam) in c.lambdas.iter().enumerate() {
        let p = ModeProfile::new(&c.fiber, c.n, omega_from_um(*lam), c.n_eff[k], coeffs[k])?;
        let s = p.norm_sq(base_weights(c.family))?.sqrt();
        coeffs[k].iter_mut().for_each(|v| *v /= s);
    }
    let curve = ModeCurve { coeffs, ..c.clone() };
    Ok(GuidedMode { polarization: mode.polarization, curve: Arc::new(curve) })
}

/// Label such as "HE21", derived from the stored family.
pub fn classify(mode: &GuidedMode) -> String {
    mode.label()
}

impl fmt::Display for GuidedMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.full_label())
    }
}

/// Parses "HE21R", "HE21,R", "HE21_R", "TE01", "TM01".
pub fn parse_label(s: &str) -> Result<(Family, u32, usize, Polarization)> {
    let t: String = s.chars().filter(|c| !matches!(c, ',' | '_' | ' ')).collect::<String>().to_uppercase();
    let bad = || Error::Config(format!("unknown mode label '{s}'"));
    if t.len() < 4 {
        return Err(bad());
    }
    let family = match &t[..2] {
        "TE" => Family::TE,
        "TM" => Family::TM,
        "HE" => Family::HE,
        "EH" => Family::EH,
        _ => return Err(bad()),
    };
    let digits = &t[2..4];
    let n: u32 = digits[..1].parse().map_err(|_| bad())?;
    let m: usize = digits[1..].parse().map_err(|_| bad())?;
    let rest = &t[4..];
    let pol = match (family, rest) {
        (Family::TE, "") if n == 0 => Polarization::TE,
        (Family::TM, "") if n == 0 => Polarization::TM,
        (Family::HE | Family::EH, "V") if n > 0 => Polarization::V,
        (Family::HE | Family::EH, "H") if n > 0 => Polarization::H,
        (Family::HE | Family::EH, "R") if n > 0 => Polarization::R,
        (Family::HE | Family::EH, "L") if n > 0 => Polarization::L,
        _ => return Err(bad()),
    };
    if m == 0 {
        return Err(bad());
    }
    Ok((family, n, m, pol))
}
