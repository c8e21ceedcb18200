//! Schmidt decompositions, temporal correlations and Bell-test figures of merit.

use crate::error::{Error, Result};
use crate::modesolver::{GuidedMode, Harmonics};
use crate::qpm::QpmGrating;
use crate::quadrature::RadialGrid;
use crate::spdc::{domega, jsa_with_table, FrequencyGrid, Jsa, OverlapTable, ProcessTriple, PumpSpectrum};
use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct SchmidtResult {
    /// descending, sum of squares 1
    pub coefficients: Vec<f64>,
    pub schmidt_number: f64,
    /// column k is f_{s,k} on the signal grid
    pub signal_modes: DMatrix<Complex64>,
    /// column k is f_{i,k} on the idler grid
    pub idler_modes: DMatrix<Complex64>,
}

fn schmidt_number(coefficients: &[f64]) -> f64 {
    1.0 / coefficients.iter().map(|l| l.powi(4)).sum::<f64>()
}

fn normalize_values(mut s: Vec<f64>) -> Result<Vec<f64>> {
    s.sort_by(|a, b| b.total_cmp(a));
    let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Degenerate("zero-norm two-photon amplitude".into()));
    }
    Ok(s.into_iter().map(|v| v / n).collect())
}

fn weighted(a: &DMatrix<Complex64>, ws: &[f64], wi: &[f64]) -> Result<DMatrix<Complex64>> {
    if ws.len() != a.nrows() || wi.len() != a.ncols() {
        return Err(Error::Mismatch(format!("{}x{} amplitude with {} and {} weights", a.nrows(), a.ncols(), ws.len(), wi.len())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite amplitude".into()));
    }
    Ok(DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)] * (ws[r] * wi[c]).sqrt()))
}

/// Schmidt decomposition of a sampled amplitude with quadrature weights on each axis.
/// Mode functions are orthonormal under the same weights.
pub fn schmidt(a: &DMatrix<Complex64>, ws: &[f64], wi: &[f64]) -> Result<SchmidtResult> {
    let m = weighted(a, ws, wi)?;
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let coefficients = normalize_values(order.iter().map(|&k| svd.singular_values[k]).collect())?;
    let signal_modes = DMatrix::from_fn(a.nrows(), order.len(), |r, k| u[(r, order[k])] / ws[r].sqrt());
    let idler_modes = DMatrix::from_fn(a.ncols(), order.len(), |c, k| vt[(order[k], c)] / wi[c].sqrt());
    Ok(SchmidtResult { schmidt_number: schmidt_number(&coefficients), coefficients, signal_modes, idler_modes })
}

/// Normalized Schmidt coefficients only.
pub fn schmidt_coefficients(a: &DMatrix<Complex64>, ws: &[f64], wi: &[f64]) -> Result<Vec<f64>> {
    let m = weighted(a, ws, wi)?;
    normalize_values(m.singular_values().iter().copied().collect())
}

/// K of a sampled amplitude with quadrature weights.
pub fn schmidt_k(a: &DMatrix<Complex64>, ws: &[f64], wi: &[f64]) -> Result<f64> {
    Ok(schmidt_number(&schmidt_coefficients(a, ws, wi)?))
}

/// Schmidt decomposition of a JSA on its uniform grids.
pub fn schmidt_jsa(jsa: &Jsa) -> Result<SchmidtResult> {
    schmidt(&jsa.values, &vec![jsa.omega_s.step; jsa.omega_s.len], &vec![jsa.omega_i.step; jsa.omega_i.len])
}

/// Exact SVD of A diag(c) B^T for tall A (n x r) and B (m x r), via thin QR factors.
/// Equivalent to [`schmidt`] on the full n x m product with unit weights.
pub fn schmidt_low_rank(a: &DMatrix<Complex64>, c: &[Complex64], b: &DMatrix<Complex64>) -> Result<SchmidtResult> {
    if a.ncols() != c.len() || b.ncols() != c.len() {
        return Err(Error::Mismatch("factor ranks differ".into()));
    }
    let (qa, ra) = a.clone().qr().unpack();
    let (qb, rb) = b.clone().qr().unpack();
    let core = &ra * DMatrix::from_diagonal(&DVector::from_column_slice(c)) * rb.transpose();
    let r = schmidt(&core, &vec![1.0; core.nrows()], &vec![1.0; core.ncols()])?;
    Ok(SchmidtResult { signal_modes: &qa * &r.signal_modes, idler_modes: &qb * &r.idler_modes, ..r })
}

/// K_omega for each pump width (nm) on fixed grids; the overlap table is shared.
pub fn k_omega_vs_pump(
    triple: &ProcessTriple,
    grating: &QpmGrating,
    lambda_p: f64,
    sigmas_nm: &[f64],
    ws: &FrequencyGrid,
    wi: &FrequencyGrid,
) -> Result<Vec<(f64, f64)>> {
    let table = OverlapTable::build(triple, grating, (ws.start, ws.end()), (wi.start, wi.end()))?;
    sigmas_nm
        .iter()
        .map(|&s| {
            let pump = PumpSpectrum::gaussian(lambda_p, s, 1.0);
            let j = jsa_with_table(triple, &pump, grating, ws, wi, pump.sigma, &table)?;
            Ok((s, schmidt_k(&j.values, &vec![ws.step; ws.len], &vec![wi.step; wi.len])?))
        })
        .collect()
}

/// One process of a two-photon transverse amplitude: signal and idler modes with a
/// complex weight (relative amplitude of the process).
#[derive(Debug, Clone)]
pub struct TransverseProcess {
    pub signal: GuidedMode,
    pub idler: GuidedMode,
    pub amplitude: Complex64,
}

/// x-component harmonic coefficients c_l(r_k) sqrt(2 pi w_k r_k) for every l with support.
fn radial_columns(m: &GuidedMode, omega: f64, ls: &[i32], g: &RadialGrid) -> Result<DMatrix<Complex64>> {
    let p = m.profile(omega)?;
    let h: Harmonics = m.harmonics();
    let n = g.nodes.len();
    let mut out = DMatrix::zeros(ls.len() * n, 1);
    for (k, (&r, &w)) in g.nodes.iter().zip(&g.weights).enumerate() {
        let v = p.radial(r)?;
        let s = (2.0 * PI * w * r).sqrt();
        for (j, l) in ls.iter().enumerate() {
            if let Some(c) = h.x.get(l) {
                out[(j * n + k, 0)] = (c[0] * v.a + c[1] * v.b + c[2] * v.f) * s;
            }
        }
    }
    Ok(out)
}

fn support(procs: &[TransverseProcess], signal: bool) -> Vec<i32> {
    let mut ls: Vec<i32> = procs.iter().flat_map(|p| if signal { &p.signal } else { &p.idler }.harmonics().x.into_keys()).collect();
    ls.sort_unstable();
    ls.dedup();
    ls
}

fn factor_matrices(
    procs: &[TransverseProcess],
    omega_s: f64,
    omega_i: f64,
) -> Result<(Vec<i32>, Vec<i32>, DMatrix<Complex64>, DMatrix<Complex64>)> {
    if procs.is_empty() {
        return Err(Error::Degenerate("no processes".into()));
    }
    let (ls, li) = (support(procs, true), support(procs, false));
    // common radial grids: the slowest-decaying tail on each side sets the extent
    let grid = |ms: Vec<&GuidedMode>, w: f64| -> Result<RadialGrid> {
        let mut best: Option<RadialGrid> = None;
        for m in ms {
            let g = m.profile(w)?.grid();
            if best.as_ref().map_or(true, |b| g.r_max > b.r_max) {
                best = Some(g);
            }
        }
        Ok(best.expect("nonempty"))
    };
    let gs = grid(procs.iter().map(|p| &p.signal).collect(), omega_s)?;
    let gi = grid(procs.iter().map(|p| &p.idler).collect(), omega_i)?;
    let cols_s: Vec<_> = procs.iter().map(|p| radial_columns(&p.signal, omega_s, &ls, &gs)).collect::<Result<_>>()?;
    let cols_i: Vec<_> = procs.iter().map(|p| radial_columns(&p.idler, omega_i, &li, &gi)).collect::<Result<_>>()?;
    let a = DMatrix::from_fn(cols_s[0].nrows(), procs.len(), |r, k| cols_s[k][(r, 0)]);
    let b = DMatrix::from_fn(cols_i[0].nrows(), procs.len(), |r, k| cols_i[k][(r, 0)]);
    Ok((ls, li, a, b))
}

/// F_theta(l_s, l_i): the norm over both radii of the (l_s, l_i) harmonic block of the
/// x-polarized transverse amplitude. Rows follow the returned signal orders.
pub fn f_theta(procs: &[TransverseProcess], omega_s: f64, omega_i: f64) -> Result<(Vec<i32>, Vec<i32>, DMatrix<f64>)> {
    let (ls, li, a, b) = factor_matrices(procs, omega_s, omega_i)?;
    let (ns, ni) = (a.nrows() / ls.len(), b.nrows() / li.len());
    let c: Vec<Complex64> = procs.iter().map(|p| p.amplitude).collect();
    let f = DMatrix::from_fn(ls.len(), li.len(), |x, y| {
        let sa = a.rows(x * ns, ns);
        let sb = b.rows(y * ni, ni);
        // sum |sum_k c_k a_k b_k|^2 = sum_jk c_j conj(c_k) <a_k,a_j> <b_k,b_j>
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..c.len() {
            for k in 0..c.len() {
                let ga = sa.column(k).dotc(&sa.column(j));
                let gb = sb.column(k).dotc(&sb.column(j));
                acc += c[j] * c[k].conj() * ga * gb;
            }
        }
        acc.re.max(0.0).sqrt()
    });
    Ok((ls, li, f))
}

/// K_theta from the singular values of F_theta.
pub fn k_theta(procs: &[TransverseProcess], omega_s: f64, omega_i: f64) -> Result<f64> {
    let (_, _, f) = f_theta(procs, omega_s, omega_i)?;
    let s = normalize_values(f.singular_values().iter().copied().collect())?;
    Ok(schmidt_number(&s))
}

/// Schmidt decomposition of the full discretized transverse amplitude (radius and angle).
pub fn transverse_schmidt(procs: &[TransverseProcess], omega_s: f64, omega_i: f64) -> Result<SchmidtResult> {
    let (_, _, a, b) = factor_matrices(procs, omega_s, omega_i)?;
    let c: Vec<Complex64> = procs.iter().map(|p| p.amplitude).collect();
    schmidt_low_rank(&a, &c, &b)
}

#[derive(Debug, Clone)]
pub struct TemporalAmplitude {
    pub t_s: Vec<f64>,
    pub t_i: Vec<f64>,
    /// rows: t_s, columns: t_i
    pub values: DMatrix<Complex64>,
}

/// Two-dimensional transform of sqrt(ws wi / (ns ni)) Phi onto time axes, with the
/// frequency grids zero-padded by `pad` to refine the time step.
/// Phi~(ts, ti) = (1/2 pi) sum Phi exp(-i ws ts - i wi ti) dws dwi.
pub fn temporal_amplitude(jsa: &Jsa, pad: usize) -> Result<TemporalAmplitude> {
    let pad = pad.max(1);
    let (ms, mi) = (jsa.omega_s.len, jsa.omega_i.len);
    let (ns, ni) = ((ms * pad).next_power_of_two(), (mi * pad).next_power_of_two());
    if jsa.n_s.len() != ms || jsa.n_i.len() != mi {
        return Err(Error::Mismatch("JSA lacks effective indices".into()));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); ns * ni];
    for a in 0..ms {
        for b in 0..mi {
            let w = (jsa.omega_s.at(a) * jsa.omega_i.at(b) / (jsa.n_s[a] * jsa.n_i[b])).sqrt();
            buf[a * ni + b] = jsa.values[(a, b)] * w;
        }
    }
    let mut planner = FftPlanner::new();
    let (fs, fi) = (planner.plan_fft_forward(ns), planner.plan_fft_forward(ni));
    for row in buf.chunks_mut(ni) {
        fi.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); ns];
    for b in 0..ni {
        for a in 0..ns {
            col[a] = buf[a * ni + b];
        }
        fs.process(&mut col);
        for a in 0..ns {
            buf[a * ni + b] = col[a];
        }
    }
    let (dts, dti) = (2.0 * PI / (ns as f64 * jsa.omega_s.step), 2.0 * PI / (ni as f64 * jsa.omega_i.step));
    let axis = |n: usize, dt: f64| -> Vec<f64> { (0..n).map(|k| (k as f64 - (n / 2) as f64) * dt).collect() };
    let (t_s, t_i) = (axis(ns, dts), axis(ni, dti));
    let scale = jsa.omega_s.step * jsa.omega_i.step / (2.0 * PI);
    let values = DMatrix::from_fn(ns, ni, |x, y| {
        // unshifted bin of a centred time index
        let (ka, kb) = ((x + ns - ns / 2) % ns, (y + ni - ni / 2) % ni);
        let phase = -(jsa.omega_s.start * t_s[x] + jsa.omega_i.start * t_i[y]);
        buf[ka * ni + kb] * Complex64::from_polar(scale, phase)
    });
    Ok(TemporalAmplitude { t_s, t_i, values })
}

/// p(t_i | t_s = 0) = C |Phi~(0, t_i)|^2 with unit integral.
pub fn conditional_profile(tm: &TemporalAmplitude) -> Result<(Vec<f64>, Vec<f64>)> {
    let zero = tm.t_s.iter().position(|&t| t == 0.0).ok_or_else(|| Error::Domain("t_s = 0 not on the grid".into()))?;
    let p: Vec<f64> = tm.values.row(zero).iter().map(|v| v.norm_sqr()).collect();
    let dt = tm.t_i[1] - tm.t_i[0];
    let total: f64 = p.iter().sum::<f64>() * dt;
    if !(total > 0.0) {
        return Err(Error::Degenerate("zero conditional profile".into()));
    }
    Ok((tm.t_i.clone(), p.into_iter().map(|v| v / total).collect()))
}

/// Conditional idler profile p(t_i | t_s = 0) in the exact cw limit, where the
/// temporal amplitude depends on t_s - t_i only. `amplitude` is the cw amplitude on
/// the signal grid; the grid is zero-padded by `pad`.
pub fn cw_conditional_profile(
    triple: &ProcessTriple,
    omega_p: f64,
    ws: &FrequencyGrid,
    amplitude: &[Complex64],
    pad: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if amplitude.len() != ws.len {
        return Err(Error::Mismatch(format!("{} amplitudes on a {}-point grid", amplitude.len(), ws.len)));
    }
    let n = (ws.len * pad.max(1)).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (k, a) in amplitude.iter().enumerate() {
        let (w_s, w_i) = (ws.at(k), omega_p - ws.at(k));
        let w = (w_s * w_i / (triple.signal.n_eff(w_s)? * triple.idler.n_eff(w_i)?)).sqrt();
        buf[k] = a * w;
    }
    // int dw_s K(w_s) exp(+i w_s t_i): an inverse transform up to a phase
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let dt = 2.0 * PI / (n as f64 * ws.step);
    let t: Vec<f64> = (0..n).map(|k| (k as f64 - (n / 2) as f64) * dt).collect();
    let p: Vec<f64> = (0..n).map(|k| buf[(k + n - n / 2) % n].norm_sqr()).collect();
    let total: f64 = p.iter().sum::<f64>() * dt;
    if !(total > 0.0) {
        return Err(Error::Degenerate("zero conditional profile".into()));
    }
    Ok((t, p.into_iter().map(|v| v / total).collect()))
}

/// Two-process OAM qubit pair C1 |+1,-1> + C2 |-1,+1> with partial coherence
/// (1 for a pure state) and white noise of weight p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OamQubitState {
    pub amplitudes: (Complex64, Complex64),
    pub coherence: f64,
    pub noise_weight: f64,
}

impl OamQubitState {
    pub fn new(c1: Complex64, c2: Complex64, noise_weight: f64) -> Result<Self> {
        let n = (c1.norm_sqr() + c2.norm_sqr()).sqrt();
        if !(n > 0.0) {
            return Err(Error::Degenerate("zero OAM amplitudes".into()));
        }
        if !(0.0..=1.0).contains(&noise_weight) {
            return Err(Error::Domain(format!("noise weight {noise_weight} outside [0, 1]")));
        }
        Ok(OamQubitState { amplitudes: (c1 / n, c2 / n), coherence: 1.0, noise_weight })
    }

    pub fn maximally_entangled(noise_weight: f64) -> Result<Self> {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), noise_weight)
    }

    /// State whose reduced density operator is the Gram matrix of the two process JSAs.
    pub fn from_jsas(j1: &Jsa, j2: &Jsa, noise_weight: f64) -> Result<Self> {
        if j1.values.shape() != j2.values.shape() || j1.omega_s != j2.omega_s || j1.omega_i != j2.omega_i {
            return Err(Error::Mismatch("process JSAs on different grids".into()));
        }
        let d = j1.omega_s.step * j1.omega_i.step;
        let g11 = j1.norm_sq();
        let g22 = j2.norm_sq();
        let g12: Complex64 = j1.values.iter().zip(j2.values.iter()).map(|(a, b)| a * b.conj()).sum::<Complex64>() * d;
        let mut s = Self::new(Complex64::new(g11.sqrt(), 0.0), Complex64::from_polar(g22.sqrt(), -g12.arg()), noise_weight)?;
        s.coherence = (g12.norm() / (g11 * g22).sqrt()).min(1.0);
        Ok(s)
    }

    pub fn with_noise(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("noise weight {p} outside [0, 1]")));
        }
        Ok(OamQubitState { noise_weight: p, ..*self })
    }

    /// rho' = (1 - p) rho + p I/4 in the basis |s,i> with l = +1 -> 0 and l = -1 -> 1.
    pub fn density(&self) -> Matrix4<Complex64> {
        let (c1, c2) = self.amplitudes;
        let mut rho = Matrix4::<Complex64>::zeros();
        rho[(1, 1)] = Complex64::new(c1.norm_sqr(), 0.0);
        rho[(2, 2)] = Complex64::new(c2.norm_sqr(), 0.0);
        rho[(1, 2)] = c1 * c2.conj() * self.coherence;
        rho[(2, 1)] = rho[(1, 2)].conj();
        let p = self.noise_weight;
        rho * Complex64::new(1.0 - p, 0.0) + Matrix4::identity() * Complex64::new(p / 4.0, 0.0)
    }
}

fn paulis() -> [nalgebra::Matrix2<Complex64>; 3] {
    let (o, i, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0));
    [nalgebra::Matrix2::new(z, o, o, z), nalgebra::Matrix2::new(z, -i, i, z), nalgebra::Matrix2::new(o, z, z, -o)]
}

/// T_jk = Tr(rho sigma_j (x) sigma_k).
pub fn correlation_matrix(rho: &Matrix4<Complex64>) -> Matrix3<f64> {
    let s = paulis();
    Matrix3::from_fn(|j, k| {
        let op = s[j].kronecker(&s[k]);
        (rho * op).trace().re
    })
}

/// Maximal CHSH value 2 sqrt(m1 + m2) from the two largest eigenvalues of T^T T.
pub fn chsh_max(state: &OamQubitState) -> f64 {
    let t = correlation_matrix(&state.density());
    let mut ev: Vec<f64> = SymmetricEigen::new(t.transpose() * t).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    2.0 * (ev[0] + ev[1]).max(0.0).sqrt()
}

/// Noise weight at which chsh_max falls to 2, or None if it never exceeds 2.
pub fn chsh_threshold(state: &OamQubitState) -> Result<Option<f64>> {
    let s = |p: f64| -> Result<f64> { Ok(chsh_max(&state.with_noise(p)?) - 2.0) };
    if s(0.0)? <= 0.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if s(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Signal window of +/- `half_span_fwhm` marginal widths around a centre, as a grid.
pub fn window_grid(lambda_um: f64, fwhm_nm: f64, half_span_fwhm: f64, len: usize) -> Result<FrequencyGrid> {
    FrequencyGrid::centered(crate::units::omega_from_um(lambda_um), 2.0 * half_span_fwhm * domega(lambda_um, fwhm_nm), len)
}
