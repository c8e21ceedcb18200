//! Scenario configuration (TOML, unit-suffixed keys) and the solved scenario it describes.

use crate::error::{Error, Result};
use crate::materials::{MaterialLibrary, RegionStack, CLADDING_MODEL, CORE_MODEL};
use crate::modesolver::{parse_label, FiberGeometry, GuidedMode, ModeSolver, RingFiber};
use crate::qpm::{QpmGrating, CHI_XXX_PM_PER_V, CHI_XYY_PM_PER_V};
use crate::spdc::{
    cw_signal_density, enumerate_triples, idler_density, jsa, per_nm, recalibrate_period, signal_density, FrequencyGrid, Jsa,
    ProcessTriple, PumpKind, PumpSpectrum,
};
use crate::units::{omega_from_um, um_from_omega};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const PRESETS: [&str; 3] = ["narrowband", "broadband", "oam-entangled"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub fiber: FiberConfig,
    pub grating: GratingConfig,
    pub pump: PumpConfig,
    pub process: ProcessConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub r1_um: f64,
    pub r2_um: f64,
    /// optional Sellmeier library replacing the built-in one
    pub materials_file: Option<PathBuf>,
    pub inner_material: String,
    pub core_material: String,
    pub outer_material: String,
}

impl Default for FiberConfig {
    fn default() -> Self {
        let g = FiberGeometry::standard();
        FiberConfig {
            r1_um: g.r1,
            r2_um: g.r2,
            materials_file: None,
            inner_material: CLADDING_MODEL.into(),
            core_material: CORE_MODEL.into(),
            outer_material: CLADDING_MODEL.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recalibration {
    pub lambda_s_um: f64,
    /// defaults to energy conservation with the pump
    pub lambda_i_um: Option<f64>,
    #[serde(default = "one")]
    pub order: i32,
    /// index into the triple list
    #[serde(default)]
    pub triple: usize,
}

fn one() -> i32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingConfig {
    pub period_um: Option<f64>,
    pub recalibrate: Option<Recalibration>,
    /// reference period reported next to a recalibrated one
    pub nominal_period_um: Option<f64>,
    pub length_cm: f64,
    #[serde(default = "chi_xxx")]
    pub chi_xxx_pm_per_v: f64,
    #[serde(default = "chi_xyy")]
    pub chi_xyy_pm_per_v: f64,
    #[serde(default = "orders")]
    pub orders: Vec<i32>,
}

fn chi_xxx() -> f64 {
    CHI_XXX_PM_PER_V
}
fn chi_xyy() -> f64 {
    CHI_XYY_PM_PER_V
}
fn orders() -> Vec<i32> {
    vec![1, -1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpKindConfig {
    Cw,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    pub mode: String,
    pub kind: PumpKindConfig,
    pub lambda_um: f64,
    pub sigma_nm: Option<f64>,
    #[serde(default = "unit_power")]
    pub power_w: f64,
}

fn unit_power() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    /// (signal, idler) label pairs
    #[serde(default)]
    pub triples: Vec<[String; 2]>,
    #[serde(default)]
    pub enumerate: bool,
    /// signal window searched by enumeration
    pub enumerate_window_um: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub census_lambda_um: f64,
    /// band over which signal and idler modes are tracked
    pub band_um: [f64; 2],
    pub track_step_nm: f64,
    /// signal wavelengths of marginal spectra and mismatch curves
    pub spectrum_window_um: [f64; 2],
    pub spectrum_points: usize,
    /// signal wavelengths of joint spectra
    pub jsa_window_um: [f64; 2],
    pub jsa_points: usize,
    /// zero-padding factor of time transforms
    pub time_pad: usize,
    pub sigma_sweep_nm: Vec<f64>,
    pub noise_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            census_lambda_um: 1.55,
            band_um: [1.25, 2.05],
            track_step_nm: 0.5,
            spectrum_window_um: [1.3, 1.9],
            spectrum_points: 4001,
            jsa_window_um: [1.47, 1.53],
            jsa_points: 1024,
            time_pad: 8,
            sigma_sweep_nm: vec![0.4, 0.5, 0.6, 0.7, 0.85],
            noise_points: 101,
        }
    }
}

fn bad(msg: String) -> Error {
    Error::Config(msg)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| bad(format!("{}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| bad(e.to_string()))
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "narrowband" => NARROWBAND,
            "broadband" => BROADBAND,
            "oam-entangled" => OAM_ENTANGLED,
            _ => return Err(bad(format!("unknown preset '{name}' (known: {})", PRESETS.join(", ")))),
        };
        Self::from_toml_str(text)
    }

    pub fn validate(&self) -> Result<()> {
        FiberGeometry::new(self.fiber.r1_um, self.fiber.r2_um)?;
        let g = &self.grating;
        if g.period_um.is_some() == g.recalibrate.is_some() {
            return Err(bad("grating needs exactly one of period_um and recalibrate".into()));
        }
        if !(g.length_cm > 0.0) {
            return Err(bad(format!("grating length_cm must be positive, got {}", g.length_cm)));
        }
        parse_label(&self.pump.mode)?;
        for [s, i] in &self.process.triples {
            parse_label(s)?;
            parse_label(i)?;
        }
        if self.process.triples.is_empty() && !self.process.enumerate {
            return Err(bad("no triples listed and enumeration disabled".into()));
        }
        if self.process.enumerate && self.process.enumerate_window_um.is_none() {
            return Err(bad("enumeration needs enumerate_window_um".into()));
        }
        if let Some(r) = &g.recalibrate {
            if r.triple >= self.process.triples.len() {
                return Err(bad(format!("recalibration triple {} not listed", r.triple)));
            }
            if let Some(li) = r.lambda_i_um {
                let mismatch = omega_from_um(r.lambda_s_um) + omega_from_um(li) - omega_from_um(self.pump.lambda_um);
                if mismatch.abs() > 1e-9 * omega_from_um(self.pump.lambda_um) {
                    return Err(bad(format!("recalibration target {} + {} um violates energy conservation", r.lambda_s_um, li)));
                }
            }
        }
        if self.pump.kind == PumpKindConfig::Gaussian && !self.pump.sigma_nm.is_some_and(|s| s > 0.0) {
            return Err(bad("gaussian pump needs a positive sigma_nm".into()));
        }
        if !(self.pump.power_w > 0.0 && self.pump.lambda_um > 0.0) {
            return Err(bad("pump power and wavelength must be positive".into()));
        }
        let gr = &self.grid;
        let windows = [gr.band_um, gr.spectrum_window_um, gr.jsa_window_um];
        if windows.iter().any(|w| !(w[0] > 0.0 && w[1] > w[0])) {
            return Err(bad("wavelength windows must be increasing and positive".into()));
        }
        if gr.spectrum_points < 4 || gr.jsa_points < 4 || gr.noise_points < 2 || !(gr.track_step_nm > 0.0) || gr.time_pad == 0 {
            return Err(bad("grid sizes must be positive (at least 4 points)".into()));
        }
        Ok(())
    }

    pub fn pump_spectrum(&self) -> PumpSpectrum {
        match self.pump.kind {
            PumpKindConfig::Cw => PumpSpectrum::cw(self.pump.lambda_um, self.pump.power_w),
            PumpKindConfig::Gaussian => PumpSpectrum::gaussian(self.pump.lambda_um, self.pump.sigma_nm.unwrap_or(0.0), self.pump.power_w),
        }
    }

    pub fn fiber(&self) -> Result<RingFiber> {
        let lib = match &self.fiber.materials_file {
            Some(p) => MaterialLibrary::load(p)?,
            None => MaterialLibrary::builtin(),
        };
        let stack = RegionStack::from_library(&lib, &self.fiber.inner_material, &self.fiber.core_material, &self.fiber.outer_material)?;
        Ok(RingFiber::new(FiberGeometry::new(self.fiber.r1_um, self.fiber.r2_um)?, stack))
    }
}

/// Modes, grating and triples of a configured scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub solver: ModeSolver,
    pub pump_mode: GuidedMode,
    pub modes: Vec<GuidedMode>,
    pub grating: QpmGrating,
    pub triples: Vec<ProcessTriple>,
    pub pump: PumpSpectrum,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        let solver = ModeSolver::new(config.fiber()?);
        let pump = config.pump_spectrum();
        let lp = config.pump.lambda_um;
        let margin = match pump.kind {
            PumpKind::Cw => 0.012,
            PumpKind::Gaussian => 0.012 + 10.0 * config.pump.sigma_nm.unwrap_or(0.0) * 1e-3,
        };
        let pump_mode = solver.track_label(&config.pump.mode, lp - margin, lp + margin, 0.1)?;
        let g = &config.grid;
        let census = solver.census(omega_from_um(g.census_lambda_um), crate::specfun::MAX_ORDER)?;
        let modes = solver.track_all(&census, g.band_um[0], g.band_um[1], g.track_step_nm)?;
        let find = |label: &str| -> Result<GuidedMode> {
            let (family, n, idx, pol) = parse_label(label)?;
            modes
                .iter()
                .find(|m| m.family() == family && m.n() == n && m.radial_index() == idx && m.polarization == pol)
                .cloned()
                .ok_or_else(|| Error::Config(format!("mode {label} is not guided over {:?} um", g.band_um)))
        };
        let mut triples = config
            .process
            .triples
            .iter()
            .map(|[s, i]| ProcessTriple::new(pump_mode.clone(), find(s)?, find(i)?))
            .collect::<Result<Vec<_>>>()?;
        let gc = &config.grating;
        let period = match (&gc.period_um, &gc.recalibrate) {
            (Some(p), _) => *p,
            (None, Some(r)) => {
                let li = r.lambda_i_um.unwrap_or_else(|| um_from_omega(pump.omega0 - omega_from_um(r.lambda_s_um)));
                recalibrate_period(&triples[r.triple], r.lambda_s_um, li, r.order)?
            }
            (None, None) => unreachable!("validated"),
        };
        let grating = QpmGrating::from_length(period, gc.length_cm * 1e4, gc.chi_xxx_pm_per_v, gc.chi_xyy_pm_per_v)?;
        if config.process.enumerate {
            let w = config.process.enumerate_window_um.expect("validated");
            for c in enumerate_triples(&pump_mode, &modes, &grating, pump.omega0, (w[0], w[1]), &gc.orders)? {
                if !triples.iter().any(|t| t.label() == c.triple.label()) {
                    triples.push(c.triple);
                }
            }
        }
        Ok(Scenario { config: config.clone(), solver, pump_mode, modes, grating, triples, pump })
    }
}

const NARROWBAND: &str = r#"
name = "narrowband"

[grating]
nominal_period_um = 42.9
length_cm = 10.0
recalibrate = { lambda_s_um = 1.5 }

[pump]
mode = "HE21R"
kind = "cw"
lambda_um = 0.775

[process]
triples = [["HE21R", "HE11R"], ["HE21R", "HE11L"]]
enumerate = true
enumerate_window_um = [1.3, 1.55]

[grid]
spectrum_window_um = [1.3, 1.9]
jsa_window_um = [1.47, 1.53]
jsa_points = 512
"#;

const BROADBAND: &str = r#"
name = "broadband"

[grating]
nominal_period_um = 42.28
length_cm = 10.0
recalibrate = { lambda_s_um = 1.55 }

[pump]
mode = "HE11R"
kind = "cw"
lambda_um = 0.775

[process]
triples = [["TE01", "TE01"]]

[grid]
spectrum_window_um = [1.27, 1.99]
jsa_window_um = [1.27, 1.99]
jsa_points = 512
time_pad = 16
"#;

const OAM_ENTANGLED: &str = r#"
name = "oam-entangled"

[grating]
nominal_period_um = 41.06
length_cm = 10.0
recalibrate = { lambda_s_um = 1.35 }

[pump]
mode = "HE11R"
kind = "gaussian"
lambda_um = 0.775
sigma_nm = 0.85

[process]
triples = [["HE21R", "HE21L"], ["HE21L", "HE21R"]]

[grid]
spectrum_window_um = [1.27, 1.45]
jsa_window_um = [1.26, 1.44]
jsa_points = 600
"#;

/// Marginal spectra of one process, or of two processes whose signal or idler
/// differ only in R/L handedness (summed, `superposition` set).
#[derive(Debug, Clone)]
pub struct SpectrumGroup {
    pub label: String,
    pub superposition: bool,
    /// wavelength (um) and pairs / s / nm for the signal photon
    pub signal: (Vec<f64>, Vec<f64>),
    pub idler: (Vec<f64>, Vec<f64>),
}

fn circular_twins(a: &GuidedMode, b: &GuidedMode) -> bool {
    use crate::modesolver::Polarization::{L, R};
    a.same_curve(b) && matches!((a.polarization, b.polarization), (R, L) | (L, R))
}

/// Partition of triple indices into degenerate R/L groups with their labels.
pub fn degenerate_groups(triples: &[ProcessTriple]) -> Vec<(String, bool, Vec<usize>)> {
    let mut taken = vec![false; triples.len()];
    let mut out = Vec::new();
    for a in 0..triples.len() {
        if taken[a] {
            continue;
        }
        taken[a] = true;
        let t = &triples[a];
        let twin = (a + 1..triples.len()).find(|&b| {
            let u = &triples[b];
            !taken[b]
                && t.pump.full_label() == u.pump.full_label()
                && ((t.signal.full_label() == u.signal.full_label() && circular_twins(&t.idler, &u.idler))
                    || (t.idler.full_label() == u.idler.full_label() && circular_twins(&t.signal, &u.signal)))
        });
        match twin {
            Some(b) => {
                taken[b] = true;
                let u = &triples[b];
                let label = if t.signal.full_label() == u.signal.full_label() {
                    format!("{}/{}/{}{{R,L}}", t.pump.full_label(), t.signal.full_label(), t.idler.label())
                } else {
                    format!("{}/{}{{R,L}}/{}", t.pump.full_label(), t.signal.label(), t.idler.full_label())
                };
                out.push((label, true, vec![a, b]));
            }
            None => out.push((t.label(), false, vec![a])),
        }
    }
    out
}

impl Scenario {
    pub fn omega_p(&self) -> f64 {
        self.pump.omega0
    }

    /// Signal grid of joint spectra and the conjugate idler grid.
    pub fn jsa_grids(&self) -> Result<(FrequencyGrid, FrequencyGrid)> {
        let w = self.config.grid.jsa_window_um;
        let ws = FrequencyGrid::from_wavelengths(w[0], w[1], self.config.grid.jsa_points)?;
        let wi = FrequencyGrid::new(self.omega_p() - ws.end(), ws.step, ws.len)?;
        Ok((ws, wi))
    }

    pub fn jsa(&self, triple: usize) -> Result<Jsa> {
        let t = self.triple(triple)?;
        let (ws, wi) = self.jsa_grids()?;
        jsa(t, &self.pump, &self.grating, &ws, &wi)
    }

    pub fn triple(&self, k: usize) -> Result<&ProcessTriple> {
        self.triples.get(k).ok_or_else(|| Error::Config(format!("scenario has no triple #{k}")))
    }

    /// Signal wavelength at which the grating was matched (or the window centre).
    pub fn design_lambda_s(&self) -> f64 {
        match &self.config.grating.recalibrate {
            Some(r) => r.lambda_s_um,
            None => {
                let w = self.config.grid.jsa_window_um;
                0.5 * (w[0] + w[1])
            }
        }
    }

    /// Marginal spectra of every process (degenerate R/L pairs summed). A cw pump
    /// uses the exact cw marginal on the spectrum window, a pulsed pump the joint
    /// spectrum on the jsa window.
    pub fn spectra(&self) -> Result<Vec<SpectrumGroup>> {
        let wp = self.omega_p();
        let per: Vec<((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))> = match self.pump.kind {
            PumpKind::Cw => {
                let w = self.config.grid.spectrum_window_um;
                let ws = FrequencyGrid::from_wavelengths(w[0], w[1], self.config.grid.spectrum_points)?;
                self.triples
                    .iter()
                    .map(|t| {
                        let d = cw_signal_density(t, &self.pump, &self.grating, &ws)?;
                        Ok(split_marginal(&ws.values(), &d, &ws.values().iter().map(|x| wp - x).collect::<Vec<_>>(), &d))
                    })
                    .collect::<Result<_>>()?
            }
            PumpKind::Gaussian => {
                let (ws, wi) = self.jsa_grids()?;
                self.triples
                    .iter()
                    .map(|t| {
                        let j = jsa(t, &self.pump, &self.grating, &ws, &wi)?;
                        Ok(split_marginal(&ws.values(), &signal_density(&j), &wi.values(), &idler_density(&j)))
                    })
                    .collect::<Result<_>>()?
            }
        };
        Ok(degenerate_groups(&self.triples)
            .into_iter()
            .map(|(label, superposition, idx)| {
                let mut g = SpectrumGroup { label, superposition, signal: per[idx[0]].0.clone(), idler: per[idx[0]].1.clone() };
                for &k in &idx[1..] {
                    add_into(&mut g.signal.1, &per[k].0 .1);
                    add_into(&mut g.idler.1, &per[k].1 .1);
                }
                g
            })
            .collect())
    }

    /// Total photon density (signal and idler photons of every process) on a grid
    /// symmetric about half the pump frequency, starting at the blue edge of the
    /// spectrum window. Returns wavelengths (um, decreasing) and photons / s / nm.
    pub fn total_spectrum(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.pump.kind != PumpKind::Cw {
            return Err(Error::Config("total spectrum needs a cw pump".into()));
        }
        let wp = self.omega_p();
        let hi = omega_from_um(self.config.grid.spectrum_window_um[0]);
        let n = self.config.grid.spectrum_points;
        let grid = FrequencyGrid::new(wp - hi, (2.0 * hi - wp) / (n - 1) as f64, n)?;
        let mut total = vec![0.0; n];
        for t in &self.triples {
            let d = cw_signal_density(t, &self.pump, &self.grating, &grid)?;
            for k in 0..n {
                total[k] += d[k] + d[n - 1 - k];
            }
        }
        let lambda: Vec<f64> = grid.values().iter().map(|&w| um_from_omega(w)).collect();
        let density = lambda.iter().zip(&total).map(|(&l, &v)| per_nm(l, v)).collect();
        Ok((lambda, density))
    }
}

fn split_marginal(ws: &[f64], ds: &[f64], wi: &[f64], di: &[f64]) -> ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>)) {
    let conv = |w: &[f64], d: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let l: Vec<f64> = w.iter().map(|&x| um_from_omega(x)).collect();
        let v = l.iter().zip(d).map(|(&l, &v)| per_nm(l, v)).collect();
        (l, v)
    };
    (conv(ws, ds), conv(wi, di))
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
