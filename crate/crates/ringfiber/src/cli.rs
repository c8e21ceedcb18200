//! Command-line front end. Every command writes CSV files into the output directory
//! and a short summary on stdout.

use crate::config::{Scenario, ScenarioConfig};
use crate::entangle::{
    chsh_max, chsh_threshold, conditional_profile, cw_conditional_profile, k_omega_vs_pump, k_theta, schmidt_jsa, temporal_amplitude,
    OamQubitState, TransverseProcess,
};
use crate::error::{Error, Result};
use crate::modesolver::Component;
use crate::oam::{decompose, DEFAULT_L_MAX};
use crate::spdc::{count_peaks, cw_amplitude, fwhm, phase_mismatch, FrequencyGrid, PumpKind};
use crate::specfun::MAX_ORDER;
use crate::units::{omega_from_um, um_from_omega};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "ringfiber", version, about = "Photon-pair spectra of a poled ring-core fiber")]
pub struct Cli {
    /// scenario file (TOML)
    #[arg(long, global = true, env = "RINGFIBER_CONFIG", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// built-in scenario: narrowband, broadband or oam-entangled
    #[arg(long, global = true, env = "RINGFIBER_PRESET")]
    pub preset: Option<String>,
    /// output directory
    #[arg(long, global = true, env = "RINGFIBER_OUT", default_value = "out")]
    pub out: PathBuf,
    /// worker threads (0: all cores)
    #[arg(long, global = true, env = "RINGFIBER_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// echoed in the summary; every computation is deterministic
    #[arg(long, global = true, env = "RINGFIBER_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// guided modes at the census wavelength
    Modes,
    /// n_eff against wavelength
    Dispersion,
    /// OAM content of each guided mode
    Oam,
    /// phase mismatch and grating response along the cw pairing line
    Mismatch,
    /// marginal photon spectra
    SpdcSpectrum,
    /// joint spectral intensity of the first process
    JointSpectrum,
    /// conditional idler arrival-time profile of the first process
    Temporal,
    /// spectral and transverse Schmidt numbers
    Schmidt,
    /// CHSH value against white-noise weight
    Chsh,
}

/// Runs the CLI on explicit arguments and maps errors to exit codes:
/// 2 for configuration problems, 3 for numerical failures.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ringfiber: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

pub fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    match (&cli.config, &cli.preset) {
        (Some(p), _) => ScenarioConfig::load(p),
        (None, Some(name)) => ScenarioConfig::preset(name),
        (None, None) => Err(Error::Config("one of --config or --preset is required".into())),
    }
}

/// Runs one command and returns the stdout summary.
pub fn execute(cli: &Cli) -> Result<String> {
    let cfg = load_config(cli)?;
    if cli.threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Io(format!("{}: {e}", cli.out.display())))?;
    let scenario = Scenario::build(&cfg)?;
    let mut summary = format!("scenario {} seed {}\n", cfg.name, cli.seed);
    let period = scenario.grating.period;
    match cfg.grating.nominal_period_um {
        Some(nom) => writeln!(summary, "period {period:.6} um (reference {nom} um, {:+.2}%)", 100.0 * (period / nom - 1.0)),
        None => writeln!(summary, "period {period:.6} um"),
    }
    .expect("write to String");
    let out = cli.out.as_path();
    match cli.command {
        Command::Modes => modes(&scenario, out, &mut summary)?,
        Command::Dispersion => dispersion(&scenario, out, &mut summary)?,
        Command::Oam => oam(&scenario, out, &mut summary)?,
        Command::Mismatch => mismatch(&scenario, out, &mut summary)?,
        Command::SpdcSpectrum => spectrum(&scenario, out, &mut summary)?,
        Command::JointSpectrum => joint(&scenario, out, &mut summary)?,
        Command::Temporal => temporal(&scenario, out, &mut summary)?,
        Command::Schmidt => schmidt(&scenario, out, &mut summary)?,
        Command::Chsh => chsh(&scenario, out, &mut summary)?,
    }
    Ok(summary)
}

/// 17 significant digits.
fn g(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn line(summary: &mut String, text: String) {
    summary.push_str(&text);
    summary.push('\n');
}

fn modes(sc: &Scenario, out: &Path, summary: &mut String) -> Result<()> {
    let w = omega_from_um(sc.config.grid.census_lambda_um);
    let census = sc.solver.census(w, MAX_ORDER)?;
    let rows = census
        .iter()
        .map(|m| Ok(format!("{},{:?},{},{},{},{}", m.full_label(), m.family(), m.n(), m.radial_index(), g(m.n_eff(w)?), g(m.beta(w)?))))
        .collect::<Result<Vec<_>>>()?;
    write_csv(out, "modes.csv", "label,family,n,radial_index,n_eff,beta_per_m", &rows)?;
    line(summary, format!("{} guided modes at {} um", rows.len(), sc.config.grid.census_lambda_um));
    Ok(())
}

fn dispersion(sc: &Scenario, out: &Path, summary: &mut String) -> Result<()> {
    let mut rows = Vec::new();
    for m in &sc.modes {
        let (lo, hi) = m.omega_range();
        let n = 161;
        for k in 0..n {
            let w = hi - (hi - lo) * k as f64 / (n - 1) as f64;
            rows.push(format!("{},{},{},{}", m.full_label(), g(um_from_omega(w) * 1e3), g(m.n_eff(w)?), g(m.beta(w)?)));
        }
    }
    write_csv(out, "dispersion.csv", "label,lambda_nm,n_eff,beta_per_m", &rows)?;
    line(summary, format!("{} tracked modes", sc.modes.len()));
    Ok(())
}

fn oam(sc: &Scenario, out: &Path, summary: &mut String) -> Result<()> {
    let w = omega_from_um(sc.config.grid.census_lambda_um);
    let mut rows = Vec::new();
    let mut mixed = 0;
    for m in sc.solver.census(w, MAX_ORDER)? {
        for c in [Component::X, Component::Y, Component::Z] {
            let spec = decompose(&m, c, w, DEFAULT_L_MAX)?;
            if c != Component::Z && spec.is_mixed() {
                mixed += 1;
            }
            for (l, p) in &spec.probs {
                rows.push(format!("{},{},{},{},{}", spec.label, spec.component, l, g(*p), spec.is_mixed()));
            }
        }
    }
    write_csv(out, "oam.csv", "label,component,l,probability,mixed", &rows)?;
    line(summary, format!("{mixed} mixed transverse components"));
    Ok(())
}

fn mismatch(sc: &Scenario, out: &Path, summary: &mut String) -> Result<()> {
    let w = sc.config.grid.spectrum_window_um;
    let ws = FrequencyGrid::from_wavelengths(w[0], w[1], sc.config.grid.spectrum_points)?;
    let wp = sc.omega_p();
    let mut rows = Vec::new();
    for t in &sc.triples {
        for x in ws.values() {
            let db = phase_mismatch(t, x, wp - x)?;
            let chi = sc.grating.spectrum(-db).norm();
            rows.push(format!("{},{},{},{},{}", t.label(), g(um_from_omega(x) * 1e3), g(um_from_omega(wp - x) * 1e3), g(db), g(chi)));
        }
    }
    write_csv(out, "mismatch.csv", "triple,lambda_s_nm,lambda_i_nm,delta_beta_per_m,grating_response", &rows)?;
    line(summary, format!("{} processes, grating wavevector {:.6e} rad/m", sc.triples.len(), sc.grating.k_grating()));
    Ok(())
}

fn spectrum(sc: &Scenario, out: &Path, summary: &mut String) -> Result<()> {
    let groups = sc.spectra()?;
    let mut rows = Vec::new();
    for gr in &groups {
        for (photon, (ls, ds)) in [("signal", &gr.signal), ("idler", &gr.idler)] {
            for (l, d) in ls.iter().zip(ds) {
                rows.push(format!("{},{},{},{},{}", gr.label, photon, gr.superposition, g(l * 1e3), g(*d)));
            }
        }
        let peak = gr.signal.1.iter().fold(0.0f64, |a, &b| a.max(b));
        let width = fwhm(&gr.signal.0, &gr.signal.1).map(|x| format!("{:.3} nm", x * 1e3)).unwrap_or_else(|| "n/a".into());
        line(
            summary,
            format!("{}{}: peak {:.4e} pairs/s/nm, fwhm {width}", gr.label, if gr.superposition { " (superposition)" } else { "" }, peak),
        );
    }
    write_csv(out, "spectrum.csv", "process,photon,superposition,lambda_nm,pairs_per_s_per_nm", &rows)?;
    if sc.pump.kind == PumpKind::Cw {
        let (ls, ds) = sc.total_spectrum()?;
        let rows: Vec<String> = ls.iter().zip(&ds).map(|(l, d)| format!("{},{}", g(l * 1e3), g(*d))).collect();
        write_csv(out, "spectrum_total.csv", "lambda_nm,photons_per_s_per_nm", &rows)?;
        let peaks = count_peaks(&ds, 0.1);
        let at: Vec<String> = peaks.iter().map(|&k| format!("{:.1}", ls[k] * 1e3)).collect();
        line(summary, format!("{} resolvable peaks at {} nm", peaks.len(), at.join(", ")));
    }
    Ok(())
}

fn joint(sc: &Scenario, out: &Path, summary: &mut String) -> Result<()> {
    let j = sc.jsa(0)?;
    let mut rows = Vec::with_capacity(j.omega_s.len * j.omega_i.len);
    for a in 0..j.omega_s.len {
        let ls = g(um_from_omega(j.omega_s.at(a)) * 1e3);
        for b in 0..j.omega_i.len {
            let v = j.values[(a, b)];
            rows.push(format!("{ls},{},{},{}", g(um_from_omega(j.omega_i.at(b)) * 1e3), g(v.norm_sqr()), g(v.arg())));
        }
    }
    write_csv(out, "joint.csv", "lambda_s_nm,lambda_i_nm,pair_density,phase_rad", &rows)?;
    line(summary, format!("{}: {:.6e} pairs/s on a {}x{} grid", j.triple_label, j.norm_sq(), j.omega_s.len, j.omega_i.len));
    Ok(())
}

fn temporal(sc: &Scenario, out: &Path, summary: &mut String) -> Result<()> {
    let t = sc.triple(0)?;
    let pad = sc.config.grid.time_pad;
    let (times, p) = match sc.pump.kind {
        PumpKind::Cw => {
            let w = sc.config.grid.jsa_window_um;
            let ws = FrequencyGrid::from_wavelengths(w[0], w[1], sc.config.grid.jsa_points)?;
            let amp = cw_amplitude(t, &sc.pump, &sc.grating, &ws)?;
            cw_conditional_profile(t, sc.omega_p(), &ws, &amp, pad)?
        }
        PumpKind::Gaussian => conditional_profile(&temporal_amplitude(&sc.jsa(0)?, pad)?)?,
    };
    let rows: Vec<String> = times.iter().zip(&p).map(|(t, v)| format!("{},{}", g(t * 1e15), g(*v))).collect();
    write_csv(out, "temporal.csv", "t_i_fs,probability_per_s", &rows)?;
    let width = fwhm(&times, &p).map(|x| format!("{x:.4e} s")).unwrap_or_else(|| "n/a".into());
    line(summary, format!("{}: conditional profile fwhm {width}", t.label()));
    Ok(())
}

fn schmidt(sc: &Scenario, out: &Path, summary: &mut String) -> Result<()> {
    let t = sc.triple(0)?;
    let (ws, wi) = sc.jsa_grids()?;
    let sweep = k_omega_vs_pump(t, &sc.grating, sc.pump.lambda_um(), &sc.config.grid.sigma_sweep_nm, &ws, &wi)?;
    let rows: Vec<String> = sweep.iter().map(|(s, k)| format!("{},{}", g(*s), g(*k))).collect();
    write_csv(out, "schmidt_k_omega.csv", "sigma_nm,k_omega", &rows)?;
    for (s, k) in &sweep {
        line(summary, format!("sigma {s} nm: K_omega {k:.4}"));
    }
    let res = schmidt_jsa(&sc.jsa(0)?)?;
    let rows: Vec<String> = res.coefficients.iter().take(100).enumerate().map(|(k, c)| format!("{k},{}", g(*c))).collect();
    write_csv(out, "schmidt_coefficients.csv", "index,coefficient", &rows)?;
    line(summary, format!("configured pump: K_omega {:.4}", res.schmidt_number));
    if sc.triples.len() >= 2 {
        let procs = sc
            .triples
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let n = sc.jsa(k)?.norm_sq();
                Ok(TransverseProcess { signal: t.signal.clone(), idler: t.idler.clone(), amplitude: Complex64::new(n.sqrt(), 0.0) })
            })
            .collect::<Result<Vec<_>>>()?;
        let ls = sc.design_lambda_s();
        let w_s = omega_from_um(ls);
        let kt = k_theta(&procs, w_s, sc.omega_p() - w_s)?;
        line(summary, format!("K_theta {kt:.6} at {ls} um"));
    }
    Ok(())
}

fn chsh(sc: &Scenario, out: &Path, summary: &mut String) -> Result<()> {
    if sc.triples.len() < 2 {
        return Err(Error::Config("chsh needs two processes (l = +1/-1 and l = -1/+1)".into()));
    }
    let state = OamQubitState::from_jsas(&sc.jsa(0)?, &sc.jsa(1)?, 0.0)?;
    let n = sc.config.grid.noise_points;
    let rows = (0..n)
        .map(|k| {
            let p = k as f64 / (n - 1) as f64;
            Ok(format!("{},{}", g(p), g(chsh_max(&state.with_noise(p)?))))
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(out, "chsh.csv", "noise_weight,chsh", &rows)?;
    line(summary, format!("S(0) = {:.6}, coherence {:.6}", chsh_max(&state), state.coherence));
    match chsh_threshold(&state)? {
        Some(p) => line(summary, format!("violation up to noise weight {p:.4}")),
        None => line(summary, "no violation".into()),
    }
    Ok(())
}
