//! Sellmeier dispersion of the three radial regions of the ring fiber.

use crate::error::{Error, Result};
use crate::units::um_from_omega;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

/// Coefficient file shipped with the crate.
pub const BUILTIN_TOML: &str = include_str!("../data/materials.toml");
pub const CLADDING_MODEL: &str = "fused_silica";
pub const CORE_MODEL: &str = "silica_geo2_19_3";

#[derive(Debug, Clone, PartialEq)]
pub struct SellmeierModel {
    pub name: String,
    /// (B_j, lambda_j in um)
    pub terms: Vec<(f64, f64)>,
    /// (lambda_min, lambda_max) in um
    pub valid_range: (f64, f64),
    /// Dopant mole fraction when the model was built as a mixture.
    pub mole_fraction: Option<f64>,
}

impl SellmeierModel {
    pub fn new(name: &str, terms: Vec<(f64, f64)>, valid_range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = valid_range;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Config(format!("{name}: bad valid range {lo}..{hi}")));
        }
        if terms.is_empty() {
            return Err(Error::Config(format!("{name}: no Sellmeier terms")));
        }
        if let Some(&(_, l)) = terms.iter().find(|&&(_, l)| l >= lo && l <= hi) {
            return Err(Error::Config(format!("{name}: resonance {l} um inside valid range")));
        }
        let m = SellmeierModel { name: name.to_string(), terms, valid_range, mole_fraction: None };
        for k in 0..=64 {
            let lam = lo + (hi - lo) * k as f64 / 64.0;
            let n2 = m.n_squared_unchecked(lam);
            if !(n2 > 1.0) {
                return Err(Error::Config(format!("{name}: n^2 = {n2} at {lam} um")));
            }
        }
        Ok(m)
    }

    /// Linear interpolation of B_j and lambda_j between two models with the same term count.
    pub fn mixture(name: &str, base: &SellmeierModel, dopant: &SellmeierModel, x: f64) -> Result<Self> {
        if base.terms.len() != dopant.terms.len() {
            return Err(Error::Config(format!("{name}: term counts differ between base and dopant")));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Config(format!("{name}: mole fraction {x} outside [0, 1]")));
        }
        let terms = base.terms.iter().zip(&dopant.terms).map(|(a, b)| (a.0 + x * (b.0 - a.0), a.1 + x * (b.1 - a.1))).collect();
        let range = (base.valid_range.0.max(dopant.valid_range.0), base.valid_range.1.min(dopant.valid_range.1));
        let mut m = SellmeierModel::new(name, terms, range)?;
        m.mole_fraction = Some(x);
        Ok(m)
    }

    fn n_squared_unchecked(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        1.0 + self.terms.iter().map(|&(b, l)| b * l2 / (l2 - l * l)).sum::<f64>()
    }

    pub fn contains(&self, lambda_um: f64) -> bool {
        lambda_um >= self.valid_range.0 && lambda_um <= self.valid_range.1
    }

    pub fn n_squared(&self, lambda_um: f64) -> Result<f64> {
        if !self.contains(lambda_um) {
            return Err(Error::Range(format!("{}: {lambda_um} um outside [{}, {}] um", self.name, self.valid_range.0, self.valid_range.1)));
        }
        Ok(self.n_squared_unchecked(lambda_um))
    }

    pub fn index(&self, lambda_um: f64) -> Result<f64> {
        self.n_squared(lambda_um).map(f64::sqrt)
    }
}

pub fn index(model: &SellmeierModel, lambda_um: f64) -> Result<f64> {
    model.index(lambda_um)
}

#[derive(Deserialize)]
struct MaterialFile {
    version: u32,
    model: Vec<ModelEntry>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ModelEntry {
    Sellmeier {
        name: String,
        #[allow(dead_code)]
        reference: Option<String>,
        b: Vec<f64>,
        lambda_um: Vec<f64>,
        valid_range_um: [f64; 2],
    },
    Mixture {
        name: String,
        #[allow(dead_code)]
        reference: Option<String>,
        base: String,
        dopant: String,
        mole_fraction: f64,
    },
}

/// Named dispersion models read from a coefficient file.
#[derive(Debug, Clone, Default)]
pub struct MaterialLibrary {
    models: BTreeMap<String, SellmeierModel>,
}

impl MaterialLibrary {
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_TOML).expect("bundled material file is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: MaterialFile = toml::from_str(text).map_err(|e| Error::Config(format!("material file: {e}")))?;
        if file.version != 1 {
            return Err(Error::Config(format!("unsupported material file version {}", file.version)));
        }
        let mut lib = MaterialLibrary::default();
        // Plain models first so mixtures may reference entries in any order.
        for entry in &file.model {
            if let ModelEntry::Sellmeier { name, b, lambda_um, valid_range_um, .. } = entry {
                if b.len() != lambda_um.len() {
                    return Err(Error::Config(format!("{name}: b and lambda_um lengths differ")));
                }
                let terms = b.iter().copied().zip(lambda_um.iter().copied()).collect();
                lib.insert(SellmeierModel::new(name, terms, (valid_range_um[0], valid_range_um[1]))?)?;
            }
        }
        for entry in &file.model {
            if let ModelEntry::Mixture { name, base, dopant, mole_fraction, .. } = entry {
                let m = SellmeierModel::mixture(name, lib.get(base)?, lib.get(dopant)?, *mole_fraction)?;
                lib.insert(m)?;
            }
        }
        Ok(lib)
    }

    fn insert(&mut self, m: SellmeierModel) -> Result<()> {
        if self.models.contains_key(&m.name) {
            return Err(Error::Config(format!("duplicate model {}", m.name)));
        }
        self.models.insert(m.name.clone(), m);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&SellmeierModel> {
        self.models.get(name).ok_or_else(|| Error::Config(format!("unknown material model '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }
}

/// Materials of the inner cladding (0), ring core (1) and outer cladding (2).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionStack {
    pub inner: SellmeierModel,
    pub core: SellmeierModel,
    pub outer: SellmeierModel,
    pub doping_mol_fraction: f64,
}

impl RegionStack {
    pub fn new(inner: SellmeierModel, core: SellmeierModel, outer: SellmeierModel) -> Result<Self> {
        let doping_mol_fraction = core.mole_fraction.unwrap_or(0.0);
        let s = RegionStack { inner, core, outer, doping_mol_fraction };
        let (lo, hi) = s.valid_range();
        if !(hi > lo) {
            return Err(Error::Config("region models have no common wavelength range".into()));
        }
        for k in 0..=200 {
            let lam = lo + (hi - lo) * k as f64 / 200.0;
            let nc = s.core.index(lam)?;
            if nc <= s.inner.index(lam)? || nc <= s.outer.index(lam)? {
                return Err(Error::Config(format!("core index not above cladding at {lam} um")));
            }
        }
        Ok(s)
    }

    pub fn from_library(lib: &MaterialLibrary, inner: &str, core: &str, outer: &str) -> Result<Self> {
        Self::new(lib.get(inner)?.clone(), lib.get(core)?.clone(), lib.get(outer)?.clone())
    }

    /// Silica claddings around a 19.3 mol% GeO2-doped core.
    pub fn standard() -> Self {
        let lib = MaterialLibrary::builtin();
        Self::from_library(&lib, CLADDING_MODEL, CORE_MODEL, CLADDING_MODEL).expect("bundled stack is valid")
    }

    pub fn valid_range(&self) -> (f64, f64) {
        let ms = [&self.inner, &self.core, &self.outer];
        (ms.iter().map(|m| m.valid_range.0).fold(f64::MIN, f64::max), ms.iter().map(|m| m.valid_range.1).fold(f64::MAX, f64::min))
    }

    pub fn model(&self, region: usize) -> Result<&SellmeierModel> {
        match region {
            0 => Ok(&self.inner),
            1 => Ok(&self.core),
            2 => Ok(&self.outer),
            _ => Err(Error::Range(format!("region {region} not in 0..=2"))),
        }
    }

    pub fn index_at(&self, region: usize, lambda_um: f64) -> Result<f64> {
        self.model(region)?.index(lambda_um)
    }

    pub fn permittivity(&self, region: usize, omega: f64) -> Result<f64> {
        self.model(region)?.n_squared(um_from_omega(omega))
    }

    /// All three permittivities at once.
    pub fn permittivities(&self, omega: f64) -> Result<[f64; 3]> {
        Ok([self.permittivity(0, omega)?, self.permittivity(1, omega)?, self.permittivity(2, omega)?])
    }
}

pub fn permittivity(stack: &RegionStack, region: usize, omega: f64) -> Result<f64> {
    stack.permittivity(region, omega)
}
