//! OAM harmonic content of mode field components.

use crate::error::{Error, Result};
use crate::modesolver::{component_norm_sq, harmonic_power, Component, GuidedMode};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

pub const DEFAULT_L_MAX: i32 = 6;
/// Spectra whose top probability does not exceed this are reported as mixed.
pub const MIXED_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct OamSpectrum {
    pub probs: BTreeMap<i32, f64>,
    pub component: Component,
    pub label: String,
    pub omega: f64,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::X => "x",
            Component::Y => "y",
            Component::Z => "z",
        })
    }
}

impl std::str::FromStr for Component {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Component::X),
            "y" => Ok(Component::Y),
            "z" => Ok(Component::Z),
            _ => Err(Error::Config(format!("unknown field component '{s}'"))),
        }
    }
}

/// p_l for one cartesian component, renormalized to unit scalar norm.
/// A component that vanishes identically gives all-zero probabilities.
pub fn decompose(mode: &GuidedMode, component: Component, omega: f64, l_max: i32) -> Result<OamSpectrum> {
    if l_max < mode.n() as i32 + 2 {
        return Err(Error::Domain(format!("l_max {l_max} below n + 2 for {}", mode.full_label())));
    }
    let p = mode.profile(omega)?;
    let gram = p.gram(&p.grid())?;
    let h = mode.harmonics();
    let comp = h.component(component);
    let total = component_norm_sq(comp, &gram);
    let mut probs: BTreeMap<i32, f64> = (-l_max..=l_max).map(|l| (l, 0.0)).collect();
    if total > 0.0 {
        for (l, w) in comp {
            if let Some(v) = probs.get_mut(l) {
                *v = (harmonic_power(w, &gram) / total).max(0.0);
            }
        }
    }
    Ok(OamSpectrum { probs, component, label: mode.full_label(), omega })
}

impl OamSpectrum {
    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn top(&self) -> f64 {
        self.probs.values().fold(0.0, |a, &b| a.max(b))
    }

    pub fn is_mixed(&self) -> bool {
        self.top() <= MIXED_THRESHOLD + 1e-9
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        for (l, p) in &self.probs {
            writeln!(out, "{},{},{},{:.16e}", self.label, self.component, l, p)?;
        }
        Ok(())
    }
}

/// argmax_l p_l; near-ties go to smaller |l|, then to positive l.
pub fn dominant_oam(spectrum: &OamSpectrum) -> Result<i32> {
    let top = spectrum.top();
    if spectrum.probs.is_empty() || top <= 0.0 {
        return Err(Error::Degenerate(format!("empty OAM spectrum for {}", spectrum.label)));
    }
    spectrum
        .probs
        .iter()
        .filter(|(_, &p)| p >= top - 1e-12)
        .map(|(&l, _)| l)
        .min_by_key(|&l| (l.abs(), -l))
        .ok_or_else(|| Error::Degenerate("no dominant OAM".into()))
}

pub fn selection_rule_ok(l_p: i32, l_s: i32, l_i: i32) -> bool {
    l_p == l_s + l_i
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: &[(i32, f64)]) -> OamSpectrum {
        OamSpectrum { probs: p.iter().copied().collect(), component: Component::X, label: "t".into(), omega: 1.0 }
    }

    #[test]
    fn ties_prefer_small_then_positive() {
        assert_eq!(dominant_oam(&spec(&[(-1, 0.5), (1, 0.5)])).unwrap(), 1);
        assert_eq!(dominant_oam(&spec(&[(-2, 0.4), (0, 0.4), (2, 0.2)])).unwrap(), 0);
        assert_eq!(dominant_oam(&spec(&[(-3, 0.6), (1, 0.4)])).unwrap(), -3);
        assert!(dominant_oam(&spec(&[(0, 0.0)])).is_err());
        assert!(spec(&[(-1, 0.5), (1, 0.5)]).is_mixed());
    }

    #[test]
    fn selection_rule() {
        assert!(selection_rule_ok(1, 1, 0));
        assert!(selection_rule_ok(0, 1, -1));
        assert!(!selection_rule_ok(1, 1, 1));
    }
}
