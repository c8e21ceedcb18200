use proptest::prelude::*;
use ringfiber::materials::{MaterialLibrary, RegionStack, SellmeierModel};
use ringfiber::units::omega_from_um;
use ringfiber::Error;

// Three-term sums written out by hand from the tabulated coefficients.
fn silica_by_hand(l: f64) -> f64 {
    let l2 = l * l;
    (1.0 + 0.6961663 * l2 / (l2 - 0.0684043 * 0.0684043)
        + 0.4079426 * l2 / (l2 - 0.1162414 * 0.1162414)
        + 0.8974794 * l2 / (l2 - 9.896161 * 9.896161))
        .sqrt()
}

fn core_by_hand(l: f64) -> f64 {
    let x = 0.193;
    let mix = |a: f64, b: f64| a + x * (b - a);
    let b = [mix(0.6961663, 0.80686642), mix(0.4079426, 0.71815848), mix(0.8974794, 0.85416831)];
    let c = [mix(0.0684043, 0.068972606), mix(0.1162414, 0.15396605), mix(9.896161, 11.841931)];
    let l2 = l * l;
    (1.0 + (0..3).map(|j| b[j] * l2 / (l2 - c[j] * c[j])).sum::<f64>()).sqrt()
}

#[test]
fn silica_index_at_1550() {
    let stack = RegionStack::standard();
    let n = stack.inner.index(1.55).unwrap();
    assert!((n - 1.444).abs() < 1e-3);
    assert!((n - silica_by_hand(1.55)).abs() < 1e-14);
    assert!((n - 1.4440236217032607).abs() < 1e-13);
}

#[test]
fn core_index_values() {
    let stack = RegionStack::standard();
    for (l, want) in [(0.775, 1.4825993794721521), (1.55, 1.4727601915534878)] {
        let n = stack.core.index(l).unwrap();
        assert!((n - want).abs() < 1e-13, "{l}: {n}");
        assert!((n - core_by_hand(l)).abs() < 1e-14);
    }
    assert!((stack.doping_mol_fraction - 0.193).abs() < 1e-15);
}

#[test]
fn out_of_range_is_error() {
    let stack = RegionStack::standard();
    assert!(matches!(stack.core.index(0.2), Err(Error::Range(_))));
    assert!(matches!(stack.inner.index(5.0), Err(Error::Range(_))));
    assert!(matches!(stack.permittivity(3, 1e15), Err(Error::Range(_))));
}

#[test]
fn permittivity_definition() {
    let stack = RegionStack::standard();
    let w = omega_from_um(1.55);
    let e1 = stack.permittivity(1, w).unwrap();
    assert!((e1 - stack.core.index(1.55).unwrap().powi(2)).abs() < 1e-12);
    assert_eq!(stack.permittivity(0, w).unwrap(), stack.permittivity(2, w).unwrap());
}

#[test]
fn index_profile_is_an_annulus() {
    let stack = RegionStack::standard();
    for l in [0.775, 1.55] {
        let n: Vec<f64> = (0..3).map(|q| stack.index_at(q, l).unwrap()).collect();
        assert!(n[1] > n[0] && n[1] > n[2]);
        assert!(n[1] - n[0] > 0.02);
    }
}

#[test]
fn library_parsing() {
    let lib = MaterialLibrary::builtin();
    assert_eq!(lib.names().count(), 3);
    assert!(lib.get("nope").is_err());
    let bad =
        "version = 1\n[[model]]\nname = \"x\"\nkind = \"sellmeier\"\nb = [1.0]\nlambda_um = [0.1, 0.2]\nvalid_range_um = [0.5, 1.0]\n";
    assert!(matches!(MaterialLibrary::from_toml_str(bad), Err(Error::Config(_))));
    let mix_first = "version = 1\n[[model]]\nname = \"m\"\nkind = \"mixture\"\nbase = \"a\"\ndopant = \"a\"\nmole_fraction = 0.5\n\
        [[model]]\nname = \"a\"\nkind = \"sellmeier\"\nb = [1.0]\nlambda_um = [0.1]\nvalid_range_um = [0.5, 1.0]\n";
    let lib = MaterialLibrary::from_toml_str(mix_first).unwrap();
    assert_eq!(lib.get("m").unwrap().terms, vec![(1.0, 0.1)]);
}

#[test]
fn load_from_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.toml");
    std::fs::write(&p, ringfiber::materials::BUILTIN_TOML).unwrap();
    let lib = MaterialLibrary::load(&p).unwrap();
    assert!(lib.get("germania").is_ok());
}

#[test]
fn inverted_stack_rejected() {
    let lib = MaterialLibrary::builtin();
    let r = RegionStack::from_library(&lib, "silica_geo2_19_3", "fused_silica", "fused_silica");
    assert!(r.is_err());
    let m = SellmeierModel::new("bad", vec![(1.0, 0.7)], (0.5, 1.0));
    assert!(m.is_err());
}

proptest! {
    #[test]
    fn normal_dispersion(l in 0.7f64..1.9) {
        let stack = RegionStack::standard();
        let h = 1e-4;
        for m in [&stack.inner, &stack.core] {
            let d = (m.index(l + h).unwrap() - m.index(l - h).unwrap()) / (2.0 * h);
            prop_assert!(d < 0.0);
        }
    }

    #[test]
    fn core_above_cladding(l in 0.37f64..3.7) {
        let stack = RegionStack::standard();
        prop_assert!(stack.core.index(l).unwrap() > stack.inner.index(l).unwrap());
    }
}
