use num_complex::Complex64;
use proptest::prelude::*;
use ringfiber::qpm::*;
use std::f64::consts::PI;

fn grating(period: f64, n_half: u64) -> QpmGrating {
    QpmGrating::new(period, n_half, CHI_XXX_PM_PER_V, CHI_XYY_PM_PER_V).unwrap()
}

/// Block-by-block closed-form transform of the poling profile, metres.
fn block_sum(g: &QpmGrating, beta: f64) -> Complex64 {
    let lam = g.period * 1e-6;
    let mut s = Complex64::new(0.0, 0.0);
    for j in 0..g.periods() {
        let (a, b) = (-(j as f64 + 0.5) * lam, -(j as f64) * lam);
        s += if beta == 0.0 {
            Complex64::new(b - a, 0.0)
        } else {
            (Complex64::from_polar(1.0, -beta * b) - Complex64::from_polar(1.0, -beta * a)) / Complex64::new(0.0, -beta)
        };
    }
    s / (2.0 * PI).sqrt()
}

#[test]
fn zero_wavenumber_limit() {
    let g = grating(42.9, 1165);
    let l = g.length_um() * 1e-6;
    let expect = l / (2.0 * (2.0 * PI).sqrt());
    assert!((g.spectrum(0.0).re - expect).abs() < 1e-12 * expect);
    let b = 1e-8 * g.k_grating();
    assert!((g.spectrum(b).norm() - expect).abs() < 1e-6 * expect);
    assert!((g.spectrum(b) - block_sum(&g, b)).norm() < 1e-9 * expect);
}

#[test]
fn matches_block_sum_oracle() {
    let g = grating(42.9, 20);
    for k in 0..200 {
        let beta = -3.0 * g.k_grating() + 0.0307 * k as f64 * g.k_grating();
        let a = g.spectrum(beta);
        let b = block_sum(&g, beta);
        assert!((a - b).norm() < 1e-9 * g.spectrum(0.0).norm(), "{beta}");
    }
    for m in [-3, -1, 1, 3] {
        let beta = m as f64 * g.k_grating();
        assert!((g.spectrum(beta) - block_sum(&g, beta)).norm() < 1e-9 * g.spectrum(0.0).norm());
    }
}

#[test]
fn first_order_peak() {
    let g = grating(42.9, 1165);
    let k = g.k_grating();
    let peak = g.spectrum(k).norm();
    // chi L / (pi sqrt(2 pi))
    let expect = g.length_um() * 1e-6 / (PI * (2.0 * PI).sqrt());
    assert!((peak - expect).abs() < 1e-9 * expect);
    for f in [0.9, 0.99, 0.9999, 1.0001, 1.01, 1.5, 2.5] {
        assert!(g.spectrum(f * k).norm() < peak);
    }
    // even orders vanish for 50% duty cycle
    assert!(g.spectrum(2.0 * k).norm() < 1e-9 * peak);
}

#[test]
fn peak_scales_with_period_count() {
    let a = grating(40.0, 10);
    let b = grating(40.0, 31);
    let ratio = b.spectrum(b.k_grating()).norm() / a.spectrum(a.k_grating()).norm();
    assert!((ratio - 63.0 / 21.0).abs() < 1e-9);
}

#[test]
fn fwhm_matches_dirichlet_width() {
    let g = QpmGrating::from_length(42.9, 1e5, CHI_XXX_PM_PER_V, CHI_XYY_PM_PER_V).unwrap();
    assert_eq!(g.periods(), 2331);
    let w_um = g.fwhm(1) * 1e-6;
    let l = g.length_um();
    // half-power point of (sin(x)/x)^2 is x = 1.39156
    let oracle = 4.0 * 1.391557377 / l;
    assert!((w_um - oracle).abs() < 1e-3 * oracle, "{w_um} {oracle}");
    assert!((w_um - 5.566e-5).abs() < 0.01e-5);
    assert!((g.fwhm(-1) - g.fwhm(1)).abs() < 1e-9 * g.fwhm(1));
}

#[test]
fn inverse_transform_rebuilds_profile() {
    let g = grating(10.0, 2);
    let lam = g.period * 1e-6;
    let bmax = 400.0 * g.k_grating();
    let n = 400_000;
    let db = 2.0 * bmax / n as f64;
    for z_um in [-2.5, -12.5, -17.5, -32.5, -42.5, -7.5, -60.0, 5.0] {
        let z = z_um * 1e-6;
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let b = -bmax + (k as f64 + 0.5) * db;
            s += g.spectrum(b) * Complex64::from_polar(1.0, b * z);
        }
        let v = (s * db / (2.0 * PI).sqrt()).re;
        assert!((v - g.profile(z_um)).abs() < 0.02, "{z_um}: {v}");
    }
    let _ = lam;
}

#[test]
fn tensor_contraction() {
    let g = grating(42.9, 1);
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let (x, y, z) = ([l, o, o], [o, l, o], [o, o, l]);
    assert_eq!(g.chi_contract(x, x, x), Complex64::new(0.063, 0.0));
    assert_eq!(g.chi_contract(x, y, y), Complex64::new(0.021, 0.0));
    assert_eq!(g.chi_contract(y, y, x), Complex64::new(0.021, 0.0));
    assert_eq!(g.chi_contract(y, x, y), Complex64::new(0.021, 0.0));
    assert_eq!(g.chi_contract(z, x, x).norm(), 0.0);
    assert_eq!(g.chi_contract(y, y, y).norm(), 0.0);
    let i = Complex64::i();
    assert_eq!(g.chi_contract(x, [i, o, o], x), Complex64::new(0.0, -0.063));
}

#[test]
fn constructor_errors() {
    assert!(QpmGrating::new(0.0, 1, 0.063, 0.021).is_err());
    assert!(QpmGrating::from_length(42.9, 10.0, 0.063, 0.021).is_err());
    // off-ratio tensors are accepted with a warning
    assert!(QpmGrating::new(42.9, 1, 0.1, 0.021).is_ok());
}

proptest! {
    #[test]
    fn conjugate_symmetry(beta in -1e6f64..1e6, n in 0u64..3000, period in 5.0f64..80.0) {
        let g = grating(period, n);
        let a = g.spectrum(-beta);
        let b = g.spectrum(beta).conj();
        prop_assert!((a - b).norm() <= 1e-9 * g.spectrum(0.0).norm());
    }
}
