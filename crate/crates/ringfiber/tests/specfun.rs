use proptest::prelude::*;
use ringfiber::specfun::{eval, eval_deriv, eval_scaled, CylinderKind, CylinderKind::*};
use std::f64::consts::PI;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

// Reference values to 17 digits from arbitrary-precision evaluation.
const FROZEN: &[(CylinderKind, u32, f64, f64)] = &[
    (J, 0, 0.001, 0.99999975000001562),
    (J, 0, 0.5, 0.9384698072408129),
    (J, 0, 3.7, -0.39923020337119112),
    (J, 0, 24.9, 0.08324596835301549),
    (J, 0, 25.1, 0.10827567149994945),
    (J, 0, 60.0, -0.09147180408906187),
    (J, 0, 199.0, -0.054139528598386564),
    (J, 1, 0.001, 0.00049999993750000261),
    (J, 1, 0.5, 0.24226845767487389),
    (J, 1, 3.7, 0.053833987745461791),
    (J, 1, 24.9, -0.13485569953140887),
    (J, 1, 25.1, -0.11463478413442257),
    (J, 1, 60.0, 0.046598383758166318),
    (J, 1, 199.0, -0.01650665335438384),
    (J, 3, 0.001, 2.0833332031250034e-11),
    (J, 3, 0.5, 0.0025637299945872441),
    (J, 3, 3.7, 0.40922510004543101),
    (J, 3, 24.9, 0.11974280773254818),
    (J, 3, 25.1, 0.095924040349926599),
    (J, 3, 60.0, -0.040396711521655157),
    (J, 3, 199.0, 0.017591550491766246),
    (J, 6, 0.001, 2.1701388113839301e-23),
    (J, 6, 0.5, 3.3606846286188488e-7),
    (J, 6, 3.7, 0.033600891290563184),
    (J, 6, 24.9, -0.15515905561396053),
    (J, 6, 25.1, -0.16073605058818376),
    (J, 6, 60.0, 0.10164054540455695),
    (J, 6, 199.0, 0.052451273162235272),
    (Y, 0, 0.001, -4.4714166113759233),
    (Y, 0, 0.5, -0.44451873350670656),
    (Y, 0, 3.7, 0.10607431532035411),
    (Y, 0, 24.9, -0.13649918399676524),
    (Y, 0, 25.1, -0.11676770763803695),
    (Y, 0, 60.0, 0.047358952209449399),
    (Y, 0, 199.0, -0.016370573575285932),
    (Y, 1, 0.001, -636.62216723113941),
    (Y, 1, 0.5, -1.4714723926702431),
    (Y, 1, 3.7, 0.41667437268380749),
    (Y, 1, 24.9, -0.086002557595554252),
    (Y, 1, 25.1, -0.11062223322783099),
    (Y, 1, 60.0, 0.091869609369866895),
    (Y, 1, 199.0, 0.054098567647540202),
    (Y, 3, 0.001, -5092958815.5605024),
    (Y, 3, 0.5, -42.059494304723883),
    (Y, 3, 3.7, -0.28785807504105958),
    (Y, 3, 24.9, 0.10682044483174945),
    (Y, 3, 25.1, 0.12782592837717189),
    (Y, 3, 60.0, -0.094822718163008262),
    (Y, 3, 199.0, -0.053758582164670882),
    (Y, 6, 0.001, -2.4446200481225122e+21),
    (Y, 6, 0.5, -158426.75701532995),
    (Y, 6, 3.7, -2.0601698522720967),
    (Y, 6, 24.9, 0.047551729705880639),
    (Y, 6, 25.1, 0.016642465175127377),
    (Y, 6, 60.0, -0.018236921274077862),
    (Y, 6, 199.0, 0.021199132055433112),
    (I, 0, 0.001, 1.0000002500000156),
    (I, 0, 0.5, 1.0634833707413235),
    (I, 0, 3.7, 8.7386175241693969),
    (I, 0, 24.9, 5235629675.8044222),
    (I, 0, 25.1, 6369018573.8035025),
    (I, 0, 60.0, 5.8940770556098012e+24),
    (I, 0, 199.0, 7.5224431352636004e+84),
    (I, 1, 0.001, 0.00050000006250000261),
    (I, 1, 0.5, 0.25789430539089632),
    (I, 1, 3.7, 7.4357457965353369),
    (I, 1, 24.9, 5129395695.9257421),
    (I, 1, 25.1, 6240828249.8739803),
    (I, 1, 60.0, 5.8447515883904683e+24),
    (I, 1, 199.0, 7.5035186596191214e+84),
    (I, 3, 0.001, 2.0833334635416701e-11),
    (I, 3, 0.5, 0.0026451119689902859),
    (I, 3, 3.7, 2.3338047457373546),
    (I, 3, 24.9, 4354515371.1846661),
    (I, 3, 25.1, 5305092565.0263115),
    (I, 3, 60.0, 5.4648014548795715e+24),
    (I, 3, 199.0, 7.3538295965552374e+84),
    (I, 6, 0.001, 2.1701389663938507e-23),
    (I, 6, 0.5, 3.4212359263825779e-7),
    (I, 6, 3.7, 0.089531988053269991),
    (I, 6, 24.9, 2512552801.5560883),
    (I, 6, 25.1, 3074582917.4873619),
    (I, 6, 60.0, 4.3564776559661331e+24),
    (I, 6, 199.0, 6.8703644182766574e+84),
    (K, 0, 0.001, 7.0236888005623813),
    (K, 0, 0.5, 0.92441907122766586),
    (K, 0, 3.7, 0.015630659921626658),
    (K, 0, 24.9, 3.8360965209894921e-12),
    (K, 0, 25.1, 3.1283127143211171e-12),
    (K, 0, 60.0, 1.4138978405591078e-27),
    (K, 0, 199.0, 3.3400993534921818e-88),
    (K, 1, 0.001, 999.99623815608555),
    (K, 1, 0.5, 1.6564411200033009),
    (K, 1, 3.7, 0.017628035102223263),
    (K, 1, 24.9, 3.9123824362567633e-12),
    (K, 1, 25.1, 3.190032318604266e-12),
    (K, 1, 60.0, 1.4256320265171043e-27),
    (K, 1, 199.0, 3.348481072514485e-88),
    (K, 3, 0.001, 7999999000.0001245),
    (K, 3, 0.5, 62.057909529930256),
    (K, 3, 3.7, 0.044827308123250336),
    (K, 3, 24.9, 4.5791043810328275e-12),
    (K, 3, 25.1, 3.7290759132562148e-12),
    (K, 3, 60.0, 1.5230599537244162e-27),
    (K, 3, 199.0, 3.4162951917023815e-88),
    (K, 6, 0.001, 3.8399998080000055e+21),
    (K, 6, 0.5, 242711.83461983827),
    (K, 6, 3.7, 0.79082458771924963),
    (K, 6, 24.9, 7.7706318525327025e-12),
    (K, 6, 25.1, 6.302308998801328e-12),
    (K, 6, 60.0, 1.9034287825135694e-27),
    (K, 6, 199.0, 3.6554530026833414e-88),
];

#[test]
fn frozen_reference_table() {
    for &(kind, n, x, want) in FROZEN {
        let got = eval(kind, n, x).unwrap();
        assert!(rel(got, want) < 1e-10, "{kind:?}_{n}({x}) = {got}, want {want}");
    }
}

#[test]
fn named_values() {
    assert!(rel(eval(K, 0, 1.0).unwrap(), 0.42102443824070834) < 1e-13);
    assert!(rel(eval(I, 2, 3.0).unwrap(), 2.245212440929951) < 1e-13);
}

// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_m.
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        out.push((z, 2.0 / ((1.0 - z * z) * dp * dp)));
    }
    out
}

fn panels(f: impl Fn(f64) -> f64, a: f64, b: f64, count: usize) -> f64 {
    let gl = gauss_legendre(24);
    let h = (b - a) / count as f64;
    let mut s = 0.0;
    for p in 0..count {
        let c = a + (p as f64 + 0.5) * h;
        for &(z, w) in &gl {
            s += w * f(c + 0.5 * h * z);
        }
    }
    0.5 * h * s
}

fn j_quad(n: u32, x: f64) -> f64 {
    let m = 2048;
    let h = 2.0 * PI / m as f64;
    (0..m).map(|k| (n as f64 * k as f64 * h - x * (k as f64 * h).sin()).cos()).sum::<f64>() / m as f64
}

fn i_scaled_quad(n: u32, x: f64) -> f64 {
    let m = 2048;
    let h = 2.0 * PI / m as f64;
    (0..m)
        .map(|k| {
            let t = k as f64 * h;
            (x * (t.cos() - 1.0)).exp() * (n as f64 * t).cos()
        })
        .sum::<f64>()
        / m as f64
}

fn k_scaled_quad(n: u32, x: f64) -> f64 {
    let h = 0.01;
    let mut s = 0.5;
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let v = (-x * (t.cosh() - 1.0)).exp() * (n as f64 * t).cosh();
        s += v;
        if v < 1e-20 * s {
            break;
        }
        k += 1;
    }
    h * s
}

fn y_quad(n: u32, x: f64) -> f64 {
    let nf = n as f64;
    let first = panels(|t| (x * t.sin() - nf * t).sin(), 0.0, PI, 64) / PI;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let mut upper = 1.0;
    while x * f64::sinh(upper) - nf * upper < 60.0 {
        upper += 1.0;
    }
    let second =
        panels(|t| (nf * t - x * t.sinh()).exp() + sign * (-nf * t - x * t.sinh()).exp(), 0.0, upper, (upper * 40.0) as usize) / PI;
    first - second
}

#[test]
fn integral_representation_oracles() {
    let xs = [1e-3, 0.05, 0.7, 1.9, 2.1, 4.4, 9.3, 17.0, 24.5, 26.0, 41.0, 77.0, 130.0, 199.0];
    for n in 0..=6 {
        for &x in &xs {
            let j = eval(J, n, x).unwrap();
            let jq = j_quad(n, x);
            // absolute scale: J is bounded by 1, so compare relative to the local envelope
            let env = (2.0 / (PI * x)).sqrt().min(1.0);
            assert!((j - jq).abs() < 1e-10 * jq.abs().max(env * 1e-3), "J_{n}({x}) {j} vs {jq}");
            let i = eval_scaled(I, n, x).unwrap();
            let iq = i_scaled_quad(n, x);
            // the trapezoid sum cancels down to ~1e-16 absolute for tiny I_n
            assert!((i - iq).abs() < 1e-10 * iq.abs() + 1e-15, "I_{n}({x}) {i} vs {iq}");
            let k = eval_scaled(K, n, x).unwrap();
            assert!(rel(k, k_scaled_quad(n, x)) < 1e-10, "K_{n}({x}) {k} vs {}", k_scaled_quad(n, x));
            if x <= 60.0 {
                let y = eval(Y, n, x).unwrap();
                let yq = y_quad(n, x);
                assert!((y - yq).abs() < 1e-10 * yq.abs().max(env * 1e-3), "Y_{n}({x}) {y} vs {yq}");
            }
        }
    }
}

#[test]
fn wronskians_on_grid() {
    for n in 0..=6 {
        let mut x: f64 = 0.1;
        while x <= 100.0 {
            let w = eval(J, n, x).unwrap() * eval_deriv(Y, n, x).unwrap() - eval_deriv(J, n, x).unwrap() * eval(Y, n, x).unwrap();
            assert!(rel(w, 2.0 / (PI * x)) < 1e-9, "JY n={n} x={x}");
            let w = eval(I, n, x).unwrap() * eval_deriv(K, n, x).unwrap() - eval_deriv(I, n, x).unwrap() * eval(K, n, x).unwrap();
            assert!(rel(w, -1.0 / x) < 1e-9, "IK n={n} x={x}");
            x *= 1.07;
        }
    }
}

#[test]
fn derivative_identities() {
    for &x in &[0.3, 2.0, 11.0, 50.0] {
        assert_eq!(eval_deriv(J, 0, x).unwrap(), -eval(J, 1, x).unwrap());
        assert_eq!(eval_deriv(I, 0, x).unwrap(), eval(I, 1, x).unwrap());
    }
    let x = 2.0;
    let h = 1e-6 * x;
    let fd = (eval(K, 1, x + h).unwrap() - eval(K, 1, x - h).unwrap()) / (2.0 * h);
    assert!(rel(eval_deriv(K, 1, x).unwrap(), fd) < 1e-7);
}

proptest! {
    #[test]
    fn derivative_matches_central_difference(n in 0u32..=6, x in 0.5f64..150.0) {
        for kind in CylinderKind::ALL {
            if matches!(kind, I | K) && x > 100.0 { continue; }
            let h = 1e-6 * x;
            let fd = (eval(kind, n, x + h).unwrap() - eval(kind, n, x - h).unwrap()) / (2.0 * h);
            let d = eval_deriv(kind, n, x).unwrap();
            let scale = eval(kind, n, x).unwrap().abs().max(d.abs()).max(if matches!(kind, J | Y) { (2.0 / (PI * x)).sqrt() } else { 0.0 });
            prop_assert!((d - fd).abs() <= 1e-7 * scale, "{:?}_{} at {}: {} vs {}", kind, n, x, d, fd);
        }
    }

    #[test]
    fn recurrences(n in 1u32..=5, x in 0.1f64..100.0) {
        let t = 2.0 * n as f64 / x;
        for kind in CylinderKind::ALL {
            let (a, b, c) = (eval(kind, n - 1, x).unwrap(), eval(kind, n, x).unwrap(), eval(kind, n + 1, x).unwrap());
            let (lhs, rhs) = match kind {
                J | Y => (a + c, t * b),
                I => (a - c, t * b),
                K => (a - c, -t * b),
            };
            let scale = a.abs().max(b.abs()).max(c.abs());
            prop_assert!((lhs - rhs).abs() <= 1e-8 * scale, "{:?} n={} x={}", kind, n, x);
        }
    }

    #[test]
    fn wronskian_jy(n in 0u32..=6, x in 0.1f64..100.0) {
        let w = eval(J, n, x).unwrap() * eval_deriv(Y, n, x).unwrap()
            - eval_deriv(J, n, x).unwrap() * eval(Y, n, x).unwrap();
        prop_assert!(rel(w, 2.0 / (PI * x)) < 1e-9);
    }

    #[test]
    fn wronskian_ik(n in 0u32..=6, x in 0.1f64..100.0) {
        let w = eval(I, n, x).unwrap() * eval_deriv(K, n, x).unwrap()
            - eval_deriv(I, n, x).unwrap() * eval(K, n, x).unwrap();
        prop_assert!(rel(w, -1.0 / x) < 1e-9);
    }
}
