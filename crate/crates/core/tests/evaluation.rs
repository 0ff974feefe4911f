use lorenz_renorm::diffeo::{Diffeomorphism, DEFAULT_GRID};
use lorenz_renorm::map::{lorenz_eval, schwarzian_from_nonlinearity, standard_eval, LorenzMap, Side, StandardParams};
use proptest::prelude::*;

fn smooth_n(a: f64, b: f64, k: f64) -> impl Fn(f64) -> f64 {
    move |x| a * (k * x).sin() + b * x
}

fn random_map(u: f64, v: f64, c: f64, rho: f64, a: f64, b: f64) -> LorenzMap {
    let phi = Diffeomorphism::from_nonlinearity_fn(DEFAULT_GRID, smooth_n(a, b, 3.0)).unwrap();
    let psi = Diffeomorphism::from_nonlinearity_fn(DEFAULT_GRID, smooth_n(b, -a, 5.0)).unwrap();
    LorenzMap::new(StandardParams::new(u, v, c, rho).unwrap(), phi, psi).unwrap()
}

prop_compose! {
    fn maps()(u in 0.05..1.0f64, v in 0.05..1.0f64, c in 0.1..0.9f64, rho in 1.5..4.0f64,
              a in -1.0..1.0f64, b in -1.0..1.0f64) -> LorenzMap {
        random_map(u, v, c, rho, a, b)
    }
}

#[test]
fn standard_eval_examples() {
    let p = StandardParams::new(0.8, 0.5, 0.5, 2.0).unwrap();
    assert_eq!(standard_eval(0.0, &p).unwrap(), 0.0);
    assert_eq!(standard_eval(1.0, &p).unwrap(), 1.0);
    assert!((standard_eval(0.5 - 1e-10, &p).unwrap() - 0.8).abs() < 1e-12);
    assert!((standard_eval(0.5 + 1e-10, &p).unwrap() - 0.5).abs() < 1e-12);
    assert!(standard_eval(0.5, &p).is_err());
    let q = StandardParams::new(1.0, 1.0, 0.5, 2.0).unwrap();
    assert_eq!(standard_eval(0.25, &q).unwrap(), 0.75);
    assert_eq!(lorenz_eval(0.25, &LorenzMap::standard(1.0, 1.0, 0.5, 2.0).unwrap()).unwrap(), 0.75);
}

#[test]
fn mu_is_one_minus_c() {
    let p = StandardParams::new(0.3, 0.4, 0.37, 2.0).unwrap();
    assert_eq!(p.mu(), 1.0 - 0.37);
}

#[test]
fn derivative_vanishes_at_c() {
    let f = random_map(0.9, 0.8, 0.45, 2.5, 0.5, -0.2);
    assert!(f.derivative(0.45 - 1e-9).unwrap() < 1e-10);
    assert!(f.derivative(0.45 + 1e-9).unwrap() < 1e-10);
    assert!(f.derivative(0.45).is_err());
}

#[test]
fn mobius_schwarzian_vanishes() {
    // x / (a + (1−a)x) has N = −2(1−a)/(a + (1−a)x)
    for a in [0.3, 0.6, 2.0] {
        let n = |x: f64| -2.0 * (1.0 - a) / (a + (1.0 - a) * x);
        for x in [0.0, 0.1, 0.5, 0.9, 1.0] {
            assert!(schwarzian_from_nonlinearity(n, x, 1e-4 / 256.0).abs() < 1e-6, "a={a} x={x}");
        }
    }
}

#[test]
fn mobius_coefficient_keeps_power_schwarzian() {
    let a: f64 = 0.6;
    let phi = Diffeomorphism::from_nonlinearity_fn(4097, |x| -2.0 * (1.0 - a) / (a + (1.0 - a) * x)).unwrap();
    for x in [0.1, 0.5, 0.9] {
        assert!((phi.eval(x) - x / (a + (1.0 - a) * x)).abs() < 1e-6, "{x}");
    }
    let rho = 2.0;
    let f = LorenzMap::new(StandardParams::new(0.9, 0.9, 0.5, rho).unwrap(), phi, Diffeomorphism::identity()).unwrap();
    for x in [0.1, 0.25, 0.4] {
        let s_q = -(rho * rho - 1.0) / (2.0 * (x - 0.5) * (x - 0.5));
        let s = f.schwarzian(x).unwrap();
        // the grid interpolates N linearly, so N′ carries an O(1/G) error
        assert!((s - s_q).abs() < 1e-4 * s_q.abs(), "{x}: {s} vs {s_q}");
    }
}

#[test]
fn critical_values_through_coefficients() {
    let f = random_map(0.7, 0.6, 0.4, 2.0, 0.8, 0.3);
    assert_eq!(f.c1_minus(), f.phi.eval(0.7));
    assert_eq!(f.c1_plus(), f.psi.eval(1.0 - 0.6));
    assert_eq!(f.critical_orbit(Side::Left, 1).points, vec![f.c1_minus()]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn endpoints_are_fixed(f in maps()) {
        prop_assert_eq!(f.eval(0.0).unwrap(), 0.0);
        prop_assert_eq!(f.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn branches_are_increasing(f in maps(), s in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 50)) {
        let c = f.c();
        for (a, b) in s {
            for side in [Side::Left, Side::Right] {
                let (lo, hi) = match side {
                    Side::Left => (0.0, c),
                    Side::Right => (c, 1.0),
                };
                let x = lo + (hi - lo) * a.min(b) * 0.999;
                let y = lo + (hi - lo) * a.max(b) * 0.999;
                let (x, y) = if side == Side::Right { (hi - (y - lo), hi - (x - lo)) } else { (x, y) };
                if y - x > 1e-9 {
                    prop_assert!(f.branch(side, x) < f.branch(side, y));
                }
            }
        }
    }

    #[test]
    fn inverse_branch_round_trip(f in maps(), t in 0.0..1.0f64) {
        let c = f.c();
        for (side, x) in [(Side::Left, c * t), (Side::Right, c + (1.0 - c) * t)] {
            if x == c {
                continue;
            }
            let y = f.eval(x).unwrap();
            let back = f.inverse_branch(y, side).unwrap();
            let floor = 4.0 * f64::EPSILON * y / f.derivative(x).unwrap();
            prop_assert!((back - x).abs() <= 1e-10f64.max(floor), "{:?} x={} back={}", side, x, back);
        }
    }

    #[test]
    fn derivative_matches_finite_difference(f in maps(), t in 0.02..0.98f64) {
        let c = f.c();
        for x in [c * t, c + (1.0 - c) * t] {
            let h = 1e-7;
            if (x - c).abs() < 1e-3 {
                continue;
            }
            let fd = (f.eval(x + h).unwrap() - f.eval(x - h).unwrap()) / (2.0 * h);
            let d = f.derivative(x).unwrap();
            prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1e-3), "x={} fd={} d={}", x, fd, d);
        }
    }

    #[test]
    fn left_branch_sandwich(f in maps(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let c = f.c();
        let rho = f.rho();
        let pi = f.phi.distortion();
        let (y, x) = (c * a.min(b), c * a.max(b));
        prop_assume!(x - y > 1e-6 && c - x > 1e-6);
        let diff = f.eval(x).unwrap() - f.eval(y).unwrap();
        let k = rho * f.c1_minus() / c * (x - y);
        let lo = (-pi).exp() * k * ((c - x) / c).powf(rho - 1.0);
        let hi = pi.exp() * k * ((c - y) / c).powf(rho - 1.0);
        prop_assert!(lo <= diff * (1.0 + 1e-10) && diff <= hi * (1.0 + 1e-10), "{} {} {}", lo, diff, hi);
    }

    #[test]
    fn right_branch_sandwich(f in maps(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let c = f.c();
        let mu = 1.0 - c;
        let rho = f.rho();
        let pi = f.psi.distortion();
        let (x, y) = (c + mu * a.min(b), c + mu * a.max(b));
        prop_assume!(y - x > 1e-6 && x - c > 1e-6);
        let diff = f.eval(y).unwrap() - f.eval(x).unwrap();
        let k = rho * (1.0 - f.c1_plus()) / mu * (y - x);
        let lo = (-pi).exp() * k * ((x - c) / mu).powf(rho - 1.0);
        let hi = pi.exp() * k * ((y - c) / mu).powf(rho - 1.0);
        prop_assert!(lo <= diff * (1.0 + 1e-10) && diff <= hi * (1.0 + 1e-10), "{} {} {}", lo, diff, hi);
    }
}

#[test]
fn round_trip_on_many_maps() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let (mut worst, mut excess) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let f = random_map(
            rng.gen_range(0.05..1.0),
            rng.gen_range(0.05..1.0),
            rng.gen_range(0.1..0.9),
            rng.gen_range(1.5..4.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        for _ in 0..100 {
            let x: f64 = rng.gen_range(0.0..1.0);
            let Some(side) = f.params.side_of(x) else { continue };
            let y = f.eval(x).unwrap();
            let err = (f.inverse_branch(y, side).unwrap() - x).abs();
            // y carries a rounding error that the flat branch near c magnifies
            let floor = 4.0 * f64::EPSILON * y / f.derivative(x).unwrap();
            worst = worst.max(err);
            excess = excess.max(err / 1e-10f64.max(floor));
        }
    }
    assert!(excess <= 1.0, "worst {worst:e}, excess {excess}");
}
