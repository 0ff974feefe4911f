use lorenz_renorm::combinatorics::{detect_monotone_with, DetectConfig, MonotoneType, RenormalizationData};
use lorenz_renorm::corpus::constant_coefficient;
use lorenz_renorm::diffeo::DEFAULT_GRID;
use lorenz_renorm::error::Error;
use lorenz_renorm::fixed_point::{find_fixed_point, FixedPointConfig};
use lorenz_renorm::island::{locate_island, nested_island_search, Cell, SliceConfig};
use lorenz_renorm::map::{LorenzMap, StandardParams};
use lorenz_renorm::quad::probe_points;
use lorenz_renorm::renorm::{
    consistency_residual, deformation_retract, prerenormalize, refit_residual, renormalize, renormalize_step, STEP_TOL,
};

fn located(kind: MonotoneType, rho: f64, c: f64, a: f64, b: f64) -> (LorenzMap, RenormalizationData) {
    let base = LorenzMap::new(
        StandardParams::new(1.0, 1.0, c, rho).unwrap(),
        constant_coefficient(a).unwrap(),
        constant_coefficient(b).unwrap(),
    )
    .unwrap();
    let detect = DetectConfig::default();
    let f = locate_island(&base, kind, (0.5, 0.5), &detect).unwrap();
    let d = detect_monotone_with(&f, kind, &detect).unwrap();
    (f, d)
}

fn t(n: usize, m: usize) -> MonotoneType {
    MonotoneType::new(n, m).unwrap()
}

fn cases() -> Vec<(LorenzMap, RenormalizationData)> {
    vec![
        located(t(1, 3), 2.0, 0.5, 0.0, 0.0),
        located(t(2, 1), 2.5, 0.3, 0.3, -0.3),
        located(t(3, 4), 3.0, 0.5, -0.5, 0.4),
        located(t(2, 2), 2.0, 0.6, 0.2, 0.2),
    ]
    .into_iter()
    .filter(|(f, _)| f.is_nontrivial())
    .collect()
}

#[test]
fn return_map_examples() {
    for (f, d) in cases() {
        let ret = prerenormalize(&f, &d).unwrap();
        assert!((ret.eval(d.p).unwrap() - d.p).abs() < 1e-10);
        assert!((ret.eval(d.q).unwrap() - d.q).abs() < 1e-10);
        assert!(ret.eval(f.c()).is_err());
        let mut last = f64::NEG_INFINITY;
        let mut probes = probe_points(100);
        probes.sort_by(f64::total_cmp);
        for x in probes {
            let z = d.window.at(x);
            if z == f.c() {
                continue;
            }
            let y = ret.eval(z).unwrap();
            assert!(d.p - 1e-12 <= y && y <= d.q + 1e-12, "{y} outside {}", d.window);
            if z < f.c() {
                assert!(y > last);
                last = y;
            }
        }
    }
}

#[test]
fn formulas_match_direct_orbits() {
    for (f, d) in cases() {
        let g = renormalize(&f, &d).unwrap();
        assert_eq!(g.c(), d.left.len() / d.window.len());
        assert!((g.c() - d.left.len() / (d.left.len() + d.right.len())).abs() < 1e-12);
        let residual = consistency_residual(&f, &d, &g, 100);
        assert!(residual <= 1e-9, "{}: {residual:e}", d.kind);
        assert_eq!(g.eval(0.0).unwrap(), 0.0);
        assert_eq!(g.eval(1.0).unwrap(), 1.0);
        assert!(g.is_nontrivial());
    }
}

#[test]
fn step_rejects_missing_type() {
    let (f, _) = located(t(1, 3), 2.0, 0.5, 0.0, 0.0);
    let err = renormalize_step(&f, t(4, 4), &DetectConfig::default(), None, STEP_TOL).unwrap_err();
    assert!(matches!(err, Error::NotRenormalizable { .. }));
}

#[test]
fn refit_of_one_step() {
    let (f, d) = located(t(1, 3), 2.0, 0.5, 0.0, 0.0);
    let g = renormalize(&f, &d).unwrap();
    for lazy in [&g.phi, &g.psi] {
        let (_, residual) = refit_residual(lazy, DEFAULT_GRID, 1000).unwrap();
        assert!(residual <= 1e-7, "{residual:e}");
    }
}

#[test]
fn retract_examples() {
    let (f, _) = located(t(2, 1), 2.5, 0.3, 0.3, -0.3);
    let same = deformation_retract(&f, 0.0, 0.5, DEFAULT_GRID).unwrap();
    assert_eq!(same.params, f.params);
    let end = deformation_retract(&f, 1.0, 0.5, DEFAULT_GRID).unwrap();
    assert_eq!((end.params.u, end.params.v, end.c()), (f.params.u, f.params.v, 0.5));
    assert!(end.phi.is_identity() && end.psi.is_identity());
    assert!(deformation_retract(&f, 1.5, 0.5, DEFAULT_GRID).is_err());
    let mut last = (f64::INFINITY, f64::INFINITY);
    for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let g = deformation_retract(&f, s, 0.5, DEFAULT_GRID).unwrap();
        assert!((g.phi.distortion() - (1.0 - s) * 0.3).abs() < 1e-12);
        let now = (g.phi.distortion(), g.psi.distortion());
        assert!(now.0 <= last.0 + 1e-15 && now.1 <= last.1 + 1e-15);
        last = now;
    }
    // non-constant nonlinearity: still nonincreasing
    let g = renormalize(&f, &detect_monotone_with(&f, t(2, 1), &DetectConfig::default()).unwrap()).unwrap();
    let mut last = f64::INFINITY;
    for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let dist = deformation_retract(&g, s, 0.5, DEFAULT_GRID).unwrap().phi.distortion();
        assert!(dist <= last + 1e-9, "{s}: {dist} > {last}");
        last = dist;
    }
}

#[test]
fn island_search_examples() {
    let detect = DetectConfig::default();
    let slice = SliceConfig { c0: 0.5, rho: 2.0, grid: [32, 32] };
    assert_eq!(nested_island_search(&[t(1, 3)], &slice, 0, &detect).unwrap().cell, Cell::SQUARE);
    let one = nested_island_search(&[t(1, 3)], &slice, 1, &detect).unwrap();
    assert!(one.cell.diameter() > 0.0);
    let deep = nested_island_search(&[t(1, 2); 3], &slice, 3, &detect).unwrap();
    let diameters: Vec<f64> = deep.levels.iter().map(|l| l.diameter).collect();
    assert_eq!(diameters.len(), 3);
    assert!(diameters.windows(2).all(|w| w[1] < w[0]), "{diameters:?}");
}

#[test]
fn fixed_point_budget_exhaustion_reports_trace() {
    let (f, _) = located(t(1, 3), 2.0, 0.5, 0.0, 0.0);
    let cfg = FixedPointConfig { budget: 1, newton: false, ..Default::default() };
    match find_fixed_point(&[t(1, 3)], &f, &cfg) {
        Err(Error::NoConvergence { iterations, trace, .. }) => {
            assert_eq!(iterations, 1);
            assert_eq!(trace.len(), 1);
        }
        Err(Error::CombinatoricsLost { .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
}
