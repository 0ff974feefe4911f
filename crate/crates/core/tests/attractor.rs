use lorenz_renorm::attractor::{
    box_dimension, check_family, empirical_measure, escape_fraction, generations, length_decay, middle_thirds,
    ratio_stats, transfer_times, uniform_starts, GenerationFamily, Generations,
};
use lorenz_renorm::combinatorics::{DetectConfig, MonotoneType};
use lorenz_renorm::interval::Interval;
use lorenz_renorm::map::{LorenzMap, Side};

// center of a depth-5 island of type (1,2) on the ρ = 2, c = 1/2 slice
const U: f64 = 0.873064856;
const V: f64 = 0.965312213;

fn island() -> LorenzMap {
    LorenzMap::standard(U, V, 0.5, 2.0).unwrap()
}

fn gens(depth: usize) -> Generations {
    let t = MonotoneType::new(1, 2).unwrap();
    generations(&island(), &vec![t; depth], depth, &DetectConfig::default()).unwrap()
}

fn recomputed(f: &LorenzMap, fam: &GenerationFamily) -> Vec<Interval> {
    let (i_k, j_k) = fam.return_times;
    let (p, q) = (fam.window.lo, fam.window.hi);
    let mut out = vec![];
    let (mut x, mut y) = (p, f.c());
    for i in 0..i_k {
        let cv = if i == 0 { f.c() } else { y };
        out.push(Interval::hull(x, cv));
        x = f.apply(x);
        y = if i == 0 { f.c1_minus() } else { f.apply(y) };
    }
    let (mut x, mut y) = (q, f.c());
    for j in 0..j_k {
        let cv = if j == 0 { f.c() } else { y };
        out.push(Interval::hull(cv, x));
        x = f.apply(x);
        y = if j == 0 { f.c1_plus() } else { f.apply(y) };
    }
    out.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    out
}

#[test]
fn generation_examples() {
    let g = gens(3);
    assert!(g.diagnostic.is_none());
    assert_eq!(g.families.len(), 4);
    assert_eq!(g.families[0].intervals, vec![Interval::UNIT]);
    assert_eq!(g.families[1].intervals.len(), (1 + 1) + (2 + 1));
    assert_eq!(g.families[1].return_times, (2, 3));
    let f = island();
    for w in g.families.windows(2) {
        check_family(&f, &w[1], &w[0]).unwrap();
        assert!(w[1].total_length < w[0].total_length);
        let s = ratio_stats(&w[1], &w[0]);
        assert!(s.min_ratio > 0.0 && s.max_ratio < 1.0);
        assert!(s.min_gap_ratio > 0.0 && s.max_gap_ratio < 1.0);
    }
}

#[test]
fn generations_match_direct_orbits() {
    let f = island();
    for fam in &gens(3).families[1..] {
        let direct = recomputed(&f, fam);
        assert_eq!(direct.len(), fam.intervals.len());
        for (a, b) in direct.iter().zip(&fam.intervals) {
            assert!((a.lo - b.lo).abs() < 1e-9 && (a.hi - b.hi).abs() < 1e-9, "level {}: {a} vs {b}", fam.level);
        }
        for cv in [f.c1_minus(), f.c1_plus()] {
            assert!(fam.intervals.iter().any(|i| i.contains(cv)));
        }
    }
}

#[test]
fn lost_combinatorics_truncates() {
    let t = MonotoneType::new(3, 3).unwrap();
    let g = generations(&island(), &[t, t], 2, &DetectConfig::default()).unwrap();
    assert_eq!(g.families.len(), 1);
    assert!(g.diagnostic.is_some());
}

#[test]
fn dimension_and_decay() {
    let thirds = middle_thirds(8);
    let (d, _) = box_dimension(&thirds).unwrap();
    assert!((d - 2f64.ln() / 3f64.ln()).abs() < 0.02);
    let g = gens(4);
    let (d, _) = box_dimension(&g.families[1..]).unwrap();
    assert!(d > 0.0 && d < 1.0, "{d}");
    assert!(length_decay(&g.families).unwrap() < 1.0);
    assert!(box_dimension(&g.families[..2]).is_err());
}

#[test]
fn measure_lives_on_generations() {
    let g = gens(3);
    let f = island();
    let m = empirical_measure(&f, 1000, 100_000, 128, 7, Some(&g.families[3])).unwrap();
    assert!((m.minus.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((m.plus.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let (a, b) = m.inside.unwrap();
    assert!(a >= 0.99 && b >= 0.99, "{a} {b}");
    let again = empirical_measure(&f, 1000, 100_000, 128, 7, None).unwrap();
    assert_eq!(again.minus, m.minus);
}

#[test]
fn transfer_time_examples() {
    let f = island();
    let g = gens(1);
    let window = g.families[1].window;
    let inside = transfer_times(&f, window, &[window.mid(), window.at(0.1)], 10).unwrap();
    assert!(inside.iter().all(|s| s.tau == Some(0)));
    for k in 1..=12 {
        // pull the middle of C back k times along inverse branches
        let mut x = window.mid();
        for step in 0..k {
            let side = if x < f.c1_minus() && (step % 2 == 0 || x <= f.c1_plus()) { Side::Left } else { Side::Right };
            x = f.inverse_branch(x, side).unwrap();
        }
        let s = transfer_times(&f, window, &[x], 1000).unwrap();
        assert!(s[0].tau.is_some_and(|t| t <= k), "k={k}: {:?}", s[0]);
    }
    let starts = uniform_starts(2000, 3);
    let s = transfer_times(&f, window, &starts, 100_000).unwrap();
    assert!(escape_fraction(&s) <= 1e-3);
}

#[test]
fn families_serialize() {
    let g = gens(1);
    let json = serde_json::to_string(&g.families[1]).unwrap();
    let back: GenerationFamily = serde_json::from_str(&json).unwrap();
    assert_eq!(back.intervals, g.families[1].intervals);
}
