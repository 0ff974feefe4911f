//! Generation intervals, their geometry, and orbit statistics on the attractor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{DetectConfig, MonotoneType, RenormalizationData};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::{LorenzMap, Side, COLLISION_TOL};
use crate::renorm::{renormalize_step, STEP_TOL};

/// Slack for containment and disjointness of generation intervals.
pub const GENERATION_SLACK: f64 = 1e-12;

/// Intervals of generation `level`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerationFamily {
    pub level: usize,
    /// Return times `(i, j)` of `L` and `R`.
    pub return_times: (usize, usize),
    pub window: Interval,
    /// `f^i(L)`, `i < i_level`, then `f^j(R)`, `j < j_level`; sorted by position.
    pub intervals: Vec<Interval>,
    /// Components of the previous generation minus this one.
    pub gaps: Vec<Interval>,
    pub total_length: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Generations {
    pub families: Vec<GenerationFamily>,
    pub windows: Vec<RenormalizationData>,
    /// Why the construction stopped early, if it did.
    pub diagnostic: Option<String>,
}

fn gaps_between(parents: &[Interval], children: &[Interval]) -> Vec<Interval> {
    let mut gaps = Vec::new();
    for parent in parents {
        let mut inside: Vec<&Interval> = children
            .iter()
            .filter(|j| j.within(parent, GENERATION_SLACK) && j.len() > 0.0)
            .collect();
        inside.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut cursor = parent.lo;
        for j in inside {
            if j.lo > cursor + GENERATION_SLACK {
                gaps.push(Interval { lo: cursor, hi: j.lo });
            }
            cursor = cursor.max(j.hi);
        }
        if parent.hi > cursor + GENERATION_SLACK {
            gaps.push(Interval { lo: cursor, hi: parent.hi });
        }
    }
    gaps
}

/// `f^i(L)` for `i < count`, closed with the critical orbit at the `c` end.
fn orbit_intervals(f: &LorenzMap, start: f64, side: Side, count: usize) -> Vec<Interval> {
    let crit = f.critical_orbit(side, count.saturating_sub(1)).points;
    let c = f.c();
    let mut out = Vec::with_capacity(count);
    let mut x = start;
    for i in 0..count {
        let other = if i == 0 { c } else { crit.get(i - 1).copied().unwrap_or(x) };
        out.push(Interval::hull(x, other));
        x = f.apply(x);
    }
    out
}

/// Generation families `Λ₀, …, Λ_depth` of `f` along `types`.
///
/// Windows are detected on successive renormalizations and pulled back to
/// the coordinate of `f`. A detection failure ends the list early with a
/// diagnostic.
pub fn generations(
    f: &LorenzMap,
    types: &[MonotoneType],
    depth: usize,
    detect: &DetectConfig,
) -> Result<Generations> {
    if depth > types.len() {
        return Err(Error::Input(format!("depth {depth} exceeds {} types", types.len())));
    }
    let c = f.c();
    let mut families = vec![GenerationFamily {
        level: 0,
        return_times: (1, 1),
        window: Interval::UNIT,
        intervals: vec![Interval::UNIT],
        gaps: vec![],
        total_length: 1.0,
    }];
    let mut windows = Vec::new();
    let mut diagnostic = None;
    let (mut scale, mut shift) = (1.0, 0.0);
    let (mut i_k, mut j_k) = (1usize, 1usize);
    let mut g = f.clone();
    for (level, &kind) in types[..depth].iter().enumerate() {
        let step = match renormalize_step(&g, kind, detect, None, STEP_TOL) {
            Ok(s) => s,
            Err(e) => {
                diagnostic = Some(format!("level {}: {e}", level + 1));
                break;
            }
        };
        let d = &step.data;
        let p = shift + scale * d.p;
        let q = shift + scale * d.q;
        (i_k, j_k) = (i_k + kind.n * j_k, j_k + kind.m * i_k);
        let mut intervals = orbit_intervals(f, p, Side::Left, i_k);
        intervals.extend(orbit_intervals(f, q, Side::Right, j_k));
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let parent = &families.last().expect("level 0").intervals;
        let gaps = gaps_between(parent, &intervals);
        let total_length = intervals.iter().map(Interval::len).sum();
        families.push(GenerationFamily {
            level: level + 1,
            return_times: (i_k, j_k),
            window: Interval { lo: p, hi: q },
            intervals,
            gaps,
            total_length,
        });
        windows.push(step.data.clone());
        shift += scale * d.p;
        scale *= d.q - d.p;
        g = step.output;
    }
    debug_assert!(families.iter().all(|fam| fam.level == 0 || fam.window.contains(c)));
    Ok(Generations { families, windows, diagnostic })
}

/// Structural checks of one family against its parent: disjoint interiors,
/// nesting, and the critical values inside.
pub fn check_family(f: &LorenzMap, fam: &GenerationFamily, parent: &GenerationFamily) -> Result<()> {
    let bad = |msg: String| Err(Error::Representation(format!("generation {}: {msg}", fam.level)));
    for w in fam.intervals.windows(2) {
        if w[0].overlaps(&w[1], GENERATION_SLACK) {
            return bad(format!("{} and {} overlap", w[0], w[1]));
        }
    }
    for j in &fam.intervals {
        if !parent.intervals.iter().any(|i| j.within(i, GENERATION_SLACK)) {
            return bad(format!("{j} lies in no interval of generation {}", parent.level));
        }
    }
    for x in [f.c1_minus(), f.c1_plus()] {
        if !fam.intervals.iter().any(|i| i.contains(x)) {
            return bad(format!("critical value {x} outside"));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioStats {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub min_gap_ratio: f64,
    pub max_gap_ratio: f64,
}

/// Extremal `|J|/|I|` and `|G|/|I|` over children and gaps `J, G ⊂ I`.
pub fn ratio_stats(fam: &GenerationFamily, parent: &GenerationFamily) -> RatioStats {
    let mut s = RatioStats {
        min_ratio: f64::INFINITY,
        max_ratio: 0.0,
        min_gap_ratio: f64::INFINITY,
        max_gap_ratio: 0.0,
    };
    let host = |j: &Interval| parent.intervals.iter().find(|i| j.within(i, GENERATION_SLACK)).copied();
    for j in &fam.intervals {
        if let Some(i) = host(j) {
            let r = j.len() / i.len();
            s.min_ratio = s.min_ratio.min(r);
            s.max_ratio = s.max_ratio.max(r);
        }
    }
    for g in &fam.gaps {
        if let Some(i) = host(g) {
            let r = g.len() / i.len();
            s.min_gap_ratio = s.min_gap_ratio.min(r);
            s.max_gap_ratio = s.max_gap_ratio.max(r);
        }
    }
    s
}

/// Least-squares slope and its standard error.
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if xs.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, intercept, stderr)
}

/// Number of intervals of length `eps` needed to cover `intervals`, placed
/// greedily at left endpoints.
pub fn greedy_cover(intervals: &[Interval], eps: f64) -> usize {
    let mut sorted: Vec<Interval> = intervals.to_vec();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut count = 0;
    let mut reach = f64::NEG_INFINITY;
    for i in &sorted {
        if i.hi <= reach && count > 0 {
            continue;
        }
        let start = i.lo.max(reach);
        let k = (((i.hi - start) / eps).ceil() as usize).max(1);
        count += k;
        reach = start + k as f64 * eps;
    }
    count
}

/// Box-counting dimension from the generation families.
///
/// At each level the scale is the longest interval and the count a greedy
/// cover of the level by intervals of that length.
pub fn box_dimension(fams: &[GenerationFamily]) -> Result<(f64, f64)> {
    if fams.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 levels, got {}", fams.len())));
    }
    let mut xs = Vec::with_capacity(fams.len());
    let mut ys = Vec::with_capacity(fams.len());
    for fam in fams {
        let eps = fam.intervals.iter().map(Interval::len).fold(0.0, f64::max);
        if !(eps > 0.0) {
            return Err(Error::InsufficientData(format!("level {} has no positive length", fam.level)));
        }
        xs.push(-eps.ln());
        ys.push((greedy_cover(&fam.intervals, eps) as f64).ln());
    }
    if xs.iter().all(|&x| (x - xs[0]).abs() < 1e-12) {
        return Err(Error::InsufficientData("all levels have the same scale".into()));
    }
    let (slope, _, stderr) = fit_line(&xs, &ys);
    Ok((slope, stderr))
}

/// Fitted per-level ratio of total lengths, `exp` of the slope of `ln |Λ_n|`.
pub fn length_decay(fams: &[GenerationFamily]) -> Result<f64> {
    if fams.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 levels".into()));
    }
    let xs: Vec<f64> = fams.iter().map(|f| f.level as f64).collect();
    let ys: Vec<f64> = fams.iter().map(|f| f.total_length.ln()).collect();
    Ok(fit_line(&xs, &ys).0.exp())
}

/// Middle-thirds Cantor construction to `depth`, for calibration.
pub fn middle_thirds(depth: usize) -> Vec<GenerationFamily> {
    let mut fams = vec![GenerationFamily {
        level: 0,
        return_times: (1, 1),
        window: Interval::UNIT,
        intervals: vec![Interval::UNIT],
        gaps: vec![],
        total_length: 1.0,
    }];
    for level in 1..=depth {
        let parent = &fams[level - 1].intervals;
        let mut intervals = Vec::with_capacity(2 * parent.len());
        for i in parent {
            let t = i.len() / 3.0;
            intervals.push(Interval { lo: i.lo, hi: i.lo + t });
            intervals.push(Interval { lo: i.hi - t, hi: i.hi });
        }
        let gaps = gaps_between(parent, &intervals);
        let total_length = intervals.iter().map(Interval::len).sum();
        fams.push(GenerationFamily {
            level,
            return_times: (1 << level, 0),
            window: Interval::UNIT,
            intervals,
            gaps,
            total_length,
        });
    }
    fams
}

/// Plot-ready rows `(level, count, total_length, ratio extremes)`.
pub fn generations_csv(fams: &[GenerationFamily]) -> String {
    let mut out = String::from("level,count,total_length,min_ratio,max_ratio,min_gap_ratio,max_gap_ratio\n");
    for (k, fam) in fams.iter().enumerate() {
        let s = if k == 0 {
            None
        } else {
            Some(ratio_stats(fam, &fams[k - 1]))
        };
        let cell = |v: Option<f64>| v.filter(|x| x.is_finite()).map(|x| format!("{x:.12e}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:.12e},{},{},{},{}\n",
            fam.level,
            fam.intervals.len(),
            fam.total_length,
            cell(s.map(|s| s.min_ratio)),
            cell(s.map(|s| s.max_ratio)),
            cell(s.map(|s| s.min_gap_ratio)),
            cell(s.map(|s| s.max_gap_ratio)),
        ));
    }
    out
}

/// Visit histograms of the two critical orbits.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalMeasure {
    pub bins: usize,
    pub burn: usize,
    pub samples: usize,
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
    /// Total-variation distance between the two histograms.
    pub tv: f64,
    /// Restarts after an orbit came too close to `c`.
    pub restarts: usize,
    /// Share of samples inside the supplied generation, per orbit.
    pub inside: Option<(f64, f64)>,
}

struct OrbitStats {
    hist: Vec<f64>,
    restarts: usize,
    inside: usize,
}

fn sample_orbit(
    f: &LorenzMap,
    start: f64,
    burn: usize,
    samples: usize,
    bins: usize,
    support: Option<&GenerationFamily>,
    rng: &mut ChaCha8Rng,
) -> OrbitStats {
    let c = f.c();
    let mut counts = vec![0u64; bins];
    let mut restarts = 0;
    let mut inside = 0;
    let mut x = start;
    let step = |x: f64, restarts: &mut usize, rng: &mut ChaCha8Rng| -> f64 {
        let mut y = x;
        while (y - c).abs() <= COLLISION_TOL {
            *restarts += 1;
            y = start + rng.gen_range(-1e-12..1e-12);
        }
        f.apply(y)
    };
    for _ in 0..burn {
        x = step(x, &mut restarts, rng);
    }
    let member = |x: f64| support.is_some_and(|fam| {
        let k = fam.intervals.partition_point(|i| i.hi < x);
        k < fam.intervals.len() && fam.intervals[k].contains(x)
    });
    for _ in 0..samples {
        let b = ((x * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
        if member(x) {
            inside += 1;
        }
        x = step(x, &mut restarts, rng);
    }
    let total = samples as f64;
    OrbitStats { hist: counts.into_iter().map(|k| k as f64 / total).collect(), restarts, inside }
}

/// Histograms of the orbits of `c₁⁻` and `c₁⁺` after `burn` steps.
pub fn empirical_measure(
    f: &LorenzMap,
    burn: usize,
    samples: usize,
    bins: usize,
    seed: u64,
    support: Option<&GenerationFamily>,
) -> Result<EmpiricalMeasure> {
    if samples == 0 || bins == 0 {
        return Err(Error::Input("need positive samples and bins".into()));
    }
    if !f.is_nontrivial() {
        return Err(Error::DegenerateMap("map is trivial".into()));
    }
    let (a, b) = rayon::join(
        || sample_orbit(f, f.c1_minus(), burn, samples, bins, support, &mut ChaCha8Rng::seed_from_u64(seed)),
        || sample_orbit(f, f.c1_plus(), burn, samples, bins, support, &mut ChaCha8Rng::seed_from_u64(seed ^ 1)),
    );
    let tv = 0.5 * a.hist.iter().zip(&b.hist).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let inside = support.map(|_| (a.inside as f64 / samples as f64, b.inside as f64 / samples as f64));
    Ok(EmpiricalMeasure {
        bins,
        burn,
        samples,
        minus: a.hist,
        plus: b.hist,
        tv,
        restarts: a.restarts + b.restarts,
        inside,
    })
}

/// Birkhoff averages of `x` along orbits of seeded uniform starts.
pub fn birkhoff_averages(f: &LorenzMap, starts: usize, burn: usize, samples: usize, seed: u64) -> Vec<f64> {
    use rayon::prelude::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..starts).map(|_| rng.gen_range(0.0..1.0)).collect();
    xs.par_iter()
        .enumerate()
        .map(|(k, &x0)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64 + 1));
            let c = f.c();
            let mut step = |x: f64| {
                let y = if (x - c).abs() <= COLLISION_TOL { x0 + rng.gen_range(-1e-12..1e-12) } else { x };
                f.apply(y)
            };
            let mut x = x0;
            for _ in 0..burn {
                x = step(x);
            }
            let mut acc = 0.0;
            for _ in 0..samples {
                acc += x;
                x = step(x);
            }
            acc / samples as f64
        })
        .collect()
}

/// Transfer time of one start, `None` for ESCAPE within the cap.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TransferSample {
    pub x: f64,
    pub tau: Option<usize>,
}

/// Check that the periodic boundary orbit of `window` avoids its interior.
///
/// Each endpoint is followed until it comes back within `1e-9` of an
/// endpoint (one period) or `cap` steps pass.
pub fn check_nice(f: &LorenzMap, window: Interval, cap: usize) -> Result<()> {
    let tol = 1e-9 * window.len().max(1e-300);
    for start in [window.lo, window.hi] {
        let mut x = start;
        for k in 1..=cap {
            x = f.apply(x);
            if !x.is_finite() {
                return Err(Error::NotNice(format!("orbit of {start} hit c at step {k}")));
            }
            let back = (x - window.lo).abs() <= tol || (x - window.hi).abs() <= tol;
            if back {
                break;
            }
            if window.contains_open(x) {
                return Err(Error::NotNice(format!("f^{k}({start}) = {x} enters {window}")));
            }
            if k == cap {
                return Err(Error::NotNice(format!("orbit of {start} did not close within {cap} steps")));
            }
        }
    }
    Ok(())
}

/// First entry times into `window` after checking that it is nice.
pub fn transfer_times(f: &LorenzMap, window: Interval, starts: &[f64], cap: usize) -> Result<Vec<TransferSample>> {
    check_nice(f, window, cap)?;
    use rayon::prelude::*;
    Ok(starts
        .par_iter()
        .map(|&x0| {
            let mut x = x0;
            for k in 0..=cap {
                if window.contains_open(x) {
                    return TransferSample { x: x0, tau: Some(k) };
                }
                if x == f.c() {
                    break;
                }
                x = f.apply(x);
            }
            TransferSample { x: x0, tau: None }
        })
        .collect())
}

/// `count` seeded uniform points of `(0, 1)`.
pub fn uniform_starts(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen_range(0.0..1.0)).collect()
}

pub fn escape_fraction(samples: &[TransferSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|s| s.tau.is_none()).count() as f64 / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn middle_thirds_calibration() {
        let fams = middle_thirds(8);
        let (d, _) = box_dimension(&fams).unwrap();
        assert!((d - 2f64.ln() / 3f64.ln()).abs() < 0.02, "{d}");
        assert!((length_decay(&fams).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn box_dimension_needs_three_levels() {
        assert!(box_dimension(&middle_thirds(1)).is_err());
        let single = vec![middle_thirds(0)[0].clone(); 3];
        assert!(box_dimension(&single).is_err());
    }

    #[test]
    fn greedy_cover_counts() {
        let iv = |a: f64, b: f64| Interval { lo: a, hi: b };
        assert_eq!(greedy_cover(&[iv(0.0, 1.0)], 0.25), 4);
        assert_eq!(greedy_cover(&[iv(0.0, 0.1), iv(0.05, 0.2), iv(0.9, 1.0)], 0.2), 2);
    }

    #[test]
    fn middle_thirds_gaps() {
        let fams = middle_thirds(2);
        assert_eq!(fams[1].gaps.len(), 1);
        let s = ratio_stats(&fams[2], &fams[1]);
        assert!((s.min_ratio - 1.0 / 3.0).abs() < 1e-12 && (s.max_gap_ratio - 1.0 / 3.0).abs() < 1e-12);
    }
}
