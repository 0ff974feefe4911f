//! Itineraries, kneading invariants and detection of monotone renormalizations.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::{LorenzMap, Side, COLLISION_TOL};
use crate::roots::bisect;

/// A finite word over `{0,1}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    /// `σˢ`.
    pub fn shift(&self, s: usize) -> &[u8] {
        &self.0[s.min(self.0.len())..]
    }

    pub fn starts_with(&self, prefix: &[u8]) -> bool {
        self.0.starts_with(prefix)
    }

    /// Length of the leading run of `symbol` after the first position.
    pub fn run_after_first(&self, symbol: u8) -> usize {
        self.0.iter().skip(1).take_while(|&&s| s == symbol).count()
    }
}

/// First-difference order on the common prefix; equal prefixes compare equal.
pub fn compare_truncated(a: &[u8], b: &[u8]) -> Ordering {
    a.iter()
        .zip(b)
        .find(|(x, y)| x != y)
        .map(|(x, y)| x.cmp(y))
        .unwrap_or(Ordering::Equal)
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Input(format!("invalid symbol {other:?} in word"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Word)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `(K⁻, K⁺)` truncated to `depth` symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KneadingInvariant {
    pub k_minus: Word,
    pub k_plus: Word,
    pub depth: usize,
}

impl KneadingInvariant {
    /// The monotone type suggested by the prefixes `0 1ⁿ⁺¹` and `1 0ᵐ⁺¹`.
    pub fn candidate_type(&self) -> Option<MonotoneType> {
        if self.k_minus.0.first() != Some(&0) || self.k_plus.0.first() != Some(&1) {
            return None;
        }
        let a = self.k_minus.run_after_first(1);
        let b = self.k_plus.run_after_first(0);
        (a >= 2 && b >= 2 && a < self.depth - 1 && b < self.depth - 1)
            .then(|| MonotoneType { n: a - 1, m: b - 1 })
    }
}

/// Renormalization type `(0 1ⁿ, 1 0ᵐ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonotoneType {
    pub n: usize,
    pub m: usize,
}

impl MonotoneType {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Input(format!("monotone type needs n, m ≥ 1, got ({n},{m})")));
        }
        Ok(MonotoneType { n, m })
    }

    /// `ω⁻ = 0 1ⁿ`.
    pub fn omega_minus(&self) -> Word {
        let mut w = vec![0];
        w.extend(std::iter::repeat(1).take(self.n));
        Word(w)
    }

    /// `ω⁺ = 1 0ᵐ`.
    pub fn omega_plus(&self) -> Word {
        let mut w = vec![1];
        w.extend(std::iter::repeat(0).take(self.m));
        Word(w)
    }
}

impl fmt::Display for MonotoneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.n, self.m)
    }
}

impl Serialize for MonotoneType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.n, self.m].serialize(s)
    }
}

impl<'de> Deserialize<'de> for MonotoneType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [n, m] = <[usize; 2]>::deserialize(d)?;
        MonotoneType::new(n, m).map_err(serde::de::Error::custom)
    }
}

/// Certificate of one monotone renormalization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RenormalizationData {
    #[serde(rename = "type")]
    pub kind: MonotoneType,
    pub p: f64,
    pub q: f64,
    #[serde(rename = "C")]
    pub window: Interval,
    #[serde(rename = "L")]
    pub left: Interval,
    #[serde(rename = "R")]
    pub right: Interval,
    /// `f^i(L)`, `i = 1..n+1`.
    pub left_orbit: Vec<Interval>,
    /// `f^j(R)`, `j = 1..m+1`.
    pub right_orbit: Vec<Interval>,
}

/// Why detection failed.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DetectionDiagnostics {
    pub left_roots: Vec<f64>,
    pub right_roots: Vec<f64>,
    pub failure: String,
}

impl fmt::Display for DetectionDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} left roots, {} right roots)",
            self.failure,
            self.left_roots.len(),
            self.right_roots.len()
        )
    }
}

/// Symbols of `x, f(x), …, f^{depth−1}(x)`.
pub fn itinerary(f: &LorenzMap, x: f64, depth: usize) -> Result<Word> {
    let c = f.c();
    let mut y = x;
    let mut w = Vec::with_capacity(depth);
    for step in 0..depth {
        if (y - c).abs() <= COLLISION_TOL || !y.is_finite() {
            return Err(Error::CriticalCollision { step, x: y });
        }
        w.push(if y < c { 0 } else { 1 });
        if step + 1 < depth {
            y = f.apply(y);
        }
    }
    Ok(Word(w))
}

/// `K⁻ = 0·ω(c₁⁻)`, `K⁺ = 1·ω(c₁⁺)`, each `depth` symbols long.
pub fn kneading(f: &LorenzMap, depth: usize) -> Result<KneadingInvariant> {
    if depth == 0 {
        return Err(Error::Input("kneading depth must be positive".into()));
    }
    let mut k_minus = vec![0];
    k_minus.extend(itinerary(f, f.c1_minus(), depth - 1)?.0);
    let mut k_plus = vec![1];
    k_plus.extend(itinerary(f, f.c1_plus(), depth - 1)?.0);
    Ok(KneadingInvariant { k_minus: Word(k_minus), k_plus: Word(k_plus), depth })
}

/// `K₀⁻ = 0`, `K₀⁺ = 1` and `σ(K⁺) ≤ σˢ(K^±) ≤ σ(K⁻)` for all `s ≥ 1`.
///
/// The pair `(0^∞, 1^∞)` of a map with two attracting fixed points is
/// accepted as admissible.
pub fn admissible(k: &KneadingInvariant) -> bool {
    let (km, kp) = (k.k_minus.symbols(), k.k_plus.symbols());
    if km.len() < 2 || kp.len() < 2 || km[0] != 0 || kp[0] != 1 {
        return false;
    }
    if km.iter().all(|&s| s == 0) && kp.iter().all(|&s| s == 1) {
        return true;
    }
    let (lo, hi) = (&kp[1..], &km[1..]);
    [km, kp].iter().all(|w| {
        (1..w.len()).all(|s| {
            let tail = &w[s..];
            compare_truncated(lo, tail) != Ordering::Greater
                && compare_truncated(tail, hi) != Ordering::Greater
        })
    })
}

/// Scan settings for [`detect_monotone_with`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DetectConfig {
    /// Uniform cells per side.
    pub cells: usize,
    /// Extra geometrically spaced points towards the ends of each side.
    pub refine: usize,
    /// Slack for inclusion and ordering checks.
    pub slack: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig { cells: 4096, refine: 48, slack: 1e-12 }
    }
}

/// `f₁ⁿ(f₀(p))`, NaN unless `f(p), …, fⁿ(p)` all lie right of `c`.
pub fn left_return(f: &LorenzMap, p: f64, n: usize) -> f64 {
    side_return(f, p, Side::Left, n)
}

/// `f₀ᵐ(f₁(q))`, NaN unless `f(q), …, fᵐ(q)` all lie left of `c`.
pub fn right_return(f: &LorenzMap, q: f64, m: usize) -> f64 {
    side_return(f, q, Side::Right, m)
}

fn side_return(f: &LorenzMap, x: f64, side: Side, k: usize) -> f64 {
    let c = f.c();
    let other = match side {
        Side::Left => Side::Right,
        Side::Right => Side::Left,
    };
    let mut y = f.branch(side, x);
    for _ in 0..k {
        let ok = match other {
            Side::Right => y > c,
            Side::Left => y < c,
        };
        if !ok {
            return f64::NAN;
        }
        y = f.branch(other, y);
    }
    y
}

/// Roots of `g(x) = F(x) − x` on the part of `(lo, hi)` where `F` is defined.
fn scan_roots<F: Fn(f64) -> f64>(ret: F, lo: f64, hi: f64, cfg: &DetectConfig) -> Vec<f64> {
    let g = |x: f64| ret(x) - x;
    let mut xs: Vec<f64> = (1..cfg.cells).map(|k| lo + (hi - lo) * k as f64 / cfg.cells as f64).collect();
    let h = (hi - lo) / cfg.cells as f64;
    for k in 1..=cfg.refine {
        let d = h * 0.5f64.powi(k as i32);
        xs.push(lo + d);
        xs.push(hi - d);
    }
    xs.retain(|&x| x > lo && x < hi);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let vals: Vec<f64> = xs.iter().map(|&x| g(x)).collect();

    // the domain of F is an interval: sharpen its finite/NaN boundaries
    let mut pts: Vec<(f64, f64)> = xs.into_iter().zip(vals).collect();
    let mut extra = Vec::new();
    for w in pts.windows(2) {
        let ((a, ga), (b, gb)) = (w[0], w[1]);
        if ga.is_nan() != gb.is_nan() {
            let inside = |x: f64| if g(x).is_nan() { -1.0 } else { 1.0 };
            let sign = if ga.is_nan() { 1.0 } else { -1.0 };
            let edge = bisect(|x| sign * inside(x), a, b, 0.0);
            for x in [edge, edge.next_up(), edge.next_down()] {
                let gx = g(x);
                if gx.is_finite() && x > a && x < b {
                    extra.push((x, gx));
                }
            }
        }
    }
    pts.extend(extra);
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut roots = Vec::new();
    for w in pts.windows(2) {
        let ((a, ga), (b, gb)) = (w[0], w[1]);
        if !ga.is_finite() || !gb.is_finite() {
            continue;
        }
        if ga == 0.0 {
            roots.push(a);
        } else if ga.signum() != gb.signum() && gb != 0.0 {
            let r = bisect(|x| {
                let v = g(x);
                if v.is_nan() { ga } else { v }
            }, a, b, 0.0);
            roots.push(r);
        }
    }
    roots.dedup();
    roots
}

/// Detect a renormalization of monotone type `(n, m)` with default settings.
pub fn detect_monotone(f: &LorenzMap, n: usize, m: usize) -> Result<RenormalizationData> {
    detect_monotone_with(f, MonotoneType::new(n, m)?, &DetectConfig::default())
}

pub fn detect_monotone_with(
    f: &LorenzMap,
    kind: MonotoneType,
    cfg: &DetectConfig,
) -> Result<RenormalizationData> {
    let fail = |diag: DetectionDiagnostics| Error::NotRenormalizable {
        n: kind.n,
        m: kind.m,
        diagnostics: Box::new(diag),
    };
    if !f.is_nontrivial() {
        return Err(fail(DetectionDiagnostics {
            failure: format!(
                "map is trivial: c₁⁺ = {}, c = {}, c₁⁻ = {}",
                f.c1_plus(),
                f.c(),
                f.c1_minus()
            ),
            ..Default::default()
        }));
    }
    let (left_roots, right_roots) = return_roots(f, kind, cfg);
    select_window(f, kind, cfg, left_roots, right_roots).map_err(fail)
}

/// Periodic points of the two return branches: left roots ascending, right roots descending.
pub fn return_roots(f: &LorenzMap, kind: MonotoneType, cfg: &DetectConfig) -> (Vec<f64>, Vec<f64>) {
    let c = f.c();
    let left = scan_roots(|p| left_return(f, p, kind.n), 0.0, c, cfg);
    let mut right = scan_roots(|q| right_return(f, q, kind.m), c, 1.0, cfg);
    right.reverse();
    (left, right)
}

/// Re-detect near a previous window, falling back to a full scan.
pub fn detect_monotone_near(
    f: &LorenzMap,
    kind: MonotoneType,
    hint: (f64, f64),
    cfg: &DetectConfig,
) -> Result<RenormalizationData> {
    let c = f.c();
    let (p0, q0) = hint;
    if p0 > 0.0 && p0 < c && q0 > c && q0 < 1.0 {
        let local = DetectConfig { cells: 64, refine: 8, ..*cfg };
        let wp = 0.25 * (c - p0);
        let wq = 0.25 * (q0 - c);
        let left = scan_roots(|p| left_return(f, p, kind.n), (p0 - wp).max(0.0), (p0 + wp).min(c), &local);
        let mut right = scan_roots(|q| right_return(f, q, kind.m), (q0 - wq).max(c), (q0 + wq).min(1.0), &local);
        right.reverse();
        if let Ok(d) = select_window(f, kind, cfg, left, right) {
            return Ok(d);
        }
    }
    detect_monotone_with(f, kind, cfg)
}

fn select_window(
    f: &LorenzMap,
    kind: MonotoneType,
    cfg: &DetectConfig,
    left_roots: Vec<f64>,
    right_roots: Vec<f64>,
) -> std::result::Result<RenormalizationData, DetectionDiagnostics> {
    let mut first_failure = None;
    for &p in &left_roots {
        for &q in &right_roots {
            match verify_window(f, kind, p, q, cfg.slack) {
                Ok(d) => return Ok(d),
                Err(e) => {
                    first_failure.get_or_insert(e);
                }
            }
        }
    }
    let failure = first_failure.unwrap_or_else(|| {
        if left_roots.is_empty() {
            format!("no periodic point of f₁^{}∘f₀ left of c", kind.n)
        } else {
            format!("no periodic point of f₀^{}∘f₁ right of c", kind.m)
        }
    });
    Err(DetectionDiagnostics { left_roots, right_roots, failure })
}

/// Check every invariant of a window `C = [p, q]` by direct iteration.
pub fn verify_window(
    f: &LorenzMap,
    kind: MonotoneType,
    p: f64,
    q: f64,
    slack: f64,
) -> std::result::Result<RenormalizationData, String> {
    let c = f.c();
    if !(p < c && c < q) {
        return Err(format!("window [{p}, {q}] does not straddle c"));
    }
    let window = Interval { lo: p, hi: q };
    let cm = f.critical_orbit(Side::Left, kind.n + 1);
    let cp = f.critical_orbit(Side::Right, kind.m + 1);
    if cm.points.len() < kind.n + 1 || cp.points.len() < kind.m + 1 {
        return Err("critical orbit hits c before returning".into());
    }
    let ret_minus = cm.points[kind.n];
    let ret_plus = cp.points[kind.m];
    if !(ret_minus > c && ret_minus <= q + slack) {
        return Err(format!("f^{}(c⁻) = {ret_minus} not in (c, q]", kind.n + 1));
    }
    if !(ret_plus < c && ret_plus >= p - slack) {
        return Err(format!("f^{}(c⁺) = {ret_plus} not in [p, c)", kind.m + 1));
    }

    let mut left_orbit = Vec::with_capacity(kind.n + 1);
    let mut x = p;
    for i in 1..=kind.n + 1 {
        x = f.apply(x);
        if i <= kind.n && !(x > q + slack) {
            return Err(format!("f^{i}(p) = {x} not right of C"));
        }
        left_orbit.push(Interval::hull(x, cm.points[i - 1]));
    }
    let mut right_orbit = Vec::with_capacity(kind.m + 1);
    let mut y = q;
    for j in 1..=kind.m + 1 {
        y = f.apply(y);
        if j <= kind.m && !(y < p - slack) {
            return Err(format!("f^{j}(q) = {y} not left of C"));
        }
        right_orbit.push(Interval::hull(cp.points[j - 1], y));
    }
    if (x - p).abs() > 1e-9 || (y - q).abs() > 1e-9 {
        return Err(format!("window endpoints are not periodic (drift {:.2e}, {:.2e})", x - p, y - q));
    }
    let mut orbit: Vec<Interval> = left_orbit[..kind.n]
        .iter()
        .chain(&right_orbit[..kind.m])
        .copied()
        .collect();
    orbit.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
    for w in orbit.windows(2) {
        if w[0].hi >= w[1].lo {
            return Err(format!("orbit intervals {} and {} overlap", w[0], w[1]));
        }
    }
    Ok(RenormalizationData {
        kind,
        p,
        q,
        window,
        left: Interval { lo: p, hi: c },
        right: Interval { lo: c, hi: q },
        left_orbit,
        right_orbit,
    })
}

/// Re-verify `d` against `f` by direct iteration.
pub fn verify(f: &LorenzMap, d: &RenormalizationData) -> Result<()> {
    verify_window(f, d.kind, d.p, d.q, 1e-12).map(|_| ()).map_err(|failure| {
        Error::NotRenormalizable {
            n: d.kind.n,
            m: d.kind.m,
            diagnostics: Box::new(DetectionDiagnostics { failure, ..Default::default() }),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn word_round_trip() {
        assert_eq!(w("0110").to_string(), "0110");
        assert!("012".parse::<Word>().is_err());
        assert_eq!(serde_json::to_string(&w("10")).unwrap(), "\"10\"");
    }

    #[test]
    fn admissibility_examples() {
        let k = |a: &str, b: &str| KneadingInvariant { k_minus: w(a), k_plus: w(b), depth: a.len() };
        assert!(admissible(&k("01111111", "10000000")));
        assert!(admissible(&k("00000000", "11111111")));
        assert!(!admissible(&k("10000000", "10000000")));
        assert!(!admissible(&k("01111111", "10100000")));
    }

    #[test]
    fn itinerary_of_fixed_points() {
        let f = LorenzMap::standard(0.9, 0.7, 0.5, 2.0).unwrap();
        assert_eq!(itinerary(&f, 0.0, 5).unwrap(), w("00000"));
        assert_eq!(itinerary(&f, 1.0, 5).unwrap(), w("11111"));
        assert!(matches!(itinerary(&f, 0.5, 3), Err(Error::CriticalCollision { step: 0, .. })));
    }

    #[test]
    fn trivial_map_is_not_renormalizable() {
        let f = LorenzMap::standard(0.3, 0.9, 0.5, 2.0).unwrap();
        assert_eq!(kneading(&f, 8).unwrap().k_minus, w("00000000"));
        assert!(matches!(detect_monotone(&f, 1, 1), Err(Error::NotRenormalizable { .. })));
    }

    #[test]
    fn type_words() {
        let t = MonotoneType::new(1, 3).unwrap();
        assert_eq!(t.omega_minus(), w("01"));
        assert_eq!(t.omega_plus(), w("1000"));
        assert!(MonotoneType::new(0, 2).is_err());
    }
}
