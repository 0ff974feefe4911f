//! Parameter-plane searches over `(u, v)` slices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{kneading, return_roots, DetectConfig, MonotoneType};
use crate::diffeo::Diffeomorphism;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::{LorenzMap, Side, StandardParams};
use crate::roots::bisect;
use crate::renorm::{renormalize_step, RenormStep, STEP_TOL};

/// A slice `[0,1]² × {c₀} × {id} × {id}` at critical exponent `rho`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SliceConfig {
    pub c0: f64,
    pub rho: f64,
    /// Cells per level along `u` and `v`.
    pub grid: [usize; 2],
}

impl SliceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0 < 1.0) || !(self.rho > 1.0) || self.grid[0] < 2 || self.grid[1] < 2 {
            return Err(Error::Input(format!(
                "slice needs c0 ∈ (0,1), ρ > 1 and at least 2×2 cells, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn base(&self) -> Result<LorenzMap> {
        self.validate()?;
        LorenzMap::standard(1.0, 1.0, self.c0, self.rho)
    }
}

/// A rectangle in the `(u, v)` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub u: Interval,
    pub v: Interval,
}

impl Cell {
    pub const SQUARE: Cell = Cell { u: Interval::UNIT, v: Interval::UNIT };

    pub fn diameter(&self) -> f64 {
        self.u.len().hypot(self.v.len())
    }

    pub fn center(&self) -> (f64, f64) {
        (self.u.mid(), self.v.mid())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IslandLevel {
    pub level: usize,
    pub cell: Cell,
    pub passing: usize,
    pub diameter: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IslandResult {
    pub types: Vec<MonotoneType>,
    pub cell: Cell,
    /// Most interior passing point of the deepest level.
    pub center: (f64, f64),
    pub levels: Vec<IslandLevel>,
}

/// `f` with `(u, v)` replaced.
pub fn with_uv(base: &LorenzMap, u: f64, v: f64) -> Result<LorenzMap> {
    LorenzMap::new(StandardParams { u, v, ..base.params }, base.phi.clone(), base.psi.clone())
}

/// Renormalize along `types`, keeping coefficients lazy.
pub fn renormalize_along(
    f: &LorenzMap,
    types: &[MonotoneType],
    detect: &DetectConfig,
) -> Result<Vec<RenormStep>> {
    let mut steps: Vec<RenormStep> = Vec::with_capacity(types.len());
    for &kind in types {
        let g = steps.last().map(|s| &s.output).unwrap_or(f);
        steps.push(renormalize_step(g, kind, detect, None, STEP_TOL)?);
    }
    Ok(steps)
}

/// Kneading prefixes `0 1ⁿ⁺¹` and `1 0ᵐ⁺¹` (necessary for type `(n, m)`).
pub fn kneading_matches(f: &LorenzMap, kind: MonotoneType) -> bool {
    let depth = kind.n.max(kind.m) + 3;
    match kneading(f, depth) {
        Ok(k) => {
            k.k_minus.run_after_first(1) == kind.n + 1 && k.k_plus.run_after_first(0) == kind.m + 1
        }
        Err(_) => false,
    }
}

fn passes(f: &LorenzMap, types: &[MonotoneType], detect: &DetectConfig) -> bool {
    f.is_nontrivial() && kneading_matches(f, types[0]) && renormalize_along(f, types, detect).is_ok()
}

/// Pass/fail mask of cell centers, row-major in `v` then `u`.
pub fn scan_cells(
    base: &LorenzMap,
    types: &[MonotoneType],
    cell: Cell,
    grid: [usize; 2],
    detect: &DetectConfig,
) -> Vec<bool> {
    let [w, h] = grid;
    (0..w * h)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % w, idx / w);
            let u = cell.u.at((i as f64 + 0.5) / w as f64);
            let v = cell.v.at((j as f64 + 0.5) / h as f64);
            with_uv(base, u, v).map(|f| passes(&f, types, detect)).unwrap_or(false)
        })
        .collect()
}

/// Chebyshev distance (in cells) from each passing cell to the nearest failing cell or border.
fn interior_depth(mask: &[bool], w: usize, h: usize) -> Vec<usize> {
    let mut depth = vec![0usize; w * h];
    for j in 0..h {
        for i in 0..w {
            if !mask[j * w + i] {
                continue;
            }
            let border = i.min(j).min(w - 1 - i).min(h - 1 - j) + 1;
            let mut r = 1;
            'grow: while r < border {
                for jj in j.saturating_sub(r)..=(j + r).min(h - 1) {
                    for ii in i.saturating_sub(r)..=(i + r).min(w - 1) {
                        if !mask[jj * w + ii] {
                            break 'grow;
                        }
                    }
                }
                r += 1;
            }
            depth[j * w + i] = r;
        }
    }
    depth
}

/// Bounding box (in cell indices) of the 8-connected component containing `start`.
fn component_box(mask: &[bool], w: usize, h: usize, start: usize) -> (usize, usize, usize, usize) {
    let mut seen = vec![false; w * h];
    let mut stack = vec![start];
    seen[start] = true;
    let (mut i0, mut i1, mut j0, mut j1) = (start % w, start % w, start / w, start / w);
    while let Some(idx) = stack.pop() {
        let (i, j) = (idx % w, idx / w);
        i0 = i0.min(i);
        i1 = i1.max(i);
        j0 = j0.min(j);
        j1 = j1.max(j);
        for jj in j.saturating_sub(1)..=(j + 1).min(h - 1) {
            for ii in i.saturating_sub(1)..=(i + 1).min(w - 1) {
                let k = jj * w + ii;
                if mask[k] && !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
    }
    (i0, i1, j0, j1)
}

/// Recursive refinement from `region` on the slice through `base`.
pub fn island_search_from(
    base: &LorenzMap,
    types: &[MonotoneType],
    depth: usize,
    region: Cell,
    grid: [usize; 2],
    detect: &DetectConfig,
) -> Result<IslandResult> {
    if depth > types.len() {
        return Err(Error::Input(format!(
            "depth {depth} exceeds the type sequence length {}",
            types.len()
        )));
    }
    let mut cell = region;
    let mut center = cell.center();
    let mut levels = Vec::with_capacity(depth);
    for level in 1..=depth {
        let prefix = &types[..level];
        let mut found = None;
        for refine in [1, 3] {
            let g = [grid[0] * refine, grid[1] * refine];
            let mask = scan_cells(base, prefix, cell, g, detect);
            let passing = mask.iter().filter(|&&b| b).count();
            if passing > 0 {
                found = Some((mask, g, passing));
                break;
            }
        }
        let Some((mask, [w, h], passing)) = found else {
            return Err(Error::SearchFailure {
                level,
                reason: format!("no cell of {cell:?} is renormalizable along {prefix:?}"),
            });
        };
        let depths = interior_depth(&mask, w, h);
        let best = (0..w * h).max_by_key(|&k| (depths[k], std::cmp::Reverse(k))).expect("nonempty");
        let (i0, i1, j0, j1) = component_box(&mask, w, h, best);
        center = (
            cell.u.at((best % w) as f64 / w as f64 + 0.5 / w as f64),
            cell.v.at((best / w) as f64 / h as f64 + 0.5 / h as f64),
        );
        let (i0, i1) = (i0.saturating_sub(1), (i1 + 1).min(w - 1));
        let (j0, j1) = (j0.saturating_sub(1), (j1 + 1).min(h - 1));
        cell = Cell {
            u: Interval::hull(cell.u.at(i0 as f64 / w as f64), cell.u.at((i1 + 1) as f64 / w as f64)),
            v: Interval::hull(cell.v.at(j0 as f64 / h as f64), cell.v.at((j1 + 1) as f64 / h as f64)),
        };
        log::debug!("island level {level}: {passing} cells pass, box {cell:?}");
        levels.push(IslandLevel { level, cell, passing, diameter: cell.diameter() });
    }
    Ok(IslandResult { types: types[..depth].to_vec(), cell, center, levels })
}

/// Nontrivial part of the `(u, v)` square for the coefficients of `base`.
pub fn nontrivial_region(base: &LorenzMap) -> Cell {
    let c = base.c();
    Cell {
        u: Interval::hull(base.phi.inverse(c), 1.0),
        v: Interval::hull(1.0 - base.psi.inverse(c), 1.0),
    }
}

/// Nested island search on a slice with identity coefficients.
pub fn nested_island_search(
    types: &[MonotoneType],
    slice: &SliceConfig,
    depth: usize,
    detect: &DetectConfig,
) -> Result<IslandResult> {
    let base = slice.base()?;
    if depth == 0 {
        return Ok(IslandResult { types: vec![], cell: Cell::SQUARE, center: (0.5, 0.5), levels: vec![] });
    }
    island_search_from(&base, types, depth, nontrivial_region(&base), slice.grid, detect)
}

/// The map at the center of an island result.
pub fn island_map(base: &LorenzMap, island: &IslandResult) -> Result<LorenzMap> {
    with_uv(base, island.center.0, island.center.1)
}

/// Point of the slice through `base` whose critical returns `f^{n+1}(c⁻)` and
/// `f^{m+1}(c⁺)` sit at fractions `theta.0` of `R` and `theta.1` of `L`.
///
/// Island cells for large return times are far too thin for grid scans. On a
/// slice `f₁` does not depend on `u` and `f₀` does not depend on `v`, so each
/// return is monotone in one parameter; the two conditions are solved by
/// alternating bisection while `p, q` are re-detected.
pub fn locate_island(
    base: &LorenzMap,
    kind: MonotoneType,
    theta: (f64, f64),
    detect: &DetectConfig,
) -> Result<LorenzMap> {
    let inside = |t: f64| t > 0.0 && t < 1.0;
    if !inside(theta.0) || !inside(theta.1) {
        return Err(Error::Input(format!("fractions must lie in (0,1), got {theta:?}")));
    }
    let c = base.c();
    let (mut u, mut v) = (base.params.u, base.params.v);
    let u_lo = base.phi.inverse(c);
    let v_lo = 1.0 - base.psi.inverse(c);
    let fail = |reason: String| Error::SearchFailure { level: 1, reason };
    for _ in 0..100 {
        let f = with_uv(base, u, v)?;
        let (left, right) = return_roots(&f, kind, detect);
        let (Some(&p), Some(&q)) = (left.first(), right.first()) else {
            return Err(fail(format!("no periodic window endpoints for {kind} at u={u}, v={v}")));
        };
        let (target_q, target_p) = (c + theta.0 * (q - c), c - theta.1 * (c - p));
        let climb = |u: f64| {
            let g = with_uv(base, u, v).expect("valid parameters");
            let mut y = g.c1_minus();
            for _ in 0..kind.n {
                if y <= c {
                    return -1.0;
                }
                y = g.branch(Side::Right, y);
            }
            y - target_q
        };
        let fall = |v: f64| {
            let g = with_uv(base, u, v).expect("valid parameters");
            let mut y = g.c1_plus();
            for _ in 0..kind.m {
                if y >= c {
                    return 1.0;
                }
                y = g.branch(Side::Left, y);
            }
            y - target_p
        };
        let nu = bisect(climb, u_lo, 1.0, 0.0);
        let nv = bisect(|v| -fall(v), v_lo, 1.0, 0.0);
        let moved = (nu - u).abs().max((nv - v).abs());
        (u, v) = (nu, nv);
        if moved <= 4.0 * f64::EPSILON {
            break;
        }
    }
    with_uv(base, u, v)
}

/// Per-cell detected monotone type (by kneading, confirmed by detection) over a slice.
pub fn type_scan(
    slice: &SliceConfig,
    detect: &DetectConfig,
    phi: &Diffeomorphism,
    psi: &Diffeomorphism,
) -> Result<Vec<ScanCell>> {
    slice.validate()?;
    let base = LorenzMap::new(StandardParams::new(1.0, 1.0, slice.c0, slice.rho)?, phi.clone(), psi.clone())?;
    let [w, h] = slice.grid;
    Ok((0..w * h)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % w, idx / w);
            let u = (i as f64 + 0.5) / w as f64;
            let v = (j as f64 + 0.5) / h as f64;
            let kind = with_uv(&base, u, v).ok().and_then(|f| {
                if !f.is_nontrivial() {
                    return None;
                }
                let k = kneading(&f, 64).ok()?.candidate_type()?;
                crate::combinatorics::detect_monotone_with(&f, k, detect).ok().map(|_| k)
            });
            ScanCell { i, j, u, v, kind }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanCell {
    pub i: usize,
    pub j: usize,
    pub u: f64,
    pub v: f64,
    pub kind: Option<MonotoneType>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_depth_of_block() {
        let (w, h) = (5, 5);
        let mask: Vec<bool> = (0..25).map(|k| (1..4).contains(&(k % 5)) && (1..4).contains(&(k / 5))).collect();
        let d = interior_depth(&mask, w, h);
        assert_eq!(d[12], 2);
        assert_eq!(d[6], 1);
        assert_eq!(d[0], 0);
        assert_eq!(component_box(&mask, w, h, 12), (1, 3, 1, 3));
    }

    #[test]
    fn depth_zero_is_whole_square() {
        let slice = SliceConfig { c0: 0.5, rho: 2.0, grid: [8, 8] };
        let r = nested_island_search(&[], &slice, 0, &DetectConfig::default()).unwrap();
        assert_eq!(r.cell, Cell::SQUARE);
    }
}
