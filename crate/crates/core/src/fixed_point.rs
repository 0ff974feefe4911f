//! Search for periodic points of renormalization along a type sequence.
//!
//! Each outer iteration first solves for `(u, v)` so that one cycle of
//! renormalizations maps the scalar pair to itself (the expanding
//! directions), then replaces `f` by the refitted cycle output. A full
//! Newton refinement on the coordinate vector takes over on plateaus.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::combinatorics::{DetectConfig, MonotoneType, RenormalizationData};
use crate::diffeo::DEFAULT_GRID;
use crate::error::{Error, Result};
use crate::island::{island_map, island_search_from, nontrivial_region};
use crate::island::with_uv;
use crate::map::LorenzMap;
use crate::renorm::{renormalize_step, STEP_TOL};

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointConfig {
    pub tol: f64,
    pub budget: usize,
    pub grid: usize,
    pub detect: DetectConfig,
    /// Iterations without a tenfold decrease before Newton refinement.
    pub plateau: usize,
    pub newton: bool,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            tol: 1e-6,
            budget: 100,
            grid: DEFAULT_GRID,
            detect: DetectConfig::default(),
            plateau: 6,
            newton: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointResult {
    pub map: LorenzMap,
    pub types: Vec<MonotoneType>,
    /// Distance between the last two cycle outputs.
    pub distance: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub windows: Vec<RenormalizationData>,
}

/// One cycle `R_{ω_{k−1}} ∘ … ∘ R_{ω_0}`, lazy coefficients throughout.
pub fn apply_cycle(
    f: &LorenzMap,
    types: &[MonotoneType],
    hints: Option<&[(f64, f64)]>,
    detect: &DetectConfig,
) -> Result<(LorenzMap, Vec<RenormalizationData>)> {
    let mut g = f.clone();
    let mut windows = Vec::with_capacity(types.len());
    for (i, &kind) in types.iter().enumerate() {
        let hint = hints.and_then(|h| h.get(i).copied());
        let step = renormalize_step(&g, kind, detect, hint, STEP_TOL)?;
        windows.push(step.data);
        g = step.output;
    }
    Ok((g, windows))
}

fn hints_of(windows: &[RenormalizationData]) -> Vec<(f64, f64)> {
    windows.iter().map(|d| (d.p, d.q)).collect()
}


/// Newton–secant solve of `(ũ, ṽ) = (u, v)` with `c, φ, ψ` frozen.
fn solve_scalars(
    f: &LorenzMap,
    types: &[MonotoneType],
    hints: &[(f64, f64)],
    detect: &DetectConfig,
) -> Result<LorenzMap> {
    let residual = |u: f64, v: f64| -> Result<[f64; 2]> {
        let g = with_uv(f, u, v)?;
        let (r, _) = apply_cycle(&g, types, Some(hints), detect)?;
        Ok([r.params.u - u, r.params.v - v])
    };
    let (mut u, mut v) = (f.params.u, f.params.v);
    let mut r = residual(u, v)?;
    for _ in 0..30 {
        let norm = r[0].abs().max(r[1].abs());
        if norm < 1e-14 {
            break;
        }
        let h = 1e-7;
        let hu = if u + h <= 1.0 { h } else { -h };
        let hv = if v + h <= 1.0 { h } else { -h };
        let ru = residual(u + hu, v)?;
        let rv = residual(u, v + hv)?;
        let j = [
            [(ru[0] - r[0]) / hu, (rv[0] - r[0]) / hv],
            [(ru[1] - r[1]) / hu, (rv[1] - r[1]) / hv],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let du = -(j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let dv = -(-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-4 {
            let (nu, nv) = (u + t * du, v + t * dv);
            if (0.0..=1.0).contains(&nu) && (0.0..=1.0).contains(&nv) {
                if let Ok(nr) = residual(nu, nv) {
                    if nr[0].abs().max(nr[1].abs()) < norm {
                        u = nu;
                        v = nv;
                        r = nr;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    with_uv(f, u, v)
}

/// Damped Newton on `x ↦ cycle(x) − x` in `(u, v, c, N_φ, N_ψ)` coordinates.
fn newton_refine(
    f: &LorenzMap,
    types: &[MonotoneType],
    hints: &[(f64, f64)],
    cfg: &FixedPointConfig,
) -> Result<LorenzMap> {
    let g = cfg.grid;
    let rho = f.rho();
    let eval = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let m = LorenzMap::from_coordinates(x.as_slice(), rho, g)?;
        let (r, _) = apply_cycle(&m, types, Some(hints), &cfg.detect)?;
        Ok(DVector::from_vec(r.coordinates(g)) - x)
    };
    let x0 = DVector::from_vec(f.coordinates(g));
    let f0 = eval(&x0)?;
    let dim = x0.len();
    let mut jac = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let h = 1e-7 * x0[k].abs().max(1.0);
        let mut xk = x0.clone();
        xk[k] += h;
        if k < 3 && xk[k] >= 1.0 {
            xk[k] = x0[k] - h;
        }
        let step = xk[k] - x0[k];
        let fk = eval(&xk)?;
        jac.set_column(k, &((fk - &f0) / step));
    }
    let delta = jac
        .lu()
        .solve(&(-&f0))
        .ok_or_else(|| Error::Representation("singular Newton system".into()))?;
    let base = f0.amax();
    let mut t = 1.0;
    while t > 1e-3 {
        let x1 = &x0 + &delta * t;
        if let Ok(r) = eval(&x1) {
            if r.amax() < base {
                return LorenzMap::from_coordinates(x1.as_slice(), rho, g);
            }
        }
        t *= 0.5;
    }
    Err(Error::Representation("Newton refinement made no progress".into()))
}

/// Iterate the renormalization cycle from `seed` until successive outputs agree to `tol`.
pub fn find_fixed_point(
    types: &[MonotoneType],
    seed: &LorenzMap,
    cfg: &FixedPointConfig,
) -> Result<FixedPointResult> {
    if types.is_empty() {
        return Err(Error::Input("empty type sequence".into()));
    }
    let lost = |iteration: usize, e: Error| match e {
        e @ Error::Input(_) => e,
        e => Error::CombinatoricsLost { iteration, source: Box::new(e) },
    };
    let mut f = seed.refit(cfg.grid)?;
    let (_, mut windows) = apply_cycle(&f, types, None, &cfg.detect).map_err(|e| lost(0, e))?;
    let mut trace: Vec<f64> = Vec::new();
    let mut since_best = 0;
    let mut best = f64::INFINITY;
    for it in 1..=cfg.budget {
        let mut hints = hints_of(&windows);
        if apply_cycle(&f, types, Some(&hints), &cfg.detect).is_err() {
            // the coefficients moved the island: relocate (u, v) on the new slice
            let seq: Vec<MonotoneType> = types.iter().cycle().take(2 * types.len()).copied().collect();
            let island = island_search_from(&f, &seq, seq.len(), nontrivial_region(&f), [32, 32], &cfg.detect)
                .map_err(|e| lost(it, e))?;
            f = island_map(&f, &island)?;
            let (_, w) = apply_cycle(&f, types, None, &cfg.detect).map_err(|e| lost(it, e))?;
            hints = hints_of(&w);
        }
        let solved = solve_scalars(&f, types, &hints, &cfg.detect).map_err(|e| lost(it, e))?;
        let (out, w) = apply_cycle(&solved, types, Some(&hints), &cfg.detect).map_err(|e| lost(it, e))?;
        let next = out.refit(cfg.grid)?;
        let d = next.distance(&solved, cfg.grid);
        log::debug!("fixed-point iteration {it}: distance {d:.3e}");
        trace.push(d);
        windows = w;
        if d < cfg.tol {
            return Ok(FixedPointResult {
                map: next,
                types: types.to_vec(),
                distance: d,
                iterations: it,
                trace,
                windows,
            });
        }
        if d < 0.1 * best {
            best = d;
            since_best = 0;
        } else {
            best = best.min(d);
            since_best += 1;
        }
        f = next;
        if cfg.newton && since_best >= cfg.plateau {
            log::info!("plateau at distance {d:.3e}; switching to Newton refinement");
            f = newton_refine(&f, types, &hints_of(&windows), cfg).map_err(|e| lost(it, e))?;
            since_best = 0;
        }
    }
    let last = trace.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NoConvergence { iterations: cfg.budget, last, trace })
}

/// Distance moved by one more cycle from a converged map.
pub fn verify_fixed_point(
    result: &FixedPointResult,
    detect: &DetectConfig,
    grid: usize,
) -> Result<f64> {
    let hints = hints_of(&result.windows);
    let (out, _) = apply_cycle(&result.map, &result.types, Some(&hints), detect)?;
    Ok(out.refit(grid)?.distance(&result.map, grid))
}
