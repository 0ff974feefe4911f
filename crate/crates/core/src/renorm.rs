//! Prerenormalization, the renormalization operator and the deformation retract.

use serde::Serialize;

use crate::combinatorics::{
    detect_monotone_near, detect_monotone_with, verify, DetectConfig, MonotoneType,
    RenormalizationData,
};
use crate::diffeo::{linear_combination, zoom, Chain, Diffeomorphism, Link};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::{LorenzMap, Side, StandardParams};
use crate::quad::probe_points;

/// Default tolerance on the formula-vs-orbit residual of one step.
pub const STEP_TOL: f64 = 1e-9;

/// The first return map `𝒫[f]` to `C`.
#[derive(Clone, Copy, Debug)]
pub struct ReturnMap<'a> {
    pub f: &'a LorenzMap,
    pub data: &'a RenormalizationData,
}

/// `𝒫[f] = f^{n+1}` on `L`, `f^{m+1}` on `R`, after re-verifying `d`.
pub fn prerenormalize<'a>(f: &'a LorenzMap, d: &'a RenormalizationData) -> Result<ReturnMap<'a>> {
    verify(f, d)?;
    Ok(ReturnMap { f, data: d })
}

impl ReturnMap<'_> {
    /// Direct orbit iteration; no domain checks.
    pub fn apply(&self, x: f64) -> f64 {
        let c = self.f.c();
        let steps = if x < c {
            self.data.kind.n + 1
        } else if x > c {
            self.data.kind.m + 1
        } else {
            return f64::NAN;
        };
        let mut y = x;
        for _ in 0..steps {
            y = self.f.apply(y);
        }
        y
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.data.window.contains(x) || x == self.f.c() {
            return Err(Error::Domain(format!("x = {x} not in C∖{{c}} = {}", self.data.window)));
        }
        Ok(self.apply(x))
    }

    /// `A⁻¹ ∘ 𝒫 ∘ A` with `A = ξ_C`.
    pub fn rescaled(&self, x: f64) -> f64 {
        let w = self.data.window;
        if x == 0.0 {
            return 0.0;
        }
        if x == 1.0 {
            return 1.0;
        }
        w.coordinate(self.apply(w.at(x)))
    }
}

/// `R[f]` built from the zoom factorization; coefficients stay lazy.
pub fn renormalize(f: &LorenzMap, d: &RenormalizationData) -> Result<LorenzMap> {
    let StandardParams { u, v, c, rho } = f.params;
    let mu = f.params.mu();
    let (p, q) = (d.p, d.q);
    let (n, m) = (d.kind.n, d.kind.m);
    let len_c = q - p;
    let (len_l, len_r) = (c - p, q - c);

    let mut top = q;
    for _ in 0..n {
        top = f.branch_inverse(Side::Right, top);
    }
    let big_u = Interval::hull(f.params.branch(Side::Left, p), f.phi.inverse(top));
    let mut bottom = p;
    for _ in 0..m {
        bottom = f.branch_inverse(Side::Left, bottom);
    }
    let big_v = Interval::hull(f.psi.inverse(bottom), f.params.branch(Side::Right, q));

    // |Q(L)| and |Q(R)| in closed form, free of cancellation
    let u_new = u * (len_l / c).powf(rho) / big_u.len();
    let v_new = v * (len_r / mu).powf(rho) / big_v.len();
    let c_new = len_l / len_c;
    let clamp = |x: f64, name: &str| -> Result<f64> {
        if x > 1.0 + 1e-9 || !x.is_finite() {
            return Err(Error::Inconsistency { residual: x - 1.0, tolerance: 1e-9 })
                .inspect_err(|_| log::warn!("renormalized {name} = {x} exceeds 1"));
        }
        Ok(x.min(1.0))
    };
    let params = StandardParams::new(clamp(u_new, "u")?, clamp(v_new, "v")?, c_new, rho)?;

    let mut left = Chain::new().then(Link::Diffeo(f.phi.clone()));
    for _ in 0..n {
        left = left.extend(&f.branch_chain(Side::Right));
    }
    let mut right = Chain::new().then(Link::Diffeo(f.psi.clone()));
    for _ in 0..m {
        right = right.extend(&f.branch_chain(Side::Left));
    }
    LorenzMap::new(params, zoom(left, big_u)?, zoom(right, big_v)?)
}

/// Sup of `|A⁻¹𝒫A(x) − R[f](x)|` over `count` probes off `c̃`.
pub fn consistency_residual(
    f: &LorenzMap,
    d: &RenormalizationData,
    renormalized: &LorenzMap,
    count: usize,
) -> f64 {
    let ret = ReturnMap { f, data: d };
    probe_points(count)
        .into_iter()
        .filter(|&x| x != renormalized.c())
        .map(|x| (ret.rescaled(x) - renormalized.apply(x)).abs())
        .fold(0.0, f64::max)
}

/// One certified renormalization step.
#[derive(Clone, Debug, Serialize)]
pub struct RenormStep {
    pub input: LorenzMap,
    pub data: RenormalizationData,
    pub output: LorenzMap,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepSummary {
    pub data: RenormalizationData,
    pub residual: f64,
}

/// Detect, renormalize and check the result against direct orbits.
pub fn renormalize_step(
    f: &LorenzMap,
    kind: MonotoneType,
    cfg: &DetectConfig,
    hint: Option<(f64, f64)>,
    tol: f64,
) -> Result<RenormStep> {
    let data = match hint {
        Some(h) => detect_monotone_near(f, kind, h, cfg)?,
        None => detect_monotone_with(f, kind, cfg)?,
    };
    let output = renormalize(f, &data)?;
    let residual = consistency_residual(f, &data, &output, 100);
    if !(residual <= tol) {
        return Err(Error::Inconsistency { residual, tolerance: tol });
    }
    if !output.is_nontrivial() {
        return Err(Error::DegenerateMap(format!(
            "renormalization is trivial: c₁⁺ = {}, c = {}, c₁⁻ = {}",
            output.c1_plus(),
            output.c(),
            output.c1_minus()
        )));
    }
    Ok(RenormStep { input: f.clone(), data, output, residual })
}

/// Max difference between a lazy coefficient and its `g`-point refit over `count` points.
pub fn refit_residual(lazy: &Diffeomorphism, g: usize, count: usize) -> Result<(Diffeomorphism, f64)> {
    let grid = lazy.refit(g)?;
    grid.check_monotone(count)?;
    Ok((grid.clone(), lazy.sup_distance(&grid, count)))
}

/// `π_t(f) = (u, v, c + t(c₀ − c), (1−t)φ + t·id, (1−t)ψ + t·id)`.
pub fn deformation_retract(f: &LorenzMap, t: f64, c0: f64, g: usize) -> Result<LorenzMap> {
    if !(0.0..=1.0).contains(&t) || !(c0 > 0.0 && c0 < 1.0) {
        return Err(Error::Input(format!("need t ∈ [0,1] and c₀ ∈ (0,1), got t={t}, c₀={c0}")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let id = Diffeomorphism::Identity;
    let params = StandardParams { c: f.params.c + t * (c0 - f.params.c), ..f.params };
    LorenzMap::new(
        params,
        linear_combination(1.0 - t, &f.phi, t, &id, g)?,
        linear_combination(1.0 - t, &f.psi, t, &id, g)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::DEFAULT_GRID;

    #[test]
    fn retract_endpoints() {
        let phi = Diffeomorphism::from_nonlinearity(vec![0.8; DEFAULT_GRID]).unwrap();
        let f = LorenzMap::new(StandardParams::new(0.9, 0.8, 0.45, 2.0).unwrap(), phi.clone(), phi).unwrap();
        let same = deformation_retract(&f, 0.0, 0.5, DEFAULT_GRID).unwrap();
        assert_eq!(same.params, f.params);
        let end = deformation_retract(&f, 1.0, 0.5, DEFAULT_GRID).unwrap();
        assert!(end.phi.is_identity() && end.psi.is_identity());
        assert_eq!(end.params.c, 0.5);
        let half = deformation_retract(&f, 0.5, 0.5, DEFAULT_GRID).unwrap();
        assert!((half.phi.distortion() - 0.4).abs() < 1e-12);
        assert!(deformation_retract(&f, 1.5, 0.5, DEFAULT_GRID).is_err());
    }
}
