//! Orientation-preserving diffeomorphisms of `[0,1]` in nonlinearity coordinates.
//!
//! A diffeomorphism is determined by its nonlinearity `N = D log Dφ`; the
//! inverse operator reconstructs it as
//!
//! ```text
//! φ(x) = ∫₀ˣ exp(∫₀ʳ N) dr / ∫₀¹ exp(∫₀ʳ N) dr .
//! ```
//!
//! Grid diffeomorphisms store `N` at `G` uniform nodes and interpolate it
//! linearly, so the inner integral is an exact piecewise quadratic and the
//! outer integral is done cell by cell with Gauss–Legendre quadrature. Lazy
//! diffeomorphisms keep a zoomed composition chain unevaluated.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::{Side, StandardParams};
use crate::quad::{gauss_legendre, grid_point, CompensatedSum};
use crate::roots::invert_increasing;

/// Default number of nonlinearity samples.
pub const DEFAULT_GRID: usize = 257;

/// Where the values of a [`Diffeomorphism`] come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Identity,
    Grid,
    Lazy,
}

/// An orientation-preserving diffeomorphism of `[0,1]`.
#[derive(Clone, Debug, Default)]
pub enum Diffeomorphism {
    #[default]
    Identity,
    Grid(Arc<GridDiffeo>),
    Lazy(Arc<LazyDiffeo>),
}

impl Diffeomorphism {
    pub fn identity() -> Self {
        Diffeomorphism::Identity
    }

    /// The inverse nonlinearity operator applied to grid samples of `n`.
    pub fn from_nonlinearity(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().all(|&s| s == 0.0) && samples.len() >= 2 {
            return Ok(Diffeomorphism::Identity);
        }
        Ok(Diffeomorphism::Grid(Arc::new(GridDiffeo::new(samples)?)))
    }

    /// Sample `n` on a `g`-point grid and invert.
    pub fn from_nonlinearity_fn<F: Fn(f64) -> f64>(g: usize, n: F) -> Result<Self> {
        Self::from_nonlinearity((0..g).map(|k| n(grid_point(k, g))).collect())
    }

    /// `g ∘ h` as a lazy diffeomorphism.
    pub fn compose(outer: &Diffeomorphism, inner: &Diffeomorphism) -> Self {
        let chain = Chain::new()
            .then(Link::Diffeo(inner.clone()))
            .then(Link::Diffeo(outer.clone()));
        // a composition of self-maps of [0,1] needs no rescaling
        Diffeomorphism::Lazy(Arc::new(LazyDiffeo {
            chain,
            domain: Interval::UNIT,
            image: Interval::UNIT,
        }))
    }

    pub fn provenance(&self) -> Provenance {
        match self {
            Diffeomorphism::Identity => Provenance::Identity,
            Diffeomorphism::Grid(_) => Provenance::Grid,
            Diffeomorphism::Lazy(_) => Provenance::Lazy,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Diffeomorphism::Identity)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Diffeomorphism::Identity => x,
            Diffeomorphism::Grid(g) => g.eval(x),
            Diffeomorphism::Lazy(l) => l.eval(x),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.ln_deriv(x).exp()
    }

    pub fn ln_deriv(&self, x: f64) -> f64 {
        match self {
            Diffeomorphism::Identity => 0.0,
            Diffeomorphism::Grid(g) => g.ln_deriv(x),
            Diffeomorphism::Lazy(l) => l.jet(x).ln_deriv,
        }
    }

    /// `N_φ(x)`.
    pub fn nonlinearity_at(&self, x: f64) -> f64 {
        match self {
            Diffeomorphism::Identity => 0.0,
            Diffeomorphism::Grid(g) => g.nonlinearity_at(x),
            Diffeomorphism::Lazy(l) => l.jet(x).nonlinearity,
        }
    }

    /// Value, log-derivative and nonlinearity in one pass.
    pub fn jet(&self, x: f64) -> Jet {
        match self {
            Diffeomorphism::Identity => Jet { value: x, ln_deriv: 0.0, nonlinearity: 0.0 },
            Diffeomorphism::Grid(g) => g.jet(x),
            Diffeomorphism::Lazy(l) => l.jet(x),
        }
    }

    /// `φ⁻¹(y)`, to full double precision.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        match self {
            Diffeomorphism::Identity => y,
            Diffeomorphism::Grid(g) => g.inverse(y),
            Diffeomorphism::Lazy(l) => invert_increasing(
                |x| {
                    let j = l.jet(x);
                    (j.value, j.ln_deriv.exp())
                },
                y,
                0.0,
                1.0,
            ),
        }
    }

    /// `N_φ` sampled on the uniform `g`-point grid.
    pub fn nonlinearity(&self, g: usize) -> Vec<f64> {
        match self {
            Diffeomorphism::Identity => vec![0.0; g],
            Diffeomorphism::Grid(grid) if grid.len() == g => grid.samples().to_vec(),
            _ => (0..g).map(|k| self.nonlinearity_at(grid_point(k, g))).collect(),
        }
    }

    /// `‖φ‖ = sup |N_φ|`, over grid nodes for lazy maps.
    pub fn norm(&self) -> f64 {
        match self {
            Diffeomorphism::Identity => 0.0,
            Diffeomorphism::Grid(g) => g.samples().iter().fold(0.0, |a, s| a.max(s.abs())),
            Diffeomorphism::Lazy(_) => self
                .nonlinearity(DEFAULT_GRID)
                .iter()
                .fold(0.0, |a, s| a.max(s.abs())),
        }
    }

    /// `dist[φ] = max ln(Dφ(y)/Dφ(x))`.
    pub fn distortion(&self) -> f64 {
        match self {
            Diffeomorphism::Identity => 0.0,
            Diffeomorphism::Grid(g) => g.distortion(),
            Diffeomorphism::Lazy(l) => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for k in 0..DEFAULT_GRID {
                    let d = l.jet(grid_point(k, DEFAULT_GRID)).ln_deriv;
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                hi - lo
            }
        }
    }

    /// Resample the nonlinearity on a `g`-point grid and rebuild.
    pub fn refit(&self, g: usize) -> Result<Diffeomorphism> {
        match self {
            Diffeomorphism::Identity => Ok(Diffeomorphism::Identity),
            Diffeomorphism::Grid(grid) if grid.len() == g => Ok(self.clone()),
            _ => {
                let samples = self.nonlinearity(g);
                if let Some(k) = samples.iter().position(|s| !s.is_finite()) {
                    return Err(Error::Representation(format!(
                        "non-finite nonlinearity at grid node {k}"
                    )));
                }
                Diffeomorphism::from_nonlinearity(samples)
            }
        }
    }

    /// Largest difference between `self` and `other` over `count` probes.
    pub fn sup_distance(&self, other: &Diffeomorphism, count: usize) -> f64 {
        (0..=count)
            .map(|k| {
                let x = k as f64 / count as f64;
                (self.eval(x) - other.eval(x)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Check that the map is a strictly increasing bijection at `count` samples.
    pub fn check_monotone(&self, count: usize) -> Result<()> {
        let mut prev = self.eval(0.0);
        if prev.abs() > 1e-12 {
            return Err(Error::Representation(format!("φ(0) = {prev}")));
        }
        for k in 1..=count {
            let x = k as f64 / count as f64;
            let y = self.eval(x);
            let d = self.ln_deriv(x);
            if !(y > prev) || !d.is_finite() {
                return Err(Error::Representation(format!(
                    "not increasing near x = {x} (φ = {y}, ln Dφ = {d})"
                )));
            }
            prev = y;
        }
        if (prev - 1.0).abs() > 1e-12 {
            return Err(Error::Representation(format!("φ(1) = {prev}")));
        }
        Ok(())
    }
}

/// `a·φ + b·ψ = N⁻¹(a N_φ + b N_ψ)` on a `g`-point grid.
pub fn linear_combination(
    a: f64,
    phi: &Diffeomorphism,
    b: f64,
    psi: &Diffeomorphism,
    g: usize,
) -> Result<Diffeomorphism> {
    let np = phi.nonlinearity(g);
    let ns = psi.nonlinearity(g);
    let samples = np.iter().zip(&ns).map(|(x, y)| a * x + b * y).collect();
    Diffeomorphism::from_nonlinearity(samples)
}

/// `Z(g; I) = ξ_{g(I)}⁻¹ ∘ g ∘ ξ_I` for a monotone chain `g`.
pub fn zoom(chain: Chain, domain: Interval) -> Result<Diffeomorphism> {
    if domain.is_degenerate() {
        return Err(Error::DegenerateInterval { lo: domain.lo, hi: domain.hi });
    }
    let image = Interval::hull(chain.eval(domain.lo), chain.eval(domain.hi));
    if image.is_degenerate() || !image.lo.is_finite() || !image.hi.is_finite() {
        return Err(Error::DegenerateInterval { lo: image.lo, hi: image.hi });
    }
    Ok(Diffeomorphism::Lazy(Arc::new(LazyDiffeo { chain, domain, image })))
}

/// Value, `ln Dφ` and `N_φ` at one point.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub value: f64,
    pub ln_deriv: f64,
    pub nonlinearity: f64,
}

/// A diffeomorphism stored as linearly interpolated nonlinearity samples.
#[derive(Debug)]
pub struct GridDiffeo {
    samples: Vec<f64>,
    /// `∫₀^{x_k} N − shift` at the nodes.
    log_density: Vec<f64>,
    /// `∫₀^{x_k} exp(∫₀ʳ N − shift) dr` at the nodes.
    cumulative: Vec<f64>,
    /// Denominator integral of the inverse-nonlinearity formula (shifted).
    total: f64,
    ln_total: f64,
    step: f64,
}

impl GridDiffeo {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let g = samples.len();
        if g < 2 {
            return Err(Error::Input(format!("nonlinearity grid needs at least 2 samples, got {g}")));
        }
        if let Some(k) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Input(format!("non-finite nonlinearity sample at index {k}")));
        }
        let step = 1.0 / (g - 1) as f64;
        let mut log_density = Vec::with_capacity(g);
        let mut acc = CompensatedSum::default();
        log_density.push(0.0);
        for k in 0..g - 1 {
            acc.add(0.5 * step * (samples[k] + samples[k + 1]));
            log_density.push(acc.value());
        }
        let shift = log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for d in &mut log_density {
            *d -= shift;
        }
        let mut grid = GridDiffeo {
            samples,
            log_density,
            cumulative: Vec::with_capacity(g),
            total: 1.0,
            ln_total: 0.0,
            step,
        };
        let mut cum = CompensatedSum::default();
        grid.cumulative.push(0.0);
        for k in 0..g - 1 {
            cum.add(grid.cell_integral(k, step));
            grid.cumulative.push(cum.value());
        }
        grid.total = cum.value();
        grid.ln_total = grid.total.ln();
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// The normalization integral `∫₀¹ exp(∫₀ʳ N) dr`.
    pub fn normalization(&self) -> f64 {
        let shift = -self.log_density[0];
        self.total * shift.exp()
    }

    #[inline]
    fn cell(&self, x: f64) -> (usize, f64) {
        let g = self.samples.len();
        let k = ((x / self.step) as usize).min(g - 2);
        (k, x - k as f64 * self.step)
    }

    /// Shifted `∫₀^{x_k + s} N` inside cell `k`.
    #[inline]
    fn log_density_in_cell(&self, k: usize, s: f64) -> f64 {
        let n0 = self.samples[k];
        let slope = (self.samples[k + 1] - n0) / self.step;
        self.log_density[k] + s * (n0 + 0.5 * slope * s)
    }

    #[inline]
    fn cell_integral(&self, k: usize, t: f64) -> f64 {
        gauss_legendre(0.0, t, |s| self.log_density_in_cell(k, s).exp())
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let (k, s) = self.cell(x);
        ((self.cumulative[k] + self.cell_integral(k, s)) / self.total).min(1.0)
    }

    pub fn ln_deriv(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let (k, s) = self.cell(x);
        self.log_density_in_cell(k, s) - self.ln_total
    }

    pub fn nonlinearity_at(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let (k, s) = self.cell(x);
        let t = s / self.step;
        (1.0 - t) * self.samples[k] + t * self.samples[k + 1]
    }

    pub fn jet(&self, x: f64) -> Jet {
        Jet {
            value: self.eval(x),
            ln_deriv: self.ln_deriv(x),
            nonlinearity: self.nonlinearity_at(x),
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        let target = y * self.total;
        let k = self.cumulative.partition_point(|&c| c <= target).clamp(1, self.len() - 1) - 1;
        let rest = target - self.cumulative[k];
        let s = invert_increasing(
            |s| (self.cell_integral(k, s), self.log_density_in_cell(k, s).exp()),
            rest,
            0.0,
            self.step,
        );
        (k as f64 * self.step + s).clamp(0.0, 1.0)
    }

    /// Exact `max F − min F` for the piecewise-quadratic `F = ∫ N`.
    pub fn distortion(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..self.len() {
            lo = lo.min(self.log_density[k]);
            hi = hi.max(self.log_density[k]);
            if k + 1 < self.len() {
                let n0 = self.samples[k];
                let n1 = self.samples[k + 1];
                if n0 * n1 < 0.0 {
                    // interior stationary point of the quadratic
                    let s = self.step * n0 / (n0 - n1);
                    let v = self.log_density_in_cell(k, s);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        hi - lo
    }
}

/// `ξ_image⁻¹ ∘ chain ∘ ξ_domain`, evaluated on demand.
#[derive(Clone, Debug)]
pub struct LazyDiffeo {
    pub chain: Chain,
    pub domain: Interval,
    pub image: Interval,
}

impl LazyDiffeo {
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let y = self.chain.eval(self.domain.at(x));
        self.image.coordinate(y).clamp(0.0, 1.0)
    }

    pub fn jet(&self, x: f64) -> Jet {
        let x = x.clamp(0.0, 1.0);
        let j = self.chain.jet(self.domain.at(x));
        let value = if x == 0.0 {
            0.0
        } else if x == 1.0 {
            1.0
        } else {
            self.image.coordinate(j.value).clamp(0.0, 1.0)
        };
        Jet {
            value,
            ln_deriv: j.ln_deriv + self.domain.len().ln() - self.image.len().ln(),
            nonlinearity: self.domain.len() * j.nonlinearity,
        }
    }
}

/// One monotone factor of a [`Chain`].
#[derive(Clone, Debug)]
pub enum Link {
    Diffeo(Diffeomorphism),
    /// The power branch of the standard family on one side of `c`.
    Power { params: StandardParams, side: Side },
    /// `x ↦ shift + scale·x` with `scale > 0`.
    Affine { scale: f64, shift: f64 },
}

impl Link {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Link::Diffeo(d) => d.eval(x),
            Link::Power { params, side } => params.branch(*side, x),
            Link::Affine { scale, shift } => shift + scale * x,
        }
    }

    #[inline]
    pub fn jet(&self, x: f64) -> Jet {
        match self {
            Link::Diffeo(d) => d.jet(x),
            Link::Power { params, side } => Jet {
                value: params.branch(*side, x),
                ln_deriv: params.ln_branch_deriv(*side, x),
                nonlinearity: (params.rho - 1.0) / (x - params.c),
            },
            Link::Affine { scale, shift } => Jet {
                value: shift + scale * x,
                ln_deriv: scale.ln(),
                nonlinearity: 0.0,
            },
        }
    }
}

/// A composition of monotone maps, applied first to last.
#[derive(Clone, Debug, Default)]
pub struct Chain {
    links: Vec<Link>,
}

impl Chain {
    pub fn new() -> Self {
        Chain::default()
    }

    pub fn then(mut self, link: Link) -> Self {
        self.links.push(link);
        self
    }

    pub fn extend(mut self, other: &Chain) -> Self {
        self.links.extend(other.links.iter().cloned());
        self
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn eval(&self, mut x: f64) -> f64 {
        for link in &self.links {
            x = link.eval(x);
        }
        x
    }

    /// Chain rule: `N_{g∘h} = (N_g ∘ h)·Dh + N_h`.
    pub fn jet(&self, x: f64) -> Jet {
        let mut acc = Jet { value: x, ln_deriv: 0.0, nonlinearity: 0.0 };
        for link in &self.links {
            let j = link.jet(acc.value);
            acc.nonlinearity += j.nonlinearity * acc.ln_deriv.exp();
            acc.ln_deriv += j.ln_deriv;
            acc.value = j.value;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_map(a: f64, x: f64) -> f64 {
        (a * x).exp_m1() / a.exp_m1()
    }

    #[test]
    fn zero_nonlinearity_is_identity() {
        assert!(Diffeomorphism::from_nonlinearity(vec![0.0; 9]).unwrap().is_identity());
        let g = GridDiffeo::new(vec![0.0; 33]).unwrap();
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            assert!((g.eval(x) - x).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_nonlinearity_matches_closed_form() {
        for a in [-2.0, -0.3, 0.7, 2.0] {
            let phi = Diffeomorphism::from_nonlinearity(vec![a; DEFAULT_GRID]).unwrap();
            for k in 0..=1000 {
                let x = k as f64 / 1000.0;
                assert!((phi.eval(x) - exp_map(a, x)).abs() < 1e-12, "a={a} x={x}");
            }
            assert!((phi.distortion() - a.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_inverse_round_trip() {
        let phi = Diffeomorphism::from_nonlinearity_fn(65, |x| 3.0 * (5.0 * x).sin()).unwrap();
        for k in 0..=200 {
            let y = k as f64 / 200.0;
            assert!((phi.eval(phi.inverse(y)) - y).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(Diffeomorphism::from_nonlinearity(vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(Diffeomorphism::from_nonlinearity(vec![1.0]).is_err());
    }

    #[test]
    fn zoom_of_identity_and_affine() {
        let i = Interval::new(0.2, 0.45).unwrap();
        let z = zoom(Chain::new().then(Link::Diffeo(Diffeomorphism::Identity)), i).unwrap();
        let a = zoom(Chain::new().then(Link::Affine { scale: 0.3, shift: 0.1 }), i).unwrap();
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            assert!((z.eval(x) - x).abs() < 1e-15);
            assert!((a.eval(x) - x).abs() < 1e-14);
            assert!(z.nonlinearity_at(x).abs() < 1e-15);
        }
        let degenerate = Interval { lo: 0.3, hi: 0.3 };
        assert!(matches!(
            zoom(Chain::new(), degenerate),
            Err(Error::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn zoom_of_full_interval_is_the_map() {
        let g = Diffeomorphism::from_nonlinearity_fn(DEFAULT_GRID, |x| 1.0 - 2.0 * x).unwrap();
        let z = zoom(Chain::new().then(Link::Diffeo(g.clone())), Interval::UNIT).unwrap();
        for k in 0..=50 {
            let x = k as f64 / 50.0;
            assert!((z.eval(x) - g.eval(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn refit_is_idempotent_on_grids() {
        let g = Diffeomorphism::from_nonlinearity_fn(DEFAULT_GRID, |x| x * x).unwrap();
        let r = g.refit(DEFAULT_GRID).unwrap();
        assert_eq!(r.nonlinearity(DEFAULT_GRID), g.nonlinearity(DEFAULT_GRID));
    }

    #[test]
    fn linear_structure_identities() {
        let phi = Diffeomorphism::from_nonlinearity_fn(DEFAULT_GRID, |x| (3.0 * x).cos()).unwrap();
        let same = linear_combination(1.0, &phi, 0.0, &Diffeomorphism::Identity, DEFAULT_GRID).unwrap();
        assert!(same.sup_distance(&phi, 500) < 1e-15);
        let zero = linear_combination(0.0, &phi, 0.0, &phi, DEFAULT_GRID).unwrap();
        assert!(zero.is_identity());
    }

    #[test]
    fn lazy_maps_check_monotone() {
        let phi = Diffeomorphism::from_nonlinearity_fn(DEFAULT_GRID, |x| 2.0 * x - 1.0).unwrap();
        let comp = Diffeomorphism::compose(&phi, &phi);
        comp.check_monotone(1000).unwrap();
        assert_eq!(comp.provenance(), Provenance::Lazy);
    }
}
