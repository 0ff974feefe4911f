//! The standard Lorenz family and Lorenz maps `f = (u, v, c, φ, ψ)`.

use serde::{Deserialize, Serialize};

use crate::diffeo::{Chain, Diffeomorphism, Link, DEFAULT_GRID};
use crate::error::{Error, Result};

/// Orbits closer than this to `c` count as hitting the critical point.
pub const COLLISION_TOL: f64 = 1e-13;

/// Branch of a Lorenz map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn symbol(self) -> u8 {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

/// Parameters `(u, v, c, ρ)` of the standard family `Q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardParams {
    pub u: f64,
    pub v: f64,
    pub c: f64,
    pub rho: f64,
}

impl StandardParams {
    pub fn new(u: f64, v: f64, c: f64, rho: f64) -> Result<Self> {
        let p = StandardParams { u, v, c, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.u)
            && (0.0..=1.0).contains(&self.v)
            && self.c > 0.0
            && self.c < 1.0
            && self.rho > 1.0
            && self.rho.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "need 0 ≤ u,v ≤ 1, 0 < c < 1, ρ > 1; got u={}, v={}, c={}, ρ={}",
                self.u, self.v, self.c, self.rho
            )))
        }
    }

    /// `μ = 1 − c`.
    #[inline]
    pub fn mu(&self) -> f64 {
        1.0 - self.c
    }

    pub fn side_of(&self, x: f64) -> Option<Side> {
        if x < self.c {
            Some(Side::Left)
        } else if x > self.c {
            Some(Side::Right)
        } else {
            None
        }
    }

    /// `Q` restricted to one side; no domain checks.
    #[inline]
    pub fn branch(&self, side: Side, x: f64) -> f64 {
        match side {
            Side::Left => {
                let r = x / self.c;
                if r < 0.5 {
                    // 1 − (1 − r)ᵖ without cancellation near 0
                    -self.u * (self.rho * (-r).ln_1p()).exp_m1()
                } else {
                    self.u * (1.0 - ((self.c - x) / self.c).powf(self.rho))
                }
            }
            // (1 − v) + v·tᵖ keeps digits when the image is close to 0
            Side::Right => (1.0 - self.v) + self.v * ((x - self.c) / self.mu()).powf(self.rho),
        }
    }

    /// `ln DQ` on one side.
    #[inline]
    pub fn ln_branch_deriv(&self, side: Side, x: f64) -> f64 {
        match side {
            Side::Left => {
                (self.u * self.rho / self.c).ln()
                    + (self.rho - 1.0) * ((self.c - x) / self.c).ln()
            }
            Side::Right => {
                (self.v * self.rho / self.mu()).ln()
                    + (self.rho - 1.0) * ((x - self.c) / self.mu()).ln()
            }
        }
    }

    /// Inverse of `Q` on one side, for `w` in the branch image.
    #[inline]
    pub fn branch_inverse(&self, side: Side, w: f64) -> f64 {
        match side {
            Side::Left => {
                let r = w / self.u;
                if r < 0.5 {
                    -self.c * ((-r).ln_1p() / self.rho).exp_m1()
                } else {
                    let s = ((self.u - w) / self.u).max(0.0);
                    self.c - self.c * s.powf(1.0 / self.rho)
                }
            }
            Side::Right => {
                let s = ((w - (1.0 - self.v)) / self.v).max(0.0);
                self.c + self.mu() * s.powf(1.0 / self.rho)
            }
        }
    }

    /// `Q(x)` with domain checks.
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_point(x, self.c)?;
        let side = self.side_of(x).expect("checked");
        Ok(self.branch(side, x))
    }
}

/// `Q(x)` for the standard family.
pub fn standard_eval(x: f64, p: &StandardParams) -> Result<f64> {
    p.eval(x)
}

/// `f(x)` for a Lorenz map.
pub fn lorenz_eval(x: f64, f: &LorenzMap) -> Result<f64> {
    f.eval(x)
}

fn check_point(x: f64, c: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0,1]")));
    }
    if x == c {
        return Err(Error::Domain(format!("x = c = {c}")));
    }
    Ok(())
}

/// A Lorenz map `f₀ = φ∘Q` on `[0,c)`, `f₁ = ψ∘Q` on `(c,1]`.
#[derive(Clone, Debug)]
pub struct LorenzMap {
    pub params: StandardParams,
    pub phi: Diffeomorphism,
    pub psi: Diffeomorphism,
}

/// `S = N′ − N²/2` with `N′` by a second-order difference of step `h`,
/// one-sided within `h` of the ends of `[0, 1]`.
pub fn schwarzian_from_nonlinearity<F: Fn(f64) -> f64>(n: F, x: f64, h: f64) -> f64 {
    let nx = n(x);
    let dn = if x - h < 0.0 {
        (-3.0 * nx + 4.0 * n(x + h) - n(x + 2.0 * h)) / (2.0 * h)
    } else if x + h > 1.0 {
        (3.0 * nx - 4.0 * n(x - h) + n(x - 2.0 * h)) / (2.0 * h)
    } else {
        (n(x + h) - n(x - h)) / (2.0 * h)
    };
    dn - 0.5 * nx * nx
}

/// Result of iterating a one-sided critical value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalOrbit {
    pub points: Vec<f64>,
    /// Step (1-based) at which the orbit came within tolerance of `c`.
    pub collision: Option<usize>,
}

impl LorenzMap {
    pub fn new(params: StandardParams, phi: Diffeomorphism, psi: Diffeomorphism) -> Result<Self> {
        params.validate()?;
        Ok(LorenzMap { params, phi, psi })
    }

    /// The standard-family member with identity coefficients.
    pub fn standard(u: f64, v: f64, c: f64, rho: f64) -> Result<Self> {
        Self::new(StandardParams::new(u, v, c, rho)?, Diffeomorphism::Identity, Diffeomorphism::Identity)
    }

    pub fn c(&self) -> f64 {
        self.params.c
    }

    pub fn rho(&self) -> f64 {
        self.params.rho
    }

    pub fn coefficient(&self, side: Side) -> &Diffeomorphism {
        match side {
            Side::Left => &self.phi,
            Side::Right => &self.psi,
        }
    }

    /// One branch; no domain checks.
    #[inline]
    pub fn branch(&self, side: Side, x: f64) -> f64 {
        self.coefficient(side).eval(self.params.branch(side, x))
    }

    /// `f(x)`, NaN at `c`.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self.params.side_of(x) {
            Some(side) => self.branch(side, x),
            None => f64::NAN,
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_point(x, self.params.c)?;
        Ok(self.apply(x))
    }

    pub fn ln_derivative(&self, x: f64) -> Result<f64> {
        check_point(x, self.params.c)?;
        let side = self.params.side_of(x).expect("checked");
        let w = self.params.branch(side, x);
        Ok(self.params.ln_branch_deriv(side, x) + self.coefficient(side).ln_deriv(w))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        Ok(self.ln_derivative(x)?.exp())
    }

    /// `f₀⁻¹` or `f₁⁻¹`; no domain checks.
    #[inline]
    pub fn branch_inverse(&self, side: Side, y: f64) -> f64 {
        let w = self.coefficient(side).inverse(y);
        self.params.branch_inverse(side, w)
    }

    pub fn inverse_branch(&self, y: f64, side: Side) -> Result<f64> {
        let (lo, hi) = match side {
            Side::Left => (0.0, self.c1_minus()),
            Side::Right => (self.c1_plus(), 1.0),
        };
        if !(lo..=hi).contains(&y) {
            return Err(Error::Domain(format!(
                "y = {y} outside the {side:?} branch image [{lo}, {hi}]"
            )));
        }
        Ok(self.branch_inverse(side, y))
    }

    /// `c₁⁻ = φ(u)`.
    pub fn c1_minus(&self) -> f64 {
        self.phi.eval(self.params.u)
    }

    /// `c₁⁺ = ψ(1 − v)`.
    pub fn c1_plus(&self) -> f64 {
        self.psi.eval(1.0 - self.params.v)
    }

    /// `c₁⁺ < c < c₁⁻`.
    pub fn is_nontrivial(&self) -> bool {
        self.c1_plus() < self.params.c && self.params.c < self.c1_minus()
    }

    /// `c₁^±, …, c_k^±`, stopping early at a critical collision.
    pub fn critical_orbit(&self, side: Side, k: usize) -> CriticalOrbit {
        let mut x = match side {
            Side::Left => self.c1_minus(),
            Side::Right => self.c1_plus(),
        };
        let mut points = Vec::with_capacity(k);
        for step in 1..=k {
            points.push(x);
            if step == k {
                break;
            }
            if (x - self.params.c).abs() <= COLLISION_TOL {
                return CriticalOrbit { points, collision: Some(step) };
            }
            x = self.apply(x);
        }
        CriticalOrbit { points, collision: None }
    }

    /// `N_f(x) = N_φ(Q(x))·DQ(x) + (ρ−1)/(x−c)`.
    pub fn nonlinearity_at(&self, x: f64) -> f64 {
        match self.params.side_of(x) {
            Some(side) => self.branch_chain(side).jet(x).nonlinearity,
            None => f64::NAN,
        }
    }

    /// Schwarzian derivative `S = N′ − N²/2`, `N′` by central differences.
    pub fn schwarzian(&self, x: f64) -> Result<f64> {
        check_point(x, self.params.c)?;
        let h = (1e-4 / (DEFAULT_GRID - 1) as f64)
            .min(0.25 * (x - self.params.c).abs())
            .min(0.5 * x.max(1e-300))
            .min(0.5 * (1.0 - x).max(1e-300));
        let h = if x == 0.0 || x == 1.0 { 1e-4 / (DEFAULT_GRID - 1) as f64 } else { h };
        Ok(schwarzian_from_nonlinearity(|t| self.nonlinearity_at(t), x, h))
    }

    /// `S_f < 0` at `count` interior sample points off `c`.
    pub fn has_negative_schwarzian(&self, count: usize) -> bool {
        (1..=count).all(|k| {
            let x = k as f64 / (count + 1) as f64;
            x == self.params.c || self.schwarzian(x).map(|s| s < 0.0).unwrap_or(false)
        })
    }

    /// The branch as a chain `Q` then coefficient.
    pub fn branch_chain(&self, side: Side) -> Chain {
        Chain::new()
            .then(Link::Power { params: self.params, side })
            .then(Link::Diffeo(self.coefficient(side).clone()))
    }

    /// Replace lazy coefficients by `g`-point grid fits.
    pub fn refit(&self, g: usize) -> Result<LorenzMap> {
        Ok(LorenzMap {
            params: self.params,
            phi: self.phi.refit(g)?,
            psi: self.psi.refit(g)?,
        })
    }

    /// Sup metric on `(u, v, c, N_φ, N_ψ)` with nonlinearities sampled on `g` points.
    pub fn distance(&self, other: &LorenzMap, g: usize) -> f64 {
        let scalar = (self.params.u - other.params.u)
            .abs()
            .max((self.params.v - other.params.v).abs())
            .max((self.params.c - other.params.c).abs());
        let sup = |a: &Diffeomorphism, b: &Diffeomorphism| {
            a.nonlinearity(g)
                .iter()
                .zip(b.nonlinearity(g))
                .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
        };
        scalar.max(sup(&self.phi, &other.phi)).max(sup(&self.psi, &other.psi))
    }

    /// Coordinate vector `(u, v, c, N_φ grid, N_ψ grid)`.
    pub fn coordinates(&self, g: usize) -> Vec<f64> {
        let mut x = vec![self.params.u, self.params.v, self.params.c];
        x.extend(self.phi.nonlinearity(g));
        x.extend(self.psi.nonlinearity(g));
        x
    }

    pub fn from_coordinates(x: &[f64], rho: f64, g: usize) -> Result<LorenzMap> {
        if x.len() != 3 + 2 * g {
            return Err(Error::Input(format!("expected {} coordinates, got {}", 3 + 2 * g, x.len())));
        }
        LorenzMap::new(
            StandardParams::new(x[0], x[1], x[2], rho)?,
            Diffeomorphism::from_nonlinearity(x[3..3 + g].to_vec())?,
            Diffeomorphism::from_nonlinearity(x[3 + g..].to_vec())?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_family_examples() {
        let p = StandardParams::new(0.8, 0.5, 0.5, 2.0).unwrap();
        assert_eq!(p.eval(0.0).unwrap(), 0.0);
        assert_eq!(p.eval(1.0).unwrap(), 1.0);
        assert!((p.eval(0.5 - 1e-9).unwrap() - 0.8).abs() < 1e-12);
        assert!((p.eval(0.5 + 1e-9).unwrap() - 0.5).abs() < 1e-12);
        let q = StandardParams::new(1.0, 1.0, 0.5, 2.0).unwrap();
        assert!((q.eval(0.25).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(p.eval(0.5), Err(Error::Domain(_))));
        assert!(matches!(p.eval(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(StandardParams::new(1.2, 0.5, 0.5, 2.0).is_err());
        assert!(StandardParams::new(0.5, 0.5, 0.0, 2.0).is_err());
        assert!(StandardParams::new(0.5, 0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn inverse_branch_examples() {
        let f = LorenzMap::standard(0.8, 0.5, 0.5, 2.0).unwrap();
        assert!((f.inverse_branch(0.6, Side::Left).unwrap() - 0.25).abs() < 1e-15);
        assert!((f.inverse_branch(f.c1_minus(), Side::Left).unwrap() - 0.5).abs() < 1e-15);
        assert!(f.inverse_branch(0.9, Side::Left).is_err());
        assert!(f.inverse_branch(0.3, Side::Right).is_err());
    }

    #[test]
    fn identity_derivative_formula() {
        let f = LorenzMap::standard(0.9, 0.7, 0.4, 2.5).unwrap();
        for x in [0.0, 0.1, 0.3, 0.39] {
            let expected = 0.9 * 2.5 / 0.4 * ((0.4 - x) / 0.4f64).powf(1.5);
            assert!((f.derivative(x).unwrap() - expected).abs() < 1e-12 * expected.max(1.0));
        }
        assert!(f.derivative(0.4 - 1e-12).unwrap() < 1e-15);
    }

    #[test]
    fn critical_orbit_identity() {
        let f = LorenzMap::standard(0.9, 0.7, 0.4, 2.0).unwrap();
        assert_eq!(f.critical_orbit(Side::Left, 1).points, vec![0.9]);
        assert!((f.critical_orbit(Side::Right, 1).points[0] - 0.3).abs() < 1e-15);
        assert!(f.is_nontrivial());
        assert!(!LorenzMap::standard(0.3, 0.7, 0.4, 2.0).unwrap().is_nontrivial());
    }

    #[test]
    fn power_branch_schwarzian() {
        let f = LorenzMap::standard(1.0, 1.0, 0.5, 3.0).unwrap();
        for x in [0.6, 0.75, 0.9] {
            let d = x - 0.5;
            let expected = -(9.0 - 1.0) / (2.0 * d * d);
            assert!((f.schwarzian(x).unwrap() - expected).abs() < 1e-5 * expected.abs());
        }
        assert!(LorenzMap::standard(0.8, 0.6, 0.5, 2.0).unwrap().has_negative_schwarzian(1000));
    }
}
