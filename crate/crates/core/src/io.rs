//! JSON form of Lorenz maps.
//!
//! Coefficients are written as nonlinearity grid samples, or `"id"`.
//! Lazy coefficients are refitted on the default grid when written.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diffeo::{Diffeomorphism, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::map::{LorenzMap, StandardParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Named(String),
    Grid { grid: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub u: f64,
    pub v: f64,
    pub c: f64,
    pub rho: f64,
    #[serde(default = "identity_spec")]
    pub phi: CoefficientSpec,
    #[serde(default = "identity_spec")]
    pub psi: CoefficientSpec,
}

fn identity_spec() -> CoefficientSpec {
    CoefficientSpec::Named("id".into())
}

impl CoefficientSpec {
    pub fn of(d: &Diffeomorphism) -> Self {
        if d.is_identity() {
            identity_spec()
        } else {
            CoefficientSpec::Grid { grid: d.nonlinearity(DEFAULT_GRID) }
        }
    }

    pub fn build(&self) -> Result<Diffeomorphism> {
        match self {
            CoefficientSpec::Named(s) if s == "id" => Ok(Diffeomorphism::identity()),
            CoefficientSpec::Named(s) => Err(Error::Input(format!("unknown coefficient {s:?}"))),
            CoefficientSpec::Grid { grid } => {
                if grid.len() < 2 {
                    return Err(Error::Input(format!("grid needs at least 2 samples, got {}", grid.len())));
                }
                if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
                    return Err(Error::Input(format!("non-finite grid sample {x}")));
                }
                Diffeomorphism::from_nonlinearity(grid.clone())
            }
        }
    }
}

impl MapSpec {
    pub fn of(f: &LorenzMap) -> Self {
        let p = f.params;
        MapSpec {
            u: p.u,
            v: p.v,
            c: p.c,
            rho: p.rho,
            phi: CoefficientSpec::of(&f.phi),
            psi: CoefficientSpec::of(&f.psi),
        }
    }

    pub fn build(&self) -> Result<LorenzMap> {
        LorenzMap::new(
            StandardParams::new(self.u, self.v, self.c, self.rho)?,
            self.phi.build()?,
            self.psi.build()?,
        )
    }
}

impl Serialize for LorenzMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MapSpec::of(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LorenzMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MapSpec::deserialize(d)?.build().map_err(serde::de::Error::custom)
    }
}

pub fn map_to_json(f: &LorenzMap) -> Result<String> {
    serde_json::to_string_pretty(f).map_err(|e| Error::Input(e.to_string()))
}

pub fn map_from_json(s: &str) -> Result<LorenzMap> {
    let spec: MapSpec = serde_json::from_str(s).map_err(|e| Error::Input(e.to_string()))?;
    spec.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_shorthand() {
        let f = map_from_json(r#"{"u":0.9,"v":0.8,"c":0.4,"rho":2,"phi":"id","psi":"id"}"#).unwrap();
        assert!(f.phi.is_identity() && f.psi.is_identity());
        let back: serde_json::Value = serde_json::from_str(&map_to_json(&f).unwrap()).unwrap();
        assert_eq!(back["phi"], "id");
    }

    #[test]
    fn grid_round_trip() {
        let phi = Diffeomorphism::from_nonlinearity(vec![0.3; DEFAULT_GRID]).unwrap();
        let f = LorenzMap::new(StandardParams::new(0.9, 0.8, 0.4, 2.5).unwrap(), phi, Diffeomorphism::identity()).unwrap();
        let g = map_from_json(&map_to_json(&f).unwrap()).unwrap();
        assert_eq!(f.distance(&g, DEFAULT_GRID), 0.0);
        assert!((f.apply(0.2) - g.apply(0.2)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        for s in [
            r#"{"u":1.5,"v":0.8,"c":0.4,"rho":2}"#,
            r#"{"u":0.9,"v":0.8,"c":0.4,"rho":2,"phi":"exp"}"#,
            r#"{"u":0.9,"v":0.8,"c":0.4,"rho":2,"phi":{"grid":[0.1]}}"#,
            r#"{"u":0.9,"v":0.8,"c":0.4,"rho":2,"extra":1}"#,
        ] {
            assert!(map_from_json(s).is_err(), "{s}");
        }
    }
}
