//! Renormalization of Lorenz maps of monotone combinatorial type.

pub mod attractor;
pub mod bounds;
pub mod combinatorics;
pub mod corpus;
pub mod diffeo;
pub mod error;
pub mod fixed_point;
pub mod interval;
pub mod io;
pub mod island;
pub mod map;
pub mod quad;
pub mod renorm;
pub mod roots;

pub use error::{Error, Result};
