//! Numerical experiments on the escaping sets of `a e^z + b e^-z` and `λ e^z`:
//! orbit classification, itineraries, dynamic rays, Cantor-type
//! constructions, dimension estimators and Monte-Carlo measure estimates.

pub mod cantor;
pub mod dimension;
pub mod dynamics;
pub mod error;
pub mod measure;
pub mod rays;

pub use error::{Error, Result};
