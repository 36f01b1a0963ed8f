//! Accessory parameters, regularized Liouville action and Kähler metrics for
//! hyperbolic metrics on the Riemann sphere with conical singularities.

pub mod action;
pub mod error;
pub mod field;
pub mod kahler;
pub mod linalg;
pub mod model;
pub mod monodromy;
pub mod ode;
pub mod quadrature;

pub use error::{Error, Result};
pub use linalg::Mat2;
pub use model::{AccessoryVector, Configuration, OrderData, StressTensor};
