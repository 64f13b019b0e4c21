//! Exact bivariate polynomials and polynomial differential forms.

mod coeff;
mod forms;
pub mod linalg;
mod multipoly;
mod parse;
mod poly;
mod scalar;
pub mod system;
pub mod univariate;

pub use coeff::Coeff;
pub use forms::{exterior_d, wedge, ExactOneForm, ExactTwoForm, OneForm, TwoForm};
pub use multipoly::MultiPoly;
pub use parse::{parse_poly, parse_scalar};
pub use poly::{monomials_up_to, BivarPoly, Mono, Poly};
pub use scalar::Scalar;
