//! Melnikov functions, vanishing cycles and center conditions for
//! polynomial foliations of the plane.

pub mod abelian;
pub mod algebra;
pub mod center;
pub mod cli;
pub mod error;
pub mod fibration;
pub mod foliation;
pub mod melnikov;
pub mod numeric;
pub mod oracle;
pub mod relexact;

pub use error::{Error, Result};
