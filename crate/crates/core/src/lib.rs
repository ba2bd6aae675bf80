//! Numerical bounds on quantum arrival probabilities.
//!
//! The crate covers the number-basis representation of half-plane
//! indicator operators, the finite-α advantage curve, dilation-block
//! bounds on the Bracken–Melloy constant, optimal classical arrival, the
//! restricted-projectile optimizer and scenario reductions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cbm;
pub mod classical;
pub mod error;
pub mod grid;
pub mod number_basis;
pub mod phi_alpha;
pub mod quadrature;
pub mod restricted;
pub mod scenarios;
pub mod specfun;

pub use error::{Error, Result};

/// Arithmetic used for precision-sensitive matrix elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    /// Double-double arithmetic (about 31 significant digits).
    Extended,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Precision::Double),
            "extended" => Ok(Precision::Extended),
            other => Err(Error::InvalidInput(format!("unknown precision mode `{other}`"))),
        }
    }
}
