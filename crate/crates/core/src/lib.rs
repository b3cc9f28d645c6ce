//! Numerical toolkit for weight functions of Beurling type, their Young
//! conjugates, the strong and `r`-strong pair conditions, the reduction
//! construction and Whitney jet seminorms.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conditions;
pub mod conjugate;
pub mod error;
pub mod expr;
pub mod jets;
pub mod numeric;
pub mod reduction;
pub mod report;
pub mod weights;

pub use error::{Error, ParseError, Result};
pub use expr::Expr;
pub use numeric::GeometricGrid;
pub use weights::{
    asymptotic_verdict, check_weight_axioms, AsymptoticVerdict, AxiomReport, Continuation, Normalization,
    Relation, Verdict,
    Weight, WeightFunction,
};
