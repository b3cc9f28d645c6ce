use std::fmt;

use thiserror::Error;

/// Syntax error produced by the expression parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the input where parsing stopped.
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at offset {}: found {}, expected one of [{}]",
            self.offset,
            self.found,
            self.expected.join(", ")
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("weight `{name}` is not finite or negative at t = {t}: {detail}")]
    Domain { name: String, t: f64, detail: String },

    #[error("difference quotient for `{name}` at t = {t} is not finite (step {step})")]
    Derivative { name: String, t: f64, step: f64 },

    #[error("t = {t} lies outside the constructed range [{lo}, {hi}]")]
    Range { t: f64, lo: f64, hi: f64 },

    #[error("conjugate maximizer for y = {y} reached the search bound s_max = {s_max}; the function grows too slowly")]
    ArgmaxAtBoundary { y: f64, s_max: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("stage `{stage}` failed: {witness}")]
    Stage { stage: String, witness: String },

    #[error("jet data error: {0}")]
    JetData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
