//! Error type shared by every module.

use thiserror::Error;

/// Failures raised while validating inputs or evaluating formulas.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Mining powers do not add up to one.
    #[error("mining powers must sum to 1, got {sum}")]
    Normalization { sum: f64 },

    /// A scalar parameter lies outside its admissible interval.
    #[error("{name} = {value} is outside {bounds}")]
    Range {
        name: &'static str,
        value: f64,
        bounds: &'static str,
    },

    /// The advanced strategy needs attacker plus attracted power below one half.
    #[error("A-PSM requires alpha_a + alpha_i < 0.5, got {combined}")]
    ApsmPower { combined: f64 },

    /// A relative reward was requested against a zero baseline.
    #[error("baseline revenue is zero")]
    ZeroBaseline,

    /// A closed form was evaluated at one of its poles.
    #[error("formula is singular: {0}")]
    Singularity(&'static str),

    /// The balance equations of a chain have no unique solution.
    #[error("chain has no unique stationary distribution: {0}")]
    SingularChain(String),

    /// A textual input could not be parsed.
    #[error("cannot parse {name} from {input:?}")]
    Parse { name: &'static str, input: String },

    /// Reading or writing output failed.
    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    /// Whether the failure stems from user-supplied parameters rather than
    /// from the program or its environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Self::SingularChain(_) | Self::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
