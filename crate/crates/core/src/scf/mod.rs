//! Social choice functions over reported profiles.
//!
//! Every rule sees the game only through an [`Observation`]: the
//! participating voters, their reported peaks and their reported
//! invitations. Rules are pure and stateless.

mod gmvs;
mod rules;

use std::collections::BTreeMap;

pub use gmvs::{gmvs_evaluate, GmvsParameters, GmvsScf};
pub use rules::{AllParticipantsMedian, DepthWeightedMedian, DirectChildrenMedian, FixedOutcome};

use crate::model::{Instance, ModelError, Observation, Profile, Rational, VoterId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScfError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("missing parameter: {0}")]
    MissingParameter(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("situation not tabulated: {0}")]
    MissingSituation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-voter multiplicity used by the median-style rules.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WeightAssignment(pub BTreeMap<VoterId, u64>);

impl WeightAssignment {
    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

pub trait SocialChoiceFunction: Send + Sync {
    /// CLI-selectable name, e.g. `depth-weighted-median`.
    fn name(&self) -> String;

    fn outcome(&self, observation: &Observation<'_>) -> Result<Rational, ScfError>;

    /// Weights the rule used, if it is a weighted median.
    fn weights(&self, _observation: &Observation<'_>) -> Option<WeightAssignment> {
        None
    }
}

/// Validates `profile` against the instance and evaluates `scf` on it.
pub fn evaluate(scf: &dyn SocialChoiceFunction, instance: &Instance, profile: &Profile) -> Result<Rational, ScfError> {
    let observation = Observation::new(instance, profile)?;
    scf.outcome(&observation)
}

/// The `⌈m/2⌉`-th smallest value of the multiset in which each value
/// appears `weight` times. Zero weights are allowed and contribute nothing.
pub fn weighted_median(values: &[(Rational, u64)]) -> Result<Rational, ScfError> {
    let total: u64 = values.iter().map(|(_, w)| *w).sum();
    if total == 0 {
        return Err(ScfError::Degenerate("weighted median of nothing".into()));
    }
    let mut sorted: Vec<(Rational, u64)> = values.iter().copied().filter(|(_, w)| *w > 0).collect();
    sorted.sort_by_key(|(v, _)| *v);
    let rank = total.div_ceil(2);
    let mut seen = 0;
    for (value, weight) in sorted {
        seen += weight;
        if seen >= rank {
            return Ok(value);
        }
    }
    unreachable!("cumulative weight reaches the total")
}
