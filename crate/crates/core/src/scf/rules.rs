use std::collections::BTreeMap;

use super::{weighted_median, ScfError, SocialChoiceFunction, WeightAssignment};
use crate::model::{Observation, Rational};

/// Always returns the same point. Negative control for efficiency and ontoness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedOutcome(Rational);

impl FixedOutcome {
    pub fn new(value: Rational) -> Result<Self, ScfError> {
        if !value.in_unit_interval() {
            return Err(ScfError::InvalidParameters(format!(
                "fixed outcome {value} outside [0, 1]"
            )));
        }
        Ok(FixedOutcome(value))
    }

    pub fn value(&self) -> Rational {
        self.0
    }
}

impl SocialChoiceFunction for FixedOutcome {
    fn name(&self) -> String {
        format!("fixed:{}", self.0)
    }

    fn outcome(&self, _observation: &Observation<'_>) -> Result<Rational, ScfError> {
        Ok(self.0)
    }
}

/// Anonymous median over the moderator's direct children; everybody deeper
/// is ignored. Without phantoms this is the `⌈n/2⌉`-th smallest direct-child
/// peak. With phantoms for size `n` (exactly `n - 1` points) it is the
/// median of the `2n - 1` combined values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DirectChildrenMedian {
    phantoms: BTreeMap<usize, Vec<Rational>>,
}

impl DirectChildrenMedian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_phantoms(phantoms: BTreeMap<usize, Vec<Rational>>) -> Result<Self, ScfError> {
        for (n, points) in &phantoms {
            if *n == 0 || points.len() + 1 != *n {
                return Err(ScfError::InvalidParameters(format!(
                    "{n} direct children need {} phantoms, got {}",
                    n.saturating_sub(1),
                    points.len()
                )));
            }
            if let Some(bad) = points.iter().find(|p| !p.in_unit_interval()) {
                return Err(ScfError::InvalidParameters(format!("phantom {bad} outside [0, 1]")));
            }
        }
        Ok(DirectChildrenMedian { phantoms })
    }
}

impl SocialChoiceFunction for DirectChildrenMedian {
    fn name(&self) -> String {
        "direct-median".into()
    }

    fn outcome(&self, observation: &Observation<'_>) -> Result<Rational, ScfError> {
        let direct = observation.at_depth(1);
        let mut values: Vec<(Rational, u64)> = direct.iter().map(|v| (observation.peak(v), 1)).collect();
        if let Some(points) = self.phantoms.get(&direct.len()) {
            values.extend(points.iter().map(|p| (*p, 1)));
        }
        weighted_median(&values)
    }

    fn weights(&self, observation: &Observation<'_>) -> Option<WeightAssignment> {
        Some(WeightAssignment(
            observation
                .participants()
                .iter()
                .map(|v| (v, u64::from(observation.depth(v).ok() == Some(1))))
                .collect(),
        ))
    }
}

/// Weighted median where a direct child weighs one more than the number of
/// children it invited, a grandchild of the moderator weighs one, and
/// everybody deeper weighs nothing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DepthWeightedMedian;

impl DepthWeightedMedian {
    fn weight_map(observation: &Observation<'_>) -> WeightAssignment {
        WeightAssignment(
            observation
                .participants()
                .iter()
                .map(|v| {
                    let weight = match observation.depth(v) {
                        Ok(1) => observation.invited_count(v) as u64 + 1,
                        Ok(2) => 1,
                        _ => 0,
                    };
                    (v, weight)
                })
                .collect(),
        )
    }
}

impl SocialChoiceFunction for DepthWeightedMedian {
    fn name(&self) -> String {
        "depth-weighted-median".into()
    }

    fn outcome(&self, observation: &Observation<'_>) -> Result<Rational, ScfError> {
        let weights = Self::weight_map(observation);
        let values: Vec<(Rational, u64)> = weights.0.iter().map(|(v, w)| (observation.peak(*v), *w)).collect();
        weighted_median(&values)
    }

    fn weights(&self, observation: &Observation<'_>) -> Option<WeightAssignment> {
        Some(Self::weight_map(observation))
    }
}

/// Unweighted `⌈n/2⌉`-th smallest peak over every participant. Gives deep
/// voters a full say, which makes exclusion profitable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AllParticipantsMedian;

impl SocialChoiceFunction for AllParticipantsMedian {
    fn name(&self) -> String {
        "all-median".into()
    }

    fn outcome(&self, observation: &Observation<'_>) -> Result<Rational, ScfError> {
        let values: Vec<(Rational, u64)> = observation
            .participants()
            .iter()
            .map(|v| (observation.peak(v), 1))
            .collect();
        weighted_median(&values)
    }

    fn weights(&self, observation: &Observation<'_>) -> Option<WeightAssignment> {
        Some(WeightAssignment(
            observation.participants().iter().map(|v| (v, 1)).collect(),
        ))
    }
}
