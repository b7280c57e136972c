use std::collections::BTreeMap;

use super::{ScfError, SocialChoiceFunction};
use crate::model::{Observation, Rational, VoterId, VoterSet};

/// Parameters `α^N_S` of a generalized median voter scheme, for every
/// participating set `N` the scheme may face.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GmvsParameters {
    /// `α^N_S` depends only on `|S|`: `by_size[n][k]` for `k = 0..=n`.
    Anonymous(BTreeMap<usize, Vec<Rational>>),
    /// Explicit `α^N_S` keyed by `N`, then by `S ⊆ N`.
    Explicit(BTreeMap<VoterSet, BTreeMap<VoterSet, Rational>>),
}

impl GmvsParameters {
    pub fn anonymous(by_size: BTreeMap<usize, Vec<Rational>>) -> Result<Self, ScfError> {
        for (n, alphas) in &by_size {
            if *n == 0 || alphas.len() != n + 1 {
                return Err(ScfError::InvalidParameters(format!(
                    "size {n}: expected {} values, got {}",
                    n + 1,
                    alphas.len()
                )));
            }
            if alphas[0] != Rational::ZERO || alphas[*n] != Rational::ONE {
                return Err(ScfError::InvalidParameters(format!(
                    "size {n}: α for the empty set must be 0 and for the full set 1"
                )));
            }
            if alphas.windows(2).any(|w| w[0] > w[1]) || alphas.iter().any(|a| !a.in_unit_interval()) {
                return Err(ScfError::InvalidParameters(format!(
                    "size {n}: values must be nondecreasing within [0, 1]"
                )));
            }
        }
        Ok(GmvsParameters::Anonymous(by_size))
    }

    pub fn explicit(tables: BTreeMap<VoterSet, BTreeMap<VoterSet, Rational>>) -> Result<Self, ScfError> {
        for (participants, table) in &tables {
            if participants.is_empty() {
                return Err(ScfError::InvalidParameters("empty participating set".into()));
            }
            for subset in participants.subsets() {
                let alpha = table
                    .get(&subset)
                    .ok_or_else(|| ScfError::InvalidParameters(format!("{participants:?}: no value for {subset:?}")))?;
                if !alpha.in_unit_interval() {
                    return Err(ScfError::InvalidParameters(format!(
                        "{participants:?}: {alpha} outside [0, 1]"
                    )));
                }
                // Single-element steps are enough for monotonicity by transitivity.
                for extra in participants.difference(subset).iter() {
                    let mut bigger = subset;
                    bigger.insert(extra);
                    if table[&bigger] < *alpha {
                        return Err(ScfError::InvalidParameters(format!(
                            "{participants:?}: α not monotone between {subset:?} and {bigger:?}"
                        )));
                    }
                }
            }
            if table.keys().any(|s| !s.is_subset(*participants)) {
                return Err(ScfError::InvalidParameters(format!(
                    "{participants:?}: value given for a non-subset"
                )));
            }
            if table[&VoterSet::EMPTY] != Rational::ZERO || table[participants] != Rational::ONE {
                return Err(ScfError::InvalidParameters(format!(
                    "{participants:?}: α for the empty set must be 0 and for the full set 1"
                )));
            }
        }
        Ok(GmvsParameters::Explicit(tables))
    }

    /// Anonymous parameters that realise the `⌈n/2⌉`-th smallest peak for
    /// every `n ≤ max_voters`.
    pub fn lower_median(max_voters: usize) -> Self {
        let by_size = (1..=max_voters)
            .map(|n| {
                let threshold = n - n.div_ceil(2) + 1;
                let alphas = (0..=n)
                    .map(|k| if k >= threshold { Rational::ONE } else { Rational::ZERO })
                    .collect();
                (n, alphas)
            })
            .collect();
        GmvsParameters::Anonymous(by_size)
    }

    pub fn alpha(&self, participants: VoterSet, subset: VoterSet) -> Result<Rational, ScfError> {
        let missing = || ScfError::MissingParameter(format!("α for {subset:?} within {participants:?}"));
        match self {
            GmvsParameters::Anonymous(by_size) => by_size
                .get(&participants.len())
                .and_then(|alphas| alphas.get(subset.len()))
                .copied()
                .ok_or_else(missing),
            GmvsParameters::Explicit(tables) => tables
                .get(&participants)
                .and_then(|t| t.get(&subset))
                .copied()
                .ok_or_else(missing),
        }
    }
}

/// `max_{S ⊆ N} min({p_i : i ∈ S} ∪ {α^N_S})` with `N` the keys of `peaks`.
///
/// Uses monotonicity of `α`: for a fixed minimum peak `v` the best `S` is
/// the set of everyone whose peak is at least `v`, so only `n + 1` subsets
/// need evaluating.
pub fn gmvs_evaluate(params: &GmvsParameters, peaks: &BTreeMap<VoterId, Rational>) -> Result<Rational, ScfError> {
    if peaks.is_empty() {
        return Err(ScfError::Degenerate("no participating voters".into()));
    }
    let participants: VoterSet = peaks.keys().copied().collect();
    let mut descending: Vec<(Rational, VoterId)> = peaks.iter().map(|(v, p)| (*p, *v)).collect();
    descending.sort_by(|a, b| b.cmp(a));

    let mut best = params.alpha(participants, VoterSet::EMPTY)?;
    let mut upper = VoterSet::EMPTY;
    let mut index = 0;
    while index < descending.len() {
        let value = descending[index].0;
        while index < descending.len() && descending[index].0 == value {
            upper.insert(descending[index].1);
            index += 1;
        }
        let candidate = value.min(params.alpha(participants, upper)?);
        best = best.max(candidate);
    }
    Ok(best)
}

/// A GMVS applied to all participating voters.
#[derive(Clone, Debug)]
pub struct GmvsScf {
    params: GmvsParameters,
    label: String,
}

impl GmvsScf {
    pub fn new(params: GmvsParameters, label: impl Into<String>) -> Self {
        GmvsScf {
            params,
            label: label.into(),
        }
    }

    pub fn params(&self) -> &GmvsParameters {
        &self.params
    }
}

impl SocialChoiceFunction for GmvsScf {
    fn name(&self) -> String {
        format!("gmvs:{}", self.label)
    }

    fn outcome(&self, observation: &Observation<'_>) -> Result<Rational, ScfError> {
        let peaks = observation
            .participants()
            .iter()
            .map(|v| (v, observation.peak(v)))
            .collect();
        gmvs_evaluate(&self.params, &peaks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::q;

    fn set(ids: &[usize]) -> VoterSet {
        ids.iter().map(|i| VoterId(*i)).collect()
    }

    fn peaks(values: &[Rational]) -> BTreeMap<VoterId, Rational> {
        values.iter().enumerate().map(|(i, p)| (VoterId(i), *p)).collect()
    }

    #[test]
    fn single_voter_is_a_dictator() {
        let params = GmvsParameters::anonymous([(1, vec![q(0, 1), q(1, 1)])].into()).unwrap();
        assert_eq!(gmvs_evaluate(&params, &peaks(&[q(7, 10)])).unwrap(), q(7, 10));
    }

    /// α_S = 0 unless S = N: every nonempty proper subset yields 0, so the
    /// maximum comes from S = N, i.e. min of both peaks.
    #[test]
    fn unanimity_parameters_give_minimum() {
        let table: BTreeMap<VoterSet, Rational> = [
            (set(&[]), q(0, 1)),
            (set(&[0]), q(0, 1)),
            (set(&[1]), q(0, 1)),
            (set(&[0, 1]), q(1, 1)),
        ]
        .into();
        let params = GmvsParameters::explicit([(set(&[0, 1]), table)].into()).unwrap();
        assert_eq!(gmvs_evaluate(&params, &peaks(&[q(2, 10), q(8, 10)])).unwrap(), q(1, 5));
    }

    #[test]
    fn unanimous_peaks_are_returned() {
        let params = GmvsParameters::anonymous([(3, vec![q(0, 1), q(1, 4), q(3, 4), q(1, 1)])].into()).unwrap();
        for value in [q(0, 1), q(1, 3), q(1, 1)] {
            assert_eq!(gmvs_evaluate(&params, &peaks(&[value; 3])).unwrap(), value);
        }
    }

    #[test]
    fn lower_median_parameters() {
        let params = GmvsParameters::lower_median(4);
        let p = peaks(&[q(9, 10), q(1, 10), q(1, 2), q(3, 10)]);
        assert_eq!(gmvs_evaluate(&params, &p).unwrap(), q(3, 10));
        let p = peaks(&[q(9, 10), q(1, 10), q(1, 2)]);
        assert_eq!(gmvs_evaluate(&params, &p).unwrap(), q(1, 2));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GmvsParameters::anonymous([(2, vec![q(0, 1), q(1, 1)])].into()).is_err());
        assert!(GmvsParameters::anonymous([(2, vec![q(0, 1), q(1, 1), q(1, 2)])].into()).is_err());
        let table: BTreeMap<VoterSet, Rational> = [
            (set(&[]), q(0, 1)),
            (set(&[0]), q(3, 4)),
            (set(&[1]), q(0, 1)),
            (set(&[0, 1]), q(1, 2)),
        ]
        .into();
        assert!(GmvsParameters::explicit([(set(&[0, 1]), table)].into()).is_err());
    }

    #[test]
    fn missing_size_is_reported() {
        let params = GmvsParameters::lower_median(2);
        let err = gmvs_evaluate(&params, &peaks(&[q(0, 1); 3])).unwrap_err();
        assert!(matches!(err, ScfError::MissingParameter(_)));
    }
}
