use std::collections::HashMap;

use super::{CspError, SituationKey};
use crate::enumeration::{Filters, ProfileSpace};
use crate::model::{Instance, Observation, Rational};
use crate::scf::{ScfError, SocialChoiceFunction};

/// A rule given as a finite table from situations to outcomes.
#[derive(Clone, Debug)]
pub struct TabulatedScf {
    label: String,
    table: HashMap<SituationKey, Rational>,
}

impl TabulatedScf {
    pub fn new(label: impl Into<String>, table: HashMap<SituationKey, Rational>) -> Self {
        TabulatedScf {
            label: label.into(),
            table,
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, key: &SituationKey) -> Option<Rational> {
        self.table.get(key).copied()
    }

    /// Overwrites one cell, e.g. to inject a fault.
    pub fn set(&mut self, key: SituationKey, outcome: Rational) {
        self.table.insert(key, outcome);
    }
}

impl SocialChoiceFunction for TabulatedScf {
    fn name(&self) -> String {
        format!("table:{}", self.label)
    }

    fn outcome(&self, observation: &Observation<'_>) -> Result<Rational, ScfError> {
        let missing = || {
            let names = observation.instance().graph().set_names(observation.participants());
            ScfError::MissingSituation(format!("participants {names:?}"))
        };
        let key = SituationKey::from_observation(observation).ok_or_else(missing)?;
        self.table.get(&key).copied().ok_or_else(missing)
    }
}

/// Restricts `scf` to the reachable situations of `instance`.
pub fn tabulate(scf: &dyn SocialChoiceFunction, instance: &Instance, budget: usize) -> Result<TabulatedScf, CspError> {
    let space = ProfileSpace::new(instance, &Filters::none(), budget)?;
    let mut table = HashMap::new();
    for index in 0..space.len() {
        let profile = space.profile(index);
        let observation = Observation::new_unchecked(instance, &profile);
        let key = SituationKey::from_observation(&observation).expect("enumerated peaks are on the grid");
        if let std::collections::hash_map::Entry::Vacant(slot) = table.entry(key) {
            slot.insert(scf.outcome(&observation)?);
        }
    }
    Ok(TabulatedScf::new(scf.name(), table))
}
