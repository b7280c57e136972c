//! Exhaustive property checkers over a finite instance.
//!
//! Each checker tabulates the rule once over the relevant profile space and
//! then scans it in enumeration order, so the first violation found is the
//! minimal one. A failing [`CheckReport`] always carries a [`Witness`] that
//! can be replayed with a handful of rule evaluations.

mod checks;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checks::{
    check_all, check_anonymity, check_depth1_hull, check_ontoness, check_pareto, check_property, check_sp,
    check_voter_relevance, Checker,
};

use crate::enumeration::{AnonymityVariant, ClassKey, DeviationMode, EnumerationError, DEFAULT_BUDGET};
use crate::io::ProfileRecord;
use crate::model::{compare, Instance, ModelError, PreferenceVerdict, Rational};
use crate::scf::{evaluate, ScfError, SocialChoiceFunction};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Scf(#[from] ScfError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown property {0:?}")]
    UnknownProperty(String),
}

impl CheckError {
    pub fn is_budget(&self) -> bool {
        matches!(self, CheckError::Enumeration(EnumerationError::BudgetExceeded { .. }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    Sp,
    Spd,
    Pe,
    Onto,
    An,
    AnS,
    AnD,
    AnSd,
    Vr(u32),
    Depth1Hull,
}

impl Property {
    pub fn anonymity_variant(self) -> Option<AnonymityVariant> {
        match self {
            Property::An => Some(AnonymityVariant::Full),
            Property::AnS => Some(AnonymityVariant::ByStructure),
            Property::AnD => Some(AnonymityVariant::ByDepth),
            Property::AnSd => Some(AnonymityVariant::ByStructureDepth),
            _ => None,
        }
    }

    pub fn for_variant(variant: AnonymityVariant) -> Property {
        match variant {
            AnonymityVariant::Full => Property::An,
            AnonymityVariant::ByStructure => Property::AnS,
            AnonymityVariant::ByDepth => Property::AnD,
            AnonymityVariant::ByStructureDepth => Property::AnSd,
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Sp => f.write_str("SP"),
            Property::Spd => f.write_str("SPD"),
            Property::Pe => f.write_str("PE"),
            Property::Onto => f.write_str("ONTO"),
            Property::An => f.write_str("AN"),
            Property::AnS => f.write_str("ANS"),
            Property::AnD => f.write_str("AND"),
            Property::AnSd => f.write_str("ANSD"),
            Property::Vr(d) => write!(f, "VR-{d}"),
            Property::Depth1Hull => f.write_str("D1HULL"),
        }
    }
}

/// Case-insensitive; `-`, `_`, `:` and parentheses are ignored, so `AN-SD`,
/// `ansd`, `VR(2)` and `vr-2` all parse.
impl FromStr for Property {
    type Err = CheckError;

    fn from_str(text: &str) -> Result<Self, CheckError> {
        let key: String = text
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ':' | '(' | ')' | ' '))
            .collect::<String>()
            .to_ascii_uppercase();
        let property = match key.as_str() {
            "SP" => Property::Sp,
            "SPD" => Property::Spd,
            "PE" => Property::Pe,
            "ONTO" => Property::Onto,
            "AN" => Property::An,
            "ANS" => Property::AnS,
            "AND" => Property::AnD,
            "ANSD" => Property::AnSd,
            "D1HULL" | "DEPTH1HULL" => Property::Depth1Hull,
            other => match other.strip_prefix("VR").and_then(|d| d.parse().ok()) {
                Some(d) => Property::Vr(d),
                None => return Err(CheckError::UnknownProperty(text.to_string())),
            },
        };
        Ok(property)
    }
}

impl Serialize for Property {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Property {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

/// What a verdict means beyond the finite grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SoundnessNote {
    /// The verdict rests on concrete profiles and holds verbatim.
    ExactOnGrid,
    /// Nothing was violated on this grid; finer grids are not covered.
    PassIsGridRelative,
    /// No witness exists on this grid; a finer grid might have one.
    NoWitnessOnGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub budget: usize,
    /// Under the robust model, count opposite-side outcome pairs as violations.
    pub ambiguous_is_violation: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            budget: DEFAULT_BUDGET,
            ambiguous_is_violation: true,
        }
    }
}

/// A concrete counterexample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `voter` with `true_peak` reports truthfully in `truthful` and prefers
    /// (or cannot rank) the outcome of `deviation`.
    Deviation {
        voter: String,
        true_peak: Rational,
        truthful: ProfileRecord,
        deviation: ProfileRecord,
        truthful_outcome: Rational,
        deviation_outcome: Rational,
        /// How the truthful outcome compares to the deviation outcome.
        preference: PreferenceVerdict,
    },
    /// The outcome leaves `[low, high]`, the peak hull of `hull_voters`.
    OffHull {
        profile: ProfileRecord,
        outcome: Rational,
        low: Rational,
        high: Rational,
        hull_voters: Vec<String>,
    },
    /// No enumerated profile selects `point`.
    Unreached { point: Rational },
    /// Permuting peaks inside `class` moved the outcome.
    Permutation {
        class: ClassKey,
        profile: ProfileRecord,
        permuted: ProfileRecord,
        outcome: Rational,
        permuted_outcome: Rational,
    },
    /// No others-profile lets `voter` change the outcome.
    Irrelevant { voter: String, true_peak: Rational },
}

/// Evidence that `voter` of type `true_peak` can move the outcome: the two
/// profiles differ only in that voter's report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceWitness {
    pub voter: String,
    pub true_peak: Rational,
    pub first: ProfileRecord,
    pub second: ProfileRecord,
    pub first_outcome: Rational,
    pub second_outcome: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub property: Property,
    pub scf: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<DeviationMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relevance_witnesses: Vec<RelevanceWitness>,
    pub profiles_examined: u64,
    pub soundness_note: SoundnessNote,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Re-evaluates every cited profile and confirms the recorded outcomes
    /// and the claimed violation or relevance.
    pub fn replay(&self, scf: &dyn SocialChoiceFunction, instance: &Instance) -> Result<bool, CheckError> {
        if let Some(witness) = &self.witness {
            if !witness.replay(scf, instance)? {
                return Ok(false);
            }
        }
        for relevance in &self.relevance_witnesses {
            let first = evaluate(scf, instance, &relevance.first.to_profile(instance)?)?;
            let second = evaluate(scf, instance, &relevance.second.to_profile(instance)?)?;
            if first != relevance.first_outcome || second != relevance.second_outcome || first == second {
                return Ok(false);
            }
        }
        Ok(self.verdict == Verdict::Pass || self.witness.is_some())
    }
}

impl Witness {
    pub fn replay(&self, scf: &dyn SocialChoiceFunction, instance: &Instance) -> Result<bool, CheckError> {
        let run = |record: &ProfileRecord| -> Result<Rational, CheckError> {
            Ok(evaluate(scf, instance, &record.to_profile(instance)?)?)
        };
        Ok(match self {
            Witness::Deviation {
                true_peak,
                truthful,
                deviation,
                truthful_outcome,
                deviation_outcome,
                preference,
                ..
            } => {
                let a = run(truthful)?;
                let b = run(deviation)?;
                a == *truthful_outcome
                    && b == *deviation_outcome
                    && compare(*true_peak, a, b, instance.preference_model()) == *preference
                    && matches!(preference, PreferenceVerdict::Worse | PreferenceVerdict::Ambiguous)
            }
            Witness::OffHull {
                profile,
                outcome,
                low,
                high,
                ..
            } => {
                let value = run(profile)?;
                value == *outcome && (value < *low || value > *high)
            }
            Witness::Permutation {
                profile,
                permuted,
                outcome,
                permuted_outcome,
                ..
            } => {
                let a = run(profile)?;
                let b = run(permuted)?;
                a == *outcome && b == *permuted_outcome && a != b
            }
            Witness::Unreached { .. } | Witness::Irrelevant { .. } => true,
        })
    }
}
