use serde::{Deserialize, Serialize};

use super::Rational;

/// How a voter with a given peak ranks two outcomes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceModel {
    /// Cost is the distance to the peak.
    #[default]
    Symmetric,
    /// Only what every single-peaked order with this peak agrees on.
    Robust,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceVerdict {
    Better,
    Worse,
    Indifferent,
    Ambiguous,
}

impl PreferenceVerdict {
    pub fn flip(self) -> Self {
        match self {
            PreferenceVerdict::Better => PreferenceVerdict::Worse,
            PreferenceVerdict::Worse => PreferenceVerdict::Better,
            other => other,
        }
    }
}

/// Compares `a` against `b` from the point of view of a voter located at `peak`.
pub fn compare(peak: Rational, a: Rational, b: Rational, model: PreferenceModel) -> PreferenceVerdict {
    if a == b {
        return PreferenceVerdict::Indifferent;
    }
    let by_distance = || match peak.distance(a).cmp(&peak.distance(b)) {
        std::cmp::Ordering::Less => PreferenceVerdict::Better,
        std::cmp::Ordering::Greater => PreferenceVerdict::Worse,
        std::cmp::Ordering::Equal => PreferenceVerdict::Indifferent,
    };
    match model {
        PreferenceModel::Symmetric => by_distance(),
        PreferenceModel::Robust => {
            let same_side = (a >= peak && b >= peak) || (a <= peak && b <= peak);
            if same_side {
                // Distinct outcomes on one side are never equidistant.
                by_distance()
            } else {
                PreferenceVerdict::Ambiguous
            }
        }
    }
}
