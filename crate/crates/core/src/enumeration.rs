//! Finite iteration over joint report profiles, single-voter deviations and
//! within-class peak permutations.
//!
//! A [`ProfileSpace`] is a mixed-radix number system: voter 0 is the most
//! significant digit and each digit indexes that voter's report space
//! (peaks ascending, then invited subsets by ascending mask). Profile
//! indices therefore follow the lexicographic order and a single-voter
//! deviation is index arithmetic.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::model::{report_space, Instance, ModelError, Observation, Profile, ReportedType, VoterId, VoterSet};

/// Default cap on the number of profiles a single enumeration may visit.
pub const DEFAULT_BUDGET: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnumerationError {
    #[error("enumeration of {size} profiles exceeds the budget of {budget}")]
    BudgetExceeded { size: String, budget: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Restrictions on the per-voter report spaces.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Filters {
    /// Pin every peak to the voter's true peak (the diffusion-only space).
    pub truthful_peaks: bool,
    /// Force every voter to invite all of its children.
    pub full_invitation: bool,
    /// Pin one voter to one report.
    pub fixed_voter: Option<(VoterId, ReportedType)>,
}

impl Filters {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn diffusion_only() -> Self {
        Filters {
            truthful_peaks: true,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProfileSpace {
    spaces: Vec<Vec<ReportedType>>,
    strides: Vec<usize>,
    len: usize,
}

impl ProfileSpace {
    pub fn new(instance: &Instance, filters: &Filters, budget: usize) -> Result<Self, EnumerationError> {
        let graph = instance.graph();
        let mut spaces = Vec::with_capacity(graph.len());
        for voter in graph.voters() {
            let mut space = report_space(instance.true_type(voter), instance.grid(), filters.truthful_peaks)?;
            if filters.full_invitation {
                space.retain(|r| r.invited == graph.children(voter));
            }
            if let Some((fixed, report)) = filters.fixed_voter {
                if fixed == voter {
                    let legal = report_space(instance.true_type(voter), instance.grid(), false)?;
                    if !legal.contains(&report) {
                        return Err(ModelError::Report(format!(
                            "fixed report for {} is not in its report space",
                            graph.name(voter)
                        ))
                        .into());
                    }
                    space = vec![report];
                }
            }
            spaces.push(space);
        }

        let size = spaces.iter().try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128));
        let len = match size {
            Some(n) if n <= budget as u128 => n as usize,
            Some(n) => {
                return Err(EnumerationError::BudgetExceeded {
                    size: n.to_string(),
                    budget,
                })
            }
            None => {
                return Err(EnumerationError::BudgetExceeded {
                    size: "more than 2^128".into(),
                    budget,
                })
            }
        };

        let mut strides = vec![1; spaces.len()];
        for v in (0..spaces.len().saturating_sub(1)).rev() {
            strides[v] = strides[v + 1] * spaces[v + 1].len();
        }
        Ok(ProfileSpace { spaces, strides, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn voters(&self) -> usize {
        self.spaces.len()
    }

    pub fn report_space(&self, voter: VoterId) -> &[ReportedType] {
        &self.spaces[voter.index()]
    }

    pub fn stride(&self, voter: VoterId) -> usize {
        self.strides[voter.index()]
    }

    /// Which entry of `voter`'s report space profile `index` uses.
    pub fn coordinate(&self, index: usize, voter: VoterId) -> usize {
        index / self.strides[voter.index()] % self.spaces[voter.index()].len()
    }

    /// Index of the profile that differs from `index` only in `voter`'s report.
    pub fn replace(&self, index: usize, voter: VoterId, coordinate: usize) -> usize {
        let stride = self.strides[voter.index()];
        let current = self.coordinate(index, voter);
        index - current * stride + coordinate * stride
    }

    pub fn profile(&self, index: usize) -> Profile {
        Profile(
            self.spaces
                .iter()
                .enumerate()
                .map(|(v, space)| space[self.coordinate(index, VoterId(v))])
                .collect(),
        )
    }

    pub fn index_of(&self, profile: &Profile) -> Option<usize> {
        let mut index = 0;
        for (v, space) in self.spaces.iter().enumerate() {
            let coordinate = space.iter().position(|r| r == profile.get(VoterId(v)))?;
            index += coordinate * self.strides[v];
        }
        Some(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = Profile> + '_ {
        (0..self.len).map(|i| self.profile(i))
    }
}

/// Every joint report profile allowed by `filters`, in lexicographic order.
pub fn enumerate_profiles(
    instance: &Instance,
    filters: &Filters,
    budget: usize,
) -> Result<impl Iterator<Item = Profile>, EnumerationError> {
    let space = ProfileSpace::new(instance, filters, budget)?;
    Ok((0..space.len()).map(move |i| space.profile(i)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnonymityVariant {
    /// Permutations among all participants.
    Full,
    /// Within `N_S(k)`.
    ByStructure,
    /// Within `N_D(d)`.
    ByDepth,
    /// Within `N_S(k) ∩ N_D(d)`.
    ByStructureDepth,
}

impl AnonymityVariant {
    pub const ALL: [AnonymityVariant; 4] = [
        AnonymityVariant::Full,
        AnonymityVariant::ByStructure,
        AnonymityVariant::ByDepth,
        AnonymityVariant::ByStructureDepth,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKey {
    All,
    Structure { children: usize },
    Depth { depth: u32 },
    StructureDepth { children: usize, depth: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationClass {
    pub key: ClassKey,
    pub members: VoterSet,
}

/// Partition of the participants into the classes a variant permutes within.
pub fn permutation_classes(observation: &Observation<'_>, variant: AnonymityVariant) -> Vec<PermutationClass> {
    let mut classes: Vec<PermutationClass> = Vec::new();
    for voter in observation.participants().iter() {
        let depth = observation.depth(voter).expect("participant");
        let children = observation.invited_count(voter);
        let key = match variant {
            AnonymityVariant::Full => ClassKey::All,
            AnonymityVariant::ByStructure => ClassKey::Structure { children },
            AnonymityVariant::ByDepth => ClassKey::Depth { depth },
            AnonymityVariant::ByStructureDepth => ClassKey::StructureDepth { children, depth },
        };
        match classes.iter_mut().find(|c| c.key == key) {
            Some(class) => class.members.insert(voter),
            None => classes.push(PermutationClass {
                key,
                members: VoterSet::singleton(voter),
            }),
        }
    }
    classes.sort_by_key(|c| c.key);
    classes
}

/// All `k!` reassignments of the class members' peaks (identity first).
/// Invitations are never touched.
pub fn peak_permutations<'a>(profile: &'a Profile, class: &PermutationClass) -> impl Iterator<Item = Profile> + 'a {
    let members: Vec<VoterId> = class.members.iter().collect();
    let k = members.len();
    (0..k).permutations(k).map(move |order| {
        let mut permuted = profile.clone();
        for (slot, source) in order.iter().enumerate() {
            let mut report = *profile.get(members[slot]);
            report.peak = profile.get(members[*source]).peak;
            permuted.set(members[slot], report);
        }
        permuted
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationMode {
    /// Any legal report: misreport the peak and/or withhold invitations.
    Full,
    /// True peak kept, only invitations vary.
    DiffusionOnly,
}

/// `profile` with `voter`'s report replaced by each alternative from its
/// (full or diffusion-only) report space.
pub fn deviation_neighborhood<'a>(
    instance: &Instance,
    profile: &'a Profile,
    voter: VoterId,
    mode: DeviationMode,
) -> Result<impl Iterator<Item = Profile> + 'a, EnumerationError> {
    if voter.index() >= instance.graph().len() {
        return Err(ModelError::Report(format!("unknown voter id {}", voter.index())).into());
    }
    let space = report_space(
        instance.true_type(voter),
        instance.grid(),
        mode == DeviationMode::DiffusionOnly,
    )?;
    Ok(space.into_iter().map(move |report| profile.with(voter, report)))
}
