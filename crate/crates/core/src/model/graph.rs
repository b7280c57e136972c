use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ModelError;

/// Upper bound on potential voters; [`VoterSet`] is a 64-bit mask.
pub const MAX_VOTERS: usize = 64;

/// Index of a potential voter inside one [`InvitationGraph`]. Ids follow the
/// lexicographic order of voter names, so "sorted by id" and "sorted by name"
/// agree. The moderator is not a voter and has no id.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VoterId(pub usize);

impl VoterId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Set of voters as a bitmask. Iteration is in ascending id order and the
/// numeric mask order is the canonical order of subsets.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VoterSet(u64);

impl VoterSet {
    pub const EMPTY: VoterSet = VoterSet(0);

    pub fn from_bits(bits: u64) -> Self {
        VoterSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(voter: VoterId) -> Self {
        VoterSet(1u64 << voter.0)
    }

    pub fn contains(self, voter: VoterId) -> bool {
        self.0 >> voter.0 & 1 == 1
    }

    pub fn insert(&mut self, voter: VoterId) {
        self.0 |= 1u64 << voter.0;
    }

    pub fn remove(&mut self, voter: VoterId) {
        self.0 &= !(1u64 << voter.0);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: VoterSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: VoterSet) -> VoterSet {
        VoterSet(self.0 | other.0)
    }

    pub fn intersection(self, other: VoterSet) -> VoterSet {
        VoterSet(self.0 & other.0)
    }

    pub fn difference(self, other: VoterSet) -> VoterSet {
        VoterSet(self.0 & !other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = VoterId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let low = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(VoterId(low))
        })
    }

    /// All subsets of `self`, ascending by mask.
    pub fn subsets(self) -> impl Iterator<Item = VoterSet> {
        let members: Vec<VoterId> = self.iter().collect();
        (0u64..1u64 << members.len()).map(move |local| {
            let mut set = VoterSet::EMPTY;
            for (bit, voter) in members.iter().enumerate() {
                if local >> bit & 1 == 1 {
                    set.insert(*voter);
                }
            }
            set
        })
    }
}

impl FromIterator<VoterId> for VoterSet {
    fn from_iter<I: IntoIterator<Item = VoterId>>(iter: I) -> Self {
        let mut set = VoterSet::EMPTY;
        for voter in iter {
            set.insert(voter);
        }
        set
    }
}

impl fmt::Debug for VoterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|v| v.0)).finish()
    }
}

/// Who invited a voter in the true network.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Parent {
    Moderator,
    Voter(VoterId),
}

/// The true social network: a directed tree rooted at the moderator.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct InvitationGraph {
    names: Vec<String>,
    moderator_children: VoterSet,
    children: Vec<VoterSet>,
    parents: Vec<Parent>,
    depths: Vec<u32>,
}

impl InvitationGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn voters(&self) -> impl Iterator<Item = VoterId> + '_ {
        (0..self.names.len()).map(VoterId)
    }

    pub fn all_voters(&self) -> VoterSet {
        self.voters().collect()
    }

    pub fn name(&self, voter: VoterId) -> &str {
        &self.names[voter.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<VoterId> {
        self.names
            .binary_search_by(|probe| probe.as_str().cmp(name))
            .ok()
            .map(VoterId)
    }

    pub fn moderator_children(&self) -> VoterSet {
        self.moderator_children
    }

    /// True children `r_i`.
    pub fn children(&self, voter: VoterId) -> VoterSet {
        self.children[voter.0]
    }

    pub fn parent(&self, voter: VoterId) -> Parent {
        self.parents[voter.0]
    }

    /// Distance from the moderator when everybody invites all children.
    pub fn potential_depth(&self, voter: VoterId) -> u32 {
        self.depths[voter.0]
    }

    pub fn max_depth(&self) -> u32 {
        self.depths.iter().copied().max().unwrap_or(0)
    }

    pub fn set_names(&self, set: VoterSet) -> Vec<String> {
        set.iter().map(|v| self.name(v).to_string()).collect()
    }
}

/// Collects parent/child edges by name and validates them into an
/// [`InvitationGraph`].
#[derive(Default, Clone, Debug)]
pub struct GraphBuilder {
    voters: BTreeSet<String>,
    edges: Vec<(Option<String>, String)>,
}

impl GraphBuilder {
    /// Declares a voter without edges of its own (a leaf is fine to omit
    /// once it appears as someone's child).
    pub fn voter(mut self, name: impl Into<String>) -> Self {
        self.voters.insert(name.into());
        self
    }

    pub fn moderator_invites<I, S>(mut self, children: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for child in children {
            let child = child.into();
            self.voters.insert(child.clone());
            self.edges.push((None, child));
        }
        self
    }

    pub fn invites<I, S>(mut self, parent: impl Into<String>, children: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let parent = parent.into();
        self.voters.insert(parent.clone());
        for child in children {
            let child = child.into();
            self.voters.insert(child.clone());
            self.edges.push((Some(parent.clone()), child));
        }
        self
    }

    pub fn build(self) -> Result<InvitationGraph, ModelError> {
        let names: Vec<String> = self.voters.into_iter().collect();
        if names.len() > MAX_VOTERS {
            return Err(ModelError::Structure(format!(
                "{} voters exceeds the limit of {MAX_VOTERS}",
                names.len()
            )));
        }
        if let Some(bad) = names.iter().find(|n| n.is_empty() || n.as_str() == "m") {
            return Err(ModelError::Structure(format!(
                "voter name {bad:?} is reserved or empty"
            )));
        }
        let index: BTreeMap<&str, VoterId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), VoterId(i)))
            .collect();

        let mut moderator_children = VoterSet::EMPTY;
        let mut children = vec![VoterSet::EMPTY; names.len()];
        let mut parents: Vec<Option<Parent>> = vec![None; names.len()];
        for (parent, child) in &self.edges {
            let child_id = index[child.as_str()];
            let parent_ref = match parent {
                None => Parent::Moderator,
                Some(p) => Parent::Voter(index[p.as_str()]),
            };
            if parent_ref == Parent::Voter(child_id) {
                return Err(ModelError::Structure(format!("{child} invites itself")));
            }
            match parents[child_id.0] {
                Some(existing) if existing == parent_ref => continue,
                Some(_) => return Err(ModelError::Structure(format!("{child} has more than one parent"))),
                None => parents[child_id.0] = Some(parent_ref),
            }
            match parent_ref {
                Parent::Moderator => moderator_children.insert(child_id),
                Parent::Voter(p) => children[p.0].insert(child_id),
            }
        }
        if moderator_children.is_empty() {
            return Err(ModelError::Degenerate("the moderator has no direct children".into()));
        }

        // Breadth-first from the moderator; anything unreached is orphaned or on a cycle.
        let mut depths = vec![0u32; names.len()];
        let mut frontier: Vec<VoterId> = moderator_children.iter().collect();
        let mut level = 1;
        let mut reached = VoterSet::EMPTY;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for voter in frontier {
                reached.insert(voter);
                depths[voter.0] = level;
                next.extend(children[voter.0].iter());
            }
            frontier = next;
            level += 1;
        }
        if let Some(orphan) = (0..names.len()).map(VoterId).find(|v| !reached.contains(*v)) {
            let reason = if parents[orphan.0].is_some() {
                "lies on a cycle"
            } else {
                "has no parent"
            };
            return Err(ModelError::Structure(format!(
                "{} {reason}; the network must be a tree rooted at the moderator",
                names[orphan.0]
            )));
        }

        Ok(InvitationGraph {
            names,
            moderator_children,
            children,
            parents: parents.into_iter().map(|p| p.expect("reached")).collect(),
            depths,
        })
    }
}
