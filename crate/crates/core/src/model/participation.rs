use super::{Instance, InvitationGraph, ModelError, Profile, Rational, ReportedType, VoterId, VoterSet};

/// `N̂(θ')`: voters reachable from the moderator along reported invitations.
/// Direct children of the moderator always participate.
pub fn participating_voters(graph: &InvitationGraph, profile: &Profile) -> Result<VoterSet, ModelError> {
    check_shape(graph, profile)?;
    Ok(reach(graph, profile).0)
}

fn check_shape(graph: &InvitationGraph, profile: &Profile) -> Result<(), ModelError> {
    if profile.len() != graph.len() {
        return Err(ModelError::Report(format!(
            "profile has {} reports for {} voters",
            profile.len(),
            graph.len()
        )));
    }
    for voter in graph.voters() {
        if !profile.get(voter).invited.is_subset(graph.children(voter)) {
            return Err(ModelError::Report(format!(
                "{} invites someone who is not its child",
                graph.name(voter)
            )));
        }
    }
    Ok(())
}

fn reach(graph: &InvitationGraph, profile: &Profile) -> (VoterSet, Vec<u32>) {
    let mut depths = vec![0u32; graph.len()];
    let mut participants = VoterSet::EMPTY;
    let mut frontier = graph.moderator_children();
    let mut level = 1;
    while !frontier.is_empty() {
        let mut next = VoterSet::EMPTY;
        for voter in frontier.iter() {
            participants.insert(voter);
            depths[voter.index()] = level;
            next = next.union(profile.get(voter).invited);
        }
        frontier = next.difference(participants);
        level += 1;
    }
    (participants, depths)
}

/// Everything a rule is allowed to look at: who participates, at which
/// reported depth, and what they reported.
#[derive(Clone, Debug)]
pub struct Observation<'a> {
    instance: &'a Instance,
    profile: &'a Profile,
    participants: VoterSet,
    depths: Vec<u32>,
}

impl<'a> Observation<'a> {
    pub fn new(instance: &'a Instance, profile: &'a Profile) -> Result<Self, ModelError> {
        instance.validate_profile(profile)?;
        Ok(Self::new_unchecked(instance, profile))
    }

    /// For profiles produced by enumeration, which are legal by construction.
    pub(crate) fn new_unchecked(instance: &'a Instance, profile: &'a Profile) -> Self {
        let (participants, depths) = reach(instance.graph(), profile);
        Observation {
            instance,
            profile,
            participants,
            depths,
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn profile(&self) -> &'a Profile {
        self.profile
    }

    pub fn participants(&self) -> VoterSet {
        self.participants
    }

    pub fn participates(&self, voter: VoterId) -> bool {
        self.participants.contains(voter)
    }

    /// Number of reported edges on the path from the moderator.
    pub fn depth(&self, voter: VoterId) -> Result<u32, ModelError> {
        if self.participates(voter) {
            Ok(self.depths[voter.index()])
        } else {
            Err(ModelError::NotParticipating(
                self.instance.graph().name(voter).to_string(),
            ))
        }
    }

    pub fn report(&self, voter: VoterId) -> &'a ReportedType {
        self.profile.get(voter)
    }

    pub fn peak(&self, voter: VoterId) -> Rational {
        self.profile.get(voter).peak
    }

    /// `|r'_i|`, the reported number of invited children.
    pub fn invited_count(&self, voter: VoterId) -> usize {
        self.profile.get(voter).invited.len()
    }

    /// `N_D(d)`.
    pub fn at_depth(&self, depth: u32) -> VoterSet {
        self.participants
            .iter()
            .filter(|v| self.depths[v.index()] == depth)
            .collect()
    }

    /// `N_S(k)`, using reported invitations.
    pub fn with_children(&self, count: usize) -> VoterSet {
        self.participants
            .iter()
            .filter(|v| self.invited_count(*v) == count)
            .collect()
    }

    pub fn max_depth(&self) -> u32 {
        self.participants
            .iter()
            .map(|v| self.depths[v.index()])
            .max()
            .unwrap_or(0)
    }
}
