use std::ops::Index;

use serde::Serialize;

use super::{InvitationGraph, ModelError, PreferenceModel, Rational, VoterId, VoterSet};

/// Largest grid the bitmask-based search supports.
pub const MAX_GRID_POINTS: usize = 64;

/// Allowed peak and outcome values: strictly increasing, from 0 to 1 inclusive.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(transparent)]
pub struct Grid(Vec<Rational>);

impl Grid {
    pub fn new(points: Vec<Rational>) -> Result<Self, ModelError> {
        if points.len() < 2 || points.len() > MAX_GRID_POINTS {
            return Err(ModelError::Instance(format!(
                "grid needs between 2 and {MAX_GRID_POINTS} points, got {}",
                points.len()
            )));
        }
        if points.first() != Some(&Rational::ZERO) || points.last() != Some(&Rational::ONE) {
            return Err(ModelError::Instance("grid must start at 0 and end at 1".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::Instance("grid must be strictly increasing".into()));
        }
        Ok(Grid(points))
    }

    /// `{0, 1/(n-1), ..., 1}`.
    pub fn uniform(points: usize) -> Result<Self, ModelError> {
        if points < 2 {
            return Err(ModelError::Instance("grid needs at least 2 points".into()));
        }
        let last = points as i64 - 1;
        Grid::new((0..=last).map(|k| Rational::new(k, last).expect("positive")).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn points(&self) -> &[Rational] {
        &self.0
    }

    pub fn index_of(&self, value: Rational) -> Option<usize> {
        self.0.binary_search(&value).ok()
    }

    pub fn contains(&self, value: Rational) -> bool {
        self.index_of(value).is_some()
    }
}

impl Index<usize> for Grid {
    type Output = Rational;
    fn index(&self, index: usize) -> &Rational {
        &self.0[index]
    }
}

/// `θ_i`: a peak together with the true children.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TrueType {
    pub peak: Rational,
    pub children: VoterSet,
}

/// `θ'_i`: a reported peak and the subset of children actually invited.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct ReportedType {
    pub peak: Rational,
    pub invited: VoterSet,
}

/// One report per potential voter, indexed by [`VoterId`].
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Profile(pub Vec<ReportedType>);

impl Profile {
    pub fn get(&self, voter: VoterId) -> &ReportedType {
        &self.0[voter.0]
    }

    pub fn set(&mut self, voter: VoterId, report: ReportedType) {
        self.0[voter.0] = report;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn with(&self, voter: VoterId, report: ReportedType) -> Profile {
        let mut next = self.clone();
        next.set(voter, report);
        next
    }
}

/// A finite game: network, true peaks, grid and preference reading.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Instance {
    graph: InvitationGraph,
    true_peaks: Vec<Rational>,
    grid: Grid,
    preference_model: PreferenceModel,
}

impl Instance {
    pub fn new(
        graph: InvitationGraph,
        true_peaks: Vec<Rational>,
        grid: Grid,
        preference_model: PreferenceModel,
    ) -> Result<Self, ModelError> {
        if true_peaks.len() != graph.len() {
            return Err(ModelError::Instance(format!(
                "{} peaks for {} voters",
                true_peaks.len(),
                graph.len()
            )));
        }
        for (voter, peak) in graph.voters().zip(&true_peaks) {
            if !grid.contains(*peak) {
                return Err(ModelError::Instance(format!(
                    "peaks.{}: {peak} is not on the grid",
                    graph.name(voter)
                )));
            }
        }
        Ok(Instance {
            graph,
            true_peaks,
            grid,
            preference_model,
        })
    }

    pub fn graph(&self) -> &InvitationGraph {
        &self.graph
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn preference_model(&self) -> PreferenceModel {
        self.preference_model
    }

    pub fn with_preference_model(mut self, model: PreferenceModel) -> Self {
        self.preference_model = model;
        self
    }

    pub fn true_peak(&self, voter: VoterId) -> Rational {
        self.true_peaks[voter.0]
    }

    pub fn true_peaks(&self) -> &[Rational] {
        &self.true_peaks
    }

    pub fn true_type(&self, voter: VoterId) -> TrueType {
        TrueType {
            peak: self.true_peaks[voter.0],
            children: self.graph.children(voter),
        }
    }

    /// Everybody reports the true peak and invites every child.
    pub fn truthful_profile(&self) -> Profile {
        Profile(
            self.graph
                .voters()
                .map(|v| ReportedType {
                    peak: self.true_peak(v),
                    invited: self.graph.children(v),
                })
                .collect(),
        )
    }

    /// Rejects reports that are off-grid or invite someone who is not a true child.
    pub fn validate_profile(&self, profile: &Profile) -> Result<(), ModelError> {
        if profile.len() != self.graph.len() {
            return Err(ModelError::Report(format!(
                "profile has {} reports for {} voters",
                profile.len(),
                self.graph.len()
            )));
        }
        for voter in self.graph.voters() {
            let report = profile.get(voter);
            if !report.invited.is_subset(self.graph.children(voter)) {
                return Err(ModelError::Report(format!(
                    "{} invites someone who is not its child",
                    self.graph.name(voter)
                )));
            }
            if !report.peak.in_unit_interval() {
                return Err(ModelError::Report(format!(
                    "{} reports peak {} outside [0, 1]",
                    self.graph.name(voter),
                    report.peak
                )));
            }
        }
        Ok(())
    }
}

/// `R(θ_i)`: every grid peak combined with every subset of the true
/// children, ordered by peak and then by subset mask. With
/// `diffusion_only` the peak is pinned to the true one.
pub fn report_space(true_type: TrueType, grid: &Grid, diffusion_only: bool) -> Result<Vec<ReportedType>, ModelError> {
    if !grid.contains(true_type.peak) {
        return Err(ModelError::Instance(format!(
            "true peak {} is not on the grid",
            true_type.peak
        )));
    }
    let peaks: Vec<Rational> = if diffusion_only {
        vec![true_type.peak]
    } else {
        grid.points().to_vec()
    };
    Ok(peaks
        .into_iter()
        .flat_map(|peak| {
            true_type
                .children
                .subsets()
                .map(move |invited| ReportedType { peak, invited })
        })
        .collect())
}
