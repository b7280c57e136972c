//! Shared vocabulary: exact rationals, voters, invitation trees, reports and
//! preference comparison. All values are immutable once built.

mod graph;
mod instance;
mod participation;
mod preference;
mod rational;

pub use graph::{GraphBuilder, InvitationGraph, Parent, VoterId, VoterSet, MAX_VOTERS};
pub use instance::{report_space, Grid, Instance, Profile, ReportedType, TrueType, MAX_GRID_POINTS};
pub use participation::{participating_voters, Observation};
pub use preference::{compare, PreferenceModel, PreferenceVerdict};
pub use rational::{q, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid rational {0}")]
    Rational(String),
    #[error("malformed invitation graph: {0}")]
    Structure(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("illegal report: {0}")]
    Report(String),
    #[error("voter {0} does not participate")]
    NotParticipating(String),
}
