use rayon::prelude::*;

use super::{
    CheckError, CheckOptions, CheckReport, Property, RelevanceWitness, SoundnessNote, Verdict, Witness,
    REPORT_SCHEMA_VERSION,
};
use crate::enumeration::{
    peak_permutations, permutation_classes, AnonymityVariant, DeviationMode, Filters, ProfileSpace,
};
use crate::io::ProfileRecord;
use crate::model::{compare, Instance, Observation, PreferenceVerdict, Rational, VoterId, VoterSet};
use crate::scf::{ScfError, SocialChoiceFunction};

/// Outcome and participating set of every profile in a space.
struct Table {
    space: ProfileSpace,
    outcomes: Vec<Rational>,
    participants: Vec<VoterSet>,
}

impl Table {
    fn build(
        scf: &dyn SocialChoiceFunction,
        instance: &Instance,
        filters: &Filters,
        budget: usize,
    ) -> Result<Table, CheckError> {
        let space = ProfileSpace::new(instance, filters, budget)?;
        let rows = (0..space.len())
            .into_par_iter()
            .with_min_len(256)
            .map(|index| {
                let profile = space.profile(index);
                let observation = Observation::new_unchecked(instance, &profile);
                Ok((scf.outcome(&observation)?, observation.participants()))
            })
            .collect::<Result<Vec<_>, ScfError>>()?;
        let (outcomes, participants) = rows.into_iter().unzip();
        Ok(Table {
            space,
            outcomes,
            participants,
        })
    }

    fn len(&self) -> usize {
        self.space.len()
    }

    fn record(&self, instance: &Instance, index: usize) -> ProfileRecord {
        ProfileRecord::from_profile(instance.graph(), &self.space.profile(index))
    }
}

fn hull(values: impl Iterator<Item = Rational>) -> (Rational, Rational) {
    values.fold((Rational::ONE, Rational::ZERO), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Runs several checks on one rule and instance, tabulating each profile
/// space at most once.
pub struct Checker<'a> {
    scf: &'a dyn SocialChoiceFunction,
    instance: &'a Instance,
    options: CheckOptions,
    full: Option<Table>,
    truthful_peaks: Option<Table>,
}

impl<'a> Checker<'a> {
    pub fn new(scf: &'a dyn SocialChoiceFunction, instance: &'a Instance, options: CheckOptions) -> Self {
        Checker {
            scf,
            instance,
            options,
            full: None,
            truthful_peaks: None,
        }
    }

    fn full(&mut self) -> Result<&Table, CheckError> {
        if self.full.is_none() {
            self.full = Some(Table::build(
                self.scf,
                self.instance,
                &Filters::none(),
                self.options.budget,
            )?);
        }
        Ok(self.full.as_ref().expect("just built"))
    }

    fn truthful_peaks(&mut self) -> Result<&Table, CheckError> {
        if self.truthful_peaks.is_none() {
            self.truthful_peaks = Some(Table::build(
                self.scf,
                self.instance,
                &Filters::diffusion_only(),
                self.options.budget,
            )?);
        }
        Ok(self.truthful_peaks.as_ref().expect("just built"))
    }

    fn report(&self, property: Property, witness: Option<Witness>, examined: usize) -> CheckReport {
        let (verdict, soundness_note) = match witness {
            Some(_) => (Verdict::Fail, SoundnessNote::ExactOnGrid),
            None => (Verdict::Pass, SoundnessNote::PassIsGridRelative),
        };
        CheckReport {
            schema_version: REPORT_SCHEMA_VERSION,
            property,
            scf: self.scf.name(),
            verdict,
            mode: None,
            witness,
            relevance_witnesses: Vec::new(),
            profiles_examined: examined as u64,
            soundness_note,
        }
    }

    pub fn check(&mut self, property: Property) -> Result<CheckReport, CheckError> {
        match property {
            Property::Sp => self.sp(DeviationMode::Full),
            Property::Spd => self.sp(DeviationMode::DiffusionOnly),
            Property::Pe => self.pareto(),
            Property::Onto => self.ontoness(),
            Property::Vr(d) => self.voter_relevance(d),
            Property::Depth1Hull => self.depth1_hull(),
            p => self.anonymity(p.anonymity_variant().expect("anonymity property")),
        }
    }

    /// Every participating voter whose report invites all of its children is
    /// treated as truthful with its reported peak as the true one, so true
    /// peaks range over the whole grid.
    pub fn sp(&mut self, mode: DeviationMode) -> Result<CheckReport, CheckError> {
        let instance = self.instance;
        let model = instance.preference_model();
        let strict = self.options.ambiguous_is_violation;
        let table = self.full()?;
        let space = &table.space;
        let graph = instance.graph();
        let violation = (0..table.len()).into_par_iter().find_map_first(|index| {
            let here = table.outcomes[index];
            for voter in table.participants[index].iter() {
                let coordinate = space.coordinate(index, voter);
                let reports = space.report_space(voter);
                let truthful = reports[coordinate];
                if truthful.invited != graph.children(voter) {
                    continue;
                }
                for (alternative, report) in reports.iter().enumerate() {
                    if alternative == coordinate
                        || (mode == DeviationMode::DiffusionOnly && report.peak != truthful.peak)
                    {
                        continue;
                    }
                    let deviated = space.replace(index, voter, alternative);
                    let verdict = compare(truthful.peak, here, table.outcomes[deviated], model);
                    if verdict == PreferenceVerdict::Worse || (strict && verdict == PreferenceVerdict::Ambiguous) {
                        return Some((voter, truthful.peak, index, deviated, verdict));
                    }
                }
            }
            None
        });
        let witness = violation.map(|(voter, peak, index, deviated, preference)| Witness::Deviation {
            voter: graph.name(voter).to_string(),
            true_peak: peak,
            truthful: table.record(instance, index),
            deviation: table.record(instance, deviated),
            truthful_outcome: table.outcomes[index],
            deviation_outcome: table.outcomes[deviated],
            preference,
        });
        let examined = table.len();
        let property = match mode {
            DeviationMode::Full => Property::Sp,
            DeviationMode::DiffusionOnly => Property::Spd,
        };
        let mut report = self.report(property, witness, examined);
        report.mode = Some(mode);
        Ok(report)
    }

    /// Peaks pinned to the instance's true peaks; invitations vary.
    pub fn pareto(&mut self) -> Result<CheckReport, CheckError> {
        let instance = self.instance;
        let table = self.truthful_peaks()?;
        let violation = (0..table.len()).into_par_iter().find_map_first(|index| {
            let participants = table.participants[index];
            let (low, high) = hull(participants.iter().map(|v| instance.true_peak(v)));
            let outcome = table.outcomes[index];
            (outcome < low || outcome > high).then_some((index, low, high))
        });
        let witness = violation.map(|(index, low, high)| Witness::OffHull {
            profile: table.record(instance, index),
            outcome: table.outcomes[index],
            low,
            high,
            hull_voters: instance.graph().set_names(table.participants[index]),
        });
        let examined = table.len();
        Ok(self.report(Property::Pe, witness, examined))
    }

    pub fn ontoness(&mut self) -> Result<CheckReport, CheckError> {
        let instance = self.instance;
        let table = self.full()?;
        let grid = instance.grid();
        let mut hit = vec![false; grid.len()];
        for outcome in &table.outcomes {
            if let Some(i) = grid.index_of(*outcome) {
                hit[i] = true;
            }
        }
        let examined = table.len();
        let witness = hit
            .iter()
            .position(|h| !h)
            .map(|i| Witness::Unreached { point: grid[i] });
        let mut report = self.report(Property::Onto, witness, examined);
        if report.verdict == Verdict::Fail {
            report.soundness_note = SoundnessNote::NoWitnessOnGrid;
        }
        Ok(report)
    }

    pub fn anonymity(&mut self, variant: AnonymityVariant) -> Result<CheckReport, CheckError> {
        let instance = self.instance;
        let table = self.full()?;
        let space = &table.space;
        let violation = (0..table.len()).into_par_iter().find_map_first(|index| {
            let profile = space.profile(index);
            let observation = Observation::new_unchecked(instance, &profile);
            for class in permutation_classes(&observation, variant) {
                if class.members.len() < 2 {
                    continue;
                }
                for permuted in peak_permutations(&profile, &class).skip(1) {
                    if permuted == profile {
                        continue;
                    }
                    let other = space.index_of(&permuted).expect("permutations stay in the space");
                    if table.outcomes[other] != table.outcomes[index] {
                        return Some((class.key, index, other));
                    }
                }
            }
            None
        });
        let witness = violation.map(|(class, index, other)| Witness::Permutation {
            class,
            profile: table.record(instance, index),
            permuted: table.record(instance, other),
            outcome: table.outcomes[index],
            permuted_outcome: table.outcomes[other],
        });
        let examined = table.len();
        Ok(self.report(Property::for_variant(variant), witness, examined))
    }

    /// Voters whose depth under full invitation is `1..=d` must be able to
    /// move the outcome. A voter's report space depends only on its
    /// children, so one witness pair serves every true peak.
    pub fn voter_relevance(&mut self, d: u32) -> Result<CheckReport, CheckError> {
        let instance = self.instance;
        let graph = instance.graph();
        let table = self.full()?;
        let space = &table.space;
        let mut relevance = Vec::new();
        let mut missing = None;
        for voter in graph.voters().filter(|v| (1..=d).contains(&graph.potential_depth(*v))) {
            match relevance_pair(table, voter) {
                Some((first, second)) => {
                    let first_record = table.record(instance, first);
                    let second_record = table.record(instance, second);
                    for peak in instance.grid().points() {
                        relevance.push(RelevanceWitness {
                            voter: graph.name(voter).to_string(),
                            true_peak: *peak,
                            first: first_record.clone(),
                            second: second_record.clone(),
                            first_outcome: table.outcomes[first],
                            second_outcome: table.outcomes[second],
                        });
                    }
                }
                None => {
                    missing = Some(voter);
                    break;
                }
            }
        }
        let examined = space.len();
        let witness = missing.map(|voter| Witness::Irrelevant {
            voter: graph.name(voter).to_string(),
            true_peak: instance.grid()[0],
        });
        let mut report = self.report(Property::Vr(d), witness, examined);
        if report.verdict == Verdict::Pass {
            report.relevance_witnesses = relevance;
            report.soundness_note = SoundnessNote::ExactOnGrid;
        } else {
            report.soundness_note = SoundnessNote::NoWitnessOnGrid;
        }
        Ok(report)
    }

    pub fn depth1_hull(&mut self) -> Result<CheckReport, CheckError> {
        let instance = self.instance;
        let direct = instance.graph().moderator_children();
        let table = self.full()?;
        let space = &table.space;
        let violation = (0..table.len()).into_par_iter().find_map_first(|index| {
            let (low, high) = hull(
                direct
                    .iter()
                    .map(|v| space.report_space(v)[space.coordinate(index, v)].peak),
            );
            let outcome = table.outcomes[index];
            (outcome < low || outcome > high).then_some((index, low, high))
        });
        let witness = violation.map(|(index, low, high)| Witness::OffHull {
            profile: table.record(instance, index),
            outcome: table.outcomes[index],
            low,
            high,
            hull_voters: instance.graph().set_names(direct),
        });
        let examined = table.len();
        Ok(self.report(Property::Depth1Hull, witness, examined))
    }
}

/// First profile (with `voter` at its first report and participating) from
/// which some other report of `voter` changes the outcome.
fn relevance_pair(table: &Table, voter: VoterId) -> Option<(usize, usize)> {
    let space = &table.space;
    let reports = space.report_space(voter).len();
    (0..table.len()).into_par_iter().find_map_first(|index| {
        if space.coordinate(index, voter) != 0 || !table.participants[index].contains(voter) {
            return None;
        }
        (1..reports)
            .map(|c| space.replace(index, voter, c))
            .find(|other| table.outcomes[*other] != table.outcomes[index])
            .map(|other| (index, other))
    })
}

pub fn check_sp(
    scf: &dyn SocialChoiceFunction,
    instance: &Instance,
    mode: DeviationMode,
    options: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    Checker::new(scf, instance, *options).sp(mode)
}

pub fn check_pareto(
    scf: &dyn SocialChoiceFunction,
    instance: &Instance,
    options: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    Checker::new(scf, instance, *options).pareto()
}

pub fn check_ontoness(
    scf: &dyn SocialChoiceFunction,
    instance: &Instance,
    options: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    Checker::new(scf, instance, *options).ontoness()
}

pub fn check_anonymity(
    scf: &dyn SocialChoiceFunction,
    instance: &Instance,
    variant: AnonymityVariant,
    options: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    Checker::new(scf, instance, *options).anonymity(variant)
}

pub fn check_voter_relevance(
    scf: &dyn SocialChoiceFunction,
    instance: &Instance,
    d: u32,
    options: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    Checker::new(scf, instance, *options).voter_relevance(d)
}

pub fn check_depth1_hull(
    scf: &dyn SocialChoiceFunction,
    instance: &Instance,
    options: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    Checker::new(scf, instance, *options).depth1_hull()
}

pub fn check_property(
    scf: &dyn SocialChoiceFunction,
    instance: &Instance,
    property: Property,
    options: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    Checker::new(scf, instance, *options).check(property)
}

pub fn check_all(
    scf: &dyn SocialChoiceFunction,
    instance: &Instance,
    properties: &[Property],
    options: &CheckOptions,
) -> Result<Vec<CheckReport>, CheckError> {
    let mut checker = Checker::new(scf, instance, *options);
    properties.iter().map(|p| checker.check(*p)).collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::{q, Grid, InvitationGraph, PreferenceModel};
    use crate::scf::{AllParticipantsMedian, DepthWeightedMedian, DirectChildrenMedian, FixedOutcome};

    fn build(builder: crate::model::GraphBuilder, peaks: &[(&str, Rational)], grid: usize) -> Instance {
        let graph = builder.build().unwrap();
        let by_name: BTreeMap<&str, Rational> = peaks.iter().copied().collect();
        let true_peaks = graph.names().iter().map(|n| by_name[n.as_str()]).collect();
        Instance::new(
            graph,
            true_peaks,
            Grid::uniform(grid).unwrap(),
            PreferenceModel::Symmetric,
        )
        .unwrap()
    }

    fn four_voters_grid5() -> Instance {
        build(
            InvitationGraph::builder()
                .moderator_invites(["j", "i"])
                .invites("i", ["u", "v"]),
            &[("j", q(1, 4)), ("v", q(1, 2)), ("i", q(1, 2)), ("u", q(1, 1))],
            5,
        )
    }

    fn opts() -> CheckOptions {
        CheckOptions::default()
    }

    #[test]
    fn direct_median_passes_its_properties() {
        let inst = four_voters_grid5();
        let scf = DirectChildrenMedian::new();
        for p in [
            Property::Sp,
            Property::Pe,
            Property::AnD,
            Property::Vr(1),
            Property::Onto,
            Property::Depth1Hull,
        ] {
            let report = check_property(&scf, &inst, p, &opts()).unwrap();
            assert!(report.passed(), "{p}: {}", report.to_json());
        }
        assert!(!check_voter_relevance(&scf, &inst, 2, &opts()).unwrap().passed());
    }

    #[test]
    fn depth_weighted_fails_depth_anonymity() {
        let inst = four_voters_grid5();
        let report = check_anonymity(&DepthWeightedMedian, &inst, AnonymityVariant::ByDepth, &opts()).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.replay(&DepthWeightedMedian, &inst).unwrap());
        let report = check_anonymity(&DepthWeightedMedian, &inst, AnonymityVariant::ByStructureDepth, &opts()).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn all_median_invites_exclusion() {
        let inst = build(
            InvitationGraph::builder().moderator_invites(["i"]).invites("i", ["j"]),
            &[("i", q(0, 1)), ("j", q(1, 1))],
            3,
        );
        let report = check_sp(&AllParticipantsMedian, &inst, DeviationMode::Full, &opts()).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.replay(&AllParticipantsMedian, &inst).unwrap());
        let Some(Witness::Deviation { voter, .. }) = &report.witness else {
            panic!("{report:?}")
        };
        assert_eq!(voter, "i");
    }

    #[test]
    fn fixed_outcome_negative_controls() {
        let inst = build(
            InvitationGraph::builder().moderator_invites(["a", "b"]),
            &[("a", q(0, 1)), ("b", q(0, 1))],
            3,
        );
        let scf = FixedOutcome::new(q(1, 2)).unwrap();
        let pe = check_pareto(&scf, &inst, &opts()).unwrap();
        let Some(Witness::OffHull { low, high, outcome, .. }) = pe.witness.clone() else {
            panic!()
        };
        assert_eq!((low, high, outcome), (q(0, 1), q(0, 1), q(1, 2)));
        assert!(pe.replay(&scf, &inst).unwrap());
        let onto = check_ontoness(&scf, &inst, &opts()).unwrap();
        assert_eq!(onto.witness, Some(Witness::Unreached { point: q(0, 1) }));
        assert!(check_sp(&scf, &inst, DeviationMode::Full, &opts()).unwrap().passed());
    }

    #[test]
    fn depth_weighted_ignores_depth_three() {
        let inst = build(
            InvitationGraph::builder()
                .moderator_invites(["i", "k"])
                .invites("i", ["j"])
                .invites("j", ["u"]),
            &[("i", q(0, 1)), ("j", q(0, 1)), ("k", q(0, 1)), ("u", q(0, 1))],
            3,
        );
        let vr2 = check_voter_relevance(&DepthWeightedMedian, &inst, 2, &opts()).unwrap();
        assert!(vr2.passed());
        assert_eq!(vr2.relevance_witnesses.len(), 3 * 3);
        assert!(vr2.replay(&DepthWeightedMedian, &inst).unwrap());
        let vr3 = check_voter_relevance(&DepthWeightedMedian, &inst, 3, &opts()).unwrap();
        assert_eq!(
            vr3.witness,
            Some(Witness::Irrelevant {
                voter: "u".into(),
                true_peak: q(0, 1)
            })
        );
        assert_eq!(vr3.soundness_note, SoundnessNote::NoWitnessOnGrid);
    }

    #[test]
    fn all_median_leaves_the_direct_hull() {
        let inst = build(
            InvitationGraph::builder()
                .moderator_invites(["a"])
                .invites("a", ["b"])
                .invites("b", ["c"]),
            &[("a", q(0, 1)), ("b", q(0, 1)), ("c", q(0, 1))],
            3,
        );
        let report = check_depth1_hull(&AllParticipantsMedian, &inst, &opts()).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.replay(&AllParticipantsMedian, &inst).unwrap());
    }

    #[test]
    fn report_json_round_trips() {
        let inst = four_voters_grid5();
        let report = check_anonymity(&DepthWeightedMedian, &inst, AnonymityVariant::ByDepth, &opts()).unwrap();
        let back: CheckReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
        assert!(report.to_json().contains("\"property\": \"AND\""));
    }

    #[test]
    fn budget_is_enforced() {
        let inst = four_voters_grid5();
        let tight = CheckOptions {
            budget: 10,
            ..CheckOptions::default()
        };
        let err = check_sp(&DepthWeightedMedian, &inst, DeviationMode::Full, &tight).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn robust_model_is_stricter() {
        let graph = InvitationGraph::builder()
            .moderator_invites(["a", "b", "c"])
            .build()
            .unwrap();
        let grid = Grid::uniform(3).unwrap();
        let symmetric = Instance::new(graph, vec![q(0, 1); 3], grid, PreferenceModel::Symmetric).unwrap();
        let robust = symmetric.clone().with_preference_model(PreferenceModel::Robust);
        let scf = DirectChildrenMedian::new();
        assert!(check_sp(&scf, &symmetric, DeviationMode::Full, &opts())
            .unwrap()
            .passed());
        assert!(check_sp(&scf, &robust, DeviationMode::Full, &opts()).unwrap().passed());
    }
}
