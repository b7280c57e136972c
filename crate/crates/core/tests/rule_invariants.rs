mod common;

use std::collections::BTreeMap;

use flgame_core::enumeration::{Filters, ProfileSpace, DEFAULT_BUDGET};
use flgame_core::model::{q, Instance, Observation, Parent, Profile, Rational, VoterId};
use flgame_core::scf::{
    evaluate, gmvs_evaluate, AllParticipantsMedian, DepthWeightedMedian, DirectChildrenMedian, GmvsParameters,
    SocialChoiceFunction,
};
use proptest::prelude::*;

use common::instance_and_profile;

/// Depth of every participant, found by walking reported invitations from
/// the moderator without the library's participation code.
fn reported_depths(instance: &Instance, profile: &Profile) -> BTreeMap<VoterId, u32> {
    let graph = instance.graph();
    let mut depths = BTreeMap::new();
    let mut frontier: Vec<VoterId> = graph.moderator_children().iter().collect();
    let mut depth = 1;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for voter in frontier {
            depths.insert(voter, depth);
            next.extend(profile.get(voter).invited.iter());
        }
        frontier = next;
        depth += 1;
    }
    depths
}

/// Copies each peak by its weight, sorts, and takes the `⌈m/2⌉`-th value.
fn expand_and_sort(instance: &Instance, profile: &Profile) -> Rational {
    let depths = reported_depths(instance, profile);
    let mut copies = Vec::new();
    for (voter, depth) in &depths {
        let report = profile.get(*voter);
        let weight = match depth {
            1 => report.invited.len() + 1,
            2 => 1,
            _ => 0,
        };
        copies.extend(std::iter::repeat_n(report.peak, weight));
    }
    copies.sort();
    copies[copies.len().div_ceil(2) - 1]
}

fn anonymous_params(n: usize, raw: &[i64]) -> GmvsParameters {
    let mut alphas: Vec<Rational> = raw.iter().take(n + 1).map(|k| q(*k, 12)).collect();
    alphas.sort();
    alphas[0] = Rational::ZERO;
    alphas[n] = Rational::ONE;
    GmvsParameters::anonymous([(n, alphas)].into()).unwrap()
}

fn peaks_map(peaks: &[Rational]) -> BTreeMap<VoterId, Rational> {
    peaks.iter().enumerate().map(|(i, p)| (VoterId(i), *p)).collect()
}

fn rules() -> Vec<Box<dyn SocialChoiceFunction>> {
    vec![
        Box::new(DirectChildrenMedian::new()),
        Box::new(DepthWeightedMedian),
        Box::new(AllParticipantsMedian),
    ]
}

proptest! {
    #[test]
    fn depth_weighted_matches_expand_and_sort((instance, profile) in instance_and_profile(6)) {
        prop_assert_eq!(evaluate(&DepthWeightedMedian, &instance, &profile).unwrap(), expand_and_sort(&instance, &profile));
    }

    #[test]
    fn depth_one_voters_outweigh_their_children((instance, profile) in instance_and_profile(6)) {
        let observation = Observation::new(&instance, &profile).unwrap();
        let weights = DepthWeightedMedian.weights(&observation).unwrap();
        let direct = observation.at_depth(1);
        for voter in direct.iter() {
            let children: u64 = profile.get(voter).invited.iter().map(|c| weights.0[&c]).sum();
            prop_assert!(weights.0[&voter] > children);
        }
        let outcome = DepthWeightedMedian.outcome(&observation).unwrap();
        let low = direct.iter().map(|v| observation.peak(v)).min().unwrap();
        let high = direct.iter().map(|v| observation.peak(v)).max().unwrap();
        prop_assert!(low <= outcome && outcome <= high);
    }

    #[test]
    fn direct_median_ignores_deeper_reports(
        (instance, profile) in instance_and_profile(6),
        pick in any::<usize>(),
        peak in any::<usize>(),
    ) {
        let graph = instance.graph();
        let deep: Vec<VoterId> = graph.voters().filter(|v| !matches!(graph.parent(*v), Parent::Moderator)).collect();
        prop_assume!(!deep.is_empty());
        let voter = deep[pick % deep.len()];
        let space = flgame_core::model::report_space(instance.true_type(voter), instance.grid(), false).unwrap();
        let changed = profile.with(voter, space[peak % space.len()]);
        let rule = DirectChildrenMedian::new();
        prop_assert_eq!(evaluate(&rule, &instance, &profile).unwrap(), evaluate(&rule, &instance, &changed).unwrap());
    }

    #[test]
    fn outcomes_stay_on_the_grid((instance, profile) in instance_and_profile(6)) {
        for rule in rules() {
            let outcome = evaluate(rule.as_ref(), &instance, &profile).unwrap();
            prop_assert!(instance.grid().contains(outcome), "{} gave {}", rule.name(), outcome);
        }
    }

    #[test]
    fn gmvs_is_monotone_in_every_peak(
        raw_peaks in proptest::collection::vec(0i64..=12, 1..=5),
        raw_alphas in proptest::collection::vec(0i64..=12, 6),
        voter in any::<usize>(),
    ) {
        let n = raw_peaks.len();
        let params = anonymous_params(n, &raw_alphas);
        let mut peaks: Vec<Rational> = raw_peaks.iter().map(|k| q(*k, 12)).collect();
        let who = voter % n;
        let mut previous = None;
        for k in 0..=12 {
            peaks[who] = q(k, 12);
            let outcome = gmvs_evaluate(&params, &peaks_map(&peaks)).unwrap();
            if let Some(before) = previous {
                prop_assert!(before <= outcome);
            }
            previous = Some(outcome);
        }
    }

    #[test]
    fn anonymous_gmvs_ignores_peak_order(
        raw_peaks in proptest::collection::vec(0i64..=12, 1..=5),
        raw_alphas in proptest::collection::vec(0i64..=12, 6),
        shuffle in any::<u64>(),
    ) {
        let n = raw_peaks.len();
        let params = anonymous_params(n, &raw_alphas);
        let peaks: Vec<Rational> = raw_peaks.iter().map(|k| q(*k, 12)).collect();
        let mut permuted = peaks.clone();
        let mut state = shuffle;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            permuted.swap(i, (state >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(
            gmvs_evaluate(&params, &peaks_map(&peaks)).unwrap(),
            gmvs_evaluate(&params, &peaks_map(&permuted)).unwrap()
        );
    }
}

#[test]
fn expand_and_sort_covers_every_profile_of_a_small_instance() {
    let instance = flgame_core::gen::four_voter_instance(Some(5)).unwrap();
    let space = ProfileSpace::new(&instance, &Filters::none(), DEFAULT_BUDGET).unwrap();
    for index in 0..space.len() {
        let profile = space.profile(index);
        assert_eq!(
            evaluate(&DepthWeightedMedian, &instance, &profile).unwrap(),
            expand_and_sort(&instance, &profile)
        );
    }
}
