mod common;

use std::cmp::Ordering;

use flgame_core::model::{
    compare, participating_voters, report_space, Parent, PreferenceModel, PreferenceVerdict, Rational, VoterSet,
};
use proptest::prelude::*;

use common::instance_and_profile;

fn rational() -> impl Strategy<Value = Rational> {
    (0i64..=24).prop_map(|k| flgame_core::model::q(k, 24))
}

fn model() -> impl Strategy<Value = PreferenceModel> {
    prop_oneof![Just(PreferenceModel::Symmetric), Just(PreferenceModel::Robust)]
}

proptest! {
    #[test]
    fn participation_is_closed_under_reported_parenthood((instance, profile) in instance_and_profile(5)) {
        let graph = instance.graph();
        let participants = participating_voters(graph, &profile).unwrap();
        prop_assert!(graph.moderator_children().is_subset(participants));
        for voter in participants.iter() {
            if let Parent::Voter(parent) = graph.parent(voter) {
                prop_assert!(participants.contains(parent));
                prop_assert!(profile.get(parent).invited.contains(voter));
            }
        }
    }

    #[test]
    fn dropping_an_invitation_never_adds_participants(
        (instance, profile) in instance_and_profile(5),
        pick in any::<usize>(),
    ) {
        let graph = instance.graph();
        let before = participating_voters(graph, &profile).unwrap();
        let inviters: Vec<_> = graph.voters().filter(|v| !profile.get(*v).invited.is_empty()).collect();
        prop_assume!(!inviters.is_empty());
        let voter = inviters[pick % inviters.len()];
        let mut report = *profile.get(voter);
        let dropped: Vec<_> = report.invited.iter().collect();
        report.invited.remove(dropped[(pick / 7) % dropped.len()]);
        let after = participating_voters(graph, &profile.with(voter, report)).unwrap();
        prop_assert!(after.is_subset(before));
    }

    #[test]
    fn compare_is_antisymmetric(peak in rational(), a in rational(), b in rational(), model in model()) {
        prop_assert_eq!(compare(peak, a, a, model), PreferenceVerdict::Indifferent);
        prop_assert_eq!(compare(peak, a, b, model), compare(peak, b, a, model).flip());
    }

    #[test]
    fn symmetric_compare_is_a_total_preorder(peak in rational(), a in rational(), b in rational(), c in rational()) {
        let rank = |x, y| match compare(peak, x, y, PreferenceModel::Symmetric) {
            PreferenceVerdict::Better => Ordering::Less,
            PreferenceVerdict::Worse => Ordering::Greater,
            PreferenceVerdict::Indifferent => Ordering::Equal,
            PreferenceVerdict::Ambiguous => panic!("symmetric distance never abstains"),
        };
        if rank(a, b) != Ordering::Greater && rank(b, c) != Ordering::Greater {
            prop_assert_ne!(rank(a, c), Ordering::Greater);
        }
    }

    #[test]
    fn report_spaces_contain_the_truth((instance, _) in instance_and_profile(5)) {
        for voter in instance.graph().voters() {
            let truth = instance.true_type(voter);
            let full = report_space(truth, instance.grid(), false).unwrap();
            prop_assert!(full.iter().any(|r| r.peak == truth.peak && r.invited == truth.children));
            let diffusion = report_space(truth, instance.grid(), true).unwrap();
            prop_assert!(diffusion.iter().any(|r| r.invited == truth.children));
            prop_assert!(diffusion.iter().all(|r| full.contains(r) && r.peak == truth.peak));
            prop_assert_eq!(diffusion.len(), 1 << truth.children.len());
            prop_assert!(diffusion.iter().any(|r| r.invited == VoterSet::EMPTY));
        }
    }
}
