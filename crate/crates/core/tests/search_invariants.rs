mod common;

use flgame_core::cspsearch::{
    encode, solve, tabulate, verify_model, CspError, CspResult, CspVerdict, EncodeOptions, SolveOptions,
};
use flgame_core::enumeration::DEFAULT_BUDGET;
use flgame_core::gen::small_family;
use flgame_core::model::{Grid, Instance};
use flgame_core::properties::{check_all, CheckOptions, Property};
use flgame_core::scf::{AllParticipantsMedian, DepthWeightedMedian, DirectChildrenMedian, SocialChoiceFunction};
use proptest::prelude::*;

use common::random_instance;

const POOL: [Property; 8] = [
    Property::Sp,
    Property::Pe,
    Property::An,
    Property::AnS,
    Property::AnD,
    Property::AnSd,
    Property::Vr(1),
    Property::Vr(2),
];

fn subset(mask: u8) -> Vec<Property> {
    POOL.iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, p)| *p)
        .collect()
}

fn run(instance: &Instance, properties: &[Property], hull: bool, seed: Option<u64>) -> Option<CspResult> {
    let encode_options = EncodeOptions {
        depth1_hull: hull,
        ..EncodeOptions::default()
    };
    let csp = encode(instance, properties, &encode_options).unwrap();
    let options = SolveOptions {
        seed,
        node_limit: Some(200_000),
        ..SolveOptions::default()
    };
    match solve(&csp, &options) {
        Ok(result) => {
            if let Some(model) = result.model_scf(&csp, "model") {
                for report in verify_model(instance, &model, properties).unwrap() {
                    assert!(report.passed(), "{}", report.to_json());
                }
            }
            Some(result)
        }
        Err(CspError::Inconclusive { .. }) => None,
        Err(other) => panic!("{other}"),
    }
}

fn small() -> impl Strategy<Value = Instance> {
    (any::<u64>(), 1usize..=3).prop_map(|(seed, n)| random_instance(seed, n, 3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn models_verify_and_refutations_survive_reordering(instance in small(), mask in any::<u8>()) {
        let properties = subset(mask);
        let Some(base) = run(&instance, &properties, false, None) else { return Ok(()) };
        if base.verdict == CspVerdict::Unsat {
            for seed in 1..=3 {
                if let Some(shuffled) = run(&instance, &properties, false, Some(seed)) {
                    prop_assert_eq!(shuffled.verdict, CspVerdict::Unsat);
                }
            }
        }
    }

    #[test]
    fn more_properties_never_help(instance in small(), mask in any::<u8>(), extra in 0usize..8) {
        let properties = subset(mask);
        let mut more = properties.clone();
        if !more.contains(&POOL[extra]) {
            more.push(POOL[extra]);
        }
        let (Some(fewer), Some(stricter)) = (run(&instance, &properties, false, None), run(&instance, &more, false, None))
        else {
            return Ok(());
        };
        if fewer.verdict == CspVerdict::Unsat {
            prop_assert_eq!(stricter.verdict, CspVerdict::Unsat);
        }
    }

    #[test]
    fn depth_one_hull_is_inert(instance in small(), mask in any::<u8>()) {
        let mut properties = subset(mask);
        for required in [Property::Sp, Property::Pe, Property::AnD] {
            if !properties.contains(&required) {
                properties.push(required);
            }
        }
        let (Some(plain), Some(hulled)) = (run(&instance, &properties, false, None), run(&instance, &properties, true, None))
        else {
            return Ok(());
        };
        prop_assert_eq!(plain.verdict, hulled.verdict);
        prop_assert!(hulled.stats.nodes_explored <= plain.stats.nodes_explored);
    }

    #[test]
    fn tabulated_rules_agree_with_direct_checks(seed in any::<u64>(), n in 1usize..=4) {
        let instance = random_instance(seed, n, 3);
        let properties = [
            Property::Sp,
            Property::Spd,
            Property::Pe,
            Property::An,
            Property::AnS,
            Property::AnD,
            Property::AnSd,
            Property::Vr(1),
            Property::Vr(2),
            Property::Depth1Hull,
        ];
        let rules: [&dyn SocialChoiceFunction; 3] = [&DirectChildrenMedian::new(), &DepthWeightedMedian, &AllParticipantsMedian];
        for rule in rules {
            let table = tabulate(rule, &instance, DEFAULT_BUDGET).unwrap();
            let direct = check_all(rule, &instance, &properties, &CheckOptions::default()).unwrap();
            let tabled = verify_model(&instance, &table, &properties).unwrap();
            for (a, b) in direct.iter().zip(&tabled) {
                prop_assert_eq!(a.verdict, b.verdict, "{} {}", rule.name(), a.property);
            }
        }
    }
}

fn lone_direct_child(instance: &Instance) -> Option<usize> {
    let graph = instance.graph();
    let direct = graph.moderator_children();
    (direct.len() == 1).then(|| graph.children(direct.iter().next().unwrap()).len())
}

/// A lone direct child with exactly one child of its own: inviting that
/// child is then the truthful report, so strategy-proofness and efficiency
/// force the direct child to dictate and the grandchild never matters.
#[test]
fn lone_direct_child_with_one_child_rules_out_relevance_two() {
    let family = small_family(4, 3, &Grid::uniform(3).unwrap());
    let mut refuted = 0;
    for instance in family.iter().filter(|i| lone_direct_child(i) == Some(1)) {
        let result = run(instance, &[Property::Sp, Property::Pe, Property::Vr(2)], false, None).unwrap();
        assert_eq!(result.verdict, CspVerdict::Unsat);
        let relaxed = run(instance, &[Property::Sp, Property::Pe, Property::Vr(1)], false, None).unwrap();
        assert_eq!(relaxed.verdict, CspVerdict::Sat);
        refuted += 1;
    }
    assert!(refuted > 0);
}

/// With two or more grandchildren under a lone direct child, partial
/// invitations leave room for a relevant grandchild, yet the depth-weighted
/// median still lets the direct child dictate.
#[test]
fn lone_direct_child_with_several_children_admits_relevance_two() {
    let family = small_family(4, 3, &Grid::uniform(3).unwrap());
    let mut found = 0;
    for instance in family.iter().filter(|i| lone_direct_child(i).is_some_and(|k| k >= 2)) {
        let result = run(instance, &[Property::Sp, Property::Pe, Property::Vr(2)], false, None).unwrap();
        assert_eq!(result.verdict, CspVerdict::Sat);
        let weighted = check_all(
            &DepthWeightedMedian,
            instance,
            &[Property::Vr(2)],
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(!weighted[0].passed());
        found += 1;
    }
    assert!(found > 0);
}
