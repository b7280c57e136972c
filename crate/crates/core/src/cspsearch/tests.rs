use std::collections::BTreeMap;

use super::*;
use crate::model::{q, Grid, InvitationGraph, PreferenceModel};
use crate::scf::{DepthWeightedMedian, DirectChildrenMedian, SocialChoiceFunction};

fn build(builder: crate::model::GraphBuilder, grid: usize) -> Instance {
    let graph = builder.build().unwrap();
    let n = graph.len();
    Instance::new(
        graph,
        vec![q(0, 1); n],
        Grid::uniform(grid).unwrap(),
        PreferenceModel::Symmetric,
    )
    .unwrap()
}

fn chain(grid: usize) -> Instance {
    build(
        InvitationGraph::builder()
            .moderator_invites(["i"])
            .invites("i", ["j"])
            .invites("j", ["u"]),
        grid,
    )
}

fn two_plus_one() -> Instance {
    build(
        InvitationGraph::builder()
            .moderator_invites(["a", "b"])
            .invites("a", ["c"]),
        3,
    )
}

fn run(instance: &Instance, properties: &[Property]) -> CspResult {
    let csp = encode(instance, properties, &EncodeOptions::default()).unwrap();
    solve(&csp, &SolveOptions::default()).unwrap()
}

#[test]
fn chain_structure_anonymity_is_impossible() {
    let inst = chain(3);
    let props = [Property::Sp, Property::Pe, Property::AnS];
    let csp = encode(&inst, &props, &EncodeOptions::default()).unwrap();
    assert!(csp.counts().anon_equality > 0);
    assert!(csp.search_variable_count() < csp.variable_count());
    let result = solve(&csp, &SolveOptions::default()).unwrap();
    assert_eq!(result.verdict, CspVerdict::Unsat);
    assert!(result.certificate.as_deref().unwrap().starts_with("csp-"));
    for seed in [1, 2, 3] {
        let shuffled = SolveOptions {
            seed: Some(seed),
            ..SolveOptions::default()
        };
        assert_eq!(solve(&csp, &shuffled).unwrap().verdict, CspVerdict::Unsat);
    }
}

#[test]
fn pareto_alone_is_trivially_satisfiable() {
    let inst = chain(3);
    let csp = encode(&inst, &[Property::Pe], &EncodeOptions::default()).unwrap();
    assert_eq!(csp.counts().sp_preference, 0);
    assert_eq!(csp.counts().anon_equality, 0);
    let result = solve(&csp, &SolveOptions::default()).unwrap();
    assert!(result.is_sat());
    let model = result.model_scf(&csp, "pe").unwrap();
    assert!(verify_model(&inst, &model, &[Property::Pe]).unwrap()[0].passed());
}

#[test]
fn depth_anonymity_relevance_two_is_impossible_but_one_is_not() {
    let inst = two_plus_one();
    let vr2 = run(&inst, &[Property::Sp, Property::Pe, Property::AnD, Property::Vr(2)]);
    assert_eq!(vr2.verdict, CspVerdict::Unsat);

    let props = [Property::Sp, Property::Pe, Property::AnD, Property::Vr(1)];
    let csp = encode(&inst, &props, &EncodeOptions::default()).unwrap();
    let vr1 = solve(&csp, &SolveOptions::default()).unwrap();
    assert!(vr1.is_sat());
    let model = vr1.model_scf(&csp, "model").unwrap();
    for report in verify_model(&inst, &model, &props).unwrap() {
        assert!(report.passed(), "{}", report.to_json());
    }
}

#[test]
fn depth1_hull_is_implied() {
    for (inst, props) in [
        (chain(3), vec![Property::Sp, Property::Pe, Property::AnD]),
        (
            two_plus_one(),
            vec![Property::Sp, Property::Pe, Property::AnD, Property::Vr(2)],
        ),
        (
            two_plus_one(),
            vec![Property::Sp, Property::Pe, Property::AnD, Property::Vr(1)],
        ),
    ] {
        let plain = run(&inst, &props);
        let csp = encode(
            &inst,
            &props,
            &EncodeOptions {
                depth1_hull: true,
                ..EncodeOptions::default()
            },
        )
        .unwrap();
        let hulled = solve(&csp, &SolveOptions::default()).unwrap();
        assert_eq!(plain.verdict, hulled.verdict);
        assert!(hulled.stats.nodes_explored <= plain.stats.nodes_explored);
    }
}

#[test]
fn ontoness_cannot_be_encoded() {
    let err = encode(&chain(3), &[Property::Onto], &EncodeOptions::default()).unwrap_err();
    assert_eq!(err, CspError::UnsupportedProperty(Property::Onto));
}

#[test]
fn budgets_are_reported() {
    let err = encode(
        &chain(3),
        &[Property::Pe],
        &EncodeOptions {
            variable_budget: 5,
            ..EncodeOptions::default()
        },
    )
    .unwrap_err();
    assert!(err.is_budget());

    let inst = two_plus_one();
    let csp = encode(
        &inst,
        &[Property::Sp, Property::Pe, Property::AnD, Property::Vr(2)],
        &EncodeOptions::default(),
    )
    .unwrap();
    let limited = SolveOptions {
        node_limit: Some(0),
        ..SolveOptions::default()
    };
    match solve(&csp, &limited) {
        Err(CspError::Inconclusive { limit, .. }) => assert_eq!(limit, "node"),
        Ok(result) => assert_eq!(result.stats.nodes_explored, 0, "decided by propagation alone"),
        Err(other) => panic!("{other}"),
    }
}

#[test]
fn tabulated_rules_agree_with_direct_checks() {
    let inst = build(
        InvitationGraph::builder()
            .moderator_invites(["j", "i"])
            .invites("i", ["u"]),
        3,
    );
    let props = [
        Property::Sp,
        Property::Spd,
        Property::Pe,
        Property::AnD,
        Property::AnSd,
        Property::Vr(1),
        Property::Vr(2),
        Property::Depth1Hull,
    ];
    for scf in [
        &DirectChildrenMedian::new() as &dyn SocialChoiceFunction,
        &DepthWeightedMedian,
    ] {
        let table = tabulate(scf, &inst, DEFAULT_BUDGET).unwrap();
        let direct = check_all(scf, &inst, &props, &CheckOptions::default()).unwrap();
        let tabled = verify_model(&inst, &table, &props).unwrap();
        for (a, b) in direct.iter().zip(&tabled) {
            assert_eq!(a.verdict, b.verdict, "{} {}", scf.name(), a.property);
            assert_eq!(a.witness, b.witness);
        }
    }
}

#[test]
fn corrupted_cell_is_caught() {
    let inst = two_plus_one();
    let mut table = tabulate(&DirectChildrenMedian::new(), &inst, DEFAULT_BUDGET).unwrap();
    let truthful = inst.truthful_profile();
    let observation = Observation::new(&inst, &truthful).unwrap();
    let key = SituationKey::from_observation(&observation).unwrap();
    table.set(key, q(1, 1));
    let reports = verify_model(&inst, &table, &[Property::Pe]).unwrap();
    let report = &reports[0];
    assert!(!report.passed());
    let Some(crate::properties::Witness::OffHull { profile, outcome, .. }) = &report.witness else {
        panic!("{report:?}")
    };
    assert_eq!(*outcome, q(1, 1));
    assert_eq!(profile.to_profile(&inst).unwrap(), truthful);
}

#[test]
fn adding_properties_never_helps() {
    let inst = chain(3);
    let base = [Property::Sp, Property::Pe, Property::AnS];
    assert_eq!(run(&inst, &base).verdict, CspVerdict::Unsat);
    let mut more = base.to_vec();
    more.push(Property::Vr(1));
    assert_eq!(run(&inst, &more).verdict, CspVerdict::Unsat);
}

#[test]
fn result_json_is_stable() {
    let inst = chain(3);
    let props = [Property::Sp, Property::Pe];
    let csp = encode(&inst, &props, &EncodeOptions::default()).unwrap();
    let result = solve(&csp, &SolveOptions::default()).unwrap();
    let file = result.to_json(&csp);
    let text = serde_json::to_string(&file).unwrap();
    let back: CspResultFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.model.unwrap().len(), csp.variable_count());
    let summary = csp.summary(true);
    let domains: BTreeMap<usize, usize> = summary
        .situations
        .unwrap()
        .iter()
        .map(|s| (s.domain.len(), 1))
        .collect();
    assert!(!domains.is_empty());
    assert_eq!(csp.certificate_id(), csp.certificate_id());
}
