//! Deterministic instance generators and the exhaustive small-forest family.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{q, Grid, Instance, InvitationGraph, ModelError, PreferenceModel, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("unknown shape {0:?} (expected chain, star, fig2, random or minimal)")]
    InvalidShape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Chain,
    Star,
    Fig2,
    Random,
    Minimal,
}

impl FromStr for Shape {
    type Err = GenError;

    fn from_str(text: &str) -> Result<Self, GenError> {
        match text.to_ascii_lowercase().as_str() {
            "chain" => Ok(Shape::Chain),
            "star" => Ok(Shape::Star),
            "fig2" => Ok(Shape::Fig2),
            "random" => Ok(Shape::Random),
            "minimal" => Ok(Shape::Minimal),
            _ => Err(GenError::InvalidShape(text.to_string())),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Chain => "chain",
            Shape::Star => "star",
            Shape::Fig2 => "fig2",
            Shape::Random => "random",
            Shape::Minimal => "minimal",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenOptions {
    pub shape: Shape,
    pub voters: Option<usize>,
    pub depth: Option<u32>,
    /// Number of uniform grid points.
    pub grid: Option<usize>,
    pub seed: u64,
    pub preference_model: PreferenceModel,
}

impl GenOptions {
    pub fn new(shape: Shape) -> Self {
        GenOptions {
            shape,
            voters: None,
            depth: None,
            grid: None,
            seed: 0,
            preference_model: PreferenceModel::Symmetric,
        }
    }
}

const CHAIN_NAMES: [&str; 7] = ["i", "j", "u", "w", "x", "y", "z"];

fn letter_name(index: usize) -> String {
    if index < 26 {
        ((b'a' + index as u8) as char).to_string()
    } else {
        format!("v{index}")
    }
}

fn chain_name(index: usize) -> String {
    CHAIN_NAMES
        .get(index)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("v{index}"))
}

fn random_peaks(rng: &mut ChaCha8Rng, grid: &Grid, n: usize) -> Vec<Rational> {
    (0..n).map(|_| grid[rng.gen_range(0..grid.len())]).collect()
}

/// Nearest grid point; ties go to the lower point.
pub fn snap(value: Rational, grid: &Grid) -> Rational {
    *grid
        .points()
        .iter()
        .min_by_key(|p| (p.distance(value), **p))
        .expect("grid is nonempty")
}

fn with_peaks(graph: InvitationGraph, by_name: &BTreeMap<&str, Rational>, grid: Grid) -> Result<Instance, GenError> {
    let peaks = graph.names().iter().map(|n| by_name[n.as_str()]).collect();
    Ok(Instance::new(graph, peaks, grid, PreferenceModel::Symmetric)?)
}

/// Two direct children `j` and `i`, with `i` inviting `u` and `v`. On the
/// default eleven-point grid the peaks are `j = 3/10`, `v = 1/2`,
/// `i = 3/5`, `u = 9/10`; on other grids they snap to the nearest point.
pub fn four_voter_instance(grid_points: Option<usize>) -> Result<Instance, GenError> {
    let grid = Grid::uniform(grid_points.unwrap_or(11))?;
    let graph = InvitationGraph::builder()
        .moderator_invites(["j", "i"])
        .invites("i", ["u", "v"])
        .build()?;
    let peaks: BTreeMap<&str, Rational> = [("j", q(3, 10)), ("v", q(1, 2)), ("i", q(3, 5)), ("u", q(9, 10))]
        .into_iter()
        .map(|(n, p)| (n, snap(p, &grid)))
        .collect();
    with_peaks(graph, &peaks, grid)
}

/// `m → i → j → u → ...` with `depth` voters.
pub fn chain_instance(depth: u32, grid_points: usize, seed: u64) -> Result<Instance, GenError> {
    if depth == 0 {
        return Err(GenError::InvalidParameter("a chain needs depth at least 1".into()));
    }
    let names: Vec<String> = (0..depth as usize).map(chain_name).collect();
    let mut builder = InvitationGraph::builder().moderator_invites([names[0].clone()]);
    for pair in names.windows(2) {
        builder = builder.invites(pair[0].clone(), [pair[1].clone()]);
    }
    let graph = builder.build()?;
    let grid = Grid::uniform(grid_points)?;
    let peaks = random_peaks(&mut ChaCha8Rng::seed_from_u64(seed), &grid, graph.len());
    Ok(Instance::new(graph, peaks, grid, PreferenceModel::Symmetric)?)
}

/// Moderator with two direct children `a` and `b`, where `a` has one child `c`.
pub fn two_plus_one_instance(grid_points: usize) -> Result<Instance, GenError> {
    let graph = InvitationGraph::builder()
        .moderator_invites(["a", "b"])
        .invites("a", ["c"])
        .build()?;
    let grid = Grid::uniform(grid_points)?;
    let peaks = [("a", Rational::ZERO), ("b", Rational::ONE), ("c", snap(q(1, 2), &grid))].into();
    with_peaks(graph, &peaks, grid)
}

/// `m → {i, k}`, `i → j`, `j → u` on grid `{0, 1/2, 1}`: small enough for
/// the constraint search, deep enough for every relevance row.
pub fn minimal_instance() -> Result<Instance, GenError> {
    let graph = InvitationGraph::builder()
        .moderator_invites(["i", "k"])
        .invites("i", ["j"])
        .invites("j", ["u"])
        .build()?;
    let peaks = [("i", q(0, 1)), ("j", q(1, 2)), ("k", q(1, 1)), ("u", q(1, 2))].into();
    with_peaks(graph, &peaks, Grid::uniform(3)?)
}

/// Each voter picks a parent uniformly among the moderator and the earlier
/// voters that sit above the depth bound.
fn random_instance(voters: usize, depth: u32, grid_points: usize, seed: u64) -> Result<Instance, GenError> {
    if voters == 0 || depth == 0 {
        return Err(GenError::InvalidParameter(
            "random instances need voters and depth of at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut depths: Vec<u32> = Vec::with_capacity(voters);
    let mut builder = InvitationGraph::builder();
    let mut direct = Vec::new();
    for k in 0..voters {
        let eligible: Vec<Option<usize>> = std::iter::once(None)
            .chain((0..k).filter(|p| depths[*p] < depth).map(Some))
            .collect();
        match eligible[rng.gen_range(0..eligible.len())] {
            None => {
                direct.push(letter_name(k));
                depths.push(1);
            }
            Some(parent) => {
                builder = builder.invites(letter_name(parent), [letter_name(k)]);
                depths.push(depths[parent] + 1);
            }
        }
        builder = builder.voter(letter_name(k));
    }
    let graph = builder.moderator_invites(direct).build()?;
    let grid = Grid::uniform(grid_points)?;
    let peaks = random_peaks(&mut rng, &grid, graph.len());
    Ok(Instance::new(graph, peaks, grid, PreferenceModel::Symmetric)?)
}

pub fn generate(options: &GenOptions) -> Result<Instance, GenError> {
    let grid = options.grid.unwrap_or(3);
    let instance = match options.shape {
        Shape::Chain => chain_instance(options.depth.unwrap_or(3), grid, options.seed)?,
        Shape::Star => {
            let n = options.voters.unwrap_or(3);
            if n == 0 {
                return Err(GenError::InvalidParameter("a star needs at least one voter".into()));
            }
            let graph = InvitationGraph::builder()
                .moderator_invites((0..n).map(letter_name))
                .build()?;
            let grid = Grid::uniform(grid)?;
            let peaks = random_peaks(&mut ChaCha8Rng::seed_from_u64(options.seed), &grid, n);
            Instance::new(graph, peaks, grid, PreferenceModel::Symmetric)?
        }
        Shape::Fig2 => four_voter_instance(options.grid)?,
        Shape::Random => random_instance(
            options.voters.unwrap_or(4),
            options.depth.unwrap_or(3),
            grid,
            options.seed,
        )?,
        Shape::Minimal => minimal_instance()?,
    };
    Ok(instance.with_preference_model(options.preference_model))
}

/// Every unlabeled rooted forest with `1..=max_voters` voters and depth at
/// most `max_depth`, each once. Voters are named `a, b, c, ...` in
/// breadth-first order of the canonical form.
pub fn forest_shapes(max_voters: usize, max_depth: u32) -> Vec<InvitationGraph> {
    let mut shapes = Vec::new();
    for n in 1..=max_voters {
        let mut seen: BTreeMap<String, Vec<Option<usize>>> = BTreeMap::new();
        let mut parents = vec![None; n];
        collect_forests(&mut parents, 1, max_depth, &mut seen);
        shapes.extend(seen.into_values().map(|p| canonical_graph(&p)));
    }
    shapes
}

fn depth_of(parents: &[Option<usize>], node: usize) -> u32 {
    match parents[node] {
        None => 1,
        Some(p) => depth_of(parents, p) + 1,
    }
}

fn collect_forests(
    parents: &mut Vec<Option<usize>>,
    next: usize,
    max_depth: u32,
    seen: &mut BTreeMap<String, Vec<Option<usize>>>,
) {
    if next == parents.len() {
        seen.entry(forest_code(parents)).or_insert_with(|| parents.clone());
        return;
    }
    for parent in std::iter::once(None).chain((0..next).map(Some)) {
        parents[next] = parent;
        if depth_of(parents, next) <= max_depth {
            collect_forests(parents, next + 1, max_depth, seen);
        }
    }
    parents[next] = None;
}

fn children_of(parents: &[Option<usize>], node: Option<usize>) -> Vec<usize> {
    (0..parents.len()).filter(|c| parents[*c] == node).collect()
}

fn subtree_code(parents: &[Option<usize>], node: usize) -> String {
    let mut codes: Vec<String> = children_of(parents, Some(node))
        .into_iter()
        .map(|c| subtree_code(parents, c))
        .collect();
    codes.sort();
    format!("({})", codes.concat())
}

fn forest_code(parents: &[Option<usize>]) -> String {
    let mut codes: Vec<String> = children_of(parents, None)
        .into_iter()
        .map(|r| subtree_code(parents, r))
        .collect();
    codes.sort();
    codes.concat()
}

fn canonical_graph(parents: &[Option<usize>]) -> InvitationGraph {
    let ordered = |nodes: Vec<usize>| {
        let mut keyed: Vec<(String, usize)> = nodes.into_iter().map(|n| (subtree_code(parents, n), n)).collect();
        keyed.sort();
        keyed.into_iter().map(|(_, n)| n).collect::<Vec<_>>()
    };
    let mut order = ordered(children_of(parents, None));
    let roots = order.len();
    let mut head = 0;
    while head < order.len() {
        let node = order[head];
        order.extend(ordered(children_of(parents, Some(node))));
        head += 1;
    }
    let name_of: BTreeMap<usize, String> = order.iter().enumerate().map(|(i, n)| (*n, letter_name(i))).collect();
    let mut builder = InvitationGraph::builder().moderator_invites(order[..roots].iter().map(|n| name_of[n].clone()));
    for node in &order {
        builder = builder.voter(name_of[node].clone());
        let kids = children_of(parents, Some(*node));
        if !kids.is_empty() {
            builder = builder.invites(name_of[node].clone(), kids.iter().map(|k| name_of[k].clone()));
        }
    }
    builder.build().expect("forests are valid graphs")
}

/// `graph` with every assignment of grid points to true peaks.
pub fn peak_assignments(graph: &InvitationGraph, grid: &Grid) -> Vec<Instance> {
    let n = graph.len();
    let g = grid.len();
    let total = g.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut peaks = vec![Rational::ZERO; n];
            for slot in (0..n).rev() {
                peaks[slot] = grid[code % g];
                code /= g;
            }
            Instance::new(graph.clone(), peaks, grid.clone(), PreferenceModel::Symmetric).expect("grid peaks")
        })
        .collect()
}

/// All forests with at most `max_voters` voters and depth `max_depth`, with
/// every peak assignment on `grid`.
pub fn small_family(max_voters: usize, max_depth: u32, grid: &Grid) -> Vec<Instance> {
    forest_shapes(max_voters, max_depth)
        .iter()
        .flat_map(|g| peak_assignments(g, grid))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::instance_to_json;

    #[test]
    fn forest_counts() {
        // Rooted forests on n unlabeled nodes: 1, 2, 4, 9; one 4-node forest is a depth-4 chain.
        let counts: Vec<usize> = (1..=4).map(|n| forest_shapes(n, 3).len()).collect();
        assert_eq!(counts, [1, 3, 7, 15]);
        assert_eq!(forest_shapes(4, 4).len(), 16);
        let family = small_family(4, 3, &Grid::uniform(3).unwrap());
        assert_eq!(family.len(), 3 + 2 * 9 + 4 * 27 + 8 * 81);
    }

    #[test]
    fn shapes_are_distinct() {
        let shapes = forest_shapes(4, 3);
        let codes: std::collections::BTreeSet<String> = shapes
            .iter()
            .map(|g| {
                let parents: Vec<Option<usize>> = g
                    .voters()
                    .map(|v| match g.parent(v) {
                        crate::model::Parent::Moderator => None,
                        crate::model::Parent::Voter(p) => Some(p.index()),
                    })
                    .collect();
                forest_code(&parents)
            })
            .collect();
        assert_eq!(codes.len(), shapes.len());
        assert!(shapes.iter().all(|g| g.max_depth() <= 3));
    }

    #[test]
    fn four_voter_peaks() {
        let inst = four_voter_instance(None).unwrap();
        let g = inst.graph();
        let peak = |n: &str| inst.true_peak(g.id(n).unwrap());
        assert_eq!(
            [peak("j"), peak("v"), peak("i"), peak("u")],
            [q(3, 10), q(1, 2), q(3, 5), q(9, 10)]
        );
        let coarse = four_voter_instance(Some(5)).unwrap();
        let g = coarse.graph();
        let peak = |n: &str| coarse.true_peak(g.id(n).unwrap());
        assert_eq!(
            [peak("j"), peak("v"), peak("i"), peak("u")],
            [q(1, 4), q(1, 2), q(1, 2), q(1, 1)]
        );
    }

    #[test]
    fn snapping_ties_go_down() {
        let grid = Grid::uniform(3).unwrap();
        assert_eq!(snap(q(1, 4), &grid), q(0, 1));
        assert_eq!(snap(q(3, 4), &grid), q(1, 2));
    }

    #[test]
    fn chain_names() {
        let inst = chain_instance(3, 3, 0).unwrap();
        assert_eq!(inst.graph().names(), ["i", "j", "u"]);
        assert_eq!(inst.graph().max_depth(), 3);
    }

    #[test]
    fn generation_is_deterministic() {
        for shape in [Shape::Chain, Shape::Star, Shape::Fig2, Shape::Random, Shape::Minimal] {
            let mut options = GenOptions::new(shape);
            options.seed = 7;
            options.voters = Some(6);
            let a = instance_to_json(&generate(&options).unwrap());
            let b = instance_to_json(&generate(&options).unwrap());
            assert_eq!(a, b, "{shape}");
        }
    }

    #[test]
    fn random_respects_bounds() {
        for seed in 0..50 {
            let mut options = GenOptions::new(Shape::Random);
            options.seed = seed;
            options.voters = Some(7);
            options.depth = Some(2);
            let inst = generate(&options).unwrap();
            assert_eq!(inst.graph().len(), 7);
            assert!(inst.graph().max_depth() <= 2);
        }
    }

    #[test]
    fn bad_shapes() {
        assert!("ring".parse::<Shape>().is_err());
        assert!(chain_instance(0, 3, 0).is_err());
    }
}
