//! Decides whether *any* rule on a finite instance satisfies a property set.
//!
//! The unknown rule is a table with one cell per reachable reported
//! situation. Properties become constraints over those cells: Pareto and
//! the depth-1 hull restrict domains, anonymity merges cells into equality
//! classes, strategy-proofness relates pairs of cells at a given peak, and
//! voter relevance is a disjunction over groups of cells. A complete
//! backtracking search then either finds a table or refutes them all.

mod solver;
mod table;

use std::collections::{BTreeSet, HashMap};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use solver::solve;
pub use table::{tabulate, TabulatedScf};

use crate::enumeration::{permutation_classes, EnumerationError, Filters, ProfileSpace, DEFAULT_BUDGET};
use crate::io::{InstanceFile, ProfileRecord, ReportRecord};
use crate::model::{Instance, ModelError, Observation, Rational, VoterId};
use crate::properties::{check_all, CheckError, CheckOptions, CheckReport, Property};
use crate::scf::ScfError;

pub const CSP_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_VARIABLE_BUDGET: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CspError {
    #[error("{variables} situations exceed the variable budget of {budget}")]
    VariableBudget { variables: usize, budget: usize },
    #[error("property {0} cannot be encoded")]
    UnsupportedProperty(Property),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Scf(#[from] ScfError),
    #[error("search stopped by its {limit} limit before a verdict")]
    Inconclusive { limit: String, stats: SolveStats },
}

impl CspError {
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            CspError::VariableBudget { .. }
                | CspError::Inconclusive { .. }
                | CspError::Enumeration(EnumerationError::BudgetExceeded { .. })
        )
    }
}

/// What the rule can see: for each voter, `None` if it does not
/// participate, else its reported peak (as a grid index) and invited mask.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SituationKey(pub Vec<Option<(u8, u64)>>);

impl SituationKey {
    /// `None` when a participant's peak is off the grid.
    pub fn from_observation(observation: &Observation<'_>) -> Option<SituationKey> {
        let grid = observation.instance().grid();
        let graph = observation.instance().graph();
        let mut cells = Vec::with_capacity(graph.len());
        for voter in graph.voters() {
            if observation.participates(voter) {
                let report = observation.report(voter);
                cells.push(Some((grid.index_of(report.peak)? as u8, report.invited.bits())));
            } else {
                cells.push(None);
            }
        }
        Some(SituationKey(cells))
    }

    /// Inverse of [`SituationKey::record`]; voters absent from the record do
    /// not participate.
    pub fn from_record(record: &ProfileRecord, instance: &Instance) -> Result<SituationKey, ModelError> {
        let graph = instance.graph();
        let mut cells = vec![None; graph.len()];
        for (name, report) in &record.0 {
            let voter = graph
                .id(name)
                .ok_or_else(|| ModelError::Report(format!("situation names unknown voter {name}")))?;
            let peak = instance
                .grid()
                .index_of(report.peak)
                .ok_or_else(|| ModelError::Report(format!("{name}: peak {} is off the grid", report.peak)))?;
            let mut invited = crate::model::VoterSet::EMPTY;
            for child in &report.invited {
                invited.insert(
                    graph
                        .id(child)
                        .ok_or_else(|| ModelError::Report(format!("{name} invites unknown voter {child}")))?,
                );
            }
            cells[voter.index()] = Some((peak as u8, invited.bits()));
        }
        Ok(SituationKey(cells))
    }

    /// The participants' reports by name.
    pub fn record(&self, instance: &Instance) -> ProfileRecord {
        let graph = instance.graph();
        ProfileRecord(
            self.0
                .iter()
                .enumerate()
                .filter_map(|(v, cell)| {
                    cell.map(|(peak, invited)| {
                        (
                            graph.name(VoterId(v)).to_string(),
                            ReportRecord {
                                peak: instance.grid()[peak as usize],
                                invited: graph.set_names(crate::model::VoterSet::from_bits(invited)),
                            },
                        )
                    })
                })
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodeOptions {
    pub variable_budget: usize,
    pub profile_budget: usize,
    /// Add the depth-1 hull as an implied unary constraint.
    pub depth1_hull: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            variable_budget: DEFAULT_VARIABLE_BUDGET,
            profile_budget: DEFAULT_BUDGET,
            depth1_hull: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveOptions {
    /// Shuffles variable tie-breaking and value order.
    pub seed: Option<u64>,
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCounts {
    pub pareto_hull: usize,
    pub depth1_hull: usize,
    pub anon_equality: usize,
    pub sp_preference: usize,
    pub vr_disjunction: usize,
}

/// Truthful outcome at `x` must be weakly preferred to the deviation
/// outcome at `y` by a voter whose peak is grid point `peak`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct SpPreference {
    pub x: usize,
    pub y: usize,
    pub peak: u8,
}

/// At least one group must take two different values. Groups hold
/// search-variable indices and never collapse to a single variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct VrDisjunction {
    pub voter: VoterId,
    pub groups: Vec<Vec<usize>>,
}

/// Encoded problem. Situations are merged into search variables by
/// anonymity; every other constraint is stated on search variables.
#[derive(Clone, Debug)]
pub struct Csp {
    instance: Instance,
    properties: Vec<Property>,
    options: EncodeOptions,
    keys: Vec<SituationKey>,
    class_of: Vec<usize>,
    domains: Vec<u64>,
    sp: Vec<SpPreference>,
    vr: Vec<VrDisjunction>,
    counts: ConstraintCounts,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.0[hi] = lo;
        true
    }
}

fn hull_mask(low: usize, high: usize) -> u64 {
    let width = high - low + 1;
    let ones = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
    ones << low
}

pub fn encode(instance: &Instance, properties: &[Property], options: &EncodeOptions) -> Result<Csp, CspError> {
    let mut sp_mode = None;
    let mut anonymity = Vec::new();
    let mut vr_depth = None;
    let mut pareto = false;
    for property in properties {
        match property {
            Property::Sp => sp_mode = Some(true),
            Property::Spd => sp_mode = sp_mode.or(Some(false)),
            Property::Pe => pareto = true,
            Property::Vr(d) => vr_depth = Some(vr_depth.map_or(*d, |e: u32| e.max(*d))),
            Property::Depth1Hull => {}
            Property::Onto => return Err(CspError::UnsupportedProperty(*property)),
            p => anonymity.push(p.anonymity_variant().expect("anonymity property")),
        }
    }
    let depth1_hull = options.depth1_hull || properties.contains(&Property::Depth1Hull);

    let graph = instance.graph();
    let grid = instance.grid();
    let space = ProfileSpace::new(instance, &Filters::none(), options.profile_budget)?;

    // Situations, in order of first appearance.
    let mut index_of: HashMap<SituationKey, usize> = HashMap::new();
    let mut keys = Vec::new();
    let mut var_of = Vec::with_capacity(space.len());
    let mut first_profile = Vec::new();
    let mut participants = Vec::with_capacity(space.len());
    for idx in 0..space.len() {
        let profile = space.profile(idx);
        let observation = Observation::new_unchecked(instance, &profile);
        let key = SituationKey::from_observation(&observation).expect("enumerated peaks are on the grid");
        let next = keys.len();
        let var = *index_of.entry(key.clone()).or_insert_with(|| {
            keys.push(key);
            first_profile.push(idx);
            next
        });
        if keys.len() > options.variable_budget {
            return Err(CspError::VariableBudget {
                variables: keys.len(),
                budget: options.variable_budget,
            });
        }
        var_of.push(var);
        participants.push(observation.participants());
    }

    let mut counts = ConstraintCounts::default();
    let full = hull_mask(0, grid.len() - 1);
    let mut raw_domains = vec![full; keys.len()];
    for (var, key) in keys.iter().enumerate() {
        let peaks = || key.0.iter().flatten().map(|(p, _)| *p as usize);
        if pareto {
            let (low, high) = (peaks().min().expect("nonempty"), peaks().max().expect("nonempty"));
            raw_domains[var] &= hull_mask(low, high);
            counts.pareto_hull += 1;
        }
        if depth1_hull {
            let direct = graph
                .moderator_children()
                .iter()
                .map(|v| key.0[v.index()].expect("direct children participate").0 as usize);
            let (low, high) = direct.fold((usize::MAX, 0), |(lo, hi), p| (lo.min(p), hi.max(p)));
            raw_domains[var] &= hull_mask(low, high);
            counts.depth1_hull += 1;
        }
    }

    // Anonymity: adjacent transpositions of peaks within each class generate
    // every within-class permutation.
    let mut uf = UnionFind((0..keys.len()).collect());
    for variant in anonymity {
        for var in 0..keys.len() {
            let profile = space.profile(first_profile[var]);
            let observation = Observation::new_unchecked(instance, &profile);
            for class in permutation_classes(&observation, variant) {
                let members: Vec<VoterId> = class.members.iter().collect();
                for pair in members.windows(2) {
                    let (a, b) = (pair[0].index(), pair[1].index());
                    let (Some(ca), Some(cb)) = (keys[var].0[a], keys[var].0[b]) else {
                        unreachable!("class members participate")
                    };
                    if ca.0 == cb.0 {
                        continue;
                    }
                    let mut swapped = keys[var].clone();
                    swapped.0[a] = Some((cb.0, ca.1));
                    swapped.0[b] = Some((ca.0, cb.1));
                    let other = index_of[&swapped];
                    counts.anon_equality += 1;
                    uf.union(var, other);
                }
            }
        }
    }
    let mut class_index: HashMap<usize, usize> = HashMap::new();
    let mut class_of = Vec::with_capacity(keys.len());
    let mut domains = Vec::new();
    for (var, raw) in raw_domains.iter().enumerate() {
        let root = uf.find(var);
        let next = class_index.len();
        let class = *class_index.entry(root).or_insert_with(|| {
            domains.push(full);
            next
        });
        domains[class] &= raw;
        class_of.push(class);
    }

    let mut sp = BTreeSet::new();
    if let Some(full_mode) = sp_mode {
        for idx in 0..space.len() {
            let x = class_of[var_of[idx]];
            for voter in participants[idx].iter() {
                let coordinate = space.coordinate(idx, voter);
                let reports = space.report_space(voter);
                let truthful = reports[coordinate];
                if truthful.invited != graph.children(voter) {
                    continue;
                }
                let peak = grid.index_of(truthful.peak).expect("grid peak") as u8;
                for (alternative, report) in reports.iter().enumerate() {
                    if alternative == coordinate || (!full_mode && report.peak != truthful.peak) {
                        continue;
                    }
                    let y = class_of[var_of[space.replace(idx, voter, alternative)]];
                    if x != y {
                        sp.insert(SpPreference { x, y, peak });
                    }
                }
            }
        }
    }
    counts.sp_preference = sp.len();

    let mut vr = Vec::new();
    if let Some(d) = vr_depth {
        for voter in graph.voters().filter(|v| (1..=d).contains(&graph.potential_depth(*v))) {
            let reports = space.report_space(voter).len();
            let mut groups = BTreeSet::new();
            for idx in 0..space.len() {
                if space.coordinate(idx, voter) != 0 || !participants[idx].contains(voter) {
                    continue;
                }
                let group: BTreeSet<usize> = (0..reports)
                    .map(|c| class_of[var_of[space.replace(idx, voter, c)]])
                    .collect();
                if group.len() > 1 {
                    groups.insert(group.into_iter().collect::<Vec<_>>());
                }
            }
            vr.push(VrDisjunction {
                voter,
                groups: groups.into_iter().collect(),
            });
        }
    }
    counts.vr_disjunction = vr.len();

    let mut properties = properties.to_vec();
    properties.sort();
    properties.dedup();
    Ok(Csp {
        instance: instance.clone(),
        properties,
        options: *options,
        keys,
        class_of,
        domains,
        sp: sp.into_iter().collect(),
        vr,
        counts,
    })
}

impl Csp {
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn properties(&self) -> &[Property] {
        &self.properties
    }

    /// One per reachable reported situation.
    pub fn variable_count(&self) -> usize {
        self.keys.len()
    }

    /// Equality classes after anonymity merging.
    pub fn search_variable_count(&self) -> usize {
        self.domains.len()
    }

    pub fn counts(&self) -> ConstraintCounts {
        self.counts
    }

    pub fn keys(&self) -> &[SituationKey] {
        &self.keys
    }

    /// Domain of a situation after unary constraints, as grid points.
    pub fn domain(&self, variable: usize) -> Vec<Rational> {
        let mask = self.domains[self.class_of[variable]];
        let grid = self.instance.grid();
        (0..grid.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| grid[i])
            .collect()
    }

    pub(crate) fn class_of(&self) -> &[usize] {
        &self.class_of
    }

    pub(crate) fn initial_domains(&self) -> &[u64] {
        &self.domains
    }

    pub(crate) fn sp_constraints(&self) -> &[SpPreference] {
        &self.sp
    }

    pub(crate) fn vr_constraints(&self) -> &[VrDisjunction] {
        &self.vr
    }

    pub fn summary(&self, with_variables: bool) -> CspSummary {
        CspSummary {
            schema_version: CSP_SCHEMA_VERSION,
            properties: self.properties.clone(),
            depth1_hull: self.options.depth1_hull,
            grid: self.instance.grid().points().to_vec(),
            variables: self.variable_count(),
            search_variables: self.search_variable_count(),
            constraints: self.counts,
            vr_groups: self
                .vr
                .iter()
                .map(|c| (self.instance.graph().name(c.voter).to_string(), c.groups.len()))
                .collect(),
            situations: with_variables.then(|| {
                (0..self.keys.len())
                    .map(|v| SituationSummary {
                        situation: self.keys[v].record(&self.instance),
                        class: self.class_of[v],
                        domain: self.domain(v),
                    })
                    .collect()
            }),
        }
    }

    /// Content hash over the instance, the property set and the encoding,
    /// used as an Unsat certificate id.
    pub fn certificate_id(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(InstanceFile::from_instance(&self.instance).to_json());
        let summary = serde_json::to_string(&self.summary(false)).expect("summary serializes");
        hasher.update(summary);
        format!("csp-{}", hex::encode(&hasher.finalize()[..8]))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SituationSummary {
    pub situation: ProfileRecord,
    pub class: usize,
    pub domain: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CspSummary {
    pub schema_version: u32,
    pub properties: Vec<Property>,
    pub depth1_hull: bool,
    pub grid: Vec<Rational>,
    pub variables: usize,
    pub search_variables: usize,
    pub constraints: ConstraintCounts,
    /// Number of disjunct groups per relevance-constrained voter.
    pub vr_groups: Vec<(String, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub situations: Option<Vec<SituationSummary>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes_explored: u64,
    pub propagations: u64,
    pub prunings: u64,
    pub wall_time_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CspVerdict {
    Sat,
    Unsat,
}

#[derive(Clone, Debug)]
pub struct CspResult {
    pub verdict: CspVerdict,
    /// Outcome per situation, aligned with [`Csp::keys`].
    pub model: Option<Vec<Rational>>,
    pub stats: SolveStats,
    pub certificate: Option<String>,
}

impl CspResult {
    pub fn is_sat(&self) -> bool {
        self.verdict == CspVerdict::Sat
    }

    pub fn model_scf(&self, csp: &Csp, label: &str) -> Option<TabulatedScf> {
        self.model
            .as_ref()
            .map(|values| TabulatedScf::new(label, csp.keys.iter().cloned().zip(values.iter().copied()).collect()))
    }

    pub fn to_json(&self, csp: &Csp) -> CspResultFile {
        CspResultFile {
            schema_version: CSP_SCHEMA_VERSION,
            csp: csp.summary(false),
            verdict: self.verdict.clone(),
            certificate: self.certificate.clone(),
            stats: self.stats,
            model: self.model.as_ref().map(|values| {
                csp.keys
                    .iter()
                    .zip(values)
                    .map(|(key, outcome)| ModelEntry {
                        situation: key.record(&csp.instance),
                        outcome: *outcome,
                    })
                    .collect()
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub situation: ProfileRecord,
    pub outcome: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CspResultFile {
    pub schema_version: u32,
    pub csp: CspSummary,
    pub verdict: CspVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<String>,
    pub stats: SolveStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Vec<ModelEntry>>,
}

/// Runs the property checkers on a tabulated rule. Every report must pass
/// for a model to be accepted.
pub fn verify_model(
    instance: &Instance,
    model: &TabulatedScf,
    properties: &[Property],
) -> Result<Vec<CheckReport>, CspError> {
    Ok(check_all(model, instance, properties, &CheckOptions::default())?)
}

#[cfg(test)]
mod tests;
