//! JSON file formats: instances, report profiles and GMVS parameters.
//!
//! Rationals are always `"num/den"` strings. Every top-level document carries
//! a `schema_version`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{
    Grid, Instance, InvitationGraph, ModelError, PreferenceModel, Profile, Rational, ReportedType, VoterSet,
};
use crate::scf::{
    AllParticipantsMedian, DepthWeightedMedian, DirectChildrenMedian, FixedOutcome, GmvsParameters, GmvsScf, ScfError,
    SocialChoiceFunction,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: ModelError,
    },
    #[error("{context}: {source}")]
    Scf {
        context: String,
        #[source]
        source: ScfError,
    },
    #[error("{context}: unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Schema { context: String, found: u32 },
    #[error(
        "unknown rule {0:?} (expected fixed:<q>, direct-median, depth-weighted-median, all-median or gmvs:<file>)"
    )]
    UnknownScf(String),
}

impl IoError {
    /// Stable machine-readable category for CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            IoError::Read { .. } => "read",
            IoError::Json { .. } => "parse",
            IoError::Model { .. } => "validation",
            IoError::Scf { .. } => "parameters",
            IoError::Schema { .. } => "schema",
            IoError::UnknownScf(_) => "usage",
        }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn check_schema(context: &str, found: u32) -> Result<(), IoError> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(IoError::Schema {
            context: context.into(),
            found,
        })
    }
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}

/// One voter's report with names instead of ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub peak: Rational,
    pub invited: Vec<String>,
}

/// A whole profile keyed by voter name.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProfileRecord(pub BTreeMap<String, ReportRecord>);

impl ProfileRecord {
    pub fn from_profile(graph: &InvitationGraph, profile: &Profile) -> Self {
        ProfileRecord(
            graph
                .voters()
                .map(|v| {
                    let report = profile.get(v);
                    (
                        graph.name(v).to_string(),
                        ReportRecord {
                            peak: report.peak,
                            invited: graph.set_names(report.invited),
                        },
                    )
                })
                .collect(),
        )
    }

    /// Voters missing from the record report truthfully.
    pub fn to_profile(&self, instance: &Instance) -> Result<Profile, ModelError> {
        let graph = instance.graph();
        let mut profile = instance.truthful_profile();
        for (name, record) in &self.0 {
            let voter = graph
                .id(name)
                .ok_or_else(|| ModelError::Report(format!("reports.{name}: unknown voter")))?;
            let mut invited = VoterSet::EMPTY;
            for child in &record.invited {
                let id = graph
                    .id(child)
                    .ok_or_else(|| ModelError::Report(format!("reports.{name}.invited: unknown voter {child}")))?;
                invited.insert(id);
            }
            profile.set(
                voter,
                ReportedType {
                    peak: record.peak,
                    invited,
                },
            );
        }
        instance.validate_profile(&profile)?;
        Ok(profile)
    }
}

/// On-disk instance description.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub moderator_children: Vec<String>,
    #[serde(default)]
    pub children: BTreeMap<String, Vec<String>>,
    pub peaks: BTreeMap<String, Rational>,
    pub grid: Vec<Rational>,
    #[serde(default)]
    pub preference_model: PreferenceModel,
}

impl InstanceFile {
    /// Canonical form: every voter listed under `children`, lists sorted.
    pub fn from_instance(instance: &Instance) -> Self {
        let graph = instance.graph();
        InstanceFile {
            schema_version: SCHEMA_VERSION,
            moderator_children: graph.set_names(graph.moderator_children()),
            children: graph
                .voters()
                .map(|v| (graph.name(v).to_string(), graph.set_names(graph.children(v))))
                .collect(),
            peaks: graph
                .voters()
                .map(|v| (graph.name(v).to_string(), instance.true_peak(v)))
                .collect(),
            grid: instance.grid().points().to_vec(),
            preference_model: instance.preference_model(),
        }
    }

    pub fn to_instance(&self) -> Result<Instance, IoError> {
        check_schema("instance", self.schema_version)?;
        let model_err = |context: &str| {
            let context = context.to_string();
            move |source| IoError::Model { context, source }
        };
        let mut builder = InvitationGraph::builder().moderator_invites(self.moderator_children.iter().cloned());
        for (parent, children) in &self.children {
            builder = builder
                .voter(parent.clone())
                .invites(parent.clone(), children.iter().cloned());
        }
        for name in self.peaks.keys() {
            builder = builder.voter(name.clone());
        }
        let graph = builder.build().map_err(model_err("moderator_children/children"))?;
        let mut peaks = Vec::with_capacity(graph.len());
        for voter in graph.voters() {
            let name = graph.name(voter);
            let peak = self.peaks.get(name).ok_or_else(|| IoError::Model {
                context: format!("peaks.{name}"),
                source: ModelError::Instance("missing peak".into()),
            })?;
            if !peak.in_unit_interval() {
                return Err(IoError::Model {
                    context: format!("peaks.{name}"),
                    source: ModelError::Instance(format!("{peak} outside [0, 1]")),
                });
            }
            peaks.push(*peak);
        }
        let grid = Grid::new(self.grid.clone()).map_err(model_err("grid"))?;
        Instance::new(graph, peaks, grid, self.preference_model).map_err(model_err("instance"))
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        serde_json::from_str(text).map_err(|source| IoError::Json {
            context: "instance".into(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files serialize") + "\n"
    }
}

pub fn load_instance(path: &Path) -> Result<Instance, IoError> {
    let text = read(path)?;
    InstanceFile::parse(&text)
        .map_err(|e| match e {
            IoError::Json { source, .. } => IoError::Json {
                context: path.display().to_string(),
                source,
            },
            other => other,
        })?
        .to_instance()
}

pub fn instance_to_json(instance: &Instance) -> String {
    InstanceFile::from_instance(instance).to_json()
}

/// Optional report profile for `evaluate`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportsFile {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub reports: ProfileRecord,
}

pub fn load_reports(path: &Path, instance: &Instance) -> Result<Profile, IoError> {
    let text = read(path)?;
    let file: ReportsFile = serde_json::from_str(&text).map_err(|source| IoError::Json {
        context: path.display().to_string(),
        source,
    })?;
    check_schema("reports", file.schema_version)?;
    file.reports.to_profile(instance).map_err(|source| IoError::Model {
        context: path.display().to_string(),
        source,
    })
}

/// GMVS parameters on disk. Exactly one of `anonymous` / `explicit`.
///
/// `anonymous` maps a participating-set size `n` to the `n + 1` values
/// `α_0..α_n`. `explicit` lists, for each participating set, the value of
/// every subset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmvsFile {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anonymous: Option<BTreeMap<usize, Vec<Rational>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<ExplicitTable>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitTable {
    pub participants: Vec<String>,
    pub alphas: Vec<SubsetValue>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetValue {
    pub subset: Vec<String>,
    pub value: Rational,
}

impl GmvsFile {
    pub fn to_parameters(&self, graph: &InvitationGraph) -> Result<GmvsParameters, IoError> {
        check_schema("gmvs", self.schema_version)?;
        let scf_err = |source| IoError::Scf {
            context: "gmvs".into(),
            source,
        };
        match (&self.anonymous, &self.explicit) {
            (Some(by_size), None) => GmvsParameters::anonymous(by_size.clone()).map_err(scf_err),
            (None, Some(tables)) => {
                let resolve = |names: &[String], context: &str| -> Result<VoterSet, IoError> {
                    names
                        .iter()
                        .map(|n| {
                            graph.id(n).ok_or_else(|| IoError::Model {
                                context: context.into(),
                                source: ModelError::Report(format!("unknown voter {n}")),
                            })
                        })
                        .collect()
                };
                let mut parsed = BTreeMap::new();
                for (t, table) in tables.iter().enumerate() {
                    let participants = resolve(&table.participants, &format!("explicit[{t}].participants"))?;
                    let mut values = BTreeMap::new();
                    for (s, entry) in table.alphas.iter().enumerate() {
                        let subset = resolve(&entry.subset, &format!("explicit[{t}].alphas[{s}].subset"))?;
                        values.insert(subset, entry.value);
                    }
                    parsed.insert(participants, values);
                }
                GmvsParameters::explicit(parsed).map_err(scf_err)
            }
            _ => Err(IoError::Scf {
                context: "gmvs".into(),
                source: ScfError::InvalidParameters("give exactly one of `anonymous` or `explicit`".into()),
            }),
        }
    }
}

/// Resolves a CLI rule name. `gmvs:<file>` reads the parameter file.
pub fn parse_scf(name: &str, instance: &Instance) -> Result<Box<dyn SocialChoiceFunction>, IoError> {
    let scf_err = |source| IoError::Scf {
        context: name.to_string(),
        source,
    };
    match name {
        "direct-median" => Ok(Box::new(DirectChildrenMedian::new())),
        "depth-weighted-median" => Ok(Box::new(DepthWeightedMedian)),
        "all-median" => Ok(Box::new(AllParticipantsMedian)),
        _ => {
            if let Some(value) = name.strip_prefix("fixed:") {
                let value: Rational = value.parse().map_err(|source| IoError::Model {
                    context: name.to_string(),
                    source,
                })?;
                Ok(Box::new(FixedOutcome::new(value).map_err(scf_err)?))
            } else if let Some(path) = name.strip_prefix("gmvs:") {
                let text = read(Path::new(path))?;
                let file: GmvsFile = serde_json::from_str(&text).map_err(|source| IoError::Json {
                    context: path.to_string(),
                    source,
                })?;
                let params = file.to_parameters(instance.graph())?;
                let label = Path::new(path)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.to_string());
                Ok(Box::new(GmvsScf::new(params, label)))
            } else {
                Err(IoError::UnknownScf(name.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::q;

    const FOUR_VOTERS: &str = r#"{
        "moderator_children": ["j", "i"],
        "children": {"i": ["u", "v"]},
        "peaks": {"i": "3/5", "j": "3/10", "u": "9/10", "v": "1/2"},
        "grid": ["0", "1/10", "1/5", "3/10", "2/5", "1/2", "3/5", "7/10", "4/5", "9/10", "1"],
        "preference_model": "symmetric"
    }"#;

    #[test]
    fn parses_and_canonicalises() {
        let file = InstanceFile::parse(FOUR_VOTERS).unwrap();
        let instance = file.to_instance().unwrap();
        assert_eq!(instance.graph().len(), 4);
        assert_eq!(instance.true_peak(instance.graph().id("i").unwrap()), q(3, 5));
        let canonical = InstanceFile::from_instance(&instance);
        let json = canonical.to_json();
        let again = InstanceFile::parse(&json).unwrap();
        assert_eq!(again, canonical);
        assert_eq!(again.to_instance().unwrap(), instance);
        assert_eq!(again.children["u"], Vec::<String>::new());
    }

    #[test]
    fn errors_name_the_location() {
        let off_grid = FOUR_VOTERS.replace("\"u\": \"9/10\"", "\"u\": \"8/9\"");
        let err = InstanceFile::parse(&off_grid).unwrap().to_instance().unwrap_err();
        assert!(err.to_string().contains("peaks.u"), "{err}");

        let bad_json = FOUR_VOTERS.replace("\"grid\"", "\"grid\" 7");
        let err = InstanceFile::parse(&bad_json).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");

        let zero_den = FOUR_VOTERS.replace("\"3/5\"", "\"3/0\"");
        assert!(InstanceFile::parse(&zero_den).is_err());

        let missing = FOUR_VOTERS.replace("\"v\": \"1/2\"", "\"w\": \"1/2\"");
        let err = InstanceFile::parse(&missing).unwrap().to_instance().unwrap_err();
        assert!(matches!(err, IoError::Model { .. }), "{err}");
    }

    #[test]
    fn records_round_trip_profiles() {
        let instance = InstanceFile::parse(FOUR_VOTERS).unwrap().to_instance().unwrap();
        let profile = instance.truthful_profile();
        let record = ProfileRecord::from_profile(instance.graph(), &profile);
        assert_eq!(record.0["i"].invited, ["u", "v"]);
        assert_eq!(record.to_profile(&instance).unwrap(), profile);

        let mut illegal = record.clone();
        illegal.0.get_mut("j").unwrap().invited = vec!["u".into()];
        assert!(illegal.to_profile(&instance).is_err());
    }

    #[test]
    fn rule_names() {
        let instance = InstanceFile::parse(FOUR_VOTERS).unwrap().to_instance().unwrap();
        assert_eq!(parse_scf("fixed:1/2", &instance).unwrap().name(), "fixed:1/2");
        assert_eq!(parse_scf("direct-median", &instance).unwrap().name(), "direct-median");
        assert!(matches!(parse_scf("borda", &instance), Err(IoError::UnknownScf(_))));
        assert!(parse_scf("fixed:2", &instance).is_err());
    }

    #[test]
    fn gmvs_files() {
        let instance = InstanceFile::parse(FOUR_VOTERS).unwrap().to_instance().unwrap();
        let anonymous: GmvsFile =
            serde_json::from_str(r#"{"anonymous": {"1": ["0", "1"], "2": ["0", "1/2", "1"]}}"#).unwrap();
        assert!(anonymous.to_parameters(instance.graph()).is_ok());
        let explicit: GmvsFile = serde_json::from_str(
            r#"{"explicit": [{"participants": ["i", "j"], "alphas": [
                {"subset": [], "value": "0"}, {"subset": ["i"], "value": "1/2"},
                {"subset": ["j"], "value": "0"}, {"subset": ["i", "j"], "value": "1"}]}]}"#,
        )
        .unwrap();
        assert!(explicit.to_parameters(instance.graph()).is_ok());
        let both: GmvsFile = serde_json::from_str(r#"{"anonymous": {}, "explicit": []}"#).unwrap();
        assert!(both.to_parameters(instance.graph()).is_err());
    }
}
