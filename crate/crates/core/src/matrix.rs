//! The existence matrix: relevance depth against anonymity variant, each
//! cell asking whether some rule is strategy-proof, Pareto efficient,
//! anonymous in that sense and relevant to that depth.
//!
//! A cell is settled by a bundled rule that passes every check, or by the
//! constraint search. Every claim keeps the artifact it rests on.

use std::collections::HashMap;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cspsearch::{
    encode, solve, verify_model, CspError, CspResultFile, CspVerdict, EncodeOptions, SituationKey, SolveOptions,
    SolveStats, TabulatedScf,
};
use crate::io::{parse_scf, InstanceFile, IoError};
use crate::model::Instance;
use crate::properties::{check_all, CheckError, CheckOptions, CheckReport, Property};
use crate::scf::{DepthWeightedMedian, DirectChildrenMedian, SocialChoiceFunction};

pub const MATRIX_SCHEMA_VERSION: u32 = 1;

/// Relevance depth from which the strongest anonymity-free column is an
/// open problem in general; cells there only ever claim a found rule.
pub const OPEN_FROM_DEPTH: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum MatrixError {
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("model for cell {cell} failed verification")]
    UnverifiedModel { cell: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellVerdict {
    Exists,
    NotOnInstance,
    Open,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    /// A bundled rule passed every check.
    Scf { id: String, reports: Vec<CheckReport> },
    /// The search found a table, verified by the checkers.
    Model {
        id: String,
        csp: CspResultFile,
        verification: Vec<CheckReport>,
    },
    /// The search refuted every table.
    Unsat { id: String, csp: CspResultFile },
    Inconclusive {
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stats: Option<SolveStats>,
    },
}

impl Evidence {
    pub fn id(&self) -> Option<&str> {
        match self {
            Evidence::Scf { id, .. } | Evidence::Model { id, .. } | Evidence::Unsat { id, .. } => Some(id),
            Evidence::Inconclusive { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixCell {
    /// Relevance depth `d` of the row.
    #[serde(with = "row_label")]
    pub row: u32,
    #[serde(with = "column_label")]
    pub column: Property,
    pub verdict: CellVerdict,
    pub evidence: Evidence,
}

impl MatrixCell {
    pub fn label(&self) -> String {
        format!("{}/VR-{}", column_name(self.column), self.row)
    }

    fn properties(&self) -> Vec<Property> {
        cell_properties(self.column, self.row)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub schema_version: u32,
    pub instance: InstanceFile,
    #[serde(with = "column_label::list")]
    pub columns: Vec<Property>,
    /// `0..=n` for `n` voters.
    #[serde(with = "row_label::list")]
    pub rows: Vec<u32>,
    pub cells: Vec<MatrixCell>,
}

#[derive(Clone, Debug)]
pub struct MatrixOptions {
    pub check: CheckOptions,
    pub encode: EncodeOptions,
    pub solve: SolveOptions,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        MatrixOptions {
            check: CheckOptions::default(),
            encode: EncodeOptions::default(),
            solve: SolveOptions {
                time_limit: Some(Duration::from_secs(120)),
                ..SolveOptions::default()
            },
        }
    }
}

pub const COLUMNS: [Property; 4] = [Property::An, Property::AnS, Property::AnD, Property::AnSd];

fn column_name(column: Property) -> &'static str {
    match column {
        Property::An => "AN",
        Property::AnS => "AN-S",
        Property::AnD => "AN-D",
        _ => "AN-SD",
    }
}

/// Columns serialize as their table headers.
mod column_label {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{column_name, COLUMNS};
    use crate::properties::Property;

    pub fn serialize<S: Serializer>(column: &Property, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(column_name(*column))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Property, D::Error> {
        let text = String::deserialize(d)?;
        COLUMNS
            .into_iter()
            .find(|c| column_name(*c) == text)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown column {text:?}")))
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(columns: &[Property], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(columns.len()))?;
            for column in columns {
                seq.serialize_element(column_name(*column))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Property>, D::Error> {
            Vec::<String>::deserialize(d)?
                .into_iter()
                .map(|text| {
                    COLUMNS
                        .into_iter()
                        .find(|c| column_name(*c) == text)
                        .ok_or_else(|| serde::de::Error::custom(format!("unknown column {text:?}")))
                })
                .collect()
        }
    }
}

/// Rows serialize as `VR-d` to match the rendered table.
mod row_label {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::properties::Property;

    pub fn serialize<S: Serializer>(row: &u32, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&Property::Vr(*row))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
        match String::deserialize(d)?.parse() {
            Ok(Property::Vr(row)) => Ok(row),
            _ => Err(serde::de::Error::custom("expected a VR-d row label")),
        }
    }

    pub mod list {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        use crate::properties::Property;

        pub fn serialize<S: Serializer>(rows: &[u32], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(rows.len()))?;
            for row in rows {
                seq.serialize_element(&Property::Vr(*row))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u32>, D::Error> {
            Vec::<Property>::deserialize(d)?
                .into_iter()
                .map(|p| match p {
                    Property::Vr(row) => Ok(row),
                    other => Err(serde::de::Error::custom(format!("{other} is not a VR-d row label"))),
                })
                .collect()
        }
    }
}

fn cell_properties(column: Property, row: u32) -> Vec<Property> {
    vec![Property::Sp, Property::Pe, column, Property::Vr(row)]
}

fn short_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

fn candidates() -> Vec<Box<dyn SocialChoiceFunction>> {
    vec![Box::new(DirectChildrenMedian::new()), Box::new(DepthWeightedMedian)]
}

pub fn build_matrix(instance: &Instance, options: &MatrixOptions) -> Result<MatrixReport, MatrixError> {
    let n = instance.graph().len() as u32;
    let rows: Vec<u32> = (0..=n).collect();

    // Every property any cell needs, checked once per bundled rule.
    let mut needed: Vec<Property> = vec![Property::Sp, Property::Pe];
    needed.extend(COLUMNS);
    needed.extend(rows.iter().map(|d| Property::Vr(*d)));
    let rules = candidates();
    let checked: Vec<HashMap<Property, CheckReport>> = rules
        .par_iter()
        .map(|scf| {
            let reports = check_all(scf.as_ref(), instance, &needed, &options.check)?;
            Ok(reports.into_iter().map(|r| (r.property, r)).collect())
        })
        .collect::<Result<_, CheckError>>()?;

    let jobs: Vec<(u32, Property)> = rows
        .iter()
        .flat_map(|row| COLUMNS.iter().map(move |column| (*row, *column)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|(row, column)| settle_cell(instance, options, &rules, &checked, *row, *column))
        .collect::<Result<Vec<_>, MatrixError>>()?;

    Ok(MatrixReport {
        schema_version: MATRIX_SCHEMA_VERSION,
        instance: InstanceFile::from_instance(instance),
        columns: COLUMNS.to_vec(),
        rows,
        cells,
    })
}

fn settle_cell(
    instance: &Instance,
    options: &MatrixOptions,
    rules: &[Box<dyn SocialChoiceFunction>],
    checked: &[HashMap<Property, CheckReport>],
    row: u32,
    column: Property,
) -> Result<MatrixCell, MatrixError> {
    let properties = cell_properties(column, row);
    for (scf, reports) in rules.iter().zip(checked) {
        let cited: Vec<CheckReport> = properties.iter().map(|p| reports[p].clone()).collect();
        if cited.iter().all(CheckReport::passed) {
            return Ok(MatrixCell {
                row,
                column,
                verdict: CellVerdict::Exists,
                evidence: Evidence::Scf {
                    id: scf.name(),
                    reports: cited,
                },
            });
        }
    }

    let open_cell = column == Property::AnSd && row >= OPEN_FROM_DEPTH;
    let csp = encode(instance, &properties, &options.encode)?;
    let (verdict, evidence) = match solve(&csp, &options.solve) {
        Ok(result) if result.verdict == CspVerdict::Sat => {
            let label = format!("{}-vr{row}", column_name(column).to_ascii_lowercase());
            let model = result.model_scf(&csp, &label).expect("sat carries a model");
            let verification = verify_model(instance, &model, &properties)?;
            if !verification.iter().all(CheckReport::passed) {
                return Err(MatrixError::UnverifiedModel {
                    cell: format!("{}/VR-{row}", column_name(column)),
                });
            }
            let file = result.to_json(&csp);
            let id = format!(
                "model-{}",
                short_hash(serde_json::to_string(&file.model).expect("model serializes").as_bytes())
            );
            (
                CellVerdict::Exists,
                Evidence::Model {
                    id,
                    csp: file,
                    verification,
                },
            )
        }
        Ok(result) => {
            let id = result.certificate.clone().expect("unsat carries a certificate");
            let verdict = if open_cell {
                CellVerdict::Open
            } else {
                CellVerdict::NotOnInstance
            };
            (
                verdict,
                Evidence::Unsat {
                    id,
                    csp: result.to_json(&csp),
                },
            )
        }
        Err(CspError::Inconclusive { limit, stats }) => (
            if open_cell {
                CellVerdict::Open
            } else {
                CellVerdict::Inconclusive
            },
            Evidence::Inconclusive {
                reason: format!("search stopped by its {limit} limit"),
                stats: Some(stats),
            },
        ),
        Err(e) if e.is_budget() => (
            if open_cell {
                CellVerdict::Open
            } else {
                CellVerdict::Inconclusive
            },
            Evidence::Inconclusive {
                reason: e.to_string(),
                stats: None,
            },
        ),
        Err(e) => return Err(e.into()),
    };
    Ok(MatrixCell {
        row,
        column,
        verdict,
        evidence,
    })
}

impl MatrixReport {
    pub fn cell(&self, column: Property, row: u32) -> Option<&MatrixCell> {
        self.cells.iter().find(|c| c.column == column && c.row == row)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }

    /// Rows from the deepest relevance requirement down to none, with
    /// ✓ / ✗ / open marks and evidence ids.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| | AN | AN-S | AN-D | AN-SD |\n|---|---|---|---|---|\n");
        for row in self.rows.iter().rev() {
            out.push_str(&format!("| VR-{row} |"));
            for column in &self.columns {
                let text = match self.cell(*column, *row) {
                    None => "".to_string(),
                    Some(cell) => match (cell.verdict, cell.evidence.id()) {
                        (CellVerdict::Exists, Some(id)) => format!("✓ ({id})"),
                        (CellVerdict::NotOnInstance, Some(id)) => format!("✗ ({id})"),
                        (CellVerdict::Open, _) => "open".to_string(),
                        _ => "inconclusive".to_string(),
                    },
                };
                out.push_str(&format!(" {text} |"));
            }
            out.push('\n');
        }
        out
    }

    /// Re-derives every cell from its artifact: bundled rules are checked
    /// again, models are re-verified and refutations re-searched.
    pub fn replay(&self, instance: &Instance, options: &MatrixOptions) -> Result<bool, MatrixError> {
        for cell in &self.cells {
            if !replay_cell(instance, options, cell)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn replay_cell(instance: &Instance, options: &MatrixOptions, cell: &MatrixCell) -> Result<bool, MatrixError> {
    let properties = cell.properties();
    Ok(match &cell.evidence {
        Evidence::Scf { id, reports } => {
            let scf = parse_scf(id, instance)?;
            let again = check_all(scf.as_ref(), instance, &properties, &options.check)?;
            cell.verdict == CellVerdict::Exists && again == *reports && again.iter().all(CheckReport::passed)
        }
        Evidence::Model { csp, .. } => {
            let entries = csp.model.as_deref().unwrap_or_default();
            let mut table = HashMap::new();
            for entry in entries {
                let key = SituationKey::from_record(&entry.situation, instance).map_err(CheckError::from)?;
                table.insert(key, entry.outcome);
            }
            let model = TabulatedScf::new("replay", table);
            cell.verdict == CellVerdict::Exists
                && verify_model(instance, &model, &properties)?
                    .iter()
                    .all(CheckReport::passed)
        }
        Evidence::Unsat { id, .. } => {
            let csp = encode(instance, &properties, &options.encode)?;
            match solve(&csp, &options.solve) {
                Ok(result) => {
                    result.verdict == CspVerdict::Unsat
                        && result.certificate.as_deref() == Some(id.as_str())
                        && matches!(cell.verdict, CellVerdict::NotOnInstance | CellVerdict::Open)
                }
                Err(e) if e.is_budget() => false,
                Err(e) => return Err(e.into()),
            }
        }
        Evidence::Inconclusive { .. } => matches!(cell.verdict, CellVerdict::Inconclusive | CellVerdict::Open),
    })
}
