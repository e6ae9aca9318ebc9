//! Run artifacts. CSV and JSON files are the records; each one is read back
//! and checked against its schema right after it is written.
//!
//! Every CSV starts with a `# schema_version=1 kind=<kind>` line followed by
//! the header row. Numbers use the shortest representation that parses back
//! to the same `f64`; missing values are written as `NaN`.

mod svg;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Environment;
use crate::error::{Error, Result};
use crate::mpc::ClosedLoop;
use crate::reach::{Branch, ReachStep, ReachTube};
use crate::setalg::{Halfspace, SetDocument};
use crate::thermal::{heat_rate, surface_temperature, HeatProfile, ThermalParams};

pub use svg::Plot;

pub const EXPORT_SCHEMA_VERSION: u32 = 1;
pub const STATE_NAMES: [&str; 6] = [
    "altitude",
    "velocity",
    "flight_path_angle",
    "latitude",
    "heading",
    "longitude",
];
pub const INPUT_NAMES: [&str; 2] = ["angle_of_attack", "bank_angle"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Integer,
    Number,
    /// Number or `NaN`.
    OptionalNumber,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub kind: &'static str,
    pub columns: Vec<(String, ColumnKind)>,
}

impl CsvSchema {
    pub fn header(&self) -> Vec<&str> {
        self.columns.iter().map(|(c, _)| c.as_str()).collect()
    }

    fn preamble(&self) -> String {
        format!(
            "# schema_version={EXPORT_SCHEMA_VERSION} kind={}",
            self.kind
        )
    }
}

fn col(name: impl Into<String>, kind: ColumnKind) -> (String, ColumnKind) {
    (name.into(), kind)
}

/// One row per (branch, step): interval hulls of the step-boundary set and
/// of the set over the whole step. Step 0 is the initial set.
pub fn tube_schema() -> CsvSchema {
    use ColumnKind::*;
    let mut columns = vec![
        col("branch", Integer),
        col("step", Integer),
        col("t_start", Number),
        col("t_end", Number),
    ];
    for prefix in ["", "during_"] {
        for s in STATE_NAMES {
            columns.push(col(format!("{prefix}{s}_lo"), Number));
            columns.push(col(format!("{prefix}{s}_hi"), Number));
        }
    }
    for s in STATE_NAMES {
        columns.push(col(format!("error_{s}"), Number));
    }
    CsvSchema {
        kind: "tube",
        columns,
    }
}

pub fn heat_profile_schema() -> CsvSchema {
    use ColumnKind::*;
    let columns = ["t", "h", "v", "Q_dot", "Q_cumulative", "T_surface_K"]
        .into_iter()
        .map(|c| col(c, Number))
        .collect();
    CsvSchema {
        kind: "heat_profile",
        columns,
    }
}

/// Largest heat rate over the sets of each step.
pub fn heat_steps_schema() -> CsvSchema {
    use ColumnKind::*;
    let mut columns = vec![col("step", Integer), col("t", Number)];
    for c in [
        "altitude_lo",
        "altitude_hi",
        "velocity_lo",
        "velocity_hi",
        "Q_dot_max",
        "T_surface_K",
    ] {
        columns.push(col(c, Number));
    }
    CsvSchema {
        kind: "heat_steps",
        columns,
    }
}

/// Points of the curve `Q̇(h, v) = Q̇max`.
pub fn heat_limit_schema() -> CsvSchema {
    use ColumnKind::*;
    let columns = ["v", "h", "Q_dot"]
        .into_iter()
        .map(|c| col(c, Number))
        .collect();
    CsvSchema {
        kind: "heat_limit",
        columns,
    }
}

pub fn closed_loop_schema() -> CsvSchema {
    use ColumnKind::*;
    let mut columns = vec![col("t", Number)];
    columns.extend(STATE_NAMES.iter().map(|s| col(*s, Number)));
    columns.extend(INPUT_NAMES.iter().map(|s| col(*s, OptionalNumber)));
    columns.push(col("J", OptionalNumber));
    columns.push(col("Q_dot", Number));
    columns.push(col("tube_slack", OptionalNumber));
    columns.push(col("solver_status", Text));
    CsvSchema {
        kind: "closed_loop",
        columns,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(usize),
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub fn write_csv(path: &Path, schema: &CsvSchema, rows: &[Vec<Cell>]) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "{}", schema.preamble())?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| export_error(path, e.to_string());
    w.write_record(schema.header()).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render))
            .map_err(csv_err)?;
    }
    w.flush()?;
    drop(w);
    check_csv(path, schema).map(|_| ())
}

fn export_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Export {
        file: path.display().to_string(),
        message: message.into(),
    }
}

/// Re-reads a CSV and checks its preamble, header and every cell. Returns
/// the number of data rows.
pub fn check_csv(path: &Path, schema: &CsvSchema) -> Result<usize> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != schema.preamble() {
        return Err(export_error(
            path,
            format!("expected preamble `{}`", schema.preamble()),
        ));
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = r
        .headers()
        .map_err(|e| export_error(path, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != schema.header() {
        return Err(export_error(path, "header does not match the schema"));
    }
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| export_error(path, format!("row {}: {e}", i + 1)))?;
        for ((name, kind), value) in schema.columns.iter().zip(rec.iter()) {
            let ok = match kind {
                ColumnKind::Integer => value.parse::<usize>().is_ok(),
                ColumnKind::Number => value.parse::<f64>().map_or(false, f64::is_finite),
                ColumnKind::OptionalNumber => value
                    .parse::<f64>()
                    .map_or(false, |x| x.is_finite() || x.is_nan()),
                ColumnKind::Text => !value.is_empty(),
            };
            if !ok {
                return Err(export_error(
                    path,
                    format!("row {}: `{name}` has invalid value `{value}`", i + 1),
                ));
            }
        }
        rows += 1;
    }
    Ok(rows)
}

fn hull_cells(set: &crate::setalg::ConstrainedZonotope, out: &mut Vec<Cell>) -> Result<()> {
    let h = set.interval_hull()?;
    for i in 0..h.dim() {
        out.push(Cell::Num(h.lower[i]));
        out.push(Cell::Num(h.upper[i]));
    }
    Ok(())
}

pub fn write_tube_csv(path: &Path, tube: &ReachTube) -> Result<()> {
    let mut steps: Vec<&ReachStep> = tube.steps.iter().collect();
    steps.sort_by_key(|s| (s.branch, s.index));
    let mut first = vec![Cell::Int(0), Cell::Int(0), Cell::Num(0.0), Cell::Num(0.0)];
    hull_cells(&tube.initial_set, &mut first)?;
    hull_cells(&tube.initial_set, &mut first)?;
    first.extend((0..6).map(|_| Cell::Num(0.0)));
    // Hulls cost a few LPs each; rows are independent.
    let rest: Vec<Result<Vec<Cell>>> = steps
        .par_iter()
        .map(|s| {
            let mut row = vec![
                Cell::Int(s.branch),
                Cell::Int(s.index),
                Cell::Num(s.t_start),
                Cell::Num(s.t_end),
            ];
            hull_cells(&s.set, &mut row)?;
            hull_cells(&s.interval_set, &mut row)?;
            row.extend(s.error_bound.iter().map(|e| Cell::Num(*e)));
            Ok(row)
        })
        .collect();
    let mut rows = vec![first];
    for r in rest {
        rows.push(r?);
    }
    write_csv(path, &tube_schema(), &rows)
}

pub fn write_heat_profile_csv(
    path: &Path,
    profile: &HeatProfile,
    params: &ThermalParams,
) -> Result<()> {
    let rows: Vec<Vec<Cell>> = (0..profile.times.len())
        .map(|i| {
            vec![
                Cell::Num(profile.times[i]),
                Cell::Num(profile.altitudes[i]),
                Cell::Num(profile.velocities[i]),
                Cell::Num(profile.rates[i]),
                Cell::Num(profile.cumulative[i]),
                Cell::Num(surface_temperature(profile.rates[i], params)),
            ]
        })
        .collect();
    write_csv(path, &heat_profile_schema(), &rows)
}

pub fn write_closed_loop_csv(
    path: &Path,
    run: &ClosedLoop,
    params: &ThermalParams,
    env: &Environment,
) -> Result<()> {
    let state_row = |t: f64, x: &DVector<f64>| {
        let mut row = vec![Cell::Num(t)];
        row.extend(x.iter().map(|v| Cell::Num(*v)));
        row
    };
    let mut rows = vec![];
    for r in &run.records {
        let mut row = state_row(r.t, &r.state);
        row.extend(r.input.iter().map(|v| Cell::Num(*v)));
        row.push(Cell::Num(r.cost));
        row.push(Cell::Num(heat_rate(r.state[0], r.state[1], params, env)));
        row.push(Cell::Num(r.tube_slack));
        row.push(Cell::Text(r.status.as_str().into()));
        rows.push(row);
    }
    // The state reached after the last applied input.
    let x = &run.final_state;
    let mut row = state_row(run.final_time, x);
    row.extend([
        Cell::Num(f64::NAN),
        Cell::Num(f64::NAN),
        Cell::Num(f64::NAN),
    ]);
    row.push(Cell::Num(heat_rate(x[0], x[1], params, env)));
    row.push(Cell::Num(run.final_tube_slack));
    row.push(Cell::Text("final".into()));
    rows.push(row);
    write_csv(path, &closed_loop_schema(), &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceDocument {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDocument {
    pub branch: usize,
    pub step: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub set: SetDocument,
    pub interval_set: SetDocument,
    pub linearization_state: Vec<f64>,
    pub linearization_input: Vec<f64>,
    pub error_bound: Vec<f64>,
    pub constraints: Vec<HalfspaceDocument>,
}

/// Full set payloads of a tube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeDocument {
    pub schema_version: u32,
    pub kind: String,
    pub time_step: f64,
    pub horizon: f64,
    pub initial_set: SetDocument,
    pub branches: Vec<Branch>,
    pub steps: Vec<StepDocument>,
    pub split_budget_exhausted: bool,
    pub warnings: Vec<String>,
}

impl From<&ReachTube> for TubeDocument {
    fn from(t: &ReachTube) -> Self {
        let to_vec = |v: &DVector<f64>| v.iter().copied().collect::<Vec<_>>();
        TubeDocument {
            schema_version: EXPORT_SCHEMA_VERSION,
            kind: "reach_tube".into(),
            time_step: t.time_step,
            horizon: t.horizon,
            initial_set: (&t.initial_set).into(),
            branches: t.branches.clone(),
            steps: t
                .steps
                .iter()
                .map(|s| StepDocument {
                    branch: s.branch,
                    step: s.index,
                    t_start: s.t_start,
                    t_end: s.t_end,
                    set: (&s.set).into(),
                    interval_set: (&s.interval_set).into(),
                    linearization_state: to_vec(&s.linearization_state),
                    linearization_input: to_vec(&s.linearization_input),
                    error_bound: to_vec(&s.error_bound),
                    constraints: s
                        .constraints
                        .iter()
                        .map(|h| HalfspaceDocument {
                            normal: to_vec(h.normal()),
                            offset: h.offset(),
                        })
                        .collect(),
                })
                .collect(),
            split_budget_exhausted: t.split_budget_exhausted,
            warnings: t.warnings.clone(),
        }
    }
}

impl TubeDocument {
    pub fn to_tube(&self) -> Result<ReachTube> {
        if self.schema_version != EXPORT_SCHEMA_VERSION || self.kind != "reach_tube" {
            return Err(Error::scenario(
                "schema_version",
                format!(
                    "unsupported tube document (version {}, kind {})",
                    self.schema_version, self.kind
                ),
            ));
        }
        let vec = |v: &[f64]| DVector::from_column_slice(v);
        let steps = self
            .steps
            .iter()
            .map(|s| {
                Ok(ReachStep {
                    branch: s.branch,
                    index: s.step,
                    t_start: s.t_start,
                    t_end: s.t_end,
                    set: s.set.to_set()?,
                    interval_set: s.interval_set.to_set()?,
                    linearization_state: vec(&s.linearization_state),
                    linearization_input: vec(&s.linearization_input),
                    error_bound: vec(&s.error_bound),
                    constraints: s
                        .constraints
                        .iter()
                        .map(|h| Halfspace::new(vec(&h.normal), h.offset))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ReachTube {
            time_step: self.time_step,
            horizon: self.horizon,
            initial_set: self.initial_set.to_set()?,
            steps,
            branches: self.branches.clone(),
            split_budget_exhausted: self.split_budget_exhausted,
            warnings: self.warnings.clone(),
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn write_tube_json(path: &Path, tube: &ReachTube) -> Result<()> {
    let doc = TubeDocument::from(tube);
    write_json(path, &doc)?;
    let back = read_tube_document(path).map_err(|e| export_error(path, e.to_string()))?;
    if back != doc {
        return Err(export_error(
            path,
            "document does not read back identically",
        ));
    }
    Ok(())
}

pub fn read_tube_document(path: &Path) -> Result<TubeDocument> {
    let text = fs::read_to_string(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de)
        .map_err(|e| Error::scenario(e.path().to_string(), e.into_inner().to_string()))
}

pub fn read_tube_json(path: &Path) -> Result<ReachTube> {
    read_tube_document(path)?.to_tube()
}

pub fn write_svg(path: &Path, plot: &Plot) -> Result<()> {
    fs::write(path, plot.render())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setalg::{ConstrainedZonotope, Zonotope};

    fn tiny_tube() -> ReachTube {
        let z: ConstrainedZonotope = Zonotope::from_half_widths(
            DVector::from_vec(vec![7e4, 7600.0, -0.01, 0.0, 1.5, 0.0]),
            &DVector::from_element(6, 0.1),
        )
        .unwrap()
        .into();
        let h = Halfspace::new(DVector::from_element(6, 1.0), 1e6).unwrap();
        let stepped = z.intersect_halfspace(&h).unwrap();
        ReachTube {
            time_step: 1.0,
            horizon: 1.0,
            initial_set: z.clone(),
            steps: vec![ReachStep {
                branch: 0,
                index: 1,
                t_start: 0.0,
                t_end: 1.0,
                set: stepped,
                interval_set: z,
                linearization_state: DVector::zeros(6),
                linearization_input: DVector::zeros(2),
                error_bound: DVector::from_element(6, 1.0 / 3.0),
                constraints: vec![h],
            }],
            branches: vec![Branch {
                id: 0,
                parent: None,
                first_step: 1,
                split_axis: None,
                terminated: None,
            }],
            split_budget_exhausted: false,
            warnings: vec![],
        }
    }

    #[test]
    fn tube_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tube.json");
        let tube = tiny_tube();
        write_tube_json(&path, &tube).unwrap();
        assert_eq!(read_tube_json(&path).unwrap(), tube);
    }

    #[test]
    fn tube_csv_passes_its_own_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tube.csv");
        write_tube_csv(&path, &tiny_tube()).unwrap();
        assert_eq!(check_csv(&path, &tube_schema()).unwrap(), 2);
        let text = fs::read_to_string(&path).unwrap();
        // Shortest round-trip formatting.
        assert!(text.contains("0.3333333333333333"));
    }

    #[test]
    fn check_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let schema = heat_limit_schema();
        write_csv(
            &path,
            &schema,
            &[vec![Cell::Num(1.0), Cell::Num(2.0), Cell::Num(3.0)]],
        )
        .unwrap();
        fs::write(
            &path,
            "# schema_version=1 kind=heat_limit\nv,h,Q_dot\n1,NaN,3\n",
        )
        .unwrap();
        assert!(matches!(
            check_csv(&path, &schema),
            Err(Error::Export { .. })
        ));
        fs::write(
            &path,
            "# schema_version=2 kind=heat_limit\nv,h,Q_dot\n1,2,3\n",
        )
        .unwrap();
        assert!(check_csv(&path, &schema).is_err());
        fs::write(
            &path,
            "# schema_version=1 kind=heat_limit\nv,Q_dot,h\n1,2,3\n",
        )
        .unwrap();
        assert!(check_csv(&path, &schema).is_err());
        fs::write(
            &path,
            "# schema_version=1 kind=heat_limit\nv,h,Q_dot\n1,2\n",
        )
        .unwrap();
        assert!(check_csv(&path, &schema).is_err());
    }
}
