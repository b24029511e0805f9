use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::imputation::PredictorBlock;
use crate::survival::data::{ColumnKind, SurvivalDataset};

/// Role of one CSV column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Time,
    Status,
    Continuous,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnRole,
    /// Labels of a categorical column, in level order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    /// Overrides the dataset-wide missing token for this column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_token: Option<String>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnRole) -> Self {
        Self {
            name: name.into(),
            kind,
            levels: None,
            missing_token: None,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: &[&str]) -> Self {
        Self {
            levels: Some(levels.iter().map(|s| s.to_string()).collect()),
            ..Self::new(name, ColumnRole::Categorical)
        }
    }
}

fn default_token() -> String {
    "NA".into()
}

/// Column layout of a survival CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(default = "default_token")]
    pub missing_token: String,
    pub columns: Vec<ColumnSpec>,
}

impl DatasetSpec {
    pub fn new(columns: Vec<ColumnSpec>) -> Self {
        Self {
            missing_token: default_token(),
            columns,
        }
    }

    /// Spec matching a dataset: `time`, `status`, then its predictors.
    pub fn for_dataset(data: &SurvivalDataset) -> Self {
        let mut columns = vec![
            ColumnSpec::new("time", ColumnRole::Time),
            ColumnSpec::new("status", ColumnRole::Status),
        ];
        for (name, kind) in data.names().iter().zip(data.kinds()) {
            columns.push(match kind {
                ColumnKind::Continuous => ColumnSpec::new(name, ColumnRole::Continuous),
                ColumnKind::Binary => ColumnSpec::new(name, ColumnRole::Binary),
                ColumnKind::Categorical { levels } => ColumnSpec {
                    levels: Some((0..*levels).map(|l| l.to_string()).collect()),
                    ..ColumnSpec::new(name, ColumnRole::Categorical)
                },
            });
        }
        Self::new(columns)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).context_with(|| format!("column spec {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let count = |role| self.columns.iter().filter(|c| c.kind == role).count();
        if count(ColumnRole::Time) != 1 || count(ColumnRole::Status) != 1 {
            return Err(Error::Validation(
                "a dataset spec needs exactly one time and one status column".into(),
            ));
        }
        if self.predictor_columns().next().is_none() {
            return Err(Error::Validation("a dataset spec needs at least one predictor".into()));
        }
        let mut names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate column name `{}`", w[0])));
        }
        for c in &self.columns {
            match (c.kind, &c.levels) {
                (ColumnRole::Categorical, Some(l)) if l.len() >= 2 => {}
                (ColumnRole::Categorical, _) => {
                    return Err(Error::Validation(format!(
                        "categorical column `{}` needs at least two levels",
                        c.name
                    )))
                }
                (_, Some(_)) => {
                    return Err(Error::Validation(format!(
                        "only categorical columns take levels (`{}`)",
                        c.name
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn predictor_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns
            .iter()
            .filter(|c| !matches!(c.kind, ColumnRole::Time | ColumnRole::Status))
    }

    pub fn predictor_kinds(&self) -> Vec<ColumnKind> {
        self.predictor_columns()
            .map(|c| match c.kind {
                ColumnRole::Binary => ColumnKind::Binary,
                ColumnRole::Categorical => ColumnKind::Categorical {
                    levels: c.levels.as_ref().map_or(0, Vec::len),
                },
                _ => ColumnKind::Continuous,
            })
            .collect()
    }

    fn token<'a>(&'a self, c: &'a ColumnSpec) -> &'a str {
        c.missing_token.as_deref().unwrap_or(&self.missing_token)
    }
}

/// Parsed predictor cells of a table.
struct Predictors {
    values: Array2<f64>,
    missing: Array2<bool>,
    time: Vec<f64>,
    status: Vec<bool>,
}

fn parse_table<R: std::io::Read>(reader: R, spec: &DatasetSpec, outcomes: bool) -> Result<Predictors> {
    spec.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let position = |name: &str| header.iter().position(|h| h == name);

    let wanted: Vec<&ColumnSpec> = spec
        .columns
        .iter()
        .filter(|c| outcomes || !matches!(c.kind, ColumnRole::Time | ColumnRole::Status))
        .collect();
    let mut index = Vec::with_capacity(wanted.len());
    for c in &wanted {
        index.push(position(&c.name).ok_or_else(|| {
            Error::Validation(format!("column `{}` is missing from the header", c.name))
        })?);
    }
    for h in header.iter() {
        if !spec.columns.iter().any(|c| c.name == h) {
            log::warn!("ignoring column `{h}` not present in the spec");
        }
    }

    let p = spec.predictor_columns().count();
    let mut values = Vec::new();
    let mut missing = Vec::new();
    let mut time = Vec::new();
    let mut status = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        // data rows are numbered from 1, after the header
        let row = r + 1;
        for (c, &pos) in wanted.iter().zip(&index) {
            let cell = record.get(pos).unwrap_or("");
            let is_na = cell == spec.token(c);
            let parse_err = |message: String| Error::Parse {
                row,
                column: c.name.clone(),
                message,
            };
            let number = || -> Result<f64> {
                let v: f64 = cell.parse().map_err(|_| parse_err(format!("`{cell}` is not a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(format!("`{cell}` is not finite")))
                }
            };
            match c.kind {
                ColumnRole::Time => {
                    if is_na {
                        return Err(Error::Validation(format!("row {row}: missing time")));
                    }
                    let t = number()?;
                    if t <= 0.0 {
                        return Err(Error::Validation(format!(
                            "row {row}: time {t} must be positive"
                        )));
                    }
                    time.push(t);
                }
                ColumnRole::Status => match cell {
                    "0" => status.push(false),
                    "1" => status.push(true),
                    _ => {
                        return Err(Error::Validation(format!(
                            "row {row}: status `{cell}` must be 0 or 1"
                        )))
                    }
                },
                _ if is_na => {
                    values.push(0.0);
                    missing.push(true);
                }
                ColumnRole::Continuous => {
                    values.push(number()?);
                    missing.push(false);
                }
                ColumnRole::Binary => {
                    let v = match cell {
                        "0" => 0.0,
                        "1" => 1.0,
                        _ => {
                            return Err(Error::Validation(format!(
                                "row {row}, column `{}`: binary value `{cell}` must be 0 or 1",
                                c.name
                            )))
                        }
                    };
                    values.push(v);
                    missing.push(false);
                }
                ColumnRole::Categorical => {
                    let levels = c.levels.as_ref().expect("validated");
                    let level = levels.iter().position(|l| l == cell).ok_or_else(|| {
                        Error::Validation(format!(
                            "row {row}, column `{}`: unknown level `{cell}`",
                            c.name
                        ))
                    })?;
                    values.push(level as f64);
                    missing.push(false);
                }
            }
        }
    }
    let n = values.len() / p;
    let values = Array2::from_shape_vec((n, p), values).expect("row-major cells");
    let missing = Array2::from_shape_vec((n, p), missing).expect("row-major cells");
    for (j, c) in spec.predictor_columns().enumerate() {
        let m = missing.column(j).iter().filter(|m| **m).count();
        log::info!("column `{}`: {m} of {n} missing", c.name);
    }
    Ok(Predictors {
        values,
        missing,
        time,
        status,
    })
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        row,
        column: String::new(),
        message: e.to_string(),
    }
}

/// Reads a survival dataset from CSV text.
pub fn read_csv<R: std::io::Read>(reader: R, spec: &DatasetSpec) -> Result<SurvivalDataset> {
    let t = parse_table(reader, spec, true)?;
    log::info!("read {} rows", t.time.len());
    let names = spec.predictor_columns().map(|c| c.name.clone()).collect();
    SurvivalDataset::new(t.time, t.status, t.values, t.missing, spec.predictor_kinds())?.with_names(names)
}

pub fn load_csv(path: &Path, spec: &DatasetSpec) -> Result<SurvivalDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, spec).context_with(|| format!("reading {}", path.display()))
}

/// Reads predictor columns only; outcome columns, if present, are ignored.
pub fn load_predictors_csv(path: &Path, spec: &DatasetSpec) -> Result<PredictorBlock> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let t = parse_table(file, spec, false).context_with(|| format!("reading {}", path.display()))?;
    PredictorBlock::new(t.values, t.missing)
}

/// Writes `data` as CSV in the column order of `spec`.
pub fn write_csv<W: std::io::Write>(writer: W, data: &SurvivalDataset, spec: &DatasetSpec) -> Result<()> {
    spec.validate()?;
    if spec.predictor_kinds() != data.kinds() {
        return Err(Error::Validation("spec does not match the dataset's columns".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(spec.columns.iter().map(|c| c.name.as_str()))
        .map_err(|e| Error::Serialization(e.to_string()))?;
    for i in 0..data.n() {
        let mut j = 0;
        let mut record = Vec::with_capacity(spec.columns.len());
        for c in &spec.columns {
            let cell = match c.kind {
                ColumnRole::Time => data.time()[i].to_string(),
                ColumnRole::Status => (data.status()[i] as u8).to_string(),
                _ => {
                    let cell = if data.is_missing(i, j) {
                        spec.token(c).to_string()
                    } else {
                        let v = data.predictors()[[i, j]];
                        match c.kind {
                            ColumnRole::Categorical => c.levels.as_ref().expect("validated")[v as usize].clone(),
                            ColumnRole::Binary => (v as u8).to_string(),
                            _ => v.to_string(),
                        }
                    };
                    j += 1;
                    cell
                }
            };
            record.push(cell);
        }
        w.write_record(&record).map_err(|e| Error::Serialization(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}

pub fn save_csv(path: &Path, data: &SurvivalDataset, spec: &DatasetSpec) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), data, spec)
}
