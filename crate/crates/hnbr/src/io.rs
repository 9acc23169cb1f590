//! CSV ingestion, versioned JSON artifacts, and the synthetic health-survey
//! fixture used by the integration tests.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClampBox, Coefficients, Dataset};

pub const SCHEMA_VERSION: u32 = 1;

/// A column referenced by header name or 0-based position.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    fn resolve(&self, header: Option<&[String]>, width: usize, what: &str) -> Result<usize> {
        match self {
            ColumnRef::Index(i) => {
                if *i >= width {
                    Err(Error::invalid(format!(
                        "{what} column index {i} out of range (row width {width})"
                    )))
                } else {
                    Ok(*i)
                }
            }
            ColumnRef::Name(name) => {
                let header = header.ok_or_else(|| {
                    Error::invalid(format!(
                        "{what} column referenced by name {name:?} but the file has no header"
                    ))
                })?;
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::invalid(format!("missing {what} column {name:?}")))
            }
        }
    }
}

/// How to map a CSV file onto a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub response: ColumnRef,
    /// Explicit feature columns; `None` means every non-response column.
    pub features: Option<Vec<ColumnRef>>,
    pub has_header: bool,
    pub delimiter: u8,
}

impl CsvSchema {
    pub fn by_name(response: &str) -> Self {
        CsvSchema {
            response: ColumnRef::Name(response.to_string()),
            features: None,
            has_header: true,
            delimiter: b',',
        }
    }

    pub fn by_index(response: usize, has_header: bool) -> Self {
        CsvSchema {
            response: ColumnRef::Index(response),
            features: None,
            has_header,
            delimiter: b',',
        }
    }
}

/// Read a CSV file into a validated dataset. Parse failures carry 1-based
/// line numbers.
pub fn read_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .delimiter(schema.delimiter)
        .flexible(false)
        .from_path(path.as_ref())
        .map_err(csv_to_err)?;
    let header: Option<Vec<String>> = if schema.has_header {
        Some(
            rdr.headers()
                .map_err(csv_to_err)?
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
    } else {
        None
    };

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut cols: Option<(usize, Vec<usize>)> = None; // (response, features)
    let mut names: Option<Vec<String>> = None;

    for rec in rdr.records() {
        let rec = rec.map_err(csv_to_err)?;
        let line = rec
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(0);
        if cols.is_none() {
            let width = rec.len();
            let resp = schema.response.resolve(header.as_deref(), width, "response")?;
            let feats: Vec<usize> = match &schema.features {
                Some(list) => {
                    let mut v = Vec::with_capacity(list.len());
                    for c in list {
                        v.push(c.resolve(header.as_deref(), width, "feature")?);
                    }
                    v
                }
                None => (0..width).filter(|&j| j != resp).collect(),
            };
            if feats.is_empty() {
                return Err(Error::invalid("no feature columns"));
            }
            if feats.contains(&resp) {
                return Err(Error::invalid("response column listed among features"));
            }
            if let Some(h) = &header {
                names = Some(feats.iter().map(|&j| h[j].clone()).collect());
            }
            cols = Some((resp, feats));
        }
        let (resp, feats) = cols.as_ref().unwrap();
        let raw = rec.get(*resp).ok_or_else(|| Error::Data {
            line,
            message: "short row".into(),
        })?;
        let count: u64 = raw.trim().parse().map_err(|_| Error::Data {
            line,
            message: format!("response {raw:?} is not a non-negative integer count"),
        })?;
        y.push(count);
        for &j in feats {
            let raw = rec.get(j).ok_or_else(|| Error::Data {
                line,
                message: "short row".into(),
            })?;
            let v: f64 = raw.trim().parse().map_err(|_| Error::Data {
                line,
                message: format!("feature column {j} value {raw:?} is not numeric"),
            })?;
            if !v.is_finite() {
                return Err(Error::Data {
                    line,
                    message: format!("feature column {j} value {v} is not finite"),
                });
            }
            x.push(v);
        }
    }
    let (_, feats) = cols.ok_or_else(|| Error::invalid("CSV contains no data rows"))?;
    let p = feats.len();
    let n = y.len();
    let ds = Dataset::new(x, n, p, y)?;
    match names {
        Some(names) => ds.with_feature_names(names),
        None => Ok(ds),
    }
}

fn csv_to_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                Error::Io(io)
            } else {
                unreachable!()
            }
        }
        _ => {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Data {
                line,
                message: e.to_string(),
            }
        }
    }
}

/// Write a dataset as CSV (features then a trailing `y` response column) with
/// shortest round-trip float formatting.
pub fn write_csv(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(path.as_ref()).map_err(csv_to_err)?;
    let names: Vec<String> = match ds.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..ds.p()).map(|j| format!("x{j}")).collect(),
    };
    let mut header = names;
    header.push("y".to_string());
    w.write_record(&header).map_err(csv_to_err)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(ds.y()[i].to_string());
        w.write_record(&rec).map_err(csv_to_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Shape plus FNV-1a content hash identifying the exact dataset bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub rows: usize,
    pub cols: usize,
    pub content_hash: String,
}

pub fn fingerprint(ds: &Dataset) -> Fingerprint {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for v in ds.x() {
        eat(&v.to_bits().to_le_bytes());
    }
    for v in ds.y() {
        eat(&v.to_le_bytes());
    }
    Fingerprint {
        rows: ds.n(),
        cols: ds.p(),
        content_hash: format!("{h:016x}"),
    }
}

/// Versioned JSON artifact envelope shared by all CLI outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact {
    pub schema_version: u32,
    pub kind: String,
    /// Omitted under fixed seeds so artifacts stay byte-reproducible.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<String>,
    pub config: serde_json::Value,
    pub results: serde_json::Value,
    pub metrics: serde_json::Value,
}

impl Artifact {
    pub fn new(kind: &str, config: serde_json::Value, results: serde_json::Value, metrics: serde_json::Value) -> Self {
        Artifact {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            timestamp: None,
            config,
            results,
            metrics,
        }
    }
}

pub fn save_artifact(path: impl AsRef<Path>, artifact: &Artifact) -> Result<()> {
    let mut f = std::fs::File::create(path.as_ref())?;
    let body = serde_json::to_string_pretty(artifact)?;
    f.write_all(body.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_artifact(path: impl AsRef<Path>) -> Result<Artifact> {
    let body = std::fs::read_to_string(path.as_ref())?;
    let artifact: Artifact = serde_json::from_str(&body)?;
    if artifact.schema_version != SCHEMA_VERSION {
        return Err(Error::invalid(format!(
            "unsupported artifact schema version {} (this build reads version {})",
            artifact.schema_version, SCHEMA_VERSION
        )));
    }
    Ok(artifact)
}

/// Signed mean fitting error n^{-1} sum (y_i - yhat_i) and the mean absolute
/// error, with yhat_i = exp(x_i' theta1).
pub fn fitting_errors(ds: &Dataset, theta1: &[f64]) -> Result<(f64, f64)> {
    if theta1.len() != ds.p() {
        return Err(Error::dims("fitting_errors: coefficient length != p"));
    }
    let clamp = ClampBox::default();
    let mut signed = 0.0;
    let mut abs = 0.0;
    for i in 0..ds.n() {
        let s = clamp.clamp(crate::model::dot(ds.row(i), theta1));
        let resid = ds.y()[i] as f64 - s.exp();
        signed += resid;
        abs += resid.abs();
    }
    let n = ds.n() as f64;
    Ok((signed / n, abs / n))
}

/// Synthetic health-survey-style fixture with heterogeneous dispersion: the
/// real panel is not redistributable, so integration tests run on this
/// generator instead. Returns CSV text with a `Docvis` count response.
pub fn synthetic_health_csv(n: usize, seed: u64) -> Result<String> {
    use crate::simulate;
    let mut rng = simulate::rep_rng(seed, 0);
    let names = ["Age", "Hsat", "Handper", "Educ", "Hhninc", "Working"];
    let p = names.len();
    let raw = simulate::gen_design(n, p, 0.3, &mut rng)?;
    // Mean depends on health satisfaction and age; dispersion on income and
    // working status, so a constant-dispersion fit is misspecified.
    let theta1 = [0.35, -0.5, 0.3, -0.1, 0.0, -0.2];
    let theta2 = [0.0, 0.4, 0.0, 0.0, -0.6, 0.5];
    let clamp = ClampBox::default();
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push_str(",Docvis\n");
    for i in 0..n {
        let row = &raw[i * p..(i + 1) * p];
        let s1 = clamp.clamp(crate::model::dot(row, &theta1)) + 0.4;
        let s2 = clamp.clamp(crate::model::dot(row, &theta2)) - 0.2;
        let y = simulate::sample_nb(s1.exp(), s2.exp(), &mut rng)?;
        for v in row {
            out.push_str(&format!("{v:?},"));
        }
        out.push_str(&format!("{y}\n"));
    }
    Ok(out)
}

/// Convenience: FE metrics of a fitted coefficient pair as a JSON object.
pub fn fe_metrics_json(ds: &Dataset, theta: &Coefficients) -> Result<serde_json::Value> {
    let (signed, mae) = fitting_errors(ds, &theta.theta1)?;
    Ok(serde_json::json!({
        "fe_signed": signed,
        "fe_mean_absolute": mae,
    }))
}
