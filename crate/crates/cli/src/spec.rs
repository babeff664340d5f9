//! Network spec files.
//!
//! A spec is a JSON object:
//!
//! ```text
//! {
//!   "name": "...", "description": "...",            (optional)
//!   "alphabets": { "v1": 2, "v2": 2, "x0": 2, ... },  (all ten labels)
//!   "channel": p[x0][x1][x2][y0][y1][y2],
//!   "dist": {                                         (optional)
//!     "p_v1": p[v1], "p_v2": p[v2],
//!     "p_x1": p[v1][x1], "p_x2": p[v2][x2],
//!     "p_x0": p[v1][v2][x0],
//!     "q1": p[y1][x1][v1][yh1], "q2": p[y2][x2][v2][yh2]
//!   },
//!   "origin": { ... }                                 (optional, free-form)
//! }
//! ```
//!
//! Every table nests conditioning variables first; the innermost array is one
//! row and must sum to 1 within 1e-9.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cfrelay_core::pmf::NORMALIZATION_TOL;
use cfrelay_core::{Alphabets, Channel, ConditionalTable, FactoredNetworkDistribution, FreeFactor, Var};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub name: Option<String>,
    pub description: Option<String>,
    pub alphabets: Alphabets,
    pub channel: Channel,
    pub dist: Option<FactoredNetworkDistribution>,
    pub origin: Option<Value>,
}

const CHANNEL_VARS: [Var; 6] = [Var::X0, Var::X1, Var::X2, Var::Y0, Var::Y1, Var::Y2];

fn spec_err(msg: impl Into<String>) -> CliError {
    CliError::Spec(msg.into())
}

fn index_path(base: &str, digits: &[usize]) -> String {
    let mut s = base.to_string();
    for d in digits {
        s.push_str(&format!("[{d}]"));
    }
    s
}

fn describe(v: &Value) -> String {
    match v {
        Value::Array(a) => format!("an array of length {}", a.len()),
        Value::Number(_) => "a number".into(),
        Value::String(_) => "a string".into(),
        Value::Bool(_) => "a boolean".into(),
        Value::Null => "null".into(),
        Value::Object(_) => "an object".into(),
    }
}

fn flatten_into(v: &Value, dims: &[usize], path: &mut Vec<usize>, base: &str, out: &mut Vec<f64>) -> Result<()> {
    let Some((&d, rest)) = dims.split_first() else {
        return match v.as_f64() {
            Some(x) if x.is_finite() && x >= 0.0 => {
                out.push(x);
                Ok(())
            }
            Some(x) => Err(spec_err(format!(
                "{}: probability {x} is negative",
                index_path(base, path)
            ))),
            None => Err(spec_err(format!(
                "{}: expected a number, found {}",
                index_path(base, path),
                describe(v)
            ))),
        };
    };
    match v.as_array() {
        Some(items) if items.len() == d => {
            for (i, item) in items.iter().enumerate() {
                path.push(i);
                flatten_into(item, rest, path, base, out)?;
                path.pop();
            }
            Ok(())
        }
        _ => Err(spec_err(format!(
            "{}: expected an array of length {d}, found {}",
            index_path(base, path),
            describe(v)
        ))),
    }
}

/// Flatten a nested array of shape `dims` (row-major) and check that every
/// innermost row sums to 1.
fn read_table(v: &Value, dims: &[usize], base: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(dims.iter().product());
    flatten_into(v, dims, &mut Vec::new(), base, &mut out)?;
    check_rows(&out, dims, base)?;
    Ok(out)
}

fn digits_of(mut r: usize, dims: &[usize]) -> Vec<usize> {
    let mut d = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        d[k] = r % dims[k];
        r /= dims[k];
    }
    d
}

/// Nested array of shape `dims` from a row-major flat table.
fn nest(flat: &[f64], dims: &[usize]) -> Value {
    match dims.split_first() {
        None => Value::from(flat[0]),
        Some((&d, rest)) => {
            let step = flat.len() / d;
            Value::Array((0..d).map(|i| nest(&flat[i * step..(i + 1) * step], rest)).collect())
        }
    }
}

fn factor_key(f: FreeFactor) -> &'static str {
    match f {
        FreeFactor::PV1 => "p_v1",
        FreeFactor::PV2 => "p_v2",
        FreeFactor::PX1 => "p_x1",
        FreeFactor::PX2 => "p_x2",
        FreeFactor::PX0 => "p_x0",
        FreeFactor::Q1 => "q1",
        FreeFactor::Q2 => "q2",
    }
}

fn factor_dims(f: FreeFactor, a: &Alphabets) -> Vec<usize> {
    let (given, out) = f.layout();
    given.iter().chain(std::iter::once(&out)).map(|&v| a.size(v)).collect()
}

fn read_alphabets(v: Option<&Value>) -> Result<Alphabets> {
    let obj = v
        .ok_or_else(|| spec_err("missing field 'alphabets'"))?
        .as_object()
        .ok_or_else(|| spec_err("alphabets: expected an object of label -> size"))?;
    if let Some(k) = obj.keys().find(|k| Var::from_label(k).is_none()) {
        return Err(spec_err(format!(
            "alphabets.{k}: unknown variable; labels are v1 v2 x0 x1 x2 y1 y2 yh1 yh2 y0"
        )));
    }
    let mut sizes = [0usize; 10];
    for var in Var::ALL {
        let label = var.label();
        let raw = obj
            .get(label)
            .ok_or_else(|| spec_err(format!("alphabets.{label}: missing")))?;
        match raw.as_u64() {
            Some(n) if n >= 1 => sizes[var.index()] = n as usize,
            _ => {
                return Err(spec_err(format!(
                    "alphabets.{label}: expected a positive integer, found {raw}"
                )))
            }
        }
    }
    Alphabets::new(sizes).map_err(|e| spec_err(e.to_string()))
}

fn read_dist(v: &Value, alphabets: Alphabets, channel: &Channel) -> Result<FactoredNetworkDistribution> {
    let obj = v
        .as_object()
        .ok_or_else(|| spec_err("dist: expected an object of factor tables"))?;
    let known: Vec<&str> = FreeFactor::ALL.iter().map(|&f| factor_key(f)).collect();
    if let Some(k) = obj.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(spec_err(format!(
            "dist.{k}: unknown factor; expected one of {}",
            known.join(" ")
        )));
    }
    let mut tables = BTreeMap::new();
    for f in FreeFactor::ALL {
        let key = factor_key(f);
        let raw = obj.get(key).ok_or_else(|| spec_err(format!("dist.{key}: missing")))?;
        let probs = read_table(raw, &factor_dims(f, &alphabets), &format!("dist.{key}"))?;
        tables.insert(f, f.table(&alphabets, probs).map_err(|e| spec_err(e.to_string()))?);
    }
    let dist = FactoredNetworkDistribution::from_fn(alphabets, channel.clone(), |f, _| tables.remove(&f).unwrap());
    dist.check().map_err(|e| spec_err(e.to_string()))?;
    Ok(dist)
}

fn optional_string(obj: &Map<String, Value>, key: &str) -> Result<Option<String>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(spec_err(format!("{key}: expected a string, found {}", describe(other)))),
    }
}

impl NetworkSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// `source` names the input in parse errors.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: source.to_string(),
            message: e.to_string(),
        })?;
        let obj = root
            .as_object()
            .ok_or_else(|| spec_err("top level: expected a JSON object"))?;
        let allowed = ["name", "description", "alphabets", "channel", "dist", "origin"];
        if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(spec_err(format!("{k}: unknown field")));
        }
        let alphabets = read_alphabets(obj.get("alphabets"))?;
        let dims: Vec<usize> = CHANNEL_VARS.iter().map(|&v| alphabets.size(v)).collect();
        let raw = obj.get("channel").ok_or_else(|| spec_err("missing field 'channel'"))?;
        // rows of the channel are whole conditional pmfs over (y0, y1, y2)
        let mut row_dims = dims[..3].to_vec();
        row_dims.push(dims[3..].iter().product());
        let mut flat = Vec::with_capacity(dims.iter().product());
        flatten_into(raw, &dims, &mut Vec::new(), "channel", &mut flat)?;
        check_rows(&flat, &row_dims, "channel")?;
        let channel = Channel::new(&alphabets, flat).map_err(|e| spec_err(e.to_string()))?;
        let dist = match obj.get("dist") {
            None | Some(Value::Null) => None,
            Some(v) => Some(read_dist(v, alphabets, &channel)?),
        };
        Ok(NetworkSpec {
            name: optional_string(obj, "name")?,
            description: optional_string(obj, "description")?,
            alphabets,
            channel,
            dist,
            origin: obj.get("origin").cloned(),
        })
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or("(unnamed)")
    }

    /// The stored distribution, or an error pointing at `optimize`.
    pub fn require_dist(&self) -> Result<&FactoredNetworkDistribution> {
        self.dist.as_ref().ok_or_else(|| {
            CliError::Usage(format!(
                "spec '{}' has no 'dist'; run `cfrelay optimize <spec> --out <file>` to produce one",
                self.display_name()
            ))
        })
    }

    /// Pretty JSON in the file format above, with a trailing newline.
    pub fn to_json(&self) -> String {
        let a = &self.alphabets;
        let dims: Vec<usize> = CHANNEL_VARS.iter().map(|&v| a.size(v)).collect();
        let file = SpecFile {
            name: self.name.as_deref(),
            description: self.description.as_deref(),
            alphabets: AlphabetsFile {
                v1: a.size(Var::V1),
                v2: a.size(Var::V2),
                x0: a.size(Var::X0),
                x1: a.size(Var::X1),
                x2: a.size(Var::X2),
                y1: a.size(Var::Y1),
                y2: a.size(Var::Y2),
                yh1: a.size(Var::Yh1),
                yh2: a.size(Var::Yh2),
                y0: a.size(Var::Y0),
            },
            channel: nest(self.channel.table().probs(), &dims),
            dist: self.dist.as_ref().map(|d| DistFile {
                p_v1: factor_value(d, FreeFactor::PV1),
                p_v2: factor_value(d, FreeFactor::PV2),
                p_x1: factor_value(d, FreeFactor::PX1),
                p_x2: factor_value(d, FreeFactor::PX2),
                p_x0: factor_value(d, FreeFactor::PX0),
                q1: factor_value(d, FreeFactor::Q1),
                q2: factor_value(d, FreeFactor::Q2),
            }),
            origin: self.origin.as_ref(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("spec serializes");
        s.push('\n');
        s
    }
}

fn check_rows(flat: &[f64], row_dims: &[usize], base: &str) -> Result<()> {
    let row_len = *row_dims.last().unwrap();
    let outer = &row_dims[..row_dims.len() - 1];
    for (r, row) in flat.chunks(row_len).enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(spec_err(format!(
                "{}: row sums to {sum}, expected 1 within {NORMALIZATION_TOL:e}",
                index_path(base, &digits_of(r, outer))
            )));
        }
    }
    Ok(())
}

fn factor_value(d: &FactoredNetworkDistribution, f: FreeFactor) -> Value {
    let t: &ConditionalTable = d.factor(f);
    nest(t.probs(), &factor_dims(f, &d.alphabets))
}

#[derive(Serialize)]
struct SpecFile<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    description: Option<&'a str>,
    alphabets: AlphabetsFile,
    channel: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    dist: Option<DistFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    origin: Option<&'a Value>,
}

#[derive(Serialize)]
struct AlphabetsFile {
    v1: usize,
    v2: usize,
    x0: usize,
    x1: usize,
    x2: usize,
    y1: usize,
    y2: usize,
    yh1: usize,
    yh2: usize,
    y0: usize,
}

#[derive(Serialize)]
struct DistFile {
    p_v1: Value,
    p_v2: Value,
    p_x1: Value,
    p_x2: Value,
    p_x0: Value,
    q1: Value,
    q2: Value,
}
