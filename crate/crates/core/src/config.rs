//! The experiment configuration format.
//!
//! A configuration is a line-oriented file of sections:
//!
//! ```text
//! # comment
//! [experiment]
//! kind = disk-obstruction
//! seed = 7
//!
//! [field A]          # rows: slot i j value  (coefficient of x^i y^j)
//! 0 0 0 1.0
//!
//! [tensor C]         # rows: a b c value     (C^a_bc; antisymmetry is checked)
//! 2 0 1 1.0
//! 2 1 0 -1.0
//!
//! [boundary phi]     # rows: n re im [re im ...], one (re, im) pair per colour
//! 1 0.5 0.0
//!
//! [params]
//! a = A
//! k_max = 4, 10
//! ```
//!
//! Fields, tensors and boundaries are referenced by name from `[params]`.
//! A mode `n` given without its partner `−n` gets the complex conjugate.
//! Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::bch::StructureTensor;
use crate::disk::BoundaryFourier;
use crate::poly::PolyField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    DiskObstruction,
    Transport,
    TriangleOrders,
    BchCompare,
    LoopArea,
    GaugeCheck,
}

impl Kind {
    pub const ALL: [Kind; 6] =
        [Kind::DiskObstruction, Kind::Transport, Kind::TriangleOrders, Kind::BchCompare, Kind::LoopArea, Kind::GaugeCheck];

    pub fn name(self) -> &'static str {
        match self {
            Kind::DiskObstruction => "disk-obstruction",
            Kind::Transport => "transport",
            Kind::TriangleOrders => "triangle-orders",
            Kind::BchCompare => "bch-compare",
            Kind::LoopArea => "loop-area",
            Kind::GaugeCheck => "gauge-check",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Kind::DiskObstruction => "disk extension obstruction: given data, random abelian/nonabelian cases, pure-gauge sweeps",
            Kind::Transport => "strip transport against closed forms, RK4 order, one-dimensional obstruction",
            Kind::TriangleOrders => "triangle integrals I1, I2, I3 on random flat jets with slope fits",
            Kind::BchCompare => "continuous BCH series against the adjoint-log oracle and the second-order term",
            Kind::LoopArea => "BCH logarithm around square loops against the area commutator",
            Kind::GaugeCheck => "gauge covariance of the omega-exterior derivative on random data",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing [experiment]")]
    MissingExperiment,
    #[error("missing key `{0}` in [experiment]")]
    MissingKey(&'static str),
    #[error("line {line}: duplicate name `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: `{name}` is not defined")]
    Undefined { line: usize, name: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue { line: usize, key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

/// Polynomial coefficients as read, with their source lines.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDef {
    pub line: usize,
    pub rows: Vec<(usize, [usize; 3], f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDef {
    pub line: usize,
    pub rows: Vec<(usize, i64, Vec<Complex64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    pub fields: BTreeMap<String, FieldDef>,
    pub tensors: BTreeMap<String, FieldDef>,
    pub boundaries: BTreeMap<String, BoundaryDef>,
    pub params: BTreeMap<String, Param>,
}

enum Section {
    None,
    Experiment,
    Field(String),
    Tensor(String),
    Boundary(String),
    Params,
}

fn syntax(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Syntax { line, msg: msg.into() }
}

fn parse_num<T: FromStr>(tok: &str, line: usize) -> Result<T, ConfigError> {
    tok.parse().map_err(|_| syntax(line, format!("cannot parse `{tok}`")))
}

fn key_value(text: &str, line: usize) -> Result<(String, String), ConfigError> {
    let (k, v) = text.split_once('=').ok_or_else(|| syntax(line, "expected `key = value`"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(syntax(line, "empty key"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut section = Section::None;
    let mut saw_experiment = false;
    let mut name = None;
    let mut kind = None;
    let mut seed = None;
    let mut fields: BTreeMap<String, FieldDef> = BTreeMap::new();
    let mut tensors: BTreeMap<String, FieldDef> = BTreeMap::new();
    let mut boundaries: BTreeMap<String, BoundaryDef> = BTreeMap::new();
    let mut params: BTreeMap<String, Param> = BTreeMap::new();
    let mut names: BTreeMap<String, usize> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        if let Some(header) = body.strip_prefix('[') {
            let header = header.strip_suffix(']').ok_or_else(|| syntax(line, "unterminated section header"))?;
            let mut parts = header.split_whitespace();
            let head = parts.next().unwrap_or("");
            let label = parts.next().map(str::to_string);
            if parts.next().is_some() {
                return Err(syntax(line, "section names are single words"));
            }
            let mut named = |label: Option<String>| -> Result<String, ConfigError> {
                let label = label.ok_or_else(|| syntax(line, format!("[{head}] needs a name")))?;
                if names.insert(label.clone(), line).is_some() {
                    return Err(ConfigError::Duplicate { line, name: label });
                }
                Ok(label)
            };
            section = match head {
                "experiment" | "params" if label.is_some() => return Err(syntax(line, format!("[{head}] takes no name"))),
                "experiment" => {
                    if saw_experiment {
                        return Err(ConfigError::Duplicate { line, name: "experiment".into() });
                    }
                    saw_experiment = true;
                    Section::Experiment
                }
                "params" => Section::Params,
                "field" => {
                    let n = named(label)?;
                    fields.insert(n.clone(), FieldDef { line, rows: Vec::new() });
                    Section::Field(n)
                }
                "tensor" => {
                    let n = named(label)?;
                    tensors.insert(n.clone(), FieldDef { line, rows: Vec::new() });
                    Section::Tensor(n)
                }
                "boundary" => {
                    let n = named(label)?;
                    boundaries.insert(n.clone(), BoundaryDef { line, rows: Vec::new() });
                    Section::Boundary(n)
                }
                other => return Err(syntax(line, format!("unknown section [{other}]"))),
            };
            continue;
        }
        match &section {
            Section::None => return Err(syntax(line, "content before any section")),
            Section::Experiment => {
                let (k, v) = key_value(body, line)?;
                match k.as_str() {
                    "kind" => {
                        kind = Some(v.parse::<Kind>().map_err(|_| ConfigError::BadValue {
                            line,
                            key: k.clone(),
                            msg: format!("unknown kind `{v}`"),
                        })?)
                    }
                    "seed" => seed = Some(parse_num::<u64>(&v, line)?),
                    "name" => name = Some(v),
                    _ => return Err(ConfigError::UnknownKey { line, key: k }),
                }
            }
            Section::Params => {
                let (k, v) = key_value(body, line)?;
                if params.insert(k.clone(), Param { value: v, line }).is_some() {
                    return Err(ConfigError::Duplicate { line, name: k });
                }
            }
            Section::Field(n) | Section::Tensor(n) => {
                let toks: Vec<&str> = body.split_whitespace().collect();
                if toks.len() != 4 {
                    return Err(syntax(line, "expected four entries per row"));
                }
                let ix = [parse_num(toks[0], line)?, parse_num(toks[1], line)?, parse_num(toks[2], line)?];
                let v = parse_num(toks[3], line)?;
                let map = if matches!(section, Section::Field(_)) { &mut fields } else { &mut tensors };
                map.get_mut(n).unwrap().rows.push((line, ix, v));
            }
            Section::Boundary(n) => {
                let toks: Vec<&str> = body.split_whitespace().collect();
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(syntax(line, "expected `n re im [re im ...]`"));
                }
                let mode = parse_num::<i64>(toks[0], line)?;
                let mut vals = Vec::new();
                for pair in toks[1..].chunks(2) {
                    vals.push(Complex64::new(parse_num(pair[0], line)?, parse_num(pair[1], line)?));
                }
                boundaries.get_mut(n).unwrap().rows.push((line, mode, vals));
            }
        }
    }
    if !saw_experiment {
        return Err(ConfigError::MissingExperiment);
    }
    let kind = kind.ok_or(ConfigError::MissingKey("kind"))?;
    Ok(ExperimentSpec {
        name: name.unwrap_or_else(|| kind.name().to_string()),
        kind,
        seed: seed.unwrap_or(0),
        fields,
        tensors,
        boundaries,
        params,
    })
}

impl ExperimentSpec {
    fn bad(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        let line = self.params.get(key).map_or(0, |p| p.line);
        ConfigError::BadValue { line, key: key.into(), msg: msg.into() }
    }

    /// Rejects parameters outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for (k, p) in &self.params {
            if !allowed.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey { line: p.line, key: k.clone() });
            }
        }
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.params.contains_key(key)
    }

    pub fn text(&self, key: &str, default: &str) -> String {
        self.params.get(key).map_or_else(|| default.to_string(), |p| p.value.clone())
    }

    pub fn choice(&self, key: &str, default: &str, options: &[&str]) -> Result<String, ConfigError> {
        let v = self.text(key, default);
        if options.contains(&v.as_str()) {
            Ok(v)
        } else {
            Err(self.bad(key, format!("expected one of {}", options.join(", "))))
        }
    }

    pub fn list<T: FromStr>(&self, key: &str, default: &[T]) -> Result<Vec<T>, ConfigError>
    where
        T: Clone,
    {
        let Some(p) = self.params.get(key) else {
            return Ok(default.to_vec());
        };
        let items: Vec<&str> = p.value.split(',').map(str::trim).collect();
        if items.iter().any(|s| s.is_empty()) {
            return Err(self.bad(key, "empty list entry"));
        }
        items.iter().map(|s| s.parse::<T>().map_err(|_| self.bad(key, format!("cannot parse `{s}`")))).collect()
    }

    pub fn value<T: FromStr + Clone>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        let v = self.list(key, std::slice::from_ref(&default))?;
        if v.len() != 1 {
            return Err(self.bad(key, "expected a single value"));
        }
        Ok(v.into_iter().next().unwrap())
    }

    pub fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v: f64 = self.value(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.bad(key, "must be positive"))
        }
    }

    fn reference(&self, key: &str) -> Option<&Param> {
        self.params.get(key)
    }

    /// The polynomial field referenced by `key`, or zero when the key is absent.
    pub fn field(&self, key: &str, shape: &[usize], min_cap: usize) -> Result<PolyField, ConfigError> {
        let Some(p) = self.reference(key) else {
            return Ok(PolyField::zeros(shape, min_cap));
        };
        let def = self.fields.get(&p.value).ok_or_else(|| ConfigError::Undefined { line: p.line, name: p.value.clone() })?;
        build_field(def, shape, min_cap)
    }

    /// The structure tensor referenced by `key`: a `[tensor]` section or one of
    /// `so3`, `sl2`, `glM`, `zero`.
    pub fn structure(&self, key: &str, n: usize, default: &str) -> Result<StructureTensor, ConfigError> {
        let (name, line) = self.reference(key).map_or((default.to_string(), 0), |p| (p.value.clone(), p.line));
        self.structure_named(&name, n, line, key)
    }

    pub fn structure_named(&self, name: &str, n: usize, line: usize, key: &str) -> Result<StructureTensor, ConfigError> {
        let builtin = match name {
            "so3" => Some(StructureTensor::so3()),
            "sl2" => Some(StructureTensor::sl2()),
            "zero" => Some(StructureTensor::zero(n)),
            s if s.starts_with("gl") => s[2..].parse::<usize>().ok().map(StructureTensor::gl),
            _ => None,
        };
        let t = match builtin {
            Some(t) => t,
            None => {
                let def = self.tensors.get(name).ok_or_else(|| ConfigError::Undefined { line, name: name.to_string() })?;
                let mut c = vec![0.0; n * n * n];
                for &(row, [a, b, cc], v) in &def.rows {
                    if a >= n || b >= n || cc >= n {
                        return Err(syntax(row, format!("index out of range for {n} colours")));
                    }
                    c[(a * n + b) * n + cc] = v;
                }
                StructureTensor::new(n, c).map_err(|e| ConfigError::BadValue { line: def.line, key: name.to_string(), msg: e.to_string() })?
            }
        };
        if t.n() != n {
            return Err(ConfigError::BadValue { line, key: key.into(), msg: format!("`{name}` has {} colours, expected {n}", t.n()) });
        }
        Ok(t)
    }

    /// The boundary referenced by `key`, or zero when absent.
    pub fn boundary(&self, key: &str, colors: usize, n_max: usize) -> Result<BoundaryFourier, ConfigError> {
        let Some(p) = self.reference(key) else {
            return Ok(BoundaryFourier::zero(colors, n_max));
        };
        let def = self.boundaries.get(&p.value).ok_or_else(|| ConfigError::Undefined { line: p.line, name: p.value.clone() })?;
        let width = 2 * n_max + 1;
        let mut modes: Vec<Option<Vec<Complex64>>> = vec![None; width];
        for (row, n, vals) in &def.rows {
            if n.unsigned_abs() as usize > n_max {
                return Err(syntax(*row, format!("mode {n} exceeds n_max = {n_max}")));
            }
            if vals.len() != colors {
                return Err(syntax(*row, format!("expected {colors} (re, im) pairs")));
            }
            let slot = (n + n_max as i64) as usize;
            if modes[slot].is_some() {
                return Err(syntax(*row, format!("mode {n} given twice")));
            }
            modes[slot] = Some(vals.clone());
        }
        let mut full = vec![vec![Complex64::new(0.0, 0.0); colors]; width];
        for (i, m) in modes.iter().enumerate() {
            let mirror = width - 1 - i;
            full[i] = match (m, &modes[mirror]) {
                (Some(v), _) => v.clone(),
                (None, Some(v)) => v.iter().map(|z| z.conj()).collect(),
                (None, None) => full[i].clone(),
            };
        }
        BoundaryFourier::new(n_max, full).map_err(|e| ConfigError::BadValue { line: def.line, key: p.value.clone(), msg: e.to_string() })
    }
}

fn build_field(def: &FieldDef, shape: &[usize], min_cap: usize) -> Result<PolyField, ConfigError> {
    let slots: usize = shape.iter().product();
    let cap = def.rows.iter().map(|(_, [_, i, j], _)| i + j).max().unwrap_or(0).max(min_cap);
    let mut f = PolyField::zeros(shape, cap);
    for &(line, [s, i, j], v) in &def.rows {
        if s >= slots {
            return Err(syntax(line, format!("slot {s} out of range (field has {slots} slots)")));
        }
        f.add_to(s, i, j, v);
    }
    Ok(f)
}
