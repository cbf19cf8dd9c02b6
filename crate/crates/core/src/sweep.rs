//! Parameter sweeps behind the command-line tool, emitted as CSV or JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::fock::{parity_of, subtracted_cv_state, CutoffPolicy, FockVector, Parity, Sign};
use crate::metrology as m;
use crate::oracle::{self, CheckVerdict, GridConfig};
use crate::scalar::{squeeze_from_db, tap_from_transmittance, SqueezeSpec, TapSpec};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SIGNIFICANT_DIGITS: usize = 12;
/// Width of the bracket at which crossing-point bisection stops, in dB.
pub const CROSSING_TOL_DB: f64 = 0.01;
pub const DEFAULT_TRANSMITTANCES: [f64; 3] = [0.8, 0.9, 0.95];
pub const DEFAULT_PAIRS: [(usize, usize); 6] = [(2, 2), (4, 4), (10, 10), (4, 1), (8, 3), (10, 6)];
pub const DEFAULT_ONE_SIDED: [usize; 4] = [2, 4, 8, 10];
pub const DEFAULT_INTENSITY_PAIRS: [(usize, usize); 4] = [(4, 1), (8, 3), (10, 6), (10, 0)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisVariable {
    SDb,
    Phase,
}

impl AxisVariable {
    pub fn column(&self) -> &'static str {
        match self {
            AxisVariable::SDb => "S_db",
            AxisVariable::Phase => "phase",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepAxis {
    pub variable: AxisVariable,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepAxis {
    pub fn s_db(start: f64, stop: f64, step: f64) -> Self {
        Self {
            variable: AxisVariable::SDb,
            start,
            stop,
            step,
        }
    }

    pub fn phase(start: f64, stop: f64, step: f64) -> Self {
        Self {
            variable: AxisVariable::Phase,
            start,
            stop,
            step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.start.is_finite() && self.stop.is_finite() && self.step.is_finite();
        if !finite || self.start > self.stop || self.step <= 0.0 {
            return Err(Error::Config(format!(
                "axis {} needs finite start <= stop and step > 0 (got {}, {}, {})",
                self.variable.column(),
                self.start,
                self.stop,
                self.step
            )));
        }
        if self.variable == AxisVariable::SDb && self.start < 0.0 {
            return Err(Error::Config(format!(
                "squeezing axis starts below 0 dB ({})",
                self.start
            )));
        }
        Ok(())
    }

    /// `start + k·step` up to `stop`, with a relative slack of 1e-9 steps.
    pub fn points(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if count > 10_000_000 {
            return Err(Error::Config(format!("axis has {count} points")));
        }
        Ok((0..count)
            .map(|k| self.start + k as f64 * self.step)
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Qcr,
    QcrOneSided,
    Gain,
    Intensity,
}

impl CommandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandKind::Qcr => "qcr",
            CommandKind::QcrOneSided => "qcr-one-sided",
            CommandKind::Gain => "gain",
            CommandKind::Intensity => "intensity",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRequest {
    pub kind: CommandKind,
    pub axis: SweepAxis,
    pub transmittances: Vec<f64>,
    pub pairs: Vec<(usize, usize)>,
    pub n_list: Vec<usize>,
    /// Fixed phase for squeezing sweeps of the intensity command.
    pub phase: f64,
    /// Fixed squeezing (dB) for phase sweeps.
    pub s_db: f64,
}

impl SweepRequest {
    pub fn new(kind: CommandKind, axis: SweepAxis) -> Self {
        Self {
            kind,
            axis,
            transmittances: DEFAULT_TRANSMITTANCES.to_vec(),
            pairs: match kind {
                CommandKind::Intensity => DEFAULT_INTENSITY_PAIRS.to_vec(),
                _ => DEFAULT_PAIRS.to_vec(),
            },
            n_list: DEFAULT_ONE_SIDED.to_vec(),
            phase: std::f64::consts::FRAC_PI_2,
            s_db: 5.0,
        }
    }

    fn validate(&self) -> Result<()> {
        self.axis.validate()?;
        if self.transmittances.is_empty() {
            return Err(Error::Config("no transmittance given".into()));
        }
        for &t in &self.transmittances {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("transmittance {t} outside (0, 1]")));
            }
        }
        let wants_s_axis = matches!(
            self.kind,
            CommandKind::Qcr | CommandKind::QcrOneSided | CommandKind::Gain
        );
        if wants_s_axis && self.axis.variable != AxisVariable::SDb {
            return Err(Error::Config(format!(
                "{} sweeps the squeezing axis only",
                self.kind.as_str()
            )));
        }
        match self.kind {
            CommandKind::QcrOneSided => {
                if self.n_list.is_empty() {
                    return Err(Error::Config("empty n list".into()));
                }
            }
            _ => {
                if self.pairs.is_empty() {
                    return Err(Error::Config("empty pair list".into()));
                }
            }
        }
        if self.kind == CommandKind::Intensity {
            if let Some(&(n, _)) = self.pairs.iter().find(|(a, b)| a == b) {
                return Err(Error::Config(format!(
                    "pair ({n},{n}) has equal subtraction counts: the mean intensity difference is zero at \
                     every phase, so the error-propagation sensitivity diverges"
                )));
            }
            if self.axis.variable == AxisVariable::Phase
                && !(self.s_db.is_finite() && self.s_db >= 0.0)
            {
                return Err(Error::Config(format!(
                    "fixed squeezing {} dB must be >= 0",
                    self.s_db
                )));
            }
            if !self.phase.is_finite() {
                return Err(Error::Config("fixed phase must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Parses `"n1,n2;n1,n2;…"`.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, usize)>> {
    let bad = |part: &str| {
        Error::Config(format!(
            "malformed pair {part:?}; expected \"n1,n2;n1,n2;...\""
        ))
    };
    text.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|part| {
            let mut it = part.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(bad(part));
            };
            Ok((
                a.parse().map_err(|_| bad(part))?,
                b.parse().map_err(|_| bad(part))?,
            ))
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(Error::Config("empty pair list".into()))
            } else {
                Ok(v)
            }
        })
}

/// Parses a comma-separated list.
pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    let v: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .map_err(|_| Error::Config(format!("malformed {what} entry {p:?}")))
        })
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::Config(format!("empty {what} list")));
    }
    Ok(v)
}

/// `%g`-style rendering with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let p = SIGNIFICANT_DIGITS;
    let sci = format!("{:.*e}", p - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= p as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Value(f64),
    /// Infinite by symmetry or vanishing signal.
    Divergent,
    /// Not defined at this point, such as a ratio of two divergences.
    Undefined,
}

impl Cell {
    fn from_uncertainty(u: m::Uncertainty) -> Self {
        match u {
            m::Uncertainty::Finite(v) => Cell::Value(v),
            m::Uncertainty::Divergent { .. } => Cell::Divergent,
        }
    }

    fn from_value(v: f64) -> Self {
        if v.is_nan() {
            Cell::Undefined
        } else if v == f64::INFINITY {
            Cell::Divergent
        } else {
            Cell::Value(v)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        match *self {
            Cell::Value(v) => format_number(v),
            Cell::Divergent => "inf".into(),
            Cell::Undefined => "nan".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Ordered `key: value` lines: tool version, parameter echo, findings.
    pub metadata: Vec<(String, String)>,
}

impl SweepTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut meta = Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), Value::String(v.clone()));
        }
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                Value::Array(
                    row.iter()
                        .map(|c| match c {
                            Cell::Value(v) => format_number(*v)
                                .parse::<f64>()
                                .ok()
                                .and_then(serde_json::Number::from_f64)
                                .map(Value::Number)
                                .unwrap_or(Value::Null),
                            other => Value::String(other.render()),
                        })
                        .collect(),
                )
            })
            .collect();
        let doc = json!({ "columns": self.columns, "metadata": meta, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => Ok(self.to_csv()),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn write(&self, format: OutputFormat, path: &Path) -> Result<()> {
        std::fs::write(path, self.render(format)?)?;
        Ok(())
    }
}

fn pair_tag(n1: usize, n2: usize, t: f64) -> String {
    format!("{n1}_{n2}_t{t}")
}

fn base_metadata(req: &SweepRequest) -> Vec<(String, String)> {
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut meta = vec![
        ("tool".to_string(), format!("qmzi {TOOL_VERSION}")),
        ("command".to_string(), req.kind.as_str().to_string()),
        (
            "axis".to_string(),
            format!(
                "{} start={} stop={} step={}",
                req.axis.variable.column(),
                req.axis.start,
                req.axis.stop,
                req.axis.step
            ),
        ),
        ("t".to_string(), list(&req.transmittances)),
    ];
    match req.kind {
        CommandKind::QcrOneSided => meta.push((
            "n_list".to_string(),
            req.n_list
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
        )),
        _ => meta.push((
            "pairs".to_string(),
            req.pairs
                .iter()
                .map(|(a, b)| format!("{a},{b}"))
                .collect::<Vec<_>>()
                .join(";"),
        )),
    }
    if req.kind == CommandKind::Intensity {
        match req.axis.variable {
            AxisVariable::Phase => meta.push(("fixed_S_db".to_string(), req.s_db.to_string())),
            AxisVariable::SDb => meta.push(("fixed_phase".to_string(), req.phase.to_string())),
        }
    }
    meta
}

fn setup(s_db: f64, t: f64) -> Result<(SqueezeSpec, TapSpec)> {
    let spec = squeeze_from_db(s_db)?;
    let tap = tap_from_transmittance(t, &spec)?;
    Ok((spec, tap))
}

/// QCR bound of the subtracted pair at `s_db`.
pub fn dphi_pair(s_db: f64, t: f64, n1: usize, n2: usize) -> Result<m::Uncertainty> {
    let (spec, tap) = setup(s_db, t)?;
    m::qcr_bound(m::qfi_pair(&spec, &tap, n1, n2)?)
}

pub fn dphi_one_sided(s_db: f64, t: f64, n1: usize) -> Result<m::Uncertainty> {
    let (spec, tap) = setup(s_db, t)?;
    m::qcr_bound(m::qfi_one_sided(&spec, &tap, n1)?)
}

pub fn dphi_smsv(s_db: f64) -> Result<m::Uncertainty> {
    m::qcr_bound(m::qfi_smsv_pair(&squeeze_from_db(s_db)?))
}

/// First crossing from `f < 0` to `f >= 0` along the sampled axis, refined
/// by bisection to [`CROSSING_TOL_DB`]. Points where `f` is undefined are
/// skipped.
pub fn find_crossing<F>(axis: &[f64], mut f: F) -> Result<Option<f64>>
where
    F: FnMut(f64) -> Result<Option<f64>>,
{
    let mut prev: Option<(f64, f64)> = None;
    for &x in axis {
        let Some(fx) = f(x)? else {
            prev = None;
            continue;
        };
        if let Some((px, pf)) = prev {
            if pf < 0.0 && fx >= 0.0 {
                let (mut lo, mut hi) = (px, x);
                while hi - lo > CROSSING_TOL_DB {
                    let mid = 0.5 * (lo + hi);
                    match f(mid)? {
                        Some(v) if v < 0.0 => lo = mid,
                        Some(_) => hi = mid,
                        None => break,
                    }
                }
                return Ok(Some(0.5 * (lo + hi)));
            }
        }
        prev = Some((x, fx));
    }
    Ok(None)
}

fn difference(a: m::Uncertainty, b: m::Uncertainty) -> Option<f64> {
    match (a.finite(), b.finite()) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    }
}

fn render_opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_else(|| "none".to_string())
}

pub fn cmd_qcr(req: &SweepRequest) -> Result<SweepTable> {
    req.validate()?;
    let axis = req.axis.points()?;
    let mut columns = vec!["S_db".to_string()];
    for &t in &req.transmittances {
        for &(a, b) in &req.pairs {
            let tag = pair_tag(a, b, t);
            columns.push(format!("dphi_{tag}"));
            columns.push(format!("hl_{tag}"));
            columns.push(format!("sql_{tag}"));
        }
    }
    columns.push("dphi_smsv_smsv".to_string());
    let mut rows = Vec::with_capacity(axis.len());
    for &s_db in &axis {
        let mut row = vec![Cell::Value(s_db)];
        for &t in &req.transmittances {
            let (spec, tap) = setup(s_db, t)?;
            for &(a, b) in &req.pairs {
                let r = m::report(&m::InputFamily::subtracted_pair(spec, tap, a, b))?;
                row.push(Cell::from_uncertainty(r.qcr));
                row.push(Cell::from_value(r.hl_ref));
                row.push(Cell::from_value(r.sql_ref));
            }
        }
        row.push(Cell::from_uncertainty(dphi_smsv(s_db)?));
        rows.push(row);
    }
    let mut metadata = base_metadata(req);
    for &t in &req.transmittances {
        for &(a, b) in &req.pairs {
            let s2 = find_crossing(&axis, |s| {
                Ok(difference(dphi_pair(s, t, a, b)?, dphi_smsv(s)?))
            })?;
            metadata.push((
                format!("crossing_s2[{}]", pair_tag(a, b, t)),
                render_opt(s2),
            ));
        }
    }
    Ok(SweepTable {
        columns,
        rows,
        metadata,
    })
}

pub fn cmd_qcr_one_sided(req: &SweepRequest) -> Result<SweepTable> {
    req.validate()?;
    let axis = req.axis.points()?;
    let mut columns = vec!["S_db".to_string()];
    for &t in &req.transmittances {
        for &n in &req.n_list {
            let tag = format!("{n}_smsv_t{t}");
            columns.push(format!("dphi_{tag}"));
            columns.push(format!("hl_{tag}"));
            columns.push(format!("sql_{tag}"));
        }
    }
    columns.push("dphi_smsv_smsv".to_string());
    let mut rows = Vec::with_capacity(axis.len());
    for &s_db in &axis {
        let mut row = vec![Cell::Value(s_db)];
        for &t in &req.transmittances {
            let (spec, tap) = setup(s_db, t)?;
            for &n in &req.n_list {
                let r = m::report(&m::InputFamily::subtracted_plus_smsv(spec, tap, n))?;
                row.push(Cell::from_uncertainty(r.qcr));
                row.push(Cell::from_value(r.hl_ref));
                row.push(Cell::from_value(r.sql_ref));
            }
        }
        row.push(Cell::from_uncertainty(dphi_smsv(s_db)?));
        rows.push(row);
    }
    let mut metadata = base_metadata(req);
    for &t in &req.transmittances {
        for &n in &req.n_list {
            let s2 = find_crossing(&axis, |s| {
                Ok(difference(dphi_one_sided(s, t, n)?, dphi_smsv(s)?))
            })?;
            metadata.push((format!("crossing_s2[{n}_smsv_t{t}]"), render_opt(s2)));
        }
    }
    Ok(SweepTable {
        columns,
        rows,
        metadata,
    })
}

fn gain_cell(a: m::Uncertainty, b: m::Uncertainty) -> Result<Cell> {
    Ok(match (a.finite(), b.finite()) {
        (Some(x), Some(y)) => Cell::Value(m::gain_db(x, y)?),
        _ => Cell::Undefined,
    })
}

pub fn cmd_gain(req: &SweepRequest) -> Result<SweepTable> {
    req.validate()?;
    let axis = req.axis.points()?;
    let mut columns = vec!["S_db".to_string()];
    for &t in &req.transmittances {
        for &(a, b) in &req.pairs {
            let tag = pair_tag(a, b, t);
            columns.push(format!("gain_vs_one_sided_{tag}"));
            columns.push(format!("gain_vs_smsv_{tag}"));
        }
    }
    let mut rows = Vec::with_capacity(axis.len());
    for &s_db in &axis {
        let mut row = vec![Cell::Value(s_db)];
        let smsv = dphi_smsv(s_db)?;
        for &t in &req.transmittances {
            for &(a, b) in &req.pairs {
                let pair = dphi_pair(s_db, t, a, b)?;
                row.push(gain_cell(pair, dphi_one_sided(s_db, t, a)?)?);
                row.push(gain_cell(pair, smsv)?);
            }
        }
        rows.push(row);
    }
    let mut table = SweepTable {
        columns,
        rows,
        metadata: base_metadata(req),
    };
    let mut found = Vec::new();
    for name in table.columns.iter().skip(1) {
        let k = table.column_index(name).expect("own column");
        let best = table
            .rows
            .iter()
            .filter_map(|r| Some((r[0].value()?, r[k].value()?)))
            .fold(None, |acc: Option<(f64, f64)>, (s, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((s, g)),
            });
        let text = match best {
            Some((s, g)) => format!("{} at S_db={}", format_number(g), format_number(s)),
            None => "none".to_string(),
        };
        found.push((format!("max[{name}]"), text));
    }
    table.metadata.extend(found);
    Ok(table)
}

pub fn cmd_intensity(req: &SweepRequest) -> Result<SweepTable> {
    req.validate()?;
    let axis = req.axis.points()?;
    let mut columns = vec![req.axis.variable.column().to_string()];
    for &t in &req.transmittances {
        for &(a, b) in &req.pairs {
            columns.push(format!("dphi_detect_{}", pair_tag(a, b, t)));
        }
    }
    columns.push("dphi_smsv_smsv".to_string());
    let mut rows = Vec::with_capacity(axis.len());
    for &x in &axis {
        let (s_db, phase) = match req.axis.variable {
            AxisVariable::SDb => (x, req.phase),
            AxisVariable::Phase => (req.s_db, x),
        };
        let mut row = vec![Cell::Value(x)];
        for &t in &req.transmittances {
            let (spec, tap) = setup(s_db, t)?;
            for &(a, b) in &req.pairs {
                row.push(Cell::from_uncertainty(
                    m::detection_sensitivity(&spec, &tap, a, b, phase)?.dphi,
                ));
            }
        }
        row.push(Cell::from_uncertainty(dphi_smsv(s_db)?));
        rows.push(row);
    }
    let mut table = SweepTable {
        columns,
        rows,
        metadata: base_metadata(req),
    };
    let reference = table.columns.len() - 1;
    let mut found = Vec::new();
    for k in 1..reference {
        let name = &table.columns[k];
        let points: Vec<(f64, f64, Option<f64>)> = table
            .rows
            .iter()
            .filter_map(|r| Some((r[0].value()?, r[k].value()?, r[reference].value())))
            .collect();
        match req.axis.variable {
            AxisVariable::Phase => {
                let best =
                    points
                        .iter()
                        .fold(None, |acc: Option<(f64, f64)>, &(x, v, _)| match acc {
                            Some((_, bv)) if bv <= v => acc,
                            _ => Some((x, v)),
                        });
                let text = best
                    .map(|(x, v)| format!("{} at phase={}", format_number(v), format_number(x)))
                    .unwrap_or_else(|| "none".to_string());
                found.push((format!("min[{name}]"), text));
            }
            AxisVariable::SDb => {
                let below: Vec<f64> = points
                    .iter()
                    .filter(|(_, v, r)| r.is_some_and(|r| *v < r))
                    .map(|p| p.0)
                    .collect();
                let text = match (below.first(), below.last()) {
                    (Some(a), Some(b)) => format!(
                        "{} points between S_db={} and S_db={}",
                        below.len(),
                        format_number(*a),
                        format_number(*b)
                    ),
                    _ => "none".to_string(),
                };
                found.push((format!("below_smsv_qcr[{name}]"), text));
            }
        }
    }
    table.metadata.extend(found);
    Ok(table)
}

pub fn run_sweep(req: &SweepRequest) -> Result<SweepTable> {
    match req.kind {
        CommandKind::Qcr => cmd_qcr(req),
        CommandKind::QcrOneSided => cmd_qcr_one_sided(req),
        CommandKind::Gain => cmd_gain(req),
        CommandKind::Intensity => cmd_intensity(req),
    }
}

/// Number of leading amplitudes echoed by [`cmd_state_info`].
pub const LEADING_AMPLITUDES: usize = 8;

/// Photon statistics and leading amplitudes of heralded states.
pub fn cmd_state_info(
    s_db: f64,
    t: f64,
    n_list: &[usize],
    sign: Sign,
    policy: &CutoffPolicy,
) -> Result<Value> {
    let (spec, tap) = setup(s_db, t)?;
    let mut states = Vec::new();
    for &n in n_list {
        let vacuum = spec.amplitude() == 0.0;
        let state = if vacuum {
            FockVector::vacuum()
        } else {
            subtracted_cv_state(&tap, n, sign, policy)?
        };
        let stats = if vacuum {
            m::ChannelStats {
                subtracted: n,
                mean: 0.0,
                variance: 0.0,
            }
        } else {
            m::channel_stats(&tap, n)?
        };
        let parity = if vacuum {
            Parity::Even
        } else {
            parity_of(&state)
        };
        let leading: Vec<Value> = (0..LEADING_AMPLITUDES)
            .map(|k| {
                let a = state.amplitude(k);
                json!([number(a.re), number(a.im)])
            })
            .collect();
        let mut entry = BTreeMap::new();
        entry.insert("n_subtracted", json!(n));
        entry.insert("mean_n", number(stats.mean));
        entry.insert("variance_n", number(stats.variance));
        entry.insert("parity", json!(parity.as_str()));
        entry.insert(
            "success_probability",
            number(m::single_channel_probability(&spec, &tap, n)?),
        );
        entry.insert("cutoff", json!(state.cutoff()));
        entry.insert("tail_bound", number(state.tail_bound()));
        entry.insert("leading_amplitudes", Value::Array(leading));
        states.push(json!(entry));
    }
    Ok(json!({
        "tool": format!("qmzi {TOOL_VERSION}"),
        "S_db": number(s_db),
        "s": number(spec.amplitude()),
        "y": number(spec.y()),
        "t": number(t),
        "y1": number(tap.y1()),
        "sign": match sign { Sign::Plus => "+", Sign::Minus => "-" },
        "states": states,
    }))
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty_json(value: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn number(v: f64) -> Value {
    format_number(v)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(format_number(v)))
}

/// Result of [`cmd_verify`]: a deterministic report and the overall status.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    pub report: String,
    pub passed: bool,
    pub verdicts: Vec<CheckVerdict>,
}

pub fn cmd_verify(
    grid: &GridConfig,
    golden_write: Option<&Path>,
    golden_compare: Option<&Path>,
    golden_tol: f64,
) -> Result<VerifyOutcome> {
    let verdicts = oracle::run_suite(grid)?;
    let mut report = String::new();
    let _ = writeln!(
        report,
        "qmzi {TOOL_VERSION} verify: {} cases",
        verdicts.len()
    );
    let _ = writeln!(
        report,
        "{:<20} {:>7} {:>7} {:>12}  worst case",
        "quantity", "cases", "failed", "worst rel"
    );
    for s in oracle::summarize(&verdicts) {
        let _ = writeln!(
            report,
            "{:<20} {:>7} {:>7} {:>12.3e}  {}",
            s.quantity.as_str(),
            s.cases,
            s.failed,
            s.worst_relative_error,
            s.worst_case
        );
    }
    let mut passed = true;
    for v in verdicts.iter().filter(|v| !v.passed) {
        passed = false;
        let _ = writeln!(
            report,
            "FAILED {} analytic={} oracle={} rel={:e} tol={:e}{}",
            v.case.name,
            v.analytic_value,
            v.oracle_value,
            v.relative_error,
            v.case.tolerance,
            v.reason
                .as_deref()
                .map(|r| format!(" ({r})"))
                .unwrap_or_default()
        );
    }
    if let Some(path) = golden_compare {
        let g = oracle::golden_compare(path, &verdicts, golden_tol)?;
        let _ = writeln!(
            report,
            "golden: compared {} entries, max drift {:e}{} (tolerance {:e})",
            g.compared,
            g.max_drift,
            g.worst_key
                .as_deref()
                .map(|k| format!(" at {k}"))
                .unwrap_or_default(),
            g.tolerance
        );
        for (key, drift) in &g.drifted {
            let _ = writeln!(report, "golden drift {key}: {drift:e}");
        }
        for key in &g.missing {
            let _ = writeln!(report, "golden entry not produced: {key}");
        }
        for key in &g.unexpected {
            let _ = writeln!(report, "golden entry absent from file: {key}");
        }
        passed &= g.passed();
    }
    if let Some(path) = golden_write {
        oracle::golden_write(path, &verdicts)?;
        let _ = writeln!(report, "golden: wrote {} entries", verdicts.len());
    }
    let _ = writeln!(report, "result: {}", if passed { "PASS" } else { "FAIL" });
    Ok(VerifyOutcome {
        report,
        passed,
        verdicts,
    })
}
