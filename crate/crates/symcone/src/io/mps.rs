//! MPS reader (fixed or free format, whitespace separated) with conversion
//! to equality standard form over a single orthant.
//!
//! Conversion rules:
//! - `L`/`G` rows get a nonnegative slack; ranged rows get a slack bounded
//!   by the range width (NETLIB `RANGES` semantics).
//! - finite lower bounds are shifted out (`x = l + x'`) into `b` and the
//!   objective offset; finite upper bounds add a row `x' + w = u - l`.
//! - variables with only an upper bound are negated; free variables are
//!   split into two nonnegative parts; fixed variables are substituted.
//! - an `RHS` entry on the objective row sets the objective constant to its
//!   negative.

use std::collections::HashMap;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::{finish, ProblemData, ProblemReader, ReadOptions};
use crate::cone::{BlockSpec, ConeSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    N,
    E,
    L,
    G,
}

/// Raw model as written in the file, before standard-form conversion.
#[derive(Clone, Debug)]
pub struct MpsModel {
    pub name: String,
    pub objective: String,
    pub maximize: bool,
    pub rows: Vec<(String, RowKind)>,
    pub columns: Vec<String>,
    /// (row index, column index) -> value; row index into `rows`
    pub entries: HashMap<(usize, usize), f64>,
    pub obj: Vec<f64>,
    pub rhs: Vec<f64>,
    pub obj_constant: f64,
    pub ranges: Vec<Option<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl MpsModel {
    /// Constraint rows (objective and free rows excluded).
    pub fn num_constraints(&self) -> usize {
        self.rows.iter().filter(|r| r.1 != RowKind::N).count()
    }
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse(format!("line {line}: {}", msg.into()))
}

fn num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| perr(line, format!("invalid number '{tok}'")))
}

#[derive(PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    ObjSense,
}

pub fn parse_mps(text: &str) -> Result<MpsModel> {
    let mut m = MpsModel {
        name: String::new(),
        objective: String::new(),
        maximize: false,
        rows: vec![],
        columns: vec![],
        entries: HashMap::new(),
        obj: vec![],
        rhs: vec![],
        obj_constant: 0.0,
        ranges: vec![],
        lower: vec![],
        upper: vec![],
    };
    let mut row_idx: HashMap<String, usize> = HashMap::new();
    let mut col_idx: HashMap<String, usize> = HashMap::new();
    let mut free_rows: HashMap<String, ()> = HashMap::new();
    let mut sec = Section::None;
    let mut ended = false;
    let mut bounded: Vec<bool> = vec![];

    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            let head = toks[0].to_ascii_uppercase();
            sec = match head.as_str() {
                "NAME" => {
                    m.name = toks.get(1).map(|s| s.to_string()).unwrap_or_default();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "OBJSENSE" => {
                    if let Some(t) = toks.get(1) {
                        m.maximize = t.eq_ignore_ascii_case("MAX") || t.eq_ignore_ascii_case("MAXIMIZE");
                    }
                    Section::ObjSense
                }
                "ENDATA" => {
                    ended = true;
                    break;
                }
                _ => return Err(perr(ln, format!("unknown section '{}'", toks[0]))),
            };
            continue;
        }
        match sec {
            Section::None => return Err(perr(ln, "data line outside of any section")),
            Section::ObjSense => {
                m.maximize = toks[0].eq_ignore_ascii_case("MAX") || toks[0].eq_ignore_ascii_case("MAXIMIZE");
            }
            Section::Rows => {
                if toks.len() < 2 {
                    return Err(perr(ln, "row line needs a type and a name"));
                }
                let kind = match toks[0].to_ascii_uppercase().as_str() {
                    "N" => RowKind::N,
                    "E" => RowKind::E,
                    "L" => RowKind::L,
                    "G" => RowKind::G,
                    t => return Err(perr(ln, format!("unknown row type '{t}'"))),
                };
                let name = toks[1].to_string();
                if kind == RowKind::N {
                    if m.objective.is_empty() {
                        m.objective = name;
                    } else {
                        free_rows.insert(name, ());
                    }
                    continue;
                }
                if row_idx.contains_key(&name) {
                    return Err(perr(ln, format!("duplicate row '{name}'")));
                }
                row_idx.insert(name.clone(), m.rows.len());
                m.rows.push((name, kind));
                m.rhs.push(0.0);
                m.ranges.push(None);
            }
            Section::Columns => {
                if toks.iter().any(|t| t.contains("MARKER")) {
                    continue;
                }
                if toks.len() < 3 || toks.len().is_multiple_of(2) {
                    return Err(perr(ln, "column line needs a name and (row, value) pairs"));
                }
                let cname = toks[0];
                let j = match col_idx.get(cname) {
                    Some(&j) => j,
                    None => {
                        let j = m.columns.len();
                        col_idx.insert(cname.to_string(), j);
                        m.columns.push(cname.to_string());
                        m.obj.push(0.0);
                        m.lower.push(0.0);
                        m.upper.push(f64::INFINITY);
                        bounded.push(false);
                        j
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = num(pair[1], ln)?;
                    if pair[0] == m.objective {
                        m.obj[j] += v;
                    } else if let Some(&i) = row_idx.get(pair[0]) {
                        let e = m.entries.entry((i, j)).or_insert(0.0);
                        if *e != 0.0 {
                            warn!("line {ln}: duplicate entry ({}, {cname}) summed", pair[0]);
                        }
                        *e += v;
                    } else if !free_rows.contains_key(pair[0]) {
                        return Err(perr(ln, format!("unknown row '{}'", pair[0])));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let pairs = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                if pairs.is_empty() {
                    return Err(perr(ln, "expected (row, value) pairs"));
                }
                for pair in pairs.chunks(2) {
                    let v = num(pair[1], ln)?;
                    if pair[0] == m.objective {
                        if sec == Section::Rhs {
                            m.obj_constant = -v;
                        }
                        continue;
                    }
                    let i = match row_idx.get(pair[0]) {
                        Some(&i) => i,
                        None if free_rows.contains_key(pair[0]) => continue,
                        None => return Err(perr(ln, format!("unknown row '{}'", pair[0]))),
                    };
                    if sec == Section::Rhs {
                        m.rhs[i] = v;
                    } else {
                        m.ranges[i] = Some(v);
                    }
                }
            }
            Section::Bounds => {
                let kind = toks[0].to_ascii_uppercase();
                let needs_value = !matches!(kind.as_str(), "FR" | "MI" | "PL" | "BV");
                // [type] [set] col [value]
                let (col, val) = if needs_value {
                    match toks.len() {
                        4 => (toks[2], Some(num(toks[3], ln)?)),
                        3 => (toks[1], Some(num(toks[2], ln)?)),
                        _ => return Err(perr(ln, "bound line needs a column and a value")),
                    }
                } else {
                    match toks.len() {
                        2 => (toks[1], None),
                        3 if col_idx.contains_key(toks[2]) => (toks[2], None),
                        3 => (toks[1], Some(num(toks[2], ln)?)),
                        4 => (toks[2], Some(num(toks[3], ln)?)),
                        _ => return Err(perr(ln, "malformed bound line")),
                    }
                };
                let j = *col_idx.get(col).ok_or_else(|| perr(ln, format!("unknown column '{col}'")))?;
                match kind.as_str() {
                    "UP" | "UI" => {
                        let v = val.unwrap();
                        if v < 0.0 && m.lower[j] == 0.0 && !bounded[j] {
                            warn!("line {ln}: negative upper bound on '{col}' with zero lower bound; lower bound set to -inf");
                            m.lower[j] = f64::NEG_INFINITY;
                        }
                        m.upper[j] = v;
                    }
                    "LO" | "LI" => m.lower[j] = val.unwrap(),
                    "FX" => {
                        m.lower[j] = val.unwrap();
                        m.upper[j] = val.unwrap();
                    }
                    "FR" => {
                        m.lower[j] = f64::NEG_INFINITY;
                        m.upper[j] = f64::INFINITY;
                    }
                    "MI" => m.lower[j] = f64::NEG_INFINITY,
                    "PL" => m.upper[j] = f64::INFINITY,
                    "BV" => {
                        m.lower[j] = 0.0;
                        m.upper[j] = 1.0;
                    }
                    t => return Err(perr(ln, format!("unknown bound type '{t}'"))),
                }
                if kind != "UP" && kind != "UI" {
                    bounded[j] = true;
                }
            }
        }
    }
    if !ended {
        warn!("MPS input has no ENDATA line");
    }
    if m.objective.is_empty() {
        return Err(Error::Parse("no objective (N) row".into()));
    }
    if m.columns.is_empty() {
        return Err(Error::Structural("MPS model has no columns".into()));
    }
    if m.maximize {
        for v in m.obj.iter_mut() {
            *v = -*v;
        }
        m.obj_constant = -m.obj_constant;
    }
    Ok(m)
}

/// Where an original column ended up in standard form.
#[derive(Clone, Debug)]
pub enum ColumnMap {
    /// `x = shift + sign * x[index]`
    Single {
        index: usize,
        shift: f64,
        sign: f64,
    },
    /// `x = x[pos] - x[neg]`
    Split {
        pos: usize,
        neg: usize,
    },
    Fixed {
        value: f64,
    },
}

#[derive(Clone, Debug)]
pub struct StandardForm {
    pub problem: ProblemData,
    pub columns: Vec<ColumnMap>,
    /// Sign applied to the reported objective (`-1` for maximization).
    pub objective_sign: f64,
}

impl StandardForm {
    /// Original variable values from a standard-form point.
    pub fn recover(&self, x: &DVector<f64>) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| match *c {
                ColumnMap::Single { index, shift, sign } => shift + sign * x[index],
                ColumnMap::Split { pos, neg } => x[pos] - x[neg],
                ColumnMap::Fixed { value } => value,
            })
            .collect()
    }
}

pub fn to_standard_form(m: &MpsModel) -> Result<StandardForm> {
    // column j of the model: list of (row, value)
    let mut col_entries: Vec<Vec<(usize, f64)>> = vec![vec![]; m.columns.len()];
    for (&(i, j), &v) in &m.entries {
        if v != 0.0 {
            col_entries[j].push((i, v));
        }
    }
    for c in col_entries.iter_mut() {
        c.sort_by_key(|e| e.0);
    }
    let nrows0 = m.rows.len();
    let mut b: Vec<f64> = m.rhs.clone();
    let mut offset = m.obj_constant;
    // standard-form columns as sparse lists
    let mut cols: Vec<Vec<(usize, f64)>> = vec![];
    let mut cost: Vec<f64> = vec![];
    let mut extra_rows: Vec<f64> = vec![];
    let mut maps = Vec::with_capacity(m.columns.len());

    #[allow(clippy::needless_range_loop)] // several parallel per-column arrays
    for j in 0..m.columns.len() {
        let (l, u) = (m.lower[j], m.upper[j]);
        if l > u {
            return Err(Error::Structural(format!("column '{}' has lower bound {l} above upper bound {u}", m.columns[j])));
        }
        let cj = m.obj[j];
        if l.is_finite() && u.is_finite() && l == u {
            for &(i, v) in &col_entries[j] {
                b[i] -= v * l;
            }
            offset += cj * l;
            maps.push(ColumnMap::Fixed { value: l });
        } else if l.is_finite() {
            for &(i, v) in &col_entries[j] {
                b[i] -= v * l;
            }
            offset += cj * l;
            let idx = cols.len();
            let mut col = col_entries[j].clone();
            if u.is_finite() {
                let r = nrows0 + extra_rows.len();
                extra_rows.push(u - l);
                col.push((r, 1.0));
                cols.push(col);
                cost.push(cj);
                cols.push(vec![(r, 1.0)]);
                cost.push(0.0);
            } else {
                cols.push(col);
                cost.push(cj);
            }
            maps.push(ColumnMap::Single { index: idx, shift: l, sign: 1.0 });
        } else if u.is_finite() {
            // x = u - x'
            for &(i, v) in &col_entries[j] {
                b[i] -= v * u;
            }
            offset += cj * u;
            let idx = cols.len();
            cols.push(col_entries[j].iter().map(|&(i, v)| (i, -v)).collect());
            cost.push(-cj);
            maps.push(ColumnMap::Single { index: idx, shift: u, sign: -1.0 });
        } else {
            let pos = cols.len();
            cols.push(col_entries[j].clone());
            cost.push(cj);
            cols.push(col_entries[j].iter().map(|&(i, v)| (i, -v)).collect());
            cost.push(-cj);
            maps.push(ColumnMap::Split { pos, neg: pos + 1 });
        }
    }

    // row slacks
    for (i, (_, kind)) in m.rows.iter().enumerate() {
        let range = m.ranges[i];
        let (lo, hi) = match (kind, range) {
            (RowKind::E, None) => (b[i], b[i]),
            (RowKind::E, Some(r)) if r >= 0.0 => (b[i], b[i] + r),
            (RowKind::E, Some(r)) => (b[i] + r, b[i]),
            (RowKind::L, None) => (f64::NEG_INFINITY, b[i]),
            (RowKind::L, Some(r)) => (b[i] - r.abs(), b[i]),
            (RowKind::G, None) => (b[i], f64::INFINITY),
            (RowKind::G, Some(r)) => (b[i], b[i] + r.abs()),
            (RowKind::N, _) => unreachable!(),
        };
        if lo == hi {
            b[i] = lo;
        } else if lo.is_finite() && hi.is_finite() {
            // a x - w = lo,  w + v = hi - lo
            b[i] = lo;
            let r = nrows0 + extra_rows.len();
            extra_rows.push(hi - lo);
            cols.push(vec![(i, -1.0), (r, 1.0)]);
            cost.push(0.0);
            cols.push(vec![(r, 1.0)]);
            cost.push(0.0);
        } else if hi.is_finite() {
            b[i] = hi;
            cols.push(vec![(i, 1.0)]);
            cost.push(0.0);
        } else {
            b[i] = lo;
            cols.push(vec![(i, -1.0)]);
            cost.push(0.0);
        }
    }

    let nrows = nrows0 + extra_rows.len();
    b.extend(extra_rows);
    let n = cols.len();
    if n == 0 {
        return Err(Error::Structural("standard form has no variables".into()));
    }
    let mut a = DMatrix::zeros(nrows, n);
    for (j, col) in cols.iter().enumerate() {
        for &(i, v) in col {
            a[(i, j)] += v;
        }
    }
    let problem = ProblemData::new(
        if m.name.is_empty() { "mps" } else { &m.name },
        ConeSpec::new(vec![BlockSpec::orthant(n)]),
        a,
        DVector::from_vec(b),
        DVector::from_vec(cost),
        offset,
    );
    Ok(StandardForm { problem, columns: maps, objective_sign: if m.maximize { -1.0 } else { 1.0 } })
}

pub fn read_mps(path: &Path, opts: &ReadOptions) -> Result<ProblemData> {
    let text = std::fs::read_to_string(path)?;
    let model = parse_mps(&text)?;
    finish(to_standard_form(&model)?.problem, opts)
}

pub struct MpsReader;

impl ProblemReader for MpsReader {
    fn name(&self) -> &'static str {
        "mps"
    }
    fn read(&self, path: &Path, opts: &ReadOptions) -> Result<ProblemData> {
        read_mps(path, opts)
    }
}
