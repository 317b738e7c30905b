//! MPS export and import.
//!
//! Output follows the fixed column layout (fields at columns 2, 5, 15, 25,
//! 40, 50). Numbers are printed with the shortest representation that
//! round-trips, so a field may run past its nominal 12 characters; the
//! reader splits on whitespace and accepts both layouts. Names longer than
//! eight characters or containing whitespace are replaced by positional
//! names. Binaries are wrapped in `MARKER` `INTORG`/`INTEND` blocks and
//! always carry explicit bounds.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::MilpProblem;
use crate::lp::{LpProblem, Relation};
use crate::{Error, Result};

const OBJ_ROW: &str = "COST";

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 8
        && name.bytes().all(|b| b.is_ascii_graphic())
        && name != OBJ_ROW
        && !name.starts_with('$')
}

fn mps_names(names: impl Iterator<Item = String>, prefix: char) -> Vec<String> {
    let mut used = std::collections::HashSet::new();
    let names: Vec<String> = names.collect();
    let keep: Vec<bool> = names
        .iter()
        .map(|n| valid_name(n) && used.insert(n.clone()))
        .collect();
    names
        .into_iter()
        .zip(keep)
        .enumerate()
        .map(|(i, (n, ok))| if ok { n } else { format!("{prefix}{i:07}") })
        .collect()
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str) {
    let _ = writeln!(out, " {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}");
}

/// Renders `p` as MPS text.
pub fn write_mps(p: &MilpProblem, name: &str) -> Result<String> {
    p.validate()?;
    let lp = &p.lp;
    let cols = mps_names(lp.var_names.iter().cloned(), 'C');
    let rows = mps_names(lp.rows.iter().map(|r| r.name.clone()), 'R');
    let mut is_bin = vec![false; lp.num_vars()];
    for &j in &p.binaries {
        is_bin[j] = true;
    }
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_vars()];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, v) in &row.coeffs {
            by_col[j].push((i, v));
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ_ROW}");
    for (row, n) in lp.rows.iter().zip(&rows) {
        let tag = match row.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        let _ = writeln!(out, " {tag}  {n}");
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for j in 0..lp.num_vars() {
        if is_bin[j] != in_int {
            let kind = if is_bin[j] { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER{marker:<4}  'MARKER'                 {kind}");
            marker += 1;
            in_int = is_bin[j];
        }
        // The cost entry is always written so empty columns still exist.
        line(&mut out, "", &cols[j], OBJ_ROW, &num(lp.costs[j]));
        for &(i, v) in &by_col[j] {
            line(&mut out, "", &cols[j], &rows[i], &num(v));
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKER{marker:<4}  'MARKER'                 'INTEND'");
    }
    out.push_str("RHS\n");
    for (row, n) in lp.rows.iter().zip(&rows) {
        if row.rhs != 0.0 {
            line(&mut out, "", "RHS", n, &num(row.rhs));
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..lp.num_vars() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let c = &cols[j];
        if lo == hi {
            line(&mut out, "FX", "BND", c, &num(lo));
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            line(&mut out, "FR", "BND", c, "");
        } else {
            if lo == f64::NEG_INFINITY {
                line(&mut out, "MI", "BND", c, "");
            } else if lo != 0.0 || is_bin[j] {
                line(&mut out, "LO", "BND", c, &num(lo));
            }
            if hi != f64::INFINITY {
                line(&mut out, "UP", "BND", c, &num(hi));
            } else if is_bin[j] || lo == f64::NEG_INFINITY {
                line(&mut out, "PL", "BND", c, "");
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

/// Writes `p` to `path` in MPS format.
pub fn export_mps(p: &MilpProblem, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| valid_name(s))
        .unwrap_or("EVAGG");
    let text = write_mps(p, name)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn import_mps(path: impl AsRef<Path>) -> Result<MilpProblem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_mps(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse { path: path.display().to_string(), line, message },
        other => other,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

/// Parses MPS text into a problem. Supports the subset produced by [`write_mps`]
/// plus `BV`, `MI`/`PL` bound types and one objective row.
pub fn parse_mps(text: &str) -> Result<MilpProblem> {
    let err = |line: usize, message: String| Error::Parse { path: "<mps>".into(), line, message };
    let mut section = Section::None;
    let mut lp = LpProblem::new();
    let mut row_index: HashMap<String, Option<usize>> = HashMap::new();
    let mut row_coeffs: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut binaries = Vec::new();
    let mut in_int = false;
    let mut default_bounds: Vec<bool> = Vec::new();
    let mut saw_end = false;

    let parse_num = |s: &str, ln: usize| -> Result<f64> {
        s.parse::<f64>().map_err(|_| err(ln, format!("invalid number '{s}'")))
    };

    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            let head = raw.split_whitespace().next().unwrap_or("");
            section = match head {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => {
                    saw_end = true;
                    break;
                }
                other => return Err(err(ln, format!("unknown section '{other}'"))),
            };
            continue;
        }
        let f: Vec<&str> = raw.split_whitespace().collect();
        match section {
            Section::None => return Err(err(ln, "data line outside a section".into())),
            Section::Rows => {
                if f.len() != 2 {
                    return Err(err(ln, "ROWS entry needs a type and a name".into()));
                }
                let rel = match f[0] {
                    "N" => {
                        if row_index.values().any(Option::is_none) {
                            return Err(err(ln, "more than one objective row".into()));
                        }
                        row_index.insert(f[1].to_string(), None);
                        continue;
                    }
                    "L" => Relation::Le,
                    "G" => Relation::Ge,
                    "E" => Relation::Eq,
                    t => return Err(err(ln, format!("unknown row type '{t}'"))),
                };
                if row_index.contains_key(f[1]) {
                    return Err(err(ln, format!("duplicate row '{}'", f[1])));
                }
                row_index.insert(f[1].to_string(), Some(lp.rows.len()));
                lp.rows.push(crate::lp::Row { name: f[1].to_string(), coeffs: Vec::new(), relation: rel, rhs: 0.0 });
                row_coeffs.push(Vec::new());
            }
            Section::Columns => {
                if f.len() >= 3 && f[1] == "'MARKER'" {
                    match f[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        m => return Err(err(ln, format!("unknown marker {m}"))),
                    }
                    continue;
                }
                if f.len() != 3 && f.len() != 5 {
                    return Err(err(ln, "COLUMNS entry needs one or two row/value pairs".into()));
                }
                let j = match col_index.get(f[0]) {
                    Some(&j) => j,
                    None => {
                        let j = lp.add_var(f[0], 0.0, 0.0, f64::INFINITY);
                        col_index.insert(f[0].to_string(), j);
                        default_bounds.push(true);
                        if in_int {
                            binaries.push(j);
                        }
                        j
                    }
                };
                for pair in f[1..].chunks(2) {
                    let v = parse_num(pair[1], ln)?;
                    match row_index.get(pair[0]) {
                        Some(None) => lp.costs[j] = v,
                        Some(Some(i)) => row_coeffs[*i].push((j, v)),
                        None => return Err(err(ln, format!("unknown row '{}'", pair[0]))),
                    }
                }
            }
            Section::Rhs => {
                if f.len() != 3 && f.len() != 5 {
                    return Err(err(ln, "RHS entry needs a set name and row/value pairs".into()));
                }
                for pair in f[1..].chunks(2) {
                    let v = parse_num(pair[1], ln)?;
                    match row_index.get(pair[0]) {
                        Some(Some(i)) => lp.rows[*i].rhs = v,
                        Some(None) => return Err(err(ln, "objective constants are not supported".into())),
                        None => return Err(err(ln, format!("unknown row '{}'", pair[0]))),
                    }
                }
            }
            Section::Ranges => return Err(err(ln, "RANGES are not supported".into())),
            Section::Bounds => {
                if f.len() < 3 {
                    return Err(err(ln, "BOUNDS entry too short".into()));
                }
                let j = *col_index
                    .get(f[2])
                    .ok_or_else(|| err(ln, format!("unknown column '{}'", f[2])))?;
                let value = || -> Result<f64> {
                    f.get(3).ok_or_else(|| err(ln, "bound value missing".into())).and_then(|s| parse_num(s, ln))
                };
                default_bounds[j] = false;
                match f[0] {
                    "UP" => lp.upper[j] = value()?,
                    "LO" => lp.lower[j] = value()?,
                    "FX" => {
                        let v = value()?;
                        lp.lower[j] = v;
                        lp.upper[j] = v;
                    }
                    "FR" => {
                        lp.lower[j] = f64::NEG_INFINITY;
                        lp.upper[j] = f64::INFINITY;
                    }
                    "MI" => lp.lower[j] = f64::NEG_INFINITY,
                    "PL" => lp.upper[j] = f64::INFINITY,
                    "BV" => {
                        lp.lower[j] = 0.0;
                        lp.upper[j] = 1.0;
                        if !binaries.contains(&j) {
                            binaries.push(j);
                        }
                    }
                    t => return Err(err(ln, format!("unsupported bound type '{t}'"))),
                }
            }
        }
    }
    if !saw_end {
        return Err(err(text.lines().count(), "missing ENDATA".into()));
    }
    for &j in &binaries {
        if default_bounds[j] {
            lp.upper[j] = 1.0;
        }
    }
    let rows = std::mem::take(&mut lp.rows);
    for (row, coeffs) in rows.into_iter().zip(row_coeffs) {
        lp.add_row(row.name, coeffs, row.relation, row.rhs);
    }
    binaries.sort_unstable();
    let p = MilpProblem::new(lp, binaries);
    p.validate()?;
    Ok(p)
}
