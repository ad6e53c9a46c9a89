//! CPLEX-LP text export and `name value` solution import.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{IlpModel, LinExpr, ObjSense, VarKind};

/// Terms per physical line; keeps lines far below the 510-character
/// limit of strict readers.
const TERMS_PER_LINE: usize = 8;

/// Integers print without a decimal point; other values carry at most 12
/// fractional digits.
pub fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        return format!("{}", x as i64);
    }
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

fn write_expr<W: Write>(w: &mut W, model: &IlpModel, expr: &LinExpr) -> io::Result<()> {
    if expr.is_empty() {
        // A zero objective still needs one term for most readers.
        return match model.variables().first() {
            Some(v) => write!(w, " 0 {}", v.name),
            None => Ok(()),
        };
    }
    for (k, &(v, c)) in expr.terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            write!(w, "\n   ")?;
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let mag = c.abs();
        let name = &model.variables()[v].name;
        if k == 0 && sign == '+' {
            if mag == 1.0 {
                write!(w, " {name}")?;
            } else {
                write!(w, " {} {name}", format_number(mag))?;
            }
        } else if mag == 1.0 {
            write!(w, " {sign} {name}")?;
        } else {
            write!(w, " {sign} {} {name}", format_number(mag))?;
        }
    }
    Ok(())
}

pub fn write_lp<W: Write>(model: &IlpModel, w: &mut W) -> io::Result<()> {
    writeln!(w, "\\ {}", model.name)?;
    writeln!(
        w,
        "\\ {} variables, {} constraints",
        model.variables().len(),
        model.constraints.len()
    )?;
    writeln!(
        w,
        "{}",
        match model.sense {
            ObjSense::Minimize => "Minimize",
            ObjSense::Maximize => "Maximize",
        }
    )?;
    write!(w, " obj:")?;
    write_expr(w, model, &model.objective)?;
    writeln!(w)?;
    writeln!(w, "Subject To")?;
    for c in &model.constraints {
        write!(w, " {}:", c.name)?;
        write_expr(w, model, &c.expr)?;
        writeln!(w, " {} {}", c.sense, format_number(c.rhs))?;
    }
    let bounded: Vec<_> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Integer && v.upper.is_some())
        .collect();
    if !bounded.is_empty() {
        writeln!(w, "Bounds")?;
        for v in bounded {
            writeln!(w, " 0 <= {} <= {}", v.name, v.upper.unwrap_or_default())?;
        }
    }
    for (header, kind) in [("Binary", VarKind::Binary), ("General", VarKind::Integer)] {
        let names: Vec<_> = model.variables().iter().filter(|v| v.kind == kind).collect();
        if names.is_empty() {
            continue;
        }
        writeln!(w, "{header}")?;
        for chunk in names.chunks(TERMS_PER_LINE) {
            let line: Vec<&str> = chunk.iter().map(|v| v.name.as_str()).collect();
            writeln!(w, " {}", line.join(" "))?;
        }
    }
    writeln!(w, "End")
}

pub fn lp_string(model: &IlpModel) -> String {
    let mut buf = Vec::new();
    write_lp(model, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("LP text is UTF-8")
}

/// Writes the model to `path` in CPLEX-LP format.
pub fn export_lp(model: &IlpModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_lp(model, &mut w)
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Parses `name value` lines. Blank lines and lines starting with `#` are
/// skipped, as is a leading objective line of the form `Objective value = v`.
/// Values must be integral within 1e-6.
pub fn parse_solution(text: &str) -> std::result::Result<BTreeMap<String, i64>, String> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.to_ascii_lowercase().starts_with("objective") {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(name), Some(val), None) = (it.next(), it.next(), it.next()) else {
            return Err(format!("line {}: expected `name value`", lineno + 1));
        };
        let x: f64 = val
            .parse()
            .map_err(|_| format!("line {}: bad value `{val}`", lineno + 1))?;
        let r = x.round();
        if (x - r).abs() > 1e-6 {
            return Err(format!("line {}: `{name}` = {x} is not integral", lineno + 1));
        }
        if out.insert(name.to_string(), r as i64).is_some() {
            return Err(format!("line {}: `{name}` assigned twice", lineno + 1));
        }
    }
    Ok(out)
}

pub fn import_solution(path: impl AsRef<Path>) -> Result<BTreeMap<String, i64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_solution(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}
