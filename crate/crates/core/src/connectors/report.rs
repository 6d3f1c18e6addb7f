//! Report files for manual upload.
//!
//! ```text
//! AGRIFLOW-REPORT 1
//! kind qc.analysis
//! fields sugar_content:decimal acidity:decimal
//! ---
//! sugar_content=21.4
//! acidity=6.2
//! ```
//!
//! The header declares the report kind and its typed fields; the body after
//! `---` holds exactly one `name=value` line per declared field. Blank lines
//! and lines starting with `#` are ignored.

use crate::engine::FieldError;
use crate::value::{Value, ValueType, VariableMap};

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: String,
    pub fields: Vec<(String, ValueType)>,
    pub values: VariableMap,
}

fn err(field: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.into(),
        message: message.into(),
    }
}

pub fn parse_report(bytes: &[u8]) -> Result<Report, Vec<FieldError>> {
    let text = std::str::from_utf8(bytes).map_err(|e| vec![err("file", format!("not UTF-8: {e}"))])?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut errors = Vec::new();

    match lines.next() {
        Some((_, "AGRIFLOW-REPORT 1")) => {}
        Some((n, other)) => {
            return Err(vec![err(
                "header",
                format!("line {n}: expected 'AGRIFLOW-REPORT 1', found '{other}'"),
            )])
        }
        None => return Err(vec![err("header", "empty file")]),
    }
    let kind = match lines.next() {
        Some((_, l)) if l.starts_with("kind ") => l[5..].trim().to_string(),
        Some((n, _)) => return Err(vec![err("kind", format!("line {n}: expected 'kind <name>'"))]),
        None => return Err(vec![err("kind", "missing kind line")]),
    };
    let mut fields: Vec<(String, ValueType)> = Vec::new();
    match lines.next() {
        Some((n, l)) if l == "fields" || l.starts_with("fields ") => {
            for decl in l[6..].split_whitespace() {
                match decl.split_once(':') {
                    Some((name, ty)) if !name.is_empty() => match ty.parse::<ValueType>() {
                        Ok(_) if fields.iter().any(|(f, _)| f == name) => {
                            errors.push(err(name, format!("line {n}: declared twice")));
                        }
                        Ok(t) => fields.push((name.to_string(), t)),
                        Err(m) => errors.push(err(name, format!("line {n}: {m}"))),
                    },
                    _ => errors.push(err(decl, format!("line {n}: expected name:type"))),
                }
            }
        }
        Some((n, _)) => return Err(vec![err("fields", format!("line {n}: expected 'fields ...'"))]),
        None => return Err(vec![err("fields", "missing fields line")]),
    }
    match lines.next() {
        Some((_, "---")) => {}
        Some((n, _)) => errors.push(err("body", format!("line {n}: expected '---'"))),
        None => errors.push(err("body", "missing '---' separator")),
    }

    let mut values = VariableMap::new();
    for (n, line) in lines {
        let Some((name, raw)) = line.split_once('=') else {
            errors.push(err(format!("line {n}"), "expected name=value"));
            continue;
        };
        let name = name.trim();
        let Some((_, ty)) = fields.iter().find(|(f, _)| f == name) else {
            errors.push(err(name, format!("line {n}: field not declared")));
            continue;
        };
        if values.contains(name) {
            errors.push(err(name, format!("line {n}: value given twice")));
            continue;
        }
        match Value::parse_as(raw.trim(), *ty) {
            Ok(v) => {
                let _ = values.insert(name, v);
            }
            Err(m) => errors.push(err(name, format!("line {n}: {m}"))),
        }
    }
    for (f, _) in &fields {
        if !values.contains(f) && !errors.iter().any(|e| e.field == *f) {
            errors.push(err(f.clone(), "declared but no value given"));
        }
    }
    if errors.is_empty() {
        Ok(Report { kind, fields, values })
    } else {
        Err(errors)
    }
}

pub fn write_report(kind: &str, fields: &[(String, ValueType)], values: &VariableMap) -> Vec<u8> {
    let mut out = format!("AGRIFLOW-REPORT 1\nkind {kind}\nfields");
    for (name, ty) in fields {
        out.push_str(&format!(" {name}:{ty}"));
    }
    out.push_str("\n---\n");
    for (name, _) in fields {
        if let Some(v) = values.get(name) {
            out.push_str(&format!("{name}={v}\n"));
        }
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    const QC: &str = "AGRIFLOW-REPORT 1\nkind qc.analysis\nfields sugar_content:decimal acidity:decimal\n---\nsugar_content=21.4\nacidity=6.2\n";

    #[test]
    fn parses_declared_fields() {
        let r = parse_report(QC.as_bytes()).unwrap();
        assert_eq!(r.kind, "qc.analysis");
        assert_eq!(r.values.get("sugar_content"), Some(&Value::Decimal(21.4)));
        let again = write_report(&r.kind, &r.fields, &r.values);
        assert_eq!(parse_report(&again).unwrap(), r);
    }

    #[test]
    fn field_level_diagnostics() {
        let bad = QC.replace("acidity=6.2", "acidity=sour\nbrix=3");
        let errs = parse_report(bad.as_bytes()).unwrap_err();
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, vec!["acidity", "brix"]);
        let missing = QC.replace("acidity=6.2\n", "");
        assert_eq!(parse_report(missing.as_bytes()).unwrap_err()[0].field, "acidity");
    }
}
