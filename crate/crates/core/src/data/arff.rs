//! The ARFF subset used by the public Wikipedia vandalism corpus: numeric
//! attributes, one two-valued nominal class attribute, dense `@data` rows.

use std::fmt::Write as _;

use super::{parse_number, DataError, Dataset, FeatureSchema, LabelValues, LabeledInstance};

/// Class tags recognised as the violation class when reading a nominal
/// class attribute. If neither declared value matches, the first declared
/// value is taken as the violation tag.
const VIOLATION_TAGS: &[&str] = &["vandalism", "violation", "positive", "true", "yes", "1"];

enum Column {
    Numeric(String),
    Class,
}

pub fn parse_arff(text: &str) -> Result<Dataset, DataError> {
    let mut relation_seen = false;
    let mut columns: Vec<Column> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut class: Option<(String, Vec<String>)> = None;
    let mut in_data = false;
    let mut rows: Vec<(usize, &str)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            rows.push((line_no, line));
            continue;
        }
        let header_err = |reason: &str| DataError::MalformedHeader {
            line: line_no,
            reason: reason.to_string(),
        };
        let (keyword, rest) = split_keyword(line);
        match keyword.to_ascii_lowercase().as_str() {
            "@relation" => {
                if relation_seen {
                    return Err(header_err("duplicate @relation"));
                }
                relation_seen = true;
            }
            "@attribute" => {
                if !relation_seen {
                    return Err(header_err("@attribute before @relation"));
                }
                let (name, ty) = split_name(rest).ok_or_else(|| header_err("missing attribute name or type"))?;
                if ty.starts_with('{') {
                    let values = parse_nominal(ty).ok_or_else(|| header_err("unterminated nominal value list"))?;
                    if class.is_some() || values.len() != 2 {
                        return Err(DataError::NonNumericFeature { name });
                    }
                    class = Some((name, values));
                    columns.push(Column::Class);
                } else {
                    match ty.to_ascii_lowercase().as_str() {
                        "numeric" | "real" | "integer" => {
                            names.push(name.clone());
                            columns.push(Column::Numeric(name));
                        }
                        _ => return Err(DataError::NonNumericFeature { name }),
                    }
                }
            }
            "@data" => {
                if class.is_none() {
                    return Err(header_err("no two-valued nominal class attribute declared"));
                }
                in_data = true;
            }
            _ => return Err(header_err("expected @relation, @attribute or @data")),
        }
    }
    if !in_data {
        return Err(DataError::MalformedHeader {
            line: text.lines().count(),
            reason: "missing @data section".into(),
        });
    }

    let (label_name, values) = class.expect("checked before @data");
    let violation_pos = values
        .iter()
        .position(|v| VIOLATION_TAGS.contains(&v.to_ascii_lowercase().as_str()))
        .unwrap_or(0);
    let label_values = LabelValues::new(values[violation_pos].clone(), values[1 - violation_pos].clone());
    let schema = FeatureSchema::new(names, label_name, label_values)
        .map_err(|e| DataError::MalformedHeader { line: 0, reason: e.to_string() })?;

    let mut instances = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        if row.starts_with('{') {
            return Err(DataError::MalformedHeader {
                line,
                reason: "sparse rows are not supported".into(),
            });
        }
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != columns.len() {
            return Err(DataError::ArityMismatch {
                line,
                expected: columns.len(),
                found: cells.len(),
            });
        }
        let mut x = Vec::with_capacity(schema.len());
        let mut y = None;
        for (cell, col) in cells.iter().zip(&columns) {
            match col {
                Column::Numeric(name) => x.push(parse_number(cell, line, name)?),
                Column::Class => {
                    let tag = unquote(cell.trim());
                    if tag == "?" {
                        return Err(DataError::MissingValue {
                            line,
                            column: schema.label_name.clone(),
                        });
                    }
                    y = Some(schema.label_values.encode(tag).ok_or_else(|| {
                        DataError::UnknownClassValue {
                            line,
                            value: tag.to_string(),
                        }
                    })?);
                }
            }
        }
        instances.push(LabeledInstance::new(x, y.expect("class column present")));
    }
    Dataset::new(schema, instances)
}

/// Serialize as ARFF with the class attribute last, violation tag first.
pub fn to_arff(ds: &Dataset, relation: &str) -> String {
    let schema = ds.schema();
    let mut out = String::new();
    let _ = writeln!(out, "@relation {}", quote(relation));
    out.push('\n');
    for name in schema.names() {
        let _ = writeln!(out, "@attribute {} numeric", quote(name));
    }
    let lv = &schema.label_values;
    let _ = writeln!(
        out,
        "@attribute {} {{{},{}}}",
        quote(&schema.label_name),
        lv.violation,
        lv.regular
    );
    out.push_str("\n@data\n");
    for inst in ds.instances() {
        for v in inst.x.iter() {
            let _ = write!(out, "{v},");
        }
        out.push_str(lv.decode(inst.y));
        out.push('\n');
    }
    out
}

fn split_keyword(line: &str) -> (&str, &str) {
    match line.find(char::is_whitespace) {
        Some(p) => (&line[..p], line[p..].trim_start()),
        None => (line, ""),
    }
}

/// Split `name type` where the name may be quoted.
fn split_name(rest: &str) -> Option<(String, &str)> {
    let rest = rest.trim();
    let first = rest.chars().next()?;
    if first == '\'' || first == '"' {
        let end = rest[1..].find(first)? + 1;
        let ty = rest[end + 1..].trim();
        (!ty.is_empty()).then(|| (rest[1..end].to_string(), ty))
    } else {
        let (name, ty) = split_keyword(rest);
        (!ty.is_empty()).then(|| (name.to_string(), ty))
    }
}

fn parse_nominal(ty: &str) -> Option<Vec<String>> {
    let inner = ty.strip_prefix('{')?.strip_suffix('}')?;
    Some(
        inner
            .split(',')
            .map(|v| unquote(v.trim()).to_string())
            .filter(|v| !v.is_empty())
            .collect(),
    )
}

fn unquote(s: &str) -> &str {
    for q in ['\'', '"'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn quote(name: &str) -> String {
    if name.chars().any(|c| c.is_whitespace() || c == ',' || c == '{' || c == '}' || c == '%') {
        format!("'{name}'")
    } else {
        name.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "% comment\n@relation edits\n\n@attribute A numeric\n@attribute 'B b' real\n@attribute class {vandalism,regular}\n\n@data\n1.0,2.0,vandalism\n0.5,-1e-3,regular\n3,4,regular\n";

    #[test]
    fn minimal_file() {
        let ds = parse_arff(MINIMAL).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.schema().name(1), "B b");
        assert_eq!(ds.instances()[0].y, 1);
        assert_eq!(ds.instances()[1].x.0, vec![0.5, -1e-3]);
        assert_eq!(ds.schema().label_values.violation, "vandalism");
    }

    #[test]
    fn class_column_may_come_first_and_order_is_free() {
        let text = "@RELATION r\n@ATTRIBUTE class {regular,vandalism}\n@ATTRIBUTE x NUMERIC\n@DATA\nvandalism,1\nregular,2\n";
        let ds = parse_arff(text).unwrap();
        assert_eq!(ds.instances()[0].y, 1);
        assert_eq!(ds.instances()[1].y, 0);
        assert_eq!(ds.instances()[1].x.0, vec![2.0]);
    }

    #[test]
    fn arity_mismatch() {
        let text = "@relation r\n@attribute a numeric\n@attribute b numeric\n@attribute c numeric\n@attribute class {vandalism,regular}\n@data\n1.0,2.0\n";
        assert_eq!(
            parse_arff(text),
            Err(DataError::ArityMismatch {
                line: 7,
                expected: 4,
                found: 2
            })
        );
    }

    #[test]
    fn missing_value_rejected() {
        let text = "@relation r\n@attribute a numeric\n@attribute class {vandalism,regular}\n@data\n?,regular\n";
        assert!(matches!(parse_arff(text), Err(DataError::MissingValue { line: 5, .. })));
    }

    #[test]
    fn unknown_class_value() {
        let text = "@relation r\n@attribute a numeric\n@attribute class {vandalism,regular}\n@data\n1,spam\n";
        assert!(matches!(parse_arff(text), Err(DataError::UnknownClassValue { .. })));
    }

    #[test]
    fn non_numeric_attribute() {
        let text = "@relation r\n@attribute a string\n@attribute class {vandalism,regular}\n@data\n";
        assert!(matches!(parse_arff(text), Err(DataError::NonNumericFeature { .. })));
        let two_nominal = "@relation r\n@attribute a {x,y}\n@attribute class {vandalism,regular}\n@data\n";
        assert!(matches!(parse_arff(two_nominal), Err(DataError::NonNumericFeature { .. })));
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(parse_arff("@attribute a numeric\n"), Err(DataError::MalformedHeader { .. })));
        assert!(matches!(
            parse_arff("@relation r\n@attribute a numeric\n"),
            Err(DataError::MalformedHeader { .. })
        ));
        assert!(matches!(
            parse_arff("@relation r\n@attribute a numeric\n@data\n1\n"),
            Err(DataError::MalformedHeader { .. })
        ));
    }

    #[test]
    fn non_finite_and_garbage_cells() {
        let head = "@relation r\n@attribute a numeric\n@attribute class {vandalism,regular}\n@data\n";
        assert!(matches!(
            parse_arff(&format!("{head}NaN,regular\n")),
            Err(DataError::NonFiniteValue { .. })
        ));
        assert!(matches!(
            parse_arff(&format!("{head}abc,regular\n")),
            Err(DataError::NonNumericCell { .. })
        ));
    }

    #[test]
    fn write_then_read_is_identity() {
        let ds = parse_arff(MINIMAL).unwrap();
        let again = parse_arff(&to_arff(&ds, "edits")).unwrap();
        assert_eq!(ds, again);
    }
}
