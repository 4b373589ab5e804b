//! Comma-separated exports: a header row naming every feature in schema
//! order followed by the label column.

use csv::{ReaderBuilder, StringRecord, Trim};

use super::{parse_number, DataError, Dataset, FeatureSchema, FeatureVector, LabelValues, LabeledInstance};

fn reader(text: &str) -> csv::Reader<&[u8]> {
    ReaderBuilder::new()
        .has_headers(true)
        .trim(Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn headers(rdr: &mut csv::Reader<&[u8]>) -> Result<StringRecord, DataError> {
    rdr.headers().cloned()
        .map_err(|e| DataError::Csv(e.to_string()))
}

pub fn parse_csv(text: &str, schema: &FeatureSchema) -> Result<Dataset, DataError> {
    let mut rdr = reader(text);
    let header = headers(&mut rdr)?;
    let expected: Vec<&str> = schema
        .names()
        .chain(std::iter::once(schema.label_name.as_str()))
        .collect();
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        let detail = match expected.iter().zip(&found).position(|(a, b)| a != b) {
            Some(i) => format!("column {}: expected `{}`, found `{}`", i + 1, expected[i], found[i]),
            None => format!("expected {} columns, found {}", expected.len(), found.len()),
        };
        return Err(DataError::HeaderMismatch(detail));
    }

    let mut instances = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        let line = i + 2;
        if record.len() != expected.len() {
            return Err(DataError::ArityMismatch {
                line,
                expected: expected.len(),
                found: record.len(),
            });
        }
        let x = parse_cells(&record, schema, line)?;
        let tag = &record[schema.len()];
        let y = schema
            .label_values
            .encode(tag)
            .ok_or_else(|| DataError::UnknownClassValue {
                line,
                value: tag.to_string(),
            })?;
        instances.push(LabeledInstance::new(x, y));
    }
    Dataset::new(schema.clone(), instances)
}

/// Read feature rows without labels. The header must name the schema's
/// features in order; a trailing label column, if present, is ignored.
pub fn parse_unlabeled_csv(text: &str, schema: &FeatureSchema) -> Result<Vec<FeatureVector>, DataError> {
    let mut rdr = reader(text);
    let header = headers(&mut rdr)?;
    let names: Vec<&str> = schema.names().collect();
    let found: Vec<&str> = header.iter().collect();
    let with_label = found.len() == names.len() + 1 && found[names.len()] == schema.label_name;
    if found[..found.len().min(names.len())] != names[..] || !(found.len() == names.len() || with_label) {
        return Err(DataError::HeaderMismatch(format!(
            "expected the {} schema feature names in order",
            names.len()
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        let line = i + 2;
        if record.len() != found.len() {
            return Err(DataError::ArityMismatch {
                line,
                expected: found.len(),
                found: record.len(),
            });
        }
        rows.push(FeatureVector(parse_cells(&record, schema, line)?));
    }
    Ok(rows)
}

fn parse_cells(record: &StringRecord, schema: &FeatureSchema, line: usize) -> Result<Vec<f64>, DataError> {
    schema
        .names()
        .enumerate()
        .map(|(j, name)| parse_number(&record[j], line, name))
        .collect()
}

/// Derive a schema from a CSV header whose last column is the label.
pub fn schema_from_csv_header(text: &str, label_values: LabelValues) -> Result<FeatureSchema, DataError> {
    let mut rdr = reader(text);
    let header = headers(&mut rdr)?;
    if header.len() < 2 {
        return Err(DataError::HeaderMismatch(
            "need at least one feature column and a label column".into(),
        ));
    }
    let cols: Vec<&str> = header.iter().collect();
    let (label, features) = cols.split_last().expect("len >= 2");
    FeatureSchema::new(features.iter().copied(), *label, label_values)
}

pub fn to_csv(ds: &Dataset) -> String {
    let schema = ds.schema();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = schema
        .names()
        .chain(std::iter::once(schema.label_name.as_str()))
        .collect();
    wtr.write_record(&header).expect("in-memory write");
    for inst in ds.instances() {
        let mut row: Vec<String> = inst.x.iter().map(|v| v.to_string()).collect();
        row.push(schema.label_values.decode(inst.y).to_string());
        wtr.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf8 input")
}
