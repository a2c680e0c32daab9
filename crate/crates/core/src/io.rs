//! Delimited text formats: sample-by-variable data CSV (first column
//! `sample_id`), two-column response CSV (`sample_id,y`) and co-data TSV
//! (`variable_id` followed by one column per source).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data::{DesignMatrix, Response, ResponseKind};
use crate::error::{GrridgeError, Result};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> GrridgeError {
    GrridgeError::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

fn reader(path: &Path, delimiter: u8) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| GrridgeError::from(e).context(format!("opening {}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(BufReader::new(file)))
}

fn read_records<R: Read>(path: &Path, rdr: &mut csv::Reader<R>) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(out.len() + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_real(path: &Path, line: usize, column: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("column {column}: cannot parse '{field}' as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("column {column}: non-finite value '{field}'")));
    }
    Ok(v)
}

fn list_first(items: &[String]) -> String {
    let shown: Vec<&str> = items.iter().take(5).map(String::as_str).collect();
    format!("{}{}", shown.join(", "), if items.len() > 5 { ", ..." } else { "" })
}

pub fn read_design_csv(path: &Path) -> Result<DesignMatrix> {
    let mut rdr = reader(path, b',')?;
    let records = read_records(path, &mut rdr)?;
    let Some(((header_line, header), rows)) = records.split_first() else {
        return Err(parse_err(path, 1, "empty file"));
    };
    if header.len() < 2 {
        return Err(parse_err(path, *header_line, "header needs sample_id followed by variable ids"));
    }
    let variable_ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let p = variable_ids.len();
    let mut values = Vec::with_capacity(rows.len() * p);
    let mut sample_ids = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        if rec.len() != p + 1 {
            return Err(parse_err(path, *line, format!("expected {} fields, found {}", p + 1, rec.len())));
        }
        sample_ids.push(rec[0].trim().to_string());
        for (j, field) in rec.iter().enumerate().skip(1) {
            values.push(parse_real(path, *line, j + 1, field)?);
        }
    }
    let n = sample_ids.len();
    let matrix = DMatrix::from_row_slice(n, p, &values);
    DesignMatrix::new(matrix, variable_ids, sample_ids).map_err(|e| e.context(path.display().to_string()))
}

/// Reads `sample_id,y` rows and matches them to `sample_ids` by id. For a
/// binary response every value must be 0 or 1.
pub fn read_response_csv(path: &Path, kind: ResponseKind, sample_ids: &[String]) -> Result<Response> {
    let mut rdr = reader(path, b',')?;
    let records = read_records(path, &mut rdr)?;
    let mut by_id: HashMap<String, f64> = HashMap::new();
    for (idx, (line, rec)) in records.iter().enumerate() {
        if rec.len() != 2 {
            return Err(parse_err(path, *line, format!("expected 2 fields, found {}", rec.len())));
        }
        let id = rec[0].trim();
        let raw = rec[1].trim();
        let value = match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ if idx == 0 => continue,
            _ => return Err(parse_err(path, *line, format!("column 2: cannot parse '{raw}' as a number"))),
        };
        if kind == ResponseKind::Binary && value != 0.0 && value != 1.0 {
            return Err(parse_err(path, *line, format!("column 2: binary response value '{raw}' is not 0 or 1")));
        }
        if by_id.insert(id.to_string(), value).is_some() {
            return Err(parse_err(path, *line, format!("duplicate sample id '{id}'")));
        }
    }
    let missing: Vec<String> = sample_ids.iter().filter(|id| !by_id.contains_key(*id)).cloned().collect();
    if !missing.is_empty() {
        return Err(GrridgeError::InvalidArgument(format!(
            "{}: {} sample(s) of the data have no response: {}",
            path.display(),
            missing.len(),
            list_first(&missing)
        )));
    }
    let values = DVector::from_iterator(sample_ids.len(), sample_ids.iter().map(|id| by_id[id]));
    Response::new(kind, values).map_err(|e| e.context(path.display().to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoDataColumn {
    Numeric(Vec<f64>),
    Labels(Vec<String>),
}

impl CoDataColumn {
    fn len(&self) -> usize {
        match self {
            CoDataColumn::Numeric(v) => v.len(),
            CoDataColumn::Labels(v) => v.len(),
        }
    }

    fn pick(&self, rows: &[usize]) -> Self {
        match self {
            CoDataColumn::Numeric(v) => CoDataColumn::Numeric(rows.iter().map(|&i| v[i]).collect()),
            CoDataColumn::Labels(v) => CoDataColumn::Labels(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }

    /// Field text as written to TSV.
    fn field(&self, i: usize) -> String {
        match self {
            CoDataColumn::Numeric(v) => v[i].to_string(),
            CoDataColumn::Labels(v) => v[i].clone(),
        }
    }
}

/// Co-data sources keyed by column name. A column is numeric when every field
/// parses as a finite number; otherwise it holds labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CoDataTable {
    pub variable_ids: Vec<String>,
    pub columns: Vec<(String, CoDataColumn)>,
}

impl CoDataTable {
    pub fn column(&self, name: &str) -> Result<&CoDataColumn> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c).ok_or_else(|| {
            let names: Vec<String> = self.columns.iter().map(|(n, _)| n.clone()).collect();
            GrridgeError::InvalidArgument(format!("no co-data column '{name}' (available: {})", names.join(", ")))
        })
    }

    /// Rows reordered to follow `ids`; every id must be present.
    pub fn align(&self, ids: &[String]) -> Result<Self> {
        let pos: HashMap<&str, usize> = self.variable_ids.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let missing: Vec<String> = ids.iter().filter(|id| !pos.contains_key(id.as_str())).cloned().collect();
        if !missing.is_empty() {
            return Err(GrridgeError::InvalidArgument(format!(
                "{} variable(s) have no co-data: {}",
                missing.len(),
                list_first(&missing)
            )));
        }
        let rows: Vec<usize> = ids.iter().map(|id| pos[id.as_str()]).collect();
        Ok(Self {
            variable_ids: ids.to_vec(),
            columns: self.columns.iter().map(|(n, c)| (n.clone(), c.pick(&rows))).collect(),
        })
    }
}

pub fn read_codata_tsv(path: &Path) -> Result<CoDataTable> {
    let mut rdr = reader(path, b'\t')?;
    let records = read_records(path, &mut rdr)?;
    let Some(((header_line, header), rows)) = records.split_first() else {
        return Err(parse_err(path, 1, "empty file"));
    };
    if header.len() < 2 {
        return Err(parse_err(path, *header_line, "header needs variable_id followed by co-data columns"));
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut variable_ids = Vec::with_capacity(rows.len());
    let mut raw: Vec<Vec<String>> = vec![Vec::with_capacity(rows.len()); names.len()];
    let mut seen = std::collections::HashSet::new();
    for (line, rec) in rows {
        if rec.len() != names.len() + 1 {
            return Err(parse_err(path, *line, format!("expected {} fields, found {}", names.len() + 1, rec.len())));
        }
        let id = rec[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(parse_err(path, *line, format!("duplicate variable id '{id}'")));
        }
        variable_ids.push(id);
        for (j, field) in rec.iter().skip(1).enumerate() {
            raw[j].push(field.trim().to_string());
        }
    }
    let columns = names
        .into_iter()
        .zip(raw)
        .map(|(name, fields)| {
            let numeric: Option<Vec<f64>> =
                fields.iter().map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite())).collect();
            let col = match numeric {
                Some(v) => CoDataColumn::Numeric(v),
                None => CoDataColumn::Labels(fields),
            };
            (name, col)
        })
        .collect();
    Ok(CoDataTable { variable_ids, columns })
}

fn writer(path: &Path, delimiter: u8) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| GrridgeError::from(e).context(format!("creating {}", path.display())))?;
    Ok(csv::WriterBuilder::new().delimiter(delimiter).from_writer(BufWriter::new(file)))
}

pub fn write_design_csv(path: &Path, x: &DesignMatrix) -> Result<()> {
    let mut w = writer(path, b',')?;
    w.write_record(std::iter::once("sample_id").chain(x.variable_ids().iter().map(String::as_str)))?;
    let v = x.values();
    for (i, id) in x.sample_ids().iter().enumerate() {
        let mut rec = Vec::with_capacity(x.n_vars() + 1);
        rec.push(id.clone());
        rec.extend(v.row(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_response_csv(path: &Path, sample_ids: &[String], y: &Response) -> Result<()> {
    write_scores_csv(path, sample_ids, "y", y.values().as_slice())
}

/// Two-column `sample_id,<name>` CSV.
pub fn write_scores_csv(path: &Path, sample_ids: &[String], name: &str, values: &[f64]) -> Result<()> {
    if sample_ids.len() != values.len() {
        return Err(GrridgeError::DimensionMismatch { what: "scores", expected: sample_ids.len(), got: values.len() });
    }
    let mut w = writer(path, b',')?;
    w.write_record(["sample_id", name])?;
    for (id, v) in sample_ids.iter().zip(values) {
        w.write_record([id.clone(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_codata_tsv(path: &Path, table: &CoDataTable) -> Result<()> {
    for (name, col) in &table.columns {
        if col.len() != table.variable_ids.len() {
            return Err(GrridgeError::InvalidArgument(format!("co-data column '{name}' has the wrong length")));
        }
    }
    let mut w = writer(path, b'\t')?;
    w.write_record(std::iter::once("variable_id").chain(table.columns.iter().map(|(n, _)| n.as_str())))?;
    for (i, id) in table.variable_ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(table.columns.iter().map(|(_, c)| c.field(i)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut f =
        File::create(path).map_err(|e| GrridgeError::from(e).context(format!("creating {}", path.display())))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn design_round_trip_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let m = DMatrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, -2e-300, 5.0, 1e17, std::f64::consts::PI]);
        let x = DesignMatrix::new(m, vec!["a".into(), "b".into(), "c".into()], vec!["s1".into(), "s2".into()]).unwrap();
        write_design_csv(&path, &x).unwrap();
        assert_eq!(read_design_csv(&path).unwrap(), x);
    }

    #[test]
    fn design_parse_error_names_line_and_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "sample_id,a,b\ns1,1,2\ns2,3,oops\n").unwrap();
        let err = read_design_csv(&path).unwrap_err().to_string();
        assert!(err.contains(":3:") && err.contains("column 3") && err.contains("oops"), "{err}");
    }

    #[test]
    fn response_validation() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("y.csv");
        let ids: Vec<String> = vec!["s1".into(), "s2".into(), "s3".into()];
        std::fs::write(&path, "sample_id,y\ns3,1\ns1,0\ns2,1\n").unwrap();
        let y = read_response_csv(&path, ResponseKind::Binary, &ids).unwrap();
        assert_eq!(y.values().as_slice(), &[0.0, 1.0, 1.0]);

        std::fs::write(&path, "sample_id,y\ns1,0\ns2,2\ns3,1\n").unwrap();
        let err = read_response_csv(&path, ResponseKind::Binary, &ids).unwrap_err().to_string();
        assert!(err.contains(":3:") && err.contains("'2'"), "{err}");

        std::fs::write(&path, "sample_id,y\ns1,0\ns2,1\n").unwrap();
        let err = read_response_csv(&path, ResponseKind::Binary, &ids).unwrap_err().to_string();
        assert!(err.contains("s3"), "{err}");
    }

    #[test]
    fn codata_columns_and_alignment() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.tsv");
        std::fs::write(&path, "variable_id\tpval\tannot\nb\t0.5\tx\na\t0.01\ty\n").unwrap();
        let t = read_codata_tsv(&path).unwrap();
        assert_eq!(t.column("pval").unwrap(), &CoDataColumn::Numeric(vec![0.5, 0.01]));
        assert!(matches!(t.column("annot").unwrap(), CoDataColumn::Labels(_)));
        assert!(t.column("nope").is_err());
        let aligned = t.align(&["a".into(), "b".into()]).unwrap();
        assert_eq!(aligned.column("pval").unwrap(), &CoDataColumn::Numeric(vec![0.01, 0.5]));
        let err = t.align(&["a".into(), "z".into()]).unwrap_err().to_string();
        assert!(err.contains('z'));

        let out = dir.path().join("d.tsv");
        write_codata_tsv(&out, &t).unwrap();
        assert_eq!(read_codata_tsv(&out).unwrap(), t);
    }
}
