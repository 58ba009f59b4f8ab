//! Reading and writing the tabular and text formats.

use std::fs;
use std::path::Path;

use hetreg::{ClusterStructure, Dataset};
use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// A data file: response (if present), design, feature names and sample ids.
#[derive(Debug, Clone)]
pub struct Table {
    pub y: Option<Array1<f64>>,
    pub x: Array2<f64>,
    pub features: Vec<String>,
    pub ids: Vec<String>,
}

impl Table {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dataset(&self, path: &Path) -> Result<Dataset, CliError> {
        let y = self
            .y
            .clone()
            .ok_or_else(|| CliError::Data(format!("{}: no `y` column", path.display())))?;
        Ok(Dataset::new(y, self.x.clone(), Some(self.features.clone()))?)
    }
}

fn parse_number(text: &str, path: &Path, line: u64, column: &str) -> Result<f64, CliError> {
    let v: f64 = text.trim().parse().map_err(|_| {
        CliError::Data(format!(
            "{} line {line}: column `{column}`: cannot parse {text:?} as a number",
            path.display()
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::Data(format!(
            "{} line {line}: column `{column}`: value {text:?} is not finite",
            path.display()
        )));
    }
    Ok(v)
}

/// Reads a CSV with a header row. `y` is the response, `id` an optional
/// sample id, every other column a numeric feature (order preserved).
pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .clone();
    let y_col = headers.iter().position(|h| h.trim() == "y");
    let id_col = headers.iter().position(|h| h.trim() == "id");
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| Some(c) != y_col && Some(c) != id_col).collect();
    let features: Vec<String> = feature_cols.iter().map(|&c| headers[c].trim().to_string()).collect();

    let mut ys = Vec::new();
    let mut values = Vec::new();
    let mut ids = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(String::from("?"), |p| p.line().to_string());
            CliError::Data(format!("{} line {line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(row as u64 + 2, |p| p.line());
        if let Some(c) = y_col {
            ys.push(parse_number(&record[c], path, line, "y")?);
        }
        for (&c, name) in feature_cols.iter().zip(&features) {
            values.push(parse_number(&record[c], path, line, name)?);
        }
        ids.push(match id_col {
            Some(c) => record[c].to_string(),
            None => (row + 1).to_string(),
        });
    }
    let n = ids.len();
    if n == 0 {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let x = Array2::from_shape_vec((n, features.len()), values).expect("rows have equal length");
    Ok(Table {
        y: y_col.map(|_| Array1::from(ys)),
        x,
        features,
        ids,
    })
}

pub fn write_table(path: &Path, y: &Array1<f64>, x: &Array2<f64>, features: &[String]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string()];
    header.extend(features.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in x.rows().into_iter().enumerate() {
        let mut rec = Vec::with_capacity(row.len() + 1);
        rec.push(y[i].to_string());
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Named clusters with 1-based feature indices as read from a cluster file.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFile {
    pub names: Vec<String>,
    pub clusters: Vec<Vec<usize>>,
}

/// Parses `name: j1,j2,...` lines. Blank lines and lines starting with `#`
/// are skipped.
pub fn parse_clusters(text: &str, p: usize, source: &str) -> Result<ClusterFile, CliError> {
    let mut names = Vec::new();
    let mut clusters = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = no + 1;
        let (name, list) = line
            .split_once(':')
            .ok_or_else(|| CliError::Data(format!("{source} line {lineno}: expected `name: j1,j2,...`")))?;
        let mut members = Vec::new();
        for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let j: usize = tok
                .parse()
                .map_err(|_| CliError::Data(format!("{source} line {lineno}: {tok:?} is not a feature index")))?;
            if j == 0 || j > p {
                return Err(CliError::Data(format!(
                    "{source} line {lineno}: feature index {j} is out of range 1..={p}"
                )));
            }
            members.push(j);
        }
        if members.is_empty() {
            return Err(CliError::Data(format!("{source} line {lineno}: cluster `{}` is empty", name.trim())));
        }
        names.push(name.trim().to_string());
        clusters.push(members);
    }
    if clusters.is_empty() {
        return Err(CliError::Data(format!("{source}: no clusters")));
    }
    Ok(ClusterFile { names, clusters })
}

pub fn read_clusters(path: &Path, p: usize) -> Result<ClusterFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_clusters(&text, p, &path.display().to_string())
}

impl ClusterFile {
    pub fn structure(&self, p: usize) -> Result<ClusterStructure, CliError> {
        let zero_based = self.clusters.iter().map(|c| c.iter().map(|j| j - 1).collect()).collect();
        Ok(ClusterStructure::new(p, zero_based)?)
    }

    pub fn from_structure(cs: &ClusterStructure) -> Self {
        Self {
            names: (1..=cs.n_clusters()).map(|l| format!("c{l}")).collect(),
            clusters: cs.clusters().iter().map(|c| c.iter().map(|j| j + 1).collect()).collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, c) in self.names.iter().zip(&self.clusters) {
            let list: Vec<String> = c.iter().map(usize::to_string).collect();
            out.push_str(&format!("{name}: {}\n", list.join(",")));
        }
        out
    }
}

/// `sample_id,subgroup` rows, subgroups 1-based.
pub fn write_labels(path: &Path, ids: &[String], labels: &[usize]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_id", "subgroup"])?;
    for (id, &g) in ids.iter().zip(labels) {
        w.write_record([id.as_str(), &(g + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a labels file back into ids and 0-based subgroups.
pub fn read_labels(path: &Path) -> Result<(Vec<String>, Vec<usize>), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 2 {
            return Err(CliError::Data(format!("{} line {line}: expected sample_id,subgroup", path.display())));
        }
        let g: usize = record[1]
            .trim()
            .parse()
            .ok()
            .filter(|&g| g >= 1)
            .ok_or_else(|| CliError::Data(format!("{} line {line}: bad subgroup {:?}", path.display(), &record[1])))?;
        ids.push(record[0].to_string());
        labels.push(g - 1);
    }
    if ids.is_empty() {
        return Err(CliError::Data(format!("{}: no rows", path.display())));
    }
    Ok((ids, labels))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_lines() {
        let f = parse_clusters("# comment\na: 1,2\n\nb: 2, 3\n", 3, "c.txt").unwrap();
        assert_eq!(f.names, vec!["a", "b"]);
        assert_eq!(f.clusters, vec![vec![1, 2], vec![2, 3]]);
        assert_eq!(parse_clusters(&f.render(), 3, "x").unwrap(), f);
    }

    #[test]
    fn cluster_errors_name_the_line() {
        let e = parse_clusters("a: 1,2\nb: 4\n", 3, "c.txt").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = parse_clusters("a 1,2\n", 3, "c.txt").unwrap_err();
        assert!(e.to_string().contains("line 1"));
        assert!(parse_clusters("a: 0\n", 3, "c.txt").is_err());
        assert!(parse_clusters("", 3, "c.txt").is_err());
    }
}
