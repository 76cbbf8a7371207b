//! CSV ingestion and the output file writers.
//!
//! Input files are comma-separated UTF-8 with `.` decimals. A header row is
//! detected by attempting to parse the first record as numbers. Output files
//! are written with round-trip float formatting so identical runs produce
//! byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use rpeclu_core::nalgebra::DMatrix;
use rpeclu_core::{HardPartition, LabeledDataset, ScoredPartition};

use crate::CliError;

/// A parsed input file.
#[derive(Debug, Clone)]
pub struct LoadedData {
    /// Feature matrix, truth column excluded.
    pub x: DMatrix<f64>,
    /// Ground-truth partition when a truth column was requested.
    pub truth: Option<HardPartition>,
    /// Header names of the feature columns, when the file had a header.
    pub feature_names: Option<Vec<String>>,
}

fn read_records(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::Input(format!("malformed CSV record {}: {e}", i + 1)))?;
        rows.push(record.iter().map(|s| s.trim().to_string()).collect());
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{} holds no records", path.display())));
    }
    Ok(rows)
}

fn is_numeric_row(row: &[String]) -> bool {
    row.iter().all(|cell| cell.parse::<f64>().is_ok())
}

/// Reads a numeric CSV, auto-detecting an optional header row and splitting
/// off an optional truth column.
///
/// `truth_column` matches a header name; for headerless files (which must be
/// fully numeric) it may be a 0-based column index.
pub fn read_matrix_csv(path: &Path, truth_column: Option<&str>) -> Result<LoadedData, CliError> {
    let rows = read_records(path)?;
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(CliError::Input(format!(
            "{} has ragged rows; every record must hold {width} fields",
            path.display()
        )));
    }

    let has_header = !is_numeric_row(&rows[0]);
    let (header, data_rows) = if has_header {
        (Some(rows[0].clone()), &rows[1..])
    } else {
        (None, &rows[..])
    };
    if data_rows.is_empty() {
        return Err(CliError::Input(format!("{} holds a header but no data", path.display())));
    }

    let truth_idx = match truth_column {
        None => None,
        Some(name) => {
            let idx = if let Some(h) = &header {
                h.iter().position(|c| c == name).or_else(|| name.parse::<usize>().ok())
            } else {
                name.parse::<usize>().ok()
            };
            let idx = idx.ok_or_else(|| {
                CliError::Input(format!("truth column '{name}' not found in {}", path.display()))
            })?;
            if idx >= width {
                return Err(CliError::Input(format!(
                    "truth column index {idx} out of range for {width} columns"
                )));
            }
            Some(idx)
        }
    };

    let n = data_rows.len();
    let p = width - usize::from(truth_idx.is_some());
    if p == 0 {
        return Err(CliError::Input("no feature columns left after removing the truth column".into()));
    }

    let mut x = DMatrix::zeros(n, p);
    let mut truth_raw: Vec<String> = Vec::new();
    for (i, row) in data_rows.iter().enumerate() {
        let mut jx = 0usize;
        for (j, cell) in row.iter().enumerate() {
            if Some(j) == truth_idx {
                truth_raw.push(cell.clone());
                continue;
            }
            let value = cell.parse::<f64>().map_err(|_| {
                CliError::Input(format!(
                    "non-numeric value '{cell}' at data row {}, column {}",
                    i + 1,
                    j + 1
                ))
            })?;
            x[(i, jx)] = value;
            jx += 1;
        }
    }

    let truth = match truth_idx {
        None => None,
        Some(_) => {
            // Factorize labels in first-appearance order.
            let mut levels: Vec<String> = Vec::new();
            let labels: Vec<usize> = truth_raw
                .iter()
                .map(|v| {
                    if let Some(pos) = levels.iter().position(|l| l == v) {
                        pos
                    } else {
                        levels.push(v.clone());
                        levels.len() - 1
                    }
                })
                .collect();
            let g = levels.len();
            Some(
                HardPartition::new(labels, g)
                    .map_err(|e| CliError::Input(format!("bad truth column: {e}")))?,
            )
        }
    };

    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != truth_idx)
            .map(|(_, name)| name)
            .collect()
    });

    Ok(LoadedData { x, truth, feature_names })
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

/// Writes `row,cluster` lines, one per observation, zero-based on both sides.
pub fn write_partition_csv(path: &Path, partition: &HardPartition) -> Result<(), CliError> {
    create_parent(path)?;
    let mut out = String::from("row,cluster\n");
    for (i, label) in partition.labels().iter().enumerate() {
        out.push_str(&format!("{i},{label}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the score ranking as TSV; the first `selected` rows of the sorted
/// ranking are flagged true.
pub fn write_ranking_tsv(
    path: &Path,
    ranking: &[ScoredPartition],
    selected: usize,
) -> Result<(), CliError> {
    create_parent(path)?;
    let mut out = String::from("projection_index\tbic\tbic_gmm\tbic_reg\tselected\n");
    for (pos, s) in ranking.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            s.projection_index,
            s.bic,
            s.bic_gmm,
            s.bic_reg,
            pos < selected
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes a generated dataset as CSV with feature columns `x1..xp` and a
/// trailing `truth` column of zero-based group labels.
pub fn write_dataset_csv(path: &Path, dataset: &LabeledDataset) -> Result<(), CliError> {
    create_parent(path)?;
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let p = dataset.x.ncols();
    let header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    writeln!(w, "{},truth", header.join(","))?;
    for i in 0..dataset.x.nrows() {
        let mut line = String::new();
        for j in 0..p {
            line.push_str(&format!("{},", dataset.x[(i, j)]));
        }
        line.push_str(&dataset.truth.labels()[i].to_string());
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// One benchmark measurement row.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub scenario: usize,
    pub replicate: usize,
    pub method: &'static str,
    pub ari: f64,
    pub seconds: f64,
}

/// Writes the benchmark table, one row per scenario x replicate x method.
pub fn write_bench_tsv(path: &Path, rows: &[BenchRow]) -> Result<(), CliError> {
    create_parent(path)?;
    let mut out = String::from("scenario\treplicate\tmethod\tari\tseconds\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.3}\n",
            r.scenario, r.replicate, r.method, r.ari, r.seconds
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
