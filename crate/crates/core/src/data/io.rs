use std::fs;
use std::path::Path;

use super::{DataError, ViewSet};
use crate::autodiff::Matrix;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> DataError {
    DataError::Ingestion(format!("{}: {e}", path.display()))
}

/// Reads a numeric CSV. With `header: None` the first row is skipped only if
/// it does not parse as numbers.
fn read_numeric(path: &Path, header: Option<bool>) -> Result<Vec<Vec<f64>>, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let file = path
        .file_name()
        .map_or_else(String::new, |f| f.to_string_lossy().into_owned());
    let mut rows = Vec::new();
    let mut width = None;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 {
            let parses = rec.iter().all(|c| c.parse::<f64>().is_ok());
            let skip = match header {
                Some(h) => h,
                None => !parses,
            };
            if skip {
                continue;
            }
        }
        let mut row = Vec::with_capacity(rec.len());
        for (col, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                file: file.clone(),
                line,
                column: col + 1,
                value: cell.to_string(),
            })?;
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(DataError::Ingestion(format!(
                    "{file}: line {line} has {} columns, expected {w}",
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a numeric matrix; a first row that does not parse is taken as a header.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix, DataError> {
    let rows = read_numeric(path, None)?;
    if rows.is_empty() {
        return Err(DataError::Ingestion(format!("{}: no data rows", path.display())));
    }
    Ok(Matrix::from_rows(&rows))
}

/// Writes `m` with header `{prefix}1, {prefix}2, ...` and 17 significant digits.
pub fn write_matrix_csv(path: &Path, m: &Matrix, prefix: &str) -> Result<(), DataError> {
    let mut out = String::new();
    let header: Vec<String> = (1..=m.cols()).map(|j| format!("{prefix}{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in m.iter_rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Reads a single column of non-negative integer labels, header optional.
pub fn read_labels_csv(path: &Path) -> Result<Vec<usize>, DataError> {
    let file = path
        .file_name()
        .map_or_else(String::new, |f| f.to_string_lossy().into_owned());
    let rows = read_numeric(path, None)?;
    let mut labels = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        match r.as_slice() {
            [x] if *x >= 0.0 && x.fract() == 0.0 => labels.push(*x as usize),
            _ => {
                return Err(DataError::Ingestion(format!(
                    "{file}: row {} is not a single non-negative integer",
                    i + 1
                )))
            }
        }
    }
    Ok(labels)
}

pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<(), DataError> {
    let mut out = String::from("label\n");
    for l in labels {
        out.push_str(&format!("{l}\n"));
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Loads `view_1.csv ... view_V.csv` (each with a header row), and optional
/// `labels.csv` and `mask.csv` (header optional) from `dir`.
pub fn load_viewset(dir: &Path) -> Result<ViewSet, DataError> {
    let mut views = Vec::new();
    let mut first_file = String::new();
    loop {
        let fname = format!("view_{}.csv", views.len() + 1);
        let path = dir.join(&fname);
        if !path.exists() {
            break;
        }
        let rows = read_numeric(&path, Some(true))?;
        let cols = rows.first().map_or(0, Vec::len);
        let m = Matrix::new(rows.len(), cols, rows.concat())
            .map_err(|e| DataError::Ingestion(format!("{fname}: {e}")))?;
        if let Some(first) = views.first().map(Matrix::rows) {
            if m.rows() != first {
                return Err(DataError::Ingestion(format!(
                    "{fname} has {} rows but {first_file} has {first}",
                    m.rows()
                )));
            }
        } else {
            first_file = fname;
        }
        views.push(m);
    }
    if views.is_empty() {
        return Err(DataError::Ingestion(format!(
            "no view_1.csv in {}",
            dir.display()
        )));
    }
    let n = views[0].rows();

    let labels_path = dir.join("labels.csv");
    let labels = if labels_path.exists() {
        let labels = read_labels_csv(&labels_path)?;
        if labels.len() != n {
            return Err(DataError::Ingestion(format!(
                "labels.csv has {} rows but {first_file} has {n}",
                labels.len()
            )));
        }
        Some(labels)
    } else {
        None
    };

    let mask_path = dir.join("mask.csv");
    let present = if mask_path.exists() {
        let rows = read_numeric(&mask_path, None)?;
        if rows.len() != n {
            return Err(DataError::Ingestion(format!(
                "mask.csv has {} rows but {first_file} has {n}",
                rows.len()
            )));
        }
        let mut present = vec![Vec::with_capacity(n); views.len()];
        for (i, r) in rows.iter().enumerate() {
            if r.len() != views.len() || r.iter().any(|x| *x != 0.0 && *x != 1.0) {
                return Err(DataError::Ingestion(format!(
                    "mask.csv: row {} must hold {} entries of 0 or 1",
                    i + 1,
                    views.len()
                )));
            }
            for (v, x) in r.iter().enumerate() {
                present[v].push(*x == 1.0);
            }
        }
        Some(present)
    } else {
        None
    };

    let name = dir.file_name().map_or_else(
        || "dataset".to_string(),
        |f| f.to_string_lossy().into_owned(),
    );
    ViewSet::new(name, views, labels, present)
}

/// Writes `data` in the directory layout read by [`load_viewset`]. Values are
/// written with 17 significant digits so they read back bit-exactly.
pub fn save_viewset(data: &ViewSet, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (v, m) in data.views().iter().enumerate() {
        let path = dir.join(format!("view_{}.csv", v + 1));
        write_matrix_csv(&path, m, &format!("v{}_", v + 1))?;
    }
    if let Some(labels) = data.labels() {
        write_labels_csv(&dir.join("labels.csv"), labels)?;
    }
    let mask_path = dir.join("mask.csv");
    if !data.is_complete() {
        let header: Vec<String> = (1..=data.n_views()).map(|v| format!("view_{v}")).collect();
        let mut out = header.join(",");
        out.push('\n');
        for i in 0..data.n_samples() {
            let cells: Vec<&str> = (0..data.n_views())
                .map(|v| if data.is_present(i, v) { "1" } else { "0" })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        fs::write(&mask_path, out).map_err(io_err(&mask_path))?;
    } else if mask_path.exists() {
        fs::remove_file(&mask_path).map_err(io_err(&mask_path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_views_no_labels() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("view_1.csv"), "a,b\n1,2\n3,4\n5,6\n7,8\n").unwrap();
        fs::write(dir.path().join("view_2.csv"), "c\n1\n2\n3\n4\n").unwrap();
        let vs = load_viewset(dir.path()).unwrap();
        assert_eq!((vs.n_samples(), vs.n_views()), (4, 2));
        assert!(vs.is_complete());
        assert!(vs.labels().is_none());
        assert_eq!(vs.view(0).row(1), &[3.0, 4.0]);
    }

    #[test]
    fn row_count_mismatch_names_both_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("view_1.csv"), "a\n1\n2\n3\n4\n5\n").unwrap();
        fs::write(dir.path().join("view_2.csv"), "a\n1\n2\n3\n4\n5\n6\n").unwrap();
        let err = load_viewset(dir.path()).unwrap_err().to_string();
        assert!(
            err.contains("view_2.csv") && err.contains("view_1.csv"),
            "{err}"
        );
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("view_1.csv"), "a,b\n1,2\n3,x\n").unwrap();
        match load_viewset(dir.path()).unwrap_err() {
            DataError::Parse {
                line,
                column,
                value,
                ..
            } => {
                assert_eq!((line, column, value.as_str()), (3, 2, "x"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn mask_without_any_view_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("view_1.csv"), "a\n1\n2\n").unwrap();
        fs::write(dir.path().join("view_2.csv"), "a\n1\n2\n").unwrap();
        fs::write(dir.path().join("mask.csv"), "1,0\n0,0\n").unwrap();
        assert!(matches!(
            load_viewset(dir.path()),
            Err(DataError::Validation(_))
        ));
    }

    #[test]
    fn labels_and_mask_with_headers() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("view_1.csv"), "a\n1\n0\n").unwrap();
        fs::write(dir.path().join("view_2.csv"), "a\n1\n2\n").unwrap();
        fs::write(dir.path().join("labels.csv"), "label\n1\n0\n").unwrap();
        fs::write(dir.path().join("mask.csv"), "view_1,view_2\n1,1\n0,1\n").unwrap();
        let vs = load_viewset(dir.path()).unwrap();
        assert_eq!(vs.labels(), Some(&[1, 0][..]));
        assert!(!vs.is_present(1, 0));
        assert_eq!(vs.incomplete_count(), 1);
    }
}
