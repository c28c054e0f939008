//! File exchange: Matrix Market matrices, CSV tables, and atomic writes.
//!
//! Floats are written with Rust's shortest round-trip scientific formatting,
//! so writing and re-reading reproduces every value bit-exactly. All writers
//! go through [`atomic_write`]: content lands in a temporary file in the
//! destination directory and is renamed into place, so readers never observe
//! partial files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{FlboError, Result};
use crate::mesh::FaceFrame;

fn format_error(path: &Path, message: impl Into<String>) -> FlboError {
    FlboError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Writes `content` to `path` atomically: a sibling temporary file is
/// written and then renamed over the destination.
pub fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| format_error(path, "path has no file name"))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp_path = path.with_file_name(tmp_name);
    fs::write(&tmp_path, content)?;
    fs::rename(&tmp_path, path)?;
    Ok(())
}

/// Renders a symmetric sparse matrix in Matrix Market coordinate format:
/// lower triangle only, 1-based indices sorted by (row, column), exact zeros
/// dropped.
pub fn stiffness_to_matrix_market(matrix: &CscMatrix<f64>) -> String {
    let mut entries: Vec<(usize, usize, f64)> = matrix
        .triplet_iter()
        .filter(|(i, j, v)| i >= j && **v != 0.0)
        .map(|(i, j, v)| (i, j, *v))
        .collect();
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(
        out,
        "{} {} {}",
        matrix.nrows(),
        matrix.ncols(),
        entries.len()
    );
    for (i, j, v) in entries {
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    out
}

/// Renders a diagonal (stored as a vector) in Matrix Market array format as
/// an `n × 1` real general matrix.
pub fn mass_to_matrix_market(diagonal: &DVector<f64>) -> String {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} 1", diagonal.len());
    for v in diagonal.iter() {
        let _ = writeln!(out, "{:e}", v);
    }
    out
}

pub fn write_stiffness_matrix_market(path: &Path, matrix: &CscMatrix<f64>) -> Result<()> {
    atomic_write(path, &stiffness_to_matrix_market(matrix))
}

pub fn write_mass_matrix_market(path: &Path, diagonal: &DVector<f64>) -> Result<()> {
    atomic_write(path, &mass_to_matrix_market(diagonal))
}

/// Parsed Matrix Market content.
#[derive(Clone, Debug)]
pub enum MatrixMarket {
    Coordinate {
        nrows: usize,
        ncols: usize,
        symmetric: bool,
        /// 0-based triplets exactly as stored (one per file entry; symmetric
        /// counterparts are not expanded).
        triplets: Vec<(usize, usize, f64)>,
    },
    Array {
        nrows: usize,
        ncols: usize,
        /// Column-major values.
        values: Vec<f64>,
    },
}

/// Parses Matrix Market text (coordinate or array, real, general or
/// symmetric).
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<MatrixMarket> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_error(path, "empty file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5
        || !tokens[0].eq_ignore_ascii_case("%%MatrixMarket")
        || !tokens[1].eq_ignore_ascii_case("matrix")
        || !tokens[3].eq_ignore_ascii_case("real")
    {
        return Err(format_error(
            path,
            "expected header '%%MatrixMarket matrix <format> real <symmetry>'",
        ));
    }
    let coordinate = match tokens[2].to_ascii_lowercase().as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(format_error(path, format!("unsupported format '{other}'"))),
    };
    let symmetric = match tokens[4].to_ascii_lowercase().as_str() {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(format_error(
                path,
                format!("unsupported symmetry '{other}'"),
            ))
        }
    };
    let mut data_lines = lines.filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let size_line = data_lines
        .next()
        .ok_or_else(|| format_error(path, "missing size line"))?;
    let sizes: Vec<&str> = size_line.split_whitespace().collect();
    let parse_usize = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| format_error(path, format!("bad size token '{s}'")))
    };
    if coordinate {
        if sizes.len() != 3 {
            return Err(format_error(path, "coordinate size line needs 3 numbers"));
        }
        let nrows = parse_usize(sizes[0])?;
        let ncols = parse_usize(sizes[1])?;
        let nnz = parse_usize(sizes[2])?;
        let mut triplets = Vec::with_capacity(nnz);
        for line in data_lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(format_error(
                    path,
                    format!("coordinate entry needs 3 fields, got '{line}'"),
                ));
            }
            let i = parse_usize(fields[0])?;
            let j = parse_usize(fields[1])?;
            let v: f64 = fields[2]
                .parse()
                .map_err(|_| format_error(path, format!("bad value '{}'", fields[2])))?;
            if i == 0 || j == 0 || i > nrows || j > ncols {
                return Err(format_error(
                    path,
                    format!("entry ({i}, {j}) outside a {nrows}×{ncols} matrix"),
                ));
            }
            triplets.push((i - 1, j - 1, v));
        }
        if triplets.len() != nnz {
            return Err(format_error(
                path,
                format!("size line promised {nnz} entries, found {}", triplets.len()),
            ));
        }
        Ok(MatrixMarket::Coordinate {
            nrows,
            ncols,
            symmetric,
            triplets,
        })
    } else {
        if sizes.len() != 2 {
            return Err(format_error(path, "array size line needs 2 numbers"));
        }
        let nrows = parse_usize(sizes[0])?;
        let ncols = parse_usize(sizes[1])?;
        let mut values = Vec::with_capacity(nrows * ncols);
        for line in data_lines {
            for field in line.split_whitespace() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| format_error(path, format!("bad value '{field}'")))?;
                values.push(v);
            }
        }
        if values.len() != nrows * ncols {
            return Err(format_error(
                path,
                format!(
                    "array promised {} values, found {}",
                    nrows * ncols,
                    values.len()
                ),
            ));
        }
        Ok(MatrixMarket::Array {
            nrows,
            ncols,
            values,
        })
    }
}

/// Reads a symmetric stiffness matrix written by
/// [`write_stiffness_matrix_market`], expanding the stored triangle.
pub fn read_stiffness_matrix_market(path: &Path) -> Result<CscMatrix<f64>> {
    let text = crate::error::read_text(path)?;
    match parse_matrix_market(&text, path)? {
        MatrixMarket::Coordinate {
            nrows,
            ncols,
            symmetric,
            triplets,
        } => {
            let mut coo = CooMatrix::new(nrows, ncols);
            for (i, j, v) in triplets {
                coo.push(i, j, v);
                if symmetric && i != j {
                    coo.push(j, i, v);
                }
            }
            Ok(CscMatrix::from(&coo))
        }
        MatrixMarket::Array { .. } => Err(format_error(
            path,
            "expected a coordinate-format matrix, found array format",
        )),
    }
}

/// Reads a mass diagonal written by [`write_mass_matrix_market`].
pub fn read_mass_matrix_market(path: &Path) -> Result<DVector<f64>> {
    let text = crate::error::read_text(path)?;
    match parse_matrix_market(&text, path)? {
        MatrixMarket::Array {
            nrows,
            ncols,
            values,
        } => {
            if ncols != 1 {
                return Err(format_error(
                    path,
                    format!("expected an n×1 array, found {nrows}×{ncols}"),
                ));
            }
            Ok(DVector::from_vec(values))
        }
        MatrixMarket::Coordinate { .. } => Err(format_error(
            path,
            "expected an array-format matrix, found coordinate format",
        )),
    }
}

/// Eigenvalue table: `index,lambda` with one row per eigenvalue.
pub fn eigenvalues_to_csv(eigenvalues: &DVector<f64>) -> String {
    let mut out = String::from("index,lambda\n");
    for (i, v) in eigenvalues.iter().enumerate() {
        let _ = writeln!(out, "{},{:e}", i, v);
    }
    out
}

/// Per-vertex scalar field: `vertex,value`.
pub fn field_to_csv(field: &DVector<f64>) -> String {
    let mut out = String::from("vertex,value\n");
    for (i, v) in field.iter().enumerate() {
        let _ = writeln!(out, "{},{:e}", i, v);
    }
    out
}

/// Descriptor table: header row carries the time values, one row per vertex.
pub fn descriptor_to_csv(values: &nalgebra::DMatrix<f64>, times: &[f64]) -> String {
    let mut out = String::from("vertex");
    for t in times {
        let _ = write!(out, ",t={:e}", t);
    }
    out.push('\n');
    for row in 0..values.nrows() {
        let _ = write!(out, "{}", row);
        for col in 0..values.ncols() {
            let _ = write!(out, ",{:e}", values[(row, col)]);
        }
        out.push('\n');
    }
    out
}

/// Eigenvector matrix dump: one row per vertex, one column per mode.
pub fn matrix_to_csv(values: &nalgebra::DMatrix<f64>) -> String {
    let mut out = String::from("vertex");
    for col in 0..values.ncols() {
        let _ = write!(out, ",phi_{col}");
    }
    out.push('\n');
    for row in 0..values.nrows() {
        let _ = write!(out, "{}", row);
        for col in 0..values.ncols() {
            let _ = write!(out, ",{:e}", values[(row, col)]);
        }
        out.push('\n');
    }
    out
}

/// Curvature-frame table: `face_id` plus the three frame vectors.
pub fn frames_to_csv(frames: &[FaceFrame]) -> String {
    let mut out = String::from(
        "face_id,u_max_x,u_max_y,u_max_z,u_min_x,u_min_y,u_min_z,normal_x,normal_y,normal_z\n",
    );
    for (f, frame) in frames.iter().enumerate() {
        let _ = write!(out, "{}", f);
        for v in [&frame.u_max, &frame.u_min, &frame.normal] {
            let _ = write!(out, ",{:e},{:e},{:e}", v.x, v.y, v.z);
        }
        out.push('\n');
    }
    out
}

/// Reads a per-vertex scalar field. Accepts either bare values (one per
/// line) or `vertex,value` CSV as produced by [`field_to_csv`]; a leading
/// non-numeric header row is skipped, and the last comma-separated column is
/// the value.
pub fn read_field_csv(path: &Path) -> Result<DVector<f64>> {
    let text = crate::error::read_text(path)?;
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let last = trimmed.rsplit(',').next().unwrap_or(trimmed).trim();
        match last.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if line_no == 0 => continue,
            Err(_) => {
                return Err(format_error(
                    path,
                    format!("line {}: cannot parse value '{last}'", line_no + 1),
                ))
            }
        }
    }
    if values.is_empty() {
        return Err(format_error(path, "no values found"));
    }
    Ok(DVector::from_vec(values))
}

/// Reads Chebyshev coefficients: one value per line, empty lines ignored.
pub fn read_coefficients(path: &Path) -> Result<Vec<f64>> {
    let text = crate::error::read_text(path)?;
    let mut values = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        values.push(trimmed.parse::<f64>().map_err(|_| {
            format_error(path, format!("cannot parse coefficient '{trimmed}'"))
        })?);
    }
    if values.is_empty() {
        return Err(format_error(path, "no coefficients found"));
    }
    Ok(values)
}
