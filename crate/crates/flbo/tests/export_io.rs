//! File-exchange oracles: Matrix Market round-trips must be bit-exact, the
//! on-disk layout must match the documented format, CSV tables must carry
//! their headers, and every reader must reject malformed content with an
//! error that names the file.

use std::fs;
use std::path::{Path, PathBuf};

use flbo::export::{
    atomic_write, descriptor_to_csv, eigenvalues_to_csv, field_to_csv, frames_to_csv,
    matrix_to_csv, parse_matrix_market, read_coefficients, read_field_csv,
    read_mass_matrix_market, read_stiffness_matrix_market, stiffness_to_matrix_market,
    write_mass_matrix_market, write_stiffness_matrix_market, MatrixMarket,
};
use flbo::mesh::FaceFrame;
use flbo::operator::{assemble_flbo, assemble_mass, AnisotropyParams};
use flbo::shapes::{icosphere, two_triangle_square};
use flbo::FlboError;
use nalgebra::{DMatrix, DVector, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Fresh per-test scratch directory under the system temp dir.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("flbo_export_io_test").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn assert_format_error(result: Result<MatrixMarket, FlboError>, needle: &str) {
    match result {
        Err(FlboError::Format { path, message }) => {
            assert!(
                message.contains(needle),
                "expected '{needle}' in '{message}'"
            );
            assert!(path.contains("case.mtx"), "error should name the file");
        }
        other => panic!("expected a format error mentioning '{needle}', got {other:?}"),
    }
}

#[test]
fn stiffness_matrix_market_round_trips_bit_exactly() {
    let dir = scratch("stiffness_round_trip");
    let mesh = icosphere(1).unwrap();
    let params = AnisotropyParams::new(10.0, 0.5, 8).unwrap();
    let assembled = assemble_flbo(&mesh, &params, 0.7).unwrap();
    let stiffness = &assembled.pair.stiffness;

    let path = dir.join("sphere.W.mtx");
    write_stiffness_matrix_market(&path, stiffness).unwrap();
    let reread = read_stiffness_matrix_market(&path).unwrap();

    assert_eq!(reread.nrows(), stiffness.nrows());
    assert_eq!(reread.ncols(), stiffness.ncols());
    let original = DMatrix::from(stiffness);
    let recovered = DMatrix::from(&reread);
    for i in 0..original.nrows() {
        for j in 0..original.ncols() {
            assert_eq!(
                original[(i, j)].to_bits(),
                recovered[(i, j)].to_bits(),
                "entry ({i}, {j}) changed across the round trip"
            );
        }
    }
}

#[test]
fn stiffness_text_stores_the_sorted_lower_triangle() {
    let mesh = two_triangle_square().unwrap();
    let params = AnisotropyParams::new(0.0, 0.0, 1).unwrap();
    let assembled = assemble_flbo(&mesh, &params, 0.0).unwrap();
    let text = stiffness_to_matrix_market(&assembled.pair.stiffness);

    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "%%MatrixMarket matrix coordinate real symmetric"
    );
    // The diagonal edge of the square has right angles on both sides, so its
    // weight is exactly zero and is dropped: four boundary edges plus four
    // diagonal entries remain.
    assert_eq!(lines.next().unwrap(), "4 4 8");

    let mut entries = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields.len(), 3);
        let i: usize = fields[0].parse().unwrap();
        let j: usize = fields[1].parse().unwrap();
        let v: f64 = fields[2].parse().unwrap();
        assert!(i >= 1 && j >= 1, "indices must be 1-based");
        assert!(i >= j, "only the lower triangle may be stored");
        assert_ne!(v, 0.0, "exact zeros must be dropped");
        entries.push((i, j, v));
    }
    let mut sorted = entries.clone();
    sorted.sort_by_key(|&(i, j, _)| (i, j));
    assert_eq!(entries, sorted, "entries must be sorted by (row, column)");

    let index_pairs: Vec<(usize, usize)> = entries.iter().map(|&(i, j, _)| (i, j)).collect();
    assert_eq!(
        index_pairs,
        vec![
            (1, 1),
            (2, 1),
            (2, 2),
            (3, 2),
            (3, 3),
            (4, 1),
            (4, 3),
            (4, 4)
        ]
    );
    for &(i, j, v) in &entries {
        let expected = if i == j { -1.0 } else { 0.5 };
        assert!((v - expected).abs() <= 1e-12, "entry ({i}, {j}) = {v}");
    }
}

#[test]
fn mass_matrix_market_round_trips_bit_exactly() {
    let dir = scratch("mass_round_trip");
    let mesh = icosphere(1).unwrap();
    let mass = assemble_mass(&mesh);

    let path = dir.join("sphere.S.mtx");
    write_mass_matrix_market(&path, &mass).unwrap();

    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "%%MatrixMarket matrix array real general"
    );
    assert_eq!(lines.next().unwrap(), "42 1");

    let reread = read_mass_matrix_market(&path).unwrap();
    assert_eq!(reread.len(), mass.len());
    for (a, b) in reread.iter().zip(mass.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn matrix_market_parser_accepts_comments_blanks_and_case_changes() {
    let path = PathBuf::from("case.mtx");
    let text = "%%matrixmarket MATRIX Coordinate REAL Symmetric\n\
                % a comment after the header\n\
                \n\
                3 3 2\n\
                % another comment between entries\n\
                2 1 -4.25\n\
                \n\
                3 3 1.5e-3\n";
    match parse_matrix_market(text, &path).unwrap() {
        MatrixMarket::Coordinate {
            nrows,
            ncols,
            symmetric,
            triplets,
        } => {
            assert_eq!((nrows, ncols), (3, 3));
            assert!(symmetric);
            assert_eq!(triplets, vec![(1, 0, -4.25), (2, 2, 1.5e-3)]);
        }
        other => panic!("expected coordinate content, got {other:?}"),
    }

    let text = "%%MatrixMarket matrix array real general\n% sizes\n2 2\n1\n2 3\n4\n";
    match parse_matrix_market(text, &path).unwrap() {
        MatrixMarket::Array {
            nrows,
            ncols,
            values,
        } => {
            assert_eq!((nrows, ncols), (2, 2));
            assert_eq!(values, vec![1.0, 2.0, 3.0, 4.0]);
        }
        other => panic!("expected array content, got {other:?}"),
    }
}

#[test]
fn matrix_market_parser_rejects_malformed_content() {
    let path = PathBuf::from("case.mtx");
    let cases: &[(&str, &str)] = &[
        ("", "empty file"),
        ("%%MatrixMarket vector coordinate real symmetric\n1 1 0\n", "expected header"),
        ("%%MatrixMarket matrix coordinate complex symmetric\n1 1 0\n", "expected header"),
        ("%%MatrixMarket matrix tensor real general\n1 1\n", "unsupported format 'tensor'"),
        (
            "%%MatrixMarket matrix coordinate real skew-symmetric\n1 1 0\n",
            "unsupported symmetry",
        ),
        ("%%MatrixMarket matrix coordinate real symmetric\n", "missing size line"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2\n", "needs 3 numbers"),
        ("%%MatrixMarket matrix array real general\n3\n", "needs 2 numbers"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 x 1\n1 1 1.0\n", "bad size token"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1\n", "needs 3 fields"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 abc\n", "bad value"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n0 1 1.0\n", "outside"),
        (
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n",
            "promised 2 entries, found 1",
        ),
        ("%%MatrixMarket matrix array real general\n2 1\n1.0\n", "promised 2 values, found 1"),
        ("%%MatrixMarket matrix array real general\n2 1\n1.0\nxyz\n", "bad value"),
    ];
    for (text, needle) in cases {
        assert_format_error(parse_matrix_market(text, &path), needle);
    }
}

#[test]
fn mismatched_formats_are_rejected_by_the_typed_readers() {
    let dir = scratch("mismatched_formats");

    let mass_path = dir.join("diag.S.mtx");
    write_mass_matrix_market(&mass_path, &DVector::from_vec(vec![1.0, 2.0])).unwrap();
    match read_stiffness_matrix_market(&mass_path) {
        Err(FlboError::Format { message, .. }) => {
            assert!(message.contains("expected a coordinate-format matrix"));
        }
        other => panic!("expected a format mismatch, got {other:?}"),
    }

    let mesh = two_triangle_square().unwrap();
    let params = AnisotropyParams::new(0.0, 0.0, 1).unwrap();
    let assembled = assemble_flbo(&mesh, &params, 0.0).unwrap();
    let stiff_path = dir.join("square.W.mtx");
    write_stiffness_matrix_market(&stiff_path, &assembled.pair.stiffness).unwrap();
    match read_mass_matrix_market(&stiff_path) {
        Err(FlboError::Format { message, .. }) => {
            assert!(message.contains("expected an array-format matrix"));
        }
        other => panic!("expected a format mismatch, got {other:?}"),
    }

    let wide_path = dir.join("wide.mtx");
    atomic_write(
        &wide_path,
        "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n",
    )
    .unwrap();
    match read_mass_matrix_market(&wide_path) {
        Err(FlboError::Format { message, .. }) => {
            assert!(message.contains("expected an n×1 array, found 2×2"));
        }
        other => panic!("expected a shape complaint, got {other:?}"),
    }
}

#[test]
fn csv_tables_carry_the_expected_headers() {
    let eigenvalues = DVector::from_vec(vec![0.0, 2.0]);
    assert_eq!(eigenvalues_to_csv(&eigenvalues), "index,lambda\n0,0e0\n1,2e0\n");

    let field = DVector::from_vec(vec![-1.5, 0.25]);
    assert_eq!(field_to_csv(&field), "vertex,value\n0,-1.5e0\n1,2.5e-1\n");

    let values = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(
        descriptor_to_csv(&values, &[0.01, 1.0]),
        "vertex,t=1e-2,t=1e0\n0,1e0,2e0\n1,3e0,4e0\n"
    );
    assert_eq!(
        matrix_to_csv(&values),
        "vertex,phi_0,phi_1\n0,1e0,2e0\n1,3e0,4e0\n"
    );

    let frame = FaceFrame {
        u_max: Vector3::x(),
        u_min: Vector3::y(),
        normal: Vector3::z(),
    };
    assert_eq!(
        frames_to_csv(&[frame]),
        "face_id,u_max_x,u_max_y,u_max_z,u_min_x,u_min_y,u_min_z,\
         normal_x,normal_y,normal_z\n\
         0,1e0,0e0,0e0,0e0,1e0,0e0,0e0,0e0,1e0\n"
    );
}

#[test]
fn field_csv_round_trips_and_accepts_bare_values() {
    let dir = scratch("field_round_trip");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0006);
    let field = DVector::from_fn(37, |_, _| rng.random_range(-3.0..3.0));

    let path = dir.join("field.csv");
    atomic_write(&path, &field_to_csv(&field)).unwrap();
    let reread = read_field_csv(&path).unwrap();
    assert_eq!(reread.len(), field.len());
    for (a, b) in reread.iter().zip(field.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // Bare values, blank lines, and trailing whitespace are all accepted.
    let bare = dir.join("bare.txt");
    atomic_write(&bare, "1.5\n\n  2.5  \n-3e-2\n").unwrap();
    let values = read_field_csv(&bare).unwrap();
    assert_eq!(values.as_slice(), &[1.5, 2.5, -3e-2]);

    // A numeric first line is data, not a header.
    let headerless = dir.join("headerless.csv");
    atomic_write(&headerless, "3.25\n1.0\n").unwrap();
    assert_eq!(read_field_csv(&headerless).unwrap().len(), 2);

    // Multi-column rows contribute their last column.
    let indexed = dir.join("indexed.csv");
    atomic_write(&indexed, "vertex,extra,value\n0,9.0,1.25\n1,9.0,2.75\n").unwrap();
    assert_eq!(read_field_csv(&indexed).unwrap().as_slice(), &[1.25, 2.75]);
}

#[test]
fn field_csv_rejects_garbage_and_missing_files() {
    let dir = scratch("field_errors");

    let garbled = dir.join("garbled.csv");
    atomic_write(&garbled, "vertex,value\n0,1.0\n1,oops\n").unwrap();
    match read_field_csv(&garbled) {
        Err(FlboError::Format { message, .. }) => {
            assert!(message.contains("line 3"), "got '{message}'");
            assert!(message.contains("oops"));
        }
        other => panic!("expected a format error, got {other:?}"),
    }

    let header_only = dir.join("header_only.csv");
    atomic_write(&header_only, "vertex,value\n").unwrap();
    match read_field_csv(&header_only) {
        Err(FlboError::Format { message, .. }) => assert!(message.contains("no values found")),
        other => panic!("expected a format error, got {other:?}"),
    }

    match read_field_csv(&dir.join("missing.csv")) {
        Err(FlboError::Io(e)) => assert_eq!(e.kind(), std::io::ErrorKind::NotFound),
        other => panic!("expected an I/O error, got {other:?}"),
    }
}

#[test]
fn coefficient_files_round_trip_and_reject_garbage() {
    let dir = scratch("coefficients");

    let path = dir.join("cheb.txt");
    atomic_write(&path, "1.0\n-0.5\n\n0.25\n").unwrap();
    assert_eq!(read_coefficients(&path).unwrap(), vec![1.0, -0.5, 0.25]);

    let garbled = dir.join("garbled.txt");
    atomic_write(&garbled, "1.0\nxyz\n").unwrap();
    match read_coefficients(&garbled) {
        Err(FlboError::Format { message, .. }) => {
            assert!(message.contains("cannot parse coefficient 'xyz'"));
        }
        other => panic!("expected a format error, got {other:?}"),
    }

    let empty = dir.join("empty.txt");
    atomic_write(&empty, "\n\n").unwrap();
    match read_coefficients(&empty) {
        Err(FlboError::Format { message, .. }) => {
            assert!(message.contains("no coefficients found"));
        }
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn atomic_writes_replace_existing_files_and_leave_no_temporaries() {
    let dir = scratch("atomic_write");
    let path = dir.join("report.json");

    atomic_write(&path, "first").unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "first");

    atomic_write(&path, "second").unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "second");

    let names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["report.json"], "no temporary may remain");

    match atomic_write(Path::new("/"), "anything") {
        Err(FlboError::Format { message, .. }) => assert!(message.contains("no file name")),
        other => panic!("expected a format error, got {other:?}"),
    }
}
