use chaoseq::io::{read_complex, read_csv, read_field, read_real, write_csv, write_field, FieldData};
use chaoseq::CliError;
use chaoseq_core::fields::{ComplexField, Grid2D, RealField};
use num_complex::Complex64;

fn grid() -> Grid2D {
    Grid2D::new(9, 8, -1.25, 0.5, 0.1, 0.2).unwrap()
}

#[test]
fn complex_field_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("psi.eqlb");
    let f = ComplexField::from_fn(grid(), |x, y| Complex64::new(x.sin() * 1e-300, y / 3.0));
    write_field(&path, &FieldData::Complex(f.clone()), 1.0 / 7.0).unwrap();
    let (g, t) = read_complex(&path).unwrap();
    assert_eq!(g, f);
    assert_eq!(t, 1.0 / 7.0);
}

#[test]
fn real_field_keeps_infinite_time_stamp() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.eqlb");
    let f = RealField::from_fn(grid(), |x, y| x * y);
    write_field(&path, &FieldData::Real(f.clone()), f64::INFINITY).unwrap();
    let (g, t) = read_real(&path).unwrap();
    assert_eq!(g, f);
    assert!(t.is_infinite());
    assert!(matches!(read_complex(&path), Err(CliError::Format { .. })));
}

#[test]
fn damaged_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.eqlb");
    write_field(&path, &FieldData::Real(RealField::zeros(grid())), 0.0).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    let err = read_field(&path).unwrap_err();
    assert_eq!(err.exit_code(), 4);

    let mut bad = bytes.clone();
    bad[0] = b'X';
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(read_field(&path), Err(CliError::Format { .. })));

    let missing = dir.path().join("absent.eqlb");
    assert!(matches!(read_field(&missing), Err(CliError::Io { .. })));
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    write_csv(&path, "t,v", ["0.5,1e-3", "1.5,-2"]).unwrap();
    let (header, rows) = read_csv(&path).unwrap();
    assert_eq!(header, vec!["t", "v"]);
    assert_eq!(rows, vec![vec![0.5, 1e-3], vec![1.5, -2.0]]);
}
