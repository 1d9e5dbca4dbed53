use std::fs;

use ici_core::basins::{self, BasinSpec};
use ici_core::diagnostics::{self, ConvergenceReport};
use ici_core::solve::{self, solve_expr, Method, RunMetadata, SolveConfig, Status};
use ici_core::{MPComplex, MPReal, Precision};

#[test]
fn trace_files_preserve_a_600_digit_residual() {
    let p = Precision::new(1000).unwrap();
    let cfg = SolveConfig::new(p).with_max_iter(8).with_tol(p.pow10(-590));
    let t = solve_expr("(x^2+x)*exp(-x)-1/3", MPReal::parse("2.0", p).unwrap(), &cfg).unwrap();
    assert_eq!(t.status, Status::Converged);

    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("trace.csv");
    fs::write(&csv_path, t.to_csv_string()).unwrap();
    let back = solve::read_csv_records::<MPReal, _>(fs::File::open(&csv_path).unwrap(), p).unwrap();
    assert_eq!(back, t.records);

    let meta = RunMetadata::new("(x^2+x)*exp(-x)-1/3", "2.0", &cfg);
    let (meta2, t2) = solve::read_text::<MPReal>(&t.to_text(&meta)).unwrap();
    assert_eq!(meta2.digits, 1000);
    assert_eq!(t2, t);

    // diagnostics computed from the file match those from the live trace
    let residuals: Vec<MPReal> = back.iter().map(|r| r.y.clone()).collect();
    assert_eq!(diagnostics::ratio_sequence(&residuals), diagnostics::ratio_sequence(&t));
}

#[test]
fn report_matches_direct_calls() {
    let p = Precision::new(300).unwrap();
    let t = solve_expr("x^3-2*x-5", MPReal::from_i64(2, p), &SolveConfig::new(p)).unwrap();
    let report = ConvergenceReport::new(&t);
    assert_eq!(report.ratios, diagnostics::ratio_sequence(&t));
    assert_eq!(report.order_estimates.iter().flatten().cloned().collect::<Vec<_>>(), diagnostics::order_estimate(&t));
    assert_eq!(report.digits_per_step.len(), t.records.len());
}

#[test]
fn every_method_solves_the_classic_cubic() {
    let p = Precision::new(60).unwrap();
    let root = "2.09455148154232659148238654057930296385730610562823918";
    let r = MPReal::parse(root, p).unwrap();
    for method in Method::ALL {
        let cfg = SolveConfig::new(p).with_method(method);
        let t = solve_expr("x^3-2*x-5", MPReal::from_i64(2, p), &cfg).unwrap();
        assert!(t.converged(), "{method}");
        assert!((t.root().clone() - &r).abs() <= p.pow10(-48), "{method}");
    }
}

#[test]
fn complex_trace_round_trips_through_text() {
    let p = Precision::new(40).unwrap();
    let cfg = SolveConfig::new(p);
    let z0 = MPComplex::parse("-0.5-0.8i", p).unwrap();
    let t = solve_expr("z^3-1", z0, &cfg).unwrap();
    let meta = RunMetadata::new("z^3-1", "-0.5-0.8i", &cfg);
    let (_, back) = solve::read_text::<MPComplex>(&t.to_text(&meta)).unwrap();
    assert_eq!(back, t);
    assert!(t.root().im.is_sign_negative());
}

#[test]
fn basin_image_file_and_soundness() {
    let spec = BasinSpec::new("z^3-1", (-2.0, 2.0), (-2.0, 2.0), 40);
    let raster = basins::render(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.ppm");
    basins::write_image(&raster, &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P6\n40 40\n255\n"));
    assert_eq!(bytes.len(), "P6\n40 40\n255\n".len() + 40 * 40 * 3);

    let roots = basins::roots_of_unity(3, spec.precision);
    let func = ici_core::expr::Function::parse("z^3-1", spec.precision).unwrap();
    for px in raster.pixels.iter().filter(|px| px.converged) {
        assert!(func.value(&px.limit).abs() <= spec.tol);
        let hundred_tol = spec.tol.clone() * &MPReal::from_i64(100, spec.precision);
        assert!(roots.iter().any(|r| (r.clone() - &px.limit).abs() <= hundred_tol));
    }
}
