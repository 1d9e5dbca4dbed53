use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ici_core::basins::{self, BasinSpec, RootAssignment};
use ici_core::diagnostics::ConvergenceReport;
use ici_core::expr::Function;
use ici_core::solve::{self, IterationRecord, IterationTrace, Method, RunMetadata, SolveConfig, Status};
use ici_core::{MPComplex, MPReal, Precision, Scalar};

use crate::args::{BasinArgs, CompareArgs, Format, OrderArgs, ScanArgs, SolveArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NO_CONVERGENCE: u8 = 2;

/// Below this tail order estimate the run is reported as slowly converging.
const SLOW_ORDER: f64 = 1.5;

/// Digits shown for iterates in tables; files always get full precision.
const TABLE_DIGITS: usize = 24;

fn precision(digits: u32) -> Result<Precision> {
    Precision::new(digits).context("--digits")
}

/// A starting value with an imaginary part selects complex arithmetic.
fn looks_complex(text: &str) -> bool {
    let lowered = text.to_ascii_lowercase().replace("inf", "").replace("nan", "");
    lowered.contains('i') || lowered.contains('j')
}

fn config(p: Precision, tol: Option<&str>, max_iter: usize, method: Method) -> Result<SolveConfig> {
    let mut cfg = SolveConfig::new(p).with_method(method).with_max_iter(max_iter);
    if let Some(t) = tol {
        cfg = cfg.with_tol(MPReal::parse(t, p).with_context(|| format!("--tol: cannot parse {t:?}"))?);
    }
    cfg.validate().context("invalid settings")?;
    Ok(cfg)
}

fn parse_function(text: &str, p: Precision) -> Result<Function> {
    Function::parse(text, p).with_context(|| format!("--f: cannot parse {text:?}"))
}

fn parse_start<S: Scalar>(text: &str, p: Precision) -> Result<S> {
    S::parse(text, p).with_context(|| format!("--x0: cannot parse {text:?}"))
}

fn status_exit(status: Status) -> u8 {
    if status == Status::Converged {
        EXIT_OK
    } else {
        EXIT_NO_CONVERGENCE
    }
}

fn fmt_log10(v: &MPReal) -> String {
    let f = v.to_f64();
    if f.is_finite() {
        format!("{f:.4}")
    } else {
        f.to_string()
    }
}

fn iteration_table<S: Scalar>(trace: &IterationTrace<S>) -> String {
    let mut s = format!("{:>4}  {:<16}  {:<width$}  {:>12}\n", "n", "step", "x", "log10|y|", width = TABLE_DIGITS + 8);
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{:>4}  {:<16}  {:<width$}  {:>12}",
            r.n,
            r.step_kind.as_str(),
            r.x.to_decimal(TABLE_DIGITS),
            fmt_log10(&r.y.log10_abs()),
            width = TABLE_DIGITS + 8
        );
    }
    s
}

fn describe_status(status: Status, steps: usize) -> String {
    let steps = if steps == 1 { "1 step".to_string() } else { format!("{steps} steps") };
    match status {
        Status::Converged => format!("converged after {steps}"),
        Status::MaxIter => format!("no convergence within {steps}"),
        Status::Degenerate => format!("stopped at a degenerate step after {steps}"),
        Status::Nan => format!("NaN encountered after {steps}"),
    }
}

fn slow_convergence_warning<S: Scalar>(trace: &IterationTrace<S>) -> Option<String> {
    let report = ConvergenceReport::new(trace);
    let tail = report.order_tail()?.to_f64();
    (tail < SLOW_ORDER).then(|| {
        format!(
            "warning: slow convergence (order estimate {tail:.3} over the last steps); the root may be multiple"
        )
    })
}

fn write_trace<S: Scalar>(trace: &IterationTrace<S>, meta: &RunMetadata, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Csv => trace.to_csv_string(),
        Format::Text => trace.to_text(meta),
    };
    fs::write(path, text).with_context(|| format!("--out: cannot write {}", path.display()))
}

pub fn run_solve(a: &SolveArgs) -> Result<u8> {
    let p = precision(a.digits)?;
    if a.complex || looks_complex(&a.x0) {
        solve_typed::<MPComplex>(a, p)
    } else {
        solve_typed::<MPReal>(a, p)
    }
}

fn solve_typed<S: Scalar>(a: &SolveArgs, p: Precision) -> Result<u8> {
    let cfg = config(p, a.tol.as_deref(), a.max_iter, a.method)?;
    let func = parse_function(&a.f, p)?;
    let x0: S = parse_start(&a.x0, p)?;
    let trace = solve::solve_function(&func, x0, &cfg)?;
    print!("{}", iteration_table(&trace));
    println!("status: {} ({} evaluations each of f and f')", describe_status(trace.status, trace.iterations()), trace.evaluations());
    println!("root: {}", trace.root().to_decimal_full());
    println!("residual: {}", trace.last().y.abs().to_decimal(6));
    if let Some(w) = slow_convergence_warning(&trace) {
        eprintln!("{w}");
    }
    if let Some(path) = &a.out {
        write_trace(&trace, &RunMetadata::new(&a.f, &a.x0, &cfg), path, a.format)?;
    }
    Ok(status_exit(trace.status))
}

fn load_trace(path: &Path, p: Precision) -> Result<Vec<IterationRecord<MPComplex>>> {
    let text = fs::read_to_string(path).with_context(|| format!("--trace: cannot read {}", path.display()))?;
    if let Ok((_, trace)) = solve::read_text::<MPComplex>(&text) {
        return Ok(trace.records);
    }
    let records = solve::read_csv_records(text.as_bytes(), p)
        .with_context(|| format!("--trace: {} is neither a text nor a CSV trace", path.display()))?;
    if records.is_empty() {
        bail!("--trace: {} holds no records", path.display());
    }
    Ok(records)
}

fn report_table(report: &ConvergenceReport) -> String {
    let mut s = format!("{:>4}  {:>14}  {:>12}  {:>10}\n", "k", "log10|y_k|", "ratio", "order");
    for (k, log) in report.log10_residuals.iter().enumerate() {
        let ratio = report.ratio(k).map(|r| r.to_decimal(6)).unwrap_or_default();
        let order = report
            .order_estimates
            .get(k)
            .and_then(Option::as_ref)
            .map(|r| format!("{:.4}", r.to_f64()))
            .unwrap_or_default();
        let _ = writeln!(s, "{k:>4}  {:>14}  {ratio:>12}  {order:>10}", fmt_log10(log));
    }
    if let Some(c) = &report.fitted_constant {
        let misfit = report.fit_misfit.as_ref().map(|m| format!(", misfit {:.4} decades at K-1", m.to_f64())).unwrap_or_default();
        let _ = writeln!(s, "fitted constant: C = {} in |y_k| = C^((1+sqrt 3)^k){misfit}", c.to_decimal(6));
    }
    if let Some(pred) = &report.predicted_next {
        let _ = writeln!(s, "predicted next residual: {}", pred.to_decimal(6));
    }
    if let Some(t) = report.order_tail() {
        let _ = writeln!(s, "order estimate (tail): {:.4}", t.to_f64());
    }
    s
}

fn emit_report(report: &ConvergenceReport, a: &OrderArgs) -> Result<()> {
    print!("{}", report_table(report));
    if let Some(path) = &a.out {
        match a.format {
            Format::Csv => {
                let out = File::create(path).with_context(|| format!("--out: cannot create {}", path.display()))?;
                report.write_csv(BufWriter::new(out), 20)?;
            }
            Format::Text => fs::write(path, report.to_text(20))
                .with_context(|| format!("--out: cannot write {}", path.display()))?,
        }
    }
    if let Some(path) = &a.plot {
        let out = BufWriter::new(File::create(path).with_context(|| format!("--plot: cannot create {}", path.display()))?);
        report.write_plot_data(out, 20)?;
    }
    Ok(())
}

pub fn run_order(a: &OrderArgs) -> Result<u8> {
    let p = precision(a.digits)?;
    if let Some(path) = &a.trace {
        let records = load_trace(path, p)?;
        let residuals: Vec<MPReal> = records.iter().map(|r| r.y.abs()).collect();
        emit_report(&ConvergenceReport::new(&residuals), a)?;
        return Ok(EXIT_OK);
    }
    let (f, x0) = match (&a.f, &a.x0) {
        (Some(f), Some(x0)) => (f, x0),
        _ => bail!("--f and --x0 are required unless --trace is given"),
    };
    if a.complex || looks_complex(x0) {
        order_typed::<MPComplex>(a, f, x0, p)
    } else {
        order_typed::<MPReal>(a, f, x0, p)
    }
}

fn order_typed<S: Scalar>(a: &OrderArgs, f: &str, x0: &str, p: Precision) -> Result<u8> {
    let cfg = config(p, a.tol.as_deref(), a.max_iter, a.method)?;
    let func = parse_function(f, p)?;
    let trace = solve::solve_function(&func, parse_start::<S>(x0, p)?, &cfg)?;
    let root = match &a.root {
        Some(r) => Some(S::parse(r, p).with_context(|| format!("--root: cannot parse {r:?}"))?),
        None => None,
    };
    let report = ConvergenceReport::from_trace(&trace, root.as_ref());
    println!("{}", describe_status(trace.status, trace.iterations()));
    emit_report(&report, a)?;
    if let Some(w) = slow_convergence_warning(&trace) {
        eprintln!("{w}");
    }
    Ok(status_exit(trace.status))
}

fn tolerance(text: &str, p: Precision) -> Result<MPReal> {
    MPReal::parse(text, p).with_context(|| format!("--tol: cannot parse {text:?}"))
}

pub fn run_basin(a: &BasinArgs) -> Result<u8> {
    let p = precision(a.digits)?;
    let mut spec = BasinSpec::new(&a.f, (a.re[0], a.re[1]), (a.im[0], a.im[1]), a.size)
        .with_precision(p)
        .with_max_iter(a.max_iter)
        .with_tol(tolerance(&a.tol, p)?);
    spec.method = a.method;
    spec.width = a.width.unwrap_or(a.size);
    spec.height = a.height.unwrap_or(a.size);
    let raster = basins::render(&spec).context("basin")?;
    basins::write_image(&raster, &a.out).with_context(|| format!("--out: cannot write {}", a.out.display()))?;
    if let Some(path) = &a.csv {
        let out = BufWriter::new(File::create(path).with_context(|| format!("--csv: cannot create {}", path.display()))?);
        raster.write_csv(out)?;
    }
    let total = raster.pixels.len();
    let (conv, nan) = (raster.converged_count(), raster.nan_count());
    println!(
        "{}x{} pixels: {conv} converged, {} unconverged, {nan} NaN",
        raster.width,
        raster.height,
        total - conv - nan
    );
    println!("wrote {}", a.out.display());
    Ok(EXIT_OK)
}

fn assignment_char(a: &RootAssignment) -> char {
    match a {
        RootAssignment::Root(k) if *k < 10 => char::from(b'0' + *k as u8),
        RootAssignment::Root(_) => '+',
        RootAssignment::Unconverged => 'X',
        RootAssignment::Nan => 'N',
    }
}

pub fn run_scan(a: &ScanArgs) -> Result<u8> {
    let p = precision(a.digits)?;
    let mut spec = BasinSpec::new(&a.f, (-1.0, 1.0), (-1.0, 1.0), 1)
        .with_precision(p)
        .with_max_iter(a.max_iter)
        .with_tol(tolerance(&a.tol, p)?);
    spec.method = a.method;
    let from = MPComplex::parse(&a.from, p).with_context(|| format!("--from: cannot parse {:?}", a.from))?;
    let to = MPComplex::parse(&a.to, p).with_context(|| format!("--to: cannot parse {:?}", a.to))?;
    let scan = basins::line_scan(&spec, &from, &to, a.samples).context("scan")?;
    for (k, r) in scan.roots.iter().enumerate() {
        println!("root {k}: {}", r.to_decimal(16));
    }
    println!("assignments: {}", scan.assignments.iter().map(assignment_char).collect::<String>());
    println!("changes: {}", scan.changes());
    if let Some(path) = &a.out {
        let mut s = String::from("k,t,assignment\n");
        for (k, asg) in scan.assignments.iter().enumerate() {
            let t = (k as f64 + 0.5) / a.samples as f64;
            let label = match asg {
                RootAssignment::Root(i) => i.to_string(),
                RootAssignment::Unconverged => "unconverged".into(),
                RootAssignment::Nan => "nan".into(),
            };
            let _ = writeln!(s, "{k},{t},{label}");
        }
        fs::write(path, s).with_context(|| format!("--out: cannot write {}", path.display()))?;
    }
    Ok(EXIT_OK)
}

pub fn run_compare(a: &CompareArgs) -> Result<u8> {
    let p = precision(a.digits)?;
    if a.complex || looks_complex(&a.x0) {
        compare_typed::<MPComplex>(a, p)
    } else {
        compare_typed::<MPReal>(a, p)
    }
}

fn compare_typed<S: Scalar>(a: &CompareArgs, p: Precision) -> Result<u8> {
    let func = parse_function(&a.f, p)?;
    let x0: S = parse_start(&a.x0, p)?;
    println!("{:<14}  {:<11}  {:>5}  {:>7}  {:>7}  {:>14}", "method", "status", "steps", "f evals", "f' evals", "log10|y|");
    for &method in &a.methods {
        let cfg = config(p, a.tol.as_deref(), a.max_iter, method)?;
        let trace = solve::solve_function(&func, x0.clone(), &cfg)?;
        println!(
            "{:<14}  {:<11}  {:>5}  {:>7}  {:>7}  {:>14}",
            method.as_str(),
            trace.status.as_str(),
            trace.iterations(),
            trace.evaluations(),
            trace.evaluations(),
            fmt_log10(&trace.last().y.log10_abs())
        );
    }
    Ok(EXIT_OK)
}
