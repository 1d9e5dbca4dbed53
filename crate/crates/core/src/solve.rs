//! Iteration driver.
//!
//! A solve starts from one guess `x₀`, takes a Newton step to get `x₁`, then
//! applies the configured two-point step. Every iterate costs exactly one
//! evaluation of `f` and one of `f'`; earlier samples are carried forward and
//! never recomputed.
//!
//! Safeguards (on by default):
//!
//! - `|y_n - y_{n-1}| ≤ dy_guard · max(|y_n|, |y_{n-1}|)` before convergence:
//!   the weights are meaningless, so take a plain Newton step from `x_n`
//!   (recorded as [`StepKind::SafeguardNewton`]).
//! - `|f'| < dfmin · max(1, |y|)` at the point a Newton-type step needs:
//!   fall back to Newton from the other point if it is usable, else stop
//!   with [`Status::Degenerate`].
//!
//! With safeguards off, any exact degeneracy stops the run as
//! [`Status::Degenerate`]. The basin renderer runs this way.

use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{ExprError, Function};
use crate::kernel::{self, PointSample};
use crate::mpscalar::{MPReal, Precision, Scalar, ScalarError};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("initial guess is not finite")]
    NonFiniteStart,
    #[error(transparent)]
    Parse(#[from] ExprError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Newton,
    Secant,
    Ici,
    IciAveraged,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Newton, Method::Secant, Method::Ici, Method::IciAveraged];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::Secant => "secant",
            Method::Ici => "ici",
            Method::IciAveraged => "ici_averaged",
        }
    }

    fn step_kind(self) -> StepKind {
        match self {
            Method::Newton => StepKind::Newton,
            Method::Secant => StepKind::Secant,
            Method::Ici => StepKind::Ici,
            Method::IciAveraged => StepKind::IciAveraged,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "newton" => Ok(Method::Newton),
            "secant" => Ok(Method::Secant),
            "ici" => Ok(Method::Ici),
            "ici_averaged" | "ici-averaged" => Ok(Method::IciAveraged),
            other => Err(format!(
                "unknown method {other:?} (expected newton, secant, ici or ici_averaged)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Seed,
    Newton,
    Secant,
    Ici,
    IciAveraged,
    SafeguardNewton,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Seed => "seed",
            StepKind::Newton => "newton",
            StepKind::Secant => "secant",
            StepKind::Ici => "ici",
            StepKind::IciAveraged => "ici_averaged",
            StepKind::SafeguardNewton => "safeguard_newton",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StepKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "seed" => StepKind::Seed,
            "newton" => StepKind::Newton,
            "secant" => StepKind::Secant,
            "ici" => StepKind::Ici,
            "ici_averaged" => StepKind::IciAveraged,
            "safeguard_newton" => StepKind::SafeguardNewton,
            other => return Err(format!("unknown step kind {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    Degenerate,
    Nan,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Degenerate => "degenerate",
            Status::Nan => "nan",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub precision: Precision,
    /// Stop once `|y_n| ≤ tol`.
    pub tol: MPReal,
    /// Steps after the seed; the last possible iterate is `x_{max_iter}`.
    pub max_iter: usize,
    pub method: Method,
    /// Relative threshold on `|y_n - y_{n-1}|`.
    pub dy_guard: MPReal,
    /// Threshold on `|f'|`, scaled by `max(1, |y|)`.
    pub dfmin: MPReal,
    pub safeguards: bool,
}

impl SolveConfig {
    pub const DEFAULT_MAX_ITER: usize = 50;

    /// Defaults: `tol = 10^(10-digits)`, `dy_guard = dfmin = 10^(5-digits)`,
    /// ICI, 50 steps, safeguards on.
    pub fn new(precision: Precision) -> Self {
        let d = i64::from(precision.digits());
        SolveConfig {
            precision,
            tol: precision.pow10(10 - d),
            max_iter: Self::DEFAULT_MAX_ITER,
            method: Method::Ici,
            dy_guard: precision.pow10(5 - d),
            dfmin: precision.pow10(5 - d),
            safeguards: true,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: MPReal) -> Self {
        self.tol = tol.with_precision(self.precision);
        self
    }

    pub fn with_safeguards(mut self, on: bool) -> Self {
        self.safeguards = on;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let zero = MPReal::zero(self.precision);
        if self.tol.is_nan() || self.tol <= zero {
            return Err(SolveError::InvalidConfig("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(SolveError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.dy_guard < zero || self.dy_guard.is_nan() || self.dfmin < zero || self.dfmin.is_nan() {
            return Err(SolveError::InvalidConfig("dy_guard and dfmin must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<S> {
    pub n: usize,
    pub x: S,
    pub y: S,
    pub yp: S,
    pub step_kind: StepKind,
}

impl<S: Scalar> IterationRecord<S> {
    pub fn sample(&self) -> PointSample<S> {
        PointSample::new(self.x.clone(), self.y.clone(), self.yp.clone())
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yp.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<S> {
    pub records: Vec<IterationRecord<S>>,
    pub status: Status,
}

impl<S: Scalar> IterationTrace<S> {
    pub fn last(&self) -> &IterationRecord<S> {
        self.records.last().expect("a trace always holds the seed")
    }

    /// The final iterate.
    pub fn root(&self) -> &S {
        &self.last().x
    }

    /// Index of the final iterate.
    pub fn iterations(&self) -> usize {
        self.last().n
    }

    /// Number of `f` evaluations, equal to the number of `f'` evaluations.
    pub fn evaluations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// `|y_n|` for every record.
    pub fn residuals(&self) -> Vec<MPReal> {
        self.records.iter().map(|r| r.y.abs()).collect()
    }

    /// Iterates only.
    pub fn xs(&self) -> Vec<S> {
        self.records.iter().map(|r| r.x.clone()).collect()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), SolveError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record(record_row(r).fields())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// TOML document with a `[run]` table and one `[[iteration]]` per record.
    pub fn to_text(&self, meta: &RunMetadata) -> String {
        let doc = TraceDocument {
            run: RunSection {
                function: meta.function.clone(),
                x0: meta.x0.clone(),
                digits: meta.digits,
                tol: meta.tol.clone(),
                method: meta.method,
                max_iter: meta.max_iter,
                status: self.status,
            },
            iteration: self.records.iter().map(record_row).collect(),
        };
        toml::to_string(&doc).expect("trace document serializes")
    }
}

/// Everything needed to rerun a solve, stored next to its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub function: String,
    pub x0: String,
    pub digits: u32,
    pub tol: String,
    pub method: Method,
    pub max_iter: usize,
}

impl RunMetadata {
    pub fn new(function: &str, x0: &str, cfg: &SolveConfig) -> Self {
        RunMetadata {
            function: function.to_string(),
            x0: x0.to_string(),
            digits: cfg.precision.digits(),
            tol: cfg.tol.to_decimal(6),
            method: cfg.method,
            max_iter: cfg.max_iter,
        }
    }
}

pub const CSV_HEADER: [&str; 6] = ["n", "x", "y", "yp", "step_kind", "log10_abs_y"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordRow {
    n: usize,
    x: String,
    y: String,
    yp: String,
    step_kind: StepKind,
    log10_abs_y: String,
}

impl RecordRow {
    fn fields(&self) -> [String; 6] {
        [
            self.n.to_string(),
            self.x.clone(),
            self.y.clone(),
            self.yp.clone(),
            self.step_kind.to_string(),
            self.log10_abs_y.clone(),
        ]
    }
}

fn record_row<S: Scalar>(r: &IterationRecord<S>) -> RecordRow {
    RecordRow {
        n: r.n,
        x: r.x.to_decimal_full(),
        y: r.y.to_decimal_full(),
        yp: r.yp.to_decimal_full(),
        step_kind: r.step_kind,
        log10_abs_y: r.y.log10_abs().to_decimal_full(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RunSection {
    function: String,
    x0: String,
    digits: u32,
    tol: String,
    method: Method,
    max_iter: usize,
    status: Status,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceDocument {
    run: RunSection,
    iteration: Vec<RecordRow>,
}

fn parse_row<S: Scalar>(row: &RecordRow, p: Precision) -> Result<IterationRecord<S>, SolveError> {
    Ok(IterationRecord {
        n: row.n,
        x: S::parse(&row.x, p)?,
        y: S::parse(&row.y, p)?,
        yp: S::parse(&row.yp, p)?,
        step_kind: row.step_kind,
    })
}

/// Reads records written by [`IterationTrace::write_csv`]. Only `n` and `y`
/// are required; missing `x`, `yp` read as NaN and a missing `step_kind` as
/// a seed for `n = 0` and an ICI step otherwise.
pub fn read_csv_records<S: Scalar, R: io::Read>(
    input: R,
    p: Precision,
) -> Result<Vec<IterationRecord<S>>, SolveError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(n_col), Some(y_col)) = (col("n"), col("y")) else {
        return Err(SolveError::Format("csv needs at least the columns n and y".into()));
    };
    let (x_col, yp_col, kind_col) = (col("x"), col("yp"), col("step_kind"));
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |c: Option<usize>| c.and_then(|i| row.get(i)).unwrap_or("nan");
        let n: usize = field(Some(n_col))
            .parse()
            .map_err(|_| SolveError::Format(format!("bad index {:?}", field(Some(n_col)))))?;
        let step_kind = match kind_col.and_then(|i| row.get(i)) {
            Some(k) => k.parse().map_err(SolveError::Format)?,
            None if n == 0 => StepKind::Seed,
            None => StepKind::Ici,
        };
        out.push(IterationRecord {
            n,
            x: S::parse(field(x_col), p)?,
            y: S::parse(field(Some(y_col)), p)?,
            yp: S::parse(field(yp_col), p)?,
            step_kind,
        });
    }
    Ok(out)
}

/// Reads a document written by [`IterationTrace::to_text`].
pub fn read_text<S: Scalar>(text: &str) -> Result<(RunMetadata, IterationTrace<S>), SolveError> {
    let doc: TraceDocument = toml::from_str(text).map_err(|e| SolveError::Format(e.to_string()))?;
    let p = Precision::new(doc.run.digits)?;
    let records = doc
        .iteration
        .iter()
        .map(|row| parse_row(row, p))
        .collect::<Result<Vec<_>, _>>()?;
    if records.is_empty() {
        return Err(SolveError::Format("trace has no iterations".into()));
    }
    let meta = RunMetadata {
        function: doc.run.function,
        x0: doc.run.x0,
        digits: doc.run.digits,
        tol: doc.run.tol,
        method: doc.run.method,
        max_iter: doc.run.max_iter,
    };
    Ok((meta, IterationTrace { records, status: doc.run.status }))
}

enum Next<S> {
    Point(S, StepKind),
    Stop(Status),
}

struct Driver<'a, S, F, D> {
    f: F,
    fp: D,
    cfg: &'a SolveConfig,
    _scalar: std::marker::PhantomData<S>,
}

impl<'a, S, F, D> Driver<'a, S, F, D>
where
    S: Scalar,
    F: Fn(&S) -> S,
    D: Fn(&S) -> S,
{
    fn evaluate(&self, n: usize, x: S, step_kind: StepKind) -> IterationRecord<S> {
        let y = (self.f)(&x);
        let yp = (self.fp)(&x);
        IterationRecord { n, x, y, yp, step_kind }
    }

    fn converged(&self, r: &IterationRecord<S>) -> bool {
        r.y.abs() <= self.cfg.tol
    }

    fn slope_ok(&self, r: &IterationRecord<S>) -> bool {
        if !self.cfg.safeguards {
            return !r.yp.is_zero();
        }
        let scale = r.y.abs().max(MPReal::one(self.cfg.precision));
        r.yp.abs() >= self.cfg.dfmin.clone() * &scale && !r.yp.is_zero()
    }

    fn newton_from(&self, r: &IterationRecord<S>, kind: StepKind) -> Next<S> {
        if !self.slope_ok(r) {
            return Next::Stop(Status::Degenerate);
        }
        match kernel::newton_step(&r.sample()) {
            Ok(x) => Next::Point(x, kind),
            Err(_) => Next::Stop(Status::Degenerate),
        }
    }

    fn next(&self, records: &[IterationRecord<S>]) -> Next<S> {
        let cur = records.last().expect("seed present");
        let method = self.cfg.method;
        if records.len() == 1 || method == Method::Newton {
            return self.newton_from(cur, StepKind::Newton);
        }
        let prev = &records[records.len() - 2];
        if self.cfg.safeguards {
            let dy = (cur.y.clone() - &prev.y).abs();
            let scale = cur.y.abs().max(prev.y.abs());
            if dy <= self.cfg.dy_guard.clone() * &scale {
                return self.newton_from(cur, StepKind::SafeguardNewton);
            }
            if method != Method::Secant && !(self.slope_ok(cur) && self.slope_ok(prev)) {
                // cur first: it is the better point whenever it is usable
                return match self.newton_from(cur, StepKind::SafeguardNewton) {
                    Next::Stop(_) => self.newton_from(prev, StepKind::SafeguardNewton),
                    next => next,
                };
            }
        }
        let (a, b) = (prev.sample(), cur.sample());
        let step = match method {
            Method::Secant => kernel::secant_step(&a, &b),
            Method::Ici => kernel::ici_step(&a, &b),
            Method::IciAveraged => kernel::ici_step_averaged(&a, &b),
            Method::Newton => unreachable!("handled above"),
        };
        match step {
            Ok(x) => Next::Point(x, method.step_kind()),
            Err(_) => Next::Stop(Status::Degenerate),
        }
    }

    fn run(&self, x0: S) -> IterationTrace<S> {
        let seed = self.evaluate(0, x0, StepKind::Seed);
        let mut records = vec![seed];
        let finish = |records, status| IterationTrace { records, status };
        if !records[0].is_finite() {
            return finish(records, Status::Nan);
        }
        if self.converged(&records[0]) {
            return finish(records, Status::Converged);
        }
        for n in 1..=self.cfg.max_iter {
            let (x, kind) = match self.next(&records) {
                Next::Point(x, kind) => (x, kind),
                Next::Stop(status) => return finish(records, status),
            };
            if !x.is_finite() {
                return finish(records, Status::Nan);
            }
            let rec = self.evaluate(n, x, kind);
            let finite = rec.is_finite();
            let done = finite && self.converged(&rec);
            records.push(rec);
            if !finite {
                return finish(records, Status::Nan);
            }
            if done {
                return finish(records, Status::Converged);
            }
        }
        finish(records, Status::MaxIter)
    }
}

/// Runs the configured iteration from `x0` with caller-supplied `f` and `f'`.
pub fn solve<S, F, D>(f: F, fp: D, x0: S, cfg: &SolveConfig) -> Result<IterationTrace<S>, SolveError>
where
    S: Scalar,
    F: Fn(&S) -> S,
    D: Fn(&S) -> S,
{
    cfg.validate()?;
    if !x0.is_finite() {
        return Err(SolveError::NonFiniteStart);
    }
    Ok(Driver { f, fp, cfg, _scalar: std::marker::PhantomData }.run(x0))
}

/// [`solve`] for a function given as text; `f'` comes from the symbolic
/// derivative.
pub fn solve_expr<S: Scalar>(ftext: &str, x0: S, cfg: &SolveConfig) -> Result<IterationTrace<S>, SolveError> {
    let func = Function::parse(ftext, cfg.precision)?;
    solve_function(&func, x0, cfg)
}

pub fn solve_function<S: Scalar>(func: &Function, x0: S, cfg: &SolveConfig) -> Result<IterationTrace<S>, SolveError> {
    solve(|x: &S| func.value(x), |x: &S| func.slope(x), x0, cfg)
}
