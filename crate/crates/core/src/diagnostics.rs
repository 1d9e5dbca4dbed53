//! Convergence diagnostics over residual sequences.
//!
//! Everything here works on the magnitudes `|y_k|` of the residuals, so the
//! functions accept anything implementing [`ResidualSeries`]: a solver trace,
//! or a plain slice of residuals (for synthetic sequences and trace files).
//!
//! For an ICI run the residuals obey `|y_{k+1}| ≈ R·(|y_k|·|y_{k-1}|)²`,
//! so the ratio sequence settles to `R` and `ln|y_{k+1}| / ln|y_k|` tends to
//! `1 + √3`.

use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{self, ExprError};
use crate::mpscalar::{MPReal, Precision, Scalar};
use crate::solve::IterationTrace;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("need at least {needed} nonzero residuals, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("constant fit undefined: final residual must satisfy 0 < |y| < 1")]
    FitUndefined,
    #[error("f'(r) = 0: the root is multiple and the error constant is undefined")]
    MultipleRoot,
    #[error(transparent)]
    Parse(#[from] ExprError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A sequence of residual magnitudes `|y_0|, |y_1|, …`.
pub trait ResidualSeries {
    fn residual_magnitudes(&self) -> Vec<MPReal>;
}

impl ResidualSeries for [MPReal] {
    fn residual_magnitudes(&self) -> Vec<MPReal> {
        self.iter().map(MPReal::abs).collect()
    }
}

impl ResidualSeries for Vec<MPReal> {
    fn residual_magnitudes(&self) -> Vec<MPReal> {
        self.as_slice().residual_magnitudes()
    }
}

impl<S: Scalar> ResidualSeries for IterationTrace<S> {
    fn residual_magnitudes(&self) -> Vec<MPReal> {
        self.residuals()
    }
}

/// `1 + √3`, the asymptotic order of ICI.
pub fn ici_order(p: Precision) -> MPReal {
    MPReal::one(p) + &MPReal::from_i64(3, p).sqrt()
}

/// `−log10|y_k|` for every residual (infinite for an exact zero).
pub fn digits_per_step<R: ResidualSeries + ?Sized>(series: &R) -> Vec<MPReal> {
    series.residual_magnitudes().iter().map(|y| -y.log10_abs()).collect()
}

/// `−log10|x_k − r|` against a reference root: forward-error digits.
pub fn forward_digits<S: Scalar>(trace: &IterationTrace<S>, root: &S) -> Vec<MPReal> {
    trace
        .records
        .iter()
        .map(|rec| -(rec.x.clone() - root).log10_abs())
        .collect()
}

/// `r_k = |y_k| / (|y_{k-1}|·|y_{k-2}|)²` for `k = 2, 3, …`, stopping at the
/// first `k` whose denominator vanishes.
pub fn ratio_sequence<R: ResidualSeries + ?Sized>(series: &R) -> Vec<MPReal> {
    ratios_of(&series.residual_magnitudes())
}

fn ratios_of(y: &[MPReal]) -> Vec<MPReal> {
    let mut out = Vec::new();
    for k in 2..y.len() {
        let den = (y[k - 1].clone() * &y[k - 2]).square();
        if den.is_zero() || !den.is_finite() {
            break;
        }
        out.push(y[k].clone() / &den);
    }
    out
}

/// `C = |y_K|^(ρ^(-K))` with `ρ = 1 + √3`, fitted to the final residual.
pub fn fit_constant<R: ResidualSeries + ?Sized>(series: &R) -> Result<MPReal, DiagnosticsError> {
    let y = series.residual_magnitudes();
    let p = precision_of(&y)?;
    fit_constant_with_order(&y, &ici_order(p))
}

/// As [`fit_constant`] for an arbitrary order law `y_k = C^(order^k)`.
pub fn fit_constant_with_order<R: ResidualSeries + ?Sized>(
    series: &R,
    order: &MPReal,
) -> Result<MPReal, DiagnosticsError> {
    let y = series.residual_magnitudes();
    let (k, last) = match y.last() {
        Some(v) => (y.len() - 1, v),
        None => return Err(DiagnosticsError::TooFewPoints { needed: 1, found: 0 }),
    };
    let one = MPReal::one(last.precision());
    if last.is_zero() || last.is_nan() || last >= &one {
        return Err(DiagnosticsError::FitUndefined);
    }
    let exponent = order.powi(k as i64);
    Ok((last.ln() / &exponent).exp())
}

/// How badly the law `C^(order^k)` fitted at `K` misses the point `K − 1`,
/// in decades: `|log10|y_{K-1}| − order^(K-1)·log10 C|`.
pub fn fit_misfit<R: ResidualSeries + ?Sized>(
    series: &R,
    constant: &MPReal,
    order: &MPReal,
) -> Option<MPReal> {
    let y = series.residual_magnitudes();
    if y.len() < 2 {
        return None;
    }
    let k = y.len() - 2;
    let predicted = order.powi(k as i64) * &constant.log10();
    let actual = y[k].log10_abs();
    actual.is_finite().then(|| (actual - &predicted).abs())
}

/// `r_K · (|y_K|·|y_{K-1}|)²`, the residual the ratio law predicts next.
pub fn predict_next<R: ResidualSeries + ?Sized>(series: &R) -> Result<MPReal, DiagnosticsError> {
    let y = series.residual_magnitudes();
    let ratios = ratios_of(&y);
    let nonzero = y.iter().filter(|v| !v.is_zero()).count();
    // ratios[i] belongs to k = i + 2; the final one must be r_K
    if y.len() < 3 || ratios.len() != y.len() - 2 {
        return Err(DiagnosticsError::TooFewPoints { needed: 3, found: nonzero });
    }
    let k = y.len() - 1;
    let r_last = &ratios[ratios.len() - 1];
    Ok(r_last.clone() * &(y[k].clone() * &y[k - 1]).square())
}

/// `ρ_k = ln|y_{k+1}| / ln|y_k|` indexed by `k`, `None` where the pair is not
/// strictly decreasing below 1.
pub fn order_estimates_indexed<R: ResidualSeries + ?Sized>(series: &R) -> Vec<Option<MPReal>> {
    let y = series.residual_magnitudes();
    let mut out = Vec::new();
    for k in 0..y.len().saturating_sub(1) {
        let (a, b) = (&y[k], &y[k + 1]);
        let one = MPReal::one(a.precision());
        let usable = !b.is_zero() && b < a && a < &one && b.is_finite();
        out.push(usable.then(|| b.ln() / &a.ln()));
    }
    out
}

/// The defined entries of [`order_estimates_indexed`], in order; the last
/// element is the tail estimate.
pub fn order_estimate<R: ResidualSeries + ?Sized>(series: &R) -> Vec<MPReal> {
    order_estimates_indexed(series).into_iter().flatten().collect()
}

/// Which numerator to use for the two-step error constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorConstantForm {
    /// `(f⁗·f'' − 10 f'f''f''' + 15 f''³) / (24 f'³)`, as commonly quoted.
    /// The first term has different units from the others.
    AsPrinted,
    /// `(f'²·f⁗ − 10 f'f''f''' + 15 f''³) / (24 f'³)`, the remainder term of
    /// inverse cubic Hermite interpolation. Dimensionally consistent.
    InverseHermite,
}

/// How a forward-error constant `K` turns into a residual-ratio limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioReading {
    /// Substitute `y ≈ f'·ε` throughout: limit `K / f'³`.
    SubstituteResidual,
    /// Drop a single `f'` from the denominator: limit `K · f'`.
    RemoveOneSlope,
}

/// `K` in `ε_{n+1} ≈ K·(ε_{n-1}·ε_n)²`, from `f', f'', f''', f⁗` at the root.
pub fn error_constant_oracle(
    derivs: &[MPReal; 4],
    form: ErrorConstantForm,
) -> Result<MPReal, DiagnosticsError> {
    let [f1, f2, f3, f4] = derivs;
    if f1.is_zero() {
        return Err(DiagnosticsError::MultipleRoot);
    }
    let p = f1.precision();
    let lead = match form {
        ErrorConstantForm::AsPrinted => f4.clone() * f2,
        ErrorConstantForm::InverseHermite => f1.square() * f4,
    };
    let num = lead - &(MPReal::from_i64(10, p) * f1 * f2 * f3) + &(MPReal::from_i64(15, p) * f2.powi(3));
    Ok(num / &(MPReal::from_i64(24, p) * &f1.powi(3)))
}

/// Residual-ratio limit predicted from the derivatives at the root.
pub fn ratio_limit(
    derivs: &[MPReal; 4],
    form: ErrorConstantForm,
    reading: RatioReading,
) -> Result<MPReal, DiagnosticsError> {
    let k = error_constant_oracle(derivs, form)?;
    Ok(match reading {
        RatioReading::SubstituteResidual => k / &derivs[0].powi(3),
        RatioReading::RemoveOneSlope => k * &derivs[0],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioLimitCandidate {
    pub form: ErrorConstantForm,
    pub reading: RatioReading,
    pub value: MPReal,
}

/// Every form/reading combination, for comparison against an observed limit.
pub fn ratio_limit_candidates(derivs: &[MPReal; 4]) -> Result<Vec<RatioLimitCandidate>, DiagnosticsError> {
    let mut out = Vec::new();
    for form in [ErrorConstantForm::InverseHermite, ErrorConstantForm::AsPrinted] {
        for reading in [RatioReading::SubstituteResidual, RatioReading::RemoveOneSlope] {
            out.push(RatioLimitCandidate { form, reading, value: ratio_limit(derivs, form, reading)? });
        }
    }
    Ok(out)
}

/// `f'(x), f''(x), f'''(x), f⁗(x)` by repeated symbolic differentiation.
pub fn derivatives_at(ftext: &str, x: &MPReal) -> Result<[MPReal; 4], DiagnosticsError> {
    let p = x.precision();
    let e = expr::parse(ftext)?;
    let var = e.variable().unwrap_or("x").to_string();
    let mut d = e;
    let mut out: [MPReal; 4] = std::array::from_fn(|_| MPReal::zero(p));
    for slot in out.iter_mut() {
        d = d.differentiate(&var);
        *slot = d.eval(x, p);
    }
    Ok(out)
}

/// All diagnostics for one residual sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// `log10|y_k|`.
    pub log10_residuals: Vec<MPReal>,
    /// `−log10|y_k|`.
    pub digits_per_step: Vec<MPReal>,
    /// Forward-error digits, when a reference root was supplied.
    pub forward_digits: Vec<MPReal>,
    /// `r_k` for `k = 2, …`.
    pub ratios: Vec<MPReal>,
    pub fitted_constant: Option<MPReal>,
    /// Decades by which the fitted law misses the second-to-last point.
    pub fit_misfit: Option<MPReal>,
    pub order_estimates: Vec<Option<MPReal>>,
    pub predicted_next: Option<MPReal>,
}

impl ConvergenceReport {
    pub fn new<R: ResidualSeries + ?Sized>(series: &R) -> Self {
        let y = series.residual_magnitudes();
        let fitted_constant = fit_constant(&y).ok();
        let fit_misfit = fitted_constant.as_ref().and_then(|c| {
            let order = ici_order(c.precision());
            fit_misfit(&y, c, &order)
        });
        ConvergenceReport {
            log10_residuals: y.iter().map(MPReal::log10_abs).collect(),
            digits_per_step: digits_per_step(&y),
            forward_digits: Vec::new(),
            ratios: ratios_of(&y),
            fitted_constant,
            fit_misfit,
            order_estimates: order_estimates_indexed(&y),
            predicted_next: predict_next(&y).ok(),
        }
    }

    pub fn from_trace<S: Scalar>(trace: &IterationTrace<S>, root: Option<&S>) -> Self {
        let mut report = Self::new(trace);
        if let Some(r) = root {
            report.forward_digits = forward_digits(trace, r);
        }
        report
    }

    pub fn order_tail(&self) -> Option<&MPReal> {
        self.order_estimates.iter().rev().flatten().next()
    }

    pub fn ratio(&self, k: usize) -> Option<&MPReal> {
        k.checked_sub(2).and_then(|i| self.ratios.get(i))
    }

    /// One row per `k`: `k, log10_abs_y, digits, forward_digits, ratio,
    /// order_estimate`; undefined entries are empty.
    pub fn write_csv<W: io::Write>(&self, out: W, digits: usize) -> Result<(), DiagnosticsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "log10_abs_y", "digits", "forward_digits", "ratio", "order_estimate"])?;
        let fmt = |v: Option<&MPReal>| v.map(|v| v.to_decimal(digits)).unwrap_or_default();
        for k in 0..self.log10_residuals.len() {
            w.write_record([
                k.to_string(),
                fmt(self.log10_residuals.get(k)),
                fmt(self.digits_per_step.get(k)),
                fmt(self.forward_digits.get(k)),
                fmt(self.ratio(k)),
                fmt(self.order_estimates.get(k).and_then(Option::as_ref)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// TOML: a `[summary]` table followed by one `[[step]]` per `k`.
    pub fn to_text(&self, digits: usize) -> String {
        #[derive(Serialize)]
        struct Summary {
            fitted_constant: Option<String>,
            fit_misfit_decades: Option<String>,
            predicted_next: Option<String>,
            order_tail: Option<String>,
            final_ratio: Option<String>,
        }
        #[derive(Serialize)]
        struct Step {
            k: usize,
            log10_abs_y: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            forward_digits: Option<String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            ratio: Option<String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            order_estimate: Option<String>,
        }
        #[derive(Serialize)]
        struct Doc {
            summary: Summary,
            step: Vec<Step>,
        }
        let fmt = |v: Option<&MPReal>| v.map(|v| v.to_decimal(digits));
        let doc = Doc {
            summary: Summary {
                fitted_constant: fmt(self.fitted_constant.as_ref()),
                fit_misfit_decades: fmt(self.fit_misfit.as_ref()),
                predicted_next: fmt(self.predicted_next.as_ref()),
                order_tail: fmt(self.order_tail()),
                final_ratio: fmt(self.ratios.last()),
            },
            step: (0..self.log10_residuals.len())
                .map(|k| Step {
                    k,
                    log10_abs_y: self.log10_residuals[k].to_decimal(digits),
                    forward_digits: fmt(self.forward_digits.get(k)),
                    ratio: fmt(self.ratio(k)),
                    order_estimate: fmt(self.order_estimates.get(k).and_then(Option::as_ref)),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("report serializes")
    }

    /// Two columns `k, log10_abs_y`, ready for an external plotting tool.
    pub fn write_plot_data<W: io::Write>(&self, out: W, digits: usize) -> Result<(), DiagnosticsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "log10_abs_y"])?;
        for (k, v) in self.log10_residuals.iter().enumerate() {
            w.write_record([k.to_string(), v.to_decimal(digits)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn precision_of(y: &[MPReal]) -> Result<Precision, DiagnosticsError> {
    y.first()
        .map(MPReal::precision)
        .ok_or(DiagnosticsError::TooFewPoints { needed: 1, found: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::{solve_expr, Method, SolveConfig};

    fn p() -> Precision {
        Precision::digits_const(60)
    }

    /// `y_k = C^(ρ^k)` for `k = 0..=n`.
    fn exact_law(c: &MPReal, rho: &MPReal, n: usize) -> Vec<MPReal> {
        (0..=n).map(|k| c.pow(&rho.powi(k as i64))).collect()
    }

    fn close(a: &MPReal, b: &MPReal, rel: f64) -> bool {
        let scale = a.abs().max(b.abs());
        (a.clone() - b).abs() <= scale * &MPReal::from_f64(rel, a.precision())
    }

    #[test]
    fn ratios_are_constant_on_the_exact_law() {
        let q = p();
        let c = MPReal::parse("0.6437", q).unwrap();
        let y = exact_law(&c, &ici_order(q), 7);
        let r = ratio_sequence(&y);
        assert_eq!(r.len(), 6);
        for v in &r {
            assert!(close(v, &r[0], 1e-50), "{v} vs {}", r[0]);
        }
    }

    #[test]
    fn linear_trace_gives_no_ratios() {
        let q = Precision::digits_const(20);
        let t = solve_expr("x", MPReal::from_i64(5, q), &SolveConfig::new(q)).unwrap();
        assert!(ratio_sequence(&t).is_empty());
    }

    #[test]
    fn ratios_stop_at_zero_denominator() {
        let q = p();
        let y: Vec<MPReal> = ["0.5", "0.1", "0", "0.2", "0.3"]
            .iter()
            .map(|s| MPReal::parse(s, q).unwrap())
            .collect();
        let r = ratio_sequence(&y);
        // k = 2 is fine (denominator 0.05²), k = 3 divides by zero
        assert_eq!(r.len(), 1);
        assert!(r[0].is_zero());
    }

    #[test]
    fn fit_inverts_the_law() {
        let q = p();
        let rho = ici_order(q);
        for c in ["0.6437", "0.01", "0.999"] {
            let c = MPReal::parse(c, q).unwrap();
            let y = exact_law(&c, &rho, 6);
            assert!(close(&fit_constant(&y).unwrap(), &c, 1e-50));
        }
        let single = vec![MPReal::one(q), MPReal::parse("0.6437", q).unwrap().pow(&rho)];
        assert!(close(&fit_constant(&single).unwrap(), &MPReal::parse("0.6437", q).unwrap(), 1e-50));
    }

    #[test]
    fn fit_rejects_large_or_zero_residuals() {
        let q = p();
        assert!(matches!(fit_constant(&vec![MPReal::from_i64(2, q)]), Err(DiagnosticsError::FitUndefined)));
        assert!(matches!(fit_constant(&vec![MPReal::zero(q)]), Err(DiagnosticsError::FitUndefined)));
        assert!(matches!(fit_constant(&Vec::<MPReal>::new()), Err(DiagnosticsError::TooFewPoints { .. })));
    }

    #[test]
    fn prediction_matches_the_exact_law() {
        let q = p();
        let rho = ici_order(q);
        let ten = MPReal::from_i64(10, q);
        let y: Vec<MPReal> = (0..=8).map(|k| ten.pow(&-rho.powi(k))).collect();
        let predicted = predict_next(&y).unwrap();
        let expected = ten.pow(&-rho.powi(9));
        assert!(close(&predicted, &expected, 1e-45));
    }

    #[test]
    fn order_tail_recovers_constructed_orders() {
        let q = p();
        let ten = MPReal::from_i64(10, q);
        for rho in [MPReal::from_i64(2, q), ici_order(q), MPReal::from_i64(3, q)] {
            let y: Vec<MPReal> = (0..8).map(|k| ten.pow(&-(MPReal::from_i64(2, q) * &rho.powi(k)))).collect();
            let tail = order_estimate(&y);
            assert!(close(tail.last().unwrap(), &rho, 1e-40));
        }
    }

    #[test]
    fn order_skips_non_decreasing_pairs() {
        let q = p();
        let y: Vec<MPReal> = ["2", "0.5", "0.6", "0.01", "0.0001"]
            .iter()
            .map(|s| MPReal::parse(s, q).unwrap())
            .collect();
        let idx = order_estimates_indexed(&y);
        assert!(idx[0].is_none() && idx[1].is_none() && idx[2].is_some() && idx[3].is_some());
        assert!(close(idx[3].as_ref().unwrap(), &MPReal::from_i64(2, q), 1e-50));
    }

    #[test]
    fn newton_trace_has_order_two_and_a_poor_ici_fit() {
        let q = Precision::digits_const(300);
        let f = "(x^2+x)*exp(-x)-1/3";
        let x0 = MPReal::parse("2.0", q).unwrap();
        // fixed budget, so the last residual is not rounding noise
        let cfg = SolveConfig::new(q).with_max_iter(7).with_tol(q.pow10(-295));
        let newton = solve_expr(f, x0.clone(), &cfg.clone().with_method(Method::Newton)).unwrap();
        let ici = solve_expr(f, x0, &cfg.with_max_iter(6)).unwrap();
        let rn = ConvergenceReport::new(&newton);
        let ri = ConvergenceReport::new(&ici);
        assert!((rn.order_tail().unwrap().to_f64() - 2.0).abs() < 0.05);
        assert!(rn.fit_misfit.as_ref().unwrap() > ri.fit_misfit.as_ref().unwrap());
    }

    #[test]
    fn error_constant_closed_forms() {
        let q = p();
        let zero = MPReal::zero(q);
        // f = x: every higher derivative vanishes
        let lin = [MPReal::one(q), zero.clone(), zero.clone(), zero.clone()];
        for form in [ErrorConstantForm::AsPrinted, ErrorConstantForm::InverseHermite] {
            assert!(error_constant_oracle(&lin, form).unwrap().is_zero());
        }
        // f = x² − 2 at √2
        let sqrt2 = MPReal::from_i64(2, q).sqrt();
        let d = derivatives_at("x^2-2", &sqrt2).unwrap();
        let expected = MPReal::from_i64(5, q) / &(MPReal::from_i64(16, q) * &sqrt2);
        for form in [ErrorConstantForm::AsPrinted, ErrorConstantForm::InverseHermite] {
            assert!(close(&error_constant_oracle(&d, form).unwrap(), &expected, 1e-55));
        }
        let flat = [zero.clone(), MPReal::one(q), zero.clone(), zero];
        assert!(matches!(
            error_constant_oracle(&flat, ErrorConstantForm::InverseHermite),
            Err(DiagnosticsError::MultipleRoot)
        ));
    }

    #[test]
    fn inverse_hermite_constant_predicts_observed_ratio_limit() {
        let q = Precision::digits_const(200);
        let f = "x^3-2*x-5";
        let t = solve_expr(f, MPReal::from_i64(2, q), &SolveConfig::new(q)).unwrap();
        let d = derivatives_at(f, t.root()).unwrap();
        let limit = ratio_limit(&d, ErrorConstantForm::InverseHermite, RatioReading::SubstituteResidual).unwrap();
        let ratios = ratio_sequence(&t);
        let observed = &ratios[ratios.len() - 2];
        assert!(close(observed, &limit, 1e-3), "{observed} vs {limit}");
        assert_eq!(ratio_limit_candidates(&d).unwrap().len(), 4);
    }

    #[test]
    fn report_serializations() {
        let q = Precision::digits_const(40);
        let t = solve_expr("x^3-2*x-5", MPReal::from_i64(1, q), &SolveConfig::new(q)).unwrap();
        let root = MPReal::parse("2.094551481542326591482386540579302963857", q).unwrap();
        let report = ConvergenceReport::from_trace(&t, Some(&root));
        assert_eq!(report.forward_digits.len(), t.records.len());

        let mut csv_out = Vec::new();
        report.write_csv(&mut csv_out, 8).unwrap();
        let csv_text = String::from_utf8(csv_out).unwrap();
        assert!(csv_text.starts_with("k,log10_abs_y,digits,forward_digits,ratio,order_estimate\n"));
        assert_eq!(csv_text.lines().count(), t.records.len() + 1);

        let text = report.to_text(8);
        assert!(text.contains("[summary]") && text.contains("[[step]]"));
        let parsed: toml::Value = toml::from_str(&text).unwrap();
        assert_eq!(parsed["step"].as_array().unwrap().len(), t.records.len());

        let mut plot = Vec::new();
        report.write_plot_data(&mut plot, 6).unwrap();
        let plot = String::from_utf8(plot).unwrap();
        assert_eq!(plot.lines().next(), Some("k,log10_abs_y"));
    }
}
