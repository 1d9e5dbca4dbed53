//! Step formulas.
//!
//! All steps are pure functions of one or two [`PointSample`]s and work for
//! real and complex scalars alike. The canonical Inverse Cubic Iteration step
//! is [`ici_step`]: with residuals `y₀ = f(x₀)`, `y₁ = f(x₁)` and
//! `D = (y₀ - y₁)²`, it returns
//!
//! ```text
//! (y₁²/D)·N(x₀) + (y₀²/D)·N(x₁) - (2y₀y₁/D)·S(x₀, x₁)
//! ```
//!
//! where `N` is a Newton step and `S` the secant step. The weights sum to one,
//! and each estimate is weighted by the other point's squared residual.
//!
//! [`ici_step_blind`] evaluates the inverse cubic Hermite interpolant at
//! `y = 0` term by term and [`ici_step_averaged`] averages base points and
//! updates separately; both equal [`ici_step`] in exact arithmetic and exist
//! to cross-check it.

use thiserror::Error;

use crate::mpscalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("interpolation interval has zero width")]
    DegenerateInterval,
    #[error("equal residuals at both points")]
    EqualResiduals,
    #[error("zero derivative")]
    ZeroDerivative,
}

/// `(x, f(x), f'(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample<S> {
    pub x: S,
    pub y: S,
    pub yp: S,
}

impl<S: Scalar> PointSample<S> {
    pub fn new(x: S, y: S, yp: S) -> Self {
        Self { x, y, yp }
    }
}

fn two<S: Scalar>(like: &S) -> S {
    S::from_i64(2, like.precision())
}

fn three<S: Scalar>(like: &S) -> S {
    S::from_i64(3, like.precision())
}

fn one<S: Scalar>(like: &S) -> S {
    S::one(like.precision())
}

/// Cubic Hermite interpolant of `f` through `pa` and `pb`, at
/// `theta = (x - a)/(b - a)`.
pub fn hermite_forward_eval<S: Scalar>(
    pa: &PointSample<S>,
    pb: &PointSample<S>,
    theta: &S,
) -> Result<S, StepError> {
    let h = pb.x.clone() - &pa.x;
    if h.is_zero() {
        return Err(StepError::DegenerateInterval);
    }
    let one = one(theta);
    let two = two(theta);
    let tm1 = theta.clone() - &one;
    let tm1_sq = tm1.square();
    let t_sq = theta.square();
    let a = (one + &(two.clone() * theta)) * &tm1_sq * &pa.y;
    let b = theta.clone() * &tm1_sq * &h * &pa.yp;
    let c = t_sq.clone() * &(three(theta) - &(two * theta)) * &pb.y;
    let d = t_sq * &tm1 * &h * &pb.yp;
    Ok(a + &b + &c + &d)
}

fn check_inverse_data<S: Scalar>(pa: &PointSample<S>, pb: &PointSample<S>) -> Result<S, StepError> {
    if pa.yp.is_zero() || pb.yp.is_zero() {
        return Err(StepError::ZeroDerivative);
    }
    let delta = pb.y.clone() - &pa.y;
    if delta.is_zero() {
        return Err(StepError::EqualResiduals);
    }
    Ok(delta)
}

/// Cubic Hermite interpolant of the inverse function, at
/// `s = (y - f(a))/(f(b) - f(a))`.
///
/// The data are `x = a, b` at `y = f(a), f(b)` with slopes `1/f'(a)`, `1/f'(b)`.
pub fn hermite_inverse_eval<S: Scalar>(
    pa: &PointSample<S>,
    pb: &PointSample<S>,
    s: &S,
) -> Result<S, StepError> {
    let delta = check_inverse_data(pa, pb)?;
    let one = one(s);
    let two = two(s);
    let oms = one.clone() - s;
    let left = (one + &(two.clone() * s)) * &pa.x + &(s.clone() * &delta / &pa.yp);
    let right = (three(s) - &(two * s)) * &pb.x - &(oms.clone() * &delta / &pb.yp);
    Ok(left * &oms.square() + &(right * &s.square()))
}

/// `x - y/y'`.
pub fn newton_step<S: Scalar>(p: &PointSample<S>) -> Result<S, StepError> {
    if p.yp.is_zero() {
        return Err(StepError::ZeroDerivative);
    }
    Ok(p.x.clone() - &(p.y.clone() / &p.yp))
}

/// Root of the line through both points, written as a correction to `cur`.
pub fn secant_step<S: Scalar>(prev: &PointSample<S>, cur: &PointSample<S>) -> Result<S, StepError> {
    let dy = cur.y.clone() - &prev.y;
    if dy.is_zero() {
        return Err(StepError::EqualResiduals);
    }
    let dx = cur.x.clone() - &prev.x;
    Ok(cur.x.clone() - &(cur.y.clone() * &dx / &dy))
}

/// The three averaging weights, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct IciWeights<S> {
    /// On the Newton step from the older point: `y_cur²/D`.
    pub prev: S,
    /// On the Newton step from the newer point: `y_prev²/D`.
    pub cur: S,
    /// On the secant step: `-2·y_prev·y_cur/D`.
    pub secant: S,
}

pub fn ici_weights<S: Scalar>(y_prev: &S, y_cur: &S) -> Result<IciWeights<S>, StepError> {
    let d = (y_prev.clone() - y_cur).square();
    if d.is_zero() {
        return Err(StepError::EqualResiduals);
    }
    Ok(IciWeights {
        prev: y_cur.square() / &d,
        cur: y_prev.square() / &d,
        secant: -(two(y_prev) * y_prev * y_cur) / &d,
    })
}

fn check_pair<S: Scalar>(prev: &PointSample<S>, cur: &PointSample<S>) -> Result<(), StepError> {
    if prev.yp.is_zero() || cur.yp.is_zero() {
        return Err(StepError::ZeroDerivative);
    }
    if prev.y == cur.y {
        return Err(StepError::EqualResiduals);
    }
    Ok(())
}

/// One Inverse Cubic Iteration step: weighted Newton, Newton, secant.
pub fn ici_step<S: Scalar>(prev: &PointSample<S>, cur: &PointSample<S>) -> Result<S, StepError> {
    check_pair(prev, cur)?;
    let w = ici_weights(&prev.y, &cur.y)?;
    let n_prev = newton_step(prev)?;
    let n_cur = newton_step(cur)?;
    let sec = secant_step(prev, cur)?;
    Ok(w.prev * &n_prev + &(w.cur * &n_cur) + &(w.secant * &sec))
}

/// The inverse interpolant at `y = 0` with `a = x_prev`, `b = x_cur`,
/// expanded directly in `f(a)/Δ`.
pub fn ici_step_blind<S: Scalar>(prev: &PointSample<S>, cur: &PointSample<S>) -> Result<S, StepError> {
    check_pair(prev, cur)?;
    let delta = check_inverse_data(prev, cur)?;
    let (a, fa, fpa) = (&prev.x, &prev.y, &prev.yp);
    let (b, fpb) = (&cur.x, &cur.yp);
    let one = one(a);
    let two = two(a);
    let r = fa.clone() / &delta;
    let opr = one.clone() + &r;
    let first = ((one - &(two.clone() * &r)) * a - &(fa.clone() / fpa)) * &opr.square();
    let second = r.square() * &((three(a) + &(two * &r)) * b - &(delta / fpb * &opr));
    Ok(first + &second)
}

/// Weighted average of the base points plus weighted average of the updates.
pub fn ici_step_averaged<S: Scalar>(
    prev: &PointSample<S>,
    cur: &PointSample<S>,
) -> Result<S, StepError> {
    check_pair(prev, cur)?;
    let w = ici_weights(&prev.y, &cur.y)?;
    let dx = cur.x.clone() - &prev.x;
    let dy = cur.y.clone() - &prev.y;
    let base = w.prev.clone() * &prev.x + &((w.cur.clone() + &w.secant) * &cur.x);
    let update = -(w.prev * &(prev.y.clone() / &prev.yp))
        - &(w.cur * &(cur.y.clone() / &cur.yp))
        - &(w.secant * &(cur.y.clone() * &dx / &dy));
    Ok(base + &update)
}
