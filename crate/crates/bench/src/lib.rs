//! Fixtures shared by the criterion benches.

use ici_core::kernel::PointSample;
use ici_core::{MPReal, Precision};

/// The exp example used throughout the benches.
pub const EXP_F: &str = "(x^2+x)*exp(-x)-1/3";

/// A representative pair of samples at `digits` digits, close to a root so
/// the step is in its asymptotic regime.
pub fn sample_pair(digits: u32) -> (PointSample<MPReal>, PointSample<MPReal>) {
    let p = Precision::new(digits).expect("precision");
    let r = |s: &str| MPReal::parse(s, p).expect("literal");
    (
        PointSample::new(r("4.17"), r("-0.00019"), r("-0.1889")),
        PointSample::new(r("4.1689"), r("0.0000083"), r("-0.1888")),
    )
}
