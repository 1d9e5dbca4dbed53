//! Basins of attraction in the complex plane.
//!
//! Every pixel center is used as a starting point; the iteration runs with
//! safeguards off, so exact degeneracies (`Δy = 0`, `f' = 0`) and overflow
//! show up as NaN pixels instead of being patched over. NaN pixels are drawn
//! white, the rest by the phase of the final iterate.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{ExprError, Function};
use crate::mpscalar::{MPComplex, MPReal, Precision};
use crate::solve::{self, Method, SolveConfig, SolveError, Status};

#[derive(Debug, Error)]
pub enum BasinError {
    #[error("invalid basin spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Parse(#[from] ExprError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct BasinSpec {
    pub ftext: String,
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub width: usize,
    pub height: usize,
    pub max_iter: usize,
    pub tol: MPReal,
    pub precision: Precision,
    pub method: Method,
}

impl BasinSpec {
    pub const DEFAULT_MAX_ITER: usize = 13;

    /// Square `size × size` grid at quad-equivalent precision, 13 ICI steps,
    /// tolerance `1e-8`.
    pub fn new(ftext: &str, re_range: (f64, f64), im_range: (f64, f64), size: usize) -> Self {
        let precision = Precision::quad();
        BasinSpec {
            ftext: ftext.to_string(),
            re_range,
            im_range,
            width: size,
            height: size,
            max_iter: Self::DEFAULT_MAX_ITER,
            tol: precision.pow10(-8),
            precision,
            method: Method::Ici,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: MPReal) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.tol = self.tol.with_precision(precision);
        self.precision = precision;
        self
    }

    pub fn validate(&self) -> Result<(), BasinError> {
        let bad = |m: &str| Err(BasinError::InvalidSpec(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("width and height must be at least 1");
        }
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a < b;
        if !ordered(self.re_range) || !ordered(self.im_range) {
            return bad("ranges must be finite with min < max");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        Ok(())
    }

    fn solve_config(&self) -> SolveConfig {
        SolveConfig::new(self.precision)
            .with_method(self.method)
            .with_max_iter(self.max_iter)
            .with_tol(self.tol.clone())
            .with_safeguards(false)
    }

    /// Center of pixel `(i, j)`; row 0 is the top of the imaginary range.
    pub fn pixel_center(&self, i: usize, j: usize) -> MPComplex {
        let p = self.precision;
        let lerp = |lo: f64, hi: f64, n: usize, k: usize| {
            let lo = MPReal::from_f64(lo, p);
            let span = MPReal::from_f64(hi, p) - &lo;
            let t = MPReal::from_i64(2 * k as i64 + 1, p) / &MPReal::from_i64(2 * n as i64, p);
            (lo, span * &t)
        };
        let (re_lo, re_off) = lerp(self.re_range.0, self.re_range.1, self.width, i);
        let (_, im_off) = lerp(self.im_range.0, self.im_range.1, self.height, j);
        MPComplex::new(re_lo + &re_off, MPReal::from_f64(self.im_range.1, p) - &im_off)
    }
}

/// Outcome of iterating from one starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinPixel {
    pub z0: MPComplex,
    /// Final iterate; NaN for NaN pixels.
    pub limit: MPComplex,
    /// Index of the final iterate (0 when the start is already a root).
    pub iterations: usize,
    pub converged: bool,
    pub nan: bool,
}

impl BasinPixel {
    /// Phase of the limit in `(−π, π]`; `None` for NaN pixels and a zero limit.
    pub fn phase(&self) -> Option<MPReal> {
        if self.nan {
            return None;
        }
        self.limit.phase().ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinRaster {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 at the top.
    pub pixels: Vec<BasinPixel>,
}

impl BasinRaster {
    pub fn pixel(&self, i: usize, j: usize) -> &BasinPixel {
        &self.pixels[j * self.width + i]
    }

    pub fn nan_count(&self) -> usize {
        self.pixels.iter().filter(|px| px.nan).count()
    }

    pub fn converged_count(&self) -> usize {
        self.pixels.iter().filter(|px| px.converged).count()
    }

    /// RGB triples, row-major.
    pub fn colors(&self) -> Vec<[u8; 3]> {
        self.pixels.iter().map(pixel_color).collect()
    }

    pub fn write_ppm<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        for rgb in self.colors() {
            out.write_all(&rgb)?;
        }
        out.flush()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BasinError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "re_z0", "im_z0", "converged", "iterations", "phase"])?;
        for (idx, px) in self.pixels.iter().enumerate() {
            let phase = if px.nan {
                "nan".to_string()
            } else {
                px.phase().map(|ph| ph.to_decimal(17)).unwrap_or_default()
            };
            w.write_record([
                (idx % self.width).to_string(),
                (idx / self.width).to_string(),
                px.z0.re.to_decimal(17),
                px.z0.im.to_decimal(17),
                px.converged.to_string(),
                px.iterations.to_string(),
                phase,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Hue `(phase + π) / 2π` at full saturation and value; NaN is white and an
/// undefined phase (limit exactly 0) is black.
pub fn pixel_color(px: &BasinPixel) -> [u8; 3] {
    if px.nan {
        return [255, 255, 255];
    }
    match px.phase() {
        Some(ph) => phase_color(ph.to_f64()),
        None => [0, 0, 0],
    }
}

pub fn phase_color(phase: f64) -> [u8; 3] {
    let hue = (phase + std::f64::consts::PI) / std::f64::consts::TAU;
    hsv_to_rgb(hue, 1.0, 1.0)
}

/// Standard HSV → RGB with `h` in turns (wrapped into `[0, 1)`).
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = (h6.floor() as i64).rem_euclid(6);
    let f = h6 - h6.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let to_u8 = |c: f64| (c * 255.0).round().clamp(0.0, 255.0) as u8;
    [to_u8(r), to_u8(g), to_u8(b)]
}

fn iterate(func: &Function, cfg: &SolveConfig, z0: MPComplex) -> BasinPixel {
    let trace = match solve::solve_function(func, z0.clone(), cfg) {
        Ok(t) => t,
        Err(_) => {
            let nan = MPComplex::new(MPReal::nan(cfg.precision), MPReal::nan(cfg.precision));
            return BasinPixel { z0, limit: nan, iterations: 0, converged: false, nan: true };
        }
    };
    let nan = matches!(trace.status, Status::Nan | Status::Degenerate);
    let limit = if nan {
        MPComplex::new(MPReal::nan(cfg.precision), MPReal::nan(cfg.precision))
    } else {
        trace.root().clone()
    };
    BasinPixel { z0, limit, iterations: trace.iterations(), converged: trace.converged(), nan }
}

/// Iterates from every pixel center. Rows are computed in parallel and
/// assembled in order, so the raster does not depend on scheduling.
pub fn render(spec: &BasinSpec) -> Result<BasinRaster, BasinError> {
    spec.validate()?;
    let func = Function::parse(&spec.ftext, spec.precision)?;
    let cfg = spec.solve_config();
    cfg.validate()?;
    let rows: Vec<Vec<BasinPixel>> = (0..spec.height)
        .into_par_iter()
        .map(|j| {
            (0..spec.width)
                .map(|i| iterate(&func, &cfg, spec.pixel_center(i, j)))
                .collect()
        })
        .collect();
    Ok(BasinRaster {
        width: spec.width,
        height: spec.height,
        pixels: rows.into_iter().flatten().collect(),
    })
}

pub fn write_image(raster: &BasinRaster, path: &Path) -> Result<(), BasinError> {
    raster.write_ppm(BufWriter::new(File::create(path)?))?;
    Ok(())
}

/// Classification of one sample along a line scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RootAssignment {
    /// Index into the root list (given, or discovered in scan order).
    Root(usize),
    Unconverged,
    Nan,
}

/// Result of [`line_scan`]: per-sample assignments and the roots they index.
#[derive(Debug, Clone, PartialEq)]
pub struct LineScan {
    pub assignments: Vec<RootAssignment>,
    pub roots: Vec<MPComplex>,
}

impl LineScan {
    pub fn changes(&self) -> usize {
        assignment_changes(&self.assignments)
    }
}

/// Number of adjacent samples whose assignments differ.
pub fn assignment_changes(a: &[RootAssignment]) -> usize {
    a.windows(2).filter(|w| w[0] != w[1]).count()
}

fn scan_points(spec: &BasinSpec, a: &MPComplex, b: &MPComplex, samples: usize) -> Vec<MPComplex> {
    let p = spec.precision;
    let d = b.clone() - a;
    (0..samples)
        .map(|k| {
            let t = MPReal::from_i64(2 * k as i64 + 1, p) / &MPReal::from_i64(2 * samples as i64, p);
            a.clone() + &(d.clone() * &MPComplex::from_real(t))
        })
        .collect()
}

fn scan_pixels(spec: &BasinSpec, a: &MPComplex, b: &MPComplex, samples: usize) -> Result<Vec<BasinPixel>, BasinError> {
    spec.validate()?;
    if samples == 0 {
        return Err(BasinError::InvalidSpec("samples must be at least 1".into()));
    }
    let func = Function::parse(&spec.ftext, spec.precision)?;
    let cfg = spec.solve_config();
    cfg.validate()?;
    Ok(scan_points(spec, a, b, samples)
        .into_par_iter()
        .map(|z0| iterate(&func, &cfg, z0))
        .collect())
}

/// Samples the segment `a → b` at the centers of `samples` equal pieces and
/// assigns each to the root its iteration converged to. Roots are discovered
/// in scan order; two limits closer than `sqrt(tol)` (at least `1e-6`) share
/// a root.
pub fn line_scan(spec: &BasinSpec, a: &MPComplex, b: &MPComplex, samples: usize) -> Result<LineScan, BasinError> {
    let pixels = scan_pixels(spec, a, b, samples)?;
    let radius = spec.tol.sqrt().max(spec.precision.pow10(-6));
    let mut roots: Vec<MPComplex> = Vec::new();
    let assignments = pixels
        .iter()
        .map(|px| {
            if px.nan {
                return RootAssignment::Nan;
            }
            if !px.converged {
                return RootAssignment::Unconverged;
            }
            if let Some(idx) = roots.iter().position(|r| (r.clone() - &px.limit).abs() <= radius) {
                return RootAssignment::Root(idx);
            }
            roots.push(px.limit.clone());
            RootAssignment::Root(roots.len() - 1)
        })
        .collect();
    Ok(LineScan { assignments, roots })
}

/// As [`line_scan`], but assigns converged samples to the nearest of the
/// given roots.
pub fn line_scan_with_roots(
    spec: &BasinSpec,
    a: &MPComplex,
    b: &MPComplex,
    samples: usize,
    roots: &[MPComplex],
) -> Result<LineScan, BasinError> {
    let pixels = scan_pixels(spec, a, b, samples)?;
    let assignments = pixels
        .iter()
        .map(|px| {
            if px.nan {
                RootAssignment::Nan
            } else if !px.converged || roots.is_empty() {
                RootAssignment::Unconverged
            } else {
                let dist = |r: &MPComplex| (r.clone() - &px.limit).abs();
                let best = (1..roots.len()).fold(0, |best, k| if dist(&roots[k]) < dist(&roots[best]) { k } else { best });
                RootAssignment::Root(best)
            }
        })
        .collect();
    Ok(LineScan { assignments, roots: roots.to_vec() })
}

/// The `n`-th roots of unity, `exp(2πik/n)` for `k = 0..n`.
pub fn roots_of_unity(n: usize, p: Precision) -> Vec<MPComplex> {
    let tau = MPReal::pi(p) * &MPReal::from_i64(2, p);
    (0..n)
        .map(|k| {
            let theta = tau.clone() * &MPReal::from_i64(k as i64, p) / &MPReal::from_i64(n as i64, p);
            let (s, c) = theta.sin_cos();
            MPComplex::new(c, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(limit: MPComplex, nan: bool) -> BasinPixel {
        BasinPixel { z0: limit.clone(), limit, iterations: 1, converged: !nan, nan }
    }

    fn c(re: f64, im: f64) -> MPComplex {
        MPComplex::from_f64(re, im, Precision::quad())
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [255, 0, 0]);
        assert_eq!(hsv_to_rgb(1.0 / 3.0, 1.0, 1.0), [0, 255, 0]);
        assert_eq!(hsv_to_rgb(0.5, 1.0, 1.0), [0, 255, 255]);
        assert_eq!(hsv_to_rgb(2.0 / 3.0, 1.0, 1.0), [0, 0, 255]);
        assert_eq!(hsv_to_rgb(1.0, 1.0, 1.0), [255, 0, 0]);
    }

    #[test]
    fn colors_for_phase_nan_and_zero() {
        assert_eq!(pixel_color(&px(c(1.0, 0.0), false)), [0, 255, 255]);
        assert_eq!(pixel_color(&px(c(f64::NAN, f64::NAN), true)), [255, 255, 255]);
        assert_eq!(pixel_color(&px(c(0.0, 0.0), false)), [0, 0, 0]);
        let a = pixel_color(&px(c(-0.5, 0.75f64.sqrt()), false));
        let b = pixel_color(&px(c(-0.5, -(0.75f64.sqrt())), false));
        assert_ne!(a, b);
        assert_ne!(a, [255, 255, 255]);
        assert_ne!(b, [255, 255, 255]);
    }

    #[test]
    fn ppm_layout() {
        let raster = BasinRaster { width: 2, height: 1, pixels: vec![px(c(1.0, 0.0), false), px(c(0.0, 0.0), true)] };
        let mut out = Vec::new();
        raster.write_ppm(&mut out).unwrap();
        let header = b"P6\n2 1\n255\n";
        assert_eq!(&out[..header.len()], header);
        assert_eq!(&out[header.len()..], &[0, 255, 255, 255, 255, 255]);
    }

    #[test]
    fn pixel_centers_are_interior_and_top_down() {
        let spec = BasinSpec::new("z^3-1", (-2.0, 2.0), (-2.0, 2.0), 4);
        let z = spec.pixel_center(0, 0);
        assert_eq!(z.re.to_f64(), -1.5);
        assert_eq!(z.im.to_f64(), 1.5);
        let z = spec.pixel_center(3, 3);
        assert_eq!(z.re.to_f64(), 1.5);
        assert_eq!(z.im.to_f64(), -1.5);
    }

    #[test]
    fn start_on_a_root() {
        // 1×1 grid centered on z = 1
        let spec = BasinSpec::new("z^3-1", (0.5, 1.5), (-0.5, 0.5), 1);
        let raster = render(&spec).unwrap();
        let p = raster.pixel(0, 0);
        assert!(p.converged && !p.nan);
        assert_eq!(p.iterations, 0);
        assert!(p.phase().unwrap().is_zero());
    }

    #[test]
    fn small_render_is_sound_and_deterministic() {
        let spec = BasinSpec::new("z^3-1", (-2.0, 2.0), (-2.0, 2.0), 24);
        let a = render(&spec).unwrap();
        let b = render(&spec).unwrap();
        assert_eq!(a, b);
        let func = Function::parse("z^3-1", spec.precision).unwrap();
        let roots = roots_of_unity(3, spec.precision);
        let near = spec.precision.pow10(-6);
        for px in a.pixels.iter().filter(|px| px.converged) {
            assert!(func.value(&px.limit).abs() <= spec.tol);
            assert!(roots.iter().any(|r| (r.clone() - &px.limit).abs() <= near));
        }
    }

    #[test]
    fn degenerate_start_is_nan() {
        // f'(0) = 0 for z^3 - 1
        let spec = BasinSpec::new("z^3-1", (-0.5, 0.5), (-0.5, 0.5), 1);
        let raster = render(&spec).unwrap();
        assert!(raster.pixel(0, 0).nan);
        assert_eq!(raster.colors()[0], [255, 255, 255]);
    }

    #[test]
    fn scans() {
        let spec = BasinSpec::new("z^3-1", (-2.0, 2.0), (-2.0, 2.0), 1);
        let inside = line_scan(&spec, &c(0.9, 0.0), &c(1.1, 0.0), 50).unwrap();
        assert_eq!(inside.changes(), 0);
        assert_eq!(inside.assignments[0], RootAssignment::Root(0));
        let one = line_scan(&spec, &c(-1.45, 0.0), &c(-1.05, 0.0), 1).unwrap();
        assert_eq!(one.assignments.len(), 1);
        assert_eq!(one.changes(), 0);
        let roots = roots_of_unity(3, spec.precision);
        let known = line_scan_with_roots(&spec, &c(0.9, 0.0), &c(1.1, 0.0), 5, &roots).unwrap();
        assert!(known.assignments.iter().all(|a| *a == RootAssignment::Root(0)));
    }

    #[test]
    fn invalid_specs() {
        let mut spec = BasinSpec::new("z^3-1", (-2.0, 2.0), (-2.0, 2.0), 0);
        assert!(matches!(render(&spec), Err(BasinError::InvalidSpec(_))));
        spec.width = 2;
        spec.height = 2;
        spec.re_range = (1.0, 1.0);
        assert!(matches!(render(&spec), Err(BasinError::InvalidSpec(_))));
        let spec = BasinSpec::new("z^^3", (-2.0, 2.0), (-2.0, 2.0), 2);
        assert!(matches!(render(&spec), Err(BasinError::Parse(_))));
    }

    #[test]
    fn csv_dump_columns() {
        let spec = BasinSpec::new("z^3-1", (-2.0, 2.0), (-2.0, 2.0), 2);
        let raster = render(&spec).unwrap();
        let mut out = Vec::new();
        raster.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("i,j,re_z0,im_z0,converged,iterations,phase"));
        assert_eq!(lines.count(), 4);
    }
}
