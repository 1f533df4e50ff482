//! Gaussian kernel density estimates of VC samples and their ratios.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;

use crate::util::{fmt_f64, write_atomic};
use crate::{Error, Result};

/// Smallest bandwidth ever used.
pub const MIN_BANDWIDTH: f64 = 1e-6;
/// Points on the default evaluation grid.
pub const DEFAULT_ABSCISSA_POINTS: usize = 512;
/// Default VCDR floor relative to the largest denominator density.
pub const DEFAULT_RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub abscissa: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub sample_count: usize,
    /// All samples were equal and the bandwidth fell back to [`MIN_BANDWIDTH`].
    pub degenerate: bool,
}

#[inline]
fn gaussian(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `0.9 · min(σ, IQR/1.34) · m^(-1/5)`, falling back to `σ` when the IQR is
/// zero, floored at [`MIN_BANDWIDTH`].
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let m = samples.len();
    if m < 2 {
        return MIN_BANDWIDTH;
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let sigma = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = match sigma.min(iqr / 1.34) {
        s if s > 0.0 => s,
        _ => sigma,
    };
    (0.9 * spread * (m as f64).powf(-0.2)).max(MIN_BANDWIDTH)
}

/// Equally spaced points on `[0, max(samples) + 4b]`.
pub fn default_abscissa(samples: &[f64], bandwidth: f64, points: usize) -> Vec<f64> {
    let top = samples.iter().copied().fold(0.0, f64::max) + 4.0 * bandwidth;
    linspace(0.0, top, points)
}

pub fn linspace(a: f64, b: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (points - 1) as f64;
            (0..points)
                .map(|i| if i + 1 == points { b } else { a + i as f64 * step })
                .collect()
        }
    }
}

/// Gaussian KDE of `samples`. Without an abscissa the default grid is used.
pub fn kde(
    samples: &[f64],
    abscissa: Option<&[f64]>,
    bandwidth: Bandwidth,
) -> Result<DensityEstimate> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite sample {bad}")));
    }
    let first = samples[0];
    let all_equal = samples.iter().all(|&s| s == first);
    let (b, degenerate) = match bandwidth {
        Bandwidth::Fixed(b) if b.is_finite() && b > 0.0 => (b, false),
        Bandwidth::Fixed(b) => {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {b}")))
        }
        Bandwidth::Silverman if all_equal => (MIN_BANDWIDTH, true),
        Bandwidth::Silverman => (silverman_bandwidth(samples), false),
    };
    let abscissa = match abscissa {
        Some(a) => a.to_vec(),
        None => default_abscissa(samples, b, DEFAULT_ABSCISSA_POINTS),
    };
    let norm = 1.0 / (samples.len() as f64 * b);
    let density = abscissa
        .iter()
        .map(|&v| norm * samples.iter().map(|&s| gaussian((v - s) / b)).sum::<f64>())
        .collect();
    Ok(DensityEstimate {
        abscissa,
        density,
        bandwidth: b,
        sample_count: samples.len(),
        degenerate,
    })
}

impl DensityEstimate {
    /// Trapezoid integral of the density over its abscissa.
    pub fn integral(&self) -> f64 {
        self.abscissa
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Abscissa value of the largest density.
    pub fn mode(&self) -> f64 {
        let (i, _) = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        self.abscissa[i]
    }

    /// Two-column CSV: `abscissa,density`.
    pub fn to_csv(&self) -> String {
        two_column_csv("density", &self.abscissa, self.density.iter().copied())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Pointwise `num / den`; `None` where the denominator density is below
/// `floor` (default `1e-4 · max(den)`).
pub fn vcdr(
    num: &DensityEstimate,
    den: &DensityEstimate,
    floor: Option<f64>,
) -> Result<Vec<Option<f64>>> {
    if num.abscissa != den.abscissa {
        return Err(Error::AbscissaMismatch);
    }
    let floor = match floor {
        Some(f) if f.is_finite() && f > 0.0 => f,
        Some(f) => return Err(Error::InvalidConfig(format!("VCDR floor must be positive, got {f}"))),
        None => DEFAULT_RELATIVE_FLOOR * den.density.iter().copied().fold(0.0, f64::max),
    };
    Ok(num
        .density
        .iter()
        .zip(&den.density)
        .map(|(&n, &d)| (floor > 0.0 && d >= floor).then(|| n / d))
        .collect())
}

/// Two-column CSV of a ratio; undefined entries are written as `nan`.
pub fn ratio_csv(abscissa: &[f64], ratio: &[Option<f64>]) -> String {
    two_column_csv("vcdr", abscissa, ratio.iter().map(|r| r.unwrap_or(f64::NAN)))
}

fn two_column_csv(name: &str, xs: &[f64], ys: impl Iterator<Item = f64>) -> String {
    let mut out = Vec::new();
    let _ = writeln!(out, "vc,{name}");
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(y));
    }
    String::from_utf8(out).expect("ascii")
}
