//! Value change (VC) of sampled fields.
//!
//! `VC_L(f, x)` is the largest `|f(y1) - f(y2)|` over nodes `y1, y2` inside the
//! window `Π [x_i - L_i/2, x_i + L_i/2]` intersected with the domain. On a grid
//! this is `max - min` over the clipped index box with half-widths
//! `r_i = floor((L_i / 2) / h_i)`, so the discrete window never reaches past the
//! continuous one. Windows shrink at the boundary; nothing is padded.

mod extrema;
mod ivc;

pub use extrema::{sliding_extremum, windowed_extrema_radii, Extremum};
pub use ivc::{ivc, ivc_distance, ivc_field, IvcSpec};

use crate::grid::{BoxDomain, SampledField};
use crate::{Error, Result};

/// Absorbs floating-point noise when `L/2` is an exact multiple of the spacing.
const RADIUS_SLACK: f64 = 1e-9;

fn floor_with_slack(x: f64) -> usize {
    (x + RADIUS_SLACK * x.max(1.0)).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowUnit {
    /// Lengths are in domain coordinates.
    Domain,
    /// Lengths count grid cells (pixels): the half-width is `floor(L / 2)`.
    Cells,
}

/// Per-axis window lengths. A single length applies to every axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    lengths: Vec<f64>,
    unit: WindowUnit,
}

impl WindowSpec {
    pub fn isotropic(length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidWindow(format!(
                "window length must be positive, got {length}"
            )));
        }
        Ok(Self {
            lengths: vec![length],
            unit: WindowUnit::Domain,
        })
    }

    /// One length per axis. A zero length collapses that axis to the centre
    /// node, which gives the reduced-order VC of a time-dependent field.
    pub fn anisotropic(lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidWindow("no window lengths".into()));
        }
        if let Some(bad) = lengths.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::InvalidWindow(format!(
                "window lengths must be finite and non-negative, got {bad}"
            )));
        }
        if lengths.iter().all(|&l| l == 0.0) {
            return Err(Error::InvalidWindow("every window length is zero".into()));
        }
        Ok(Self {
            lengths,
            unit: WindowUnit::Domain,
        })
    }

    /// Window measured in grid cells, e.g. `L = 101` pixels gives radius 50.
    pub fn cells(length: f64) -> Result<Self> {
        Ok(Self {
            unit: WindowUnit::Cells,
            ..Self::isotropic(length)?
        })
    }

    pub fn with_unit(mut self, unit: WindowUnit) -> Self {
        self.unit = unit;
        self
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn unit(&self) -> WindowUnit {
        self.unit
    }

    /// Length along `axis` in the window's own unit.
    pub fn length(&self, axis: usize) -> f64 {
        if self.lengths.len() == 1 {
            self.lengths[0]
        } else {
            self.lengths[axis]
        }
    }

    /// Same window with every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let lengths = self.lengths.iter().map(|l| l * factor).collect();
        Ok(Self::anisotropic(lengths)?.with_unit(self.unit))
    }

    /// Index half-widths on `domain`.
    pub fn radii(&self, domain: &BoxDomain) -> Result<Vec<usize>> {
        if self.lengths.len() != 1 && self.lengths.len() != domain.dims() {
            return Err(Error::DimensionMismatch {
                expected: domain.dims(),
                actual: self.lengths.len(),
            });
        }
        Ok((0..domain.dims())
            .map(|axis| {
                let half = self.length(axis) / 2.0;
                match self.unit {
                    WindowUnit::Domain => floor_with_slack(half / domain.spacing(axis)),
                    WindowUnit::Cells => floor_with_slack(half),
                }
            })
            .collect())
    }
}

/// VC values on the grid of the field they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct VcField {
    field: SampledField,
    window: WindowSpec,
}

impl VcField {
    pub fn field(&self) -> &SampledField {
        &self.field
    }

    pub fn into_field(self) -> SampledField {
        self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }
}

/// Windowed max or min of `field` under `window`.
pub fn windowed_extrema(
    field: &SampledField,
    window: &WindowSpec,
    kind: Extremum,
) -> Result<SampledField> {
    let radii = window.radii(field.domain())?;
    let values = windowed_extrema_radii(field, &radii, kind);
    SampledField::new(field.domain().clone(), values)
}

/// VC field for explicit index radii.
pub fn vc_values_radii(field: &SampledField, radii: &[usize]) -> Vec<f64> {
    let hi = windowed_extrema_radii(field, radii, Extremum::Max);
    let lo = windowed_extrema_radii(field, radii, Extremum::Min);
    hi.into_iter().zip(lo).map(|(a, b)| a - b).collect()
}

pub fn vc_field(field: &SampledField, window: &WindowSpec) -> Result<VcField> {
    let radii = window.radii(field.domain())?;
    let values = vc_values_radii(field, &radii);
    Ok(VcField {
        field: SampledField::new(field.domain().clone(), values)?,
        window: window.clone(),
    })
}

/// Largest deviation between `VC(κ f + c)` and `|κ| VC(f)` over all nodes.
pub fn vc_scaling_check(
    field: &SampledField,
    window: &WindowSpec,
    kappa: f64,
    c: f64,
) -> Result<f64> {
    let base = vc_field(field, window)?;
    let transformed = vc_field(&field.map(|v| kappa * v + c)?, window)?;
    Ok(base
        .values()
        .iter()
        .zip(transformed.values())
        .map(|(b, t)| (t - kappa.abs() * b).abs())
        .fold(0.0, f64::max))
}

/// Samples per probe window in [`vc_derivative_probe`]; odd so `x0` is a node.
const PROBE_SAMPLES: usize = 2049;

/// `VC_L(f, x0) / L` for each window length, with the window densely sampled.
/// For continuously differentiable `f` this tends to `|f'(x0)|` as `L -> 0`.
pub fn vc_derivative_probe<F>(f: F, x0: f64, l_values: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    l_values
        .iter()
        .map(|&l| {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidWindow(format!("probe length must be positive, got {l}")));
            }
            let domain = BoxDomain::new(vec![x0 - l / 2.0], vec![x0 + l / 2.0], vec![PROBE_SAMPLES])?;
            let samples = SampledField::from_fn(domain, |x| f(x[0]))?;
            // The window around the centre node spans the whole probe interval.
            Ok((samples.max() - samples.min()) / l)
        })
        .collect()
}
