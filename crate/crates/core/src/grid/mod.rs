//! Regular box grids and scalar fields sampled on them.
//!
//! A [`BoxDomain`] is the product of closed intervals `[lower[i], upper[i]]`
//! with `counts[i] >= 2` equally spaced nodes per axis, endpoints included.
//! Nodes are linearized row-major: the last axis varies fastest.

mod io;

pub use io::{emit, emit_to, ingest, ingest_from, Format};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let n = counts.len();
        if n == 0 {
            return Err(Error::InvalidDomain("domain needs at least one axis".into()));
        }
        if lower.len() != n || upper.len() != n {
            return Err(Error::InvalidDomain(format!(
                "lower/upper/counts lengths differ ({}, {}, {n})",
                lower.len(),
                upper.len()
            )));
        }
        for axis in 0..n {
            let (a, b, c) = (lower[axis], upper[axis], counts[axis]);
            if !a.is_finite() || !b.is_finite() || a >= b {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: need finite lower < upper, got [{a}, {b}]"
                )));
            }
            if c < 2 {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: need at least 2 samples, got {c}"
                )));
            }
            if (b - a) / (c - 1) as f64 <= 0.0 {
                return Err(Error::InvalidDomain(format!("axis {axis}: spacing underflows")));
            }
        }
        Ok(Self {
            lower,
            upper,
            counts,
        })
    }

    /// The same interval `[lower, upper]` on every one of `counts.len()` axes.
    pub fn cube(lower: f64, upper: f64, counts: &[usize]) -> Result<Self> {
        let n = counts.len();
        Self::new(vec![lower; n], vec![upper; n], counts.to_vec())
    }

    pub fn dims(&self) -> usize {
        self.counts.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.counts[axis] - 1) as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dims()).map(|a| self.spacing(a)).collect()
    }

    /// Linear-index stride of each axis.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims()];
        for axis in (0..self.dims().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * self.counts[axis + 1];
        }
        strides
    }

    /// Coordinate of node `index` along `axis`.
    pub fn axis_coord(&self, axis: usize, index: usize) -> f64 {
        self.lower[axis] + index as f64 * self.spacing(axis)
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dims());
        multi
            .iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &c)| acc * c + i)
    }

    /// Writes the multi-index of linear node `k` into `out`.
    pub fn multi_index_into(&self, mut k: usize, out: &mut [usize]) {
        for axis in (0..self.dims()).rev() {
            out[axis] = k % self.counts[axis];
            k /= self.counts[axis];
        }
    }

    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        self.multi_index_into(k, &mut out);
        out
    }

    /// Coordinates of linear node `k`, written into `out`.
    pub fn coords_into(&self, k: usize, out: &mut [f64]) {
        let mut rem = k;
        for axis in (0..self.dims()).rev() {
            let i = rem % self.counts[axis];
            rem /= self.counts[axis];
            out[axis] = self.axis_coord(axis, i);
        }
    }

    pub fn coords(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims()];
        self.coords_into(k, &mut out);
        out
    }

    /// All node coordinates as a flat row-major `(len, dims)` buffer.
    pub fn node_coords(&self) -> Vec<f64> {
        let d = self.dims();
        let mut out = vec![0.0; self.len() * d];
        for (k, chunk) in out.chunks_exact_mut(d).enumerate() {
            self.coords_into(k, chunk);
        }
        out
    }

    /// Volume of the box.
    pub fn measure(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    /// Trapezoid quadrature weight of node `k`: the cell volume, halved once
    /// for every axis on which the node sits on the boundary.
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        let mut rem = k;
        let mut w = 1.0;
        for axis in (0..self.dims()).rev() {
            let i = rem % self.counts[axis];
            rem /= self.counts[axis];
            let h = self.spacing(axis);
            w *= if i == 0 || i + 1 == self.counts[axis] {
                0.5 * h
            } else {
                h
            };
        }
        w
    }
}

/// Scalar samples on every node of a [`BoxDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    domain: BoxDomain,
    values: Vec<f64>,
}

impl SampledField {
    /// Wraps existing samples; every value must be finite.
    pub fn new(domain: BoxDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self { domain, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(domain: BoxDomain, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let mut x = vec![0.0; domain.dims()];
        let mut values = Vec::with_capacity(domain.len());
        for k in 0..domain.len() {
            domain.coords_into(k, &mut x);
            let v = f(&x);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { index: k });
            }
            values.push(v);
        }
        Ok(Self { domain, values })
    }

    pub fn constant(domain: BoxDomain, c: f64) -> Result<Self> {
        let n = domain.len();
        Self::new(domain, vec![c; n])
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Applies `f` to every sample.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.domain.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Combines two fields on the same domain node by node.
    pub fn zip_with(&self, other: &SampledField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.domain.clone(), values)
    }

    /// `self - other`, node by node.
    pub fn sub(&self, other: &SampledField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Slice of a field at a fixed index along `axis`, dropping that axis.
    pub fn slice(&self, axis: usize, index: usize) -> Result<Self> {
        let d = self.domain.dims();
        if d < 2 || axis >= d || index >= self.domain.counts[axis] {
            return Err(Error::InvalidDomain(format!(
                "cannot slice axis {axis} at {index} of a {d}-D field"
            )));
        }
        let keep = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .enumerate()
                .filter(|&(a, _)| a != axis)
                .map(|(_, &x)| x)
                .collect()
        };
        let counts: Vec<usize> = self
            .domain
            .counts
            .iter()
            .enumerate()
            .filter(|&(a, _)| a != axis)
            .map(|(_, &c)| c)
            .collect();
        let domain = BoxDomain::new(keep(&self.domain.lower), keep(&self.domain.upper), counts)?;
        let mut multi = vec![0; d];
        let values = (0..self.len())
            .filter_map(|k| {
                self.domain.multi_index_into(k, &mut multi);
                (multi[axis] == index).then(|| self.values[k])
            })
            .collect();
        Self::new(domain, values)
    }
}
