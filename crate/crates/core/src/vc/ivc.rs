//! Integral VC and the IVC distance.
//!
//! `IVC(f, x)` averages `VC_L(f, x)` over `L ∈ [l_min, l_max]` with the
//! composite trapezoid rule on `n_l` equally spaced lengths. The IVC distance
//! integrates `IVC(f1 - f2, ·)` over the domain with trapezoid cell weights.
//! It vanishes on constant shifts, so it compares shape, not level.

use std::collections::HashMap;

use super::{floor_with_slack, vc_values_radii};
use crate::grid::SampledField;
use crate::{Error, Result};

pub const DEFAULT_IVC_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvcSpec {
    l_min: f64,
    l_max: f64,
    n_l: usize,
}

impl IvcSpec {
    pub fn new(l_min: f64, l_max: f64, n_l: usize) -> Result<Self> {
        if !(l_min.is_finite() && l_max.is_finite() && l_min > 0.0 && l_max > l_min) {
            return Err(Error::InvalidIvcSpec(format!(
                "need 0 < l_min < l_max, got [{l_min}, {l_max}]"
            )));
        }
        if n_l < 2 {
            return Err(Error::InvalidIvcSpec(format!("need n_l >= 2, got {n_l}")));
        }
        Ok(Self { l_min, l_max, n_l })
    }

    pub fn with_default_nodes(l_min: f64, l_max: f64) -> Result<Self> {
        Self::new(l_min, l_max, DEFAULT_IVC_NODES)
    }

    pub fn l_min(&self) -> f64 {
        self.l_min
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    pub fn n_l(&self) -> usize {
        self.n_l
    }

    /// Quadrature lengths with their trapezoid weights; weights sum to 1.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let m = (self.n_l - 1) as f64;
        let step = (self.l_max - self.l_min) / m;
        (0..self.n_l)
            .map(|k| {
                let l = if k + 1 == self.n_l {
                    self.l_max
                } else {
                    self.l_min + k as f64 * step
                };
                let w = if k == 0 || k + 1 == self.n_l { 0.5 } else { 1.0 };
                (l, w / m)
            })
            .collect()
    }
}

fn radii_for(field: &SampledField, length: f64) -> Vec<usize> {
    let d = field.domain();
    (0..d.dims())
        .map(|axis| floor_with_slack(length / 2.0 / d.spacing(axis)))
        .collect()
}

/// IVC at every node.
pub fn ivc_field(field: &SampledField, spec: &IvcSpec) -> Result<SampledField> {
    let mut acc = vec![0.0; field.len()];
    // Several lengths usually share the same index radii.
    let mut cache: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    for (length, weight) in spec.nodes() {
        let radii = radii_for(field, length);
        let vc = cache
            .entry(radii)
            .or_insert_with_key(|r| vc_values_radii(field, r));
        for (a, v) in acc.iter_mut().zip(vc.iter()) {
            *a += weight * v;
        }
    }
    SampledField::new(field.domain().clone(), acc)
}

/// IVC at a single node, scanning each clipped window directly.
pub fn ivc(field: &SampledField, spec: &IvcSpec, node: usize) -> Result<f64> {
    let d = field.domain();
    if node >= d.len() {
        return Err(Error::DimensionMismatch {
            expected: d.len(),
            actual: node,
        });
    }
    let centre = d.multi_index(node);
    let mut acc = 0.0;
    for (length, weight) in spec.nodes() {
        let radii = radii_for(field, length);
        let lo: Vec<usize> = centre.iter().zip(&radii).map(|(&c, &r)| c.saturating_sub(r)).collect();
        let hi: Vec<usize> = centre
            .iter()
            .zip(&radii)
            .zip(d.counts())
            .map(|((&c, &r), &n)| (c + r).min(n - 1))
            .collect();
        let (mut max, mut min) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut idx = lo.clone();
        'scan: loop {
            let v = field.values()[d.linear_index(&idx)];
            max = max.max(v);
            min = min.min(v);
            let mut axis = idx.len();
            loop {
                if axis == 0 {
                    break 'scan;
                }
                axis -= 1;
                if idx[axis] < hi[axis] {
                    idx[axis] += 1;
                    continue 'scan;
                }
                idx[axis] = lo[axis];
            }
        }
        acc += weight * (max - min);
    }
    Ok(acc)
}

/// Trapezoid integral of `IVC(f1 - f2, ·)` over the domain.
pub fn ivc_distance(f1: &SampledField, f2: &SampledField, spec: &IvcSpec) -> Result<f64> {
    let diff = f1.sub(f2)?;
    let field = ivc_field(&diff, spec)?;
    let d = diff.domain();
    Ok(field
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| d.trapezoid_weight(k) * v)
        .sum())
}
