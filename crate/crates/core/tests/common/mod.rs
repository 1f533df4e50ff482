//! Brute-force reference implementations shared by the integration tests.
//!
//! Nothing here calls the library's VC or IVC code: windows are defined by
//! coordinate distance and scanned over every node.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valuechange::grid::{BoxDomain, SampledField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Multi-index of node `k` in row-major order.
pub fn unravel(mut k: usize, counts: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; counts.len()];
    for axis in (0..counts.len()).rev() {
        idx[axis] = k % counts[axis];
        k /= counts[axis];
    }
    idx
}

/// Max and min over every node within `radii` index steps of each node,
/// by exhaustive scan.
pub fn scan_extrema(values: &[f64], counts: &[usize], radii: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let idx: Vec<Vec<usize>> = (0..n).map(|k| unravel(k, counts)).collect();
    let mut max = vec![f64::NEG_INFINITY; n];
    let mut min = vec![f64::INFINITY; n];
    for a in 0..n {
        for b in 0..n {
            let inside = idx[a]
                .iter()
                .zip(&idx[b])
                .zip(radii)
                .all(|((&i, &j), &r)| i.abs_diff(j) <= r);
            if inside {
                max[a] = max[a].max(values[b]);
                min[a] = min[a].min(values[b]);
            }
        }
    }
    (max, min)
}

/// Windowed max and min by exhaustive scan, with windows defined
/// geometrically: node `b` is in the window of node `a` when
/// `|x_b - x_a| <= L/2` on every axis.
pub fn scan_extrema_geometric(field: &SampledField, lengths: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = field.domain();
    let n = field.len();
    let coords: Vec<Vec<f64>> = (0..n).map(|k| d.coords(k)).collect();
    let tol: Vec<f64> = (0..d.dims()).map(|a| 1e-9 * d.spacing(a)).collect();
    let mut max = vec![f64::NEG_INFINITY; n];
    let mut min = vec![f64::INFINITY; n];
    for a in 0..n {
        for b in 0..n {
            let inside = (0..d.dims()).all(|ax| {
                let l = if lengths.len() == 1 { lengths[0] } else { lengths[ax] };
                (coords[a][ax] - coords[b][ax]).abs() <= l / 2.0 + tol[ax]
            });
            if inside {
                max[a] = max[a].max(field.values()[b]);
                min[a] = min[a].min(field.values()[b]);
            }
        }
    }
    (max, min)
}

pub fn scan_vc_geometric(field: &SampledField, lengths: &[f64]) -> Vec<f64> {
    let (max, min) = scan_extrema_geometric(field, lengths);
    max.iter().zip(&min).map(|(a, b)| a - b).collect()
}

/// One-dimensional trapezoid weights on `n` nodes of spacing `h`.
fn trapezoid_1d(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|i| if i == 0 || i + 1 == n { h / 2.0 } else { h })
        .collect()
}

/// IVC distance by brute force over every (node, length) pair.
pub fn brute_ivc_distance(f1: &SampledField, f2: &SampledField, l_min: f64, l_max: f64, n_l: usize) -> f64 {
    let d = f1.domain();
    let diff = SampledField::new(
        d.clone(),
        f1.values().iter().zip(f2.values()).map(|(a, b)| a - b).collect(),
    )
    .unwrap();
    let step = (l_max - l_min) / (n_l - 1) as f64;
    let mut ivc = vec![0.0; diff.len()];
    for k in 0..n_l {
        let l = l_min + k as f64 * step;
        let w = if k == 0 || k + 1 == n_l { 0.5 } else { 1.0 } / (n_l - 1) as f64;
        for (acc, v) in ivc.iter_mut().zip(scan_vc_geometric(&diff, &[l])) {
            *acc += w * v;
        }
    }
    let axis_w: Vec<Vec<f64>> = (0..d.dims())
        .map(|a| trapezoid_1d(d.counts()[a], d.spacing(a)))
        .collect();
    ivc.iter()
        .enumerate()
        .map(|(k, v)| {
            let idx = unravel(k, d.counts());
            v * idx.iter().enumerate().map(|(a, &i)| axis_w[a][i]).product::<f64>()
        })
        .sum()
}

/// A random box domain of `dims` axes with 2..=`max_count` nodes each.
pub fn random_domain(r: &mut impl Rng, dims: usize, max_count: usize) -> BoxDomain {
    let counts: Vec<usize> = (0..dims).map(|_| r.gen_range(2..=max_count)).collect();
    let lower: Vec<f64> = (0..dims).map(|_| r.gen_range(-2.0..1.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + r.gen_range(0.5..3.0)).collect();
    BoxDomain::new(lower, upper, counts).unwrap()
}

pub fn random_field(r: &mut impl Rng, domain: BoxDomain) -> SampledField {
    let values = (0..domain.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    SampledField::new(domain, values).unwrap()
}

pub fn line(lower: f64, upper: f64, n: usize, f: impl Fn(f64) -> f64) -> SampledField {
    let d = BoxDomain::new(vec![lower], vec![upper], vec![n]).unwrap();
    SampledField::from_fn(d, |x| f(x[0])).unwrap()
}

/// Discrete L2 distance over grid nodes, root of the mean squared difference.
pub fn grid_l2(a: &SampledField, b: &SampledField) -> f64 {
    let n = a.len() as f64;
    (a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
        .sqrt()
}
