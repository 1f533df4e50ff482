//! Analytic objectives used by the experiments and the field generator.

use std::f64::consts::PI;

use crate::grid::BoxDomain;
use crate::Result;

pub fn sin2(x: &[f64]) -> f64 {
    (2.0 * x[0]).sin()
}

/// `sin(2x) + sin(6x) + sin(10x)`.
pub fn sin3(x: &[f64]) -> f64 {
    (2.0 * x[0]).sin() + (6.0 * x[0]).sin() + (10.0 * x[0]).sin()
}

/// `κ(x + y + z)`.
pub fn linear3d(kappa: f64) -> impl Fn(&[f64]) -> f64 + Send + Sync + Copy {
    move |x| kappa * (x[0] + x[1] + x[2])
}

/// `2x + 2` on `[-2, 0]`, zero on `(0, 2]`.
pub fn piecewise_f1(x: &[f64]) -> f64 {
    if x[0] <= 0.0 {
        2.0 * x[0] + 2.0
    } else {
        0.0
    }
}

/// `2x + 2` on `[-2, 0]`, `-x + 1` on `(0, 2]`.
pub fn piecewise_f2(x: &[f64]) -> f64 {
    if x[0] <= 0.0 {
        2.0 * x[0] + 2.0
    } else {
        1.0 - x[0]
    }
}

/// Binary image on `[0,1]^2` (row, column): a disk, a rectangle and a
/// diagonal bar.
pub fn shapes(x: &[f64]) -> f64 {
    let (r, c) = (x[0], x[1]);
    let disk = (r - 0.3).powi(2) + (c - 0.3).powi(2) <= 0.18 * 0.18;
    let rect = (0.55..=0.85).contains(&r) && (0.5..=0.85).contains(&c);
    let bar = (r - c - 0.05).abs() <= 0.04 && (0.1..=0.9).contains(&c) && c > 0.45;
    f64::from(u8::from(disk || rect || bar))
}

/// Vorticity of a counter-rotating Gaussian vortex pair drifting along `x`,
/// on `(x, y, t)`.
pub fn vortex_pair(x: &[f64]) -> f64 {
    let (px, py, t) = (x[0], x[1], x[2]);
    let sigma2 = 0.12;
    let cx = 0.8 + 2.2 * t;
    let blob = |yc: f64| (-((px - cx).powi(2) + (py - yc).powi(2)) / sigma2).exp();
    blob(0.35) - blob(-0.35) + 0.3 * blob(0.35) * (3.0 * (px - cx)).sin()
}

/// Names accepted by [`generator`].
pub const GENERATORS: [&str; 5] = ["sin", "sin3", "linear3d", "piecewise", "vortex"];

/// Objective and default domain of a named generator; `None` if unknown.
pub fn generator(kind: &str) -> Option<(fn(&[f64]) -> f64, usize, Vec<f64>, Vec<f64>)> {
    fn lin10(x: &[f64]) -> f64 {
        linear3d(10.0)(x)
    }
    Some(match kind {
        "sin" => (sin2 as fn(&[f64]) -> f64, 1, vec![-PI], vec![PI]),
        "sin3" => (sin3, 1, vec![-PI], vec![PI]),
        "linear3d" => (lin10, 3, vec![-1.0; 3], vec![1.0; 3]),
        "piecewise" => (piecewise_f1, 1, vec![-2.0], vec![2.0]),
        "vortex" => (vortex_pair, 3, vec![0.0, -1.0, 0.0], vec![4.0, 1.0, 1.0]),
        _ => return None,
    })
}

/// Default domain of a generator with the given sample counts.
pub fn generator_domain(kind: &str, counts: Vec<usize>) -> Option<Result<BoxDomain>> {
    let (_, _, lower, upper) = generator(kind)?;
    Some(BoxDomain::new(lower, upper, counts))
}
