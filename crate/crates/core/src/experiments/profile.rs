//! Pointwise error sorted by the target's VC.

use std::fmt::Write as _;

use crate::grid::SampledField;
use crate::util::fmt_f64;
use crate::vc::{vc_field, WindowSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    Avg,
    Max,
    Median,
}

impl std::str::FromStr for Smoothing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" => Ok(Smoothing::Avg),
            "max" => Ok(Smoothing::Max),
            "median" => Ok(Smoothing::Median),
            other => Err(Error::parse("smoothing", format!("unknown smoothing `{other}`"))),
        }
    }
}

/// Moving statistic over `radius` neighbours on each side, clipped at the
/// ends.
pub fn smooth(values: &[f64], kind: Smoothing, radius: usize) -> Vec<f64> {
    let n = values.len();
    let mut scratch = Vec::with_capacity(2 * radius + 1);
    (0..n)
        .map(|i| {
            let w = &values[i.saturating_sub(radius)..(i + radius + 1).min(n)];
            match kind {
                Smoothing::Avg => w.iter().sum::<f64>() / w.len() as f64,
                Smoothing::Max => w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Smoothing::Median => {
                    scratch.clear();
                    scratch.extend_from_slice(w);
                    scratch.sort_by(f64::total_cmp);
                    let m = scratch.len() / 2;
                    if scratch.len() % 2 == 1 {
                        scratch[m]
                    } else {
                        0.5 * (scratch[m - 1] + scratch[m])
                    }
                }
            }
        })
        .collect()
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortedErrorProfile {
    /// Node indices by ascending VC.
    pub order: Vec<usize>,
    /// VC of the target, in `order`.
    pub vc: Vec<f64>,
    /// `|pred - target|`, in `order`.
    pub errors: Vec<f64>,
    pub smoothing: Smoothing,
    pub radius: usize,
    pub smoothed: Vec<f64>,
    /// Spearman correlation between VC and error; 0 when undefined.
    pub spearman: f64,
    pub spearman_defined: bool,
}

impl SortedErrorProfile {
    /// Builds the profile from per-node VC and error values.
    ///
    /// Nodes are ordered by VC, then error, then node index, so the smoothed
    /// curve does not depend on how the nodes were numbered.
    pub fn from_values(vc: &[f64], errors: &[f64], smoothing: Smoothing, radius: usize) -> Self {
        assert_eq!(vc.len(), errors.len());
        let mut order: Vec<usize> = (0..vc.len()).collect();
        order.sort_by(|&a, &b| {
            vc[a]
                .total_cmp(&vc[b])
                .then(errors[a].total_cmp(&errors[b]))
                .then(a.cmp(&b))
        });
        let sorted_vc: Vec<f64> = order.iter().map(|&k| vc[k]).collect();
        let sorted_err: Vec<f64> = order.iter().map(|&k| errors[k]).collect();
        let smoothed = smooth(&sorted_err, smoothing, radius);
        let rho = spearman(vc, errors);
        Self {
            order,
            vc: sorted_vc,
            errors: sorted_err,
            smoothing,
            radius,
            smoothed,
            spearman: rho.unwrap_or(0.0),
            spearman_defined: rho.is_some(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Columns `rank,node,vc,error,avg,max,median`, all three smoothings at
    /// this profile's radius.
    pub fn to_csv(&self) -> String {
        let avg = smooth(&self.errors, Smoothing::Avg, self.radius);
        let max = smooth(&self.errors, Smoothing::Max, self.radius);
        let med = smooth(&self.errors, Smoothing::Median, self.radius);
        let mut out = String::from("rank,node,vc,error,avg,max,median\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                i,
                self.order[i],
                fmt_f64(self.vc[i]),
                fmt_f64(self.errors[i]),
                fmt_f64(avg[i]),
                fmt_f64(max[i]),
                fmt_f64(med[i])
            );
        }
        out
    }
}

/// Absolute error of `pred` against `target`, sorted by the target's VC.
pub fn error_vs_vc(
    pred: &SampledField,
    target: &SampledField,
    window: &WindowSpec,
    smoothing: Smoothing,
    radius: usize,
) -> Result<SortedErrorProfile> {
    let err = pred.zip_with(target, |p, t| (p - t).abs())?;
    let vc = vc_field(target, window)?;
    Ok(SortedErrorProfile::from_values(
        vc.values(),
        err.values(),
        smoothing,
        radius,
    ))
}

/// Splits the profile into `k` contiguous VC-rank bins of `n / k` nodes, the
/// remainder going to the last bin, and returns each bin's errors.
pub fn vc_bins(profile: &SortedErrorProfile, k: usize) -> Vec<Vec<f64>> {
    let k = k.max(1);
    let n = profile.len();
    let size = n / k;
    (0..k)
        .map(|b| {
            let end = if b + 1 == k { n } else { (b + 1) * size };
            profile.errors[b * size..end].to_vec()
        })
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
