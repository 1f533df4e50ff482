//! Separable windowed extrema on regular grids.
//!
//! Each axis is swept independently with a 1-D sliding extremum over the
//! clipped index window `[j - r, j + r] ∩ [0, count - 1]`. The 1-D pass keeps a
//! monotonic deque of candidate indices, so every sample is pushed and popped
//! at most once per axis.

use std::collections::VecDeque;

use crate::grid::SampledField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

impl Extremum {
    /// True when `candidate` makes `incumbent` redundant inside the deque.
    #[inline]
    fn dominates(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Extremum::Max => candidate >= incumbent,
            Extremum::Min => candidate <= incumbent,
        }
    }
}

/// 1-D sliding extremum with a centred window of half-width `radius`,
/// clipped at both ends. `deque` is scratch space.
pub fn sliding_extremum(
    input: &[f64],
    radius: usize,
    kind: Extremum,
    out: &mut [f64],
    deque: &mut VecDeque<usize>,
) {
    assert_eq!(input.len(), out.len());
    let n = input.len();
    if n == 0 {
        return;
    }
    if radius == 0 {
        out.copy_from_slice(input);
        return;
    }
    deque.clear();
    let mut next = 0;
    for (j, slot) in out.iter_mut().enumerate() {
        let hi = (j + radius).min(n - 1);
        while next <= hi {
            let v = input[next];
            while let Some(&back) = deque.back() {
                if kind.dominates(v, input[back]) {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(next);
            next += 1;
        }
        let lo = j.saturating_sub(radius);
        while let Some(&front) = deque.front() {
            if front < lo {
                deque.pop_front();
            } else {
                break;
            }
        }
        *slot = input[*deque.front().expect("window contains its centre")];
    }
}

/// Extremum of `field` over the clipped index box `Π [j_i - r_i, j_i + r_i]`
/// around every node, with per-axis index radii `radii`.
pub fn windowed_extrema_radii(field: &SampledField, radii: &[usize], kind: Extremum) -> Vec<f64> {
    let domain = field.domain();
    assert_eq!(radii.len(), domain.dims(), "one radius per axis");
    let counts = domain.counts();
    let strides = domain.strides();
    let mut data = field.values().to_vec();

    let longest = counts.iter().copied().max().unwrap_or(0);
    let mut line = vec![0.0; longest];
    let mut swept = vec![0.0; longest];
    let mut deque = VecDeque::with_capacity(longest);

    for axis in 0..domain.dims() {
        let r = radii[axis];
        if r == 0 {
            continue;
        }
        let n = counts[axis];
        let stride = strides[axis];
        let line = &mut line[..n];
        let swept = &mut swept[..n];
        // Every line along `axis` starts at an index whose `axis` digit is 0.
        let block = stride * n;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let start = outer + inner;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[start + i * stride];
                }
                sliding_extremum(line, r, kind, swept, &mut deque);
                for (i, &v) in swept.iter().enumerate() {
                    data[start + i * stride] = v;
                }
            }
        }
    }
    data
}
