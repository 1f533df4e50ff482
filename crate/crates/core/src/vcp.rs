//! VC-guided preprocessing.
//!
//! Two modes:
//!
//! - **NN**: pre-train a compact network with MSE until its IVC distance to
//!   the target drops below `ε` (or a step cap is hit), widen it without
//!   changing the function it computes, then keep training the wide network.
//! - **SUR**: build a multilinear surrogate `f_appr` from a coarse sub-lattice
//!   of the samples, train a network `φ` on the residual `f - f_appr`, and
//!   predict `φ + f_appr`.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{BoxDomain, SampledField};
use crate::nn::{train, Dataset, LossRecord, Mlp, TrainConfig};
use crate::util::fmt_f64;
use crate::vc::{ivc_distance, IvcSpec};
use crate::{Error, Result};

/// Default cap on pre-training steps in NN mode.
pub const DEFAULT_PRETRAIN_CAP: usize = 5000;
/// Default number of steps between IVC-distance checks while pre-training.
pub const DEFAULT_CHECK_INTERVAL: usize = 100;
/// Default `ε` as a fraction of `Dist_IVC(0, f)`.
pub const DEFAULT_RELATIVE_EPSILON: f64 = 0.1;

/// Piecewise-multilinear interpolant through a regular sub-lattice of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilinearSurrogate {
    /// Node coordinates per axis, strictly increasing.
    axes: Vec<Vec<f64>>,
    /// Values on the node lattice, row-major.
    values: Vec<f64>,
}

impl MultilinearSurrogate {
    pub fn node_counts(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    /// Value at `x`; coordinates outside the node range are clamped.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.axes.len());
        let d = self.axes.len();
        let mut cell = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for (axis, &xi) in self.axes.iter().zip(x) {
            let last = axis.len() - 1;
            let xi = xi.clamp(axis[0], axis[last]);
            // first node strictly above xi, minus one, kept inside [0, last-1]
            let j = axis.partition_point(|&c| c <= xi).saturating_sub(1).min(last - 1);
            cell.push(j);
            frac.push((xi - axis[j]) / (axis[j + 1] - axis[j]));
        }
        let mut acc = 0.0;
        for corner in 0..1usize << d {
            let mut w = 1.0;
            let mut k = 0;
            for axis in 0..d {
                let up = (corner >> (d - 1 - axis)) & 1;
                w *= if up == 1 { frac[axis] } else { 1.0 - frac[axis] };
                k = k * self.axes[axis].len() + cell[axis] + up;
            }
            if w != 0.0 {
                acc += w * self.values[k];
            }
        }
        acc
    }

    /// Surrogate values on every node of `domain`.
    pub fn sample(&self, domain: &BoxDomain) -> Result<SampledField> {
        if domain.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: domain.dims(),
            });
        }
        SampledField::from_fn(domain.clone(), |x| self.eval(x))
    }
}

/// Grid indices of `nodes` equally spaced points on an axis of `counts`
/// samples, endpoints included.
fn sublattice(counts: usize, nodes: usize) -> Vec<usize> {
    (0..nodes)
        .map(|k| {
            let pos = k as f64 * (counts - 1) as f64 / (nodes - 1) as f64;
            pos.round() as usize
        })
        .collect()
}

/// Multilinear surrogate through `interp_nodes` samples per axis, and its
/// values on the original grid.
pub fn surrogate_interp(
    field: &SampledField,
    interp_nodes: &[usize],
) -> Result<(MultilinearSurrogate, SampledField)> {
    let d = field.domain();
    if interp_nodes.len() != d.dims() {
        return Err(Error::DimensionMismatch {
            expected: d.dims(),
            actual: interp_nodes.len(),
        });
    }
    let mut picks = Vec::with_capacity(d.dims());
    for (axis, (&nodes, &counts)) in interp_nodes.iter().zip(d.counts()).enumerate() {
        if nodes < 2 || nodes > counts {
            return Err(Error::NodeCountExceedsGrid {
                axis,
                nodes,
                counts,
            });
        }
        picks.push(sublattice(counts, nodes));
    }
    let axes: Vec<Vec<f64>> = picks
        .iter()
        .enumerate()
        .map(|(axis, idx)| idx.iter().map(|&i| d.axis_coord(axis, i)).collect())
        .collect();

    let total: usize = interp_nodes.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut multi = vec![0; d.dims()];
    let mut grid_idx = vec![0; d.dims()];
    for k in 0..total {
        let mut rest = k;
        for axis in (0..d.dims()).rev() {
            multi[axis] = rest % interp_nodes[axis];
            rest /= interp_nodes[axis];
            grid_idx[axis] = picks[axis][multi[axis]];
        }
        values.push(field.values()[d.linear_index(&grid_idx)]);
    }
    let surrogate = MultilinearSurrogate { axes, values };
    let sampled = surrogate.sample(d)?;
    Ok((surrogate, sampled))
}

/// Where new hidden units go when deriving a wider architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionPolicy {
    /// Every hidden layer is widened by the same factor.
    Proportional,
    /// Only the first hidden layer is widened.
    FirstLayer,
}

/// Widened version of `compact` with hidden widths multiplied by `factor`.
pub fn expanded_arch(compact: &[usize], factor: usize, policy: ExpansionPolicy) -> Vec<usize> {
    let last = compact.len().saturating_sub(1);
    compact
        .iter()
        .enumerate()
        .map(|(i, &w)| match policy {
            _ if i == 0 || i == last => w,
            ExpansionPolicy::Proportional => w * factor,
            ExpansionPolicy::FirstLayer if i == 1 => w * factor,
            ExpansionPolicy::FirstLayer => w,
        })
        .collect()
}

fn check_compatible(compact: &[usize], expanded: &[usize]) -> Result<()> {
    let bad = |why: &str| {
        Err(Error::IncompatibleArchitectures(format!(
            "{compact:?} -> {expanded:?}: {why}"
        )))
    };
    if compact.len() != expanded.len() {
        return bad("depths differ");
    }
    if compact.first() != expanded.first() || compact.last() != expanded.last() {
        return bad("input and output widths must match");
    }
    if compact.iter().zip(expanded).any(|(c, e)| e < c) {
        return bad("a layer shrinks");
    }
    Ok(())
}

/// Widens `compact` to `expanded` while computing the same function.
///
/// Original parameters are copied. New hidden units get seeded random
/// incoming weights and biases, uniform on `(-1/√k, 1/√k)`, and zero outgoing
/// weights, so they cannot influence the output until trained.
pub fn expand(compact: &Mlp, expanded: &[usize], seed: u64) -> Result<Mlp> {
    let old = compact.layer_sizes();
    check_compatible(old, expanded)?;
    let mut net = Mlp::zeros(expanded)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for l in 0..net.depth() {
        let (old_in, old_out) = (old[l], old[l + 1]);
        let (new_in, new_out) = (expanded[l], expanded[l + 1]);
        let bound = 1.0 / (new_in as f64).sqrt();
        let w_old = compact.weights(l);
        let w = net.weights_mut(l);
        for r in 0..new_out {
            for c in 0..new_in {
                w[r * new_in + c] = if r < old_out && c < old_in {
                    w_old[r * old_in + c]
                } else if r < old_out {
                    0.0
                } else {
                    rng.gen_range(-bound..bound)
                };
            }
        }
        let b_old = compact.biases(l);
        let b = net.biases_mut(l);
        for (r, bias) in b.iter_mut().enumerate() {
            *bias = if r < old_out {
                b_old[r]
            } else {
                rng.gen_range(-bound..bound)
            };
        }
    }
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcpMode {
    Nn,
    Sur,
}

impl std::fmt::Display for VcpMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VcpMode::Nn => "nn",
            VcpMode::Sur => "sur",
        })
    }
}

/// IVC-distance threshold for the preprocessing stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    /// A fraction of `Dist_IVC(0, f)`.
    Relative(f64),
    Absolute(f64),
    /// No threshold: NN pre-training always runs to the step cap and the
    /// threshold counts as met.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcpPlan {
    pub mode: VcpMode,
    pub epsilon: Epsilon,
    pub ivc_spec: IvcSpec,
    /// NN mode: the pre-trained network.
    pub compact_arch: Vec<usize>,
    /// NN mode: the widened network. SUR mode: the residual network.
    pub expanded_arch: Vec<usize>,
    /// SUR mode only.
    pub interp_nodes: Vec<usize>,
    /// NN mode: `steps` is the pre-training cap.
    pub pretrain_config: TrainConfig,
    pub check_interval: usize,
    pub main_config: TrainConfig,
    /// Loss levels whose first crossing in the main stage is reported.
    pub milestones: Vec<f64>,
    /// Seeds network initialization and expansion.
    pub seed: u64,
}

impl VcpPlan {
    pub fn nn(
        ivc_spec: IvcSpec,
        compact_arch: Vec<usize>,
        expanded_arch: Vec<usize>,
        main_config: TrainConfig,
    ) -> Self {
        let pretrain_config = main_config.clone().with_steps(DEFAULT_PRETRAIN_CAP);
        Self {
            mode: VcpMode::Nn,
            epsilon: Epsilon::Relative(DEFAULT_RELATIVE_EPSILON),
            ivc_spec,
            compact_arch,
            expanded_arch,
            interp_nodes: Vec::new(),
            pretrain_config,
            check_interval: DEFAULT_CHECK_INTERVAL,
            main_config,
            milestones: Vec::new(),
            seed: 0,
        }
    }

    pub fn sur(
        ivc_spec: IvcSpec,
        interp_nodes: Vec<usize>,
        arch: Vec<usize>,
        main_config: TrainConfig,
    ) -> Self {
        Self {
            mode: VcpMode::Sur,
            compact_arch: Vec::new(),
            expanded_arch: arch,
            interp_nodes,
            ..Self::nn(ivc_spec, Vec::new(), Vec::new(), main_config)
        }
    }

    pub fn with_epsilon(mut self, epsilon: Epsilon) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_milestones(mut self, milestones: Vec<f64>) -> Self {
        self.milestones = milestones;
        self
    }

    pub fn with_pretrain_config(mut self, config: TrainConfig) -> Self {
        self.pretrain_config = config;
        self
    }

    pub fn with_check_interval(mut self, interval: usize) -> Self {
        self.check_interval = interval;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.epsilon {
            Epsilon::Relative(e) | Epsilon::Absolute(e) if !(e.is_finite() && e > 0.0) => {
                return Err(Error::InvalidConfig(format!("epsilon must be positive, got {e}")))
            }
            _ => {}
        }
        if self.check_interval == 0 {
            return Err(Error::InvalidConfig("check interval must be positive".into()));
        }
        match self.mode {
            VcpMode::Nn => check_compatible(&self.compact_arch, &self.expanded_arch),
            VcpMode::Sur => match self.interp_nodes.iter().position(|&n| n < 2) {
                Some(axis) => Err(Error::NodeCountExceedsGrid {
                    axis,
                    nodes: self.interp_nodes[axis],
                    counts: 0,
                }),
                None if self.interp_nodes.is_empty() => {
                    Err(Error::InvalidConfig("SUR mode needs interpolation nodes".into()))
                }
                None => Ok(()),
            },
        }
    }
}

/// The trained predictor.
#[derive(Debug, Clone)]
pub enum VcpModel {
    Network(Mlp),
    /// `φ(x) + f_appr(x)`.
    Residual {
        net: Mlp,
        surrogate: MultilinearSurrogate,
    },
}

impl VcpModel {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            VcpModel::Network(net) => net.forward(x),
            VcpModel::Residual { net, surrogate } => Ok(net.forward(x)? + surrogate.eval(x)),
        }
    }

    pub fn sample_on(&self, like: &SampledField) -> Result<SampledField> {
        match self {
            VcpModel::Network(net) => net.sample_on(like),
            VcpModel::Residual { net, surrogate } => {
                let phi = net.sample_on(like)?;
                let appr = surrogate.sample(like.domain())?;
                phi.zip_with(&appr, |a, b| a + b)
            }
        }
    }

    pub fn network(&self) -> &Mlp {
        match self {
            VcpModel::Network(net) | VcpModel::Residual { net, .. } => net,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcpReport {
    pub mode: VcpMode,
    /// The threshold actually used.
    pub epsilon: f64,
    /// `Dist_IVC(0, f)`: the distance with no preprocessing.
    pub dist_ivc_pre: f64,
    /// `Dist_IVC(ψ_pre, f)` or `Dist_IVC(f_appr, f)`.
    pub dist_ivc_post: f64,
    pub pretrain_steps_used: usize,
    pub threshold_met: bool,
    /// Each milestone with the first recorded main-stage step at or below it.
    pub milestones: Vec<(f64, Option<usize>)>,
}

impl VcpReport {
    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode={}", self.mode);
        let _ = writeln!(out, "epsilon={}", fmt_f64(self.epsilon));
        let _ = writeln!(out, "dist_ivc_pre={}", fmt_f64(self.dist_ivc_pre));
        let _ = writeln!(out, "dist_ivc_post={}", fmt_f64(self.dist_ivc_post));
        let _ = writeln!(out, "pretrain_steps_used={}", self.pretrain_steps_used);
        let _ = writeln!(out, "threshold_met={}", self.threshold_met);
        for (level, step) in &self.milestones {
            let step = step.map_or_else(|| "none".to_string(), |s| s.to_string());
            let _ = writeln!(out, "milestone_{}={step}", fmt_f64(*level));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct VcpOutcome {
    pub model: VcpModel,
    /// Main-stage loss history; steps count from the start of that stage.
    pub history: Vec<LossRecord>,
    /// NN mode pre-training history (empty in SUR mode).
    pub pretrain_history: Vec<LossRecord>,
    pub report: VcpReport,
}

/// First recorded step at which the loss is at or below each milestone.
pub fn milestone_steps(history: &[LossRecord], milestones: &[f64]) -> Vec<(f64, Option<usize>)> {
    milestones
        .iter()
        .map(|&m| (m, history.iter().find(|r| r.loss <= m).map(|r| r.step)))
        .collect()
}

/// Runs the whole preprocessing pipeline on `target`.
pub fn run_vcp(target: &SampledField, plan: &VcpPlan) -> Result<VcpOutcome> {
    plan.validate()?;
    let zero = SampledField::constant(target.domain().clone(), 0.0)?;
    let dist_ivc_pre = ivc_distance(&zero, target, &plan.ivc_spec)?;
    let epsilon = match plan.epsilon {
        Epsilon::Relative(r) => r * dist_ivc_pre,
        Epsilon::Absolute(e) => e,
        Epsilon::Unbounded => f64::INFINITY,
    };
    let data = Dataset::from_field(target);

    let (model, history, pretrain_history, dist_ivc_post, pretrain_steps_used, threshold_met) =
        match plan.mode {
            VcpMode::Nn => {
                let compact = Mlp::init(&plan.compact_arch, plan.seed)?;
                let cfg = plan
                    .pretrain_config
                    .clone()
                    .with_record_every(plan.check_interval);
                let mut last_dist = f64::INFINITY;
                let mut check_err = None;
                let pre = train(compact, &data, &cfg, |p| {
                    let dist = p
                        .net
                        .sample_on(target)
                        .and_then(|psi| ivc_distance(&psi, target, &plan.ivc_spec));
                    match dist {
                        Ok(d) => {
                            last_dist = d;
                            if epsilon.is_finite() && d <= epsilon {
                                ControlFlow::Break(())
                            } else {
                                ControlFlow::Continue(())
                            }
                        }
                        Err(e) => {
                            check_err = Some(e);
                            ControlFlow::Break(())
                        }
                    }
                })?;
                if let Some(e) = check_err {
                    return Err(e);
                }
                let wide = expand(&pre.net, &plan.expanded_arch, plan.seed.wrapping_add(1))?;
                let main = train(wide, &data, &plan.main_config, |_| ControlFlow::Continue(()))?;
                (
                    VcpModel::Network(main.net),
                    main.history,
                    pre.history,
                    last_dist,
                    pre.steps_run,
                    last_dist <= epsilon,
                )
            }
            VcpMode::Sur => {
                let (surrogate, appr) = surrogate_interp(target, &plan.interp_nodes)?;
                let dist = ivc_distance(&appr, target, &plan.ivc_spec)?;
                let residual = target.sub(&appr)?;
                let data = data.with_targets(residual.into_values())?;
                let phi = Mlp::init(&plan.expanded_arch, plan.seed)?;
                let main = train(phi, &data, &plan.main_config, |_| ControlFlow::Continue(()))?;
                (
                    VcpModel::Residual {
                        net: main.net,
                        surrogate,
                    },
                    main.history,
                    Vec::new(),
                    dist,
                    0,
                    dist <= epsilon,
                )
            }
        };

    let report = VcpReport {
        mode: plan.mode,
        epsilon,
        dist_ivc_pre,
        dist_ivc_post,
        pretrain_steps_used,
        threshold_met,
        milestones: milestone_steps(&history, &plan.milestones),
    };
    Ok(VcpOutcome {
        model,
        history,
        pretrain_history,
        report,
    })
}
