//! Two-stage training strategies compared on a common target.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{BoxDomain, SampledField};
use crate::nn::{train, Dataset, LossRecord, Mlp, TrainConfig};
use crate::util::fmt_f64;
use crate::vc::{ivc_distance, IvcSpec};
use crate::vcp::MultilinearSurrogate;
use crate::Result;

/// An analytic objective.
pub type Objective = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Number of uniform test points per experiment.
pub const TEST_POINTS: usize = 1024;

/// A frozen function added to the network output: `scale · surrogate(x)`.
#[derive(Debug, Clone)]
pub struct Offset {
    pub surrogate: MultilinearSurrogate,
    pub scale: f64,
}

impl Offset {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.scale * self.surrogate.eval(x)
    }
}

pub struct Strategy {
    pub name: String,
    /// Stage 1 fits this function; without it stage 1 is skipped.
    pub pretrain: Option<Box<Objective>>,
    /// Stage 2 fits `f - offset` and predicts `net + offset`.
    pub offset: Option<Offset>,
}

impl Strategy {
    pub fn direct(name: &str) -> Self {
        Self {
            name: name.to_string(),
            pretrain: None,
            offset: None,
        }
    }

    pub fn pretrain(name: &str, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            pretrain: Some(Box::new(g)),
            ..Self::direct(name)
        }
    }

    pub fn offset(name: &str, surrogate: MultilinearSurrogate, scale: f64) -> Self {
        Self {
            offset: Some(Offset { surrogate, scale }),
            ..Self::direct(name)
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrategySetup {
    /// Training grid.
    pub grid: BoxDomain,
    pub arch: Vec<usize>,
    pub stage1: TrainConfig,
    pub stage2: TrainConfig,
    pub ivc_spec: IvcSpec,
    /// Shared by network initialization and the test set.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestRecord {
    pub step: usize,
    pub train_loss: f64,
    pub test_mse: f64,
}

#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub name: String,
    /// `Dist_IVC` between the model at the start of stage 2 and `f`.
    pub dist_ivc_stage1: f64,
    pub stage1_history: Vec<LossRecord>,
    /// Stage 2, with steps counted from its start.
    pub history: Vec<TestRecord>,
    pub final_test_mse: f64,
    /// The stage-2 network; predictions add the strategy's offset.
    pub net: Mlp,
}

impl StrategyResult {
    /// First recorded stage-2 step whose test MSE is at or below `level`.
    pub fn steps_to_reach(&self, level: f64) -> Option<usize> {
        self.history.iter().find(|r| r.test_mse <= level).map(|r| r.step)
    }
}

/// `count` seeded uniform points in `domain`'s box, row-major.
pub fn uniform_points(domain: &BoxDomain, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7E57_7E57_7E57_7E57);
    let mut out = Vec::with_capacity(count * domain.dims());
    for _ in 0..count {
        for (lo, hi) in domain.lower().iter().zip(domain.upper()) {
            out.push(rng.gen_range(*lo..=*hi));
        }
    }
    out
}

fn test_mse(net: &Mlp, offset: Option<&Offset>, points: &[f64], truth: &[f64]) -> f64 {
    let dim = net.input_dim();
    let pred = net.predict(points);
    pred.iter()
        .zip(truth)
        .zip(points.chunks_exact(dim))
        .map(|((p, t), x)| {
            let y = p + offset.map_or(0.0, |o| o.eval(x));
            (y - t) * (y - t)
        })
        .sum::<f64>()
        / truth.len() as f64
}

/// Runs every strategy from the same initial network and test set.
pub fn strategy_compare(
    strategies: &[Strategy],
    f: &Objective,
    setup: &StrategySetup,
) -> Result<Vec<StrategyResult>> {
    let target = SampledField::from_fn(setup.grid.clone(), f)?;
    let coords = setup.grid.node_coords();
    let points = uniform_points(&setup.grid, TEST_POINTS, setup.seed);
    let truth: Vec<f64> = points.chunks_exact(setup.grid.dims()).map(f).collect();

    let mut results = Vec::with_capacity(strategies.len());
    for s in strategies {
        let mut net = Mlp::init(&setup.arch, setup.seed)?;
        let mut stage1_history = Vec::new();
        if let Some(g) = &s.pretrain {
            let data = Dataset::from_fn(setup.grid.dims(), coords.clone(), g)?;
            let out = train(net, &data, &setup.stage1, |_| ControlFlow::Continue(()))?;
            net = out.net;
            stage1_history = out.history;
        }
        let offset = s.offset.as_ref();
        let offset_grid = match offset {
            Some(o) => Some(SampledField::from_fn(setup.grid.clone(), |x| o.eval(x))?),
            None => None,
        };
        let start = net.sample_on(&target)?;
        let start = match &offset_grid {
            Some(g) => start.zip_with(g, |a, b| a + b)?,
            None => start,
        };
        let dist_ivc_stage1 = ivc_distance(&start, &target, &setup.ivc_spec)?;

        let residual = match &offset_grid {
            Some(g) => target.sub(g)?,
            None => target.clone(),
        };
        let data = Dataset::from_field(&residual);
        let mut history = Vec::new();
        let out = train(net, &data, &setup.stage2, |p| {
            history.push(TestRecord {
                step: p.step,
                train_loss: p.loss,
                test_mse: test_mse(p.net, offset, &points, &truth),
            });
            ControlFlow::Continue(())
        })?;
        let final_test_mse = history.last().map_or(f64::NAN, |r| r.test_mse);
        results.push(StrategyResult {
            name: s.name.clone(),
            dist_ivc_stage1,
            stage1_history,
            history,
            final_test_mse,
            net: out.net,
        });
    }
    Ok(results)
}

/// Long-format CSV `strategy,stage,step,train_loss,test_mse` with a leading
/// `seed` column.
pub fn strategy_history_csv(runs: &[(u64, Vec<StrategyResult>)]) -> String {
    let mut out = String::from("seed,strategy,stage,step,train_loss,test_mse\n");
    for (seed, results) in runs {
        for r in results {
            for h in &r.stage1_history {
                let _ = writeln!(out, "{seed},{},1,{},{},nan", r.name, h.step, fmt_f64(h.loss));
            }
            for h in &r.history {
                let _ = writeln!(
                    out,
                    "{seed},{},2,{},{},{}",
                    r.name,
                    h.step,
                    fmt_f64(h.train_loss),
                    fmt_f64(h.test_mse)
                );
            }
        }
    }
    out
}
