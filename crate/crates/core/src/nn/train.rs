use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_data, mse, Dataset, Mlp, Workspace};
use crate::{Error, Result};

pub const DEFAULT_RECORD_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Batch {
    Full,
    Minibatch(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch: Batch,
    pub seed: u64,
    /// Full-dataset loss is recorded every this many steps (and at the end).
    pub record_every: usize,
}

impl TrainConfig {
    pub fn adam(learning_rate: f64, steps: usize) -> Self {
        Self {
            optimizer: Optimizer::adam(),
            learning_rate,
            steps,
            batch: Batch::Full,
            seed: 0,
            record_every: DEFAULT_RECORD_EVERY,
        }
    }

    pub fn sgd(learning_rate: f64, steps: usize) -> Self {
        Self {
            optimizer: Optimizer::Sgd,
            ..Self::adam(learning_rate, steps)
        }
    }

    pub fn with_batch(mut self, batch: Batch) -> Self {
        self.batch = batch;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn validate(&self, data_len: usize) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be positive".into()));
        }
        if let Batch::Minibatch(size) = self.batch {
            if size == 0 || size > data_len {
                return Err(Error::InvalidConfig(format!(
                    "minibatch size {size} must be in 1..={data_len}"
                )));
            }
        }
        if let Optimizer::Adam { beta1, beta2, epsilon } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || epsilon <= 0.0 {
                return Err(Error::InvalidConfig("Adam needs betas in [0,1) and epsilon > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub loss: f64,
}

/// Passed to the training hook at every recording step.
pub struct Progress<'a> {
    pub step: usize,
    pub loss: f64,
    pub net: &'a Mlp,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Mlp,
    pub history: Vec<LossRecord>,
    pub steps_run: usize,
    /// The hook asked to stop before `config.steps`.
    pub stopped_early: bool,
}

/// Step-by-step optimizer over a fixed dataset.
pub struct Trainer<'d> {
    net: Mlp,
    data: &'d Dataset,
    config: TrainConfig,
    ws: Workspace,
    grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    batch_inputs: Vec<f64>,
    batch_targets: Vec<f64>,
}

impl<'d> Trainer<'d> {
    pub fn new(net: Mlp, data: &'d Dataset, config: TrainConfig) -> Result<Self> {
        check_data(&net, data)?;
        config.validate(data.len())?;
        let rows = match config.batch {
            Batch::Full => data.len(),
            Batch::Minibatch(size) => size,
        };
        let n = net.params().len();
        Ok(Self {
            ws: Workspace::new(&net, rows),
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            // decorrelate the shuffling stream from initialisation seeds
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_5EED_5EED_5EED),
            order: (0..data.len()).collect(),
            cursor: data.len(),
            batch_inputs: Vec::with_capacity(rows * data.dim()),
            batch_targets: Vec::with_capacity(rows),
            net,
            data,
            config,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn into_net(self) -> Mlp {
        self.net
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Full-dataset MSE of the current network.
    pub fn data_loss(&self) -> f64 {
        mse(&self.net.predict(self.data.inputs()), self.data.targets())
    }

    fn next_batch(&mut self, size: usize) {
        self.batch_inputs.clear();
        self.batch_targets.clear();
        while self.batch_targets.len() < size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            let i = self.order[self.cursor];
            self.cursor += 1;
            self.batch_inputs.extend_from_slice(self.data.input(i));
            self.batch_targets.push(self.data.targets()[i]);
        }
    }

    /// One parameter update; returns the batch loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        self.grad.fill(0.0);
        let loss = match self.config.batch {
            Batch::Full => {
                self.net.forward_batch(self.data.inputs(), &mut self.ws);
                self.net.backward_batch(self.data.targets(), &mut self.ws, &mut self.grad)
            }
            Batch::Minibatch(size) => {
                self.next_batch(size);
                self.net.forward_batch(&self.batch_inputs, &mut self.ws);
                self.net.backward_batch(&self.batch_targets, &mut self.ws, &mut self.grad)
            }
        };
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step: self.step });
        }
        self.step += 1;
        let lr = self.config.learning_rate;
        let params = self.net.params_mut();
        match self.config.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(&self.grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, &g), m), v) in params
                    .iter_mut()
                    .zip(&self.grad)
                    .zip(self.m.iter_mut())
                    .zip(self.v.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
        Ok(loss)
    }
}

/// Runs `config.steps` updates. The full-dataset loss is recorded at step 0,
/// every `record_every` steps and at the last step; `hook` sees each record
/// and may stop training early.
pub fn train<H>(net: Mlp, data: &Dataset, config: &TrainConfig, mut hook: H) -> Result<TrainOutcome>
where
    H: FnMut(&Progress<'_>) -> ControlFlow<()>,
{
    let mut trainer = Trainer::new(net, data, config.clone())?;
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut record = |trainer: &Trainer<'_>, history: &mut Vec<LossRecord>| -> Result<ControlFlow<()>> {
        let step = trainer.steps_done();
        let loss = trainer.data_loss();
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        history.push(LossRecord { step, loss });
        Ok(hook(&Progress {
            step,
            loss,
            net: trainer.net(),
        }))
    };

    if record(&trainer, &mut history)?.is_break() {
        stopped_early = config.steps > 0;
    } else {
        while trainer.steps_done() < config.steps {
            trainer.step()?;
            let s = trainer.steps_done();
            if (s % config.record_every == 0 || s == config.steps) && record(&trainer, &mut history)?.is_break() {
                stopped_early = s < config.steps;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        steps_run: trainer.steps_done(),
        net: trainer.into_net(),
        history,
        stopped_early,
    })
}
