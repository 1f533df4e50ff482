//! VC density of a network tracked across training.

use std::fmt::Write as _;

use crate::density::{default_abscissa, kde, silverman_bandwidth, vcdr, Bandwidth, DensityEstimate};
use crate::density::{DEFAULT_ABSCISSA_POINTS, DEFAULT_RELATIVE_FLOOR};
use crate::grid::SampledField;
use crate::nn::{Dataset, LossRecord, Mlp, TrainConfig, Trainer};
use crate::util::fmt_f64;
use crate::vc::{vc_field, WindowSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEvolution {
    /// Checkpoint steps, strictly increasing.
    pub rounds: Vec<usize>,
    /// Network VC density at each checkpoint.
    pub estimates: Vec<DensityEstimate>,
    pub target_estimate: DensityEstimate,
    /// Network density over target density at each checkpoint.
    pub ratios: Vec<Vec<Option<f64>>>,
    /// Raw network VC samples at each checkpoint.
    pub samples: Vec<Vec<f64>>,
    pub target_samples: Vec<f64>,
    /// Ratios are undefined where the target density is below this.
    pub floor: f64,
}

impl DensityEvolution {
    /// Builds the evolution from network fields already sampled at each
    /// checkpoint. All densities share the target's bandwidth and abscissa.
    pub fn from_fields(
        target: &SampledField,
        window: &WindowSpec,
        snapshots: &[(usize, SampledField)],
    ) -> Result<Self> {
        if snapshots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidConfig("checkpoints must be strictly increasing".into()));
        }
        let target_samples = vc_field(target, window)?.into_field().into_values();
        let bandwidth = silverman_bandwidth(&target_samples);
        let abscissa = default_abscissa(&target_samples, bandwidth, DEFAULT_ABSCISSA_POINTS);
        let bw = Bandwidth::Fixed(bandwidth);
        let target_estimate = kde(&target_samples, Some(&abscissa), bw)?;
        let floor = DEFAULT_RELATIVE_FLOOR * target_estimate.density.iter().copied().fold(0.0, f64::max);

        let mut rounds = Vec::with_capacity(snapshots.len());
        let mut estimates = Vec::with_capacity(snapshots.len());
        let mut ratios = Vec::with_capacity(snapshots.len());
        let mut samples = Vec::with_capacity(snapshots.len());
        for (round, field) in snapshots {
            if field.domain() != target.domain() {
                return Err(Error::DomainMismatch);
            }
            let s = vc_field(field, window)?.into_field().into_values();
            let est = kde(&s, Some(&abscissa), bw)?;
            ratios.push(vcdr(&est, &target_estimate, Some(floor))?);
            rounds.push(*round);
            estimates.push(est);
            samples.push(s);
        }
        Ok(Self {
            rounds,
            estimates,
            target_estimate,
            ratios,
            samples,
            target_samples,
            floor,
        })
    }

    /// VCDR of every checkpoint at arbitrary VC values, with the same
    /// bandwidth and floor as the stored curves.
    pub fn ratio_at(&self, points: &[f64]) -> Result<Vec<Vec<Option<f64>>>> {
        let bw = Bandwidth::Fixed(self.target_estimate.bandwidth);
        let den = kde(&self.target_samples, Some(points), bw)?;
        self.samples
            .iter()
            .map(|s| vcdr(&kde(s, Some(points), bw)?, &den, Some(self.floor)))
            .collect()
    }

    /// Target density at arbitrary VC values.
    pub fn target_density_at(&self, points: &[f64]) -> Result<Vec<f64>> {
        let bw = Bandwidth::Fixed(self.target_estimate.bandwidth);
        Ok(kde(&self.target_samples, Some(points), bw)?.density)
    }

    /// Columns `vc,target,psi,vcdr` for checkpoint `i`.
    pub fn checkpoint_csv(&self, i: usize) -> String {
        let mut out = String::from("vc,target,psi,vcdr\n");
        let est = &self.estimates[i];
        for (k, x) in self.target_estimate.abscissa.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(*x),
                fmt_f64(self.target_estimate.density[k]),
                fmt_f64(est.density[k]),
                fmt_f64(self.ratios[i][k].unwrap_or(f64::NAN))
            );
        }
        out
    }
}

/// Trains `net` on the grid samples of `target`, snapshotting it at each
/// checkpoint, and returns the density evolution, the loss history and the
/// final network.
pub fn density_evolution(
    target: &SampledField,
    window: &WindowSpec,
    net: Mlp,
    config: &TrainConfig,
    checkpoints: &[usize],
) -> Result<(DensityEvolution, Vec<LossRecord>, Mlp)> {
    if let Some(&last) = checkpoints.last() {
        if last > config.steps {
            return Err(Error::InvalidConfig(format!(
                "checkpoint {last} is past the last step {}",
                config.steps
            )));
        }
    }
    let data = Dataset::from_field(target);
    let mut trainer = Trainer::new(net, &data, config.clone())?;
    let mut history = vec![LossRecord {
        step: 0,
        loss: trainer.data_loss(),
    }];
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    loop {
        let step = trainer.steps_done();
        while next.peek().is_some_and(|&&c| c == step) {
            snapshots.push((step, trainer.net().sample_on(target)?));
            next.next();
        }
        if step == config.steps {
            break;
        }
        trainer.step()?;
        let s = trainer.steps_done();
        if s % config.record_every == 0 || s == config.steps {
            let loss = trainer.data_loss();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step: s });
            }
            history.push(LossRecord { step: s, loss });
        }
    }
    let evolution = DensityEvolution::from_fields(target, window, &snapshots)?;
    Ok((evolution, history, trainer.into_net()))
}
