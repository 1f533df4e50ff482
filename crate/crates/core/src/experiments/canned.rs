//! The canned desk-scale experiments.
//!
//! Each experiment is a pure function of its [`RunOptions`] that returns the
//! text of every output file; [`ExperimentOutput::write_to`] puts them on
//! disk. Replicates use seeds `seed, seed + 1, ...`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::path::Path;

use super::objectives::{linear3d as linear, piecewise_f1, piecewise_f2, shapes, sin2, vortex_pair};
use super::{
    error_vs_vc, mean, strategy_compare, strategy_history_csv, uniform_points, vc_bins,
    DensityEvolution, Smoothing, SortedErrorProfile, Strategy, StrategySetup, TEST_POINTS,
};
use crate::grid::{BoxDomain, SampledField};
use crate::nn::{train, Batch, Dataset, Mlp, TrainConfig};
use crate::util::{fmt_f64, write_atomic};
use crate::vc::{vc_field, IvcSpec, WindowSpec};
use crate::vcp::{run_vcp, surrogate_interp, Epsilon, VcpPlan};
use crate::{Error, Result};

pub const EXPERIMENTS: [&str; 8] = [
    "linear3d",
    "piecewise",
    "sin-density",
    "image",
    "strategies",
    "vcp-linear",
    "vcp-image",
    "flow-synthetic",
];

/// Probe VC values for the sin(2x) density-ratio table.
pub const VCDR_PROBES: [f64; 4] = [0.08, 0.18, 0.28, 0.38];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    /// Multiplies step counts; grid counts scale by `scale^(1/d)`.
    pub scale: f64,
}

impl RunOptions {
    pub fn new(seed: u64, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidConfig(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { seed, scale })
    }

    fn steps(&self, n: usize) -> usize {
        ((n as f64 * self.scale).round() as usize).max(1)
    }

    fn count(&self, n: usize, dims: usize) -> usize {
        ((n as f64 * self.scale.powf(1.0 / dims as f64)).round() as usize).max(4)
    }

    fn rep(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: 0, scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub name: String,
    pub config: Vec<(String, String)>,
    /// File name to contents, excluding `config.txt` and `report.txt`.
    pub files: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
}

impl ExperimentOutput {
    fn new(name: &str, opts: &RunOptions) -> Self {
        let mut out = Self {
            name: name.to_string(),
            ..Self::default()
        };
        out.set("experiment", name);
        out.set("seed", opts.seed);
        out.set("scale", fmt_f64(opts.scale));
        out
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn config_text(&self) -> String {
        self.config.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// `check.*`, `detail.*` and `metric.*` lines.
    pub fn report_text(&self) -> String {
        let mut out = format!("experiment={}\n", self.name);
        for c in &self.checks {
            let verdict = if c.passed { "pass" } else { "fail" };
            let _ = writeln!(out, "check.{}={verdict}", c.name);
            let _ = writeln!(out, "detail.{}={}", c.name, c.detail);
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "metric.{k}={}", fmt_f64(*v));
        }
        out
    }

    /// Writes every output into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join("config.txt"), self.config_text().as_bytes())?;
        for (name, body) in &self.files {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
        write_atomic(&dir.join("report.txt"), self.report_text().as_bytes())
    }
}

/// Runs the named experiment.
pub fn run_experiment(name: &str, opts: &RunOptions) -> Result<ExperimentOutput> {
    match name {
        "linear3d" => linear3d(opts),
        "piecewise" => piecewise(opts),
        "sin-density" => sin_density(opts),
        "image" => image(opts),
        "strategies" => strategies(opts),
        "vcp-linear" => vcp_linear(opts),
        "vcp-image" => vcp_image(opts),
        "flow-synthetic" => flow_synthetic(opts),
        other => Err(Error::Unsupported(format!("unknown experiment `{other}`"))),
    }
}

fn count_true(flags: &[bool]) -> usize {
    flags.iter().filter(|&&b| b).count()
}

fn arch_name(arch: &[usize]) -> String {
    arch.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

/// Profile of `pred` against `target` and the final VC density, shared by
/// every experiment.
fn finish(
    out: &mut ExperimentOutput,
    target: &SampledField,
    pred: &SampledField,
    window: &WindowSpec,
    radius: usize,
) -> Result<SortedErrorProfile> {
    let profile = error_vs_vc(pred, target, window, Smoothing::Avg, radius)?;
    out.files.insert("profile.csv".into(), profile.to_csv());
    out.metric("final.spearman", profile.spearman);
    let ev = DensityEvolution::from_fields(target, window, &[(0, pred.clone())])?;
    out.files.insert("density_final.csv".into(), ev.checkpoint_csv(0));
    Ok(profile)
}

fn full_batch_or(batch: usize, data_len: usize) -> Batch {
    if batch >= data_len {
        Batch::Full
    } else {
        Batch::Minibatch(batch)
    }
}

/// Slopes κ ∈ {1, 10} of `κ(x+y+z)` on two widths; the smaller slope should
/// reach the lower test MSE.
pub fn linear3d(opts: &RunOptions) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("linear3d", opts);
    let n = opts.count(11, 3);
    let grid = BoxDomain::cube(-1.0, 1.0, &[n, n, n])?;
    let steps = opts.steps(3000);
    let archs = [vec![3, 20, 1], vec![3, 50, 1]];
    let kappas = [1.0, 10.0];
    let reps = 4;
    let lr = 1e-2;
    out.set("grid", format!("{n}x{n}x{n}"));
    out.set("steps", steps);
    out.set("architectures", "3-20-1,3-50-1");
    out.set("hidden_layers", 1);
    out.set("optimizer", "adam");
    out.set("learning_rate", lr);
    out.set("replicates", reps);
    out.set("test_points", TEST_POINTS);

    let ivc_spec = IvcSpec::new(0.1, 0.6, 16)?;
    let mut csv = String::from("arch,kappa,rep,step,train_loss,test_mse\n");
    let mut finals = BTreeMap::new();
    let mut representative = None;
    for arch in &archs {
        for &kappa in &kappas {
            let f = linear(kappa);
            for r in 0..reps {
                let seed = opts.rep(r);
                let setup = StrategySetup {
                    grid: grid.clone(),
                    arch: arch.clone(),
                    stage1: TrainConfig::adam(lr, 1),
                    stage2: TrainConfig::adam(lr, steps).with_seed(seed),
                    ivc_spec,
                    seed,
                };
                let res = strategy_compare(&[Strategy::direct("direct")], &f, &setup)?.remove(0);
                for h in &res.history {
                    let _ = writeln!(
                        csv,
                        "{},{kappa},{r},{},{},{}",
                        arch_name(arch),
                        h.step,
                        fmt_f64(h.train_loss),
                        fmt_f64(h.test_mse)
                    );
                }
                let key = format!("final_test_mse.{}.kappa{kappa}.rep{r}", arch_name(arch));
                out.metric(key, res.final_test_mse);
                finals.insert((arch[1], kappa as u32, r), res.final_test_mse);
                if representative.is_none() && kappa == 10.0 {
                    representative = Some((f, res.net));
                }
            }
        }
    }
    out.files.insert("loss_history.csv".into(), csv);
    for arch in &archs {
        let w = arch[1];
        let wins: Vec<bool> = (0..reps).map(|r| finals[&(w, 1, r)] < finals[&(w, 10, r)]).collect();
        out.check(
            &format!("small_slope_lower_error.width{w}"),
            count_true(&wins) >= 3,
            format!("{} of {reps} replicates", count_true(&wins)),
        );
    }
    let (f, net) = representative.expect("at least one run");
    let target = SampledField::from_fn(grid, f)?;
    finish(&mut out, &target, &net.sample_on(&target)?, &WindowSpec::isotropic(0.4)?, 10)?;
    Ok(out)
}

/// Piecewise-linear targets; the flatter right half should be learned first.
pub fn piecewise(opts: &RunOptions) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("piecewise", opts);
    let n = opts.count(401, 1);
    let grid = BoxDomain::new(vec![-2.0], vec![2.0], vec![n])?;
    let steps = opts.steps(2000);
    let arch = vec![1, 50, 50, 1];
    let reps = 3;
    let lr = 1e-2;
    out.set("grid", n);
    out.set("steps", steps);
    out.set("architecture", arch_name(&arch));
    out.set("hidden_layers", 2);
    out.set("optimizer", "adam");
    out.set("learning_rate", lr);
    out.set("replicates", reps);
    out.set("left_interval", "[-1.5,-0.5]");
    out.set("right_interval", "[0.5,1.5]");

    let mut csv = String::from("variant,rep,step,train_loss,test_left,test_right\n");
    let mut representative = None;
    let variants: [(&str, fn(&[f64]) -> f64); 2] = [("f1", piecewise_f1), ("f2", piecewise_f2)];
    for (name, f) in variants {
        let mut wins = Vec::new();
        for r in 0..reps {
            let seed = opts.rep(r);
            let target = SampledField::from_fn(grid.clone(), f)?;
            let data = Dataset::from_field(&target);
            let points = uniform_points(&grid, TEST_POINTS, seed);
            let split = |lo: f64, hi: f64| -> Vec<f64> {
                points.iter().copied().filter(|x| (lo..=hi).contains(x)).collect()
            };
            let (left, right) = (split(-1.5, -0.5), split(0.5, 1.5));
            let truth = |xs: &[f64]| xs.iter().map(|&x| f(&[x])).collect::<Vec<_>>();
            let (t_left, t_right) = (truth(&left), truth(&right));
            let mse = |net: &Mlp, xs: &[f64], ts: &[f64]| {
                let p = net.predict(xs);
                p.iter().zip(ts).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / ts.len().max(1) as f64
            };
            let mut last = (f64::NAN, f64::NAN);
            let cfg = TrainConfig::adam(lr, steps).with_seed(seed);
            let res = train(Mlp::init(&arch, seed)?, &data, &cfg, |p| {
                let (l, rr) = (mse(p.net, &left, &t_left), mse(p.net, &right, &t_right));
                let _ = writeln!(
                    csv,
                    "{name},{r},{},{},{},{}",
                    p.step,
                    fmt_f64(p.loss),
                    fmt_f64(l),
                    fmt_f64(rr)
                );
                last = (l, rr);
                ControlFlow::Continue(())
            })?;
            out.metric(format!("test_left.{name}.rep{r}"), last.0);
            out.metric(format!("test_right.{name}.rep{r}"), last.1);
            wins.push(last.1 < last.0);
            if name == "f2" && representative.is_none() {
                representative = Some((target, res.net));
            }
        }
        out.check(
            &format!("right_side_faster.{name}"),
            count_true(&wins) >= 2,
            format!("{} of {reps} replicates", count_true(&wins)),
        );
    }
    out.files.insert("loss_history.csv".into(), csv);
    let (target, net) = representative.expect("f2 ran");
    finish(&mut out, &target, &net.sample_on(&target)?, &WindowSpec::isotropic(0.05)?, 10)?;
    Ok(out)
}

/// VC density of a network fitting sin(2x), tracked over training.
pub fn sin_density(opts: &RunOptions) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("sin-density", opts);
    let n = opts.count(1001, 1);
    let grid = BoxDomain::new(vec![-PI], vec![PI], vec![n])?;
    let mut checkpoints: Vec<usize> = [100, 400, 2000, 10000].iter().map(|&c| opts.steps(c)).collect();
    checkpoints.dedup();
    let steps = *checkpoints.last().unwrap();
    let arch = vec![1, 20, 20, 1];
    let reps = 3;
    let lr = 1e-2;
    let window = WindowSpec::isotropic(0.2)?;
    out.set("grid", n);
    out.set("window_length", 0.2);
    out.set("checkpoints", checkpoints.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    out.set("architecture", arch_name(&arch));
    out.set("hidden_layers", 2);
    out.set("optimizer", "adam");
    out.set("learning_rate", lr);
    out.set("replicates", reps);
    out.set("bandwidth", "silverman of target, shared");

    let target = SampledField::from_fn(grid, sin2)?;
    let mut loss_csv = String::from("rep,step,loss\n");
    let mut table = String::from("rep,round,vc,target_density,vcdr\n");
    let mut in_band = Vec::new();
    let mut ordered = Vec::new();
    // The round at which the early-convergence ordering is read off.
    let early = checkpoints[checkpoints.len().saturating_sub(3)];
    for r in 0..reps {
        let seed = opts.rep(r);
        let cfg = TrainConfig::adam(lr, steps).with_seed(seed);
        let net = Mlp::init(&arch, seed)?;
        let (ev, hist, net) = super::density_evolution(&target, &window, net, &cfg, &checkpoints)?;
        for h in &hist {
            let _ = writeln!(loss_csv, "{r},{},{}", h.step, fmt_f64(h.loss));
        }
        let ratios = ev.ratio_at(&VCDR_PROBES)?;
        let dens = ev.target_density_at(&VCDR_PROBES)?;
        for (i, round) in ev.rounds.iter().enumerate() {
            for (k, v) in VCDR_PROBES.iter().enumerate() {
                let ratio = ratios[i][k].unwrap_or(f64::NAN);
                let _ = writeln!(table, "{r},{round},{v},{},{}", fmt_f64(dens[k]), fmt_f64(ratio));
                out.metric(format!("vcdr.rep{r}.round{round}.vc{v}"), ratio);
            }
        }
        let late = ratios.last().unwrap();
        in_band.push(late.iter().flatten().all(|v| (0.85..=1.15).contains(v)));

        // the two probes where the target density is smallest
        let mut by_density: Vec<usize> = (0..VCDR_PROBES.len()).collect();
        by_density.sort_by(|&a, &b| dens[a].total_cmp(&dens[b]).then(a.cmp(&b)));
        let i_early = ev.rounds.iter().position(|&x| x == early).unwrap();
        let dev = |ks: &[usize]| {
            let d: Vec<f64> = ks.iter().map(|&k| ratios[i_early][k].map_or(1.0, |v| (v - 1.0).abs())).collect();
            mean(&d)
        };
        let (low, high) = (dev(&by_density[..2]), dev(&by_density[2..]));
        out.metric(format!("early_deviation_low_density.rep{r}"), low);
        out.metric(format!("early_deviation_high_density.rep{r}"), high);
        ordered.push(low < high);

        if r == 0 {
            out.files.insert("density_target.csv".into(), ev.target_estimate.to_csv());
            for (i, round) in ev.rounds.iter().enumerate() {
                out.files.insert(format!("density_round_{round}.csv"), ev.checkpoint_csv(i));
            }
            finish(&mut out, &target, &net.sample_on(&target)?, &window, 10)?;
        }
    }
    out.files.insert("loss_history.csv".into(), loss_csv);
    out.files.insert("vcdr_table.csv".into(), table);
    out.check(
        "late_vcdr_in_band",
        count_true(&in_band) == reps,
        format!("{} of {reps} replicates within [0.85, 1.15] at round {steps}", count_true(&in_band)),
    );
    out.check(
        "low_density_matched_first",
        count_true(&ordered) >= 2,
        format!("{} of {reps} replicates at round {early}", count_true(&ordered)),
    );
    Ok(out)
}

fn image_grid(opts: &RunOptions) -> Result<(BoxDomain, usize)> {
    let n = opts.count(64, 2);
    Ok((BoxDomain::cube(0.0, 1.0, &[n, n])?, n))
}

/// Smoothing radius scaled with the pixel count, 10 ranks at 64x64.
fn image_radius(n: usize) -> usize {
    ((10.0 * (n * n) as f64 / 4096.0).round() as usize).max(1)
}

/// Pointwise error against pixel VC on a synthetic binary image.
pub fn image(opts: &RunOptions) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("image", opts);
    let (grid, n) = image_grid(opts)?;
    let steps = opts.steps(20000);
    let arch = vec![2, 50, 50, 1];
    let reps = 3;
    let lr = 1e-3;
    let window = WindowSpec::cells(7.0)?;
    let radius = image_radius(n);
    out.set("image", format!("{n}x{n} synthetic shapes"));
    out.set("steps", steps);
    out.set("architecture", arch_name(&arch));
    out.set("hidden_layers", 2);
    out.set("optimizer", "adam");
    out.set("learning_rate", lr);
    out.set("batch", 512);
    out.set("window_pixels", 7);
    out.set("window_radius_pixels", 3);
    out.set("smoothing_radius", radius);
    out.set("replicates", reps);

    let target = SampledField::from_fn(grid.clone(), shapes)?;
    let data = Dataset::from_field(&target);
    let mut csv = String::from("rep,step,train_loss,test_mse\n");
    let mut tendency = Vec::new();
    let mut representative = None;
    for r in 0..reps {
        let seed = opts.rep(r);
        let points = uniform_points(&grid, TEST_POINTS, seed);
        let truth: Vec<f64> = points.chunks_exact(2).map(shapes).collect();
        let cfg = TrainConfig::adam(lr, steps)
            .with_seed(seed)
            .with_batch(full_batch_or(512, data.len()));
        let res = train(Mlp::init(&arch, seed)?, &data, &cfg, |p| {
            let pred = p.net.predict(&points);
            let t = pred.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64;
            let _ = writeln!(csv, "{r},{},{},{}", p.step, fmt_f64(p.loss), fmt_f64(t));
            ControlFlow::Continue(())
        })?;
        let pred = res.net.sample_on(&target)?;
        let profile = error_vs_vc(&pred, &target, &window, Smoothing::Avg, radius)?;
        let bins = vc_bins(&profile, 3);
        let (bottom, top) = (mean(&bins[0]), mean(&bins[2]));
        out.metric(format!("spearman.rep{r}"), profile.spearman);
        out.metric(format!("bottom_third_error.rep{r}"), bottom);
        out.metric(format!("top_third_error.rep{r}"), top);
        tendency.push(profile.spearman > 0.2 && top > bottom);
        if representative.is_none() {
            representative = Some(pred);
        }
    }
    out.files.insert("loss_history.csv".into(), csv);
    out.check(
        "vc_tendency",
        count_true(&tendency) >= 2,
        format!("{} of {reps} replicates with spearman > 0.2 and top third above bottom", count_true(&tendency)),
    );
    let pred = representative.expect("one replicate");
    finish(&mut out, &target, &pred, &window, radius)?;
    Ok(out)
}

/// Two-stage training of `10x` after pre-training on `-100x`, `100x`, `-10x`
/// or nothing.
pub fn strategies(opts: &RunOptions) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("strategies", opts);
    let n = opts.count(201, 1);
    let grid = BoxDomain::new(vec![-1.0], vec![1.0], vec![n])?;
    let (s1, s2) = (opts.steps(2000), opts.steps(2000));
    let arch = vec![1, 50, 1];
    let reps = 3;
    let lr = 1e-3;
    let ivc_spec = IvcSpec::new(0.05, 0.2, 16)?;
    out.set("grid", n);
    out.set("stage1_steps", s1);
    out.set("stage2_steps", s2);
    out.set("architecture", arch_name(&arch));
    out.set("hidden_layers", 1);
    out.set("optimizer", "adam");
    out.set("learning_rate", lr);
    out.set("ivc_lengths", "0.05..0.2 (16 nodes)");
    out.set("replicates", reps);
    out.set("strategies", "A:-100x B:100x C:-10x D:direct");

    let f = |x: &[f64]| 10.0 * x[0];
    let mut runs = Vec::new();
    let mut ordering = Vec::new();
    let mut a_worst = Vec::new();
    let mut representative = None;
    for r in 0..reps {
        let seed = opts.rep(r);
        let setup = StrategySetup {
            grid: grid.clone(),
            arch: arch.clone(),
            stage1: TrainConfig::adam(lr, s1).with_seed(seed),
            stage2: TrainConfig::adam(lr, s2).with_seed(seed),
            ivc_spec,
            seed,
        };
        let list = [
            Strategy::pretrain("A", |x: &[f64]| -100.0 * x[0]),
            Strategy::pretrain("B", |x: &[f64]| 100.0 * x[0]),
            Strategy::pretrain("C", |x: &[f64]| -10.0 * x[0]),
            Strategy::direct("D"),
        ];
        let res = strategy_compare(&list, &f, &setup)?;
        for s in &res {
            out.metric(format!("dist_ivc_stage1.{}.rep{r}", s.name), s.dist_ivc_stage1);
            out.metric(format!("final_test_mse.{}.rep{r}", s.name), s.final_test_mse);
        }
        ordering.push(res.windows(2).all(|w| w[0].dist_ivc_stage1 > w[1].dist_ivc_stage1));
        a_worst.push(res[1..].iter().all(|s| s.final_test_mse < res[0].final_test_mse));
        if representative.is_none() {
            representative = Some(res[0].net.clone());
        }
        runs.push((seed, res));
    }
    out.files.insert("loss_history.csv".into(), strategy_history_csv(&runs));
    out.check(
        "dist_ivc_order_a_b_c_d",
        count_true(&ordering) == reps,
        format!("{} of {reps} replicates", count_true(&ordering)),
    );
    out.check(
        "a_largest_final_error",
        2 * count_true(&a_worst) > reps,
        format!("{} of {reps} replicates", count_true(&a_worst)),
    );
    let target = SampledField::from_fn(grid, f)?;
    let net = representative.expect("one replicate");
    finish(&mut out, &target, &net.sample_on(&target)?, &WindowSpec::isotropic(0.05)?, 5)?;
    Ok(out)
}

/// Preprocessing on `10(x+y+z)`: half-target pre-training (A), direct (B),
/// surrogate offset (C) and half surrogate offset (D).
pub fn vcp_linear(opts: &RunOptions) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("vcp-linear", opts);
    let n = opts.count(11, 3);
    let grid = BoxDomain::cube(-1.0, 1.0, &[n, n, n])?;
    let (s1, s2) = (opts.steps(1000), opts.steps(3000));
    let arch = vec![3, 50, 50, 1];
    let nodes = 3.min(n);
    let reps = 3;
    let lr = 1e-2;
    let record = 10.min(s2);
    let ivc_spec = IvcSpec::new(0.3, 0.8, 16)?;
    out.set("grid", format!("{n}x{n}x{n}"));
    out.set("stage1_steps", s1);
    out.set("stage2_steps", s2);
    out.set("architecture", arch_name(&arch));
    out.set("hidden_layers", 2);
    out.set("optimizer", "adam");
    out.set("learning_rate", lr);
    out.set("record_every", record);
    out.set("interp_nodes", format!("{nodes}x{nodes}x{nodes}"));
    out.set("replicates", reps);
    out.set("strategies", "A:pretrain 5(x+y+z) B:direct C:surrogate D:half surrogate");

    let f = linear(10.0);
    let target = SampledField::from_fn(grid.clone(), f)?;
    let (sur, _) = surrogate_interp(&target, &[nodes; 3])?;
    let mut runs = Vec::new();
    let (mut fast_a, mut fast_c, mut c_over_d) = (Vec::new(), Vec::new(), Vec::new());
    let budget = (0.6 * s2 as f64).floor() as usize;
    let mut representative = None;
    for r in 0..reps {
        let seed = opts.rep(r);
        let setup = StrategySetup {
            grid: grid.clone(),
            arch: arch.clone(),
            stage1: TrainConfig::adam(lr, s1).with_seed(seed),
            stage2: TrainConfig::adam(lr, s2).with_seed(seed).with_record_every(record),
            ivc_spec,
            seed,
        };
        let list = [
            Strategy::pretrain("A", linear(5.0)),
            Strategy::direct("B"),
            Strategy::offset("C", sur.clone(), 1.0),
            Strategy::offset("D", sur.clone(), 0.5),
        ];
        let res = strategy_compare(&list, &f, &setup)?;
        let reference = res[1].final_test_mse;
        for s in &res {
            out.metric(format!("dist_ivc_stage1.{}.rep{r}", s.name), s.dist_ivc_stage1);
            out.metric(format!("final_test_mse.{}.rep{r}", s.name), s.final_test_mse);
            let reach = s.steps_to_reach(reference).map_or(f64::NAN, |v| v as f64);
            out.metric(format!("steps_to_direct_final.{}.rep{r}", s.name), reach);
        }
        let within = |i: usize| res[i].steps_to_reach(reference).is_some_and(|k| k <= budget);
        fast_a.push(within(0));
        fast_c.push(within(2));
        c_over_d.push(res[2].final_test_mse < res[3].final_test_mse);
        if representative.is_none() {
            representative = Some(res[1].net.clone());
        }
        runs.push((seed, res));
    }
    out.files.insert("loss_history.csv".into(), strategy_history_csv(&runs));
    for (name, flags) in [("speedup_a", &fast_a), ("speedup_c", &fast_c)] {
        out.check(
            name,
            count_true(flags) >= 2,
            format!("{} of {reps} replicates reach the direct final test MSE within {budget} steps", count_true(flags)),
        );
    }
    out.check(
        "c_below_d",
        2 * count_true(&c_over_d) > reps,
        format!("{} of {reps} replicates", count_true(&c_over_d)),
    );

    // Both preprocessing modes end to end on the grid data.
    let main = TrainConfig::adam(lr, opts.steps(1000)).with_seed(opts.seed);
    let milestones = vec![1.0, 1e-1, 1e-2, 1e-3];
    let nn = VcpPlan::nn(ivc_spec, vec![3, 10, 10, 1], arch.clone(), main.clone())
        .with_pretrain_config(TrainConfig::adam(lr, opts.steps(1000)).with_seed(opts.seed))
        .with_check_interval(100.min(opts.steps(1000)))
        .with_milestones(milestones.clone())
        .with_seed(opts.seed);
    let sur_plan = VcpPlan::sur(ivc_spec, vec![nodes; 3], arch.clone(), main)
        .with_epsilon(Epsilon::Relative(0.1))
        .with_milestones(milestones)
        .with_seed(opts.seed);
    out.files.insert("vcp_nn_report.txt".into(), run_vcp(&target, &nn)?.report.to_text());
    out.files.insert("vcp_sur_report.txt".into(), run_vcp(&target, &sur_plan)?.report.to_text());

    let net = representative.expect("one replicate");
    finish(&mut out, &target, &net.sample_on(&target)?, &WindowSpec::isotropic(0.4)?, 10)?;
    Ok(out)
}

/// Preprocessing on the synthetic image: direct, pre-training on `f/2`, and
/// a multilinear surrogate offset.
pub fn vcp_image(opts: &RunOptions) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("vcp-image", opts);
    let (grid, n) = image_grid(opts)?;
    let (s1, s2) = (opts.steps(1000), opts.steps(4000));
    let arch = vec![2, 50, 50, 1];
    let nodes = 17.min(n);
    let lr = 1e-3;
    let window = WindowSpec::cells(7.0)?;
    let h = 1.0 / (n - 1) as f64;
    let ivc_spec = IvcSpec::new(2.0 * h, 8.0 * h, 16)?;
    out.set("image", format!("{n}x{n} synthetic shapes"));
    out.set("stage1_steps", s1);
    out.set("stage2_steps", s2);
    out.set("architecture", arch_name(&arch));
    out.set("hidden_layers", 2);
    out.set("optimizer", "adam");
    out.set("learning_rate", lr);
    out.set("batch", 512);
    out.set("interp_nodes", format!("{nodes}x{nodes}"));
    out.set("strategies", "direct vcp-nn:pretrain f/2 vcp-obj:surrogate");

    let target = SampledField::from_fn(grid.clone(), shapes)?;
    let (sur, _) = surrogate_interp(&target, &[nodes, nodes])?;
    let batch = full_batch_or(512, grid.len());
    let setup = StrategySetup {
        grid: grid.clone(),
        arch,
        stage1: TrainConfig::adam(lr, s1).with_seed(opts.seed).with_batch(batch),
        stage2: TrainConfig::adam(lr, s2).with_seed(opts.seed).with_batch(batch),
        ivc_spec,
        seed: opts.seed,
    };
    let list = [
        Strategy::direct("direct"),
        Strategy::pretrain("vcp-nn", |x: &[f64]| 0.5 * shapes(x)),
        Strategy::offset("vcp-obj", sur.clone(), 1.0),
    ];
    let res = strategy_compare(&list, &shapes, &setup)?;
    for s in &res {
        out.metric(format!("dist_ivc_stage1.{}", s.name), s.dist_ivc_stage1);
        out.metric(format!("final_test_mse.{}", s.name), s.final_test_mse);
    }
    for i in [1, 2] {
        out.check(
            &format!("{}_below_direct", res[i].name),
            res[i].final_test_mse < res[0].final_test_mse,
            format!(
                "final test MSE {} vs {}",
                fmt_f64(res[i].final_test_mse),
                fmt_f64(res[0].final_test_mse)
            ),
        );
    }
    let obj = &res[2];
    let pred = obj
        .net
        .sample_on(&target)?
        .zip_with(&sur.sample(&grid)?, |a, b| a + b)?;
    out.files.insert("loss_history.csv".into(), strategy_history_csv(&[(opts.seed, res.clone())]));
    finish(&mut out, &target, &pred, &window, image_radius(n))?;
    Ok(out)
}

/// Error against full space-time VC and reduced-order (spatial-only) VC on
/// a synthetic vortex-pair field.
pub fn flow_synthetic(opts: &RunOptions) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new("flow-synthetic", opts);
    let counts = vec![opts.count(48, 3), opts.count(24, 3), opts.count(12, 3)];
    let grid = BoxDomain::new(vec![0.0, -1.0, 0.0], vec![4.0, 1.0, 1.0], counts.clone())?;
    let steps = opts.steps(3000);
    let arch = vec![3, 40, 40, 1];
    let lr = 1e-3;
    let length = 0.35;
    out.set("grid", format!("{}x{}x{}", counts[0], counts[1], counts[2]));
    out.set("domain", "[0,4]x[-1,1]x[0,1] (x,y,t)");
    out.set("steps", steps);
    out.set("architecture", arch_name(&arch));
    out.set("hidden_layers", 2);
    out.set("optimizer", "adam");
    out.set("learning_rate", lr);
    out.set("batch", 512);
    out.set("window_length", length);
    out.set("reduced_window", format!("{length},{length},0"));

    let target = SampledField::from_fn(grid.clone(), vortex_pair)?;
    let data = Dataset::from_field(&target);
    let points = uniform_points(&grid, TEST_POINTS, opts.seed);
    let truth: Vec<f64> = points.chunks_exact(3).map(vortex_pair).collect();
    let cfg = TrainConfig::adam(lr, steps)
        .with_seed(opts.seed)
        .with_batch(full_batch_or(512, data.len()));
    let mut csv = String::from("step,train_loss,test_mse\n");
    let res = train(Mlp::init(&arch, opts.seed)?, &data, &cfg, |p| {
        let pred = p.net.predict(&points);
        let t = pred.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64;
        let _ = writeln!(csv, "{},{},{}", p.step, fmt_f64(p.loss), fmt_f64(t));
        ControlFlow::Continue(())
    })?;
    out.files.insert("loss_history.csv".into(), csv);
    let pred = res.net.sample_on(&target)?;
    let full = finish(&mut out, &target, &pred, &WindowSpec::isotropic(length)?, 10)?;

    let mid = counts[2] / 2;
    let reduced = WindowSpec::anisotropic(vec![length, length, 0.0])?;
    let vc = vc_field(&target, &reduced)?.into_field().slice(2, mid)?;
    let err = pred.zip_with(&target, |p, t| (p - t).abs())?.slice(2, mid)?;
    let profile = SortedErrorProfile::from_values(vc.values(), err.values(), Smoothing::Avg, 5);
    out.files.insert("profile_reduced.csv".into(), profile.to_csv());
    out.metric("reduced.spearman", profile.spearman);
    out.set("reduced_slice_index", mid);
    out.check(
        "vc_tendency_3d",
        full.spearman > 0.0,
        format!("spearman {}", fmt_f64(full.spearman)),
    );
    out.check(
        "vc_tendency_reduced",
        profile.spearman > 0.0,
        format!("spearman {}", fmt_f64(profile.spearman)),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn options_scale_steps_and_counts() {
        let o = RunOptions::new(0, 0.1).unwrap();
        assert_eq!(o.steps(3000), 300);
        assert_eq!(o.steps(1), 1);
        assert_eq!(o.count(64, 2), 20);
        assert_eq!(o.count(11, 3), 5);
        assert!(RunOptions::new(0, 0.0).is_err());
        assert!(RunOptions::new(0, f64::NAN).is_err());
    }

    #[test]
    fn unknown_experiment() {
        assert!(matches!(
            run_experiment("nope", &RunOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn tiny_runs_emit_every_file() {
        let o = RunOptions::new(3, 0.002).unwrap();
        for name in EXPERIMENTS {
            let out = run_experiment(name, &o).unwrap();
            for f in ["loss_history.csv", "profile.csv", "density_final.csv"] {
                assert!(out.files.contains_key(f), "{name} lacks {f}");
            }
            assert!(!out.checks.is_empty(), "{name}");
            assert!(out.report_text().contains("check."));
            assert!(out.config_text().starts_with(&format!("experiment={name}\n")));
        }
    }

    #[test]
    fn output_writes_directory() {
        let dir = tempfile::tempdir().unwrap();
        let o = RunOptions::new(1, 0.002).unwrap();
        let out = piecewise(&o).unwrap();
        let target = dir.path().join("pw");
        out.write_to(&target).unwrap();
        for f in ["config.txt", "report.txt", "loss_history.csv", "profile.csv"] {
            assert!(target.join(f).exists(), "{f}");
        }
    }
}
