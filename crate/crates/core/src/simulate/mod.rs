//! Replicated Monte Carlo engine, reference laws and verifiers.
//!
//! Trial `t` at sample size `n` always draws from
//! `RngStream::substream(seed, n, t, tag)`, so results do not depend on the
//! execution order or on the size of the rayon pool the caller installs.

pub mod reference;
pub mod stats;
pub mod verify;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::ConditionId;
use crate::error::{Error, Result};
use crate::geometry::{exceedance_count, nn_ball_stats, poissonized_sample, poissonized_stat};
use crate::model::DistributionModel;
use crate::rng::RngStream;

pub use reference::{
    descending_factorial, factorial_moment, gumbel_cdf, mean_bound, single_exceedance_mean,
    stirling2, theorem1_bound, theorem3_bound, PoissonReference, EULER_MASCHERONI,
};
pub use stats::{ks_distance, ks_distance_empirical, tv_distance, EmpiricalDistribution};
pub use verify::{
    verify_factorial_moments, verify_gumbel, verify_mean_bound, verify_pit, verify_poisson_count,
    verify_poissonized_tail, verify_tail_bound,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FixedN,
    Poissonized,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FixedN => "fixed_n",
            Mode::Poissonized => "poissonized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Gumbel,
    PoissonCount,
    TailBound,
    PoissonizedTail,
    MeanBound,
    FactorialMoments,
    Pit,
    Conditions,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Gumbel => "gumbel",
            Experiment::PoissonCount => "poisson_count",
            Experiment::TailBound => "tail_bound",
            Experiment::PoissonizedTail => "poissonized_tail",
            Experiment::MeanBound => "mean_bound",
            Experiment::FactorialMoments => "factorial_moments",
            Experiment::Pit => "pit",
            Experiment::Conditions => "conditions",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let all = [
            Experiment::Gumbel,
            Experiment::PoissonCount,
            Experiment::TailBound,
            Experiment::PoissonizedTail,
            Experiment::MeanBound,
            Experiment::FactorialMoments,
            Experiment::Pit,
            Experiment::Conditions,
        ];
        let norm = s.replace('-', "_");
        all.into_iter().find(|e| e.as_str() == norm)
    }
}

/// Pass thresholds. These are calibration choices; the limit theorems
/// themselves give no rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// KS distance to the Gumbel law at the largest `n`.
    pub ks_final: f64,
    /// TV distance of the exceedance-count law to `Po(e^{−y})`.
    pub tv: f64,
    /// `|P̂(C_n = 0) − G(y)|`.
    pub zero_prob: f64,
    /// Relative tolerance on factorial moments.
    pub moment_rel: f64,
    /// Distance of the mean centered statistic to the Euler–Mascheroni constant.
    pub gumbel_mean: f64,
    /// Significance of the PIT uniformity test.
    pub pit_alpha: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            ks_final: 0.05,
            tv: 0.05,
            zero_prob: 0.02,
            moment_rel: 0.15,
            gumbel_mean: 0.05,
            pit_alpha: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionSettings {
    /// Probability threshold δ below which the conditions are checked.
    pub delta: f64,
    /// Random configurations for the intersection-ratio, doubling and
    /// convexity checks.
    pub trials: usize,
    /// Levels `a` for the cone-covering check.
    pub cone_levels: Vec<f64>,
    /// Monte Carlo draws of `x₂` per tested `x₁` in the cone check.
    pub cone_samples: usize,
    /// Cone covering constant; defaults to 2 (d = 1) or 6 (d = 2).
    pub cone_gamma: Option<f64>,
    /// Checkers to run; all applicable ones when absent.
    pub checks: Option<Vec<ConditionId>>,
}

impl Default for ConditionSettings {
    fn default() -> Self {
        ConditionSettings {
            delta: 0.05,
            trials: 100_000,
            cone_levels: vec![0.01, 0.1],
            cone_samples: 20_000,
            cone_gamma: None,
            checks: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: DistributionModel,
    pub n_values: Vec<u64>,
    pub y_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    pub k_max: usize,
    pub thresholds: Thresholds,
    pub conditions: ConditionSettings,
}

pub const DEFAULT_TRIALS: usize = 2000;
pub const DEFAULT_Y_GRID: [f64; 7] = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0];

impl ExperimentConfig {
    pub fn new(
        experiment: Experiment,
        model: DistributionModel,
        n_values: Vec<u64>,
        seed: u64,
    ) -> Self {
        let mode = if experiment == Experiment::PoissonizedTail {
            Mode::Poissonized
        } else {
            Mode::FixedN
        };
        ExperimentConfig {
            experiment,
            model,
            n_values,
            y_grid: DEFAULT_Y_GRID.to_vec(),
            trials: DEFAULT_TRIALS,
            seed,
            mode,
            k_max: 3,
            thresholds: Thresholds::default(),
            conditions: ConditionSettings::default(),
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_y_grid(mut self, y: Vec<f64>) -> Self {
        self.y_grid = y;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        let uses_n = !matches!(self.experiment, Experiment::Pit | Experiment::Conditions);
        if uses_n && self.n_values.is_empty() {
            return Err(Error::config("n_values", "must not be empty"));
        }
        match self.mode {
            Mode::FixedN => {
                if uses_n && self.n_values.iter().any(|&n| n < 2) {
                    return Err(Error::config("n_values", "n must be ≥ 2"));
                }
            }
            Mode::Poissonized => {
                if self.n_values.contains(&0) {
                    return Err(Error::config("n_values", "intensity must be > 0"));
                }
            }
        }
        if self.y_grid.iter().any(|y| !y.is_finite()) {
            return Err(Error::config("y_grid", "thresholds must be finite"));
        }
        if !(1..=4).contains(&self.k_max) {
            return Err(Error::config("k_max", "must be between 1 and 4"));
        }
        let t = &self.thresholds;
        for (key, v) in [
            ("thresholds.ks_final", t.ks_final),
            ("thresholds.tv", t.tv),
            ("thresholds.zero_prob", t.zero_prob),
            ("thresholds.moment_rel", t.moment_rel),
            ("thresholds.gumbel_mean", t.gumbel_mean),
            ("thresholds.pit_alpha", t.pit_alpha),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be a positive number"));
            }
        }
        let c = &self.conditions;
        if !(c.delta > 0.0 && c.delta < 1.0) {
            return Err(Error::config("conditions.delta", "must lie in (0, 1)"));
        }
        if c.trials == 0 || c.cone_samples == 0 {
            return Err(Error::config("conditions.trials", "must be >= 1"));
        }
        if c.cone_levels.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(Error::config(
                "conditions.cone_levels",
                "levels must lie in (0, 1]",
            ));
        }
        if let Some(g) = c.cone_gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::config("conditions.cone_gamma", "must be positive"));
            }
        }
        Ok(())
    }

    /// Substream tag shared by all trials of this experiment and model.
    pub fn stream_tag(&self) -> String {
        format!(
            "{}/{}/{}",
            self.experiment.as_str(),
            self.mode.as_str(),
            self.model.label()
        )
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// `n·P_n − ln n` (or the Poissonized analogue).
    pub stat: f64,
    /// `C_n(y)` for every `y` in the grid (fixed-n mode only).
    pub counts: Vec<u32>,
    pub sample_size: usize,
    pub coincident: bool,
}

/// All trials at one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBatch {
    pub n: u64,
    /// Statistic per retained trial, in trial order.
    pub stats: Vec<f64>,
    /// `counts[y_index][trial]`.
    pub counts: Vec<Vec<u32>>,
    pub sample_sizes: Vec<usize>,
    /// Trials dropped because two sample points coincided.
    pub skipped: usize,
    pub distribution: EmpiricalDistribution,
}

impl TrialBatch {
    pub fn m(&self) -> usize {
        self.stats.len()
    }
}

pub fn run_trial(config: &ExperimentConfig, n: u64, trial: u64) -> Result<TrialOutcome> {
    let mut rng = RngStream::substream(config.seed, n, trial, &config.stream_tag());
    let model = &config.model;
    match config.mode {
        Mode::FixedN => {
            let sample = model.sample(&mut rng, n as usize);
            let st = nn_ball_stats(model, &sample)?;
            let counts = config
                .y_grid
                .iter()
                .map(|&y| exceedance_count(&st, y).count as u32)
                .collect();
            Ok(TrialOutcome {
                stat: st.centered_stat,
                counts,
                sample_size: n as usize,
                coincident: st.coincident > 0,
            })
        }
        Mode::Poissonized => {
            let intensity = n as f64;
            let sample = poissonized_sample(model, &mut rng, intensity)?;
            let coincident = sample.len() >= 2 && nn_ball_stats(model, &sample)?.coincident > 0;
            Ok(TrialOutcome {
                stat: poissonized_stat(model, &sample, intensity)?,
                counts: Vec::new(),
                sample_size: sample.len(),
                coincident,
            })
        }
    }
}

/// Runs `config.trials` independent trials for each `n`. Parallel over
/// trials in whatever rayon pool is current; the output is identical for
/// any pool size.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialBatch>> {
    config.validate()?;
    config
        .n_values
        .iter()
        .map(|&n| {
            let outcomes: Vec<TrialOutcome> = (0..config.trials as u64)
                .into_par_iter()
                .map(|t| run_trial(config, n, t))
                .collect::<Result<_>>()?;
            let mut stats = Vec::with_capacity(outcomes.len());
            let mut counts = vec![Vec::with_capacity(outcomes.len()); config.y_grid.len()];
            let mut sample_sizes = Vec::with_capacity(outcomes.len());
            let mut skipped = 0;
            for o in outcomes {
                if o.coincident {
                    skipped += 1;
                    continue;
                }
                stats.push(o.stat);
                sample_sizes.push(o.sample_size);
                for (slot, c) in counts.iter_mut().zip(&o.counts) {
                    slot.push(*c);
                }
            }
            if config.mode == Mode::Poissonized {
                counts.iter_mut().for_each(Vec::clear);
            }
            let distribution = EmpiricalDistribution::new(stats.clone())?;
            Ok(TrialBatch {
                n,
                stats,
                counts,
                sample_sizes,
                skipped,
                distribution,
            })
        })
        .collect()
}
