//! Reference scenario and Monte-Carlo studies of estimator accuracy.
//!
//! A trial draws `T` noise-free load conditions from the true (possibly
//! supply/return asymmetric) resistances, corrupts every measurement with
//! multiplicative uniform noise, and estimates the symmetric model. A study
//! repeats trials over several `T` and summarizes the empirical spread per
//! parameter.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    build_system_with_model, estimate, ColumnLabel, EstimationReport, EstimationResult, DEFAULT_RANK_TOL,
};
use crate::hydraulics::{dim, NetworkModel, ResistanceFile, ResistanceVector};
use crate::scalar::{to_f64, tolerance, Real};
use crate::scenario::{
    apply_noise, derive_seed, generate_with_model, LoadCondition, NoiseModel, ScenarioConfig, REFERENCE_P_ALPHA,
};
use crate::stats::{quantiles, Boxplot};
use crate::topology::{validate_topology, NetworkFile, NetworkTopology};

pub const REFERENCE_NETWORK_JSON: &str = include_str!("../data/fig2_network.json");
pub const REFERENCE_RESISTANCES_JSON: &str = include_str!("../data/fig2_resistances.json");

/// A network with known true resistances.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceScenario<T: Real> {
    pub network: NetworkTopology,
    pub s_true_supply: DVector<T>,
    pub s_true_return: DVector<T>,
    pub s_true_valves: DVector<T>,
}

impl<T: Real> ReferenceScenario<T> {
    pub fn new(network: NetworkTopology, s: &ResistanceVector<T>) -> Result<Self> {
        let report = validate_topology(&network);
        if !report.is_valid() {
            return Err(Error::InvalidTopology(report));
        }
        dim("supply resistances", network.n_pipes(), s.supply.len())?;
        dim("valve resistances", network.n_valves(), s.valves.len())?;
        Ok(Self {
            s_true_return: DVector::from_fn(network.n_pipes(), |i, _| s.return_pipe(i)),
            s_true_supply: s.supply.clone(),
            s_true_valves: s.valves.clone(),
            network,
        })
    }

    pub fn resistances(&self) -> ResistanceVector<T> {
        ResistanceVector {
            supply: self.s_true_supply.clone(),
            valves: self.s_true_valves.clone(),
            return_pipes: Some(self.s_true_return.clone()),
        }
    }

    /// Truth in regression column order, using the supply value for pipes.
    pub fn truth(&self) -> DVector<T> {
        self.resistances().parameter_vector()
    }

    /// What a perfect estimator of the symmetric model converges to: the
    /// supply/return average per pipe.
    pub fn identifiable_truth(&self) -> DVector<T> {
        self.resistances().symmetric_equivalent().parameter_vector()
    }

    /// Columns whose supply and return resistances differ.
    pub fn mismatched_columns(&self) -> Vec<usize> {
        (0..self.network.n_pipes())
            .filter(|&i| self.s_true_supply[i] != self.s_true_return[i])
            .collect()
    }
}

/// The six-valve, eleven-pipe reference network with its tabulated
/// resistances (two pipe pairs deliberately asymmetric).
pub fn reference_scenario<T: Real>() -> ReferenceScenario<T> {
    let file: NetworkFile =
        serde_json::from_str(REFERENCE_NETWORK_JSON).expect("bundled reference network parses");
    let network = crate::topology::mirror_return(&NetworkTopology::from(&file));
    let s: ResistanceFile =
        serde_json::from_str(REFERENCE_RESISTANCES_JSON).expect("bundled reference resistances parse");
    let s = s.to_resistances::<T>().expect("bundled resistances are positive");
    ReferenceScenario::new(network, &s).expect("bundled reference scenario is valid")
}

/// Settings shared by every trial of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialSettings {
    pub flow_range: (f64, f64),
    pub dp_headroom: (f64, f64),
    pub p_alpha: f64,
    pub rank_tol: f64,
}

impl Default for TrialSettings {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            flow_range: s.flow_range,
            dp_headroom: s.dp_headroom,
            p_alpha: REFERENCE_P_ALPHA,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

fn conditions_with_model<T: Real>(
    model: &NetworkModel<T>,
    truth: &ResistanceVector<T>,
    settings: &TrialSettings,
    conditions: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<LoadCondition<T>>> {
    let cfg = ScenarioConfig {
        flow_range: settings.flow_range,
        dp_headroom: settings.dp_headroom,
        count: conditions,
        seed: derive_seed(seed, 0),
        p_alpha: settings.p_alpha,
    };
    let clean = generate_with_model(model, truth, &cfg)?;
    let noise = NoiseModel::new(epsilon, derive_seed(seed, 1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    Ok(clean.iter().map(|lc| apply_noise(lc, &noise, &mut rng)).collect())
}

/// The measured load conditions of one trial: `conditions` snapshots
/// simulated from `truth`, then corrupted with noise level `epsilon`. Both
/// stages draw from sub-seeds of `seed`.
pub fn noisy_conditions<T: Real>(
    network: &NetworkTopology,
    truth: &ResistanceVector<T>,
    settings: &TrialSettings,
    conditions: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<LoadCondition<T>>> {
    let model = NetworkModel::new(network)?;
    conditions_with_model(&model, truth, settings, conditions, epsilon, seed)
}

fn trial_with_model<T: Real>(
    model: &NetworkModel<T>,
    truth: &ResistanceVector<T>,
    settings: &TrialSettings,
    conditions: usize,
    epsilon: f64,
    seed: u64,
) -> Result<EstimationResult<T>> {
    let noisy = conditions_with_model(model, truth, settings, conditions, epsilon, seed)?;
    let sys = build_system_with_model(model, &noisy)?;
    estimate(&sys, tolerance::<T>(settings.rank_tol))
}

/// One simulate-noise-estimate cycle with default settings.
pub fn run_trial<T: Real>(
    scenario: &ReferenceScenario<T>,
    conditions: usize,
    epsilon: f64,
    seed: u64,
) -> Result<EstimationResult<T>> {
    run_trial_with(scenario, &TrialSettings::default(), conditions, epsilon, seed)
}

pub fn run_trial_with<T: Real>(
    scenario: &ReferenceScenario<T>,
    settings: &TrialSettings,
    conditions: usize,
    epsilon: f64,
    seed: u64,
) -> Result<EstimationResult<T>> {
    if conditions == 0 {
        return Err(Error::Config("a trial needs at least one load condition".into()));
    }
    let model = NetworkModel::new(&scenario.network)?;
    trial_with_model(&model, &scenario.resistances(), settings, conditions, epsilon, seed)
}

fn default_quantiles() -> Vec<f64> {
    vec![0.025, 0.25, 0.5, 0.75, 0.975]
}

fn default_plot_edges() -> Vec<usize> {
    vec![5, 11]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub condition_counts: Vec<usize>,
    pub trials: usize,
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    /// Load-condition count of the boxplot study; defaults to the largest of
    /// `condition_counts`.
    #[serde(default)]
    pub boxplot_conditions: Option<usize>,
    /// Edge numbers whose interval progression is plotted.
    #[serde(default = "default_plot_edges")]
    pub plot_edges: Vec<usize>,
    #[serde(default)]
    pub settings: TrialSettings,
}

impl ExperimentConfig {
    pub fn new(condition_counts: Vec<usize>, trials: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            condition_counts,
            trials,
            epsilon,
            seed,
            quantiles: default_quantiles(),
            boxplot_conditions: None,
            plot_edges: default_plot_edges(),
            settings: TrialSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.condition_counts.is_empty() || self.condition_counts.contains(&0) {
            return Err(Error::Config("condition counts must be non-empty and positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.quantiles.is_empty() || self.quantiles.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Config("quantile levels must lie in (0, 1)".into()));
        }
        if self.quantiles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("quantile levels must be strictly increasing".into()));
        }
        if self.boxplot_conditions == Some(0) {
            return Err(Error::Config("boxplot condition count must be positive".into()));
        }
        NoiseModel::new(self.epsilon, 0)?;
        Ok(())
    }

    pub fn boxplot_count(&self) -> usize {
        self.boxplot_conditions
            .unwrap_or_else(|| self.condition_counts.iter().copied().max().unwrap_or(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow {
    pub label: ColumnLabel,
    pub column: usize,
    pub conditions: usize,
    /// One value per configured quantile level.
    pub quantiles: Vec<f64>,
}

impl IntervalRow {
    /// Distance between the outermost quantiles.
    pub fn width(&self) -> f64 {
        self.quantiles[self.quantiles.len() - 1] - self.quantiles[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotRow {
    pub label: ColumnLabel,
    pub column: usize,
    /// Statistics of `s_hat - truth`, truth being the supply-side value.
    pub stats: Boxplot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub column_map: Vec<ColumnLabel>,
    pub truth: Vec<f64>,
    pub identifiable_truth: Vec<f64>,
    pub quantile_levels: Vec<f64>,
    pub intervals: Vec<IntervalRow>,
    pub boxplot_conditions: usize,
    pub boxplots: Vec<BoxplotRow>,
    /// Raw estimates per condition count: `(T, trials x columns)`.
    pub samples: Vec<(usize, Vec<Vec<f64>>)>,
}

impl ExperimentSummary {
    pub fn column_of_edge(&self, edge: usize) -> Option<usize> {
        self.column_map.iter().position(|l| l.edge == edge)
    }

    pub fn interval(&self, column: usize, conditions: usize) -> Option<&IntervalRow> {
        self.intervals
            .iter()
            .find(|r| r.column == column && r.conditions == conditions)
    }

    pub fn samples_for(&self, conditions: usize) -> Option<&[Vec<f64>]> {
        self.samples
            .iter()
            .find(|(t, _)| *t == conditions)
            .map(|(_, s)| s.as_slice())
    }

    pub fn condition_counts(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.intervals.iter().map(|r| r.conditions).collect();
        t.dedup();
        t
    }

    /// `edge,T,q025,...` with one column per quantile level.
    pub fn interval_csv(&self) -> String {
        let mut out = String::from("edge,T");
        for p in &self.quantile_levels {
            write!(out, ",q{:03}", (p * 1000.0).round() as u32).unwrap();
        }
        out.push('\n');
        for r in &self.intervals {
            write!(out, "{},{}", r.label.edge, r.conditions).unwrap();
            for q in &r.quantiles {
                write!(out, ",{q:.12e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn boxplot_csv(&self) -> String {
        let mut out = String::from("edge,median,q1,q3,lo_whisker,hi_whisker,n_outliers\n");
        for b in &self.boxplots {
            let s = &b.stats;
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
                b.label.edge,
                s.median,
                s.q1,
                s.q3,
                s.lo_whisker,
                s.hi_whisker,
                s.outliers.len()
            )
            .unwrap();
        }
        out
    }
}

fn run_batch<T: Real>(
    model: &NetworkModel<T>,
    truth: &ResistanceVector<T>,
    cfg: &ExperimentConfig,
    conditions: usize,
) -> Result<Vec<Vec<f64>>> {
    let base = derive_seed(cfg.seed, conditions as u64);
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let res = trial_with_model(
                model,
                truth,
                &cfg.settings,
                conditions,
                cfg.epsilon,
                derive_seed(base, i as u64),
            )?;
            Ok(res.s_hat.iter().map(|&x| to_f64(x)).collect())
        })
        .collect()
}

/// Repeats independent trials for each configured condition count. Trial
/// `i` at count `T` is seeded from `(seed, T, i)` alone, so results do not
/// depend on scheduling.
pub fn monte_carlo<T: Real>(
    scenario: &ReferenceScenario<T>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let model = NetworkModel::new(&scenario.network)?;
    let truth_s = scenario.resistances();
    let column_map = crate::estimation::column_map(&scenario.network);
    let n_cols = column_map.len();

    let mut counts = cfg.condition_counts.clone();
    let box_t = cfg.boxplot_count();
    if !counts.contains(&box_t) {
        counts.push(box_t);
    }

    let mut samples = Vec::with_capacity(counts.len());
    for &t in &counts {
        samples.push((t, run_batch(&model, &truth_s, cfg, t)?));
    }

    let mut intervals = Vec::new();
    for &t in &cfg.condition_counts {
        let batch = &samples.iter().find(|(c, _)| *c == t).expect("batch present").1;
        for (col, &label) in column_map.iter().enumerate() {
            let values: Vec<f64> = batch.iter().map(|row| row[col]).collect();
            intervals.push(IntervalRow {
                label,
                column: col,
                conditions: t,
                quantiles: quantiles(&values, &cfg.quantiles),
            });
        }
    }

    let truth: Vec<f64> = scenario.truth().iter().map(|&x| to_f64(x)).collect();
    let box_batch = &samples.iter().find(|(c, _)| *c == box_t).expect("batch present").1;
    let boxplots = (0..n_cols)
        .map(|col| {
            let dev: Vec<f64> = box_batch.iter().map(|row| row[col] - truth[col]).collect();
            BoxplotRow {
                label: column_map[col],
                column: col,
                stats: Boxplot::new(&dev),
            }
        })
        .collect();

    Ok(ExperimentSummary {
        identifiable_truth: scenario.identifiable_truth().iter().map(|&x| to_f64(x)).collect(),
        truth,
        column_map,
        quantile_levels: cfg.quantiles.clone(),
        intervals,
        boxplot_conditions: box_t,
        boxplots,
        samples,
    })
}

/// Human-readable table of an estimate: edge, truth when given (in column
/// order), estimate. Rows are sorted by edge number.
pub fn format_table(report: &EstimationReport, truth: Option<&[f64]>) -> String {
    let mut out = String::new();
    match truth {
        Some(_) => writeln!(out, "{:<14} {:>14} {:>14}", "edge", "s", "s_hat").unwrap(),
        None => writeln!(out, "{:<14} {:>14}", "edge", "s_hat").unwrap(),
    }
    let mut order: Vec<usize> = (0..report.s_hat.len()).collect();
    order.sort_by_key(|&i| report.edges.get(i).copied().unwrap_or(usize::MAX));
    for i in order {
        let name = &report.column_map[i];
        let est = report.s_hat[i];
        match truth.and_then(|t| t.get(i)) {
            Some(t) => writeln!(out, "{name:<14} {t:>14.6} {est:>14.6}").unwrap(),
            None if truth.is_some() => writeln!(out, "{name:<14} {:>14} {est:>14.6}", "-").unwrap(),
            None => writeln!(out, "{name:<14} {est:>14.6}").unwrap(),
        }
    }
    out
}
