//! Batch experiment harness: seeded trial sweeps over targets and
//! communication modes, per-trial artifacts, and summary/analysis tables.

use rayon::prelude::*;

use crate::comm::{CommConfig, CommMode};
use crate::config::ExperimentConfig;
use crate::io::{record, render};
use crate::metrics;
use crate::spectral::{transform_density, CoeffVector, DensityMap, SpectralBasis};
use crate::swarm::{run_trial, TrialRecord, TrialSetup};
use crate::targets;
use crate::{Error, Result};
use std::path::{Path, PathBuf};

/// Outcome of a single trial inside a batch.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub objective: String,
    pub condition: CommMode,
    pub seed: u64,
    pub heterogeneity: Option<f64>,
    pub performance: f64,
    pub csv_path: PathBuf,
}

/// One row of the batch summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub condition: String,
    pub objective: String,
    pub median_heterogeneity: f64,
    pub median_performance: f64,
    pub trials: usize,
}

/// Median of a sample (mean of the middle pair for even counts).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Resolves a target spec into its density and coefficients.
pub fn prepare_target(
    config: &ExperimentConfig,
    spec: &str,
    basis: &SpectralBasis,
) -> Result<(DensityMap, CoeffVector)> {
    let density = targets::resolve(
        spec,
        config.target_resolution,
        config.extents,
        config.invert_target,
    )?;
    let coeffs = transform_density(basis, &density)?;
    Ok((density, coeffs))
}

/// Runs one seeded trial from an experiment config against a prepared
/// target, using the configured communication mode.
pub fn run_single(
    config: &ExperimentConfig,
    basis: &SpectralBasis,
    target: &CoeffVector,
    comm: &CommConfig,
    seed: u64,
) -> Result<TrialRecord> {
    let world = config.world_config();
    let control = config.control_config();
    let region = config.safe_region()?;
    let setup = TrialSetup {
        world: &world,
        control: &control,
        comm,
        basis: &basis,
        target,
        region: region.as_ref(),
    };
    run_trial(&setup, seed)
}

/// Runs the full protocol: every target times both communication modes
/// times `trials` seeded trials, in parallel across trials. Writes one CSV
/// and one image set per trial plus `summary.csv`, and returns the
/// summary rows (conditions ordered none, full per objective).
pub fn run_batch(config: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let basis = SpectralBasis::new(config.extents, config.modes_per_axis)?;
    let mut summary = Vec::new();
    for spec in &config.targets {
        let objective = targets::label(spec);
        let (density, target) = prepare_target(config, spec, &basis)?;
        for mode in [CommMode::None, CommMode::Full] {
            let comm = CommConfig {
                mode,
                exchange_period_steps: config.exchange_period_steps,
            };
            let outcomes: Vec<TrialOutcome> = (0..config.trials)
                .into_par_iter()
                .map(|i| {
                    let seed = config.seed + i as u64;
                    run_batch_trial(config, &basis, &density, &target, &comm, &objective, seed)
                        .map_err(|e| Error::BatchTrial {
                            seed,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            let het: Vec<f64> = outcomes.iter().filter_map(|o| o.heterogeneity).collect();
            let perf: Vec<f64> = outcomes.iter().map(|o| o.performance).collect();
            summary.push(SummaryRow {
                condition: mode.to_string(),
                objective: objective.clone(),
                median_heterogeneity: if het.is_empty() { f64::NAN } else { median(&het) },
                median_performance: median(&perf),
                trials: outcomes.len(),
            });
        }
    }
    write_summary_csv(&summary, config.out_dir.join("summary.csv"))?;
    Ok(summary)
}

fn run_batch_trial(
    config: &ExperimentConfig,
    basis: &SpectralBasis,
    density: &DensityMap,
    target: &CoeffVector,
    comm: &CommConfig,
    objective: &str,
    seed: u64,
) -> Result<TrialOutcome> {
    let trial = run_single(config, basis, target, comm, seed)?;
    let stem = format!("trial_{}_{}_{:04}", objective, comm.mode, seed);
    let csv_path = config.out_dir.join(format!("{stem}.csv"));
    record::write_trial_csv(&trial, &csv_path)?;
    render::render_trial(&trial, density, config.render_size, &config.out_dir, &stem)?;
    let heterogeneity = trial.final_heterogeneity();
    let performance = metrics::trial_performance(&trial, target, basis)?;
    Ok(TrialOutcome {
        objective: objective.to_string(),
        condition: comm.mode,
        seed,
        heterogeneity,
        performance,
        csv_path,
    })
}

pub fn write_summary_csv(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "condition",
        "objective",
        "median_heterogeneity",
        "median_performance",
        "trials",
    ])?;
    for row in rows {
        w.write_record([
            row.condition.clone(),
            row.objective.clone(),
            row.median_heterogeneity.to_string(),
            row.median_performance.to_string(),
            row.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Recomputed metrics for one stored record.
#[derive(Debug, Clone)]
pub struct AnalysisRow {
    pub path: String,
    pub agents: usize,
    pub heterogeneity: Option<f64>,
    pub performance: f64,
}

/// Recomputes team heterogeneity and trial performance from the logged
/// trajectories and dimples (not from the logged metric columns).
pub fn analyze(
    paths: &[PathBuf],
    basis: &SpectralBasis,
    target: &CoeffVector,
) -> Result<Vec<AnalysisRow>> {
    let mut rows = Vec::with_capacity(paths.len());
    for path in paths {
        let parsed = record::read_trial_csv(path)?;
        let stats = record::replay_stats(&parsed, basis)?;
        let coeffs: Vec<CoeffVector> = stats.iter().map(|s| s.coeffs()).collect();
        let heterogeneity = if parsed.agents >= 2 {
            Some(metrics::team_heterogeneity(&coeffs, basis)?)
        } else {
            None
        };
        let performance = metrics::trial_performance(&parsed, target, basis)?;
        rows.push(AnalysisRow {
            path: path.display().to_string(),
            agents: parsed.agents,
            heterogeneity,
            performance,
        });
    }
    Ok(rows)
}

pub fn write_analysis_csv(rows: &[AnalysisRow], mut out: impl std::io::Write) -> Result<()> {
    writeln!(out, "file,agents,heterogeneity,performance")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.path,
            row.agents,
            row.heterogeneity.map(|h| h.to_string()).unwrap_or_default(),
            row.performance
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Strategy;

    fn tmp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("patterning-batch-tests").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn small_config(out: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.targets = vec!["uniform".into()];
        cfg.trials = 1;
        cfg.duration = 10.0;
        cfg.agents = 2;
        cfg.modes_per_axis = 4;
        cfg.strategy = Strategy::SpectralFeedback;
        cfg.dimple_period = 0.3;
        cfg.target_resolution = 32;
        cfg.render_size = 32;
        cfg.out_dir = out.to_path_buf();
        cfg
    }

    #[test]
    fn median_of_odd_and_even_samples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
    }

    #[test]
    fn single_trial_batch_produces_artifacts_and_summary() {
        let out = tmp_dir("single");
        let cfg = small_config(&out);
        let summary = run_batch(&cfg).unwrap();
        // one objective x two conditions
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].condition, "none");
        assert_eq!(summary[1].condition, "full");
        assert_eq!(summary[0].trials, 1);
        assert!(out.join("summary.csv").exists());
        assert!(out.join("trial_uniform_none_0000.csv").exists());
        assert!(out.join("trial_uniform_full_0000_dimples.pgm").exists());
        assert!(out.join("trial_uniform_full_0000_trajectories.ppm").exists());
        assert!(out.join("trial_uniform_full_0000_target.pgm").exists());
    }

    #[test]
    fn repeated_batches_are_byte_identical() {
        let out_a = tmp_dir("repeat-a");
        let out_b = tmp_dir("repeat-b");
        let mut cfg_a = small_config(&out_a);
        let mut cfg_b = small_config(&out_b);
        cfg_a.trials = 2;
        cfg_b.trials = 2;
        run_batch(&cfg_a).unwrap();
        run_batch(&cfg_b).unwrap();
        for name in [
            "trial_uniform_none_0000.csv",
            "trial_uniform_full_0001.csv",
            "summary.csv",
        ] {
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between runs");
        }
    }

    #[test]
    fn analyze_reproduces_batch_metrics() {
        let out = tmp_dir("analyze");
        let cfg = small_config(&out);
        run_batch(&cfg).unwrap();
        let basis = SpectralBasis::new(cfg.extents, cfg.modes_per_axis).unwrap();
        let (_, target) = prepare_target(&cfg, "uniform", &basis).unwrap();
        let path = out.join("trial_uniform_full_0000.csv");
        let rows = analyze(&[path.clone(), path.clone()], &basis, &target).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].agents, 2);
        // duplicate inputs give identical rows
        assert_eq!(rows[0].heterogeneity, rows[1].heterogeneity);
        assert_eq!(rows[0].performance, rows[1].performance);
    }

    #[test]
    fn analysis_of_single_agent_record_leaves_heterogeneity_empty() {
        let out = tmp_dir("single-agent");
        let mut cfg = small_config(&out);
        cfg.agents = 1;
        run_batch(&cfg).unwrap();
        let basis = SpectralBasis::new(cfg.extents, cfg.modes_per_axis).unwrap();
        let (_, target) = prepare_target(&cfg, "uniform", &basis).unwrap();
        let rows = analyze(
            &[out.join("trial_uniform_none_0000.csv")],
            &basis,
            &target,
        )
        .unwrap();
        assert_eq!(rows[0].agents, 1);
        assert!(rows[0].heterogeneity.is_none());
        assert!(rows[0].performance.is_finite());
        let mut buf = Vec::new();
        write_analysis_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data_line = text.lines().nth(1).unwrap();
        // empty heterogeneity column between the two commas
        assert!(data_line.contains(",,"), "line: {data_line}");
    }

    #[test]
    fn summary_medians_are_trial_order_invariant() {
        let values = vec![0.4, 0.1, 0.9, 0.2, 0.5];
        let mut reversed = values.clone();
        reversed.reverse();
        assert_eq!(median(&values), median(&reversed));
    }
}
