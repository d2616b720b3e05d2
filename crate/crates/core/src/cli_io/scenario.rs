//! Running a configured scenario to files.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use super::config::RunConfig;
use super::output::{summary_text, CsvSink};
use crate::diagnostics::{DiagnosticsReport, Recorder};
use crate::error::{Error, Result};
use crate::fields::DistributionField;
use crate::presets::initial_data;
use crate::solver::{Observer, Solver, SolverState, StepInfo};

/// Files and results of a finished scenario.
#[derive(Debug)]
pub struct ScenarioOutcome {
    pub state: SolverState,
    pub report: DiagnosticsReport,
    pub summary: String,
    pub output_dir: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

struct FileObserver<'a> {
    recorder: Recorder,
    csv: CsvSink<BufWriter<File>>,
    config: &'a RunConfig,
    dir: &'a Path,
    checkpoints: Vec<PathBuf>,
}

impl Observer for FileObserver<'_> {
    fn observe(&mut self, state: &SolverState, info: Option<&StepInfo>) -> Result<()> {
        self.recorder.observe(state, info)?;
        if let Some(r) = self.recorder.report.last() {
            self.csv.push(r)?;
        }
        let every = self.config.checkpoint_every;
        if every > 0 && state.step_index > 0 && state.step_index.is_multiple_of(every) {
            let path = self.dir.join(format!("checkpoint_{:06}.bin", state.step_index));
            let ck = Checkpoint {
                config: self.config.clone(),
                state: state.clone(),
                recorder: self.recorder.state(),
            };
            write_checkpoint(&path, &ck)?;
            self.checkpoints.push(path);
        }
        Ok(())
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn drive(
    config: &RunConfig,
    solver: &Solver,
    state: SolverState,
    recorder: Recorder,
    dir: &Path,
) -> Result<ScenarioOutcome> {
    prepare_dir(dir)?;
    let csv_path = dir.join("diagnostics.csv");
    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let start = state.field.clone();
    let mut obs = FileObserver {
        recorder,
        csv: CsvSink::new(BufWriter::new(file), &config.diagnostics)?,
        config,
        dir,
        checkpoints: Vec::new(),
    };
    let state = solver.run_from(state, &mut obs)?;
    obs.csv.finish()?;
    let report = obs.recorder.into_report();
    let summary = summary_text(
        &report,
        config.params.alpha,
        config.params.conservative_projection,
        stationarity(&start, &state.field, solver),
        &config.to_toml(),
        config.diagnostics.band,
    );
    let summary_path = dir.join("summary.txt");
    fs::write(&summary_path, &summary).map_err(|e| Error::io(&summary_path, e))?;
    Ok(ScenarioOutcome {
        state,
        report,
        summary,
        output_dir: dir.to_path_buf(),
        checkpoints: obs.checkpoints,
    })
}

/// `||f_end - f_start||_1 / ||f_start||_1`.
fn stationarity(start: &DistributionField, end: &DistributionField, solver: &Solver) -> f64 {
    let norm = start.l1_norm(&solver.grid);
    let d = end.l1_distance(start, &solver.grid);
    if norm > 0.0 {
        d / norm
    } else {
        d
    }
}

/// Runs `config` from its preset, writing `diagnostics.csv`, `summary.txt`
/// and any checkpoints to `dir`.
pub fn run_scenario_in(config: &RunConfig, dir: &Path) -> Result<ScenarioOutcome> {
    let solver = Solver::new(&config.params)?;
    let f0 = initial_data(
        &config.preset,
        &config.params,
        &solver.grid,
        config.jitter,
        config.seed,
        config.mollify,
    )?;
    let recorder = Recorder::new(&solver, config.diagnostics.clone());
    drive(config, &solver, SolverState::new(f0), recorder, dir)
}

/// Runs `config` into its configured output directory.
pub fn run_scenario(config: &RunConfig) -> Result<ScenarioOutcome> {
    run_scenario_in(config, &config.output_dir)
}

/// Continues a checkpointed run to `t_end` (the checkpoint's unless given),
/// writing fresh output files to `dir` with rows after the checkpoint step.
pub fn resume_scenario(checkpoint: &Path, t_end: Option<f64>, dir: &Path) -> Result<ScenarioOutcome> {
    let ck = read_checkpoint(checkpoint)?;
    let mut config = ck.config;
    if let Some(t) = t_end {
        config.params.t_end = t;
        config.params.validate()?;
    }
    let solver = Solver::new(&config.params)?;
    let recorder = match ck.recorder {
        Some(r) => Recorder::resume(&solver, config.diagnostics.clone(), r)?,
        None => {
            return Err(Error::Checkpoint(
                "checkpoint carries no recorder state; cannot continue diagnostics".into(),
            ))
        }
    };
    drive(&config, &solver, ck.state, recorder, dir)
}
