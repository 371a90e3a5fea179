use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use serde_json::json;
use tempfile::NamedTempFile;

use sabc::baselines::{ideal_fast_anneal, rejection_abc};
use sabc::flat::{run_flat, solve_schedule_quartic, RunStatus};
use sabc::general::run_general;
use sabc::output::{posterior_csv, trace_csv};
use sabc::RngStream;

use crate::config::ParsedConfig;
use crate::error::{CliError, ErrorRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Anneal the configured model toward its posterior.
    Run,
    /// Plain rejection ABC from the prior.
    Reject,
    /// Mean-energy curve of the idealized fast-mixing limit.
    Ideal,
    /// Print the flat-case temperature schedule on a (U_mean, v) grid.
    Schedule,
}

/// How a successful command finished.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Budget ran out before the stopping rule; partial outputs were written.
    BudgetExhausted,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Complete => 0,
            Outcome::BudgetExhausted => 4,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Outcome::Complete => "complete",
            Outcome::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// Refuse a non-empty `dir` unless `force`; create it if missing.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        let occupied = !dir.is_dir() || fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            return Err(CliError::OutDirExists(dir.display().to_string()));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Write via a sibling temp file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output records serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_error_record(dir: &Path, err: &CliError) -> Result<(), CliError> {
    write_json(&dir.join("error.json"), &ErrorRecord::from(err))
}

pub struct Invocation<'a> {
    pub command: Command,
    pub config: &'a ParsedConfig,
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
}

impl Invocation<'_> {
    pub fn execute(&self) -> Result<Outcome, CliError> {
        match self.command {
            Command::Run => self.anneal(),
            Command::Reject => self.reject(),
            Command::Ideal => self.ideal(),
            Command::Schedule => self.schedule(),
        }
    }

    fn metadata(&self, outcome: Outcome, extra: serde_json::Value) -> serde_json::Value {
        json!({
            "command": self.command,
            "status": outcome.label(),
            "seed": self.config.run.seed,
            "config_path": self.config_path.display().to_string(),
            "config": self.config,
            "versions": {
                "sabc": sabc::VERSION,
                "sabc_cli": env!("CARGO_PKG_VERSION"),
            },
            "threads": rayon::current_num_threads(),
            "result": extra,
        })
    }

    fn anneal(&self) -> Result<Outcome, CliError> {
        let model = self.config.model.build()?;
        let mut rng = RngStream::from_seed(self.config.run.seed);
        let general = model.informative_prior();
        info!(
            "{} annealer on {} with {} particles",
            if general { "general" } else { "flat" },
            model.name(),
            self.config.run.n_particles
        );
        let result = if general {
            run_general(model.as_ref(), &self.config.run, &mut rng)?
        } else {
            run_flat(model.as_ref(), &self.config.run, &mut rng)?
        };
        let outcome = match result.status {
            RunStatus::Converged => Outcome::Complete,
            RunStatus::BudgetExhausted => Outcome::BudgetExhausted,
        };
        let dir = &self.out_dir;
        write_atomic(
            &dir.join("posterior.csv"),
            posterior_csv(model.dim(), result.ensemble.thetas()).as_bytes(),
        )?;
        write_atomic(&dir.join("trace.csv"), trace_csv(&result.trace).as_bytes())?;
        if let Some(map) = &result.summaries {
            write_json(&dir.join("summaries.json"), map)?;
        }
        let last = result.trace.last();
        let extra = json!({
            "annealer": if general { "general" } else { "flat" },
            "sweeps": last.map_or(0, |s| s.sweep),
            "sims_used": last.map_or(0, |s| s.sims_used),
            "final_te": last.map(|s| [s.te1, s.te2]),
            "sigma_cum": last.map(|s| s.sigma_cum),
        });
        write_json(&dir.join("metadata.json"), &self.metadata(outcome, extra))?;
        Ok(outcome)
    }

    fn reject(&self) -> Result<Outcome, CliError> {
        let model = self.config.model.build()?;
        let sec = &self.config.reject;
        let mut rng = RngStream::from_seed(self.config.run.seed);
        let res = rejection_abc(model.as_ref(), sec.tolerance, sec.n_accept, sec.max_sims, &mut rng)?;
        info!(
            "accepted {} of {} draws (rate {:.3e})",
            res.samples.len(),
            res.sims,
            res.acceptance_rate
        );
        let outcome = if res.samples.len() < sec.n_accept {
            Outcome::BudgetExhausted
        } else {
            Outcome::Complete
        };
        write_atomic(
            &self.out_dir.join("posterior.csv"),
            posterior_csv(model.dim(), &res.samples).as_bytes(),
        )?;
        let extra = json!({
            "accepted": res.samples.len(),
            "sims_used": res.sims,
            "acceptance_rate": res.acceptance_rate,
        });
        write_json(&self.out_dir.join("metadata.json"), &self.metadata(outcome, extra))?;
        Ok(outcome)
    }

    fn ideal(&self) -> Result<Outcome, CliError> {
        let sec = &self.config.ideal;
        let mut rng = RngStream::from_seed(self.config.run.seed);
        let means = ideal_fast_anneal(sec.n_particles, sec.steps, &mut rng);
        let mut csv = String::from("step,mean_energy\n");
        for (k, u) in means.iter().enumerate() {
            csv.push_str(&format!("{k},{u}\n"));
        }
        write_atomic(&self.out_dir.join("ideal.csv"), csv.as_bytes())?;
        let extra = json!({ "n_particles": sec.n_particles, "steps": sec.steps });
        write_json(
            &self.out_dir.join("metadata.json"),
            &self.metadata(Outcome::Complete, extra),
        )?;
        Ok(Outcome::Complete)
    }

    fn schedule(&self) -> Result<Outcome, CliError> {
        let sec = &self.config.schedule;
        let mut csv = String::from("u_mean,v,te\n");
        for &u in &sec.u_mean {
            for &v in &sec.v {
                let te = solve_schedule_quartic(u, v)?;
                csv.push_str(&format!("{u},{v},{te}\n"));
            }
        }
        print!("{csv}");
        write_atomic(&self.out_dir.join("schedule.csv"), csv.as_bytes())?;
        write_json(
            &self.out_dir.join("metadata.json"),
            &self.metadata(Outcome::Complete, serde_json::Value::Null),
        )?;
        Ok(Outcome::Complete)
    }
}
