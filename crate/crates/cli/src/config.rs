//! The TOML run file: top-level run settings, a `[params]` table for the
//! model, and optional sections for the auxiliary commands.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sabc::models::{
    BetaBinomialParams, BivariateGaussParams, FiniteChainSpec, GaussMeanParams, MODEL_NAMES,
};
use sabc::{ModelSpec, ProposalKind, RunConfig, SummaryMode};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RejectSection {
    pub tolerance: f64,
    pub n_accept: usize,
    pub max_sims: usize,
}

impl Default for RejectSection {
    fn default() -> Self {
        Self {
            tolerance: 0.0,
            n_accept: 1000,
            max_sims: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdealSection {
    pub n_particles: usize,
    pub steps: usize,
}

impl Default for IdealSection {
    fn default() -> Self {
        Self {
            n_particles: 100_000,
            steps: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub u_mean: Vec<f64>,
    pub v: Vec<f64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            u_mean: vec![0.5],
            v: vec![1.0],
        }
    }
}

/// Raw file layout; `P` is the parameter table of the named model.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig<P> {
    #[allow(dead_code)]
    model: String,
    #[serde(default)]
    params: Option<P>,
    n_particles: usize,
    seed: Option<u64>,
    sim_budget: Option<usize>,
    v: Option<f64>,
    beta: Option<f64>,
    s: Option<f64>,
    a: Option<f64>,
    init_oversample: Option<usize>,
    adapt_covariance: Option<bool>,
    recalibration_period: Option<usize>,
    proposal: Option<ProposalKind>,
    alpha: Option<f64>,
    te_floor: Option<f64>,
    n_probe: Option<usize>,
    onsager_period: Option<usize>,
    summaries: Option<SummaryMode>,
    fixed_te: Option<f64>,
    threads: Option<usize>,
    #[serde(default)]
    reject: RejectSection,
    #[serde(default)]
    ideal: IdealSection,
    #[serde(default)]
    schedule: ScheduleSection,
}

/// A fully parsed and validated run file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParsedConfig {
    pub model: ModelSpec,
    pub run: RunConfig,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    pub reject: RejectSection,
    pub ideal: IdealSection,
    pub schedule: ScheduleSection,
}

#[derive(Deserialize)]
struct ModelName {
    model: Option<toml::Value>,
}

fn parse_error(e: toml::de::Error) -> CliError {
    CliError::Config(vec![e.to_string().trim_end().to_string()])
}

/// Parse and validate a run file. `seed_override` (from `SABC_SEED`) replaces
/// the file's seed.
pub fn parse_config(text: &str, seed_override: Option<u64>) -> Result<ParsedConfig, CliError> {
    // first pass: syntax, duplicate keys and the model name
    let head: ModelName = toml::from_str(text).map_err(parse_error)?;
    let name = match head.model {
        Some(toml::Value::String(s)) => s,
        Some(other) => {
            return Err(CliError::Config(vec![format!(
                "`model` must be a string, got {}",
                other.type_str()
            )]))
        }
        None => return Err(CliError::Config(vec!["missing required key `model`".into()])),
    };
    match name.as_str() {
        "gauss_mean" => typed::<GaussMeanParams>(text, seed_override, ModelSpec::GaussMean),
        "beta_binomial" => {
            typed::<BetaBinomialParams>(text, seed_override, ModelSpec::BetaBinomial)
        }
        "bivariate_gauss" => {
            typed::<BivariateGaussParams>(text, seed_override, ModelSpec::BivariateGauss)
        }
        "finite_chain" => typed::<FiniteChainSpec>(text, seed_override, ModelSpec::FiniteChain),
        other => Err(CliError::Config(vec![format!(
            "unknown model `{other}`; expected one of {}",
            MODEL_NAMES.join(", ")
        )])),
    }
}

fn typed<P: DeserializeOwned + Default>(
    text: &str,
    seed_override: Option<u64>,
    wrap: fn(P) -> ModelSpec,
) -> Result<ParsedConfig, CliError> {
    let f: FileConfig<P> = toml::from_str(text).map_err(parse_error)?;
    let seed = match (seed_override, f.seed) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => {
            return Err(CliError::Config(vec![
                "missing `seed` (set it in the file or via SABC_SEED)".into(),
            ]))
        }
    };
    let mut run = RunConfig::new(f.n_particles, seed);
    macro_rules! apply {
        ($($field:ident),*) => { $(if let Some(x) = f.$field { run.$field = x; })* };
    }
    apply!(
        sim_budget,
        v,
        beta,
        s,
        a,
        init_oversample,
        adapt_covariance,
        recalibration_period,
        proposal,
        te_floor,
        onsager_period,
        summaries
    );
    run.alpha = f.alpha;
    run.n_probe = f.n_probe;
    run.fixed_te = f.fixed_te;

    let mut problems = run.violations();
    if f.threads == Some(0) {
        problems.push("threads must be >= 1".into());
    }
    if !(f.reject.tolerance >= 0.0) {
        problems.push(format!("reject.tolerance must be >= 0 (got {})", f.reject.tolerance));
    }
    if f.reject.n_accept == 0 {
        problems.push("reject.n_accept must be >= 1".into());
    }
    if f.ideal.n_particles == 0 {
        problems.push("ideal.n_particles must be >= 1".into());
    }
    if f.schedule.u_mean.is_empty() || f.schedule.v.is_empty() {
        problems.push("schedule.u_mean and schedule.v must be non-empty".into());
    }
    for u in &f.schedule.u_mean {
        if !(*u > 0.0 && u.is_finite()) {
            problems.push(format!("schedule.u_mean entries must be > 0 (got {u})"));
        }
    }
    for v in &f.schedule.v {
        if !(*v > 0.0 && v.is_finite()) {
            problems.push(format!("schedule.v entries must be > 0 (got {v})"));
        }
    }
    let model = wrap(f.params.unwrap_or_default());
    if let Err(e) = model.build() {
        problems.push(e.to_string());
    }
    if !problems.is_empty() {
        return Err(CliError::Config(problems));
    }
    Ok(ParsedConfig {
        model,
        run,
        threads: f.threads,
        reject: f.reject,
        ideal: f.ideal,
        schedule: f.schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("model = \"beta_binomial\"\nn_particles = 1000\nseed = 7\n", None).unwrap();
        assert_eq!((c.run.v, c.run.beta, c.run.s, c.run.a), (0.5, 1.0, 0.01, 1.0));
        assert_eq!(c.run.seed, 7);
        assert_eq!(c.model, ModelSpec::BetaBinomial(Default::default()));
    }

    #[test]
    fn params_table_is_typed_per_model() {
        let text = "model = \"beta_binomial\"\nn_particles = 100\nseed = 1\n[params]\nprior_a = 2.0\nprior_b = 5.0\n";
        let c = parse_config(text, None).unwrap();
        match c.model {
            ModelSpec::BetaBinomial(p) => assert_eq!((p.prior_a, p.prior_b), (2.0, 5.0)),
            other => panic!("wrong model {other:?}"),
        }
    }

    #[test]
    fn env_seed_wins() {
        let c = parse_config("model = \"gauss_mean\"\nn_particles = 10\nseed = 7\n", Some(99)).unwrap();
        assert_eq!(c.run.seed, 99);
    }

    #[test]
    fn zero_particles_names_the_field() {
        let err = parse_config("model = \"gauss_mean\"\nn_particles = 0\nseed = 7\n", None).unwrap_err();
        assert!(err.to_string().contains("n_particles"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "model = \"gauss_mean\"\nn_particles = 0\nseed = 7\nv = -1.0\na = 0.0\n";
        let CliError::Config(list) = parse_config(text, None).unwrap_err() else {
            panic!("expected a config error");
        };
        assert!(list.len() >= 3, "{list:?}");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = parse_config("model = \"gauss_mean\"\nn_particles = 10\nn_particles = 20\nseed = 1\n", None)
            .unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = parse_config("model = \"gauss_mean\"\nn_particles = 10\nseed = 1\nspeed = 3\n", None)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("speed") && msg.contains("line 4"), "{msg}");
        let err = parse_config(
            "model = \"gauss_mean\"\nn_particles = 10\nseed = 1\n[params]\nsigma = 2.0\n",
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
    }

    #[test]
    fn unknown_model_is_a_config_error() {
        let err = parse_config("model = \"nope\"\nn_particles = 10\nseed = 1\n", None).unwrap_err();
        assert!(err.to_string().contains("gauss_mean"));
    }

    #[test]
    fn invalid_model_params_are_reported() {
        let text = "model = \"beta_binomial\"\nn_particles = 10\nseed = 1\n[params]\ny_obs = 50\n";
        assert!(parse_config(text, None).is_err());
    }
}
