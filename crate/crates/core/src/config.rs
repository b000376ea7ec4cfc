//! Plain-text configuration parsing (TOML).
//!
//! Scenario files describe one instance:
//!
//! ```toml
//! T = 2
//! L = 1
//! requirement = [[1], [1]]      # row-major T x L matrix ...
//!
//! [[curves]]                    # one table per location
//! scale = 1.0
//! exponent = 3.0
//!
//! [spec]
//! kind = "hard"
//! epsilon = 0.1
//! ```
//!
//! `requirement` may instead be a generator table `{ low = 1, high = 9 }`
//! (scalar or per-location arrays; omitting it entirely draws from the
//! default rule `[1, l^2]`), resolved with the seed passed by the caller.
//! Curves accept per-time overrides; the soft spec takes `alpha` (scalar or
//! per-location) and `beta`.
//!
//! Experiment files describe a sweep; every field has a default matching
//! the standard week-long setup, so `mode = "soft"` alone is a valid file.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{BiddingCurve, RobustnessSpec, Scenario};
use crate::rng::{self, tag};
use crate::sim::{ExperimentConfig, SETTING1_ALPHA, SETTING2_ALPHA};
use crate::soft::SoftSearchParams;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScalarOrPerLocation<T> {
    Scalar(T),
    PerLocation(Vec<T>),
}

impl<T: Copy> ScalarOrPerLocation<T> {
    fn resolve(&self, l: usize, field: &str) -> Result<Vec<T>> {
        match self {
            ScalarOrPerLocation::Scalar(v) => Ok(vec![*v; l]),
            ScalarOrPerLocation::PerLocation(vs) => {
                if vs.len() != l {
                    return Err(Error::Config(format!(
                        "{field} has {} entries, expected one per location ({l})",
                        vs.len()
                    )));
                }
                Ok(vs.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RequirementField {
    Matrix(Vec<Vec<u32>>),
    Generator {
        low: Option<ScalarOrPerLocation<u32>>,
        high: Option<ScalarOrPerLocation<u32>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveOverride {
    t: usize,
    scale: Option<f64>,
    exponent: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveEntry {
    scale: f64,
    exponent: f64,
    b_max: Option<f64>,
    #[serde(default)]
    overrides: Vec<CurveOverride>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecEntry {
    kind: String,
    epsilon: Option<f64>,
    alpha: Option<ScalarOrPerLocation<f64>>,
    beta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "L")]
    l: usize,
    requirement: Option<RequirementField>,
    curves: Vec<CurveEntry>,
    spec: SpecEntry,
    search: Option<SearchEntry>,
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

fn build_spec(entry: &SpecEntry, l: usize) -> Result<RobustnessSpec> {
    match entry.kind.as_str() {
        "hard" => {
            let epsilon = entry
                .epsilon
                .ok_or_else(|| Error::Config("spec.epsilon is required for kind = \"hard\"".into()))?;
            if entry.alpha.is_some() || entry.beta.is_some() {
                return Err(Error::Config(
                    "spec.alpha / spec.beta do not apply to kind = \"hard\"".into(),
                ));
            }
            Ok(RobustnessSpec::Hard { epsilon })
        }
        "soft" => {
            let alpha = entry
                .alpha
                .as_ref()
                .ok_or_else(|| Error::Config("spec.alpha is required for kind = \"soft\"".into()))?
                .resolve(l, "spec.alpha")?;
            let beta = entry
                .beta
                .ok_or_else(|| Error::Config("spec.beta is required for kind = \"soft\"".into()))?;
            if entry.epsilon.is_some() {
                return Err(Error::Config(
                    "spec.epsilon does not apply to kind = \"soft\"".into(),
                ));
            }
            Ok(RobustnessSpec::Soft { alpha, beta })
        }
        other => Err(Error::Config(format!(
            "spec.kind must be \"hard\" or \"soft\", got {other:?}"
        ))),
    }
}

fn build_curves(entries: &[CurveEntry], t: usize, l: usize) -> Result<Vec<BiddingCurve>> {
    if entries.len() != l {
        return Err(Error::Config(format!(
            "curves has {} entries, expected one per location ({l})",
            entries.len()
        )));
    }
    // start from the per-location base, then apply per-time overrides
    let mut grid = Vec::with_capacity(t * l);
    for _ in 0..t {
        for entry in entries {
            let curve = match entry.b_max {
                Some(cap) => BiddingCurve::with_cap(entry.scale, entry.exponent, cap),
                None => BiddingCurve::new(entry.scale, entry.exponent),
            }
            .map_err(|e| Error::Config(format!("curves: {e}")))?;
            grid.push(curve);
        }
    }
    for (li, entry) in entries.iter().enumerate() {
        for ov in &entry.overrides {
            if ov.t < 1 || ov.t > t {
                return Err(Error::Config(format!(
                    "curves[{li}].overrides: t = {} is outside 1..={t}",
                    ov.t
                )));
            }
            let base = &grid[(ov.t - 1) * l + li];
            let scale = ov.scale.unwrap_or(base.scale());
            let exponent = ov.exponent.unwrap_or(base.exponent());
            grid[(ov.t - 1) * l + li] = BiddingCurve::new(scale, exponent)
                .map_err(|e| Error::Config(format!("curves[{li}].overrides: {e}")))?;
        }
    }
    Ok(grid)
}

fn build_requirement(
    field: &Option<RequirementField>,
    t: usize,
    l: usize,
    seed: u64,
) -> Result<Vec<u32>> {
    let draw = |low: Vec<u32>, high: Vec<u32>| -> Result<Vec<u32>> {
        for li in 0..l {
            if low[li] < 1 || low[li] > high[li] {
                return Err(Error::Config(format!(
                    "requirement interval [{}, {}] at location {} is empty or below 1",
                    low[li],
                    high[li],
                    li + 1
                )));
            }
        }
        let mut rng = rng::substream(seed, &[tag::SCENARIO_REQ, 0]);
        let mut r = Vec::with_capacity(t * l);
        for _ in 0..t {
            for li in 0..l {
                r.push(rng::uniform_u32(&mut rng, low[li], high[li]));
            }
        }
        Ok(r)
    };
    match field {
        None => {
            // default rule: r ~ U[1, l^2] per location
            let low = vec![1; l];
            let high: Vec<u32> = (1..=l as u32).map(|i| i * i).collect();
            draw(low, high)
        }
        Some(RequirementField::Generator { low, high }) => {
            let low = match low {
                Some(v) => v.resolve(l, "requirement.low")?,
                None => vec![1; l],
            };
            let high = match high {
                Some(v) => v.resolve(l, "requirement.high")?,
                None => (1..=l as u32).map(|i| i * i).collect(),
            };
            draw(low, high)
        }
        Some(RequirementField::Matrix(rows)) => {
            if rows.len() != t {
                return Err(Error::Config(format!(
                    "requirement has {} rows, expected T = {t}",
                    rows.len()
                )));
            }
            let mut r = Vec::with_capacity(t * l);
            for (ti, row) in rows.iter().enumerate() {
                if row.len() != l {
                    return Err(Error::Config(format!(
                        "requirement row {} has {} entries, expected L = {l}",
                        ti + 1,
                        row.len()
                    )));
                }
                r.extend_from_slice(row);
            }
            Ok(r)
        }
    }
}

/// Parse a scenario file. `seed` resolves generator-style requirements and
/// becomes the master seed of the returned search parameters.
pub fn parse_scenario(text: &str, seed: u64) -> Result<(Scenario, SoftSearchParams)> {
    let file: ScenarioFile = parse_toml(text)?;
    let spec = build_spec(&file.spec, file.l)?;
    let curves = build_curves(&file.curves, file.t, file.l)?;
    let requirement = build_requirement(&file.requirement, file.t, file.l, seed)?;
    let scenario = Scenario::new(file.t, file.l, requirement, curves, spec)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut search = SoftSearchParams {
        master_seed: seed,
        ..Default::default()
    };
    if let Some(entry) = &file.search {
        apply_search_entry(entry, &mut search);
    }
    Ok((scenario, search))
}

fn apply_search_entry(s: &SearchEntry, search: &mut SoftSearchParams) {
    if let Some(v) = s.sigma_hi {
        search.sigma_hi = v;
    }
    if let Some(v) = s.sigma_lo {
        search.sigma_lo = v;
    }
    if let Some(v) = s.mc_samples {
        search.mc_samples = v;
    }
    if let Some(v) = s.max_bisect {
        search.max_bisect = v;
    }
    if let Some(v) = s.escalation_factor {
        search.escalation_factor = v;
    }
    if let Some(v) = s.max_escalations {
        search.max_escalations = v;
    }
    if let Some(v) = s.fresh_draws {
        search.fresh_draws = v;
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchEntry {
    sigma_hi: Option<f64>,
    sigma_lo: Option<f64>,
    mc_samples: Option<u64>,
    max_bisect: Option<u32>,
    escalation_factor: Option<u64>,
    max_escalations: Option<u32>,
    fresh_draws: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    mode: String,
    #[serde(rename = "T")]
    t: Option<usize>,
    #[serde(rename = "L")]
    l: Option<usize>,
    replications: Option<usize>,
    master_seed: Option<u64>,
    requirement: Option<RequirementField>,
    curves: Option<Vec<CurveEntry>>,
    epsilons: Option<Vec<f64>>,
    betas: Option<Vec<f64>>,
    alpha: Option<AlphaInterval>,
    label: Option<String>,
    search: Option<SearchEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphaInterval {
    low: f64,
    high: f64,
}

/// Which constraint family an experiment sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    Hard,
    Soft,
}

/// A parsed experiment: the instance configuration plus the sweep grids.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub mode: ExperimentMode,
    pub config: ExperimentConfig,
    pub alpha_interval: (f64, f64),
    /// Output-file label for soft sweeps ("setting1", "setting2", or custom).
    pub label: String,
}

/// Parse an experiment file.
pub fn parse_experiment(text: &str) -> Result<ExperimentSetup> {
    let file: ExperimentFile = parse_toml(text)?;
    let mode = match file.mode.as_str() {
        "hard" => ExperimentMode::Hard,
        "soft" => ExperimentMode::Soft,
        other => {
            return Err(Error::Config(format!(
                "mode must be \"hard\" or \"soft\", got {other:?}"
            )))
        }
    };
    let mut config = ExperimentConfig::paper_defaults();
    if let Some(t) = file.t {
        config.t = t;
    }
    if let Some(l) = file.l {
        config.l = l;
        config.r_low = vec![1; l];
        config.r_high = (1..=l as u32).map(|i| i * i).collect();
        config.curves = (1..=l)
            .map(|i| BiddingCurve::new(i as f64, 3.0).expect("valid curve"))
            .collect();
    }
    if let Some(reps) = file.replications {
        config.replications = reps;
    }
    if let Some(seed) = file.master_seed {
        config.master_seed = seed;
    }
    if let Some(eps) = &file.epsilons {
        config.epsilons = eps.clone();
    }
    if let Some(betas) = &file.betas {
        config.betas = betas.clone();
    }
    if let Some(req) = &file.requirement {
        match req {
            RequirementField::Matrix(_) => {
                return Err(Error::Config(
                    "experiments draw requirements per replication; use { low, high } intervals"
                        .into(),
                ))
            }
            RequirementField::Generator { low, high } => {
                if let Some(low) = low {
                    config.r_low = low.resolve(config.l, "requirement.low")?;
                }
                if let Some(high) = high {
                    config.r_high = high.resolve(config.l, "requirement.high")?;
                }
            }
        }
    }
    if let Some(entries) = &file.curves {
        if entries.iter().any(|e| !e.overrides.is_empty()) {
            return Err(Error::Config(
                "per-time curve overrides do not apply to experiment sweeps".into(),
            ));
        }
        let grid = build_curves(entries, 1, config.l)?;
        config.curves = grid;
    }
    if let Some(s) = &file.search {
        let mut search = SoftSearchParams::default();
        apply_search_entry(s, &mut search);
        config.search = search;
    }

    let alpha_interval = match &file.alpha {
        Some(iv) => (iv.low, iv.high),
        None => SETTING1_ALPHA,
    };
    let label = match &file.label {
        Some(l) => l.clone(),
        None if alpha_interval == SETTING1_ALPHA => "setting1".into(),
        None if alpha_interval == SETTING2_ALPHA => "setting2".into(),
        None => "custom".into(),
    };
    if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(Error::Config(format!(
            "label {label:?} must be nonempty and use only [A-Za-z0-9_-]"
        )));
    }

    config.validate()?;
    Ok(ExperimentSetup {
        mode,
        config,
        alpha_interval,
        label,
    })
}
