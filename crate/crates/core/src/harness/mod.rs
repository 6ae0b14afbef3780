//! Scenario orchestration: predict, evolve, detect and compare, with JSON
//! reports and CSV sidecars.

mod io;
pub mod verify;

pub use io::{
    complex_cell, complex_matrix_csv, field_csv, hermite_coefficients_csv, stft_magnitude_csv, write_complex_matrix,
    write_field, write_json, write_stft_magnitude,
};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DEFAULT_TOL_RANK;
use crate::propagator::{evolve, evolve_product, split_axes, Method, PropagatorSpec};
use crate::stft::{
    detect_wf, stft, Datum, DetectParams, DirectField, Grid, PhaseSpaceField, ProductField, SampledDistribution,
    WFReport,
};
use crate::symplectic::{hamilton_map, QuadraticJson, QuadraticSymbol};
use crate::wavefront::{predict_propagation, ConicSet, Derived, PropagationParams, ANG_TOL};

pub const SCHEMA: u32 = 1;
const ISOMETRY_LIMIT: f64 = 1e-6;
const CONTRACTION_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extent: f64,
    pub points: usize,
}

fn default_width() -> f64 {
    1.0
}

fn default_tau() -> f64 {
    5.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    pub id: String,
    pub symbol: QuadraticJson,
    #[serde(rename = "t")]
    pub times: Vec<f64>,
    pub datum: Datum,
    pub grid: GridSpec,
    #[serde(default = "default_width")]
    pub window_width: f64,
    /// Evolution method; the first applicable one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub detector: DetectParams,
    #[serde(default = "default_tau")]
    pub tau_contain_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_rank: Option<f64>,
    #[serde(default = "default_true")]
    pub primary: bool,
    /// Regression sets, one per time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<ConicSet>>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema.is_some_and(|s| s != SCHEMA) {
            return Err(Error::Invalid(format!("unsupported scenario schema {:?}", self.schema)));
        }
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(Error::Invalid(format!(
                "scenario id {:?} must be nonempty and use [A-Za-z0-9._-]",
                self.id
            )));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Invalid(
                "times must be a nonempty list of finite values >= 0".into(),
            ));
        }
        self.datum.check()?;
        if self.datum.n() != self.symbol.n {
            return Err(Error::Invalid(format!(
                "datum in dimension {} for a symbol in dimension {}",
                self.datum.n(),
                self.symbol.n
            )));
        }
        if !(self.tau_contain_deg > 0.0) || !(self.window_width > 0.0) {
            return Err(Error::Invalid(
                "containment tolerance and window width must be positive".into(),
            ));
        }
        if let Some(exp) = &self.expected {
            if exp.len() != self.times.len() {
                return Err(Error::Invalid(format!(
                    "{} expected sets for {} times",
                    exp.len(),
                    self.times.len()
                )));
            }
        }
        Grid::new(self.grid.extent, self.grid.points)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Artifacts go to `<out>/<id>/` when set.
    pub out_dir: Option<PathBuf>,
    /// Drop timings so identical inputs give identical bytes.
    pub canonical: bool,
    pub seed: u64,
    pub ang_grid: Option<usize>,
    pub tol_rank: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Indeterminate,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanMiss {
    pub dir: Vec<f64>,
    pub excess_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    /// `‖u(t)‖ / ‖u₀‖`.
    pub contraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isometry: Option<f64>,
    /// `U(t/2)U(t/2)u₀` against `U(t)u₀`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semigroup: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeReport {
    pub t: f64,
    pub predicted: Derived,
    pub mu: f64,
    pub mu_threshold: f64,
    pub detected: WFReport,
    pub outside: Vec<FanMiss>,
    pub residuals: Residuals,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub total_ms: f64,
    pub per_time_ms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub schema: u32,
    pub id: String,
    pub n: usize,
    pub primary: bool,
    pub method: Method,
    pub tol_rank: f64,
    pub ang_tol: f64,
    pub tau_contain_deg: f64,
    pub window_width: f64,
    /// Basis of the singular space, one vector per row.
    pub singular_space: Vec<Vec<f64>>,
    pub initial: ConicSet,
    pub times: Vec<TimeReport>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Initial samples: one factor per axis when both the datum and the
/// evolution split, otherwise the full array.
pub fn initial_factors(sc: &Scenario, sym: &QuadraticSymbol) -> Result<Vec<SampledDistribution>> {
    let grid = Grid::new(sc.grid.extent, sc.grid.points)?;
    let factored = sym.n() == 2 && matches!(sc.datum, Datum::Product { .. }) && split_axes(sym).is_some();
    if factored {
        sc.datum.factors().iter().map(|d| d.sample(grid)).collect()
    } else {
        Ok(vec![sc.datum.sample(grid)?])
    }
}

/// Evolves the output of [`initial_factors`].
pub fn evolve_factors(u0: &[SampledDistribution], spec: &PropagatorSpec) -> Result<Vec<SampledDistribution>> {
    if u0.len() > 1 {
        evolve_product(u0, spec)
    } else {
        Ok(vec![evolve(&u0[0], spec)?])
    }
}

/// Detector run on a full array or on the tensor product of 1-D factors.
pub fn detect_factors(factors: &[SampledDistribution], window_width: f64, params: &DetectParams) -> Result<WFReport> {
    let direct: Vec<DirectField> = factors
        .iter()
        .map(|u| DirectField::new(u.clone(), window_width))
        .collect::<Result<_>>()?;
    let field: Box<dyn PhaseSpaceField> = if direct.len() > 1 {
        Box::new(ProductField::new(direct)?)
    } else {
        Box::new(
            direct
                .into_iter()
                .next()
                .ok_or_else(|| Error::Invalid("no data".into()))?,
        )
    };
    detect_wf(field.as_ref(), params)
}

pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<ScenarioReport> {
    run_inner(sc, opts).map_err(|e| Error::Scenario {
        id: sc.id.clone(),
        source: Box::new(e),
    })
}

fn run_inner(sc: &Scenario, opts: &RunOptions) -> Result<ScenarioReport> {
    let start = Instant::now();
    sc.validate()?;
    let sym = QuadraticSymbol::try_from(&sc.symbol)?;
    let n = sym.n();
    let tol_rank = opts.tol_rank.or(sc.tol_rank).unwrap_or(DEFAULT_TOL_RANK);
    let f = hamilton_map(&sym);
    let singular = f.singular_space(tol_rank);
    let wf0 = sc.datum.declared_wf()?;
    let method = sc.method.unwrap_or_else(|| PropagatorSpec::auto_method(&sym));
    let mut detector = sc.detector;
    if let Some(a) = opts.ang_grid {
        detector.ang_grid = a;
    }
    let u0 = initial_factors(sc, &sym)?;
    let norm0: f64 = u0.iter().map(SampledDistribution::norm).product();
    let tau = sc.tau_contain_deg.to_radians();
    let dir = opts.out_dir.as_ref().map(|d| d.join(&sc.id));
    let mut times = Vec::with_capacity(sc.times.len());
    let mut per_time_ms = Vec::new();
    for (k, &t) in sc.times.iter().enumerate() {
        let t_start = Instant::now();
        let mut reasons = Vec::new();
        let mut verdict = Verdict::Pass;
        let predicted = predict_propagation(&f, &singular, &wf0, t, PropagationParams::for_dimension(n))?;
        let mu = predicted.ledger.mu.unwrap_or(f64::NAN);
        let mu_threshold = predicted.ledger.threshold.unwrap_or(f64::NAN);
        let spec = PropagatorSpec {
            sym: sym.clone(),
            t,
            method,
            k_max: sc.k_max,
            splitting: true,
        };
        let evolved = evolve_factors(&u0, &spec)?;
        let semigroup = if t > 0.0 {
            let half = spec.with_time(t / 2.0);
            let twice = evolve_factors(&evolve_factors(&u0, &half)?, &half)?;
            Some(twice.iter().zip(&evolved).map(|(a, b)| a.rel_error(b)).sum())
        } else {
            None
        };
        let contraction = evolved.iter().map(SampledDistribution::norm).product::<f64>() / norm0;
        if contraction > 1.0 + CONTRACTION_SLACK {
            verdict = Verdict::Fail;
            reasons.push(format!("norm grew by a factor {contraction}"));
        }
        let mut isometry: Option<f64> = None;
        let mut fields = Vec::new();
        for u in &evolved {
            if let Some(w) = u.boundary_warning() {
                verdict = verdict.max(Verdict::Indeterminate);
                reasons.push(w);
            }
            if u.n() == 1 {
                match stft(u, sc.window_width) {
                    Ok(field) => {
                        isometry = Some(isometry.unwrap_or(0.0).max(field.isometry_residual));
                        fields.push(field);
                    }
                    Err(e @ Error::Aliasing { .. }) => {
                        verdict = verdict.max(Verdict::Indeterminate);
                        reasons.push(e.to_string());
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        if let Some(r) = isometry.filter(|&r| r > ISOMETRY_LIMIT) {
            verdict = verdict.max(Verdict::Indeterminate);
            reasons.push(format!("isometry residual {r:e} above {ISOMETRY_LIMIT:e}"));
        }
        let mut detected = detect_factors(&evolved, sc.window_width, &detector)?;
        detected.isometry_residual = isometry;
        let outside: Vec<FanMiss> = detected
            .fans
            .iter()
            .filter_map(|fan| {
                let excess = predicted
                    .set
                    .excess_angle(&nalgebra::DVector::from_vec(fan.dir.clone()));
                (excess > tau).then(|| FanMiss {
                    dir: fan.dir.clone(),
                    excess_deg: if excess.is_finite() { excess.to_degrees() } else { 180.0 },
                })
            })
            .collect();
        if !outside.is_empty() {
            verdict = Verdict::Fail;
            reasons.push(format!(
                "{} detected fan(s) outside the predicted set by more than {} degrees",
                outside.len(),
                sc.tau_contain_deg
            ));
        }
        if let Some(expected) = sc.expected.as_ref().map(|e| &e[k]) {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let fwd = predicted.set.sampled_subset_of(expected, &mut rng, 64, 1e-6);
            let back = expected.sampled_subset_of(&predicted.set, &mut rng, 64, 1e-6);
            if !(fwd && back) {
                verdict = Verdict::Fail;
                reasons.push("predicted set differs from the expected regression set".into());
            }
        }
        reasons.push(format!("propagation loss mu = {mu} > {mu_threshold}"));
        let mut artifacts = Vec::new();
        if let Some(dir) = &dir {
            for (j, u) in evolved.iter().enumerate() {
                let name = if evolved.len() > 1 {
                    format!("t{k}_u{j}.csv")
                } else {
                    format!("t{k}_u.csv")
                };
                write_field(&dir.join(&name), u)?;
                artifacts.push(name);
            }
            for (j, fld) in fields.iter().enumerate() {
                let name = if fields.len() > 1 {
                    format!("t{k}_stft{j}.csv")
                } else {
                    format!("t{k}_stft.csv")
                };
                let every = (fld.grid.points / 256).max(1);
                write_stft_magnitude(&dir.join(&name), fld, every, every)?;
                artifacts.push(name);
            }
        }
        times.push(TimeReport {
            t,
            predicted,
            mu,
            mu_threshold,
            detected,
            outside,
            residuals: Residuals {
                contraction,
                isometry,
                semigroup,
            },
            verdict,
            reasons,
            artifacts,
        });
        per_time_ms.push(ms(t_start));
    }
    let verdict = times.iter().map(|t| t.verdict).max().unwrap_or(Verdict::Pass);
    let reasons = times
        .iter()
        .filter(|r| r.verdict != Verdict::Pass)
        .map(|r| format!("t = {}: {:?}", r.t, r.verdict).to_lowercase())
        .collect();
    let report = ScenarioReport {
        schema: SCHEMA,
        id: sc.id.clone(),
        n,
        primary: sc.primary,
        method,
        tol_rank,
        ang_tol: ANG_TOL,
        tau_contain_deg: sc.tau_contain_deg,
        window_width: sc.window_width,
        singular_space: singular.column_iter().map(|c| c.iter().copied().collect()).collect(),
        initial: wf0,
        times,
        verdict,
        reasons,
        timings: (!opts.canonical).then(|| Timings {
            total_ms: ms(start),
            per_time_ms,
        }),
    };
    if let Some(dir) = &dir {
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SuiteFile {
    #[serde(default)]
    schema: Option<u32>,
    scenarios: Vec<Scenario>,
}

fn parse_config(text: &str) -> Result<Vec<Scenario>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("scenarios").is_some() {
        let suite: SuiteFile = serde_json::from_value(value)?;
        if suite.schema.is_some_and(|s| s != SCHEMA) {
            return Err(Error::Invalid(format!("unsupported suite schema {:?}", suite.schema)));
        }
        Ok(suite.scenarios)
    } else {
        Ok(vec![serde_json::from_value(value)?])
    }
}

/// Scenarios from a file (one scenario or `{"scenarios": [...]}`) or from
/// every `.json` file of a directory in name order.
pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(parse_config(&fs::read_to_string(&f)?)?);
        }
        Ok(out)
    } else {
        parse_config(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub id: String,
    pub primary: bool,
    /// `pass`, `fail`, `indeterminate` or `error`.
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ScenarioReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub schema: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
    pub scenarios: Vec<SuiteEntry>,
    pub passed: usize,
    pub failed: usize,
    pub indeterminate: usize,
    pub errors: usize,
    pub exit_code: i32,
}

/// Runs the scenarios whose id starts with `filter`, in parallel.
pub fn run_scenarios(scenarios: &[Scenario], filter: Option<&str>, opts: &RunOptions) -> Result<SuiteReport> {
    let selected: Vec<&Scenario> = scenarios
        .iter()
        .filter(|s| filter.is_none_or(|p| s.id.starts_with(p)))
        .collect();
    let mut ids: Vec<&str> = selected.iter().map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Invalid(format!("duplicate scenario id {:?}", w[0])));
    }
    let results = crate::par_map(&selected, |s| run_scenario(s, opts));
    let mut entries: Vec<SuiteEntry> = selected
        .iter()
        .zip(results)
        .map(|(s, r)| match r {
            Ok(rep) => SuiteEntry {
                id: s.id.clone(),
                primary: s.primary,
                outcome: serde_json::to_value(rep.verdict)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                error: None,
                report: Some(rep),
            },
            Err(e) => SuiteEntry {
                id: s.id.clone(),
                primary: s.primary,
                outcome: "error".into(),
                error: Some(e.to_string()),
                report: None,
            },
        })
        .collect();
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let count = |o: &str| entries.iter().filter(|e| e.outcome == o).count();
    let failing = entries
        .iter()
        .any(|e| e.primary && (e.outcome == "fail" || e.outcome == "error"));
    let report = SuiteReport {
        schema: SCHEMA,
        filter: filter.map(str::to_owned),
        passed: count("pass"),
        failed: count("fail"),
        indeterminate: count("indeterminate"),
        errors: count("error"),
        exit_code: i32::from(failing),
        scenarios: entries,
    };
    if let Some(dir) = &opts.out_dir {
        write_json(&dir.join("suite.json"), &report)?;
    }
    Ok(report)
}

pub fn run_suite(path: &Path, filter: Option<&str>, opts: &RunOptions) -> Result<SuiteReport> {
    run_scenarios(&load_scenarios(path)?, filter, opts)
}
