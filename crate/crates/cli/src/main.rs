use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use isowf::harness::verify::run_checks;
use isowf::harness::{
    detect_factors, evolve_factors, initial_factors, load_scenarios, run_suite, write_complex_matrix, write_field,
    write_json, write_stft_magnitude, RunOptions, Scenario, SCHEMA,
};
use isowf::linalg::{to_complex, RMat, DEFAULT_TOL_RANK};
use isowf::propagator::PropagatorSpec;
use isowf::stft::stft;
use isowf::symplectic::{hamilton_map, QuadraticJson, QuadraticSymbol};
use isowf::wavefront::{coarse_prediction, predict_propagation, PropagationParams};
use isowf::{Error, Result};

#[derive(Parser)]
#[command(name = "isowf", version, about = "Isotropic wave front sets of quadratic semigroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Symbol, scenario or suite file (a directory for `suite`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for JSON reports and CSV sidecars.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative singular-value cutoff for numerical null spaces.
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Detector directions per circle.
    #[arg(long, global = true)]
    ang_grid: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Omit timings so reruns are byte-identical.
    #[arg(long, global = true)]
    canonical: bool,
    /// Scenario id prefix.
    #[arg(long, global = true)]
    filter: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Hamilton map F = JQ with its real and imaginary parts.
    Hamilton,
    /// Orthonormal basis of the singular space S.
    SingularSpace,
    /// Predicted wave front set at each scenario time.
    Predict,
    /// Evolved data at each scenario time.
    Evolve,
    /// STFT of the initial datum.
    Stft,
    /// Detected wave front set of the initial datum.
    Detect,
    /// Numerical self-checks, plus the scenario suite when --config is given.
    Verify,
    /// Runs a scenario suite; nonzero exit iff a primary scenario fails.
    Suite,
}

fn require_config(cli: &Cli) -> Result<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| Error::Invalid("--config <path> is required for this command".into()))
}

/// Accepts a bare `{"n", "Q"}` symbol or anything with a `"symbol"` field.
fn load_symbol(path: &Path) -> Result<QuadraticSymbol> {
    let mut value: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if let Some(inner) = value.get_mut("symbol") {
        value = inner.take();
    }
    let js: QuadraticJson = serde_json::from_value(value)?;
    QuadraticSymbol::try_from(&js)
}

fn selected(cli: &Cli) -> Result<Vec<Scenario>> {
    let all = load_scenarios(require_config(cli)?)?;
    Ok(all
        .into_iter()
        .filter(|s| cli.filter.as_deref().is_none_or(|p| s.id.starts_with(p)))
        .collect())
}

fn rows(m: &RMat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn columns(m: &RMat) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn tol_rank(cli: &Cli, sc: Option<&Scenario>) -> f64 {
    cli.tol_rank.or(sc.and_then(|s| s.tol_rank)).unwrap_or(DEFAULT_TOL_RANK)
}

fn scenario_dir(cli: &Cli, sc: &Scenario) -> Option<PathBuf> {
    cli.out.as_ref().map(|d| d.join(&sc.id))
}

fn hamilton(cli: &Cli) -> Result<Value> {
    let f = hamilton_map(&load_symbol(require_config(cli)?)?);
    if let Some(dir) = &cli.out {
        write_complex_matrix(&dir.join("F.csv"), f.matrix())?;
        write_complex_matrix(&dir.join("re_F.csv"), &to_complex(f.re_f()))?;
        write_complex_matrix(&dir.join("im_F.csv"), &to_complex(f.im_f()))?;
    }
    let cells = |m: &isowf::linalg::CMat| -> Vec<Vec<[f64; 2]>> {
        m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
    };
    Ok(json!({
        "schema": SCHEMA,
        "n": f.n(),
        "F": cells(f.matrix()),
        "re_F": rows(f.re_f()),
        "im_F": rows(f.im_f()),
    }))
}

fn singular_space(cli: &Cli) -> Result<Value> {
    let f = hamilton_map(&load_symbol(require_config(cli)?)?);
    let tol = tol_rank(cli, None);
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::Invalid(format!("tol_rank {tol} must lie in (0, 1e-4]")));
    }
    let basis = f.singular_space(tol);
    if let Some(dir) = &cli.out {
        write_complex_matrix(&dir.join("S.csv"), &to_complex(&basis))?;
    }
    Ok(json!({
        "schema": SCHEMA,
        "n": f.n(),
        "tol_rank": tol,
        "dim": basis.ncols(),
        "basis": columns(&basis),
    }))
}

fn predict(cli: &Cli) -> Result<Value> {
    let mut out = Vec::new();
    for sc in selected(cli)? {
        sc.validate()?;
        let sym = QuadraticSymbol::try_from(&sc.symbol)?;
        let f = hamilton_map(&sym);
        let tol = tol_rank(cli, Some(&sc));
        let singular = f.singular_space(tol);
        let wf0 = sc.datum.declared_wf()?;
        let mut times = Vec::new();
        for &t in &sc.times {
            let fine = predict_propagation(&f, &singular, &wf0, t, PropagationParams::for_dimension(sym.n()))?;
            let coarse = coarse_prediction(&f, &wf0, t, tol)?;
            times.push(json!({ "t": t, "predicted": fine, "coarse": coarse }));
        }
        let report = json!({
            "schema": SCHEMA,
            "id": sc.id,
            "initial": wf0,
            "singular_space": columns(&singular),
            "times": times,
        });
        if let Some(dir) = scenario_dir(cli, &sc) {
            write_json(&dir.join("predict.json"), &report)?;
        }
        out.push(report);
    }
    Ok(Value::Array(out))
}

fn evolve(cli: &Cli) -> Result<Value> {
    let mut out = Vec::new();
    for sc in selected(cli)? {
        sc.validate()?;
        let sym = QuadraticSymbol::try_from(&sc.symbol)?;
        let method = sc.method.unwrap_or_else(|| PropagatorSpec::auto_method(&sym));
        let u0 = initial_factors(&sc, &sym)?;
        let norm0: f64 = u0.iter().map(|u| u.norm()).product();
        let mut times = Vec::new();
        for (k, &t) in sc.times.iter().enumerate() {
            let spec = PropagatorSpec {
                k_max: sc.k_max,
                ..PropagatorSpec::new(sym.clone(), t, method)
            };
            let evolved = evolve_factors(&u0, &spec)?;
            let mut files = Vec::new();
            if let Some(dir) = scenario_dir(cli, &sc) {
                for (j, u) in evolved.iter().enumerate() {
                    let name = if evolved.len() > 1 {
                        format!("t{k}_u{j}.csv")
                    } else {
                        format!("t{k}_u.csv")
                    };
                    write_field(&dir.join(&name), u)?;
                    files.push(name);
                }
            }
            let norm: f64 = evolved.iter().map(|u| u.norm()).product();
            times.push(json!({ "t": t, "norm_ratio": norm / norm0, "files": files }));
        }
        out.push(json!({ "schema": SCHEMA, "id": sc.id, "method": method, "times": times }));
    }
    Ok(Value::Array(out))
}

fn stft_cmd(cli: &Cli) -> Result<Value> {
    let mut out = Vec::new();
    for sc in selected(cli)? {
        sc.validate()?;
        let sym = QuadraticSymbol::try_from(&sc.symbol)?;
        let factors = initial_factors(&sc, &sym)?;
        if factors.iter().any(|u| u.n() != 1) {
            return Err(Error::NotApplicable(format!(
                "{}: spectrogram dumps need one-dimensional data or product factors",
                sc.id
            )));
        }
        let mut entries = Vec::new();
        for (j, u) in factors.iter().enumerate() {
            let field = stft(u, sc.window_width)?;
            let mut file = None;
            if let Some(dir) = scenario_dir(cli, &sc) {
                let every = (u.grid().points / 256).max(1);
                let name = format!("stft{j}.csv");
                write_stft_magnitude(&dir.join(&name), &field, every, every)?;
                file = Some(name);
            }
            entries.push(json!({ "factor": j, "isometry_residual": field.isometry_residual, "file": file }));
        }
        out.push(json!({ "schema": SCHEMA, "id": sc.id, "window_width": sc.window_width, "factors": entries }));
    }
    Ok(Value::Array(out))
}

fn detect(cli: &Cli) -> Result<Value> {
    let mut out = Vec::new();
    for sc in selected(cli)? {
        sc.validate()?;
        let sym = QuadraticSymbol::try_from(&sc.symbol)?;
        let mut params = sc.detector;
        if let Some(a) = cli.ang_grid {
            params.ang_grid = a;
        }
        let report = detect_factors(&initial_factors(&sc, &sym)?, sc.window_width, &params)?;
        let value = json!({ "schema": SCHEMA, "id": sc.id, "report": report });
        if let Some(dir) = scenario_dir(cli, &sc) {
            write_json(&dir.join("detect.json"), &value)?;
        }
        out.push(value);
    }
    Ok(Value::Array(out))
}

fn run_options(cli: &Cli) -> RunOptions {
    RunOptions {
        out_dir: cli.out.clone(),
        canonical: cli.canonical,
        seed: cli.seed,
        ang_grid: cli.ang_grid,
        tol_rank: cli.tol_rank,
    }
}

fn suite(cli: &Cli) -> Result<u8> {
    let report = run_suite(require_config(cli)?, cli.filter.as_deref(), &run_options(cli))?;
    for entry in &report.scenarios {
        match &entry.error {
            Some(e) => println!("{:<13} {} ({e})", entry.outcome, entry.id),
            None => println!("{:<13} {}", entry.outcome, entry.id),
        }
    }
    println!(
        "{} passed, {} failed, {} indeterminate, {} errors",
        report.passed, report.failed, report.indeterminate, report.errors
    );
    Ok(report.exit_code as u8)
}

fn verify(cli: &Cli) -> Result<u8> {
    let report = run_checks(cli.seed, tol_rank(cli, None))?;
    for c in &report.checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        println!(
            "[{mark}] criterion {}: {} = {:.3e} (limit {:.1e})",
            c.criterion, c.name, c.value, c.limit
        );
    }
    if let Some(dir) = &cli.out {
        write_json(&dir.join("verify.json"), &report)?;
    }
    let mut code = u8::from(!report.passed);
    if cli.config.is_some() {
        code = code.max(suite(cli)?);
    }
    Ok(code)
}

fn run(cli: &Cli) -> Result<u8> {
    let value = match cli.command {
        Command::Hamilton => hamilton(cli)?,
        Command::SingularSpace => singular_space(cli)?,
        Command::Predict => predict(cli)?,
        Command::Evolve => evolve(cli)?,
        Command::Stft => stft_cmd(cli)?,
        Command::Detect => detect(cli)?,
        Command::Verify => return verify(cli),
        Command::Suite => return suite(cli),
    };
    // a closed pipe (`isowf ... | head`) is not an error
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&value)?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
