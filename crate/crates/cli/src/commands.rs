//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bioinverse_core::io::{self, read_json, read_trace_csv, write_atomic, write_csv, write_json, write_summary_csv, TraceRow};
use bioinverse_core::lmsolver::{LmResult, LmStatus};
use bioinverse_core::synth::{self, observations_for_sigmas, summarize, CampaignRun, LevelSummary, Observation};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Loaded, RunConfig};
use crate::{CliError, Command, Common, RunProvenance};

pub fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Forward { common, theta } => forward(&common, theta),
        Command::Synth { common, theta } => synth_cmd(&common, theta),
        Command::Invert {
            common,
            observation,
            theta,
        } => invert(&common, &observation, theta),
        Command::Campaign { common, theta } => campaign(&common, theta),
        Command::Report { input, out } => report(&input, out.as_deref()),
    }
}

/// Reads the config, applies command-line overrides and creates the output
/// directory. `out` does not enter the config hash.
fn load(common: &Common, edit: impl FnOnce(&mut RunConfig)) -> Result<(Loaded, PathBuf), CliError> {
    let mut config = RunConfig::from_file(&common.config)?;
    let base = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    edit(&mut config);
    let out = match (&common.out, config.out.take()) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("out"),
    };
    let loaded = Loaded::new(config, &base)?;
    fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    Ok((loaded, out))
}

fn provenance(l: &Loaded) -> RunProvenance {
    RunProvenance::new(&l.hash, l.config.seed)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ForwardFile {
    pub run: RunProvenance,
    pub model: String,
    pub parameter_names: Vec<String>,
    pub theta: Vec<f64>,
}

fn forward(common: &Common, theta: Option<Vec<f64>>) -> Result<i32, CliError> {
    let (l, out) = load(common, |c| {
        if theta.is_some() {
            c.theta_true = theta;
        }
    })?;
    let theta = l.theta_true()?;
    let curve = l.model.evaluate(&theta).map_err(|e| CliError::Config(e.to_string()))?;
    io::write_curve(&out.join("interface.csv"), &curve)?;
    write_json(
        &out.join("forward.json"),
        &ForwardFile {
            run: provenance(&l),
            model: l.model.id().into(),
            parameter_names: l.spec.names().to_vec(),
            theta,
        },
    )?;
    println!("wrote {} vertices to {}", curve.len(), out.join("interface.csv").display());
    Ok(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFile {
    pub run: RunProvenance,
    pub observation: Observation<f64>,
}

fn observations(l: &Loaded) -> Result<Vec<Observation<f64>>, CliError> {
    let theta = l.theta_true()?;
    let rays = l.ray_spec()?;
    observations_for_sigmas(&l.model, &theta, &rays, &l.config.sigmas, l.config.seed).map_err(|e| CliError::Run(e.to_string()))
}

fn write_observations(l: &Loaded, dir: &Path, obs: &[Observation<f64>]) -> Result<Vec<PathBuf>, CliError> {
    obs.iter()
        .enumerate()
        .map(|(i, o)| {
            let path = dir.join(format!("observation_{i}.json"));
            write_json(
                &path,
                &ObservationFile {
                    run: provenance(l),
                    observation: o.clone(),
                },
            )?;
            Ok(path)
        })
        .collect()
}

fn synth_cmd(common: &Common, theta: Option<Vec<f64>>) -> Result<i32, CliError> {
    let (l, out) = load(common, |c| {
        if theta.is_some() {
            c.theta_true = theta;
        }
    })?;
    let obs = observations(&l)?;
    for (p, o) in write_observations(&l, &out, &obs)?.iter().zip(&obs) {
        println!("sigma {} mm: {} rays -> {}", o.provenance.sigma, o.rays.len(), p.display());
    }
    Ok(0)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultFile {
    pub run: RunProvenance,
    pub observation_sha256: String,
    pub parameter_names: Vec<String>,
    pub initial_guess: Vec<f64>,
    pub result: LmResult<f64>,
}

pub fn status_exit_code(status: LmStatus) -> i32 {
    match status {
        LmStatus::ConvergedGrad | LmStatus::ConvergedRes => 0,
        LmStatus::MuBlowup => 3,
        LmStatus::ModelFailure => 4,
        LmStatus::MaxIterations => 5,
    }
}

fn invert(common: &Common, observation: &Path, theta: Option<Vec<f64>>) -> Result<i32, CliError> {
    let (l, out) = load(common, |c| {
        if let Some(t) = theta {
            c.initial_guesses = vec![t];
        }
    })?;
    let bytes = fs::read(observation).map_err(|e| CliError::Config(format!("{}: {e}", observation.display())))?;
    let file: ObservationFile =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", observation.display())))?;
    let obs = file.observation;
    obs.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if obs.provenance.model != l.model.id() {
        return Err(CliError::Config(format!(
            "observation was generated by model `{}`, config selects `{}`",
            obs.provenance.model,
            l.model.id()
        )));
    }
    let x0 = l.initial_guesses()?.remove(0);
    let result = synth::invert(&l.model, &obs, &x0, &l.spec, &l.config.solver).map_err(|e| CliError::Run(e.to_string()))?;
    io::write_trace_csv(&out.join("trace.csv"), l.spec.names(), &result.trace)?;
    let status = result.status;
    println!(
        "{} after {} iterations, err_res {} mm, parameters {:?}",
        status.as_str(),
        result.iterations,
        result.final_err_res().map_or("n/a".into(), |v| format!("{v:.6e}")),
        result.x
    );
    write_json(
        &out.join("result.json"),
        &ResultFile {
            run: provenance(&l),
            observation_sha256: hex::encode(Sha256::digest(&bytes)),
            parameter_names: l.spec.names().to_vec(),
            initial_guess: x0,
            result,
        },
    )?;
    Ok(status_exit_code(status))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunFile {
    pub run: RunProvenance,
    pub level: usize,
    pub guess: usize,
    pub sigma: f64,
    pub initial_guess: Vec<f64>,
    pub outcome: Result<LmResult<f64>, String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryFile {
    pub run: RunProvenance,
    pub parameter_names: Vec<String>,
    pub summary: Vec<LevelSummary>,
}

fn run_stem(level: usize, guess: usize) -> String {
    format!("level{level}_guess{guess}")
}

fn campaign(common: &Common, theta: Option<Vec<f64>>) -> Result<i32, CliError> {
    let (l, out) = load(common, |c| {
        if theta.is_some() {
            c.theta_true = theta;
        }
    })?;
    let guesses = l.initial_guesses()?;
    let obs = observations(&l)?;
    let obs_dir = out.join("observations");
    let runs_dir = out.join("runs");
    for d in [&obs_dir, &runs_dir] {
        fs::create_dir_all(d).map_err(|e| CliError::Io(format!("{}: {e}", d.display())))?;
    }
    write_observations(&l, &obs_dir, &obs)?;

    let jobs: Vec<(usize, usize)> = (0..obs.len()).flat_map(|lv| (0..guesses.len()).map(move |g| (lv, g))).collect();
    let previous = |level: usize, guess: usize| -> Option<RunFile> {
        let f: RunFile = read_json(&runs_dir.join(format!("{}.json", run_stem(level, guess)))).ok()?;
        (f.run.config_sha256 == l.hash && f.initial_guess == guesses[guess] && f.level == level).then_some(f)
    };
    let mut done: BTreeMap<(usize, usize), RunFile> = BTreeMap::new();
    for &(lv, g) in &jobs {
        if let Some(f) = previous(lv, g) {
            done.insert((lv, g), f);
        }
    }
    let reused = done.len();
    let pending: Vec<(usize, usize)> = jobs.iter().copied().filter(|j| !done.contains_key(j)).collect();
    let fresh: Vec<Result<RunFile, CliError>> = pending
        .par_iter()
        .map(|&(lv, g)| {
            let o = &obs[lv];
            let outcome = synth::invert(&l.model, o, &guesses[g], &l.spec, &l.config.solver).map_err(|e| e.to_string());
            let file = RunFile {
                run: provenance(&l),
                level: lv,
                guess: g,
                sigma: o.provenance.sigma,
                initial_guess: guesses[g].clone(),
                outcome,
            };
            let stem = run_stem(lv, g);
            if let Ok(res) = &file.outcome {
                io::write_trace_csv(&runs_dir.join(format!("{stem}.trace.csv")), l.spec.names(), &res.trace)?;
            }
            // the result file marks the run as complete, so it goes last
            let mut text = serde_json::to_string_pretty(&file).map_err(|e| CliError::Run(e.to_string()))?;
            text.push('\n');
            write_atomic(&runs_dir.join(format!("{stem}.json")), text.as_bytes())?;
            Ok(file)
        })
        .collect();
    for f in fresh {
        let f = f?;
        done.insert((f.level, f.guess), f);
    }

    let runs: Vec<CampaignRun<f64>> = done
        .into_values()
        .map(|f| CampaignRun {
            level: f.level,
            guess: f.guess,
            sigma: f.sigma,
            initial_guess: f.initial_guess,
            outcome: f.outcome,
        })
        .collect();
    let summary = summarize(&l.config.sigmas, l.spec.len(), &runs);
    write_summary_csv(&out.join("summary.csv"), l.spec.names(), &summary)?;
    write_json(
        &out.join("summary.json"),
        &SummaryFile {
            run: provenance(&l),
            parameter_names: l.spec.names().to_vec(),
            summary: summary.clone(),
        },
    )?;
    println!("runs: {} computed, {reused} reused", pending.len());
    for s in &summary {
        println!(
            "sigma {} mm: mean err_res {:.4e} mm, {} completed, {} failed",
            s.sigma, s.mean_err_res, s.n_completed, s.n_failed
        );
    }
    Ok(0)
}

fn find_traces(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if p.is_dir() {
            if name != "report" {
                find_traces(&p, found)?;
            }
        } else if name == "trace.csv" || name.ends_with(".trace.csv") {
            found.push(p);
        }
    }
    Ok(())
}

fn run_name(root: &Path, trace: &Path) -> String {
    let rel = trace.strip_prefix(root).unwrap_or(trace);
    let s = rel.to_string_lossy().replace(['/', '\\'], "__");
    let s = s.strip_suffix(".csv").unwrap_or(&s);
    let s = s.strip_suffix(".trace").unwrap_or(s);
    if s.is_empty() { "trace".into() } else { s.into() }
}

/// One row per iterate: the last record written for each `k`.
pub fn iterate_rows(rows: &[TraceRow]) -> Vec<&TraceRow> {
    let mut out: Vec<&TraceRow> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some(last) if last.k == r.k => *last = r,
            _ => out.push(r),
        }
    }
    out
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

#[derive(Debug, Serialize)]
struct ReportIndex {
    tool: String,
    version: String,
    runs: Vec<String>,
}

fn report(input: &Path, out: Option<&Path>) -> Result<i32, CliError> {
    let (root, traces) = if input.is_file() {
        (input.parent().map(Path::to_path_buf).unwrap_or_default(), vec![input.to_path_buf()])
    } else if input.is_dir() {
        let mut t = Vec::new();
        find_traces(input, &mut t)?;
        (input.to_path_buf(), t)
    } else {
        return Err(CliError::Config(format!("{} does not exist", input.display())));
    };
    if traces.is_empty() {
        return Err(CliError::Config(format!("no trace files under {}", input.display())));
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| root.join("report"));
    fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;

    let mut merged = Vec::new();
    let mut names = Vec::new();
    for t in &traces {
        let (params, rows) = read_trace_csv(t)?;
        let name = run_name(&root, t);
        let mut header: Vec<String> = ["k", "err_res_mm", "err_grad", "mu"].iter().map(|s| s.to_string()).collect();
        header.extend(params.iter().cloned());
        let its = iterate_rows(&rows);
        write_csv(
            &out.join(format!("{name}.csv")),
            &header,
            its.iter().map(|r| {
                let mut row = vec![r.k.to_string(), cell(r.err_res), cell(r.err_grad), format!("{}", r.mu)];
                row.extend(r.params.iter().map(|v| format!("{v}")));
                row
            }),
        )?;
        for r in &its {
            let mut push = |q: &str, v: Option<f64>| {
                if let Some(v) = v {
                    merged.push(vec![name.clone(), r.k.to_string(), q.to_string(), format!("{v}")]);
                }
            };
            push("err_res_mm", r.err_res);
            push("err_grad", r.err_grad);
            push("mu", Some(r.mu));
            for (p, v) in params.iter().zip(&r.params) {
                push(p, Some(*v));
            }
        }
        names.push(name);
    }
    let header: Vec<String> = ["run", "k", "quantity", "value"].iter().map(|s| s.to_string()).collect();
    write_csv(&out.join("merged.csv"), &header, merged)?;
    write_json(
        &out.join("report.json"),
        &ReportIndex {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            runs: names.clone(),
        },
    )?;
    println!("{} runs -> {}", names.len(), out.display());
    Ok(0)
}
