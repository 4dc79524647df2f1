//! Orchestration: runs one subcommand against a scenario and writes its
//! artifacts, with a manifest of content hashes, under `<out>/<name>-<hash>/<command>/`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abp::{verify_abp, verify_abp_measurable};
use crate::dpp::{
    nonuniqueness_check, scenario_directions, solve_dpp, solve_pucci, PucciKind, Solution,
    SolveMode, SolveOptions,
};
use crate::error::{LabError, Result};
use crate::geometry::{Domain, NodeClass};
use crate::measures::MeasureFamily;
use crate::regularity::{
    cz_decompose, cz_verify, degiorgi_k, degiorgi_probe, fit_holder, holder_certificate,
    oscillation_profile, CzParams, DeGiorgiParams, DyadicSet, Slack,
};
use crate::rng::path_stream;
use crate::scenario::{builtin, scenario_load, Scenario, BUILTIN_NAMES};
use crate::walker::{
    drift_check, estimate_value, exit_time_stats, hitting_prob, ln_abp_failure_demo, Region, Shape,
    ValueEstimate,
};

/// Grid-error coefficient in the solver/simulator tolerance `3·SE + C_GRID·h`.
pub const C_GRID: f64 = 2.0;

/// Radii below `ε/EPS0` are left out of Hölder fits.
pub const EPS0: f64 = 0.5;

/// Environment variable holding the worker count for the command line front end.
pub const WORKERS_ENV: &str = "DPP_LAB_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveKind {
    Dpp,
    PucciMax,
    PucciMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulateKind {
    Value,
    ExitStats,
    Hitting,
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbpKind {
    Continuous,
    Measurable,
    LnFailureDemo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CzKind {
    Decompose,
    Fuzz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HolderKind {
    Profile,
    Fit,
    Degiorgi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", content = "kind", rename_all = "kebab-case")]
pub enum Command {
    Solve(SolveKind),
    Simulate(SimulateKind),
    Abp(AbpKind),
    Cz(CzKind),
    Holder(HolderKind),
    Compare,
    VerifyAll,
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

impl Command {
    /// Directory name for the command's artifacts, e.g. `solve-dpp`.
    pub fn slug(&self) -> String {
        match self {
            Command::Solve(k) => format!("solve-{}", value_name(k)),
            Command::Simulate(k) => format!("simulate-{}", value_name(k)),
            Command::Abp(k) => format!("abp-{}", value_name(k)),
            Command::Cz(k) => format!("cz-{}", value_name(k)),
            Command::Holder(k) => format!("holder-{}", value_name(k)),
            Command::Compare => "compare".into(),
            Command::VerifyAll => "verify-all".into(),
        }
    }
}

/// Flags shared by every subcommand. `None` keeps the scenario's own value.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything needed to reproduce a run. Wall-clock timing goes to a separate
/// `timing.json` so the manifest itself is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub version: String,
    pub seed: u64,
    pub paths: usize,
    pub tol: Option<f64>,
    pub pass: bool,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    /// 0 on success, 4 when a verification failed.
    pub fn exit_code(&self) -> i32 {
        if self.manifest.pass {
            0
        } else {
            4
        }
    }
}

/// Exit code for a finished or failed run: 2 validation, 3 divergence, 4 verification failure.
pub fn exit_code(r: &Result<RunOutcome>) -> i32 {
    match r {
        Ok(o) => o.exit_code(),
        Err(LabError::NotSubsolution { .. }) => 4,
        Err(e) => e.exit_code(),
    }
}

struct Artifact {
    name: String,
    bytes: Vec<u8>,
}

struct Outcome {
    files: Vec<Artifact>,
    pass: bool,
}

fn json<T: Serialize>(name: &str, v: &T) -> Result<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(Artifact {
        name: name.into(),
        bytes,
    })
}

fn csv_rows<T: Serialize>(name: &str, rows: &[T]) -> Result<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Io(e.into_error()))?;
    Ok(Artifact {
        name: name.into(),
        bytes,
    })
}

fn csv_table(name: &str, header: &[String], rows: &[Vec<String>]) -> Result<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Io(e.into_error()))?;
    Ok(Artifact {
        name: name.into(),
        bytes,
    })
}

fn coord_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// Loads the scenario and applies the command line overrides.
pub fn effective_scenario(cfg: &RunConfig) -> Result<(Scenario, Vec<String>)> {
    let name = cfg
        .scenario
        .as_deref()
        .ok_or_else(|| LabError::invalid("scenario", "required for this command"))?;
    let mut scn = scenario_load(name)?;
    if let Some(s) = cfg.seed {
        scn.seed = s;
    }
    if let Some(p) = cfg.paths {
        scn.paths = p;
    }
    if cfg.tol.is_some() {
        scn.tol = cfg.tol;
    }
    let warnings = scn.validate()?;
    Ok((scn, warnings))
}

/// Runs `cmd` and writes its artifacts.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let (label, hash, seed, paths, tol, warnings, outcome) = match cmd {
        Command::VerifyAll => {
            let seed = cfg.seed.unwrap_or(20_240_601);
            let paths = cfg.paths.unwrap_or(4000);
            let outcome = verify_all(seed, paths)?;
            let key = format!("verify-all:{seed}:{paths}");
            let hash = hex::encode(&Sha256::digest(key.as_bytes())[..8]);
            (
                "builtins".to_string(),
                hash,
                seed,
                paths,
                None,
                Vec::new(),
                outcome,
            )
        }
        _ => {
            let (scn, warnings) = effective_scenario(cfg)?;
            let outcome = dispatch(cmd, &scn)?;
            (
                scn.name.clone(),
                scn.hash(),
                scn.seed,
                scn.paths,
                scn.tol,
                warnings,
                outcome,
            )
        }
    };
    let dir = cfg.out.join(format!("{label}-{hash}")).join(cmd.slug());
    std::fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    for a in &outcome.files {
        std::fs::write(dir.join(&a.name), &a.bytes)?;
        outputs.push(OutputFile {
            name: a.name.clone(),
            sha256: hex::encode(Sha256::digest(&a.bytes)),
            bytes: a.bytes.len(),
        });
    }
    let manifest = RunManifest {
        command: cmd.slug(),
        scenario: label,
        scenario_hash: hash,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        paths,
        tol,
        pass: outcome.pass,
        outputs,
    };
    let m = json("manifest.json", &manifest)?;
    std::fs::write(dir.join(&m.name), &m.bytes)?;
    let timing = serde_json::json!({ "seconds": start.elapsed().as_secs_f64() });
    std::fs::write(dir.join("timing.json"), serde_json::to_vec_pretty(&timing)?)?;
    Ok(RunOutcome {
        dir,
        manifest,
        warnings,
    })
}

fn dispatch(cmd: Command, scn: &Scenario) -> Result<Outcome> {
    match cmd {
        Command::Solve(k) => cmd_solve(scn, k),
        Command::Simulate(k) => cmd_simulate(scn, k),
        Command::Abp(k) => cmd_abp(scn, k),
        Command::Cz(k) => cmd_cz(scn, k),
        Command::Holder(k) => cmd_holder(scn, k),
        Command::Compare => cmd_compare(scn),
        Command::VerifyAll => unreachable!("handled by run"),
    }
}

pub fn solve_options(scn: &Scenario) -> Result<SolveOptions> {
    let grid = scn.grid()?;
    Ok(SolveOptions {
        mode: SolveMode::Monotone,
        tol: scn.tolerance(&grid),
        max_iter: scn.max_iter,
    })
}

/// The linear DPP, or the maximizing Pucci problem for a pucci-control family.
pub fn solve_default(scn: &Scenario) -> Result<Solution> {
    let opts = solve_options(scn)?;
    match scn.family {
        MeasureFamily::PucciControl { .. } => {
            solve_pucci(scn, &scenario_directions(scn), PucciKind::Max, &opts)
        }
        _ => solve_dpp(scn, &opts),
    }
}

/// Probe points of the scenario, or its centre when none are listed.
pub fn probe_points(scn: &Scenario) -> Vec<Vec<f64>> {
    if scn.probes.is_empty() {
        vec![scn.domain.center().to_vec()]
    } else {
        scn.probes.clone()
    }
}

#[derive(Debug, Clone, Serialize)]
struct SolveSummary {
    scenario: String,
    scenario_hash: String,
    solver: String,
    iterations: usize,
    final_increment: f64,
    tol: f64,
    nodes: usize,
    interior: usize,
    beta_minus: Option<f64>,
    probes: Vec<ProbeValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeValue {
    pub x: Vec<f64>,
    pub u: f64,
}

fn solution_table(sol: &Solution) -> Result<Artifact> {
    let g = &sol.u.grid;
    let mut header = coord_header("x", g.dim());
    header.extend(["class".to_string(), "u".to_string()]);
    let rows: Vec<Vec<String>> = (0..g.len())
        .filter(|&i| g.is_classified(i))
        .map(|i| {
            let mut r: Vec<String> = g.coords(i).into_iter().map(fmt).collect();
            r.push(
                if g.class[i] == NodeClass::Interior {
                    "interior"
                } else {
                    "collar"
                }
                .into(),
            );
            r.push(fmt(sol.u.values[i]));
            r
        })
        .collect();
    csv_table("solution.csv", &header, &rows)
}

fn cmd_solve(scn: &Scenario, kind: SolveKind) -> Result<Outcome> {
    let opts = solve_options(scn)?;
    let sol = match kind {
        SolveKind::Dpp => solve_dpp(scn, &opts)?,
        SolveKind::PucciMax => solve_pucci(scn, &scenario_directions(scn), PucciKind::Max, &opts)?,
        SolveKind::PucciMin => solve_pucci(scn, &scenario_directions(scn), PucciKind::Min, &opts)?,
    };
    let probes = probe_points(scn)
        .into_iter()
        .map(|x| {
            Ok(ProbeValue {
                u: sol.u.eval(&x)?,
                x,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = SolveSummary {
        scenario: scn.name.clone(),
        scenario_hash: scn.hash(),
        solver: value_name(&kind),
        iterations: sol.iterations,
        final_increment: sol.final_increment(),
        tol: opts.tol,
        nodes: sol.u.grid.len(),
        interior: sol.u.grid.interior.len(),
        beta_minus: sol.beta_minus,
        probes,
    };
    Ok(Outcome {
        files: vec![
            solution_table(&sol)?,
            csv_rows("iterations.csv", &sol.log)?,
            json("summary.json", &summary)?,
        ],
        pass: true,
    })
}

fn domain_region(d: &Domain) -> Region {
    match d {
        Domain::Box {
            center,
            half_widths,
        } => Region::new(vec![Shape::Box(crate::field::AxisBox {
            lo: center.iter().zip(half_widths).map(|(c, w)| c - w).collect(),
            hi: center.iter().zip(half_widths).map(|(c, w)| c + w).collect(),
        })]),
        Domain::Ball { center, radius } => Region::new(vec![Shape::Ball {
            center: center.clone(),
            radius: *radius,
        }]),
    }
}

fn cmd_simulate(scn: &Scenario, kind: SimulateKind) -> Result<Outcome> {
    let probes = probe_points(scn);
    let n = scn.dim();
    match kind {
        SimulateKind::Value => {
            let est = probes
                .iter()
                .map(|x| estimate_value(x, scn, scn.paths, scn.seed))
                .collect::<Result<Vec<_>>>()?;
            let mut header = coord_header("x", n);
            header.extend(["mean", "se", "n", "capped"].map(String::from));
            let rows: Vec<Vec<String>> = est
                .iter()
                .map(|e| {
                    let mut r: Vec<String> = e.x0.iter().copied().map(fmt).collect();
                    r.extend([
                        fmt(e.value.mean),
                        fmt(e.value.se),
                        e.value.n.to_string(),
                        e.capped.to_string(),
                    ]);
                    r
                })
                .collect();
            Ok(Outcome {
                files: vec![
                    csv_table("values.csv", &header, &rows)?,
                    json("values.json", &est)?,
                ],
                pass: true,
            })
        }
        SimulateKind::ExitStats => {
            let reps = probes
                .iter()
                .map(|x| exit_time_stats(x, scn, scn.paths, scn.seed))
                .collect::<Result<Vec<_>>>()?;
            let tail: Vec<Vec<String>> = reps
                .iter()
                .enumerate()
                .flat_map(|(k, r)| {
                    r.tail
                        .iter()
                        .map(move |t| vec![k.to_string(), fmt(t.t), fmt(t.p)])
                })
                .collect();
            let pass = reps.iter().all(|r| r.bounds.holds);
            Ok(Outcome {
                files: vec![
                    json("exit_stats.json", &reps)?,
                    csv_table(
                        "tail.csv",
                        &["probe".into(), "t".into(), "survival".into()],
                        &tail,
                    )?,
                ],
                pass,
            })
        }
        SimulateKind::Hitting => {
            let c = scn.domain.center().to_vec();
            let target = Region::new(vec![Shape::Ball {
                radius: 0.25 * scn.domain.boundary_distance(&c),
                center: c,
            }]);
            let stop = domain_region(&scn.domain);
            let reps = probes
                .iter()
                .map(|x| hitting_prob(x, &target, &stop, scn, scn.paths, scn.seed))
                .collect::<Result<Vec<_>>>()?;
            #[derive(Serialize)]
            struct Hitting<'a> {
                target: &'a Region,
                reports: &'a [crate::walker::HitReport],
            }
            Ok(Outcome {
                files: vec![json(
                    "hitting.json",
                    &Hitting {
                        target: &target,
                        reports: &reps,
                    },
                )?],
                pass: true,
            })
        }
        SimulateKind::Drift => {
            let reps = probes
                .iter()
                .map(|x| drift_check(x, scn, scn.paths, scn.seed))
                .collect::<Result<Vec<_>>>()?;
            let pass = reps.iter().all(|r| r.holds);
            Ok(Outcome {
                files: vec![json("drift.json", &reps)?],
                pass,
            })
        }
    }
}

fn cmd_abp(scn: &Scenario, kind: AbpKind) -> Result<Outcome> {
    match kind {
        AbpKind::Continuous => {
            let sol = solve_default(scn)?;
            let r = verify_abp(scn, &sol.u)?;
            let n = r.dim;
            let mut header = coord_header("center", n);
            header.extend(["side", "sup_f", "rho"].map(String::from));
            let rows: Vec<Vec<String>> = r
                .cubes
                .iter()
                .map(|q| {
                    let mut row: Vec<String> = q.center.iter().copied().map(fmt).collect();
                    row.extend([fmt(q.side), fmt(q.sup_f), fmt(q.rho)]);
                    row
                })
                .collect();
            Ok(Outcome {
                files: vec![
                    json("abp.json", &r)?,
                    csv_table("cubes.csv", &header, &rows)?,
                ],
                pass: r.pass,
            })
        }
        AbpKind::Measurable => {
            let r = verify_abp_measurable(scn, scn.paths, scn.seed)?;
            Ok(Outcome {
                pass: r.pass,
                files: vec![json("abp_measurable.json", &r)?],
            })
        }
        AbpKind::LnFailureDemo => {
            let r = ln_abp_failure_demo(scn.paths, scn.seed)?;
            Ok(Outcome {
                pass: r.floor_holds,
                files: vec![json("ln_failure.json", &r)?],
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct CubeRow {
    generation: u32,
    index: String,
    rule: String,
    density: String,
    side: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzRow {
    pub trial: usize,
    pub dim: usize,
    pub depth: u32,
    pub level: u32,
    pub delta: String,
    pub delta_tilde: String,
    pub a_measure: String,
    pub b_measure: String,
    pub rhs: String,
    pub cubes: usize,
    pub pass: bool,
}

/// `trials` random sets with `N ≤ 2`, `L ≤ 6` and random valid `(δ, δ̃)`, each
/// decomposed and certified.
pub fn cz_fuzz(trials: usize, seed: u64) -> Result<Vec<FuzzRow>> {
    let mut rng = path_stream(seed, 0);
    let mut rows = Vec::with_capacity(trials);
    while rows.len() < trials {
        let dim = rng.gen_range(1..=2usize);
        let depth = rng.gen_range(1..=6u32);
        let level = rng.gen_range(1..=depth);
        let d = rng.gen_range(2..100i64);
        let t = rng.gen_range(1..d);
        let p = CzParams::from_ratios((d, 100), (t, 100), level)?;
        let fill = rng.gen::<f64>() * p.delta.to_f64().unwrap_or(0.0);
        let a = DyadicSet::random(dim, depth, fill, &mut rng);
        if a.measure() > p.delta {
            continue;
        }
        let dec = cz_decompose(&a, &p)?;
        let c = cz_verify(&a, &dec.cubes, &p);
        rows.push(FuzzRow {
            trial: rows.len(),
            dim,
            depth,
            level,
            delta: p.delta.to_string(),
            delta_tilde: p.delta_tilde.to_string(),
            a_measure: c.a_measure,
            b_measure: c.b_measure,
            rhs: c.rhs,
            cubes: dec.cubes.len(),
            pass: c.pass,
        });
    }
    Ok(rows)
}

fn cmd_cz(scn: &Scenario, kind: CzKind) -> Result<Outcome> {
    match kind {
        CzKind::Decompose => {
            let n = scn.dim().min(2);
            let depth = if n == 1 { 8 } else { 5 };
            let level = ((1.0 / scn.params.eps).log2().ceil() as u32).clamp(1, depth);
            let p = CzParams::from_ratios((1, 2), (1, 20), level)?;
            let mut rng = path_stream(scn.seed, 0);
            let a = DyadicSet::random(n, depth, 0.25, &mut rng);
            let dec = cz_decompose(&a, &p)?;
            let cert = cz_verify(&a, &dec.cubes, &p);
            let rows: Vec<CubeRow> = dec
                .cubes
                .iter()
                .map(|s| CubeRow {
                    generation: s.cell.generation,
                    index: s
                        .cell
                        .index
                        .iter()
                        .map(|k| k.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                    rule: format!("{:?}", s.rule).to_lowercase(),
                    density: a.density(&s.cell).to_string(),
                    side: s.cell.to_cube().side,
                })
                .collect();
            Ok(Outcome {
                pass: cert.pass,
                files: vec![
                    json("set.json", &a)?,
                    csv_rows("cubes.csv", &rows)?,
                    json("certificate.json", &cert)?,
                ],
            })
        }
        CzKind::Fuzz => {
            let rows = cz_fuzz(500, scn.seed)?;
            Ok(Outcome {
                pass: rows.iter().all(|r| r.pass),
                files: vec![csv_rows("fuzz.csv", &rows)?],
            })
        }
    }
}

fn f_sup(scn: &Scenario, sol: &Solution) -> f64 {
    let g = &sol.u.grid;
    g.interior
        .iter()
        .map(|&i| scn.f.eval(&g.coords(i)).abs())
        .fold(0.0, f64::max)
}

fn cmd_holder(scn: &Scenario, kind: HolderKind) -> Result<Outcome> {
    let sol = solve_default(scn)?;
    let eps = scn.params.eps;
    match kind {
        HolderKind::Profile | HolderKind::Fit => {
            let c = scn.domain.center().to_vec();
            let r_max = 0.8 * scn.domain.boundary_distance(&c);
            let prof = oscillation_profile(&sol.u, &c, r_max, eps, EPS0, 2.0)?;
            let mut files = vec![];
            let mut pass = true;
            let mut fitted: Vec<Option<f64>> = vec![None; prof.radii.len()];
            if kind == HolderKind::Fit {
                let fit = fit_holder(&prof)?;
                let cert = holder_certificate(
                    &sol.u,
                    &prof,
                    &fit,
                    f_sup(scn, &sol),
                    Slack::default(),
                    10_000,
                    scn.seed,
                )?;
                for (slot, &r) in fitted.iter_mut().zip(&prof.radii) {
                    *slot = Some(
                        cert.c_fit / cert.r.powf(fit.gamma)
                            * cert.scale
                            * ((2.0 * r).powf(fit.gamma) + eps.powf(fit.gamma)),
                    );
                }
                pass = cert.pass;
                files.push(json(
                    "fit.json",
                    &serde_json::json!({ "fit": fit, "certificate": cert }),
                )?);
            }
            let rows: Vec<Vec<String>> = prof
                .radii
                .iter()
                .zip(&prof.omega)
                .zip(&fitted)
                .map(|((&r, &w), f)| vec![fmt(r), fmt(w), f.map(fmt).unwrap_or_default()])
                .collect();
            files.insert(
                0,
                csv_table(
                    "profile.csv",
                    &["R".into(), "omega".into(), "fitted".into()],
                    &rows,
                )?,
            );
            Ok(Outcome { files, pass })
        }
        HolderKind::Degiorgi => {
            let k = degiorgi_k(scn.dim(), scn.params.lambda, EPS0);
            let h = sol.u.grid.h;
            let reps = probe_points(scn)
                .iter()
                .map(|x| {
                    let r = (0.2 * scn.domain.boundary_distance(x)).max(2.0 * h);
                    degiorgi_probe(
                        scn,
                        &sol.u,
                        x,
                        &DeGiorgiParams {
                            r,
                            k,
                            theta: 0.5,
                            m: None,
                            big_m: None,
                        },
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let pass = reps.iter().all(|r| r.eta_observed.is_none_or(|e| e > 0.0));
            Ok(Outcome {
                pass,
                files: vec![json("degiorgi.json", &reps)?],
            })
        }
    }
}

/// Solver values at probe points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutput {
    pub scenario_hash: String,
    pub h: f64,
    pub values: Vec<ProbeValue>,
}

/// Monte Carlo estimates at probe points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorOutput {
    pub scenario_hash: String,
    pub estimates: Vec<ValueEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub x: Vec<f64>,
    pub solver: f64,
    pub simulated: f64,
    pub se: f64,
    pub diff: f64,
    /// `3·SE + C_GRID·h`
    pub allowed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub scenario_hash: String,
    pub rows: Vec<CompareRow>,
    pub pass: bool,
}

pub fn solver_output(scn: &Scenario, sol: &Solution, points: &[Vec<f64>]) -> Result<SolverOutput> {
    let values = points
        .iter()
        .map(|x| {
            Ok(ProbeValue {
                u: sol.u.eval(x)?,
                x: x.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SolverOutput {
        scenario_hash: scn.hash(),
        h: sol.u.grid.h,
        values,
    })
}

pub fn simulator_output(
    scn: &Scenario,
    points: &[Vec<f64>],
    n_paths: usize,
    seed: u64,
) -> Result<SimulatorOutput> {
    let estimates = points
        .iter()
        .map(|x| estimate_value(x, scn, n_paths, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulatorOutput {
        scenario_hash: scn.hash(),
        estimates,
    })
}

/// Per-probe agreement `|u - E| ≤ 3·SE + C_GRID·h`.
pub fn compare(solver: &SolverOutput, sim: &SimulatorOutput) -> Result<CompareReport> {
    if solver.scenario_hash != sim.scenario_hash {
        return Err(LabError::invalid(
            "scenario_hash",
            format!(
                "solver {} vs simulator {}",
                solver.scenario_hash, sim.scenario_hash
            ),
        ));
    }
    if solver.values.len() != sim.estimates.len()
        || solver
            .values
            .iter()
            .zip(&sim.estimates)
            .any(|(a, b)| a.x != b.x0)
    {
        return Err(LabError::invalid(
            "probes",
            "solver and simulator probe points differ",
        ));
    }
    let rows: Vec<CompareRow> = solver
        .values
        .iter()
        .zip(&sim.estimates)
        .map(|(a, b)| {
            let diff = (a.u - b.value.mean).abs();
            let allowed = 3.0 * b.value.se + C_GRID * solver.h;
            CompareRow {
                x: a.x.clone(),
                solver: a.u,
                simulated: b.value.mean,
                se: b.value.se,
                diff,
                allowed,
                pass: diff <= allowed,
            }
        })
        .collect();
    Ok(CompareReport {
        scenario_hash: solver.scenario_hash.clone(),
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

fn compare_scenario(scn: &Scenario, n_paths: usize, seed: u64) -> Result<CompareReport> {
    let points = probe_points(scn);
    let sol = solve_default(scn)?;
    compare(
        &solver_output(scn, &sol, &points)?,
        &simulator_output(scn, &points, n_paths, seed)?,
    )
}

fn cmd_compare(scn: &Scenario) -> Result<Outcome> {
    let r = compare_scenario(scn, scn.paths, scn.seed)?;
    let n = scn.dim();
    let mut header = coord_header("x", n);
    header.extend(["solver", "simulated", "se", "diff", "allowed", "pass"].map(String::from));
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| {
            let mut v: Vec<String> = row.x.iter().copied().map(fmt).collect();
            v.extend([row.solver, row.simulated, row.se, row.diff, row.allowed].map(fmt));
            v.push(row.pass.to_string());
            v
        })
        .collect();
    Ok(Outcome {
        pass: r.pass,
        files: vec![
            csv_table("compare.csv", &header, &rows)?,
            json("compare.json", &r)?,
        ],
    })
}

/// One line of the `verify-all` battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub scenario: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub detail: String,
}

fn check(
    name: &str,
    scenario: &str,
    f: impl FnOnce() -> Result<(bool, Option<f64>, Option<f64>, String)>,
) -> Check {
    let (pass, value, bound, detail) = f().unwrap_or_else(|e| (false, None, None, e.to_string()));
    Check {
        name: name.into(),
        scenario: scenario.into(),
        pass,
        value,
        bound,
        detail,
    }
}

fn get(name: &str) -> Result<Scenario> {
    builtin(name).ok_or_else(|| LabError::UnknownScenario(name.into()))
}

/// The desk-scale battery over the built-in scenarios.
pub fn verify_all_checks(seed: u64, paths: usize) -> Vec<Check> {
    let mut out = Vec::new();
    for &name in BUILTIN_NAMES {
        out.push(check("validate", name, || {
            let w = get(name)?.validate()?;
            Ok((true, None, None, w.join("; ")))
        }));
    }
    out.push(check("nonuniqueness", "nonunique-1d", || {
        let r = nonuniqueness_check(20)?;
        Ok((
            r.unbounded_is_solution && r.zero_is_solution,
            None,
            None,
            format!("{} rows", r.rows.len()),
        ))
    }));
    for name in ["linear-1d", "dirac-2d", "plaplace-2d"] {
        out.push(check("compare", name, || {
            let r = compare_scenario(&get(name)?, paths, seed)?;
            let worst = r
                .rows
                .iter()
                .map(|x| x.diff - x.allowed)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((r.pass, Some(worst), Some(0.0), "max(diff - allowed)".into()))
        }));
    }
    out.push(check("exit-stats", "uniform-1d", || {
        let s = get("uniform-1d")?;
        let r = exit_time_stats(&[0.0], &s, paths, seed)?;
        Ok((
            r.bounds.holds,
            Some(r.exit_time.mean),
            Some(r.bounds.upper),
            format!("lower {}", r.bounds.lower),
        ))
    }));
    for name in ["linear-1d", "dirac-2d", "ellipsoid-2d"] {
        out.push(check("drift", name, || {
            let s = get(name)?;
            let r = drift_check(&probe_points(&s)[0], &s, paths, seed)?;
            Ok((
                r.holds,
                Some(r.drift.mean),
                Some(r.upper),
                format!("lower {}", r.lower),
            ))
        }));
    }
    for name in ["linear-1d", "dirac-2d"] {
        out.push(check("abp-continuous", name, || {
            let s = get(name)?;
            let r = verify_abp(&s, &solve_default(&s)?.u)?;
            Ok((
                r.pass && r.gradient_holds,
                Some(r.lhs),
                Some(r.rhs),
                format!("{} contact nodes", r.contact_nodes),
            ))
        }));
    }
    out.push(check("abp-measurable", "indicator-1d", || {
        let r = verify_abp_measurable(&get("indicator-1d")?, paths, seed)?;
        let slack = r
            .points
            .iter()
            .map(|p| p.slack)
            .fold(f64::INFINITY, f64::min);
        Ok((r.pass, Some(slack), Some(0.0), "min slack".into()))
    }));
    out.push(check("ln-failure-demo", "ln-failure-2d", || {
        let r = ln_abp_failure_demo(paths, seed)?;
        Ok((
            r.floor_holds,
            Some(r.s_sum.mean),
            Some(r.floor),
            format!("hit rate {}", r.hit_rate),
        ))
    }));
    out.push(check("cz-fuzz", "dyadic", || {
        let rows = cz_fuzz(100, seed)?;
        Ok((
            rows.iter().all(|r| r.pass),
            None,
            None,
            format!("{} trials", rows.len()),
        ))
    }));
    out.push(check("pucci-ordering", "linear-1d", || {
        let s = get("linear-1d")?;
        let opts = solve_options(&s)?;
        let dirs = scenario_directions(&s);
        let lo = solve_pucci(&s, &dirs, PucciKind::Min, &opts)?;
        let mid = solve_dpp(&s, &opts)?;
        let hi = solve_pucci(&s, &dirs, PucciKind::Max, &opts)?;
        let slack = (0..mid.u.values.len())
            .map(|i| (mid.u.values[i] - lo.u.values[i]).min(hi.u.values[i] - mid.u.values[i]))
            .fold(f64::INFINITY, f64::min);
        Ok((
            slack >= -1e-9,
            Some(slack),
            Some(-1e-9),
            "min ordering gap".into(),
        ))
    }));
    out.push(check("px-laplace", "px-laplace-2d", || {
        let s = get("px-laplace-2d")?;
        let sol = solve_default(&s)?;
        let bm = sol.beta_minus.unwrap_or(0.0);
        Ok((
            (1e-3..=1.0).contains(&bm),
            Some(bm),
            Some(1e-3),
            "beta_minus".into(),
        ))
    }));
    out.push(check("holder-fit", "ellipsoid-2d", || {
        let s = get("ellipsoid-2d")?;
        let sol = solve_default(&s)?;
        let prof = oscillation_profile(&sol.u, &[0.0, 0.0], 0.8, s.params.eps, EPS0, 2.0)?;
        let fit = fit_holder(&prof)?;
        let cert = holder_certificate(
            &sol.u,
            &prof,
            &fit,
            f_sup(&s, &sol),
            Slack::default(),
            10_000,
            seed,
        )?;
        Ok((
            cert.pass,
            Some(fit.gamma),
            Some(0.0),
            format!("{} violations", cert.violations),
        ))
    }));
    for name in ["uniform-1d", "dirac-2d"] {
        out.push(check("degiorgi", name, || {
            let mut s = get(name)?;
            s.f = crate::field::FieldSpec::constant(0.0);
            let sol = solve_default(&s)?;
            let k = degiorgi_k(s.dim(), s.params.lambda, EPS0);
            let mut etas = Vec::new();
            for x in probe_points(&s) {
                let r = (0.2 * s.domain.boundary_distance(&x)).max(2.0 * s.h);
                let rep = degiorgi_probe(
                    &s,
                    &sol.u,
                    &x,
                    &DeGiorgiParams {
                        r,
                        k,
                        theta: 0.5,
                        m: None,
                        big_m: None,
                    },
                )?;
                etas.extend(rep.eta_observed);
            }
            let min = etas.iter().copied().reduce(f64::min);
            Ok((
                !etas.is_empty() && min > Some(0.0),
                min,
                Some(0.0),
                format!("{} probes with eta", etas.len()),
            ))
        }));
    }
    out
}

fn verify_all(seed: u64, paths: usize) -> Result<Outcome> {
    let checks = verify_all_checks(seed, paths);
    let pass = checks.iter().all(|c| c.pass);
    Ok(Outcome {
        pass,
        files: vec![
            csv_rows("checks.csv", &checks)?,
            json("checks.json", &checks)?,
        ],
    })
}

/// Reads a manifest back from a run directory.
pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_slice(&std::fs::read(
        dir.join("manifest.json"),
    )?)?)
}
