//! Subcommand implementations. Each run writes one output directory.

use crate::manifest::{sha256_hex, Manifest, RunDir};
use crate::suite;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pointhom::forms::{distance_table, gamma_limsup_gap, gamma_table};
use pointhom::grid::{Grid, GridField};
use pointhom::kernels::QuadratureSpec;
use pointhom::measures::{measure_table, measures_study};
use pointhom::resolvent::{gap_table, mean_gaps, resolvent_convergence_gap, KreinOptions};
use pointhom::sampling::{sample_points, PointCloud};
use pointhom::scenario::{validate, Scenario};
use pointhom::spectra::{convergence_study, point_spectrum, ScanOptions, StudyOptions};
use pointhom::table::{fmt_f64, Table};
use pointhom::xi::xi_scan;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "pointhom", version, about = "Zero-range scatterer ensembles and their homogenization limit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    /// Base seed; overrides the scenario file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Command-specific numerical tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Allow the harmonic-background Krein resolvent.
    #[arg(long, global = true)]
    pub slow: bool,
    /// Output directory; defaults to `runs/<command>`.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file against every constraint.
    Validate { scenario: PathBuf },
    /// Draw one cloud and write it as CSV.
    Sample {
        scenario: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Coerciveness diagnostics of Xi along a lambda grid.
    XiScan {
        scenario: PathBuf,
        #[arg(long)]
        n: usize,
        /// Comma-separated lambdas; default 2^(k/4), k = 0..24.
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
    },
    /// Point spectrum of H_N below the spectral bottom.
    Spectrum {
        scenario: PathBuf,
        #[arg(long, conflicts_with = "points")]
        n: Option<usize>,
        /// Cloud CSV (`j,x1,...,xd,alpha`) instead of sampling.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        e_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        e_max: Option<f64>,
    },
    /// Ground-state convergence study against the grid limit operator.
    Converge {
        scenario: PathBuf,
        #[command(flatten)]
        ladder: Ladder,
        #[arg(long, default_value_t = 8.0)]
        l: f64,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = -4.0)]
        e_min: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = -1e-3)]
        e_max: f64,
    },
    /// Quadratic forms along the recovery sequence of a Gaussian.
    Gamma {
        scenario: PathBuf,
        #[command(flatten)]
        ladder: Ladder,
        /// Default: coercive onset over N = 128, 1024 plus one.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0.35)]
        sigma: f64,
        #[arg(long, default_value_t = 3.0)]
        l: f64,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
    },
    /// Krein resolvent against the limit resolvent on three Gaussians.
    ResolventGap {
        scenario: PathBuf,
        #[command(flatten)]
        ladder: Ladder,
        #[arg(long, default_value_t = 3.0)]
        lambda: f64,
        #[arg(long, default_value_t = 4.0)]
        l: f64,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
    },
    /// Riesz energies and the zeta0 pair sum against continuum integrals.
    Measures {
        scenario: PathBuf,
        #[command(flatten)]
        ladder: Ladder,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        riesz: Vec<f64>,
    },
    /// Run the acceptance criteria.
    Verify {
        /// Comma-separated criterion ids; default all.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Ladder {
    #[arg(long, value_delimiter = ',', default_value = "128,1024")]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
}

/// The scenario violates a constraint or does not parse.
#[derive(Debug, thiserror::Error)]
#[error("scenario rejected: {0}")]
pub struct Rejected(pub String);

/// Some acceptance criteria failed.
#[derive(Debug, thiserror::Error)]
#[error("acceptance criteria failed: {0:?}")]
pub struct CriteriaFailed(pub Vec<u8>);

/// 2 for rejected scenarios, 3 for numerical non-convergence, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<Rejected>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<pointhom::Error>() {
            match e {
                pointhom::Error::NonConvergence { .. }
                | pointhom::Error::Tolerance { .. }
                | pointhom::Error::NearSingular(_) => return 3,
                pointhom::Error::Parse(_) => return 2,
                _ => {}
            }
        }
    }
    1
}

struct Loaded {
    sc: Scenario,
    hash: String,
}

fn load(path: &PathBuf, flags: &Flags) -> Result<Loaded> {
    let bytes = std::fs::read(path).with_context(|| format!("reading scenario {}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Rejected(format!("{} is not UTF-8", path.display())))?;
    let mut sc = Scenario::from_toml_str(&text).map_err(|e| Rejected(e.to_string()))?;
    if let Some(s) = flags.seed {
        sc.seed = s;
    }
    Ok(Loaded {
        sc,
        hash: sha256_hex(&bytes),
    })
}

fn check(sc: &Scenario) -> Result<()> {
    let rep = validate(sc);
    if rep.is_empty() {
        return Ok(());
    }
    let msgs: Vec<String> = rep.violations.iter().map(|v| format!("{}: {}", v.assumption, v.message)).collect();
    Err(Rejected(msgs.join("; ")).into())
}

fn flag_map(flags: &Flags) -> std::collections::BTreeMap<String, Value> {
    let mut m = std::collections::BTreeMap::new();
    m.insert("seed".into(), json!(flags.seed));
    m.insert("tol".into(), json!(flags.tol));
    m.insert("slow".into(), json!(flags.slow));
    m
}

fn start(command: &str, flags: &Flags, loaded: Option<&Loaded>) -> Result<RunDir> {
    let mut m = Manifest::new(command);
    m.flags = flag_map(flags);
    if let Some(l) = loaded {
        m.scenario_sha256 = Some(l.hash.clone());
        m.seeds = vec![l.sc.seed];
    }
    let root = flags.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(command));
    RunDir::create(root, m)
}

fn seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|k| base + k).collect()
}

fn default_lambdas() -> Vec<f64> {
    (0..=24).map(|k| 2f64.powf(k as f64 / 4.0)).collect()
}

fn gaussian(grid: Grid, c: pointhom::Point, w: f64) -> GridField {
    GridField::from_fn(grid, |x| {
        let r2: f64 = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum();
        (-r2 / (2.0 * w * w)).exp()
    })
}

/// Runs one command inside a pool of `flags.threads` workers.
pub fn run(cli: Cli) -> Result<()> {
    match cli.flags.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build()?;
            pool.install(|| dispatch(cli.command, &cli.flags))
        }
        None => dispatch(cli.command, &cli.flags),
    }
}

fn dispatch(cmd: Command, flags: &Flags) -> Result<()> {
    match cmd {
        Command::Validate { scenario } => {
            let l = load(&scenario, flags)?;
            let mut run = start("validate", flags, Some(&l))?;
            let rep = validate(&l.sc);
            run.manifest.results.insert("violations".into(), serde_json::to_value(&rep.violations)?);
            run.finish()?;
            check(&l.sc)?;
            println!("scenario is valid");
            Ok(())
        }
        Command::Sample { scenario, n } => {
            let l = load(&scenario, flags)?;
            check(&l.sc)?;
            let mut run = start("sample", flags, Some(&l))?;
            let t = Instant::now();
            let cloud = sample_points(&l.sc, n, l.sc.seed)?;
            run.manifest.timings.insert("sample".into(), t.elapsed().as_secs_f64());
            run.table("cloud.csv", &cloud.to_table())?;
            let pts: Vec<(f64, f64)> = cloud.positions.iter().map(|x| (x[0], x[1])).collect();
            run.plot("x1_x2.dat", "x1", "x2", &pts)?;
            run.manifest.results.insert("n".into(), json!(n));
            run.manifest
                .results
                .insert("min_pair_distance".into(), json!(cloud.min_pair_distance));
            run.finish()?;
            Ok(())
        }
        Command::XiScan { scenario, n, lambdas } => {
            let l = load(&scenario, flags)?;
            check(&l.sc)?;
            let mut run = start("xi-scan", flags, Some(&l))?;
            let lambdas = if lambdas.is_empty() { default_lambdas() } else { lambdas };
            let t = Instant::now();
            let cloud = sample_points(&l.sc, n, l.sc.seed)?;
            let s0 = l.sc.lambda0 * l.sc.lambda0;
            let rows = xi_scan(&cloud, &l.sc.background, s0, &lambdas, &QuadratureSpec::default())?;
            run.manifest.timings.insert("xi_scan".into(), t.elapsed().as_secs_f64());
            let mut tab = Table::new(&["N", "lambda", "min_eigenvalue_scaled", "offdiag_hs_norm_scaled"]);
            for r in &rows {
                tab.push(vec![
                    r.n.to_string(),
                    fmt_f64(r.lambda),
                    fmt_f64(r.min_eigenvalue_scaled),
                    fmt_f64(r.offdiag_hs_norm_scaled),
                ]);
            }
            run.table("xi_scan.csv", &tab)?;
            let pick = |f: fn(&pointhom::xi::ScanRow) -> f64| rows.iter().map(|r| (r.lambda, f(r))).collect::<Vec<_>>();
            run.plot("min_eigenvalue_scaled.dat", "lambda", "min_eigenvalue_scaled", &pick(|r| r.min_eigenvalue_scaled))?;
            run.plot("offdiag_hs_norm_scaled.dat", "lambda", "offdiag_hs_norm_scaled", &pick(|r| r.offdiag_hs_norm_scaled))?;
            run.finish()?;
            Ok(())
        }
        Command::Spectrum {
            scenario,
            n,
            points,
            e_min,
            e_max,
        } => {
            let l = load(&scenario, flags)?;
            let cloud = match (n, points) {
                (_, Some(p)) => PointCloud::read_csv(&p, l.sc.seed).with_context(|| format!("reading {}", p.display()))?,
                (Some(n), None) => {
                    check(&l.sc)?;
                    sample_points(&l.sc, n, l.sc.seed)?
                }
                (None, None) => bail!("spectrum needs --n or --points"),
            };
            let mut run = start("spectrum", flags, Some(&l))?;
            let bottom = l.sc.background.spectral_bottom(cloud.d);
            let e_max = e_max.unwrap_or(bottom - 1e-6);
            let mut opts = ScanOptions::default();
            if let Some(t) = flags.tol {
                opts.tol = t;
            }
            let t = Instant::now();
            let rep = point_spectrum(&cloud, &l.sc.background, l.sc.lambda0 * l.sc.lambda0, e_min, e_max, &opts)?;
            run.manifest.timings.insert("point_spectrum".into(), t.elapsed().as_secs_f64());
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            run.table("spectrum.csv", &suite::spectrum_table(&rep))?;
            run.text("spectrum.json", &(serde_json::to_string_pretty(&rep)? + "\n"))?;
            let pts: Vec<(f64, f64)> = rep.eigenvalues.iter().enumerate().map(|(k, e)| (k as f64, *e)).collect();
            run.plot("eigenvalues.dat", "k", "E", &pts)?;
            run.manifest.results.insert("eigenvalues".into(), json!(rep.eigenvalues));
            run.finish()?;
            Ok(())
        }
        Command::Converge {
            scenario,
            ladder,
            l: half,
            h,
            e_min,
            e_max,
        } => {
            let l = load(&scenario, flags)?;
            check(&l.sc)?;
            let mut run = start("converge", flags, Some(&l))?;
            run.manifest.seeds = seeds(l.sc.seed, ladder.seeds);
            let opts = StudyOptions {
                l: half,
                h,
                e_min,
                e_max,
                tol: flags.tol.unwrap_or(1e-7),
                grid_tol: 1e-5,
                q: QuadratureSpec::default(),
            };
            let t = Instant::now();
            let table = convergence_study(&l.sc, &ladder.n_list, ladder.seeds, &opts)?;
            run.manifest.timings.insert("convergence_study".into(), t.elapsed().as_secs_f64());
            run.table("convergence.csv", &table.to_table())?;
            let summary = table.summary();
            let pts: Vec<(f64, f64)> = summary.iter().map(|s| (s.n as f64, s.gap)).collect();
            run.plot("gap_vs_n.dat", "N", "gap", &pts)?;
            run.manifest.results.insert("e1_hinf".into(), json!(table.e1_hinf));
            run.manifest.results.insert(
                "summary".into(),
                json!(summary
                    .iter()
                    .map(|s| json!({"N": s.n, "mean": s.mean, "std": s.std, "gap": s.gap, "flagged": s.flagged}))
                    .collect::<Vec<_>>()),
            );
            run.finish()?;
            Ok(())
        }
        Command::Gamma {
            scenario,
            ladder,
            lambda,
            sigma,
            l: half,
            h,
        } => {
            let l = load(&scenario, flags)?;
            check(&l.sc)?;
            let mut run = start("gamma", flags, Some(&l))?;
            run.manifest.seeds = seeds(l.sc.seed, ladder.seeds);
            let t = Instant::now();
            let lambda = match lambda {
                Some(v) => v,
                None => suite::gamma_lambda(&l.sc)?,
            };
            let grid = Grid::new(l.sc.d, half, h)?;
            let psi = gaussian(grid, [0.0; 3], sigma);
            let rows = gamma_limsup_gap(&l.sc, &psi, &ladder.n_list, ladder.seeds, lambda, &QuadratureSpec::default())?;
            run.manifest.timings.insert("gamma_limsup_gap".into(), t.elapsed().as_secs_f64());
            run.table("gamma.csv", &gamma_table(&rows))?;
            run.table("distance.csv", &distance_table(&rows))?;
            let mut pts = Vec::new();
            for &n in &ladder.n_list {
                let g: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.gap()).collect();
                pts.push((n as f64, g.iter().sum::<f64>() / g.len() as f64));
            }
            run.plot("gap_vs_n.dat", "N", "mean_gap", &pts)?;
            run.manifest.results.insert("lambda".into(), json!(lambda));
            run.finish()?;
            Ok(())
        }
        Command::ResolventGap {
            scenario,
            ladder,
            lambda,
            l: half,
            h,
        } => {
            let l = load(&scenario, flags)?;
            check(&l.sc)?;
            let mut run = start("resolvent-gap", flags, Some(&l))?;
            run.manifest.seeds = seeds(l.sc.seed, ladder.seeds);
            let g = Grid::new(l.sc.d, half, h)?;
            let trials: Vec<(String, GridField)> = vec![
                ("g0".into(), gaussian(g, [0.0; 3], 0.5)),
                ("g1".into(), gaussian(g, [0.5, 0.0, 0.0], 0.4)),
                ("g2".into(), gaussian(g, [0.0, -0.3, 0.4], 0.6)),
            ];
            let mut opts = KreinOptions {
                allow_slow: flags.slow,
                ..KreinOptions::default()
            };
            if let Some(t) = flags.tol {
                opts.tol = t;
            }
            let t = Instant::now();
            let rows = resolvent_convergence_gap(&l.sc, &ladder.n_list, ladder.seeds, lambda, &trials, &opts)?;
            run.manifest.timings.insert("resolvent_convergence_gap".into(), t.elapsed().as_secs_f64());
            run.table("resolvent_gap.csv", &gap_table(&rows))?;
            let means = mean_gaps(&rows);
            for (id, _) in &trials {
                let pts: Vec<(f64, f64)> = means.iter().filter(|m| &m.1 == id).map(|m| (m.0 as f64, m.2)).collect();
                run.plot(&format!("gap_{id}.dat"), "N", "mean_gap", &pts)?;
            }
            run.finish()?;
            Ok(())
        }
        Command::Measures { scenario, ladder, riesz } => {
            let l = load(&scenario, flags)?;
            check(&l.sc)?;
            let mut run = start("measures", flags, Some(&l))?;
            run.manifest.seeds = seeds(l.sc.seed, ladder.seeds);
            let t = Instant::now();
            let rows = measures_study(&l.sc, &ladder.n_list, ladder.seeds, &riesz, flags.tol.unwrap_or(1e-6))?;
            run.manifest.timings.insert("measures_study".into(), t.elapsed().as_secs_f64());
            run.table("measures.csv", &measure_table(&rows))?;
            let mut names: Vec<String> = rows.iter().map(|r| r.quantity.clone()).collect();
            names.dedup();
            names.sort();
            names.dedup();
            for q in &names {
                let mut pts = Vec::new();
                for &n in &ladder.n_list {
                    let g: Vec<f64> = rows.iter().filter(|r| &r.quantity == q && r.n == n).map(|r| r.gap()).collect();
                    pts.push((n as f64, g.iter().sum::<f64>() / g.len() as f64));
                }
                run.plot(&format!("{}.dat", q.replace('=', "_")), "N", "mean_gap", &pts)?;
            }
            if let Some(r) = rows.first() {
                run.manifest.results.insert("continuum".into(), json!(r.oracle));
            }
            run.finish()?;
            Ok(())
        }
        Command::Verify { only } => {
            let ids: Vec<u8> = if only.is_empty() { suite::ALL.to_vec() } else { only };
            let mut run = start("verify", flags, None)?;
            run.manifest.seeds = vec![suite::ball_scenario().seed];
            let mut failed = Vec::new();
            println!("{:<4} {:<6} {}", "id", "result", "details");
            for id in ids {
                let out = suite::run(id)?;
                println!("{}", out.line());
                for (name, t) in &out.tables {
                    run.table(name, t)?;
                }
                run.manifest.oracles.extend(out.oracles.iter().cloned());
                run.manifest.timings.insert(format!("ac{id}"), out.seconds);
                run.manifest.results.insert(
                    format!("ac{id}"),
                    json!({ "passed": out.passed, "summary": out.summary, "values": out.results }),
                );
                if !out.passed {
                    failed.push(id);
                }
            }
            run.manifest.flagged = failed.clone();
            run.finish()?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CriteriaFailed(failed).into())
            }
        }
    }
}
