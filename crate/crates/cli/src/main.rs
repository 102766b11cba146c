//! `entryexit`: solve, simulate and analyse an entry-exit industry model
//! described by a TOML file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use entryexit::equilibrium::{assemble_equilibrium, kac_check};
use entryexit::model::{validate_assumptions, Entrants};
use entryexit::tails::{gamma_invariance_experiment, k_sweep_csv, rank_size_csv, tail_analysis};
use entryexit::{Error, ModelConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "entryexit", version, about = "Stationary equilibrium of an entry-exit industry")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Output directory.
    #[arg(long, global = true, default_value = "./out")]
    out: PathBuf,
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Treat warnings (e.g. doubtful lifetime output) as failures.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model conditions and write assumptions.json.
    Validate { config: PathBuf },
    /// Solve for the stationary equilibrium.
    Equilibrium { config: PathBuf },
    /// Simulate firm lifecycles at the equilibrium and check the occupation decomposition.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
    },
    /// Theoretical and empirical tail index of the firm distribution.
    Tail {
        config: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
    /// Compare tail estimates across entrant distributions.
    Invariance {
        config: PathBuf,
        /// Comma-separated entrant laws, e.g. `baseline,lognormal:mu=-0.125:sigma=0.5`.
        #[arg(long, value_delimiter = ',', required = true)]
        entrants: Vec<String>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
}

const EXIT_INPUT: u8 = 2;
const EXIT_COMPUTE: u8 = 3;

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Syntax(_) | Error::Invalid(_) | Error::Assumption { .. } | Error::Grid(_) => EXIT_INPUT,
            _ => EXIT_COMPUTE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_COMPUTE,
            message: format!("io error: {e}"),
        }
    }
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    config_path: String,
    config_sha256: String,
    seed: u64,
    version: String,
    numerics: serde_json::Value,
    outputs: Vec<String>,
    verdict: Option<String>,
    warnings: Vec<String>,
    timings: Vec<(String, f64)>,
}

struct Run {
    out: PathBuf,
    manifest: Manifest,
    clock: Instant,
}

impl Run {
    fn start(command: &str, path: &Path, text: &str, cfg: &ModelConfig, out: &Path) -> Result<Run, Failure> {
        fs::create_dir_all(out)?;
        Ok(Run {
            out: out.to_path_buf(),
            manifest: Manifest {
                command: command.to_string(),
                config_path: path.display().to_string(),
                config_sha256: hex::encode(Sha256::digest(text.as_bytes())),
                seed: cfg.numerics.seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                numerics: serde_json::to_value(&cfg.numerics).expect("numerics serialize"),
                outputs: Vec::new(),
                verdict: None,
                warnings: Vec::new(),
                timings: Vec::new(),
            },
            clock: Instant::now(),
        })
    }

    fn lap(&mut self, step: &str) {
        let t = self.clock.elapsed().as_secs_f64();
        log(&format!("{step}: {t:.3}s"));
        self.manifest.timings.push((step.to_string(), t));
        self.clock = Instant::now();
    }

    fn write(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        fs::write(self.out.join(name), body)?;
        self.manifest.outputs.push(name.to_string());
        log(&format!("wrote {}", self.out.join(name).display()));
        Ok(())
    }

    fn finish(mut self) -> Result<(), Failure> {
        let body = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        let name = format!("{}_manifest.json", self.manifest.command);
        fs::write(self.out.join(&name), body)?;
        self.manifest.outputs.push(name);
        Ok(())
    }
}

fn log(msg: &str) {
    eprintln!("[entryexit] {msg}");
}

fn load(path: &Path, seed: u64) -> Result<(String, ModelConfig), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: if e.kind() == std::io::ErrorKind::NotFound {
            format!("file not found: {}", path.display())
        } else {
            format!("cannot read {}: {e}", path.display())
        },
    })?;
    let mut cfg = entryexit::parse_model(&text)?;
    cfg.numerics.seed = seed;
    Ok((text, cfg))
}

fn meta(cfg: &ModelConfig, extra: &[String]) -> Vec<String> {
    let mut m = vec![format!("seed = {}", cfg.numerics.seed)];
    m.extend_from_slice(extra);
    m
}

fn json(x: &impl Serialize) -> String {
    serde_json::to_string_pretty(x).expect("serializable") + "\n"
}

fn cmd_validate(g: &Global, path: &Path) -> Result<(), Failure> {
    let (text, cfg) = load(path, g.seed)?;
    let mut run = Run::start("validate", path, &text, &cfg, &g.out)?;
    let report = validate_assumptions(&cfg);
    run.lap("assumptions");
    run.write("assumptions.json", &json(&report))?;
    let failures = report.failures();
    run.manifest.verdict = Some(if failures.is_empty() {
        "pass".into()
    } else {
        format!("fail: {}", failures.join(", "))
    });
    run.finish()?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_INPUT,
            message: format!("conditions failed: {}", failures.join(", ")),
        })
    }
}

fn cmd_equilibrium(g: &Global, path: &Path) -> Result<(), Failure> {
    let (text, cfg) = load(path, g.seed)?;
    let mut run = Run::start("equilibrium", path, &text, &cfg, &g.out)?;
    let report = validate_assumptions(&cfg);
    for k in report.failures() {
        run.manifest.warnings.push(format!("condition {k} failed: {}", report.checks[&k].evidence));
    }
    run.lap("assumptions");
    let eq = assemble_equilibrium(&cfg)?;
    run.lap("solve");
    run.write("equilibrium.json", &(eq.to_json() + "\n"))?;
    let comments = meta(
        &cfg,
        &[
            format!("p_star = {}", entryexit::csv::num(eq.p_star)),
            format!("phi_bar = {}", entryexit::csv::num(eq.phi_bar)),
        ],
    );
    run.write("mu_star.csv", &eq.mu.to_csv(&comments))?;
    run.manifest.warnings.extend(eq.warnings.iter().cloned());
    run.manifest.verdict = Some(format!("lifetime output {}", eq.lifetime_output.verdict));
    let doubtful = !eq.lifetime_output.finite;
    run.finish()?;
    if g.strict && doubtful {
        return Err(Failure {
            code: EXIT_COMPUTE,
            message: format!("lifetime output {} (--strict)", eq.lifetime_output.verdict),
        });
    }
    Ok(())
}

fn cmd_simulate(g: &Global, path: &Path, paths: u64) -> Result<(), Failure> {
    let (text, cfg) = load(path, g.seed)?;
    let mut run = Run::start("simulate", path, &text, &cfg, &g.out)?;
    let eq = assemble_equilibrium(&cfg)?;
    run.lap("solve");
    let (kac, occ) = kac_check(&eq, &cfg, paths, g.seed)?;
    run.lap("simulate");
    let comments = meta(&cfg, &[format!("paths = {paths}"), format!("censored = {}", occ.censored)]);
    run.write("occupation.csv", &occ.to_csv(&comments))?;
    run.write("kac.json", &json(&kac))?;
    run.manifest.verdict = Some(format!(
        "kac product {} (se {}), tv {}",
        kac.kac_product, kac.kac_se, kac.tv_distance
    ));
    if kac.censored > 0 {
        run.manifest.warnings.push(format!("{} of {paths} paths censored at t_max", kac.censored));
    }
    let censored = kac.censored > 0;
    run.finish()?;
    if g.strict && censored {
        return Err(Failure {
            code: EXIT_COMPUTE,
            message: "censored paths (--strict)".into(),
        });
    }
    Ok(())
}

fn cmd_tail(g: &Global, path: &Path, samples: u64) -> Result<(), Failure> {
    let (text, cfg) = load(path, g.seed)?;
    let mut run = Run::start("tail", path, &text, &cfg, &g.out)?;
    let report = tail_analysis(&cfg, samples, g.seed)?;
    run.lap("tail");
    for w in &report.warnings {
        log(&format!("warning: {w}"));
    }
    run.write("tail_report.json", &(report.to_json() + "\n"))?;
    let comments = meta(&cfg, &[format!("samples = {}", report.sample.n)]);
    run.write("rank_size.csv", &rank_size_csv(&report.rank_size, 10_000, &comments))?;
    run.write("k_sweep.csv", &k_sweep_csv(&report.k_sweep, &comments))?;
    run.write("cross_section.csv", &report.panel.to_csv())?;
    run.manifest.warnings.extend(report.warnings.iter().cloned());
    run.manifest.verdict = Some(match &report.hill {
        Some(h) => format!("alpha_theory {} hill {} (se {}, k {})", report.alpha_theory, h.alpha, h.se, h.k),
        None => format!("alpha_theory {}; Hill skipped", report.alpha_theory),
    });
    run.finish()
}

fn cmd_invariance(g: &Global, path: &Path, names: &[String], samples: u64) -> Result<(), Failure> {
    let (text, cfg) = load(path, g.seed)?;
    let mut alternatives = Vec::new();
    for name in names {
        let e = if name.trim() == "baseline" {
            cfg.entrants.clone()
        } else {
            Entrants::from_label(name)?
        };
        alternatives.push((name.trim().to_string(), e));
    }
    let mut run = Run::start("invariance", path, &text, &cfg, &g.out)?;
    let table = gamma_invariance_experiment(&cfg, &alternatives, samples, g.seed)?;
    run.lap("experiment");
    let comments = meta(
        &cfg,
        &[
            format!("samples = {samples}"),
            format!("alpha_theory = {}", entryexit::csv::num(table.alpha_theory)),
            format!("verdict = {}", table.verdict),
        ],
    );
    run.write("invariance.csv", &table.to_csv(&comments))?;
    run.manifest.verdict = Some(format!("{} (max pairwise z {})", table.verdict, table.max_pair_z));
    for r in table.rows.iter().filter(|r| r.status != "ok") {
        run.manifest.warnings.push(format!("{}: {}", r.name, r.status));
    }
    let none = table.successes() == 0;
    run.finish()?;
    if none {
        return Err(Failure {
            code: EXIT_COMPUTE,
            message: "every invariance row failed".into(),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    if let Some(n) = g.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log(&format!("cannot size thread pool: {e}"));
            return ExitCode::from(EXIT_INPUT);
        }
    }
    let result = match &cli.command {
        Command::Validate { config } => cmd_validate(g, config),
        Command::Equilibrium { config } => cmd_equilibrium(g, config),
        Command::Simulate { config, paths } => cmd_simulate(g, config, *paths),
        Command::Tail { config, samples } => cmd_tail(g, config, *samples),
        Command::Invariance {
            config,
            entrants,
            samples,
        } => cmd_invariance(g, config, entrants, *samples),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
