use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use wlfactor::driver::{factor_batch, factor_pipeline, run_wl, verify_against, verify_run, PipelineError, RunConfig, WlRun};
use wlfactor::scheme::{closed_subsets, family_generators, is_primitive, schurian_fixture, verify_scheme, Scheme, SchemeJson};
use wlfactor::FpPoly;

#[derive(Parser)]
#[command(name = "wlfactor", version, about = "Deterministic factoring of split polynomials over F_p")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Factor a polynomial, or every `p;coefficients` line of a batch file.
    Factor {
        #[command(flatten)]
        input: Input,
        /// Batch file, one instance per line; replaces --p/--poly.
        #[arg(long, conflicts_with_all = ["p", "poly"])]
        batch: Option<PathBuf>,
    },
    /// Recompute every stage from brute-force roots and report each check.
    Verify {
        #[command(flatten)]
        input: Input,
        /// Color set JSON to compare with the stable coloring.
        #[arg(long)]
        against: Option<PathBuf>,
    },
    /// Run up to WL refinement only and dump the stable color set.
    Wl {
        #[command(flatten)]
        input: Input,
    },
    /// Check a scheme: axioms, primitivity and closed subsets.
    Scheme {
        /// Scheme JSON file.
        #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
        file: Option<PathBuf>,
        /// Family spec such as `cyclic:3`, `dihedral:5`, `symmetric:4`.
        #[arg(long)]
        fixture: Option<String>,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Emit the scheme of a permutation group family.
    Fixture {
        spec: String,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    /// Field characteristic.
    #[arg(long)]
    p: Option<u64>,
    /// Coefficients, constant term first, e.g. `12,0,0,1`.
    #[arg(long, allow_hyphen_values = true)]
    poly: Option<String>,
    /// Run configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    json_out: Option<PathBuf>,
}

impl Input {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
                RunConfig::from_json_str(&text)?
            }
            None => RunConfig::default(),
        };
        cfg.with_env_override()
    }

    fn poly(&self, cfg: &RunConfig) -> Result<FpPoly, PipelineError> {
        let p = self.p.ok_or_else(|| PipelineError::ConfigInvalid("--p is required".into()))?;
        let text = self.poly.as_deref().ok_or_else(|| PipelineError::ConfigInvalid("--poly is required".into()))?;
        Ok(FpPoly::parse(cfg.field(p)?, text)?)
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Violation(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_internal() {
            Failure::Internal(e.into())
        } else {
            Failure::Violation(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Violation(e)
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display())),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e).context("writing stdout"),
            _ => Ok(()),
        },
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Factor { input, batch: Some(path) } => {
            let cfg = input.config()?;
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let lines: Vec<String> =
                text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect();
            let mut out = Vec::new();
            let mut internal = None;
            for (line, res) in lines.iter().zip(factor_batch(&lines, &cfg)) {
                out.push(match res {
                    Ok(run) => serde_json::to_string(&run.report).expect("report serializes"),
                    Err(e) => {
                        if e.is_internal() {
                            internal.get_or_insert_with(|| format!("{line}: {e}"));
                        }
                        json!({ "line": line, "error": e.to_string() }).to_string()
                    }
                });
            }
            emit(&out.join("\n"), input.json_out.as_deref())?;
            if let Some(msg) = internal {
                return Err(Failure::Internal(anyhow::anyhow!(msg)));
            }
        }
        Cmd::Factor { input, batch: None } => {
            let cfg = input.config()?;
            let g = input.poly(&cfg)?;
            let run = factor_pipeline(&g, &cfg)?;
            emit(&run.report.to_json_string(), input.json_out.as_deref())?;
        }
        Cmd::Verify { input, against } => {
            let cfg = input.config()?;
            let g = input.poly(&cfg)?;
            let report = match against {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    verify_against(&g, &cfg, &text)?
                }
                None => verify_run(&g, &cfg)?,
            };
            emit(&pretty(&report), input.json_out.as_deref())?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("check {} failed: {}", c.name, c.detail);
            }
            if !report.passed() {
                return Err(Failure::Violation(anyhow::anyhow!("verification failed")));
            }
        }
        Cmd::Wl { input } => {
            let cfg = input.config()?;
            let g = input.poly(&cfg)?;
            let (f, out) = run_wl(&g, &cfg)?;
            let value = match out {
                WlRun::Factor { stage, factor } => {
                    json!({ "normalized": f.to_text(), "stage": stage, "factor": factor.to_text() })
                }
                // Same shape `verify --against` reads back.
                WlRun::Stable { stable, .. } => serde_json::to_value(stable.colors.to_json()).expect("colors serialize"),
            };
            emit(&pretty(&value), input.json_out.as_deref())?;
        }
        Cmd::Scheme { file, fixture, json_out } => {
            let sch = match (file, fixture) {
                (Some(path), _) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let j: SchemeJson = serde_json::from_str(&text).context("parsing scheme JSON")?;
                    Scheme::from_json(&j).context("scheme rejected")?
                }
                (None, Some(spec)) => fixture_scheme(&spec)?,
                (None, None) => return Err(anyhow::anyhow!("one of --file or --fixture is required").into()),
            };
            let value = json!({
                "scheme": sch.to_json(),
                "primitivity": is_primitive(&sch),
                "closed_subsets": closed_subsets(&sch),
            });
            emit(&pretty(&value), json_out.as_deref())?;
        }
        Cmd::Fixture { spec, json_out } => {
            let sch = fixture_scheme(&spec)?;
            emit(&pretty(&sch.to_json()), json_out.as_deref())?;
        }
    }
    Ok(())
}

fn fixture_scheme(spec: &str) -> Result<Scheme> {
    let gens = family_generators(spec)?;
    if gens[0].len() < 2 {
        bail!("fixture needs at least 2 points");
    }
    Ok(verify_scheme(&schurian_fixture(&gens)?)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
