//! Command-line front end. Exit codes: 0 verified, 1 usage or input error,
//! 2 unverified result or failing self-test.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::blockstruct::{parse_structure, BlockStructure};
use crate::error::MuError;
use crate::io::{certificate_to_json, parse_delta_or_certificate, parse_matrix, report_to_json, DeltaInput};
use crate::oracle::{grid_mu_tiny, sample_lower_bound, verify_certificate, DEFAULT_VERIFY_THRESHOLD};
use crate::outer::{compute_lower_bound, Certificate, OuterConfig, StartPolicy};
use crate::par::Exec;
use crate::{selftest, CMat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNVERIFIED: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "mubound", version, about = "Lower bounds for the structured singular value via gradient flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a lower bound and a destabilizing perturbation
    Solve(SolveArgs),
    /// Check a perturbation or a certificate produced by `solve`
    Verify(VerifyArgs),
    /// Independent estimates: random sampling and, for tiny structures, a grid
    Oracle(OracleArgs),
    /// Run the bundled regression fixtures and property checks
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Matrix JSON: {"n": n, "re": [[...]], "im": [[...]]}
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Block structure, e.g. "rs:2,cs:1,cf:3"
    #[arg(long)]
    pub structure: String,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Initial level; defaults to the first-order estimate
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Number of eigenvector starts
    #[arg(long)]
    pub starts: Option<usize>,
    /// Extra starting perturbation (perturbation JSON)
    #[arg(long)]
    pub init_delta: Option<PathBuf>,
    /// Run the outer iteration from every start instead of the best one
    #[arg(long)]
    pub all_starts: bool,
    /// Disable data parallelism
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Perturbation JSON, or a certificate written by `solve`
    #[arg(long)]
    pub delta: PathBuf,
    /// Level ε; required for a bare perturbation, overrides a certificate's
    #[arg(long)]
    pub eps: Option<f64>,
    /// Must match the structure recorded in the file when given
    #[arg(long)]
    pub structure: Option<String>,
    #[arg(long, default_value_t = DEFAULT_VERIFY_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub structure: String,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Also run the exhaustive grid (at most two scalar blocks)
    #[arg(long)]
    pub grid: bool,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory of fixture matrices overriding the embedded copies
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub output: OutputFormat,
}

struct Failure(String);

impl From<MuError> for Failure {
    fn from(e: MuError) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = std::result::Result<i32, Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> std::result::Result<CMat, Failure> {
    parse_matrix(&read(path)?).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn structure_for(text: &str, m: &CMat) -> std::result::Result<BlockStructure, Failure> {
    let s = parse_structure(text)?;
    s.check_dim(m.nrows())?;
    Ok(s)
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn text_certificate(c: &Certificate) -> String {
    let mut out = format!(
        "lower bound  {:.12}\neps_f        {:.12}\nresidual     {:.3e}\nverified     {}\nmode         {:?}\nstart        {}\n",
        c.lower_bound, c.eps_f, c.residual, c.verified, c.mode, c.start
    );
    out.push_str("history\n");
    for (k, h) in c.history.iter().enumerate() {
        out.push_str(&format!(
            "  {k:>3}  {:<9}  eps {:.12}  objective {:.6e}  inner {:>5} ({:?})\n",
            format!("{:?}", h.step).to_lowercase(),
            h.eps,
            h.objective,
            h.inner_steps,
            h.termination
        ));
    }
    for n in &c.notes {
        out.push_str(&format!("note: {n}\n"));
    }
    out
}

fn solve(a: &SolveArgs, out: &mut dyn Write) -> Outcome {
    if !(a.tol > 0.0) {
        return Err(Failure("--tol must be positive".into()));
    }
    let m = load_matrix(&a.common.matrix)?;
    let s = structure_for(&a.structure, &m)?;
    let init_delta = match &a.init_delta {
        Some(p) => match parse_delta_or_certificate(&read(p)?)? {
            DeltaInput::Bare(ds, d) | DeltaInput::Certificate { structure: ds, delta: d, .. } => {
                if ds != s {
                    return Err(Failure(format!("--init-delta has structure '{ds}', expected '{s}'")));
                }
                Some(d)
            }
        },
        None => None,
    };
    if a.starts == Some(0) {
        return Err(Failure("--starts must be at least 1".into()));
    }
    let cfg = OuterConfig {
        tol: a.tol,
        eps0: a.eps0,
        i_max: a.starts,
        starts: if a.all_starts { StartPolicy::All } else { StartPolicy::BestAtEps0 },
        init_delta,
        exec: exec(a.sequential),
        seed: a.common.seed,
        ..OuterConfig::default()
    };
    let c = compute_lower_bound(&m, &s, &cfg)?;
    let text = match a.common.output {
        OutputFormat::Json => certificate_to_json(&c, &s) + "\n",
        OutputFormat::Text => text_certificate(&c),
    };
    out.write_all(text.as_bytes()).map_err(|e| Failure(e.to_string()))?;
    Ok(if c.verified { EXIT_OK } else { EXIT_UNVERIFIED })
}

fn verify(a: &VerifyArgs, out: &mut dyn Write) -> Outcome {
    let m = load_matrix(&a.common.matrix)?;
    let (s, delta, eps) = match parse_delta_or_certificate(&read(&a.delta)?)? {
        DeltaInput::Bare(s, d) => {
            let eps = a.eps.ok_or_else(|| Failure("--eps is required for a bare perturbation".into()))?;
            (s, d, eps)
        }
        DeltaInput::Certificate { structure, delta, eps_f } => (structure, delta, a.eps.unwrap_or(eps_f)),
    };
    if let Some(text) = &a.structure {
        let given = parse_structure(text)?;
        if given != s {
            return Err(Failure(format!("structure '{given}' does not match '{s}' in {}", a.delta.display())));
        }
    }
    s.check_dim(m.nrows())?;
    let r = verify_certificate(&m, &s, eps, &delta, a.threshold);
    let text = match a.common.output {
        OutputFormat::Json => report_to_json(&r) + "\n",
        OutputFormat::Text => {
            let mut t = format!(
                "eps          {:.12}\nresidual     {:.3e}\n‖Δ‖₂         {:.12}\nadmissible   {}\nverified     {}\n",
                r.eps, r.singularity_residual, r.delta_norm, r.admissibility, r.verified
            );
            for n in &r.notes {
                t.push_str(&format!("note: {n}\n"));
            }
            t
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| Failure(e.to_string()))?;
    Ok(if r.verified { EXIT_OK } else { EXIT_UNVERIFIED })
}

fn oracle(a: &OracleArgs, out: &mut dyn Write) -> Outcome {
    let m = load_matrix(&a.common.matrix)?;
    let s = structure_for(&a.structure, &m)?;
    let r = sample_lower_bound(&m, &s, a.trials, a.common.seed, exec(a.sequential))?;
    let grid = if a.grid { Some(grid_mu_tiny(&m, &s)?) } else { None };
    let bound = if r.best_eps.is_finite() { Some(1.0 / r.best_eps) } else { None };
    let text = match a.common.output {
        OutputFormat::Json => {
            let v = json!({
                "trials": r.trials,
                "hits": r.hits,
                "sampled_best_eps": r.best_eps.is_finite().then_some(r.best_eps),
                "sampled_lower_bound": bound,
                "grid_mu": grid,
            });
            serde_json::to_string_pretty(&v).expect("serializes") + "\n"
        }
        OutputFormat::Text => {
            let mut t = format!("trials       {}\nhits         {}\n", r.trials, r.hits);
            match bound {
                Some(b) => t.push_str(&format!("sampled eps  {:.12}\nsampled mu ≥ {:.12}\n", r.best_eps, b)),
                None => t.push_str("no sampled ray reached singularity\n"),
            }
            if let Some(g) = grid {
                t.push_str(&format!("grid mu      {g:.12}\n"));
            }
            t
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| Failure(e.to_string()))?;
    Ok(EXIT_OK)
}

fn run_selftest(a: &SelftestArgs, out: &mut dyn Write) -> Outcome {
    let rows = selftest::run(a.seed, a.fixtures.as_deref());
    let failed = rows.iter().filter(|r| !r.passed).count();
    let text = match a.output {
        OutputFormat::Json => serde_json::to_string_pretty(&json!({ "rows": rows, "failed": failed })).expect("serializes") + "\n",
        OutputFormat::Text => {
            let mut t = String::new();
            for r in &rows {
                t.push_str(&format!("{}  {:<34} {}\n", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail));
            }
            t.push_str(&format!("{} passed, {failed} failed\n", rows.len() - failed));
            t
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| Failure(e.to_string()))?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_UNVERIFIED })
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let informational = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            let _ = if informational { write!(out, "{e}") } else { write!(err, "{e}") };
            return if informational { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Oracle(a) => oracle(a, out),
        Command::Selftest(a) => run_selftest(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}
