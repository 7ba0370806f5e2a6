use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use md4sat::attack::{attack, verify_preimage};
use md4sat::campaign::{run_campaign, sample_hashes, CampaignPlan};
use md4sat::config::{parse_hash, parse_switches, Config};
use md4sat::dimacs::{export_dimacs, import_dimacs, write_variable_map, VariableMapFile};
use md4sat::search::{self, read_log, Deadline, Screener};
use md4sat::solver::{exit_code, write_competition_output, EmbeddedSession, SolverSession};
use md4sat_core::relaxation::{format_steps, RelaxedTemplate, SwitchVector};
use md4sat_core::{MessageBlock, MuEvaluator, MuOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// SAT-based preimage attacks on step-reduced MD4 with switchable
/// relaxation constraints.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the gated MD4-k template as DIMACS plus a JSON variable map.
    Encode(EncodeArgs),
    /// Print mu(lambda): input bits fixed by unit propagation.
    Mu(MuArgs),
    /// Tabu search for constraint vectors with high mu.
    Search(SearchArgs),
    /// Solve one preimage instance and verify the answer.
    Attack(AttackArgs),
    /// Attack a seeded sample of random hash values.
    Campaign(CampaignArgs),
    /// Check a preimage against the reference implementation.
    Verify(VerifyArgs),
    /// Solve a DIMACS file with the embedded solver; competition output.
    #[command(hide = true)]
    DimacsSolve {
        cnf: PathBuf,
        #[arg(long, default_value_t = 600.0)]
        limit: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Number of MD4 steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Constant K the active chaining values are fixed to (decimal or 0x hex).
    #[arg(long, value_parser = parse_u32)]
    constant: Option<u32>,
}

#[derive(Args)]
struct SolverArgs {
    /// `embedded` (CaDiCaL), `minisat` or `subprocess`.
    #[arg(long)]
    backend: Option<String>,
    /// External DIMACS solver for the subprocess backend.
    #[arg(long)]
    solver_path: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    common: Common,
    /// Output CNF; the variable map goes next to it as `<stem>.map.json`.
    #[arg(long)]
    out: PathBuf,
    /// Pin the outputs to this hash (32 hex chars, `zeros` or `ones`).
    #[arg(long)]
    hash: Option<String>,
    /// Append the switch assignment for this vector as unit clauses.
    #[arg(long)]
    lambda: Option<String>,
}

#[derive(Args)]
struct MuArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    hash: Option<String>,
    /// 0/1 string or one of dobbertin, de, rho1, rho2, zero.
    #[arg(long)]
    lambda: String,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    hash: Option<String>,
    /// Start point: named vector, 0/1 string or `random`.
    #[arg(long)]
    start: Option<String>,
    /// Total search time in seconds.
    #[arg(long)]
    limit: Option<f64>,
    /// Screening time per point in seconds; 0 disables screening.
    #[arg(long)]
    screen_limit: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Replay the evaluations of an earlier search log.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    hash: Option<String>,
    #[arg(long)]
    lambda: String,
    /// Solver time limit in seconds.
    #[arg(long)]
    limit: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also store the instance as DIMACS in the run directory.
    #[arg(long)]
    save_cnf: bool,
}

#[derive(Args)]
struct CampaignArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverArgs,
    /// Number of random hash values.
    #[arg(short, long)]
    n: usize,
    #[arg(long)]
    lambda: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Solver time limit per instance in seconds.
    #[arg(long)]
    limit: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    hash: String,
    /// 128 hex characters.
    #[arg(long)]
    preimage: String,
    /// Also check that every step active in this vector has value K.
    #[arg(long)]
    lambda: Option<String>,
}

fn parse_u32(s: &str) -> Result<u32, String> {
    match s.strip_prefix("0x") {
        Some(h) => u32::from_str_radix(h, 16),
        None => s.parse(),
    }
    .map_err(|e| e.to_string())
}

impl Common {
    fn apply(&self, c: &mut Config) {
        if let Some(s) = self.steps {
            c.steps = s;
        }
        if let Some(k) = self.constant {
            c.constant = k;
        }
    }
}

impl SolverArgs {
    fn apply(&self, c: &mut Config) {
        if let Some(b) = &self.backend {
            c.backend = b.clone();
        }
        if let Some(p) = &self.solver_path {
            c.solver_path = Some(p.clone());
        }
    }
}

fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
    if let Some(v) = value {
        *slot = v.clone();
    }
}

fn template(c: &Config) -> Result<RelaxedTemplate> {
    RelaxedTemplate::new(c.steps, c.constant).context("building the template")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Encode(a) => {
            a.common.apply(&mut config);
            config.validate()?;
            encode(&config, &a)?;
        }
        Command::Mu(a) => {
            a.common.apply(&mut config);
            set(&mut config.hash, &a.hash);
            config.validate()?;
            let t = template(&config)?;
            let cnf = t.with_hash(&config.target()?);
            let lambda = parse_switches(&a.lambda, t.q())?;
            match MuEvaluator::new(&cnf, &t.vars).mu(&lambda)? {
                MuOutcome::Score(mu) => println!("{mu}"),
                MuOutcome::Conflict => println!("conflict"),
            }
        }
        Command::Search(a) => {
            a.common.apply(&mut config);
            a.solver.apply(&mut config);
            set(&mut config.hash, &a.hash);
            set(&mut config.start, &a.start);
            set(&mut config.seed, &a.seed);
            set(&mut config.out_dir, &a.out_dir);
            set(&mut config.screen_limit_secs, &a.screen_limit);
            if a.limit.is_some() {
                config.search_limit_secs = a.limit;
            }
            config.validate()?;
            run_search(&config, a.resume.as_deref())?;
        }
        Command::Attack(a) => {
            a.common.apply(&mut config);
            a.solver.apply(&mut config);
            set(&mut config.hash, &a.hash);
            set(&mut config.attack_limit_secs, &a.limit);
            set(&mut config.out_dir, &a.out_dir);
            config.validate()?;
            let t = template(&config)?;
            let lambda = parse_switches(&a.lambda, t.q())?;
            let hash = config.target()?;
            let dir = config.create_run_dir("attack")?;
            if a.save_cnf {
                let cnf = t.with_hash(&hash);
                export_dimacs(&dir.join("instance.cnf"), &cnf, &t.assumptions(&lambda)?)?;
            }
            let backend = config.backend()?;
            let limit = Duration::from_secs_f64(config.attack_limit_secs);
            let result = attack(&t, &hash, &lambda, limit, |cnf| backend.open(cnf))?;
            write_text(&dir.join("result.json"), &(serde_json::to_string_pretty(&result)? + "\n"))?;
            println!("{result}");
            eprintln!("results in {}", dir.display());
        }
        Command::Campaign(a) => {
            a.common.apply(&mut config);
            a.solver.apply(&mut config);
            set(&mut config.seed, &a.seed);
            set(&mut config.campaign_limit_secs, &a.limit);
            set(&mut config.workers, &a.workers);
            set(&mut config.out_dir, &a.out_dir);
            config.validate()?;
            let t = template(&config)?;
            let lambda = parse_switches(&a.lambda, t.q())?;
            let plan = CampaignPlan {
                lambda,
                hashes: sample_hashes(config.seed, a.n),
                seed: config.seed,
                limit: Duration::from_secs_f64(config.campaign_limit_secs),
                backend: config.backend()?,
                workers: config.workers,
            };
            let dir = config.create_run_dir("campaign")?;
            let n = a.n;
            let report = run_campaign(&t, &plan, &|i, r| {
                eprintln!(
                    "[{:>4}/{n}] {} {:<7} {:>8.2} s",
                    i + 1,
                    r.hash,
                    r.status.to_string(),
                    r.wall_time_secs
                );
            })?;
            write_text(&dir.join("report.json"), &(report.to_json()? + "\n"))?;
            let table = report.table();
            write_text(&dir.join("report.txt"), &(table.clone() + "\n"))?;
            println!("{table}");
            eprintln!("results in {}", dir.display());
        }
        Command::Verify(a) => {
            a.common.apply(&mut config);
            config.validate()?;
            let hash = parse_hash(&a.hash)?;
            let block = MessageBlock::from_hex(&a.preimage)?;
            let q = config.steps.saturating_sub(8);
            let lambda = match &a.lambda {
                Some(l) => parse_switches(l, q)?,
                None => SwitchVector::zeros(q),
            };
            match verify_preimage(&block, &hash, config.steps, &lambda, config.constant) {
                Ok(()) => println!("match"),
                Err(e) => {
                    println!("mismatch: {e}");
                    return Ok(ExitCode::from(1));
                }
            }
        }
        Command::DimacsSolve { cnf, limit } => {
            let cnf = import_dimacs(&cnf)?;
            if !(limit > 0.0) {
                bail!("limit must be positive");
            }
            let verdict = EmbeddedSession::new(&cnf).solve(&[], Duration::from_secs_f64(limit))?;
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            writeln!(lock, "c {}", verdict.solver)?;
            write_competition_output(&mut lock, &verdict)?;
            lock.flush()?;
            return Ok(ExitCode::from(exit_code(verdict.status) as u8));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn encode(config: &Config, a: &EncodeArgs) -> Result<()> {
    let t = template(config)?;
    let cnf = match &a.hash {
        Some(h) => t.with_hash(&parse_hash(h)?),
        None => t.cnf.clone(),
    };
    let units = match &a.lambda {
        Some(l) => t.assumptions(&parse_switches(l, t.q())?)?,
        None => Vec::new(),
    };
    export_dimacs(&a.out, &cnf, &units)?;
    let map_path = a.out.with_extension("map.json");
    write_variable_map(
        &map_path,
        &VariableMapFile {
            steps: config.steps,
            constant: config.constant,
            vars: t.vars.clone(),
        },
    )?;
    eprintln!(
        "MD4-{}: {} variables, {} clauses -> {}, {}",
        config.steps,
        cnf.num_vars(),
        cnf.num_clauses() + units.len(),
        a.out.display(),
        map_path.display()
    );
    Ok(())
}

fn run_search(config: &Config, resume: Option<&Path>) -> Result<()> {
    let t = template(config)?;
    let hash = config.target()?;
    let cnf = t.with_hash(&hash);
    let start = match config.start.as_str() {
        "random" => {
            let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
            SwitchVector::from_mask(t.q(), rng.random())
        }
        s => parse_switches(s, t.q())?,
    };
    let session: Option<Box<dyn SolverSession>> = match config.screen_limit() {
        Some(_) => Some(config.backend()?.open(&cnf)?),
        None => None,
    };
    let mut screener = Screener::new(&t, &cnf, session, config.screen_limit().unwrap_or_default());
    if let Some(log) = resume {
        screener.replay(read_log(log)?);
    }
    let dir = config.create_run_dir("search")?;
    screener.log_to(&dir.join("search.jsonl"))?;
    let mut control = Deadline::new(config.search_limit()).with_progress(|e, t| {
        if e.record {
            eprintln!(
                "{t:>9.1} s  eval {:>6}  record {}  mu {}  steps {}",
                e.index,
                e.point,
                e.status.score().unwrap_or(0),
                format_steps(&e.point.active_steps())
            );
        }
    });
    let report = search::run(&hash, start, &mut screener, &mut control, config.shortlist)?;
    write_text(&dir.join("report.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let text = report.render();
    write_text(&dir.join("report.txt"), &text)?;
    print!("{text}");
    eprintln!("results in {}", dir.display());
    Ok(())
}
