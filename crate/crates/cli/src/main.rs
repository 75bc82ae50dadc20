use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oracle_arena::games::GameId;
use oracle_arena::harness::{emit_results, run_experiment, ExperimentConfig, ExperimentKind, HarnessError, OracleKind, HEADER};
use oracle_arena::params::{Mode, Severity, Violation};
use oracle_arena::rmt::RmtCsvRow;
use oracle_arena::rng::default_seed;

#[derive(Parser)]
#[command(name = "oracle-arena", version, about = "Hard feasibility oracles, games and random-matrix experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Feasibility runs.
    Feas {
        #[command(subcommand)]
        action: FeasAction,
    },
    /// Game tournaments.
    Game {
        #[arg(value_parser = parse_game)]
        game: GameId,
        #[command(flatten)]
        common: Common,
    },
    /// Triangular-ensemble sweeps.
    Rmt {
        #[command(subcommand)]
        action: RmtAction,
    },
    /// Concentration suites.
    Conc {
        #[command(subcommand)]
        action: ConcAction,
    },
    /// Parameter ladders.
    Params {
        #[command(subcommand)]
        action: ParamsAction,
    },
}

#[derive(Subcommand)]
enum FeasAction {
    Run(Common),
}

#[derive(Subcommand)]
enum RmtAction {
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `harness` (the common result schema) or `rmt` (per-trial σ table).
        #[arg(long, default_value = "harness")]
        schema: String,
    },
}

#[derive(Subcommand)]
enum ConcAction {
    Suite(Common),
}

#[derive(Subcommand)]
enum ParamsAction {
    Show {
        #[command(flatten)]
        common: Common,
        /// Print the full parameter document as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn parse_game(s: &str) -> Result<GameId, String> {
    s.parse()
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "P")]
    depth: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "lP")]
    l_last: Option<usize>,
    #[arg(long = "l")]
    l: Option<usize>,
    #[arg(long = "M-bits")]
    m_bits: Option<usize>,
    /// Solver (feas) or player (game).
    #[arg(long, alias = "player")]
    solver: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// deterministic | randomized
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long = "t-max")]
    t_max: Option<u64>,
    #[arg(long = "mu-factor")]
    mu_factor: Option<f64>,
    #[arg(long = "c-rand")]
    c_rand: Option<f64>,
    #[arg(long = "N")]
    n_override: Option<usize>,
    #[arg(long = "d-tilde")]
    d_tilde: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Band factors for rmt sweeps, comma separated.
    #[arg(long = "C", value_delimiter = ',')]
    c_values: Option<Vec<usize>>,
    /// Certify every cut against the inscribed ball.
    #[arg(long)]
    certify: bool,
    /// Load the whole experiment from a JSON config; only --out and --jobs still apply.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, kind: ExperimentKind, game: Option<GameId>) -> Result<ExperimentConfig, HarnessError> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if cfg.kind != kind || (game.is_some() && cfg.game != game) {
                return Err(HarnessError::Config(format!("{} describes a {} experiment", path.display(), cfg.kind_label())));
            }
            cfg.out = self.out.clone().or(cfg.out);
            cfg.jobs = self.jobs.or(cfg.jobs);
            return Ok(cfg);
        }
        let (d, depth, k) = match kind {
            ExperimentKind::RmtSweep => (self.d.unwrap_or(50), self.depth.unwrap_or(0), self.k.unwrap_or(0)),
            ExperimentKind::ConcSuite => (self.d.unwrap_or(200), self.depth.unwrap_or(0), self.k.unwrap_or(0)),
            _ => (self.d.unwrap_or(30), self.depth.unwrap_or(2), self.k.unwrap_or(2)),
        };
        let mut cfg = ExperimentConfig::new(kind, d, depth, k);
        cfg.game = game;
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(m) = &self.mode {
            cfg.mode = m.parse::<Mode>()?;
        }
        if let Some(o) = &self.oracle {
            cfg.oracle = match o.as_str() {
                "deterministic" => OracleKind::Deterministic,
                "randomized" => OracleKind::Randomized,
                other => return Err(HarnessError::Config(format!("unknown oracle `{other}` (expected deterministic, randomized)"))),
            };
        }
        cfg.l_last = self.l_last;
        cfg.l = self.l;
        cfg.m_bits = self.m_bits;
        cfg.solver = self.solver.clone();
        cfg.eps = self.eps;
        cfg.trials = self.trials.unwrap_or(match kind {
            ExperimentKind::RmtSweep => 500,
            _ => 1,
        });
        cfg.seed = self.seed.unwrap_or_else(|| default_seed(0));
        cfg.t_max = self.t_max;
        cfg.mu_factor = self.mu_factor;
        cfg.c_rand = self.c_rand;
        cfg.n_override = self.n_override;
        cfg.d_tilde = self.d_tilde;
        cfg.samples = self.samples;
        cfg.rho = self.rho;
        cfg.beta = self.beta;
        cfg.gamma = self.gamma;
        cfg.j = self.j;
        cfg.p = self.p;
        cfg.c_values = self.c_values.clone();
        cfg.certify = self.certify;
        cfg.jobs = self.jobs;
        cfg.out = self.out.clone();
        if kind == ExperimentKind::ConcSuite {
            let mut conc = oracle_arena::rmt::ConcConfig { d, ..Default::default() };
            if let Some(k) = self.k {
                conc.r = k;
            }
            if let Some(t) = self.trials {
                conc.trials = t;
            }
            cfg.conc = Some(conc);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_csv_stdout(rows: &[oracle_arena::harness::CsvRow]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Io(format!("stdout: {e}")))?;
    }
    let body = w.into_inner().map_err(|e| HarnessError::Io(format!("stdout: {e}")))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{HEADER}").and_then(|_| out.write_all(&body)).map_err(|e| HarnessError::Io(format!("stdout: {e}")))
}

fn run(cfg: &ExperimentConfig, rmt_schema: bool) -> Result<(), HarnessError> {
    let output = run_experiment(cfg)?;
    eprintln!("{}", output.summary.trim_end());
    if rmt_schema {
        let rows = output
            .rows
            .iter()
            .map(|r| {
                let x = r.extra()?;
                let f = |k: &str| x[k].as_f64().unwrap_or(f64::NAN);
                Ok(RmtCsvRow {
                    n: r.d,
                    c: r.k,
                    alpha: r.alpha,
                    trial: x["c_trial"].as_u64().unwrap_or(0) as usize,
                    sigma_min: f("sigma_min"),
                    threshold: f("threshold"),
                    below_flag: u8::from(x["below"].as_bool().unwrap_or(false)),
                    seed: r.seed,
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let sink: Box<dyn Write> = match &cfg.out {
            Some(p) => Box::new(std::fs::File::create(p).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?),
            None => Box::new(std::io::stdout()),
        };
        let mut w = csv::Writer::from_writer(sink);
        for r in rows {
            w.serialize(r).map_err(|e| HarnessError::Io(e.to_string()))?;
        }
        return w.flush().map_err(|e| HarnessError::Io(e.to_string()));
    }
    match &cfg.out {
        Some(p) => emit_results(&output.rows, p),
        None => write_csv_stdout(&output.rows),
    }
}

fn fmt_list(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", "))
}

fn print_violations(v: &[Violation]) {
    for x in v {
        let tag = if x.severity == Severity::Error { "error" } else { "warning" };
        println!("{tag}: {} ({}; needed by {})", x.inequality, x.actual, x.context);
    }
}

fn params_show(cfg: &ExperimentConfig, json: bool) -> Result<(), HarnessError> {
    match cfg.oracle {
        OracleKind::Deterministic => {
            let p = cfg.det_params()?;
            if json {
                println!("{}", p.to_json());
                return Ok(());
            }
            println!("d={} P={} k={} alpha={} mode={}", p.d, p.depth, p.k, p.alpha, p.mode);
            println!("d_tilde={}", p.d_tilde);
            println!("l={}", p.l);
            println!("l_P={}", p.l_last);
            println!("C_alpha={}", p.c_alpha);
            println!("mu={:e} mu_P={:e}", p.mu, p.mu_last);
            println!("eta={}", fmt_list(&p.eta));
            println!("delta={}", fmt_list(&p.delta));
            println!("epsilon={:e}", p.epsilon);
            print_violations(&p.validate());
        }
        OracleKind::Randomized => {
            let p = cfg.rand_params()?;
            if json {
                println!("{}", p.to_json());
                return Ok(());
            }
            println!("d={} P={} k={} mode={}", p.d, p.depth, p.k, p.mode);
            println!("d_tilde={}", p.d_tilde);
            println!("l={}", p.l);
            println!("l_P={}", p.l_last);
            println!("mu={:e} mu_P={:e}", p.mu, p.mu_last);
            println!("eta={}", fmt_list(&p.eta));
            for (i, row) in p.delta.iter().enumerate() {
                println!("delta[{}]={}", i + 1, fmt_list(row));
            }
            println!("gamma={}", fmt_list(&p.gamma));
            println!("T={:?}", p.period);
            println!("N={} N_P={} J_P={}", p.n, p.n_last, p.j_last);
            println!("epsilon={:e}", p.epsilon);
            print_violations(&p.validate());
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Feas { action: FeasAction::Run(c) } => run(&c.resolve(ExperimentKind::Feas, None)?, false),
        Command::Game { game, common } => run(&common.resolve(ExperimentKind::Game, Some(game))?, false),
        Command::Rmt { action: RmtAction::Sweep { common, schema } } => {
            let rmt = match schema.as_str() {
                "harness" => false,
                "rmt" => true,
                other => return Err(HarnessError::Config(format!("unknown schema `{other}` (expected harness, rmt)"))),
            };
            run(&common.resolve(ExperimentKind::RmtSweep, None)?, rmt)
        }
        Command::Conc { action: ConcAction::Suite(c) } => run(&c.resolve(ExperimentKind::ConcSuite, None)?, false),
        Command::Params { action: ParamsAction::Show { common, json } } => {
            let mut cfg = common.resolve(ExperimentKind::Feas, None)?;
            if common.mode.is_none() {
                cfg.mode = Mode::Strict;
            }
            params_show(&cfg, json)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("oracle-arena: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
