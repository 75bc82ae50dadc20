use std::collections::BTreeMap;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, ExperimentKind, OracleKind};
use super::rows::CsvRow;
use super::{HarnessError, Result, VERSION};
use crate::games::depth::{FullInfoDepthPlayer, HalfspaceScriptPlayer, SolverPlayer};
use crate::games::kernel::{BestEffortKernel, FullInfoKernel, UniformKernel};
use crate::games::osg::{EncodeSubspace, GreedyOsg, RandomOsg};
use crate::games::probing::{FullInfoProber, GreedyProber, RandomProber};
use crate::games::randfeas::{FullInfoRandFeasPlayer, RandomRandFeasPlayer};
use crate::games::{
    run_adapted_osg, run_depth_p_feasibility_game, run_kernel_discovery, run_orthogonal_subspace_game,
    run_probing_game, run_randomized_feasibility_game, run_simplified_osg, DepthPlayer, GameId, GameRecord,
    GameTranscript, KernelPlayer, OsgStrategy, ProbingPlayer, RandFeasPlayer,
};
use crate::oracle::{certify_separation, new_det_instance, new_rand_instance, SeparationOracle};
use crate::params::DetParams;
use crate::rmt::triangular::trial_stream;
use crate::rmt::{concentration_suite, sample_triangular, smallest_singular_value, tail_experiment, ConcConfig, ConcReport, Lower, SweepReport, TriangularSpec};
use crate::rng::{digest_hex, stream};
use crate::solvers::{ellipsoid_solver, run_feasibility_observed, subgradient_solver, MemoryBoundedAlgorithm, StepSchedule};

/// Default band factors for `rmt-sweep`.
pub const DEFAULT_C_VALUES: [usize; 5] = [4, 8, 16, 32, 64];

/// Seed handed to trial `trial` of an experiment.
pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    stream(cfg.seed, &format!("harness/{}", cfg.kind_label()), &[trial as u64]).next_u64()
}

pub struct RunOutput {
    pub rows: Vec<CsvRow>,
    /// Human-readable summary.
    pub summary: String,
}

fn base_extra(cfg: &ExperimentConfig) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    m.insert("version".into(), json!(VERSION));
    m.insert("config_digest".into(), json!(cfg.digest()));
    let mut placed = cfg.clone();
    placed.jobs = None;
    placed.out = None;
    m.insert("config".into(), serde_json::to_value(placed).expect("config serializes"));
    m
}

fn finish_extra(m: BTreeMap<String, Value>) -> String {
    serde_json::to_string(&m).expect("extra serializes")
}

#[allow(clippy::too_many_arguments)]
fn row(cfg: &ExperimentConfig, trial: usize, seed: u64, m_bits: usize, who: String, queries: u64, success: bool, wall_ms: f64, extra: BTreeMap<String, Value>) -> CsvRow {
    CsvRow {
        trial,
        seed,
        kind: cfg.kind_label(),
        d: cfg.d,
        depth: cfg.depth,
        k: cfg.k,
        alpha: cfg.alpha,
        mode: cfg.mode,
        m_bits,
        solver_or_player: who,
        queries,
        success,
        wall_ms,
        extra_json: finish_extra(extra),
    }
}

/// Build a solver by name.
pub fn make_solver(name: &str, d: usize, eps: f64) -> Result<Box<dyn MemoryBoundedAlgorithm>> {
    Ok(match name {
        "ellipsoid" => Box::new(ellipsoid_solver(d, 1.0).map_err(|e| HarnessError::Config(e.to_string()))?),
        "subgradient" => Box::new(subgradient_solver(d, StepSchedule::InvSqrt(1.0))),
        "subgradient-const" => Box::new(subgradient_solver(d, StepSchedule::Constant(eps))),
        other => {
            return Err(HarnessError::Config(format!(
                "unknown solver `{other}` (expected ellipsoid, subgradient, subgradient-const)"
            )))
        }
    })
}

fn pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        b = b.num_threads(j);
    }
    b.build().map_err(|e| HarnessError::Runtime(format!("thread pool: {e}")))
}

/// Run every trial of `cfg`; rows come back in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Feas | ExperimentKind::Game => {
            check_resolvable(cfg)?;
            let rows = pool(cfg)?.install(|| {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| run_trial(cfg, t))
                    .collect::<Result<Vec<_>>>()
            })?;
            let wins = rows.iter().filter(|r| r.success).count();
            let summary = format!("{}: {wins}/{} successful", cfg.kind_label(), rows.len());
            Ok(RunOutput { rows, summary })
        }
        ExperimentKind::RmtSweep => {
            let (rows, rep) = pool(cfg)?.install(|| rmt_rows(cfg))?;
            let trend = if rep.monotone { "nondecreasing" } else { "not monotone" };
            Ok(RunOutput { rows, summary: format!("{}min σ in C: {trend}", rep.table()) })
        }
        ExperimentKind::ConcSuite => {
            let (rows, rep) = pool(cfg)?.install(|| conc_rows(cfg))?;
            Ok(RunOutput { rows, summary: format!("E‖Px‖² = {:.5} (exact {:.5})\n{}", rep.mean_proj, rep.mean_proj_exact, rep.table()) })
        }
    }
}

/// Surface configuration errors before spawning trials.
fn check_resolvable(cfg: &ExperimentConfig) -> Result<()> {
    let needs_rand = cfg.oracle == OracleKind::Randomized && cfg.kind == ExperimentKind::Feas || cfg.game == Some(GameId::RandFeas);
    let needs_det = (cfg.kind == ExperimentKind::Feas && cfg.oracle == OracleKind::Deterministic) || cfg.game == Some(GameId::Depth);
    if needs_rand {
        cfg.rand_params()?;
    }
    if needs_det {
        cfg.det_params()?;
    }
    if cfg.kind == ExperimentKind::Feas {
        make_solver(cfg.solver.as_deref().unwrap_or("ellipsoid"), cfg.d, cfg.eps.unwrap_or(1e-3))?;
    }
    Ok(())
}

/// One trial of a `feas` or `game` experiment.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<CsvRow> {
    let seed = trial_seed(cfg, trial);
    match cfg.kind {
        ExperimentKind::Feas => feas_trial(cfg, trial, seed),
        ExperimentKind::Game => game_trial(cfg, trial, seed),
        _ => Err(HarnessError::Config(format!("{} has no per-trial runner", cfg.kind_label()))),
    }
}

fn feas_trial(cfg: &ExperimentConfig, trial: usize, seed: u64) -> Result<CsvRow> {
    let name = cfg.solver.clone().unwrap_or_else(|| "ellipsoid".into());
    let t_max = cfg.t_max.unwrap_or(1_000_000);
    let mut extra = base_extra(cfg);
    let (mut oracle, eps): (Box<dyn SeparationOracle>, f64) = match cfg.oracle {
        OracleKind::Deterministic => {
            let p = cfg.det_params()?;
            let o = new_det_instance(&p, &mut stream(seed, "harness/feas/oracle", &[]))?;
            (Box::new(o), p.epsilon)
        }
        OracleKind::Randomized => {
            let p = cfg.rand_params()?;
            let o = new_rand_instance(&p, seed)?;
            (Box::new(o), p.epsilon)
        }
    };
    let alg = make_solver(&name, cfg.d, eps)?;
    let mut cert_rng = stream(seed, "harness/feas/certify", &[]);
    let (mut cuts, mut bad) = (0u64, 0u64);
    let certify = cfg.certify;
    let mut cert_err = None;
    let mut observer = |ev: &crate::solvers::StepEvent<'_>, o: &dyn SeparationOracle| {
        if !certify {
            return;
        }
        if let Some(g) = ev.response.cut() {
            cuts += 1;
            match certify_separation(o, ev.x, g, 8, &mut cert_rng) {
                Ok(true) => {}
                Ok(false) => bad += 1,
                Err(e) => cert_err = Some(e),
            }
        }
    };
    let trace = run_feasibility_observed(
        oracle.as_mut(),
        alg.as_ref(),
        alg.initial_memory(),
        t_max,
        &mut stream(seed, "harness/feas/solver", &[]),
        &mut observer,
    )?;
    if let Some(e) = cert_err {
        return Err(e.into());
    }
    extra.insert("epsilon".into(), json!(eps));
    extra.insert("budget_bits".into(), json!(trace.m_bits));
    extra.insert("max_memory_bits".into(), json!(trace.max_memory_bits()));
    extra.insert("depth_histogram".into(), json!(trace.depth_histogram));
    extra.insert("oracle".into(), json!(cfg.oracle));
    if certify {
        extra.insert("certified_cuts".into(), json!(cuts));
        extra.insert("certify_violations".into(), json!(bad));
    }
    Ok(row(cfg, trial, seed, trace.max_memory_bits(), trace.algorithm, trace.queries, trace.success, trace.wall_ms, extra))
}

fn unknown_player(game: GameId, name: &str, known: &str) -> HarnessError {
    HarnessError::Config(format!("unknown player `{name}` for {game} (expected {known})"))
}

fn probing_player(name: &str) -> Result<Box<dyn ProbingPlayer>> {
    Ok(match name {
        "random" => Box::new(RandomProber),
        "greedy" => Box::new(GreedyProber),
        "full-information" | "full-info" => Box::new(FullInfoProber::default()),
        n => return Err(unknown_player(GameId::Probing, n, "random, greedy, full-information")),
    })
}

fn osg_strategy(game: GameId, name: &str) -> Result<Box<dyn OsgStrategy>> {
    Ok(match name {
        "random" => Box::new(RandomOsg),
        "greedy" => Box::new(GreedyOsg),
        "encode-subspace" => Box::new(EncodeSubspace),
        n => return Err(unknown_player(game, n, "random, greedy, encode-subspace")),
    })
}

fn kernel_player(name: &str) -> Result<Box<dyn KernelPlayer>> {
    Ok(match name {
        "random" => Box::new(UniformKernel),
        "best-effort" => Box::new(BestEffortKernel),
        "full-information" | "full-info" => Box::new(FullInfoKernel::default()),
        n => return Err(unknown_player(GameId::Kernel, n, "random, best-effort, full-information")),
    })
}

fn depth_player(name: &str) -> Result<Box<dyn DepthPlayer>> {
    fn solver(label: &str, schedule: Option<StepSchedule>) -> Box<dyn DepthPlayer> {
        let make = move |p: &DetParams| -> Box<dyn MemoryBoundedAlgorithm> {
            match schedule {
                None => Box::new(ellipsoid_solver(p.d.max(2), 1.0).expect("d ≥ 2")),
                Some(s) => Box::new(subgradient_solver(p.d, s)),
            }
        };
        Box::new(SolverPlayer { label: label.into(), make })
    }
    Ok(match name {
        "full-information" | "full-info" => Box::new(FullInfoDepthPlayer),
        "halfspace-script" => Box::new(HalfspaceScriptPlayer),
        "ellipsoid" => solver("ellipsoid", None),
        "subgradient" => solver("subgradient", Some(StepSchedule::InvSqrt(1.0))),
        n => {
            return Err(unknown_player(
                GameId::Depth,
                n,
                "full-information, halfspace-script, ellipsoid, subgradient",
            ))
        }
    })
}

fn randfeas_player(name: &str) -> Result<Box<dyn RandFeasPlayer>> {
    Ok(match name {
        "random" => Box::new(RandomRandFeasPlayer),
        "full-information" | "full-info" => Box::new(FullInfoRandFeasPlayer),
        n => return Err(unknown_player(GameId::RandFeas, n, "random, full-information")),
    })
}

/// Play one game with the configured player.
pub fn play_game(cfg: &ExperimentConfig, seed: u64) -> Result<GameTranscript> {
    let game = cfg.game.ok_or_else(|| HarnessError::Config("no game given".into()))?;
    let (d, k) = (cfg.d, cfg.k);
    let dt = cfg.resolved_d_tilde();
    let beta = cfg.beta.unwrap_or(0.1);
    let gamma = cfg.gamma.unwrap_or(0.5);
    let m_bits = cfg.m_bits.unwrap_or(0);
    let samples = cfg.samples.unwrap_or(8);
    let default_player = match game {
        GameId::Kernel => "best-effort",
        GameId::Depth | GameId::RandFeas => "full-information",
        _ => "greedy",
    };
    let who = cfg.solver.as_deref().unwrap_or(default_player);
    let t = match game {
        GameId::Probing => {
            let l = cfg.l.unwrap_or_else(|| cfg.lab_default_l());
            run_probing_game(probing_player(who)?.as_mut(), d, l, k, cfg.rho.unwrap_or(0.1), seed)?
        }
        GameId::Osg => run_orthogonal_subspace_game(osg_strategy(game, who)?.as_ref(), d, dt, m_bits, k, samples, beta, gamma, seed)?,
        GameId::OsgSimple => run_simplified_osg(osg_strategy(game, who)?.as_ref(), d, dt, m_bits, k, beta, gamma, seed)?,
        GameId::AdaptedOsg => {
            run_adapted_osg(osg_strategy(game, who)?.as_ref(), d, dt, m_bits, k, samples, beta, gamma, cfg.j.unwrap_or(2), seed)?
        }
        GameId::Kernel => run_kernel_discovery(kernel_player(who)?.as_mut(), d, dt, cfg.samples.unwrap_or(dt / 2), seed)?,
        GameId::Depth => {
            let params = cfg.det_params()?;
            let p = cfg.p.unwrap_or(params.depth);
            run_depth_p_feasibility_game(depth_player(who)?.as_mut(), &params, p, cfg.t_max.unwrap_or(10_000), seed)?
        }
        GameId::RandFeas => {
            let params = cfg.rand_params()?;
            run_randomized_feasibility_game(randfeas_player(who)?.as_mut(), &params, cfg.j.unwrap_or(2), seed)?
        }
    };
    Ok(t)
}

fn game_trial(cfg: &ExperimentConfig, trial: usize, seed: u64) -> Result<CsvRow> {
    let start = Instant::now();
    let t = play_game(cfg, seed)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (queries, m_bits) = match &t.record {
        GameRecord::Probing(r) => (r.queries.len() as u64, 0),
        GameRecord::Osg(r) => (r.outputs.len() as u64, r.setup.m_bits),
        GameRecord::Kernel(_) => (1, 0),
        GameRecord::Depth(r) => (r.events.len() as u64, r.m_bits),
        GameRecord::RandFeas(r) => (r.queries, r.m_bits),
    };
    let mut extra = base_extra(cfg);
    extra.insert("verdict".into(), json!(t.verdict));
    extra.insert("diagnostics".into(), json!(t.diagnostics));
    extra.insert("notes".into(), json!(t.notes));
    extra.insert("transcript_digest".into(), json!(digest_hex(t.to_json().as_bytes())));
    Ok(row(cfg, trial, seed, m_bits, t.player.clone(), queries, t.is_win(), wall_ms, extra))
}

fn rmt_spec(cfg: &ExperimentConfig, c: usize) -> Result<TriangularSpec> {
    TriangularSpec::new(cfg.d, c, cfg.alpha).map_err(|e| HarnessError::Config(e.to_string()))
}

fn rmt_row(cfg: &ExperimentConfig, ci: usize, spec: &TriangularSpec, t: usize, sigma: f64, wall_ms: f64) -> CsvRow {
    let threshold = spec.threshold();
    let mut extra = base_extra(cfg);
    extra.insert("n".into(), json!(spec.n));
    extra.insert("C".into(), json!(spec.c));
    extra.insert("c_trial".into(), json!(t));
    extra.insert("sigma_min".into(), json!(sigma));
    extra.insert("min_sigma".into(), json!(sigma));
    extra.insert("threshold".into(), json!(threshold));
    extra.insert("below".into(), json!(sigma < threshold));
    extra.insert("bound".into(), json!(spec.tail_bound()));
    let mut r = row(cfg, ci * cfg.trials + t, cfg.seed, 0, "triangular".into(), 1, sigma >= threshold, wall_ms, extra);
    r.d = spec.n;
    r.depth = 0;
    r.k = spec.c;
    r
}

fn c_values(cfg: &ExperimentConfig) -> Vec<usize> {
    cfg.c_values.clone().unwrap_or_else(|| DEFAULT_C_VALUES.to_vec())
}

fn rmt_rows(cfg: &ExperimentConfig) -> Result<(Vec<CsvRow>, SweepReport)> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (ci, &c) in c_values(cfg).iter().enumerate() {
        let spec = rmt_spec(cfg, c)?;
        let start = Instant::now();
        let rep = tail_experiment(&spec, cfg.trials, cfg.seed).map_err(|e| HarnessError::Runtime(e.to_string()))?;
        let per = start.elapsed().as_secs_f64() * 1e3 / cfg.trials as f64;
        for (t, &s) in rep.sigmas.iter().enumerate() {
            rows.push(rmt_row(cfg, ci, &spec, t, s, per));
        }
        reports.push(rep);
    }
    let monotone = reports.windows(2).all(|w| w[1].min_sigma >= w[0].min_sigma);
    Ok((rows, SweepReport { reports, monotone }))
}

fn conc_config(cfg: &ExperimentConfig) -> ConcConfig {
    let base = cfg.conc.clone().unwrap_or_default();
    ConcConfig { seed: cfg.seed, ..base }
}

fn conc_rows(cfg: &ExperimentConfig) -> Result<(Vec<CsvRow>, ConcReport)> {
    let cc = conc_config(cfg);
    let start = Instant::now();
    let rep = concentration_suite(&cc).map_err(|e| HarnessError::Config(e.to_string()))?;
    let per = start.elapsed().as_secs_f64() * 1e3 / rep.checks.len().max(1) as f64;
    let rows = rep
        .checks
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut extra = base_extra(cfg);
            extra.insert("check".into(), serde_json::to_value(c).expect("check serializes"));
            extra.insert("mean_proj".into(), json!(rep.mean_proj));
            extra.insert("mean_proj_exact".into(), json!(rep.mean_proj_exact));
            let mut r = row(cfg, i, cfg.seed, 0, c.name.clone(), c.trials as u64, c.verdict.passes, per, extra);
            r.d = cc.d;
            r.k = cc.r;
            r
        })
        .collect();
    Ok((rows, rep))
}

/// Recompute a row from the configuration embedded in its `extra_json`.
pub fn replay_row(row: &CsvRow) -> Result<CsvRow> {
    let extra = row.extra()?;
    let cfg: ExperimentConfig = serde_json::from_value(extra["config"].clone())
        .map_err(|e| HarnessError::Runtime(format!("embedded config: {e}")))?;
    match cfg.kind {
        ExperimentKind::Feas | ExperimentKind::Game => run_trial(&cfg, row.trial),
        ExperimentKind::RmtSweep => {
            let cs = c_values(&cfg);
            let ci = row.trial / cfg.trials;
            let t = row.trial % cfg.trials;
            let c = *cs.get(ci).ok_or_else(|| HarnessError::Runtime(format!("trial {} outside the sweep", row.trial)))?;
            let spec = rmt_spec(&cfg, c)?;
            let m = sample_triangular(&spec, Lower::Zero, &mut trial_stream(&spec, cfg.seed, t)).map_err(|e| HarnessError::Runtime(e.to_string()))?;
            Ok(rmt_row(&cfg, ci, &spec, t, smallest_singular_value(&m), 0.0))
        }
        ExperimentKind::ConcSuite => {
            let (rows, _) = conc_rows(&cfg)?;
            rows.into_iter()
                .nth(row.trial)
                .ok_or_else(|| HarnessError::Runtime(format!("trial {} outside the suite", row.trial)))
        }
    }
}
