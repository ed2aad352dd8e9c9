//! The three-stage surrogate-assisted optimization pipeline plus the two
//! baselines (noisy-only and mitigation-assisted gradient descent), with
//! per-step trajectory logs tied to an execution ledger.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{eval_cost, gd_step, parameter_shift_gradient, ExecutionLedger, ShotBudget};
use crate::problem::Problem;
use crate::rng::Stream;
use crate::sim::NoiseModel;
use crate::surrogate::{train, StepMode, SurrogateModel, TrainConfig, TrajectoryRecord};
use crate::zne::{zne_cost, zne_gradient, ZneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Noisy,
    Zne,
    Pidn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageTag {
    Stage1,
    Stage3,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: RunMode,
    /// Steps of mitigated gradient descent before the surrogate takes over.
    pub t_init: usize,
    pub eta: f64,
    pub max_steps: usize,
    /// Optional cap on cumulative executions; a step in progress is
    /// finished and logged before the run truncates.
    pub budget: Option<u64>,
    pub zne: ZneConfig,
    pub train: TrainConfig,
    pub noise: NoiseModel,
    pub shots: ShotBudget,
    pub seed: u64,
    pub step_mode: StepMode,
    /// Explicit start point; otherwise drawn uniformly from
    /// [-0.1, 0.1] per coordinate from the run seed.
    pub init_theta: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: RunMode::Zne,
            t_init: 45,
            eta: 0.05,
            max_steps: 100,
            budget: None,
            zne: ZneConfig::default(),
            train: TrainConfig::default(),
            noise: NoiseModel::none(),
            shots: ShotBudget::Exact,
            seed: 0,
            step_mode: StepMode::Gradient,
            init_theta: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(Error::invalid("step size must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        if self.mode == RunMode::Pidn {
            if self.t_init < 2 {
                return Err(Error::invalid("surrogate mode needs t_init >= 2"));
            }
            if self.t_init > self.max_steps {
                return Err(Error::invalid("t_init must not exceed max_steps"));
            }
        }
        Ok(())
    }

    pub fn initial_theta(&self, n_params: usize) -> Result<Vec<f64>> {
        if let Some(t) = &self.init_theta {
            if t.len() != n_params {
                return Err(Error::DimensionMismatch("init_theta length".into()));
            }
            return Ok(t.clone());
        }
        let mut s = Stream::new(self.seed, &[Stream::tag("init")]);
        Ok((0..n_params).map(|_| s.uniform_in(-0.1, 0.1)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub theta: Vec<f64>,
    pub c_noisy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c_zne: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c_hat: Option<f64>,
    pub gradient: Vec<f64>,
    pub executions: u64,
    pub shots: u64,
    pub tag: StageTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub format: String,
    pub version: u32,
    pub config: RunConfig,
    pub n_params: usize,
    pub init_theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum LogLine {
    Header(RunHeader),
    Step(StepRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub records: Vec<StepRecord>,
}

impl RunLog {
    fn new(config: &RunConfig, init_theta: &[f64]) -> Self {
        RunLog {
            header: RunHeader {
                format: "run-log".into(),
                version: 1,
                config: config.clone(),
                n_params: init_theta.len(),
                init_theta: init_theta.to_vec(),
            },
            records: Vec::new(),
        }
    }

    /// One JSON object per line; the first line is the resolved config.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        let head = serde_json::to_string(&LogLine::Header(self.header.clone()))
            .map_err(|e| Error::Numeric(e.to_string()))?;
        out.push_str(&head);
        out.push('\n');
        for r in &self.records {
            let line = serde_json::to_string(&LogLine::Step(r.clone()))
                .map_err(|e| Error::Numeric(e.to_string()))?;
            out.push_str(&line);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            match parsed {
                LogLine::Header(h) => header = Some(h),
                LogLine::Step(s) => records.push(s),
            }
        }
        let header = header.ok_or_else(|| Error::invalid("log has no header record"))?;
        Ok(RunLog { header, records })
    }

    pub fn save<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }

    pub fn load<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }

    pub fn total_executions(&self) -> u64 {
        self.records.last().map_or(0, |r| r.executions)
    }

    pub fn stage3(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.tag == StageTag::Stage3)
    }

    /// Rebuild the surrogate training rows from the stage-1 prefix of a
    /// saved log (the update rule is deterministic, so theta_next is the
    /// following record's theta, or one replayed descent step at the end).
    pub fn stage1_records(&self) -> Result<Vec<TrajectoryRecord>> {
        let stage1: Vec<&StepRecord> =
            self.records.iter().filter(|r| r.tag == StageTag::Stage1).collect();
        let eta = self.header.config.eta;
        stage1
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let theta_next = match stage1.get(i + 1) {
                    Some(n) => n.theta.clone(),
                    None => gd_step(&r.theta, &r.gradient, eta)?,
                };
                Ok(TrajectoryRecord {
                    step: r.step,
                    theta: r.theta.clone(),
                    c_noisy: r.c_noisy,
                    c_zne: r
                        .c_zne
                        .ok_or_else(|| Error::invalid("stage-1 record lacks a mitigated cost"))?,
                    g_zne: r.gradient.clone(),
                    theta_next,
                })
            })
            .collect()
    }
}

fn step_seed(seed: u64, role: &str, step: usize) -> u64 {
    Stream::new(seed, &[Stream::tag(role), step as u64]).next_u64()
}

fn budget_reached(ledger: &ExecutionLedger, cfg: &RunConfig) -> bool {
    cfg.budget.is_some_and(|b| ledger.executions() >= b)
}

/// Plain parameter-shift gradient descent on the unmitigated cost.
pub fn run_noisy(problem: &Problem, cfg: &RunConfig) -> Result<RunLog> {
    cfg.validate()?;
    let obs = problem.cost_observable();
    let circuit = &problem.circuit;
    let mut theta = cfg.initial_theta(circuit.n_params)?;
    let mut log = RunLog::new(cfg, &theta);
    let ledger = ExecutionLedger::new();
    for step in 0..cfg.max_steps {
        if budget_reached(&ledger, cfg) {
            break;
        }
        let c = eval_cost(
            circuit,
            &obs,
            &theta,
            &cfg.noise,
            cfg.shots,
            step_seed(cfg.seed, "noisy-cost", step),
            &ledger,
        )?;
        let g = parameter_shift_gradient(
            circuit,
            &obs,
            &theta,
            &cfg.noise,
            cfg.shots,
            step_seed(cfg.seed, "noisy-grad", step),
            &ledger,
        )?;
        log.records.push(StepRecord {
            step,
            theta: theta.clone(),
            c_noisy: c.value,
            c_zne: None,
            c_hat: None,
            gradient: g.clone(),
            executions: ledger.executions(),
            shots: ledger.shots_total(),
            tag: StageTag::Baseline,
        });
        theta = gd_step(&theta, &g, cfg.eta)?;
    }
    Ok(log)
}

/// One mitigated descent step: extrapolated cost and gradient, with the
/// raw unfolded cost kept alongside.
fn zne_step(
    problem: &Problem,
    cfg: &RunConfig,
    theta: &[f64],
    step: usize,
    seed_prefix: &str,
    ledger: &ExecutionLedger,
) -> Result<(f64, f64, Vec<f64>)> {
    let obs = problem.cost_observable();
    let zr = zne_cost(
        &problem.circuit,
        &obs,
        theta,
        &cfg.noise,
        &cfg.zne,
        step_seed(cfg.seed, &format!("{seed_prefix}-cost"), step),
        ledger,
    )?;
    let g = zne_gradient(
        &problem.circuit,
        &obs,
        theta,
        &cfg.noise,
        &cfg.zne,
        step_seed(cfg.seed, &format!("{seed_prefix}-grad"), step),
        ledger,
    )?;
    // the first configured level is always the unfolded raw point
    Ok((zr.raw[0].1, zr.value, g))
}

fn run_zne_from(
    problem: &Problem,
    cfg: &RunConfig,
    mut theta: Vec<f64>,
    first_step: usize,
    n_steps: usize,
    tag: StageTag,
    seed_prefix: &str,
    ledger: &ExecutionLedger,
    log: &mut RunLog,
    records: Option<&mut Vec<TrajectoryRecord>>,
) -> Result<Vec<f64>> {
    let mut recs = records;
    for k in 0..n_steps {
        if budget_reached(ledger, cfg) {
            break;
        }
        let step = first_step + k;
        let (c_noisy, c_zne, g) = zne_step(problem, cfg, &theta, step, seed_prefix, ledger)?;
        let theta_next = gd_step(&theta, &g, cfg.eta)?;
        log.records.push(StepRecord {
            step,
            theta: theta.clone(),
            c_noisy,
            c_zne: Some(c_zne),
            c_hat: None,
            gradient: g.clone(),
            executions: ledger.executions(),
            shots: ledger.shots_total(),
            tag,
        });
        if let Some(rs) = recs.as_deref_mut() {
            rs.push(TrajectoryRecord {
                step,
                theta: theta.clone(),
                c_noisy,
                c_zne,
                g_zne: g,
                theta_next: theta_next.clone(),
            });
        }
        theta = theta_next;
    }
    Ok(theta)
}

/// Mitigated gradient descent for the whole run.
pub fn run_zne(problem: &Problem, cfg: &RunConfig) -> Result<RunLog> {
    cfg.validate()?;
    let theta = cfg.initial_theta(problem.circuit.n_params)?;
    let mut log = RunLog::new(cfg, &theta);
    let ledger = ExecutionLedger::new();
    run_zne_from(
        problem,
        cfg,
        theta,
        0,
        cfg.max_steps,
        StageTag::Baseline,
        "zne",
        &ledger,
        &mut log,
        None,
    )?;
    Ok(log)
}

#[derive(Debug, Clone)]
pub struct PidnRun {
    pub log: RunLog,
    pub model: SurrogateModel,
    pub stage1: Vec<TrajectoryRecord>,
    pub loss_curve: Vec<f64>,
}

/// Stage 1: mitigated descent for t_init steps, recording training rows.
/// Stage 2: train the surrogate on them. Stage 3: one raw execution per
/// step feeds the surrogate, whose input gradient (or next-parameter
/// head) drives the update.
pub fn run_pidn(problem: &Problem, cfg: &RunConfig) -> Result<PidnRun> {
    cfg.validate()?;
    if cfg.mode != RunMode::Pidn {
        return Err(Error::invalid("run_pidn requires pidn mode"));
    }
    let obs = problem.cost_observable();
    let circuit = &problem.circuit;
    let theta0 = cfg.initial_theta(circuit.n_params)?;
    let mut log = RunLog::new(cfg, &theta0);
    let ledger = ExecutionLedger::new();
    let mut stage1 = Vec::with_capacity(cfg.t_init);
    let mut theta = run_zne_from(
        problem,
        cfg,
        theta0,
        0,
        cfg.t_init,
        StageTag::Stage1,
        "zne",
        &ledger,
        &mut log,
        Some(&mut stage1),
    )?;

    let mut train_cfg = cfg.train;
    train_cfg.seed = Stream::new(cfg.seed, &[Stream::tag("surrogate")]).next_u64();
    let mut model = SurrogateModel::new(circuit.n_params, &train_cfg)?;
    let outcome = train(&mut model, &stage1, &train_cfg)?;

    let mut prefix: Vec<(Vec<f64>, f64)> =
        stage1.iter().map(|r| (r.theta.clone(), r.c_noisy)).collect();
    for step in cfg.t_init..cfg.max_steps {
        if budget_reached(&ledger, cfg) {
            break;
        }
        let c = eval_cost(
            circuit,
            &obs,
            &theta,
            &cfg.noise,
            cfg.zne.shots,
            step_seed(cfg.seed, "stage3-cost", step),
            &ledger,
        )?;
        prefix.push((theta.clone(), c.value));
        let g = model.input_gradient(&prefix)?;
        let c_hat = model.forward(&prefix)?.0;
        let theta_next = match cfg.step_mode {
            StepMode::Gradient => gd_step(&theta, &g, cfg.eta)?,
            StepMode::Head => model.forward(&prefix)?.1,
        };
        log.records.push(StepRecord {
            step,
            theta: theta.clone(),
            c_noisy: c.value,
            c_zne: None,
            c_hat: Some(c_hat),
            gradient: g,
            executions: ledger.executions(),
            shots: ledger.shots_total(),
            tag: StageTag::Stage3,
        });
        theta = theta_next;
    }
    Ok(PidnRun { log, model, stage1, loss_curve: outcome.loss_curve })
}

/// Independent mitigated continuation from the stage-3 start point, used
/// only for gradient-fidelity comparison. Runs on its own ledger, so the
/// surrogate run's execution counts are untouched.
pub fn reference_continuation(problem: &Problem, cfg: &RunConfig, from: &RunLog) -> Result<RunLog> {
    let stage3: Vec<&StepRecord> = from.stage3().collect();
    let start = match stage3.first() {
        Some(r) => r.theta.clone(),
        None => return Err(Error::invalid("log has no stage-3 records to continue from")),
    };
    let mut ref_cfg = cfg.clone();
    ref_cfg.budget = None;
    let mut log = RunLog::new(&ref_cfg, &start);
    let ledger = ExecutionLedger::new();
    run_zne_from(
        problem,
        &ref_cfg,
        start,
        stage3[0].step,
        stage3.len(),
        StageTag::Baseline,
        "reference",
        &ledger,
        &mut log,
        None,
    )?;
    Ok(log)
}

/// Per-step cosine similarity between the surrogate's stage-3 gradients
/// and an independent mitigated continuation's gradients.
pub fn stage3_cosine_series(pidn: &RunLog, reference: &RunLog) -> Result<Vec<(usize, f64)>> {
    pidn.stage3()
        .zip(&reference.records)
        .map(|(a, b)| Ok((a.step, crate::analysis::cosine_similarity(&a.gradient, &b.gradient)?)))
        .collect()
}

/// Cosine similarity of the trained surrogate's input gradient against
/// the recorded mitigated gradient, on each training prefix.
pub fn stage1_replay_cosines(
    model: &SurrogateModel,
    records: &[TrajectoryRecord],
) -> Result<Vec<f64>> {
    let mut prefix: Vec<(Vec<f64>, f64)> = Vec::with_capacity(records.len());
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        prefix.push((r.theta.clone(), r.c_noisy));
        let g = model.input_gradient(&prefix)?;
        out.push(crate::analysis::cosine_similarity(&g, &r.g_zne)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Problem;

    fn single_edge_problem() -> Problem {
        let g = crate::hamiltonians::GraphInstance::new(2, vec![(0, 1)], None).unwrap();
        Problem::maxcut(&g, 1).unwrap()
    }

    fn base_cfg(mode: RunMode) -> RunConfig {
        RunConfig { mode, max_steps: 10, t_init: 4, eta: 0.05, seed: 7, ..RunConfig::default() }
    }

    #[test]
    fn noiseless_descent_is_non_increasing() {
        let p = single_edge_problem();
        let mut cfg = base_cfg(RunMode::Noisy);
        cfg.max_steps = 50;
        cfg.init_theta = Some(vec![0.1, 0.1]);
        let log = run_noisy(&p, &cfg).unwrap();
        assert_eq!(log.records.len(), 50);
        for w in log.records.windows(2) {
            assert!(w[1].c_noisy <= w[0].c_noisy + 1e-12);
        }
    }

    #[test]
    fn repeat_runs_are_identical() {
        let p = single_edge_problem();
        let cfg = base_cfg(RunMode::Noisy);
        let a = run_noisy(&p, &cfg).unwrap();
        let b = run_noisy(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
    }

    #[test]
    fn noiseless_zne_equals_noisy_trajectory() {
        let p = single_edge_problem();
        let cfg = base_cfg(RunMode::Noisy);
        let a = run_noisy(&p, &cfg).unwrap();
        let mut zcfg = base_cfg(RunMode::Zne);
        zcfg.mode = RunMode::Zne;
        let b = run_zne(&p, &zcfg).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            for (x, y) in ra.theta.iter().zip(&rb.theta) {
                assert!((x - y).abs() < 1e-9);
            }
            assert!((ra.c_noisy - rb.c_zne.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn zne_executions_per_step_are_l_times_2m_plus_1() {
        let p = single_edge_problem();
        let cfg = base_cfg(RunMode::Zne);
        let log = run_zne(&p, &cfg).unwrap();
        let l = cfg.zne.lambdas.len() as u64;
        let m = p.circuit.n_base_occurrences() as u64;
        let per_step = l * (2 * m + 1);
        for (i, r) in log.records.iter().enumerate() {
            assert_eq!(r.executions, per_step * (i as u64 + 1));
        }
    }

    #[test]
    fn stage_tags_switch_at_t_init() {
        let p = single_edge_problem();
        let mut cfg = base_cfg(RunMode::Pidn);
        cfg.train.epochs = 5;
        cfg.train.gru_hidden = 4;
        cfg.train.scalar_width = 4;
        cfg.train.fusion_width = 4;
        let run = run_pidn(&p, &cfg).unwrap();
        for r in &run.log.records {
            let expect = if r.step < cfg.t_init { StageTag::Stage1 } else { StageTag::Stage3 };
            assert_eq!(r.tag, expect, "step {}", r.step);
        }
        assert_eq!(run.log.records.len(), cfg.max_steps);
        // exactly one raw execution per stage-3 step
        let stage3: Vec<_> = run.log.stage3().collect();
        for w in stage3.windows(2) {
            assert_eq!(w[1].executions - w[0].executions, 1);
        }
    }

    #[test]
    fn t_init_equal_to_max_steps_reduces_to_zne() {
        let p = single_edge_problem();
        let mut cfg = base_cfg(RunMode::Pidn);
        cfg.t_init = cfg.max_steps;
        cfg.train.epochs = 1;
        cfg.train.gru_hidden = 4;
        cfg.train.scalar_width = 4;
        cfg.train.fusion_width = 4;
        let run = run_pidn(&p, &cfg).unwrap();
        let mut zcfg = cfg.clone();
        zcfg.mode = RunMode::Zne;
        let z = run_zne(&p, &zcfg).unwrap();
        for (a, b) in run.log.records.iter().zip(&z.records) {
            assert_eq!(a.theta, b.theta);
            assert_eq!(a.c_zne, b.c_zne);
        }
    }

    #[test]
    fn budget_truncates_after_full_step() {
        let p = single_edge_problem();
        let mut cfg = base_cfg(RunMode::Zne);
        let l = cfg.zne.lambdas.len() as u64;
        let m = p.circuit.n_base_occurrences() as u64;
        let per_step = l * (2 * m + 1);
        cfg.budget = Some(per_step * 3 + 1);
        let log = run_zne(&p, &cfg).unwrap();
        assert_eq!(log.records.len(), 4);
        assert_eq!(log.total_executions(), per_step * 4);
    }

    #[test]
    fn log_round_trips_through_jsonl() {
        let p = single_edge_problem();
        let cfg = base_cfg(RunMode::Zne);
        let log = run_zne(&p, &cfg).unwrap();
        let text = log.to_jsonl().unwrap();
        let back = RunLog::from_jsonl(&text).unwrap();
        assert_eq!(log, back);
    }

    #[test]
    fn stage1_records_rebuild_from_log() {
        let p = single_edge_problem();
        let mut cfg = base_cfg(RunMode::Pidn);
        cfg.train.epochs = 1;
        cfg.train.gru_hidden = 4;
        cfg.train.scalar_width = 4;
        cfg.train.fusion_width = 4;
        let run = run_pidn(&p, &cfg).unwrap();
        let rebuilt = run.log.stage1_records().unwrap();
        assert_eq!(rebuilt, run.stage1);
    }

    #[test]
    fn reference_continuation_leaves_source_untouched() {
        let p = single_edge_problem();
        let mut cfg = base_cfg(RunMode::Pidn);
        cfg.train.epochs = 1;
        cfg.train.gru_hidden = 4;
        cfg.train.scalar_width = 4;
        cfg.train.fusion_width = 4;
        let run = run_pidn(&p, &cfg).unwrap();
        let reference = reference_continuation(&p, &cfg, &run.log).unwrap();
        assert_eq!(reference.records.len(), run.log.stage3().count());
        let first_ref = &reference.records[0];
        let first_s3 = run.log.stage3().next().unwrap();
        assert_eq!(first_ref.theta, first_s3.theta);
        let series = stage3_cosine_series(&run.log, &reference).unwrap();
        assert_eq!(series.len(), reference.records.len());
    }
}
