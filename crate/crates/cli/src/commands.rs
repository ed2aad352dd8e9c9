//! The five experiment subcommands. Every command stages its outputs in
//! memory and writes them only after all computation succeeds, so a
//! failing run leaves no partial files behind.

use std::fmt::Write as _;
use std::path::PathBuf;

use vqalab_core::analysis::{
    approximation_ratio, cosine_similarity, energy_error, landscape_metrics, scan_landscape,
    speedup, LandscapeAxes, LandscapeEvaluator, LandscapeGrid, SpeedupOutcome,
};
use vqalab_core::error::{Error, Result};
use vqalab_core::estimators::{
    eval_cost, gd_step, parameter_shift_gradient, ExecutionLedger, ShotBudget,
};
use vqalab_core::hamiltonians::{build_sk, generate_3regular};
use vqalab_core::problem::{Problem, ProblemKind};
use vqalab_core::sim::NoiseModel;
use vqalab_core::surrogate::{train, SurrogateModel, TrajectoryRecord};
use vqalab_core::workflow::{
    reference_continuation, run_noisy, run_pidn, run_zne, stage3_cosine_series, RunConfig,
    RunLog, RunMode,
};
use vqalab_core::zne::zne_cost;

use crate::config::{ExperimentConfig, ProblemSpec};

/// All file contents are produced first, then flushed together.
struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputSet {
    fn new(cfg: &ExperimentConfig) -> Self {
        OutputSet { dir: cfg.out.clone(), files: Vec::new() }
    }

    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn flush(self) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(&self.dir)?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, contents)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    match cfg.problem {
        ProblemSpec::Maxcut3Reg => Problem::maxcut_3regular(cfg.n, cfg.instance_seed, cfg.p_layers),
        ProblemSpec::Sk => Problem::sk(cfg.n, cfg.instance_seed, cfg.p_layers),
        ProblemSpec::Tfim => Problem::tfim(cfg.n, 1.0, 1.0, cfg.p_layers),
        ProblemSpec::Molecular => {
            let h = cfg
                .hamiltonian
                .as_ref()
                .ok_or_else(|| Error::invalid("molecular problem needs --hamiltonian"))?;
            let t = cfg
                .template
                .as_ref()
                .ok_or_else(|| Error::invalid("molecular problem needs --template"))?;
            Problem::molecular(h, t)
        }
    }
}

/// Ideal (noise-free, exact-shot) <H> at theta; diagnostic only, charged
/// to a throwaway ledger.
fn ideal_h(problem: &Problem, theta: &[f64]) -> Result<f64> {
    let ledger = ExecutionLedger::new();
    let c = eval_cost(
        &problem.circuit,
        &problem.cost_observable(),
        theta,
        &NoiseModel::none(),
        ShotBudget::Exact,
        0,
        &ledger,
    )?;
    Ok(problem.h_value(c.value))
}

/// Figure-of-merit at theta: approximation ratio where defined, else the
/// signed energy error against the exact ground energy.
fn metric_at(problem: &Problem, theta: &[f64]) -> Result<f64> {
    let h = ideal_h(problem, theta)?;
    match problem.kind {
        ProblemKind::Molecular => Ok(energy_error(h, problem.reference)),
        _ => Ok(approximation_ratio(problem.kind, h, problem.reference)?
            .ratio()
            .unwrap_or(f64::NAN)),
    }
}

fn metric_trace(problem: &Problem, log: &RunLog) -> Result<Vec<(u64, f64)>> {
    log.records
        .iter()
        .map(|r| Ok((r.executions, metric_at(problem, &r.theta)?)))
        .collect()
}

fn two_column(header: &str, cols: (&str, &str), rows: &[(String, String)]) -> String {
    let mut s = String::from(header);
    let _ = writeln!(s, "{}\t{}", cols.0, cols.1);
    for (a, b) in rows {
        let _ = writeln!(s, "{a}\t{b}");
    }
    s
}

pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let problem = build_problem(cfg)?;
    let run_cfg = cfg.run_config()?;
    let mut out = OutputSet::new(cfg);
    let log = match cfg.mode {
        RunMode::Noisy => run_noisy(&problem, &run_cfg)?,
        RunMode::Zne => run_zne(&problem, &run_cfg)?,
        RunMode::Pidn => {
            let run = run_pidn(&problem, &run_cfg)?;
            let reference = reference_continuation(&problem, &run_cfg, &run.log)?;
            let series = stage3_cosine_series(&run.log, &reference)?;
            let rows: Vec<(String, String)> = series
                .iter()
                .map(|(s, c)| (s.to_string(), format!("{c:.12}")))
                .collect();
            out.add(
                "cosine_vs_step.tsv",
                two_column(&cfg.header_lines("cosine-vs-step"), ("step", "cosine"), &rows),
            );
            let ckpt = serde_json::json!({
                "format": "surrogate-checkpoint",
                "version": 1,
                "model": run.model,
            });
            out.add(
                "surrogate.json",
                serde_json::to_string(&ckpt).map_err(|e| Error::Numeric(e.to_string()))?,
            );
            run.log
        }
    };
    let trace = metric_trace(&problem, &log)?;
    let rows: Vec<(String, String)> = trace
        .iter()
        .map(|(e, m)| (e.to_string(), format!("{m:.12}")))
        .collect();
    out.add(
        "plot_metric.tsv",
        two_column(&cfg.header_lines("metric-vs-executions"), ("executions", "metric"), &rows),
    );
    let last = log
        .records
        .last()
        .ok_or_else(|| Error::invalid("run produced no steps"))?;
    let summary = serde_json::json!({
        "format": "run-summary",
        "version": 1,
        "config": cfg,
        "final_step": last.step,
        "final_metric": trace.last().map(|x| x.1),
        "total_executions": log.total_executions(),
        "total_shots": last.shots,
    });
    out.add(
        "summary.json",
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Numeric(e.to_string()))?,
    );
    out.add("run_log.jsonl", log.to_jsonl()?);
    out.flush()
}

fn grid_tsv(cfg: &ExperimentConfig, grid: &LandscapeGrid) -> String {
    let mut s = cfg.header_lines("landscape-grid");
    let n = grid.axes.resolution;
    for ia in 0..n {
        let row: Vec<String> = (0..n)
            .map(|ib| format!("{:.12}", grid.values[ia * n + ib]))
            .collect();
        let _ = writeln!(s, "{}", row.join("\t"));
    }
    s
}

pub fn cmd_landscape(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let problem = build_problem(cfg)?;
    let run_cfg = cfg.run_config()?;
    let frozen = run_cfg.initial_theta(problem.circuit.n_params)?;
    let axes = LandscapeAxes::full_period(cfg.axes.0, cfg.axes.1, cfg.grid);
    let noise = cfg.noise()?;
    let mut out = OutputSet::new(cfg);
    // With a finite shot budget every evaluator samples, so the three
    // surfaces sit on the same statistical footing.
    let (ideal_eval, noisy_eval) = match cfg.shots {
        ShotBudget::Exact => (LandscapeEvaluator::Ideal, LandscapeEvaluator::ExactNoisy),
        ShotBudget::Shots(s) => {
            (LandscapeEvaluator::SampledIdeal(s), LandscapeEvaluator::SampledNoisy(s))
        }
    };
    let evaluators = [
        ("ideal", ideal_eval),
        ("zne", LandscapeEvaluator::Zne(cfg.zne()?)),
        ("noisy", noisy_eval),
    ];
    let mut metric_rows = Vec::new();
    for (name, ev) in &evaluators {
        let grid = scan_landscape(
            &problem.circuit,
            &problem.cost_observable(),
            &frozen,
            axes,
            &noise,
            ev,
            cfg.seed,
        )?;
        let m = landscape_metrics(&grid, cfg.sigma, cfg.radius)?;
        metric_rows.push(format!(
            "{name}\t{:.12}\t{:.12}\t{:.12}",
            m.r_lf, m.delta_e_smooth, m.sigma_smooth
        ));
        out.add(&format!("grid_{name}.tsv"), grid_tsv(cfg, &grid));
    }
    let mut metrics = cfg.header_lines("landscape-metrics");
    metrics.push_str("evaluator\tr_lf\tdelta_e_smooth\tsigma_smooth\n");
    for row in metric_rows {
        metrics.push_str(&row);
        metrics.push('\n');
    }
    out.add("metrics.tsv", metrics);

    // short descent per evaluator, projected onto the scanned plane
    let mut traj = cfg.header_lines("landscape-trajectories");
    traj.push_str("evaluator\tstep\ttheta_a\ttheta_b\tpoint\n");
    for (name, _) in &evaluators {
        let mut dcfg = run_cfg.clone();
        dcfg.max_steps = 20;
        dcfg.init_theta = Some(frozen.clone());
        let log = match *name {
            "ideal" => {
                dcfg.noise = NoiseModel::none();
                dcfg.mode = RunMode::Noisy;
                run_noisy(&problem, &dcfg)?
            }
            "zne" => {
                dcfg.mode = RunMode::Zne;
                run_zne(&problem, &dcfg)?
            }
            _ => {
                dcfg.mode = RunMode::Noisy;
                run_noisy(&problem, &dcfg)?
            }
        };
        let last = log.records.len() - 1;
        for (i, r) in log.records.iter().enumerate() {
            let point = if i == 0 {
                "start"
            } else if i == last {
                "end"
            } else {
                "mid"
            };
            let _ = writeln!(
                traj,
                "{name}\t{}\t{:.12}\t{:.12}\t{point}",
                r.step, r.theta[cfg.axes.0], r.theta[cfg.axes.1]
            );
        }
    }
    out.add("trajectories.tsv", traj);
    out.flush()
}

/// Unmitigated run whose every step is recorded as a training row, with
/// the noisy values standing in for mitigated targets.
fn noisy_records(problem: &Problem, cfg: &RunConfig) -> Result<Vec<TrajectoryRecord>> {
    let log = run_noisy(problem, cfg)?;
    let mut recs = Vec::with_capacity(log.records.len());
    for (i, r) in log.records.iter().enumerate() {
        let theta_next = match log.records.get(i + 1) {
            Some(n) => n.theta.clone(),
            None => gd_step(&r.theta, &r.gradient, cfg.eta)?,
        };
        recs.push(TrajectoryRecord {
            step: r.step,
            theta: r.theta.clone(),
            c_noisy: r.c_noisy,
            c_zne: r.c_noisy,
            g_zne: r.gradient.clone(),
            theta_next,
        });
    }
    Ok(recs)
}

/// Mean cosine similarity between the surrogate's input gradient and the
/// ideal gradient along an unmitigated trajectory at one noise level.
fn tracking_cosine(problem: &Problem, cfg: &ExperimentConfig, strength: f64) -> Result<f64> {
    let mut run_cfg = cfg.run_config()?;
    run_cfg.mode = RunMode::Noisy;
    run_cfg.noise = if strength == 0.0 {
        NoiseModel::none()
    } else {
        NoiseModel::new(cfg.noise_kind, strength)?
    };
    let records = noisy_records(problem, &run_cfg)?;
    let mut train_cfg = run_cfg.train;
    train_cfg.seed = cfg.seed;
    let mut model = SurrogateModel::new(problem.circuit.n_params, &train_cfg)?;
    train(&mut model, &records, &train_cfg)?;
    let ledger = ExecutionLedger::new();
    let obs = problem.cost_observable();
    let mut prefix = Vec::new();
    let mut acc = 0.0;
    for r in &records {
        prefix.push((r.theta.clone(), r.c_noisy));
        let g_hat = model.input_gradient(&prefix)?;
        let g_ideal = parameter_shift_gradient(
            &problem.circuit,
            &obs,
            &r.theta,
            &NoiseModel::none(),
            ShotBudget::Exact,
            0,
            &ledger,
        )?;
        acc += cosine_similarity(&g_hat, &g_ideal)?;
    }
    Ok(acc / records.len() as f64)
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let problem = build_problem(cfg)?;
    let mut out = OutputSet::new(cfg);
    let mut rows = Vec::new();
    for &level in &cfg.levels {
        let value = match cfg.study.as_str() {
            "rlf" => {
                let noise = if level == 0.0 {
                    NoiseModel::none()
                } else {
                    NoiseModel::new(cfg.noise_kind, level)?
                };
                let frozen = cfg.run_config()?.initial_theta(problem.circuit.n_params)?;
                let axes = LandscapeAxes::full_period(cfg.axes.0, cfg.axes.1, cfg.grid);
                let ev = match cfg.shots {
                    ShotBudget::Exact => LandscapeEvaluator::ExactNoisy,
                    ShotBudget::Shots(s) => LandscapeEvaluator::SampledNoisy(s),
                };
                let grid = scan_landscape(
                    &problem.circuit,
                    &problem.cost_observable(),
                    &frozen,
                    axes,
                    &noise,
                    &ev,
                    cfg.seed,
                )?;
                landscape_metrics(&grid, cfg.sigma, cfg.radius)?.r_lf
            }
            "tracking" => tracking_cosine(&problem, cfg, level)?,
            "energy" => {
                let mut run_cfg = cfg.run_config()?;
                run_cfg.noise = if level == 0.0 {
                    NoiseModel::none()
                } else {
                    NoiseModel::new(cfg.noise_kind, level)?
                };
                let log = match cfg.mode {
                    RunMode::Noisy => run_noisy(&problem, &run_cfg)?,
                    RunMode::Zne => run_zne(&problem, &run_cfg)?,
                    RunMode::Pidn => run_pidn(&problem, &run_cfg)?.log,
                };
                let last = log
                    .records
                    .last()
                    .ok_or_else(|| Error::invalid("run produced no steps"))?;
                metric_at(&problem, &last.theta)?
            }
            other => return Err(Error::invalid(format!("unknown study `{other}`"))),
        };
        rows.push((format!("{level:e}"), format!("{value:.12}")));
    }
    out.add(
        "sweep.tsv",
        two_column(&cfg.header_lines("noise-sweep"), ("strength", &cfg.study), &rows),
    );
    out.flush()
}

/// ZNE evaluation of the final parameters, on a throwaway ledger.
fn final_zne_metric(problem: &Problem, cfg: &RunConfig, log: &RunLog) -> Result<f64> {
    let last = log
        .records
        .last()
        .ok_or_else(|| Error::invalid("run produced no steps"))?;
    let theta = gd_step(&last.theta, &last.gradient, cfg.eta)?;
    let ledger = ExecutionLedger::new();
    let zr = zne_cost(
        &problem.circuit,
        &problem.cost_observable(),
        &theta,
        &cfg.noise,
        &cfg.zne,
        cfg.seed,
        &ledger,
    )?;
    let h = problem.h_value(zr.value);
    match problem.kind {
        ProblemKind::Molecular => Ok(energy_error(h, problem.reference)),
        _ => Ok(approximation_ratio(problem.kind, h, problem.reference)?
            .ratio()
            .unwrap_or(f64::NAN)),
    }
}

pub fn cmd_ablate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let problem = build_problem(cfg)?;
    let mut with_cfg = cfg.run_config()?;
    with_cfg.mode = RunMode::Pidn;
    let mut without_cfg = with_cfg.clone();
    without_cfg.train.beta = 0.0;

    let mut out = OutputSet::new(cfg);
    let mut traces: Vec<(String, Vec<(usize, f64)>, f64, f64)> = Vec::new();
    for (label, rc) in [("with_physics", &with_cfg), ("without_physics", &without_cfg)] {
        let run = run_pidn(&problem, rc)?;
        let reference = reference_continuation(&problem, rc, &run.log)?;
        let series = stage3_cosine_series(&run.log, &reference)?;
        let mean = series.iter().map(|x| x.1).sum::<f64>() / series.len().max(1) as f64;
        let final_metric = final_zne_metric(&problem, rc, &run.log)?;
        traces.push((label.to_string(), series, mean, final_metric));
    }
    let mut tsv = cfg.header_lines("ablation-cosine-traces");
    tsv.push_str("variant\tstep\tcosine\n");
    for (label, series, _, _) in &traces {
        for (s, c) in series {
            let _ = writeln!(tsv, "{label}\t{s}\t{c:.12}");
        }
    }
    out.add("cosine_traces.tsv", tsv);

    let mut table = cfg.header_lines("ablation-summary");
    table.push_str("instance\tmetric_with\tmetric_without\tmean_cos_with\tmean_cos_without\n");
    let _ = writeln!(
        table,
        "{}-{}-seed{}\t{:.12}\t{:.12}\t{:.12}\t{:.12}",
        cfg.problem, cfg.n, cfg.instance_seed, traces[0].3, traces[1].3, traces[0].2, traces[1].2
    );
    out.add("ablation.tsv", table);
    out.flush()
}

pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let mut out = OutputSet::new(cfg);
    match cfg.problem {
        ProblemSpec::Maxcut3Reg => {
            let g = generate_3regular(cfg.n, cfg.instance_seed)?;
            out.add(&format!("maxcut3reg_n{}_s{}.graph", cfg.n, cfg.instance_seed), g.to_text());
        }
        ProblemSpec::Sk => {
            let h = build_sk(cfg.n, cfg.instance_seed)?;
            out.add(&format!("sk_n{}_s{}.pauli", cfg.n, cfg.instance_seed), h.to_text());
        }
        other => {
            return Err(Error::invalid(format!(
                "gen supports maxcut3reg and sk, not `{other}`"
            )))
        }
    }
    out.flush()
}

/// Compare two runs' execution counts to a common target metric value.
#[allow(dead_code)]
pub fn speedup_between(
    problem: &Problem,
    a: &RunLog,
    b: &RunLog,
    target: f64,
) -> Result<SpeedupOutcome> {
    let ta = metric_trace(problem, a)?;
    let tb = metric_trace(problem, b)?;
    speedup(&ta, &tb, target, true)
}
