//! Scratch calibration driver used while pinning down experiment
//! hyperparameters; not part of the published interface.

use std::env;

use vqalab_core::analysis::*;
use vqalab_core::estimators::*;
use vqalab_core::problem::*;
use vqalab_core::sim::*;
use vqalab_core::workflow::*;
use vqalab_core::zne::*;

fn ideal_h(problem: &Problem, theta: &[f64]) -> f64 {
    let ledger = ExecutionLedger::new();
    let c = eval_cost(
        &problem.circuit,
        &problem.cost_observable(),
        theta,
        &NoiseModel::none(),
        ShotBudget::Exact,
        0,
        &ledger,
    )
    .unwrap();
    problem.h_value(c.value)
}

fn ar_trace(problem: &Problem, log: &RunLog) -> Vec<(u64, f64)> {
    log.records
        .iter()
        .map(|r| {
            let h = ideal_h(problem, &r.theta);
            let ar = approximation_ratio(problem.kind, h, problem.reference)
                .unwrap()
                .ratio()
                .unwrap_or(f64::NAN);
            (r.executions, ar)
        })
        .collect()
}

fn qaoa_optimum_check() {
    let g = vqalab_core::hamiltonians::GraphInstance::new(2, vec![(0, 1)], None).unwrap();
    let p = Problem::maxcut(&g, 1).unwrap();
    for (gamma, beta) in [
        (std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_8),
        (-std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_8),
        (std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_8),
        (std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_8),
    ] {
        let h = ideal_h(&p, &[gamma, beta]);
        println!("qaoa single edge gamma={gamma:.4} beta={beta:.4} -> <H>={h:.8}");
    }
}

fn pidn_experiment(seed: u64, t_init: usize, max_steps: usize, eta: f64, p_layers: usize) {
    let problem = Problem::maxcut_3regular(8, seed, p_layers).unwrap();
    let cfg = RunConfig {
        mode: RunMode::Pidn,
        t_init,
        eta,
        max_steps,
        noise: NoiseModel::new(NoiseKind::Dephasing, 1e-3).unwrap(),
        seed,
        zne: ZneConfig::new(vec![1, 3], FitModel::Linear, ShotBudget::Exact).unwrap(),
        ..RunConfig::default()
    };
    let t0 = std::time::Instant::now();
    let run = run_pidn(&problem, &cfg).unwrap();
    eprintln!("pidn run took {:?}", t0.elapsed());
    let replay = stage1_replay_cosines(&run.model, &run.stage1).unwrap();
    let min_replay = replay.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("seed={seed} stage1 replay cos: min={min_replay:.4}");
    let reference = reference_continuation(&problem, &cfg, &run.log).unwrap();
    let series = stage3_cosine_series(&run.log, &reference).unwrap();
    let first20: Vec<f64> = series.iter().take(20).map(|(_, c)| *c).collect();
    let mean20 = first20.iter().sum::<f64>() / first20.len() as f64;
    println!(
        "seed={seed} stage3 cos first20 mean={mean20:.4} min={:.4} all={:?}",
        first20.iter().cloned().fold(f64::INFINITY, f64::min),
        series.iter().map(|(_, c)| (c * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
    // final loss / c_hat tracking quality
    let last = run.log.records.last().unwrap();
    println!(
        "final step {} c_noisy={:.4} c_hat={:?} ideal_h={:.4}",
        last.step,
        last.c_noisy,
        last.c_hat,
        ideal_h(&problem, &last.theta)
    );
}

fn speedup_experiment(
    seed: u64,
    t_init: usize,
    max_steps: usize,
    eta: f64,
    p_layers: usize,
    n: usize,
    epochs: usize,
    hidden: usize,
) {
    let problem = Problem::maxcut_3regular(n, seed, p_layers).unwrap();
    let noise = NoiseModel::new(NoiseKind::Dephasing, 1e-3).unwrap();
    let train = vqalab_core::surrogate::TrainConfig {
        epochs,
        gru_hidden: hidden,
        scalar_width: hidden,
        fusion_width: hidden,
        ..vqalab_core::surrogate::TrainConfig::default()
    };
    let base = RunConfig {
        mode: RunMode::Zne,
        t_init,
        eta,
        max_steps,
        noise,
        seed,
        train,
        zne: ZneConfig::new(vec![1, 3], FitModel::Linear, ShotBudget::Exact).unwrap(),
        ..RunConfig::default()
    };
    let z = run_zne(&problem, &base).unwrap();
    let mut pcfg = base.clone();
    pcfg.mode = RunMode::Pidn;
    let p = run_pidn(&problem, &pcfg).unwrap();
    let tz = ar_trace(&problem, &z);
    let tp = ar_trace(&problem, &p.log);
    let best_z = tz.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let best_p = tp.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let s = speedup(&tz, &tp, 0.9, true).unwrap();
    println!("seed={seed} n={n} p={p_layers} best_ar zne={best_z:.4} pidn={best_p:.4} speedup to 0.9: {s:?}");
    println!(
        "  ar(zne) every 5: {:?}",
        tz.iter().step_by(5).map(|x| (x.1 * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
    println!(
        "  ar(pidn) every 5: {:?}",
        tp.iter().step_by(5).map(|x| (x.1 * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
    println!(
        "  c_zne every 5: {:?}",
        z.records
            .iter()
            .step_by(5)
            .map(|r| ((r.c_zne.unwrap_or(f64::NAN)) * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
}

fn landscape_experiment(
    n_grid: usize,
    sigma: f64,
    radius: usize,
    p_layers: usize,
    si: u64,
    sz: u64,
    sn: u64,
) {
    let problem = Problem::maxcut_3regular(8, 1, p_layers).unwrap();
    let frozen = RunConfig { seed: 1, ..RunConfig::default() }
        .initial_theta(problem.circuit.n_params)
        .unwrap();
    let axes = LandscapeAxes::full_period(0, 1, n_grid);
    for kind in [NoiseKind::Dephasing, NoiseKind::Depolarizing] {
        let noise = NoiseModel::new(kind, 1e-3).unwrap();
        let t0 = std::time::Instant::now();
        let zshots = if sz == 0 { ShotBudget::Exact } else { ShotBudget::Shots(sz) };
        let zcfg = ZneConfig::new(vec![1, 3], FitModel::Linear, zshots).unwrap();
        let noisy = if sn == 0 {
            LandscapeEvaluator::ExactNoisy
        } else {
            LandscapeEvaluator::SampledNoisy(sn)
        };
        let ideal = if si == 0 {
            LandscapeEvaluator::Ideal
        } else {
            LandscapeEvaluator::SampledIdeal(si)
        };
        let mut rows = Vec::new();
        for ev in [ideal, LandscapeEvaluator::Zne(zcfg.clone()), noisy] {
            let grid = scan_landscape(
                &problem.circuit,
                &problem.cost_observable(),
                &frozen,
                axes,
                &noise,
                &ev,
                0,
            )
            .unwrap();
            rows.push(grid);
        }
        println!(
            "{kind:?} N={n_grid} p={p_layers} si={si} sz={sz} sn={sn} took {:?}",
            t0.elapsed()
        );
        for (name, grid) in ["ideal", "zne", "noisy"].iter().zip(&rows) {
            let m = grid.values.iter().sum::<f64>() / grid.values.len() as f64;
            let var =
                grid.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / grid.values.len() as f64;
            let (mn, mx) = grid
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            println!("  {name} raw: std={:.4} range={:.4}", var.sqrt(), mx - mn);
        }
        for (name, grid) in ["ideal", "zne", "noisy"].iter().zip(&rows) {
            for s in [sigma, 2.0 * sigma, 3.0 * sigma] {
                let line: Vec<String> = [1usize, 2, 3, 4, 6, 8, 12]
                    .iter()
                    .filter(|&&r| r < n_grid / 2)
                    .map(|&r| {
                        let m = landscape_metrics(grid, s, r).unwrap();
                        format!("r{r}={:.4}", m.r_lf)
                    })
                    .collect();
                let m = landscape_metrics(grid, s, radius).unwrap();
                println!(
                    "  {name} s={s}: de={:.4} sig={:.4} {}",
                    m.delta_e_smooth,
                    m.sigma_smooth,
                    line.join(" ")
                );
            }
        }
    }
}

fn main() {
    let args: Vec<String> = env::args().skip(1).collect();
    let which = args.first().map(String::as_str).unwrap_or("all");
    match which {
        "qaoa" => qaoa_optimum_check(),
        "pidn" => {
            let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
            let eta: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.05);
            pidn_experiment(seed, 45, 65, eta, 2);
        }
        "speedup" => {
            let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
            let t_init: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
            let max_steps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(200);
            let eta: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.05);
            let p_layers: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(2);
            let n: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(8);
            let epochs: usize = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(3000);
            let hidden: usize = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(64);
            speedup_experiment(seed, t_init, max_steps, eta, p_layers, n, epochs, hidden);
        }
        "landscape" => {
            let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(32);
            let sigma: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2.0);
            let radius: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(4);
            let p_layers: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(2);
            let si: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0);
            let sz: u64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0);
            let sn: u64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(0);
            landscape_experiment(n, sigma, radius, p_layers, si, sz, sn);
        }
        other => eprintln!("unknown experiment {other}"),
    }
}
