//! End-to-end timings for the hot paths: noisy expectation evaluation,
//! parameter-shift gradients, a full ZNE step, and surrogate training.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};

use vqalab_core::estimators::{eval_cost, parameter_shift_gradient, ExecutionLedger, ShotBudget};
use vqalab_core::problem::Problem;
use vqalab_core::sim::{NoiseKind, NoiseModel};
use vqalab_core::surrogate::{train, SurrogateModel, TrainConfig, TrajectoryRecord};
use vqalab_core::zne::{zne_cost, zne_gradient, FitModel, ZneConfig};

fn fixture() -> (Problem, Vec<f64>, NoiseModel) {
    let problem = Problem::maxcut_3regular(6, 1, 1).unwrap();
    let theta: Vec<f64> = (0..problem.circuit.n_params)
        .map(|i| 0.1 + 0.05 * i as f64)
        .collect();
    let noise = NoiseModel::new(NoiseKind::Dephasing, 1e-3).unwrap();
    (problem, theta, noise)
}

fn bench_simulation(c: &mut Criterion) {
    let (problem, theta, noise) = fixture();
    let obs = problem.cost_observable();
    let ledger = ExecutionLedger::new();

    c.bench_function("noisy_cost_6q", |b| {
        b.iter(|| {
            eval_cost(&problem.circuit, &obs, &theta, &noise, ShotBudget::Exact, 0, &ledger)
                .unwrap()
        })
    });

    c.bench_function("parameter_shift_gradient_6q", |b| {
        b.iter(|| {
            parameter_shift_gradient(
                &problem.circuit,
                &obs,
                &theta,
                &noise,
                ShotBudget::Exact,
                0,
                &ledger,
            )
            .unwrap()
        })
    });

    let zcfg = ZneConfig::new(vec![1, 3], FitModel::Linear, ShotBudget::Exact).unwrap();
    c.bench_function("zne_step_6q", |b| {
        b.iter(|| {
            let v = zne_cost(&problem.circuit, &obs, &theta, &noise, &zcfg, 0, &ledger).unwrap();
            let g =
                zne_gradient(&problem.circuit, &obs, &theta, &noise, &zcfg, 0, &ledger).unwrap();
            (v, g)
        })
    });
}

fn bench_surrogate(c: &mut Criterion) {
    let n_params = 4;
    let cfg = TrainConfig { epochs: 1, seed: 3, ..TrainConfig::default() };
    let records: Vec<TrajectoryRecord> = (0..10)
        .map(|t| {
            let theta: Vec<f64> = (0..n_params).map(|i| 0.1 * (t + i) as f64).collect();
            TrajectoryRecord {
                step: t,
                theta: theta.clone(),
                c_noisy: -(t as f64) * 0.1,
                c_zne: -(t as f64) * 0.11,
                g_zne: vec![0.05; n_params],
                theta_next: theta.iter().map(|x| x + 0.01).collect(),
            }
        })
        .collect();

    c.bench_function("surrogate_train_epoch", |b| {
        b.iter(|| {
            let mut m = SurrogateModel::new(n_params, &cfg).unwrap();
            train(&mut m, &records, &cfg).unwrap()
        })
    });

    let mut model = SurrogateModel::new(n_params, &cfg).unwrap();
    train(&mut model, &records, &cfg).unwrap();
    let prefix: Vec<(Vec<f64>, f64)> =
        records.iter().map(|r| (r.theta.clone(), r.c_noisy)).collect();
    c.bench_function("surrogate_input_gradient", |b| {
        b.iter(|| model.input_gradient(&prefix).unwrap())
    });
}

fn configured() -> Criterion {
    Criterion::default()
        .sample_size(10)
        .measurement_time(Duration::from_secs(3))
        .warm_up_time(Duration::from_millis(500))
}

criterion_group! {
    name = benches;
    config = configured();
    targets = bench_simulation, bench_surrogate
}
criterion_main!(benches);
