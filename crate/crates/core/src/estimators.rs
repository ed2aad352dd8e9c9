//! Cost and gradient estimation with honest circuit-execution accounting.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{ParamCircuit, ParamRef};
use crate::error::{Error, Result};
use crate::pauli::WeightedPauliSum;
use crate::rng::Stream;
use crate::sim::{expectation, sample_expectation, simulate_shifted, NoiseModel};

/// Shot budget for one expectation estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotBudget {
    Exact,
    Shots(u64),
}

/// Global counter of circuit executions and accumulated shots. One
/// execution is one full-Hamiltonian expectation estimation of one
/// circuit configuration at one noise level.
#[derive(Debug, Default)]
pub struct ExecutionLedger {
    executions: AtomicU64,
    shots_total: AtomicU64,
}

impl ExecutionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&self, shots: ShotBudget, non_identity_terms: u64) {
        self.executions.fetch_add(1, Ordering::Relaxed);
        if let ShotBudget::Shots(s) = shots {
            self.shots_total.fetch_add(s * non_identity_terms, Ordering::Relaxed);
        }
    }

    pub fn executions(&self) -> u64 {
        self.executions.load(Ordering::Relaxed)
    }

    pub fn shots_total(&self) -> u64 {
        self.shots_total.load(Ordering::Relaxed)
    }
}

/// One estimated cost value and what it cost to obtain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEvaluation {
    pub value: f64,
    pub executions_charged: u64,
}

/// Evaluate <obs> once at `theta` (optionally with a gate-angle shift),
/// charging exactly one execution.
pub(crate) fn eval_cost_shifted(
    circuit: &ParamCircuit,
    obs: &WeightedPauliSum,
    theta: &[f64],
    noise: &NoiseModel,
    shots: ShotBudget,
    seed: u64,
    shift: Option<(usize, f64)>,
    ledger: &ExecutionLedger,
) -> Result<f64> {
    let rho = simulate_shifted(circuit, theta, noise, shift)?;
    let n_terms = obs.non_identity_terms().count() as u64;
    ledger.charge(shots, n_terms);
    match shots {
        ShotBudget::Exact => expectation(&rho, obs),
        ShotBudget::Shots(s) => sample_expectation(&rho, obs, s, seed),
    }
}

/// One cost evaluation at `theta`.
pub fn eval_cost(
    circuit: &ParamCircuit,
    obs: &WeightedPauliSum,
    theta: &[f64],
    noise: &NoiseModel,
    shots: ShotBudget,
    seed: u64,
    ledger: &ExecutionLedger,
) -> Result<CostEvaluation> {
    let value = eval_cost_shifted(circuit, obs, theta, noise, shots, seed, None, ledger)?;
    Ok(CostEvaluation { value, executions_charged: 1 })
}

/// Parameter-shift gradient: for each trainable base gate occurrence g
/// with angle c_g * theta[i], dC/dtheta_i accumulates
/// c_g / 2 * [C(angle + pi/2) - C(angle - pi/2)]. Charges 2m executions
/// for m base occurrences.
pub fn parameter_shift_gradient(
    circuit: &ParamCircuit,
    obs: &WeightedPauliSum,
    theta: &[f64],
    noise: &NoiseModel,
    shots: ShotBudget,
    seed: u64,
    ledger: &ExecutionLedger,
) -> Result<Vec<f64>> {
    if theta.len() != circuit.n_params {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters supplied, circuit has {}",
            theta.len(),
            circuit.n_params
        )));
    }
    let m = circuit.n_base_occurrences();
    // (base occurrence) -> (param index, chain-rule coefficient)
    let mut occ: Vec<Option<(usize, f64)>> = vec![None; m];
    for g in circuit.gates.iter() {
        if let (Some(b), ParamRef::Shared(i)) = (g.base, g.param) {
            if occ[b].is_none() {
                occ[b] = Some((i, g.coefficient));
            }
        }
    }
    let halves: Vec<(usize, f64)> = (0..m)
        .flat_map(|b| [(b, std::f64::consts::FRAC_PI_2), (b, -std::f64::consts::FRAC_PI_2)])
        .collect();
    let values = halves
        .par_iter()
        .map(|&(b, delta)| {
            let eval_seed = derive_shift_seed(seed, b, delta > 0.0);
            eval_cost_shifted(circuit, obs, theta, noise, shots, eval_seed, Some((b, delta)), ledger)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut grad = vec![0.0; circuit.n_params];
    for (&(b, delta), v) in halves.iter().zip(&values) {
        let (i, c) = occ[b].expect("trainable occurrence has a shared parameter");
        grad[i] += 0.5 * c * delta.signum() * v;
    }
    Ok(grad)
}

/// Deterministic RNG seed for one shifted evaluation.
fn derive_shift_seed(seed: u64, base: usize, plus: bool) -> u64 {
    let mut s = Stream::new(seed, &[Stream::tag("shift"), base as u64, plus as u64]);
    s.next_u64()
}

/// theta - eta * g, elementwise.
pub fn gd_step(theta: &[f64], gradient: &[f64], eta: f64) -> Result<Vec<f64>> {
    if theta.len() != gradient.len() {
        return Err(Error::DimensionMismatch("theta and gradient lengths differ".into()));
    }
    if eta <= 0.0 {
        return Err(Error::invalid("learning rate must be positive"));
    }
    Ok(theta.iter().zip(gradient).map(|(t, g)| t - eta * g).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{Pauli, PauliString};

    fn x_rot_circuit() -> ParamCircuit {
        let mut c = ParamCircuit::new(1, 1).unwrap();
        c.push_shared(PauliString::single(1, 0, Pauli::X).unwrap(), 0, 1.0).unwrap();
        c
    }

    fn z_obs() -> WeightedPauliSum {
        WeightedPauliSum::parse_text("1.0 Z").unwrap()
    }

    #[test]
    fn eval_cost_charges_one_execution() {
        let ledger = ExecutionLedger::new();
        let c = x_rot_circuit();
        let e = eval_cost(&c, &z_obs(), &[0.3], &NoiseModel::none(), ShotBudget::Exact, 0, &ledger).unwrap();
        assert_eq!(ledger.executions(), 1);
        assert_eq!(e.executions_charged, 1);
        assert!((e.value - 0.3f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn shift_gradient_matches_cosine_derivative() {
        let ledger = ExecutionLedger::new();
        let c = x_rot_circuit();
        let g = parameter_shift_gradient(
            &c,
            &z_obs(),
            &[std::f64::consts::FRAC_PI_2],
            &NoiseModel::none(),
            ShotBudget::Exact,
            0,
            &ledger,
        )
        .unwrap();
        assert!((g[0] + 1.0).abs() < 1e-12, "{}", g[0]);
        assert_eq!(ledger.executions(), 2);

        let g0 = parameter_shift_gradient(&c, &z_obs(), &[0.0], &NoiseModel::none(), ShotBudget::Exact, 0, &ledger)
            .unwrap();
        assert!(g0[0].abs() < 1e-12);
    }

    #[test]
    fn shared_parameter_doubles_gradient() {
        // two X rotations sharing theta give <Z> = cos(2 theta)
        let mut c = ParamCircuit::new(1, 1).unwrap();
        c.push_shared(PauliString::single(1, 0, Pauli::X).unwrap(), 0, 1.0).unwrap();
        c.push_shared(PauliString::single(1, 0, Pauli::X).unwrap(), 0, 1.0).unwrap();
        let ledger = ExecutionLedger::new();
        let t = 0.35;
        let g = parameter_shift_gradient(&c, &z_obs(), &[t], &NoiseModel::none(), ShotBudget::Exact, 0, &ledger)
            .unwrap();
        assert!((g[0] + 2.0 * (2.0 * t).sin()).abs() < 1e-10, "{}", g[0]);
        assert_eq!(ledger.executions(), 4); // 2 occurrences x 2 shifts
    }

    #[test]
    fn gradient_matches_finite_differences_under_noise() {
        use crate::sim::NoiseKind;
        let mut c = ParamCircuit::new(2, 3).unwrap();
        c.push_fixed(PauliString::single(2, 0, Pauli::Y).unwrap(), std::f64::consts::FRAC_PI_2)
            .unwrap();
        c.push_shared(PauliString::parse("ZZ").unwrap(), 0, -1.0).unwrap();
        c.push_shared(PauliString::parse("XI").unwrap(), 1, 2.0).unwrap();
        c.push_shared(PauliString::parse("IY").unwrap(), 2, 0.5).unwrap();
        c.push_shared(PauliString::parse("ZZ").unwrap(), 0, -1.0).unwrap();
        let obs = WeightedPauliSum::parse_text("0.5 ZZ\n-0.3 XI\n0.2 YY").unwrap();
        for noise in [
            NoiseModel::none(),
            NoiseModel::new(NoiseKind::Depolarizing, 1e-3).unwrap(),
            NoiseModel::new(NoiseKind::Dephasing, 1e-3).unwrap(),
        ] {
            let ledger = ExecutionLedger::new();
            let theta = [0.37, -0.81, 1.21];
            let g = parameter_shift_gradient(&c, &obs, &theta, &noise, ShotBudget::Exact, 0, &ledger).unwrap();
            let h = 1e-5;
            for i in 0..3 {
                let mut tp = theta.to_vec();
                let mut tm = theta.to_vec();
                tp[i] += h;
                tm[i] -= h;
                let cp = eval_cost(&c, &obs, &tp, &noise, ShotBudget::Exact, 0, &ledger).unwrap().value;
                let cm = eval_cost(&c, &obs, &tm, &noise, ShotBudget::Exact, 0, &ledger).unwrap().value;
                let fd = (cp - cm) / (2.0 * h);
                assert!((g[i] - fd).abs() < 1e-6, "i={i} shift={} fd={fd}", g[i]);
            }
        }
    }

    #[test]
    fn gd_step_arithmetic() {
        assert_eq!(gd_step(&[1.0, 1.0], &[1.0, -1.0], 0.1).unwrap(), vec![0.9, 1.1]);
        assert_eq!(gd_step(&[0.5], &[0.0], 0.1).unwrap(), vec![0.5]);
    }

    #[test]
    fn gd_converges_geometrically_on_quadratic() {
        // C = |theta|^2 / 2, gradient = theta: theta_k = (1 - eta)^k theta_0
        let eta = 0.3;
        let mut theta = vec![1.0, -2.0];
        let theta0 = theta.clone();
        for k in 1..=10 {
            let g = theta.clone();
            theta = gd_step(&theta, &g, eta).unwrap();
            let factor = (1.0 - eta).powi(k);
            for (t, t0) in theta.iter().zip(&theta0) {
                assert!((t - factor * t0).abs() < 1e-12);
            }
        }
    }
}
