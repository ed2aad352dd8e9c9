//! Noise amplification by local gate folding and zero-noise extrapolation
//! of costs and gradients.

use serde::{Deserialize, Serialize};

use crate::circuit::ParamCircuit;
use crate::error::{Error, Result};
use crate::estimators::{eval_cost, parameter_shift_gradient, ExecutionLedger, ShotBudget};
use crate::pauli::WeightedPauliSum;
use crate::rng::Stream;
use crate::sim::NoiseModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    Linear,
    Quadratic,
}

impl FitModel {
    pub fn degree(&self) -> usize {
        match self {
            FitModel::Linear => 1,
            FitModel::Quadratic => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZneConfig {
    pub lambdas: Vec<u64>,
    pub fit: FitModel,
    pub shots: ShotBudget,
}

impl ZneConfig {
    pub fn new(lambdas: Vec<u64>, fit: FitModel, shots: ShotBudget) -> Result<Self> {
        if lambdas.first() != Some(&1) {
            return Err(Error::invalid("lambda list must start at 1"));
        }
        if !lambdas.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("lambdas must be strictly increasing"));
        }
        if lambdas.iter().any(|l| l % 2 == 0) {
            return Err(Error::invalid("all lambdas must be odd"));
        }
        if fit.degree() >= lambdas.len() {
            return Err(Error::invalid("fit degree must be below the number of lambdas"));
        }
        Ok(ZneConfig { lambdas, fit, shots })
    }
}

impl Default for ZneConfig {
    fn default() -> Self {
        ZneConfig { lambdas: vec![1, 3, 5], fit: FitModel::Linear, shots: ShotBudget::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZneResult {
    /// Extrapolated value at lambda = 0.
    pub value: f64,
    /// (lambda, measured value) pairs in lambda order.
    pub raw: Vec<(f64, f64)>,
    /// Polynomial coefficients, constant term first.
    pub fit_coefficients: Vec<f64>,
}

/// Replace every trainable gate G by G (G^dag G)^{(lam-1)/2}; noise
/// applications per gate scale by lam while the noiseless unitary is
/// unchanged. Fixed state-prep rotations are not folded.
pub fn fold_circuit(circuit: &ParamCircuit, lam: u64) -> Result<ParamCircuit> {
    if lam % 2 == 0 || lam == 0 {
        return Err(Error::invalid("fold factor must be odd and positive"));
    }
    let mut folded = ParamCircuit::new(circuit.n_qubits, circuit.n_params)?;
    folded.reference = circuit.reference;
    for g in &circuit.gates {
        folded.gates.push(g.clone());
        if g.base.is_some() {
            for _ in 0..(lam - 1) / 2 {
                let mut dag = g.clone();
                dag.coefficient = -g.coefficient;
                folded.gates.push(dag);
                folded.gates.push(g.clone());
            }
        }
    }
    Ok(folded)
}

/// Least-squares polynomial fit of `points`, returning the value at
/// lambda = 0 and the coefficients (constant term first).
pub fn extrapolate(points: &[(f64, f64)], fit: FitModel) -> Result<(f64, Vec<f64>)> {
    let deg = fit.degree();
    if points.len() < deg + 1 {
        return Err(Error::invalid("not enough points for the requested fit degree"));
    }
    for (i, (xi, _)) in points.iter().enumerate() {
        for (xj, _) in &points[i + 1..] {
            if (xi - xj).abs() < 1e-14 {
                return Err(Error::invalid("duplicate lambda values make the fit rank-deficient"));
            }
        }
    }
    // Normal equations on the (deg+1)-column Vandermonde design; sizes
    // here are tiny (2x2 or 3x3), so direct Gaussian elimination is fine.
    let k = deg + 1;
    let mut ata = vec![0.0; k * k];
    let mut atb = vec![0.0; k];
    for &(x, y) in points {
        let mut pow = vec![1.0; k];
        for i in 1..k {
            pow[i] = pow[i - 1] * x;
        }
        for i in 0..k {
            atb[i] += pow[i] * y;
            for j in 0..k {
                ata[i * k + j] += pow[i] * pow[j];
            }
        }
    }
    let coeffs = solve_small(&mut ata, &mut atb, k)?;
    Ok((coeffs[0], coeffs))
}

fn solve_small(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    for col in 0..n {
        let (pivot, pval) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pval < 1e-12 {
            return Err(Error::Numeric("rank-deficient extrapolation design".into()));
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            b.swap(pivot, col);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col] / a[col * n + col];
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    Ok((0..n).map(|i| b[i] / a[i * n + i]).collect())
}

/// Measure the cost at every folded noise level and extrapolate to
/// lambda = 0. Charges |lambdas| executions.
pub fn zne_cost(
    circuit: &ParamCircuit,
    obs: &WeightedPauliSum,
    theta: &[f64],
    noise: &NoiseModel,
    cfg: &ZneConfig,
    seed: u64,
    ledger: &ExecutionLedger,
) -> Result<ZneResult> {
    let mut raw = Vec::with_capacity(cfg.lambdas.len());
    for &lam in &cfg.lambdas {
        let folded = fold_circuit(circuit, lam)?;
        let eval_seed = derive_level_seed(seed, lam, u64::MAX);
        let e = eval_cost(&folded, obs, theta, noise, cfg.shots, eval_seed, ledger)?;
        raw.push((lam as f64, e.value));
    }
    let (value, fit_coefficients) = extrapolate(&raw, cfg.fit)?;
    Ok(ZneResult { value, raw, fit_coefficients })
}

/// Per-component zero-noise extrapolation of the parameter-shift
/// gradient over folded circuits. Charges |lambdas| * 2m executions for
/// m base gate occurrences.
pub fn zne_gradient(
    circuit: &ParamCircuit,
    obs: &WeightedPauliSum,
    theta: &[f64],
    noise: &NoiseModel,
    cfg: &ZneConfig,
    seed: u64,
    ledger: &ExecutionLedger,
) -> Result<Vec<f64>> {
    let mut per_level: Vec<Vec<f64>> = Vec::with_capacity(cfg.lambdas.len());
    for &lam in &cfg.lambdas {
        let folded = fold_circuit(circuit, lam)?;
        let level_seed = derive_level_seed(seed, lam, 0);
        per_level.push(parameter_shift_gradient(
            &folded, obs, theta, noise, cfg.shots, level_seed, ledger,
        )?);
    }
    let mut grad = vec![0.0; circuit.n_params];
    let mut points = Vec::with_capacity(cfg.lambdas.len());
    for (i, g) in grad.iter_mut().enumerate() {
        points.clear();
        for (l, gv) in cfg.lambdas.iter().zip(&per_level) {
            points.push((*l as f64, gv[i]));
        }
        let (v, _) = extrapolate(&points, cfg.fit)?;
        *g = v;
    }
    Ok(grad)
}

fn derive_level_seed(seed: u64, lam: u64, role: u64) -> u64 {
    Stream::new(seed, &[Stream::tag("zne-level"), lam, role]).next_u64()
}
