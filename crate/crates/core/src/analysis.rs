//! Quantitative metrics: approximation ratios, energy error, gradient
//! cosine similarity, landscape scans with smoothed-contrast and spectral
//! metrics, and execution-count speedup.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::ParamCircuit;
use crate::error::{Error, Result};
use crate::estimators::{eval_cost, ExecutionLedger, ShotBudget};
use crate::pauli::WeightedPauliSum;
use crate::problem::ProblemKind;
use crate::sim::NoiseModel;
use crate::zne::{zne_cost, ZneConfig};

/// Chemical accuracy in Hartree (about 1 kcal/mol).
pub const CHEMICAL_ACCURACY_HA: f64 = 1.6e-3;

/// Approximation ratio outcome; spin models with a non-negative measured
/// energy have no meaningful ratio and are flagged instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArValue {
    Ratio(f64),
    OutOfDomain { h_value: f64 },
}

impl ArValue {
    pub fn ratio(&self) -> Option<f64> {
        match self {
            ArValue::Ratio(r) => Some(*r),
            ArValue::OutOfDomain { .. } => None,
        }
    }
}

/// MaxCut: <H> / C_max. SK and TFIM: E_gs / <H> (both negative near the
/// optimum).
pub fn approximation_ratio(kind: ProblemKind, h_value: f64, reference: f64) -> Result<ArValue> {
    match kind {
        ProblemKind::MaxCut => {
            if reference == 0.0 {
                return Err(Error::invalid("C_max must be nonzero"));
            }
            Ok(ArValue::Ratio(h_value / reference))
        }
        ProblemKind::Sk | ProblemKind::Tfim => {
            if h_value >= 0.0 {
                return Ok(ArValue::OutOfDomain { h_value });
            }
            Ok(ArValue::Ratio(reference / h_value))
        }
        ProblemKind::Molecular => Err(Error::invalid(
            "molecular problems are scored by energy error, not an approximation ratio",
        )),
    }
}

/// Delta E = e - e_ref in Hartree.
pub fn energy_error(e: f64, e_ref: f64) -> f64 {
    e - e_ref
}

/// Chemical-accuracy predicate; the boundary value passes.
pub fn chemically_accurate(delta_e: f64) -> bool {
    delta_e <= CHEMICAL_ACCURACY_HA
}

/// g1 . g2 / (|g1| |g2|); zero vectors are undefined rather than 0.
pub fn cosine_similarity(g1: &[f64], g2: &[f64]) -> Result<f64> {
    if g1.len() != g2.len() {
        return Err(Error::DimensionMismatch("gradient lengths differ".into()));
    }
    let dot: f64 = g1.iter().zip(g2).map(|(a, b)| a * b).sum();
    let n1: f64 = g1.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n2: f64 = g2.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::Numeric("cosine similarity of a zero vector is undefined".into()));
    }
    Ok(dot / (n1 * n2))
}

/// Which estimator produces the landscape values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LandscapeEvaluator {
    /// Noise switched off.
    Ideal,
    /// Raw noisy expectation at the configured noise model.
    ExactNoisy,
    /// Noise switched off, but the expectation is still estimated from a
    /// finite shot budget per grid point. Puts the noise-free surface on
    /// the same statistical footing as the sampled noisy/mitigated ones.
    SampledIdeal(u64),
    /// Noisy expectation estimated from a finite shot budget per grid
    /// point, as a device would report it.
    SampledNoisy(u64),
    /// ZNE-extrapolated value under the configured noise model.
    Zne(ZneConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeAxes {
    pub index_a: usize,
    pub index_b: usize,
    pub range_a: (f64, f64),
    pub range_b: (f64, f64),
    pub resolution: usize,
}

impl LandscapeAxes {
    /// Full-period scan over two parameter indices at resolution n.
    pub fn full_period(index_a: usize, index_b: usize, n: usize) -> Self {
        let period = 2.0 * std::f64::consts::PI;
        LandscapeAxes {
            index_a,
            index_b,
            range_a: (0.0, period),
            range_b: (0.0, period),
            resolution: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGrid {
    pub axes: LandscapeAxes,
    pub frozen_theta: Vec<f64>,
    /// Row-major N x N; rows sweep axis a, columns axis b. Grid points
    /// sample [lo, hi) so the 2 pi period wraps cleanly.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeMetrics {
    pub delta_e_smooth: f64,
    pub sigma_smooth: f64,
    pub r_lf: f64,
}

/// Evaluate <obs> over a 2-D parameter grid with all other coordinates
/// frozen.
pub fn scan_landscape(
    circuit: &ParamCircuit,
    obs: &WeightedPauliSum,
    frozen_theta: &[f64],
    axes: LandscapeAxes,
    noise: &NoiseModel,
    evaluator: &LandscapeEvaluator,
    seed: u64,
) -> Result<LandscapeGrid> {
    if axes.index_a == axes.index_b {
        return Err(Error::invalid("landscape axes must be distinct"));
    }
    if axes.index_a >= circuit.n_params || axes.index_b >= circuit.n_params {
        return Err(Error::invalid("landscape axis index out of range"));
    }
    if axes.resolution < 16 {
        return Err(Error::invalid("landscape resolution must be at least 16"));
    }
    let n = axes.resolution;
    let step = |range: (f64, f64), i: usize| range.0 + (range.1 - range.0) * i as f64 / n as f64;
    let values: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|cell| {
            let (ia, ib) = (cell / n, cell % n);
            let mut theta = frozen_theta.to_vec();
            theta[axes.index_a] = step(axes.range_a, ia);
            theta[axes.index_b] = step(axes.range_b, ib);
            let ledger = ExecutionLedger::new();
            match evaluator {
                LandscapeEvaluator::Ideal => {
                    eval_cost(circuit, obs, &theta, &NoiseModel::none(), ShotBudget::Exact, seed, &ledger)
                        .map(|e| e.value)
                }
                LandscapeEvaluator::ExactNoisy => {
                    eval_cost(circuit, obs, &theta, noise, ShotBudget::Exact, seed, &ledger).map(|e| e.value)
                }
                LandscapeEvaluator::SampledIdeal(shots) => eval_cost(
                    circuit,
                    obs,
                    &theta,
                    &NoiseModel::none(),
                    ShotBudget::Shots(*shots),
                    seed.wrapping_add(cell as u64),
                    &ledger,
                )
                .map(|e| e.value),
                LandscapeEvaluator::SampledNoisy(shots) => eval_cost(
                    circuit,
                    obs,
                    &theta,
                    noise,
                    ShotBudget::Shots(*shots),
                    seed.wrapping_add(cell as u64),
                    &ledger,
                )
                .map(|e| e.value),
                LandscapeEvaluator::Zne(cfg) => {
                    zne_cost(circuit, obs, &theta, noise, cfg, seed.wrapping_add(cell as u64), &ledger)
                        .map(|r| r.value)
                }
            }
        })
        .collect::<Result<_>>()?;
    Ok(LandscapeGrid { axes, frozen_theta: frozen_theta.to_vec(), values })
}

/// Smoothed-contrast and spectral metrics of a landscape grid.
///
/// Smoothing is a circular Gaussian convolution of width `sigma_cells`
/// (kernel truncated at 4 sigma). R_LF sums DFT power over the square
/// max(|k_a|, |k_b|) <= lowfreq_radius, computed on the mean-subtracted
/// grid: a landscape's constant offset says nothing about its spatial
/// organization and would otherwise dominate the spectrum (for cost
/// grids the squared mean exceeds the structured power by orders of
/// magnitude, pinning the ratio at 1). The zeroed DC bin still counts as
/// low-frequency, so R_LF is invariant under adding a constant, and a
/// constant grid is defined to have R_LF = 1 (no structure at all is
/// maximally smooth).
pub fn landscape_metrics(grid: &LandscapeGrid, sigma_cells: f64, lowfreq_radius: usize) -> Result<LandscapeMetrics> {
    let n = grid.axes.resolution;
    if grid.values.len() != n * n {
        return Err(Error::DimensionMismatch("grid size mismatch".into()));
    }
    if lowfreq_radius >= n / 2 {
        return Err(Error::invalid("low-frequency radius must be below N/2"));
    }
    let smoothed = gaussian_smooth_circular(&grid.values, n, sigma_cells);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sum = 0.0;
    for &v in &smoothed {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    let mean = sum / (n * n) as f64;
    let var = smoothed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n * n) as f64;

    let grid_mean = grid.values.iter().sum::<f64>() / (n * n) as f64;
    let centered: Vec<f64> = grid.values.iter().map(|v| v - grid_mean).collect();
    let power = dft2_power(&centered, n);
    let mut low = 0.0;
    let mut total = 0.0;
    for ka in 0..n {
        let fa = ka.min(n - ka);
        for kb in 0..n {
            let fb = kb.min(n - kb);
            let p = power[ka * n + kb];
            total += p;
            if fa.max(fb) <= lowfreq_radius {
                low += p;
            }
        }
    }
    let r_lf = if total == 0.0 { 1.0 } else { low / total };
    Ok(LandscapeMetrics { delta_e_smooth: hi - lo, sigma_smooth: var.sqrt(), r_lf })
}

fn gaussian_smooth_circular(values: &[f64], n: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let radius = ((4.0 * sigma).ceil() as usize).min(n / 2);
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    for d in -(radius as isize)..=(radius as isize) {
        kernel.push((-0.5 * (d as f64 / sigma).powi(2)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }
    // separable convolution with wrap-around
    let mut rows = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (kidx, w) in kernel.iter().enumerate() {
                let jj = (j + n + kidx - radius) % n;
                acc += w * values[i * n + jj];
            }
            rows[i * n + j] = acc;
        }
    }
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for (kidx, w) in kernel.iter().enumerate() {
                let ii = (i + n + kidx - radius) % n;
                acc += w * rows[ii * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// |DFT2(values)|^2, computed row-then-column with precomputed twiddles.
fn dft2_power(values: &[f64], n: usize) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    let tw: Vec<(f64, f64)> = (0..n).map(|k| ((tau * k as f64).cos(), -(tau * k as f64).sin())).collect();
    // rows
    let mut re = vec![0.0; n * n];
    let mut im = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let mut ar = 0.0;
            let mut ai = 0.0;
            for j in 0..n {
                let (c, s) = tw[(k * j) % n];
                let v = values[i * n + j];
                ar += v * c;
                ai += v * s;
            }
            re[i * n + k] = ar;
            im[i * n + k] = ai;
        }
    }
    // columns
    let mut power = vec![0.0; n * n];
    for kcol in 0..n {
        for krow in 0..n {
            let mut ar = 0.0;
            let mut ai = 0.0;
            for i in 0..n {
                let (c, s) = tw[(krow * i) % n];
                let (vr, vi) = (re[i * n + kcol], im[i * n + kcol]);
                ar += vr * c - vi * s;
                ai += vr * s + vi * c;
            }
            power[krow * n + kcol] = ar * ar + ai * ai;
        }
    }
    power
}

/// Outcome of a speedup comparison against a metric target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpeedupOutcome {
    /// (executions ZNE needed) / (executions PIDN needed)
    Ratio(f64),
    /// One or both runs never met the target; carries each run's best value.
    Unreached { best_a: f64, best_b: f64 },
}

/// Executions-to-target ratio between two runs given per-step
/// (cumulative executions, metric value) traces. `higher_is_better`
/// selects the comparison direction (AR vs energy).
pub fn speedup(
    trace_a: &[(u64, f64)],
    trace_b: &[(u64, f64)],
    target: f64,
    higher_is_better: bool,
) -> Result<SpeedupOutcome> {
    let meets = |v: f64| if higher_is_better { v >= target } else { v <= target };
    let first = |trace: &[(u64, f64)]| trace.iter().find(|(_, v)| meets(*v)).map(|&(e, _)| e);
    let best = |trace: &[(u64, f64)]| {
        trace
            .iter()
            .map(|&(_, v)| v)
            .fold(if higher_is_better { f64::NEG_INFINITY } else { f64::INFINITY }, |a, b| {
                if higher_is_better {
                    a.max(b)
                } else {
                    a.min(b)
                }
            })
    };
    if trace_a.is_empty() || trace_b.is_empty() {
        return Err(Error::invalid("speedup needs non-empty traces"));
    }
    match (first(trace_a), first(trace_b)) {
        (Some(ea), Some(eb)) => {
            if eb == 0 {
                return Err(Error::Numeric("zero executions at target".into()));
            }
            Ok(SpeedupOutcome::Ratio(ea as f64 / eb as f64))
        }
        _ => Ok(SpeedupOutcome::Unreached { best_a: best(trace_a), best_b: best(trace_b) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar_boundaries() {
        assert_eq!(
            approximation_ratio(ProblemKind::MaxCut, 2.0, 2.0).unwrap(),
            ArValue::Ratio(1.0)
        );
        assert_eq!(
            approximation_ratio(ProblemKind::Tfim, -3.0, -3.0).unwrap(),
            ArValue::Ratio(1.0)
        );
        assert_eq!(
            approximation_ratio(ProblemKind::MaxCut, 1.5, 2.0).unwrap(),
            ArValue::Ratio(0.75)
        );
        assert!(matches!(
            approximation_ratio(ProblemKind::Sk, 0.5, -3.0).unwrap(),
            ArValue::OutOfDomain { .. }
        ));
        assert!(approximation_ratio(ProblemKind::MaxCut, 1.0, 0.0).is_err());
    }

    #[test]
    fn chemical_accuracy_boundary_is_inclusive() {
        assert_eq!(energy_error(1.0, 1.0), 0.0);
        assert!(chemically_accurate(0.0));
        assert!(chemically_accurate(1.6e-3));
        assert!(!chemically_accurate(28e-3));
    }

    #[test]
    fn cosine_similarity_values() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let v = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn cosine_similarity_scale_invariance() {
        let g1 = [0.3, -0.7, 1.1];
        let g2 = [-0.2, 0.9, 0.4];
        let base = cosine_similarity(&g1, &g2).unwrap();
        let scaled: Vec<f64> = g1.iter().map(|x| 3.5 * x).collect();
        assert!((cosine_similarity(&scaled, &g2).unwrap() - base).abs() < 1e-12);
        let negated: Vec<f64> = g1.iter().map(|x| -2.0 * x).collect();
        assert!((cosine_similarity(&negated, &g2).unwrap() + base).abs() < 1e-12);
    }

    fn constant_grid(n: usize, v: f64) -> LandscapeGrid {
        LandscapeGrid {
            axes: LandscapeAxes::full_period(0, 1, n),
            frozen_theta: vec![0.0, 0.0],
            values: vec![v; n * n],
        }
    }

    #[test]
    fn constant_grid_metrics() {
        let m = landscape_metrics(&constant_grid(32, 2.5), 2.0, 2).unwrap();
        assert!(m.delta_e_smooth.abs() < 1e-12);
        assert!(m.sigma_smooth.abs() < 1e-12);
        assert!((m.r_lf - 1.0).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_has_no_low_frequency_power() {
        let n = 64;
        let mut g = constant_grid(n, 0.0);
        for i in 0..n {
            for j in 0..n {
                g.values[i * n + j] = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        let m = landscape_metrics(&g, 2.0, 2).unwrap();
        assert!(m.r_lf < 1e-10, "r_lf = {}", m.r_lf);
    }

    #[test]
    fn single_low_mode_keeps_all_power() {
        let n = 32;
        let mut g = constant_grid(n, 0.0);
        let tau = 2.0 * std::f64::consts::PI / n as f64;
        for i in 0..n {
            for j in 0..n {
                g.values[i * n + j] = (tau * (i as f64 + 2.0 * j as f64)).cos();
            }
        }
        let m = landscape_metrics(&g, 2.0, 2).unwrap();
        assert!((m.r_lf - 1.0).abs() < 1e-10, "r_lf = {}", m.r_lf);
    }

    #[test]
    fn smoothing_contracts_range() {
        let n = 32;
        let mut g = constant_grid(n, 0.0);
        let mut rng = crate::rng::Stream::new(3, &[7]);
        for v in &mut g.values {
            *v = rng.uniform_in(-1.0, 1.0);
        }
        let m1 = landscape_metrics(&g, 1.0, 2).unwrap();
        let m2 = landscape_metrics(&g, 2.0, 2).unwrap();
        let m4 = landscape_metrics(&g, 4.0, 2).unwrap();
        assert!(m2.delta_e_smooth <= m1.delta_e_smooth + 1e-12);
        assert!(m4.delta_e_smooth <= m2.delta_e_smooth + 1e-12);
        assert!(m2.sigma_smooth <= m1.sigma_smooth + 1e-12);
        assert!(m4.sigma_smooth <= m2.sigma_smooth + 1e-12);
    }

    #[test]
    fn r_lf_ignores_constant_offsets() {
        let n = 32;
        let mut g = constant_grid(n, 0.0);
        let mut rng = crate::rng::Stream::new(9, &[1]);
        for v in &mut g.values {
            *v = rng.uniform_in(-1.0, 1.0);
        }
        let m0 = landscape_metrics(&g, 2.0, 3).unwrap();
        for v in &mut g.values {
            *v += 250.0;
        }
        let m1 = landscape_metrics(&g, 2.0, 3).unwrap();
        assert!((m0.r_lf - m1.r_lf).abs() < 1e-9);
        assert!(m0.r_lf > 0.0 && m0.r_lf < 1.0);
    }

    #[test]
    fn r_lf_radius_guard() {
        assert!(landscape_metrics(&constant_grid(16, 0.0), 2.0, 8).is_err());
    }

    #[test]
    fn speedup_arithmetic() {
        let a = vec![(100u64, 0.5), (560, 0.92)];
        let b = vec![(100u64, 0.95)];
        match speedup(&a, &b, 0.9, true).unwrap() {
            SpeedupOutcome::Ratio(r) => assert!((r - 5.6).abs() < 1e-12),
            _ => panic!("expected ratio"),
        }
        match speedup(&a, &a, 0.9, true).unwrap() {
            SpeedupOutcome::Ratio(r) => assert_eq!(r, 1.0),
            _ => panic!("expected ratio"),
        }
        // target below both initial values: both meet at their first step
        match speedup(&a, &b, 0.1, true).unwrap() {
            SpeedupOutcome::Ratio(r) => assert_eq!(r, 1.0),
            _ => panic!("expected ratio"),
        }
        match speedup(&a, &b, 0.99, true).unwrap() {
            SpeedupOutcome::Unreached { best_a, best_b } => {
                assert_eq!(best_a, 0.92);
                assert_eq!(best_b, 0.95);
            }
            _ => panic!("expected unreached"),
        }
    }
}
