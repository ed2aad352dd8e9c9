//! Problem bundles: Hamiltonian, ansatz circuit, reference value, and
//! the sign convention that turns each objective into a minimization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{build_qaoa_circuit, build_trotter_ansatz, ParamCircuit};
use crate::error::Result;
use crate::hamiltonians::{
    build_maxcut, build_sk, build_tfim, exact_ground_energy, generate_3regular, max_diagonal_value,
    GraphInstance,
};
use crate::pauli::WeightedPauliSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    MaxCut,
    Sk,
    Tfim,
    Molecular,
}

impl ProblemKind {
    /// MaxCut maximizes <H>; everything else minimizes it.
    pub fn maximizes(&self) -> bool {
        matches!(self, ProblemKind::MaxCut)
    }
}

/// One fully-specified benchmark instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub kind: ProblemKind,
    pub hamiltonian: WeightedPauliSum,
    pub circuit: ParamCircuit,
    /// C_max for MaxCut, exact ground energy otherwise.
    pub reference: f64,
}

impl Problem {
    /// The observable gradient descent minimizes: -H for MaxCut, H
    /// otherwise.
    pub fn cost_observable(&self) -> WeightedPauliSum {
        if self.kind.maximizes() {
            self.hamiltonian.negated()
        } else {
            self.hamiltonian.clone()
        }
    }

    /// Map a minimized-cost value back to <H>.
    pub fn h_value(&self, cost: f64) -> f64 {
        if self.kind.maximizes() {
            -cost
        } else {
            cost
        }
    }

    pub fn maxcut_3regular(n: usize, seed: u64, p_layers: usize) -> Result<Problem> {
        let graph = generate_3regular(n, seed)?;
        Problem::maxcut(&graph, p_layers)
    }

    pub fn maxcut(graph: &GraphInstance, p_layers: usize) -> Result<Problem> {
        let hamiltonian = build_maxcut(graph)?;
        let circuit = build_qaoa_circuit(&hamiltonian, p_layers)?;
        let reference = max_diagonal_value(&hamiltonian)?;
        Ok(Problem { kind: ProblemKind::MaxCut, hamiltonian, circuit, reference })
    }

    pub fn sk(n: usize, seed: u64, p_layers: usize) -> Result<Problem> {
        let hamiltonian = build_sk(n, seed)?;
        let circuit = build_qaoa_circuit(&hamiltonian, p_layers)?;
        let reference = exact_ground_energy(&hamiltonian)?;
        Ok(Problem { kind: ProblemKind::Sk, hamiltonian, circuit, reference })
    }

    /// TFIM with the ZZ part as QAOA cost layers; the transverse-field X
    /// terms live in the mixer convention of the ansatz.
    pub fn tfim(n: usize, coupling: f64, field: f64, p_layers: usize) -> Result<Problem> {
        let hamiltonian = build_tfim(n, coupling, field)?;
        // QAOA cost layers take only the diagonal (ZZ) part.
        let diagonal = WeightedPauliSum::new(
            n,
            hamiltonian
                .terms()
                .iter()
                .filter(|(_, s)| s.is_diagonal())
                .map(|(c, s)| (*c, s.clone()))
                .collect(),
        )?;
        let circuit = build_qaoa_circuit(&diagonal, p_layers)?;
        let reference = exact_ground_energy(&hamiltonian)?;
        Ok(Problem { kind: ProblemKind::Tfim, hamiltonian, circuit, reference })
    }

    /// Pre-mapped molecular Hamiltonian plus a circuit-template ansatz,
    /// both from files.
    pub fn molecular<P: AsRef<Path>, Q: AsRef<Path>>(hamiltonian_path: P, template_path: Q) -> Result<Problem> {
        let hamiltonian = WeightedPauliSum::load(hamiltonian_path)?;
        let circuit = build_trotter_ansatz(template_path)?;
        if circuit.n_qubits != hamiltonian.n_qubits() {
            return Err(crate::error::Error::QubitMismatch(circuit.n_qubits, hamiltonian.n_qubits()));
        }
        let reference = exact_ground_energy(&hamiltonian)?;
        Ok(Problem { kind: ProblemKind::Molecular, hamiltonian, circuit, reference })
    }
}
