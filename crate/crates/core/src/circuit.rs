//! Parameterized circuits built exclusively from multi-Pauli rotations
//! exp(-i angle/2 P), so the parameter-shift rule is exact for every
//! trainable parameter.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, WeightedPauliSum};

/// How a gate obtains its rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParamRef {
    /// angle = coefficient * theta[index]
    Shared(usize),
    /// angle = coefficient (state preparation, not trainable)
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationGate {
    pub generator: PauliString,
    pub param: ParamRef,
    pub coefficient: f64,
    /// Index of the trainable base occurrence this gate derives from.
    /// Folded copies of one base gate share its index; fixed gates carry
    /// `None`.
    pub base: Option<usize>,
}

impl RotationGate {
    /// Resolved rotation angle for the given parameter vector.
    pub fn angle(&self, theta: &[f64]) -> f64 {
        match self.param {
            ParamRef::Shared(i) => self.coefficient * theta[i],
            ParamRef::Fixed => self.coefficient,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCircuit {
    pub n_qubits: usize,
    pub gates: Vec<RotationGate>,
    pub n_params: usize,
    /// Computational basis state the simulation starts from.
    pub reference: usize,
}

impl ParamCircuit {
    pub fn new(n_qubits: usize, n_params: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::invalid("circuit needs at least one qubit"));
        }
        Ok(ParamCircuit { n_qubits, gates: Vec::new(), n_params, reference: 0 })
    }

    pub fn push_fixed(&mut self, generator: PauliString, angle: f64) -> Result<()> {
        self.validate_generator(&generator)?;
        self.gates.push(RotationGate { generator, param: ParamRef::Fixed, coefficient: angle, base: None });
        Ok(())
    }

    pub fn push_shared(&mut self, generator: PauliString, param_index: usize, coefficient: f64) -> Result<()> {
        self.validate_generator(&generator)?;
        if param_index >= self.n_params {
            return Err(Error::invalid(format!(
                "param index {param_index} out of range ({} params)",
                self.n_params
            )));
        }
        let base = self.n_base_occurrences();
        self.gates.push(RotationGate {
            generator,
            param: ParamRef::Shared(param_index),
            coefficient,
            base: Some(base),
        });
        Ok(())
    }

    fn validate_generator(&self, g: &PauliString) -> Result<()> {
        if g.n_qubits() != self.n_qubits {
            return Err(Error::QubitMismatch(g.n_qubits(), self.n_qubits));
        }
        if g.is_identity() {
            return Err(Error::invalid("rotation generator must be non-identity"));
        }
        Ok(())
    }

    /// Number of distinct trainable base gate occurrences (the `m` in the
    /// execution-accounting formulas).
    pub fn n_base_occurrences(&self) -> usize {
        self.gates
            .iter()
            .filter_map(|g| g.base)
            .max()
            .map(|b| b + 1)
            .unwrap_or(0)
    }

    pub fn trainable_gates(&self) -> impl Iterator<Item = &RotationGate> {
        self.gates.iter().filter(|g| matches!(g.param, ParamRef::Shared(_)))
    }
}

/// QAOA ansatz over a diagonal cost Hamiltonian (plus optional X terms,
/// which would be folded into the mixer convention): `2 * p_layers`
/// parameters ordered gamma_1, beta_1, gamma_2, beta_2, ...
///
/// Layer l appends exp(-i gamma_l h_k P_k) per non-identity cost term and
/// exp(-i beta_l X_q) per qubit; the initial |+>^n is prepared by fixed
/// Y rotations of pi/2.
pub fn build_qaoa_circuit(cost: &WeightedPauliSum, p_layers: usize) -> Result<ParamCircuit> {
    if p_layers < 1 {
        return Err(Error::invalid("QAOA needs at least one layer"));
    }
    let n = cost.n_qubits();
    let mut circ = ParamCircuit::new(n, 2 * p_layers)?;
    for q in 0..n {
        circ.push_fixed(PauliString::single(n, q, Pauli::Y)?, std::f64::consts::FRAC_PI_2)?;
    }
    for l in 0..p_layers {
        for (h_k, s) in cost.non_identity_terms() {
            circ.push_shared(s.clone(), 2 * l, 2.0 * h_k)?;
        }
        for q in 0..n {
            circ.push_shared(PauliString::single(n, q, Pauli::X)?, 2 * l + 1, 2.0)?;
        }
    }
    Ok(circ)
}

/// Parse the circuit-template format:
///
/// ```text
/// qubits <n>
/// params <k>
/// ref <bitstring>            # optional reference product state
/// rot <param_index|c> <coefficient> <letters>
/// ```
pub fn parse_circuit_template(text: &str) -> Result<ParamCircuit> {
    let mut n_qubits: Option<usize> = None;
    let mut n_params: Option<usize> = None;
    let mut reference: Option<(usize, usize)> = None; // (basis index, lineno)
    let mut rots: Vec<(usize, ParamRef, f64, PauliString)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let directive = parts.next().unwrap();
        let perr = |msg: String| Error::Parse { line: lineno, msg };
        match directive {
            "qubits" => {
                let n: usize = parts
                    .next()
                    .ok_or_else(|| perr("qubits needs a count".into()))?
                    .parse()
                    .map_err(|_| perr("bad qubit count".into()))?;
                if n == 0 {
                    return Err(perr("qubit count must be positive".into()));
                }
                n_qubits = Some(n);
            }
            "params" => {
                let k: usize = parts
                    .next()
                    .ok_or_else(|| perr("params needs a count".into()))?
                    .parse()
                    .map_err(|_| perr("bad param count".into()))?;
                n_params = Some(k);
            }
            "ref" => {
                let bits = parts.next().ok_or_else(|| perr("ref needs a bitstring".into()))?;
                let mut b = 0usize;
                for c in bits.chars() {
                    b = (b << 1)
                        | match c {
                            '0' => 0,
                            '1' => 1,
                            _ => return Err(perr(format!("bad reference bit {c:?}"))),
                        };
                }
                reference = Some((b, bits.len()));
            }
            "rot" => {
                let which = parts.next().ok_or_else(|| perr("rot needs a parameter field".into()))?;
                let coeff: f64 = parts
                    .next()
                    .ok_or_else(|| perr("rot needs a coefficient".into()))?
                    .parse()
                    .map_err(|_| perr("bad rotation coefficient".into()))?;
                let letters = parts.next().ok_or_else(|| perr("rot needs Pauli letters".into()))?;
                let s = PauliString::parse(letters).map_err(|_| perr(format!("bad Pauli letters {letters:?}")))?;
                let p = if which == "c" {
                    ParamRef::Fixed
                } else {
                    let i: usize = which.parse().map_err(|_| perr(format!("bad param index {which:?}")))?;
                    ParamRef::Shared(i)
                };
                rots.push((lineno, p, coeff, s));
            }
            other => {
                return Err(perr(format!("unknown directive {other:?}")));
            }
        }
    }

    let n = n_qubits.ok_or_else(|| Error::invalid("template is missing a `qubits` line"))?;
    let k = n_params.ok_or_else(|| Error::invalid("template is missing a `params` line"))?;
    let mut circ = ParamCircuit::new(n, k)?;
    if let Some((b, len)) = reference {
        if len != n {
            return Err(Error::invalid(format!("reference bitstring has {len} bits for {n} qubits")));
        }
        circ.reference = b;
    }
    for (lineno, p, coeff, s) in rots {
        let res = match p {
            ParamRef::Fixed => circ.push_fixed(s, coeff),
            ParamRef::Shared(i) => circ.push_shared(s, i, coeff),
        };
        res.map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
    }
    Ok(circ)
}

pub fn build_trotter_ansatz<P: AsRef<Path>>(path: P) -> Result<ParamCircuit> {
    parse_circuit_template(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{build_maxcut, GraphInstance};

    #[test]
    fn qaoa_single_edge_counts() {
        let g = GraphInstance::new(2, vec![(0, 1)], None).unwrap();
        let h = build_maxcut(&g).unwrap();
        let c = build_qaoa_circuit(&h, 1).unwrap();
        assert_eq!(c.n_params, 2);
        // 2 fixed preps + 1 ZZ + 2 X rotations
        assert_eq!(c.gates.len(), 5);
        assert_eq!(c.trainable_gates().count(), 3);
        assert_eq!(c.n_base_occurrences(), 3);
    }

    #[test]
    fn template_shared_params() {
        let t = "qubits 2\nparams 1\nrot 0 1.0 XY\nrot 0 -1.0 YX\n";
        let c = parse_circuit_template(t).unwrap();
        assert_eq!(c.n_params, 1);
        assert_eq!(c.gates.len(), 2);
    }

    #[test]
    fn template_errors_name_lines() {
        let t = "qubits 2\nparams 1\nspin 0 1.0 XY\n";
        assert!(matches!(parse_circuit_template(t), Err(Error::Parse { line: 3, .. })));
        let t = "qubits 2\nparams 1\nrot 4 1.0 XY\n";
        assert!(matches!(parse_circuit_template(t), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn template_reference_state() {
        let t = "qubits 3\nparams 0\nref 011\n";
        let c = parse_circuit_template(t).unwrap();
        assert_eq!(c.reference, 0b011);
    }
}
