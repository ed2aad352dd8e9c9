//! Pauli-string algebra and weighted Pauli sums.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Pauli letter per qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A tensor product of Pauli letters over `n_qubits` qubits.
///
/// Qubit 0 is the leftmost letter and the most significant bit of a
/// computational basis index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::invalid("Pauli string must cover at least one qubit"));
        }
        Ok(PauliString { letters })
    }

    pub fn identity(n_qubits: usize) -> Self {
        PauliString { letters: vec![Pauli::I; n_qubits] }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let letters: Option<Vec<_>> = s.chars().map(Pauli::from_char).collect();
        match letters {
            Some(l) if !l.is_empty() => Ok(PauliString { letters: l }),
            _ => Err(Error::invalid(format!("bad Pauli string {s:?}"))),
        }
    }

    /// Single non-identity letter on `qubit` of an `n_qubits` register.
    pub fn single(n_qubits: usize, qubit: usize, p: Pauli) -> Result<Self> {
        if qubit >= n_qubits {
            return Err(Error::invalid(format!("qubit {qubit} out of range for {n_qubits}")));
        }
        let mut letters = vec![Pauli::I; n_qubits];
        letters[qubit] = p;
        PauliString::new(letters)
    }

    /// Two-qubit letter pair, identity elsewhere.
    pub fn pair(n_qubits: usize, a: usize, b: usize, pa: Pauli, pb: Pauli) -> Result<Self> {
        if a == b {
            return Err(Error::invalid("pair qubits must differ"));
        }
        let mut s = PauliString::single(n_qubits, a, pa)?;
        if b >= n_qubits {
            return Err(Error::invalid(format!("qubit {b} out of range for {n_qubits}")));
        }
        s.letters[b] = pb;
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// Letters are all I or Z (the string is diagonal in the Z basis).
    pub fn is_diagonal(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I || p == Pauli::Z)
    }

    /// Qubits carrying a non-identity letter.
    pub fn support(&self) -> Vec<usize> {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(q, _)| q)
            .collect()
    }

    /// Bit mask (qubit 0 = MSB) of qubits whose basis bit this string flips.
    pub fn flip_mask(&self) -> usize {
        let n = self.letters.len();
        let mut m = 0usize;
        for (q, &p) in self.letters.iter().enumerate() {
            if p == Pauli::X || p == Pauli::Y {
                m |= 1 << (n - 1 - q);
            }
        }
        m
    }

    /// Phase factor phi(k) with `P |k> = phi(k) |k ^ flip_mask|>`.
    pub fn phase(&self, basis: usize) -> Complex64 {
        let n = self.letters.len();
        let mut ph = Complex64::new(1.0, 0.0);
        for (q, &p) in self.letters.iter().enumerate() {
            let bit = (basis >> (n - 1 - q)) & 1;
            match p {
                Pauli::I | Pauli::X => {}
                Pauli::Y => {
                    // Y|0> = i|1>, Y|1> = -i|0>
                    ph *= if bit == 0 { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) };
                }
                Pauli::Z => {
                    if bit == 1 {
                        ph = -ph;
                    }
                }
            }
        }
        ph
    }

    /// Diagonal entry <k|P|k> for a diagonal string, as +-1.
    pub fn diagonal_sign(&self, basis: usize) -> f64 {
        debug_assert!(self.is_diagonal());
        let n = self.letters.len();
        let mut s = 1.0;
        for (q, &p) in self.letters.iter().enumerate() {
            if p == Pauli::Z && (basis >> (n - 1 - q)) & 1 == 1 {
                s = -s;
            }
        }
        s
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &p in &self.letters {
            write!(f, "{}", p.to_char())?;
        }
        Ok(())
    }
}

/// An observable H = sum_k h_k P_k with real coefficients.
///
/// Duplicate strings are merged on construction; term order is the
/// lexicographic order of the strings so serialized output is canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl WeightedPauliSum {
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::invalid("observable needs at least one qubit"));
        }
        let mut merged: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (c, s) in terms {
            if s.n_qubits() != n_qubits {
                return Err(Error::QubitMismatch(s.n_qubits(), n_qubits));
            }
            if !c.is_finite() {
                return Err(Error::invalid(format!("non-finite coefficient for {s}")));
            }
            *merged.entry(s).or_insert(0.0) += c;
        }
        Ok(WeightedPauliSum {
            n_qubits,
            terms: merged.into_iter().map(|(s, c)| (c, s)).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of the all-identity string (0.0 when absent).
    pub fn identity_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .find(|(_, s)| s.is_identity())
            .map(|(c, _)| *c)
            .unwrap_or(0.0)
    }

    /// Terms with at least one non-identity letter.
    pub fn non_identity_terms(&self) -> impl Iterator<Item = &(f64, PauliString)> {
        self.terms.iter().filter(|(_, s)| !s.is_identity())
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|(_, s)| s.is_diagonal())
    }

    /// Negated copy (used to turn a maximization objective into a cost).
    pub fn negated(&self) -> WeightedPauliSum {
        WeightedPauliSum {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(c, s)| (-c, s.clone())).collect(),
        }
    }

    /// Dense 2^n x 2^n matrix in row-major order.
    pub fn dense_matrix(&self) -> Vec<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (c, s) in &self.terms {
            let mask = s.flip_mask();
            for k in 0..dim {
                // P[k ^ mask, k] = phase(k)
                m[(k ^ mask) * dim + k] += *c * s.phase(k);
            }
        }
        m
    }

    /// <b|H|b> for a computational basis state; requires a diagonal sum.
    pub fn diagonal_value(&self, basis: usize) -> Result<f64> {
        if !self.is_diagonal() {
            return Err(Error::invalid("observable is not diagonal"));
        }
        Ok(self
            .terms
            .iter()
            .map(|(c, s)| c * s.diagonal_sign(basis))
            .sum())
    }

    /// Parse the one-term-per-line text format: `<coefficient> <letters>`,
    /// `#` comments and blank lines ignored.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut terms: Vec<(f64, PauliString)> = Vec::new();
        let mut n_qubits: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (coeff, letters) = match (parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(l), None) => (c, l),
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected `<coefficient> <letters>`, got {line:?}"),
                    })
                }
            };
            let c: f64 = coeff.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad coefficient {coeff:?}"),
            })?;
            let s = PauliString::parse(letters).map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad Pauli letters {letters:?}"),
            })?;
            match n_qubits {
                None => n_qubits = Some(s.n_qubits()),
                Some(n) if n != s.n_qubits() => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("string length {} differs from earlier lines ({n})", s.n_qubits()),
                    })
                }
                _ => {}
            }
            terms.push((c, s));
        }
        let n = n_qubits.ok_or_else(|| Error::invalid("empty Pauli-sum file"))?;
        WeightedPauliSum::new(n, terms)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        WeightedPauliSum::parse_text(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, s) in &self.terms {
            out.push_str(&format!("{c:?} {s}\n"));
        }
        out
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_line() {
        let h = WeightedPauliSum::parse_text("0.5 ZZII").unwrap();
        assert_eq!(h.n_qubits(), 4);
        assert_eq!(h.n_terms(), 1);
        assert_eq!(h.terms()[0].0, 0.5);
    }

    #[test]
    fn duplicate_lines_merge() {
        let h = WeightedPauliSum::parse_text("0.5 ZI\n0.5 ZI\n").unwrap();
        assert_eq!(h.n_terms(), 1);
        assert_eq!(h.terms()[0].0, 1.0);
    }

    #[test]
    fn save_load_round_trip() {
        let h = WeightedPauliSum::parse_text("0.25 XY\n-1.5 ZI\n3.0 II").unwrap();
        let h2 = WeightedPauliSum::parse_text(&h.to_text()).unwrap();
        assert_eq!(h, h2);
    }

    #[test]
    fn inconsistent_lengths_rejected() {
        let err = WeightedPauliSum::parse_text("1.0 ZZ\n1.0 ZZZ").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = WeightedPauliSum::parse_text("1.0 ZZ\nnonsense").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn dense_matrix_is_hermitian() {
        let h = WeightedPauliSum::parse_text("0.7 XY\n0.3 ZZ\n-0.2 YI\n0.5 II").unwrap();
        let dim = 4;
        let m = h.dense_matrix();
        for i in 0..dim {
            for j in 0..dim {
                let d = m[i * dim + j] - m[j * dim + i].conj();
                assert!(d.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn y_phase_convention() {
        let y = PauliString::parse("Y").unwrap();
        assert_eq!(y.phase(0), Complex64::new(0.0, 1.0));
        assert_eq!(y.phase(1), Complex64::new(0.0, -1.0));
        assert_eq!(y.flip_mask(), 1);
    }
}
