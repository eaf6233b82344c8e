use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use super::gate::{parse_gate, Gate, Mat2};
use crate::error::{Error, Result};
use crate::qcore::{CMatrix, QuantumState};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 16;

/// Ordered gate list over a fixed register. Qubit 0 is the most significant
/// bit of the amplitude index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(qubits: usize) -> Result<Self> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(Error::InvalidParameter(format!(
                "register of {qubits} qubits (allowed 1..={MAX_QUBITS})"
            )));
        }
        Ok(Circuit {
            qubits,
            gates: Vec::new(),
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        let t = gate.target();
        let bad = t >= self.qubits || gate.control().is_some_and(|c| c >= self.qubits || c == t);
        if bad {
            return Err(Error::InvalidParameter(format!(
                "gate `{gate}` does not fit a {}-qubit register",
                self.qubits
            )));
        }
        self.gates.push(gate);
        Ok(self)
    }

    /// Append all gates of `other`, which must act on a register no larger
    /// than this one.
    pub fn extend(&mut self, other: &Circuit) -> Result<&mut Self> {
        for g in &other.gates {
            self.push(g.clone())?;
        }
        Ok(self)
    }

    pub fn inverse(&self) -> Circuit {
        Circuit {
            qubits: self.qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        let dim = 1usize << self.qubits;
        if state.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: state.dim(),
            });
        }
        let mut amps = state.amplitudes().to_vec();
        self.apply_in_place(&mut amps);
        QuantumState::new(amps, vec![2; self.qubits])
    }

    /// Apply to a raw amplitude buffer of length `2^qubits`.
    pub fn apply_in_place(&self, amps: &mut [C64]) {
        assert_eq!(amps.len(), 1 << self.qubits);
        for g in &self.gates {
            let mask = self.mask(g.target());
            let cmask = g.control().map_or(0, |c| self.mask(c));
            apply_gate(amps, mask, cmask, &g.target_matrix());
        }
    }

    /// Dense unitary of the whole circuit.
    pub fn unitary(&self) -> CMatrix {
        let dim = 1usize << self.qubits;
        let mut u = CMatrix::zeros(dim);
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for j in 0..dim {
            col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            col[j] = C64::new(1.0, 0.0);
            self.apply_in_place(&mut col);
            for (i, z) in col.iter().enumerate() {
                u[(i, j)] = *z;
            }
        }
        u
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.qubits - 1 - qubit)
    }
}

fn apply_gate(amps: &mut [C64], mask: usize, cmask: usize, m: &Mat2) {
    for i in 0..amps.len() {
        if i & mask != 0 || i & cmask != cmask {
            continue;
        }
        let j = i | mask;
        let (a, b) = (amps[i], amps[j]);
        amps[i] = m[0] * a + m[1] * b;
        amps[j] = m[2] * a + m[3] * b;
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# qubits {}", self.qubits)?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for Circuit {
    type Err = Error;

    /// One gate per line. Blank lines and `#` comments are skipped; a
    /// `# qubits N` line fixes the register size, otherwise it is the
    /// smallest register that fits every gate.
    fn from_str(text: &str) -> Result<Self> {
        let mut declared = None;
        let mut gates = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                let mut words = comment.split_whitespace();
                if words.next() == Some("qubits") {
                    let n =
                        words
                            .next()
                            .and_then(|w| w.parse().ok())
                            .ok_or(Error::CircuitParse {
                                line: k + 1,
                                message: "bad qubit count".into(),
                            })?;
                    declared = Some(n);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            gates.push((k + 1, parse_gate(line, k + 1)?));
        }
        let needed = gates
            .iter()
            .map(|(_, g)| g.target().max(g.control().unwrap_or(0)) + 1)
            .max()
            .unwrap_or(1);
        let mut circuit = Circuit::new(declared.unwrap_or(needed))?;
        for (line, g) in gates {
            circuit.push(g).map_err(|e| Error::CircuitParse {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(circuit)
    }
}
