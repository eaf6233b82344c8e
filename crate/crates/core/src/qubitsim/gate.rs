use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Row-major 2×2 matrix.
pub type Mat2 = [C64; 4];

const fn c(re: f64, im: f64) -> C64 {
    C64 { re, im }
}

/// Single- and controlled single-qubit gates. Rotations follow
/// `R_a(θ) = exp(−iθσ_a/2)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H {
        target: usize,
    },
    X {
        target: usize,
    },
    Rx {
        target: usize,
        angle: f64,
    },
    Ry {
        target: usize,
        angle: f64,
    },
    Rz {
        target: usize,
        angle: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Crx {
        control: usize,
        target: usize,
        angle: f64,
    },
    Unitary {
        target: usize,
        matrix: Mat2,
    },
}

impl Gate {
    /// Custom single-qubit gate; must be unitary within `1e-12`.
    pub fn unitary(target: usize, matrix: Mat2) -> Result<Self> {
        let [a, b, cc, d] = matrix;
        let defect = [
            (a.norm_sqr() + cc.norm_sqr() - 1.0).abs(),
            (b.norm_sqr() + d.norm_sqr() - 1.0).abs(),
            (a.conj() * b + cc.conj() * d).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if defect > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "custom gate is not unitary (defect {defect:e})"
            )));
        }
        Ok(Gate::Unitary { target, matrix })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::H { .. } => "H",
            Gate::X { .. } => "X",
            Gate::Rx { .. } => "RX",
            Gate::Ry { .. } => "RY",
            Gate::Rz { .. } => "RZ",
            Gate::Cnot { .. } => "CNOT",
            Gate::Crx { .. } => "CRX",
            Gate::Unitary { .. } => "U",
        }
    }

    pub fn target(&self) -> usize {
        match *self {
            Gate::H { target }
            | Gate::X { target }
            | Gate::Rx { target, .. }
            | Gate::Ry { target, .. }
            | Gate::Rz { target, .. }
            | Gate::Cnot { target, .. }
            | Gate::Crx { target, .. }
            | Gate::Unitary { target, .. } => target,
        }
    }

    pub fn control(&self) -> Option<usize> {
        match *self {
            Gate::Cnot { control, .. } | Gate::Crx { control, .. } => Some(control),
            _ => None,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx { angle, .. }
            | Gate::Ry { angle, .. }
            | Gate::Rz { angle, .. }
            | Gate::Crx { angle, .. } => Some(angle),
            _ => None,
        }
    }

    /// Matrix applied to the target (when the control, if any, is `|1⟩`).
    pub fn target_matrix(&self) -> Mat2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match *self {
            Gate::H { .. } => [c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)],
            Gate::X { .. } | Gate::Cnot { .. } => {
                [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]
            }
            Gate::Rx { angle, .. } | Gate::Crx { angle, .. } => {
                let (s, co) = (angle / 2.0).sin_cos();
                [c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)]
            }
            Gate::Ry { angle, .. } => {
                let (s, co) = (angle / 2.0).sin_cos();
                [c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]
            }
            Gate::Rz { angle, .. } => [
                C64::from_polar(1.0, -angle / 2.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                C64::from_polar(1.0, angle / 2.0),
            ],
            Gate::Unitary { matrix, .. } => matrix,
        }
    }

    pub fn inverse(&self) -> Gate {
        match self.clone() {
            Gate::Rx { target, angle } => Gate::Rx {
                target,
                angle: -angle,
            },
            Gate::Ry { target, angle } => Gate::Ry {
                target,
                angle: -angle,
            },
            Gate::Rz { target, angle } => Gate::Rz {
                target,
                angle: -angle,
            },
            Gate::Crx {
                control,
                target,
                angle,
            } => Gate::Crx {
                control,
                target,
                angle: -angle,
            },
            Gate::Unitary { target, matrix: m } => Gate::Unitary {
                target,
                matrix: [m[0].conj(), m[2].conj(), m[1].conj(), m[3].conj()],
            },
            g => g,
        }
    }
}

impl fmt::Display for Gate {
    /// `GATE target [control] [angle]`; custom gates append the eight real
    /// numbers of their row-major matrix.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.name(), self.target())?;
        if let Some(ctl) = self.control() {
            write!(f, " {ctl}")?;
        }
        if let Some(a) = self.angle() {
            write!(f, " {a}")?;
        }
        if let Gate::Unitary { matrix, .. } = self {
            for z in matrix {
                write!(f, " {} {}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// Parse one line of the circuit text format. `line` is only used in errors.
pub fn parse_gate(text: &str, line: usize) -> Result<Gate> {
    let err = |message: String| Error::CircuitParse { line, message };
    let mut tokens = text.split_whitespace();
    let name = tokens.next().ok_or_else(|| err("empty line".into()))?;
    let rest: Vec<&str> = tokens.collect();
    let index = |i: usize| -> Result<usize> {
        rest.get(i)
            .ok_or_else(|| err(format!("{name}: missing operand {}", i + 1)))?
            .parse()
            .map_err(|_| err(format!("{name}: bad qubit index {:?}", rest[i])))
    };
    let number = |i: usize| -> Result<f64> {
        rest.get(i)
            .ok_or_else(|| err(format!("{name}: missing operand {}", i + 1)))?
            .parse()
            .map_err(|_| err(format!("{name}: bad number {:?}", rest[i])))
    };
    let arity = match name {
        "H" | "X" => 1,
        "RX" | "RY" | "RZ" | "CNOT" => 2,
        "CRX" => 3,
        "U" => 9,
        _ => return Err(err(format!("unknown gate {name:?}"))),
    };
    if rest.len() != arity {
        return Err(err(format!(
            "{name} takes {arity} operands, found {}",
            rest.len()
        )));
    }
    let target = index(0)?;
    Ok(match name {
        "H" => Gate::H { target },
        "X" => Gate::X { target },
        "RX" => Gate::Rx {
            target,
            angle: number(1)?,
        },
        "RY" => Gate::Ry {
            target,
            angle: number(1)?,
        },
        "RZ" => Gate::Rz {
            target,
            angle: number(1)?,
        },
        "CNOT" => Gate::Cnot {
            target,
            control: index(1)?,
        },
        "CRX" => Gate::Crx {
            target,
            control: index(1)?,
            angle: number(2)?,
        },
        _ => {
            let mut m = [c(0.0, 0.0); 4];
            for (k, z) in m.iter_mut().enumerate() {
                *z = c(number(1 + 2 * k)?, number(2 + 2 * k)?);
            }
            Gate::unitary(target, m).map_err(|e| err(e.to_string()))?
        }
    })
}
