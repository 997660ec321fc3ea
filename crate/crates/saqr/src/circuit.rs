//! Circuit IR, gate library, JSON parsing, and exact unitary semantics.
//!
//! A circuit is a flat, ordered list of gates on an `n`-qubit register.
//! Sequencing is associativity-normalized into the list; the empty list is
//! `skip`. Gate targets are order-significant: the control comes first for
//! `CNOT` and `ControlledPower`.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, ComplexMatrix, Tolerance, C64};
use crate::{Error, Result};

/// Default bound on gate arity. Every gate acts on a constant number of
/// qubits independent of the register size.
pub const DEFAULT_MAX_ARITY: usize = 4;

/// The gate alphabet.
#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    T,
    /// Phase rotation `diag(1, e^{2πi/2^m})`.
    Rm(u32),
    Cnot,
    Swap,
    /// Controlled `base^exponent`; the control is the first target, the base
    /// acts on the remaining targets. Stored unexponentiated so controlled
    /// powers stay exact and cheap via squaring.
    ControlledPower { base: ComplexMatrix, exponent: u64 },
    /// Arbitrary unitary on `log2(dim)` qubits.
    Raw(ComplexMatrix),
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::H | GateKind::X | GateKind::Y | GateKind::Z | GateKind::T => 1,
            GateKind::Rm(_) => 1,
            GateKind::Cnot | GateKind::Swap => 2,
            GateKind::ControlledPower { base, .. } => 1 + log2_dim(base.dim()),
            GateKind::Raw(u) => log2_dim(u.dim()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::T => "T",
            GateKind::Rm(_) => "Rm",
            GateKind::Cnot => "CNOT",
            GateKind::Swap => "SWAP",
            GateKind::ControlledPower { .. } => "ControlledPower",
            GateKind::Raw(_) => "Raw",
        }
    }
}

fn log2_dim(dim: usize) -> usize {
    debug_assert!(dim.is_power_of_two());
    dim.trailing_zeros() as usize
}

/// A gate applied to an ordered list of distinct qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    kind: GateKind,
    targets: Vec<usize>,
}

impl Gate {
    /// Validates arity, target distinctness, and unitarity of raw matrices.
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Result<Self> {
        Gate::with_arity_limit(kind, targets, DEFAULT_MAX_ARITY)
    }

    /// As [`Gate::new`] with an explicit arity bound; rule checkers use this
    /// to wrap whole block-local unitaries as raw gates.
    pub fn with_arity_limit(kind: GateKind, targets: Vec<usize>, max_arity: usize) -> Result<Self> {
        match &kind {
            GateKind::Rm(m) => {
                if *m < 1 {
                    return Err(Error::InvalidGate {
                        reason: "Rm requires m ≥ 1".into(),
                    });
                }
            }
            GateKind::ControlledPower { base, .. } => {
                if !base.dim().is_power_of_two() || base.dim() < 2 {
                    return Err(Error::InvalidGate {
                        reason: format!(
                            "controlled base dimension {} is not a power of 2",
                            base.dim()
                        ),
                    });
                }
                base.ensure_unitary(&Tolerance::default())?;
            }
            GateKind::Raw(u) => {
                if !u.dim().is_power_of_two() || u.dim() < 2 {
                    return Err(Error::InvalidGate {
                        reason: format!("raw gate dimension {} is not a power of 2", u.dim()),
                    });
                }
                u.ensure_unitary(&Tolerance::default())?;
            }
            _ => {}
        }
        let arity = kind.arity();
        if arity > max_arity {
            return Err(Error::InvalidGate {
                reason: format!("gate arity {arity} exceeds the limit {max_arity}"),
            });
        }
        if targets.len() != arity {
            return Err(Error::InvalidGate {
                reason: format!(
                    "gate {} expects {arity} target(s), got {}",
                    kind.name(),
                    targets.len()
                ),
            });
        }
        let mut sorted = targets.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != targets.len() {
            return Err(Error::InvalidGate {
                reason: format!("duplicate target in {targets:?}"),
            });
        }
        if targets.iter().any(|&q| q == 0) {
            return Err(Error::InvalidGate {
                reason: "qubit indices are 1-based".into(),
            });
        }
        Ok(Gate { kind, targets })
    }

    pub fn h(q: usize) -> Gate {
        Gate::new(GateKind::H, vec![q]).expect("valid")
    }

    pub fn x(q: usize) -> Gate {
        Gate::new(GateKind::X, vec![q]).expect("valid")
    }

    pub fn z(q: usize) -> Gate {
        Gate::new(GateKind::Z, vec![q]).expect("valid")
    }

    pub fn t(q: usize) -> Gate {
        Gate::new(GateKind::T, vec![q]).expect("valid")
    }

    pub fn rm(m: u32, q: usize) -> Gate {
        Gate::new(GateKind::Rm(m), vec![q]).expect("valid")
    }

    pub fn cnot(control: usize, target: usize) -> Gate {
        Gate::new(GateKind::Cnot, vec![control, target]).expect("valid")
    }

    pub fn swap(a: usize, b: usize) -> Gate {
        Gate::new(GateKind::Swap, vec![a, b]).expect("valid")
    }

    /// Controlled `R_m` phase rotation (control first).
    pub fn controlled_rm(m: u32, control: usize, target: usize) -> Gate {
        Gate::new(
            GateKind::ControlledPower {
                base: rm_matrix(m),
                exponent: 1,
            },
            vec![control, target],
        )
        .expect("valid")
    }

    pub fn controlled_power(
        base: ComplexMatrix,
        exponent: u64,
        targets: Vec<usize>,
    ) -> Result<Gate> {
        Gate::new(GateKind::ControlledPower { base, exponent }, targets)
    }

    pub fn raw(u: ComplexMatrix, targets: Vec<usize>) -> Result<Gate> {
        Gate::new(GateKind::Raw(u), targets)
    }

    pub fn kind(&self) -> &GateKind {
        &self.kind
    }

    /// Order-significant target list (control first where applicable).
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn arity(&self) -> usize {
        self.targets.len()
    }

    /// The qubits the gate acts on, as a sorted set.
    pub fn qubit_set(&self) -> linalg::QubitSet {
        linalg::QubitSet::new(self.targets.clone()).expect("targets are distinct and 1-based")
    }

    pub fn max_target(&self) -> usize {
        self.targets.iter().copied().max().expect("nonempty")
    }
}

pub fn h_matrix() -> ComplexMatrix {
    ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, -1.0]])
        .expect("square")
        .scale_re(1.0 / 2.0_f64.sqrt())
}

pub fn x_matrix() -> ComplexMatrix {
    ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("square")
}

pub fn y_matrix() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
        vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
    ])
    .expect("square")
}

pub fn z_matrix() -> ComplexMatrix {
    ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, -1.0]]).expect("square")
}

pub fn t_matrix() -> ComplexMatrix {
    phase_matrix(PI / 4.0)
}

/// `diag(1, e^{iφ})`.
pub fn phase_matrix(phi: f64) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        vec![C64::new(0.0, 0.0), Complex::from_polar(1.0, phi)],
    ])
    .expect("square")
}

/// `R_m = diag(1, e^{2πi/2^m})`.
pub fn rm_matrix(m: u32) -> ComplexMatrix {
    phase_matrix(2.0 * PI / (1u64 << m) as f64)
}

pub fn swap_matrix() -> ComplexMatrix {
    ComplexMatrix::from_real(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 0.0, 1.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
    ])
    .expect("square")
}

pub fn cnot_matrix() -> ComplexMatrix {
    ComplexMatrix::from_real(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
        &[0.0, 0.0, 1.0, 0.0],
    ])
    .expect("square")
}

/// The unitary matrix of a gate on its own `2^arity`-dimensional register,
/// first target most significant.
pub fn gate_unitary(gate: &Gate) -> ComplexMatrix {
    match gate.kind() {
        GateKind::H => h_matrix(),
        GateKind::X => x_matrix(),
        GateKind::Y => y_matrix(),
        GateKind::Z => z_matrix(),
        GateKind::T => t_matrix(),
        GateKind::Rm(m) => rm_matrix(*m),
        GateKind::Cnot => cnot_matrix(),
        GateKind::Swap => swap_matrix(),
        GateKind::ControlledPower { base, exponent } => {
            let powered = base.pow(*exponent);
            let d = powered.dim();
            let mut u = ComplexMatrix::identity(2 * d);
            for r in 0..d {
                for c in 0..d {
                    u.set(d + r, d + c, powered.get(r, c));
                }
            }
            u
        }
        GateKind::Raw(u) => u.clone(),
    }
}

/// Sequence of gates on a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("register size must be ≥ 1".into()));
        }
        for g in &gates {
            if g.max_target() > n {
                return Err(Error::IndexOutOfRange {
                    index: g.max_target(),
                    register: n,
                });
            }
        }
        Ok(Circuit { n, gates })
    }

    pub fn skip(n: usize) -> Result<Self> {
        Circuit::new(n, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn is_skip(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Concatenation `self; other` on the same register.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                context: "circuit concatenation register",
                expected: self.n,
                got: other.n,
            });
        }
        let mut gates = self.gates.clone();
        gates.extend(other.gates.iter().cloned());
        Circuit::new(self.n, gates)
    }
}

/// Right-to-left product of the embedded gate unitaries: the full-register
/// matrix semantics of the circuit. Capped because the result is dense.
pub fn circuit_unitary(c: &Circuit, cap: usize) -> Result<ComplexMatrix> {
    if c.n() > cap {
        return Err(Error::CapExceeded { qubits: c.n(), cap });
    }
    let dim = 1usize << c.n();
    let mut u = ComplexMatrix::identity(dim);
    for gate in c.gates() {
        let g = linalg::embed_ordered(&gate_unitary(gate), gate.targets(), c.n())?;
        u = g.mul(&u)?;
    }
    Ok(u)
}

// ---- wire format ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GateWire {
    kind: String,
    targets: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exponent: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct CircuitWire {
    n: usize,
    gates: Vec<GateWire>,
}

/// Serializes a matrix as a row-major list of `[re, im]` pairs.
pub fn matrix_to_wire(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    m.data().iter().map(|z| [z.re, z.im]).collect()
}

/// Reads a row-major `[re, im]` list back into a square matrix.
pub fn matrix_from_wire(entries: &[[f64; 2]]) -> Result<ComplexMatrix> {
    let dim = (entries.len() as f64).sqrt().round() as usize;
    if dim == 0 || dim * dim != entries.len() {
        return Err(Error::Parse(format!(
            "matrix entry list of length {} is not square",
            entries.len()
        )));
    }
    ComplexMatrix::from_vec(
        dim,
        entries.iter().map(|&[re, im]| C64::new(re, im)).collect(),
    )
}

fn gate_to_wire(g: &Gate) -> GateWire {
    let (m, exponent, matrix) = match g.kind() {
        GateKind::Rm(m) => (Some(*m), None, None),
        GateKind::ControlledPower { base, exponent } => {
            (None, Some(*exponent), Some(matrix_to_wire(base)))
        }
        GateKind::Raw(u) => (None, None, Some(matrix_to_wire(u))),
        _ => (None, None, None),
    };
    GateWire {
        kind: g.kind().name().to_string(),
        targets: g.targets().to_vec(),
        m,
        exponent,
        matrix,
    }
}

fn gate_from_wire(w: &GateWire) -> Result<Gate> {
    let kind = match w.kind.as_str() {
        "H" => GateKind::H,
        "X" => GateKind::X,
        "Y" => GateKind::Y,
        "Z" => GateKind::Z,
        "T" => GateKind::T,
        "Rm" => GateKind::Rm(
            w.m.ok_or_else(|| Error::Parse("Rm gate requires field \"m\"".into()))?,
        ),
        "CNOT" => GateKind::Cnot,
        "SWAP" => GateKind::Swap,
        "ControlledPower" => {
            let base = matrix_from_wire(w.matrix.as_deref().ok_or_else(|| {
                Error::Parse("ControlledPower requires field \"matrix\"".into())
            })?)?;
            GateKind::ControlledPower {
                base,
                exponent: w.exponent.ok_or_else(|| {
                    Error::Parse("ControlledPower requires field \"exponent\"".into())
                })?,
            }
        }
        "Raw" => GateKind::Raw(matrix_from_wire(
            w.matrix
                .as_deref()
                .ok_or_else(|| Error::Parse("Raw gate requires field \"matrix\"".into()))?,
        )?),
        other => return Err(Error::Parse(format!("unknown gate kind {other:?}"))),
    };
    Gate::new(kind, w.targets.clone())
}

/// Parses the circuit JSON wire format.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let wire: CircuitWire =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("circuit JSON: {e}")))?;
    let gates = wire
        .gates
        .iter()
        .map(gate_from_wire)
        .collect::<Result<Vec<_>>>()?;
    Circuit::new(wire.n, gates)
}

/// Serializes a circuit to the JSON wire format; `parse_circuit` inverts this
/// bit-exactly.
pub fn serialize_circuit(c: &Circuit) -> String {
    let wire = CircuitWire {
        n: c.n(),
        gates: c.gates().iter().map(gate_to_wire).collect(),
    };
    serde_json::to_string(&wire).expect("serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_ket, ket_of_bits};

    #[test]
    fn parse_bell_pair() {
        let c = parse_circuit(
            r#"{"n":2,"gates":[{"kind":"H","targets":[1]},{"kind":"CNOT","targets":[1,2]}]}"#,
        )
        .unwrap();
        assert_eq!(c.n(), 2);
        assert_eq!(c.len(), 2);
        assert_eq!(c.gates()[1].targets(), &[1, 2]);
    }

    #[test]
    fn parse_skip_and_out_of_range() {
        let skip = parse_circuit(r#"{"n":1,"gates":[]}"#).unwrap();
        assert!(skip.is_skip());
        let err = parse_circuit(r#"{"n":2,"gates":[{"kind":"CNOT","targets":[1,3]}]}"#);
        assert!(matches!(err, Err(Error::IndexOutOfRange { .. })));
        assert!(parse_circuit("{").is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let u = ComplexMatrix::from_rows(&[
            vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)],
            vec![C64::new(0.0, 0.8), C64::new(0.6, 0.0)],
        ])
        .unwrap();
        let c = Circuit::new(
            3,
            vec![
                Gate::h(1),
                Gate::rm(3, 2),
                Gate::cnot(2, 3),
                Gate::controlled_power(u.clone(), 5, vec![1, 3]).unwrap(),
                Gate::raw(u, vec![2]).unwrap(),
            ],
        )
        .unwrap();
        let text = serialize_circuit(&c);
        let back = parse_circuit(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(serialize_circuit(&back), text);
    }

    #[test]
    fn hadamard_matrix_matches_table() {
        let h = gate_unitary(&Gate::h(1));
        let s = 1.0 / 2.0_f64.sqrt();
        assert!((h.get(0, 0).re - s).abs() < 1e-15);
        assert!((h.get(1, 1).re + s).abs() < 1e-15);
    }

    #[test]
    fn r2_phases_the_one_state() {
        let r2 = gate_unitary(&Gate::rm(2, 1));
        let out = r2.apply(&basis_ket(2, 1));
        assert!((out[1] - C64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn controlled_power_zero_exponent_is_identity() {
        let g = Gate::controlled_power(x_matrix(), 0, vec![1, 2]).unwrap();
        assert!(gate_unitary(&g).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn controlled_power_applies_base_power() {
        let g = Gate::controlled_power(t_matrix(), 2, vec![1, 2]).unwrap();
        // T² = diag(1, i) on the target when the control is |1⟩
        let out = gate_unitary(&g).apply(&ket_of_bits(&[true, true]));
        assert!((out[3] - C64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn skip_and_involution_unitaries() {
        let skip = Circuit::skip(1).unwrap();
        assert!(
            circuit_unitary(&skip, 12)
                .unwrap()
                .max_abs_diff(&ComplexMatrix::identity(2))
                < 1e-15
        );
        let hh = Circuit::new(1, vec![Gate::h(1), Gate::h(1)]).unwrap();
        assert!(
            circuit_unitary(&hh, 12)
                .unwrap()
                .max_abs_diff(&ComplexMatrix::identity(2))
                < 1e-14
        );
    }

    #[test]
    fn bell_circuit_state() {
        let bell = Circuit::new(2, vec![Gate::h(1), Gate::cnot(1, 2)]).unwrap();
        let u = circuit_unitary(&bell, 12).unwrap();
        let out = u.apply(&ket_of_bits(&[false, false]));
        let s = 1.0 / 2.0_f64.sqrt();
        assert!((out[0] - C64::new(s, 0.0)).norm() < 1e-14);
        assert!((out[3] - C64::new(s, 0.0)).norm() < 1e-14);
        assert!(out[1].norm() < 1e-14 && out[2].norm() < 1e-14);
    }

    #[test]
    fn sequencing_is_a_product() {
        let c1 = Circuit::new(2, vec![Gate::h(1)]).unwrap();
        let c2 = Circuit::new(2, vec![Gate::cnot(1, 2)]).unwrap();
        let seq = c1.then(&c2).unwrap();
        let u = circuit_unitary(&seq, 12).unwrap();
        let u2u1 = circuit_unitary(&c2, 12)
            .unwrap()
            .mul(&circuit_unitary(&c1, 12).unwrap())
            .unwrap();
        assert!(u.max_abs_diff(&u2u1) < 1e-12);
    }

    #[test]
    fn unitarity_enforced_for_raw_gates() {
        let bad = ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, 2.0]]).unwrap();
        assert!(Gate::raw(bad, vec![1]).is_err());
    }

    #[test]
    fn cap_enforced() {
        let c = Circuit::skip(13).unwrap();
        assert!(matches!(
            circuit_unitary(&c, 12),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn every_gate_unitary_is_unitary() {
        let gates = vec![
            Gate::h(1),
            Gate::x(1),
            Gate::new(GateKind::Y, vec![1]).unwrap(),
            Gate::z(1),
            Gate::t(1),
            Gate::rm(5, 1),
            Gate::cnot(1, 2),
            Gate::swap(1, 2),
            Gate::controlled_rm(3, 1, 2),
        ];
        for g in gates {
            assert!(
                gate_unitary(&g).unitarity_residual() < 1e-12,
                "{:?}",
                g.kind().name()
            );
        }
    }
}
