//! Quantitative layer: bounded local observable predicates.
//!
//! An observable predicate is a tuple of `(qubit set, observable)` entries
//! with `0 ≤ A ≤ I` in the Löwner order. Its matrix representation is the sum
//! of the embedded entries, so the expectation against a state depends only
//! on the reduced density matrices over the entry domains.

use serde::{Deserialize, Serialize};

use crate::circuit;
use crate::linalg::{self, ComplexMatrix, QubitSet, Tolerance};
use crate::qai::ProjectivePredicate;
use crate::{Error, Result};

/// Tuple of local observables, each bounded by `0 ≤ A ≤ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservablePredicate {
    entries: Vec<(QubitSet, ComplexMatrix)>,
}

impl ObservablePredicate {
    /// Validates hermiticity and the `0 ≤ A ≤ I` bound on every entry.
    pub fn new(entries: Vec<(QubitSet, ComplexMatrix)>, tol: &Tolerance) -> Result<Self> {
        for (s, a) in &entries {
            if a.dim() != 1usize << s.len() {
                return Err(Error::DimensionMismatch {
                    context: "observable predicate entry",
                    expected: 1usize << s.len(),
                    got: a.dim(),
                });
            }
            a.ensure_hermitian(tol)?;
            let (values, _) = linalg::eigh(a);
            let min = values.first().copied().unwrap_or(0.0);
            let max = values.last().copied().unwrap_or(0.0);
            if min < -tol.atol || max > 1.0 + tol.atol {
                return Err(Error::InvalidPredicate {
                    reason: format!(
                        "observable on {s} has spectrum [{min:.3e}, {max:.3e}] outside [0, 1]"
                    ),
                });
            }
        }
        Ok(ObservablePredicate { entries })
    }

    /// The identity tuple on the given domains.
    pub fn identity(domains: &[QubitSet]) -> Self {
        ObservablePredicate {
            entries: domains
                .iter()
                .map(|s| (s.clone(), ComplexMatrix::identity(1usize << s.len())))
                .collect(),
        }
    }

    /// The zero tuple on the given domains.
    pub fn zero(domains: &[QubitSet]) -> Self {
        ObservablePredicate {
            entries: domains
                .iter()
                .map(|s| (s.clone(), ComplexMatrix::zeros(1usize << s.len())))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(QubitSet, ComplexMatrix)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn domains(&self) -> Vec<QubitSet> {
        self.entries.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn same_domains(&self, other: &ObservablePredicate) -> bool {
        self.len() == other.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, _), (b, _))| a == b)
    }

    pub fn max_qubit(&self) -> usize {
        self.entries.iter().map(|(s, _)| s.max()).max().unwrap_or(0)
    }

    pub fn check_in_register(&self, n: usize) -> Result<()> {
        for (s, _) in &self.entries {
            s.check_in_register(n)?;
        }
        Ok(())
    }

    pub fn entrywise_distance(&self, other: &ObservablePredicate) -> Option<f64> {
        if !self.same_domains(other) {
            return None;
        }
        Some(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|((_, a), (_, b))| a.max_abs_diff(b))
                .fold(0.0, f64::max),
        )
    }

    /// Reads a projective predicate as an observable tuple (projectors are
    /// valid observables).
    pub fn from_projective(pred: &ProjectivePredicate) -> ObservablePredicate {
        ObservablePredicate {
            entries: pred.entries().to_vec(),
        }
    }
}

/// Global matrix representation `Σᵢ A_{sᵢ} ⊗ I_rest`. Capped because the
/// result is dense in `2^n` dimensions.
pub fn matrix_rep(pred: &ObservablePredicate, n: usize, cap: usize) -> Result<ComplexMatrix> {
    if n > cap {
        return Err(Error::CapExceeded { qubits: n, cap });
    }
    pred.check_in_register(n)?;
    let mut acc = ComplexMatrix::zeros(1usize << n);
    for (s, a) in pred.entries() {
        acc = acc.add(&linalg::embed(a, s, n)?)?;
    }
    Ok(acc)
}

/// Entrywise Löwner comparison over identical domains.
pub fn pred_leq(
    a: &ObservablePredicate,
    b: &ObservablePredicate,
    tol: &Tolerance,
) -> Result<bool> {
    if !a.same_domains(b) {
        return Err(Error::DomainMismatch {
            context: "observable predicate comparison".into(),
        });
    }
    for ((_, x), (_, y)) in a.entries().iter().zip(b.entries()) {
        if !linalg::loewner_leq(x, y, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Entrywise projection sandwich `PᵢAᵢPᵢ` over identical domains. For any
/// state satisfying the projective predicate the expectation is unchanged,
/// so sandwiching refines the observable tuple for free.
pub fn sandwich(
    a: &ObservablePredicate,
    p: &ProjectivePredicate,
) -> Result<ObservablePredicate> {
    if a.len() != p.len()
        || a.entries()
            .iter()
            .zip(p.entries())
            .any(|((sa, _), (sp, _))| sa != sp)
    {
        return Err(Error::DomainMismatch {
            context: "observable/projective sandwich".into(),
        });
    }
    let mut entries = Vec::with_capacity(a.len());
    for ((s, obs), (_, proj)) in a.entries().iter().zip(p.entries()) {
        entries.push((s.clone(), proj.mul(obs)?.mul(proj)?));
    }
    Ok(ObservablePredicate { entries })
}

/// Relabels every qubit index through `f` (see `qai::remap_qubits`).
pub fn remap_qubits(
    pred: &ObservablePredicate,
    f: &dyn Fn(usize) -> usize,
) -> Result<ObservablePredicate> {
    let entries = crate::qai::remap_entries(pred.entries(), f)?;
    Ok(ObservablePredicate { entries })
}

// ---- wire format ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ObservableWire {
    domain: Vec<Vec<usize>>,
    observables: Vec<Vec<[f64; 2]>>,
}

pub fn parse_observable(text: &str, tol: &Tolerance) -> Result<ObservablePredicate> {
    let wire: ObservableWire =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("observable JSON: {e}")))?;
    if wire.domain.len() != wire.observables.len() {
        return Err(Error::Parse(format!(
            "domain lists {} sets but {} matrices are given",
            wire.domain.len(),
            wire.observables.len()
        )));
    }
    let mut entries = Vec::with_capacity(wire.domain.len());
    for (set, mat) in wire.domain.into_iter().zip(wire.observables) {
        entries.push((QubitSet::new(set)?, circuit::matrix_from_wire(&mat)?));
    }
    ObservablePredicate::new(entries, tol)
}

pub fn serialize_observable(pred: &ObservablePredicate) -> String {
    let wire = ObservableWire {
        domain: pred
            .entries()
            .iter()
            .map(|(s, _)| s.indices().to_vec())
            .collect(),
        observables: pred
            .entries()
            .iter()
            .map(|(_, a)| circuit::matrix_to_wire(a))
            .collect(),
    };
    serde_json::to_string(&wire).expect("serialization cannot fail")
}
