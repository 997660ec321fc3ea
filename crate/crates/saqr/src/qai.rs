//! Qualitative layer: projective predicates and their local abstract
//! transformer.
//!
//! A projective predicate is a tuple of projectors, each on a small qubit
//! set. A state satisfies the predicate when every reduced density matrix is
//! supported inside the corresponding projector; the concretization is the
//! intersection of the embedded projectors. One gate is propagated by, per
//! entry, intersecting every tuple projector that fits inside the local
//! register `sᵢ ∪ s(F)`, conjugating by the gate, tracing back down to `sᵢ`,
//! and taking the support. Cost is exponential only in the local register
//! size, never in `n`.

use serde::{Deserialize, Serialize};

use crate::circuit::{self, Circuit, Gate};
use crate::linalg::{self, ComplexMatrix, QubitSet, Tolerance, C64};
use crate::{Error, Result};

/// Tuple of `(qubit set, projector)` entries. The domain list is fixed for a
/// whole analysis run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectivePredicate {
    entries: Vec<(QubitSet, ComplexMatrix)>,
}

impl ProjectivePredicate {
    /// Validates that every matrix is a projector of the right dimension.
    pub fn new(entries: Vec<(QubitSet, ComplexMatrix)>, tol: &Tolerance) -> Result<Self> {
        for (s, p) in &entries {
            if p.dim() != 1usize << s.len() {
                return Err(Error::DimensionMismatch {
                    context: "projective predicate entry",
                    expected: 1usize << s.len(),
                    got: p.dim(),
                });
            }
            p.ensure_projector(tol)?;
        }
        Ok(ProjectivePredicate { entries })
    }

    /// The identity predicate on the given domains.
    pub fn identity(domains: &[QubitSet]) -> Self {
        ProjectivePredicate {
            entries: domains
                .iter()
                .map(|s| (s.clone(), ComplexMatrix::identity(1usize << s.len())))
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

    pub fn same_domains(&self, other: &ProjectivePredicate) -> bool {
        self.len() == other.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, _), (b, _))| a == b)
    }

    /// Largest qubit index mentioned by any entry.
    pub fn max_qubit(&self) -> usize {
        self.entries.iter().map(|(s, _)| s.max()).max().unwrap_or(0)
    }

    pub fn check_in_register(&self, n: usize) -> Result<()> {
        for (s, _) in &self.entries {
            s.check_in_register(n)?;
        }
        Ok(())
    }

    /// Entrywise max-abs difference; `None` when domains differ.
    pub fn entrywise_distance(&self, other: &ProjectivePredicate) -> Option<f64> {
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

    /// Entrywise subspace containment `self ⊑ other` (each projector of
    /// `self` inside the matching projector of `other`).
    pub fn contained_in(&self, other: &ProjectivePredicate, tol: &Tolerance) -> Result<bool> {
        if !self.same_domains(other) {
            return Err(Error::DomainMismatch {
                context: "projective containment".into(),
            });
        }
        for ((_, p), (_, q)) in self.entries.iter().zip(&other.entries) {
            if !linalg::loewner_leq(p, q, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Global projector `γ(𝒫)`: the intersection of every embedded entry.
/// Materializes a `2^n` matrix, hence capped.
pub fn concretize(pred: &ProjectivePredicate, n: usize, cap: usize) -> Result<ComplexMatrix> {
    if n > cap {
        return Err(Error::CapExceeded { qubits: n, cap });
    }
    pred.check_in_register(n)?;
    let tol = Tolerance::default();
    let mut acc = ComplexMatrix::identity(1usize << n);
    for (s, p) in pred.entries() {
        let embedded = linalg::embed(p, s, n)?;
        acc = linalg::intersect(&acc, &embedded, &tol)?;
    }
    Ok(acc)
}

/// Outcome of pushing one gate through one predicate entry.
#[derive(Debug, Clone)]
pub struct EntryUpdate {
    /// Spectral gap of the support decision, for auditing borderline ranks.
    pub support_gap: f64,
    /// Width of the local register the update was computed on.
    pub local_qubits: usize,
}

/// Result of [`abstract_apply`]: the transformed predicate plus per-entry
/// audit data.
#[derive(Debug, Clone)]
pub struct AbstractStep {
    pub predicate: ProjectivePredicate,
    pub updates: Vec<EntryUpdate>,
}

/// Local abstract transformer for a single gate.
///
/// Entries disjoint from the gate pass through unchanged. For the rest, the
/// update is computed on the register `sᵢ ∪ s(F)` only.
pub fn abstract_apply(
    gate: &Gate,
    pred: &ProjectivePredicate,
    tol: &Tolerance,
) -> Result<AbstractStep> {
    let gate_set = gate.qubit_set();
    let gate_u = circuit::gate_unitary(gate);
    let mut out = Vec::with_capacity(pred.len());
    let mut updates = Vec::with_capacity(pred.len());
    for (s_i, p_i) in pred.entries() {
        if !s_i.intersects(&gate_set) {
            out.push((s_i.clone(), p_i.clone()));
            updates.push(EntryUpdate {
                support_gap: f64::INFINITY,
                local_qubits: 0,
            });
            continue;
        }
        let local = s_i.union(&gate_set);
        let ln = local.len();
        let ldim = 1usize << ln;
        // intersection of every tuple entry that fits in the local register
        let mut constraint = ComplexMatrix::identity(ldim);
        for (s_j, p_j) in pred.entries() {
            if !s_j.is_subset_of(&local) {
                continue;
            }
            let positions: Vec<usize> = s_j
                .indices()
                .iter()
                .map(|q| local.position(*q).expect("subset") + 1)
                .collect();
            let embedded = linalg::embed_ordered(p_j, &positions, ln)?;
            constraint = linalg::intersect(&constraint, &embedded, tol)?;
        }
        let gate_positions: Vec<usize> = gate
            .targets()
            .iter()
            .map(|q| local.position(*q).expect("gate inside local register") + 1)
            .collect();
        let u_local = linalg::embed_ordered(&gate_u, &gate_positions, ln)?;
        let conjugated = constraint.conjugate_by(&u_local)?;
        let trace_out: Vec<usize> = local
            .indices()
            .iter()
            .enumerate()
            .filter(|(_, q)| !s_i.contains(**q))
            .map(|(pos, _)| pos + 1)
            .collect();
        let reduced = linalg::partial_trace(&conjugated, ln, &trace_out)?;
        let (q_i, support_gap) = linalg::support_with_gap(&reduced, tol)?;
        out.push((s_i.clone(), q_i));
        updates.push(EntryUpdate {
            support_gap,
            local_qubits: ln,
        });
    }
    Ok(AbstractStep {
        predicate: ProjectivePredicate { entries: out },
        updates,
    })
}

/// One recorded step of an analysis run.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub gate_index: usize,
    pub predicate: ProjectivePredicate,
    /// Smallest support gap across the entries this gate touched.
    pub min_support_gap: f64,
    pub peak_local_qubits: usize,
}

/// Full analysis output: the final predicate and the per-gate trace.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub initial: ProjectivePredicate,
    pub steps: Vec<TraceStep>,
    pub result: ProjectivePredicate,
    /// Widest local register any update touched.
    pub peak_local_qubits: usize,
}

/// Left fold of [`abstract_apply`] over the circuit, recording the
/// intermediate predicate after every gate.
pub fn analyze(c: &Circuit, pred: &ProjectivePredicate, tol: &Tolerance) -> Result<Analysis> {
    pred.check_in_register(c.n())?;
    let mut current = pred.clone();
    let mut steps = Vec::with_capacity(c.len());
    let mut peak = 0usize;
    for (gate_index, gate) in c.gates().iter().enumerate() {
        let step = abstract_apply(gate, &current, tol)?;
        let min_gap = step
            .updates
            .iter()
            .map(|u| u.support_gap)
            .fold(f64::INFINITY, f64::min);
        let local_peak = step.updates.iter().map(|u| u.local_qubits).max().unwrap_or(0);
        peak = peak.max(local_peak);
        current = step.predicate.clone();
        steps.push(TraceStep {
            gate_index,
            predicate: step.predicate,
            min_support_gap: min_gap,
            peak_local_qubits: local_peak,
        });
    }
    Ok(Analysis {
        initial: pred.clone(),
        steps,
        result: current,
        peak_local_qubits: peak,
    })
}

/// Builds the adjacent-pair predicate whose concretization is
/// `span{|a₁⋯aₙ⟩, |b₁⋯bₙ⟩}`: entry `(i, i+1)` spans `|aᵢa_{i+1}⟩` and
/// `|bᵢb_{i+1}⟩`. Requires `|aᵢ⟩ ∦ |bᵢ⟩` for every `i`.
pub fn two_state_span_predicate(
    a_states: &[Vec<C64>],
    b_states: &[Vec<C64>],
    tol: &Tolerance,
) -> Result<ProjectivePredicate> {
    if a_states.len() != b_states.len() {
        return Err(Error::DimensionMismatch {
            context: "span predicate state lists",
            expected: a_states.len(),
            got: b_states.len(),
        });
    }
    let n = a_states.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "two-state span predicate needs at least 2 qubits".into(),
        ));
    }
    let normalize = |v: &Vec<C64>, what: &str| -> Result<Vec<C64>> {
        if v.len() != 2 {
            return Err(Error::DimensionMismatch {
                context: "span predicate single-qubit state",
                expected: 2,
                got: v.len(),
            });
        }
        let nrm = linalg::norm(v);
        if nrm <= tol.atol {
            return Err(Error::InvalidParameter(format!("{what} state is zero")));
        }
        Ok(v.iter().map(|z| z / nrm).collect())
    };
    let mut a_norm = Vec::with_capacity(n);
    let mut b_norm = Vec::with_capacity(n);
    for i in 0..n {
        let a = normalize(&a_states[i], "a")?;
        let b = normalize(&b_states[i], "b")?;
        let overlap = linalg::inner(&a, &b).norm();
        if overlap >= 1.0 - tol.atol {
            return Err(Error::InvalidParameter(format!(
                "states at position {} are parallel (overlap {overlap:.12})",
                i + 1
            )));
        }
        a_norm.push(a);
        b_norm.push(b);
    }
    let mut entries = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let v1 = linalg::kron_vec(&a_norm[i], &a_norm[i + 1]);
        let v2 = linalg::kron_vec(&b_norm[i], &b_norm[i + 1]);
        // Gram–Schmidt; the pair vectors are never parallel because both
        // single-qubit overlaps are below 1.
        let u1 = v1;
        let c = linalg::inner(&u1, &v2);
        let mut w: Vec<C64> = v2
            .iter()
            .zip(&u1)
            .map(|(x, y)| x - c * y)
            .collect();
        linalg::normalize(&mut w);
        let p = ComplexMatrix::projector_onto(&u1)
            .add(&ComplexMatrix::projector_onto(&w))
            .expect("same dim");
        entries.push((QubitSet::pair(i + 1, i + 2)?, p));
    }
    ProjectivePredicate::new(entries, tol)
}

/// Relabels every qubit index through `f`, re-sorting domains and permuting
/// entry factors to match. The explicit domain-change operation used when a
/// swap layer moves predicate entries to new positions.
pub fn remap_qubits(
    pred: &ProjectivePredicate,
    f: &dyn Fn(usize) -> usize,
) -> Result<ProjectivePredicate> {
    let entries = remap_entries(pred.entries(), f)?;
    Ok(ProjectivePredicate { entries })
}

pub(crate) fn remap_entries(
    entries: &[(QubitSet, ComplexMatrix)],
    f: &dyn Fn(usize) -> usize,
) -> Result<Vec<(QubitSet, ComplexMatrix)>> {
    let mut out = Vec::with_capacity(entries.len());
    for (s, m) in entries {
        let mapped: Vec<usize> = s.indices().iter().map(|&q| f(q)).collect();
        let new_set = QubitSet::new(mapped.clone())?;
        // position of each old factor inside the re-sorted register
        let positions: Vec<usize> = mapped
            .iter()
            .map(|q| new_set.position(*q).expect("member") + 1)
            .collect();
        let permuted = linalg::embed_ordered(m, &positions, s.len())?;
        out.push((new_set, permuted));
    }
    Ok(out)
}

// ---- wire format ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ProjectiveWire {
    domain: Vec<Vec<usize>>,
    projectors: Vec<Vec<[f64; 2]>>,
}

pub fn parse_projective(text: &str, tol: &Tolerance) -> Result<ProjectivePredicate> {
    let wire: ProjectiveWire =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("predicate JSON: {e}")))?;
    wire_to_predicate(wire.domain, wire.projectors, tol)
}

pub(crate) fn wire_to_predicate(
    domain: Vec<Vec<usize>>,
    matrices: Vec<Vec<[f64; 2]>>,
    tol: &Tolerance,
) -> Result<ProjectivePredicate> {
    if domain.len() != matrices.len() {
        return Err(Error::Parse(format!(
            "domain lists {} sets but {} matrices are given",
            domain.len(),
            matrices.len()
        )));
    }
    let mut entries = Vec::with_capacity(domain.len());
    for (set, mat) in domain.into_iter().zip(matrices) {
        entries.push((QubitSet::new(set)?, circuit::matrix_from_wire(&mat)?));
    }
    ProjectivePredicate::new(entries, tol)
}

pub fn serialize_projective(pred: &ProjectivePredicate) -> String {
    let wire = ProjectiveWire {
        domain: pred
            .entries()
            .iter()
            .map(|(s, _)| s.indices().to_vec())
            .collect(),
        projectors: pred
            .entries()
            .iter()
            .map(|(_, p)| circuit::matrix_to_wire(p))
            .collect(),
    };
    serde_json::to_string(&wire).expect("serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_ket, ket_of_bits, kron_vec, projector_rank};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn proj_bits(bits: &[bool]) -> ComplexMatrix {
        ComplexMatrix::projector_onto(&ket_of_bits(bits))
    }

    fn plus_ket() -> Vec<C64> {
        let s = 1.0 / 2.0_f64.sqrt();
        vec![C64::new(s, 0.0), C64::new(s, 0.0)]
    }

    #[test]
    fn concretize_chained_zeros_pins_everything() {
        let pred = ProjectivePredicate::new(
            vec![
                (QubitSet::pair(1, 2).unwrap(), proj_bits(&[false, false])),
                (QubitSet::pair(2, 3).unwrap(), proj_bits(&[false, false])),
            ],
            &tol(),
        )
        .unwrap();
        let gamma = concretize(&pred, 3, 12).unwrap();
        assert!(gamma.max_abs_diff(&proj_bits(&[false, false, false])) < 1e-9);
    }

    #[test]
    fn concretize_identity_tuple_is_identity() {
        let pred = ProjectivePredicate::identity(&[
            QubitSet::pair(1, 2).unwrap(),
            QubitSet::pair(2, 3).unwrap(),
        ]);
        let gamma = concretize(&pred, 3, 12).unwrap();
        assert!(gamma.max_abs_diff(&ComplexMatrix::identity(8)) < 1e-9);
    }

    #[test]
    fn hadamard_rotates_a_singleton_entry() {
        for j in [false, true] {
            let pred = ProjectivePredicate::new(
                vec![(QubitSet::singleton(1), proj_bits(&[j]))],
                &tol(),
            )
            .unwrap();
            let step = abstract_apply(&Gate::h(1), &pred, &tol()).unwrap();
            let s = 1.0 / 2.0_f64.sqrt();
            let sign = if j { -s } else { s };
            let expected = ComplexMatrix::projector_onto(&[C64::new(s, 0.0), C64::new(sign, 0.0)]);
            assert!(step.predicate.entries()[0].1.max_abs_diff(&expected) < 1e-12);
        }
    }

    #[test]
    fn identity_tuple_is_a_fixed_point() {
        let pred = ProjectivePredicate::identity(&[
            QubitSet::pair(1, 2).unwrap(),
            QubitSet::pair(2, 3).unwrap(),
        ]);
        for gate in [Gate::h(2), Gate::cnot(1, 2), Gate::t(3)] {
            let step = abstract_apply(&gate, &pred, &tol()).unwrap();
            assert!(step.predicate.entrywise_distance(&pred).unwrap() < 1e-10);
        }
    }

    #[test]
    fn cnot_on_the_prepared_pair_tuple() {
        // Tuple after H on qubit 1 of the all-zeros pair chain: (|+0⟩⟨+0|, |00⟩⟨00|).
        let plus_zero = kron_vec(&plus_ket(), &basis_ket(2, 0));
        let pred = ProjectivePredicate::new(
            vec![
                (
                    QubitSet::pair(1, 2).unwrap(),
                    ComplexMatrix::projector_onto(&plus_zero),
                ),
                (QubitSet::pair(2, 3).unwrap(), proj_bits(&[false, false])),
            ],
            &tol(),
        )
        .unwrap();
        let step = abstract_apply(&Gate::cnot(1, 2), &pred, &tol()).unwrap();

        // Exact transformer output on the first pair: the rank-1 Bell
        // projector, strictly inside the rank-2 span{|00⟩,|11⟩}.
        let bell_span = proj_bits(&[false, false])
            .add(&proj_bits(&[true, true]))
            .unwrap();
        let first = &step.predicate.entries()[0].1;
        assert_eq!(projector_rank(first), 1);
        assert!(linalg::loewner_leq(first, &bell_span, &tol()).unwrap());

        // Second pair: qubit 2 free over {|0⟩,|1⟩}, qubit 3 pinned to |0⟩.
        let second = &step.predicate.entries()[1].1;
        let expected = proj_bits(&[false, false])
            .add(&proj_bits(&[true, false]))
            .unwrap();
        assert!(second.max_abs_diff(&expected) < 1e-9);
    }

    #[test]
    fn disjoint_gate_leaves_entries_unchanged() {
        let pred = ProjectivePredicate::new(
            vec![(QubitSet::pair(1, 2).unwrap(), proj_bits(&[false, true]))],
            &tol(),
        )
        .unwrap();
        let step = abstract_apply(&Gate::h(4), &pred, &tol()).unwrap();
        assert!(step.predicate.entrywise_distance(&pred).unwrap() == 0.0);
    }

    #[test]
    fn skip_analysis_echoes_the_predicate() {
        let pred = ProjectivePredicate::new(
            vec![(QubitSet::singleton(1), proj_bits(&[true]))],
            &tol(),
        )
        .unwrap();
        let analysis = analyze(&Circuit::skip(1).unwrap(), &pred, &tol()).unwrap();
        assert_eq!(analysis.steps.len(), 0);
        assert!(analysis.result.entrywise_distance(&pred).unwrap() == 0.0);
    }

    #[test]
    fn bell_single_pair_domain() {
        let bell_circuit =
            Circuit::new(2, vec![Gate::h(1), Gate::cnot(1, 2)]).unwrap();
        let pred = ProjectivePredicate::new(
            vec![(QubitSet::pair(1, 2).unwrap(), proj_bits(&[false, false]))],
            &tol(),
        )
        .unwrap();
        let analysis = analyze(&bell_circuit, &pred, &tol()).unwrap();
        // The exact result is the rank-1 Bell projector, inside span{|00⟩,|11⟩}.
        let result = &analysis.result.entries()[0].1;
        let s = 1.0 / 2.0_f64.sqrt();
        let bell = vec![
            C64::new(s, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
        ];
        assert!(result.max_abs_diff(&ComplexMatrix::projector_onto(&bell)) < 1e-9);
        let span = proj_bits(&[false, false])
            .add(&proj_bits(&[true, true]))
            .unwrap();
        assert!(linalg::loewner_leq(result, &span, &tol()).unwrap());
    }

    #[test]
    fn span_predicate_for_computational_pair() {
        let zero = basis_ket(2, 0);
        let one = basis_ket(2, 1);
        let pred = two_state_span_predicate(
            &[zero.clone(), zero.clone(), zero.clone()],
            &[one.clone(), one.clone(), one.clone()],
            &tol(),
        )
        .unwrap();
        for (_, p) in pred.entries() {
            let expected = proj_bits(&[false, false])
                .add(&proj_bits(&[true, true]))
                .unwrap();
            assert!(p.max_abs_diff(&expected) < 1e-12);
        }
        // concretization is the 2-dimensional all-zeros/all-ones span
        let gamma = concretize(&pred, 3, 12).unwrap();
        let expected = proj_bits(&[false; 3]).add(&proj_bits(&[true; 3])).unwrap();
        assert!(gamma.max_abs_diff(&expected) < 1e-9);
    }

    #[test]
    fn span_predicate_rejects_parallel_and_short_inputs() {
        let zero = basis_ket(2, 0);
        assert!(two_state_span_predicate(&[zero.clone()], &[zero.clone()], &tol()).is_err());
        let one = basis_ket(2, 1);
        assert!(
            two_state_span_predicate(&[zero.clone(), zero.clone()], &[zero, one], &tol()).is_err()
        );
    }

    #[test]
    fn remap_relabels_and_permutes_factors() {
        // entry on {1,2} holding |0⟩⟨0| ⊗ |1⟩⟨1|, relabeled by 1↔3
        let p = proj_bits(&[false, true]);
        let pred = ProjectivePredicate::new(
            vec![(QubitSet::pair(1, 2).unwrap(), p)],
            &tol(),
        )
        .unwrap();
        let mapped = remap_qubits(&pred, &|q| if q == 1 { 3 } else { q }).unwrap();
        let (s, m) = &mapped.entries()[0];
        assert_eq!(s.indices(), &[2, 3]);
        // factor order flips: qubit 2 (|1⟩) is now first
        assert!(m.max_abs_diff(&proj_bits(&[true, false])) < 1e-12);
    }

    #[test]
    fn projective_wire_round_trip() {
        let pred = ProjectivePredicate::new(
            vec![
                (QubitSet::pair(1, 3).unwrap(), proj_bits(&[false, true])),
                (QubitSet::singleton(2), proj_bits(&[true])),
            ],
            &tol(),
        )
        .unwrap();
        let text = serialize_projective(&pred);
        let back = parse_projective(&text, &tol()).unwrap();
        assert!(back.entrywise_distance(&pred).unwrap() == 0.0);
    }
}
