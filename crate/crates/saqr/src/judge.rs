//! Judgments, rule checkers, scalable inequality checks, and validity
//! testing against the oracle.
//!
//! A judgment `{𝒜|𝒫} C {ℬ|𝒬}` asserts that every input state satisfying the
//! projective predicate `𝒫` yields an output satisfying `𝒬`, with the
//! expectation of `𝒜` before the circuit bounded by the expectation of `ℬ`
//! after it. Each checker discharges one inference rule and returns a
//! certificate recording the inequality residuals it verified. The exact
//! checks materialize `2^n` matrices and are capped; the warm-up and
//! partitioned checks work block by block on small local registers.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{self, Circuit, Gate};
use crate::linalg::{self, ComplexMatrix, QubitSet, Tolerance, C64};
use crate::observables::{self, ObservablePredicate};
use crate::oracle;
use crate::qai::{self, ProjectivePredicate};
use crate::{Error, Result};

/// Slack allowed when the oracle tests an expectation inequality on sampled
/// states.
pub const ORACLE_SLACK: f64 = 1e-8;

/// A triple `{𝒜|𝒫} C {ℬ|𝒬}`.
#[derive(Debug, Clone)]
pub struct Judgment {
    pub pre_obs: ObservablePredicate,
    pub pre_proj: ProjectivePredicate,
    pub circuit: Circuit,
    pub post_obs: ObservablePredicate,
    pub post_proj: ProjectivePredicate,
}

impl Judgment {
    pub fn new(
        pre_obs: ObservablePredicate,
        pre_proj: ProjectivePredicate,
        circuit: Circuit,
        post_obs: ObservablePredicate,
        post_proj: ProjectivePredicate,
    ) -> Result<Self> {
        let n = circuit.n();
        pre_obs.check_in_register(n)?;
        pre_proj.check_in_register(n)?;
        post_obs.check_in_register(n)?;
        post_proj.check_in_register(n)?;
        Ok(Judgment {
            pre_obs,
            pre_proj,
            circuit,
            post_obs,
            post_proj,
        })
    }

    pub fn n(&self) -> usize {
        self.circuit.n()
    }
}

/// Disjoint blocks of predicate-entry indices (0-based) covering `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        let mut seen = vec![false; m];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition {
                    reason: "empty block".into(),
                });
            }
            for &i in block {
                if i >= m {
                    return Err(Error::InvalidPartition {
                        reason: format!("entry index {i} out of range for {m} entries"),
                    });
                }
                if seen[i] {
                    return Err(Error::InvalidPartition {
                        reason: format!("entry index {i} appears in two blocks"),
                    });
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidPartition {
                reason: "blocks do not cover every entry".into(),
            });
        }
        Ok(Partition { blocks })
    }

    /// One block per entry.
    pub fn singletons(m: usize) -> Self {
        Partition {
            blocks: (0..m).map(|i| vec![i]).collect(),
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }
}

/// Which side the unitary conjugation lands on in a block inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// The inference rule a certificate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleKind {
    Skip,
    Unit,
    Seq,
    Con,
    WarmupFwd,
    WarmupBwd,
    Partitioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Scalable,
}

/// One checked inequality: `residual` is the most negative eigenvalue of
/// `RHS − LHS` (or an entrywise distance for equality premises), so a value
/// `≥ -atol` means the premise holds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Premise {
    pub desc: String,
    pub residual: f64,
}

/// Evidence that one rule application was checked.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleCertificate {
    pub rule: RuleKind,
    pub premises: Vec<Premise>,
    pub verdict: bool,
    pub mode: Mode,
}

impl RuleCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serialization cannot fail")
    }
}

/// A judgment together with the certificate that established it.
#[derive(Debug, Clone)]
pub struct CheckedJudgment {
    pub judgment: Judgment,
    pub certificate: RuleCertificate,
}

fn require_same_domains(a: &ObservablePredicate, b: &ObservablePredicate) -> Result<()> {
    if !a.same_domains(b) {
        return Err(Error::DomainMismatch {
            context: "pre and post observable tuples".into(),
        });
    }
    Ok(())
}

// ---- Skip -----------------------------------------------------------------

/// Skip rule: the circuit is empty and both sides match entrywise.
pub fn check_skip(j: &Judgment, tol: &Tolerance) -> Result<RuleCertificate> {
    if !j.circuit.is_skip() {
        return Err(Error::RuleInapplicable {
            reason: "skip rule requires an empty circuit".into(),
        });
    }
    let obs_dist = j
        .pre_obs
        .entrywise_distance(&j.post_obs)
        .ok_or(Error::DomainMismatch {
            context: "skip observable tuples".into(),
        })?;
    let proj_dist = j
        .pre_proj
        .entrywise_distance(&j.post_proj)
        .ok_or(Error::DomainMismatch {
            context: "skip projective tuples".into(),
        })?;
    let verdict = obs_dist <= tol.atol && proj_dist <= tol.atol;
    Ok(RuleCertificate {
        rule: RuleKind::Skip,
        premises: vec![
            Premise {
                desc: "observable tuples equal".into(),
                residual: obs_dist,
            },
            Premise {
                desc: "projective tuples equal".into(),
                residual: proj_dist,
            },
        ],
        verdict,
        mode: Mode::Exact,
    })
}

/// Two-way skip judgment through the projection sandwich: under a fixed
/// projective predicate, replacing the observable tuple by its entrywise
/// `PAP` sandwich leaves every expectation unchanged. Accepts either
/// direction.
pub fn check_sandwich_skip(j: &Judgment, tol: &Tolerance) -> Result<RuleCertificate> {
    if !j.circuit.is_skip() {
        return Err(Error::RuleInapplicable {
            reason: "sandwich skip requires an empty circuit".into(),
        });
    }
    let proj_dist = j
        .pre_proj
        .entrywise_distance(&j.post_proj)
        .ok_or(Error::DomainMismatch {
            context: "sandwich skip projective tuples".into(),
        })?;
    let fwd = observables::sandwich(&j.post_obs, &j.pre_proj)?
        .entrywise_distance(&j.pre_obs)
        .ok_or(Error::DomainMismatch {
            context: "sandwich skip observable tuples".into(),
        })?;
    let bwd = observables::sandwich(&j.pre_obs, &j.pre_proj)?
        .entrywise_distance(&j.post_obs)
        .expect("domains already matched");
    let obs_residual = fwd.min(bwd);
    let verdict = proj_dist <= tol.atol && obs_residual <= tol.atol;
    Ok(RuleCertificate {
        rule: RuleKind::Skip,
        premises: vec![
            Premise {
                desc: "projective tuples equal".into(),
                residual: proj_dist,
            },
            Premise {
                desc: "observable tuple equals the sandwich of its partner".into(),
                residual: obs_residual,
            },
        ],
        verdict,
        mode: Mode::Exact,
    })
}

// ---- Unit (exact) ---------------------------------------------------------

/// Result of the exact unit-rule check: the certificate plus the
/// transformer's post-projective predicate for the conclusion.
#[derive(Debug, Clone)]
pub struct UnitOutcome {
    pub certificate: RuleCertificate,
    pub post_proj: ProjectivePredicate,
}

/// Exact unit-rule premise `γ(𝒫) M_𝒜 γ(𝒫) ≤ γ(𝒫) U† M_ℬ U γ(𝒫)` on the full
/// register. The conclusion's projective part is the abstract transformer
/// applied to `𝒫`.
pub fn check_unit_rule(
    a: &ObservablePredicate,
    p: &ProjectivePredicate,
    gate: &Gate,
    b: &ObservablePredicate,
    n: usize,
    tol: &Tolerance,
    cap: usize,
) -> Result<UnitOutcome> {
    require_same_domains(a, b)?;
    if n > cap {
        return Err(Error::CapExceeded { qubits: n, cap });
    }
    let gamma = qai::concretize(p, n, cap)?;
    let m_a = observables::matrix_rep(a, n, cap)?;
    let m_b = observables::matrix_rep(b, n, cap)?;
    let u = linalg::embed_ordered(&circuit::gate_unitary(gate), gate.targets(), n)?;
    let lhs = gamma.mul(&m_a)?.mul(&gamma)?;
    let rhs = gamma.mul(&m_b.conjugate_by_dagger(&u)?)?.mul(&gamma)?;
    let residual = linalg::min_eigenvalue(&rhs.sub(&lhs)?);
    let verdict = residual >= -tol.atol;
    let post_proj = qai::abstract_apply(gate, p, tol)?.predicate;
    Ok(UnitOutcome {
        certificate: RuleCertificate {
            rule: RuleKind::Unit,
            premises: vec![Premise {
                desc: "concretization-sandwiched Löwner inequality".into(),
                residual,
            }],
            verdict,
            mode: Mode::Exact,
        },
        post_proj,
    })
}

// ---- scalable block checks --------------------------------------------------

fn block_register(
    entries: &[(QubitSet, ComplexMatrix)],
    block: &[usize],
    gate_set: &QubitSet,
    cap_local: usize,
) -> Result<QubitSet> {
    let mut local = gate_set.clone();
    for &i in block {
        local = local.union(&entries[i].0);
    }
    if local.len() > cap_local {
        return Err(Error::LocalCapExceeded {
            qubits: local.len(),
            cap: cap_local,
        });
    }
    Ok(local)
}

fn embedded_block_sum(
    entries: &[(QubitSet, ComplexMatrix)],
    block: &[usize],
    local: &QubitSet,
) -> Result<ComplexMatrix> {
    let ln = local.len();
    let mut acc = ComplexMatrix::zeros(1usize << ln);
    for &i in block {
        let (s, m) = &entries[i];
        let positions: Vec<usize> = s
            .indices()
            .iter()
            .map(|q| local.position(*q).expect("entry inside block register") + 1)
            .collect();
        acc = acc.add(&linalg::embed_ordered(m, &positions, ln)?)?;
    }
    Ok(acc)
}

fn embed_gate_in(gate: &Gate, local: &QubitSet) -> Result<ComplexMatrix> {
    let positions: Vec<usize> = gate
        .targets()
        .iter()
        .map(|q| local.position(*q).expect("gate inside block register") + 1)
        .collect();
    linalg::embed_ordered(&circuit::gate_unitary(gate), &positions, local.len())
}

/// Warm-up block inequalities, ignoring the projective predicate: for every
/// block `T`, `Σ_{i∈T} A_i ⊗ I ≤ U† (Σ_{i∈T} B_i ⊗ I) U` (backward) or
/// `U (Σ A_i) U† ≤ Σ B_i` (forward). Passing blocks jointly imply the global
/// pre-vs-post inequality, so this certifies the unit rule without ever
/// leaving the block registers.
pub fn check_warmup(
    a: &ObservablePredicate,
    b: &ObservablePredicate,
    gate: &Gate,
    part: &Partition,
    direction: Direction,
    tol: &Tolerance,
    cap_local: usize,
) -> Result<RuleCertificate> {
    require_same_domains(a, b)?;
    let _ = Partition::new(part.blocks().to_vec(), a.len())?;
    let gate_set = gate.qubit_set();
    let mut premises = Vec::with_capacity(part.blocks().len());
    let mut verdict = true;
    for (bi, block) in part.blocks().iter().enumerate() {
        let local = block_register(a.entries(), block, &gate_set, cap_local)?;
        let sum_a = embedded_block_sum(a.entries(), block, &local)?;
        let sum_b = embedded_block_sum(b.entries(), block, &local)?;
        let u = embed_gate_in(gate, &local)?;
        let diff = match direction {
            Direction::Backward => sum_b.conjugate_by_dagger(&u)?.sub(&sum_a)?,
            Direction::Forward => sum_b.sub(&sum_a.conjugate_by(&u)?)?,
        };
        let residual = linalg::min_eigenvalue(&diff);
        verdict &= residual >= -tol.atol;
        premises.push(Premise {
            desc: format!("block {bi} on register {local}"),
            residual,
        });
    }
    Ok(RuleCertificate {
        rule: match direction {
            Direction::Forward => RuleKind::WarmupFwd,
            Direction::Backward => RuleKind::WarmupBwd,
        },
        premises,
        verdict,
        mode: Mode::Scalable,
    })
}

/// Partitioned block inequalities with the per-block projector sandwich: for
/// every block `T` with `P_T = ⋂_{i∈T} P_i ⊗ I`,
/// `P_T (Σ_{i∈T} A_i ⊗ I) P_T ≤ P_T U† (Σ_{i∈T} B_i ⊗ I) U P_T`.
/// Passing blocks imply the exact unit-rule premise.
pub fn check_partitioned(
    a: &ObservablePredicate,
    b: &ObservablePredicate,
    p: &ProjectivePredicate,
    gate: &Gate,
    part: &Partition,
    tol: &Tolerance,
    cap_local: usize,
) -> Result<RuleCertificate> {
    require_same_domains(a, b)?;
    if a.len() != p.len()
        || a.entries()
            .iter()
            .zip(p.entries())
            .any(|((sa, _), (sp, _))| sa != sp)
    {
        return Err(Error::DomainMismatch {
            context: "observable and projective tuples in partitioned check".into(),
        });
    }
    let _ = Partition::new(part.blocks().to_vec(), a.len())?;
    let gate_set = gate.qubit_set();
    let mut premises = Vec::with_capacity(part.blocks().len());
    let mut verdict = true;
    for (bi, block) in part.blocks().iter().enumerate() {
        let local = block_register(a.entries(), block, &gate_set, cap_local)?;
        let ln = local.len();
        let mut sandwich = ComplexMatrix::identity(1usize << ln);
        for &i in block {
            let (s, proj) = &p.entries()[i];
            let positions: Vec<usize> = s
                .indices()
                .iter()
                .map(|q| local.position(*q).expect("entry inside block register") + 1)
                .collect();
            let embedded = linalg::embed_ordered(proj, &positions, ln)?;
            sandwich = linalg::intersect(&sandwich, &embedded, tol)?;
        }
        let sum_a = embedded_block_sum(a.entries(), block, &local)?;
        let sum_b = embedded_block_sum(b.entries(), block, &local)?;
        let u = embed_gate_in(gate, &local)?;
        let lhs = sandwich.mul(&sum_a)?.mul(&sandwich)?;
        let rhs = sandwich
            .mul(&sum_b.conjugate_by_dagger(&u)?)?
            .mul(&sandwich)?;
        let residual = linalg::min_eigenvalue(&rhs.sub(&lhs)?);
        verdict &= residual >= -tol.atol;
        premises.push(Premise {
            desc: format!("block {bi} sandwiched on register {local}"),
            residual,
        });
    }
    Ok(RuleCertificate {
        rule: RuleKind::Partitioned,
        premises,
        verdict,
        mode: Mode::Scalable,
    })
}

// ---- Seq and Con ------------------------------------------------------------

/// Seq rule: chains two checked judgments whose midpoints agree entrywise.
pub fn compose_seq(
    j1: &CheckedJudgment,
    j2: &CheckedJudgment,
    tol: &Tolerance,
) -> Result<CheckedJudgment> {
    let obs_dist = j1
        .judgment
        .post_obs
        .entrywise_distance(&j2.judgment.pre_obs)
        .ok_or(Error::DomainMismatch {
            context: "sequence midpoint observables".into(),
        })?;
    let proj_dist = j1
        .judgment
        .post_proj
        .entrywise_distance(&j2.judgment.pre_proj)
        .ok_or(Error::DomainMismatch {
            context: "sequence midpoint projective predicates".into(),
        })?;
    if obs_dist > tol.atol || proj_dist > tol.atol {
        return Err(Error::RuleInapplicable {
            reason: format!(
                "sequence midpoints differ (observables {obs_dist:.3e}, projectors {proj_dist:.3e})"
            ),
        });
    }
    let circuit = j1.judgment.circuit.then(&j2.judgment.circuit)?;
    let verdict = j1.certificate.verdict && j2.certificate.verdict;
    let mode = if j1.certificate.mode == Mode::Scalable || j2.certificate.mode == Mode::Scalable {
        Mode::Scalable
    } else {
        Mode::Exact
    };
    let mut premises = vec![
        Premise {
            desc: "midpoint observable tuples equal".into(),
            residual: obs_dist,
        },
        Premise {
            desc: "midpoint projective tuples equal".into(),
            residual: proj_dist,
        },
        Premise {
            desc: "left certificate verdict".into(),
            residual: if j1.certificate.verdict { 0.0 } else { 1.0 },
        },
        Premise {
            desc: "right certificate verdict".into(),
            residual: if j2.certificate.verdict { 0.0 } else { 1.0 },
        },
    ];
    premises.extend(j1.certificate.premises.iter().cloned().map(|p| Premise {
        desc: format!("left: {}", p.desc),
        residual: p.residual,
    }));
    premises.extend(j2.certificate.premises.iter().cloned().map(|p| Premise {
        desc: format!("right: {}", p.desc),
        residual: p.residual,
    }));
    Ok(CheckedJudgment {
        judgment: Judgment {
            pre_obs: j1.judgment.pre_obs.clone(),
            pre_proj: j1.judgment.pre_proj.clone(),
            circuit,
            post_obs: j2.judgment.post_obs.clone(),
            post_proj: j2.judgment.post_proj.clone(),
        },
        certificate: RuleCertificate {
            rule: RuleKind::Seq,
            premises,
            verdict,
            mode,
        },
    })
}

fn obs_containment_residual(
    lower: &ObservablePredicate,
    upper: &ObservablePredicate,
) -> Result<f64> {
    if !lower.same_domains(upper) {
        return Err(Error::DomainMismatch {
            context: "observable containment".into(),
        });
    }
    let mut worst = f64::INFINITY;
    for ((_, x), (_, y)) in lower.entries().iter().zip(upper.entries()) {
        worst = worst.min(linalg::min_eigenvalue(&y.sub(x)?));
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

fn proj_containment_residual(
    lower: &ProjectivePredicate,
    upper: &ProjectivePredicate,
) -> Result<f64> {
    if !lower.same_domains(upper) {
        return Err(Error::DomainMismatch {
            context: "projective containment".into(),
        });
    }
    let mut worst = f64::INFINITY;
    for ((_, x), (_, y)) in lower.entries().iter().zip(upper.entries()) {
        worst = worst.min(linalg::min_eigenvalue(&y.sub(x)?));
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

/// Con rule: weakens a checked judgment to `{𝒟|ℛ} C {ℰ|𝒯}` given the four
/// entrywise containments. Errors if any containment fails.
pub fn weaken(
    j: &CheckedJudgment,
    d: &ObservablePredicate,
    e: &ObservablePredicate,
    r: &ProjectivePredicate,
    t: &ProjectivePredicate,
    tol: &Tolerance,
) -> Result<CheckedJudgment> {
    let c1 = obs_containment_residual(d, &j.judgment.pre_obs)?;
    let c2 = obs_containment_residual(&j.judgment.post_obs, e)?;
    let c3 = proj_containment_residual(r, &j.judgment.pre_proj)?;
    let c4 = proj_containment_residual(&j.judgment.post_proj, t)?;
    let worst = c1.min(c2).min(c3).min(c4);
    if worst < -tol.atol {
        return Err(Error::RuleInapplicable {
            reason: format!("weakening containment fails (worst residual {worst:.3e})"),
        });
    }
    let premises = vec![
        Premise {
            desc: "new pre-observables below old".into(),
            residual: c1,
        },
        Premise {
            desc: "old post-observables below new".into(),
            residual: c2,
        },
        Premise {
            desc: "new pre-projectors inside old".into(),
            residual: c3,
        },
        Premise {
            desc: "old post-projectors inside new".into(),
            residual: c4,
        },
        Premise {
            desc: "underlying certificate verdict".into(),
            residual: if j.certificate.verdict { 0.0 } else { 1.0 },
        },
    ];
    Ok(CheckedJudgment {
        judgment: Judgment {
            pre_obs: d.clone(),
            pre_proj: r.clone(),
            circuit: j.judgment.circuit.clone(),
            post_obs: e.clone(),
            post_proj: t.clone(),
        },
        certificate: RuleCertificate {
            rule: RuleKind::Con,
            premises,
            verdict: j.certificate.verdict,
            mode: j.certificate.mode,
        },
    })
}

// ---- oracle validity ---------------------------------------------------------

/// Outcome of sampling-based validity testing.
#[derive(Debug, Clone, Serialize)]
pub struct ValidityReport {
    pub holds: bool,
    /// Minimum of `tr(M_ℬ ⟦C⟧ρ) − tr(M_𝒜 ρ)` over the sampled states.
    pub worst_gap: f64,
    /// Worst post-projective violation over the sampled states.
    pub worst_projective_violation: f64,
    pub samples: usize,
}

/// Samples states satisfying the pre-projective predicate and tests both
/// validity conditions: the output satisfies the post-projective predicate
/// and the expectation inequality holds with slack `≥ -1e-8`.
pub fn check_validity_oracle(
    j: &Judgment,
    samples: usize,
    seed: u64,
    cap: usize,
) -> Result<ValidityReport> {
    let n = j.n();
    let gamma = qai::concretize(&j.pre_proj, n, cap)?;
    let basis = linalg::projector_basis(&gamma, &Tolerance::default())?;
    if basis.is_empty() {
        return Err(Error::EmptyConcretization);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gap = f64::INFINITY;
    let mut worst_violation = 0.0f64;
    for _ in 0..samples {
        let ket = oracle::random_ket_in_basis(&basis, &mut rng);
        let pre = oracle::expectation_of_ket(&j.pre_obs, &ket, n)?;
        let out = oracle::simulate_ket(&j.circuit, &ket)?;
        let post = oracle::expectation_of_ket(&j.post_obs, &out, n)?;
        worst_gap = worst_gap.min(post - pre);
        worst_violation =
            worst_violation.max(oracle::projective_violation_of_ket(&out, n, &j.post_proj)?);
    }
    if samples == 0 {
        worst_gap = 0.0;
    }
    Ok(ValidityReport {
        holds: worst_gap >= -ORACLE_SLACK && worst_violation <= ORACLE_SLACK,
        worst_gap,
        worst_projective_violation: worst_violation,
        samples,
    })
}

/// Empirical reduction check: if the quantitative triple with `p`, `q` read
/// as observable tuples holds on unrestricted sampled states, then sampled
/// states satisfying `p` must land in `q`. Returns `false` only on a
/// counterexample to that implication.
pub fn reduction_check(
    p: &ProjectivePredicate,
    q: &ProjectivePredicate,
    c: &Circuit,
    samples: usize,
    seed: u64,
    cap: usize,
) -> Result<bool> {
    let n = c.n();
    if n > cap {
        return Err(Error::CapExceeded { qubits: n, cap });
    }
    let p_obs = ObservablePredicate::from_projective(p);
    let q_obs = ObservablePredicate::from_projective(q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full_basis: Vec<Vec<C64>> = (0..1usize << n)
        .map(|i| linalg::basis_ket(1usize << n, i))
        .collect();
    let mut antecedent = true;
    for _ in 0..samples {
        let ket = oracle::random_ket_in_basis(&full_basis, &mut rng);
        let pre = oracle::expectation_of_ket(&p_obs, &ket, n)?;
        let out = oracle::simulate_ket(c, &ket)?;
        let post = oracle::expectation_of_ket(&q_obs, &out, n)?;
        if post - pre < -ORACLE_SLACK {
            antecedent = false;
            break;
        }
    }
    if !antecedent {
        return Ok(true);
    }
    // antecedent held on every sample; the consequent must hold on states
    // inside the predicate (vacuously true when there are none)
    let gamma = qai::concretize(p, n, cap)?;
    let basis = linalg::projector_basis(&gamma, &Tolerance::default())?;
    if basis.is_empty() {
        return Ok(true);
    }
    for _ in 0..samples {
        let ket = oracle::random_ket_in_basis(&basis, &mut rng);
        let out = oracle::simulate_ket(c, &ket)?;
        if oracle::projective_violation_of_ket(&out, n, q)? > ORACLE_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---- inexpressibility --------------------------------------------------------

fn hermitian_basis(dim: usize) -> Vec<ComplexMatrix> {
    let mut basis = Vec::with_capacity(dim * dim);
    for k in 0..dim {
        let mut m = ComplexMatrix::zeros(dim);
        m.set(k, k, C64::new(1.0, 0.0));
        basis.push(m);
    }
    let s = 1.0 / 2.0_f64.sqrt();
    for k in 0..dim {
        for l in k + 1..dim {
            let mut re = ComplexMatrix::zeros(dim);
            re.set(k, l, C64::new(s, 0.0));
            re.set(l, k, C64::new(s, 0.0));
            basis.push(re);
            let mut im = ComplexMatrix::zeros(dim);
            im.set(k, l, C64::new(0.0, s));
            im.set(l, k, C64::new(0.0, -s));
            basis.push(im);
        }
    }
    basis
}

/// Minimal Frobenius residual of the least-squares fit
/// `M ≈ Σᵢ Aᵢ ⊗ I_rest` over Hermitian `Aᵢ` on the given domains. A positive
/// residual certifies that no local decomposition exists, with or without
/// positivity constraints.
pub fn local_decomposition_residual(
    m: &ComplexMatrix,
    domains: &[QubitSet],
    n: usize,
) -> Result<f64> {
    let dim = 1usize << n;
    if m.dim() != dim {
        return Err(Error::DimensionMismatch {
            context: "local decomposition target",
            expected: dim,
            got: m.dim(),
        });
    }
    m.ensure_hermitian(&Tolerance::default())?;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for s in domains {
        s.check_in_register(n)?;
        for basis_elem in hermitian_basis(1usize << s.len()) {
            let embedded = linalg::embed(&basis_elem, s, n)?;
            let mut col = Vec::with_capacity(2 * dim * dim);
            for z in embedded.data() {
                col.push(z.re);
            }
            for z in embedded.data() {
                col.push(z.im);
            }
            columns.push(col);
        }
    }
    let rows = 2 * dim * dim;
    let design = DMatrix::from_fn(rows, columns.len(), |r, c| columns[c][r]);
    let mut target = Vec::with_capacity(rows);
    for z in m.data() {
        target.push(z.re);
    }
    for z in m.data() {
        target.push(z.im);
    }
    let b = DVector::from_vec(target);
    let svd = design.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::InvalidParameter(format!("least-squares solve failed: {e}")))?;
    let residual = (&design * &x - &b).norm();
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ket_of_bits, kron_vec};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn proj_bits(bits: &[bool]) -> ComplexMatrix {
        ComplexMatrix::projector_onto(&ket_of_bits(bits))
    }

    fn plus() -> Vec<C64> {
        let s = 1.0 / 2.0_f64.sqrt();
        vec![C64::new(s, 0.0), C64::new(s, 0.0)]
    }

    fn zero_pred_pair() -> ObservablePredicate {
        ObservablePredicate::new(
            vec![
                (QubitSet::singleton(1), proj_bits(&[false])),
                (QubitSet::singleton(2), proj_bits(&[false])),
            ],
            &tol(),
        )
        .unwrap()
    }

    fn pinned_pair_proj() -> ProjectivePredicate {
        ProjectivePredicate::new(
            vec![(QubitSet::pair(1, 2).unwrap(), proj_bits(&[false, false]))],
            &tol(),
        )
        .unwrap()
    }

    #[test]
    fn skip_rule_cases() {
        let a = zero_pred_pair();
        let p = pinned_pair_proj();
        let j = Judgment::new(
            a.clone(),
            p.clone(),
            Circuit::skip(2).unwrap(),
            a.clone(),
            p.clone(),
        )
        .unwrap();
        assert!(check_skip(&j, &tol()).unwrap().verdict);

        let other = ObservablePredicate::identity(&a.domains());
        let j2 = Judgment::new(a.clone(), p.clone(), Circuit::skip(2).unwrap(), other, p.clone())
            .unwrap();
        assert!(!check_skip(&j2, &tol()).unwrap().verdict);

        let j3 = Judgment::new(
            a.clone(),
            p.clone(),
            Circuit::new(2, vec![Gate::h(1)]).unwrap(),
            a,
            p,
        )
        .unwrap();
        assert!(matches!(
            check_skip(&j3, &tol()),
            Err(Error::RuleInapplicable { .. })
        ));
    }

    #[test]
    fn unit_rule_rescues_the_cnot_judgment() {
        let a = zero_pred_pair();
        let pinned = pinned_pair_proj();
        let out = check_unit_rule(&a, &pinned, &Gate::cnot(1, 2), &a, 2, &tol(), 12).unwrap();
        assert!(out.certificate.verdict);
        // with the trivial projective predicate the same inequality fails
        let id = ProjectivePredicate::identity(&[QubitSet::pair(1, 2).unwrap()]);
        let out = check_unit_rule(&a, &id, &Gate::cnot(1, 2), &a, 2, &tol(), 12).unwrap();
        assert!(!out.certificate.verdict);
        // identity post-observables dominate anything
        let b = ObservablePredicate::identity(&a.domains());
        let out = check_unit_rule(&a, &id, &Gate::cnot(1, 2), &b, 2, &tol(), 12).unwrap();
        assert!(out.certificate.verdict);
    }

    #[test]
    fn warmup_first_hadamard_is_an_equality() {
        // pair observables (|++⟩⟨++|, |++⟩⟨++|) on a 3-qubit chain; H on
        // qubit 1 pushes the first entry to |0+⟩⟨0+| and fixes the rest
        let pp = ComplexMatrix::projector_onto(&kron_vec(&plus(), &plus()));
        let a = ObservablePredicate::new(
            vec![
                (QubitSet::pair(1, 2).unwrap(), pp.clone()),
                (QubitSet::pair(2, 3).unwrap(), pp.clone()),
            ],
            &tol(),
        )
        .unwrap();
        let zero_plus = ComplexMatrix::projector_onto(&kron_vec(
            &linalg::basis_ket(2, 0),
            &plus(),
        ));
        let b = ObservablePredicate::new(
            vec![
                (QubitSet::pair(1, 2).unwrap(), zero_plus),
                (QubitSet::pair(2, 3).unwrap(), pp),
            ],
            &tol(),
        )
        .unwrap();
        let cert = check_warmup(
            &a,
            &b,
            &Gate::h(1),
            &Partition::singletons(2),
            Direction::Forward,
            &tol(),
            8,
        )
        .unwrap();
        assert!(cert.verdict);
        for p in &cert.premises {
            assert!(p.residual > -1e-12, "{}: {}", p.desc, p.residual);
        }
    }

    #[test]
    fn warmup_cnot_invariance_block() {
        // CNOT(1,2) leaves |0+⟩⟨0+| on (1,2) and |++⟩⟨++| on (2,3) invariant
        let zero_plus = ComplexMatrix::projector_onto(&kron_vec(
            &linalg::basis_ket(2, 0),
            &plus(),
        ));
        let pp = ComplexMatrix::projector_onto(&kron_vec(&plus(), &plus()));
        let a = ObservablePredicate::new(
            vec![
                (QubitSet::pair(1, 2).unwrap(), zero_plus),
                (QubitSet::pair(2, 3).unwrap(), pp),
            ],
            &tol(),
        )
        .unwrap();
        let cert = check_warmup(
            &a,
            &a,
            &Gate::cnot(1, 2),
            &Partition::singletons(2),
            Direction::Forward,
            &tol(),
            8,
        )
        .unwrap();
        assert!(cert.verdict);
    }

    #[test]
    fn warmup_zero_post_fails() {
        let a = zero_pred_pair();
        let b = ObservablePredicate::zero(&a.domains());
        let cert = check_warmup(
            &a,
            &b,
            &Gate::cnot(1, 2),
            &Partition::new(vec![vec![0, 1]], 2).unwrap(),
            Direction::Backward,
            &tol(),
            8,
        )
        .unwrap();
        assert!(!cert.verdict);
    }

    #[test]
    fn partitioned_identity_predicate_matches_warmup() {
        let a = zero_pred_pair();
        let id = ProjectivePredicate::identity(&a.domains());
        let part = Partition::new(vec![vec![0, 1]], 2).unwrap();
        let sandwiched =
            check_partitioned(&a, &a, &id, &Gate::cnot(1, 2), &part, &tol(), 8).unwrap();
        let plain = check_warmup(
            &a,
            &a,
            &Gate::cnot(1, 2),
            &part,
            Direction::Backward,
            &tol(),
            8,
        )
        .unwrap();
        assert_eq!(sandwiched.verdict, plain.verdict);
        assert!(!sandwiched.verdict);
    }

    #[test]
    fn partitioned_sandwich_rescues_failing_block() {
        // same observables, but the projective predicate pins both qubits to
        // |0⟩; the sandwiched block inequality becomes an equality
        let a = zero_pred_pair();
        let p = ProjectivePredicate::new(
            vec![
                (QubitSet::singleton(1), proj_bits(&[false])),
                (QubitSet::singleton(2), proj_bits(&[false])),
            ],
            &tol(),
        )
        .unwrap();
        let part = Partition::new(vec![vec![0, 1]], 2).unwrap();
        let cert = check_partitioned(&a, &a, &p, &Gate::cnot(1, 2), &part, &tol(), 8).unwrap();
        assert!(cert.verdict);
    }

    #[test]
    fn seq_composition_and_midpoint_mismatch() {
        let a = zero_pred_pair();
        let p = pinned_pair_proj();
        let skip = Judgment::new(
            a.clone(),
            p.clone(),
            Circuit::skip(2).unwrap(),
            a.clone(),
            p.clone(),
        )
        .unwrap();
        let cert = check_skip(&skip, &tol()).unwrap();
        let cj = CheckedJudgment {
            judgment: skip,
            certificate: cert,
        };
        let seq = compose_seq(&cj, &cj, &tol()).unwrap();
        assert!(seq.certificate.verdict);
        assert!(seq.judgment.circuit.is_skip());

        let mismatched = CheckedJudgment {
            judgment: Judgment::new(
                ObservablePredicate::identity(&a.domains()),
                p.clone(),
                Circuit::skip(2).unwrap(),
                a.clone(),
                p.clone(),
            )
            .unwrap(),
            certificate: check_skip(
                &Judgment::new(
                    a.clone(),
                    p.clone(),
                    Circuit::skip(2).unwrap(),
                    a.clone(),
                    p.clone(),
                )
                .unwrap(),
                &tol(),
            )
            .unwrap(),
        };
        assert!(compose_seq(&cj, &mismatched, &tol()).is_err());
    }

    #[test]
    fn weakening_cases() {
        let a = zero_pred_pair();
        let p = pinned_pair_proj();
        let j = Judgment::new(
            a.clone(),
            p.clone(),
            Circuit::skip(2).unwrap(),
            a.clone(),
            p.clone(),
        )
        .unwrap();
        let cj = CheckedJudgment {
            certificate: check_skip(&j, &tol()).unwrap(),
            judgment: j,
        };
        // identity weakening
        let same = weaken(&cj, &a, &a, &p, &p, &tol()).unwrap();
        assert!(same.certificate.verdict);
        // the identity tuple is always an admissible post-weakening
        let e = ObservablePredicate::identity(&a.domains());
        let t = ProjectivePredicate::identity(&p.domains());
        let weakened = weaken(&cj, &a, &e, &p, &t, &tol()).unwrap();
        assert!(weakened.certificate.verdict);
        // shrinking the post-observables is not allowed
        let zero = ObservablePredicate::zero(&a.domains());
        assert!(weaken(&cj, &a, &zero, &p, &t, &tol()).is_err());
    }

    #[test]
    fn oracle_validity_on_skip_and_cnot() {
        let a = zero_pred_pair();
        let p = pinned_pair_proj();
        let skip = Judgment::new(
            a.clone(),
            p.clone(),
            Circuit::skip(2).unwrap(),
            a.clone(),
            p.clone(),
        )
        .unwrap();
        let report = check_validity_oracle(&skip, 20, 11, 12).unwrap();
        assert!(report.holds);
        assert!(report.worst_gap.abs() < 1e-10);

        // the semantically valid CNOT judgment with the pinned predicate
        let post_proj = qai::abstract_apply(&Gate::cnot(1, 2), &p, &tol())
            .unwrap()
            .predicate;
        let cnot = Judgment::new(
            a.clone(),
            p.clone(),
            Circuit::new(2, vec![Gate::cnot(1, 2)]).unwrap(),
            a.clone(),
            post_proj,
        )
        .unwrap();
        let report = check_validity_oracle(&cnot, 20, 13, 12).unwrap();
        assert!(report.holds);

        // deliberately false judgment: zero post-observables
        let bad = Judgment::new(
            a.clone(),
            p.clone(),
            Circuit::skip(2).unwrap(),
            ObservablePredicate::zero(&a.domains()),
            p.clone(),
        )
        .unwrap();
        let report = check_validity_oracle(&bad, 20, 17, 12).unwrap();
        assert!(!report.holds);
        assert!(report.worst_gap < -0.5);
    }

    #[test]
    fn reduction_check_cases() {
        let bell = Circuit::new(2, vec![Gate::h(1), Gate::cnot(1, 2)]).unwrap();
        let p = pinned_pair_proj();
        // identity post-predicate: vacuously fine
        let q_id = ProjectivePredicate::identity(&p.domains());
        assert!(reduction_check(&p, &q_id, &bell, 15, 3, 12).unwrap());
        // exact abstract output: implication holds with a true antecedent
        let analysis = qai::analyze(&bell, &p, &tol()).unwrap();
        assert!(reduction_check(&p, &analysis.result, &bell, 15, 5, 12).unwrap());
        // corrupted post-predicate: antecedent must fail before the
        // consequent can (never antecedent-true-consequent-false)
        let q_bad = ProjectivePredicate::new(
            vec![(QubitSet::pair(1, 2).unwrap(), proj_bits(&[false, true]))],
            &tol(),
        )
        .unwrap();
        assert!(reduction_check(&p, &q_bad, &bell, 25, 7, 12).unwrap());
    }

    #[test]
    fn decomposition_residual_zero_for_decomposable() {
        let m = proj_bits(&[false])
            .kron(&ComplexMatrix::identity(2))
            .add(&ComplexMatrix::identity(2).kron(&proj_bits(&[false])))
            .unwrap();
        let domains = [QubitSet::singleton(1), QubitSet::singleton(2)];
        let r = local_decomposition_residual(&m, &domains, 2).unwrap();
        assert!(r < 1e-10, "residual {r}");
        let zero = ComplexMatrix::zeros(4);
        assert!(local_decomposition_residual(&zero, &domains, 2).unwrap() < 1e-12);
    }

    #[test]
    fn decomposition_residual_of_the_cnot_pullback_is_one() {
        // regression constant computed by an independent least-squares oracle
        let m = proj_bits(&[false])
            .kron(&ComplexMatrix::identity(2))
            .add(&proj_bits(&[false, false]))
            .unwrap()
            .add(&proj_bits(&[true, true]))
            .unwrap();
        let domains = [QubitSet::singleton(1), QubitSet::singleton(2)];
        let r = local_decomposition_residual(&m, &domains, 2).unwrap();
        assert!((r - 1.0).abs() < 1e-9, "residual {r}");
    }

    #[test]
    fn certificate_json_shape() {
        let a = zero_pred_pair();
        let p = pinned_pair_proj();
        let out = check_unit_rule(&a, &p, &Gate::cnot(1, 2), &a, 2, &tol(), 12).unwrap();
        let json = out.certificate.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["rule"], "Unit");
        assert_eq!(value["mode"], "exact");
        assert_eq!(value["verdict"], true);
        assert!(value["premises"][0]["residual"].is_number());
        assert!(value["premises"][0]["desc"].is_string());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![vec![0], vec![1]], 2).is_ok());
        assert!(Partition::new(vec![vec![0]], 2).is_err());
        assert!(Partition::new(vec![vec![0], vec![0, 1]], 2).is_err());
        assert!(Partition::new(vec![vec![0, 2]], 2).is_err());
    }
}
