//! Exact desk-scale semantics: the ground truth every rule is tested against.
//!
//! Density-matrix simulation applies gates one at a time through local
//! kernels, never materializing the full circuit unitary. A statevector path
//! is provided for pure states; it is algebraically the same semantics and
//! the two are cross-checked in tests. Register sizes are capped because the
//! representations are dense.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::circuit::{self, Circuit, Gate};
use crate::linalg::{self, ComplexMatrix, QubitSet, Tolerance, C64};
use crate::observables::ObservablePredicate;
use crate::qai::{self, ProjectivePredicate};
use crate::{Error, Result};

/// Validated mixed state: Hermitian, PSD, unit trace.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n: usize,
    rho: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(n: usize, rho: ComplexMatrix, tol: &Tolerance) -> Result<Self> {
        if rho.dim() != 1usize << n {
            return Err(Error::DimensionMismatch {
                context: "density matrix dimension",
                expected: 1usize << n,
                got: rho.dim(),
            });
        }
        rho.ensure_hermitian(tol)?;
        let tr = linalg::trace(&rho);
        if (tr.re - 1.0).abs() > 100.0 * tol.atol || tr.im.abs() > 100.0 * tol.atol {
            return Err(Error::InvalidParameter(format!(
                "density matrix trace {tr} is not 1"
            )));
        }
        if linalg::min_eigenvalue(&rho) < -100.0 * tol.atol {
            return Err(Error::NotPsd {
                min_eigenvalue: linalg::min_eigenvalue(&rho),
            });
        }
        Ok(DensityMatrix { n, rho })
    }

    /// Pure state `|v⟩⟨v|` (normalizes the vector).
    pub fn from_ket(n: usize, ket: &[C64]) -> Result<Self> {
        if ket.len() != 1usize << n {
            return Err(Error::DimensionMismatch {
                context: "ket dimension",
                expected: 1usize << n,
                got: ket.len(),
            });
        }
        let mut v = ket.to_vec();
        linalg::normalize(&mut v);
        Ok(DensityMatrix {
            n,
            rho: ComplexMatrix::projector_onto(&v),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }
}

/// `|0…0⟩⟨0…0|` on `n` qubits.
pub fn initial_state(n: usize, cap: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("register size must be ≥ 1".into()));
    }
    if n > cap {
        return Err(Error::CapExceeded { qubits: n, cap });
    }
    let mut rho = ComplexMatrix::zeros(1usize << n);
    rho.set(0, 0, C64::new(1.0, 0.0));
    Ok(DensityMatrix { n, rho })
}

/// `|0…0⟩` as a vector.
pub fn initial_ket(n: usize) -> Vec<C64> {
    linalg::basis_ket(1usize << n, 0)
}

/// Applies one gate to a statevector in place.
pub fn apply_gate_to_ket(amps: &mut [C64], n: usize, gate: &Gate) {
    let u = circuit::gate_unitary(gate);
    apply_matrix_to_ket(amps, n, &u, gate.targets());
}

fn apply_matrix_to_ket(amps: &mut [C64], n: usize, u: &ComplexMatrix, targets: &[usize]) {
    let arity = targets.len();
    let gdim = 1usize << arity;
    debug_assert_eq!(u.dim(), gdim);
    let dim = 1usize << n;
    debug_assert_eq!(amps.len(), dim);
    let masks: Vec<usize> = targets.iter().map(|&q| 1usize << (n - q)).collect();
    let full: usize = masks.iter().fold(0, |acc, m| acc | m);
    // offset of each gate-basis pattern within a base index
    let offsets: Vec<usize> = (0..gdim)
        .map(|g| {
            let mut off = 0usize;
            for (pos, m) in masks.iter().enumerate() {
                if (g >> (arity - 1 - pos)) & 1 == 1 {
                    off |= m;
                }
            }
            off
        })
        .collect();
    let mut gathered = vec![C64::new(0.0, 0.0); gdim];
    for base in 0..dim {
        if base & full != 0 {
            continue;
        }
        for g in 0..gdim {
            gathered[g] = amps[base | offsets[g]];
        }
        for gr in 0..gdim {
            let mut acc = C64::new(0.0, 0.0);
            for gc in 0..gdim {
                acc += u.get(gr, gc) * gathered[gc];
            }
            amps[base | offsets[gr]] = acc;
        }
    }
}

/// Runs the whole circuit on a statevector.
pub fn simulate_ket(c: &Circuit, input: &[C64]) -> Result<Vec<C64>> {
    if input.len() != 1usize << c.n() {
        return Err(Error::DimensionMismatch {
            context: "statevector dimension",
            expected: 1usize << c.n(),
            got: input.len(),
        });
    }
    let mut amps = input.to_vec();
    for gate in c.gates() {
        apply_gate_to_ket(&mut amps, c.n(), gate);
    }
    Ok(amps)
}

fn apply_gate_to_density_in_place(rho: &mut ComplexMatrix, n: usize, gate: &Gate) {
    let u = circuit::gate_unitary(gate);
    let dim = 1usize << n;
    // ρ ← UρU†: columns transform by U, then rows by U*.
    let mut col = vec![C64::new(0.0, 0.0); dim];
    for c in 0..dim {
        for r in 0..dim {
            col[r] = rho.get(r, c);
        }
        apply_matrix_to_ket(&mut col, n, &u, gate.targets());
        for r in 0..dim {
            rho.set(r, c, col[r]);
        }
    }
    // Right multiplication by U† transforms each row, read as a ket, by U*.
    let mut row = vec![C64::new(0.0, 0.0); dim];
    let conj_u = conj_matrix(&u);
    for r in 0..dim {
        for c in 0..dim {
            row[c] = rho.get(r, c);
        }
        apply_matrix_to_ket(&mut row, n, &conj_u, gate.targets());
        for c in 0..dim {
            rho.set(r, c, row[c]);
        }
    }
}

fn conj_matrix(m: &ComplexMatrix) -> ComplexMatrix {
    let d = m.dim();
    let mut out = ComplexMatrix::zeros(d);
    for r in 0..d {
        for c in 0..d {
            out.set(r, c, m.get(r, c).conj());
        }
    }
    out
}

/// Gate-by-gate density evolution `ρ ← U ρ U†` through the whole circuit.
pub fn simulate(c: &Circuit, input: &DensityMatrix, cap: usize) -> Result<DensityMatrix> {
    if c.n() > cap {
        return Err(Error::CapExceeded { qubits: c.n(), cap });
    }
    if input.n() != c.n() {
        return Err(Error::DimensionMismatch {
            context: "simulation register size",
            expected: c.n(),
            got: input.n(),
        });
    }
    let mut rho = input.rho().clone();
    for gate in c.gates() {
        apply_gate_to_density_in_place(&mut rho, c.n(), gate);
    }
    Ok(DensityMatrix { n: c.n(), rho })
}

/// Reduced density matrix on the kept set `s`.
pub fn reduced_density(rho: &DensityMatrix, s: &QubitSet) -> Result<ComplexMatrix> {
    s.check_in_register(rho.n())?;
    linalg::partial_trace(rho.rho(), rho.n(), &s.complement(rho.n()))
}

/// Reduced density matrix of a pure state on the kept set `s`, computed
/// directly from the amplitudes.
pub fn reduced_density_of_ket(ket: &[C64], n: usize, s: &QubitSet) -> Result<ComplexMatrix> {
    s.check_in_register(n)?;
    if ket.len() != 1usize << n {
        return Err(Error::DimensionMismatch {
            context: "ket dimension",
            expected: 1usize << n,
            got: ket.len(),
        });
    }
    let kept = s.indices();
    let env: Vec<usize> = s.complement(n);
    let kd = 1usize << kept.len();
    let ed = 1usize << env.len();
    let compose = |a: usize, e: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in kept.iter().enumerate() {
            idx |= ((a >> (kept.len() - 1 - pos)) & 1) << (n - q);
        }
        for (pos, &q) in env.iter().enumerate() {
            idx |= ((e >> (env.len() - 1 - pos)) & 1) << (n - q);
        }
        idx
    };
    let mut out = ComplexMatrix::zeros(kd);
    for a in 0..kd {
        for b in 0..kd {
            let mut acc = C64::new(0.0, 0.0);
            for e in 0..ed {
                acc += ket[compose(a, e)] * ket[compose(b, e)].conj();
            }
            out.set(a, b, acc);
        }
    }
    Ok(out)
}

/// Expectation `Σᵢ tr(A_{sᵢ} ρ_{sᵢ})` computed through reduced densities —
/// the full-register representation is never built.
pub fn expectation(pred: &ObservablePredicate, rho: &DensityMatrix) -> Result<f64> {
    pred.check_in_register(rho.n())?;
    let mut acc = 0.0;
    for (s, a) in pred.entries() {
        let reduced = reduced_density(rho, s)?;
        acc += linalg::trace_of_product(a, &reduced)?.re;
    }
    Ok(acc)
}

/// Same expectation from a pure state's amplitudes.
pub fn expectation_of_ket(pred: &ObservablePredicate, ket: &[C64], n: usize) -> Result<f64> {
    pred.check_in_register(n)?;
    let mut acc = 0.0;
    for (s, a) in pred.entries() {
        let reduced = reduced_density_of_ket(ket, n, s)?;
        acc += linalg::trace_of_product(a, &reduced)?.re;
    }
    Ok(acc)
}

/// Cross-check path: `tr(M_𝒜 ρ)` with the full matrix representation.
pub fn expectation_full(
    pred: &ObservablePredicate,
    rho: &DensityMatrix,
    cap: usize,
) -> Result<f64> {
    let m = crate::observables::matrix_rep(pred, rho.n(), cap)?;
    Ok(linalg::trace_of_product(&m, rho.rho())?.re)
}

/// Whether every reduced density matrix is fixed by its projector:
/// `max|P_{sᵢ} ρ_{sᵢ} − ρ_{sᵢ}| ≤ atol` for all `i`.
pub fn satisfies_projective(
    rho: &DensityMatrix,
    pred: &ProjectivePredicate,
    tol: &Tolerance,
) -> Result<bool> {
    Ok(projective_violation(rho, pred)? <= tol.atol)
}

/// Worst `max|P ρ_s − ρ_s|` across the entries.
pub fn projective_violation(rho: &DensityMatrix, pred: &ProjectivePredicate) -> Result<f64> {
    pred.check_in_register(rho.n())?;
    let mut worst = 0.0f64;
    for (s, p) in pred.entries() {
        let reduced = reduced_density(rho, s)?;
        let diff = p.mul(&reduced)?.max_abs_diff(&reduced);
        worst = worst.max(diff);
    }
    Ok(worst)
}

/// Pure-state variant of [`projective_violation`].
pub fn projective_violation_of_ket(
    ket: &[C64],
    n: usize,
    pred: &ProjectivePredicate,
) -> Result<f64> {
    pred.check_in_register(n)?;
    let mut worst = 0.0f64;
    for (s, p) in pred.entries() {
        let reduced = reduced_density_of_ket(ket, n, s)?;
        let diff = p.mul(&reduced)?.max_abs_diff(&reduced);
        worst = worst.max(diff);
    }
    Ok(worst)
}

pub fn satisfies_projective_ket(
    ket: &[C64],
    n: usize,
    pred: &ProjectivePredicate,
    tol: &Tolerance,
) -> Result<bool> {
    Ok(projective_violation_of_ket(ket, n, pred)? <= tol.atol)
}

/// Haar-random pure state inside the concretization subspace, deterministic
/// per seed.
pub fn sample_ket_in(
    pred: &ProjectivePredicate,
    n: usize,
    seed: u64,
    cap: usize,
) -> Result<Vec<C64>> {
    let gamma = qai::concretize(pred, n, cap)?;
    let basis = linalg::projector_basis(&gamma, &Tolerance::default())?;
    if basis.is_empty() {
        return Err(Error::EmptyConcretization);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_ket_in_basis(&basis, &mut rng))
}

/// Draws a Haar-random state in the span of an orthonormal basis.
pub fn random_ket_in_basis(basis: &[Vec<C64>], rng: &mut ChaCha8Rng) -> Vec<C64> {
    let dim = basis[0].len();
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for b in basis {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let coeff = C64::new(re, im);
        for (out, x) in v.iter_mut().zip(b) {
            *out += coeff * x;
        }
    }
    linalg::normalize(&mut v);
    v
}

/// Haar-random pure density matrix inside the concretization subspace.
pub fn sample_state_in(
    pred: &ProjectivePredicate,
    n: usize,
    seed: u64,
    cap: usize,
) -> Result<DensityMatrix> {
    let ket = sample_ket_in(pred, n, seed, cap)?;
    DensityMatrix::from_ket(n, &ket)
}
