//! Dense complex linear algebra kernel.
//!
//! Everything downstream — circuit semantics, predicates, rule checkers —
//! reduces to a handful of operations on dense complex matrices: Hermitian and
//! PSD tests, the Löwner comparison, trace and partial trace over arbitrary
//! qubit subsets, tensor embedding, support projectors, and subspace
//! intersection. Qubit 1 is the leftmost tensor factor (most significant bit
//! of a basis index) throughout.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::{Error, Result};

/// Complex scalar used everywhere in the crate.
pub type C64 = Complex<f64>;

/// Absolute and relative tolerances threaded through every numeric decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Absolute eigenvalue/entry tolerance.
    pub atol: f64,
    /// Relative eigenvalue cutoff for support rank decisions.
    pub rank_rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            atol: 1e-9,
            rank_rel: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(atol: f64, rank_rel: f64) -> Result<Self> {
        if !(atol > 0.0) || !(rank_rel > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive (atol={atol}, rank_rel={rank_rel})"
            )));
        }
        Ok(Tolerance { atol, rank_rel })
    }

    /// Cutoff below 2 for the eigenspace-of-`P+Q` intersection method.
    fn intersection_cut(&self) -> f64 {
        (10.0 * self.atol).max(1e-10)
    }
}

/// Ordered set of distinct 1-based qubit positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitSet(Vec<usize>);

impl QubitSet {
    /// Builds a set from any collection of distinct positive indices.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidQubitSet {
                reason: "empty qubit set".into(),
            });
        }
        if indices.iter().any(|&q| q == 0) {
            return Err(Error::InvalidQubitSet {
                reason: "qubit indices are 1-based; found 0".into(),
            });
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidQubitSet {
                reason: format!("duplicate qubit index in {indices:?}"),
            });
        }
        Ok(QubitSet(indices))
    }

    pub fn singleton(q: usize) -> Self {
        QubitSet::new(vec![q]).expect("singleton is valid")
    }

    pub fn pair(a: usize, b: usize) -> Result<Self> {
        QubitSet::new(vec![a, b])
    }

    /// The full register `{1, …, n}`.
    pub fn full(n: usize) -> Result<Self> {
        QubitSet::new((1..=n).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, q: usize) -> bool {
        self.0.binary_search(&q).is_ok()
    }

    pub fn is_subset_of(&self, other: &QubitSet) -> bool {
        self.0.iter().all(|q| other.contains(*q))
    }

    pub fn max(&self) -> usize {
        *self.0.last().expect("nonempty")
    }

    pub fn union(&self, other: &QubitSet) -> QubitSet {
        let mut v = self.0.clone();
        v.extend(other.0.iter().copied());
        v.sort_unstable();
        v.dedup();
        QubitSet(v)
    }

    pub fn intersects(&self, other: &QubitSet) -> bool {
        self.0.iter().any(|q| other.contains(*q))
    }

    /// Position of qubit `q` within this set (0-based), if present.
    pub fn position(&self, q: usize) -> Option<usize> {
        self.0.binary_search(&q).ok()
    }

    /// Checks that every index fits a register of `n` qubits.
    pub fn check_in_register(&self, n: usize) -> Result<()> {
        match self.0.iter().find(|&&q| q > n) {
            Some(&q) => Err(Error::IndexOutOfRange {
                index: q,
                register: n,
            }),
            None => Ok(()),
        }
    }

    /// Complement within `{1, …, n}` as a raw index list (possibly empty).
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (1..=n).filter(|q| !self.contains(*q)).collect()
    }
}

impl std::fmt::Display for QubitSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, q) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{q}")?;
        }
        write!(f, "}}")
    }
}

/// Dense square complex matrix, row major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl std::fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ComplexMatrix(dim={})", self.dim)?;
        for r in 0..self.dim.min(8) {
            for c in 0..self.dim.min(8) {
                let z = self.get(r, c);
                write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        if self.dim > 8 {
            writeln!(f, " …")?;
        }
        Ok(())
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        ComplexMatrix {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = ComplexMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix from a row-major entry list of length `dim * dim`.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "matrix entry count",
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(ComplexMatrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "matrix row length",
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        ComplexMatrix::from_vec(dim, data)
    }

    pub fn from_real(rows: &[&[f64]]) -> Result<Self> {
        let conv: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        ComplexMatrix::from_rows(&conv)
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = ComplexMatrix::zeros(entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m.set(i, i, C64::new(x, 0.0));
        }
        m
    }

    /// Rank-one projector `|v⟩⟨v| / ⟨v|v⟩`.
    pub fn projector_onto(v: &[C64]) -> Self {
        let n2 = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!(n2 > 0.0, "cannot project onto the zero vector");
        let mut m = ComplexMatrix::zeros(v.len());
        for r in 0..v.len() {
            for c in 0..v.len() {
                m.set(r, c, v[r] * v[c].conj() / n2);
            }
        }
        m
    }

    /// Outer product `|u⟩⟨w|`.
    pub fn outer(u: &[C64], w: &[C64]) -> Self {
        assert_eq!(u.len(), w.len());
        let mut m = ComplexMatrix::zeros(u.len());
        for r in 0..u.len() {
            for c in 0..w.len() {
                m.set(r, c, u[r] * w[c].conj());
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.dim + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.dim + c] += v;
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_same_dim(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ComplexMatrix {
            dim: self.dim,
            data,
        })
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_same_dim(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ComplexMatrix {
            dim: self.dim,
            data,
        })
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> ComplexMatrix {
        self.scale(C64::new(s, 0.0))
    }

    pub fn mul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_same_dim(other)?;
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d);
        for r in 0..d {
            for k in 0..d {
                let a = self.get(r, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..d {
                    out.data[r * d + c] += a * other.data[k * d + c];
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d);
        for r in 0..d {
            for c in 0..d {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    /// `U · self · U†`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<ComplexMatrix> {
        u.mul(self)?.mul(&u.dagger())
    }

    /// `U† · self · U`.
    pub fn conjugate_by_dagger(&self, u: &ComplexMatrix) -> Result<ComplexMatrix> {
        u.dagger().mul(self)?.mul(u)
    }

    pub fn kron(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let d1 = self.dim;
        let d2 = other.dim;
        let d = d1 * d2;
        let mut out = ComplexMatrix::zeros(d);
        for r1 in 0..d1 {
            for c1 in 0..d1 {
                let a = self.get(r1, c1);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for r2 in 0..d2 {
                    for c2 in 0..d2 {
                        out.set(r1 * d2 + r2, c1 * d2 + c2, a * other.get(r2, c2));
                    }
                }
            }
        }
        out
    }

    /// Matrix power by repeated squaring.
    pub fn pow(&self, mut e: u64) -> ComplexMatrix {
        let mut base = self.clone();
        let mut acc = ComplexMatrix::identity(self.dim);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).expect("same dim");
            }
            base = base.mul(&base).expect("same dim");
            e >>= 1;
        }
        acc
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for r in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..self.dim {
                acc += self.get(r, c) * v[c];
            }
            out[r] = acc;
        }
        out
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|M − M†|` entry.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                let d = (self.get(r, c) - self.get(c, r).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn ensure_hermitian(&self, tol: &Tolerance) -> Result<()> {
        let residual = self.hermiticity_residual();
        if residual > tol.atol {
            return Err(Error::NotHermitian { residual });
        }
        Ok(())
    }

    /// `(M + M†)/2`.
    pub fn hermitize(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d);
        for r in 0..d {
            for c in 0..d {
                out.set(
                    r,
                    c,
                    (self.get(r, c) + self.get(c, r).conj()) * C64::new(0.5, 0.0),
                );
            }
        }
        out
    }

    /// Largest `|U†U − I|` entry.
    pub fn unitarity_residual(&self) -> f64 {
        let prod = self.dagger().mul(self).expect("same dim");
        prod.max_abs_diff(&ComplexMatrix::identity(self.dim))
    }

    pub fn ensure_unitary(&self, tol: &Tolerance) -> Result<()> {
        // Gate matrices come from user input; allow a little more slack than
        // the eigenvalue tolerance.
        let residual = self.unitarity_residual();
        if residual > 100.0 * tol.atol {
            return Err(Error::NotUnitary { residual });
        }
        Ok(())
    }

    /// Largest `|P² − P|` entry combined with the hermiticity residual.
    pub fn projector_residual(&self) -> f64 {
        let sq = self.mul(self).expect("same dim");
        sq.max_abs_diff(self).max(self.hermiticity_residual())
    }

    pub fn ensure_projector(&self, tol: &Tolerance) -> Result<()> {
        let residual = self.projector_residual();
        if residual > 100.0 * tol.atol {
            return Err(Error::NotProjector { residual });
        }
        Ok(())
    }

    fn check_same_dim(&self, other: &ComplexMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                context: "binary matrix operation",
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c))
    }
}

/// Trace `Σᵢ Mᵢᵢ`.
pub fn trace(m: &ComplexMatrix) -> C64 {
    (0..m.dim()).map(|i| m.get(i, i)).sum()
}

/// `tr(A·B)` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "trace of product",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let d = a.dim();
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..d {
        for c in 0..d {
            acc += a.get(r, c) * b.get(c, r);
        }
    }
    Ok(acc)
}

/// Eigendecomposition of a Hermitian matrix (symmetrized first).
///
/// Returns eigenvalues in ascending order with matching eigenvector columns.
pub fn eigh(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let herm = m.hermitize().to_nalgebra();
    let decomp = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| {
        decomp.eigenvalues[a]
            .partial_cmp(&decomp.eigenvalues[b])
            .expect("eigenvalues are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(m.dim());
    for (col, &i) in order.iter().enumerate() {
        for r in 0..m.dim() {
            vectors.set(r, col, decomp.eigenvectors[(r, i)]);
        }
    }
    (values, vectors)
}

/// Smallest eigenvalue of the symmetrized matrix. The standard residual for
/// Löwner inequalities: `loewner_leq(A, B)` holds iff this is `≥ -atol` for
/// `B - A`.
pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    let (values, _) = eigh(m);
    values.first().copied().unwrap_or(0.0)
}

/// PSD test: all eigenvalues of the symmetrized matrix `≥ -atol`.
pub fn is_psd(m: &ComplexMatrix, tol: &Tolerance) -> Result<bool> {
    m.ensure_hermitian(tol)?;
    Ok(min_eigenvalue(m) >= -tol.atol)
}

/// Löwner comparison `A ≤ B`, i.e. `B - A` is PSD.
pub fn loewner_leq(a: &ComplexMatrix, b: &ComplexMatrix, tol: &Tolerance) -> Result<bool> {
    is_psd(&b.sub(a)?, tol)
}

#[inline]
fn qubit_bit(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - qubit)) & 1
}

fn check_power_of_two(dim: usize, context: &'static str) -> Result<usize> {
    if dim >= 1 && dim.is_power_of_two() {
        Ok(dim.trailing_zeros() as usize)
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected: dim.next_power_of_two(),
            got: dim,
        })
    }
}

/// Partial trace over `trace_out` of an operator on an `n`-qubit register.
///
/// The result acts on the kept qubits in ascending order. An empty
/// `trace_out` returns the matrix unchanged; tracing out everything returns
/// the 1×1 matrix holding the trace. Linear, trace preserving, PSD
/// preserving.
pub fn partial_trace(m: &ComplexMatrix, n: usize, trace_out: &[usize]) -> Result<ComplexMatrix> {
    check_power_of_two(m.dim(), "partial trace input")?;
    if m.dim() != 1usize << n {
        return Err(Error::DimensionMismatch {
            context: "partial trace register size",
            expected: 1usize << n,
            got: m.dim(),
        });
    }
    let mut out_set: Vec<usize> = trace_out.to_vec();
    out_set.sort_unstable();
    out_set.dedup();
    for &q in &out_set {
        if q == 0 || q > n {
            return Err(Error::IndexOutOfRange {
                index: q,
                register: n,
            });
        }
    }
    if out_set.is_empty() {
        return Ok(m.clone());
    }
    let kept: Vec<usize> = (1..=n).filter(|q| !out_set.contains(q)).collect();
    let kd = 1usize << kept.len();
    let ed = 1usize << out_set.len();
    // index assembled from kept bits `a` and environment bits `e`
    let compose = |a: usize, e: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in kept.iter().enumerate() {
            let bit = (a >> (kept.len() - 1 - pos)) & 1;
            idx |= bit << (n - q);
        }
        for (pos, &q) in out_set.iter().enumerate() {
            let bit = (e >> (out_set.len() - 1 - pos)) & 1;
            idx |= bit << (n - q);
        }
        idx
    };
    let mut out = ComplexMatrix::zeros(kd);
    for a in 0..kd {
        for b in 0..kd {
            let mut acc = C64::new(0.0, 0.0);
            for e in 0..ed {
                acc += m.get(compose(a, e), compose(b, e));
            }
            out.set(a, b, acc);
        }
    }
    Ok(out)
}

/// Embeds `A` acting on the ordered qubit list `targets` (first target is the
/// most significant factor of `A`) into an `n`-qubit register, tensoring the
/// rest with identity.
pub fn embed_ordered(a: &ComplexMatrix, targets: &[usize], n: usize) -> Result<ComplexMatrix> {
    let arity = check_power_of_two(a.dim(), "embedded operator")?;
    if targets.len() != arity {
        return Err(Error::DimensionMismatch {
            context: "embedding target count",
            expected: arity,
            got: targets.len(),
        });
    }
    {
        let mut sorted = targets.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != targets.len() {
            return Err(Error::InvalidQubitSet {
                reason: format!("duplicate target in {targets:?}"),
            });
        }
    }
    for &q in targets {
        if q == 0 || q > n {
            return Err(Error::IndexOutOfRange {
                index: q,
                register: n,
            });
        }
    }
    let dim = 1usize << n;
    let mut out = ComplexMatrix::zeros(dim);
    let gate_dim = a.dim();
    for r in 0..dim {
        let mut gr = 0usize;
        for &q in targets {
            gr = (gr << 1) | qubit_bit(r, q, n);
        }
        // clear target bits to get the invariant rest pattern
        let mut rest = r;
        for &q in targets {
            rest &= !(1usize << (n - q));
        }
        for gc in 0..gate_dim {
            let v = a.get(gr, gc);
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let mut c = rest;
            for (pos, &q) in targets.iter().enumerate() {
                let bit = (gc >> (targets.len() - 1 - pos)) & 1;
                c |= bit << (n - q);
            }
            out.set(r, c, v);
        }
    }
    Ok(out)
}

/// Embeds `A` on the sorted qubit set `s` into the `n`-qubit register:
/// `A_s ⊗ I_rest`, with permutation placement for non-contiguous sets.
pub fn embed(a: &ComplexMatrix, s: &QubitSet, n: usize) -> Result<ComplexMatrix> {
    s.check_in_register(n)?;
    embed_ordered(a, s.indices(), n)
}

/// Support projector of a PSD matrix with eigenvalue cutoff
/// `rank_rel · max(1, λ_max)`, together with the spectral gap between the
/// smallest kept and the largest discarded eigenvalue.
pub fn support_with_gap(a: &ComplexMatrix, tol: &Tolerance) -> Result<(ComplexMatrix, f64)> {
    a.ensure_hermitian(tol)?;
    let (values, vectors) = eigh(a);
    let lambda_max = values.last().copied().unwrap_or(0.0).max(0.0);
    let cut = tol.rank_rel * lambda_max.max(1.0);
    if let Some(&min) = values.first() {
        if min < -cut {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
    }
    let dim = a.dim();
    let mut proj = ComplexMatrix::zeros(dim);
    let mut smallest_kept = f64::INFINITY;
    let mut largest_dropped: f64 = 0.0;
    for (i, &lambda) in values.iter().enumerate() {
        if lambda > cut {
            smallest_kept = smallest_kept.min(lambda);
            for r in 0..dim {
                let vr = vectors.get(r, i);
                if vr.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..dim {
                    proj.add_at(r, c, vr * vectors.get(c, i).conj());
                }
            }
        } else {
            largest_dropped = largest_dropped.max(lambda.abs());
        }
    }
    let gap = if smallest_kept.is_finite() {
        smallest_kept - largest_dropped
    } else {
        f64::INFINITY
    };
    Ok((proj, gap))
}

/// Projector onto the span of eigenvectors of `A` with eigenvalue above the
/// relative cutoff.
pub fn support(a: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix> {
    support_with_gap(a, tol).map(|(p, _)| p)
}

/// Projector onto `range(P) ∩ range(Q)`, computed as the eigenspace of
/// `P + Q` with eigenvalue within tolerance of 2. The result is contained in
/// both inputs.
pub fn intersect(p: &ComplexMatrix, q: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            context: "projector intersection",
            expected: p.dim(),
            got: q.dim(),
        });
    }
    p.ensure_projector(tol)?;
    q.ensure_projector(tol)?;
    let sum = p.add(q)?;
    let (values, vectors) = eigh(&sum);
    let cut = 2.0 - tol.intersection_cut();
    let dim = p.dim();
    let mut proj = ComplexMatrix::zeros(dim);
    for (i, &lambda) in values.iter().enumerate() {
        if lambda >= cut {
            for r in 0..dim {
                let vr = vectors.get(r, i);
                if vr.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..dim {
                    proj.add_at(r, c, vr * vectors.get(c, i).conj());
                }
            }
        }
    }
    Ok(proj)
}

/// N-ary intersection fold; the empty list yields the identity.
pub fn intersect_all(projectors: &[ComplexMatrix], dim: usize, tol: &Tolerance) -> Result<ComplexMatrix> {
    let mut acc = ComplexMatrix::identity(dim);
    for p in projectors {
        acc = intersect(&acc, p, tol)?;
    }
    Ok(acc)
}

/// Rank of a projector, read off its trace.
pub fn projector_rank(p: &ComplexMatrix) -> usize {
    trace(p).re.round().max(0.0) as usize
}

// ---- vector helpers -------------------------------------------------------

/// Computational basis vector `|idx⟩` in the given dimension.
pub fn basis_ket(dim: usize, idx: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[idx] = C64::new(1.0, 0.0);
    v
}

/// Basis ket of a bit string, qubit 1 first.
pub fn ket_of_bits(bits: &[bool]) -> Vec<C64> {
    let mut idx = 0usize;
    for &b in bits {
        idx = (idx << 1) | usize::from(b);
    }
    basis_ket(1usize << bits.len(), idx)
}

pub fn inner(u: &[C64], w: &[C64]) -> C64 {
    assert_eq!(u.len(), w.len());
    u.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &mut [C64]) {
    let n = norm(v);
    assert!(n > 0.0, "cannot normalize the zero vector");
    for z in v.iter_mut() {
        *z /= n;
    }
}

pub fn kron_vec(u: &[C64], w: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(u.len() * w.len());
    for a in u {
        for b in w {
            out.push(a * b);
        }
    }
    out
}

/// Tensor product of a list of kets, first factor most significant.
pub fn kron_all(factors: &[Vec<C64>]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for f in factors {
        out = kron_vec(&out, f);
    }
    out
}

/// An orthonormal basis of the range of a projector.
pub fn projector_basis(p: &ComplexMatrix, tol: &Tolerance) -> Result<Vec<Vec<C64>>> {
    p.ensure_projector(tol)?;
    let (values, vectors) = eigh(p);
    let mut basis = Vec::new();
    for (i, &lambda) in values.iter().enumerate() {
        if lambda > 0.5 {
            basis.push((0..p.dim()).map(|r| vectors.get(r, i)).collect());
        }
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ket0() -> Vec<C64> {
        basis_ket(2, 0)
    }

    fn ket1() -> Vec<C64> {
        basis_ket(2, 1)
    }

    fn ket_plus() -> Vec<C64> {
        let s = 1.0 / 2.0_f64.sqrt();
        vec![C64::new(s, 0.0), C64::new(s, 0.0)]
    }

    fn proj(v: &[C64]) -> ComplexMatrix {
        ComplexMatrix::projector_onto(v)
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn psd_accepts_identity_rejects_negative() {
        assert!(is_psd(&ComplexMatrix::identity(2), &tol()).unwrap());
        assert!(!is_psd(&ComplexMatrix::diagonal(&[1.0, -0.5]), &tol()).unwrap());
    }

    #[test]
    fn psd_rejects_the_cnot_pullback_excess() {
        // |00⟩⟨00| + |11⟩⟨11| − I ⊗ |0⟩⟨0| has a negative eigenvalue.
        let m = proj(&ket_of_bits(&[false, false]))
            .add(&proj(&ket_of_bits(&[true, true])))
            .unwrap()
            .sub(&ComplexMatrix::identity(2).kron(&proj(&ket0())))
            .unwrap();
        assert!(!is_psd(&m, &tol()).unwrap());
    }

    #[test]
    fn psd_requires_hermitian() {
        let mut m = ComplexMatrix::zeros(2);
        m.set(0, 1, C64::new(1.0, 0.0));
        assert!(matches!(
            is_psd(&m, &tol()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn loewner_zero_below_any_psd() {
        let b = ComplexMatrix::diagonal(&[0.3, 1.2]);
        assert!(loewner_leq(&ComplexMatrix::zeros(2), &b, &tol()).unwrap());
    }

    #[test]
    fn loewner_rejects_mismatched_dims() {
        let a = ComplexMatrix::identity(2);
        let b = ComplexMatrix::identity(4);
        assert!(loewner_leq(&a, &b, &tol()).is_err());
    }

    #[test]
    fn loewner_hadamard_pushforward_is_equality() {
        // H on qubit 1 maps |0+⟩⟨0+| ⊗ I to |++⟩⟨++| ⊗ I... the conjugated
        // operator equals the right-hand side, so ≤ holds.
        let h = ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, -1.0]])
            .unwrap()
            .scale_re(1.0 / 2.0_f64.sqrt());
        let zero_plus = kron_vec(&ket0(), &ket_plus());
        let lhs = proj(&zero_plus)
            .conjugate_by(&h.kron(&ComplexMatrix::identity(2)))
            .unwrap()
            .kron(&ComplexMatrix::identity(2));
        let plus_plus = kron_vec(&ket_plus(), &ket_plus());
        let rhs = proj(&plus_plus).kron(&ComplexMatrix::identity(2));
        assert!(loewner_leq(&lhs, &rhs, &tol()).unwrap());
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn trace_basics() {
        assert_eq!(trace(&ComplexMatrix::identity(4)), C64::new(4.0, 0.0));
        let off = ComplexMatrix::outer(&ket0(), &ket1());
        assert_eq!(trace(&off), C64::new(0.0, 0.0));
    }

    #[test]
    fn partial_trace_product_state() {
        let rho = proj(&ket0()).kron(&proj(&ket1()));
        let reduced = partial_trace(&rho, 2, &[1]).unwrap();
        assert!(reduced.max_abs_diff(&proj(&ket1())) < 1e-12);
        // empty trace set is the identity operation
        let unchanged = partial_trace(&rho, 2, &[]).unwrap();
        assert!(unchanged.max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn partial_trace_bell_marginal_is_maximally_mixed() {
        let s = 1.0 / 2.0_f64.sqrt();
        let bell = vec![
            C64::new(s, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
        ];
        let reduced = partial_trace(&proj(&bell), 2, &[2]).unwrap();
        assert!(reduced.max_abs_diff(&ComplexMatrix::identity(2).scale_re(0.5)) < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_out_of_range() {
        let rho = proj(&ket0());
        assert!(partial_trace(&rho, 1, &[2]).is_err());
    }

    #[test]
    fn embed_places_factors() {
        let p0 = proj(&ket0());
        let e = embed(&p0, &QubitSet::singleton(1), 2).unwrap();
        assert!(e.max_abs_diff(&p0.kron(&ComplexMatrix::identity(2))) < 1e-15);
        let id = embed(&ComplexMatrix::identity(2), &QubitSet::singleton(2), 3).unwrap();
        assert!(id.max_abs_diff(&ComplexMatrix::identity(8)) < 1e-15);
    }

    #[test]
    fn embed_x_on_second_qubit_flips_second_bit() {
        let x = ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let e = embed(&x, &QubitSet::singleton(2), 2).unwrap();
        let out = e.apply(&ket_of_bits(&[false, false]));
        let expected = ket_of_bits(&[false, true]);
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn embed_rejects_wrong_arity() {
        let x = ComplexMatrix::identity(4);
        assert!(embed(&x, &QubitSet::singleton(1), 3).is_err());
    }

    #[test]
    fn support_of_diagonal() {
        let a = ComplexMatrix::diagonal(&[0.5, 0.0, 0.0, 0.5]);
        let s = support(&a, &tol()).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::diagonal(&[1.0, 0.0, 0.0, 1.0])) < 1e-12);
    }

    #[test]
    fn support_fixes_projectors() {
        let p = proj(&kron_vec(&ket_plus(), &ket1()));
        let s = support(&p, &tol()).unwrap();
        assert!(s.max_abs_diff(&p) < 1e-10);
        assert!(s.projector_residual() < 1e-9);
    }

    #[test]
    fn support_rejects_indefinite_input() {
        let a = ComplexMatrix::diagonal(&[1.0, -0.5]);
        assert!(matches!(support(&a, &tol()), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn intersect_separable_constraints() {
        // (ψ ⊗ I) ∩ (I ⊗ |1⟩⟨1|) = ψ ⊗ |1⟩⟨1|
        let psi = proj(&ket_plus());
        let a = psi.kron(&ComplexMatrix::identity(2));
        let b = ComplexMatrix::identity(2).kron(&proj(&ket1()));
        let meet = intersect(&a, &b, &tol()).unwrap();
        assert!(meet.max_abs_diff(&psi.kron(&proj(&ket1()))) < 1e-10);
    }

    #[test]
    fn intersect_with_identity_and_orthogonal_parts() {
        let p = proj(&kron_vec(&ket0(), &ket_plus()));
        let meet = intersect(&p, &ComplexMatrix::identity(4), &tol()).unwrap();
        assert!(meet.max_abs_diff(&p) < 1e-10);

        let a = proj(&ket0()).kron(&ComplexMatrix::identity(2));
        let b = ComplexMatrix::identity(2).kron(&proj(&ket1()));
        let meet = intersect(&a, &b, &tol()).unwrap();
        assert!(meet.max_abs_diff(&proj(&ket_of_bits(&[false, true]))) < 1e-10);
    }

    #[test]
    fn intersect_rejects_non_projectors() {
        let not_proj = ComplexMatrix::diagonal(&[0.5, 0.5]);
        assert!(matches!(
            intersect(&not_proj, &ComplexMatrix::identity(2), &tol()),
            Err(Error::NotProjector { .. })
        ));
    }

    #[test]
    fn qubit_set_validation() {
        assert!(QubitSet::new(vec![]).is_err());
        assert!(QubitSet::new(vec![0]).is_err());
        assert!(QubitSet::new(vec![2, 2]).is_err());
        let s = QubitSet::new(vec![3, 1]).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        assert!(s.check_in_register(2).is_err());
    }
}
