//! Dense complex linear algebra shared by every other module: Kronecker
//! products, partial traces, Hermitian spectral calculus, states, entropy,
//! fidelity and Haar sampling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Dense complex matrix, the workhorse operator type.
pub type CMat = DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = DVector<C64>;

/// Entrywise tolerance for Hermiticity of states.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues in `[-NEG_EIG_TOL, 0)` are round-off and clamped to zero.
pub const NEG_EIG_TOL: f64 = 1e-10;
/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Norm tolerance for pure states.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Eigenvalues at or below this are dropped from entropy sums.
pub const ENTROPY_CUTOFF: f64 = 1e-12;
/// Orthonormality tolerance for isometries.
pub const ISOMETRY_TOL: f64 = 1e-10;

pub const DEFAULT_DIMENSION_GUARD: usize = 4096;
pub const DEFAULT_KRAUS_CAP: usize = 4096;

/// Caps on materialized matrix dimensions and Kraus-set sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DimensionGuard {
    pub max_dim: usize,
    pub max_kraus: usize,
}

impl Default for DimensionGuard {
    fn default() -> Self {
        Self {
            max_dim: DEFAULT_DIMENSION_GUARD,
            max_kraus: DEFAULT_KRAUS_CAP,
        }
    }
}

impl DimensionGuard {
    pub fn with_max_dim(max_dim: usize) -> Self {
        Self {
            max_dim,
            ..Self::default()
        }
    }

    pub fn check_dim(&self, what: &'static str, requested: usize) -> Result<()> {
        if requested > self.max_dim {
            return Err(Error::DimensionLimit {
                what,
                requested,
                limit: self.max_dim,
            });
        }
        Ok(())
    }

    pub fn check_kraus(&self, requested: usize) -> Result<()> {
        if requested > self.max_kraus {
            return Err(Error::DimensionLimit {
                what: "Kraus operators",
                requested,
                limit: self.max_kraus,
            });
        }
        Ok(())
    }
}

/// `base^exp`, or `None` on overflow.
pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    base.checked_pow(u32::try_from(exp).ok()?)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

/// Kronecker product without a dimension guard.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Kronecker product `a ⊗ b`, refusing results larger than the guard.
pub fn tensor_product(a: &CMat, b: &CMat, guard: &DimensionGuard) -> Result<CMat> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) => {
            guard.check_dim("tensor product", r.max(c))?;
            Ok(kron(a, b))
        }
        _ => Err(Error::DimensionLimit {
            what: "tensor product",
            requested: usize::MAX,
            limit: guard.max_dim,
        }),
    }
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    a.kronecker(b)
}

/// `|u⟩⟨v|`
pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().sum()
}

/// Largest entrywise modulus of `a - a†`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(a + a†) / 2`
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// ascending order; eigenvectors are the matching columns.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, i: usize) -> CVec {
        self.vectors.column(i).into_owned()
    }

    /// Rebuild `Σ f(λ) |v⟩⟨v|`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d = self.vectors.nrows();
        let mut out = zeros(d, d);
        for (i, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.column(i);
            out += (v * v.adjoint()).scale(w);
        }
        out
    }
}

/// Hermitian eigen-decomposition; the input is symmetrized first.
pub fn eigh(a: &CMat) -> HermitianEigen {
    let sym = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..sym.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| sym.eigenvalues[i].total_cmp(&sym.eigenvalues[j]));
    let values = order.iter().map(|&i| sym.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(a.nrows(), order.len(), |r, c| sym.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(a).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Clamp round-off negatives of a PSD spectrum; anything below
/// `-NEG_EIG_TOL` is a genuine violation.
pub fn clamp_spectrum(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| {
            if v < -NEG_EIG_TOL {
                Err(Error::Invariant(format!(
                    "eigenvalue {v:.3e} of a positive semi-definite operator is below -{NEG_EIG_TOL:e}"
                )))
            } else {
                Ok(v.max(0.0))
            }
        })
        .collect()
}

/// Principal square root of a PSD matrix.
pub fn sqrtm_psd(a: &CMat) -> Result<CMat> {
    let eig = eigh(a);
    clamp_spectrum(&eig.values)?;
    Ok(eig.map(|v| v.max(0.0).sqrt()))
}

/// Operator norm of a Hermitian matrix (largest |eigenvalue|).
pub fn op_norm_hermitian(a: &CMat) -> f64 {
    let ev = eigvalsh(a);
    ev.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Operator norm (largest singular value) of an arbitrary matrix.
pub fn op_norm(a: &CMat) -> f64 {
    singular_values_desc(a).first().copied().unwrap_or(0.0)
}

/// Singular values, descending, from the Gram matrix of the smaller side.
/// Only `min(rows, cols)` values are returned.
pub fn singular_values_desc(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let gram = if a.nrows() >= a.ncols() {
        a.adjoint() * a
    } else {
        a * a.adjoint()
    };
    eigvalsh(&gram).iter().rev().map(|v| v.max(0.0).sqrt()).collect()
}

/// Matrix with identity over `dims[keep]` and trace over the rest.
///
/// `keep` lists register indices in ascending order; the result acts on the
/// kept registers in their original order.
pub fn partial_trace(rho: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    let total: usize = dims.iter().product();
    if rho.nrows() != total || rho.ncols() != total {
        return Err(Error::Shape(format!(
            "partial trace: register dims {dims:?} multiply to {total}, matrix is {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Shape(format!(
            "partial trace: kept registers {keep:?} must be ascending indices below {}",
            dims.len()
        )));
    }
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let traced_dim = total / kept_dim.max(1);

    // table[k * traced_dim + t] = full index with kept part k and traced part t
    let mut table = vec![0usize; total];
    let mut digits = vec![0usize; dims.len()];
    for full in 0..total {
        let mut rem = full;
        for r in (0..dims.len()).rev() {
            digits[r] = rem % dims[r];
            rem /= dims[r];
        }
        let (mut k, mut t) = (0usize, 0usize);
        for (r, &dig) in digits.iter().enumerate() {
            if keep.binary_search(&r).is_ok() {
                k = k * dims[r] + dig;
            } else {
                t = t * dims[r] + dig;
            }
        }
        table[k * traced_dim + t] = full;
    }

    let mut out = zeros(kept_dim, kept_dim);
    for i in 0..kept_dim {
        for j in 0..kept_dim {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..traced_dim {
                acc += rho[(table[i * traced_dim + t], table[j * traced_dim + t])];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// A validated quantum state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity; stores the
    /// symmetrized matrix.
    pub fn new(mat: CMat) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(Error::Shape(format!(
                "density matrix must be square and non-empty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if !is_finite(&mat) {
            return Err(Error::Invariant("density matrix has non-finite entries".into()));
        }
        let defect = hermiticity_defect(&mat);
        if defect > HERMITIAN_TOL {
            return Err(Error::Invariant(format!(
                "density matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        let tr = trace(&mat);
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::Invariant(format!("density matrix has trace {tr}, expected 1")));
        }
        let mat = hermitian_part(&mat);
        let min = eigvalsh(&mat).first().copied().unwrap_or(0.0);
        if min < -NEG_EIG_TOL {
            return Err(Error::Invariant(format!(
                "density matrix has eigenvalue {min:.3e} below -{NEG_EIG_TOL:e}"
            )));
        }
        Ok(Self(mat))
    }

    /// Wrap a matrix already known to be a state (e.g. the image of a state
    /// under a channel), only symmetrizing it.
    pub(crate) fn from_trusted(mat: CMat) -> Self {
        Self(hermitian_part(&mat))
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self(outer(psi.as_vector(), psi.as_vector()))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(identity(d).scale(1.0 / d as f64))
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        let d = probs.len();
        Self::new(CMat::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(probs[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// Random mixed state: the marginal of a Haar pure state on `d × env`.
    pub fn random<R: Rng + ?Sized>(d: usize, env: usize, rng: &mut R) -> Self {
        let psi = PureState::random(d * env, rng);
        let full = outer(psi.as_vector(), psi.as_vector());
        let rho = partial_trace(&full, &[d, env], &[0]).expect("dimensions match by construction");
        Self::from_trusted(rho)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self(kron(&self.0, &other.0))
    }
}

/// A unit vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState(CVec);

impl PureState {
    pub fn new(v: CVec) -> Result<Self> {
        let n2 = v.norm_squared();
        if !n2.is_finite() || (n2 - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Invariant(format!(
                "pure state has squared norm {n2}, expected 1"
            )));
        }
        Ok(Self(v))
    }

    /// Normalize a non-zero vector.
    pub fn normalized(v: CVec) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Invariant("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(Self(v.unscale(n)))
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = CVec::zeros(d);
        v[i] = C64::new(1.0, 0.0);
        Self(v)
    }

    /// Haar-random pure state in dimension `d`.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        loop {
            let g = gaussian_vector(d, rng);
            if let Ok(s) = Self::normalized(g) {
                return s;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &CVec {
        &self.0
    }

    pub fn into_vector(self) -> CVec {
        self.0
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        Self(kron_vec(&self.0, &other.0))
    }

    /// `⟨ψ|A|ψ⟩`
    pub fn expectation(&self, a: &CMat) -> C64 {
        self.0.dotc(&(a * &self.0))
    }
}

/// Fidelity `Tr √(√ρ σ √ρ)`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape(format!(
            "fidelity between states of dimension {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    // ‖√ρ √σ‖₁ equals Tr √(√ρ σ √ρ) and treats both arguments alike
    let product = sqrtm_psd(rho.as_matrix())? * sqrtm_psd(sigma.as_matrix())?;
    let f: f64 = product.singular_values().iter().sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Fidelity between a pure state and a state: `√⟨ψ|ρ|ψ⟩`.
pub fn fidelity_pure(psi: &PureState, rho: &CMat) -> f64 {
    psi.expectation(rho).re.max(0.0).sqrt().min(1.0)
}

/// Shannon entropy in bits of a (clamped) spectrum.
pub fn spectrum_entropy_bits(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&v| v > ENTROPY_CUTOFF)
        .map(|&v| -v * v.log2())
        .sum()
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let s = spectrum_entropy_bits(&eigvalsh(rho.as_matrix()));
    s.clamp(0.0, (rho.dim() as f64).log2())
}

/// `Tr ρ²`
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.as_matrix().iter().map(|z| z.norm_sqr()).sum()
}

/// Standard complex Gaussian: real and imaginary parts each `N(0, 1/2)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVec {
    CVec::from_fn(d, |_, _| complex_gaussian(rng))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    // filled column by column so the draw order is fixed
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = gaussian_matrix(d, d, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `‖W†W − I‖_max`
pub fn isometry_defect(w: &CMat) -> f64 {
    let g = w.adjoint() * w;
    let id = identity(w.ncols());
    (g - id).iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Haar-random pure state in the column span of an isometry.
pub fn haar_state_in_subspace<R: Rng + ?Sized>(isometry: &CMat, rng: &mut R) -> Result<PureState> {
    let defect = isometry_defect(isometry);
    if defect > ISOMETRY_TOL {
        return Err(Error::Invariant(format!(
            "columns are not orthonormal (defect {defect:.3e})"
        )));
    }
    let g = PureState::random(isometry.ncols(), rng);
    PureState::normalized(isometry * g.as_vector())
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Leading eigenpairs of a Hermitian positive semi-definite operator given
/// only through its action, by Lanczos iteration with full
/// reorthogonalization.
#[derive(Clone, Debug)]
pub struct LanczosResult {
    /// Ritz values, descending.
    pub values: Vec<f64>,
    /// Residual norm of each Ritz pair, aligned with `values`.
    pub residuals: Vec<f64>,
    /// Unit Ritz vector for the largest value.
    pub top_vector: CVec,
    pub steps: usize,
}

pub fn lanczos_top<F>(apply: F, start: CVec, max_steps: usize, tol: f64) -> LanczosResult
where
    F: Fn(&CVec) -> CVec,
{
    let dim = start.len();
    let max_steps = max_steps.clamp(1, dim.max(1));
    let norm = start.norm();
    let mut basis: Vec<CVec> = Vec::with_capacity(max_steps);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_steps);
    let mut beta: Vec<f64> = Vec::with_capacity(max_steps);
    basis.push(if norm > 0.0 { start.unscale(norm) } else { start });

    let ritz = |alpha: &[f64], beta: &[f64]| {
        let m = alpha.len();
        let t = DMatrix::<f64>::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        SymmetricEigen::new(t)
    };

    loop {
        let j = basis.len() - 1;
        let mut w = apply(&basis[j]);
        let a = basis[j].dotc(&w).re;
        alpha.push(a);
        w.axpy(c(-a, 0.0), &basis[j], c(1.0, 0.0));
        if j > 0 {
            w.axpy(c(-beta[j - 1], 0.0), &basis[j - 1], c(1.0, 0.0));
        }
        for _ in 0..2 {
            for q in &basis {
                let h = q.dotc(&w);
                w.axpy(-h, q, c(1.0, 0.0));
            }
        }
        let b = w.norm();
        let steps = alpha.len();
        let scale = alpha.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let exhausted = b <= 1e-14 * scale || steps >= max_steps;
        if exhausted || steps % 4 == 0 {
            let eig = ritz(&alpha, &beta);
            let top = (0..steps)
                .max_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]))
                .unwrap_or(0);
            let top_residual = b * eig.eigenvectors[(steps - 1, top)].abs();
            if exhausted || top_residual <= tol * scale {
                let mut order: Vec<usize> = (0..steps).collect();
                order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
                let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
                let residuals = order
                    .iter()
                    .map(|&i| b * eig.eigenvectors[(steps - 1, i)].abs())
                    .collect();
                let mut top_vector = CVec::zeros(dim);
                for (k, q) in basis.iter().enumerate() {
                    top_vector.axpy(c(eig.eigenvectors[(k, top)], 0.0), q, c(1.0, 0.0));
                }
                let n = top_vector.norm();
                if n > 0.0 {
                    top_vector.unscale_mut(n);
                }
                return LanczosResult {
                    values,
                    residuals,
                    top_vector,
                    steps,
                };
            }
        }
        beta.push(b);
        basis.push(w.unscale(b));
    }
}
