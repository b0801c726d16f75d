//! Kraus-form channels, their transfer matrices, standard constructors and
//! the weighted maps built from a positive weight operator.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    c, checked_pow, eigh, gaussian_matrix, haar_unitary, identity, is_finite, isometry_defect, kron, op_norm_hermitian,
    zeros, CMat, CVec, DensityMatrix, DimensionGuard, C64,
};

/// Tolerance for `Σ E†E = I` at construction.
pub const TP_TOL: f64 = 1e-9;
/// Relative leak allowed outside a weight operator's support.
pub const SUPPORT_TOL: f64 = 1e-8;
/// Eigenvalues at or below `RANK_TOL * max` are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// A completely positive trace-preserving map in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    d_in: usize,
    d_out: usize,
    kraus: Vec<CMat>,
}

fn tp_defect(kraus: &[CMat], d_in: usize) -> f64 {
    let mut sum = zeros(d_in, d_in);
    for e in kraus {
        sum += e.adjoint() * e;
    }
    sum -= identity(d_in);
    let frob = sum.norm();
    if frob <= TP_TOL {
        frob
    } else {
        op_norm_hermitian(&sum)
    }
}

impl KrausChannel {
    /// Builds a channel, checking shapes and trace preservation.
    pub fn new(d_in: usize, d_out: usize, kraus: Vec<CMat>) -> Result<Self> {
        let ch = Self::new_unchecked(d_in, d_out, kraus)?;
        let defect = tp_defect(&ch.kraus, d_in);
        if defect > TP_TOL {
            return Err(Error::Invariant(format!(
                "Kraus operators are not trace preserving: ‖Σ E†E − I‖ = {defect:.3e}"
            )));
        }
        Ok(ch)
    }

    /// Builds a Kraus family checking only shapes. Used for diagnostics on
    /// deliberately broken inputs and for products of channels already known
    /// to be trace preserving.
    pub fn new_unchecked(d_in: usize, d_out: usize, kraus: Vec<CMat>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::Shape("a channel needs at least one Kraus operator".into()));
        }
        if d_in == 0 || d_out == 0 {
            return Err(Error::Shape("channel dimensions must be positive".into()));
        }
        for (i, e) in kraus.iter().enumerate() {
            if e.shape() != (d_out, d_in) {
                return Err(Error::Shape(format!(
                    "Kraus operator {i} is {}x{}, expected {d_out}x{d_in}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            if !is_finite(e) {
                return Err(Error::Invariant(format!("Kraus operator {i} has non-finite entries")));
            }
        }
        Ok(Self { d_in, d_out, kraus })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d_in: d,
            d_out: d,
            kraus: vec![identity(d)],
        }
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn num_kraus(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_square(&self) -> bool {
        self.d_in == self.d_out
    }

    /// `‖Σ E†E − I‖`
    pub fn trace_preservation_defect(&self) -> f64 {
        tp_defect(&self.kraus, self.d_in)
    }

    /// `ρ ↦ Σ E ρ E†` on a state.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_trusted(self.apply_operator(rho.as_matrix())?))
    }

    /// `X ↦ Σ E X E†` on an arbitrary operator.
    pub fn apply_operator(&self, x: &CMat) -> Result<CMat> {
        if x.shape() != (self.d_in, self.d_in) {
            return Err(Error::Shape(format!(
                "channel input is {}x{}, operator is {}x{}",
                self.d_in,
                self.d_in,
                x.nrows(),
                x.ncols()
            )));
        }
        let mut out = zeros(self.d_out, self.d_out);
        for e in &self.kraus {
            out += e * x * e.adjoint();
        }
        Ok(out)
    }

    /// Adjoint map `X ↦ Σ E† X E`, defined by `Tr(σ 𝓔†(X)) = Tr(𝓔(σ) X)`.
    pub fn adjoint_apply(&self, x: &CMat) -> Result<CMat> {
        if x.shape() != (self.d_out, self.d_out) {
            return Err(Error::Shape(format!(
                "channel output is {}x{}, operator is {}x{}",
                self.d_out,
                self.d_out,
                x.nrows(),
                x.ncols()
            )));
        }
        let mut out = zeros(self.d_in, self.d_in);
        for e in &self.kraus {
            out += e.adjoint() * x * e;
        }
        Ok(out)
    }

    /// `‖Σ E E† − I‖` (operator norm).
    pub fn unitality_defect(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Shape(format!(
                "unitality needs equal input and output dimensions, got {} -> {}",
                self.d_in, self.d_out
            )));
        }
        let mut sum = zeros(self.d_out, self.d_out);
        for e in &self.kraus {
            sum += e * e.adjoint();
        }
        sum -= identity(self.d_out);
        Ok(op_norm_hermitian(&sum))
    }

    /// Parallel composition `self ⊗ other`.
    pub fn tensor(&self, other: &KrausChannel, guard: &DimensionGuard) -> Result<KrausChannel> {
        let count = self.num_kraus().saturating_mul(other.num_kraus());
        guard.check_kraus(count)?;
        guard.check_dim("channel input", self.d_in.saturating_mul(other.d_in))?;
        guard.check_dim("channel output", self.d_out.saturating_mul(other.d_out))?;
        let mut kraus = Vec::with_capacity(count);
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(kron(a, b));
            }
        }
        Ok(KrausChannel {
            d_in: self.d_in * other.d_in,
            d_out: self.d_out * other.d_out,
            kraus,
        })
    }
}

/// Whether `Σ E E† = I` within `tol` in operator norm.
pub fn is_unital(ch: &KrausChannel, tol: f64) -> Result<bool> {
    Ok(ch.unitality_defect()? <= tol)
}

/// Row-major vectorization `|i⟩⟨j| ↦ |i⟩|j⟩`.
pub fn vectorize(x: &CMat) -> CVec {
    let cols = x.ncols();
    CVec::from_fn(x.nrows() * cols, |k, _| x[(k / cols, k % cols)])
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(Error::Shape(format!(
            "vector of length {} cannot be reshaped to {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| v[i * cols + j]))
}

/// `|I⟩ = Σ_i |i⟩|i⟩`, the vectorized identity.
pub fn identity_vector(d: usize) -> CVec {
    vectorize(&identity(d))
}

/// The channel as a `d_out² × d_in²` matrix acting on vectorized operators.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    pub mat: CMat,
    pub d_in: usize,
    pub d_out: usize,
}

impl TransferMatrix {
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        if x.shape() != (self.d_in, self.d_in) {
            return Err(Error::Shape("transfer matrix input dimension mismatch".into()));
        }
        unvectorize(&(&self.mat * vectorize(x)), self.d_out, self.d_out)
    }

    /// `‖E|I⟩ − |I⟩‖₂`; zero exactly for unital channels.
    pub fn fixed_point_residual(&self) -> f64 {
        let v = identity_vector(self.d_in);
        (&self.mat * &v - identity_vector(self.d_out)).norm()
    }

    /// Kronecker power of the matrix, with rows and columns reordered from
    /// `(i₁j₁)(i₂j₂)…` to `(i₁i₂…)(j₁j₂…)` so that it matches the transfer
    /// matrix of the tensor-power channel.
    pub fn kron_power(&self, n: usize) -> TransferMatrix {
        let mut mat = self.mat.clone();
        for _ in 1..n {
            mat = kron(&mat, &self.mat);
        }
        let rows = interleave_permutation(self.d_out, n);
        let cols = interleave_permutation(self.d_in, n);
        let mat = CMat::from_fn(mat.nrows(), mat.ncols(), |r, c| mat[(rows[r], cols[c])]);
        TransferMatrix {
            mat,
            d_in: self.d_in.pow(n as u32),
            d_out: self.d_out.pow(n as u32),
        }
    }
}

// maps the grouped index (i₁…iₙ, j₁…jₙ) to the interleaved one (i₁j₁…iₙjₙ)
fn interleave_permutation(d: usize, n: usize) -> Vec<usize> {
    let dn = d.pow(n as u32);
    (0..dn * dn)
        .map(|grouped| {
            let (mut i, mut j) = (grouped / dn, grouped % dn);
            let mut digits = vec![(0, 0); n];
            for slot in digits.iter_mut().rev() {
                *slot = (i % d, j % d);
                i /= d;
                j /= d;
            }
            digits.iter().fold(0, |acc, &(a, b)| (acc * d + a) * d + b)
        })
        .collect()
}

/// `E = Σ E_i ⊗ E_i*`.
pub fn transfer_matrix(ch: &KrausChannel) -> TransferMatrix {
    let mut mat = zeros(ch.d_out * ch.d_out, ch.d_in * ch.d_in);
    for e in ch.kraus() {
        mat += kron(e, &e.conjugate());
    }
    TransferMatrix {
        mat,
        d_in: ch.d_in,
        d_out: ch.d_out,
    }
}

/// `𝓔^{⊗n}` with all `kⁿ` Kraus operators materialized.
pub fn tensor_power(ch: &KrausChannel, n: usize, guard: &DimensionGuard) -> Result<KrausChannel> {
    if n == 0 {
        return Err(Error::Parameter("tensor power needs n >= 1".into()));
    }
    let count = checked_pow(ch.num_kraus(), n).unwrap_or(usize::MAX);
    guard.check_kraus(count)?;
    guard.check_dim("tensor power input", checked_pow(ch.d_in, n).unwrap_or(usize::MAX))?;
    guard.check_dim("tensor power output", checked_pow(ch.d_out, n).unwrap_or(usize::MAX))?;
    let mut out = ch.clone();
    for _ in 1..n {
        out = out.tensor(ch, guard)?;
    }
    Ok(out)
}

/// Mixture `ρ ↦ Σ p_i U_i ρ U_i†` with Kraus operators `√p_i U_i`.
pub fn unitary_mixture(unitaries: &[CMat], probs: &[f64]) -> Result<KrausChannel> {
    if unitaries.is_empty() || unitaries.len() != probs.len() {
        return Err(Error::Parameter(format!(
            "need one probability per unitary, got {} unitaries and {} probabilities",
            unitaries.len(),
            probs.len()
        )));
    }
    if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!(
            "probabilities must be non-negative and sum to 1, got {probs:?}"
        )));
    }
    let d = unitaries[0].nrows();
    for (i, u) in unitaries.iter().enumerate() {
        if u.shape() != (d, d) {
            return Err(Error::Shape(format!("unitary {i} is not {d}x{d}")));
        }
        let defect = isometry_defect(u);
        if defect > 1e-10 {
            return Err(Error::Parameter(format!(
                "matrix {i} is not unitary (defect {defect:.3e})"
            )));
        }
    }
    let kraus = unitaries.iter().zip(probs).map(|(u, &p)| u.scale(p.sqrt())).collect();
    KrausChannel::new(d, d, kraus)
}

/// Generalized Pauli `X^a Z^b` with `X|j⟩ = |j+1⟩`, `Z|j⟩ = ω^j |j⟩`.
pub fn weyl_operator(d: usize, a: usize, b: usize) -> CMat {
    let mut m = zeros(d, d);
    let omega = 2.0 * std::f64::consts::PI / d as f64;
    for j in 0..d {
        let phase = C64::from_polar(1.0, omega * ((b * j) % d) as f64);
        m[((j + a) % d, j)] = phase;
    }
    m
}

pub fn pauli_z() -> CMat {
    weyl_operator(2, 0, 1)
}

/// Closed-form channels used as oracles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NamedChannel {
    Identity,
    /// `ρ ↦ (1−p)ρ + p I/d`, `0 ≤ p ≤ d²/(d²−1)`.
    Depolarizing(f64),
    /// Qubit `{√(1−p) I, √p Z}`, `0 ≤ p ≤ 1`.
    Dephasing(f64),
}

pub fn named_channel(kind: NamedChannel, d: usize) -> Result<KrausChannel> {
    if d == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    match kind {
        NamedChannel::Identity => Ok(KrausChannel::identity(d)),
        NamedChannel::Depolarizing(p) => {
            let d2 = (d * d) as f64;
            let pmax = if d == 1 { 0.0 } else { d2 / (d2 - 1.0) };
            if !(0.0..=pmax).contains(&p) {
                return Err(Error::Parameter(format!(
                    "depolarizing parameter {p} outside [0, {pmax}] for d = {d}"
                )));
            }
            let w_id = (1.0 - p * (d2 - 1.0) / d2).max(0.0).sqrt();
            let w = (p / d2).sqrt();
            let mut kraus = Vec::with_capacity(d * d);
            for a in 0..d {
                for b in 0..d {
                    let weight = if a == 0 && b == 0 { w_id } else { w };
                    kraus.push(weyl_operator(d, a, b).scale(weight));
                }
            }
            KrausChannel::new(d, d, kraus)
        }
        NamedChannel::Dephasing(p) => {
            if d != 2 {
                return Err(Error::Parameter(format!("dephasing is a qubit channel, got d = {d}")));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parameter(format!("dephasing parameter {p} outside [0, 1]")));
            }
            KrausChannel::new(
                2,
                2,
                vec![identity(2).scale((1.0 - p).sqrt()), pauli_z().scale(p.sqrt())],
            )
        }
    }
}

/// The ancilla refresh `|0⟩⟨0| ⊗ Tr(·)` with Kraus operators `|0⟩⟨i|`.
pub fn ancilla_reset(d_t: usize) -> KrausChannel {
    let kraus = (0..d_t)
        .map(|i| {
            let mut m = zeros(d_t, d_t);
            m[(0, i)] = c(1.0, 0.0);
            m
        })
        .collect();
    KrausChannel {
        d_in: d_t,
        d_out: d_t,
        kraus,
    }
}

/// Random channel from a Haar isometry `C^{d_in} → C^{k} ⊗ C^{d_out}`.
pub fn random_channel<R: Rng + ?Sized>(d_in: usize, d_out: usize, k: usize, rng: &mut R) -> Result<KrausChannel> {
    if k == 0 || k * d_out < d_in {
        return Err(Error::Parameter(format!(
            "k·d_out = {} must be at least d_in = {d_in}",
            k * d_out
        )));
    }
    let u = haar_unitary(k * d_out, rng);
    let kraus = (0..k)
        .map(|i| u.view((i * d_out, 0), (d_out, d_in)).into_owned())
        .collect();
    KrausChannel::new(d_in, d_out, kraus)
}

/// Random mixture of `k` Haar unitaries with Dirichlet(1,…,1) weights.
pub fn random_unitary_mixture<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<KrausChannel> {
    let unitaries: Vec<CMat> = (0..k).map(|_| haar_unitary(d, rng)).collect();
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
    // pin the sum to 1 up to the last ulp
    let head: f64 = probs[..k - 1].iter().sum();
    probs[k - 1] = (1.0 - head).max(0.0);
    unitary_mixture(&unitaries, &probs)
}

/// A positive semi-definite weight operator with cached spectral data.
#[derive(Clone, Debug)]
pub struct WeightOperator {
    mat: CMat,
    eigenvalues: Vec<f64>,
    eigenvectors: CMat,
    cutoff: f64,
    support: CMat,
    pinv: CMat,
    pinv_sqrt: CMat,
}

impl WeightOperator {
    pub fn new(mat: CMat) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(Error::Shape("weight operator must be square and non-empty".into()));
        }
        if !is_finite(&mat) {
            return Err(Error::Invariant("weight operator has non-finite entries".into()));
        }
        let defect = crate::linalg::hermiticity_defect(&mat);
        if defect > 1e-10 * mat.norm().max(1.0) {
            return Err(Error::Invariant(format!(
                "weight operator is not Hermitian (defect {defect:.3e})"
            )));
        }
        let eig = eigh(&mat);
        let max = eig.max();
        if !(max > 0.0) {
            return Err(Error::Parameter("weight operator has empty support".into()));
        }
        if eig.min() < -crate::linalg::NEG_EIG_TOL * max.max(1.0) {
            return Err(Error::Invariant(format!(
                "weight operator has eigenvalue {:.3e} below zero",
                eig.min()
            )));
        }
        let cutoff = RANK_TOL * max;
        let on = |v: f64| v > cutoff;
        let support = eig.map(|v| if on(v) { 1.0 } else { 0.0 });
        let pinv = eig.map(|v| if on(v) { 1.0 / v } else { 0.0 });
        let pinv_sqrt = eig.map(|v| if on(v) { 1.0 / v.sqrt() } else { 0.0 });
        Ok(Self {
            mat: crate::linalg::hermitian_part(&mat),
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
            cutoff,
            support,
            pinv,
            pinv_sqrt,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::new(identity(d)).expect("identity is a valid weight")
    }

    /// `c · I_d`
    pub fn scalar(c: f64, d: usize) -> Result<Self> {
        Self::new(identity(d).scale(c))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&v| v > self.cutoff).count()
    }

    pub fn support_projector(&self) -> &CMat {
        &self.support
    }

    /// `Π⁺`
    pub fn pseudo_inverse(&self) -> &CMat {
        &self.pinv
    }

    /// `(Π⁺)^{1/2}`
    pub fn pseudo_inverse_sqrt(&self) -> &CMat {
        &self.pinv_sqrt
    }

    /// `Tr Π²`
    pub fn trace_of_square(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v * v).sum()
    }

    /// `Some(c)` when `Π = c·I` to within `1e-12` relative.
    pub fn as_scalar(&self) -> Option<f64> {
        let c = self.mat[(0, 0)].re;
        let diff = crate::linalg::max_abs_diff(&self.mat, &identity(self.dim()).scale(c));
        (c > 0.0 && diff <= 1e-12 * c).then_some(c)
    }

    /// `‖X − P X P‖_F / ‖X‖_F` for the support projector `P`.
    pub fn relative_leak(&self, x: &CMat) -> f64 {
        let norm = x.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let inside = &self.support * x * &self.support;
        (x - inside).norm() / norm
    }

    pub fn ensure_supports(&self, x: &CMat) -> Result<()> {
        let leak = self.relative_leak(x);
        if leak > SUPPORT_TOL {
            return Err(Error::Support { leak, tol: SUPPORT_TOL });
        }
        Ok(())
    }
}

/// `𝒫_Π(ρ) = 𝓔†(Π⁺ ρ Π⁺)`.
pub fn p_pi_map(ch: &KrausChannel, pi: &WeightOperator, rho: &CMat) -> Result<CMat> {
    if pi.dim() != ch.d_out() {
        return Err(Error::Shape(format!(
            "weight operator acts on dimension {}, channel output is {}",
            pi.dim(),
            ch.d_out()
        )));
    }
    pi.ensure_supports(rho)?;
    ch.adjoint_apply(&(pi.pseudo_inverse() * rho * pi.pseudo_inverse()))
}

/// `G_{𝓔,Π}(ρ) = Π^{-1/2} 𝓔(ρ) Π^{-1/2}`.
pub fn g_map(ch: &KrausChannel, pi: &WeightOperator, rho: &DensityMatrix) -> Result<CMat> {
    if pi.dim() != ch.d_out() {
        return Err(Error::Shape(format!(
            "weight operator acts on dimension {}, channel output is {}",
            pi.dim(),
            ch.d_out()
        )));
    }
    let out = ch.apply_operator(rho.as_matrix())?;
    pi.ensure_supports(&out)?;
    let s = pi.pseudo_inverse_sqrt();
    Ok(crate::linalg::hermitian_part(&(s * out * s)))
}

/// Random matrix with independent complex Gaussian entries (for tests and
/// property suites).
pub fn random_operator<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    gaussian_matrix(rows, cols, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, max_abs_diff, outer, trace, PureState};
    use crate::seeding::stream;

    fn plus_state() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(CVec::from_vec(vec![c(s, 0.0), c(s, 0.0)]))
            .unwrap()
            .density()
    }

    fn amplitude_damping(gamma: f64) -> KrausChannel {
        let mut e0 = zeros(2, 2);
        e0[(0, 0)] = c(1.0, 0.0);
        e0[(1, 1)] = c((1.0 - gamma).sqrt(), 0.0);
        let mut e1 = zeros(2, 2);
        e1[(0, 1)] = c(gamma.sqrt(), 0.0);
        KrausChannel::new(2, 2, vec![e0, e1]).unwrap()
    }

    #[test]
    fn construction_rejects_non_trace_preserving_sets() {
        let r = KrausChannel::new(2, 2, vec![identity(2).scale(1.1)]);
        assert!(matches!(r, Err(Error::Invariant(_))));
        assert!(matches!(KrausChannel::new(2, 2, vec![]), Err(Error::Shape(_))));
        assert!(matches!(
            KrausChannel::new(2, 2, vec![identity(3)]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn apply_identity_and_full_depolarizing() {
        let mut rng = stream(1);
        let rho = DensityMatrix::random(2, 2, &mut rng);
        let out = KrausChannel::identity(2).apply(&rho).unwrap();
        assert!(max_abs_diff(out.as_matrix(), rho.as_matrix()) < 1e-15);
        let dep = named_channel(NamedChannel::Depolarizing(1.0), 2).unwrap();
        let out = dep.apply(&rho).unwrap();
        assert!(max_abs_diff(out.as_matrix(), &identity(2).scale(0.5)) < 1e-14);
    }

    #[test]
    fn dephasing_damps_coherences() {
        // off-diagonals scale by 1 − 2p
        let out = named_channel(NamedChannel::Dephasing(0.25), 2)
            .unwrap()
            .apply(&plus_state())
            .unwrap();
        let m = out.as_matrix();
        assert!((m[(0, 1)] - c(0.25, 0.0)).norm() < 1e-15);
        assert!((m[(1, 0)] - c(0.25, 0.0)).norm() < 1e-15);
        assert!((m[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);

        let out = named_channel(NamedChannel::Dephasing(0.5), 2)
            .unwrap()
            .apply(&plus_state())
            .unwrap();
        assert!(max_abs_diff(out.as_matrix(), &identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn depolarizing_on_zero_state() {
        let ch = named_channel(NamedChannel::Depolarizing(0.5), 2).unwrap();
        let out = ch.apply(&PureState::basis(2, 0).density()).unwrap();
        let expected = DensityMatrix::from_diagonal(&[0.75, 0.25]).unwrap();
        assert!(max_abs_diff(out.as_matrix(), expected.as_matrix()) < 1e-15);
    }

    #[test]
    fn depolarizing_zero_is_identity_action() {
        let mut rng = stream(2);
        for d in [2, 3, 4] {
            let ch = named_channel(NamedChannel::Depolarizing(0.0), d).unwrap();
            let rho = DensityMatrix::random(d, d, &mut rng);
            let out = ch.apply(&rho).unwrap();
            assert!(max_abs_diff(out.as_matrix(), rho.as_matrix()) < 1e-14);
        }
    }

    #[test]
    fn named_channel_parameter_ranges() {
        assert!(named_channel(NamedChannel::Depolarizing(-0.1), 2).is_err());
        assert!(named_channel(NamedChannel::Depolarizing(4.0 / 3.0), 2).is_ok());
        assert!(named_channel(NamedChannel::Depolarizing(1.4), 2).is_err());
        assert!(named_channel(NamedChannel::Dephasing(1.1), 2).is_err());
        assert!(named_channel(NamedChannel::Dephasing(0.2), 3).is_err());
    }

    #[test]
    fn trace_is_preserved() {
        let mut rng = stream(3);
        for _ in 0..20 {
            let ch = random_channel(3, 2, 4, &mut rng).unwrap();
            let rho = DensityMatrix::random(3, 3, &mut rng);
            let out = ch.apply(&rho).unwrap();
            assert!((trace(out.as_matrix()) - c(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn adjoint_duality() {
        let mut rng = stream(4);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let ch = random_channel(3, 2, 3, &mut rng).unwrap();
            let sigma = random_operator(3, 3, &mut rng);
            let rho = random_operator(2, 2, &mut rng);
            let lhs = trace(&(&sigma * ch.adjoint_apply(&rho).unwrap()));
            let rhs = trace(&(ch.apply_operator(&sigma).unwrap() * &rho));
            worst = worst.max((lhs - rhs).norm());
        }
        assert!(worst <= 1e-10, "duality residual {worst}");
    }

    #[test]
    fn adjoint_of_unital_and_identity() {
        let mut rng = stream(5);
        let ch = random_unitary_mixture(3, 4, &mut rng).unwrap();
        let out = ch.adjoint_apply(&identity(3)).unwrap();
        assert!(max_abs_diff(&out, &identity(3)) < 1e-12);
        let x = random_operator(3, 3, &mut rng);
        let out = KrausChannel::identity(3).adjoint_apply(&x).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn transfer_matrix_commutes_with_vectorization() {
        let mut rng = stream(6);
        for _ in 0..10 {
            let ch = random_channel(2, 3, 2, &mut rng).unwrap();
            let tm = transfer_matrix(&ch);
            for _ in 0..100 {
                let rho = DensityMatrix::random(2, 2, &mut rng);
                let direct = vectorize(ch.apply(&rho).unwrap().as_matrix());
                let via = &tm.mat * vectorize(rho.as_matrix());
                assert!((direct - via).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn transfer_matrix_closed_forms() {
        assert_eq!(transfer_matrix(&KrausChannel::identity(3)).mat, identity(9));

        let mut rng = stream(7);
        let ch = random_unitary_mixture(3, 3, &mut rng).unwrap();
        let tm = transfer_matrix(&ch);
        let v = identity_vector(3);
        assert!((&tm.mat * &v - &v).norm() < 1e-10);

        for d in [2, 3] {
            for p in [0.0, 0.3, 1.0] {
                let tm = transfer_matrix(&named_channel(NamedChannel::Depolarizing(p), d).unwrap());
                let iv = identity_vector(d);
                let expected = identity(d * d).scale(1.0 - p) + outer(&iv, &iv).scale(p / d as f64);
                assert!(max_abs_diff(&tm.mat, &expected) < 1e-14);
            }
        }
    }

    #[test]
    fn tensor_power_properties() {
        let mut rng = stream(8);
        let ch = random_channel(2, 2, 2, &mut rng).unwrap();
        let g = DimensionGuard::default();
        assert_eq!(tensor_power(&ch, 1, &g).unwrap(), ch);

        let id3 = tensor_power(&KrausChannel::identity(2), 3, &g).unwrap();
        assert_eq!(id3.num_kraus(), 1);
        assert_eq!(id3.kraus()[0], identity(8));

        let ch2 = tensor_power(&ch, 2, &g).unwrap();
        assert_eq!(ch2.num_kraus(), 4);
        for _ in 0..10 {
            let rho = DensityMatrix::random(2, 2, &mut rng);
            let sigma = DensityMatrix::random(2, 2, &mut rng);
            let joint = ch2.apply(&rho.tensor(&sigma)).unwrap();
            let sep = ch.apply(&rho).unwrap().tensor(&ch.apply(&sigma).unwrap());
            assert!(max_abs_diff(joint.as_matrix(), sep.as_matrix()) < 1e-10);
        }
    }

    #[test]
    fn tensor_power_transfer_matrix_is_kron_power() {
        let mut rng = stream(9);
        let g = DimensionGuard::default();
        for (d, k) in [(2, 2), (2, 3), (3, 2)] {
            let ch = random_channel(d, d, k, &mut rng).unwrap();
            let tm = transfer_matrix(&ch);
            for n in 1..=3 {
                if d == 3 && n == 3 {
                    continue;
                }
                let lhs = transfer_matrix(&tensor_power(&ch, n, &g).unwrap());
                let rhs = tm.kron_power(n);
                assert!(max_abs_diff(&lhs.mat, &rhs.mat) < 1e-9);
            }
        }
    }

    #[test]
    fn tensor_power_guard() {
        let ch = named_channel(NamedChannel::Depolarizing(0.5), 2).unwrap();
        let g = DimensionGuard {
            max_dim: 4096,
            max_kraus: 16,
        };
        assert!(tensor_power(&ch, 2, &g).is_ok());
        assert!(matches!(tensor_power(&ch, 3, &g), Err(Error::DimensionLimit { .. })));
        assert!(tensor_power(&ch, 0, &g).is_err());
    }

    #[test]
    fn unitality_checks() {
        let mut rng = stream(10);
        assert!(is_unital(&KrausChannel::identity(4), 1e-12).unwrap());
        for _ in 0..50 {
            let d = 2 + (rng.random::<u32>() % 3) as usize;
            let k = 1 + (rng.random::<u32>() % 4) as usize;
            let ch = random_unitary_mixture(d, k, &mut rng).unwrap();
            assert!(is_unital(&ch, 1e-9).unwrap());
        }
        // Σ E E† = diag(1 + γ, 1 − γ) for amplitude damping
        assert!(!is_unital(&amplitude_damping(0.3), 1e-9).unwrap());
        let rect = random_channel(2, 3, 2, &mut rng).unwrap();
        assert!(matches!(is_unital(&rect, 1e-9), Err(Error::Shape(_))));
    }

    #[test]
    fn unitary_mixture_definitions() {
        let mut rng = stream(11);
        let u = haar_unitary(3, &mut rng);
        let ch = unitary_mixture(std::slice::from_ref(&u), &[1.0]).unwrap();
        let rho = DensityMatrix::random(3, 3, &mut rng);
        let out = ch.apply(&rho).unwrap();
        assert!(max_abs_diff(out.as_matrix(), &(&u * rho.as_matrix() * u.adjoint())) < 1e-14);

        let mix = unitary_mixture(&[identity(2), pauli_z()], &[0.75, 0.25]).unwrap();
        let deph = named_channel(NamedChannel::Dephasing(0.25), 2).unwrap();
        assert!(max_abs_diff(&transfer_matrix(&mix).mat, &transfer_matrix(&deph).mat) < 1e-15);

        assert!(unitary_mixture(&[identity(2)], &[0.9]).is_err());
        assert!(unitary_mixture(&[identity(2), identity(2)], &[1.5, -0.5]).is_err());
        assert!(unitary_mixture(&[identity(2).scale(2.0)], &[1.0]).is_err());
    }

    #[test]
    fn weight_operator_spectral_cache() {
        let mut rng = stream(12);
        let g = random_operator(3, 2, &mut rng);
        let pi = WeightOperator::new(&g * g.adjoint()).unwrap();
        assert_eq!(pi.rank(), 2);
        let p = pi.support_projector();
        assert!(max_abs_diff(&(p * p), p) < 1e-10);
        let back = pi.matrix() * pi.pseudo_inverse() * pi.matrix();
        assert!(max_abs_diff(&back, pi.matrix()) < 1e-9);
        assert!(WeightOperator::new(zeros(2, 2)).is_err());
        assert!(WeightOperator::new(CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-0.5, 0.0)]))).is_err());
        assert_eq!(WeightOperator::scalar(2.5, 3).unwrap().as_scalar(), Some(2.5));
        assert_eq!(pi.as_scalar(), None);
    }

    #[test]
    fn p_pi_closed_forms() {
        let mut rng = stream(13);
        let rho = DensityMatrix::random(3, 3, &mut rng);
        let out = p_pi_map(
            &KrausChannel::identity(3),
            &WeightOperator::identity(3),
            rho.as_matrix(),
        )
        .unwrap();
        assert!(max_abs_diff(&out, rho.as_matrix()) < 1e-13);

        // ancilla refresh with Π = √d_T |0⟩⟨0| sends |0⟩⟨0| to I/d_T
        for d_t in [1, 2, 3, 5] {
            let t = ancilla_reset(d_t);
            let mut w = zeros(d_t, d_t);
            w[(0, 0)] = c((d_t as f64).sqrt(), 0.0);
            let pi = WeightOperator::new(w).unwrap();
            let zero = PureState::basis(d_t, 0).density();
            let out = p_pi_map(&t, &pi, zero.as_matrix()).unwrap();
            assert!(max_abs_diff(&out, &identity(d_t).scale(1.0 / d_t as f64)) < 1e-14);
        }
    }

    #[test]
    fn p_pi_is_completely_positive_in_practice() {
        let mut rng = stream(14);
        let mut worst = f64::INFINITY;
        for _ in 0..100 {
            let ch = random_channel(2, 3, 2, &mut rng).unwrap();
            let g = random_operator(3, 3, &mut rng);
            let pi = WeightOperator::new(&g * g.adjoint()).unwrap();
            let rho = DensityMatrix::random(3, 2, &mut rng);
            let out = p_pi_map(&ch, &pi, rho.as_matrix()).unwrap();
            let scale = out.norm().max(1.0);
            worst = worst.min(eigvalsh(&out)[0] / scale);
        }
        assert!(worst >= -1e-9, "min eigenvalue {worst}");
    }

    #[test]
    fn p_pi_rejects_leaking_inputs() {
        let pi = WeightOperator::new(CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]))).unwrap();
        let leak = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            p_pi_map(&KrausChannel::identity(2), &pi, leak.as_matrix()),
            Err(Error::Support { .. })
        ));
    }

    #[test]
    fn g_map_closed_forms() {
        let mut rng = stream(15);
        let ch = random_unitary_mixture(2, 3, &mut rng).unwrap();
        let rho = DensityMatrix::random(2, 2, &mut rng);
        let direct = ch.apply(&rho).unwrap();

        let g = g_map(&ch, &WeightOperator::identity(2), &rho).unwrap();
        assert!(max_abs_diff(&g, direct.as_matrix()) < 1e-13);

        // for a unital channel 𝓔(I/d)·d = I
        let pi_mat = ch.apply_operator(&identity(2).scale(0.5)).unwrap().scale(2.0);
        let g = g_map(&ch, &WeightOperator::new(pi_mat).unwrap(), &rho).unwrap();
        assert!(max_abs_diff(&g, direct.as_matrix()) < 1e-10);

        let g = g_map(&ch, &WeightOperator::scalar(2.0, 2).unwrap(), &rho).unwrap();
        assert!(max_abs_diff(&g, &direct.as_matrix().scale(0.5)) < 1e-13);
    }

    #[test]
    fn random_channel_validation() {
        let mut rng = stream(16);
        assert!(random_channel(4, 2, 1, &mut rng).is_err());
        let ch = random_channel(4, 2, 2, &mut rng).unwrap();
        assert!(ch.trace_preservation_defect() < 1e-12);
    }

    #[test]
    fn weyl_operators_are_unitary_and_traceless() {
        for d in [2, 3, 5] {
            for a in 0..d {
                for b in 0..d {
                    let w = weyl_operator(d, a, b);
                    assert!(isometry_defect(&w) < 1e-14);
                    if a != 0 || b != 0 {
                        assert!(trace(&w).norm() < 1e-12);
                    }
                }
            }
        }
    }
}
