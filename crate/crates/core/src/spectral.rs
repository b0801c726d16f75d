//! Second singular value of a unital channel and the block structure of its
//! transfer matrix relative to the fixed point `|I⟩`.

use serde::Serialize;

use crate::channel::{identity_vector, transfer_matrix, unvectorize, vectorize, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{eigh, gaussian_vector, lanczos_top, outer, CMat, CVec};
use crate::seeding::stream;

/// Unitality tolerance required before `λ₂` is defined.
pub const UNITAL_TOL: f64 = 1e-9;
/// Largest input dimension handled by a dense SVD of the `d² × d²` block.
pub const DENSE_MAX_DIM: usize = 16;
const LANCZOS_TOL: f64 = 1e-13;
const LANCZOS_MAX_STEPS: usize = 1500;
const LANCZOS_SEED: u64 = 0x5EED_1A2C;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    DenseSvd,
    Lanczos,
}

impl SpectralMethod {
    /// Dense for small inputs, matrix-free above [`DENSE_MAX_DIM`].
    pub fn auto(d: usize) -> Self {
        if d <= DENSE_MAX_DIM {
            SpectralMethod::DenseSvd
        } else {
            SpectralMethod::Lanczos
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SpectralMethod::DenseSvd => "dense-svd",
            SpectralMethod::Lanczos => "lanczos",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub lambda2: f64,
    /// `‖E|I⟩ − |I⟩‖₂`
    pub fixed_point_residual: f64,
    /// `‖P¹E†EP⁰‖`
    pub offdiag_residual: f64,
    /// Singular values of `P¹EP¹` on the traceless sector, descending. The
    /// dense method lists all `d² − 1`; Lanczos lists the converged ones.
    pub restricted_singular_values: Vec<f64>,
    /// Traceless operator of unit Frobenius norm attaining `λ₂`.
    #[serde(skip)]
    pub maximizer: CMat,
    pub method: SpectralMethod,
    /// Residual of the leading Ritz pair (zero for the dense method).
    pub ritz_residual: f64,
}

impl SpectralReport {
    pub fn lambda2_sq(&self) -> f64 {
        self.lambda2 * self.lambda2
    }
}

/// Residuals of the three block relations of `E†E` with respect to
/// `P⁰ = |I⟩⟨I|/d` and `P¹ = 𝕀 − P⁰`.
#[derive(Clone, Debug, Serialize)]
pub struct BlockResiduals {
    pub lambda2: f64,
    /// Positive part of `P¹E†EP¹ − λ₂²P¹`.
    pub excess: f64,
    /// `‖P⁰E†EP⁰ − P⁰‖`
    pub fixed_block: f64,
    /// `‖P¹E†EP⁰‖`
    pub off_block: f64,
    pub flagged: bool,
}

impl BlockResiduals {
    pub fn max_residual(&self) -> f64 {
        self.excess.max(self.fixed_block).max(self.off_block)
    }
}

// matrix-free vectorized actions of E and E†
struct Vectorized<'a> {
    ch: &'a KrausChannel,
    fixed: CVec,
    d: f64,
}

impl<'a> Vectorized<'a> {
    fn new(ch: &'a KrausChannel) -> Self {
        Self {
            ch,
            fixed: identity_vector(ch.d_in()),
            d: ch.d_in() as f64,
        }
    }

    fn forward(&self, x: &CVec) -> CVec {
        let d = self.ch.d_in();
        let m = unvectorize(x, d, d).expect("length d²");
        vectorize(&self.ch.apply_operator(&m).expect("square channel"))
    }

    fn backward(&self, x: &CVec) -> CVec {
        let d = self.ch.d_out();
        let m = unvectorize(x, d, d).expect("length d²");
        vectorize(&self.ch.adjoint_apply(&m).expect("square channel"))
    }

    fn project_out(&self, x: &CVec) -> CVec {
        let overlap = self.fixed.dotc(x) / self.d;
        x - &self.fixed * overlap
    }

    fn start(&self) -> CVec {
        let mut rng = stream(LANCZOS_SEED);
        self.project_out(&gaussian_vector(self.fixed.len(), &mut rng))
    }
}

fn require_square(ch: &KrausChannel) -> Result<()> {
    if !ch.is_square() {
        return Err(Error::Shape(format!(
            "spectral quantities need equal input and output dimensions, got {} -> {}",
            ch.d_in(),
            ch.d_out()
        )));
    }
    Ok(())
}

// ‖E|I⟩ − |I⟩‖ and ‖P¹E†E|I⟩‖/√d
fn fixed_point_residuals(v: &Vectorized) -> (f64, f64, CVec) {
    let ev = v.forward(&v.fixed);
    let fixed = (&ev - &v.fixed).norm();
    let back = v.backward(&ev);
    let off = v.project_out(&back).norm() / v.d.sqrt();
    (fixed, off, ev)
}

/// `P¹ M P¹` for a dense `d² × d²` matrix.
fn restrict(m: &CMat, fixed: &CVec, d: f64) -> CMat {
    let mv = m * fixed;
    let vm = fixed.adjoint() * m;
    let vmv = fixed.dotc(&mv);
    let mut out = m.clone();
    out -= outer(&mv, fixed).unscale(d);
    out -= (fixed * vm).unscale(d);
    out += outer(fixed, fixed) * (vmv / (d * d));
    out
}

fn dense_restricted(ch: &KrausChannel) -> (Vec<f64>, CMat) {
    let d = ch.d_in();
    let tm = transfer_matrix(ch);
    let m = restrict(&tm.mat, &identity_vector(d), d as f64);
    // eigen-decomposition of M†M; the complex SVD loses accuracy on
    // repeated singular values
    let eig = eigh(&(m.adjoint() * &m));
    let mut values: Vec<f64> = eig.values.iter().rev().map(|v| v.max(0.0).sqrt()).collect();
    // the smallest singular direction is |I⟩ itself
    values.pop();
    let top = eig.vector(eig.values.len() - 1);
    let maximizer = unvectorize(&top, d, d).expect("length d²");
    (values, maximizer)
}

fn lanczos_restricted(v: &Vectorized, sandwich: bool) -> (Vec<f64>, CMat, f64) {
    let d = v.ch.d_in();
    let op = |x: &CVec| {
        let y = v.project_out(x);
        let mut ey = v.forward(&y);
        if sandwich {
            ey = v.project_out(&ey);
        }
        v.project_out(&v.backward(&ey))
    };
    let res = lanczos_top(op, v.start(), LANCZOS_MAX_STEPS, LANCZOS_TOL);
    let scale = res.values.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let values = res
        .values
        .iter()
        .zip(&res.residuals)
        .enumerate()
        .filter(|(i, (_, r))| *i == 0 || **r <= 1e-8 * scale)
        .map(|(_, (x, _))| x.max(0.0).sqrt())
        .collect();
    let maximizer = unvectorize(&res.top_vector, d, d).expect("length d²");
    (values, maximizer, res.residuals.first().copied().unwrap_or(0.0))
}

/// `λ₂ = ‖P¹EP¹‖` with the method chosen by input dimension.
pub fn second_singular_value(ch: &KrausChannel) -> Result<SpectralReport> {
    second_singular_value_with(ch, SpectralMethod::auto(ch.d_in()))
}

pub fn second_singular_value_with(ch: &KrausChannel, method: SpectralMethod) -> Result<SpectralReport> {
    require_square(ch)?;
    let defect = ch.unitality_defect()?;
    if defect > UNITAL_TOL {
        return Err(Error::Precondition(format!(
            "second singular value needs a unital channel; ‖𝓔(I) − I‖ = {defect:.3e}"
        )));
    }
    let v = Vectorized::new(ch);
    let (fixed_point_residual, offdiag_residual, _) = fixed_point_residuals(&v);
    let (values, maximizer, ritz_residual) = match method {
        SpectralMethod::DenseSvd => {
            let (values, maximizer) = dense_restricted(ch);
            (values, maximizer, 0.0)
        }
        SpectralMethod::Lanczos => lanczos_restricted(&v, true),
    };
    let lambda2 = values.first().copied().unwrap_or(0.0);
    if lambda2 > 1.0 + 1e-10 {
        return Err(Error::Invariant(format!(
            "λ₂ = {lambda2} exceeds 1 for a unital channel"
        )));
    }
    Ok(SpectralReport {
        lambda2,
        fixed_point_residual,
        offdiag_residual,
        restricted_singular_values: values,
        maximizer,
        method,
        ritz_residual,
    })
}

/// Evaluates the block relations. Diagnostic only: no unitality is
/// required, so broken Kraus sets show up as flagged residuals.
pub fn check_block_structure(ch: &KrausChannel, tol: f64) -> Result<BlockResiduals> {
    require_square(ch)?;
    let v = Vectorized::new(ch);
    let (_, off_block, ev) = fixed_point_residuals(&v);
    let fixed_block = (ev.norm_squared() / v.d - 1.0).abs();
    let (lambda2, top) = match SpectralMethod::auto(ch.d_in()) {
        SpectralMethod::DenseSvd => {
            let d = ch.d_in() as f64;
            let tm = transfer_matrix(ch);
            let fixed = identity_vector(ch.d_in());
            let lambda2 = crate::linalg::op_norm(&restrict(&tm.mat, &fixed, d));
            // E P¹
            let ep1 = &tm.mat - outer(&(&tm.mat * &fixed), &fixed).unscale(d);
            (lambda2, crate::linalg::op_norm(&ep1))
        }
        SpectralMethod::Lanczos => {
            let (restricted, _, _) = lanczos_restricted(&v, true);
            let (full, _, _) = lanczos_restricted(&v, false);
            (restricted[0], full[0])
        }
    };
    let excess = (top * top - lambda2 * lambda2).max(0.0);
    let flagged = excess > tol || fixed_block > tol || off_block > tol;
    Ok(BlockResiduals {
        lambda2,
        excess,
        fixed_block,
        off_block,
        flagged,
    })
}

/// Whether `|λ₂² − C/k| ≤ tol` with `k` the number of Kraus operators.
pub fn is_expander(ch: &KrausChannel, c_const: f64, tol: f64) -> Result<bool> {
    let report = second_singular_value(ch)?;
    Ok((report.lambda2_sq() - c_const / ch.num_kraus() as f64).abs() <= tol)
}

/// `Tr(ρ†ρ)^{1/2}` of `𝓔(ρ)` for an arbitrary operator `ρ`.
pub fn output_frobenius(ch: &KrausChannel, rho: &CMat) -> Result<f64> {
    Ok(ch.apply_operator(rho)?.norm())
}
