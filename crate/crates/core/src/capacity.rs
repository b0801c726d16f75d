//! Upper and lower bounds on the quantum capacity, the fidelity decay
//! above capacity, the codespace dimension bound and the zero-error bound.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{is_unital, KrausChannel, WeightOperator};
use crate::error::{Error, Result};
use crate::linalg::{eigh, eigvalsh, spectrum_entropy_bits, von_neumann_entropy, CMat, DensityMatrix, PureState};
use crate::norms::{g_map_2norm, lemma_value, output_2norm_tensor, AscentOptions};
use crate::seeding::task_stream;
use crate::spectral::{second_singular_value, UNITAL_TOL};

#[derive(Clone, Debug, Serialize)]
pub struct CapacityReport {
    pub upper_bits: f64,
    pub lower_bits: f64,
    pub gap_bits: f64,
    pub upper_method: String,
    pub lower_method: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelityDecay {
    pub beta: f64,
    pub n: usize,
    pub eta_bound: f64,
}

#[derive(Clone, Debug)]
pub struct LsdOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for LsdOptions {
    fn default() -> Self {
        Self { restarts: 16, seed: 0 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CapacityOptions {
    pub lsd: LsdOptions,
    /// Number of copies for the two-norm route; 1 when unset.
    pub n: Option<usize>,
}

/// The two-norm upper bound for `n` copies.
#[derive(Clone, Debug, Serialize)]
pub struct TwoNormUpper {
    pub n: usize,
    /// `log₂(d · B^{1/n})` with `B = (1/d + λ₂²)ⁿ`.
    pub certified_bits: f64,
    /// Same expression with the ascent estimate of `‖𝓔^{⊗n}‖₂`; diagnostic.
    pub estimate_bits: f64,
}

/// `‖G‖₂ · Tr Π²` together with the provenance of the norm.
#[derive(Clone, Debug, Serialize)]
pub struct WeightedNorm {
    pub norm: f64,
    /// True when `norm` is an upper bound rather than an ascent estimate.
    pub certified: bool,
    pub trace_pi_sq: f64,
}

impl WeightedNorm {
    pub fn product(&self) -> f64 {
        self.norm * self.trace_pi_sq
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CodespaceBound {
    pub rhs: f64,
    pub eta: f64,
    pub weighted: WeightedNorm,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroErrorBound {
    pub bits: f64,
    pub n: usize,
    pub weighted: WeightedNorm,
}

fn require_unital(ch: &KrausChannel) -> Result<()> {
    if !ch.is_square() || !is_unital(ch, UNITAL_TOL)? {
        return Err(Error::Precondition("the bound applies to unital channels only".into()));
    }
    Ok(())
}

/// `log₂(1 + d λ₂²)`
pub fn q_upper_unital(ch: &KrausChannel) -> Result<f64> {
    let l2 = second_singular_value(ch)?.lambda2;
    Ok(unital_upper_from(ch.d_in(), l2))
}

pub(crate) fn unital_upper_from(d: usize, lambda2: f64) -> f64 {
    (1.0 + d as f64 * lambda2 * lambda2).log2()
}

fn two_norm_bits(d: usize, b: f64, n: usize) -> f64 {
    (d as f64 * b.powf(1.0 / n as f64)).log2()
}

/// `log₂(d · ‖𝓔^{⊗n}‖₂^{1/n})` with the certified and estimated norm.
pub fn q_upper_2norm(ch: &KrausChannel, n: usize, opts: &AscentOptions) -> Result<TwoNormUpper> {
    require_unital(ch)?;
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let l2 = second_singular_value(ch)?.lambda2;
    let d = ch.d_in();
    let est = output_2norm_tensor(ch, n, opts)?;
    Ok(TwoNormUpper {
        n,
        certified_bits: two_norm_bits(d, lemma_value(d, l2, n), n),
        estimate_bits: two_norm_bits(d, est.value, n),
    })
}

/// `S(B) − S(RB)` for the channel acting on the `A` half of a purification
/// given as a `d_R × d_A` coefficient matrix.
fn coherent_information_from_coefficients(ch: &KrausChannel, m: &CMat) -> Result<f64> {
    let d_r = m.nrows();
    let d_out = ch.d_out();
    let rho_a = m.transpose() * m.conjugate();
    let s_b = von_neumann_entropy(&DensityMatrix::from_trusted(ch.apply_operator(&rho_a)?));
    // (I ⊗ K) Ψ has coefficient matrix M Kᵀ
    let branches: Vec<CMat> = ch.kraus().iter().map(|k| m * k.transpose()).collect();
    let k = branches.len();
    let spectrum = if k <= d_r * d_out {
        let gram = CMat::from_fn(k, k, |a, b| branches[a].dotc(&branches[b]));
        eigvalsh(&gram)
    } else {
        let dim = d_r * d_out;
        let mut omega = CMat::zeros(dim, dim);
        for br in &branches {
            let v = crate::channel::vectorize(br);
            omega.ger(
                crate::linalg::c(1.0, 0.0),
                &v,
                &v.conjugate(),
                crate::linalg::c(1.0, 0.0),
            );
        }
        eigvalsh(&omega)
    };
    let s_rb = spectrum_entropy_bits(&crate::linalg::clamp_spectrum(&spectrum)?);
    Ok(s_b - s_rb)
}

/// Coherent information of `ρ` through the channel, using the spectral
/// purification of `ρ`.
pub fn coherent_information(ch: &KrausChannel, rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != ch.d_in() {
        return Err(Error::Shape(format!(
            "input state has dimension {}, channel expects {}",
            rho.dim(),
            ch.d_in()
        )));
    }
    let eig = eigh(rho.as_matrix());
    let d = rho.dim();
    // Ψ = Σ_i √λ_i |i⟩_R |e_i⟩_A
    let m = CMat::from_fn(d, d, |i, a| eig.vectors[(a, i)] * eig.values[i].max(0.0).sqrt());
    coherent_information_from_coefficients(ch, &m)
}

/// Coherent information for an explicit purification `|Ψ⟩ ∈ R ⊗ A`.
pub fn coherent_information_purified(ch: &KrausChannel, psi: &PureState, d_r: usize) -> Result<f64> {
    let d_a = ch.d_in();
    if psi.dim() != d_r * d_a {
        return Err(Error::Shape(format!(
            "purification has dimension {}, expected {d_r}·{d_a}",
            psi.dim()
        )));
    }
    let v = psi.as_vector();
    let m = CMat::from_fn(d_r, d_a, |r, a| v[r * d_a + a]);
    coherent_information_from_coefficients(ch, &m)
}

/// Best coherent information over `I/d` and random mixed inputs, clamped at 0.
pub fn q_lower_lsd(ch: &KrausChannel, opts: &LsdOptions) -> Result<f64> {
    let d = ch.d_in();
    let mixed = coherent_information(ch, &DensityMatrix::maximally_mixed(d))?;
    let others: Vec<f64> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_stream(opts.seed, r as u64);
            let rho = DensityMatrix::random(d, d, &mut rng);
            coherent_information(ch, &rho)
        })
        .collect::<Result<_>>()?;
    Ok(others.into_iter().fold(mixed, f64::max).max(0.0))
}

/// `η ≤ (1+β)^{−n/4}`
pub fn fidelity_decay(beta: f64, n: usize) -> Result<FidelityDecay> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    Ok(FidelityDecay {
        beta,
        n,
        eta_bound: (1.0 + beta).powf(-(n as f64) / 4.0),
    })
}

/// `‖G_{𝓔^{⊗n},Π}‖₂ · Tr Π²`, certified when `Π ∝ I` and the channel is
/// unital, estimated by ascent otherwise.
pub fn weighted_norm(ch: &KrausChannel, n: usize, pi: &WeightOperator, opts: &AscentOptions) -> Result<WeightedNorm> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let trace_pi_sq = pi.trace_of_square();
    let unital = ch.is_square() && is_unital(ch, UNITAL_TOL)?;
    let expected = ch.d_out().checked_pow(n as u32).unwrap_or(usize::MAX);
    if let (Some(c), true, true) = (pi.as_scalar(), unital, pi.dim() == expected) {
        let l2 = second_singular_value(ch)?.lambda2;
        let norm = lemma_value(ch.d_in(), l2, n).min(1.0) / (c * c);
        return Ok(WeightedNorm {
            norm,
            certified: true,
            trace_pi_sq,
        });
    }
    let est = g_map_2norm(ch, n, pi, opts)?;
    Ok(WeightedNorm {
        norm: est.certified_upper.unwrap_or(est.value),
        certified: est.certified_upper.is_some(),
        trace_pi_sq,
    })
}

/// `(1/η⁴) ‖G_{𝓔^{⊗n},Π}‖₂ Tr Π²`
pub fn codespace_bound_rhs(
    ch: &KrausChannel,
    n: usize,
    pi: &WeightOperator,
    eta: f64,
    opts: &AscentOptions,
) -> Result<CodespaceBound> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Parameter(format!("eta must lie in (0, 1], got {eta}")));
    }
    let weighted = weighted_norm(ch, n, pi, opts)?;
    Ok(CodespaceBound {
        rhs: weighted.product() / eta.powi(4),
        eta,
        weighted,
    })
}

/// `(1/n) log₂(‖G_{𝓔^{⊗n},Π}‖₂ Tr Π²)`
pub fn zero_error_upper(
    ch: &KrausChannel,
    n: usize,
    pi: &WeightOperator,
    opts: &AscentOptions,
) -> Result<ZeroErrorBound> {
    let weighted = weighted_norm(ch, n, pi, opts)?;
    Ok(ZeroErrorBound {
        bits: weighted.product().log2() / n as f64,
        n,
        weighted,
    })
}

/// Tightest applicable upper bound and the coherent-information lower bound.
pub fn capacity_report(ch: &KrausChannel, opts: &CapacityOptions) -> Result<CapacityReport> {
    require_unital(ch)?;
    let n = opts.n.unwrap_or(1).max(1);
    let d = ch.d_in();
    let l2 = second_singular_value(ch)?.lambda2;
    let by_gap = unital_upper_from(d, l2);
    let by_norm = two_norm_bits(d, lemma_value(d, l2, n), n);
    let (upper_bits, upper_method) = if by_gap <= by_norm {
        (by_gap, "second-singular-value".to_string())
    } else {
        (by_norm, format!("two-norm-n{n}"))
    };
    let lower_bits = q_lower_lsd(ch, &opts.lsd)?;
    Ok(CapacityReport {
        upper_bits,
        lower_bits,
        gap_bits: upper_bits - lower_bits,
        upper_method,
        lower_method: "coherent-information".to_string(),
    })
}
