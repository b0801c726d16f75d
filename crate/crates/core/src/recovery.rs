//! Codes with an ancilla register, the noise `𝓔^{⊗n} ⊗ 𝒯`, Petz-type
//! recovery, Monte Carlo average fidelity and numerical checks of the
//! recovery and codespace lemmas.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::weighted_norm;
use crate::channel::{ancilla_reset, p_pi_map, tensor_power, KrausChannel, WeightOperator};
use crate::error::{Error, Result};
use crate::linalg::{
    c, eigh, fidelity_pure, haar_unitary, hermitian_part, isometry_defect, partial_trace, sqrtm_psd, zeros, CMat,
    DensityMatrix, DimensionGuard, PureState, ISOMETRY_TOL,
};
use crate::norms::AscentOptions;
use crate::seeding::task_stream;

/// Rank cutoff, relative to the largest eigenvalue, for the Petz
/// normalization `𝓔(σ)^{-1/2}`.
pub const PETZ_RANK_TOL: f64 = 1e-10;

/// An isometric encoder of a `d_C`-dimensional codespace into
/// `A₁ ⊗ … ⊗ Aₙ ⊗ T`.
#[derive(Clone, Debug)]
pub struct CodeSpec {
    pub n: usize,
    pub d: usize,
    pub d_t: usize,
    pub d_c: usize,
    /// `dⁿ·d_T × d_C`, orthonormal columns.
    pub encoder: CMat,
}

impl CodeSpec {
    pub fn new(n: usize, d: usize, d_t: usize, encoder: CMat) -> Result<Self> {
        if n == 0 || d == 0 || d_t == 0 {
            return Err(Error::Parameter("n, d and d_T must be positive".into()));
        }
        let total = d
            .checked_pow(n as u32)
            .and_then(|v| v.checked_mul(d_t))
            .ok_or_else(|| Error::Parameter("code dimensions overflow".into()))?;
        if encoder.nrows() != total {
            return Err(Error::Shape(format!(
                "encoder has {} rows, expected dⁿ·d_T = {total}",
                encoder.nrows()
            )));
        }
        let d_c = encoder.ncols();
        if d_c == 0 || d_c > total {
            return Err(Error::Parameter(format!(
                "codespace dimension {d_c} must lie in 1..={total}"
            )));
        }
        let defect = isometry_defect(&encoder);
        if defect > ISOMETRY_TOL {
            return Err(Error::Invariant(format!(
                "encoder columns are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Self {
            n,
            d,
            d_t,
            d_c,
            encoder,
        })
    }

    /// `dⁿ·d_T`
    pub fn total_dim(&self) -> usize {
        self.encoder.nrows()
    }

    /// `W ψ₀`
    pub fn encode(&self, psi0: &PureState) -> Result<PureState> {
        if psi0.dim() != self.d_c {
            return Err(Error::Shape(format!(
                "codespace state has dimension {}, code has d_C = {}",
                psi0.dim(),
                self.d_c
            )));
        }
        PureState::normalized(&self.encoder * psi0.as_vector())
    }

    /// `WW†/d_C`
    pub fn average_state(&self) -> DensityMatrix {
        let p = &self.encoder * self.encoder.adjoint();
        DensityMatrix::from_trusted(hermitian_part(&p.unscale(self.d_c as f64)))
    }
}

/// First `d_C` columns of a Haar unitary on `dⁿ·d_T`.
pub fn random_code<R: Rng + ?Sized>(n: usize, d: usize, d_t: usize, d_c: usize, rng: &mut R) -> Result<CodeSpec> {
    let total = d
        .checked_pow(n as u32)
        .and_then(|v| v.checked_mul(d_t))
        .ok_or_else(|| Error::Parameter("code dimensions overflow".into()))?;
    if d_c == 0 || d_c > total {
        return Err(Error::Parameter(format!(
            "codespace dimension {d_c} must lie in 1..={total}"
        )));
    }
    let u = haar_unitary(total, rng);
    CodeSpec::new(n, d, d_t, u.columns(0, d_c).into_owned())
}

/// `𝓔^{⊗n} ⊗ 𝒯` with `𝒯 = |0⟩⟨0|_T ⊗ Tr_T`.
pub fn noise_channel(ch: &KrausChannel, n: usize, d_t: usize, guard: &DimensionGuard) -> Result<KrausChannel> {
    tensor_power(ch, n, guard)?.tensor(&ancilla_reset(d_t), guard)
}

/// Output of the noise on the encoded state `Wψ₀`, on `B₁…Bₙ ⊗ T`.
pub fn apply_noise_to_code(
    ch: &KrausChannel,
    code: &CodeSpec,
    psi0: &PureState,
    guard: &DimensionGuard,
) -> Result<DensityMatrix> {
    check_code_matches(ch, code)?;
    let noise = noise_channel(ch, code.n, code.d_t, guard)?;
    noise.apply(&code.encode(psi0)?.density())
}

fn check_code_matches(ch: &KrausChannel, code: &CodeSpec) -> Result<()> {
    if ch.d_in() != code.d {
        return Err(Error::Shape(format!(
            "channel input dimension {} differs from the code's d = {}",
            ch.d_in(),
            code.d
        )));
    }
    Ok(())
}

/// A recovery channel from `B₁…Bₙ T` back to `A₁…Aₙ T`.
#[derive(Clone, Debug)]
pub struct RecoveryMap {
    pub channel: KrausChannel,
}

impl RecoveryMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            channel: KrausChannel::identity(dim),
        }
    }

    pub fn from_channel(channel: KrausChannel) -> Self {
        Self { channel }
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.channel.apply(rho)
    }
}

/// The reference state `𝒯(WW†/d_C)` on `A₁…Aₙ ⊗ T`.
pub fn default_reference_state(code: &CodeSpec) -> DensityMatrix {
    let avg = code.average_state();
    let dims = [code.d.pow(code.n as u32), code.d_t];
    let a_part = partial_trace(avg.as_matrix(), &dims, &[0]).expect("dims multiply to the encoder rows");
    let mut zero = zeros(code.d_t, code.d_t);
    zero[(0, 0)] = c(1.0, 0.0);
    DensityMatrix::from_trusted(crate::linalg::kron(&a_part, &zero))
}

/// Petz map `ρ ↦ σ^{1/2} 𝓔†(N^{-1/2} ρ N^{-1/2}) σ^{1/2}` with `N = 𝓔(σ)`,
/// completed off the support of `N` by sending it to `|0⟩⟨0|`.
pub fn petz_recovery(noise: &KrausChannel, sigma: &DensityMatrix) -> Result<RecoveryMap> {
    if sigma.dim() != noise.d_in() {
        return Err(Error::Parameter(format!(
            "reference state has dimension {}, channel input is {}",
            sigma.dim(),
            noise.d_in()
        )));
    }
    let sqrt_sigma = sqrtm_psd(sigma.as_matrix())?;
    let image = noise.apply_operator(sigma.as_matrix())?;
    let eig = eigh(&image);
    let cutoff = PETZ_RANK_TOL * eig.max().max(0.0);
    let inv_sqrt = eig.map(|v| if v > cutoff { 1.0 / v.sqrt() } else { 0.0 });
    let mut kraus: Vec<CMat> = noise
        .kraus()
        .iter()
        .map(|e| &sqrt_sigma * e.adjoint() * &inv_sqrt)
        .collect();

    // Σ R†R is the support projector of N up to round-off; renormalize on
    // that support and send the complement to |0⟩
    let mut q = zeros(noise.d_out(), noise.d_out());
    for r in &kraus {
        q += r.adjoint() * r;
    }
    let q_eig = eigh(&q);
    let fix = q_eig.map(|v| if v > 0.5 { 1.0 / v.sqrt() } else { 0.0 });
    for r in kraus.iter_mut() {
        *r = &*r * &fix;
    }
    for (i, &v) in q_eig.values.iter().enumerate() {
        if v <= 0.5 {
            let b = q_eig.vector(i);
            let mut sink = zeros(noise.d_in(), noise.d_out());
            for j in 0..noise.d_out() {
                sink[(0, j)] = b[j].conj();
            }
            kraus.push(sink);
        }
    }
    Ok(RecoveryMap {
        channel: KrausChannel::new(noise.d_out(), noise.d_in(), kraus)?,
    })
}

/// The unnormalized adjoint `ρ ↦ 𝓔†(ρ)` rescaled to be trace preserving
/// where possible; a baseline for recovery comparisons.
pub fn adjoint_recovery(noise: &KrausChannel) -> Result<RecoveryMap> {
    petz_recovery(noise, &DensityMatrix::maximally_mixed(noise.d_in()))
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelityEstimate {
    pub eta_hat: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

impl FidelityEstimate {
    /// `max(η̂ − 3·stderr, 0)`
    pub fn lower(&self) -> f64 {
        (self.eta_hat - 3.0 * self.stderr).max(0.0)
    }
}

fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Noise, code and recovery assembled once for repeated evaluation.
pub struct Pipeline<'a> {
    pub code: &'a CodeSpec,
    pub noise: KrausChannel,
}

impl<'a> Pipeline<'a> {
    pub fn new(ch: &KrausChannel, code: &'a CodeSpec, guard: &DimensionGuard) -> Result<Self> {
        check_code_matches(ch, code)?;
        Ok(Self {
            code,
            noise: noise_channel(ch, code.n, code.d_t, guard)?,
        })
    }

    pub fn petz(&self) -> Result<RecoveryMap> {
        petz_recovery(&self.noise, &default_reference_state(self.code))
    }

    fn check_recovery(&self, rec: &RecoveryMap) -> Result<()> {
        let dim = self.code.total_dim();
        if rec.channel.d_in() != self.noise.d_out() || rec.channel.d_out() != dim {
            return Err(Error::Shape(format!(
                "recovery maps {} -> {}, expected {} -> {dim}",
                rec.channel.d_in(),
                rec.channel.d_out(),
                self.noise.d_out()
            )));
        }
        Ok(())
    }

    /// `F(Wψ₀, ℛ((𝓔^{⊗n} ⊗ 𝒯)(Wψ₀)))`
    pub fn fidelity(&self, rec: &RecoveryMap, psi0: &PureState) -> Result<f64> {
        let psi = self.code.encode(psi0)?;
        let out = rec.apply(&self.noise.apply(&psi.density())?)?;
        Ok(fidelity_pure(&psi, out.as_matrix()))
    }

    pub fn average_fidelity(&self, rec: &RecoveryMap, trials: usize, seed: u64) -> Result<FidelityEstimate> {
        if trials == 0 {
            return Err(Error::Parameter("need at least one trial".into()));
        }
        self.check_recovery(rec)?;
        let samples: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = task_stream(seed, t as u64);
                let psi0 = PureState::random(self.code.d_c, &mut rng);
                self.fidelity(rec, &psi0)
            })
            .collect::<Result<_>>()?;
        let (eta_hat, stderr) = mean_and_stderr(&samples);
        Ok(FidelityEstimate {
            eta_hat,
            stderr,
            trials,
            seed,
        })
    }
}

/// Monte Carlo average of `F(ψ, ℛ(𝒯 ⊗ 𝓔^{⊗n}(ψ)))` over Haar `ψ` in the
/// codespace.
pub fn average_fidelity(
    ch: &KrausChannel,
    code: &CodeSpec,
    rec: &RecoveryMap,
    trials: usize,
    seed: u64,
    guard: &DimensionGuard,
) -> Result<FidelityEstimate> {
    Pipeline::new(ch, code, guard)?.average_fidelity(rec, trials, seed)
}

/// Both sides of `F²(ψ, ℛ(𝓔(ψ))) ≤ √(⟨ψ|𝒫_Π(𝓔(ψ))|ψ⟩ ⟨ψ|ℛ(Π²)|ψ⟩)`.
pub fn verify_bk(ch: &KrausChannel, rec: &RecoveryMap, pi: &WeightOperator, psi: &PureState) -> Result<(f64, f64)> {
    if rec.channel.d_in() != ch.d_out() || rec.channel.d_out() != ch.d_in() || psi.dim() != ch.d_in() {
        return Err(Error::Shape("channel, recovery and state dimensions disagree".into()));
    }
    let out = ch.apply(&psi.density())?;
    let lhs = psi.expectation(rec.apply(&out)?.as_matrix()).re;
    let p = p_pi_map(ch, pi, out.as_matrix()).map_err(|e| match e {
        Error::Support { leak, tol } => Error::Precondition(format!(
            "Π is not supported on the channel output (relative leak {leak:.3e}, tolerance {tol:.1e})"
        )),
        other => other,
    })?;
    let pi_sq = pi.matrix() * pi.matrix();
    let a = psi.expectation(&p).re.max(0.0);
    let b = psi.expectation(&rec.channel.apply_operator(&pi_sq)?).re.max(0.0);
    Ok((lhs, (a * b).sqrt()))
}

#[derive(Clone, Debug, Serialize)]
pub struct CodespaceVerdict {
    pub d_c: usize,
    pub eta: FidelityEstimate,
    /// `η̂ − 3·stderr`, floored at zero.
    pub eta_low: f64,
    pub norm: f64,
    pub norm_certified: bool,
    pub trace_pi_sq: f64,
    /// `‖G‖₂ Tr Π² / η_low⁴`; infinite when `η_low = 0`.
    pub rhs: f64,
    pub pass: bool,
}

/// Checks `d_C ≤ ‖G_{𝓔^{⊗n},Π}‖₂ Tr Π² / η⁴` with the fidelity lowered by
/// three standard errors.
pub fn check_lemma3(
    ch: &KrausChannel,
    code: &CodeSpec,
    rec: &RecoveryMap,
    pi: &WeightOperator,
    trials: usize,
    seed: u64,
    opts: &AscentOptions,
) -> Result<CodespaceVerdict> {
    let eta = average_fidelity(ch, code, rec, trials, seed, &opts.guard)?;
    let weighted = weighted_norm(ch, code.n, pi, opts)?;
    let eta_low = eta.lower();
    let rhs = if eta_low > 0.0 {
        weighted.product() / eta_low.powi(4)
    } else {
        f64::INFINITY
    };
    Ok(CodespaceVerdict {
        d_c: code.d_c,
        eta_low,
        eta,
        norm: weighted.norm,
        norm_certified: weighted.certified,
        trace_pi_sq: weighted.trace_pi_sq,
        rhs,
        pass: code.d_c as f64 <= rhs,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayVerdict {
    pub beta: f64,
    /// `dⁿ · ‖𝓔^{⊗n}‖₂ · (1+β)ⁿ` with the certified norm.
    pub threshold: f64,
    /// Whether `d_C` exceeds the threshold, so the decay bound applies.
    pub applies: bool,
    pub eta: FidelityEstimate,
    /// `(η̂ − 3·stderr)⁴`
    pub eta4_low: f64,
    /// `(1+β)^{−n}`
    pub bound: f64,
    pub pass: bool,
}

/// Above the threshold `dⁿ‖𝓔^{⊗n}‖₂(1+β)ⁿ` the fidelity obeys
/// `η⁴ ≤ (1+β)^{−n}`.
pub fn check_fidelity_decay(
    ch: &KrausChannel,
    code: &CodeSpec,
    rec: &RecoveryMap,
    beta: f64,
    trials: usize,
    seed: u64,
    opts: &AscentOptions,
) -> Result<DecayVerdict> {
    let decay = crate::capacity::fidelity_decay(beta, code.n)?;
    let d_out_n = ch.d_out().pow(code.n as u32);
    let weighted = weighted_norm(ch, code.n, &WeightOperator::identity(d_out_n), opts)?;
    let threshold = weighted.product() * (1.0 + beta).powi(code.n as i32);
    let eta = average_fidelity(ch, code, rec, trials, seed, &opts.guard)?;
    let eta4_low = eta.lower().powi(4);
    let bound = decay.eta_bound.powi(4);
    let applies = code.d_c as f64 > threshold;
    Ok(DecayVerdict {
        beta,
        threshold,
        applies,
        pass: !applies || eta4_low <= bound,
        eta,
        eta4_low,
        bound,
    })
}
