//! Random mixed-unitary expanders: sampling, spectral constants, capacity
//! gaps and ensemble statistics.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::coherent_information;
use crate::channel::{is_unital, KrausChannel};
use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::linalg::{haar_unitary, CMat, DensityMatrix};
use crate::norms::{multiplicativity_report, output_2norm, AscentOptions, MultiplicativityReport};
use crate::seeding::{derive_seed, stream};
use crate::spectral::{second_singular_value, UNITAL_TOL};

pub const CSV_HEADER: [&str; 10] = [
    "seed",
    "d",
    "k",
    "lambda2_sq",
    "c_hat",
    "q_upper_bits",
    "q_lower_bits",
    "norm2_est",
    "norm2_cert_upper",
    "alpha_hat",
];

#[derive(Clone, Debug, Serialize)]
pub struct ExpanderSample {
    pub seed: Option<u64>,
    pub d: usize,
    pub k: usize,
    pub lambda2_sq: f64,
    /// `k·λ₂²`
    pub c_hat: f64,
    /// `log₂ d − log₂ k + log₂(ĉ + k/d)`, floored at zero.
    pub q_upper: f64,
    /// `log₂ d − log₂ k`, floored at zero.
    pub q_lower: f64,
    /// `log₂(ĉ + k/d)`
    pub gap: f64,
    /// Coherent information at `I/d`.
    pub q_lower_coherent: f64,
    pub norm2_est: Option<f64>,
    /// `1/d + ĉ/k`
    pub norm2_cert_upper: f64,
    pub alpha_hat: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SampleOptions {
    pub ascent: AscentOptions,
    /// Estimate `‖𝓔‖₂` by ascent.
    pub norm: bool,
    /// Number of copies for the multiplicativity exponent, if any.
    pub n: Option<usize>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            ascent: AscentOptions::default(),
            norm: true,
            n: None,
        }
    }
}

fn check_expander_params(d: usize, k: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Parameter(format!("d = {d} must be at least 2")));
    }
    if k < 2 || k % 2 != 0 {
        return Err(Error::Parameter(format!("k = {k} must be even and at least 2")));
    }
    Ok(())
}

/// `𝓔(ρ) = (1/k) Σᵢ (UᵢρUᵢ† + Uᵢ†ρUᵢ)` for the given `k/2` unitaries.
pub fn expander_from_unitaries(unitaries: &[CMat]) -> Result<KrausChannel> {
    let Some(first) = unitaries.first() else {
        return Err(Error::Parameter("need at least one unitary".into()));
    };
    let d = first.nrows();
    let k = 2 * unitaries.len();
    let scale = 1.0 / (k as f64).sqrt();
    let kraus = unitaries
        .iter()
        .flat_map(|u| [u.scale(scale), u.adjoint().scale(scale)])
        .collect();
    KrausChannel::new(d, d, kraus)
}

/// Draws `k/2` Haar unitaries and forms the self-adjoint mixture.
pub fn random_expander<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<KrausChannel> {
    check_expander_params(d, k)?;
    let unitaries: Vec<CMat> = (0..k / 2).map(|_| haar_unitary(d, rng)).collect();
    expander_from_unitaries(&unitaries)
}

/// A random expander from `seed` together with its spectral and capacity
/// figures. The ascent runs on the stream derived from `(seed, 1)`.
pub fn sample_hastings(d: usize, k: usize, seed: u64, opts: &SampleOptions) -> Result<(KrausChannel, ExpanderSample)> {
    let ch = random_expander(d, k, &mut stream(seed))?;
    let opts = SampleOptions {
        ascent: AscentOptions {
            seed: derive_seed(seed, 1),
            ..opts.ascent.clone()
        },
        ..opts.clone()
    };
    let mut sample = analyze(&ch, &opts)?;
    sample.seed = Some(seed);
    Ok((ch, sample))
}

/// Expander constant and capacity bounds of a unital channel.
pub fn expander_capacity_report(ch: &KrausChannel, opts: &SampleOptions) -> Result<ExpanderSample> {
    analyze(ch, opts)
}

fn analyze(ch: &KrausChannel, opts: &SampleOptions) -> Result<ExpanderSample> {
    if !ch.is_square() || !is_unital(ch, UNITAL_TOL)? {
        return Err(Error::Precondition("expander figures need a unital channel".into()));
    }
    let d = ch.d_in();
    let k = ch.num_kraus();
    let lambda2 = second_singular_value(ch)?.lambda2;
    let lambda2_sq = lambda2 * lambda2;
    let c_hat = k as f64 * lambda2_sq;
    let (df, kf) = (d as f64, k as f64);
    let gap = (c_hat + kf / df).log2();
    let base = df.log2() - kf.log2();
    let q_lower_coherent = coherent_information(ch, &DensityMatrix::maximally_mixed(d))?;
    let norm2_est = if opts.norm {
        Some(output_2norm(ch, &opts.ascent)?.value)
    } else {
        None
    };
    let alpha_hat = match opts.n {
        Some(n) => match multiplicativity_report(ch, n, &opts.ascent) {
            Ok(r) => Some(r.alpha_hat),
            Err(Error::ExponentUndefined(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(ExpanderSample {
        seed: None,
        d,
        k,
        lambda2_sq,
        c_hat,
        q_upper: (base + gap).max(0.0),
        q_lower: base.max(0.0),
        gap,
        q_lower_coherent,
        norm2_est,
        norm2_cert_upper: 1.0 / df + c_hat / kf,
        alpha_hat,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics (type 7).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            min: quantile(&v, 0.0),
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            max: quantile(&v, 1.0),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleReport {
    pub seed: u64,
    pub d: usize,
    pub k: usize,
    pub eps: f64,
    pub samples: Vec<ExpanderSample>,
    /// `(4+4ε)/k`
    pub threshold: f64,
    pub fraction_within: f64,
    /// `(4+5ε)/k`
    pub threshold_loose: f64,
    pub fraction_within_loose: f64,
    pub c_hat_quantiles: Quantiles,
    /// `1 − e^{−ε d^{2/15}}`; a label, never asserted.
    pub tail_probability_label: f64,
}

/// `trials` independent samples, trial `t` drawn from `derive_seed(seed, t)`.
pub fn ensemble_survey(
    d: usize,
    k: usize,
    trials: usize,
    eps: f64,
    seed: u64,
    opts: &SampleOptions,
) -> Result<EnsembleReport> {
    check_expander_params(d, k)?;
    if trials == 0 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Parameter(format!("eps = {eps} must be positive")));
    }
    let samples: Vec<ExpanderSample> = (0..trials)
        .into_par_iter()
        .map(|t| sample_hastings(d, k, derive_seed(seed, t as u64), opts).map(|(_, s)| s))
        .collect::<Result<_>>()?;
    let kf = k as f64;
    let threshold = (4.0 + 4.0 * eps) / kf;
    let threshold_loose = (4.0 + 5.0 * eps) / kf;
    let within = |t: f64| samples.iter().filter(|s| s.lambda2_sq <= t).count() as f64 / trials as f64;
    let c_hats: Vec<f64> = samples.iter().map(|s| s.c_hat).collect();
    Ok(EnsembleReport {
        seed,
        d,
        k,
        eps,
        threshold,
        fraction_within: within(threshold),
        threshold_loose,
        fraction_within_loose: within(threshold_loose),
        c_hat_quantiles: Quantiles::of(&c_hats),
        tail_probability_label: 1.0 - (-eps * (d as f64).powf(2.0 / 15.0)).exp(),
        samples,
    })
}

fn opt_field(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

/// One header row, then one row per sample; absent values are empty fields.
pub fn write_csv<W: Write>(samples: &[ExpanderSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in samples {
        w.write_record([
            s.seed.map(|v| v.to_string()).unwrap_or_default(),
            s.d.to_string(),
            s.k.to_string(),
            format_f64(s.lambda2_sq),
            format_f64(s.c_hat),
            format_f64(s.q_upper),
            format_f64(s.q_lower),
            opt_field(s.norm2_est),
            format_f64(s.norm2_cert_upper),
            opt_field(s.alpha_hat),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentVerdict {
    pub exponent: f64,
    /// `‖𝓔^{⊗n}‖₂ ≤ ‖𝓔‖₂^{n·exponent}` on the estimates, i.e. `α̂ ≥ exponent`.
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplicativitySurvey {
    pub report: MultiplicativityReport,
    pub plus: ExponentVerdict,
    pub minus: ExponentVerdict,
}

/// Multiplicativity exponent checked against `1 ± 4/log₂ k`.
pub fn multiplicativity_survey(ch: &KrausChannel, n: usize, opts: &AscentOptions) -> Result<MultiplicativitySurvey> {
    let report = multiplicativity_report(ch, n, opts)?;
    let shift = 4.0 / (ch.num_kraus() as f64).log2();
    let verdict = |exponent: f64| ExponentVerdict {
        exponent,
        holds: report.alpha_hat >= exponent,
    };
    Ok(MultiplicativitySurvey {
        plus: verdict(1.0 + shift),
        minus: verdict(1.0 - shift),
        report,
    })
}
