//! Randomized property suites: each trial draws its inputs from a derived
//! stream and checks one inequality or residual bound.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{random_channel, random_operator, random_unitary_mixture, KrausChannel, WeightOperator};
use crate::error::{Error, Result};
use crate::linalg::{eigh, identity, purity, DensityMatrix, DimensionGuard, PureState};
use crate::norms::{lemma_2norm_bound, output_2norm_tensor, purity_of_output, AscentOptions, Dense};
use crate::recovery::{check_lemma3, random_code, Pipeline, RecoveryMap};
use crate::seeding::{derive_seed, stream};
use crate::spectral::check_block_structure;

pub const BK_TOL: f64 = 1e-8;
pub const LEMMA5_TOL: f64 = 1e-8;
pub const OFF_BLOCK_TOL: f64 = 1e-9;
pub const FIXED_BLOCK_TOL: f64 = 1e-10;
pub const PURE_DOMINANCE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Bk,
    Lemma5,
    Lemma3,
    Blocks,
    PureDominance,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Bk,
        Suite::Lemma5,
        Suite::Lemma3,
        Suite::Blocks,
        Suite::PureDominance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Bk => "bk",
            Suite::Lemma5 => "lemma5",
            Suite::Lemma3 => "lemma3",
            Suite::Blocks => "blocks",
            Suite::PureDominance => "pure-dominance",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Bk => 500,
            Suite::Lemma5 => 50,
            Suite::Lemma3 => 20,
            Suite::Blocks => 100,
            Suite::PureDominance => 200,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|suite| suite.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|s| s.as_str()).collect();
            Error::Parameter(format!("unknown suite {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub trials: usize,
    pub seed: u64,
    /// Ascent settings; the seed is replaced per trial.
    pub ascent: AscentOptions,
    /// Monte Carlo fidelity samples per trial of the code-bound suite.
    pub fidelity_trials: usize,
}

impl SuiteConfig {
    pub fn new(suite: Suite, seed: u64) -> Self {
        Self {
            trials: suite.default_trials(),
            seed,
            ascent: AscentOptions {
                restarts: 16,
                ..AscentOptions::default()
            },
            fidelity_trials: 400,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub trial: usize,
    pub seed: u64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub violations: Vec<Violation>,
    /// Smallest slack `bound − value` seen; negative beyond tolerance means
    /// a violation.
    pub worst_margin: f64,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct TrialResult {
    margin: f64,
    violation: Option<String>,
}

fn check(value: f64, bound: f64, tol: f64, what: &str) -> TrialResult {
    let margin = bound - value;
    TrialResult {
        margin,
        violation: (margin < -tol).then(|| format!("{what}: {value:.17e} exceeds {bound:.17e}")),
    }
}

/// Runs `trials` independent trials; trial `t` uses `derive_seed(seed, t)`.
pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    if cfg.trials == 0 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    let results: Vec<(usize, u64, TrialResult)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(cfg.seed, t as u64);
            let r = match suite {
                Suite::Bk => bk_trial(seed),
                Suite::Lemma5 => lemma5_trial(seed, &cfg.ascent),
                Suite::Lemma3 => lemma3_trial(seed, cfg),
                Suite::Blocks => blocks_trial(seed),
                Suite::PureDominance => pure_dominance_trial(seed),
            }?;
            Ok((t, seed, r))
        })
        .collect::<Result<_>>()?;
    let worst_margin = results.iter().map(|(_, _, r)| r.margin).fold(f64::INFINITY, f64::min);
    let violations = results
        .into_iter()
        .filter_map(|(trial, seed, r)| r.violation.map(|detail| Violation { trial, seed, detail }))
        .collect();
    Ok(SuiteOutcome {
        suite,
        trials: cfg.trials,
        seed: cfg.seed,
        violations,
        worst_margin,
    })
}

fn random_full_rank_weight<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<WeightOperator> {
    let g = random_operator(d, d, rng);
    WeightOperator::new(&g * g.adjoint() + identity(d).scale(1e-3))
}

fn bk_trial(seed: u64) -> Result<TrialResult> {
    let mut rng = stream(seed);
    let d = rng.random_range(2..=3);
    let ch = random_channel(d, d, rng.random_range(1..=3), &mut rng)?;
    let rec = RecoveryMap::from_channel(random_channel(d, d, rng.random_range(1..=3), &mut rng)?);
    let pi = random_full_rank_weight(d, &mut rng)?;
    let psi = PureState::random(d, &mut rng);
    let (lhs, rhs) = crate::recovery::verify_bk(&ch, &rec, &pi, &psi)?;
    Ok(check(lhs, rhs, BK_TOL, "F²"))
}

fn lemma5_trial(seed: u64, ascent: &AscentOptions) -> Result<TrialResult> {
    let mut rng = stream(seed);
    let d = rng.random_range(2..=3);
    let k = rng.random_range(2..=4);
    let ch = random_unitary_mixture(d, k, &mut rng)?;
    let opts = AscentOptions {
        seed: derive_seed(seed, 1),
        ..ascent.clone()
    };
    let mut worst: Option<TrialResult> = None;
    for n in 1..=3 {
        let est = output_2norm_tensor(&ch, n, &opts)?.value;
        let bound = lemma_2norm_bound(&ch, n)?;
        let r = check(est, bound, LEMMA5_TOL, &format!("‖𝓔^⊗{n}‖₂ (d={d}, k={k})"));
        if worst.as_ref().map_or(true, |w| r.margin < w.margin) {
            worst = Some(r);
        }
    }
    Ok(worst.expect("three copies checked"))
}

fn lemma3_trial(seed: u64, cfg: &SuiteConfig) -> Result<TrialResult> {
    let mut rng = stream(seed);
    let d = 2;
    let n = rng.random_range(1..=2);
    let d_t = rng.random_range(1..=2);
    let ch = random_unitary_mixture(d, rng.random_range(1..=4), &mut rng)?;
    let total = d.pow(n as u32) * d_t;
    let code = random_code(n, d, d_t, rng.random_range(1..=total), &mut rng)?;
    let d_out = d.pow(n as u32);
    let pi = if rng.random_bool(0.5) {
        WeightOperator::identity(d_out)
    } else {
        random_full_rank_weight(d_out, &mut rng)?
    };
    let guard = DimensionGuard::default();
    let rec = Pipeline::new(&ch, &code, &guard)?.petz()?;
    let opts = AscentOptions {
        seed: derive_seed(seed, 1),
        ..cfg.ascent.clone()
    };
    let v = check_lemma3(&ch, &code, &rec, &pi, cfg.fidelity_trials, derive_seed(seed, 2), &opts)?;
    let mut r = check(v.d_c as f64, v.rhs, 0.0, "d_C");
    if v.rhs.is_infinite() {
        r.margin = f64::INFINITY;
    }
    Ok(r)
}

fn blocks_trial(seed: u64) -> Result<TrialResult> {
    let mut rng = stream(seed);
    let d = rng.random_range(2..=4);
    let ch = random_unitary_mixture(d, rng.random_range(1..=4), &mut rng)?;
    let b = check_block_structure(&ch, OFF_BLOCK_TOL)?;
    let off = check(b.off_block, 0.0, OFF_BLOCK_TOL, "off-block residual");
    let fixed = check(b.fixed_block, 0.0, FIXED_BLOCK_TOL, "fixed-point residual");
    Ok(match (off.violation.is_some(), fixed.violation.is_some()) {
        (_, true) => fixed,
        (true, false) => off,
        _ if off.margin <= fixed.margin => off,
        _ => fixed,
    })
}

fn pure_dominance_trial(seed: u64) -> Result<TrialResult> {
    let mut rng = stream(seed);
    let d = rng.random_range(2..=4);
    let ch: KrausChannel = random_channel(d, d, rng.random_range(1..=4), &mut rng)?;
    let rho = DensityMatrix::random(d, rng.random_range(2..=d), &mut rng);
    let mixed = purity(&ch.apply(&rho)?);
    // the output purity is convex in ρ, so some eigenvector does at least as well
    let eig = eigh(rho.as_matrix());
    let action = Dense(ch.kraus());
    let best_pure = (0..d)
        .map(|i| purity_of_output(&action, &eig.vector(i)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(check(mixed, best_pure, PURE_DOMINANCE_TOL, "mixed-input purity"))
}
