//! Maximum output purity of channels and tensor powers by restarted
//! fixed-point ascent, with certified upper bounds for unital channels.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{is_unital, KrausChannel, WeightOperator};
use crate::error::{Error, Result};
use crate::linalg::{c, checked_pow, identity, kron, CMat, CVec, DimensionGuard, PureState, C64};
use crate::seeding::task_stream;
use crate::spectral::{second_singular_value, UNITAL_TOL};

#[derive(Clone, Debug)]
pub struct AscentOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub guard: DimensionGuard,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iter: 500,
            tol: 1e-12,
            seed: 0,
            guard: DimensionGuard::default(),
        }
    }
}

impl AscentOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iter == 0 {
            return Err(Error::Parameter(
                "ascent needs at least one restart and one iteration".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!(
                "ascent tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormEstimate {
    /// Best objective value found; a lower bound on the true maximum.
    pub value: f64,
    #[serde(skip)]
    pub maximizer: PureState,
    pub restarts: usize,
    /// Iteration budget per restart.
    pub iterations_per_restart: usize,
    /// Whether the restart that produced `value` met the tolerance.
    pub converged: bool,
    /// Upper bound from the second singular value when available.
    pub certified_upper: Option<f64>,
    /// Final value of each restart, in restart order.
    pub restart_values: Vec<f64>,
    /// Iterations used by each restart.
    pub restart_iterations: Vec<usize>,
}

impl NormEstimate {
    /// Running maximum over restarts; never decreasing.
    pub fn running_best(&self) -> Vec<f64> {
        self.restart_values
            .iter()
            .scan(f64::NEG_INFINITY, |best, &v| {
                *best = best.max(v);
                Some(*best)
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplicativityReport {
    pub n: usize,
    pub norm1: NormEstimate,
    pub norm_n: NormEstimate,
    pub alpha_hat: f64,
    /// `α ≥ alpha_cert` holds whenever this is present.
    pub alpha_cert: Option<f64>,
}

/// Linear action of a Kraus family `{K_a}` on vectors.
pub(crate) trait KrausAction: Sync {
    fn d_in(&self) -> usize;
    /// `K_a ψ` for every `a`.
    fn apply_all(&self, psi: &CVec) -> Vec<CVec>;
    /// `Σ_a K_a† v_a`
    fn adjoint_sum(&self, vs: &[CVec]) -> CVec;
}

pub(crate) struct Dense<'a>(pub &'a [CMat]);

impl KrausAction for Dense<'_> {
    fn d_in(&self) -> usize {
        self.0[0].ncols()
    }

    fn apply_all(&self, psi: &CVec) -> Vec<CVec> {
        self.0.iter().map(|k| k * psi).collect()
    }

    fn adjoint_sum(&self, vs: &[CVec]) -> CVec {
        let mut out = CVec::zeros(self.d_in());
        for (k, v) in self.0.iter().zip(vs) {
            out.gemv_ad(c(1.0, 0.0), k, v, c(1.0, 0.0));
        }
        out
    }
}

/// `op` acting on one tensor factor of a vector laid out as
/// `left × in × right`.
fn apply_site(op: &CMat, x: &CVec, left: usize, right: usize) -> CVec {
    let (d_out, d_in) = op.shape();
    let mut out = CVec::zeros(left * d_out * right);
    for l in 0..left {
        let src = l * d_in * right;
        let dst = l * d_out * right;
        for o in 0..d_out {
            let row = &mut out.as_mut_slice()[dst + o * right..dst + (o + 1) * right];
            for i in 0..d_in {
                let a = op[(o, i)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let col = &x.as_slice()[src + i * right..src + (i + 1) * right];
                for (y, &v) in row.iter_mut().zip(col) {
                    *y += a * v;
                }
            }
        }
    }
    out
}

/// The `n`-fold tensor power of a Kraus family, applied site by site
/// without materializing the `kⁿ` product operators.
pub(crate) struct ProductKraus<'a> {
    kraus: &'a [CMat],
    adjoints: Vec<CMat>,
    n: usize,
}

impl<'a> ProductKraus<'a> {
    pub(crate) fn new(kraus: &'a [CMat], n: usize) -> Self {
        Self {
            kraus,
            adjoints: kraus.iter().map(|k| k.adjoint()).collect(),
            n,
        }
    }

    fn din(&self) -> usize {
        self.kraus[0].ncols()
    }

    fn dout(&self) -> usize {
        self.kraus[0].nrows()
    }
}

impl KrausAction for ProductKraus<'_> {
    fn d_in(&self) -> usize {
        self.din().pow(self.n as u32)
    }

    fn apply_all(&self, psi: &CVec) -> Vec<CVec> {
        // site s sees left = d_out^s and right = d_in^(n-s-1)
        let mut layer = vec![psi.clone()];
        for s in 0..self.n {
            let left = self.dout().pow(s as u32);
            let right = self.din().pow((self.n - s - 1) as u32);
            layer = layer
                .iter()
                .flat_map(|x| self.kraus.iter().map(move |k| apply_site(k, x, left, right)))
                .collect();
        }
        layer
    }

    fn adjoint_sum(&self, vs: &[CVec]) -> CVec {
        let k = self.kraus.len();
        let mut layer: Vec<CVec> = vs.to_vec();
        for s in (0..self.n).rev() {
            let left = self.dout().pow(s as u32);
            let right = self.din().pow((self.n - s - 1) as u32);
            layer = layer
                .chunks(k)
                .map(|group| {
                    let mut acc = apply_site(&self.adjoints[0], &group[0], left, right);
                    for (adj, v) in self.adjoints.iter().zip(group).skip(1) {
                        acc += apply_site(adj, v, left, right);
                    }
                    acc
                })
                .collect();
        }
        layer.pop().expect("one vector remains")
    }
}

/// `{S K_a}` for a Hermitian `S` applied after an inner action.
pub(crate) struct Sandwich<'a, A: KrausAction> {
    inner: &'a A,
    left: Option<CMat>,
}

impl<A: KrausAction> KrausAction for Sandwich<'_, A> {
    fn d_in(&self) -> usize {
        self.inner.d_in()
    }

    fn apply_all(&self, psi: &CVec) -> Vec<CVec> {
        let out = self.inner.apply_all(psi);
        match &self.left {
            Some(s) => out.iter().map(|w| s * w).collect(),
            None => out,
        }
    }

    fn adjoint_sum(&self, vs: &[CVec]) -> CVec {
        match &self.left {
            Some(s) => {
                let scaled: Vec<CVec> = vs.iter().map(|v| s * v).collect();
                self.inner.adjoint_sum(&scaled)
            }
            None => self.inner.adjoint_sum(vs),
        }
    }
}

/// Objective `Tr(Σ_a w_a w_a†)²` and the vectors `v_a = ω w_a`.
fn objective(ws: &[CVec]) -> (f64, Vec<CVec>) {
    let k = ws.len();
    let dim = ws[0].len();
    if k <= dim {
        let mut gram = CMat::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let g = ws[a].dotc(&ws[b]);
                gram[(a, b)] = g;
                gram[(b, a)] = g.conj();
            }
        }
        let value = gram.iter().map(|g| g.norm_sqr()).sum();
        let vs = (0..k)
            .map(|a| {
                let mut v = CVec::zeros(dim);
                for b in 0..k {
                    v.axpy(gram[(b, a)], &ws[b], c(1.0, 0.0));
                }
                v
            })
            .collect();
        (value, vs)
    } else {
        let mut omega = CMat::zeros(dim, dim);
        for w in ws {
            omega.ger(c(1.0, 0.0), w, &w.conjugate(), c(1.0, 0.0));
        }
        let value = omega.iter().map(|g| g.norm_sqr()).sum();
        let vs = ws.iter().map(|w| &omega * w).collect();
        (value, vs)
    }
}

/// Output purity `Tr(𝓔(ψψ†)²)` for a pure input.
pub(crate) fn purity_of_output<A: KrausAction>(action: &A, psi: &CVec) -> f64 {
    objective(&action.apply_all(psi)).0
}

struct RestartOutcome {
    value: f64,
    psi: CVec,
    iterations: usize,
    converged: bool,
}

fn ascend<A: KrausAction>(action: &A, start: CVec, max_iter: usize, tol: f64) -> RestartOutcome {
    let mut psi = start;
    let mut best = (f64::NEG_INFINITY, psi.clone());
    let mut prev = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let (value, vs) = objective(&action.apply_all(&psi));
        if value > best.0 {
            best = (value, psi.clone());
        }
        if (value - prev).abs() <= tol {
            converged = true;
            break;
        }
        prev = value;
        let g = action.adjoint_sum(&vs);
        let norm = g.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            break;
        }
        psi = g.unscale(norm);
    }
    RestartOutcome {
        value: best.0,
        psi: best.1,
        iterations,
        converged,
    }
}

fn run_restarts<A: KrausAction>(
    action: &A,
    warm: Vec<CVec>,
    opts: &AscentOptions,
    certified_upper: Option<f64>,
) -> Result<NormEstimate> {
    opts.validate()?;
    let dim = action.d_in();
    let warm_count = warm.len().min(opts.restarts);
    let outcomes: Vec<RestartOutcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r < warm_count {
                warm[r].clone()
            } else {
                let mut rng = task_stream(opts.seed, r as u64);
                PureState::random(dim, &mut rng).into_vector()
            };
            ascend(action, start, opts.max_iter, opts.tol)
        })
        .collect();
    let mut best_index = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.value > outcomes[best_index].value {
            best_index = i;
        }
    }
    let best = &outcomes[best_index];
    let maximizer = PureState::normalized(best.psi.clone())?;
    let est = NormEstimate {
        value: best.value,
        maximizer,
        restarts: opts.restarts,
        iterations_per_restart: opts.max_iter,
        converged: best.converged,
        certified_upper,
        restart_values: outcomes.iter().map(|o| o.value).collect(),
        restart_iterations: outcomes.iter().map(|o| o.iterations).collect(),
    };
    debug_assert!(est.running_best().windows(2).all(|w| w[1] >= w[0]));
    Ok(est)
}

/// `(1/d + λ₂²)ⁿ` for a unital channel.
pub fn lemma_2norm_bound(ch: &KrausChannel, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let report = second_singular_value(ch)?;
    Ok(lemma_value(ch.d_in(), report.lambda2, n))
}

pub(crate) fn lemma_value(d: usize, lambda2: f64, n: usize) -> f64 {
    (1.0 / d as f64 + lambda2 * lambda2).powi(n as i32)
}

fn certified_for(ch: &KrausChannel, n: usize) -> Result<Option<f64>> {
    if ch.is_square() && is_unital(ch, UNITAL_TOL)? {
        Ok(Some(lemma_2norm_bound(ch, n)?.min(1.0)))
    } else {
        Ok(None)
    }
}

/// `‖𝓔‖₂ = max_ψ Tr(𝓔(ψψ†)²)`
pub fn output_2norm(ch: &KrausChannel, opts: &AscentOptions) -> Result<NormEstimate> {
    let cert = certified_for(ch, 1)?;
    run_restarts(&Dense(ch.kraus()), Vec::new(), opts, cert)
}

fn check_power_dims(ch: &KrausChannel, n: usize, guard: &DimensionGuard) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    guard.check_dim("tensor power input", checked_pow(ch.d_in(), n).unwrap_or(usize::MAX))?;
    guard.check_dim("tensor power output", checked_pow(ch.d_out(), n).unwrap_or(usize::MAX))?;
    Ok(())
}

fn product_warm_start(single: &PureState, n: usize) -> CVec {
    let mut v = single.as_vector().clone();
    for _ in 1..n {
        v = crate::linalg::kron_vec(&v, single.as_vector());
    }
    v
}

/// `‖𝓔^{⊗n}‖₂`, seeded with the product of the single-copy maximizer.
pub fn output_2norm_tensor(ch: &KrausChannel, n: usize, opts: &AscentOptions) -> Result<NormEstimate> {
    check_power_dims(ch, n, &opts.guard)?;
    let single = output_2norm(ch, opts)?;
    tensor_from_single(ch, n, opts, &single)
}

fn tensor_from_single(
    ch: &KrausChannel,
    n: usize,
    opts: &AscentOptions,
    single: &NormEstimate,
) -> Result<NormEstimate> {
    if n == 1 {
        return Ok(single.clone());
    }
    let cert = certified_for(ch, n)?;
    let action = ProductKraus::new(ch.kraus(), n);
    let warm = vec![product_warm_start(&single.maximizer, n)];
    run_restarts(&action, warm, opts, cert)
}

/// `𝓔^{⊗n}(I)` computed factor by factor.
fn power_of_identity_image(ch: &KrausChannel, n: usize) -> CMat {
    let single = ch
        .apply_operator(&identity(ch.d_in()))
        .expect("input dimension matches");
    let mut out = single.clone();
    for _ in 1..n {
        out = kron(&out, &single);
    }
    out
}

/// `‖G_{𝓔^{⊗n},Π}‖₂ = max_ψ Tr(G(ψψ†)²)` with `G = Π^{-1/2} 𝓔^{⊗n}(·) Π^{-1/2}`.
pub fn g_map_2norm(ch: &KrausChannel, n: usize, pi: &WeightOperator, opts: &AscentOptions) -> Result<NormEstimate> {
    check_power_dims(ch, n, &opts.guard)?;
    let d_out = ch.d_out().pow(n as u32);
    if pi.dim() != d_out {
        return Err(Error::Shape(format!(
            "weight operator acts on dimension {}, the output of 𝓔^⊗{n} has dimension {d_out}",
            pi.dim()
        )));
    }
    pi.ensure_supports(&power_of_identity_image(ch, n))?;

    let single = output_2norm(ch, opts)?;
    let scalar = pi.as_scalar();
    let left = match scalar {
        Some(1.0) => None,
        Some(s) => Some(identity(d_out).scale(1.0 / s.sqrt())),
        None => Some(pi.pseudo_inverse_sqrt().clone()),
    };
    let cert = match (scalar, certified_for(ch, n)?) {
        (Some(s), Some(b)) => Some(b / (s * s)),
        _ => None,
    };
    let warm = vec![product_warm_start(&single.maximizer, n)];
    if n == 1 {
        let inner = Dense(ch.kraus());
        run_restarts(
            &Sandwich { inner: &inner, left },
            warm_for_single(&single, scalar),
            opts,
            cert,
        )
    } else {
        let inner = ProductKraus::new(ch.kraus(), n);
        run_restarts(&Sandwich { inner: &inner, left }, warm, opts, cert)
    }
}

// for n = 1 and Π = I the estimate must coincide with `output_2norm`
fn warm_for_single(single: &NormEstimate, scalar: Option<f64>) -> Vec<CVec> {
    match scalar {
        Some(_) => Vec::new(),
        None => vec![single.maximizer.as_vector().clone()],
    }
}

/// Estimated and certified multiplicativity exponents for `n` copies.
pub fn multiplicativity_report(ch: &KrausChannel, n: usize, opts: &AscentOptions) -> Result<MultiplicativityReport> {
    check_power_dims(ch, n, &opts.guard)?;
    let norm1 = output_2norm(ch, opts)?;
    if norm1.value >= 1.0 - 1e-9 {
        return Err(Error::ExponentUndefined(norm1.value));
    }
    let norm_n = tensor_from_single(ch, n, opts, &norm1)?;
    let denom = n as f64 * norm1.value.ln();
    let alpha_hat = norm_n.value.ln() / denom;
    let alpha_cert = norm_n.certified_upper.filter(|&b| b < 1.0).map(|b| b.ln() / denom);
    Ok(MultiplicativityReport {
        n,
        norm1,
        norm_n,
        alpha_hat,
        alpha_cert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{named_channel, random_channel, random_unitary_mixture, tensor_power, NamedChannel};
    use crate::linalg::{purity, DensityMatrix};
    use crate::seeding::stream;

    fn quick(seed: u64) -> AscentOptions {
        AscentOptions {
            restarts: 8,
            max_iter: 500,
            tol: 1e-13,
            seed,
            guard: DimensionGuard::default(),
        }
    }

    fn depolarizing_purity(d: usize, p: f64) -> f64 {
        let df = d as f64;
        (1.0 - p + p / df).powi(2) + (df - 1.0) * (p / df).powi(2)
    }

    #[test]
    fn product_action_matches_materialized_power() {
        let mut rng = stream(31);
        let ch = random_channel(2, 3, 2, &mut rng).unwrap();
        let big = tensor_power(&ch, 3, &DimensionGuard::default()).unwrap();
        let dense = Dense(big.kraus());
        let prod = ProductKraus::new(ch.kraus(), 3);
        let psi = PureState::random(8, &mut rng).into_vector();
        let a = dense.apply_all(&psi);
        let b = prod.apply_all(&psi);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
        let vs: Vec<CVec> = (0..8).map(|_| crate::linalg::gaussian_vector(27, &mut rng)).collect();
        assert!((dense.adjoint_sum(&vs) - prod.adjoint_sum(&vs)).norm() < 1e-11);
    }

    #[test]
    fn objective_is_output_purity() {
        let mut rng = stream(32);
        let ch = random_channel(3, 3, 5, &mut rng).unwrap();
        let psi = PureState::random(3, &mut rng);
        let direct = purity(&ch.apply(&psi.density()).unwrap());
        let via = purity_of_output(&Dense(ch.kraus()), psi.as_vector());
        assert!((direct - via).abs() < 1e-13);
        // k > d triggers the ω form
        let ch = named_channel(NamedChannel::Depolarizing(0.3), 2).unwrap();
        let psi = PureState::random(2, &mut rng);
        let direct = purity(&ch.apply(&psi.density()).unwrap());
        let via = purity_of_output(&Dense(ch.kraus()), psi.as_vector());
        assert!((direct - via).abs() < 1e-13);
    }

    #[test]
    fn closed_form_values() {
        let id = output_2norm(&KrausChannel::identity(3), &quick(1)).unwrap();
        assert!((id.value - 1.0).abs() < 1e-10);
        for d in [2, 3] {
            for p in [0.0, 0.2, 0.5, 1.0] {
                let ch = named_channel(NamedChannel::Depolarizing(p), d).unwrap();
                let est = output_2norm(&ch, &quick(2)).unwrap();
                assert!((est.value - depolarizing_purity(d, p)).abs() < 1e-6);
            }
        }
        let est = output_2norm(&named_channel(NamedChannel::Depolarizing(0.5), 2).unwrap(), &quick(3)).unwrap();
        assert!((est.value - 0.625).abs() < 1e-6);
    }

    #[test]
    fn value_is_at_least_one_over_k() {
        let mut rng = stream(33);
        for k in 1..6 {
            let ch = random_channel(3, 3, k, &mut rng).unwrap();
            let est = output_2norm(&ch, &quick(k as u64)).unwrap();
            assert!(est.value >= 1.0 / k as f64 - 1e-9);
            assert!(est.value <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn ascent_beats_random_sampling_at_qubit_scale() {
        let mut rng = stream(34);
        let ch = random_channel(2, 2, 3, &mut rng).unwrap();
        let est = output_2norm(&ch, &quick(4)).unwrap();
        let action = Dense(ch.kraus());
        let mut sampled = 0.0f64;
        for _ in 0..20_000 {
            let psi = PureState::random(2, &mut rng);
            sampled = sampled.max(purity_of_output(&action, psi.as_vector()));
        }
        assert!(est.value >= sampled - 1e-6);
    }

    #[test]
    fn tensor_power_closed_forms() {
        for d in [2, 3] {
            let ch = named_channel(NamedChannel::Depolarizing(1.0), d).unwrap();
            for n in 1..=3 {
                let est = output_2norm_tensor(&ch, n, &quick(5)).unwrap();
                assert!((est.value - (d as f64).powi(-(n as i32))).abs() < 1e-9);
            }
        }
        let est = output_2norm_tensor(&KrausChannel::identity(2), 2, &quick(6)).unwrap();
        assert!((est.value - 1.0).abs() < 1e-10);

        let ch = named_channel(NamedChannel::Depolarizing(0.5), 2).unwrap();
        let est = output_2norm_tensor(&ch, 2, &quick(7)).unwrap();
        assert!(est.value >= 0.625f64.powi(2) - 1e-6);
        assert!(est.value <= 0.5625 + 1e-9);
        assert!((est.certified_upper.unwrap() - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn lemma_bound_closed_forms() {
        let ch = named_channel(NamedChannel::Depolarizing(0.5), 2).unwrap();
        assert!((lemma_2norm_bound(&ch, 1).unwrap() - 0.75).abs() < 1e-12);
        let full = named_channel(NamedChannel::Depolarizing(1.0), 3).unwrap();
        assert!((lemma_2norm_bound(&full, 2).unwrap() - 1.0 / 9.0).abs() < 1e-12);
        assert!((lemma_2norm_bound(&KrausChannel::identity(4), 1).unwrap() - 1.25).abs() < 1e-12);
    }

    #[test]
    fn sandwich_between_product_and_certificate() {
        let mut rng = stream(35);
        for trial in 0..6 {
            let ch = random_unitary_mixture(2, 2 + trial % 3, &mut rng).unwrap();
            let single = output_2norm(&ch, &quick(trial as u64)).unwrap();
            for n in 2..=3 {
                let est = output_2norm_tensor(&ch, n, &quick(trial as u64)).unwrap();
                assert!(single.value.powi(n as i32) <= est.value + 1e-8);
                assert!(est.value <= est.certified_upper.unwrap() + 1e-8);
            }
        }
    }

    #[test]
    fn pure_states_dominate_mixtures() {
        let mut rng = stream(36);
        for _ in 0..50 {
            let ch = random_channel(3, 3, 3, &mut rng).unwrap();
            let rho = DensityMatrix::random(3, 3, &mut rng);
            let mixed = purity(&ch.apply(&rho).unwrap());
            let eig = crate::linalg::eigh(rho.as_matrix());
            let best = (0..3)
                .map(|i| purity_of_output(&Dense(ch.kraus()), &eig.vector(i)))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(best >= mixed - 1e-9);
        }
    }

    #[test]
    fn g_map_reductions() {
        let mut rng = stream(37);
        let ch = random_unitary_mixture(2, 3, &mut rng).unwrap();
        let opts = quick(8);
        for n in 1..=2 {
            let plain = output_2norm_tensor(&ch, n, &opts).unwrap();
            let g = g_map_2norm(&ch, n, &WeightOperator::identity(2usize.pow(n as u32)), &opts).unwrap();
            assert!((plain.value - g.value).abs() < 1e-9);

            let c2 = 3.0;
            let scaled = g_map_2norm(
                &ch,
                n,
                &WeightOperator::scalar(c2, 2usize.pow(n as u32)).unwrap(),
                &opts,
            )
            .unwrap();
            assert!((scaled.value - plain.value / (c2 * c2)).abs() < 1e-9);
            assert!((scaled.certified_upper.unwrap() - plain.certified_upper.unwrap() / 9.0).abs() < 1e-12);
        }
        let id = g_map_2norm(&KrausChannel::identity(2), 1, &WeightOperator::identity(2), &opts).unwrap();
        assert!((id.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn multiplicativity_closed_forms() {
        let full = named_channel(NamedChannel::Depolarizing(1.0), 3).unwrap();
        let r = multiplicativity_report(&full, 2, &quick(9)).unwrap();
        assert!((r.alpha_hat - 1.0).abs() < 1e-6);

        let ch = named_channel(NamedChannel::Depolarizing(0.5), 2).unwrap();
        let r = multiplicativity_report(&ch, 2, &quick(10)).unwrap();
        let lo = 0.5625f64.ln() / (2.0 * 0.625f64.ln());
        assert!(r.alpha_hat >= lo - 1e-6 && r.alpha_hat <= 1.0 + 1e-6, "{}", r.alpha_hat);

        assert!(matches!(
            multiplicativity_report(&KrausChannel::identity(2), 2, &quick(11)),
            Err(Error::ExponentUndefined(_))
        ));
    }

    #[test]
    fn restarts_are_deterministic_and_records_monotone() {
        let mut rng = stream(38);
        let ch = random_channel(3, 3, 2, &mut rng).unwrap();
        let a = output_2norm(&ch, &quick(12)).unwrap();
        let b = output_2norm(&ch, &quick(12)).unwrap();
        assert_eq!(a.restart_values, b.restart_values);
        assert!(a.running_best().windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*a.running_best().last().unwrap(), a.value);
    }

    #[test]
    fn guard_limits_tensor_powers() {
        let opts = AscentOptions {
            guard: DimensionGuard::with_max_dim(8),
            ..quick(13)
        };
        let ch = named_channel(NamedChannel::Depolarizing(0.2), 2).unwrap();
        assert!(output_2norm_tensor(&ch, 3, &opts).is_ok());
        assert!(matches!(
            output_2norm_tensor(&ch, 4, &opts),
            Err(Error::DimensionLimit { .. })
        ));
    }
}
