//! Numeric evaluation of the concentration / Lipschitz / eigenvalue
//! constants behind the estimator's error bounds, plus Monte Carlo
//! verification that the claimed inequalities hold on concrete instances.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model;
use crate::simulate::{self, SimulationReport};

const LN2: f64 = std::f64::consts::LN_2;

/// Box bounds for the linear predictors, response, covariates, and the
/// parameter-space diameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoxBounds {
    pub m_s: f64,
    pub big_m_s: f64,
    /// Maximal observed response.
    pub m_y: u64,
    /// Maximal absolute covariate entry.
    pub m_x: f64,
    /// Diameter of the convex parameter space.
    pub d_theta: f64,
}

impl BoxBounds {
    pub fn new(m_s: f64, big_m_s: f64, m_y: u64, m_x: f64, d_theta: f64) -> Result<Self> {
        if !(m_s.is_finite() && big_m_s.is_finite() && m_s <= big_m_s) {
            return Err(Error::invalid("need finite m_s <= M_s"));
        }
        if !(m_x.is_finite() && m_x > 0.0 && d_theta.is_finite() && d_theta > 0.0) {
            return Err(Error::invalid("need finite positive M_x and D_theta"));
        }
        Ok(BoxBounds {
            m_s,
            big_m_s,
            m_y,
            m_x,
            d_theta,
        })
    }
}

/// A heterogeneous NB ensemble with fixed weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationParams {
    pub mus: Vec<f64>,
    pub ks: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ConcentrationParams {
    pub fn new(mus: Vec<f64>, ks: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if mus.is_empty() || mus.len() != ks.len() || mus.len() != weights.len() {
            return Err(Error::dims("params need equal non-empty lengths"));
        }
        for (&m, &k) in mus.iter().zip(&ks) {
            if !(m.is_finite() && m > 0.0 && k.is_finite() && k > 0.0) {
                return Err(Error::invalid("mus and ks must be finite positive"));
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        Ok(ConcentrationParams { mus, ks, weights })
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }
}

/// Sub-exponential norm of an NB(mu, k) count:
/// [log((1 - (1-q) 2^{-1/k}) / q)]^{-1} with q = mu/(k+mu).
pub fn subexp_norm(mu: f64, k: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0 && k.is_finite() && k > 0.0) {
        return Err(Error::invalid("subexp_norm needs finite positive mu, k"));
    }
    let q = mu / (k + mu);
    let arg = (1.0 - (1.0 - q) * (-LN2 / k).exp()) / q;
    let l = arg.ln();
    if !(l > 0.0) {
        // q -> 1 degeneracy: the norm blows up.
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / l)
}

/// The concentration constant a(mu, k) = ||Y||_{psi1} + mu / log 2.
pub fn a_const(mu: f64, k: f64) -> Result<f64> {
    Ok(subexp_norm(mu, k)? + mu / LN2)
}

/// Two-sided tail bound for |sum w_i (Y_i - E Y_i)| >= t, clipped to [0, 1].
pub fn concentration_bound(params: &ConcentrationParams, t: f64) -> Result<f64> {
    if params.is_empty() {
        return Err(Error::invalid("empty params"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("t must be >= 0"));
    }
    let mut sum_w2a2 = 0.0;
    let mut max_wa = 0.0f64;
    for i in 0..params.len() {
        let a = a_const(params.mus[i], params.ks[i])?;
        let w = params.weights[i];
        sum_w2a2 += w * w * a * a;
        max_wa = max_wa.max(w.abs() * a);
    }
    if sum_w2a2 == 0.0 || max_wa == 0.0 {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    let expo = (t * t / (2.0 * sum_w2a2)).min(t / max_wa);
    let raw = 2.0 * (-0.25 * expo).exp();
    Ok(raw.clamp(0.0, 1.0))
}

/// Design-dependent statistics feeding the Lipschitz-bound constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n: usize,
    pub p: usize,
    /// max_k sum_i X_ik^2
    pub max_col_sq: f64,
    /// max_k sum_i X_ik^4
    pub max_col_quart: f64,
    /// sum_i a(mu_i, k_i)^4
    pub sum_a4: f64,
    /// max_i a(mu_i, k_i)
    pub max_a: f64,
    /// max_i [a(mu_i, k_i) - mu_i / log 2]
    pub max_a_centered: f64,
    pub max_mu: f64,
}

impl DatasetStats {
    /// Collect the statistics from a design and its row-wise NB parameters.
    pub fn from_design(x: &[f64], n: usize, p: usize, mus: &[f64], ks: &[f64]) -> Result<Self> {
        if x.len() != n * p || mus.len() != n || ks.len() != n {
            return Err(Error::dims("design/parameter lengths disagree"));
        }
        let mut max_col_sq = 0.0f64;
        let mut max_col_quart = 0.0f64;
        for j in 0..p {
            let (mut s2, mut s4) = (0.0, 0.0);
            for i in 0..n {
                let v = x[i * p + j];
                s2 += v * v;
                s4 += v * v * v * v;
            }
            max_col_sq = max_col_sq.max(s2);
            max_col_quart = max_col_quart.max(s4);
        }
        let mut sum_a4 = 0.0;
        let mut max_a = 0.0f64;
        let mut max_a_centered = 0.0f64;
        let mut max_mu = 0.0f64;
        for i in 0..n {
            let a = a_const(mus[i], ks[i])?;
            sum_a4 += a.powi(4);
            max_a = max_a.max(a);
            max_a_centered = max_a_centered.max(a - mus[i] / LN2);
            max_mu = max_mu.max(mus[i]);
        }
        Ok(DatasetStats {
            n,
            p,
            max_col_sq,
            max_col_quart,
            sum_a4,
            max_a,
            max_a_centered,
            max_mu,
        })
    }
}

/// Failure-probability split (q1, q2, q3, q4); all positive with sum < 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QSplit {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
}

impl QSplit {
    pub fn equal(q0: f64) -> Result<Self> {
        if !(q0 > 0.0 && q0 < 1.0) {
            return Err(Error::invalid("q0 must lie in (0, 1)"));
        }
        let q = q0 / 4.0;
        Ok(QSplit {
            q1: q,
            q2: q,
            q3: q,
            q4: q,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let qs = [self.q1, self.q2, self.q3, self.q4];
        if qs.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return Err(Error::invalid("each q must lie in (0, 1)"));
        }
        if qs.iter().sum::<f64>() >= 1.0 {
            return Err(Error::invalid("q1 + q2 + q3 + q4 must be < 1"));
        }
        Ok(())
    }
}

/// The full record of Lipschitz-bound constants and the resulting bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LipschitzConstants {
    pub f1: f64,
    pub f2: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a3_prime: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub w1: f64,
    pub w2: f64,
    /// High-probability bound on sup |sqrt(n) G_n(...)| / ||theta - theta*||_1.
    pub sqrt_n_m_q: f64,
    pub m_q: f64,
    /// Nonrandom variant (the observed-max response replaced by its bound).
    pub sqrt_n_m_q_prime: f64,
    pub m_q_prime: f64,
}

/// Envelope bound F1 for |nu(s, y)| over the box.
pub fn f1_const(b: &BoxBounds) -> f64 {
    let my = b.m_y as f64;
    my * (1.0 + (-b.m_s).exp()) + b.big_m_s.exp() + (2.0 * b.big_m_s).exp() / (2.0 * b.m_s.exp())
}

/// Lipschitz bound F2 for nu(., y) in the sup norm over the box.
pub fn f2_const(b: &BoxBounds) -> f64 {
    let my = b.m_y as f64;
    let ems = b.m_s.exp();
    let e_ms = b.big_m_s.exp();
    let first = (e_ms * (1.0 + (my + e_ms).ln() - 1.0 / (2.0 * (my + e_ms)))).abs();
    let second = (1.0 - b.m_s * ems).abs();
    2.0 * first.max(second) + (e_ms * e_ms / ems + 2.0 * e_ms * e_ms / (ems + e_ms)) + 1.5 * e_ms
}

/// Evaluate every constant of the stochastic-Lipschitz bound and the bound
/// itself. `gamma` is the (model-dependent, user-supplied) strong midpoint
/// log-convexity constant entering the nonrandom variant.
pub fn lipschitz_constants(
    bounds: &BoxBounds,
    stats: &DatasetStats,
    q: &QSplit,
    gamma: f64,
) -> Result<LipschitzConstants> {
    q.validate()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma must be finite positive"));
    }
    let (n, p) = (stats.n as f64, stats.p as f64);
    if stats.n == 0 || stats.p == 0 {
        return Err(Error::invalid("stats need n, p >= 1"));
    }
    let f1 = f1_const(bounds);
    let f2 = f2_const(bounds);
    let my = bounds.m_y as f64;
    let sqrt2 = std::f64::consts::SQRT_2;
    let a1 = sqrt2 * f1;
    let a2 = 32.0 * sqrt2 * bounds.m_x * f2 * bounds.d_theta;
    let hinge = (2.0 * (f1 + my)).max(f2 * bounds.m_x * bounds.d_theta);
    let a3 = sqrt2 * hinge;
    let a3_prime = 2.0
        * sqrt2
        * (f1 + (2.0 * gamma * stats.max_a_centered).max(f2 * bounds.m_x * bounds.d_theta));
    let ems = bounds.m_s.exp();
    let e_ms = bounds.big_m_s.exp();
    let w1 = e_ms / (ems + e_ms);
    // Proof form of w2 (the statement's display drops the outer log).
    let w2 = ((std::f64::consts::E + (bounds.big_m_s - bounds.m_s).exp())
        / (1.0 + (bounds.m_s - bounds.big_m_s).exp()))
    .ln()
        + 1.0 / (1.0 + (bounds.m_s - bounds.big_m_s).exp());
    let wmax = w1.max(w2);
    let b = 6.0 * (2.0 * wmax * stats.sum_a4.sqrt()).sqrt();
    let c = 12.0 * bounds.m_x * wmax * stats.max_a;
    let d = 8.0 * hinge * bounds.m_x;
    let s2 = stats.max_col_sq.sqrt();
    let tail = (b * (2.0 * p / q.q1).ln().sqrt() * stats.max_col_quart.sqrt().sqrt())
        .max(c * (2.0 * p / q.q1).ln())
        + d * (p / q.q3).ln();
    let sqrt_n_m_q = (a1 * (2.0 * p / q.q2).ln().sqrt()
        + a2 * p.ln().sqrt()
        + a3 * (p / q.q3).ln().sqrt())
        * s2
        + tail;
    let sqrt_n_m_q_prime = (a1 * (2.0 * p / q.q2).ln().sqrt()
        + a2 * p.ln().sqrt()
        + 2.0 * a3_prime * ((2.0 * n / q.q4).ln() + (n * p / q.q3).ln().sqrt()))
        * s2
        + tail;
    Ok(LipschitzConstants {
        f1,
        f2,
        a1,
        a2,
        a3,
        a3_prime,
        b,
        c,
        d,
        w1,
        w2,
        sqrt_n_m_q,
        m_q: sqrt_n_m_q / n.sqrt(),
        sqrt_n_m_q_prime,
        m_q_prime: sqrt_n_m_q_prime / n.sqrt(),
    })
}

/// The score envelope nu(s, y) whose box bounds are F1 and F2.
pub fn nu(s1: f64, s2: f64, y: u64) -> f64 {
    let mu = s1.exp();
    let k = s2.exp();
    let w = model::sigmoid(s2 - s1);
    k * (model::log1p_exp(s1 - s2) - model::digamma_diff(k, y)) - mu * w
}

/// Closed-form bound on E max_i Y_i for a heterogeneous NB ensemble of size
/// n: 2 max_i [a_i - mu_i/log2] [log(2n) + sqrt(2 log 2n)] + max_i mu_i.
pub fn max_response_bound(params: &ConcentrationParams, n: usize) -> Result<f64> {
    if params.is_empty() || n == 0 {
        return Err(Error::invalid("need non-empty params and n >= 1"));
    }
    let mut max_norm = 0.0f64;
    let mut max_mu = 0.0f64;
    for i in 0..params.len() {
        // a - mu/log2 is exactly the sub-exponential norm.
        max_norm = max_norm.max(subexp_norm(params.mus[i], params.ks[i])?);
        max_mu = max_mu.max(params.mus[i]);
    }
    let l = (2.0 * n as f64).ln();
    Ok(2.0 * max_norm * (l + (2.0 * l).sqrt()) + max_mu)
}

// ---------------------------------------------------------------------------
// Restricted eigenvalue / isometry
// ---------------------------------------------------------------------------

fn combinations(p: usize, l: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..l {
        acc = acc * (p - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn for_each_subset(p: usize, l: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..l).collect();
    loop {
        f(&idx);
        // next combination in lexicographic order
        let mut i = l;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + p - l {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..l {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact l-restricted isometry constant: max over supports |S| <= l of the
/// top eigenvalue of X_S^T X_S. The maximum over |S| <= l is attained at
/// |S| = l (eigenvalue interlacing), so only size-l supports are scanned.
pub fn restricted_isometry(x: &[f64], n: usize, p: usize, l: usize) -> Result<f64> {
    if x.len() != n * p {
        return Err(Error::dims("design length != n * p"));
    }
    if l == 0 || l > p {
        return Err(Error::invalid("need 1 <= l <= p"));
    }
    if combinations(p, l) > 1e5 {
        return Err(Error::BudgetExceeded(format!(
            "C({p}, {l}) supports exceed the enumeration budget; use the sampled RE estimate instead"
        )));
    }
    let xm = DMatrix::from_row_slice(n, p, x);
    let gram = xm.transpose() * &xm; // p x p
    let mut best = 0.0f64;
    for_each_subset(p, l, |s| {
        let mut sub = DMatrix::zeros(l, l);
        for (a, &ia) in s.iter().enumerate() {
            for (b, &ib) in s.iter().enumerate() {
                sub[(a, b)] = gram[(ia, ib)];
            }
        }
        let eig = sub.symmetric_eigenvalues();
        best = best.max(eig.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)));
    });
    Ok(best)
}

/// Search-based UPPER estimate of the restricted eigenvalue
/// kappa(s, K) = min ||Xv||_2 / (sqrt(n) ||v_J||_2) over |J| <= s and the
/// cone ||v_{J^c}||_1 <= K ||v_J||_1. Every evaluated v is feasible, so the
/// reported value can only overestimate the true minimum.
pub fn re_constant(
    x: &[f64],
    n: usize,
    p: usize,
    s: usize,
    big_k: f64,
    budget: usize,
    seed: u64,
) -> Result<f64> {
    if x.len() != n * p {
        return Err(Error::dims("design length != n * p"));
    }
    if s == 0 || s > p {
        return Err(Error::invalid("need 1 <= s <= p"));
    }
    if !(big_k > 0.0) {
        return Err(Error::invalid("K must be > 0"));
    }
    let xm = DMatrix::from_row_slice(n, p, x);
    let gram = xm.transpose() * &xm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best = f64::INFINITY;
    let mut eval_support = |j: &[usize], rng: &mut ChaCha8Rng| {
        let l = j.len();
        let comp: Vec<usize> = (0..p).filter(|i| !j.contains(i)).collect();
        let a_jj = DMatrix::from_fn(l, l, |a, b| gram[(j[a], j[b])]);
        let a_cj = DMatrix::from_fn(comp.len(), l, |a, b| gram[(comp[a], j[b])]);
        let a_cc = DMatrix::from_fn(comp.len(), comp.len(), |a, b| gram[(comp[a], comp[b])]);
        let a_cc_pinv = a_cc.clone().pseudo_inverse(1e-10).unwrap_or(a_cc);

        // Candidate v_J directions: Schur-complement bottom eigenvector plus
        // a few random draws.
        let schur = &a_jj - a_cj.transpose() * &a_cc_pinv * &a_cj;
        let se = nalgebra::SymmetricEigen::new(schur);
        let (mut min_idx, mut min_val) = (0, f64::INFINITY);
        for (i, &ev) in se.eigenvalues.iter().enumerate() {
            if ev < min_val {
                min_val = ev;
                min_idx = i;
            }
        }
        let mut dirs: Vec<DVector<f64>> = vec![se.eigenvectors.column(min_idx).into_owned()];
        for _ in 0..4 {
            dirs.push(DVector::from_fn(l, |_, _| rng.random_range(-1.0..1.0)));
        }
        for vj in dirs {
            let norm_j = vj.norm();
            if norm_j < 1e-12 {
                continue;
            }
            // Unconstrained off-support minimizer, pulled back into the cone
            // along its ray if it violates the L1 budget.
            let vc_full = -(&a_cc_pinv) * (&a_cj * &vj);
            let l1_j: f64 = vj.iter().map(|v| v.abs()).sum();
            let l1_c: f64 = vc_full.iter().map(|v| v.abs()).sum();
            let alpha = if l1_c > big_k * l1_j {
                big_k * l1_j / l1_c
            } else {
                1.0
            };
            let mut v = DVector::zeros(p);
            for (a, &ia) in j.iter().enumerate() {
                v[ia] = vj[a];
            }
            for (a, &ia) in comp.iter().enumerate() {
                v[ia] = alpha * vc_full[a];
            }
            let quad = (v.transpose() * &gram * &v)[(0, 0)].max(0.0);
            let val = (quad / (n as f64 * norm_j * norm_j)).sqrt();
            if val < best {
                best = val;
            }
        }
    };

    if p <= 12 {
        for l in 1..=s {
            for_each_subset(p, l, |j| eval_support(j, &mut rng));
        }
    } else {
        for _ in 0..budget.max(1) {
            let mut j: Vec<usize> = Vec::with_capacity(s);
            while j.len() < s {
                let c = rng.random_range(0..p);
                if !j.contains(&c) {
                    j.push(c);
                }
            }
            j.sort_unstable();
            eval_support(&j, &mut rng);
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// KL divergence and expected loss
// ---------------------------------------------------------------------------

/// Truncated KL divergence between NB laws: from f(. | mu_c, k_c) to
/// f(. | mu_s, k_s), summed up to y_max with a tail-mass check.
pub fn kl_nb(mu_s: f64, k_s: f64, mu_c: f64, k_c: f64, y_max: u64) -> Result<f64> {
    let mut kl = 0.0;
    let mut mass_c = 0.0;
    let mut mass_s = 0.0;
    for y in 0..=y_max {
        let lc = model::nb_log_pmf(y, mu_c, k_c)?;
        let ls = model::nb_log_pmf(y, mu_s, k_s)?;
        let fc = lc.exp();
        mass_c += fc;
        mass_s += ls.exp();
        kl += fc * (lc - ls);
    }
    if 1.0 - mass_c > 1e-12 || 1.0 - mass_s > 1e-12 {
        return Err(Error::invalid(format!(
            "pmf tail mass above 1e-12 at y_max={y_max}; increase y_max"
        )));
    }
    if kl < -1e-10 {
        return Err(Error::Numeric(format!("KL evaluated to {kl} < -1e-10")));
    }
    Ok(kl)
}

/// y beyond which NB(mu, k) has tail mass far below 1e-12.
pub fn nb_tail_cutoff(mu: f64, k: f64) -> u64 {
    let sd = (mu + mu * mu / k).sqrt();
    (mu + 30.0 * sd + 60.0).ceil() as u64
}

/// E_{Y ~ NB(mu_star, k_star)} row_loss(s1, s2, Y) by truncated summation.
fn expected_row_loss(s1: f64, s2: f64, mu_star: f64, k_star: f64) -> Result<f64> {
    let k = s2.exp();
    let y_max = nb_tail_cutoff(mu_star, k_star);
    // E ln_rising(k, Y) accumulated alongside the pmf.
    let mut e_lr = 0.0;
    let mut lr = 0.0;
    let mut mass = 0.0;
    for y in 0..=y_max {
        if y > 0 {
            lr += ((y - 1) as f64 + k).ln();
        }
        let f = model::nb_log_pmf(y, mu_star, k_star)?.exp();
        e_lr += f * lr;
        mass += f;
    }
    if 1.0 - mass > 1e-10 {
        return Err(Error::Numeric("expected-loss truncation too short".into()));
    }
    Ok(-e_lr + mu_star * model::log1p_exp(s2 - s1) + k * model::log1p_exp(s1 - s2))
}

// ---------------------------------------------------------------------------
// Check runners (shared by the CLI and the acceptance suite)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub details: serde_json::Value,
}

fn report(name: &str, passed: bool, details: serde_json::Value) -> CheckReport {
    CheckReport {
        name: name.to_string(),
        passed,
        details,
    }
}

/// Monte Carlo verification of the weighted-sum tail bound on a random
/// heterogeneous ensemble.
pub fn check_concentration(seed: u64, n: usize, trials: usize, t_points: usize) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mus: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    let ks: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let params = ConcentrationParams::new(mus.clone(), ks.clone(), weights.clone())?;

    let chunk = 1000usize;
    let chunks = trials.div_ceil(chunk);
    let sums: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = simulate::rep_rng(seed ^ 0x5eed, c);
            let take = chunk.min(trials - c * chunk);
            let mus = mus.clone();
            let ks = ks.clone();
            let weights = weights.clone();
            (0..take)
                .map(move |_| {
                    let mut s = 0.0;
                    for i in 0..n {
                        let y = simulate::sample_nb(mus[i], ks[i], &mut r).unwrap();
                        s += weights[i] * (y as f64 - mus[i]);
                    }
                    s.abs()
                })
                .collect::<Vec<f64>>()
        })
        .collect();

    let sum_w2a2: f64 = (0..n)
        .map(|i| weights[i].powi(2) * a_const(mus[i], ks[i]).unwrap().powi(2))
        .sum();
    let t_hi = 3.0 * (2.0 * sum_w2a2).sqrt();
    let mut rows = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    for j in 0..t_points {
        let t = t_hi * (j + 1) as f64 / t_points as f64;
        let emp = sums.iter().filter(|&&v| v >= t).count() as f64 / trials as f64;
        let bound = concentration_bound(&params, t)?;
        let se = (emp * (1.0 - emp) / trials as f64).sqrt();
        let excess = emp - (bound + 3.0 * se);
        max_excess = max_excess.max(excess);
        rows.push(serde_json::json!({"t": t, "empirical": emp, "bound": bound, "se": se}));
    }
    Ok(report(
        "concentration",
        max_excess <= 0.0,
        serde_json::json!({"max_excess": max_excess, "rows": rows, "n": n, "trials": trials}),
    ))
}

/// Sampled verification that |nu| <= F1 and the sup-norm Lipschitz ratio of
/// nu is <= F2 over a predictor box and bounded responses.
pub fn check_score_envelope(seed: u64, draws: usize) -> Result<CheckReport> {
    let bounds = BoxBounds::new(-2.0, 2.0, 50, 1.0, 1.0)?;
    let f1 = f1_const(&bounds);
    let f2 = f2_const(&bounds);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_abs = 0.0f64;
    let mut max_ratio = 0.0f64;
    let mut violations = 0usize;
    for _ in 0..draws {
        let s1 = rng.random_range(bounds.m_s..bounds.big_m_s);
        let s2 = rng.random_range(bounds.m_s..bounds.big_m_s);
        let t1 = rng.random_range(bounds.m_s..bounds.big_m_s);
        let t2 = rng.random_range(bounds.m_s..bounds.big_m_s);
        let y = rng.random_range(0..=bounds.m_y);
        let v_s = nu(s1, s2, y);
        max_abs = max_abs.max(v_s.abs());
        if v_s.abs() > f1 {
            violations += 1;
        }
        let denom = (s1 - t1).abs().max((s2 - t2).abs());
        if denom > 1e-9 {
            let ratio = (v_s - nu(t1, t2, y)).abs() / denom;
            max_ratio = max_ratio.max(ratio);
            if ratio > f2 {
                violations += 1;
            }
        }
    }
    Ok(report(
        "score-envelope",
        violations == 0,
        serde_json::json!({
            "f1": f1, "f2": f2, "max_abs_nu": max_abs, "max_lipschitz_ratio": max_ratio,
            "violations": violations, "draws": draws
        }),
    ))
}

/// Empirical verification of the stochastic Lipschitz bound: the sampled sup
/// of |sqrt(n) G_n(loss(theta) - loss(theta*))| / ||theta - theta*||_1 stays
/// below sqrt(n) M_q on a small random instance.
pub fn check_stochastic_lipschitz(seed: u64, n: usize, p: usize, pairs: usize) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 0.25;
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0) * 0.5).collect();
    let draw_theta = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..2 * p).map(|_| rng.random_range(-radius..radius)).collect()
    };
    let theta_star = draw_theta(&mut rng);
    let row_l1: Vec<f64> = (0..n)
        .map(|i| x[i * p..(i + 1) * p].iter().map(|v| v.abs()).sum())
        .collect();
    let s_max = row_l1.iter().fold(0.0f64, |a, &v| a.max(v)) * radius;
    let preds = |th: &[f64], i: usize| -> (f64, f64) {
        let row = &x[i * p..(i + 1) * p];
        (model::dot(row, &th[..p]), model::dot(row, &th[p..]))
    };
    let star_links: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (s1, s2) = preds(&theta_star, i);
            (s1.exp(), s2.exp())
        })
        .collect();
    let y: Vec<u64> = star_links
        .iter()
        .map(|&(mu, k)| simulate::sample_nb(mu, k, &mut rng))
        .collect::<Result<_>>()?;
    let m_y = *y.iter().max().unwrap();

    // Bound constants from the realized instance.
    let m_x = x.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    // L2 diameter of the coefficient box.
    let d_theta = 2.0 * radius * (2.0 * p as f64).sqrt();
    let bounds = BoxBounds::new(-s_max, s_max, m_y, m_x, d_theta)?;
    let mus: Vec<f64> = star_links.iter().map(|l| l.0).collect();
    let ks: Vec<f64> = star_links.iter().map(|l| l.1).collect();
    let stats = DatasetStats::from_design(&x, n, p, &mus, &ks)?;
    let q = QSplit::equal(0.1)?;
    let consts = lipschitz_constants(&bounds, &stats, &q, 1.0)?;

    // Centered loss difference at theta*.
    let star_terms: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (s1, s2) = preds(&theta_star, i);
            let obs = model::row_loss(s1, s2, y[i]);
            let exp = expected_row_loss(s1, s2, star_links[i].0, star_links[i].1).unwrap();
            (obs, exp)
        })
        .collect();

    let seeds: Vec<u64> = (0..pairs).map(|i| seed ^ (i as u64).wrapping_mul(0x9e37)).collect();
    let ratios: Vec<f64> = seeds
        .par_iter()
        .map(|&s| {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let theta = draw_theta(&mut r);
            let l1: f64 = theta
                .iter()
                .zip(&theta_star)
                .map(|(a, b)| (a - b).abs())
                .sum();
            if l1 < 1e-9 {
                return 0.0;
            }
            let mut centered = 0.0;
            for i in 0..n {
                let (s1, s2) = preds(&theta, i);
                let obs = model::row_loss(s1, s2, y[i]);
                let exp =
                    expected_row_loss(s1, s2, star_links[i].0, star_links[i].1).unwrap();
                centered += (obs - star_terms[i].0) - (exp - star_terms[i].1);
            }
            centered.abs() / l1
        })
        .collect();
    let sup = ratios.iter().fold(0.0f64, |a, &v| a.max(v));
    Ok(report(
        "stochastic-lipschitz",
        sup <= consts.sqrt_n_m_q,
        serde_json::json!({
            "sampled_sup": sup, "sqrt_n_m_q": consts.sqrt_n_m_q,
            "sqrt_n_m_q_prime": consts.sqrt_n_m_q_prime,
            "constants": consts, "n": n, "p": p, "pairs": pairs
        }),
    ))
}

/// Empirical E max_i Y_i against the closed-form bound.
pub fn check_max_response(seed: u64, ns: &[usize], trials: usize) -> Result<CheckReport> {
    let mut rows = Vec::new();
    let mut passed = true;
    for (idx, &n) in ns.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(idx as u64));
        let mus: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        let ks: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        let params = ConcentrationParams::new(mus.clone(), ks.clone(), vec![1.0; n])?;
        let bound = max_response_bound(&params, n)?;
        let chunk = 500usize;
        let chunks = trials.div_ceil(chunk);
        let total: f64 = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut r = simulate::rep_rng(seed ^ 0xabcd ^ idx as u64, c);
                let take = chunk.min(trials - c * chunk);
                let mut acc = 0.0;
                for _ in 0..take {
                    let mut m = 0u64;
                    for i in 0..n {
                        m = m.max(simulate::sample_nb(mus[i], ks[i], &mut r).unwrap());
                    }
                    acc += m as f64;
                }
                acc
            })
            .sum();
        let emp = total / trials as f64;
        passed &= emp <= bound;
        rows.push(serde_json::json!({"n": n, "empirical_mean_max": emp, "bound": bound}));
    }
    Ok(report(
        "max-response",
        passed,
        serde_json::json!({"rows": rows, "trials": trials}),
    ))
}

/// Exact isometry values vs. a brute-force second implementation, plus
/// monotonicity in l.
pub fn check_isometry(seed: u64, n: usize, p: usize) -> Result<CheckReport> {
    if p > 8 {
        return Err(Error::invalid("isometry cross-check runs at p <= 8"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut vals = Vec::new();
    let mut passed = true;
    let mut prev = 0.0;
    for l in 1..=p {
        let fast = restricted_isometry(&x, n, p, l)?;
        let brute = brute_isometry(&x, n, p, l);
        passed &= (fast - brute).abs() <= 1e-8 * brute.max(1.0);
        passed &= fast >= prev - 1e-10;
        prev = fast;
        vals.push(serde_json::json!({"l": l, "value": fast, "brute": brute}));
    }
    Ok(report(
        "isometry",
        passed,
        serde_json::json!({"n": n, "p": p, "values": vals}),
    ))
}

/// Second implementation: bitmask enumeration + power iteration.
fn brute_isometry(x: &[f64], n: usize, p: usize, l: usize) -> f64 {
    let mut best = 0.0f64;
    for mask in 1u32..(1 << p) {
        if (mask.count_ones() as usize) != l {
            continue;
        }
        let cols: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
        // power iteration on (X_S^T X_S)
        let m = cols.len();
        let mut g = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += x[i * p + cols[a]] * x[i * p + cols[b]];
                }
                g[a * m + b] = acc;
            }
        }
        let mut v = vec![1.0 / (m as f64).sqrt(); m];
        let mut lam = 0.0;
        for _ in 0..500 {
            let mut w = vec![0.0; m];
            for a in 0..m {
                for b in 0..m {
                    w[a] += g[a * m + b] * v[b];
                }
            }
            let norm = w.iter().map(|u| u * u).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            let new_lam = norm;
            for a in 0..m {
                v[a] = w[a] / norm;
            }
            if (new_lam - lam).abs() < 1e-13 * new_lam.max(1.0) {
                lam = new_lam;
                break;
            }
            lam = new_lam;
        }
        best = best.max(lam);
    }
    best
}

/// RE-estimate sanity: near 1 on an orthonormal design, near 0 with a
/// duplicated column, non-increasing in s and K.
pub fn check_re(seed: u64) -> Result<CheckReport> {
    let mut passed = true;
    let mut details = serde_json::Map::new();

    // Orthonormal columns scaled by sqrt(n): kappa = 1 for any (s, K).
    let n = 8;
    let p = 4;
    let mut x = vec![0.0; n * p];
    for j in 0..p {
        x[j * p + j] = (n as f64).sqrt();
    }
    let iso = re_constant(&x, n, p, 2, 3.0, 100, seed)?;
    passed &= (iso - 1.0).abs() < 1e-6;
    details.insert("orthonormal".into(), serde_json::json!(iso));

    // Duplicated column: the difference direction is in the null space.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 20;
    let p = 5;
    let mut x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    for i in 0..n {
        x[i * p + 1] = x[i * p];
    }
    let degen = re_constant(&x, n, p, 2, 2.0, 200, seed)?;
    passed &= degen < 0.05;
    details.insert("duplicated_column".into(), serde_json::json!(degen));

    // Monotonicity on a random Gaussian-like design.
    let n = 30;
    let p = 6;
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut by_s = Vec::new();
    let mut prev = f64::INFINITY;
    for s in 1..=3usize {
        let v = re_constant(&x, n, p, s, 2.0, 200, seed)?;
        passed &= v <= prev + 1e-9;
        prev = v;
        by_s.push(v);
    }
    let mut by_k = Vec::new();
    let mut prev = f64::INFINITY;
    for &k in &[1.0, 2.0, 4.0] {
        let v = re_constant(&x, n, p, 2, k, 200, seed)?;
        passed &= v <= prev + 1e-9;
        prev = v;
        by_k.push(v);
    }
    details.insert("by_s".into(), serde_json::json!(by_s));
    details.insert("by_k".into(), serde_json::json!(by_k));
    Ok(report("re", passed, serde_json::Value::Object(details)))
}

/// KL grid: non-negative everywhere, zero iff the laws coincide, and the
/// local quadratic ratio KL(c+h, c)/||h||^2 stabilizes as h -> 0.
pub fn check_kl() -> Result<CheckReport> {
    let grid = [-0.6, 0.0, 0.7];
    let mut passed = true;
    let mut min_off = f64::INFINITY;
    for &s1 in &grid {
        for &s2 in &grid {
            for &c1 in &grid {
                for &c2 in &grid {
                    let y_max = nb_tail_cutoff(f64::exp(c1).max(f64::exp(s1)), f64::exp(c2).min(f64::exp(s2)));
                    let kl = kl_nb(f64::exp(s1), f64::exp(s2), f64::exp(c1), f64::exp(c2), y_max)?;
                    passed &= kl >= -1e-10;
                    if s1 == c1 && s2 == c2 {
                        passed &= kl.abs() < 1e-12;
                    } else {
                        min_off = min_off.min(kl);
                    }
                }
            }
        }
    }
    passed &= min_off > 0.0;
    // Quadratic behavior along a fixed direction at (c1, c2) = (0.2, -0.1).
    let (c1, c2) = (0.2, -0.1);
    let dir = (0.6, 0.8);
    let mut ratios = Vec::new();
    for &h in &[1e-1, 1e-2, 1e-3] {
        let s1 = c1 + h * dir.0;
        let s2 = c2 + h * dir.1;
        let y_max = nb_tail_cutoff(f64::exp(c1).max(f64::exp(s1)), f64::exp(c2).min(f64::exp(s2)));
        let kl = kl_nb(f64::exp(s1), f64::exp(s2), f64::exp(c1), f64::exp(c2), y_max)?;
        ratios.push(kl / (h * h));
    }
    let stab = (ratios[1] - ratios[2]).abs() / ratios[2].abs();
    passed &= ratios[2] > 0.0 && stab < 0.10;
    Ok(report(
        "kl",
        passed,
        serde_json::json!({"min_offdiag": min_off, "quadratic_ratios": ratios, "stabilization": stab}),
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleRateReport {
    /// (n, mean total squared error) per report.
    pub points: Vec<(usize, f64)>,
    pub slope: f64,
    pub monotone_decreasing: bool,
}

/// Log-log regression of the mean total squared estimation error on n.
pub fn oracle_rate_check(reports: &[&SimulationReport]) -> Result<OracleRateReport> {
    if reports.len() < 3 {
        return Err(Error::invalid("need reports for at least 3 sample sizes"));
    }
    let mut points: Vec<(usize, f64)> = reports
        .iter()
        .map(|r| (r.config.n, r.summary.mean_ase1 + r.summary.mean_ase2))
        .collect();
    points.sort_by_key(|&(n, _)| n);
    if points.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid("reports must cover distinct sample sizes"));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let monotone = points.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(OracleRateReport {
        points,
        slope,
        monotone_decreasing: monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subexp_norm_closed_form() {
        // Frozen extended-precision oracle at (mu, k) = (1, 1).
        let v = subexp_norm(1.0, 1.0).unwrap();
        assert!((v - 2.4663034623764317).abs() < 1e-14, "{v}");
        assert!(subexp_norm(0.0, 1.0).is_err());
    }

    #[test]
    fn subexp_norm_increasing_in_mu() {
        let mut prev = 0.0;
        for i in 1..20 {
            let v = subexp_norm(0.2 * i as f64, 1.5).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn subexp_norm_mgf_within_two() {
        for &(mu, k) in &[(1.0, 1.0), (2.5, 0.7), (0.4, 3.0)] {
            let t = subexp_norm(mu, k).unwrap();
            let y_max = nb_tail_cutoff(mu, k) * 4;
            let mut mgf = 0.0;
            for y in 0..=y_max {
                mgf += (model::nb_log_pmf(y, mu, k).unwrap() + y as f64 / t).exp();
            }
            assert!(mgf <= 2.0 + 1e-3, "({mu},{k}): mgf {mgf}");
        }
    }

    #[test]
    fn a_const_values() {
        let v = a_const(1.0, 1.0).unwrap();
        assert!((v - 3.908998503265395).abs() < 1e-13, "{v}");
        // Always above the mu / log 2 floor.
        for &(mu, k) in &[(0.2, 0.5), (5.0, 2.0)] {
            assert!(a_const(mu, k).unwrap() > mu / LN2);
        }
        // Decreasing toward the Poisson limit as k grows.
        let mut prev = f64::INFINITY;
        for &k in &[0.5, 1.0, 2.0, 8.0, 64.0] {
            let v = a_const(2.0, k).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn concentration_bound_arithmetic() {
        let p = ConcentrationParams::new(vec![1.0], vec![1.0], vec![1.0]).unwrap();
        assert_eq!(concentration_bound(&p, 0.0).unwrap(), 1.0);
        let a = a_const(1.0, 1.0).unwrap();
        let t = 10.0;
        let expected = 2.0 * (-0.25 * (t * t / (2.0 * a * a)).min(t / a)).exp();
        let got = concentration_bound(&p, t).unwrap();
        assert!((got - expected.clamp(0.0, 1.0)).abs() < 1e-15);
        assert!(concentration_bound(&p, -1.0).is_err());
    }

    #[test]
    fn lipschitz_symmetric_toy_reduction() {
        let b = BoxBounds::new(0.0, 0.0, 0, 1.0, 1.0).unwrap();
        let stats = DatasetStats {
            n: 1,
            p: 1,
            max_col_sq: 1.0,
            max_col_quart: 1.0,
            sum_a4: 1.0,
            max_a: 1.0,
            max_a_centered: 0.5,
            max_mu: 1.0,
        };
        let q = QSplit::equal(0.2).unwrap();
        let c = lipschitz_constants(&b, &stats, &q, 1.0).unwrap();
        assert!((c.a2 - 32.0 * std::f64::consts::SQRT_2 * c.f2).abs() < 1e-12);
        assert!((c.a1 - std::f64::consts::SQRT_2 * c.f1).abs() < 1e-12);
    }

    #[test]
    fn w1_logistic_range() {
        let b = BoxBounds::new(-1.0, 2.0, 5, 1.0, 1.0).unwrap();
        let stats = DatasetStats {
            n: 4,
            p: 2,
            max_col_sq: 2.0,
            max_col_quart: 2.0,
            sum_a4: 10.0,
            max_a: 2.0,
            max_a_centered: 1.0,
            max_mu: 2.0,
        };
        let c = lipschitz_constants(&b, &stats, &QSplit::equal(0.1).unwrap(), 1.0).unwrap();
        assert!(c.w1 > 0.5 && c.w1 < 1.0);
        assert!(c.sqrt_n_m_q.is_finite() && c.sqrt_n_m_q > 0.0);
        assert!(c.sqrt_n_m_q_prime > 0.0);
    }

    #[test]
    fn qsplit_validation() {
        assert!(QSplit::equal(0.0).is_err());
        assert!(QSplit {
            q1: 0.3,
            q2: 0.3,
            q3: 0.3,
            q4: 0.3
        }
        .validate()
        .is_err());
    }

    #[test]
    fn max_response_bound_arithmetic() {
        let p = ConcentrationParams::new(vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let b = max_response_bound(&p, 1).unwrap();
        // Frozen closed-form oracle.
        assert!((b - 10.226723413036165).abs() < 1e-12, "{b}");
        assert!(max_response_bound(&p, 10).unwrap() > b);
    }

    #[test]
    fn isometry_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, p) = (10, 4);
        let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l1 = restricted_isometry(&x, n, p, 1).unwrap();
        let max_col: f64 = (0..p)
            .map(|j| (0..n).map(|i| x[i * p + j].powi(2)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((l1 - max_col).abs() < 1e-10);
        let lp = restricted_isometry(&x, n, p, p).unwrap();
        let xm = DMatrix::from_row_slice(n, p, &x);
        let top = (xm.transpose() * &xm)
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        assert!((lp - top).abs() < 1e-10);
        assert!(l1 <= lp + 1e-12);
    }

    #[test]
    fn isometry_budget() {
        let x = vec![0.1; 40 * 30];
        assert!(matches!(
            restricted_isometry(&x, 40, 30, 15),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn isometry_matches_brute_force() {
        let r = check_isometry(11, 12, 5).unwrap();
        assert!(r.passed, "{:?}", r.details);
    }

    #[test]
    fn re_checks() {
        let r = check_re(21).unwrap();
        assert!(r.passed, "{:?}", r.details);
    }

    #[test]
    fn kl_identity_and_positivity() {
        let kl = kl_nb(1.5, 2.0, 1.5, 2.0, nb_tail_cutoff(1.5, 2.0)).unwrap();
        assert!(kl.abs() < 1e-12);
        let kl = kl_nb(2.5, 2.0, 1.5, 2.0, nb_tail_cutoff(2.5, 2.0)).unwrap();
        assert!(kl > 0.0);
        // Tail check fires for too-short truncation.
        assert!(kl_nb(10.0, 0.5, 10.0, 0.5, 5).is_err());
    }

    #[test]
    fn kl_grid_check() {
        let r = check_kl().unwrap();
        assert!(r.passed, "{:?}", r.details);
    }

    #[test]
    fn score_envelope_small_sample() {
        let r = check_score_envelope(5, 20_000).unwrap();
        assert!(r.passed, "{:?}", r.details);
    }

    #[test]
    fn concentration_small_sample() {
        let r = check_concentration(7, 20, 20_000, 10).unwrap();
        assert!(r.passed, "{:?}", r.details);
    }

    #[test]
    fn max_response_small_sample() {
        let r = check_max_response(9, &[10], 2_000).unwrap();
        assert!(r.passed, "{:?}", r.details);
    }

    #[test]
    fn stochastic_lipschitz_small_sample() {
        let r = check_stochastic_lipschitz(13, 30, 3, 500).unwrap();
        assert!(r.passed, "{:?}", r.details);
    }

    #[test]
    fn oracle_rate_regression() {
        // Synthetic reports with a clean n^{-1} trend.
        use crate::simulate::{Scenario, SimulationConfig, Summary};
        let mk = |n: usize, err: f64| -> SimulationReport {
            SimulationReport {
                config: SimulationConfig::new(
                    n,
                    3,
                    0.0,
                    SimulationConfig::standard_truth(3).unwrap(),
                    1,
                    0,
                    Scenario::Example1,
                )
                .unwrap(),
                per_rep: vec![],
                summary: Summary {
                    mean_ase1: err / 2.0,
                    mean_ase2: err / 2.0,
                    mean_ase1_const_baseline: None,
                    selection_counts1: vec![],
                    selection_counts2: vec![],
                    false_selected1: 0.0,
                    false_selected2: 0.0,
                    false_selected_total: 0.0,
                    failed_reps: 0,
                },
            }
        };
        let a = mk(100, 0.04);
        let b = mk(200, 0.02);
        let c = mk(400, 0.01);
        let r = oracle_rate_check(&[&a, &b, &c]).unwrap();
        assert!((r.slope + 1.0).abs() < 1e-10);
        assert!(r.monotone_decreasing);
        assert!(oracle_rate_check(&[&a, &b]).is_err());
    }
}
