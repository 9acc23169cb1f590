//! Negative binomial likelihood with log-linear mean and dispersion.
//!
//! The response follows NB(mu, k) with
//! `P(Y=y) = Gamma(k+y)/(Gamma(k) y!) (mu/(k+mu))^y (k/(k+mu))^k`,
//! where `mu = exp(x' theta1)` and `k = exp(x' theta2)`. The loss is the
//! per-observation average negative log-likelihood with the
//! theta-independent `log y!` term dropped.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

/// Switch from exact finite sums to gamma-function evaluations above this
/// count, keeping per-row cost bounded.
const LARGE_Y: u64 = 10_000;

/// Design matrix paired with count responses.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Vec<f64>, // row-major, n*p
    y: Vec<u64>,
    n: usize,
    p: usize,
    feature_names: Option<Vec<String>>,
    // Row visitation order determined by row content, so that sums over
    // rows are bitwise invariant under row permutations.
    canonical_order: Vec<u32>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, n: usize, p: usize, y: Vec<u64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::invalid("dataset requires n >= 1 and p >= 1"));
        }
        if x.len() != n * p {
            return Err(Error::dims(format!(
                "X has length {}, expected n*p = {}",
                x.len(),
                n * p
            )));
        }
        if y.len() != n {
            return Err(Error::dims(format!("y has length {}, expected {}", y.len(), n)));
        }
        if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "X[{},{}] is not finite",
                bad / p,
                bad % p
            )));
        }
        let canonical_order = canonical_row_order(&x, &y, n, p);
        Ok(Dataset {
            x,
            y,
            n,
            p,
            feature_names: None,
            canonical_order,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::dims(format!(
                "{} feature names for p = {} columns",
                names.len(),
                self.p
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[u64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub(crate) fn canonical_order(&self) -> &[u32] {
        &self.canonical_order
    }
}

fn canonical_row_order(x: &[f64], y: &[u64], n: usize, p: usize) -> Vec<u32> {
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| {
        let (a, b) = (a as usize, b as usize);
        y[a].cmp(&y[b]).then_with(|| {
            let ra = &x[a * p..(a + 1) * p];
            let rb = &x[b * p..(b + 1) * p];
            for (va, vb) in ra.iter().zip(rb) {
                let c = va.total_cmp(vb);
                if c != std::cmp::Ordering::Equal {
                    return c;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    order
}

/// The 2p-dimensional parameter, split into the mean block `theta1` and the
/// dispersion block `theta2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
}

impl Coefficients {
    pub fn new(theta1: Vec<f64>, theta2: Vec<f64>) -> Result<Self> {
        if theta1.len() != theta2.len() {
            return Err(Error::dims(format!(
                "theta1 has length {}, theta2 has length {}",
                theta1.len(),
                theta2.len()
            )));
        }
        if theta1.iter().chain(&theta2).any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(Coefficients { theta1, theta2 })
    }

    pub fn zeros(p: usize) -> Self {
        Coefficients {
            theta1: vec![0.0; p],
            theta2: vec![0.0; p],
        }
    }

    pub fn p(&self) -> usize {
        self.theta1.len()
    }

    /// Flat view (theta1 followed by theta2).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.theta1.clone();
        v.extend_from_slice(&self.theta2);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 2 != 0 {
            return Err(Error::dims("flat coefficient vector must have even length"));
        }
        let p = flat.len() / 2;
        Coefficients::new(flat[..p].to_vec(), flat[p..].to_vec())
    }
}

/// Box to which both linear predictors are clamped before exponentiation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampBox {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ClampBox {
    fn default() -> Self {
        ClampBox { lo: -30.0, hi: 30.0 }
    }
}

impl ClampBox {
    pub fn clamp(&self, s: f64) -> f64 {
        s.clamp(self.lo, self.hi)
    }
}

/// Per-row linear predictors and their exponentiated values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkValues {
    pub s1: f64,
    pub s2: f64,
    pub mu: f64,
    pub k: f64,
}

impl LinkValues {
    pub fn from_predictors(s1: f64, s2: f64, clamp: &ClampBox) -> Self {
        let s1 = clamp.clamp(s1);
        let s2 = clamp.clamp(s2);
        LinkValues {
            s1,
            s2,
            mu: s1.exp(),
            k: s2.exp(),
        }
    }
}

/// `log(1 + exp(t))` without overflow.
pub(crate) fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-t))`.
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log Gamma(y + k) - log Gamma(k)` via the exact finite sum for integer y.
pub(crate) fn ln_rising(k: f64, y: u64) -> f64 {
    if y > LARGE_Y {
        return ln_gamma(y as f64 + k) - ln_gamma(k);
    }
    let mut acc = 0.0;
    for j in 0..y {
        acc += (j as f64 + k).ln();
    }
    acc
}

/// `psi(y + k) - psi(k)` via the exact finite sum for integer y.
pub(crate) fn digamma_diff(k: f64, y: u64) -> f64 {
    if y > LARGE_Y {
        return digamma(y as f64 + k) - digamma(k);
    }
    let mut acc = 0.0;
    for j in 0..y {
        acc += 1.0 / (j as f64 + k);
    }
    acc
}

/// Exact NB log probability mass, including the `log y!` term.
pub fn nb_log_pmf(y: u64, mu: f64, k: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::invalid(format!("mu must be finite and positive, got {mu}")));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid(format!("k must be finite and positive, got {k}")));
    }
    let ln_fact = ln_gamma(y as f64 + 1.0);
    // log(mu/(k+mu)) = -log1p(k/mu), log(k/(k+mu)) = -log1p(mu/k)
    Ok(ln_rising(k, y) - ln_fact - y as f64 * (k / mu).ln_1p() - k * (mu / k).ln_1p())
}

/// Per-row loss (negative log pmf with `log y!` dropped) at clamped
/// predictors (s1, s2).
pub(crate) fn row_loss(s1: f64, s2: f64, y: u64) -> f64 {
    let k = s2.exp();
    -ln_rising(k, y) + y as f64 * log1p_exp(s2 - s1) + k * log1p_exp(s1 - s2)
}

/// Per-row gradient of `row_loss` with respect to (s1, s2).
pub(crate) fn row_grad_s(s1: f64, s2: f64, y: u64) -> (f64, f64) {
    let mu = s1.exp();
    let k = s2.exp();
    let w = sigmoid(s2 - s1); // e^{s2} / (e^{s1} + e^{s2})
    let resid = (y as f64 - mu) * w;
    let g1 = -resid;
    let g2 = (log1p_exp(s1 - s2) - digamma_diff(k, y)) * k + resid;
    (g1, g2)
}

/// Clamped linear predictors for every row.
pub fn linear_predictors(
    dataset: &Dataset,
    theta: &Coefficients,
    clamp: &ClampBox,
) -> Result<Vec<LinkValues>> {
    check_dims(dataset, theta)?;
    let mut out = Vec::with_capacity(dataset.n());
    for i in 0..dataset.n() {
        let row = dataset.row(i);
        let s1 = dot(row, &theta.theta1);
        let s2 = dot(row, &theta.theta2);
        out.push(LinkValues::from_predictors(s1, s2, clamp));
    }
    Ok(out)
}

/// Average loss over the dataset.
pub fn loss(dataset: &Dataset, theta: &Coefficients, clamp: &ClampBox) -> Result<f64> {
    check_dims(dataset, theta)?;
    let mut acc = 0.0;
    for &i in dataset.canonical_order() {
        let i = i as usize;
        let row = dataset.row(i);
        let s1 = clamp.clamp(dot(row, &theta.theta1));
        let s2 = clamp.clamp(dot(row, &theta.theta2));
        acc += row_loss(s1, s2, dataset.y()[i]);
    }
    Ok(acc / dataset.n() as f64)
}

/// Gradient of `loss`, length 2p (mean block then dispersion block).
///
/// Rows whose predictor sits on a clamp boundary contribute zero to the
/// corresponding block (the clamped predictor is locally constant in theta).
pub fn grad(dataset: &Dataset, theta: &Coefficients, clamp: &ClampBox) -> Result<Vec<f64>> {
    check_dims(dataset, theta)?;
    let p = dataset.p();
    let mut g = vec![0.0; 2 * p];
    for &i in dataset.canonical_order() {
        let i = i as usize;
        let row = dataset.row(i);
        let raw1 = dot(row, &theta.theta1);
        let raw2 = dot(row, &theta.theta2);
        let s1 = clamp.clamp(raw1);
        let s2 = clamp.clamp(raw2);
        let (g1, g2) = row_grad_s(s1, s2, dataset.y()[i]);
        if raw1 == s1 {
            for (j, &xij) in row.iter().enumerate() {
                g[j] += g1 * xij;
            }
        }
        if raw2 == s2 {
            for (j, &xij) in row.iter().enumerate() {
                g[p + j] += g2 * xij;
            }
        }
    }
    let inv_n = 1.0 / dataset.n() as f64;
    for v in &mut g {
        *v *= inv_n;
    }
    Ok(g)
}

fn check_dims(dataset: &Dataset, theta: &Coefficients) -> Result<()> {
    if theta.p() != dataset.p() {
        return Err(Error::dims(format!(
            "coefficient blocks have length {}, dataset has p = {}",
            theta.p(),
            dataset.p()
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
