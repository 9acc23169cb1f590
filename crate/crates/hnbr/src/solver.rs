//! Proximal-gradient solver for the double L1-penalized objective
//! `loss(theta) + lambda1 ||theta1||_1 + lambda2 ||theta2||_1`,
//! plus the rescaling reduction that folds both penalties into a single
//! level, and the constant-dispersion baseline.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, ClampBox, Coefficients, Dataset};

/// Penalty levels and solver options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Relative objective-change stopping threshold.
    pub tol: f64,
    pub max_iter: usize,
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub unpenalized_intercepts: bool,
    /// Stationarity certificate threshold.
    pub kkt_tol: f64,
    pub clamp: ClampBox,
    /// Scale columns to unit variance before solving (coefficients are
    /// mapped back afterwards).
    pub standardize: bool,
    /// Additional random restarts for cold fits; the best objective wins.
    pub extra_starts: usize,
    pub seed: u64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            lambda1: 0.0,
            lambda2: 0.0,
            tol: 1e-8,
            max_iter: 10_000,
            step_init: 1.0,
            backtrack_factor: 0.5,
            unpenalized_intercepts: false,
            kkt_tol: 1e-4,
            clamp: ClampBox::default(),
            standardize: false,
            extra_starts: 1,
            seed: 0,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::invalid("lambda1 and lambda2 must be >= 0"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be >= 1"));
        }
        if !(self.step_init > 0.0) {
            return Err(Error::invalid("step_init must be > 0"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::invalid("backtrack_factor must lie in (0, 1)"));
        }
        Ok(())
    }

    /// `lambda = lambda1 v lambda2` with block weights `lambda_j / lambda`.
    pub fn lambda_weights(&self) -> (f64, [f64; 2]) {
        let lambda = self.lambda1.max(self.lambda2);
        if lambda == 0.0 {
            (0.0, [0.0, 0.0])
        } else {
            (lambda, [self.lambda1 / lambda, self.lambda2 / lambda])
        }
    }

    pub fn with_lambdas(mut self, lambda1: f64, lambda2: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self
    }
}

/// A solved penalized problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub theta: Coefficients,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Free dispersion constant from `fit_constant_dispersion`.
    pub dispersion_intercept: Option<f64>,
    /// Objective spread across multi-start runs (0 for a single start).
    pub multistart_gap: f64,
}

/// Proximal map of `t * |.|`.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Two-block smooth problem with per-coordinate penalty levels. The blocks
/// may carry different designs (rescaling, constant dispersion).
struct Problem<'a> {
    x1: &'a [f64],
    p1: usize,
    x2: &'a [f64],
    p2: usize,
    y: &'a [u64],
    n: usize,
    order: &'a [u32],
    pen: Vec<f64>,
    clamp: ClampBox,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.p1 + self.p2
    }

    fn predictors(&self, th: &[f64], i: usize) -> (f64, f64, f64, f64) {
        let r1 = &self.x1[i * self.p1..(i + 1) * self.p1];
        let r2 = &self.x2[i * self.p2..(i + 1) * self.p2];
        let raw1 = model::dot(r1, &th[..self.p1]);
        let raw2 = model::dot(r2, &th[self.p1..]);
        (raw1, raw2, self.clamp.clamp(raw1), self.clamp.clamp(raw2))
    }

    fn smooth_loss(&self, th: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &i in self.order {
            let i = i as usize;
            let (_, _, s1, s2) = self.predictors(th, i);
            acc += model::row_loss(s1, s2, self.y[i]);
        }
        acc / self.n as f64
    }

    fn smooth_grad(&self, th: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for &i in self.order {
            let i = i as usize;
            let (raw1, raw2, s1, s2) = self.predictors(th, i);
            let (g1, g2) = model::row_grad_s(s1, s2, self.y[i]);
            if raw1 == s1 {
                let r1 = &self.x1[i * self.p1..(i + 1) * self.p1];
                for (j, &x) in r1.iter().enumerate() {
                    g[j] += g1 * x;
                }
            }
            if raw2 == s2 {
                let r2 = &self.x2[i * self.p2..(i + 1) * self.p2];
                for (j, &x) in r2.iter().enumerate() {
                    g[self.p1 + j] += g2 * x;
                }
            }
        }
        let inv_n = 1.0 / self.n as f64;
        for v in &mut g {
            *v *= inv_n;
        }
        g
    }

    fn penalty(&self, th: &[f64]) -> f64 {
        th.iter().zip(&self.pen).map(|(v, p)| p * v.abs()).sum()
    }

    fn kkt(&self, th: &[f64], g: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            let viol = if th[j] == 0.0 {
                (g[j].abs() - self.pen[j]).max(0.0)
            } else {
                (g[j] + self.pen[j] * th[j].signum()).abs()
            };
            worst = worst.max(viol);
        }
        worst
    }
}

struct SolveOut {
    th: Vec<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
    kkt_residual: f64,
}

fn prox_solve(pr: &Problem, init: &[f64], cfg: &PenaltyConfig) -> SolveOut {
    let dim = pr.dim();
    debug_assert_eq!(init.len(), dim);
    let mut th = init.to_vec();
    let mut l = pr.smooth_loss(&th);
    let mut g = pr.smooth_grad(&th);
    let mut obj = l + pr.penalty(&th);
    let mut t = cfg.step_init;
    let mut kkt = pr.kkt(&th, &g);
    let mut converged = kkt <= cfg.kkt_tol;
    let mut iterations = 0;

    if !converged {
        for iter in 1..=cfg.max_iter {
            iterations = iter;
            let mut th_new = vec![0.0; dim];
            let mut l_new;
            loop {
                for j in 0..dim {
                    th_new[j] = soft_threshold(th[j] - t * g[j], t * pr.pen[j]);
                }
                l_new = pr.smooth_loss(&th_new);
                let mut lin = 0.0;
                let mut quad = 0.0;
                for j in 0..dim {
                    let d = th_new[j] - th[j];
                    lin += g[j] * d;
                    quad += d * d;
                }
                if quad == 0.0 || l_new <= l + lin + quad / (2.0 * t) + 1e-12 * l.abs().max(1.0) {
                    break;
                }
                t *= cfg.backtrack_factor;
                if t < 1e-18 {
                    break;
                }
            }
            let obj_new = l_new + pr.penalty(&th_new);
            let rel = (obj - obj_new).abs() / obj.abs().max(1.0);
            th = th_new;
            l = l_new;
            obj = obj_new;
            g = pr.smooth_grad(&th);
            kkt = pr.kkt(&th, &g);
            if rel < cfg.tol && kkt <= cfg.kkt_tol {
                converged = true;
                break;
            }
            // Allow the step to recover after backtracking.
            t = (t * 1.25).min(cfg.step_init * 1e6);
        }
    }

    SolveOut {
        th,
        objective: obj,
        iterations,
        converged,
        kkt_residual: kkt,
    }
}

/// Column scales for the optional standardization (unit second moment about
/// the mean; constant columns are left untouched).
fn column_scales(x: &[f64], n: usize, p: usize) -> Vec<f64> {
    let mut scales = vec![1.0; p];
    for j in 0..p {
        let mean: f64 = (0..n).map(|i| x[i * p + j]).sum::<f64>() / n as f64;
        let var: f64 = (0..n).map(|i| (x[i * p + j] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd > 1e-12 {
            scales[j] = sd;
        }
    }
    scales
}

fn scaled_design(x: &[f64], n: usize, p: usize, scales: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    for i in 0..n {
        for j in 0..p {
            out[i * p + j] /= scales[j];
        }
    }
    out
}

fn with_intercept_column(x: &[f64], n: usize, p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (p + 1));
    for i in 0..n {
        out.push(1.0);
        out.extend_from_slice(&x[i * p..(i + 1) * p]);
    }
    out
}

struct PreparedDesign {
    x: Vec<f64>,
    p: usize,
    /// Per-coordinate divisor applied when mapping solved coefficients back.
    back_scale: Vec<f64>,
    penalized: Vec<bool>,
}

fn prepare_design(ds: &Dataset, cfg: &PenaltyConfig) -> PreparedDesign {
    let (n, p) = (ds.n(), ds.p());
    let scales = if cfg.standardize {
        column_scales(ds.x(), n, p)
    } else {
        vec![1.0; p]
    };
    let x = scaled_design(ds.x(), n, p, &scales);
    if cfg.unpenalized_intercepts {
        let x = with_intercept_column(&x, n, p);
        let mut back = vec![1.0];
        back.extend_from_slice(&scales);
        let mut pen = vec![false];
        pen.extend(std::iter::repeat(true).take(p));
        PreparedDesign {
            x,
            p: p + 1,
            back_scale: back,
            penalized: pen,
        }
    } else {
        PreparedDesign {
            x,
            p,
            back_scale: scales,
            penalized: vec![true; p],
        }
    }
}

fn penalty_vector(design: &PreparedDesign, lambda1: f64, lambda2: f64) -> Vec<f64> {
    let mut pen = Vec::with_capacity(2 * design.p);
    for &is_pen in &design.penalized {
        pen.push(if is_pen { lambda1 } else { 0.0 });
    }
    for &is_pen in &design.penalized {
        pen.push(if is_pen { lambda2 } else { 0.0 });
    }
    pen
}

fn random_start(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect()
}

fn run_starts(pr: &Problem, starts: &[Vec<f64>], cfg: &PenaltyConfig) -> (SolveOut, f64) {
    let mut best: Option<SolveOut> = None;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in starts {
        let out = prox_solve(pr, s, cfg);
        lo = lo.min(out.objective);
        hi = hi.max(out.objective);
        let better = match &best {
            None => true,
            Some(b) => out.objective < b.objective,
        };
        if better {
            best = Some(out);
        }
    }
    let gap = if starts.len() > 1 { hi - lo } else { 0.0 };
    (best.expect("at least one start"), gap)
}

fn finish(design: &PreparedDesign, out: SolveOut, gap: f64) -> Result<Solution> {
    let dp = design.p;
    let mut theta1 = out.th[..dp].to_vec();
    let mut theta2 = out.th[dp..].to_vec();
    for j in 0..dp {
        theta1[j] /= design.back_scale[j];
        theta2[j] /= design.back_scale[j];
    }
    if !out.objective.is_finite() {
        return Err(Error::Numeric("objective is not finite".into()));
    }
    Ok(Solution {
        theta: Coefficients::new(theta1, theta2)?,
        objective: out.objective,
        iterations: out.iterations,
        converged: out.converged,
        kkt_residual: out.kkt_residual,
        dispersion_intercept: None,
        multistart_gap: gap,
    })
}

/// Fit the double L1-penalized model, cold-started at zero (plus
/// `extra_starts` random restarts).
pub fn fit(ds: &Dataset, cfg: &PenaltyConfig) -> Result<Solution> {
    fit_warm(ds, cfg, None)
}

/// Fit with an optional warm start (used along the lambda grid).
/// Warm-started fits run a single start.
pub fn fit_warm(ds: &Dataset, cfg: &PenaltyConfig, warm: Option<&Coefficients>) -> Result<Solution> {
    cfg.validate()?;
    let design = prepare_design(ds, cfg);
    let pen = penalty_vector(&design, cfg.lambda1, cfg.lambda2);
    let pr = Problem {
        x1: &design.x,
        p1: design.p,
        x2: &design.x,
        p2: design.p,
        y: ds.y(),
        n: ds.n(),
        order: ds.canonical_order(),
        pen,
        clamp: cfg.clamp,
    };
    let starts = build_starts(&pr, &design, cfg, warm)?;
    let (out, gap) = run_starts(&pr, &starts, cfg);
    finish(&design, out, gap)
}

fn build_starts(
    pr: &Problem,
    design: &PreparedDesign,
    cfg: &PenaltyConfig,
    warm: Option<&Coefficients>,
) -> Result<Vec<Vec<f64>>> {
    let dim = pr.dim();
    match warm {
        Some(theta) => {
            if theta.p() != design.p {
                return Err(Error::dims(format!(
                    "warm start has {} coordinates per block, design has {}",
                    theta.p(),
                    design.p
                )));
            }
            // Warm starts are given in original coordinates.
            let mut th = theta.to_flat();
            for j in 0..design.p {
                th[j] *= design.back_scale[j];
                th[design.p + j] *= design.back_scale[j];
            }
            Ok(vec![th])
        }
        None => {
            let mut starts = vec![vec![0.0; dim]];
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for _ in 0..cfg.extra_starts {
                starts.push(random_start(&mut rng, dim));
            }
            Ok(starts)
        }
    }
}

/// Solve through the single-penalty reduction: scale the dispersion-block
/// covariates by `lambda1/lambda2`, penalize everything at `lambda1`, and
/// map the solved block back by `lambda1/lambda2`.
pub fn fit_rescaled(ds: &Dataset, cfg: &PenaltyConfig) -> Result<Solution> {
    cfg.validate()?;
    if cfg.lambda1 <= 0.0 || cfg.lambda2 <= 0.0 {
        return Err(Error::invalid(
            "fit_rescaled requires lambda1 > 0 and lambda2 > 0",
        ));
    }
    let design = prepare_design(ds, cfg);
    let ratio = cfg.lambda1 / cfg.lambda2;
    let x2: Vec<f64> = design.x.iter().map(|v| v * ratio).collect();
    let pen = penalty_vector(&design, cfg.lambda1, cfg.lambda1);
    let pr = Problem {
        x1: &design.x,
        p1: design.p,
        x2: &x2,
        p2: design.p,
        y: ds.y(),
        n: ds.n(),
        order: ds.canonical_order(),
        pen,
        clamp: cfg.clamp,
    };
    // Random starts are drawn in original theta space and mapped through the
    // bijection so both solver paths explore equivalent initializations.
    let dim = pr.dim();
    let mut starts = vec![vec![0.0; dim]];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.extra_starts {
        let mut s = random_start(&mut rng, dim);
        for v in &mut s[design.p..] {
            *v /= ratio; // theta3 = (lambda2/lambda1) * theta2
        }
        starts.push(s);
    }
    let (mut out, gap) = run_starts(&pr, &starts, cfg);
    // Map theta3 back: theta2 = (lambda1/lambda2) * theta3, the inverse of
    // the start-space substitution above.
    for v in &mut out.th[design.p..] {
        *v *= ratio;
    }
    // Report objective and stationarity in the original parameterization.
    let pen = penalty_vector(&design, cfg.lambda1, cfg.lambda2);
    let pr_orig = Problem {
        x1: &design.x,
        p1: design.p,
        x2: &design.x,
        p2: design.p,
        y: ds.y(),
        n: ds.n(),
        order: ds.canonical_order(),
        pen,
        clamp: cfg.clamp,
    };
    let l = pr_orig.smooth_loss(&out.th);
    let g = pr_orig.smooth_grad(&out.th);
    out.kkt_residual = pr_orig.kkt(&out.th, &g);
    out.objective = l + pr_orig.penalty(&out.th);
    finish(&design, out, gap)
}

/// Constant-dispersion baseline: the dispersion block is a single free
/// unpenalized scalar; the mean block is penalized with `lambda1` as usual.
pub fn fit_constant_dispersion(ds: &Dataset, cfg: &PenaltyConfig) -> Result<Solution> {
    cfg.validate()?;
    let design = prepare_design(ds, cfg);
    let ones = vec![1.0; ds.n()];
    let mut pen: Vec<f64> = design
        .penalized
        .iter()
        .map(|&b| if b { cfg.lambda1 } else { 0.0 })
        .collect();
    pen.push(0.0); // the free dispersion constant
    let pr = Problem {
        x1: &design.x,
        p1: design.p,
        x2: &ones,
        p2: 1,
        y: ds.y(),
        n: ds.n(),
        order: ds.canonical_order(),
        pen,
        clamp: cfg.clamp,
    };
    let dim = pr.dim();
    let mut starts = vec![vec![0.0; dim]];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.extra_starts {
        starts.push(random_start(&mut rng, dim));
    }
    let (out, gap) = run_starts(&pr, &starts, cfg);
    if !out.objective.is_finite() {
        return Err(Error::Numeric("objective is not finite".into()));
    }
    let c = out.th[design.p];
    let mut theta1 = out.th[..design.p].to_vec();
    for j in 0..design.p {
        theta1[j] /= design.back_scale[j];
    }
    let mut theta2 = vec![0.0; design.p];
    if cfg.unpenalized_intercepts {
        theta2[0] = c;
    }
    Ok(Solution {
        theta: Coefficients::new(theta1, theta2)?,
        objective: out.objective,
        iterations: out.iterations,
        converged: out.converged,
        kkt_residual: out.kkt_residual,
        dispersion_intercept: Some(c),
        multistart_gap: gap,
    })
}

/// Maximal violation of the subgradient optimality conditions of the
/// double-penalty problem at `theta`; 0 iff exactly stationary.
pub fn kkt_residual(ds: &Dataset, theta: &Coefficients, cfg: &PenaltyConfig) -> Result<f64> {
    cfg.validate()?;
    let g = model::grad(ds, theta, &cfg.clamp)?;
    let p = ds.p();
    let flat = theta.to_flat();
    let mut worst = 0.0f64;
    for j in 0..2 * p {
        let lam = if j < p { cfg.lambda1 } else { cfg.lambda2 };
        let viol = if flat[j] == 0.0 {
            (g[j].abs() - lam).max(0.0)
        } else {
            (g[j] + lam * flat[j].signum()).abs()
        };
        worst = worst.max(viol);
    }
    Ok(worst)
}
