//! Gaussian-process refinement of VQE parameters and regularizer selection.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vqe::{brent_minimize, OptHistory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// Matern with smoothness `nu = p + 1/2`; stores `p`.
    Matern { p: u32 },
    SquaredExponential,
}

impl KernelFamily {
    /// Half-integer smoothness up to 11/2.
    pub fn matern(nu: f64) -> Result<Self> {
        let p = nu - 0.5;
        if (p - p.round()).abs() > 1e-12 || !(0.0..=5.0).contains(&p.round()) {
            return Err(Error::Invalid(format!("Matern smoothness {nu} is not one of 1/2, 3/2, ..., 11/2")));
        }
        Ok(KernelFamily::Matern { p: p.round() as u32 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub family: KernelFamily,
    pub length_scale: f64,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Closed-form Matern kernel for `nu = p + 1/2`.
pub fn matern_eval(nu: f64, l: f64, r: f64) -> Result<f64> {
    let KernelFamily::Matern { p } = KernelFamily::matern(nu)? else { unreachable!() };
    if r < 0.0 || l <= 0.0 {
        return Err(Error::Invalid(format!("need r >= 0 and l > 0, got r = {r}, l = {l}")));
    }
    Ok(matern_half_integer(p, r / l))
}

fn matern_half_integer(p: u32, s: f64) -> f64 {
    let z = (2.0 * p as f64 + 1.0).sqrt() * s;
    let mut poly = 0.0;
    for i in 0..=p {
        poly += factorial(p + i) / (factorial(i) * factorial(p - i)) * (2.0 * z).powi((p - i) as i32);
    }
    (-z).exp() * factorial(p) / factorial(2 * p) * poly
}

impl Kernel {
    pub fn eval_distance(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Matern { p } => matern_half_integer(p, r / self.length_scale),
            KernelFamily::SquaredExponential => (-r * r / self.length_scale).exp(),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.eval_distance(distance(a, b))
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Zero-mean, unit-amplitude GP with observation noise `lambda`.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub kernel: Kernel,
    pub lambda: f64,
    /// Constant prior mean subtracted from the targets (0 for the plain model).
    pub prior_mean: f64,
    x: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    y: DVector<f64>,
}

impl GpModel {
    pub fn new(kernel: Kernel, lambda: f64, x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        Self::with_prior_mean(kernel, lambda, x, y, 0.0)
    }

    pub fn with_prior_mean(kernel: Kernel, lambda: f64, x: Vec<Vec<f64>>, y: Vec<f64>, prior_mean: f64) -> Result<Self> {
        let n = x.len();
        if n == 0 || n != y.len() {
            return Err(Error::Invalid(format!("GP needs matching nonempty data, got {n} points and {} values", y.len())));
        }
        let d = x[0].len();
        if x.iter().any(|t| t.len() != d) {
            return Err(Error::Invalid("GP inputs have mixed dimensions".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Invalid(format!("regularizer {lambda} must be non-negative")));
        }
        let k = DMatrix::from_fn(n, n, |i, j| kernel.eval(&x[i], &x[j]));
        let mut chol = None;
        for jitter in [0.0, 1e-12, 1e-11, 1e-10] {
            let mut m = k.clone();
            for i in 0..n {
                m[(i, i)] += lambda + jitter;
            }
            if let Some(c) = Cholesky::new(m) {
                chol = Some(c);
                break;
            }
        }
        let chol = chol.ok_or_else(|| {
            Error::Numerical(format!(
                "kernel matrix with {n} points is not positive definite even with 1e-10 jitter (lambda = {lambda:e})"
            ))
        })?;
        let y = DVector::from_iterator(n, y.into_iter().map(|v| v - prior_mean));
        let alpha = chol.solve(&y);
        Ok(Self { kernel, lambda, prior_mean, x, chol, alpha, y })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    fn k_vec(&self, theta: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.x.iter().map(|xi| self.kernel.eval(xi, theta)))
    }

    /// Posterior mean and standard deviation.
    pub fn posterior(&self, theta: &[f64]) -> Result<(f64, f64)> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: theta.len() });
        }
        let k = self.k_vec(theta);
        let mu = k.dot(&self.alpha) + self.prior_mean;
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let var = (1.0 - v.norm_squared()).max(0.0);
        Ok((mu, var.sqrt()))
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.n() as f64;
        let log_det: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * self.y.dot(&self.alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

pub const LENGTH_GRID_POINTS: usize = 32;

/// Parameters are angles; longer length scales than half a period are not
/// identifiable from the data and extrapolate badly.
pub const MAX_LENGTH_SCALE: f64 = std::f64::consts::PI;

/// Candidate length scales: log grid over `[1e-2, 1e2]` times the median
/// nonzero pairwise distance, capped at [`MAX_LENGTH_SCALE`].
pub fn length_scale_grid(x: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut dists = Vec::new();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let r = distance(&x[i], &x[j]);
            if r > 0.0 {
                dists.push(r);
            }
        }
    }
    if dists.is_empty() {
        return Err(Error::Invalid("all parameter vectors are identical".into()));
    }
    dists.sort_by(f64::total_cmp);
    let median = dists[dists.len() / 2];
    let n = LENGTH_GRID_POINTS;
    let (lo, hi) = ((median * 1e-2).ln(), (median * 1e2).min(MAX_LENGTH_SCALE).max(median * 1e-2).ln());
    Ok((0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect())
}

/// Grid-search maximum of the log marginal likelihood over the length scale.
pub fn fit_kernel_hyperparams(x: &[Vec<f64>], y: &[f64], family: KernelFamily, lambda: f64, prior_mean: f64) -> Result<Kernel> {
    if x.len() < 3 {
        return Err(Error::Invalid(format!("need at least 3 points to fit a kernel, got {}", x.len())));
    }
    let grid = length_scale_grid(x)?;
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|&l| {
            GpModel::with_prior_mean(Kernel { family, length_scale: l }, lambda, x.to_vec(), y.to_vec(), prior_mean)
                .map(|m| m.log_marginal_likelihood())
                .unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    let (best, score) = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    if !score.is_finite() {
        return Err(Error::Numerical("no length scale gave a usable kernel matrix".into()));
    }
    Ok(Kernel { family, length_scale: grid[best] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementConfig {
    pub c: f64,
    /// Per-coordinate bounds; `None` means [`explored_box`].
    pub search_domain: Option<Vec<(f64, f64)>>,
    pub candidate_count: usize,
    pub polish_steps: usize,
    /// Subtract the mean of the observed values before fitting.
    pub center: bool,
    pub seed: u64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self { c: 1.0, search_domain: None, candidate_count: 200, polish_steps: 50, center: true, seed: 0 }
    }
}

impl RefinementConfig {
    fn domain(&self, x: &[Vec<f64>], d: usize) -> Result<Vec<(f64, f64)>> {
        if !(self.c > 0.0) {
            return Err(Error::Invalid(format!("threshold c = {} must be positive", self.c)));
        }
        let dom = match &self.search_domain {
            Some(dom) => dom.clone(),
            None => explored_box(x, d),
        };
        if dom.len() != d {
            return Err(Error::Dimension { expected: d, got: dom.len() });
        }
        if dom.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::Invalid("search domain is empty".into()));
        }
        Ok(dom)
    }
}

/// Bounding box of the visited parameters within `[-pi, pi]^d`. The
/// variance cap alone does not keep the search near the data once `c`
/// reaches the prior standard deviation.
pub fn explored_box(x: &[Vec<f64>], d: usize) -> Vec<(f64, f64)> {
    let pi = std::f64::consts::PI;
    (0..d)
        .map(|i| {
            let lo = x.iter().map(|t| t[i]).fold(f64::INFINITY, f64::min).max(-pi);
            let hi = x.iter().map(|t| t[i]).fold(f64::NEG_INFINITY, f64::max).min(pi);
            if lo <= hi {
                (lo, hi)
            } else {
                (-pi, pi)
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub theta: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub kernel: Kernel,
}

fn inside(theta: &[f64], dom: &[(f64, f64)]) -> bool {
    theta.iter().zip(dom).all(|(t, (lo, hi))| t >= lo && t <= hi)
}

/// Fits the surrogate to the history and minimises its mean subject to
/// `sigma <= c` inside the search domain.
pub fn refine_parameters(history: &OptHistory, family: KernelFamily, lambda: f64, cfg: &RefinementConfig) -> Result<Refinement> {
    let (x, y) = history.data();
    if x.is_empty() {
        return Err(Error::Invalid("history is empty".into()));
    }
    let d = history.dim();
    let dom = cfg.domain(&x, d)?;
    let offset = if cfg.center { y.iter().sum::<f64>() / y.len() as f64 } else { 0.0 };
    let kernel = fit_kernel_hyperparams(&x, &y, family, lambda, offset)?;
    let gp = GpModel::with_prior_mean(kernel, lambda, x.clone(), y.clone(), offset)?;
    let radius = kernel.length_scale / 2.0;

    let mut candidates: Vec<Vec<f64>> = x.iter().filter(|t| inside(t, &dom)).cloned().collect();
    let mut order: Vec<usize> = (0..x.len()).filter(|&i| inside(&x[i], &dom)).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    order.truncate(10);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if !order.is_empty() && d > 0 {
        for k in 0..cfg.candidate_count {
            let base = &x[order[k % order.len()]];
            let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
            candidates.push(
                base.iter()
                    .zip(&dir)
                    .zip(&dom)
                    .map(|((b, u), (lo, hi))| (b + r * u / norm).clamp(*lo, *hi))
                    .collect(),
            );
        }
    }

    let scored: Vec<(Vec<f64>, f64, f64)> = candidates
        .into_par_iter()
        .map(|t| gp.posterior(&t).map(|(m, s)| (t, m, s)))
        .collect::<Result<Vec<_>>>()?;
    let (mut theta, mut mu, mut sigma) = scored
        .into_iter()
        .filter(|(_, _, s)| *s <= cfg.c)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::Infeasible { c: cfg.c })?;

    for step in 0..cfg.polish_steps {
        if d == 0 {
            break;
        }
        let i = step % d;
        let lo = (theta[i] - radius).max(dom[i].0);
        let hi = (theta[i] + radius).min(dom[i].1);
        if hi <= lo {
            continue;
        }
        let mut probe = theta.clone();
        let (t, m) = brent_minimize(
            |v| {
                probe[i] = v;
                let (m, s) = gp.posterior(&probe)?;
                Ok(if s <= cfg.c { m } else { f64::INFINITY })
            },
            lo,
            hi,
            1e-8,
            60,
        )?;
        if m < mu {
            let mut next = theta.clone();
            next[i] = t;
            let (m2, s2) = gp.posterior(&next)?;
            if s2 <= cfg.c && m2 < mu {
                theta = next;
                mu = m2;
                sigma = s2;
            }
        }
    }
    Ok(Refinement { theta, mu, sigma, kernel })
}

#[derive(Debug, Clone)]
pub struct RegularizerChoice {
    pub lambda: f64,
    /// Score per candidate, in input order (lower is better).
    pub scores: Vec<(f64, f64)>,
    pub refinements: Vec<Refinement>,
}

/// Picks the regularizer whose refined parameters re-measure lowest. The
/// extra-evaluation budget is split evenly (remainder to the first entries).
pub fn select_regularizer_reeval<F>(
    history: &OptHistory,
    lambdas: &[f64],
    budget: usize,
    family: KernelFamily,
    cfg: &RefinementConfig,
    mut objective: F,
) -> Result<RegularizerChoice>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if lambdas.is_empty() {
        return Err(Error::Invalid("regularizer candidate set is empty".into()));
    }
    if budget < lambdas.len() {
        return Err(Error::Invalid(format!("budget {budget} is smaller than the {} candidates", lambdas.len())));
    }
    let base = budget / lambdas.len();
    let extra = budget % lambdas.len();
    let mut scores = Vec::new();
    let mut refinements = Vec::new();
    for (k, &lambda) in lambdas.iter().enumerate() {
        let r = refine_parameters(history, family, lambda, cfg)?;
        let reps = base + usize::from(k < extra);
        let mut total = 0.0;
        for _ in 0..reps {
            total += objective(&r.theta)?;
        }
        scores.push((lambda, total / reps as f64));
        refinements.push(r);
    }
    let best = scores.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty").0;
    Ok(RegularizerChoice { lambda: best, scores, refinements })
}

/// Least-squares fit of `p sin t + q cos t + b`; returns `(p, q, b)`.
pub fn fit_sine(t: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if t.len() < 4 || t.len() != y.len() {
        return Err(Error::Invalid(format!("sine fit needs at least 4 points, got {}", t.len())));
    }
    let a = DMatrix::from_fn(t.len(), 3, |i, j| match j {
        0 => t[i].sin(),
        1 => t[i].cos(),
        _ => 1.0,
    });
    let rhs = DVector::from_column_slice(y);
    let sol = a
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((sol[0], sol[1], sol[2]))
}

/// Selects the regularizer whose surrogate is best described by a sinusoid
/// along coordinate `coord` around `theta_tilde`, scored on an independent
/// validation sample.
#[allow(clippy::too_many_arguments)]
pub fn select_regularizer_sinefit(
    history: &OptHistory,
    lambdas: &[f64],
    theta_tilde: &[f64],
    coord: usize,
    m: usize,
    family: KernelFamily,
    center: bool,
    seed: u64,
) -> Result<RegularizerChoice> {
    if m < 4 {
        return Err(Error::Invalid(format!("sine fit needs m >= 4 points, got {m}")));
    }
    if lambdas.is_empty() {
        return Err(Error::Invalid("regularizer candidate set is empty".into()));
    }
    let d = history.dim();
    if d == 0 || coord >= d || theta_tilde.len() != d {
        return Err(Error::Invalid(format!("coordinate {coord} is not valid for dimension {d}")));
    }
    let (x, y) = history.data();
    if x.is_empty() {
        return Err(Error::Invalid("history is empty".into()));
    }
    let offset = if center { y.iter().sum::<f64>() / y.len() as f64 } else { 0.0 };
    let pi = std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<f64> {
        (0..m)
            .map(|_| theta_tilde[coord] + rng.random_range(-pi..pi))
            .collect()
    };
    let fit_t = draw();
    let val_t = draw();

    let scores = lambdas
        .par_iter()
        .map(|&lambda| {
            let kernel = fit_kernel_hyperparams(&x, &y, family, lambda, offset)?;
            let gp = GpModel::with_prior_mean(kernel, lambda, x.clone(), y.clone(), offset)?;
            let surrogate = |t: f64| {
                let mut th = theta_tilde.to_vec();
                th[coord] = t;
                gp.posterior(&th).map(|(mu, _)| mu)
            };
            let fit_y = fit_t.iter().map(|&t| surrogate(t)).collect::<Result<Vec<_>>>()?;
            let (p, q, b) = fit_sine(&fit_t, &fit_y)?;
            let mut err = 0.0;
            for &t in &val_t {
                let r = surrogate(t)? - (p * t.sin() + q * t.cos() + b);
                err += r * r;
            }
            Ok((lambda, err / m as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = scores.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty").0;
    Ok(RegularizerChoice { lambda: best, scores, refinements: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vqe::EvalKind;

    fn history_from(points: &[(Vec<f64>, f64)]) -> OptHistory {
        let mut h = OptHistory::new(points[0].0.len());
        for (i, (t, y)) in points.iter().enumerate() {
            h.push(i, EvalKind::Iterate, t, *y).unwrap();
        }
        h
    }

    #[test]
    fn matern_limits() {
        for r in [0.0, 0.3, 2.0] {
            assert!((matern_eval(0.5, 1.3, r).unwrap() - (-r / 1.3f64).exp()).abs() < 1e-15);
        }
        for nu in [0.5, 1.5, 2.5, 3.5, 4.5, 5.5] {
            assert!((matern_eval(nu, 0.7, 0.0).unwrap() - 1.0).abs() < 1e-15);
        }
        // nu = 3/2 textbook form.
        let (l, r) = (0.8, 0.5);
        let z = 3f64.sqrt() * r / l;
        assert!((matern_eval(1.5, l, r).unwrap() - (1.0 + z) * (-z).exp()).abs() < 1e-15);
        assert!(matern_eval(2.0, 1.0, 0.1).is_err());
        assert!(matern_eval(6.5, 1.0, 0.1).is_err());
    }

    #[test]
    fn single_point_posterior() {
        let k = Kernel { family: KernelFamily::Matern { p: 5 }, length_scale: 0.5 };
        let lambda = 1e-4;
        let gp = GpModel::new(k, lambda, vec![vec![0.2, -0.1]], vec![-1.7]).unwrap();
        let (mu, s) = gp.posterior(&[0.2, -0.1]).unwrap();
        assert!((mu - -1.7 / (1.0 + lambda)).abs() < 1e-12);
        assert!((s * s - lambda / (1.0 + lambda)).abs() < 1e-12);
        let (far_mu, far_s) = gp.posterior(&[30.0, 30.0]).unwrap();
        assert!(far_mu.abs() < 1e-12 && (far_s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_identical_points() {
        let x = vec![vec![0.1]; 4];
        assert!(fit_kernel_hyperparams(&x, &[1.0; 4], KernelFamily::SquaredExponential, 1e-4, 0.0).is_err());
    }

    #[test]
    fn refinement_respects_threshold_and_domain() {
        let pts: Vec<(Vec<f64>, f64)> = (0..30)
            .map(|i| {
                let t = -1.0 + i as f64 * 0.07;
                (vec![t], (t - 0.3).powi(2))
            })
            .collect();
        let h = history_from(&pts);
        let cfg = RefinementConfig { c: 0.05, search_domain: Some(vec![(-0.5, 0.2)]), ..Default::default() };
        let r = refine_parameters(&h, KernelFamily::matern(5.5).unwrap(), 1e-6, &cfg).unwrap();
        assert!(r.sigma <= cfg.c);
        assert!(r.theta[0] >= -0.5 && r.theta[0] <= 0.2);
        assert!((r.theta[0] - 0.2).abs() < 1e-3, "{:?}", r.theta);
    }

    #[test]
    fn default_domain_is_the_visited_box() {
        let x = vec![vec![-0.4, 5.0], vec![0.3, 4.0], vec![0.1, 3.5]];
        assert_eq!(explored_box(&x, 2), vec![(-0.4, 0.3), (-std::f64::consts::PI, std::f64::consts::PI)]);

        // A linear trend would pull an unbounded search to the edge of [-pi, pi].
        let pts: Vec<(Vec<f64>, f64)> = (0..20).map(|i| (vec![-0.5 + 0.05 * i as f64], -0.2 * i as f64)).collect();
        let r = refine_parameters(&history_from(&pts), KernelFamily::matern(5.5).unwrap(), 1e-4, &Default::default()).unwrap();
        assert!(r.theta[0] <= 0.45 + 1e-12, "{:?}", r.theta);
    }

    #[test]
    fn length_scales_stop_at_half_a_period() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.3]).collect();
        let grid = length_scale_grid(&x).unwrap();
        assert_eq!(grid.len(), LENGTH_GRID_POINTS);
        assert!((grid[grid.len() - 1] - MAX_LENGTH_SCALE).abs() < 1e-12);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sine_fit_recovers_exact_sinusoid() {
        let t: Vec<f64> = (0..7).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|v| 0.3 * (v + 0.4).sin() - 1.0).collect();
        let (p, q, b) = fit_sine(&t, &y).unwrap();
        assert!((p - 0.3 * 0.4f64.cos()).abs() < 1e-12);
        assert!((q - 0.3 * 0.4f64.sin()).abs() < 1e-12);
        assert!((b + 1.0).abs() < 1e-12);
        assert!(fit_sine(&t[..3], &y[..3]).is_err());
    }

    #[test]
    fn reeval_accounting_and_singleton() {
        let pts: Vec<(Vec<f64>, f64)> = (0..12).map(|i| (vec![i as f64 * 0.1], (i as f64 * 0.1).sin())).collect();
        let h = history_from(&pts);
        let mut calls = 0;
        let fam = KernelFamily::SquaredExponential;
        let cfg = RefinementConfig::default();
        let r = select_regularizer_reeval(&h, &[1e-3], 5, fam, &cfg, |t| {
            calls += 1;
            Ok(t[0].sin())
        })
        .unwrap();
        assert_eq!(r.lambda, 1e-3);
        assert_eq!(calls, 5);
        calls = 0;
        select_regularizer_reeval(&h, &[1e-6, 1e-3, 1e-1], 7, fam, &cfg, |t| {
            calls += 1;
            Ok(t[0])
        })
        .unwrap();
        assert_eq!(calls, 7);
        assert!(select_regularizer_reeval(&h, &[], 7, fam, &cfg, |_| Ok(0.0)).is_err());
    }
}
