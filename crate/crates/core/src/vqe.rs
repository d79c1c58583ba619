//! VQE driver: SPSA for noisy objectives, coordinate-wise line search for
//! noiseless ones, and the evaluation history consumed by `refine`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuits::Circuit;
use crate::error::{Error, Result};
use crate::operators::PauliSum;
use crate::simulator::{mix_seed, Backend, EnergyEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalKind {
    /// Gain calibration before the first SPSA step.
    Calibration,
    Plus,
    Minus,
    /// The current SPSA iterate itself.
    Iterate,
    /// Point probed by the coordinate-wise optimizer.
    Line,
    /// Re-evaluation at the returned parameters.
    Final,
}

impl EvalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalKind::Calibration => "calibration",
            EvalKind::Plus => "plus",
            EvalKind::Minus => "minus",
            EvalKind::Iterate => "iterate",
            EvalKind::Line => "line",
            EvalKind::Final => "final",
        }
    }
}

impl fmt::Display for EvalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "calibration" => EvalKind::Calibration,
            "plus" => EvalKind::Plus,
            "minus" => EvalKind::Minus,
            "iterate" => EvalKind::Iterate,
            "line" => EvalKind::Line,
            "final" => EvalKind::Final,
            other => return Err(Error::Invalid(format!("unknown evaluation kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub iteration: usize,
    pub kind: EvalKind,
    pub y: f64,
    pub theta: Vec<f64>,
}

/// Every objective evaluation in call order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptHistory {
    d: usize,
    pub records: Vec<Record>,
}

impl OptHistory {
    pub fn new(d: usize) -> Self {
        Self { d, records: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, iteration: usize, kind: EvalKind, theta: &[f64], y: f64) -> Result<()> {
        if theta.len() != self.d {
            return Err(Error::Dimension { expected: self.d, got: theta.len() });
        }
        self.records.push(Record { iteration, kind, y, theta: theta.to_vec() });
        Ok(())
    }

    /// Lowest-y record among those of `kind`.
    pub fn best_of(&self, kind: EvalKind) -> Option<&Record> {
        self.records
            .iter()
            .filter(|r| r.kind == kind)
            .min_by(|a, b| a.y.total_cmp(&b.y))
    }

    pub fn best(&self) -> Option<&Record> {
        self.records.iter().min_by(|a, b| a.y.total_cmp(&b.y))
    }

    /// Training pairs for the surrogate, excluding final re-evaluations.
    pub fn data(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.records
            .iter()
            .filter(|r| r.kind != EvalKind::Final)
            .map(|r| (r.theta.clone(), r.y))
            .unzip()
    }

    /// Columns: iteration, kind, y, theta_0 .. theta_{d-1}.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["iteration".to_string(), "kind".into(), "y".into()];
        header.extend((0..self.d).map(|i| format!("theta_{i}")));
        out.write_record(&header).map_err(csv_error)?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string(), r.kind.to_string(), format!("{:e}", r.y)];
            row.extend(r.theta.iter().map(|t| format!("{t:e}")));
            out.write_record(&row).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let header = reader.headers().map_err(csv_error)?.clone();
        if header.len() < 3 || &header[0] != "iteration" || &header[1] != "kind" || &header[2] != "y" {
            return Err(Error::Format { line: 1, msg: "expected header `iteration,kind,y,theta_...`".into() });
        }
        let mut h = OptHistory::new(header.len() - 3);
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(csv_error)?;
            let line = i + 2;
            let bad = |msg: String| Error::Format { line, msg };
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
            let iteration = row[0].trim().parse().map_err(|_| bad(format!("bad iteration `{}`", &row[0])))?;
            let kind = row[1].trim().parse()?;
            let y = num(&row[2])?;
            let theta = row.iter().skip(3).map(num).collect::<Result<Vec<_>>>()?;
            h.push(iteration, kind, &theta, y)?;
        }
        Ok(h)
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Format { line, msg: e.to_string() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpsaConfig {
    /// `None` calibrates `a` so that the first step has magnitude `target_step`.
    pub a: Option<f64>,
    pub c: f64,
    /// Stability constant; `None` means `iterations / 10`.
    pub big_a: Option<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub target_step: f64,
    pub calibration_samples: usize,
    /// Treat parameters as angles and keep iterates in `[-pi, pi)`.
    pub wrap_angles: bool,
    pub seed: u64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            a: None,
            c: 0.1,
            big_a: None,
            alpha: 0.602,
            gamma: 0.101,
            iterations: 200,
            target_step: 0.1,
            calibration_samples: 10,
            wrap_angles: true,
            seed: 0,
        }
    }
}

impl SpsaConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c > 0.0
            && self.a.is_none_or(|a| a > 0.0)
            && self.alpha > 0.0
            && self.alpha <= 1.0
            && self.gamma > 0.0
            && self.gamma <= 1.0
            && self.iterations >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid SPSA configuration {self:?}")))
        }
    }
}

/// Objective wrapper that records every evaluation and rejects non-finite values.
struct Recorder<'a, F> {
    f: &'a mut F,
    history: OptHistory,
    count: u64,
}

impl<F> Recorder<'_, F>
where
    F: FnMut(&[f64], u64) -> Result<f64>,
{
    fn eval(&mut self, theta: &[f64], iteration: usize, kind: EvalKind) -> Result<f64> {
        let y = (self.f)(theta, self.count)?;
        self.count += 1;
        if !y.is_finite() {
            return Err(Error::NonFinite {
                evaluation: self.history.len(),
                partial: Box::new(std::mem::take(&mut self.history)),
            });
        }
        self.history.push(iteration, kind, theta, y)?;
        Ok(y)
    }
}

/// Maps an angle into `[-pi, pi)`.
pub fn wrap_angle(t: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    (t + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

fn rademacher(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

fn shifted(theta: &[f64], delta: &[f64], scale: f64) -> Vec<f64> {
    theta.iter().zip(delta).map(|(t, d)| t + scale * d).collect()
}

/// Simultaneous-perturbation stochastic approximation. The objective gets
/// the evaluation counter so it can derive its own shot seed. Returns the
/// best iterate (lowest recorded iterate value) and the full history.
pub fn spsa_minimize<F>(mut objective: F, theta0: &[f64], cfg: &SpsaConfig) -> Result<(Vec<f64>, OptHistory)>
where
    F: FnMut(&[f64], u64) -> Result<f64>,
{
    cfg.validate()?;
    let d = theta0.len();
    let mut rec = Recorder { f: &mut objective, history: OptHistory::new(d), count: 0 };
    if d == 0 {
        rec.eval(theta0, 0, EvalKind::Iterate)?;
        return Ok((Vec::new(), rec.history));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let big_a = cfg.big_a.unwrap_or(cfg.iterations as f64 / 10.0);

    let a = match cfg.a {
        Some(a) => a,
        None => {
            let mut total = 0.0;
            for _ in 0..cfg.calibration_samples.max(1) {
                let delta = rademacher(&mut rng, d);
                let yp = rec.eval(&shifted(theta0, &delta, cfg.c), 0, EvalKind::Calibration)?;
                let ym = rec.eval(&shifted(theta0, &delta, -cfg.c), 0, EvalKind::Calibration)?;
                total += ((yp - ym) / (2.0 * cfg.c)).abs();
            }
            let mean = total / cfg.calibration_samples.max(1) as f64;
            if mean > 1e-12 {
                cfg.target_step * (big_a + 1.0).powf(cfg.alpha) / mean
            } else {
                cfg.target_step
            }
        }
    };

    let mut theta = theta0.to_vec();
    for k in 0..cfg.iterations {
        let ck = cfg.c / ((k + 1) as f64).powf(cfg.gamma);
        let ak = a / ((k + 1) as f64 + big_a).powf(cfg.alpha);
        rec.eval(&theta, k, EvalKind::Iterate)?;
        let delta = rademacher(&mut rng, d);
        let yp = rec.eval(&shifted(&theta, &delta, ck), k, EvalKind::Plus)?;
        let ym = rec.eval(&shifted(&theta, &delta, -ck), k, EvalKind::Minus)?;
        let slope = (yp - ym) / (2.0 * ck);
        for (t, dl) in theta.iter_mut().zip(&delta) {
            *t -= ak * slope * dl;
            if cfg.wrap_angles {
                *t = wrap_angle(*t);
            }
        }
    }
    rec.eval(&theta, cfg.iterations, EvalKind::Iterate)?;
    let best = rec
        .history
        .best_of(EvalKind::Iterate)
        .map(|r| r.theta.clone())
        .unwrap_or(theta);
    Ok((best, rec.history))
}

/// Brent minimisation of `f` on `[a, b]`.
pub fn brent_minimize(mut f: impl FnMut(f64) -> Result<f64>, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<(f64, f64)> {
    const GOLD: f64 = 0.381_966_011_250_105;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = xtol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else if d > 0.0 { x + tol1 } else { x - tol1 };
        let fu = f(u)?;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok((x, fx))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialConfig {
    pub max_sweeps: usize,
    /// Stop when a sweep improves the objective by less than this.
    pub ftol: f64,
    /// Coarse samples per coordinate over one period before the line search.
    pub grid_points: usize,
}

impl Default for SequentialConfig {
    fn default() -> Self {
        Self { max_sweeps: 40, ftol: 1e-10, grid_points: 12 }
    }
}

/// Coordinate-wise sequential minimisation for deterministic objectives.
pub fn sequential_minimize<F>(mut objective: F, theta0: &[f64], cfg: &SequentialConfig) -> Result<(Vec<f64>, OptHistory)>
where
    F: FnMut(&[f64], u64) -> Result<f64>,
{
    let d = theta0.len();
    let mut rec = Recorder { f: &mut objective, history: OptHistory::new(d), count: 0 };
    let mut theta = theta0.to_vec();
    let mut best = rec.eval(&theta, 0, EvalKind::Line)?;
    if d == 0 {
        return Ok((theta, rec.history));
    }
    let period = 2.0 * std::f64::consts::PI;
    for sweep in 0..cfg.max_sweeps {
        let start = best;
        for i in 0..d {
            let origin = theta[i];
            let n = cfg.grid_points.max(3);
            let step = period / n as f64;
            let mut grid = vec![(0.0, best)];
            for j in 1..n {
                let off = if j <= n / 2 { j as f64 * step } else { (j as f64 - n as f64) * step };
                theta[i] = origin + off;
                grid.push((off, rec.eval(&theta, sweep, EvalKind::Line)?));
            }
            let (off, _) = *grid.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("grid is nonempty");
            let (x, fx) = brent_minimize(
                |t| {
                    let mut th = theta.clone();
                    th[i] = origin + t;
                    rec.eval(&th, sweep, EvalKind::Line)
                },
                off - step,
                off + step,
                1e-9,
                100,
            )?;
            let best_grid = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
            if fx <= best_grid {
                theta[i] = origin + x;
                best = fx;
            } else {
                theta[i] = origin + off;
                best = best_grid;
            }
        }
        if start - best < cfg.ftol {
            break;
        }
    }
    Ok((theta, rec.history))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Spsa(SpsaConfig),
    Sequential(SequentialConfig),
}

#[derive(Debug, Clone)]
pub struct VqeResult {
    pub theta: Vec<f64>,
    pub energy: f64,
    pub history: OptHistory,
    /// Circuit executions spent on shot-based estimates.
    pub executions: usize,
}

/// Minimises the estimated energy of `ansatz` and re-evaluates it at the
/// best parameters found.
pub fn run_vqe(
    h: &PauliSum,
    ansatz: &Circuit,
    backend: &Backend,
    optimizer: &Optimizer,
    theta0: Option<&[f64]>,
    seed: u64,
) -> Result<VqeResult> {
    if ansatz.n_qubits() != h.n_qubits() {
        return Err(Error::Dimension { expected: h.n_qubits(), got: ansatz.n_qubits() });
    }
    let d = ansatz.parameter_count();
    let start = match theta0 {
        Some(t) if t.len() == d => t.to_vec(),
        Some(t) => return Err(Error::Dimension { expected: d, got: t.len() }),
        None => vec![0.0; d],
    };
    let estimator = EnergyEstimator::new(h.clone(), backend.clone());
    let mut executions = 0usize;
    let mut objective = |theta: &[f64], count: u64| -> Result<f64> {
        let e = estimator.estimate(&ansatz.bind(theta)?, mix_seed(seed, count))?;
        executions += e.executions;
        Ok(e.value)
    };
    let (theta, mut history) = match optimizer {
        Optimizer::Spsa(cfg) => {
            let cfg = SpsaConfig { seed: mix_seed(cfg.seed, u64::MAX - 1), ..cfg.clone() };
            spsa_minimize(&mut objective, &start, &cfg)?
        }
        Optimizer::Sequential(cfg) => sequential_minimize(&mut objective, &start, cfg)?,
    };
    let energy = objective(&theta, u64::MAX)?;
    history.push(history.records.last().map_or(0, |r| r.iteration), EvalKind::Final, &theta, energy)?;
    Ok(VqeResult { theta, energy, history, executions })
}
