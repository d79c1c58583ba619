//! Statevector and density-matrix simulation with depolarizing gate noise,
//! readout confusion, shot sampling and readout mitigation.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuits::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::operators::{group_qubitwise, Letter, MeasurementGroup, PauliString, PauliSum};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Row-stochastic readout matrix: `m[true][observed]`.
pub type Confusion = [[f64; 2]; 2];

pub fn symmetric_confusion(e: f64) -> Confusion {
    [[1.0 - e, e], [e, 1.0 - e]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub p1: f64,
    pub p2: f64,
    /// Empty means perfect readout; a single entry applies to every qubit.
    pub readout: Vec<Confusion>,
}

impl NoiseModel {
    pub fn new(p1: f64, p2: f64, readout: Vec<Confusion>) -> Result<Self> {
        let m = Self { p1, p2, readout };
        m.validate()?;
        Ok(m)
    }

    pub fn noiseless() -> Self {
        Self { p1: 0.0, p2: 0.0, readout: Vec::new() }
    }

    /// Approximate device preset: 0.998 / 0.97 gate fidelities and 2% readout flips.
    pub fn perth_like() -> Self {
        Self { p1: 0.002, p2: 0.03, readout: vec![symmetric_confusion(0.02)] }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "none" | "noiseless" => Some(Self::noiseless()),
            "perth-like" | "perth" => Some(Self::perth_like()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invalid(format!("{name} = {p} is not a probability")));
            }
        }
        for (q, m) in self.readout.iter().enumerate() {
            for row in m {
                if row.iter().any(|v| !(0.0..=1.0).contains(v)) || (row[0] + row[1] - 1.0).abs() > 1e-12 {
                    return Err(Error::Invalid(format!("readout matrix {q} is not row-stochastic")));
                }
            }
        }
        Ok(())
    }

    pub fn has_gate_noise(&self) -> bool {
        self.p1 > 0.0 || self.p2 > 0.0
    }

    pub fn has_readout_error(&self) -> bool {
        self.readout.iter().any(|m| m[0][1] != 0.0 || m[1][0] != 0.0)
    }

    pub fn confusion(&self, qubit: usize) -> Confusion {
        match self.readout.len() {
            0 => [[1.0, 0.0], [0.0, 1.0]],
            1 => self.readout[0],
            n => self.readout[qubit.min(n - 1)],
        }
    }

    /// Parses `key = value` lines: `p1`, `p2`, `readout_e` (one flip
    /// probability for all qubits, or a comma-separated per-qubit list).
    pub fn from_config(text: &str) -> Result<Self> {
        let mut m = Self::noiseless();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fmt_err = |msg: String| Error::Format { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fmt_err(format!("expected `key = value`, found `{line}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| fmt_err(format!("bad number `{}`", s.trim())))
            };
            match key.trim() {
                "p1" => m.p1 = parse(value)?,
                "p2" => m.p2 = parse(value)?,
                "readout_e" => {
                    m.readout = value
                        .split(',')
                        .map(|v| parse(v).map(symmetric_confusion))
                        .collect::<Result<_>>()?
                }
                other => return Err(fmt_err(format!("unknown key `{other}`"))),
            }
        }
        m.validate()?;
        Ok(m)
    }

    /// Preset name or path to a config file.
    pub fn resolve(spec: &str) -> Result<Self> {
        if let Some(m) = Self::preset(spec) {
            return Ok(m);
        }
        let path = Path::new(spec);
        if path.exists() {
            return Self::from_config(&std::fs::read_to_string(path)?);
        }
        Err(Error::Invalid(format!("unknown noise preset or file `{spec}`")))
    }
}

// Kernels over a register of `width` qubits stored as a flat amplitude array.

fn apply_1q(data: &mut [Complex64], q: usize, u: &[[Complex64; 2]; 2]) {
    let bit = 1usize << q;
    for i in 0..data.len() {
        if i & bit == 0 {
            let j = i | bit;
            let (a, b) = (data[i], data[j]);
            data[i] = u[0][0] * a + u[0][1] * b;
            data[j] = u[1][0] * a + u[1][1] * b;
        }
    }
}

fn apply_cnot(data: &mut [Complex64], control: usize, target: usize) {
    let (cb, tb) = (1usize << control, 1usize << target);
    for i in 0..data.len() {
        if i & cb != 0 && i & tb == 0 {
            data.swap(i, i | tb);
        }
    }
}

fn conj_matrix(u: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [[u[0][0].conj(), u[0][1].conj()], [u[1][0].conj(), u[1][1].conj()]]
}

fn basis_change_gates(basis: &PauliString) -> Vec<Gate> {
    (0..basis.n_qubits())
        .filter_map(|q| match basis.letter(q) {
            Letter::X => Some(Gate::h(q)),
            Letter::Y => Some(Gate::rx(q, std::f64::consts::FRAC_PI_2)),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Self { n_qubits, amplitudes }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(Error::Invalid(format!("{len} amplitudes do not form a qubit register")));
        }
        Ok(Self { n_qubits: len.trailing_zeros() as usize, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn apply(&mut self, g: &Gate) {
        match g.kind {
            GateKind::Cnot => apply_cnot(&mut self.amplitudes, g.qubits[0], g.qubits[1]),
            _ => apply_1q(&mut self.amplitudes, g.qubits[0], &g.matrix_1q()),
        }
    }

    pub fn expectation_pauli(&self, p: &PauliString) -> f64 {
        let mut acc = ZERO;
        for (j, a) in self.amplitudes.iter().enumerate() {
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            let (k, amp) = p.apply_to_basis(j);
            acc += self.amplitudes[k].conj() * amp * a;
        }
        acc.re
    }

    pub fn expectation(&self, h: &PauliSum) -> f64 {
        h.iter().map(|(p, c)| c * self.expectation_pauli(p)).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Mixed state; `matrix[r * dim + c]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    n_qubits: usize,
    matrix: Vec<Complex64>,
}

impl DensityState {
    pub fn zero(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut matrix = vec![ZERO; dim * dim];
        matrix[0] = ONE;
        Self { n_qubits, matrix }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let a = &psi.amplitudes;
        let matrix = a
            .iter()
            .flat_map(|r| a.iter().map(move |c| r * c.conj()))
            .collect();
        Self { n_qubits: psi.n_qubits, matrix }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut matrix = vec![ZERO; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        Self { n_qubits, matrix }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.matrix[r * self.dim() + c]
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.matrix)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn apply(&mut self, g: &Gate) {
        let n = self.n_qubits;
        match g.kind {
            GateKind::Cnot => {
                let (c, t) = (g.qubits[0], g.qubits[1]);
                apply_cnot(&mut self.matrix, c + n, t + n);
                apply_cnot(&mut self.matrix, c, t);
            }
            _ => {
                let u = g.matrix_1q();
                let q = g.qubits[0];
                apply_1q(&mut self.matrix, q + n, &u);
                apply_1q(&mut self.matrix, q, &conj_matrix(&u));
            }
        }
    }

    /// Depolarizing channel `(1-p) rho + p * I/2^k (x) Tr_S rho` on the qubits `support`.
    pub fn depolarize(&mut self, support: &[usize], p: f64) {
        if p == 0.0 {
            return;
        }
        let dim = self.dim();
        let mask: usize = support.iter().map(|q| 1usize << q).sum();
        let k = support.len();
        let scale = p / (1usize << k) as f64;
        let sub_states: Vec<usize> = (0..1usize << k)
            .map(|s| {
                support
                    .iter()
                    .enumerate()
                    .map(|(i, q)| ((s >> i) & 1) << q)
                    .sum()
            })
            .collect();
        for r0 in 0..dim {
            if r0 & mask != 0 {
                continue;
            }
            for c0 in 0..dim {
                if c0 & mask != 0 {
                    continue;
                }
                let mut partial = ZERO;
                for &s in &sub_states {
                    partial += self.matrix[(r0 | s) * dim + (c0 | s)];
                }
                for &sr in &sub_states {
                    for &sc in &sub_states {
                        let idx = (r0 | sr) * dim + (c0 | sc);
                        self.matrix[idx] *= 1.0 - p;
                        if sr == sc {
                            self.matrix[idx] += partial * scale;
                        }
                    }
                }
            }
        }
    }

    pub fn expectation_pauli(&self, p: &PauliString) -> f64 {
        let dim = self.dim();
        let mut acc = ZERO;
        for j in 0..dim {
            let (k, amp) = p.apply_to_basis(j);
            acc += amp * self.matrix[k * dim + j];
        }
        acc.re
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re.max(0.0)).collect()
    }

    /// Checks unit trace, Hermiticity and positivity.
    pub fn check_physical(&self, tol: f64) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::Numerical(format!("density matrix trace is {tr}")));
        }
        let m = self.to_matrix();
        let defect = (&m - m.adjoint()).camax();
        if defect > tol {
            return Err(Error::Numerical(format!("density matrix is not Hermitian ({defect:e})")));
        }
        let min = SymmetricEigen::new(m).eigenvalues.min();
        if min < -tol {
            return Err(Error::Numerical(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// Simulated output state: pure when no gate noise is present.
#[derive(Debug, Clone, PartialEq)]
pub enum SimState {
    Pure(StateVector),
    Mixed(DensityState),
}

impl SimState {
    pub fn n_qubits(&self) -> usize {
        match self {
            SimState::Pure(s) => s.n_qubits(),
            SimState::Mixed(s) => s.n_qubits(),
        }
    }

    pub fn expectation_pauli(&self, p: &PauliString) -> f64 {
        match self {
            SimState::Pure(s) => s.expectation_pauli(p),
            SimState::Mixed(s) => s.expectation_pauli(p),
        }
    }

    fn apply(&mut self, g: &Gate) {
        match self {
            SimState::Pure(s) => s.apply(g),
            SimState::Mixed(s) => s.apply(g),
        }
    }

    /// Outcome distribution after rotating into `basis`.
    pub fn probabilities_in(&self, basis: &PauliString) -> Vec<f64> {
        let mut rotated = self.clone();
        for g in basis_change_gates(basis) {
            rotated.apply(&g);
        }
        match rotated {
            SimState::Pure(s) => s.probabilities(),
            SimState::Mixed(s) => s.probabilities(),
        }
    }
}

fn require_bound(c: &Circuit) -> Result<()> {
    if c.is_bound() {
        Ok(())
    } else {
        Err(Error::Invalid("circuit has unbound parameters".into()))
    }
}

pub fn run_statevector(c: &Circuit) -> Result<StateVector> {
    require_bound(c)?;
    let mut s = StateVector::zero(c.n_qubits());
    for g in &c.gates {
        s.apply(g);
    }
    Ok(s)
}

/// Applies each gate followed by depolarizing noise on its support.
pub fn evolve(c: &Circuit, noise: Option<&NoiseModel>) -> Result<DensityState> {
    require_bound(c)?;
    let mut rho = DensityState::zero(c.n_qubits());
    for g in &c.gates {
        rho.apply(g);
        if let Some(m) = noise {
            let p = if g.qubits.len() == 2 { m.p2 } else { m.p1 };
            rho.depolarize(&g.qubits, p);
        }
        #[cfg(debug_assertions)]
        if c.n_qubits() <= 4 {
            rho.check_physical(1e-9).expect("channel left the physical state space");
        }
    }
    Ok(rho)
}

/// Pure simulation when there is no gate noise, density matrix otherwise.
pub fn simulate(c: &Circuit, noise: Option<&NoiseModel>) -> Result<SimState> {
    match noise {
        Some(m) if m.has_gate_noise() => Ok(SimState::Mixed(evolve(c, Some(m))?)),
        _ => Ok(SimState::Pure(run_statevector(c)?)),
    }
}

pub fn expectation_exact(state: &DensityState, h: &PauliSum) -> Result<f64> {
    if state.n_qubits() != h.n_qubits() {
        return Err(Error::Dimension { expected: state.n_qubits(), got: h.n_qubits() });
    }
    Ok(h.iter().map(|(p, c)| c * state.expectation_pauli(p)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Exact,
    Finite(u64),
}

impl std::str::FromStr for Shots {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(Error::Invalid(format!("shots must be `exact` or a positive count, got `{s}`"))),
            Ok(n) => Ok(Shots::Finite(n)),
        }
    }
}

impl std::fmt::Display for Shots {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shots::Exact => write!(f, "exact"),
            Shots::Finite(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotResult {
    /// Outcome (bit q = qubit q) to count.
    pub counts: BTreeMap<u64, u64>,
    pub shots: u64,
    pub basis: PauliString,
}

impl ShotResult {
    pub fn bitstring(&self, outcome: u64) -> String {
        (0..self.basis.n_qubits())
            .map(|q| if outcome >> q & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.basis.n_qubits()];
        for (&k, &n) in &self.counts {
            p[k as usize] = n as f64 / self.shots as f64;
        }
        p
    }
}

fn apply_per_qubit(p: &mut [f64], n_qubits: usize, mats: impl Fn(usize) -> Confusion) {
    for q in 0..n_qubits {
        let m = mats(q);
        let bit = 1usize << q;
        for i in 0..p.len() {
            if i & bit == 0 {
                let (a, b) = (p[i], p[i | bit]);
                p[i] = a * m[0][0] + b * m[1][0];
                p[i | bit] = a * m[0][1] + b * m[1][1];
            }
        }
    }
}

/// Measures every qubit in the group's basis. Readout confusion is applied
/// to the ideal distribution before sampling.
pub fn sample(
    state: &SimState,
    group: &MeasurementGroup,
    shots: u64,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<ShotResult> {
    if shots == 0 {
        return Err(Error::Invalid("cannot sample zero shots".into()));
    }
    let n = state.n_qubits();
    if group.basis.n_qubits() != n {
        return Err(Error::Dimension { expected: n, got: group.basis.n_qubits() });
    }
    let mut p = state.probabilities_in(&group.basis);
    if let Some(m) = noise {
        if m.has_readout_error() {
            apply_per_qubit(&mut p, n, |q| m.confusion(q));
        }
    }
    let dist = WeightedIndex::new(&p)
        .map_err(|e| Error::Numerical(format!("invalid outcome distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        *counts.entry(dist.sample(&mut rng) as u64).or_insert(0) += 1;
    }
    Ok(ShotResult { counts, shots, basis: group.basis })
}

fn invert_2x2(m: &Confusion) -> Result<Confusion> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-12 {
        return Err(Error::Numerical("readout confusion matrix is singular".into()));
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// Inverts the tensor-product confusion on the empirical distribution, then
/// clips negatives and renormalizes.
pub fn mitigate_readout(result: &ShotResult, noise: &NoiseModel) -> Result<Vec<f64>> {
    let n = result.basis.n_qubits();
    let inverses = (0..n)
        .map(|q| invert_2x2(&noise.confusion(q)))
        .collect::<Result<Vec<_>>>()?;
    let mut p = result.distribution();
    apply_per_qubit(&mut p, n, |q| inverses[q]);
    for v in p.iter_mut() {
        *v = v.max(0.0);
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numerical("mitigated distribution vanished".into()));
    }
    Ok(p.into_iter().map(|v| v / total).collect())
}

/// Expectation of a basis-diagonalised string from an outcome distribution.
pub fn parity_expectation(p: &[f64], support: u64) -> f64 {
    p.iter()
        .enumerate()
        .map(|(k, &v)| if (k as u64 & support).count_ones().is_multiple_of(2) { v } else { -v })
        .sum()
}

/// How expectation values are obtained from a prepared state.
#[derive(Debug, Clone, PartialEq)]
pub struct Backend {
    pub shots: Shots,
    pub noise: Option<NoiseModel>,
    /// Apply inverse-confusion correction to sampled distributions.
    pub mitigate_readout: bool,
}

impl Backend {
    pub fn exact() -> Self {
        Self { shots: Shots::Exact, noise: None, mitigate_readout: false }
    }

    /// Mitigation is enabled whenever the model has readout error.
    pub fn new(shots: Shots, noise: Option<NoiseModel>) -> Self {
        let mitigate_readout = noise.as_ref().is_some_and(|m| m.has_readout_error());
        Self { shots, noise, mitigate_readout }
    }

    pub fn is_noiseless_exact(&self) -> bool {
        self.shots == Shots::Exact && self.noise.as_ref().is_none_or(|m| !m.has_gate_noise())
    }

    pub fn prepare(&self, c: &Circuit) -> Result<SimState> {
        simulate(c, self.noise.as_ref())
    }

    /// Estimates each string of every group; returns values keyed by string
    /// and the number of circuit executions used.
    pub fn estimate_groups(
        &self,
        state: &SimState,
        groups: &[MeasurementGroup],
        seed: u64,
    ) -> Result<(BTreeMap<PauliString, f64>, usize)> {
        let mut out = BTreeMap::new();
        match self.shots {
            Shots::Exact => {
                for g in groups {
                    for s in &g.strings {
                        out.insert(*s, state.expectation_pauli(s));
                    }
                }
                Ok((out, 0))
            }
            Shots::Finite(n) => {
                for (i, g) in groups.iter().enumerate() {
                    let r = sample(state, g, n, self.noise.as_ref(), mix_seed(seed, i as u64))?;
                    let p = match (&self.noise, self.mitigate_readout) {
                        (Some(m), true) => mitigate_readout(&r, m)?,
                        _ => r.distribution(),
                    };
                    for s in &g.strings {
                        out.insert(*s, parity_expectation(&p, s.support()));
                    }
                }
                Ok((out, groups.len()))
            }
        }
    }
}

/// Deterministic seed derivation (SplitMix64 finalizer).
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Energy estimator with the measurement groups of `h` precomputed.
#[derive(Debug, Clone)]
pub struct EnergyEstimator {
    pub hamiltonian: PauliSum,
    pub groups: Vec<MeasurementGroup>,
    pub backend: Backend,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Circuits run to obtain the value (0 for exact evaluation).
    pub executions: usize,
}

impl EnergyEstimator {
    pub fn new(hamiltonian: PauliSum, backend: Backend) -> Self {
        let groups = group_qubitwise(&hamiltonian);
        Self { hamiltonian, groups, backend }
    }

    pub fn estimate_state(&self, state: &SimState, seed: u64) -> Result<Estimate> {
        if state.n_qubits() != self.hamiltonian.n_qubits() {
            return Err(Error::Dimension { expected: self.hamiltonian.n_qubits(), got: state.n_qubits() });
        }
        let (values, executions) = self.backend.estimate_groups(state, &self.groups, seed)?;
        let value = self.hamiltonian.identity_coefficient()
            + self
                .hamiltonian
                .non_identity()
                .map(|(p, c)| c * values[p])
                .sum::<f64>();
        Ok(Estimate { value, executions })
    }

    pub fn estimate(&self, c: &Circuit, seed: u64) -> Result<Estimate> {
        let state = self.backend.prepare(c)?;
        self.estimate_state(&state, seed)
    }
}

/// One-shot convenience wrapper around [`EnergyEstimator`].
pub fn estimate_energy(
    c: &Circuit,
    h: &PauliSum,
    shots: Shots,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<Estimate> {
    EnergyEstimator::new(h.clone(), Backend::new(shots, noise.cloned())).estimate(c, seed)
}
