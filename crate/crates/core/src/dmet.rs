//! Density matrix embedding: bath construction, embedded Hamiltonians,
//! fragment solvers, RDM measurement, chemical-potential fitting and
//! energy assembly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::circuits::{build_uccsd, count_resources, Resources};
use crate::error::{Error, Result};
use crate::integrals::{coulomb_exchange, rhf_with, symmetric_eigen, IntegralSet, MeanField, Tensor4};
use crate::operators::jw::{fermion_product, hartree_fock_bits, spin_counts, spin_orbital};
use crate::operators::{
    find_z2_symmetries, group_qubitwise, jordan_wigner, taper, taper_observable, FermionHamiltonian, PauliString,
    PauliSum, QubitOperator, TaperingMap,
};
use crate::oracle::exact_ground_in;
use crate::refine::{refine_parameters, KernelFamily, RefinementConfig};
use crate::simulator::{mix_seed, Backend, SimState, StateVector};
use crate::vqe::{run_vqe, OptHistory, Optimizer};

/// Entanglement scores at or below this are treated as unentangled.
pub const BATH_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentSpec {
    pub orbital_indices: Vec<usize>,
    pub label: String,
}

impl FragmentSpec {
    pub fn new(orbital_indices: Vec<usize>) -> Self {
        let label = orbital_indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        Self { orbital_indices, label }
    }

    pub fn whole(n_orbitals: usize) -> Self {
        Self::new((0..n_orbitals).collect())
    }

    /// Parses `"0,1;2,3"`.
    pub fn parse_list(text: &str) -> Result<Vec<FragmentSpec>> {
        text.split(';')
            .map(|frag| {
                let idx = frag
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Invalid(format!("bad orbital index `{}` in `{text}`", s.trim())))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(FragmentSpec::new(idx))
            })
            .collect()
    }

    /// Fragments must be nonempty, disjoint, and cover all orbitals.
    pub fn validate_partition(fragments: &[FragmentSpec], n_orbitals: usize) -> Result<()> {
        let mut seen = vec![false; n_orbitals];
        for f in fragments {
            if f.orbital_indices.is_empty() {
                return Err(Error::Invalid("empty fragment".into()));
            }
            for &i in &f.orbital_indices {
                if i >= n_orbitals {
                    return Err(Error::Invalid(format!("orbital {i} does not exist ({n_orbitals} orbitals)")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Invalid(format!("orbital {i} appears in two fragments")));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Invalid(format!("orbital {i} is not in any fragment")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BathCount {
    /// Keep every orbital with score above [`BATH_THRESHOLD`].
    Auto,
    Count(usize),
}

impl FromStr for BathCount {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" | "full" => Ok(BathCount::Auto),
            _ => s
                .parse()
                .map(BathCount::Count)
                .map_err(|_| Error::Invalid(format!("bath count must be `auto` or a number, got `{s}`"))),
        }
    }
}

impl fmt::Display for BathCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BathCount::Auto => write!(f, "auto"),
            BathCount::Count(n) => write!(f, "{n}"),
        }
    }
}

/// Fragment plus retained bath orbitals.
#[derive(Debug, Clone)]
pub struct Bath {
    pub fragment: FragmentSpec,
    /// `n x k` orbital coefficients: fragment sites first, then bath orbitals.
    pub basis: DMatrix<f64>,
    /// Scores of the retained bath orbitals, descending.
    pub scores: Vec<f64>,
    /// Mean-field occupations of the retained bath orbitals.
    pub occupations: Vec<f64>,
    /// Spin-summed density of the electrons left outside the embedding.
    pub core_density: DMatrix<f64>,
    pub n_electrons: usize,
    /// Set when more bath orbitals were requested than are entangled.
    pub truncated_request: bool,
}

impl Bath {
    pub fn n_orbitals(&self) -> usize {
        self.basis.ncols()
    }

    pub fn n_fragment(&self) -> usize {
        self.fragment.orbital_indices.len()
    }
}

/// Schmidt-style bath from the environment block of the mean-field density.
pub fn build_bath(mf: &MeanField, frag: &FragmentSpec, count: BathCount) -> Result<Bath> {
    let d = &mf.rdm1;
    let n = d.nrows();
    FragmentSpec::validate_partition(std::slice::from_ref(frag), n).or_else(|e| {
        // Partial coverage is fine here; only check bounds and duplicates.
        let mut seen = vec![false; n];
        for &i in &frag.orbital_indices {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(e);
            }
        }
        if frag.orbital_indices.is_empty() {
            return Err(e);
        }
        Ok(())
    })?;
    let env: Vec<usize> = (0..n).filter(|i| !frag.orbital_indices.contains(i)).collect();
    let nf = frag.orbital_indices.len();

    let (lambda, vecs) = if env.is_empty() {
        (Vec::new(), DMatrix::zeros(0, 0))
    } else {
        let block = DMatrix::from_fn(env.len(), env.len(), |a, b| d[(env[a], env[b])]);
        let (vals, vecs) = symmetric_eigen(&block);
        (vals.iter().copied().collect::<Vec<_>>(), vecs)
    };
    let score = |l: f64| l.min(2.0 - l).max(0.0);
    let mut order: Vec<usize> = (0..lambda.len()).collect();
    // Highest score first; ties go to the more occupied orbital.
    order.sort_by(|&a, &b| {
        score(lambda[b])
            .total_cmp(&score(lambda[a]))
            .then(lambda[b].total_cmp(&lambda[a]))
    });
    let entangled = order.iter().filter(|&&i| score(lambda[i]) > BATH_THRESHOLD).count();
    let (keep, truncated_request) = match count {
        BathCount::Auto => (entangled, false),
        BathCount::Count(k) if k > entangled => {
            log::warn!("{k} bath orbitals requested for fragment {} but only {entangled} are entangled", frag.label);
            (entangled, true)
        }
        BathCount::Count(k) => (k, false),
    };

    let k = nf + keep;
    let mut basis = DMatrix::zeros(n, k);
    for (col, &i) in frag.orbital_indices.iter().enumerate() {
        basis[(i, col)] = 1.0;
    }
    let embed = |idx: usize| {
        let mut v = nalgebra::DVector::zeros(n);
        for (a, &e) in env.iter().enumerate() {
            v[e] = vecs[(a, idx)];
        }
        v
    };
    for (col, &i) in order[..keep].iter().enumerate() {
        basis.set_column(nf + col, &embed(i));
    }
    let mut core_density = DMatrix::zeros(n, n);
    for &i in &order[keep..] {
        let v = embed(i);
        core_density += &v * v.transpose() * lambda[i];
    }

    let trace = (basis.transpose() * d * &basis).trace();
    let n_electrons = trace.round();
    if (trace - n_electrons).abs() > 0.3 || n_electrons < 0.0 {
        return Err(Error::Embedding(trace));
    }
    Ok(Bath {
        fragment: frag.clone(),
        basis,
        scores: order[..keep].iter().map(|&i| score(lambda[i])).collect(),
        occupations: order[..keep].iter().map(|&i| lambda[i]).collect(),
        core_density,
        n_electrons: n_electrons as usize,
        truncated_request,
    })
}

/// Embedded Hamiltonian in the fragment+bath orbitals.
#[derive(Debug, Clone)]
pub struct EmbeddingProblem {
    pub bath: Bath,
    /// Bare one-electron integrals projected into the embedding.
    pub h1_bare: DMatrix<f64>,
    /// One-electron integrals dressed with the core potential (no mu).
    pub h1: DMatrix<f64>,
    pub h2: Tensor4,
    /// Nuclear repulsion plus core electronic energy.
    pub constant: f64,
    pub chemical_potential: f64,
}

impl EmbeddingProblem {
    pub fn n_orbitals(&self) -> usize {
        self.bath.n_orbitals()
    }

    pub fn n_electrons(&self) -> usize {
        self.bath.n_electrons
    }

    /// Second-quantized Hamiltonian including `-mu` on fragment orbitals.
    pub fn hamiltonian(&self) -> FermionHamiltonian {
        let mut h1 = self.h1.clone();
        for i in 0..self.bath.n_fragment() {
            h1[(i, i)] -= self.chemical_potential;
        }
        FermionHamiltonian { h1, h2: self.h2.clone(), constant: self.constant }
    }
}

pub fn build_embedded_hamiltonian(ints: &IntegralSet, bath: &Bath, mu: f64) -> Result<EmbeddingProblem> {
    let n = ints.n_orbitals;
    if bath.basis.nrows() != n {
        return Err(Error::Dimension { expected: n, got: bath.basis.nrows() });
    }
    let c = &bath.basis;
    let (j, k) = coulomb_exchange(&ints.h2, &bath.core_density);
    let veff = j - k * 0.5;
    let core_energy = bath.core_density.component_mul(&(&ints.h1 + &veff * 0.5)).sum();
    Ok(EmbeddingProblem {
        bath: bath.clone(),
        h1_bare: c.transpose() * &ints.h1 * c,
        h1: c.transpose() * (&ints.h1 + veff) * c,
        h2: ints.h2.transform(c),
        constant: ints.e_core + core_energy,
        chemical_potential: mu,
    })
}

/// Spin-summed one- and two-particle densities over spatial orbitals.
/// `rdm2[p,q,r,s] = sum_{st} <a+_{p s} a+_{r t} a_{s t} a_{q s}>` (chemists' order).
#[derive(Debug, Clone)]
pub struct RdmPair {
    pub rdm1: DMatrix<f64>,
    pub rdm2: Tensor4,
}

impl RdmPair {
    pub fn rotated(&self, c: &DMatrix<f64>) -> RdmPair {
        RdmPair { rdm1: c * &self.rdm1 * c.transpose(), rdm2: self.rdm2.transform(&c.transpose()) }
    }

    /// Energy of these densities under a Hamiltonian in the same orbitals.
    pub fn energy(&self, h1: &DMatrix<f64>, h2: &Tensor4, constant: f64) -> f64 {
        let one = h1.component_mul(&self.rdm1).sum();
        let two: f64 = h2.as_slice().iter().zip(self.rdm2.as_slice()).map(|(g, d)| g * d).sum();
        one + 0.5 * two + constant
    }

    pub fn check_invariants(&self, n_electrons: f64, tol: f64) -> Result<()> {
        let herm = (&self.rdm1 - self.rdm1.transpose()).amax();
        if herm > tol {
            return Err(Error::Numerical(format!("1-RDM is not symmetric ({herm:e})")));
        }
        let tr = self.rdm1.trace();
        if (tr - n_electrons).abs() > tol {
            return Err(Error::Numerical(format!("1-RDM trace {tr} differs from {n_electrons}")));
        }
        let k = self.rdm1.nrows();
        for p in 0..k {
            for q in 0..k {
                for r in 0..k {
                    for s in 0..k {
                        let v = self.rdm2.get(p, q, r, s);
                        let dev = (v - self.rdm2.get(r, s, p, q)).abs().max((v - self.rdm2.get(q, p, s, r)).abs());
                        if dev > tol {
                            return Err(Error::Numerical(format!("2-RDM symmetry violated at ({p},{q},{r},{s})")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Qubit observables for every RDM element over `k` spatial orbitals.
#[derive(Debug, Clone)]
pub struct RdmObservables {
    k: usize,
    one: Vec<QubitOperator>,
    /// Indexed by canonical (p,q,r,s); others follow by symmetry.
    two: BTreeMap<[usize; 4], QubitOperator>,
}

fn canonical4(p: usize, q: usize, r: usize, s: usize) -> [usize; 4] {
    [[p, q, r, s], [r, s, p, q], [q, p, s, r], [s, r, q, p]]
        .into_iter()
        .min()
        .expect("nonempty")
}

impl RdmObservables {
    pub fn new(k: usize, map: Option<&TaperingMap>) -> Result<Self> {
        let modes = 2 * k;
        let prepare = |op: QubitOperator| -> Result<QubitOperator> {
            match map {
                Some(m) => taper_observable(&op, m),
                None => Ok(op),
            }
        };
        let mut one = Vec::with_capacity(k * k);
        for p in 0..k {
            for q in 0..k {
                let mut op = QubitOperator::new(modes);
                for s in 0..2 {
                    op.add_assign(&fermion_product(&[(spin_orbital(p, s, k), true), (spin_orbital(q, s, k), false)], modes));
                }
                one.push(prepare(op)?);
            }
        }
        let mut two = BTreeMap::new();
        for p in 0..k {
            for q in 0..k {
                for r in 0..k {
                    for s in 0..k {
                        let key = canonical4(p, q, r, s);
                        if key != [p, q, r, s] {
                            continue;
                        }
                        let mut op = QubitOperator::new(modes);
                        for a in 0..2 {
                            for b in 0..2 {
                                let (ps, qs) = (spin_orbital(p, a, k), spin_orbital(q, a, k));
                                let (rt, st) = (spin_orbital(r, b, k), spin_orbital(s, b, k));
                                if ps == rt || qs == st {
                                    continue;
                                }
                                op.add_assign(&fermion_product(&[(ps, true), (rt, true), (st, false), (qs, false)], modes));
                            }
                        }
                        two.insert(key, prepare(op)?);
                    }
                }
            }
        }
        Ok(Self { k, one, two })
    }

    /// All distinct non-identity strings that must be measured.
    pub fn strings(&self) -> Vec<PauliString> {
        let mut set = std::collections::BTreeSet::new();
        for op in self.one.iter().chain(self.two.values()) {
            for (p, _) in op.iter() {
                if !p.is_identity() {
                    set.insert(*p);
                }
            }
        }
        set.into_iter().collect()
    }

    /// Assembles the RDMs from per-string expectation values.
    pub fn assemble(&self, values: &BTreeMap<PauliString, f64>) -> RdmPair {
        let eval = |op: &QubitOperator| -> f64 {
            op.iter()
                .map(|(p, c)| {
                    let v = if p.is_identity() { 1.0 } else { values.get(p).copied().unwrap_or(0.0) };
                    (c * Complex64::new(v, 0.0)).re
                })
                .sum()
        };
        let k = self.k;
        let mut rdm1 = DMatrix::from_fn(k, k, |p, q| eval(&self.one[p * k + q]));
        rdm1 = (&rdm1 + rdm1.transpose()) * 0.5;
        let canon: BTreeMap<[usize; 4], f64> = self.two.iter().map(|(key, op)| (*key, eval(op))).collect();
        let mut rdm2 = Tensor4::zeros(k);
        for p in 0..k {
            for q in 0..k {
                for r in 0..k {
                    for s in 0..k {
                        rdm2.set(p, q, r, s, canon[&canonical4(p, q, r, s)]);
                    }
                }
            }
        }
        RdmPair { rdm1, rdm2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdmBackend {
    /// Same noisy, shot-based estimator as the energy.
    Noisy,
    /// Exact expectation values of the noiseless circuit at the optimized parameters.
    Noiseless,
}

impl FromStr for RdmBackend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noisy" => Ok(RdmBackend::Noisy),
            "noiseless" => Ok(RdmBackend::Noiseless),
            _ => Err(Error::Invalid(format!("RDM backend must be `noisy` or `noiseless`, got `{s}`"))),
        }
    }
}

impl fmt::Display for RdmBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RdmBackend::Noisy => "noisy",
            RdmBackend::Noiseless => "noiseless",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RefineSettings {
    pub family: KernelFamily,
    pub lambda: f64,
    pub config: RefinementConfig,
}

impl Default for RefineSettings {
    fn default() -> Self {
        Self { family: KernelFamily::Matern { p: 5 }, lambda: 1e-4, config: RefinementConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct VqeSolver {
    pub backend: Backend,
    pub optimizer: Optimizer,
    pub rdm_backend: RdmBackend,
    pub refine: Option<RefineSettings>,
    pub taper: bool,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum FragmentSolver {
    /// Exact diagonalization in the embedded particle sector.
    Exact,
    Vqe(VqeSolver),
}

/// Outcome of one fragment solve.
#[derive(Debug, Clone)]
pub struct FragmentSolution {
    /// Densities in the embedding basis (fragment sites first).
    pub rdms: RdmPair,
    /// Energy of the embedded Hamiltonian (mu included) from the solver.
    pub solver_energy: f64,
    pub n_qubits: usize,
    pub n_qubits_tapered: usize,
    pub resources: Option<Resources>,
    pub theta: Vec<f64>,
    pub history: Option<OptHistory>,
    pub executions: usize,
}

/// Orbital rotation to the canonical orbitals of the embedded mean field,
/// falling back to the identity when no closed-shell solution exists.
fn embedded_orbitals(ham: &FermionHamiltonian, n_electrons: usize) -> DMatrix<f64> {
    let k = ham.n_orbitals();
    if n_electrons.is_multiple_of(2) {
        if let Ok(mf) = rhf_with(&ham.h1, &ham.h2, ham.constant, n_electrons, 500, 1e-11) {
            return mf.orbital_coeffs;
        }
    }
    DMatrix::identity(k, k)
}

/// Qubit Hamiltonian of an embedded problem in its canonical orbitals.
#[derive(Debug, Clone)]
pub struct QubitProblem {
    pub orbitals: DMatrix<f64>,
    pub hamiltonian: PauliSum,
    pub tapering: TaperingMap,
    pub tapered: PauliSum,
    pub n_electrons: usize,
}

pub fn qubit_problem(problem: &EmbeddingProblem, use_tapering: bool) -> Result<QubitProblem> {
    let ham = problem.hamiltonian();
    let ne = problem.n_electrons();
    let orbitals = embedded_orbitals(&ham, ne);
    let hamiltonian = jordan_wigner(&ham.rotated(&orbitals))?;
    let tapering = if use_tapering {
        find_z2_symmetries(&hamiltonian, hartree_fock_bits(ham.n_orbitals(), ne))?
    } else {
        TaperingMap::empty(hamiltonian.n_qubits())
    };
    let tapered = taper(&hamiltonian, &tapering)?;
    Ok(QubitProblem { orbitals, hamiltonian, tapering, tapered, n_electrons: ne })
}

fn sector_filter(n_orbitals: usize, ne: usize) -> impl Fn(usize) -> bool {
    move |j: usize| spin_counts(j as u64, n_orbitals) == (ne.div_ceil(2), ne / 2)
}

pub fn solve_fragment(
    problem: &EmbeddingProblem,
    solver: &FragmentSolver,
    warm_start: Option<&[f64]>,
    seed: u64,
) -> Result<FragmentSolution> {
    let k = problem.n_orbitals();
    let ne = problem.n_electrons();
    match solver {
        FragmentSolver::Exact => {
            let ham = problem.hamiltonian();
            let h = jordan_wigner(&ham)?;
            let spectrum = exact_ground_in(&h, sector_filter(k, ne))?;
            let psi = StateVector::from_amplitudes(
                spectrum.ground_vector.clone().expect("ground vector").iter().copied().collect(),
            )?;
            let obs = RdmObservables::new(k, None)?;
            let values = obs.strings().into_iter().map(|p| (p, psi.expectation_pauli(&p))).collect();
            Ok(FragmentSolution {
                rdms: obs.assemble(&values),
                solver_energy: spectrum.ground_energy(),
                n_qubits: 2 * k,
                n_qubits_tapered: 2 * k,
                resources: None,
                theta: Vec::new(),
                history: None,
                executions: 0,
            })
        }
        FragmentSolver::Vqe(cfg) => {
            let qp = qubit_problem(problem, cfg.taper)?;
            let map = if cfg.taper { Some(&qp.tapering) } else { None };
            let ansatz = build_uccsd(2 * k, ne, map)?;
            let warm = warm_start.filter(|t| t.len() == ansatz.parameter_count());
            let result = run_vqe(&qp.tapered, &ansatz, &cfg.backend, &cfg.optimizer, warm, seed)?;
            let mut theta = result.theta.clone();
            if let Some(r) = &cfg.refine {
                if ansatz.parameter_count() > 0 {
                    let rc = RefinementConfig { seed: mix_seed(seed, 7), ..r.config.clone() };
                    theta = refine_parameters(&result.history, r.family, r.lambda, &rc)?.theta;
                }
            }
            let bound = ansatz.bind(&theta)?;
            let obs = RdmObservables::new(k, Some(&qp.tapering))?;
            let strings = obs.strings();
            let mut executions = result.executions;
            let values: BTreeMap<PauliString, f64> = match cfg.rdm_backend {
                RdmBackend::Noiseless => {
                    let psi = crate::simulator::run_statevector(&bound)?;
                    strings.into_iter().map(|p| (p, psi.expectation_pauli(&p))).collect()
                }
                RdmBackend::Noisy => {
                    let state: SimState = cfg.backend.prepare(&bound)?;
                    let weights = PauliSum::from_terms(qp.tapered.n_qubits(), strings.into_iter().map(|p| (p, 1.0)))?;
                    let groups = group_qubitwise(&weights);
                    let (values, used) = cfg.backend.estimate_groups(&state, &groups, mix_seed(seed, 11))?;
                    executions += used;
                    values
                }
            };
            let rdms_mo = obs.assemble(&values);
            Ok(FragmentSolution {
                rdms: rdms_mo.rotated(&qp.orbitals),
                solver_energy: result.energy,
                n_qubits: 2 * k,
                n_qubits_tapered: qp.tapered.n_qubits(),
                resources: Some(count_resources(&ansatz)),
                theta,
                history: Some(result.history),
                executions,
            })
        }
    }
}

/// Democratic-partitioning energy of one fragment (without the nuclear term).
pub fn fragment_energy(problem: &EmbeddingProblem, rdms: &RdmPair) -> f64 {
    let nf = problem.bath.n_fragment();
    let k = problem.n_orbitals();
    let mut e = 0.0;
    for p in 0..nf {
        for q in 0..k {
            e += 0.5 * (problem.h1_bare[(p, q)] + problem.h1[(p, q)]) * rdms.rdm1[(q, p)];
            for r in 0..k {
                for s in 0..k {
                    e += 0.5 * problem.h2.get(p, q, r, s) * rdms.rdm2.get(p, q, r, s);
                }
            }
        }
    }
    e
}

pub fn fragment_electrons(problem: &EmbeddingProblem, rdms: &RdmPair) -> f64 {
    (0..problem.bath.n_fragment()).map(|p| rdms.rdm1[(p, p)]).sum()
}

/// Sum of fragment energies plus the nuclear repulsion.
pub fn assemble_total_energy(problems: &[EmbeddingProblem], solutions: &[FragmentSolution], ints: &IntegralSet) -> Result<f64> {
    if problems.len() != solutions.len() || problems.is_empty() {
        return Err(Error::Invalid(format!(
            "{} fragments but {} solutions",
            problems.len(),
            solutions.len()
        )));
    }
    Ok(problems.iter().zip(solutions).map(|(p, s)| fragment_energy(p, &s.rdms)).sum::<f64>() + ints.e_core)
}

#[derive(Debug, Clone)]
pub struct DmetConfig {
    pub fragments: Vec<FragmentSpec>,
    pub bath: BathCount,
    pub solver: FragmentSolver,
    pub max_cycles: usize,
    pub electron_tol: f64,
    pub seed: u64,
}

impl DmetConfig {
    pub fn new(fragments: Vec<FragmentSpec>, bath: BathCount, solver: FragmentSolver) -> Self {
        Self { fragments, bath, solver, max_cycles: 10, electron_tol: 0.01, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub mu: f64,
    pub n_electrons: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct FragmentReport {
    pub label: String,
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub n_qubits: usize,
    pub n_qubits_tapered: usize,
    pub resources: Option<Resources>,
    pub theta: Vec<f64>,
    pub history: Option<OptHistory>,
}

#[derive(Debug, Clone)]
pub struct DmetResult {
    pub energy: f64,
    pub mu: f64,
    pub cycles: Vec<CycleRecord>,
    /// Index into `cycles` of the reported (minimum-energy) cycle.
    pub best_cycle: usize,
    /// Bracketing of the electron count failed within the allowed range.
    pub mu_warning: bool,
    pub mean_field: MeanField,
    pub fragments: Vec<FragmentReport>,
    pub executions: usize,
}

struct CycleOutcome {
    energy: f64,
    n_electrons: f64,
    solutions: Vec<FragmentSolution>,
}

/// Embedding cycles with chemical-potential bisection.
pub fn run_dmet(ints: &IntegralSet, cfg: &DmetConfig) -> Result<DmetResult> {
    FragmentSpec::validate_partition(&cfg.fragments, ints.n_orbitals)?;
    if cfg.max_cycles == 0 {
        return Err(Error::Invalid("at least one DMET cycle is required".into()));
    }
    let mf = crate::integrals::run_rhf(ints, 500, 1e-10)?;
    let baths = cfg
        .fragments
        .iter()
        .map(|f| build_bath(&mf, f, cfg.bath))
        .collect::<Result<Vec<_>>>()?;
    let target = ints.n_electrons as f64;

    let mut warm: Vec<Option<Vec<f64>>> = vec![None; baths.len()];
    let mut cycles: Vec<CycleRecord> = Vec::new();
    let mut outcomes: Vec<(Vec<EmbeddingProblem>, CycleOutcome)> = Vec::new();
    let mut executions = 0;

    let mut evaluate = |mu: f64, cycles: &mut Vec<CycleRecord>| -> Result<f64> {
        let cycle = cycles.len();
        let problems = baths
            .iter()
            .map(|b| build_embedded_hamiltonian(ints, b, mu))
            .collect::<Result<Vec<_>>>()?;
        let solutions = problems
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                solve_fragment(p, &cfg.solver, warm[i].as_deref(), mix_seed(cfg.seed, (cycle * 1000 + i) as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        for (w, s) in warm.iter_mut().zip(&solutions) {
            *w = Some(s.theta.clone());
        }
        executions += solutions.iter().map(|s| s.executions).sum::<usize>();
        let energy = assemble_total_energy(&problems, &solutions, ints)?;
        let n: f64 = problems.iter().zip(&solutions).map(|(p, s)| fragment_electrons(p, &s.rdms)).sum();
        log::info!("dmet cycle {cycle}: mu = {mu:.6}, N = {n:.6}, E = {energy:.10}");
        cycles.push(CycleRecord { cycle, mu, n_electrons: n, energy });
        outcomes.push((problems, CycleOutcome { energy, n_electrons: n, solutions }));
        Ok(n - target)
    };

    let mut mu_warning = false;
    let tol = cfg.electron_tol;
    let f0 = evaluate(0.0, &mut cycles)?;
    if f0.abs() >= tol && cycles.len() < cfg.max_cycles {
        // Fragment occupation grows with mu; look for a sign change.
        let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
        let (mut lo, mut flo) = (0.0, f0);
        let mut hi = dir;
        let mut fhi = evaluate(hi, &mut cycles)?;
        while fhi.signum() == flo.signum() && fhi.abs() >= tol {
            if hi.abs() >= 8.0 || cycles.len() >= cfg.max_cycles {
                mu_warning = hi.abs() >= 8.0;
                break;
            }
            (lo, flo) = (hi, fhi);
            hi *= 2.0;
            fhi = evaluate(hi, &mut cycles)?;
        }
        if fhi.signum() != flo.signum() {
            while cycles.len() < cfg.max_cycles {
                let mid = 0.5 * (lo + hi);
                let fm = evaluate(mid, &mut cycles)?;
                if fm.abs() < tol {
                    break;
                }
                if fm.signum() == flo.signum() {
                    (lo, flo) = (mid, fm);
                } else {
                    hi = mid;
                }
            }
        }
    }
    if mu_warning {
        log::warn!("chemical potential could not bracket the electron count within [-8, 8]");
    }

    let best_cycle = cycles
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy))
        .map(|(i, _)| i)
        .expect("at least one cycle");
    let (problems, outcome) = outcomes.swap_remove(best_cycle);
    let fragments = problems
        .iter()
        .zip(&outcome.solutions)
        .map(|(p, s)| FragmentReport {
            label: p.bath.fragment.label.clone(),
            n_orbitals: p.n_orbitals(),
            n_electrons: p.n_electrons(),
            n_qubits: s.n_qubits,
            n_qubits_tapered: s.n_qubits_tapered,
            resources: s.resources,
            theta: s.theta.clone(),
            history: s.history.clone(),
        })
        .collect();
    let _ = outcome.n_electrons;
    Ok(DmetResult {
        energy: outcome.energy,
        mu: cycles[best_cycle].mu,
        cycles,
        best_cycle,
        mu_warning,
        mean_field: mf,
        fragments,
        executions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::{parse_fcidump, run_rhf};
    use crate::operators::jordan_wigner;
    use crate::simulator::StateVector;

    fn fixture(rel: &str) -> IntegralSet {
        let path = format!("{}/../../fixtures/{rel}", env!("CARGO_MANIFEST_DIR"));
        parse_fcidump(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn parses_and_validates_fragments() {
        let f = FragmentSpec::parse_list("0,1; 2,3").unwrap();
        assert_eq!(f[1].orbital_indices, vec![2, 3]);
        assert_eq!(f[1].label, "2,3");
        assert!(FragmentSpec::validate_partition(&f, 4).is_ok());
        assert!(FragmentSpec::validate_partition(&f, 5).is_err());
        let overlap = FragmentSpec::parse_list("0,1;1,2,3").unwrap();
        assert!(FragmentSpec::validate_partition(&overlap, 4).is_err());
        assert!(FragmentSpec::parse_list("0,x").is_err());
        assert_eq!("auto".parse::<BathCount>().unwrap(), BathCount::Auto);
        assert_eq!("1".parse::<BathCount>().unwrap(), BathCount::Count(1));
    }

    #[test]
    fn bath_sizes_for_two_fragment_split() {
        let ints = fixture("h4/d1.000.fcidump");
        let mf = run_rhf(&ints, 500, 1e-10).unwrap();
        let frag = FragmentSpec::new(vec![0, 1]);
        for (count, k) in [(BathCount::Auto, 4), (BathCount::Count(1), 3), (BathCount::Count(0), 2)] {
            let b = build_bath(&mf, &frag, count).unwrap();
            assert_eq!(b.n_orbitals(), k);
            assert!(b.scores.windows(2).all(|w| w[0] >= w[1]));
            let ortho = b.basis.transpose() * &b.basis;
            assert!((ortho - DMatrix::identity(k, k)).amax() < 1e-10);
        }
        let too_many = build_bath(&mf, &frag, BathCount::Count(5)).unwrap();
        assert!(too_many.truncated_request);
        assert_eq!(too_many.n_orbitals(), 4);
    }

    #[test]
    fn whole_molecule_embedding_is_identity() {
        let ints = fixture("h4/d1.500.fcidump");
        let mf = run_rhf(&ints, 500, 1e-10).unwrap();
        let bath = build_bath(&mf, &FragmentSpec::whole(4), BathCount::Auto).unwrap();
        assert!(bath.scores.is_empty());
        let p = build_embedded_hamiltonian(&ints, &bath, 0.0).unwrap();
        assert!((&p.h1 - &ints.h1).amax() < 1e-14);
        assert!((p.constant - ints.e_core).abs() < 1e-14);
        assert_eq!(p.n_electrons(), 4);
    }

    #[test]
    fn chemical_potential_shift_is_linear() {
        let ints = fixture("h4/d1.000.fcidump");
        let mf = run_rhf(&ints, 500, 1e-10).unwrap();
        let bath = build_bath(&mf, &FragmentSpec::new(vec![0, 1]), BathCount::Count(1)).unwrap();
        let k = bath.n_orbitals();
        // A fixed normalized state with some weight on every basis vector.
        let amps: Vec<Complex64> = (0..1usize << (2 * k)).map(|j| Complex64::new(((j * 7 % 11) as f64 - 5.0) / 10.0, 0.0)).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi = StateVector::from_amplitudes(amps.iter().map(|a| a / norm).collect()).unwrap();
        let energy = |mu: f64| {
            let h = jordan_wigner(&build_embedded_hamiltonian(&ints, &bath, mu).unwrap().hamiltonian()).unwrap();
            psi.expectation(&h)
        };
        let obs = RdmObservables::new(k, None).unwrap();
        let values = obs.strings().into_iter().map(|p| (p, psi.expectation_pauli(&p))).collect();
        let rdms = obs.assemble(&values);
        let n_frag: f64 = (0..2).map(|p| rdms.rdm1[(p, p)]).sum();
        let delta = 0.37;
        assert!((energy(delta) - energy(0.0) + delta * n_frag).abs() < 1e-10);
    }

    #[test]
    fn exact_solver_densities_are_consistent() {
        let ints = fixture("h4/d1.300.fcidump");
        let mf = run_rhf(&ints, 500, 1e-10).unwrap();
        let bath = build_bath(&mf, &FragmentSpec::new(vec![0, 1]), BathCount::Count(1)).unwrap();
        let p = build_embedded_hamiltonian(&ints, &bath, 0.2).unwrap();
        let s = solve_fragment(&p, &FragmentSolver::Exact, None, 0).unwrap();
        s.rdms.check_invariants(p.n_electrons() as f64, 1e-10).unwrap();
        let ham = p.hamiltonian();
        let e = s.rdms.energy(&ham.h1, &ham.h2, ham.constant);
        assert!((e - s.solver_energy).abs() < 1e-10);
    }

    #[test]
    fn single_fragment_exact_reproduces_fci() {
        for (rel, fci) in [("h2/d0.735.fcidump", -1.137306035753), ("h4/d2.500.fcidump", -1.872215994424)] {
            let ints = fixture(rel);
            let cfg = DmetConfig::new(vec![FragmentSpec::whole(ints.n_orbitals)], BathCount::Auto, FragmentSolver::Exact);
            let r = run_dmet(&ints, &cfg).unwrap();
            assert_eq!(r.cycles.len(), 1);
            assert!((r.energy - fci).abs() < 1e-8, "{rel}: {}", r.energy - fci);
        }
    }

    #[test]
    fn symmetric_split_needs_no_chemical_potential() {
        let ints = fixture("h4/d1.500.fcidump");
        let frags = FragmentSpec::parse_list("0,1;2,3").unwrap();
        let r = run_dmet(&ints, &DmetConfig::new(frags, BathCount::Auto, FragmentSolver::Exact)).unwrap();
        assert!(r.mu.abs() < 0.05);
        assert!(!r.mu_warning);
    }

    #[test]
    fn cycle_cap_is_honored_and_minimum_reported() {
        let ints = fixture("h4/d1.000.fcidump");
        let frags = FragmentSpec::parse_list("0,1;2,3").unwrap();
        let mut cfg = DmetConfig::new(frags, BathCount::Count(1), FragmentSolver::Exact);
        cfg.max_cycles = 3;
        cfg.electron_tol = 1e-9;
        let r = run_dmet(&ints, &cfg).unwrap();
        assert_eq!(r.cycles.len(), 3);
        let min = r.cycles.iter().map(|c| c.energy).fold(f64::INFINITY, f64::min);
        assert_eq!(r.energy, min);
        assert_eq!(r.cycles[r.best_cycle].energy, min);
    }
}
