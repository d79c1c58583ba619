//! End-to-end runs over FCIDUMP fixtures and their CSV result rows.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::circuits::{build_uccsd, count_resources, Resources};
use crate::dmet::{
    build_bath, build_embedded_hamiltonian, qubit_problem, run_dmet, BathCount, DmetConfig, FragmentSolver,
    FragmentSpec, RdmBackend, RefineSettings, VqeSolver,
};
use crate::error::{Error, Result};
use crate::integrals::{run_rhf, IntegralSet};
use crate::operators::{jordan_wigner, FermionHamiltonian};
use crate::oracle::exact_ground_energy;
use crate::refine::{refine_parameters, KernelFamily, RefinementConfig};
use crate::simulator::{mix_seed, Backend, EnergyEstimator, NoiseModel, Shots};
use crate::vqe::{run_vqe, OptHistory, Optimizer, SequentialConfig, SpsaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pipeline {
    Vqe,
    DmetVqe,
    DmetExact,
}

impl FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vqe" => Ok(Pipeline::Vqe),
            "dmet-vqe" => Ok(Pipeline::DmetVqe),
            "dmet-exact" => Ok(Pipeline::DmetExact),
            _ => Err(Error::Invalid(format!("pipeline must be vqe, dmet-vqe or dmet-exact, got `{s}`"))),
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pipeline::Vqe => "vqe",
            Pipeline::DmetVqe => "dmet-vqe",
            Pipeline::DmetExact => "dmet-exact",
        })
    }
}

/// Reference energies shipped next to the fixtures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenRow {
    pub distance: f64,
    pub e_fci: f64,
    pub e_rhf: f64,
}

pub fn read_golden(path: impl AsRef<Path>) -> Result<Vec<GoldenRow>> {
    let mut rdr = csv::Reader::from_path(path.as_ref()).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format { line: i + 2, msg: e.to_string() })?;
        let field = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Format { line: i + 2, msg: format!("column {k} is not a number") })
        };
        rows.push(GoldenRow { distance: field(0)?, e_fci: field(1)?, e_rhf: field(2)? });
    }
    Ok(rows)
}

/// Fixture file name for a bond distance, e.g. `d2.500.fcidump`.
pub fn fixture_name(distance: f64) -> String {
    format!("d{distance:.3}.fcidump")
}

/// FCI energy for a fixture: the neighbouring `golden.csv` when it lists the
/// distance, otherwise exact diagonalization.
pub fn reference_energy(ints: &IntegralSet) -> Result<f64> {
    if let (Some(src), Some(d)) = (&ints.metadata.source, ints.metadata.distance) {
        let golden = src.with_file_name("golden.csv");
        if golden.exists() {
            if let Some(row) = read_golden(&golden)?.into_iter().find(|r| (r.distance - d).abs() < 5e-4) {
                return Ok(row.e_fci);
            }
        }
    }
    let ham = FermionHamiltonian { h1: ints.h1.clone(), h2: ints.h2.clone(), constant: ints.e_core };
    Ok(exact_ground_energy(&jordan_wigner(&ham)?, Some(ints.n_electrons))?.ground_energy())
}

/// Consecutive orbital pairs, the one-atom-per-pair split of a hydrogen chain.
pub fn default_fragments(n_orbitals: usize) -> Vec<FragmentSpec> {
    (0..n_orbitals)
        .step_by(2)
        .map(|p| FragmentSpec::new((p..(p + 2).min(n_orbitals)).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub fcidump: PathBuf,
    pub pipeline: Pipeline,
    /// `None` splits into orbital pairs.
    pub fragments: Option<Vec<FragmentSpec>>,
    pub bath: BathCount,
    /// Preset name or noise config path.
    pub noise: String,
    pub shots: Shots,
    pub seed: u64,
    pub rdm_backend: RdmBackend,
    pub refine: bool,
    pub nu: f64,
    pub lambda: f64,
    pub c: f64,
    pub max_cycles: usize,
    pub spsa_iterations: usize,
    pub taper: bool,
}

impl RunSpec {
    pub fn new(fcidump: impl Into<PathBuf>, pipeline: Pipeline) -> Self {
        Self {
            fcidump: fcidump.into(),
            pipeline,
            fragments: None,
            bath: BathCount::Auto,
            noise: "none".into(),
            shots: Shots::Exact,
            seed: 0,
            rdm_backend: RdmBackend::Noisy,
            refine: false,
            nu: 5.5,
            lambda: 1e-4,
            c: 1.0,
            max_cycles: 10,
            spsa_iterations: 200,
            taper: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.refine && self.pipeline == Pipeline::DmetExact {
            return Err(Error::Invalid("refinement needs an optimizer history; dmet-exact has none".into()));
        }
        if self.refine && self.backend()?.is_noiseless_exact() {
            return Err(Error::Invalid("refinement needs a noisy history; set --noise or --shots".into()));
        }
        if self.max_cycles == 0 {
            return Err(Error::Invalid("max-dmet-cycles must be at least 1".into()));
        }
        if self.spsa_iterations == 0 {
            return Err(Error::Invalid("spsa iterations must be at least 1".into()));
        }
        KernelFamily::matern(self.nu)?;
        if !(self.lambda > 0.0) || !(self.c > 0.0) {
            return Err(Error::Invalid("lambda and c must be positive".into()));
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<Option<NoiseModel>> {
        let m = NoiseModel::resolve(&self.noise)?;
        Ok(if m.has_gate_noise() || m.has_readout_error() { Some(m) } else { None })
    }

    pub fn backend(&self) -> Result<Backend> {
        Ok(Backend::new(self.shots, self.noise_model()?))
    }

    /// Sequential minimisation when estimates are exact, SPSA otherwise.
    pub fn optimizer(&self) -> Result<Optimizer> {
        Ok(if self.backend()?.is_noiseless_exact() {
            Optimizer::Sequential(SequentialConfig::default())
        } else {
            Optimizer::Spsa(SpsaConfig { iterations: self.spsa_iterations, seed: self.seed, ..Default::default() })
        })
    }

    fn refine_settings(&self) -> Result<Option<RefineSettings>> {
        if !self.refine {
            return Ok(None);
        }
        Ok(Some(RefineSettings {
            family: KernelFamily::matern(self.nu)?,
            lambda: self.lambda,
            config: RefinementConfig { c: self.c, ..Default::default() },
        }))
    }

    /// Short method name used in result rows.
    pub fn method_label(&self) -> String {
        let noisy = self.noise != "none" && self.noise != "noiseless";
        match self.pipeline {
            Pipeline::Vqe => if self.refine { "VQE+PR".into() } else { "VQE".into() },
            Pipeline::DmetExact => match self.bath {
                BathCount::Auto => "DMET-exact".into(),
                BathCount::Count(k) => format!("Bath{k}-exact"),
            },
            Pipeline::DmetVqe => {
                let mut s = match self.bath {
                    BathCount::Auto => "DMET+VQE".to_string(),
                    BathCount::Count(k) => format!("Bath{k}"),
                };
                if noisy && self.rdm_backend == RdmBackend::Noiseless {
                    s.push_str("+NLRDM");
                }
                if self.refine {
                    s.push_str("+PR");
                }
                s
            }
        }
    }

    /// Canonical `key = value` text of every setting that affects the result.
    pub fn canonical(&self) -> String {
        let frags = match &self.fragments {
            None => "pairs".to_string(),
            Some(f) => f
                .iter()
                .map(|g| g.orbital_indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","))
                .collect::<Vec<_>>()
                .join(";"),
        };
        let fixture = self.fcidump.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        format!(
            "fcidump = {fixture}\npipeline = {}\nfragments = {frags}\nbath-count = {}\nnoise = {}\nshots = {}\nseed = {}\n\
             rdm-backend = {}\nrefine = {}\nnu = {}\nlambda = {:e}\nc = {}\nmax-dmet-cycles = {}\nspsa-iterations = {}\ntaper = {}\n",
            self.pipeline,
            self.bath,
            self.noise,
            self.shots,
            self.seed,
            self.rdm_backend,
            self.refine,
            self.nu,
            self.lambda,
            self.c,
            self.max_cycles,
            self.spsa_iterations,
            self.taper,
        )
    }

    /// First 16 hex digits of the SHA-256 of [`RunSpec::canonical`].
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FragmentSummary {
    pub label: String,
    pub n_qubits: usize,
    pub n_qubits_tapered: usize,
    pub resources: Option<Resources>,
    pub history: Option<OptHistory>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub distance: Option<f64>,
    pub method: String,
    pub energy: f64,
    pub e_fci: f64,
    pub wall_time: f64,
    pub seed: u64,
    pub config_hash: String,
    pub cycles: usize,
    pub mu: f64,
    pub mu_warning: bool,
    pub fragments: Vec<FragmentSummary>,
}

impl RunOutcome {
    pub fn abs_error(&self) -> f64 {
        (self.energy - self.e_fci).abs()
    }
}

fn whole_molecule_vqe(ints: &IntegralSet, spec: &RunSpec) -> Result<(f64, FragmentSummary)> {
    let mf = run_rhf(ints, 500, 1e-10)?;
    let bath = build_bath(&mf, &FragmentSpec::whole(ints.n_orbitals), BathCount::Auto)?;
    let problem = build_embedded_hamiltonian(ints, &bath, 0.0)?;
    let qp = qubit_problem(&problem, spec.taper)?;
    let ansatz = build_uccsd(2 * ints.n_orbitals, ints.n_electrons, spec.taper.then_some(&qp.tapering))?;
    let backend = spec.backend()?;
    let result = run_vqe(&qp.tapered, &ansatz, &backend, &spec.optimizer()?, None, spec.seed)?;
    let mut energy = result.energy;
    if let Some(r) = spec.refine_settings()? {
        if ansatz.parameter_count() > 0 {
            let cfg = RefinementConfig { seed: mix_seed(spec.seed, 7), ..r.config };
            let refined = refine_parameters(&result.history, r.family, r.lambda, &cfg)?;
            let estimator = EnergyEstimator::new(qp.tapered.clone(), backend);
            energy = estimator.estimate(&ansatz.bind(&refined.theta)?, mix_seed(spec.seed, 13))?.value;
        }
    }
    Ok((
        energy,
        FragmentSummary {
            label: "whole".into(),
            n_qubits: 2 * ints.n_orbitals,
            n_qubits_tapered: qp.tapered.n_qubits(),
            resources: Some(count_resources(&ansatz)),
            history: Some(result.history),
        },
    ))
}

/// Runs one configuration end to end.
pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    spec.validate()?;
    let ints = IntegralSet::from_fcidump_path(&spec.fcidump)?;
    run_on(&ints, spec)
}

/// As [`run`], with integrals already loaded.
pub fn run_on(ints: &IntegralSet, spec: &RunSpec) -> Result<RunOutcome> {
    spec.validate()?;
    let start = Instant::now();
    let e_fci = reference_energy(ints)?;
    let (energy, cycles, mu, mu_warning, fragments) = match spec.pipeline {
        Pipeline::Vqe => {
            let (e, f) = whole_molecule_vqe(ints, spec)?;
            (e, 1, 0.0, false, vec![f])
        }
        Pipeline::DmetVqe | Pipeline::DmetExact => {
            let solver = if spec.pipeline == Pipeline::DmetExact {
                FragmentSolver::Exact
            } else {
                FragmentSolver::Vqe(VqeSolver {
                    backend: spec.backend()?,
                    optimizer: spec.optimizer()?,
                    rdm_backend: spec.rdm_backend,
                    refine: spec.refine_settings()?,
                    taper: spec.taper,
                })
            };
            let fragments = spec.fragments.clone().unwrap_or_else(|| default_fragments(ints.n_orbitals));
            let mut cfg = DmetConfig::new(fragments, spec.bath, solver);
            cfg.max_cycles = spec.max_cycles;
            cfg.seed = spec.seed;
            let r = run_dmet(ints, &cfg)?;
            let frags = r
                .fragments
                .into_iter()
                .map(|f| FragmentSummary {
                    label: f.label,
                    n_qubits: f.n_qubits,
                    n_qubits_tapered: f.n_qubits_tapered,
                    resources: f.resources,
                    history: f.history,
                })
                .collect();
            (r.energy, r.cycles.len(), r.mu, r.mu_warning, frags)
        }
    };
    if !energy.is_finite() {
        return Err(Error::Numerical(format!("{} produced a non-finite energy", spec.method_label())));
    }
    Ok(RunOutcome {
        distance: ints.metadata.distance,
        method: spec.method_label(),
        energy,
        e_fci,
        wall_time: start.elapsed().as_secs_f64(),
        seed: spec.seed,
        config_hash: spec.config_hash(),
        cycles,
        mu,
        mu_warning,
        fragments,
    })
}

/// Column order of result CSVs.
pub const CSV_HEADER: [&str; 11] = [
    "distance", "method", "energy", "abs_error", "e_fci", "wall_time_s", "seed", "config_hash", "cycles", "mu", "status",
];

/// One CSV row: a finished run or a failed one.
#[derive(Debug, Clone)]
pub enum ResultRow {
    Ok(RunOutcome),
    Failed { distance: Option<f64>, method: String, seed: u64, config_hash: String, message: String },
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        matches!(self, ResultRow::Ok(_))
    }

    fn fields(&self, timing: bool) -> Vec<String> {
        let dist = |d: Option<f64>| d.map_or_else(String::new, |d| format!("{d:.3}"));
        match self {
            ResultRow::Ok(o) => vec![
                dist(o.distance),
                o.method.clone(),
                format!("{:.10}", o.energy),
                format!("{:.6e}", o.abs_error()),
                format!("{:.10}", o.e_fci),
                if timing { format!("{:.3}", o.wall_time) } else { String::new() },
                o.seed.to_string(),
                o.config_hash.clone(),
                o.cycles.to_string(),
                format!("{:.6}", o.mu),
                if o.mu_warning { "ok:mu-unbracketed".into() } else { "ok".into() },
            ],
            ResultRow::Failed { distance, method, seed, config_hash, message } => vec![
                dist(*distance),
                method.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                seed.to_string(),
                config_hash.clone(),
                String::new(),
                String::new(),
                format!("error: {message}"),
            ],
        }
    }
}

/// Writes the header and rows; the wall-time column is left empty when
/// `timing` is off so repeated runs compare byte for byte.
pub fn write_rows<W: Write>(w: W, rows: &[ResultRow], timing: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Invalid(e.to_string());
    wtr.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        wtr.write_record(r.fields(timing)).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Method presets accepted by sweeps; each one adjusts a base spec.
pub fn apply_method(base: &RunSpec, method: &str) -> Result<RunSpec> {
    let mut s = base.clone();
    match method {
        "vqe" => s.pipeline = Pipeline::Vqe,
        "dmet-exact" => {
            s.pipeline = Pipeline::DmetExact;
            s.refine = false;
        }
        "dmet-vqe" => {
            s.pipeline = Pipeline::DmetVqe;
            s.bath = BathCount::Auto;
        }
        _ => {
            let rest = method
                .strip_prefix("bath")
                .ok_or_else(|| Error::Invalid(format!("unknown method `{method}`")))?;
            let mut parts = rest.split('+');
            let k: usize = parts
                .next()
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| Error::Invalid(format!("unknown method `{method}`")))?;
            s.pipeline = Pipeline::DmetVqe;
            s.bath = BathCount::Count(k);
            s.rdm_backend = RdmBackend::Noisy;
            s.refine = false;
            for p in parts {
                match p {
                    "nlrdm" => s.rdm_backend = RdmBackend::Noiseless,
                    "pr" => s.refine = true,
                    _ => return Err(Error::Invalid(format!("unknown method modifier `{p}` in `{method}`"))),
                }
            }
        }
    }
    Ok(s)
}
