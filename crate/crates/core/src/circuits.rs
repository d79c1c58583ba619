//! Parameterized circuits and the UCCSD ansatz.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::jw::{fermion_product, hartree_fock_bits, spin_orbital};
use crate::operators::{Letter, PauliString, QubitOperator, TaperingMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    X,
    Rx,
    Ry,
    Rz,
    Cnot,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot => 2,
            _ => 1,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    fn name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::Cnot => "cx",
        }
    }
}

/// Rotation angle, either a number or `scale * theta[index]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Param { index: usize, scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    /// Target last for CNOT (`[control, target]`).
    pub qubits: Vec<usize>,
    pub angle: Option<Angle>,
}

impl Gate {
    pub fn h(q: usize) -> Self {
        Self { kind: GateKind::H, qubits: vec![q], angle: None }
    }

    pub fn x(q: usize) -> Self {
        Self { kind: GateKind::X, qubits: vec![q], angle: None }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cnot, qubits: vec![control, target], angle: None }
    }

    pub fn rotation(kind: GateKind, q: usize, angle: Angle) -> Self {
        debug_assert!(kind.is_rotation());
        Self { kind, qubits: vec![q], angle: Some(angle) }
    }

    pub fn rx(q: usize, theta: f64) -> Self {
        Self::rotation(GateKind::Rx, q, Angle::Fixed(theta))
    }

    pub fn ry(q: usize, theta: f64) -> Self {
        Self::rotation(GateKind::Ry, q, Angle::Fixed(theta))
    }

    pub fn rz(q: usize, theta: f64) -> Self {
        Self::rotation(GateKind::Rz, q, Angle::Fixed(theta))
    }

    /// Bound angle, or `None` for symbolic or angle-free gates.
    pub fn fixed_angle(&self) -> Option<f64> {
        match self.angle {
            Some(Angle::Fixed(a)) => Some(a),
            _ => None,
        }
    }

    /// 2x2 unitary of a one-qubit gate (row-major). Panics on symbolic angles.
    pub fn matrix_1q(&self) -> [[Complex64; 2]; 2] {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let angle = || {
            self.fixed_angle()
                .expect("gate must be bound before evaluation")
        };
        match self.kind {
            GateKind::H => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]]
            }
            GateKind::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
            GateKind::Rx => {
                let (s, co) = (angle() / 2.0).sin_cos();
                [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
            }
            GateKind::Ry => {
                let (s, co) = (angle() / 2.0).sin_cos();
                [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
            }
            GateKind::Rz => {
                let (s, co) = (angle() / 2.0).sin_cos();
                [[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]]
            }
            GateKind::Cnot => panic!("cnot is not a one-qubit gate"),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        match self.angle {
            Some(Angle::Fixed(a)) => write!(f, "({a})")?,
            Some(Angle::Param { index, scale }) => write!(f, "({scale}*t{index})")?,
            None => {}
        }
        for q in &self.qubits {
            write!(f, " {q}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    pub gates: Vec<Gate>,
    /// One name per parameter; `theta[i]` is named `parameters[i]`.
    pub parameters: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resources {
    pub cnot_count: usize,
    pub depth: usize,
    pub parameter_count: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new(), parameters: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters.len()
    }

    pub fn add_parameter(&mut self, name: impl Into<String>) -> usize {
        self.parameters.push(name.into());
        self.parameters.len() - 1
    }

    /// Appends a gate after checking its qubits and parameter reference.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if gate.qubits.len() != gate.kind.arity() {
            return Err(Error::Invalid(format!("{gate} has the wrong number of qubits")));
        }
        for (i, &q) in gate.qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::Invalid(format!(
                    "{gate} acts on qubit {q} of a {}-qubit circuit",
                    self.n_qubits
                )));
            }
            if gate.qubits[..i].contains(&q) {
                return Err(Error::Invalid(format!("{gate} repeats qubit {q}")));
            }
        }
        if gate.kind.is_rotation() != gate.angle.is_some() {
            return Err(Error::Invalid(format!("{gate} has a misplaced angle")));
        }
        if let Some(Angle::Param { index, .. }) = gate.angle {
            if index >= self.parameters.len() {
                return Err(Error::Invalid(format!("{gate} refers to unknown parameter {index}")));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn is_bound(&self) -> bool {
        self.gates
            .iter()
            .all(|g| !matches!(g.angle, Some(Angle::Param { .. })))
    }

    /// Replaces every symbolic angle with its value under `theta`.
    pub fn bind(&self, theta: &[f64]) -> Result<Circuit> {
        if theta.len() != self.parameters.len() {
            return Err(Error::Dimension {
                expected: self.parameters.len(),
                got: theta.len(),
            });
        }
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let mut g = g.clone();
                if let Some(Angle::Param { index, scale }) = g.angle {
                    g.angle = Some(Angle::Fixed(scale * theta[index]));
                }
                g
            })
            .collect();
        Ok(Circuit { n_qubits: self.n_qubits, gates, parameters: self.parameters.clone() })
    }

    /// One gate per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\nparameters {}\n", self.n_qubits, self.parameters.len());
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }
}

pub fn count_resources(c: &Circuit) -> Resources {
    let mut level = vec![0usize; c.n_qubits];
    let mut cnot_count = 0;
    for g in &c.gates {
        if g.qubits.len() == 2 {
            cnot_count += 1;
        }
        let d = g.qubits.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
        for &q in &g.qubits {
            level[q] = d;
        }
    }
    Resources {
        cnot_count,
        depth: level.into_iter().max().unwrap_or(0),
        parameter_count: c.parameter_count(),
    }
}

/// Appends `exp(i * scale * theta[index] * P)` (or a fixed angle) using a
/// basis change, a CNOT ladder and one RZ.
pub fn append_pauli_exponential(c: &mut Circuit, p: &PauliString, angle: Angle) -> Result<()> {
    let support: Vec<usize> = (0..p.n_qubits()).filter(|&q| p.letter(q) != Letter::I).collect();
    let Some(&last) = support.last() else {
        // Global phase only.
        return Ok(());
    };
    let rz_angle = match angle {
        Angle::Fixed(a) => Angle::Fixed(-2.0 * a),
        Angle::Param { index, scale } => Angle::Param { index, scale: -2.0 * scale },
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    for &q in &support {
        match p.letter(q) {
            Letter::X => c.push(Gate::h(q))?,
            Letter::Y => c.push(Gate::rx(q, half_pi))?,
            _ => {}
        }
    }
    for w in support.windows(2) {
        c.push(Gate::cnot(w[0], w[1]))?;
    }
    c.push(Gate::rotation(GateKind::Rz, last, rz_angle))?;
    for w in support.windows(2).rev() {
        c.push(Gate::cnot(w[0], w[1]))?;
    }
    for &q in &support {
        match p.letter(q) {
            Letter::X => c.push(Gate::h(q))?,
            Letter::Y => c.push(Gate::rx(q, -half_pi))?,
            _ => {}
        }
    }
    Ok(())
}

/// Spin-adapted excitation: generator `T - T^dagger` (anti-Hermitian) over
/// spin-orbitals, sharing one amplitude.
#[derive(Debug, Clone)]
pub struct Excitation {
    pub name: String,
    pub generator: QubitOperator,
}

fn excitation_operator(creates: &[usize], annihilates: &[usize], n_modes: usize) -> QubitOperator {
    let mut ops: Vec<(usize, bool)> = creates.iter().map(|&m| (m, true)).collect();
    ops.extend(annihilates.iter().rev().map(|&m| (m, false)));
    let t = fermion_product(&ops, n_modes);
    let mut g = t.clone();
    g.add_assign(&t.adjoint().scaled(Complex64::new(-1.0, 0.0)));
    g
}

/// Singles then doubles, each in lexicographic order. Singles share one
/// amplitude between alpha and beta; doubles share one amplitude between a
/// spin-orbital excitation and its spin-flipped partner.
pub fn uccsd_excitations(n_spin_orbitals: usize, n_electrons: usize) -> Vec<Excitation> {
    let n_orb = n_spin_orbitals / 2;
    let n_occ = n_electrons / 2;
    let modes = 2 * n_orb;
    let mut out = Vec::new();

    for i in 0..n_occ {
        for a in n_occ..n_orb {
            let mut g = QubitOperator::new(modes);
            for spin in 0..2 {
                g.add_assign(&excitation_operator(
                    &[spin_orbital(a, spin, n_orb)],
                    &[spin_orbital(i, spin, n_orb)],
                    modes,
                ));
            }
            out.push(Excitation { name: format!("s{i}_{a}"), generator: g });
        }
    }

    let spin = |m: usize| m / n_orb;
    let occ: Vec<usize> = (0..2)
        .flat_map(|s| (0..n_occ).map(move |p| spin_orbital(p, s, n_orb)))
        .collect();
    let virt: Vec<usize> = (0..2)
        .flat_map(|s| (n_occ..n_orb).map(move |p| spin_orbital(p, s, n_orb)))
        .collect();
    let flip = |m: usize| (m + n_orb) % modes;
    let canonical = |v: [usize; 2]| if v[0] < v[1] { v } else { [v[1], v[0]] };
    let mut seen = std::collections::BTreeSet::new();
    for (x, &i) in occ.iter().enumerate() {
        for &j in &occ[x + 1..] {
            for (y, &a) in virt.iter().enumerate() {
                for &b in &virt[y + 1..] {
                    if spin(i) + spin(j) != spin(a) + spin(b) {
                        continue;
                    }
                    let key = ([i, j], [a, b]);
                    if seen.contains(&key) {
                        continue;
                    }
                    let partner = (canonical([flip(i), flip(j)]), canonical([flip(a), flip(b)]));
                    seen.insert(key);
                    let mut g = excitation_operator(&[a, b], &[i, j], modes);
                    if partner != key {
                        seen.insert(partner);
                        g.add_assign(&excitation_operator(&partner.1, &partner.0, modes));
                    }
                    if g.is_empty() {
                        continue;
                    }
                    out.push(Excitation { name: format!("d{i}_{j}_{a}_{b}"), generator: g });
                }
            }
        }
    }
    out
}

/// Hartree-Fock preparation followed by one Trotter step of the UCCSD
/// exponential. Excitations that break a tapering symmetry are dropped.
pub fn build_uccsd(
    n_qubits: usize,
    n_electrons: usize,
    tapering: Option<&TaperingMap>,
) -> Result<Circuit> {
    if n_electrons > n_qubits {
        return Err(Error::Invalid(format!(
            "{n_electrons} electrons do not fit in {n_qubits} spin-orbitals"
        )));
    }
    if !n_qubits.is_multiple_of(2) || !n_electrons.is_multiple_of(2) {
        return Err(Error::Invalid(
            "the spin-adapted ansatz needs an even number of spin-orbitals and electrons".into(),
        ));
    }
    if let Some(map) = tapering {
        if map.n_qubits() != n_qubits {
            return Err(Error::Dimension { expected: n_qubits, got: map.n_qubits() });
        }
    }
    let width = tapering.map_or(n_qubits, |m| m.n_qubits_tapered());
    let reference = match tapering {
        Some(m) => m.taper_bits(hartree_fock_bits(n_qubits / 2, n_electrons)),
        None => hartree_fock_bits(n_qubits / 2, n_electrons),
    };

    let mut c = Circuit::new(width);
    for q in 0..width {
        if reference >> q & 1 == 1 {
            c.push(Gate::x(q))?;
        }
    }
    for ex in uccsd_excitations(n_qubits, n_electrons) {
        let g = match tapering {
            Some(m) => match m.taper_operator(&ex.generator, false) {
                Ok(g) => g,
                Err(_) => continue,
            },
            None => ex.generator,
        };
        if g.is_empty() {
            continue;
        }
        let index = c.add_parameter(ex.name);
        // g = i * sum c_k P_k with real c_k.
        for (p, coeff) in g.iter() {
            debug_assert!(coeff.re.abs() < 1e-10);
            append_pauli_exponential(&mut c, p, Angle::Param { index, scale: coeff.im })?;
        }
    }
    Ok(c)
}
