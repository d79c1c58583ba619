//! Molecular integrals in an orthonormal orbital basis and the restricted
//! mean field computed from them.
//!
//! Two-electron integrals use chemists' notation, `(pq|rs)`, and FCIDUMP
//! files use 1-based orbital indices with zeros marking one-body and
//! constant entries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Dense rank-4 tensor with `n` entries per axis, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.n + q) * self.n + r) * self.n + s
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.data[self.offset(p, q, r, s)]
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        let k = self.offset(p, q, r, s);
        self.data[k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Writes `v` to all eight index permutations related by real-orbital
    /// chemists'-notation symmetry.
    pub fn set_8fold(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        for &(a, b, c, d) in &[
            (p, q, r, s),
            (q, p, r, s),
            (p, q, s, r),
            (q, p, s, r),
            (r, s, p, q),
            (s, r, p, q),
            (r, s, q, p),
            (s, r, q, p),
        ] {
            self.set(a, b, c, d, v);
        }
    }

    /// Largest deviation from 8-fold permutational symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.get(p, q, r, s);
                        worst = worst
                            .max((v - self.get(q, p, r, s)).abs())
                            .max((v - self.get(p, q, s, r)).abs())
                            .max((v - self.get(r, s, p, q)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Transforms every index with the columns of `c` (`n x k`).
    pub fn transform(&self, c: &DMatrix<f64>) -> Tensor4 {
        let n = self.n;
        assert_eq!(c.nrows(), n);
        let k = c.ncols();
        // Quarter transformations, one index at a time.
        let mut a = vec![0.0; k * n * n * n];
        for i in 0..k {
            for p in 0..n {
                let cpi = c[(p, i)];
                if cpi == 0.0 {
                    continue;
                }
                for rest in 0..n * n * n {
                    a[i * n * n * n + rest] += cpi * self.data[p * n * n * n + rest];
                }
            }
        }
        let mut b = vec![0.0; k * k * n * n];
        for i in 0..k {
            for j in 0..k {
                for q in 0..n {
                    let cqj = c[(q, j)];
                    if cqj == 0.0 {
                        continue;
                    }
                    for rest in 0..n * n {
                        b[(i * k + j) * n * n + rest] += cqj * a[(i * n + q) * n * n + rest];
                    }
                }
            }
        }
        let mut d = vec![0.0; k * k * k * n];
        for ij in 0..k * k {
            for l in 0..k {
                for r in 0..n {
                    let crl = c[(r, l)];
                    if crl == 0.0 {
                        continue;
                    }
                    for s in 0..n {
                        d[(ij * k + l) * n + s] += crl * b[(ij * n + r) * n + s];
                    }
                }
            }
        }
        let mut out = Tensor4::zeros(k);
        for ijl in 0..k * k * k {
            for m in 0..k {
                let mut acc = 0.0;
                for s in 0..n {
                    acc += c[(s, m)] * d[ijl * n + s];
                }
                out.data[ijl * k + m] = acc;
            }
        }
        out
    }
}

/// Optional provenance attached to an integral set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    pub source: Option<PathBuf>,
    /// Bond distance in angstrom, when known.
    pub distance: Option<f64>,
}

/// One- and two-electron integrals plus the constant energy term.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub h1: DMatrix<f64>,
    pub h2: Tensor4,
    pub e_core: f64,
    pub metadata: Metadata,
}

impl IntegralSet {
    pub fn new(h1: DMatrix<f64>, h2: Tensor4, e_core: f64, n_electrons: usize) -> Result<Self> {
        let n = h1.nrows();
        if h1.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: h1.ncols(),
            });
        }
        if h2.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                got: h2.dim(),
            });
        }
        let set = Self {
            n_orbitals: n,
            n_electrons,
            h1,
            h2,
            e_core,
            metadata: Metadata::default(),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_orbitals;
        for p in 0..n {
            for q in 0..p {
                if (self.h1[(p, q)] - self.h1[(q, p)]).abs() > SYMMETRY_TOL {
                    return Err(Error::Invalid(format!("h1 not symmetric at ({p},{q})")));
                }
            }
        }
        let defect = self.h2.symmetry_defect();
        if defect > SYMMETRY_TOL {
            return Err(Error::Invalid(format!(
                "h2 violates 8-fold symmetry by {defect:e}"
            )));
        }
        if !self.n_electrons.is_multiple_of(2) {
            return Err(Error::Invalid(format!(
                "odd electron count {} (restricted mean field only)",
                self.n_electrons
            )));
        }
        if self.n_electrons > 2 * n {
            return Err(Error::Invalid(format!(
                "{} electrons do not fit in {n} spatial orbitals",
                self.n_electrons
            )));
        }
        Ok(())
    }

    /// Expresses the integrals in the orbitals given by the columns of `c`.
    /// The constant and electron count are carried over unchanged.
    pub fn rotated(&self, c: &DMatrix<f64>) -> IntegralSet {
        IntegralSet {
            n_orbitals: c.ncols(),
            n_electrons: self.n_electrons,
            h1: c.transpose() * &self.h1 * c,
            h2: self.h2.transform(c),
            e_core: self.e_core,
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_fcidump_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut set = parse_fcidump(&text)?;
        set.metadata.source = Some(path.to_path_buf());
        set.metadata.distance = distance_from_file_name(path);
        Ok(set)
    }
}

/// Recovers the bond distance from a fixture name such as `d2.500.fcidump`.
pub fn distance_from_file_name(path: &Path) -> Option<f64> {
    let stem = path.file_stem()?.to_str()?;
    stem.strip_prefix('d')?.parse().ok()
}

fn header_value<T: std::str::FromStr>(
    entries: &[(String, String, usize)],
    key: &str,
) -> Result<Option<T>> {
    match entries.iter().find(|(k, _, _)| k == key) {
        None => Ok(None),
        Some((_, v, line)) => v.trim().parse().map(Some).map_err(|_| Error::Format {
            line: *line,
            msg: format!("cannot parse {key} value `{}`", v.trim()),
        }),
    }
}

/// Parses FCIDUMP text.
pub fn parse_fcidump(text: &str) -> Result<IntegralSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let mut entries: Vec<(String, String, usize)> = Vec::new();
    let mut header_end = 0;
    let mut started = false;
    for (line_no, raw) in lines.by_ref() {
        let mut line = raw.trim().to_string();
        if line.is_empty() && !started {
            continue;
        }
        if !started {
            let upper = line.to_ascii_uppercase();
            if !upper.starts_with("&FCI") {
                return Err(Error::Format {
                    line: line_no,
                    msg: "expected `&FCI` header".into(),
                });
            }
            line = line[4..].to_string();
            started = true;
        }
        let upper = line.to_ascii_uppercase();
        let done = upper.contains("&END") || upper.trim() == "/" || upper.ends_with('/');
        let body = match upper.find("&END") {
            Some(k) => line[..k].to_string(),
            None => line.trim_end_matches('/').to_string(),
        };
        for piece in body.split(',') {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            if let Some((k, v)) = piece.split_once('=') {
                entries.push((k.trim().to_ascii_uppercase(), v.to_string(), line_no));
            } else if piece.parse::<f64>().is_err() {
                return Err(Error::Format {
                    line: line_no,
                    msg: format!("unrecognized header token `{piece}`"),
                });
            }
        }
        if done {
            header_end = line_no;
            break;
        }
    }
    if !started || header_end == 0 {
        return Err(Error::Format {
            line: header_end.max(1),
            msg: "unterminated or missing FCIDUMP header".into(),
        });
    }

    let n: usize = header_value(&entries, "NORB")?.ok_or(Error::Format {
        line: header_end,
        msg: "missing NORB".into(),
    })?;
    let n_electrons: usize = header_value(&entries, "NELEC")?.ok_or(Error::Format {
        line: header_end,
        msg: "missing NELEC".into(),
    })?;

    let mut h1 = DMatrix::zeros(n, n);
    let mut h2 = Tensor4::zeros(n);
    let mut e_core = 0.0;
    for (line_no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Format {
                line: line_no,
                msg: format!("expected value and four indices, found {} fields", fields.len()),
            });
        }
        let value: f64 = fields[0]
            .replace(['D', 'd'], "e")
            .parse()
            .map_err(|_| Error::Format {
                line: line_no,
                msg: format!("cannot parse value `{}`", fields[0]),
            })?;
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| Error::Format {
                line: line_no,
                msg: format!("cannot parse index `{f}`"),
            })?;
            if *slot > n {
                return Err(Error::Bounds {
                    line: line_no,
                    index: *slot,
                    bound: n,
                });
            }
        }
        match idx {
            [0, 0, 0, 0] => e_core = value,
            [p, q, 0, 0] if p > 0 && q > 0 => {
                h1[(p - 1, q - 1)] = value;
                h1[(q - 1, p - 1)] = value;
            }
            [_, 0, 0, 0] => {} // orbital energies are not used
            [p, q, r, s] if p > 0 && q > 0 && r > 0 && s > 0 => {
                h2.set_8fold(p - 1, q - 1, r - 1, s - 1, value)
            }
            _ => {
                return Err(Error::Format {
                    line: line_no,
                    msg: "unsupported index pattern".into(),
                })
            }
        }
    }

    let mut set = IntegralSet {
        n_orbitals: n,
        n_electrons,
        h1,
        h2,
        e_core,
        metadata: Metadata::default(),
    };
    set.validate()?;
    set.metadata = Metadata::default();
    Ok(set)
}

/// Serializes to FCIDUMP text. Values are written in shortest round-trip
/// form so that parsing the output reproduces the tensors bit-exactly.
pub fn to_fcidump(ints: &IntegralSet) -> String {
    let n = ints.n_orbitals;
    let mut out = String::new();
    let orbsym = vec!["1"; n].join(",");
    let _ = writeln!(
        out,
        " &FCI NORB={n},NELEC={},MS2=0,\n  ORBSYM={orbsym},\n  ISYM=1,\n &END",
        ints.n_electrons
    );
    for p in 0..n {
        for q in 0..=p {
            for r in 0..n {
                for s in 0..=r {
                    if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                        continue;
                    }
                    let v = ints.h2.get(p, q, r, s);
                    if v != 0.0 {
                        let _ = writeln!(out, "{v:e} {} {} {} {}", p + 1, q + 1, r + 1, s + 1);
                    }
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..=p {
            let v = ints.h1[(p, q)];
            if v != 0.0 {
                let _ = writeln!(out, "{v:e} {} {} 0 0", p + 1, q + 1);
            }
        }
    }
    let _ = writeln!(out, "{:e} 0 0 0 0", ints.e_core);
    out
}

/// Coulomb and exchange matrices, `J_pq = (pq|rs) D_rs` and
/// `K_pq = (pr|qs) D_rs`.
pub fn coulomb_exchange(h2: &Tensor4, d: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = h2.dim();
    let mut j = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let mut jv = 0.0;
            let mut kv = 0.0;
            for r in 0..n {
                for s in 0..n {
                    let drs = d[(r, s)];
                    jv += h2.get(p, q, r, s) * drs;
                    kv += h2.get(p, r, q, s) * drs;
                }
            }
            j[(p, q)] = jv;
            k[(p, q)] = kv;
        }
    }
    (j, k)
}

/// Closed-shell Fock matrix `h + J - K/2` for a spin-summed density.
pub fn fock(h1: &DMatrix<f64>, h2: &Tensor4, d: &DMatrix<f64>) -> DMatrix<f64> {
    let (j, k) = coulomb_exchange(h2, d);
    h1 + j - k * 0.5
}

/// Restricted mean-field solution.
#[derive(Debug, Clone)]
pub struct MeanField {
    /// Columns are molecular orbitals in the working basis, ascending energy.
    pub orbital_coeffs: DMatrix<f64>,
    pub orbital_energies: DVector<f64>,
    /// Spin-summed one-particle density.
    pub rdm1: DMatrix<f64>,
    pub scf_energy: f64,
    pub iterations: usize,
}

fn sorted_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        // Fix the sign so the largest-magnitude component is positive.
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (k, x)| if x.abs() > acc.1 + 1e-12 { (k, x.abs()) } else { acc });
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Eigen-decomposition of a real symmetric matrix with ascending eigenvalues
/// and a deterministic sign convention on the eigenvectors.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    sorted_eigen(m)
}

fn aufbau_density(c: &DMatrix<f64>, n_occ: usize) -> DMatrix<f64> {
    let occ = c.columns(0, n_occ);
    occ * occ.transpose() * 2.0
}

fn electronic_energy(h1: &DMatrix<f64>, h2: &Tensor4, d: &DMatrix<f64>) -> f64 {
    let (j, k) = coulomb_exchange(h2, d);
    let g = j - k * 0.5;
    d.component_mul(&(h1 + g * 0.5)).sum()
}

/// Restricted Hartree-Fock with density damping (mixing factor 0.5).
///
/// Converges when the commutator `max |F D - D F|` drops below `tol`.
pub fn run_rhf(ints: &IntegralSet, max_iter: usize, tol: f64) -> Result<MeanField> {
    rhf_with(&ints.h1, &ints.h2, ints.e_core, ints.n_electrons, max_iter, tol)
}

pub(crate) fn rhf_with(
    h1: &DMatrix<f64>,
    h2: &Tensor4,
    e_core: f64,
    n_electrons: usize,
    max_iter: usize,
    tol: f64,
) -> Result<MeanField> {
    let n = h1.nrows();
    if !n_electrons.is_multiple_of(2) || n_electrons > 2 * n {
        return Err(Error::Invalid(format!(
            "cannot place {n_electrons} electrons in {n} restricted orbitals"
        )));
    }
    let n_occ = n_electrons / 2;
    let (_, c0) = sorted_eigen(h1);
    let mut d = aufbau_density(&c0, n_occ);
    let mut last_energy = electronic_energy(h1, h2, &d);
    let mut last_delta = f64::INFINITY;

    for iteration in 1..=max_iter {
        let f = fock(h1, h2, &d);
        let (_, c) = sorted_eigen(&f);
        let d_out = aufbau_density(&c, n_occ);

        let f_out = fock(h1, h2, &d_out);
        let comm = (&f_out * &d_out - &d_out * &f_out).amax();
        let energy = electronic_energy(h1, h2, &d_out);
        last_delta = energy - last_energy;
        last_energy = energy;

        if comm < tol {
            let (eps, c) = sorted_eigen(&f_out);
            let rdm1 = aufbau_density(&c, n_occ);
            let scf_energy = electronic_energy(h1, h2, &rdm1) + e_core;
            return Ok(MeanField {
                orbital_coeffs: c,
                orbital_energies: eps,
                rdm1,
                scf_energy,
                iterations: iteration,
            });
        }
        d = (d + d_out) * 0.5;
    }
    Err(Error::Convergence {
        iterations: max_iter,
        last_delta,
    })
}
