//! Exact references by dense linear algebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::circuits::{Circuit, GateKind};
use crate::error::{Error, Result};
use crate::operators::{PauliSum, QubitOperator};

pub const MAX_ORACLE_QUBITS: usize = 12;

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Ground state over the full register (zero outside the filtered sector).
    pub ground_vector: Option<DVector<Complex64>>,
}

impl SpectrumResult {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }
}

pub fn dense_operator(op: &QubitOperator) -> Result<DMatrix<Complex64>> {
    let n = op.n_qubits();
    if n > MAX_ORACLE_QUBITS {
        return Err(Error::Invalid(format!("{n} qubits exceed the dense oracle limit")));
    }
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for (p, c) in op.iter() {
        for j in 0..dim {
            let (k, amp) = p.apply_to_basis(j);
            m[(k, j)] += c * amp;
        }
    }
    Ok(m)
}

pub fn dense_matrix(h: &PauliSum) -> Result<DMatrix<Complex64>> {
    dense_operator(&h.to_operator())
}

/// Full spectrum of `h`, optionally restricted to basis states holding
/// `n_electrons` set bits (the Jordan-Wigner particle-number sector).
pub fn exact_ground_energy(h: &PauliSum, n_electrons: Option<usize>) -> Result<SpectrumResult> {
    match n_electrons {
        Some(ne) => exact_ground_in(h, |j| j.count_ones() as usize == ne),
        None => exact_ground_in(h, |_| true),
    }
}

/// Spectrum restricted to the computational basis states accepted by `keep`.
pub fn exact_ground_in(h: &PauliSum, keep: impl Fn(usize) -> bool) -> Result<SpectrumResult> {
    let full = dense_matrix(h)?;
    let defect = (&full - full.adjoint()).camax();
    if defect > 1e-10 {
        return Err(Error::Invalid(format!("operator is not Hermitian ({defect:e})")));
    }
    let dim = full.nrows();
    let basis: Vec<usize> = (0..dim).filter(|&j| keep(j)).collect();
    if basis.is_empty() {
        return Err(Error::Invalid("requested sector is empty".into()));
    }
    let k = basis.len();
    let sub = DMatrix::from_fn(k, k, |a, b| full[(basis[a], basis[b])]);

    let real = sub.iter().all(|z| z.im.abs() < 1e-14);
    let (values, vectors): (Vec<f64>, DMatrix<Complex64>) = if real {
        let eig = SymmetricEigen::new(sub.map(|z| z.re));
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|v| Complex64::new(v, 0.0)))
    } else {
        let eig = SymmetricEigen::new(sub);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ground = DVector::zeros(dim);
    for (a, &j) in basis.iter().enumerate() {
        ground[j] = vectors[(a, order[0])];
    }
    Ok(SpectrumResult {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        ground_vector: Some(ground),
    })
}

fn embed_1q(u: &[[Complex64; 2]; 2], q: usize, n: usize) -> DMatrix<Complex64> {
    let dim = 1usize << n;
    DMatrix::from_fn(dim, dim, |r, c| {
        if (r ^ c) & !(1usize << q) != 0 {
            Complex64::new(0.0, 0.0)
        } else {
            u[r >> q & 1][c >> q & 1]
        }
    })
}

/// Unitary of a bound circuit by explicit matrix products.
pub fn dense_unitary(c: &Circuit) -> Result<DMatrix<Complex64>> {
    let n = c.n_qubits();
    if n > 6 {
        return Err(Error::Invalid(format!("{n} qubits exceed the dense unitary limit")));
    }
    if !c.is_bound() {
        return Err(Error::Invalid("circuit has unbound parameters".into()));
    }
    let dim = 1usize << n;
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for g in &c.gates {
        let gm = match g.kind {
            GateKind::Cnot => {
                let (cb, tb) = (1usize << g.qubits[0], 1usize << g.qubits[1]);
                DMatrix::from_fn(dim, dim, |r, col| {
                    let image = if col & cb != 0 { col ^ tb } else { col };
                    if r == image { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
                })
            }
            _ => embed_1q(&g.matrix_1q(), g.qubits[0], n),
        };
        u = gm * u;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::Gate;

    #[test]
    fn single_z_spectrum() {
        let r = exact_ground_energy(&PauliSum::from_text("1 Z\n").unwrap(), None).unwrap();
        assert_eq!(r.eigenvalues, vec![-1.0, 1.0]);
    }

    #[test]
    fn xx_plus_yy_spectrum() {
        let h = PauliSum::from_text("0.5 XX\n0.5 YY\n").unwrap();
        let r = exact_ground_energy(&h, None).unwrap();
        for (a, b) in r.eigenvalues.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let one = exact_ground_energy(&h, Some(1)).unwrap();
        assert_eq!(one.eigenvalues.len(), 2);
        assert!((one.ground_energy() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cnot_matrix_is_standard_permutation() {
        let mut c = Circuit::new(2);
        c.push(Gate::cnot(0, 1)).unwrap();
        let u = dense_unitary(&c).unwrap();
        // Control is bit 0: |01> (index 1) <-> |11> (index 3).
        let expected = [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]];
        for r in 0..4 {
            for k in 0..4 {
                assert_eq!(u[(r, k)], Complex64::new(expected[r][k] as f64, 0.0));
            }
        }
        assert_eq!(dense_unitary(&Circuit::new(3)).unwrap(), DMatrix::identity(8, 8));
    }
}
