//! Jordan-Wigner encoding with block spin ordering: all alpha spin-orbitals
//! first, then all beta, so spatial orbital `p` of `n` maps to `p` and `n + p`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::pauli::{Letter, PauliString};
use super::sum::{PauliSum, QubitOperator};
use crate::error::{Error, Result};
use crate::integrals::{IntegralSet, Tensor4};

/// Spin-orbital index of spatial orbital `p` with spin `spin` (0 = alpha)
/// among `n_orbitals` spatial orbitals.
#[inline]
pub fn spin_orbital(p: usize, spin: usize, n_orbitals: usize) -> usize {
    p + spin * n_orbitals
}

/// Second-quantized Hamiltonian over spatial orbitals.
#[derive(Debug, Clone)]
pub struct FermionHamiltonian {
    pub h1: DMatrix<f64>,
    pub h2: Tensor4,
    pub constant: f64,
}

impl FermionHamiltonian {
    pub fn n_orbitals(&self) -> usize {
        self.h1.nrows()
    }

    /// Expresses the Hamiltonian in the orbitals given by the columns of `c`.
    pub fn rotated(&self, c: &DMatrix<f64>) -> FermionHamiltonian {
        FermionHamiltonian {
            h1: c.transpose() * &self.h1 * c,
            h2: self.h2.transform(c),
            constant: self.constant,
        }
    }
}

impl From<&IntegralSet> for FermionHamiltonian {
    fn from(ints: &IntegralSet) -> Self {
        FermionHamiltonian {
            h1: ints.h1.clone(),
            h2: ints.h2.clone(),
            constant: ints.e_core,
        }
    }
}

/// `a_p` (or `a_p^dagger`) as `Z_{<p} (X_p +- i Y_p) / 2`.
pub fn ladder(mode: usize, n_modes: usize, dagger: bool) -> QubitOperator {
    let string = if mode == 0 { 0 } else { (1u64 << mode) - 1 };
    let z = PauliString::z_string(n_modes, string);
    let x = z.mul_unchecked(&PauliString::single(n_modes, mode, Letter::X));
    let y = z.mul_unchecked(&PauliString::single(n_modes, mode, Letter::Y));
    let sign = if dagger { -1.0 } else { 1.0 };
    let mut op = QubitOperator::new(n_modes);
    op.add_term(x, Complex64::new(0.5, 0.0));
    op.add_term(y, Complex64::new(0.0, 0.5 * sign));
    op
}

/// Ordered product of ladder operators; each entry is `(mode, is_creation)`.
pub fn fermion_product(ops: &[(usize, bool)], n_modes: usize) -> QubitOperator {
    ops.iter()
        .fold(QubitOperator::identity(n_modes), |acc, &(m, dag)| {
            acc.mul(&ladder(m, n_modes, dag))
        })
}

/// Maps the Hamiltonian `sum h_pq a+_p a_q + 1/2 sum (pq|rs) a+_p a+_r a_s a_q
/// + constant` onto qubits.
pub fn jordan_wigner(ham: &FermionHamiltonian) -> Result<PauliSum> {
    let n = ham.n_orbitals();
    if ham.h2.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: ham.h2.dim(),
        });
    }
    let modes = 2 * n;
    let create: Vec<QubitOperator> = (0..modes).map(|m| ladder(m, modes, true)).collect();
    let annihilate: Vec<QubitOperator> = (0..modes).map(|m| ladder(m, modes, false)).collect();

    let mut op = QubitOperator::new(modes);
    op.add_term(
        PauliString::identity(modes),
        Complex64::new(ham.constant, 0.0),
    );

    for p in 0..n {
        for q in 0..n {
            let h = ham.h1[(p, q)];
            if h.abs() < 1e-14 {
                continue;
            }
            for spin in 0..2 {
                let a = spin_orbital(p, spin, n);
                let b = spin_orbital(q, spin, n);
                op.add_assign(&create[a].mul(&annihilate[b]).scaled(Complex64::new(h, 0.0)));
            }
        }
    }

    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let g = ham.h2.get(p, q, r, s);
                    if g.abs() < 1e-14 {
                        continue;
                    }
                    for sigma in 0..2 {
                        for tau in 0..2 {
                            let (ps, qs) = (spin_orbital(p, sigma, n), spin_orbital(q, sigma, n));
                            let (rt, st) = (spin_orbital(r, tau, n), spin_orbital(s, tau, n));
                            if ps == rt || st == qs {
                                continue;
                            }
                            let term = create[ps]
                                .mul(&create[rt])
                                .mul(&annihilate[st])
                                .mul(&annihilate[qs]);
                            op.add_assign(&term.scaled(Complex64::new(0.5 * g, 0.0)));
                        }
                    }
                }
            }
        }
    }
    op.to_hermitian(1e-10)
}

/// Total number operator over `n_modes` spin-orbitals.
pub fn number_operator(n_modes: usize) -> PauliSum {
    let mut op = QubitOperator::new(n_modes);
    for m in 0..n_modes {
        op.add_assign(&fermion_product(&[(m, true), (m, false)], n_modes));
    }
    op.to_hermitian(1e-12).expect("number operator is Hermitian")
}

/// Closed-shell (or high-spin by one) reference: the lowest `ceil(N/2)`
/// alpha and `floor(N/2)` beta spin-orbitals occupied.
pub fn hartree_fock_bits(n_orbitals: usize, n_electrons: usize) -> u64 {
    let n_alpha = n_electrons.div_ceil(2);
    let n_beta = n_electrons / 2;
    let low = |k: usize| if k == 0 { 0 } else { (1u64 << k) - 1 };
    low(n_alpha) | low(n_beta) << n_orbitals
}

/// Alpha and beta electron counts of a basis state.
pub fn spin_counts(bits: u64, n_orbitals: usize) -> (usize, usize) {
    let alpha_mask = if n_orbitals == 0 { 0 } else { (1u64 << n_orbitals) - 1 };
    (
        (bits & alpha_mask).count_ones() as usize,
        (bits >> n_orbitals & alpha_mask).count_ones() as usize,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_operator_single_mode() {
        let n = fermion_product(&[(0, true), (0, false)], 1)
            .to_hermitian(1e-12)
            .unwrap();
        assert_eq!(n.len(), 2);
        assert!((n.coefficient(&"I".parse().unwrap()) - 0.5).abs() < 1e-15);
        assert!((n.coefficient(&"Z".parse().unwrap()) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_hamiltonian() {
        let ham = FermionHamiltonian {
            h1: DMatrix::zeros(2, 2),
            h2: Tensor4::zeros(2),
            constant: -0.75,
        };
        let h = jordan_wigner(&ham).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.identity_coefficient(), -0.75);
        assert_eq!(h.n_qubits(), 4);
    }

    #[test]
    fn anticommutation_relations() {
        let modes = 4;
        for p in 0..modes {
            for q in 0..modes {
                let a = ladder(p, modes, false);
                let ad = ladder(q, modes, true);
                let mut anti = a.mul(&ad);
                anti.add_assign(&ad.mul(&a));
                let expected = if p == q {
                    QubitOperator::identity(modes)
                } else {
                    QubitOperator::new(modes)
                };
                assert_eq!(anti, expected, "p={p} q={q}");

                let b = ladder(q, modes, false);
                let mut aa = a.mul(&b);
                aa.add_assign(&b.mul(&a));
                assert!(aa.is_empty());
            }
        }
    }
}
