//! Z2 symmetry reduction (qubit tapering).
//!
//! Symmetry generators are Z-type Pauli strings commuting with every
//! Hamiltonian term. Each generator `tau_i` owns a pivot qubit `q_i` on which
//! no other generator acts; the Clifford `U_i = (X_{q_i} + tau_i)/sqrt(2)`
//! maps `tau_i` onto `X_{q_i}`, after which the pivot is replaced by its
//! sector eigenvalue and removed.

use super::pauli::{Letter, PauliString};
use super::sum::{PauliSum, QubitOperator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TaperingMap {
    n_qubits: usize,
    /// Mutually commuting Z-type symmetries.
    pub generators: Vec<PauliString>,
    /// Eigenvalue (+1 or -1) selected for each generator.
    pub sector: Vec<i8>,
    /// Pivot qubit of each generator; these are the qubits removed.
    pub removed_qubits: Vec<usize>,
}

impl TaperingMap {
    /// The no-op map.
    pub fn empty(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            generators: Vec::new(),
            sector: Vec::new(),
            removed_qubits: Vec::new(),
        }
    }

    pub fn new(
        n_qubits: usize,
        generators: Vec<PauliString>,
        sector: Vec<i8>,
        removed_qubits: Vec<usize>,
    ) -> Result<Self> {
        let map = Self {
            n_qubits,
            generators,
            sector,
            removed_qubits,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_qubits_tapered(&self) -> usize {
        self.n_qubits - self.removed_qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Checks the generator/sector/pivot bookkeeping.
    pub fn validate(&self) -> Result<()> {
        if self.sector.len() != self.generators.len()
            || self.removed_qubits.len() != self.generators.len()
        {
            return Err(Error::Invalid(format!(
                "tapering map has {} generators, {} sector values and {} pivots",
                self.generators.len(),
                self.sector.len(),
                self.removed_qubits.len()
            )));
        }
        if let Some(bad) = self.sector.iter().find(|s| **s != 1 && **s != -1) {
            return Err(Error::Invalid(format!("sector value {bad} is not +-1")));
        }
        for (i, (g, &q)) in self.generators.iter().zip(&self.removed_qubits).enumerate() {
            if g.n_qubits() != self.n_qubits || g.x_bits() != 0 {
                return Err(Error::Invalid(format!("generator {g} is not a Z-type string")));
            }
            if g.z_bits() >> q & 1 == 0 {
                return Err(Error::Invalid(format!("generator {g} does not act on pivot {q}")));
            }
            for (j, other) in self.generators.iter().enumerate() {
                if j != i && other.z_bits() >> q & 1 == 1 {
                    return Err(Error::Invalid(format!(
                        "pivot {q} of generator {i} is shared with generator {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Tapers a general operator. Terms anticommuting with a generator have
    /// zero expectation in every symmetry sector; they are dropped when
    /// `drop_anticommuting` is set and rejected otherwise.
    pub fn taper_operator(
        &self,
        op: &QubitOperator,
        drop_anticommuting: bool,
    ) -> Result<QubitOperator> {
        if op.n_qubits() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                got: op.n_qubits(),
            });
        }
        let mut out = QubitOperator::new(self.n_qubits_tapered());
        'terms: for (p, c) in op.iter() {
            let mut p = *p;
            let mut coeff = c;
            for ((tau, &q), &s) in self.generators.iter().zip(&self.removed_qubits).zip(&self.sector) {
                if !p.commutes_with(tau) {
                    if drop_anticommuting {
                        continue 'terms;
                    }
                    return Err(Error::Invalid(format!(
                        "term {p} anticommutes with symmetry {tau}"
                    )));
                }
                if matches!(p.letter(q), Letter::Z | Letter::Y) {
                    let xq = PauliString::single(self.n_qubits, q, Letter::X);
                    p = p.mul_unchecked(tau).mul_unchecked(&xq);
                }
                if p.letter(q) == Letter::X {
                    coeff *= s as f64;
                }
            }
            coeff *= p.phase().to_complex();
            out.add_term(p.unphased().remove_qubits(&self.removed_qubits), coeff);
        }
        Ok(out)
    }

    /// Computational basis state restricted to the surviving qubits.
    pub fn taper_bits(&self, bits: u64) -> u64 {
        let mut out = 0u64;
        let mut k = 0;
        for q in 0..self.n_qubits {
            if self.removed_qubits.contains(&q) {
                continue;
            }
            out |= (bits >> q & 1) << k;
            k += 1;
        }
        out
    }
}

/// Z-type symmetries of `h`, with the sector chosen so that the basis state
/// `reference` (usually the Hartree-Fock occupation) is an eigenstate.
pub fn find_z2_symmetries(h: &PauliSum, reference: u64) -> Result<TaperingMap> {
    if h.is_empty() {
        return Err(Error::Invalid("cannot search symmetries of an empty operator".into()));
    }
    let n = h.n_qubits();
    // A Z-type string with mask z commutes with a term iff |x & z| is even,
    // so the symmetries form the GF(2) kernel of the terms' X parts.
    let mut rows: Vec<u64> = h.iter().map(|(p, _)| p.x_bits()).filter(|&x| x != 0).collect();
    let mut pivots: Vec<(usize, u64)> = Vec::new();
    for col in 0..n {
        let bit = 1u64 << col;
        let Some(k) = rows.iter().position(|r| r & bit != 0) else {
            continue;
        };
        let pivot_row = rows.swap_remove(k);
        for r in rows.iter_mut() {
            if *r & bit != 0 {
                *r ^= pivot_row;
            }
        }
        for (_, r) in pivots.iter_mut() {
            if *r & bit != 0 {
                *r ^= pivot_row;
            }
        }
        pivots.push((col, pivot_row));
    }
    let pivot_cols: u64 = pivots.iter().map(|(c, _)| 1u64 << c).sum();

    let mut generators = Vec::new();
    let mut removed = Vec::new();
    let mut sector = Vec::new();
    for free in 0..n {
        if pivot_cols >> free & 1 == 1 {
            continue;
        }
        let mut z = 1u64 << free;
        for (col, row) in &pivots {
            if row >> free & 1 == 1 {
                z |= 1u64 << col;
            }
        }
        let tau = PauliString::z_string(n, z);
        sector.push(if (z & reference).count_ones().is_multiple_of(2) { 1 } else { -1 });
        generators.push(tau);
        removed.push(free);
    }
    TaperingMap::new(n, generators, sector, removed)
}

/// Applies the tapering map to a Hermitian operator.
pub fn taper(h: &PauliSum, map: &TaperingMap) -> Result<PauliSum> {
    map.validate()?;
    if map.is_empty() {
        return Ok(h.clone());
    }
    map.taper_operator(&h.to_operator(), false)?.to_hermitian(1e-10)
}

/// Tapers an observable whose expectation is wanted in the map's sector.
pub fn taper_observable(op: &QubitOperator, map: &TaperingMap) -> Result<QubitOperator> {
    if map.is_empty() {
        return Ok(op.clone());
    }
    map.taper_operator(op, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zz_has_two_z_generators() {
        let h = PauliSum::from_text("1.0 ZZ\n").unwrap();
        let map = find_z2_symmetries(&h, 0).unwrap();
        assert_eq!(map.generators.len(), 2);
        assert!(map.generators.iter().all(|g| g.x_bits() == 0));
        assert_eq!(map.n_qubits_tapered(), 0);
        let t = taper(&h, &map).unwrap();
        assert_eq!(t.n_qubits(), 0);
        assert_eq!(t.identity_coefficient(), 1.0);
    }

    #[test]
    fn empty_map_is_noop() {
        let h = PauliSum::from_text("0.5 XZ\n0.3 ZY\n").unwrap();
        let map = TaperingMap::empty(2);
        assert_eq!(taper(&h, &map).unwrap(), h);
    }

    #[test]
    fn inconsistent_sector_rejected() {
        let mut map = find_z2_symmetries(&PauliSum::from_text("1 ZZ\n1 XX\n").unwrap(), 0).unwrap();
        assert_eq!(map.generators.len(), 1);
        map.sector = vec![2];
        let h = PauliSum::from_text("1 ZZ\n").unwrap();
        assert!(taper(&h, &map).is_err());
        map.sector = vec![];
        assert!(taper(&h, &map).is_err());
    }

    #[test]
    fn anticommuting_term_rejected_or_dropped() {
        let h = PauliSum::from_text("1 ZZ\n1 XX\n").unwrap();
        let map = find_z2_symmetries(&h, 0).unwrap();
        let bad = PauliSum::from_text("1 XI\n").unwrap();
        assert!(taper(&bad, &map).is_err());
        let dropped = taper_observable(&bad.to_operator(), &map).unwrap();
        assert!(dropped.is_empty());
    }
}
