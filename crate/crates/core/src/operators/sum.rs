use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use super::pauli::{Phase, PauliString};
use crate::error::{Error, Result};

/// Coefficients below this magnitude are dropped.
pub const COEFF_TOL: f64 = 1e-12;

/// Hermitian qubit operator: real-weighted sum of unphased Pauli strings.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, f64>,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_qubits: usize, value: f64) -> Self {
        let mut s = Self::new(n_qubits);
        s.add_term(PauliString::identity(n_qubits), value)
            .expect("identity is Hermitian");
        s
    }

    pub fn from_terms<I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        let mut s = Self::new(n_qubits);
        for (p, c) in terms {
            s.add_term(p, c)?;
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Accumulates `coeff * p`. Phases of +-1 are folded into the
    /// coefficient; imaginary phases are rejected.
    pub fn add_term(&mut self, p: PauliString, coeff: f64) -> Result<()> {
        if p.n_qubits() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                got: p.n_qubits(),
            });
        }
        let sign = match p.phase() {
            Phase::One => 1.0,
            Phase::MinusOne => -1.0,
            _ => {
                return Err(Error::Invalid(format!(
                    "imaginary phase on {p} would make the sum non-Hermitian"
                )))
            }
        };
        let key = p.unphased();
        let entry = self.terms.entry(key).or_insert(0.0);
        *entry += sign * coeff;
        if entry.abs() <= COEFF_TOL {
            self.terms.remove(&key);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.terms.iter().map(|(p, c)| (p, *c))
    }

    pub fn coefficient(&self, p: &PauliString) -> f64 {
        self.terms.get(&p.unphased()).copied().unwrap_or(0.0)
    }

    pub fn identity_coefficient(&self) -> f64 {
        self.coefficient(&PauliString::identity(self.n_qubits))
    }

    pub fn non_identity(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.iter().filter(|(p, _)| !p.is_identity())
    }

    pub fn scaled(&self, factor: f64) -> PauliSum {
        let mut out = PauliSum::new(self.n_qubits);
        for (p, c) in self.iter() {
            out.add_term(*p, c * factor).expect("unphased");
        }
        out
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        let mut out = self.clone();
        for (p, c) in other.iter() {
            out.add_term(*p, c)?;
        }
        Ok(out)
    }

    /// One `<coeff> <string>` line per term.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, c) in self.iter() {
            let _ = writeln!(out, "{c:e} {}", p.label());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<PauliSum> {
        let mut n_qubits = None;
        let mut terms = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (c, s) = line.split_once(char::is_whitespace).ok_or(Error::Format {
                line: i + 1,
                msg: "expected `<coeff> <string>`".into(),
            })?;
            let coeff: f64 = c.parse().map_err(|_| Error::Format {
                line: i + 1,
                msg: format!("bad coefficient `{c}`"),
            })?;
            let p: PauliString = s.trim().parse()?;
            match n_qubits {
                None => n_qubits = Some(p.n_qubits()),
                Some(n) if n != p.n_qubits() => {
                    return Err(Error::Format {
                        line: i + 1,
                        msg: format!("string width {} differs from {n}", p.n_qubits()),
                    })
                }
                _ => {}
            }
            terms.push((p, coeff));
        }
        PauliSum::from_terms(n_qubits.unwrap_or(0), terms)
    }

    pub fn to_operator(&self) -> QubitOperator {
        let mut op = QubitOperator::new(self.n_qubits);
        for (p, c) in self.iter() {
            op.add_term(*p, Complex64::new(c, 0.0));
        }
        op
    }
}

/// Complex-weighted sum of Pauli strings. Used for intermediate fermionic
/// products and non-Hermitian observables such as RDM elements.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitOperator {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl QubitOperator {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let mut op = Self::new(n_qubits);
        op.add_term(PauliString::identity(n_qubits), Complex64::new(1.0, 0.0));
        op
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn add_term(&mut self, p: PauliString, coeff: Complex64) {
        debug_assert_eq!(p.n_qubits(), self.n_qubits);
        let key = p.unphased();
        let entry = self.terms.entry(key).or_insert(Complex64::new(0.0, 0.0));
        *entry += coeff * p.phase().to_complex();
        if entry.norm() <= COEFF_TOL {
            self.terms.remove(&key);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, Complex64)> {
        self.terms.iter().map(|(p, c)| (p, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn mul(&self, other: &QubitOperator) -> QubitOperator {
        let mut out = QubitOperator::new(self.n_qubits);
        for (a, ca) in self.iter() {
            for (b, cb) in other.iter() {
                out.add_term(a.mul_unchecked(b), ca * cb);
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &QubitOperator) {
        for (p, c) in other.iter() {
            self.add_term(*p, c);
        }
    }

    pub fn scaled(&self, factor: Complex64) -> QubitOperator {
        let mut out = QubitOperator::new(self.n_qubits);
        for (p, c) in self.iter() {
            out.add_term(*p, c * factor);
        }
        out
    }

    pub fn adjoint(&self) -> QubitOperator {
        let mut out = QubitOperator::new(self.n_qubits);
        for (p, c) in self.iter() {
            out.add_term(*p, c.conj());
        }
        out
    }

    /// Converts to a [`PauliSum`], failing if any coefficient carries an
    /// imaginary part above `tol`.
    pub fn to_hermitian(&self, tol: f64) -> Result<PauliSum> {
        let mut out = PauliSum::new(self.n_qubits);
        for (p, c) in self.iter() {
            if c.im.abs() > tol {
                return Err(Error::Invalid(format!(
                    "operator is not Hermitian: {p} has coefficient {c}"
                )));
            }
            out.add_term(*p, c.re)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip_and_cancellation() {
        let h = PauliSum::from_text("0.25 XZIY\n-0.5 IIII\n0.25 XZIY\n").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.coefficient(&"XZIY".parse().unwrap()), 0.5);
        let back = PauliSum::from_text(&h.to_text()).unwrap();
        assert_eq!(back, h);

        let mut z = PauliSum::new(1);
        z.add_term("Z".parse().unwrap(), 1.0).unwrap();
        z.add_term("-Z".parse().unwrap(), 1.0).unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn imaginary_phase_rejected() {
        let mut h = PauliSum::new(1);
        assert!(h.add_term("iX".parse().unwrap(), 1.0).is_err());
    }

    #[test]
    fn mixed_widths_rejected() {
        assert!(PauliSum::from_text("1 XX\n1 X\n").is_err());
    }
}
