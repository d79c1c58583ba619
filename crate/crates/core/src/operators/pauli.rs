use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum register width supported by the bit-mask representation.
pub const MAX_QUBITS: usize = 64;

/// Power of `i` multiplying a Pauli string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    One,
    I,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn from_exponent(k: i64) -> Self {
        match k.rem_euclid(4) {
            0 => Phase::One,
            1 => Phase::I,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn exponent(self) -> i64 {
        match self {
            Phase::One => 0,
            Phase::I => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        match self {
            Phase::One => Complex64::new(1.0, 0.0),
            Phase::I => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    pub fn times(self, other: Phase) -> Phase {
        Phase::from_exponent(self.exponent() + other.exponent())
    }
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Z => (false, true),
            Letter::Y => (true, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (false, true) => Letter::Z,
            (true, true) => Letter::Y,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// A phased tensor product of Hermitian Pauli letters. Position `k` of the
/// operator is I/X/Z/Y for `(x_k, z_k)` = (0,0)/(1,0)/(0,1)/(1,1); qubit `k`
/// is bit `k` of the masks and character `k` of the text form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
    phase: Phase,
}

fn width_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        Self::from_bits(n_qubits, 0, 0)
    }

    pub fn from_bits(n_qubits: usize, x: u64, z: u64) -> Self {
        assert!(n_qubits <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        let m = width_mask(n_qubits);
        assert!(x & !m == 0 && z & !m == 0, "bits outside register width");
        Self {
            n_qubits,
            x,
            z,
            phase: Phase::One,
        }
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    /// Single letter `letter` on `qubit`, identity elsewhere.
    pub fn single(n_qubits: usize, qubit: usize, letter: Letter) -> Self {
        let (x, z) = letter.bits();
        Self::from_bits(n_qubits, (x as u64) << qubit, (z as u64) << qubit)
    }

    /// Product of Z letters on the set bits of `mask`.
    pub fn z_string(n_qubits: usize, mask: u64) -> Self {
        Self::from_bits(n_qubits, 0, mask)
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    #[inline]
    pub fn x_bits(&self) -> u64 {
        self.x
    }
    #[inline]
    pub fn z_bits(&self) -> u64 {
        self.z
    }
    #[inline]
    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Drops the phase, keeping the Hermitian letters.
    pub fn unphased(&self) -> Self {
        Self {
            phase: Phase::One,
            ..*self
        }
    }

    pub fn letter(&self, qubit: usize) -> Letter {
        Letter::from_bits(self.x >> qubit & 1 == 1, self.z >> qubit & 1 == 1)
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> usize {
        self.support().count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.support() == 0
    }

    /// Number of Y letters.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones().is_multiple_of(2)
    }

    /// True when the non-identity letters agree at every position.
    pub fn qubitwise_compatible(&self, other: &PauliString) -> bool {
        let both = self.support() & other.support();
        (self.x ^ other.x) & both == 0 && (self.z ^ other.z) & both == 0
    }

    /// Product `self * other` with exact phase tracking.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &PauliString) -> PauliString {
        let (x1, z1, x2, z2) = (self.x, self.z, other.x, other.z);
        let (is_x1, is_y1, is_z1) = (x1 & !z1, x1 & z1, !x1 & z1);
        let (is_x2, is_y2, is_z2) = (x2 & !z2, x2 & z2, !x2 & z2);
        // XY = iZ, YZ = iX, ZX = iY and the reversed orders give -i.
        let plus = ((is_x1 & is_y2) | (is_y1 & is_z2) | (is_z1 & is_x2)).count_ones() as i64;
        let minus = ((is_y1 & is_x2) | (is_z1 & is_y2) | (is_x1 & is_z2)).count_ones() as i64;
        PauliString {
            n_qubits: self.n_qubits,
            x: x1 ^ x2,
            z: z1 ^ z2,
            phase: Phase::from_exponent(
                self.phase.exponent() + other.phase.exponent() + plus - minus,
            ),
        }
    }

    /// Action on a computational basis state: `P|j> = amp * |j ^ x>`.
    #[inline]
    pub fn apply_to_basis(&self, j: usize) -> (usize, Complex64) {
        let sign_flips = (j as u64 & self.z).count_ones() % 2;
        let k = self.phase.exponent() + self.y_count() as i64 + 2 * sign_flips as i64;
        (j ^ self.x as usize, Phase::from_exponent(k).to_complex())
    }

    /// Letters only, qubit 0 first, without the phase prefix.
    pub fn label(&self) -> String {
        (0..self.n_qubits).map(|q| self.letter(q).as_char()).collect()
    }

    /// Removes the listed qubits, shifting the remaining ones down.
    pub fn remove_qubits(&self, removed: &[usize]) -> PauliString {
        let mut x = 0u64;
        let mut z = 0u64;
        let mut k = 0;
        for q in 0..self.n_qubits {
            if removed.contains(&q) {
                continue;
            }
            x |= (self.x >> q & 1) << k;
            z |= (self.z >> q & 1) << k;
            k += 1;
        }
        PauliString {
            n_qubits: k,
            x,
            z,
            phase: self.phase,
        }
    }
}

/// Free-function form of [`PauliString::mul`].
pub fn pauli_mul(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    a.mul(b)
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            Phase::One => "",
            Phase::I => "i",
            Phase::MinusOne => "-",
            Phase::MinusI => "-i",
        };
        write!(f, "{prefix}{}", self.label())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (Phase::MinusI, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (Phase::MinusOne, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (Phase::I, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (Phase::One, rest)
        } else {
            (Phase::One, s)
        };
        if body.len() > MAX_QUBITS {
            return Err(Error::Invalid(format!("Pauli string longer than {MAX_QUBITS}")));
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (q, c) in body.chars().enumerate() {
            let letter = match c {
                'I' => Letter::I,
                'X' => Letter::X,
                'Y' => Letter::Y,
                'Z' => Letter::Z,
                other => return Err(Error::Invalid(format!("bad Pauli letter `{other}`"))),
            };
            let (bx, bz) = letter.bits();
            x |= (bx as u64) << q;
            z |= (bz as u64) << q;
        }
        Ok(PauliString::from_bits(body.chars().count(), x, z).with_phase(phase))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn xy_is_iz() {
        assert_eq!(pauli_mul(&p("X"), &p("Y")).unwrap(), p("iZ"));
        assert_eq!(pauli_mul(&p("Y"), &p("X")).unwrap(), p("-iZ"));
        assert_eq!(pauli_mul(&p("Z"), &p("X")).unwrap(), p("iY"));
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            pauli_mul(&p("XX"), &p("X")),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn display_roundtrip() {
        for s in ["XZIY", "-iZZ", "iI", "-XY"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn qubitwise_compatibility() {
        assert!(p("IZ").qubitwise_compatible(&p("ZZ")));
        assert!(p("IX").qubitwise_compatible(&p("ZX")));
        assert!(!p("IX").qubitwise_compatible(&p("IZ")));
        assert!(!p("XX").qubitwise_compatible(&p("XZ")));
    }

    #[test]
    fn remove_qubits_compacts() {
        assert_eq!(p("XYZI").remove_qubits(&[1, 3]).label(), "XZ");
    }

    fn arb_pauli(n: usize) -> impl Strategy<Value = PauliString> {
        let m = (1u64 << n) - 1;
        (any::<u64>(), any::<u64>(), 0i64..4).prop_map(move |(x, z, k)| {
            PauliString::from_bits(n, x & m, z & m).with_phase(Phase::from_exponent(k))
        })
    }

    proptest! {
        #[test]
        fn involution(a in arb_pauli(6)) {
            let u = a.unphased();
            prop_assert_eq!(u.mul(&u).unwrap(), PauliString::identity(6));
        }

        #[test]
        fn associative(a in arb_pauli(5), b in arb_pauli(5), c in arb_pauli(5)) {
            let left = a.mul(&b).unwrap().mul(&c).unwrap();
            let right = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn commutation_matches_product_order(a in arb_pauli(5), b in arb_pauli(5)) {
            let ab = a.mul(&b).unwrap();
            let ba = b.mul(&a).unwrap();
            prop_assert_eq!(ab.unphased(), ba.unphased());
            let same = ab.phase() == ba.phase();
            prop_assert_eq!(same, a.commutes_with(&b));
        }
    }
}
