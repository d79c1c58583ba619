use std::cmp::Ordering;

use super::pauli::{Letter, PauliString};
use super::sum::PauliSum;

/// Strings measurable from one circuit, together with the shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGroup {
    pub strings: Vec<PauliString>,
    /// Per-qubit measurement letter (I where no member acts).
    pub basis: PauliString,
}

impl MeasurementGroup {
    fn new(first: PauliString) -> Self {
        Self {
            strings: vec![first],
            basis: first.unphased(),
        }
    }

    fn accepts(&self, p: &PauliString) -> bool {
        self.strings.iter().all(|s| s.qubitwise_compatible(p))
    }

    fn push(&mut self, p: PauliString) {
        let n = p.n_qubits();
        let mut x = self.basis.x_bits();
        let mut z = self.basis.z_bits();
        for q in 0..n {
            if p.letter(q) != Letter::I {
                let bit = 1u64 << q;
                x = (x & !bit) | (p.x_bits() & bit);
                z = (z & !bit) | (p.z_bits() & bit);
            }
        }
        self.basis = PauliString::from_bits(n, x, z);
        self.strings.push(p.unphased());
    }

    pub fn labels(&self) -> Vec<String> {
        self.strings.iter().map(|s| s.label()).collect()
    }
}

/// Coefficient magnitudes are compared on this grid so that terms equal up
/// to solver round-off (e.g. Brillouin-related singles) count as ties.
pub const COEFFICIENT_RESOLUTION: f64 = 1e-8;

/// Order in which strings are offered to the first-fit packer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupingOrder {
    /// Descending |coefficient|, ties by descending weight then label.
    LargestCoefficient,
    /// Descending number of incompatible partners (Welsh-Powell colouring of
    /// the conflict graph); ties go to the more diagonal string (smaller X
    /// mask), then by |coefficient| and label.
    #[default]
    LargestConflictDegree,
}

/// Partitions the non-identity strings of `h` into qubit-wise compatible
/// groups with the default order.
pub fn group_qubitwise(h: &PauliSum) -> Vec<MeasurementGroup> {
    group_qubitwise_with(h, GroupingOrder::default())
}

pub fn group_qubitwise_with(h: &PauliSum, order: GroupingOrder) -> Vec<MeasurementGroup> {
    let terms: Vec<(PauliString, f64)> = h.non_identity().map(|(p, c)| (*p, c)).collect();
    let degree: Vec<usize> = terms
        .iter()
        .map(|(p, _)| terms.iter().filter(|(q, _)| !p.qubitwise_compatible(q)).count())
        .collect();
    let mut idx: Vec<usize> = (0..terms.len()).collect();
    let magnitude: Vec<i64> = terms
        .iter()
        .map(|(_, c)| (c.abs() / COEFFICIENT_RESOLUTION).round() as i64)
        .collect();
    let by_coeff = |a: &usize, b: &usize| -> Ordering {
        magnitude[*b]
            .cmp(&magnitude[*a])
            .then_with(|| terms[*b].0.weight().cmp(&terms[*a].0.weight()))
            .then_with(|| terms[*a].0.label().cmp(&terms[*b].0.label()))
    };
    match order {
        GroupingOrder::LargestCoefficient => idx.sort_by(by_coeff),
        GroupingOrder::LargestConflictDegree => {
            idx.sort_by(|a, b| {
                degree[*b]
                    .cmp(&degree[*a])
                    .then_with(|| terms[*a].0.x_bits().cmp(&terms[*b].0.x_bits()))
                    .then_with(|| by_coeff(a, b))
            })
        }
    }

    let mut groups: Vec<MeasurementGroup> = Vec::new();
    for i in idx {
        let p = terms[i].0;
        match groups.iter_mut().find(|g| g.accepts(&p)) {
            Some(g) => g.push(p),
            None => groups.push(MeasurementGroup::new(p)),
        }
    }
    groups
}
