//! Qubit operators: Pauli algebra, the fermion-to-qubit encoding, Z2
//! tapering and measurement grouping.

pub mod grouping;
pub mod jw;
pub mod pauli;
pub mod sum;
pub mod tapering;

pub use grouping::{group_qubitwise, group_qubitwise_with, GroupingOrder, MeasurementGroup};
pub use jw::{fermion_product, hartree_fock_bits, jordan_wigner, ladder, spin_counts, FermionHamiltonian};
pub use pauli::{pauli_mul, Letter, PauliString, Phase};
pub use sum::{PauliSum, QubitOperator};
pub use tapering::{find_z2_symmetries, taper, taper_observable, TaperingMap};
