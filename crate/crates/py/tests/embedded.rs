use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<R>(f: impl FnOnce(&Bound<'_, PyModule>) -> R) -> R {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(qdmet_py);
        Python::initialize();
    });
    Python::attach(|py| f(&py.import("qdmet_py").unwrap()))
}

fn fixture(rel: &str) -> String {
    format!("{}/../../fixtures/{rel}", env!("CARGO_MANIFEST_DIR"))
}

use qdmet_py::qdmet_py;

#[test]
fn module_surface() {
    with_module(|m| {
        let ints = m.getattr("IntegralSet").unwrap().call1((fixture("h4/d1.000.fcidump"),)).unwrap();
        assert_eq!(ints.getattr("n_orbitals").unwrap().extract::<usize>().unwrap(), 4);
        let fci: f64 = ints.call_method0("fci_energy").unwrap().extract().unwrap();
        assert!((fci + 2.166387448635).abs() < 1e-9);

        let h = m.getattr("PauliSum").unwrap().call1(("0.5 XX\n0.5 YY\n",)).unwrap();
        let e: f64 = h.call_method0("ground_energy").unwrap().extract().unwrap();
        assert!((e + 1.0).abs() < 1e-12);

        let kwargs = PyDict::new(m.py());
        kwargs.set_item("bath_count", "1").unwrap();
        let h1 = m.getattr("fragment_hamiltonian").unwrap().call((&ints, "0,1;2,3"), Some(&kwargs)).unwrap();
        assert_eq!(h1.getattr("n_qubits").unwrap().extract::<usize>().unwrap(), 4);
    });
}

#[test]
fn errors_surface_as_python_exceptions() {
    with_module(|m| {
        let e = m.getattr("IntegralSet").unwrap().call1(("no/such.fcidump",)).unwrap_err();
        assert!(e.is_instance(m.py(), &m.getattr("QdmetError").unwrap().cast_into().unwrap()));
        let kwargs = PyDict::new(m.py());
        kwargs.set_item("pipeline", "ccsd").unwrap();
        assert!(m.getattr("run").unwrap().call((fixture("h2/d0.735.fcidump"),), Some(&kwargs)).is_err());
    });
}

#[test]
fn exact_dmet_row() {
    with_module(|m| {
        let kwargs = PyDict::new(m.py());
        kwargs.set_item("pipeline", "dmet-exact").unwrap();
        let row = m.getattr("run").unwrap().call((fixture("h4/d2.500.fcidump"),), Some(&kwargs)).unwrap();
        let err: f64 = row.get_item("abs_error").unwrap().extract().unwrap();
        assert!(err < 1e-8);
        assert_eq!(row.get_item("method").unwrap().extract::<String>().unwrap(), "DMET-exact");
    });
}
