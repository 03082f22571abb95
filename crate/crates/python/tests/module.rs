//! Drives the extension module through an embedded interpreter.

use pyo3::prelude::*;
use pyo3::types::PyDict;

fn module(py: Python<'_>) -> Bound<'_, PyModule> {
    let m = PyModule::new(py, "bridgeirt").unwrap();
    bridgeirt_py::bridgeirt_py(&m).unwrap();
    m
}

#[test]
fn module_round_trip() {
    Python::initialize();
    Python::attach(|py| {
        let m = module(py);
        let scenarios: Vec<String> = m.getattr("scenarios").unwrap().call0().unwrap().extract().unwrap();
        assert!(scenarios.iter().any(|s| s == "smoke"));

        let p: Vec<f64> = m
            .getattr("bridge_probability")
            .unwrap()
            .call1((0.0, vec![1.0, -1.0], vec![vec![2.0, 1.0]]))
            .unwrap()
            .extract()
            .unwrap();
        assert!((p[0] - 0.7310585786300049).abs() < 1e-15);

        let bf: f64 = m
            .getattr("log_bayes_factor")
            .unwrap()
            .call1((vec![false], vec![0.25; 3], vec![true, false, true], 0.0, vec![vec![-1.0], vec![0.0], vec![1.0]], 3.0))
            .unwrap()
            .extract()
            .unwrap();
        assert_eq!(bf, 0.0);

        let cfg = m.getattr("RunConfig").unwrap();
        let kwargs = PyDict::new(py);
        kwargs.set_item("chains", 3).unwrap();
        let c = cfg.call(("smoke",), Some(&kwargs)).unwrap();
        assert_eq!(c.getattr("chains").unwrap().extract::<usize>().unwrap(), 3);
        let text: String = c.call_method0("to_toml").unwrap().extract().unwrap();
        let back = cfg.call_method1("from_toml", (text,)).unwrap();
        assert_eq!(back.getattr("thin").unwrap().extract::<usize>().unwrap(), 2);

        let err = cfg.call(("nope",), None).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}
