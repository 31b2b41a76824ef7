use pyo3::prelude::*;

#[pymodule]
fn lispr_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
