//! Activation tensors for rank analysis, stored as JSON:
//! `{"shape": [N, C, H, W], "values": [...]}` with values row-major.

use std::path::Path;

use cimnet_core::tensor::DenseTensor;
use serde::{Deserialize, Serialize};

use crate::FormatError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActivationDoc {
    shape: [usize; 4],
    values: Vec<f64>,
}

pub fn parse_activations(text: &str) -> Result<DenseTensor<f64>, FormatError> {
    let doc: ActivationDoc = serde_json::from_str(text)?;
    if doc.values.iter().any(|v| !v.is_finite()) {
        return Err(FormatError::Schema("activation values must be finite".into()));
    }
    Ok(DenseTensor::new(doc.shape, doc.values)?)
}

pub fn emit_activations(t: &DenseTensor<f64>) -> String {
    let doc = ActivationDoc {
        shape: t.dims(),
        values: t.values().to_vec(),
    };
    serde_json::to_string(&doc).expect("activations always serialize")
}

pub fn load_activations(path: &Path) -> Result<DenseTensor<f64>, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_activations(&text)
}
