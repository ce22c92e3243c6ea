//! Cost-parameter files.
//!
//! Resolution order: an explicit `--cost-params` path, then the file named
//! by `CIMNET_COST_PARAMS`, then the frozen defaults compiled into the
//! binary (`defaults/cost_params_v1.json`).

use std::path::{Path, PathBuf};

use cimnet_core::cost::CostParams;
use serde::{Deserialize, Serialize};

use crate::FormatError;

pub const PARAMS_ENV: &str = "CIMNET_COST_PARAMS";

pub const FROZEN_DEFAULTS: &str = include_str!("../defaults/cost_params_v1.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    #[serde(default = "default_version")]
    version: u32,
    t_read: f64,
    adc_share: u32,
    e_cell: f64,
    e_adc: f64,
    e_buffer: f64,
    e_add: f64,
    t_buffer: f64,
    t_add: f64,
}

fn default_version() -> u32 {
    CostParams::DEFAULTS_VERSION
}

pub fn parse_params(text: &str) -> Result<CostParams, FormatError> {
    let d: ParamsDoc = serde_json::from_str(text)?;
    let params = CostParams {
        t_read: d.t_read,
        adc_share: d.adc_share,
        e_cell: d.e_cell,
        e_adc: d.e_adc,
        e_buffer: d.e_buffer,
        e_add: d.e_add,
        t_buffer: d.t_buffer,
        t_add: d.t_add,
    };
    params.validate()?;
    Ok(params)
}

pub fn emit_params(p: &CostParams) -> String {
    let doc = ParamsDoc {
        version: CostParams::DEFAULTS_VERSION,
        t_read: p.t_read,
        adc_share: p.adc_share,
        e_cell: p.e_cell,
        e_adc: p.e_adc,
        e_buffer: p.e_buffer,
        e_add: p.e_add,
        t_buffer: p.t_buffer,
        t_add: p.t_add,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("params always serialize");
    out.push('\n');
    out
}

pub fn frozen_defaults() -> CostParams {
    parse_params(FROZEN_DEFAULTS).expect("frozen defaults file is valid")
}

/// Which file [`load_params`] would read, if any.
pub fn params_source(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(PARAMS_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

pub fn load_params(explicit: Option<&Path>) -> Result<CostParams, FormatError> {
    match params_source(explicit) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| FormatError::io(&path, e))?;
            parse_params(&text)
        }
        None => Ok(frozen_defaults()),
    }
}
