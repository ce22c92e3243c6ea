//! Weight-to-crossbar mapping.
//!
//! A k×k convolution is split into k² sub-matrices, one per kernel offset.
//! Sub-matrix `(ky, kx)` holds `W[:, :, ky, kx]` transposed: one row per
//! input channel (wordline), `cells_per_weight` columns per output channel
//! (bitlines). Each sub-matrix is tiled onto its own crossbars; no crossbar
//! is shared between sub-matrices or layers.
//!
//! A depthwise convolution has no cross-channel terms, yet its input vector
//! still spans all channels, so each sub-matrix is a zero-padded
//! `channels × channels` diagonal and occupies the same crossbars as a
//! dense `channels → channels` layer.

use alloc::string::String;
use alloc::vec::Vec;

use num_rational::Ratio;

use crate::ir::{ConvLayer, NetworkSpec, NodeKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CrossbarDims {
    /// Wordlines.
    pub rows: usize,
    /// Bitlines.
    pub cols: usize,
    /// RRAM cells encoding one weight.
    pub cells_per_weight: usize,
}

impl CrossbarDims {
    pub fn new(rows: usize, cols: usize, cells_per_weight: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || cells_per_weight == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "crossbar {rows}x{cols} with {cells_per_weight} cells/weight: all must be positive"
            )));
        }
        Ok(Self {
            rows,
            cols,
            cells_per_weight,
        })
    }

    pub fn square(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            cells_per_weight: 1,
        }
    }

    pub fn cells(&self) -> u64 {
        self.rows as u64 * self.cols as u64
    }
}

impl Default for CrossbarDims {
    fn default() -> Self {
        Self::square(64)
    }
}

/// How one weighted layer lands on crossbars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tiling {
    pub xbar: CrossbarDims,
    /// k² for a convolution, 1 for a linear layer.
    pub sub_matrices: u64,
    pub logical_rows: usize,
    /// Output channels × cells per weight.
    pub logical_cols: usize,
    /// Cells holding a network weight.
    pub used_cells: u64,
}

impl Tiling {
    pub fn row_tiles(&self) -> u64 {
        self.logical_rows.div_ceil(self.xbar.rows) as u64
    }

    pub fn col_tiles(&self) -> u64 {
        self.logical_cols.div_ceil(self.xbar.cols) as u64
    }

    pub fn num_crossbars(&self) -> u64 {
        self.sub_matrices * self.row_tiles() * self.col_tiles()
    }

    pub fn total_cells(&self) -> u64 {
        self.num_crossbars() * self.xbar.cells()
    }

    pub fn utilization(&self) -> Ratio<u64> {
        Ratio::new(self.used_cells, self.total_cells())
    }

    /// Widest column span mapped onto a single crossbar.
    pub fn max_occupied_cols(&self) -> usize {
        self.logical_cols.min(self.xbar.cols)
    }

    /// Mapped columns summed over every crossbar of the layer.
    pub fn occupied_cols_total(&self) -> u64 {
        self.sub_matrices * self.row_tiles() * self.logical_cols as u64
    }
}

pub fn map_conv(layer: &ConvLayer, xbar: &CrossbarDims) -> Tiling {
    let k2 = (layer.kernel * layer.kernel) as u64;
    let cpw = xbar.cells_per_weight;
    let (rows, cols, used) = if layer.depthwise {
        let c = layer.in_channels;
        (c, c * cpw, k2 * (c * cpw) as u64)
    } else {
        let (i, o) = (layer.in_channels, layer.out_channels);
        (i, o * cpw, k2 * i as u64 * (o * cpw) as u64)
    };
    Tiling {
        xbar: *xbar,
        sub_matrices: k2,
        logical_rows: rows,
        logical_cols: cols,
        used_cells: used,
    }
}

pub fn map_linear(in_features: usize, out_features: usize, xbar: &CrossbarDims) -> Tiling {
    let cols = out_features * xbar.cells_per_weight;
    Tiling {
        xbar: *xbar,
        sub_matrices: 1,
        logical_rows: in_features,
        logical_cols: cols,
        used_cells: in_features as u64 * cols as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MappedOp {
    Conv,
    Depthwise,
    Linear,
}

impl MappedOp {
    pub fn name(&self) -> &'static str {
        match self {
            MappedOp::Conv => "conv",
            MappedOp::Depthwise => "depthwise",
            MappedOp::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerMapping {
    pub node_id: String,
    pub op: MappedOp,
    pub tiling: Tiling,
}

impl LayerMapping {
    pub fn num_crossbars(&self) -> u64 {
        self.tiling.num_crossbars()
    }

    pub fn used_cells(&self) -> u64 {
        self.tiling.used_cells
    }

    pub fn total_cells(&self) -> u64 {
        self.tiling.total_cells()
    }

    pub fn utilization(&self) -> Ratio<u64> {
        self.tiling.utilization()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MappingTotals {
    pub num_crossbars: u64,
    pub used_cells: u64,
    pub total_cells: u64,
}

impl MappingTotals {
    /// used/total; 1 for a network without weighted layers.
    pub fn utilization(&self) -> Ratio<u64> {
        if self.total_cells == 0 {
            Ratio::from_integer(1)
        } else {
            Ratio::new(self.used_cells, self.total_cells)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingReport {
    pub xbar: CrossbarDims,
    /// Weighted layers in topological order.
    pub per_layer: Vec<LayerMapping>,
    pub aggregate: MappingTotals,
}

impl MappingReport {
    pub fn get(&self, node_id: &str) -> Option<&LayerMapping> {
        self.per_layer.iter().find(|l| l.node_id == node_id)
    }
}

/// Maps every convolution and linear node; merges and pooling take no crossbars.
pub fn map_network(net: &NetworkSpec, xbar: &CrossbarDims) -> MappingReport {
    let per_layer: Vec<LayerMapping> = net
        .nodes()
        .iter()
        .filter_map(|node| {
            let (op, tiling) = match &node.kind {
                NodeKind::Conv { layer, .. } => {
                    let op = if layer.depthwise { MappedOp::Depthwise } else { MappedOp::Conv };
                    (op, map_conv(layer, xbar))
                }
                NodeKind::Linear {
                    in_features,
                    out_features,
                    ..
                } => (MappedOp::Linear, map_linear(*in_features, *out_features, xbar)),
                _ => return None,
            };
            Some(LayerMapping {
                node_id: node.id.clone(),
                op,
                tiling,
            })
        })
        .collect();
    let aggregate = per_layer.iter().fold(MappingTotals::default(), |acc, l| MappingTotals {
        num_crossbars: acc.num_crossbars + l.num_crossbars(),
        used_cells: acc.used_cells + l.used_cells(),
        total_cells: acc.total_cells + l.total_cells(),
    });
    MappingReport {
        xbar: *xbar,
        per_layer,
        aggregate,
    }
}
