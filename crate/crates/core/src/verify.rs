//! Functional execution of mapped layers.
//!
//! [`conv_direct`] is the textbook convolution used as the oracle.
//! [`conv_crossbar`] programs the layer's sub-matrices onto simulated
//! crossbars exactly as [`crate::mapper`] lays them out, feeds each crossbar
//! the input pixels at its kernel offset, and accumulates the column
//! outputs across sub-matrices and row tiles. With integer scalars the two
//! must agree exactly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::builders::ProposedModule;
use crate::ir::{ConvLayer, NetworkSpec, NodeKind, PoolKind, INPUT_ID};
use crate::mapper::CrossbarDims;
use crate::portion::select_channels;
use crate::tensor::{DenseTensor, Scalar};
use crate::{Error, Result};

fn expected_weight_dims(layer: &ConvLayer) -> [usize; 4] {
    let per_filter = if layer.depthwise { 1 } else { layer.in_channels };
    [layer.out_channels, per_filter, layer.kernel, layer.kernel]
}

fn check_operands<T: Scalar>(
    input: &DenseTensor<T>,
    layer: &ConvLayer,
    weights: &DenseTensor<T>,
) -> Result<(usize, usize)> {
    layer.check().map_err(Error::DimMismatch)?;
    let [_, c, h, w] = input.dims();
    if c != layer.in_channels {
        return Err(Error::DimMismatch(format!(
            "input has {c} channels, layer expects {}",
            layer.in_channels
        )));
    }
    let expected = expected_weight_dims(layer);
    if weights.dims() != expected {
        return Err(Error::DimMismatch(format!(
            "weights {:?}, layer expects {:?}",
            weights.dims(),
            expected
        )));
    }
    match (layer.output_extent(h), layer.output_extent(w)) {
        (Some(oh), Some(ow)) => Ok((oh, ow)),
        _ => Err(Error::DimMismatch(format!(
            "kernel {} does not fit padded input {h}x{w}",
            layer.kernel
        ))),
    }
}

/// Input pixel at kernel offset `(ky, kx)` of output position `(oy, ox)`,
/// or `None` inside the zero padding.
#[inline]
fn source_pixel(layer: &ConvLayer, oy: usize, ox: usize, ky: usize, kx: usize, h: usize, w: usize) -> Option<(usize, usize)> {
    let iy = (oy * layer.stride + ky).checked_sub(layer.padding)?;
    let ix = (ox * layer.stride + kx).checked_sub(layer.padding)?;
    (iy < h && ix < w).then_some((iy, ix))
}

/// Cross-correlation with the layer's stride and zero padding.
pub fn conv_direct<T: Scalar>(
    input: &DenseTensor<T>,
    layer: &ConvLayer,
    weights: &DenseTensor<T>,
) -> Result<DenseTensor<T>> {
    let (oh, ow) = check_operands(input, layer, weights)?;
    let [n, _, h, w] = input.dims();
    let k = layer.kernel;
    Ok(DenseTensor::from_fn([n, layer.out_channels, oh, ow], |b, o, oy, ox| {
        let mut acc = T::zero();
        for ky in 0..k {
            for kx in 0..k {
                let Some((iy, ix)) = source_pixel(layer, oy, ox, ky, kx, h, w) else {
                    continue;
                };
                if layer.depthwise {
                    acc = acc + weights.get(o, 0, ky, kx) * input.get(b, o, iy, ix);
                } else {
                    for i in 0..layer.in_channels {
                        acc = acc + weights.get(o, i, ky, kx) * input.get(b, i, iy, ix);
                    }
                }
            }
        }
        acc
    }))
}

/// A `rows × cols` array of programmed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossbar<T> {
    rows: usize,
    cols: usize,
    cells: Vec<T>,
}

impl<T: Scalar> Crossbar<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![T::zero(); rows * cols],
        }
    }

    pub fn program(&mut self, row: usize, col: usize, value: T) {
        self.cells[row * self.cols + col] = value;
    }

    pub fn cell(&self, row: usize, col: usize) -> T {
        self.cells[row * self.cols + col]
    }

    /// Drives every wordline with `input[row]` and sums each bitline.
    pub fn mvm(&self, input: &[T]) -> Vec<T> {
        debug_assert_eq!(input.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, &x) in input.iter().enumerate() {
            let row = &self.cells[r * self.cols..(r + 1) * self.cols];
            for (acc, &g) in out.iter_mut().zip(row) {
                *acc = *acc + g * x;
            }
        }
        out
    }
}

/// One crossbar holding a tile of one sub-matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile<T> {
    pub kernel_offset: (usize, usize),
    /// First input channel on this tile's wordline 0.
    pub row_offset: usize,
    /// First logical column on this tile's bitline 0.
    pub col_offset: usize,
    /// Cells that encode a network weight (excludes zero padding).
    pub weight_cells: u64,
    pub crossbar: Crossbar<T>,
}

/// A convolution programmed onto crossbars.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgrammedLayer<T> {
    pub layer: ConvLayer,
    pub xbar: CrossbarDims,
    pub tiles: Vec<Tile<T>>,
}

impl<T: Scalar> ProgrammedLayer<T> {
    pub fn num_crossbars(&self) -> usize {
        self.tiles.len()
    }

    pub fn weight_cells(&self) -> u64 {
        self.tiles.iter().map(|t| t.weight_cells).sum()
    }

    fn logical_cols(&self) -> usize {
        self.layer.out_channels * self.xbar.cells_per_weight
    }

    pub fn apply(&self, input: &DenseTensor<T>) -> Result<DenseTensor<T>> {
        let layer = &self.layer;
        let [n, c, h, w] = input.dims();
        if c != layer.in_channels {
            return Err(Error::DimMismatch(format!(
                "input has {c} channels, layer expects {}",
                layer.in_channels
            )));
        }
        let (Some(oh), Some(ow)) = (layer.output_extent(h), layer.output_extent(w)) else {
            return Err(Error::DimMismatch(format!("kernel does not fit input {h}x{w}")));
        };
        let (rows, cols, cpw) = (self.xbar.rows, self.xbar.cols, self.xbar.cells_per_weight);
        let logical_cols = self.logical_cols();
        let mut out = DenseTensor::zeros([n, layer.out_channels, oh, ow]);
        let mut wordlines = vec![T::zero(); rows];
        let mut bitline_sums = vec![T::zero(); logical_cols];

        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    bitline_sums.iter_mut().for_each(|v| *v = T::zero());
                    for tile in &self.tiles {
                        let (ky, kx) = tile.kernel_offset;
                        let pixel = source_pixel(layer, oy, ox, ky, kx, h, w);
                        for (r, slot) in wordlines.iter_mut().enumerate() {
                            let ch = tile.row_offset + r;
                            *slot = match pixel {
                                Some((iy, ix)) if ch < c => input.get(b, ch, iy, ix),
                                _ => T::zero(),
                            };
                        }
                        let partial = tile.crossbar.mvm(&wordlines);
                        for (j, v) in partial.into_iter().enumerate().take(cols) {
                            let col = tile.col_offset + j;
                            if col < logical_cols {
                                bitline_sums[col] = bitline_sums[col] + v;
                            }
                        }
                    }
                    for o in 0..layer.out_channels {
                        let mut acc = T::zero();
                        for s in 0..cpw {
                            acc = acc + bitline_sums[o * cpw + s];
                        }
                        out.set(b, o, oy, ox, acc);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Lays the k² sub-matrices of `layer` onto crossbars.
///
/// Weight `W[o, i, ky, kx]` sits at row `i`, column `o·cpw` of sub-matrix
/// `(ky, kx)`; the remaining `cpw - 1` cells of the weight hold zero.
/// Depthwise weights sit on the diagonal of a zero-filled matrix.
pub fn program_conv<T: Scalar>(
    layer: &ConvLayer,
    weights: &DenseTensor<T>,
    xbar: &CrossbarDims,
) -> Result<ProgrammedLayer<T>> {
    layer.check().map_err(Error::DimMismatch)?;
    let expected = expected_weight_dims(layer);
    if weights.dims() != expected {
        return Err(Error::DimMismatch(format!(
            "weights {:?}, layer expects {:?}",
            weights.dims(),
            expected
        )));
    }
    let (rows, cols, cpw) = (xbar.rows, xbar.cols, xbar.cells_per_weight);
    let logical_rows = layer.in_channels;
    let logical_cols = layer.out_channels * cpw;
    let row_tiles = logical_rows.div_ceil(rows);
    let col_tiles = logical_cols.div_ceil(cols);

    let mut tiles = Vec::with_capacity(layer.kernel * layer.kernel * row_tiles * col_tiles);
    for ky in 0..layer.kernel {
        for kx in 0..layer.kernel {
            for rt in 0..row_tiles {
                for ct in 0..col_tiles {
                    let (row_offset, col_offset) = (rt * rows, ct * cols);
                    let mut crossbar = Crossbar::new(rows, cols);
                    let mut weight_cells = 0;
                    for r in 0..rows {
                        let i = row_offset + r;
                        if i >= logical_rows {
                            break;
                        }
                        for cc in 0..cols {
                            let col = col_offset + cc;
                            if col >= logical_cols {
                                break;
                            }
                            let (o, slice) = (col / cpw, col % cpw);
                            let (holds_weight, value) = if layer.depthwise {
                                (i == o, weights.get(o, 0, ky, kx))
                            } else {
                                (true, weights.get(o, i, ky, kx))
                            };
                            if holds_weight {
                                weight_cells += 1;
                                if slice == 0 {
                                    crossbar.program(r, cc, value);
                                }
                            }
                        }
                    }
                    tiles.push(Tile {
                        kernel_offset: (ky, kx),
                        row_offset,
                        col_offset,
                        weight_cells,
                        crossbar,
                    });
                }
            }
        }
    }
    Ok(ProgrammedLayer {
        layer: *layer,
        xbar: *xbar,
        tiles,
    })
}

pub fn conv_crossbar<T: Scalar>(
    input: &DenseTensor<T>,
    layer: &ConvLayer,
    weights: &DenseTensor<T>,
    xbar: &CrossbarDims,
) -> Result<DenseTensor<T>> {
    check_operands(input, layer, weights)?;
    program_conv(layer, weights, xbar)?.apply(input)
}

/// How weighted layers are evaluated by [`forward`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Direct,
    Crossbar(CrossbarDims),
}

fn run_conv<T: Scalar>(
    engine: Engine,
    input: &DenseTensor<T>,
    layer: &ConvLayer,
    weights: &DenseTensor<T>,
) -> Result<DenseTensor<T>> {
    match engine {
        Engine::Direct => conv_direct(input, layer, weights),
        Engine::Crossbar(xbar) => conv_crossbar(input, layer, weights, &xbar),
    }
}

fn pool<T: Scalar>(input: &DenseTensor<T>, kind: PoolKind, size: usize) -> DenseTensor<T> {
    let [n, c, h, w] = input.dims();
    let (window_h, window_w, oh, ow) = match kind {
        PoolKind::GlobalAvg => (h, w, 1, 1),
        PoolKind::Max | PoolKind::Avg => (size, size, h / size, w / size),
    };
    DenseTensor::from_fn([n, c, oh, ow], |b, ch, oy, ox| {
        let mut acc: Option<T> = None;
        for dy in 0..window_h {
            for dx in 0..window_w {
                let v = input.get(b, ch, oy * window_h + dy, ox * window_w + dx);
                acc = Some(match (acc, kind) {
                    (None, _) => v,
                    (Some(a), PoolKind::Max) => a.max_of(v),
                    (Some(a), _) => a + v,
                });
            }
        }
        let acc = acc.unwrap_or_else(T::zero);
        match kind {
            PoolKind::Max => acc,
            _ => T::mean_of(acc, window_h * window_w),
        }
    })
}

/// Evaluates every node of `net`. `weights` maps each Conv and Linear id to
/// its weight tensor (linear weights as `(out, in, 1, 1)`). Returns the
/// activations aligned with `net.nodes()`.
pub fn forward<T: Scalar>(
    net: &NetworkSpec,
    input: &DenseTensor<T>,
    weights: &BTreeMap<String, DenseTensor<T>>,
    engine: Engine,
) -> Result<Vec<DenseTensor<T>>> {
    if input.sample_shape() != Some(net.input_shape()) {
        return Err(Error::DimMismatch(format!(
            "input dims {:?} do not match network input {}",
            input.dims(),
            net.input_shape()
        )));
    }
    let mut acts: Vec<DenseTensor<T>> = Vec::with_capacity(net.nodes().len());
    let index: BTreeMap<&str, usize> = net.nodes().iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let fetch = |acts: &[DenseTensor<T>], id: &str| -> DenseTensor<T> {
        if id == INPUT_ID {
            input.clone()
        } else {
            acts[index[id]].clone()
        }
    };

    for (node, expected) in net.nodes().iter().zip(net.shapes()) {
        let weight = |id: &str| {
            weights
                .get(id)
                .ok_or_else(|| Error::DimMismatch(format!("no weights supplied for `{id}`")))
        };
        let out = match &node.kind {
            NodeKind::Conv { input, layer } => run_conv(engine, &fetch(&acts, input), layer, weight(&node.id)?)?,
            NodeKind::Linear {
                input,
                in_features,
                out_features,
            } => {
                let x = fetch(&acts, input);
                let flat = DenseTensor::new([x.batch(), *in_features, 1, 1], x.into_values())?;
                let layer = ConvLayer::conv1x1(*in_features, *out_features, 1);
                run_conv(engine, &flat, &layer, weight(&node.id)?)?
            }
            NodeKind::Concat(spec) => {
                let mut parts = Vec::with_capacity(spec.sources.len());
                for src in &spec.sources {
                    let x = fetch(&acts, &src.producer);
                    let range = select_channels(x.dims()[1], src.portion, src.position)?;
                    parts.push(x.channel_slice(range)?);
                }
                DenseTensor::concat_channels(&parts)?
            }
            NodeKind::Add { lhs, rhs } => fetch(&acts, lhs).axpby(T::one(), &fetch(&acts, rhs), T::one())?,
            NodeKind::Pool { input, kind, size } => pool(&fetch(&acts, input), *kind, *size),
        };
        if out.sample_shape() != Some(*expected) {
            return Err(Error::DimMismatch(format!(
                "node `{}` produced {:?}, shape inference predicts {}",
                node.id,
                out.dims(),
                expected
            )));
        }
        acts.push(out);
    }
    Ok(acts)
}

/// Runs one fixed-channel module: layers 1–3 in sequence, layer 4 on the
/// concatenation selected by the module's template. `weights` are the four
/// convolutions' `(C, C, 3, 3)` tensors in order.
pub fn module_forward<T: Scalar>(
    module: &ProposedModule,
    input: &DenseTensor<T>,
    weights: &[DenseTensor<T>; 4],
    engine: Engine,
) -> Result<DenseTensor<T>> {
    let [_, _, h, w] = input.dims();
    let net = module.network(h, w)?;
    let by_id = weights
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("conv{}", i + 1), t.clone()))
        .collect();
    let mut acts = forward(&net, input, &by_id, engine)?;
    Ok(acts.pop().expect("module has nodes"))
}
