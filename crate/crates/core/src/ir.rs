//! Architecture intermediate representation.
//!
//! A [`NetworkSpec`] is an ordered list of nodes. Each node names its
//! producers by id; the reserved id [`INPUT_ID`] refers to the network
//! input. Producers must appear earlier in the list, so node order is a
//! topological order and the graph is acyclic by construction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::portion::{Portion, Position};
use crate::{Error, Result, TensorShape};

/// Id by which nodes refer to the network input.
pub const INPUT_ID: &str = "input";

/// Geometry of a square-kernel 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// One k×k filter per channel, no cross-channel mixing.
    pub depthwise: bool,
}

impl ConvLayer {
    pub fn standard(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            depthwise: false,
        }
    }

    pub fn depthwise(channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            in_channels: channels,
            out_channels: channels,
            kernel,
            stride,
            padding,
            depthwise: true,
        }
    }

    /// "Same" padding 3×3 convolution.
    pub fn conv3x3(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        Self::standard(in_channels, out_channels, 3, stride, 1)
    }

    pub fn conv1x1(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        Self::standard(in_channels, out_channels, 1, stride, 0)
    }

    pub fn check(&self) -> core::result::Result<(), String> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err("channel counts must be positive".to_string());
        }
        if self.kernel == 0 || self.stride == 0 {
            return Err("kernel and stride must be positive".to_string());
        }
        if self.depthwise && self.in_channels != self.out_channels {
            return Err(format!(
                "depthwise convolution needs in_channels == out_channels ({} != {})",
                self.in_channels, self.out_channels
            ));
        }
        Ok(())
    }

    /// Spatial output size for one axis: floor((n + 2p - k) / s) + 1.
    pub fn output_extent(&self, n: usize) -> Option<usize> {
        let padded = n + 2 * self.padding;
        if padded < self.kernel {
            return None;
        }
        Some((padded - self.kernel) / self.stride + 1)
    }

    /// Number of scalar weights (no bias).
    pub fn params(&self) -> u64 {
        let k2 = (self.kernel * self.kernel) as u64;
        if self.depthwise {
            k2 * self.in_channels as u64
        } else {
            k2 * self.in_channels as u64 * self.out_channels as u64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolKind {
    Max,
    Avg,
    /// Reduces every channel to 1×1; the pool size is ignored.
    GlobalAvg,
}

impl PoolKind {
    pub fn name(&self) -> &'static str {
        match self {
            PoolKind::Max => "max",
            PoolKind::Avg => "avg",
            PoolKind::GlobalAvg => "global_avg",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "max" => Some(PoolKind::Max),
            "avg" => Some(PoolKind::Avg),
            "global_avg" => Some(PoolKind::GlobalAvg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConcatSource {
    pub producer: String,
    pub portion: Portion,
    pub position: Position,
}

impl ConcatSource {
    pub fn new(producer: impl Into<String>, portion: Portion, position: Position) -> Self {
        Self {
            producer: producer.into(),
            portion,
            position,
        }
    }

    pub fn whole(producer: impl Into<String>) -> Self {
        Self::new(producer, Portion::WHOLE, Position::First)
    }
}

/// Channel-axis concatenation of contiguous slices of earlier outputs, in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConcatSpec {
    pub sources: Vec<ConcatSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Conv {
        input: String,
        layer: ConvLayer,
    },
    Concat(ConcatSpec),
    Add {
        lhs: String,
        rhs: String,
    },
    Pool {
        input: String,
        kind: PoolKind,
        size: usize,
    },
    Linear {
        input: String,
        in_features: usize,
        out_features: usize,
    },
}

impl NodeKind {
    pub fn producers(&self) -> Vec<&str> {
        match self {
            NodeKind::Conv { input, .. }
            | NodeKind::Pool { input, .. }
            | NodeKind::Linear { input, .. } => alloc::vec![input.as_str()],
            NodeKind::Concat(spec) => spec.sources.iter().map(|s| s.producer.as_str()).collect(),
            NodeKind::Add { lhs, rhs } => alloc::vec![lhs.as_str(), rhs.as_str()],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Conv { .. } => "conv",
            NodeKind::Concat(_) => "concat",
            NodeKind::Add { .. } => "add",
            NodeKind::Pool { .. } => "pool",
            NodeKind::Linear { .. } => "linear",
        }
    }

    /// Nodes that own weights and therefore occupy crossbars.
    pub fn is_weighted(&self) -> bool {
        matches!(self, NodeKind::Conv { .. } | NodeKind::Linear { .. })
    }

    pub fn params(&self) -> u64 {
        match self {
            NodeKind::Conv { layer, .. } => layer.params(),
            NodeKind::Linear {
                in_features,
                out_features,
                ..
            } => *in_features as u64 * *out_features as u64,
            _ => 0,
        }
    }

    fn rename_producers(&mut self, f: &dyn Fn(&str) -> String) {
        match self {
            NodeKind::Conv { input, .. }
            | NodeKind::Pool { input, .. }
            | NodeKind::Linear { input, .. } => *input = f(input),
            NodeKind::Concat(spec) => {
                for s in &mut spec.sources {
                    s.producer = f(&s.producer);
                }
            }
            NodeKind::Add { lhs, rhs } => {
                *lhs = f(lhs);
                *rhs = f(rhs);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        Self {
            id: id.into(),
            kind,
        }
    }

    pub fn conv(id: impl Into<String>, input: impl Into<String>, layer: ConvLayer) -> Self {
        Self::new(
            id,
            NodeKind::Conv {
                input: input.into(),
                layer,
            },
        )
    }

    pub fn concat(id: impl Into<String>, sources: Vec<ConcatSource>) -> Self {
        Self::new(id, NodeKind::Concat(ConcatSpec { sources }))
    }

    pub fn add(id: impl Into<String>, lhs: impl Into<String>, rhs: impl Into<String>) -> Self {
        Self::new(
            id,
            NodeKind::Add {
                lhs: lhs.into(),
                rhs: rhs.into(),
            },
        )
    }

    pub fn pool(id: impl Into<String>, input: impl Into<String>, kind: PoolKind, size: usize) -> Self {
        Self::new(
            id,
            NodeKind::Pool {
                input: input.into(),
                kind,
                size,
            },
        )
    }

    pub fn linear(
        id: impl Into<String>,
        input: impl Into<String>,
        in_features: usize,
        out_features: usize,
    ) -> Self {
        Self::new(
            id,
            NodeKind::Linear {
                input: input.into(),
                in_features,
                out_features,
            },
        )
    }
}

/// A validated architecture: ids are unique, producers precede consumers and
/// every node has a well-defined output shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    input_shape: TensorShape,
    nodes: Vec<Node>,
    shapes: Vec<TensorShape>,
}

impl NetworkSpec {
    pub fn new(input_shape: TensorShape, nodes: Vec<Node>) -> Result<Self> {
        TensorShape::new(input_shape.channels, input_shape.height, input_shape.width)?;
        let shapes = infer_shapes(input_shape, &nodes)?;
        Ok(Self {
            input_shape,
            nodes,
            shapes,
        })
    }

    pub fn input_shape(&self) -> TensorShape {
        self.input_shape
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Output shapes aligned with [`nodes`](Self::nodes).
    pub fn shapes(&self) -> &[TensorShape] {
        &self.shapes
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Output shape of a node, or of the network input for [`INPUT_ID`].
    pub fn shape_of(&self, id: &str) -> Option<TensorShape> {
        if id == INPUT_ID {
            return Some(self.input_shape);
        }
        self.index_of(id).map(|i| self.shapes[i])
    }

    /// Shape of the last node (the input shape for an empty network).
    pub fn output_shape(&self) -> TensorShape {
        self.shapes.last().copied().unwrap_or(self.input_shape)
    }

    pub fn output_id(&self) -> &str {
        self.nodes.last().map(|n| n.id.as_str()).unwrap_or(INPUT_ID)
    }

    pub fn shape_map(&self) -> BTreeMap<String, TensorShape> {
        self.nodes
            .iter()
            .zip(&self.shapes)
            .map(|(n, s)| (n.id.clone(), *s))
            .collect()
    }

    pub fn count_kind(&self, name: &str) -> usize {
        self.nodes.iter().filter(|n| n.kind.name() == name).count()
    }

    /// Appends `next` after this network, feeding it from this network's
    /// output. Ids of `next` are prefixed with `prefix`.
    pub fn chain(&self, next: &NetworkSpec, prefix: &str) -> Result<NetworkSpec> {
        if next.input_shape != self.output_shape() {
            return Err(Error::InvalidConfig(format!(
                "cannot chain: output {} does not match next input {}",
                self.output_shape(),
                next.input_shape
            )));
        }
        let upstream = String::from(self.output_id());
        let rename = |id: &str| {
            if id == INPUT_ID {
                upstream.clone()
            } else {
                format!("{prefix}{id}")
            }
        };
        let mut nodes = self.nodes.clone();
        for node in &next.nodes {
            let mut kind = node.kind.clone();
            kind.rename_producers(&rename);
            nodes.push(Node::new(format!("{prefix}{}", node.id), kind));
        }
        NetworkSpec::new(self.input_shape, nodes)
    }
}

/// Infers every node's output shape, checking channel arithmetic on the way.
///
/// The result is aligned with `nodes`.
pub fn infer_shapes(input_shape: TensorShape, nodes: &[Node]) -> Result<Vec<TensorShape>> {
    let mut index: BTreeMap<&str, TensorShape> = BTreeMap::new();
    index.insert(INPUT_ID, input_shape);
    let mut shapes = Vec::with_capacity(nodes.len());

    for node in nodes {
        if index.contains_key(node.id.as_str()) {
            return Err(Error::DuplicateId(node.id.clone()));
        }
        let lookup = |producer: &str| {
            index.get(producer).copied().ok_or_else(|| Error::UnknownProducer {
                node: node.id.clone(),
                producer: producer.into(),
            })
        };
        let invalid = |reason: String| Error::InvalidLayer {
            node: node.id.clone(),
            reason,
        };

        let shape = match &node.kind {
            NodeKind::Conv { input, layer } => {
                let src = lookup(input)?;
                layer.check().map_err(invalid)?;
                if src.channels != layer.in_channels {
                    return Err(Error::ChannelMismatch {
                        node: node.id.clone(),
                        expected: layer.in_channels,
                        found: src.channels,
                    });
                }
                let (h, w) = match (layer.output_extent(src.height), layer.output_extent(src.width)) {
                    (Some(h), Some(w)) => (h, w),
                    _ => {
                        return Err(invalid(format!(
                            "kernel {} larger than padded input {}",
                            layer.kernel, src
                        )))
                    }
                };
                TensorShape {
                    channels: layer.out_channels,
                    height: h,
                    width: w,
                }
            }
            NodeKind::Concat(spec) => {
                let first = match spec.sources.first() {
                    Some(s) => lookup(&s.producer)?,
                    None => return Err(invalid("concat has no sources".into())),
                };
                let mut channels = 0;
                for src in &spec.sources {
                    let shape = lookup(&src.producer)?;
                    if !shape.same_spatial(&first) {
                        return Err(Error::SpatialMismatch {
                            node: node.id.clone(),
                            lhs: first,
                            rhs: shape,
                        });
                    }
                    channels += src.portion.of(shape.channels)?;
                }
                TensorShape {
                    channels,
                    ..first
                }
            }
            NodeKind::Add { lhs, rhs } => {
                let (a, b) = (lookup(lhs)?, lookup(rhs)?);
                if !a.same_spatial(&b) {
                    return Err(Error::SpatialMismatch {
                        node: node.id.clone(),
                        lhs: a,
                        rhs: b,
                    });
                }
                if a.channels != b.channels {
                    return Err(Error::ChannelMismatch {
                        node: node.id.clone(),
                        expected: a.channels,
                        found: b.channels,
                    });
                }
                a
            }
            NodeKind::Pool { input, kind, size } => {
                let src = lookup(input)?;
                match kind {
                    PoolKind::GlobalAvg => TensorShape {
                        height: 1,
                        width: 1,
                        ..src
                    },
                    PoolKind::Max | PoolKind::Avg => {
                        if *size == 0 || src.height < *size || src.width < *size {
                            return Err(invalid(format!(
                                "pool size {size} does not fit input {src}"
                            )));
                        }
                        TensorShape {
                            height: src.height / size,
                            width: src.width / size,
                            ..src
                        }
                    }
                }
            }
            NodeKind::Linear {
                input,
                in_features,
                out_features,
            } => {
                let src = lookup(input)?;
                if *out_features == 0 {
                    return Err(invalid("linear layer needs out_features >= 1".into()));
                }
                if src.elements() != *in_features as u64 {
                    return Err(Error::ChannelMismatch {
                        node: node.id.clone(),
                        expected: *in_features,
                        found: src.elements() as usize,
                    });
                }
                TensorShape {
                    channels: *out_features,
                    height: 1,
                    width: 1,
                }
            }
        };
        index.insert(node.id.as_str(), shape);
        shapes.push(shape);
    }
    Ok(shapes)
}

/// Total scalar weights: k²·in·out per convolution (k²·channels when
/// depthwise) and in·out per linear layer. Bias and normalization
/// parameters are not modelled.
pub fn param_count(net: &NetworkSpec) -> u64 {
    net.nodes().iter().map(|n| n.kind.params()).sum()
}
