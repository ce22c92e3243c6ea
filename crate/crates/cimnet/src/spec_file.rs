//! JSON network specs.
//!
//! ```json
//! {
//!   "input_shape": [3, 32, 32],
//!   "nodes": [
//!     {"id": "stem", "kind": "conv", "input": "input", "in_channels": 3, "out_channels": 16,
//!      "kernel": 3, "stride": 1, "padding": 1, "depthwise": false},
//!     {"id": "cat", "kind": "concat",
//!      "sources": [{"producer": "stem", "portion": {"num": 1, "den": 2, "pos": "F"}}]},
//!     {"id": "sum", "kind": "add", "lhs": "a", "rhs": "b"},
//!     {"id": "gap", "kind": "pool", "input": "sum", "pool": "global_avg", "size": 0},
//!     {"id": "fc", "kind": "linear", "input": "gap", "in_features": 16, "out_features": 10}
//!   ]
//! }
//! ```
//!
//! Nodes must be listed producers-first; the reserved id `input` is the
//! network input.

use std::path::Path;

use cimnet_core::ir::{ConcatSource, ConcatSpec, ConvLayer, NetworkSpec, Node, NodeKind, PoolKind};
use cimnet_core::portion::{Portion, Position};
use cimnet_core::TensorShape;
use serde::{Deserialize, Serialize};

use crate::FormatError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    input_shape: [usize; 3],
    nodes: Vec<NodeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    id: String,
    #[serde(flatten)]
    kind: KindDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum KindDoc {
    Conv {
        input: String,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        #[serde(default)]
        depthwise: bool,
    },
    Concat {
        sources: Vec<SourceDoc>,
    },
    Add {
        lhs: String,
        rhs: String,
    },
    Pool {
        input: String,
        pool: String,
        #[serde(default)]
        size: usize,
    },
    Linear {
        input: String,
        in_features: usize,
        out_features: usize,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceDoc {
    producer: String,
    portion: PortionDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortionDoc {
    num: u32,
    den: u32,
    pos: String,
}

impl PortionDoc {
    fn from_source(portion: Portion, position: Position) -> Self {
        Self {
            num: portion.numer(),
            den: portion.denom(),
            pos: position.code().to_string(),
        }
    }

    fn parse(&self) -> Result<(Portion, Position), FormatError> {
        let portion = Portion::new(self.num, self.den)?;
        let position = Position::from_code(&self.pos)
            .ok_or_else(|| FormatError::Schema(format!("position `{}` is not one of F, M, L", self.pos)))?;
        Ok((portion, position))
    }
}

fn node_doc(node: &Node) -> NodeDoc {
    let kind = match &node.kind {
        NodeKind::Conv { input, layer } => KindDoc::Conv {
            input: input.clone(),
            in_channels: layer.in_channels,
            out_channels: layer.out_channels,
            kernel: layer.kernel,
            stride: layer.stride,
            padding: layer.padding,
            depthwise: layer.depthwise,
        },
        NodeKind::Concat(spec) => KindDoc::Concat {
            sources: spec
                .sources
                .iter()
                .map(|s| SourceDoc {
                    producer: s.producer.clone(),
                    portion: PortionDoc::from_source(s.portion, s.position),
                })
                .collect(),
        },
        NodeKind::Add { lhs, rhs } => KindDoc::Add {
            lhs: lhs.clone(),
            rhs: rhs.clone(),
        },
        NodeKind::Pool { input, kind, size } => KindDoc::Pool {
            input: input.clone(),
            pool: kind.name().to_string(),
            size: *size,
        },
        NodeKind::Linear {
            input,
            in_features,
            out_features,
        } => KindDoc::Linear {
            input: input.clone(),
            in_features: *in_features,
            out_features: *out_features,
        },
    };
    NodeDoc {
        id: node.id.clone(),
        kind,
    }
}

fn node_from_doc(doc: NodeDoc) -> Result<Node, FormatError> {
    let kind = match doc.kind {
        KindDoc::Conv {
            input,
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            depthwise,
        } => NodeKind::Conv {
            input,
            layer: ConvLayer {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                depthwise,
            },
        },
        KindDoc::Concat { sources } => {
            let sources = sources
                .into_iter()
                .map(|s| {
                    let (portion, position) = s.portion.parse()?;
                    Ok(ConcatSource::new(s.producer, portion, position))
                })
                .collect::<Result<Vec<_>, FormatError>>()?;
            NodeKind::Concat(ConcatSpec { sources })
        }
        KindDoc::Add { lhs, rhs } => NodeKind::Add { lhs, rhs },
        KindDoc::Pool { input, pool, size } => NodeKind::Pool {
            input,
            kind: PoolKind::from_name(&pool)
                .ok_or_else(|| FormatError::Schema(format!("unknown pool kind `{pool}`")))?,
            size,
        },
        KindDoc::Linear {
            input,
            in_features,
            out_features,
        } => NodeKind::Linear {
            input,
            in_features,
            out_features,
        },
    };
    Ok(Node::new(doc.id, kind))
}

/// Pretty-printed JSON, trailing newline included.
pub fn emit_spec(net: &NetworkSpec) -> String {
    let s = net.input_shape();
    let doc = SpecDoc {
        input_shape: [s.channels, s.height, s.width],
        nodes: net.nodes().iter().map(node_doc).collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("spec documents always serialize");
    out.push('\n');
    out
}

/// Parses and validates a spec (shape inference included).
pub fn parse_spec(text: &str) -> Result<NetworkSpec, FormatError> {
    let doc: SpecDoc = serde_json::from_str(text)?;
    let [c, h, w] = doc.input_shape;
    let input = TensorShape::new(c, h, w)?;
    let nodes = doc.nodes.into_iter().map(node_from_doc).collect::<Result<Vec<_>, _>>()?;
    Ok(NetworkSpec::new(input, nodes)?)
}

pub fn load_spec(path: &Path) -> Result<NetworkSpec, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_spec(&text)
}
