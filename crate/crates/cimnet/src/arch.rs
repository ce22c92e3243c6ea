//! Builtin architecture grammar: `name[:key=val,key=val,...]`.
//!
//! | name        | keys (defaults)                                                        |
//! |-------------|------------------------------------------------------------------------|
//! | `proposed`  | `stages=16/32/64/128`, `split=1/4+1/4+1/2`, `pos=F`, `classes=10`       |
//! | `densenet`  | `gr=12`, `layers=10`, `blocks=3`, `init=2·gr`, `bottleneck=true`, `compression=1/2`, `classes=10` |
//! | `resnet`    | `stages=16/32/64/128`, `blocks=2` (one value or one per stage), `classes=10` |
//! | `resnet18`  | `classes=10` (widths 64..512, two blocks per stage)                    |
//! | `separable` | `stages=16/32/64/128`, `blocks=2`, `classes=10`                         |
//!
//! Lists are `/`-separated; the three slices of `split` are `+`-separated.

use std::collections::BTreeMap;

use cimnet_core::builders::{
    build_densenet, build_proposed, build_resnet, build_separable, ConcatTemplate, DenseNetConfig, ProposedConfig,
    ResNetConfig, SeparableConfig, TemplateSource,
};
use cimnet_core::ir::NetworkSpec;
use cimnet_core::portion::{Portion, Position};
use cimnet_core::TensorShape;

use crate::FormatError;

pub const BUILTIN_NAMES: [&str; 5] = ["proposed", "densenet", "resnet", "resnet18", "separable"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arch {
    Proposed(ProposedConfig),
    DenseNet(DenseNetConfig),
    ResNet(ResNetConfig),
    Separable(SeparableConfig),
}

fn bad(msg: impl Into<String>) -> FormatError {
    FormatError::Arch(msg.into())
}

fn parse_usize(key: &str, v: &str) -> Result<usize, FormatError> {
    v.parse().map_err(|_| bad(format!("`{key}` expects an integer, got `{v}`")))
}

pub fn parse_list(key: &str, v: &str, sep: char) -> Result<Vec<usize>, FormatError> {
    v.split(sep).map(|x| parse_usize(key, x.trim())).collect()
}

fn parse_portion(key: &str, v: &str) -> Result<Portion, FormatError> {
    let (n, d) = v
        .split_once('/')
        .ok_or_else(|| bad(format!("`{key}` expects a fraction like 1/4, got `{v}`")))?;
    let (n, d) = (parse_usize(key, n)?, parse_usize(key, d)?);
    let to_u32 = |x: usize| u32::try_from(x).map_err(|_| bad(format!("`{key}` value too large")));
    Ok(Portion::new(to_u32(n)?, to_u32(d)?)?)
}

fn parse_bool(key: &str, v: &str) -> Result<bool, FormatError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(format!("`{key}` expects true or false, got `{v}`"))),
    }
}

struct Keys {
    arch: String,
    map: BTreeMap<String, String>,
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn finish(self) -> Result<(), FormatError> {
        match self.map.keys().next() {
            Some(k) => Err(bad(format!("`{}` does not accept key `{k}`", self.arch))),
            None => Ok(()),
        }
    }
}

impl Arch {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let (name, rest) = match text.split_once(':') {
            Some((n, r)) => (n.trim(), r),
            None => (text.trim(), ""),
        };
        let mut map = BTreeMap::new();
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{pair}`")))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(bad(format!("key `{}` given twice", k.trim())));
            }
        }
        let mut keys = Keys {
            arch: name.to_string(),
            map,
        };
        let classes = keys.take("classes").map(|v| parse_usize("classes", &v)).transpose()?;

        let mut arch = match name {
            "proposed" => {
                let mut cfg = ProposedConfig::default();
                if let Some(v) = keys.take("stages") {
                    cfg.stage_channels = parse_list("stages", &v, '/')?;
                }
                let position = match keys.take("pos") {
                    Some(v) => Position::from_code(&v).ok_or_else(|| bad(format!("`pos` must be F, M or L, got `{v}`")))?,
                    None => Position::First,
                };
                let split = match keys.take("split") {
                    Some(v) => v
                        .split('+')
                        .map(|p| parse_portion("split", p.trim()))
                        .collect::<Result<Vec<_>, _>>()?,
                    None => vec![Portion::QUARTER, Portion::QUARTER, Portion::HALF],
                };
                let split: [Portion; 3] = split
                    .try_into()
                    .map_err(|_| bad("`split` needs exactly three fractions, for layers 1, 2 and 3"))?;
                cfg.template = ConcatTemplate::uniform(split, position);
                Arch::Proposed(cfg)
            }
            "densenet" => {
                let gr = keys.take("gr").map(|v| parse_usize("gr", &v)).transpose()?.unwrap_or(12);
                let mut cfg = DenseNetConfig::new(gr);
                if let Some(v) = keys.take("layers") {
                    cfg.layers_per_block = parse_usize("layers", &v)?;
                }
                if let Some(v) = keys.take("blocks") {
                    cfg.num_blocks = parse_usize("blocks", &v)?;
                }
                if let Some(v) = keys.take("init") {
                    cfg.initial_channels = parse_usize("init", &v)?;
                }
                if let Some(v) = keys.take("bottleneck") {
                    cfg.bottleneck = parse_bool("bottleneck", &v)?;
                }
                if let Some(v) = keys.take("compression") {
                    cfg.transition_compression = parse_portion("compression", &v)?;
                }
                Arch::DenseNet(cfg)
            }
            "resnet" => {
                let stages = match keys.take("stages") {
                    Some(v) => parse_list("stages", &v, '/')?,
                    None => vec![16, 32, 64, 128],
                };
                let blocks = match keys.take("blocks") {
                    Some(v) => parse_list("blocks", &v, '/')?,
                    None => vec![2],
                };
                Arch::ResNet(ResNetConfig {
                    blocks_per_stage: broadcast(&blocks, stages.len())?,
                    stage_channels: stages,
                    num_classes: cimnet_core::builders::DEFAULT_CLASSES,
                })
            }
            "resnet18" => Arch::ResNet(ResNetConfig::resnet18()),
            "separable" => {
                let mut cfg = SeparableConfig::default();
                if let Some(v) = keys.take("stages") {
                    cfg.stage_channels = parse_list("stages", &v, '/')?;
                }
                if let Some(v) = keys.take("blocks") {
                    cfg.blocks_per_stage = parse_usize("blocks", &v)?;
                }
                Arch::Separable(cfg)
            }
            other => {
                return Err(bad(format!(
                    "unknown architecture `{other}` (builtins: {})",
                    BUILTIN_NAMES.join(", ")
                )))
            }
        };
        keys.finish()?;
        if let Some(c) = classes {
            arch.set_classes(c);
        }
        Ok(arch)
    }

    fn set_classes(&mut self, classes: usize) {
        match self {
            Arch::Proposed(c) => c.num_classes = classes,
            Arch::DenseNet(c) => c.num_classes = classes,
            Arch::ResNet(c) => c.num_classes = classes,
            Arch::Separable(c) => c.num_classes = classes,
        }
    }

    /// Replaces the per-stage widths (the `--stages` flag).
    pub fn set_stages(&mut self, stages: Vec<usize>) -> Result<(), FormatError> {
        match self {
            Arch::Proposed(c) => c.stage_channels = stages,
            Arch::Separable(c) => c.stage_channels = stages,
            Arch::ResNet(c) => {
                let uniform = c.blocks_per_stage.windows(2).all(|w| w[0] == w[1]);
                if !uniform {
                    return Err(bad("--stages cannot override a ResNet with per-stage block counts"));
                }
                c.blocks_per_stage = vec![c.blocks_per_stage[0]; stages.len()];
                c.stage_channels = stages;
            }
            Arch::DenseNet(_) => return Err(bad("densenet has no stage widths; use gr=, layers=, blocks=")),
        }
        Ok(())
    }

    pub fn build(&self, input: TensorShape) -> Result<NetworkSpec, FormatError> {
        Ok(match self {
            Arch::Proposed(c) => build_proposed(c, input)?,
            Arch::DenseNet(c) => build_densenet(c, input)?,
            Arch::ResNet(c) => build_resnet(c, input)?,
            Arch::Separable(c) => build_separable(c, input)?,
        })
    }

    /// Canonical spelling with every key spelled out.
    pub fn canonical(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join("/");
        match self {
            Arch::Proposed(c) => {
                let split: Vec<String> = c.template.sources.iter().map(|s: &TemplateSource| s.portion.to_string()).collect();
                let pos = c.template.sources.first().map_or("F", |s| s.position.code());
                format!(
                    "proposed:stages={},split={},pos={pos},classes={}",
                    list(&c.stage_channels),
                    split.join("+"),
                    c.num_classes
                )
            }
            Arch::DenseNet(c) => format!(
                "densenet:gr={},layers={},blocks={},init={},bottleneck={},compression={},classes={}",
                c.growth_rate,
                c.layers_per_block,
                c.num_blocks,
                c.initial_channels,
                c.bottleneck,
                c.transition_compression,
                c.num_classes
            ),
            Arch::ResNet(c) => format!(
                "resnet:stages={},blocks={},classes={}",
                list(&c.stage_channels),
                list(&c.blocks_per_stage),
                c.num_classes
            ),
            Arch::Separable(c) => format!(
                "separable:stages={},blocks={},classes={}",
                list(&c.stage_channels),
                c.blocks_per_stage,
                c.num_classes
            ),
        }
    }
}

fn broadcast(blocks: &[usize], stages: usize) -> Result<Vec<usize>, FormatError> {
    match blocks.len() {
        1 => Ok(vec![blocks[0]; stages]),
        n if n == stages => Ok(blocks.to_vec()),
        n => Err(bad(format!("`blocks` has {n} entries for {stages} stages"))),
    }
}

/// `CxHxW`.
pub fn parse_shape(text: &str) -> Result<TensorShape, FormatError> {
    let dims = parse_list("input", text, 'x')?;
    match dims[..] {
        [c, h, w] => Ok(TensorShape::new(c, h, w)?),
        _ => Err(bad(format!("input shape must be CxHxW, got `{text}`"))),
    }
}
