//! Builders for the four architecture families compared on crossbars.
//!
//! All builders share a 3×3 stem and a global-average-pool + linear head.
//! Node ids are hierarchical (`s2.conv3`, `b1.l4.bottleneck`, ...) so that
//! per-layer reports stay readable.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::ir::{ConcatSource, ConvLayer, NetworkSpec, Node, PoolKind, INPUT_ID};
use crate::portion::{Portion, Position};
use crate::{Error, Result, TensorShape};

pub const DEFAULT_CLASSES: usize = 10;

fn push_head(nodes: &mut Vec<Node>, last: &str, channels: usize, classes: usize) {
    nodes.push(Node::pool("gap", last, PoolKind::GlobalAvg, 0));
    nodes.push(Node::linear("fc", "gap", channels, classes));
}

fn check_positive(what: &str, values: &[usize]) -> Result<()> {
    if values.is_empty() || values.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "{what} must be a non-empty list of positive integers"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Fixed-channel concatenation module
// ---------------------------------------------------------------------------

/// One slice feeding the last layer of the module: `layer` is 1, 2 or 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TemplateSource {
    pub layer: usize,
    pub portion: Portion,
    pub position: Position,
}

/// Which slices of layers 1–3 are concatenated into the input of layer 4.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConcatTemplate {
    pub sources: Vec<TemplateSource>,
}

impl ConcatTemplate {
    /// Slices `portions[i]` of layer `i + 1`, all taken at `position`.
    pub fn uniform(portions: [Portion; 3], position: Position) -> Self {
        Self {
            sources: portions
                .iter()
                .enumerate()
                .map(|(i, &portion)| TemplateSource {
                    layer: i + 1,
                    portion,
                    position,
                })
                .collect(),
        }
    }

    /// Whole output of layer 3 only: the module degenerates to a 4-layer chain.
    pub fn chain() -> Self {
        Self {
            sources: vec![TemplateSource {
                layer: 3,
                portion: Portion::WHOLE,
                position: Position::First,
            }],
        }
    }
}

impl Default for ConcatTemplate {
    /// First quarter of layers 1 and 2, first half of layer 3.
    fn default() -> Self {
        Self::uniform([Portion::QUARTER, Portion::QUARTER, Portion::HALF], Position::First)
    }
}

fn portion(num: u32, den: u32) -> Portion {
    Portion::new(num, den).expect("static portion")
}

/// The portion configurations of the two ablation tables: three positions of
/// the (1/4, 1/4, 1/2) split, then nine first-position splits.
pub fn ablation_templates() -> Vec<(String, ConcatTemplate)> {
    let mut out = Vec::new();
    for pos in [Position::First, Position::Last, Position::Middle] {
        out.push((
            format!("1/4,1/4,1/2 ({})", pos.code()),
            ConcatTemplate::uniform([portion(1, 4), portion(1, 4), portion(1, 2)], pos),
        ));
    }
    let splits: [[(u32, u32); 3]; 9] = [
        [(1, 16), (1, 16), (7, 8)],
        [(1, 8), (1, 8), (3, 4)],
        [(1, 4), (1, 4), (1, 2)],
        [(1, 4), (1, 2), (1, 4)],
        [(1, 2), (1, 4), (1, 4)],
        [(1, 8), (3, 4), (1, 8)],
        [(3, 4), (1, 8), (1, 8)],
        [(1, 16), (7, 8), (1, 16)],
        [(7, 8), (1, 16), (1, 16)],
    ];
    for split in splits {
        let ps = split.map(|(n, d)| portion(n, d));
        out.push((
            format!("{},{},{} (F)", ps[0], ps[1], ps[2]),
            ConcatTemplate::uniform(ps, Position::First),
        ));
    }
    out
}

/// The four-layer module: three C→C 3×3 convolutions, then a fourth whose
/// input is the concatenation described by `template`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposedModule {
    pub channels: usize,
    pub template: ConcatTemplate,
}

impl ProposedModule {
    pub fn new(channels: usize, template: ConcatTemplate) -> Self {
        Self { channels, template }
    }

    /// Appends the module's nodes, ids prefixed with `prefix`, fed from
    /// `input`. Returns the id of the module output.
    pub fn push_nodes(&self, nodes: &mut Vec<Node>, prefix: &str, input: &str) -> Result<String> {
        let c = self.channels;
        let ids: Vec<String> = (1..=4).map(|i| format!("{prefix}conv{i}")).collect();
        let mut prev = String::from(input);
        for id in &ids[..3] {
            nodes.push(Node::conv(id.clone(), prev, ConvLayer::conv3x3(c, c, 1)));
            prev = id.clone();
        }
        let mut sources = Vec::with_capacity(self.template.sources.len());
        for src in &self.template.sources {
            if !(1..=3).contains(&src.layer) {
                return Err(Error::InvalidConfig(format!(
                    "concat template refers to layer {}, expected 1..=3",
                    src.layer
                )));
            }
            // reject fractional slices before the channel sum is checked
            src.portion.of(c)?;
            sources.push(ConcatSource::new(ids[src.layer - 1].clone(), src.portion, src.position));
        }
        let cat = format!("{prefix}cat");
        nodes.push(Node::concat(cat.clone(), sources));
        nodes.push(Node::conv(ids[3].clone(), cat, ConvLayer::conv3x3(c, c, 1)));
        Ok(ids[3].clone())
    }

    /// The module alone, on a `channels × height × width` input.
    pub fn network(&self, height: usize, width: usize) -> Result<NetworkSpec> {
        let mut nodes = Vec::new();
        self.push_nodes(&mut nodes, "", INPUT_ID)?;
        NetworkSpec::new(TensorShape::new(self.channels, height, width)?, nodes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposedConfig {
    pub stage_channels: Vec<usize>,
    pub template: ConcatTemplate,
    pub num_classes: usize,
}

impl Default for ProposedConfig {
    fn default() -> Self {
        Self {
            stage_channels: vec![16, 32, 64, 128],
            template: ConcatTemplate::default(),
            num_classes: DEFAULT_CLASSES,
        }
    }
}

/// Stem, then per stage an entry 3×3 convolution (stride 1 in the first
/// stage, 2 afterwards) followed by one [`ProposedModule`].
pub fn build_proposed(cfg: &ProposedConfig, input_shape: TensorShape) -> Result<NetworkSpec> {
    check_positive("stage_channels", &cfg.stage_channels)?;
    let mut nodes = Vec::new();
    let first = cfg.stage_channels[0];
    nodes.push(Node::conv("stem", INPUT_ID, ConvLayer::conv3x3(input_shape.channels, first, 1)));
    let mut last = String::from("stem");
    let mut width = first;
    for (s, &c) in cfg.stage_channels.iter().enumerate() {
        let stride = if s == 0 { 1 } else { 2 };
        let entry = format!("s{}.entry", s + 1);
        nodes.push(Node::conv(entry.clone(), last, ConvLayer::conv3x3(width, c, stride)));
        let module = ProposedModule::new(c, cfg.template.clone());
        last = module.push_nodes(&mut nodes, &format!("s{}.", s + 1), &entry)?;
        width = c;
    }
    push_head(&mut nodes, &last, width, cfg.num_classes);
    NetworkSpec::new(input_shape, nodes)
}

// ---------------------------------------------------------------------------
// DenseNet
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseNetConfig {
    pub growth_rate: usize,
    pub layers_per_block: usize,
    pub num_blocks: usize,
    pub initial_channels: usize,
    /// 1×1 convolution to 4·GR channels before each 3×3.
    pub bottleneck: bool,
    pub transition_compression: Portion,
    pub num_classes: usize,
}

impl DenseNetConfig {
    pub const DEFAULT_LAYERS_PER_BLOCK: usize = 10;
    pub const DEFAULT_BLOCKS: usize = 3;

    /// DenseNet-BC style defaults: 2·GR stem channels, bottlenecks on,
    /// transitions halve the channel count.
    pub fn new(growth_rate: usize) -> Self {
        Self {
            growth_rate,
            layers_per_block: Self::DEFAULT_LAYERS_PER_BLOCK,
            num_blocks: Self::DEFAULT_BLOCKS,
            initial_channels: 2 * growth_rate,
            bottleneck: true,
            transition_compression: Portion::HALF,
            num_classes: DEFAULT_CLASSES,
        }
    }

    /// Input channels of layer `i` (1-based) of a block entered with `block_in` channels.
    pub fn layer_input_channels(&self, block_in: usize, i: usize) -> usize {
        block_in + (i - 1) * self.growth_rate
    }
}

pub fn build_densenet(cfg: &DenseNetConfig, input_shape: TensorShape) -> Result<NetworkSpec> {
    check_positive(
        "densenet counts",
        &[cfg.growth_rate, cfg.layers_per_block, cfg.num_blocks, cfg.initial_channels, cfg.num_classes],
    )?;
    let gr = cfg.growth_rate;
    let mut nodes = Vec::new();
    nodes.push(Node::conv(
        "stem",
        INPUT_ID,
        ConvLayer::conv3x3(input_shape.channels, cfg.initial_channels, 1),
    ));
    let mut block_in_id = String::from("stem");
    let mut block_in = cfg.initial_channels;

    for b in 1..=cfg.num_blocks {
        let mut features = vec![block_in_id.clone()];
        for i in 1..=cfg.layers_per_block {
            let prefix = format!("b{b}.l{i}");
            let in_ch = cfg.layer_input_channels(block_in, i);
            let input = if features.len() == 1 {
                features[0].clone()
            } else {
                let cat = format!("{prefix}.cat");
                nodes.push(Node::concat(
                    cat.clone(),
                    features.iter().map(ConcatSource::whole).collect(),
                ));
                cat
            };
            let conv_in = if cfg.bottleneck {
                let bn = format!("{prefix}.bottleneck");
                nodes.push(Node::conv(bn.clone(), input, ConvLayer::conv1x1(in_ch, 4 * gr, 1)));
                (bn, 4 * gr)
            } else {
                (input, in_ch)
            };
            let conv = format!("{prefix}.conv");
            nodes.push(Node::conv(conv.clone(), conv_in.0, ConvLayer::conv3x3(conv_in.1, gr, 1)));
            features.push(conv);
        }
        let out = format!("b{b}.out");
        nodes.push(Node::concat(out.clone(), features.iter().map(ConcatSource::whole).collect()));
        let out_ch = block_in + cfg.layers_per_block * gr;

        if b == cfg.num_blocks {
            block_in_id = out;
            block_in = out_ch;
        } else {
            let compressed = cfg.transition_compression.of(out_ch)?;
            let t = format!("t{b}.conv");
            nodes.push(Node::conv(t.clone(), out, ConvLayer::conv1x1(out_ch, compressed, 1)));
            let p = format!("t{b}.pool");
            nodes.push(Node::pool(p.clone(), t, PoolKind::Avg, 2));
            block_in_id = p;
            block_in = compressed;
        }
    }
    push_head(&mut nodes, &block_in_id, block_in, cfg.num_classes);
    NetworkSpec::new(input_shape, nodes)
}

// ---------------------------------------------------------------------------
// ResNet-style
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResNetConfig {
    pub stage_channels: Vec<usize>,
    pub blocks_per_stage: Vec<usize>,
    pub num_classes: usize,
}

impl ResNetConfig {
    /// ResNet-18 layout: widths 64..512, two basic blocks per stage.
    pub fn resnet18() -> Self {
        Self {
            stage_channels: vec![64, 128, 256, 512],
            blocks_per_stage: vec![2, 2, 2, 2],
            num_classes: DEFAULT_CLASSES,
        }
    }
}

/// Basic blocks (two 3×3 convolutions and a residual Add). The first block
/// of every stage but the first downsamples with stride 2; a 1×1 projection
/// on the skip path is inserted whenever the block changes shape.
pub fn build_resnet(cfg: &ResNetConfig, input_shape: TensorShape) -> Result<NetworkSpec> {
    check_positive("stage_channels", &cfg.stage_channels)?;
    check_positive("blocks_per_stage", &cfg.blocks_per_stage)?;
    if cfg.stage_channels.len() != cfg.blocks_per_stage.len() {
        return Err(Error::InvalidConfig(
            "stage_channels and blocks_per_stage differ in length".into(),
        ));
    }
    let mut nodes = Vec::new();
    let first = cfg.stage_channels[0];
    nodes.push(Node::conv("stem", INPUT_ID, ConvLayer::conv3x3(input_shape.channels, first, 1)));
    let mut last = String::from("stem");
    let mut width = first;
    for (s, (&c, &blocks)) in cfg.stage_channels.iter().zip(&cfg.blocks_per_stage).enumerate() {
        for m in 1..=blocks {
            let stride = if s > 0 && m == 1 { 2 } else { 1 };
            let p = format!("s{}.b{m}", s + 1);
            let c1 = format!("{p}.conv1");
            let c2 = format!("{p}.conv2");
            nodes.push(Node::conv(c1.clone(), last.clone(), ConvLayer::conv3x3(width, c, stride)));
            nodes.push(Node::conv(c2.clone(), c1, ConvLayer::conv3x3(c, c, 1)));
            let skip = if stride != 1 || width != c {
                let proj = format!("{p}.proj");
                nodes.push(Node::conv(proj.clone(), last, ConvLayer::conv1x1(width, c, stride)));
                proj
            } else {
                last
            };
            let add = format!("{p}.add");
            nodes.push(Node::add(add.clone(), c2, skip));
            last = add;
            width = c;
        }
    }
    push_head(&mut nodes, &last, width, cfg.num_classes);
    NetworkSpec::new(input_shape, nodes)
}

// ---------------------------------------------------------------------------
// Depthwise-separable
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparableConfig {
    pub stage_channels: Vec<usize>,
    pub blocks_per_stage: usize,
    pub num_classes: usize,
}

impl Default for SeparableConfig {
    fn default() -> Self {
        Self {
            stage_channels: vec![16, 32, 64, 128],
            blocks_per_stage: 2,
            num_classes: DEFAULT_CLASSES,
        }
    }
}

/// MobileNet-style blocks: 3×3 depthwise convolution then 1×1 pointwise.
/// The first block of every stage but the first downsamples in its
/// depthwise step.
pub fn build_separable(cfg: &SeparableConfig, input_shape: TensorShape) -> Result<NetworkSpec> {
    check_positive("stage_channels", &cfg.stage_channels)?;
    check_positive("blocks_per_stage", &[cfg.blocks_per_stage])?;
    let mut nodes = Vec::new();
    let first = cfg.stage_channels[0];
    nodes.push(Node::conv("stem", INPUT_ID, ConvLayer::conv3x3(input_shape.channels, first, 1)));
    let mut last = String::from("stem");
    let mut width = first;
    for (s, &c) in cfg.stage_channels.iter().enumerate() {
        for m in 1..=cfg.blocks_per_stage {
            let stride = if s > 0 && m == 1 { 2 } else { 1 };
            let p = format!("s{}.b{m}", s + 1);
            let dw = format!("{p}.dw");
            let pw = format!("{p}.pw");
            nodes.push(Node::conv(dw.clone(), last, ConvLayer::depthwise(width, 3, stride, 1)));
            nodes.push(Node::conv(pw.clone(), dw, ConvLayer::conv1x1(width, c, 1)));
            last = pw;
            width = c;
        }
    }
    push_head(&mut nodes, &last, width, cfg.num_classes);
    NetworkSpec::new(input_shape, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{param_count, NodeKind};

    fn cifar() -> TensorShape {
        TensorShape::new(3, 32, 32).unwrap()
    }

    fn convs<'a>(net: &'a NetworkSpec, prefix: &'a str) -> impl Iterator<Item = (&'a str, ConvLayer)> + 'a {
        net.nodes().iter().filter_map(move |n| match &n.kind {
            NodeKind::Conv { layer, .. } if n.id.starts_with(prefix) => Some((n.id.as_str(), *layer)),
            _ => None,
        })
    }

    #[test]
    fn proposed_default_structure() {
        let net = build_proposed(&ProposedConfig::default(), cifar()).unwrap();
        assert_eq!(net.count_kind("concat"), 4);
        assert_eq!(net.count_kind("add"), 0);
        for (s, c) in [16, 32, 64, 128].into_iter().enumerate() {
            let prefix = format!("s{}.", s + 1);
            let cats: Vec<_> = net
                .nodes()
                .iter()
                .filter(|n| n.id.starts_with(&prefix) && n.kind.name() == "concat")
                .collect();
            assert_eq!(cats.len(), 1);
            assert_eq!(net.shape_of(&cats[0].id).unwrap().channels, c);
            for (id, layer) in convs(&net, &prefix).filter(|(id, _)| !id.ends_with("entry")) {
                assert_eq!((layer.in_channels, layer.out_channels), (c, c), "{id}");
            }
        }
        assert_eq!(net.shape_of("s1.conv4").unwrap(), TensorShape::new(16, 32, 32).unwrap());
        assert_eq!(net.shape_of("s4.conv4").unwrap(), TensorShape::new(128, 4, 4).unwrap());
        assert_eq!(net.output_shape().channels, 10);
    }

    #[test]
    fn proposed_last_variant_has_same_shapes_but_different_slices() {
        let f = build_proposed(&ProposedConfig::default(), cifar()).unwrap();
        let cfg = ProposedConfig {
            template: ConcatTemplate::uniform([Portion::QUARTER, Portion::QUARTER, Portion::HALF], Position::Last),
            ..Default::default()
        };
        let l = build_proposed(&cfg, cifar()).unwrap();
        assert_eq!(f.shapes(), l.shapes());
        assert_ne!(f, l);
    }

    #[test]
    fn proposed_rejects_fractional_stage() {
        let cfg = ProposedConfig {
            stage_channels: vec![16, 15, 64, 128],
            ..Default::default()
        };
        assert!(matches!(
            build_proposed(&cfg, cifar()),
            Err(Error::FractionalChannels { channels: 15, .. })
        ));
    }

    #[test]
    fn proposed_module_params() {
        let m = ProposedModule::new(64, ConcatTemplate::default()).network(8, 8).unwrap();
        assert_eq!(param_count(&m), 4 * 9 * 64 * 64);
    }

    #[test]
    fn ablation_templates_all_build() {
        let templates = ablation_templates();
        assert_eq!(templates.len(), 12);
        for (name, t) in templates {
            let cfg = ProposedConfig {
                template: t,
                ..Default::default()
            };
            build_proposed(&cfg, cifar()).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn densenet_linear_growth() {
        let cfg = DenseNetConfig {
            growth_rate: 12,
            layers_per_block: 6,
            num_blocks: 1,
            initial_channels: 24,
            bottleneck: false,
            transition_compression: Portion::HALF,
            num_classes: 10,
        };
        let net = build_densenet(&cfg, cifar()).unwrap();
        let inputs: Vec<_> = convs(&net, "b1.").map(|(_, l)| l.in_channels).collect();
        assert_eq!(inputs, vec![24, 36, 48, 60, 72, 84]);
        assert_eq!(net.shape_of("b1.out").unwrap().channels, 24 + 6 * 12);
    }

    #[test]
    fn densenet_bottleneck_layers() {
        let cfg = DenseNetConfig::new(16);
        let net = build_densenet(&cfg, cifar()).unwrap();
        let bns: Vec<_> = convs(&net, "b1.").filter(|(id, _)| id.ends_with("bottleneck")).collect();
        assert_eq!(bns.len(), cfg.layers_per_block);
        for (i, (_, l)) in bns.iter().enumerate() {
            assert_eq!(l.in_channels, 32 + i * 16);
            assert_eq!(l.out_channels, 64);
        }
        for (_, l) in convs(&net, "b").filter(|(id, _)| id.ends_with(".conv")) {
            assert_eq!((l.in_channels, l.out_channels, l.kernel), (64, 16, 3));
        }
        // block 1 leaves 32 + 10·16 = 192 channels, compressed to 96
        assert_eq!(net.shape_of("t1.pool").unwrap(), TensorShape::new(96, 16, 16).unwrap());
        assert_eq!(param_count(&net), 633_504);
    }

    #[test]
    fn densenet_single_layer_has_no_growth() {
        let mut cfg = DenseNetConfig::new(12);
        cfg.layers_per_block = 1;
        cfg.num_blocks = 1;
        cfg.bottleneck = false;
        let net = build_densenet(&cfg, cifar()).unwrap();
        let (_, l) = convs(&net, "b1.").next().unwrap();
        assert_eq!(l.in_channels, cfg.initial_channels);
        assert_eq!(net.count_kind("concat"), 1);
    }

    #[test]
    fn densenet_fractional_compression() {
        let mut cfg = DenseNetConfig::new(12);
        cfg.initial_channels = 25;
        cfg.layers_per_block = 2;
        assert!(matches!(build_densenet(&cfg, cifar()), Err(Error::FractionalChannels { .. })));
    }

    #[test]
    fn resnet_single_block() {
        let cfg = ResNetConfig {
            stage_channels: vec![64],
            blocks_per_stage: vec![1],
            num_classes: 10,
        };
        let net = build_resnet(&cfg, TensorShape::new(64, 8, 8).unwrap()).unwrap();
        assert_eq!(net.count_kind("add"), 1);
        assert_eq!(convs(&net, "s1.").count(), 2);
    }

    #[test]
    fn resnet_transition_projects_skip() {
        let cfg = ResNetConfig {
            stage_channels: vec![64, 128],
            blocks_per_stage: vec![1, 1],
            num_classes: 10,
        };
        let net = build_resnet(&cfg, cifar()).unwrap();
        let proj = net.node("s2.b1.proj").unwrap();
        match &proj.kind {
            NodeKind::Conv { input, layer } => {
                assert_eq!(input, "s1.b1.add");
                assert_eq!(*layer, ConvLayer::conv1x1(64, 128, 2));
            }
            _ => panic!("projection is not a conv"),
        }
        assert!(net.node("s1.b1.proj").is_none());
        assert_eq!(net.shape_of("s2.b1.add").unwrap(), TensorShape::new(128, 16, 16).unwrap());
    }

    #[test]
    fn resnet18_shape() {
        let net = build_resnet(&ResNetConfig::resnet18(), cifar()).unwrap();
        assert_eq!(net.count_kind("add"), 8);
        assert_eq!(net.shape_of("s4.b2.add").unwrap(), TensorShape::new(512, 4, 4).unwrap());
    }

    #[test]
    fn separable_block() {
        let cfg = SeparableConfig {
            stage_channels: vec![64, 128],
            blocks_per_stage: 1,
            num_classes: 10,
        };
        let net = build_separable(&cfg, TensorShape::new(3, 16, 16).unwrap()).unwrap();
        let s2: Vec<_> = convs(&net, "s2.").map(|(_, l)| l).collect();
        assert_eq!(s2, vec![ConvLayer::depthwise(64, 3, 2, 1), ConvLayer::conv1x1(64, 128, 1)]);
    }
}
