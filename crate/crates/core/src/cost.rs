//! Analytic latency/energy model over a crossbar mapping.
//!
//! Units are arbitrary; the model is meant for relative comparisons.
//!
//! Weighted layer producing an `H×W` output:
//!
//! ```text
//! reads   = H·W
//! latency = reads · t_read · ceil(max_cols_per_crossbar / adc_share)
//! energy  = reads · (crossbars · rows · cols · e_cell + mapped_cols · e_adc)
//! ```
//!
//! Every cell of an allocated crossbar is charged on every read, whether it
//! holds a weight or not. Concat, Add and Pool nodes are charged per output
//! element (`e_buffer`/`t_buffer` for concat and pool, `e_add`/`t_add` for
//! the residual add). Execution is sequential: totals are sums over nodes.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign};

use crate::ir::{NetworkSpec, Node, NodeKind};
use crate::mapper::{LayerMapping, MappingReport};
use crate::{Error, Result, TensorShape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Time per crossbar vector-matrix read.
    pub t_read: f64,
    /// Columns multiplexed onto one ADC.
    pub adc_share: u32,
    /// Energy per cell per read.
    pub e_cell: f64,
    /// Energy per column conversion.
    pub e_adc: f64,
    /// Energy per element moved by concat or pooling.
    pub e_buffer: f64,
    /// Energy per element of a residual add.
    pub e_add: f64,
    pub t_buffer: f64,
    pub t_add: f64,
}

impl CostParams {
    /// Revision of [`CostParams::default`]; bump whenever a value changes.
    pub const DEFAULTS_VERSION: u32 = 1;

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("t_read", self.t_read),
            ("e_cell", self.e_cell),
            ("e_adc", self.e_adc),
            ("e_buffer", self.e_buffer),
            ("e_add", self.e_add),
            ("t_buffer", self.t_buffer),
            ("t_add", self.t_add),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(alloc::format!(
                    "cost parameter {name} = {v} must be finite and non-negative"
                )));
            }
        }
        if self.t_read <= 0.0 {
            return Err(Error::InvalidConfig("t_read must be positive".into()));
        }
        if self.adc_share == 0 {
            return Err(Error::InvalidConfig("adc_share must be at least 1".into()));
        }
        Ok(())
    }

    /// Every energy and time parameter multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            t_read: self.t_read * factor,
            adc_share: self.adc_share,
            e_cell: self.e_cell * factor,
            e_adc: self.e_adc * factor,
            e_buffer: self.e_buffer * factor,
            e_add: self.e_add * factor,
            t_buffer: self.t_buffer * factor,
            t_add: self.t_add * factor,
        }
    }
}

impl Default for CostParams {
    /// Digital per-element energy is 256× the per-cell analog read energy,
    /// which puts the residual adds of a ResNet-18 layout near 10% of its
    /// energy. The digital datapath moves 64 elements per time unit.
    fn default() -> Self {
        Self {
            t_read: 1.0,
            adc_share: 8,
            e_cell: 1.0,
            e_adc: 4.0,
            e_buffer: 256.0,
            e_add: 256.0,
            t_buffer: 1.0 / 64.0,
            t_add: 1.0 / 64.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CostKind {
    /// Cell array reads.
    Crossbar,
    /// Column conversions (and the read serialization they cause).
    Adc,
    Concat,
    Add,
    Pool,
}

impl CostKind {
    pub const ALL: [CostKind; 5] = [
        CostKind::Crossbar,
        CostKind::Adc,
        CostKind::Concat,
        CostKind::Add,
        CostKind::Pool,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CostKind::Crossbar => "crossbar",
            CostKind::Adc => "adc",
            CostKind::Concat => "concat",
            CostKind::Add => "add",
            CostKind::Pool => "pool",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// One quantity (latency or energy) split by [`CostKind`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Breakdown {
    pub crossbar: f64,
    pub adc: f64,
    pub concat: f64,
    pub add: f64,
    pub pool: f64,
}

impl Breakdown {
    pub fn get(&self, kind: CostKind) -> f64 {
        match kind {
            CostKind::Crossbar => self.crossbar,
            CostKind::Adc => self.adc,
            CostKind::Concat => self.concat,
            CostKind::Add => self.add,
            CostKind::Pool => self.pool,
        }
    }

    fn only(kind: CostKind, value: f64) -> Self {
        let mut b = Self::default();
        match kind {
            CostKind::Crossbar => b.crossbar = value,
            CostKind::Adc => b.adc = value,
            CostKind::Concat => b.concat = value,
            CostKind::Add => b.add = value,
            CostKind::Pool => b.pool = value,
        }
        b
    }

    pub fn total(&self) -> f64 {
        self.crossbar + self.adc + self.concat + self.add + self.pool
    }
}

impl Add for Breakdown {
    type Output = Breakdown;

    fn add(self, rhs: Breakdown) -> Breakdown {
        Breakdown {
            crossbar: self.crossbar + rhs.crossbar,
            adc: self.adc + rhs.adc,
            concat: self.concat + rhs.concat,
            add: self.add + rhs.add,
            pool: self.pool + rhs.pool,
        }
    }
}

impl AddAssign for Breakdown {
    fn add_assign(&mut self, rhs: Breakdown) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCost {
    pub node_id: String,
    pub op: &'static str,
    pub latency: Breakdown,
    pub energy: Breakdown,
}

impl LayerCost {
    pub fn total_latency(&self) -> f64 {
        self.latency.total()
    }

    pub fn total_energy(&self) -> f64 {
        self.energy.total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub per_layer: Vec<LayerCost>,
    pub latency: Breakdown,
    pub energy: Breakdown,
}

impl CostReport {
    pub fn total_latency(&self) -> f64 {
        self.latency.total()
    }

    pub fn total_energy(&self) -> f64 {
        self.energy.total()
    }

    /// Number of nodes charged under `kind` (merge/pool kinds only).
    pub fn charges(&self, op: &str) -> usize {
        self.per_layer.iter().filter(|l| l.op == op).count()
    }
}

/// Cost of a single node. Weighted nodes need their mapping entry.
pub fn layer_cost(
    node: &Node,
    mapping: Option<&LayerMapping>,
    out_shape: TensorShape,
    params: &CostParams,
) -> Result<LayerCost> {
    let elements = out_shape.elements() as f64;
    let digital = |kind: CostKind, e: f64, t: f64| (Breakdown::only(kind, elements * t), Breakdown::only(kind, elements * e));

    let (latency, energy) = match &node.kind {
        NodeKind::Conv { .. } | NodeKind::Linear { .. } => {
            let m = mapping.ok_or_else(|| Error::UnmappedNode(node.id.clone()))?;
            let t = &m.tiling;
            let reads = out_shape.pixels() as f64;
            let serial = t.max_occupied_cols().div_ceil(params.adc_share as usize) as f64;
            let latency = Breakdown {
                crossbar: reads * params.t_read,
                adc: reads * params.t_read * (serial - 1.0),
                ..Default::default()
            };
            let energy = Breakdown {
                crossbar: reads * t.total_cells() as f64 * params.e_cell,
                adc: reads * t.occupied_cols_total() as f64 * params.e_adc,
                ..Default::default()
            };
            (latency, energy)
        }
        NodeKind::Concat(_) => digital(CostKind::Concat, params.e_buffer, params.t_buffer),
        NodeKind::Add { .. } => digital(CostKind::Add, params.e_add, params.t_add),
        NodeKind::Pool { .. } => digital(CostKind::Pool, params.e_buffer, params.t_buffer),
    };
    Ok(LayerCost {
        node_id: node.id.clone(),
        op: node.kind.name(),
        latency,
        energy,
    })
}

/// Sequential execution: per-node costs in topological order, summed.
pub fn network_cost(net: &NetworkSpec, mapping: &MappingReport, params: &CostParams) -> Result<CostReport> {
    let mut per_layer = Vec::with_capacity(net.nodes().len());
    let mut latency = Breakdown::default();
    let mut energy = Breakdown::default();
    for (node, shape) in net.nodes().iter().zip(net.shapes()) {
        let entry = if node.kind.is_weighted() { mapping.get(&node.id) } else { None };
        let cost = layer_cost(node, entry, *shape, params)?;
        latency += cost.latency;
        energy += cost.energy;
        per_layer.push(cost);
    }
    Ok(CostReport {
        per_layer,
        latency,
        energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fraction {
    pub latency: f64,
    pub energy: f64,
}

/// Share of total latency and of total energy attributed to `kind`.
pub fn cost_breakdown_fraction(report: &CostReport, kind: CostKind) -> Result<Fraction> {
    let (lt, et) = (report.total_latency(), report.total_energy());
    if lt <= 0.0 || et <= 0.0 {
        return Err(Error::ZeroTotal);
    }
    Ok(Fraction {
        latency: report.latency.get(kind) / lt,
        energy: report.energy.get(kind) / et,
    })
}
