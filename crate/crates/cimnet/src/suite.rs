//! Seeded oracle-equivalence suite: random convolutions evaluated on
//! simulated crossbars and compared with direct convolution.

use cimnet_core::ir::ConvLayer;
use cimnet_core::mapper::{map_conv, CrossbarDims};
use cimnet_core::tensor::DenseTensor;
use cimnet_core::verify::{conv_direct, program_conv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Standard,
    Depthwise,
    Pointwise,
    Strided,
    /// `in_channels` larger than, and not a multiple of, the crossbar rows.
    Tiled,
}

impl Geometry {
    pub const ALL: [Geometry; 5] = [
        Geometry::Standard,
        Geometry::Depthwise,
        Geometry::Pointwise,
        Geometry::Strided,
        Geometry::Tiled,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Standard => "standard",
            Geometry::Depthwise => "depthwise",
            Geometry::Pointwise => "pointwise",
            Geometry::Strided => "stride2",
            Geometry::Tiled => "tiled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub geometry: Geometry,
    pub layer: ConvLayer,
    pub xbar: CrossbarDims,
    pub input: DenseTensor<i64>,
    pub weights: DenseTensor<i64>,
}

impl Case {
    /// Draws a case of the given geometry from `seed` alone.
    pub fn generate(seed: u64, geometry: Geometry) -> Case {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = [1, 3, 5][rng.gen_range(0..3)];
        let pad = rng.gen_range(0..=k / 2);
        let cin = rng.gen_range(1..10);
        let cout = rng.gen_range(1..10);
        let mut rows = rng.gen_range(2..12);
        let cols = rng.gen_range(2..12);
        let cpw = rng.gen_range(1..=3);
        let layer = match geometry {
            Geometry::Standard => ConvLayer::standard(cin, cout, k, 1, pad),
            Geometry::Depthwise => ConvLayer::depthwise(cin, k, rng.gen_range(1..=2), pad),
            Geometry::Pointwise => ConvLayer::standard(cin, cout, 1, rng.gen_range(1..=2), 0),
            Geometry::Strided => ConvLayer::standard(cin, cout, k, 2, pad),
            Geometry::Tiled => {
                let cin = rng.gen_range(5..20);
                rows = rng.gen_range(2..cin);
                while cin % rows == 0 {
                    rows = rng.gen_range(2..cin);
                }
                ConvLayer::standard(cin, cout, k, rng.gen_range(1..=2), pad)
            }
        };
        let h = layer.kernel + rng.gen_range(0..5);
        let w = layer.kernel + rng.gen_range(0..5);
        let batch = rng.gen_range(1..=2);
        let per_out = if layer.depthwise { 1 } else { layer.in_channels };
        let input = DenseTensor::from_fn([batch, layer.in_channels, h, w], |_, _, _, _| rng.gen_range(-8..=8));
        let weights = DenseTensor::from_fn([layer.out_channels, per_out, layer.kernel, layer.kernel], |_, _, _, _| rng.gen_range(-8..=8));
        Case {
            geometry,
            layer,
            xbar: CrossbarDims::new(rows, cols, cpw).expect("positive dims"),
            input,
            weights,
        }
    }

    pub fn describe(&self) -> String {
        let l = &self.layer;
        let [n, c, h, w] = self.input.dims();
        format!(
            "{} conv {}->{} k={} s={} p={}{} on {n}x{c}x{h}x{w}, crossbar {}x{} cpw={}",
            self.geometry.name(),
            l.in_channels,
            l.out_channels,
            l.kernel,
            l.stride,
            l.padding,
            if l.depthwise { " depthwise" } else { "" },
            self.xbar.rows,
            self.xbar.cols,
            self.xbar.cells_per_weight
        )
    }

    /// `None` when the crossbar result equals direct convolution and the
    /// programmed arrays agree with the mapper; otherwise what went wrong.
    pub fn check(&self) -> Option<String> {
        let direct = match conv_direct(&self.input, &self.layer, &self.weights) {
            Ok(d) => d,
            Err(e) => return Some(format!("direct convolution failed: {e}")),
        };
        let programmed = match program_conv(&self.layer, &self.weights, &self.xbar) {
            Ok(p) => p,
            Err(e) => return Some(format!("programming failed: {e}")),
        };
        let tiling = map_conv(&self.layer, &self.xbar);
        if programmed.num_crossbars() as u64 != tiling.num_crossbars() || programmed.weight_cells() != tiling.used_cells {
            return Some("programmed crossbars disagree with the mapper".into());
        }
        match programmed.apply(&self.input) {
            Ok(out) if out == direct => None,
            Ok(_) => Some("crossbar output differs from direct convolution".into()),
            Err(e) => Some(format!("crossbar evaluation failed: {e}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub cases_run: usize,
    pub failures: Vec<Failure>,
}

/// Case seeds derived from the suite seed; case `i` uses geometry
/// `Geometry::ALL[i % 5]`, so every geometry is covered once `cases >= 5`.
pub fn case_seeds(seed: u64, cases: usize) -> Vec<(u64, Geometry)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases)
        .map(|i| (rng.gen(), Geometry::ALL[i % Geometry::ALL.len()]))
        .collect()
}

pub fn run_suite(seed: u64, cases: usize) -> SuiteReport {
    run_cases(seed, cases, |case| case.check())
}

/// The suite with a custom per-case check (exposed so failure reporting
/// can be exercised).
pub fn run_cases(seed: u64, cases: usize, check: impl Fn(&Case) -> Option<String>) -> SuiteReport {
    let failures = case_seeds(seed, cases)
        .into_iter()
        .filter_map(|(case_seed, geometry)| {
            let case = Case::generate(case_seed, geometry);
            check(&case).map(|why| Failure {
                seed: case_seed,
                config: format!("{}: {why}", case.describe()),
            })
        })
        .collect();
    SuiteReport {
        seed,
        cases_run: cases,
        failures,
    }
}
