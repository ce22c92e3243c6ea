use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cimnet_core::cost::network_cost;
use cimnet_core::ir::NetworkSpec;
use cimnet_core::mapper::{map_network, CrossbarDims};
use cimnet_core::rank::{feature_map_ranks, RankTolerance};
use cimnet_core::TensorShape;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::arch::{parse_list, parse_shape, Arch};
use crate::{activations, params_file, report, spec_file, suite, FormatError};

const ARCH_HELP: &str = "\
Builtin architectures are written name[:key=val,key=val,...]:
  proposed   stages=16/32/64/128 split=1/4+1/4+1/2 pos=F|M|L classes=10
  densenet   gr=12 layers=10 blocks=3 init=2*gr bottleneck=true compression=1/2 classes=10
  resnet     stages=16/32/64/128 blocks=2 (or one count per stage, e.g. 2/2/3/3) classes=10
  resnet18   classes=10
  separable  stages=16/32/64/128 blocks=2 classes=10
Lists are '/'-separated. Example: --arch densenet:gr=16,layers=12

Cost parameters come from --cost-params, else the file named by
CIMNET_COST_PARAMS, else the built-in frozen defaults.

Exit status: 0 success, 1 invalid configuration, 2 verification failure.";

#[derive(Debug, Parser)]
#[command(name = "cimnet", version, about = "Map, cost and verify CNNs on RRAM crossbar arrays", after_help = ARCH_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-layer crossbar allocation and utilization.
    Map(MapArgs),
    /// Latency and energy under the analytic cost model.
    Cost(CostArgs),
    /// Several architectures side by side, sorted by energy.
    Compare(CompareArgs),
    /// Crossbar-versus-direct convolution oracle suite.
    Verify(VerifyArgs),
    /// Per-channel feature-map ranks of an activation file.
    Rank(RankArgs),
    /// Write the JSON network spec of an architecture.
    Spec(SpecArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct NetArgs {
    /// Builtin architecture (see below).
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub arch: Option<String>,
    /// JSON network spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Stage widths, overriding the architecture's (e.g. 16,32,64,128).
    #[arg(long)]
    pub stages: Option<String>,
    /// Input tensor shape CxHxW.
    #[arg(long, default_value = "3x32x32")]
    pub input: String,
}

#[derive(Debug, Args)]
pub struct XbarArgs {
    /// Crossbar size ROWSxCOLS.
    #[arg(long, default_value = "64x64")]
    pub xbar: String,
    /// Cells holding one weight.
    #[arg(long, default_value_t = 1)]
    pub cells_per_weight: usize,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Write here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub xbar: XbarArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub xbar: XbarArgs,
    /// JSON cost-parameter file.
    #[arg(long)]
    pub cost_params: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Builtin architecture; repeat for each row.
    #[arg(long = "arch")]
    pub archs: Vec<String>,
    /// JSON network spec file; repeat for each row.
    #[arg(long = "spec")]
    pub specs: Vec<PathBuf>,
    /// Stage widths applied to every builtin that has stages.
    #[arg(long)]
    pub stages: Option<String>,
    #[arg(long, default_value = "3x32x32")]
    pub input: String,
    #[command(flatten)]
    pub xbar: XbarArgs,
    #[arg(long)]
    pub cost_params: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub cases: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// JSON activation file: {"shape": [N,C,H,W], "values": [...]}.
    #[arg(long)]
    pub activations: PathBuf,
    /// Fixed singular-value threshold instead of max(H,W)*eps*sigma_max.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    BadConfig(String),
    #[error("verification failed: {failed} of {cases} cases")]
    VerificationFailed { failed: usize, cases: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::BadConfig(_) => 1,
            CliError::VerificationFailed { .. } => 2,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::BadConfig(e.to_string())
    }
}

impl From<cimnet_core::Error> for CliError {
    fn from(e: cimnet_core::Error) -> Self {
        CliError::BadConfig(e.to_string())
    }
}

fn parse_xbar(args: &XbarArgs) -> Result<CrossbarDims, CliError> {
    let dims = parse_list("xbar", &args.xbar, 'x')?;
    match dims[..] {
        [r, c] => Ok(CrossbarDims::new(r, c, args.cells_per_weight)?),
        _ => Err(CliError::BadConfig(format!("--xbar must be ROWSxCOLS, got `{}`", args.xbar))),
    }
}

fn parse_stages(stages: Option<&str>) -> Result<Option<Vec<usize>>, CliError> {
    Ok(stages.map(|s| parse_list("stages", s, ',')).transpose()?)
}

fn build_arch(text: &str, stages: Option<&[usize]>, input: TensorShape) -> Result<NetworkSpec, CliError> {
    let mut arch = Arch::parse(text)?;
    if let Some(s) = stages {
        arch.set_stages(s.to_vec())?;
    }
    Ok(arch.build(input)?)
}

fn load_net(args: &NetArgs) -> Result<NetworkSpec, CliError> {
    let stages = parse_stages(args.stages.as_deref())?;
    match (&args.arch, &args.spec) {
        (Some(a), None) => build_arch(a, stages.as_deref(), parse_shape(&args.input)?),
        (None, Some(path)) => {
            if stages.is_some() {
                return Err(CliError::BadConfig("--stages applies to builtin architectures only".into()));
            }
            Ok(spec_file::load_spec(path)?)
        }
        _ => Err(CliError::BadConfig("give exactly one of --arch or --spec".into())),
    }
}

fn emit(out: &OutArgs, text: &str) -> Result<(), CliError> {
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| FormatError::io(path, e).into()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| FormatError::io(Path::new("<stdout>"), e).into())
        }
    }
}

fn cmd_map(a: &MapArgs) -> Result<(), CliError> {
    let net = load_net(&a.net)?;
    let m = map_network(&net, &parse_xbar(&a.xbar)?);
    let text = match a.format {
        Format::Csv => report::mapping_csv(&m)?,
        Format::Json => report::mapping_json(&m),
        Format::Table => report::mapping_table(&m),
    };
    emit(&a.out, &text)
}

fn cmd_cost(a: &CostArgs) -> Result<(), CliError> {
    let net = load_net(&a.net)?;
    let params = params_file::load_params(a.cost_params.as_deref())?;
    let m = map_network(&net, &parse_xbar(&a.xbar)?);
    let c = network_cost(&net, &m, &params)?;
    let text = match a.format {
        Format::Csv => report::cost_csv(&c)?,
        Format::Json => report::cost_json(&c),
        Format::Table => report::cost_table(&c),
    };
    emit(&a.out, &text)
}

pub fn compare_rows(a: &CompareArgs) -> Result<Vec<report::CompareRow>, CliError> {
    if a.archs.is_empty() && a.specs.is_empty() {
        return Err(CliError::BadConfig("compare needs at least one --arch or --spec".into()));
    }
    let stages = parse_stages(a.stages.as_deref())?;
    let input = parse_shape(&a.input)?;
    let xbar = parse_xbar(&a.xbar)?;
    let params = params_file::load_params(a.cost_params.as_deref())?;
    let mut nets = Vec::new();
    for text in &a.archs {
        nets.push((text.clone(), build_arch(text, stages.as_deref(), input)?));
    }
    for path in &a.specs {
        nets.push((path.display().to_string(), spec_file::load_spec(path)?));
    }
    let mut rows = nets
        .iter()
        .map(|(label, net)| {
            let m = map_network(net, &xbar);
            let c = network_cost(net, &m, &params)?;
            Ok(report::CompareRow::new(label.clone(), net, &m, &c))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    report::sort_by_energy(&mut rows);
    Ok(rows)
}

fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let rows = compare_rows(a)?;
    let text = match a.format {
        Format::Csv => report::compare_csv(&rows)?,
        Format::Json => report::compare_json(&rows),
        Format::Table => report::compare_table(&rows),
    };
    emit(&a.out, &text)
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), CliError> {
    let r = suite::run_suite(a.seed, a.cases);
    emit(&a.out, &report::suite_json(&r))?;
    if r.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerificationFailed {
            failed: r.failures.len(),
            cases: r.cases_run,
        })
    }
}

fn cmd_rank(a: &RankArgs) -> Result<(), CliError> {
    let acts = activations::load_activations(&a.activations)?;
    let tol = match a.tolerance {
        Some(t) if t.is_finite() && t >= 0.0 => RankTolerance::Absolute(t),
        Some(t) => return Err(CliError::BadConfig(format!("--tolerance must be non-negative, got {t}"))),
        None => RankTolerance::Standard,
    };
    let profile = feature_map_ranks(&acts, tol)?;
    let text = match a.format {
        Format::Csv => report::rank_csv(&profile)?,
        Format::Json => report::rank_json(&profile),
        Format::Table => report::rank_table(&profile),
    };
    emit(&a.out, &text)
}

fn cmd_spec(a: &SpecArgs) -> Result<(), CliError> {
    let net = load_net(&a.net)?;
    emit(&a.out, &spec_file::emit_spec(&net))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Map(a) => cmd_map(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Spec(a) => cmd_spec(a),
    }
}

/// Parses `args` (program name first) and runs; errors go to stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cimnet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
