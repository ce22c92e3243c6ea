use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("node `{node}`: expected {expected} input channels, producer provides {found}")]
    ChannelMismatch {
        node: String,
        expected: usize,
        found: usize,
    },
    #[error("node `{node}`: merge operands differ in spatial size ({lhs} vs {rhs})")]
    SpatialMismatch {
        node: String,
        lhs: crate::TensorShape,
        rhs: crate::TensorShape,
    },
    #[error("portion {num}/{den} of {channels} channels is not a whole number of channels")]
    FractionalChannels { channels: usize, num: u32, den: u32 },
    #[error("invalid portion {num}/{den}: must lie in (0, 1]")]
    InvalidPortion { num: u32, den: u32 },
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("node `{node}` references `{producer}`, which is not an earlier node")]
    UnknownProducer { node: String, producer: String },
    #[error("node `{node}`: {reason}")]
    InvalidLayer { node: String, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("weighted node `{0}` has no entry in the mapping report")]
    UnmappedNode(String),
    #[error("cost total is zero, fraction undefined")]
    ZeroTotal,
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("degenerate tensor shape: {0}")]
    DegenerateShape(String),
}
