use std::fmt;

/// Broad classification used by callers that map failures onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Input violates an operation's domain (bad coordinates, empty input, ...).
    Domain,
    /// The requested configuration cannot be realised.
    Configuration,
}

/// Errors raised by tree construction, the kernels and the rank simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum FmmError {
    /// Anchor coordinates or level outside the representable range.
    InvalidKey { level: u32, anchor: [u64; 3] },
    /// Packed key has bits set above `3 * level`.
    MalformedKey { level: u32, packed: u64 },
    /// A position lies outside the half-open domain cube.
    OutsideDomain { position: [f64; 3] },
    /// No bodies were supplied.
    EmptyInput,
    /// Uniform depth would exceed the 64-bit key capacity.
    DepthTooLarge { requested: u32, max: u32 },
    /// A configuration field is out of range.
    InvalidConfig(String),
    /// Parallel streams of a batch or array pair disagree in length.
    LengthMismatch { expected: usize, found: usize },
    /// Expansion evaluated or translated at its own center.
    CoincidentCenters,
    /// Interaction lists only exist from level 2 downwards.
    LevelTooShallow { level: u32 },
    /// More simulated ranks than occupied leaves.
    TooManyRanks { ranks: usize, leaves: usize },
    /// A simulated rank tried to read data that is neither owned nor received.
    MissingRemote { rank: usize, cell: usize },
    /// Reference array of an error norm is identically zero.
    ZeroReference,
}

impl FmmError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            FmmError::DepthTooLarge { .. }
            | FmmError::InvalidConfig(_)
            | FmmError::TooManyRanks { .. } => ErrorKind::Configuration,
            _ => ErrorKind::Domain,
        }
    }
}

impl fmt::Display for FmmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FmmError::InvalidKey { level, anchor } => write!(
                f,
                "anchor ({}, {}, {}) is not a valid cell at level {}",
                anchor[0], anchor[1], anchor[2], level
            ),
            FmmError::MalformedKey { level, packed } => {
                write!(f, "packed key {packed:#x} has bits above level {level}")
            }
            FmmError::OutsideDomain { position } => write!(
                f,
                "position ({}, {}, {}) lies outside the domain",
                position[0], position[1], position[2]
            ),
            FmmError::EmptyInput => write!(f, "at least one body is required"),
            FmmError::DepthTooLarge { requested, max } => {
                write!(f, "tree depth {requested} exceeds the maximum of {max}")
            }
            FmmError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            FmmError::LengthMismatch { expected, found } => {
                write!(
                    f,
                    "stream length mismatch: expected {expected}, found {found}"
                )
            }
            FmmError::CoincidentCenters => {
                write!(f, "expansion evaluated or translated at its own center")
            }
            FmmError::LevelTooShallow { level } => {
                write!(f, "interaction lists start at level 2, got level {level}")
            }
            FmmError::TooManyRanks { ranks, leaves } => {
                write!(
                    f,
                    "{ranks} ranks requested but only {leaves} occupied leaves"
                )
            }
            FmmError::MissingRemote { rank, cell } => {
                write!(f, "rank {rank} has no copy of cell {cell}")
            }
            FmmError::ZeroReference => write!(f, "reference array has zero norm"),
        }
    }
}

impl std::error::Error for FmmError {}

pub type Result<T> = std::result::Result<T, FmmError>;
