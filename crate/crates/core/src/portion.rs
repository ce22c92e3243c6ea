//! Contiguous channel slices forwarded from a producer to a concatenation.

use core::fmt;
use core::ops::Range;

use num_rational::Ratio;

use crate::{Error, Result};

/// A fraction of a producer's output channels, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Portion(Ratio<u32>);

impl Portion {
    pub const WHOLE: Portion = Portion(Ratio::new_raw(1, 1));
    pub const HALF: Portion = Portion(Ratio::new_raw(1, 2));
    pub const QUARTER: Portion = Portion(Ratio::new_raw(1, 4));

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 || num > den {
            return Err(Error::InvalidPortion { num, den });
        }
        Ok(Portion(Ratio::new(num, den)))
    }

    pub fn numer(&self) -> u32 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u32 {
        *self.0.denom()
    }

    pub fn ratio(&self) -> Ratio<u32> {
        self.0
    }

    /// Number of channels this portion selects out of `channels`.
    pub fn of(&self, channels: usize) -> Result<usize> {
        let scaled = channels as u64 * self.numer() as u64;
        let den = self.denom() as u64;
        if scaled % den != 0 {
            return Err(Error::FractionalChannels {
                channels,
                num: self.numer(),
                den: self.denom(),
            });
        }
        Ok((scaled / den) as usize)
    }
}

impl fmt::Display for Portion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

/// Where in the producer's channel axis the slice is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Position {
    First,
    Middle,
    Last,
}

impl Position {
    pub fn code(&self) -> &'static str {
        match self {
            Position::First => "F",
            Position::Middle => "M",
            Position::Last => "L",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "F" => Some(Position::First),
            "M" => Some(Position::Middle),
            "L" => Some(Position::Last),
            _ => None,
        }
    }
}

/// Half-open channel index range selected by `portion` at `position`.
///
/// The middle slice is centred with its offset rounded down.
pub fn select_channels(
    out_channels: usize,
    portion: Portion,
    position: Position,
) -> Result<Range<usize>> {
    let n = portion.of(out_channels)?;
    let start = match position {
        Position::First => 0,
        Position::Last => out_channels - n,
        Position::Middle => (out_channels - n) / 2,
    };
    Ok(start..start + n)
}
