use core::fmt;

use crate::{Error, Result};

/// Channel-major shape of one feature map (no batch dimension).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl TensorShape {
    pub fn new(channels: usize, height: usize, width: usize) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "tensor shape {channels}x{height}x{width} has a zero dimension"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
        })
    }

    pub fn elements(&self) -> u64 {
        self.channels as u64 * self.height as u64 * self.width as u64
    }

    pub fn pixels(&self) -> u64 {
        self.height as u64 * self.width as u64
    }

    pub fn same_spatial(&self, other: &TensorShape) -> bool {
        self.height == other.height && self.width == other.width
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}
