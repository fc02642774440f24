use std::fmt;

use serde::{Deserialize, Serialize};

use super::ArchError;

/// Dimensions of an activation tensor in NCHW order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorShape {
    pub batch: u64,
    pub channels: u64,
    pub height: u64,
    pub width: u64,
}

impl TensorShape {
    pub fn new(batch: u64, channels: u64, height: u64, width: u64) -> Result<Self, ArchError> {
        let shape = TensorShape {
            batch,
            channels,
            height,
            width,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        if self.batch == 0 || self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(ArchError::InvalidShape(*self));
        }
        Ok(())
    }

    pub fn with_batch(self, batch: u64) -> Self {
        TensorShape { batch, ..self }
    }

    /// Number of values in one sample (channels x height x width).
    pub fn per_sample(&self) -> u128 {
        self.channels as u128 * self.height as u128 * self.width as u128
    }

    pub fn elements(&self) -> u128 {
        self.batch as u128 * self.per_sample()
    }

    /// Bytes needed to hold the tensor. `u128` keeps batch <= 2^20 with
    /// 2^16-sized dimensions far from overflow.
    pub fn bytes(&self, bytes_per_value: u64) -> u128 {
        self.elements() * bytes_per_value as u128
    }

    pub fn same_spatial(&self, other: &TensorShape) -> bool {
        self.height == other.height && self.width == other.width
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.batch, self.channels, self.height, self.width
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dims() {
        assert!(TensorShape::new(1, 0, 4, 4).is_err());
        assert!(TensorShape::new(0, 1, 4, 4).is_err());
        assert!(TensorShape::new(1, 1, 1, 1).is_ok());
    }

    #[test]
    fn wide_byte_count_does_not_overflow() {
        let s = TensorShape::new(1 << 20, 1 << 16, 1 << 16, 1 << 16).unwrap();
        assert_eq!(s.bytes(8), 1u128 << (20 + 48 + 3));
    }
}
