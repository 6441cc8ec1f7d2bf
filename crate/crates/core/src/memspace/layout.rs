use crate::error::{Error, Result};

/// Storage order of a multi-dimensional array.
///
/// `order[0]` is the slowest-varying logical dimension in memory and the
/// last entry the fastest. `[0, 1, .., n-1]` is row-major; the reverse is the
/// transposed (first-index-fastest) layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutPolicy {
    order: Vec<usize>,
}

impl LayoutPolicy {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &d in &order {
            if d >= order.len() || seen[d] {
                return Err(Error::InvalidLayout(order));
            }
            seen[d] = true;
        }
        Ok(LayoutPolicy { order })
    }

    /// Last index fastest.
    pub fn right(rank: usize) -> Self {
        LayoutPolicy { order: (0..rank).collect() }
    }

    /// First index fastest.
    pub fn left(rank: usize) -> Self {
        LayoutPolicy { order: (0..rank).rev().collect() }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn rank(&self) -> usize {
        self.order.len()
    }

    /// Element strides per logical dimension for the given extents.
    pub fn strides(&self, shape: &[usize]) -> Vec<usize> {
        debug_assert_eq!(shape.len(), self.order.len());
        let mut strides = vec![0; shape.len()];
        let mut step = 1;
        for &d in self.order.iter().rev() {
            strides[d] = step;
            step *= shape[d];
        }
        strides
    }
}
