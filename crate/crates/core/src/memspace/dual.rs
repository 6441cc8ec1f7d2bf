use std::fmt;

use rayon::prelude::*;

use super::layout::LayoutPolicy;
use crate::error::{Error, Result};

/// One of the two logical memory spaces of a [`DualArray`].
///
/// Both live in host memory; `Host` defaults to a row-major layout and
/// `Device` to the transposed one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Space {
    Host,
    Device,
}

impl Space {
    pub fn other(self) -> Space {
        match self {
            Space::Host => Space::Device,
            Space::Device => Space::Host,
        }
    }

    fn slot(self) -> usize {
        match self {
            Space::Host => 0,
            Space::Device => 1,
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Space::Host => f.write_str("host"),
            Space::Device => f.write_str("device"),
        }
    }
}

/// A numeric array mirrored in two spaces with modification tracking.
///
/// Writes mark the written space as modified; [`DualArray::sync`] copies
/// into the target space only when the other space holds newer data.
#[derive(Clone, Debug)]
pub struct DualArray<T> {
    shape: Vec<usize>,
    layouts: [LayoutPolicy; 2],
    strides: [Vec<usize>; 2],
    data: [Vec<T>; 2],
    modified: [bool; 2],
    transfer_count: u64,
}

impl<T> DualArray<T>
where
    T: Copy + Default + Send + Sync,
{
    pub fn new(shape: &[usize], host: LayoutPolicy, device: LayoutPolicy) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidShape { shape: shape.to_vec(), reason: "rank must be at least 1" });
        }
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::InvalidShape { shape: shape.to_vec(), reason: "zero extent" });
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .filter(|&n| n.checked_mul(std::mem::size_of::<T>().max(1)).is_some())
            .ok_or_else(|| Error::InvalidShape { shape: shape.to_vec(), reason: "element count overflows" })?;
        if host.rank() != shape.len() || device.rank() != shape.len() {
            return Err(Error::InvalidShape { shape: shape.to_vec(), reason: "layout rank does not match shape" });
        }
        let strides = [host.strides(shape), device.strides(shape)];
        Ok(DualArray {
            shape: shape.to_vec(),
            layouts: [host, device],
            strides,
            data: [vec![T::default(); len], vec![T::default(); len]],
            modified: [false, false],
            transfer_count: 0,
        })
    }

    /// Row-major host layout, transposed device layout.
    pub fn with_default_layouts(shape: &[usize]) -> Result<Self> {
        let rank = shape.len();
        Self::new(shape, LayoutPolicy::right(rank), LayoutPolicy::left(rank))
    }

    /// Builds a 2-D array from row-major host data.
    pub fn from_rows(rows: usize, cols: usize, host_data: &[T]) -> Result<Self> {
        let mut arr = Self::with_default_layouts(&[rows, cols])?;
        if host_data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: host_data.len() });
        }
        arr.data[0].copy_from_slice(host_data);
        arr.modified[0] = true;
        Ok(arr)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn layout(&self, space: Space) -> &LayoutPolicy {
        &self.layouts[space.slot()]
    }

    pub fn strides(&self, space: Space) -> &[usize] {
        &self.strides[space.slot()]
    }

    pub fn transfer_count(&self) -> u64 {
        self.transfer_count
    }

    pub fn is_modified(&self, space: Space) -> bool {
        self.modified[space.slot()]
    }

    /// True when `space` lags behind the other space.
    pub fn need_sync(&self, space: Space) -> bool {
        self.modified[space.other().slot()]
    }

    /// Flags `space` as holding the newest data.
    pub fn modify(&mut self, space: Space) -> Result<()> {
        if self.need_sync(space) {
            return Err(Error::ConcurrentModification(space));
        }
        self.modified[space.slot()] = true;
        Ok(())
    }

    /// Brings `space` up to date, copying only when it is stale.
    pub fn sync(&mut self, space: Space) {
        if !self.need_sync(space) {
            return;
        }
        let src = space.other().slot();
        let dst = space.slot();
        let (a, b) = self.data.split_at_mut(1);
        let (src_data, dst_data) = if src == 0 { (&a[0], &mut b[0]) } else { (&b[0], &mut a[0]) };
        copy_between_layouts(&self.shape, &self.strides[src], src_data, &self.strides[dst], dst_data);
        self.modified[src] = false;
        self.transfer_count += 1;
    }

    pub fn offset(&self, space: Space, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() || index.iter().zip(&self.shape).any(|(&i, &e)| i >= e) {
            return Err(Error::IndexOutOfBounds { index: index.to_vec(), shape: self.shape.clone() });
        }
        Ok(index.iter().zip(&self.strides[space.slot()]).map(|(i, s)| i * s).sum())
    }

    pub fn get(&self, space: Space, index: &[usize]) -> Result<T> {
        if self.need_sync(space) {
            return Err(Error::StaleSpace(space));
        }
        let off = self.offset(space, index)?;
        Ok(self.data[space.slot()][off])
    }

    pub fn set(&mut self, space: Space, index: &[usize], value: T) -> Result<()> {
        let off = self.offset(space, index)?;
        self.modify(space)?;
        self.data[space.slot()][off] = value;
        Ok(())
    }

    pub fn view(&self, space: Space) -> Result<View<'_, T>> {
        if self.need_sync(space) {
            return Err(Error::StaleSpace(space));
        }
        Ok(View { data: &self.data[space.slot()], shape: &self.shape, strides: &self.strides[space.slot()] })
    }

    /// Mutable access; marks `space` modified.
    pub fn view_mut(&mut self, space: Space) -> Result<ViewMut<'_, T>> {
        self.modify(space)?;
        let slot = space.slot();
        Ok(ViewMut { data: &mut self.data[slot], shape: &self.shape, strides: &self.strides[slot] })
    }

    /// Fills every row of a 2-D array in `space`, rows computed in parallel.
    ///
    /// `fill(row, buf)` writes one logical row. In a transposed layout the
    /// rows are staged contiguously first and then scattered into place.
    pub fn fill_rows<F>(&mut self, space: Space, fill: F) -> Result<()>
    where
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        if self.shape.len() != 2 {
            return Err(Error::InvalidShape { shape: self.shape.clone(), reason: "fill_rows needs a 2-D array" });
        }
        self.modify(space)?;
        let (rows, cols) = (self.shape[0], self.shape[1]);
        let slot = space.slot();
        let strides = self.strides[slot].clone();
        let data = &mut self.data[slot];
        if strides == [cols, 1] {
            data.par_chunks_mut(cols).enumerate().for_each(|(r, row)| fill(r, row));
        } else {
            let mut staged = vec![T::default(); rows * cols];
            staged.par_chunks_mut(cols).enumerate().for_each(|(r, row)| fill(r, row));
            copy_between_layouts(&self.shape, &[cols, 1], &staged, &strides, data);
        }
        Ok(())
    }
}

/// Read-only strided view into one space.
#[derive(Clone, Copy, Debug)]
pub struct View<'a, T> {
    data: &'a [T],
    shape: &'a [usize],
    strides: &'a [usize],
}

impl<'a, T: Copy> View<'a, T> {
    pub fn shape(&self) -> &[usize] {
        self.shape
    }

    pub fn raw(&self) -> &'a [T] {
        self.data
    }

    pub fn strides(&self) -> &[usize] {
        self.strides
    }

    pub fn get(&self, index: &[usize]) -> T {
        let off: usize = index.iter().zip(self.strides).map(|(i, s)| i * s).sum();
        self.data[off]
    }

    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> T {
        self.data[i * self.strides[0] + j * self.strides[1]]
    }

    /// Copies logical row `i` of a 2-D view into `out`.
    pub fn read_row(&self, i: usize, out: &mut [T]) {
        let (s0, s1) = (self.strides[0], self.strides[1]);
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.data[i * s0 + j * s1];
        }
    }
}

impl View<'_, f64> {
    #[inline]
    pub fn vec3(&self, i: usize) -> [f64; 3] {
        let (s0, s1) = (self.strides[0], self.strides[1]);
        let b = i * s0;
        [self.data[b], self.data[b + s1], self.data[b + 2 * s1]]
    }
}

/// Mutable strided view into one space.
#[derive(Debug)]
pub struct ViewMut<'a, T> {
    data: &'a mut [T],
    shape: &'a [usize],
    strides: &'a [usize],
}

impl<T: Copy> ViewMut<'_, T> {
    pub fn shape(&self) -> &[usize] {
        self.shape
    }

    pub fn get(&self, index: &[usize]) -> T {
        let off: usize = index.iter().zip(self.strides).map(|(i, s)| i * s).sum();
        self.data[off]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let off: usize = index.iter().zip(self.strides).map(|(i, s)| i * s).sum();
        self.data[off] = value;
    }

    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> T {
        self.data[i * self.strides[0] + j * self.strides[1]]
    }

    #[inline]
    pub fn set2(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.strides[0] + j * self.strides[1]] = value;
    }

    pub fn fill(&mut self, value: T) {
        self.data.fill(value);
    }
}

impl ViewMut<'_, f64> {
    #[inline]
    pub fn vec3(&self, i: usize) -> [f64; 3] {
        [self.at2(i, 0), self.at2(i, 1), self.at2(i, 2)]
    }

    #[inline]
    pub fn set_vec3(&mut self, i: usize, v: [f64; 3]) {
        for (d, x) in v.into_iter().enumerate() {
            self.set2(i, d, x);
        }
    }
}

fn copy_between_layouts<T: Copy + Send + Sync>(
    shape: &[usize],
    src_strides: &[usize],
    src: &[T],
    dst_strides: &[usize],
    dst: &mut [T],
) {
    if src_strides == dst_strides {
        dst.copy_from_slice(src);
        return;
    }
    if shape.len() == 2 {
        transpose_2d(shape, src_strides, src, dst_strides, dst);
        return;
    }
    // odometer over logical indices, last dimension fastest
    let rank = shape.len();
    let mut idx = vec![0usize; rank];
    let (mut so, mut dof) = (0usize, 0usize);
    for _ in 0..src.len() {
        dst[dof] = src[so];
        let mut d = rank;
        while d > 0 {
            d -= 1;
            idx[d] += 1;
            so += src_strides[d];
            dof += dst_strides[d];
            if idx[d] < shape[d] {
                break;
            }
            so -= src_strides[d] * shape[d];
            dof -= dst_strides[d] * shape[d];
            idx[d] = 0;
        }
    }
}

fn transpose_2d<T: Copy>(shape: &[usize], ss: &[usize], src: &[T], ds: &[usize], dst: &mut [T]) {
    const TILE: usize = 32;
    let (rows, cols) = (shape[0], shape[1]);
    for i0 in (0..rows).step_by(TILE) {
        for j0 in (0..cols).step_by(TILE) {
            for i in i0..(i0 + TILE).min(rows) {
                for j in j0..(j0 + TILE).min(cols) {
                    dst[i * ds[0] + j * ds[1]] = src[i * ss[0] + j * ss[1]];
                }
            }
        }
    }
}
