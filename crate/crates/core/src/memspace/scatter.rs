use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// How concurrent indexed contributions are deconflicted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Single worker, left-to-right. The reference.
    Serial,
    /// Per-copy private buffers combined after the pass.
    Duplicate { copies: usize },
    /// Concurrent compare-and-swap adds on shared storage.
    Atomic,
}

impl Strategy {
    pub fn duplicate(copies: usize) -> Self {
        Strategy::Duplicate { copies: copies.max(1) }
    }
}

const ATOMIC_GRAIN: usize = 64;

/// Accumulates `(index, value)` contributions into a dense target.
#[derive(Clone, Debug)]
pub struct ScatterAccumulator {
    len: usize,
    strategy: Strategy,
}

/// Write handle handed to each work item.
pub enum ScatterSink<'a> {
    Buffer(&'a mut [f64]),
    Atomic(&'a [AtomicU64]),
}

impl ScatterSink<'_> {
    #[inline]
    pub fn add(&mut self, index: usize, value: f64) {
        match self {
            ScatterSink::Buffer(buf) => buf[index] += value,
            ScatterSink::Atomic(cells) => atomic_add(&cells[index], value),
        }
    }

    #[inline]
    pub fn add3(&mut self, atom: usize, v: [f64; 3]) {
        let b = 3 * atom;
        self.add(b, v[0]);
        self.add(b + 1, v[1]);
        self.add(b + 2, v[2]);
    }
}

#[inline]
fn atomic_add(cell: &AtomicU64, value: f64) {
    let mut cur = cell.load(Ordering::Relaxed);
    loop {
        let next = (f64::from_bits(cur) + value).to_bits();
        match cell.compare_exchange_weak(cur, next, Ordering::Relaxed, Ordering::Relaxed) {
            Ok(_) => return,
            Err(seen) => cur = seen,
        }
    }
}

impl ScatterAccumulator {
    pub fn new(len: usize, strategy: Strategy) -> Self {
        ScatterAccumulator { len, strategy }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Runs `body` for every item in `0..n_items` and returns the
    /// accumulated target plus the per-item outputs in item order.
    ///
    /// Returning from this call is the finalize barrier.
    pub fn run<P, F>(&self, n_items: usize, body: F) -> (Vec<f64>, Vec<P>)
    where
        P: Send,
        F: Fn(usize, &mut ScatterSink<'_>) -> P + Sync + Send,
    {
        match self.strategy {
            Strategy::Serial => {
                let mut buf = vec![0.0; self.len];
                let out = {
                    let mut sink = ScatterSink::Buffer(&mut buf);
                    (0..n_items).map(|i| body(i, &mut sink)).collect()
                };
                (buf, out)
            }
            Strategy::Duplicate { copies } => {
                let copies = copies.max(1);
                let chunk = n_items.div_ceil(copies).max(1);
                let parts: Vec<(Vec<f64>, Vec<P>)> = (0..copies)
                    .into_par_iter()
                    .map(|c| {
                        let lo = (c * chunk).min(n_items);
                        let hi = ((c + 1) * chunk).min(n_items);
                        let mut buf = vec![0.0; if lo < hi { self.len } else { 0 }];
                        let mut sink = ScatterSink::Buffer(&mut buf);
                        let out: Vec<P> = (lo..hi).map(|i| body(i, &mut sink)).collect();
                        (buf, out)
                    })
                    .collect();
                let (bufs, outs): (Vec<Vec<f64>>, Vec<Vec<P>>) = parts.into_iter().unzip();
                let mut result = vec![0.0; self.len];
                result.par_chunks_mut(4096).enumerate().for_each(|(b, dst)| {
                    let base = b * 4096;
                    let n = dst.len();
                    for buf in bufs.iter().filter(|buf| !buf.is_empty()) {
                        for (d, s) in dst.iter_mut().zip(&buf[base..base + n]) {
                            *d += *s;
                        }
                    }
                });
                let out = outs.into_iter().flatten().collect();
                (result, out)
            }
            Strategy::Atomic => {
                let cells: Vec<AtomicU64> = (0..self.len).map(|_| AtomicU64::new(0f64.to_bits())).collect();
                let out: Vec<P> = (0..n_items)
                    .into_par_iter()
                    .with_min_len(ATOMIC_GRAIN)
                    .map(|i| {
                        let mut sink = ScatterSink::Atomic(&cells);
                        body(i, &mut sink)
                    })
                    .collect();
                let result = cells.into_iter().map(|c| f64::from_bits(c.into_inner())).collect();
                (result, out)
            }
        }
    }

    /// Sums a list of contributions into a dense array of length `len`.
    pub fn accumulate(&self, contributions: &[(usize, f64)]) -> Result<Vec<f64>> {
        if let Some(&(index, _)) = contributions.iter().find(|(i, _)| *i >= self.len) {
            return Err(Error::ScatterIndex { index, len: self.len });
        }
        let (result, _) = self.run(contributions.len(), |k, sink| {
            let (i, v) = contributions[k];
            sink.add(i, v);
        });
        Ok(result)
    }
}
