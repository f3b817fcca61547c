//! Random linear coding of the task matrix and worker-side batching.
//!
//! One Gaussian encoding matrix with `n_workers * p` rows is drawn per run.
//! Worker `i` owns the block of rows `[i*p, (i+1)*p)` and, for a load of
//! `l` rows, works on the first `l` rows of its block. Any `p` rows of a
//! Gaussian matrix are linearly independent with probability one, so the
//! master can decode from whichever `p` rows arrive first.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{least_squares_solve, Matrix, RngStream, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingMatrix {
    g: Matrix,
    p: usize,
    n_workers: usize,
}

impl EncodingMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.g
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn q_max(&self) -> usize {
        self.g.rows()
    }

    pub fn block_size(&self) -> usize {
        self.p
    }
}

pub fn generate_encoding_matrix(
    p: usize,
    n_workers: usize,
    rng: &mut RngStream,
) -> Result<EncodingMatrix> {
    if p == 0 || n_workers == 0 {
        return Err(invalid(format!(
            "encoding matrix needs p >= 1 and n_workers >= 1 (got p={p}, n_workers={n_workers})"
        )));
    }
    Ok(EncodingMatrix {
        g: Matrix::gaussian(n_workers * p, p, rng),
        p,
        n_workers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTaskMatrix {
    pub a_hat: Matrix,
}

/// `Â = G A`.
pub fn encode(enc: &EncodingMatrix, a: &Matrix) -> Result<EncodedTaskMatrix> {
    if a.rows() != enc.p {
        return Err(Error::DimensionMismatch {
            what: "task matrix rows vs encoding width",
            expected: enc.p,
            got: a.rows(),
        });
    }
    Ok(EncodedTaskMatrix {
        a_hat: enc.g.matmul(a)?,
    })
}

/// Rows of `Â` handled by `worker_id` under a load of `load` rows.
pub fn worker_rows(enc: &EncodingMatrix, worker_id: usize, load: usize) -> Result<Range<usize>> {
    if worker_id >= enc.n_workers {
        return Err(invalid(format!(
            "worker {worker_id} out of range for {} workers",
            enc.n_workers
        )));
    }
    if load > enc.block_size() {
        return Err(invalid(format!(
            "load {load} exceeds the per-worker block of {} rows",
            enc.block_size()
        )));
    }
    let start = worker_id * enc.p;
    Ok(start..start + load)
}

/// Rows of `A` handled by `worker_id` when loads partition `A` without coding.
pub fn uncoded_rows(loads: &[usize], worker_id: usize) -> Range<usize> {
    let start: usize = loads[..worker_id].iter().sum();
    start..start + loads[worker_id]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub load: usize,
    pub batch_size: usize,
    pub sizes: Vec<usize>,
}

impl BatchPlan {
    pub fn batch_count(&self) -> usize {
        self.sizes.len()
    }

    /// Row offset of each batch within the worker's load.
    pub fn offsets(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sizes.iter().scan(0usize, |start, &len| {
            let s = *start;
            *start += len;
            Some((s, len))
        })
    }
}

pub fn plan_batches(load: usize, batch_size: usize) -> Result<BatchPlan> {
    if load == 0 || batch_size == 0 {
        return Err(invalid(format!(
            "batching needs load >= 1 and batch size >= 1 (got {load}, {batch_size})"
        )));
    }
    let count = load.div_ceil(batch_size);
    let mut sizes = vec![batch_size; count];
    sizes[count - 1] = load - (count - 1) * batch_size;
    Ok(BatchPlan {
        load,
        batch_size,
        sizes,
    })
}

/// Recovers `A x` from received encoded results `ŷ = Ĝ A x`.
pub fn decode(g_received: &Matrix, y_received: &Vector) -> Result<Vector> {
    let p = g_received.cols();
    if g_received.rows() < p {
        return Err(Error::InsufficientResults {
            have: g_received.rows(),
            need: p,
        });
    }
    least_squares_solve(g_received, y_received)
}
