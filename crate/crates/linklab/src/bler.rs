//! Block-error-rate bookkeeping and deterministic parallel block evaluation.

use rayon::prelude::*;

/// Error count over a number of evaluated blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlerEstimate {
    pub blocks: u64,
    pub errors: u64,
}

impl BlerEstimate {
    pub fn bler(&self) -> f64 {
        if self.blocks == 0 {
            0.0
        } else {
            self.errors as f64 / self.blocks as f64
        }
    }

    /// Normal-approximation 95% half-width of the binomial estimate.
    pub fn ci95_halfwidth(&self) -> f64 {
        if self.blocks == 0 {
            return 0.0;
        }
        let p = self.bler();
        1.96 * (p * (1.0 - p) / self.blocks as f64).sqrt()
    }

    /// 3σ half-width, used by oracle-agreement checks.
    pub fn three_sigma(&self) -> f64 {
        if self.blocks == 0 {
            return 0.0;
        }
        let p = self.bler();
        3.0 * (p * (1.0 - p) / self.blocks as f64).sqrt()
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            blocks: self.blocks + other.blocks,
            errors: self.errors + other.errors,
        }
    }
}

/// Number of blocks evaluated per parallel work item. Each chunk owns a
/// derived rng substream keyed by its index, so results are independent of
/// thread scheduling.
pub const CHUNK_BLOCKS: u64 = 4096;

/// Splits `n_blocks` into chunks, evaluates them in parallel and merges the
/// error counts. `eval` maps (chunk index, blocks in chunk) to an error count.
pub fn parallel_blocks<F>(n_blocks: u64, eval: F) -> BlerEstimate
where
    F: Fn(u64, u64) -> u64 + Sync,
{
    let n_chunks = n_blocks.div_ceil(CHUNK_BLOCKS);
    let errors: u64 = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let blocks = CHUNK_BLOCKS.min(n_blocks - ci * CHUNK_BLOCKS);
            eval(ci, blocks)
        })
        .sum();
    BlerEstimate {
        blocks: n_blocks,
        errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bler_is_exact_ratio() {
        let e = BlerEstimate {
            blocks: 8,
            errors: 2,
        };
        assert_eq!(e.bler(), 0.25);
    }

    #[test]
    fn parallel_chunking_covers_every_block_once() {
        // Count one error per block: the total must equal n.
        for n in [1u64, 4095, 4096, 4097, 100_000] {
            let est = parallel_blocks(n, |_, blocks| blocks);
            assert_eq!(est.errors, n);
            assert_eq!(est.blocks, n);
            assert_eq!(est.bler(), 1.0);
        }
    }

    #[test]
    fn parallel_result_is_schedule_independent() {
        // Chunk-indexed evaluation must give the same answer every run.
        let run = || parallel_blocks(50_000, |ci, blocks| (ci * 31 + blocks) % 7);
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
