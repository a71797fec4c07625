use crate::rng::RngStream;
use rayon::prelude::*;

/// A structure that draws one item index per call.
pub trait Sampler: Sync {
    fn draw(&self, rng: &mut RngStream) -> usize;

    /// `k` independent draws. Block `c` of `ceil(k / workers)` consecutive
    /// outputs comes from stream `(seed, c)`, so a block's contents do not
    /// depend on how many other blocks there are.
    fn sample_many(&self, k: usize, workers: usize, seed: u64) -> Vec<usize> {
        let mut out = vec![0usize; k];
        if k == 0 {
            return out;
        }
        let block = k.div_ceil(workers.max(1));
        let fill = |(c, chunk): (usize, &mut [usize])| {
            let mut rng = RngStream::new(seed, c as u64);
            for slot in chunk {
                *slot = self.draw(&mut rng);
            }
        };
        if workers <= 1 {
            out.chunks_mut(block).enumerate().for_each(fill);
        } else {
            out.par_chunks_mut(block).enumerate().for_each(fill);
        }
        out
    }
}
