//! Per-sample feature extraction spread over scoped threads.

use std::thread;

use gzsl_core::data::SkeletonSequence;
use gzsl_core::model::{columns_to_matrix, Framework};
use gzsl_core::{Matrix, Result};

/// Features of `seqs` as columns of a `d_f×N` matrix. Each worker fills a
/// contiguous block of columns, so the result does not depend on `threads`.
pub fn extract_features(fw: &Framework, seqs: &[SkeletonSequence], threads: usize) -> Result<Matrix> {
    let threads = threads.max(1).min(seqs.len().max(1));
    if threads == 1 {
        return fw.extract_batch(seqs);
    }
    let chunk = seqs.len().div_ceil(threads);
    let mut cols: Vec<Option<Result<Vec<f64>>>> = (0..seqs.len()).map(|_| None).collect();
    thread::scope(|scope| {
        for (part, out) in seqs.chunks(chunk).zip(cols.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (s, slot) in part.iter().zip(out) {
                    *slot = Some(fw.extract(s));
                }
            });
        }
    });
    let cols = cols.into_iter().map(|c| c.expect("every slot filled")).collect::<Result<Vec<_>>>()?;
    Ok(columns_to_matrix(fw.d_f(), &cols))
}
