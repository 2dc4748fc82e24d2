//! Shared data generation for the benchmark targets.

use kacov::{gram, rng_stream, GramMatrix, KernelSpec, SampleSet};

/// Deterministic gaussian sample set.
pub fn vectors(n: usize, p: usize, seed: u64) -> SampleSet {
    let mut rng = rng_stream(seed, 0);
    SampleSet::from_vectors((0..n).map(|_| (0..p).map(|_| rng.normal()).collect()).collect())
        .unwrap()
}

/// Gaussian-kernel Gram pair over independent marginals.
pub fn gram_pair(n: usize) -> (GramMatrix, GramMatrix) {
    let x = vectors(n, 5, 1);
    let y = vectors(n, 3, 2);
    (
        gram(&x, &KernelSpec::gaussian(None)).unwrap(),
        gram(&y, &KernelSpec::laplacian(None)).unwrap(),
    )
}
