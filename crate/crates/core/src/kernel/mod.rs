//! Byte-sequence features: k-gram spectrum kernels, kernel PCA embeddings,
//! a synthetic request corpus and span-based sequence reconstruction.

mod approx;
mod corpus;
mod pca;
mod spectrum;

pub use approx::{approximate_sequence, rationalize, DEFAULT_MAX_DENOMINATOR};
pub use corpus::{synth_corpus, CorpusParams};
pub use pca::{kernel_pca, PcaEmbedding, PcaOptions};
pub use spectrum::{
    extract_spectrum, kernel_matrix, normalize_dot, rbf_from_dots, spectrum_dot, KernelConfig,
    KernelMatrix, SparseSpectrum,
};
