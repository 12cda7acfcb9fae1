//! Two-layer error-bounded lossy compression for gridded single-precision data.
//!
//! Each chunk of a 4D grid is flattened to 2D, normalized, and coded by a
//! wavelet base layer plus an optional truncated residual layer so that the
//! reconstruction stays within a range-relative maximum error.

pub mod base;
pub mod container;
pub mod dwt;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod pipeline;
pub mod spiht;

pub use base::{base_decode, base_encode, BaseCodec, BaseEncoding, WaveletBaseCodec};
pub use container::{read_file, write_file, EbccFile, FORMAT_VERSION};
pub use dwt::{forward_dwt, inverse_dwt, SubbandGeometry, WaveletPyramid};
pub use error::{EbccError, Result};
pub use grid::{flatten_chunk, normalize, Chunk, ChunkExtent, Field2, GridArray};
pub use metrics::{error_stats, ErrorStats};
pub use pipeline::{
    compress_chunk, compress_grid, decompress_chunk, decompress_grid, ChunkMode, CompressedChunk,
    EbccParams,
};
pub use spiht::{spiht_decode, spiht_encode, EmbeddedStream};
