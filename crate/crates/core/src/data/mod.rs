//! Synthetic fixed-effect instances, sparse labeled text files, trace export
//! and the dense binary matrix format.

mod io;
mod libsvm;
mod synthetic;

pub use io::{
    decode_dense, encode_dense, read_dense, read_trace, trace_from_csv, trace_from_json,
    trace_to_csv, trace_to_json, write_dense, write_trace, TraceFormat, DENSE_HEADER_LEN,
    DENSE_MAGIC, SCHEMA_VERSION, TRACE_CSV_HEADER,
};
pub use libsvm::{
    format_sparse_labeled, parse_sparse_labeled, read_sparse_labeled, write_sparse_labeled,
    LabeledData,
};
pub use synthetic::{gen_fixed_effect, laplace_sample, FixedEffectInstance, FixedEffectSpec};
