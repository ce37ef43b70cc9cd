//! File formats: the binary frame stack, the key=value run configuration and
//! delimited-text result bundles.

mod bundle;
mod config;
mod stack;

pub use bundle::{
    read_correlation, read_decomposition, read_intensity, read_key_values, read_result_bundle,
    read_table, write_bench_report, write_correlation, write_decomposition, write_intensity,
    write_result_bundle, BundleContext, LoadedBundle, Table,
};
pub use config::{RunConfig, SynthesisOptions};
pub use stack::{decode_stack, encode_stack, meta_path, read_stack, write_stack, HEADER_LEN, MAGIC};

/// Nine significant digits, round-trippable through `str::parse`.
pub(crate) fn fmt_num(x: f64) -> String {
    format!("{x:.8e}")
}
