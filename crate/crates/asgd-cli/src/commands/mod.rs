pub mod eval;
pub mod synthetic;
pub mod train;
pub mod verify;

use anyhow::Context;
use asgd::ingest::{open_libsvm, prepare_stream, IngestOptions, LabelMap};
use asgd::Sample;
use std::path::Path;

/// Loads a whole libsvm file with a fixed dimensionality, label map and bias
/// flag. Any index beyond the declared dimension is a data error.
pub fn load_samples(
    path: &Path,
    base_dim: usize,
    bias: bool,
    label_map: &LabelMap,
) -> anyhow::Result<Vec<Sample>> {
    let reader = open_libsvm(path).with_context(|| format!("opening {}", path.display()))?;
    let opts = IngestOptions {
        declared_dim: Some(base_dim),
        bias,
        label_map: label_map.clone(),
        m_prefix: 1,
    };
    let (_, stream) = prepare_stream(reader, &opts)?;
    let samples = stream
        .collect::<asgd::Result<Vec<Sample>>>()
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(samples)
}
