//! Streaming libsvm-format ingestion: parsing, label normalization, optional
//! bias augmentation, and estimation of the largest squared feature norm
//! from a buffered prefix that is replayed so training still sees every
//! sample exactly once.

use crate::error::{Error, Result};
use crate::sparse::{Sample, SparseVector};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Parses one libsvm line: `<label> (<index>:<value>)*` with 1-based indices,
/// `#` starting a comment. Returns `None` for blank or comment-only lines.
/// Internal indices are 0-based.
pub fn parse_libsvm_line(line: &str, line_number: usize) -> Result<Option<Sample>> {
    let content = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let mut tokens = tokenize(content);
    let (label_col, label_tok) = match tokens.next() {
        Some(t) => t,
        None => return Ok(None),
    };
    let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
        line: line_number,
        column: label_col,
        message: format!("invalid label {label_tok:?}"),
    })?;
    let mut pairs = Vec::new();
    let mut max_index = 0usize;
    for (col, tok) in tokens {
        let (index_str, value_str) = tok.split_once(':').ok_or_else(|| Error::Parse {
            line: line_number,
            column: col,
            message: format!("expected index:value, got {tok:?}"),
        })?;
        let index: usize = index_str.parse().map_err(|_| Error::Parse {
            line: line_number,
            column: col,
            message: format!("invalid feature index {index_str:?}"),
        })?;
        if index == 0 {
            return Err(Error::Parse {
                line: line_number,
                column: col,
                message: "feature indices are 1-based".into(),
            });
        }
        let value: f64 = value_str.parse().map_err(|_| Error::Parse {
            line: line_number,
            column: col + index_str.len() + 1,
            message: format!("invalid feature value {value_str:?}"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line: line_number,
                column: col + index_str.len() + 1,
                message: format!("non-finite feature value {value_str:?}"),
            });
        }
        max_index = max_index.max(index - 1);
        pairs.push((index - 1, value));
    }
    let dim = if pairs.is_empty() { 0 } else { max_index + 1 };
    let features = SparseVector::from_pairs(dim, pairs)?;
    Ok(Some(Sample::new(features, label)))
}

/// Whitespace tokenizer that remembers 1-based byte columns.
fn tokenize(s: &str) -> impl Iterator<Item = (usize, &str)> {
    let bytes = s.as_bytes();
    let mut pos = 0usize;
    std::iter::from_fn(move || {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return None;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        Some((start + 1, &s[start..pos]))
    })
}

/// Renders a sample back to libsvm text (1-based indices).
pub fn format_libsvm(sample: &Sample) -> String {
    let mut out = String::new();
    let _ = write!(out, "{}", sample.label);
    for &(index, value) in sample.features.entries() {
        let _ = write!(out, " {}:{}", index + 1, value);
    }
    out
}

/// Streaming reader over a libsvm file; yields one `Sample` per data line.
pub struct LibsvmReader<R> {
    reader: R,
    line_number: usize,
    buf: String,
}

impl<R: BufRead> LibsvmReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            line_number: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for LibsvmReader<R> {
    type Item = Result<Sample>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_number += 1;
            match parse_libsvm_line(&self.buf, self.line_number) {
                Ok(Some(sample)) => return Some(Ok(sample)),
                Ok(None) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Opens a libsvm file, transparently decompressing `.gz`.
pub fn open_libsvm(path: &Path) -> Result<LibsvmReader<Box<dyn BufRead + Send>>> {
    let file = File::open(path)?;
    let reader: Box<dyn BufRead + Send> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    Ok(LibsvmReader::new(reader))
}

/// How raw labels become trainer labels.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMap {
    /// Unchanged (regression).
    #[default]
    Passthrough,
    /// Raw labels in `positive` become +1. With `negative` absent every other
    /// label becomes -1; with it present, labels outside both lists are a
    /// data error.
    Binary {
        positive: Vec<f64>,
        #[serde(default)]
        negative: Option<Vec<f64>>,
    },
}

impl LabelMap {
    pub fn is_binary(&self) -> bool {
        matches!(self, LabelMap::Binary { .. })
    }

    pub fn map(&self, raw: f64) -> Result<f64> {
        match self {
            LabelMap::Passthrough => Ok(raw),
            LabelMap::Binary { positive, negative } => {
                if positive.is_empty() {
                    return Err(Error::Data("empty label mapping in binary mode".into()));
                }
                if positive.contains(&raw) {
                    Ok(1.0)
                } else {
                    match negative {
                        None => Ok(-1.0),
                        Some(neg) if neg.contains(&raw) => Ok(-1.0),
                        Some(_) => Err(Error::Data(format!("unmapped label {raw}"))),
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Binary,
    Real,
}

/// Per-class tallies produced while relabeling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub positive: u64,
    pub negative: u64,
}

/// Stream adapter that applies a [`LabelMap`] and counts the classes seen.
pub struct RelabeledStream<I> {
    inner: I,
    map: LabelMap,
    counts: LabelCounts,
}

impl<I: Iterator<Item = Result<Sample>>> RelabeledStream<I> {
    pub fn new(inner: I, map: LabelMap) -> Self {
        Self {
            inner,
            map,
            counts: LabelCounts::default(),
        }
    }

    pub fn counts(&self) -> LabelCounts {
        self.counts
    }
}

impl<I: Iterator<Item = Result<Sample>>> Iterator for RelabeledStream<I> {
    type Item = Result<Sample>;

    fn next(&mut self) -> Option<Self::Item> {
        let sample = match self.inner.next()? {
            Ok(s) => s,
            Err(e) => return Some(Err(e)),
        };
        match self.map.map(sample.label) {
            Ok(label) => {
                if label > 0.0 {
                    self.counts.positive += 1;
                } else {
                    self.counts.negative += 1;
                }
                Some(Ok(Sample::new(sample.features, label)))
            }
            Err(e) => Some(Err(e)),
        }
    }
}

/// Relabels a stream; class counts are readable from the adapter afterwards.
pub fn normalize_labels<I: Iterator<Item = Result<Sample>>>(
    stream: I,
    map: LabelMap,
) -> RelabeledStream<I> {
    RelabeledStream::new(stream, map)
}

/// Max ‖x‖² over the first `prefix` samples. The buffered prefix is chained
/// back in front of the remainder, so the returned stream still delivers
/// every sample exactly once.
pub fn estimate_max_sq_norm<I: Iterator<Item = Result<Sample>>>(
    mut stream: I,
    prefix: usize,
) -> Result<(f64, impl Iterator<Item = Result<Sample>>)> {
    let mut buffered = Vec::with_capacity(prefix.min(4096));
    let mut max_sq = 0.0f64;
    while buffered.len() < prefix {
        match stream.next() {
            Some(Ok(sample)) => {
                max_sq = max_sq.max(sample.features.squared_norm());
                buffered.push(Ok(sample));
            }
            Some(Err(e)) => return Err(e),
            None => break,
        }
    }
    if buffered.is_empty() {
        return Err(Error::Data("empty stream".into()));
    }
    Ok((max_sq, buffered.into_iter().chain(stream)))
}

/// Ingestion knobs for [`prepare_stream`].
#[derive(Clone, Debug)]
pub struct IngestOptions {
    /// Fixed dimensionality; grown from the prefix when absent.
    pub declared_dim: Option<usize>,
    /// Append a constant-1 feature at the end of every sample.
    pub bias: bool,
    pub label_map: LabelMap,
    /// Prefix length for dimension growth and max-norm estimation.
    pub m_prefix: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            declared_dim: None,
            bias: false,
            label_map: LabelMap::Passthrough,
            m_prefix: 1000,
        }
    }
}

/// What the prefix scan established about a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Dimensionality delivered to the trainer (bias included).
    pub dim: usize,
    /// Known only when the source declares it (never from a plain stream).
    pub n_samples: Option<u64>,
    /// Max ‖x‖² over the estimation prefix, bias included.
    pub max_sq_norm: f64,
    pub label_kind: LabelKind,
}

/// A relabeled, dimension-checked, optionally bias-augmented sample stream.
/// The prefix consumed for estimation is replayed first; `delivered()` and
/// `counts()` report totals once the stream has been drained.
pub struct PreparedStream<I> {
    buffered: VecDeque<Sample>,
    rest: I,
    map: LabelMap,
    base_dim: usize,
    bias: bool,
    delivered: u64,
    counts: LabelCounts,
}

impl<I: Iterator<Item = Result<Sample>>> PreparedStream<I> {
    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn counts(&self) -> LabelCounts {
        self.counts
    }

    fn finish_sample(&mut self, sample: Sample) -> Result<Sample> {
        let mapped = self.map.map(sample.label)?;
        if mapped > 0.0 {
            self.counts.positive += 1;
        } else {
            self.counts.negative += 1;
        }
        let features = augment(sample.features, self.base_dim, self.bias)?;
        self.delivered += 1;
        Ok(Sample::new(features, mapped))
    }
}

fn augment(features: SparseVector, base_dim: usize, bias: bool) -> Result<SparseVector> {
    if let Some(&(index, _)) = features.entries().last() {
        if index >= base_dim {
            return Err(Error::Data(format!(
                "feature index {} exceeds resolved dimension {base_dim}",
                index + 1
            )));
        }
    }
    if bias {
        let mut pairs: Vec<(usize, f64)> = features.entries().to_vec();
        pairs.push((base_dim, 1.0));
        SparseVector::from_pairs(base_dim + 1, pairs)
    } else {
        features.with_dim(base_dim)
    }
}

impl<I: Iterator<Item = Result<Sample>>> Iterator for PreparedStream<I> {
    type Item = Result<Sample>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(sample) = self.buffered.pop_front() {
            return Some(self.finish_sample(sample));
        }
        match self.rest.next()? {
            Ok(sample) => Some(self.finish_sample(sample)),
            Err(e) => Some(Err(e)),
        }
    }
}

/// Scans a prefix to resolve the dimensionality and the max squared norm,
/// then hands back the metadata plus the full stream (prefix replayed first)
/// with labels mapped and the bias feature appended when requested.
pub fn prepare_stream<I: Iterator<Item = Result<Sample>>>(
    mut source: I,
    opts: &IngestOptions,
) -> Result<(DatasetMeta, PreparedStream<I>)> {
    let mut buffered: VecDeque<Sample> = VecDeque::new();
    let mut max_index: Option<usize> = None;
    while buffered.len() < opts.m_prefix {
        match source.next() {
            Some(Ok(sample)) => {
                if let Some(&(index, _)) = sample.features.entries().last() {
                    max_index = Some(max_index.map_or(index, |m: usize| m.max(index)));
                }
                buffered.push_back(sample);
            }
            Some(Err(e)) => return Err(e),
            None => break,
        }
    }
    if buffered.is_empty() {
        return Err(Error::Data("empty dataset".into()));
    }
    let grown = max_index.map_or(0, |m| m + 1);
    let base_dim = match opts.declared_dim {
        Some(declared) => {
            if grown > declared {
                return Err(Error::Data(format!(
                    "feature index {grown} exceeds declared dimension {declared}"
                )));
            }
            declared
        }
        None => grown,
    };
    let bias_sq = if opts.bias { 1.0 } else { 0.0 };
    let max_sq_norm = buffered
        .iter()
        .map(|s| s.features.squared_norm() + bias_sq)
        .fold(0.0f64, f64::max);
    if max_sq_norm == 0.0 {
        return Err(Error::Data(
            "estimation prefix has no nonzero features".into(),
        ));
    }
    let meta = DatasetMeta {
        dim: base_dim + opts.bias as usize,
        n_samples: None,
        max_sq_norm,
        label_kind: if opts.label_map.is_binary() {
            LabelKind::Binary
        } else {
            LabelKind::Real
        },
    };
    Ok((
        meta,
        PreparedStream {
            buffered,
            rest: source,
            map: opts.label_map.clone(),
            base_dim,
            bias: opts.bias,
            delivered: 0,
            counts: LabelCounts::default(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn parse(line: &str) -> Sample {
        parse_libsvm_line(line, 1).unwrap().unwrap()
    }

    #[test]
    fn parses_basic_line() {
        let s = parse("1 3:0.5 7:1.2");
        assert_eq!(s.label, 1.0);
        assert_eq!(s.features.entries(), &[(2, 0.5), (6, 1.2)]);
    }

    #[test]
    fn parses_label_only_line() {
        let s = parse("-1");
        assert_eq!(s.label, -1.0);
        assert!(s.features.is_empty());
    }

    #[test]
    fn parses_signed_label_and_scientific_value() {
        let s = parse("+1 1:1e-3");
        assert_eq!(s.label, 1.0);
        assert_eq!(s.features.entries(), &[(0, 0.001)]);
    }

    #[test]
    fn comments_and_blanks_skipped() {
        assert!(parse_libsvm_line("# header", 1).unwrap().is_none());
        assert!(parse_libsvm_line("   ", 2).unwrap().is_none());
        let s = parse("1 2:3 # trailing");
        assert_eq!(s.features.entries(), &[(1, 3.0)]);
    }

    #[test]
    fn malformed_tokens_report_position() {
        let err = parse_libsvm_line("1 oops", 3).unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_libsvm_line("x 1:2", 1).is_err());
        assert!(parse_libsvm_line("1 2:abc", 1).is_err());
    }

    #[test]
    fn zero_index_rejected() {
        let err = parse_libsvm_line("1 0:5", 1).unwrap_err();
        assert!(err.to_string().contains("1-based"), "{err}");
    }

    proptest! {
        // Round trip: format then reparse gives an identical sample.
        #[test]
        fn libsvm_round_trip(
            label in -3.0f64..3.0,
            pairs in proptest::collection::btree_map(0usize..50, -2.0f64..2.0, 0..12),
        ) {
            let pairs: Vec<(usize, f64)> =
                pairs.into_iter().filter(|&(_, v)| v != 0.0).collect();
            let dim = pairs.iter().map(|&(i, _)| i + 1).max().unwrap_or(0);
            let sample = Sample::new(SparseVector::from_pairs(dim, pairs).unwrap(), label);
            let text = format_libsvm(&sample);
            let reparsed = parse_libsvm_line(&text, 1).unwrap().unwrap();
            prop_assert_eq!(reparsed, sample);
        }
    }

    #[test]
    fn estimate_takes_prefix_max() {
        let samples: Vec<Result<Sample>> = [2.0f64, 5.0, 3.0]
            .iter()
            .map(|&v| {
                Ok(Sample::new(
                    SparseVector::from_pairs(1, [(0, v.sqrt())]).unwrap(),
                    1.0,
                ))
            })
            .collect();
        let (m, rest) = estimate_max_sq_norm(samples.into_iter(), 10).unwrap();
        assert!((m - 5.0).abs() < 1e-12);
        assert_eq!(rest.count(), 3); // every sample replayed
    }

    #[test]
    fn estimate_rejects_empty_stream() {
        let empty: Vec<Result<Sample>> = Vec::new();
        match estimate_max_sq_norm(empty.into_iter(), 10) {
            Err(Error::Data(_)) => {}
            Err(other) => panic!("unexpected error {other:?}"),
            Ok(_) => panic!("empty stream accepted"),
        }
    }

    #[test]
    fn label_map_cases() {
        let map = LabelMap::Binary {
            positive: vec![2.0],
            negative: None,
        };
        assert_eq!(map.map(2.0).unwrap(), 1.0);
        assert_eq!(map.map(1.0).unwrap(), -1.0);
        assert_eq!(map.map(3.0).unwrap(), -1.0);

        let strict = LabelMap::Binary {
            positive: vec![1.0],
            negative: Some(vec![0.0]),
        };
        assert!(matches!(strict.map(7.0).unwrap_err(), Error::Data(_)));

        assert_eq!(LabelMap::Passthrough.map(3.25).unwrap(), 3.25);

        let empty = LabelMap::Binary {
            positive: vec![],
            negative: None,
        };
        assert!(matches!(empty.map(1.0).unwrap_err(), Error::Data(_)));
    }

    #[test]
    fn relabeled_stream_counts_classes() {
        let samples: Vec<Result<Sample>> = [1.0f64, 2.0, 3.0]
            .iter()
            .map(|&l| Ok(Sample::new(SparseVector::empty(0), l)))
            .collect();
        let map = LabelMap::Binary {
            positive: vec![2.0],
            negative: None,
        };
        let mut stream = normalize_labels(samples.into_iter(), map);
        let labels: Vec<f64> = stream.by_ref().map(|s| s.unwrap().label).collect();
        assert_eq!(labels, vec![-1.0, 1.0, -1.0]);
        assert_eq!(
            stream.counts(),
            LabelCounts {
                positive: 1,
                negative: 2
            }
        );
    }

    fn stream_of(lines: &[&str]) -> Vec<Result<Sample>> {
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| Ok(parse_libsvm_line(l, i + 1).unwrap().unwrap()))
            .collect()
    }

    #[test]
    fn prepare_grows_dim_and_appends_bias() {
        let source = stream_of(&["1 2:1 5:2", "2 3:1"]);
        let opts = IngestOptions {
            bias: true,
            label_map: LabelMap::Binary {
                positive: vec![2.0],
                negative: None,
            },
            ..IngestOptions::default()
        };
        let (meta, stream) = prepare_stream(source.into_iter(), &opts).unwrap();
        assert_eq!(meta.dim, 6); // max index 5 -> base 5, +1 bias
        assert!((meta.max_sq_norm - 6.0).abs() < 1e-12); // 1 + 4 + bias
        assert_eq!(meta.label_kind, LabelKind::Binary);
        let samples: Vec<Sample> = stream.map(|s| s.unwrap()).collect();
        assert_eq!(samples[0].features.entries(), &[(1, 1.0), (4, 2.0), (5, 1.0)]);
        assert_eq!(samples[0].label, -1.0);
        assert_eq!(samples[1].features.entries(), &[(2, 1.0), (5, 1.0)]);
        assert_eq!(samples[1].label, 1.0);
    }

    #[test]
    fn late_oversized_index_is_a_data_error() {
        // Index beyond the prefix-resolved dimension shows up after the
        // prefix: delivery fails on that sample.
        let source = stream_of(&["1 2:1", "1 9:1"]);
        let opts = IngestOptions {
            m_prefix: 1,
            ..IngestOptions::default()
        };
        let (meta, mut stream) = prepare_stream(source.into_iter(), &opts).unwrap();
        assert_eq!(meta.dim, 2);
        assert!(stream.next().unwrap().is_ok());
        assert!(matches!(stream.next().unwrap().unwrap_err(), Error::Data(_)));
    }

    #[test]
    fn one_pass_discipline() {
        // Exactly one delivery per source line, prefix buffering included.
        let lines: Vec<String> = (0..257).map(|i| format!("1 {}:1", i % 7 + 1)).collect();
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let source = stream_of(&refs);
        let opts = IngestOptions {
            m_prefix: 100,
            ..IngestOptions::default()
        };
        let (_, mut stream) = prepare_stream(source.into_iter(), &opts).unwrap();
        let mut n = 0u64;
        for s in stream.by_ref() {
            s.unwrap();
            n += 1;
        }
        assert_eq!(n, 257);
        assert_eq!(stream.delivered(), 257);
    }

    #[test]
    fn gzip_files_are_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.libsvm.gz");
        let file = std::fs::File::create(&path).unwrap();
        let mut gz = flate2::write::GzEncoder::new(file, flate2::Compression::default());
        writeln!(gz, "1 1:0.5 3:1").unwrap();
        writeln!(gz, "-1 2:2").unwrap();
        gz.finish().unwrap();

        let samples: Vec<Sample> = open_libsvm(&path).unwrap().map(|s| s.unwrap()).collect();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].features.entries(), &[(0, 0.5), (2, 1.0)]);
        assert_eq!(samples[1].label, -1.0);
    }
}
