//! Label and feature file ingestion.
//!
//! Two label layouts are understood:
//!
//! * pipe format: `sample_id,Label1|Label2|...`, one row per sample, where the
//!   configurable no-finding token stands for the all-zero vector;
//! * columnar format: a header row naming the labels, one cell per label with
//!   values `1`, `0`, `-1` (uncertain) or blank.
//!
//! Features live in a whitespace separated text file whose first line is
//! `#dim=<D1>`.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Read, Write};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NO_FINDING: &str = "No Finding";

/// Ordered label set. The position of a label is its index everywhere else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyWire", into = "VocabularyWire")]
pub struct LabelVocabulary {
    labels: Vec<String>,
    words: Vec<Vec<String>>,
    no_finding: String,
    lookup: HashMap<String, usize>,
}

fn normalize_token(token: &str) -> String {
    token.trim().to_lowercase()
}

/// Splits a label name into lowercase word tokens on whitespace and underscores.
pub fn label_words(label: &str) -> Vec<String> {
    label
        .split(|c: char| c.is_whitespace() || c == '_')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl LabelVocabulary {
    pub fn new<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        Self::with_no_finding(labels, DEFAULT_NO_FINDING)
    }

    pub fn with_no_finding<S: AsRef<str>>(labels: &[S], no_finding: &str) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a vocabulary needs at least 2 labels, got {}",
                labels.len()
            )));
        }
        let mut lookup = HashMap::with_capacity(labels.len());
        let mut names = Vec::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            let name = label.as_ref().trim().to_string();
            if name.is_empty() {
                return Err(Error::InvalidInput(format!("label {i} is empty")));
            }
            if lookup.insert(normalize_token(&name), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate label `{name}`")));
            }
            names.push(name);
        }
        let words = names.iter().map(|l| label_words(l)).collect();
        Ok(Self {
            labels: names,
            words,
            no_finding: no_finding.trim().to_string(),
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn words(&self, index: usize) -> &[String] {
        &self.words[index]
    }

    pub fn no_finding(&self) -> &str {
        &self.no_finding
    }

    /// Case-insensitive, whitespace-trimmed lookup.
    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.lookup.get(&normalize_token(token)).copied()
    }

    fn is_no_finding(&self, token: &str) -> bool {
        normalize_token(token) == normalize_token(&self.no_finding)
    }
}

#[derive(Serialize, Deserialize)]
struct VocabularyWire {
    labels: Vec<String>,
    no_finding: String,
}

impl TryFrom<VocabularyWire> for LabelVocabulary {
    type Error = Error;

    fn try_from(w: VocabularyWire) -> Result<Self> {
        Self::with_no_finding(&w.labels, &w.no_finding)
    }
}

impl From<LabelVocabulary> for VocabularyWire {
    fn from(v: LabelVocabulary) -> Self {
        VocabularyWire {
            labels: v.labels,
            no_finding: v.no_finding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sample_id: String,
    pub labels: Vec<u8>,
}

impl LabeledSample {
    pub fn positives(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| i)
    }
}

/// Stacks sample label vectors into an `N x C` 0/1 matrix.
pub fn label_matrix(samples: &[LabeledSample], num_labels: usize) -> Array2<u8> {
    let mut m = Array2::zeros((samples.len(), num_labels));
    for (r, s) in samples.iter().enumerate() {
        for (c, &v) in s.labels.iter().enumerate().take(num_labels) {
            m[[r, c]] = v;
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub sample_id: String,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertainPolicy {
    /// `-1` cells become positives.
    #[default]
    AsPositive,
    /// `-1` cells become negatives.
    AsNegative,
}

impl std::str::FromStr for UncertainPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_positive" | "ones" | "1s" => Ok(Self::AsPositive),
            "as_negative" | "zeros" | "0s" => Ok(Self::AsNegative),
            other => Err(Error::InvalidConfig(format!("unknown uncertain policy `{other}`"))),
        }
    }
}

fn csv_reader<R: Read>(reader: R, has_headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::parse(line, err.to_string())
}

fn ensure_unique(seen: &mut HashSet<String>, id: &str, line: usize) -> Result<()> {
    if !seen.insert(id.to_string()) {
        return Err(Error::parse(line, format!("duplicate sample_id `{id}`")));
    }
    Ok(())
}

/// Parses the pipe label format. With `has_header` the first row is skipped.
pub fn parse_pipe_labels<R: Read>(
    reader: R,
    vocab: &LabelVocabulary,
    has_header: bool,
) -> Result<Vec<LabeledSample>> {
    let mut rdr = csv_reader(reader, has_header);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::parse(
                line,
                format!("expected 2 columns `sample_id,labels`, got {}", record.len()),
            ));
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(Error::parse(line, "missing sample_id"));
        }
        ensure_unique(&mut seen, id, line)?;
        let mut labels = vec![0u8; vocab.len()];
        for token in record[1].split('|').map(str::trim).filter(|t| !t.is_empty()) {
            match vocab.index_of(token) {
                Some(j) => labels[j] = 1,
                None if vocab.is_no_finding(token) => {}
                None => {
                    return Err(Error::parse(
                        line,
                        format!("unknown label token `{token}` in row `{id}`"),
                    ))
                }
            }
        }
        out.push(LabeledSample {
            sample_id: id.to_string(),
            labels,
        });
    }
    Ok(out)
}

/// Collects the label tokens of a pipe file in order of first appearance,
/// skipping the no-finding token.
pub fn infer_pipe_vocabulary<R: Read>(
    reader: R,
    has_header: bool,
    no_finding: &str,
) -> Result<Vec<String>> {
    let mut rdr = csv_reader(reader, has_header);
    let mut seen = HashSet::new();
    let mut labels = Vec::new();
    let sentinel = normalize_token(no_finding);
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        if record.len() < 2 {
            continue;
        }
        for token in record[1].split('|').map(str::trim).filter(|t| !t.is_empty()) {
            let key = normalize_token(token);
            if key != sentinel && seen.insert(key) {
                labels.push(token.to_string());
            }
        }
    }
    Ok(labels)
}

/// Writes samples in the pipe format (with a `sample_id,labels` header).
pub fn write_pipe_labels<W: Write>(
    mut writer: W,
    samples: &[LabeledSample],
    vocab: &LabelVocabulary,
) -> std::io::Result<()> {
    writeln!(writer, "sample_id,labels")?;
    for s in samples {
        let names: Vec<&str> = s.positives().map(|j| vocab.labels()[j].as_str()).collect();
        let field = if names.is_empty() {
            vocab.no_finding().to_string()
        } else {
            names.join("|")
        };
        writeln!(writer, "{},{}", s.sample_id, field)?;
    }
    Ok(())
}

/// Parses the columnar label format. The first column holds the sample id;
/// columns that are not vocabulary labels are ignored.
pub fn parse_columnar_labels<R: Read>(
    reader: R,
    vocab: &LabelVocabulary,
    policy: UncertainPolicy,
) -> Result<Vec<LabeledSample>> {
    let mut rdr = csv_reader(reader, true);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let mut columns = vec![None; vocab.len()];
    for (col, name) in header.iter().enumerate().skip(1) {
        if let Some(j) = vocab.index_of(name) {
            columns[j] = Some(col);
        }
    }
    if let Some(j) = columns.iter().position(Option::is_none) {
        return Err(Error::parse(
            1,
            format!("header lacks a column for label `{}`", vocab.labels()[j]),
        ));
    }
    let columns: Vec<usize> = columns.into_iter().flatten().collect();

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let id = record.get(0).unwrap_or("");
        if id.is_empty() {
            return Err(Error::parse(line, "missing sample_id"));
        }
        ensure_unique(&mut seen, id, line)?;
        let mut labels = vec![0u8; vocab.len()];
        for (j, &col) in columns.iter().enumerate() {
            let cell = record.get(col).unwrap_or("");
            labels[j] = match cell_value(cell) {
                Ok(None) | Ok(Some(0)) => 0,
                Ok(Some(1)) => 1,
                Ok(Some(-1)) => match policy {
                    UncertainPolicy::AsPositive => 1,
                    UncertainPolicy::AsNegative => 0,
                },
                _ => {
                    return Err(Error::parse(
                        line,
                        format!(
                            "malformed cell `{cell}` in column `{}` (row `{id}`)",
                            &header[col]
                        ),
                    ))
                }
            };
        }
        out.push(LabeledSample {
            sample_id: id.to_string(),
            labels,
        });
    }
    Ok(out)
}

/// Maps `1`, `0`, `-1` (also written as `1.0` etc.) to integers; blank is `None`.
fn cell_value(cell: &str) -> std::result::Result<Option<i8>, ()> {
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v == 1.0 => Ok(Some(1)),
        Ok(v) if v == 0.0 => Ok(Some(0)),
        Ok(v) if v == -1.0 => Ok(Some(-1)),
        _ => Err(()),
    }
}

/// Disjoint train / validation / test partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Largest-remainder apportionment of `n` items over `ratios`; ties in the
/// fractional part go to the earlier bucket.
fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let mut remaining = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        sizes[i] += 1;
        remaining -= 1;
    }
    sizes
}

/// Shuffles with a seeded ChaCha8 stream and cuts by largest-remainder rounding.
pub fn split_dataset<T: Clone>(items: &[T], ratios: [f64; 3], seed: u64) -> Result<Split<T>> {
    if items.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 samples to split, got {}",
            items.len()
        )));
    }
    if ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(Error::InvalidInput(format!("split ratios must be positive, got {ratios:?}")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "split ratios must sum to 1, got {total}"
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let [n_train, n_val, _] = apportion(items.len(), ratios);
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: pick(&order[..n_train]),
        val: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    })
}

/// Parses the feature file format, preserving file order.
pub fn load_features<R: Read>(reader: R) -> Result<Vec<FeatureRecord>> {
    let reader = std::io::BufReader::new(reader);
    let mut lines = reader.lines().enumerate();
    let dim = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::parse(1, "empty feature file, expected `#dim=<D1>` header"));
        };
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let dim: usize = line
            .strip_prefix("#dim=")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::parse(i + 1, format!("expected `#dim=<D1>` header, got `{line}`")))?;
        if dim == 0 {
            return Err(Error::parse(i + 1, "feature dimension must be at least 1"));
        }
        break dim;
    };

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() == dim {
            return Err(Error::parse(lineno, "missing sample id"));
        }
        if tokens.len() != dim + 1 {
            return Err(Error::parse(
                lineno,
                format!("expected {dim} values, got {}", tokens.len() - 1),
            ));
        }
        let id = tokens[0];
        ensure_unique(&mut seen, id, lineno)?;
        let features = tokens[1..]
            .iter()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(Error::parse(lineno, format!("non-finite value `{t}`"))),
                Err(_) => Err(Error::parse(lineno, format!("invalid number `{t}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(FeatureRecord {
            sample_id: id.to_string(),
            features,
        });
    }
    Ok(out)
}

/// Writes records in the feature file format. Values use Rust's shortest
/// round-trip representation, so reloading is lossless.
pub fn write_features<W: Write>(mut writer: W, records: &[FeatureRecord]) -> Result<()> {
    let dim = records.first().map_or(0, |r| r.features.len());
    let io = |e| Error::io("<feature writer>", e);
    writeln!(writer, "#dim={dim}").map_err(io)?;
    for r in records {
        if r.features.len() != dim {
            return Err(Error::Shape(format!(
                "record `{}` has {} features, expected {dim}",
                r.sample_id,
                r.features.len()
            )));
        }
        write!(writer, "{}", r.sample_id).map_err(io)?;
        for v in &r.features {
            write!(writer, " {v:?}").map_err(io)?;
        }
        writeln!(writer).map_err(io)?;
    }
    Ok(())
}

/// Feature vectors indexed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    ids: HashMap<String, usize>,
    matrix: Array2<f64>,
}

impl FeatureStore {
    pub fn from_records(records: &[FeatureRecord]) -> Result<Self> {
        let dim = records
            .first()
            .map(|r| r.features.len())
            .ok_or_else(|| Error::InvalidInput("no feature records".into()))?;
        let mut matrix = Array2::zeros((records.len(), dim));
        let mut ids = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != dim {
                return Err(Error::Shape(format!(
                    "record `{}` has {} features, expected {dim}",
                    r.sample_id,
                    r.features.len()
                )));
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "record `{}` has non-finite features",
                    r.sample_id
                )));
            }
            if ids.insert(r.sample_id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate sample_id `{}`", r.sample_id)));
            }
            for (c, &v) in r.features.iter().enumerate() {
                matrix[[i, c]] = v;
            }
        }
        Ok(Self { ids, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn get(&self, id: &str) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.ids.get(id).map(|&i| self.matrix.row(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> LabelVocabulary {
        LabelVocabulary::new(&["a", "b", "c"]).unwrap()
    }

    #[test]
    fn pipe_row_sets_listed_labels() {
        let vocab = LabelVocabulary::new(&["Atelectasis", "Effusion", "Mass"]).unwrap();
        let s = parse_pipe_labels("img1,Effusion|Atelectasis\n".as_bytes(), &vocab, false).unwrap();
        assert_eq!(s[0].labels, vec![1, 1, 0]);
        let s = parse_pipe_labels("img2,No Finding\n".as_bytes(), &vocab, false).unwrap();
        assert_eq!(s[0].labels, vec![0, 0, 0]);
    }

    #[test]
    fn pipe_tokens_are_case_insensitive() {
        let vocab = LabelVocabulary::new(&["Pleural_Thickening", "Mass"]).unwrap();
        let s = parse_pipe_labels("x, pleural_thickening | MASS \n".as_bytes(), &vocab, false).unwrap();
        assert_eq!(s[0].labels, vec![1, 1]);
    }

    #[test]
    fn pipe_micro_dataset() {
        let text = "sample_id,labels\nimg1,a|b\nimg2,a\nimg3,b|c\nimg4,a|b\n";
        let s = parse_pipe_labels(text.as_bytes(), &abc(), true).unwrap();
        let got: Vec<Vec<u8>> = s.iter().map(|s| s.labels.clone()).collect();
        assert_eq!(got, vec![vec![1, 1, 0], vec![1, 0, 0], vec![0, 1, 1], vec![1, 1, 0]]);
    }

    #[test]
    fn pipe_unknown_token_names_row_and_token() {
        let err = parse_pipe_labels("img1,a\nimg2,zzz\n".as_bytes(), &abc(), false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("zzz") && msg.contains("img2") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn pipe_duplicate_id_is_fatal() {
        assert!(parse_pipe_labels("img1,a\nimg1,b\n".as_bytes(), &abc(), false).is_err());
    }

    #[test]
    fn no_finding_may_be_a_real_label() {
        let vocab = LabelVocabulary::new(&["No Finding", "Edema"]).unwrap();
        let s = parse_pipe_labels("x,No Finding\n".as_bytes(), &vocab, false).unwrap();
        assert_eq!(s[0].labels, vec![1, 0]);
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_singletons() {
        assert!(LabelVocabulary::new(&["a", "A"]).is_err());
        assert!(LabelVocabulary::new(&["a"]).is_err());
    }

    #[test]
    fn words_split_on_underscore_and_space() {
        let v = LabelVocabulary::new(&["Pleural_Thickening", "pleural effusion"]).unwrap();
        assert_eq!(v.words(0), ["pleural", "thickening"]);
        assert_eq!(v.words(1), ["pleural", "effusion"]);
    }

    #[test]
    fn columnar_policies() {
        let text = "Path,a,b,c\nx,1,-1,0\ny,,1,-1\n";
        let pos = parse_columnar_labels(text.as_bytes(), &abc(), UncertainPolicy::AsPositive).unwrap();
        assert_eq!(pos[0].labels, vec![1, 1, 0]);
        assert_eq!(pos[1].labels, vec![0, 1, 1]);
        let neg = parse_columnar_labels(text.as_bytes(), &abc(), UncertainPolicy::AsNegative).unwrap();
        assert_eq!(neg[0].labels, vec![1, 0, 0]);
        assert_eq!(neg[1].labels, vec![0, 1, 0]);
    }

    #[test]
    fn columnar_accepts_float_cells_and_extra_columns() {
        let text = "Path,Sex,c,b,a\nx,F,1.0,-1.0,0.0\n";
        let s = parse_columnar_labels(text.as_bytes(), &abc(), UncertainPolicy::AsPositive).unwrap();
        assert_eq!(s[0].labels, vec![0, 1, 1]);
    }

    #[test]
    fn columnar_malformed_cell() {
        let text = "id,a,b,c\nx,1,2,0\n";
        let err = parse_columnar_labels(text.as_bytes(), &abc(), UncertainPolicy::AsPositive).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("`b`"), "{msg}");
    }

    #[test]
    fn columnar_missing_column() {
        let text = "id,a,b\nx,1,0\n";
        assert!(parse_columnar_labels(text.as_bytes(), &abc(), UncertainPolicy::AsPositive).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let items: Vec<usize> = (0..10).collect();
        let a = split_dataset(&items, [0.7, 0.1, 0.2], 42).unwrap();
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (7, 1, 2));
        let b = split_dataset(&items, [0.7, 0.1, 0.2], 42).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort();
        assert_eq!(all, items);
    }

    #[test]
    fn split_rejects_bad_ratios_and_tiny_inputs() {
        let items: Vec<usize> = (0..10).collect();
        assert!(split_dataset(&items, [0.5, 0.5, 0.5], 0).is_err());
        assert!(split_dataset(&items, [1.0, 0.0, 0.0], 0).is_err());
        assert!(split_dataset(&items[..2], [0.7, 0.1, 0.2], 0).is_err());
    }

    #[test]
    fn apportion_uses_largest_remainder() {
        assert_eq!(apportion(3, [0.7, 0.1, 0.2]), [2, 0, 1]);
        assert_eq!(apportion(11, [0.7, 0.1, 0.2]), [8, 1, 2]);
    }

    #[test]
    fn features_parse_and_validate() {
        let recs = load_features("#dim=4\nimg1 1 2 3 4.5\n".as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].features, vec![1.0, 2.0, 3.0, 4.5]);
        assert!(load_features("#dim=2\nx 1 nan\n".as_bytes()).is_err());
        assert!(load_features("#dim=2\nx 1 2\ny 1 2 3\n".as_bytes()).is_err());
        assert!(load_features("#dim=2\n1 2\n".as_bytes()).is_err());
        assert!(load_features("x 1 2\n".as_bytes()).is_err());
    }

    #[test]
    fn features_round_trip_losslessly() {
        let recs = vec![FeatureRecord {
            sample_id: "s".into(),
            features: vec![0.1 + 0.2, -1e-300, 12345.678901234567],
        }];
        let mut buf = Vec::new();
        write_features(&mut buf, &recs).unwrap();
        assert_eq!(load_features(buf.as_slice()).unwrap(), recs);
    }
}
