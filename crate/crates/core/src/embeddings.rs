//! Label word embeddings: GloVe-style text loading, multi-word averaging and a
//! seeded synthetic stand-in.

use std::collections::HashMap;
use std::io::{BufRead, Read};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::LabelVocabulary;
use crate::rng::stable_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    duplicates: Vec<String>,
}

impl WordEmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    /// Words that appeared more than once in the source file.
    pub fn duplicates(&self) -> &[String] {
        &self.duplicates
    }
}

/// Reads `word v1 ... vD` lines. Words are lowercased; a repeated word keeps
/// its last vector.
pub fn load_word_vectors<R: Read>(reader: R) -> Result<WordEmbeddingTable> {
    let reader = std::io::BufReader::new(reader);
    let mut dim = None;
    let mut entries: HashMap<String, Vec<f64>> = HashMap::new();
    let mut duplicates = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values = parts
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(lineno, format!("invalid or non-finite value `{t}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::parse(lineno, format!("word `{word}` has no vector")));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::parse(
                    lineno,
                    format!("word `{word}` has dimension {}, expected {d}", values.len()),
                ))
            }
            Some(_) => {}
        }
        let key = word.to_lowercase();
        if entries.insert(key.clone(), values).is_some() {
            log::warn!("duplicate word vector for `{key}` on line {lineno}; keeping the last one");
            duplicates.push(key);
        }
    }
    let dim = dim.ok_or_else(|| Error::parse(1, "empty word vector file"))?;
    Ok(WordEmbeddingTable {
        dim,
        entries,
        duplicates,
    })
}

fn synthetic_vector(key: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(&[key.as_bytes(), &(dim as u64).to_le_bytes(), &seed.to_le_bytes()]));
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Builds the `C x D2` matrix whose row `j` is the mean of label `j`'s word
/// vectors. With `fallback_seed` set, missing words get a synthetic vector.
pub fn embed_labels(
    vocab: &LabelVocabulary,
    table: &WordEmbeddingTable,
    fallback_seed: Option<u64>,
) -> Result<Array2<f64>> {
    let dim = table.dim();
    let mut w = Array2::zeros((vocab.len(), dim));
    for j in 0..vocab.len() {
        let words = vocab.words(j);
        for word in words {
            let owned;
            let v = match (table.get(word), fallback_seed) {
                (Some(v), _) => v,
                (None, Some(seed)) => {
                    log::warn!("word `{word}` missing from embeddings; using a synthetic vector");
                    owned = synthetic_vector(word, dim, seed);
                    &owned
                }
                (None, None) => {
                    return Err(Error::InvalidInput(format!(
                        "word `{word}` of label `{}` is missing from the embedding table",
                        vocab.labels()[j]
                    )))
                }
            };
            for (dst, &src) in w.row_mut(j).iter_mut().zip(v) {
                *dst += src;
            }
        }
        let n = words.len() as f64;
        w.row_mut(j).mapv_inplace(|x| x / n);
    }
    Ok(w)
}

/// Deterministic per `(label name, dim, seed)`, entries uniform in `[-1, 1]`.
pub fn synthetic_embeddings(vocab: &LabelVocabulary, dim: usize, seed: u64) -> Result<Array2<f64>> {
    if dim == 0 {
        return Err(Error::InvalidConfig("embedding dimension must be at least 1".into()));
    }
    let mut w = Array2::zeros((vocab.len(), dim));
    for (j, label) in vocab.labels().iter().enumerate() {
        let v = synthetic_vector(label, dim, seed);
        w.row_mut(j).assign(&ndarray::ArrayView1::from(&v));
    }
    Ok(w)
}
