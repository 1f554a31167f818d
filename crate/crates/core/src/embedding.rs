//! Vocabularies and skip-gram word embeddings.
//!
//! Each side (job, resume) gets its own vocabulary and embedding table.
//! Tables are trained once with skip-gram + negative sampling and frozen:
//! the matching model never updates them. Id 0 is the out-of-vocabulary /
//! padding slot and its vector is pinned to zero.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::data::Side;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Reserved id for out-of-vocabulary and padding tokens.
pub const OOV_ID: u32 = 0;

/// Dense token ids `0..len()`, id 0 reserved for OOV/padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    /// Id -> token; slot 0 holds the empty string (never a real token,
    /// empty tokens are rejected at corpus load).
    tokens: Vec<String>,
    /// Id -> corpus frequency; slot 0 counts occurrences mapped to OOV.
    freqs: Vec<u64>,
    min_count: u64,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Counts tokens over the corpus and keeps those with frequency at
    /// least `min_count`. Ids are assigned by descending frequency, ties by
    /// token order, starting at 1.
    pub fn build(corpus: &[Vec<String>], min_count: u64) -> Result<Self> {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut total = 0u64;
        for sentence in corpus {
            for token in sentence {
                *counts.entry(token.as_str()).or_insert(0) += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::EmptyCorpus);
        }
        let mut kept: Vec<(&str, u64)> = counts
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(&t, &c)| (t, c))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));

        let dropped: u64 = counts
            .values()
            .filter(|&&c| c < min_count)
            .sum();

        let mut tokens = Vec::with_capacity(kept.len() + 1);
        let mut freqs = Vec::with_capacity(kept.len() + 1);
        tokens.push(String::new());
        freqs.push(dropped);
        for (t, c) in kept {
            tokens.push(t.to_string());
            freqs.push(c);
        }
        Self::from_parts(tokens, freqs, min_count)
    }

    /// Reassembles a vocabulary from its serialized parts.
    pub fn from_parts(tokens: Vec<String>, freqs: Vec<u64>, min_count: u64) -> Result<Self> {
        if tokens.is_empty() || tokens.len() != freqs.len() || !tokens[0].is_empty() {
            return Err(Error::Contract(
                "vocabulary parts: need equal-length token/freq lists with an OOV slot 0".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate().skip(1) {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::DuplicateId(format!("vocabulary token '{t}'")));
            }
        }
        Ok(Vocabulary {
            tokens,
            freqs,
            min_count,
            index,
        })
    }

    /// Token id, or [`OOV_ID`] for unknown tokens.
    pub fn lookup(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    /// Total number of ids, including the OOV slot.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn freq(&self, id: u32) -> u64 {
        self.freqs[id as usize]
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freqs
    }
}

/// Frozen word vectors for one side: `vectors` is `[len(vocab), dim]`,
/// row 0 all-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub side: Side,
    pub dim: usize,
    pub vectors: Tensor,
}

impl EmbeddingTable {
    pub fn vector(&self, id: u32) -> &[f32] {
        let d = self.dim;
        &self.vectors.data()[id as usize * d..(id as usize + 1) * d]
    }

    pub fn vocab_size(&self) -> usize {
        self.vectors.shape()[0]
    }
}

/// Skip-gram hyper-parameters. Dimensions default to 256 for the job side
/// and 64 for the resume side; see [`SkipGramConfig::for_side`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f32,
    pub seed: u64,
}

impl SkipGramConfig {
    pub fn for_side(side: Side) -> Self {
        SkipGramConfig {
            dim: match side {
                Side::Job => 256,
                Side::Resume => 64,
            },
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 1,
        }
    }
}

/// Trains skip-gram with negative sampling (unigram^0.75 noise) over the
/// corpus sentences. Deterministic per seed; the learning rate decays
/// linearly over all center positions. Row 0 of the result is zero.
pub fn train_skipgram(
    corpus: &[Vec<String>],
    vocab: &Vocabulary,
    side: Side,
    config: &SkipGramConfig,
) -> Result<EmbeddingTable> {
    if config.dim == 0 || config.window == 0 {
        return Err(Error::Config(format!(
            "skip-gram needs dim >= 1 and window >= 1, got dim {} window {}",
            config.dim, config.window
        )));
    }
    let sampleable = vocab.len() - 1;
    if sampleable < config.negatives + 1 {
        return Err(Error::InsufficientVocabulary {
            have: sampleable,
            need: config.negatives + 1,
        });
    }

    let dim = config.dim;
    let v = vocab.len();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);

    // OOV tokens are dropped from the training stream.
    let sentences: Vec<Vec<u32>> = corpus
        .iter()
        .map(|s| {
            s.iter()
                .map(|t| vocab.lookup(t))
                .filter(|&id| id != OOV_ID)
                .collect()
        })
        .collect();

    // Unigram^0.75 cumulative table over real token ids.
    let mut noise_cdf = Vec::with_capacity(v - 1);
    let mut acc = 0.0f64;
    for id in 1..v {
        acc += (vocab.freq(id as u32) as f64).powf(0.75);
        noise_cdf.push(acc);
    }
    let noise_total = acc;

    let mut input = vec![0.0f32; v * dim];
    for x in input.iter_mut() {
        *x = (rng.random_range(0.0..1.0f32) - 0.5) / dim as f32;
    }
    let mut output = vec![0.0f32; v * dim];

    let centers_per_epoch: usize = sentences.iter().map(|s| s.len()).sum();
    let total_steps = (centers_per_epoch * config.epochs).max(1);
    let mut processed = 0usize;
    let mut delta = vec![0.0f32; dim];

    for _ in 0..config.epochs {
        for sentence in &sentences {
            for (t, &center) in sentence.iter().enumerate() {
                let alpha = {
                    let frac = processed as f32 / total_steps as f32;
                    (config.lr * (1.0 - frac)).max(config.lr * 1e-4)
                };
                processed += 1;
                // Dynamic window, as in the reference skip-gram trainer.
                let span = config.window - rng.random_range(0..config.window);
                let lo = t.saturating_sub(span);
                let hi = (t + span).min(sentence.len() - 1);
                for c in lo..=hi {
                    if c == t {
                        continue;
                    }
                    let context = sentence[c];
                    delta.fill(0.0);
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0f32)
                        } else {
                            let r = rng.random_range(0.0..noise_total);
                            let pos = noise_cdf.partition_point(|&c| c < r);
                            let id = (pos + 1) as u32;
                            if id == context {
                                continue;
                            }
                            (id, 0.0f32)
                        };
                        let in_row = &input[center as usize * dim..(center as usize + 1) * dim];
                        let out_row =
                            &mut output[target as usize * dim..(target as usize + 1) * dim];
                        let mut f = 0.0f32;
                        for i in 0..dim {
                            f += in_row[i] * out_row[i];
                        }
                        let g = (label - sigmoid(f)) * alpha;
                        for i in 0..dim {
                            delta[i] += g * out_row[i];
                            out_row[i] += g * in_row[i];
                        }
                    }
                    let in_row = &mut input[center as usize * dim..(center as usize + 1) * dim];
                    for i in 0..dim {
                        in_row[i] += delta[i];
                    }
                }
            }
        }
    }

    input[..dim].fill(0.0);
    Ok(EmbeddingTable {
        side,
        dim,
        vectors: Tensor::new(vec![v, dim], input)?,
    })
}

fn sigmoid(x: f32) -> f32 {
    if x > 8.0 {
        1.0
    } else if x < -8.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Builds the `[dim, |S|]` item matrix whose column `j` is the vector of
/// token `j`. Unknown tokens contribute a zero column.
pub fn embed_item(tokens: &[String], vocab: &Vocabulary, table: &EmbeddingTable) -> Result<Tensor> {
    if tokens.is_empty() {
        return Err(Error::Contract("embed_item: empty token list".into()));
    }
    let (d, n) = (table.dim, tokens.len());
    let mut data = vec![0.0f32; d * n];
    for (j, token) in tokens.iter().enumerate() {
        let vec = table.vector(vocab.lookup(token));
        for (r, &v) in vec.iter().enumerate() {
            data[r * n + j] = v;
        }
    }
    Tensor::new(vec![d, n], data)
}

/// Cosine similarity of two equal-length slices; 0 when either norm is 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        dot += *x as f64 * *y as f64;
        na += *x as f64 * *x as f64;
        nb += *y as f64 * *y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na.sqrt() * nb.sqrt())) as f32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(rows: &[&[&str]]) -> Vec<Vec<String>> {
        rows.iter()
            .map(|r| r.iter().map(|t| t.to_string()).collect())
            .collect()
    }

    #[test]
    fn min_count_filters_rare_tokens() {
        let corpus = sentences(&[&["a", "a", "b"]]);
        let vocab = Vocabulary::build(&corpus, 2).unwrap();
        assert!(vocab.contains("a"));
        assert!(!vocab.contains("b"));
        assert_eq!(vocab.lookup("b"), OOV_ID);
        assert_eq!(vocab.lookup("never-seen"), OOV_ID);
    }

    #[test]
    fn min_count_one_keeps_every_token() {
        let corpus = sentences(&[&["x", "y"], &["z"]]);
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        for t in ["x", "y", "z"] {
            assert!(vocab.contains(t));
        }
        assert_eq!(vocab.len(), 4); // 3 tokens + OOV slot
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            Vocabulary::build(&[], 1).unwrap_err(),
            Error::EmptyCorpus
        ));
    }

    #[test]
    fn ids_are_dense_and_frequency_ordered() {
        let corpus = sentences(&[&["c", "b", "b", "a", "a", "a"]]);
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        assert_eq!(vocab.lookup("a"), 1);
        assert_eq!(vocab.lookup("b"), 2);
        assert_eq!(vocab.lookup("c"), 3);
        assert_eq!(vocab.freq(1), 3);
    }

    fn toy_table(vocab: &Vocabulary, dim: usize) -> EmbeddingTable {
        // Distinct nonzero vector per real token.
        let v = vocab.len();
        let mut data = vec![0.0f32; v * dim];
        for id in 1..v {
            for d in 0..dim {
                data[id * dim + d] = id as f32 + d as f32 / 10.0;
            }
        }
        EmbeddingTable {
            side: Side::Job,
            dim,
            vectors: Tensor::new(vec![v, dim], data).unwrap(),
        }
    }

    #[test]
    fn embed_item_columns_follow_token_order() {
        let corpus = sentences(&[&["a", "b", "c", "d", "e"]]);
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let table = toy_table(&vocab, 3);
        let tokens: Vec<String> = ["a", "b", "c", "d", "e"]
            .iter()
            .map(|t| t.to_string())
            .collect();
        let m = embed_item(&tokens, &vocab, &table).unwrap();
        assert_eq!(m.shape(), &[3, 5]);
        for (j, t) in tokens.iter().enumerate() {
            let expect = table.vector(vocab.lookup(t));
            for r in 0..3 {
                assert_eq!(m.data()[r * 5 + j], expect[r]);
            }
        }
    }

    #[test]
    fn embed_item_oov_gives_zero_columns() {
        let corpus = sentences(&[&["a"]]);
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let table = toy_table(&vocab, 2);
        let tokens: Vec<String> = vec!["zzz".into(), "qqq".into()];
        let m = embed_item(&tokens, &vocab, &table).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embed_item_duplicate_tokens_duplicate_columns() {
        let corpus = sentences(&[&["a", "b"]]);
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let table = toy_table(&vocab, 2);
        let tokens: Vec<String> = vec!["a".into(), "a".into()];
        let m = embed_item(&tokens, &vocab, &table).unwrap();
        assert_eq!(m.data()[0], m.data()[1]);
        assert_eq!(m.data()[2], m.data()[3]);
    }

    fn cluster_corpus() -> Vec<Vec<String>> {
        // Two disjoint five-token topics; sentences never mix them.
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let mut corpus = Vec::new();
        for s in 0..300 {
            let prefix = if s % 2 == 0 { "a" } else { "b" };
            let sentence: Vec<String> = (0..8)
                .map(|_| format!("{prefix}{}", rng.random_range(0..5)))
                .collect();
            corpus.push(sentence);
        }
        corpus
    }

    #[test]
    fn skipgram_same_seed_same_table() {
        let corpus = cluster_corpus();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let config = SkipGramConfig {
            dim: 16,
            epochs: 1,
            ..SkipGramConfig::for_side(Side::Resume)
        };
        let a = train_skipgram(&corpus, &vocab, Side::Resume, &config).unwrap();
        let b = train_skipgram(&corpus, &vocab, Side::Resume, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.vectors.shape(), &[vocab.len(), 16]);
        assert!(a.vector(OOV_ID).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn skipgram_separates_disjoint_topic_clusters() {
        let corpus = cluster_corpus();
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let config = SkipGramConfig {
            dim: 16,
            window: 4,
            negatives: 5,
            epochs: 8,
            lr: 0.05,
            seed: 5,
        };
        let table = train_skipgram(&corpus, &vocab, Side::Resume, &config).unwrap();

        let ids = |prefix: &str| -> Vec<u32> {
            (0..5).map(|i| vocab.lookup(&format!("{prefix}{i}"))).collect()
        };
        let (a_ids, b_ids) = (ids("a"), ids("b"));
        let mean_cos = |xs: &[u32], ys: &[u32], skip_same: bool| -> f64 {
            let mut total = 0.0f64;
            let mut n = 0usize;
            for &x in xs {
                for &y in ys {
                    if skip_same && x == y {
                        continue;
                    }
                    total += cosine(table.vector(x), table.vector(y)) as f64;
                    n += 1;
                }
            }
            total / n as f64
        };
        let intra = (mean_cos(&a_ids, &a_ids, true) + mean_cos(&b_ids, &b_ids, true)) / 2.0;
        let cross = mean_cos(&a_ids, &b_ids, false);
        assert!(
            intra - cross > 0.1,
            "intra {intra:.3} vs cross {cross:.3}: margin too small"
        );
    }

    #[test]
    fn skipgram_rejects_tiny_vocabulary() {
        let corpus = sentences(&[&["a", "b", "a", "b"]]);
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let config = SkipGramConfig {
            dim: 4,
            negatives: 5,
            ..SkipGramConfig::for_side(Side::Job)
        };
        assert!(matches!(
            train_skipgram(&corpus, &vocab, Side::Job, &config).unwrap_err(),
            Error::InsufficientVocabulary { have: 2, need: 6 }
        ));
    }
}
