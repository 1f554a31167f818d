//! Corpus ingestion, dataset splits, and the synthetic corpus generator.
//!
//! Corpora are three JSONL files (jobs, resumes, applications), one record
//! per line, UTF-8, tokens pre-split by the producer. The synthetic
//! generator emits the same shape so every experiment is reproducible at
//! desk scale.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which tower a document belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Job,
    Resume,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Job => write!(f, "job"),
            Side::Resume => write!(f, "resume"),
        }
    }
}

/// Job category: Technology, Product, User interface/experience, Others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    T,
    P,
    U,
    O,
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Category::T => write!(f, "T"),
            Category::P => write!(f, "P"),
            Category::U => write!(f, "U"),
            Category::O => write!(f, "O"),
        }
    }
}

/// Application outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Success,
    Failure,
}

/// One job posting or resume as stored on disk: an ordered list of items,
/// each a list of tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub side: Side,
    pub category: Category,
    pub year: i32,
    pub items: Vec<Vec<String>>,
}

/// One (job, resume, label) application record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApplicationRecord {
    pub job_id: String,
    pub resume_id: String,
    pub label: Label,
    pub year: i32,
}

impl ApplicationRecord {
    pub fn is_positive(&self) -> bool {
        self.label == Label::Success
    }
}

/// A validated corpus: documents by side plus application records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    jobs: Vec<RawDocument>,
    resumes: Vec<RawDocument>,
    job_index: HashMap<String, usize>,
    resume_index: HashMap<String, usize>,
    pub applications: Vec<ApplicationRecord>,
}

impl Dataset {
    pub fn new(
        jobs: Vec<RawDocument>,
        resumes: Vec<RawDocument>,
        applications: Vec<ApplicationRecord>,
    ) -> Result<Self> {
        let job_index = index_documents(&jobs, Side::Job)?;
        let resume_index = index_documents(&resumes, Side::Resume)?;
        let mut seen = HashSet::new();
        for app in &applications {
            if !job_index.contains_key(&app.job_id) {
                return Err(Error::ReferentialIntegrity(format!(
                    "application references unknown job id '{}'",
                    app.job_id
                )));
            }
            if !resume_index.contains_key(&app.resume_id) {
                return Err(Error::ReferentialIntegrity(format!(
                    "application references unknown resume id '{}'",
                    app.resume_id
                )));
            }
            if !seen.insert((app.job_id.clone(), app.resume_id.clone(), app.label)) {
                return Err(Error::DuplicateId(format!(
                    "duplicate application ({}, {}, {:?})",
                    app.job_id, app.resume_id, app.label
                )));
            }
        }
        Ok(Dataset {
            jobs,
            resumes,
            job_index,
            resume_index,
            applications,
        })
    }

    pub fn jobs(&self) -> &[RawDocument] {
        &self.jobs
    }

    pub fn resumes(&self) -> &[RawDocument] {
        &self.resumes
    }

    pub fn job(&self, id: &str) -> Option<&RawDocument> {
        self.job_index.get(id).map(|&i| &self.jobs[i])
    }

    pub fn resume(&self, id: &str) -> Option<&RawDocument> {
        self.resume_index.get(id).map(|&i| &self.resumes[i])
    }

    pub fn job_ids(&self) -> Vec<String> {
        self.jobs.iter().map(|d| d.id.clone()).collect()
    }

    /// All token sequences (items) of one side, in document order.
    pub fn side_sentences(&self, side: Side) -> Vec<Vec<String>> {
        let docs = match side {
            Side::Job => &self.jobs,
            Side::Resume => &self.resumes,
        };
        docs.iter().flat_map(|d| d.items.iter().cloned()).collect()
    }
}

fn index_documents(docs: &[RawDocument], side: Side) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(docs.len());
    for (i, doc) in docs.iter().enumerate() {
        validate_document(doc, side, None)?;
        if index.insert(doc.id.clone(), i).is_some() {
            return Err(Error::DuplicateId(format!("{} '{}'", side, doc.id)));
        }
    }
    Ok(index)
}

fn validate_document(doc: &RawDocument, expected_side: Side, line: Option<usize>) -> Result<()> {
    let at = |msg: String| match line {
        Some(l) => Error::Parse { line: l, msg },
        None => Error::EmptyDocument(msg),
    };
    if doc.side != expected_side {
        return Err(Error::ReferentialIntegrity(format!(
            "document '{}' has side {} but was loaded as a {}",
            doc.id, doc.side, expected_side
        )));
    }
    if doc.items.is_empty() {
        return Err(at(format!("document '{}' has no items", doc.id)));
    }
    for (i, item) in doc.items.iter().enumerate() {
        if item.is_empty() {
            return Err(at(format!("document '{}' item {} has no tokens", doc.id, i)));
        }
        if item.iter().any(|t| t.is_empty()) {
            return Err(at(format!(
                "document '{}' item {} contains an empty token",
                doc.id, i
            )));
        }
    }
    Ok(())
}

fn load_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.split(b'\n').enumerate() {
        let lineno = i + 1;
        let bytes = line?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("invalid UTF-8: {e}"),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("{e} (column {})", e.column()),
        })?;
        out.push((lineno, record));
    }
    Ok(out)
}

/// Loads and validates a corpus from three JSONL files.
///
/// Rejects duplicate ids, dangling application references, and empty
/// documents/items with line-referenced diagnostics.
pub fn load_corpus(
    jobs_path: &Path,
    resumes_path: &Path,
    applications_path: &Path,
) -> Result<Dataset> {
    let jobs_raw = load_jsonl::<RawDocument>(jobs_path)?;
    let resumes_raw = load_jsonl::<RawDocument>(resumes_path)?;
    let apps_raw = load_jsonl::<ApplicationRecord>(applications_path)?;

    for (line, doc) in &jobs_raw {
        validate_document(doc, Side::Job, Some(*line))?;
    }
    for (line, doc) in &resumes_raw {
        validate_document(doc, Side::Resume, Some(*line))?;
    }

    let jobs: Vec<RawDocument> = jobs_raw.into_iter().map(|(_, d)| d).collect();
    let resumes: Vec<RawDocument> = resumes_raw.into_iter().map(|(_, d)| d).collect();
    let applications: Vec<ApplicationRecord> = apps_raw.into_iter().map(|(_, a)| a).collect();
    Dataset::new(jobs, resumes, applications)
}

/// Writes a dataset back out as three JSONL files inside `dir`.
pub fn write_corpus(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_jsonl(&dir.join("jobs.jsonl"), dataset.jobs())?;
    write_jsonl(&dir.join("resumes.jsonl"), dataset.resumes())?;
    write_jsonl(&dir.join("applications.jsonl"), &dataset.applications)?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// How [`split`] assigns records to partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitBy {
    Random,
    Year,
}

/// Partitions application records into train/valid/test.
///
/// Random mode shuffles once with the seed; year mode groups records by
/// year and applies the fractions within each year. Fractions apply to
/// counts as `floor(n * frac)` for train and valid, remainder to test.
pub fn split(
    records: &[ApplicationRecord],
    train_frac: f64,
    valid_frac: f64,
    by: SplitBy,
    seed: u64,
) -> Result<(
    Vec<ApplicationRecord>,
    Vec<ApplicationRecord>,
    Vec<ApplicationRecord>,
)> {
    if !(train_frac > 0.0 && valid_frac > 0.0 && train_frac + valid_frac <= 1.0) {
        return Err(Error::Config(format!(
            "split fractions must be positive and sum to at most 1, got {train_frac} + {valid_frac}"
        )));
    }
    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();

    let mut groups: Vec<Vec<ApplicationRecord>> = match by {
        SplitBy::Random => vec![records.to_vec()],
        SplitBy::Year => {
            let mut by_year: std::collections::BTreeMap<i32, Vec<ApplicationRecord>> =
                Default::default();
            for r in records {
                by_year.entry(r.year).or_default().push(r.clone());
            }
            by_year.into_values().collect()
        }
    };

    for (gi, group) in groups.iter_mut().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, gi as u64));
        group.shuffle(&mut rng);
        let n = group.len();
        let n_train = (n as f64 * train_frac).floor() as usize;
        let n_valid = (n as f64 * valid_frac).floor() as usize;
        train.extend_from_slice(&group[..n_train]);
        valid.extend_from_slice(&group[n_train..n_train + n_valid]);
        test.extend_from_slice(&group[n_train + n_valid..]);
    }

    for (name, part) in [("train", &train), ("valid", &valid), ("test", &test)] {
        if part.is_empty() {
            return Err(Error::UnderfullSplit(format!(
                "{name} split received zero records (input size {})",
                records.len()
            )));
        }
    }
    Ok((train, valid, test))
}

/// Splitmix-style seed derivation so independent phases draw from
/// independent, platform-stable streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(tag.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Configuration of the synthetic corpus generator.
///
/// Each document owns a small set of topics. Requirement items are pure
/// (all tokens from one of the job's topics); experience items mix the
/// resume's topics and add `topic_mixture_noise` off-topic tokens.
/// Successful applications pair documents with identical topic sets;
/// failed ones pair disjoint sets, except that a `failure_noise` fraction
/// of failures are good fits mislabeled as failures (candidates rejected
/// for reasons unrelated to fit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_topics: usize,
    pub vocab_per_topic: usize,
    pub n_jobs: usize,
    pub n_resumes: usize,
    pub topics_per_doc: usize,
    pub items_per_doc: (usize, usize),
    pub tokens_per_item: (usize, usize),
    pub topic_mixture_noise: f32,
    pub positive_rate: f32,
    pub applications_per_resume: usize,
    pub failure_noise: f32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_topics: 8,
            vocab_per_topic: 40,
            n_jobs: 400,
            n_resumes: 800,
            topics_per_doc: 2,
            items_per_doc: (2, 5),
            tokens_per_item: (4, 12),
            topic_mixture_noise: 0.1,
            positive_rate: 0.5,
            applications_per_resume: 5,
            failure_noise: 0.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts_ok = self.n_topics >= 1
            && self.vocab_per_topic >= 1
            && self.n_jobs >= 1
            && self.n_resumes >= 1
            && self.topics_per_doc >= 1
            && self.applications_per_resume >= 1
            && self.items_per_doc.0 >= 1
            && self.items_per_doc.0 <= self.items_per_doc.1
            && self.tokens_per_item.0 >= 1
            && self.tokens_per_item.0 <= self.tokens_per_item.1;
        if !counts_ok {
            return Err(Error::Config(
                "synth: all counts must be >= 1 and ranges ordered".into(),
            ));
        }
        for (name, rate) in [
            ("topic_mixture_noise", self.topic_mixture_noise),
            ("positive_rate", self.positive_rate),
            ("failure_noise", self.failure_noise),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!(
                    "synth: {name} must be in [0, 1], got {rate}"
                )));
            }
        }
        if self.topics_per_doc > self.n_topics {
            return Err(Error::Config(format!(
                "synth: {} topics per document requested but only {} topics exist",
                self.topics_per_doc, self.n_topics
            )));
        }
        // Failed applications need a disjoint topic set to pair against.
        if self.n_topics < 2 * self.topics_per_doc {
            return Err(Error::Config(format!(
                "synth: need at least {} topics for disjoint failure pairs, got {}",
                2 * self.topics_per_doc,
                self.n_topics
            )));
        }
        Ok(())
    }

    /// Token vocabulary of one topic: `t<i>_w<j>` for all `j`.
    pub fn topic_vocabulary(&self, topic: usize) -> Vec<String> {
        (0..self.vocab_per_topic)
            .map(|w| format!("t{topic}_w{w}"))
            .collect()
    }
}

/// Topic sets of the generated documents, for tests and the keyword
/// acceptance check.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrace {
    pub job_topics: HashMap<String, Vec<usize>>,
    pub resume_topics: HashMap<String, Vec<usize>>,
}

/// Generates a synthetic dataset; deterministic per seed.
pub fn synth_generate(config: &SynthConfig) -> Result<Dataset> {
    synth_generate_traced(config).map(|(d, _)| d)
}

/// [`synth_generate`] plus the topic assignment trace.
///
/// Independent rng streams per phase keep document content stable when only
/// application-level knobs (e.g. `failure_noise`) change.
pub fn synth_generate_traced(config: &SynthConfig) -> Result<(Dataset, SynthTrace)> {
    config.validate()?;
    let mut doc_rng = ChaCha20Rng::seed_from_u64(derive_seed(config.seed, 1));
    let mut pos_rng = ChaCha20Rng::seed_from_u64(derive_seed(config.seed, 2));
    let mut fail_rng = ChaCha20Rng::seed_from_u64(derive_seed(config.seed, 3));

    let all_topics: Vec<usize> = (0..config.n_topics).collect();

    // Jobs: topic set, then one pure item per topic round-robin.
    let mut jobs = Vec::with_capacity(config.n_jobs);
    let mut job_topics = HashMap::new();
    let mut jobs_by_topicset: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for j in 0..config.n_jobs {
        let topics = sample_topic_set(&all_topics, config.topics_per_doc, &mut doc_rng);
        let id = format!("job-{j:05}");
        let doc = synth_document(&id, Side::Job, &topics, config, &mut doc_rng);
        jobs_by_topicset.entry(topics.clone()).or_default().push(j);
        job_topics.insert(id, topics);
        jobs.push(doc);
    }

    // Resumes adopt the topic set of a random job so every resume has
    // matching jobs to apply to.
    let mut resumes = Vec::with_capacity(config.n_resumes);
    let mut resume_topics = HashMap::new();
    for r in 0..config.n_resumes {
        let donor = &jobs[doc_rng.random_range(0..jobs.len())];
        let topics = job_topics[&donor.id].clone();
        let id = format!("resume-{r:05}");
        let doc = synth_document(&id, Side::Resume, &topics, config, &mut doc_rng);
        resume_topics.insert(id, topics);
        resumes.push(doc);
    }

    // Applications: each resume attempts a fixed number of applications;
    // each attempt succeeds with positive_rate against a same-topic job,
    // otherwise fails against a disjoint-topic job (or, with probability
    // failure_noise, against a same-topic job mislabeled as failure).
    let mut applications = Vec::new();
    let mut seen: HashSet<(String, String, Label)> = HashSet::new();
    for resume in &resumes {
        let topics = &resume_topics[&resume.id];
        for _ in 0..config.applications_per_resume {
            let positive = pos_rng.random_range(0.0..1.0f32) < config.positive_rate;
            let (rng, label, want_match) = if positive {
                (&mut pos_rng, Label::Success, true)
            } else {
                let noisy = fail_rng.random_range(0.0..1.0f32) < config.failure_noise;
                (&mut fail_rng, Label::Failure, noisy)
            };
            let candidates: Vec<usize> = if want_match {
                jobs_by_topicset.get(topics).cloned().unwrap_or_default()
            } else {
                jobs.iter()
                    .enumerate()
                    .filter(|(_, j)| job_topics[&j.id].iter().all(|t| !topics.contains(t)))
                    .map(|(i, _)| i)
                    .collect()
            };
            if candidates.is_empty() {
                continue;
            }
            // Retry a few times to avoid duplicate (job, resume, label) triples.
            for _ in 0..10 {
                let job = &jobs[*candidates.choose(rng).expect("nonempty")];
                let key = (job.id.clone(), resume.id.clone(), label);
                if seen.insert(key) {
                    applications.push(ApplicationRecord {
                        job_id: job.id.clone(),
                        resume_id: resume.id.clone(),
                        label,
                        year: resume.year,
                    });
                    break;
                }
            }
        }
    }

    let dataset = Dataset::new(jobs, resumes, applications)?;
    Ok((
        dataset,
        SynthTrace {
            job_topics,
            resume_topics,
        },
    ))
}

fn sample_topic_set(all: &[usize], k: usize, rng: &mut ChaCha20Rng) -> Vec<usize> {
    let mut set: Vec<usize> = all.choose_multiple(rng, k).copied().collect();
    set.sort_unstable();
    set
}

fn synth_document(
    id: &str,
    side: Side,
    topics: &[usize],
    config: &SynthConfig,
    rng: &mut ChaCha20Rng,
) -> RawDocument {
    let n_items = rng.random_range(config.items_per_doc.0..=config.items_per_doc.1);
    let mut items = Vec::with_capacity(n_items);
    for i in 0..n_items {
        let n_tokens = rng.random_range(config.tokens_per_item.0..=config.tokens_per_item.1);
        let mut tokens = Vec::with_capacity(n_tokens);
        match side {
            Side::Job => {
                // Pure item: round-robin guarantees every topic of the job
                // appears in some requirement item.
                let topic = topics[i % topics.len()];
                for _ in 0..n_tokens {
                    tokens.push(format!(
                        "t{topic}_w{}",
                        rng.random_range(0..config.vocab_per_topic)
                    ));
                }
            }
            Side::Resume => {
                // Mixed item: tokens drawn across the resume's topics, with
                // off-topic noise.
                for _ in 0..n_tokens {
                    let topic = if rng.random_range(0.0..1.0f32) < config.topic_mixture_noise {
                        rng.random_range(0..config.n_topics)
                    } else {
                        topics[rng.random_range(0..topics.len())]
                    };
                    tokens.push(format!(
                        "t{topic}_w{}",
                        rng.random_range(0..config.vocab_per_topic)
                    ));
                }
            }
        }
        items.push(tokens);
    }
    let category = match topics[0] % 4 {
        0 => Category::T,
        1 => Category::P,
        2 => Category::U,
        _ => Category::O,
    };
    RawDocument {
        id: id.to_string(),
        side,
        category,
        year: 2013 + (rng.random_range(0..4i32)),
        items,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, side: Side, items: &[&[&str]]) -> RawDocument {
        RawDocument {
            id: id.into(),
            side,
            category: Category::T,
            year: 2014,
            items: items
                .iter()
                .map(|i| i.iter().map(|t| t.to_string()).collect())
                .collect(),
        }
    }

    fn app(job: &str, resume: &str, label: Label) -> ApplicationRecord {
        ApplicationRecord {
            job_id: job.into(),
            resume_id: resume.into(),
            label,
            year: 2014,
        }
    }

    #[test]
    fn load_corpus_round_trips_well_formed_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let jobs = vec![
            doc("j1", Side::Job, &[&["rust", "systems"]]),
            doc("j2", Side::Job, &[&["sql"], &["etl", "pipelines"]]),
        ];
        let resumes = vec![
            doc("r1", Side::Resume, &[&["rust"]]),
            doc("r2", Side::Resume, &[&["sql", "etl"]]),
        ];
        let apps = vec![
            app("j1", "r1", Label::Success),
            app("j2", "r2", Label::Failure),
        ];
        let ds = Dataset::new(jobs, resumes, apps).unwrap();
        write_corpus(&ds, dir.path()).unwrap();
        let loaded = load_corpus(
            &dir.path().join("jobs.jsonl"),
            &dir.path().join("resumes.jsonl"),
            &dir.path().join("applications.jsonl"),
        )
        .unwrap();
        assert_eq!(loaded, ds);
        assert_eq!(loaded.jobs().len(), 2);
        assert_eq!(loaded.resumes().len(), 2);
        assert_eq!(loaded.applications.len(), 2);
    }

    #[test]
    fn dangling_application_reference_is_rejected() {
        let jobs = vec![doc("j1", Side::Job, &[&["a"]])];
        let resumes = vec![doc("r1", Side::Resume, &[&["b"]])];
        let apps = vec![app("j9", "r1", Label::Success)];
        let err = Dataset::new(jobs, resumes, apps).unwrap_err();
        assert!(matches!(err, Error::ReferentialIntegrity(_)));
        assert!(err.to_string().contains("j9"));
    }

    #[test]
    fn duplicate_job_id_is_rejected() {
        let jobs = vec![
            doc("j1", Side::Job, &[&["a"]]),
            doc("j1", Side::Job, &[&["b"]]),
        ];
        let err = Dataset::new(jobs, vec![], vec![]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));
    }

    #[test]
    fn empty_document_is_rejected() {
        let jobs = vec![doc("j1", Side::Job, &[])];
        let err = Dataset::new(jobs, vec![], vec![]).unwrap_err();
        assert!(matches!(err, Error::EmptyDocument(_)));
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("jobs.jsonl"),
            b"{\"id\":\"j1\",\"side\":\"job\",\"category\":\"T\",\"year\":2014,\"items\":[[\"a\"]]}\nnot json\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("resumes.jsonl"), b"").unwrap();
        std::fs::write(dir.path().join("applications.jsonl"), b"").unwrap();
        let err = load_corpus(
            &dir.path().join("jobs.jsonl"),
            &dir.path().join("resumes.jsonl"),
            &dir.path().join("applications.jsonl"),
        )
        .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_corpus_never_panics_on_arbitrary_bytes() {
        let dir = tempfile::tempdir().unwrap();
        for bytes in [
            &b"\xff\xfe\x00"[..],
            b"{}",
            b"[1,2,3]",
            b"{\"id\": 3}",
            b"\n\n\n",
        ] {
            std::fs::write(dir.path().join("jobs.jsonl"), bytes).unwrap();
            std::fs::write(dir.path().join("resumes.jsonl"), b"").unwrap();
            std::fs::write(dir.path().join("applications.jsonl"), b"").unwrap();
            let _ = load_corpus(
                &dir.path().join("jobs.jsonl"),
                &dir.path().join("resumes.jsonl"),
                &dir.path().join("applications.jsonl"),
            );
        }
    }

    #[test]
    fn split_100_records_is_80_10_10() {
        let records: Vec<ApplicationRecord> = (0..100)
            .map(|i| ApplicationRecord {
                job_id: format!("j{i}"),
                resume_id: format!("r{i}"),
                label: Label::Success,
                year: 2013 + (i % 4) as i32,
            })
            .collect();
        let (train, valid, test) = split(&records, 0.8, 0.1, SplitBy::Random, 3).unwrap();
        assert_eq!((train.len(), valid.len(), test.len()), (80, 10, 10));
    }

    #[test]
    fn split_year_mode_groups_by_year() {
        let records: Vec<ApplicationRecord> = (0..200)
            .map(|i| ApplicationRecord {
                job_id: format!("j{i}"),
                resume_id: format!("r{i}"),
                label: Label::Success,
                year: 2013 + (i % 2) as i32,
            })
            .collect();
        let (train, valid, test) = split(&records, 0.8, 0.1, SplitBy::Year, 3).unwrap();
        for part in [&train, &valid, &test] {
            assert!(part.iter().any(|r| r.year == 2013));
            assert!(part.iter().any(|r| r.year == 2014));
        }
        assert_eq!(train.len() + valid.len() + test.len(), 200);
    }

    #[test]
    fn underfull_split_is_an_error() {
        let records = vec![app("j1", "r1", Label::Success)];
        let err = split(&records, 0.8, 0.1, SplitBy::Random, 0).unwrap_err();
        assert!(matches!(err, Error::UnderfullSplit(_)));
    }

    proptest! {
        #[test]
        fn split_partitions_are_disjoint_and_cover(n in 10usize..200, seed in 0u64..50) {
            let records: Vec<ApplicationRecord> = (0..n)
                .map(|i| ApplicationRecord {
                    job_id: format!("j{i}"),
                    resume_id: format!("r{i}"),
                    label: Label::Success,
                    year: 2013,
                })
                .collect();
            let (train, valid, test) = split(&records, 0.8, 0.1, SplitBy::Random, seed).unwrap();
            let mut all: Vec<&ApplicationRecord> =
                train.iter().chain(&valid).chain(&test).collect();
            prop_assert_eq!(all.len(), n);
            all.sort_by(|a, b| a.job_id.cmp(&b.job_id));
            all.dedup_by(|a, b| a == b);
            prop_assert_eq!(all.len(), n);

            // Same seed reproduces the same split.
            let again = split(&records, 0.8, 0.1, SplitBy::Random, seed).unwrap();
            prop_assert_eq!((train, valid, test), again);
        }
    }

    #[test]
    fn synth_is_deterministic_per_seed() {
        let config = SynthConfig {
            n_jobs: 20,
            n_resumes: 30,
            applications_per_resume: 3,
            ..Default::default()
        };
        let a = synth_generate(&config).unwrap();
        let b = synth_generate(&config).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&SynthConfig { seed: 8, ..config }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_positive_pairs_share_topics_failures_disjoint() {
        let config = SynthConfig {
            n_jobs: 30,
            n_resumes: 40,
            applications_per_resume: 4,
            ..Default::default()
        };
        let (ds, trace) = synth_generate_traced(&config).unwrap();
        assert!(ds.applications.iter().any(|a| a.is_positive()));
        assert!(ds.applications.iter().any(|a| !a.is_positive()));
        for app in &ds.applications {
            let jt = &trace.job_topics[&app.job_id];
            let rt = &trace.resume_topics[&app.resume_id];
            let shared = jt.iter().filter(|t| rt.contains(t)).count();
            match app.label {
                Label::Success => assert!(shared >= 1, "positive pair with no shared topic"),
                // failure_noise = 0: every failure pair is topic-disjoint.
                Label::Failure => assert_eq!(shared, 0, "failure pair shares a topic"),
            }
        }
    }

    #[test]
    fn synth_failure_noise_only_touches_failures() {
        let clean = SynthConfig {
            n_jobs: 25,
            n_resumes: 30,
            ..Default::default()
        };
        let noisy = SynthConfig {
            failure_noise: 0.5,
            ..clean.clone()
        };
        let (a, _) = synth_generate_traced(&clean).unwrap();
        let (b, _) = synth_generate_traced(&noisy).unwrap();
        assert_eq!(a.jobs(), b.jobs());
        assert_eq!(a.resumes(), b.resumes());
        let pos_a: Vec<_> = a.applications.iter().filter(|r| r.is_positive()).collect();
        let pos_b: Vec<_> = b.applications.iter().filter(|r| r.is_positive()).collect();
        assert_eq!(pos_a, pos_b);
    }

    #[test]
    fn synth_infeasible_config_is_a_config_error() {
        let config = SynthConfig {
            n_topics: 3,
            topics_per_doc: 4,
            ..Default::default()
        };
        assert!(matches!(
            synth_generate(&config).unwrap_err(),
            Error::Config(_)
        ));
    }
}
