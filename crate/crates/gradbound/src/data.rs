//! Byte-level token streams for toy pre-training: identity tokenizer over
//! bytes (vocab 256), synthetic corpora a tiny model can actually learn,
//! and a random-window batch iterator with a token-budget mode.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::RandomSource;

pub const BYTE_VOCAB: usize = 256;

#[derive(Debug, Clone)]
pub struct Corpus {
    pub bytes: Vec<u8>,
    pub source: String,
}

impl Corpus {
    pub fn new(bytes: Vec<u8>, source: impl Into<String>) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::InvalidArgument("corpus must be nonempty".into()));
        }
        Ok(Self {
            bytes,
            source: source.into(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::new(bytes, path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// Identity byte -> id map.
pub fn byte_tokenize(text: &[u8]) -> Vec<usize> {
    text.iter().map(|&b| b as usize).collect()
}

pub fn byte_detokenize(ids: &[usize]) -> Result<Vec<u8>> {
    ids.iter()
        .map(|&id| {
            u8::try_from(id).map_err(|_| Error::TokenOutOfRange {
                id,
                vocab: BYTE_VOCAB,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    /// A fixed 16-byte template repeated cyclically, each byte replaced by a
    /// uniform random byte with probability `noise`.
    RepeatingPattern,
    /// An order-2 Markov chain over a 32-byte alphabet with 4 continuations
    /// per context.
    SeededMarkov,
}

impl CorpusKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "repeating-pattern" => Ok(Self::RepeatingPattern),
            "seeded-markov" => Ok(Self::SeededMarkov),
            other => Err(Error::Config(format!("unknown corpus kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::RepeatingPattern => "repeating-pattern",
            Self::SeededMarkov => "seeded-markov",
        }
    }
}

const PATTERN_TEMPLATE: &[u8; 16] = b"abcdefghijklmnop";
pub const PATTERN_NOISE: f64 = 0.05;

/// Generates a learnable synthetic byte corpus.
pub fn synthetic_corpus(
    kind: CorpusKind,
    length: usize,
    noise: f64,
    rng: &mut RandomSource,
) -> Result<Corpus> {
    if length < 2 {
        return Err(Error::InvalidArgument(
            "corpus length must be at least 2".into(),
        ));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidArgument(format!(
            "noise must be in [0, 1], got {noise}"
        )));
    }
    let bytes = match kind {
        CorpusKind::RepeatingPattern => (0..length)
            .map(|i| {
                let clean = PATTERN_TEMPLATE[i % PATTERN_TEMPLATE.len()];
                if noise > 0.0 && rng.uniform() < noise {
                    rng.index(BYTE_VOCAB) as u8
                } else {
                    clean
                }
            })
            .collect(),
        CorpusKind::SeededMarkov => {
            const ALPHABET: usize = 32;
            const CHOICES: usize = 4;
            // Transition table: 4 candidate next symbols per (prev2, prev1).
            let mut table = vec![0u8; ALPHABET * ALPHABET * CHOICES];
            for slot in table.iter_mut() {
                *slot = rng.index(ALPHABET) as u8;
            }
            let mut out = Vec::with_capacity(length);
            let mut p2 = rng.index(ALPHABET);
            let mut p1 = rng.index(ALPHABET);
            out.push(b'a' + p2 as u8);
            if length > 1 {
                out.push(b'a' + p1 as u8);
            }
            while out.len() < length {
                let ctx = (p2 * ALPHABET + p1) * CHOICES;
                let next = table[ctx + rng.index(CHOICES)] as usize;
                out.push(b'a' + next as u8);
                p2 = p1;
                p1 = next;
            }
            out
        }
    };
    Corpus::new(bytes, kind.name())
}

#[derive(Debug, Clone)]
pub struct Batch {
    /// batch_size x L token ids.
    pub inputs: Vec<Vec<usize>>,
    /// Same shape; `targets[b][t] = inputs[b][t+1]` continuation.
    pub targets: Vec<Vec<usize>>,
}

/// Random contiguous windows over a corpus. Window sampling is with
/// replacement; generation is a pure function of the rng.
#[derive(Debug, Clone)]
pub struct BatchStream {
    corpus: Corpus,
    batch_size: usize,
    seq_len: usize,
    rng: RandomSource,
}

impl BatchStream {
    pub fn new(
        corpus: Corpus,
        batch_size: usize,
        seq_len: usize,
        rng: RandomSource,
    ) -> Result<Self> {
        if batch_size == 0 || seq_len == 0 {
            return Err(Error::InvalidArgument(
                "batch_size and seq_len must be positive".into(),
            ));
        }
        if corpus.len() < seq_len + 1 {
            return Err(Error::InvalidArgument(format!(
                "corpus of {} bytes is shorter than seq_len + 1 = {}",
                corpus.len(),
                seq_len + 1
            )));
        }
        Ok(Self {
            corpus,
            batch_size,
            seq_len,
            rng,
        })
    }

    /// Token-budget construction: `tokens_per_batch` must be a multiple of
    /// `seq_len`, so `batch_size * seq_len` stays constant across lengths.
    pub fn with_token_budget(
        corpus: Corpus,
        tokens_per_batch: usize,
        seq_len: usize,
        rng: RandomSource,
    ) -> Result<Self> {
        if seq_len == 0 || tokens_per_batch % seq_len != 0 || tokens_per_batch == 0 {
            return Err(Error::InvalidArgument(format!(
                "token budget {tokens_per_batch} is not a positive multiple of seq_len {seq_len}"
            )));
        }
        Self::new(corpus, tokens_per_batch / seq_len, seq_len, rng)
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn next_batch(&mut self) -> Batch {
        let max_start = self.corpus.len() - self.seq_len - 1;
        let mut inputs = Vec::with_capacity(self.batch_size);
        let mut targets = Vec::with_capacity(self.batch_size);
        for _ in 0..self.batch_size {
            let start = self.rng.index(max_start + 1);
            let window = &self.corpus.bytes[start..start + self.seq_len + 1];
            inputs.push(byte_tokenize(&window[..self.seq_len]));
            targets.push(byte_tokenize(&window[1..]));
        }
        Batch { inputs, targets }
    }
}
