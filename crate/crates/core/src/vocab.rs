//! Vocabulary, output/input sequences and segmentations.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Result, SwanError};

/// Ordered set of surface tokens. Token ids are positions in the list.
///
/// The end-of-segment symbol is not a token: it is the extra class `V` of
/// every segment softmax and never appears in an [`OutputSeq`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(SwanError::EmptyVocab);
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(SwanError::InvalidConfig(format!(
                    "token {tok:?} is empty or contains whitespace"
                )));
            }
            if index.insert(tok.clone(), i).is_some() {
                return Err(SwanError::DuplicateToken(tok.clone()));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Number of real tokens, `V`. The end-of-segment class has index `V`.
    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    /// Softmax class index of the end-of-segment symbol.
    pub fn end_of_segment(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, text: &[S]) -> Result<OutputSeq> {
        let ids = text
            .iter()
            .map(|t| {
                self.id(t.as_ref())
                    .ok_or_else(|| SwanError::UnknownToken(t.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OutputSeq { ids })
    }

    pub fn decode(&self, seq: &OutputSeq) -> Result<Vec<String>> {
        seq.ids
            .iter()
            .map(|&id| {
                self.token(id)
                    .map(str::to_string)
                    .ok_or(SwanError::TokenOutOfRange {
                        id,
                        size: self.size(),
                    })
            })
            .collect()
    }

    /// Reads a vocabulary file: UTF-8, one token per line, line number = id.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let tok = line.trim_end_matches('\r');
            if tok.is_empty() {
                continue;
            }
            tokens.push(tok.to_string());
        }
        Self::new(tokens)
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> Result<()> {
        for tok in &self.tokens {
            writeln!(writer, "{tok}")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Shorthand for [`Vocab::encode`].
pub fn encode_tokens<S: AsRef<str>>(text: &[S], vocab: &Vocab) -> Result<OutputSeq> {
    vocab.encode(text)
}

/// Shorthand for [`Vocab::decode`].
pub fn decode_tokens(seq: &OutputSeq, vocab: &Vocab) -> Result<Vec<String>> {
    vocab.decode(seq)
}

/// Target token sequence `y_{1:T}`; ids are in `[0, V)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutputSeq {
    pub ids: Vec<usize>,
}

impl OutputSeq {
    pub fn new(ids: Vec<usize>) -> Self {
        Self { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Checks that no id reaches the end-of-segment class.
    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        match self.ids.iter().find(|&&id| id >= vocab_size) {
            Some(&id) => Err(SwanError::TokenOutOfRange {
                id,
                size: vocab_size,
            }),
            None => Ok(()),
        }
    }
}

impl From<Vec<usize>> for OutputSeq {
    fn from(ids: Vec<usize>) -> Self {
        Self { ids }
    }
}

/// Input feature sequence `x_{1:T'}` of equal-width real vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSeq {
    dim: usize,
    data: Vec<f64>,
}

impl InputSeq {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(SwanError::InvalidInput("input must have at least one element".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(SwanError::InvalidInput("input dimension must be at least 1".into()));
        }
        let mut data = Vec::with_capacity(dim * vectors.len());
        for (t, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(SwanError::InvalidInput(format!(
                    "element {t} has dimension {} but expected {dim}",
                    v.len()
                )));
            }
            data.extend_from_slice(v);
        }
        Ok(Self { dim, data })
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(SwanError::InvalidInput(format!(
                "flat buffer of {} values is not a non-empty multiple of {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    /// One-hot rows of width `dim`.
    pub fn one_hot(symbols: &[usize], dim: usize) -> Result<Self> {
        let mut data = vec![0.0; symbols.len() * dim];
        for (t, &s) in symbols.iter().enumerate() {
            if s >= dim {
                return Err(SwanError::InvalidInput(format!(
                    "symbol {s} out of range for one-hot width {dim}"
                )));
            }
            data[t * dim + s] = 1.0;
        }
        Self::from_flat(dim, data)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn get_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Elementwise mean over time, used to present a sequence as a single vector.
    pub fn mean_pooled(&self) -> InputSeq {
        let n = self.len() as f64;
        let mut acc = vec![0.0; self.dim];
        for t in 0..self.len() {
            for (a, v) in acc.iter_mut().zip(self.get(t)) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n);
        InputSeq {
            dim: self.dim,
            data: acc,
        }
    }
}

/// Which marginalization the segmentation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Fixed-vector input; any number of non-empty segments.
    NonSequence,
    /// Sequence input; exactly one (possibly empty) segment per input element.
    Sequence,
}

/// A split of the target into consecutive segments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segmentation {
    pub segments: Vec<Vec<usize>>,
}

impl Segmentation {
    /// Builds the segmentation of `y` induced by a list of segment lengths.
    pub fn from_lengths(y: &OutputSeq, lengths: &[usize]) -> Result<Self> {
        let total: usize = lengths.iter().sum();
        if total != y.len() {
            return Err(SwanError::InvalidSegmentation(format!(
                "segment lengths sum to {total} but target has {} tokens",
                y.len()
            )));
        }
        let mut start = 0;
        let segments = lengths
            .iter()
            .map(|&len| {
                let seg = y.ids[start..start + len].to_vec();
                start += len;
                seg
            })
            .collect();
        Ok(Self { segments })
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.segments.iter().map(Vec::len).collect()
    }

    /// Concatenation of all segments.
    pub fn concat(&self) -> OutputSeq {
        OutputSeq::new(self.segments.iter().flatten().copied().collect())
    }

    pub fn non_empty_count(&self) -> usize {
        self.segments.iter().filter(|s| !s.is_empty()).count()
    }

    /// Checks the concatenation and length invariants against `y`.
    ///
    /// For [`Case::Sequence`] `input_len` must be the number of input elements;
    /// it is ignored for [`Case::NonSequence`].
    pub fn validate(
        &self,
        y: &OutputSeq,
        max_seg_len: usize,
        case: Case,
        input_len: usize,
    ) -> Result<()> {
        if self.concat() != *y {
            return Err(SwanError::InvalidSegmentation(
                "concatenation of segments differs from the target".into(),
            ));
        }
        if let Some((i, s)) = self
            .segments
            .iter()
            .enumerate()
            .find(|(_, s)| s.len() > max_seg_len)
        {
            return Err(SwanError::InvalidSegmentation(format!(
                "segment {i} has length {} > {max_seg_len}",
                s.len()
            )));
        }
        match case {
            Case::Sequence => {
                if self.segments.len() != input_len {
                    return Err(SwanError::InvalidSegmentation(format!(
                        "expected {input_len} segments, found {}",
                        self.segments.len()
                    )));
                }
            }
            Case::NonSequence => {
                if self.segments.is_empty() || self.segments.iter().any(Vec::is_empty) {
                    return Err(SwanError::InvalidSegmentation(
                        "empty segments are not permitted without a sequence input".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Renders segments in brackets, e.g. `[a b] [] [c]`.
    pub fn display_with<'a>(&'a self, vocab: &'a Vocab) -> impl fmt::Display + 'a {
        BracketDisplay {
            seg: self,
            vocab,
        }
    }
}

struct BracketDisplay<'a> {
    seg: &'a Segmentation,
    vocab: &'a Vocab,
}

impl fmt::Display for BracketDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.seg.segments.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str("[")?;
            for (k, &id) in s.iter().enumerate() {
                if k > 0 {
                    f.write_str(" ")?;
                }
                f.write_str(self.vocab.token(id).unwrap_or("?"))?;
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}
