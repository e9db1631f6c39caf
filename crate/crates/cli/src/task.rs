//! Synthetic transduction tasks and the dataset file format.
//!
//! Dataset files are UTF-8 text. Header lines start with `#`:
//!
//! ```text
//! #swan-dataset v1
//! #task grouped-copy
//! #input-vocab A B C
//! #output-vocab a b c
//! #max-seg-len 3
//! ```
//!
//! followed by one example per line: `input-tokens TAB output-tokens`, with
//! an optional third TAB-separated field listing ground-truth segment
//! lengths (one per input token). Tokens are space-separated; an empty
//! output is an empty field.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use swan_core::{OutputSeq, Vocab};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Each input symbol emits a fixed group of 0..=L tokens.
    GroupedCopy,
    /// Input symbol `s` emits output token `s` repeated `k` times.
    DuplicateK,
    /// The emitted group depends on the current and the previous input symbol.
    RuleTable,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::GroupedCopy => "grouped-copy",
            TaskKind::DuplicateK => "duplicate-k",
            TaskKind::RuleTable => "rule-table",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "grouped-copy" => Some(TaskKind::GroupedCopy),
            "duplicate-k" => Some(TaskKind::DuplicateK),
            "rule-table" => Some(TaskKind::RuleTable),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskSpec {
    pub kind: TaskKind,
    /// Size of both the input alphabet and the output vocabulary.
    pub vocab_size: usize,
    pub min_input_len: usize,
    pub max_input_len: usize,
    /// Maximum segment length the rules may use.
    pub max_seg_len: usize,
    /// Repetition count for [`TaskKind::DuplicateK`].
    #[serde(default = "default_k")]
    pub k: usize,
    pub seed: u64,
}

fn default_k() -> usize {
    2
}

impl SyntheticTaskSpec {
    pub fn grouped_copy(vocab_size: usize, max_seg_len: usize, seed: u64) -> Self {
        Self {
            kind: TaskKind::GroupedCopy,
            vocab_size,
            min_input_len: 2,
            max_input_len: 8,
            max_seg_len,
            k: default_k(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.max_seg_len == 0 {
            return Err(CliError::Config("vocab size and max segment length must be positive".into()));
        }
        if self.min_input_len == 0 || self.min_input_len > self.max_input_len {
            return Err(CliError::Config(format!(
                "input length range {}..={} is empty or starts at 0",
                self.min_input_len, self.max_input_len
            )));
        }
        if self.kind == TaskKind::DuplicateK && self.k > self.max_seg_len {
            return Err(CliError::Config(format!(
                "duplicate-k with k = {} produces infeasible pairs for L = {}",
                self.k, self.max_seg_len
            )));
        }
        Ok(())
    }
}

/// Input symbol names: `A`, `B`, … (or `s0`, `s1`, … beyond 26).
pub fn input_vocab(size: usize) -> Vocab {
    Vocab::new((0..size).map(|i| name(i, size, b'A', "s"))).expect("distinct names")
}

/// Output token names: `a`, `b`, … (or `t0`, `t1`, … beyond 26).
pub fn output_vocab(size: usize) -> Vocab {
    Vocab::new((0..size).map(|i| name(i, size, b'a', "t"))).expect("distinct names")
}

fn name(i: usize, size: usize, base: u8, prefix: &str) -> String {
    if size <= 26 {
        ((base + i as u8) as char).to_string()
    } else {
        format!("{prefix}{i}")
    }
}

/// Emission rule: the group emitted for symbol `s` given the previous symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    /// `groups[s]`
    Fixed(Vec<Vec<usize>>),
    /// `groups[prev][s]` with `prev = V` at the start.
    Contextual(Vec<Vec<Vec<usize>>>),
}

impl Rule {
    pub fn emit(&self, prev: Option<usize>, s: usize) -> &[usize] {
        match self {
            Rule::Fixed(g) => &g[s],
            Rule::Contextual(g) => {
                let row = prev.unwrap_or(g.len() - 1);
                &g[row][s]
            }
        }
    }

    fn longest(&self) -> usize {
        match self {
            Rule::Fixed(g) => g.iter().map(Vec::len).max().unwrap_or(0),
            Rule::Contextual(g) => g.iter().flatten().map(Vec::len).max().unwrap_or(0),
        }
    }

    /// Applies the rule to an input string, returning the output and the
    /// ground-truth segment lengths.
    pub fn apply(&self, input: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut out = Vec::new();
        let mut lens = Vec::with_capacity(input.len());
        let mut prev = None;
        for &s in input {
            let g = self.emit(prev, s);
            out.extend_from_slice(g);
            lens.push(g.len());
            prev = Some(s);
        }
        (out, lens)
    }
}

fn random_group(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize) -> Vec<usize> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| rng.gen_range(0..vocab)).collect()
}

/// Draws the emission rule for `spec` (first use of the seeded generator).
pub fn make_rule(spec: &SyntheticTaskSpec, rng: &mut ChaCha8Rng) -> Rule {
    let v = spec.vocab_size;
    match spec.kind {
        TaskKind::GroupedCopy => {
            Rule::Fixed((0..v).map(|_| random_group(rng, v, spec.max_seg_len)).collect())
        }
        TaskKind::DuplicateK => Rule::Fixed((0..v).map(|s| vec![s; spec.k]).collect()),
        TaskKind::RuleTable => Rule::Contextual(
            (0..=v)
                .map(|_| (0..v).map(|_| random_group(rng, v, spec.max_seg_len)).collect())
                .collect(),
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<usize>,
    pub output: OutputSeq,
    pub segments: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: String,
    pub input_vocab: Vocab,
    pub output_vocab: Vocab,
    pub max_seg_len: usize,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "#swan-dataset v1");
        let _ = writeln!(s, "#task {}", self.task);
        let _ = writeln!(s, "#input-vocab {}", self.input_vocab.tokens().join(" "));
        let _ = writeln!(s, "#output-vocab {}", self.output_vocab.tokens().join(" "));
        let _ = writeln!(s, "#max-seg-len {}", self.max_seg_len);
        for ex in &self.examples {
            let input: Vec<&str> = ex
                .input
                .iter()
                .map(|&i| self.input_vocab.token(i).unwrap())
                .collect();
            let output: Vec<&str> = ex
                .output
                .ids
                .iter()
                .map(|&i| self.output_vocab.token(i).unwrap())
                .collect();
            s.push_str(&input.join(" "));
            s.push('\t');
            s.push_str(&output.join(" "));
            if let Some(seg) = &ex.segments {
                s.push('\t');
                let lens: Vec<String> = seg.iter().map(ToString::to_string).collect();
                s.push_str(&lens.join(" "));
            }
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| CliError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut task = None;
        let mut in_vocab = None;
        let mut out_vocab = None;
        let mut max_seg_len = None;
        let mut examples = Vec::new();
        let mut saw_magic = false;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim_end_matches('\r');
            if let Some(h) = line.strip_prefix('#') {
                let (key, val) = h.split_once(' ').unwrap_or((h, ""));
                match key {
                    "swan-dataset" => {
                        if val != "v1" {
                            return Err(err(lineno, format!("unsupported dataset version {val}")));
                        }
                        saw_magic = true;
                    }
                    "task" => task = Some(val.to_string()),
                    "input-vocab" => {
                        in_vocab = Some(
                            Vocab::new(val.split_whitespace()).map_err(|e| err(lineno, e.to_string()))?,
                        )
                    }
                    "output-vocab" => {
                        out_vocab = Some(
                            Vocab::new(val.split_whitespace()).map_err(|e| err(lineno, e.to_string()))?,
                        )
                    }
                    "max-seg-len" => {
                        max_seg_len = Some(
                            val.parse::<usize>()
                                .map_err(|e| err(lineno, format!("bad max-seg-len: {e}")))?,
                        )
                    }
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !saw_magic {
                return Err(err(lineno, "missing #swan-dataset header".into()));
            }
            let (Some(iv), Some(ov)) = (&in_vocab, &out_vocab) else {
                return Err(err(lineno, "vocabulary headers must precede examples".into()));
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(err(lineno, format!("expected 2 or 3 tab-separated fields, found {}", fields.len())));
            }
            let input: Vec<&str> = fields[0].split_whitespace().collect();
            if input.is_empty() {
                return Err(err(lineno, "empty input".into()));
            }
            let input = iv
                .encode(&input)
                .map_err(|e| err(lineno, e.to_string()))?
                .ids;
            let output: Vec<&str> = fields[1].split_whitespace().collect();
            let output = ov.encode(&output).map_err(|e| err(lineno, e.to_string()))?;
            let segments = match fields.get(2) {
                Some(f) => {
                    let lens = f
                        .split_whitespace()
                        .map(|v| v.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| err(lineno, format!("bad segment length: {e}")))?;
                    if lens.len() != input.len() || lens.iter().sum::<usize>() != output.len() {
                        return Err(err(lineno, "segment lengths do not match input/output".into()));
                    }
                    Some(lens)
                }
                None => None,
            };
            examples.push(Example {
                input,
                output,
                segments,
            });
        }
        if !saw_magic {
            return Err(err(1, "missing #swan-dataset header".into()));
        }
        Ok(Self {
            task: task.unwrap_or_default(),
            input_vocab: in_vocab.ok_or_else(|| err(1, "missing #input-vocab".into()))?,
            output_vocab: out_vocab.ok_or_else(|| err(1, "missing #output-vocab".into()))?,
            max_seg_len: max_seg_len.ok_or_else(|| err(1, "missing #max-seg-len".into()))?,
            examples,
        })
    }

    /// Splits off the last `n` examples.
    pub fn split_tail(mut self, n: usize) -> (Dataset, Dataset) {
        let cut = self.examples.len().saturating_sub(n);
        let tail = self.examples.split_off(cut);
        let dev = Dataset {
            examples: tail,
            ..self.clone()
        };
        (self, dev)
    }
}

/// Applies an explicit rule to explicit inputs.
pub fn dataset_from_rule(
    task: &str,
    rule: &Rule,
    vocab_size: usize,
    max_seg_len: usize,
    inputs: &[Vec<usize>],
) -> Result<Dataset> {
    if rule.longest() > max_seg_len {
        return Err(CliError::Config(format!(
            "rule emits a group of {} tokens, longer than L = {max_seg_len}",
            rule.longest()
        )));
    }
    let examples = inputs
        .iter()
        .map(|inp| {
            let (out, lens) = rule.apply(inp);
            Example {
                input: inp.clone(),
                output: OutputSeq::new(out),
                segments: Some(lens),
            }
        })
        .collect();
    Ok(Dataset {
        task: task.to_string(),
        input_vocab: input_vocab(vocab_size),
        output_vocab: output_vocab(vocab_size),
        max_seg_len,
        examples,
    })
}

/// Deterministic dataset of `n` examples for `spec`.
pub fn generate_dataset(spec: &SyntheticTaskSpec, n: usize) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rule = make_rule(spec, &mut rng);
    let symbols: Vec<usize> = (0..spec.vocab_size).collect();
    let inputs: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let len = rng.gen_range(spec.min_input_len..=spec.max_input_len);
            (0..len).map(|_| *symbols.choose(&mut rng).unwrap()).collect()
        })
        .collect();
    dataset_from_rule(spec.kind.name(), &rule, spec.vocab_size, spec.max_seg_len, &inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_rule_application() {
        // A → [a b], B → []
        let rule = Rule::Fixed(vec![vec![0, 1], vec![]]);
        let ds = dataset_from_rule("grouped-copy", &rule, 2, 2, &[vec![0, 1, 0]]).unwrap();
        let ex = &ds.examples[0];
        assert_eq!(ex.output.ids, vec![0, 1, 0, 1]);
        assert_eq!(ex.segments.as_deref(), Some(&[2, 0, 2][..]));
        assert!(ds.to_text().ends_with("A B A\ta b a b\t2 0 2\n"));
    }

    #[test]
    fn empty_dataset_has_header() {
        let spec = SyntheticTaskSpec::grouped_copy(4, 2, 1);
        let ds = generate_dataset(&spec, 0).unwrap();
        let text = ds.to_text();
        assert!(text.starts_with("#swan-dataset v1\n"));
        let back = Dataset::parse(&text, Path::new("mem")).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.input_vocab, ds.input_vocab);
    }

    #[test]
    fn generation_is_deterministic_and_feasible() {
        for kind in [TaskKind::GroupedCopy, TaskKind::DuplicateK, TaskKind::RuleTable] {
            let spec = SyntheticTaskSpec {
                kind,
                ..SyntheticTaskSpec::grouped_copy(6, 3, 9)
            };
            let a = generate_dataset(&spec, 50).unwrap().to_text();
            let b = generate_dataset(&spec, 50).unwrap().to_text();
            assert_eq!(a, b);
            let ds = Dataset::parse(&a, Path::new("mem")).unwrap();
            for ex in &ds.examples {
                assert!(ex.output.len() <= ex.input.len() * 3);
            }
        }
        let other = generate_dataset(&SyntheticTaskSpec::grouped_copy(6, 3, 10), 50).unwrap();
        assert_ne!(other.to_text(), generate_dataset(&SyntheticTaskSpec::grouped_copy(6, 3, 9), 50).unwrap().to_text());
    }

    #[test]
    fn infeasible_specs_rejected() {
        let spec = SyntheticTaskSpec {
            kind: TaskKind::DuplicateK,
            k: 4,
            ..SyntheticTaskSpec::grouped_copy(3, 3, 0)
        };
        assert!(generate_dataset(&spec, 5).is_err());
        let rule = Rule::Fixed(vec![vec![0, 0, 0]]);
        assert!(dataset_from_rule("x", &rule, 1, 2, &[vec![0]]).is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "#swan-dataset v1\n#input-vocab A\n#output-vocab a\n#max-seg-len 1\nA\tb\n";
        match Dataset::parse(text, Path::new("d.tsv")) {
            Err(CliError::Parse { line, msg, .. }) => {
                assert_eq!(line, 5);
                assert!(msg.contains("unknown token b"));
            }
            other => panic!("{other:?}"),
        }
    }
}
