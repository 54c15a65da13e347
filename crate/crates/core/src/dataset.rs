//! Labeled string sets: exhaustive short-string splits, proportional
//! long-string test sets, and their TSV persistence.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automata::{count_accepted, sample_strings};
use crate::error::{validate_binary, Error, Result};
use crate::seed::derive_seed;
use crate::tomita::{ground_truth, GrammarId};

const SPLIT_STREAM: u64 = 1;
const LONG_SET_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Test,
    LongTest,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Test => "test",
            Role::LongTest => "long_test",
        }
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "test" => Ok(Role::Test),
            "long_test" => Ok(Role::LongTest),
            other => Err(Error::InvalidConfig(format!("unknown dataset role {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub string: String,
    pub label: bool,
}

/// Binary strings with ground-truth labels for one grammar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDataset {
    pub grammar: GrammarId,
    pub min_len: usize,
    pub max_len: usize,
    pub role: Role,
    pub seed: u64,
    pub items: Vec<Sample>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.items.iter().filter(|s| s.label).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.items.iter()
    }

    /// Sum of string lengths; the number of binary steps an RNN makes over the set.
    pub fn total_symbols(&self) -> usize {
        self.items.iter().map(|s| s.string.len()).sum()
    }

    /// Serializes to the TSV format: one `# ...` header line, then
    /// `label<TAB>string` per item.
    pub fn to_tsv(&self) -> String {
        self.to_string()
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        text.parse()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }
}

impl fmt::Display for LabeledDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# grammar={} min_len={} max_len={} role={} seed={}",
            self.grammar,
            self.min_len,
            self.max_len,
            self.role.as_str(),
            self.seed
        )?;
        for item in &self.items {
            writeln!(f, "{}\t{}", u8::from(item.label), item.string)?;
        }
        Ok(())
    }
}

impl FromStr for LabeledDataset {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        if !text.is_empty() && !text.ends_with('\n') {
            return Err(Error::parse(text.lines().count(), "missing final newline"));
        }
        let mut lines = text.split_terminator('\n');
        let header = lines.next().ok_or_else(|| Error::parse(1, "empty dataset file"))?;
        let fields = header
            .strip_prefix("# ")
            .ok_or_else(|| Error::parse(1, "header must start with '# '"))?;
        let mut toks = fields.split(' ');
        let mut field = |key: &str| -> Result<&str> {
            let tok = toks
                .next()
                .ok_or_else(|| Error::parse(1, format!("missing {key}")))?;
            tok.strip_prefix(key)
                .and_then(|t| t.strip_prefix('='))
                .ok_or_else(|| Error::parse(1, format!("expected {key}=..., found {tok:?}")))
        };
        let num = |v: &str, key: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::parse(1, format!("bad {key} value {v:?}")))
        };
        let grammar = GrammarId::new(num(field("grammar")?, "grammar")? as u8)?;
        let min_len = num(field("min_len")?, "min_len")? as usize;
        let max_len = num(field("max_len")?, "max_len")? as usize;
        let role: Role = field("role")?.parse()?;
        let seed = num(field("seed")?, "seed")?;
        if toks.next().is_some() {
            return Err(Error::parse(1, "trailing header fields"));
        }

        let mut items = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let (label, string) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno, "expected label<TAB>string"))?;
            let label = match label {
                "0" => false,
                "1" => true,
                other => return Err(Error::parse(lineno, format!("bad label {other:?}"))),
            };
            validate_binary(string)?;
            items.push(Sample {
                string: string.to_owned(),
                label,
            });
        }
        Ok(LabeledDataset {
            grammar,
            min_len,
            max_len,
            role,
            seed,
            items,
        })
    }
}

/// All binary strings of exactly `len` symbols in lexicographic order.
pub fn all_strings(len: usize) -> impl Iterator<Item = String> {
    assert!(len < usize::BITS as usize, "length {len} too large to enumerate");
    (0..1usize << len).map(move |w| {
        (0..len)
            .map(|i| if (w >> (len - 1 - i)) & 1 == 1 { '1' } else { '0' })
            .collect()
    })
}

/// Exhaustive train/test split of every string with length in `min_len..=max_len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Enumerates every string in the length range, labels it with the ground-truth
/// automaton and splits it into train/test, stratified jointly by label and
/// length.
///
/// Per label, the test set receives `round(test_fraction * count)` strings,
/// apportioned over lengths by largest remainder, so each (label, length)
/// stratum contributes either the floor or the ceiling of its share. Ties
/// between equal remainders and the choice of members inside a stratum are
/// drawn from the seed.
pub fn generate_dataset(
    grammar: GrammarId,
    min_len: usize,
    max_len: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if min_len > max_len {
        return Err(Error::InvalidConfig(format!(
            "min_len {min_len} exceeds max_len {max_len}"
        )));
    }
    if max_len > 24 {
        return Err(Error::InvalidConfig(format!(
            "max_len {max_len} too large for exhaustive enumeration"
        )));
    }
    let dfa = ground_truth(grammar);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[SPLIT_STREAM, grammar.get() as u64]));

    // strata[label][length - min_len]
    let span = max_len - min_len + 1;
    let mut strata: [Vec<Vec<String>>; 2] = [vec![Vec::new(); span], vec![Vec::new(); span]];
    for len in min_len..=max_len {
        for s in all_strings(len) {
            let label = dfa.accepts_unchecked(&s);
            strata[usize::from(label)][len - min_len].push(s);
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label_idx, by_len) in strata.iter_mut().enumerate() {
        let label = label_idx == 1;
        let total: usize = by_len.iter().map(Vec::len).sum();
        let want = (test_fraction * total as f64).round() as usize;
        let shares: Vec<f64> = by_len.iter().map(|v| test_fraction * v.len() as f64).collect();
        let mut quota: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
        let mut order: Vec<usize> = (0..span).filter(|&i| quota[i] < by_len[i].len()).collect();
        order.shuffle(&mut rng);
        // stable sort keeps the shuffled order among equal remainders
        order.sort_by(|&a, &b| {
            let ra = shares[a] - shares[a].floor();
            let rb = shares[b] - shares[b].floor();
            rb.total_cmp(&ra)
        });
        let missing = want.saturating_sub(quota.iter().sum());
        for &i in order.iter().take(missing) {
            quota[i] += 1;
        }

        for (i, members) in by_len.iter_mut().enumerate() {
            let mut idx: Vec<usize> = (0..members.len()).collect();
            idx.shuffle(&mut rng);
            let mut is_test = vec![false; members.len()];
            for &j in &idx[..quota[i]] {
                is_test[j] = true;
            }
            for (j, s) in members.drain(..).enumerate() {
                let sample = Sample { string: s, label };
                if is_test[j] {
                    test.push(sample);
                } else {
                    train.push(sample);
                }
            }
        }
    }
    // shortlex order, independent of how strata were visited
    let shortlex = |a: &Sample, b: &Sample| {
        a.string
            .len()
            .cmp(&b.string.len())
            .then_with(|| a.string.cmp(&b.string))
    };
    train.sort_by(shortlex);
    test.sort_by(shortlex);

    let make = |role, items| LabeledDataset {
        grammar,
        min_len,
        max_len,
        role,
        seed,
        items,
    };
    Ok(Split {
        train: make(Role::Train, train),
        test: make(Role::Test, test),
    })
}

/// Exact fraction of length-`length` strings accepted by grammar `g`.
pub fn positive_ratio(grammar: GrammarId, length: usize) -> BigRational {
    let accepted = BigInt::from(count_accepted(&ground_truth(grammar), length));
    let total = BigInt::one() << length;
    BigRational::new(accepted, total)
}

/// Exact fraction of length-`length` strings rejected by grammar `g`.
pub fn negative_ratio(grammar: GrammarId, length: usize) -> BigRational {
    BigRational::one() - positive_ratio(grammar, length)
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Number of positives a proportion-preserving set of `n` strings gets:
/// `round(p * n)` with halves rounded up, computed exactly.
pub fn proportional_positives(grammar: GrammarId, length: usize, n: usize) -> usize {
    let accepted = count_accepted(&ground_truth(grammar), length);
    let total = BigUint::one() << length;
    let scaled = (accepted * BigUint::from(n) * 2u32 + &total) / (total * 2u32);
    scaled.to_usize().expect("bounded by n")
}

/// Random strings of one fixed length whose positive/negative balance matches
/// the exact proportion in the complete set of strings of that length.
pub fn generate_long_testset(
    grammar: GrammarId,
    length: usize,
    n: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let dfa = ground_truth(grammar);
    let n_pos = proportional_positives(grammar, length, n);
    let n_neg = n - n_pos;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        &[LONG_SET_STREAM, grammar.get() as u64, length as u64, n as u64],
    ));
    let mut items = Vec::with_capacity(n);
    if n_pos > 0 {
        items.extend(
            sample_strings(&dfa, length, n_pos, true, &mut rng)?
                .into_iter()
                .map(|string| Sample { string, label: true }),
        );
    }
    if n_neg > 0 {
        items.extend(
            sample_strings(&dfa, length, n_neg, false, &mut rng)?
                .into_iter()
                .map(|string| Sample {
                    string,
                    label: false,
                }),
        );
    }
    items.shuffle(&mut rng);
    Ok(LabeledDataset {
        grammar,
        min_len: length,
        max_len: length,
        role: Role::LongTest,
        seed,
        items,
    })
}
