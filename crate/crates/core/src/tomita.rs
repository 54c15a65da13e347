//! The seven Tomita grammars over `{0, 1}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::automata::Dfa;
use crate::error::{validate_binary, Error, Result};

/// One of the seven Tomita grammars.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct GrammarId(u8);

impl GrammarId {
    pub const ALL: [GrammarId; 7] = [
        GrammarId(1),
        GrammarId(2),
        GrammarId(3),
        GrammarId(4),
        GrammarId(5),
        GrammarId(6),
        GrammarId(7),
    ];

    pub fn new(g: u8) -> Result<Self> {
        if (1..=7).contains(&g) {
            Ok(GrammarId(g))
        } else {
            Err(Error::InvalidGrammar(g))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Human-readable description of the language.
    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "1*",
            2 => "(10)*",
            3 => "an odd number of consecutive 1s is never followed by an odd number of consecutive 0s",
            4 => "no 000 substring",
            5 => "even number of 0s and even number of 1s",
            6 => "(#0 - #1) is a multiple of 3",
            7 => "0*1*0*1*",
            _ => unreachable!(),
        }
    }
}

impl TryFrom<u8> for GrammarId {
    type Error = Error;

    fn try_from(g: u8) -> Result<Self> {
        GrammarId::new(g)
    }
}

impl From<GrammarId> for u8 {
    fn from(g: GrammarId) -> u8 {
        g.0
    }
}

impl fmt::Display for GrammarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for GrammarId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let g: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("grammar id {s:?} is not an integer")))?;
        GrammarId::new(g)
    }
}

/// Hand-coded automaton for grammar `g`, including its garbage state when the
/// language has one.
pub fn ground_truth(g: GrammarId) -> Dfa {
    let (initial, accepting, delta): (usize, &[usize], Vec<[usize; 2]>) = match g.0 {
        // 0: ones so far, 1: garbage
        1 => (0, &[0], vec![[1, 0], [1, 1]]),
        // 0: complete "10" pairs, 1: pending "1", 2: garbage
        2 => (0, &[0], vec![[2, 1], [0, 2], [2, 2]]),
        // 0: no pending odd 1-run, 1: odd 1-run, 2: odd 0-run after odd 1-run,
        // 3: even 0-run after odd 1-run, 4: garbage
        3 => (
            0,
            &[0, 1, 3],
            vec![[0, 1], [2, 0], [3, 4], [2, 1], [4, 4]],
        ),
        // trailing zero count 0..=2, 3: garbage
        4 => (0, &[0, 1, 2], vec![[1, 0], [2, 0], [3, 0], [3, 3]]),
        // (zeros parity, ones parity): 0=(e,e) 1=(o,e) 2=(e,o) 3=(o,o)
        5 => (0, &[0], vec![[1, 2], [0, 3], [3, 0], [2, 1]]),
        // (#0 - #1) mod 3
        6 => (0, &[0], vec![[1, 2], [2, 0], [0, 1]]),
        // blocks 0*, 1*, 0*, 1*, then garbage
        7 => (
            0,
            &[0, 1, 2, 3],
            vec![[0, 1], [2, 1], [2, 3], [4, 3], [4, 4]],
        ),
        _ => unreachable!("GrammarId is validated"),
    };
    Dfa::new(initial, accepting.iter().copied(), delta).expect("hand-coded automaton is valid")
}

/// Lengths of the maximal runs of equal symbols, as `(symbol, length)`.
fn runs(s: &[u8]) -> Vec<(u8, usize)> {
    let mut out: Vec<(u8, usize)> = Vec::new();
    for &b in s {
        match out.last_mut() {
            Some((sym, len)) if *sym == b => *len += 1,
            _ => out.push((b, 1)),
        }
    }
    out
}

/// Membership decided directly from each grammar's description, without
/// going through an automaton. Used to cross-check [`ground_truth`].
pub fn membership(g: GrammarId, s: &str) -> Result<bool> {
    validate_binary(s)?;
    let b = s.as_bytes();
    let zeros = b.iter().filter(|&&c| c == b'0').count() as i64;
    let ones = b.len() as i64 - zeros;
    Ok(match g.0 {
        1 => zeros == 0,
        2 => b.len().is_multiple_of(2) && b.chunks(2).all(|pair| pair == b"10"),
        3 => {
            let r = runs(b);
            !r.windows(2).any(|w| {
                let (first, second) = (w[0], w[1]);
                first.0 == b'1' && first.1 % 2 == 1 && second.0 == b'0' && second.1 % 2 == 1
            })
        }
        4 => !s.contains("000"),
        5 => zeros % 2 == 0 && ones % 2 == 0,
        6 => (zeros - ones).rem_euclid(3) == 0,
        7 => {
            // 0*1*0*1* allows at most four blocks in the order 0,1,0,1
            let r = runs(b);
            let offset = usize::from(r.first().is_some_and(|&(sym, _)| sym == b'1'));
            r.len() + offset <= 4
        }
        _ => unreachable!(),
    })
}
