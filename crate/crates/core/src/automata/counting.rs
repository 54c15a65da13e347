//! Exact counting of accepted strings and uniform sampling by unranking.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;

use super::dfa::{Dfa, ALPHABET_SIZE};
use crate::error::{Error, Result};

/// Arbitrary-precision, non-negative count.
pub type BigCount = BigUint;

/// Number of accepted strings of exactly `length` symbols.
///
/// Forward dynamic programming over state-occupancy counts, `length + 1` steps.
pub fn count_accepted(dfa: &Dfa, length: usize) -> BigCount {
    let n = dfa.num_states();
    let mut occ = vec![BigUint::zero(); n];
    occ[dfa.initial()] = BigUint::one();
    for _ in 0..length {
        let mut next = vec![BigUint::zero(); n];
        for (s, c) in occ.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for a in 0..ALPHABET_SIZE {
                next[dfa.next(s, a)] += c;
            }
        }
        occ = next;
    }
    occ.iter()
        .enumerate()
        .filter(|(s, _)| dfa.is_accepting(*s))
        .fold(BigUint::zero(), |acc, (_, c)| acc + c)
}

/// `completions[r][s]`: accepted suffixes of length `r` starting from state `s`.
fn completion_table(dfa: &Dfa, length: usize) -> Vec<Vec<BigUint>> {
    let n = dfa.num_states();
    let mut table = Vec::with_capacity(length + 1);
    table.push(
        (0..n)
            .map(|s| {
                if dfa.is_accepting(s) {
                    BigUint::one()
                } else {
                    BigUint::zero()
                }
            })
            .collect::<Vec<_>>(),
    );
    for r in 1..=length {
        let prev: &Vec<BigUint> = &table[r - 1];
        let row = (0..n)
            .map(|s| &prev[dfa.next(s, 0)] + &prev[dfa.next(s, 1)])
            .collect();
        table.push(row);
    }
    table
}

/// Uniform integer in `[0, bound)` by rejection over random words.
pub(crate) fn uniform_below<R: Rng + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "empty range");
    let bits = bound.bits();
    let words = bits.div_ceil(32) as usize;
    let top_mask = if bits.is_multiple_of(32) {
        u32::MAX
    } else {
        (1u32 << (bits % 32)) - 1
    };
    loop {
        let mut digits: Vec<u32> = (0..words).map(|_| rng.random::<u32>()).collect();
        if let Some(last) = digits.last_mut() {
            *last &= top_mask;
        }
        let candidate = BigUint::new(digits);
        if &candidate < bound {
            return candidate;
        }
    }
}

/// Draws `count` strings of the given length independently and uniformly from
/// the accepted slice (`want_accepted`) or the rejected slice of `dfa`.
///
/// The rejected slice is sampled from the complement automaton. Each draw
/// picks a uniform rank among the slice and unranks it against the
/// backward completion table.
pub fn sample_strings<R: Rng + ?Sized>(
    dfa: &Dfa,
    length: usize,
    count: usize,
    want_accepted: bool,
    rng: &mut R,
) -> Result<Vec<String>> {
    let target = if want_accepted {
        dfa.clone()
    } else {
        dfa.complement()
    };
    let table = completion_table(&target, length);
    let total = &table[length][target.initial()];
    if total.is_zero() {
        return Err(Error::EmptyLanguageSlice {
            length,
            accepted: want_accepted,
        });
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut rank = uniform_below(rng, total);
        let mut state = target.initial();
        let mut word = Vec::with_capacity(length);
        for remaining in (1..=length).rev() {
            let zero_branch = &table[remaining - 1][target.next(state, 0)];
            if &rank < zero_branch {
                word.push(b'0');
                state = target.next(state, 0);
            } else {
                rank -= zero_branch;
                word.push(b'1');
                state = target.next(state, 1);
            }
        }
        out.push(String::from_utf8(word).expect("ascii"));
    }
    Ok(out)
}
