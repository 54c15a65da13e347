//! Hopcroft partition refinement.

use super::dfa::{Dfa, StateId, ALPHABET_SIZE};

/// Returns the minimal DFA for the language of `dfa`.
///
/// Unreachable states are pruned first. The result is numbered in BFS order
/// from the initial state (symbol 0 before symbol 1), so two minimal DFAs for
/// the same language compare equal with `==`.
pub fn minimize(dfa: &Dfa) -> Dfa {
    let reachable = dfa.canonicalize();
    let block_of = hopcroft_blocks(&reachable);
    let num_blocks = block_of.iter().max().map_or(0, |m| m + 1);

    let mut delta = vec![[0; ALPHABET_SIZE]; num_blocks];
    let mut accepting = vec![false; num_blocks];
    for s in 0..reachable.num_states() {
        let b = block_of[s];
        for a in 0..ALPHABET_SIZE {
            delta[b][a] = block_of[reachable.next(s, a)];
        }
        accepting[b] = reachable.is_accepting(s);
    }
    Dfa::from_flags(block_of[reachable.initial()], accepting, delta)
        .expect("quotient of a valid DFA is valid")
        .canonicalize()
}

/// Coarsest partition of the states compatible with acceptance and transitions.
/// Returns a block id per state.
pub(crate) fn hopcroft_blocks(dfa: &Dfa) -> Vec<usize> {
    let n = dfa.num_states();

    let mut preimage: Vec<Vec<Vec<StateId>>> = vec![vec![Vec::new(); n]; ALPHABET_SIZE];
    for s in 0..n {
        for (a, pre) in preimage.iter_mut().enumerate() {
            pre[dfa.next(s, a)].push(s);
        }
    }

    let (acc, rej): (Vec<StateId>, Vec<StateId>) = (0..n).partition(|&s| dfa.is_accepting(s));
    let mut blocks: Vec<Vec<StateId>> = [acc, rej].into_iter().filter(|b| !b.is_empty()).collect();
    let mut block_of = vec![0usize; n];
    for (b, members) in blocks.iter().enumerate() {
        for &s in members {
            block_of[s] = b;
        }
    }

    let mut queued: Vec<[bool; ALPHABET_SIZE]> = vec![[false; ALPHABET_SIZE]; blocks.len()];
    let mut worklist: Vec<(usize, usize)> = Vec::new();
    if blocks.len() == 2 {
        let smaller = if blocks[0].len() <= blocks[1].len() { 0 } else { 1 };
        for a in 0..ALPHABET_SIZE {
            worklist.push((smaller, a));
            queued[smaller][a] = true;
        }
    }

    let mut marked = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut hits: Vec<Vec<StateId>> = vec![Vec::new(); blocks.len()];

    while let Some((splitter, a)) = worklist.pop() {
        queued[splitter][a] = false;

        // states that move into the splitter on `a`
        let sources: Vec<StateId> = blocks[splitter]
            .iter()
            .flat_map(|&t| preimage[a][t].iter().copied())
            .collect();
        for s in sources {
            if marked[s] {
                continue;
            }
            marked[s] = true;
            let b = block_of[s];
            if hits[b].is_empty() {
                touched.push(b);
            }
            hits[b].push(s);
        }

        for b in touched.drain(..) {
            let inside = std::mem::take(&mut hits[b]);
            if inside.len() == blocks[b].len() {
                for &s in &inside {
                    marked[s] = false;
                }
                continue;
            }
            let outside: Vec<StateId> = blocks[b].iter().copied().filter(|&s| !marked[s]).collect();
            for &s in &inside {
                marked[s] = false;
            }
            let new_id = blocks.len();
            let (keep, moved) = if inside.len() <= outside.len() {
                (outside, inside)
            } else {
                (inside, outside)
            };
            for &s in &moved {
                block_of[s] = new_id;
            }
            blocks[b] = keep;
            blocks.push(moved);
            queued.push([false; ALPHABET_SIZE]);
            hits.push(Vec::new());

            // Whether or not (b, c) is pending, queueing the moved half suffices:
            // it is never the larger of the two.
            for c in 0..ALPHABET_SIZE {
                queued[new_id][c] = true;
                worklist.push((new_id, c));
            }
        }
    }
    block_of
}
