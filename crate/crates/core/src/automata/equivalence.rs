use super::dfa::{Dfa, ALPHABET_SIZE};

/// Outcome of a language-equivalence check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equivalence {
    pub equal: bool,
    /// Shortest distinguishing string, lexicographically least among those.
    pub counterexample: Option<String>,
}

/// Decides `L(a) == L(b)` by breadth-first search over the product automaton.
///
/// Pairs are visited in shortlex order of their access strings, so the first
/// pair whose acceptance differs yields the shortest, lexicographically least
/// counterexample.
pub fn equivalent(a: &Dfa, b: &Dfa) -> Equivalence {
    let nb = b.num_states();
    let idx = |p: usize, q: usize| p * nb + q;
    // parent pair and symbol used to reach each visited pair
    let mut parent: Vec<Option<(usize, u8)>> = vec![None; a.num_states() * nb];
    let mut seen = vec![false; a.num_states() * nb];

    let start = idx(a.initial(), b.initial());
    seen[start] = true;
    let mut queue = std::collections::VecDeque::from([(a.initial(), b.initial())]);

    while let Some((p, q)) = queue.pop_front() {
        if a.is_accepting(p) != b.is_accepting(q) {
            let mut word = Vec::new();
            let mut cur = idx(p, q);
            while let Some((prev, sym)) = parent[cur] {
                word.push(b'0' + sym);
                cur = prev;
            }
            word.reverse();
            return Equivalence {
                equal: false,
                counterexample: Some(String::from_utf8(word).expect("ascii")),
            };
        }
        for sym in 0..ALPHABET_SIZE {
            let (p2, q2) = (a.next(p, sym), b.next(q, sym));
            let j = idx(p2, q2);
            if !seen[j] {
                seen[j] = true;
                parent[j] = Some((idx(p, q), sym as u8));
                queue.push_back((p2, q2));
            }
        }
    }
    Equivalence {
        equal: true,
        counterexample: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflexive() {
        let d = Dfa::new(0, [1], vec![[1, 0], [0, 1]]).unwrap();
        assert!(equivalent(&d, &d).equal);
    }

    #[test]
    fn empty_string_counterexample() {
        let a = Dfa::new(0, [0], vec![[0, 0]]).unwrap();
        let b = Dfa::new(0, [], vec![[0, 0]]).unwrap();
        assert_eq!(equivalent(&a, &b).counterexample.as_deref(), Some(""));
    }

    #[test]
    fn lexicographic_tie_break() {
        // a accepts everything of length >= 2; b accepts length >= 2 except "00"
        let a = Dfa::new(0, [2], vec![[1, 1], [2, 2], [2, 2]]).unwrap();
        let b = Dfa::new(0, [2, 4], vec![[1, 3], [5, 2], [4, 4], [2, 2], [4, 4], [4, 4]]).unwrap();
        let eq = equivalent(&a, &b);
        assert!(!eq.equal);
        assert_eq!(eq.counterexample.as_deref(), Some("00"));
    }
}
