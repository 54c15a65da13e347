use std::fmt;
use std::str::FromStr;

use crate::error::{symbol_index, Error, Result};

/// Index of a state inside a transition table.
pub type StateId = usize;

/// Size of the binary input alphabet `{0, 1}`.
pub const ALPHABET_SIZE: usize = 2;

/// A complete deterministic finite automaton over `{0, 1}`.
///
/// The transition table is total: every state has exactly one successor per
/// symbol. The accepting set may be empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dfa {
    initial: StateId,
    accepting: Vec<bool>,
    delta: Vec<[StateId; ALPHABET_SIZE]>,
}

impl Dfa {
    /// Builds a DFA, validating that the table is total and all indices are in range.
    pub fn new(
        initial: StateId,
        accepting: impl IntoIterator<Item = StateId>,
        delta: Vec<[StateId; ALPHABET_SIZE]>,
    ) -> Result<Self> {
        let n = delta.len();
        if n == 0 {
            return Err(Error::InvalidDfa("automaton needs at least one state".into()));
        }
        if initial >= n {
            return Err(Error::InvalidDfa(format!(
                "initial state {initial} out of range 0..{n}"
            )));
        }
        for (s, row) in delta.iter().enumerate() {
            for (a, &t) in row.iter().enumerate() {
                if t >= n {
                    return Err(Error::InvalidDfa(format!(
                        "transition ({s}, {a}) -> {t} out of range 0..{n}"
                    )));
                }
            }
        }
        let mut flags = vec![false; n];
        for s in accepting {
            if s >= n {
                return Err(Error::InvalidDfa(format!(
                    "accepting state {s} out of range 0..{n}"
                )));
            }
            flags[s] = true;
        }
        Ok(Self {
            initial,
            accepting: flags,
            delta,
        })
    }

    /// Builds a DFA from an acceptance flag per state.
    pub fn from_flags(
        initial: StateId,
        accepting: Vec<bool>,
        delta: Vec<[StateId; ALPHABET_SIZE]>,
    ) -> Result<Self> {
        if accepting.len() != delta.len() {
            return Err(Error::InvalidDfa(format!(
                "{} acceptance flags for {} states",
                accepting.len(),
                delta.len()
            )));
        }
        let set = accepting
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(s, _)| s)
            .collect::<Vec<_>>();
        Self::new(initial, set, delta)
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn alphabet_size(&self) -> usize {
        ALPHABET_SIZE
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn is_accepting(&self, s: StateId) -> bool {
        self.accepting[s]
    }

    pub fn accepting_flags(&self) -> &[bool] {
        &self.accepting
    }

    /// Accepting states in ascending order.
    pub fn accepting_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.accepting
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(s, _)| s)
    }

    #[inline]
    pub fn next(&self, s: StateId, symbol: usize) -> StateId {
        self.delta[s][symbol]
    }

    pub fn transitions(&self) -> &[[StateId; ALPHABET_SIZE]] {
        &self.delta
    }

    /// Runs the automaton over already-decoded symbols (each 0 or 1).
    pub fn run_symbols(&self, symbols: impl IntoIterator<Item = usize>) -> StateId {
        symbols
            .into_iter()
            .fold(self.initial, |s, a| self.delta[s][a])
    }

    /// Returns whether `s` is in the language. The empty string is accepted
    /// iff the initial state is accepting.
    pub fn accepts(&self, s: &str) -> Result<bool> {
        let mut q = self.initial;
        for b in s.bytes() {
            q = self.delta[q][symbol_index(b)?];
        }
        Ok(self.accepting[q])
    }

    /// Membership for a string already known to be binary. Panics on other bytes.
    pub fn accepts_unchecked(&self, s: &str) -> bool {
        let q = self.run_symbols(s.bytes().map(|b| (b - b'0') as usize));
        self.accepting[q]
    }

    /// Same transition structure with the accepting set flipped.
    pub fn complement(&self) -> Dfa {
        Dfa {
            initial: self.initial,
            accepting: self.accepting.iter().map(|f| !f).collect(),
            delta: self.delta.clone(),
        }
    }

    /// States reachable from the initial state, in breadth-first order with
    /// symbol 0 explored before symbol 1.
    pub fn bfs_order(&self) -> Vec<StateId> {
        let mut seen = vec![false; self.num_states()];
        let mut order = Vec::with_capacity(self.num_states());
        seen[self.initial] = true;
        order.push(self.initial);
        let mut head = 0;
        while head < order.len() {
            let s = order[head];
            head += 1;
            for &t in &self.delta[s] {
                if !seen[t] {
                    seen[t] = true;
                    order.push(t);
                }
            }
        }
        order
    }

    /// Drops unreachable states and renumbers the rest in BFS order.
    pub fn canonicalize(&self) -> Dfa {
        let order = self.bfs_order();
        let mut rename = vec![usize::MAX; self.num_states()];
        for (new, &old) in order.iter().enumerate() {
            rename[old] = new;
        }
        let delta = order
            .iter()
            .map(|&old| [rename[self.delta[old][0]], rename[self.delta[old][1]]])
            .collect();
        let accepting = order.iter().map(|&old| self.accepting[old]).collect();
        Dfa {
            initial: 0,
            accepting,
            delta,
        }
    }

    /// Serializes into the compact line-based text format.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Parses the compact line-based text format produced by [`Dfa::to_text`].
    pub fn from_text(text: &str) -> Result<Dfa> {
        text.parse()
    }
}

impl fmt::Display for Dfa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "states {} alphabet {} initial {}",
            self.num_states(),
            ALPHABET_SIZE,
            self.initial
        )?;
        write!(f, "accepting")?;
        for s in self.accepting_states() {
            write!(f, " {s}")?;
        }
        writeln!(f)?;
        for (s, row) in self.delta.iter().enumerate() {
            writeln!(f, "state {s}: on0 {} on1 {}", row[0], row[1])?;
        }
        Ok(())
    }
}

fn parse_num(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    if tok.len() > 1 && tok.starts_with('0') || tok.starts_with('+') {
        return Err(Error::parse(line, format!("non-canonical number {tok:?}")));
    }
    tok.parse()
        .map_err(|_| Error::parse(line, format!("bad {what} {tok:?}")))
}

fn expect(tok: Option<&str>, want: &str, line: usize) -> Result<()> {
    match tok {
        Some(t) if t == want => Ok(()),
        other => Err(Error::parse(
            line,
            format!("expected {want:?}, found {other:?}"),
        )),
    }
}

impl FromStr for Dfa {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.split_terminator('\n');

        let header = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        let mut toks = header.split(' ');
        expect(toks.next(), "states", 1)?;
        let n = parse_num(toks.next(), 1, "state count")?;
        expect(toks.next(), "alphabet", 1)?;
        let alpha = parse_num(toks.next(), 1, "alphabet size")?;
        if alpha != ALPHABET_SIZE {
            return Err(Error::parse(1, format!("alphabet must be 2, got {alpha}")));
        }
        expect(toks.next(), "initial", 1)?;
        let initial = parse_num(toks.next(), 1, "initial state")?;
        if toks.next().is_some() {
            return Err(Error::parse(1, "trailing tokens"));
        }

        let acc_line = lines.next().ok_or_else(|| Error::parse(2, "missing accepting line"))?;
        let mut toks = acc_line.split(' ');
        expect(toks.next(), "accepting", 2)?;
        let mut accepting = Vec::new();
        for tok in toks {
            let s = parse_num(Some(tok), 2, "accepting state")?;
            if accepting.last().is_some_and(|&prev| prev >= s) {
                return Err(Error::parse(2, "accepting states must be strictly ascending"));
            }
            accepting.push(s);
        }

        let mut delta = Vec::with_capacity(n);
        for s in 0..n {
            let lineno = s + 3;
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(lineno, format!("missing row for state {s}")))?;
            let mut toks = line.split(' ');
            expect(toks.next(), "state", lineno)?;
            expect(toks.next(), &format!("{s}:"), lineno)?;
            expect(toks.next(), "on0", lineno)?;
            let t0 = parse_num(toks.next(), lineno, "target")?;
            expect(toks.next(), "on1", lineno)?;
            let t1 = parse_num(toks.next(), lineno, "target")?;
            if toks.next().is_some() {
                return Err(Error::parse(lineno, "trailing tokens"));
            }
            delta.push([t0, t1]);
        }
        if let Some(extra) = lines.next() {
            return Err(Error::parse(n + 3, format!("unexpected line {extra:?}")));
        }
        if !text.ends_with('\n') {
            return Err(Error::parse(n + 2, "missing final newline"));
        }
        Dfa::new(initial, accepting, delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones() -> Dfa {
        Dfa::new(0, [0], vec![[1, 0], [1, 1]]).unwrap()
    }

    #[test]
    fn accepts_basic() {
        let d = ones();
        assert!(d.accepts("111").unwrap());
        assert!(d.accepts("").unwrap());
        assert!(!d.accepts("101").unwrap());
    }

    #[test]
    fn empty_string_follows_initial_flag() {
        let d = Dfa::new(0, [], vec![[0, 0]]).unwrap();
        assert!(!d.accepts("").unwrap());
        assert!(d.complement().accepts("").unwrap());
    }

    #[test]
    fn invalid_symbol() {
        assert!(matches!(ones().accepts("12"), Err(Error::InvalidSymbol('2'))));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Dfa::new(0, [], vec![[0, 2], [0, 0]]).is_err());
        assert!(Dfa::new(2, [], vec![[0, 1], [0, 0]]).is_err());
        assert!(Dfa::new(0, [5], vec![[0, 0]]).is_err());
        assert!(Dfa::new(0, [], vec![]).is_err());
    }

    #[test]
    fn text_format_layout() {
        let text = ones().to_text();
        assert_eq!(
            text,
            "states 2 alphabet 2 initial 0\naccepting 0\nstate 0: on0 1 on1 0\nstate 1: on0 1 on1 1\n"
        );
        assert_eq!(Dfa::from_text(&text).unwrap(), ones());
    }

    #[test]
    fn text_format_empty_accepting() {
        let d = Dfa::new(0, [], vec![[0, 0]]).unwrap();
        let text = d.to_text();
        assert!(text.contains("\naccepting\n"));
        assert_eq!(Dfa::from_text(&text).unwrap().to_text(), text);
    }

    #[test]
    fn text_format_rejects_noise() {
        let good = ones().to_text();
        for bad in [
            good.replace("on1 0", "on1  0"),
            good.replace("alphabet 2", "alphabet 3"),
            good.trim_end().to_string(),
            format!("{good}extra\n"),
            good.replace("state 1:", "state 2:"),
            good.replace("initial 0", "initial 00"),
        ] {
            assert!(Dfa::from_text(&bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn canonicalize_drops_unreachable() {
        // state 1 unreachable
        let d = Dfa::new(2, [0], vec![[0, 0], [1, 1], [2, 0]]).unwrap();
        let c = d.canonicalize();
        assert_eq!(c.num_states(), 2);
        assert_eq!(c.initial(), 0);
        assert_eq!(c.transitions(), &[[0, 1], [1, 1]]);
        assert!(c.is_accepting(1));
    }
}
