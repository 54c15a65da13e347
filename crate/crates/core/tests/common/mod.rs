//! Independent oracles shared by the integration and acceptance tests. None of
//! them call the library code they are used to check.

#![allow(dead_code)]

use dfaforge::rnn::{encode, SecondOrderRnn};
use dfaforge::Dfa;
use rand::Rng;

/// A total DFA with `1..=max_states` states and uniformly random structure.
pub fn random_dfa<R: Rng>(rng: &mut R, max_states: usize) -> Dfa {
    let n = rng.random_range(1..=max_states);
    let delta: Vec<[usize; 2]> = (0..n)
        .map(|_| [rng.random_range(0..n), rng.random_range(0..n)])
        .collect();
    let accepting: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    Dfa::from_flags(rng.random_range(0..n), accepting, delta).unwrap()
}

fn reachable(dfa: &Dfa) -> Vec<usize> {
    let mut seen = vec![false; dfa.num_states()];
    let mut stack = vec![dfa.initial()];
    seen[dfa.initial()] = true;
    let mut out = Vec::new();
    while let Some(s) = stack.pop() {
        out.push(s);
        for a in 0..2 {
            let t = dfa.next(s, a);
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Number of Myhill-Nerode classes among reachable states, by table filling.
pub fn myhill_nerode_classes(dfa: &Dfa) -> usize {
    let states = reachable(dfa);
    let m = states.len();
    let mut pos = vec![usize::MAX; dfa.num_states()];
    for (i, &s) in states.iter().enumerate() {
        pos[s] = i;
    }
    let mut distinct = vec![vec![false; m]; m];
    for i in 0..m {
        for j in 0..m {
            distinct[i][j] = dfa.is_accepting(states[i]) != dfa.is_accepting(states[j]);
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..m {
            for j in 0..m {
                if distinct[i][j] {
                    continue;
                }
                for a in 0..2 {
                    let (p, q) = (pos[dfa.next(states[i], a)], pos[dfa.next(states[j], a)]);
                    if distinct[p][q] {
                        distinct[i][j] = true;
                        changed = true;
                        break;
                    }
                }
            }
        }
    }
    // count class representatives: states not equivalent to any earlier state
    (0..m).filter(|&i| (0..i).all(|j| distinct[i][j])).count()
}

/// Runs the automaton by hand, without the library's runner.
pub fn run(dfa: &Dfa, s: &str) -> bool {
    let mut q = dfa.initial();
    for b in s.bytes() {
        q = dfa.transitions()[q][(b - b'0') as usize];
    }
    dfa.accepting_flags()[q]
}

/// Every binary string of exactly `len` symbols, in lexicographic order.
pub fn strings_of_len(len: usize) -> impl Iterator<Item = String> {
    (0u64..1 << len).map(move |v| {
        (0..len)
            .map(|i| if v >> (len - 1 - i) & 1 == 1 { '1' } else { '0' })
            .collect()
    })
}

pub fn brute_force_count(dfa: &Dfa, len: usize) -> u64 {
    strings_of_len(len).filter(|s| run(dfa, s)).count() as u64
}

/// Squared-error loss of one string, from a plain forward pass.
pub fn forward_loss(rnn: &SecondOrderRnn, s: &str, label: bool) -> f64 {
    let n = rnn.hidden_size();
    let mut h = rnn.h_init().to_vec();
    for k in encode(s).unwrap() {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let z: f64 = (0..n).map(|j| rnn.weight(i, j, k) * h[j]).sum();
                1.0 / (1.0 + (-z).exp())
            })
            .collect();
        h = next;
    }
    let y = if label { 1.0 } else { 0.0 };
    0.5 * (y - h[0]) * (y - h[0])
}

/// Central-difference gradient in the library's weight order.
pub fn numeric_gradient(rnn: &SecondOrderRnn, s: &str, label: bool, eps: f64) -> Vec<f64> {
    let n = rnn.hidden_size();
    let l = rnn.input_size();
    let mut out = Vec::with_capacity(n * n * l);
    let mut probe = rnn.clone();
    for k in 0..l {
        for i in 0..n {
            for j in 0..n {
                let w = rnn.weight(i, j, k);
                probe.set_weight(i, j, k, w + eps);
                let up = forward_loss(&probe, s, label);
                probe.set_weight(i, j, k, w - eps);
                let down = forward_loss(&probe, s, label);
                probe.set_weight(i, j, k, w);
                out.push((up - down) / (2.0 * eps));
            }
        }
    }
    out
}

/// `|a - b| / (|a| + |b|)` over whole vectors; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na + nb == 0.0 {
        0.0
    } else {
        diff / (na + nb)
    }
}

#[derive(Debug, PartialEq)]
pub enum DotStmt {
    Node { id: String, attrs: Vec<(String, String)> },
    Edge { from: String, to: String, attrs: Vec<(String, String)> },
    Assign { key: String, value: String },
}

/// Parses the subset of Graphviz DOT used by the exporter: one `digraph NAME {`
/// header, statements terminated by `;`, and a closing `}`.
pub fn parse_dot(text: &str) -> Result<Vec<DotStmt>, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or("empty")?;
    let name = header
        .strip_prefix("digraph ")
        .and_then(|r| r.strip_suffix(" {"))
        .ok_or(format!("bad header {header:?}"))?;
    if !is_id(name) {
        return Err(format!("bad graph name {name:?}"));
    }
    let body: Vec<&str> = lines.collect();
    let (last, stmts) = body.split_last().ok_or("missing body")?;
    if *last != "}" {
        return Err(format!("missing closing brace, got {last:?}"));
    }
    stmts.iter().map(|l| parse_stmt(l)).collect()
}

fn is_id(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_value(v: &str) -> Result<String, String> {
    if let Some(inner) = v.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        if inner.contains('"') {
            return Err(format!("unescaped quote in {v:?}"));
        }
        Ok(inner.to_string())
    } else if is_id(v) || v.parse::<f64>().is_ok() {
        Ok(v.to_string())
    } else {
        Err(format!("bad value {v:?}"))
    }
}

fn parse_attrs(s: &str) -> Result<Vec<(String, String)>, String> {
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or(format!("bad attribute list {s:?}"))?;
    inner
        .split(", ")
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or(format!("bad attribute {kv:?}"))?;
            if !is_id(k) {
                return Err(format!("bad attribute name {k:?}"));
            }
            Ok((k.to_string(), parse_value(v)?))
        })
        .collect()
}

fn parse_stmt(line: &str) -> Result<DotStmt, String> {
    let s = line
        .strip_suffix(';')
        .ok_or(format!("statement without ';': {line:?}"))?;
    let (head, attrs) = match s.find(" [") {
        Some(i) => (&s[..i], parse_attrs(&s[i + 1..])?),
        None => (s, Vec::new()),
    };
    if let Some((from, to)) = head.split_once(" -> ") {
        if !is_id(from) || !is_id(to) {
            return Err(format!("bad edge {head:?}"));
        }
        return Ok(DotStmt::Edge {
            from: from.into(),
            to: to.into(),
            attrs,
        });
    }
    if let Some((k, v)) = head.split_once('=') {
        if !attrs.is_empty() || !is_id(k) {
            return Err(format!("bad assignment {head:?}"));
        }
        return Ok(DotStmt::Assign {
            key: k.into(),
            value: parse_value(v)?,
        });
    }
    if !is_id(head) {
        return Err(format!("bad node id {head:?}"));
    }
    Ok(DotStmt::Node {
        id: head.into(),
        attrs,
    })
}

/// A second-order network that runs `dfa` exactly: neuron 0 marks the start,
/// neuron `1 + q` is one-hot for state `q`, and every weight is `±gain`.
pub fn rnn_from_dfa(dfa: &Dfa, gain: f64) -> SecondOrderRnn {
    let n = dfa.num_states() + 1;
    let mut rnn = SecondOrderRnn::zeros(SecondOrderRnn::default_h_init(n)).unwrap();
    // source neuron j stands for state `at(j)`
    let at = |j: usize| if j == 0 { dfa.initial() } else { j - 1 };
    for j in 0..n {
        let q = at(j);
        for k in 0..2 {
            let target = 1 + dfa.transitions()[q][k];
            for i in 0..n {
                rnn.set_weight(i, j, k, if i == target { gain } else { -gain });
            }
        }
        for i in 0..n {
            let on = i == 0 && dfa.accepting_flags()[q];
            rnn.set_weight(i, j, 2, if on { gain } else { -gain });
        }
    }
    rnn
}

/// Lengths of the maximal runs of equal symbols, with the symbol of each run.
fn runs(s: &str) -> Vec<(u8, usize)> {
    let mut out: Vec<(u8, usize)> = Vec::new();
    for b in s.bytes() {
        match out.last_mut() {
            Some((c, n)) if *c == b => *n += 1,
            _ => out.push((b, 1)),
        }
    }
    out
}

/// Tomita membership written straight from the grammar descriptions.
pub fn tomita(g: u8, s: &str) -> bool {
    let zeros = s.bytes().filter(|&b| b == b'0').count() as i64;
    let ones = s.len() as i64 - zeros;
    match g {
        1 => zeros == 0,
        2 => s == "10".repeat(s.len() / 2),
        3 => runs(s)
            .windows(2)
            .all(|w| !(w[0].0 == b'1' && w[0].1 % 2 == 1 && w[1].0 == b'0' && w[1].1 % 2 == 1)),
        4 => !s.contains("000"),
        5 => zeros % 2 == 0 && ones % 2 == 0,
        6 => (zeros - ones) % 3 == 0,
        7 => {
            // 0*1*0*1* has at most four runs, the first of them zeros
            let r = runs(s);
            let padded = r.len() + usize::from(r.first().is_some_and(|x| x.0 == b'1'));
            padded <= 4
        }
        _ => panic!("no grammar {g}"),
    }
}
