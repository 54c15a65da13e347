use std::fmt::Write;

use super::dfa::Dfa;

/// Renders `dfa` in Graphviz DOT.
///
/// The initial state gets an entry arrow from an invisible point node,
/// accepting states are double circles, symbol-0 edges are dotted and
/// symbol-1 edges solid.
pub fn to_dot(dfa: &Dfa) -> String {
    let mut out = String::new();
    out.push_str("digraph dfa {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  __start [shape=point];\n");
    for s in 0..dfa.num_states() {
        let shape = if dfa.is_accepting(s) {
            "doublecircle"
        } else {
            "circle"
        };
        writeln!(out, "  q{s} [shape={shape}, label=\"{s}\"];").unwrap();
    }
    writeln!(out, "  __start -> q{};", dfa.initial()).unwrap();
    for (s, row) in dfa.transitions().iter().enumerate() {
        for (a, t) in row.iter().enumerate() {
            let style = if a == 0 { "dotted" } else { "solid" };
            writeln!(out, "  q{s} -> q{t} [label=\"{a}\", style={style}];").unwrap();
        }
    }
    out.push_str("}\n");
    out
}
