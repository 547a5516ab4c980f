//! Human-readable dump of a procedure's transition system, one conjunct per
//! line. This backs the `--emit-ssa` output and is meant for eyeballing,
//! not for parsing back.

use std::fmt::Write;

use crate::logic::{BinOp, Term, TermKind};

use super::ProcedureTS;

pub fn print_ts(ts: &ProcedureTS) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "procedure {}", ts.name);
    let _ = writeln!(s, "  inputs:  {}", names(ts.inputs.iter().map(|v| v.name.as_ref())));
    let _ = writeln!(s, "  outputs: {}", names(ts.outputs.iter().map(|v| v.name.as_ref())));
    let _ = writeln!(s, "  state:   {}", names(ts.state.iter().map(|(c, _)| c.name.as_ref())));
    for section in [("init", &ts.init), ("trans", &ts.trans), ("out", &ts.out)] {
        let _ = writeln!(s, "{}:", section.0);
        for c in conjuncts(section.1) {
            let _ = writeln!(s, "  {c}");
        }
    }
    for l in &ts.loops {
        let _ = writeln!(
            s,
            "loop {}: select {}, guard {}, cond {}, head {}",
            l.index,
            l.select.name,
            l.guard.0.name,
            l.cond,
            names(l.head.iter().map(|(c, _)| c.name.as_ref())),
        );
    }
    for c in &ts.calls {
        let _ = writeln!(
            s,
            "call site {} -> {}: {} occurrence(s)",
            c.site,
            c.callee,
            c.instances.len()
        );
    }
    s
}

fn names<'a>(it: impl Iterator<Item = &'a str>) -> String {
    let v: Vec<&str> = it.collect();
    if v.is_empty() {
        "-".to_string()
    } else {
        v.join(", ")
    }
}

fn conjuncts(t: &Term) -> Vec<Term> {
    let mut out = Vec::new();
    collect(t, &mut out);
    out
}

fn collect(t: &Term, out: &mut Vec<Term>) {
    match t.kind() {
        TermKind::Binary(BinOp::And, a, b) if t.width() == 1 => {
            collect(a, out);
            collect(b, out);
        }
        _ => out.push(t.clone()),
    }
}
