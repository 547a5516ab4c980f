//! Counterexample-guided synthesis of lexicographic linear ranking
//! functions, one per loop cutpoint.
//!
//! The loop alternates two solver queries. The verification query asks for
//! a step of some loop that is followed by another iteration of the same
//! loop yet violates the current candidate ranking; a model is a
//! counterexample transition. The synthesis query solves for symbolic
//! coefficients making every counterexample collected so far decrease
//! lexicographically, trying small coefficient ranges first. When no
//! coefficients exist the component count grows, up to the configured
//! maximum. Ranking arithmetic runs at an extended width so coefficient
//! products cannot wrap; disabling that extension is deliberately unsound
//! and only exists to demonstrate it is load-bearing.

use std::collections::HashMap;

use crate::logic::{BinOp, BitVec, SatResult, Sign, Term, VarRef};
use crate::ssa::ProcedureTS;

use super::{CoeffRange, SynthCtx};

/// One component of a lexicographic ranking function: an affine expression
/// over the loop's numeric head variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankComponent {
    pub coeffs: Vec<(String, i64)>,
    pub constant: i64,
}

impl RankComponent {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, c) in &self.coeffs {
            if *c == 0 {
                continue;
            }
            let mag = c.unsigned_abs();
            let join = match (out.is_empty(), *c < 0) {
                (true, false) => String::new(),
                (true, true) => "-".to_string(),
                (false, false) => " + ".to_string(),
                (false, true) => " - ".to_string(),
            };
            out.push_str(&join);
            if mag != 1 {
                out.push_str(&format!("{mag}*"));
            }
            out.push_str(name);
        }
        if self.constant != 0 || out.is_empty() {
            if out.is_empty() {
                out.push_str(&self.constant.to_string());
            } else if self.constant < 0 {
                out.push_str(&format!(" - {}", -self.constant));
            } else {
                out.push_str(&format!(" + {}", self.constant));
            }
        }
        out
    }
}

/// Per-loop result of ranking synthesis. `None` means no ranking was found
/// within the bounds; an empty component list means the loop never needed
/// one (no repeatable step is reachable).
#[derive(Clone, Debug)]
pub struct LexRanking {
    pub loops: Vec<Option<Vec<RankComponent>>>,
}

impl LexRanking {
    pub fn is_complete(&self) -> bool {
        self.loops.iter().all(|l| l.is_some())
    }

    pub fn max_components(&self) -> usize {
        self.loops.iter().flatten().map(|c| c.len()).max().unwrap_or(0)
    }
}

/// Numeric (non-Boolean) head variables of one loop, with their source
/// names: the candidate ranking arguments.
fn rank_vars(ts: &ProcedureTS, i: usize) -> Vec<(VarRef, VarRef, String)> {
    ts.loops[i]
        .head
        .iter()
        .zip(&ts.loops[i].head_names)
        .filter(|((c, _), _)| c.width > 1)
        .map(|((c, n), name)| (c.clone(), n.clone(), name.clone()))
        .collect()
}

struct RankWidths {
    /// Width of the coefficient symbols.
    coeff: u32,
    /// Width at which ranking arithmetic is computed.
    rank: u32,
}

fn widths(vars: &[(VarRef, VarRef, String)], width_extension: bool) -> RankWidths {
    let vw = vars.iter().map(|(c, _, _)| c.width).max().unwrap_or(2);
    if !width_extension {
        return RankWidths { coeff: vw, rank: vw };
    }
    let coeff = (vw + 2).min(20);
    let terms = vars.len() as u32 + 1;
    let log = 32 - terms.leading_zeros();
    RankWidths { coeff: coeff.min(20), rank: (vw + coeff + log + 1).min(crate::logic::bitvec::MAX_WIDTH) }
}

/// `Σ coeff_k · val_k + constant` at the ranking width.
fn rank_expr(coeffs: &[Term], constant: &Term, vals: &[Term], signs: &[Sign], w: &RankWidths) -> Term {
    let mut acc = Term::cast(constant.clone(), w.rank, true);
    for ((c, v), s) in coeffs.iter().zip(vals).zip(signs) {
        let prod = Term::binary(
            BinOp::Mul,
            Term::cast(c.clone(), w.rank, true),
            Term::cast(v.clone(), w.rank, *s == Sign::Signed),
        );
        acc = Term::binary(BinOp::Add, acc, prod);
    }
    acc
}

fn lt(a: Term, b: Term) -> Term {
    Term::binary(BinOp::Slt, a, b)
}

fn le(a: Term, b: Term) -> Term {
    Term::binary(BinOp::Sle, a, b)
}

/// Lexicographic ranking condition over paired (current, next) component
/// values: some component is positive and strictly decreases while all
/// earlier ones do not increase.
fn lex_condition(pairs: &[(Term, Term)], rank_width: u32) -> Term {
    let zero = Term::iconst(rank_width, 0);
    let mut branches = Vec::new();
    for k in 0..pairs.len() {
        let mut conj: Vec<Term> =
            pairs[..k].iter().map(|(cur, nxt)| le(nxt.clone(), cur.clone())).collect();
        let (cur, nxt) = &pairs[k];
        conj.push(lt(zero.clone(), cur.clone()));
        conj.push(lt(nxt.clone(), cur.clone()));
        branches.push(Term::and_all(conj));
    }
    Term::or_all(branches)
}

/// The ranking condition of loop `i` as a formula over its current and
/// primed head variables.
pub fn lr_formula(
    ts: &ProcedureTS,
    i: usize,
    comps: &[RankComponent],
    width_extension: bool,
) -> Term {
    if comps.is_empty() {
        return Term::ff();
    }
    let vars = rank_vars(ts, i);
    let w = widths(&vars, width_extension);
    let signs: Vec<Sign> = vars.iter().map(|(c, _, _)| c.sign).collect();
    let by_name: HashMap<&str, usize> =
        vars.iter().enumerate().map(|(j, (_, _, n))| (n.as_str(), j)).collect();
    let cur_vals: Vec<Term> = vars.iter().map(|(c, _, _)| Term::var_ref(c.clone())).collect();
    let nxt_vals: Vec<Term> = vars.iter().map(|(_, n, _)| Term::var_ref(n.clone())).collect();
    let pairs: Vec<(Term, Term)> = comps
        .iter()
        .map(|comp| {
            let mut coeffs = vec![Term::iconst(w.coeff, 0); vars.len()];
            for (name, c) in &comp.coeffs {
                if let Some(&j) = by_name.get(name.as_str()) {
                    coeffs[j] = Term::iconst(w.coeff, *c);
                }
            }
            let k = Term::iconst(w.coeff, comp.constant);
            (
                rank_expr(&coeffs, &k, &cur_vals, &signs, &w),
                rank_expr(&coeffs, &k, &nxt_vals, &signs, &w),
            )
        })
        .collect();
    lex_condition(&pairs, w.rank)
}

/// Disjunction of ranking-violating repeatable steps: for each loop, the
/// loop advances into a state that could iterate again while the loop's
/// ranking condition fails. Loops without a ranking contribute every
/// repeatable step.
pub fn ranking_bad(ts: &ProcedureTS, r: &LexRanking, width_extension: bool) -> Term {
    let prime = ts.prime_map();
    let mut dis = Vec::new();
    for (i, l) in ts.loops.iter().enumerate() {
        let repeat = Term::and(Term::var_ref(l.select.clone()), l.cond.substitute(&prime));
        let lr = match &r.loops[i] {
            Some(comps) => lr_formula(ts, i, comps, width_extension),
            None => Term::ff(),
        };
        dis.push(Term::and(repeat, Term::not(lr)));
    }
    Term::or_all(dis)
}

struct LoopSearch {
    vars: Vec<(VarRef, VarRef, String)>,
    w: RankWidths,
    /// Counterexample steps: (current, next) values per ranking variable.
    cexs: Vec<(Vec<BitVec>, Vec<BitVec>)>,
    ncomp: usize,
    comps: Vec<RankComponent>,
    failed: bool,
}

/// Synthesise one lexicographic ranking per loop, valid for every
/// execution satisfying `extra` (invariant, summaries, contexts). A
/// complete result is re-validated in a fresh solver session before being
/// returned.
pub fn comp_term_arg(ts: &ProcedureTS, extra: &Term, ctx: &SynthCtx) -> LexRanking {
    let nloops = ts.loops.len();
    if nloops == 0 {
        return LexRanking { loops: vec![] };
    }
    let base = Term::and_all([
        extra.clone(),
        ts.trans.clone(),
        ts.assumptions.clone(),
        ts.assertions.clone(),
    ]);
    let width_extension = ctx.bounds.width_extension;
    let mut s = ctx.session();
    s.assert_term(&base);

    let mut loops: Vec<LoopSearch> = (0..nloops)
        .map(|i| {
            let vars = rank_vars(ts, i);
            let w = widths(&vars, width_extension);
            LoopSearch { vars, w, cexs: Vec::new(), ncomp: 1, comps: Vec::new(), failed: false }
        })
        .collect();
    let prime = ts.prime_map();
    let violation = |loops: &[LoopSearch]| -> Term {
        Term::or_all(ts.loops.iter().enumerate().filter(|(i, _)| !loops[*i].failed).map(
            |(i, l)| {
                let lr = lr_formula(ts, i, &loops[i].comps, width_extension);
                Term::and_all([
                    Term::var_ref(l.select.clone()),
                    l.cond.substitute(&prime),
                    Term::not(lr),
                ])
            },
        ))
    };

    let mut budget =
        ctx.bounds.max_iter as usize * nloops * ctx.bounds.max_lex.max(1) as usize + 8;
    let mut proven = false;
    while budget > 0 {
        budget -= 1;
        if ctx.out_of_time() {
            break;
        }
        if loops.iter().all(|l| l.failed) {
            break;
        }
        let act = s.activation();
        s.assert_under(act, &violation(&loops));
        match s.check(&[act]) {
            SatResult::Unsat => {
                proven = true;
                break;
            }
            SatResult::Unknown => break,
            SatResult::Sat => {}
        }
        // Exactly one loop advanced in the model.
        let Some(i) = (0..nloops)
            .find(|&i| !loops[i].failed && s.model_of(&ts.loops[i].select).is_true())
        else {
            break;
        };
        let cur: Vec<BitVec> = loops[i].vars.iter().map(|(c, _, _)| s.model_of(c)).collect();
        let nxt: Vec<BitVec> = loops[i].vars.iter().map(|(_, n, _)| s.model_of(n)).collect();
        loops[i].cexs.push((cur, nxt));
        loop {
            match solve_coeffs(&loops[i], ctx) {
                Some(comps) => {
                    loops[i].comps = comps;
                    break;
                }
                None => {
                    loops[i].ncomp += 1;
                    if loops[i].ncomp > ctx.bounds.max_lex as usize {
                        loops[i].failed = true;
                        loops[i].comps.clear();
                        break;
                    }
                }
            }
        }
    }

    if proven && loops.iter().all(|l| !l.failed) {
        // Re-validate the witness from scratch: the defining implication
        // must be unsatisfiable in a session that shares no state with the
        // search.
        let mut fresh = ctx.session();
        fresh.assert_term(&base);
        let act = fresh.activation();
        fresh.assert_under(act, &violation(&loops));
        if !matches!(fresh.check(&[act]), SatResult::Unsat) {
            for l in &mut loops {
                l.failed = true;
            }
            proven = false;
        }
    }

    LexRanking {
        loops: loops
            .into_iter()
            .map(|l| if l.failed || !proven { None } else { Some(l.comps) })
            .collect(),
    }
}

/// Solve for coefficients making every collected counterexample of one
/// loop decrease lexicographically, trying each coefficient range of the
/// schedule in turn.
fn solve_coeffs(l: &LoopSearch, ctx: &SynthCtx) -> Option<Vec<RankComponent>> {
    if l.cexs.is_empty() {
        return Some(l.comps.clone());
    }
    let signs: Vec<Sign> = l.vars.iter().map(|(c, _, _)| c.sign).collect();
    let coeff_vars: Vec<Vec<VarRef>> = (0..l.ncomp)
        .map(|k| {
            (0..=l.vars.len())
                .map(|j| VarRef {
                    name: format!("$rk{k}_{j}").into(),
                    width: l.w.coeff,
                    sign: Sign::Signed,
                })
                .collect()
        })
        .collect();
    let mut s = ctx.session();
    for (ci, cj) in &l.cexs {
        let cur_vals: Vec<Term> = ci.iter().map(|b| Term::constant(*b)).collect();
        let nxt_vals: Vec<Term> = cj.iter().map(|b| Term::constant(*b)).collect();
        let pairs: Vec<(Term, Term)> = coeff_vars
            .iter()
            .map(|cv| {
                let coeffs: Vec<Term> =
                    cv[..l.vars.len()].iter().map(|v| Term::var_ref(v.clone())).collect();
                let k = Term::var_ref(cv[l.vars.len()].clone());
                (
                    rank_expr(&coeffs, &k, &cur_vals, &signs, &l.w),
                    rank_expr(&coeffs, &k, &nxt_vals, &signs, &l.w),
                )
            })
            .collect();
        s.assert_term(&lex_condition(&pairs, l.w.rank));
    }
    for stage in &ctx.bounds.coeff_schedule {
        let act = s.activation();
        if let CoeffRange::Limit(a) = stage {
            let lim = Term::and_all(coeff_vars.iter().flatten().map(|v| {
                Term::and(
                    le(Term::iconst(l.w.coeff, -*a), Term::var_ref(v.clone())),
                    le(Term::var_ref(v.clone()), Term::iconst(l.w.coeff, *a)),
                )
            }));
            s.assert_under(act, &lim);
        }
        match s.check(&[act]) {
            SatResult::Sat => {
                let comps = coeff_vars
                    .iter()
                    .map(|cv| RankComponent {
                        coeffs: l
                            .vars
                            .iter()
                            .zip(cv)
                            .map(|((_, _, n), v)| (n.clone(), s.model_of(v).to_i64()))
                            .collect(),
                        constant: s.model_of(&cv[l.vars.len()]).to_i64(),
                    })
                    .collect();
                return Some(comps);
            }
            SatResult::Unsat | SatResult::Unknown => continue,
        }
    }
    None
}
