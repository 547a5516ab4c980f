//! Exhaustive-state termination oracle.
//!
//! Runs a program concretely on every input valuation at a small bit-width
//! and decides, per input, whether every execution terminates. `nondet()`
//! fans out; divergence is a reachable cycle among a loop's head states (or
//! a diverging inner execution). Used as ground truth in tests; the
//! analyzer never calls this.

use std::collections::{BTreeMap, BTreeSet};

use crate::frontend::ast::*;
use crate::logic::BitVec;

/// Cumulative cap on explored loop-head states and call frames.
const STATE_LIMIT: u64 = 1 << 24;

#[derive(Debug, Clone, thiserror::Error)]
pub enum OracleError {
    #[error("state-space guard exceeded ({0} states)")]
    StateSpace(u64),
    #[error("oracle width {0} too large (max 6)")]
    Width(u32),
}

/// Per-input verdicts over the entry procedure's input space (parameters
/// followed by uninitialized globals, in order).
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub input_names: Vec<String>,
    /// One entry per input valuation: the values and whether every
    /// execution from them terminates.
    pub verdicts: Vec<(Vec<u64>, bool)>,
}

impl OracleResult {
    pub fn terminating(&self) -> Vec<&Vec<u64>> {
        self.verdicts.iter().filter(|(_, t)| *t).map(|(v, _)| v).collect()
    }

    pub fn all_terminate(&self) -> bool {
        self.verdicts.iter().all(|(_, t)| *t)
    }

    pub fn all_diverge(&self) -> bool {
        self.verdicts.iter().all(|(_, t)| !*t)
    }
}

type Env = BTreeMap<String, u64>;

struct Interp<'a> {
    program: &'a Program,
    states: u64,
}

/// All ways a block can finish: fall through with an environment, return
/// from the procedure, or admit at least one diverging execution.
#[derive(Default)]
struct Outcomes {
    fall: BTreeSet<Env>,
    ret: BTreeSet<(Env, Option<u64>)>,
    diverged: bool,
}

pub fn oracle(p: &Program) -> Result<OracleResult, OracleError> {
    let entry = p.procedure(&p.entry).expect("entry exists");
    let widest = entry
        .params
        .iter()
        .map(|(_, t)| t.width)
        .chain(p.globals.iter().map(|g| g.ty.width))
        .max()
        .unwrap_or(1);
    if widest > 6 {
        return Err(OracleError::Width(widest));
    }

    let mut input_names: Vec<String> = entry.params.iter().map(|(n, _)| n.clone()).collect();
    let mut spaces: Vec<Vec<u64>> =
        entry.params.iter().map(|(_, t)| (0..1u64 << t.width).collect()).collect();
    for g in &p.globals {
        if g.init.is_none() {
            input_names.push(g.name.clone());
            spaces.push((0..1u64 << g.ty.width).collect());
        }
    }

    let mut interp = Interp { program: p, states: 0 };
    let mut verdicts = Vec::new();
    let mut cursor = vec![0usize; spaces.len()];
    loop {
        let values: Vec<u64> = cursor.iter().zip(&spaces).map(|(i, s)| s[*i]).collect();
        let mut env: Env = Env::new();
        for (n, v) in input_names.iter().zip(&values) {
            env.insert(n.clone(), *v);
        }
        for g in &p.globals {
            if let Some(v) = g.init {
                env.insert(g.name.clone(), BitVec::new(g.ty.width, v).to_u64());
            }
        }
        let out = interp.call_body(entry, env)?;
        verdicts.push((values, !out.diverged));

        let mut k = 0;
        while k < cursor.len() {
            cursor[k] += 1;
            if cursor[k] < spaces[k].len() {
                break;
            }
            cursor[k] = 0;
            k += 1;
        }
        if k == cursor.len() {
            break;
        }
    }
    Ok(OracleResult { input_names, verdicts })
}

impl<'a> Interp<'a> {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.states += 1;
        if self.states > STATE_LIMIT {
            return Err(OracleError::StateSpace(self.states));
        }
        Ok(())
    }

    fn call_body(&mut self, proc: &ProcedureAST, env: Env) -> Result<Outcomes, OracleError> {
        self.tick()?;
        self.block(&proc.body, env)
    }

    fn block(&mut self, stmts: &[Stmt], env: Env) -> Result<Outcomes, OracleError> {
        let mut cur = Outcomes::default();
        cur.fall.insert(env);
        for s in stmts {
            let mut next = Outcomes { fall: BTreeSet::new(), ret: cur.ret, diverged: cur.diverged };
            for env in cur.fall {
                let o = self.stmt(s, env)?;
                next.fall.extend(o.fall);
                next.ret.extend(o.ret);
                next.diverged |= o.diverged;
            }
            cur = next;
            if cur.fall.is_empty() {
                break;
            }
        }
        Ok(cur)
    }

    fn stmt(&mut self, s: &Stmt, env: Env) -> Result<Outcomes, OracleError> {
        let mut out = Outcomes::default();
        match s {
            Stmt::Decl { name, ty, init, .. } => match init {
                Some(e) if split_call(e).is_some() => {
                    self.assign_call(name, e, &env, &mut out)?;
                }
                Some(e) => {
                    for (env, v) in self.eval(e, &env)? {
                        let mut env = env;
                        env.insert(name.clone(), v);
                        out.fall.insert(env);
                    }
                }
                None => {
                    // Uninitialized locals are nondeterministic.
                    for v in 0..1u64 << ty.width.min(6) {
                        let mut env = env.clone();
                        env.insert(name.clone(), v);
                        out.fall.insert(env);
                    }
                }
            },
            Stmt::Assign { name, expr, .. } if split_call(expr).is_some() => {
                self.assign_call(name, expr, &env, &mut out)?;
            }
            Stmt::Assign { name, expr, .. } => {
                for (env, v) in self.eval(expr, &env)? {
                    let mut env = env;
                    env.insert(name.clone(), v);
                    out.fall.insert(env);
                }
            }
            Stmt::Assume { cond, .. } => {
                // Executions violating an assumption just stop; they are
                // not counterexamples to termination.
                for (env, v) in self.eval(cond, &env)? {
                    if v != 0 {
                        out.fall.insert(env);
                    }
                }
            }
            Stmt::Assert { cond, .. } => {
                // Assertion-violating executions terminate (abort).
                for (env, v) in self.eval(cond, &env)? {
                    if v != 0 {
                        out.fall.insert(env);
                    }
                }
            }
            Stmt::Return { expr, .. } => match expr {
                Some(e) => {
                    for (env, v) in self.eval(e, &env)? {
                        out.ret.insert((env, Some(v)));
                    }
                }
                None => {
                    out.ret.insert((env, None));
                }
            },
            Stmt::If { cond, then_branch, else_branch, .. } => {
                for (env, v) in self.eval(cond, &env)? {
                    let o = if v != 0 {
                        self.block(then_branch, env)?
                    } else {
                        self.block(else_branch, env)?
                    };
                    out.fall.extend(o.fall);
                    out.ret.extend(o.ret);
                    out.diverged |= o.diverged;
                }
            }
            Stmt::While { cond, body, .. } => {
                let mut grey = BTreeSet::new();
                let mut black = BTreeSet::new();
                let o = self.loop_from(cond, body, env, &mut grey, &mut black)?;
                return Ok(o);
            }
            Stmt::CallStmt { call, .. } => {
                let ExprKind::Call { name, args } = &call.kind else { unreachable!() };
                for (env, vals) in self.eval_list(args, &env)? {
                    let o = self.do_call(name, &vals, env)?;
                    out.fall.extend(o.fall.into_iter().map(|(e, _)| e));
                    out.diverged |= o.diverged;
                }
            }
        }
        Ok(out)
    }

    /// `name = callee(args)` possibly under casts; divergence inside the
    /// callee and global writes both matter.
    fn assign_call(
        &mut self,
        name: &str,
        rhs: &Expr,
        env: &Env,
        out: &mut Outcomes,
    ) -> Result<(), OracleError> {
        let call = split_call(rhs).unwrap();
        let ExprKind::Call { name: callee, args } = &call.kind else { unreachable!() };
        for (env2, vals) in self.eval_list(args, env)? {
            let o = self.do_call(callee, &vals, env2)?;
            out.diverged |= o.diverged;
            for (mut env3, v) in o.fall {
                let v = v.expect("non-void callee in assignment");
                env3.insert(name.to_string(), apply_casts(v, call.ty, rhs));
                out.fall.insert(env3);
            }
        }
        Ok(())
    }

    /// DFS over the loop's head-state graph; a head state reachable from
    /// itself means an infinite execution exists.
    fn loop_from(
        &mut self,
        cond: &Expr,
        body: &[Stmt],
        env: Env,
        grey: &mut BTreeSet<Env>,
        black: &mut BTreeSet<Env>,
    ) -> Result<Outcomes, OracleError> {
        let mut out = Outcomes::default();
        if grey.contains(&env) {
            out.diverged = true;
            return Ok(out);
        }
        if black.contains(&env) {
            // Already fully explored on another path and found terminating;
            // its exits were collected there, nothing new on this path.
            return Ok(out);
        }
        self.tick()?;
        grey.insert(env.clone());
        for (env2, c) in self.eval(cond, &env)? {
            if c == 0 {
                out.fall.insert(env2);
                continue;
            }
            let o = self.block(body, env2)?;
            out.ret.extend(o.ret);
            out.diverged |= o.diverged;
            for succ in o.fall {
                let r = self.loop_from(cond, body, succ, grey, black)?;
                out.fall.extend(r.fall);
                out.ret.extend(r.ret);
                out.diverged |= r.diverged;
            }
        }
        grey.remove(&env);
        if !out.diverged {
            black.insert(env);
        }
        Ok(out)
    }

    /// Calls are big-step: run the callee body to completion, thread the
    /// globals back, collect return values.
    fn do_call(
        &mut self,
        name: &str,
        args: &[u64],
        caller_env: Env,
    ) -> Result<CallOutcomes, OracleError> {
        let callee = self.program.procedure(name).expect("known callee").clone();
        let mut env = Env::new();
        for ((pname, pty), v) in callee.params.iter().zip(args) {
            env.insert(pname.clone(), BitVec::new(pty.width, *v).to_u64());
        }
        for g in &self.program.globals {
            env.insert(g.name.clone(), caller_env[&g.name]);
        }
        let o = self.call_body(&callee, env)?;
        let mut out = CallOutcomes { fall: BTreeSet::new(), diverged: o.diverged };
        // Falling off the end of a non-void callee yields a nondet result.
        let fallthrough_vals: Vec<Option<u64>> = match callee.ret {
            Some(t) => (0..1u64 << t.width.min(6)).map(Some).collect(),
            None => vec![None],
        };
        for env in o.fall {
            for v in &fallthrough_vals {
                out.fall.insert((merge_globals(&caller_env, &env, self.program), *v));
            }
        }
        for (env, v) in o.ret {
            out.fall.insert((merge_globals(&caller_env, &env, self.program), v));
        }
        Ok(out)
    }

    fn eval_list(
        &mut self,
        exprs: &[Expr],
        env: &Env,
    ) -> Result<Vec<(Env, Vec<u64>)>, OracleError> {
        let mut acc: Vec<(Env, Vec<u64>)> = vec![(env.clone(), Vec::new())];
        for e in exprs {
            let mut next = Vec::new();
            for (env, vals) in acc {
                for (env2, v) in self.eval(e, &env)? {
                    let mut vals = vals.clone();
                    vals.push(v);
                    next.push((env2, vals));
                }
            }
            acc = next;
        }
        Ok(acc)
    }

    /// Evaluates an expression to all its possible values. The environment
    /// is threaded through because statement-position calls have been ruled
    /// out by the parser, so expressions cannot mutate it; it is still
    /// returned to keep the plumbing uniform.
    fn eval(&mut self, e: &Expr, env: &Env) -> Result<Vec<(Env, u64)>, OracleError> {
        let w = e.ty.width;
        let bv = |v: u64| BitVec::new(w, v);
        let res = match &e.kind {
            ExprKind::Num(n) => vec![bv(*n).to_u64()],
            ExprKind::Var(name) => vec![env[name]],
            ExprKind::Nondet => (0..1u64 << w.min(6)).collect(),
            ExprKind::Call { .. } => {
                unreachable!("calls are handled at statement level")
            }
            ExprKind::Unary { op, arg } => {
                let aw = arg.ty.width;
                self.eval(arg, env)?
                    .into_iter()
                    .map(|(_, a)| {
                        let a = BitVec::new(aw, a);
                        match op {
                            UnaryOp::Neg => a.neg().to_u64(),
                            UnaryOp::BitNot => a.not().to_u64(),
                            UnaryOp::LogNot => (a.to_u64() == 0) as u64,
                        }
                    })
                    .collect()
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let (lw, sign) = (lhs.ty.width, lhs.ty.sign);
                let rw = rhs.ty.width;
                let signed = sign == crate::logic::Sign::Signed && !lhs.ty.is_bool();
                let mut out = Vec::new();
                for (_, a) in self.eval(lhs, env)? {
                    for (_, b) in self.eval(rhs, env)? {
                        let a = BitVec::new(lw, a);
                        let b = BitVec::new(rw, b);
                        let v = match op {
                            BinaryOp::Add => a.add(b).to_u64(),
                            BinaryOp::Sub => a.sub(b).to_u64(),
                            BinaryOp::Mul => a.mul(b).to_u64(),
                            BinaryOp::Shl => a.shl(b).to_u64(),
                            BinaryOp::Shr => {
                                if signed {
                                    a.ashr(b).to_u64()
                                } else {
                                    a.lshr(b).to_u64()
                                }
                            }
                            BinaryOp::Lt => {
                                (if signed { a.slt(b) } else { a.ult(b) }) as u64
                            }
                            BinaryOp::Le => {
                                (if signed { a.sle(b) } else { a.ule(b) }) as u64
                            }
                            BinaryOp::Gt => {
                                (if signed { b.slt(a) } else { b.ult(a) }) as u64
                            }
                            BinaryOp::Ge => {
                                (if signed { b.sle(a) } else { b.ule(a) }) as u64
                            }
                            BinaryOp::Eq => (a.to_u64() == b.to_u64()) as u64,
                            BinaryOp::Ne => (a.to_u64() != b.to_u64()) as u64,
                            BinaryOp::BitAnd => a.and(b).to_u64(),
                            BinaryOp::BitXor => a.xor(b).to_u64(),
                            BinaryOp::BitOr => a.or(b).to_u64(),
                            BinaryOp::LogAnd => ((a.to_u64() != 0) && (b.to_u64() != 0)) as u64,
                            BinaryOp::LogOr => ((a.to_u64() != 0) || (b.to_u64() != 0)) as u64,
                        };
                        out.push(v);
                    }
                }
                out.sort_unstable();
                out.dedup();
                out
            }
            ExprKind::Ternary { cond, then_val, else_val } => {
                let mut out = Vec::new();
                for (_, c) in self.eval(cond, env)? {
                    let branch = if c != 0 { then_val } else { else_val };
                    for (_, v) in self.eval(branch, env)? {
                        out.push(v);
                    }
                }
                out.sort_unstable();
                out.dedup();
                out
            }
            ExprKind::Cast { arg } => {
                let (aw, sgn) = (arg.ty.width, arg.ty.sign);
                let se = sgn == crate::logic::Sign::Signed && !arg.ty.is_bool();
                self.eval(arg, env)?
                    .into_iter()
                    .map(|(_, a)| BitVec::new(aw, a).cast(w, se).to_u64())
                    .collect()
            }
        };
        Ok(res.into_iter().map(|v| (env.clone(), v)).collect())
    }

}

/// A call in assignment position, possibly under casts.
fn split_call(e: &Expr) -> Option<&Expr> {
    match &e.kind {
        ExprKind::Call { .. } => Some(e),
        ExprKind::Cast { arg } => split_call(arg),
        _ => None,
    }
}

fn apply_casts(v: u64, from: Type, rhs: &Expr) -> u64 {
    let mut chain = Vec::new();
    let mut cur = rhs;
    while let ExprKind::Cast { arg } = &cur.kind {
        chain.push(cur.ty);
        cur = arg;
    }
    let mut bv = BitVec::new(from.width, v);
    let mut from = from;
    for t in chain.into_iter().rev() {
        let se = from.sign == crate::logic::Sign::Signed && !from.is_bool();
        bv = bv.cast(t.width, se);
        from = t;
    }
    bv.to_u64()
}

struct CallOutcomes {
    fall: BTreeSet<(Env, Option<u64>)>,
    diverged: bool,
}

fn merge_globals(caller: &Env, callee: &Env, p: &Program) -> Env {
    let mut out = caller.clone();
    for g in &p.globals {
        out.insert(g.name.clone(), callee[&g.name]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, TypeWidths};

    fn run(src: &str, w: u32) -> OracleResult {
        let p = parse("t.mc", src, TypeWidths { int_width: w, char_width: w }).unwrap();
        oracle(&p).unwrap()
    }

    const FOO1: &str = "void foo1(unsigned n) { for (unsigned x = 0; x <= n; x = x + 1) { } }";

    #[test]
    fn foo1_diverges_only_at_max() {
        let r = run(FOO1, 4);
        assert_eq!(r.verdicts.len(), 16);
        for (v, t) in &r.verdicts {
            assert_eq!(*t, v[0] != 15, "n = {}", v[0]);
        }
    }

    #[test]
    fn foo1_width2_by_hand() {
        let r = run(FOO1, 2);
        for (v, t) in &r.verdicts {
            assert_eq!(*t, v[0] != 3, "n = {}", v[0]);
        }
    }

    #[test]
    fn foo2_wraps_to_termination() {
        let r = run("void foo2(unsigned x) { while (x >= 10) x = x + 1; }", 4);
        assert!(r.all_terminate());
    }

    #[test]
    fn while_true_diverges_everywhere() {
        let r = run("void spin(unsigned n) { while (1) { } }", 4);
        assert!(r.all_diverge());
    }

    #[test]
    fn nondet_loop_has_infinite_path() {
        let r = run("void m() { while (nondet()) { } }", 4);
        assert_eq!(r.verdicts.len(), 1);
        assert!(r.all_diverge());
    }

    #[test]
    fn assume_blocks_divergence() {
        let r = run(
            "void m(unsigned n) { assume(n < 15); for (unsigned x = 0; x <= n; x = x + 1) { } }",
            4,
        );
        assert!(r.all_terminate());
    }

    #[test]
    fn diverging_callee_under_guard() {
        let r = run(
            "void spin(int a) { while (1) { } }
             void main(int z) { if (z > 0) { spin(z); } }",
            4,
        );
        // Signed z > 0 means raw 1..=7 at width 4.
        for (v, t) in &r.verdicts {
            assert_eq!(*t, !(1..=7).contains(&v[0]), "z raw = {}", v[0]);
        }
    }

    #[test]
    fn globals_thread_through_calls() {
        let r = run(
            "unsigned g;
             void bump() { g = g + 2; }
             void main() { while (g != 0) { bump(); } }",
            3,
        );
        // Stepping by 2 mod 8 returns to 0 only from even starts.
        for (v, t) in &r.verdicts {
            assert_eq!(*t, v[0] % 2 == 0, "g = {}", v[0]);
        }
    }

    #[test]
    fn call_result_feeds_loop() {
        let r = run(
            "unsigned id(unsigned a) { return a; }
             void main(unsigned n) { unsigned m = id(n); while (m > 0) { m = m - 1; } }",
            3,
        );
        assert!(r.all_terminate());
    }

    #[test]
    fn width_restriction_consistency() {
        // Verdicts agree across widths for inputs below half range when all
        // reachable values stay below half range.
        let src = "void m(unsigned n) { while (n == 3) { } }";
        let wide = run(src, 4);
        let narrow = run(src, 3);
        for (v, t) in &narrow.verdicts {
            let (_, t4) = wide.verdicts.iter().find(|(w, _)| w == v).unwrap();
            assert_eq!(t, t4);
        }
    }

    #[test]
    fn width_guard_rejected() {
        let p = parse("t.mc", FOO1, TypeWidths { int_width: 8, char_width: 8 }).unwrap();
        assert!(matches!(oracle(&p), Err(OracleError::Width(8))));
    }
}
