//! Extraction of the symbolic transition system from a normalized AST.
//!
//! The state vector packs the whole procedure: frozen input copies, an
//! entry guard, one phi per variable in scope at every loop head plus a
//! reachability guard per loop, and an exit guard with output snapshots.
//!
//! `init` binds the input copies, asserts the entry guard and derives every
//! loop head's first-arrival values (and the exit state reachable without
//! iterating) by symbolically executing the body once. `trans` advances
//! exactly one cutpoint per step, chosen by a free loop-select Boolean:
//! the stepped loop's phis move across its back edge, everything upstream
//! is framed, and everything downstream (inner loops included) is
//! re-derived from the stepped values, so the exit snapshot always holds
//! the outputs the procedure would produce if all remaining loops finished
//! with their current values. `out` just reads the snapshot under the exit
//! guard.

use std::collections::HashMap;

use crate::frontend::ast::*;
use crate::frontend::normalize::RET_VAR;
use crate::logic::{BinOp as LB, Sign, Term, UnOp as LU, VarRef};

use super::{CallInstance, CallSite, LoopInfo, Place, ProcedureTS};

pub fn encode(program: &Program, proc: &ProcedureAST) -> ProcedureTS {
    Enc::new(program, proc).run()
}

/// Statement tree with loop and call-site identities resolved up front so
/// every formula pass sees the same numbering.
enum EStmt<'a> {
    Decl { name: &'a str, ty: Type, init: Option<&'a Expr> },
    Assign { name: &'a str, expr: &'a Expr },
    AssignCall { name: &'a str, site: usize, call: &'a Expr, casts: Vec<Type> },
    CallOnly { site: usize, call: &'a Expr },
    Assume(&'a Expr),
    Assert(&'a Expr),
    If { cond: &'a Expr, then_b: Vec<EStmt<'a>>, else_b: Vec<EStmt<'a>> },
    Loop { id: usize, cond: &'a Expr, body: Vec<EStmt<'a>> },
}

struct LoopMeta {
    select: VarRef,
    guard: (VarRef, VarRef),
    /// (source name, current, next) in scope order.
    phis: Vec<(String, VarRef, VarRef)>,
}

#[derive(Clone)]
struct Env {
    vals: HashMap<String, Term>,
}

/// How a walk treats loop heads.
#[derive(Clone, Copy)]
enum Mode {
    /// Bind arrival state of every loop with id greater than the threshold;
    /// pass through the others via their (possibly framed) phis.
    Bind { threshold: i64 },
    /// Consume loops: assume they have exited and continue from their
    /// current phis. Used for the back-edge pass of an enclosing step.
    Consume,
}

struct Enc<'a> {
    program: &'a Program,
    proc: &'a ProcedureAST,
    counter: u32,
    loops: Vec<LoopMeta>,
    calls: Vec<CallSite>,
    copies: Vec<(VarRef, VarRef)>,
    entry_guard: (VarRef, VarRef),
    entry_select: VarRef,
    exit_guard: (VarRef, VarRef),
    snapshots: Vec<(VarRef, VarRef)>,
    inputs: Vec<VarRef>,
    outputs: Vec<VarRef>,
    /// Conjuncts of the formula currently being built.
    facts: Vec<Term>,
    assumes: Vec<Term>,
    asserts: Vec<Term>,
}

fn ty_ws(ty: Type) -> (u32, Sign) {
    if ty.is_bool() {
        (1, Sign::Unsigned)
    } else {
        (ty.width, ty.sign)
    }
}

fn primed(v: &VarRef) -> VarRef {
    VarRef { name: format!("{}'", v.name).into(), width: v.width, sign: v.sign }
}

fn pick<'v>(pair: &'v (VarRef, VarRef), p: bool) -> &'v VarRef {
    if p {
        &pair.1
    } else {
        &pair.0
    }
}

impl<'a> Enc<'a> {
    fn new(program: &'a Program, proc: &'a ProcedureAST) -> Self {
        Enc {
            program,
            proc,
            counter: 0,
            loops: Vec::new(),
            calls: Vec::new(),
            copies: Vec::new(),
            entry_guard: (VarRef { name: "".into(), width: 1, sign: Sign::Unsigned }, VarRef {
                name: "".into(),
                width: 1,
                sign: Sign::Unsigned,
            }),
            entry_select: VarRef { name: "".into(), width: 1, sign: Sign::Unsigned },
            exit_guard: (VarRef { name: "".into(), width: 1, sign: Sign::Unsigned }, VarRef {
                name: "".into(),
                width: 1,
                sign: Sign::Unsigned,
            }),
            snapshots: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            facts: Vec::new(),
            assumes: Vec::new(),
            asserts: Vec::new(),
        }
    }

    fn fresh(&mut self, base: &str, width: u32, sign: Sign) -> VarRef {
        let k = self.counter;
        self.counter += 1;
        VarRef { name: format!("{base}#{k}").into(), width, sign }
    }

    fn fresh_pair(&mut self, base: &str, width: u32, sign: Sign) -> (VarRef, VarRef) {
        let c = self.fresh(base, width, sign);
        let n = primed(&c);
        (c, n)
    }

    fn run(mut self) -> ProcedureTS {
        // Inputs: parameters, then every global.
        let mut scope: Vec<(String, Type)> = Vec::new();
        for (n, t) in &self.proc.params {
            scope.push((n.clone(), *t));
        }
        for g in &self.program.globals {
            scope.push((g.name.clone(), g.ty));
        }
        for (n, t) in &scope {
            let (w, s) = ty_ws(*t);
            self.inputs.push(VarRef { name: n.as_str().into(), width: w, sign: s });
        }
        for (n, t) in scope.clone() {
            let (w, s) = ty_ws(t);
            let c = self.fresh(&n, w, s);
            self.copies.push((VarRef { name: n.into(), width: w, sign: s }, c));
        }
        self.entry_guard = self.fresh_pair("g", 1, Sign::Unsigned);
        self.entry_select = self.fresh("ls", 1, Sign::Unsigned);

        // Shape pass: numbers loops and call sites, allocates their symbols.
        let body_ref: &'a [Stmt] = &self.proc.body;
        let tree = self.shape(body_ref, &mut scope);

        self.exit_guard = self.fresh_pair("g", 1, Sign::Unsigned);
        // Outputs: return value, then every global.
        if let Some(rt) = self.proc.ret {
            let (w, s) = ty_ws(rt);
            let name = format!("r${}", self.proc.name);
            self.outputs.push(VarRef { name: name.as_str().into(), width: w, sign: s });
            let snap = self.fresh(&name, w, s);
            self.snapshots.push((self.outputs[0].clone(), snap));
        }
        for g in &self.program.globals {
            let (w, s) = ty_ws(g.ty);
            let out = VarRef { name: format!("{}$out", g.name).into(), width: w, sign: s };
            self.outputs.push(out);
        }
        let glob_outs: Vec<VarRef> =
            self.outputs.iter().skip(self.snapshots.len()).cloned().collect();
        for (i, out) in glob_outs.iter().enumerate() {
            let snap = self.fresh(&self.program.globals[i].name, out.width, out.sign);
            self.snapshots.push((out.clone(), snap));
        }

        // Init: copies, entry guard, first-arrival state of every loop.
        self.facts.clear();
        for (input, copy) in self.copies.clone() {
            self.facts.push(Term::eq(Term::var_ref(copy), Term::var_ref(input)));
        }
        self.facts.push(Term::var_ref(self.entry_guard.0.clone()));
        let env0 = self.copy_env();
        let (env, guard) =
            self.walk(&tree, env0.clone(), Term::tt(), false, Mode::Bind { threshold: -1 }, Place::Init);
        self.bind_exit(&env, &guard, false);
        let init = Term::and_all(self.facts.drain(..).collect::<Vec<_>>());

        // Trans: one step per cutpoint, exactly one select true.
        let mut selects = vec![Term::var_ref(self.entry_select.clone())];
        for m in &self.loops {
            selects.push(Term::var_ref(m.select.clone()));
        }
        let mut trans_parts = vec![Term::or_all(selects.clone())];
        for i in 0..selects.len() {
            for j in i + 1..selects.len() {
                trans_parts
                    .push(Term::not(Term::and(selects[i].clone(), selects[j].clone())));
            }
        }
        for (_, copy) in &self.copies {
            trans_parts.push(Term::eq(Term::var_ref(primed(copy)), Term::var_ref(copy.clone())));
        }

        // Entry step: one-shot re-execution of the whole body.
        self.facts.clear();
        self.facts.push(Term::var_ref(self.entry_guard.0.clone()));
        self.facts.push(Term::not(Term::var_ref(self.entry_guard.1.clone())));
        let (env, guard) =
            self.walk(&tree, env0.clone(), Term::tt(), true, Mode::Bind { threshold: -1 }, Place::Trans);
        self.bind_exit(&env, &guard, true);
        let step0 = Term::and_all(self.facts.drain(..).collect::<Vec<_>>());
        trans_parts.push(Term::implies(Term::var_ref(self.entry_select.clone()), step0));

        for id in 0..self.loops.len() {
            self.facts.clear();
            let g_cur = Term::var_ref(self.loops[id].guard.0.clone());
            let cond = self.loop_cond(&tree, id, false);
            self.facts.push(g_cur.clone());
            self.facts.push(cond);
            // Back edge: run the body once from the current phis.
            let benv = self.phi_env(id, false);
            let bguard = Term::and(g_cur, self.loop_cond(&tree, id, false));
            let loop_body = find_loop(&tree, id).expect("loop id");
            let (back, _) = self.walk(loop_body, benv, bguard, false, Mode::Consume, Place::Trans);
            for (name, _, nxt) in self.loops[id].phis.clone() {
                let v = back.vals.get(&name).expect("phi in scope").clone();
                self.facts.push(Term::eq(Term::var_ref(nxt), v));
            }
            self.facts.push(Term::eq(
                Term::var_ref(self.loops[id].guard.1.clone()),
                Term::var_ref(self.loops[id].guard.0.clone()),
            ));
            self.facts.push(Term::not(Term::var_ref(self.entry_guard.1.clone())));
            // Upstream loops are framed; downstream state is re-derived from
            // the stepped values.
            for j in 0..id {
                for (_, cur, nxt) in self.loops[j].phis.clone() {
                    self.facts.push(Term::eq(Term::var_ref(nxt), Term::var_ref(cur)));
                }
                self.facts.push(Term::eq(
                    Term::var_ref(self.loops[j].guard.1.clone()),
                    Term::var_ref(self.loops[j].guard.0.clone()),
                ));
            }
            let (env, guard) = self.walk(
                &tree,
                env0.clone(),
                Term::tt(),
                true,
                Mode::Bind { threshold: id as i64 },
                Place::Trans,
            );
            self.bind_exit(&env, &guard, true);
            let step = Term::and_all(self.facts.drain(..).collect::<Vec<_>>());
            trans_parts
                .push(Term::implies(Term::var_ref(self.loops[id].select.clone()), step));
        }
        let trans = Term::and_all(trans_parts);

        // Out: read the snapshot under the exit guard.
        let mut out_parts = vec![Term::var_ref(self.exit_guard.0.clone())];
        for (out, snap) in &self.snapshots {
            out_parts.push(Term::eq(Term::var_ref(out.clone()), Term::var_ref(snap.clone())));
        }
        let out = Term::and_all(out_parts);

        // Assemble the state vector and per-loop metadata.
        let mut state: Vec<(VarRef, VarRef)> = Vec::new();
        for (_, copy) in &self.copies {
            state.push((copy.clone(), primed(copy)));
        }
        state.push(self.entry_guard.clone());
        let mut loop_infos = Vec::new();
        for (id, m) in self.loops.iter().enumerate() {
            for (_, cur, nxt) in &m.phis {
                state.push((cur.clone(), nxt.clone()));
            }
            state.push(m.guard.clone());
            loop_infos.push(LoopInfo {
                index: id,
                select: m.select.clone(),
                guard: m.guard.clone(),
                cond: Term::tt(), // patched below; needs the tree
                head: m.phis.iter().map(|(_, c, n)| (c.clone(), n.clone())).collect(),
                head_names: m.phis.iter().map(|(n, _, _)| n.clone()).collect(),
            });
        }
        for (id, info) in loop_infos.iter_mut().enumerate() {
            info.cond = self.loop_cond(&tree, id, false);
        }
        state.push(self.exit_guard.clone());
        for (_, snap) in &self.snapshots {
            state.push((snap.clone(), primed(snap)));
        }

        let input_copies = self
            .copies
            .iter()
            .zip(&self.inputs)
            .map(|((_, c), i)| (i.clone(), c.clone()))
            .collect();
        let out_snapshot =
            self.snapshots.iter().map(|(o, s)| (o.clone(), s.clone())).collect();
        ProcedureTS {
            name: self.proc.name.clone(),
            inputs: self.inputs,
            outputs: self.outputs,
            state,
            init,
            trans,
            out,
            loops: loop_infos,
            calls: self.calls,
            assumptions: Term::and_all(self.assumes),
            assertions: Term::and_all(self.asserts),
            input_copies,
            entry_select: self.entry_select,
            entry_guard: self.entry_guard,
            exit_guard: self.exit_guard,
            out_snapshot,
        }
    }

    fn copy_env(&self) -> Env {
        let vals = self
            .copies
            .iter()
            .map(|(i, c)| (i.name.to_string(), Term::var_ref(c.clone())))
            .collect();
        Env { vals }
    }

    fn phi_env(&self, id: usize, p: bool) -> Env {
        let vals = self.loops[id]
            .phis
            .iter()
            .map(|(n, c, x)| (n.clone(), Term::var_ref(if p { x.clone() } else { c.clone() })))
            .collect();
        Env { vals }
    }

    fn loop_cond(&mut self, tree: &[EStmt<'a>], id: usize, p: bool) -> Term {
        let cond = find_loop_cond(tree, id).expect("loop id");
        let env = self.phi_env(id, p);
        // Loop conditions are deterministic after normalization, so this
        // cannot allocate nondet symbols or call instances.
        self.tr(cond, &env, &Term::ff(), Place::Trans)
    }

    fn bind_exit(&mut self, env: &Env, guard: &Term, p: bool) {
        let gx = Term::var_ref(pick(&self.exit_guard, p).clone());
        self.facts.push(Term::eq(gx.clone(), guard.clone()));
        let ret_name = self.proc.ret.map(|_| RET_VAR.to_string());
        for (i, (_, snap)) in self.snapshots.clone().iter().enumerate() {
            let src = if i == 0 && ret_name.is_some() {
                RET_VAR.to_string()
            } else {
                let gi = i - ret_name.is_some() as usize;
                self.program.globals[gi].name.clone()
            };
            let val = env.vals.get(&src).expect("output in scope").clone();
            let snap = if p { primed(snap) } else { snap.clone() };
            self.facts.push(Term::implies(gx.clone(), Term::eq(Term::var_ref(snap), val)));
        }
    }

    // ---- shape pass ------------------------------------------------------

    fn shape(&mut self, stmts: &'a [Stmt], scope: &mut Vec<(String, Type)>) -> Vec<EStmt<'a>> {
        let mut out = Vec::new();
        for s in stmts {
            match s {
                Stmt::Decl { name, ty, init, .. } => {
                    scope.push((name.clone(), *ty));
                    match init.as_ref().and_then(peel_call) {
                        Some((call, casts)) => {
                            let site = self.new_site(call);
                            out.push(EStmt::AssignCall { name, site, call, casts });
                        }
                        None => out.push(EStmt::Decl { name, ty: *ty, init: init.as_ref() }),
                    }
                }
                Stmt::Assign { name, expr, .. } => match peel_call(expr) {
                    Some((call, casts)) => {
                        let site = self.new_site(call);
                        out.push(EStmt::AssignCall { name, site, call, casts });
                    }
                    None => out.push(EStmt::Assign { name, expr }),
                },
                Stmt::CallStmt { call, .. } => {
                    let site = self.new_site(call);
                    out.push(EStmt::CallOnly { site, call });
                }
                Stmt::Assume { cond, .. } => out.push(EStmt::Assume(cond)),
                Stmt::Assert { cond, .. } => out.push(EStmt::Assert(cond)),
                Stmt::If { cond, then_branch, else_branch, .. } => {
                    let mut ts = scope.clone();
                    let then_b = self.shape(then_branch, &mut ts);
                    let mut es = scope.clone();
                    let else_b = self.shape(else_branch, &mut es);
                    out.push(EStmt::If { cond, then_b, else_b });
                }
                Stmt::While { cond, body, .. } => {
                    let id = self.loops.len();
                    let mut phis = Vec::new();
                    self.loops.push(LoopMeta {
                        select: VarRef { name: "".into(), width: 1, sign: Sign::Unsigned },
                        guard: (
                            VarRef { name: "".into(), width: 1, sign: Sign::Unsigned },
                            VarRef { name: "".into(), width: 1, sign: Sign::Unsigned },
                        ),
                        phis: Vec::new(),
                    });
                    for (n, t) in scope.iter() {
                        let (w, s) = ty_ws(*t);
                        let c = self.fresh(n, w, s);
                        phis.push((n.clone(), c.clone(), primed(&c)));
                    }
                    let guard = self.fresh_pair("g", 1, Sign::Unsigned);
                    let select = self.fresh("ls", 1, Sign::Unsigned);
                    self.loops[id].phis = phis;
                    self.loops[id].guard = guard;
                    self.loops[id].select = select;
                    let mut bs = scope.clone();
                    let body = self.shape(body, &mut bs);
                    out.push(EStmt::Loop { id, cond, body });
                }
                Stmt::Return { .. } => unreachable!("normalized AST has no returns"),
            }
        }
        out
    }

    fn new_site(&mut self, call: &Expr) -> usize {
        let ExprKind::Call { name, .. } = &call.kind else { unreachable!() };
        let site = self.calls.len();
        self.calls.push(CallSite { callee: name.clone(), site, instances: Vec::new() });
        site
    }

    // ---- formula passes --------------------------------------------------

    /// Walks a block, producing facts into `self.facts`. Returns the
    /// environment and reachability guard after the block.
    fn walk(
        &mut self,
        block: &[EStmt<'a>],
        mut env: Env,
        mut guard: Term,
        p: bool,
        mode: Mode,
        place: Place,
    ) -> (Env, Term) {
        for s in block {
            match s {
                EStmt::Decl { name, ty, init } => {
                    let v = match init {
                        Some(e) => self.rvalue_plain(e, &env, &guard, place),
                        None => {
                            let (w, sg) = ty_ws(*ty);
                            Term::var_ref(self.fresh(name, w, sg))
                        }
                    };
                    env.vals.insert(name.to_string(), v);
                }
                EStmt::Assign { name, expr } => {
                    let v = self.rvalue_plain(expr, &env, &guard, place);
                    env.vals.insert(name.to_string(), v);
                }
                EStmt::AssignCall { name, site, call, casts } => {
                    let mut v = self
                        .do_call(*site, call, &mut env, &guard, place)
                        .expect("non-void callee in assignment");
                    let mut from = call.ty;
                    for t in casts {
                        let (w, _) = ty_ws(*t);
                        let sign_extend = from.sign == Sign::Signed && !from.is_bool();
                        v = Term::cast(v, w, sign_extend);
                        from = *t;
                    }
                    env.vals.insert(name.to_string(), v);
                }
                EStmt::CallOnly { site, call } => {
                    let _ = self.do_call(*site, call, &mut env, &guard, place);
                }
                EStmt::Assume(e) => {
                    let t = self.tr(e, &env, &guard, place);
                    let f = Term::implies(guard.clone(), t);
                    self.facts.push(f.clone());
                    self.assumes.push(f);
                }
                EStmt::Assert(e) => {
                    let t = self.tr(e, &env, &guard, place);
                    let f = Term::implies(guard.clone(), t);
                    self.facts.push(f.clone());
                    self.asserts.push(f);
                }
                EStmt::If { cond, then_b, else_b } => {
                    let c = self.tr(cond, &env, &guard, place);
                    let (te, tg) =
                        self.walk(then_b, env.clone(), Term::and(guard.clone(), c.clone()), p, mode, place);
                    let (ee, eg) = self.walk(
                        else_b,
                        env.clone(),
                        Term::and(guard.clone(), Term::not(c.clone())),
                        p,
                        mode,
                        place,
                    );
                    let mut merged = HashMap::new();
                    for (k, old) in &env.vals {
                        let tv = te.vals.get(k).unwrap_or(old);
                        let ev = ee.vals.get(k).unwrap_or(old);
                        let v = if tv.ptr() == ev.ptr() {
                            tv.clone()
                        } else {
                            Term::ite(c.clone(), tv.clone(), ev.clone())
                        };
                        merged.insert(k.clone(), v);
                    }
                    env = Env { vals: merged };
                    guard = Term::or(tg, eg);
                }
                EStmt::Loop { id, body, .. } => match mode {
                    Mode::Bind { threshold } => {
                        let g = Term::var_ref(pick(&self.loops[*id].guard, p).clone());
                        if *id as i64 > threshold {
                            self.facts.push(Term::eq(g.clone(), guard.clone()));
                            for (name, cur, nxt) in self.loops[*id].phis.clone() {
                                let phi = if p { nxt } else { cur };
                                let v = env.vals.get(&name).expect("phi in scope").clone();
                                self.facts.push(Term::implies(
                                    g.clone(),
                                    Term::eq(Term::var_ref(phi), v),
                                ));
                            }
                        }
                        if has_loop_deeper(body, threshold) {
                            let benv = self.phi_env(*id, p);
                            let tree_cond = self.loop_cond_at(s, *id, p);
                            let bguard = Term::and(g.clone(), tree_cond);
                            let _ = self.walk(body, benv, bguard, p, mode, place);
                        }
                        env = self.phi_env(*id, p);
                        let c = self.loop_cond_at(s, *id, p);
                        guard = Term::and(g, Term::not(c));
                    }
                    Mode::Consume => {
                        let c = self.loop_cond_at(s, *id, false);
                        self.facts.push(Term::implies(guard.clone(), Term::not(c)));
                        env = self.phi_env(*id, false);
                    }
                },
            }
        }
        (env, guard)
    }

    fn loop_cond_at(&mut self, s: &EStmt<'a>, id: usize, p: bool) -> Term {
        let EStmt::Loop { cond, .. } = s else { unreachable!() };
        let env = self.phi_env(id, p);
        self.tr(cond, &env, &Term::ff(), Place::Trans)
    }

    /// Right-hand side that may be a call (possibly under casts).
    fn rvalue_plain(&mut self, e: &Expr, env: &Env, guard: &Term, place: Place) -> Term {
        self.tr(e, env, guard, place)
    }

    fn do_call(
        &mut self,
        site: usize,
        call: &Expr,
        env: &mut Env,
        guard: &Term,
        place: Place,
    ) -> Option<Term> {
        let ExprKind::Call { name, args } = &call.kind else { unreachable!() };
        let callee = self.program.procedure(name).expect("known callee");
        let mut actuals: Vec<Term> = Vec::new();
        for a in args {
            let t = self.tr(a, env, guard, place);
            actuals.push(t);
        }
        for g in &self.program.globals {
            actuals.push(env.vals.get(&g.name).expect("global in scope").clone());
        }
        let mut rets = Vec::new();
        let ret_term = callee.ret.map(|rt| {
            let (w, s) = ty_ws(rt);
            let v = self.fresh(name, w, s);
            rets.push(v.clone());
            Term::var_ref(v)
        });
        for g in &self.program.globals {
            let (w, s) = ty_ws(g.ty);
            let v = self.fresh(&g.name, w, s);
            env.vals.insert(g.name.clone(), Term::var_ref(v.clone()));
            rets.push(v);
        }
        self.calls[site].instances.push(CallInstance {
            guard: guard.clone(),
            args: actuals,
            rets,
            place,
        });
        ret_term
    }

    fn tr(&mut self, e: &Expr, env: &Env, guard: &Term, place: Place) -> Term {
        let (w, _s) = ty_ws(e.ty);
        match &e.kind {
            ExprKind::Num(n) => Term::uconst(w, *n),
            ExprKind::Var(name) => env.vals.get(name).unwrap_or_else(|| panic!("unbound {name}")).clone(),
            ExprKind::Nondet => {
                let (w, s) = ty_ws(e.ty);
                Term::var_ref(self.fresh("$nd", w, s))
            }
            ExprKind::Call { .. } => {
                unreachable!("calls are restricted to statement position")
            }
            ExprKind::Unary { op, arg } => {
                let a = self.tr(arg, env, guard, place);
                match op {
                    UnaryOp::Neg => Term::unary(LU::Neg, a),
                    UnaryOp::BitNot => Term::unary(LU::Not, a),
                    UnaryOp::LogNot => Term::not(a),
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let signed = lhs.ty.sign == Sign::Signed && !lhs.ty.is_bool();
                let a = self.tr(lhs, env, guard, place);
                let b = self.tr(rhs, env, guard, place);
                match op {
                    BinaryOp::Add => Term::binary(LB::Add, a, b),
                    BinaryOp::Sub => Term::binary(LB::Sub, a, b),
                    BinaryOp::Mul => Term::binary(LB::Mul, a, b),
                    BinaryOp::Shl => Term::binary(LB::Shl, a, b),
                    BinaryOp::Shr => {
                        Term::binary(if signed { LB::Ashr } else { LB::Lshr }, a, b)
                    }
                    BinaryOp::Lt => Term::binary(if signed { LB::Slt } else { LB::Ult }, a, b),
                    BinaryOp::Le => Term::binary(if signed { LB::Sle } else { LB::Ule }, a, b),
                    BinaryOp::Gt => Term::binary(if signed { LB::Slt } else { LB::Ult }, b, a),
                    BinaryOp::Ge => Term::binary(if signed { LB::Sle } else { LB::Ule }, b, a),
                    BinaryOp::Eq => Term::binary(LB::Eq, a, b),
                    BinaryOp::Ne => Term::binary(LB::Ne, a, b),
                    BinaryOp::BitAnd => Term::binary(LB::And, a, b),
                    BinaryOp::BitXor => Term::binary(LB::Xor, a, b),
                    BinaryOp::BitOr => Term::binary(LB::Or, a, b),
                    BinaryOp::LogAnd => Term::and(a, b),
                    BinaryOp::LogOr => Term::or(a, b),
                }
            }
            ExprKind::Ternary { cond, then_val, else_val } => {
                let c = self.tr(cond, env, guard, place);
                let a = self.tr(then_val, env, guard, place);
                let b = self.tr(else_val, env, guard, place);
                Term::ite(c, a, b)
            }
            ExprKind::Cast { arg } => {
                let a = self.tr(arg, env, guard, place);
                let sign_extend = arg.ty.sign == Sign::Signed && !arg.ty.is_bool();
                Term::cast(a, w, sign_extend)
            }
        }
    }
}

/// A call, possibly wrapped in casts, in assignment position.
fn peel_call(e: &Expr) -> Option<(&Expr, Vec<Type>)> {
    let mut casts = Vec::new();
    let mut cur = e;
    loop {
        match &cur.kind {
            ExprKind::Call { .. } => {
                casts.reverse();
                return Some((cur, casts));
            }
            ExprKind::Cast { arg } => {
                casts.push(cur.ty);
                cur = arg;
            }
            _ => return None,
        }
    }
}

fn has_loop_deeper(block: &[EStmt<'_>], threshold: i64) -> bool {
    block.iter().any(|s| match s {
        EStmt::If { then_b, else_b, .. } => {
            has_loop_deeper(then_b, threshold) || has_loop_deeper(else_b, threshold)
        }
        EStmt::Loop { id, body, .. } => *id as i64 > threshold || has_loop_deeper(body, threshold),
        _ => false,
    })
}

fn find_loop<'t, 'a>(block: &'t [EStmt<'a>], id: usize) -> Option<&'t [EStmt<'a>]> {
    for s in block {
        match s {
            EStmt::If { then_b, else_b, .. } => {
                if let Some(b) = find_loop(then_b, id).or_else(|| find_loop(else_b, id)) {
                    return Some(b);
                }
            }
            EStmt::Loop { id: lid, body, .. } => {
                if *lid == id {
                    return Some(body);
                }
                if let Some(b) = find_loop(body, id) {
                    return Some(b);
                }
            }
            _ => {}
        }
    }
    None
}

fn find_loop_cond<'t, 'a>(block: &'t [EStmt<'a>], id: usize) -> Option<&'a Expr> {
    for s in block {
        match s {
            EStmt::If { then_b, else_b, .. } => {
                if let Some(c) = find_loop_cond(then_b, id).or_else(|| find_loop_cond(else_b, id)) {
                    return Some(c);
                }
            }
            EStmt::Loop { id: lid, cond, body, .. } => {
                if *lid == id {
                    return Some(cond);
                }
                if let Some(c) = find_loop_cond(body, id) {
                    return Some(c);
                }
            }
            _ => {}
        }
    }
    None
}
