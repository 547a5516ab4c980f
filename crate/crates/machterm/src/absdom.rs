//! Guarded template-polyhedra abstract domain.
//!
//! A template fixes the shape of an invariant: a list of rows, each a guard
//! plus an integer coefficient vector over a fixed variable vector. An
//! abstract value supplies one bound per row; its concretization is
//! `⋀_r guard_r ⟹ (Σ_i c_ri · x_i ≤ d_r)` with the linear arithmetic
//! carried out at an extended signed width so it never wraps. The lattice
//! order is pointwise on bounds with a bottom element denoting the empty
//! set.

use crate::logic::{BinOp, SatResult, Sign, SolverSession, Term, VarRef};

pub const MAX_EXT_WIDTH: u32 = crate::logic::bitvec::MAX_WIDTH;

/// What a template's variable vector ranges over.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TemplateKind {
    /// Loop-head state variables; used for invariants.
    LoopHead,
    /// Procedure inputs and outputs; used for summaries and preconditions.
    Io,
    /// Actual parameters of a call site; used for calling contexts.
    Call,
}

#[derive(Clone, Debug)]
pub struct TemplateRow {
    pub guard: Term,
    pub coeffs: Vec<i64>,
}

#[derive(Clone, Debug)]
pub struct Template {
    pub kind: TemplateKind,
    pub vars: Vec<VarRef>,
    pub rows: Vec<TemplateRow>,
    /// Signed width at which row expressions are evaluated; wide enough
    /// that no row can overflow, capped at the solver's maximum.
    pub ext_width: u32,
}

/// Per-row bound of an abstract value.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Bound {
    Finite(i64),
    Top,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum AbstractValue {
    /// Empty set; concretizes to false.
    Bottom,
    Rows(Vec<Bound>),
}

impl AbstractValue {
    pub fn top(rows: usize) -> AbstractValue {
        AbstractValue::Rows(vec![Bound::Top; rows])
    }

    pub fn is_top(&self) -> bool {
        matches!(self, AbstractValue::Rows(b) if b.iter().all(|x| *x == Bound::Top))
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, AbstractValue::Bottom)
    }
}

impl Template {
    pub fn new(kind: TemplateKind, vars: Vec<VarRef>, rows: Vec<TemplateRow>) -> Template {
        for r in &rows {
            assert_eq!(r.coeffs.len(), vars.len(), "row arity");
        }
        let maxw = vars.iter().map(|v| v.width).max().unwrap_or(1);
        let growth = rows
            .iter()
            .map(|r| {
                let s: u128 = r.coeffs.iter().map(|c| c.unsigned_abs() as u128).sum();
                128 - s.max(1).leading_zeros()
            })
            .max()
            .unwrap_or(1);
        let ext_width = (maxw + growth + 1).min(MAX_EXT_WIDTH);
        Template { kind, vars, rows, ext_width }
    }

    /// The classic interval instantiation: two rows per variable, `x ≤ d`
    /// and `−x ≤ d`, each under the given guard.
    pub fn intervals(kind: TemplateKind, vars: Vec<(Term, VarRef)>) -> Template {
        let n = vars.len();
        let mut rows = Vec::with_capacity(2 * n);
        for (i, (g, _)) in vars.iter().enumerate() {
            for sgn in [1i64, -1] {
                let mut coeffs = vec![0i64; n];
                coeffs[i] = sgn;
                rows.push(TemplateRow { guard: g.clone(), coeffs });
            }
        }
        Template::new(kind, vars.into_iter().map(|(_, v)| v).collect(), rows)
    }

    /// Parses a sidecar template matrix: one row per line of whitespace- or
    /// comma-separated integer coefficients, `#` comments. All rows get
    /// guard true.
    pub fn from_matrix(
        text: &str,
        kind: TemplateKind,
        vars: Vec<VarRef>,
    ) -> Result<Template, String> {
        let mut rows = Vec::new();
        for (lno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let coeffs: Result<Vec<i64>, _> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<i64>())
                .collect();
            let coeffs = coeffs.map_err(|e| format!("line {}: {e}", lno + 1))?;
            if coeffs.len() != vars.len() {
                return Err(format!(
                    "line {}: row has {} coefficients, template has {} variables",
                    lno + 1,
                    coeffs.len(),
                    vars.len()
                ));
            }
            rows.push(TemplateRow { guard: Term::tt(), coeffs });
        }
        if rows.is_empty() {
            return Err("template file contains no rows".to_string());
        }
        Ok(Template::new(kind, vars, rows))
    }

    /// Row expression `Σ_i c_ri · x_i` at the extended width.
    pub fn row_expr(&self, r: usize) -> Term {
        let row = &self.rows[r];
        let mut acc: Option<Term> = None;
        for (c, v) in row.coeffs.iter().zip(&self.vars) {
            if *c == 0 {
                continue;
            }
            let x = Term::cast(Term::var_ref(v.clone()), self.ext_width, v.sign == Sign::Signed);
            let term = match *c {
                1 => x,
                -1 => Term::unary(crate::logic::UnOp::Neg, x),
                c => Term::binary(BinOp::Mul, Term::iconst(self.ext_width, c), x),
            };
            acc = Some(match acc {
                None => term,
                Some(a) => Term::binary(BinOp::Add, a, term),
            });
        }
        acc.unwrap_or_else(|| Term::iconst(self.ext_width, 0))
    }

    pub fn concretize(&self, d: &AbstractValue) -> Term {
        match d {
            AbstractValue::Bottom => Term::ff(),
            AbstractValue::Rows(bounds) => {
                assert_eq!(bounds.len(), self.rows.len(), "value dimension");
                let mut conj = Vec::new();
                for (r, b) in bounds.iter().enumerate() {
                    let Bound::Finite(d) = b else { continue };
                    let le = Term::binary(
                        BinOp::Sle,
                        self.row_expr(r),
                        Term::iconst(self.ext_width, *d),
                    );
                    conj.push(Term::implies(self.rows[r].guard.clone(), le));
                }
                Term::and_all(conj)
            }
        }
    }
}

/// True iff every state of `d1` is a state of `d2` (semantic inclusion,
/// decided by the solver; guards make this finer than pointwise bounds).
pub fn is_subsumed(
    t: &Template,
    d1: &AbstractValue,
    d2: &AbstractValue,
    solver: &mut SolverSession,
) -> bool {
    if d1.is_bottom() {
        return true;
    }
    let q = Term::and(t.concretize(d1), Term::not(t.concretize(d2)));
    let act = solver.activation();
    solver.assert_under(act, &q);
    matches!(solver.check(&[act]), SatResult::Unsat)
}

/// Pointwise least upper bound.
pub fn join(d1: &AbstractValue, d2: &AbstractValue) -> AbstractValue {
    match (d1, d2) {
        (AbstractValue::Bottom, d) | (d, AbstractValue::Bottom) => d.clone(),
        (AbstractValue::Rows(a), AbstractValue::Rows(b)) => {
            assert_eq!(a.len(), b.len(), "value dimension");
            AbstractValue::Rows(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| match (x, y) {
                        (Bound::Top, _) | (_, Bound::Top) => Bound::Top,
                        (Bound::Finite(x), Bound::Finite(y)) => Bound::Finite(*x.max(y)),
                    })
                    .collect(),
            )
        }
    }
}

/// Summaries accumulated across re-analyses under different calling
/// contexts: a list of (context, summary) pairs concretizing to the
/// conjunction of implications `ctx ⟹ sum`.
#[derive(Clone, Debug, Default)]
pub struct ImplicationStore {
    pub pairs: Vec<(AbstractValue, AbstractValue)>,
}

impl ImplicationStore {
    pub fn concretize(&self, t_ctx: &Template, t_sum: &Template) -> Term {
        Term::and_all(
            self.pairs
                .iter()
                .map(|(c, s)| Term::implies(t_ctx.concretize(c), t_sum.concretize(s))),
        )
    }

    /// Disjunction of all stored contexts, for the re-analysis subsumption
    /// check.
    pub fn contexts(&self, t_ctx: &Template) -> Term {
        Term::or_all(self.pairs.iter().map(|(c, _)| t_ctx.concretize(c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::bitvec::BitVec;
    use crate::logic::Valuation;

    fn uvar(name: &str, w: u32) -> VarRef {
        VarRef { name: name.into(), width: w, sign: Sign::Unsigned }
    }

    fn ivals(names: &[&str], w: u32) -> Template {
        Template::intervals(
            TemplateKind::LoopHead,
            names.iter().map(|n| (Term::tt(), uvar(n, w))).collect(),
        )
    }

    fn holds(t: &Term, sigma: &Valuation) -> bool {
        t.evaluate(sigma).unwrap().is_true()
    }

    #[test]
    fn interval_concretization() {
        // d = (M, 0, M, 0) over (x, y) is the full box 0≤x≤M ∧ 0≤y≤M.
        let t = ivals(&["x", "y"], 4);
        let m = 15i64;
        let d = AbstractValue::Rows(vec![
            Bound::Finite(m),
            Bound::Finite(0),
            Bound::Finite(m),
            Bound::Finite(0),
        ]);
        let f = t.concretize(&d);
        for x in 0..16u64 {
            for y in 0..16u64 {
                let sigma: Valuation = [
                    ("x".to_string(), BitVec::new(4, x)),
                    ("y".to_string(), BitVec::new(4, y)),
                ]
                .into();
                assert!(holds(&f, &sigma));
            }
        }
    }

    #[test]
    fn bottom_is_false_top_is_true() {
        let t = ivals(&["x"], 4);
        let sigma: Valuation = [("x".to_string(), BitVec::new(4, 7))].into();
        assert!(!holds(&t.concretize(&AbstractValue::Bottom), &sigma));
        assert!(holds(&t.concretize(&AbstractValue::top(2)), &sigma));
    }

    #[test]
    fn one_var_box_membership() {
        // d = (5, -3) is exactly 3 ≤ x ≤ 5, checked exhaustively.
        let t = ivals(&["x"], 4);
        let d = AbstractValue::Rows(vec![Bound::Finite(5), Bound::Finite(-3)]);
        let f = t.concretize(&d);
        for x in 0..16u64 {
            let sigma: Valuation = [("x".to_string(), BitVec::new(4, x))].into();
            assert_eq!(holds(&f, &sigma), (3..=5).contains(&x));
        }
    }

    #[test]
    fn subsumption() {
        let t = ivals(&["x"], 4);
        let mut s = SolverSession::new();
        let r05 = AbstractValue::Rows(vec![Bound::Finite(5), Bound::Finite(0)]);
        let r010 = AbstractValue::Rows(vec![Bound::Finite(10), Bound::Finite(0)]);
        assert!(is_subsumed(&t, &AbstractValue::Bottom, &r05, &mut s));
        assert!(is_subsumed(&t, &r05, &r010, &mut s));
        assert!(!is_subsumed(&t, &r010, &r05, &mut s));
        assert!(is_subsumed(&t, &r05, &AbstractValue::top(2), &mut s));
    }

    #[test]
    fn unreachable_guard_rows_are_vacuous() {
        let x = uvar("x", 4);
        let t = Template::new(
            TemplateKind::LoopHead,
            vec![x],
            vec![
                TemplateRow { guard: Term::ff(), coeffs: vec![1] },
                TemplateRow { guard: Term::tt(), coeffs: vec![-1] },
            ],
        );
        let mut s = SolverSession::new();
        // The guarded row's bound is irrelevant: -100 vs 100 still subsumes.
        let d1 = AbstractValue::Rows(vec![Bound::Finite(-100), Bound::Finite(0)]);
        let d2 = AbstractValue::Rows(vec![Bound::Finite(100), Bound::Finite(0)]);
        assert!(is_subsumed(&t, &d1, &d2, &mut s));
        assert!(is_subsumed(&t, &d2, &d1, &mut s));
    }

    #[test]
    fn join_examples() {
        let a = AbstractValue::Rows(vec![Bound::Finite(5), Bound::Finite(0)]);
        let b = AbstractValue::Rows(vec![Bound::Finite(10), Bound::Finite(-3)]);
        assert_eq!(join(&AbstractValue::Bottom, &a), a);
        assert_eq!(
            join(&a, &b),
            AbstractValue::Rows(vec![Bound::Finite(10), Bound::Finite(0)])
        );
        let top = AbstractValue::top(2);
        assert_eq!(join(&top, &a), top);
    }

    #[test]
    fn matrix_file_parsing() {
        let t = Template::from_matrix(
            "1 0   # x\n-1,0\n1 1   # x + y\n",
            TemplateKind::LoopHead,
            vec![uvar("x", 4), uvar("y", 4)],
        )
        .unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.rows[2].coeffs, vec![1, 1]);
        assert!(Template::from_matrix("1 2 3", TemplateKind::Io, vec![uvar("x", 4)]).is_err());
        assert!(Template::from_matrix("# nothing", TemplateKind::Io, vec![uvar("x", 4)]).is_err());
    }

    #[test]
    fn store_concretization() {
        let t_ctx = ivals(&["n"], 4);
        let t_sum = ivals(&["r"], 4);
        let mut store = ImplicationStore::default();
        store.pairs.push((
            AbstractValue::Rows(vec![Bound::Finite(5), Bound::Finite(0)]),
            AbstractValue::Rows(vec![Bound::Finite(9), Bound::Finite(0)]),
        ));
        let f = store.concretize(&t_ctx, &t_sum);
        let inside: Valuation = [
            ("n".to_string(), BitVec::new(4, 3)),
            ("r".to_string(), BitVec::new(4, 12)),
        ]
        .into();
        assert!(!holds(&f, &inside)); // context holds, summary violated
        let outside: Valuation = [
            ("n".to_string(), BitVec::new(4, 9)),
            ("r".to_string(), BitVec::new(4, 12)),
        ]
        .into();
        assert!(holds(&f, &outside)); // context false, implication vacuous
    }

    // Lattice properties over random interval values at width 4.
    use proptest::prelude::*;

    fn bound() -> impl Strategy<Value = Bound> {
        prop_oneof![(-16i64..=16).prop_map(Bound::Finite), Just(Bound::Top)]
    }

    fn value2() -> impl Strategy<Value = AbstractValue> {
        prop_oneof![
            Just(AbstractValue::Bottom),
            proptest::collection::vec(bound(), 2).prop_map(AbstractValue::Rows),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn join_is_upper_bound(d1 in value2(), d2 in value2(), x in 0u64..16) {
            let t = ivals(&["x"], 4);
            let j = join(&d1, &d2);
            let sigma: Valuation = [("x".to_string(), BitVec::new(4, x))].into();
            let in1 = holds(&t.concretize(&d1), &sigma);
            let in2 = holds(&t.concretize(&d2), &sigma);
            if in1 || in2 {
                prop_assert!(holds(&t.concretize(&j), &sigma));
            }
        }

        #[test]
        fn subsumption_preorder(d1 in value2(), d2 in value2(), d3 in value2()) {
            let t = ivals(&["x"], 4);
            let mut s = SolverSession::new();
            prop_assert!(is_subsumed(&t, &d1, &d1, &mut s));
            if is_subsumed(&t, &d1, &d2, &mut s) && is_subsumed(&t, &d2, &d3, &mut s) {
                prop_assert!(is_subsumed(&t, &d1, &d3, &mut s));
            }
        }

        #[test]
        fn concretize_monotone(d1 in value2(), d2 in value2()) {
            let t = ivals(&["x"], 4);
            let pointwise_le = match (&d1, &d2) {
                (AbstractValue::Bottom, _) => true,
                (_, AbstractValue::Bottom) => false,
                (AbstractValue::Rows(a), AbstractValue::Rows(b)) => {
                    a.iter().zip(b).all(|(x, y)| match (x, y) {
                        (_, Bound::Top) => true,
                        (Bound::Top, _) => false,
                        (Bound::Finite(x), Bound::Finite(y)) => x <= y,
                    })
                }
            };
            if pointwise_le {
                let mut s = SolverSession::new();
                prop_assert!(is_subsumed(&t, &d1, &d2, &mut s));
            }
        }
    }
}
