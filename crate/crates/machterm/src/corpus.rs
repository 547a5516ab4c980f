//! Benchmark corpus: the worked examples as embedded sources, seeded
//! random program generators for differential testing against the
//! exhaustive oracle, and a directory runner.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{analyze_conditional, analyze_monolithic, analyze_universal, AnalysisConfig};
use crate::frontend::{parse, TypeWidths};
use crate::report::render_condition;

/// A step loop whose counter wraps past the bound when the step is zero:
/// terminates exactly for nonzero steps.
pub const H_ALONE: &str = "void h(unsigned y) {
    unsigned x;
    for (x = 0; x < 10; x += y) { }
}";

/// The step loop behind a caller that only passes positive steps; the
/// whole program terminates for every input.
pub const FIG1: &str = "void h(unsigned y) {
    unsigned x;
    for (x = 0; x < 10; x += y) { }
}
void f(int z) {
    if (z > 0) { h((unsigned)z); }
}
void main(int z) {
    f(z);
}";

/// Counts up to an inclusive bound; diverges only when the bound is the
/// maximum value, because then the exit test never fails.
pub const FOO1: &str = "void foo1(unsigned n) {
    for (unsigned x = 0; x <= n; x = x + 1) { }
}";

/// Same loop with a strict bound read through a wrapping increment: the
/// counter eventually wraps past any bound, so every input terminates.
pub const FOO2: &str = "void foo2(unsigned n) {
    unsigned x = 0;
    while (x <= n) { x = x + 1; if (x == 0) { n = 0; } }
}";

/// Needs a two-component lexicographic argument: x is reset
/// nondeterministically while y ramps up, then x counts down.
pub const FIG8: &str = "void main() {
    int x = 1; int y = 1;
    while (x > 0) {
        if (y < 10) { x = nondet(); } else { x = x - 1; }
        if (y < 100) { y = y + 1; }
    }
}";

/// Fig. 8 shrunk so its constants fit width 4.
pub const FIG8_SMALL: &str = "void main() {
    int x = 1; int y = 1;
    while (x > 0) {
        if (y < 2) { x = nondet(); } else { x = x - 1; }
        if (y < 5) { y = y + 1; }
    }
}";

pub const WHILE1: &str = "void main() { while (1) { } }";

/// Hand-picked programs exercising the analysis at small widths, each with
/// a name for reporting. All of them stay well within the exhaustive
/// oracle's state budget at width 4.
pub fn width4_suite() -> Vec<(String, String)> {
    let mut suite: Vec<(String, String)> = vec![
        ("h_alone".into(), H_ALONE.into()),
        ("fig1".into(), FIG1.into()),
        ("foo1".into(), FOO1.into()),
        ("foo2".into(), FOO2.into()),
        ("fig8_small".into(), FIG8_SMALL.into()),
        ("while1".into(), WHILE1.into()),
        (
            "countdown".into(),
            "void main(unsigned n) { while (n > 0) { n = n - 1; } }".into(),
        ),
        (
            "countup_strict".into(),
            "void main(unsigned n) { unsigned x = 0; while (x < n) { x = x + 1; } }".into(),
        ),
        (
            "stuck_at_zero".into(),
            "void main(unsigned n) { while (n < 5) { n = n + n; } }".into(),
        ),
        (
            "signed_descent".into(),
            "void main(int n) { while (n != 0) { n = n - 1; } }".into(),
        ),
        (
            "even_odd".into(),
            "void main(unsigned n) { while (n != 0) { if (n == 1) { n = 0; } else { n = n - 2; } } }"
                .into(),
        ),
        (
            "guarded_caller".into(),
            "void h(unsigned y) { unsigned x; for (x = 0; x < 3; x += y) { } }
             void main(unsigned z) { if (z > 0) { h(z); } }"
                .into(),
        ),
        (
            "unguarded_caller".into(),
            "void h(unsigned y) { unsigned x; for (x = 0; x < 3; x += y) { } }
             void main(unsigned z) { h(z); }"
                .into(),
        ),
        (
            "nested_ramp".into(),
            "void main(unsigned n) {
                 unsigned i = 0;
                 while (i < n) { unsigned j = 0; while (j < i) { j = j + 1; } i = i + 1; }
             }"
            .into(),
        ),
        (
            "nondet_bounded".into(),
            "void main() { unsigned x = 9; while (x > 0) { x = x - 1; if (nondet()) { } } }".into(),
        ),
        (
            "straight".into(),
            "void main(int a) { int b = a + 1; b = b + a; }".into(),
        ),
    ];
    for seed in 0..12u64 {
        suite.push((format!("rand{seed:02}"), random_program(seed)));
    }
    suite
}

/// Seeded random single-loop-ish program over width-4-friendly constants.
/// The shapes are drawn from a small set of templates so every output
/// parses and stays within the oracle's budget.
pub fn random_program(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c1 = rng.gen_range(1..8u32);
    let c2 = rng.gen_range(0..8u32);
    let step = rng.gen_range(1..4u32);
    match rng.gen_range(0..6u32) {
        0 => format!(
            "void main(unsigned n) {{ unsigned x = {c2}; while (x < n) {{ x = x + {step}; }} }}"
        ),
        1 => format!(
            "void main(unsigned n) {{ while (n > {c2}) {{ n = n - {step}; }} }}"
        ),
        2 => format!(
            "void main(unsigned n) {{ unsigned x = 0; while (x <= n) {{ x = x + {step}; if (x == 0) {{ n = 0; }} }} }}"
        ),
        3 => format!(
            "void main(unsigned a, unsigned b) {{ while (a != b) {{ if (a < b) {{ b = b - 1; }} else {{ a = a - 1; }} }} }}"
        ),
        4 => format!(
            "void main(unsigned n) {{ unsigned x = {c1}; while (x != 0) {{ if (nondet()) {{ x = x - 1; }} else {{ x = x - 1; n = n + 1; }} }} }}"
        ),
        _ => format!(
            "void main(unsigned n) {{ while (n >= {c1}) {{ n = n + {step}; }} }}"
        ),
    }
}

/// Multi-procedure program with `sites` call sites into one shared
/// utility callee, for comparing summary reuse against full inlining.
pub fn shared_callee_program(seed: u64, sites: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = rng.gen_range(1..8u32);
    let step = rng.gen_range(1..3u32);
    let mut body = String::new();
    for i in 0..sites {
        match i % 3 {
            0 => body.push_str("  util(a);\n"),
            1 => body.push_str("  util(b);\n"),
            _ => body.push_str(&format!("  util({});\n", rng.gen_range(0..8u32))),
        }
    }
    format!(
        "void util(unsigned n) {{ while (n > 0) {{ n = n - {step}; }} }}
void mid(unsigned a, unsigned b) {{
{body}}}
void main(unsigned a, unsigned b) {{ if (a < {bound}) {{ mid(a, b); }} else {{ mid(b, a); }} }}"
    )
}

/// Twenty generated multi-procedure programs; the first half have at least
/// three call sites into the shared callee.
pub fn shared_callee_suite() -> Vec<(String, String, usize)> {
    (0..20u64)
        .map(|seed| {
            let sites = if seed < 10 { 3 + (seed as usize % 3) } else { 1 + (seed as usize % 2) };
            (format!("shared{seed:02}"), shared_callee_program(seed, sites), sites)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRow {
    pub file: String,
    pub status: String,
    pub precondition: String,
    pub solver_calls: u64,
    pub wall_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn rows_to_csv(rows: &[CorpusRow]) -> String {
    let mut out = String::from("file,status,precondition,solver_calls,wall_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:?},{},{}\n",
            r.file, r.status, r.precondition, r.solver_calls, r.wall_ms
        ));
    }
    out
}

#[derive(Clone)]
pub struct CorpusConfig {
    pub widths: TypeWidths,
    pub analysis: AnalysisConfig,
    /// Monolithic (fully inlined) instead of summary-based analysis.
    pub monolithic: bool,
    pub universal: bool,
    pub workers: usize,
}

/// Analyze one source text and produce a result row.
pub fn run_source(name: &str, src: &str, config: &CorpusConfig) -> CorpusRow {
    let fail = |msg: String| CorpusRow {
        file: name.to_string(),
        status: "ERROR".into(),
        precondition: String::new(),
        solver_calls: 0,
        wall_ms: 0,
        error: Some(msg),
    };
    let program = match parse(name, src, config.widths) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let result = if config.monolithic {
        analyze_monolithic(&program, config.universal, &config.analysis)
    } else if config.universal {
        analyze_universal(&program, &config.analysis)
    } else {
        analyze_conditional(&program, &config.analysis)
    };
    match result {
        Ok(v) => CorpusRow {
            file: name.to_string(),
            status: v.status.as_str().to_string(),
            precondition: render_condition(&v.precondition),
            solver_calls: v.solver_calls,
            wall_ms: v.wall.as_millis() as u64,
            error: None,
        },
        Err(e) => fail(e.to_string()),
    }
}

/// Run every `.mc` file in a directory. Workers each own a full analyzer;
/// rows come back in file order regardless of completion order.
pub fn run_corpus(dir: &Path, config: &CorpusConfig) -> std::io::Result<Vec<CorpusRow>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "mc"))
        .collect();
    files.sort();
    let sources: Vec<(String, String)> = files
        .iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            Ok((name, std::fs::read_to_string(p)?))
        })
        .collect::<std::io::Result<_>>()?;

    let next = AtomicUsize::new(0);
    let mut rows: Vec<Option<CorpusRow>> = vec![None; sources.len()];
    let slots: Vec<std::sync::Mutex<&mut Option<CorpusRow>>> =
        rows.iter_mut().map(std::sync::Mutex::new).collect();
    let workers = config.workers.max(1).min(sources.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= sources.len() {
                    break;
                }
                let (name, src) = &sources[i];
                let row = run_source(name, src, config);
                **slots[i].lock().unwrap() = Some(row);
            });
        }
    });
    Ok(rows.into_iter().map(|r| r.expect("worker filled every slot")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_and_generated_sources_parse() {
        let widths = TypeWidths { int_width: 4, char_width: 4 };
        for (name, src) in width4_suite() {
            assert!(parse(&name, &src, widths).is_ok(), "{name} must parse");
        }
        for (name, src, _) in shared_callee_suite() {
            assert!(parse(&name, &src, widths).is_ok(), "{name} must parse");
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(random_program(7), random_program(7));
        assert_eq!(shared_callee_program(3, 4), shared_callee_program(3, 4));
    }

    #[test]
    fn suite_is_large_enough() {
        assert!(width4_suite().len() >= 25);
        assert_eq!(shared_callee_suite().len(), 20);
        assert!(
            shared_callee_suite().iter().filter(|(_, _, s)| *s >= 3).count() >= 10,
            "need programs with three or more shared call sites"
        );
    }

    #[test]
    fn corpus_runner_processes_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.mc"), WHILE1).unwrap();
        std::fs::write(
            dir.path().join("b.mc"),
            "void main(unsigned n) { while (n > 0) { n = n - 1; } }",
        )
        .unwrap();
        std::fs::write(dir.path().join("skip.txt"), "not a program").unwrap();
        let config = CorpusConfig {
            widths: TypeWidths { int_width: 4, char_width: 4 },
            analysis: AnalysisConfig::default(),
            monolithic: false,
            universal: true,
            workers: 2,
        };
        let rows = run_corpus(dir.path(), &config).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].file, "a.mc");
        assert_eq!(rows[0].status, "NON_TERMINATING");
        assert_eq!(rows[1].status, "TERMINATING");
    }
}
