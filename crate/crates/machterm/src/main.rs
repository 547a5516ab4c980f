//! Command-line front door for the termination analyzer.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, ValueEnum};

use machterm::corpus::{run_corpus, rows_to_csv, CorpusConfig};
use machterm::driver::{
    analyze_conditional, analyze_monolithic, analyze_universal, AnalysisConfig, Verdict,
};
use machterm::frontend::{normalize, parse, TypeWidths};
use machterm::logic::{SolverSession, Term};
use machterm::oracle::oracle;
use machterm::report::{human_summary, report};
use machterm::ssa::{encode, print_ts};
use machterm::synth::CoeffRange;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Interprocedural analysis with summaries and calling contexts.
    Ipta,
    /// Monolithic analysis of the fully inlined program.
    Mta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Check {
    /// Prove termination or non-termination for every input.
    Universal,
    /// Additionally infer a sufficient termination precondition.
    Conditional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

/// Bit-precise termination analysis for machine-integer programs.
#[derive(Parser, Debug)]
#[command(name = "machterm", version, about)]
struct Cli {
    /// Input program (or a directory of .mc files with --corpus).
    file: PathBuf,

    #[arg(long, value_enum, default_value_t = Mode::Ipta)]
    mode: Mode,

    #[arg(long, value_enum, default_value_t = Check::Conditional)]
    check: Check,

    /// Bit width of int.
    #[arg(long, default_value_t = 32)]
    width_int: u32,

    /// Bit width of char.
    #[arg(long, default_value_t = 8)]
    width_char: u32,

    /// Invariant template: "interval" or a sidecar file of extra row
    /// coefficient vectors over each loop's numeric head variables.
    #[arg(long, default_value = "interval")]
    template: String,

    /// Maximum lexicographic ranking components per loop.
    #[arg(long, default_value_t = 3)]
    max_lex: u32,

    /// Outer iteration bound for the synthesis loops.
    #[arg(long, default_value_t = 20)]
    max_iter: u32,

    /// Coefficient-range stages for the ranking search, e.g. "1,10,full".
    #[arg(long, default_value = "1,10,full")]
    coeff_schedule: String,

    /// Per-procedure time budget, seconds.
    #[arg(long, default_value_t = 60)]
    timeout_proc: u64,

    /// Whole-run time budget, seconds.
    #[arg(long, default_value_t = 1800)]
    timeout: u64,

    /// Emit the result as JSON.
    #[arg(long)]
    json: bool,

    /// Print each procedure's transition system before analyzing.
    #[arg(long)]
    emit_ssa: bool,

    /// Write the entry procedure's propositional encoding as DIMACS CNF.
    #[arg(long, value_name = "PATH")]
    emit_dimacs: Option<PathBuf>,

    /// Run the exhaustive-state oracle instead of the analyzer.
    #[arg(long)]
    oracle: bool,

    /// Bit width for the oracle run (both int and char).
    #[arg(long, default_value_t = 4)]
    oracle_width: u32,

    /// Treat FILE as a directory of .mc programs and print a result table.
    #[arg(long)]
    corpus: bool,

    /// Parallel workers for --corpus.
    #[arg(long, default_value_t = 4)]
    workers: usize,

    /// Table format for --corpus.
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn parse_schedule(text: &str) -> Result<Vec<CoeffRange>, String> {
    let stages: Result<Vec<CoeffRange>, String> = text
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            if s.eq_ignore_ascii_case("full") {
                Ok(CoeffRange::Full)
            } else {
                match s.parse::<i64>() {
                    Ok(n) if n > 0 => Ok(CoeffRange::Limit(n)),
                    _ => Err(format!("bad coefficient stage {s:?} (want a positive integer or \"full\")")),
                }
            }
        })
        .collect();
    let stages = stages?;
    if stages.is_empty() {
        return Err("empty coefficient schedule".into());
    }
    Ok(stages)
}

fn build_config(cli: &Cli) -> Result<AnalysisConfig, String> {
    let mut config = AnalysisConfig::default();
    config.bounds.max_lex = cli.max_lex;
    config.bounds.max_iter = cli.max_iter;
    config.bounds.coeff_schedule = parse_schedule(&cli.coeff_schedule)?;
    config.timeout_proc = Duration::from_secs(cli.timeout_proc);
    config.timeout = Duration::from_secs(cli.timeout);
    if cli.template != "interval" {
        let text = std::fs::read_to_string(&cli.template)
            .map_err(|e| format!("cannot read template file {}: {e}", cli.template))?;
        let mut rows = 0usize;
        for (lno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let ok = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .all(|s| s.parse::<i64>().is_ok());
            if !ok {
                return Err(format!(
                    "template file {}: line {} is not an integer row",
                    cli.template,
                    lno + 1
                ));
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(format!("template file {} contains no rows", cli.template));
        }
        config.bounds.inv_matrix = Some(text);
    }
    Ok(config)
}

fn run_oracle(cli: &Cli, src: &str) -> ExitCode {
    let w = cli.oracle_width;
    if !(1..=6).contains(&w) {
        return usage_error("--oracle-width must be between 1 and 6");
    }
    let widths = TypeWidths { int_width: w, char_width: w };
    let file = cli.file.display().to_string();
    let program = match parse(&file, src, widths) {
        Ok(p) => p,
        Err(e) => return usage_error(&e.to_string()),
    };
    let result = match oracle(&program) {
        Ok(r) => r,
        Err(e) => return usage_error(&format!("oracle: {e}")),
    };
    if cli.json {
        let obj = serde_json::json!({
            "file": file,
            "width": w,
            "inputs": result.input_names,
            "verdicts": result.verdicts.iter()
                .map(|(v, t)| serde_json::json!({
                    "input": v,
                    "status": if *t { "TERMINATES" } else { "DIVERGES" },
                }))
                .collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&obj).unwrap());
    } else {
        let total = result.verdicts.len();
        let term = result.verdicts.iter().filter(|(_, t)| *t).count();
        println!("{file}: oracle at width {w} over ({})", result.input_names.join(", "));
        println!("  {term}/{total} inputs terminate");
        for (v, t) in &result.verdicts {
            let vals: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            println!("  ({}) {}", vals.join(", "), if *t { "TERMINATES" } else { "DIVERGES" });
        }
    }
    ExitCode::SUCCESS
}

fn run_corpus_mode(cli: &Cli, config: AnalysisConfig) -> ExitCode {
    let cfg = CorpusConfig {
        widths: TypeWidths { int_width: cli.width_int, char_width: cli.width_char },
        analysis: config,
        monolithic: cli.mode == Mode::Mta,
        universal: cli.check == Check::Universal,
        workers: cli.workers,
    };
    let rows = match run_corpus(&cli.file, &cfg) {
        Ok(rows) => rows,
        Err(e) => return usage_error(&format!("{}: {e}", cli.file.display())),
    };
    match cli.format {
        TableFormat::Csv => print!("{}", rows_to_csv(&rows)),
        TableFormat::Json => println!("{}", serde_json::to_string_pretty(&rows).unwrap()),
    }
    ExitCode::SUCCESS
}

fn run_single(cli: &Cli, config: AnalysisConfig, src: &str) -> ExitCode {
    let file = cli.file.display().to_string();
    let widths = TypeWidths { int_width: cli.width_int, char_width: cli.width_char };
    let program = match parse(&file, src, widths) {
        Ok(p) => p,
        Err(e) => return usage_error(&e.to_string()),
    };
    let norm = normalize(&program);
    if cli.emit_ssa {
        for proc in &norm.procedures {
            print!("{}", print_ts(&encode(&norm, proc)));
        }
    }
    if let Some(path) = &cli.emit_dimacs {
        let entry = norm.procedure(&norm.entry).expect("entry checked by the parser");
        let ts = encode(&norm, entry);
        let mut s = SolverSession::new();
        s.enable_recording();
        s.assert_term(&Term::and_all([
            ts.init.clone(),
            ts.trans.clone(),
            ts.out.clone(),
            ts.assumptions.clone(),
        ]));
        let write = std::fs::File::create(path)
            .map(std::io::BufWriter::new)
            .and_then(|mut f| s.write_dimacs(&mut f));
        if let Err(e) = write {
            return usage_error(&format!("cannot write {}: {e}", path.display()));
        }
    }
    let result = match (cli.mode, cli.check) {
        (Mode::Ipta, Check::Universal) => analyze_universal(&program, &config),
        (Mode::Ipta, Check::Conditional) => analyze_conditional(&program, &config),
        (Mode::Mta, check) => {
            analyze_monolithic(&program, check == Check::Universal, &config)
        }
    };
    let verdict: Verdict = match result {
        Ok(v) => v,
        Err(e) => return usage_error(&e.to_string()),
    };
    let mode_name = match cli.mode {
        Mode::Ipta => "ipta",
        Mode::Mta => "mta",
    };
    let rep = report(&file, mode_name, &verdict);
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&rep).unwrap());
    } else {
        print!("{}", human_summary(&rep));
    }
    ExitCode::from(verdict.status.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            let benign = matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if benign { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    if !(2..=60).contains(&cli.width_int) || !(2..=60).contains(&cli.width_char) {
        return usage_error("bit widths must be between 2 and 60");
    }
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(msg) => return usage_error(&msg),
    };
    if cli.corpus {
        return run_corpus_mode(&cli, config);
    }
    let src = match std::fs::read_to_string(&cli.file) {
        Ok(s) => s,
        Err(e) => return usage_error(&format!("{}: {e}", cli.file.display())),
    };
    if cli.oracle {
        return run_oracle(&cli, &src);
    }
    run_single(&cli, config, &src)
}
