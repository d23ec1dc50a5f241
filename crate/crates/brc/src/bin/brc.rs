use brc::coerce;
use brc::driver::{run_all, Outcome, Program, RunConfig};
use brc::solve::{Backend, SolveConfig};
use brc::wf::Delta;
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Check .brc programs: relational and unary cost bounds, decided by the
/// builtin solver or an external SMT-LIB2 solver.
#[derive(Parser)]
#[command(name = "brc", version)]
struct Args {
    /// Source files to check.
    #[arg(required = true)]
    files: Vec<PathBuf>,

    /// Constraint backend: `builtin` or `cmd:<path>` for an SMT-LIB2 solver
    /// invoked as `<path> <goal.smt2>`.
    #[arg(long, default_value = "builtin")]
    solver: String,

    /// Bound for grounding Nat-sorted variables in the builtin backend.
    #[arg(long, value_name = "N")]
    nat_bound: Option<u64>,

    /// Write each check's obligation as an SMT-LIB2 file into this directory.
    #[arg(long, value_name = "DIR")]
    dump_smt: Option<PathBuf>,

    /// For checks whose inline type differs from the definition's ascription,
    /// print the subtyping witness between the two.
    #[arg(long)]
    dump_coercions: bool,

    /// Log every rule the checker applies.
    #[arg(long)]
    trace: bool,

    /// After checking, run each checked definition through the interpreter.
    #[arg(long)]
    eval: bool,

    /// Print elimination statistics along with phase times.
    #[arg(long)]
    bench: bool,

    /// One JSON object per check on stdout.
    #[arg(long)]
    json: bool,

    /// Print the elaborated core terms of accepted relational checks.
    #[arg(long)]
    core: bool,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    if s == "builtin" {
        Ok(Backend::Builtin)
    } else if let Some(path) = s.strip_prefix("cmd:") {
        Ok(Backend::Cmd(path.to_string()))
    } else {
        Err(format!("unknown solver '{s}' (use 'builtin' or 'cmd:<path>')"))
    }
}

fn sanitize(head: &str) -> String {
    head.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn main() -> ExitCode {
    let args = Args::parse();
    let backend = match parse_backend(&args.solver) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("brc: {e}");
            return ExitCode::from(2);
        }
    };
    let mut solve = SolveConfig { backend, ..SolveConfig::default() };
    if let Some(n) = args.nat_bound {
        solve.nat_bound = n;
    }
    let cfg = RunConfig { solve, trace: args.trace, want_smt: args.dump_smt.is_some() };

    if let Some(dir) = &args.dump_smt {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("brc: cannot create {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }

    let mut all_accepted = true;
    for file in &args.files {
        let src = match std::fs::read_to_string(file) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("brc: {}: {e}", file.display());
                return ExitCode::from(2);
            }
        };
        let program = match Program::load(&src) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("{}: {e}", file.display());
                return ExitCode::from(2);
            }
        };
        let reports = run_all(&program, &cfg);
        let stem = file.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        for (i, r) in reports.iter().enumerate() {
            if args.json {
                let mut j = r.json();
                j["file"] = serde_json::json!(file.display().to_string());
                println!("{j}");
            } else {
                println!(
                    "{stem}: {}: {} (check {:.1} ms, solve {:.1} ms)",
                    r.head, r.outcome, r.check_ms, r.solve_ms
                );
                if args.bench {
                    if let Some(s) = &r.stats {
                        println!(
                            "  obligations: {} existentials, {} closed by substitution",
                            s.total,
                            s.closed()
                        );
                    }
                }
                if args.trace {
                    for line in &r.log {
                        println!("  | {line}");
                    }
                }
                if args.core {
                    if let Some((el, er)) = &r.core {
                        println!("  left  core: {el}");
                        if el != er {
                            println!("  right core: {er}");
                        }
                    }
                }
            }
            if let (Some(dir), Some(smt)) = (&args.dump_smt, &r.smt) {
                let path = dir.join(format!("{stem}-{i}-{}.smt2", sanitize(&r.head)));
                if let Err(e) = std::fs::write(&path, &smt.text) {
                    eprintln!("brc: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
                if !args.json {
                    println!("  smt goal: {}", path.display());
                }
            }
            if r.outcome != Outcome::Accepted {
                all_accepted = false;
            }
        }
        if args.dump_coercions && !args.json {
            for check in &program.checks {
                let brc::surface::Check::Rel { left, ty: Some(inline), .. } = check else {
                    continue;
                };
                let Some(asc) = program.def(left).and_then(|d| d.ty.clone()) else { continue };
                if &asc == inline {
                    continue;
                }
                match coerce::coerce(&Delta::new(), &brc::ast::Cstr::True, &asc, inline) {
                    Some(c) => println!("coercion for {left}:\n{c}"),
                    None => println!("coercion for {left}: none found"),
                }
            }
        }
        if args.eval && !args.json {
            match program.eval_env() {
                Ok(env) => {
                    for def in &program.defs {
                        if let Some(v) = env.lookup(&def.name) {
                            println!("eval {stem}.{}: {v}", def.name);
                        }
                    }
                }
                Err(e) => println!("eval {stem}: {e}"),
            }
        }
    }
    if all_accepted {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
