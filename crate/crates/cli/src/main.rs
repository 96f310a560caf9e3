//! Command-line front end for the constraint-satisfaction workbench.
//!
//! Exit codes: 0 = yes / solution found / check passed, 1 = no / none /
//! check failed, 2 = usage or parse error, 3 = resource limit.

mod formats;

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;

use pcspwb_core::pcsp13::{
    gen_planted, solve_pcsp, verify_assignment, Method, TripleInstance, Verdict, VerifyMode,
};
use pcspwb_core::poly::{
    cyclic_survey, find_polymorphism, is_cyclic, is_pcsp_polymorphism, is_polymorphism,
    pseudo_siggers_search, OperationTable, SymmetryConstraint,
};
use pcspwb_core::ppcon::{
    check_relaxation, evaluate_pp, gadget_reduce, pp_power, PpFormula, PpPowerOutput, PpPowerSpec,
};
use pcspwb_core::prooflab::{
    area, eval_t, is_cover, is_tame, refute_cyclic, BlackBoxOperation, Matrix,
};
use pcspwb_core::solver::{find_homomorphism, SearchOutcome, SolverConfig};
use pcspwb_core::structure::{builtin_template, Assignment, Instance, RelationalStructure};
use pcspwb_core::{Error, Limits};

use formats::{
    parse_instance_file, parse_structure_file, print_instance, print_structure,
    print_triple_instance, ParsedInstance,
};

#[derive(Parser)]
#[command(name = "pcspwb", version, about = "Constraint-satisfaction workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether an instance maps homomorphically to a template.
    SolveCsp {
        /// instance file
        #[arg(long)]
        instance: String,
        /// template: a builtin name or a structure file path
        #[arg(long)]
        template: String,
    },
    /// Solve PCSP(1-in-3, NAE) by exact linear algebra.
    #[command(name = "solve-pcsp13nae")]
    SolvePcsp13Nae {
        /// triple-instance file
        #[arg(long)]
        instance: String,
        /// z = integers, q = rationals avoiding 1/3
        #[arg(long, default_value = "z")]
        method: String,
    },
    /// Polymorphism search and checking.
    Poly {
        #[command(subcommand)]
        cmd: PolyCmd,
    },
    /// pp-formulas, pp-powers, relaxations, gadget reductions.
    Pp {
        #[command(subcommand)]
        cmd: PpCmd,
    },
    /// Matrix machinery for cyclic operations.
    Prooflab {
        #[command(subcommand)]
        cmd: ProoflabCmd,
    },
    /// Instance generators.
    Gen {
        #[command(subcommand)]
        cmd: GenCmd,
    },
}

#[derive(Subcommand)]
enum PolyCmd {
    /// Search for a polymorphism of the pair (A, B).
    Find {
        #[arg(long)]
        template_a: String,
        /// defaults to template A (CSP polymorphisms)
        #[arg(long)]
        template_b: Option<String>,
        #[arg(long)]
        arity: usize,
        #[arg(long)]
        cyclic: bool,
    },
    /// Check a table against a template (pair).
    Check {
        /// operation table file
        #[arg(long)]
        table: String,
        #[arg(long)]
        template_a: String,
        #[arg(long)]
        template_b: Option<String>,
        /// also require cyclicity
        #[arg(long)]
        cyclic: bool,
    },
    /// Run the cyclic search over all primes up to a bound.
    Survey {
        #[arg(long)]
        template_a: String,
        #[arg(long)]
        template_b: Option<String>,
        #[arg(long, default_value_t = 7)]
        max_prime: usize,
    },
    /// Search for a pseudo-Siggers polymorphism.
    PseudoSiggers {
        #[arg(long)]
        template: String,
    },
}

#[derive(Subcommand)]
enum PpCmd {
    /// Evaluate a pp-formula over a template.
    Eval {
        #[arg(long)]
        formula: String,
        #[arg(long)]
        template: String,
    },
    /// Apply a pp-power spec to a template pair.
    Power {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        template_a: String,
        #[arg(long)]
        template_b: Option<String>,
    },
    /// Look for a homomorphic-relaxation witness.
    Relax {
        #[arg(long)]
        a_prime: String,
        #[arg(long)]
        b_prime: String,
        #[arg(long)]
        template_a: String,
        #[arg(long)]
        template_b: String,
    },
    /// Reduce an instance through the gadget of a pp-power spec.
    Gadget {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        instance: String,
        /// template providing the base signature
        #[arg(long)]
        template: String,
    },
}

#[derive(Args)]
struct OpArg {
    /// black-box operation: parity | threshold-half | threshold:<k> |
    /// proj:<i> | table:<file>
    #[arg(long)]
    op: String,
}

#[derive(Subcommand)]
enum ProoflabCmd {
    /// Evaluate the star composition t on a matrix.
    T {
        #[arg(long)]
        matrix: String,
        #[command(flatten)]
        op: OpArg,
    },
    /// Exact fraction of ones of a zero-one matrix.
    Area {
        #[arg(long)]
        matrix: String,
    },
    /// Check whether three matrices form a cover.
    Cover {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        z: String,
    },
    /// Compare a matrix to the constant matrix on its side of 1/3.
    Tame {
        #[arg(long)]
        matrix: String,
        #[command(flatten)]
        op: OpArg,
        /// unary map on the value domain, comma separated (default id)
        #[arg(long)]
        g: Option<String>,
    },
    /// Run the pigeonhole refutation construction.
    Refute {
        /// prime arity of the black-box operation
        #[arg(long)]
        p: usize,
        #[arg(long)]
        c_size: usize,
        #[command(flatten)]
        op: OpArg,
        #[arg(long)]
        g: Option<String>,
        /// allow p below the 60|C| bound, for experimentation
        #[arg(long)]
        allow_small_p: bool,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// Emit a random triple instance with a planted 1-in-3 assignment.
    Planted {
        #[arg(long)]
        vars: usize,
        #[arg(long)]
        triples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Runtime caps, overridable through `PCSPWB_LIMITS`, e.g.
/// `PCSPWB_LIMITS=cells=1000000,tuples=500000,nodes=10000000`.
struct Settings {
    limits: Limits,
    solver: SolverConfig,
}

fn settings_from_env() -> Result<Settings, String> {
    let mut limits = Limits::default();
    let mut solver = SolverConfig::default();
    if let Ok(spec) = std::env::var("PCSPWB_LIMITS") {
        for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("PCSPWB_LIMITS: expected key=value, got `{part}`"))?;
            let parse = |v: &str| -> Result<u64, String> {
                v.trim().parse().map_err(|_| format!("PCSPWB_LIMITS: bad number `{v}`"))
            };
            match key.trim() {
                "cells" => limits.max_cells = parse(value)? as usize,
                "tuples" => limits.max_tuples = parse(value)? as usize,
                "nodes" => solver.node_limit = parse(value)?,
                "solutions" => solver.solution_limit = parse(value)? as usize,
                other => return Err(format!("PCSPWB_LIMITS: unknown key `{other}`")),
            }
        }
    }
    Ok(Settings { limits, solver })
}

fn load_template(spec: &str) -> Result<RelationalStructure, Error> {
    if pcspwb_core::structure::TEMPLATE_NAMES.contains(&spec) {
        return builtin_template(spec);
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| Error::Parse { line: 0, msg: format!("{spec}: {e}") })?;
    parse_structure_file(&text)
}

fn read_file(path: &str) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Parse { line: 0, msg: format!("{path}: {e}") })
}

fn load_general_instance(path: &str, tpl: &RelationalStructure) -> Result<Instance, Error> {
    match parse_instance_file(&read_file(path)?, Some(tpl.signature()))? {
        ParsedInstance::General(x) => Ok(x),
        ParsedInstance::Triples(t) => Ok(triples_as_instance(&t, tpl)),
    }
}

/// A triple instance read against a single-ternary-relation template.
fn triples_as_instance(t: &TripleInstance, tpl: &RelationalStructure) -> Instance {
    let constraints = t
        .triples()
        .iter()
        .map(|tr| pcspwb_core::structure::Constraint { relation: 0, vars: tr.to_vec() })
        .collect();
    Instance::new("triples", tpl.signature().clone(), t.var_names().to_vec(), constraints)
        .expect("triple instances are well-formed")
}

fn load_triple_instance(path: &str) -> Result<TripleInstance, Error> {
    match parse_instance_file(&read_file(path)?, None)? {
        ParsedInstance::Triples(t) => Ok(t),
        ParsedInstance::General(_) => Err(Error::Parse {
            line: 1,
            msg: "expected a triple instance (use `triple x y z` lines)".into(),
        }),
    }
}

fn load_matrix(path: &str) -> Result<Matrix, Error> {
    Matrix::from_text(&read_file(path)?)
}

fn parse_op(spec: &str, arity: usize) -> Result<BlackBoxOperation, Error> {
    if spec == "parity" {
        return Ok(BlackBoxOperation::parity(arity));
    }
    if spec == "threshold-half" {
        return Ok(BlackBoxOperation::threshold_half(arity));
    }
    if let Some(k) = spec.strip_prefix("threshold:") {
        let k = k
            .parse()
            .map_err(|_| Error::Parse { line: 0, msg: format!("bad threshold `{k}`") })?;
        return Ok(BlackBoxOperation::threshold_at_least(arity, k));
    }
    if let Some(i) = spec.strip_prefix("proj:") {
        let i: usize = i
            .parse()
            .map_err(|_| Error::Parse { line: 0, msg: format!("bad projection index `{i}`") })?;
        if i >= arity {
            return Err(Error::Range(format!("projection index {i} >= arity {arity}")));
        }
        return Ok(BlackBoxOperation::projection(arity, i));
    }
    if let Some(path) = spec.strip_prefix("table:") {
        let table = OperationTable::from_text(&read_file(path)?)?;
        if table.arity() != arity {
            return Err(Error::ArityMismatch(format!(
                "table arity {} does not match required arity {arity}",
                table.arity()
            )));
        }
        return Ok(BlackBoxOperation::from_table(&table));
    }
    Err(Error::Parse { line: 0, msg: format!("unknown operation `{spec}`") })
}

fn parse_g(spec: Option<&str>, value_domain_hint: usize) -> Result<Assignment, Error> {
    match spec {
        None => Ok(Assignment::identity(value_domain_hint)),
        Some(s) => {
            let values = s
                .split([',', ' '])
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse().map_err(|_| Error::Parse {
                        line: 0,
                        msg: format!("bad g value `{t}`"),
                    })
                })
                .collect::<Result<Vec<usize>, _>>()?;
            Ok(Assignment::new(values))
        }
    }
}

fn print_assignment(names: &[String], a: &Assignment) {
    for (i, name) in names.iter().enumerate() {
        println!("{name} = {}", a.get(i));
    }
}

fn print_map(label: &str, a: &Assignment) {
    let parts: Vec<String> =
        a.values().iter().enumerate().map(|(i, v)| format!("{i}->{v}")).collect();
    println!("{label}: {}", parts.join(" "));
}

/// Parses a pp-power spec file: `power <n>`, then per output relation a
/// line `output <name> <arity>` followed by its formula clauses.
fn parse_power_spec(text: &str) -> Result<PpPowerSpec, Error> {
    let mut exponent = None;
    let mut outputs: Vec<(String, usize, String)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "power" => {
                exponent = Some(toks.get(1).and_then(|t| t.parse().ok()).ok_or(Error::Parse {
                    line: ln + 1,
                    msg: "expected `power <n>`".into(),
                })?);
            }
            "output" => {
                if toks.len() != 3 {
                    return Err(Error::Parse {
                        line: ln + 1,
                        msg: "expected `output <name> <arity>`".into(),
                    });
                }
                let arity = toks[2].parse().map_err(|_| Error::Parse {
                    line: ln + 1,
                    msg: format!("bad arity `{}`", toks[2]),
                })?;
                outputs.push((toks[1].to_string(), arity, String::new()));
            }
            "end" => break,
            _ => {
                let Some(current) = outputs.last_mut() else {
                    return Err(Error::Parse {
                        line: ln + 1,
                        msg: "formula clause before any `output`".into(),
                    });
                };
                current.2.push_str(line);
                current.2.push('\n');
            }
        }
    }
    let exponent = exponent.ok_or(Error::Parse { line: 1, msg: "missing `power <n>`".into() })?;
    let outputs = outputs
        .into_iter()
        .map(|(name, arity, clauses)| {
            Ok(PpPowerOutput { name, arity, formula: PpFormula::parse(&clauses)? })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    PpPowerSpec::new(exponent, outputs)
}

fn run(cli: Cli, settings: &Settings) -> Result<u8, Error> {
    match cli.command {
        Command::SolveCsp { instance, template } => {
            let tpl = load_template(&template)?;
            let x = load_general_instance(&instance, &tpl)?;
            match find_homomorphism(&x, &tpl, &settings.solver)? {
                SearchOutcome::Found(h) => {
                    println!("yes");
                    print_assignment(x.var_names(), &h);
                    Ok(0)
                }
                SearchOutcome::NoSolution => {
                    println!("no");
                    Ok(1)
                }
            }
        }
        Command::SolvePcsp13Nae { instance, method } => {
            let method = match method.as_str() {
                "z" => Method::Integers,
                "q" => Method::Rationals,
                other => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("method must be z or q, got `{other}`"),
                    })
                }
            };
            let x = load_triple_instance(&instance)?;
            let answer = solve_pcsp(&x, method);
            match answer.verdict {
                Verdict::Yes(psi) => {
                    assert!(verify_assignment(&x, &psi, VerifyMode::NotAllEqual)?);
                    println!("yes");
                    print_assignment(x.var_names(), &psi);
                    Ok(0)
                }
                Verdict::No => {
                    println!("no");
                    Ok(1)
                }
            }
        }
        Command::Poly { cmd } => run_poly(cmd, settings),
        Command::Pp { cmd } => run_pp(cmd, settings),
        Command::Prooflab { cmd } => run_prooflab(cmd),
        Command::Gen { cmd } => match cmd {
            GenCmd::Planted { vars, triples, seed } => {
                let x = gen_planted(vars, triples, seed)?;
                print!("{}", print_triple_instance(&x));
                Ok(0)
            }
        },
    }
}

fn run_poly(cmd: PolyCmd, settings: &Settings) -> Result<u8, Error> {
    match cmd {
        PolyCmd::Find { template_a, template_b, arity, cyclic } => {
            let a = load_template(&template_a)?;
            let b = match template_b {
                Some(t) => load_template(&t)?,
                None => a.clone(),
            };
            let sym = if cyclic { SymmetryConstraint::Cyclic } else { SymmetryConstraint::None };
            match find_polymorphism(&a, &b, arity, sym, &settings.limits)? {
                Some(table) => {
                    print!("{}", table.to_text());
                    Ok(0)
                }
                None => {
                    println!("none");
                    Ok(1)
                }
            }
        }
        PolyCmd::Check { table, template_a, template_b, cyclic } => {
            let t = OperationTable::from_text(&read_file(&table)?)?;
            let a = load_template(&template_a)?;
            let poly_ok = match template_b {
                Some(bspec) => {
                    let b = load_template(&bspec)?;
                    is_pcsp_polymorphism(&t, &a, &b)?
                }
                None => is_polymorphism(&t, &a)?,
            };
            println!("polymorphism = {poly_ok}");
            let mut ok = poly_ok;
            if cyclic {
                let cyc = is_cyclic(&t)?;
                println!("cyclic = {cyc}");
                ok = ok && cyc;
            }
            Ok(if ok { 0 } else { 1 })
        }
        PolyCmd::Survey { template_a, template_b, max_prime } => {
            let a = load_template(&template_a)?;
            let b = match template_b {
                Some(t) => load_template(&t)?,
                None => a.clone(),
            };
            let results = cyclic_survey(&a, &b, max_prime, &settings.limits)?;
            let mut any = false;
            for (p, table) in results {
                match table {
                    Some(_) => {
                        any = true;
                        println!("p = {p}: found");
                    }
                    None => println!("p = {p}: none"),
                }
            }
            Ok(if any { 0 } else { 1 })
        }
        PolyCmd::PseudoSiggers { template } => {
            let c = load_template(&template)?;
            match pseudo_siggers_search(&c, &settings.limits)? {
                Some(w) => {
                    println!("witness");
                    print_map("alpha", &w.alpha);
                    print_map("beta", &w.beta);
                    print!("{}", w.s.to_text());
                    Ok(0)
                }
                None => {
                    println!("none");
                    Ok(1)
                }
            }
        }
    }
}

fn run_pp(cmd: PpCmd, settings: &Settings) -> Result<u8, Error> {
    match cmd {
        PpCmd::Eval { formula, template } => {
            let phi = PpFormula::parse(&read_file(&formula)?)?;
            let tpl = load_template(&template)?;
            let rel = evaluate_pp(&phi, &tpl, &settings.limits)?;
            for t in rel {
                let parts: Vec<String> = t.iter().map(|e| e.to_string()).collect();
                println!("{}", parts.join(" "));
            }
            Ok(0)
        }
        PpCmd::Power { spec, template_a, template_b } => {
            let spec = parse_power_spec(&read_file(&spec)?)?;
            let a = load_template(&template_a)?;
            let b = match template_b {
                Some(t) => load_template(&t)?,
                None => a.clone(),
            };
            let (ap, bp) = pp_power(&spec, &a, &b, &settings.limits)?;
            print!("{}", print_structure(&ap));
            print!("{}", print_structure(&bp));
            Ok(0)
        }
        PpCmd::Relax { a_prime, b_prime, template_a, template_b } => {
            let ap = load_template(&a_prime)?;
            let bp = load_template(&b_prime)?;
            let a = load_template(&template_a)?;
            let b = load_template(&template_b)?;
            match check_relaxation(&ap, &bp, &a, &b)? {
                Some(w) => {
                    println!("witness");
                    print_map("f", &w.f);
                    print_map("g", &w.g);
                    Ok(0)
                }
                None => {
                    println!("none");
                    Ok(1)
                }
            }
        }
        PpCmd::Gadget { spec, instance, template } => {
            let spec = parse_power_spec(&read_file(&spec)?)?;
            let tpl = load_template(&template)?;
            let text = read_file(&instance)?;
            let x = match parse_instance_file(&text, Some(&spec.output_signature()))? {
                ParsedInstance::General(x) => x,
                ParsedInstance::Triples(_) => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: "gadget reduction expects a constraint instance".into(),
                    })
                }
            };
            let reduced = gadget_reduce(&x, &spec, tpl.signature())?;
            print!("{}", print_instance(&reduced));
            Ok(0)
        }
    }
}

fn run_prooflab(cmd: ProoflabCmd) -> Result<u8, Error> {
    match cmd {
        ProoflabCmd::T { matrix, op } => {
            let x = load_matrix(&matrix)?;
            let s = parse_op(&op.op, x.side())?;
            println!("{}", eval_t(&s, &x)?);
            Ok(0)
        }
        ProoflabCmd::Area { matrix } => {
            let x = load_matrix(&matrix)?;
            let lambda: BigRational = area(&x)?;
            println!("{lambda}");
            Ok(0)
        }
        ProoflabCmd::Cover { x, y, z } => {
            let (mx, my, mz) = (load_matrix(&x)?, load_matrix(&y)?, load_matrix(&z)?);
            let ok = is_cover(&mx, &my, &mz)?;
            println!("cover = {ok}");
            Ok(if ok { 0 } else { 1 })
        }
        ProoflabCmd::Tame { matrix, op, g } => {
            let x = load_matrix(&matrix)?;
            let s = parse_op(&op.op, x.side())?;
            let g = parse_g(g.as_deref(), 2)?;
            let report = is_tame(&x, &s, &g)?;
            println!("area = {}", report.area);
            println!("tame = {}", report.tame);
            Ok(if report.tame { 0 } else { 1 })
        }
        ProoflabCmd::Refute { p, c_size, op, g, allow_small_p } => {
            let s = parse_op(&op.op, p)?;
            let g = parse_g(g.as_deref(), 2)?;
            let report = refute_cyclic(&s, c_size, &g, None, allow_small_p)?;
            print!("{report}");
            Ok(0)
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::ResourceLimit(_) | Error::NodeLimitExceeded { .. } => 3,
        Error::PigeonholeFailure(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let settings = match settings_from_env() {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    match run(cli, &settings) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
