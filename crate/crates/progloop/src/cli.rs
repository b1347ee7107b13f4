//! The `progloop` command line.
//!
//! Exit status: 0 success or `sat`, 1 a property fails or `unsat-up-to-n`,
//! 2 usage or input error, 3 solver failure or `unknown`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use progloop_core::closure::{closure, theta, uc, update, FormulaSet};
use progloop_core::etr::{self, EnumMode, SatOptions, SatOutcome, SolverBackend};
use progloop_core::formula::{classify, display_set, formula_sets, parse_formula, Fragment};
use progloop_core::measure::{aux_sets, measure, path_norm};
use progloop_core::modelcheck::Checker;
use progloop_core::progress::{
    compress_model, search_loop_generic, search_loop_l2, verify_loop, SearchLimits, SearchMode,
};
use progloop_core::rational::format_rational;
use progloop_core::{MarkovChain, StateFormula, StateId};
use serde_json::{json, Value};

use crate::model::{model_to_json, read_model, to_dot, ModelFile};
use crate::report;
use crate::solver::{emit_candidates, CommandBackend, SOLVER_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "progloop",
    version,
    about = "Progress loops, small models and bounded satisfiability for quantitative PCTL"
)]
pub struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Satisfaction set and exact probabilities of a formula.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: String,
        /// Report only whether this state satisfies the formula.
        #[arg(long)]
        state: Option<String>,
    },
    /// Closure, update and θ at a state.
    Closure(At),
    /// deg, cf, b and the progress measure at a state.
    Measure {
        #[command(flatten)]
        at: At,
        #[arg(long, value_enum, default_value_t = SetKind::Uc)]
        set: SetKind,
    },
    /// Progress loops for UC of the formula at a state.
    Loop {
        #[command(subcommand)]
        action: LoopAction,
    },
    /// Small model of the formula built from the given one.
    Compress {
        #[command(flatten)]
        at: At,
        #[command(flatten)]
        search: SearchOpts,
        /// Also write the model JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bounded satisfiability through candidate graphs and a real-arithmetic solver.
    Sat(SatArgs),
    /// Fragment membership of a formula.
    Fragment {
        #[arg(long)]
        formula: String,
    },
    /// Graphviz rendering of a model.
    ExportDot {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct At {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub state: String,
    #[arg(long)]
    pub formula: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetKind {
    /// UC of the formula.
    Uc,
    /// The formula alone.
    Raw,
}

#[derive(Debug, Subcommand)]
pub enum LoopAction {
    /// Check a loop given as a JSON array of formula-string arrays.
    Verify {
        #[command(flatten)]
        at: At,
        #[arg(long)]
        sets: PathBuf,
    },
    Search {
        #[command(flatten)]
        at: At,
        #[command(flatten)]
        search: SearchOpts,
    },
}

#[derive(Debug, Args)]
pub struct SearchOpts {
    /// Exhaustive search instead of the direct construction.
    #[arg(long)]
    pub generic: bool,
    #[arg(long, default_value_t = SearchLimits::default().max_n)]
    pub max_n: usize,
    #[arg(long, default_value_t = SearchLimits::default().node_budget)]
    pub budget: u64,
}

impl SearchOpts {
    fn mode(&self) -> SearchMode {
        if self.generic {
            SearchMode::Generic(SearchLimits { max_n: self.max_n, node_budget: self.budget })
        } else {
            SearchMode::L2
        }
    }
}

#[derive(Debug, Args)]
pub struct SatArgs {
    #[arg(long)]
    pub formula: String,
    /// Largest number of states.
    #[arg(long, default_value_t = 3)]
    pub bound: usize,
    /// Solver command with a `{file}` placeholder, e.g. `z3 -smt2 {file}`.
    #[arg(long, env = SOLVER_ENV)]
    pub solver_cmd: Option<String>,
    /// Seconds per candidate.
    #[arg(long, default_value_t = 10.0)]
    pub timeout: f64,
    /// Keep one constraint file per candidate in this directory.
    #[arg(long)]
    pub dump_smt: Option<PathBuf>,
    /// Only write the constraint files (needs --dump-smt).
    #[arg(long)]
    pub emit_only: bool,
    /// Skip the uniform-probability probe.
    #[arg(long)]
    pub no_probe: bool,
    /// Enumerate every graph, not only those rooted at the first vertex.
    #[arg(long)]
    pub all_graphs: bool,
}

/// A failure with its exit status.
#[derive(Debug)]
struct Failure {
    code: i32,
    error: anyhow::Error,
}

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_USAGE, error: e.into() }
}

type Outcome = Result<i32, Failure>;

struct Ctx<'a> {
    json: bool,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn emit(&mut self, text: &str, value: Value) -> std::io::Result<()> {
        if self.json {
            writeln!(self.out, "{}", serde_json::to_string_pretty(&value).expect("json"))
        } else {
            write!(self.out, "{}", text)
        }
    }
}

fn load(path: &Path) -> Result<MarkovChain, Failure> {
    read_model(path).map_err(input)
}

fn formula(text: &str) -> Result<StateFormula, Failure> {
    parse_formula(text).map_err(|e| input(anyhow!("formula `{}`: {}", text, e)))
}

fn state(m: &MarkovChain, name: &str) -> Result<StateId, Failure> {
    m.index_of(name).ok_or_else(|| input(anyhow!("no state `{}` in the model", name)))
}

fn names(m: &MarkovChain, set: &std::collections::BTreeSet<StateId>) -> Vec<String> {
    set.iter().map(|s| m.name(*s).to_string()).collect()
}

fn io(e: std::io::Error) -> Failure {
    Failure { code: EXIT_USAGE, error: e.into() }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{}", text);
            } else {
                let _ = write!(out, "{}", text);
            }
            return code;
        }
    };
    let mut ctx = Ctx { json: cli.json, out };
    match dispatch(cli.command, &mut ctx) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.error);
            f.code
        }
    }
}

fn dispatch(cmd: Command, ctx: &mut Ctx<'_>) -> Outcome {
    match cmd {
        Command::Check { model, formula: f, state: st } => check(ctx, &model, &f, st.as_deref()),
        Command::Closure(at) => closure_cmd(ctx, &at),
        Command::Measure { at, set } => measure_cmd(ctx, &at, set),
        Command::Loop { action: LoopAction::Verify { at, sets } } => loop_verify(ctx, &at, &sets),
        Command::Loop { action: LoopAction::Search { at, search } } => loop_search(ctx, &at, &search),
        Command::Compress { at, search, out } => compress_cmd(ctx, &at, &search, out.as_ref()),
        Command::Sat(args) => sat_cmd(ctx, &args),
        Command::Fragment { formula: f } => fragment_cmd(ctx, &f),
        Command::ExportDot { model } => {
            let m = load(&model)?;
            ctx.emit(&to_dot(&m), json!({ "dot": to_dot(&m) })).map_err(io)?;
            Ok(EXIT_OK)
        }
    }
}

fn check(ctx: &mut Ctx<'_>, model: &Path, text: &str, at: Option<&str>) -> Outcome {
    let m = load(model)?;
    let phi = formula(text)?;
    let c = Checker::new(&m);
    if let Some(name) = at {
        let s = state(&m, name)?;
        let holds = c.holds(s, &phi);
        ctx.emit(
            &format!("{}\n", holds),
            json!({ "formula": phi.to_string(), "state": name, "holds": holds }),
        )
        .map_err(io)?;
        return Ok(if holds { EXIT_OK } else { EXIT_FAIL });
    }
    let sat = c.sat_set(&phi);
    let mut text = format!("sat: {{{}}}\n", names(&m, &sat).join(", "));
    let mut probs = Vec::new();
    for f in phi.sub() {
        let Some((p, _, _)) = f.as_prob() else { continue };
        let values: Vec<(String, String)> =
            m.states().map(|s| (m.name(s).to_string(), format_rational(&c.prob(s, p)))).collect();
        text.push_str(&format!(
            "P({}): {}\n",
            p,
            values.iter().map(|(s, v)| format!("{}={}", s, v)).collect::<Vec<_>>().join(" ")
        ));
        let map: serde_json::Map<String, Value> =
            values.into_iter().map(|(s, v)| (s, Value::String(v))).collect();
        probs.push(json!({ "path": p.to_string(), "values": map }));
    }
    ctx.emit(&text, json!({ "formula": phi.to_string(), "sat": names(&m, &sat), "probabilities": probs }))
        .map_err(io)?;
    Ok(EXIT_OK)
}

/// Model, checker-free pieces shared by the state-level commands.
fn at_state(at: &At) -> Result<(MarkovChain, StateId, StateFormula), Failure> {
    let m = load(&at.model)?;
    let s = state(&m, &at.state)?;
    let phi = formula(&at.formula)?;
    Ok((m, s, phi))
}

fn unsatisfied(state: &str, phi: &StateFormula) -> Failure {
    Failure { code: EXIT_FAIL, error: anyhow!("state `{}` does not satisfy `{}`", state, phi) }
}

fn closure_cmd(ctx: &mut Ctx<'_>, at: &At) -> Outcome {
    let (m, s, phi) = at_state(at)?;
    let c = Checker::new(&m);
    let x: FormulaSet = [phi.clone()].into_iter().collect();
    let cl = closure(&c, s, &x).map_err(|_| unsatisfied(&at.state, &phi))?;
    let up = update(&c, s, &cl).expect("closure is satisfied");
    let ucx = uc(&c, s, &x).expect("closure is satisfied");
    let th = theta(&c, s, &ucx);
    let text = format!(
        "C: {}\nU(C): {}\nUC: {}\ntheta(UC): {}\n",
        display_set(&cl),
        display_set(&up),
        display_set(&ucx),
        display_set(&th)
    );
    let v = json!({
        "closure": report::formula_set(&cl),
        "update": report::formula_set(&up),
        "uc": report::formula_set(&ucx),
        "theta": report::formula_set(&th),
    });
    ctx.emit(&text, v).map_err(io)?;
    Ok(EXIT_OK)
}

fn measure_cmd(ctx: &mut Ctx<'_>, at: &At, kind: SetKind) -> Outcome {
    let (m, s, phi) = at_state(at)?;
    let c = Checker::new(&m);
    let single: FormulaSet = [phi.clone()].into_iter().collect();
    let x = match kind {
        SetKind::Uc => uc(&c, s, &single).map_err(|_| unsatisfied(&at.state, &phi))?,
        SetKind::Raw if c.holds(s, &phi) => single,
        SetKind::Raw => return Err(unsatisfied(&at.state, &phi)),
    };
    let aux = aux_sets(&c, s, &x);
    let top = formula_sets(&x).top_psub;
    let mu = measure(&c, s, &x);
    let mut text = format!(
        "X: {}\ndeg: {}\ncf: {}\nb: {}\n",
        display_set(&x),
        path_display(&aux.deg),
        path_display(&aux.cf),
        aux.b
    );
    for p in &top {
        text.push_str(&format!("norm {}: {}\n", p, path_norm(p)));
    }
    text.push_str(&format!("measure: {}\n", mu));
    let norms: serde_json::Map<String, Value> =
        top.iter().map(|p| (p.to_string(), json!(path_norm(p)))).collect();
    let v = json!({
        "x": report::formula_set(&x),
        "deg": report::path_set(&aux.deg),
        "cf": report::path_set(&aux.cf),
        "b": aux.b,
        "norms": norms,
        "measure": mu,
    });
    ctx.emit(&text, v).map_err(io)?;
    Ok(EXIT_OK)
}

fn path_display(ps: &std::collections::BTreeSet<progloop_core::PathFormula>) -> String {
    format!("{{{}}}", ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "))
}

fn uc_at(at: &At) -> Result<(MarkovChain, StateId, FormulaSet), Failure> {
    let (m, s, phi) = at_state(at)?;
    let x = {
        let c = Checker::new(&m);
        uc(&c, s, &[phi.clone()].into_iter().collect()).map_err(|_| unsatisfied(&at.state, &phi))?
    };
    Ok((m, s, x))
}

fn loop_verify(ctx: &mut Ctx<'_>, at: &At, sets: &Path) -> Outcome {
    let (m, s, x) = uc_at(at)?;
    let text =
        std::fs::read_to_string(sets).map_err(|e| input(anyhow!("cannot read {}: {}", sets.display(), e)))?;
    let l = report::parse_loop(&text).map_err(input)?;
    let c = Checker::new(&m);
    match verify_loop(&c, s, &x, &l) {
        Ok(()) => {
            let delta = l.delta();
            ctx.emit(
                &format!("progress loop\ndelta: {}\n", display_set(&delta)),
                json!({ "valid": true, "delta": report::formula_set(&delta) }),
            )
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Err(vs) => {
            let lines: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
            ctx.emit(
                &format!("not a progress loop\n{}\n", lines.join("\n")),
                json!({ "valid": false, "violations": lines }),
            )
            .map_err(io)?;
            Ok(EXIT_FAIL)
        }
    }
}

fn loop_search(ctx: &mut Ctx<'_>, at: &At, opts: &SearchOpts) -> Outcome {
    let (m, s, x) = uc_at(at)?;
    let c = Checker::new(&m);
    let found = match opts.mode() {
        SearchMode::L2 => search_loop_l2(&c, s, &x).map(Some),
        SearchMode::Generic(limits) => search_loop_generic(&c, s, &x, limits),
    };
    match found {
        Ok(Some(l)) => {
            let delta = l.delta();
            ctx.emit(
                &format!("{}delta: {}\n", l, display_set(&delta)),
                json!({ "loop": report::progress_loop(&l), "delta": report::formula_set(&delta) }),
            )
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Ok(None) => {
            ctx.emit("no progress loop within the bound\n", json!({ "loop": null })).map_err(io)?;
            Ok(EXIT_FAIL)
        }
        Err(e) => Err(Failure { code: EXIT_FAIL, error: e.into() }),
    }
}

fn compress_cmd(ctx: &mut Ctx<'_>, at: &At, opts: &SearchOpts, out: Option<&PathBuf>) -> Outcome {
    let (m, s, phi) = at_state(at)?;
    let res =
        compress_model(&m, s, &phi, opts.mode()).map_err(|e| Failure { code: EXIT_FAIL, error: e.into() })?;
    let model = model_to_json(&res.chain);
    if let Some(path) = out {
        std::fs::write(path, &model).map_err(|e| input(anyhow!("cannot write {}: {}", path.display(), e)))?;
    }
    let mut text = String::new();
    report::trace_text(&res.trace, 0, &mut text);
    text.push_str(&format!("entry: {}\n{}\n", res.chain.name(res.entry), model));
    let v = json!({
        "entry": res.chain.name(res.entry),
        "model": ModelFile::from_chain(&res.chain),
        "trace": report::trace(&res.trace),
    });
    ctx.emit(&text, v).map_err(io)?;
    Ok(EXIT_OK)
}

fn sat_cmd(ctx: &mut Ctx<'_>, args: &SatArgs) -> Outcome {
    let phi = formula(&args.formula)?;
    if args.bound == 0 || args.bound > etr::MAX_VERTICES {
        return Err(input(anyhow!("--bound must be in 1..={}", etr::MAX_VERTICES)));
    }
    let mode = if args.all_graphs { EnumMode::Viable } else { EnumMode::Rooted };
    if args.emit_only {
        let dir = args.dump_smt.as_ref().ok_or_else(|| input(anyhow!("--emit-only needs --dump-smt")))?;
        let nf = etr::f_normal_form(&phi);
        let (written, refuted) = emit_candidates(&nf, args.bound, mode, dir).map_err(io)?;
        ctx.emit(
            &format!(
                "wrote {} constraint files to {} ({} refuted without solving)\n",
                written,
                dir.display(),
                refuted
            ),
            json!({ "written": written, "refuted": refuted, "dir": dir.display().to_string() }),
        )
        .map_err(io)?;
        return Ok(EXIT_OK);
    }
    if !(args.timeout > 0.0 && args.timeout.is_finite()) {
        return Err(input(anyhow!("--timeout must be positive")));
    }
    let mut backend = match &args.solver_cmd {
        Some(cmd) => {
            let mut b = CommandBackend::new(cmd)
                .map_err(|e| input(anyhow!(e)))?
                .with_timeout(Duration::from_secs_f64(args.timeout));
            if let Some(dir) = &args.dump_smt {
                std::fs::create_dir_all(dir).map_err(io)?;
                b = b.with_dump_dir(dir.clone());
            }
            Some(b)
        }
        None => None,
    };
    let options = SatOptions { mode, uniform_probe: !args.no_probe };
    let report = etr::solve_bounded_sat(
        &phi,
        args.bound,
        backend.as_mut().map(|b| b as &mut dyn SolverBackend),
        options,
    )
    .map_err(|e| Failure { code: EXIT_BACKEND, error: e.into() })?;
    let st = &report.stats;
    let stats = json!({
        "candidates": st.candidates,
        "interval_refuted": st.interval_refuted,
        "probe_hits": st.probe_hits,
        "solver_calls": st.solver_calls,
        "solver_unsat": st.solver_unsat,
        "undecided": st.undecided,
    });
    let stats_text = format!(
        "candidates {}, refuted by intervals {}, probe hits {}, solver calls {} ({} unsat), undecided {}\n",
        st.candidates, st.interval_refuted, st.probe_hits, st.solver_calls, st.solver_unsat, st.undecided
    );
    match &report.outcome {
        SatOutcome::Model { chain, entry, .. } => {
            let text =
                format!("sat\nentry: {}\n{}\n{}", chain.name(*entry), model_to_json(chain), stats_text);
            let v = json!({
                "result": "sat",
                "entry": chain.name(*entry),
                "model": ModelFile::from_chain(chain),
                "stats": stats,
            });
            ctx.emit(&text, v).map_err(io)?;
            Ok(EXIT_OK)
        }
        SatOutcome::UnsatUpToN => {
            ctx.emit(
                &format!("unsat-up-to-n\n{}", stats_text),
                json!({ "result": "unsat-up-to-n", "bound": args.bound, "stats": stats }),
            )
            .map_err(io)?;
            Ok(EXIT_FAIL)
        }
        SatOutcome::Unknown => {
            ctx.emit(&format!("unknown\n{}", stats_text), json!({ "result": "unknown", "stats": stats }))
                .map_err(io)?;
            Ok(EXIT_BACKEND)
        }
    }
}

fn fragment_cmd(ctx: &mut Ctx<'_>, text: &str) -> Outcome {
    let phi = formula(text)?;
    let m = classify(&phi);
    let all = [Fragment::L1, Fragment::L2, Fragment::L3, Fragment::L4];
    let members: Vec<String> = all.iter().filter(|f| m.contains(**f)).map(|f| format!("{:?}", f)).collect();
    let lines: String = all.iter().map(|f| format!("{:?}: {}\n", f, m.contains(*f))).collect();
    ctx.emit(&lines, json!({ "formula": phi.to_string(), "fragments": members })).map_err(io)?;
    Ok(EXIT_OK)
}
