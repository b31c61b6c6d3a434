//! `cgap` command-line front end. JSON goes to stdout, diagnostics to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cgap::equilibria::{enumerate_coherent, enumerate_strong_equilibria, EnumOptions, Equilibrium, DEFAULT_CAP};
use cgap::experiments::{compute_rho, run_matrix, synth_network, DiffusionModel, Perturbation, ScenarioConfig, SynthConfig, PARTIES};
use cgap::game::{compile_apt_simon, compile_generic_game, AptSimonGame, GameCompileOptions, GenericGame};
use cgap::milp::{compute_t_hat, enumerate_se_milp, export_lp, Sense, SolveOptions};
use cgap::queries::{augment_choice_atoms, query_system, range_linear_milp, range_monotone_vic2, range_naive, EstimationQuery, LinearQuerySpec, RangeAnswer, RangeMethod};
use cgap::interp::is_model;
use cgap::semantics::{is_coherent_model, is_strong_equilibrium};
use cgap::text::{interpretation_json, json_number, parse_likes, parse_network, parse_program, print_ground, print_program, write_likes, write_network};
use cgap::vic::{classify, find_se_vic2, VicClassification};
use cgap::{ground, Error, GroundProgram, Interpretation, Program, SocialNetwork, State};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "cgap", version, about = "Equilibria and range queries for choice annotated programs")]
struct Cli {
    /// Worker threads (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Input {
    /// Program in .cgap syntax.
    program: PathBuf,
    /// Social network TSV whose vertices and edges become facts.
    #[arg(long)]
    network: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMethod {
    Vic2,
    Enumerate,
    Milp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Coherent,
    Se,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryMethod {
    Naive,
    Monotone,
    Milp,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, validate and classify a program.
    Validate(Input),
    /// Print the ground program in program syntax.
    Ground(Input),
    /// Find one strong equilibrium.
    Solve {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "vic2")]
        method: SolveMethod,
        /// Action every player starts on in the two-choice search.
        #[arg(long, default_value_t = 1)]
        default_action: usize,
        /// Only report atoms matching this `*` pattern.
        #[arg(long)]
        filter: Option<String>,
    },
    /// List coherent models or strong equilibria.
    Enumerate {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "se")]
        kind: Kind,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        #[arg(long)]
        filter: Option<String>,
    },
    /// Check an interpretation (JSON object atom -> value) against a program.
    Check {
        #[command(flatten)]
        input: Input,
        interpretation: PathBuf,
    },
    /// Bounds of an estimation query over the strong equilibria.
    Query {
        #[command(flatten)]
        input: Input,
        /// Query file: {aggregate, targets, linear_spec?}.
        #[arg(long)]
        query: PathBuf,
        #[arg(long, value_enum, default_value = "naive")]
        method: QueryMethod,
        #[arg(long)]
        t_hat: Option<usize>,
    },
    /// Compile a normal-form game (JSON) into a program.
    CompileGame {
        game: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Round the per-unit scale to this many decimals.
        #[arg(long)]
        unit_decimals: Option<u32>,
    },
    /// Compile a social network adoption game (JSON) into a program.
    CompileAptSimon { game: PathBuf },
    /// Write the equilibrium constraint system in LP format.
    ExportLp {
        #[command(flatten)]
        input: Input,
        /// Iteration bound; computed when absent.
        #[arg(long)]
        t_hat: Option<usize>,
        /// Query file whose linear form becomes the objective.
        #[arg(long)]
        objective: Option<PathBuf>,
        #[arg(long)]
        minimize: bool,
    },
    /// Run election prediction scenarios and print result rows.
    Experiment {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        likes: PathBuf,
        /// Defaults merged under the flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Diffusion models for choice 1 and 2, e.g. `1,3`.
        #[arg(long)]
        models: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        competition: Option<u32>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// none, node:P or edge:P.
        #[arg(long)]
        perturb: Option<String>,
        /// Repeat with seeds seed..seed+runs and print a list.
        #[arg(long)]
        runs: Option<u64>,
    },
    /// Generate a synthetic network and likes file.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        vertices: Option<usize>,
        #[arg(long)]
        edges: Option<usize>,
        #[arg(long)]
        communities: Option<usize>,
        #[arg(long)]
        homophily: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Writes PREFIX.sn.tsv and PREFIX.likes.tsv.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Outcome of a command: what to print and the exit code.
struct Out {
    body: Value,
    code: u8,
}

impl Out {
    fn ok(body: Value) -> Self {
        Out { body, code: 0 }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Undefined | Error::NoProgress => 1,
        Error::CapExceeded { .. } => 3,
        Error::NonConvergence { .. } | Error::NonFinitary(_) => 4,
        _ => 2,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Syntax { .. } => "syntax",
        Error::Invalid(_) => "invalid",
        Error::Network(_) => "network",
        Error::UnknownFunction(_) => "unknown_function",
        Error::EmptyDomain => "empty_domain",
        Error::UnknownAtom(_) => "unknown_atom",
        Error::IndexMismatch => "index_mismatch",
        Error::NotGround(_) => "not_ground",
        Error::NotAModel => "not_a_model",
        Error::BadState { .. } => "bad_state",
        Error::BadAction { .. } => "bad_action",
        Error::NonConvergence { .. } => "non_convergence",
        Error::NotVic { .. } => "not_vic",
        Error::CapExceeded { .. } => "cap_exceeded",
        Error::Unsupported(_) => "unsupported",
        Error::NonFinitary(_) => "non_finitary",
        Error::Query(_) => "query",
        Error::Undefined => "undefined",
        Error::NoProgress => "no_progress",
        Error::Experiment(_) => "experiment",
        Error::Io(_) => "io",
    }
}

fn error_json(e: &Error) -> Value {
    let mut m = Map::new();
    m.insert("error".into(), json!(error_kind(e)));
    m.insert("message".into(), json!(e.to_string()));
    if let Error::NotVic { expected, witness } = e {
        m.insert("expected_m".into(), json!(expected));
        m.insert("witness".into(), json!(witness));
    }
    Value::Object(m)
}

/// Floats rounded to 9 significant digits, recursively.
fn tidy(v: Value) -> Value {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => n.as_f64().map_or(Value::Number(n), json_number),
        Value::Array(a) => Value::Array(a.into_iter().map(tidy).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, tidy(v))).collect()),
        v => v,
    }
}

/// Stdout write that tolerates a closed pipe.
fn emit(s: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(s.as_bytes()).and_then(|_| out.flush());
}

fn read(path: &Path) -> cgap::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> cgap::Result<T> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load(input: &Input) -> cgap::Result<(Program, GroundProgram)> {
    let p = parse_program(&read(&input.program)?)?;
    let sn = match &input.network {
        Some(f) => parse_network(&read(f)?)?,
        None => SocialNetwork::new(),
    };
    let gp = ground(&p, &sn)?;
    Ok((p, gp))
}

fn classification_json(c: &VicClassification) -> Value {
    match c {
        VicClassification::Vic { m } => json!({ "vic": true, "m": m, "vic2": *m == 2 }),
        VicClassification::NotVic(w) => json!({ "vic": false, "witness": w.to_string() }),
    }
}

/// Per-vertex chosen decision atom.
fn choices_json(gp: &GroundProgram, s: &State) -> Value {
    let m: Map<String, Value> = gp
        .vc
        .iter()
        .zip(&s.0)
        .map(|(inst, &a)| (gp.index.vertex_name(inst.vertex).to_string(), json!(gp.index.name(inst.decisions[a - 1]))))
        .collect();
    Value::Object(m)
}

fn equilibrium_json(gp: &GroundProgram, state: &State, interp: &Interpretation, filter: Option<&str>) -> Value {
    json!({
        "state": state.0,
        "choices": choices_json(gp, state),
        "interpretation": interpretation_json(interp, filter),
    })
}

fn range_json(gp: &GroundProgram, r: &RangeAnswer) -> Value {
    let method = match r.method {
        RangeMethod::Naive => "naive",
        RangeMethod::Monotone => "monotone",
        RangeMethod::Milp => "milp",
    };
    let mut m = Map::new();
    m.insert("method".into(), json!(method));
    m.insert("exact".into(), json!(r.exact));
    match r.bounds {
        Some((lo, hi)) => {
            m.insert("status".into(), json!("defined"));
            m.insert("glb".into(), json!(lo));
            m.insert("lub".into(), json!(hi));
        }
        None => {
            m.insert("status".into(), json!("undefined"));
        }
    }
    if let Some((a, b)) = &r.witnesses {
        m.insert("witnesses".into(), json!({ "glb": choices_json(gp, a), "lub": choices_json(gp, b) }));
    }
    Value::Object(m)
}

#[derive(Deserialize)]
struct QueryFile {
    #[serde(flatten)]
    query: EstimationQuery,
    #[serde(default)]
    linear_spec: Option<LinearQuerySpec>,
}

fn validate(input: &Input) -> cgap::Result<Out> {
    let (p, gp) = load(input)?;
    let preds: Vec<String> = p.predicates().into_keys().collect();
    Ok(Out::ok(json!({
        "classification": classification_json(&classify(&p)),
        "rules": p.rules.len(),
        "templates": p.templates.len(),
        "predicates": preds,
        "constants": p.constants(),
        "ground_atoms": gp.atom_count(),
        "ground_rules": gp.rules.len(),
        "players": gp.vc.len(),
    })))
}

fn solve(input: &Input, method: SolveMethod, default_action: usize, filter: Option<&str>) -> cgap::Result<Out> {
    let (p, gp) = load(input)?;
    let found: Option<(State, Interpretation, Value)> = match method {
        SolveMethod::Vic2 => {
            let run = find_se_vic2(&p, &gp, default_action)?;
            Some((run.state, run.model, json!(run.flips)))
        }
        SolveMethod::Enumerate => enumerate_strong_equilibria(&gp, &EnumOptions { limit: Some(1), ..Default::default() })?.into_iter().next().map(|e| (e.state, e.interp, Value::Null)),
        SolveMethod::Milp => {
            let t = compute_t_hat(&gp, 1)?;
            enumerate_se_milp(&gp, Some(t), SolveOptions::default())?.into_iter().next().map(|e| (e.state, e.interp, Value::Null))
        }
    };
    Ok(match found {
        Some((state, interp, flips)) => {
            let mut body = equilibrium_json(&gp, &state, &interp, filter);
            if !flips.is_null() {
                body["flips"] = flips;
            }
            Out::ok(body)
        }
        None => Out { body: json!({ "error": "no_equilibrium", "message": "the program has no strong equilibrium" }), code: 1 },
    })
}

fn enumerate(input: &Input, kind: Kind, limit: Option<usize>, cap: u64, filter: Option<&str>) -> cgap::Result<Out> {
    let (_, gp) = load(input)?;
    let opts = EnumOptions { cap, limit };
    let eqs: Vec<Equilibrium> = match kind {
        Kind::Coherent => enumerate_coherent(&gp, &opts)?,
        Kind::Se => enumerate_strong_equilibria(&gp, &opts)?,
    };
    let list: Vec<Value> = eqs.iter().map(|e| equilibrium_json(&gp, &e.state, &e.interp, filter)).collect();
    let code = if list.is_empty() { 1 } else { 0 };
    Ok(Out { body: Value::Array(list), code })
}

fn check(input: &Input, path: &Path) -> cgap::Result<Out> {
    let (_, gp) = load(input)?;
    let raw: std::collections::BTreeMap<String, f64> = read_json(path)?;
    let pairs: Vec<(&str, f64)> = raw.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let i = Interpretation::from_named(gp.index.clone(), &pairs)?;
    let model = is_model(&gp, &i)?;
    let coherent = match is_coherent_model(&gp, &i) {
        Err(Error::NotAModel) => false,
        r => r?,
    };
    let se = coherent && is_strong_equilibrium(&gp, &i)?;
    Ok(Out::ok(json!({ "model": model, "coherent": coherent, "strong_equilibrium": se })))
}

fn query(input: &Input, path: &Path, method: QueryMethod, t_hat: Option<usize>) -> cgap::Result<Out> {
    let (p, gp) = load(input)?;
    let qf: QueryFile = read_json(path)?;
    let r = match method {
        QueryMethod::Naive => range_naive(&gp, &qf.query, &EnumOptions::default())?,
        QueryMethod::Monotone => range_monotone_vic2(&p, &gp, &qf.query)?,
        QueryMethod::Milp => range_linear_milp(&gp, &qf.query, qf.linear_spec.as_ref(), t_hat, SolveOptions::default())?,
    };
    let code = if r.is_undefined() { 1 } else { 0 };
    Ok(Out { body: range_json(&gp, &r), code })
}

fn compiled(p: &Program) -> Out {
    Out::ok(json!({ "program": print_program(p), "classification": classification_json(&classify(p)) }))
}

fn export(input: &Input, t_hat: Option<usize>, objective: Option<&Path>, minimize: bool) -> cgap::Result<Out> {
    let (_, gp) = load(input)?;
    let t = match t_hat {
        Some(t) => t,
        None => compute_t_hat(&gp, 1)?,
    };
    let cs = match objective {
        None => cgap::milp::build_ilc(&gp, t, true)?,
        Some(f) => {
            let qf: QueryFile = read_json(f)?;
            let aug = augment_choice_atoms(&gp);
            let targets = qf.query.resolve(&aug.index)?;
            let spec = match qf.linear_spec {
                Some(s) => s,
                None => LinearQuerySpec::from_aggregate(&qf.query.aggregate, targets.len(), targets.iter().all(|&a| aug.is_choice(a)))?,
            };
            let (mut cs, obj) = query_system(&gp, &targets, &aug, &spec, t)?;
            cs.set_objective(if minimize { Sense::Minimize } else { Sense::Maximize }, obj);
            cs
        }
    };
    emit(&export_lp(&cs));
    eprintln!("t_hat = {t}");
    Ok(Out { body: Value::Null, code: 0 })
}

fn parse_models(s: &str) -> cgap::Result<(DiffusionModel, DiffusionModel)> {
    let bad = || Error::Experiment(format!("bad --models `{s}`; expected two of 1,2,3 such as 1,3"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let m = |x: &str| x.trim().parse::<u8>().map_err(|_| bad()).and_then(DiffusionModel::try_from);
    Ok((m(a)?, m(b)?))
}

#[allow(clippy::too_many_arguments)]
fn experiment(
    network: &Path,
    likes: &Path,
    config: Option<&Path>,
    models: Option<&str>,
    delta: Option<f64>,
    competition: Option<u32>,
    tau: Option<f64>,
    seed: Option<u64>,
    perturb: Option<&str>,
    runs: Option<u64>,
    jobs: usize,
) -> cgap::Result<Out> {
    let mut cfg: ScenarioConfig = match config {
        Some(f) => read_json(f)?,
        None => ScenarioConfig::default(),
    };
    if let Some(m) = models {
        cfg.models = parse_models(m)?;
    }
    cfg.delta = delta.unwrap_or(cfg.delta);
    cfg.competition = competition.unwrap_or(cfg.competition);
    cfg.tau = tau.unwrap_or(cfg.tau);
    cfg.seed = seed.unwrap_or(cfg.seed);
    if let Some(p) = perturb {
        cfg.perturb = p.parse::<Perturbation>()?;
    }
    cfg.validate()?;
    let sn = parse_network(&read(network)?)?;
    let prefs = compute_rho(&parse_likes(&read(likes)?)?, &PARTIES);
    let cfgs: Vec<ScenarioConfig> = (0..runs.unwrap_or(1)).map(|k| ScenarioConfig { seed: cfg.seed + k, ..cfg.clone() }).collect();
    let rows = run_matrix(&cfgs, &sn, &prefs, jobs)?.into_iter().collect::<cgap::Result<Vec<_>>>()?;
    let vals = rows.iter().map(serde_json::to_value).collect::<Result<Vec<_>, _>>()?;
    Ok(Out::ok(if runs.is_some() { Value::Array(vals) } else { vals.into_iter().next().unwrap() }))
}

#[allow(clippy::too_many_arguments)]
fn synth(config: Option<&Path>, vertices: Option<usize>, edges: Option<usize>, communities: Option<usize>, homophily: Option<f64>, seed: Option<u64>, out: &Path) -> cgap::Result<Out> {
    let mut cfg: SynthConfig = match config {
        Some(f) => read_json(f)?,
        None => SynthConfig::default(),
    };
    cfg.vertices = vertices.unwrap_or(cfg.vertices);
    cfg.edges = edges.unwrap_or(cfg.edges);
    cfg.communities = communities.unwrap_or(cfg.communities);
    cfg.homophily = homophily.unwrap_or(cfg.homophily);
    cfg.seed = seed.unwrap_or(cfg.seed);
    let data = synth_network(&cfg)?;
    let base = out.to_string_lossy();
    let (sn_path, likes_path) = (format!("{base}.sn.tsv"), format!("{base}.likes.tsv"));
    fs::write(&sn_path, write_network(&data.network))?;
    fs::write(&likes_path, write_likes(&data.likes))?;
    Ok(Out::ok(json!({
        "config": serde_json::to_value(&cfg)?,
        "network": sn_path,
        "likes": likes_path,
        "vertices": data.network.vertices().len(),
        "like_rows": data.likes.len(),
    })))
}

fn run(cli: Cli) -> cgap::Result<Out> {
    let jobs = cli.jobs;
    match cli.cmd {
        Cmd::Validate(input) => validate(&input),
        Cmd::Ground(input) => {
            let (p, gp) = load(&input)?;
            emit(&print_ground(&gp, &p.vc));
            Ok(Out { body: Value::Null, code: 0 })
        }
        Cmd::Solve { input, method, default_action, filter } => solve(&input, method, default_action, filter.as_deref()),
        Cmd::Enumerate { input, kind, limit, cap, filter } => enumerate(&input, kind, limit, cap, filter.as_deref()),
        Cmd::Check { input, interpretation } => check(&input, &interpretation),
        Cmd::Query { input, query: q, method, t_hat } => query(&input, &q, method, t_hat),
        Cmd::CompileGame { game, epsilon, unit_decimals } => {
            let g: GenericGame = read_json(&game)?;
            g.validate()?;
            Ok(compiled(&compile_generic_game(&g, &GameCompileOptions { epsilon, unit_decimals })?))
        }
        Cmd::CompileAptSimon { game } => {
            let g: AptSimonGame = read_json(&game)?;
            Ok(compiled(&compile_apt_simon(&g)?))
        }
        Cmd::ExportLp { input, t_hat, objective, minimize } => export(&input, t_hat, objective.as_deref(), minimize),
        Cmd::Experiment { network, likes, config, models, delta, competition, tau, seed, perturb, runs } => {
            experiment(&network, &likes, config.as_deref(), models.as_deref(), delta, competition, tau, seed, perturb.as_deref(), runs, jobs)
        }
        Cmd::Synth { config, vertices, edges, communities, homophily, seed, out } => synth(config.as_deref(), vertices, edges, communities, homophily, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("cgap: {e}");
        }
    }
    let out = run(cli).unwrap_or_else(|e| {
        eprintln!("cgap: {e}");
        Out { body: error_json(&e), code: exit_code(&e) }
    });
    if !out.body.is_null() {
        emit(&(serde_json::to_string_pretty(&tidy(out.body)).expect("json") + "\n"));
    }
    ExitCode::from(out.code)
}
