//! Batch front end. Every command prints one JSON document (or, for
//! `selftest` without `--json`, one line per criterion).
//!
//! Exit codes: 0 success, 1 malformed input or a failed check, 2 violated
//! precondition.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use eisdist::arith::Coefficient;
use eisdist::config::{EngineConfig, ENV_VAR};
use eisdist::eisenstein::{parametrize, FormalEisensteinClass, ParamPath};
use eisdist::json::{
    class_document, envelope, parse_class, parse_group_element, parse_ints, parse_schwartz, parse_subgroup,
    schwartz_document, to_text, GroupElementWire, SetWire, SubgroupWire,
};
use eisdist::orbit::{euclidean_reduce, global_orbit_set, local_orbit, orbit_bfs_oracle, OrbitDescriptor};
use eisdist::residue::ResidueVector;
use eisdist::ric::{self, AxiomReport, EisensteinInstance, FunctorInstance, HarnessConfig, SchwartzInstance};
use eisdist::selftest::{self, InjectedFault, SelftestOptions};
use eisdist::symplectic::CongruenceSubgroup;
use eisdist::{Error, Result};

#[derive(Parser)]
#[command(name = "eisdist", version, about = "Exact finite-level Eisenstein distribution engine")]
struct Cli {
    /// Genus n (overrides ENGINE_CONFIG).
    #[arg(long, global = true)]
    genus: Option<usize>,
    #[arg(long, global = true)]
    p: Option<u64>,
    #[arg(long, global = true)]
    c: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long = "level-bound", global = true)]
    level_bound: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Orbit calculus.
    #[command(subcommand)]
    Orbit(OrbitCmd),
    /// Schwartz functions.
    #[command(subcommand)]
    Schwartz(SchwartzCmd),
    /// Formal Eisenstein classes.
    #[command(subcommand)]
    Eis(EisCmd),
    /// RIC functor axioms.
    #[command(subcommand)]
    Axioms(AxiomsCmd),
    /// The acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Subcommand)]
enum OrbitCmd {
    /// `witness·v = alpha·e_1` over Z.
    Reduce {
        #[arg(long, allow_hyphen_values = true)]
        v: String,
    },
    /// `K_{ℓ^i} v + ℓ^j V` over Z_ℓ.
    Local {
        #[arg(long, allow_hyphen_values = true)]
        v: String,
        #[arg(long)]
        ell: u64,
        #[arg(long)]
        i: u32,
        #[arg(long)]
        j: u32,
    },
    /// `K_M v + N V` from the closed form.
    Global {
        #[arg(long, allow_hyphen_values = true)]
        v: String,
        #[arg(long = "M")]
        m: u64,
        #[arg(long = "N")]
        n: u64,
    },
    /// The orbit of `v mod N` by breadth-first search.
    Oracle {
        #[arg(long, allow_hyphen_values = true)]
        v: String,
        #[arg(long = "N")]
        n: u64,
        /// `full`, `K<m>`, or any subgroup shorthand anchored at N.
        #[arg(long, default_value = "full")]
        group: String,
    },
}

#[derive(Subcommand)]
enum SchwartzCmd {
    /// Canonical form.
    Show {
        #[arg(long)]
        phi: String,
    },
    /// `g·φ`.
    Act {
        #[arg(long)]
        phi: String,
        #[arg(long)]
        g: String,
    },
    /// Whether `φ` is invariant under a subgroup.
    Invariant {
        #[arg(long)]
        phi: String,
        #[arg(long)]
        group: String,
    },
    /// Sum of translates over `K/L`.
    Induce {
        #[arg(long)]
        phi: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Canonical,
    Orbit,
    Stabilizer,
    All,
}

#[derive(Subcommand)]
enum EisCmd {
    /// Canonical representative of a class.
    NormalForm {
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 0)]
        k: u32,
    },
    /// The universal map on a K-invariant Schwartz function.
    Parametrize {
        #[arg(long)]
        phi: String,
        #[arg(long, default_value_t = 0)]
        k: u32,
        /// Defaults to the principal subgroup at the function's level.
        #[arg(long)]
        group: Option<String>,
        #[arg(long, value_enum, default_value = "canonical")]
        path: PathArg,
    },
    /// `[g]^*` on a class.
    Act {
        #[arg(long)]
        class: String,
        #[arg(long)]
        g: String,
        #[arg(long, default_value_t = 0)]
        k: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctorArg {
    Schwartz,
    Eisenstein,
}

#[derive(Subcommand)]
enum AxiomsCmd {
    Check {
        #[arg(long, value_enum)]
        functor: FunctorArg,
        #[arg(long, default_value = "3,9")]
        levels: String,
        /// Weight of the Eisenstein functor.
        #[arg(long, default_value_t = 1)]
        k: u32,
    },
}

#[derive(Args)]
struct SelftestArgs {
    /// Restrict the level sets of every criterion.
    #[arg(long)]
    levels: Option<String>,
    /// missing-coset or skewed-path.
    #[arg(long = "inject-fault")]
    inject_fault: Option<String>,
    /// Print the report as JSON instead of text lines.
    #[arg(long)]
    json: bool,
}

fn config(cli: &Cli) -> Result<EngineConfig> {
    let mut cfg = EngineConfig::from_env()?;
    if let Some(g) = cli.genus {
        cfg.genus = g;
    }
    if let Some(p) = cli.p {
        cfg.p = p;
    }
    if let Some(c) = cli.c {
        cfg.c = c;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(b) = cli.level_bound {
        cfg.level_bound = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn levels(s: &str) -> Result<Vec<u64>> {
    parse_ints(s)?
        .into_iter()
        .map(|x| u64::try_from(x).map_err(|_| Error::Malformed(format!("level {x}"))))
        .collect()
}

fn descriptor(d: &OrbitDescriptor) -> Value {
    match d {
        OrbitDescriptor::Sphere { ell, exponent } => json!({"type": "sphere", "ell": ell, "exponent": exponent}),
        OrbitDescriptor::Coset { ell, base, exponent } => {
            json!({"type": "coset", "ell": ell, "base": base, "exponent": exponent})
        }
    }
}

fn residue_list<'a>(it: impl IntoIterator<Item = &'a ResidueVector>) -> Vec<Vec<u64>> {
    it.into_iter().map(|v| v.coords().to_vec()).collect()
}

fn orbit(cmd: &OrbitCmd, cfg: &EngineConfig) -> Result<Value> {
    match cmd {
        OrbitCmd::Reduce { v } => {
            let v = parse_ints(v)?;
            let (alpha, w) = euclidean_reduce(&v)?;
            let rows: Vec<Vec<Coefficient>> = (0..w.rows())
                .map(|i| (0..w.cols()).map(|j| Coefficient::from_bigint(w.get(i, j).clone())).collect())
                .collect();
            envelope("orbit-reduce", &json!({"v": v, "alpha": alpha.to_i64().expect("bounded by the input"), "witness": rows}))
        }
        OrbitCmd::Local { v, ell, i, j } => {
            let v = parse_ints(v)?;
            if !eisdist::arith::is_prime(*ell) {
                return Err(Error::Precondition(format!("{ell} is not prime")));
            }
            envelope("orbit-local", &json!({"v": v, "orbit": descriptor(&local_orbit(&v, *ell, *i, *j))}))
        }
        OrbitCmd::Global { v, m, n } => {
            let v = parse_ints(v)?;
            if *m == 0 || n % m != 0 {
                return Err(Error::Precondition(format!("M = {m} does not divide N = {n}")));
            }
            if *n > cfg.level_bound {
                return Err(Error::LevelBound { level: *n, bound: cfg.level_bound });
            }
            let s = global_orbit_set(&v, *m, *n)?;
            envelope("orbit-set", &json!({"v": v, "M": m, "N": n, "count": s.len(), "set": SetWire::from(&s)}))
        }
        OrbitCmd::Oracle { v, n, group } => {
            let coords = parse_ints(v)?;
            let x = ResidueVector::new(*n, &coords)?;
            let spec = if group.contains('@') || group.starts_with('{') { group.clone() } else { format!("{group}@{n}") };
            let k = parse_subgroup(&spec, x.genus())?;
            if k.level() != *n {
                return Err(Error::ModulusMismatch(format!("{} is not anchored at {n}", k.label())));
            }
            let o = orbit_bfs_oracle(&x, k.generators())?;
            envelope(
                "orbit-oracle",
                &json!({"v": coords, "N": n, "group": k.label(), "count": o.len(), "residues": residue_list(&o)}),
            )
        }
    }
}

fn schwartz(cmd: &SchwartzCmd, cfg: &EngineConfig) -> Result<Value> {
    let g = cfg.genus;
    match cmd {
        SchwartzCmd::Show { phi } => {
            let f = parse_schwartz(phi, g)?;
            f.check_admissible(cfg.cp())?;
            schwartz_document(&f)
        }
        SchwartzCmd::Act { phi, g: elem } => {
            let f = parse_schwartz(phi, g)?;
            let x = parse_group_element(elem, g)?;
            schwartz_document(&f.act(&x, cfg.cp())?)
        }
        SchwartzCmd::Invariant { phi, group } => {
            let f = parse_schwartz(phi, g)?;
            let k = parse_subgroup(group, g)?;
            envelope("invariance", &json!({"group": SubgroupWire::from(&k), "invariant": f.is_invariant(&k)?}))
        }
        SchwartzCmd::Induce { phi, from, to } => {
            let f = parse_schwartz(phi, g)?;
            let l = parse_subgroup(from, g)?;
            let k = parse_subgroup(to, g)?;
            schwartz_document(&f.induce(&l, &k)?)
        }
    }
}

fn eis(cmd: &EisCmd, cfg: &EngineConfig) -> Result<Value> {
    match cmd {
        EisCmd::NormalForm { class, k } => class_document(&parse_class(class, *k)?.normal_form(cfg)?),
        EisCmd::Parametrize { phi, k, group, path } => {
            let f = parse_schwartz(phi, cfg.genus)?;
            let sub = match group {
                Some(s) => parse_subgroup(s, cfg.genus)?,
                None => {
                    let n = cfg.admissible_multiple(f.level())?;
                    CongruenceSubgroup::principal(cfg.genus, n, n)?
                }
            };
            let paths: Vec<ParamPath> = match path {
                PathArg::Canonical => vec![ParamPath::Canonical],
                PathArg::Orbit => vec![ParamPath::Orbit],
                PathArg::Stabilizer => vec![ParamPath::Stabilizer],
                PathArg::All => ParamPath::ALL.to_vec(),
            };
            let mut values = Vec::new();
            for p in &paths {
                values.push(parametrize(&f, *k, &sub, *p, cfg)?.normal_form(cfg)?);
            }
            if values.len() > 1 {
                values = FormalEisensteinClass::common_normal_forms(&values, cfg)?;
            }
            if let Some(i) = (1..values.len()).find(|&i| values[i] != values[0]) {
                return Err(Error::Precondition(format!(
                    "paths disagree: {} gives {:?}, {} gives {:?}",
                    paths[0].name(),
                    values[0],
                    paths[i].name(),
                    values[i]
                )));
            }
            let mut doc = class_document(&values[0])?;
            doc["paths"] = json!(paths.iter().map(|p| p.name()).collect::<Vec<_>>());
            doc["group"] = json!(sub.label());
            Ok(doc)
        }
        EisCmd::Act { class, g, k } => {
            let x = parse_class(class, *k)?;
            let elem = parse_group_element(g, x.genus())?;
            let mut doc = class_document(&x.conjugate(&elem, cfg)?.normal_form(cfg)?)?;
            doc["element"] = serde_json::to_value(GroupElementWire::from(&elem)).expect("serializable");
            Ok(doc)
        }
    }
}

fn axioms(cmd: &AxiomsCmd, cfg: &EngineConfig) -> Result<(Value, bool)> {
    let AxiomsCmd::Check { functor, levels: ls, k } = cmd;
    let ls = levels(ls)?;
    for &l in &ls {
        cfg.check_level(l)?;
    }
    let h = HarnessConfig::standard(cfg.genus, &ls, cfg.seed)?;
    let (name, reports): (String, Vec<AxiomReport>) = match functor {
        FunctorArg::Schwartz => {
            let s = SchwartzInstance { genus: cfg.genus, window: h.level, p: cfg.p };
            (s.name(), ric::check_axioms(&s, &h))
        }
        FunctorArg::Eisenstein => {
            let e = EisensteinInstance { config: cfg.clone(), window: h.level, weight: *k };
            (e.name(), ric::check_axioms(&e, &h))
        }
    };
    let ok = reports.iter().all(AxiomReport::passes);
    let subgroups: Vec<String> = h.subgroups.iter().map(|s| s.label()).collect();
    let doc = envelope(
        "axioms",
        &json!({"functor": name, "window": h.level, "subgroups": subgroups, "reports": reports, "passed": ok}),
    )?;
    Ok((doc, ok))
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = config(cli)?;
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::Precondition(e.to_string()))?;
    }
    let doc = match &cli.cmd {
        Cmd::Orbit(c) => orbit(c, &cfg)?,
        Cmd::Schwartz(c) => schwartz(c, &cfg)?,
        Cmd::Eis(c) => eis(c, &cfg)?,
        Cmd::Axioms(c) => {
            let (doc, ok) = axioms(c, &cfg)?;
            println!("{}", to_text(&doc));
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Cmd::Selftest(a) => {
            let opts = SelftestOptions {
                config: cfg,
                levels: a.levels.as_deref().map(levels).transpose()?,
                fault: a.inject_fault.as_deref().map(str::parse::<InjectedFault>).transpose()?,
            };
            let report = selftest::run(&opts)?;
            if a.json {
                println!("{}", to_text(&envelope("selftest", &json!({"report": report, "passed": report.passed()}))?));
            } else {
                for c in &report.criteria {
                    println!("{}", c.line());
                }
            }
            return Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    };
    println!("{}", to_text(&doc));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Malformed(_)) && std::env::var_os(ENV_VAR).is_some() {
                eprintln!("(check {ENV_VAR})");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
