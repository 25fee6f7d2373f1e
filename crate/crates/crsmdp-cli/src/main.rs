//! `crsmdp`: solve, evaluate, and check constrained risk-sensitive MDPs
//! from JSON model files.
//!
//! Exit codes: 0 on success / feasible verdicts, 2 on infeasible
//! verdicts, 1 on errors. Structured output is JSON on stdout (or
//! `--out`); `--pretty` prints human tables instead.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crsmdp::augmented::{
    build_augmented_chain, build_occupation_lp, solve_crsmdp, solve_sweep, SolveOptions,
    SolveReport, TailChoice,
};
use crsmdp::eval;
use crsmdp::lp::LpStatus;
use crsmdp::model::{counterexample_model, uniform_rule, MarkovPolicy, MdpModel, ModelFile};
use crsmdp::oracle;
use crsmdp::sampling::{self, ModelSpace};
use crsmdp::truncation::{
    check_feasibility, horizon_for_epsilon, is_eps_feasible, max_violation, Mode, TruncatedBounds,
    DEFAULT_HORIZON_CAP,
};
use rand::SeedableRng;

#[derive(Parser)]
#[command(
    name = "crsmdp",
    version,
    about = "Solver for constrained risk-sensitive Markov decision processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the truncated problem and emit a solve report.
    Solve(SolveArgs),
    /// Evaluate a policy's cost families on a model.
    Eval(EvalArgs),
    /// Check feasibility / eps-feasibility of a policy.
    Check(CheckArgs),
    /// Reproduce the built-in infeasible-truncation counterexample.
    Counterexample(CexArgs),
    /// Run seeded self-checks of the numerical core.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ModeArg {
    Lower,
    Upper,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Lower => Mode::Lower,
            ModeArg::Upper => Mode::Upper,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CheckModeArg {
    Original,
    Lower,
    Upper,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum TailArg {
    Uniform,
    Last,
}

#[derive(Args)]
struct SolveArgs {
    /// Path to the model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Truncation mode.
    #[arg(long, value_enum, default_value = "upper")]
    mode: ModeArg,
    /// Truncation horizon T.
    #[arg(long)]
    horizon: Option<usize>,
    /// Target eps; picks the horizon when --horizon is absent.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Solve every horizon in an inclusive range, e.g. 2..6.
    #[arg(long, conflicts_with_all = ["horizon", "epsilon"])]
    sweep: Option<String>,
    /// Feasibility tolerance on constraint slack.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Target radius of the certified infinite-horizon objective.
    #[arg(long, default_value_t = 1e-6)]
    rs_tol: f64,
    /// Relative tolerance for merging accumulator values.
    #[arg(long, default_value_t = 1e-12)]
    merge_tol: f64,
    /// Cap on augmented states per layer (env CRSMDP_LAYER_CAP overrides
    /// the default; this flag overrides both).
    #[arg(long)]
    layer_cap: Option<usize>,
    /// Stationary tail appended beyond the horizon.
    #[arg(long, value_enum, default_value = "uniform")]
    tail: TailArg,
    /// Use a looser uniform cost bound instead of the tight one.
    #[arg(long)]
    cost_bound: Option<f64>,
    /// Write the assembled LP in plain text to this path.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// Keep transition rows exactly as given (no renormalization).
    #[arg(long)]
    no_renormalize: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a human-readable table instead of JSON.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Path to the policy JSON file ({"prefix": [...], "tail": ...}).
    #[arg(long)]
    policy: PathBuf,
    /// Horizon for the finite-horizon cost families.
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    /// Target radius for certified infinite-horizon values.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Cross-check against exact path enumeration when affordable.
    #[arg(long)]
    with_oracle: bool,
    #[arg(long)]
    no_renormalize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    /// Eps for the eps-feasibility verdict (also sets the exit code).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Which problem's bounds to check against.
    #[arg(long, value_enum, default_value = "original")]
    mode: CheckModeArg,
    /// Horizon, required for lower/upper mode.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    no_renormalize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct CexArgs {
    /// Truncation mode to demonstrate (lower reproduces infeasibility).
    #[arg(long, value_enum, default_value = "lower")]
    mode: ModeArg,
    /// Largest horizon in the sweep (must be positive).
    #[arg(long, default_value_t = 8)]
    max_horizon: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0xC0FFEE)]
    seed: u64,
    #[arg(long)]
    pretty: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints its own message; keep the error exit code at 1
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Check(args) => cmd_check(args),
        Command::Counterexample(args) => cmd_counterexample(args),
        Command::Selftest(args) => cmd_selftest(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn load_model(path: &Path, renormalize: bool) -> Result<MdpModel> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading model file {}", path.display()))?;
    let file = ModelFile::parse(&text).context("parsing model file")?;
    file.to_model(renormalize).context("validating model")
}

fn load_policy(path: &Path, model: &MdpModel) -> Result<MarkovPolicy> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading policy file {}", path.display()))?;
    let policy: MarkovPolicy = serde_json::from_str(&text).context("parsing policy file")?;
    if policy.num_states() != model.num_states() || policy.num_actions() != model.num_actions() {
        bail!(
            "policy is {}x{} but model is {}x{}",
            policy.num_states(),
            policy.num_actions(),
            model.num_states(),
            model.num_actions()
        );
    }
    Ok(policy)
}

fn emit<T: Serialize>(value: &T, out: Option<&PathBuf>, pretty_line: Option<String>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(path) = out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    match pretty_line {
        Some(table) => println!("{table}"),
        None if out.is_none() => println!("{text}"),
        None => {}
    }
    Ok(())
}

fn layer_cap(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("CRSMDP_LAYER_CAP")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(crsmdp::augmented::DEFAULT_LAYER_CAP)
}

fn solve_options(args: &SolveArgs) -> SolveOptions {
    SolveOptions {
        merge_tol: args.merge_tol,
        layer_cap: layer_cap(args.layer_cap),
        feasibility_tol: args.tol,
        certify_tol: args.rs_tol,
        tail: match args.tail {
            TailArg::Uniform => TailChoice::Uniform,
            TailArg::Last => TailChoice::Last,
        },
        with_names: false,
        cost_bound_override: args.cost_bound,
    }
}

fn report_table(report: &SolveReport) -> String {
    let mut s = format!(
        "mode {}  horizon {}  status {:?}\n",
        report.mode, report.horizon, report.status
    );
    if let Some(v) = report.value {
        s.push_str(&format!("objective value (truncated): {v:.16e}\n"));
    }
    if let Some(c) = &report.certified_objective {
        s.push_str(&format!(
            "certified objective: {:.16e} +- {:.3e} (horizon {})\n",
            c.value, c.radius, c.horizon_used
        ));
    }
    if let Some(f) = &report.feasibility {
        s.push_str(&format!("feasible for original problem: {}\n", f.feasible));
        for (i, slack) in f.slacks.iter().enumerate() {
            s.push_str(&format!("  constraint {i}: slack {slack:.16e}\n"));
        }
        if let Some(eps) = report.epsilon_achieved {
            s.push_str(&format!("eps achieved: {eps:.16e}\n"));
        }
    }
    s.push_str(&format!(
        "lp: {} vars, {} eq, {} ineq, {} pivots, {:.1} ms",
        report.stats.lp_variables,
        report.stats.lp_equalities,
        report.stats.lp_inequalities,
        report.stats.pivots,
        report.stats.wall_ms
    ));
    s
}

fn status_code(status: LpStatus) -> u8 {
    match status {
        LpStatus::Optimal => 0,
        LpStatus::Infeasible | LpStatus::Unbounded => 2,
    }
}

fn cmd_solve(args: SolveArgs) -> Result<u8> {
    let model = load_model(&args.model, !args.no_renormalize)?;
    let options = solve_options(&args);
    let mode: Mode = args.mode.into();

    if let Some(range) = &args.sweep {
        let (lo, hi) = parse_range(range)?;
        let reports = solve_sweep(&model, lo..=hi, mode, &options);
        let mut code = 0u8;
        let mut rows = Vec::new();
        let mut tables = Vec::new();
        for (t, outcome) in reports {
            match outcome {
                Ok(report) => {
                    code = code.max(status_code(report.status));
                    if args.pretty {
                        tables.push(format!("--- T = {t} ---\n{}", report_table(&report)));
                    }
                    rows.push(json!({ "horizon": t, "report": report }));
                }
                Err(err) => bail!("sweep failed at T={t}: {err}"),
            }
        }
        emit(
            &json!({ "sweep": rows }),
            args.out.as_ref(),
            args.pretty.then(|| tables.join("\n")),
        )?;
        return Ok(code);
    }

    let horizon = match (args.horizon, args.epsilon) {
        (Some(t), _) => t,
        (None, Some(eps)) => horizon_for_epsilon(&model, eps, DEFAULT_HORIZON_CAP)?,
        (None, None) => bail!("either --horizon or --epsilon is required"),
    };
    if let Some(path) = &args.dump_lp {
        let bounds = TruncatedBounds::new(&model, mode, Some(horizon))?;
        let chain = build_augmented_chain(&model, horizon, options.merge_tol, options.layer_cap)?;
        let lp = build_occupation_lp(&chain, &model, &bounds, true)?;
        std::fs::write(path, lp.dump()).with_context(|| format!("writing {}", path.display()))?;
    }
    let report = solve_crsmdp(&model, horizon, mode, &options)?;
    let code = status_code(report.status);
    emit(
        &report,
        args.out.as_ref(),
        args.pretty.then(|| report_table(&report)),
    )?;
    Ok(code)
}

fn parse_range(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split("..").collect();
    if parts.len() != 2 {
        bail!("sweep range must look like 2..6");
    }
    let lo: usize = parts[0].trim().parse().context("sweep start")?;
    let hi: usize = parts[1].trim().parse().context("sweep end")?;
    if lo == 0 || hi < lo {
        bail!("sweep range must satisfy 1 <= start <= end");
    }
    Ok((lo, hi))
}

fn vector_json(v: &crsmdp::nalgebra::DVector<f64>) -> serde_json::Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

fn cmd_eval(args: EvalArgs) -> Result<u8> {
    let model = load_model(&args.model, !args.no_renormalize)?;
    let policy = load_policy(&args.policy, &model)?;
    let x = model.initial_state();
    let t = args.horizon;
    let cost = model.objective_cost();

    let lt = eval::discounted_cost_finite(&model, &policy, cost, t)?;
    let linf = eval::discounted_cost_infinite(&model, &policy, cost)?;
    let jt = eval::rs_cost_finite(&model, &policy, cost, t)?;
    let jinf = eval::rs_cost_infinite(&model, &policy, cost, args.tol, eval::DEFAULT_CERTIFY_CAP)?;

    let mut constraints = Vec::new();
    for (i, spec) in model.constraints().iter().enumerate() {
        let (achieved, radius) = match (spec.kind.is_rs(), spec.horizon) {
            (false, Some(h)) => (
                eval::discounted_cost_finite(&model, &policy, &spec.cost, h)?[x],
                0.0,
            ),
            (false, None) => (
                eval::discounted_cost_infinite(&model, &policy, &spec.cost)?[x],
                0.0,
            ),
            (true, Some(h)) => (
                eval::rs_cost_finite(&model, &policy, &spec.cost, h)?[x],
                0.0,
            ),
            (true, None) => {
                let cert = eval::rs_cost_infinite(
                    &model,
                    &policy,
                    &spec.cost,
                    args.tol,
                    eval::DEFAULT_CERTIFY_CAP,
                )?;
                (cert.values[x], cert.radii[x])
            }
        };
        constraints.push(json!({
            "index": i,
            "kind": spec.kind,
            "bound": spec.bound,
            "achieved": achieved,
            "radius": radius,
            "slack": spec.bound - achieved,
        }));
    }

    let oracle_block = if args.with_oracle {
        let rs = oracle::enumerate_paths_rs_cost(&model, &policy, cost, t)?;
        let disc = oracle::enumerate_paths_discounted(&model, &policy, cost, t)?;
        json!({ "rs_finite": rs, "discounted_finite": disc })
    } else {
        serde_json::Value::Null
    };

    let output = json!({
        "horizon": t,
        "initial_state": x,
        "objective": {
            "discounted_finite": { "vector": vector_json(&lt), "at_initial": lt[x] },
            "discounted_infinite": { "vector": vector_json(&linf), "at_initial": linf[x] },
            "rs_finite": { "vector": vector_json(&jt), "at_initial": jt[x] },
            "rs_infinite": {
                "vector": vector_json(&jinf.values),
                "radii": vector_json(&jinf.radii),
                "horizon_used": jinf.horizon_used,
                "at_initial": { "value": jinf.values[x], "radius": jinf.radii[x] },
            },
        },
        "constraints": constraints,
        "oracle": oracle_block,
    });
    let pretty = args.pretty.then(|| {
        format!(
            "discounted  T={t}: {:.16e}   infinite: {:.16e}\nrisk-sens.  T={t}: {:.16e}   infinite: {:.16e} +- {:.3e}",
            lt[x], linf[x], jt[x], jinf.values[x], jinf.radii[x]
        )
    });
    emit(&output, args.out.as_ref(), pretty)?;
    Ok(0)
}

fn cmd_check(args: CheckArgs) -> Result<u8> {
    let model = load_model(&args.model, !args.no_renormalize)?;
    let policy = load_policy(&args.policy, &model)?;
    let (mode, horizon) = match args.mode {
        CheckModeArg::Original => (Mode::Original, None),
        CheckModeArg::Lower => (
            Mode::Lower,
            Some(args.horizon.context("--horizon required for lower mode")?),
        ),
        CheckModeArg::Upper => (
            Mode::Upper,
            Some(args.horizon.context("--horizon required for upper mode")?),
        ),
    };
    let verdict = check_feasibility(&model, &policy, mode, horizon, args.tol)?;
    let violation = max_violation(&model, &policy, args.tol)?;
    let eps_verdict = match args.epsilon {
        // eps = 0 means exact feasibility for the original problem
        Some(eps) if eps == 0.0 => {
            Some(check_feasibility(&model, &policy, Mode::Original, None, args.tol)?.feasible)
        }
        Some(eps) => Some(is_eps_feasible(&model, &policy, eps, args.tol)?),
        None => None,
    };
    let output = json!({
        "mode": mode,
        "horizon": horizon,
        "feasibility": verdict,
        "max_violation_original": violation,
        "epsilon": args.epsilon,
        "eps_feasible": eps_verdict,
    });
    let pretty = args.pretty.then(|| {
        let h = violation
            .map(|v| format!("{:.16e}", v.h))
            .unwrap_or_else(|| "no constraints".to_string());
        format!(
            "feasible: {}\nmax violation h: {}\neps-feasible: {:?}",
            verdict.feasible, h, eps_verdict
        )
    });
    emit(&output, args.out.as_ref(), pretty)?;
    let ok = match eps_verdict {
        Some(eps_ok) => eps_ok,
        None => verdict.feasible,
    };
    Ok(if ok { 0 } else { 2 })
}

fn cmd_counterexample(args: CexArgs) -> Result<u8> {
    if args.max_horizon == 0 {
        bail!("--max-horizon must be a positive integer");
    }
    let model = counterexample_model();
    let mode: Mode = args.mode.into();
    let options = SolveOptions::default();
    let mut rows = Vec::new();
    let mut statuses = Vec::new();
    for t in 1..=args.max_horizon {
        let report = solve_crsmdp(&model, t, mode, &options)?;
        statuses.push(report.status);
        rows.push(json!({ "horizon": t, "status": report.status }));
    }
    let phi = MarkovPolicy::stationary(uniform_rule(&model));
    let verdict = check_feasibility(&model, &phi, Mode::Original, None, 1e-9)?;
    let h = max_violation(&model, &phi, 1e-9)?.expect("fixture has constraints");
    let truncations_as_expected = match mode {
        Mode::Lower => statuses.iter().all(|s| *s == LpStatus::Infeasible),
        Mode::Upper => statuses.iter().all(|s| *s == LpStatus::Optimal),
        Mode::Original => unreachable!(),
    };
    let reproduced = truncations_as_expected && verdict.feasible && h.h.abs() <= 1e-12;
    let output = json!({
        "mode": mode,
        "rows": rows,
        "uniform_policy_feasible": verdict.feasible,
        "uniform_policy_slacks": verdict.slacks,
        "h_uniform": h.h,
        "reproduced": reproduced,
    });
    let pretty = args.pretty.then(|| {
        let mut s = String::from("  T  status\n");
        for (i, st) in statuses.iter().enumerate() {
            s.push_str(&format!("{:3}  {}\n", i + 1, match st {
                LpStatus::Optimal => "OPTIMAL",
                LpStatus::Infeasible => "INFEASIBLE",
                LpStatus::Unbounded => "UNBOUNDED",
            }));
        }
        s.push_str(&format!(
            "uniform policy feasible: {} (slacks {:?})\nh(uniform) = {:.3e}\nreproduced: {reproduced}",
            verdict.feasible, verdict.slacks, h.h
        ));
        s
    });
    emit(&output, args.out.as_ref(), pretty)?;
    Ok(if reproduced { 0 } else { 2 })
}

fn cmd_selftest(args: SelftestArgs) -> Result<u8> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut checks = Vec::new();
    let mut all_ok = true;
    let mut record = |name: &str, ok: bool, detail: String, all_ok: &mut bool| {
        *all_ok &= ok;
        checks.push(json!({ "name": name, "passed": ok, "detail": detail }));
    };

    // recursion vs enumeration
    let space = ModelSpace::default();
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let model = sampling::random_model(&mut rng, &space);
        for _ in 0..5 {
            let policy = sampling::random_policy(&mut rng, &model, 2);
            for t in 1..=4 {
                let a = eval::rs_cost_finite(&model, &policy, model.objective_cost(), t)?
                    [model.initial_state()];
                let b =
                    oracle::enumerate_paths_rs_cost(&model, &policy, model.objective_cost(), t)?;
                worst = worst.max((a - b).abs());
            }
        }
    }
    record(
        "recursion matches enumeration",
        worst <= 1e-10,
        format!("worst gap {worst:.2e}"),
        &mut all_ok,
    );

    // Lipschitz spot check
    let mut lipschitz_ok = true;
    for _ in 0..20 {
        let model = sampling::random_model(&mut rng, &space);
        let bounds = crsmdp::model::cost_bound(&model);
        let cfg = crsmdp::metric::MetricConfig::default_for(model.beta());
        let p1 = sampling::random_policy(&mut rng, &model, 3);
        let p2 = sampling::random_policy(&mut rng, &model, 3);
        let mu = crsmdp::metric::policy_distance(&p1, &p2, &cfg)?;
        for t in 1..=4 {
            let l1 = eval::discounted_cost_finite(&model, &p1, model.objective_cost(), t)?;
            let l2 = eval::discounted_cost_finite(&model, &p2, model.objective_cost(), t)?;
            lipschitz_ok &= (l1 - l2).amax()
                <= crsmdp::metric::lipschitz_bound_discounted(&bounds, &cfg, Some(t)) * mu + 1e-9;
        }
    }
    record(
        "Lipschitz bounds hold",
        lipschitz_ok,
        "20 policy pairs".into(),
        &mut all_ok,
    );

    // drift/tail bounds
    let mut drift_ok = true;
    for _ in 0..10 {
        let model = sampling::random_model(&mut rng, &space);
        let policy = sampling::random_policy(&mut rng, &model, 2);
        let bounds = crsmdp::model::cost_bound(&model);
        let linf = eval::discounted_cost_infinite(&model, &policy, model.objective_cost())?;
        for t in 1..=10 {
            let lt = eval::discounted_cost_finite(&model, &policy, model.objective_cost(), t)?;
            drift_ok &= (&linf - &lt).amax() <= bounds.k * model.beta().powi(t as i32) + 1e-12;
        }
    }
    record(
        "tail bounds hold",
        drift_ok,
        "10 policies x T<=10".into(),
        &mut all_ok,
    );

    // counterexample facts
    let model = counterexample_model();
    let lower_infeasible = (1..=4).all(|t| {
        solve_crsmdp(&model, t, Mode::Lower, &SolveOptions::default())
            .map(|r| r.status == LpStatus::Infeasible)
            .unwrap_or(false)
    });
    let phi = MarkovPolicy::stationary(uniform_rule(&model));
    let h = max_violation(&model, &phi, 1e-9)?.expect("constraints present");
    record(
        "counterexample reproduces",
        lower_infeasible && h.h.abs() <= 1e-12,
        format!("h = {:.2e}", h.h),
        &mut all_ok,
    );

    let output = json!({ "seed": args.seed, "passed": all_ok, "checks": checks });
    let pretty = args.pretty.then(|| {
        let mut s = String::new();
        for c in &checks {
            s.push_str(&format!(
                "{} {}: {}\n",
                if c["passed"].as_bool().unwrap() {
                    "ok  "
                } else {
                    "FAIL"
                },
                c["name"].as_str().unwrap(),
                c["detail"].as_str().unwrap()
            ));
        }
        s.push_str(if all_ok {
            "selftest passed"
        } else {
            "selftest FAILED"
        });
        s
    });
    emit(&output, None, pretty)?;
    Ok(if all_ok { 0 } else { 2 })
}
