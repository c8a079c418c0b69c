use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use twincert::baseline::{exact_epsilon_with, grid_oracle, pgd_epsilon, AttackConfig, Dataset, ExactConfig};
use twincert::certify::{certify_global, certify_local, CertConfig, PreBounds};
use twincert::encode::{Mode, Scheme};
use twincert::safety::{invariant_set, simulate, write_trajectory_csv, Policy, SafetyConfig, Verdict};
use twincert::toy::{toy_domain, toy_network};
use twincert::{Error, HyperBox, Network, Result};

use crate::args::{
    AccArgs, CertifyArgs, Cli, Command, CommonArgs, ExactArgs, MakeToyArgs, OracleArgs, PgdArgs, PolicyArg,
    PreBoundsArg, SchemeArg,
};
use crate::manifest::RunManifest;

pub fn dispatch(cli: &Cli) -> Result<()> {
    let start = Instant::now();
    match &cli.command {
        Command::Certify(a) => certify(a, cli.stable, start),
        Command::Exact(a) => exact(a, cli.stable, start),
        Command::Oracle(a) => oracle(a, cli.stable, start),
        Command::Pgd(a) => pgd(a, cli.stable, start),
        Command::Acc(a) => acc(a, cli.stable, start),
        Command::MakeToy(a) => make_toy(a),
    }
}

struct Inputs {
    net: Network,
    domain: HyperBox,
    outputs: Vec<usize>,
}

fn load_common(m: &mut RunManifest, c: &CommonArgs) -> Result<Inputs> {
    let net = Network::from_json(&m.read_input("network", &c.network)?)?;
    let domain = match &c.domain {
        Some(p) => HyperBox::from_json(&m.read_input("domain", p)?)?,
        None => HyperBox::uniform(net.input_dim(), -1.0, 1.0)?,
    };
    if domain.dim() != net.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "domain dimension {} != network input dimension {}",
            domain.dim(),
            net.input_dim()
        )));
    }
    if !(c.delta >= 0.0) || !c.delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be finite and >= 0, got {}", c.delta)));
    }
    let outputs = if c.outputs.is_empty() {
        (0..net.output_dim()).collect()
    } else {
        let mut o = c.outputs.clone();
        o.sort_unstable();
        o.dedup();
        if let Some(&bad) = o.iter().find(|&&j| j >= net.output_dim()) {
            return Err(Error::OutOfRange(format!("output {bad} >= output dimension {}", net.output_dim())));
        }
        o
    };
    Ok(Inputs { net, domain, outputs })
}

fn load_point(m: &mut RunManifest, path: &Path) -> Result<Vec<f64>> {
    let text = m.read_input("local", path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write_report(mut manifest: RunManifest, body: serde_json::Value, out: Option<&Path>, stable: bool, start: Instant) -> Result<()> {
    if !stable {
        manifest.wall_time_seconds = Some(start.elapsed().as_secs_f64());
    }
    #[derive(Serialize)]
    struct Report {
        manifest: RunManifest,
        #[serde(flatten)]
        body: serde_json::Value,
    }
    let mut text = serde_json::to_string_pretty(&Report { manifest, body }).expect("report serializes");
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn certify(a: &CertifyArgs, stable: bool, start: Instant) -> Result<()> {
    let mut m = RunManifest::new(
        "certify",
        json!({
            "delta": a.common.delta,
            "window": a.window,
            "refine": a.refine,
            "scheme": format!("{:?}", a.scheme).to_lowercase(),
            "target_refine": !a.no_target_refine,
            "node_limit": a.node_limit,
            "pre_bounds": format!("{:?}", a.pre_bounds).to_lowercase(),
            "outputs": a.common.outputs,
        }),
    );
    let inp = load_common(&mut m, &a.common)?;
    let local = a.local.as_ref().map(|p| load_point(&mut m, p)).transpose()?;
    let cfg = CertConfig {
        window: a.window,
        refine_count: a.refine,
        scheme: match a.scheme {
            SchemeArg::Itne => Scheme::Itne,
            SchemeArg::Btne => Scheme::Btne,
        },
        node_limit: a.node_limit,
        outputs: Some(inp.outputs.clone()),
        refine_target: !a.no_target_refine,
        pre_bounds: match a.pre_bounds {
            PreBoundsArg::Lp => PreBounds::Lp,
            PreBoundsArg::Interval => PreBounds::Interval,
        },
        ..CertConfig::new(inp.domain.clone(), a.common.delta)
    };
    let mut report = match &local {
        Some(x0) => certify_local(&inp.net, x0, &cfg)?,
        None => certify_global(&inp.net, &cfg)?,
    };
    if !a.ranges {
        report.ranges = None;
    }
    if stable {
        report.stats.wall_time_seconds = None;
    }
    for o in &report.outputs {
        println!("output {}: epsilon_upper = {:.6}", o.index, o.epsilon_upper);
    }
    let eps = report.outputs.iter().map(|o| o.epsilon_upper).fold(0.0, f64::max);
    let body = json!({ "epsilon_upper": eps, "report": report });
    write_report(m, body, a.common.out.as_deref(), stable, start)
}

fn exact(a: &ExactArgs, stable: bool, start: Instant) -> Result<()> {
    let mut m = RunManifest::new(
        "exact",
        json!({
            "delta": a.common.delta,
            "force": a.force,
            "node_limit": a.node_limit,
            "outputs": a.common.outputs,
        }),
    );
    let inp = load_common(&mut m, &a.common)?;
    let local = a.local.as_ref().map(|p| load_point(&mut m, p)).transpose()?;
    let cfg = ExactConfig {
        max_unstable: if a.force { usize::MAX } else { ExactConfig::default().max_unstable },
        node_limit: a.node_limit,
        mode: local.map_or(Mode::Global, Mode::Local),
    };
    let mut results = Vec::new();
    for &j in &inp.outputs {
        let r = exact_epsilon_with(&inp.net, &inp.domain, a.common.delta, j, &cfg).map_err(|e| match e {
            Error::Guard(msg) => Error::Guard(format!("{msg}; pass --force to solve anyway")),
            other => other,
        })?;
        println!("output {j}: epsilon_exact = {:.6}", r.epsilon);
        results.push(json!({
            "index": j,
            "epsilon_exact": r.epsilon,
            "min": r.min,
            "max": r.max,
            "nodes": r.nodes,
            "unstable_relus": r.unstable,
        }));
    }
    let eps = results.iter().map(|r| r["epsilon_exact"].as_f64().unwrap()).fold(0.0, f64::max);
    write_report(m, json!({ "epsilon_exact": eps, "outputs": results }), a.common.out.as_deref(), stable, start)
}

fn oracle(a: &OracleArgs, stable: bool, start: Instant) -> Result<()> {
    let mut m = RunManifest::new(
        "oracle",
        json!({ "delta": a.common.delta, "grid_step": a.grid_step, "outputs": a.common.outputs }),
    );
    let inp = load_common(&mut m, &a.common)?;
    let mut results = Vec::new();
    for &j in &inp.outputs {
        let e = grid_oracle(&inp.net, &inp.domain, a.common.delta, j, a.grid_step)?;
        println!("output {j}: epsilon_grid = {e:.6}");
        results.push(json!({ "index": j, "epsilon_grid": e }));
    }
    let eps = results.iter().map(|r| r["epsilon_grid"].as_f64().unwrap()).fold(0.0, f64::max);
    write_report(m, json!({ "epsilon_grid": eps, "outputs": results }), a.common.out.as_deref(), stable, start)
}

fn pgd(a: &PgdArgs, stable: bool, start: Instant) -> Result<()> {
    let mut m = RunManifest::new(
        "pgd",
        json!({
            "delta": a.common.delta,
            "steps": a.steps,
            "restarts": a.restarts,
            "seed": a.seed,
            "step_size": a.step_size,
            "outputs": a.common.outputs,
        }),
    );
    let inp = load_common(&mut m, &a.common)?;
    let data = Dataset::from_csv(&m.read_input("dataset", &a.dataset)?)?;
    let cfg = AttackConfig {
        steps: a.steps,
        step_size: a.step_size,
        restarts: a.restarts,
        rng_seed: a.seed,
    };
    let mut results = Vec::new();
    for &j in &inp.outputs {
        let r = pgd_epsilon(&inp.net, &data, &inp.domain, a.common.delta, j, &cfg)?;
        println!("output {j}: epsilon_lower = {:.6}", r.epsilon_lower);
        results.push(json!({ "index": j, "epsilon_lower": r.epsilon_lower, "best_sample": r.best_sample }));
    }
    let eps = results.iter().map(|r| r["epsilon_lower"].as_f64().unwrap()).fold(0.0, f64::max);
    write_report(m, json!({ "epsilon_lower": eps, "outputs": results }), a.common.out.as_deref(), stable, start)
}

fn acc(a: &AccArgs, stable: bool, start: Instant) -> Result<()> {
    let mut m = RunManifest::new(
        "acc",
        json!({
            "dd_bound": a.dd_bound,
            "max_iters": a.max_iters,
            "simulate": a.simulate,
            "policy": format!("{:?}", a.policy).to_lowercase(),
            "seed": a.seed,
            "x0": a.x0,
        }),
    );
    let mut cfg = SafetyConfig::from_json(&m.read_input("config", &a.config)?)?;
    if let Some(dd) = a.dd_bound {
        cfg.dd_bound = dd;
    }
    let sys = cfg.system()?;
    let safe = cfg.safe_set()?;
    let verdict = invariant_set(&sys, &safe, a.max_iters)?;
    match &verdict {
        Verdict::Invariant { set, iterations } => println!(
            "invariant set: nonempty ({} halfspaces, {iterations} iterations)",
            set.rows.len()
        ),
        Verdict::Empty { iterations } => println!("invariant set: empty ({iterations} iterations)"),
        Verdict::NotConverged { iterations, .. } => {
            println!("invariant set: not converged after {iterations} iterations")
        }
    }
    println!("method: halfspace iteration (substitute method), dd_bound = {}", cfg.dd_bound);

    let mut sim_json = serde_json::Value::Null;
    if let Some(steps) = a.simulate {
        let (check, default_x0) = match verdict.set() {
            Some(set) => {
                let (lo, hi) = set.bounding_box()?.expect("invariant set is nonempty");
                (set.clone(), lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect())
            }
            None => (safe.clone(), cfg.safe_upper.clone()),
        };
        let x0: Vec<f64> = a.x0.clone().unwrap_or(default_x0);
        let policy = match a.policy {
            PolicyArg::Random => Policy::Random,
            PolicyArg::Extreme => Policy::Extreme,
            PolicyArg::Zero => Policy::Zero,
        };
        let sim = simulate(&sys, &x0, steps, policy, a.seed, &check, true)?;
        match sim.first_exit {
            None => println!("simulation: {steps} steps, safe"),
            Some(k) => println!("simulation: {steps} steps, unsafe (first exit at step {k})"),
        }
        let file = std::fs::File::create(&a.trajectory).map_err(|e| Error::Io {
            path: a.trajectory.clone(),
            source: e,
        })?;
        write_trajectory_csv(sim.trajectory.as_deref().unwrap_or(&[]), std::io::BufWriter::new(file))?;
        sim_json = json!({
            "steps": steps,
            "x0": x0,
            "safe": sim.safe,
            "first_exit": sim.first_exit,
            "trajectory": a.trajectory.display().to_string(),
        });
    }
    if let Some(out) = &a.out {
        let body = json!({ "method": "substitute", "verdict": verdict, "simulation": sim_json });
        write_report(m, body, Some(out), stable, start)?;
    }
    Ok(())
}

fn make_toy(a: &MakeToyArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    for (name, text) in [("toy.json", toy_network().to_json()), ("unit2.json", toy_domain().to_json())] {
        let path = a.out.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
