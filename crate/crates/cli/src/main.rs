use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use ratechannel::feasible::{project_to_feasible_with, QcLabels, FEASIBILITY_TOL};
use ratechannel::io::{
    rows_to_csv, run_manifest, ChannelJson, CqChannelJson, DensityJson, PmfJson, PointJson, SimManifest, SystemJson,
    WzSetupJson,
};
use ratechannel::rate::{
    blahut_arimoto_rd, distortion_from_channel, qc_rate_fn, rate_channel_fn, bridge_check, DistortionSpec, RateResult,
};
use ratechannel::wz::{wz_inner_bound, WzOptions};
use ratechannel::{Channel, Error, Pmf};

#[derive(Parser)]
#[command(name = "ratechannel", version, about = "Rate-channel compression rates and protocol simulation")]
struct Cli {
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimal rate over reconstruction distributions consistent with a backward channel.
    RateChannel { source: PathBuf, channel: PathBuf },
    /// Quantum-classical rate with quantum side information.
    QcRate {
        rho: PathBuf,
        cq_channel: PathBuf,
        #[arg(long, default_value = "A")]
        a_label: String,
        #[arg(long, default_value = "R")]
        r_label: String,
        #[arg(long, default_value = "B")]
        b_label: String,
    },
    /// Inner bound with decoder side information.
    Wz {
        setup: PathBuf,
        #[arg(long)]
        u_size: Option<usize>,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Projects a point onto {x >= 0, A x = b, sum x = 1}.
    Project {
        system: PathBuf,
        x0: PathBuf,
        #[arg(long, default_value_t = FEASIBILITY_TOL)]
        feasibility_tol: f64,
    },
    /// Rate-distortion function by Blahut-Arimoto.
    Rd(RdArgs),
    /// Compares R(D) with the rate-channel rate for the induced distortion.
    BridgeCheck {
        source: PathBuf,
        channel: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Per-letter offsets b(x), comma separated; one value applies to
        /// every letter; zero by default.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        b: Vec<f64>,
        /// `c=a:b:step`, one CSV row per value.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Runs the random-coding protocol described by a manifest.
    Simulate {
        manifest: PathBuf,
        /// Also write the per-n CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RdArgs {
    source: PathBuf,
    /// Distortion matrix file `{ "d": [[..]] }`, rows indexed by source letter.
    #[arg(long, conflicts_with = "from_channel")]
    distortion: Option<PathBuf>,
    /// Backward channel inducing d(x,y) = -c log2 W(x|y) + b(x).
    #[arg(long)]
    from_channel: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Per-letter offsets b(x); one value applies to every letter.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b: Vec<f64>,
    /// Distortion level; defaults to the induced level with --from-channel.
    #[arg(long)]
    level: Option<f64>,
    /// `level=a:b:step`, one CSV row per value.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(serde::Deserialize)]
struct DistortionFile {
    d: Vec<Vec<f64>>,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
    body: Option<Value>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) => 2,
            Error::BudgetExceeded { .. } => 3,
            _ => 1,
        };
        Failure { code, message: e.to_string(), body: None }
    }
}

fn input_error(msg: impl Into<String>) -> Failure {
    Failure { code: 1, message: msg.into(), body: None }
}

type CmdResult = Result<Value, Failure>;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<(T, Value), Failure> {
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let parsed = serde_json::from_value(raw.clone()).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    Ok((parsed, raw))
}

fn pmf_value(p: &Pmf) -> Value {
    json!(PmfJson::from_pmf(p))
}

fn rate_value(r: &RateResult) -> Value {
    json!({
        "rate_bits": r.rate_bits,
        "optimizer": r.optimizer.as_ref().map(pmf_value),
        "status": r.status,
        "diagnostics": {
            "objective_gap": r.diagnostics.objective_gap,
            "iterations": r.diagnostics.iterations,
            "feasibility_residual": r.diagnostics.feasibility_residual,
        },
    })
}

/// Infeasible rate problems still print their result, then exit 2.
fn rate_outcome(r: &RateResult, manifest: Value) -> CmdResult {
    let body = json!({ "manifest": manifest, "result": rate_value(r) });
    if r.is_optimal() {
        Ok(body)
    } else {
        Err(Failure { code: 2, message: format!("status {:?}", r.status).to_lowercase(), body: Some(body) })
    }
}

fn parse_sweep(spec: &str, expected: &str) -> Result<Vec<f64>, Failure> {
    let bad = || input_error(format!("sweep must look like `{expected}=a:b:step`, got `{spec}`"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    if name != expected {
        return Err(input_error(format!("this command sweeps `{expected}`, not `{name}`")));
    }
    let parts: Vec<f64> = range.split(':').map(str::parse).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [a, b, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || b < a {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| a + k as f64 * step).collect())
}

/// Empty means zero; a single value applies to every letter.
fn offsets(b: &[f64], n: usize) -> Vec<f64> {
    match b {
        [] => vec![0.0; n],
        [v] => vec![*v; n],
        _ => b.to_vec(),
    }
}

fn cmd_rate_channel(source: &Path, channel: &Path) -> CmdResult {
    let (p, p_raw): (PmfJson, _) = read_json(source)?;
    let (w, w_raw): (ChannelJson, _) = read_json(channel)?;
    let res = rate_channel_fn(&p.to_pmf()?, &w.to_channel()?)?;
    rate_outcome(&res, json!({ "command": "rate-channel", "source": p_raw, "channel": w_raw }))
}

fn cmd_qc_rate(rho: &Path, cq: &Path, labels: QcLabels) -> CmdResult {
    let (r, r_raw): (DensityJson, _) = read_json(rho)?;
    let (w, w_raw): (CqChannelJson, _) = read_json(cq)?;
    let rho_op = r.to_operator(&[labels.a.as_str(), labels.b.as_str()])?;
    let channel = w.to_channel(&[labels.r.as_str(), labels.b.as_str()])?;
    let res = qc_rate_fn(&rho_op, &channel, &labels)?;
    let manifest = json!({
        "command": "qc-rate",
        "rho": r_raw,
        "cq_channel": w_raw,
        "labels": [labels.a, labels.r, labels.b],
    });
    rate_outcome(&res, manifest)
}

fn cmd_wz(setup: &Path, u_size: Option<usize>, restarts: usize, seed: u64) -> CmdResult {
    let (s, raw): (WzSetupJson, _) = read_json(setup)?;
    let mut wz = s.to_setup()?;
    if let Some(k) = u_size {
        wz = wz.with_u_size(k)?;
    }
    let opts = WzOptions { restarts, seed, ..Default::default() };
    let res = wz_inner_bound(&wz, &opts)?;
    let candidate = res.candidate.as_ref().map(|c| {
        json!({
            "P_U_given_X": ChannelJson::from_channel(&c.p_u_given_x),
            "P_Y_given_UZ": ChannelJson::from_channel(&c.p_y_given_uz),
            "objective_bits": c.objective_bits,
            "residual": c.residual,
        })
    });
    let body = json!({
        "manifest": { "command": "wz", "setup": raw, "U_size": wz.u_size(), "restarts": restarts, "seed": seed },
        "result": {
            "rate_bits": res.rate_bits,
            "status": if res.feasible() { "feasible" } else { "infeasible" },
            "upper_bound_note": "value of the best candidate found; the true inner-bound minimum can only be lower",
            "candidate": candidate,
            "residual": res.residual,
            "label_tuples": res.label_tuples,
            "nonempty_polytopes": res.nonempty_polytopes,
            "pool_size": res.pool_size,
        },
    });
    if res.feasible() {
        Ok(body)
    } else {
        Err(Failure { code: 2, message: "no feasible candidate found".into(), body: Some(body) })
    }
}

fn cmd_project(system: &Path, x0: &Path, tol: f64) -> CmdResult {
    let (s, s_raw): (SystemJson, _) = read_json(system)?;
    let (p, p_raw): (PointJson, _) = read_json(x0)?;
    let sys = s.to_system()?;
    let res = project_to_feasible_with(&sys, &p.into_vec(), tol)?;
    Ok(json!({
        "manifest": { "command": "project", "system": s_raw, "x0": p_raw, "feasibility_tol": tol },
        "result": {
            "x": res.x,
            "l1_distance": res.l1_distance,
            "delta": res.delta,
            "bound": res.bound,
            "bound_initial": res.bound_initial,
            "sigma_min_final": res.sigma_min_final,
            "sigma_min_initial": res.sigma_min_initial,
            "active_set": res.active_set,
            "iterations": res.iterations,
            "exact_qp": res.exact_qp,
            "residual_inf": sys.residual_inf(&res.x),
        },
    }))
}

fn rd_row(p: &Pmf, spec: &DistortionSpec, level: f64) -> Result<Value, Failure> {
    let r = blahut_arimoto_rd(p, &spec.with_level(level))?;
    Ok(json!({
        "level": r.level,
        "rate_bits": r.rate_bits,
        "achieved_distortion": r.achieved_distortion,
        "slope": r.slope,
        "iterations": r.iterations,
        "output": pmf_value(&r.output),
    }))
}

fn cmd_rd(args: &RdArgs) -> Result<(Value, Option<String>), Failure> {
    let (p, p_raw): (PmfJson, _) = read_json(&args.source)?;
    let p = p.to_pmf()?;
    let (spec, default_level, dist_manifest) = match (&args.distortion, &args.from_channel) {
        (Some(path), None) => {
            let (d, raw): (DistortionFile, _) = read_json(path)?;
            (DistortionSpec::new(d.d, 0.0)?, None, json!({ "distortion": raw }))
        }
        (None, Some(path)) => {
            let (w, raw): (ChannelJson, _) = read_json(path)?;
            let w = w.to_channel()?;
            let b = offsets(&args.b, w.n_outputs());
            let cd = distortion_from_channel(&p, &w, args.c, &b)?;
            let level = cd.spec.level;
            (cd.spec, Some(level), json!({ "from_channel": raw, "c": args.c, "b": b }))
        }
        _ => return Err(input_error("give exactly one of --distortion or --from-channel")),
    };
    let mut manifest = json!({ "command": "rd", "source": p_raw, "level": args.level, "sweep": args.sweep });
    manifest.as_object_mut().unwrap().extend(dist_manifest.as_object().unwrap().clone());
    let matrix: Vec<Vec<Option<f64>>> = spec
        .matrix()
        .iter()
        .map(|r| r.iter().map(|&v| v.is_finite().then_some(v)).collect())
        .collect();
    if let Some(sw) = &args.sweep {
        let levels = parse_sweep(sw, "level")?;
        let mut csv = String::from("# ratechannel-rd csv v1\nlevel,rate_bits,achieved_distortion,slope\n");
        let mut rows = Vec::new();
        for l in levels {
            let row = rd_row(&p, &spec, l)?;
            csv.push_str(&format!(
                "{},{},{},{}\n",
                l, row["rate_bits"], row["achieved_distortion"], row["slope"]
            ));
            rows.push(row);
        }
        return Ok((json!({ "manifest": manifest, "distortion_matrix": matrix, "result": rows }), Some(csv)));
    }
    let level = args
        .level
        .or(default_level)
        .ok_or_else(|| input_error("--level is required with --distortion"))?;
    let row = rd_row(&p, &spec, level)?;
    Ok((json!({ "manifest": manifest, "distortion_matrix": matrix, "result": row }), None))
}

fn bridge_row(p: &Pmf, w: &Channel, c: f64, b: &[f64]) -> Result<Value, Failure> {
    let r = bridge_check(p, w, c, b)?;
    Ok(json!({
        "c": c,
        "level": r.level,
        "rd_rate": r.rd_rate,
        "rate_channel_rate": r.rate_channel_rate,
        "difference": r.difference,
        "equal": r.equal,
    }))
}

fn cmd_bridge(source: &Path, channel: &Path, c: f64, b: &[f64], sweep: Option<&str>) -> Result<(Value, Option<String>), Failure> {
    let (p, p_raw): (PmfJson, _) = read_json(source)?;
    let (w, w_raw): (ChannelJson, _) = read_json(channel)?;
    let (p, w) = (p.to_pmf()?, w.to_channel()?);
    let b = offsets(b, w.n_outputs());
    let manifest = json!({ "command": "bridge-check", "source": p_raw, "channel": w_raw, "c": c, "b": b, "sweep": sweep });
    match sweep {
        Some(sw) => {
            let mut csv = String::from("# ratechannel-bridge csv v1\nc,level,rd_rate,rate_channel_rate,difference,equal\n");
            let mut rows = Vec::new();
            for cv in parse_sweep(sw, "c")? {
                let row = bridge_row(&p, &w, cv, &b)?;
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    cv, row["level"], row["rd_rate"], row["rate_channel_rate"], row["difference"], row["equal"]
                ));
                rows.push(row);
            }
            Ok((json!({ "manifest": manifest, "result": rows }), Some(csv)))
        }
        None => Ok((json!({ "manifest": manifest, "result": bridge_row(&p, &w, c, &b)? }), None)),
    }
}

fn cmd_simulate(path: &Path) -> Result<(Value, String), Failure> {
    let (m, raw): (SimManifest, _) = read_json(path)?;
    let rows = run_manifest(&m)?;
    let csv = rows_to_csv(&rows);
    Ok((json!({ "manifest": raw, "master_seed": m.master_seed, "rows": rows }), csv))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    let text = format!("{}\n", text.trim_end_matches('\n'));
    match out {
        Some(p) => fs::write(p, text).map_err(|e| input_error(format!("{}: {e}", p.display()))),
        None => {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = write!(std::io::stdout(), "{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values always serialize")
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let out = cli.output.as_deref();
    match &cli.command {
        Command::RateChannel { source, channel } => emit(out, &pretty(&cmd_rate_channel(source, channel)?)),
        Command::QcRate { rho, cq_channel, a_label, r_label, b_label } => {
            let labels = QcLabels { a: a_label.clone(), r: r_label.clone(), b: b_label.clone() };
            emit(out, &pretty(&cmd_qc_rate(rho, cq_channel, labels)?))
        }
        Command::Wz { setup, u_size, restarts, seed } => emit(out, &pretty(&cmd_wz(setup, *u_size, *restarts, *seed)?)),
        Command::Project { system, x0, feasibility_tol } => {
            emit(out, &pretty(&cmd_project(system, x0, *feasibility_tol)?))
        }
        Command::Rd(args) => {
            let (v, csv) = cmd_rd(args)?;
            emit(out, &csv.unwrap_or_else(|| pretty(&v)))
        }
        Command::BridgeCheck { source, channel, c, b, sweep } => {
            let (v, csv) = cmd_bridge(source, channel, *c, b, sweep.as_deref())?;
            let failed = v["result"].as_array().map_or(v["result"]["equal"] == false, |rows| {
                rows.iter().any(|r| r["equal"] == false)
            });
            emit(out, &csv.unwrap_or_else(|| pretty(&v)))?;
            if failed {
                return Err(Failure { code: 1, message: "rates differ beyond tolerance".into(), body: None });
            }
            Ok(())
        }
        Command::Simulate { manifest, csv } => {
            let (v, table) = cmd_simulate(manifest)?;
            if let Some(p) = csv {
                fs::write(p, &table).map_err(|e| input_error(format!("{}: {e}", p.display())))?;
            }
            emit(out, &pretty(&v))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(body) = &f.body {
                let _ = emit(cli.output.as_deref(), &pretty(body));
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
