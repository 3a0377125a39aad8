//! Command-line front end for the gridshed pipeline.
//!
//! Every subcommand is a thin shell over the library: parse/validate a case,
//! run power flows, solve one shedding instance, generate a labeled dataset,
//! train per-bus networks, predict from measurements, check contingency
//! identifiability, and summarize error distributions.
//!
//! Outputs are deterministic byte-for-byte for a fixed config and seed;
//! timings go to stderr only. `GRIDSHED_WORKERS` caps the rayon worker pool.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gridshed::config::{load_config, StudyConfig};
use gridshed::identifiability::{check_set, report_csv};
use gridshed::learning::{
    generate_dataset, model_from_text, model_to_text, parse_dataset_csv, predict,
    train_bus_model, BusModel, GenConfig, TrainConfig,
};
use gridshed::net_model::{parse_case, serialize_case, NetworkCase};
use gridshed::ols;
use gridshed::power_flow::{Contingency, PowerFlowState};
use gridshed::report::{box_stats, stats_csv, stats_table, BoxStats};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "gridshed",
    version,
    about = "decentralized optimal load shedding toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the config-driven pipeline stages. Command-line values
/// override the study file.
#[derive(Args, Clone)]
struct StudyArgs {
    /// Study configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the case file named in the config.
    #[arg(long)]
    case: Option<PathBuf>,
    /// Override the config's output directory (or file, where noted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the monitored buses: comma-separated ids or `all`.
    #[arg(long)]
    buses: Option<String>,
    /// Override the identifiability tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a case file; print a summary.
    Parse {
        #[arg(long)]
        case: PathBuf,
        /// Write the canonical serialization here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// AC power flow at nominal demand, optionally under a contingency.
    Pf {
        #[arg(long)]
        case: PathBuf,
        /// Outaged branch ids, comma separated.
        #[arg(long)]
        contingency: Option<String>,
        /// Write bus voltages and branch flows as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Newton-Raphson mismatch tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Solve one optimal load shedding instance at nominal demand.
    Ols {
        #[arg(long)]
        case: PathBuf,
        /// Outaged branch ids, comma separated.
        #[arg(long)]
        contingency: Option<String>,
        /// Write the per-bus solution as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the labeled per-bus dataset for a study.
    #[command(name = "gen_data")]
    GenData(StudyArgs),
    /// Train per-bus regressors on a generated dataset.
    Train(StudyArgs),
    /// Predict α and recovered shedding from a measurement CSV.
    Predict {
        #[command(flatten)]
        study: StudyArgs,
        /// Measurement file in the dataset CSV format.
        #[arg(long)]
        input: PathBuf,
    },
    /// Pairwise contingency identifiability at the monitored buses.
    Identify(StudyArgs),
    /// Summarize per-bus prediction error distributions.
    Report(StudyArgs),
}

fn main() -> Result<()> {
    if let Ok(v) = std::env::var("GRIDSHED_WORKERS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("GRIDSHED_WORKERS must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("rayon pool already initialized")?;
    }
    match Cli::parse().command {
        Command::Parse { case, out } => cmd_parse(&case, out.as_deref()),
        Command::Pf {
            case,
            contingency,
            out,
            tol,
        } => cmd_pf(&case, contingency.as_deref(), out.as_deref(), tol),
        Command::Ols {
            case,
            contingency,
            out,
        } => cmd_ols(&case, contingency.as_deref(), out.as_deref()),
        Command::GenData(args) => cmd_gen_data(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Predict { study, input } => cmd_predict(&study, &input),
        Command::Identify(args) => cmd_identify(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

fn load_case(path: &Path) -> Result<NetworkCase> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read case file {}", path.display()))?;
    parse_case(&text).with_context(|| format!("invalid case file {}", path.display()))
}

fn parse_contingency(spec: Option<&str>) -> Result<Option<Contingency>> {
    let Some(spec) = spec else { return Ok(None) };
    let branches: Vec<u32> = spec
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .with_context(|| format!("bad branch id '{t}' in --contingency"))
        })
        .collect::<Result<_>>()?;
    Ok(Some(Contingency::new(spec.replace(' ', ""), branches)))
}

/// Apply CLI overrides onto the loaded study file.
fn resolve_study(args: &StudyArgs) -> Result<(StudyConfig, NetworkCase)> {
    let mut cfg = load_config(&args.config)
        .with_context(|| format!("cannot load config {}", args.config.display()))?;
    if let Some(case) = &args.case {
        cfg.case = case.clone();
    } else if cfg.case.is_relative() {
        // relative case paths resolve against the config file's directory
        if let Some(dir) = args.config.parent() {
            cfg.case = dir.join(&cfg.case);
        }
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(buses) = &args.buses {
        cfg.buses = if buses == "all" {
            None
        } else {
            Some(
                buses
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<u32>()
                            .with_context(|| format!("bad bus id '{t}' in --buses"))
                    })
                    .collect::<Result<_>>()?,
            )
        };
    }
    if let Some(tol) = args.tol {
        cfg.tol = tol;
    }
    let case = load_case(&cfg.case)?;
    cfg.validate_against(&case)?;
    Ok((cfg, case))
}

fn write_out(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
        }
    }
    std::fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_parse(case_path: &Path, out: Option<&Path>) -> Result<()> {
    let case = load_case(case_path)?;
    println!(
        "{}: {} buses, {} branches ({} rated), {} generators, {} flexcost entries, base {} MVA",
        case_path.display(),
        case.n_buses(),
        case.n_branches(),
        case.branches.iter().filter(|b| b.flow_limit.is_some()).count(),
        case.generators.len(),
        case.costs.len(),
        case.base_mva
    );
    let load: f64 = case.buses.iter().map(|b| b.p_demand).sum();
    let gen: f64 = case.generators.iter().map(|g| g.p_out).sum();
    println!("total load {load} MW, scheduled generation {gen} MW");
    if let Some(out) = out {
        write_out(out, &serialize_case(&case))?;
    }
    Ok(())
}

fn pf_csv(case: &NetworkCase, state: &PowerFlowState) -> String {
    let mut s = String::from("bus,v_mag,v_ang_rad,p_inj_pu,q_inj_pu\n");
    for (i, b) in case.buses.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            b.id, state.v_mag[i], state.v_ang[i], state.p_inj[i], state.q_inj[i]
        );
    }
    s.push_str("branch,from,to,p_from_pu,q_from_pu,p_to_pu,q_to_pu\n");
    for (br, f) in case.branches.iter().zip(&state.branch_flows) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            br.id, br.from_bus, br.to_bus, f.p_from, f.q_from, f.p_to, f.q_to
        );
    }
    s
}

fn cmd_pf(case_path: &Path, contingency: Option<&str>, out: Option<&Path>, tol: f64) -> Result<()> {
    let case = load_case(case_path)?;
    let contingency = parse_contingency(contingency)?;
    let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
    let qd: Vec<f64> = case.buses.iter().map(|b| b.q_demand).collect();
    let opts = gridshed::power_flow::AcOptions {
        tolerance: tol,
        ..Default::default()
    };
    let state = gridshed::power_flow::solve_ac_loads(&case, &pd, &qd, contingency.as_ref(), &opts, None)?;
    if !state.converged {
        bail!(
            "power flow did not converge in {} iterations (max mismatch {:.3e})",
            state.iterations,
            state.max_mismatch
        );
    }
    println!(
        "converged in {} iterations, max mismatch {:.3e}",
        state.iterations, state.max_mismatch
    );
    let vmin = state.v_mag.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = state.v_mag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "|V| in [{vmin:.4}, {vmax:.4}], total generation {:.2} MW",
        state.total_generation() * case.base_mva
    );
    if let Some(out) = out {
        write_out(out, &pf_csv(&case, &state))?;
    }
    Ok(())
}

fn cmd_ols(case_path: &Path, contingency: Option<&str>, out: Option<&Path>) -> Result<()> {
    let case = load_case(case_path)?;
    let contingency = parse_contingency(contingency)?;
    let pd: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
    let problem = ols::build_problem(&case, contingency.as_ref(), &pd)?;
    let sol = ols::solve(&problem)?;
    println!(
        "status {:?} after {} iterations, objective {:.4} $, residuals {:.2e}/{:.2e}/{:.2e}",
        sol.status,
        sol.iterations,
        sol.objective,
        sol.kkt_residuals.0,
        sol.kkt_residuals.1,
        sol.kkt_residuals.2
    );
    if sol.status != ols::OlsStatus::Optimal {
        bail!("shedding instance finished with status {:?}", sol.status);
    }
    let shed: f64 = sol.s2.iter().sum();
    println!("total shed {shed:.3} MW");
    let mut csv = String::from("bus,alpha,s1_mw,s2_mw,recovered_mw\n");
    for (i, b) in case.buses.iter().enumerate() {
        let recovered = case
            .cost_for_bus(b.id)
            .map(|c| ols::recover_shedding(sol.alpha[i], c))
            .unwrap_or(0.0);
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            b.id, sol.alpha[i], sol.s1[i], sol.s2[i], recovered
        );
    }
    match out {
        Some(out) => write_out(out, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn study_contingencies(cfg: &StudyConfig) -> Vec<Contingency> {
    cfg.contingencies
        .iter()
        .map(|(id, branches)| Contingency::new(id.clone(), branches.clone()))
        .collect()
}

fn data_dir(cfg: &StudyConfig) -> PathBuf {
    cfg.out_dir.join("data")
}

fn models_dir(cfg: &StudyConfig) -> PathBuf {
    cfg.out_dir.join("models")
}

fn cmd_gen_data(args: &StudyArgs) -> Result<()> {
    let (cfg, case) = resolve_study(args)?;
    if cfg.contingencies.is_empty() {
        bail!("config lists no contingencies; nothing to sample");
    }
    let buses = cfg.monitored_buses(&case);
    if buses.is_empty() {
        bail!("no monitored buses (no costed load buses in the case?)");
    }
    let gen_cfg = GenConfig {
        n_per_contingency: cfg.samples_per_contingency,
        perturb_lo: cfg.perturb_lo,
        perturb_hi: cfg.perturb_hi,
        master_seed: cfg.master_seed,
        f0: cfg.f0,
        k_sys: cfg.k_sys,
        ..GenConfig::default()
    };
    let t0 = Instant::now();
    let ds = generate_dataset(&case, &study_contingencies(&cfg), &buses, &gen_cfg)?;
    eprintln!(
        "generated {} samples for {} buses in {:.1}s",
        ds.samples.len(),
        buses.len(),
        t0.elapsed().as_secs_f64()
    );
    for &(ref id, n) in &ds.failures {
        eprintln!("note: contingency {id}: {n} draws failed and were dropped");
    }
    let dir = data_dir(&cfg);
    for &bus in &buses {
        let csv = ds.to_csv(bus).expect("bus was requested");
        write_out(&dir.join(format!("bus_{bus}.csv")), &csv)?;
    }
    let mut manifest = format!("dataset_hash {}\n", ds.hash());
    let _ = writeln!(manifest, "master_seed {}", cfg.master_seed);
    let _ = writeln!(manifest, "samples {}", ds.samples.len());
    let _ = writeln!(manifest, "buses {}", buses.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","));
    write_out(&dir.join("manifest.txt"), &manifest)?;
    println!("dataset hash {}", ds.hash());
    Ok(())
}

fn train_config(cfg: &StudyConfig) -> TrainConfig {
    TrainConfig {
        hidden: cfg.hidden.clone(),
        activation: cfg.activation,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        weight_decay: cfg.weight_decay,
        train_fraction: cfg.train_fraction,
        val_fraction: cfg.val_fraction,
        patience: cfg.patience,
        seed: cfg.master_seed,
    }
}

fn read_bus_dataset(dir: &Path, bus: u32) -> Result<Vec<gridshed::learning::LabeledSample>> {
    let path = dir.join(format!("bus_{bus}.csv"));
    let text = std::fs::read_to_string(&path).with_context(|| {
        format!(
            "cannot read {} (run `gridshed gen_data` first?)",
            path.display()
        )
    })?;
    let (got, samples) = parse_dataset_csv(&text)?;
    if got != bus {
        bail!("{} claims bus {got}, expected {bus}", path.display());
    }
    Ok(samples)
}

fn cmd_train(args: &StudyArgs) -> Result<()> {
    let (cfg, case) = resolve_study(args)?;
    let buses = cfg.monitored_buses(&case);
    let tcfg = train_config(&cfg);
    let dir = data_dir(&cfg);
    let mdir = models_dir(&cfg);
    let mut metrics = String::from("bus,n_samples,epochs_run,train_mse,test_mse,mape\n");
    for &bus in &buses {
        let samples = read_bus_dataset(&dir, bus)?;
        let t0 = Instant::now();
        let model = train_bus_model(&samples, &tcfg)
            .with_context(|| format!("training failed for bus {bus}"))?;
        eprintln!(
            "bus {bus}: {} samples, {} epochs, test mse {:.4}, mape {:.3}%, {:.1}s",
            samples.len(),
            model.meta.epochs_run,
            model.meta.test_mse,
            model.meta.mape * 100.0,
            t0.elapsed().as_secs_f64()
        );
        let _ = writeln!(
            metrics,
            "{bus},{},{},{},{},{}",
            samples.len(),
            model.meta.epochs_run,
            model.meta.train_mse,
            model.meta.test_mse,
            model.meta.mape
        );
        write_out(&mdir.join(format!("bus_{bus}.model")), &model_to_text(&model))?;
        write_out(
            &cfg.out_dir.join("errors").join(format!("bus_{bus}.csv")),
            &test_errors_csv(&case, &model, &samples, &tcfg),
        )?;
    }
    write_out(&cfg.out_dir.join("metrics.csv"), &metrics)?;
    Ok(())
}

/// Held-out per-sample errors: |α̂ − α| and the matching recovered-shedding
/// error in MW. One row per test sample, deterministic split.
fn test_errors_csv(
    case: &NetworkCase,
    model: &BusModel,
    samples: &[gridshed::learning::LabeledSample],
    tcfg: &TrainConfig,
) -> String {
    let test_idx = gridshed::learning::test_split_indices(samples.len(), tcfg);
    let cost = case.cost_for_bus(model.bus);
    let mut s = String::from("abs_alpha_err,abs_shed_err_mw\n");
    for &i in &test_idx {
        let sample = &samples[i];
        let alpha_hat = predict(model, &sample.features).expect("layout matches");
        let alpha_err = (alpha_hat - sample.label).abs();
        let shed_err = cost
            .map(|c| (ols::recover_shedding(alpha_hat, c) - ols::recover_shedding(sample.label, c)).abs())
            .unwrap_or(0.0);
        let _ = writeln!(s, "{alpha_err},{shed_err}");
    }
    s
}

fn cmd_predict(args: &StudyArgs, input: &Path) -> Result<()> {
    // --out names the prediction file here, not the study directory
    let (cfg, case) = resolve_study(&StudyArgs {
        out: None,
        ..args.clone()
    })?;
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("cannot read measurements {}", input.display()))?;
    let (bus, samples) = parse_dataset_csv(&text)?;
    let model_path = models_dir(&cfg).join(format!("bus_{bus}.model"));
    let model_text = std::fs::read_to_string(&model_path).with_context(|| {
        format!(
            "cannot read model {} (run `gridshed train` first?)",
            model_path.display()
        )
    })?;
    let model = model_from_text(&model_text)?;
    let cost = case.cost_for_bus(bus);
    let mut csv = String::from("row,alpha_hat,shed_hat_mw,alpha_label\n");
    for (i, s) in samples.iter().enumerate() {
        let alpha_hat = predict(&model, &s.features)?;
        let shed = cost
            .map(|c| ols::recover_shedding(alpha_hat, c))
            .unwrap_or(0.0);
        let _ = writeln!(csv, "{i},{alpha_hat},{shed},{}", s.label);
    }
    match &args.out {
        Some(out) => write_out(out, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_identify(args: &StudyArgs) -> Result<()> {
    let (cfg, case) = resolve_study(args)?;
    if cfg.contingencies.len() < 2 {
        bail!("identifiability needs at least two contingencies in the config");
    }
    let buses = cfg.monitored_buses(&case);
    let mut all = Vec::new();
    for &bus in &buses {
        let outcomes = check_set(&case, bus, &cfg.contingencies, cfg.tol)?;
        for o in &outcomes {
            println!(
                "bus {}: {} vs {}: min_sigma {:.6} -> {}",
                o.bus,
                o.set_a,
                o.set_b,
                o.min_cosine,
                if o.identifiable { "identifiable" } else { "NOT identifiable" }
            );
        }
        all.extend(outcomes);
    }
    let failures = all.iter().filter(|o| !o.identifiable).count();
    println!(
        "{} of {} pairs identifiable",
        all.len() - failures,
        all.len()
    );
    if let Some(out) = &args.out {
        write_out(out, &report_csv(&all))?;
    }
    if failures > 0 {
        bail!("{failures} contingency pairs are not identifiable");
    }
    Ok(())
}

fn cmd_report(args: &StudyArgs) -> Result<()> {
    // --out names the summary file here, not the study directory
    let (cfg, case) = resolve_study(&StudyArgs {
        out: None,
        ..args.clone()
    })?;
    let buses = cfg.monitored_buses(&case);
    let mut rows: Vec<(String, BoxStats)> = Vec::new();
    for &bus in &buses {
        let path = cfg.out_dir.join("errors").join(format!("bus_{bus}.csv"));
        let text = std::fs::read_to_string(&path).with_context(|| {
            format!(
                "cannot read {} (run `gridshed train` first?)",
                path.display()
            )
        })?;
        let errs: Vec<f64> = text
            .lines()
            .skip(1)
            .filter_map(|l| l.split(',').next())
            .map(|t| {
                t.parse::<f64>()
                    .with_context(|| format!("bad error value '{t}' in {}", path.display()))
            })
            .collect::<Result<_>>()?;
        if let Some(stats) = box_stats(&errs) {
            rows.push((format!("bus{bus}"), stats));
        }
    }
    if rows.is_empty() {
        bail!("no error series found under {}", cfg.out_dir.display());
    }
    print!("{}", stats_table(&rows));
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("report.csv"));
    write_out(&out, &stats_csv(&rows))?;
    Ok(())
}
