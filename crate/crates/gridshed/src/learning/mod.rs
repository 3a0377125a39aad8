//! Offline dataset harvesting and per-bus surrogate training.
//!
//! The offline phase perturbs loads, simulates pre/post-contingency AC
//! states, solves the DC optimal-shedding problem for the nodal dual α,
//! and stores one (local features, α) sample per monitored bus. The online
//! phase is a pure forward pass: each bus predicts its own α from local
//! measurements and recovers its shedding decision in closed form.

pub mod nn;

use crate::net_model::{CaseError, NetworkCase};
use crate::ols::{self, OlsError, OlsStatus};
use crate::power_flow::{
    frequency_proxy, solve_ac_loads, AcOptions, Contingency, PfError, PowerFlowState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use nn::{gradient_check, Activation, Adam, Grads, Loss, Mlp};

/// Version tag for the feature-vector layout; bump on any reordering.
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("contingency '{0}' islands the network")]
    Islanding(String),
    #[error("{failed} of {total} samples failed to solve (limit {limit}); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit: usize,
        first: String,
    },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("training diverged (loss not finite) with {0}")]
    Diverged(String),
    #[error("feature layout mismatch: model expects {expected} entries, got {got}")]
    LayoutMismatch { expected: usize, got: usize },
    #[error("malformed dataset file: {0}")]
    BadDataset(String),
    #[error("malformed model file: {0}")]
    BadModel(String),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Pf(#[from] PfError),
    #[error(transparent)]
    Ols(#[from] OlsError),
}

/// Feature slots for bus `i` with incident branches in ascending id order:
/// `[p_d, q_d]`, then pre-contingency `[V, ω, {p_ij}, {q_ij}]`, then the
/// same block post-contingency. Outaged incident branches contribute exact
/// zeros in the post block. Length `2 + 2·(2 + 2·deg(i))`.
pub fn feature_len(degree: usize) -> usize {
    2 + 2 * (2 + 2 * degree)
}

/// Column names matching [`extract_features`] order.
pub fn feature_names(case: &NetworkCase, bus_id: u32) -> Result<Vec<String>, LearnError> {
    let idx = case.bus_index(bus_id)?;
    let incident = &case.adjacency[idx];
    let mut names = vec!["pd".to_string(), "qd".to_string()];
    for phase in ["pre", "post"] {
        names.push(format!("{phase}_v"));
        names.push(format!("{phase}_omega"));
        for &b in incident {
            names.push(format!("{phase}_p_br{b}"));
        }
        for &b in incident {
            names.push(format!("{phase}_q_br{b}"));
        }
    }
    Ok(names)
}

/// Local measurement vector for one bus, in p.u. (ω in Hz).
pub fn extract_features(
    case: &NetworkCase,
    bus_id: u32,
    p_demand_mw: &[f64],
    q_demand_mvar: &[f64],
    pre: &PowerFlowState,
    post: &PowerFlowState,
    outages: &[u32],
    f0: f64,
    k_sys: f64,
) -> Result<Vec<f64>, LearnError> {
    let idx = case.bus_index(bus_id)?;
    let base = case.base_mva;
    let incident = &case.adjacency[idx];
    let mut x = Vec::with_capacity(feature_len(incident.len()));
    x.push(p_demand_mw[idx] / base);
    x.push(q_demand_mvar[idx] / base);
    let omega_post = frequency_proxy(pre, post, f0, k_sys)?;
    for (state, omega, outaged) in [
        (pre, f0, false),
        (post, omega_post, true),
    ] {
        x.push(state.v_mag[idx]);
        x.push(omega);
        for &branch_id in incident {
            let r = case.branch_index(branch_id)?;
            let out = outaged && outages.contains(&branch_id);
            let br = &case.branches[r];
            let flow = &state.branch_flows[r];
            let p = if br.from_bus == bus_id { flow.p_from } else { flow.p_to };
            x.push(if out { 0.0 } else { p });
        }
        for &branch_id in incident {
            let r = case.branch_index(branch_id)?;
            let out = outaged && outages.contains(&branch_id);
            let br = &case.branches[r];
            let flow = &state.branch_flows[r];
            let q = if br.from_bus == bus_id { flow.q_from } else { flow.q_to };
            x.push(if out { 0.0 } else { q });
        }
    }
    Ok(x)
}

/// One training example for one bus.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub bus: u32,
    pub features: Vec<f64>,
    /// Nodal dual α, $/MWh.
    pub label: f64,
    pub contingency: String,
    /// RNG seed that produced the load draw (reproducibility handle).
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub n_per_contingency: usize,
    /// Uniform load-multiplier range, e.g. [0.95, 1.05].
    pub perturb_lo: f64,
    pub perturb_hi: f64,
    pub master_seed: u64,
    pub f0: f64,
    pub k_sys: f64,
    /// Abort when more than this fraction of samples fails to solve.
    pub max_failure_frac: f64,
    /// Skip the shedding solve and emit zero labels. Classifier datasets
    /// only consume features, and the dual solve dominates generation time
    /// on large cases.
    pub skip_labels: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_per_contingency: 200,
            perturb_lo: 0.95,
            perturb_hi: 1.05,
            master_seed: 1,
            f0: 60.0,
            k_sys: 0.5,
            max_failure_frac: 0.1,
            skip_labels: false,
        }
    }
}

/// One kept (contingency, draw) pair with features for every monitored bus.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub contingency: String,
    pub sample_index: usize,
    pub seed: u64,
    /// Parallel to `Dataset::buses`.
    pub features: Vec<Vec<f64>>,
    /// α per monitored bus, $/MWh.
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub buses: Vec<u32>,
    pub feature_names: Vec<Vec<String>>,
    pub layout_version: u32,
    pub samples: Vec<SampleRow>,
    /// (contingency id, failed draw count)
    pub failures: Vec<(String, usize)>,
}

/// splitmix64; gives each (contingency, draw) pair an independent stream.
fn derive_seed(master: u64, j: u64, k: u64) -> u64 {
    let mut z = master
        .wrapping_add(j.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(k.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Algorithm: for each contingency and draw, perturb every bus demand by an
/// independent uniform multiplier, solve the pre-contingency AC case from a
/// flat start and the post-contingency case warm-started from it, then
/// label with the DC optimal-shedding duals. Draws whose power flow fails
/// to converge or whose OLS is not optimal are dropped; more than
/// `max_failure_frac` of failures aborts. Results are independent of the
/// worker-thread count.
pub fn generate_dataset(
    case: &NetworkCase,
    contingencies: &[Contingency],
    buses: &[u32],
    cfg: &GenConfig,
) -> Result<Dataset, LearnError> {
    assert!(cfg.perturb_lo <= cfg.perturb_hi);
    for c in contingencies {
        c.validate(case)?;
        if !crate::power_flow::check_connectivity(case, Some(c)) {
            return Err(LearnError::Islanding(c.id.clone()));
        }
    }
    let feature_names: Vec<Vec<String>> = buses
        .iter()
        .map(|&b| feature_names(case, b))
        .collect::<Result<_, _>>()?;
    let pd_nom: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
    let qd_nom: Vec<f64> = case.buses.iter().map(|b| b.q_demand).collect();
    let opts = AcOptions::default();

    let total = contingencies.len() * cfg.n_per_contingency;
    let results: Vec<Result<SampleRow, (usize, String)>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let j = flat / cfg.n_per_contingency;
            let k = flat % cfg.n_per_contingency;
            let c = &contingencies[j];
            let seed = derive_seed(cfg.master_seed, j as u64, k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mult: Vec<f64> = (0..case.n_buses())
                .map(|_| {
                    if cfg.perturb_lo == cfg.perturb_hi {
                        cfg.perturb_lo
                    } else {
                        rng.gen_range(cfg.perturb_lo..cfg.perturb_hi)
                    }
                })
                .collect();
            let pd: Vec<f64> = pd_nom.iter().zip(&mult).map(|(d, m)| d * m).collect();
            let qd: Vec<f64> = qd_nom.iter().zip(&mult).map(|(d, m)| d * m).collect();
            let fail = |msg: String| (j, format!("{} draw {k}: {msg}", c.id));
            let pre = solve_ac_loads(case, &pd, &qd, None, &opts, None)
                .map_err(|e| fail(e.to_string()))?;
            if !pre.converged {
                return Err(fail("pre-contingency power flow did not converge".into()));
            }
            let post = solve_ac_loads(case, &pd, &qd, Some(c), &opts, Some(&pre))
                .map_err(|e| fail(e.to_string()))?;
            if !post.converged {
                return Err(fail("post-contingency power flow did not converge".into()));
            }
            let alpha = if cfg.skip_labels {
                None
            } else {
                let problem =
                    ols::build_problem(case, Some(c), &pd).map_err(|e| fail(e.to_string()))?;
                let sol = ols::solve(&problem).map_err(|e| fail(e.to_string()))?;
                if sol.status != OlsStatus::Optimal {
                    return Err(fail(format!("OLS status {:?}", sol.status)));
                }
                Some(sol.alpha)
            };
            let mut features = Vec::with_capacity(buses.len());
            let mut labels = Vec::with_capacity(buses.len());
            for &b in buses {
                let x = extract_features(
                    case,
                    b,
                    &pd,
                    &qd,
                    &pre,
                    &post,
                    &c.outaged_branches,
                    cfg.f0,
                    cfg.k_sys,
                )
                .map_err(|e| fail(e.to_string()))?;
                features.push(x);
                let i = case.bus_index(b).map_err(|e| fail(e.to_string()))?;
                labels.push(alpha.as_ref().map_or(0.0, |a| a[i]));
            }
            Ok(SampleRow {
                contingency: c.id.clone(),
                sample_index: k,
                seed,
                features,
                labels,
            })
        })
        .collect();

    let mut samples = Vec::new();
    let mut failures: Vec<(String, usize)> =
        contingencies.iter().map(|c| (c.id.clone(), 0)).collect();
    let mut first_failure: Option<String> = None;
    let mut failed = 0;
    for r in results {
        match r {
            Ok(row) => samples.push(row),
            Err((j, msg)) => {
                failed += 1;
                failures[j].1 += 1;
                first_failure.get_or_insert(msg);
            }
        }
    }
    let limit = (cfg.max_failure_frac * total as f64).floor() as usize;
    if failed > limit {
        return Err(LearnError::TooManyFailures {
            failed,
            total,
            limit,
            first: first_failure.unwrap_or_default(),
        });
    }
    Ok(Dataset {
        buses: buses.to_vec(),
        feature_names,
        layout_version: LAYOUT_VERSION,
        samples,
        failures,
    })
}

impl Dataset {
    /// Samples for one monitored bus, in generation order.
    pub fn bus_samples(&self, bus: u32) -> Vec<LabeledSample> {
        let Some(col) = self.buses.iter().position(|&b| b == bus) else {
            return Vec::new();
        };
        self.samples
            .iter()
            .map(|row| LabeledSample {
                bus,
                features: row.features[col].clone(),
                label: row.labels[col],
                contingency: row.contingency.clone(),
                seed: row.seed,
            })
            .collect()
    }

    /// CSV for one bus: comment line with layout metadata, header naming
    /// each feature slot, then one row per sample ending in
    /// (label, contingency, seed). Floats use shortest round-trip form, so
    /// write → read → write is byte-identical.
    pub fn to_csv(&self, bus: u32) -> Option<String> {
        let col = self.buses.iter().position(|&b| b == bus)?;
        let mut s = format!(
            "# gridshed-dataset v{} bus {} features {}\n",
            self.layout_version,
            bus,
            self.feature_names[col].len()
        );
        s.push_str(&self.feature_names[col].join(","));
        s.push_str(",label,contingency,seed\n");
        for row in &self.samples {
            for v in &row.features[col] {
                s.push_str(&format!("{v},"));
            }
            s.push_str(&format!(
                "{},{},{}\n",
                row.labels[col], row.contingency, row.seed
            ));
        }
        Some(s)
    }

    /// SHA-256 over the canonical per-bus CSV renderings; the determinism
    /// fingerprint reported by the batch tools.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for &b in &self.buses {
            hasher.update(self.to_csv(b).unwrap().as_bytes());
        }
        format!("{:x}", hasher.finalize())
    }
}

/// Parse one per-bus dataset CSV produced by [`Dataset::to_csv`].
pub fn parse_dataset_csv(text: &str) -> Result<(u32, Vec<LabeledSample>), LearnError> {
    let mut lines = text.lines();
    let magic = lines
        .next()
        .ok_or_else(|| LearnError::BadDataset("empty file".into()))?;
    let toks: Vec<&str> = magic.split_whitespace().collect();
    if toks.len() < 7 || toks[0] != "#" || toks[1] != "gridshed-dataset" {
        return Err(LearnError::BadDataset("missing magic line".into()));
    }
    if toks[2] != format!("v{LAYOUT_VERSION}") {
        return Err(LearnError::BadDataset(format!(
            "unsupported layout {}",
            toks[2]
        )));
    }
    let bus: u32 = toks[4]
        .parse()
        .map_err(|_| LearnError::BadDataset("bad bus id".into()))?;
    let n_feat: usize = toks[6]
        .parse()
        .map_err(|_| LearnError::BadDataset("bad feature count".into()))?;
    let _header = lines
        .next()
        .ok_or_else(|| LearnError::BadDataset("missing header".into()))?;
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_feat + 3 {
            return Err(LearnError::BadDataset(format!(
                "row {}: expected {} fields, got {}",
                lineno + 3,
                n_feat + 3,
                fields.len()
            )));
        }
        let mut features = Vec::with_capacity(n_feat);
        for f in &fields[..n_feat] {
            features.push(
                f.parse::<f64>()
                    .map_err(|_| LearnError::BadDataset(format!("row {}: bad float", lineno + 3)))?,
            );
        }
        let label: f64 = fields[n_feat]
            .parse()
            .map_err(|_| LearnError::BadDataset(format!("row {}: bad label", lineno + 3)))?;
        let seed: u64 = fields[n_feat + 2]
            .parse()
            .map_err(|_| LearnError::BadDataset(format!("row {}: bad seed", lineno + 3)))?;
        out.push(LabeledSample {
            bus,
            features,
            label,
            contingency: fields[n_feat + 1].to_string(),
            seed,
        });
    }
    Ok((bus, out))
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub train_fraction: f64,
    /// Fraction of the training split held out for early stopping.
    pub val_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![40, 30, 20],
            activation: Activation::Relu,
            epochs: 300,
            batch_size: 32,
            learning_rate: 3e-3,
            weight_decay: 1e-4,
            train_fraction: 0.7,
            val_fraction: 0.1,
            patience: 30,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub test_mse: f64,
    /// Σ|α̂ − α| / Σ|α| on the held-out split (fraction, not percent).
    pub mape: f64,
    pub optimizer: String,
}

/// Per-bus regressor: standardized inputs, α in $/MWh straight out of the
/// network (the label standardization is folded into the output layer).
#[derive(Debug, Clone)]
pub struct BusModel {
    pub bus: u32,
    pub layout_version: u32,
    pub net: Mlp,
    pub feat_mean: Vec<f64>,
    pub feat_std: Vec<f64>,
    /// Feature slots constant on the training set (std forced to 1).
    pub constant_features: Vec<usize>,
    pub meta: TrainMeta,
}

fn standardize_stats(samples: &[&LabeledSample]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let d = samples[0].features.len();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, &x) in mean.iter_mut().zip(&s.features) {
            *m += x / n;
        }
    }
    let mut std = vec![0.0; d];
    for s in samples {
        for (v, (&x, &m)) in std.iter_mut().zip(s.features.iter().zip(&mean)) {
            *v += (x - m).powi(2) / n;
        }
    }
    let mut constant = Vec::new();
    for (j, v) in std.iter_mut().enumerate() {
        *v = v.sqrt();
        if *v < 1e-12 {
            *v = 1.0;
            constant.push(j);
        }
    }
    (mean, std, constant)
}

fn standardized(x: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(mean.iter().zip(std))
        .map(|(&v, (&m, &s))| (v - m) / s)
        .collect()
}

/// Deterministic shuffle-split into (train, val, test) index sets.
fn split_indices(n: usize, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xA5A5_5A5A);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let n_train_total = ((n as f64) * cfg.train_fraction).round() as usize;
    let n_val = ((n_train_total as f64) * cfg.val_fraction).round().max(1.0) as usize;
    let test = idx.split_off(n_train_total);
    let val = idx.split_off(n_train_total.saturating_sub(n_val));
    (idx, val, test)
}

/// Indices of the held-out test split for `n` samples under `cfg`; the same
/// set `train_bus_model` evaluates on, so callers can report per-sample
/// errors without re-deriving the shuffle.
pub fn test_split_indices(n: usize, cfg: &TrainConfig) -> Vec<usize> {
    split_indices(n, cfg).2
}

fn mean_mse(net: &Mlp, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let out = net.forward(x)[0];
        acc += (out - y).powi(2);
    }
    acc / xs.len() as f64
}

/// Train one per-bus α regressor. Mini-batch Adam on MSE with L2 weight
/// decay, early stopping on a validation slice carved from the training
/// split; returns the model with held-out test MSE and relative |α| error.
pub fn train_bus_model(
    samples: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<BusModel, LearnError> {
    const MIN_SAMPLES: usize = 50;
    if samples.len() < MIN_SAMPLES {
        return Err(LearnError::TooFewSamples {
            min: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let d = samples[0].features.len();
    let (train_idx, val_idx, test_idx) = split_indices(samples.len(), cfg);
    let train_refs: Vec<&LabeledSample> = train_idx.iter().map(|&i| &samples[i]).collect();
    let (mean, std, constant) = standardize_stats(&train_refs);
    // standardize labels on the training split as well; folded back into
    // the output layer below so predict() returns $/MWh directly
    let mu_y = train_refs.iter().map(|s| s.label).sum::<f64>() / train_refs.len() as f64;
    let mut sig_y = (train_refs
        .iter()
        .map(|s| (s.label - mu_y).powi(2))
        .sum::<f64>()
        / train_refs.len() as f64)
        .sqrt();
    if sig_y < 1e-12 {
        sig_y = 1.0;
    }
    let prep = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs = idx
            .iter()
            .map(|&i| standardized(&samples[i].features, &mean, &std))
            .collect();
        let ys = idx
            .iter()
            .map(|&i| (samples[i].label - mu_y) / sig_y)
            .collect();
        (xs, ys)
    };
    let (train_x, train_y) = prep(&train_idx);
    let (val_x, val_y) = prep(&val_idx);

    let mut sizes = vec![d];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(1);
    let mut net = Mlp::new_random(&sizes, cfg.activation, cfg.seed);
    let mut opt = Adam::new(&net, cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x3C3C_C3C3);

    let mut best_net = net.clone();
    let mut best_val = f64::INFINITY;
    let mut best_train = f64::INFINITY;
    let mut since_best = 0;
    let mut epochs_run = 0;
    for _epoch in 0..cfg.epochs {
        epochs_run += 1;
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| train_x[i].as_slice()).collect();
            let ts: Vec<Vec<f64>> = chunk.iter().map(|&i| vec![train_y[i]]).collect();
            let tref: Vec<&[f64]> = ts.iter().map(|t| t.as_slice()).collect();
            let (loss, grads) = net.loss_and_grads(&xs, &tref, Loss::Mse);
            if !loss.is_finite() {
                return Err(LearnError::Diverged(format!(
                    "lr={} batch={} hidden={:?} seed={}",
                    cfg.learning_rate, cfg.batch_size, cfg.hidden, cfg.seed
                )));
            }
            opt.step(&mut net, &grads, cfg.weight_decay);
        }
        let val_mse = mean_mse(&net, &val_x, &val_y);
        if val_mse < best_val * (1.0 - 1e-9) {
            best_val = val_mse;
            best_train = mean_mse(&net, &train_x, &train_y);
            best_net = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let mut net = best_net;
    // fold the label standardization into the linear output layer
    let last = net.n_layers() - 1;
    for j in 0..net.weights[last].cols() {
        let v = net.weights[last].get(0, j) * sig_y;
        net.weights[last].set(0, j, v);
    }
    net.biases[last][0] = net.biases[last][0] * sig_y + mu_y;

    // held-out metrics in physical units
    let mut test_mse = 0.0;
    let mut abs_err = 0.0;
    let mut abs_lab = 0.0;
    for &i in &test_idx {
        let x = standardized(&samples[i].features, &mean, &std);
        let pred = net.forward(&x)[0];
        let err = pred - samples[i].label;
        test_mse += err * err / test_idx.len() as f64;
        abs_err += err.abs();
        abs_lab += samples[i].label.abs();
    }
    let mape = if abs_lab > 0.0 { abs_err / abs_lab } else { 0.0 };

    Ok(BusModel {
        bus: samples[0].bus,
        layout_version: LAYOUT_VERSION,
        net,
        feat_mean: mean,
        feat_std: std,
        constant_features: constant,
        meta: TrainMeta {
            seed: cfg.seed,
            epochs_run,
            train_mse: best_train * sig_y * sig_y,
            val_mse: best_val * sig_y * sig_y,
            test_mse,
            mape,
            optimizer: "adam".to_string(),
        },
    })
}

/// Forward pass: standardize, run the net, α̂ in $/MWh.
pub fn predict(model: &BusModel, features: &[f64]) -> Result<f64, LearnError> {
    if features.len() != model.feat_mean.len() {
        return Err(LearnError::LayoutMismatch {
            expected: model.feat_mean.len(),
            got: features.len(),
        });
    }
    let x = standardized(features, &model.feat_mean, &model.feat_std);
    Ok(model.net.forward(&x)[0])
}

/// Per-bus contingency classifier: softmax over the observed contingency
/// ids (sorted, deduplicated).
#[derive(Debug, Clone)]
pub struct BusClassifier {
    pub bus: u32,
    pub layout_version: u32,
    pub net: Mlp,
    pub feat_mean: Vec<f64>,
    pub feat_std: Vec<f64>,
    pub classes: Vec<String>,
}

/// Train a contingency classifier on the same samples; returns the model
/// and held-out accuracy.
pub fn train_classifier(
    samples: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<(BusClassifier, f64), LearnError> {
    const MIN_SAMPLES: usize = 50;
    if samples.len() < MIN_SAMPLES {
        return Err(LearnError::TooFewSamples {
            min: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let mut classes: Vec<String> = samples.iter().map(|s| s.contingency.clone()).collect();
    classes.sort();
    classes.dedup();
    let class_of = |s: &LabeledSample| -> f64 {
        classes.iter().position(|c| *c == s.contingency).unwrap() as f64
    };
    let d = samples[0].features.len();
    let (train_idx, val_idx, test_idx) = split_indices(samples.len(), cfg);
    let train_refs: Vec<&LabeledSample> = train_idx.iter().map(|&i| &samples[i]).collect();
    let (mean, std, _) = standardize_stats(&train_refs);
    let prep = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            idx.iter()
                .map(|&i| standardized(&samples[i].features, &mean, &std))
                .collect(),
            idx.iter().map(|&i| class_of(&samples[i])).collect(),
        )
    };
    let (train_x, train_y) = prep(&train_idx);
    let (val_x, val_y) = prep(&val_idx);

    let mut sizes = vec![d];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(classes.len());
    let mut net = Mlp::new_random(&sizes, cfg.activation, cfg.seed);
    let mut opt = Adam::new(&net, cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x3C3C_C3C3);
    let accuracy = |net: &Mlp, xs: &[Vec<f64>], ys: &[f64]| -> f64 {
        if xs.is_empty() {
            return 1.0;
        }
        let hits = xs
            .iter()
            .zip(ys)
            .filter(|(x, &y)| {
                let out = net.forward(x);
                let argmax = out
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                argmax == y as usize
            })
            .count();
        hits as f64 / xs.len() as f64
    };
    let mut best_net = net.clone();
    let mut best_val = -1.0;
    let mut since_best = 0;
    for _epoch in 0..cfg.epochs {
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| train_x[i].as_slice()).collect();
            let ts: Vec<Vec<f64>> = chunk.iter().map(|&i| vec![train_y[i]]).collect();
            let tref: Vec<&[f64]> = ts.iter().map(|t| t.as_slice()).collect();
            let (loss, grads) = net.loss_and_grads(&xs, &tref, Loss::SoftmaxCrossEntropy);
            if !loss.is_finite() {
                return Err(LearnError::Diverged(format!(
                    "lr={} batch={} hidden={:?} seed={}",
                    cfg.learning_rate, cfg.batch_size, cfg.hidden, cfg.seed
                )));
            }
            opt.step(&mut net, &grads, cfg.weight_decay);
        }
        let val_acc = accuracy(&net, &val_x, &val_y);
        if val_acc > best_val {
            best_val = val_acc;
            best_net = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let net = best_net;
    let (test_x, test_y) = prep(&test_idx);
    let test_acc = accuracy(&net, &test_x, &test_y);
    Ok((
        BusClassifier {
            bus: samples[0].bus,
            layout_version: LAYOUT_VERSION,
            net,
            feat_mean: mean,
            feat_std: std,
            classes,
        },
        test_acc,
    ))
}

/// Predicted contingency id for a measurement vector.
pub fn classify(model: &BusClassifier, features: &[f64]) -> Result<String, LearnError> {
    if features.len() != model.feat_mean.len() {
        return Err(LearnError::LayoutMismatch {
            expected: model.feat_mean.len(),
            got: features.len(),
        });
    }
    let x = standardized(features, &model.feat_mean, &model.feat_std);
    let out = model.net.forward(&x);
    let argmax = out
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    Ok(model.classes[argmax].clone())
}

/// Versioned text serialization of a [`BusModel`].
pub fn model_to_text(model: &BusModel) -> String {
    let mut s = String::new();
    s.push_str(&format!("gridshed-model v{}\n", model.layout_version));
    s.push_str(&format!("bus {}\n", model.bus));
    s.push_str(&format!("activation {}\n", model.net.activation.name()));
    let sizes: Vec<String> = model.net.sizes.iter().map(|v| v.to_string()).collect();
    s.push_str(&format!("sizes {}\n", sizes.join(" ")));
    let join = |v: &[f64]| -> String {
        v.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    s.push_str(&format!("mean {}\n", join(&model.feat_mean)));
    s.push_str(&format!("std {}\n", join(&model.feat_std)));
    let constant: Vec<String> = model
        .constant_features
        .iter()
        .map(|v| v.to_string())
        .collect();
    s.push_str(&format!("constant {}\n", constant.join(" ")));
    s.push_str(&format!(
        "meta seed {} epochs {} train_mse {} val_mse {} test_mse {} mape {} optimizer {}\n",
        model.meta.seed,
        model.meta.epochs_run,
        model.meta.train_mse,
        model.meta.val_mse,
        model.meta.test_mse,
        model.meta.mape,
        model.meta.optimizer
    ));
    for l in 0..model.net.n_layers() {
        s.push_str(&format!("layer {l}\n"));
        for i in 0..model.net.weights[l].rows() {
            s.push_str(&join(model.net.weights[l].row(i)));
            s.push('\n');
        }
        s.push_str(&join(&model.net.biases[l]));
        s.push('\n');
    }
    s
}

/// Parse the text format written by [`model_to_text`].
pub fn model_from_text(text: &str) -> Result<BusModel, LearnError> {
    let bad = |msg: &str| LearnError::BadModel(msg.to_string());
    let mut lines = text.lines();
    let magic = lines.next().ok_or_else(|| bad("empty file"))?;
    if magic != format!("gridshed-model v{LAYOUT_VERSION}") {
        return Err(bad("bad magic line"));
    }
    fn field(
        lines: &mut std::str::Lines<'_>,
        prefix: &str,
    ) -> Result<String, LearnError> {
        let line = lines
            .next()
            .ok_or_else(|| LearnError::BadModel("truncated header".into()))?;
        line.strip_prefix(prefix)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| LearnError::BadModel(format!("expected '{prefix}' line")))
    }
    let bus: u32 = field(&mut lines, "bus ")?.parse().map_err(|_| bad("bad bus"))?;
    let activation = Activation::parse(&field(&mut lines, "activation ")?)
        .ok_or_else(|| bad("bad activation"))?;
    let sizes: Vec<usize> = field(&mut lines, "sizes ")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad sizes")))
        .collect::<Result<_, _>>()?;
    let parse_floats = |s: String| -> Result<Vec<f64>, LearnError> {
        s.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad("bad float")))
            .collect()
    };
    let feat_mean = parse_floats(field(&mut lines, "mean ")?)?;
    let feat_std = parse_floats(field(&mut lines, "std ")?)?;
    let constant_line = lines.next().ok_or_else(|| bad("truncated header"))?;
    let constant_features: Vec<usize> = constant_line
        .strip_prefix("constant")
        .ok_or_else(|| bad("expected 'constant' line"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad constant index")))
        .collect::<Result<_, _>>()?;
    let meta_line = field(&mut lines, "meta ")?;
    let mt: Vec<&str> = meta_line.split_whitespace().collect();
    if mt.len() != 14 {
        return Err(bad("bad meta line"));
    }
    let meta = TrainMeta {
        seed: mt[1].parse().map_err(|_| bad("bad meta seed"))?,
        epochs_run: mt[3].parse().map_err(|_| bad("bad meta epochs"))?,
        train_mse: mt[5].parse().map_err(|_| bad("bad meta train_mse"))?,
        val_mse: mt[7].parse().map_err(|_| bad("bad meta val_mse"))?,
        test_mse: mt[9].parse().map_err(|_| bad("bad meta test_mse"))?,
        mape: mt[11].parse().map_err(|_| bad("bad meta mape"))?,
        optimizer: mt[13].to_string(),
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        let header = lines.next().ok_or_else(|| bad("truncated layers"))?;
        if header != format!("layer {l}") {
            return Err(bad("bad layer header"));
        }
        let mut w = crate::numerics::DenseMatrix::zeros(sizes[l + 1], sizes[l]);
        for i in 0..sizes[l + 1] {
            let row = parse_floats(lines.next().ok_or_else(|| bad("truncated weights"))?.into())?;
            if row.len() != sizes[l] {
                return Err(bad("weight row width mismatch"));
            }
            w.row_mut(i).copy_from_slice(&row);
        }
        let b = parse_floats(lines.next().ok_or_else(|| bad("truncated biases"))?.into())?;
        if b.len() != sizes[l + 1] {
            return Err(bad("bias width mismatch"));
        }
        weights.push(w);
        biases.push(b);
    }
    Ok(BusModel {
        bus,
        layout_version: LAYOUT_VERSION,
        net: Mlp {
            sizes,
            weights,
            biases,
            activation,
        },
        feat_mean,
        feat_std,
        constant_features,
        meta,
    })
}

#[cfg(test)]
mod tests;
