use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use qbc_core::channels::{Builtin, ChannelFile};
use qbc_core::fqsw::{monte_carlo_decoupling, SplitSpec};
use qbc_core::io::{format_f64, parse_dims, parse_state};
use qbc_core::optim::NelderMead;
use qbc_core::protocol::{run_one_shot, OneShotFile};
use qbc_core::random::{haar_unitary, random_pure_state, stream_rng};
use qbc_core::regions::{marton_region, optimize_region, MartonOptions, Mode, RegionOptions};
use qbc_core::tensor::{DensityOperator, Layout};
use qbc_core::typicality::{epsilon_schedule, gentle_measurement_check, typical_projector, typical_set, MAX_PROJECTOR_DIM};

use crate::output::{read_file, CliError, Manifest, Produced};
use crate::{Command, DecoupleArgs, Global, HaarArgs, MartonArgs, ModeArg, OneShotArgs, RegionArgs, TypicalArgs};

/// Stream reserved for drawing random input states, disjoint from trial streams.
const STATE_STREAM: u64 = u64::MAX;

pub fn dispatch(cmd: &Command, global: &Global, manifest: &mut Manifest) -> Result<Produced, CliError> {
    match cmd {
        Command::DecoupleCheck(a) => decouple_check(a, manifest),
        Command::OneShotSim(a) => one_shot(a, global, manifest),
        Command::Region(a) => region(a, global, manifest),
        Command::Marton(a) => marton(a, global, manifest),
        Command::TypicalDemo(a) => typical_demo(a),
        Command::HaarTest(a) => haar_test(a, manifest),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Validation(e.to_string()))
}

fn load_channel_file(path: &Path, manifest: &mut Manifest) -> Result<ChannelFile, CliError> {
    let text = read_file(path)?;
    manifest.input(path, &text);
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("`{}`: {e}", path.display())))
}

fn require_channel(global: &Global) -> Result<&Path, CliError> {
    global
        .channel
        .as_deref()
        .ok_or_else(|| CliError::Validation("this command needs --channel <path>".into()))
}

fn decouple_check(a: &DecoupleArgs, manifest: &mut Manifest) -> Result<Produced, CliError> {
    let layout = a.dims.as_deref().map(parse_dims).transpose()?;
    let psi = if a.state == "random" {
        let layout = layout.ok_or_else(|| CliError::Validation("--state random needs --dims".into()))?;
        random_pure_state(layout, &mut stream_rng(manifest.seed, STATE_STREAM))?
    } else {
        let path = Path::new(&a.state);
        let text = read_file(path)?;
        manifest.input(path, &text);
        let psi = parse_state(&text).map_err(|e| CliError::from(e).context(path))?;
        if let Some(l) = layout {
            if &l != psi.layout() {
                return Err(CliError::Validation(format!(
                    "--dims does not match the layout of `{}`",
                    path.display()
                )));
            }
        }
        psi
    };
    let labels: Vec<String> = psi.layout().labels().map(String::from).collect();
    let system = a.system.clone().unwrap_or_else(|| labels[0].clone());
    let reference: Vec<String> = match &a.reference {
        Some(r) => r.clone(),
        None => labels.iter().filter(|l| **l != system).cloned().collect(),
    };
    let dim_a = psi.layout().dim_of(&system)?;
    let split = SplitSpec::discarding(&system, dim_a, a.ahat)?;
    let report = monte_carlo_decoupling(&psi, &split, &reference, a.trials, manifest.seed)?;
    Ok(Produced::Json(json!({
        "system": system,
        "reference": reference,
        "within_bound": report.within_bound(1.05, 3.0),
        "report": to_value(&report)?,
    })))
}

impl CliError {
    fn context(self, path: &Path) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("`{}`: {m}", path.display())),
            CliError::Infeasible(m) => CliError::Infeasible(format!("`{}`: {m}", path.display())),
        }
    }
}

fn one_shot(a: &OneShotArgs, global: &Global, manifest: &mut Manifest) -> Result<Produced, CliError> {
    let text = read_file(&a.config)?;
    manifest.input(&a.config, &text);
    let mut file: OneShotFile =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("`{}`: {e}", a.config.display())))?;
    if let Some(path) = &global.channel {
        file.channel = load_channel_file(path, manifest)?;
    }
    match global.seed {
        Some(s) => file.seed = s,
        None => manifest.set_seed(file.seed),
    }
    let cfg = file.build().map_err(|e| CliError::from(e).context(&a.config))?;
    let report = run_one_shot(&cfg)?;
    Ok(Produced::Json(json!({
        "dims": to_value(&cfg.dims)?,
        "candidates": cfg.candidates,
        "report": to_value(&report)?,
    })))
}

fn region(a: &RegionArgs, global: &Global, manifest: &mut Manifest) -> Result<Produced, CliError> {
    let path = require_channel(global)?;
    let channel = load_channel_file(path, manifest)?.build().map_err(|e| CliError::from(e).context(path))?;
    let block = channel.power(a.n)?;
    let opts = RegionOptions {
        mode: match a.mode {
            ModeArg::Assisted => Mode::Assisted,
            ModeArg::Unassisted => Mode::Unassisted,
        },
        sweep: a.sweep,
        restarts: a.restarts,
        seed: manifest.seed,
        a1_dim: a.a1,
        a2_dim: a.a2,
        d_dim: a.d_dim,
        optimizer: NelderMead { max_iterations: a.max_iter, ..RegionOptions::default().optimizer },
    };
    let boundary = optimize_region(&block, &opts)?;
    let per_use = 1.0 / a.n as f64;
    let header = ["w1", "w2", "Q1", "Q2", "E1", "E2", "objective", "iterations"].map(String::from).to_vec();
    let rows = boundary
        .points
        .iter()
        .map(|p| {
            let e = p.point.ent_rates.clone().unwrap_or_else(|| vec![f64::NAN, f64::NAN]);
            vec![
                format_f64(p.weights[0]),
                format_f64(p.weights[1]),
                format_f64(p.point.rates[0] * per_use),
                format_f64(p.point.rates[1] * per_use),
                format_f64(e[0] * per_use),
                format_f64(e[1] * per_use),
                format_f64(p.objective * per_use),
                p.iterations.to_string(),
            ]
        })
        .collect();
    Ok(Produced::Csv(header, rows))
}

fn marton(a: &MartonArgs, global: &Global, manifest: &mut Manifest) -> Result<Produced, CliError> {
    let path = require_channel(global)?;
    let file = load_channel_file(path, manifest)?;
    let classical = match file.builtin.as_deref() {
        Some(name) => match Builtin::from_name(name, file.params.as_ref()).map_err(|e| CliError::from(e).context(path))? {
            Builtin::ClassicalEmbedded(t) => Some(t),
            _ => None,
        },
        None => None,
    }
    .ok_or_else(|| CliError::Validation(format!("`{}` is not a classical_embedded channel", path.display())))?;
    let u_dims = match (a.u1, a.u2) {
        (None, None) => None,
        (u1, u2) => {
            let nx = classical.dims().0;
            Some((u1.unwrap_or(nx), u2.unwrap_or(nx)))
        }
    };
    let opts = MartonOptions {
        sweep: a.sweep,
        restarts: a.restarts,
        seed: manifest.seed,
        u_dims,
        optimizer: NelderMead { max_iterations: a.max_iter, ..MartonOptions::default().optimizer },
    };
    let boundary = marton_region(&classical, &opts)?;
    Ok(Produced::Json(to_value(&boundary)?))
}

fn typical_demo(a: &TypicalArgs) -> Result<Produced, CliError> {
    if !(0.0..=1.0).contains(&a.p) {
        return Err(CliError::Validation(format!("--p {} is not a probability", a.p)));
    }
    let eps = a.eps.unwrap_or_else(|| epsilon_schedule(a.n));
    let p = [a.p, 1.0 - a.p];
    let (set, _) = typical_set(&p, a.n, eps)?;
    let mut doc = json!({ "eps_schedule": a.eps.is_none(), "typical_set": to_value(&set)? });
    let fits = 2usize.checked_pow(a.n as u32).is_some_and(|d| d <= MAX_PROJECTOR_DIM);
    if fits {
        let rho = DensityOperator::diagonal(&p, Layout::single("A", 2)?)?;
        let proj = typical_projector(&rho, a.n, eps)?;
        doc["projector"] = json!({ "rank": proj.rank, "mass": proj.mass, "dim": proj.dim() });
        doc["gentle_measurement"] = match gentle_measurement_check(&rho, a.n, eps) {
            Ok(g) => to_value(&g)?,
            Err(e) => json!({ "skipped": e.to_string() }),
        };
    }
    Ok(Produced::Json(doc))
}

fn haar_test(a: &HaarArgs, manifest: &Manifest) -> Result<Produced, CliError> {
    if a.dim == 0 || a.dim > 1024 {
        return Err(CliError::Validation("--dim must be in 1..=1024".into()));
    }
    if a.trials < 2 {
        return Err(CliError::Validation("--trials must be at least 2".into()));
    }
    let seed = manifest.seed;
    let samples: Vec<f64> = (0..a.trials)
        .into_par_iter()
        .map(|t| haar_unitary(a.dim, &mut stream_rng(seed, t as u64))[(0, 0)].norm_sqr())
        .collect();
    let n = a.trials as f64;
    let stats = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    let (m1, sem1) = stats(&mut samples.iter().copied());
    let (m2, sem2) = stats(&mut samples.iter().map(|x| x * x));
    let d = a.dim as f64;
    let (e1, e2) = (1.0 / d, 2.0 / (d * (d + 1.0)));
    Ok(Produced::Json(json!({
        "dim": a.dim,
        "trials": a.trials,
        "mean_abs_u00_sq": m1,
        "sem": sem1,
        "expected_mean": e1,
        "second_moment": m2,
        "second_moment_sem": sem2,
        "expected_second_moment": e2,
        "mean_within_3sem": (m1 - e1).abs() <= 3.0 * sem1,
        "second_moment_within_3sem": (m2 - e2).abs() <= 3.0 * sem2,
    })))
}
