//! Decoupling by a random unitary followed by a split `A → Ā ⊗ Â`.
//!
//! After a unitary `U` on `A`, the retained part `Ā` should be nearly
//! maximally mixed and uncorrelated with the reference `R`. The Haar average
//! of the squared trace distance to `I/|Ā| ⊗ ψ^R` is at most
//! `|A||R| / |Â|² · tr[(ψ^{AR})²]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::entropic::{marginal_purity, mutual_information};
use crate::error::{Error, Result};
use crate::random::{haar_unitary, stream_rng};
use crate::tensor::{trace_norm, CMatrix, DensityOperator, Isometry, LabeledState, Layout, PureState};
use crate::typicality::{epsilon_schedule, typical_projector};

/// How the decoupled system is split.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    /// Label of the system `A` the unitary acts on.
    pub system: String,
    pub abar_dim: usize,
    pub ahat_dim: usize,
    pub abar_label: String,
    pub ahat_label: String,
}

impl SplitSpec {
    pub fn new(system: &str, abar_dim: usize, ahat_dim: usize) -> Self {
        SplitSpec {
            system: system.to_string(),
            abar_dim,
            ahat_dim,
            abar_label: format!("{system}bar"),
            ahat_label: format!("{system}hat"),
        }
    }

    pub fn with_labels(mut self, abar: &str, ahat: &str) -> Self {
        self.abar_label = abar.to_string();
        self.ahat_label = ahat.to_string();
        self
    }

    /// Split keeping `|A| / ahat_dim` behind.
    pub fn discarding(system: &str, dim_a: usize, ahat_dim: usize) -> Result<Self> {
        if ahat_dim == 0 || !dim_a.is_multiple_of(ahat_dim) {
            return Err(Error::InvalidParameter(format!("|Â| = {ahat_dim} does not divide |A| = {dim_a}")));
        }
        Ok(SplitSpec::new(system, dim_a / ahat_dim, ahat_dim))
    }
}

/// Right-hand side `|A||R| / |Â|² · tr[(ψ^{AR})²]` of the decoupling inequality.
pub fn decoupling_bound(dim_a: usize, dim_r: usize, dim_ahat: usize, purity_ar: f64) -> f64 {
    (dim_a as f64) * (dim_r as f64) / ((dim_ahat as f64) * (dim_ahat as f64)) * purity_ar
}

/// A fixed `(ψ, split, R)` configuration; evaluates the decoupling distance
/// for any unitary on `A`.
#[derive(Clone, Debug)]
pub struct Decoupler {
    psi: PureState,
    split: SplitSpec,
    reference: Vec<String>,
    a_layout: Layout,
    kept: Vec<String>,
    target: DensityOperator,
    bound: f64,
    purity_ar: f64,
}

impl Decoupler {
    pub fn new<S: AsRef<str>>(psi: &PureState, split: &SplitSpec, reference: &[S]) -> Result<Self> {
        let layout = psi.layout();
        let dim_a = layout.dim_of(&split.system)?;
        if split.abar_dim * split.ahat_dim != dim_a {
            return Err(Error::DimensionMismatch(format!(
                "split {} x {} does not match |{}| = {dim_a}",
                split.abar_dim, split.ahat_dim, split.system
            )));
        }
        let reference: Vec<String> = reference.iter().map(|s| s.as_ref().to_string()).collect();
        if reference.iter().any(|r| r == &split.system) {
            return Err(Error::InvalidParameter("reference overlaps the split system".into()));
        }
        layout.positions(&reference)?;
        let dim_r = layout.dim_of_all(&reference)?;

        let split_layout = psi.split(
            &split.system,
            &[(split.abar_label.as_str(), split.abar_dim), (split.ahat_label.as_str(), split.ahat_dim)],
        )?;
        let kept: Vec<String> = split_layout
            .layout()
            .labels()
            .filter(|l| *l == split.abar_label || reference.iter().any(|r| r == l))
            .map(String::from)
            .collect();

        let psi_r = psi.reduced(&reference)?;
        let mixed = DensityOperator::maximally_mixed(Layout::single(split.abar_label.clone(), split.abar_dim)?);
        let target = mixed.tensor(&psi_r)?.permute(&kept)?;

        let mut ar = reference.clone();
        ar.push(split.system.clone());
        let state: LabeledState = psi.clone().into();
        let purity_ar = marginal_purity(&state, &ar)?;
        let bound = decoupling_bound(dim_a, dim_r, split.ahat_dim, purity_ar);
        Ok(Decoupler {
            psi: psi.clone(),
            split: split.clone(),
            reference,
            a_layout: Layout::single(split.system.clone(), dim_a)?,
            kept,
            target,
            bound,
            purity_ar,
        })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn purity_ar(&self) -> f64 {
        self.purity_ar
    }

    pub fn dim_a(&self) -> usize {
        self.a_layout.total_dim()
    }

    pub fn reference(&self) -> &[String] {
        &self.reference
    }

    /// `U·ψ` with `A` split into `Ā ⊗ Â`.
    pub fn rotated(&self, u: &CMatrix) -> Result<PureState> {
        let op = Isometry::unitary(u.clone(), self.a_layout.clone())?;
        self.psi.apply(&op)?.split(
            &self.split.system,
            &[
                (self.split.abar_label.as_str(), self.split.abar_dim),
                (self.split.ahat_label.as_str(), self.split.ahat_dim),
            ],
        )
    }

    /// `‖σ^{ĀR} − I/|Ā| ⊗ ψ^R‖₁` for `σ = tr_{Â,…}[U·ψ]`.
    pub fn distance(&self, u: &CMatrix) -> Result<f64> {
        let rotated = self.rotated(u)?;
        self.distance_of(&rotated)
    }

    fn distance_of(&self, rotated: &PureState) -> Result<f64> {
        let sigma = rotated.reduced(&self.kept)?;
        trace_norm(&(sigma.matrix() - self.target.matrix()))
    }
}

/// `(U·ψ with A split, decoupling distance)`.
pub fn decouple_once<S: AsRef<str>>(
    psi: &PureState,
    split: &SplitSpec,
    reference: &[S],
    u: &CMatrix,
) -> Result<(PureState, f64)> {
    let dec = Decoupler::new(psi, split, reference)?;
    let rotated = dec.rotated(u)?;
    let d = dec.distance_of(&rotated)?;
    Ok((rotated, d))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecouplingReport {
    pub trials: usize,
    pub dim_a: usize,
    pub dim_r: usize,
    pub abar_dim: usize,
    pub ahat_dim: usize,
    pub purity_ar: f64,
    pub mean_sq_distance: f64,
    /// Standard error of `mean_sq_distance`.
    pub sem_sq_distance: f64,
    pub bound: f64,
    /// Trace distance per trial (not squared).
    pub per_trial: Vec<f64>,
    pub best_trial_index: usize,
    pub seed: u64,
}

impl DecouplingReport {
    /// `mean ≤ bound · slack + k · SEM`.
    pub fn within_bound(&self, slack: f64, k_sem: f64) -> bool {
        self.mean_sq_distance <= self.bound * slack + k_sem * self.sem_sq_distance
    }
}

fn distances(dec: &Decoupler, count: usize, seed: u64) -> Result<Vec<f64>> {
    let d = dec.dim_a();
    (0..count)
        .into_par_iter()
        .map(|t| {
            let u = haar_unitary(d, &mut stream_rng(seed, t as u64));
            dec.distance(&u)
        })
        .collect()
}

/// Mean squared decoupling distance over `trials` Haar unitaries. Trial `t`
/// draws from stream `t` of `seed`, so the result is independent of thread count.
pub fn monte_carlo_decoupling<S: AsRef<str>>(
    psi: &PureState,
    split: &SplitSpec,
    reference: &[S],
    trials: usize,
    seed: u64,
) -> Result<DecouplingReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let dec = Decoupler::new(psi, split, reference)?;
    let per_trial = distances(&dec, trials, seed)?;
    let n = trials as f64;
    let sq: Vec<f64> = per_trial.iter().map(|d| d * d).collect();
    let mean = sq.iter().sum::<f64>() / n;
    let var = if trials > 1 { sq.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let best_trial_index = per_trial
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(DecouplingReport {
        trials,
        dim_a: dec.dim_a(),
        dim_r: psi.layout().dim_of_all(&dec.reference)?,
        abar_dim: split.abar_dim,
        ahat_dim: split.ahat_dim,
        purity_ar: dec.purity_ar,
        mean_sq_distance: mean,
        sem_sq_distance: (var / n).sqrt(),
        bound: dec.bound,
        per_trial,
        best_trial_index,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoodUnitary {
    pub unitary: CMatrix,
    pub distance: f64,
    pub candidate_index: usize,
    pub bound: f64,
    /// `√(2 · bound)`: by Markov's inequality at least half of all Haar
    /// unitaries have a squared distance below `2 · bound`.
    pub threshold: f64,
    pub threshold_met: bool,
}

/// Best of `candidates` Haar unitaries (same streams as [`monte_carlo_decoupling`]).
pub fn select_good_unitary<S: AsRef<str>>(
    psi: &PureState,
    split: &SplitSpec,
    reference: &[S],
    candidates: usize,
    seed: u64,
) -> Result<GoodUnitary> {
    let dec = Decoupler::new(psi, split, reference)?;
    select_with(&dec, candidates, seed)
}

pub(crate) fn select_with(dec: &Decoupler, candidates: usize, seed: u64) -> Result<GoodUnitary> {
    if candidates == 0 {
        return Err(Error::InvalidParameter("candidates must be at least 1".into()));
    }
    let ds = distances(dec, candidates, seed)?;
    let (idx, &distance) = ds
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one candidate");
    let unitary = haar_unitary(dec.dim_a(), &mut stream_rng(seed, idx as u64));
    let threshold = (2.0 * dec.bound).sqrt();
    Ok(GoodUnitary {
        unitary,
        distance,
        candidate_index: idx,
        bound: dec.bound,
        threshold,
        threshold_met: distance <= threshold,
    })
}

/// Outcome of the small-block i.i.d. decoupling demonstration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IidDemoReport {
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub mutual_information_ar: f64,
    pub ahat_dim: usize,
    pub abar_dim: usize,
    /// `tr[Π ψ^{A⊗n}]` removed by the typical projection is `1 − projected_mass`.
    pub projected_mass: f64,
    pub report: DecouplingReport,
}

/// Largest block length the i.i.d. demonstration accepts.
pub const IID_DEMO_MAX_N: usize = 6;

/// Decoupling of `n` copies of `psi` after projecting `A^{⊗n}` onto its
/// typical subspace with `ε(n) = n^{-1/4}` and discarding
/// `|Â| ≥ 2^{n[½ I(A;R) + δ]}` dimensions (rounded up to a divisor of `|A|ⁿ`).
pub fn iid_decoupling_demo(
    psi: &PureState,
    system: &str,
    reference: &str,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<IidDemoReport> {
    if n == 0 || n > IID_DEMO_MAX_N {
        return Err(Error::Infeasible(format!("block length {n} outside 1..={IID_DEMO_MAX_N}")));
    }
    let layout = psi.layout();
    let dim_a = layout.dim_of(system)?;
    if layout.total_dim().checked_pow(n as u32).is_none_or(|d| d > 1 << 13) {
        return Err(Error::Infeasible("i.i.d. state exceeds 2^13 dimensions".into()));
    }

    let state: LabeledState = psi.clone().into();
    let info = mutual_information(&state, &[system], &[reference])?;
    let rho_a = psi.reduced(&[system])?;
    let eps = epsilon_schedule(n);
    let proj = typical_projector(&rho_a, n, eps)?;

    // n copies, relabelled, with the A copies merged into one factor.
    let relabel = |s: &PureState, k: usize| -> Result<PureState> {
        let mut out = s.clone();
        for l in s.layout().labels() {
            out = out.relabel(l, &format!("{l}#{k}"))?;
        }
        Ok(out)
    };
    let mut block = relabel(psi, 1)?;
    for k in 2..=n {
        block = block.tensor(&relabel(psi, k)?)?;
    }
    let a_copies: Vec<String> = (1..=n).map(|k| format!("{system}#{k}")).collect();
    let r_copies: Vec<String> = (1..=n).map(|k| format!("{reference}#{k}")).collect();
    let merged = format!("{system}^n");
    let block = block.group(&a_copies, &merged)?;
    let dim_an = dim_a.pow(n as u32);

    let pi = proj.to_matrix();
    let op = Isometry::from_parts(pi, Layout::single(merged.clone(), dim_an)?, Layout::single(merged.clone(), dim_an)?);
    let projected = block.apply(&op)?;
    let mass = projected.amplitudes().norm_squared();
    let (amps, l) = projected.into_parts();
    let projected = PureState::normalized(amps, l)?;

    let want = 2f64.powf(n as f64 * (0.5 * info + delta)).ceil() as usize;
    let ahat = (1..=dim_an).find(|d| dim_an % d == 0 && *d >= want.min(dim_an)).unwrap_or(dim_an);
    let split = SplitSpec::discarding(&merged, dim_an, ahat)?;
    let report = monte_carlo_decoupling(&projected, &split, &r_copies, trials, seed)?;
    Ok(IidDemoReport {
        n,
        eps,
        delta,
        mutual_information_ar: info,
        ahat_dim: ahat,
        abar_dim: dim_an / ahat,
        projected_mass: mass,
        report,
    })
}
