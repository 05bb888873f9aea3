//! Achievable rate regions: entanglement-assisted (father), unassisted,
//! classical Marton, multi-receiver and finite-block regularized versions,
//! plus a numerical sweep of the region boundary over input states.
//!
//! Input states use the labels `A1`, `A2`, … for Alice's reference systems,
//! `A'` for the channel input (`A'#k` for copy `k` of a block) and `D` for an
//! optional purifying system. Receivers keep the channel's labels.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{copy_label, BroadcastChannel, ClassicalBroadcast, INPUT_LABEL};
use crate::entropic::{entropy, mutual_information, shannon_entropy};
use crate::error::{Error, Result};
use crate::io::StateFile;
use crate::optim::NelderMead;
use crate::random::{random_pure_state, stream_rng};
use crate::tensor::{CVector, LabeledState, Layout, PureState, C64};

pub const D_LABEL: &str = "D";

/// Label of Alice's reference system for receiver `i` (1-based).
pub fn sender_label(i: usize) -> String {
    format!("A{i}")
}

/// `(Q₁ bound, Q₂ bound, sum bound)` before clamping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstraintTriple {
    pub q1: f64,
    pub q2: f64,
    pub sum: f64,
}

impl ConstraintTriple {
    pub fn scaled(&self, s: f64) -> Self {
        ConstraintTriple { q1: self.q1 * s, q2: self.q2 * s, sum: self.sum * s }
    }

    /// Vertices of `{0 ≤ Q₁ ≤ q1, 0 ≤ Q₂ ≤ q2, Q₁ + Q₂ ≤ sum}` with negative
    /// bounds clamped to zero, counter-clockwise from the origin.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let (a, b, c) = (self.q1.max(0.0), self.q2.max(0.0), self.sum.max(0.0));
        let xm = a.min(c);
        let ym = b.min(c);
        let cand = [[0.0, 0.0], [xm, 0.0], [xm, b.min(c - xm)], [a.min(c - ym), ym], [0.0, ym]];
        let mut out: Vec<[f64; 2]> = Vec::new();
        for p in cand {
            if out.last().is_none_or(|q| (q[0] - p[0]).abs() > 1e-15 || (q[1] - p[1]).abs() > 1e-15) {
                out.push(p);
            }
        }
        if out.len() > 1 && out.last() == out.first() {
            out.pop();
        }
        out
    }

    pub fn contains(&self, q: [f64; 2], tol: f64) -> bool {
        q[0] >= -tol
            && q[1] >= -tol
            && q[0] <= self.q1.max(0.0) + tol
            && q[1] <= self.q2.max(0.0) + tol
            && q[0] + q[1] <= self.sum.max(0.0) + tol
    }

    /// The vertex maximizing `w · Q`, with the constraints tight there.
    pub fn best_vertex(&self, w: [f64; 2]) -> RatePoint {
        let vs = self.vertices();
        let v = vs
            .iter()
            .copied()
            .max_by(|x, y| (w[0] * x[0] + w[1] * x[1]).total_cmp(&(w[0] * y[0] + w[1] * y[1])))
            .unwrap_or([0.0, 0.0]);
        let tight = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        let mut active = Vec::new();
        if tight(v[0], self.q1.max(0.0)) && self.q1 > 0.0 {
            active.push("Q1".to_string());
        }
        if tight(v[1], self.q2.max(0.0)) && self.q2 > 0.0 {
            active.push("Q2".to_string());
        }
        if tight(v[0] + v[1], self.sum.max(0.0)) && self.sum > 0.0 {
            active.push("sum".to_string());
        }
        RatePoint { rates: v.to_vec(), ent_rates: None, constraints_active: active }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub rates: Vec<f64>,
    pub ent_rates: Option<Vec<f64>>,
    pub constraints_active: Vec<String>,
}

fn pure(s: LabeledState) -> PureState {
    match s {
        LabeledState::Pure(p) => p,
        LabeledState::Mixed(_) => unreachable!("isometries keep states pure"),
    }
}

/// `U_N^{⊗n} |φ⟩`.
pub fn channel_output(phi: &PureState, channel: &BroadcastChannel, n: usize) -> Result<PureState> {
    Ok(pure(channel.apply(&LabeledState::Pure(phi.clone()), n)?))
}

fn two_receivers(channel: &BroadcastChannel) -> Result<(String, String)> {
    match channel.receivers() {
        [b1, b2] => Ok((b1.clone(), b2.clone())),
        r => Err(Error::InvalidParameter(format!("expected two receivers, channel has {}", r.len()))),
    }
}

/// Entropic quantities of `ψ = U_N φ` entering the two-receiver regions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FatherQuantities {
    pub i_a1_b1: f64,
    pub i_a2_b2: f64,
    pub i_a1_a2: f64,
    pub coh_a1_b1: f64,
    pub coh_a2_b2: f64,
}

fn father_quantities_of(psi: &PureState, b1: &[String], b2: &[String]) -> Result<FatherQuantities> {
    let s = LabeledState::Pure(psi.clone());
    let a1 = [sender_label(1)];
    let a2 = [sender_label(2)];
    let h_a1 = entropy(&s, &a1)?;
    let h_a2 = entropy(&s, &a2)?;
    let h_b1 = entropy(&s, b1)?;
    let h_b2 = entropy(&s, b2)?;
    let mut a1b1 = a1.to_vec();
    a1b1.extend_from_slice(b1);
    let mut a2b2 = a2.to_vec();
    a2b2.extend_from_slice(b2);
    let h_a1b1 = entropy(&s, &a1b1)?;
    let h_a2b2 = entropy(&s, &a2b2)?;
    let h_a1a2 = entropy(&s, &[a1[0].as_str(), a2[0].as_str()])?;
    Ok(FatherQuantities {
        i_a1_b1: h_a1 + h_b1 - h_a1b1,
        i_a2_b2: h_a2 + h_b2 - h_a2b2,
        i_a1_a2: h_a1 + h_a2 - h_a1a2,
        coh_a1_b1: h_b1 - h_a1b1,
        coh_a2_b2: h_b2 - h_a2b2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FatherRates {
    pub triple: ConstraintTriple,
    /// `(½I(A₁;B₁), ½[I(A₂;B₂) − I(A₁;A₂)])` and the mirrored point.
    pub corners: [[f64; 2]; 2],
    pub quantities: FatherQuantities,
}

impl FatherQuantities {
    pub fn assisted(&self) -> ConstraintTriple {
        ConstraintTriple {
            q1: 0.5 * self.i_a1_b1,
            q2: 0.5 * self.i_a2_b2,
            sum: 0.5 * (self.i_a1_b1 + self.i_a2_b2 - self.i_a1_a2),
        }
    }

    pub fn unassisted(&self) -> ConstraintTriple {
        ConstraintTriple {
            q1: self.coh_a1_b1,
            q2: self.coh_a2_b2,
            sum: self.coh_a1_b1 + self.coh_a2_b2 - 0.5 * self.i_a1_a2,
        }
    }
}

pub fn father_quantities(phi: &PureState, channel: &BroadcastChannel) -> Result<FatherQuantities> {
    let (b1, b2) = two_receivers(channel)?;
    let psi = channel_output(phi, channel, 1)?;
    father_quantities_of(&psi, &[b1], &[b2])
}

/// Entanglement-assisted region of `ψ = U_N φ` for `φ` on `A₁A₂A'D`.
pub fn father_rates(phi: &PureState, channel: &BroadcastChannel) -> Result<FatherRates> {
    let quantities = father_quantities(phi, channel)?;
    let triple = quantities.assisted();
    Ok(FatherRates {
        triple,
        corners: [[triple.q1, triple.sum - triple.q1], [triple.sum - triple.q2, triple.q2]],
        quantities,
    })
}

/// `(E₁, E₂) = (½I(A₁;A₂B₂DE), ½I(A₂;A₁B₁DE))`, i.e. each sender system
/// against everything its receiver does not hold.
pub fn entanglement_rates(phi: &PureState, channel: &BroadcastChannel) -> Result<(f64, f64)> {
    let (b1, b2) = two_receivers(channel)?;
    let psi = channel_output(phi, channel, 1)?;
    entanglement_of(&psi, &b1, &b2)
}

fn entanglement_of(psi: &PureState, b1: &str, b2: &str) -> Result<(f64, f64)> {
    let s = LabeledState::Pure(psi.clone());
    let rate = |a: &str, b: &str| -> Result<f64> {
        let rest: Vec<&str> = psi.layout().labels().filter(|l| *l != a && *l != b).collect();
        Ok(0.5 * mutual_information(&s, &[a], &rest)?)
    };
    Ok((rate(&sender_label(1), b1)?, rate(&sender_label(2), b2)?))
}

/// Unassisted region `Q̄ᵢ ≤ I(Aᵢ⟩Bᵢ)`, `Q̄₁ + Q̄₂ ≤ I(A₁⟩B₁) + I(A₂⟩B₂) − ½I(A₁;A₂)`.
pub fn unassisted_rates(phi: &PureState, channel: &BroadcastChannel) -> Result<ConstraintTriple> {
    Ok(father_quantities(phi, channel)?.unassisted())
}

fn check_pmf(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidDistribution(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// Auxiliary distribution for the Marton region: `p(u₁,u₂)` and `p(x|u₁,u₂)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartonInput {
    /// `p_u[u1][u2]`.
    pub p_u: Vec<Vec<f64>>,
    /// `p_x[u1][u2][x]`.
    pub p_x: Vec<Vec<Vec<f64>>>,
}

impl MartonInput {
    pub fn validate(&self, nx: usize) -> Result<(usize, usize)> {
        let n1 = self.p_u.len();
        let n2 = self.p_u.first().map_or(0, Vec::len);
        if n1 == 0 || n2 == 0 || self.p_u.iter().any(|r| r.len() != n2) {
            return Err(Error::InvalidDistribution("p(u1,u2) must be a non-empty rectangle".into()));
        }
        let flat: Vec<f64> = self.p_u.iter().flatten().copied().collect();
        check_pmf(&flat, "p(u1,u2)")?;
        if self.p_x.len() != n1 || self.p_x.iter().any(|r| r.len() != n2) {
            return Err(Error::InvalidDistribution("p(x|u1,u2) shape does not match p(u1,u2)".into()));
        }
        for row in &self.p_x {
            for px in row {
                if px.len() != nx {
                    return Err(Error::InvalidDistribution(format!("p(x|u1,u2) must have {nx} entries")));
                }
                check_pmf(px, "p(x|u1,u2)")?;
            }
        }
        Ok((n1, n2))
    }

    /// `p(u₁, u₂, x)` flattened as `[u1][u2][x]`.
    pub fn joint(&self) -> Vec<Vec<Vec<f64>>> {
        self.p_u
            .iter()
            .zip(&self.p_x)
            .map(|(pu, px)| pu.iter().zip(px).map(|(&p, cond)| cond.iter().map(|&c| p * c).collect()).collect())
            .collect()
    }
}

/// Marton triple `(I(U₁;Y₁), I(U₂;Y₂), I(U₁;Y₁) + I(U₂;Y₂) − I(U₁;U₂))` in bits.
pub fn marton_rates(channel: &ClassicalBroadcast, input: &MartonInput) -> Result<ConstraintTriple> {
    let (nx, ny1, ny2) = channel.dims();
    let (n1, n2) = input.validate(nx)?;
    let mut p_u1y1 = vec![vec![0.0; ny1]; n1];
    let mut p_u2y2 = vec![vec![0.0; ny2]; n2];
    for u1 in 0..n1 {
        for u2 in 0..n2 {
            for x in 0..nx {
                let p = input.p_u[u1][u2] * input.p_x[u1][u2][x];
                if p == 0.0 {
                    continue;
                }
                for y1 in 0..ny1 {
                    for y2 in 0..ny2 {
                        let q = p * channel.prob(x, y1, y2);
                        p_u1y1[u1][y1] += q;
                        p_u2y2[u2][y2] += q;
                    }
                }
            }
        }
    }
    let mi = |joint: &[Vec<f64>]| -> f64 {
        let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
        let ncol = joint.first().map_or(0, Vec::len);
        let cols: Vec<f64> = (0..ncol).map(|c| joint.iter().map(|r| r[c]).sum()).collect();
        let all: Vec<f64> = joint.iter().flatten().copied().collect();
        (shannon_entropy(&rows) + shannon_entropy(&cols) - shannon_entropy(&all)).max(0.0)
    };
    let r1 = mi(&p_u1y1);
    let r2 = mi(&p_u2y2);
    let i_u = mi(&input.p_u);
    Ok(ConstraintTriple { q1: r1, q2: r2, sum: r1 + r2 - i_u })
}

/// `½[Σ_{j∈K} I(A_j;B_j) − J(A_K)]` on `U_N φ` for 0-based receiver indices `subset`.
pub fn multiparty_rates(phi: &PureState, channel: &BroadcastChannel, subset: &[usize]) -> Result<f64> {
    let m = channel.receivers().len();
    if subset.is_empty() {
        return Err(Error::InvalidParameter("receiver subset must be nonempty".into()));
    }
    let mut seen = vec![false; m];
    for &j in subset {
        if j >= m || seen[j] {
            return Err(Error::InvalidParameter(format!("bad receiver index {j} for {m} receivers")));
        }
        seen[j] = true;
    }
    let psi = channel_output(phi, channel, 1)?;
    let s = LabeledState::Pure(psi);
    let mut total = 0.0;
    let senders: Vec<String> = subset.iter().map(|&j| sender_label(j + 1)).collect();
    for (&j, a) in subset.iter().zip(&senders) {
        total += mutual_information(&s, &[a.as_str()], &[channel.receivers()[j].as_str()])?;
    }
    let parts: Vec<[&str; 1]> = senders.iter().map(|a| [a.as_str()]).collect();
    let refs: Vec<&[&str]> = parts.iter().map(|p| &p[..]).collect();
    let j = crate::entropic::multiparty_correlation(&s, &refs)?;
    Ok(0.5 * (total - j))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Assisted,
    Unassisted,
}

/// Largest `n · log₂|A'|` accepted by [`regularized_rates`].
pub const REGULARIZED_QUBIT_CAP: f64 = 12.0;

/// Per-use triple on `U_N^{⊗n} φ` for `φ` on `A₁A₂(A')ⁿD`: the assisted
/// region scaled by `1/(2n)`, or the unassisted one scaled by `1/n`.
pub fn regularized_rates(phi: &PureState, channel: &BroadcastChannel, n: usize, mode: Mode) -> Result<ConstraintTriple> {
    if n == 0 {
        return Err(Error::InvalidParameter("block length must be at least 1".into()));
    }
    let qubits = n as f64 * (channel.input_dim() as f64).log2();
    if qubits > REGULARIZED_QUBIT_CAP + 1e-9 {
        return Err(Error::Infeasible(format!(
            "n·log2|A'| = {qubits:.2} exceeds the cap {REGULARIZED_QUBIT_CAP}"
        )));
    }
    let (b1, b2) = two_receivers(channel)?;
    let psi = channel_output(phi, channel, n)?;
    let block = |b: &str| -> Vec<String> {
        if n == 1 {
            vec![b.to_string()]
        } else {
            (1..=n).map(|k| copy_label(b, k)).collect()
        }
    };
    let q = father_quantities_of(&psi, &block(&b1), &block(&b2))?;
    Ok(match mode {
        Mode::Assisted => q.assisted(),
        Mode::Unassisted => q.unassisted(),
    }
    .scaled(1.0 / n as f64))
}

/// Convex hull (counter-clockwise, no collinear points) by the monotone chain.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 1e-12 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Every consecutive turn of `hull` is a left turn (within `tol`).
pub fn is_convex(hull: &[[f64; 2]], tol: f64) -> bool {
    let n = hull.len();
    if n < 3 {
        return true;
    }
    (0..n).all(|i| {
        let (o, a, b) = (hull[i], hull[(i + 1) % n], hull[(i + 2) % n]);
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]) >= -tol
    })
}

/// Whether `q` lies in the convex polygon `hull` (counter-clockwise).
pub fn hull_contains(hull: &[[f64; 2]], q: [f64; 2], tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => (hull[0][0] - q[0]).hypot(hull[0][1] - q[1]) <= tol,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let t = ((q[0] - a[0]) * (b[0] - a[0]) + (q[1] - a[1]) * (b[1] - a[1])) / (len * len);
            let t = t.clamp(0.0, 1.0);
            (a[0] + t * (b[0] - a[0]) - q[0]).hypot(a[1] + t * (b[1] - a[1]) - q[1]) <= tol
        }
        n => (0..n).all(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            ((b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])) / len >= -tol
        }),
    }
}

/// One weight direction of a boundary sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub weights: [f64; 2],
    pub point: RatePoint,
    pub triple: ConstraintTriple,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionBoundary {
    pub points: Vec<BoundaryPoint>,
    /// Counter-clockwise hull of all region vertices found (time-sharing).
    pub hull: Vec<[f64; 2]>,
    /// The maximizing input per weight, when the region comes from quantum inputs.
    pub provenance: Vec<StateFile>,
}

impl RegionBoundary {
    fn from_points(points: Vec<BoundaryPoint>, provenance: Vec<StateFile>) -> Self {
        let mut all = vec![[0.0, 0.0]];
        for p in &points {
            all.extend(p.triple.vertices());
        }
        RegionBoundary { hull: convex_hull(&all), points, provenance }
    }
}

/// Weight directions `(cos θ, sin θ)` spread over the first quadrant.
pub fn weight_sweep(count: usize) -> Vec<[f64; 2]> {
    match count {
        0 => Vec::new(),
        1 => vec![[std::f64::consts::FRAC_1_SQRT_2; 2]],
        _ => (0..count)
            .map(|k| {
                let t = std::f64::consts::FRAC_PI_2 * k as f64 / (count - 1) as f64;
                [t.cos(), t.sin()]
            })
            .collect(),
    }
}

fn weighted(triple: &ConstraintTriple, w: [f64; 2]) -> f64 {
    triple.vertices().iter().map(|v| w[0] * v[0] + w[1] * v[1]).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionOptions {
    pub mode: Mode,
    pub sweep: usize,
    pub restarts: usize,
    pub seed: u64,
    pub a1_dim: usize,
    pub a2_dim: usize,
    /// `None` means `|D| = |A'|`.
    pub d_dim: Option<usize>,
    pub optimizer: NelderMead,
}

impl Default for RegionOptions {
    fn default() -> Self {
        RegionOptions {
            mode: Mode::Assisted,
            sweep: 64,
            restarts: 8,
            seed: 0,
            a1_dim: 2,
            a2_dim: 2,
            d_dim: None,
            optimizer: NelderMead { step: 0.2, diameter_tol: 1e-7, max_iterations: 1500 },
        }
    }
}

/// Largest `|A₁A₂A'D|` the region optimizer accepts.
pub const MAX_REGION_INPUT_DIM: usize = 256;

fn state_from_params(x: &[f64], layout: &Layout) -> Option<PureState> {
    let v = CVector::from_iterator(x.len() / 2, x.chunks(2).map(|c| C64::new(c[0], c[1])));
    PureState::normalized(v, layout.clone()).ok()
}

fn params_of(psi: &PureState) -> Vec<f64> {
    psi.amplitudes().iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Inputs built from standard pairs between `A₁`, `A₂` and tensor factors of
/// `A'` (in both orders), optionally purifying the rest of `A'` with `D`.
fn structured_seeds(layout: &Layout) -> Vec<PureState> {
    let dims = layout.dims();
    let (a1, a2, din, dd) = (dims[0], dims[1], dims[2], dims[3]);
    let mut out = Vec::new();
    for k1 in (1..=a1.min(din)).filter(|k| din % k == 0) {
        for k2 in (1..=a2.min(din / k1)).filter(|k| (din / k1) % k == 0) {
            let k3 = din / (k1 * k2);
            for first_is_a1 in [true, false] {
                for purify in [false, true] {
                    if purify && (k3 == 1 || dd < k3) {
                        continue;
                    }
                    let mut v = CVector::zeros(layout.total_dim());
                    let spread = if purify { k3 } else { 1 };
                    let amp = C64::new(1.0 / ((k1 * k2 * spread) as f64).sqrt(), 0.0);
                    for i in 0..k1 {
                        for j in 0..k2 {
                            for l in 0..spread {
                                let x = if first_is_a1 { (i * k2 + j) * k3 + l } else { (j * k1 + i) * k3 + l };
                                let idx = ((i * a2 + j) * din + x) * dd + l;
                                v[idx] = amp;
                            }
                        }
                    }
                    if let Ok(s) = PureState::new(v, layout.clone()) {
                        out.push(s);
                    }
                }
            }
        }
    }
    out
}

/// Sweeps weight directions and maximizes the weighted rate over pure inputs
/// on `A₁A₂A'D`, starting from structured seeds and random restarts and
/// refining by Nelder–Mead.
pub fn optimize_region(channel: &BroadcastChannel, opts: &RegionOptions) -> Result<RegionBoundary> {
    two_receivers(channel)?;
    let din = channel.input_dim();
    let dd = opts.d_dim.unwrap_or(din);
    let layout = Layout::new([
        (sender_label(1), opts.a1_dim),
        (sender_label(2), opts.a2_dim),
        (INPUT_LABEL.to_string(), din),
        (D_LABEL.to_string(), dd),
    ])?;
    if layout.dims().iter().try_fold(1usize, |a, &d| a.checked_mul(d)).is_none_or(|t| t > MAX_REGION_INPUT_DIM) {
        return Err(Error::Infeasible(format!("input space larger than {MAX_REGION_INPUT_DIM} dimensions")));
    }
    if opts.sweep == 0 {
        return Err(Error::InvalidParameter("sweep must be at least 1".into()));
    }
    let triple_of = |psi: &PureState| -> Result<ConstraintTriple> {
        let q = father_quantities(psi, channel)?;
        Ok(match opts.mode {
            Mode::Assisted => q.assisted(),
            Mode::Unassisted => q.unassisted(),
        })
    };
    let seeds = structured_seeds(&layout);
    let seed_triples: Vec<ConstraintTriple> = seeds.iter().map(&triple_of).collect::<Result<_>>()?;
    let weights = weight_sweep(opts.sweep);

    let results: Vec<(BoundaryPoint, StateFile)> = weights
        .par_iter()
        .enumerate()
        .map(|(wi, &w)| -> Result<(BoundaryPoint, StateFile)> {
            let objective = |x: &[f64]| -> f64 {
                match state_from_params(x, &layout).map(|s| triple_of(&s)) {
                    Some(Ok(t)) => -weighted(&t, w),
                    _ => f64::INFINITY,
                }
            };
            let mut starts: Vec<PureState> = Vec::new();
            if let Some((best, _)) = seeds
                .iter()
                .zip(&seed_triples)
                .max_by(|a, b| weighted(a.1, w).total_cmp(&weighted(b.1, w)))
            {
                starts.push(best.clone());
            }
            for r in 0..opts.restarts {
                let mut rng = stream_rng(opts.seed, (wi as u64) << 32 | r as u64);
                starts.push(random_pure_state(layout.clone(), &mut rng)?);
            }
            let mut best: Option<(f64, Vec<f64>)> = None;
            let mut iterations = 0;
            for s in &starts {
                let m = opts.optimizer.minimize(objective, &params_of(s));
                iterations += m.iterations;
                if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
                    best = Some((m.value, m.x));
                }
            }
            let (_, x) = best.ok_or_else(|| Error::InvalidParameter("no starting points".into()))?;
            let psi = state_from_params(&x, &layout)
                .ok_or_else(|| Error::InvalidParameter("optimizer left the state space".into()))?;
            let triple = triple_of(&psi)?;
            let mut point = triple.best_vertex(w);
            let (b1, b2) = two_receivers(channel)?;
            let (e1, e2) = entanglement_of(&channel_output(&psi, channel, 1)?, &b1, &b2)?;
            point.ent_rates = Some(vec![e1, e2]);
            Ok((
                BoundaryPoint { weights: w, objective: weighted(&triple, w), point, triple, iterations },
                StateFile::from_state(&psi),
            ))
        })
        .collect::<Result<_>>()?;
    let (points, provenance) = results.into_iter().unzip();
    Ok(RegionBoundary::from_points(points, provenance))
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn marton_from_params(x: &[f64], n1: usize, n2: usize, nx: usize) -> MartonInput {
    let nu = n1 * n2;
    let pu = softmax(&x[..nu]);
    let p_u = (0..n1).map(|a| pu[a * n2..(a + 1) * n2].to_vec()).collect();
    let p_x = (0..n1)
        .map(|a| {
            (0..n2)
                .map(|b| {
                    let off = nu + (a * n2 + b) * nx;
                    softmax(&x[off..off + nx])
                })
                .collect()
        })
        .collect();
    MartonInput { p_u, p_x }
}

const DETERMINISTIC_LOGIT: f64 = 8.0;

fn deterministic_input(map: &[usize], n1: usize, n2: usize, nx: usize) -> MartonInput {
    let p = 1.0 / (n1 * n2) as f64;
    MartonInput {
        p_u: vec![vec![p; n2]; n1],
        p_x: (0..n1)
            .map(|a| {
                (0..n2)
                    .map(|b| {
                        let mut v = vec![0.0; nx];
                        v[map[a * n2 + b]] = 1.0;
                        v
                    })
                    .collect()
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MartonOptions {
    pub sweep: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Auxiliary alphabet sizes; `None` means `|X|`.
    pub u_dims: Option<(usize, usize)>,
    pub optimizer: NelderMead,
}

impl Default for MartonOptions {
    fn default() -> Self {
        MartonOptions {
            sweep: 32,
            restarts: 4,
            seed: 0,
            u_dims: None,
            optimizer: NelderMead { step: 0.5, diameter_tol: 1e-7, max_iterations: 1500 },
        }
    }
}

/// Largest number of deterministic maps `x = f(u₁,u₂)` enumerated exhaustively.
pub const MAX_MARTON_MAPS: usize = 20_000;

/// Marton region boundary: exhaustive grid over deterministic encoders with
/// uniform auxiliaries, then Nelder–Mead over `p(u₁,u₂)` and `p(x|u₁,u₂)`.
pub fn marton_region(channel: &ClassicalBroadcast, opts: &MartonOptions) -> Result<RegionBoundary> {
    let (nx, _, _) = channel.dims();
    let (n1, n2) = opts.u_dims.unwrap_or((nx, nx));
    if n1 == 0 || n2 == 0 || n1 * n2 > 64 {
        return Err(Error::Infeasible("auxiliary alphabets must satisfy 1 ≤ |U1||U2| ≤ 64".into()));
    }
    if opts.sweep == 0 {
        return Err(Error::InvalidParameter("sweep must be at least 1".into()));
    }
    let nu = n1 * n2;
    let maps = (nx as f64).powi(nu as i32);
    let mut grid: Vec<(Vec<usize>, ConstraintTriple)> = Vec::new();
    if maps <= MAX_MARTON_MAPS as f64 {
        let total = maps as usize;
        for code in 0..total {
            let mut map = Vec::with_capacity(nu);
            let mut c = code;
            for _ in 0..nu {
                map.push(c % nx);
                c /= nx;
            }
            let t = marton_rates(channel, &deterministic_input(&map, n1, n2, nx))?;
            grid.push((map, t));
        }
    }
    let weights = weight_sweep(opts.sweep);
    let dim = nu + nu * nx;
    let points: Vec<BoundaryPoint> = weights
        .par_iter()
        .enumerate()
        .map(|(wi, &w)| -> Result<BoundaryPoint> {
            let objective = |x: &[f64]| -> f64 {
                match marton_rates(channel, &marton_from_params(x, n1, n2, nx)) {
                    Ok(t) => -weighted(&t, w),
                    Err(_) => f64::INFINITY,
                }
            };
            let mut best_triple = ConstraintTriple { q1: 0.0, q2: 0.0, sum: 0.0 };
            let mut best_val = 0.0;
            let mut starts: Vec<Vec<f64>> = Vec::new();
            if let Some((map, t)) = grid.iter().max_by(|a, b| weighted(&a.1, w).total_cmp(&weighted(&b.1, w))) {
                best_triple = *t;
                best_val = weighted(t, w);
                let mut x = vec![0.0; dim];
                for (k, &v) in map.iter().enumerate() {
                    x[nu + k * nx + v] = DETERMINISTIC_LOGIT;
                }
                starts.push(x);
            }
            for r in 0..opts.restarts {
                let mut rng = stream_rng(opts.seed, (wi as u64) << 32 | r as u64);
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                starts.push(x);
            }
            let mut iterations = 0;
            for s in &starts {
                let m = opts.optimizer.minimize(objective, s);
                iterations += m.iterations;
                if -m.value > best_val {
                    best_val = -m.value;
                    best_triple = marton_rates(channel, &marton_from_params(&m.x, n1, n2, nx))?;
                }
            }
            Ok(BoundaryPoint {
                weights: w,
                point: best_triple.best_vertex(w),
                triple: best_triple,
                objective: weighted(&best_triple, w),
                iterations,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RegionBoundary::from_points(points, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertices_of_clamped_region() {
        let t = ConstraintTriple { q1: 1.0, q2: 1.0, sum: 1.5 };
        assert_eq!(t.vertices(), vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 1.0]]);
        let t = ConstraintTriple { q1: 1.0, q2: -0.5, sum: 3.0 };
        assert_eq!(t.vertices(), vec![[0.0, 0.0], [1.0, 0.0]]);
        let t = ConstraintTriple { q1: -1.0, q2: -1.0, sum: -1.0 };
        assert_eq!(t.vertices(), vec![[0.0, 0.0]]);
    }

    #[test]
    fn hull_of_square_with_interior() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0]];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!(is_convex(&h, 1e-12));
        assert!(hull_contains(&h, [0.5, 0.5], 1e-12));
        assert!(!hull_contains(&h, [1.5, 0.5], 1e-12));
    }

    #[test]
    fn weights_cover_axes() {
        let w = weight_sweep(3);
        assert_eq!(w[0], [1.0, 0.0]);
        assert!(w[2][0].abs() < 1e-15 && w[2][1] == 1.0);
    }

    #[test]
    fn marton_rejects_bad_pmf() {
        let ch = ClassicalBroadcast::new(vec![vec![vec![1.0]], vec![vec![1.0]]]).unwrap();
        let bad = MartonInput { p_u: vec![vec![0.7]], p_x: vec![vec![vec![0.5, 0.5]]] };
        assert!(marton_rates(&ch, &bad).is_err());
    }
}
