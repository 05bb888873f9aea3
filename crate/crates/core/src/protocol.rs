//! One-shot broadcast father protocol.
//!
//! Alice holds `A₁Ã₁A₂Ã₂` of
//! `|φ⟩ = |Φ⟩^{R₁A₁} |Φ⟩^{Ã₁B̃₁} |Φ⟩^{R₂A₂} |Φ⟩^{Ã₂B̃₂}`, applies `U₁ᵀ ⊗ U₂ᵀ`
//! and the encoder `W: A₁Ã₁A₂Ã₂ → A'Â`, and sends `A'` through the channel.
//! Bob `i` holds `B_i B̃_i` and decodes with `V_i: B_iB̃_i → B̄_iB̂_i`; the
//! goal is `Φ^{R_iB̄_i}` for both receivers.

use serde::{Deserialize, Serialize};

use crate::channels::{BroadcastChannel, ChannelFile, INPUT_LABEL};
use crate::error::{Error, Result};
use crate::fqsw::{select_with, Decoupler, SplitSpec};
use crate::io::{matrix_from_pairs, matrix_to_pairs, StateFile};
use crate::tensor::{
    hermitian_eigen, max_entangled, offsets, uhlmann_isometry, CMatrix, CVector, Isometry, LabeledState, Layout,
    PureState, WireSpec, C64,
};

pub const R1: &str = "R1";
pub const A1: &str = "A1";
pub const AT1: &str = "At1";
pub const BT1: &str = "Bt1";
pub const R2: &str = "R2";
pub const A2: &str = "A2";
pub const AT2: &str = "At2";
pub const BT2: &str = "Bt2";
pub const AHAT: &str = "Ahat";

/// Per-receiver labels `(R_i, A_i, Ã_i, B̃_i, B̄_i, B̂_i)`.
fn receiver_labels(i: usize) -> [&'static str; 6] {
    match i {
        0 => [R1, A1, AT1, BT1, "Bbar1", "Bhat1"],
        _ => [R2, A2, AT2, BT2, "Bbar2", "Bhat2"],
    }
}

/// Message and entanglement dimensions `|A₁|, |Ã₁|, |A₂|, |Ã₂|`.
/// `|R_i| = |A_i|` and `|B̃_i| = |Ã_i|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDims {
    pub a1: usize,
    pub at1: usize,
    pub a2: usize,
    pub at2: usize,
}

impl ProtocolDims {
    fn message_layout(&self) -> Result<Layout> {
        Layout::new([(A1, self.a1), (AT1, self.at1), (A2, self.a2), (AT2, self.at2)])
    }
}

/// `|Φ⟩^{R₁A₁} |Φ⟩^{Ã₁B̃₁} |Φ⟩^{R₂A₂} |Φ⟩^{Ã₂B̃₂}`, factors ordered
/// `R₁ A₁ Ã₁ B̃₁ R₂ A₂ Ã₂ B̃₂`.
pub fn prepare_phi(dims: &ProtocolDims) -> Result<PureState> {
    max_entangled(dims.a1, (R1, A1))?
        .tensor(&max_entangled(dims.at1, (AT1, BT1))?)?
        .tensor(&max_entangled(dims.a2, (R2, A2))?)?
        .tensor(&max_entangled(dims.at2, (AT2, BT2))?)
}

/// Applies `Uᵀ` to `partners`, which must be maximally entangled (in the
/// standard basis) with the factors `u` acts on. The result equals applying
/// `u` itself on its own factors.
pub fn transpose_trick(u: &Isometry, phi: &PureState, partners: &[&str]) -> Result<PureState> {
    if !u.is_unitary() {
        return Err(Error::InvalidParameter("transpose trick needs a unitary".into()));
    }
    let layout = phi.layout();
    let own: Vec<&str> = u.input().labels().collect();
    let own_pos = layout.positions(&own)?;
    let partner_pos = layout.positions(partners)?;
    for (a, b) in own_pos.iter().zip(&partner_pos) {
        if own_pos.contains(b) || layout.factors()[*a].dim != layout.factors()[*b].dim {
            return Err(Error::DimensionMismatch("partner factors must mirror the unitary's factors".into()));
        }
    }
    if own_pos.len() != partner_pos.len() {
        return Err(Error::DimensionMismatch("partner factors must mirror the unitary's factors".into()));
    }
    check_maximally_entangled(phi, &own_pos, &partner_pos)?;
    let partner_layout = layout.select(&partner_pos);
    let ut = Isometry::unitary(u.matrix().transpose(), partner_layout)?;
    phi.apply(&ut)
}

/// `ψ = (1/√d) Σ_i |i⟩|i⟩ ⊗ |rest⟩` across `own` and `partners`.
fn check_maximally_entangled(phi: &PureState, own: &[usize], partners: &[usize]) -> Result<()> {
    let layout = phi.layout();
    let mut both = own.to_vec();
    both.extend_from_slice(partners);
    let rest = layout.complement(&both);
    let oo = offsets(layout, own);
    let po = offsets(layout, partners);
    let ro = offsets(layout, &rest);
    let d = oo.len();
    let amps = phi.amplitudes();
    let mut err = 0.0f64;
    for &t in &ro {
        let diag = amps[oo[0] + po[0] + t];
        for i in 0..d {
            for j in 0..d {
                let z = amps[oo[i] + po[j] + t];
                let expect = if i == j { diag } else { C64::new(0.0, 0.0) };
                err = err.max((z - expect).norm());
            }
        }
    }
    if err > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "state is not maximally entangled across the transposed cut (deviation {err:.3e})"
        )));
    }
    Ok(())
}

/// Lemma combining two decoupling errors: `2ε₁ + ε₂`.
pub fn combine_distances(eps1: f64, eps2: f64) -> f64 {
    2.0 * eps1 + eps2
}

/// Uhlmann decoder for receiver `i` (0-based) holding `held` in the pure
/// state `psi`. The target is `Φ^{R_i B̄_i}` times a purification of the
/// marginal on everything outside `R_i` and `held`.
pub fn build_decoder(psi: &PureState, i: usize, held: &[&str]) -> Result<Isometry> {
    let [r, _, _, _, bbar, bhat] = receiver_labels(i);
    let layout = psi.layout();
    let dim_r = layout.dim_of(r)?;
    let held_dim = layout.dim_of_all(held)?;
    if held_dim < dim_r {
        return Err(Error::Infeasible(format!(
            "receiver {} holds dimension {held_dim}, cannot host |R| = {dim_r}",
            i + 1
        )));
    }
    let mut excluded = vec![r];
    excluded.extend_from_slice(held);
    let rest: Vec<String> = layout
        .labels()
        .filter(|l| !excluded.contains(l))
        .map(String::from)
        .collect();

    // Purification of the complement's marginal into B̂.
    let (rest_state, rank_vals, rank_vecs) = if rest.is_empty() {
        (Layout::empty(), vec![1.0], CMatrix::from_element(1, 1, C64::new(1.0, 0.0)))
    } else {
        let rho = psi.reduced(&rest)?;
        let (vals, vecs) = hermitian_eigen(rho.matrix());
        (rho.layout().clone(), vals, vecs)
    };
    let keep: Vec<usize> = (0..rank_vals.len()).filter(|&k| rank_vals[k] > 1e-14).collect();
    let rank = keep.len().max(1);
    let hat_dim = rank.max(held_dim.div_ceil(dim_r));
    let drest = rest_state.total_dim();
    let mut pur = CVector::zeros(drest * hat_dim);
    for (slot, &k) in keep.iter().enumerate() {
        let s = rank_vals[k].sqrt();
        for a in 0..drest {
            pur[a * hat_dim + slot] = rank_vecs[(a, k)] * s;
        }
    }
    let mut pur_layout = rest_state.clone();
    pur_layout.push(bhat, hat_dim)?;
    let pur = PureState::normalized(pur, pur_layout)?;
    let target = max_entangled(dim_r, (r, bbar))?.tensor(&pur)?;

    let mut shared: Vec<&str> = vec![r];
    shared.extend(rest.iter().map(String::as_str));
    // Present `held` in the requested order so the decoder's input layout is predictable.
    let mut order: Vec<&str> = shared.clone();
    order.extend_from_slice(held);
    let actual = psi.permute(&order)?;
    uhlmann_isometry(&target, &actual, &shared)
}

/// `⟨Φ…|χ^{pairs}|Φ…⟩` for the product of standard pairs `pairs`.
fn pair_fidelity(chi: &PureState, pairs: &[(&str, &str)]) -> Result<f64> {
    let mut labels = Vec::new();
    for (a, b) in pairs {
        labels.push(*a);
        labels.push(*b);
    }
    let layout = chi.layout();
    let pos = layout.positions(&labels)?;
    let m = chi.bipartite_matrix(&pos);
    let sub = layout.select(&pos);
    let mut target = PureState::scalar();
    for (a, b) in pairs {
        target = target.tensor(&max_entangled(sub.dim_of(a)?, (a, b))?)?;
    }
    // ‖(⟨Φ| ⊗ I)|χ⟩‖².
    let v = target.amplitudes().adjoint() * &m;
    Ok(v.iter().map(|z| z.norm_sqr()).sum::<f64>().clamp(0.0, 1.0))
}

fn fidelity_distance(f: f64) -> f64 {
    2.0 * (1.0 - f).max(0.0).sqrt()
}

/// How `W: A₁Ã₁A₂Ã₂ → A'Â` is given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderSpec {
    /// All message factors, in order, embedded into `A'`; `Â` trivial.
    #[default]
    Identity,
    /// Factor regrouping. Wires must be labelled `A'` and optionally `Ahat`;
    /// unmentioned 1-dimensional inputs may be omitted.
    Wiring { wires: Vec<WireFile> },
    /// Explicit matrix with rows indexed by `A' ⊗ Â`.
    Matrix { ahat_dim: usize, matrix: Vec<Vec<[f64; 2]>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireFile {
    pub label: String,
    pub from: Vec<String>,
    #[serde(default)]
    pub dim: Option<usize>,
}

fn default_candidates() -> usize {
    16
}

/// On-disk one-shot configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneShotFile {
    pub channel: ChannelFile,
    pub dims: ProtocolDims,
    #[serde(default)]
    pub encoder: EncoderSpec,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Largest `|R₁B̃₁R₂B̃₂| · |A'Â| · |B₁B₂E| / |A'|` handled by a run.
pub const MAX_PROTOCOL_DIM: usize = 1 << 13;

#[derive(Clone, Debug)]
pub struct OneShotConfig {
    pub channel: BroadcastChannel,
    pub dims: ProtocolDims,
    pub encoder: Isometry,
    pub candidates: usize,
    pub seed: u64,
}

impl OneShotConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: OneShotFile = serde_json::from_str(s)?;
        file.build()
    }
}

impl OneShotFile {
    pub fn build(&self) -> Result<OneShotConfig> {
        let channel = self.channel.build()?;
        if channel.receivers().len() != 2 {
            return Err(Error::InvalidParameter(format!(
                "the one-shot protocol needs exactly two receivers, channel has {}",
                channel.receivers().len()
            )));
        }
        let d = self.dims;
        let msg_dim = [d.a1, d.at1, d.a2, d.at2]
            .iter()
            .try_fold(1usize, |acc, &x| {
                if x == 0 {
                    None
                } else {
                    acc.checked_mul(x)
                }
            })
            .ok_or_else(|| Error::InvalidParameter("message dimensions must be positive".into()))?;
        if msg_dim > MAX_PROTOCOL_DIM {
            return Err(Error::Infeasible(format!("message space of dimension {msg_dim} is too large")));
        }
        let input = d.message_layout()?;
        let din = channel.input_dim();
        let encoder = match &self.encoder {
            EncoderSpec::Identity => {
                if msg_dim > din {
                    return Err(Error::Infeasible(format!(
                        "identity encoder needs |A'| ≥ {msg_dim}, channel input has {din}"
                    )));
                }
                let wires = [
                    WireSpec::new(INPUT_LABEL, [A1, AT1, A2, AT2]).padded(din),
                    WireSpec::new(AHAT, Vec::<String>::new()),
                ];
                Isometry::wiring(&input, &wires)?
            }
            EncoderSpec::Wiring { wires } => encoder_from_wires(&input, wires, din)?,
            EncoderSpec::Matrix { ahat_dim, matrix } => {
                let out_dim = din
                    .checked_mul(*ahat_dim)
                    .filter(|&x| x > 0 && x <= MAX_PROTOCOL_DIM)
                    .ok_or_else(|| Error::Infeasible("encoder output dimension out of range".into()))?;
                let m = matrix_from_pairs(matrix)?;
                let output = Layout::new([(INPUT_LABEL, din), (AHAT, *ahat_dim)])?;
                if m.nrows() != out_dim || m.ncols() != msg_dim {
                    return Err(Error::DimensionMismatch(format!(
                        "encoder matrix is {}x{}, expected {out_dim}x{msg_dim}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                Isometry::new(m, input, output)?
            }
        };
        let total = encoder
            .output()
            .total_dim()
            .checked_mul(msg_dim)
            .and_then(|x| x.checked_mul(channel.isometry().output().total_dim() / din.max(1)));
        if total.is_none_or(|t| t > MAX_PROTOCOL_DIM) {
            return Err(Error::Infeasible("protocol state exceeds the supported dimension".into()));
        }
        if self.candidates == 0 || self.candidates > 4096 {
            return Err(Error::InvalidParameter("candidates must be in 1..=4096".into()));
        }
        Ok(OneShotConfig {
            channel,
            dims: d,
            encoder,
            candidates: self.candidates,
            seed: self.seed,
        })
    }
}

fn encoder_from_wires(input: &Layout, wires: &[WireFile], din: usize) -> Result<Isometry> {
    let mut specs: Vec<WireSpec> = wires
        .iter()
        .map(|w| WireSpec { label: w.label.clone(), from: w.from.clone(), dim: w.dim })
        .collect();
    for w in &specs {
        if w.label != INPUT_LABEL && w.label != AHAT {
            return Err(Error::InvalidParameter(format!("encoder wire `{}` must be `{INPUT_LABEL}` or `{AHAT}`", w.label)));
        }
    }
    let a_idx = specs
        .iter()
        .position(|w| w.label == INPUT_LABEL)
        .ok_or_else(|| Error::InvalidParameter(format!("encoder has no `{INPUT_LABEL}` wire")))?;
    // Trivial message factors may be left out.
    for f in input.factors() {
        if f.dim == 1 && !specs.iter().any(|w| w.from.contains(&f.label)) {
            specs[a_idx].from.push(f.label.clone());
        }
    }
    if !specs.iter().any(|w| w.label == AHAT) {
        specs.push(WireSpec::new(AHAT, Vec::<String>::new()));
    }
    let ahat = specs.iter().position(|w| w.label == AHAT).unwrap_or(0);
    if ahat < a_idx {
        specs.swap(ahat, a_idx);
    }
    let w = Isometry::wiring(input, &specs)?;
    let got = w.output().dim_of(INPUT_LABEL)?;
    if got != din {
        return Err(Error::DimensionMismatch(format!(
            "encoder produces |A'| = {got}, channel input has dimension {din}"
        )));
    }
    Ok(w)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReceiverReport {
    /// `‖σ^{R_i,rest} − I/|R_i| ⊗ ψ^{rest}‖₁` for the selected unitary.
    pub decoupling_distance: f64,
    /// Decoupling inequality right-hand side for this receiver.
    pub bound: f64,
    pub purity: f64,
    pub candidate_index: usize,
    /// `decoupling_distance² ≤ bound`, which makes `lhs ≤ 2 bound^{1/4}`.
    pub threshold_met: bool,
    pub unitary: Vec<Vec<[f64; 2]>>,
    pub decoder: Vec<Vec<[f64; 2]>>,
    pub decoder_input: Vec<String>,
    pub decoder_output: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolReport {
    pub lhs_total: f64,
    pub lhs_bob1: f64,
    pub lhs_bob2: f64,
    pub rhs_term1: f64,
    pub rhs_term2: f64,
    pub combined_bound: f64,
    pub bounds_met: bool,
    pub receivers: [ReceiverReport; 2],
    pub final_state: StateFile,
}

fn layout_labels(l: &Layout) -> Vec<String> {
    l.labels().map(String::from).collect()
}

/// Selects the decoupling unitary for receiver `i` on the post-channel state `psi`.
fn select_unitary(psi: &PureState, i: usize, receiver: &str, candidates: usize, seed: u64) -> Result<(Decoupler, crate::fqsw::GoodUnitary)> {
    let [r, _, _, bt, _, _] = receiver_labels(i);
    let dim_r = psi.layout().dim_of(r)?;
    let dim_bt = psi.layout().dim_of(bt)?;
    let merged = format!("{r}{bt}");
    let grouped = psi.group(&[r, bt], &merged)?;
    let reference: Vec<String> = grouped
        .layout()
        .labels()
        .filter(|l| *l != merged && *l != receiver)
        .map(String::from)
        .collect();
    let split = SplitSpec::new(&merged, dim_r, dim_bt).with_labels(r, bt);
    let dec = Decoupler::new(&grouped, &split, &reference)?;
    let good = select_with(&dec, candidates, seed)?;
    Ok((dec, good))
}

fn sub_seed(seed: u64, i: u64) -> u64 {
    seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn run_one_shot(cfg: &OneShotConfig) -> Result<ProtocolReport> {
    let phi = prepare_phi(&cfg.dims)?;
    let send = |state: &PureState| -> Result<PureState> {
        let encoded = state.apply(&cfg.encoder)?;
        match cfg.channel.apply(&LabeledState::Pure(encoded), 1)? {
            LabeledState::Pure(p) => Ok(p),
            LabeledState::Mixed(_) => unreachable!("isometries keep states pure"),
        }
    };
    let psi = send(&phi)?;
    let receivers: Vec<String> = cfg.channel.receivers().to_vec();

    let mut selections = Vec::new();
    for i in 0..2 {
        selections.push(select_unitary(&psi, i, &receivers[i], cfg.candidates, sub_seed(cfg.seed, i as u64))?);
    }

    // Uᵢ acts on R_iB̃_i; Alice applies Uᵢᵀ to A_iÃ_i instead.
    let mut shifted = phi.clone();
    for (i, (_, good)) in selections.iter().enumerate() {
        let [r, a, at, bt, _, _] = receiver_labels(i);
        let own = Layout::new([(r, shifted.layout().dim_of(r)?), (bt, shifted.layout().dim_of(bt)?)])?;
        let u = Isometry::unitary(good.unitary.clone(), own)?;
        shifted = transpose_trick(&u, &shifted, &[a, at])?;
    }
    let mut chi = send(&shifted)?;

    let mut decoders = Vec::new();
    for (i, rx) in receivers.iter().enumerate() {
        let [_, _, _, bt, _, _] = receiver_labels(i);
        let v = build_decoder(&chi, i, &[rx.as_str(), bt])?;
        chi = chi.apply(&v)?;
        decoders.push(v);
    }

    let f1 = pair_fidelity(&chi, &[(R1, "Bbar1")])?;
    let f2 = pair_fidelity(&chi, &[(R2, "Bbar2")])?;
    let ft = pair_fidelity(&chi, &[(R1, "Bbar1"), (R2, "Bbar2")])?;

    let reports: Vec<ReceiverReport> = selections
        .iter()
        .zip(&decoders)
        .map(|((dec, good), v)| ReceiverReport {
            decoupling_distance: good.distance,
            bound: dec.bound(),
            purity: dec.purity_ar(),
            candidate_index: good.candidate_index,
            threshold_met: good.distance * good.distance <= dec.bound(),
            unitary: matrix_to_pairs(&good.unitary),
            decoder: matrix_to_pairs(v.matrix()),
            decoder_input: layout_labels(v.input()),
            decoder_output: layout_labels(v.output()),
        })
        .collect();
    let rhs1 = 2.0 * reports[0].bound.max(0.0).powf(0.25);
    let rhs2 = 2.0 * reports[1].bound.max(0.0).powf(0.25);
    let bounds_met = reports.iter().all(|r| r.threshold_met);
    let mut it = reports.into_iter();
    let receivers = [it.next().expect("two receivers"), it.next().expect("two receivers")];
    Ok(ProtocolReport {
        lhs_total: fidelity_distance(ft),
        lhs_bob1: fidelity_distance(f1),
        lhs_bob2: fidelity_distance(f2),
        rhs_term1: rhs1,
        rhs_term2: rhs2,
        combined_bound: combine_distances(rhs1, rhs2),
        bounds_met,
        receivers,
        final_state: StateFile::from_state(&chi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::Builtin;

    fn dims(a1: usize, at1: usize, a2: usize, at2: usize) -> ProtocolDims {
        ProtocolDims { a1, at1, a2, at2 }
    }

    #[test]
    fn combine() {
        assert_eq!(combine_distances(0.0, 0.0), 0.0);
        assert!((combine_distances(0.1, 0.2) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn trivial_phi_is_scalar() {
        let phi = prepare_phi(&dims(1, 1, 1, 1)).unwrap();
        assert_eq!(phi.layout().total_dim(), 1);
    }

    #[test]
    fn transpose_trick_pauli_x() {
        let phi = max_entangled(2, ("R", "A")).unwrap();
        let x = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let u = Isometry::unitary(x, Layout::single("R", 2).unwrap()).unwrap();
        let direct = phi.apply(&u).unwrap();
        let tricked = transpose_trick(&u, &phi, &["A"]).unwrap();
        assert!((direct.amplitudes() - tricked.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn transpose_trick_rejects_product() {
        let phi = PureState::basis(Layout::new([("R", 2), ("A", 2)]).unwrap(), 0).unwrap();
        let u = Isometry::identity(Layout::single("R", 2).unwrap());
        assert!(transpose_trick(&u, &phi, &["A"]).is_err());
    }

    #[test]
    fn ideal_point_to_point() {
        let cfg = OneShotConfig {
            channel: Builtin::IdealToB1.build().unwrap(),
            dims: dims(2, 1, 1, 1),
            encoder: Isometry::wiring(
                &dims(2, 1, 1, 1).message_layout().unwrap(),
                &[WireSpec::new(INPUT_LABEL, [A1, AT1, A2, AT2]), WireSpec::new(AHAT, Vec::<String>::new())],
            )
            .unwrap(),
            candidates: 4,
            seed: 3,
        };
        let rep = run_one_shot(&cfg).unwrap();
        assert!(rep.lhs_total < 1e-8, "{}", rep.lhs_total);
        assert!(rep.lhs_total <= rep.combined_bound);
    }

    #[test]
    fn decoder_needs_room() {
        let psi = max_entangled(4, (R1, "B")).unwrap();
        assert!(build_decoder(&psi, 0, &[]).unwrap_err().is_infeasible());
    }
}
