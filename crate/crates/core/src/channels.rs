//! Broadcast channels `A' → B₁…B_m E` given by their isometric extension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{isometry_error, CMatrix, DensityOperator, Isometry, LabeledState, Layout, C64, DERIVED_TOL};

pub const INPUT_LABEL: &str = "A'";
pub const ENV_LABEL: &str = "E";

/// Largest total output dimension accepted from user-supplied channels.
pub const MAX_CHANNEL_DIM: usize = 1 << 13;

/// Label of copy `k` (1-based) of factor `base` in an `n`-fold use.
pub fn copy_label(base: &str, k: usize) -> String {
    format!("{base}#{k}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct BroadcastChannel {
    isometry: Isometry,
    receivers: Vec<String>,
}

impl BroadcastChannel {
    /// `matrix` maps `A'` (dimension `input_dim`) to the receivers followed by `E`.
    pub fn from_isometry(matrix: CMatrix, input_dim: usize, receivers: &[(String, usize)], env_dim: usize) -> Result<Self> {
        if receivers.is_empty() {
            return Err(Error::InvalidParameter("a broadcast channel needs at least one receiver".into()));
        }
        let mut out = Layout::empty();
        for (l, d) in receivers {
            if l == ENV_LABEL || l == INPUT_LABEL || l.contains('#') {
                return Err(Error::InvalidParameter(format!("reserved receiver label `{l}`")));
            }
            out.push(l.clone(), *d)?;
        }
        out.push(ENV_LABEL, env_dim)?;
        let input = Layout::single(INPUT_LABEL, input_dim)?;
        let isometry = Isometry::new(matrix, input, out)?;
        Ok(BroadcastChannel {
            isometry,
            receivers: receivers.iter().map(|(l, _)| l.clone()).collect(),
        })
    }

    /// Stinespring isometry `V = Σ_k K_k ⊗ |k⟩_E` of a Kraus decomposition
    /// whose operators map `A'` into the receivers' joint space.
    pub fn from_kraus(kraus: &[CMatrix], receivers: &[(String, usize)]) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidParameter("empty Kraus set".into()));
        }
        let din = kraus[0].ncols();
        let dout: usize = receivers.iter().map(|(_, d)| *d).product();
        for k in kraus {
            if k.ncols() != din || k.nrows() != dout {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator is {}x{}, expected {dout}x{din}",
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        let mut sum = CMatrix::zeros(din, din);
        for k in kraus {
            sum += k.adjoint() * k;
        }
        let dev = (sum - CMatrix::identity(din, din)).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if dev > DERIVED_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        let ne = kraus.len();
        let mut v = CMatrix::zeros(dout * ne, din);
        for (e, k) in kraus.iter().enumerate() {
            for b in 0..dout {
                for a in 0..din {
                    v[(b * ne + e, a)] = k[(b, a)];
                }
            }
        }
        BroadcastChannel::from_isometry(v, din, receivers, ne)
    }

    pub fn isometry(&self) -> &Isometry {
        &self.isometry
    }

    pub fn receivers(&self) -> &[String] {
        &self.receivers
    }

    pub fn input_dim(&self) -> usize {
        self.isometry.input().total_dim()
    }

    pub fn env_dim(&self) -> usize {
        self.isometry.output().dim_of(ENV_LABEL).unwrap_or(1)
    }

    pub fn receiver_dim(&self, i: usize) -> usize {
        self.isometry.output().factors()[i].dim
    }

    /// Output factor labels: receivers then `E`.
    pub fn output_labels(&self) -> Vec<String> {
        self.isometry.output().labels().map(String::from).collect()
    }

    /// Kraus operators read back from the environment basis slices.
    pub fn kraus_operators(&self) -> Vec<CMatrix> {
        let ne = self.env_dim();
        let din = self.input_dim();
        let dout = self.isometry.output().total_dim() / ne;
        let v = self.isometry.matrix();
        (0..ne)
            .map(|e| CMatrix::from_fn(dout, din, |b, a| v[(b * ne + e, a)]))
            .collect()
    }

    /// The channel's isometry relabelled for copy `suffix` (`None` for plain labels).
    pub fn labelled_isometry(&self, suffix: Option<usize>) -> Isometry {
        let name = |l: &str| match suffix {
            Some(k) => copy_label(l, k),
            None => l.to_string(),
        };
        let input = Layout::single(name(INPUT_LABEL), self.input_dim()).expect("valid input layout");
        let output = Layout::new(self.isometry.output().factors().iter().map(|f| (name(&f.label), f.dim)))
            .expect("valid output layout");
        self.isometry.relayout(input, output).expect("same dimensions")
    }

    /// Sends the input factors of `state` through the channel.
    ///
    /// With `n_copies == 1` the state must contain `A'`, which is replaced by
    /// `B₁ … B_m E`. Otherwise it must contain `A'#1 … A'#n`, and copy `k`
    /// produces `B₁#k … E#k`.
    pub fn apply(&self, state: &LabeledState, n_copies: usize) -> Result<LabeledState> {
        if n_copies == 0 {
            return Err(Error::InvalidParameter("n_copies must be at least 1".into()));
        }
        if n_copies == 1 {
            return state.apply(&self.labelled_isometry(None));
        }
        let mut s = state.clone();
        for k in 1..=n_copies {
            s = s.apply(&self.labelled_isometry(Some(k)))?;
        }
        Ok(s)
    }

    /// Channel action on a density operator of `A'` alone, environment traced out.
    pub fn act(&self, rho: &CMatrix) -> Result<DensityOperator> {
        let input = Layout::single(INPUT_LABEL, self.input_dim())?;
        let rho = DensityOperator::new(rho.clone(), input)?;
        let out = rho.apply(&self.labelled_isometry(None))?;
        out.partial_trace(&self.receivers)
    }

    /// `U_N^{⊗n}` as a single channel whose receiver `B_i` (and `E`) holds all
    /// `n` copies of the original `B_i`, copy 1 slowest.
    pub fn power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("power must be at least 1".into()));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let out = self.isometry.output();
        let dims = out.dims();
        let total = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d.checked_pow(n as u32)?))
            .filter(|&t| t <= MAX_CHANNEL_DIM)
            .ok_or_else(|| Error::Infeasible(format!("channel power exceeds dimension {MAX_CHANNEL_DIM}")))?;
        let din = self
            .input_dim()
            .checked_pow(n as u32)
            .filter(|&d| d <= total)
            .ok_or_else(|| Error::Infeasible("input power too large".into()))?;
        let mut m = self.isometry.matrix().clone();
        for _ in 1..n {
            m = crate::tensor::kron(&m, self.isometry.matrix());
        }
        // Rows of `m` run over (B₁#1 … E#1, B₁#2 …); regroup by system.
        let copies = Layout::new((1..=n).flat_map(|k| out.factors().iter().map(move |f| (copy_label(&f.label, k), f.dim))))?;
        let order: Vec<String> = out
            .factors()
            .iter()
            .flat_map(|f| (1..=n).map(move |k| copy_label(&f.label, k)))
            .collect();
        let off = crate::tensor::offsets(&copies, &copies.positions(&order)?);
        let regrouped = CMatrix::from_fn(total, din, |r, c| m[(off[r], c)]);
        let receivers: Vec<(String, usize)> = self
            .receivers
            .iter()
            .zip(&dims)
            .map(|(l, d)| (l.clone(), d.pow(n as u32)))
            .collect();
        BroadcastChannel::from_isometry(regrouped, din, &receivers, self.env_dim().pow(n as u32))
    }

    pub fn builtin(spec: &Builtin) -> Result<Self> {
        spec.build()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ChannelFile = serde_json::from_str(s)?;
        file.build()
    }

    pub fn to_file(&self) -> ChannelFile {
        let v = self.isometry.matrix();
        ChannelFile {
            builtin: None,
            params: None,
            input_dim: Some(self.input_dim()),
            outputs: Some(
                self.isometry
                    .output()
                    .factors()
                    .iter()
                    .map(|f| OutputSpec { label: f.label.clone(), dim: f.dim })
                    .collect(),
            ),
            isometry: Some(
                (0..v.nrows())
                    .map(|r| (0..v.ncols()).map(|c| [v[(r, c)].re, v[(r, c)].im]).collect())
                    .collect(),
            ),
            kraus: None,
        }
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Classical broadcast transition matrix `p(y₁, y₂ | x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalBroadcast {
    nx: usize,
    ny1: usize,
    ny2: usize,
    p: Vec<f64>,
}

impl ClassicalBroadcast {
    /// `p[x][y1][y2]`.
    pub fn new(p: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let nx = p.len();
        if nx == 0 {
            return Err(Error::InvalidDistribution("empty input alphabet".into()));
        }
        let ny1 = p[0].len();
        let ny2 = p[0].first().map_or(0, Vec::len);
        if ny1 == 0 || ny2 == 0 {
            return Err(Error::InvalidDistribution("empty output alphabet".into()));
        }
        let mut flat = Vec::with_capacity(nx * ny1 * ny2);
        for (x, row) in p.iter().enumerate() {
            if row.len() != ny1 || row.iter().any(|r| r.len() != ny2) {
                return Err(Error::InvalidDistribution(format!("ragged transition row for x = {x}")));
            }
            let mut total = 0.0;
            for &v in row.iter().flatten() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidDistribution(format!("entry {v} for x = {x}")));
                }
                total += v;
                flat.push(v);
            }
            if (total - 1.0).abs() > DERIVED_TOL {
                return Err(Error::InvalidDistribution(format!("row x = {x} sums to {total}")));
            }
        }
        Ok(ClassicalBroadcast { nx, ny1, ny2, p: flat })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny1, self.ny2)
    }

    pub fn prob(&self, x: usize, y1: usize, y2: usize) -> f64 {
        self.p[(x * self.ny1 + y1) * self.ny2 + y2]
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.nx)
            .map(|x| (0..self.ny1).map(|y1| (0..self.ny2).map(|y2| self.prob(x, y1, y2)).collect()).collect())
            .collect()
    }
}

/// The builtin channel zoo.
#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    /// Qubit sent noiselessly to `B1`; `B2` and `E` trivial.
    IdealToB1,
    /// Two input qubits, the first routed to `B1`, the second to `B2`.
    SwapRouter,
    /// `m` input qubits, qubit `j` routed to `Bj`.
    Router { receivers: usize },
    /// Measure-and-prepare embedding of `p(y₁,y₂|x)`; `E` is the minimal
    /// environment, one level per `(x, y₁, y₂)` with nonzero probability.
    ClassicalEmbedded(ClassicalBroadcast),
    /// `|x⟩ → |x⟩_{B1} |x⟩_{B2}`: each receiver sees a dephased copy.
    DephasingBroadcast,
    /// The qubit reaches `B1` with probability `1 − p`, else `B2`; the other
    /// receiver gets the erasure flag `|2⟩` and `E` records which happened.
    ErasureFlag { p: f64 },
    /// Depolarizing channel of strength `p` to `B1`; its environment goes to `B2`.
    DepolarizingBroadcast { p: f64 },
}

impl Builtin {
    pub const NAMES: [&'static str; 7] = [
        "ideal_to_b1",
        "swap_router",
        "router",
        "classical_embedded",
        "dephasing_broadcast",
        "erasure_flag",
        "depolarizing_broadcast",
    ];

    /// Builds from a name and a JSON parameter object.
    pub fn from_name(name: &str, params: Option<&serde_json::Value>) -> Result<Self> {
        let get_f64 = |key: &str, default: Option<f64>| -> Result<f64> {
            match params.and_then(|p| p.get(key)) {
                Some(v) => v.as_f64().ok_or_else(|| Error::InvalidParameter(format!("`{key}` must be a number"))),
                None => default.ok_or_else(|| Error::InvalidParameter(format!("missing parameter `{key}`"))),
            }
        };
        match name {
            "ideal_to_b1" => Ok(Builtin::IdealToB1),
            "swap_router" => Ok(Builtin::SwapRouter),
            "router" => {
                let m = get_f64("receivers", Some(2.0))?;
                if m.fract() != 0.0 || !(1.0..=12.0).contains(&m) {
                    return Err(Error::InvalidParameter(format!("receivers = {m}")));
                }
                Ok(Builtin::Router { receivers: m as usize })
            }
            "classical_embedded" => {
                let t = params
                    .and_then(|p| p.get("transition"))
                    .ok_or_else(|| Error::InvalidParameter("missing parameter `transition`".into()))?;
                let nested: Vec<Vec<Vec<f64>>> = serde_json::from_value(t.clone())?;
                Ok(Builtin::ClassicalEmbedded(ClassicalBroadcast::new(nested)?))
            }
            "dephasing_broadcast" => Ok(Builtin::DephasingBroadcast),
            "erasure_flag" => Ok(Builtin::ErasureFlag { p: get_f64("p", Some(0.5))? }),
            "depolarizing_broadcast" => Ok(Builtin::DepolarizingBroadcast { p: get_f64("p", None)? }),
            other => Err(Error::UnknownChannel(other.to_string())),
        }
    }

    pub fn build(&self) -> Result<BroadcastChannel> {
        let rx = |v: &[(&str, usize)]| v.iter().map(|(l, d)| (l.to_string(), *d)).collect::<Vec<_>>();
        match self {
            Builtin::IdealToB1 => BroadcastChannel::from_isometry(CMatrix::identity(2, 2), 2, &rx(&[("B1", 2), ("B2", 1)]), 1),
            Builtin::SwapRouter => Builtin::Router { receivers: 2 }.build(),
            Builtin::Router { receivers } => {
                let m = *receivers;
                if m == 0 {
                    return Err(Error::InvalidParameter("router needs at least one receiver".into()));
                }
                let d = 1usize << m;
                let names: Vec<(String, usize)> = (1..=m).map(|j| (format!("B{j}"), 2)).collect();
                BroadcastChannel::from_isometry(CMatrix::identity(d, d), d, &names, 1)
            }
            Builtin::ClassicalEmbedded(t) => {
                let (nx, ny1, ny2) = t.dims();
                let mut support = Vec::new();
                for x in 0..nx {
                    for y1 in 0..ny1 {
                        for y2 in 0..ny2 {
                            if t.prob(x, y1, y2) > 0.0 {
                                support.push((x, y1, y2));
                            }
                        }
                    }
                }
                let ne = support.len();
                let mut v = CMatrix::zeros(ny1 * ny2 * ne, nx);
                for (e, &(x, y1, y2)) in support.iter().enumerate() {
                    v[((y1 * ny2 + y2) * ne + e, x)] = real(t.prob(x, y1, y2).sqrt());
                }
                BroadcastChannel::from_isometry(v, nx, &rx(&[("B1", ny1), ("B2", ny2)]), ne)
            }
            Builtin::DephasingBroadcast => {
                let mut v = CMatrix::zeros(4, 2);
                v[(0, 0)] = real(1.0);
                v[(3, 1)] = real(1.0);
                BroadcastChannel::from_isometry(v, 2, &rx(&[("B1", 2), ("B2", 2)]), 1)
            }
            Builtin::ErasureFlag { p } => {
                let p = *p;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!("erasure probability {p}")));
                }
                // Output index ((b1 * 3 + b2) * 2 + e).
                let mut v = CMatrix::zeros(18, 2);
                for x in 0..2 {
                    v[((x * 3 + 2) * 2, x)] = real((1.0 - p).sqrt());
                    v[((2 * 3 + x) * 2 + 1, x)] = real(p.sqrt());
                }
                BroadcastChannel::from_isometry(v, 2, &rx(&[("B1", 3), ("B2", 3)]), 2)
            }
            Builtin::DepolarizingBroadcast { p } => {
                let p = *p;
                if !(0.0..=4.0 / 3.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!("depolarizing parameter {p}")));
                }
                let kraus = depolarizing_kraus(p);
                let mut v = CMatrix::zeros(8, 2);
                for (k, op) in kraus.iter().enumerate() {
                    for b in 0..2 {
                        for a in 0..2 {
                            v[(b * 4 + k, a)] = op[(b, a)];
                        }
                    }
                }
                BroadcastChannel::from_isometry(v, 2, &rx(&[("B1", 2), ("B2", 4)]), 1)
            }
        }
    }
}

/// `{√(1−3p/4) I, √(p/4) X, √(p/4) Y, √(p/4) Z}`.
pub fn depolarizing_kraus(p: f64) -> Vec<CMatrix> {
    let i = C64::new(0.0, 1.0);
    let a = real((1.0 - 0.75 * p).sqrt());
    let b = real((0.25 * p).sqrt());
    vec![
        CMatrix::from_row_slice(2, 2, &[a, real(0.0), real(0.0), a]),
        CMatrix::from_row_slice(2, 2, &[real(0.0), b, b, real(0.0)]),
        CMatrix::from_row_slice(2, 2, &[real(0.0), -i * b, i * b, real(0.0)]),
        CMatrix::from_row_slice(2, 2, &[b, real(0.0), real(0.0), -b]),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub label: String,
    pub dim: usize,
}

/// On-disk channel description.
///
/// Either `builtin` (with optional `params`), or `input_dim` + `outputs` with
/// exactly one of `isometry` (rows indexed by the outputs in row-major
/// order, entries `[re, im]`) or `kraus` (each operator maps `input_dim` into
/// the joint receiver space; `E` gets one level per operator).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<OutputSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isometry: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<Vec<Vec<[f64; 2]>>>>,
}

fn parse_matrix(rows: &[Vec<[f64; 2]>], nrows: usize, ncols: usize, what: &str) -> Result<CMatrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("{what} must be {nrows}x{ncols}")));
    }
    let mut m = CMatrix::zeros(nrows, ncols);
    for (r, row) in rows.iter().enumerate() {
        for (c, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(Error::Parse(format!("non-finite entry in {what}")));
            }
            m[(r, c)] = C64::new(z[0], z[1]);
        }
    }
    Ok(m)
}

fn checked_product(dims: impl IntoIterator<Item = usize>) -> Result<usize> {
    let mut acc = 1usize;
    for d in dims {
        if d == 0 {
            return Err(Error::ZeroDimension("output".into()));
        }
        acc = acc
            .checked_mul(d)
            .filter(|&v| v <= MAX_CHANNEL_DIM)
            .ok_or_else(|| Error::Infeasible(format!("channel dimension exceeds {MAX_CHANNEL_DIM}")))?;
    }
    Ok(acc)
}

impl ChannelFile {
    pub fn build(&self) -> Result<BroadcastChannel> {
        if let Some(name) = &self.builtin {
            if self.input_dim.is_some() || self.outputs.is_some() || self.isometry.is_some() || self.kraus.is_some() {
                return Err(Error::Parse("`builtin` excludes explicit channel fields".into()));
            }
            return Builtin::from_name(name, self.params.as_ref())?.build();
        }
        let din = self.input_dim.ok_or_else(|| Error::Parse("missing `input_dim`".into()))?;
        if din == 0 || din > MAX_CHANNEL_DIM {
            return Err(Error::Infeasible(format!("input dimension {din}")));
        }
        let outputs = self.outputs.as_ref().ok_or_else(|| Error::Parse("missing `outputs`".into()))?;
        let receivers: Vec<(String, usize)> = outputs
            .iter()
            .filter(|o| o.label != ENV_LABEL)
            .map(|o| (o.label.clone(), o.dim))
            .collect();
        let env = outputs.iter().find(|o| o.label == ENV_LABEL).map(|o| o.dim);
        let drx = checked_product(receivers.iter().map(|r| r.1))?;
        match (&self.isometry, &self.kraus) {
            (Some(rows), None) => {
                let de = env.unwrap_or(1);
                let dout = checked_product([drx, de])?;
                if dout < din {
                    return Err(Error::DimensionMismatch(format!("output dimension {dout} < input dimension {din}")));
                }
                // Rows follow the listed output order; move E last if needed.
                let m = parse_matrix(rows, dout, din, "isometry")?;
                let listed = Layout::new(outputs.iter().map(|o| (o.label.clone(), o.dim)))?;
                let m = if env.is_some() && outputs.last().map(|o| o.label.as_str()) != Some(ENV_LABEL) {
                    let mut order: Vec<&str> = receivers.iter().map(|r| r.0.as_str()).collect();
                    order.push(ENV_LABEL);
                    let pos = listed.positions(&order)?;
                    let off = crate::tensor::offsets(&listed, &pos);
                    CMatrix::from_fn(dout, din, |r, c| m[(off[r], c)])
                } else {
                    m
                };
                BroadcastChannel::from_isometry(m, din, &receivers, de)
            }
            (None, Some(ks)) => {
                if env.is_some() {
                    return Err(Error::Parse("`E` is implied by the Kraus count and must not be listed".into()));
                }
                if ks.is_empty() {
                    return Err(Error::Parse("empty `kraus` list".into()));
                }
                checked_product([drx, ks.len()])?;
                let mats = ks
                    .iter()
                    .map(|k| parse_matrix(k, drx, din, "Kraus operator"))
                    .collect::<Result<Vec<_>>>()?;
                BroadcastChannel::from_kraus(&mats, &receivers)
            }
            _ => Err(Error::Parse("exactly one of `isometry` or `kraus` is required".into())),
        }
    }
}

/// `max |M†M − I|` of the channel isometry; exposed for diagnostics.
pub fn channel_isometry_error(ch: &BroadcastChannel) -> f64 {
    isometry_error(ch.isometry().matrix())
}
