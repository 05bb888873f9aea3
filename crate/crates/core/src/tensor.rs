//! Labelled multipartite states and the linear algebra every other module
//! builds on.
//!
//! Index convention: row-major Kronecker ordering. The first factor of a
//! [`Layout`] is the slowest-varying index, so the amplitude of the basis
//! state `|x_1 x_2 ... x_k⟩` sits at `Σ x_f · stride_f` with
//! `stride_f = Π_{g > f} dim_g`. Every reshape in the crate goes through
//! [`offsets`], which enumerates multi-indices of a subset of factors in
//! exactly this order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance used when validating constructed objects.
pub const CONSTRUCT_TOL: f64 = 1e-10;
/// Tolerance used for checks on derived quantities.
pub const DERIVED_TOL: f64 = 1e-9;

const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
const ONE: C64 = Complex { re: 1.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of named tensor factors.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Layout {
    factors: Vec<Factor>,
}

impl Layout {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut out = Layout::default();
        for (label, dim) in factors {
            out.push(label, dim)?;
        }
        Ok(out)
    }

    pub fn empty() -> Self {
        Layout::default()
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Layout::new([(label.into(), dim)])
    }

    pub fn push(&mut self, label: impl Into<String>, dim: usize) -> Result<()> {
        let label = label.into();
        if dim == 0 {
            return Err(Error::ZeroDimension(label));
        }
        if self.position(&label).is_some() {
            return Err(Error::DuplicateLabel(label));
        }
        self.factors.push(Factor { label, dim });
        Ok(())
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|f| f.label.as_str())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.label == label)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.position(label)
            .map(|p| self.factors[p].dim)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Product of the dimensions of `labels`.
    pub fn dim_of_all<S: AsRef<str>>(&self, labels: &[S]) -> Result<usize> {
        labels.iter().try_fold(1usize, |acc, l| Ok(acc * self.dim_of(l.as_ref())?))
    }

    /// Positions of `labels`, in the order given. Fails on unknown or repeated labels.
    pub fn positions<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            let p = self.position(l).ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
            if out.contains(&p) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.factors.len()];
        for i in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.factors[i + 1].dim;
        }
        strides
    }

    pub fn concat(&self, other: &Layout) -> Result<Layout> {
        let mut out = self.clone();
        for f in &other.factors {
            out.push(f.label.clone(), f.dim)?;
        }
        Ok(out)
    }

    /// Sub-layout on the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Layout {
        Layout {
            factors: positions.iter().map(|&p| self.factors[p].clone()).collect(),
        }
    }

    /// Positions not in `positions`, ascending.
    pub fn complement(&self, positions: &[usize]) -> Vec<usize> {
        (0..self.factors.len()).filter(|p| !positions.contains(p)).collect()
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Layout> {
        let p = self.position(from).ok_or_else(|| Error::UnknownLabel(from.to_string()))?;
        if from != to && self.contains(to) {
            return Err(Error::DuplicateLabel(to.to_string()));
        }
        let mut out = self.clone();
        out.factors[p].label = to.to_string();
        Ok(out)
    }
}

/// Flat offsets of every multi-index over the factors at `positions`,
/// enumerated row-major in the order `positions` is given.
///
/// For disjoint position sets `P` and `Q` covering the layout, the flat index
/// of `(p, q)` is `offsets(P)[p] + offsets(Q)[q]`.
pub fn offsets(layout: &Layout, positions: &[usize]) -> Vec<usize> {
    let strides = layout.strides();
    let mut out = vec![0usize];
    for &p in positions {
        let dim = layout.factors[p].dim;
        let stride = strides[p];
        let mut next = Vec::with_capacity(out.len() * dim);
        for &o in &out {
            for x in 0..dim {
                next.push(o + x * stride);
            }
        }
        out = next;
    }
    out
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(m - m.adjoint()))
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Eigen-decomposition `(values, vectors)` of a Hermitian matrix; columns of
/// `vectors` are the eigenvectors, values ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Trace norm `tr|M|` of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    let err = hermiticity_error(m);
    if err > DERIVED_TOL {
        return Err(Error::NotHermitian(err));
    }
    Ok(hermitian_eigenvalues(m).iter().map(|v| v.abs()).sum())
}

/// Trace norm of the difference of two density matrices with the same layout.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.layout != b.layout {
        return Err(Error::DimensionMismatch(format!(
            "layouts {:?} and {:?} differ",
            a.layout.labels().collect::<Vec<_>>(),
            b.layout.labels().collect::<Vec<_>>()
        )));
    }
    trace_norm(&(&a.matrix - &b.matrix))
}

/// `‖ψψ† − φφ†‖₁ = 2√(1 − |⟨ψ|φ⟩|²)` for normalized vectors.
pub fn pure_trace_distance(a: &CVector, b: &CVector) -> f64 {
    let overlap = a.dotc(b).norm_sqr();
    2.0 * (1.0 - overlap).max(0.0).sqrt()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for c in 0..n {
        let s = vals[c].max(0.0).sqrt();
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

/// Pure state on a labelled tensor product.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    layout: Layout,
}

impl PureState {
    pub fn new(amplitudes: CVector, layout: Layout) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a layout of dimension {}",
                amplitudes.len(),
                layout.total_dim()
            )));
        }
        let dev = (amplitudes.norm() - 1.0).abs();
        if dev > CONSTRUCT_TOL {
            return Err(Error::NotNormalized(dev));
        }
        Ok(PureState { amplitudes, layout })
    }

    /// Builds a state from an unnormalized vector, normalizing it.
    pub fn normalized(amplitudes: CVector, layout: Layout) -> Result<Self> {
        let n = amplitudes.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotNormalized(f64::INFINITY));
        }
        PureState::new(amplitudes.unscale(n), layout)
    }

    /// The 1-dimensional state on no factors.
    pub fn scalar() -> Self {
        PureState {
            amplitudes: CVector::from_element(1, ONE),
            layout: Layout::empty(),
        }
    }

    pub fn basis(layout: Layout, index: usize) -> Result<Self> {
        let d = layout.total_dim();
        if index >= d {
            return Err(Error::DimensionMismatch(format!("basis index {index} >= {d}")));
        }
        let mut v = CVector::zeros(d);
        v[index] = ONE;
        Ok(PureState { amplitudes: v, layout })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn into_parts(self) -> (CVector, Layout) {
        (self.amplitudes, self.layout)
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
            layout: self.layout.clone(),
        }
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let layout = self.layout.concat(&other.layout)?;
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        Ok(PureState { amplitudes, layout })
    }

    /// `M[a, t] = ψ[offset(a) + offset(t)]` with `a` running over the factors
    /// at `rows` (in that order) and `t` over the remaining factors in layout order.
    pub fn bipartite_matrix(&self, rows: &[usize]) -> CMatrix {
        let rest = self.layout.complement(rows);
        let ro = offsets(&self.layout, rows);
        let co = offsets(&self.layout, &rest);
        CMatrix::from_fn(ro.len(), co.len(), |a, t| self.amplitudes[ro[a] + co[t]])
    }

    /// Reduced density operator on `keep`, factor order as in the layout.
    pub fn reduced<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityOperator> {
        let mut pos = self.layout.positions(keep)?;
        pos.sort_unstable();
        let m = self.bipartite_matrix(&pos);
        Ok(DensityOperator {
            matrix: &m * m.adjoint(),
            layout: self.layout.select(&pos),
        })
    }

    /// Reorders factors to `order` (which must list every label exactly once).
    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<PureState> {
        let pos = self.layout.positions(order)?;
        if pos.len() != self.layout.len() {
            return Err(Error::DimensionMismatch("permutation must list every factor".into()));
        }
        let off = offsets(&self.layout, &pos);
        let amplitudes = CVector::from_iterator(off.len(), off.iter().map(|&o| self.amplitudes[o]));
        Ok(PureState { amplitudes, layout: self.layout.select(&pos) })
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<PureState> {
        Ok(PureState {
            amplitudes: self.amplitudes.clone(),
            layout: self.layout.relabel(from, to)?,
        })
    }

    /// Merges `labels` into one factor `merged`, placed where the first of them sat.
    pub fn group<S: AsRef<str>>(&self, labels: &[S], merged: &str) -> Result<PureState> {
        let (order, layout) = grouped_layout(&self.layout, labels, merged)?;
        let permuted = self.permute(&order)?;
        Ok(PureState { amplitudes: permuted.amplitudes, layout })
    }

    /// Splits factor `label` into consecutive factors with the given dims
    /// (row-major, first part slowest).
    pub fn split(&self, label: &str, parts: &[(&str, usize)]) -> Result<PureState> {
        Ok(PureState {
            amplitudes: self.amplitudes.clone(),
            layout: split_layout(&self.layout, label, parts)?,
        })
    }

    /// Applies `op` to its input factors; its output factors take the place of
    /// the first input factor in the layout.
    pub fn apply(&self, op: &Isometry) -> Result<PureState> {
        let (amps, layout) = apply_to_columns(op, &self.layout, &CMatrix::from_column_slice(self.amplitudes.len(), 1, self.amplitudes.as_slice()))?;
        Ok(PureState { amplitudes: amps.column(0).into_owned(), layout })
    }

    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch("inner product of states with different layouts".into()));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }
}

fn grouped_layout<S: AsRef<str>>(layout: &Layout, labels: &[S], merged: &str) -> Result<(Vec<String>, Layout)> {
    let pos = layout.positions(labels)?;
    if pos.is_empty() {
        return Err(Error::InvalidParameter("cannot group an empty label set".into()));
    }
    let first = *pos.iter().min().unwrap();
    let mut order = Vec::new();
    let mut out = Layout::empty();
    for (i, f) in layout.factors().iter().enumerate() {
        if i == first {
            for &p in &pos {
                order.push(layout.factors()[p].label.clone());
            }
            out.push(merged, layout.select(&pos).total_dim())?;
        } else if !pos.contains(&i) {
            order.push(f.label.clone());
            out.push(f.label.clone(), f.dim)?;
        }
    }
    Ok((order, out))
}

fn split_layout(layout: &Layout, label: &str, parts: &[(&str, usize)]) -> Result<Layout> {
    let p = layout.position(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    let prod: usize = parts.iter().map(|(_, d)| *d).product();
    if prod != layout.factors()[p].dim {
        return Err(Error::DimensionMismatch(format!(
            "cannot split `{label}` of dimension {} into parts of total dimension {prod}",
            layout.factors()[p].dim
        )));
    }
    let mut out = Layout::empty();
    for (i, f) in layout.factors().iter().enumerate() {
        if i == p {
            for (l, d) in parts {
                out.push(*l, *d)?;
            }
        } else {
            out.push(f.label.clone(), f.dim)?;
        }
    }
    Ok(out)
}

/// Applies `op ⊗ I` to every column of `m`, whose rows are indexed by `layout`.
fn apply_to_columns(op: &Isometry, layout: &Layout, m: &CMatrix) -> Result<(CMatrix, Layout)> {
    let in_labels: Vec<&str> = op.input.labels().collect();
    let in_pos = layout.positions(&in_labels)?;
    for (f, &p) in op.input.factors().iter().zip(&in_pos) {
        if layout.factors()[p].dim != f.dim {
            return Err(Error::DimensionMismatch(format!(
                "operator expects `{}` of dimension {}, state has {}",
                f.label,
                f.dim,
                layout.factors()[p].dim
            )));
        }
    }
    let rest_pos = layout.complement(&in_pos);

    // New layout: outputs take the slot of the earliest input factor.
    let anchor = in_pos.iter().copied().min();
    let mut new_layout = Layout::empty();
    let mut inserted = false;
    for (i, f) in layout.factors().iter().enumerate() {
        if Some(i) == anchor {
            for g in op.output.factors() {
                new_layout.push(g.label.clone(), g.dim)?;
            }
            inserted = true;
        } else if !in_pos.contains(&i) {
            new_layout.push(f.label.clone(), f.dim)?;
        }
    }
    if !inserted {
        // Operator with no input factors: prepend its outputs.
        let mut l = op.output.clone();
        for f in layout.factors() {
            l.push(f.label.clone(), f.dim)?;
        }
        new_layout = l;
    }

    let in_off = offsets(layout, &in_pos);
    let rest_off = offsets(layout, &rest_pos);
    let out_labels: Vec<&str> = op.output.labels().collect();
    let out_pos_new = new_layout.positions(&out_labels)?;
    let rest_labels: Vec<&str> = rest_pos.iter().map(|&p| layout.factors()[p].label.as_str()).collect();
    let rest_pos_new = new_layout.positions(&rest_labels)?;
    let out_off = offsets(&new_layout, &out_pos_new);
    let rest_off_new = offsets(&new_layout, &rest_pos_new);

    let d_in = in_off.len();
    let d_rest = rest_off.len();
    let mut result = CMatrix::zeros(new_layout.total_dim(), m.ncols());
    let mut block = CMatrix::zeros(d_in, d_rest);
    for c in 0..m.ncols() {
        for a in 0..d_in {
            for t in 0..d_rest {
                block[(a, t)] = m[(in_off[a] + rest_off[t], c)];
            }
        }
        let mapped = &op.matrix * &block;
        for o in 0..out_off.len() {
            for t in 0..d_rest {
                result[(out_off[o] + rest_off_new[t], c)] = mapped[(o, t)];
            }
        }
    }
    Ok((result, new_layout))
}

/// Density operator on a labelled tensor product.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    layout: Layout,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix, layout: Layout) -> Result<Self> {
        let d = layout.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for a layout of dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = hermiticity_error(&matrix);
        if herm > CONSTRUCT_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > CONSTRUCT_TOL || tr.im.abs() > CONSTRUCT_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} is not 1")));
        }
        let min = hermitian_eigenvalues(&matrix).first().copied().unwrap_or(0.0);
        if min < -CONSTRUCT_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(DensityOperator { matrix, layout })
    }

    pub fn maximally_mixed(layout: Layout) -> Self {
        let d = layout.total_dim();
        DensityOperator {
            matrix: CMatrix::identity(d, d).unscale(d as f64),
            layout,
        }
    }

    /// Diagonal density operator from probabilities.
    pub fn diagonal(probs: &[f64], layout: Layout) -> Result<Self> {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(probs.len(), probs.iter().map(|&p| C64::new(p, 0.0))));
        DensityOperator::new(m, layout)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn into_parts(self) -> (CMatrix, Layout) {
        (self.matrix, self.layout)
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<DensityOperator> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(DensityOperator { matrix: kron(&self.matrix, &other.matrix), layout })
    }

    /// Traces out every factor not in `keep`; kept factors stay in layout order.
    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityOperator> {
        let mut pos = self.layout.positions(keep)?;
        pos.sort_unstable();
        let rest = self.layout.complement(&pos);
        let ko = offsets(&self.layout, &pos);
        let ro = offsets(&self.layout, &rest);
        let dk = ko.len();
        let mut out = CMatrix::zeros(dk, dk);
        for a in 0..dk {
            for b in 0..dk {
                let mut acc = ZERO;
                for &t in &ro {
                    acc += self.matrix[(ko[a] + t, ko[b] + t)];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(DensityOperator { matrix: out, layout: self.layout.select(&pos) })
    }

    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<DensityOperator> {
        let pos = self.layout.positions(order)?;
        if pos.len() != self.layout.len() {
            return Err(Error::DimensionMismatch("permutation must list every factor".into()));
        }
        let off = offsets(&self.layout, &pos);
        let n = off.len();
        let matrix = CMatrix::from_fn(n, n, |i, j| self.matrix[(off[i], off[j])]);
        Ok(DensityOperator { matrix, layout: self.layout.select(&pos) })
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<DensityOperator> {
        Ok(DensityOperator {
            matrix: self.matrix.clone(),
            layout: self.layout.relabel(from, to)?,
        })
    }

    pub fn group<S: AsRef<str>>(&self, labels: &[S], merged: &str) -> Result<DensityOperator> {
        let (order, layout) = grouped_layout(&self.layout, labels, merged)?;
        let permuted = self.permute(&order)?;
        Ok(DensityOperator { matrix: permuted.matrix, layout })
    }

    pub fn split(&self, label: &str, parts: &[(&str, usize)]) -> Result<DensityOperator> {
        Ok(DensityOperator {
            matrix: self.matrix.clone(),
            layout: split_layout(&self.layout, label, parts)?,
        })
    }

    /// `op · ρ = op ρ op†` on the operator's input factors.
    pub fn apply(&self, op: &Isometry) -> Result<DensityOperator> {
        let (left, layout) = apply_to_columns(op, &self.layout, &self.matrix)?;
        let (both, layout2) = apply_to_columns(op, &self.layout, &left.adjoint())?;
        debug_assert_eq!(layout, layout2);
        Ok(DensityOperator { matrix: both.adjoint(), layout })
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

/// Either representation of a labelled state.
#[derive(Clone, Debug, PartialEq)]
pub enum LabeledState {
    Pure(PureState),
    Mixed(DensityOperator),
}

impl From<PureState> for LabeledState {
    fn from(s: PureState) -> Self {
        LabeledState::Pure(s)
    }
}

impl From<DensityOperator> for LabeledState {
    fn from(s: DensityOperator) -> Self {
        LabeledState::Mixed(s)
    }
}

impl LabeledState {
    pub fn layout(&self) -> &Layout {
        match self {
            LabeledState::Pure(p) => p.layout(),
            LabeledState::Mixed(m) => m.layout(),
        }
    }

    pub fn to_density(&self) -> DensityOperator {
        match self {
            LabeledState::Pure(p) => p.to_density(),
            LabeledState::Mixed(m) => m.clone(),
        }
    }

    pub fn reduced<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityOperator> {
        match self {
            LabeledState::Pure(p) => p.reduced(keep),
            LabeledState::Mixed(m) => m.partial_trace(keep),
        }
    }

    /// Tensor product; mixes representations by promoting to a density operator.
    pub fn tensor(&self, other: &LabeledState) -> Result<LabeledState> {
        match (self, other) {
            (LabeledState::Pure(a), LabeledState::Pure(b)) => Ok(a.tensor(b)?.into()),
            _ => Ok(self.to_density().tensor(&other.to_density())?.into()),
        }
    }

    pub fn apply(&self, op: &Isometry) -> Result<LabeledState> {
        match self {
            LabeledState::Pure(p) => Ok(p.apply(op)?.into()),
            LabeledState::Mixed(m) => Ok(m.apply(op)?.into()),
        }
    }

    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<LabeledState> {
        match self {
            LabeledState::Pure(p) => Ok(p.permute(order)?.into()),
            LabeledState::Mixed(m) => Ok(m.permute(order)?.into()),
        }
    }
}

/// Isometry from `input` factors to `output` factors.
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry {
    matrix: CMatrix,
    input: Layout,
    output: Layout,
}

impl Isometry {
    pub fn new(matrix: CMatrix, input: Layout, output: Layout) -> Result<Self> {
        let (din, dout) = (input.total_dim(), output.total_dim());
        if matrix.nrows() != dout || matrix.ncols() != din {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for an isometry {din} -> {dout}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if dout < din {
            return Err(Error::DimensionMismatch(format!("output dimension {dout} < input dimension {din}")));
        }
        let err = isometry_error(&matrix);
        if err > CONSTRUCT_TOL {
            return Err(Error::NotIsometry(err));
        }
        Ok(Isometry { matrix, input, output })
    }

    pub(crate) fn from_parts(matrix: CMatrix, input: Layout, output: Layout) -> Self {
        Isometry { matrix, input, output }
    }

    pub fn identity(layout: Layout) -> Self {
        let d = layout.total_dim();
        Isometry {
            matrix: CMatrix::identity(d, d),
            input: layout.clone(),
            output: layout,
        }
    }

    /// Unitary acting on `layout` in place.
    pub fn unitary(matrix: CMatrix, layout: Layout) -> Result<Self> {
        Isometry::new(matrix, layout.clone(), layout)
    }

    /// Permutation isometry that regroups input factors into output factors.
    ///
    /// Each output factor is the product of the listed input factors (in
    /// order), optionally embedded into a larger dimension `pad` by
    /// zero-extension. Every input factor must be used exactly once.
    pub fn wiring(input: &Layout, outputs: &[WireSpec]) -> Result<Self> {
        let mut used = Vec::new();
        let mut output = Layout::empty();
        let mut groups = Vec::new();
        for w in outputs {
            let pos = input.positions(&w.from)?;
            for &p in &pos {
                if used.contains(&p) {
                    return Err(Error::DuplicateLabel(input.factors()[p].label.clone()));
                }
                used.push(p);
            }
            let natural = input.select(&pos).total_dim();
            let dim = w.dim.unwrap_or(natural);
            if dim < natural {
                return Err(Error::DimensionMismatch(format!(
                    "wire `{}` of dimension {dim} cannot carry inputs of dimension {natural}",
                    w.label
                )));
            }
            output.push(w.label.clone(), dim)?;
            groups.push(pos);
        }
        if used.len() != input.len() {
            let missing: Vec<_> = input.complement(&used).iter().map(|&p| input.factors()[p].label.clone()).collect();
            return Err(Error::InvalidParameter(format!("wiring leaves inputs unused: {missing:?}")));
        }
        let din = input.total_dim();
        let dout = output.total_dim();
        let group_offsets: Vec<Vec<usize>> = groups.iter().map(|g| offsets(input, g)).collect();
        let out_strides = output.strides();
        let mut matrix = CMatrix::zeros(dout, din);
        // Walk every combination of group-local indices.
        let mut idx = vec![0usize; groups.len()];
        loop {
            let col: usize = idx.iter().zip(&group_offsets).map(|(&i, o)| o[i]).sum();
            let row: usize = idx.iter().zip(&out_strides).map(|(&i, s)| i * s).sum();
            matrix[(row, col)] = ONE;
            let mut k = groups.len();
            loop {
                if k == 0 {
                    return Ok(Isometry { matrix, input: input.clone(), output });
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < group_offsets[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn input(&self) -> &Layout {
        &self.input
    }

    pub fn output(&self) -> &Layout {
        &self.output
    }

    pub fn is_unitary(&self) -> bool {
        self.matrix.is_square()
    }

    /// Transpose in the standard basis; only meaningful for unitaries.
    pub fn transpose(&self) -> Isometry {
        Isometry {
            matrix: self.matrix.transpose(),
            input: self.output.clone(),
            output: self.input.clone(),
        }
    }

    pub fn adjoint(&self) -> Isometry {
        Isometry {
            matrix: self.matrix.adjoint(),
            input: self.output.clone(),
            output: self.input.clone(),
        }
    }

    /// Same matrix with new input/output layouts of identical total dimension.
    pub fn relayout(&self, input: Layout, output: Layout) -> Result<Isometry> {
        if input.total_dim() != self.input.total_dim() || output.total_dim() != self.output.total_dim() {
            return Err(Error::DimensionMismatch("relayout must preserve total dimensions".into()));
        }
        Ok(Isometry { matrix: self.matrix.clone(), input, output })
    }

    /// `self` followed by `next`; `next` must consume exactly `self`'s outputs.
    pub fn then(&self, next: &Isometry) -> Result<Isometry> {
        if next.input != self.output {
            return Err(Error::DimensionMismatch("composition requires matching layouts".into()));
        }
        Ok(Isometry {
            matrix: &next.matrix * &self.matrix,
            input: self.input.clone(),
            output: next.output.clone(),
        })
    }

    pub fn tensor(&self, other: &Isometry) -> Result<Isometry> {
        Ok(Isometry {
            matrix: kron(&self.matrix, &other.matrix),
            input: self.input.concat(&other.input)?,
            output: self.output.concat(&other.output)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WireSpec {
    pub label: String,
    pub from: Vec<String>,
    pub dim: Option<usize>,
}

impl WireSpec {
    pub fn new<S: Into<String>>(label: &str, from: impl IntoIterator<Item = S>) -> Self {
        WireSpec {
            label: label.to_string(),
            from: from.into_iter().map(Into::into).collect(),
            dim: None,
        }
    }

    pub fn padded(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }
}

/// `max |M†M − I|`.
pub fn isometry_error(m: &CMatrix) -> f64 {
    let n = m.ncols();
    max_abs(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

/// `(1/√d) Σ_i |i⟩|i⟩` on the factors `(s, s_prime)`.
pub fn max_entangled(dim: usize, labels: (&str, &str)) -> Result<PureState> {
    let layout = Layout::new([(labels.0, dim), (labels.1, dim)])?;
    let mut v = CVector::zeros(dim * dim);
    let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
    for i in 0..dim {
        v[i * dim + i] = amp;
    }
    Ok(PureState { amplitudes: v, layout })
}

/// Purification `vec(√ρ)`: `|ψ⟩ = Σ_{ij} (√ρ)_{ij} |i⟩|j⟩_ref`, with the
/// reference factor appended last and of the same dimension as `ρ`.
pub fn purify(rho: &DensityOperator, ref_label: &str) -> Result<PureState> {
    let d = rho.layout.total_dim();
    let mut layout = rho.layout.clone();
    layout.push(ref_label, d)?;
    let root = psd_sqrt(&rho.matrix);
    let mut v = CVector::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            v[i * d + j] = root[(i, j)];
        }
    }
    PureState::normalized(v, layout)
}

/// Isometry `U: B' → B` maximizing `|⟨ψ|(I_A ⊗ U)|φ⟩|` where `ψ` lives on
/// `A ∪ B` and `φ` on `A ∪ B'`; the `A` factors are `shared`.
///
/// With `X = M_φᵀ conj(M_ψ) = P Σ Q†` the optimum is `U = Q P†`.
pub fn uhlmann_isometry<S: AsRef<str>>(psi: &PureState, phi: &PureState, shared: &[S]) -> Result<Isometry> {
    let pa = psi.layout.positions(shared)?;
    let fa = phi.layout.positions(shared)?;
    for (&p, &f) in pa.iter().zip(&fa) {
        if psi.layout.factors()[p].dim != phi.layout.factors()[f].dim {
            return Err(Error::DimensionMismatch(format!(
                "shared factor `{}` differs in dimension",
                psi.layout.factors()[p].label
            )));
        }
    }
    let b_layout = psi.layout.select(&psi.layout.complement(&pa));
    let bp_layout = phi.layout.select(&phi.layout.complement(&fa));
    let (db, dbp) = (b_layout.total_dim(), bp_layout.total_dim());
    if db < dbp {
        return Err(Error::Infeasible(format!(
            "no isometry from dimension {dbp} into dimension {db}"
        )));
    }
    let m_psi = psi.bipartite_matrix(&pa);
    let m_phi = phi.bipartite_matrix(&fa);
    let x = m_phi.transpose() * m_psi.map(|z| z.conj());
    let svd = x.svd(true, true);
    let p = svd.u.expect("svd u");
    let q_adj = svd.v_t.expect("svd v_t");
    let u = q_adj.adjoint() * p.adjoint();
    let u = orthonormalize_columns(u);
    Ok(Isometry { matrix: u, input: bp_layout, output: b_layout })
}

/// Polishes a near-isometry with one Löwdin step `U (U†U)^{-1/2}`.
fn orthonormalize_columns(u: CMatrix) -> CMatrix {
    if isometry_error(&u) < 1e-13 {
        return u;
    }
    let gram = u.adjoint() * &u;
    let (vals, vecs) = hermitian_eigen(&gram);
    let n = gram.nrows();
    let mut scaled = vecs.clone();
    for c in 0..n {
        let s = 1.0 / vals[c].max(1e-300).sqrt();
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    u * (&scaled * vecs.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn basis_product() {
        let zero = PureState::basis(Layout::single("A", 2).unwrap(), 0).unwrap();
        let one = PureState::basis(Layout::single("B", 2).unwrap(), 1).unwrap();
        let s = zero.tensor(&one).unwrap();
        assert_eq!(s.layout().total_dim(), 4);
        assert_eq!(s.amplitudes()[1], c(1.0));
    }

    #[test]
    fn duplicate_label_rejected() {
        let a = PureState::basis(Layout::single("A", 2).unwrap(), 0).unwrap();
        assert!(matches!(a.tensor(&a), Err(Error::DuplicateLabel(_))));
        assert!(matches!(Layout::new([("A", 2), ("A", 3)]), Err(Error::DuplicateLabel(_))));
        assert!(matches!(Layout::new([("A", 0)]), Err(Error::ZeroDimension(_))));
    }

    #[test]
    fn maximally_entangled_marginal() {
        let phi = max_entangled(2, ("S", "T")).unwrap();
        let m = phi.reduced(&["S"]).unwrap();
        let target = CMatrix::identity(2, 2).unscale(2.0);
        assert!(max_abs(&(m.matrix() - target)) < 1e-12);
        let trivial = max_entangled(1, ("S", "T")).unwrap();
        assert_eq!(trivial.amplitudes()[0], c(1.0));
    }

    #[test]
    fn unknown_label_in_partial_trace() {
        let phi = max_entangled(2, ("S", "T")).unwrap().to_density();
        assert!(matches!(phi.partial_trace(&["Q"]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn partial_trace_keeps_layout_order() {
        let l = Layout::new([("A", 2), ("B", 3), ("C", 2)]).unwrap();
        let rho = DensityOperator::maximally_mixed(l);
        let r = rho.partial_trace(&["C", "A"]).unwrap();
        assert_eq!(r.layout().labels().collect::<Vec<_>>(), vec!["A", "C"]);
    }

    #[test]
    fn pauli_x_flips() {
        let l = Layout::single("A", 2).unwrap();
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let op = Isometry::unitary(x, l.clone()).unwrap();
        let s = PureState::basis(l.clone(), 0).unwrap().apply(&op).unwrap();
        assert_eq!(s, PureState::basis(l, 1).unwrap());
    }

    #[test]
    fn apply_rejects_dimension_mismatch() {
        let op = Isometry::identity(Layout::single("A", 3).unwrap());
        let s = PureState::basis(Layout::single("A", 2).unwrap(), 0).unwrap();
        assert!(matches!(s.apply(&op), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn trace_norm_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(matches!(trace_norm(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn orthogonal_pure_states_at_distance_two() {
        let l = Layout::single("A", 2).unwrap();
        let a = PureState::basis(l.clone(), 0).unwrap().to_density();
        let b = PureState::basis(l, 1).unwrap().to_density();
        assert!((trace_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        assert!(trace_distance(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn wiring_regroups_factors() {
        let input = Layout::new([("A1", 2), ("B", 3), ("A2", 2)]).unwrap();
        let w = Isometry::wiring(&input, &[WireSpec::new("X", ["A2", "A1"]), WireSpec::new("Y", ["B"]).padded(4)]).unwrap();
        assert_eq!(w.output().dims(), vec![4, 4]);
        assert!(isometry_error(w.matrix()) < 1e-15);
        // |A1=1, B=2, A2=0⟩ → |X = (A2,A1) = (0,1) → 1, Y = 2⟩
        let s = PureState::basis(input, 6 + 2 * 2).unwrap().apply(&w).unwrap();
        assert_eq!(s.amplitudes()[4 + 2], c(1.0));
    }

    #[test]
    fn group_then_split_roundtrip() {
        let l = Layout::new([("A", 2), ("B", 3), ("C", 2)]).unwrap();
        let v = CVector::from_fn(12, |i, _| C64::new(i as f64, 0.5));
        let s = PureState::normalized(v, l).unwrap();
        let g = s.group(&["C", "A"], "CA").unwrap();
        assert_eq!(g.layout().labels().collect::<Vec<_>>(), vec!["CA", "B"]);
        let back = g.split("CA", &[("C", 2), ("A", 2)]).unwrap().permute(&["A", "B", "C"]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn uhlmann_requires_room() {
        let psi = max_entangled(2, ("A", "B")).unwrap();
        let phi = max_entangled(2, ("A", "C")).unwrap()
            .tensor(&PureState::basis(Layout::single("D", 2).unwrap(), 0).unwrap())
            .unwrap();
        assert!(matches!(uhlmann_isometry(&psi, &phi, &["A"]), Err(Error::Infeasible(_))));
    }
}
