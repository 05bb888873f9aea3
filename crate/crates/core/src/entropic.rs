//! Von Neumann entropies and the information quantities derived from them.
//! All values are in bits.

use crate::error::{Error, Result};
use crate::tensor::{hermitian_eigenvalues, DensityOperator, LabeledState, PureState};

/// Eigenvalues below this are treated as zero (`0 log 0 = 0`).
pub const CLIP_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReport {
    pub value: f64,
    pub spectrum: Vec<f64>,
    /// Total absolute weight of the discarded eigenvalues.
    pub clipped_mass: f64,
}

pub fn entropy_of_spectrum(spectrum: &[f64]) -> EntropyReport {
    let mut value = 0.0;
    let mut clipped_mass = 0.0;
    for &l in spectrum {
        if l > CLIP_THRESHOLD {
            value -= l * l.log2();
        } else {
            clipped_mass += l.abs();
        }
    }
    EntropyReport { value: value.max(0.0), spectrum: spectrum.to_vec(), clipped_mass }
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> EntropyReport {
    entropy_of_spectrum(&hermitian_eigenvalues(rho.matrix()))
}

/// `tr ρ²`.
pub fn purity(rho: &DensityOperator) -> f64 {
    let m = rho.matrix();
    // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Nonzero spectrum of the marginal on `labels`. For pure states the smaller
/// side of the bipartition is diagonalized.
pub fn marginal_spectrum<S: AsRef<str>>(state: &LabeledState, labels: &[S]) -> Result<Vec<f64>> {
    match state {
        LabeledState::Pure(p) => pure_marginal_spectrum(p, labels),
        LabeledState::Mixed(m) => Ok(hermitian_eigenvalues(m.partial_trace(labels)?.matrix())),
    }
}

fn pure_marginal_spectrum<S: AsRef<str>>(p: &PureState, labels: &[S]) -> Result<Vec<f64>> {
    let mut pos = p.layout().positions(labels)?;
    pos.sort_unstable();
    let m = p.bipartite_matrix(&pos);
    let gram = if m.nrows() <= m.ncols() { &m * m.adjoint() } else { m.adjoint() * &m };
    Ok(hermitian_eigenvalues(&gram))
}

/// `H(labels)` of the state's marginal.
pub fn entropy<S: AsRef<str>>(state: &LabeledState, labels: &[S]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    Ok(entropy_of_spectrum(&marginal_spectrum(state, labels)?).value)
}

/// `tr[(ρ^{labels})²]`.
pub fn marginal_purity<S: AsRef<str>>(state: &LabeledState, labels: &[S]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(1.0);
    }
    Ok(marginal_spectrum(state, labels)?.iter().map(|l| l * l).sum())
}

fn check_disjoint<S: AsRef<str>>(sets: &[&[S]]) -> Result<()> {
    let mut seen: Vec<&str> = Vec::new();
    for set in sets {
        for l in set.iter() {
            let l = l.as_ref();
            if seen.contains(&l) {
                return Err(Error::InvalidParameter(format!("label `{l}` appears in more than one subset")));
            }
            seen.push(l);
        }
    }
    Ok(())
}

fn union<'a, S: AsRef<str>>(sets: &[&'a [S]]) -> Vec<&'a str> {
    sets.iter().flat_map(|s| s.iter().map(|l| l.as_ref())).collect()
}

/// `I(A;B) = H(A) + H(B) − H(AB)`.
pub fn mutual_information<S: AsRef<str>>(state: &LabeledState, a: &[S], b: &[S]) -> Result<f64> {
    check_disjoint(&[a, b])?;
    let ab = union(&[a, b]);
    Ok(entropy(state, a)? + entropy(state, b)? - entropy(state, &ab)?)
}

/// `I(A⟩B) = H(B) − H(AB)`.
pub fn coherent_information<S: AsRef<str>>(state: &LabeledState, a: &[S], b: &[S]) -> Result<f64> {
    check_disjoint(&[a, b])?;
    let ab = union(&[a, b]);
    Ok(entropy(state, b)? - entropy(state, &ab)?)
}

/// `J(A_K) = Σ_j H(A_j) − H(A_{j₁}…A_{j_|K|})`.
pub fn multiparty_correlation<S: AsRef<str>>(state: &LabeledState, subsets: &[&[S]]) -> Result<f64> {
    check_disjoint(subsets)?;
    let mut total = 0.0;
    for s in subsets {
        total += entropy(state, s)?;
    }
    Ok(total - entropy(state, &union(subsets))?)
}

/// Binary entropy `h₂(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    shannon_entropy(&[p, 1.0 - p])
}

/// Shannon entropy in bits of a (not necessarily normalized) weight vector.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}
