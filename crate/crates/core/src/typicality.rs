//! Entropy-typical sets and the corresponding typical projectors, computed
//! exactly by enumerating type classes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::entropic::shannon_entropy;
use crate::tensor::{hermitian_eigen, trace_norm, CMatrix, DensityOperator, C64, DERIVED_TOL};

/// Largest block length for [`typical_set`].
pub const MAX_BLOCK: usize = 64;
/// Largest number of type classes enumerated by [`typical_set`].
pub const MAX_TYPES: usize = 2_000_000;
/// Largest `dⁿ` for [`typical_projector`].
pub const MAX_PROJECTOR_DIM: usize = 1 << 12;
/// Up to this `dⁿ` the gentle-measurement distance is computed with dense matrices.
pub const DENSE_CHECK_DIM: usize = 256;

/// Default `ε(n) = n^{-1/4}`.
pub fn epsilon_schedule(n: usize) -> f64 {
    (n.max(1) as f64).powf(-0.25)
}

fn validate_pmf(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty alphabet".into()));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidDistribution("negative or non-finite probability".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > DERIVED_TOL {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {s}")));
    }
    Ok(())
}

/// Number of sequences with the given letter counts.
fn multinomial(counts: &[usize]) -> f64 {
    let mut total = 0usize;
    let mut acc = 1.0f64;
    for &c in counts {
        for i in 1..=c {
            total += 1;
            acc = acc * total as f64 / i as f64;
        }
    }
    acc.round()
}

fn binomial_count(n: usize, k: usize) -> f64 {
    multinomial(&[k, n - k])
}

/// All compositions of `n` into `k` nonnegative parts.
fn compositions(n: usize, k: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>) {
    if cur.len() + 1 == k {
        let used: usize = cur.iter().sum();
        cur.push(n - used);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    let used: usize = cur.iter().sum();
    for c in 0..=(n - used) {
        cur.push(c);
        compositions(n, k, out, cur);
        cur.pop();
    }
}

fn type_count(n: usize, k: usize) -> f64 {
    // C(n + k - 1, k - 1)
    binomial_count(n + k - 1, k - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypicalSetReport {
    pub n: usize,
    pub eps: f64,
    pub entropy: f64,
    /// `|T_ε⁽ⁿ⁾|`.
    pub size: f64,
    pub probability_mass: f64,
    /// `2^{n[H + ε]}`.
    pub dim_bound: f64,
    pub size_within_bound: bool,
}

/// Membership test for the typical set of a fixed `(p, n, ε)`.
#[derive(Clone, Debug)]
pub struct TypicalSet {
    log_p: Vec<f64>,
    entropy: f64,
    n: usize,
    eps: f64,
}

impl TypicalSet {
    /// Whether the letter counts of a sequence make it typical.
    pub fn type_is_typical(&self, counts: &[usize]) -> bool {
        let mut s = 0.0;
        for (&c, &lp) in counts.iter().zip(&self.log_p) {
            if c > 0 {
                if lp == f64::NEG_INFINITY {
                    return false;
                }
                s -= c as f64 * lp;
            }
        }
        (s / self.n as f64 - self.entropy).abs() <= self.eps
    }

    pub fn contains(&self, sequence: &[usize]) -> bool {
        if sequence.len() != self.n || sequence.iter().any(|&x| x >= self.log_p.len()) {
            return false;
        }
        let mut counts = vec![0usize; self.log_p.len()];
        for &x in sequence {
            counts[x] += 1;
        }
        self.type_is_typical(&counts)
    }
}

/// Exact size and probability of the `ε`-typical set of `p` at block length `n`.
pub fn typical_set(p: &[f64], n: usize, eps: f64) -> Result<(TypicalSetReport, TypicalSet)> {
    validate_pmf(p)?;
    if n == 0 || n > MAX_BLOCK {
        return Err(Error::Infeasible(format!("block length {n} outside 1..={MAX_BLOCK}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps}")));
    }
    if type_count(n, p.len()) > MAX_TYPES as f64 {
        return Err(Error::Infeasible(format!("too many type classes for n = {n}, |X| = {}", p.len())));
    }
    let entropy = shannon_entropy(p);
    let set = TypicalSet {
        log_p: p.iter().map(|x| x.log2()).collect(),
        entropy,
        n,
        eps,
    };
    let mut types = Vec::new();
    compositions(n, p.len(), &mut types, &mut Vec::new());
    let mut size = 0.0;
    let mut mass = 0.0;
    for counts in &types {
        if set.type_is_typical(counts) {
            let count = multinomial(counts);
            size += count;
            let prob: f64 = counts.iter().zip(p).map(|(&c, &q)| q.powi(c as i32)).product();
            mass += count * prob;
        }
    }
    let dim_bound = 2f64.powf(n as f64 * (entropy + eps));
    let report = TypicalSetReport {
        n,
        eps,
        entropy,
        size,
        probability_mass: mass.min(1.0),
        dim_bound,
        size_within_bound: size <= dim_bound,
    };
    Ok((report, set))
}

/// Projector onto the span of `|x₁⟩⊗…⊗|xₙ⟩` (eigenvectors of `ρ`) over typical `xⁿ`.
#[derive(Clone, Debug)]
pub struct TypicalProjector {
    pub n: usize,
    pub eps: f64,
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors of `ρ`.
    pub eigenvectors: CMatrix,
    /// Typicality of each eigen-index sequence, row-major.
    pub mask: Vec<bool>,
    /// `tr Π`.
    pub rank: usize,
    /// `tr[Π ρ^{⊗n}]`.
    pub mass: f64,
}

impl TypicalProjector {
    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    /// Product-eigenvector of sequence index `idx` in the standard basis.
    fn product_vector(&self, idx: usize) -> Vec<C64> {
        let d = self.eigenvalues.len();
        let mut digits = vec![0usize; self.n];
        let mut r = idx;
        for k in (0..self.n).rev() {
            digits[k] = r % d;
            r /= d;
        }
        let mut v = vec![C64::new(1.0, 0.0)];
        for &x in &digits {
            let col = self.eigenvectors.column(x);
            let mut next = Vec::with_capacity(v.len() * d);
            for a in &v {
                for b in col.iter() {
                    next.push(a * b);
                }
            }
            v = next;
        }
        v
    }

    /// Dense `dⁿ × dⁿ` matrix in the standard basis.
    pub fn to_matrix(&self) -> CMatrix {
        let dim = self.dim();
        let cols: Vec<usize> = (0..dim).filter(|&i| self.mask[i]).collect();
        let mut w = CMatrix::zeros(dim, cols.len());
        for (j, &idx) in cols.iter().enumerate() {
            for (i, z) in self.product_vector(idx).into_iter().enumerate() {
                w[(i, j)] = z;
            }
        }
        &w * w.adjoint()
    }

    /// Probability of each eigen-index sequence under `ρ^{⊗n}`.
    fn sequence_probs(&self) -> Vec<f64> {
        let d = self.eigenvalues.len();
        let mut probs = vec![1.0f64];
        for _ in 0..self.n {
            let mut next = Vec::with_capacity(probs.len() * d);
            for &a in &probs {
                for &l in &self.eigenvalues {
                    next.push(a * l);
                }
            }
            probs = next;
        }
        probs
    }
}

/// Typical projector of `ρ^{⊗n}`.
pub fn typical_projector(rho: &DensityOperator, n: usize, eps: f64) -> Result<TypicalProjector> {
    let d = rho.layout().total_dim();
    let dim = d
        .checked_pow(n as u32)
        .filter(|&v| n > 0 && v <= MAX_PROJECTOR_DIM)
        .ok_or_else(|| Error::Infeasible(format!("{d}^{n} exceeds {MAX_PROJECTOR_DIM}")))?;
    let (vals, vecs) = hermitian_eigen(rho.matrix());
    let vals: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = vals.iter().sum();
    let vals: Vec<f64> = vals.iter().map(|v| v / s).collect();
    let set = TypicalSet {
        log_p: vals.iter().map(|x| if *x > 0.0 { x.log2() } else { f64::NEG_INFINITY }).collect(),
        entropy: shannon_entropy(&vals),
        n,
        eps,
    };
    let mut mask = Vec::with_capacity(dim);
    let mut digits = vec![0usize; n];
    for idx in 0..dim {
        let mut r = idx;
        for k in (0..n).rev() {
            digits[k] = r % d;
            r /= d;
        }
        mask.push(set.contains(&digits));
    }
    let mut proj = TypicalProjector {
        n,
        eps,
        eigenvalues: vals,
        eigenvectors: vecs,
        rank: mask.iter().filter(|&&b| b).count(),
        mask,
        mass: 0.0,
    };
    proj.mass = proj
        .sequence_probs()
        .iter()
        .zip(&proj.mask)
        .filter(|(_, &m)| m)
        .map(|(p, _)| p)
        .sum();
    Ok(proj)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GentleMeasurementReport {
    pub n: usize,
    pub eps: f64,
    pub mass: f64,
    pub rank: usize,
    /// `‖Π ρ^{⊗n} Π / tr[Π ρ^{⊗n}] − ρ^{⊗n}‖₁`.
    pub distance: f64,
    /// `2 √(1 − mass)`.
    pub bound: f64,
    pub dense: bool,
}

/// Trace distance between the renormalized typical projection of `ρ^{⊗n}`
/// and `ρ^{⊗n}` itself.
pub fn gentle_measurement_check(rho: &DensityOperator, n: usize, eps: f64) -> Result<GentleMeasurementReport> {
    let proj = typical_projector(rho, n, eps)?;
    if proj.mass <= 0.0 {
        return Err(Error::InvalidParameter("typical subspace carries no weight".into()));
    }
    let dense = proj.dim() <= DENSE_CHECK_DIM;
    let distance = if dense {
        let mut full = rho.matrix().clone();
        for _ in 1..n {
            full = full.kronecker(rho.matrix());
        }
        let pi = proj.to_matrix();
        let projected = (&pi * &full * &pi).unscale(proj.mass);
        trace_norm(&(projected - full))?
    } else {
        // Both operators are diagonal in the product eigenbasis.
        proj.sequence_probs()
            .iter()
            .zip(&proj.mask)
            .map(|(&p, &m)| if m { (p / proj.mass - p).abs() } else { p })
            .sum()
    };
    Ok(GentleMeasurementReport {
        n,
        eps,
        mass: proj.mass,
        rank: proj.rank,
        distance,
        bound: 2.0 * (1.0 - proj.mass).max(0.0).sqrt(),
        dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Layout;

    #[test]
    fn deterministic_source_has_one_typical_sequence() {
        let (r, set) = typical_set(&[1.0, 0.0], 10, 0.1).unwrap();
        assert_eq!(r.size, 1.0);
        assert!((r.probability_mass - 1.0).abs() < 1e-15);
        assert!(set.contains(&[0; 10]));
        assert!(!set.contains(&[1; 10]));
    }

    #[test]
    fn uniform_bit_everything_typical() {
        let (r, _) = typical_set(&[0.5, 0.5], 16, 1e-6).unwrap();
        assert_eq!(r.size, 65536.0);
        assert!((r.probability_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(typical_set(&[0.5, 0.6], 4, 0.1), Err(Error::InvalidDistribution(_))));
        assert!(matches!(typical_set(&[0.5, 0.5], 0, 0.1), Err(Error::Infeasible(_))));
        assert!(matches!(typical_set(&[0.5, 0.5], 1000, 0.1), Err(Error::Infeasible(_))));
        let rho = DensityOperator::maximally_mixed(Layout::single("A", 2).unwrap());
        assert!(matches!(typical_projector(&rho, 13, 0.1), Err(Error::Infeasible(_))));
    }

    #[test]
    fn multinomials() {
        assert_eq!(multinomial(&[10, 10]), 184756.0);
        assert_eq!(multinomial(&[1, 2, 3]), 60.0);
        assert_eq!(type_count(20, 2), 21.0);
    }

    #[test]
    fn schedule() {
        assert!((epsilon_schedule(16) - 0.5).abs() < 1e-15);
    }
}
