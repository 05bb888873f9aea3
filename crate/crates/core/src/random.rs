//! Seeded sampling: Haar unitaries and random states.
//!
//! Every parallel consumer derives its generator from `(root seed, stream)`
//! through [`stream_rng`], so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::tensor::{CMatrix, CVector, DensityOperator, Layout, PureState, C64};

/// Independent generator number `stream` of the family rooted at `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed `d × d` unitary: QR of a complex Ginibre matrix with the
/// phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Uniformly random pure state (normalized complex Gaussian vector).
pub fn random_pure_state<R: Rng + ?Sized>(layout: Layout, rng: &mut R) -> Result<PureState> {
    let d = layout.total_dim();
    let v = CVector::from_fn(d, |_, _| complex_gaussian(rng));
    PureState::normalized(v, layout)
}

/// Random density operator of the given rank (induced measure).
pub fn random_density<R: Rng + ?Sized>(layout: Layout, rank: usize, rng: &mut R) -> Result<DensityOperator> {
    let d = layout.total_dim();
    let g = CMatrix::from_fn(d, rank.max(1), |_, _| complex_gaussian(rng));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let m = m.unscale(tr);
    let m = (&m + m.adjoint()).scale(0.5);
    DensityOperator::new(m, layout)
}

/// Random point of the probability simplex (flat Dirichlet).
pub fn random_pmf<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}
