#![allow(dead_code)]

//! Reference implementations used as oracles. They share nothing with the
//! library beyond the matrix types: eigenvalues come from a cyclic Jacobi
//! sweep on the real embedding, partial traces from explicit index loops.

use qbc_core::random::stream_rng;
use qbc_core::tensor::{CMatrix, C64};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 0xfeed)
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn jacobi_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let n = h.nrows();
    let m = 2 * n;
    // [[X, -Y], [Y, X]] has the spectrum of X + iY, each value twice.
    let mut a = vec![vec![0.0f64; m]; m];
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            a[i][j] = z.re;
            a[i + n][j + n] = z.re;
            a[i][j + n] = -z.im;
            a[i + n][j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..m {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..m).map(|i| a[i][i]).collect();
    d.sort_by(f64::total_cmp);
    d.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

pub fn oracle_entropy(rho: &CMatrix) -> f64 {
    jacobi_eigenvalues(rho).iter().filter(|&&l| l > 1e-12).map(|&l| -l * l.log2()).sum()
}

pub fn oracle_trace_norm(h: &CMatrix) -> f64 {
    jacobi_eigenvalues(h).iter().map(|l| l.abs()).sum()
}

/// Partial trace keeping the factor positions `keep` (ascending) of a
/// row-major product space with factor dimensions `dims`.
pub fn naive_partial_trace(rho: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let total: usize = dims.iter().product();
    let kd: usize = keep.iter().map(|&k| dims[k]).product();
    let digits = |mut idx: usize| {
        let mut d = vec![0usize; dims.len()];
        for k in (0..dims.len()).rev() {
            d[k] = idx % dims[k];
            idx /= dims[k];
        }
        d
    };
    let kept_index = |d: &[usize]| keep.iter().fold(0usize, |acc, &k| acc * dims[k] + d[k]);
    let mut out = CMatrix::zeros(kd, kd);
    for i in 0..total {
        let di = digits(i);
        for j in 0..total {
            let dj = digits(j);
            let traced_equal = (0..dims.len()).filter(|k| !keep.contains(k)).all(|k| di[k] == dj[k]);
            if traced_equal {
                out[(kept_index(&di), kept_index(&dj))] += rho[(i, j)];
            }
        }
    }
    out
}

pub fn outer(v: &[C64]) -> CMatrix {
    CMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn binary_entropy(p: f64) -> f64 {
    [p, 1.0 - p].iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

pub fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

pub fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
