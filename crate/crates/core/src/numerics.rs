//! Dense complex vector/matrix kernel: Gram-Schmidt, operator norm,
//! unitarity checks, two-level decomposition.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex<T>>>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex<T>] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn dagger(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// Matrix product, skipping exact zeros of `self` in the inner loop so
    /// that banded and block operands cost far less than the dense cube.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let zero = T::zero();
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.re == zero && a.im == zero {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d += a * *s;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in mul_vec");
        (0..self.rows).map(|i| dot_unconj(self.row(i), v)).collect()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (d, s) in out.data.iter_mut().zip(other.data.iter()) {
            *d -= *s;
        }
        out
    }

    /// Max absolute entry together with its position.
    pub fn max_abs_entry(&self) -> (T, usize, usize) {
        let mut best = (T::zero(), 0, 0);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j).norm();
                if a > best.0 {
                    best = (a, i, j);
                }
            }
        }
        best
    }

    pub fn max_abs(&self) -> T {
        self.max_abs_entry().0
    }
}

/// `<a, b>` with the first argument conjugated.
pub fn dot<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * *y).sum()
}

fn dot_unconj<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b.iter()).map(|(x, y)| *x * *y).sum()
}

pub fn norm<T: Scalar>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Result of [`gram_schmidt`]: the orthonormal frame (frozen prefix first)
/// and the indices of the dropped candidates.
#[derive(Clone, Debug)]
pub struct GramSchmidtOutput<T> {
    pub frame: Vec<Vec<Complex<T>>>,
    pub dropped: Vec<usize>,
}

/// Orthonormalize `candidates` in order against the already-orthonormal
/// `frozen_prefix` leading vectors, which are passed through unmodified.
///
/// Modified Gram-Schmidt with one re-orthogonalization pass. A candidate
/// whose post-projection norm falls below `drop_tol` is dropped and its
/// index reported.
pub fn gram_schmidt<T: Scalar>(
    candidates: &[Vec<Complex<T>>],
    frozen_prefix: usize,
    drop_tol: T,
) -> Result<GramSchmidtOutput<T>> {
    assert!(drop_tol > T::zero(), "drop_tol must be positive");
    assert!(frozen_prefix <= candidates.len());
    let ortho_tol = T::real(1e-12);
    let mut max_offense = T::zero();
    for i in 0..frozen_prefix {
        for j in 0..=i {
            let d = dot(&candidates[i], &candidates[j]).norm();
            let expected = if i == j { T::one() } else { T::zero() };
            let offense = (d - expected).abs();
            if offense > max_offense {
                max_offense = offense;
            }
        }
    }
    if max_offense > ortho_tol {
        return Err(Error::FrozenPrefixNotOrthonormal {
            max_offense: max_offense.as_f64(),
        });
    }

    let mut frame: Vec<Vec<Complex<T>>> = candidates[..frozen_prefix].to_vec();
    let mut dropped = Vec::new();
    for (idx, cand) in candidates.iter().enumerate().skip(frozen_prefix) {
        let mut v = cand.clone();
        for _ in 0..2 {
            for f in &frame {
                let c = dot(f, &v);
                for (x, y) in v.iter_mut().zip(f.iter()) {
                    *x -= c * *y;
                }
            }
        }
        let n = norm(&v);
        if n < drop_tol {
            dropped.push(idx);
        } else {
            let inv = Complex::new(T::one() / n, T::zero());
            for x in v.iter_mut() {
                *x *= inv;
            }
            frame.push(v);
        }
    }
    Ok(GramSchmidtOutput { frame, dropped })
}

/// Largest singular value of `a`.
///
/// Full cyclic-Jacobi eigendecomposition of the Gram matrix at small
/// dimensions; blocked power iteration on a sparse view for larger inputs,
/// where the full decomposition would dominate the runtime budget.
pub fn operator_norm<T: Scalar>(a: &Mat<T>) -> T {
    if a.rows == 0 || a.cols == 0 {
        return T::zero();
    }
    let small = a.rows.min(a.cols);
    if small <= 160 {
        let gram = if a.rows >= a.cols {
            a.dagger().mul(a)
        } else {
            a.mul(&a.dagger())
        };
        let eigs = jacobi_hermitian_eigenvalues(&gram);
        let lmax = eigs.into_iter().fold(T::zero(), T::max);
        lmax.max(T::zero()).sqrt()
    } else {
        power_iteration_top_sv(a)
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.
fn jacobi_hermitian_eigenvalues<T: Scalar>(b: &Mat<T>) -> Vec<T> {
    let d = b.rows;
    let mut m = b.clone();
    let scale = m.max_abs().max(T::min_positive_value());
    let stop = T::real(1e-15) * scale;
    for _ in 0..60 {
        let mut off = T::zero();
        for p in 0..d {
            for q in (p + 1)..d {
                off = off.max(m.get(p, q).norm());
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let beta = m.get(p, q);
                let babs = beta.norm();
                if babs <= stop * T::real(1e-2) {
                    continue;
                }
                let phase = beta / Complex::new(babs, T::zero());
                let alpha = m.get(p, p).re;
                let gamma = m.get(q, q).re;
                let tau = (gamma - alpha) / (T::real(2.0) * babs);
                let sign = if tau >= T::zero() { T::one() } else { -T::one() };
                let t = -sign / (tau.abs() + (T::one() + tau * tau).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                // Column update by G, then row update by G^dagger.
                for i in 0..d {
                    let aip = m.get(i, p);
                    let aiq = m.get(i, q);
                    m.set(i, p, aip * c + aiq * phase.conj() * s);
                    m.set(i, q, aiq * c - aip * phase * s);
                }
                for j in 0..d {
                    let apj = m.get(p, j);
                    let aqj = m.get(q, j);
                    m.set(p, j, apj * c + aqj * phase * s);
                    m.set(q, j, aqj * c - apj * phase.conj() * s);
                }
            }
        }
    }
    (0..d).map(|i| m.get(i, i).re).collect()
}

/// Sparse row view used by the power-iteration path.
struct SparseRows<T> {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<(usize, Complex<T>)>>,
}

impl<T: Scalar> SparseRows<T> {
    fn of(a: &Mat<T>) -> Self {
        let zero = T::zero();
        let entries = (0..a.rows())
            .map(|i| {
                a.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, z)| z.re != zero || z.im != zero)
                    .map(|(j, z)| (j, *z))
                    .collect()
            })
            .collect();
        SparseRows {
            rows: a.rows(),
            cols: a.cols(),
            entries,
        }
    }

    fn apply(&self, v: &[Complex<T>], out: &mut [Complex<T>]) {
        for (i, row) in self.entries.iter().enumerate() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for &(j, z) in row {
                acc += z * v[j];
            }
            out[i] = acc;
        }
    }

    fn apply_dagger(&self, v: &[Complex<T>], out: &mut [Complex<T>]) {
        for o in out.iter_mut() {
            *o = Complex::new(T::zero(), T::zero());
        }
        for (i, row) in self.entries.iter().enumerate() {
            let vi = v[i];
            for &(j, z) in row {
                out[j] += z.conj() * vi;
            }
        }
    }
}

fn power_iteration_top_sv<T: Scalar>(a: &Mat<T>) -> T {
    let sp = SparseRows::of(a);
    let n = sp.cols;
    // Deterministic quasi-random block of 3 start vectors.
    let block = 3usize.min(n);
    let mut vs: Vec<Vec<Complex<T>>> = (0..block)
        .map(|b| {
            (0..n)
                .map(|i| {
                    let x = ((i * 2654435761 + b * 40503 + 12345) % 1000003) as f64 / 1000003.0;
                    let y = ((i * 1597334677 + b * 69069 + 54321) % 999983) as f64 / 999983.0;
                    Complex::new(T::real(2.0 * x - 1.0), T::real(2.0 * y - 1.0))
                })
                .collect()
        })
        .collect();
    orthonormalize_block(&mut vs);
    let mut tmp = vec![Complex::new(T::zero(), T::zero()); sp.rows];
    let mut prev = T::zero();
    let mut stable = 0;
    let mut top = T::zero();
    for _ in 0..5000 {
        for v in vs.iter_mut() {
            sp.apply(v, &mut tmp);
            sp.apply_dagger(&tmp, v);
        }
        orthonormalize_block(&mut vs);
        if vs.is_empty() {
            // The whole block was annihilated: the operator is (numerically)
            // zero on it, so the norm is zero.
            return T::zero();
        }
        // Rayleigh quotient of the leading block vector for A^dagger A.
        sp.apply(&vs[0], &mut tmp);
        let lam = tmp.iter().map(|z| z.norm_sqr()).sum::<T>();
        top = lam.max(T::zero()).sqrt();
        let delta = (top - prev).abs();
        if delta <= T::real(1e-14) * top.max(T::min_positive_value()) {
            stable += 1;
            if stable >= 4 {
                break;
            }
        } else {
            stable = 0;
        }
        prev = top;
    }
    top
}

fn orthonormalize_block<T: Scalar>(vs: &mut Vec<Vec<Complex<T>>>) {
    let mut kept: Vec<Vec<Complex<T>>> = Vec::with_capacity(vs.len());
    for v in vs.iter() {
        let mut w = v.clone();
        for f in &kept {
            let c = dot(f, &w);
            for (x, y) in w.iter_mut().zip(f.iter()) {
                *x -= c * *y;
            }
        }
        let n = norm(&w);
        if n > T::real(1e-30) {
            let inv = Complex::new(T::one() / n, T::zero());
            for x in w.iter_mut() {
                *x *= inv;
            }
            kept.push(w);
        }
    }
    *vs = kept;
}

/// Unitarity check: residual is `operator_norm(A^dagger A - I)`.
pub fn is_unitary<T: Scalar>(a: &Mat<T>, tol: T) -> Result<(bool, T)> {
    if a.rows() != a.cols() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let gram = a.dagger().mul(a);
    let residual = operator_norm(&gram.sub(&Mat::identity(a.rows())));
    Ok((residual <= tol, residual))
}

/// A unitary differing from the identity only on the coordinates `i`, `j`.
#[derive(Clone, Debug)]
pub struct TwoLevel<T> {
    pub i: usize,
    pub j: usize,
    /// 2x2 action on span{e_i, e_j}, rows indexed (i, j).
    pub m: [[Complex<T>; 2]; 2],
}

impl<T: Scalar> TwoLevel<T> {
    pub fn to_dense(&self, dim: usize) -> Mat<T> {
        let mut out = Mat::identity(dim);
        out.set(self.i, self.i, self.m[0][0]);
        out.set(self.i, self.j, self.m[0][1]);
        out.set(self.j, self.i, self.m[1][0]);
        out.set(self.j, self.j, self.m[1][1]);
        out
    }

    /// In-place left multiplication of a dense matrix by this factor.
    fn apply_left(&self, a: &mut Mat<T>) {
        for col in 0..a.cols() {
            let x = a.get(self.i, col);
            let y = a.get(self.j, col);
            a.set(self.i, col, self.m[0][0] * x + self.m[0][1] * y);
            a.set(self.j, col, self.m[1][0] * x + self.m[1][1] * y);
        }
    }
}

/// Decompose a unitary into two-level factors.
///
/// The factors, multiplied in application order (first factor applied
/// first), reconstruct `u`. At most d(d-1)/2 rotation factors plus d phase
/// fixups are emitted.
pub fn two_level_decompose<T: Scalar>(u: &Mat<T>) -> Result<Vec<TwoLevel<T>>> {
    let (ok, residual) = is_unitary(u, T::real(1e-10))?;
    if !ok {
        return Err(Error::NotUnitary {
            residual: residual.as_f64(),
            tol: 1e-10,
        });
    }
    let d = u.rows();
    let near_id = u.sub(&Mat::identity(d)).max_abs() <= T::real(1e-12);
    if near_id {
        return Ok(Vec::new());
    }
    if d == 2 {
        return Ok(vec![TwoLevel {
            i: 0,
            j: 1,
            m: [
                [u.get(0, 0), u.get(0, 1)],
                [u.get(1, 0), u.get(1, 1)],
            ],
        }]);
    }

    let mut w = u.clone();
    let mut rotations: Vec<TwoLevel<T>> = Vec::new();
    for col in 0..d {
        for row in (col + 1)..d {
            let b = w.get(row, col);
            if b.norm() <= T::real(1e-14) {
                continue;
            }
            let a = w.get(col, col);
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let inv = Complex::new(T::one() / r, T::zero());
            // Rotation sending (a, b) -> (r, 0) on rows (col, row).
            let rot = TwoLevel {
                i: col,
                j: row,
                m: [
                    [a.conj() * inv, b.conj() * inv],
                    [-b * inv, a * inv],
                ],
            };
            rot.apply_left(&mut w);
            rotations.push(rot);
        }
    }

    // W is now diagonal with unit-modulus phases; U = R_1^dag ... R_m^dag W.
    let mut factors: Vec<TwoLevel<T>> = Vec::new();
    for i in 0..d {
        let ph = w.get(i, i);
        if (ph - Complex::new(T::one(), T::zero())).norm() > T::real(1e-13) {
            let j = if i + 1 < d { i + 1 } else { i - 1 };
            let one = Complex::new(T::one(), T::zero());
            let zero = Complex::new(T::zero(), T::zero());
            factors.push(TwoLevel {
                i,
                j,
                m: [[ph, zero], [zero, one]],
            });
        }
    }
    for rot in rotations.into_iter().rev() {
        factors.push(TwoLevel {
            i: rot.i,
            j: rot.j,
            m: [
                [rot.m[0][0].conj(), rot.m[1][0].conj()],
                [rot.m[0][1].conj(), rot.m[1][1].conj()],
            ],
        });
    }
    Ok(factors)
}

/// Product of two-level factors in application order (first applied first).
pub fn two_level_product<T: Scalar>(factors: &[TwoLevel<T>], dim: usize) -> Mat<T> {
    let mut acc = Mat::identity(dim);
    for f in factors {
        f.apply_left(&mut acc);
    }
    acc
}

/// Seeded Haar-like random unitary (orthonormalized Gaussian-ish columns).
pub fn random_unitary(d: usize, seed: u64) -> Mat<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<Complex<f64>>> = (0..d)
        .map(|_| {
            (0..d)
                .map(|_| Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect()
        })
        .collect();
    let out = gram_schmidt(&cols, 0, 1e-9).expect("random columns orthonormalize");
    assert_eq!(out.frame.len(), d, "degenerate random draw");
    Mat::from_rows(out.frame).dagger()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent oracle: plain single-vector power iteration with a fixed
    /// deterministic start, no blocking, no Jacobi.
    fn opnorm_oracle(a: &Mat<f64>) -> f64 {
        let n = a.cols();
        let mut v: Vec<Complex64> = (0..n)
            .map(|i| c((i as f64 * 0.7391).sin() + 0.2, (i as f64 * 1.173).cos()))
            .collect();
        let mut lam = 0.0;
        for _ in 0..20000 {
            let av = a.mul_vec(&v);
            let mut w = vec![c(0.0, 0.0); n];
            for i in 0..a.rows() {
                let x = av[i];
                for j in 0..n {
                    w[j] += a.get(i, j).conj() * x;
                }
            }
            let nw = norm(&w);
            if nw == 0.0 {
                return 0.0;
            }
            for x in w.iter_mut() {
                *x /= c(nw, 0.0);
            }
            let prev = lam;
            lam = nw;
            v = w;
            if (lam - prev).abs() <= 1e-15 * lam {
                break;
            }
        }
        lam.sqrt()
    }

    #[test]
    fn gram_schmidt_already_orthonormal() {
        let cands = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
        let out = gram_schmidt(&cands, 0, 1e-9).unwrap();
        assert_eq!(out.dropped.len(), 0);
        assert_eq!(out.frame.len(), 2);
        assert!((out.frame[0][0].re - 1.0).abs() < 1e-15);
        assert!((out.frame[1][1].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gram_schmidt_orthogonalizes() {
        let cands = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]];
        let out = gram_schmidt(&cands, 0, 1e-9).unwrap();
        assert_eq!(out.dropped.len(), 0);
        assert!((out.frame[1][0].norm()) < 1e-14);
        assert!((out.frame[1][1].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gram_schmidt_drops_dependent() {
        let cands = vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(2.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ];
        let out = gram_schmidt(&cands, 0, 1e-9).unwrap();
        assert_eq!(out.dropped, vec![1]);
        assert_eq!(out.frame.len(), 2);
    }

    #[test]
    fn gram_schmidt_rejects_bad_frozen_prefix() {
        let cands = vec![vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
        let err = gram_schmidt(&cands, 1, 1e-9).unwrap_err();
        match err {
            Error::FrozenPrefixNotOrthonormal { max_offense } => assert!(max_offense > 0.5),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn gram_schmidt_spans_candidates() {
        // Oracle: rank of the candidate set from the eigenvalues of its Gram
        // matrix, then projection residual of each candidate onto the frame.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cands: Vec<Vec<Complex64>> = (0..8)
            .map(|_| {
                (0..6)
                    .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    .collect()
            })
            .collect();
        let gram = Mat::from_fn(8, 8, |i, j| dot(&cands[i], &cands[j]));
        let rank = jacobi_hermitian_eigenvalues(&gram)
            .into_iter()
            .filter(|l| *l > 1e-10)
            .count();
        let out = gram_schmidt(&cands, 0, 1e-9).unwrap();
        assert_eq!(out.frame.len(), rank);
        for cand in &cands {
            let mut resid = cand.clone();
            for f in &out.frame {
                let p = dot(f, &resid);
                for (x, y) in resid.iter_mut().zip(f.iter()) {
                    *x -= p * *y;
                }
            }
            assert!(norm(&resid) <= 1e-10, "candidate escapes frame span");
        }
    }

    #[test]
    fn gram_schmidt_frame_orthonormality_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let n = 4 + trial % 5;
            let cands: Vec<Vec<Complex64>> = (0..n + 2)
                .map(|_| {
                    (0..n)
                        .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                        .collect()
                })
                .collect();
            let out = gram_schmidt(&cands, 0, 1e-9).unwrap();
            for (i, a) in out.frame.iter().enumerate() {
                for (j, b) in out.frame.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(a, b).norm() - expected).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn operator_norm_identity_and_diag() {
        assert!((operator_norm(&Mat::<f64>::identity(5)) - 1.0).abs() < 1e-12);
        let mut d = Mat::<f64>::zeros(2, 2);
        d.set(0, 0, c(2.0, 0.0));
        d.set(1, 1, c(1.0, 0.0));
        assert!((operator_norm(&d) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_matches_eigensolver_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = Mat::from_fn(16, 16, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let got = operator_norm(&a);
        let want = opnorm_oracle(&a);
        assert!((got - want).abs() <= 1e-9 * want, "got {got}, want {want}");
    }

    #[test]
    fn operator_norm_power_path_matches_small_path() {
        // Force the sparse power-iteration path with a 200-dim banded matrix
        // and compare against the Jacobi path on the same matrix shrunk via
        // an orthogonal embedding: simpler, compare to oracle directly.
        let mut a = Mat::<f64>::zeros(200, 200);
        for i in 0..200 {
            a.set(i, i, c(1.0 + (i as f64 * 0.01), 0.0));
            if i + 1 < 200 {
                a.set(i, i + 1, c(0.3, 0.1));
            }
        }
        let got = operator_norm(&a);
        let want = opnorm_oracle(&a);
        assert!((got - want).abs() <= 1e-9 * want, "got {got}, want {want}");
    }

    #[test]
    fn is_unitary_cases() {
        let (ok, r) = is_unitary(&Mat::<f64>::identity(4), 1e-10).unwrap();
        assert!(ok && r < 1e-14);
        let mut d = Mat::<f64>::zeros(2, 2);
        d.set(0, 0, c(1.0, 0.0));
        d.set(1, 1, c(2.0, 0.0));
        let (ok, r) = is_unitary(&d, 1e-10).unwrap();
        assert!(!ok);
        assert!((r - 3.0).abs() < 1e-10);
        assert!(matches!(
            is_unitary(&Mat::<f64>::zeros(2, 3), 1e-10),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn unitary_has_unit_operator_norm() {
        for seed in 0..5 {
            let u = random_unitary(8, seed);
            let (ok, _) = is_unitary(&u, 1e-10).unwrap();
            assert!(ok);
            assert!((operator_norm(&u) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn two_level_identity_is_empty() {
        assert!(two_level_decompose(&Mat::<f64>::identity(4)).unwrap().is_empty());
    }

    #[test]
    fn two_level_2x2_single_factor() {
        let u = random_unitary(2, 3);
        let fs = two_level_decompose(&u).unwrap();
        assert_eq!(fs.len(), 1);
        assert!(two_level_product(&fs, 2).sub(&u).max_abs() < 1e-14);
    }

    #[test]
    fn two_level_4x4_bounded_and_reconstructs() {
        let u = random_unitary(4, 11);
        let fs = two_level_decompose(&u).unwrap();
        assert!(fs.len() <= 10, "got {} factors", fs.len());
        let resid = operator_norm(&two_level_product(&fs, 4).sub(&u));
        assert!(resid <= 1e-10, "residual {resid}");
    }

    #[test]
    fn two_level_rejects_non_unitary() {
        let mut d = Mat::<f64>::zeros(2, 2);
        d.set(0, 0, c(2.0, 0.0));
        d.set(1, 1, c(1.0, 0.0));
        assert!(matches!(two_level_decompose(&d), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn two_level_roundtrip_many_dims() {
        // 25 random unitaries per dimension in {2, 4, 8, 16}.
        for (di, d) in [2usize, 4, 8, 16].iter().enumerate() {
            for s in 0..25u64 {
                let u = random_unitary(*d, 1000 + 100 * di as u64 + s);
                let fs = two_level_decompose(&u).unwrap();
                assert!(fs.len() <= d * (d - 1) / 2 + d);
                for f in &fs {
                    let dense = f.to_dense(*d);
                    let mut diff = dense.sub(&Mat::identity(*d));
                    for idx in [f.i, f.j] {
                        for jdx in [f.i, f.j] {
                            diff.set(idx, jdx, c(0.0, 0.0));
                        }
                    }
                    assert!(diff.max_abs() == 0.0, "factor not two-level");
                }
                let resid = operator_norm(&two_level_product(&fs, *d).sub(&u));
                assert!(resid <= 1e-10, "d={d} seed={s} residual {resid}");
            }
        }
    }

    #[test]
    fn kernel_is_scalar_generic_f32() {
        let cands: Vec<Vec<Complex<f32>>> = vec![
            vec![Complex::new(1.0f32, 0.0), Complex::new(1.0, 0.0)],
            vec![Complex::new(0.0f32, 0.0), Complex::new(1.0, 0.0)],
        ];
        let out = gram_schmidt(&cands, 0, 1e-4f32).unwrap();
        assert_eq!(out.frame.len(), 2);
        let id = Mat::<f32>::identity(4);
        assert!((operator_norm(&id) - 1.0).abs() < 1e-5);
        let (ok, _) = is_unitary(&id, 1e-5f32).unwrap();
        assert!(ok);
    }
}
