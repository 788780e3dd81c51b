//! Classical reference pyramid transform (the matrix oracle the compiled
//! circuits are tested against) and the cascade iteration for sampled
//! scaling/wavelet functions.

use num_complex::Complex;

use crate::banded::BandStencil;
use crate::error::{Error, Result};
use crate::numerics::{is_unitary, Mat};
use crate::{C64, CVector};

/// Pyramid analysis: at each level apply the periodized filter to the
/// retained smoothed block, then move even outputs (smoothed) to the front
/// and odd outputs (details) behind them. Output layout: final scaling
/// block first, then details coarsest to finest — identical to the
/// compiled circuit's sector layout.
pub fn dwt_pyramid(x: &[C64], s: &BandStencil<f64>, min_size: usize) -> Result<CVector> {
    let n = x.len();
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::OutOfRange(format!("input length {n} is not a power of two >= 2")));
    }
    if min_size < 2 {
        return Err(Error::OutOfRange(format!("min_size {min_size} < 2")));
    }
    if min_size > n {
        return Err(Error::OutOfRange(format!(
            "min_size {min_size} exceeds input length {n}"
        )));
    }
    let mut v: CVector = x.to_vec();
    let mut n_s = n;
    while n_s >= min_size && n_s >= 2 {
        let m = level_filter(s, n_s)?;
        let y = m.mul_vec(&v[..n_s].to_vec());
        for (i, val) in y.iter().enumerate() {
            // Even outputs are the smoothed half, odd the details.
            let dst = (i % 2) * (n_s / 2) + i / 2;
            v[dst] = *val;
        }
        n_s /= 2;
    }
    Ok(v)
}

/// Exact inverse of `dwt_pyramid` (adjoint filters, reversed order).
pub fn idwt_pyramid(coeffs: &[C64], s: &BandStencil<f64>, min_size: usize) -> Result<CVector> {
    let n = coeffs.len();
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::OutOfRange(format!("input length {n} is not a power of two >= 2")));
    }
    // Reconstruct the level sizes the forward pass visited.
    let mut sizes = Vec::new();
    let mut n_s = n;
    while n_s >= min_size && n_s >= 2 {
        sizes.push(n_s);
        n_s /= 2;
    }
    if sizes.is_empty() {
        return Err(Error::OutOfRange(format!(
            "min_size {min_size} exceeds input length {n}"
        )));
    }
    let mut v: CVector = coeffs.to_vec();
    for &n_s in sizes.iter().rev() {
        let mut y = vec![Complex::new(0.0, 0.0); n_s];
        for (i, slot) in y.iter_mut().enumerate() {
            let src = (i % 2) * (n_s / 2) + i / 2;
            *slot = v[src];
        }
        let m = level_filter(s, n_s)?;
        let back = m.dagger().mul_vec(&y);
        v[..n_s].copy_from_slice(&back);
    }
    Ok(v)
}

fn level_filter(s: &BandStencil<f64>, n_s: usize) -> Result<Mat<f64>> {
    let m = s.materialize_relaxed(n_s)?;
    let (ok, residual) = is_unitary(&m, 1e-10)?;
    if !ok {
        return Err(Error::NotUnitary { residual, tol: 1e-10 });
    }
    Ok(m)
}

/// Sampled scaling function phi and wavelet psi from the cascade iteration.
#[derive(Clone, Debug)]
pub struct CascadeOutput {
    /// Sample positions for phi (support [0, taps-1]).
    pub phi_x: Vec<f64>,
    pub phi: Vec<f64>,
    /// Sample positions for psi.
    pub psi_x: Vec<f64>,
    pub psi: Vec<f64>,
    pub grid_per_unit: usize,
    pub iterations: usize,
}

/// Cascade iteration phi <- sum_n c_n phi(2x - n) starting from the unit
/// box on [0,1), with the smoothing taps rescaled so sum c_n = 2 (the
/// refinement fixed-point normalization); psi(x) = sum_k (-1)^k c_{1-k}
/// phi(2x - k) over all k with c_{1-k} defined.
pub fn cascade(s: &BandStencil<f64>, iterations: usize, grid_per_unit: usize) -> Result<CascadeOutput> {
    if iterations < 1 {
        return Err(Error::OutOfRange("iterations must be >= 1".into()));
    }
    if grid_per_unit < 2 {
        return Err(Error::OutOfRange("grid_per_unit must be >= 2".into()));
    }
    let row = s
        .rows
        .first()
        .ok_or_else(|| Error::Inadmissible("stencil has no rows".into()))?;
    let lo = *row.keys().next().expect("nonempty row");
    let hi = *row.keys().last().expect("nonempty row");
    let taps = (hi - lo + 1) as usize;
    if taps < 2 {
        return Err(Error::Inadmissible(
            "cascade needs at least two smoothing taps".into(),
        ));
    }
    // Shift taps to start at 0 and rescale to sum 2.
    let c: Vec<f64> = (0..taps)
        .map(|i| row.get(&(lo + i as i64)).map(|z| z.re).unwrap_or(0.0))
        .collect();
    let sum: f64 = c.iter().sum();
    if sum.abs() < 1e-12 {
        return Err(Error::Inadmissible("smoothing taps sum to zero".into()));
    }
    let c: Vec<f64> = c.iter().map(|v| v * 2.0 / sum).collect();

    let g = grid_per_unit;
    let support = taps - 1; // units
    let len = support * g + 1;
    let mut phi: Vec<f64> = (0..len)
        .map(|i| if (i as f64) / (g as f64) < 1.0 { 1.0 } else { 0.0 })
        .collect();
    for _ in 0..iterations {
        let mut next = vec![0.0f64; len];
        for (i, slot) in next.iter_mut().enumerate() {
            // phi(2x - n) at x = i/g is sample index 2i - n*g.
            for (n_tap, cn) in c.iter().enumerate() {
                let idx = 2 * i as i64 - (n_tap * g) as i64;
                if idx >= 0 && (idx as usize) < len {
                    *slot += cn * phi[idx as usize];
                }
            }
        }
        phi = next;
    }

    // psi on x in [(2 - taps)/2, taps/2].
    let k_lo = 1 - (taps as i64 - 1);
    let k_hi = 1i64;
    let x0 = k_lo as f64 / 2.0;
    let psi_len = ((k_hi - k_lo) as usize * g) / 2 + support * g / 2 + 1;
    let mut psi_x = Vec::with_capacity(psi_len);
    let mut psi = Vec::with_capacity(psi_len);
    for i in 0..psi_len {
        let x = x0 + i as f64 / g as f64;
        let mut v = 0.0;
        for k in k_lo..=k_hi {
            let cn = c[(1 - k) as usize];
            let pos = 2.0 * x - k as f64;
            let idx = (pos * g as f64).round() as i64;
            if idx >= 0 && (idx as usize) < len {
                v += if k.rem_euclid(2) == 0 { cn } else { -cn } * phi[idx as usize];
            }
        }
        psi_x.push(x);
        psi.push(v);
    }
    let phi_x = (0..len).map(|i| i as f64 / g as f64).collect();
    Ok(CascadeOutput {
        phi_x,
        phi,
        psi_x,
        psi,
        grid_per_unit: g,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banded::{daub4_stencil, haar_stencil};
    use crate::compiler::compile_pyramid;
    use crate::simulator::{apply_circuit, random_state, StateVector};

    fn real_vec(v: &[f64]) -> CVector {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn haar_constant_four() {
        let out = dwt_pyramid(&real_vec(&[1.0, 1.0, 1.0, 1.0]), &haar_stencil(), 2).unwrap();
        assert!((out[0] - C64::new(2.0, 0.0)).norm() <= 1e-12);
        for i in 1..4 {
            assert!(out[i].norm() <= 1e-12);
        }
    }

    #[test]
    fn daub4_constant_annihilated() {
        let x = real_vec(&vec![1.0; 128]);
        let out = dwt_pyramid(&x, &daub4_stencil(), 4).unwrap();
        // Scaling block is the first 2 entries; all details vanish.
        for i in 2..128 {
            assert!(out[i].norm() <= 1e-12, "i={i} |{}|", out[i].norm());
        }
    }

    #[test]
    fn daub4_ramp_details_small_away_from_wrap() {
        let n = 128usize;
        let x: CVector = (0..n).map(|t| C64::new(t as f64, 0.0)).collect();
        let out = dwt_pyramid(&x, &daub4_stencil(), 4).unwrap();
        // Finest details live in [n/2, n); detail index d is produced at
        // signal position ~2d, so wrap contamination sits at both ends.
        let fine = &out[n / 2..];
        for (d, v) in fine.iter().enumerate() {
            let near_wrap = d < 4 || d + 4 >= n / 2;
            if !near_wrap {
                assert!(v.norm() <= 1e-10, "d={d} |{}|", v.norm());
            }
        }
    }

    #[test]
    fn energy_and_inner_products_preserved() {
        let s = daub4_stencil();
        for seed in 0..5u64 {
            let a = random_state(6, seed).unwrap().amplitudes;
            let b = random_state(6, seed + 50).unwrap().amplitudes;
            let ta = dwt_pyramid(&a, &s, 4).unwrap();
            let tb = dwt_pyramid(&b, &s, 4).unwrap();
            let ip_in: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
            let ip_out: C64 = ta.iter().zip(&tb).map(|(x, y)| x.conj() * y).sum();
            assert!((ip_in - ip_out).norm() <= 1e-10);
        }
    }

    #[test]
    fn round_trip_and_linearity() {
        let s = daub4_stencil();
        let x = random_state(7, 3).unwrap().amplitudes;
        let y = random_state(7, 4).unwrap().amplitudes;
        let back = idwt_pyramid(&dwt_pyramid(&x, &s, 4).unwrap(), &s, 4).unwrap();
        let err = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12, "round trip {err}");
        // Linearity: T(x+y) = Tx + Ty.
        let xy: CVector = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let txy = dwt_pyramid(&xy, &s, 4).unwrap();
        let tx = dwt_pyramid(&x, &s, 4).unwrap();
        let ty = dwt_pyramid(&y, &s, 4).unwrap();
        for i in 0..xy.len() {
            assert!((txy[i] - tx[i] - ty[i]).norm() <= 1e-12);
        }
    }

    #[test]
    fn agrees_with_explicit_matrix_chain() {
        // Independent path: full-size block matrices (M_{N_s} direct-sum
        // identity) and explicit even/odd permutation matrices.
        let s = daub4_stencil();
        let n = 64usize;
        let min_size = 4usize;
        let mut chain = Mat::identity(n);
        let mut n_s = n;
        while n_s >= min_size {
            let f = s.materialize_relaxed(n_s).unwrap();
            let mut big = Mat::identity(n);
            for i in 0..n_s {
                for j in 0..n_s {
                    big.set(i, j, f.get(i, j));
                }
            }
            let mut perm = Mat::zeros(n, n);
            for i in 0..n_s {
                perm.set((i % 2) * (n_s / 2) + i / 2, i, C64::new(1.0, 0.0));
            }
            for i in n_s..n {
                perm.set(i, i, C64::new(1.0, 0.0));
            }
            chain = perm.mul(&big).mul(&chain);
            n_s /= 2;
        }
        let x = random_state(6, 9).unwrap().amplitudes;
        let via_matrix = chain.mul_vec(&x);
        let via_dwt = dwt_pyramid(&x, &s, min_size).unwrap();
        for i in 0..n {
            assert!((via_matrix[i] - via_dwt[i]).norm() <= 1e-12);
        }
    }

    #[test]
    fn matches_compiled_pyramid_on_basis_vectors() {
        let s = daub4_stencil();
        let n = 64usize;
        let c = compile_pyramid(&s, n, 4).unwrap();
        for x in 0..n {
            let psi = StateVector::basis(6, x).unwrap();
            let out = apply_circuit(&psi, &c).unwrap();
            let classical = dwt_pyramid(&psi.amplitudes, &s, 4).unwrap();
            for i in 0..n {
                assert!(
                    (out.amplitudes[i] - classical[i]).norm() <= 1e-9,
                    "x={x} i={i}"
                );
            }
        }
    }

    #[test]
    fn cascade_haar_box_fixed_point() {
        let out = cascade(&haar_stencil(), 1, 64).unwrap();
        for (x, v) in out.phi_x.iter().zip(&out.phi) {
            let expect = if *x < 1.0 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() <= 1e-12, "x={x} v={v}");
        }
    }

    #[test]
    fn cascade_daub4_support_and_integrals() {
        let out = cascade(&daub4_stencil(), 12, 64).unwrap();
        assert!(out.phi_x.last().copied().unwrap() <= 3.0 + 1e-12);
        let int_phi: f64 = out.phi.iter().sum::<f64>() / 64.0;
        assert!((int_phi - 1.0).abs() <= 1e-3, "int phi {int_phi}");
        let int_psi: f64 = out.psi.iter().sum::<f64>() / 64.0;
        assert!(int_psi.abs() <= 1e-6, "int psi {int_psi}");
    }
}
