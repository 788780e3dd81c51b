//! The family {M_N} of cyclic, k-periodic, b-band-diagonal unitaries:
//! stencil definitions, materialization, and validation.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{is_unitary, Mat};
use crate::scalar::Scalar;

/// The k generator rows defining a whole family {M_N}.
///
/// Row `r` is placed with its offset-0 entry on the diagonal of every row
/// index congruent to `r` mod k.
#[derive(Clone, Debug, PartialEq)]
pub struct BandStencil<T> {
    pub name: String,
    pub k: usize,
    /// One map per generator row: signed column offset -> coefficient.
    pub rows: Vec<BTreeMap<i64, Complex<T>>>,
}

impl<T: Scalar> BandStencil<T> {
    pub fn new(name: impl Into<String>, k: usize, rows: Vec<BTreeMap<i64, Complex<T>>>) -> Self {
        assert_eq!(rows.len(), k, "stencil must carry exactly k generator rows");
        assert!(k >= 1 && k.is_power_of_two(), "k must be a power of two");
        BandStencil {
            name: name.into(),
            k,
            rows,
        }
    }

    /// Stencil of M * S^w where S is the cyclic shift e_x -> e_{x+1}:
    /// every tap offset decreases by `w`. Used to cancel band winding
    /// before truncation.
    pub fn shifted(&self, w: i64) -> BandStencil<T> {
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(|(&o, &v)| (o - w, v)).collect())
            .collect();
        BandStencil {
            name: format!("{}<<{w}", self.name),
            k: self.k,
            rows,
        }
    }

    pub fn min_offset(&self) -> i64 {
        self.rows
            .iter()
            .flat_map(|r| r.keys().copied())
            .min()
            .unwrap_or(0)
    }

    pub fn max_offset(&self) -> i64 {
        self.rows
            .iter()
            .flat_map(|r| r.keys().copied())
            .max()
            .unwrap_or(0)
    }

    /// Band parameter: M[i][j] = 0 unless |i-j| < b cyclically.
    pub fn bandwidth(&self) -> usize {
        let m = self.min_offset().unsigned_abs().max(self.max_offset().unsigned_abs());
        1 + m as usize
    }

    fn check_admissible(&self, n: usize) -> Result<()> {
        if !n.is_power_of_two() {
            return Err(Error::Inadmissible(format!("N={n} is not a power of two")));
        }
        if n % self.k != 0 {
            return Err(Error::Inadmissible(format!(
                "period k={} does not divide N={n}",
                self.k
            )));
        }
        let b = self.bandwidth();
        if 4 * b >= n {
            return Err(Error::Inadmissible(format!(
                "band condition 4b<N violated: b={b}, N={n}"
            )));
        }
        Ok(())
    }

    /// Tile the generator rows into the dense N x N matrix and verify
    /// unitarity. Requires N a power of two, k | N, and 4b < N.
    pub fn materialize(&self, n: usize) -> Result<Mat<T>> {
        self.check_admissible(n)?;
        let m = self.tile(n);
        let (ok, residual) = is_unitary(&m, T::real(1e-10))?;
        if !ok {
            return Err(Error::NotUnitary {
                residual: residual.as_f64(),
                tol: 1e-10,
            });
        }
        Ok(m)
    }

    /// Tiling without the 4b < N admissibility condition, with additive
    /// wrap-around when taps collide modulo N. Used for the constant-size
    /// terminal filters of the pyramid, where wrapping of rows is benign as
    /// long as the result stays unitary.
    pub fn materialize_relaxed(&self, n: usize) -> Result<Mat<T>> {
        if !n.is_power_of_two() || n % self.k != 0 || n < 2 {
            return Err(Error::Inadmissible(format!(
                "N={n} must be a power of two divisible by k={}",
                self.k
            )));
        }
        let m = self.tile(n);
        let (ok, residual) = is_unitary(&m, T::real(1e-10))?;
        if !ok {
            return Err(Error::NotUnitary {
                residual: residual.as_f64(),
                tol: 1e-10,
            });
        }
        Ok(m)
    }

    fn tile(&self, n: usize) -> Mat<T> {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            let row = &self.rows[i % self.k];
            for (&o, &v) in row {
                let j = (i as i64 + o).rem_euclid(n as i64) as usize;
                let cur = m.get(i, j);
                m.set(i, j, cur + v);
            }
        }
        m
    }

    /// Diagnostics record for the stencil at size N.
    pub fn validate(&self, n: usize) -> StencilDiagnostics {
        let b = self.bandwidth();
        let n_power_of_two = n.is_power_of_two();
        let k_divides_n = n_power_of_two && n % self.k == 0;
        let band_condition = 4 * b < n;
        let mut diag = StencilDiagnostics {
            name: self.name.clone(),
            n,
            k: self.k,
            b,
            n_power_of_two,
            k_divides_n,
            band_condition,
            unitarity_residual: None,
            periodicity_residual: None,
            measured_bandwidth: None,
            pass: false,
        };
        if !(n_power_of_two && k_divides_n && band_condition) {
            return diag;
        }
        let m = self.tile(n);
        let (_, residual) = is_unitary(&m, T::real(1e-10)).expect("square by construction");
        diag.unitarity_residual = Some(residual.as_f64());
        diag.periodicity_residual = Some(periodicity_residual(&m, self.k).as_f64());
        diag.measured_bandwidth = Some(measured_bandwidth(&m, T::real(1e-12)));
        diag.pass = residual <= T::real(1e-10);
        diag
    }

    /// Deterministic QMF-style stencil: a product of `layers` alternating
    /// block-diagonal 2x2 rotation layers, offset by one line between layers.
    pub fn random_qmf(layers: usize, seed: u64) -> Self {
        assert!(layers >= 1, "need at least one layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n0 = (8 * (layers + 1)).next_power_of_two();
        let mut product = Mat::<T>::identity(n0);
        for layer in 0..layers {
            let theta = T::real(rng.gen::<f64>() * std::f64::consts::TAU);
            let (c, s) = (theta.cos(), theta.sin());
            let mut l = Mat::<T>::zeros(n0, n0);
            let start = layer % 2;
            let mut p = start;
            loop {
                let q = (p + 1) % n0;
                l.set(p, p, Complex::new(c, T::zero()));
                l.set(p, q, Complex::new(-s, T::zero()));
                l.set(q, p, Complex::new(s, T::zero()));
                l.set(q, q, Complex::new(c, T::zero()));
                p += 2;
                if p >= n0 + start {
                    break;
                }
            }
            product = l.mul(&product);
        }
        // The product is 2-periodic; read the two generator rows back off.
        let tiny = T::real(1e-15);
        let half = (n0 / 2) as i64;
        let rows = (0..2)
            .map(|i| {
                let mut taps = BTreeMap::new();
                for j in 0..n0 {
                    let v = product.get(i, j);
                    if v.norm() > tiny {
                        let mut d = j as i64 - i as i64;
                        if d > half {
                            d -= n0 as i64;
                        } else if d < -half {
                            d += n0 as i64;
                        }
                        taps.insert(d, v);
                    }
                }
                taps
            })
            .collect();
        BandStencil::new(format!("random_qmf(layers={layers},seed={seed})"), 2, rows)
    }
}

/// Max deviation from M[i][j] = M[i+k][j+k] (indices mod N).
pub fn periodicity_residual<T: Scalar>(m: &Mat<T>, k: usize) -> T {
    let n = m.rows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let d = (m.get(i, j) - m.get((i + k) % n, (j + k) % n)).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Measured cyclic band parameter: smallest b with all entries at cyclic
/// distance >= b below `tol`.
pub fn measured_bandwidth<T: Scalar>(m: &Mat<T>, tol: T) -> usize {
    let n = m.rows();
    let mut max_dist = 0usize;
    for i in 0..n {
        for j in 0..n {
            if m.get(i, j).norm() > tol {
                let d = (i as i64 - j as i64).rem_euclid(n as i64) as usize;
                let dist = d.min(n - d);
                max_dist = max_dist.max(dist);
            }
        }
    }
    max_dist + 1
}

/// Diagnostics for [`BandStencil::validate`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StencilDiagnostics {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub b: usize,
    pub n_power_of_two: bool,
    pub k_divides_n: bool,
    pub band_condition: bool,
    pub unitarity_residual: Option<f64>,
    pub periodicity_residual: Option<f64>,
    pub measured_bandwidth: Option<usize>,
    pub pass: bool,
}

/// Trivial stencil: k=1, a single row {0 -> 1}.
pub fn identity_stencil<T: Scalar>() -> BandStencil<T> {
    let mut row = BTreeMap::new();
    row.insert(0, Complex::new(T::one(), T::zero()));
    BandStencil::new("identity", 1, vec![row])
}

/// Haar filter: smoothing row (s, s) at offsets 0..1 and differencing row
/// (s, -s) anchored so the matrix tiles as the classical Haar transform.
pub fn haar_stencil<T: Scalar>() -> BandStencil<T> {
    let s = T::one() / T::real(2.0).sqrt();
    let mut smooth = BTreeMap::new();
    smooth.insert(0, Complex::new(s, T::zero()));
    smooth.insert(1, Complex::new(s, T::zero()));
    let mut detail = BTreeMap::new();
    detail.insert(-1, Complex::new(s, T::zero()));
    detail.insert(0, Complex::new(-s, T::zero()));
    BandStencil::new("haar", 2, vec![smooth, detail])
}

/// Daubechies-4 coefficients (C0, C1, C2, C3) = ((1+sqrt3), (3+sqrt3),
/// (3-sqrt3), (1-sqrt3)) / (4 sqrt2).
pub fn daub4_coefficients<T: Scalar>() -> [T; 4] {
    let s3 = T::real(3.0).sqrt();
    let d = T::real(4.0) * T::real(2.0).sqrt();
    [
        (T::one() + s3) / d,
        (T::real(3.0) + s3) / d,
        (T::real(3.0) - s3) / d,
        (T::one() - s3) / d,
    ]
}

/// Daubechies-4 filter: smoothing row (C0..C3) at offsets 0..3, differencing
/// row (C3, -C2, C1, -C0) at offsets -1..2.
pub fn daub4_stencil<T: Scalar>() -> BandStencil<T> {
    let [c0, c1, c2, c3] = daub4_coefficients::<T>();
    let z = T::zero;
    let mut smooth = BTreeMap::new();
    for (o, v) in [(0i64, c0), (1, c1), (2, c2), (3, c3)] {
        smooth.insert(o, Complex::new(v, z()));
    }
    let mut detail = BTreeMap::new();
    for (o, v) in [(-1i64, c3), (0, -c2), (1, c1), (2, -c0)] {
        detail.insert(o, Complex::new(v, z()));
    }
    BandStencil::new("daub4", 2, vec![smooth, detail])
}

// ---------------------------------------------------------------------------
// Stencil file format: {name, k, rows:[[{offset, re, im}...]...]}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TapJson {
    offset: i64,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct StencilJson {
    name: String,
    k: usize,
    rows: Vec<Vec<TapJson>>,
}

impl BandStencil<f64> {
    pub fn to_json(&self) -> String {
        let doc = StencilJson {
            name: self.name.clone(),
            k: self.k,
            rows: self
                .rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|(&offset, v)| TapJson {
                            offset,
                            re: v.re,
                            im: v.im,
                        })
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("stencil serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StencilJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("stencil JSON: {e}")))?;
        if doc.k == 0 || !doc.k.is_power_of_two() {
            return Err(Error::Parse(format!("k={} must be a power of two", doc.k)));
        }
        if doc.rows.len() != doc.k {
            return Err(Error::Parse(format!(
                "expected {} generator rows, found {}",
                doc.k,
                doc.rows.len()
            )));
        }
        let rows = doc
            .rows
            .into_iter()
            .map(|r| {
                let mut taps = BTreeMap::new();
                for t in r {
                    if !t.re.is_finite() || !t.im.is_finite() {
                        return Err(Error::Parse("non-finite tap".into()));
                    }
                    if taps.insert(t.offset, Complex::new(t.re, t.im)).is_some() {
                        return Err(Error::Parse(format!("duplicate offset {}", t.offset)));
                    }
                }
                Ok(taps)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BandStencil::new(doc.name, doc.k, rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type S = BandStencil<f64>;

    #[test]
    fn identity_materializes_to_identity() {
        let m = identity_stencil::<f64>().materialize(8).unwrap();
        assert!(m.sub(&Mat::identity(8)).max_abs() == 0.0);
    }

    #[test]
    fn haar_n4_matches_expected_rows() {
        // 4b < N does not hold at N=4; the relaxed tiling realizes the
        // classical 4x4 Haar matrix.
        let s = 1.0 / 2f64.sqrt();
        let m = haar_stencil::<f64>().materialize_relaxed(4).unwrap();
        let want = [
            [s, s, 0.0, 0.0],
            [s, -s, 0.0, 0.0],
            [0.0, 0.0, s, s],
            [0.0, 0.0, s, -s],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((m.get(i, j).re - want[i][j]).abs() < 1e-15, "({i},{j})");
                assert!(m.get(i, j).im == 0.0);
            }
        }
    }

    #[test]
    fn haar_bandwidth_and_constant_annihilation() {
        let h = haar_stencil::<f64>();
        assert_eq!(h.bandwidth(), 2);
        let det: f64 = h.rows[1].values().map(|v| v.re).sum();
        assert!(det.abs() < 1e-15);
    }

    #[test]
    fn daub4_coefficients_and_moments() {
        let [c0, c1, c2, c3] = daub4_coefficients::<f64>();
        assert!((c0 - 0.4829629131).abs() < 1e-9);
        assert!((c1 - 0.8365163037).abs() < 1e-9);
        assert!((c2 - 0.2241438680).abs() < 1e-9);
        assert!((c3 + 0.1294095226).abs() < 1e-9);
        // Both moment conditions and the row-norm condition.
        assert!((c3 - c2 + c1 - c0).abs() < 1e-12);
        assert!((0.0 * c3 - 1.0 * c2 + 2.0 * c1 - 3.0 * c0).abs() < 1e-12);
        assert!((c0 * c0 + c1 * c1 + c2 * c2 + c3 * c3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn daub4_materializes_unitary() {
        let m = daub4_stencil::<f64>().materialize(64).unwrap();
        let (ok, r) = is_unitary(&m, 1e-12).unwrap();
        assert!(ok, "residual {r}");
        // Smoothing row sits at offsets 0..3 of even rows.
        let [c0, c1, c2, c3] = daub4_coefficients::<f64>();
        for (o, v) in [(0usize, c0), (1, c1), (2, c2), (3, c3)] {
            assert!((m.get(10, 10 + o).re - v).abs() < 1e-15);
        }
        // Differencing row at offsets -1..2 of odd rows.
        for (o, v) in [(-1i64, c3), (0, -c2), (1, c1), (2, -c0)] {
            assert!((m.get(11, (11 + o) as usize).re - v).abs() < 1e-15);
        }
    }

    #[test]
    fn daub4_n8_unitary_within_tolerance() {
        let m = daub4_stencil::<f64>().materialize_relaxed(8).unwrap();
        let (_, r) = is_unitary(&m, 1e-12).unwrap();
        assert!(r <= 1e-12);
    }

    #[test]
    fn materialize_rejects_bad_sizes() {
        let d: S = daub4_stencil();
        assert!(matches!(d.materialize(12), Err(Error::Inadmissible(_))));
        assert!(matches!(d.materialize(8), Err(Error::Inadmissible(_))));
        let h: S = haar_stencil();
        assert!(matches!(h.materialize(8), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn validate_cases() {
        let d: S = daub4_stencil();
        let diag = d.validate(64);
        assert!(diag.pass);
        assert_eq!(diag.b, 4);
        assert_eq!(diag.measured_bandwidth, Some(4));
        let diag = d.validate(12);
        assert!(!diag.pass && !diag.n_power_of_two);
        let diag = identity_stencil::<f64>().validate(8);
        assert!(diag.pass);
        assert_eq!(diag.b, 1);
    }

    #[test]
    fn random_qmf_deterministic_and_unitary() {
        let a = S::random_qmf(3, 7);
        let b = S::random_qmf(3, 7);
        assert_eq!(a, b);
        assert!(a.bandwidth() <= 2 * 3);
        let m = a.materialize(64).unwrap();
        let (_, r) = is_unitary(&m, 1e-12).unwrap();
        assert!(r <= 1e-12);
        // Single layer: pure block-diagonal rotation with b <= 2.
        let one = S::random_qmf(1, 5);
        assert!(one.bandwidth() <= 2);
    }

    #[test]
    fn same_local_entries_across_sizes() {
        for s in [haar_stencil::<f64>(), daub4_stencil::<f64>(), S::random_qmf(2, 3)] {
            let m64 = s.materialize(64).unwrap();
            let m128 = s.materialize(128).unwrap();
            // Entries with congruent indices mod k agree; compare a band
            // window around the diagonal away from the wrap.
            for i in 10..30 {
                for j in 0..64 {
                    let d = j as i64 - i as i64;
                    if d.abs() < 8 {
                        let v64 = m64.get(i, j);
                        let v128 = m128.get(i, (i as i64 + d) as usize);
                        assert!((v64 - v128).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn periodicity_holds() {
        let m = daub4_stencil::<f64>().materialize(64).unwrap();
        assert!(periodicity_residual(&m, 2) == 0.0);
    }

    #[test]
    fn stencil_json_roundtrip() {
        let s: S = daub4_stencil();
        let text = s.to_json();
        let back = S::from_json(&text).unwrap();
        assert_eq!(s, back);
        assert!(S::from_json("{\"name\":\"x\",\"k\":3,\"rows\":[]}").is_err());
    }

    #[test]
    fn haar_n2_rotation() {
        let m = haar_stencil::<f64>().materialize_relaxed(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((m.get(0, 0).re - s).abs() < 1e-15);
        assert!((m.get(1, 1).re + s).abs() < 1e-15);
    }
}
