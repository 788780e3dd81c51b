//! Dense statevector simulation: circuit execution, measurement sampling,
//! function-state preparation, permutation-oracle application and inversion,
//! and the phase-coded continuous transform with its distortion measure.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::numerics::{is_unitary, Mat};
use crate::{C64, CMatrix, CVector};

/// Largest dense register handled (2^20 amplitudes).
pub const MAX_QUBITS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub n_qubits: usize,
    pub amplitudes: CVector,
}

impl StateVector {
    /// Computational basis state |index> on `n_qubits` lines (little-endian:
    /// qubit 0 is the least significant bit of `index`).
    pub fn basis(n_qubits: usize, index: usize) -> Result<StateVector> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(n_qubits));
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::OutOfRange(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Normalized state from raw amplitudes (length must be a power of two).
    pub fn from_amplitudes(amps: &[C64]) -> Result<StateVector> {
        let dim = amps.len();
        if !dim.is_power_of_two() {
            return Err(Error::OutOfRange(format!(
                "amplitude vector length {dim} is not a power of two"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(n_qubits));
        }
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return Err(Error::OutOfRange("zero state vector".into()));
        }
        Ok(StateVector {
            n_qubits,
            amplitudes: amps.iter().map(|z| z / norm).collect(),
        })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn max_diff(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Haar-like random state from a seeded generator (Gaussian amplitudes,
/// normalized). Deterministic per seed.
pub fn random_state(n_qubits: usize, seed: u64) -> Result<StateVector> {
    if n_qubits > MAX_QUBITS {
        return Err(Error::Capacity(n_qubits));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 1usize << n_qubits;
    let mut amps = Vec::with_capacity(dim);
    for _ in 0..dim {
        // Box-Muller pair for one complex Gaussian.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        amps.push(C64::new(r * th.cos(), r * th.sin()));
    }
    StateVector::from_amplitudes(&amps)
}

fn controls_fire(gate: &Gate, index: usize) -> bool {
    gate.controls
        .iter()
        .all(|c| ((index >> c.q) & 1) as u8 == c.pol)
}

fn apply_gate(psi: &mut StateVector, gate: &Gate) {
    let dim = psi.amplitudes.len();
    match gate.kind {
        GateKind::X | GateKind::MCX => {
            let t = 1usize << gate.targets[0];
            for i in 0..dim {
                if i & t == 0 && controls_fire(gate, i) {
                    // Controls never involve the target, so firing is
                    // identical on both halves of the pair.
                    psi.amplitudes.swap(i, i | t);
                }
            }
        }
        GateKind::SWAP => {
            let a = 1usize << gate.targets[0];
            let b = 1usize << gate.targets[1];
            for i in 0..dim {
                if i & a != 0 && i & b == 0 && controls_fire(gate, i) {
                    psi.amplitudes.swap(i, (i & !a) | b);
                }
            }
        }
        GateKind::BLOCK => {
            let m = gate.block_matrix().expect("validated BLOCK");
            let t = &gate.targets;
            let d = 1usize << t.len();
            let mask: usize = t.iter().map(|&q| 1usize << q).sum();
            let mut sub = vec![C64::new(0.0, 0.0); d];
            for base in 0..dim {
                if base & mask != 0 || !controls_fire(gate, base) {
                    continue;
                }
                // Gather the block fiber through `base`, multiply, scatter.
                for r in 0..d {
                    let mut idx = base;
                    for (bit, &q) in t.iter().enumerate() {
                        if (r >> bit) & 1 == 1 {
                            idx |= 1 << q;
                        }
                    }
                    sub[r] = psi.amplitudes[idx];
                }
                for r in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for c in 0..d {
                        let v = m.get(r, c);
                        if v.re != 0.0 || v.im != 0.0 {
                            acc += v * sub[c];
                        }
                    }
                    let mut idx = base;
                    for (bit, &q) in t.iter().enumerate() {
                        if (r >> bit) & 1 == 1 {
                            idx |= 1 << q;
                        }
                    }
                    psi.amplitudes[idx] = acc;
                }
            }
        }
    }
}

/// Run the circuit gate by gate (gates[0] first).
pub fn apply_circuit(psi: &StateVector, c: &Circuit) -> Result<StateVector> {
    if psi.n_qubits != c.n_qubits {
        return Err(Error::WidthMismatch {
            circuit: c.n_qubits,
            state: psi.n_qubits,
        });
    }
    c.validate()?;
    let mut out = psi.clone();
    for g in &c.gates {
        apply_gate(&mut out, g);
    }
    Ok(out)
}

/// Multiply the full state by a dense unitary (matrix-oracle path).
pub fn apply_matrix(psi: &StateVector, u: &CMatrix) -> Result<StateVector> {
    if u.rows() != psi.amplitudes.len() {
        return Err(Error::WidthMismatch {
            circuit: u.rows(),
            state: psi.amplitudes.len(),
        });
    }
    let (ok, residual) = is_unitary(u, 1e-8)?;
    if !ok {
        return Err(Error::NotUnitary { residual, tol: 1e-8 });
    }
    Ok(StateVector {
        n_qubits: psi.n_qubits,
        amplitudes: u.mul_vec(&psi.amplitudes),
    })
}

/// Dense unitary realized by a circuit, column by column.
pub fn circuit_matrix(c: &Circuit) -> Result<CMatrix> {
    let dim = 1usize << c.n_qubits;
    let mut m = Mat::zeros(dim, dim);
    for col in 0..dim {
        let out = apply_circuit(&StateVector::basis(c.n_qubits, col)?, c)?;
        for row in 0..dim {
            m.set(row, col, out.amplitudes[row]);
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: BTreeMap<usize, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl Histogram {
    /// Total-variation distance to the distribution p(i) = |amp_i|^2.
    pub fn tv_distance(&self, psi: &StateVector) -> f64 {
        let mut tv = 0.0;
        for (i, amp) in psi.amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            let q = *self.counts.get(&i).unwrap_or(&0) as f64 / self.shots as f64;
            tv += (p - q).abs();
        }
        tv / 2.0
    }
}

/// Seeded i.i.d. sampling from |amplitude|^2 by inverse CDF.
pub fn sample_measure(psi: &StateVector, shots: u64, seed: u64) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::OutOfRange("shots must be >= 1".into()));
    }
    let mut cdf = Vec::with_capacity(psi.amplitudes.len());
    let mut acc = 0.0;
    for a in &psi.amplitudes {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.gen_range(0.0..total);
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        *counts.entry(idx).or_insert(0) += 1;
    }
    Ok(Histogram { counts, shots, seed })
}

/// Classical function on indices, used for oracle construction and for the
/// real-valued phase profile of the continuous transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FunctionSpec {
    /// t -> (a*t + c) mod modulus.
    Affine { a: usize, c: usize, modulus: usize },
    /// Bit reversal on `bits` lines.
    BitReverse { bits: usize },
    /// Explicit lookup table.
    Table(Vec<usize>),
    /// Real-valued samples (phase profile h(t)).
    RealTable(Vec<f64>),
}

impl FunctionSpec {
    pub fn domain_size(&self) -> usize {
        match self {
            FunctionSpec::Affine { modulus, .. } => *modulus,
            FunctionSpec::BitReverse { bits } => 1 << bits,
            FunctionSpec::Table(t) => t.len(),
            FunctionSpec::RealTable(t) => t.len(),
        }
    }

    pub fn eval(&self, x: usize) -> Result<usize> {
        let n = self.domain_size();
        if x >= n {
            return Err(Error::OutOfRange(format!("argument {x} outside domain of size {n}")));
        }
        Ok(match self {
            FunctionSpec::Affine { a, c, modulus } => (a * x + c) % modulus,
            FunctionSpec::BitReverse { bits } => {
                let mut y = 0usize;
                for b in 0..*bits {
                    if (x >> b) & 1 == 1 {
                        y |= 1 << (bits - 1 - b);
                    }
                }
                y
            }
            FunctionSpec::Table(t) => t[x],
            FunctionSpec::RealTable(_) => {
                return Err(Error::OutOfRange(
                    "real-valued table has no integer evaluation".into(),
                ))
            }
        })
    }

    pub fn real_eval(&self, x: usize) -> Result<f64> {
        match self {
            FunctionSpec::RealTable(t) => t
                .get(x)
                .copied()
                .ok_or_else(|| Error::OutOfRange(format!("argument {x} outside table"))),
            _ => Ok(self.eval(x)? as f64),
        }
    }

    /// Full value table; checks range.
    pub fn table(&self) -> Result<Vec<usize>> {
        let n = self.domain_size();
        let mut out = Vec::with_capacity(n);
        for x in 0..n {
            let y = self.eval(x)?;
            if y >= n {
                return Err(Error::OutOfRange(format!("value {y} outside range of size {n}")));
            }
            out.push(y);
        }
        Ok(out)
    }

    /// Value table checked to be a permutation.
    pub fn bijection_table(&self) -> Result<Vec<usize>> {
        let t = self.table()?;
        let mut seen = vec![false; t.len()];
        for &y in &t {
            if seen[y] {
                return Err(Error::NonBijective(format!("value {y} repeats")));
            }
            seen[y] = true;
        }
        Ok(t)
    }
}

/// Normalized sum over t of |t>|f(t)>: the t register occupies the low
/// qubits, the value register the high qubits.
pub fn prepare_function_state(f: &FunctionSpec) -> Result<StateVector> {
    let n = f.domain_size();
    if !n.is_power_of_two() {
        return Err(Error::OutOfRange(format!("domain size {n} is not a power of two")));
    }
    let table = f.table()?;
    let range = table.iter().max().copied().unwrap_or(0) + 1;
    let t_bits = n.trailing_zeros() as usize;
    let v_bits = (range.max(2)).next_power_of_two().trailing_zeros() as usize;
    if t_bits + v_bits > MAX_QUBITS {
        return Err(Error::Capacity(t_bits + v_bits));
    }
    let dim = 1usize << (t_bits + v_bits);
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    let w = 1.0 / (n as f64).sqrt();
    for (t, &v) in table.iter().enumerate() {
        amps[t + (v << t_bits)] = C64::new(w, 0.0);
    }
    Ok(StateVector {
        n_qubits: t_bits + v_bits,
        amplitudes: amps,
    })
}

/// Permutation oracle O with O[i][j] = 1 iff f(i) = j, acting on the full
/// register: amplitude_i(out) = amplitude_{f(i)}(in).
pub fn apply_locally_poly_oracle(psi: &StateVector, f: &FunctionSpec) -> Result<StateVector> {
    let dim = psi.amplitudes.len();
    if f.domain_size() != dim {
        return Err(Error::WidthMismatch {
            circuit: f.domain_size(),
            state: dim,
        });
    }
    let table = f.bijection_table()?;
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for i in 0..dim {
        amps[i] = psi.amplitudes[table[i]];
    }
    Ok(StateVector {
        n_qubits: psi.n_qubits,
        amplitudes: amps,
    })
}

/// Inversion by a single oracle application: prepare |y>, apply the
/// permutation oracle once, measure. The outcome is deterministic and
/// equals the preimage x with f(x) = y.
pub fn invert_bijection_demo(f: &FunctionSpec, y: usize, seed: u64) -> Result<usize> {
    let n = f.domain_size();
    if !n.is_power_of_two() {
        return Err(Error::OutOfRange(format!("domain size {n} is not a power of two")));
    }
    let n_qubits = n.trailing_zeros() as usize;
    let psi = StateVector::basis(n_qubits, y)?;
    let out = apply_locally_poly_oracle(&psi, f)?;
    let hist = sample_measure(&out, 1, seed)?;
    let (&x, _) = hist.counts.iter().next().expect("one shot recorded");
    // The post-oracle state must be a point mass for the readout to be an
    // inversion; verify rather than trust the single draw.
    let p = out.amplitudes[x].norm_sqr();
    if (p - 1.0).abs() > 1e-10 {
        return Err(Error::NonBijective(format!(
            "outcome {x} has probability {p}, not a point mass"
        )));
    }
    Ok(x)
}

/// Phase register amplitudes w^j / sqrt(D), j = 0..D-1, w = e^{2 pi i / D}.
pub fn phase_register(d: usize) -> Result<CVector> {
    if d < 2 {
        return Err(Error::OutOfRange(format!("phase register size {d} < 2")));
    }
    let w = 2.0 * std::f64::consts::PI / d as f64;
    let s = 1.0 / (d as f64).sqrt();
    Ok((0..d)
        .map(|j| C64::from_polar(s, w * j as f64))
        .collect())
}

#[derive(Clone, Debug)]
pub struct ContinuousTransformOutput {
    /// Normalized first-register amplitudes after the transform.
    pub amplitudes: CVector,
    /// Overlap fidelity of the phase register with its prepared state.
    pub phase_fidelity: f64,
    /// Integer phase codes x(t) = round(D h(t) / 2 pi).
    pub codes: Vec<usize>,
}

/// Phase-coded transform: encode h into integer codes x(t), kick w^{x(t)}
/// onto branch |t> by modular subtraction on a size-D phase register, then
/// apply the transform U on the first register. Returned amplitudes are
/// proportional to sum_t w^{x(t)} U[.,t].
pub fn continuous_transform(
    h: &FunctionSpec,
    u: &CMatrix,
    d_phase: usize,
    d_band: usize,
) -> Result<ContinuousTransformOutput> {
    let n = h.domain_size();
    if u.rows() != n || u.cols() != n {
        return Err(Error::WidthMismatch { circuit: u.rows(), state: n });
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let limit = two_pi * d_band as f64 / d_phase as f64;
    let mut codes = Vec::with_capacity(n);
    for t in 0..n {
        let v = h.real_eval(t)?;
        if !(0.0..=limit + 1e-12).contains(&v) {
            return Err(Error::OutOfRange(format!(
                "h({t}) = {v} outside [0, {limit}]"
            )));
        }
        codes.push(((d_phase as f64 * v / two_pi).round() as usize) % d_phase);
    }
    let phase = phase_register(d_phase)?;
    // Joint state over (t, j); modular subtraction of x(t) on register j.
    // After the shift, branch t carries w^{x(t)} times the phase state.
    let sn = 1.0 / (n as f64).sqrt();
    let mut joint = vec![vec![C64::new(0.0, 0.0); d_phase]; n];
    for (t, row) in joint.iter_mut().enumerate() {
        for j in 0..d_phase {
            let src = (j + codes[t]) % d_phase;
            row[j] = phase[src] * sn;
        }
    }
    // Project each branch onto the phase state; residual weight measures
    // entanglement left behind.
    let mut first: CVector = Vec::with_capacity(n);
    let mut residual = 0.0;
    for row in &joint {
        let overlap: C64 = phase.iter().zip(row).map(|(p, a)| p.conj() * a).sum();
        let row_sq: f64 = row.iter().map(|a| a.norm_sqr()).sum();
        residual += row_sq - overlap.norm_sqr();
        first.push(overlap);
    }
    let phase_fidelity = 1.0 - residual.max(0.0);
    let out = u.mul_vec(&first);
    Ok(ContinuousTransformOutput {
        amplitudes: out,
        phase_fidelity,
        codes,
    })
}

/// Direct-formula reference: sum_t w^{x(t)} U[.,t] / sqrt(N), with
/// x(t) = round(D h(t) / 2 pi).
pub fn continuous_transform_oracle(
    h: &FunctionSpec,
    u: &CMatrix,
    d_phase: usize,
) -> Result<CVector> {
    let n = h.domain_size();
    let two_pi = 2.0 * std::f64::consts::PI;
    let sn = 1.0 / (n as f64).sqrt();
    let mut v: CVector = Vec::with_capacity(n);
    for t in 0..n {
        let x = ((d_phase as f64 * h.real_eval(t)? / two_pi).round() as usize) % d_phase;
        v.push(C64::from_polar(sn, two_pi * x as f64 / d_phase as f64));
    }
    Ok(u.mul_vec(&v))
}

/// Smallest kappa such that the rescaled arc map x -> e^{2 pi i x / D},
/// x in 1..d, satisfies the two-sided quasi-isometry inequality
/// |x1-x2|/(1+kappa) <= s*chord <= (1+kappa)|x1-x2| for the best scale s.
pub fn quasi_isometry_distortion(d: usize, d_phase: usize) -> Result<f64> {
    if d < 2 || d >= d_phase {
        return Err(Error::OutOfRange(format!(
            "need 2 <= d < D, got d={d}, D={d_phase}"
        )));
    }
    let pi = std::f64::consts::PI;
    let mut rho_min = f64::INFINITY;
    let mut rho_max = 0.0f64;
    for delta in 1..d {
        // Chord-to-arclength ratio depends only on the separation.
        let rho = 2.0 * (pi * delta as f64 / d_phase as f64).sin() / delta as f64;
        rho_min = rho_min.min(rho);
        rho_max = rho_max.max(rho);
    }
    Ok((rho_max / rho_min).sqrt() - 1.0)
}
