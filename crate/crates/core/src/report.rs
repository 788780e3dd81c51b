//! Aggregated JSON report: one deterministic document collecting the
//! headline measurements (factorization residuals, compiler discrepancies,
//! pyramid agreement, sampling distance, continuous-transform checks,
//! inversion demo, gate-count scaling).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banded::{daub4_stencil, haar_stencil, identity_stencil, BandStencil};
use crate::circuit::gate_count;
use crate::compiler::{compile_banded, compile_pyramid};
use crate::error::Result;
use crate::simulator::{
    apply_circuit, apply_matrix, continuous_transform, continuous_transform_oracle,
    invert_bijection_demo, quasi_isometry_distortion, random_state, sample_measure, FunctionSpec,
    StateVector,
};
use crate::truncation::{factorization_check, factorize};
use crate::wavelet::dwt_pyramid;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorEntry {
    pub stencil: String,
    pub n: usize,
    pub block: usize,
    pub winding: i64,
    pub factorization_residual: f64,
    pub unitarity_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompilerEntry {
    pub stencil: String,
    pub n: usize,
    pub max_state_discrepancy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingEntry {
    pub n_qubits: usize,
    pub size: usize,
    pub elementary_total: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub factorization: Vec<FactorEntry>,
    pub compiler: Vec<CompilerEntry>,
    pub pyramid_max_error_daub4_n64: f64,
    pub sampling_tv_distance: f64,
    pub sampling_shots: u64,
    pub continuous_max_formula_error: f64,
    pub continuous_phase_infidelity: f64,
    pub distortion: Vec<(usize, f64)>,
    pub inversions_checked: usize,
    pub inversions_exact: usize,
    pub gate_scaling_daub4_pyramid: Vec<ScalingEntry>,
}

fn builtin_stencils() -> Vec<BandStencil<f64>> {
    vec![identity_stencil(), haar_stencil(), daub4_stencil()]
}

fn compiler_discrepancy(s: &BandStencil<f64>, n: usize, seed: u64, states: usize) -> Result<f64> {
    let c = compile_banded(s, n, &[])?;
    let m = s.materialize(n)?;
    let nq = n.trailing_zeros() as usize;
    let mut worst = 0.0f64;
    for k in 0..states as u64 {
        let psi = random_state(nq, seed.wrapping_add(k))?;
        let a = apply_circuit(&psi, &c)?;
        let b = apply_matrix(&psi, &m)?;
        let err: f64 = a
            .amplitudes
            .iter()
            .zip(&b.amplitudes)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Build the full report with the given seed. Deterministic: the same seed
/// yields a byte-identical JSON serialization.
pub fn build_report(seed: u64) -> Result<Report> {
    let mut factorization = Vec::new();
    let mut compiler = Vec::new();
    for s in builtin_stencils() {
        let k = crate::truncation::plan(&s, 1 << 12, None)?.block;
        let n = (2 * k).max(128);
        let r = factorize(&s, n, None)?;
        factorization.push(FactorEntry {
            stencil: s.name.clone(),
            n,
            block: r.plan.block,
            winding: r.winding,
            factorization_residual: factorization_check(&s, n)?,
            unitarity_residual: r.diagnostics.unitarity_residual,
        });
        compiler.push(CompilerEntry {
            stencil: s.name.clone(),
            n,
            max_state_discrepancy: compiler_discrepancy(&s, n, seed, 10)?,
        });
    }

    // Pyramid agreement, Daub4 N=64 (dense-fallback regime) on basis vectors.
    let daub4 = daub4_stencil();
    let pyr = compile_pyramid(&daub4, 64, 4)?;
    let mut pyramid_max_error = 0.0f64;
    for x in 0..64 {
        let psi = StateVector::basis(6, x)?;
        let out = apply_circuit(&psi, &pyr)?;
        let classical = dwt_pyramid(&psi.amplitudes, &daub4, 4)?;
        for i in 0..64 {
            pyramid_max_error = pyramid_max_error.max((out.amplitudes[i] - classical[i]).norm());
        }
    }

    // Measurement sampling on the Daub4 pyramid state of a random input.
    let input = random_state(6, seed)?;
    let pyramid_state = apply_circuit(&input, &pyr)?;
    let shots = 100_000u64;
    let hist = sample_measure(&pyramid_state, shots, seed)?;
    let sampling_tv_distance = hist.tv_distance(&pyramid_state);

    // Continuous transform vs direct formula.
    let n_ct = 64usize;
    let d_phase = 256usize;
    let d_band = 8usize;
    let u = crate::numerics::random_unitary(n_ct, seed.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let limit = 2.0 * std::f64::consts::PI * d_band as f64 / d_phase as f64;
    let mut continuous_max_formula_error = 0.0f64;
    let mut continuous_phase_infidelity = 0.0f64;
    for _ in 0..3 {
        let h = FunctionSpec::RealTable((0..n_ct).map(|_| rng.gen_range(0.0..limit)).collect());
        let out = continuous_transform(&h, &u, d_phase, d_band)?;
        let oracle = continuous_transform_oracle(&h, &u, d_phase)?;
        for (a, b) in out.amplitudes.iter().zip(&oracle) {
            continuous_max_formula_error = continuous_max_formula_error.max((a - b).norm());
        }
        continuous_phase_infidelity = continuous_phase_infidelity.max(1.0 - out.phase_fidelity);
    }
    let distortion = [64usize, 128, 256]
        .iter()
        .map(|&d| Ok((d, quasi_isometry_distortion(d_band, d)?)))
        .collect::<Result<Vec<_>>>()?;

    // Inversion demo over random affine bijections.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let modulus = 1usize << 10;
    let mut inversions_checked = 0usize;
    let mut inversions_exact = 0usize;
    for _ in 0..20 {
        let a = 2 * rng.gen_range(0..modulus / 2) + 1; // odd => coprime to 2^10
        let c = rng.gen_range(0..modulus);
        let f = FunctionSpec::Affine { a, c, modulus };
        for _ in 0..5 {
            let y = rng.gen_range(0..modulus);
            let x = invert_bijection_demo(&f, y, seed)?;
            inversions_checked += 1;
            if (a * x + c) % modulus == y {
                inversions_exact += 1;
            }
        }
    }

    // Gate-count scaling of the Daub4 pyramid over n = 6..12.
    let mut gate_scaling = Vec::new();
    for nq in 6..=12usize {
        let size = 1usize << nq;
        let c = compile_pyramid(&daub4, size, 4)?;
        gate_scaling.push(ScalingEntry {
            n_qubits: nq,
            size,
            elementary_total: gate_count(&c).elementary_total,
        });
    }

    Ok(Report {
        seed,
        factorization,
        compiler,
        pyramid_max_error_daub4_n64: pyramid_max_error,
        sampling_tv_distance,
        sampling_shots: shots,
        continuous_max_formula_error,
        continuous_phase_infidelity,
        distortion,
        inversions_checked,
        inversions_exact,
        gate_scaling_daub4_pyramid: gate_scaling,
    })
}
