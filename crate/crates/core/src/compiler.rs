//! Compilation of cyclic banded unitaries into ancilla-free circuits:
//! the four-factor adder/block form for one filter level, the recursive
//! pyramid compiler, and the lowering pass that expands dense blocks into
//! controlled two-level gates.

use crate::banded::BandStencil;
use crate::circuit::{shuffle_circuit, synth_add_power_of_two, Circuit, Control, Gate, GateKind};
use crate::error::{Error, Result};
use crate::numerics::{is_unitary, two_level_decompose, Mat};
use crate::truncation::{factorize, plan};

fn log2_exact(n: usize) -> Result<usize> {
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::OutOfRange(format!("size {n} is not a power of two >= 2")));
    }
    Ok(n.trailing_zeros() as usize)
}

/// Append extra controls to every gate of `c`; plain X gates that gain
/// controls become MCX so the gate kind keeps matching its arity.
fn with_extra_controls(c: &Circuit, extra: &[Control], width: usize) -> Circuit {
    let mut out = Circuit::new(width);
    for g in &c.gates {
        let mut g = g.clone().with_controls(extra);
        if g.kind == GateKind::X && !g.controls.is_empty() {
            g.kind = GateKind::MCX;
        }
        out.push(g);
    }
    out
}

/// Compile one banded filter level: M_N = Bbar * P * Bbarbar * P^{-1} * S^{-w}
/// becomes, in application order, [w inverse unit-adders] P^{-1} adder,
/// residual block on the low log2 K qubits, P adder, truncated block.
/// The blocks are computed once at the reference size 2K (they do not
/// depend on N). Every gate carries `extra_controls`.
pub fn compile_banded(
    s: &BandStencil<f64>,
    n: usize,
    extra_controls: &[Control],
) -> Result<Circuit> {
    let n_data = log2_exact(n)?;
    let p = plan(s, n, None)?;
    let r = factorize(s, 2 * p.block, None)?;
    let kq = log2_exact(p.block)?;
    let width = extra_controls
        .iter()
        .map(|c| c.q + 1)
        .fold(n_data, usize::max);
    for c in extra_controls {
        if c.q < n_data {
            return Err(Error::OutOfRange(format!(
                "extra control {} overlaps the {n_data} data qubits",
                c.q
            )));
        }
    }

    let mut out = Circuit::new(width);
    let unit = synth_add_power_of_two(n_data, 0)?;
    let half_block = synth_add_power_of_two(n_data, kq - 1)?;
    // S^{-w}: subtract the winding (add it back for negative winding).
    let w = r.winding;
    for _ in 0..w.unsigned_abs() {
        let step = if w > 0 { unit.inverse() } else { unit.clone() };
        out.extend(&with_extra_controls(&step, extra_controls, width));
    }
    out.extend(&with_extra_controls(
        &half_block.inverse(),
        extra_controls,
        width,
    ));
    let block_lines: Vec<usize> = (0..kq).collect();
    out.push(Gate::block(block_lines.clone(), &r.mbarbar_block).with_controls(extra_controls));
    out.extend(&with_extra_controls(&half_block, extra_controls, width));
    out.push(Gate::block(block_lines, &r.mbar_block).with_controls(extra_controls));
    Ok(out)
}

/// Pyramid compiler: at level s the filter acts on the low n-s qubits,
/// zero-controlled on the s high qubits, followed by the perfect shuffle
/// under the same controls; smoothed coefficients end in the low half of
/// the active sector, details in the high half. Levels where the banded
/// factorization is inadmissible fall back to a single dense block of the
/// periodized filter. Output layout: final scaling block first, then
/// details coarsest to finest.
pub fn compile_pyramid(s: &BandStencil<f64>, n: usize, min_size: usize) -> Result<Circuit> {
    let n_data = log2_exact(n)?;
    if min_size < 2 {
        return Err(Error::OutOfRange(format!("min_size {min_size} < 2")));
    }
    let mut out = Circuit::new(n_data);
    let mut level = 0usize;
    loop {
        let n_s = n >> level;
        if n_s < min_size || n_s < 2 {
            break;
        }
        let active_q = n_data - level;
        let controls: Vec<Control> = (active_q..n_data).map(Control::negative).collect();
        match compile_banded(s, n_s, &controls) {
            Ok(c) => out.extend(&with_extra_controls(&c, &[], n_data)),
            Err(Error::NoAdmissibleBlockSize { .. }) | Err(Error::Inadmissible(_)) => {
                // Constant-size terminal level: one dense block of the
                // periodized filter.
                let m = s.materialize_relaxed(n_s)?;
                let (ok, residual) = is_unitary(&m, 1e-10)?;
                if !ok {
                    return Err(Error::NotUnitary { residual, tol: 1e-10 });
                }
                let lines: Vec<usize> = (0..active_q).collect();
                out.push(Gate::block(lines, &m).with_controls(&controls));
            }
            Err(e) => return Err(e),
        }
        let active: Vec<usize> = (0..active_q).collect();
        let sh = shuffle_circuit(n_data, &active);
        out.extend(&with_extra_controls(&sh, &controls, n_data));
        level += 1;
    }
    if level == 0 {
        return Err(Error::OutOfRange(format!(
            "min_size {min_size} exceeds transform size {n}"
        )));
    }
    Ok(out)
}

fn bit_of(x: usize, b: usize) -> usize {
    (x >> b) & 1
}

/// Expand every dense block into controlled two-level gates (Gray-code
/// routing MCXs around a singly-controlled 2x2 block per factor). Other
/// gates pass through unchanged; identity blocks disappear.
pub fn lower_blocks(c: &Circuit) -> Result<Circuit> {
    let mut out = Circuit::new(c.n_qubits);
    for g in &c.gates {
        if g.kind != GateKind::BLOCK {
            out.push(g.clone());
            continue;
        }
        let m = g
            .block_matrix()
            .ok_or_else(|| Error::InvalidGate { pos: 0, reason: "BLOCK without matrix".into() })?;
        let lines = &g.targets;
        for f in two_level_decompose(&m)? {
            let diff = f.i ^ f.j;
            let bits: Vec<usize> = (0..lines.len()).filter(|&b| bit_of(diff, b) == 1).collect();
            let pivot = *bits.last().expect("two-level factor has i != j");
            // Route |j> to i ^ (1 << pivot) by flipping the other
            // differing bits one at a time, conditioned on the full
            // current pattern of the moving state.
            let mut current = f.j;
            let mut routing: Vec<Gate> = Vec::new();
            for &b in &bits[..bits.len() - 1] {
                let controls: Vec<Control> = (0..lines.len())
                    .filter(|&q| q != b)
                    .map(|q| Control {
                        q: lines[q],
                        pol: bit_of(current, q) as u8,
                    })
                    .collect();
                routing.push(Gate::mcx(controls, lines[b]).with_controls(&g.controls));
                current ^= 1 << b;
            }
            for r in &routing {
                out.push(r.clone());
            }
            // 2x2 block on the pivot line; rows of `f.m` are ordered
            // (i, j), so reorder when i carries pivot bit 1.
            let ib = bit_of(f.i, pivot);
            let u2 = if ib == 0 {
                Mat::from_fn(2, 2, |r, c| f.m[r][c])
            } else {
                Mat::from_fn(2, 2, |r, c| f.m[1 - r][1 - c])
            };
            let controls: Vec<Control> = (0..lines.len())
                .filter(|&q| q != pivot)
                .map(|q| Control {
                    q: lines[q],
                    pol: bit_of(f.i, q) as u8,
                })
                .collect();
            out.push(
                Gate::block(vec![lines[pivot]], &u2)
                    .with_controls(&controls)
                    .with_controls(&g.controls),
            );
            for r in routing.iter().rev() {
                out.push(r.clone());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banded::{daub4_stencil, haar_stencil, identity_stencil};
    use crate::numerics::random_unitary;
    use crate::simulator::{apply_circuit, apply_matrix, random_state, StateVector};
    use crate::C64;

    fn max_discrepancy(s: &BandStencil<f64>, n: usize, states: usize) -> f64 {
        let c = compile_banded(s, n, &[]).unwrap();
        let m = s.materialize(n).unwrap();
        let nq = n.trailing_zeros() as usize;
        let mut worst = 0.0f64;
        for seed in 0..states as u64 {
            let psi = random_state(nq, seed).unwrap();
            let via_circuit = apply_circuit(&psi, &c).unwrap();
            let via_matrix = apply_matrix(&psi, &m).unwrap();
            let err: f64 = via_circuit
                .amplitudes
                .iter()
                .zip(&via_matrix.amplitudes)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn banded_identity_compiles_to_identity() {
        assert!(max_discrepancy(&identity_stencil(), 32, 5) <= 1e-12);
    }

    #[test]
    fn banded_haar_64_matches_matrix() {
        assert!(max_discrepancy(&haar_stencil(), 64, 20) <= 1e-10);
    }

    #[test]
    fn banded_daub4_128_matches_matrix() {
        assert!(max_discrepancy(&daub4_stencil(), 128, 20) <= 1e-9);
    }

    #[test]
    fn banded_random_qmf_matches_matrix() {
        let s = BandStencil::<f64>::random_qmf(2, 7);
        let n = 64.max(2 * plan(&s, 1024, None).unwrap().block);
        assert!(max_discrepancy(&s, n, 10) <= 1e-9);
    }

    #[test]
    fn banded_rejects_overlapping_extra_control() {
        let err = compile_banded(&haar_stencil(), 64, &[Control::negative(3)]);
        assert!(err.is_err());
    }

    #[test]
    fn pyramid_haar_constant_input_concentrates() {
        let c = compile_pyramid(&haar_stencil(), 8, 2).unwrap();
        assert_eq!(c.n_qubits, 3);
        let amp = C64::new(1.0 / (8f64).sqrt(), 0.0);
        let psi = StateVector::from_amplitudes(&vec![amp; 8]).unwrap();
        let out = apply_circuit(&psi, &c).unwrap();
        assert!((out.amplitudes[0] - C64::new(1.0, 0.0)).norm() <= 1e-12);
        for i in 1..8 {
            assert!(out.amplitudes[i].norm() <= 1e-12, "i={i}");
        }
    }

    #[test]
    fn pyramid_single_level_is_banded_plus_shuffle() {
        let s = haar_stencil();
        let n = 64;
        let pyr = compile_pyramid(&s, n, n).unwrap();
        let mut direct = compile_banded(&s, n, &[]).unwrap();
        let active: Vec<usize> = (0..6).collect();
        direct.extend(&shuffle_circuit(6, &active));
        for seed in 0..5u64 {
            let psi = random_state(6, seed).unwrap();
            let a = apply_circuit(&psi, &pyr).unwrap();
            let b = apply_circuit(&psi, &direct).unwrap();
            assert!(a.max_diff(&b) <= 1e-12);
        }
    }

    #[test]
    fn pyramid_daub4_small_n_falls_back_to_blocks() {
        // All levels inadmissible for the banded form; dense fallback only.
        let c = compile_pyramid(&daub4_stencil(), 16, 4).unwrap();
        assert_eq!(c.n_qubits, 4);
        assert!(c.validate().is_ok());
        let psi = random_state(4, 3).unwrap();
        let out = apply_circuit(&psi, &c).unwrap();
        assert!((out.norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn pyramid_rejects_min_size_above_n() {
        assert!(compile_pyramid(&haar_stencil(), 8, 16).is_err());
    }

    #[test]
    fn lower_blocks_identity_removed() {
        let mut c = Circuit::new(2);
        c.push(Gate::block(vec![0, 1], &Mat::identity(4)));
        let low = lower_blocks(&c).unwrap();
        assert!(low.gates.is_empty());
    }

    #[test]
    fn lower_blocks_2x2_single_gate() {
        let u = random_unitary(2, 5);
        let mut c = Circuit::new(1);
        c.push(Gate::block(vec![0], &u));
        let low = lower_blocks(&c).unwrap();
        assert_eq!(low.gates.len(), 1);
        let psi = random_state(1, 1).unwrap();
        let a = apply_circuit(&psi, &c).unwrap();
        let b = apply_circuit(&psi, &low).unwrap();
        assert!(a.max_diff(&b) <= 1e-12);
    }

    #[test]
    fn lower_blocks_random_block_matches() {
        let u = random_unitary(8, 9);
        let mut c = Circuit::new(4);
        c.push(Gate::block(vec![0, 2, 3], &u).with_controls(&[Control::positive(1)]));
        let low = lower_blocks(&c).unwrap();
        low.validate().unwrap();
        for seed in 0..10u64 {
            let psi = random_state(4, seed).unwrap();
            let a = apply_circuit(&psi, &c).unwrap();
            let b = apply_circuit(&psi, &low).unwrap();
            assert!(a.max_diff(&b) <= 1e-10);
        }
    }

    #[test]
    fn lower_blocks_compiled_haar_matches() {
        let c = compile_banded(&haar_stencil(), 64, &[]).unwrap();
        let low = lower_blocks(&c).unwrap();
        low.validate().unwrap();
        for seed in 0..20u64 {
            let psi = random_state(6, seed).unwrap();
            let a = apply_circuit(&psi, &c).unwrap();
            let b = apply_circuit(&psi, &low).unwrap();
            assert!(a.max_diff(&b) <= 1e-9);
        }
    }
}
