//! Ancilla-free gate IR: X / SWAP / multi-controlled X / dense unitary
//! blocks, plus the adder and shuffle synthesis routines and gate counting.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{is_unitary, two_level_decompose, Mat};

/// Control line with polarity: `pol = 1` fires on |1>, `pol = 0` on |0>.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub q: usize,
    pub pol: u8,
}

impl Control {
    pub fn positive(q: usize) -> Self {
        Control { q, pol: 1 }
    }

    pub fn negative(q: usize) -> Self {
        Control { q, pol: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    X,
    SWAP,
    MCX,
    BLOCK,
}

/// One gate. `targets` and control qubits must be disjoint; BLOCK carries a
/// row-major unitary of dimension 2^|targets| over its targets (targets[0]
/// is the least significant bit of the block index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<Control>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
}

impl Gate {
    pub fn x(q: usize) -> Self {
        Gate {
            kind: GateKind::X,
            targets: vec![q],
            controls: Vec::new(),
            matrix: None,
        }
    }

    pub fn swap(a: usize, b: usize) -> Self {
        Gate {
            kind: GateKind::SWAP,
            targets: vec![a, b],
            controls: Vec::new(),
            matrix: None,
        }
    }

    pub fn mcx(controls: Vec<Control>, target: usize) -> Self {
        Gate {
            kind: GateKind::MCX,
            targets: vec![target],
            controls,
            matrix: None,
        }
    }

    pub fn block(targets: Vec<usize>, m: &Mat<f64>) -> Self {
        let d = m.rows();
        let mut flat = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let z = m.get(i, j);
                flat.push([z.re, z.im]);
            }
        }
        Gate {
            kind: GateKind::BLOCK,
            targets,
            controls: Vec::new(),
            matrix: Some(flat),
        }
    }

    pub fn with_controls(mut self, extra: &[Control]) -> Self {
        self.controls.extend_from_slice(extra);
        self
    }

    /// Dense matrix of a BLOCK gate.
    pub fn block_matrix(&self) -> Option<Mat<f64>> {
        let flat = self.matrix.as_ref()?;
        let d = 1usize << self.targets.len();
        if flat.len() != d * d {
            return None;
        }
        Some(Mat::from_fn(d, d, |i, j| {
            let [re, im] = flat[i * d + j];
            Complex::new(re, im)
        }))
    }

    fn validate(&self, pos: usize, n_qubits: usize) -> Result<()> {
        let reject = |reason: String| Err(Error::InvalidGate { pos, reason });
        let expected_targets = match self.kind {
            GateKind::X | GateKind::MCX => Some(1),
            GateKind::SWAP => Some(2),
            GateKind::BLOCK => None,
        };
        if let Some(t) = expected_targets {
            if self.targets.len() != t {
                return reject(format!(
                    "{:?} takes {t} target(s), got {}",
                    self.kind,
                    self.targets.len()
                ));
            }
        }
        if self.targets.is_empty() {
            return reject("gate has no targets".into());
        }
        for &t in &self.targets {
            if t >= n_qubits {
                return reject(format!("target {t} out of range for {n_qubits} qubits"));
            }
        }
        let mut seen = self.targets.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.targets.len() {
            return reject("duplicate target".into());
        }
        for c in &self.controls {
            if c.q >= n_qubits {
                return reject(format!("control {} out of range for {n_qubits} qubits", c.q));
            }
            if c.pol > 1 {
                return reject(format!("control polarity {} is not 0/1", c.pol));
            }
            if self.targets.contains(&c.q) {
                return reject(format!("qubit {} is both target and control", c.q));
            }
        }
        let mut cq: Vec<usize> = self.controls.iter().map(|c| c.q).collect();
        cq.sort_unstable();
        cq.dedup();
        if cq.len() != self.controls.len() {
            return reject("duplicate control qubit".into());
        }
        match self.kind {
            GateKind::BLOCK => {
                let m = self
                    .block_matrix()
                    .ok_or_else(|| Error::InvalidGate {
                        pos,
                        reason: "BLOCK matrix missing or of wrong dimension".into(),
                    })?;
                let (ok, residual) = is_unitary(&m, 1e-10)?;
                if !ok {
                    return reject(format!("BLOCK matrix not unitary (residual {residual:.3e})"));
                }
            }
            _ => {
                if self.matrix.is_some() {
                    return reject("matrix field only valid on BLOCK".into());
                }
            }
        }
        Ok(())
    }

    /// Inverse gate: self-inverse for X/SWAP/MCX, dagger for BLOCK.
    pub fn inverse(&self) -> Gate {
        match self.kind {
            GateKind::BLOCK => {
                let m = self.block_matrix().expect("validated BLOCK carries matrix");
                Gate::block(self.targets.clone(), &m.dagger()).with_controls(&self.controls)
            }
            _ => self.clone(),
        }
    }
}

/// Gate list in application order: `gates[0]` acts first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, g: Gate) {
        self.gates.push(g);
    }

    pub fn extend(&mut self, other: &Circuit) {
        assert_eq!(self.n_qubits, other.n_qubits);
        self.gates.extend(other.gates.iter().cloned());
    }

    pub fn validate(&self) -> Result<()> {
        for (pos, g) in self.gates.iter().enumerate() {
            g.validate(pos, self.n_qubits)?;
        }
        Ok(())
    }

    /// Reversed gate list with each gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn from_json(text: &str) -> Result<Circuit> {
        let c: Circuit = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

/// Adder |x> -> |x + 2^m mod 2^n>: a descending chain of multi-controlled
/// NOTs rippling the carry, then the flip of bit m itself. m = n gives the
/// empty circuit (adding 2^n is the identity).
pub fn synth_add_power_of_two(n: usize, m: usize) -> Result<Circuit> {
    if m > n {
        return Err(Error::OutOfRange(format!(
            "adder exponent {m} exceeds register width {n}"
        )));
    }
    let mut c = Circuit::new(n);
    if m == n {
        return Ok(c);
    }
    for t in ((m + 1)..n).rev() {
        let controls = (m..t).map(Control::positive).collect();
        c.push(Gate::mcx(controls, t));
    }
    c.push(Gate::x(m));
    Ok(c)
}

/// Perfect shuffle on the listed qubit lines: index map
/// i -> (i mod 2) * 2^(a-1) + floor(i / 2), realized as a chain of a-1
/// adjacent SWAPs moving the lowest line to the top.
pub fn shuffle_circuit(n_qubits: usize, active: &[usize]) -> Circuit {
    let mut c = Circuit::new(n_qubits);
    for w in active.windows(2) {
        c.push(Gate::swap(w[0], w[1]));
    }
    c
}

/// Per-kind and elementary-equivalent gate counts.
///
/// Charging: X and CX (MCX with one control) cost 1; MCX with c >= 2
/// controls costs 2c-1; SWAP costs 3 (times 2c+1 when controlled); BLOCK
/// costs its two-level factor count times 2c+1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub x: usize,
    pub swap: usize,
    pub mcx: usize,
    pub block: usize,
    pub elementary_total: usize,
}

pub fn gate_count(c: &Circuit) -> GateCounts {
    let mut out = GateCounts::default();
    for g in &c.gates {
        let nc = g.controls.len();
        match g.kind {
            GateKind::X => {
                out.x += 1;
                out.elementary_total += if nc >= 2 { 2 * nc - 1 } else { 1 };
            }
            GateKind::MCX => {
                out.mcx += 1;
                out.elementary_total += if nc >= 2 { 2 * nc - 1 } else { 1 };
            }
            GateKind::SWAP => {
                out.swap += 1;
                out.elementary_total += 3 * (2 * nc + 1);
            }
            GateKind::BLOCK => {
                out.block += 1;
                let factors = g
                    .block_matrix()
                    .and_then(|m| two_level_decompose(&m).ok())
                    .map(|f| f.len())
                    .unwrap_or(0);
                out.elementary_total += factors * (2 * nc + 1);
            }
        }
    }
    out
}
