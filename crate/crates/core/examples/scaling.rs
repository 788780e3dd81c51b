//! Prints elementary-gate totals for the compiled Daubechies-4 pyramid as the
//! register width grows, split by gate kind.

use bandqc::banded::daub4_stencil;
use bandqc::circuit::gate_count;
use bandqc::compiler::compile_pyramid;
fn main() {
    let s = daub4_stencil();
    for nq in 6..=12usize {
        let c = compile_pyramid(&s, 1usize << nq, 4).unwrap();
        let g = gate_count(&c);
        println!("n={nq} N={} total={} x={} swap={} mcx={} block={}", 1usize<<nq, g.elementary_total, g.x, g.swap, g.mcx, g.block);
    }
}
