//! Finite-difference Melnikov values from the perturbed holonomy, compared
//! with the quadrature result.
use melnikov_kit::abelian::QuadOptions;
use melnikov_kit::algebra::{parse_poly, OneForm};
use melnikov_kit::foliation::PencilSpec;
use melnikov_kit::melnikov::{cycle_family, first_melnikov, DeformationSpec};
use melnikov_kit::numeric::C64;
use melnikov_kit::oracle::{holonomy, melnikov_fd, OracleOptions};

fn main() -> melnikov_kit::Result<()> {
    let base = PencilSpec::hamiltonian(parse_poly("(x^2 + y^2)/2")?)?;
    let def = DeformationSpec::new(base, vec![OneForm::new(parse_poly("(x^2 - 1)*y")?, parse_poly("0")?)], None)?;
    let levels = [C64::new(0.5, 0.0), C64::new(1.5, 0.0)];
    let (fib, cycles, _) = cycle_family(&def.base, 0, &levels, 96)?;
    let m = first_melnikov(&def, &fib, &cycles, &QuadOptions::default())?;
    let opts = OracleOptions::default();
    for (s, c) in m.samples.iter().zip(&cycles) {
        let h = holonomy(&def, &fib, c, s.t, 0.01, &opts)?;
        println!("t = {:.2}  h(t) at eps 0.01 = {:.8}  ({} steps)", s.t.re, h.h, h.steps);
        let fd = melnikov_fd(&def, &fib, c, s.t, 1, &[], None, 6, &opts)?;
        println!("  quadrature {:+.8}  holonomy {:+.8}  est. error {:.1e}", s.value, fd.value, fd.error);
    }
    Ok(())
}
