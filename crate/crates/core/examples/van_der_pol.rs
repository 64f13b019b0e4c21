//! First Melnikov function of the van der Pol deformation and its zeros.
use melnikov_kit::abelian::QuadOptions;
use melnikov_kit::algebra::{parse_poly, OneForm};
use melnikov_kit::foliation::PencilSpec;
use melnikov_kit::melnikov::{count_zeros, cycle_family, first_melnikov, DeformationSpec};
use melnikov_kit::numeric::C64;

fn main() -> melnikov_kit::Result<()> {
    let base = PencilSpec::hamiltonian(parse_poly("(x^2 + y^2)/2")?)?;
    let def = DeformationSpec::new(base, vec![OneForm::new(parse_poly("(x^2 - 1)*y")?, parse_poly("0")?)], None)?;
    let levels: Vec<C64> = (0..13).map(|i| C64::new(0.2 + 0.2 * i as f64, 0.0)).collect();
    let (fib, cycles, _) = cycle_family(&def.base, 0, &levels, 96)?;
    let m = first_melnikov(&def, &fib, &cycles, &QuadOptions::default())?;
    for s in &m.samples {
        let r2 = 2.0 * s.t.re;
        let closed = -std::f64::consts::PI * r2 * (1.0 - r2 / 4.0);
        println!("t = {:.2}  M1 = {:+.10}  closed form {:+.10}", s.t.re, s.value.re, closed);
    }
    let zeros = count_zeros(&m.samples, [0.2, 2.6], Some(2.0), m.zero_tol, None)?;
    for z in &zeros.zeros {
        println!("zero in [{:.4}, {:.4}]", z.lo, z.hi);
    }
    println!("{}", zeros.message);
    Ok(())
}
