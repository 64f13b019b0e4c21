//! Second-order Melnikov function when the first-order term is exact.
use melnikov_kit::abelian::QuadOptions;
use melnikov_kit::algebra::{exterior_d, parse_poly, OneForm};
use melnikov_kit::foliation::PencilSpec;
use melnikov_kit::melnikov::{cycle_family, higher_melnikov, DeformationSpec};
use melnikov_kit::numeric::C64;

fn main() -> melnikov_kit::Result<()> {
    let base = PencilSpec::hamiltonian(parse_poly("(x^2 + y^2)/2")?)?;
    let w1 = exterior_d(&parse_poly("x^3*y - x*y")?);
    let w2 = OneForm::new(parse_poly("(x^2 - 1)*y")?, parse_poly("x*y^2")?);
    let def = DeformationSpec::new(base, vec![w1, w2], None)?;
    let levels: Vec<C64> = (1..=6).map(|i| C64::new(0.4 * i as f64, 0.0)).collect();
    let (fib, cycles, _) = cycle_family(&def.base, 0, &levels, 96)?;
    let m = higher_melnikov(&def, &fib, &cycles, 3, None, None, &QuadOptions::default())?;
    println!("first non-vanishing order: {}", m.order);
    for link in &m.chain {
        println!("  {link:?}");
    }
    for s in &m.samples {
        println!("t = {:.2}  M = {:+.10}", s.t.re, s.value);
    }
    Ok(())
}
