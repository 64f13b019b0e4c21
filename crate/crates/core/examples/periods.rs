//! Periods of monomial forms over a vanishing cycle of `xy`.
use melnikov_kit::abelian::{integrate, periods, QuadOptions, RationalForm};
use melnikov_kit::algebra::parse_poly;
use melnikov_kit::fibration::{critical_data, vanishing_family, Fibration};
use melnikov_kit::foliation::PencilSpec;
use melnikov_kit::numeric::C64;

fn main() -> melnikov_kit::Result<()> {
    let spec = PencilSpec::hamiltonian(parse_poly("x*y")?)?;
    let fib = Fibration::new(&spec);
    let data = critical_data(&spec)?;
    let t = C64::new(0.5, 0.2);
    let cycle = vanishing_family(&fib, &data, 0, &[t], 96)?.remove(0);
    let q = QuadOptions::default();
    let ydx = integrate(&fib, &RationalForm::parse("y, 0")?, &cycle, &q)?;
    println!("int y dx = {:.12} (2 pi i t = {:.12}), error {:.1e}", ydx.value, C64::new(0.0, 2.0 * std::f64::consts::PI) * t, ydx.error);
    let pv = periods(&fib, &cycle, 2, &q)?;
    for (label, v) in pv.labels.iter().zip(&pv.values) {
        println!("{label:>12}  {:.6}", v.value);
    }
    Ok(())
}
