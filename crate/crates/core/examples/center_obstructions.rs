//! Center obstructions of a germ normalized to d(xy) + higher order terms.
use melnikov_kit::algebra::{exterior_d, parse_poly, OneForm};
use melnikov_kit::center::obstructions;

fn main() -> melnikov_kit::Result<()> {
    let germs = [
        ("Hamiltonian", exterior_d(&parse_poly("x*y + x^3 - 2*x*y^2 + y^4")?)),
        ("reversible", OneForm::new(parse_poly("y + x*y")?, parse_poly("x")?)),
        ("generic", OneForm::new(parse_poly("y + x^2 + 2*x*y^2")?, parse_poly("x + y^2 - x^2*y")?)),
    ];
    for (name, w) in &germs {
        let rep = obstructions(w, 10)?;
        println!("{name}: {w}");
        for (n, v) in &rep.values {
            println!("  P_{n} = {v}");
        }
    }
    Ok(())
}
