//! Parse polynomials, build one-forms, take d and wedge products.
use melnikov_kit::algebra::{exterior_d, parse_poly, wedge, OneForm};

fn main() -> melnikov_kit::Result<()> {
    let f = parse_poly("x^3 - 3*x + y^2")?;
    let g = parse_poly("(1+2i)*x*y - y^3/2")?;
    println!("f = {f}\ng = {g}");
    let df = exterior_d(&f);
    println!("df = {df}");
    let w = OneForm::new(parse_poly("(x^2 - 1)*y")?, parse_poly("0")?);
    println!("w = {w}, deg {:?}", w.degree());
    println!("dw = {}", w.d().coef);
    println!("df ^ dg = {}", wedge(&df, &exterior_d(&g)).coef);
    for (n, part) in w.homogeneous_parts() {
        println!("  degree {n} part: {part}");
    }
    Ok(())
}
