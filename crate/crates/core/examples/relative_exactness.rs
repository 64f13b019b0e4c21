//! Decompose a form as dg + p df, then confirm with the integral test.
use melnikov_kit::abelian::{QuadOptions, RationalForm};
use melnikov_kit::algebra::{exterior_d, parse_poly, OneForm};
use melnikov_kit::foliation::PencilSpec;
use melnikov_kit::melnikov::pole_fn_string;
use melnikov_kit::numeric::C64;
use melnikov_kit::relexact::{decompose, is_relatively_exact, DecomposeOutcome, DecompositionBounds, Factors, Normalization, PoleForm};

fn main() -> melnikov_kit::Result<()> {
    let spec = PencilSpec::hamiltonian(parse_poly("(x^2 + y^2)/2 - x^3/3")?)?;
    let g = parse_poly("x^2*y + y^3")?;
    let p = parse_poly("x - 2*y")?;
    let w = &exterior_d(&g) + &exterior_d(&spec.f).mul_poly(&p);
    println!("omega = {w}");
    let fac = Factors::of(&spec);
    match decompose(&PoleForm::polynomial(w.clone(), 1), &spec, Normalization::Df, &DecompositionBounds::fixed(3, 1))? {
        DecomposeOutcome::Found(d) => println!("g = {}\np = {}\nexact: {}", pole_fn_string(&d.g, &fac), pole_fn_string(&d.p, &fac), d.residual_zero),
        other => println!("no decomposition: {other:?}"),
    }
    let levels = [C64::new(0.05, 0.02), C64::new(-0.1, 0.1)];
    let rep = is_relatively_exact(&RationalForm::polynomial(w), &spec, &levels, 1e-8, &QuadOptions::default())?;
    println!("integral test: {}", rep.relatively_exact);

    let ydx = RationalForm::polynomial(OneForm::new(parse_poly("y")?, parse_poly("0")?));
    let rep = is_relatively_exact(&ydx, &spec, &levels, 1e-8, &QuadOptions::default())?;
    for e in &rep.evidence {
        println!("y dx over {} cycle {} at {:.3}: {:.3e}", e.cycle, e.index, e.level, e.integral.value);
    }
    println!("y dx relatively exact: {}", rep.relatively_exact);
    Ok(())
}
