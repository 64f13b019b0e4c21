//! Membership in the tangent space of a pencil, with a witness (P, Q).
use melnikov_kit::algebra::{parse_poly, OneForm};
use melnikov_kit::foliation::PencilSpec;
use melnikov_kit::relexact::{tangent_form, tangent_membership, TangentOutcome};

fn main() -> melnikov_kit::Result<()> {
    let spec = PencilSpec::new(parse_poly("x^2 + y^2 - 1")?, parse_poly("x + 2*y + 3")?, 1, 2)?;
    let w = tangent_form(&spec, &parse_poly("x*y - 1")?, &parse_poly("y")?);
    println!("omega = {w}");
    report(tangent_membership(&w, &spec)?);
    let other = OneForm::new(parse_poly("y^2")?, parse_poly("0")?);
    println!("omega = {other}");
    report(tangent_membership(&other, &spec)?);
    Ok(())
}

fn report(out: TangentOutcome) {
    match out {
        TangentOutcome::Witness(w) => println!("  tangent: P = {}, Q = {}, exact {}", w.p_poly, w.q_poly, w.residual_zero),
        TangentOutcome::NotTangent { cokernel_support, lsq_residual } => {
            println!("  not tangent: cokernel support {cokernel_support}, least squares residual {lsq_residual:.2e}")
        }
    }
}
