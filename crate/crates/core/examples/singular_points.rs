//! Singular points of a logarithmic foliation and the expected number of
//! Morse center candidates.
use melnikov_kit::algebra::{parse_poly, Scalar};
use melnikov_kit::foliation::{logarithmic_center_count, logarithmic_form, singular_points, SingularOptions};

fn main() -> melnikov_kit::Result<()> {
    let factors = [parse_poly("x^2 + y^2 - 1")?, parse_poly("x^2 + 3*x*y - y^2 + x - 2")?];
    let log = logarithmic_form(&factors, &[Scalar::one(), Scalar::from_int(-1)])?;
    println!("omega = {}", log.omega);
    for s in singular_points(&log.omega, &log.factors, &SingularOptions::default())? {
        println!(
            "({:.5}, {:.5})  {:?}  trace {:.3}  det {:.3}",
            s.location[0], s.location[1], s.kind, s.trace, s.det
        );
    }
    println!("expected center candidates: {}", logarithmic_center_count(&[2, 2]));
    Ok(())
}
