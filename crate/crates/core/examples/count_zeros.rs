//! Zero brackets and a local multiplicity fit on sampled values.
use melnikov_kit::melnikov::{count_zeros, Sample};
use melnikov_kit::numeric::C64;

fn main() -> melnikov_kit::Result<()> {
    // (t - 1)^2 (t - 3) sampled on [0, 4]
    let samples: Vec<Sample> = (0..=40)
        .map(|i| {
            let t = 0.1 * i as f64;
            Sample { t: C64::new(t, 0.0), value: C64::new((t - 1.0).powi(2) * (t - 3.0), 0.0), error: 1e-14 }
        })
        .collect();
    let rep = count_zeros(&samples, [0.0, 4.0], Some(1.0), 1e-12, None)?;
    for z in &rep.zeros {
        println!("sign change in [{:.2}, {:.2}]", z.lo, z.hi);
    }
    if let Some(fit) = &rep.fit {
        println!("fit at 1: {fit:?}");
    }
    println!("{}", rep.message);
    Ok(())
}
