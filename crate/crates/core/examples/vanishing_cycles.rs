//! Critical values, a vanishing cycle, transport and a monodromy loop.
use melnikov_kit::algebra::parse_poly;
use melnikov_kit::fibration::{critical_data, monodromy_loop, transport, vanishing_family, Fibration, TPath, TraceOptions};
use melnikov_kit::foliation::PencilSpec;
use melnikov_kit::numeric::C64;

fn main() -> melnikov_kit::Result<()> {
    let spec = PencilSpec::hamiltonian(parse_poly("x^3 - 3*x + y^2")?)?;
    let fib = Fibration::new(&spec);
    let data = critical_data(&spec)?;
    for c in &data.points {
        println!("critical point ({:.4}, {:.4}) value {:.4}", c.point[0], c.point[1], c.value);
    }
    let idx = data.points.iter().position(|c| (c.value + 2.0).norm() < 1e-9).expect("value -2");
    let base = C64::new(-1.0, 0.5);
    let cycle = vanishing_family(&fib, &data, idx, &[base], 96)?.remove(0);
    println!("cycle at {base}: {} vertices, diameter {:.4}, residual {:.1e}", cycle.len(), cycle.diameter(), cycle.max_residual(&fib));

    let opts = TraceOptions::for_data(&spec, &data, None);
    let moved = transport(&fib, &cycle, &TPath::segment(base, C64::new(0.0, 0.5)), &opts)?;
    println!("transported to {}: diameter {:.4}", moved.level, moved.diameter());

    // a loop around the other critical value 2
    let looped = monodromy_loop(&fib, &cycle, &TPath::circle(base, C64::new(2.0, 0.0), 1.0), &opts)?;
    println!("after a loop around 2: diameter {:.4}", looped.diameter());
    Ok(())
}
