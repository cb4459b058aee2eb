//! Weak solutions of the perturbed oscillator: exponential integrability of
//! the perturbation under the reference Gaussian and the Novikov estimate on
//! the short horizon it licenses.
//!
//! cargo run --release --example weak_solution

use gharnack::gcore::GParams;
use gharnack::gsde::{parse_drift, HamiltonianSystem, Rect};
use gharnack::verify::{exponential_moment, weak_solution_check, WeakSolutionOptions};

fn main() -> gharnack::Result<()> {
    let params = GParams::new(1.0, 2.0)?;
    let domain = Rect::square(6.0);
    let opts = WeakSolutionOptions::new(&params);

    for src in ["sin(x)", "x"] {
        let b1 = parse_drift(src, domain)?;
        let system = HamiltonianSystem::damped_oscillator(domain).with_perturbation(Some(b1), None);
        for eps in [0.5, 0.9, 1.5] {
            let r = weak_solution_check(&system, eps, 2.0, &params, &opts)?;
            let moment = r.hypothesis.value.map_or("diverges".to_string(), |v| format!("{v:.6}"));
            let novikov = match (&r.novikov, &r.overflow) {
                (Some(n), _) => format!("{:.6} ± {:.1e}", n.value, n.se),
                (None, Some(msg)) => msg.clone(),
                (None, None) => "-".into(),
            };
            println!(
                "b̄₁ = {src:<6} ε = {eps:<4} moment {moment:<10} t₀ = {:.4} δ = {:.4} Novikov {novikov:<22} weak solution {}",
                r.t0, r.delta, r.weak_solution
            );
        }
    }

    let linear = Some(parse_drift("x", domain)?);
    println!("threshold scan for b̄₁ = x under N(0, 1/2):");
    for eps in [0.9, 0.99, 0.999, 1.0, 1.001] {
        let m = exponential_moment(&linear, &None, eps, 0.5)?;
        let exact = if eps < 1.0 { format!("{:.6}", 1.0 / (1.0 - eps).sqrt()) } else { "inf".into() };
        println!("  ε = {eps:<6} tail slope {:>9.4}  value {:?}  closed form {exact}", m.tail_slope, m.value);
    }
    Ok(())
}
