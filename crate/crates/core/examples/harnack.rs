//! Harnack inequality for the damped oscillator on a grid of starting points,
//! shifts, exponents and horizons, with Monte Carlo and HJB semigroups.
//!
//! cargo run --release --example harnack

use std::time::Instant;

use gharnack::gcore::GParams;
use gharnack::gsde::{HamiltonianSystem, Rect};
use gharnack::verify::{harnack_grid, Estimator, HarnackOptions, TestFunction};

fn main() -> gharnack::Result<()> {
    let params = GParams::new(1.0, 2.0)?;
    let system = HamiltonianSystem::damped_oscillator(Rect::square(6.0));
    let opts = HarnackOptions::new(&params);
    let start = Instant::now();
    let report = harnack_grid(
        &system,
        &params,
        &TestFunction::InverseQuadratic,
        &[(0.0, 0.0), (1.0, -1.0)],
        &[(0.1, 0.0), (0.3, 0.0)],
        &[1.5, 2.0, 4.0],
        &[0.5, 1.0, 2.0],
        &[Estimator::McDictionary, Estimator::Hjb],
        &opts,
    )?;
    println!("{:>10} {:>5} {:>4} {:>4} {:>5} {:>10} {:>10} {:>9} {:>8}", "z", "|h|", "p", "T", "est", "lhs", "rhs", "slack", "C_fit");
    for r in &report.points {
        println!(
            "{:>10} {:>5} {:>4} {:>4} {:>5} {:>10.6} {:>10.6} {:>9.2e} {:>8.4}{}",
            format!("({},{})", r.z.0, r.z.1),
            r.h_norm,
            r.p,
            r.horizon,
            match r.estimator {
                Estimator::McDictionary => "mc",
                Estimator::Hjb => "hjb",
            },
            r.lhs.value,
            r.rhs_exact.value,
            r.slack,
            r.fitted_c,
            if r.pass { "" } else { "  FAIL" }
        );
    }
    println!("fitted C (exponential form): {:.4}", report.fitted_c);
    println!("C implied by the density factor: {:.4}", report.density_c);
    println!("largest quadratic-term ratio: {:.4}", report.phi_ratio);
    println!("density factor non-increasing in p: {}", report.p_monotone);
    println!("all points pass: {}  ({:.1?})", report.all_pass, start.elapsed());
    Ok(())
}
