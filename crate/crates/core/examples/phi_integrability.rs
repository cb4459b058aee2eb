//! Integrability of the inverse inner expectation near s = 0, with the
//! small-ball comparison.
//!
//! cargo run --release --example phi_integrability

use gharnack::gcore::GParams;
use gharnack::verify::{phi_integrability_check, IntegrabilityOptions};

fn main() -> gharnack::Result<()> {
    let params = GParams::new(1.0, 2.0)?;
    let opts = IntegrabilityOptions::default();
    for (p, z) in [(2.0, (0.0, 0.0)), (4.0, (0.0, 0.0)), (2.0, (1.0, -1.0))] {
        let r = phi_integrability_check(p, z, 1.0, &params, &opts)?;
        println!(
            "p = {p}, z = {z:?}: integral {:.5} (closed form {:.5}), inner exponent {:.3}, integrable at 0: {}",
            r.integral, r.integral_oracle, r.inner_exponent, r.integrable_at_zero
        );
    }
    let r = phi_integrability_check(2.0, (0.0, 0.0), 1.0, &params, &opts)?;
    for e in r.entries.iter().step_by(6) {
        println!("  s = {:.4}: inner {:.4e} ± {:.1e} (closed form {:.4e})", e.s, e.inner, e.inner_se, e.oracle);
    }
    println!("ball exponent {:.3} against the stated {}", r.ball_exponent, r.stated_ball_exponent);
    println!("{}", r.note);
    Ok(())
}
