//! Gradient bounds for `f = tanh(y)` under the damped oscillator: difference
//! quotients of the semigroup against `‖f‖_∞ √Σ(T)` across horizons.
//!
//! cargo run --release --example gradient

use gharnack::gcore::GParams;
use gharnack::gsde::{HamiltonianSystem, Rect};
use gharnack::verify::{gradient_shape, GradientOptions, TestFunction};

fn main() -> gharnack::Result<()> {
    let params = GParams::new(1.0, 2.0)?;
    let system = HamiltonianSystem::damped_oscillator(Rect::square(6.0));
    let opts = GradientOptions::new(&params);
    let shape = gradient_shape(&system, &params, &TestFunction::TanhY, (0.0, 0.0), &[0.5, 1.0, 2.0], 2.0, &opts)?;
    for r in &shape.reports {
        println!("T = {}: Σ(T) = {:.3}, max slope {:.4}, C = {:.4}, c(p) = {:.4}", r.horizon, r.sigma, r.max_slope,
            r.fitted_c_sup, r.fitted_c_p);
        for e in &r.log_density {
            println!("    |h| = {:<6} E|log R| = {:.3e} ± {:.1e}   E|R-1|^q = {:.3e}", e.h_norm, e.abs_log.value,
                e.abs_log.se, e.abs_dev.value);
        }
        println!("    fit E|log R| = a + b|h|: a = {:.2e}, b = {:.3}", r.log_fit.0, r.log_fit.1);
    }
    println!("constants {:?}, max deviation {:.1}%", shape.constants, 100.0 * shape.max_deviation);
    println!("log-slope against log Σ(T): {:.3}", shape.log_slope);
    println!("stable: {}, slope in [0.4, 0.6]: {}", shape.stable, shape.slope_ok);
    Ok(())
}
