//! Long-run behaviour of the damped oscillator under the lower volatility:
//! empirical second moments against the Lyapunov covariance, window by window.
//!
//! cargo run --release --example invariant

use gharnack::gcore::GParams;
use gharnack::verify::{invariant_check, InvariantOptions};

fn main() -> gharnack::Result<()> {
    let params = GParams::new(1.0, 2.0)?;
    let r = invariant_check(&params, &InvariantOptions::default())?;
    println!("Lyapunov oracle  {:?}", r.oracle);
    println!("Euler stationary {:?}  (dt = {})", r.euler_oracle, r.dt);
    for w in &r.windows {
        println!("  [{:>6.1}, {:>6.1}]  m_xx {:.4}  m_yy {:.4}  rel err {:.3}", w.t_start, w.t_end, w.m_xx, w.m_yy, w.rel_err);
    }
    println!(
        "at T = {}: m_xx {:.4} ± {:.4}, m_yy {:.4} ± {:.4}, m_xy {:.4} ± {:.4}",
        r.t_long, r.m_xx.value, r.m_xx.se, r.m_yy.value, r.m_yy.se, r.m_xy.value, r.m_xy.se
    );
    println!(
        "stated invariant variance {} against oracle {}: factor {} (flagged: {})",
        r.stated_variance, r.oracle[0][0], r.discrepancy_factor, r.discrepancy_flagged
    );
    println!("monotone windows: {}, pass: {}", r.monotone, r.pass);
    Ok(())
}
