//! G-normal oracle: `Ê[B_1²] = σ_upper²` and `Ê[−B_1²] = −σ_lower²`, computed
//! three ways: closed form, Monte Carlo over a control dictionary, and the
//! HJB grid solver.
//!
//! cargo run --release --example g_normal

use std::time::Instant;

use gharnack::gcore::{g_normal_oracle, make_policy, GParams, OracleShape, PolicySpec, TimeGrid};
use gharnack::gsde::{semigroup_sup, HamiltonianSystem, Rect};
use gharnack::hjb::{hjb_value_at, solve_hjb, HjbSettings};

fn main() -> gharnack::Result<()> {
    let params = GParams::new(1.0, 2.0)?;
    let system = HamiltonianSystem::free_particle(Rect::square(8.0));
    let grid = TimeGrid::new(1.0, 100)?;
    let dictionary = [PolicySpec::Constant(1.0), PolicySpec::Constant(2.0)]
        .iter()
        .map(|s| make_policy(s, &params, &grid))
        .collect::<gharnack::Result<Vec<_>>>()?;

    let cases: [(&str, OracleShape, fn(f64, f64) -> f64); 2] = [
        ("y^2", OracleShape::Square, |_, y| y * y),
        ("-y^2", OracleShape::NegSquare, |_, y| -y * y),
    ];
    for (name, shape, f) in cases {
        let exact = g_normal_oracle(shape, 1.0, &params)?;
        let t0 = Instant::now();
        let mc = semigroup_sup(&system, &dictionary, &f, (0.0, 0.0), &grid, 100_000, 7)?;
        let t_mc = t0.elapsed();
        let t0 = Instant::now();
        let sol = solve_hjb(&system, &params, &f, 1.0, &HjbSettings::new(8.0, 400, 400))?;
        let hjb = hjb_value_at(&sol, (0.0, 0.0))?;
        let t_hjb = t0.elapsed();
        println!("f = {name}: exact {exact}");
        println!("  monte carlo  {:.4} ± {:.4}  ({:.1?})", mc.value, mc.se, t_mc);
        println!("  hjb 400x400  {:.4}  rel err {:.2e}  ({} steps, {:.1?})",
            hjb, (hjb - exact).abs() / exact.abs(), sol.grid.n_steps(), t_hjb);
    }

    // Clipped terminal functions keep f bounded on the plane.
    let clipped: [(&str, fn(f64, f64) -> f64); 2] =
        [("min(y^2,25)", |_, y| (y * y).min(25.0)), ("max(-y^2,-25)", |_, y| (-y * y).max(-25.0))];
    for (name, f) in clipped {
        let sol = solve_hjb(&system, &params, &f, 1.0, &HjbSettings::new(8.0, 400, 400))?;
        println!("f = {name}: hjb {:.4}", hjb_value_at(&sol, (0.0, 0.0))?);
    }
    Ok(())
}
