use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcore::GParams;
use crate::gsde::{HamiltonianSystem, Rect};
use crate::rng::path_rng;
use crate::stats::{Estimate, MeanSe};

/// Stationary covariance `C` of `dZ = J Z dt + dN` with `d⟨N⟩ = D dt`:
/// the solution of `J C + C Jᵀ + D = 0`.
pub fn lyapunov_2x2(j: [[f64; 2]; 2], d: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    // Unknowns (c11, c12, c22).
    let m = [
        [2.0 * j[0][0], 2.0 * j[0][1], 0.0],
        [j[1][0], j[0][0] + j[1][1], j[0][1]],
        [0.0, 2.0 * j[1][0], 2.0 * j[1][1]],
    ];
    let rhs = [-d[0][0], -d[0][1], -d[1][1]];
    let det3 = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let det = det3(m);
    if det.abs() < 1e-14 {
        return Err(Error::InvalidParams("Lyapunov equation is singular".into()));
    }
    let mut c = [0.0; 3];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = rhs[r];
        }
        *ck = det3(mk) / det;
    }
    Ok([[c[0], c[1]], [c[1], c[2]]])
}

/// Stationary covariance of the Euler recursion
/// `Z_{k+1} = (I + dt J) Z_k + e₂ θ ΔW_k`, by fixed-point iteration.
pub fn euler_stationary_covariance(j: [[f64; 2]; 2], theta: f64, dt: f64) -> [[f64; 2]; 2] {
    let f = [[1.0 + dt * j[0][0], dt * j[0][1]], [dt * j[1][0], 1.0 + dt * j[1][1]]];
    let mut c = [[0.0; 2]; 2];
    for _ in 0..10_000_000 {
        let mut fc = [[0.0; 2]; 2];
        for r in 0..2 {
            for s in 0..2 {
                fc[r][s] = f[r][0] * c[0][s] + f[r][1] * c[1][s];
            }
        }
        let mut next = [[0.0; 2]; 2];
        for r in 0..2 {
            for s in 0..2 {
                next[r][s] = fc[r][0] * f[s][0] + fc[r][1] * f[s][1];
            }
        }
        next[1][1] += theta * theta * dt;
        let change = (0..2).flat_map(|r| (0..2).map(move |s| (r, s))).fold(0.0_f64, |m, (r, s)| {
            m.max((next[r][s] - c[r][s]).abs())
        });
        c = next;
        if change < 1e-16 {
            break;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantOptions {
    pub t_long: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Relative tolerance on second moments.
    pub tolerance: f64,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        Self { t_long: 200.0, dt: 0.01, n_paths: 10_000, seed: 0, tolerance: 0.05 }
    }
}

/// Cross-sectional second moments averaged over a time window.
#[derive(Debug, Clone, Serialize)]
pub struct WindowEntry {
    pub t_start: f64,
    pub t_end: f64,
    pub m_xx: f64,
    pub m_yy: f64,
    /// `max(|m_xx/c11 − 1|, |m_yy/c22 − 1|)`.
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub sigma_lower: f64,
    pub t_long: f64,
    pub dt: f64,
    pub n_paths: usize,
    /// Continuous-time stationary covariance.
    pub oracle: [[f64; 2]; 2],
    /// Stationary covariance of the Euler scheme at this `dt`.
    pub euler_oracle: [[f64; 2]; 2],
    pub mean_x: Estimate,
    pub mean_y: Estimate,
    pub m_xx: Estimate,
    pub m_yy: Estimate,
    pub m_xy: Estimate,
    pub rel_err_xx: f64,
    pub rel_err_yy: f64,
    pub moments_ok: bool,
    pub means_ok: bool,
    pub windows: Vec<WindowEntry>,
    /// Window errors decrease until within tolerance and stay there.
    pub monotone: bool,
    /// Per-coordinate variance of the density printed for the invariant measure.
    pub stated_variance: f64,
    /// `stated_variance / oracle[0][0]`.
    pub discrepancy_factor: f64,
    pub discrepancy_flagged: bool,
    pub pass: bool,
}

fn window_edges(t_long: f64) -> Vec<f64> {
    let mut edges = vec![0.0, 0.5];
    while *edges.last().unwrap() * 2.0 < t_long {
        let next = edges.last().unwrap() * 2.0;
        edges.push(next);
    }
    edges.push(t_long);
    edges
}

/// Long-run Euler simulation of `dX = Y dt, dY = (−X − Y) dt + dB` under
/// `θ ≡ σ_lower` started at the origin.
pub fn invariant_check(params: &GParams, opts: &InvariantOptions) -> Result<InvariantReport> {
    if !(opts.t_long > 0.0 && opts.dt > 0.0 && opts.n_paths >= 2) {
        return Err(Error::InvalidParams("t_long, dt must be positive and n_paths at least 2".into()));
    }
    let system = HamiltonianSystem::damped_oscillator(Rect::square(10.0));
    let n_steps = (opts.t_long / opts.dt).round() as usize;
    let dt = opts.t_long / n_steps as f64;
    if dt > system.step_limit() {
        return Err(Error::StepTooLarge { dt, limit: system.step_limit() });
    }
    let theta = params.lower();
    let j = [[0.0, 1.0], [-1.0, -1.0]];
    let oracle = lyapunov_2x2(j, [[0.0, 0.0], [0.0, theta * theta]])?;
    let euler_oracle = euler_stationary_covariance(j, theta, dt);

    let edges = window_edges(opts.t_long);
    let bounds: Vec<usize> = edges.iter().map(|t| ((t / dt).round() as usize).min(n_steps)).collect();
    let sqrt_dt = dt.sqrt();

    // Per path: terminal state and per-window time averages of x², y².
    let per_path = (0..opts.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(opts.seed, i);
            let (mut x, mut y) = (0.0_f64, 0.0_f64);
            let mut win = vec![(0.0, 0.0); bounds.len() - 1];
            let mut w = 0;
            for k in 0..n_steps {
                let z: f64 = rng.sample(StandardNormal);
                let db = theta * sqrt_dt * z;
                (x, y) = (x + y * dt, y + (-x - y) * dt + db);
                while w + 1 < bounds.len() - 1 && k + 1 > bounds[w + 1] {
                    w += 1;
                }
                win[w].0 += x * x;
                win[w].1 += y * y;
            }
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::NonFinite { step: n_steps });
            }
            for (k, acc) in win.iter_mut().enumerate() {
                let len = (bounds[k + 1] - bounds[k]).max(1) as f64;
                acc.0 /= len;
                acc.1 /= len;
            }
            Ok(((x, y), win))
        })
        .collect::<Result<Vec<_>>>()?;

    let col = |g: &dyn Fn(&((f64, f64), Vec<(f64, f64)>)) -> f64| -> Estimate {
        MeanSe::from_samples(&per_path.iter().map(g).collect::<Vec<_>>()).into()
    };
    let mean_x = col(&|s| s.0 .0);
    let mean_y = col(&|s| s.0 .1);
    let m_xx = col(&|s| s.0 .0 * s.0 .0);
    let m_yy = col(&|s| s.0 .1 * s.0 .1);
    let m_xy = col(&|s| s.0 .0 * s.0 .1);
    let rel_err_xx = (m_xx.value / oracle[0][0] - 1.0).abs();
    let rel_err_yy = (m_yy.value / oracle[1][1] - 1.0).abs();
    let moments_ok = rel_err_xx <= opts.tolerance && rel_err_yy <= opts.tolerance;
    let means_ok = mean_x.value.abs() <= 3.0 * mean_x.se && mean_y.value.abs() <= 3.0 * mean_y.se;

    let n = per_path.len() as f64;
    let windows: Vec<WindowEntry> = (0..edges.len() - 1)
        .map(|k| {
            let mxx = per_path.iter().map(|s| s.1[k].0).sum::<f64>() / n;
            let myy = per_path.iter().map(|s| s.1[k].1).sum::<f64>() / n;
            WindowEntry {
                t_start: edges[k],
                t_end: edges[k + 1],
                m_xx: mxx,
                m_yy: myy,
                rel_err: (mxx / oracle[0][0] - 1.0).abs().max((myy / oracle[1][1] - 1.0).abs()),
            }
        })
        .collect();
    let first_in = windows.iter().position(|w| w.rel_err <= opts.tolerance);
    let monotone = match first_in {
        Some(i) => {
            windows[..=i].windows(2).all(|w| w[1].rel_err <= w[0].rel_err)
                && windows[i..].iter().all(|w| w.rel_err <= opts.tolerance)
        }
        None => false,
    };

    let stated_variance = theta * theta;
    let discrepancy_factor = stated_variance / oracle[0][0];
    Ok(InvariantReport {
        sigma_lower: theta,
        t_long: opts.t_long,
        dt,
        n_paths: opts.n_paths,
        oracle,
        euler_oracle,
        mean_x,
        mean_y,
        m_xx,
        m_yy,
        m_xy,
        rel_err_xx,
        rel_err_yy,
        moments_ok,
        means_ok,
        windows,
        monotone,
        stated_variance,
        discrepancy_factor,
        discrepancy_flagged: (discrepancy_factor - 1.0).abs() > opts.tolerance,
        pass: moments_ok && means_ok && monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_oracle_is_isotropic() {
        for s in [0.5, 1.0, 2.0] {
            let c = lyapunov_2x2([[0.0, 1.0], [-1.0, -1.0]], [[0.0, 0.0], [0.0, s * s]]).unwrap();
            assert!((c[0][0] - s * s / 2.0).abs() < 1e-14);
            assert!((c[1][1] - s * s / 2.0).abs() < 1e-14);
            assert!(c[0][1].abs() < 1e-14);
        }
    }

    #[test]
    fn scalar_ou_oracle() {
        // dX = −X dt + dW alone in the first coordinate: variance 1/2.
        let c = lyapunov_2x2([[-1.0, 0.0], [0.0, -2.0]], [[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!((c[0][0] - 0.5).abs() < 1e-14);
        assert_eq!(c[1][1], 0.0);
    }

    #[test]
    fn euler_covariance_approaches_oracle() {
        let j = [[0.0, 1.0], [-1.0, -1.0]];
        let e1 = euler_stationary_covariance(j, 1.0, 0.02);
        let e2 = euler_stationary_covariance(j, 1.0, 0.01);
        let d1 = (e1[1][1] - 0.5).abs();
        let d2 = (e2[1][1] - 0.5).abs();
        assert!(d2 < d1 && d2 < 0.01, "{d1} {d2}");
        assert!((d1 / d2 - 2.0).abs() < 0.2);
    }

    #[test]
    fn window_edges_cover_horizon() {
        let e = window_edges(200.0);
        assert_eq!(e.first(), Some(&0.0));
        assert_eq!(e.last(), Some(&200.0));
        assert!(e.windows(2).all(|w| w[1] > w[0]));
    }
}
