use gharnack::coupling::{build_schedule, girsanov_exponent, lambda1, tilt_compensator};
use gharnack::gcore::{make_policy, sample_driving_indexed, GParams, PolicySpec, TimeGrid};
use gharnack::gsde::{mc_expectation, parse_drift, Expr, HamiltonianSystem, Rect};
use gharnack::stats::compensated_sum;
use gharnack::verify::inner_expectation_oracle;
use proptest::prelude::*;

type Mat = [[f64; 2]; 2];

fn mul(a: Mat, b: Mat) -> Mat {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn transpose(a: Mat) -> Mat {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn add(a: Mat, b: Mat, s: f64) -> Mat {
    [[a[0][0] + s * b[0][0], a[0][1] + s * b[0][1]], [a[1][0] + s * b[1][0], a[1][1] + s * b[1][1]]]
}

/// Second moments of the Euler scheme for `dZ = J Z dt + (0, θ dW)` from the origin.
fn euler_moments(j: Mat, theta: f64, t: f64, n: usize) -> Mat {
    let dt = t / n as f64;
    let step = add([[1.0, 0.0], [0.0, 1.0]], j, dt);
    let mut c = [[0.0; 2]; 2];
    for _ in 0..n {
        c = mul(mul(step, c), transpose(step));
        c[1][1] += theta * theta * dt;
    }
    c
}

/// RK4 on `C' = J C + C Jᵀ + diag(0, θ²)`.
fn lyapunov_flow(j: Mat, theta: f64, t: f64, n: usize) -> Mat {
    let rhs = |c: Mat| {
        let mut d = add(mul(j, c), mul(c, transpose(j)), 1.0);
        d[1][1] += theta * theta;
        d
    };
    let h = t / n as f64;
    let mut c = [[0.0; 2]; 2];
    for _ in 0..n {
        let k1 = rhs(c);
        let k2 = rhs(add(c, k1, h / 2.0));
        let k3 = rhs(add(c, k2, h / 2.0));
        let k4 = rhs(add(c, k3, h));
        let inc = add(add(k1, k2, 2.0), add(k3, k4, 0.5), 2.0);
        c = add(c, inc, h / 6.0);
    }
    c
}

#[test]
fn euler_second_moments_converge_at_first_order() {
    let j = [[0.0, 1.0], [-1.0, -1.0]];
    let exact = lyapunov_flow(j, 1.5, 1.0, 4000);
    let errs: Vec<f64> = [25, 50, 100, 200]
        .iter()
        .map(|&n| {
            let c = euler_moments(j, 1.5, 1.0, n);
            (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).fold(0.0_f64, |m, (a, b)| m.max((c[a][b] - exact[a][b]).abs()))
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 1.0).abs() < 0.1, "errors {errs:?}");
    }
}

#[test]
fn simulated_moments_match_the_euler_recursion() {
    let p = GParams::new(1.0, 2.0).unwrap();
    let sys = HamiltonianSystem::damped_oscillator(Rect::square(6.0));
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let pol = make_policy(&PolicySpec::Constant(1.5), &p, &grid).unwrap();
    let c = euler_moments([[0.0, 1.0], [-1.0, -1.0]], 1.5, 1.0, 50);
    let fs: [(fn(f64, f64) -> f64, f64); 3] = [(|x, _| x * x, c[0][0]), (|_, y| y * y, c[1][1]), (|x, y| x * y, c[0][1])];
    for (f, target) in fs {
        let est = mc_expectation(&sys, &pol, &f, (0.0, 0.0), &grid, 40_000, 21).unwrap();
        assert!(est.within(target, 4.0), "{} vs {target} (se {})", est.mean, est.se);
    }
}

#[test]
fn large_s_inner_expectation_tends_to_one() {
    let mut prev = 0.0;
    for s in [1.0, 10.0, 100.0, 1000.0] {
        let v = inner_expectation_oracle(1.0 / (s * s * s), (0.5, -0.5), 0.5);
        assert!(v > prev && v <= 1.0);
        prev = v;
    }
    assert!(1.0 - prev < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn band_is_validated(lo in 0.01f64..5.0, gap in -2.0f64..2.0) {
        let hi = lo + gap;
        let r = GParams::new(lo, hi);
        prop_assert_eq!(r.is_ok(), gap > 0.0);
        if let Ok(p) = r {
            let json = serde_json::to_string(&p).unwrap();
            prop_assert_eq!(serde_json::from_str::<GParams>(&json).unwrap(), p);
        }
    }

    #[test]
    fn affine_expressions_evaluate(a in -5i32..5, b in -5i32..5, c in -5i32..5, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let src = format!("{a} * x + {b} * y - ({c})");
        let e = Expr::parse(&src).unwrap();
        let expected = a as f64 * x + b as f64 * y - c as f64;
        prop_assert!((e.eval(x, y).unwrap() - expected).abs() < 1e-12);
        let d = parse_drift(&src, Rect::square(3.0)).unwrap();
        prop_assert!((d.lipschitz() - (a as f64).hypot(b as f64)).abs() < 1e-9);
    }

    #[test]
    fn schedule_starts_at_h_and_ends_at_zero(
        a in -2.0f64..2.0,
        m in prop::sample::select(vec![-2.0, -1.0, 1.0, 2.0]),
        t in 0.1f64..4.0,
        hx in -1.0f64..1.0,
        hy in -1.0f64..1.0,
    ) {
        prop_assume!(hx.hypot(hy) > 1e-3);
        let grid = TimeGrid::new(t, 64).unwrap();
        let s = build_schedule(a, m, t, (hx, hy), &grid, 64).unwrap();
        prop_assert_eq!((s.theta1x[0], s.theta1y[0]), (hx, hy));
        let (ex, ey) = s.theta_end();
        prop_assert!(ex.hypot(ey) <= 1e-8 * hx.hypot(hy));
        prop_assert!(lambda1(a, m, t, 64).unwrap() > 0.0);
    }

    #[test]
    fn tilt_identity_is_exact(seed in 0u64..1000, theta in 1.0f64..2.0, q in 1.0f64..4.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0) {
        let p = GParams::new(1.0, 2.0).unwrap();
        let grid = TimeGrid::new(1.0, 40).unwrap();
        let pol = make_policy(&PolicySpec::Constant(theta), &p, &grid).unwrap();
        let d = sample_driving_indexed(&pol, &grid, seed, 0, None).unwrap();
        let g1: Vec<f64> = (0..40).map(|k| c1 * (k as f64 * 0.2).cos()).collect();
        let g2: Vec<f64> = (0..40).map(|k| c2 + 0.01 * k as f64).collect();
        let r1 = girsanov_exponent(&g1, &g2, &d, 1.0).unwrap();
        let rq = girsanov_exponent(&g1, &g2, &d, q).unwrap();
        let lhs = q * r1.log_terminal();
        let rhs = rq.log_terminal() + tilt_compensator(q, *r1.quad.last().unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn same_seed_same_path(seed in any::<u64>(), index in 0u64..1000) {
        let p = GParams::new(1.0, 2.0).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let pol = make_policy(&PolicySpec::Constant(1.2), &p, &grid).unwrap();
        let a = sample_driving_indexed(&pol, &grid, seed, index, None).unwrap();
        let b = sample_driving_indexed(&pol, &grid, seed, index, None).unwrap();
        prop_assert_eq!(a.dw, b.dw);
    }

    #[test]
    fn compensated_sum_is_exact_on_cancellation(v in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let mut all = v.clone();
        all.push(1.0);
        all.extend(v.iter().map(|x| -x));
        prop_assert_eq!(compensated_sum(all), 1.0);
    }
}
