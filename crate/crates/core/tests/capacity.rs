use mary_walsh::capacity::*;
use proptest::prelude::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn link() -> impl Strategy<Value = LinkParams> {
    (
        1e4..1e7f64,
        0.001..1.0f64,
        0.01..100.0f64,
        0.0..1e-4f64,
        1.0..64.0f64,
        0.1..10.0f64,
    )
        .prop_map(|(w, frac, s, n0, users, sinr)| {
            LinkParams::new(w, w * frac)
                .with_signal_power(s)
                .with_noise_density(n0)
                .with_users(users)
                .with_sinr_req(sinr)
        })
}

fn env() -> impl Strategy<Value = InterferenceEnv> {
    (0.0..=1.0f64, 0.0..100.0f64, 1e3..1e5f64)
        .prop_map(|(p, s_ni, w_ni)| InterferenceEnv::new(p, s_ni, w_ni))
}

/// Solves `effective_sinr(N) = SINR_req` for real `N` by bisection; an
/// independent route to the degraded capacity.
fn solve_users(lp: &LinkParams, env: &InterferenceEnv) -> f64 {
    let sinr = |n: f64| effective_sinr(&lp.with_users(n), env);
    let (mut lo, mut hi) = (-1e9, 1e9);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        // Below the pole the denominator is negative and the SINR formula
        // goes negative; that side is treated as "SINR too high".
        let v = sinr(mid);
        if v.is_nan() || v < 0.0 || v > lp.sinr_req {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

proptest! {
    #[test]
    fn clear_band_degraded_equals_exact_pole(lp in link(), w_ni in 1e3..1e5f64, s_ni in 0.0..10.0f64) {
        let env = InterferenceEnv::new(0.0, s_ni, w_ni);
        prop_assert_eq!(degraded_capacity(&lp, &env), pole_capacity(&lp, true));
    }

    #[test]
    fn sinr_non_increasing(lp in link(), env in env(), bump in 1.0..3.0f64) {
        let base = effective_sinr(&lp, &env);
        let more_users = effective_sinr(&lp.with_users(lp.users * bump), &env);
        let more_noise = effective_sinr(&lp.with_noise_density(lp.noise_density * bump), &env);
        let faster = effective_sinr(&lp.with_data_rate(lp.data_rate_bps * bump), &env);
        let wider = effective_sinr(&lp, &InterferenceEnv { occupancy: (env.occupancy * bump).min(1.0), ..env });
        let stronger = effective_sinr(&lp, &InterferenceEnv { interferer_power: env.interferer_power * bump, ..env });
        for v in [more_users, more_noise, faster, wider, stronger] {
            prop_assert!(v <= base * (1.0 + 1e-12));
        }
    }

    #[test]
    fn degraded_matches_sinr_solution(lp in link(), env in env()) {
        let lp = lp.with_noise_density(0.0);
        let direct = degraded_capacity(&lp, &env);
        let solved = solve_users(&lp, &env);
        prop_assert!((direct - solved).abs() <= 1e-9 * direct.abs().max(1.0),
            "direct {} solved {}", direct, solved);
    }

    #[test]
    fn rate_bounds_invert_sinr(lp in link(), p in 0.01..=1.0f64, s_ni in 0.01..100.0f64, w_ni in 1e3..1e5f64) {
        let lp = lp.with_users(1.0).with_noise_density(0.0);
        let env = InterferenceEnv::new(p, s_ni, w_ni);

        let r = max_rate(&lp, &env);
        prop_assert!(rel_close(effective_sinr(&lp.with_data_rate(r), &env), lp.sinr_req, 1e-9));

        let ratio = max_interferer_ratio(&lp, &env);
        let at_bound = InterferenceEnv::new(p, ratio * lp.signal_power, w_ni);
        prop_assert!(rel_close(effective_sinr(&lp, &at_bound), lp.sinr_req, 1e-9));
    }

    #[test]
    fn scale_invariance(lp in link(), env in env(), scale in 1e-3..1e3f64) {
        let scaled_lp = lp
            .with_signal_power(lp.signal_power * scale)
            .with_noise_density(lp.noise_density * scale);
        let scaled_env = InterferenceEnv { interferer_power: env.interferer_power * scale, ..env };
        prop_assert!(rel_close(effective_sinr(&lp, &env), effective_sinr(&scaled_lp, &scaled_env), 1e-9));
        prop_assert!(rel_close(degraded_capacity(&lp, &env), degraded_capacity(&scaled_lp, &scaled_env), 1e-9)
            || (degraded_capacity(&lp, &env) - degraded_capacity(&scaled_lp, &scaled_env)).abs() < 1e-9);
        let (a, b) = (max_rate(&lp, &env), max_rate(&scaled_lp, &scaled_env));
        prop_assert!(a == b || rel_close(a, b, 1e-9));
        prop_assert_eq!(pole_capacity(&lp, true), pole_capacity(&scaled_lp, true));
    }
}
