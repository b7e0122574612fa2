//! Properties of the diagrams and of the three Riemann solvers.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trafficflow::diagrams::{Family, FundamentalDiagram, WaveModel};
use trafficflow::lwr::{self, ScalarRiemann, ScalarWave};
use trafficflow::resonant::{self, ResonantState, ResonantWave};
use trafficflow::waves2nd::{ModelVariant, Pattern, PwCurves, State2};

type Fd = FundamentalDiagram<f64>;

fn concave_families() -> Vec<(&'static str, Fd)> {
    vec![
        ("greenshields", Fd::greenshields(1.0, 1.0).unwrap()),
        (
            "polynomial",
            Fd::new(Family::Polynomial { v_f: 1.0, rho_j: 1.0, n: 2.0 }).unwrap(),
        ),
        ("greenberg", Fd::new(Family::Greenberg { v_0: 1.0, rho_j: 1.0 }).unwrap()),
        ("underwood", Fd::new(Family::Underwood { v_f: 1.0, rho_0: 0.5 }).unwrap()),
        ("newell-normalized", Fd::newell_normalized()),
        ("newell", Fd::newell(60.0, -10.0, 250.0).unwrap()),
    ]
}

/// Finite speed scale (the free speed is infinite for Greenberg).
fn speed_scale(fd: &Fd) -> f64 {
    fd.v(0.5 * fd.rho_max())
}

fn samples(fd: &Fd, n: usize) -> impl Iterator<Item = f64> + '_ {
    (1..=n).map(move |i| fd.rho_max() * i as f64 / (n as f64 + 1.0))
}

#[test]
fn speeds_decrease_and_fluxes_are_concave() {
    for (name, fd) in concave_families() {
        let h = 1e-4 * fd.rho_max();
        for rho in samples(&fd, 1000).filter(|&r| r > 2.0 * h && r < fd.rho_max() - 2.0 * h) {
            // exp(1 - 1/ρ) underflows near ρ = 0, where v* is exactly the free speed.
            let plateau = fd.v(rho) == fd.free_speed();
            assert!(fd.dv(rho) < 0.0 || plateau, "{name}: dv = {} at {rho}", fd.dv(rho));
            let f2 = (fd.flux(rho + h) - 2.0 * fd.flux(rho) + fd.flux(rho - h)) / (h * h);
            assert!(f2 < 1e-9 * speed_scale(&fd) / fd.rho_max(), "{name}: f'' = {f2} at {rho}");
        }
    }
    // The sigmoid speed law decreases but its flux has an inflection point.
    let kerner = Fd::kerner();
    for rho in samples(&kerner, 1000) {
        assert!(kerner.dv(rho) < 0.0);
    }
}

#[test]
fn wave_speed_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (_, fd) in concave_families().into_iter().chain([("kerner", Fd::kerner())]) {
        for _ in 0..200 {
            let rho = fd.rho_max() * rng.gen_range(0.01..0.99);
            let v = fd.v(rho) + rng.gen_range(-0.1..0.1) * speed_scale(&fd);
            let z = fd.wave_speeds(rho, v, WaveModel::Zhang).unwrap();
            let tol = 4.0 * f64::EPSILON * (v.abs() + z.sound_speed.abs());
            assert!((z.lambda1 + z.lambda2 - 2.0 * v).abs() <= tol, "{z:?} {v} {rho}");
            let c0 = 2.48445;
            let p = fd.wave_speeds(rho, v, WaveModel::PayneWhitham { c0 }).unwrap();
            let tol = 4.0 * f64::EPSILON * (v.abs() + c0);
            assert!((p.lambda2 - p.lambda1 - 2.0 * c0).abs() <= tol);
        }
    }
}

#[test]
fn velocity_flux_derivatives() {
    for (name, fd) in concave_families().into_iter().chain([("kerner", Fd::kerner())]) {
        for rho in samples(&fd, 50).skip(2) {
            let h = 1e-5 * fd.rho_max();
            let d = |m| {
                (fd.velocity_flux_phi(rho + h, m).unwrap() - fd.velocity_flux_phi(rho - h, m).unwrap())
                    / (2.0 * h)
            };
            let expect = rho * fd.dv(rho).powi(2);
            let err = (d(WaveModel::Zhang) - expect).abs();
            let floor = 1e-10 * speed_scale(&fd).powi(2) / fd.rho_max();
            assert!(err < 1e-6 * expect.abs() || err < floor, "{name}: φ' off by {err} at {rho}");
            let c0 = 1.7;
            let rel = (d(WaveModel::PayneWhitham { c0 }) - c0 * c0).abs() / (c0 * c0);
            assert!(rel < 1e-6);
        }
    }
}

#[test]
fn critical_density_maximizes_flow() {
    for (name, fd) in concave_families().into_iter().chain([("kerner", Fd::kerner())]) {
        let alpha = fd.critical_density();
        assert!(fd.lambda(alpha).abs() < 1e-9 * speed_scale(&fd), "{name}");
        for rho in samples(&fd, 1000) {
            assert!(fd.flux(alpha) >= fd.flux(rho), "{name} at {rho}");
        }
    }
}

/// Exact Godunov flux by brute force over a fine density grid plus the endpoints.
fn godunov_flux_oracle(fd: &Fd, rl: f64, rr: f64) -> f64 {
    let (lo, hi) = if rl <= rr { (rl, rr) } else { (rr, rl) };
    let mut pts: Vec<f64> = (0..=2000).map(|i| lo + (hi - lo) * i as f64 / 2000.0).collect();
    let alpha = fd.critical_density();
    if alpha > lo && alpha < hi {
        pts.push(alpha);
    }
    let fs = pts.iter().map(|&r| fd.flux(r));
    if rl <= rr {
        fs.fold(f64::INFINITY, f64::min)
    } else {
        fs.fold(f64::NEG_INFINITY, f64::max)
    }
}

#[test]
fn demand_supply_matches_riemann_and_oracle() {
    let fd = Fd::newell_normalized();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..10_000 {
        let rl = rng.gen_range(1e-3..1.0);
        let rr = rng.gen_range(1e-3..1.0);
        let ds = lwr::demand_supply_flux(rl, rr, &fd);
        let sol = lwr::solve_riemann(ScalarRiemann { rho_l: rl, rho_r: rr }, &fd).unwrap();
        assert!((ds - sol.boundary_flux).abs() < 1e-12, "pair {k}: {rl} {rr}");
        if k < 300 {
            assert!((ds - godunov_flux_oracle(&fd, rl, rr)).abs() < 1e-12);
        }
    }
}

#[test]
fn scalar_shocks_satisfy_jump_and_entropy_conditions() {
    let fd = Fd::newell_normalized();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut shocks = 0;
    for _ in 0..10_000 {
        let rl = rng.gen_range(1e-3..1.0);
        let rr = rng.gen_range(1e-3..1.0);
        let sol = lwr::solve_riemann(ScalarRiemann { rho_l: rl, rho_r: rr }, &fd).unwrap();
        if let ScalarWave::Shock { speed } = sol.kind {
            shocks += 1;
            assert!((speed * (rr - rl) - (fd.flux(rr) - fd.flux(rl))).abs() < 1e-12);
            assert!(fd.lambda(rl) > speed - 1e-12 && speed > fd.lambda(rr) - 1e-12);
        }
    }
    assert!(shocks > 1000);
}

#[test]
fn resonant_flux_equivalence_and_reduction() {
    let fd = Fd::newell_normalized();
    let ratios = [0.25, 0.5, 1.0, 2.0, 4.0];
    let mut worst: f64 = 0.0;
    for &q in &ratios {
        for i in 1..=100 {
            for j in 1..=100 {
                let (al, ar) = (2.0, 2.0 * q);
                let ul = ResonantState::new(al, al * i as f64 / 100.0);
                let ur = ResonantState::new(ar, ar * j as f64 / 100.0);
                let ds = resonant::boundary_flux(ul, ur, &fd);
                let sol = resonant::classify(ul, ur, &fd).unwrap();
                worst = worst.max((ds - sol.boundary_flux).abs());
                if q == 1.0 {
                    let scalar = al * lwr::demand_supply_flux(ul.ratio(), ur.ratio(), &fd);
                    assert_eq!(ds, scalar);
                }
                let mut left = ul;
                for (wave, right) in &sol.waves {
                    if *wave == ResonantWave::Standing {
                        let (fl, fr) = (resonant::flow(left, &fd), resonant::flow(*right, &fd));
                        assert!((fl - fr).abs() < 1e-10);
                        let alpha = fd.critical_density();
                        let side = |u: ResonantState<f64>| (u.ratio() - alpha).signum();
                        let on_curve = |u: ResonantState<f64>| (u.ratio() - alpha).abs() < 1e-9;
                        assert!(side(left) == side(*right) || on_curve(left) || on_curve(*right));
                    }
                    left = *right;
                }
            }
        }
    }
    assert!(worst < 1e-10, "max deviation {worst}");
}

#[test]
fn resonant_flux_matches_the_empirical_merge_table() {
    let fd = Fd::newell_normalized();
    let alpha = fd.critical_density();
    let f = |u: ResonantState<f64>| resonant::flow(u, &fd);
    let cap = |a: f64| a * fd.capacity();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        let al = rng.gen_range(1.0..4.0);
        let ar = rng.gen_range(1.0..4.0);
        let ul = ResonantState::new(al, al * rng.gen_range(0.01..1.0));
        let ur = ResonantState::new(ar, ar * rng.gen_range(0.01..1.0));
        let (l_uc, r_uc) = (ul.ratio() < alpha, ur.ratio() < alpha);
        let expected = match (al <= ar, l_uc, r_uc) {
            (true, true, true) => f(ul),
            (true, true, false) => f(ul).min(f(ur)),
            (true, false, true) => cap(al),
            (true, false, false) => cap(al).min(f(ur)),
            (false, true, true) => cap(ar).min(f(ul)),
            (false, true, false) => f(ul).min(f(ur)),
            (false, false, true) => cap(ar),
            (false, false, false) => f(ur),
        };
        assert!((resonant::boundary_flux(ul, ur, &fd) - expected).abs() < 1e-12);
    }
}

fn second_order_models() -> Vec<(&'static str, ModelVariant<f64>)> {
    vec![
        ("zhang", ModelVariant::zhang(Fd::newell_normalized(), 1.0)),
        (
            "pw-as-printed",
            ModelVariant::payne_whitham(Fd::kerner(), 2.48445, 1.0).with_curves(PwCurves::AsPrinted),
        ),
        (
            "pw-isothermal",
            ModelVariant::payne_whitham(Fd::kerner(), 2.48445, 1.0).with_curves(PwCurves::Isothermal),
        ),
    ]
}

fn state_strategy() -> impl Strategy<Value = ((f64, f64), (f64, f64))> {
    ((0.05f64..0.9, -0.15f64..0.15), (0.05f64..0.9, -0.15f64..0.15))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn intermediate_states_lie_on_both_wave_curves(((rl, dl), (rr, dr)) in state_strategy()) {
        for (name, m) in second_order_models() {
            let ul = State2::new(rl, m.fd.v(rl) + dl);
            let ur = State2::new(rr, m.fd.v(rr) + dr);
            let Ok(sol) = m.solve(ul, ur) else { continue };
            let mid = sol.middle();
            // Forward 1-curve from the left, backward 2-curve from the right.
            let one = if mid.rho <= ul.rho {
                ul.v + m.rarefaction_velocity_jump(ul.rho, mid.rho, 1)
            } else {
                ul.v + m.hugoniot_velocity_jump(ul.rho, mid.rho).unwrap()
            };
            let two = if mid.rho <= ur.rho {
                ur.v - m.rarefaction_velocity_jump(mid.rho, ur.rho, 2)
            } else {
                ur.v - m.hugoniot_velocity_jump(mid.rho, ur.rho).unwrap()
            };
            let scale = 1.0 + ul.v.abs() + ur.v.abs();
            match sol.pattern {
                Pattern::H1 | Pattern::R1 => prop_assert!((one - mid.v).abs() < 1e-9 * scale, "{name}"),
                Pattern::H2 | Pattern::R2 => prop_assert!((two - mid.v).abs() < 1e-9 * scale, "{name}"),
                _ => {
                    prop_assert!((one - mid.v).abs() < 1e-9 * scale, "{name}: 1-curve");
                    prop_assert!((two - mid.v).abs() < 1e-9 * scale, "{name}: 2-curve");
                }
            }
        }
    }

    #[test]
    fn g_is_strictly_decreasing(((rl, dl), (rr, dr)) in state_strategy()) {
        for (name, m) in second_order_models() {
            let ul = State2::new(rl, m.fd.v(rl) + dl);
            let ur = State2::new(rr, m.fd.v(rr) + dr);
            // Below about 0.03 the normalized Newell speed rounds to the free speed and g goes flat.
            let (lo, hi) = (rl.min(rr) * 0.8, (rl.max(rr) * 1.1).min(0.95 * m.fd.rho_max()));
            let mut prev = f64::INFINITY;
            for i in 0..100 {
                let rho = lo + (hi - lo) * i as f64 / 99.0;
                let g = m.g(ul, ur, rho);
                prop_assert!(g < prev, "{name}: g not decreasing at {rho}");
                prev = g;
            }
        }
    }

    #[test]
    fn boundary_state_is_upwind_for_supersonic_fans(((rl, dl), (rr, dr)) in state_strategy()) {
        for (name, m) in second_order_models() {
            let ul = State2::new(rl, m.fd.v(rl) + dl);
            let ur = State2::new(rr, m.fd.v(rr) + dr);
            let Ok(sol) = m.solve(ul, ur) else { continue };
            let speeds = sol.wave_speeds(&m);
            let min = speeds.iter().map(|s| s.0.min(s.1)).fold(f64::INFINITY, f64::min);
            let max = speeds.iter().map(|s| s.0.max(s.1)).fold(f64::NEG_INFINITY, f64::max);
            if min > 0.0 {
                prop_assert_eq!(sol.boundary_avg, ul, "{}", name);
            }
            if max < 0.0 {
                prop_assert_eq!(sol.boundary_avg, ur, "{}", name);
            }
        }
    }

    #[test]
    fn zhang_on_equilibrium_matches_lwr(rl in 0.05f64..0.95, rr in 0.05f64..0.95) {
        prop_assume!((rl - rr).abs() > 1e-6);
        let fd = Fd::newell_normalized();
        let m = ModelVariant::zhang(fd, 1.0);
        let sol = m.solve(State2::new(rl, fd.v(rl)), State2::new(rr, fd.v(rr))).unwrap();
        let first_is_shock = matches!(sol.pattern, Pattern::H1 | Pattern::H1H2 | Pattern::H1R2);
        let scalar = lwr::solve_riemann(ScalarRiemann { rho_l: rl, rho_r: rr }, &fd).unwrap();
        prop_assert_eq!(first_is_shock, matches!(scalar.kind, ScalarWave::Shock { .. }));
        prop_assert_eq!(first_is_shock, rl < rr);
    }
}

#[test]
fn upwind_totality_on_many_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (_, m) in second_order_models() {
        let mut checked = 0;
        for _ in 0..10_000 {
            let (rl, rr) = (rng.gen_range(0.05..0.9), rng.gen_range(0.05..0.9));
            let ul = State2::new(rl, m.fd.v(rl) + rng.gen_range(-0.15..0.15));
            let ur = State2::new(rr, m.fd.v(rr) + rng.gen_range(-0.15..0.15));
            let Ok(sol) = m.solve(ul, ur) else { continue };
            let speeds = sol.wave_speeds(&m);
            let min = speeds.iter().map(|s| s.0.min(s.1)).fold(f64::INFINITY, f64::min);
            let max = speeds.iter().map(|s| s.0.max(s.1)).fold(f64::NEG_INFINITY, f64::max);
            if min > 0.0 {
                assert_eq!(sol.boundary_avg, ul);
            }
            if max < 0.0 {
                assert_eq!(sol.boundary_avg, ur);
            }
            checked += 1;
        }
        assert!(checked > 5000);
    }
}
