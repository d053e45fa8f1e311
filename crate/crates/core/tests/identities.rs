use contact_hj::catalog::{self, resolve, square_map};
use contact_hj::hamiltonian::compose_scalar;
use contact_hj::harness::{commutation_defect, multitime_solve, reparam_check};
use contact_hj::initial::InitialData;
use contact_hj::oracle::{brute_force_value, OracleConfig};
use contact_hj::semigroup::{evolve, SemigroupConfig};
use contact_hj::{Boundary, GridFunction, GridSpec};

fn line(n: usize, boundary: Boundary) -> GridSpec {
    GridSpec::new(1, 4.0, n, boundary).unwrap()
}

#[test]
fn evolved_csv_round_trips() {
    let g = line(81, Boundary::Clamped);
    let h = resolve("shift(c=1,of=discount(alpha=1))").unwrap();
    let u0 = InitialData::parse("0.5*abs(x) + cos(2*x) - 1").unwrap().sample(g).unwrap();
    let cfg = SemigroupConfig::auto(&[&h], &u0, 0.01).unwrap();
    let u = evolve(&h, &u0, 0.3, &cfg).unwrap();
    let back = GridFunction::from_csv(g, &u.to_csv()).unwrap();
    assert!(back.sup_diff(&u, None) <= 1e-11 * (1.0 + u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))));
}

#[test]
fn oracle_tracks_engine_with_a_potential() {
    let g = line(41, Boundary::Periodic);
    let h = catalog::quadratic_potential();
    let u0 = GridFunction::from_fn(g, |x| (std::f64::consts::FRAC_PI_4 * x[0]).sin()).unwrap();
    let cfg = SemigroupConfig::auto(&[&h], &u0, 1e-3).unwrap();
    let vels: Vec<f64> = (-2..=2).map(f64::from).collect();
    let ocfg = OracleConfig::new(6, vels, cfg.momenta);
    for &(x, t) in &[(-2.0, 0.3), (0.0, 0.6), (1.4, 0.6)] {
        let engine = evolve(&h, &u0, t, &cfg).unwrap().interpolate(&[x]).unwrap();
        let oracle = brute_force_value(&h, &u0, x, t, &ocfg).unwrap();
        assert!(oracle.converged);
        assert!((oracle.value - engine).abs() <= 0.05 + 5.0 * t / 6.0, "x={x} t={t}: {} vs {engine}", oracle.value);
    }
}

/// For spatially constant data the flows of `|p|^2/2 + u` and `|p|^2/2 + u + 1`
/// reduce to linear ODEs, and the defect is `(1 - e^-lambda)(1 - e^-mu)`.
#[test]
fn constant_data_defect_matches_closed_form() {
    let g = line(81, Boundary::Periodic);
    let h = catalog::discount(1.0);
    let f = resolve("shift(c=1,of=discount(alpha=1))").unwrap();
    let u0 = GridFunction::constant(g, 0.3).unwrap();
    let cfg = SemigroupConfig::auto(&[&h, &f], &u0, 1e-3).unwrap();
    let (lambda, mu) = (0.25f64, 0.25f64);
    let r = commutation_defect(&h, &f, &u0, lambda, mu, &cfg).unwrap();
    let exact = (1.0 - (-lambda).exp()) * (1.0 - (-mu).exp());
    for d in r.defect.values() {
        assert!((d - exact).abs() <= 1e-4, "{d} vs {exact}");
    }
    assert!(r.min_signed > 0.0);
}

/// `H` against `H^2` for the discount Hamiltonian on non-negative data. The
/// defect is recorded, not bounded.
#[test]
fn squared_discount_defect_is_measured() {
    let g = line(81, Boundary::Periodic);
    let h = catalog::discount(1.0);
    let f = compose_scalar(&h, &square_map(4.0));
    assert!(f.is_admissible());
    let u0 = GridFunction::from_fn(g, |x| 1.0 + 0.5 * (std::f64::consts::FRAC_PI_4 * x[0]).cos()).unwrap();
    let cfg = SemigroupConfig::auto(&[&h, &f], &u0, 0.01).unwrap();
    let r = commutation_defect(&h, &f, &u0, 0.1, 0.1, &cfg).unwrap();
    assert!(r.sup_abs_defect.is_finite());
    eprintln!(
        "H vs H^2: sup_abs={:e} max_signed={:e} min_signed={:e} tolerance={:e} verdict={}",
        r.sup_abs_defect, r.max_signed, r.min_signed, r.tolerance, r.verdict
    );
}

#[test]
fn multitime_with_one_hamiltonian_is_reparametrization() {
    let g = line(101, Boundary::Periodic);
    let h = catalog::contact(1.0);
    let u0 = GridFunction::from_fn(g, |x| (std::f64::consts::FRAC_PI_4 * x[0]).cos()).unwrap();
    let cfg = SemigroupConfig::auto(&[&h], &u0, 0.01).unwrap();
    let t = 0.5;
    let via_multitime = multitime_solve(std::slice::from_ref(&h), &[t], &u0, &cfg.time_scaled(t).unwrap()).unwrap();
    let direct = evolve(&h, &u0, t, &cfg).unwrap();
    let d = via_multitime.sup_diff(&direct, None);
    assert!(d <= 1e-12, "{d}");
    assert!(reparam_check(&h, &u0, t, &cfg).unwrap() <= 1e-12);
}
