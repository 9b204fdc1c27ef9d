use hnse_core::dynamics::{
    cone_record, cone_report, estimate_absorbing_radius, evolve_pair, rhs_abstract, rhs_prepared, simulate, step,
    tracking_distance, ConeTrace, DynamicsError, Integrator, LinearConeCondition, Model, Nonlinearity, SimConfig,
};
use hnse_core::lattice::LatticePoint;
use hnse_core::random::{gaussian_field, half_box, random_field, with_sobolev_norm};
use hnse_core::spectral::{
    apply_a_power, single_mode, sobolev_norm, sobolev_norm_sq, Dealias, FourierField, ProjectorFamily, SpectralParams,
};
use hnse_core::truncation::{CutoffProfile, Truncation};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BETA: f64 = 1.45;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn trunc(m: i64, nu: f64, dealias: Dealias) -> Truncation {
    let params = SpectralParams::new(BETA, nu, m, SpectralParams::default_s(BETA), 1.0).unwrap();
    Truncation::new(params, CutoffProfile::default(), dealias)
}

fn config(dt: f64, t: f64, integrator: Integrator, nonlinearity: Nonlinearity) -> SimConfig {
    SimConfig { integrator, nonlinearity, ..SimConfig::new(dt, t).unwrap() }
}

/// `(sin x₂, 0)`.
fn shear(m: i64) -> FourierField {
    let mut u = FourierField::zero(m);
    u.set_real_pair(LatticePoint::new(0, 1), [Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.0)]);
    u
}

fn low_field(r: &mut ChaCha8Rng, m: i64, radius: i64, s: f64, norm: f64) -> FourierField {
    with_sobolev_norm(&gaussian_field(r, m, &half_box(radius), |_| 1.0), s, norm)
}

#[test]
fn config_validation() {
    assert!(matches!(SimConfig::new(0.0, 1.0), Err(DynamicsError::InvalidConfig(_))));
    assert!(matches!(SimConfig::new(0.1, 0.05), Err(DynamicsError::InvalidConfig(_))));
    assert_eq!(SimConfig::new(0.1, 1.0).unwrap().steps(), 10);
}

#[test]
fn rhs_zero_and_shear() {
    let t = trunc(8, 1.0, Dealias::TwoThirds);
    let zero = FourierField::zero(8);
    assert_eq!(rhs_prepared(&zero, &zero, &t).unwrap().max_abs(), 0.0);
    for nu in [1.0, 0.3] {
        let t = trunc(8, nu, Dealias::TwoThirds);
        let u = shear(8);
        let f = u.scale(nu);
        assert!(rhs_prepared(&u, &f, &t).unwrap().max_abs() <= 1e-12);
    }
}

#[test]
fn prepared_and_abstract_forms_agree() {
    let mut r = rng(21);
    for dealias in [Dealias::TwoThirds, Dealias::Padded] {
        let t = trunc(8, 1.0, dealias);
        for i in 0..30 {
            let u = with_sobolev_norm(&random_field(&mut r, 8, 8), t.params.w_exponent(), 0.1 * (i + 1) as f64);
            let f = random_field(&mut r, 8, 3);
            let a = rhs_prepared(&u, &f, &t).unwrap();
            let b = rhs_abstract(&u, &f, &t).unwrap();
            assert!(a.sub(&b).norm() <= 1e-12 * a.norm());
        }
    }
}

#[test]
fn single_mode_linear_decay_is_exact() {
    let t = trunc(8, 0.7, Dealias::TwoThirds);
    let model = Model::new(t, Nonlinearity::Disabled);
    let cfg = config(0.01, 0.5, Integrator::ExponentialIntegratingFactor, Nonlinearity::Disabled);
    let j = LatticePoint::new(2, -3);
    let u0 = single_mode(8, j, Complex64::new(0.4, -0.2));
    let zero = FourierField::zero(8);
    let traj = simulate(&u0, &zero, &model, &cfg).unwrap();
    let rate = 0.7 * (13f64).powf(BETA);
    for (time, u) in &traj {
        let want = u0.scale((-rate * time).exp());
        assert!(u.sub(&want).norm() <= 1e-12 * want.norm(), "t = {time}");
    }
}

#[test]
fn invariants_hold_after_every_step() {
    let mut r = rng(22);
    for integrator in [Integrator::ExponentialIntegratingFactor, Integrator::ImplicitExplicit] {
        for dealias in [Dealias::TwoThirds, Dealias::Padded] {
            let t = trunc(12, 1.0, dealias);
            let model = Model::new(t, Nonlinearity::Prepared);
            let cfg = SimConfig { dealias, ..config(2e-3, 0.1, integrator, Nonlinearity::Prepared) };
            let mut u = low_field(&mut r, 12, 6, t.params.w_exponent(), 2.0);
            let f = random_field(&mut r, 12, 2).scale(5.0);
            for _ in 0..cfg.steps() {
                u = step(&u, &f, &model, &cfg).unwrap();
                assert_eq!(u.reality_defect(), 0.0);
                assert!(u.divergence_defect() <= 1e-14 * u.max_abs());
                assert!(!u.contains(LatticePoint::ZERO) && u.is_finite());
                assert!(u.wavenumbers().all(|j| j.sup_norm() <= 12));
            }
        }
    }
}

#[test]
fn steady_shear_is_a_fixed_point() {
    for integrator in [Integrator::ExponentialIntegratingFactor, Integrator::ImplicitExplicit] {
        let t = trunc(8, 1.0, Dealias::TwoThirds);
        let model = Model::new(t, Nonlinearity::Prepared);
        let cfg = config(0.01, 1.0, integrator, Nonlinearity::Prepared);
        let u0 = shear(8);
        let traj = simulate(&u0, &u0, &model, &cfg).unwrap();
        assert_eq!(traj.len(), 101);
        for (_, u) in &traj {
            assert!(u.sub(&u0).max_abs() <= 1e-10);
        }
    }
}

fn final_state(
    u0: &FourierField,
    f: &FourierField,
    model: &Model,
    dt: f64,
    t: f64,
    integrator: Integrator,
) -> FourierField {
    let cfg = config(dt, t, integrator, model.nonlinearity);
    simulate(u0, f, model, &cfg).unwrap().pop().unwrap().1
}

#[test]
fn integrators_are_second_order() {
    let mut r = rng(23);
    let t = trunc(8, 1.0, Dealias::TwoThirds);
    let model = Model::new(t, Nonlinearity::Prepared);
    let u0 = low_field(&mut r, 8, 3, t.params.w_exponent(), 3.0);
    let f = random_field(&mut r, 8, 2).scale(2.0);
    for integrator in [Integrator::ExponentialIntegratingFactor, Integrator::ImplicitExplicit] {
        let horizon = 0.2;
        let dt = 0.02;
        let reference = final_state(&u0, &f, &model, dt / 8.0, horizon, integrator);
        let e1 = final_state(&u0, &f, &model, dt, horizon, integrator).sub(&reference).norm();
        let e2 = final_state(&u0, &f, &model, dt / 2.0, horizon, integrator).sub(&reference).norm();
        let order = (e1 / e2).log2();
        assert!(order >= 1.8, "{integrator:?}: {e1} {e2} order {order}");
    }
}

#[test]
fn identical_pair_has_zero_cone_functional() {
    let mut r = rng(24);
    let t = trunc(8, 1.0, Dealias::TwoThirds);
    let model = Model::new(t, Nonlinearity::Prepared);
    let u = low_field(&mut r, 8, 3, t.params.w_exponent(), 0.5);
    let fam = ProjectorFamily::new(5.0, 8.0, 4.0);
    let trace =
        evolve_pair(&u, &u, &FourierField::zero(8), &model, &SimConfig::new(0.01, 0.05).unwrap(), &fam).unwrap();
    for rec in &trace.records {
        assert_eq!((rec.v, rec.dvdt, rec.margin, rec.rhs_bound, rec.norm_v_sq), (0.0, 0.0, 0.0, 0.0, 0.0));
    }
    let summary = cone_report(&trace).unwrap();
    assert!(summary.holds && summary.fraction_satisfied == 1.0);
    assert_eq!(summary.verdict, "cone holds along trajectory");
    let empty = ConeTrace { records: Vec::new(), ..trace };
    assert!(cone_report(&empty).is_none());
}

#[test]
fn single_high_mode_cone_functional_decays_exactly() {
    let nu = 0.8;
    let t = trunc(8, nu, Dealias::TwoThirds);
    let model = Model::new(t, Nonlinearity::Disabled);
    let cfg = config(0.005, 0.1, Integrator::ExponentialIntegratingFactor, Nonlinearity::Disabled);
    let fam = ProjectorFamily::new(5.0, 8.0, 4.0);
    let j = LatticePoint::new(3, 1);
    let lambda = 10f64;
    let q0 = single_mode(8, j, Complex64::new(0.3, 0.1));
    let zero = FourierField::zero(8);
    let trace = evolve_pair(&q0, &zero, &zero, &model, &cfg, &fam).unwrap();
    let v0 = q0.norm_sq();
    let rate = 2.0 * nu * lambda.powf(BETA);
    for rec in &trace.records {
        let want = v0 * (-rate * rec.t).exp();
        assert!((rec.v - want).abs() <= 1e-8 * want, "t = {}", rec.t);
        assert!((rec.dvdt + rate * rec.v).abs() <= 1e-8 * rate * rec.v);
        assert!(rec.margin.is_finite());
    }
    // Linear-only q-dominant data: the cone holds iff the eigenvalue gap does.
    let lin = LinearConeCondition::evaluate(&fam, BETA);
    assert!(lin.holds);
    let summary = cone_report(&trace).unwrap();
    assert!(summary.holds);
}

#[test]
fn cone_derivative_matches_central_differences() {
    let t = trunc(8, 1.0, Dealias::TwoThirds);
    let fam = ProjectorFamily::new(5.0, 8.0, 4.0);
    let mut r = rng(25);
    let u1 = low_field(&mut r, 8, 2, t.params.w_exponent(), 0.9);
    let w = with_sobolev_norm(&gaussian_field(&mut r, 8, &half_box(3), |_| 1.0), 0.0, 1.0);
    let u2 = u1.axpy(0.1, &w);
    let zero = FourierField::zero(8);
    for integrator in [Integrator::ExponentialIntegratingFactor, Integrator::ImplicitExplicit] {
        let model = Model::new(t, Nonlinearity::Prepared);
        let t_star = 0.2;
        let dts = [4e-3, 2e-3, 1e-3, 5e-4];
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let cfg = config(dt, t_star + dt, integrator, Nonlinearity::Prepared);
                let trace = evolve_pair(&u1, &u2, &zero, &model, &cfg, &fam).unwrap();
                let n = (t_star / dt).round() as usize;
                let rec = &trace.records;
                let cd = (rec[n + 1].v - rec[n - 1].v) / (2.0 * dt);
                (cd - rec[n].dvdt).abs()
            })
            .collect();
        let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let slope = hnse_core::dynamics::fit_slope(&xs, &ys).unwrap();
        assert!((slope - 2.0).abs() <= 0.2, "{integrator:?}: slope {slope}, {errs:?}");
    }
}

#[test]
fn energy_identity_with_active_nonlinearity() {
    let mut r = rng(26);
    let t = trunc(8, 1.0, Dealias::TwoThirds);
    let model = Model::new(t, Nonlinearity::Prepared);
    let zero = FourierField::zero(8);
    for amp in [0.5, 2.0, 8.0] {
        let u = low_field(&mut r, 8, 5, t.params.w_exponent(), amp);
        // d/dt ‖u‖² = 2(u_t, u) with u_t from the solver's right side.
        let recorded = 2.0 * model.rhs(&u, &zero).unwrap().inner(&u).re;
        let assembled = -2.0 * sobolev_norm_sq(&u, BETA) - 2.0 * t.convection(&u).unwrap().inner(&u).re;
        assert!((recorded - assembled).abs() <= 1e-8 * recorded.abs());
        // And against the trajectory itself.
        let dt = 1e-5;
        let cfg = config(dt, dt, Integrator::ExponentialIntegratingFactor, Nonlinearity::Prepared);
        let plus = step(&u, &zero, &model, &cfg).unwrap();
        let back = SimConfig { dt: -dt, ..cfg };
        let minus = step(&u, &zero, &model, &back).unwrap();
        let cd = (plus.norm_sq() - minus.norm_sq()) / (2.0 * dt);
        assert!((cd - assembled).abs() <= 1e-4 * assembled.abs(), "{cd} vs {assembled}");
    }
    // The prepared term does transfer energy once W saturates.
    let u = low_field(&mut r, 8, 5, t.params.w_exponent(), 8.0);
    assert!(t.convection(&u).unwrap().inner(&u).re.abs() > 0.0);
}

#[test]
fn tracking_rates() {
    let t = trunc(8, 1.0, Dealias::TwoThirds);
    let model = Model::new(t, Nonlinearity::Disabled);
    let cfg = config(0.01, 0.3, Integrator::ExponentialIntegratingFactor, Nonlinearity::Disabled);
    let zero = FourierField::zero(8);
    let j = LatticePoint::new(1, 2);
    let a = simulate(&single_mode(8, j, Complex64::new(1.0, 0.0)), &zero, &model, &cfg).unwrap();
    let b = simulate(&single_mode(8, j, Complex64::new(0.2, 0.3)), &zero, &model, &cfg).unwrap();
    let same = tracking_distance(&a, &a, 0.0).unwrap();
    assert!(same.distances.iter().all(|&d| d == 0.0) && same.rate.is_none());
    let rep = tracking_distance(&a, &b, 0.3).unwrap();
    let want = -(5f64).powf(BETA);
    let got = rep.rate.unwrap();
    assert!((got - want).abs() <= 0.01 * want.abs(), "{got} vs {want}");
    assert_eq!(tracking_distance(&a, &b[1..], 0.0), Err(DynamicsError::GridMismatch));
}

#[test]
fn absorbing_radius_estimates() {
    let t = trunc(8, 1.0, Dealias::TwoThirds);
    let model = Model::new(t, Nonlinearity::Prepared);
    let s = t.params.w_exponent();
    let zero = FourierField::zero(8);

    // Pure decay: the estimate shrinks as the horizon grows.
    let short =
        estimate_absorbing_radius(&mut rng(27), &zero, &model, &SimConfig::new(0.05, 2.0).unwrap(), 3, 2.0, 0.5)
            .unwrap();
    let long =
        estimate_absorbing_radius(&mut rng(27), &zero, &model, &SimConfig::new(0.05, 20.0).unwrap(), 3, 2.0, 0.5)
            .unwrap();
    assert!(long.radius < short.radius && long.radius < 1e-3 && !long.still_growing);

    // Steady shear forcing: trajectories settle on the shear, whose norm is 1/√2.
    // The slowest mode relaxes like e^{-t}, so by T = 30 the sup is within
    // rounding of the steady norm even when approached from below.
    let f = shear(8);
    let shear_norm = sobolev_norm(&f, s);
    assert!((shear_norm - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    let est =
        estimate_absorbing_radius(&mut rng(28), &f, &model, &SimConfig::new(0.05, 30.0).unwrap(), 3, 4.0, 0.5).unwrap();
    assert!(est.radius >= shear_norm * (1.0 - 1e-9), "{} vs {shear_norm}", est.radius);
    assert!(!est.still_growing);
    // From tiny data the norm is still climbing towards the shear at T = 2.
    let early =
        estimate_absorbing_radius(&mut rng(28), &f, &model, &SimConfig::new(0.05, 2.0).unwrap(), 1, 1e-3, 0.5).unwrap();
    assert!(early.still_growing && early.radius < shear_norm);

    // Monotone in the discarded fraction.
    let cfg = SimConfig::new(0.01, 1.0).unwrap();
    let mut prev = f64::INFINITY;
    for frac in [0.0, 0.25, 0.5, 0.75, 0.95] {
        let e = estimate_absorbing_radius(&mut rng(29), &f, &model, &cfg, 2, 4.0, frac).unwrap();
        assert!(e.radius <= prev);
        prev = e.radius;
    }
}

#[test]
fn runs_are_bitwise_deterministic() {
    let t = trunc(8, 1.0, Dealias::TwoThirds);
    let model = Model::new(t, Nonlinearity::Prepared);
    let fam = ProjectorFamily::new(5.0, 8.0, 4.0);
    let run = || {
        let mut r = rng(30);
        let u1 = low_field(&mut r, 8, 4, t.params.w_exponent(), 3.0);
        let u2 = u1.axpy(1e-3, &random_field(&mut r, 8, 4));
        let f = random_field(&mut r, 8, 2);
        evolve_pair(&u1, &u2, &f, &model, &SimConfig::new(0.01, 0.2).unwrap(), &fam).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.v.to_bits(), y.v.to_bits());
        assert_eq!(x.dvdt.to_bits(), y.dvdt.to_bits());
        assert_eq!(x.margin.to_bits(), y.margin.to_bits());
    }
}

#[test]
fn cone_record_matches_definition() {
    let mut r = rng(31);
    let t = trunc(8, 1.0, Dealias::TwoThirds);
    let model = Model::new(t, Nonlinearity::Prepared);
    let fam = ProjectorFamily::new(5.0, 8.0, 4.0);
    let u1 = low_field(&mut r, 8, 4, t.params.w_exponent(), 2.0);
    let u2 = low_field(&mut r, 8, 4, t.params.w_exponent(), 1.0);
    let rec = cone_record(0.0, &u1, &u2, &model, &fam).unwrap();
    let v = u1.sub(&u2);
    let p = v.filter(|j| j.norm_sq() <= 5);
    let q = v.filter(|j| j.norm_sq() > 5);
    assert!((rec.v - (q.norm_sq() - p.norm_sq())).abs() <= 1e-14 * v.norm_sq());
    let df = t.nonlinearity_f(&u1).unwrap().sub(&t.nonlinearity_f(&u2).unwrap());
    let w = apply_a_power(&p, 0.5).sub(&apply_a_power(&q, 0.5));
    let want = -2.0 * (sobolev_norm_sq(&q, BETA) - sobolev_norm_sq(&p, BETA)) + 2.0 * df.inner(&w).re;
    assert!((rec.dvdt - want).abs() <= 1e-12 * want.abs());
    let alpha = 0.5 * (8f64.powf(BETA) + 5f64.powf(BETA));
    assert!((rec.alpha - alpha).abs() <= 1e-14 * alpha);
    assert!((rec.rhs_bound + 5f64.powf(BETA - 1.0) / 8.0 * v.norm_sq()).abs() <= 1e-14 * v.norm_sq());
    assert_eq!(rec.margin, rec.rhs_bound - (rec.dvdt + 2.0 * rec.alpha * rec.v));
}
