//! Term-by-term evaluation of the energy functional, the magnetic kinetic
//! form, the Euler-Lagrange operator, and the Lagrange multiplier.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField2D, PotentialSpec};
use crate::logconv::LogKernelPlan;

/// Coefficients on the two interaction terms. Both 1 is the full
/// functional; both 0 reduces E_a to the exactly solvable rotating
/// oscillator, which supplies closed-form oracles.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Interactions {
    pub log_coeff: f64,
    pub quartic_coeff: f64,
}

impl Default for Interactions {
    fn default() -> Self {
        Interactions { log_coeff: 1.0, quartic_coeff: 1.0 }
    }
}

impl Interactions {
    pub fn disabled() -> Self {
        Interactions { log_coeff: 0.0, quartic_coeff: 0.0 }
    }
}

/// E_a(u) split into its five terms, plus the magnetic rewriting
///
/// ```text
/// E_a(u) = int |(grad - iA)u|^2 + int V_Omega |u|^2 + log + quartic,
/// A = (Omega/2) x^perp,
/// ```
///
/// which is tracked redundantly as a discretization self-check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBreakdown {
    /// int |grad u|^2
    pub kinetic: f64,
    /// int V |u|^2
    pub potential: f64,
    /// (c_log/2) intint ln|x-y| |u|^2 |u|^2
    pub log: f64,
    /// -(c_quartic/2) int |u|^4
    pub quartic: f64,
    /// -Omega int x^perp . (iu, grad u)
    pub rotation: f64,
    /// sum of the five terms above
    pub total: f64,
    /// int |(grad - iA)u|^2
    pub magnetic_kinetic: f64,
    /// int V_Omega |u|^2
    pub v_omega_potential: f64,
}

fn ensure_same_grid(u: &ComplexField2D, plan: &LogKernelPlan) -> Result<()> {
    if u.grid() != plan.grid() {
        return Err(Error::GridMismatch(format!(
            "field on {}x{} half-width {}, plan on {}x{} half-width {}",
            u.grid().n(),
            u.grid().n(),
            u.grid().half_width(),
            plan.grid().n(),
            plan.grid().n(),
            plan.grid().half_width()
        )));
    }
    Ok(())
}

pub fn energy_breakdown(
    u: &ComplexField2D,
    pot: &PotentialSpec,
    plan: &LogKernelPlan,
    inter: &Interactions,
) -> Result<EnergyBreakdown> {
    ensure_same_grid(u, plan)?;
    let grid = u.grid().clone();
    let n = grid.n();
    let omega = pot.omega;
    let abs2 = u.abs2();
    let phi = plan.log_potential(&abs2)?;
    let (d1, d2) = grid.spectral_gradient(u.values())?;

    let mut kin = Array2::<f64>::zeros((n, n));
    let mut pot_dens = Array2::<f64>::zeros((n, n));
    let mut vom_dens = Array2::<f64>::zeros((n, n));
    let mut rot_dens = Array2::<f64>::zeros((n, n));
    let mut mag_dens = Array2::<f64>::zeros((n, n));
    let mut quart_dens = Array2::<f64>::zeros((n, n));
    let mut log_dens = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let x1 = grid.coords()[i];
        for j in 0..n {
            let x2 = grid.coords()[j];
            let v = u.values()[(i, j)];
            let m2 = abs2[(i, j)];
            let g1 = d1[(i, j)];
            let g2 = d2[(i, j)];
            kin[(i, j)] = g1.norm_sqr() + g2.norm_sqr();
            pot_dens[(i, j)] = pot.v((x1, x2)) * m2;
            vom_dens[(i, j)] = pot.v_omega((x1, x2)) * m2;
            rot_dens[(i, j)] = -x2 * (v.conj() * g1).im + x1 * (v.conj() * g2).im;
            // A = (Omega/2)(-x2, x1)
            let a1 = -0.5 * omega * x2;
            let a2 = 0.5 * omega * x1;
            mag_dens[(i, j)] = (g1 - Complex64::i() * a1 * v).norm_sqr()
                + (g2 - Complex64::i() * a2 * v).norm_sqr();
            quart_dens[(i, j)] = m2 * m2;
            log_dens[(i, j)] = m2 * phi[(i, j)];
        }
    }
    let kinetic = grid.integrate_unchecked(&kin);
    let potential = grid.integrate_unchecked(&pot_dens);
    let v_omega_potential = grid.integrate_unchecked(&vom_dens);
    let rotation = -omega * grid.integrate_unchecked(&rot_dens);
    let magnetic_kinetic = grid.integrate_unchecked(&mag_dens);
    let quartic = -0.5 * inter.quartic_coeff * grid.integrate_unchecked(&quart_dens);
    let log = 0.5 * inter.log_coeff * grid.integrate_unchecked(&log_dens);
    let total = kinetic + potential + log + quartic + rotation;
    Ok(EnergyBreakdown {
        kinetic,
        potential,
        log,
        quartic,
        rotation,
        total,
        magnetic_kinetic,
        v_omega_potential,
    })
}

/// Apply the Euler-Lagrange operator
///
/// ```text
/// H u = -Lap u + V u + c_log (ln * |u|^2) u + i Omega (x^perp . grad u)
///       - mu u - c_quartic |u|^2 u,
/// ```
///
/// all derivatives spectral. A minimizer satisfies H u = 0 with mu the
/// Lagrange multiplier; with mu = 0 this is the constrained energy gradient
/// (up to the factor 2 on the quadratic part, absorbed into step sizes).
pub fn el_apply(
    u: &ComplexField2D,
    mu: f64,
    pot: &PotentialSpec,
    plan: &LogKernelPlan,
    inter: &Interactions,
) -> Result<Array2<Complex64>> {
    ensure_same_grid(u, plan)?;
    let grid = u.grid().clone();
    let n = grid.n();
    let omega = pot.omega;
    let abs2 = u.abs2();
    let phi = plan.log_potential(&abs2)?;
    let hat = grid.fft2(u.values());
    let (d1, d2) = grid.gradient_from_hat(&hat);
    let lap = grid.laplacian_from_hat(&hat);
    let mut out = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        let x1 = grid.coords()[i];
        for j in 0..n {
            let x2 = grid.coords()[j];
            let v = u.values()[(i, j)];
            let local = pot.v((x1, x2)) + inter.log_coeff * phi[(i, j)]
                - inter.quartic_coeff * abs2[(i, j)]
                - mu;
            let angular = -x2 * d1[(i, j)] + x1 * d2[(i, j)];
            out[(i, j)] = -lap[(i, j)] + local * v + Complex64::i() * omega * angular;
        }
    }
    Ok(out)
}

/// Relative Euler-Lagrange residual ||H u||_2 / ||u||_2.
pub fn el_residual(
    u: &ComplexField2D,
    mu: f64,
    pot: &PotentialSpec,
    plan: &LogKernelPlan,
    inter: &Interactions,
) -> Result<f64> {
    let mass = u.mass();
    if mass <= 0.0 {
        return Err(Error::ZeroField);
    }
    let r = el_apply(u, mu, pot, plan, inter)?;
    let dens = r.mapv(|v| v.norm_sqr());
    Ok((u.grid().integrate_unchecked(&dens) / mass).sqrt())
}

/// Multiplier from the energy identity
///
/// ```text
/// a mu = e + (c_log/2) intint ln|x-y| |u|^2 |u|^2 - (c_quartic/2) int |u|^4.
/// ```
pub fn multiplier_from_identity(
    e_val: f64,
    u: &ComplexField2D,
    plan: &LogKernelPlan,
    inter: &Interactions,
) -> Result<f64> {
    ensure_same_grid(u, plan)?;
    let a = u.mass();
    if a <= 0.0 {
        return Err(Error::ZeroField);
    }
    let abs2 = u.abs2();
    let b0 = plan.b0(&abs2, &abs2)?;
    Ok((e_val + 0.5 * inter.log_coeff * b0 - 0.5 * inter.quartic_coeff * u.quartic_integral()) / a)
}

/// Multiplier as the Rayleigh quotient <H u, u> / ||u||_2^2 with mu = 0.
pub fn multiplier_rayleigh(
    u: &ComplexField2D,
    pot: &PotentialSpec,
    plan: &LogKernelPlan,
    inter: &Interactions,
) -> Result<f64> {
    let a = u.mass();
    if a <= 0.0 {
        return Err(Error::ZeroField);
    }
    let h = el_apply(u, 0.0, pot, plan, inter)?;
    let mut dens = Array2::<f64>::zeros(h.dim());
    for ((o, hv), uv) in dens.iter_mut().zip(h.iter()).zip(u.values().iter()) {
        *o = (uv.conj() * hv).re;
    }
    Ok(u.grid().integrate_unchecked(&dens) / a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_smooth_complex, ComplexField2D};
    use crate::grid::Grid2D;
    use crate::groundstate::solve_radial_ground_state;
    use once_cell::sync::Lazy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    static PROFILE: Lazy<crate::groundstate::RadialProfile> =
        Lazy::new(|| solve_radial_ground_state(1e-10, 20.0).unwrap());

    fn unit_gaussian(grid: &Grid2D) -> ComplexField2D {
        let n = grid.n();
        let norm = 1.0 / std::f64::consts::PI.sqrt();
        let mut u = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let r2 = grid.coords()[i].powi(2) + grid.coords()[j].powi(2);
                u[(i, j)] = Complex64::new(norm * (-r2 / 2.0).exp(), 0.0);
            }
        }
        ComplexField2D::new(grid, u).unwrap()
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = if n % 2 == 0 { n } else { n + 1 };
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn zero_field_breakdown() {
        let grid = Grid2D::new(32, 6.0).unwrap();
        let plan = LogKernelPlan::new(&grid);
        let pot = PotentialSpec::harmonic(2.0, 1.0).unwrap();
        let u = ComplexField2D::new(&grid, Array2::zeros((32, 32))).unwrap();
        let e = energy_breakdown(&u, &pot, &plan, &Interactions::default()).unwrap();
        for v in [e.kinetic, e.potential, e.log, e.quartic, e.rotation, e.total, e.magnetic_kinetic, e.v_omega_potential] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn real_field_has_no_rotation_energy() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let plan = LogKernelPlan::new(&grid);
        let pot = PotentialSpec::harmonic(2.0, 1.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_smooth_complex(&grid, &mut rng, 3).mapv(|v| Complex64::new(v.re, 0.0));
        let u = ComplexField2D::new(&grid, w).unwrap();
        let e = energy_breakdown(&u, &pot, &plan, &Interactions::default()).unwrap();
        assert!(e.rotation.abs() < 1e-12 * (1.0 + e.kinetic), "{}", e.rotation);
    }

    #[test]
    fn gaussian_oscillator_closed_forms() {
        let grid = Grid2D::new(256, 12.0).unwrap();
        let plan = LogKernelPlan::new(&grid);
        let pot = PotentialSpec::harmonic(2.0, 0.0).unwrap();
        let u = unit_gaussian(&grid);
        let e = energy_breakdown(&u, &pot, &plan, &Interactions::default()).unwrap();

        // radial quadrature oracle for the same three integrals
        let pi = std::f64::consts::PI;
        let kin_oracle = simpson(|r| 2.0 * pi * r * (r * r * (-r * r).exp() / pi), 0.0, 12.0, 48000);
        let pot_oracle = simpson(|r| 2.0 * pi * r * (r * r * (-r * r).exp() / pi), 0.0, 12.0, 48000);
        let quart_oracle = -0.5 * simpson(|r| 2.0 * pi * r * ((-2.0 * r * r).exp() / (pi * pi)), 0.0, 12.0, 48000);
        assert!((kin_oracle - 1.0).abs() < 1e-12);
        assert!((pot_oracle - 1.0).abs() < 1e-12);
        assert!((quart_oracle + 1.0 / (4.0 * pi)).abs() < 1e-12);

        assert!((e.kinetic - 1.0).abs() < 1e-10, "kinetic {}", e.kinetic);
        assert!((e.potential - 1.0).abs() < 1e-10, "potential {}", e.potential);
        assert!((e.quartic + 1.0 / (4.0 * pi)).abs() < 1e-10, "quartic {}", e.quartic);
        assert!(e.rotation == 0.0);
        assert!((e.v_omega_potential - e.potential).abs() < 1e-14);
        let sum = e.kinetic + e.potential + e.log + e.quartic + e.rotation;
        assert!((e.total - sum).abs() <= 1e-12 * sum.abs());
    }

    #[test]
    fn breakdown_identities_on_random_fields() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let plan = LogKernelPlan::new(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let omega = rng.gen_range(0.0..2.0);
            let pot = PotentialSpec::harmonic(2.0, omega).unwrap();
            let u = ComplexField2D::new(&grid, random_smooth_complex(&grid, &mut rng, 3)).unwrap();
            let e = energy_breakdown(&u, &pot, &plan, &Interactions::default()).unwrap();

            let sum = e.kinetic + e.potential + e.log + e.quartic + e.rotation;
            assert!((e.total - sum).abs() <= 1e-12 * sum.abs().max(1.0));

            // moment of inertia for the algebraic magnetic identity
            let abs2 = u.abs2();
            let mut r2w = Array2::<f64>::zeros((64, 64));
            for i in 0..64 {
                for j in 0..64 {
                    let r2 = grid.coords()[i].powi(2) + grid.coords()[j].powi(2);
                    r2w[(i, j)] = r2 * abs2[(i, j)];
                }
            }
            let inertia = grid.integrate(&r2w).unwrap();
            let predicted = e.kinetic + e.rotation + 0.25 * omega * omega * inertia;
            assert!(
                (e.magnetic_kinetic - predicted).abs() <= 1e-10 * predicted.abs().max(1.0),
                "magnetic {} vs {}",
                e.magnetic_kinetic,
                predicted
            );

            // the energy rewrite through the magnetic form
            let rewrite = e.magnetic_kinetic + e.v_omega_potential + e.log + e.quartic;
            assert!((e.total - rewrite).abs() <= 1e-10 * e.total.abs().max(1.0));
        }
    }

    #[test]
    fn diamagnetic_inequality_random_fields() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let plan = LogKernelPlan::new(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let omega = rng.gen_range(0.0..3.0);
            let pot = PotentialSpec::harmonic(2.0, omega).unwrap();
            let u = ComplexField2D::new(&grid, random_smooth_complex(&grid, &mut rng, 2)).unwrap();
            let e = energy_breakdown(&u, &pot, &plan, &Interactions::default()).unwrap();
            let mge = u.modulus_gradient_energy().unwrap();
            assert!(
                e.magnetic_kinetic >= mge - 1e-8 * u.mass(),
                "omega={omega}: {} < {}",
                e.magnetic_kinetic,
                mge
            );
        }
    }

    #[test]
    fn oscillator_eigenpair_residual() {
        let grid = Grid2D::new(256, 12.0).unwrap();
        let plan = LogKernelPlan::new(&grid);
        let pot = PotentialSpec::harmonic(2.0, 0.0).unwrap();
        let u = unit_gaussian(&grid);
        let off = Interactions::disabled();
        let r = el_residual(&u, 2.0, &pot, &plan, &off).unwrap();
        assert!(r < 1e-8, "residual {r}");
        let r0 = el_residual(&u, 0.0, &pot, &plan, &off).unwrap();
        assert!((r0 - 2.0).abs() < 1e-8, "residual {r0}");
    }

    #[test]
    fn multiplier_extractions_agree() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let plan = LogKernelPlan::new(&grid);
        let pot = PotentialSpec::harmonic(2.0, 0.7).unwrap();
        let inter = Interactions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let u = ComplexField2D::new(&grid, random_smooth_complex(&grid, &mut rng, 3)).unwrap();
            let e = energy_breakdown(&u, &pot, &plan, &inter).unwrap();
            let mu_id = multiplier_from_identity(e.total, &u, &plan, &inter).unwrap();
            let mu_ray = multiplier_rayleigh(&u, &pot, &plan, &inter).unwrap();
            assert!(
                (mu_id - mu_ray).abs() <= 1e-10 * mu_ray.abs().max(1.0),
                "{mu_id} vs {mu_ray}"
            );
        }
    }

    #[test]
    fn multiplier_linear_case_and_errors() {
        let grid = Grid2D::new(256, 12.0).unwrap();
        let plan = LogKernelPlan::new(&grid);
        let pot = PotentialSpec::harmonic(2.0, 0.0).unwrap();
        let off = Interactions::disabled();
        let a: f64 = 2.5;
        let scaled = unit_gaussian(&grid).values().mapv(|v| v * a.sqrt());
        let u = ComplexField2D::new(&grid, scaled).unwrap();
        let e = energy_breakdown(&u, &pot, &plan, &off).unwrap();
        let mu = multiplier_from_identity(e.total, &u, &plan, &off).unwrap();
        assert!((mu - 2.0).abs() < 1e-8, "mu {mu}");
        let mu = multiplier_rayleigh(&u, &pot, &plan, &off).unwrap();
        assert!((mu - 2.0).abs() < 1e-8, "mu {mu}");

        let zero = ComplexField2D::new(&grid, Array2::zeros((256, 256))).unwrap();
        assert!(matches!(multiplier_from_identity(0.0, &zero, &plan, &off), Err(Error::ZeroField)));
        assert!(matches!(multiplier_rayleigh(&zero, &pot, &plan, &off), Err(Error::ZeroField)));
        assert!(matches!(el_residual(&zero, 0.0, &pot, &plan, &off), Err(Error::ZeroField)));
    }

    #[test]
    fn gauge_covariance_with_lattice_phase() {
        let grid = Grid2D::new(128, 8.0).unwrap();
        let plan = LogKernelPlan::new(&grid);
        let omega = 1.0;
        let pot = PotentialSpec::harmonic(2.0, omega).unwrap();
        let inter = Interactions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let base = random_smooth_complex(&grid, &mut rng, 3);
        let u = ComplexField2D::new(&grid, base.clone()).unwrap();

        // gauge phase S(x) = x . c^perp / 2 with grad(Omega S) = k on the
        // Fourier lattice, so the modulated field stays band-limited
        let l = grid.half_width();
        let k = (3.0 * std::f64::consts::PI / l, -2.0 * std::f64::consts::PI / l);
        let mut modulated = Array2::<Complex64>::zeros((128, 128));
        for i in 0..128 {
            let x1 = grid.coords()[i];
            for j in 0..128 {
                let x2 = grid.coords()[j];
                modulated[(i, j)] =
                    base[(i, j)] * Complex64::from_polar(1.0, k.0 * x1 + k.1 * x2);
            }
        }
        let v = ComplexField2D::new(&grid, modulated).unwrap();

        let eu = energy_breakdown(&u, &pot, &plan, &inter).unwrap();
        let ev = energy_breakdown(&v, &pot, &plan, &inter).unwrap();

        // expansion of (kinetic + rotation) under u -> u e^{ik.x}
        let (d1, d2) = grid.spectral_gradient(u.values()).unwrap();
        let mut corr = Array2::<f64>::zeros((128, 128));
        for i in 0..128 {
            let x1 = grid.coords()[i];
            for j in 0..128 {
                let x2 = grid.coords()[j];
                let w = u.values()[(i, j)];
                let m2 = w.norm_sqr();
                let j1 = (w.conj() * d1[(i, j)]).im;
                let j2 = (w.conj() * d2[(i, j)]).im;
                let xperp_k = -x2 * k.0 + x1 * k.1;
                corr[(i, j)] = 2.0 * (k.0 * j1 + k.1 * j2) + (k.0 * k.0 + k.1 * k.1) * m2
                    - omega * xperp_k * m2;
            }
        }
        let predicted = eu.kinetic + eu.rotation + grid.integrate(&corr).unwrap();
        let measured = ev.kinetic + ev.rotation;
        assert!(
            (measured - predicted).abs() <= 1e-8 * predicted.abs().max(1.0),
            "{measured} vs {predicted}"
        );

        // covariance of the magnetic form: same integral with A shifted by k
        let mut shifted = Array2::<f64>::zeros((128, 128));
        for i in 0..128 {
            let x1 = grid.coords()[i];
            for j in 0..128 {
                let x2 = grid.coords()[j];
                let w = u.values()[(i, j)];
                let a1 = -0.5 * omega * x2 - k.0;
                let a2 = 0.5 * omega * x1 - k.1;
                shifted[(i, j)] = (d1[(i, j)] - Complex64::i() * a1 * w).norm_sqr()
                    + (d2[(i, j)] - Complex64::i() * a2 * w).norm_sqr();
            }
        }
        let direct = grid.integrate(&shifted).unwrap();
        assert!(
            (ev.magnetic_kinetic - direct).abs() <= 1e-8 * direct.abs().max(1.0),
            "{} vs {direct}",
            ev.magnetic_kinetic
        );
    }

    #[test]
    fn lower_bound_feasibility_monitor() {
        let grid = Grid2D::new(64, 8.0).unwrap();
        let plan = LogKernelPlan::new(&grid);
        let a_star = PROFILE.a_star;
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let mut c_run = f64::NEG_INFINITY;
        for _ in 0..50 {
            let omega = rng.gen_range(0.0..1.0);
            let pot = PotentialSpec::harmonic(2.0, omega).unwrap();
            let a = rng.gen_range(0.1..0.9) * a_star;
            let raw = random_smooth_complex(&grid, &mut rng, 3);
            let probe = ComplexField2D::new(&grid, raw).unwrap();
            let scale = (a / probe.mass()).sqrt();
            let u = ComplexField2D::new(&grid, probe.values().mapv(|w| w * scale)).unwrap();
            let e = energy_breakdown(&u, &pot, &plan, &Interactions::default()).unwrap();
            let mge = u.modulus_gradient_energy().unwrap();
            let slack = (a_star - a) / (2.0 * a_star) * mge - e.total;
            assert!(slack.is_finite());
            c_run = c_run.max(slack);
        }
        assert!(c_run.is_finite());
        println!("lower-bound feasibility constant over 50 fields: C_run = {c_run:.6}");
    }
}
