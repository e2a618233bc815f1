//! Complex states on the grid, their observables, trapping potentials, and
//! the trial-state families used by the upper-bound energy estimates.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::groundstate::{sample_scaled, RadialProfile};

/// Mass fraction in the outer 10% of the square above which a state is
/// considered to touch the boundary (spectral derivatives degrade there).
const BOUNDARY_WARN: f64 = 1e-10;

/// A complex state sampled on a grid. Immutable once constructed; the
/// boundary-decay monitor is recorded at construction time.
#[derive(Debug, Clone)]
pub struct ComplexField2D {
    grid: Grid2D,
    values: Array2<Complex64>,
    boundary_mass_fraction: f64,
}

impl ComplexField2D {
    pub fn new(grid: &Grid2D, values: Array2<Complex64>) -> Result<Self> {
        grid.check_shape(&values)?;
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        let abs2 = values.mapv(|v| v.norm_sqr());
        let boundary_mass_fraction = grid.outer_annulus_fraction(&abs2);
        if boundary_mass_fraction > BOUNDARY_WARN {
            log::warn!(
                "field carries {boundary_mass_fraction:.2e} of its mass in the outer 10% of the \
                 domain; spectral observables may be distorted"
            );
        }
        Ok(ComplexField2D { grid: grid.clone(), values, boundary_mass_fraction })
    }

    pub fn from_real(grid: &Grid2D, values: &Array2<f64>) -> Result<Self> {
        Self::new(grid, values.mapv(|v| Complex64::new(v, 0.0)))
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn boundary_mass_fraction(&self) -> f64 {
        self.boundary_mass_fraction
    }

    pub fn abs2(&self) -> Array2<f64> {
        self.values.mapv(|v| v.norm_sqr())
    }

    /// int |u|^2.
    pub fn mass(&self) -> f64 {
        self.grid.integrate_unchecked(&self.abs2())
    }

    /// int |grad u|^2 (spectral).
    pub fn kinetic_energy(&self) -> f64 {
        let (d1, d2) = self.grid.spectral_gradient(&self.values).expect("shape checked");
        let dens = azip_norm_sqr(&d1, &d2);
        self.grid.integrate_unchecked(&dens)
    }

    /// int |u|^4.
    pub fn quartic_integral(&self) -> f64 {
        let dens = self.values.mapv(|v| {
            let m = v.norm_sqr();
            m * m
        });
        self.grid.integrate_unchecked(&dens)
    }

    /// int x^perp . (iu, grad u) with x^perp = (-x2, x1) and
    /// (iu, grad u) = Im(conj(u) grad u).
    pub fn rotation_term(&self) -> f64 {
        let (d1, d2) = self.grid.spectral_gradient(&self.values).expect("shape checked");
        let n = self.grid.n();
        let coords = self.grid.coords();
        let mut dens = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            let x1 = coords[i];
            for j in 0..n {
                let x2 = coords[j];
                let u = self.values[(i, j)];
                let j1 = (u.conj() * d1[(i, j)]).im;
                let j2 = (u.conj() * d2[(i, j)]).im;
                dens[(i, j)] = -x2 * j1 + x1 * j2;
            }
        }
        self.grid.integrate_unchecked(&dens)
    }

    /// Location of the global maximum of |u|: first row-major sample within
    /// 1e-12 of the max, refined by a separable quadratic fit over the 3x3
    /// neighborhood (skipped on the domain edge).
    pub fn peak_location(&self) -> (f64, f64) {
        let n = self.grid.n();
        let modulus = self.values.mapv(|v| v.norm());
        let mut best = 0.0_f64;
        for &m in modulus.iter() {
            best = best.max(m);
        }
        let mut peak = (0, 0);
        'outer: for i in 0..n {
            for j in 0..n {
                if modulus[(i, j)] >= best * (1.0 - 1e-12) {
                    peak = (i, j);
                    break 'outer;
                }
            }
        }
        let (i, j) = peak;
        let coords = self.grid.coords();
        let h = self.grid.spacing();
        let refine = |lo: f64, mid: f64, hi: f64| -> f64 {
            let denom = hi - 2.0 * mid + lo;
            if denom >= 0.0 || !denom.is_finite() {
                return 0.0;
            }
            ((lo - hi) / (2.0 * denom)).clamp(-1.0, 1.0)
        };
        let dx = if i > 0 && i + 1 < n {
            refine(modulus[(i - 1, j)], modulus[(i, j)], modulus[(i + 1, j)])
        } else {
            0.0
        };
        let dy = if j > 0 && j + 1 < n {
            refine(modulus[(i, j - 1)], modulus[(i, j)], modulus[(i, j + 1)])
        } else {
            0.0
        };
        (coords[i] + dx * h, coords[j] + dy * h)
    }

    /// int |grad |u||^2 with the guarded modulus gradient. The inverse
    /// square root of this is the blow-up length epsilon_a, so an
    /// identically zero field is rejected rather than returning 0.
    pub fn modulus_gradient_energy(&self) -> Result<f64> {
        if self.values.iter().all(|v| v.norm_sqr() == 0.0) {
            return Err(Error::ZeroField);
        }
        let (g1, g2) = self.grid.modulus_gradient(&self.values)?;
        let dens = &(&g1 * &g1) + &(&g2 * &g2);
        Ok(self.grid.integrate_unchecked(&dens))
    }
}

fn azip_norm_sqr(d1: &Array2<Complex64>, d2: &Array2<Complex64>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(d1.dim());
    for ((o, a), b) in out.iter_mut().zip(d1.iter()).zip(d2.iter()) {
        *o = a.norm_sqr() + b.norm_sqr();
    }
    out
}

/// Trapping potential shapes. All provided kinds satisfy V >= 0 and grow at
/// least quadratically, so the variational problem is well posed.
#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// V = (lambda^2/4) |x|^2; critical velocity lambda.
    Harmonic { lambda: f64 },
    /// V = coefficient |x|^s with s > 2; critical velocity infinite.
    Power { s: f64, coefficient: f64 },
    /// Nonnegative samples on their own grid, bilinearly interpolated.
    Tabulated { grid: Grid2D, values: Array2<f64> },
}

#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    /// Rotation speed Omega >= 0.
    pub omega: f64,
}

impl PotentialSpec {
    pub fn harmonic(lambda: f64, omega: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("harmonic strength must be > 0, got {lambda}")));
        }
        Self::with_omega(PotentialKind::Harmonic { lambda }, omega)
    }

    pub fn power(s: f64, coefficient: f64, omega: f64) -> Result<Self> {
        if !(s > 2.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("power exponent must exceed 2, got {s}")));
        }
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(Error::InvalidParameter(format!("power coefficient must be > 0, got {coefficient}")));
        }
        Self::with_omega(PotentialKind::Power { s, coefficient }, omega)
    }

    pub fn tabulated(grid: &Grid2D, values: Array2<f64>, omega: f64) -> Result<Self> {
        grid.check_shape(&values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter("tabulated potential has negative samples".into()));
        }
        Self::with_omega(PotentialKind::Tabulated { grid: grid.clone(), values }, omega)
    }

    fn with_omega(kind: PotentialKind, omega: f64) -> Result<Self> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("rotation speed must be >= 0, got {omega}")));
        }
        Ok(PotentialSpec { kind, omega })
    }

    /// V(x).
    pub fn v(&self, x: (f64, f64)) -> f64 {
        let r2 = x.0 * x.0 + x.1 * x.1;
        match &self.kind {
            PotentialKind::Harmonic { lambda } => 0.25 * lambda * lambda * r2,
            PotentialKind::Power { s, coefficient } => coefficient * r2.sqrt().powf(*s),
            PotentialKind::Tabulated { grid, values } => bilinear(grid, values, x),
        }
    }

    /// Effective potential V_Omega(x) = V(x) - (Omega^2/4) |x|^2.
    pub fn v_omega(&self, x: (f64, f64)) -> f64 {
        let r2 = x.0 * x.0 + x.1 * x.1;
        self.v(x) - 0.25 * self.omega * self.omega * r2
    }

    /// Critical rotational velocity: the largest Omega for which V_Omega
    /// still grows without bound. For tabulated samples this is estimated
    /// from the outer 10% of the table (2 sqrt(V)/|x| there).
    pub fn omega_star(&self) -> f64 {
        match &self.kind {
            PotentialKind::Harmonic { lambda } => *lambda,
            PotentialKind::Power { .. } => f64::INFINITY,
            PotentialKind::Tabulated { grid, values } => {
                let cut = 0.9 * grid.half_width();
                let mut m = f64::INFINITY;
                for i in 0..grid.n() {
                    let x1 = grid.coords()[i];
                    for j in 0..grid.n() {
                        let x2 = grid.coords()[j];
                        if x1.abs() >= cut || x2.abs() >= cut {
                            let r = (x1 * x1 + x2 * x2).sqrt();
                            m = m.min(2.0 * values[(i, j)].max(0.0).sqrt() / r);
                        }
                    }
                }
                m
            }
        }
    }

    /// Rotation beyond the critical velocity: V_Omega is unbounded below and
    /// the infimum collapses. Only the nonexistence probes run in this mode.
    pub fn is_supercritical(&self) -> bool {
        self.omega > self.omega_star()
    }

    /// V sampled on a grid.
    pub fn sample_v(&self, grid: &Grid2D) -> Array2<f64> {
        let n = grid.n();
        let mut out = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self.v((grid.coords()[i], grid.coords()[j]));
            }
        }
        out
    }
}

fn bilinear(grid: &Grid2D, values: &Array2<f64>, x: (f64, f64)) -> f64 {
    let n = grid.n();
    let h = grid.spacing();
    let l = grid.half_width();
    let fx = ((x.0 + l) / h).clamp(0.0, (n - 1) as f64);
    let fy = ((x.1 + l) / h).clamp(0.0, (n - 1) as f64);
    let i = (fx as usize).min(n - 2);
    let j = (fy as usize).min(n - 2);
    let tx = fx - i as f64;
    let ty = fy - j as f64;
    values[(i, j)] * (1.0 - tx) * (1.0 - ty)
        + values[(i + 1, j)] * tx * (1.0 - ty)
        + values[(i, j + 1)] * (1.0 - tx) * ty
        + values[(i + 1, j + 1)] * tx * ty
}

/// The concrete smooth bump: 1 on the unit disk, exp(1 - 1/(1-(r-1)^2))
/// on 1 < r < 2, and 0 outside.
pub fn cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let t = r - 1.0;
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// Cut-off and translated ground-state trial state
///
/// ```text
/// u(x) = C_tau (tau sqrt(a)/||Q||_2) phi(x - x_tau) Q(tau (x - x_tau)) e^{i Omega S(x)},
/// S(x) = x . x_tau^perp / 2,
/// ```
///
/// with C_tau computed numerically so that the grid mass is exactly a.
/// Returns the state together with C_tau (which tends to 1 as tau grows).
pub fn make_trial_cutoff_state(
    p: &RadialProfile,
    grid: &Grid2D,
    a: f64,
    tau: f64,
    x_tau: (f64, f64),
    omega: f64,
) -> Result<(ComplexField2D, f64)> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {a}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let l = grid.half_width();
    if x_tau.0.abs() + 2.0 > l || x_tau.1.abs() + 2.0 > l {
        return Err(Error::FrameOverflow(format!(
            "cutoff support around {x_tau:?} exceeds the half-width {l}"
        )));
    }
    if tau * grid.spacing() > 1.0 {
        return Err(Error::UnderResolved(format!(
            "tau {tau} puts the profile core below the grid spacing {}",
            grid.spacing()
        )));
    }
    let n = grid.n();
    let amp = tau * (a / p.a_star).sqrt();
    let mut raw = Array2::<Complex64>::zeros((n, n));
    let mut mass_dens = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let x1 = grid.coords()[i];
        for j in 0..n {
            let x2 = grid.coords()[j];
            let dx = (x1 - x_tau.0, x2 - x_tau.1);
            let r = (dx.0 * dx.0 + dx.1 * dx.1).sqrt();
            let modulus = amp * cutoff(r) * p.eval(tau * r);
            let s = 0.5 * (-x1 * x_tau.1 + x2 * x_tau.0);
            raw[(i, j)] = Complex64::from_polar(modulus, omega * s);
            mass_dens[(i, j)] = modulus * modulus;
        }
    }
    let raw_mass = grid.integrate_unchecked(&mass_dens);
    if raw_mass <= 0.0 {
        return Err(Error::ZeroField);
    }
    let c_tau = (a / raw_mass).sqrt();
    raw.mapv_inplace(|v| v * c_tau);
    Ok((ComplexField2D::new(grid, raw)?, c_tau))
}

/// Plain scaled soliton u(x) = (tau sqrt(a)/||Q||_2) Q(tau x), real valued.
pub fn make_scaled_soliton(
    p: &RadialProfile,
    grid: &Grid2D,
    a: f64,
    tau: f64,
) -> Result<ComplexField2D> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {a}")));
    }
    let samples = sample_scaled(p, grid, tau, (0.0, 0.0))?;
    let scale = (a / p.a_star).sqrt();
    ComplexField2D::from_real(grid, &samples.mapv(|v| v * scale))
}

/// Smooth random complex field: a few Gaussian packets with random centers,
/// widths, amplitudes and phase tilts. Localized well inside the domain.
pub fn random_smooth_complex(
    grid: &Grid2D,
    rng: &mut impl rand::Rng,
    packets: usize,
) -> Array2<Complex64> {
    let n = grid.n();
    let l = grid.half_width();
    let mut u = Array2::<Complex64>::zeros((n, n));
    for _ in 0..packets {
        let cx = rng.gen_range(-l / 3.0..l / 3.0);
        let cy = rng.gen_range(-l / 3.0..l / 3.0);
        let width = rng.gen_range(0.5..1.5);
        let amp = rng.gen_range(0.1..1.0);
        let phase0 = rng.gen_range(0.0..std::f64::consts::TAU);
        let k1 = rng.gen_range(-2.0..2.0);
        let k2 = rng.gen_range(-2.0..2.0);
        for i in 0..n {
            let x1 = grid.coords()[i];
            for j in 0..n {
                let x2 = grid.coords()[j];
                let dx = x1 - cx;
                let dy = x2 - cy;
                let env = amp * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp();
                let phase = phase0 + k1 * x1 + k2 * x2;
                u[(i, j)] += Complex64::from_polar(env, phase);
            }
        }
    }
    u
}
