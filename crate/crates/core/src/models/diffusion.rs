//! Steady 1D nutrient transport across a fluid boundary layer into a
//! consuming biofilm layer.
//!
//! The column runs from the free stream (`x = 0`, fixed concentration) through
//! the boundary layer of thickness `l_fluid` to the fluid-biofilm interface,
//! then through the biofilm of thickness `l_solid` to an impermeable
//! substratum. The fluid layer carries pure diffusion, the biofilm layer
//! diffusion with a Monod sink. Concentration and flux are continuous at the
//! interface.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodParams<F> {
    /// Maximum reaction rate [mol/(mm³·s)].
    pub k1r: F,
    /// Half-saturation concentration [mol/mm³].
    pub k2r: F,
}

impl<F: Scalar> MonodParams<F> {
    pub fn new(k1r: F, k2r: F) -> Result<Self, ModelError> {
        if !(k1r >= F::zero()) || !(k2r > F::zero()) {
            return Err(ModelError::InvalidParameters("Monod kinetics need K1R >= 0 and K2R > 0".into()));
        }
        Ok(Self { k1r, k2r })
    }
}

/// `K1R·φ/(K2R + φ)`
#[inline]
pub fn monod_rate<F: Scalar>(phi: F, params: &MonodParams<F>) -> F {
    params.k1r * (phi / (params.k2r + phi))
}

/// Volumetric sink law in the biofilm layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Kinetics<F> {
    Monod(MonodParams<F>),
    /// First-order sink `k·φ`.
    Linear { rate_constant: F },
}

impl<F: Scalar> Kinetics<F> {
    #[inline]
    pub fn rate(&self, phi: F) -> F {
        match self {
            Self::Monod(m) => monod_rate(phi, m),
            Self::Linear { rate_constant } => *rate_constant * phi,
        }
    }

    #[inline]
    pub fn d_rate(&self, phi: F) -> F {
        match self {
            Self::Monod(m) => {
                let s = m.k2r + phi;
                m.k1r * m.k2r / (s * s)
            }
            Self::Linear { rate_constant } => *rate_constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionProfile<F> {
    /// Boundary-layer thickness [mm].
    pub l_fluid: F,
    /// Biofilm thickness [mm].
    pub l_solid: F,
    /// Diffusivity in the fluid [mm²/s].
    pub d_fluid: F,
    /// Diffusivity in the biofilm [mm²/s].
    pub d_solid: F,
    /// Free-stream concentration [mol/mm³].
    pub phi_in: F,
    /// Nodes per layer, interface node shared.
    pub grid_n: usize,
}

impl<F: Scalar> DiffusionProfile<F> {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [self.l_fluid, self.l_solid, self.d_fluid, self.d_solid];
        if positive.iter().any(|v| !(*v > F::zero()) || !v.is_finite()) {
            return Err(ModelError::InvalidParameters("layer thicknesses and diffusivities must be positive".into()));
        }
        if !(self.phi_in >= F::zero()) || !self.phi_in.is_finite() {
            return Err(ModelError::InvalidParameters("inlet concentration must be non-negative".into()));
        }
        if self.grid_n < 8 {
            return Err(ModelError::InvalidParameters("grid_n must be at least 8".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxSolution<F> {
    /// Flux into the biofilm at the interface [mol/(mm²·s)], non-negative.
    pub flux: F,
    pub interface_concentration: F,
    /// Node concentrations from the free stream to the substratum.
    pub concentration: Vec<F>,
    pub newton_iterations: usize,
}

const MAX_NEWTON: usize = 50;

/// Interface flux for Monod consumption.
pub fn solve_flux<F: Scalar>(profile: &DiffusionProfile<F>, monod: &MonodParams<F>) -> Result<F, ModelError> {
    solve_profile(profile, &Kinetics::Monod(*monod)).map(|s| s.flux)
}

/// Second-order finite-difference solve with Newton iteration.
///
/// Equation rows are scaled to concentration units, and convergence requires
/// the scaled residual norm to drop below `1e-12·phi_in`.
pub fn solve_profile<F: Scalar>(profile: &DiffusionProfile<F>, kinetics: &Kinetics<F>) -> Result<FluxSolution<F>, ModelError> {
    profile.validate()?;
    let n = profile.grid_n;
    let m = n - 1;
    let total = 2 * n - 1;
    let cells = F::from_usize(n - 1).expect("grid fits scalar");
    let hf = profile.l_fluid / cells;
    let hs = profile.l_solid / cells;
    let (df, ds) = (profile.d_fluid, profile.d_solid);
    let two = F::of(2.0);
    let half = F::of(0.5);
    let iface_scale = F::one() / (df / hf + ds / hs);
    let solid_scale = hs * hs / (two * ds);

    let residual = |phi: &[F], res: &mut [F], lower: &mut [F], diag: &mut [F], upper: &mut [F]| {
        res[0] = phi[0] - profile.phi_in;
        diag[0] = F::one();
        upper[0] = F::zero();
        for i in 1..m {
            res[i] = (phi[i - 1] - two * phi[i] + phi[i + 1]) * half;
            lower[i] = half;
            diag[i] = -F::one();
            upper[i] = half;
        }
        let r = kinetics.rate(phi[m]);
        let dr = kinetics.d_rate(phi[m]);
        res[m] = (df * (phi[m - 1] - phi[m]) / hf + ds * (phi[m + 1] - phi[m]) / hs - half * hs * r) * iface_scale;
        lower[m] = df / hf * iface_scale;
        diag[m] = -F::one() - half * hs * dr * iface_scale;
        upper[m] = ds / hs * iface_scale;
        for j in m + 1..total - 1 {
            res[j] = (phi[j - 1] - two * phi[j] + phi[j + 1]) * half - solid_scale * kinetics.rate(phi[j]);
            lower[j] = half;
            diag[j] = -F::one() - solid_scale * kinetics.d_rate(phi[j]);
            upper[j] = half;
        }
        let last = total - 1;
        res[last] = phi[last - 1] - phi[last] - solid_scale * kinetics.rate(phi[last]);
        lower[last] = F::one();
        diag[last] = -F::one() - solid_scale * kinetics.d_rate(phi[last]);
    };

    let mut phi = vec![profile.phi_in; total];
    let mut res = vec![F::zero(); total];
    let (mut lower, mut diag, mut upper) = (vec![F::zero(); total], vec![F::zero(); total], vec![F::zero(); total]);
    let tol = F::of(1e-12) * profile.phi_in;
    let mut iterations = 0;
    loop {
        residual(&phi, &mut res, &mut lower, &mut diag, &mut upper);
        let norm = crate::linalg::norm2(&res);
        if norm <= tol {
            break;
        }
        if iterations == MAX_NEWTON || !norm.is_finite() {
            return Err(ModelError::NewtonDivergence {
                iterations,
                residual: norm.to_f64_lossy(),
            });
        }
        let step = solve_tridiagonal(&lower, &diag, &upper, &res)
            .ok_or_else(|| ModelError::LinearSolve("tridiagonal Newton system is singular".into()))?;
        for (p, s) in phi.iter_mut().zip(&step) {
            // concentrations are non-negative; project overshoots back
            *p = (*p - *s).max(F::zero());
        }
        iterations += 1;
    }

    let interface_concentration = phi[m];
    let flux = (df * (profile.phi_in - interface_concentration) / profile.l_fluid).max(F::zero());
    Ok(FluxSolution {
        flux,
        interface_concentration,
        concentration: phi,
        newton_iterations: iterations,
    })
}

/// Thomas algorithm for `lower[i]·x[i-1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]`.
fn solve_tridiagonal<F: Scalar>(lower: &[F], diag: &[F], upper: &[F], rhs: &[F]) -> Option<Vec<F>> {
    let n = diag.len();
    let mut c = vec![F::zero(); n];
    let mut d = vec![F::zero(); n];
    let mut beta = diag[0];
    if beta == F::zero() {
        return None;
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == F::zero() || !beta.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / beta } else { F::zero() };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - c[i] * d[i + 1];
    }
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_profile(grid_n: usize) -> DiffusionProfile<f64> {
        DiffusionProfile {
            l_fluid: 0.05,
            l_solid: 0.04,
            d_fluid: 2.5e-3,
            d_solid: 2.5e-3,
            phi_in: 2.5e-11,
            grid_n,
        }
    }

    fn monod() -> MonodParams<f64> {
        MonodParams::new(3.0e-11, 3.0e-12).unwrap()
    }

    /// Closed-form flux for a first-order sink: cosh profile in the biofilm,
    /// linear profile in the boundary layer.
    fn linear_flux_oracle(p: &DiffusionProfile<f64>, k: f64) -> f64 {
        let lam = (k / p.d_solid).sqrt();
        let a = p.d_solid * lam * (lam * p.l_solid).tanh();
        let g = p.d_fluid / p.l_fluid;
        g * a / (g + a) * p.phi_in
    }

    #[test]
    fn monod_examples() {
        let m = monod();
        assert_eq!(monod_rate(0.0, &m), 0.0);
        assert_eq!(monod_rate(m.k2r, &m), m.k1r / 2.0);
        let r = monod_rate(2.5e-11, &m);
        assert!((r - 3.0e-11 * 2.5e-11 / 2.8e-11).abs() < 1e-24);
        assert!((r - 2.6786e-11).abs() < 1e-15);
        assert!(MonodParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn monod_monotone_and_bounded() {
        let m = monod();
        let mut last = 0.0;
        for i in 1..200 {
            let v = monod_rate(i as f64 * 1e-12, &m);
            assert!(v > last && v < m.k1r);
            last = v;
        }
    }

    #[test]
    fn no_consumption_no_flux() {
        let m = MonodParams::new(0.0, 3e-12).unwrap();
        let sol = solve_profile(&reference_profile(32), &Kinetics::Monod(m)).unwrap();
        assert_eq!(sol.flux, 0.0);
        assert!(sol.concentration.iter().all(|c| (*c - 2.5e-11).abs() < 1e-24));
    }

    #[test]
    fn linear_sink_matches_cosh_profile() {
        let p = reference_profile(256);
        let k = 10.0;
        let flux = solve_profile(&p, &Kinetics::Linear { rate_constant: k }).unwrap().flux;
        let exact = linear_flux_oracle(&p, k);
        assert!(((flux - exact) / exact).abs() < 1e-3, "{flux} vs {exact}");
    }

    #[test]
    fn flux_increases_with_inlet_concentration() {
        let base = reference_profile(64);
        let f1 = solve_flux(&base, &monod()).unwrap();
        let f2 = solve_flux(&DiffusionProfile { phi_in: 2.0 * base.phi_in, ..base }, &monod()).unwrap();
        assert!(f1 > 0.0 && f2 > f1);
    }

    #[test]
    fn grid_refinement_is_second_order() {
        let reference = solve_flux(&reference_profile(2048), &monod()).unwrap();
        let errs: Vec<f64> = [32, 64, 128, 256]
            .iter()
            .map(|&n| (solve_flux(&reference_profile(n), &monod()).unwrap() - reference).abs())
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..=2.2).contains(&order), "observed order {order} from {errs:?}");
        }
    }

    #[test]
    fn flux_matches_total_consumption() {
        let p = reference_profile(128);
        let sol = solve_profile(&p, &Kinetics::Monod(monod())).unwrap();
        let m = p.grid_n - 1;
        let hs = p.l_solid / m as f64;
        let solid = &sol.concentration[m..];
        let rates: Vec<f64> = solid.iter().map(|c| monod_rate(*c, &monod())).collect();
        let integral = hs * (rates.iter().sum::<f64>() - 0.5 * (rates[0] + rates[rates.len() - 1]));
        assert!(((integral - sol.flux) / sol.flux).abs() < 1e-9);
    }

    #[test]
    fn invalid_profile_rejected() {
        let bad = DiffusionProfile { grid_n: 4, ..reference_profile(8) };
        assert!(solve_flux(&bad, &monod()).is_err());
        let bad = DiffusionProfile { d_solid: 0.0, ..reference_profile(8) };
        assert!(solve_flux(&bad, &monod()).is_err());
    }

    #[test]
    fn zero_inlet_gives_zero_flux() {
        let p = DiffusionProfile { phi_in: 0.0, ..reference_profile(16) };
        assert_eq!(solve_flux(&p, &monod()).unwrap(), 0.0);
    }
}
