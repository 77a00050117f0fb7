//! Free energies and finite-size extraction of conformal data.
//!
//! Energies `E_N = -ln d(u)` of a sector groundstate behave as
//! `2N f_bulk + f_bdy + (2 pi sin 2u / N) A + O(1/N^2)` with `A = -c/24 + Delta`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linkstates::{RhoParity, SeamLayout};
use crate::registry::Registry;
use crate::spectra::{eigenvalues, groundstate_pattern, pattern_value, EigenSource};
use crate::transfer::Sector;

/// Absolute tolerance for free-energy integrals.
pub const QUAD_TOL: f64 = 1e-12;

/// Default probe for fits.
pub const FIT_PROBE: f64 = PI / 6.0;

/// Fits whose design matrix is worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e10;

/// Central charge of critical dense polymers.
pub const CENTRAL_CHARGE: f64 = -2.0;

/// Adaptive rule for finite integrals.
pub trait QuadratureRule: Send + Sync {
    fn integrate(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64>;
}

fn checked(name: &str, value: f64, error: f64, tol: f64) -> Result<f64> {
    if !value.is_finite() || !(error <= tol) {
        return Err(Error::Numeric(format!(
            "{name} quadrature did not converge: error estimate {error:e} > {tol:e}"
        )));
    }
    Ok(value)
}

/// Tanh-sinh substitution.
pub struct DoubleExponential;

impl QuadratureRule for DoubleExponential {
    fn integrate(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
        let out = quadrature::double_exponential::integrate(f, a, b, tol);
        checked("double-exponential", out.integral, out.error_estimate, tol)
    }
}

/// Chebyshev extrema with doubling.
pub struct ClenshawCurtis;

impl QuadratureRule for ClenshawCurtis {
    fn integrate(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
        let out = quadrature::clenshaw_curtis::integrate(f, a, b, tol);
        checked("clenshaw-curtis", out.integral, out.error_estimate, tol)
    }
}

pub fn quadrature_rules() -> Registry<dyn QuadratureRule> {
    let mut reg: Registry<dyn QuadratureRule> = Registry::new("quadrature rule");
    reg.register("double-exponential", Box::new(DoubleExponential))
        .register("clenshaw-curtis", Box::new(ClenshawCurtis));
    reg
}

fn check_u(u: f64) -> Result<()> {
    if !(0.0..FRAC_PI_2).contains(&u) {
        return Err(Error::Domain(format!("spectral parameter u = {u} outside [0, pi/2)")));
    }
    Ok(())
}

/// `F(t) = ln(1 + sin t sin 2u)`.
pub fn f_of_t(t: f64, u: f64) -> f64 {
    (t.sin() * (2.0 * u).sin()).ln_1p()
}

/// Bulk free energy per face.
pub fn bulk_free_energy(u: f64) -> Result<f64> {
    bulk_free_energy_with(&DoubleExponential, u)
}

pub fn bulk_free_energy_with(rule: &dyn QuadratureRule, u: f64) -> Result<f64> {
    check_u(u)?;
    let integral = rule.integrate(&|t| f_of_t(t, u), 0.0, FRAC_PI_2, QUAD_TOL)?;
    Ok(-integral / PI)
}

/// Boundary free energy in its four-case closed form.
pub fn boundary_free_energy(u: f64, rho_parity: RhoParity, s_odd: bool) -> Result<f64> {
    let f = bulk_free_energy(u)?;
    let edge = f_of_t(FRAC_PI_2, u);
    Ok(match (rho_parity, s_odd) {
        (RhoParity::Even, true) => -2.0 * f - edge,
        (RhoParity::Even, false) => 0.0,
        (RhoParity::Odd, true) => -4.0 * f - edge,
        (RhoParity::Odd, false) => -2.0 * f,
    })
}

/// Order-one term of `-ln` of the product form, from the Euler-Maclaurin
/// sums over the levels of `d(u)`. Odd `rho` leaves the `t = pi/2` level out.
pub fn normalized_boundary_energy(u: f64, rho_parity: RhoParity) -> Result<f64> {
    check_u(u)?;
    Ok(match rho_parity {
        RhoParity::Even => 0.0,
        RhoParity::Odd => f_of_t(FRAC_PI_2, u),
    })
}

/// `Delta_{r,s} = ((2r - s)^2 - 1) / 8` with the two seam widths realizing `r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KacData {
    pub delta: Ratio<i64>,
    pub rho_even: usize,
    pub rho_odd: usize,
}

pub fn kac_data(r: usize, s: usize) -> Result<KacData> {
    if r == 0 || s == 0 {
        return Err(Error::Domain(format!("Kac labels must be positive, got ({r}, {s})")));
    }
    let d = 2 * r as i64 - s as i64;
    Ok(KacData {
        delta: Ratio::new(d * d - 1, 8),
        rho_even: 2 * r,
        rho_odd: 2 * r - 1,
    })
}

fn ratio_f64(x: Ratio<i64>) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn ser_ratio<S: Serializer>(x: &Ratio<i64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

/// Result of a finite-size fit in one sector.
#[derive(Clone, Debug, Serialize)]
pub struct ConformalFit {
    pub u: f64,
    pub r: usize,
    pub s: usize,
    pub rho_parity: RhoParity,
    pub source: String,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(rename = "E_list")]
    pub e_list: Vec<f64>,
    pub f_bulk: f64,
    pub f_bdy: f64,
    /// Coefficient of `2 pi sin 2u / N`.
    pub amplitude: f64,
    /// Coefficient of `1/N^2`.
    pub correction: f64,
    pub c_est: f64,
    pub delta_est: f64,
    #[serde(serialize_with = "ser_ratio")]
    pub delta_exact: Ratio<i64>,
    pub residuals: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
    /// `tau / (N'/N)`, the nome exponent per unit aspect ratio.
    pub tau_per_aspect: f64,
}

impl ConformalFit {
    /// `E - 2N f_bulk - f_bdy` per size.
    pub fn subtracted(&self) -> Vec<f64> {
        self.n_list
            .iter()
            .zip(&self.e_list)
            .map(|(&n, e)| e - 2.0 * n as f64 * self.f_bulk - self.f_bdy)
            .collect()
    }

    /// Fitted finite-size term per size.
    pub fn predicted(&self) -> Vec<f64> {
        self.n_list.iter().map(|&n| self.model(n)).collect()
    }

    fn model(&self, n: usize) -> f64 {
        let n = n as f64;
        self.tau_per_aspect * 2.0 * PI / n * self.amplitude + self.correction / (n * n)
    }

    /// Rows `N, E, E - 2N f_bulk - f_bdy, predicted`.
    pub fn csv_rows(&self) -> Vec<(usize, f64, f64, f64)> {
        let sub = self.subtracted();
        let pred = self.predicted();
        (0..self.n_list.len())
            .map(|i| (self.n_list[i], self.e_list[i], sub[i], pred[i]))
            .collect()
    }
}

/// Sector labels for a fit.
#[derive(Clone, Copy, Debug)]
pub struct FitSector {
    pub r: usize,
    pub s: usize,
    pub rho_parity: RhoParity,
}

/// Least-squares fit of `-ln d(u)` over the sizes in `n_list`.
pub fn fit_conformal(sector: FitSector, n_list: &[usize], u: f64, source: &dyn EigenSource) -> Result<ConformalFit> {
    check_u(u)?;
    if n_list.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 sizes, got {}", n_list.len())));
    }
    let layouts = n_list
        .iter()
        .map(|&n| SeamLayout::from_kac(n, sector.r, sector.s, sector.rho_parity))
        .collect::<Result<Vec<_>>>()?;
    let kac = kac_data(sector.r, sector.s)?;
    let e_list = layouts
        .par_iter()
        .map(|&l| {
            let d = source.leading_eigenvalue(l, u)?;
            if !(d > 0.0) {
                return Err(Error::Numeric(format!("leading eigenvalue {d} of {l} is not positive")));
            }
            Ok(-d.ln())
        })
        .collect::<Result<Vec<_>>>()?;

    let f_bulk = bulk_free_energy(u)?;
    let f_bdy = normalized_boundary_energy(u, sector.rho_parity)?;
    let x = (2.0 * u).sin();
    let rows = n_list.len();
    let design = DMatrix::from_fn(rows, 2, |i, j| {
        let n = n_list[i] as f64;
        if j == 0 {
            2.0 * PI * x / n
        } else {
            1.0 / (n * n)
        }
    });
    let target = DVector::from_fn(rows, |i, _| e_list[i] - 2.0 * n_list[i] as f64 * f_bulk - f_bdy);

    // Columns are equilibrated before judging the conditioning.
    let norms: Vec<f64> = (0..2).map(|j| design.column(j).norm()).collect();
    if norms.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Fit(format!("design matrix has a vanishing column at u = {u}")));
    }
    let scaled = DMatrix::from_fn(rows, 2, |i, j| design[(i, j)] / norms[j]);
    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Fit(format!(
            "ill-conditioned fit: condition {condition:e}, singular values {:?}, sizes {n_list:?}",
            sv.as_slice()
        )));
    }
    let coef = svd.solve(&target, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let amplitude = coef[0] / norms[0];
    let correction = coef[1] / norms[1];

    let delta = ratio_f64(kac.delta);
    let mut fit = ConformalFit {
        u,
        r: sector.r,
        s: sector.s,
        rho_parity: sector.rho_parity,
        source: String::new(),
        n_list: n_list.to_vec(),
        e_list,
        f_bulk,
        f_bdy,
        amplitude,
        correction,
        c_est: -24.0 * (amplitude - delta),
        delta_est: amplitude + CENTRAL_CHARGE / 24.0,
        delta_exact: kac.delta,
        residuals: Vec::new(),
        residual: 0.0,
        condition,
        tau_per_aspect: x,
    };
    fit.residuals = fit
        .subtracted()
        .iter()
        .zip(fit.predicted())
        .map(|(a, b)| a - b)
        .collect();
    fit.residual = fit.residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(fit)
}

/// Fit with a named eigenvalue source.
pub fn fit_conformal_named(
    sector: FitSector,
    n_list: &[usize],
    u: f64,
    sources: &Registry<dyn EigenSource>,
    name: &str,
) -> Result<ConformalFit> {
    let mut fit = fit_conformal(sector, n_list, u, sources.get(name)?)?;
    fit.source = name.to_string();
    Ok(fit)
}

/// Sizes in `[n_min, n_max]` compatible with the sector parity.
pub fn admissible_sizes(sector: FitSector, n_min: usize, n_max: usize) -> Vec<usize> {
    (n_min.max(1)..=n_max)
        .filter(|&n| SeamLayout::from_kac(n, sector.r, sector.s, sector.rho_parity).is_ok())
        .collect()
}

/// Relative distance from the groundstate product-form value to the nearest
/// eigenvalue of the assembled `d(u)`.
pub fn groundstate_in_spectrum(layout: SeamLayout, u: f64) -> Result<f64> {
    let target = pattern_value(&groundstate_pattern(layout), u, layout.n_bulk, layout.s_is_odd());
    let d = Sector::new(layout)?.small_d(u)?;
    let eigs = eigenvalues(&d.entries)?;
    let scale = eigs.iter().map(|z| z.norm()).fold(target.abs(), f64::max);
    eigs.iter()
        .map(|z| ((z.re - target).powi(2) + z.im * z.im).sqrt() / scale)
        .reduce(f64::min)
        .ok_or_else(|| Error::Domain(format!("{layout} is empty")))
}
