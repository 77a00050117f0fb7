//! Double-row transfer matrices, their normalization, the inversion identity
//! and the Hamiltonian limit.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linkstates::{apply_generator_raw, build_basis, LinkBasis, LinkState, SeamLayout};
use crate::tangle::{chebyshev_u, contract_double_row, OperatorMatrix};

/// Default boundary field.
pub const XI_DEFAULT: f64 = FRAC_PI_4;

/// Crossing parameter of critical dense polymers.
pub const LAMBDA: f64 = FRAC_PI_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferParams {
    pub layout: SeamLayout,
    pub u: f64,
    pub xi: f64,
}

impl TransferParams {
    pub fn new(layout: SeamLayout, u: f64) -> Self {
        TransferParams {
            layout,
            u,
            xi: XI_DEFAULT,
        }
    }

    pub fn at(self, u: f64) -> Self {
        TransferParams { u, ..self }
    }
}

/// A sector together with its basis, reused across many spectral parameters.
#[derive(Clone, Debug)]
pub struct Sector {
    basis: LinkBasis,
    xi: f64,
}

impl Sector {
    pub fn new(layout: SeamLayout) -> Result<Self> {
        Ok(Sector {
            basis: build_basis(layout)?,
            xi: XI_DEFAULT,
        })
    }

    pub fn with_xi(layout: SeamLayout, xi: f64) -> Result<Self> {
        Ok(Sector {
            basis: build_basis(layout)?,
            xi,
        })
    }

    pub fn layout(&self) -> SeamLayout {
        self.basis.layout()
    }

    pub fn basis(&self) -> &LinkBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn big_d(&self, u: f64) -> Result<OperatorMatrix> {
        contract_double_row(&self.basis, u, self.xi)
    }

    pub fn small_d(&self, u: f64) -> Result<OperatorMatrix> {
        let big = self.big_d(u)?;
        normalize_d(
            big,
            TransferParams {
                layout: self.layout(),
                u,
                xi: self.xi,
            },
        )
    }
}

/// Unnormalized `D(u)`.
pub fn build_d(params: TransferParams) -> Result<OperatorMatrix> {
    let basis = build_basis(params.layout)?;
    contract_double_row(&basis, params.u, params.xi)
}

/// Scalar with `d(u) = scale * D(u)`.
pub fn normalization(layout: SeamLayout, u: f64) -> Result<f64> {
    let rho = layout.rho as i32;
    let power = if layout.rho % 2 == 0 { rho - 2 } else { rho - 1 };
    let denom = (2.0 * u).sin() * (2.0 * u).cos().powi(power);
    if denom.abs() < 1e-12 {
        return Err(Error::SingularNormalization(format!(
            "{layout}: sin 2u cos^{power} 2u vanishes at u = {u}"
        )));
    }
    Ok(2f64.powi(rho - 1) / denom)
}

/// Normalized `d(u)`.
pub fn normalize_d(big_d: OperatorMatrix, params: TransferParams) -> Result<OperatorMatrix> {
    if big_d.normalized {
        return Err(Error::Domain("matrix is already normalized".into()));
    }
    let scale = normalization(params.layout, params.u)?;
    Ok(OperatorMatrix {
        normalized: true,
        entries: big_d.entries * scale,
        ..big_d
    })
}

/// The factorized product equal to `cos^{2N} u + sin^{2N} u` (rho even) or
/// `(cos^{2N} u - sin^{2N} u)/(cos^2 u - sin^2 u)` (rho odd).
pub fn inversion_factor(layout: SeamLayout, u: f64) -> f64 {
    let n = layout.n_bulk;
    let x = (2.0 * u).sin().powi(2);
    let nf = n as f64;
    let odd_angles = |m: usize| -> f64 {
        (1..=m)
            .map(|j| 1.0 - ((2 * j - 1) as f64 * std::f64::consts::PI / (2.0 * nf)).sin().powi(2) * x)
            .product()
    };
    let int_angles = |m: usize| -> f64 {
        (1..=m)
            .map(|j| 1.0 - (j as f64 * std::f64::consts::PI / nf).sin().powi(2) * x)
            .product()
    };
    if layout.rho % 2 == 0 {
        if n % 2 == 1 {
            int_angles((n - 1) / 2)
        } else {
            odd_angles(n / 2)
        }
    } else if n % 2 == 0 {
        int_angles(n / 2 - 1)
    } else {
        odd_angles((n - 1) / 2)
    }
}

/// Right side of `d(u) d(u + lambda) = RHS * I`.
pub fn inversion_rhs(params: TransferParams) -> f64 {
    inversion_factor(params.layout, params.u).powi(2)
}

/// `eta^(rho)(u, xi)` at `lambda = pi/2`.
pub fn eta_dense(rho: usize, u: f64, xi: f64) -> f64 {
    (1..rho)
        .map(|j| (u + xi + (j - 1) as f64 * LAMBDA).sin() * (u - xi - (j + 1) as f64 * LAMBDA).sin())
        .product()
}

/// Scalar of the unnormalized identity `D(u) D(u + lambda) = scalar * I`.
pub fn unnormalized_inversion_scalar(layout: SeamLayout, u: f64, xi: f64) -> f64 {
    let n = layout.n_bulk as i32;
    let rho = layout.rho;
    let t = (2.0 * u).tan();
    let inner = u.cos().powi(2 * n) * eta_dense(rho, u, xi) - u.sin().powi(2 * n) * eta_dense(rho, u + LAMBDA, xi);
    -t * t * inner * inner
}

/// Deviations reported by [`functional_checks`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FunctionalReport {
    /// `max |d(u) d(u + pi/2) - RHS I| / |RHS|`.
    pub inversion: f64,
    /// `max |D(lambda - u) - D(u)|`.
    pub crossing: f64,
    /// `max |[D(u), D(v)]|`.
    pub commute: f64,
    /// `max |d(1e-4) - I|`.
    pub init: f64,
    /// `max |D(u) D(u + pi/2) - scalar I| / |scalar|` for the unnormalized identity.
    pub unnormalized: f64,
}

impl FunctionalReport {
    fn absorb(&mut self, other: &FunctionalReport) {
        self.inversion = self.inversion.max(other.inversion);
        self.crossing = self.crossing.max(other.crossing);
        self.commute = self.commute.max(other.commute);
        self.init = self.init.max(other.init);
        self.unnormalized = self.unnormalized.max(other.unnormalized);
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Pairing used for the commutation check at `u`.
pub fn commute_partner(u: f64) -> f64 {
    0.5 * u + 0.29
}

/// Evaluates the inversion, crossing, commutation and initial-condition
/// checks of a sector at each `u`.
pub fn functional_checks(sector: &Sector, us: &[f64]) -> Result<FunctionalReport> {
    let layout = sector.layout();
    let id = DMatrix::<f64>::identity(sector.dim(), sector.dim());
    let mut report = FunctionalReport::default();
    let init = sector.small_d(1e-4)?;
    report.init = max_abs(&(&init.entries - &id));
    for &u in us {
        let mut r = FunctionalReport::default();
        let du = sector.big_d(u)?;
        let du2 = sector.big_d(u + LAMBDA)?;
        let params = TransferParams {
            layout,
            u,
            xi: sector.xi(),
        };
        let dn = normalize_d(du.clone(), params)?;
        let dn2 = normalize_d(du2.clone(), params.at(u + LAMBDA))?;
        let rhs = inversion_rhs(params);
        r.inversion = max_abs(&(&dn.entries * &dn2.entries - &id * rhs)) / rhs.abs();

        let scalar = unnormalized_inversion_scalar(layout, u, sector.xi());
        r.unnormalized = max_abs(&(&du.entries * &du2.entries - &id * scalar)) / scalar.abs();

        let cross = sector.big_d(LAMBDA - u)?;
        r.crossing = max_abs(&(&cross.entries - &du.entries));

        let dv = sector.big_d(commute_partner(u))?;
        r.commute = max_abs(&(&du.entries * &dv.entries - &dv.entries * &du.entries));
        report.absorb(&r);
    }
    Ok(report)
}

/// The word `e_start e_{start+1} ... e_{start+k}` applied to one state, with
/// intermediate states left unrestricted. Returns `None` if a loop forms.
fn apply_ascending_word(state: &LinkState, start: usize, k: usize) -> Option<LinkState> {
    let mut p = state.raw().to_vec();
    for j in (start..=start + k).rev() {
        if apply_generator_raw(&mut p, j - 1) > 0 {
            return None;
        }
    }
    Some(LinkState::from_zero_based_unchecked(p))
}

/// The boundary projector `P_N^(rho)` on the sector basis at `beta = 0`.
pub fn boundary_projector(basis: &LinkBasis) -> DMatrix<f64> {
    let layout = basis.layout();
    let rho = layout.rho;
    let dim = basis.len();
    let mut m = DMatrix::zeros(dim, dim);
    if rho < 2 {
        return m;
    }
    for k in 0..=rho - 2 {
        let coeff = chebyshev_u((rho - k - 2) as i64, 0.0);
        if coeff == 0.0 {
            continue;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (c, st) in basis.states().iter().enumerate() {
            if let Some(out) = apply_ascending_word(st, layout.n_bulk, k) {
                if let Some(r) = basis.index_of(&out) {
                    m[(r, c)] += sign * coeff;
                }
            }
        }
    }
    m
}

/// `H = -sum_{j<N} e_j + (-1)^rho P_N^(rho) / (s(xi) s(xi_rho))`.
pub fn hamiltonian(sector: &Sector) -> Result<OperatorMatrix> {
    let basis = sector.basis();
    let layout = basis.layout();
    let xi = sector.xi();
    let sign = if layout.rho % 2 == 0 { 1.0 } else { -1.0 };
    let coupling = sign * xi.sin() * (xi + layout.rho as f64 * LAMBDA).sin();
    if coupling.abs() < 1e-12 {
        return Err(Error::SingularNormalization(format!(
            "s(xi) s(xi_rho) vanishes at xi = {xi}"
        )));
    }
    let dim = basis.len();
    let mut h = boundary_projector(basis) / coupling;
    for j in 1..layout.n_bulk {
        for (c, st) in basis.states().iter().enumerate() {
            let mut p = st.raw().to_vec();
            if apply_generator_raw(&mut p, j - 1) > 0 {
                continue;
            }
            if let Some(r) = basis.index_of(&LinkState::from_zero_based_unchecked(p)) {
                h[(r, c)] -= 1.0;
            }
        }
    }
    debug_assert_eq!(h.nrows(), dim);
    Ok(OperatorMatrix {
        layout,
        u: 0.0,
        xi,
        lambda: LAMBDA,
        normalized: false,
        entries: h,
    })
}

/// `max |[H, D(u)]|`.
pub fn hamiltonian_commutator(sector: &Sector, u: f64) -> Result<f64> {
    let h = hamiltonian(sector)?.entries;
    let d = sector.big_d(u)?.entries;
    Ok(max_abs(&(&h * &d - &d * &h)))
}

/// Seam width `floor(r p' / p)` proposed for `lambda = pi (p' - p) / p'`.
pub fn conjectured_rho(r: usize, p: usize, p_prime: usize) -> Result<usize> {
    if p == 0 || p_prime <= p {
        return Err(Error::Domain(format!("need 0 < p < p', got p = {p}, p' = {p_prime}")));
    }
    Ok(r * p_prime / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sector(n: usize, rho: usize, s: usize) -> Sector {
        Sector::new(SeamLayout::new(n, rho, s).unwrap()).unwrap()
    }

    #[test]
    fn normalization_branches() {
        let l1 = SeamLayout::new(2, 1, 1).unwrap();
        let u = 0.3;
        assert!((normalization(l1, u).unwrap() - 1.0 / (2.0 * u).sin()).abs() < 1e-14);
        let l2 = SeamLayout::new(2, 2, 2).unwrap();
        assert!((normalization(l2, u).unwrap() - 2.0 / (2.0 * u).sin()).abs() < 1e-14);
        let l4 = SeamLayout::new(2, 4, 2).unwrap();
        assert!(matches!(
            normalization(l4, FRAC_PI_4),
            Err(Error::SingularNormalization(_))
        ));
    }

    #[test]
    fn inversion_rhs_examples() {
        for (n, rho, s) in [(2, 1, 1), (3, 2, 1), (4, 2, 2), (5, 1, 2)] {
            let l = SeamLayout::new(n, rho, s).unwrap();
            assert!((inversion_rhs(TransferParams::new(l, 0.0)) - 1.0).abs() < 1e-15);
        }
        let l = SeamLayout::new(4, 1, 1).unwrap();
        assert!((inversion_factor(l, FRAC_PI_4) - 0.5).abs() < 1e-15);
        assert!((inversion_rhs(TransferParams::new(l, FRAC_PI_4)) - 0.25).abs() < 1e-15);
        let l = SeamLayout::new(2, 2, 2).unwrap();
        assert!((inversion_rhs(TransferParams::new(l, FRAC_PI_4)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn factorization_matches_direct_forms() {
        for n in 1..=12usize {
            for (rho, s) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                let Ok(l) = SeamLayout::new(n, rho, s) else { continue };
                for u in [0.1f64, 0.5, 0.7, 1.3] {
                    let (c, sn) = (u.cos().powi(2 * n as i32), u.sin().powi(2 * n as i32));
                    let direct = if rho % 2 == 0 {
                        c + sn
                    } else {
                        (c - sn) / (2.0 * u).cos()
                    };
                    assert!((inversion_factor(l, u) - direct).abs() < 1e-12, "{l} u = {u}");
                }
            }
        }
    }

    #[test]
    fn eta_at_special_field() {
        for rho in 1..=5 {
            for u in [0.1f64, 0.4, 1.0] {
                let expect = (0.5 * (2.0 * u).cos()).powi(rho as i32 - 1);
                assert!((eta_dense(rho, u, FRAC_PI_4) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn functional_examples() {
        let r = functional_checks(&sector(6, 1, 1), &[std::f64::consts::PI / 6.0]).unwrap();
        assert!(
            r.inversion <= 1e-10 && r.crossing <= 1e-10 && r.commute <= 1e-10 && r.unnormalized <= 1e-10,
            "{r:?}"
        );
        assert!(r.init <= 1e-3);
        let r = functional_checks(&sector(5, 2, 1), &[std::f64::consts::PI / 5.0]).unwrap();
        assert!(
            r.inversion <= 1e-10 && r.crossing <= 1e-10 && r.commute <= 1e-10,
            "{r:?}"
        );
        let r = functional_checks(&sector(2, 2, 2), &[0.37]).unwrap();
        assert!(r.inversion <= 1e-10 && r.unnormalized <= 1e-10, "{r:?}");
    }

    #[test]
    fn hamiltonian_trivial_sector() {
        let h = hamiltonian(&sector(2, 1, 1)).unwrap();
        assert_eq!(h.entries[(0, 0)], 0.0);
    }

    #[test]
    fn hamiltonian_is_log_derivative_of_d() {
        for (n, rho, s) in [
            (4, 1, 1),
            (5, 2, 1),
            (4, 3, 1),
            (4, 2, 2),
            (3, 3, 2),
            (5, 4, 1),
            (4, 3, 3),
        ] {
            let sec = sector(n, rho, s);
            let h = hamiltonian(&sec).unwrap().entries;
            let step = 1e-5;
            let d = sec.small_d(step).unwrap().entries;
            let fd = (d - DMatrix::identity(sec.dim(), sec.dim())) / (-2.0 * step);
            assert!(max_abs(&(&fd - &h)) < 1e-3, "({n},{rho},{s}): {}", max_abs(&(&fd - &h)));
            let du = sec.big_d(0.41).unwrap().entries;
            assert!(max_abs(&(&h * &du - &du * &h)) < 1e-9);
        }
    }

    #[test]
    fn hamiltonian_commutes_away_from_special_field() {
        for (n, rho, s) in [(5, 2, 1), (4, 3, 1), (5, 4, 1), (5, 5, 2)] {
            let sec = Sector::with_xi(SeamLayout::new(n, rho, s).unwrap(), 0.6).unwrap();
            let h = hamiltonian(&sec).unwrap().entries;
            let du = sec.big_d(0.37).unwrap().entries;
            assert!(max_abs(&(&h * &du - &du * &h)) < 1e-12, "({n},{rho},{s})");
        }
    }

    #[test]
    fn seam_width_formula() {
        assert_eq!(conjectured_rho(3, 1, 2).unwrap(), 6);
        assert_eq!(conjectured_rho(2, 2, 5).unwrap(), 5);
        assert!(conjectured_rho(1, 3, 2).is_err());
    }
}
