use serde::{Deserialize, Serialize};

use super::LwrError;

/// Slack allowed when checking that a density lies in `[0, 1]`.
pub const DENSITY_TOL: f64 = 1e-12;

/// Piecewise-linear (triangular) fundamental diagram with peak `f_max` at the
/// critical density `sigma`; densities are normalized so that jam density
/// is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundamentalDiagram {
    pub sigma: f64,
    pub f_max: f64,
}

impl FundamentalDiagram {
    pub fn new(sigma: f64, f_max: f64) -> Result<Self, LwrError> {
        let fd = Self { sigma, f_max };
        fd.validate()?;
        Ok(fd)
    }

    pub fn validate(&self) -> Result<(), LwrError> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) || !(self.f_max > 0.0) || !self.f_max.is_finite() {
            return Err(LwrError::InvalidDiagram { sigma: self.sigma, f_max: self.f_max });
        }
        Ok(())
    }

    /// `f(rho)`, unchecked.
    #[inline]
    pub fn f(&self, rho: f64) -> f64 {
        if rho <= self.sigma {
            self.f_max / self.sigma * rho
        } else {
            self.f_max / (self.sigma - 1.0) * (rho - 1.0)
        }
    }

    /// Godunov flux between a left state `rm` and a right state `rp`,
    /// unchecked.
    #[inline]
    pub fn godunov(&self, rm: f64, rp: f64) -> f64 {
        if rm <= rp {
            self.f(rm).min(self.f(rp))
        } else if rm < self.sigma {
            self.f(rm)
        } else if rp > self.sigma {
            self.f(rp)
        } else {
            self.f(self.sigma)
        }
    }

    /// Upstream demand `f(min(rho, sigma))`.
    #[inline]
    pub fn demand(&self, rho: f64) -> f64 {
        self.f(rho.min(self.sigma))
    }

    /// Downstream supply `f(max(rho, sigma))`.
    #[inline]
    pub fn supply(&self, rho: f64) -> f64 {
        self.f(rho.max(self.sigma))
    }

    /// Largest characteristic speed `max(f_max / sigma, f_max / (1 - sigma))`.
    pub fn max_speed(&self) -> f64 {
        (self.f_max / self.sigma).max(self.f_max / (1.0 - self.sigma))
    }
}

/// Flux across an interface whose two sides may follow different diagrams.
#[inline]
pub(crate) fn interface_flux(up: &FundamentalDiagram, down: &FundamentalDiagram, rm: f64, rp: f64) -> f64 {
    if up == down {
        up.godunov(rm, rp)
    } else {
        up.demand(rm).min(down.supply(rp))
    }
}

fn check_density(rho: f64) -> Result<(), LwrError> {
    if rho.is_nan() || rho < -DENSITY_TOL || rho > 1.0 + DENSITY_TOL {
        return Err(LwrError::DensityOutOfRange(rho));
    }
    Ok(())
}

pub fn flux(rho: f64, fd: &FundamentalDiagram) -> Result<f64, LwrError> {
    check_density(rho)?;
    Ok(fd.f(rho))
}

pub fn godunov_flux(rho_minus: f64, rho_plus: f64, fd: &FundamentalDiagram) -> Result<f64, LwrError> {
    check_density(rho_minus)?;
    check_density(rho_plus)?;
    Ok(fd.godunov(rho_minus, rho_plus))
}

/// `dt = safety * dx / max_speed`.
pub fn cfl_dt(fd: &FundamentalDiagram, dx: f64, safety: f64) -> Result<f64, LwrError> {
    fd.validate()?;
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(LwrError::InvalidSafety(safety));
    }
    if !(dx > 0.0) || !dx.is_finite() {
        return Err(LwrError::InvalidCellWidth(dx));
    }
    Ok(safety * dx / fd.max_speed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base_fd() -> FundamentalDiagram {
        FundamentalDiagram::new(0.3, 0.25).unwrap()
    }

    #[test]
    fn flux_values() {
        let fd = base_fd();
        assert_eq!(flux(0.3, &fd).unwrap(), 0.25);
        assert_eq!(flux(0.0, &fd).unwrap(), 0.0);
        assert_eq!(flux(1.0, &fd).unwrap(), 0.0);
        assert!((flux(0.5, &fd).unwrap() - 0.25 / 0.7 * 0.5).abs() < 1e-15);
        assert!((flux(0.5, &fd).unwrap() - 0.178_571_428_571_428_6).abs() < 1e-15);
        assert!(flux(1.1, &fd).is_err());
        assert!(flux(-0.01, &fd).is_err());
        assert!(flux(1.0 + 1e-13, &fd).is_ok());
    }

    #[test]
    fn godunov_cases() {
        let fd = base_fd();
        assert_eq!(godunov_flux(0.5, 0.1, &fd).unwrap(), 0.25);
        assert_eq!(godunov_flux(0.0, 0.8, &fd).unwrap(), 0.0);
        let g = godunov_flux(0.5, 0.8, &fd).unwrap();
        assert!((g - 0.25 / 0.7 * 0.2).abs() < 1e-15);
        assert!((g - 0.071_428_571_428_571_4).abs() < 1e-15);
        // free flow to the left of sigma, congested to the right
        assert_eq!(godunov_flux(0.2, 0.1, &fd).unwrap(), fd.f(0.2));
        assert_eq!(godunov_flux(0.9, 0.5, &fd).unwrap(), fd.f(0.5));
        assert!(godunov_flux(0.5, 2.0, &fd).is_err());
    }

    #[test]
    fn invalid_diagrams() {
        assert!(FundamentalDiagram::new(0.0, 0.25).is_err());
        assert!(FundamentalDiagram::new(1.0, 0.25).is_err());
        assert!(FundamentalDiagram::new(0.3, 0.0).is_err());
    }

    #[test]
    fn cfl_examples() {
        let dt = cfl_dt(&base_fd(), 0.1, 0.9).unwrap();
        assert!((dt - 0.108).abs() < 1e-15);
        let dt = cfl_dt(&FundamentalDiagram::new(0.5, 0.25).unwrap(), 0.1, 1.0).unwrap();
        assert!((dt - 0.2).abs() < 1e-15);
        assert!(matches!(cfl_dt(&base_fd(), 0.1, 0.0), Err(LwrError::InvalidSafety(_))));
        assert!(cfl_dt(&base_fd(), 0.1, 1.5).is_err());
        assert!(cfl_dt(&base_fd(), 0.0, 0.5).is_err());
    }

    #[test]
    fn min_of_demand_and_supply_matches_four_cases() {
        let fd = base_fd();
        for i in 0..=50 {
            for k in 0..=50 {
                let (a, b) = (i as f64 / 50.0, k as f64 / 50.0);
                assert_eq!(fd.godunov(a, b), fd.demand(a).min(fd.supply(b)));
            }
        }
    }

    proptest! {
        #[test]
        fn consistency_and_bounds(sigma in 0.05f64..0.95, f_max in 0.05f64..2.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let fd = FundamentalDiagram::new(sigma, f_max).unwrap();
            prop_assert_eq!(fd.godunov(a, a), fd.f(a));
            let g = fd.godunov(a, b);
            prop_assert!(g >= 0.0 && g <= f_max * (1.0 + 1e-15));
        }
    }

    #[test]
    fn monotonicity_on_grid() {
        for fd in [base_fd(), FundamentalDiagram::new(0.5, 0.25).unwrap(), FundamentalDiagram::new(0.15, 0.4).unwrap()] {
            let n = 40;
            let pts: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            for &a in &pts {
                for w in pts.windows(2) {
                    // nondecreasing in the left state, nonincreasing in the right state
                    assert!(fd.godunov(w[1], a) >= fd.godunov(w[0], a) - 1e-15);
                    assert!(fd.godunov(a, w[1]) <= fd.godunov(a, w[0]) + 1e-15);
                }
            }
        }
    }
}
