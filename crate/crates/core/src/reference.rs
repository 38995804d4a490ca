//! Closed-form comparison metrics: the Wasserstein-1 distance on a line
//! segment and the mass-normalized discrete L1 distance.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::lwr::DensityField;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("intervals differ: [{0}, {1}] vs [{2}, {3}]")]
    IntervalMismatch(f64, f64, f64, f64),
    #[error("invalid interval [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error("density value {0} is negative or not finite")]
    BadDensity(f64),
    #[error("need at least one quadrature cell")]
    NoCells,
    #[error("fields have {0} and {1} cells")]
    LengthMismatch(usize, usize),
    #[error("total mass must be positive, got {0}")]
    ZeroMass(f64),
}

#[derive(Clone)]
pub enum Profile {
    /// Pointwise density.
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Piecewise constant on a uniform partition of the interval.
    Cells(Vec<f64>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Function(_) => f.write_str("Function(..)"),
            Profile::Cells(v) => f.debug_tuple("Cells").field(v).finish(),
        }
    }
}

/// A nonnegative density on `[a, b]`.
#[derive(Debug, Clone)]
pub struct LineDensity {
    a: f64,
    b: f64,
    profile: Profile,
}

impl LineDensity {
    pub fn from_fn(a: f64, b: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self, ReferenceError> {
        check_interval(a, b)?;
        Ok(Self { a, b, profile: Profile::Function(Arc::new(f)) })
    }

    pub fn from_cells(a: f64, b: f64, values: Vec<f64>) -> Result<Self, ReferenceError> {
        check_interval(a, b)?;
        if values.is_empty() {
            return Err(ReferenceError::NoCells);
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(ReferenceError::BadDensity(v));
        }
        Ok(Self { a, b, profile: Profile::Cells(values) })
    }

    /// Uniform density of total mass `mass` on `[center - width/2, center + width/2]`,
    /// zero elsewhere. Stands in for a point mass.
    pub fn bump(a: f64, b: f64, center: f64, width: f64, mass: f64) -> Result<Self, ReferenceError> {
        let (lo, hi) = (center - width / 2.0, center + width / 2.0);
        if !(width > 0.0 && lo >= a && hi <= b) {
            return Err(ReferenceError::BadInterval(lo, hi));
        }
        let height = mass / width;
        Self::from_fn(a, b, move |x| if (lo..hi).contains(&x) { height } else { 0.0 })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// Cumulative mass at the `n + 1` edges of a uniform `n`-cell partition.
    fn cumulative(&self, n: usize) -> Result<Vec<f64>, ReferenceError> {
        let h = (self.b - self.a) / n as f64;
        let mut out = Vec::with_capacity(n + 1);
        out.push(0.0);
        match &self.profile {
            Profile::Function(f) => {
                let mut acc = 0.0;
                for i in 0..n {
                    let v = f(self.a + (i as f64 + 0.5) * h);
                    if !v.is_finite() || v < 0.0 {
                        return Err(ReferenceError::BadDensity(v));
                    }
                    acc += v * h;
                    out.push(acc);
                }
            }
            Profile::Cells(values) => {
                let m = values.len();
                let w = (self.b - self.a) / m as f64;
                let mut prefix = Vec::with_capacity(m + 1);
                prefix.push(0.0);
                for v in values {
                    prefix.push(prefix.last().unwrap() + v * w);
                }
                for i in 1..=n {
                    // position in units of the profile cells
                    let t = i as f64 * m as f64 / n as f64;
                    let c = (t.floor() as usize).min(m - 1);
                    out.push(prefix[c] + values[c] * (t - c as f64) * w);
                }
            }
        }
        Ok(out)
    }

    /// Total mass using `n` quadrature cells (exact for piecewise-constant
    /// profiles).
    pub fn mass(&self, n: usize) -> Result<f64, ReferenceError> {
        if n == 0 {
            return Err(ReferenceError::NoCells);
        }
        Ok(*self.cumulative(n)?.last().unwrap())
    }
}

fn check_interval(a: f64, b: f64) -> Result<(), ReferenceError> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(ReferenceError::BadInterval(a, b))
    }
}

/// `W1 = integral of |F_s - F_d|` over the interval, with both cumulative
/// functions evaluated at the midpoints of `quadrature_cells` uniform cells.
///
/// The masses must agree to `1e-9` relative, widened for pointwise
/// profiles by the change in the computed mass when halving the cell count.
pub fn w1_line(rho_s: &LineDensity, rho_d: &LineDensity, quadrature_cells: usize) -> Result<f64, ReferenceError> {
    let n = quadrature_cells;
    if n == 0 {
        return Err(ReferenceError::NoCells);
    }
    if rho_s.interval() != rho_d.interval() {
        return Err(ReferenceError::IntervalMismatch(rho_s.a, rho_s.b, rho_d.a, rho_d.b));
    }
    let fs = rho_s.cumulative(n)?;
    let fd = rho_d.cumulative(n)?;
    let (ms, md) = (fs[n], fd[n]);
    let slack = quadrature_slack(rho_s, ms, n)? + quadrature_slack(rho_d, md, n)?;
    if (ms - md).abs() > 1e-9 * ms.max(md) + slack {
        return Err(ReferenceError::MassMismatch(ms, md));
    }
    let h = (rho_s.b - rho_s.a) / n as f64;
    let sum: f64 = (0..n).map(|i| (0.5 * (fs[i] + fs[i + 1]) - 0.5 * (fd[i] + fd[i + 1])).abs()).sum();
    Ok(sum * h)
}

fn quadrature_slack(rho: &LineDensity, mass: f64, n: usize) -> Result<f64, ReferenceError> {
    match rho.profile {
        Profile::Cells(_) => Ok(0.0),
        Profile::Function(_) if n < 2 => Ok(mass.abs()),
        Profile::Function(_) => Ok((mass - rho.mass(n / 2)?).abs()),
    }
}

/// `(dx / M) * sum |rho_s - rho_d|` with `M = dx * sum rho_s`.
pub fn l1_discrete(rho_s: &DensityField, rho_d: &DensityField, dx: f64) -> Result<f64, ReferenceError> {
    l1_cells(rho_s.rho(), rho_d.rho(), dx)
}

/// As [`l1_discrete`], on plain density slices.
pub fn l1_cells(rho_s: &[f64], rho_d: &[f64], dx: f64) -> Result<f64, ReferenceError> {
    if rho_s.len() != rho_d.len() {
        return Err(ReferenceError::LengthMismatch(rho_s.len(), rho_d.len()));
    }
    let mass = rho_s.iter().sum::<f64>() * dx;
    if !(mass > 0.0) {
        return Err(ReferenceError::ZeroMass(mass));
    }
    let diff: f64 = rho_s.iter().zip(rho_d).map(|(a, b)| (a - b).abs()).sum();
    Ok(diff * dx / mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> LineDensity {
        LineDensity::from_fn(-2.0, 2.0, |x| x.powi(4) - 2.0 * x * x + 1.0).unwrap()
    }

    fn flat() -> LineDensity {
        LineDensity::from_fn(-2.0, 2.0, |_| 23.0 / 15.0).unwrap()
    }

    #[test]
    fn quartic_against_constant() {
        let m = quartic().mass(1_000_000).unwrap();
        assert!((m - 92.0 / 15.0).abs() < 1e-9);
        let w = w1_line(&quartic(), &flat(), 1_000_000).unwrap();
        assert!((w - 3.2).abs() < 1e-4, "{w}");
    }

    #[test]
    fn identical_and_symmetric() {
        assert_eq!(w1_line(&quartic(), &quartic(), 1000).unwrap(), 0.0);
        let ab = w1_line(&quartic(), &flat(), 4000).unwrap();
        let ba = w1_line(&flat(), &quartic(), 4000).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn bumps_act_like_point_masses() {
        for (x, y) in [(0.1, 0.7), (-1.5, 1.5), (0.25, 0.3)] {
            let s = LineDensity::bump(-2.0, 2.0, x, 0.001, 1.0).unwrap();
            let d = LineDensity::bump(-2.0, 2.0, y, 0.001, 1.0).unwrap();
            let w = w1_line(&s, &d, 400_000).unwrap();
            assert!((w - f64::abs(x - y)).abs() < 1e-4, "{x} {y}: {w}");
        }
    }

    #[test]
    fn refinement_converges() {
        let s = LineDensity::from_fn(0.0, 1.0, |x| 1.0 + (std::f64::consts::PI * x).sin()).unwrap();
        let mass = 1.0 + 2.0 / std::f64::consts::PI;
        let d = LineDensity::from_fn(0.0, 1.0, move |x| mass * 2.0 * x).unwrap();
        let w: Vec<f64> = [100, 200, 400].iter().map(|&n| w1_line(&s, &d, n).unwrap()).collect();
        let (first, second) = ((w[1] - w[0]).abs(), (w[2] - w[1]).abs());
        assert!(first >= 1.5 * second, "{w:?}");
    }

    #[test]
    fn piecewise_constant_profiles() {
        let s = LineDensity::from_cells(0.0, 2.0, vec![1.0, 0.0]).unwrap();
        let d = LineDensity::from_cells(0.0, 2.0, vec![0.0, 1.0]).unwrap();
        assert_eq!(s.mass(7).unwrap(), 1.0);
        let w = w1_line(&s, &d, 1000).unwrap();
        assert!((w - 1.0).abs() < 1e-9, "{w}");
        assert!(LineDensity::from_cells(0.0, 1.0, vec![-0.5]).is_err());
    }

    #[test]
    fn rejects_mismatch() {
        let other = LineDensity::from_fn(-2.0, 2.0, |_| 1.0).unwrap();
        assert!(matches!(w1_line(&quartic(), &other, 1000), Err(ReferenceError::MassMismatch(..))));
        let shifted = LineDensity::from_fn(-1.0, 3.0, |_| 23.0 / 15.0).unwrap();
        assert!(matches!(w1_line(&flat(), &shifted, 10), Err(ReferenceError::IntervalMismatch(..))));
        assert!(matches!(w1_line(&flat(), &flat(), 0), Err(ReferenceError::NoCells)));
    }

    #[test]
    fn discrete_l1() {
        let a = [0.5, 0.5, 0.0, 0.0];
        let b = [0.0, 0.0, 0.25, 0.75];
        assert_eq!(l1_cells(&a, &a, 0.1).unwrap(), 0.0);
        assert_eq!(l1_cells(&a, &b, 0.1).unwrap(), 2.0);
        let c = [0.25, 0.25, 0.25, 0.25];
        assert!((l1_cells(&a, &c, 0.1).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(l1_cells(&[0.0], &[0.0], 0.1), Err(ReferenceError::ZeroMass(_))));
        assert!(matches!(l1_cells(&a, &c[..3], 0.1), Err(ReferenceError::LengthMismatch(4, 3))));
    }
}
