//! Flux functions: the piecewise-affine planar flux driving the comb
//! construction, generic scalar fluxes for 1D problems, and the
//! eigenstructure of `u -> f(|u|) u`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::Rational;
use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluxError {
    #[error("density {0} outside the flux domain")]
    Domain(Rational),
    #[error("derivative at breakpoint {0} requires a side")]
    Breakpoint(Rational),
    #[error("flux breakpoints must be strictly increasing and nonnegative")]
    Unordered,
    #[error("flux must have at least one breakpoint")]
    NoBreakpoints,
    #[error("jacobian is singular at u = 0")]
    Singular,
}

/// One-sided selector for derivatives at breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A planar flux `F(rho)` defined for `rho >= 0`, with velocity `f = F / rho`.
pub trait PlanarFlux: Sync {
    fn flux(&self, rho: &Rational) -> Result<Vec2, FluxError>;

    fn velocity(&self, rho: &Rational) -> Result<Vec2, FluxError> {
        if !rho.is_positive() {
            return Err(FluxError::Domain(rho.clone()));
        }
        Ok(self.flux(rho)?.scale(&rho.recip().expect("positive")))
    }
}

/// The counterexample flux, written out case by case:
/// `0` below 1, `(1 - rho) e1` on `[1, 2]`, `(rho - 3) e1` on `[2, 3]`,
/// `(rho - 3) e2` above 3.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterexampleFlux;

impl CounterexampleFlux {
    pub fn derivative(&self, rho: &Rational, side: Option<Side>) -> Result<Vec2, FluxError> {
        self.as_piecewise().derivative(rho, side)
    }

    pub fn as_piecewise(&self) -> PiecewiseAffineFlux2 {
        PiecewiseAffineFlux2::counterexample()
    }
}

impl PlanarFlux for CounterexampleFlux {
    fn flux(&self, rho: &Rational) -> Result<Vec2, FluxError> {
        if rho.is_negative() {
            return Err(FluxError::Domain(rho.clone()));
        }
        let one = Rational::one();
        let two = Rational::from(2);
        let three = Rational::from(3);
        let zero = Rational::zero();
        Ok(if *rho <= one {
            Vec2::origin()
        } else if *rho <= two {
            Vec2::new(&one - rho, zero)
        } else if *rho <= three {
            Vec2::new(rho - &three, zero)
        } else {
            Vec2::new(zero, rho - &three)
        })
    }
}

/// Continuous piecewise-affine planar flux on `rho >= 0`.
///
/// Between breakpoints the flux interpolates linearly; below the first and
/// above the last breakpoint it continues affinely with `left_slope` and
/// `right_slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffineFlux2 {
    breakpoints: Vec<(Rational, Vec2)>,
    left_slope: Vec2,
    right_slope: Vec2,
}

impl PiecewiseAffineFlux2 {
    pub fn new(breakpoints: Vec<(Rational, Vec2)>, left_slope: Vec2, right_slope: Vec2) -> Result<Self, FluxError> {
        if breakpoints.is_empty() {
            return Err(FluxError::NoBreakpoints);
        }
        if breakpoints[0].0.is_negative() || breakpoints.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(FluxError::Unordered);
        }
        Ok(PiecewiseAffineFlux2 { breakpoints, left_slope, right_slope })
    }

    pub fn counterexample() -> Self {
        let r = Rational::from;
        PiecewiseAffineFlux2::new(
            vec![
                (r(1), Vec2::origin()),
                (r(2), Vec2::new(r(-1), r(0))),
                (r(3), Vec2::origin()),
            ],
            Vec2::origin(),
            Vec2::e2(),
        )
        .expect("valid table")
    }

    pub fn breakpoints(&self) -> &[(Rational, Vec2)] {
        &self.breakpoints
    }

    /// Slopes of every affine piece, left to right.
    pub fn slopes(&self) -> Vec<Vec2> {
        let mut out = vec![self.left_slope.clone()];
        for w in self.breakpoints.windows(2) {
            let dr = &w[1].0 - &w[0].0;
            out.push((&w[1].1 - &w[0].1).scale(&dr.recip().expect("increasing")));
        }
        out.push(self.right_slope.clone());
        out
    }

    /// Lipschitz constant in the Euclidean norm (largest slope length).
    pub fn lipschitz(&self) -> f64 {
        self.slopes()
            .iter()
            .map(|s| s.x1.to_f64().hypot(s.x2.to_f64()))
            .fold(0.0, f64::max)
    }

    /// Index of the affine piece containing `rho` from the given side.
    fn piece(&self, rho: &Rational, side: Side) -> usize {
        let mut idx = 0;
        for (i, (b, _)) in self.breakpoints.iter().enumerate() {
            let past = match side {
                Side::Right => rho >= b,
                Side::Left => rho > b,
            };
            if past {
                idx = i + 1;
            }
        }
        idx
    }

    pub fn derivative(&self, rho: &Rational, side: Option<Side>) -> Result<Vec2, FluxError> {
        if rho.is_negative() {
            return Err(FluxError::Domain(rho.clone()));
        }
        let on_break = self.breakpoints.iter().any(|(b, _)| b == rho);
        let side = match (on_break, side) {
            (true, None) => return Err(FluxError::Breakpoint(rho.clone())),
            (_, Some(s)) => s,
            (false, None) => Side::Right,
        };
        Ok(self.slopes()[self.piece(rho, side)].clone())
    }
}

impl PlanarFlux for PiecewiseAffineFlux2 {
    fn flux(&self, rho: &Rational) -> Result<Vec2, FluxError> {
        if rho.is_negative() {
            return Err(FluxError::Domain(rho.clone()));
        }
        let first = &self.breakpoints[0];
        let last = self.breakpoints.last().expect("nonempty");
        if rho <= &first.0 {
            return Ok(&first.1 + &self.left_slope.scale(&(rho - &first.0)));
        }
        if rho >= &last.0 {
            return Ok(&last.1 + &self.right_slope.scale(&(rho - &last.0)));
        }
        let i = self.piece(rho, Side::Right);
        let (r0, v0) = &self.breakpoints[i - 1];
        let (r1, v1) = &self.breakpoints[i];
        let frac = (rho - r0) / (r1 - r0);
        Ok(v0 + &(v1 - v0).scale(&frac))
    }
}

/// A scalar flux (or radial velocity profile) in floating point.
pub trait ScalarFlux: Sync {
    fn value(&self, u: f64) -> f64;
    fn derivative(&self, u: f64) -> f64;

    /// Polynomial coefficients when the flux is polynomial; enables
    /// closed-form tangency solving.
    fn as_polynomial(&self) -> Option<&Polynomial> {
        None
    }
}

/// Polynomial `sum c_i u^i`, coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn monomial(degree: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; degree + 1];
        coeffs[degree] = c;
        Polynomial::new(coeffs)
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    pub fn deriv(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::constant(0.0);
        }
        Polynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect())
    }
}

impl ScalarFlux for Polynomial {
    fn value(&self, u: f64) -> f64 {
        self.eval(u)
    }

    fn derivative(&self, u: f64) -> f64 {
        self.deriv().eval(u)
    }

    fn as_polynomial(&self) -> Option<&Polynomial> {
        Some(self)
    }
}

/// Eigenstructure of the Jacobian of `u -> f(|u|) u` at `u != 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenstructure {
    /// `f(|u|) + f'(|u|) |u|`, eigenvector `u`.
    pub lambda: f64,
    pub eigvec: Vec<f64>,
    /// `f(|u|)` on the orthogonal complement of `u`.
    pub lambda_star: f64,
    pub multiplicity: usize,
}

/// `A(u) = f(|u|) I + f'(|u|) (u (x) u) / |u|`.
pub fn jacobian_matrix(profile: &dyn ScalarFlux, u: &[f64]) -> Result<Vec<Vec<f64>>, FluxError> {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(FluxError::Singular);
    }
    let f = profile.value(norm);
    let fp = profile.derivative(norm);
    let n = u.len();
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let id = if i == j { f } else { 0.0 };
                    id + fp * u[i] * u[j] / norm
                })
                .collect()
        })
        .collect())
}

pub fn jacobian_eigen(profile: &dyn ScalarFlux, u: &[f64]) -> Result<Eigenstructure, FluxError> {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || u.is_empty() {
        return Err(FluxError::Singular);
    }
    let f = profile.value(norm);
    let fp = profile.derivative(norm);
    Ok(Eigenstructure {
        lambda: f + fp * norm,
        eigvec: u.iter().map(|x| x / norm).collect(),
        lambda_star: f,
        multiplicity: u.len() - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::q;
    use proptest::prelude::*;

    fn v(a: Rational, b: Rational) -> Vec2 {
        Vec2::new(a, b)
    }

    #[test]
    fn flux_table() {
        let f = CounterexampleFlux;
        assert_eq!(f.flux(&q(2, 1)).unwrap(), v(q(-1, 1), q(0, 1)));
        assert_eq!(f.flux(&q(3, 1)).unwrap(), Vec2::origin());
        assert_eq!(f.flux(&q(4, 1)).unwrap(), v(q(0, 1), q(1, 1)));
        assert_eq!(f.flux(&q(1, 2)).unwrap(), Vec2::origin());
        assert!(matches!(f.flux(&q(-1, 2)), Err(FluxError::Domain(_))));
    }

    #[test]
    fn velocity_table() {
        let f = CounterexampleFlux;
        assert_eq!(f.velocity(&q(2, 1)).unwrap(), v(q(-1, 2), q(0, 1)));
        assert_eq!(f.velocity(&q(3, 1)).unwrap(), Vec2::origin());
        assert_eq!(f.velocity(&q(4, 1)).unwrap(), v(q(0, 1), q(1, 4)));
        assert!(matches!(f.velocity(&Rational::zero()), Err(FluxError::Domain(_))));
    }

    #[test]
    fn derivative_table() {
        let f = CounterexampleFlux;
        assert_eq!(f.derivative(&q(3, 2), None).unwrap(), v(q(-1, 1), q(0, 1)));
        assert_eq!(f.derivative(&q(7, 2), None).unwrap(), v(q(0, 1), q(1, 1)));
        assert_eq!(f.derivative(&q(5, 2), None).unwrap(), v(q(1, 1), q(0, 1)));
        assert_eq!(f.derivative(&q(1, 2), None).unwrap(), Vec2::origin());
        assert!(matches!(f.derivative(&q(2, 1), None), Err(FluxError::Breakpoint(_))));
        assert_eq!(f.derivative(&q(2, 1), Some(Side::Left)).unwrap(), v(q(-1, 1), q(0, 1)));
        assert_eq!(f.derivative(&q(2, 1), Some(Side::Right)).unwrap(), v(q(1, 1), q(0, 1)));
        assert_eq!(f.derivative(&q(3, 1), Some(Side::Right)).unwrap(), Vec2::e2());
    }

    #[test]
    fn lipschitz_constant_is_one() {
        assert_eq!(PiecewiseAffineFlux2::counterexample().lipschitz(), 1.0);
    }

    #[test]
    fn invalid_tables() {
        assert!(matches!(
            PiecewiseAffineFlux2::new(vec![], Vec2::origin(), Vec2::origin()),
            Err(FluxError::NoBreakpoints)
        ));
        let bp = vec![(q(2, 1), Vec2::origin()), (q(1, 1), Vec2::origin())];
        assert!(matches!(PiecewiseAffineFlux2::new(bp, Vec2::origin(), Vec2::origin()), Err(FluxError::Unordered)));
    }

    #[test]
    fn eigen_examples() {
        let sq = Polynomial::monomial(2, 1.0);
        let e = jacobian_eigen(&sq, &[1.0, 0.0]).unwrap();
        assert_eq!((e.lambda, e.lambda_star, e.multiplicity), (3.0, 1.0, 1));
        assert_eq!(e.eigvec, vec![1.0, 0.0]);
        let e = jacobian_eigen(&sq, &[0.0, 2.0]).unwrap();
        assert_eq!((e.lambda, e.lambda_star), (12.0, 4.0));
        let c = Polynomial::constant(2.5);
        let e = jacobian_eigen(&c, &[0.3, -1.2, 4.0]).unwrap();
        assert_eq!((e.lambda, e.lambda_star, e.multiplicity), (2.5, 2.5, 2));
        assert!(matches!(jacobian_eigen(&sq, &[0.0, 0.0]), Err(FluxError::Singular)));
    }

    #[test]
    fn jacobian_matrix_has_eigenpairs() {
        let sq = Polynomial::monomial(2, 1.0);
        let u = [0.6, -0.8];
        let a = jacobian_matrix(&sq, &u).unwrap();
        let e = jacobian_eigen(&sq, &u).unwrap();
        let av: Vec<f64> = (0..2).map(|i| a[i][0] * u[0] + a[i][1] * u[1]).collect();
        for i in 0..2 {
            assert!((av[i] - e.lambda * u[i]).abs() < 1e-12);
        }
        let w = [0.8, 0.6];
        let aw: Vec<f64> = (0..2).map(|i| a[i][0] * w[0] + a[i][1] * w[1]).collect();
        for i in 0..2 {
            assert!((aw[i] - e.lambda_star * w[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn generic_matches_hardcoded(n in 0i64..4000, d in 1i64..500) {
            let rho = q(n, d);
            prop_assert_eq!(
                PiecewiseAffineFlux2::counterexample().flux(&rho).unwrap(),
                CounterexampleFlux.flux(&rho).unwrap()
            );
        }

        #[test]
        fn flux_is_rho_times_velocity(n in 1i64..4000, d in 1i64..500) {
            let rho = q(n, d);
            let f = CounterexampleFlux;
            prop_assert_eq!(f.velocity(&rho).unwrap().scale(&rho), f.flux(&rho).unwrap());
        }

        #[test]
        fn lipschitz_bound(a in 0i64..2000, b in 0i64..2000, d in 1i64..300) {
            let (r1, r2) = (q(a, d), q(b, d));
            let f = CounterexampleFlux;
            let diff = &f.flux(&r1).unwrap() - &f.flux(&r2).unwrap();
            // |dF|^2 <= |dr|^2 with L = 1, exactly
            let dr = &r1 - &r2;
            prop_assert!(diff.dot(&diff) <= &dr * &dr);
        }
    }
}
