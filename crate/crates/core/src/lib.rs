//! Exact simulation of particle flows through moving piecewise-constant
//! density fields, dyadic comb maps, and the resulting non-convergence of
//! solutions to `u_t + div(f(|u|) u) = 0` in two space dimensions.

pub mod combs;
pub mod compactness;
pub mod exactnum;
pub mod field;
pub mod flux;
pub mod geometry;
pub mod illposed;
pub mod riemann1d;
pub mod tracer;

pub use combs::{build_comb, psi_digit_oracle, verify_psi, CombKind, CombSpec, LevelCombs};
pub use exactnum::{digit, DigitIndex, NumError, Rational};
pub use field::{DensityField, FieldError, Horizon, MovingPatch};
pub use flux::{CounterexampleFlux, PiecewiseAffineFlux2, PlanarFlux};
pub use geometry::{DiagonalStrip, Point2, Rect, RectUnion, Vec2};
pub use tracer::{eventual_shift, inverse_flow, trace, TraceOptions, Trajectory};
