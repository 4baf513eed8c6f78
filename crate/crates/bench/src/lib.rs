//! Shared fixtures for the benchmarks.

use combflow::exactnum::q;
use combflow::{DensityField, Horizon, MovingPatch, Point2, Rect, RectUnion, Vec2};

/// Background 3 with one density-4 rectangle `[0, 1) x [0, 3)` moving up.
pub fn single_sharp_field() -> DensityField {
    let rect = Rect::new(Point2::origin(), Point2::new(1.into(), 3.into())).expect("rect");
    let patch = MovingPatch::new(4.into(), Vec2::e2(), RectUnion::new(vec![rect]).expect("union")).expect("patch");
    DensityField::new(3.into(), vec![patch], Horizon::unbounded()).expect("field")
}

/// Dyadic points `(odd / 2^bits, odd / 2^bits)` in `[0, 1)^2`.
pub fn dyadic_points(count: usize, bits: u32) -> Vec<Point2> {
    let den = 1i64 << bits;
    (0..count as i64)
        .map(|i| {
            let a = (2 * i + 1) % den;
            let b = (2 * (i * 7 + 3) + 1) % den;
            Point2::new(q(a, den), q(b, den))
        })
        .collect()
}
