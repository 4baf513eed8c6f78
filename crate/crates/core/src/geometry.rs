//! Points, half-open rectangles, disjoint rectangle unions and diagonal strips.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("degenerate rectangle {lo} .. {hi}")]
    Degenerate { lo: Box<Point2>, hi: Box<Point2> },
    #[error("rectangles {0} and {1} of a union overlap")]
    Overlap(usize, usize),
    #[error("empty strip [{0}, {1})")]
    EmptyStrip(Box<Rational>, Box<Rational>),
}

/// A point (or displacement) in the plane.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: Rational,
    pub x2: Rational,
}

/// Displacements and velocities share the point representation.
pub type Vec2 = Point2;

impl Point2 {
    pub fn new(x1: Rational, x2: Rational) -> Self {
        Point2 { x1, x2 }
    }

    pub fn origin() -> Self {
        Point2::default()
    }

    pub fn e1() -> Self {
        Point2::new(Rational::one(), Rational::zero())
    }

    pub fn e2() -> Self {
        Point2::new(Rational::zero(), Rational::one())
    }

    pub fn scale(&self, s: &Rational) -> Point2 {
        Point2::new(&self.x1 * s, &self.x2 * s)
    }

    pub fn dot(&self, other: &Point2) -> Rational {
        &self.x1 * &other.x1 + &self.x2 * &other.x2
    }

    pub fn is_zero(&self) -> bool {
        self.x1.is_zero() && self.x2.is_zero()
    }

    /// `x1 + x2`, the coordinate transverse to diagonal strips.
    pub fn diagonal_sum(&self) -> Rational {
        &self.x1 + &self.x2
    }

    pub fn coord(&self, axis: usize) -> &Rational {
        match axis {
            0 => &self.x1,
            1 => &self.x2,
            _ => panic!("axis {axis} out of range"),
        }
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [self.x1.to_f64(), self.x2.to_f64()]
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

impl fmt::Debug for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<'a> Add<&'a Point2> for &'a Point2 {
    type Output = Point2;
    fn add(self, rhs: &'a Point2) -> Point2 {
        Point2::new(&self.x1 + &rhs.x1, &self.x2 + &rhs.x2)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        &self + &rhs
    }
}

impl<'a> Sub<&'a Point2> for &'a Point2 {
    type Output = Point2;
    fn sub(self, rhs: &'a Point2) -> Point2 {
        Point2::new(&self.x1 - &rhs.x1, &self.x2 - &rhs.x2)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        &self - &rhs
    }
}

impl Neg for &Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-&self.x1, -&self.x2)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        -&self
    }
}

/// Half-open rectangle `[lo.x1, hi.x1) x [lo.x2, hi.x2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawRect", into = "RawRect")]
pub struct Rect {
    lo: Point2,
    hi: Point2,
}

#[derive(Serialize, Deserialize)]
struct RawRect {
    lo: Point2,
    hi: Point2,
}

impl TryFrom<RawRect> for Rect {
    type Error = GeometryError;
    fn try_from(r: RawRect) -> Result<Self, Self::Error> {
        Rect::new(r.lo, r.hi)
    }
}

impl From<Rect> for RawRect {
    fn from(r: Rect) -> Self {
        RawRect { lo: r.lo, hi: r.hi }
    }
}

impl Rect {
    pub fn new(lo: Point2, hi: Point2) -> Result<Self, GeometryError> {
        if lo.x1 < hi.x1 && lo.x2 < hi.x2 {
            Ok(Rect { lo, hi })
        } else {
            Err(GeometryError::Degenerate { lo: Box::new(lo), hi: Box::new(hi) })
        }
    }

    /// Rectangle from its lower corner and side lengths.
    pub fn with_size(lo: Point2, width: Rational, height: Rational) -> Result<Self, GeometryError> {
        let hi = Point2::new(&lo.x1 + &width, &lo.x2 + &height);
        Rect::new(lo, hi)
    }

    pub fn lo(&self) -> &Point2 {
        &self.lo
    }

    pub fn hi(&self) -> &Point2 {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi.x1 - &self.lo.x1
    }

    pub fn height(&self) -> Rational {
        &self.hi.x2 - &self.lo.x2
    }

    pub fn area(&self) -> Rational {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point2) -> bool {
        self.lo.x1 <= p.x1 && p.x1 < self.hi.x1 && self.lo.x2 <= p.x2 && p.x2 < self.hi.x2
    }

    /// True when `p` lies on the closed boundary.
    pub fn on_boundary(&self, p: &Point2) -> bool {
        let in_closed = self.lo.x1 <= p.x1 && p.x1 <= self.hi.x1 && self.lo.x2 <= p.x2 && p.x2 <= self.hi.x2;
        in_closed && (p.x1 == self.lo.x1 || p.x1 == self.hi.x1 || p.x2 == self.lo.x2 || p.x2 == self.hi.x2)
    }

    pub fn translate(&self, v: &Vec2) -> Rect {
        Rect { lo: &self.lo + v, hi: &self.hi + v }
    }

    /// Positive-area overlap test.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.lo.x1 < other.hi.x1 && other.lo.x1 < self.hi.x1 && self.lo.x2 < other.hi.x2 && other.lo.x2 < self.hi.x2
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let lo = Point2::new(
            self.lo.x1.clone().max(other.lo.x1.clone()),
            self.lo.x2.clone().max(other.lo.x2.clone()),
        );
        let hi = Point2::new(
            self.hi.x1.clone().min(other.hi.x1.clone()),
            self.hi.x2.clone().min(other.hi.x2.clone()),
        );
        Rect::new(lo, hi).ok()
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            self.lo.clone(),
            Point2::new(self.hi.x1.clone(), self.lo.x2.clone()),
            Point2::new(self.lo.x1.clone(), self.hi.x2.clone()),
            self.hi.clone(),
        ]
    }

    /// Smallest rectangle containing both.
    pub fn hull(&self, other: &Rect) -> Rect {
        Rect {
            lo: Point2::new(
                self.lo.x1.clone().min(other.lo.x1.clone()),
                self.lo.x2.clone().min(other.lo.x2.clone()),
            ),
            hi: Point2::new(
                self.hi.x1.clone().max(other.hi.x1.clone()),
                self.hi.x2.clone().max(other.hi.x2.clone()),
            ),
        }
    }
}

/// Finite union of pairwise disjoint half-open rectangles.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Rect>", into = "Vec<Rect>")]
pub struct RectUnion {
    rects: Vec<Rect>,
}

impl TryFrom<Vec<Rect>> for RectUnion {
    type Error = GeometryError;
    fn try_from(rects: Vec<Rect>) -> Result<Self, Self::Error> {
        RectUnion::new(rects)
    }
}

impl From<RectUnion> for Vec<Rect> {
    fn from(u: RectUnion) -> Self {
        u.rects
    }
}

impl RectUnion {
    /// Validates pairwise disjointness with a sweep over `lo.x1`.
    pub fn new(rects: Vec<Rect>) -> Result<Self, GeometryError> {
        let mut order: Vec<usize> = (0..rects.len()).collect();
        order.sort_by(|&a, &b| rects[a].lo.x1.cmp(&rects[b].lo.x1));
        for (pos, &i) in order.iter().enumerate() {
            for &j in &order[pos + 1..] {
                if rects[j].lo.x1 >= rects[i].hi.x1 {
                    break;
                }
                if rects[i].intersects(&rects[j]) {
                    return Err(GeometryError::Overlap(i.min(j), i.max(j)));
                }
            }
        }
        Ok(RectUnion { rects })
    }

    pub fn empty() -> Self {
        RectUnion::default()
    }

    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    pub fn contains(&self, p: &Point2) -> bool {
        self.rects.iter().any(|r| r.contains(p))
    }

    pub fn measure(&self) -> Rational {
        self.rects.iter().fold(Rational::zero(), |acc, r| acc + r.area())
    }

    /// Exact area of the part inside `window`.
    pub fn measure_within(&self, window: &Rect) -> Rational {
        self.rects
            .iter()
            .filter_map(|r| r.intersection(window))
            .fold(Rational::zero(), |acc, r| acc + r.area())
    }

    pub fn translate(&self, v: &Vec2) -> RectUnion {
        RectUnion { rects: self.rects.iter().map(|r| r.translate(v)).collect() }
    }

    pub fn bounding_box(&self) -> Option<Rect> {
        let mut it = self.rects.iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, r| acc.hull(r)))
    }

    /// Disjoint union; fails if any rectangles overlap.
    pub fn union(&self, other: &RectUnion) -> Result<RectUnion, GeometryError> {
        let mut rects = self.rects.clone();
        rects.extend(other.rects.iter().cloned());
        RectUnion::new(rects)
    }
}

/// `{ p : lo_sum <= p.x1 + p.x2 < hi_sum }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalStrip {
    lo_sum: Rational,
    hi_sum: Rational,
}

impl DiagonalStrip {
    pub fn new(lo_sum: Rational, hi_sum: Rational) -> Result<Self, GeometryError> {
        if lo_sum < hi_sum {
            Ok(DiagonalStrip { lo_sum, hi_sum })
        } else {
            Err(GeometryError::EmptyStrip(Box::new(lo_sum), Box::new(hi_sum)))
        }
    }

    pub fn lo_sum(&self) -> &Rational {
        &self.lo_sum
    }

    pub fn hi_sum(&self) -> &Rational {
        &self.hi_sum
    }

    pub fn contains(&self, p: &Point2) -> bool {
        let s = p.diagonal_sum();
        self.lo_sum <= s && s < self.hi_sum
    }
}

/// Every rectangle corner sum lies in the closed range `[lo_sum, hi_sum]`,
/// so the half-open rectangles sit inside the strip.
pub fn union_in_strip(set: &RectUnion, strip: &DiagonalStrip) -> bool {
    set.rects().iter().all(|r| {
        r.corners().iter().all(|c| {
            let s = c.diagonal_sum();
            strip.lo_sum <= s && s <= strip.hi_sum
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::q;
    use proptest::prelude::*;

    fn pt(a: i64, b: i64) -> Point2 {
        Point2::new(a.into(), b.into())
    }

    fn rect(a: i64, b: i64, c: i64, d: i64) -> Rect {
        Rect::new(pt(a, b), pt(c, d)).unwrap()
    }

    #[test]
    fn half_open_membership() {
        let r = rect(0, 0, 1, 3);
        assert!(r.contains(&pt(0, 0)));
        assert!(!r.contains(&pt(1, 0)));
        assert!(!r.contains(&pt(0, 3)));
        let strip = DiagonalStrip::new(28.into(), 32.into()).unwrap();
        assert!(strip.contains(&pt(14, 14)));
        assert!(!strip.contains(&pt(16, 16)));
    }

    #[test]
    fn measures() {
        let u = RectUnion::new(vec![rect(0, 0, 1, 3), rect(2, 0, 3, 3)]).unwrap();
        assert_eq!(u.measure(), Rational::from(6));
        assert_eq!(RectUnion::empty().measure(), Rational::zero());
        let r = Rect::new(pt(0, 0), Point2::new(q(1, 2), q(1, 3))).unwrap();
        assert_eq!(r.area(), q(1, 6));
        assert_eq!(u.measure_within(&rect(0, 1, 10, 2)), Rational::from(2));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(Rect::new(pt(0, 0), pt(0, 1)), Err(GeometryError::Degenerate { .. })));
        assert!(matches!(
            RectUnion::new(vec![rect(0, 0, 2, 2), rect(1, 1, 3, 3)]),
            Err(GeometryError::Overlap(0, 1))
        ));
        // touching edges are fine
        assert!(RectUnion::new(vec![rect(0, 0, 1, 1), rect(1, 0, 2, 1)]).is_ok());
        assert!(DiagonalStrip::new(2.into(), 2.into()).is_err());
    }

    #[test]
    fn strip_containment() {
        let strip = DiagonalStrip::new(28.into(), 32.into()).unwrap();
        let inside = RectUnion::new(vec![rect(14, 14, 15, 15)]).unwrap();
        let outside = RectUnion::new(vec![rect(0, 0, 1, 1)]).unwrap();
        assert!(union_in_strip(&inside, &strip));
        assert!(!union_in_strip(&outside, &strip));
        assert!(union_in_strip(&RectUnion::empty(), &strip));
    }

    #[test]
    fn serde_validates() {
        let json = r#"[{"lo":{"x1":"0","x2":"0"},"hi":{"x1":"1/2","x2":"3"}}]"#;
        let u: RectUnion = serde_json::from_str(json).unwrap();
        assert_eq!(u.measure(), q(3, 2));
        let bad = r#"[{"lo":{"x1":"0","x2":"0"},"hi":{"x1":"0","x2":"3"}}]"#;
        assert!(serde_json::from_str::<RectUnion>(bad).is_err());
    }

    fn arb_grid_union() -> impl Strategy<Value = RectUnion> {
        // cells of a 6x6 grid with random sizes inside each cell: always disjoint
        proptest::collection::vec((0i64..6, 0i64..6, 1i64..4, 1i64..4), 0..12).prop_map(|cells| {
            let mut seen = std::collections::HashSet::new();
            let rects = cells
                .into_iter()
                .filter(|(i, j, _, _)| seen.insert((*i, *j)))
                .map(|(i, j, w, h)| {
                    Rect::with_size(Point2::new((4 * i).into(), (4 * j).into()), q(w, 1), q(h, 2)).unwrap()
                })
                .collect();
            RectUnion::new(rects).unwrap()
        })
    }

    proptest! {
        #[test]
        fn measure_translation_invariant(u in arb_grid_union(), a in -50i64..50, b in 1i64..20, c in -50i64..50, d in 1i64..20) {
            let v = Point2::new(q(a, b), q(c, d));
            prop_assert_eq!(u.translate(&v).measure(), u.measure());
        }

        #[test]
        fn measure_additive(u in arb_grid_union(), shift in 30i64..40) {
            let far = u.translate(&Point2::new(shift.into(), 0.into()));
            let both = u.union(&far).unwrap();
            prop_assert_eq!(both.measure(), u.measure() + far.measure());
        }

        #[test]
        fn subdivision_points_are_members(i in 0i64..16, j in 0i64..16) {
            let r = Rect::new(Point2::new(q(1, 3), q(-2, 1)), Point2::new(q(5, 3), q(7, 5))).unwrap();
            // cell centers of a 16x16 rational subdivision
            let p = Point2::new(
                &r.lo().x1 + &(r.width() * q(2 * i + 1, 32)),
                &r.lo().x2 + &(r.height() * q(2 * j + 1, 32)),
            );
            prop_assert!(r.contains(&p));
        }
    }
}
