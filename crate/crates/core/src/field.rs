//! Piecewise-constant density fields made of translating patches.
//!
//! A [`DensityField`] is a background density plus a list of [`MovingPatch`]es,
//! each a disjoint rectangle union carrying a constant density and moving
//! rigidly with a constant velocity. Such a field is an exact weak solution of
//! `rho_t + div F(rho) = 0` when every patch edge satisfies the
//! Rankine-Hugoniot balance, which [`DensityField::verify_rankine_hugoniot`]
//! checks in exact arithmetic.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::Rational;
use crate::flux::{FluxError, PlanarFlux};
use crate::geometry::{Point2, Rect, RectUnion, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("density must be positive, got {0}")]
    NonPositiveDensity(Rational),
    #[error("time {t} outside horizon [{start}, {end}]")]
    OutsideHorizon { t: Box<Rational>, start: Box<Rational>, end: String },
    #[error("patches overlap: {0} violation(s)")]
    Overlap(usize),
    #[error("rankine-hugoniot violated on {0} edge(s)")]
    RankineHugoniot(usize),
    #[error(transparent)]
    Flux(#[from] FluxError),
}

/// Closed time interval `[start, end]`; `end = None` means unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub start: Rational,
    pub end: Option<Rational>,
}

impl Horizon {
    pub fn unbounded() -> Self {
        Horizon { start: Rational::zero(), end: None }
    }

    pub fn until(end: Rational) -> Self {
        Horizon { start: Rational::zero(), end: Some(end) }
    }

    pub fn contains(&self, t: &Rational) -> bool {
        *t >= self.start && self.end.as_ref().is_none_or(|e| t <= e)
    }

    fn check(&self, t: &Rational) -> Result<(), FieldError> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(FieldError::OutsideHorizon {
                t: Box::new(t.clone()),
                start: Box::new(self.start.clone()),
                end: self.end.as_ref().map_or("inf".into(), |e| e.to_string()),
            })
        }
    }
}

/// A region of constant density translating with constant velocity; its
/// support at time `t` is `support0 + t * velocity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingPatch {
    pub value: Rational,
    pub velocity: Vec2,
    pub support0: RectUnion,
}

impl MovingPatch {
    pub fn new(value: Rational, velocity: Vec2, support0: RectUnion) -> Result<Self, FieldError> {
        if !value.is_positive() {
            return Err(FieldError::NonPositiveDensity(value));
        }
        Ok(MovingPatch { value, velocity, support0 })
    }

    pub fn support_at(&self, t: &Rational) -> RectUnion {
        self.support0.translate(&self.velocity.scale(t))
    }

    pub fn contains_at(&self, t: &Rational, x: &Point2) -> bool {
        let back = x - &self.velocity.scale(t);
        self.support0.contains(&back)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub background: Rational,
    pub patches: Vec<MovingPatch>,
    pub horizon: Horizon,
}

/// Two rectangles of different patches overlapping during `(from, to)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapViolation {
    pub patch_a: usize,
    pub rect_a: usize,
    pub patch_b: usize,
    pub rect_b: usize,
    /// `None` means unbounded on that side.
    pub from: Option<Rational>,
    pub to: Option<Rational>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DisjointnessReport {
    pub pairs_checked: usize,
    pub violations: Vec<OverlapViolation>,
}

impl DisjointnessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A patch edge failing `s [rho] = [F] . n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeViolation {
    pub patch: usize,
    pub rect: usize,
    pub normal: Vec2,
    pub speed: Rational,
    pub lhs: Rational,
    pub rhs: Rational,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RhReport {
    pub edges_checked: usize,
    pub violations: Vec<EdgeViolation>,
    pub note: String,
}

impl RhReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Time interval, open at both ends, with `None` for an infinite end.
type OpenInterval = (Option<Rational>, Option<Rational>);

/// Times `t` at which `a + t w` and `b` overlap with positive area.
fn overlap_times(a: &Rect, b: &Rect, w: &Vec2) -> Option<OpenInterval> {
    let mut lo: Option<Rational> = None;
    let mut hi: Option<Rational> = None;
    for axis in 0..2 {
        let (alo, ahi) = (a.lo().coord(axis), a.hi().coord(axis));
        let (blo, bhi) = (b.lo().coord(axis), b.hi().coord(axis));
        let wi = w.coord(axis);
        if wi.is_zero() {
            if !(alo < bhi && blo < ahi) {
                return None;
            }
            continue;
        }
        let t1 = (blo - ahi) / wi;
        let t2 = (bhi - alo) / wi;
        let (l, h) = if wi.is_positive() { (t1, t2) } else { (t2, t1) };
        lo = Some(match lo {
            Some(x) => x.max(l),
            None => l,
        });
        hi = Some(match hi {
            Some(x) => x.min(h),
            None => h,
        });
    }
    match (&lo, &hi) {
        (Some(l), Some(h)) if l >= h => None,
        _ => Some((lo, hi)),
    }
}

fn clip_to_horizon(iv: OpenInterval, horizon: &Horizon) -> Option<OpenInterval> {
    let lo = match iv.0 {
        Some(l) => l.max(horizon.start.clone()),
        None => horizon.start.clone(),
    };
    let hi = match (iv.1, &horizon.end) {
        (Some(h), Some(e)) => Some(h.min(e.clone())),
        (Some(h), None) => Some(h),
        (None, Some(e)) => Some(e.clone()),
        (None, None) => None,
    };
    if hi.as_ref().is_some_and(|h| *h <= lo) {
        return None;
    }
    Some((Some(lo), hi))
}

/// Range of `phi(x) = w2 x1 - w1 x2` over a rectangle; `phi` is invariant
/// under motion along `w`, so rectangles whose ranges do not overlap can
/// never meet.
fn invariant_range(r: &Rect, w: &Vec2) -> (Rational, Rational) {
    let vals: Vec<Rational> = r.corners().iter().map(|c| &w.x2 * &c.x1 - &w.x1 * &c.x2).collect();
    let mut lo = vals[0].clone();
    let mut hi = vals[0].clone();
    for v in &vals[1..] {
        if *v < lo {
            lo = v.clone();
        }
        if *v > hi {
            hi = v.clone();
        }
    }
    (lo, hi)
}

/// Index pairs `(i, j)` whose projected ranges overlap (open), by sweep.
fn candidate_pairs(a: &[(Rational, Rational)], b: &[(Rational, Rational)]) -> Vec<(usize, usize)> {
    let mut events: Vec<(&Rational, bool, usize)> = a
        .iter()
        .enumerate()
        .map(|(i, r)| (&r.0, false, i))
        .chain(b.iter().enumerate().map(|(j, r)| (&r.0, true, j)))
        .collect();
    events.sort_by(|x, y| x.0.cmp(y.0));
    let mut active_a: Vec<usize> = Vec::new();
    let mut active_b: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for (start, is_b, idx) in events {
        active_a.retain(|&i| a[i].1 > *start);
        active_b.retain(|&j| b[j].1 > *start);
        if is_b {
            out.extend(active_a.iter().map(|&i| (i, idx)));
            active_b.push(idx);
        } else {
            out.extend(active_b.iter().map(|&j| (idx, j)));
            active_a.push(idx);
        }
    }
    out
}

impl DensityField {
    pub fn new(background: Rational, patches: Vec<MovingPatch>, horizon: Horizon) -> Result<Self, FieldError> {
        if !background.is_positive() {
            return Err(FieldError::NonPositiveDensity(background));
        }
        Ok(DensityField { background, patches, horizon })
    }

    /// The constant field with no patches.
    pub fn constant(background: Rational) -> Result<Self, FieldError> {
        DensityField::new(background, Vec::new(), Horizon::unbounded())
    }

    /// Index of the patch covering `x` at time `t`, if any.
    pub fn patch_at(&self, t: &Rational, x: &Point2) -> Option<usize> {
        self.patches.iter().position(|p| p.contains_at(t, x))
    }

    pub fn eval_rho(&self, t: &Rational, x: &Point2) -> Result<Rational, FieldError> {
        self.horizon.check(t)?;
        Ok(match self.patch_at(t, x) {
            Some(i) => self.patches[i].value.clone(),
            None => self.background.clone(),
        })
    }

    /// Pointwise bounds `a <= rho <= b` over all values the field takes.
    pub fn density_bounds(&self) -> (Rational, Rational) {
        let mut lo = self.background.clone();
        let mut hi = self.background.clone();
        for p in &self.patches {
            if p.support0.is_empty() {
                continue;
            }
            lo = lo.min(p.value.clone());
            hi = hi.max(p.value.clone());
        }
        (lo, hi)
    }

    /// The same solution observed from time `s`: the returned field at time
    /// `t` equals this field at time `s + t`.
    pub fn time_shift(&self, s: &Rational) -> DensityField {
        DensityField {
            background: self.background.clone(),
            patches: self
                .patches
                .iter()
                .map(|p| MovingPatch {
                    value: p.value.clone(),
                    velocity: p.velocity.clone(),
                    support0: p.support_at(s),
                })
                .collect(),
            horizon: Horizon {
                start: (&self.horizon.start - s).max(Rational::zero()),
                end: self.horizon.end.as_ref().map(|e| e - s),
            },
        }
    }

    pub fn rect_count(&self) -> usize {
        self.patches.iter().map(|p| p.support0.len()).sum()
    }

    /// Exact decision whether two patches ever overlap within the horizon.
    pub fn validate_disjoint(&self) -> DisjointnessReport {
        let mut report = DisjointnessReport::default();
        for i in 0..self.patches.len() {
            for j in (i + 1)..self.patches.len() {
                let (pa, pb) = (&self.patches[i], &self.patches[j]);
                let w = &pa.velocity - &pb.velocity;
                // Direction-invariant projection; for w = 0 project on x1.
                let proj = if w.is_zero() { Vec2::new(Rational::zero(), -Rational::one()) } else { w.clone() };
                let ra: Vec<_> = pa.support0.rects().iter().map(|r| invariant_range(r, &proj)).collect();
                let rb: Vec<_> = pb.support0.rects().iter().map(|r| invariant_range(r, &proj)).collect();
                for (ia, ib) in candidate_pairs(&ra, &rb) {
                    report.pairs_checked += 1;
                    let (a, b) = (&pa.support0.rects()[ia], &pb.support0.rects()[ib]);
                    if let Some(iv) = overlap_times(a, b, &w).and_then(|iv| clip_to_horizon(iv, &self.horizon)) {
                        report.violations.push(OverlapViolation {
                            patch_a: i,
                            rect_a: ia,
                            patch_b: j,
                            rect_b: ib,
                            from: iv.0,
                            to: iv.1,
                        });
                    }
                }
            }
        }
        report
    }

    /// Checks `s (rho_in - rho_out) = (F(rho_in) - F(rho_out)) . n` on every
    /// patch edge against the background state.
    pub fn verify_rankine_hugoniot(&self, flux: &dyn PlanarFlux) -> Result<RhReport, FieldError> {
        let mut report = RhReport {
            note: "entropy admissibility not checked beyond Rankine-Hugoniot; \
                   jumps are contacts on affine flux branches"
                .into(),
            ..Default::default()
        };
        let out = &self.background;
        let f_out = flux.flux(out)?;
        let normals = [Vec2::e1(), -Vec2::e1(), Vec2::e2(), -Vec2::e2()];
        for (pi, patch) in self.patches.iter().enumerate() {
            let f_in = flux.flux(&patch.value)?;
            let jump = &patch.value - out;
            let dflux = &f_in - &f_out;
            for n in &normals {
                let speed = patch.velocity.dot(n);
                let lhs = &speed * &jump;
                let rhs = dflux.dot(n);
                let bad = lhs != rhs;
                for ri in 0..patch.support0.len() {
                    report.edges_checked += 1;
                    if bad {
                        report.violations.push(EdgeViolation {
                            patch: pi,
                            rect: ri,
                            normal: n.clone(),
                            speed: speed.clone(),
                            lhs: lhs.clone(),
                            rhs: rhs.clone(),
                        });
                    }
                }
            }
        }
        Ok(report)
    }

    /// Disjointness and Rankine-Hugoniot together, as an error on failure.
    pub fn validate(&self, flux: &dyn PlanarFlux) -> Result<(), FieldError> {
        let d = self.validate_disjoint();
        if !d.passed() {
            return Err(FieldError::Overlap(d.violations.len()));
        }
        let rh = self.verify_rankine_hugoniot(flux)?;
        if !rh.passed() {
            return Err(FieldError::RankineHugoniot(rh.violations.len()));
        }
        Ok(())
    }

    /// CSV raster `x1,x2,rho` of cell-center samples at time `t`.
    pub fn raster_csv(&self, t: &Rational, window: &Rect, nx: usize, ny: usize) -> Result<String, FieldError> {
        let mut out = String::from("x1,x2,rho\n");
        let (w, h) = (window.width(), window.height());
        for j in 0..ny {
            for i in 0..nx {
                let x = Point2::new(
                    &window.lo().x1 + &(&w * &Rational::new(2 * i as i64 + 1, 2 * nx as i64).expect("nx > 0")),
                    &window.lo().x2 + &(&h * &Rational::new(2 * j as i64 + 1, 2 * ny as i64).expect("ny > 0")),
                );
                let rho = self.eval_rho(t, &x)?;
                writeln!(out, "{},{},{}", x.x1, x.x2, rho).expect("string write");
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::q;
    use crate::flux::CounterexampleFlux;
    use proptest::prelude::*;

    fn pt(a: Rational, b: Rational) -> Point2 {
        Point2::new(a, b)
    }

    fn rect(a: i64, b: i64, c: i64, d: i64) -> Rect {
        Rect::new(pt(a.into(), b.into()), pt(c.into(), d.into())).unwrap()
    }

    fn single(value: i64, velocity: Vec2, r: Rect) -> DensityField {
        let patch = MovingPatch::new(value.into(), velocity, RectUnion::new(vec![r]).unwrap()).unwrap();
        DensityField::new(3.into(), vec![patch], Horizon::unbounded()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let sharp = single(4, Vec2::e2(), rect(0, 0, 1, 3));
        assert_eq!(sharp.eval_rho(&2.into(), &pt(q(1, 2), 4.into())).unwrap(), q(4, 1));
        assert_eq!(sharp.eval_rho(&2.into(), &pt(2.into(), 4.into())).unwrap(), q(3, 1));
        let natural = DensityField::constant(3.into()).unwrap();
        assert_eq!(natural.eval_rho(&q(17, 3), &pt(q(-5, 2), 9.into())).unwrap(), q(3, 1));
    }

    #[test]
    fn horizon_enforced() {
        let mut f = single(4, Vec2::e2(), rect(0, 0, 1, 3));
        f.horizon = Horizon::until(5.into());
        assert!(matches!(f.eval_rho(&6.into(), &Point2::origin()), Err(FieldError::OutsideHorizon { .. })));
        assert!(f.eval_rho(&5.into(), &Point2::origin()).is_ok());
    }

    #[test]
    fn nonpositive_density_rejected() {
        assert!(MovingPatch::new(0.into(), Vec2::e1(), RectUnion::empty()).is_err());
        assert!(DensityField::constant((-1).into()).is_err());
    }

    #[test]
    fn rh_examples() {
        let flux = CounterexampleFlux;
        assert!(single(4, Vec2::e2(), rect(0, 0, 1, 3)).verify_rankine_hugoniot(&flux).unwrap().passed());
        assert!(single(2, Vec2::e1(), rect(0, 0, 3, 1)).verify_rankine_hugoniot(&flux).unwrap().passed());
        let bad = single(4, Vec2::e1(), rect(0, 0, 1, 3)).verify_rankine_hugoniot(&flux).unwrap();
        assert!(!bad.passed());
        assert_eq!(bad.violations.len(), 4);
        // a value-2 patch moving left fails on vertical edges
        assert!(!single(2, -Vec2::e1(), rect(0, 0, 3, 1)).verify_rankine_hugoniot(&flux).unwrap().passed());
    }

    #[test]
    fn disjointness_examples() {
        let p = MovingPatch::new(4.into(), Vec2::origin(), RectUnion::new(vec![rect(0, 0, 1, 1)]).unwrap()).unwrap();
        let twins = DensityField::new(3.into(), vec![p.clone(), p], Horizon::unbounded()).unwrap();
        let rep = twins.validate_disjoint();
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].to, None);

        // patch below a static one, moving up in the same column
        let mover = MovingPatch::new(4.into(), Vec2::e2(), RectUnion::new(vec![rect(0, -5, 1, -3)]).unwrap()).unwrap();
        let wall = MovingPatch::new(2.into(), Vec2::origin(), RectUnion::new(vec![rect(0, 0, 1, 1)]).unwrap()).unwrap();
        let f = DensityField::new(3.into(), vec![mover, wall], Horizon::unbounded()).unwrap();
        let rep = f.validate_disjoint();
        assert_eq!(rep.violations.len(), 1);
        // overlap while -5 + t < 1 and 0 < -3 + t: t in (3, 6)
        assert_eq!(rep.violations[0].from, Some(q(3, 1)));
        assert_eq!(rep.violations[0].to, Some(q(6, 1)));

        // same pair with the horizon ending before contact
        let mut g = f.clone();
        g.horizon = Horizon::until(3.into());
        assert!(g.validate_disjoint().passed());

        // diagonal strips: relative velocity e1 - e2 keeps x1 + x2 fixed
        let a = MovingPatch::new(4.into(), Vec2::e2(), RectUnion::new(vec![rect(14, 14, 15, 17)]).unwrap()).unwrap();
        let b = MovingPatch::new(2.into(), Vec2::e1(), RectUnion::new(vec![rect(8, 14, 11, 15)]).unwrap()).unwrap();
        let f = DensityField::new(3.into(), vec![a, b], Horizon::unbounded()).unwrap();
        assert!(f.validate_disjoint().passed());
    }

    #[test]
    fn raster_has_header_and_cells() {
        let f = single(4, Vec2::e2(), rect(0, 0, 1, 3));
        let csv = f.raster_csv(&0.into(), &rect(0, 0, 2, 2), 2, 2).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "1/2,1/2,4");
        assert_eq!(lines[2], "3/2,1/2,3");
    }

    proptest! {
        #[test]
        fn translation_covariance(t in 0i64..40, d in 1i64..8, a in -40i64..40, b in -40i64..40) {
            let f = single(4, Vec2::e2(), rect(0, 0, 1, 3));
            let t = q(t, d);
            let x = pt(q(a, 8), q(b, 8));
            let shifted = f.time_shift(&t);
            prop_assert_eq!(f.eval_rho(&t, &x).unwrap(), shifted.eval_rho(&Rational::zero(), &x).unwrap());
            let back = &x - &f.patches[0].velocity.scale(&t);
            prop_assert_eq!(
                f.patches[0].contains_at(&t, &x),
                f.patches[0].support0.contains(&back)
            );
            prop_assert_eq!(f.patches[0].support_at(&t).measure(), f.patches[0].support0.measure());
        }
    }
}
