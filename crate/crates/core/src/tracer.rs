//! Exact event-driven integration of `x' = f(rho(t, x))` through a
//! [`DensityField`].
//!
//! Between events the velocity is constant, so each patch edge crossing is a
//! linear equation in `t` solved exactly. At an event the new region is the
//! unique one that is self-consistent on `(t, t + eps)`: moving with the
//! region's own velocity keeps the point inside it. Crossings in the comb
//! scenarios are transversal, so this choice is unique there; anything else is
//! flagged.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exactnum::Rational;
use crate::field::{DensityField, FieldError};
use crate::flux::{FluxError, PlanarFlux};
use crate::geometry::{Point2, Rect, Vec2};

pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("exceeded {0} events (chattering or malformed scenario)")]
    MaxEvents(usize),
    #[error("trajectory does not stabilize: {0}")]
    NoStabilization(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Flux(#[from] FluxError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    pub max_events: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { max_events: DEFAULT_MAX_EVENTS }
    }
}

/// Measure-zero situations met along a trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TraceFlags {
    /// Start point on a patch boundary; traced with the half-open convention.
    pub measure_zero_start: bool,
    /// Events where no region, or more than one, was self-consistent.
    pub ambiguous_events: usize,
    /// The trajectory slid along a patch edge.
    pub tangential_contact: bool,
}

impl TraceFlags {
    pub fn is_clean(&self) -> bool {
        !self.measure_zero_start && self.ambiguous_events == 0 && !self.tangential_contact
    }

    fn merge(&mut self, other: TraceFlags) {
        self.measure_zero_start |= other.measure_zero_start;
        self.ambiguous_events += other.ambiguous_events;
        self.tangential_contact |= other.tangential_contact;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Breakpoint {
    pub t: Rational,
    pub x: Point2,
    /// Velocity on the segment starting here.
    pub v: Vec2,
}

/// Piecewise-affine trajectory; the last breakpoint is the end state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub breakpoints: Vec<Breakpoint>,
    pub events: usize,
    pub flags: TraceFlags,
}

impl Trajectory {
    pub fn start(&self) -> &Point2 {
        &self.breakpoints[0].x
    }

    pub fn end(&self) -> &Point2 {
        &self.breakpoints.last().expect("nonempty").x
    }

    pub fn end_time(&self) -> &Rational {
        &self.breakpoints.last().expect("nonempty").t
    }

    /// Position at time `t` within the traced interval.
    pub fn position(&self, t: &Rational) -> Option<Point2> {
        let first = &self.breakpoints[0];
        if *t < first.t || t > self.end_time() {
            return None;
        }
        let seg = self.breakpoints.iter().rev().find(|b| b.t <= *t)?;
        Some(&seg.x + &seg.v.scale(&(t - &seg.t)))
    }

    /// CSV rows `t,x1,x2,v1,v2` at breakpoints.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x1,x2,v1,v2\n");
        for b in &self.breakpoints {
            writeln!(out, "{},{},{},{},{}", b.t, b.x.x1, b.x.x2, b.v.x1, b.v.x2).expect("string write");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftResult {
    pub shift: Vec2,
    /// First time after which the point never moves again.
    pub stabilization_time: Rational,
    pub flags: TraceFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseFlow {
    pub y: Point2,
    pub flags: TraceFlags,
}

/// Which region a point occupies: background or a patch index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Background,
    Patch(usize),
}

/// The field seen in a local clock `tau`: patch `i` occupies
/// `support0 + offsets[i] + tau * vels[i]` and a point inside it moves with
/// `point_vels[i]`.
struct Frame<'a> {
    field: &'a DensityField,
    offsets: Vec<Vec2>,
    vels: Vec<Vec2>,
    point_vels: Vec<Vec2>,
    bg_vel: Vec2,
}

/// `(q, d) >= (lo, 0)` lexicographically: inside the lower face on `(0, eps)`.
fn right_limit_ge(q: &Rational, d: &Rational, lo: &Rational) -> bool {
    q > lo || (q == lo && !d.is_negative())
}

/// `(q, d) < (hi, 0)` lexicographically.
fn right_limit_lt(q: &Rational, d: &Rational, hi: &Rational) -> bool {
    q < hi || (q == hi && d.is_negative())
}

fn inside_right_limit(q: &Point2, d: &Vec2, r: &Rect) -> bool {
    right_limit_ge(&q.x1, &d.x1, &r.lo().x1)
        && right_limit_lt(&q.x1, &d.x1, &r.hi().x1)
        && right_limit_ge(&q.x2, &d.x2, &r.lo().x2)
        && right_limit_lt(&q.x2, &d.x2, &r.hi().x2)
}

/// Smallest `s > 0` at which `q + s d` enters or leaves `r`.
fn next_crossing(q: &Point2, d: &Vec2, r: &Rect) -> Option<Rational> {
    let mut lo: Option<Rational> = None;
    let mut hi: Option<Rational> = None;
    for axis in 0..2 {
        let (qa, da) = (q.coord(axis), d.coord(axis));
        let (rlo, rhi) = (r.lo().coord(axis), r.hi().coord(axis));
        if da.is_zero() {
            if !(rlo <= qa && qa < rhi) {
                return None;
            }
            continue;
        }
        let a = (rlo - qa) / da;
        let b = (rhi - qa) / da;
        let (l, h) = if da.is_positive() { (a, b) } else { (b, a) };
        lo = Some(match lo {
            Some(x) => x.max(l),
            None => l,
        });
        hi = Some(match hi {
            Some(x) => x.min(h),
            None => h,
        });
    }
    let (lo, hi) = (lo?, hi?);
    if lo >= hi {
        return None;
    }
    if lo.is_positive() {
        Some(lo)
    } else if hi.is_positive() {
        Some(hi)
    } else {
        None
    }
}

impl<'a> Frame<'a> {
    fn forward(field: &'a DensityField, flux: &dyn PlanarFlux) -> Result<Self, TraceError> {
        let point_vels = field.patches.iter().map(|p| flux.velocity(&p.value)).collect::<Result<Vec<_>, _>>()?;
        Ok(Frame {
            field,
            offsets: vec![Vec2::origin(); field.patches.len()],
            vels: field.patches.iter().map(|p| p.velocity.clone()).collect(),
            point_vels,
            bg_vel: flux.velocity(&field.background)?,
        })
    }

    /// Time reversal from time `t`: local time `tau` sees the field at `t - tau`
    /// and every velocity negated.
    fn backward(field: &'a DensityField, flux: &dyn PlanarFlux, t: &Rational) -> Result<Self, TraceError> {
        let fwd = Frame::forward(field, flux)?;
        Ok(Frame {
            field,
            offsets: field.patches.iter().map(|p| p.velocity.scale(t)).collect(),
            vels: fwd.vels.iter().map(|v| -v).collect(),
            point_vels: fwd.point_vels.iter().map(|v| -v).collect(),
            bg_vel: -fwd.bg_vel,
        })
    }

    fn local(&self, i: usize, tau: &Rational, x: &Point2) -> Point2 {
        let shift = &self.offsets[i] + &self.vels[i].scale(tau);
        x - &shift
    }

    fn velocity(&self, region: Region) -> &Vec2 {
        match region {
            Region::Background => &self.bg_vel,
            Region::Patch(i) => &self.point_vels[i],
        }
    }

    fn on_any_boundary(&self, tau: &Rational, x: &Point2) -> bool {
        self.field.patches.iter().enumerate().any(|(i, p)| {
            let q = self.local(i, tau, x);
            p.support0.rects().iter().any(|r| r.on_boundary(&q))
        })
    }

    /// Sliding along an edge: on the boundary with zero normal relative speed.
    fn tangential(&self, tau: &Rational, x: &Point2, v: &Vec2) -> bool {
        self.field.patches.iter().enumerate().any(|(i, p)| {
            let q = self.local(i, tau, x);
            let d = v - &self.vels[i];
            p.support0.rects().iter().any(|r| {
                if !r.on_boundary(&q) {
                    return false;
                }
                (0..2).any(|axis| {
                    let qa = q.coord(axis);
                    (qa == r.lo().coord(axis) || qa == r.hi().coord(axis)) && d.coord(axis).is_zero()
                })
            })
        })
    }

    /// Self-consistent region on `(tau, tau + eps)`, plus an ambiguity flag.
    fn region(&self, tau: &Rational, x: &Point2) -> (Region, bool) {
        let mut consistent = Vec::new();
        let locals: Vec<Point2> = (0..self.field.patches.len()).map(|i| self.local(i, tau, x)).collect();
        for (i, p) in self.field.patches.iter().enumerate() {
            let d = &self.point_vels[i] - &self.vels[i];
            if p.support0.rects().iter().any(|r| inside_right_limit(&locals[i], &d, r)) {
                consistent.push(Region::Patch(i));
            }
        }
        let bg_free = self.field.patches.iter().enumerate().all(|(i, p)| {
            let d = &self.bg_vel - &self.vels[i];
            !p.support0.rects().iter().any(|r| inside_right_limit(&locals[i], &d, r))
        });
        if bg_free {
            consistent.push(Region::Background);
        }
        if consistent.len() == 1 {
            return (consistent[0], false);
        }
        // Fall back to the half-open value at the instant itself.
        let fallback = self
            .field
            .patches
            .iter()
            .enumerate()
            .position(|(i, p)| p.support0.contains(&locals[i]))
            .map_or(Region::Background, Region::Patch);
        (fallback, true)
    }

    fn next_event(&self, tau: &Rational, x: &Point2, v: &Vec2) -> Option<Rational> {
        let mut best: Option<Rational> = None;
        for (i, p) in self.field.patches.iter().enumerate() {
            let d = v - &self.vels[i];
            if d.is_zero() {
                continue;
            }
            let q = self.local(i, tau, x);
            for r in p.support0.rects() {
                if let Some(s) = next_crossing(&q, &d, r) {
                    if best.as_ref().is_none_or(|b| s < *b) {
                        best = Some(s);
                    }
                }
            }
        }
        best
    }

    /// Traces from `x` at local time 0 until `t_end` (or stabilization when
    /// `t_end` is `None`).
    fn run(&self, x: &Point2, t_end: Option<&Rational>, opts: &TraceOptions) -> Result<Trajectory, TraceError> {
        let mut tau = Rational::zero();
        let mut x = x.clone();
        let mut flags = TraceFlags { measure_zero_start: self.on_any_boundary(&tau, &x), ..Default::default() };
        let (region, ambiguous) = self.region(&tau, &x);
        flags.ambiguous_events += ambiguous as usize;
        let mut v = self.velocity(region).clone();
        let mut breakpoints = vec![Breakpoint { t: tau.clone(), x: x.clone(), v: v.clone() }];
        let mut events = 0usize;
        loop {
            let step = self.next_event(&tau, &x, &v);
            let finish = match (&step, t_end) {
                (None, Some(end)) => Some(end - &tau),
                (Some(s), Some(end)) if &(&tau + s) >= end => Some(end - &tau),
                (None, None) => {
                    if !v.is_zero() {
                        return Err(TraceError::NoStabilization(format!("moving with {v} and no further events")));
                    }
                    Some(Rational::zero())
                }
                _ => None,
            };
            if let Some(rest) = finish {
                x = &x + &v.scale(&rest);
                tau = &tau + &rest;
                if rest.is_positive() || breakpoints.len() == 1 {
                    breakpoints.push(Breakpoint { t: tau, x, v });
                }
                return Ok(Trajectory { breakpoints, events, flags });
            }
            let s = step.expect("event present");
            events += 1;
            if events > opts.max_events {
                return Err(TraceError::MaxEvents(opts.max_events));
            }
            x = &x + &v.scale(&s);
            tau = &tau + &s;
            let (region, ambiguous) = self.region(&tau, &x);
            flags.ambiguous_events += ambiguous as usize;
            let nv = self.velocity(region).clone();
            if nv != v {
                v = nv;
                if self.tangential(&tau, &x, &v) {
                    flags.tangential_contact = true;
                }
                breakpoints.push(Breakpoint { t: tau.clone(), x: x.clone(), v: v.clone() });
            }
        }
    }
}

/// Exact trajectory of `x' = f(rho(t, x))` from `y` at time 0 to `t_end`.
pub fn trace(
    field: &DensityField,
    flux: &dyn PlanarFlux,
    y: &Point2,
    t_end: &Rational,
    opts: &TraceOptions,
) -> Result<Trajectory, TraceError> {
    field.eval_rho(&Rational::zero(), y)?;
    field.eval_rho(t_end, y)?;
    Frame::forward(field, flux)?.run(y, Some(t_end), opts)
}

/// `Phi_t(y)`.
pub fn flow(
    field: &DensityField,
    flux: &dyn PlanarFlux,
    y: &Point2,
    t: &Rational,
    opts: &TraceOptions,
) -> Result<Point2, TraceError> {
    Ok(trace(field, flux, y, t, opts)?.end().clone())
}

/// Total displacement once every patch has passed; ignores the horizon end.
pub fn eventual_shift(
    field: &DensityField,
    flux: &dyn PlanarFlux,
    y: &Point2,
    opts: &TraceOptions,
) -> Result<ShiftResult, TraceError> {
    if let Some(i) = field.patches.iter().position(|p| p.velocity.is_zero() && !p.support0.is_empty()) {
        return Err(TraceError::NoStabilization(format!("patch {i} is static")));
    }
    let traj = Frame::forward(field, flux)?.run(y, None, opts)?;
    let stabilization_time = traj
        .breakpoints
        .iter()
        .rev()
        .take_while(|b| b.v.is_zero())
        .last()
        .map(|b| b.t.clone())
        .unwrap_or_else(Rational::zero);
    Ok(ShiftResult { shift: traj.end() - traj.start(), stabilization_time, flags: traj.flags })
}

/// `Phi^{-t}(x)`: traces the time-reversed field from `x` back to time 0.
pub fn inverse_flow(
    field: &DensityField,
    flux: &dyn PlanarFlux,
    x: &Point2,
    t: &Rational,
    opts: &TraceOptions,
) -> Result<InverseFlow, TraceError> {
    field.eval_rho(t, x)?;
    let frame = Frame::backward(field, flux, t)?;
    let traj = frame.run(x, Some(t), opts)?;
    let mut flags = traj.flags;
    // The reversed start is the forward end; report boundary contact there too.
    let end_flags = TraceFlags { measure_zero_start: frame.on_any_boundary(t, traj.end()), ..Default::default() };
    flags.merge(end_flags);
    Ok(InverseFlow { y: traj.end().clone(), flags })
}

/// Traces many start points in parallel.
pub fn eventual_shifts(
    field: &DensityField,
    flux: &dyn PlanarFlux,
    ys: &[Point2],
    opts: &TraceOptions,
) -> Vec<Result<ShiftResult, TraceError>> {
    ys.par_iter().map(|y| eventual_shift(field, flux, y, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::q;
    use crate::field::{Horizon, MovingPatch};
    use crate::flux::CounterexampleFlux;
    use crate::geometry::RectUnion;
    use proptest::prelude::*;

    fn pt(a: Rational, b: Rational) -> Point2 {
        Point2::new(a, b)
    }

    fn rect(a: Rational, b: Rational, c: Rational, d: Rational) -> Rect {
        Rect::new(pt(a, b), pt(c, d)).unwrap()
    }

    fn single(value: i64, velocity: Vec2, r: Rect) -> DensityField {
        let patch = MovingPatch::new(value.into(), velocity, RectUnion::new(vec![r]).unwrap()).unwrap();
        DensityField::new(3.into(), vec![patch], Horizon::unbounded()).unwrap()
    }

    fn sharp(a: Rational, b: Rational) -> DensityField {
        single(4, Vec2::e2(), rect(0.into(), 0.into(), a, b))
    }

    fn flat(a: Rational, b: Rational) -> DensityField {
        single(2, Vec2::e1(), rect(0.into(), 0.into(), a, b))
    }

    const F: CounterexampleFlux = CounterexampleFlux;

    #[test]
    fn natural_field_is_static() {
        let f = DensityField::constant(3.into()).unwrap();
        let y = pt(q(7, 3), q(-1, 5));
        let tr = trace(&f, &F, &y, &q(10, 1), &TraceOptions::default()).unwrap();
        assert_eq!(tr.breakpoints.len(), 2);
        assert_eq!(tr.end(), &y);
        assert!(tr.breakpoints[0].v.is_zero());
        let inv = inverse_flow(&f, &F, &y, &q(10, 1), &TraceOptions::default()).unwrap();
        assert_eq!(inv.y, y);
    }

    #[test]
    fn sharp_rectangle_kinematics() {
        let f = sharp(1.into(), 3.into());
        let y = pt(q(1, 2), q(3, 1));
        let tr = trace(&f, &F, &y, &q(5, 1), &TraceOptions::default()).unwrap();
        let b = &tr.breakpoints;
        assert_eq!(b[0].v, pt(0.into(), q(1, 4)));
        assert_eq!(b[0].t, Rational::zero());
        assert_eq!(b[1].t, q(4, 1));
        assert_eq!(b[1].x, pt(q(1, 2), q(4, 1)));
        assert!(b[1].v.is_zero());
        assert_eq!(tr.end(), &pt(q(1, 2), q(4, 1)));
        // the start sits on the exclusive top edge
        assert!(tr.flags.measure_zero_start);
        assert_eq!(tr.flags.ambiguous_events, 0);
    }

    #[test]
    fn flat_rectangle_kinematics() {
        let f = flat(3.into(), 1.into());
        let y = pt(q(3, 1), q(1, 2));
        let tr = trace(&f, &F, &y, &q(3, 1), &TraceOptions::default()).unwrap();
        assert_eq!(tr.breakpoints[0].v, pt(q(-1, 2), 0.into()));
        assert_eq!(tr.breakpoints[1].t, q(2, 1));
        assert_eq!(tr.end(), &pt(q(2, 1), q(1, 2)));
    }

    #[test]
    fn eventual_shift_formulas() {
        let (a, b) = (q(2, 1), q(5, 2));
        let f = sharp(a.clone(), b.clone());
        let y = pt(q(3, 4), q(7, 1));
        let s = eventual_shift(&f, &F, &y, &TraceOptions::default()).unwrap();
        assert_eq!(s.shift, pt(0.into(), &b / &q(3, 1)));
        assert_eq!(s.stabilization_time, (&y.x2 - &b) + &b * &q(4, 3));
        let outside = eventual_shift(&f, &F, &pt(q(5, 2), q(7, 1)), &TraceOptions::default()).unwrap();
        assert!(outside.shift.is_zero());
        assert_eq!(outside.stabilization_time, Rational::zero());

        let g = flat(a.clone(), b.clone());
        let y = pt(q(9, 2), q(1, 3));
        let s = eventual_shift(&g, &F, &y, &TraceOptions::default()).unwrap();
        assert_eq!(s.shift, pt(-(&a / &q(3, 1)), 0.into()));
        assert_eq!(s.stabilization_time, (&y.x1 - &a) + &a * &q(2, 3));
    }

    #[test]
    fn static_patch_never_stabilizes() {
        let f = single(4, Vec2::origin(), rect(0.into(), 0.into(), 1.into(), 1.into()));
        assert!(matches!(
            eventual_shift(&f, &F, &pt(q(1, 2), q(1, 2)), &TraceOptions::default()),
            Err(TraceError::NoStabilization(_))
        ));
    }

    #[test]
    fn max_events_guard() {
        // a column of small teeth forces one event per tooth boundary
        let rects: Vec<Rect> = (0..20)
            .map(|i| rect(0.into(), q(2 * i, 1), 1.into(), q(2 * i + 1, 1)))
            .collect();
        let patch = MovingPatch::new(4.into(), Vec2::e2(), RectUnion::new(rects).unwrap()).unwrap();
        let f = DensityField::new(3.into(), vec![patch], Horizon::unbounded()).unwrap();
        let y = pt(q(1, 2), q(100, 1));
        assert!(matches!(
            eventual_shift(&f, &F, &y, &TraceOptions { max_events: 5 }),
            Err(TraceError::MaxEvents(5))
        ));
        let s = eventual_shift(&f, &F, &y, &TraceOptions::default()).unwrap();
        assert_eq!(s.shift, pt(0.into(), q(20, 3)));
    }

    #[test]
    fn horizon_violation() {
        let mut f = sharp(1.into(), 3.into());
        f.horizon = Horizon::until(2.into());
        assert!(matches!(
            trace(&f, &F, &Point2::origin(), &q(3, 1), &TraceOptions::default()),
            Err(TraceError::Field(FieldError::OutsideHorizon { .. }))
        ));
    }

    #[test]
    fn inverse_of_forward_example() {
        let f = sharp(1.into(), 3.into());
        let inv = inverse_flow(&f, &F, &pt(q(1, 2), q(4, 1)), &q(4, 1), &TraceOptions::default()).unwrap();
        assert_eq!(inv.y, pt(q(1, 2), q(3, 1)));
    }

    #[test]
    fn trajectory_csv_and_position() {
        let f = sharp(1.into(), 3.into());
        let tr = trace(&f, &F, &pt(q(1, 2), q(3, 1)), &q(5, 1), &TraceOptions::default()).unwrap();
        assert_eq!(tr.position(&q(2, 1)).unwrap(), pt(q(1, 2), q(7, 2)));
        let csv = tr.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "t,x1,x2,v1,v2");
        assert_eq!(csv.lines().nth(1).unwrap(), "0,1/2,3,0,1/4");
    }

    fn two_patch_field() -> DensityField {
        let s = MovingPatch::new(
            4.into(),
            Vec2::e2(),
            RectUnion::new(vec![rect(0.into(), 0.into(), 1.into(), 3.into()), rect(2.into(), (-2).into(), 3.into(), 1.into())])
                .unwrap(),
        )
        .unwrap();
        let b = MovingPatch::new(2.into(), Vec2::e1(), RectUnion::new(vec![rect((-6).into(), (-1).into(), (-3).into(), 0.into())]).unwrap())
            .unwrap();
        let f = DensityField::new(3.into(), vec![s, b], Horizon::unbounded()).unwrap();
        assert!(f.validate_disjoint().passed());
        f
    }

    proptest! {
        #[test]
        fn roundtrip_inverse(a in 0i64..400, b in 0i64..400, t in 1i64..40) {
            let f = two_patch_field();
            let y = pt(q(2 * a + 1, 97), &q(2 * b + 1, 53) - &q(1, 1));
            let t = q(t, 3);
            let tr = trace(&f, &F, &y, &t, &TraceOptions::default()).unwrap();
            prop_assume!(tr.flags.is_clean());
            let inv = inverse_flow(&f, &F, tr.end(), &t, &TraceOptions::default()).unwrap();
            prop_assert_eq!(inv.y, y);
        }

        #[test]
        fn semigroup(a in 0i64..300, b in 0i64..300, s in 1i64..30, t in 1i64..30) {
            let f = two_patch_field();
            let y = pt(q(a, 37), &q(b, 41) - &q(1, 1));
            let (s, t) = (q(s, 4), q(t, 5));
            let whole = flow(&f, &F, &y, &(&s + &t), &TraceOptions::default()).unwrap();
            let mid = flow(&f, &F, &y, &s, &TraceOptions::default()).unwrap();
            let rest = flow(&f.time_shift(&s), &F, &mid, &t, &TraceOptions::default()).unwrap();
            prop_assert_eq!(whole, rest);
        }

        #[test]
        fn segment_velocity_matches_field(a in 0i64..300, b in 0i64..300) {
            let f = two_patch_field();
            let y = pt(q(2 * a + 1, 37), q(2 * b + 1, 41));
            let tr = trace(&f, &F, &y, &q(12, 1), &TraceOptions::default()).unwrap();
            for w in tr.breakpoints.windows(2) {
                let mid_t = (&w[0].t + &w[1].t) / q(2, 1);
                let mid_x = &w[0].x + &w[0].v.scale(&(&mid_t - &w[0].t));
                let rho = f.eval_rho(&mid_t, &mid_x).unwrap();
                prop_assert_eq!(&F.velocity(&rho).unwrap(), &w[0].v);
                // continuity: segment end equals next breakpoint
                prop_assert_eq!(&w[0].x + &w[0].v.scale(&(&w[1].t - &w[0].t)), w[1].x.clone());
            }
        }

        #[test]
        fn one_dimensional_spacing_bound(a in 0i64..200, gap in 1i64..200, t in 1i64..60) {
            // x2-invariant contact field: tall value-2 bands moving right
            let bands = RectUnion::new(vec![
                rect((-4).into(), (-100).into(), (-1).into(), 100.into()),
                rect((-9).into(), (-100).into(), (-7).into(), 100.into()),
            ]).unwrap();
            let f = DensityField::new(3.into(), vec![MovingPatch::new(2.into(), Vec2::e1(), bands).unwrap()], Horizon::until(20.into())).unwrap();
            let y = pt(q(a, 20), Rational::zero());
            let y2 = pt(&y.x1 + &q(gap, 20), Rational::zero());
            let t = q(t, 3);
            let (lo, hi) = f.density_bounds();
            let p = flow(&f, &F, &y, &t, &TraceOptions::default()).unwrap();
            let p2 = flow(&f, &F, &y2, &t, &TraceOptions::default()).unwrap();
            let sep0 = &y2.x1 - &y.x1;
            let sep = &p2.x1 - &p.x1;
            prop_assert!(&lo / &hi * sep0.clone() <= sep);
            prop_assert!(sep <= &hi / &lo * sep0);
        }
    }
}
