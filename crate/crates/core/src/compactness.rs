//! Mollified velocity fields, their flows, BV norms and compressibility.
//!
//! Floating point throughout. The kernel is the product of
//! `k(s) = (35/32)(1 - s^2)^3` on `[-1, 1]` scaled to radius `epsilon`; it is
//! twice continuously differentiable and its antiderivative is a polynomial,
//! so a rectangle indicator is mollified in closed form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::Rational;
use crate::field::DensityField;
use crate::flux::{FluxError, PlanarFlux};
use crate::geometry::Point2;
use crate::tracer::{flow, TraceError, TraceOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompactnessError {
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
    #[error("step {dt} does not resolve epsilon (need dt <= {limit})")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("step halving disagrees by {0}")]
    Refinement(f64),
    #[error("need at least {0} samples")]
    TooFewSamples(usize),
    #[error(transparent)]
    Flux(#[from] FluxError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

pub type V2 = [f64; 2];

/// A time-dependent planar velocity field.
pub trait VelocityField: Sync {
    fn velocity(&self, t: f64, x: V2) -> V2;

    /// Sup-norm bound `C1`.
    fn bound(&self) -> f64;

    /// `(d/dt, d/dx1, d/dx2)` of the velocity; centred differences by default.
    fn derivatives(&self, t: f64, x: V2, step: f64) -> [V2; 3] {
        let d = |a: V2, b: V2| [(a[0] - b[0]) / (2.0 * step), (a[1] - b[1]) / (2.0 * step)];
        [
            d(self.velocity(t + step, x), self.velocity(t - step, x)),
            d(self.velocity(t, [x[0] + step, x[1]]), self.velocity(t, [x[0] - step, x[1]])),
            d(self.velocity(t, [x[0], x[1] + step]), self.velocity(t, [x[0], x[1] - step])),
        ]
    }
}

/// `(35/32)(1 - s^2)^3`.
pub fn kernel(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let u = 1.0 - s * s;
        35.0 / 32.0 * u * u * u
    }
}

/// `int_{-1}^s kernel`.
pub fn kernel_cdf(s: f64) -> f64 {
    if s <= -1.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let s2 = s * s;
        0.5 + 35.0 / 32.0 * s * (1.0 - s2 + 0.6 * s2 * s2 - s2 * s2 * s2 / 7.0)
    }
}

/// A rectangle moving rigidly, carrying a velocity increment over background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingBox {
    pub lo: V2,
    pub hi: V2,
    pub motion: V2,
    pub dv: V2,
}

impl MovingBox {
    fn at(&self, t: f64) -> (V2, V2) {
        (
            [self.lo[0] + t * self.motion[0], self.lo[1] + t * self.motion[1]],
            [self.hi[0] + t * self.motion[0], self.hi[1] + t * self.motion[1]],
        )
    }
}

/// Piecewise-constant velocity `x' = f(rho(t, x))` of a density field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchVelocity {
    pub background: V2,
    pub boxes: Vec<MovingBox>,
    c1: f64,
}

fn norm(v: V2) -> f64 {
    v[0].hypot(v[1])
}

impl PatchVelocity {
    pub fn new(background: V2, boxes: Vec<MovingBox>) -> Self {
        let c1 = boxes
            .iter()
            .map(|b| norm([background[0] + b.dv[0], background[1] + b.dv[1]]))
            .fold(norm(background), f64::max);
        PatchVelocity { background, boxes, c1 }
    }

    pub fn from_field(field: &DensityField, flux: &dyn PlanarFlux) -> Result<Self, CompactnessError> {
        let bg = flux.velocity(&field.background)?.to_f64();
        let mut boxes = Vec::new();
        for p in &field.patches {
            let v = flux.velocity(&p.value)?.to_f64();
            let dv = [v[0] - bg[0], v[1] - bg[1]];
            let motion = p.velocity.to_f64();
            for r in p.support0.rects() {
                boxes.push(MovingBox { lo: r.lo().to_f64(), hi: r.hi().to_f64(), motion, dv });
            }
        }
        Ok(PatchVelocity::new(bg, boxes))
    }

    pub fn translate(&self, a: V2) -> Self {
        let boxes = self
            .boxes
            .iter()
            .map(|b| MovingBox { lo: [b.lo[0] + a[0], b.lo[1] + a[1]], hi: [b.hi[0] + a[0], b.hi[1] + a[1]], ..*b })
            .collect();
        PatchVelocity::new(self.background, boxes)
    }

    /// `lim_{eps -> 0}` of the BV norm over `[0, T]` when the box contains
    /// every rectangle for all times and no two rectangles touch.
    pub fn jump_perimeter_sum(&self, t_end: f64) -> f64 {
        self.boxes
            .iter()
            .map(|b| {
                let (w, h) = (b.hi[0] - b.lo[0], b.hi[1] - b.lo[1]);
                norm(b.dv) * (2.0 * (w + h) + 2.0 * (b.motion[0].abs() * h + b.motion[1].abs() * w)) * t_end
            })
            .sum()
    }
}

impl VelocityField for PatchVelocity {
    fn velocity(&self, t: f64, x: V2) -> V2 {
        let mut v = self.background;
        for b in &self.boxes {
            let (lo, hi) = b.at(t);
            if lo[0] <= x[0] && x[0] < hi[0] && lo[1] <= x[1] && x[1] < hi[1] {
                v[0] += b.dv[0];
                v[1] += b.dv[1];
            }
        }
        v
    }

    fn bound(&self) -> f64 {
        self.c1
    }
}

/// Velocity given by a closure, with a declared bound.
pub struct FnField<F: Fn(f64, V2) -> V2 + Sync> {
    pub f: F,
    pub c1: f64,
}

impl<F: Fn(f64, V2) -> V2 + Sync> VelocityField for FnField<F> {
    fn velocity(&self, t: f64, x: V2) -> V2 {
        (self.f)(t, x)
    }

    fn bound(&self) -> f64 {
        self.c1
    }
}

/// Spatial mollification `K_eps * f(t, .)`.
pub enum MollifiedField<'a> {
    /// Closed-form convolution of rectangle indicators.
    Patches { base: PatchVelocity, epsilon: f64 },
    /// Midpoint quadrature on an `m x m` grid over the kernel support.
    Quadrature { base: &'a dyn VelocityField, epsilon: f64, m: usize },
}

pub fn mollify_patches(base: PatchVelocity, epsilon: f64) -> Result<MollifiedField<'static>, CompactnessError> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(CompactnessError::Epsilon(epsilon));
    }
    Ok(MollifiedField::Patches { base, epsilon })
}

pub fn mollify(base: &dyn VelocityField, epsilon: f64, m: usize) -> Result<MollifiedField<'_>, CompactnessError> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(CompactnessError::Epsilon(epsilon));
    }
    Ok(MollifiedField::Quadrature { base, epsilon, m: m.max(2) })
}

impl MollifiedField<'_> {
    pub fn epsilon(&self) -> f64 {
        match self {
            MollifiedField::Patches { epsilon, .. } | MollifiedField::Quadrature { epsilon, .. } => *epsilon,
        }
    }
}

/// `(int k_eps(x - z) 1_[a,b)(z) dz, d/dx of it)`.
fn smoothed_interval(x: f64, a: f64, b: f64, eps: f64) -> (f64, f64) {
    let (sa, sb) = ((x - a) / eps, (x - b) / eps);
    (kernel_cdf(sa) - kernel_cdf(sb), (kernel(sa) - kernel(sb)) / eps)
}

impl VelocityField for MollifiedField<'_> {
    fn velocity(&self, t: f64, x: V2) -> V2 {
        match self {
            MollifiedField::Patches { base, epsilon } => {
                let mut v = base.background;
                for b in &base.boxes {
                    let (lo, hi) = b.at(t);
                    if x[0] <= lo[0] - epsilon || x[0] >= hi[0] + epsilon || x[1] <= lo[1] - epsilon || x[1] >= hi[1] + epsilon {
                        continue;
                    }
                    let w = smoothed_interval(x[0], lo[0], hi[0], *epsilon).0 * smoothed_interval(x[1], lo[1], hi[1], *epsilon).0;
                    v[0] += w * b.dv[0];
                    v[1] += w * b.dv[1];
                }
                v
            }
            MollifiedField::Quadrature { base, epsilon, m } => {
                let h = 2.0 / *m as f64;
                let mut acc = [0.0, 0.0];
                for i in 0..*m {
                    let s1 = -1.0 + (i as f64 + 0.5) * h;
                    let k1 = kernel(s1);
                    for j in 0..*m {
                        let s2 = -1.0 + (j as f64 + 0.5) * h;
                        let w = k1 * kernel(s2) * h * h;
                        let v = base.velocity(t, [x[0] - epsilon * s1, x[1] - epsilon * s2]);
                        acc[0] += w * v[0];
                        acc[1] += w * v[1];
                    }
                }
                acc
            }
        }
    }

    fn bound(&self) -> f64 {
        match self {
            MollifiedField::Patches { base, .. } => base.bound(),
            MollifiedField::Quadrature { base, .. } => base.bound(),
        }
    }

    fn derivatives(&self, t: f64, x: V2, step: f64) -> [V2; 3] {
        let MollifiedField::Patches { base, epsilon } = self else {
            let d = |a: V2, b: V2| [(a[0] - b[0]) / (2.0 * step), (a[1] - b[1]) / (2.0 * step)];
            return [
                d(self.velocity(t + step, x), self.velocity(t - step, x)),
                d(self.velocity(t, [x[0] + step, x[1]]), self.velocity(t, [x[0] - step, x[1]])),
                d(self.velocity(t, [x[0], x[1] + step]), self.velocity(t, [x[0], x[1] - step])),
            ];
        };
        let mut out = [[0.0; 2]; 3];
        for b in &base.boxes {
            let (lo, hi) = b.at(t);
            if x[0] <= lo[0] - epsilon || x[0] >= hi[0] + epsilon || x[1] <= lo[1] - epsilon || x[1] >= hi[1] + epsilon {
                continue;
            }
            let (g, dg) = smoothed_interval(x[0], lo[0], hi[0], *epsilon);
            let (h, dh) = smoothed_interval(x[1], lo[1], hi[1], *epsilon);
            let (d1, d2) = (dg * h, g * dh);
            // The box moves with `motion`, so d/dt = -(motion . grad).
            let dt = -(b.motion[0] * d1 + b.motion[1] * d2);
            for (a, &dv) in b.dv.iter().enumerate() {
                out[0][a] += dt * dv;
                out[1][a] += d1 * dv;
                out[2][a] += d2 * dv;
            }
        }
        out
    }
}

/// Axis-aligned box in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxF {
    pub lo: V2,
    pub hi: V2,
}

impl BoxF {
    pub fn new(lo: V2, hi: V2) -> Self {
        BoxF { lo, hi }
    }

    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    /// Centres of an `nx x ny` grid, row-major.
    pub fn grid(&self, nx: usize, ny: usize) -> Vec<V2> {
        let (dx, dy) = ((self.hi[0] - self.lo[0]) / nx as f64, (self.hi[1] - self.lo[1]) / ny as f64);
        (0..ny)
            .flat_map(|j| (0..nx).map(move |i| [self.lo[0] + (i as f64 + 0.5) * dx, self.lo[1] + (j as f64 + 0.5) * dy]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BvEstimate {
    pub value: f64,
    pub refined: f64,
    /// Relative change from `m` to `2m`.
    pub delta: f64,
    pub under_resolved: bool,
}

fn bv_sum(field: &dyn VelocityField, bbox: &BoxF, t_end: f64, m: usize, mt: usize, step: f64) -> f64 {
    let pts = bbox.grid(m, m);
    let cell = bbox.area() / (m * m) as f64;
    let dt = t_end / mt as f64;
    (0..mt)
        .map(|it| {
            let t = (it as f64 + 0.5) * dt;
            pts.par_iter()
                .map(|&x| field.derivatives(t, x, step).iter().map(|d| norm(*d)).sum::<f64>())
                .sum::<f64>()
                * cell
                * dt
        })
        .sum()
}

/// `int_0^T int_box |d_t f| + |d_1 f| + |d_2 f|` by midpoint quadrature at
/// `m` and `2m` points per axis (`mt` time levels).
pub fn bv_norm(field: &MollifiedField<'_>, bbox: &BoxF, t_end: f64, m: usize, mt: usize) -> BvEstimate {
    let eps = field.epsilon();
    let step = eps / 64.0;
    let value = bv_sum(field, bbox, t_end, m, mt, step);
    let refined = bv_sum(field, bbox, t_end, 2 * m, mt, step);
    let per_unit = m as f64 / (bbox.hi[0] - bbox.lo[0]).max(bbox.hi[1] - bbox.lo[1]);
    BvEstimate {
        value,
        refined,
        delta: if refined != 0.0 { (value - refined).abs() / refined.abs() } else { (value - refined).abs() },
        under_resolved: per_unit < 10.0 / eps,
    }
}

fn rk4_step(field: &dyn VelocityField, t: f64, x: V2, dt: f64) -> V2 {
    let add = |x: V2, k: V2, s: f64| [x[0] + s * k[0], x[1] + s * k[1]];
    let k1 = field.velocity(t, x);
    let k2 = field.velocity(t + dt / 2.0, add(x, k1, dt / 2.0));
    let k3 = field.velocity(t + dt / 2.0, add(x, k2, dt / 2.0));
    let k4 = field.velocity(t + dt, add(x, k3, dt));
    [
        x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Positions at `t_end` with `steps` classical fourth-order steps.
pub fn rk4_flow(field: &dyn VelocityField, y: V2, t_end: f64, steps: usize) -> V2 {
    let dt = t_end / steps as f64;
    (0..steps).fold(y, |x, s| rk4_step(field, s as f64 * dt, x, dt))
}

/// Flow of many points, with a step-halving error estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowEnsemble {
    pub starts: Vec<V2>,
    pub ends: Vec<V2>,
    pub t_end: f64,
    pub dt: f64,
    /// Max distance between the `dt` and `dt/2` endpoints.
    pub halving_error: f64,
}

impl FlowEnsemble {
    pub fn displacements(&self) -> Vec<V2> {
        self.starts.iter().zip(&self.ends).map(|(a, b)| [b[0] - a[0], b[1] - a[1]]).collect()
    }
}

/// Integrates `x' = v(t, x)` from every start. With `epsilon` given, the
/// step must satisfy `dt <= epsilon / (4 C1)`; with `tolerance` given, the
/// step-halving error must not exceed it.
pub fn integrate_flow(
    field: &dyn VelocityField,
    starts: &[V2],
    t_end: f64,
    dt: f64,
    epsilon: Option<f64>,
    tolerance: Option<f64>,
) -> Result<FlowEnsemble, CompactnessError> {
    if let Some(eps) = epsilon {
        let limit = eps / (4.0 * field.bound().max(f64::MIN_POSITIVE));
        if dt > limit * (1.0 + 1e-12) {
            return Err(CompactnessError::StepTooLarge { dt, limit });
        }
    }
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    let pairs: Vec<(V2, V2)> = starts
        .par_iter()
        .map(|&y| (rk4_flow(field, y, t_end, steps), rk4_flow(field, y, t_end, 2 * steps)))
        .collect();
    let halving_error = pairs.iter().map(|(a, b)| norm([a[0] - b[0], a[1] - b[1]])).fold(0.0, f64::max);
    if let Some(tol) = tolerance {
        if halving_error > tol {
            return Err(CompactnessError::Refinement(halving_error));
        }
    }
    Ok(FlowEnsemble {
        starts: starts.to_vec(),
        ends: pairs.into_iter().map(|(_, b)| b).collect(),
        t_end,
        dt: t_end / steps as f64,
        halving_error,
    })
}

fn shoelace(poly: &[V2]) -> f64 {
    let n = poly.len();
    0.5 * (0..n).map(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        a[0] * b[1] - a[1] * b[0]
    })
    .sum::<f64>()
}

fn boundary(bbox: &BoxF, per_side: usize) -> Vec<V2> {
    let [x0, y0] = bbox.lo;
    let [x1, y1] = bbox.hi;
    let s = |i: usize| i as f64 / per_side as f64;
    let mut pts = Vec::with_capacity(4 * per_side);
    pts.extend((0..per_side).map(|i| [x0 + (x1 - x0) * s(i), y0]));
    pts.extend((0..per_side).map(|i| [x1, y0 + (y1 - y0) * s(i)]));
    pts.extend((0..per_side).map(|i| [x1 - (x1 - x0) * s(i), y1]));
    pts.extend((0..per_side).map(|i| [x0, y1 - (y1 - y0) * s(i)]));
    pts
}

/// `meas(Phi_t(A)) / meas(A)` at sampled times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressibilityReport {
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Largest change when the boundary resolution is halved.
    pub half_width: f64,
    pub widened: bool,
}

/// Flows the boundary of `set` (polygon with `per_side` points per side)
/// and compares enclosed areas at `snapshots` equally spaced times.
pub fn compressibility(
    field: &dyn VelocityField,
    set: &BoxF,
    per_side: usize,
    t_end: f64,
    dt: f64,
    snapshots: usize,
) -> Result<CompressibilityReport, CompactnessError> {
    if per_side < 4 || snapshots == 0 {
        return Err(CompactnessError::TooFewSamples(4));
    }
    let fine = boundary(set, per_side);
    let steps_per = ((t_end / snapshots as f64) / dt).ceil().max(1.0) as usize;
    let h = t_end / (snapshots * steps_per) as f64;
    let mut pts = fine.clone();
    let a0 = set.area();
    let (mut times, mut ratios, mut half_width) = (Vec::new(), Vec::new(), 0.0f64);
    let mut t = 0.0;
    for _ in 0..snapshots {
        pts = pts
            .par_iter()
            .map(|&x| (0..steps_per).fold(x, |x, s| rk4_step(field, t + s as f64 * h, x, h)))
            .collect();
        t += steps_per as f64 * h;
        let r = shoelace(&pts) / a0;
        let coarse: Vec<V2> = pts.iter().step_by(2).copied().collect();
        half_width = half_width.max((shoelace(&coarse) / a0 - r).abs());
        times.push(t);
        ratios.push(r);
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CompressibilityReport { times, ratios, min, max, half_width, widened: half_width > 1e-3 })
}

/// `epsilon_nu = 2^-nu`.
pub fn epsilon_schedule(nus: std::ops::RangeInclusive<i32>) -> Vec<f64> {
    nus.map(|nu| 2f64.powi(-nu)).collect()
}

/// Exact tracer flow of dyadic start points, in floating point.
pub fn exact_flow(field: &DensityField, flux: &dyn PlanarFlux, starts: &[Point2], t_end: &Rational) -> Result<Vec<V2>, CompactnessError> {
    let opts = TraceOptions::default();
    starts
        .par_iter()
        .map(|y| Ok(flow(field, flux, y, t_end, &opts)?.to_f64()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub dt: f64,
    /// Mean distance to the previous (coarser) row's endpoints.
    pub to_previous: Option<f64>,
    /// Mean distance to the exact flow.
    pub to_exact: Option<f64>,
    pub halving_error: f64,
    pub sup_velocity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Whether distances to the exact flow (or successive distances) decrease.
    pub decreasing: bool,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,dt,to_previous,to_exact,halving_error,sup_velocity\n");
        let o = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epsilon,
                r.dt,
                o(r.to_previous),
                o(r.to_exact),
                r.halving_error,
                r.sup_velocity
            ));
        }
        out
    }
}

fn mean_distance(a: &[V2], b: &[V2]) -> f64 {
    a.iter().zip(b).map(|(p, q)| norm([p[0] - q[0], p[1] - q[1]])).sum::<f64>() / a.len().max(1) as f64
}

fn hull(base: &PatchVelocity) -> Option<BoxF> {
    let first = base.boxes.first()?;
    Some(base.boxes.iter().fold(BoxF::new(first.lo, first.hi), |acc, b| {
        BoxF::new([acc.lo[0].min(b.lo[0]), acc.lo[1].min(b.lo[1])], [acc.hi[0].max(b.hi[0]), acc.hi[1].max(b.hi[1])])
    }))
}

/// Flows of `K_eps * base` for decreasing `epsilons`, compared with each
/// other and with `exact` endpoints when given. Reports trends only.
pub fn flow_convergence_table(
    base: &PatchVelocity,
    epsilons: &[f64],
    starts: &[V2],
    t_end: f64,
    exact: Option<&[V2]>,
) -> Result<ConvergenceTable, CompactnessError> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut prev: Option<Vec<V2>> = None;
    for &eps in epsilons {
        let field = mollify_patches(base.clone(), eps)?;
        let dt = eps / (4.0 * base.bound().max(f64::MIN_POSITIVE));
        let ens = integrate_flow(&field, starts, t_end, dt, Some(eps), None)?;
        let sup_velocity = hull(base)
            .map_or_else(Vec::new, |b| b.grid(64, 64))
            .into_iter()
            .chain(starts.iter().copied())
            .map(|x| norm(field.velocity(0.0, x)))
            .fold(0.0, f64::max);
        rows.push(ConvergenceRow {
            epsilon: eps,
            dt: ens.dt,
            to_previous: prev.as_ref().map(|p| mean_distance(p, &ens.ends)),
            to_exact: exact.map(|e| mean_distance(e, &ens.ends)),
            halving_error: ens.halving_error,
            sup_velocity,
        });
        prev = Some(ens.ends);
    }
    let series: Vec<f64> = rows.iter().filter_map(|r| r.to_exact.or(r.to_previous)).collect();
    let decreasing = series.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceTable { rows, decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::q;
    use crate::field::{Horizon, MovingPatch};
    use crate::flux::CounterexampleFlux;
    use crate::geometry::{Rect, RectUnion, Vec2};

    fn sharp_rect() -> DensityField {
        let r = Rect::new(Point2::origin(), Point2::new(1.into(), 3.into())).unwrap();
        let p = MovingPatch::new(4.into(), Vec2::e2(), RectUnion::new(vec![r]).unwrap()).unwrap();
        DensityField::new(3.into(), vec![p], Horizon::unbounded()).unwrap()
    }

    #[test]
    fn kernel_normalized() {
        assert_eq!(kernel_cdf(-1.0), 0.0);
        assert_eq!(kernel_cdf(1.0), 1.0);
        assert!((kernel_cdf(0.0) - 0.5).abs() < 1e-15);
        let n = 20000;
        let integral: f64 = (0..n).map(|i| kernel(-1.0 + (i as f64 + 0.5) * 2.0 / n as f64) * 2.0 / n as f64).sum();
        assert!((integral - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_and_far_field() {
        let c = PatchVelocity::new([0.3, -0.2], Vec::new());
        let m = mollify_patches(c.clone(), 0.1).unwrap();
        assert_eq!(m.velocity(1.0, [5.0, 5.0]), [0.3, -0.2]);
        let pv = PatchVelocity::from_field(&sharp_rect(), &CounterexampleFlux).unwrap();
        let m = mollify_patches(pv.clone(), 0.1).unwrap();
        assert_eq!(m.velocity(0.0, [0.5, 1.5]), [0.0, 0.25]);
        assert_eq!(m.velocity(0.0, [1.2, 1.5]), [0.0, 0.0]);
        assert!(mollify_patches(pv, 0.0).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let pv = PatchVelocity::from_field(&sharp_rect(), &CounterexampleFlux).unwrap();
        let exact = mollify_patches(pv.clone(), 0.25).unwrap();
        let quad = mollify(&pv, 0.25, 400).unwrap();
        for x in [[0.95, 1.0], [0.1, 2.9], [1.1, 3.1], [0.5, -0.1]] {
            let (a, b) = (exact.velocity(0.3, x), quad.velocity(0.3, x));
            assert!((a[1] - b[1]).abs() < 2e-3, "{a:?} {b:?}");
        }
    }

    #[test]
    fn sup_bound_and_translation() {
        let pv = PatchVelocity::from_field(&sharp_rect(), &CounterexampleFlux).unwrap();
        let m = mollify_patches(pv.clone(), 0.3).unwrap();
        let shifted = mollify_patches(pv.translate([0.7, -1.3]), 0.3).unwrap();
        for x in BoxF::new([-1.0, -1.0], [2.0, 4.0]).grid(30, 30) {
            let v = m.velocity(0.4, x);
            assert!(norm(v) <= pv.bound() + 1e-15);
            let w = shifted.velocity(0.4, [x[0] + 0.7, x[1] - 1.3]);
            assert!((v[0] - w[0]).abs() < 1e-12 && (v[1] - w[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_step_bv() {
        let pv = PatchVelocity::new([0.0, 0.0], vec![MovingBox { lo: [0.0, -10.0], hi: [10.0, 10.0], motion: [0.0, 0.0], dv: [1.0, 0.0] }]);
        let eps = 0.05;
        let m = mollify_patches(pv, eps).unwrap();
        let bv = bv_norm(&m, &BoxF::new([-1.0, 0.0], [1.0, 1.0]), 1.0, 400, 1);
        assert!((bv.value - 1.0).abs() < 1e-3, "{bv:?}");
        assert!(!bv.under_resolved);
    }

    #[test]
    fn moving_rectangle_bv_is_jump_perimeter() {
        let pv = PatchVelocity::from_field(&sharp_rect(), &CounterexampleFlux).unwrap();
        let m = mollify_patches(pv.clone(), 0.1).unwrap();
        let bv = bv_norm(&m, &BoxF::new([-0.5, -0.5], [1.5, 4.5]), 1.0, 200, 20);
        let exact = pv.jump_perimeter_sum(1.0);
        assert!((bv.refined - exact).abs() < 1e-2 * exact, "{bv:?} vs {exact}");
    }

    #[test]
    fn flows_of_analytic_fields() {
        let c = FnField { f: |_, _| [0.3, -0.7], c1: 0.77 };
        let e = integrate_flow(&c, &[[1.0, 2.0]], 2.0, 0.01, None, Some(1e-12)).unwrap();
        assert!((e.ends[0][0] - 1.6).abs() < 1e-12 && (e.ends[0][1] - 0.6).abs() < 1e-12);
        let rot = FnField { f: |_, x: V2| [-x[1], x[0]], c1: 2.0 };
        let period = 2.0 * std::f64::consts::PI;
        let e = integrate_flow(&rot, &[[1.0, 0.0], [0.3, 0.4]], period, period / 2000.0, None, None).unwrap();
        for (a, b) in e.starts.iter().zip(&e.ends) {
            assert!(norm([a[0] - b[0], a[1] - b[1]]) < 1e-6);
        }
        assert!(integrate_flow(&rot, &[[1.0, 0.0]], 1.0, 0.1, Some(0.1), None).is_err());
    }

    #[test]
    fn compressibility_examples() {
        let rot = FnField { f: |_, x: V2| [-x[1], x[0]], c1: 2.0 };
        let r = compressibility(&rot, &BoxF::new([0.2, 0.1], [0.8, 0.5]), 64, 3.0, 0.01, 6).unwrap();
        assert!((r.min - 1.0).abs() < 1e-3 && (r.max - 1.0).abs() < 1e-3);
        let lin = FnField { f: |_, x: V2| x, c1: 4.0 };
        let r = compressibility(&lin, &BoxF::new([0.2, 0.1], [0.8, 0.5]), 16, 0.5, 0.005, 1).unwrap();
        assert!((r.ratios[0] / 1f64.exp() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn mollified_shift_approaches_tracer() {
        let field = sharp_rect();
        let pv = PatchVelocity::from_field(&field, &CounterexampleFlux).unwrap();
        let y = Point2::new(q(31, 32), q(5, 1));
        let exact = exact_flow(&field, &CounterexampleFlux, std::slice::from_ref(&y), &q(12, 1)).unwrap();
        assert_eq!(exact[0], [31.0 / 32.0, 6.0]);
        let table = flow_convergence_table(&pv, &epsilon_schedule(3..=6), &[y.to_f64()], 12.0, Some(&exact)).unwrap();
        assert!(table.decreasing, "{table:?}");
    }
}
