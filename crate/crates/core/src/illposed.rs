//! The solution sequence `u_n` built from stacked comb levels `0..=n`, its
//! evaluation by inverse tracing, and the quantities that show
//! ill-posedness: converging initial data, non-converging solutions, the
//! weak limit and its residual.
//!
//! `u_n(t, x) = rho_n(t, x) (cos theta, sin theta)` with
//! `theta = theta_bar(Phi^{-t} x)` and `theta_bar(y) = +beta` when
//! `floor(y2)` is even, `-beta` when odd.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combs::{CombError, CombWindow, LevelCombs};
use crate::exactnum::Rational;
use crate::field::{DensityField, FieldError, Horizon};
use crate::flux::{FluxError, PlanarFlux};
use crate::geometry::{Point2, Rect, Vec2};
use crate::tracer::{inverse_flow, TraceError, TraceFlags, TraceOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IllPosedError {
    #[error("angle must lie strictly between 0 and pi/2, got {0}")]
    Angle(String),
    #[error("exact cosine required")]
    NeedsExactCos,
    #[error("box {0} is not inside the region {1} < x1 + x2 < t")]
    Region(String, String),
    #[error("evaluation at {0} is ambiguous (boundary set)")]
    Ambiguous(Box<Point2>),
    #[error("grid needs at least one cell per axis")]
    EmptyGrid,
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Flux(#[from] FluxError),
}

pub const BACKGROUND: i64 = 3;

/// Angle `beta` in `(0, pi/2)`, optionally with an exact rational cosine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    radians: f64,
    cos: Option<Rational>,
}

impl Angle {
    pub fn from_cos(c: Rational) -> Result<Self, IllPosedError> {
        if !c.is_positive() || c >= Rational::one() {
            return Err(IllPosedError::Angle(format!("cos = {c}")));
        }
        Ok(Angle { radians: c.to_f64().acos(), cos: Some(c) })
    }

    pub fn from_radians(beta: f64) -> Result<Self, IllPosedError> {
        if !(beta > 0.0 && beta < std::f64::consts::FRAC_PI_2) {
            return Err(IllPosedError::Angle(format!("{beta} rad")));
        }
        Ok(Angle { radians: beta, cos: None })
    }

    pub fn radians(&self) -> f64 {
        self.radians
    }

    pub fn exact_cos(&self) -> Option<&Rational> {
        self.cos.as_ref()
    }

    pub fn cos(&self) -> f64 {
        self.cos.as_ref().map_or_else(|| self.radians.cos(), Rational::to_f64)
    }

    pub fn sin(&self) -> f64 {
        match &self.cos {
            Some(c) => {
                let c = c.to_f64();
                (1.0 - c * c).sqrt()
            }
            None => self.radians.sin(),
        }
    }
}

/// `+1` where `floor(y2)` is even, `-1` where odd.
pub fn theta_bar_sign(y: &Point2) -> i8 {
    if y.x2.floor_is_even() {
        1
    } else {
        -1
    }
}

/// `rho_n`: background 3 plus the comb families of levels `0..=n`, each
/// covering `window`. `n < 0` gives the constant field.
pub fn build_rho_n(n: i32, window: &CombWindow) -> Result<DensityField, IllPosedError> {
    let mut patches = Vec::new();
    for k in 0..=n {
        patches.extend(LevelCombs::covering(k, window).patches()?);
    }
    Ok(DensityField::new(BACKGROUND.into(), patches, Horizon::unbounded())?)
}

/// Comb level of patch `i` in a field produced by [`build_rho_n`].
pub fn patch_level(i: usize) -> i32 {
    (i / 3) as i32
}

/// One evaluated solution value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSample {
    pub t: Rational,
    pub x: Point2,
    pub rho: Rational,
    pub sign: i8,
    pub theta: f64,
    pub u: [f64; 2],
    pub flags: TraceFlags,
}

/// `u_n` for a fixed `n`, angle and comb window.
#[derive(Clone)]
pub struct Solution<'f> {
    pub n: i32,
    pub beta: Angle,
    pub field: DensityField,
    pub flux: &'f dyn PlanarFlux,
    pub opts: TraceOptions,
}

impl<'f> Solution<'f> {
    pub fn new(n: i32, beta: Angle, window: &CombWindow, flux: &'f dyn PlanarFlux) -> Result<Self, IllPosedError> {
        Ok(Solution { n, beta, field: build_rho_n(n, window)?, flux, opts: TraceOptions::default() })
    }

    /// Transport is exact; only the final trigonometric step is floating.
    pub fn evaluate(&self, t: &Rational, x: &Point2) -> Result<SolutionSample, IllPosedError> {
        let rho = self.field.eval_rho(t, x)?;
        let inv = inverse_flow(&self.field, self.flux, x, t, &self.opts)?;
        if !inv.flags.is_clean() {
            return Err(IllPosedError::Ambiguous(Box::new(x.clone())));
        }
        let sign = theta_bar_sign(&inv.y);
        let theta = sign as f64 * self.beta.radians();
        let r = rho.to_f64();
        let (c, s) = (self.beta.cos(), sign as f64 * self.beta.sin());
        Ok(SolutionSample { t: t.clone(), x: x.clone(), rho, sign, theta, u: [r * c, r * s], flags: inv.flags })
    }

    /// Initial datum `u_n(0, x)`.
    pub fn initial(&self, x: &Point2) -> Result<SolutionSample, IllPosedError> {
        self.evaluate(&Rational::zero(), x)
    }
}

pub fn evaluate_u(
    n: i32,
    beta: &Angle,
    t: &Rational,
    x: &Point2,
    window: &CombWindow,
    flux: &dyn PlanarFlux,
) -> Result<SolutionSample, IllPosedError> {
    Solution::new(n, beta.clone(), window, flux)?.evaluate(t, x)
}

/// Midpoint grid of `nx x ny` cells over a box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub bbox: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(bbox: Rect, nx: usize, ny: usize) -> Result<Self, IllPosedError> {
        if nx == 0 || ny == 0 {
            return Err(IllPosedError::EmptyGrid);
        }
        Ok(Grid { bbox, nx, ny })
    }

    pub fn cell_width(&self) -> Rational {
        &self.bbox.width() / &Rational::from(self.nx as i64)
    }

    pub fn cell_height(&self) -> Rational {
        &self.bbox.height() / &Rational::from(self.ny as i64)
    }

    pub fn cell_area(&self) -> Rational {
        &self.cell_width() * &self.cell_height()
    }

    /// Centres in row-major order, rows bottom to top.
    pub fn centers(&self) -> Vec<Point2> {
        let (dx, dy) = (self.cell_width(), self.cell_height());
        let half = Rational::new(1, 2).expect("const");
        let lo = self.bbox.lo();
        (0..self.ny)
            .flat_map(|j| {
                let x2 = &lo.x2 + &(&dy * &(&Rational::from(j as i64) + &half));
                let (lo, dx, half) = (lo.clone(), dx.clone(), half.clone());
                (0..self.nx).map(move |i| Point2::new(&lo.x1 + &(&dx * &(&Rational::from(i as i64) + &half)), x2.clone()))
            })
            .collect()
    }
}

/// Samples of one solution on a grid at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledSolution {
    pub n: i32,
    pub t: Rational,
    pub grid: Grid,
    pub samples: Vec<SolutionSample>,
}

impl SampledSolution {
    pub fn sign(&self, i: usize, j: usize) -> i8 {
        self.samples[j * self.grid.nx + i].sign
    }
}

/// Checks `region_bound < x1 + x2` and `x1 + x2 <= t` on the closed box.
pub fn check_region(bbox: &Rect, t: &Rational, region_bound: &Rational) -> Result<(), IllPosedError> {
    let (lo, hi) = (bbox.lo().diagonal_sum(), bbox.hi().diagonal_sum());
    if lo > *region_bound && hi <= *t {
        Ok(())
    } else {
        Err(IllPosedError::Region(format!("[{}, {})", bbox.lo(), bbox.hi()), format!("{region_bound}, t = {t}")))
    }
}

pub fn sample_solution(sol: &Solution<'_>, t: &Rational, grid: &Grid) -> Result<SampledSolution, IllPosedError> {
    let samples = grid.centers().par_iter().map(|x| sol.evaluate(t, x)).collect::<Result<Vec<_>, _>>()?;
    Ok(SampledSolution { n: sol.n, t: t.clone(), grid: grid.clone(), samples })
}

/// Sign matrix of `theta` with detected stripe structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnglePattern {
    pub n: i32,
    /// `rows[j][i]`, rows bottom to top.
    pub rows: Vec<Vec<i8>>,
    pub constant_in_x1: bool,
    /// Common length of the interior runs of equal row signs, as a height.
    pub stripe_height: Option<Rational>,
}

impl AnglePattern {
    pub fn from_samples(s: &SampledSolution) -> Self {
        let rows: Vec<Vec<i8>> = (0..s.grid.ny).map(|j| (0..s.grid.nx).map(|i| s.sign(i, j)).collect()).collect();
        let constant_in_x1 = rows.iter().all(|r| r.iter().all(|&v| v == r[0]));
        let stripe_height = if constant_in_x1 { stripe_run(&rows).map(|r| &s.grid.cell_height() * &Rational::from(r as i64)) } else { None };
        AnglePattern { n: s.n, rows, constant_in_x1, stripe_height }
    }

    /// Fraction of rows whose first-column sign differs from `other`.
    pub fn row_disagreement(&self, other: &AnglePattern) -> f64 {
        let diff = self.rows.iter().zip(&other.rows).filter(|(a, b)| a[0] != b[0]).count();
        diff as f64 / self.rows.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows.iter().rev() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Length of interior sign runs if they all agree (boundary runs may be shorter).
fn stripe_run(rows: &[Vec<i8>]) -> Option<usize> {
    let mut runs = Vec::new();
    let mut len = 1;
    for w in rows.windows(2) {
        if w[0][0] == w[1][0] {
            len += 1;
        } else {
            runs.push(len);
            len = 1;
        }
    }
    runs.push(len);
    match runs.len() {
        1 => None,
        2 => Some(*runs.iter().max().expect("nonempty")),
        _ => {
            let interior = &runs[1..runs.len() - 1];
            let r = interior[0];
            let edges_ok = runs[0] <= r && runs[runs.len() - 1] <= r;
            (interior.iter().all(|&x| x == r) && edges_ok).then_some(r)
        }
    }
}

pub fn angle_pattern(
    sol: &Solution<'_>,
    t: &Rational,
    grid: &Grid,
    region_bound: &Rational,
) -> Result<AnglePattern, IllPosedError> {
    check_region(&grid.bbox, t, region_bound)?;
    Ok(AnglePattern::from_samples(&sample_solution(sol, t, grid)?))
}

/// Midpoint estimate of `int |u_a - u_b|` with a bound from stripe edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L1Estimate {
    pub value: f64,
    /// Zero when every detected stripe edge lies on a grid line; otherwise
    /// half a cell of misplacement per sign change at the largest jump.
    pub error_bound: f64,
    pub aligned: bool,
}

/// Stripes of height `H` start at multiples of `H`; they sit on grid lines
/// when `H` and the box origin are multiples of the row height.
fn stripes_aligned(s: &SampledSolution) -> bool {
    let dy = s.grid.cell_height();
    let on_grid = |v: &Rational| (v / &dy).is_integer();
    let pat = AnglePattern::from_samples(s);
    match (&pat.stripe_height, pat.constant_in_x1) {
        (Some(h), true) => on_grid(h) && on_grid(&s.grid.bbox.lo().x2),
        (None, true) => true,
        _ => false,
    }
}

pub fn l1_distance(a: &SampledSolution, b: &SampledSolution) -> L1Estimate {
    assert_eq!(a.grid, b.grid, "samples must share a grid");
    let area = a.grid.cell_area().to_f64();
    let value: f64 = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(p, q)| ((p.u[0] - q.u[0]).powi(2) + (p.u[1] - q.u[1]).powi(2)).sqrt())
        .sum::<f64>()
        * area;
    let aligned = stripes_aligned(a) && stripes_aligned(b);
    if aligned {
        return L1Estimate { value, error_bound: 0.0, aligned };
    }
    let max_diff = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(p, q)| p.rho.to_f64() + q.rho.to_f64())
        .fold(0.0, f64::max);
    let (nx, ny) = (a.grid.nx, a.grid.ny);
    let mut changes = 0usize;
    for s in [a, b] {
        for j in 0..ny {
            for i in 0..nx {
                let v = s.sign(i, j);
                changes += (j + 1 < ny && s.sign(i, j + 1) != v) as usize;
                changes += (i + 1 < nx && s.sign(i + 1, j) != v) as usize;
            }
        }
    }
    L1Estimate { value, error_bound: changes as f64 * max_diff * area / 2.0, aligned }
}

/// `int_box |u_n(0) - u_m(0)|`, exact. Both data share the angle, so the
/// integrand is `|rho_n - rho_m| = 1` on the supports of levels `n+1..=m`.
pub fn initial_data_distance(n: i32, m: i32, bbox: &Rect, window: &CombWindow) -> Result<Rational, IllPosedError> {
    let (n, m) = (n.min(m), n.max(m));
    let field = build_rho_n(m, window)?;
    let bg = Rational::from(BACKGROUND);
    Ok(field
        .patches
        .iter()
        .enumerate()
        .filter(|(i, _)| patch_level(*i) > n)
        .map(|(_, p)| &p.support0.measure_within(bbox) * &(&p.value - &bg).abs())
        .fold(Rational::zero(), |acc, x| &acc + &x))
}

fn ramp(u: &Rational) -> Rational {
    if u.is_positive() {
        u * u / Rational::from(2)
    } else {
        Rational::zero()
    }
}

/// Area of `{x in box : x1 + x2 <= s}`.
fn area_below_diagonal(bbox: &Rect, s: &Rational) -> Rational {
    let base = &(s - &bbox.lo().x1) - &bbox.lo().x2;
    let (w, h) = (bbox.width(), bbox.height());
    &(&(&ramp(&base) - &ramp(&(&base - &w))) - &ramp(&(&base - &h))) + &ramp(&(&(&base - &w) - &h))
}

/// Area of the level-`k` strip `2^-k [16, 32]` inside the box.
pub fn strip_area_in_box(k: i32, bbox: &Rect) -> Rational {
    let h = Rational::pow2(-k);
    &area_below_diagonal(bbox, &(&h * &Rational::from(32))) - &area_below_diagonal(bbox, &(&h * &Rational::from(16)))
}

/// `2^n * sum_{k > n} strip area`, truncated at `k_max`: an upper constant
/// `C` for `initial_data_distance(n, m) <= C 2^-n`.
pub fn strip_constant(n: i32, k_max: i32, bbox: &Rect) -> Rational {
    let sum = ((n + 1)..=k_max).map(|k| strip_area_in_box(k, bbox)).fold(Rational::zero(), |a, b| &a + &b);
    sum.mul_pow2(n)
}

/// Average of `u` over one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellAverage {
    pub cell: Rect,
    pub mean: [f64; 2],
}

/// Cell averages of `u_n` on cells of side `cell` tiling the box, each
/// sampled on a `sub x sub` midpoint grid.
pub fn weak_limit_estimate(
    sol: &Solution<'_>,
    t: &Rational,
    bbox: &Rect,
    cell: &Rational,
    sub: (usize, usize),
) -> Result<Vec<CellAverage>, IllPosedError> {
    let cx = (&bbox.width() / cell).floor_i64().unwrap_or(0).max(0);
    let cy = (&bbox.height() / cell).floor_i64().unwrap_or(0).max(0);
    let mut out = Vec::new();
    for j in 0..cy {
        for i in 0..cx {
            let lo = Point2::new(&bbox.lo().x1 + &(cell * &Rational::from(i)), &bbox.lo().x2 + &(cell * &Rational::from(j)));
            let c = Rect::with_size(lo, cell.clone(), cell.clone()).map_err(CombError::from)?;
            let s = sample_solution(sol, t, &Grid::new(c.clone(), sub.0, sub.1)?)?;
            let count = s.samples.len() as f64;
            let mean = s.samples.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p.u[0], acc[1] + p.u[1]]);
            out.push(CellAverage { cell: c, mean: [mean[0] / count, mean[1] / count] });
        }
    }
    Ok(out)
}

/// Jump balance across the front `x1 + x2 = t` between the weak limit
/// `(3 cos beta, 0)` behind it and the stripe pattern `3 (cos, +-sin)` ahead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakResidual {
    pub cos_beta: Rational,
    pub state: Vec2,
    /// `-[u] + [(f1 + f2)(|u|) u]`, jumps taken ahead minus behind; the
    /// ahead values are stripe averages.
    pub defect: Vec2,
    /// Euclidean norm of the defect when it is axis aligned.
    pub magnitude: Option<Rational>,
    pub magnitude_f64: f64,
    pub vanishes: bool,
    pub note: String,
}

pub fn weak_residual(beta: &Angle, flux: &dyn PlanarFlux) -> Result<WeakResidual, IllPosedError> {
    let c = beta.exact_cos().ok_or(IllPosedError::NeedsExactCos)?;
    let three = Rational::from(BACKGROUND);
    let rho_b = &three * c;
    let state = Vec2::new(rho_b.clone(), Rational::zero());
    let fb = flux.velocity(&rho_b)?;
    let fa = flux.velocity(&three)?;
    // Averages: u is (3c, 0) on both sides; the flux ahead is f(3) times it.
    let g = &(&fa.x1 + &fa.x2) - &(&fb.x1 + &fb.x2);
    let defect = state.scale(&g);
    let magnitude = if defect.x1.is_zero() {
        Some(defect.x2.abs())
    } else if defect.x2.is_zero() {
        Some(defect.x1.abs())
    } else {
        None
    };
    let [d1, d2] = defect.to_f64();
    let vanishes = defect.is_zero();
    let note = if vanishes {
        "weak limit is a weak solution; the front dissipates entropy through a linearly degenerate field".to_string()
    } else {
        format!("nonzero jump defect; F(3 cos beta) = {}", flux.flux(&rho_b)?)
    };
    Ok(WeakResidual { cos_beta: c.clone(), state, defect, magnitude, magnitude_f64: d1.hypot(d2), vanishes, note })
}

fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (1.0 - r * r).powi(3)
    } else {
        0.0
    }
}

fn bump_d(r: f64) -> f64 {
    if r.abs() < 1.0 {
        -6.0 * r * (1.0 - r * r).powi(2)
    } else {
        0.0
    }
}

/// Distributional residual of the piecewise weak-limit description tested
/// against `phi = psi((x1+x2-t)/w) chi(x2-c2) eta(t-c0)`, normalized by
/// `psi(0) int chi int eta`. Each bump gives an estimate of the defect norm.
/// `chi` is centred on an integer with half-width 1 so the stripe pattern
/// ahead of the front averages out.
pub fn weak_residual_bumps(beta: &Angle, flux: &dyn PlanarFlux, bumps: usize, m: usize) -> Result<Vec<f64>, IllPosedError> {
    let c = beta.exact_cos().ok_or(IllPosedError::NeedsExactCos)?;
    let three = Rational::from(BACKGROUND);
    let fb = flux.velocity(&(&three * c))?.to_f64();
    let fa = flux.velocity(&three)?.to_f64();
    let (cb, sb) = (beta.cos(), beta.sin());
    let ub = [3.0 * cb, 0.0];
    (0..bumps)
        .map(|b| {
            let w = 0.5 + 0.25 * b as f64;
            let (c0, c2) = (4.0 + b as f64, (b % 3) as f64);
            // (t, s, x2) with s = x1 + x2 - t; unit Jacobian.
            let (ht, hs, hx) = (2.0 / m as f64, 2.0 * w / m as f64, 2.0 / m as f64);
            let mut acc = [0.0f64; 2];
            for it in 0..m {
                let t = c0 - 1.0 + (it as f64 + 0.5) * ht;
                let (et, det) = (bump(t - c0), bump_d(t - c0));
                for ix in 0..m {
                    let x2 = c2 - 1.0 + (ix as f64 + 0.5) * hx;
                    let (ch, dch) = (bump(x2 - c2), bump_d(x2 - c2));
                    let sign = if x2.floor().rem_euclid(2.0) == 0.0 { 1.0 } else { -1.0 };
                    for is in 0..m {
                        let s = -w + (is as f64 + 0.5) * hs;
                        let (ps, dps) = (bump(s / w), bump_d(s / w) / w);
                        let (u, f) = if s < 0.0 { (ub, fb) } else { ([3.0 * cb, 3.0 * sign * sb], fa) };
                        let phi_t = -dps * ch * et + ps * ch * det;
                        let phi_1 = dps * ch * et;
                        let phi_2 = dps * ch * et + ps * dch * et;
                        for a in 0..2 {
                            acc[a] += u[a] * phi_t + f[0] * u[a] * phi_1 + f[1] * u[a] * phi_2;
                        }
                    }
                }
            }
            let vol = ht * hs * hx;
            let norm = (32.0 / 35.0) * (32.0 / 35.0);
            Ok((acc[0] * vol).hypot(acc[1] * vol) / norm)
        })
        .collect()
}

/// Parameters of the full ill-posedness demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub cos_beta: Rational,
    pub t: Rational,
    /// Box where solutions are compared; inside `region_bound < x1+x2 < t`.
    pub solution_box: Rect,
    pub grid: (usize, usize),
    /// Box where initial data are compared.
    pub data_box: Rect,
    pub levels: (i32, i32),
    pub data_levels: (i32, i32),
    pub region_bound: Rational,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            cos_beta: Rational::new(1, 3).expect("const"),
            t: 64.into(),
            solution_box: Rect::new(Point2::new(18.into(), 18.into()), Point2::new(19.into(), 19.into())).expect("box"),
            grid: (64, 64),
            data_box: Rect::new(Point2::origin(), Point2::new(4.into(), 4.into())).expect("box"),
            levels: (1, 5),
            data_levels: (1, 6),
            region_bound: 32.into(),
        }
    }
}

/// Comb window around a box with a margin for the displacement of
/// trajectories.
pub fn window_around(bbox: &Rect, margin: &Rational) -> CombWindow {
    CombWindow {
        columns: (&bbox.lo().x1 - margin, &bbox.hi().x1 + margin),
        rows: (&bbox.lo().x2 - margin, &bbox.hi().x2 + margin),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataDistance {
    pub n: i32,
    pub m: i32,
    pub distance: Rational,
    /// `distance * 2^n`.
    pub measured_c: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionDistance {
    pub n: i32,
    pub m: i32,
    pub l1: L1Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub data: Vec<DataDistance>,
    pub strip_constant: Rational,
    pub solutions: Vec<SolutionDistance>,
    pub patterns: Vec<AnglePattern>,
    pub area: Rational,
    pub sin_beta: f64,
}

pub fn run_demo(cfg: &DemoConfig, flux: &dyn PlanarFlux) -> Result<DemoReport, IllPosedError> {
    let beta = Angle::from_cos(cfg.cos_beta.clone())?;
    let (d0, d1) = cfg.data_levels;
    let data_window = window_around(&cfg.data_box, &Rational::one());
    let mut data = Vec::new();
    for n in d0..d1 {
        for m in (n + 1)..=d1 {
            let distance = initial_data_distance(n, m, &cfg.data_box, &data_window)?;
            data.push(DataDistance { n, m, measured_c: distance.mul_pow2(n), distance });
        }
    }
    let strip_c = (d0..d1).map(|n| strip_constant(n, d1, &cfg.data_box)).max().unwrap_or_else(Rational::zero);

    let grid = Grid::new(cfg.solution_box.clone(), cfg.grid.0, cfg.grid.1)?;
    let window = window_around(&cfg.solution_box, &Rational::from(3));
    let (l0, l1) = cfg.levels;
    let mut sampled = Vec::new();
    for n in l0..=l1 {
        let sol = Solution::new(n, beta.clone(), &window, flux)?;
        check_region(&grid.bbox, &cfg.t, &cfg.region_bound)?;
        sampled.push(sample_solution(&sol, &cfg.t, &grid)?);
    }
    let mut solutions = Vec::new();
    for (i, a) in sampled.iter().enumerate() {
        for b in &sampled[i + 1..] {
            solutions.push(SolutionDistance { n: a.n, m: b.n, l1: l1_distance(a, b) });
        }
    }
    Ok(DemoReport {
        data,
        strip_constant: strip_c,
        solutions,
        patterns: sampled.iter().map(AnglePattern::from_samples).collect(),
        area: cfg.solution_box.area(),
        sin_beta: beta.sin(),
    })
}
