//! One-dimensional Riemann problems.
//!
//! Scalar fans come from the convex (rising data) or concave (falling data)
//! envelope of the flux between the two states. The vector problem
//! `u_t + (f(|u|) u)_x = 0` admits, for data along a common line, the
//! embedded scalar fan, and for data of equal modulus a single contact at
//! speed `f(|u|)`. A Godunov scheme with the exact Riemann flux serves as an
//! independent check of the fans.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flux::{Polynomial, ScalarFlux};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiemannError {
    #[error("envelope construction failed: {0}")]
    Envelope(String),
    #[error("states {0:?} and {1:?} are not parallel")]
    NotParallel([f64; 2], [f64; 2]),
    #[error("contact needs equal moduli, got {0} and {1}")]
    ModulusMismatch(f64, f64),
    #[error("invalid scheme parameters: {0}")]
    Scheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Wave {
    Shock { left: f64, right: f64, speed: f64 },
    Rarefaction { left: f64, right: f64, speed_lo: f64, speed_hi: f64 },
    Contact { left: f64, right: f64, speed: f64 },
}

impl Wave {
    pub fn left(&self) -> f64 {
        match *self {
            Wave::Shock { left, .. } | Wave::Rarefaction { left, .. } | Wave::Contact { left, .. } => left,
        }
    }

    pub fn right(&self) -> f64 {
        match *self {
            Wave::Shock { right, .. } | Wave::Rarefaction { right, .. } | Wave::Contact { right, .. } => right,
        }
    }

    pub fn speeds(&self) -> (f64, f64) {
        match *self {
            Wave::Shock { speed, .. } | Wave::Contact { speed, .. } => (speed, speed),
            Wave::Rarefaction { speed_lo, speed_hi, .. } => (speed_lo, speed_hi),
        }
    }
}

/// Self-similar solution `rho(x / t)` of a scalar Riemann problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFan {
    pub left: f64,
    pub right: f64,
    pub waves: Vec<Wave>,
}

impl WaveFan {
    /// State at `xi = x / t`.
    pub fn sample(&self, flux: &dyn ScalarFlux, xi: f64) -> f64 {
        let mut state = self.left;
        for w in &self.waves {
            match *w {
                Wave::Shock { speed, .. } | Wave::Contact { speed, .. } => {
                    if xi < speed {
                        return state;
                    }
                }
                Wave::Rarefaction { left, right, speed_lo, speed_hi } => {
                    if xi < speed_lo {
                        return state;
                    }
                    if xi <= speed_hi {
                        return invert_derivative(flux, left, right, xi);
                    }
                }
            }
            state = w.right();
        }
        state
    }

    /// Largest `|s (l - r) - (f(l) - f(r))|` over shocks and contacts.
    pub fn rh_defect(&self, flux: &dyn ScalarFlux) -> f64 {
        self.waves
            .iter()
            .filter_map(|w| match *w {
                Wave::Shock { left, right, speed } | Wave::Contact { left, right, speed } => {
                    Some((speed * (left - right) - (flux.value(left) - flux.value(right))).abs())
                }
                Wave::Rarefaction { .. } => None,
            })
            .fold(0.0, f64::max)
    }

    /// Oleinik chord condition at `points` interior states of every shock:
    /// the flux stays on the admissible side of the chord.
    pub fn oleinik_ok(&self, flux: &dyn ScalarFlux, points: usize, tol: f64) -> bool {
        self.waves.iter().all(|w| match *w {
            Wave::Shock { left, right, speed } => (1..=points).all(|i| {
                let u = left + (right - left) * i as f64 / (points + 1) as f64;
                let chord = flux.value(left) + speed * (u - left);
                let gap = flux.value(u) - chord;
                if left < right {
                    gap >= -tol
                } else {
                    gap <= tol
                }
            }),
            _ => true,
        })
    }

    pub fn speeds_monotone(&self, tol: f64) -> bool {
        self.waves.windows(2).all(|w| w[0].speeds().1 <= w[1].speeds().0 + tol)
            && self.waves.iter().all(|w| w.speeds().0 <= w.speeds().1 + tol)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,left,right,speed_lo,speed_hi\n");
        for w in &self.waves {
            let kind = match w {
                Wave::Shock { .. } => "shock",
                Wave::Rarefaction { .. } => "rarefaction",
                Wave::Contact { .. } => "contact",
            };
            let (a, b) = w.speeds();
            let _ = writeln!(out, "{kind},{},{},{a},{b}", w.left(), w.right());
        }
        out
    }
}

/// Solves `f'(rho) = xi` on the segment between `a` and `b` by bisection.
fn invert_derivative(flux: &dyn ScalarFlux, a: f64, b: f64, xi: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let g = |u: f64| flux.derivative(u) - xi;
    let glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

const HULL_POINTS: usize = 4096;
const TANGENT_TOL: f64 = 1e-12;

/// `g(c) = f(c) - f(a) - f'(c) (c - a)`: zero when the chord from `a`
/// touches the flux tangentially at `c`.
fn tangency_gap(flux: &dyn ScalarFlux, a: f64, c: f64) -> f64 {
    flux.value(c) - flux.value(a) - flux.derivative(c) * (c - a)
}

/// Tangency point near `guess` of a chord anchored at `a`.
fn tangent_from(flux: &dyn ScalarFlux, a: f64, guess: f64, spacing: f64) -> Result<f64, RiemannError> {
    if let Some(p) = flux.as_polynomial() {
        if p.degree() == 3 {
            // g(c) = -(c - a)^2 (p3 (a + 2c) + p2)
            let (p2, p3) = (p.coeffs[2], p.coeffs[3]);
            return Ok(-(p2 + p3 * a) / (2.0 * p3));
        }
    }
    for width in [2.0, 4.0, 8.0, 16.0] {
        let (mut lo, mut hi) = (guess - width * spacing, guess + width * spacing);
        let (glo, ghi) = (tangency_gap(flux, a, lo), tangency_gap(flux, a, hi));
        if glo == 0.0 {
            return Ok(lo);
        }
        if (glo > 0.0) == (ghi > 0.0) {
            continue;
        }
        while hi - lo > TANGENT_TOL * (1.0 + lo.abs()) {
            let mid = 0.5 * (lo + hi);
            if (tangency_gap(flux, a, mid) > 0.0) == (glo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(0.5 * (lo + hi));
    }
    Err(RiemannError::Envelope(format!("no tangency near {guess} for chord from {a}")))
}

/// Hull of `(x_i, f(x_i))`: lower when `lower`, upper otherwise; indices.
fn hull(xs: &[f64], fs: &[f64], lower: bool) -> Vec<usize> {
    let mut h: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while h.len() >= 2 {
            let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
            let cross = (xs[b] - xs[a]) * (fs[i] - fs[a]) - (fs[b] - fs[a]) * (xs[i] - xs[a]);
            let remove = if lower { cross <= 0.0 } else { cross >= 0.0 };
            if remove {
                h.pop();
            } else {
                break;
            }
        }
        h.push(i);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Follow(f64, f64),
    Chord(f64, f64),
}

/// Entropy solution of `rho_t + f(rho)_x = 0` with data `rho_l | rho_r`.
pub fn scalar_riemann(flux: &dyn ScalarFlux, rho_l: f64, rho_r: f64) -> Result<WaveFan, RiemannError> {
    if !(rho_l.is_finite() && rho_r.is_finite()) {
        return Err(RiemannError::Envelope("non-finite state".into()));
    }
    if rho_l == rho_r {
        return Ok(WaveFan { left: rho_l, right: rho_r, waves: Vec::new() });
    }
    let (a, b) = (rho_l.min(rho_r), rho_l.max(rho_r));
    let spacing = (b - a) / HULL_POINTS as f64;
    let xs: Vec<f64> = (0..=HULL_POINTS).map(|i| if i == HULL_POINTS { b } else { a + spacing * i as f64 }).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| flux.value(x)).collect();
    let idx = hull(&xs, &fs, rho_l < rho_r);

    // Group hull edges into maximal runs of following the flux or chords.
    let mut pieces: Vec<(bool, usize, usize)> = Vec::new();
    for w in idx.windows(2) {
        let follow = w[1] - w[0] == 1;
        match pieces.last_mut() {
            Some((f, _, end)) if *f == follow && follow => *end = w[1],
            _ => pieces.push((follow, w[0], w[1])),
        }
    }
    let last = HULL_POINTS;
    // Refine chord endpoints at interior indices to exact tangency.
    let mut refined: Vec<Piece> = Vec::new();
    for &(follow, i, j) in &pieces {
        if follow {
            refined.push(Piece::Follow(xs[i], xs[j]));
            continue;
        }
        let (mut lo, mut hi) = (xs[i], xs[j]);
        match (i == 0, j == last) {
            (true, false) => hi = tangent_from(flux, lo, hi, spacing)?,
            (false, true) => lo = tangent_from(flux, hi, lo, spacing)?,
            (false, false) => {
                for _ in 0..64 {
                    let nlo = tangent_from(flux, hi, lo, spacing)?;
                    let nhi = tangent_from(flux, nlo, hi, spacing)?;
                    let done = (nlo - lo).abs() + (nhi - hi).abs() < TANGENT_TOL;
                    lo = nlo;
                    hi = nhi;
                    if done {
                        break;
                    }
                }
            }
            (true, true) => {}
        }
        refined.push(Piece::Chord(lo, hi));
    }
    // Snap neighbouring follow pieces to the refined chord ends.
    for k in 0..refined.len() {
        if let Piece::Chord(lo, hi) = refined[k] {
            if k > 0 {
                if let Piece::Follow(s, _) = refined[k - 1] {
                    refined[k - 1] = Piece::Follow(s, lo);
                }
            }
            if k + 1 < refined.len() {
                if let Piece::Follow(_, e) = refined[k + 1] {
                    refined[k + 1] = Piece::Follow(hi, e);
                }
            }
        }
    }
    if rho_l > rho_r {
        refined.reverse();
        for p in &mut refined {
            *p = match *p {
                Piece::Follow(s, e) => Piece::Follow(e, s),
                Piece::Chord(s, e) => Piece::Chord(e, s),
            };
        }
    }
    let waves: Vec<Wave> = refined
        .into_iter()
        .filter_map(|p| match p {
            Piece::Follow(l, r) if l != r => {
                Some(Wave::Rarefaction { left: l, right: r, speed_lo: flux.derivative(l), speed_hi: flux.derivative(r) })
            }
            Piece::Chord(l, r) if l != r => {
                Some(Wave::Shock { left: l, right: r, speed: (flux.value(l) - flux.value(r)) / (l - r) })
            }
            _ => None,
        })
        .collect();
    let fan = WaveFan { left: rho_l, right: rho_r, waves };
    if !fan.speeds_monotone(1e-9) {
        return Err(RiemannError::Envelope(format!("non-monotone wave speeds: {:?}", fan.waves)));
    }
    Ok(fan)
}

/// Extremum of the flux on `[a, b]`: endpoints plus interior critical points.
fn flux_extremum(flux: &dyn ScalarFlux, a: f64, b: f64, want_min: bool) -> f64 {
    let better = |x: f64, y: f64| if want_min { x < y } else { x > y };
    let mut best = flux.value(a);
    let mut consider = |u: f64| {
        if u >= a && u <= b {
            let v = flux.value(u);
            if better(v, best) {
                best = v;
            }
        }
    };
    consider(b);
    match flux.as_polynomial().map(Polynomial::deriv) {
        Some(d) if d.degree() <= 2 => {
            for r in real_roots(&d) {
                consider(r);
            }
        }
        _ => {
            let n = 64;
            for i in 1..n {
                let u = a + (b - a) * i as f64 / n as f64;
                let (ul, ur) = (u - (b - a) / n as f64, u + (b - a) / n as f64);
                let (dl, dr) = (flux.derivative(ul), flux.derivative(ur));
                if (dl > 0.0) != (dr > 0.0) {
                    consider(invert_derivative(flux, ul, ur, 0.0));
                }
            }
        }
    }
    best
}

fn real_roots(p: &Polynomial) -> Vec<f64> {
    let c = |i: usize| p.coeffs.get(i).copied().unwrap_or(0.0);
    match p.degree() {
        1 => vec![-c(0) / c(1)],
        2 => {
            let (a, b, cc) = (c(2), c(1), c(0));
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                Vec::new()
            } else {
                let s = disc.sqrt();
                vec![(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]
            }
        }
        _ => Vec::new(),
    }
}

/// Exact Godunov flux: `min f` on `[l, r]` if `l <= r`, else `max f` on `[r, l]`.
pub fn godunov_flux(flux: &dyn ScalarFlux, l: f64, r: f64) -> f64 {
    if l <= r {
        flux_extremum(flux, l, r, true)
    } else {
        flux_extremum(flux, r, l, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GodunovConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    pub t_end: f64,
    pub cfl: f64,
}

impl Default for GodunovConfig {
    fn default() -> Self {
        GodunovConfig { x_min: -2.0, x_max: 4.0, cells: 4000, t_end: 1.0, cfl: 0.9 }
    }
}

impl GodunovConfig {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }
}

/// Cell averages at `t_end` for Riemann data with the jump at `x = 0`;
/// transmissive boundaries.
pub fn godunov(flux: &dyn ScalarFlux, rho_l: f64, rho_r: f64, cfg: &GodunovConfig) -> Result<Vec<f64>, RiemannError> {
    if cfg.cells == 0 || cfg.x_max <= cfg.x_min || cfg.cfl <= 0.0 || cfg.cfl > 1.0 || cfg.t_end < 0.0 {
        return Err(RiemannError::Scheme(format!("{cfg:?}")));
    }
    let dx = cfg.dx();
    let mut u: Vec<f64> = (0..cfg.cells)
        .map(|i| {
            let (a, b) = (cfg.x_min + i as f64 * dx, cfg.x_min + (i + 1) as f64 * dx);
            if b <= 0.0 {
                rho_l
            } else if a >= 0.0 {
                rho_r
            } else {
                (rho_l * (-a) + rho_r * b) / dx
            }
        })
        .collect();
    let (lo, hi) = (rho_l.min(rho_r), rho_l.max(rho_r));
    let n = 256;
    let smax = (0..=n).map(|i| flux.derivative(lo + (hi - lo) * i as f64 / n as f64).abs()).fold(0.0, f64::max);
    let dt_max = if smax > 0.0 { cfg.cfl * dx / smax } else { cfg.t_end.max(f64::MIN_POSITIVE) };
    let mut t = 0.0;
    let mut fl = vec![0.0; cfg.cells + 1];
    while t < cfg.t_end {
        let dt = dt_max.min(cfg.t_end - t);
        for (k, f) in fl.iter_mut().enumerate() {
            let l = u[k.saturating_sub(1)];
            let r = u[k.min(cfg.cells - 1)];
            *f = godunov_flux(flux, l, r);
        }
        for i in 0..cfg.cells {
            u[i] -= dt / dx * (fl[i + 1] - fl[i]);
        }
        t += dt;
    }
    Ok(u)
}

/// `sum_i |U_i - mean of the fan over cell i| dx`, fan averages by a
/// 16-point midpoint rule.
pub fn l1_to_fan(flux: &dyn ScalarFlux, fan: &WaveFan, u: &[f64], cfg: &GodunovConfig) -> f64 {
    let dx = cfg.dx();
    let sub = 16;
    u.iter()
        .enumerate()
        .map(|(i, &ui)| {
            let a = cfg.x_min + i as f64 * dx;
            let mean = (0..sub).map(|j| fan.sample(flux, (a + (j as f64 + 0.5) * dx / sub as f64) / cfg.t_end)).sum::<f64>()
                / sub as f64;
            (ui - mean).abs() * dx
        })
        .sum()
}

/// `g(rho) = f(|rho|) rho`: the flux of a vector solution along a fixed line.
pub struct RadialFlux<'a> {
    pub profile: &'a dyn ScalarFlux,
    poly: Option<Polynomial>,
}

impl<'a> RadialFlux<'a> {
    pub fn new(profile: &'a dyn ScalarFlux) -> Self {
        // f polynomial in even powers only: f(|rho|) rho is the polynomial rho f(rho).
        let poly = profile.as_polynomial().and_then(|p| {
            p.coeffs.iter().enumerate().all(|(i, c)| i % 2 == 0 || *c == 0.0).then(|| {
                let mut c = vec![0.0];
                c.extend_from_slice(&p.coeffs);
                Polynomial::new(c)
            })
        });
        RadialFlux { profile, poly }
    }
}

impl ScalarFlux for RadialFlux<'_> {
    fn value(&self, u: f64) -> f64 {
        self.profile.value(u.abs()) * u
    }

    fn derivative(&self, u: f64) -> f64 {
        self.profile.value(u.abs()) + self.profile.derivative(u.abs()) * u.abs()
    }

    fn as_polynomial(&self) -> Option<&Polynomial> {
        self.poly.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorWaveKind {
    Shock,
    Rarefaction,
    Contact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorWave {
    pub kind: VectorWaveKind,
    pub left: [f64; 2],
    pub right: [f64; 2],
    pub speed_lo: f64,
    pub speed_hi: f64,
}

/// Piecewise description of a vector Riemann solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRiemannSolution {
    pub left: [f64; 2],
    pub right: [f64; 2],
    pub waves: Vec<VectorWave>,
    /// Scalar fan and direction when the solution is an embedding.
    pub embedding: Option<(WaveFan, [f64; 2])>,
}

fn radial_vec(profile: &dyn ScalarFlux, u: [f64; 2]) -> [f64; 2] {
    let f = profile.value(u[0].hypot(u[1]));
    [f * u[0], f * u[1]]
}

impl VectorRiemannSolution {
    pub fn state(&self, profile: &dyn ScalarFlux, xi: f64) -> [f64; 2] {
        if let Some((fan, e)) = &self.embedding {
            let r = fan.sample(&RadialFlux::new(profile), xi);
            return [r * e[0], r * e[1]];
        }
        let mut s = self.left;
        for w in &self.waves {
            if xi < w.speed_lo {
                return s;
            }
            s = w.right;
        }
        s
    }

    /// Largest Rankine-Hugoniot defect over shocks and contacts.
    pub fn rh_defect(&self, profile: &dyn ScalarFlux) -> f64 {
        self.waves
            .iter()
            .filter(|w| w.kind != VectorWaveKind::Rarefaction)
            .map(|w| {
                let (fl, fr) = (radial_vec(profile, w.left), radial_vec(profile, w.right));
                (0..2).map(|a| (w.speed_lo * (w.left[a] - w.right[a]) - (fl[a] - fr[a])).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Scalar fan of `f(|rho|) rho` along the common direction of `ul`, `ur`.
pub fn vector_riemann_scalar_embedding(
    profile: &dyn ScalarFlux,
    ul: [f64; 2],
    ur: [f64; 2],
) -> Result<VectorRiemannSolution, RiemannError> {
    let (nl, nr) = (ul[0].hypot(ul[1]), ur[0].hypot(ur[1]));
    let cross = ul[0] * ur[1] - ul[1] * ur[0];
    if cross.abs() > 1e-12 * (1.0 + nl * nr) {
        return Err(RiemannError::NotParallel(ul, ur));
    }
    let e = if nl > 0.0 {
        [ul[0] / nl, ul[1] / nl]
    } else if nr > 0.0 {
        [ur[0] / nr, ur[1] / nr]
    } else {
        [1.0, 0.0]
    };
    let (a, b) = (ul[0] * e[0] + ul[1] * e[1], ur[0] * e[0] + ur[1] * e[1]);
    let fan = scalar_riemann(&RadialFlux::new(profile), a, b)?;
    let waves = fan
        .waves
        .iter()
        .map(|w| {
            let (l, r) = (w.left(), w.right());
            let (s0, s1) = w.speeds();
            let kind = match w {
                Wave::Shock { .. } => VectorWaveKind::Shock,
                Wave::Rarefaction { .. } => VectorWaveKind::Rarefaction,
                Wave::Contact { .. } => VectorWaveKind::Contact,
            };
            VectorWave { kind, left: [l * e[0], l * e[1]], right: [r * e[0], r * e[1]], speed_lo: s0, speed_hi: s1 }
        })
        .collect();
    Ok(VectorRiemannSolution { left: ul, right: ur, waves, embedding: Some((fan, e)) })
}

/// Single contact at speed `f(|u|)` joining states of equal modulus.
pub fn vector_riemann_contact(
    profile: &dyn ScalarFlux,
    ul: [f64; 2],
    ur: [f64; 2],
) -> Result<VectorRiemannSolution, RiemannError> {
    let (nl, nr) = (ul[0].hypot(ul[1]), ur[0].hypot(ur[1]));
    if (nl - nr).abs() > 1e-12 * (1.0 + nl) {
        return Err(RiemannError::ModulusMismatch(nl, nr));
    }
    let speed = profile.value(nl);
    let waves = if ul == ur {
        Vec::new()
    } else {
        vec![VectorWave { kind: VectorWaveKind::Contact, left: ul, right: ur, speed_lo: speed, speed_hi: speed }]
    };
    Ok(VectorRiemannSolution { left: ul, right: ur, waves, embedding: None })
}

/// Angle profile `theta(s)`, locked to 0 for `s <= 0` and to `pi` for `s >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaProfile {
    /// `pi (35 s^4 - 84 s^5 + 70 s^6 - 20 s^7)`, three times differentiable.
    SmoothStep,
    Constant(f64),
}

impl ThetaProfile {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            ThetaProfile::Constant(c) => c,
            ThetaProfile::SmoothStep => {
                let s = s.clamp(0.0, 1.0);
                PI * s.powi(4) * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s.powi(3))
            }
        }
    }
}

/// Travelling solutions `u_n(t, x) = (cos theta(n (x - t)), sin theta(n (x - t)))`
/// of `u_t + (f(|u|) u)_x = 0` when `f(1) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityFamily {
    pub profile: ThetaProfile,
    pub n: f64,
}

impl ViscosityFamily {
    pub fn new(profile: ThetaProfile, n: f64) -> Self {
        ViscosityFamily { profile, n }
    }

    pub fn u(&self, t: f64, x: f64) -> [f64; 2] {
        let th = self.profile.eval(self.n * (x - t));
        [th.cos(), th.sin()]
    }

    /// Max over a grid of `(t, x)` nodes of the centred residual
    /// `(u(t+k) - u(t-k)) / 2k + (F(u(x+h)) - F(u(x-h))) / 2h` with `k = h/2`.
    pub fn residual(&self, flux: &dyn ScalarFlux, h: f64, t_range: (f64, f64), x_range: (f64, f64), nodes: usize) -> f64 {
        let k = h / 2.0;
        let mut worst = 0.0f64;
        for i in 0..nodes {
            let t = t_range.0 + (t_range.1 - t_range.0) * i as f64 / (nodes - 1).max(1) as f64;
            for j in 0..nodes {
                let x = x_range.0 + (x_range.1 - x_range.0) * j as f64 / (nodes - 1).max(1) as f64;
                let (up, um) = (self.u(t + k, x), self.u(t - k, x));
                let (fp, fm) = (radial_vec(flux, self.u(t, x + h)), radial_vec(flux, self.u(t, x - h)));
                for a in 0..2 {
                    let r = (up[a] - um[a]) / (2.0 * k) + (fp[a] - fm[a]) / (2.0 * h);
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }

    /// `int |u_n(0, x) - jump(x)| dx` over `[-1, 1]` against `e1 | -e1` at 0.
    pub fn distance_to_jump(&self, cells: usize) -> f64 {
        let dx = 2.0 / cells as f64;
        (0..cells)
            .map(|i| {
                let x = -1.0 + (i as f64 + 0.5) * dx;
                let u = self.u(0.0, x);
                let j = if x < 0.0 { [1.0, 0.0] } else { [-1.0, 0.0] };
                (u[0] - j[0]).hypot(u[1] - j[1]) * dx
            })
            .sum()
    }
}

/// Particle path `x' = g(rho) / rho` through a positive scalar fan from `(0, y)`,
/// classical fourth-order steps.
pub fn particle_path(flux: &dyn ScalarFlux, fan: &WaveFan, y: f64, t_end: f64, steps: usize) -> f64 {
    let vel = |t: f64, x: f64| {
        let rho = if t <= 0.0 {
            if x < 0.0 {
                fan.left
            } else {
                fan.right
            }
        } else {
            fan.sample(flux, x / t)
        };
        flux.value(rho) / rho
    };
    let dt = t_end / steps as f64;
    let mut x = y;
    for s in 0..steps {
        let t = s as f64 * dt;
        let k1 = vel(t, x);
        let k2 = vel(t + dt / 2.0, x + dt / 2.0 * k1);
        let k3 = vel(t + dt / 2.0, x + dt / 2.0 * k2);
        let k4 = vel(t + dt, x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

/// CSV `t,x,rho` sampling of a fan on a space-time grid.
pub fn fan_space_time_csv(flux: &dyn ScalarFlux, fan: &WaveFan, ts: &[f64], xs: &[f64]) -> String {
    let mut out = String::from("t,x,rho\n");
    for &t in ts {
        for &x in xs {
            let rho = if t > 0.0 {
                fan.sample(flux, x / t)
            } else if x < 0.0 {
                fan.left
            } else {
                fan.right
            };
            let _ = writeln!(out, "{t},{x},{rho}");
        }
    }
    out
}
