//! Comb constructions: arrays of moving rectangles whose passage shifts
//! points according to their binary digits.
//!
//! At level `k` (tooth scale `h = 2^-k`) three arrays travel through the
//! plane, each confined to a diagonal strip `x1 + x2 in h [lo, hi]`:
//!
//! | kind          | density | motion | tooth       | strip      | shift                         |
//! |---------------|---------|--------|-------------|------------|-------------------------------|
//! | `Sharp`       | 4       | `+e2`  | `h x 3h`    | `[28, 32]` | `+h e2` iff `alpha_k = 0`     |
//! | `Flat`        | 2       | `+e1`  | `3h x h`    | `[22, 27]` | `-h e1` iff `beta_k != beta_{k+1}` |
//! | `TildeSharp`  | 4       | `+e2`  | `h x 3h/2`  | `[16, 21]` | `+h/2 e2` iff `alpha_k = 0`   |
//!
//! A point dwelling in a density-4 tooth moves with `e2/4` while the tooth
//! moves with `e2`, so a tooth of height `H` lifts it by `H/3`. In a density-2
//! tooth it moves with `-e1/2` against a tooth moving with `e1`, so a width
//! `W` pushes it left by `W/3`. Sharp and tilde arrays move together and the
//! flat array moves along `e1 - e2` relative to them, which preserves
//! `x1 + x2`; disjoint strips therefore never meet.
//!
//! The composition `Psi_k = tilde o flat o sharp` moves the digit `beta_k` of
//! `x2` to position `k + 1`.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::{digit, DigitIndex, NumError, Rational};
use crate::field::{DensityField, DisjointnessReport, FieldError, Horizon, MovingPatch};
use crate::flux::{CounterexampleFlux, PlanarFlux};
use crate::geometry::{union_in_strip, DiagonalStrip, GeometryError, Point2, Rect, RectUnion, Vec2};
use crate::tracer::{eventual_shift, TraceError, TraceOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CombError {
    #[error("{kind:?} comb at level {k} leaves its strip [{lo}, {hi}]")]
    OutsideStrip { kind: CombKind, k: DigitIndex, lo: Box<Rational>, hi: Box<Rational> },
    #[error("digit oracle needs nonnegative dyadic coordinates, got {0}")]
    OracleDomain(Box<Point2>),
    #[error("comb needs at least one tooth")]
    NoTeeth,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombKind {
    Sharp,
    Flat,
    TildeSharp,
}

impl CombKind {
    pub const ALL: [CombKind; 3] = [CombKind::Sharp, CombKind::Flat, CombKind::TildeSharp];

    /// Strip bounds in units of `2^-k`.
    pub fn strip_units(self) -> (i64, i64) {
        match self {
            CombKind::Sharp => (28, 32),
            CombKind::Flat => (22, 27),
            CombKind::TildeSharp => (16, 21),
        }
    }

    pub fn strip(self, k: DigitIndex) -> DiagonalStrip {
        let (lo, hi) = self.strip_units();
        let h = Rational::pow2(-k);
        DiagonalStrip::new(&h * &Rational::from(lo), &h * &Rational::from(hi)).expect("lo < hi")
    }

    pub fn density(self) -> Rational {
        match self {
            CombKind::Flat => Rational::from(2),
            _ => Rational::from(4),
        }
    }

    /// Shift magnitude produced at level `k`.
    pub fn shift_size(self, k: DigitIndex) -> Rational {
        match self {
            CombKind::TildeSharp => Rational::pow2(-k - 1),
            _ => Rational::pow2(-k),
        }
    }
}

/// Direction in which flat teeth travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatMotion {
    /// `x - t e1 in Q`: the only choice compatible with Rankine-Hugoniot.
    #[default]
    Right,
    Left,
}

/// Geometry of one comb array.
///
/// Tooth `m` of a sharp or tilde comb occupies the column
/// `[2 m h + phase, (2 m + 1) h + phase)`; tooth `m` of a flat comb occupies
/// the row `[2 m h + phase, (2 m + 1) h + phase)`. The lower-left corner of
/// every tooth lies on the line `x1 + x2 = offset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombSpec {
    pub k: DigitIndex,
    pub kind: CombKind,
    pub first_tooth: i64,
    pub tooth_count: usize,
    pub offset: Rational,
    pub phase: Rational,
    #[serde(default)]
    pub flat_motion: FlatMotion,
}

impl CombSpec {
    /// Default placement: teeth aligned with the digit loci, leading corner
    /// at the bottom of the strip.
    pub fn new(kind: CombKind, k: DigitIndex, first_tooth: i64, tooth_count: usize) -> Self {
        let h = Rational::pow2(-k);
        let (lo, _) = kind.strip_units();
        let phase = match kind {
            CombKind::Flat => Rational::pow2(-k - 1),
            _ => Rational::zero(),
        };
        CombSpec {
            k,
            kind,
            first_tooth,
            tooth_count,
            offset: &h * &Rational::from(lo),
            phase,
            flat_motion: FlatMotion::Right,
        }
    }

    /// Teeth whose bands cover the digit-axis interval `[lo, hi)`.
    pub fn covering(kind: CombKind, k: DigitIndex, lo: &Rational, hi: &Rational) -> Self {
        let mut spec = CombSpec::new(kind, k, 0, 1);
        let period = Rational::pow2(1 - k);
        let first = ((lo - &spec.phase) / &period).floor_i64().expect("window fits i64") - 1;
        let last = ((hi - &spec.phase) / &period).floor_i64().expect("window fits i64") + 1;
        spec.first_tooth = first;
        spec.tooth_count = (last - first + 1) as usize;
        spec
    }

    pub fn h(&self) -> Rational {
        Rational::pow2(-self.k)
    }

    pub fn tooth_size(&self) -> (Rational, Rational) {
        let h = self.h();
        match self.kind {
            CombKind::Sharp => (h.clone(), &h * &Rational::from(3)),
            CombKind::Flat => (&h * &Rational::from(3), h),
            CombKind::TildeSharp => (h.clone(), &h * &Rational::new(3, 2).expect("const")),
        }
    }

    pub fn velocity(&self) -> Vec2 {
        match (self.kind, self.flat_motion) {
            (CombKind::Flat, FlatMotion::Right) => Vec2::e1(),
            (CombKind::Flat, FlatMotion::Left) => -Vec2::e1(),
            _ => Vec2::e2(),
        }
    }

    pub fn teeth(&self) -> Result<Vec<Rect>, CombError> {
        let h = self.h();
        let period = &h * &Rational::from(2);
        let (w, ht) = self.tooth_size();
        (0..self.tooth_count as i64)
            .map(|i| {
                let band = &(&period * &Rational::from(self.first_tooth + i)) + &self.phase;
                let lo = match self.kind {
                    CombKind::Flat => Point2::new(&self.offset - &band, band),
                    _ => Point2::new(band.clone(), &self.offset - &band),
                };
                Ok(Rect::with_size(lo, w.clone(), ht.clone())?)
            })
            .collect()
    }
}

/// Builds the moving patch of a comb, checking strip containment.
pub fn build_comb(spec: &CombSpec) -> Result<MovingPatch, CombError> {
    if spec.tooth_count == 0 {
        return Err(CombError::NoTeeth);
    }
    let support = RectUnion::new(spec.teeth()?)?;
    let strip = spec.kind.strip(spec.k);
    if !union_in_strip(&support, &strip) {
        return Err(CombError::OutsideStrip {
            kind: spec.kind,
            k: spec.k,
            lo: Box::new(strip.lo_sum().clone()),
            hi: Box::new(strip.hi_sum().clone()),
        });
    }
    Ok(MovingPatch::new(spec.kind.density(), spec.velocity(), support)?)
}

/// `Q# = U_{j even} [j, j+1) x [j, j+3)`, density 4, moving with `e2`.
pub fn unit_sharp_comb(range: RangeInclusive<i64>) -> Result<MovingPatch, CombError> {
    let rects = range
        .filter(|j| j.rem_euclid(2) == 0)
        .map(|j| Rect::with_size(Point2::new(j.into(), j.into()), 1.into(), 3.into()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MovingPatch::new(4.into(), Vec2::e2(), RectUnion::new(rects)?)?)
}

/// `Qb = U_{j even} [j, j+3) x [j, j+1)`, density 2, moving with `e1`.
pub fn unit_flat_comb(range: RangeInclusive<i64>) -> Result<MovingPatch, CombError> {
    let rects = range
        .filter(|j| j.rem_euclid(2) == 0)
        .map(|j| Rect::with_size(Point2::new(j.into(), j.into()), 3.into(), 1.into()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MovingPatch::new(2.into(), Vec2::e1(), RectUnion::new(rects)?)?)
}

/// Rectangle of the plane a comb family must serve: sharp and tilde teeth
/// cover `columns` (an `x1` range), flat teeth cover `rows` (an `x2` range).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombWindow {
    pub columns: (Rational, Rational),
    pub rows: (Rational, Rational),
}

impl CombWindow {
    pub fn square(lo: Rational, hi: Rational) -> Self {
        CombWindow { columns: (lo.clone(), hi.clone()), rows: (lo, hi) }
    }
}

/// The three comb arrays of one level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCombs {
    pub sharp: CombSpec,
    pub flat: CombSpec,
    pub tilde: CombSpec,
}

impl LevelCombs {
    pub fn covering(k: DigitIndex, window: &CombWindow) -> Self {
        let (c0, c1) = &window.columns;
        let (r0, r1) = &window.rows;
        LevelCombs {
            sharp: CombSpec::covering(CombKind::Sharp, k, c0, c1),
            flat: CombSpec::covering(CombKind::Flat, k, r0, r1),
            tilde: CombSpec::covering(CombKind::TildeSharp, k, c0, c1),
        }
    }

    pub fn specs(&self) -> [&CombSpec; 3] {
        [&self.sharp, &self.flat, &self.tilde]
    }

    pub fn patches(&self) -> Result<Vec<MovingPatch>, CombError> {
        self.specs().into_iter().map(build_comb).collect()
    }

    pub fn field(&self) -> Result<DensityField, CombError> {
        Ok(DensityField::new(3.into(), self.patches()?, Horizon::unbounded())?)
    }
}

/// Shift a single comb of `kind` at level `k` applies to `p`, from digits.
pub fn shift_property(kind: CombKind, k: DigitIndex, p: &Point2) -> Result<Vec2, CombError> {
    let size = kind.shift_size(k);
    let hit = match kind {
        CombKind::Sharp | CombKind::TildeSharp => digit(&p.x1, k)? == 0,
        CombKind::Flat => digit(&p.x2, k)? != digit(&p.x2, k + 1)?,
    };
    Ok(match (hit, kind) {
        (false, _) => Vec2::origin(),
        (true, CombKind::Flat) => Vec2::new(-size, Rational::zero()),
        (true, _) => Vec2::new(Rational::zero(), size),
    })
}

/// `Psi_k` by digit arithmetic alone: sharp, then flat on the updated `x2`,
/// then tilde on the updated `x1`.
pub fn psi_digit_oracle(k: DigitIndex, p: &Point2) -> Result<Point2, CombError> {
    if p.x1.is_negative() || p.x2.is_negative() || !p.x1.is_dyadic() || !p.x2.is_dyadic() {
        return Err(CombError::OracleDomain(Box::new(p.clone())));
    }
    let mut x = p.clone();
    for kind in CombKind::ALL {
        x = &x + &shift_property(kind, k, &x)?;
    }
    Ok(x)
}

/// Square of sample points `lo + [0, size)^2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRegion {
    pub lo: Point2,
    pub size: Rational,
}

impl SampleRegion {
    /// `[16, 18)^2` scaled up for coarse levels; always ahead of the level's
    /// combs (`x1 + x2 >= 32 h`).
    pub fn default_for(k: DigitIndex) -> Self {
        let s = if k < 0 { Rational::pow2(-k) } else { Rational::one() };
        SampleRegion {
            lo: Point2::new(&s * &Rational::from(16), &s * &Rational::from(16)),
            size: &s * &Rational::from(2),
        }
    }

    /// Comb window covering the region plus the shifts it can undergo.
    pub fn window(&self, k: DigitIndex) -> CombWindow {
        let pad = Rational::pow2(2 - k);
        CombWindow {
            columns: (&self.lo.x1 - &pad, &(&self.lo.x1 + &self.size) + &pad),
            rows: (&self.lo.x2 - &pad, &(&self.lo.x2 + &self.size) + &pad),
        }
    }

    /// Random dyadic points on the odd multiples of `2^-(k+5)`, which avoid
    /// every tooth edge and every edge crossing of the level-`k` combs.
    pub fn sample(&self, k: DigitIndex, count: usize, seed: u64) -> Vec<Point2> {
        let unit = Rational::pow2(-k - 5);
        let cells = (&self.size / &(&unit * &Rational::from(2))).floor_i64().expect("region fits").max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let i = rng.random_range(0..cells);
                let j = rng.random_range(0..cells);
                Point2::new(
                    &self.lo.x1 + &(&unit * &Rational::from(2 * i + 1)),
                    &self.lo.x2 + &(&unit * &Rational::from(2 * j + 1)),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub point: Point2,
    pub traced: Option<Point2>,
    pub expected: Point2,
    pub error: Option<String>,
}

/// Outcome of a sampled shift or `Psi_k` verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiReport {
    pub k: DigitIndex,
    pub samples: usize,
    /// Traced image equals the digit oracle.
    pub oracle_agree: usize,
    /// `beta_{k+1}(Psi_k p) = beta_k(p)`.
    pub digit_agree: usize,
    pub flagged: usize,
    pub disjoint: bool,
    pub rect_count: usize,
    pub mismatches: Vec<Mismatch>,
}

impl PsiReport {
    pub fn passed(&self) -> bool {
        self.disjoint && self.oracle_agree == self.samples && self.digit_agree == self.samples && self.flagged == 0
    }
}

const MAX_REPORTED: usize = 16;

/// Checks `Psi_k` on sampled points: the exact tracer through the level-`k`
/// comb field against the digit oracle, and the digit transfer
/// `beta_k -> beta_{k+1}`.
pub fn verify_psi_with(
    combs: &LevelCombs,
    region: &SampleRegion,
    samples: usize,
    seed: u64,
    opts: &TraceOptions,
) -> Result<PsiReport, CombError> {
    let k = combs.sharp.k;
    let field = combs.field()?;
    let disjoint: DisjointnessReport = field.validate_disjoint();
    let points = region.sample(k, samples, seed);
    let flux = CounterexampleFlux;
    let results: Vec<_> = points
        .par_iter()
        .map(|p| -> Result<_, CombError> {
            let expected = psi_digit_oracle(k, p)?;
            let traced = eventual_shift(&field, &flux, p, opts).map(|s| (p + &s.shift, s.flags.is_clean()));
            Ok((p, expected, traced))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = PsiReport {
        k,
        samples,
        oracle_agree: 0,
        digit_agree: 0,
        flagged: 0,
        disjoint: disjoint.passed(),
        rect_count: field.rect_count(),
        mismatches: Vec::new(),
    };
    for (p, expected, traced) in results {
        match traced {
            Ok((image, clean)) => {
                if !clean {
                    report.flagged += 1;
                }
                let agree = image == expected;
                report.oracle_agree += agree as usize;
                if digit(&image.x2, k + 1)? == digit(&p.x2, k)? {
                    report.digit_agree += 1;
                }
                if !agree && report.mismatches.len() < MAX_REPORTED {
                    report.mismatches.push(Mismatch { point: p.clone(), traced: Some(image), expected, error: None });
                }
            }
            Err(e) => {
                if report.mismatches.len() < MAX_REPORTED {
                    report.mismatches.push(Mismatch { point: p.clone(), traced: None, expected, error: Some(e.to_string()) });
                }
            }
        }
    }
    Ok(report)
}

pub fn verify_psi(k: DigitIndex, samples: usize, seed: u64) -> Result<PsiReport, CombError> {
    let region = SampleRegion::default_for(k);
    let combs = LevelCombs::covering(k, &region.window(k));
    verify_psi_with(&combs, &region, samples, seed, &TraceOptions::default())
}

/// Outcome of checking one comb's shift property on samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftReport {
    pub kind: CombKind,
    pub k: DigitIndex,
    pub samples: usize,
    pub agree: usize,
    pub mismatches: Vec<Mismatch>,
}

impl ShiftReport {
    pub fn passed(&self) -> bool {
        self.agree == self.samples
    }
}

/// Traces sampled points through a single comb and compares with the
/// digit property of its kind.
pub fn verify_shift_property(
    spec: &CombSpec,
    region: &SampleRegion,
    samples: usize,
    seed: u64,
    opts: &TraceOptions,
) -> Result<ShiftReport, CombError> {
    let field = DensityField::new(3.into(), vec![build_comb(spec)?], Horizon::unbounded())?;
    let points = region.sample(spec.k, samples, seed);
    let flux = CounterexampleFlux;
    let outcomes: Vec<(Point2, Vec2, Result<Vec2, TraceError>)> = points
        .into_par_iter()
        .map(|p| {
            let expected = shift_property(spec.kind, spec.k, &p).unwrap_or_default();
            let traced = eventual_shift(&field, &flux, &p, opts).map(|s| s.shift);
            (p, expected, traced)
        })
        .collect();
    let mut report = ShiftReport { kind: spec.kind, k: spec.k, samples, agree: 0, mismatches: Vec::new() };
    for (p, expected, traced) in outcomes {
        match traced {
            Ok(s) if s == expected => report.agree += 1,
            other => {
                if report.mismatches.len() < MAX_REPORTED {
                    let (traced, error) = match other {
                        Ok(s) => (Some(&p + &s), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    report.mismatches.push(Mismatch { expected: &p + &expected, point: p, traced, error });
                }
            }
        }
    }
    Ok(report)
}

/// Eventual shift through one patch (convenience for unit combs).
pub fn patch_shift(patch: &MovingPatch, y: &Point2, flux: &dyn PlanarFlux) -> Result<Vec2, TraceError> {
    let field = DensityField::new(3.into(), vec![patch.clone()], Horizon::unbounded())?;
    Ok(eventual_shift(&field, flux, y, &TraceOptions::default())?.shift)
}

/// CSV `comb,k,x1_lo,x2_lo,x1_hi,x2_hi` of tooth rectangles at `t = 0`.
pub fn geometry_csv(specs: &[CombSpec]) -> Result<String, CombError> {
    let mut out = String::from("comb,k,x1_lo,x2_lo,x1_hi,x2_hi\n");
    for spec in specs {
        let name = match spec.kind {
            CombKind::Sharp => "sharp",
            CombKind::Flat => "flat",
            CombKind::TildeSharp => "tilde_sharp",
        };
        for r in spec.teeth()? {
            out.push_str(&format!("{name},{},{},{},{},{}\n", spec.k, r.lo().x1, r.lo().x2, r.hi().x1, r.hi().x2));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::q;

    fn pt(a: Rational, b: Rational) -> Point2 {
        Point2::new(a, b)
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(psi_digit_oracle(1, &pt(q(1, 4), q(1, 4))).unwrap(), pt(q(1, 4), q(1, 1)));
        assert_eq!(psi_digit_oracle(1, &pt(q(3, 4), q(1, 2))).unwrap(), pt(q(1, 4), q(3, 4)));
        assert_eq!(psi_digit_oracle(1, &pt(q(3, 4), q(3, 4))).unwrap(), pt(q(3, 4), q(3, 4)));
        assert!(matches!(psi_digit_oracle(1, &pt(q(1, 3), q(1, 4))), Err(CombError::OracleDomain(_))));
        assert!(matches!(psi_digit_oracle(1, &pt(q(-1, 4), q(1, 4))), Err(CombError::OracleDomain(_))));
    }

    #[test]
    fn oracle_transfers_digit_exhaustively() {
        // all points of the 2^-6 grid in [1, 5) x [0, 4) at levels 0..3
        for k in 0..4 {
            for i in 64..320 {
                for j in 0..256 {
                    let p = pt(q(i, 64), q(j, 64));
                    let img = psi_digit_oracle(k, &p).unwrap();
                    assert_eq!(digit(&img.x2, k + 1).unwrap(), digit(&p.x2, k).unwrap(), "k={k} p={p}");
                }
            }
        }
    }

    #[test]
    fn teeth_fit_strips_and_sizes() {
        for k in -2..6 {
            for kind in CombKind::ALL {
                let spec = CombSpec::new(kind, k, -3, 7);
                let patch = build_comb(&spec).unwrap();
                assert_eq!(patch.support0.len(), 7);
                let (w, h) = spec.tooth_size();
                assert_eq!(patch.support0.rects()[0].width(), w);
                assert_eq!(patch.support0.rects()[0].height(), h);
                // dwell kinematics: lift H/3 or push W/3 equals the property size
                let shift = match kind {
                    CombKind::Flat => &w / &q(3, 1),
                    _ => &h / &q(3, 1),
                };
                assert_eq!(shift, kind.shift_size(k));
            }
        }
    }

    #[test]
    fn strip_violation_is_rejected() {
        let mut spec = CombSpec::new(CombKind::Sharp, 1, 0, 3);
        spec.offset = &spec.offset + &q(1, 4);
        assert!(matches!(build_comb(&spec), Err(CombError::OutsideStrip { .. })));
        assert!(matches!(build_comb(&CombSpec::new(CombKind::Sharp, 1, 0, 0)), Err(CombError::NoTeeth)));
    }

    #[test]
    fn unit_comb_shifts() {
        let f = CounterexampleFlux;
        let sharp = unit_sharp_comb(-4..=12).unwrap();
        assert_eq!(patch_shift(&sharp, &pt(q(1, 2), q(10, 1)), &f).unwrap(), Vec2::e2());
        assert_eq!(patch_shift(&sharp, &pt(q(3, 2), q(10, 1)), &f).unwrap(), Vec2::origin());
        let flat = unit_flat_comb(-4..=12).unwrap();
        assert_eq!(patch_shift(&flat, &pt(q(10, 1), q(1, 2)), &f).unwrap(), -Vec2::e1());
        assert_eq!(patch_shift(&flat, &pt(q(10, 1), q(3, 2)), &f).unwrap(), Vec2::origin());
    }

    #[test]
    fn single_comb_examples() {
        let f = CounterexampleFlux;
        let region = SampleRegion::default_for(1);
        let window = region.window(1);
        let sharp = build_comb(&CombSpec::covering(CombKind::Sharp, 1, &window.columns.0, &window.columns.1)).unwrap();
        let p = pt(&q(16, 1) + &q(1, 4), q(17, 1));
        assert_eq!(patch_shift(&sharp, &p, &f).unwrap(), pt(0.into(), q(1, 2)));
        let flat = build_comb(&CombSpec::covering(CombKind::Flat, 1, &window.rows.0, &window.rows.1)).unwrap();
        let p = pt(q(17, 1), &q(16, 1) + &q(1, 4));
        assert_eq!(patch_shift(&flat, &p, &f).unwrap(), pt(q(-1, 2), 0.into()));
        let tilde = build_comb(&CombSpec::covering(CombKind::TildeSharp, 1, &window.columns.0, &window.columns.1)).unwrap();
        let p = pt(&q(16, 1) + &q(3, 4), q(17, 1));
        assert_eq!(patch_shift(&tilde, &p, &f).unwrap(), Vec2::origin());
    }

    #[test]
    fn level_families_never_overlap() {
        for k in 0..4 {
            let region = SampleRegion::default_for(k);
            let field = LevelCombs::covering(k, &region.window(k)).field().unwrap();
            assert!(field.validate_disjoint().passed(), "k={k}");
            assert!(field.verify_rankine_hugoniot(&CounterexampleFlux).unwrap().passed());
        }
    }

    #[test]
    fn left_moving_flat_comb_fails_rankine_hugoniot() {
        let mut spec = CombSpec::new(CombKind::Flat, 0, 0, 4);
        spec.flat_motion = FlatMotion::Left;
        let field = DensityField::new(3.into(), vec![build_comb(&spec).unwrap()], Horizon::unbounded()).unwrap();
        assert!(!field.verify_rankine_hugoniot(&CounterexampleFlux).unwrap().passed());
    }

    #[test]
    fn psi_small_levels_pass() {
        for k in [0, 1, 3] {
            let rep = verify_psi(k, 200, 7).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn misplaced_flat_comb_is_detected() {
        let k = 1;
        let region = SampleRegion::default_for(k);
        let mut combs = LevelCombs::covering(k, &region.window(k));
        combs.flat.phase = Rational::zero();
        let rep = verify_psi_with(&combs, &region, 200, 3, &TraceOptions::default()).unwrap();
        assert!(rep.oracle_agree < rep.samples);
        assert!(!rep.passed());
    }

    #[test]
    fn shift_properties_hold() {
        for k in [0, 2] {
            let region = SampleRegion::default_for(k);
            let w = region.window(k);
            for kind in CombKind::ALL {
                let spec = match kind {
                    CombKind::Flat => CombSpec::covering(kind, k, &w.rows.0, &w.rows.1),
                    _ => CombSpec::covering(kind, k, &w.columns.0, &w.columns.1),
                };
                let rep = verify_shift_property(&spec, &region, 100, 11, &TraceOptions::default()).unwrap();
                assert!(rep.passed(), "{rep:?}");
            }
        }
    }

    #[test]
    fn truncation_soundness() {
        let k = 2;
        let region = SampleRegion::default_for(k);
        let small = LevelCombs::covering(k, &region.window(k));
        let mut big = small.clone();
        for spec in [&mut big.sharp, &mut big.flat, &mut big.tilde] {
            spec.first_tooth -= 5;
            spec.tooth_count += 12;
        }
        let f = CounterexampleFlux;
        let (fs, fb) = (small.field().unwrap(), big.field().unwrap());
        for p in region.sample(k, 100, 5) {
            let a = eventual_shift(&fs, &f, &p, &TraceOptions::default()).unwrap().shift;
            let b = eventual_shift(&fb, &f, &p, &TraceOptions::default()).unwrap().shift;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn geometry_csv_lists_teeth() {
        let csv = geometry_csv(&[CombSpec::new(CombKind::Sharp, 0, 0, 2)]).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "sharp,0,0,28,1,31");
        assert_eq!(lines[2], "sharp,0,2,26,3,29");
    }
}
