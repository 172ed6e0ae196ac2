//! Exact algebra of piecewise-linear comparison functions.
//!
//! Every gain, decay rate, and sandwich bound in this crate is represented
//! as a [`PLFunction`]: a monotone piecewise-linear function on `[0, ∞)`
//! anchored at the origin, with linear extrapolation beyond its last
//! breakpoint. Composition, inversion, pointwise max/min, addition, and
//! scaling are all closed over this representation and computed exactly
//! (up to f64 rounding), so certificates survive deep chains of operations
//! without accumulating interpolation error.
//!
//! A function is one of three kinds: the zero gain (absent edge), class K
//! (strictly increasing, zero at zero), or class K∞ (class K and unbounded,
//! hence invertible).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

/// Relative span of the geometric check grids: the smallest grid point is
/// `s_max * GRID_SPAN`.
pub const GRID_SPAN: f64 = 1e-6;

/// Errors from constructing or manipulating piecewise-linear functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlError {
    /// Inversion requires an unbounded (class K∞) function.
    NotInvertible,
    /// Breakpoint list violates a structural invariant.
    InvalidBreakpoints(&'static str),
    /// Sampled data is not strictly increasing.
    NotMonotone,
}

impl fmt::Display for PlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlError::NotInvertible => write!(f, "function is not class Kinf, cannot invert"),
            PlError::InvalidBreakpoints(msg) => write!(f, "invalid breakpoints: {msg}"),
            PlError::NotMonotone => write!(f, "sampled values are not strictly increasing"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PlError {}

/// Monotonicity class of a [`PLFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Identically zero; stands for an absent gain.
    Zero,
    /// Strictly increasing, zero at zero, possibly bounded.
    ClassK,
    /// Strictly increasing, zero at zero, unbounded (positive tail slope).
    ClassKinf,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlWire {
    kind: Kind,
    breakpoints: Vec<(f64, f64)>,
    tail_slope: f64,
}

/// A monotone piecewise-linear comparison function on `[0, ∞)`.
///
/// Invariants: the first breakpoint is `(0, 0)`, abscissas are strictly
/// increasing, ordinates are strictly increasing for the class-K kinds, and
/// the tail slope is positive exactly when the kind is class K∞. Values are
/// immutable after construction; all operations return new functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlWire", into = "PlWire")]
pub struct PLFunction {
    kind: Kind,
    breakpoints: Vec<(f64, f64)>,
    tail_slope: f64,
}

impl TryFrom<PlWire> for PLFunction {
    type Error = PlError;
    fn try_from(w: PlWire) -> Result<Self, PlError> {
        PLFunction::from_breakpoints(w.kind, w.breakpoints, w.tail_slope)
    }
}

impl From<PLFunction> for PlWire {
    fn from(f: PLFunction) -> Self {
        PlWire {
            kind: f.kind,
            breakpoints: f.breakpoints,
            tail_slope: f.tail_slope,
        }
    }
}

impl PLFunction {
    /// The zero gain.
    pub fn zero() -> Self {
        PLFunction {
            kind: Kind::Zero,
            breakpoints: vec![(0.0, 0.0)],
            tail_slope: 0.0,
        }
    }

    /// The identity function.
    pub fn identity() -> Self {
        PLFunction {
            kind: Kind::ClassKinf,
            breakpoints: vec![(0.0, 0.0), (1.0, 1.0)],
            tail_slope: 1.0,
        }
    }

    /// The linear gain `s ↦ c·s` (`c = 0` yields the zero gain).
    ///
    /// Panics if `c` is negative or non-finite.
    pub fn linear(c: f64) -> Self {
        assert!(c.is_finite() && c >= 0.0, "linear gain needs c >= 0");
        if c == 0.0 {
            return Self::zero();
        }
        PLFunction {
            kind: Kind::ClassKinf,
            breakpoints: vec![(0.0, 0.0), (1.0, c)],
            tail_slope: c,
        }
    }

    /// Builds a function from explicit breakpoints, validating all kind
    /// invariants.
    pub fn from_breakpoints(
        kind: Kind,
        breakpoints: Vec<(f64, f64)>,
        tail_slope: f64,
    ) -> Result<Self, PlError> {
        if breakpoints.is_empty() {
            return Err(PlError::InvalidBreakpoints("empty breakpoint list"));
        }
        if breakpoints[0] != (0.0, 0.0) {
            return Err(PlError::InvalidBreakpoints(
                "first breakpoint must be (0, 0)",
            ));
        }
        if !tail_slope.is_finite() || tail_slope < 0.0 {
            return Err(PlError::InvalidBreakpoints(
                "tail slope must be finite and >= 0",
            ));
        }
        for w in breakpoints.windows(2) {
            let ((s0, v0), (s1, v1)) = (w[0], w[1]);
            if !s1.is_finite() || !v1.is_finite() {
                return Err(PlError::InvalidBreakpoints("non-finite breakpoint"));
            }
            if s1 <= s0 {
                return Err(PlError::InvalidBreakpoints(
                    "abscissas must strictly increase",
                ));
            }
            match kind {
                Kind::Zero => {
                    if v1 != 0.0 {
                        return Err(PlError::InvalidBreakpoints("zero gain must be zero"));
                    }
                }
                Kind::ClassK | Kind::ClassKinf => {
                    if v1 <= v0 {
                        return Err(PlError::InvalidBreakpoints(
                            "ordinates must strictly increase",
                        ));
                    }
                }
            }
        }
        if kind == Kind::Zero && tail_slope != 0.0 {
            return Err(PlError::InvalidBreakpoints("zero gain must have zero tail"));
        }
        if kind == Kind::ClassKinf && tail_slope <= 0.0 {
            return Err(PlError::InvalidBreakpoints(
                "class Kinf needs positive tail slope",
            ));
        }
        Ok(PLFunction {
            kind,
            breakpoints,
            tail_slope,
        })
    }

    /// Internal constructor for algebra results: inserts the origin, drops
    /// duplicate abscissas and rounding-induced ordinate ties, and removes
    /// exactly collinear interior points.
    fn normalized(kind: Kind, points: Vec<(f64, f64)>, tail_slope: f64) -> Self {
        let mut bps: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 1);
        bps.push((0.0, 0.0));
        for (s, v) in points {
            let &(ls, lv) = bps.last().unwrap();
            if s <= ls || v <= lv {
                continue;
            }
            // Drop the middle point of an exactly collinear triple.
            if bps.len() >= 2 {
                let (ps, pv) = bps[bps.len() - 2];
                let cross = (lv - pv) * (s - ps) - (v - pv) * (ls - ps);
                if cross == 0.0 {
                    bps.pop();
                }
            }
            bps.push((s, v));
        }
        debug_assert!(kind != Kind::ClassKinf || tail_slope > 0.0);
        PLFunction {
            kind,
            breakpoints: bps,
            tail_slope,
        }
    }

    /// Crate-internal constructor for numerically built point lists; applies
    /// the same normalization as the algebra operations.
    pub(crate) fn normalized_points(kind: Kind, points: Vec<(f64, f64)>, tail_slope: f64) -> Self {
        Self::normalized(kind, points, tail_slope)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn is_zero(&self) -> bool {
        self.kind == Kind::Zero
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    fn last(&self) -> (f64, f64) {
        *self.breakpoints.last().unwrap()
    }

    /// Evaluates the function at `s ≥ 0` (negative arguments clamp to zero).
    pub fn eval(&self, s: f64) -> f64 {
        if self.is_zero() || s <= 0.0 {
            return 0.0;
        }
        let bps = &self.breakpoints;
        let (ls, lv) = self.last();
        if s >= ls {
            return lv + self.tail_slope * (s - ls);
        }
        let i = bps.partition_point(|&(x, _)| x <= s);
        let (x0, y0) = bps[i - 1];
        let (x1, y1) = bps[i];
        y0 + (y1 - y0) * (s - x0) / (x1 - x0)
    }

    /// Smallest `s` with `self(s) = v`, for strictly increasing kinds.
    /// Returns `None` when `v` exceeds the range of a bounded function.
    fn preimage(&self, v: f64) -> Option<f64> {
        if v <= 0.0 {
            return Some(0.0);
        }
        let bps = &self.breakpoints;
        let (ls, lv) = self.last();
        if v > lv {
            if self.tail_slope > 0.0 {
                return Some(ls + (v - lv) / self.tail_slope);
            }
            return None;
        }
        let i = bps.partition_point(|&(_, y)| y < v);
        let (x1, y1) = bps[i];
        if y1 == v {
            return Some(x1);
        }
        let (x0, y0) = bps[i - 1];
        Some(x0 + (x1 - x0) * (v - y0) / (y1 - y0))
    }

    /// Exact composition `self ∘ g` (that is, `s ↦ self(g(s))`).
    ///
    /// Breakpoints are placed at `g`'s breakpoints and at the preimages of
    /// `self`'s breakpoints under `g`, so the result interpolates nothing.
    /// The zero gain absorbs on both sides.
    pub fn compose(&self, g: &PLFunction) -> PLFunction {
        if self.is_zero() || g.is_zero() {
            return PLFunction::zero();
        }
        let mut xs: Vec<f64> = g.breakpoints.iter().map(|&(s, _)| s).collect();
        for &(bx, _) in self.breakpoints.iter().skip(1) {
            if let Some(s) = g.preimage(bx) {
                xs.push(s);
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let pts: Vec<(f64, f64)> = xs
            .into_iter()
            .filter(|&s| s > 0.0)
            .map(|s| (s, self.eval(g.eval(s))))
            .collect();
        let tail = self.tail_slope * g.tail_slope;
        let kind = if self.kind == Kind::ClassKinf && g.kind == Kind::ClassKinf {
            Kind::ClassKinf
        } else {
            Kind::ClassK
        };
        PLFunction::normalized(kind, pts, tail)
    }

    /// Exact inverse; requires class K∞.
    pub fn inverse(&self) -> Result<PLFunction, PlError> {
        if self.kind != Kind::ClassKinf {
            return Err(PlError::NotInvertible);
        }
        let bps = self.breakpoints.iter().map(|&(s, v)| (v, s)).collect();
        Ok(PLFunction {
            kind: Kind::ClassKinf,
            breakpoints: bps,
            tail_slope: 1.0 / self.tail_slope,
        })
    }

    /// Abscissas where either operand has a breakpoint, plus the crossing
    /// point of the extrapolation tails if they intersect beyond the last
    /// breakpoint. Crossings interior to merged cells are appended by the
    /// caller.
    fn merged_abscissas(&self, g: &PLFunction) -> Vec<f64> {
        let mut xs: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(g.breakpoints.iter())
            .map(|&(s, _)| s)
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        xs
    }

    fn combine(&self, g: &PLFunction, take_max: bool) -> Vec<(f64, f64)> {
        let xs = self.merged_abscissas(g);
        let pick = |a: f64, b: f64| if take_max { a.max(b) } else { a.min(b) };
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(xs.len() + 8);
        let mut prev: Option<(f64, f64, f64)> = None;
        for &s in xs.iter().filter(|&&s| s > 0.0) {
            let (fv, gv) = (self.eval(s), g.eval(s));
            if let Some((ps, pf, pg)) = prev {
                let (d0, d1) = (pf - pg, fv - gv);
                if d0 * d1 < 0.0 {
                    let t = d0 / (d0 - d1);
                    let sx = ps + t * (s - ps);
                    if sx > ps && sx < s {
                        pts.push((sx, self.eval(sx)));
                    }
                }
            }
            pts.push((s, pick(fv, gv)));
            prev = Some((s, fv, gv));
        }
        // Tail crossing beyond the last shared breakpoint.
        let ls = xs.last().copied().unwrap_or(0.0);
        let (fv, gv) = (self.eval(ls), g.eval(ls));
        let (df, dg) = (self.tail_slope, g.tail_slope);
        if df != dg {
            let t = (gv - fv) / (df - dg);
            if t > 0.0 && t.is_finite() {
                let sx = ls + t;
                pts.push((sx, self.eval(sx)));
            }
        }
        pts
    }

    /// Exact pointwise maximum, including crossing breakpoints.
    pub fn pointwise_max(&self, g: &PLFunction) -> PLFunction {
        if self.is_zero() {
            return g.clone();
        }
        if g.is_zero() {
            return self.clone();
        }
        let pts = self.combine(g, true);
        let kind = if self.kind == Kind::ClassKinf || g.kind == Kind::ClassKinf {
            Kind::ClassKinf
        } else {
            Kind::ClassK
        };
        let tail = if self.eventually_above(g) {
            self.tail_slope
        } else {
            g.tail_slope
        };
        PLFunction::normalized(kind, pts, tail)
    }

    /// Exact pointwise minimum, including crossing breakpoints. The zero
    /// gain absorbs.
    pub fn pointwise_min(&self, g: &PLFunction) -> PLFunction {
        if self.is_zero() || g.is_zero() {
            return PLFunction::zero();
        }
        let pts = self.combine(g, false);
        let kind = if self.kind == Kind::ClassKinf && g.kind == Kind::ClassKinf {
            Kind::ClassKinf
        } else {
            Kind::ClassK
        };
        let tail = if self.eventually_above(g) {
            g.tail_slope
        } else {
            self.tail_slope
        };
        PLFunction::normalized(kind, pts, tail)
    }

    /// True when `self(s) ≥ g(s)` for all large `s`.
    fn eventually_above(&self, g: &PLFunction) -> bool {
        if self.tail_slope != g.tail_slope {
            return self.tail_slope > g.tail_slope;
        }
        // Equal tail slopes: compare offsets at a point past both tails.
        let s = self.last().0.max(g.last().0) + 1.0;
        self.eval(s) >= g.eval(s)
    }

    /// Exact pointwise sum. The zero gain is the identity element.
    pub fn pointwise_add(&self, g: &PLFunction) -> PLFunction {
        if self.is_zero() {
            return g.clone();
        }
        if g.is_zero() {
            return self.clone();
        }
        let xs = self.merged_abscissas(g);
        let pts = xs
            .into_iter()
            .filter(|&s| s > 0.0)
            .map(|s| (s, self.eval(s) + g.eval(s)))
            .collect();
        let kind = if self.kind == Kind::ClassKinf || g.kind == Kind::ClassKinf {
            Kind::ClassKinf
        } else {
            Kind::ClassK
        };
        PLFunction::normalized(kind, pts, self.tail_slope + g.tail_slope)
    }

    /// Output scaling `s ↦ c·self(s)` for `c > 0`.
    pub fn scale(&self, c: f64) -> PLFunction {
        assert!(c.is_finite() && c > 0.0, "scale needs c > 0");
        if self.is_zero() {
            return PLFunction::zero();
        }
        let bps = self.breakpoints.iter().map(|&(s, v)| (s, c * v)).collect();
        PLFunction {
            kind: self.kind,
            breakpoints: bps,
            tail_slope: c * self.tail_slope,
        }
    }

    /// `k`-fold composition `self ∘ ⋯ ∘ self`, `k ≥ 1`.
    pub fn iterate(&self, k: usize) -> PLFunction {
        assert!(k >= 1, "iterate needs k >= 1");
        let mut out = self.clone();
        for _ in 1..k {
            out = out.compose(self);
        }
        out
    }

    /// The residual `s ↦ s − self(s)` as a piecewise-linear function.
    ///
    /// Fails when the residual is not strictly increasing (some segment of
    /// `self` has slope ≥ 1) or not positive.
    pub fn id_minus(&self) -> Result<PLFunction, PlError> {
        if self.is_zero() {
            return Ok(PLFunction::identity());
        }
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(self.breakpoints.len());
        let mut prev = 0.0_f64;
        for &(s, v) in self.breakpoints.iter().skip(1) {
            let d = s - v;
            if d <= prev || d <= 0.0 {
                return Err(PlError::NotMonotone);
            }
            pts.push((s, d));
            prev = d;
        }
        let tail = 1.0 - self.tail_slope;
        if tail <= 0.0 {
            return Err(PlError::NotMonotone);
        }
        Ok(PLFunction::normalized(Kind::ClassKinf, pts, tail))
    }

    /// Checks whether `self` stays below the identity with relative margin
    /// `tol` on `(0, s_max]`.
    ///
    /// The check runs over a uniform grid of `grid` points, every breakpoint
    /// of `self` inside the interval, and `s_max` itself; since the function
    /// is piecewise linear this covers the whole interval exactly. Beyond
    /// `s_max` the verdict additionally requires the tail slope to stay
    /// below `1 − tol`.
    pub fn below_identity(&self, s_max: f64, grid: usize, tol: f64) -> BelowIdentityReport {
        assert!(s_max > 0.0 && grid >= 1);
        if self.is_zero() {
            return BelowIdentityReport {
                verdict: true,
                worst_margin: 1.0,
                worst_s: s_max,
            };
        }
        let mut worst_margin = f64::INFINITY;
        let mut worst_s = s_max;
        let mut check = |s: f64| {
            if s <= 0.0 || s > s_max {
                return;
            }
            let m = (s - self.eval(s)) / s;
            if m < worst_margin {
                worst_margin = m;
                worst_s = s;
            }
        };
        for j in 1..=grid {
            check(j as f64 * s_max / grid as f64);
        }
        for &(s, _) in self.breakpoints.iter() {
            check(s);
        }
        check(s_max);
        let tail_ok = self.tail_slope <= 1.0 - tol;
        BelowIdentityReport {
            verdict: worst_margin >= tol && tail_ok,
            worst_margin,
            worst_s,
        }
    }

    /// Exact strict comparison `self(s) < g(s)` on all of `(0, ∞)`,
    /// decided from the merged breakpoint lattice, the initial segment
    /// slopes, a probe at `s_max`, and the extrapolation tails. No
    /// tolerance is applied.
    pub fn strictly_below(&self, g: &PLFunction, s_max: f64) -> bool {
        if self.is_zero() {
            return !g.is_zero();
        }
        if g.is_zero() {
            return false;
        }
        // Near the origin both functions are linear; compare slopes there.
        if self.initial_slope() >= g.initial_slope() {
            return false;
        }
        let mut xs = self.merged_abscissas(g);
        xs.push(s_max);
        let far = xs.iter().cloned().fold(0.0f64, f64::max);
        for s in xs {
            if s <= 0.0 {
                continue;
            }
            if self.eval(s) >= g.eval(s) {
                return false;
            }
        }
        // Beyond the last breakpoint both sides are affine.
        self.tail_slope <= g.tail_slope && self.eval(far) < g.eval(far)
    }

    fn initial_slope(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.breakpoints.len() == 1 {
            return self.tail_slope;
        }
        let (s1, v1) = self.breakpoints[1];
        v1 / s1
    }

    /// Samples a strictly increasing closed-form function onto the default
    /// breakpoint grid: dyadic step 1/64 on `[0, 1]`, then geometric
    /// doubling up to `s_hi`. The tail slope continues the last chord.
    pub fn sample_monotone(f: impl Fn(f64) -> f64, s_hi: f64) -> Result<PLFunction, PlError> {
        assert!(s_hi > 0.0);
        let mut xs: Vec<f64> = Vec::new();
        let step = 1.0 / 64.0;
        let mut s = step;
        while s <= 1.0_f64.min(s_hi) + 1e-12 {
            xs.push(s);
            s += step;
        }
        let mut s = 2.0;
        while s < s_hi {
            xs.push(s);
            s *= 2.0;
        }
        if *xs.last().unwrap() < s_hi {
            xs.push(s_hi);
        }
        let mut pts = Vec::with_capacity(xs.len());
        let mut prev = 0.0_f64;
        for s in xs {
            let v = f(s);
            if !v.is_finite() || v <= prev {
                return Err(PlError::NotMonotone);
            }
            pts.push((s, v));
            prev = v;
        }
        let n = pts.len();
        let tail = if n >= 2 {
            (pts[n - 1].1 - pts[n - 2].1) / (pts[n - 1].0 - pts[n - 2].0)
        } else {
            pts[0].1 / pts[0].0
        };
        let kind = if tail > 0.0 {
            Kind::ClassKinf
        } else {
            Kind::ClassK
        };
        Ok(PLFunction::normalized(kind, pts, tail.max(0.0)))
    }
}

/// Outcome of a [`PLFunction::below_identity`] check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BelowIdentityReport {
    pub verdict: bool,
    /// Minimum of `(s − f(s))/s` over the checked points.
    pub worst_margin: f64,
    /// Abscissa where the worst margin was attained.
    pub worst_s: f64,
}

/// Geometric grid of `n` points spanning `[s_max·GRID_SPAN, s_max]`.
pub fn geometric_grid(s_max: f64, n: usize) -> Vec<f64> {
    assert!(s_max > 0.0 && n >= 2);
    let lo = s_max * GRID_SPAN;
    let ratio = libm::log(s_max / lo) / (n - 1) as f64;
    (0..n).map(|i| lo * libm::exp(ratio * i as f64)).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KlWire {
    contraction: PLFunction,
    lower: PLFunction,
    upper: PLFunction,
}

/// A KL decay envelope `β(s, k) = lower⁻¹(contractionᵏ(upper(s)))`.
///
/// This is the canonical envelope induced by a decrease rate `contraction`
/// below the identity and a sandwich `lower ≤ V ≤ upper`: nondecreasing in
/// `s`, nonincreasing in `k`, vanishing as `k → ∞`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "KlWire", into = "KlWire")]
pub struct KLFunction {
    contraction: PLFunction,
    lower: PLFunction,
    upper: PLFunction,
    lower_inv: PLFunction,
}

impl TryFrom<KlWire> for KLFunction {
    type Error = PlError;
    fn try_from(w: KlWire) -> Result<Self, PlError> {
        KLFunction::new(w.contraction, w.lower, w.upper)
    }
}

impl From<KLFunction> for KlWire {
    fn from(k: KLFunction) -> Self {
        KlWire {
            contraction: k.contraction,
            lower: k.lower,
            upper: k.upper,
        }
    }
}

impl KLFunction {
    /// Requires an invertible (class K∞) lower bound.
    pub fn new(
        contraction: PLFunction,
        lower: PLFunction,
        upper: PLFunction,
    ) -> Result<Self, PlError> {
        let lower_inv = lower.inverse()?;
        Ok(KLFunction {
            contraction,
            lower,
            upper,
            lower_inv,
        })
    }

    pub fn contraction(&self) -> &PLFunction {
        &self.contraction
    }

    pub fn upper(&self) -> &PLFunction {
        &self.upper
    }

    pub fn lower_inverse(&self) -> &PLFunction {
        &self.lower_inv
    }

    /// Evaluates `β(s, k)` by iterating the contraction pointwise.
    pub fn bound(&self, s: f64, k: usize) -> f64 {
        let mut v = self.upper.eval(s);
        for _ in 0..k {
            v = self.contraction.eval(v);
        }
        self.lower_inv.eval(v)
    }
}
