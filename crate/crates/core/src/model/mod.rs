//! Model specification for the one-dimensional diffusion
//! `dX = b(X) dt + σ(X) dw`, the quadratic-form kernel `c`, and the reference
//! function `β`.
//!
//! All coefficient functions are supplied together with analytic derivatives.
//! Finite differences are used only by [`fd_check_derivatives`] as a
//! consistency check on user input.

mod presets;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub use presets::{ModelPreset, ModelRegistry, PresetParams};

/// A pure real function handle.
pub type Handle = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Sampler for a random initial condition.
pub type InitialSampler = Arc<dyn Fn(&mut StreamRng) -> f64 + Send + Sync>;

/// Step used by the central-difference consistency check.
pub const FD_STEP: f64 = 1e-5;
/// Relative tolerance for a derivative handle to agree with its parent.
pub const FD_TOLERANCE: f64 = 1e-5;
/// `min |a|` must exceed this for the nondegeneracy guard to pass.
pub const MIN_ABS_A_FLOOR: f64 = 1e-8;

const FD_POINTS: usize = 10;
const SCAN_POINTS: usize = 1001;

/// A smooth scalar function with its first two (optionally three) derivatives.
#[derive(Clone)]
pub struct Smooth {
    value: Handle,
    d1: Handle,
    d2: Handle,
    d3: Option<Handle>,
}

impl Smooth {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            d3: None,
        }
    }

    /// Attach an analytic third derivative (used only by the Milstein flow step).
    pub fn with_third(mut self, d3: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.d3 = Some(Arc::new(d3));
        self
    }

    pub fn constant(level: f64) -> Self {
        Self::new(move |_| level, |_| 0.0, |_| 0.0).with_third(|_| 0.0)
    }

    /// `x ↦ slope·x + intercept`
    pub fn affine(slope: f64, intercept: f64) -> Self {
        Self::new(move |x| slope * x + intercept, move |_| slope, |_| 0.0).with_third(|_| 0.0)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        (self.d1)(x)
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        (self.d2)(x)
    }

    /// Third derivative; falls back to a central difference of `d2` when no
    /// analytic handle was supplied.
    pub fn d3(&self, x: f64) -> f64 {
        match &self.d3 {
            Some(f) => f(x),
            None => (self.d2(x + FD_STEP) - self.d2(x - FD_STEP)) / (2.0 * FD_STEP),
        }
    }

    pub fn has_third(&self) -> bool {
        self.d3.is_some()
    }
}

/// Initial condition `X₀`.
#[derive(Clone)]
pub enum Initial {
    Point(f64),
    /// Random `X₀` drawn from a dedicated lane of each replication stream.
    Sampler {
        sample: InitialSampler,
        support: (f64, f64),
    },
}

impl Initial {
    fn centre(&self) -> (f64, f64) {
        match self {
            Initial::Point(x) => (*x, *x),
            Initial::Sampler { support, .. } => *support,
        }
    }
}

/// Which expansion the model is analysed under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionCase {
    /// `X = X₀ + w`; the reference variable is `Fₙ = (2/n) Σ a²`.
    Wiener,
    /// General diffusion; the reference variable is `Fₙ = (1/n) Σ β`.
    Diffusion,
}

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub drift: Smooth,
    pub diffusion: Smooth,
    pub kernel_weight: Smooth,
    pub reference: Smooth,
    pub initial: Initial,
    pub scan_range: (f64, f64),
    pub case: ExpansionCase,
    /// The Hörmander-type spanning condition is user-asserted, never checked.
    pub hormander_asserted: bool,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("case", &self.case)
            .field("scan_range", &self.scan_range)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    /// A diffusion-case model with `β = 2a²` and the default scan range.
    pub fn new(
        name: impl Into<String>,
        drift: Smooth,
        diffusion: Smooth,
        kernel_weight: Smooth,
        initial: Initial,
    ) -> Self {
        let reference = two_alpha(&kernel_weight, &diffusion);
        let (lo, hi) = initial.centre();
        Self {
            name: name.into(),
            drift,
            diffusion,
            kernel_weight,
            reference,
            initial,
            scan_range: (lo - 5.0, hi + 5.0),
            case: ExpansionCase::Diffusion,
            hormander_asserted: false,
        }
    }

    pub fn with_reference(mut self, reference: Smooth) -> Self {
        self.reference = reference;
        self
    }

    pub fn with_scan_range(mut self, lo: f64, hi: f64) -> Self {
        self.scan_range = (lo, hi);
        self
    }

    pub fn with_case(mut self, case: ExpansionCase) -> Self {
        self.case = case;
        self
    }

    pub fn with_hormander_asserted(mut self, asserted: bool) -> Self {
        self.hormander_asserted = asserted;
        self
    }

    /// `a = c σ²`
    #[inline]
    pub fn a(&self, x: f64) -> f64 {
        let s = self.diffusion.value(x);
        self.kernel_weight.value(x) * s * s
    }

    #[inline]
    pub fn a_d1(&self, x: f64) -> f64 {
        let (c, c1) = (self.kernel_weight.value(x), self.kernel_weight.d1(x));
        let (s, s1) = (self.diffusion.value(x), self.diffusion.d1(x));
        c1 * s * s + 2.0 * c * s * s1
    }

    #[inline]
    pub fn a_d2(&self, x: f64) -> f64 {
        let (c, c1, c2) = (
            self.kernel_weight.value(x),
            self.kernel_weight.d1(x),
            self.kernel_weight.d2(x),
        );
        let (s, s1, s2) = (
            self.diffusion.value(x),
            self.diffusion.d1(x),
            self.diffusion.d2(x),
        );
        c2 * s * s + 4.0 * c1 * s * s1 + 2.0 * c * (s1 * s1 + s * s2)
    }

    /// `(a, a', a'')` in one call.
    #[inline]
    pub fn a_jet(&self, x: f64) -> (f64, f64, f64) {
        (self.a(x), self.a_d1(x), self.a_d2(x))
    }

    /// `(α, α', α'')` with `α = a²`.
    #[inline]
    pub fn alpha_jet(&self, x: f64) -> (f64, f64, f64) {
        let (a, a1, a2) = self.a_jet(x);
        (a * a, 2.0 * a * a1, 2.0 * (a1 * a1 + a * a2))
    }

    /// Itô dw-coefficient `f' σ` of `f(X_t)`.
    #[inline]
    pub fn ito1(&self, f: &Smooth, x: f64) -> f64 {
        f.d1(x) * self.diffusion.value(x)
    }

    /// Itô dt-coefficient `f' b + ½ f'' σ²` of `f(X_t)`.
    #[inline]
    pub fn ito0(&self, f: &Smooth, x: f64) -> f64 {
        let s = self.diffusion.value(x);
        f.d1(x) * self.drift.value(x) + 0.5 * f.d2(x) * s * s
    }

    /// Draw `X₀` for a replication.
    pub fn draw_initial(&self, rng: &mut StreamRng) -> f64 {
        match &self.initial {
            Initial::Point(x) => *x,
            Initial::Sampler { sample, .. } => sample(rng),
        }
    }

    fn handle_pairs(&self) -> Vec<(String, Handle, Handle)> {
        let mut out = Vec::new();
        for (label, f) in [
            ("b", &self.drift),
            ("sigma", &self.diffusion),
            ("c", &self.kernel_weight),
            ("beta", &self.reference),
        ] {
            out.push((format!("{label}'"), f.value.clone(), f.d1.clone()));
            out.push((format!("{label}''"), f.d1.clone(), f.d2.clone()));
            if let Some(d3) = &f.d3 {
                out.push((format!("{label}'''"), f.d2.clone(), d3.clone()));
            }
        }
        out
    }
}

/// `β = 2a²` built from the kernel weight and the diffusion coefficient.
pub fn two_alpha(c: &Smooth, sigma: &Smooth) -> Smooth {
    let (c0, s0) = (c.clone(), sigma.clone());
    let (c1, s1) = (c.clone(), sigma.clone());
    let (c2, s2) = (c.clone(), sigma.clone());
    let a = move |c: &Smooth, s: &Smooth, x: f64| {
        let (cv, c1, c2) = (c.value(x), c.d1(x), c.d2(x));
        let (sv, s1, s2) = (s.value(x), s.d1(x), s.d2(x));
        (
            cv * sv * sv,
            c1 * sv * sv + 2.0 * cv * sv * s1,
            c2 * sv * sv + 4.0 * c1 * sv * s1 + 2.0 * cv * (s1 * s1 + sv * s2),
        )
    };
    Smooth::new(
        move |x| {
            let (a0, _, _) = a(&c0, &s0, x);
            2.0 * a0 * a0
        },
        move |x| {
            let (a0, a1, _) = a(&c1, &s1, x);
            4.0 * a0 * a1
        },
        move |x| {
            let (a0, a1, a2) = a(&c2, &s2, x);
            4.0 * (a1 * a1 + a0 * a2)
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HandleError {
    pub handle: String,
    pub max_rel_error: f64,
}

/// Max relative error of every derivative handle against a central difference
/// of its parent, `|f'(x) − (f(x+h) − f(x−h))/2h| / (1 + |f'(x)|)`, `h = 1e-5`.
pub fn fd_check_derivatives(spec: &ModelSpec, points: &[f64]) -> Vec<HandleError> {
    spec.handle_pairs()
        .into_iter()
        .map(|(handle, f, df)| HandleError {
            handle,
            max_rel_error: points
                .iter()
                .map(|&x| fd_pair_error(&*f, &*df, x))
                .fold(0.0, f64::max),
        })
        .collect()
}

/// Relative mismatch of a single `(f, f')` pair at `x`.
pub fn fd_pair_error(f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let fd = (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP);
    let exact = df(x);
    (exact - fd).abs() / (1.0 + exact.abs())
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub model: String,
    pub pass: bool,
    pub scan_range: (f64, f64),
    pub min_abs_a: f64,
    pub argmin_abs_a: f64,
    pub constant_sign: bool,
    pub worst_derivative: HandleError,
    pub derivative_errors: Vec<HandleError>,
    pub hormander_asserted: bool,
    pub diagnostics: Vec<String>,
}

/// Numerical guards: finiteness, `min |a| > 0` on the scan range, and
/// derivative-handle consistency.
pub fn validate_model(spec: &ModelSpec) -> Result<ValidationReport> {
    let (lo, hi) = spec.scan_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "scan range [{lo}, {hi}] is not a proper interval"
        )));
    }
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| lo + step * i as f64).collect();

    for &x in &grid {
        for (what, v) in [
            ("b", spec.drift.value(x)),
            ("sigma", spec.diffusion.value(x)),
            ("c", spec.kernel_weight.value(x)),
            ("beta", spec.reference.value(x)),
            ("a", spec.a(x)),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFiniteModel { what, x });
            }
        }
    }

    let values: Vec<f64> = grid.iter().map(|&x| spec.a(x)).collect();
    let (imin, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| {
            if v.abs() < bv {
                (i, v.abs())
            } else {
                (bi, bv)
            }
        });
    let bracket = (
        grid[imin.saturating_sub(1)],
        grid[(imin + 1).min(SCAN_POINTS - 1)],
    );
    let (argmin, min_abs_a) = golden_min(|x| spec.a(x).abs(), bracket.0, bracket.1);
    let (argmin, min_abs_a) = if values[imin].abs() < min_abs_a {
        (grid[imin], values[imin].abs())
    } else {
        (argmin, min_abs_a)
    };
    let positive = values.iter().all(|&v| v > 0.0);
    let negative = values.iter().all(|&v| v < 0.0);

    let fd_points: Vec<f64> = (0..FD_POINTS)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / FD_POINTS as f64)
        .collect();
    let derivative_errors = fd_check_derivatives(spec, &fd_points);
    let worst = derivative_errors.iter().cloned().fold(
        HandleError {
            handle: String::new(),
            max_rel_error: 0.0,
        },
        |acc, e| {
            if e.max_rel_error.is_nan() || e.max_rel_error > acc.max_rel_error {
                e
            } else {
                acc
            }
        },
    );

    let mut diagnostics = Vec::new();
    let guard_ok = min_abs_a > MIN_ABS_A_FLOOR;
    if !guard_ok {
        diagnostics.push(format!(
            "nondegeneracy guard failed: min |a| = {min_abs_a:e} at x = {argmin}"
        ));
    }
    let derivs_ok = derivative_errors
        .iter()
        .all(|e| e.max_rel_error <= FD_TOLERANCE);
    for e in derivative_errors
        .iter()
        .filter(|e| !(e.max_rel_error <= FD_TOLERANCE))
    {
        diagnostics.push(format!(
            "derivative handle {} disagrees with finite difference (rel. error {:e})",
            e.handle, e.max_rel_error
        ));
    }
    if spec.case == ExpansionCase::Wiener {
        let off = grid
            .iter()
            .any(|&x| spec.drift.value(x) != 0.0 || (spec.diffusion.value(x) - 1.0).abs() > 0.0);
        if off {
            diagnostics.push("Wiener case expects b ≡ 0 and σ ≡ 1".to_string());
        }
    }
    if !spec.hormander_asserted {
        diagnostics.push("spanning condition not asserted by the user".to_string());
    }

    Ok(ValidationReport {
        model: spec.name.clone(),
        pass: guard_ok && derivs_ok,
        scan_range: spec.scan_range,
        min_abs_a,
        argmin_abs_a: argmin,
        constant_sign: positive || negative,
        worst_derivative: worst,
        derivative_errors,
        hormander_asserted: spec.hormander_asserted,
        diagnostics,
    })
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (hi - lo).abs() < 1e-14 {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}
