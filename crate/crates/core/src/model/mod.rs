//! Probability models with exact (or certified) ball-probability kernels.
//!
//! The model set is closed. Every kernel `μ(S(x, r))` is either an exact
//! closed form or a series with a tracked truncation bound, so bound checks
//! downstream never mix kernel error with Monte Carlo error.

mod noncentral;
mod square;

pub use noncentral::{noncentral_chi2_cdf, SeriesValue};
pub use square::disk_rect_area;

use std::str::FromStr;

use libm::erfc;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SampleSet;
use crate::rng::RngStream;

/// A point in `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinitePoint);
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean distance. Every nearest-neighbor routine goes through this
/// function so that alternative search strategies agree bit for bit.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ModelKind {
    /// Uniform on `[a, b]`.
    #[serde(rename = "uniform1d")]
    Uniform1D {
        #[serde(default)]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    /// `F(x) = x^θ` on `[0, 1]`.
    #[serde(rename = "power1d")]
    PowerCdf1D { theta: f64 },
    /// `F(x) = 1 - (1 - x)^θ` on `[0, 1]`.
    #[serde(rename = "mirror_power1d")]
    MirrorPowerCdf1D { theta: f64 },
    /// Uniform on the unit square.
    #[serde(rename = "square2d")]
    UniformSquare2D,
    /// `N(0, σ² I_d)`.
    #[serde(rename = "gaussian")]
    IsotropicGaussian {
        #[serde(default = "one_usize")]
        dim: usize,
        #[serde(default = "one")]
        sigma: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

/// Lower and upper density bounds valid on the whole support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBounds {
    pub f_min: f64,
    pub f_max: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallProbMethod {
    ClosedForm,
    SegmentDecomposition,
    NoncentralSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallProbResult {
    pub prob: f64,
    pub method: BallProbMethod,
    pub abs_error_bound: f64,
}

/// Absolute accuracy claimed for the one-dimensional Gaussian kernel,
/// which is a difference of two complementary error functions.
const ERFC_ABS_ERROR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelKind", into = "ModelKind")]
pub struct DistributionModel {
    kind: ModelKind,
}

impl TryFrom<ModelKind> for DistributionModel {
    type Error = Error;

    fn try_from(kind: ModelKind) -> Result<Self> {
        DistributionModel::new(kind)
    }
}

impl From<DistributionModel> for ModelKind {
    fn from(m: DistributionModel) -> Self {
        m.kind
    }
}

/// Parses `uniform1d`, `uniform1d:a:b`, `power1d:θ`, `mirror_power1d:θ`,
/// `square2d`, `gaussian` or `gaussian:d:σ`.
impl FromStr for DistributionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let num = |i: usize| -> Result<f64> {
            args[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidModel(format!("`{}` is not a number in `{s}`", args[i])))
        };
        let arity = |want: &[usize]| -> Result<()> {
            if want.contains(&args.len()) {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!(
                    "wrong number of parameters in `{s}`"
                )))
            }
        };
        let kind = match name {
            "uniform1d" => {
                arity(&[0, 2])?;
                if args.is_empty() {
                    ModelKind::Uniform1D { a: 0.0, b: 1.0 }
                } else {
                    ModelKind::Uniform1D {
                        a: num(0)?,
                        b: num(1)?,
                    }
                }
            }
            "power1d" => {
                arity(&[1])?;
                ModelKind::PowerCdf1D { theta: num(0)? }
            }
            "mirror_power1d" => {
                arity(&[1])?;
                ModelKind::MirrorPowerCdf1D { theta: num(0)? }
            }
            "square2d" => {
                arity(&[0])?;
                ModelKind::UniformSquare2D
            }
            "gaussian" => {
                arity(&[0, 2])?;
                if args.is_empty() {
                    ModelKind::IsotropicGaussian { dim: 1, sigma: 1.0 }
                } else {
                    let dim = args[0]
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidModel(format!("bad dimension in `{s}`")))?;
                    ModelKind::IsotropicGaussian {
                        dim,
                        sigma: num(1)?,
                    }
                }
            }
            other => return Err(Error::InvalidModel(format!("unknown model `{other}`"))),
        };
        DistributionModel::new(kind)
    }
}

impl DistributionModel {
    pub fn new(kind: ModelKind) -> Result<Self> {
        match kind {
            ModelKind::Uniform1D { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::InvalidModel(format!(
                        "uniform1d requires finite a < b, got a={a}, b={b}"
                    )));
                }
            }
            ModelKind::PowerCdf1D { theta } | ModelKind::MirrorPowerCdf1D { theta } => {
                if !(theta.is_finite() && theta > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "power cdf exponent must be positive, got {theta}"
                    )));
                }
            }
            ModelKind::UniformSquare2D => {}
            ModelKind::IsotropicGaussian { dim, sigma } => {
                if dim == 0 {
                    return Err(Error::InvalidModel(
                        "gaussian dimension must be >= 1".into(),
                    ));
                }
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "gaussian sigma must be positive, got {sigma}"
                    )));
                }
            }
        }
        Ok(DistributionModel { kind })
    }

    pub fn uniform_1d(a: f64, b: f64) -> Result<Self> {
        Self::new(ModelKind::Uniform1D { a, b })
    }

    pub fn power_cdf_1d(theta: f64) -> Result<Self> {
        Self::new(ModelKind::PowerCdf1D { theta })
    }

    pub fn mirror_power_cdf_1d(theta: f64) -> Result<Self> {
        Self::new(ModelKind::MirrorPowerCdf1D { theta })
    }

    pub fn uniform_square_2d() -> Self {
        DistributionModel {
            kind: ModelKind::UniformSquare2D,
        }
    }

    pub fn isotropic_gaussian(dim: usize, sigma: f64) -> Result<Self> {
        Self::new(ModelKind::IsotropicGaussian { dim, sigma })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Uniform1D { .. }
            | ModelKind::PowerCdf1D { .. }
            | ModelKind::MirrorPowerCdf1D { .. } => 1,
            ModelKind::UniformSquare2D => 2,
            ModelKind::IsotropicGaussian { dim, .. } => dim,
        }
    }

    /// Short stable label used in reports.
    pub fn label(&self) -> String {
        match self.kind {
            ModelKind::Uniform1D { a, b } => format!("uniform1d({a},{b})"),
            ModelKind::PowerCdf1D { theta } => format!("power1d({theta})"),
            ModelKind::MirrorPowerCdf1D { theta } => format!("mirror_power1d({theta})"),
            ModelKind::UniformSquare2D => "square2d".to_string(),
            ModelKind::IsotropicGaussian { dim, sigma } => format!("gaussian({dim},{sigma})"),
        }
    }

    pub fn density_bounds(&self) -> Option<DensityBounds> {
        let flat = |f: f64| {
            Some(DensityBounds {
                f_min: f,
                f_max: f,
                dim: self.dim(),
            })
        };
        match self.kind {
            ModelKind::Uniform1D { a, b } => flat(1.0 / (b - a)),
            ModelKind::PowerCdf1D { theta } | ModelKind::MirrorPowerCdf1D { theta }
                if theta == 1.0 =>
            {
                flat(1.0)
            }
            ModelKind::UniformSquare2D => flat(1.0),
            _ => None,
        }
    }

    /// True when the support is bounded, i.e. the model is not Gaussian.
    pub fn has_bounded_support(&self) -> bool {
        !matches!(self.kind, ModelKind::IsotropicGaussian { .. })
    }

    /// Pointwise density.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let inside_unit = |t: f64| (0.0..=1.0).contains(&t);
        Ok(match self.kind {
            ModelKind::Uniform1D { a, b } => {
                if (a..=b).contains(&x[0]) {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            ModelKind::PowerCdf1D { theta } => {
                if inside_unit(x[0]) {
                    theta * x[0].powf(theta - 1.0)
                } else {
                    0.0
                }
            }
            ModelKind::MirrorPowerCdf1D { theta } => {
                if inside_unit(x[0]) {
                    theta * (1.0 - x[0]).powf(theta - 1.0)
                } else {
                    0.0
                }
            }
            ModelKind::UniformSquare2D => {
                if inside_unit(x[0]) && inside_unit(x[1]) {
                    1.0
                } else {
                    0.0
                }
            }
            ModelKind::IsotropicGaussian { dim, sigma } => {
                let sq: f64 = x.iter().map(|c| c * c).sum();
                let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(dim as f64 / 2.0);
                (-sq / (2.0 * sigma * sigma)).exp() / norm
            }
        })
    }

    /// Exact distribution function for one-dimensional models.
    pub fn cdf_1d(&self, x: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::NotOneDimensional(self.dim()));
        }
        Ok(self.cdf_1d_unchecked(x))
    }

    fn cdf_1d_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            ModelKind::Uniform1D { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            ModelKind::PowerCdf1D { theta } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    x.powf(theta)
                }
            }
            ModelKind::MirrorPowerCdf1D { theta } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    1.0 - (1.0 - x).powf(theta)
                }
            }
            ModelKind::IsotropicGaussian { sigma, .. } => {
                if x == f64::INFINITY {
                    1.0
                } else if x == f64::NEG_INFINITY {
                    0.0
                } else {
                    0.5 * erfc(-x / (sigma * std::f64::consts::SQRT_2))
                }
            }
            ModelKind::UniformSquare2D => unreachable!("dimension checked by caller"),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinitePoint);
        }
        Ok(())
    }

    /// Radius beyond which the ball around `x` contains the whole support.
    /// `None` for unbounded support.
    fn cover_radius(&self, x: &[f64]) -> Option<f64> {
        match self.kind {
            ModelKind::Uniform1D { a, b } => Some((x[0] - a).abs().max((x[0] - b).abs())),
            ModelKind::PowerCdf1D { .. } | ModelKind::MirrorPowerCdf1D { .. } => {
                Some(x[0].abs().max((x[0] - 1.0).abs()))
            }
            ModelKind::UniformSquare2D => {
                let dx = x[0].abs().max((x[0] - 1.0).abs());
                let dy = x[1].abs().max((x[1] - 1.0).abs());
                Some(dx.hypot(dy))
            }
            ModelKind::IsotropicGaussian { .. } => None,
        }
    }

    /// `μ(S(x, r))` for the closed ball of radius `r` around `x`.
    pub fn ball_prob(&self, x: &[f64], r: f64) -> Result<BallProbResult> {
        self.check_point(x)?;
        if r.is_nan() || r < 0.0 {
            return Err(Error::NegativeRadius(r));
        }
        Ok(self.ball_prob_unchecked(x, r))
    }

    pub(crate) fn ball_prob_unchecked(&self, x: &[f64], r: f64) -> BallProbResult {
        let closed = |prob: f64| BallProbResult {
            prob,
            method: BallProbMethod::ClosedForm,
            abs_error_bound: 0.0,
        };
        match self.kind {
            ModelKind::Uniform1D { .. }
            | ModelKind::PowerCdf1D { .. }
            | ModelKind::MirrorPowerCdf1D { .. } => {
                closed(self.cdf_1d_unchecked(x[0] + r) - self.cdf_1d_unchecked(x[0] - r))
            }
            ModelKind::UniformSquare2D => {
                let prob = match self.cover_radius(x) {
                    Some(cover) if r >= cover => 1.0,
                    _ => disk_rect_area(x[0], x[1], r, 0.0, 1.0, 0.0, 1.0).clamp(0.0, 1.0),
                };
                BallProbResult {
                    prob,
                    method: BallProbMethod::SegmentDecomposition,
                    abs_error_bound: 0.0,
                }
            }
            ModelKind::IsotropicGaussian { dim: 1, .. } => {
                // χ²_1(λ) has the closed form Φ(√t − √λ) − Φ(−√t − √λ).
                BallProbResult {
                    prob: (self.cdf_1d_unchecked(x[0] + r) - self.cdf_1d_unchecked(x[0] - r))
                        .clamp(0.0, 1.0),
                    method: BallProbMethod::NoncentralSeries,
                    abs_error_bound: ERFC_ABS_ERROR,
                }
            }
            ModelKind::IsotropicGaussian { dim, sigma } => {
                if r == f64::INFINITY {
                    return BallProbResult {
                        prob: 1.0,
                        method: BallProbMethod::NoncentralSeries,
                        abs_error_bound: 0.0,
                    };
                }
                let s2 = sigma * sigma;
                let lambda = x.iter().map(|c| c * c).sum::<f64>() / s2;
                let v = noncentral_chi2_cdf(dim as f64, lambda, r * r / s2);
                BallProbResult {
                    prob: v.value,
                    method: BallProbMethod::NoncentralSeries,
                    abs_error_bound: v.abs_error_bound,
                }
            }
        }
    }

    /// Smallest radius whose ball has probability at least `p`, by bisection.
    ///
    /// The bracket starts at `[0, cover radius]` (or `‖x‖ + 6σ√d`, doubled as
    /// needed, for the Gaussian) and is halved until the endpoints are
    /// adjacent floats, which is well inside a 1e-12 probability tolerance.
    pub fn ball_radius(&self, x: &[f64], p: f64) -> Result<f64> {
        self.check_point(x)?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        let prob = |r: f64| self.ball_prob_unchecked(x, r).prob;
        let mut hi = match (self.kind, self.cover_radius(x)) {
            (_, Some(c)) => c,
            (ModelKind::IsotropicGaussian { dim, sigma }, None) => {
                let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
                norm + 6.0 * sigma * (dim as f64).sqrt()
            }
            _ => unreachable!("bounded models have a cover radius"),
        };
        let mut expansions = 0;
        while prob(hi) < p {
            hi *= 2.0;
            expansions += 1;
            if expansions > 64 || !hi.is_finite() {
                return Err(Error::DegenerateBall);
            }
        }
        let mut lo = 0.0_f64;
        if prob(lo) >= p {
            return Ok(0.0);
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if prob(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Draw one point into `out`.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        // `random::<f64>()` is uniform on [0, 1); `1 - u` lies in (0, 1].
        match self.kind {
            ModelKind::Uniform1D { a, b } => {
                let u: f64 = rng.random();
                out.push(a + (b - a) * u);
            }
            ModelKind::PowerCdf1D { theta } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                out.push(u.powf(1.0 / theta));
            }
            ModelKind::MirrorPowerCdf1D { theta } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                out.push(1.0 - u.powf(1.0 / theta));
            }
            ModelKind::UniformSquare2D => {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                out.push(u);
                out.push(v);
            }
            ModelKind::IsotropicGaussian { dim, sigma } => {
                for _ in 0..dim {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(sigma * z);
                }
            }
        }
    }

    /// `n` i.i.d. points; deterministic given the stream state.
    pub fn sample(&self, rng: &mut RngStream, n: usize) -> SampleSet {
        let mut coords = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            self.sample_point(rng, &mut coords);
        }
        SampleSet::from_flat(self.dim(), coords).expect("sampled coordinates are finite")
    }

    /// Probability integral transform values `μ(S(x, ‖x − X‖))` for `m`
    /// independent pairs `(x, X)`; Uniform[0, 1] in distribution.
    pub fn pit_samples(&self, rng: &mut RngStream, m: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        let mut y = Vec::with_capacity(self.dim());
        (0..m)
            .map(|_| {
                x.clear();
                y.clear();
                self.sample_point(rng, &mut x);
                self.sample_point(rng, &mut y);
                self.ball_prob_unchecked(&x, distance(&x, &y)).prob
            })
            .collect()
    }

    /// `F` is convex or concave on the support: the uniform law, and the
    /// power families with `θ ≥ 1` (no density blow-up at an edge).
    pub fn has_convex_or_concave_cdf(&self) -> bool {
        match self.kind {
            ModelKind::Uniform1D { .. } => true,
            ModelKind::PowerCdf1D { theta } | ModelKind::MirrorPowerCdf1D { theta } => theta >= 1.0,
            _ => false,
        }
    }
}
