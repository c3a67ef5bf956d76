//! Numerical checks of the density conditions behind the Poisson/Gumbel
//! limit: the intersection ratio of equal-probability balls, the doubling
//! inequality, the cone-covering inequality and the half-overlap property
//! of convex or concave one-dimensional distribution functions.
//!
//! A checker can only refute a condition. Passing reports read "no
//! violation found among N configurations".

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{distance, DensityBounds, DistributionModel, ModelKind};
use crate::report::VerifierReport;
use crate::rng::RngStream;
use crate::simulate::ExperimentConfig;

/// Most extreme configurations kept per estimate.
pub const MAX_WITNESSES: usize = 10;

/// Ratio tolerance when every quantity comes from a closed-form kernel.
pub const EXACT_TOLERANCE: f64 = 1e-9;

/// Ratio tolerance when the overlap is obtained by quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConditionId {
    /// `μ(S(x,r) ∩ S(z,s)) / μ(S(z,s)) ≤ β`.
    Int,
    /// `μ(S(z,2s)) ≤ c_max · μ(S(z,s))`.
    Doubling,
    /// `μ{x₂ : μ(S(x₂, ‖x₂ − x₁‖)) ≤ a} ≤ γ_d · a`.
    Cone,
    /// Overlap at most one half for convex or concave `F` in one dimension.
    ConvexHalf,
}

impl ConditionId {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionId::Int => "INT",
            ConditionId::Doubling => "DOUBLING",
            ConditionId::Cone => "CONE",
            ConditionId::ConvexHalf => "CONVEX_HALF",
        }
    }

    fn check_name(self) -> &'static str {
        match self {
            ConditionId::Int => "condition_int",
            ConditionId::Doubling => "condition_doubling",
            ConditionId::Cone => "condition_cone",
            ConditionId::ConvexHalf => "condition_convex_half",
        }
    }
}

/// One checked configuration.
///
/// For `INT` and `CONVEX_HALF` this is the ball pair `S(x,r)`, `S(z,s)`.
/// For `DOUBLING`, `x = z` and `r = 2s`. For `CONE`, `x` is `x₁`, `z` is
/// empty, `r` is the level `a` and `s` the number of Monte Carlo draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub r: f64,
    pub s: f64,
    pub ratio: f64,
}

impl Witness {
    /// Recomputes the ratio of a ball-pair or doubling witness.
    pub fn reevaluate(&self, model: &DistributionModel, condition: ConditionId) -> Result<f64> {
        match condition {
            ConditionId::Int | ConditionId::ConvexHalf => {
                intersection_ratio(model, &self.x, self.r, &self.z, self.s)
            }
            ConditionId::Doubling => doubling_ratio_at(model, &self.z, self.s),
            ConditionId::Cone => Err(Error::Unsupported(
                "cone witnesses are Monte Carlo estimates".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEstimate {
    pub condition: ConditionId,
    /// Probability threshold δ (the level `a` for `CONE`).
    pub delta: f64,
    pub worst_ratio: f64,
    /// `None` when no reference constant applies to the model.
    pub bound: Option<f64>,
    pub tolerance: f64,
    pub samples_checked: usize,
    pub witnesses: Vec<Witness>,
    /// `worst_ratio ≤ bound + tolerance`; `None` without a bound.
    pub pass: Option<bool>,
}

impl ConditionEstimate {
    pub fn summary(&self) -> String {
        match self.pass {
            Some(false) => format!(
                "{}: violation found, worst ratio {} exceeds {} among {} configurations",
                self.condition.as_str(),
                self.worst_ratio,
                self.bound.unwrap_or(f64::NAN),
                self.samples_checked
            ),
            _ => format!(
                "{}: no violation found among {} configurations (worst ratio {})",
                self.condition.as_str(),
                self.samples_checked,
                self.worst_ratio
            ),
        }
    }
}

/// `(β, c_max) = (1 − f_min/(2 f_max), 2^d f_max/f_min)`.
pub fn remark1_constants(bounds: DensityBounds) -> Result<(f64, f64)> {
    if bounds.f_min.is_nan() || bounds.f_min <= 0.0 {
        return Err(Error::NonPositiveDensityBound(bounds.f_min));
    }
    let beta = 1.0 - 0.5 * bounds.f_min / bounds.f_max;
    let c_max = 2f64.powi(bounds.dim as i32) * bounds.f_max / bounds.f_min;
    Ok((beta, c_max))
}

/// Default cone covering constants `γ_1 = 2`, `γ_2 = 6`.
pub fn default_cone_gamma(dim: usize) -> Option<f64> {
    match dim {
        1 => Some(2.0),
        2 => Some(6.0),
        _ => None,
    }
}

fn in_support(model: &DistributionModel, p: &[f64]) -> bool {
    let unit = |t: f64| (0.0..=1.0).contains(&t);
    match model.kind() {
        ModelKind::Uniform1D { a, b } => (a..=b).contains(&p[0]),
        ModelKind::PowerCdf1D { .. } | ModelKind::MirrorPowerCdf1D { .. } => unit(p[0]),
        ModelKind::UniformSquare2D => unit(p[0]) && unit(p[1]),
        ModelKind::IsotropicGaussian { .. } => p.iter().all(|c| c.is_finite()),
    }
}

/// Deterministic centers: support edges and corners plus interior points.
fn anchors(model: &DistributionModel) -> Vec<Vec<f64>> {
    let unit_1d = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
    match model.kind() {
        ModelKind::Uniform1D { a, b } => unit_1d.iter().map(|t| vec![a + t * (b - a)]).collect(),
        ModelKind::PowerCdf1D { .. } | ModelKind::MirrorPowerCdf1D { .. } => {
            unit_1d.iter().map(|&t| vec![t]).collect()
        }
        ModelKind::UniformSquare2D => {
            let g = [0.0, 0.02, 0.5, 0.98, 1.0];
            g.iter()
                .flat_map(|&u| g.iter().map(move |&v| vec![u, v]))
                .collect()
        }
        ModelKind::IsotropicGaussian { dim, sigma } => {
            let mut out = vec![vec![0.0; dim]];
            for t in [0.5, 1.0, 2.0, 3.0] {
                let mut p = vec![0.0; dim];
                p[0] = t * sigma;
                out.push(p.clone());
                if dim >= 2 {
                    p[1] = -t * sigma;
                    out.push(p);
                }
            }
            out
        }
    }
}

fn directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..16)
            .map(|k| {
                let a = k as f64 * PI / 8.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => (0..dim)
            .flat_map(|i| {
                [1.0, -1.0].into_iter().map(move |sgn| {
                    let mut e = vec![0.0; dim];
                    e[i] = sgn;
                    e
                })
            })
            .collect(),
    }
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    match dim {
        1 => vec![if rng.random::<bool>() { 1.0 } else { -1.0 }],
        _ => loop {
            let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-3 && norm <= 1.0 {
                break v.into_iter().map(|c| c / norm).collect();
            }
        },
    }
}

fn log_uniform_prob<R: Rng + ?Sized>(rng: &mut R, delta: f64) -> f64 {
    let u: f64 = rng.random();
    delta * 100f64.powf(-u)
}

fn offset(x: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(a, e)| a + t * e).collect()
}

// ---------------------------------------------------------------------------
// Overlap measure
// ---------------------------------------------------------------------------

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its distance to the embedded 7-point
/// Gauss rule.
fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * KRONROD_WEIGHTS[7];
    let mut g = fc * GAUSS_WEIGHTS[3];
    for i in 0..7 {
        let dx = h * KRONROD_NODES[i];
        let pair = f(c - dx) + f(c + dx);
        k += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            g += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> (f64, f64) {
    let (v, err) = gauss_kronrod(f, a, b);
    if err <= tol || depth == 0 {
        return (v, err);
    }
    let m = 0.5 * (a + b);
    let (l, el) = adaptive(f, a, m, 0.5 * tol, depth - 1);
    let (r, er) = adaptive(f, m, b, 0.5 * tol, depth - 1);
    (l + r, el + er)
}

/// Integral of a function on `[a, b]` with square-root behaviour at both
/// ends, after the substitution `u = mid − half·cos φ`.
fn integrate_piece(g: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let h = |phi: f64| g(mid - half * phi.cos()) * half * phi.sin();
    adaptive(&h, 0.0, PI, tol, 40)
}

/// Abscissae of the intersection points of two circles.
fn circle_circle_x(c1: &[f64], r1: f64, c2: &[f64], r2: f64) -> Vec<f64> {
    let dx = c2[0] - c1[0];
    let dy = c2[1] - c1[1];
    let d = dx.hypot(dy);
    if d == 0.0 || d > r1 + r2 || d < (r1 - r2).abs() {
        return Vec::new();
    }
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let px = c1[0] + a * dx / d;
    vec![px + h * dy / d, px - h * dy / d]
}

/// Abscissae where a circle meets the horizontal line `y = level`.
fn circle_line_x(c: &[f64], r: f64, level: f64) -> Vec<f64> {
    let dy = level - c[1];
    if dy.abs() > r {
        return Vec::new();
    }
    let w = (r * r - dy * dy).sqrt();
    vec![c[0] - w, c[0] + w]
}

/// Overlap measure with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub value: f64,
    pub abs_error_bound: f64,
}

/// `μ(S(x,r) ∩ S(z,s))`. Exact for one-dimensional models; adaptive
/// quadrature over the lens for the square and the planar Gaussian.
pub fn intersection_measure(
    model: &DistributionModel,
    x: &[f64],
    r: f64,
    z: &[f64],
    s: f64,
) -> Result<Overlap> {
    model.ball_prob(x, r)?;
    model.ball_prob(z, s)?;
    match model.dim() {
        1 => {
            let lo = (x[0] - r).max(z[0] - s);
            let hi = (x[0] + r).min(z[0] + s);
            let value = if hi < lo {
                0.0
            } else {
                model.cdf_1d(hi)? - model.cdf_1d(lo)?
            };
            Ok(Overlap {
                value,
                abs_error_bound: 0.0,
            })
        }
        2 => Ok(lens_2d(model, x, r, z, s)),
        d => Err(Error::Unsupported(format!(
            "overlap measure is implemented for d ≤ 2, got d = {d}"
        ))),
    }
}

type RealFn = Box<dyn Fn(f64) -> f64>;

fn lens_2d(model: &DistributionModel, x: &[f64], r: f64, z: &[f64], s: f64) -> Overlap {
    // Integrate the x-marginal density times the y-marginal mass of the
    // vertical chord through both disks.
    let (clip, weight, ycdf): (bool, RealFn, RealFn) = match model.kind() {
        ModelKind::UniformSquare2D => (
            true,
            Box::new(|u: f64| if (0.0..=1.0).contains(&u) { 1.0 } else { 0.0 }),
            Box::new(|v: f64| v.clamp(0.0, 1.0)),
        ),
        ModelKind::IsotropicGaussian { sigma, .. } => (
            false,
            Box::new(move |u: f64| {
                let t = u / sigma;
                (-0.5 * t * t).exp() / (sigma * (2.0 * PI).sqrt())
            }),
            Box::new(move |v: f64| 0.5 * erfc(-v / sigma * FRAC_1_SQRT_2)),
        ),
        _ => unreachable!("two-dimensional models only"),
    };
    let mut a = (x[0] - r).max(z[0] - s);
    let mut b = (x[0] + r).min(z[0] + s);
    if clip {
        a = a.max(0.0);
        b = b.min(1.0);
    }
    if b <= a {
        return Overlap {
            value: 0.0,
            abs_error_bound: 0.0,
        };
    }
    let chord = |u: f64| {
        let h1 = (r * r - (u - x[0]).powi(2)).max(0.0).sqrt();
        let h2 = (s * s - (u - z[0]).powi(2)).max(0.0).sqrt();
        let hi = (x[1] + h1).min(z[1] + h2);
        let lo = (x[1] - h1).max(z[1] - h2);
        if hi <= lo {
            0.0
        } else {
            weight(u) * (ycdf(hi) - ycdf(lo)).max(0.0)
        }
    };
    let mut breaks = vec![a, b, x[0] - r, x[0] + r, z[0] - s, z[0] + s];
    breaks.extend(circle_circle_x(x, r, z, s));
    if clip {
        for level in [0.0, 1.0] {
            breaks.extend(circle_line_x(x, r, level));
            breaks.extend(circle_line_x(z, s, level));
        }
    }
    breaks.retain(|&t| t >= a && t <= b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let tol = 1e-13;
    let (mut value, mut err) = (0.0, 0.0);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = integrate_piece(&chord, w[0], w[1], tol);
            value += v;
            err += e;
        }
    }
    Overlap {
        value,
        abs_error_bound: err + 1e-15,
    }
}

/// `μ(S(x,r) ∩ S(z,s)) / μ(S(z,s))`.
pub fn intersection_ratio(
    model: &DistributionModel,
    x: &[f64],
    r: f64,
    z: &[f64],
    s: f64,
) -> Result<f64> {
    let denom = model.ball_prob(z, s)?.prob;
    if denom <= 0.0 {
        return Err(Error::DegenerateBall);
    }
    Ok(intersection_measure(model, x, r, z, s)?.value / denom)
}

fn doubling_ratio_at(model: &DistributionModel, z: &[f64], s: f64) -> Result<f64> {
    let small = model.ball_prob(z, s)?.prob;
    if small <= 0.0 {
        return Err(Error::DegenerateBall);
    }
    Ok(model.ball_prob(z, 2.0 * s)?.prob / small)
}

// ---------------------------------------------------------------------------
// Configuration search
// ---------------------------------------------------------------------------

/// Places `other` at distance `κ · max(r, s)` from `anchor` along `dir`.
/// `s` depends on where `other` lands, so the distance is found by fixed-point
/// iteration. Returns `(other, s, distance)` or `None` when the point leaves
/// the support or the configuration is not admissible.
fn place_partner(
    model: &DistributionModel,
    anchor: &[f64],
    r: f64,
    p: f64,
    dir: &[f64],
    kappa: f64,
) -> Result<Option<(Vec<f64>, f64)>> {
    let mut dist = kappa * r;
    let mut partner = None;
    for _ in 0..30 {
        let z = offset(anchor, dir, dist);
        if !in_support(model, &z) {
            return Ok(None);
        }
        let s = model.ball_radius(&z, p)?;
        let next = kappa * r.max(s);
        let done = next == dist;
        partner = Some((z, s));
        if done {
            break;
        }
        dist = next;
    }
    Ok(partner.filter(|(z, s)| distance(anchor, z) >= r.max(*s)))
}

struct Candidate {
    witness: Witness,
    overlapping: bool,
}

fn ball_pair(
    model: &DistributionModel,
    anchor: &[f64],
    p: f64,
    dir: &[f64],
    kappa: f64,
    anchor_is_x: bool,
) -> Result<Option<Candidate>> {
    let ra = model.ball_radius(anchor, p)?;
    let Some((other, so)) = place_partner(model, anchor, ra, p, dir, kappa)? else {
        return Ok(None);
    };
    let (x, r, z, s) = if anchor_is_x {
        (anchor.to_vec(), ra, other, so)
    } else {
        (other, so, anchor.to_vec(), ra)
    };
    let overlapping = distance(&x, &z) <= r + s;
    let ratio = if overlapping {
        intersection_ratio(model, &x, r, &z, s)?
    } else {
        0.0
    };
    Ok(Some(Candidate {
        witness: Witness { x, z, r, s, ratio },
        overlapping,
    }))
}

/// Keeps the witnesses with the largest ratios, ties broken by insertion
/// order so the result does not depend on scheduling.
fn top_witnesses(mut all: Vec<Witness>) -> Vec<Witness> {
    all.sort_by(|a, b| b.ratio.total_cmp(&a.ratio));
    all.truncate(MAX_WITNESSES);
    all
}

fn fold_ratios(found: Vec<Witness>) -> (f64, usize, Vec<Witness>) {
    let worst = found.iter().map(|w| w.ratio).fold(0.0, f64::max);
    let n = found.len();
    (worst, n, top_witnesses(found))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::ProbabilityOutOfRange(delta));
    }
    Ok(())
}

fn kernel_tolerance(model: &DistributionModel) -> f64 {
    if model.dim() == 1 {
        EXACT_TOLERANCE
    } else {
        QUADRATURE_TOLERANCE
    }
}

/// Random and adversarial overlapping ball pairs with equal probability
/// `p ≤ δ` and `r + s ≥ ‖x − z‖ ≥ max(r, s)`.
fn overlapping_pairs(
    model: &DistributionModel,
    delta: f64,
    trials: usize,
    rng: &mut RngStream,
    keep: impl Fn(&Witness) -> bool + Sync,
) -> Result<Vec<Witness>> {
    let master = rng.next_u64();
    let tag = format!("overlap/{}", model.label());
    let random: Vec<Option<Candidate>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::substream(master, 0, i, &tag);
            let mut x = Vec::with_capacity(model.dim());
            model.sample_point(&mut rng, &mut x);
            let p = log_uniform_prob(&mut rng, delta);
            let dir = random_direction(&mut rng, model.dim());
            let kappa = 1.0 + rng.random::<f64>();
            match ball_pair(model, &x, p, &dir, kappa, true)? {
                Some(c) => Ok(Some(c)),
                None => {
                    let back: Vec<f64> = dir.iter().map(|e| -e).collect();
                    ball_pair(model, &x, p, &back, kappa, true)
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut grid = Vec::new();
    for anchor in anchors(model) {
        for dir in directions(model.dim()) {
            for p in [delta, delta / 10.0, delta / 100.0] {
                for kappa in [1.0, 1.25, 1.5] {
                    for anchor_is_x in [true, false] {
                        grid.push((anchor.clone(), dir.clone(), p, kappa, anchor_is_x));
                    }
                }
            }
        }
    }
    let adversarial: Vec<Option<Candidate>> = grid
        .par_iter()
        .map(|(a, dir, p, kappa, ax)| ball_pair(model, a, *p, dir, *kappa, *ax))
        .collect::<Result<_>>()?;

    Ok(random
        .into_iter()
        .chain(adversarial)
        .flatten()
        .filter(|c| c.overlapping && keep(&c.witness))
        .map(|c| c.witness)
        .collect())
}

/// Largest intersection ratio found over random and adversarial
/// configurations. Disjoint pairs are skipped. The reference is `β` from
/// the density bounds when `f_min > 0`.
pub fn check_intersection_ratio(
    model: &DistributionModel,
    delta: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<ConditionEstimate> {
    check_delta(delta)?;
    let found = overlapping_pairs(model, delta, trials, rng, |_| true)?;
    let (worst, checked, witnesses) = fold_ratios(found);
    let bound = model
        .density_bounds()
        .and_then(|b| remark1_constants(b).ok())
        .map(|(beta, _)| beta);
    let tolerance = kernel_tolerance(model);
    Ok(ConditionEstimate {
        condition: ConditionId::Int,
        delta,
        worst_ratio: worst,
        bound,
        tolerance,
        samples_checked: checked,
        witnesses,
        pass: bound.map(|b| worst <= b + tolerance),
    })
}

/// Largest `μ(S(z,2s)) / μ(S(z,s))` over random centers and support
/// anchors with `μ(S(z,s)) ≤ δ`.
pub fn check_doubling(
    model: &DistributionModel,
    delta: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<ConditionEstimate> {
    check_delta(delta)?;
    let master = rng.next_u64();
    let tag = format!("doubling/{}", model.label());
    let eval = |z: Vec<f64>, p: f64| -> Result<Witness> {
        let s = model.ball_radius(&z, p)?;
        let ratio = doubling_ratio_at(model, &z, s)?;
        Ok(Witness {
            x: z.clone(),
            z,
            r: 2.0 * s,
            s,
            ratio,
        })
    };
    let mut found: Vec<Witness> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::substream(master, 0, i, &tag);
            let mut z = Vec::with_capacity(model.dim());
            model.sample_point(&mut rng, &mut z);
            let p = log_uniform_prob(&mut rng, delta);
            eval(z, p)
        })
        .collect::<Result<_>>()?;
    for a in anchors(model) {
        for p in [delta, delta / 10.0, delta / 100.0] {
            found.push(eval(a.clone(), p)?);
        }
    }
    let (worst, checked, witnesses) = fold_ratios(found);
    let bound = model
        .density_bounds()
        .and_then(|b| remark1_constants(b).ok())
        .map(|(_, c)| c);
    let tolerance = kernel_tolerance(model);
    Ok(ConditionEstimate {
        condition: ConditionId::Doubling,
        delta,
        worst_ratio: worst,
        bound,
        tolerance,
        samples_checked: checked,
        witnesses,
        pass: bound.map(|b| worst <= b + tolerance),
    })
}

/// Monte Carlo estimate of `μ{x₂ : μ(S(x₂, ‖x₂ − x₁‖)) ≤ a}` and its
/// standard error.
pub fn cone_cover_estimate(
    model: &DistributionModel,
    x1: &[f64],
    a: f64,
    draws: usize,
    rng: &mut RngStream,
) -> (f64, f64) {
    let mut x2 = Vec::with_capacity(model.dim());
    let mut hits = 0usize;
    for _ in 0..draws {
        x2.clear();
        model.sample_point(rng, &mut x2);
        if model.ball_prob_unchecked(&x2, distance(&x2, x1)).prob <= a {
            hits += 1;
        }
    }
    let est = hits as f64 / draws as f64;
    (est, (est * (1.0 - est) / draws as f64).sqrt())
}

/// Cone-covering inequality at level `a` for every anchor `x₁`; each
/// anchor uses `trials` draws of `x₂`. Passes when every estimate is at most
/// `γ_d · a + 3·stderr`. Ratios are reported as `estimate / a`.
pub fn check_cone_cover(
    model: &DistributionModel,
    a: f64,
    trials: usize,
    rng: &mut RngStream,
    gamma: f64,
) -> Result<ConditionEstimate> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::ProbabilityOutOfRange(a));
    }
    if trials == 0 {
        return Err(Error::config("conditions.cone_samples", "must be >= 1"));
    }
    let master = rng.next_u64();
    let tag = format!("cone/{}", model.label());
    let points = anchors(model);
    let results: Vec<(Witness, bool, f64)> = points
        .par_iter()
        .enumerate()
        .map(|(i, x1)| {
            let mut rng = RngStream::substream(master, 0, i as u64, &tag);
            let (est, se) = cone_cover_estimate(model, x1, a, trials, &mut rng);
            let pass = est <= gamma * a + 3.0 * se;
            let w = Witness {
                x: x1.clone(),
                z: Vec::new(),
                r: a,
                s: trials as f64,
                ratio: est / a,
            };
            (w, pass, 3.0 * se / a)
        })
        .collect();
    let pass = results.iter().all(|(_, p, _)| *p);
    let tolerance = results
        .iter()
        .max_by(|x, y| x.0.ratio.total_cmp(&y.0.ratio))
        .map_or(0.0, |r| r.2);
    let (worst, checked, witnesses) = fold_ratios(results.into_iter().map(|r| r.0).collect());
    Ok(ConditionEstimate {
        condition: ConditionId::Cone,
        delta: a,
        worst_ratio: worst,
        bound: Some(gamma),
        tolerance,
        samples_checked: checked,
        witnesses,
        pass: Some(pass),
    })
}

/// Whether `F` is convex or concave on `S(x,r) ∪ S(z,s)`. `F` is flat
/// outside the support, so a convex `F` loses convexity past the right
/// edge and a concave one before the left edge.
fn cdf_shape_holds(model: &DistributionModel, w: &Witness) -> bool {
    let lo = (w.x[0] - w.r).min(w.z[0] - w.s);
    let hi = (w.x[0] + w.r).max(w.z[0] + w.s);
    match model.kind() {
        ModelKind::Uniform1D { a, b } => hi <= b || lo >= a,
        ModelKind::PowerCdf1D { theta: 1.0 } => hi <= 1.0 || lo >= 0.0,
        ModelKind::MirrorPowerCdf1D { theta: 1.0 } => hi <= 1.0 || lo >= 0.0,
        ModelKind::PowerCdf1D { .. } => hi <= 1.0,
        ModelKind::MirrorPowerCdf1D { .. } => lo >= 0.0,
        _ => false,
    }
}

/// Half-overlap property for one-dimensional models with convex or concave
/// distribution function: overlapping equal-probability balls with
/// `‖x − z‖ ≥ max(r, s)`, on whose union `F` keeps its shape, share at most
/// half their mass.
pub fn check_convexity_half(
    model: &DistributionModel,
    delta: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<ConditionEstimate> {
    check_delta(delta)?;
    if !model.has_convex_or_concave_cdf() {
        return Err(Error::Unsupported(format!(
            "{} does not have a convex or concave distribution function",
            model.label()
        )));
    }
    let found = overlapping_pairs(model, delta, trials, rng, |w| cdf_shape_holds(model, w))?;
    let (worst, checked, witnesses) = fold_ratios(found);
    Ok(ConditionEstimate {
        condition: ConditionId::ConvexHalf,
        delta,
        worst_ratio: worst,
        bound: Some(0.5),
        tolerance: EXACT_TOLERANCE,
        samples_checked: checked,
        witnesses,
        pass: Some(worst <= 0.5 + EXACT_TOLERANCE),
    })
}

/// Runs every applicable checker for the configured model.
pub fn run_conditions(config: &ExperimentConfig) -> Result<Vec<ConditionEstimate>> {
    config.validate()?;
    let model = &config.model;
    let c = &config.conditions;
    let mut rng = RngStream::substream(config.seed, 0, 0, &config.stream_tag());
    let requested = |id: ConditionId| c.checks.as_ref().is_none_or(|v| v.contains(&id));
    let explicit = |id: ConditionId| c.checks.as_ref().is_some_and(|v| v.contains(&id));
    let mut out = Vec::new();
    if requested(ConditionId::Int) && (model.dim() <= 2 || explicit(ConditionId::Int)) {
        out.push(check_intersection_ratio(
            model, c.delta, c.trials, &mut rng,
        )?);
    }
    if requested(ConditionId::Doubling) {
        out.push(check_doubling(model, c.delta, c.trials, &mut rng)?);
    }
    if requested(ConditionId::Cone) {
        match c.cone_gamma.or_else(|| default_cone_gamma(model.dim())) {
            Some(gamma) => {
                for &a in &c.cone_levels {
                    out.push(check_cone_cover(model, a, c.cone_samples, &mut rng, gamma)?);
                }
            }
            None if explicit(ConditionId::Cone) => {
                return Err(Error::config(
                    "conditions.cone_gamma",
                    format!("required for dimension {}", model.dim()),
                ))
            }
            None => {}
        }
    }
    if requested(ConditionId::ConvexHalf)
        && (model.has_convex_or_concave_cdf() || explicit(ConditionId::ConvexHalf))
    {
        out.push(check_convexity_half(model, c.delta, c.trials, &mut rng)?);
    }
    Ok(out)
}

/// Report rows: `n` is the number of configurations checked and `y` the
/// threshold δ (or the level `a`).
pub fn conditions_report(
    model: &DistributionModel,
    estimates: &[ConditionEstimate],
) -> VerifierReport {
    let mut report = VerifierReport::new("conditions", &model.label());
    for e in estimates {
        report.push(
            e.condition.check_name(),
            Some(e.samples_checked as u64),
            Some(e.delta),
            e.worst_ratio,
            e.bound.unwrap_or(f64::NAN),
            0.0,
            e.tolerance,
            e.pass,
        );
        report.note(e.summary());
        report.witnesses.extend(e.witnesses.iter().cloned());
    }
    if model.density_bounds().is_none_or(|b| b.f_min <= 0.0) {
        report.note(format!(
            "exploratory: {} has no positive density lower bound, so no reference β or c_max",
            model.label()
        ));
    }
    let no_config = estimates.iter().any(|e| e.samples_checked == 0);
    if no_config {
        report.note("a checker found no admissible configuration");
    }
    report.finish(no_config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unif() -> DistributionModel {
        DistributionModel::uniform_1d(0.0, 1.0).unwrap()
    }

    fn rng() -> RngStream {
        RngStream::from_seed(11)
    }

    #[test]
    fn remark_constants() {
        let b = |f_min, f_max, dim| DensityBounds { f_min, f_max, dim };
        assert_eq!(remark1_constants(b(1.0, 1.0, 1)).unwrap(), (0.5, 2.0));
        assert_eq!(remark1_constants(b(1.0, 1.0, 2)).unwrap(), (0.5, 4.0));
        assert_eq!(remark1_constants(b(1.0, 2.0, 1)).unwrap(), (0.75, 4.0));
        assert!(remark1_constants(b(0.0, 2.0, 1)).is_err());
    }

    #[test]
    fn disjoint_balls_have_zero_overlap() {
        let m = unif();
        let o = intersection_measure(&m, &[0.2], 0.05, &[0.5], 0.05).unwrap();
        assert_eq!(o.value, 0.0);
        let sq = DistributionModel::uniform_square_2d();
        let o = intersection_measure(&sq, &[0.2, 0.2], 0.1, &[0.7, 0.7], 0.1).unwrap();
        assert_eq!(o.value, 0.0);
    }

    #[test]
    fn touching_balls_ratio_zero() {
        let m = DistributionModel::power_cdf_1d(3.0).unwrap();
        let x = 0.4;
        let p = 0.01;
        let r = m.ball_radius(&[x], p).unwrap();
        // Place z so that its ball starts exactly where S(x, r) ends.
        let mut z = x + 2.0 * r;
        for _ in 0..100 {
            let s = m.ball_radius(&[z], p).unwrap();
            z = x + r + s;
        }
        let s = m.ball_radius(&[z], p).unwrap();
        let ratio = intersection_ratio(&m, &[x], r, &[z], s).unwrap();
        assert!(ratio < 1e-9, "{ratio}");
    }

    #[test]
    fn lens_of_identical_disks_is_ball_prob() {
        let sq = DistributionModel::uniform_square_2d();
        for (c, r) in [
            ([0.5, 0.5], 0.1),
            ([0.0, 0.0], 0.2),
            ([0.03, 0.6], 0.08),
            ([1.0, 0.4], 0.3),
        ] {
            let o = intersection_measure(&sq, &c, r, &c, r).unwrap();
            assert_abs_diff_eq!(o.value, sq.ball_prob(&c, r).unwrap().prob, epsilon = 1e-12);
        }
        let g = DistributionModel::isotropic_gaussian(2, 1.3).unwrap();
        for (c, r) in [([0.0, 0.0], 0.5), ([1.0, -2.0], 0.7)] {
            let o = intersection_measure(&g, &c, r, &c, r).unwrap();
            assert_abs_diff_eq!(o.value, g.ball_prob(&c, r).unwrap().prob, epsilon = 1e-11);
        }
    }

    #[test]
    fn interior_lens_matches_circle_geometry() {
        // Two unit-density disks of radius ρ at distance d overlap in
        // 2ρ² acos(d/2ρ) − (d/2)√(4ρ² − d²).
        let sq = DistributionModel::uniform_square_2d();
        let rho: f64 = 0.1;
        for d in [0.1, 0.13, 0.19] {
            let o =
                intersection_measure(&sq, &[0.5, 0.5], rho, &[0.5 + d * 0.6, 0.5 + d * 0.8], rho)
                    .unwrap();
            let want = 2.0 * rho * rho * (d / (2.0 * rho)).acos()
                - 0.5 * d * (4.0 * rho * rho - d * d).sqrt();
            assert_abs_diff_eq!(o.value, want, epsilon = 1e-12);
            assert!(o.abs_error_bound < 1e-6);
        }
    }

    #[test]
    fn wide_gaussian_lens_matches_circle_geometry() {
        // With σ much larger than the disks the density is flat to
        // relative order (ρ/σ)², so the lens is the geometric lens times
        // 1/(2πσ²).
        let sigma = 1e3;
        let g = DistributionModel::isotropic_gaussian(2, sigma).unwrap();
        let rho: f64 = 0.1;
        let d = 0.13;
        let o = intersection_measure(&g, &[0.0, 0.0], rho, &[d * 0.8, -d * 0.6], rho).unwrap();
        let area =
            2.0 * rho * rho * (d / (2.0 * rho)).acos() - 0.5 * d * (4.0 * rho * rho - d * d).sqrt();
        let scaled = o.value * 2.0 * PI * sigma * sigma;
        assert!((scaled - area).abs() <= 1e-7 * area, "{scaled} vs {area}");
    }

    #[test]
    fn gaussian_lens_is_rotation_invariant() {
        let g = DistributionModel::isotropic_gaussian(2, 1.0).unwrap();
        let (x, z) = ([0.7, 0.2], [1.1, -0.3]);
        let rot = |p: [f64; 2]| [-p[1], p[0]];
        let a = intersection_measure(&g, &x, 0.5, &z, 0.6).unwrap().value;
        let b = intersection_measure(&g, &rot(x), 0.5, &rot(z), 0.6)
            .unwrap()
            .value;
        assert!(a > 0.01);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn uniform_intersection_worst_case_near_half() {
        let e = check_intersection_ratio(&unif(), 0.05, 20_000, &mut rng()).unwrap();
        assert!(e.worst_ratio <= 0.5 + EXACT_TOLERANCE, "{}", e.worst_ratio);
        assert!(e.worst_ratio >= 0.45);
        assert_eq!(e.pass, Some(true));
        assert!(e.witnesses.len() <= MAX_WITNESSES);
    }

    #[test]
    fn pairs_have_equal_probability_and_are_admissible() {
        let m = DistributionModel::power_cdf_1d(2.0).unwrap();
        let e = check_convexity_half(&m, 0.05, 2_000, &mut rng()).unwrap();
        for w in &e.witnesses {
            let px = m.ball_prob(&w.x, w.r).unwrap().prob;
            let pz = m.ball_prob(&w.z, w.s).unwrap().prob;
            assert!((px - pz).abs() <= 1e-9, "{px} vs {pz}");
            assert!(distance(&w.x, &w.z) >= w.r.max(w.s));
            assert!((0.0..=1.0).contains(&w.ratio));
        }
        assert!(e.worst_ratio <= 0.5 + 1e-6);
    }

    #[test]
    fn witnesses_round_trip() {
        let sq = DistributionModel::uniform_square_2d();
        for (model, cond) in [
            (unif(), ConditionId::Int),
            (sq, ConditionId::Int),
            (sq, ConditionId::Doubling),
        ] {
            let e = match cond {
                ConditionId::Int => {
                    check_intersection_ratio(&model, 0.05, 500, &mut rng()).unwrap()
                }
                _ => check_doubling(&model, 0.05, 500, &mut rng()).unwrap(),
            };
            for w in &e.witnesses {
                let again = w.reevaluate(&model, cond).unwrap();
                assert!((again - w.ratio).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn doubling_uniform_examples() {
        let m = unif();
        assert_abs_diff_eq!(
            doubling_ratio_at(&m, &[0.5], 0.01).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            doubling_ratio_at(&m, &[0.0], 0.01).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        let e = check_doubling(&m, 0.05, 5_000, &mut rng()).unwrap();
        assert!(e.worst_ratio <= 2.0 + 1e-9);
        assert!(e.witnesses.iter().all(|w| w.ratio >= 1.0));
        let sq = check_doubling(
            &DistributionModel::uniform_square_2d(),
            0.05,
            5_000,
            &mut rng(),
        )
        .unwrap();
        assert!(sq.worst_ratio <= 4.0 + 1e-6, "{}", sq.worst_ratio);
        assert_eq!(sq.bound, Some(4.0));
    }

    #[test]
    fn cone_cover_uniform_center() {
        let m = unif();
        let (est, se) = cone_cover_estimate(&m, &[0.5], 0.1, 20_000, &mut rng());
        assert!(est <= 0.2 + 3.0 * se);
        // Exact value for an interior x₁ is a itself.
        assert!((est - 0.1).abs() <= 4.0 * se, "{est}");
        let full = check_cone_cover(&m, 1.0, 1_000, &mut rng(), 2.0).unwrap();
        assert!(full.worst_ratio <= 1.0);
        assert_eq!(full.pass, Some(true));
    }

    #[test]
    fn cone_estimate_monotone_in_level() {
        let sq = DistributionModel::uniform_square_2d();
        let mut last = 0.0;
        for a in [0.01, 0.05, 0.1, 0.5] {
            let (est, _) =
                cone_cover_estimate(&sq, &[0.2, 0.7], a, 5_000, &mut RngStream::from_seed(3));
            assert!(est >= last);
            last = est;
        }
    }

    #[test]
    fn power_edge_pairs_exceed_half() {
        // A ball ending at the right edge, where F stops being convex,
        // overlaps its neighbour by more than half.
        let m = DistributionModel::power_cdf_1d(3.0).unwrap();
        let e = check_intersection_ratio(&m, 0.05, 2_000, &mut rng()).unwrap();
        assert!(e.worst_ratio > 0.5);
        assert_eq!(e.pass, None);
    }

    #[test]
    fn convexity_check_rejects_gaussian() {
        let g = DistributionModel::isotropic_gaussian(1, 1.0).unwrap();
        assert!(check_convexity_half(&g, 0.05, 10, &mut rng()).is_err());
        let e = check_convexity_half(
            &DistributionModel::power_cdf_1d(3.0).unwrap(),
            0.05,
            5_000,
            &mut rng(),
        )
        .unwrap();
        assert_eq!(e.pass, Some(true), "{}", e.worst_ratio);
    }

    #[test]
    fn square_corner_pair_exceeds_density_ratio_beta() {
        // Two clipped balls near the corner (0, 1). Most of S(z,s) \ S(x,r)
        // lies outside the square, so the overlap exceeds half of μ(S(z,s))
        // even though the density is constant on the support. A separate
        // Monte Carlo run with 2·10⁶ points gives 0.5872 ± 0.0005.
        let sq = DistributionModel::uniform_square_2d();
        let x = [0.050_188_441_675_075_3, 0.996_166_003_270_021];
        let z = [0.009_162_409_110_439_328, 0.961_416_985_730_220_3];
        let r: f64 = 0.053_493_795_713_488_626;
        let s = 0.052_721_044_978_283_5;
        assert!(distance(&x, &z) >= r.max(s));
        let px = sq.ball_prob(&x, r).unwrap().prob;
        let pz = sq.ball_prob(&z, s).unwrap().prob;
        assert!((px - pz).abs() < 1e-12 && pz <= 0.05);
        let ratio = intersection_ratio(&sq, &x, r, &z, s).unwrap();
        assert!((ratio - 0.5872).abs() < 2e-3, "{ratio}");
    }

    #[test]
    fn selected_checks_only() {
        let mut c =
            ExperimentConfig::new(crate::simulate::Experiment::Conditions, unif(), vec![], 1);
        c.conditions.trials = 200;
        c.conditions.cone_samples = 200;
        c.conditions.checks = Some(vec![ConditionId::Doubling]);
        let out = run_conditions(&c).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].condition, ConditionId::Doubling);
    }

    #[test]
    fn report_phrasing() {
        let e = check_doubling(&unif(), 0.05, 100, &mut rng()).unwrap();
        let r = conditions_report(&unif(), &[e]);
        assert!(r.notes[0].contains("no violation found among"));
        assert!(r.pass);
    }
}
