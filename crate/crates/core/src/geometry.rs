//! Nearest-neighbor radii and the statistics built on NN-ball probabilities.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::model::{distance, DistributionModel};
use crate::rng::RngStream;

/// An ordered set of points of a common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    dim: usize,
    coords: Vec<f64>,
}

impl SampleSet {
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len() % dim,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinitePoint);
        }
        Ok(SampleSet { dim, coords })
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Applies `f` to every coordinate.
    pub fn map_coords(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_flat(self.dim, self.coords.iter().map(|&c| f(c)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NnMethod {
    Brute,
    Grid,
}

/// Per-point NN radii and ball probabilities for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnBallStats {
    pub radii: Vec<f64>,
    pub probs: Vec<f64>,
    /// `P_n = max_i probs[i]`.
    pub max_prob: f64,
    /// `n·P_n − ln n`.
    pub centered_stat: f64,
    /// Number of points with a zero NN radius (coincident points).
    pub coincident: usize,
}

impl NnBallStats {
    pub fn n(&self) -> usize {
        self.probs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceedanceCount {
    pub y: OrderedY,
    pub count: usize,
}

/// Threshold stored by bit pattern so the count can derive `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedY(u64);

impl OrderedY {
    pub fn new(y: f64) -> Self {
        OrderedY(y.to_bits())
    }

    pub fn get(self) -> f64 {
        f64::from_bits(self.0)
    }
}

/// Volume of the unit ball in `R^d`, `π^{d/2} / Γ(1 + d/2)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    std::f64::consts::PI.powf(half) / gamma(1.0 + half)
}

/// `R_i = min_{j≠i} ‖X_i − X_j‖`.
///
/// `Grid` buckets the sample's bounding box into cells of side
/// `extent · n^{-1/d}` and searches rings outward; it is only used for
/// `d ≤ 2` and falls back to brute force otherwise. Both paths evaluate the
/// same distance function, so their outputs are bit-identical.
pub fn nn_radii(sample: &SampleSet, method: NnMethod) -> Result<Vec<f64>> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    Ok(match method {
        NnMethod::Grid if sample.dim() <= 2 => grid_radii(sample),
        _ => brute_radii(sample),
    })
}

fn brute_radii(sample: &SampleSet) -> Vec<f64> {
    let n = sample.len();
    let mut radii = vec![f64::INFINITY; n];
    for i in 0..n {
        let pi = sample.point(i);
        for j in (i + 1)..n {
            let d = distance(pi, sample.point(j));
            if d < radii[i] {
                radii[i] = d;
            }
            if d < radii[j] {
                radii[j] = d;
            }
        }
    }
    radii
}

struct Grid {
    lo: [f64; 2],
    cell: f64,
    dims: [usize; 2],
    /// `starts[c]..starts[c+1]` indexes `order` for cell `c`.
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl Grid {
    fn build(sample: &SampleSet) -> Self {
        let d = sample.dim();
        let n = sample.len();
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for k in 0..d {
            lo[k] = f64::INFINITY;
            hi[k] = f64::NEG_INFINITY;
        }
        for p in sample.iter() {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let extent = (0..d).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        let target = (n as f64).powf(1.0 / d as f64);
        let mut cell = if extent > 0.0 { extent / target } else { 1.0 };
        if !(cell > 0.0 && cell.is_finite()) {
            cell = 1.0;
        }
        let mut dims = [1usize; 2];
        for k in 0..d {
            dims[k] = (((hi[k] - lo[k]) / cell).floor() as usize + 1).max(1);
        }
        let ncells = dims[0] * dims[1];
        let mut cell_of = Vec::with_capacity(n);
        let mut counts = vec![0usize; ncells + 1];
        for p in sample.iter() {
            let c = Self::cell_index(&lo, cell, &dims, d, p);
            counts[c + 1] += 1;
            cell_of.push(c);
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut order = vec![0usize; n];
        for (i, &c) in cell_of.iter().enumerate() {
            order[fill[c]] = i;
            fill[c] += 1;
        }
        Grid {
            lo,
            cell,
            dims,
            starts,
            order,
        }
    }

    fn coord_cell(lo: f64, cell: f64, dim: usize, x: f64) -> usize {
        (((x - lo) / cell).floor().max(0.0) as usize).min(dim - 1)
    }

    fn cell_index(lo: &[f64; 2], cell: f64, dims: &[usize; 2], d: usize, p: &[f64]) -> usize {
        let cx = Self::coord_cell(lo[0], cell, dims[0], p[0]);
        let cy = if d == 2 {
            Self::coord_cell(lo[1], cell, dims[1], p[1])
        } else {
            0
        };
        cy * dims[0] + cx
    }
}

fn grid_radii(sample: &SampleSet) -> Vec<f64> {
    let d = sample.dim();
    let n = sample.len();
    let grid = Grid::build(sample);
    let mut radii = vec![f64::INFINITY; n];
    let max_ring = grid.dims[0].max(grid.dims[1]);
    for (i, radius) in radii.iter_mut().enumerate() {
        let p = sample.point(i);
        let cx = Grid::coord_cell(grid.lo[0], grid.cell, grid.dims[0], p[0]) as isize;
        let cy = if d == 2 {
            Grid::coord_cell(grid.lo[1], grid.cell, grid.dims[1], p[1]) as isize
        } else {
            0
        };
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring as isize {
            // Every point outside the rings searched so far is at least
            // (ring - 1) · cell away along some axis; one more cell of
            // padding absorbs rounding in the bucket assignment.
            if best.is_finite() && ((ring - 2) as f64) * grid.cell > best {
                break;
            }
            let ys: Vec<isize> = if d == 2 {
                (cy - ring..=cy + ring).collect()
            } else {
                vec![0]
            };
            for &yy in &ys {
                if yy < 0 || yy >= grid.dims[1] as isize {
                    continue;
                }
                let on_edge_row = d == 2 && (yy == cy - ring || yy == cy + ring);
                let xs: Vec<isize> = if on_edge_row || ring == 0 {
                    (cx - ring..=cx + ring).collect()
                } else {
                    vec![cx - ring, cx + ring]
                };
                for xx in xs {
                    if xx < 0 || xx >= grid.dims[0] as isize {
                        continue;
                    }
                    let c = yy as usize * grid.dims[0] + xx as usize;
                    for &j in &grid.order[grid.starts[c]..grid.starts[c + 1]] {
                        if j != i {
                            let dist = distance(p, sample.point(j));
                            if dist < best {
                                best = dist;
                            }
                        }
                    }
                }
            }
        }
        *radius = best;
    }
    radii
}

/// Preferred search method for a model's samples.
pub fn default_method(model: &DistributionModel) -> NnMethod {
    if model.dim() <= 2 {
        NnMethod::Grid
    } else {
        NnMethod::Brute
    }
}

/// NN radii, ball probabilities and `n·P_n − ln n` for one sample.
pub fn nn_ball_stats(model: &DistributionModel, sample: &SampleSet) -> Result<NnBallStats> {
    if sample.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: sample.dim(),
        });
    }
    let radii = nn_radii(sample, default_method(model))?;
    let probs: Vec<f64> = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| model.ball_prob_unchecked(sample.point(i), r).prob)
        .collect();
    let coincident = radii.iter().filter(|&&r| r == 0.0).count();
    let max_prob = probs.iter().copied().fold(0.0, f64::max);
    let n = probs.len() as f64;
    Ok(NnBallStats {
        radii,
        probs,
        max_prob,
        centered_stat: n * max_prob - n.ln(),
        coincident,
    })
}

/// `C_n(y) = #{i : n·probs[i] > y + ln n}`.
pub fn exceedance_count(stats: &NnBallStats, y: f64) -> ExceedanceCount {
    let n = stats.n() as f64;
    let level = y + n.ln();
    let count = stats.probs.iter().filter(|&&p| n * p > level).count();
    ExceedanceCount {
        y: OrderedY::new(y),
        count,
    }
}

/// `n · max_i f(X_i) v_d R_i^d − ln n`, the density-based approximation of
/// the NN-ball probability statistic.
pub fn approx_max_stat(model: &DistributionModel, sample: &SampleSet) -> Result<f64> {
    let radii = nn_radii(sample, default_method(model))?;
    let d = sample.dim();
    let vd = unit_ball_volume(d);
    let mut best = 0.0_f64;
    for (i, r) in radii.iter().enumerate() {
        let f = model.density(sample.point(i))?;
        best = best.max(f * vd * r.powi(d as i32));
    }
    let n = sample.len() as f64;
    Ok(n * best - n.ln())
}

/// Sample of Poisson(`intensity`) size; may be empty.
pub fn poissonized_sample(
    model: &DistributionModel,
    rng: &mut RngStream,
    intensity: f64,
) -> Result<SampleSet> {
    let dist = Poisson::new(intensity)
        .map_err(|e| Error::InvalidModel(format!("poisson intensity {intensity}: {e}")))?;
    let size = dist.sample(rng) as usize;
    Ok(model.sample(rng, size))
}

/// `n·P̃ − ln n` for a Poissonized sample. One point has an empty
/// neighbor set, so its radius is infinite and `P̃ = 1`; an empty sample
/// yields `−∞`, which never exceeds a finite threshold.
pub fn poissonized_stat(
    model: &DistributionModel,
    sample: &SampleSet,
    intensity: f64,
) -> Result<f64> {
    let max_prob = match sample.len() {
        0 => return Ok(f64::NEG_INFINITY),
        1 => 1.0,
        _ => nn_ball_stats(model, sample)?.max_prob,
    };
    Ok(intensity * max_prob - intensity.ln())
}
