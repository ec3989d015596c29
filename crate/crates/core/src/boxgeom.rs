//! Oriented boxes in R^2 and R^3: duality, comparability, aligned Minkowski
//! sums, lattice tilings and brute-force overlap counting.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthonormality tolerance for box axes.
pub const AXIS_TOL: f64 = 1e-12;

/// Default comparability constant.
pub const DEFAULT_COMPARABILITY: f64 = 100.0;

/// Default angular tolerance when pairing axes of two boxes.
pub const DEFAULT_ANGLE_TOL: f64 = 0.1;

/// Default cap on the number of tiles a [`Tiling`] may hold.
pub const DEFAULT_TILE_CAP: u64 = 20_000_000;

/// A box with arbitrary orientation: a center, an orthonormal frame and a
/// positive half-length along each frame axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct OrientedBox {
    center: Vec<f64>,
    axes: Vec<Vec<f64>>,
    half_lengths: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    center: Vec<f64>,
    axes: Vec<Vec<f64>>,
    half_lengths: Vec<f64>,
}

impl TryFrom<RawBox> for OrientedBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        OrientedBox::new(raw.center, raw.axes, raw.half_lengths)
    }
}

impl From<OrientedBox> for RawBox {
    fn from(b: OrientedBox) -> Self {
        RawBox {
            center: b.center,
            axes: b.axes,
            half_lengths: b.half_lengths,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl OrientedBox {
    pub fn new(center: Vec<f64>, axes: Vec<Vec<f64>>, half_lengths: Vec<f64>) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(Error::InvalidBox("zero-dimensional box".into()));
        }
        if axes.len() != n || half_lengths.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: axes.len().min(half_lengths.len()),
            });
        }
        for (i, a) in axes.iter().enumerate() {
            if a.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: a.len(),
                });
            }
            for (j, b) in axes.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                let d = dot(a, b);
                if (d - target).abs() > AXIS_TOL {
                    return Err(Error::InvalidBox(format!(
                        "axes {i},{j} not orthonormal (dot = {d:e})"
                    )));
                }
            }
        }
        if let Some(h) = half_lengths.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidBox(format!("non-positive half-length {h}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBox("non-finite center".into()));
        }
        Ok(Self {
            center,
            axes,
            half_lengths,
        })
    }

    /// Axis-aligned box with the given center and half-lengths.
    pub fn axis_aligned(center: Vec<f64>, half_lengths: Vec<f64>) -> Result<Self> {
        let n = center.len();
        let axes = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(center, axes, half_lengths)
    }

    /// Box with the given full edge lengths, centered at `center`.
    pub fn from_edges(center: Vec<f64>, axes: Vec<Vec<f64>>, edges: &[f64]) -> Result<Self> {
        Self::new(center, axes, edges.iter().map(|e| 0.5 * e).collect())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn half_lengths(&self) -> &[f64] {
        &self.half_lengths
    }

    /// Full edge lengths.
    pub fn edges(&self) -> Vec<f64> {
        self.half_lengths.iter().map(|h| 2.0 * h).collect()
    }

    pub fn volume(&self) -> f64 {
        self.half_lengths.iter().map(|h| 2.0 * h).product()
    }

    /// Coordinates of `x` in the box frame, relative to the center.
    pub fn local_coords(&self, x: &[f64]) -> Vec<f64> {
        let rel: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.axes.iter().map(|a| dot(&rel, a)).collect()
    }

    /// Exact closed membership: |<x - center, axis_i>| <= half_length_i for all i.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes.iter().zip(&self.half_lengths).all(|(a, h)| {
            let mut s = 0.0;
            for k in 0..x.len() {
                s += (x[k] - self.center[k]) * a[k];
            }
            s.abs() <= *h
        })
    }

    /// Euclidean distance from `x` to the box (zero inside).
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        self.local_coords(x)
            .iter()
            .zip(&self.half_lengths)
            .map(|(c, h)| (c.abs() - h).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                let mut v = self.center.clone();
                for (i, (a, h)) in self.axes.iter().zip(&self.half_lengths).enumerate() {
                    let sign = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    for k in 0..n {
                        v[k] += sign * h * a[k];
                    }
                }
                v
            })
            .collect()
    }

    /// Dilation by `factor` about the box's own center.
    pub fn dilate(&self, factor: f64) -> Self {
        Self {
            center: self.center.clone(),
            axes: self.axes.clone(),
            half_lengths: self.half_lengths.iter().map(|h| h * factor).collect(),
        }
    }

    pub fn translate(&self, offset: &[f64]) -> Self {
        Self {
            center: self.center.iter().zip(offset).map(|(c, o)| c + o).collect(),
            axes: self.axes.clone(),
            half_lengths: self.half_lengths.clone(),
        }
    }

    pub fn with_center(&self, center: Vec<f64>) -> Self {
        Self {
            center,
            axes: self.axes.clone(),
            half_lengths: self.half_lengths.clone(),
        }
    }

    /// Axis-aligned bounding extents: per coordinate, the largest offset from
    /// the center reached by the box.
    pub fn aabb_half_extents(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                self.axes
                    .iter()
                    .zip(&self.half_lengths)
                    .map(|(a, h)| (a[k] * h).abs())
                    .sum()
            })
            .collect()
    }
}

/// The dual box: centered at the origin, same axes, each full edge length
/// replaced by its reciprocal (so half-length h becomes 1/(4h)).
pub fn dual_box(b: &OrientedBox) -> OrientedBox {
    OrientedBox {
        center: vec![0.0; b.dim()],
        axes: b.axes.clone(),
        half_lengths: b.half_lengths.iter().map(|h| 1.0 / (4.0 * h)).collect(),
    }
}

fn check_dims(a: &OrientedBox, b: &OrientedBox) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// `(1/c)·a ⊂ b`, with `a` shrunk about its own center. For concentric boxes
/// this is the same as `a ⊂ c·b`.
pub fn essentially_contained(a: &OrientedBox, b: &OrientedBox, c: f64) -> Result<bool> {
    check_dims(a, b)?;
    // Tolerance only absorbs rounding in the vertex coordinates.
    let slack = 1e-12;
    Ok(a.dilate(1.0 / c).vertices().iter().all(|v| {
        b.local_coords(v)
            .iter()
            .zip(&b.half_lengths)
            .all(|(x, h)| x.abs() <= h * (1.0 + slack))
    }))
}

/// Mutual essential containment with constant `c`.
pub fn comparable(a: &OrientedBox, b: &OrientedBox, c: f64) -> Result<bool> {
    Ok(essentially_contained(a, b, c)? && essentially_contained(b, a, c)?)
}

fn axis_order(b: &OrientedBox) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..b.dim()).collect();
    idx.sort_by(|&i, &j| {
        b.half_lengths[j]
            .total_cmp(&b.half_lengths[i])
            .then_with(|| {
                b.axes[i]
                    .iter()
                    .zip(&b.axes[j])
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    idx
}

/// Sum of two roughly aligned boxes, up to comparability: the result sits on
/// `a`'s axes, centered at the sum of the centers, and along each axis takes
/// the larger of the two paired half-lengths. Axes are paired by descending
/// half-length; axes of `b` with tied half-lengths span a common subspace and
/// the alignment check is made against that subspace.
pub fn minkowski_sum_aligned(
    a: &OrientedBox,
    b: &OrientedBox,
    angle_tol: f64,
) -> Result<OrientedBox> {
    paired_sum(a, b, angle_tol, f64::max)
}

/// Like [`minkowski_sum_aligned`] but adds the paired half-lengths, so the
/// result contains the exact sum whenever the axes coincide.
pub fn minkowski_sum_additive(
    a: &OrientedBox,
    b: &OrientedBox,
    angle_tol: f64,
) -> Result<OrientedBox> {
    paired_sum(a, b, angle_tol, |x, y| x + y)
}

fn paired_sum(
    a: &OrientedBox,
    b: &OrientedBox,
    angle_tol: f64,
    combine: impl Fn(f64, f64) -> f64,
) -> Result<OrientedBox> {
    check_dims(a, b)?;
    let oa = axis_order(a);
    let ob = axis_order(b);
    let tied = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
    let mut half = a.half_lengths.clone();
    for (&i, &j) in oa.iter().zip(&ob) {
        let hj = b.half_lengths[j];
        let group: Vec<usize> = ob
            .iter()
            .copied()
            .filter(|&k| tied(b.half_lengths[k], hj))
            .collect();
        let proj = group
            .iter()
            .map(|&k| dot(&a.axes[i], &b.axes[k]).powi(2))
            .sum::<f64>()
            .sqrt()
            .min(1.0);
        let angle = proj.acos();
        if angle > angle_tol {
            return Err(Error::MisalignedAxes {
                angle,
                tol: angle_tol,
            });
        }
        half[i] = combine(a.half_lengths[i], hj);
    }
    Ok(OrientedBox {
        center: a.center.iter().zip(&b.center).map(|(x, y)| x + y).collect(),
        axes: a.axes.clone(),
        half_lengths: half,
    })
}

/// Translates of a prototype box along its own axes by integer multiples of
/// its full edge lengths.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tiling {
    pub prototype: OrientedBox,
    pub offsets: Vec<Vec<i64>>,
    pub radius: f64,
}

impl Tiling {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn tile(&self, offset: &[i64]) -> OrientedBox {
        tile_at(&self.prototype, offset)
    }

    pub fn boxes(&self) -> impl Iterator<Item = OrientedBox> + '_ {
        self.offsets.iter().map(|o| self.tile(o))
    }

    /// Lattice index of the tile whose half-open cell contains `x`.
    pub fn locate(&self, x: &[f64]) -> Vec<i64> {
        locate_in_lattice(&self.prototype, x)
    }
}

pub(crate) fn tile_at(proto: &OrientedBox, offset: &[i64]) -> OrientedBox {
    let n = proto.dim();
    let mut center = proto.center.clone();
    for i in 0..n {
        let step = offset[i] as f64 * 2.0 * proto.half_lengths[i];
        for k in 0..n {
            center[k] += step * proto.axes[i][k];
        }
    }
    proto.with_center(center)
}

/// Index of the lattice tile of `proto` containing `x`; cells are half-open so
/// every point gets exactly one tile.
pub fn locate_in_lattice(proto: &OrientedBox, x: &[f64]) -> Vec<i64> {
    proto
        .local_coords(x)
        .iter()
        .zip(&proto.half_lengths)
        .map(|(c, h)| (c / (2.0 * h) + 0.5).floor() as i64)
        .collect()
}

/// Tiles of the prototype lattice meeting the open ball of the given radius
/// about the origin.
pub fn tile_region(prototype: &OrientedBox, radius: f64) -> Result<Tiling> {
    tile_region_capped(prototype, radius, DEFAULT_TILE_CAP)
}

pub fn tile_region_capped(prototype: &OrientedBox, radius: f64, cap: u64) -> Result<Tiling> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
    }
    let n = prototype.dim();
    let origin = vec![0.0; n];
    let c_local = prototype.local_coords(&origin);
    let ranges: Vec<(i64, i64)> = (0..n)
        .map(|i| {
            let e = 2.0 * prototype.half_lengths[i];
            // origin sits at local coordinate c_local[i]; tile k spans [k e - e/2, k e + e/2]
            let lo = ((c_local[i] - radius) / e - 0.5).floor() as i64;
            let hi = ((c_local[i] + radius) / e + 0.5).ceil() as i64;
            (lo, hi)
        })
        .collect();
    let total: u64 = ranges.iter().map(|(lo, hi)| (hi - lo + 1) as u64).product();
    if total > cap.saturating_mul(8) {
        return Err(Error::TooManyTiles { count: total, cap });
    }
    let mut offsets = Vec::new();
    let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        // distance from the origin to tile k, computed in the prototype frame
        let d2: f64 = (0..n)
            .map(|i| {
                let h = prototype.half_lengths[i];
                let rel = c_local[i] - k[i] as f64 * 2.0 * h;
                (rel.abs() - h).max(0.0).powi(2)
            })
            .sum();
        if d2 < radius * radius {
            offsets.push(k.clone());
            if offsets.len() as u64 > cap {
                return Err(Error::TooManyTiles {
                    count: offsets.len() as u64,
                    cap,
                });
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok(Tiling {
                    prototype: prototype.clone(),
                    offsets,
                    radius,
                });
            }
            k[i] += 1;
            if k[i] <= ranges[i].1 {
                break;
            }
            k[i] = ranges[i].0;
            i += 1;
        }
    }
}

/// Result of [`overlap_multiplicity`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Multiplicity {
    pub max: usize,
    /// count of containing boxes -> number of sample points with that count
    pub histogram: BTreeMap<usize, usize>,
}

impl Multiplicity {
    fn merge(mut self, other: Multiplicity) -> Multiplicity {
        self.max = self.max.max(other.max);
        for (k, v) in other.histogram {
            *self.histogram.entry(k).or_insert(0) += v;
        }
        self
    }

    pub fn samples(&self) -> usize {
        self.histogram.values().sum()
    }
}

/// For each sample point, the number of boxes containing it.
pub fn overlap_multiplicity(boxes: &[OrientedBox], samples: &[Vec<f64>]) -> Multiplicity {
    samples
        .par_iter()
        .fold(Multiplicity::default, |mut acc, x| {
            let c = boxes.iter().filter(|b| b.contains(x)).count();
            acc.max = acc.max.max(c);
            *acc.histogram.entry(c).or_insert(0) += 1;
            acc
        })
        .reduce(Multiplicity::default, Multiplicity::merge)
}

/// Uniform lattice points with the given spacing inside the axis-aligned cube
/// `center ± half_extent`.
pub fn lattice_samples(center: &[f64], half_extent: f64, spacing: f64) -> Vec<Vec<f64>> {
    let n = center.len();
    let m = (half_extent / spacing).floor() as i64;
    let side = (2 * m + 1) as usize;
    let total = side.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = center.to_vec();
            for coord in p.iter_mut() {
                let k = (idx % side) as i64 - m;
                idx /= side;
                *coord += k as f64 * spacing;
            }
            p
        })
        .collect()
}

/// Lattice points (spacing `spacing`, centered at the origin) with
/// `inner <= |x| < outer`.
pub fn shell_samples(dim: usize, inner: f64, outer: f64, spacing: f64) -> Vec<Vec<f64>> {
    lattice_samples(&vec![0.0; dim], outer, spacing)
        .into_iter()
        .filter(|p| {
            let r = dot(p, p).sqrt();
            r >= inner && r < outer
        })
        .collect()
}

/// Lattice points of spacing `spacing` inside box `b`.
pub fn box_samples(b: &OrientedBox, spacing: f64) -> Vec<Vec<f64>> {
    let ext = b.aabb_half_extents();
    let n = b.dim();
    let ms: Vec<i64> = ext.iter().map(|e| (e / spacing).floor() as i64).collect();
    let mut out = Vec::new();
    let mut k: Vec<i64> = ms.iter().map(|m| -m).collect();
    loop {
        let p: Vec<f64> = (0..n).map(|i| b.center[i] + k[i] as f64 * spacing).collect();
        if b.contains(&p) {
            out.push(p);
        }
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            k[i] += 1;
            if k[i] <= ms[i] {
                break;
            }
            k[i] = -ms[i];
            i += 1;
        }
    }
}

/// Rotation of the standard basis in the plane by `angle`.
pub fn planar_frame(angle: f64) -> Vec<Vec<f64>> {
    let (s, c) = angle.sin_cos();
    vec![vec![c, s], vec![-s, c]]
}
