//! Periodic sample grids, the unitary discrete Fourier transform, smooth
//! partitions of unity subordinate to a cap family, cap projections, L^p
//! norms, square functions and the local orthogonality defect.
//!
//! Each grid axis carries its own sample count `n` (a power of two), spacing
//! `Δx` and frequency offset. Sample `j` sits at the physical point
//! `(j - n/2)·Δx`; frequency index `k` sits at `offset + κ/(n·Δx)` where `κ`
//! is `k` folded into `[-n/2, n/2)`. The offset lets a short window of
//! frequencies sit over a support that is not centered at zero.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::boxgeom::OrientedBox;
use crate::caps::{curve_distance, CapFamily, Curve};
use crate::error::{Error, Result};

/// Default smoothness of partition bumps: fraction of each half-length over
/// which the profile tapers on either side of the nominal edge.
pub const DEFAULT_SMOOTHNESS: f64 = 0.5;

/// Default cap on the number of grid points.
pub const DEFAULT_POINT_LIMIT: u64 = 1 << 25;

/// Tolerated fraction of spectral mass outside the partition support.
pub const SUPPORT_TOLERANCE: f64 = 1e-10;

/// Decay power of the weight used by [`local_orthogonality_defect`].
pub const WEIGHT_POWER: i32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub n: usize,
    pub spacing: f64,
    pub freq_offset: f64,
}

impl AxisSpec {
    pub fn freq_step(&self) -> f64 {
        1.0 / (self.n as f64 * self.spacing)
    }

    /// Length of the physical period.
    pub fn period(&self) -> f64 {
        self.n as f64 * self.spacing
    }

    fn kappa(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.freq_offset + self.kappa(k) as f64 * self.freq_step()
    }

    pub fn position(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.spacing
    }

    /// Index range (as folded κ values) of lattice frequencies in `[lo, hi]`.
    fn kappa_range(&self, lo: f64, hi: f64) -> Option<(i64, i64)> {
        let step = self.freq_step();
        let half = (self.n / 2) as i64;
        let a = (((lo - self.freq_offset) / step).ceil() as i64).max(-half);
        let b = (((hi - self.freq_offset) / step).floor() as i64).min(half - 1);
        (a <= b).then_some((a, b))
    }

    fn index_of_kappa(&self, kappa: i64) -> usize {
        kappa.rem_euclid(self.n as i64) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

impl GridSpec {
    pub fn new(axes: Vec<AxisSpec>) -> Result<Self> {
        if !(2..=3).contains(&axes.len()) {
            return Err(Error::InvalidParameter(format!(
                "grids are 2D or 3D, got {} axes",
                axes.len()
            )));
        }
        for a in &axes {
            if a.n < 2 || !a.n.is_power_of_two() {
                return Err(Error::InvalidParameter(format!(
                    "axis length {} is not a power of two >= 2",
                    a.n
                )));
            }
            if !(a.spacing > 0.0 && a.spacing.is_finite()) || !a.freq_offset.is_finite() {
                return Err(Error::InvalidParameter("bad axis spacing or offset".into()));
            }
        }
        Ok(Self { axes })
    }

    /// `n` samples per axis at spacing `spacing`, frequencies centered at 0.
    pub fn cube(dim: usize, n: usize, spacing: f64) -> Result<Self> {
        Self::new(vec![
            AxisSpec {
                n,
                spacing,
                freq_offset: 0.0
            };
            dim
        ])
    }

    /// Grid whose frequency window holds `[lo_i, hi_i]` on every axis, with
    /// roughly `period` units of physical length per axis.
    pub fn for_window(lo: &[f64], hi: &[f64], period: f64, limit: u64) -> Result<Self> {
        let mut axes = Vec::with_capacity(lo.len());
        for (&a, &b) in lo.iter().zip(hi) {
            let width = b - a;
            if !(width > 0.0) {
                return Err(Error::InvalidParameter("empty frequency window".into()));
            }
            let n = nearest_pow2(period * width).max(16);
            // leave two lattice steps of slack on each side
            let window = width / (1.0 - 4.0 / n as f64);
            axes.push(AxisSpec {
                n,
                spacing: 1.0 / window,
                freq_offset: 0.5 * (a + b),
            });
        }
        let spec = Self::new(axes)?;
        if spec.len() as u64 > limit {
            return Err(Error::GridOverflow {
                points: spec.len() as u64,
                limit,
                suggested_r: 0,
            });
        }
        Ok(spec)
    }

    /// The grid used for neighborhoods of `curve` at scale R: the frequency
    /// window holds every partition bump and the physical period is about 2R.
    pub fn for_curve(curve: Curve, r: f64, limit: u64) -> Result<Self> {
        let (lo, hi) = curve_window(curve);
        match Self::for_window(&lo, &hi, 2.0 * r, limit) {
            Err(Error::GridOverflow { points, limit, .. }) => {
                let mut best = 0u64;
                let mut rr = 2.0;
                while let Ok(s) = Self::for_window(&lo, &hi, 2.0 * rr, u64::MAX) {
                    if s.len() as u64 > limit || rr > r {
                        break;
                    }
                    best = rr as u64;
                    rr *= 2.0;
                }
                Err(Error::GridOverflow {
                    points,
                    limit,
                    suggested_r: best,
                })
            }
            other => other,
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major strides (last axis contiguous).
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for i in (0..self.dim() - 1).rev() {
            s[i] = s[i + 1] * self.axes[i + 1].n;
        }
        s
    }

    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            out[i] = idx % self.axes[i].n;
            idx /= self.axes[i].n;
        }
        out
    }

    pub fn position(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx)
            .iter()
            .zip(&self.axes)
            .map(|(&j, a)| a.position(j))
            .collect()
    }

    pub fn frequency(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx)
            .iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.frequency(k))
            .collect()
    }

    /// Flat index of the physical origin.
    pub fn origin_index(&self) -> usize {
        self.strides()
            .iter()
            .zip(&self.axes)
            .map(|(s, a)| s * (a.n / 2))
            .sum()
    }

    /// Physical measure of one sample cell.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    /// Measure of one frequency lattice cell.
    pub fn freq_cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.freq_step()).product()
    }

    /// Physical volume of the torus.
    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.period()).product()
    }

    /// Calls `f(flat_index, frequency)` for every lattice frequency inside the
    /// axis-aligned window `[lo, hi]`.
    pub fn for_each_frequency_in(&self, lo: &[f64], hi: &[f64], mut f: impl FnMut(usize, &[f64])) {
        let ranges: Option<Vec<(i64, i64)>> = self
            .axes
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(a, (&l, &h))| a.kappa_range(l, h))
            .collect();
        let Some(ranges) = ranges else { return };
        let strides = self.strides();
        let d = self.dim();
        let mut kappa: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        let mut xi = vec![0.0; d];
        loop {
            let mut idx = 0;
            for i in 0..d {
                let a = &self.axes[i];
                idx += strides[i] * a.index_of_kappa(kappa[i]);
                xi[i] = a.freq_offset + kappa[i] as f64 * a.freq_step();
            }
            f(idx, &xi);
            let mut i = d;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                if kappa[i] < ranges[i].1 {
                    kappa[i] += 1;
                    break;
                }
                kappa[i] = ranges[i].0;
            }
        }
    }
}

fn nearest_pow2(x: f64) -> usize {
    let e = x.max(1.0).log2().round() as u32;
    1usize << e
}

/// Frequency window holding every partition bump of the curve's families.
pub fn curve_window(curve: Curve) -> (Vec<f64>, Vec<f64>) {
    match curve {
        Curve::Parabola => (vec![-1.25, -0.25], vec![1.25, 1.25]),
        Curve::Cone => (vec![-1.2, -1.2, 0.3], vec![1.2, 1.2, 1.2]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Space,
    Frequency,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Complex samples on a periodic grid, either in physical space or on the
/// frequency lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    domain: Domain,
    data: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(spec: GridSpec, domain: Domain) -> Self {
        let n = spec.len();
        Self {
            spec,
            domain,
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_vec(spec: GridSpec, domain: Domain, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                expected: spec.len(),
                got: data.len(),
            });
        }
        Ok(Self { spec, domain, data })
    }

    /// Physical function `x ↦ Σ_ξ m(ξ) e^{2πi x·ξ} Δξ`, the Riemann sum of
    /// the inverse Fourier integral of the lattice samples `m`.
    pub fn from_spectrum(spec: GridSpec, m: Vec<Complex64>) -> Result<Self> {
        let scale = (spec.len() as f64).sqrt() * spec.freq_cell_volume();
        let mut f = Self::from_vec(spec, Domain::Frequency, m)?.transform(Direction::Inverse);
        f.scale(Complex64::new(scale, 0.0));
        Ok(f)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value at the physical origin.
    pub fn at_origin(&self) -> Complex64 {
        self.data[self.spec.origin_index()]
    }

    /// Plain sum of squared moduli (no cell measure).
    pub fn sum_sq(&self) -> f64 {
        self.data.par_iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.par_iter().map(|z| z.norm()).reduce(|| 0.0, f64::max)
    }

    pub fn scale(&mut self, c: Complex64) {
        self.data.par_iter_mut().for_each(|z| *z *= c);
    }

    pub fn add_assign(&mut self, other: &GridFunction) {
        self.data
            .par_iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
    }

    /// Cyclic shift of the samples by `shift[i]` positions along axis `i`.
    pub fn roll(&self, shift: &[i64]) -> Self {
        let shape = self.spec.shape();
        let strides = self.spec.strides();
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for (idx, z) in self.data.iter().enumerate() {
            let mut rem = idx;
            let mut target = 0;
            for i in 0..shape.len() {
                let j = rem / strides[i];
                rem %= strides[i];
                let t = (j as i64 + shift[i]).rem_euclid(shape[i] as i64) as usize;
                target += t * strides[i];
            }
            out[target] = *z;
        }
        Self {
            spec: self.spec.clone(),
            domain: self.domain,
            data: out,
        }
    }

    /// Physical translation x ↦ f(x - a), applied as the phase e^{-2πi a·ξ}
    /// on the spectrum so the frequency support is unchanged. The result is
    /// in the same domain as `self`.
    pub fn translate(&self, a: &[f64]) -> Self {
        let domain = self.domain;
        let mut g = match domain {
            Domain::Space => self.clone().forward(),
            Domain::Frequency => self.clone(),
        };
        let spec = g.spec.clone();
        g.data.par_iter_mut().enumerate().for_each(|(i, z)| {
            let xi = spec.frequency(i);
            let phase: f64 = xi.iter().zip(a).map(|(x, b)| x * b).sum();
            *z *= Complex64::from_polar(1.0, -TAU * phase);
        });
        match domain {
            Domain::Space => g.inverse(),
            Domain::Frequency => g,
        }
    }

    /// Unitary transform. Forward maps space samples to
    /// `N^{-d/2} Σ_x f(x) e^{-2πi x·ξ}` on the frequency lattice; inverse
    /// undoes it.
    pub fn transform(mut self, dir: Direction) -> Self {
        let mut planner = FftPlanner::new();
        let strides = self.spec.strides();
        for (axis, a) in self.spec.axes.clone().iter().enumerate() {
            let n = a.n;
            let norm = 1.0 / (n as f64).sqrt();
            let twist: Vec<Complex64> = (0..n)
                .map(|j| {
                    let sign = if dir == Direction::Forward { -1.0 } else { 1.0 };
                    Complex64::from_polar(1.0, sign * TAU * a.position(j) * a.freq_offset)
                })
                .collect();
            let alt: Vec<f64> = (0..n)
                .map(|k| if k % 2 == 0 { norm } else { -norm })
                .collect();
            let fft = match dir {
                Direction::Forward => planner.plan_fft_forward(n),
                Direction::Inverse => planner.plan_fft_inverse(n),
            };
            let (pre, post): (Vec<Complex64>, Vec<Complex64>) = match dir {
                Direction::Forward => (twist, alt.iter().map(|&v| Complex64::new(v, 0.0)).collect()),
                Direction::Inverse => (alt.iter().map(|&v| Complex64::new(v, 0.0)).collect(), twist),
            };
            transform_axis(&mut self.data, strides[axis], n, &*fft, &pre, &post);
        }
        self.domain = match dir {
            Direction::Forward => Domain::Frequency,
            Direction::Inverse => Domain::Space,
        };
        self
    }

    pub fn forward(self) -> Self {
        self.transform(Direction::Forward)
    }

    pub fn inverse(self) -> Self {
        self.transform(Direction::Inverse)
    }

    /// Writes raw little-endian complex64 pairs to `path` and a JSON sidecar
    /// next to it.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for z in &self.data {
            w.write_all(&(z.re as f32).to_le_bytes())?;
            w.write_all(&(z.im as f32).to_le_bytes())?;
        }
        w.flush()?;
        let side = Sidecar {
            schema_version: 1,
            dim: self.spec.dim(),
            n: self.spec.shape(),
            spacing: self.spec.axes.iter().map(|a| a.spacing).collect(),
            freq_offset: self.spec.axes.iter().map(|a| a.freq_offset).collect(),
            domain: self.domain,
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn read_raw(path: &Path) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        if side.n.len() != side.dim || side.spacing.len() != side.dim {
            return Err(Error::DimensionMismatch {
                expected: side.dim,
                got: side.n.len(),
            });
        }
        let offsets = if side.freq_offset.is_empty() {
            vec![0.0; side.dim]
        } else {
            side.freq_offset
        };
        let spec = GridSpec::new(
            side.n
                .iter()
                .zip(&side.spacing)
                .zip(&offsets)
                .map(|((&n, &spacing), &freq_offset)| AxisSpec {
                    n,
                    spacing,
                    freq_offset,
                })
                .collect(),
        )?;
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() != 8 * spec.len() {
            return Err(Error::DimensionMismatch {
                expected: 8 * spec.len(),
                got: bytes.len(),
            });
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        Self::from_vec(spec, side.domain, data)
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    schema_version: u32,
    dim: usize,
    #[serde(rename = "N")]
    n: Vec<usize>,
    spacing: Vec<f64>,
    #[serde(default)]
    freq_offset: Vec<f64>,
    domain: Domain,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn transform_axis(
    data: &mut [Complex64],
    stride: usize,
    n: usize,
    fft: &dyn Fft<f64>,
    pre: &[Complex64],
    post: &[Complex64],
) {
    let block = n * stride;
    data.par_chunks_mut(block).for_each(|chunk| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        if stride == 1 {
            for (z, p) in chunk.iter_mut().zip(pre) {
                *z *= p;
            }
            fft.process_with_scratch(chunk, &mut scratch);
            for (z, p) in chunk.iter_mut().zip(post) {
                *z *= p;
            }
            return;
        }
        // gather the `stride` interleaved lines into contiguous rows
        let mut buf = vec![Complex64::new(0.0, 0.0); block];
        for j in 0..n {
            for i in 0..stride {
                buf[i * n + j] = chunk[j * stride + i] * pre[j];
            }
        }
        for row in buf.chunks_exact_mut(n) {
            fft.process_with_scratch(row, &mut scratch);
        }
        for j in 0..n {
            for i in 0..stride {
                chunk[j * stride + i] = buf[i * n + j] * post[j];
            }
        }
    });
}

/// C² taper: 1 on `[0, 1 - σ]`, 0 from `1 + σ`, in terms of `t = |x|/h`.
pub fn taper(t: f64, sigma: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 - sigma {
        1.0
    } else if t >= 1.0 + sigma {
        0.0
    } else {
        let u = (t - (1.0 - sigma)) / (2.0 * sigma);
        1.0 - (u - (TAU * u).sin() / TAU)
    }
}

/// Raw bump of a box: product over axes of the taper in the local coordinate.
pub fn box_bump(b: &OrientedBox, xi: &[f64], sigma: f64) -> f64 {
    let mut v = 1.0;
    for (c, h) in b.local_coords(xi).iter().zip(b.half_lengths()) {
        v *= taper(c / h, sigma);
        if v == 0.0 {
            break;
        }
    }
    v
}

/// Sparse frequency-lattice samples of one cutoff ψ.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Multiplier {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Multiplier {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// ψ·f̂ for a frequency-domain `fhat`.
    pub fn apply(&self, fhat: &GridFunction) -> GridFunction {
        let mut out = GridFunction::zeros(fhat.spec.clone(), Domain::Frequency);
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out.data[i] = fhat.data[i] * v;
        }
        out
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

/// Raw bump samples of `b` on the lattice of `spec`.
pub fn raw_bump(spec: &GridSpec, b: &OrientedBox, sigma: f64) -> Multiplier {
    let support = b.dilate(1.0 + sigma);
    let ext = support.aabb_half_extents();
    let lo: Vec<f64> = support.center().iter().zip(&ext).map(|(c, e)| c - e).collect();
    let hi: Vec<f64> = support.center().iter().zip(&ext).map(|(c, e)| c + e).collect();
    let mut m = Multiplier::default();
    spec.for_each_frequency_in(&lo, &hi, |idx, xi| {
        let v = box_bump(b, xi, sigma);
        if v > 0.0 {
            m.indices.push(idx);
            m.values.push(v);
        }
    });
    m
}

/// A smooth partition of unity ψ_γ subordinate to a cap family.
#[derive(Clone, Debug)]
pub struct Partition {
    pub spec: GridSpec,
    pub multipliers: Vec<Multiplier>,
    /// Lattice points where Σψ = 1.
    pub covered: Vec<bool>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.multipliers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multipliers.is_empty()
    }

    /// Σ_γ ψ_γ at every lattice point.
    pub fn total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.len()];
        for m in &self.multipliers {
            for (&i, &v) in m.indices.iter().zip(&m.values) {
                out[i] += v;
            }
        }
        out
    }
}

/// Normalized partition ψ_γ = b_γ / Σ b. Every lattice point within the
/// family's neighborhood width of the curve must carry a positive bump sum.
pub fn smooth_partition(spec: &GridSpec, family: &CapFamily, smoothness: f64) -> Result<Partition> {
    if !(smoothness > 0.0 && smoothness <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "smoothness {smoothness} outside (0, 1]"
        )));
    }
    if spec.dim() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: spec.dim(),
        });
    }
    let mut raw: Vec<Multiplier> = family
        .caps
        .par_iter()
        .map(|c| raw_bump(spec, c, smoothness))
        .collect();
    let mut sum = vec![0.0; spec.len()];
    for m in &raw {
        for (&i, &v) in m.indices.iter().zip(&m.values) {
            sum[i] += v;
        }
    }
    let curve = family.curve;
    let delta = family.neighborhood;
    // scan only the window around the curve for uncovered neighborhood points
    let (lo, hi) = curve_window(curve);
    let mut failure = None;
    spec.for_each_frequency_in(&lo, &hi, |idx, xi| {
        if failure.is_none() && sum[idx] <= 0.0 && curve_distance(curve, xi) <= delta {
            failure = Some(idx);
        }
    });
    if let Some(index) = failure {
        return Err(Error::CoverageFailure { index });
    }
    raw.par_iter_mut().for_each(|m| {
        for (i, v) in m.indices.iter().zip(m.values.iter_mut()) {
            *v /= sum[*i];
        }
    });
    let covered = sum.iter().map(|&s| s > 0.0).collect();
    Ok(Partition {
        spec: spec.clone(),
        multipliers: raw,
        covered,
    })
}

/// Cached spectrum of `f`, checked against a partition's support, from which
/// cap projections are drawn.
#[derive(Clone, Debug)]
pub struct Projector<'a> {
    pub partition: &'a Partition,
    pub fhat: GridFunction,
}

impl<'a> Projector<'a> {
    pub fn new(f: &GridFunction, partition: &'a Partition) -> Result<Self> {
        if f.spec != partition.spec {
            return Err(Error::InvalidParameter("grid of f differs from partition grid".into()));
        }
        let fhat = match f.domain {
            Domain::Space => f.clone().forward(),
            Domain::Frequency => f.clone(),
        };
        let total = fhat.sum_sq();
        let outside: f64 = fhat
            .data
            .par_iter()
            .zip(&partition.covered)
            .filter(|(_, c)| !**c)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        if total > 0.0 && outside > SUPPORT_TOLERANCE * total {
            return Err(Error::SupportViolation {
                fraction: outside / total,
            });
        }
        Ok(Self { partition, fhat })
    }

    /// f_γ for cap `k`, in physical space.
    pub fn project(&self, k: usize) -> GridFunction {
        self.partition.multipliers[k].apply(&self.fhat).inverse()
    }

    pub fn len(&self) -> usize {
        self.partition.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partition.is_empty()
    }

    /// Folds `op(acc, k, f_k)` over all caps; one projection is alive per
    /// worker at a time.
    pub fn fold_projections<T: Send>(
        &self,
        init: impl Fn() -> T + Sync + Send,
        op: impl Fn(T, usize, GridFunction) -> T + Sync + Send,
        merge: impl Fn(T, T) -> T + Sync + Send,
    ) -> T {
        (0..self.len())
            .into_par_iter()
            .fold(&init, |acc, k| op(acc, k, self.project(k)))
            .reduce(&init, merge)
    }
}

/// f_γ = (ψ_γ f̂)^∨ for cap `k` of `partition`.
pub fn cap_projection(f: &GridFunction, partition: &Partition, k: usize) -> Result<GridFunction> {
    if k >= partition.len() {
        return Err(Error::OutOfRange(format!("cap index {k}")));
    }
    Ok(Projector::new(f, partition)?.project(k))
}

/// Region over which an L^p norm is taken. Membership uses the periodic image
/// of each sample nearest the region's center.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    All,
    Ball { center: Vec<f64>, radius: f64 },
    Box(OrientedBox),
}

impl Region {
    fn center(&self) -> Option<&[f64]> {
        match self {
            Region::All => None,
            Region::Ball { center, .. } => Some(center),
            Region::Box(b) => Some(b.center()),
        }
    }

    fn contains_rel(&self, rel: &[f64]) -> bool {
        match self {
            Region::All => true,
            Region::Ball { radius, .. } => rel.iter().map(|x| x * x).sum::<f64>() <= radius * radius,
            Region::Box(b) => b
                .axes()
                .iter()
                .zip(b.half_lengths())
                .all(|(a, h)| crate::boxgeom::dot(rel, a).abs() <= *h),
        }
    }
}

/// Offset from `center` to the periodic image of sample `idx` nearest it.
fn wrapped_offset(spec: &GridSpec, idx: usize, center: &[f64]) -> Vec<f64> {
    spec.position(idx)
        .iter()
        .zip(center)
        .zip(&spec.axes)
        .map(|((x, c), a)| {
            let l = a.period();
            let d = x - c;
            d - l * (d / l).round()
        })
        .collect()
}

/// Flat indices of samples inside `region`.
pub fn region_indices(spec: &GridSpec, region: &Region) -> Vec<usize> {
    match region.center() {
        None => (0..spec.len()).collect(),
        Some(c) => (0..spec.len())
            .into_par_iter()
            .filter(|&i| region.contains_rel(&wrapped_offset(spec, i, c)))
            .collect(),
    }
}

/// `(Σ |f|^p Δx^d)^{1/p}` over the samples in `region`; `p = ∞` gives the max.
pub fn lp_norm(f: &GridFunction, p: f64, region: &Region) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be >= 1")));
    }
    let cell = match f.domain {
        Domain::Space => f.spec.cell_volume(),
        Domain::Frequency => f.spec.freq_cell_volume(),
    };
    let values: Box<dyn Fn(usize) -> f64 + Sync> = Box::new(|i| f.data[i].norm());
    Ok(lp_of(&f.spec, &*values, p, cell, region))
}

/// L^p norm of a nonnegative real grid.
pub fn lp_norm_real(spec: &GridSpec, values: &[f64], p: f64, region: &Region) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be >= 1")));
    }
    let get = |i: usize| values[i].abs();
    Ok(lp_of(spec, &get, p, spec.cell_volume(), region))
}

fn lp_of(spec: &GridSpec, get: &(dyn Fn(usize) -> f64 + Sync), p: f64, cell: f64, region: &Region) -> f64 {
    let idx: Box<dyn Iterator<Item = usize>> = match region {
        Region::All => Box::new(0..spec.len()),
        _ => Box::new(region_indices(spec, region).into_iter()),
    };
    let idx: Vec<usize> = idx.collect();
    if p.is_infinite() {
        return idx.par_iter().map(|&i| get(i)).reduce(|| 0.0, f64::max);
    }
    let s: f64 = idx.par_iter().map(|&i| get(i).powf(p)).sum();
    (s * cell).powf(1.0 / p)
}

/// Pointwise `(Σ_γ |f_γ|²)^{1/2}` over the caps of `partition`.
pub fn square_function(f: &GridFunction, partition: &Partition) -> Result<Vec<f64>> {
    let proj = Projector::new(f, partition)?;
    let n = f.len();
    let acc = proj.fold_projections(
        || vec![0.0; n],
        |mut acc, _, g| {
            for (a, z) in acc.iter_mut().zip(&g.data) {
                *a += z.norm_sqr();
            }
            acc
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            a
        },
    );
    Ok(acc.into_iter().map(f64::sqrt).collect())
}

/// Weight ≈ 1 on `b`, decaying like `(1 + dist/edge)^{-20}` along each axis.
pub fn box_weight(b: &OrientedBox, rel: &[f64]) -> f64 {
    b.axes()
        .iter()
        .zip(b.half_lengths())
        .map(|(a, h)| {
            let t = crate::boxgeom::dot(rel, a).abs();
            let excess = (t - h).max(0.0) / (2.0 * h);
            (1.0 + excess).powi(-WEIGHT_POWER)
        })
        .product()
}

/// `∫_B |Σ f_i|² / ∫ Σ |f_i|² ω_B²`.
pub fn local_orthogonality_defect(parts: &[GridFunction], b: &OrientedBox) -> Result<f64> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidParameter("no parts".into()))?;
    let spec = &first.spec;
    if spec.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: b.dim(),
        });
    }
    if parts.iter().any(|p| p.spec != *spec) {
        return Err(Error::InvalidParameter("parts live on different grids".into()));
    }
    let (num, den) = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let rel = wrapped_offset(spec, i, b.center());
            let w = box_weight(b, &rel);
            let sq: f64 = parts.iter().map(|p| p.data[i].norm_sqr()).sum();
            let inside = Region::Box(b.clone()).contains_rel(&rel);
            let num = if inside {
                parts
                    .iter()
                    .map(|p| p.data[i])
                    .sum::<Complex64>()
                    .norm_sqr()
            } else {
                0.0
            };
            (num, sq * w * w)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if den == 0.0 {
        if num == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::ZeroDenominator("local orthogonality weight integral"));
    }
    Ok(num / den)
}
