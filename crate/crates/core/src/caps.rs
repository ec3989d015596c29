//! Cap families of the parabola and the cone: small caps, the canonical
//! partition, sector planks, physical envelopes, and the auxiliary frequency
//! boxes used to localize orthogonality.
//!
//! Angles on the cone are measured in units of full turns divided by the arc
//! count: a family with `n` arcs has arcs `[k·2π/n, (k+1)·2π/n)`. Arc counts
//! are powers of two (or multiples of the canonical count) so that every
//! family nests inside the coarser ones.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boxgeom::{
    dual_box, essentially_contained, minkowski_sum_aligned, OrientedBox, DEFAULT_ANGLE_TOL,
};
use crate::error::{Error, Result};

/// Thickness constant: cap half-thickness is at least this multiple of the
/// neighborhood width.
pub const THICKNESS_CONSTANT: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curve {
    Parabola,
    Cone,
}

impl Curve {
    pub fn dim(self) -> usize {
        match self {
            Curve::Parabola => 2,
            Curve::Cone => 3,
        }
    }
}

impl std::str::FromStr for Curve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parabola" => Ok(Curve::Parabola),
            "cone" => Ok(Curve::Cone),
            other => Err(Error::InvalidParameter(format!("unknown curve '{other}'"))),
        }
    }
}

/// An ordered family of caps covering a neighborhood of the parabola or cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapFamily {
    pub curve: Curve,
    #[serde(rename = "R")]
    pub r: f64,
    /// α or β for small-cap families, s for sector families.
    pub exponent: f64,
    /// Width of the curve neighborhood the family covers.
    pub neighborhood: f64,
    pub caps: Vec<OrientedBox>,
    /// Interval midpoint ξ₀ (parabola) or arc midpoint angle (cone).
    pub anchors: Vec<f64>,
    /// Per-cap parameter interval: [a, b] in ξ for the parabola, an angle
    /// range for the cone.
    pub intervals: Vec<[f64; 2]>,
}

impl CapFamily {
    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.curve.dim()
    }

    /// Index of the cap whose parameter interval holds `param`; ties on a
    /// shared endpoint go to the lower index.
    pub fn locate_param(&self, param: f64) -> Option<usize> {
        let p = match self.curve {
            Curve::Parabola => param,
            Curve::Cone => param.rem_euclid(TAU),
        };
        self.intervals
            .iter()
            .position(|iv| p >= iv[0] && p <= iv[1])
    }

    /// Indices of caps of `fine` whose anchor falls in cap `k` of `self`.
    pub fn children(&self, k: usize, fine: &CapFamily) -> Vec<usize> {
        (0..fine.len())
            .filter(|&j| self.locate_param(fine.anchors[j]) == Some(k))
            .collect()
    }

    /// Number of caps containing `x`.
    pub fn multiplicity_at(&self, x: &[f64]) -> usize {
        self.caps.iter().filter(|c| c.contains(x)).count()
    }

    /// Cap `k` with the family's nominal edge lengths, centered on the curve at
    /// the anchor and carried by the cap frame.
    pub fn nominal_cap(&self, k: usize) -> OrientedBox {
        let cap = &self.caps[k];
        let t = self.anchors[k];
        let (center, edges) = match self.curve {
            Curve::Parabola => (
                vec![t, t * t],
                vec![self.r.powf(-self.exponent), 1.0 / self.r],
            ),
            Curve::Cone => {
                let (s, c) = t.sin_cos();
                let w = self.nominal_width();
                (vec![0.75 * c, 0.75 * s, 0.75], vec![1.0, w, self.neighborhood])
            }
        };
        OrientedBox::from_edges(center, cap.axes().to_vec(), &edges)
            .expect("nominal cap edges are positive")
    }

    /// Nominal tangential width of a cone cap: R^-β for small caps, s for
    /// sector planks.
    fn nominal_width(&self) -> f64 {
        if self.exponent <= 1.0 && self.neighborhood >= self.exponent * self.exponent * 0.999 {
            // sector family: neighborhood = max(s², 1/R)
            self.exponent
        } else {
            self.r.powf(-self.exponent)
        }
    }
}

pub fn is_dyadic(x: f64) -> bool {
    x > 0.0 && x.is_finite() && {
        let l = x.log2();
        (l - l.round()).abs() < 1e-12
    }
}

fn check_scale(r: f64, exponent: f64, name: &str) -> Result<()> {
    if !(is_dyadic(r) && r >= 4.0) {
        return Err(Error::InvalidParameter(format!(
            "R = {r} must be a power of two >= 4"
        )));
    }
    if !(0.5..=1.0).contains(&exponent) {
        return Err(Error::InvalidParameter(format!(
            "{name} = {exponent} must lie in [1/2, 1]"
        )));
    }
    Ok(())
}

fn parabola_frame(t: f64) -> Vec<Vec<f64>> {
    let n = (1.0 + 4.0 * t * t).sqrt();
    vec![vec![1.0 / n, 2.0 * t / n], vec![-2.0 * t / n, 1.0 / n]]
}

/// Frame at angle ω on the cone: generator, angular tangent, outward normal.
pub fn cone_frame(omega: f64) -> Vec<Vec<f64>> {
    let (s, c) = omega.sin_cos();
    let h = FRAC_1_SQRT_2;
    vec![
        vec![c * h, s * h, h],
        vec![-s, c, 0.0],
        vec![-c * h, -s * h, h],
    ]
}

/// Smallest box in `frame` containing `points`, inflated by `delta` on every
/// side and with each half-length at least the matching entry of `min_half`.
fn fit_box(frame: Vec<Vec<f64>>, points: &[Vec<f64>], delta: f64, min_half: &[f64]) -> OrientedBox {
    let n = frame.len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for p in points {
        for i in 0..n {
            let c: f64 = frame[i].iter().zip(p).map(|(a, b)| a * b).sum();
            lo[i] = lo[i].min(c);
            hi[i] = hi[i].max(c);
        }
    }
    let mut center = vec![0.0; n];
    let mut half = vec![0.0; n];
    for i in 0..n {
        let mid = 0.5 * (lo[i] + hi[i]);
        half[i] = (0.5 * (hi[i] - lo[i]) + delta).max(min_half[i]);
        for k in 0..n {
            center[k] += mid * frame[i][k];
        }
    }
    OrientedBox::new(center, frame, half).expect("fitted box is valid")
}

/// Γ_α(R⁻¹): caps over the ⌈2R^α⌉ equal subintervals of [-1, 1], realized as
/// boxes tangent to the parabola at the interval midpoint.
pub fn parabola_caps(r: f64, alpha: f64) -> Result<CapFamily> {
    check_scale(r, alpha, "alpha")?;
    let n = (2.0 * r.powf(alpha) - 1e-9).ceil() as usize;
    parabola_family(r, alpha, n)
}

/// Parabola family with an explicit interval count over [-1, 1].
pub fn parabola_family(r: f64, exponent: f64, n: usize) -> Result<CapFamily> {
    if n == 0 {
        return Err(Error::InvalidParameter("cap count must be positive".into()));
    }
    let delta = 1.0 / r;
    let w = 2.0 / n as f64;
    let mut caps = Vec::with_capacity(n);
    let mut anchors = Vec::with_capacity(n);
    let mut intervals = Vec::with_capacity(n);
    for k in 0..n {
        let a = -1.0 + k as f64 * w;
        let b = if k + 1 == n { 1.0 } else { a + w };
        let t0 = 0.5 * (a + b);
        let pts: Vec<Vec<f64>> = (0..=8)
            .map(|i| {
                let t = a + (b - a) * i as f64 / 8.0;
                vec![t, t * t]
            })
            .collect();
        caps.push(fit_box(
            parabola_frame(t0),
            &pts,
            delta,
            &[0.0, THICKNESS_CONSTANT * delta],
        ));
        anchors.push(t0);
        intervals.push([a, b]);
    }
    Ok(CapFamily {
        curve: Curve::Parabola,
        r,
        exponent,
        neighborhood: delta,
        caps,
        anchors,
        intervals,
    })
}

/// Canonical arc count of the cone at scale R: the power of two nearest R^½.
pub fn canonical_arc_count(r: f64) -> usize {
    let k = r.log2().round() as i64;
    1usize << ((k + 1) / 2)
}

/// Small-cap arc count: the multiple of the canonical count nearest R^β.
pub fn cone_arc_count(r: f64, beta: f64) -> usize {
    let base = canonical_arc_count(r);
    let m = (r.powf(beta) / base as f64).round().max(1.0) as usize;
    base * m
}

/// Box covering the `delta`-neighborhood of the cone over the angle range
/// `[lo, hi]`, in the frame at the arc midpoint.
fn cone_arc_box(lo: f64, hi: f64, delta: f64) -> OrientedBox {
    let mid = 0.5 * (lo + hi);
    let half_w = 0.5 * (hi - lo);
    let mut phis: Vec<f64> = (0..=64).map(|i| -half_w + 2.0 * half_w * i as f64 / 64.0).collect();
    for extra in [-PI, -PI / 2.0, 0.0, PI / 2.0, PI] {
        if extra.abs() <= half_w {
            phis.push(extra);
        }
    }
    let mut pts = Vec::with_capacity(2 * phis.len());
    for phi in phis {
        let (s, c) = (mid + phi).sin_cos();
        for rho in [0.5, 1.0] {
            pts.push(vec![rho * c, rho * s, rho]);
        }
    }
    fit_box(
        cone_frame(mid),
        &pts,
        delta,
        &[0.5, 0.0, THICKNESS_CONSTANT * delta],
    )
}

/// Cone family with `n` equal arcs starting at angle 0, covering the
/// `delta`-neighborhood.
pub fn cone_family(r: f64, exponent: f64, n: usize, delta: f64) -> Result<CapFamily> {
    if n == 0 {
        return Err(Error::InvalidParameter("arc count must be positive".into()));
    }
    let w = TAU / n as f64;
    let mut caps = Vec::with_capacity(n);
    let mut anchors = Vec::with_capacity(n);
    let mut intervals = Vec::with_capacity(n);
    // one box in local coordinates, rotated to every arc, so all caps share
    // identical half-lengths
    let proto = cone_arc_box(-0.5 * w, 0.5 * w, delta);
    let local = proto.local_coords(&[0.0; 3]);
    for k in 0..n {
        let lo = k as f64 * w;
        let mid = lo + 0.5 * w;
        let frame = cone_frame(mid);
        let mut center = vec![0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                center[j] -= local[i] * frame[i][j];
            }
        }
        caps.push(OrientedBox::new(center, frame, proto.half_lengths().to_vec())?);
        anchors.push(mid);
        intervals.push([lo, lo + w]);
    }
    Ok(CapFamily {
        curve: Curve::Cone,
        r,
        exponent,
        neighborhood: delta,
        caps,
        anchors,
        intervals,
    })
}

/// Γ_β(R⁻¹): 1 × R^-β × R⁻¹ caps of the cone.
pub fn cone_caps(r: f64, beta: f64) -> Result<CapFamily> {
    check_scale(r, beta, "beta")?;
    cone_family(r, beta, cone_arc_count(r, beta), 1.0 / r)
}

/// The canonical partition Θ of the cone.
pub fn canonical_cone_caps(r: f64) -> Result<CapFamily> {
    cone_caps(r, 0.5)
}

/// The canonical partition of the parabola (caps of width R^-½).
pub fn canonical_parabola_caps(r: f64) -> Result<CapFamily> {
    parabola_caps(r, 0.5)
}

/// Dyadic sector scales s = 1, 1/2, ..., down to the canonical width.
pub fn sector_scales(r: f64) -> Vec<f64> {
    let n = canonical_arc_count(r);
    let mut out = Vec::new();
    let mut m = 1usize;
    while m <= n {
        out.push(1.0 / m as f64);
        m *= 2;
    }
    out
}

fn check_sector_scale(r: f64, s: f64) -> Result<usize> {
    if !(is_dyadic(r) && r >= 4.0) {
        return Err(Error::InvalidParameter(format!("R = {r} must be a power of two >= 4")));
    }
    let n = canonical_arc_count(r);
    if !(is_dyadic(s) && s <= 1.0 && s * n as f64 >= 1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "s = {s} must be dyadic in [1/{n}, 1]"
        )));
    }
    Ok((1.0 / s).round() as usize)
}

/// 𝐒_s: the 1 × s × s² planks covering the s²-neighborhood of the cone (and
/// never thinner than the R⁻¹-neighborhood, so the finest scale is Θ).
pub fn sector_planks(r: f64, s: f64) -> Result<CapFamily> {
    let n = check_sector_scale(r, s)?;
    cone_family(r, s, n, (s * s).max(1.0 / r))
}

fn ordered_axes(b: &OrientedBox) -> Vec<Vec<f64>> {
    b.axes().to_vec()
}

/// U_τ for τ ∈ 𝐒_s: origin-centered Rs² × Rs × R box whose edges pair with
/// τ's generator, tangent and normal axes.
pub fn envelope_box(tau: &OrientedBox, s: f64, r: f64) -> OrientedBox {
    OrientedBox::from_edges(vec![0.0; 3], ordered_axes(tau), &[r * s * s, r * s, r])
        .expect("envelope edges are positive")
}

/// ν_θ: origin-centered R^(½-β) × R^-β × R⁻¹ box on θ's axes.
pub fn nu_box(theta: &OrientedBox, beta: f64, r: f64) -> OrientedBox {
    OrientedBox::from_edges(
        vec![0.0; 3],
        ordered_axes(theta),
        &[r.powf(0.5 - beta), r.powf(-beta), 1.0 / r],
    )
    .expect("nu edges are positive")
}

/// V_θ = U_τ + ν_θ*. U_τ is replaced by the comparable U_{θ,s} on θ's own
/// axes so the sum is taken between aligned boxes.
pub fn v_box(tau: &OrientedBox, theta: &OrientedBox, s: f64, beta: f64, r: f64) -> Result<OrientedBox> {
    if !essentially_contained(theta, tau, 2.0)? {
        return Err(Error::InvalidParameter("theta is not contained in tau".into()));
    }
    let u_theta = envelope_box(theta, s, r);
    minkowski_sum_aligned(&u_theta, &dual_box(&nu_box(theta, beta, r)), DEFAULT_ANGLE_TOL)
}

/// Split canonical cap `theta_index` of `theta_family` into π-planks of
/// nominal width R⁻¹s⁻¹: R^½·s equal sub-arcs.
pub fn pi_planks(theta_family: &CapFamily, theta_index: usize, s: f64) -> Result<CapFamily> {
    let r = theta_family.r;
    let n_theta = theta_family.len();
    let m = n_theta as f64 * s;
    if !(m >= 1.0 - 1e-9) || theta_family.curve != Curve::Cone {
        return Err(Error::InvalidParameter(format!(
            "pi-plank width R^-1 s^-1 exceeds the canonical width (s = {s})"
        )));
    }
    let m = m.round() as usize;
    let [lo, hi] = *theta_family
        .intervals
        .get(theta_index)
        .ok_or_else(|| Error::InvalidParameter(format!("bad theta index {theta_index}")))?;
    let w = (hi - lo) / m as f64;
    let delta = theta_family.neighborhood;
    let mut caps = Vec::with_capacity(m);
    let mut anchors = Vec::with_capacity(m);
    let mut intervals = Vec::with_capacity(m);
    for i in 0..m {
        let a = lo + i as f64 * w;
        let b = if i + 1 == m { hi } else { a + w };
        caps.push(cone_arc_box(a, b, delta));
        anchors.push(0.5 * (a + b));
        intervals.push([a, b]);
    }
    Ok(CapFamily {
        curve: Curve::Cone,
        r,
        exponent: s,
        neighborhood: delta,
        caps,
        anchors,
        intervals,
    })
}

/// An invertible affine map x ↦ Ax + b.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub linear: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

impl AffineMap {
    pub fn new(linear: Vec<Vec<f64>>, translation: Vec<f64>) -> Result<Self> {
        let m = Self {
            linear,
            translation,
        };
        if m.linear.len() != 2 || m.linear.iter().any(|row| row.len() != 2) || m.translation.len() != 2 {
            return Err(Error::InvalidParameter("only planar affine maps are supported".into()));
        }
        if m.det().abs() <= 1e-14 {
            return Err(Error::InvalidParameter("affine map is singular".into()));
        }
        Ok(m)
    }

    pub fn det(&self) -> f64 {
        let a = &self.linear;
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.linear
            .iter()
            .zip(&self.translation)
            .map(|(row, t)| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + t)
            .collect()
    }

    pub fn inverse(&self) -> AffineMap {
        let a = &self.linear;
        let d = self.det();
        let inv = vec![
            vec![a[1][1] / d, -a[0][1] / d],
            vec![-a[1][0] / d, a[0][0] / d],
        ];
        let t = inv
            .iter()
            .map(|row| -(row[0] * self.translation[0] + row[1] * self.translation[1]))
            .collect();
        AffineMap {
            linear: inv,
            translation: t,
        }
    }

    /// Action on physical space: the inverse transpose of the linear part.
    pub fn physical(&self) -> AffineMap {
        let inv = self.inverse().linear;
        AffineMap {
            linear: vec![vec![inv[0][0], inv[1][0]], vec![inv[0][1], inv[1][1]]],
            translation: vec![0.0, 0.0],
        }
    }

    /// Whether the image of `b` is comparable to `target`: `(1/c)·target`
    /// lies in the image, and the image lies in `c·target`.
    pub fn image_comparable(&self, b: &OrientedBox, target: &OrientedBox, c: f64) -> bool {
        let inv = self.inverse();
        let slack = 1.0 + 1e-12;
        let inner = target.dilate(1.0 / c).vertices().iter().all(|v| {
            let pre = inv.apply(v);
            b.local_coords(&pre)
                .iter()
                .zip(b.half_lengths())
                .all(|(x, h)| x.abs() <= h * slack)
        });
        let big = target.dilate(c);
        let outer = b.vertices().iter().all(|v| {
            let img = self.apply(v);
            big.local_coords(&img)
                .iter()
                .zip(big.half_lengths())
                .all(|(x, h)| x.abs() <= h * slack)
        });
        inner && outer
    }
}

/// Parabolic rescaling carrying the cap over [a, a+Δ] to the unit parabola
/// over [0, 1]: ξ ↦ ((ξ₁-a)/Δ, (ξ₂ - 2aξ₁ + a²)/Δ²).
pub fn parabolic_rescaling(a: f64, delta: f64) -> Result<AffineMap> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("degenerate width {delta}")));
    }
    if a < -1.0 - 1e-12 || a + delta > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "interval [{a}, {}] leaves [-1, 1]",
            a + delta
        )));
    }
    let d2 = delta * delta;
    AffineMap::new(
        vec![vec![1.0 / delta, 0.0], vec![-2.0 * a / d2, 1.0 / d2]],
        vec![-a / delta, a * a / d2],
    )
}

/// Euclidean distance from a point to the unit parabola {(t, t²): |t| ≤ 1}.
pub fn parabola_distance(x: &[f64]) -> f64 {
    let d = |t: f64| ((t - x[0]).powi(2) + (t * t - x[1]).powi(2)).sqrt();
    // stationary points of the squared distance: 2t³ + (1 - 2ξ₂)t - ξ₁ = 0
    let mut best = d(-1.0).min(d(1.0));
    for start in [x[0], -1.0, 0.0, 1.0] {
        let mut t = start.clamp(-1.0, 1.0);
        for _ in 0..50 {
            let g = 2.0 * t * t * t + (1.0 - 2.0 * x[1]) * t - x[0];
            let dg = 6.0 * t * t + 1.0 - 2.0 * x[1];
            if dg.abs() < 1e-300 {
                break;
            }
            let next = (t - g / dg).clamp(-1.0, 1.0);
            if (next - t).abs() < 1e-15 {
                t = next;
                break;
            }
            t = next;
        }
        best = best.min(d(t));
    }
    best
}

/// Euclidean distance to the truncated cone ξ₃ = |ξ'|, 1/2 ≤ ξ₃ ≤ 1, computed
/// in the (|ξ'|, ξ₃) half-plane.
pub fn cone_distance(x: &[f64]) -> f64 {
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let (ax, ay, bx, by) = (0.5, 0.5, 1.0, 1.0);
    let (dx, dy) = (bx - ax, by - ay);
    let t = (((rho - ax) * dx + (x[2] - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((rho - ax - t * dx).powi(2) + (x[2] - ay - t * dy).powi(2)).sqrt()
}

pub fn curve_distance(curve: Curve, x: &[f64]) -> f64 {
    match curve {
        Curve::Parabola => parabola_distance(x),
        Curve::Cone => cone_distance(x),
    }
}

/// Random points of the `delta`-neighborhood: a uniform curve point pushed
/// along the normal by a uniform offset in [-delta, delta].
pub fn neighborhood_samples<G: Rng>(curve: Curve, delta: f64, count: usize, rng: &mut G) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let off = rng.gen_range(-delta..=delta);
            match curve {
                Curve::Parabola => {
                    let t: f64 = rng.gen_range(-1.0..=1.0);
                    let n = parabola_frame(t);
                    vec![t + off * n[1][0], t * t + off * n[1][1]]
                }
                Curve::Cone => {
                    let omega: f64 = rng.gen_range(0.0..TAU);
                    let rho: f64 = rng.gen_range(0.5..=1.0);
                    let f = cone_frame(omega);
                    let (s, c) = omega.sin_cos();
                    vec![
                        rho * c + off * f[2][0],
                        rho * s + off * f[2][1],
                        rho + off * f[2][2],
                    ]
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxgeom::{comparable, minkowski_sum_additive, overlap_multiplicity, DEFAULT_COMPARABILITY};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parabola_counts() {
        assert_eq!(parabola_caps(256.0, 0.5).unwrap().len(), 32);
        let f = parabola_caps(256.0, 1.0).unwrap();
        assert_eq!(f.len(), 512);
        let k = f.locate_param(0.0).unwrap();
        let square = OrientedBox::axis_aligned(f.caps[k].center().to_vec(), vec![0.5 / 256.0; 2]).unwrap();
        assert!(comparable(&f.caps[k], &square, DEFAULT_COMPARABILITY).unwrap());
        assert_eq!(canonical_parabola_caps(256.0).unwrap(), parabola_caps(256.0, 0.5).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(parabola_caps(100.0, 0.75).is_err());
        assert!(parabola_caps(256.0, 0.4).is_err());
        assert!(cone_caps(256.0, 1.1).is_err());
        assert!(sector_planks(1024.0, 3.0 / 8.0).is_err());
        assert!(sector_planks(1024.0, 1.0 / 64.0).is_err());
        assert!(parabolic_rescaling(0.5, 0.0).is_err());
        assert!(parabolic_rescaling(0.95, 0.25).is_err());
    }

    #[test]
    fn cone_counts() {
        let theta = canonical_cone_caps(256.0).unwrap();
        assert_eq!(theta.len(), 16);
        assert_eq!(sector_planks(256.0, 1.0 / 16.0).unwrap(), {
            let mut t = theta.clone();
            t.exponent = 1.0 / 16.0;
            t
        });
        let small = cone_caps(1024.0, 1.0).unwrap();
        assert_eq!(small.len(), 1024);
        let s8 = sector_planks(1024.0, 0.125).unwrap();
        assert_eq!(s8.len(), 8);
        for (r, b) in [(64.0, 0.75), (1024.0, 0.75), (4096.0, 0.6), (2048.0, 0.9)] {
            let n = cone_caps(r, b).unwrap().len() as f64;
            let target = f64::powf(r, b);
            assert!(n <= 2.0 * target && n >= 0.5 * target, "R={r} beta={b}: {n}");
        }
    }

    #[test]
    fn single_sector_plank_covers_unit_neighborhood() {
        let s1 = sector_planks(1024.0, 1.0).unwrap();
        assert_eq!(s1.len(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in neighborhood_samples(Curve::Cone, 1.0, 2000, &mut rng) {
            assert!(s1.caps[0].contains(&p));
        }
    }

    #[test]
    fn cone_caps_share_half_lengths() {
        let f = cone_caps(1024.0, 0.75).unwrap();
        let h0 = f.caps[0].half_lengths().to_vec();
        for c in &f.caps {
            for (a, b) in c.half_lengths().iter().zip(&h0) {
                assert!((a - b).abs() <= 1e-14);
            }
            // rotation about the ξ₃ axis keeps the height of the center
            assert!((c.center()[2] - f.caps[0].center()[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn families_cover_their_neighborhoods() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let families = [
            parabola_caps(256.0, 0.5).unwrap(),
            parabola_caps(256.0, 0.75).unwrap(),
            parabola_caps(1024.0, 1.0).unwrap(),
            cone_caps(256.0, 0.5).unwrap(),
            cone_caps(1024.0, 0.75).unwrap(),
            cone_caps(64.0, 1.0).unwrap(),
            sector_planks(1024.0, 0.25).unwrap(),
        ];
        for fam in &families {
            let pts = neighborhood_samples(fam.curve, fam.neighborhood, 10_000, &mut rng);
            let m = overlap_multiplicity(&fam.caps, &pts);
            assert_eq!(m.histogram.get(&0), None, "uncovered points in {:?}", (fam.curve, fam.exponent));
            assert!(m.max <= 4, "multiplicity {} for {:?}", m.max, (fam.curve, fam.exponent));
        }
    }

    #[test]
    fn small_caps_nest_in_canonical_caps() {
        let r = 1024.0;
        let theta = canonical_cone_caps(r).unwrap();
        let gamma = cone_caps(r, 0.75).unwrap();
        for (j, g) in gamma.caps.iter().enumerate() {
            let owners: Vec<usize> = (0..theta.len())
                .filter(|&k| theta.locate_param(gamma.anchors[j]) == Some(k))
                .collect();
            assert_eq!(owners.len(), 1);
            assert!(essentially_contained(g, &theta.caps[owners[0]], DEFAULT_COMPARABILITY).unwrap());
            assert!(essentially_contained(g, &theta.caps[owners[0]], 2.0).unwrap());
        }
        let pis = pi_planks(&theta, 3, 1.0 / 16.0).unwrap();
        let kids = theta.children(3, &gamma);
        for &j in &kids {
            let owner = pis.locate_param(gamma.anchors[j]).unwrap();
            assert!(essentially_contained(&gamma.caps[j], &pis.caps[owner], 2.0).unwrap());
        }
    }

    #[test]
    fn envelope_examples() {
        let r = 4096.0;
        let theta = canonical_cone_caps(r).unwrap();
        let s = r.powf(-0.5);
        let u = envelope_box(&theta.caps[5], s, r);
        assert_eq!(u, dual_box(&theta.nominal_cap(5)).with_center(vec![0.0; 3]));
        let s1 = sector_planks(r, 1.0).unwrap();
        let e = envelope_box(&s1.caps[0], 1.0, r).edges();
        assert!(e.iter().all(|x| (x - r).abs() < 1e-9));
        let s8 = sector_planks(r, 0.125).unwrap();
        let e = envelope_box(&s8.caps[0], 0.125, r).edges();
        assert!((e[0] - 64.0).abs() < 1e-9 && (e[1] - 512.0).abs() < 1e-9 && (e[2] - r).abs() < 1e-9);
    }

    #[test]
    fn envelope_comparable_to_theta_envelope_and_hull() {
        let r: f64 = 4096.0;
        let s = r.powf(-0.25);
        let theta = canonical_cone_caps(r).unwrap();
        let tau = sector_planks(r, s).unwrap();
        for k in 0..tau.len() {
            let u_tau = envelope_box(&tau.caps[k], s, r);
            let kids = tau.children(k, &theta);
            assert_eq!(kids.len(), theta.len() / tau.len());
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for &j in &kids {
                let u_theta_s = envelope_box(&theta.caps[j], s, r);
                assert!(comparable(&u_tau, &u_theta_s, DEFAULT_COMPARABILITY).unwrap());
                let u_theta = envelope_box(&theta.caps[j], r.powf(-0.5), r);
                for v in u_theta.vertices() {
                    let c = u_tau.local_coords(&v);
                    for i in 0..3 {
                        lo[i] = lo[i].min(c[i]);
                        hi[i] = hi[i].max(c[i]);
                    }
                }
            }
            let half: Vec<f64> = (0..3).map(|i| 0.5 * (hi[i] - lo[i])).collect();
            let hull = OrientedBox::new(vec![0.0; 3], u_tau.axes().to_vec(), half).unwrap();
            assert!(comparable(&u_tau, &hull, DEFAULT_COMPARABILITY).unwrap());
        }
    }

    #[test]
    fn nu_and_v_boxes() {
        let r: f64 = 4096.0;
        let theta = canonical_cone_caps(r).unwrap();
        let nu = nu_box(&theta.caps[0], 0.5, r);
        let e = nu.edges();
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - r.powf(-0.5)).abs() < 1e-15 && (e[2] - 1.0 / r).abs() < 1e-15);
        let e = dual_box(&nu_box(&theta.caps[0], 0.75, r)).edges();
        assert!((e[0] - r.powf(0.25)).abs() < 1e-9 && (e[1] - r.powf(0.75)).abs() < 1e-9 && (e[2] - r).abs() < 1e-9);

        let s = r.powf(-0.5);
        let tau = sector_planks(r, s).unwrap();
        let v = v_box(&tau.caps[0], &theta.caps[0], s, 0.75, r).unwrap();
        let e = v.edges();
        assert!((e[0] - r.powf(0.25)).abs() < 1e-9 && (e[1] - r.powf(0.75)).abs() < 1e-9);
        assert!(v_box(&tau.caps[0], &theta.caps[7], s, 0.75, r).is_err());
    }

    #[test]
    fn gamma_plus_nu_overlap_is_bounded() {
        let r = 1024.0;
        let beta = 0.75;
        let theta = canonical_cone_caps(r).unwrap();
        let gamma = cone_caps(r, beta).unwrap();
        let k = 2;
        let nu = nu_box(&theta.caps[k], beta, r);
        let sums: Vec<OrientedBox> = theta
            .children(k, &gamma)
            .into_iter()
            .map(|j| minkowski_sum_additive(&gamma.caps[j], &nu, DEFAULT_ANGLE_TOL).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<Vec<f64>> = (0..20_000)
            .map(|_| {
                let c = &theta.caps[k];
                let loc: Vec<f64> = c.half_lengths().iter().map(|h| rng.gen_range(-1.5 * h..1.5 * h)).collect();
                (0..3)
                    .map(|i| c.center()[i] + (0..3).map(|a| loc[a] * c.axes()[a][i]).sum::<f64>())
                    .collect()
            })
            .collect();
        let m = overlap_multiplicity(&sums, &samples);
        assert!(m.max <= 16, "max multiplicity {}", m.max);
    }

    #[test]
    fn pi_plank_counts() {
        let theta = canonical_cone_caps(256.0).unwrap();
        assert_eq!(pi_planks(&theta, 0, 0.25).unwrap().len(), 4);
        let one = pi_planks(&theta, 0, 1.0 / 16.0).unwrap();
        assert_eq!(one.len(), 1);
        let (a, b) = (&one.caps[0], &theta.caps[0]);
        for (x, y) in a.half_lengths().iter().zip(b.half_lengths()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.center().iter().zip(b.center()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(pi_planks(&theta, 0, 1.0 / 32.0).is_err());
        assert!(pi_planks(&theta, 99, 0.25).is_err());
    }

    #[test]
    fn rescaling_identity_and_neighborhood() {
        let id = parabolic_rescaling(0.0, 1.0).unwrap();
        assert_eq!(id.apply(&[0.3, -0.7]), vec![0.3, -0.7]);

        let (a, d, r) = (0.25, 0.125, 1024.0);
        let map = parabolic_rescaling(a, d).unwrap();
        let width = 1.0 / (r * d * d);
        for i in 0..1000 {
            let t = a + d * (i / 2) as f64 / 499.0;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let img = map.apply(&[t, t * t + sign / r]);
            assert!(parabola_distance(&img) <= width * (1.0 + 1e-9));
            assert!(img[0] >= -1e-12 && img[0] <= 1.0 + 1e-12);
        }
        let inv = map.inverse();
        let back = inv.apply(&map.apply(&[0.4, 0.1]));
        assert!((back[0] - 0.4).abs() < 1e-12 && (back[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rescaling_turns_intersection_box_into_cube() {
        let (alpha, d, r) = (0.75, 0.25, 4096.0);
        let a = 0.25;
        let c = a + 0.5 * d;
        let frame = parabola_frame(c);
        let ra = f64::powf(r, alpha);
        let b = OrientedBox::from_edges(vec![0.0, 0.0], frame, &[ra, ra / d]).unwrap();
        let phys = parabolic_rescaling(a, d).unwrap().physical();
        let cube = OrientedBox::axis_aligned(vec![0.0, 0.0], vec![0.5 * ra * d; 2]).unwrap();
        assert!(phys.image_comparable(&b, &cube, DEFAULT_COMPARABILITY));
    }

    #[test]
    fn rescaling_maps_small_caps_to_small_caps() {
        let (r, alpha) = (4096.0, 0.75);
        let fam = parabola_caps(r, alpha).unwrap();
        let (a, d) = (0.0, 0.25);
        let map = parabolic_rescaling(a, d).unwrap();
        let inside: Vec<usize> = (0..fam.len())
            .filter(|&k| fam.anchors[k] > a && fam.anchors[k] < a + d)
            .collect();
        let n = inside.len();
        let rescaled = parabola_family(r * d * d, alpha, 2 * n).unwrap();
        // images of the caps over [a, a+Δ] are the upper half of the rescaled family
        for (i, &k) in inside.iter().enumerate() {
            let [lo, hi] = fam.intervals[k];
            let img_lo = map.apply(&[lo, lo * lo])[0];
            let img_hi = map.apply(&[hi, hi * hi])[0];
            let [tlo, thi] = rescaled.intervals[n + i];
            assert!((img_lo - tlo).abs() < 1e-9 && (img_hi - thi).abs() < 1e-9);
            assert!(map.image_comparable(&fam.caps[k], &rescaled.caps[n + i], DEFAULT_COMPARABILITY));
        }
    }

    #[test]
    fn distance_functions() {
        assert!(parabola_distance(&[0.5, 0.25]) < 1e-12);
        assert!((parabola_distance(&[0.0, -0.1]) - 0.1).abs() < 1e-12);
        assert!((parabola_distance(&[1.5, 1.0]) - 0.5).abs() < 1e-12);
        assert!(cone_distance(&[0.6, 0.0, 0.6]) < 1e-12);
        assert!((cone_distance(&[0.0, 0.75, 0.75 + 0.01]) - 0.01 * FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn family_json_shape() {
        let f = parabola_caps(16.0, 0.5).unwrap();
        let v: serde_json::Value = serde_json::to_value(&f).unwrap();
        for key in ["curve", "R", "exponent", "caps", "anchors"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["curve"], "parabola");
        let back: CapFamily = serde_json::from_value(v).unwrap();
        assert_eq!(back, f);
    }
}
