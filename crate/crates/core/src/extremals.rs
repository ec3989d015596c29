//! Sharp examples for the small-cap square function inequality, the
//! indicator model of their wave packets, and predicted growth exponents.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxgeom::{dual_box, OrientedBox};
use crate::caps::{cone_distance, parabola_distance, CapFamily, Curve};
use crate::error::{Error, Result};
use crate::signal::{
    lp_norm, lp_norm_real, square_function, taper, GridFunction, GridSpec, Partition, Region,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentQuery {
    pub curve: Curve,
    pub exponent: f64,
    pub p: f64,
}

/// The two parabola branches `(α(½ - 2/p), (α - ½)(½ - 1/p))`.
pub fn parabola_branches(alpha: f64, p: f64) -> (f64, f64) {
    (alpha * (0.5 - 2.0 / p), (alpha - 0.5) * (0.5 - 1.0 / p))
}

/// The three cone branches for p ≥ 8, 4 ≤ p ≤ 8 and 2 ≤ p ≤ 4.
pub fn cone_branches(beta: f64, p: f64) -> [f64; 3] {
    [
        beta / 2.0,
        beta / 2.0 + 0.25 - 2.0 / p,
        (beta - 0.5) * (1.0 - 2.0 / p),
    ]
}

/// Exponent e with C(R) = R^e.
pub fn predicted_exponent(q: &ExponentQuery) -> Result<f64> {
    if !(q.p >= 2.0) {
        return Err(Error::InvalidParameter(format!("p = {} must be >= 2", q.p)));
    }
    if !(0.5..=1.0).contains(&q.exponent) {
        return Err(Error::InvalidParameter(format!(
            "exponent {} outside [1/2, 1]",
            q.exponent
        )));
    }
    Ok(match q.curve {
        Curve::Parabola => {
            let (a, b) = parabola_branches(q.exponent, q.p);
            if q.p >= 4.0 * q.exponent + 2.0 {
                a
            } else {
                b
            }
        }
        Curve::Cone => {
            let [a, b, c] = cone_branches(q.exponent, q.p);
            if q.p >= 8.0 {
                a
            } else if q.p >= 4.0 {
                b
            } else {
                c
            }
        }
    })
}

/// Smooth bump of the curve neighborhood: 1 within `delta` of the curve,
/// zero beyond `2·delta`, tapered off near the ends of the curve piece.
pub fn neighborhood_profile(curve: Curve, delta: f64, xi: &[f64]) -> f64 {
    match curve {
        Curve::Parabola => {
            let ends = taper(xi[0].abs() / (15.0 / 16.0), 1.0 / 15.0);
            if ends == 0.0 {
                return 0.0;
            }
            ends * taper(parabola_distance(xi) / (1.5 * delta), 1.0 / 3.0)
        }
        Curve::Cone => {
            let ends = taper((xi[2] - 0.75).abs() / 0.225, 1.0 / 9.0);
            if ends == 0.0 {
                return 0.0;
            }
            ends * taper(cone_distance(xi) / (1.5 * delta), 1.0 / 3.0)
        }
    }
}

fn profile_spectrum(spec: &GridSpec, curve: Curve, delta: f64) -> Vec<Complex64> {
    (0..spec.len())
        .into_par_iter()
        .map(|k| Complex64::new(neighborhood_profile(curve, delta, &spec.frequency(k)), 0.0))
        .collect()
}

fn check_grid(spec: &GridSpec, curve: Curve) -> Result<()> {
    if spec.dim() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve.dim(),
            got: spec.dim(),
        });
    }
    Ok(())
}

/// f̂ = smooth bump on the R⁻¹-neighborhood of the parabola.
pub fn concentrated_parabola(spec: &GridSpec, r: f64) -> Result<GridFunction> {
    check_grid(spec, Curve::Parabola)?;
    GridFunction::from_spectrum(spec.clone(), profile_spectrum(spec, Curve::Parabola, 1.0 / r))
}

/// f̂ = ψ_θ for canonical cap `theta_index` of `canonical`.
pub fn flat_parabola(canonical: &Partition, theta_index: usize) -> Result<GridFunction> {
    let m = canonical
        .multipliers
        .get(theta_index)
        .ok_or_else(|| Error::OutOfRange(format!("theta index {theta_index}")))?;
    let spec = canonical.spec.clone();
    let dense = m.to_dense(spec.len());
    GridFunction::from_spectrum(spec, dense.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
}

/// f̂ = smooth bump on the R⁻¹-neighborhood of the cone.
pub fn cone_bump(spec: &GridSpec, r: f64) -> Result<GridFunction> {
    check_grid(spec, Curve::Cone)?;
    GridFunction::from_spectrum(spec.clone(), profile_spectrum(spec, Curve::Cone, 1.0 / r))
}

/// A random cone-supported function: Σ_θ c_θ·(bump restricted to θ)
/// translated by a random physical offset, with complex Gaussian-ish c_θ.
pub fn random_cone(canonical: &Partition, r: f64, seed: u64) -> Result<GridFunction> {
    let spec = &canonical.spec;
    check_grid(spec, Curve::Cone)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = profile_spectrum(spec, Curve::Cone, 1.0 / r);
    let mut m = vec![Complex64::new(0.0, 0.0); spec.len()];
    for psi in &canonical.multipliers {
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let shift: Vec<f64> = spec
            .axes
            .iter()
            .map(|a| rng.gen_range(-0.25..0.25) * a.period())
            .collect();
        for (&i, &v) in psi.indices.iter().zip(&psi.values) {
            let xi = spec.frequency(i);
            let ph: f64 = xi.iter().zip(&shift).map(|(a, b)| a * b).sum();
            m[i] += c * v * profile[i] * Complex64::from_polar(1.0, -std::f64::consts::TAU * ph);
        }
    }
    GridFunction::from_spectrum(spec.clone(), m)
}

/// ‖f‖_p / ‖(Σ|f_γ|²)^{1/2}‖_p over the whole torus.
pub fn empirical_ratio(f: &GridFunction, partition: &Partition, p: f64) -> Result<f64> {
    let num = lp_norm(f, p, &Region::All)?;
    let sq = square_function(f, partition)?;
    let den = lp_norm_real(f.spec(), &sq, p, &Region::All)?;
    if den == 0.0 {
        return Err(Error::ZeroDenominator("square function norm"));
    }
    Ok(num / den)
}

/// Σ amplitude·1_box, evaluated exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealizedField {
    pub boxes: Vec<OrientedBox>,
    pub amplitudes: Vec<f64>,
}

/// Per-shell lattice sums: shell 0 is |x| ≤ 1, shell k is 2^(k-1) < |x| ≤ 2^k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSums {
    pub shell_sums: Vec<f64>,
    pub total: f64,
}

fn shell_of(x2: f64) -> usize {
    if x2 <= 1.0 {
        0
    } else {
        // smallest k with x2 <= 4^k
        let mut k = (0.5 * x2.log2()).ceil().max(1.0) as usize;
        while k > 1 && x2 <= 4f64.powi(k as i32 - 1) {
            k -= 1;
        }
        while x2 > 4f64.powi(k as i32) {
            k += 1;
        }
        k
    }
}

impl IdealizedField {
    /// Σ_γ |γ*|⁻¹ 1_{γ*} with γ* the dual box of each cap.
    pub fn from_family(family: &CapFamily) -> Self {
        Self::from_boxes(family.caps.iter().map(dual_box).collect(), 1.0)
    }

    /// As [`IdealizedField::from_family`], with each cap replaced by its
    /// nominal box (exact nominal dimensions instead of the fitted cover).
    pub fn from_family_nominal(family: &CapFamily) -> Self {
        Self::from_boxes((0..family.len()).map(|k| dual_box(&family.nominal_cap(k))).collect(), 1.0)
    }

    /// Amplitudes |B|^(-power) for each box B.
    pub fn from_boxes(boxes: Vec<OrientedBox>, power: f64) -> Self {
        let amplitudes = boxes.iter().map(|b| b.volume().powf(-power)).collect();
        Self { boxes, amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.boxes.first().map_or(0, |b| b.dim())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.boxes
            .iter()
            .zip(&self.amplitudes)
            .filter(|(b, _)| b.contains(x))
            .map(|(_, a)| a)
            .sum()
    }

    /// Number of boxes containing `x`.
    pub fn multiplicity(&self, x: &[f64]) -> usize {
        self.boxes.iter().filter(|b| b.contains(x)).count()
    }

    /// Σ over the lattice `spacing·Z^d` of `value(x)^q`, times the cell
    /// measure, split by dyadic shell of |x|. With `counts` the value is the
    /// plain multiplicity, otherwise the amplitude sum.
    pub fn lattice_power_sum(&self, q: f64, spacing: f64, counts: bool) -> ShellSums {
        let d = self.dim();
        if d == 0 {
            return ShellSums {
                shell_sums: vec![],
                total: 0.0,
            };
        }
        // lattice index bounds from the union of bounding boxes
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        for b in &self.boxes {
            let e = b.aabb_half_extents();
            for k in 0..d {
                lo[k] = lo[k].min(((b.center()[k] - e[k]) / spacing).floor() as i64);
                hi[k] = hi[k].max(((b.center()[k] + e[k]) / spacing).ceil() as i64);
            }
        }
        // lines run along axis 0; enumerate the remaining coordinates
        let line_dims: Vec<i64> = (1..d).map(|k| hi[k] - lo[k] + 1).collect();
        let n_lines: i64 = line_dims.iter().product();
        let width = (hi[0] - lo[0] + 1) as usize;
        let cell = spacing.powi(d as i32);
        let per_line: Vec<Vec<f64>> = (0..n_lines)
            .into_par_iter()
            .map_init(
                || vec![0.0f64; width + 1],
                |diff, line| {
                    let mut rest = vec![0.0; d];
                    let mut rem = line;
                    for k in (1..d).rev() {
                        let n = line_dims[k - 1];
                        rest[k] = (lo[k] + rem % n) as f64 * spacing;
                        rem /= n;
                    }
                    diff.iter_mut().for_each(|v| *v = 0.0);
                    let mut any = false;
                    for (b, &amp) in self.boxes.iter().zip(&self.amplitudes) {
                        if let Some((a, z)) = line_interval(b, &rest) {
                            let ia = ((a / spacing).ceil() as i64).max(lo[0]);
                            let iz = ((z / spacing).floor() as i64).min(hi[0]);
                            if ia <= iz {
                                let w = if counts { 1.0 } else { amp };
                                diff[(ia - lo[0]) as usize] += w;
                                diff[(iz - lo[0]) as usize + 1] -= w;
                                any = true;
                            }
                        }
                    }
                    let mut shells = Vec::new();
                    if !any {
                        return shells;
                    }
                    let rest2: f64 = rest.iter().map(|v| v * v).sum();
                    let mut acc = 0.0;
                    for (i, dv) in diff.iter().take(width).enumerate() {
                        acc += dv;
                        let v = if counts { acc.round() } else { acc };
                        if v <= 0.0 {
                            continue;
                        }
                        let x0 = (lo[0] + i as i64) as f64 * spacing;
                        let s = shell_of(x0 * x0 + rest2);
                        if shells.len() <= s {
                            shells.resize(s + 1, 0.0);
                        }
                        shells[s] += v.powf(q);
                    }
                    shells
                },
            )
            .collect();
        let mut shell_sums: Vec<f64> = Vec::new();
        for s in per_line {
            if shell_sums.len() < s.len() {
                shell_sums.resize(s.len(), 0.0);
            }
            for (a, b) in shell_sums.iter_mut().zip(&s) {
                *a += b;
            }
        }
        shell_sums.iter_mut().for_each(|v| *v *= cell);
        let total = shell_sums.iter().sum();
        ShellSums { shell_sums, total }
    }

    /// ∫_{B(0,1)} value^p, by a fine lattice of the given spacing.
    pub fn unit_ball_power(&self, p: f64, spacing: f64) -> f64 {
        let d = self.dim();
        let m = (1.0 / spacing).ceil() as i64;
        let side = (2 * m + 1) as usize;
        let n = side.pow(d as u32);
        let sum: f64 = (0..n)
            .into_par_iter()
            .map(|mut i| {
                let mut x = vec![0.0; d];
                for v in x.iter_mut() {
                    *v = ((i % side) as i64 - m) as f64 * spacing;
                    i /= side;
                }
                if x.iter().map(|v| v * v).sum::<f64>() > 1.0 {
                    return 0.0;
                }
                self.evaluate(&x).powf(p)
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        sum * spacing.powi(d as i32)
    }
}

/// Interval of x₀ along the line through `(·, rest[1..])` inside `b`.
fn line_interval(b: &OrientedBox, rest: &[f64]) -> Option<(f64, f64)> {
    let mut a = f64::NEG_INFINITY;
    let mut z = f64::INFINITY;
    let c = b.center();
    for (ax, h) in b.axes().iter().zip(b.half_lengths()) {
        let mut off = -ax[0] * c[0];
        for k in 1..rest.len() {
            off += ax[k] * (rest[k] - c[k]);
        }
        // constraint |ax0·x0 + off| ≤ h
        if ax[0].abs() < 1e-15 {
            if off.abs() > *h {
                return None;
            }
            continue;
        }
        let (l, u) = ((-h - off) / ax[0], (h - off) / ax[0]);
        let (l, u) = if l <= u { (l, u) } else { (u, l) };
        a = a.max(l);
        z = z.min(u);
    }
    (a <= z).then_some((a, z))
}

/// The indicator model Σ_γ |γ*|⁻¹ 1_{γ*} of a family.
pub fn indicator_model(family: &CapFamily) -> IdealizedField {
    IdealizedField::from_family(family)
}

/// The two sides of the square-function inequality in the indicator model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

fn ratio_of(lhs_p: f64, rhs_p: f64, p: f64) -> Result<IndicatorRatio> {
    if rhs_p <= 0.0 {
        return Err(Error::ZeroDenominator("indicator square function"));
    }
    let lhs = lhs_p.powf(1.0 / p);
    let rhs = rhs_p.powf(1.0 / p);
    Ok(IndicatorRatio {
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

/// Concentrated example: f = Σ_γ |γ*|⁻¹1_{γ*}, measured by ‖f‖_{L^p(B(0,1))}
/// against the full square function Σ_γ |γ*|⁻²1_{γ*} on the unit lattice.
/// Caps enter with their nominal dimensions.
pub fn concentrated_indicator(family: &CapFamily, p: f64) -> Result<IndicatorRatio> {
    let field = IdealizedField::from_family_nominal(family);
    let lhs = field.unit_ball_power(p, 1.0 / 16.0);
    let sq = IdealizedField::from_boxes(field.boxes.clone(), 2.0);
    let rhs = sq.lattice_power_sum(p / 2.0, 1.0, false).total;
    ratio_of(lhs, rhs, p)
}

/// Flat example: f = |θ*|⁻¹1_{θ*} for one canonical cap θ, against the
/// square function of the small caps γ ⊂ θ (nominal dimensions).
pub fn flat_indicator(
    canonical: &CapFamily,
    small: &CapFamily,
    theta_index: usize,
    p: f64,
) -> Result<IndicatorRatio> {
    if theta_index >= canonical.len() {
        return Err(Error::OutOfRange(format!("theta index {theta_index}")));
    }
    let kids = canonical.children(theta_index, small);
    if kids.is_empty() {
        return Err(Error::InvalidParameter("no small caps inside theta".into()));
    }
    let theta = canonical.nominal_cap(theta_index);
    let lhs_field = IdealizedField::from_boxes(vec![dual_box(&theta)], 1.0);
    let lhs = lhs_field.lattice_power_sum(p, 1.0, false).total;
    let sq = IdealizedField::from_boxes(
        kids.iter().map(|&k| dual_box(&small.nominal_cap(k))).collect(),
        2.0,
    );
    let rhs = sq.lattice_power_sum(p / 2.0, 1.0, false).total;
    ratio_of(lhs, rhs, p)
}
