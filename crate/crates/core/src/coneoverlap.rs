//! Incidence counting for the horizontal slices of the cone's dual planks:
//! each γ* meets the plane {x₃ = r} in a 1 × R^β rectangle tangent to the
//! circle S_r. Brute-force counts are compared with the three-regime
//! prediction, and lattice sums with the slice and total integral formulas.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boxgeom::OrientedBox;
use crate::caps::{cone_arc_count, is_dyadic};
use crate::error::{Error, Result};
use crate::extremals::{IdealizedField, IndicatorRatio};

/// Below this distance from S_r (or radius r) the planks form a bush.
pub const CORE_RADIUS: f64 = 10.0;

/// Default cap on lattice points visited by one brute slice sum.
pub const DEFAULT_SLICE_POINT_CAP: u64 = 400_000_000;

/// A 1 × R^β rectangle centered on S_r with its long side tangent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicePlank {
    pub center: [f64; 2],
    pub tangent: [f64; 2],
    /// Half-lengths across and along the tangent: (1/2, R^β/2).
    pub half_lengths: [f64; 2],
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub beta: f64,
}

impl SlicePlank {
    pub fn contains(&self, p: &[f64]) -> bool {
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let along = d[0] * self.tangent[0] + d[1] * self.tangent[1];
        let across = -d[0] * self.tangent[1] + d[1] * self.tangent[0];
        across.abs() <= self.half_lengths[0] && along.abs() <= self.half_lengths[1]
    }

    pub fn to_box(&self) -> OrientedBox {
        let t = self.tangent;
        OrientedBox::new(
            self.center.to_vec(),
            vec![vec![-t[1], t[0]], t.to_vec()],
            self.half_lengths.to_vec(),
        )
        .expect("slice plank is a valid box")
    }
}

fn check_params(big_r: f64, beta: f64) -> Result<()> {
    if !(is_dyadic(big_r) && big_r >= 4.0) {
        return Err(Error::InvalidParameter(format!("R = {big_r} must be a power of two >= 4")));
    }
    if !(0.5..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta = {beta} outside [1/2, 1]")));
    }
    Ok(())
}

/// One plank per small cap γ ∈ Γ_β, centered at the arc midpoints.
pub fn slice_family(big_r: f64, beta: f64, r: f64) -> Result<Vec<SlicePlank>> {
    check_params(big_r, beta)?;
    slice_family_with_count(big_r, beta, r, cone_arc_count(big_r, beta))
}

/// `n` planks at angles (k + ½)·2π/n on the circle of radius `r`.
pub fn slice_family_with_count(big_r: f64, beta: f64, r: f64, n: usize) -> Result<Vec<SlicePlank>> {
    if !(r >= 0.0 && r.is_finite()) || n == 0 {
        return Err(Error::InvalidParameter(format!("bad slice radius {r} or count {n}")));
    }
    let long = 0.5 * big_r.powf(beta);
    Ok((0..n)
        .map(|k| {
            let w = (k as f64 + 0.5) * TAU / n as f64;
            let (s, c) = w.sin_cos();
            SlicePlank {
                center: [r * c, r * s],
                tangent: [-s, c],
                half_lengths: [0.5, long],
                r,
                big_r,
                beta,
            }
        })
        .collect())
}

/// Number of planks containing `p`.
pub fn brute_overlap(p: &[f64], planks: &[SlicePlank]) -> usize {
    planks.iter().filter(|q| q.contains(p)).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Core,
    Inner,
    Outer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub regime: Regime,
    /// False when (d, r) lies outside the ranges the formula covers; the
    /// value is then 0.
    pub in_range: bool,
}

/// Upper end of the inner regime: r, or r⁻¹R^{2β} once r ≥ R^β.
pub fn inner_limit(r: f64, big_r: f64, beta: f64) -> f64 {
    let rb = big_r.powf(beta);
    if r >= rb {
        rb * rb / r
    } else {
        r
    }
}

/// Three-regime overlap count at distance `d` from S_r.
pub fn predicted_overlap(d: f64, r: f64, big_r: f64, beta: f64) -> Prediction {
    let rb = big_r.powf(beta);
    let out = |regime| Prediction {
        value: 0.0,
        regime,
        in_range: false,
    };
    if r < CORE_RADIUS || d < 0.0 {
        return out(Regime::Core);
    }
    if d <= CORE_RADIUS {
        return Prediction {
            value: rb / r.sqrt(),
            regime: Regime::Core,
            in_range: true,
        };
    }
    let lim = inner_limit(r, big_r, beta);
    if d <= lim {
        return Prediction {
            value: rb / (r * d).sqrt(),
            regime: Regime::Inner,
            in_range: true,
        };
    }
    if r < rb && d <= rb {
        return Prediction {
            value: rb / d,
            regime: Regime::Outer,
            in_range: true,
        };
    }
    out(if r < rb { Regime::Outer } else { Regime::Inner })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Brute,
    Analytic,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(Method::Brute),
            "analytic" => Ok(Method::Analytic),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// The slice integral formula for ∫_{x₃=r} (Σ_γ 1_{γ*})^{p/2}.
pub fn analytic_slice(r: f64, p: f64, big_r: f64, beta: f64) -> f64 {
    let rb = big_r.powf(beta);
    let top = rb.powf(p / 2.0);
    if r <= CORE_RADIUS {
        rb * rb + top
    } else if r <= rb {
        r.powf(1.0 - p / 4.0) * top + r.powf(2.0 - p / 2.0) * top + rb * rb
    } else {
        r.powf(1.0 - p / 4.0) * top + rb * rb
    }
}

/// Unit-lattice sum of (plank count)^{p/2}.
pub fn brute_slice(r: f64, p: f64, big_r: f64, beta: f64, point_cap: u64) -> Result<f64> {
    let planks = slice_family(big_r, beta, r)?;
    brute_slice_of(&planks, p, point_cap)
}

pub fn brute_slice_of(planks: &[SlicePlank], p: f64, point_cap: u64) -> Result<f64> {
    let Some(first) = planks.first() else {
        return Ok(0.0);
    };
    let reach = first.r + first.half_lengths[1] + 1.0;
    let side = 2.0 * reach + 1.0;
    let points = (side * side) as u64;
    if points > point_cap {
        return Err(Error::GridOverflow {
            points,
            limit: point_cap,
            suggested_r: 0,
        });
    }
    let field = IdealizedField {
        boxes: planks.iter().map(SlicePlank::to_box).collect(),
        amplitudes: vec![1.0; planks.len()],
    };
    Ok(field.lattice_power_sum(p / 2.0, 1.0, true).total)
}

pub fn slice_integral(r: f64, p: f64, big_r: f64, beta: f64, method: Method) -> Result<f64> {
    check_params(big_r, beta)?;
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be >= 2")));
    }
    match method {
        Method::Analytic => Ok(analytic_slice(r, p, big_r, beta)),
        Method::Brute => brute_slice(r, p, big_r, beta, DEFAULT_SLICE_POINT_CAP),
    }
}

/// Slice heights and the length of r-interval each one stands for:
/// r = 0 for [0, 1), then r = 2^k for [2^k, 2^(k+1)) up to R, counted for
/// both signs of x₃.
pub fn slice_weights(big_r: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 2.0)];
    let mut r = 1.0;
    while r < big_r {
        out.push((r, 2.0 * r));
        r *= 2.0;
    }
    out
}

/// The three-term total: R^{pβ/2} + R^{2 - p/4 + pβ/2} + R^{1+2β}.
pub fn analytic_total(p: f64, big_r: f64, beta: f64) -> f64 {
    big_r.powf(p * beta / 2.0)
        + big_r.powf(2.0 - p / 4.0 + p * beta / 2.0)
        + big_r.powf(1.0 + 2.0 * beta)
}

/// ∫ (Σ_γ 1_{γ*})^{p/2} over |x₃| ≤ R: the formula, or the dyadic r-sum of
/// brute slice integrals.
pub fn total_integral(p: f64, big_r: f64, beta: f64, method: Method) -> Result<f64> {
    check_params(big_r, beta)?;
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be >= 2")));
    }
    match method {
        Method::Analytic => Ok(analytic_total(p, big_r, beta)),
        Method::Brute => {
            let mut total = 0.0;
            for (r, w) in slice_weights(big_r) {
                total += w * brute_slice(r, p, big_r, beta, DEFAULT_SLICE_POINT_CAP)?;
            }
            Ok(total)
        }
    }
}

/// Cone bump in the indicator model: f = Σ_γ 1_{γ*} is coherent on the unit
/// ball, so ‖f‖_p ≥ #Γ·|B(0,1)|^{1/p}, while ‖(Σ_γ 1_{γ*})^{1/2}‖_p^p is the
/// brute total integral.
pub fn cone_indicator(big_r: f64, beta: f64, p: f64) -> Result<IndicatorRatio> {
    let n = cone_arc_count(big_r, beta) as f64;
    let ball = 4.0 / 3.0 * std::f64::consts::PI;
    let lhs = n * ball.powf(1.0 / p);
    let total = total_integral(p, big_r, beta, Method::Brute)?;
    if total <= 0.0 {
        return Err(Error::ZeroDenominator("cone square function"));
    }
    let rhs = total.powf(1.0 / p);
    Ok(IndicatorRatio {
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

/// Growth exponent the cone bump witnesses: β − max{pβ/2, 2 − p/4 + pβ/2, 1 + 2β}/p.
pub fn cone_bump_exponent(beta: f64, p: f64) -> f64 {
    let top = (p * beta / 2.0)
        .max(2.0 - p / 4.0 + p * beta / 2.0)
        .max(1.0 + 2.0 * beta);
    beta - top / p
}

/// A measured count next to its prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub point: [f64; 2],
    pub d: f64,
    pub regime: Regime,
    pub predicted: f64,
    pub measured: usize,
}

impl RegimeReport {
    pub fn ratio(&self) -> f64 {
        self.measured as f64 / self.predicted
    }
}

/// Range of distances d sampled for one regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeWindow {
    pub regime: Regime,
    pub d_min: f64,
    pub d_max: f64,
}

/// Largest d at which a point outside S_r is still reached by a plank
/// whose tangent length to the point is at most `fraction` of its
/// half-length.
fn reach(r: f64, half_long: f64, fraction: f64) -> f64 {
    let l = fraction * half_long;
    (r * r + l * l).sqrt() - r
}

/// Sampling windows for each regime at slice radius r: a factor 2 band is
/// left out on either side of each regime seam (d = 10 and the inner limit),
/// and d stays where the tangent length is at most 80% of the plank's
/// half-length so every point is well inside the planks' reach.
pub fn regime_windows(r: f64, big_r: f64, beta: f64) -> Vec<RegimeWindow> {
    let rb = big_r.powf(beta);
    let far = reach(r, rb / 2.0, 0.8);
    let lim = inner_limit(r, big_r, beta);
    let mut out = vec![RegimeWindow {
        regime: Regime::Core,
        d_min: 0.0,
        d_max: CORE_RADIUS / 2.0,
    }];
    let inner = RegimeWindow {
        regime: Regime::Inner,
        d_min: 2.0 * CORE_RADIUS,
        d_max: (lim / 2.0).min(far),
    };
    if inner.d_max > inner.d_min {
        out.push(inner);
    }
    if r < rb {
        let outer = RegimeWindow {
            regime: Regime::Outer,
            d_min: 2.0 * r.max(CORE_RADIUS),
            d_max: far.min(rb),
        };
        if outer.d_max > outer.d_min {
            out.push(outer);
        }
    }
    out
}

/// `per_regime` random points outside S_r in each regime window, with brute
/// and predicted counts.
pub fn regime_reports(
    planks: &[SlicePlank],
    per_regime: usize,
    seed: u64,
) -> Vec<RegimeReport> {
    let Some(first) = planks.first() else {
        return vec![];
    };
    let (r, big_r, beta) = (first.r, first.big_r, first.beta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for w in regime_windows(r, big_r, beta) {
        for _ in 0..per_regime {
            let d = rng.gen_range(w.d_min..=w.d_max);
            let phi = rng.gen_range(0.0..TAU);
            let (s, c) = phi.sin_cos();
            let point = [(r + d) * c, (r + d) * s];
            let pred = predicted_overlap(d, r, big_r, beta);
            out.push(RegimeReport {
                point,
                d,
                regime: w.regime,
                predicted: pred.value,
                measured: brute_overlap(&point, planks),
            });
        }
    }
    out
}
