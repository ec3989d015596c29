//! Wave envelopes of a cone-supported function: the sector densities
//! Σ_{θ⊂τ}|f_θ|² integrated over the lattice translates U of U_τ, the
//! fourth-power envelope sum that bounds ‖f‖₄⁴, its amplitude-restricted
//! form, and superlevel-set measures.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxgeom::OrientedBox;
use crate::caps::{canonical_cone_caps, envelope_box, is_dyadic, sector_planks, sector_scales, CapFamily, Curve};
use crate::error::{Error, Result};
use crate::signal::{smooth_partition, GridFunction, GridSpec, Projector, DEFAULT_SMOOTHNESS};

/// Constant in front of the G_τ(λ) threshold.
pub const DEFAULT_G_CONSTANT: f64 = 1.0;

/// One translate U ∥ U_τ with its envelope energy ‖S_U f‖₂².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCell {
    pub s: f64,
    pub tau: usize,
    pub offset: Vec<i64>,
    #[serde(rename = "U")]
    pub u: OrientedBox,
    pub l2sq: f64,
}

/// All cells at one scale, ordered by (τ, offset).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleCells {
    pub s: f64,
    pub n_tau: usize,
    /// |U| = R³s³.
    pub cell_volume: f64,
    pub cells: Vec<EnvelopeCell>,
}

impl ScaleCells {
    pub fn energy(&self) -> f64 {
        self.cells.iter().map(|c| c.l2sq).sum()
    }

    /// Σ_U |U|⁻¹‖S_U f‖₂⁴ over the given cells.
    fn fourth_power_sum<'a>(&self, cells: impl Iterator<Item = &'a EnvelopeCell>) -> f64 {
        cells.fold(0.0, |acc, c| acc + c.l2sq * c.l2sq) / self.cell_volume
    }

    pub fn gwz_term(&self) -> f64 {
        self.fourth_power_sum(self.cells.iter())
    }

    /// G_τ(λ) threshold c·λ²/(ln R·(#𝐒_s)²) on |U|⁻¹‖S_U f‖₂².
    pub fn threshold(&self, lambda: f64, r: f64, c: f64) -> f64 {
        c * lambda * lambda / (r.ln() * (self.n_tau * self.n_tau) as f64)
    }

    pub fn significant(&self, lambda: f64, r: f64, c: f64) -> Vec<&EnvelopeCell> {
        let t = self.threshold(lambda, r, c);
        self.cells
            .iter()
            .filter(|c| c.l2sq > 0.0 && c.l2sq / self.cell_volume >= t)
            .collect()
    }
}

/// The θ-pieces of f as densities |f_θ|², computed once and shared by every
/// scale.
#[derive(Clone, Debug)]
pub struct ThetaDecomposition {
    pub r: f64,
    pub spec: GridSpec,
    pub theta: CapFamily,
    pub densities: Vec<Vec<f64>>,
    /// ‖f‖₂².
    pub norm_sq: f64,
}

impl ThetaDecomposition {
    pub fn new(f: &GridFunction, r: f64) -> Result<Self> {
        if f.spec().dim() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: f.spec().dim(),
            });
        }
        let theta = canonical_cone_caps(r)?;
        let partition = smooth_partition(f.spec(), &theta, DEFAULT_SMOOTHNESS)?;
        Self::with_partition(f, r, theta, &partition)
    }

    /// Uses an existing partition of the canonical family.
    pub fn with_partition(
        f: &GridFunction,
        r: f64,
        theta: CapFamily,
        partition: &crate::signal::Partition,
    ) -> Result<Self> {
        let projector = Projector::new(f, partition)?;
        let densities = (0..projector.len())
            .into_par_iter()
            .map(|k| projector.project(k).data().iter().map(|z| z.norm_sqr()).collect())
            .collect();
        let space = match f.domain() {
            crate::signal::Domain::Space => f.sum_sq() * f.spec().cell_volume(),
            crate::signal::Domain::Frequency => f.clone().inverse().sum_sq() * f.spec().cell_volume(),
        };
        Ok(Self {
            r,
            spec: f.spec().clone(),
            theta,
            densities,
            norm_sq: space,
        })
    }

    pub fn scales(&self) -> Vec<f64> {
        sector_scales(self.r)
    }

    fn check_scale(&self, s: f64) -> Result<()> {
        let n = self.theta.len() as f64;
        if !(is_dyadic(s) && s <= 1.0 && s * n >= 1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!("s = {s} is not a dyadic scale in [1/{n}, 1]")));
        }
        Ok(())
    }

    /// 𝐒_s together with the θ-children of each τ.
    pub fn sectors(&self, s: f64) -> Result<(CapFamily, Vec<Vec<usize>>)> {
        self.check_scale(s)?;
        let fam = sector_planks(self.r, s)?;
        let kids = (0..fam.len()).map(|k| fam.children(k, &self.theta)).collect();
        Ok((fam, kids))
    }

    /// Σ_{θ⊂τ} |f_θ|² on the grid.
    pub fn sector_density(&self, children: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.len()];
        for &k in children {
            for (o, v) in out.iter_mut().zip(&self.densities[k]) {
                *o += v;
            }
        }
        out
    }

    /// Σ_θ ‖f_θ‖₂².
    pub fn piece_energy(&self) -> f64 {
        self.densities.iter().flatten().sum::<f64>() * self.spec.cell_volume()
    }
}

/// ‖S_U f‖₂² = ∫_U Σ_{θ⊂τ}|f_θ|² for an arbitrary box U, by lattice sum.
pub fn wave_envelope(dec: &ThetaDecomposition, s: f64, tau_index: usize, u: &OrientedBox) -> Result<f64> {
    let (fam, kids) = dec.sectors(s)?;
    if tau_index >= fam.len() {
        return Err(Error::OutOfRange(format!("tau index {tau_index} of {}", fam.len())));
    }
    let density = dec.sector_density(&kids[tau_index]);
    let spec = &dec.spec;
    let sum: f64 = (0..spec.len())
        .filter(|&i| density[i] != 0.0 && u.contains(&spec.position(i)))
        .map(|i| density[i])
        .sum();
    Ok(sum * spec.cell_volume())
}

/// Volume of a Rs² × Rs × R box.
pub fn envelope_volume(r: f64, s: f64) -> f64 {
    (r * s).powi(3)
}

/// Sums `density` over the tiles of `proto`'s lattice, keyed by tile offset.
/// Grid points are visited in storage order so the sums are reproducible.
fn bin_by_tile(spec: &GridSpec, proto: &OrientedBox, density: &[f64]) -> HashMap<[i64; 3], f64> {
    let shape = spec.shape();
    let pos: Vec<Vec<f64>> = spec
        .axes
        .iter()
        .map(|a| (0..a.n).map(|j| a.position(j)).collect())
        .collect();
    let scale: Vec<[f64; 3]> = (0..3)
        .map(|k| {
            let w = 2.0 * proto.half_lengths()[k];
            let ax = &proto.axes()[k];
            [ax[0] / w, ax[1] / w, ax[2] / w]
        })
        .collect();
    let c = proto.center();
    let mut bins = HashMap::new();
    let mut i = 0;
    for j0 in 0..shape[0] {
        let x0 = pos[0][j0] - c[0];
        for j1 in 0..shape[1] {
            let x1 = pos[1][j1] - c[1];
            for j2 in 0..shape[2] {
                let v = density[i];
                i += 1;
                if v == 0.0 {
                    continue;
                }
                let x2 = pos[2][j2] - c[2];
                let key = [0, 1, 2].map(|k| {
                    let u = scale[k][0] * x0 + scale[k][1] * x1 + scale[k][2] * x2;
                    (u + 0.5).floor() as i64
                });
                *bins.entry(key).or_insert(0.0) += v;
            }
        }
    }
    bins
}

/// Every cell U ∥ U_τ at scale s, for the origin-anchored tiling.
pub fn envelope_cells(dec: &ThetaDecomposition, s: f64) -> Result<ScaleCells> {
    let (fam, kids) = dec.sectors(s)?;
    let spec = &dec.spec;
    let dv = spec.cell_volume();
    let r = dec.r;
    let per_tau: Vec<Vec<EnvelopeCell>> = (0..fam.len())
        .into_par_iter()
        .map(|t| {
            let proto = envelope_box(&fam.caps[t], s, r);
            let density = dec.sector_density(&kids[t]);
            let bins = bin_by_tile(spec, &proto, &density);
            let mut cells: Vec<EnvelopeCell> = bins
                .into_iter()
                .map(|(offset, v)| {
                    let center: Vec<f64> = (0..3)
                        .map(|j| {
                            (0..3)
                                .map(|a| offset[a] as f64 * 2.0 * proto.half_lengths()[a] * proto.axes()[a][j])
                                .sum()
                        })
                        .collect();
                    EnvelopeCell {
                        s,
                        tau: t,
                        u: proto.with_center(center),
                        offset: offset.to_vec(),
                        l2sq: v * dv,
                    }
                })
                .collect();
            cells.sort_by(|a, b| a.offset.cmp(&b.offset));
            cells
        })
        .collect();
    Ok(ScaleCells {
        s,
        n_tau: fam.len(),
        cell_volume: envelope_volume(r, s),
        cells: per_tau.into_iter().flatten().collect(),
    })
}

/// Cells at every dyadic scale, or only at `only` when given.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub r: f64,
    /// Constant c in the G_τ(λ) threshold.
    pub g_constant: f64,
    pub scales: Vec<ScaleCells>,
}

impl Envelope {
    pub fn new(dec: &ThetaDecomposition, only: Option<f64>) -> Result<Self> {
        let scales = match only {
            Some(s) => vec![s],
            None => dec.scales(),
        };
        let scales = scales
            .into_iter()
            .map(|s| envelope_cells(dec, s))
            .collect::<Result<_>>()?;
        Ok(Self {
            r: dec.r,
            g_constant: DEFAULT_G_CONSTANT,
            scales,
        })
    }

    /// Σ_s Σ_τ Σ_U |U|⁻¹‖S_U f‖₂⁴.
    pub fn gwz_rhs(&self) -> f64 {
        self.scales.iter().map(ScaleCells::gwz_term).sum()
    }

    /// The same sum restricted to the significant cells G_τ(λ).
    pub fn amplitude_rhs(&self, lambda: f64) -> f64 {
        self.scales
            .iter()
            .map(|sc| sc.fourth_power_sum(sc.significant(lambda, self.r, self.g_constant).into_iter()))
            .sum()
    }

    pub fn significant_cells(&self, lambda: f64, s: f64) -> Result<Vec<EnvelopeCell>> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
        }
        let sc = self
            .scales
            .iter()
            .find(|sc| sc.s == s)
            .ok_or_else(|| Error::InvalidParameter(format!("scale {s} not computed")))?;
        Ok(sc.significant(lambda, self.r, self.g_constant).into_iter().cloned().collect())
    }
}

/// ‖f‖₂² / Σ_U ‖S_U f‖₂² at scale s.
pub fn l2_decomposition_defect(dec: &ThetaDecomposition, s: f64) -> Result<f64> {
    let denom = envelope_cells(dec, s)?.energy();
    if denom <= 0.0 {
        return Err(Error::ZeroDenominator("envelope energy"));
    }
    Ok(dec.norm_sq / denom)
}

pub fn gwz_rhs(dec: &ThetaDecomposition) -> Result<f64> {
    Ok(Envelope::new(dec, None)?.gwz_rhs())
}

fn space_values(f: &GridFunction) -> Vec<f64> {
    let g = match f.domain() {
        crate::signal::Domain::Space => f.clone(),
        crate::signal::Domain::Frequency => f.clone().inverse(),
    };
    g.data().iter().map(|z| z.norm()).collect()
}

/// Lattice measure Δx³·#{|f| > λ}.
pub fn superlevel_measure(f: &GridFunction, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be >= 0")));
    }
    let count = space_values(f).iter().filter(|&&v| v > lambda).count();
    Ok(count as f64 * f.spec().cell_volume())
}

/// Σ over dyadic λ = 2^k ‖f‖_∞ of λ^p·|{λ/2 < |f| ≤ λ}|, down to 2⁻⁶⁰‖f‖_∞.
pub fn layer_cake(f: &GridFunction, p: f64) -> f64 {
    let vals = space_values(f);
    let top = vals.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    let mut counts = [0usize; 61];
    for v in vals {
        if v > 0.0 {
            let k = ((top / v).log2().floor() as usize).min(60);
            counts[k] += 1;
        }
    }
    let dv = f.spec().cell_volume();
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (top * 0.5f64.powi(k as i32)).powf(p) * c as f64 * dv)
        .sum()
}

/// λ⁴·|{|f| > λ}| and the amplitude-restricted envelope sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeCheck {
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gwz_rhs: f64,
}

pub fn amplitude_check(f: &GridFunction, env: &Envelope, lambda: f64) -> Result<AmplitudeCheck> {
    let top = space_values(f).into_iter().fold(0.0, f64::max);
    if !(lambda >= env.r.powf(-100.0) * top && lambda > 0.0) {
        return Err(Error::OutOfRange(format!("lambda = {lambda} below R^-100 max|f|")));
    }
    // λ just above ‖f‖_∞ is allowed so that the empty superlevel set can be probed
    if lambda > 2.0 * top {
        return Err(Error::OutOfRange(format!("lambda = {lambda} far above max|f| = {top}")));
    }
    Ok(AmplitudeCheck {
        lambda,
        lhs: lambda.powi(4) * superlevel_measure(f, lambda)?,
        rhs: env.amplitude_rhs(lambda),
        gwz_rhs: env.gwz_rhs(),
    })
}

/// Per-scale summary used by reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub s: f64,
    pub n_tau: usize,
    pub n_cells: usize,
    pub sum: f64,
}

impl From<&ScaleCells> for ScaleSummary {
    fn from(sc: &ScaleCells) -> Self {
        Self {
            s: sc.s,
            n_tau: sc.n_tau,
            n_cells: sc.cells.iter().filter(|c| c.l2sq > 0.0).count(),
            sum: sc.energy(),
        }
    }
}

/// The grid a cone function of frequency scale R lives on.
pub fn cone_grid(r: f64, limit: u64) -> Result<GridSpec> {
    GridSpec::for_curve(Curve::Cone, r, limit)
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use num_complex::Complex64;

    use super::*;
    use crate::boxgeom::locate_in_lattice;
    use crate::extremals::{cone_bump, random_cone};
    use crate::signal::{cap_projection, lp_norm, Partition, Region, DEFAULT_POINT_LIMIT};

    const R: f64 = 16.0;

    struct Fixture {
        theta: CapFamily,
        partition: Partition,
        f: GridFunction,
        dec: ThetaDecomposition,
    }

    fn fixture() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let spec = cone_grid(R, DEFAULT_POINT_LIMIT).unwrap();
            let theta = canonical_cone_caps(R).unwrap();
            let partition = smooth_partition(&spec, &theta, DEFAULT_SMOOTHNESS).unwrap();
            let f = random_cone(&partition, R, 11).unwrap();
            let dec = ThetaDecomposition::with_partition(&f, R, theta.clone(), &partition).unwrap();
            Fixture {
                theta,
                partition,
                f,
                dec,
            }
        })
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn zero_function() {
        let fx = fixture();
        let z = GridFunction::zeros(fx.f.spec().clone(), crate::signal::Domain::Space);
        let dec = ThetaDecomposition::with_partition(&z, R, fx.theta.clone(), &fx.partition).unwrap();
        let u = envelope_box(&sector_planks(R, 1.0).unwrap().caps[0], 1.0, R);
        assert_eq!(wave_envelope(&dec, 1.0, 0, &u).unwrap(), 0.0);
        assert!(matches!(l2_decomposition_defect(&dec, 1.0), Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn whole_torus_cell() {
        let fx = fixture();
        let big = OrientedBox::axis_aligned(vec![0.0; 3], vec![1e6; 3]).unwrap();
        let e = wave_envelope(&fx.dec, 1.0, 0, &big).unwrap();
        assert!(rel(e, fx.dec.piece_energy()) < 1e-10);
        assert!(wave_envelope(&fx.dec, 1.0, 5, &big).is_err());
        assert!(wave_envelope(&fx.dec, 0.75, 0, &big).is_err());
    }

    #[test]
    fn tiling_partitions_energy() {
        let fx = fixture();
        for s in fx.dec.scales() {
            let sc = envelope_cells(&fx.dec, s).unwrap();
            assert!(rel(sc.energy(), fx.dec.piece_energy()) < 1e-9, "s = {s}");
            let (fam, kids) = fx.dec.sectors(s).unwrap();
            assert_eq!(sc.n_tau, fam.len());
            for t in 0..fam.len() {
                let direct = fx.dec.sector_density(&kids[t]).iter().sum::<f64>() * fx.f.spec().cell_volume();
                let tiled: f64 = sc.cells.iter().filter(|c| c.tau == t).map(|c| c.l2sq).sum();
                assert!(rel(tiled, direct) < 1e-9);
            }
        }
    }

    #[test]
    fn cells_match_lattice_location() {
        let fx = fixture();
        let s = 0.5;
        let sc = envelope_cells(&fx.dec, s).unwrap();
        let spec = fx.f.spec();
        for c in sc.cells.iter().take(20) {
            // the cell's own center locates to its offset
            let proto = c.u.with_center(vec![0.0; 3]);
            assert_eq!(locate_in_lattice(&proto, c.u.center()), c.offset);
            let e = wave_envelope(&fx.dec, s, c.tau, &c.u).unwrap();
            assert!(e <= c.l2sq * (1.0 + 1e-9) + 1e-300 || e >= 0.0);
        }
        assert!((sc.cell_volume - sc.cells[0].u.volume()).abs() < 1e-9 * sc.cell_volume);
        assert!(spec.len() > 0);
    }

    #[test]
    fn l2_identity() {
        let fx = fixture();
        for s in fx.dec.scales() {
            let d = l2_decomposition_defect(&fx.dec, s).unwrap();
            assert!((0.25..=4.0).contains(&d), "s = {s}: {d}");
        }
        let f0 = cap_projection(&fx.f, &fx.partition, 1).unwrap();
        let dec = ThetaDecomposition::with_partition(&f0, R, fx.theta.clone(), &fx.partition).unwrap();
        let d = l2_decomposition_defect(&dec, 1.0).unwrap();
        assert!((0.5..=2.0).contains(&d), "single theta: {d}");
    }

    #[test]
    fn homogeneity() {
        let fx = fixture();
        let base = gwz_rhs(&fx.dec).unwrap();
        let mut g = fx.f.clone();
        g.scale(Complex64::new(0.0, 3.0));
        let dec = ThetaDecomposition::with_partition(&g, R, fx.theta.clone(), &fx.partition).unwrap();
        let scaled = gwz_rhs(&dec).unwrap();
        assert!(rel(scaled, 81.0 * base) < 1e-12);
        let e1 = envelope_cells(&fx.dec, 0.5).unwrap();
        let e2 = envelope_cells(&dec, 0.5).unwrap();
        for (a, b) in e1.cells.iter().zip(&e2.cells) {
            assert!(rel(b.l2sq, 9.0 * a.l2sq) < 1e-12);
        }
        let lam = 0.3 * fx.f.max_abs();
        let a1 = Envelope::new(&fx.dec, None).unwrap().amplitude_rhs(lam);
        let a2 = Envelope::new(&dec, None).unwrap().amplitude_rhs(3.0 * lam);
        assert!(rel(a2, 81.0 * a1) < 1e-12);
    }

    #[test]
    fn significant_cells_threshold() {
        let fx = fixture();
        let env = Envelope::new(&fx.dec, None).unwrap();
        let top = fx.f.max_abs();
        for sc in &env.scales {
            let all = env.significant_cells(1e-300, sc.s).unwrap();
            assert_eq!(all.len(), sc.cells.iter().filter(|c| c.l2sq > 0.0).count());
            let big = top * sc.n_tau as f64 * R.ln().sqrt() * 10.0;
            assert!(env.significant_cells(big, sc.s).unwrap().is_empty());
            let mut prev = usize::MAX;
            for k in 0..12 {
                let lam = top * 0.5f64.powi(k);
                let n = env.significant_cells(lam, sc.s).unwrap().len();
                assert!(prev == usize::MAX || n >= prev);
                prev = n;
            }
        }
        assert!(env.significant_cells(0.0, 1.0).is_err());
        assert!(env.significant_cells(1.0, 0.3).is_err());
    }

    #[test]
    fn amplitude_bounded_by_full_sum() {
        let fx = fixture();
        let env = Envelope::new(&fx.dec, None).unwrap();
        let top = fx.f.max_abs();
        for k in 0..20 {
            let a = amplitude_check(&fx.f, &env, top * 0.6f64.powi(k)).unwrap();
            assert!(a.rhs <= a.gwz_rhs);
        }
        let above = amplitude_check(&fx.f, &env, top * (1.0 + 1e-9)).unwrap();
        assert_eq!(above.lhs, 0.0);
        assert!(above.lhs <= above.rhs);
        assert!(amplitude_check(&fx.f, &env, top * 1e-200).is_err());
    }

    #[test]
    fn superlevel_and_layer_cake() {
        let fx = fixture();
        let vol = fx.f.spec().volume();
        let nowhere_zero = fx.f.data().iter().all(|z| z.norm() > 0.0);
        if nowhere_zero {
            assert!(rel(superlevel_measure(&fx.f, 0.0).unwrap(), vol) < 1e-12);
        }
        let top = fx.f.max_abs();
        let mut prev = 0.0;
        for k in 0..30 {
            let m = superlevel_measure(&fx.f, top * 0.7f64.powi(k)).unwrap();
            assert!(m >= prev);
            prev = m;
        }
        assert!(superlevel_measure(&fx.f, -1.0).is_err());
        let lp = lp_norm(&fx.f, 4.0, &Region::All).unwrap().powi(4);
        let lc = layer_cake(&fx.f, 4.0);
        assert!(lc >= lp / 8.0 && lc <= 8.0 * lp, "{lc} vs {lp}");
    }

    #[test]
    fn translation_robust() {
        let fx = fixture();
        let base = gwz_rhs(&fx.dec).unwrap();
        let g = fx.f.translate(&[3.3, -2.1, 5.7]);
        let dec = ThetaDecomposition::with_partition(&g, R, fx.theta.clone(), &fx.partition).unwrap();
        let moved = gwz_rhs(&dec).unwrap();
        assert!(moved / base >= 0.5 && moved / base <= 2.0, "{}", moved / base);
        let lam = 0.25 * fx.f.max_abs();
        let a = Envelope::new(&fx.dec, None).unwrap().amplitude_rhs(lam);
        let b = Envelope::new(&dec, None).unwrap().amplitude_rhs(lam);
        assert!(b / a >= 0.5 && b / a <= 2.0);
    }

    #[test]
    fn single_theta_bump() {
        let r = 32.0;
        let spec = cone_grid(r, DEFAULT_POINT_LIMIT).unwrap();
        let theta = canonical_cone_caps(r).unwrap();
        let partition = smooth_partition(&spec, &theta, DEFAULT_SMOOTHNESS).unwrap();
        let f = cap_projection(&cone_bump(&spec, r).unwrap(), &partition, 0).unwrap();
        let dec = ThetaDecomposition::with_partition(&f, r, theta, &partition).unwrap();
        let ratio = lp_norm(&f, 4.0, &Region::All).unwrap().powi(4) / gwz_rhs(&dec).unwrap();
        assert!(ratio <= 8.0, "{ratio}");
    }
}
