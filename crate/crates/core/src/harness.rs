//! R-sweeps of the extremal examples: build each example over a dyadic list of
//! R, fit the growth exponent of its square-function ratio, compare it with
//! the predicted exponent and serialize the result.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::{canonical_parabola_caps, cone_caps, is_dyadic, parabola_caps, Curve};
use crate::coneoverlap::{cone_bump_exponent, cone_indicator};
use crate::error::{Error, Result};
use crate::extremals::{
    concentrated_indicator, concentrated_parabola, cone_bump, flat_indicator, flat_parabola,
    parabola_branches,
};
use crate::signal::{
    lp_norm, lp_norm_real, smooth_partition, square_function, GridFunction, GridSpec, Partition,
    Region, DEFAULT_POINT_LIMIT, DEFAULT_SMOOTHNESS,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Fft,
    Indicator,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fft" => Ok(Backend::Fft),
            "indicator" => Ok(Backend::Indicator),
            _ => Err(Error::InvalidParameter(format!("unknown backend '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    Concentrated,
    Flat,
    ConeBump,
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concentrated" => Ok(Example::Concentrated),
            "flat" => Ok(Example::Flat),
            "cone_bump" | "cone-bump" => Ok(Example::ConeBump),
            _ => Err(Error::InvalidParameter(format!("unknown example '{s}'"))),
        }
    }
}

impl Example {
    pub fn curve(self) -> Curve {
        match self {
            Example::ConeBump => Curve::Cone,
            _ => Curve::Parabola,
        }
    }

    /// Exponent of R that this example's ratio grows with.
    pub fn predicted_slope(self, exponent: f64, p: f64) -> f64 {
        match self {
            Example::Concentrated => parabola_branches(exponent, p).0,
            Example::Flat => parabola_branches(exponent, p).1,
            Example::ConeBump => cone_bump_exponent(exponent, p),
        }
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            Example::Concentrated => 0.06,
            Example::Flat => 0.04,
            Example::ConeBump => 0.08,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(Error::InvalidParameter(format!("unknown format '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub curve: Curve,
    /// α for the parabola, β for the cone.
    pub exponent: f64,
    pub p: f64,
    #[serde(rename = "R_list")]
    pub r_list: Vec<f64>,
    pub backend: Backend,
    pub example: Example,
    pub output: Option<String>,
    pub jobs: usize,
    pub tolerance: Option<f64>,
    pub seed: u64,
    /// Largest grid the fft backend may allocate.
    pub point_limit: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            curve: Curve::Parabola,
            exponent: 0.75,
            p: 8.0,
            r_list: (7..=11).map(|k| 2f64.powi(k)).collect(),
            backend: Backend::Indicator,
            example: Example::Concentrated,
            output: None,
            jobs: 1,
            tolerance: None,
            seed: 0,
            point_limit: DEFAULT_POINT_LIMIT,
        }
    }
}

/// Dyadic R from `lo` to `hi` inclusive.
pub fn dyadic_range(lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(is_dyadic(lo) && is_dyadic(hi) && lo <= hi) {
        return Err(Error::InvalidParameter(format!("bad R range {lo}..{hi}")));
    }
    let mut out = vec![];
    let mut r = lo;
    while r <= hi {
        out.push(r);
        r *= 2.0;
    }
    Ok(out)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: '{v}' is not a number")))
}

impl SweepConfig {
    /// Sets one `key = value` entry. `R` takes a comma-separated list;
    /// `R_min`/`R_max` rewrite the list as a dyadic range.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "curve" => self.curve = v.parse()?,
            "alpha" | "beta" | "exponent" => self.exponent = parse_f64(key, v)?,
            "p" => self.p = parse_f64(key, v)?,
            "R" | "R_list" => {
                self.r_list = v
                    .split(',')
                    .map(|x| parse_f64(key, x.trim()))
                    .collect::<Result<_>>()?
            }
            "R_min" | "R-min" => {
                let hi = self.r_list.last().copied().unwrap_or(parse_f64(key, v)?);
                self.r_list = dyadic_range(parse_f64(key, v)?, hi)?;
            }
            "R_max" | "R-max" => {
                let lo = self.r_list.first().copied().unwrap_or(parse_f64(key, v)?);
                self.r_list = dyadic_range(lo, parse_f64(key, v)?)?;
            }
            "backend" => self.backend = v.parse()?,
            "example" => {
                self.example = v.parse()?;
                self.curve = self.example.curve();
            }
            "output" => self.output = Some(v.to_string()),
            "jobs" => {
                self.jobs = v
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("jobs: '{v}'")))?
            }
            "tolerance" => self.tolerance = Some(parse_f64(key, v)?),
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("seed: '{v}'")))?
            }
            "point_limit" => {
                self.point_limit = v
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("point_limit: '{v}'")))?
            }
            other => return Err(Error::InvalidParameter(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                msg: format!("expected key = value, got '{line}'"),
            })?;
            self.set(k, v).map_err(|e| Error::Config {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or_else(|| self.example.default_tolerance())
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_list.len() < 3 {
            return Err(Error::InvalidParameter("R_list needs at least 3 values".into()));
        }
        if !self.r_list.iter().all(|&r| is_dyadic(r) && r >= 4.0) {
            return Err(Error::InvalidParameter("R_list must be powers of two >= 4".into()));
        }
        if !self.r_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("R_list must be ascending".into()));
        }
        if self.curve != self.example.curve() {
            return Err(Error::InvalidParameter(format!(
                "example {:?} lives on the other curve",
                self.example
            )));
        }
        if !(0.5..=1.0).contains(&self.exponent) {
            return Err(Error::InvalidParameter(format!("exponent {} outside [1/2, 1]", self.exponent)));
        }
        if !(self.p >= 2.0) {
            return Err(Error::InvalidParameter(format!("p = {} must be >= 2", self.p)));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidParameter("jobs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ordinary least squares of ln(value) on ln(R): slope and its standard error.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 points".into()));
    }
    if let Some(&(_, v)) = points.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(format!("nonpositive value {v}")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(r, _)| r.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all R equal".into()));
    }
    let slope = sxy / sxx;
    let resid: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let stderr = (resid / (n - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "R")]
    pub r: f64,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub ratio: f64,
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub config: SweepConfig,
    pub records: Vec<SweepRecord>,
    /// R values entering the fit.
    pub fit_r: Vec<f64>,
    pub excluded_smallest: bool,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    pub predicted_slope: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl SweepResult {
    /// The verdict implied by the stored numbers alone.
    pub fn recompute_verdict(&self) -> Verdict {
        if (self.fitted_slope - self.predicted_slope).abs() <= self.tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

fn fft_ratio(f: &GridFunction, partition: &Partition, p: f64) -> Result<(f64, f64)> {
    let lhs = lp_norm(f, p, &Region::All)?;
    let sq = square_function(f, partition)?;
    let rhs = lp_norm_real(f.spec(), &sq, p, &Region::All)?;
    Ok((lhs, rhs))
}

/// lhs and rhs norms of the configured example at one R.
pub fn evaluate(cfg: &SweepConfig, r: f64) -> Result<(f64, f64)> {
    let (a, p) = (cfg.exponent, cfg.p);
    match (cfg.backend, cfg.example) {
        (Backend::Indicator, Example::Concentrated) => {
            let x = concentrated_indicator(&parabola_caps(r, a)?, p)?;
            Ok((x.lhs, x.rhs))
        }
        (Backend::Indicator, Example::Flat) => {
            let canonical = canonical_parabola_caps(r)?;
            let x = flat_indicator(&canonical, &parabola_caps(r, a)?, canonical.len() / 2, p)?;
            Ok((x.lhs, x.rhs))
        }
        (Backend::Indicator, Example::ConeBump) => {
            let x = cone_indicator(r, a, p)?;
            Ok((x.lhs, x.rhs))
        }
        (Backend::Fft, ex) => {
            let spec = GridSpec::for_curve(ex.curve(), r, cfg.point_limit)?;
            match ex {
                Example::Concentrated => {
                    let part = smooth_partition(&spec, &parabola_caps(r, a)?, DEFAULT_SMOOTHNESS)?;
                    fft_ratio(&concentrated_parabola(&spec, r)?, &part, p)
                }
                Example::Flat => {
                    let canonical = canonical_parabola_caps(r)?;
                    let cpart = smooth_partition(&spec, &canonical, DEFAULT_SMOOTHNESS)?;
                    let f = flat_parabola(&cpart, canonical.len() / 2)?;
                    drop(cpart);
                    let part = smooth_partition(&spec, &parabola_caps(r, a)?, DEFAULT_SMOOTHNESS)?;
                    fft_ratio(&f, &part, p)
                }
                Example::ConeBump => {
                    let part = smooth_partition(&spec, &cone_caps(r, a)?, DEFAULT_SMOOTHNESS)?;
                    fft_ratio(&cone_bump(&spec, r)?, &part, p)
                }
            }
        }
    }
}

fn run_one(cfg: &SweepConfig, r: f64) -> Result<SweepRecord> {
    let t = Instant::now();
    let (lhs, rhs) = evaluate(cfg, r)?;
    if rhs <= 0.0 {
        return Err(Error::ZeroDenominator("square function norm"));
    }
    Ok(SweepRecord {
        r,
        lhs_norm: lhs,
        rhs_norm: rhs,
        ratio: lhs / rhs,
        wall_time: t.elapsed().as_secs_f64(),
    })
}

/// Runs the example at every R (up to `jobs` at a time), fits the exponent
/// and judges it. The smallest R is left out of the fit when there are at
/// least four.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.backend == Backend::Fft {
        // fail before any work if the largest R cannot be gridded
        let big = *cfg.r_list.last().unwrap();
        GridSpec::for_curve(cfg.curve, big, cfg.point_limit)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut records: Vec<SweepRecord> = pool.install(|| {
        cfg.r_list
            .par_iter()
            .map(|&r| run_one(cfg, r))
            .collect::<Result<_>>()
    })?;
    records.sort_by(|a, b| a.r.total_cmp(&b.r));
    finish(cfg.clone(), records)
}

/// Fits and judges a set of records.
pub fn finish(config: SweepConfig, records: Vec<SweepRecord>) -> Result<SweepResult> {
    let excluded_smallest = records.len() >= 4;
    let used = if excluded_smallest { &records[1..] } else { &records[..] };
    let points: Vec<(f64, f64)> = used.iter().map(|x| (x.r, x.ratio)).collect();
    let (fitted_slope, slope_stderr) = fit_exponent(&points)?;
    let predicted_slope = config.example.predicted_slope(config.exponent, config.p);
    let tolerance = config.tolerance();
    let mut out = SweepResult {
        schema_version: SCHEMA_VERSION,
        fit_r: points.iter().map(|x| x.0).collect(),
        config,
        records,
        excluded_smallest,
        fitted_slope,
        slope_stderr,
        predicted_slope,
        tolerance,
        verdict: Verdict::Fail,
    };
    out.verdict = out.recompute_verdict();
    Ok(out)
}

/// Serializes a result. JSON is pretty-printed and stable under a
/// parse/serialize round trip.
pub fn report(result: &SweepResult, format: Format) -> Result<String> {
    if result.records.is_empty() {
        return Err(Error::InvalidParameter("sweep result has no records".into()));
    }
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(result)? + "\n",
        Format::Csv => {
            let mut s = String::from("R,lhs,rhs,ratio,time\n");
            for x in &result.records {
                writeln!(s, "{},{},{},{},{}", x.r, x.lhs_norm, x.rhs_norm, x.ratio, x.wall_time).unwrap();
            }
            s
        }
        Format::Markdown => {
            let c = &result.config;
            let mut s = String::new();
            writeln!(
                s,
                "# Sweep: {:?} example, {:?} backend\n\ncurve {:?}, exponent {}, p {}\n",
                c.example, c.backend, c.curve, c.exponent, c.p
            )
            .unwrap();
            s.push_str("| R | lhs | rhs | ratio | time (s) |\n|---|---|---|---|---|\n");
            for x in &result.records {
                writeln!(
                    s,
                    "| {} | {:.6e} | {:.6e} | {:.6} | {:.3} |",
                    x.r, x.lhs_norm, x.rhs_norm, x.ratio, x.wall_time
                )
                .unwrap();
            }
            s.push_str("\n| | slope |\n|---|---|\n");
            writeln!(s, "| predicted | {:.6} |", result.predicted_slope).unwrap();
            writeln!(s, "| fitted | {:.6} ± {:.6} |", result.fitted_slope, result.slope_stderr).unwrap();
            writeln!(s, "| tolerance | {} |", result.tolerance).unwrap();
            writeln!(
                s,
                "\nFit over R = {:?}{}. Verdict: **{:?}**",
                result.fit_r,
                if result.excluded_smallest { " (smallest R excluded)" } else { "" },
                result.verdict
            )
            .unwrap();
            s
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(usize, f64) -> f64) -> Vec<(f64, f64)> {
        (0..6).map(|k| {
            let r = 2f64.powi(k as i32 + 6);
            (r, f(k, r))
        })
        .collect()
    }

    #[test]
    fn fit_examples() {
        let (s, e) = fit_exponent(&series(|_, r| 3.0 * r.powf(0.25))).unwrap();
        assert!((s - 0.25).abs() < 1e-12 && e < 1e-12);
        let (s, _) = fit_exponent(&series(|_, _| 5.0)).unwrap();
        assert!(s.abs() < 1e-12);
        let alt = |k: usize, r: f64| r.powf(0.2) * (1.0 + if k % 2 == 0 { 0.1 } else { -0.1 });
        let (s, e) = fit_exponent(&series(alt)).unwrap();
        assert!((s - 0.2).abs() <= 0.05 && e > 0.0);
        assert!(fit_exponent(&series(|_, _| 5.0)[..2]).is_err());
        assert!(fit_exponent(&[(2.0, 1.0), (4.0, 0.0), (8.0, 1.0)]).is_err());
    }

    #[test]
    fn config_text() {
        let cfg = SweepConfig::from_text(
            "# flat sweep\nexample = flat\nalpha = 1   # exponent\np = 3\nR_min = 128\nR_max = 2048\ntolerance = 0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.example, Example::Flat);
        assert_eq!(cfg.exponent, 1.0);
        assert_eq!(cfg.r_list, vec![128.0, 256.0, 512.0, 1024.0, 2048.0]);
        assert_eq!(cfg.tolerance(), 0.05);
        cfg.validate().unwrap();
        match SweepConfig::from_text("p = 3\nbogus\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(SweepConfig::from_text("colour = red").is_err());
        let mut bad = cfg.clone();
        bad.r_list = vec![128.0, 256.0];
        assert!(bad.validate().is_err());
        bad.r_list = vec![256.0, 128.0, 512.0];
        assert!(bad.validate().is_err());
        bad = cfg;
        bad.curve = Curve::Cone;
        assert!(bad.validate().is_err());
    }

    fn toy_result() -> SweepResult {
        let cfg = SweepConfig {
            tolerance: Some(0.01),
            ..SweepConfig::default()
        };
        let records = cfg
            .r_list
            .iter()
            .map(|&r| SweepRecord {
                r,
                lhs_norm: r.powf(0.1875) / 3.0,
                rhs_norm: 1.0 / 3.0,
                ratio: r.powf(0.1875),
                wall_time: 0.25,
            })
            .collect();
        finish(cfg, records).unwrap()
    }

    #[test]
    fn verdict_and_exclusion() {
        let res = toy_result();
        assert!(res.excluded_smallest);
        assert_eq!(res.fit_r.len(), 4);
        assert_eq!(res.verdict, Verdict::Pass);
        let mut off = res.clone();
        off.predicted_slope += 0.02;
        assert_eq!(off.recompute_verdict(), Verdict::Fail);
    }

    #[test]
    fn report_formats() {
        let res = toy_result();
        let json = report(&res, Format::Json).unwrap();
        assert!(json.contains("\"schema_version\": 1"));
        let back: SweepResult = serde_json::from_str(&json).unwrap();
        assert_eq!(report(&back, Format::Json).unwrap(), json);
        assert_eq!(back.recompute_verdict(), res.verdict);
        let csv = report(&res, Format::Csv).unwrap();
        assert_eq!(csv.lines().count(), res.config.r_list.len() + 1);
        assert!(csv.starts_with("R,lhs,rhs,ratio,time\n"));
        let md = report(&res, Format::Markdown).unwrap();
        assert!(md.contains("| predicted |") && md.contains("| fitted |"));
        let mut empty = res;
        empty.records.clear();
        assert!(report(&empty, Format::Json).is_err());
    }

    #[test]
    fn predicted_slopes() {
        assert!((Example::Concentrated.predicted_slope(0.75, 8.0) - 0.1875).abs() < 1e-15);
        assert!((Example::Flat.predicted_slope(1.0, 3.0) - 1.0 / 12.0).abs() < 1e-15);
        assert!((Example::ConeBump.predicted_slope(0.75, 8.0) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn fft_overflow_suggests_r() {
        let cfg = SweepConfig {
            backend: Backend::Fft,
            r_list: vec![1024.0, 2048.0, 4096.0],
            point_limit: 1 << 20,
            ..SweepConfig::default()
        };
        match run_sweep(&cfg) {
            Err(Error::GridOverflow { suggested_r, .. }) => assert!(suggested_r >= 4 && suggested_r < 4096),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_across_jobs() {
        let mut cfg = SweepConfig {
            r_list: vec![32.0, 64.0, 128.0],
            ..SweepConfig::default()
        };
        let a = run_sweep(&cfg).unwrap();
        cfg.jobs = 2;
        let b = run_sweep(&cfg).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.ratio.to_bits(), y.ratio.to_bits());
        }
        assert_eq!(a.fitted_slope.to_bits(), b.fitted_slope.to_bits());
    }
}
