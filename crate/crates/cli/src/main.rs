use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use smallcap::caps::{self, Curve};
use smallcap::coneoverlap::{self, Method};
use smallcap::envelope::{amplitude_check, Envelope, ScaleSummary, ThetaDecomposition, DEFAULT_G_CONSTANT};
use smallcap::extremals::{self, ExponentQuery};
use smallcap::harness::{self, Backend, Example, Format, SweepConfig, SweepResult, Verdict, SCHEMA_VERSION};
use smallcap::signal::{
    lp_norm, smooth_partition, GridFunction, GridSpec, Projector, Region, DEFAULT_POINT_LIMIT,
    DEFAULT_SMOOTHNESS,
};

#[derive(Parser)]
#[command(name = "smallcap", version, about = "Small-cap square function experiments for the parabola and cone")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List a cap family as JSON.
    Caps(CapsArgs),
    /// Synthesize an extremal example on its FFT grid and write it as raw samples.
    Example(ExampleArgs),
    /// Project a stored function onto a cap family.
    Project(ProjectArgs),
    /// Indicator-model ratio of an example at one R.
    Oracle(OracleArgs),
    /// Slice incidence counts: analytic vs brute slice integral and regime samples.
    Slice(SliceArgs),
    /// Wave-envelope sums of a cone function.
    Envelope(EnvelopeArgs),
    /// Run an R-sweep and judge the fitted exponent.
    Sweep(SweepArgs),
    /// Re-render a stored sweep result.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    curve: Option<Curve>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    fn curve(&self) -> Curve {
        self.curve.unwrap_or(if self.beta.is_some() { Curve::Cone } else { Curve::Parabola })
    }

    fn exponent(&self) -> Option<f64> {
        match self.curve() {
            Curve::Parabola => self.alpha,
            Curve::Cone => self.beta,
        }
    }

    fn r(&self) -> Result<f64> {
        self.r.context("--R is required")
    }
}

#[derive(Args)]
struct CapsArgs {
    #[command(flatten)]
    common: Common,
    /// Sector scale s for the cone's 𝐒_s instead of Γ_β.
    #[arg(long = "scale-s")]
    scale_s: Option<f64>,
}

#[derive(Args)]
struct ExampleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "concentrated")]
    example: Example,
    /// Random cone function with this seed instead of the example.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ProjectArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "concentrated")]
    example: Example,
    #[arg(long)]
    p: f64,
}

#[derive(Args)]
struct SliceArgs {
    #[arg(long = "R")]
    r_big: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value = "brute")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random sample points per regime.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EnvelopeArgs {
    #[arg(long = "R")]
    r: f64,
    #[arg(long = "scale-s")]
    scale_s: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Random cone function with this seed instead of the cone bump.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    curve: Option<Curve>,
    #[arg(long)]
    example: Option<Example>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "R", value_delimiter = ',')]
    r: Option<Vec<f64>>,
    #[arg(long = "R-min")]
    r_min: Option<f64>,
    #[arg(long = "R-max")]
    r_max: Option<f64>,
    #[arg(long)]
    backend: Option<Backend>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "json")]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "markdown")]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            other => Ok(other?),
        },
    }
}

fn emit_json(v: &Value, output: Option<&PathBuf>) -> Result<()> {
    emit(&(serde_json::to_string_pretty(v)? + "\n"), output)
}

fn cap_family(curve: Curve, exponent: f64, r: f64) -> Result<caps::CapFamily> {
    Ok(match curve {
        Curve::Parabola => caps::parabola_caps(r, exponent)?,
        Curve::Cone => caps::cone_caps(r, exponent)?,
    })
}

fn cmd_caps(a: CapsArgs) -> Result<Verdict> {
    let r = a.common.r()?;
    let curve = a.common.curve();
    let fam = match a.scale_s {
        Some(s) => caps::sector_planks(r, s)?,
        None => {
            let e = a.common.exponent().context("--alpha (parabola) or --beta (cone) is required")?;
            cap_family(curve, e, r)?
        }
    };
    let nominal: Vec<_> = (0..fam.len()).map(|k| fam.nominal_cap(k)).collect();
    emit_json(
        &json!({
            "schema_version": SCHEMA_VERSION,
            "curve": fam.curve,
            "R": r,
            "exponent": fam.exponent,
            "count": fam.len(),
            "neighborhood": fam.neighborhood,
            "intervals": fam.intervals,
            "caps": fam.caps,
            "nominal": nominal,
        }),
        a.common.output.as_ref(),
    )?;
    Ok(Verdict::Pass)
}

fn cmd_example(a: ExampleArgs) -> Result<Verdict> {
    let r = a.common.r()?;
    let out = a.common.output.clone().context("--output is required for raw samples")?;
    let curve = if a.seed.is_some() { Curve::Cone } else { a.example.curve() };
    let spec = GridSpec::for_curve(curve, r, DEFAULT_POINT_LIMIT)?;
    let f = match (a.seed, a.example) {
        (Some(seed), _) => {
            let part = smooth_partition(&spec, &caps::canonical_cone_caps(r)?, DEFAULT_SMOOTHNESS)?;
            extremals::random_cone(&part, r, seed)?
        }
        (None, Example::Concentrated) => extremals::concentrated_parabola(&spec, r)?,
        (None, Example::ConeBump) => extremals::cone_bump(&spec, r)?,
        (None, Example::Flat) => {
            let canonical = caps::canonical_parabola_caps(r)?;
            let part = smooth_partition(&spec, &canonical, DEFAULT_SMOOTHNESS)?;
            extremals::flat_parabola(&part, canonical.len() / 2)?
        }
    };
    f.write_raw(&out)?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "example": if a.seed.is_some() { json!("random_cone") } else { json!(a.example) },
        "R": r,
        "shape": spec.shape(),
        "f0": [f.at_origin().re, f.at_origin().im],
        "l2": (f.sum_sq() * spec.cell_volume()).sqrt(),
        "max_abs": f.max_abs(),
        "output": out,
    });
    emit_json(&summary, None)?;
    Ok(Verdict::Pass)
}

fn cmd_project(a: ProjectArgs) -> Result<Verdict> {
    let r = a.common.r()?;
    let f = GridFunction::read_raw(&a.input)?;
    let curve = match f.spec().dim() {
        2 => Curve::Parabola,
        _ => Curve::Cone,
    };
    let e = match curve {
        Curve::Parabola => a.common.alpha,
        Curve::Cone => a.common.beta,
    }
    .context("--alpha (parabola) or --beta (cone) is required")?;
    let fam = cap_family(curve, e, r)?;
    let part = smooth_partition(f.spec(), &fam, DEFAULT_SMOOTHNESS)?;
    let proj = Projector::new(&f, &part)?;
    let dv = f.spec().cell_volume();
    let (norms, sum) = proj.fold_projections(
        || (Vec::new(), GridFunction::zeros(f.spec().clone(), smallcap::signal::Domain::Space)),
        |(mut v, mut acc), k, fk| {
            v.push((k, (fk.sum_sq() * dv).sqrt()));
            acc.add_assign(&fk);
            (v, acc)
        },
        |(mut a, mut x), (b, y)| {
            a.extend(b);
            x.add_assign(&y);
            (a, x)
        },
    );
    let mut norms = norms;
    norms.sort_by_key(|x| x.0);
    let space = match f.domain() {
        smallcap::signal::Domain::Space => f.clone(),
        smallcap::signal::Domain::Frequency => f.clone().inverse(),
    };
    let err: f64 = space
        .data()
        .iter()
        .zip(sum.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / space.sum_sq().sqrt().max(f64::MIN_POSITIVE);
    let mut out = json!({
        "schema_version": SCHEMA_VERSION,
        "curve": curve,
        "R": r,
        "exponent": e,
        "count": fam.len(),
        "cap_l2": norms.iter().map(|x| x.1).collect::<Vec<_>>(),
        "reconstruction_error": err,
    });
    if let Some(p) = a.p {
        out["p"] = json!(p);
        out["lp"] = json!(lp_norm(&f, p, &Region::All)?);
        out["ratio"] = json!(extremals::empirical_ratio(&f, &part, p)?);
    }
    emit_json(&out, a.common.output.as_ref())?;
    Ok(Verdict::Pass)
}

fn cmd_oracle(a: OracleArgs) -> Result<Verdict> {
    let r = a.common.r()?;
    let e = match a.example.curve() {
        Curve::Parabola => a.common.alpha,
        Curve::Cone => a.common.beta,
    }
    .context("--alpha (parabola) or --beta (cone) is required")?;
    let cfg = SweepConfig {
        curve: a.example.curve(),
        exponent: e,
        p: a.p,
        example: a.example,
        backend: Backend::Indicator,
        ..SweepConfig::default()
    };
    let (lhs, rhs) = harness::evaluate(&cfg, r)?;
    let predicted = extremals::predicted_exponent(&ExponentQuery {
        curve: a.example.curve(),
        exponent: e,
        p: a.p,
    })?;
    emit_json(
        &json!({
            "schema_version": SCHEMA_VERSION,
            "example": a.example,
            "R": r,
            "exponent": e,
            "p": a.p,
            "lhs": lhs,
            "rhs": rhs,
            "ratio": lhs / rhs,
            "example_slope": a.example.predicted_slope(e, a.p),
            "predicted_exponent": predicted,
        }),
        a.common.output.as_ref(),
    )?;
    Ok(Verdict::Pass)
}

fn cmd_slice(a: SliceArgs) -> Result<Verdict> {
    let analytic = coneoverlap::slice_integral(a.r, a.p, a.r_big, a.beta, Method::Analytic)?;
    let brute = match a.method {
        Method::Brute => Some(coneoverlap::slice_integral(a.r, a.p, a.r_big, a.beta, Method::Brute)?),
        Method::Analytic => None,
    };
    let planks = coneoverlap::slice_family(a.r_big, a.beta, a.r)?;
    let reports = coneoverlap::regime_reports(&planks, a.samples, a.seed);
    emit_json(
        &json!({
            "schema_version": SCHEMA_VERSION,
            "params": {"R": a.r_big, "beta": a.beta, "r": a.r, "p": a.p, "method": a.method, "planks": planks.len()},
            "analytic": analytic,
            "brute": brute,
            "ratio": brute.map(|b| b / analytic),
            "regime_windows": coneoverlap::regime_windows(a.r, a.r_big, a.beta),
            "regime_reports": reports,
        }),
        a.output.as_ref(),
    )?;
    Ok(Verdict::Pass)
}

fn cmd_envelope(a: EnvelopeArgs) -> Result<Verdict> {
    let r = a.r;
    let spec = GridSpec::for_curve(Curve::Cone, r, DEFAULT_POINT_LIMIT)?;
    let theta = caps::canonical_cone_caps(r)?;
    let part = smooth_partition(&spec, &theta, DEFAULT_SMOOTHNESS)?;
    let f = match a.seed {
        Some(seed) => extremals::random_cone(&part, r, seed)?,
        None => extremals::cone_bump(&spec, r)?,
    };
    let dec = ThetaDecomposition::with_partition(&f, r, theta, &part)?;
    let env = Envelope::new(&dec, a.scale_s)?;
    let lhs = lp_norm(&f, 4.0, &Region::All)?.powi(4);
    let rhs = env.gwz_rhs();
    let per_scale: Vec<ScaleSummary> = env.scales.iter().map(ScaleSummary::from).collect();
    let mut out = json!({
        "schema_version": SCHEMA_VERSION,
        "R": r,
        "function": match a.seed { Some(s) => json!({"random_cone": s}), None => json!("cone_bump") },
        "l2sq": dec.norm_sq,
        "per_scale": per_scale,
        "gwz_lhs": lhs,
        "gwz_rhs": rhs,
        "ratio": lhs / rhs,
        "g_constant": DEFAULT_G_CONSTANT,
    });
    if let Some(lambda) = a.lambda {
        let check = amplitude_check(&f, &env, lambda)?;
        out["amplitude"] = serde_json::to_value(check)?;
    }
    emit_json(&out, a.output.as_ref())?;
    Ok(Verdict::Pass)
}

fn cmd_sweep(a: SweepArgs) -> Result<Verdict> {
    let mut cfg = SweepConfig::default();
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text)?;
    }
    if let Some(ex) = a.example {
        cfg.example = ex;
        cfg.curve = ex.curve();
    }
    if let Some(c) = a.curve {
        cfg.curve = c;
        if a.example.is_none() && c == Curve::Cone {
            cfg.example = Example::ConeBump;
        }
    }
    if let Some(e) = a.alpha.or(a.beta) {
        cfg.exponent = e;
    }
    if let Some(p) = a.p {
        cfg.p = p;
    }
    if let Some(list) = a.r {
        cfg.r_list = list;
    }
    if a.r_min.is_some() || a.r_max.is_some() {
        let lo = a.r_min.or(cfg.r_list.first().copied()).context("--R-min")?;
        let hi = a.r_max.or(cfg.r_list.last().copied()).context("--R-max")?;
        cfg.r_list = harness::dyadic_range(lo, hi)?;
    }
    if let Some(b) = a.backend {
        cfg.backend = b;
    }
    if let Some(t) = a.tolerance {
        cfg.tolerance = Some(t);
    }
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.output {
        cfg.output = Some(o.display().to_string());
    }
    let result = harness::run_sweep(&cfg)?;
    emit(&harness::report(&result, a.format)?, a.output.as_ref())?;
    if a.output.is_some() {
        eprintln!(
            "fitted slope {:.4} ± {:.4}, predicted {:.4}, tolerance {}: {:?}",
            result.fitted_slope, result.slope_stderr, result.predicted_slope, result.tolerance, result.verdict
        );
    }
    Ok(result.verdict)
}

fn cmd_report(a: ReportArgs) -> Result<Verdict> {
    let text = std::fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let result: SweepResult = serde_json::from_str(&text)?;
    if result.schema_version != SCHEMA_VERSION {
        bail!("unsupported schema_version {}", result.schema_version);
    }
    emit(&harness::report(&result, a.format)?, a.output.as_ref())?;
    Ok(result.recompute_verdict())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Caps(a) => cmd_caps(a),
        Command::Example(a) => cmd_example(a),
        Command::Project(a) => cmd_project(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Slice(a) => cmd_slice(a),
        Command::Envelope(a) => cmd_envelope(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
