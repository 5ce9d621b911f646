//! One runner per experiment kind. Runners compute everything in memory and
//! return the files to write; defaults they derive are written back into the
//! parameter block so the manifest records them.

use fuplab::conformal::asymptotics_report;
use fuplab::constants::{beta_chain, ChainInputs};
use fuplab::damping::{build_regular_damping, RegularDampingConfig};
use fuplab::fup_operator::{
    assemble_operator, distorted_fup_norm, fup_decay_curve, operator_norm, submultiplicativity, AssembleMode,
    CurveSpec, DiffeoKind, DiffeoSpec, Discretization, NormMethod,
};
use fuplab::localization::{
    at_most_linear_in_inverse_q, envelope, localization_suite, LocalizationGrid, SuiteConfig,
};
use fuplab::potential_theory::{cartan_disks, cartan_grid_violations, random_point_masses};
use fuplab::regular_sets::{
    build_cantor, check_porosity, check_regularity, max_porosity_depth, natural_measure, CantorSpec, GridSet,
    RegularityQuery,
};
use serde::Serialize;

use crate::config::*;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        pass,
        detail: detail.into(),
    }
}

#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
}

impl Artifacts {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::Internal(e.to_string()))?;
        bytes.push(b'\n');
        self.files.push((name.into(), bytes));
        Ok(())
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Failure::Internal(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Internal(e.to_string()))?;
        self.files.push((name.into(), bytes));
        Ok(())
    }
}

#[derive(Debug)]
pub enum Failure {
    /// Bad parameters; nothing is written.
    Config(String),
    /// A numerical contract failed during the run.
    Contract(String),
    Internal(String),
}

impl From<fuplab::Error> for Failure {
    fn from(e: fuplab::Error) -> Self {
        use fuplab::Error::*;
        match e {
            InvalidInput(_) | EmptySet | TooLarge(_) => Failure::Config(e.to_string()),
            Contract(_) | NoConvergence { .. } => Failure::Contract(e.to_string()),
        }
    }
}

pub fn run(resolved: &mut Resolved) -> Result<Artifacts, Failure> {
    let seed = resolved.seed;
    let precision = resolved.precision;
    match &mut resolved.experiment {
        Params::Cantor(p) => cantor(p),
        Params::Regularity(p) => regularity(p),
        Params::Porosity(p) => porosity(p),
        Params::ConformalCheck(p) => conformal(p),
        Params::CartanCheck(p) => cartan(p, seed),
        Params::Localization(p) => localization(p, seed),
        Params::Damping(p) => damping(p),
        Params::FupScan(p) => fup_scan(p),
        Params::Constants(p) => constants(p, precision),
        Params::DistortScan(p) => distort_scan(p),
    }
}

fn cantor_spec(s: &SetParams) -> Result<CantorSpec, Failure> {
    match s.dimension {
        1 => Ok(CantorSpec::new_1d(s.base, &s.alphabet, s.depth, s.extent)),
        2 => Ok(CantorSpec::product_2d(s.base, &s.alphabet, s.depth, s.extent)),
        d => Err(Failure::Config(format!("set dimension must be 1 or 2, got {d}"))),
    }
}

#[derive(Serialize)]
struct CubeRow {
    x: f64,
    y: Option<f64>,
    side: f64,
}

fn cube_rows(set: &GridSet) -> Vec<CubeRow> {
    set.cubes()
        .iter()
        .map(|c| {
            let corner = set.cube_corner(c);
            CubeRow {
                x: corner[0],
                y: corner.get(1).copied(),
                side: set.resolution(),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SetSummary {
    cubes: usize,
    resolution: f64,
    delta: f64,
    volume: f64,
}

fn cantor(p: &mut CantorParams) -> Result<Artifacts, Failure> {
    let spec = cantor_spec(&p.set)?;
    let set = build_cantor(&spec)?;
    let mut out = Artifacts::default();
    let expected = (p.set.alphabet.len() as f64).powi((p.set.depth as usize * p.set.dimension) as i32);
    out.checks.push(check(
        "cube count",
        set.len() as f64 == expected,
        format!("{} cubes, expected {expected}", set.len()),
    ));
    out.json(
        "summary.json",
        &SetSummary {
            cubes: set.len(),
            resolution: set.resolution(),
            delta: spec.delta(),
            volume: set.volume(),
        },
    )?;
    out.csv("cubes.csv", &cube_rows(&set))?;
    Ok(out)
}

fn regularity(p: &mut RegularityParams) -> Result<Artifacts, Failure> {
    let spec = cantor_spec(&p.set)?;
    let set = build_cantor(&spec)?;
    let mu = natural_measure(&spec)?;
    let delta = *p.delta.get_or_insert(spec.delta());
    let alpha0 = *p.alpha0.get_or_insert(set.resolution());
    let report = check_regularity(&set, &mu, &RegularityQuery::new(delta, alpha0, p.alpha1, p.c_r))?;
    let mut out = Artifacts::default();
    out.checks.push(check(
        "regularity",
        report.pass,
        format!("measured C_R = {:.6} against {}", report.constant(), p.c_r),
    ));
    out.json("regularity.json", &report)?;
    Ok(out)
}

fn porosity(p: &mut PorosityParams) -> Result<Artifacts, Failure> {
    let set = build_cantor(&cantor_spec(&p.set)?)?;
    if p.depths.is_none() {
        let top = max_porosity_depth(&set, p.scale)
            .ok_or_else(|| Failure::Config("no admissible porosity depth at this scale".into()))?;
        p.depths = Some((0..=top).collect());
    }
    let depths = p.depths.clone().unwrap_or_default();
    let report = check_porosity(&set, p.scale, &depths)?;
    let mut out = Artifacts::default();
    out.checks.push(check(
        "porosity",
        report.porous(),
        format!("{} failing cubes over depths {depths:?}", report.failures.len()),
    ));
    out.json("porosity.json", &report)?;
    Ok(out)
}

fn conformal(p: &mut ConformalParams) -> Result<Artifacts, Failure> {
    if p.qs.is_empty() {
        return Err(Failure::Config("qs must not be empty".into()));
    }
    let mut qs = p.qs.clone();
    qs.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    for q in &qs {
        rows.push(asymptotics_report(*q)?);
    }
    let mut out = Artifacts::default();
    for r in &rows {
        out.checks.push(check(
            &format!("deviation at q = {}", r.q),
            r.max_rel_dev() <= p.tolerance_factor * r.q,
            format!("{:.4e} <= {} q", r.max_rel_dev(), p.tolerance_factor),
        ));
    }
    let shrinking = rows.windows(2).all(|w| {
        w[1].rel_dev_theta < w[0].rel_dev_theta
            && w[1].rel_dev_delta1 < w[0].rel_dev_delta1
            && w[1].rel_dev_delta2 < w[0].rel_dev_delta2
    });
    out.checks.push(check("deviations decrease with q", shrinking, ""));
    out.csv("asymptotics.csv", &rows)?;
    Ok(out)
}

#[derive(Serialize)]
struct CartanRow {
    seed: u64,
    masses: usize,
    h: f64,
    disks: usize,
    radius_sum: f64,
    probes: usize,
    violations: usize,
}

fn cartan(p: &mut CartanParams, seed: u64) -> Result<Artifacts, Failure> {
    if p.min_masses == 0 || p.max_masses < p.min_masses {
        return Err(Failure::Config("need 1 <= min_masses <= max_masses".into()));
    }
    let span = (p.max_masses - p.min_masses + 1) as u64;
    let mut rows = Vec::new();
    for i in 0..p.configurations {
        let s = seed.wrapping_add(i);
        let n = p.min_masses + (i % span) as usize;
        let masses = random_point_masses(s, n);
        for &h in &p.hs {
            let cover = cartan_disks(&masses, h)?;
            let (probes, violations) = cartan_grid_violations(&masses, &cover, p.probe_grid);
            rows.push(CartanRow {
                seed: s,
                masses: n,
                h,
                disks: cover.disks.len(),
                radius_sum: cover.radius_sum(),
                probes,
                violations,
            });
        }
    }
    let mut out = Artifacts::default();
    let bad: usize = rows.iter().map(|r| r.violations).sum();
    out.checks.push(check("no probe violations", bad == 0, format!("{bad} violations")));
    let over = rows.iter().filter(|r| r.radius_sum > 5.0 * r.h * (1.0 + 1e-12)).count();
    out.checks.push(check("radius budget 5H", over == 0, format!("{over} covers over budget")));
    out.csv("cartan.csv", &rows)?;
    Ok(out)
}

#[derive(Serialize)]
struct EnvelopeRow {
    q: f64,
    k: f64,
    k_refined: Option<f64>,
}

fn localization(p: &mut LocalizationParams, seed: u64) -> Result<Artifacts, Failure> {
    let cfg = SuiteConfig {
        dimension: 1,
        band: p.band,
        lambda: p.lambda,
        grid: LocalizationGrid::new(p.half_width, p.points_per_unit)?,
        placement_seed: p.placement_seed,
    };
    let seeds: Vec<u64> = (0..p.samples).map(|i| seed.wrapping_add(i)).collect();
    let reports = localization_suite(&cfg, &seeds, &p.qs)?;
    let env = envelope(&reports, &p.qs);
    let refined = if p.refine_check {
        let fine = SuiteConfig {
            grid: cfg.grid.refined(),
            ..cfg
        };
        Some(envelope(&localization_suite(&fine, &seeds, &p.qs)?, &p.qs))
    } else {
        None
    };
    let mut out = Artifacts::default();
    let finite = reports.iter().all(|r| r.finite) && env.iter().all(|(_, k)| k.is_finite());
    out.checks.push(check("finite constants", finite, ""));
    if let Some(fine) = &refined {
        let worst = env
            .iter()
            .zip(fine)
            .map(|((_, a), (_, b))| (a - b).abs() / a)
            .fold(0.0, f64::max);
        out.checks.push(check(
            "stable under refinement",
            worst <= p.refine_tolerance,
            format!("max relative change {worst:.3e}"),
        ));
    }
    if env.len() >= 3 {
        out.checks.push(check(
            "log K at most linear in 1/q",
            at_most_linear_in_inverse_q(&env),
            "",
        ));
    }
    let rows: Vec<EnvelopeRow> = env
        .iter()
        .enumerate()
        .map(|(i, (q, k))| EnvelopeRow {
            q: *q,
            k: *k,
            k_refined: refined.as_ref().map(|f| f[i].1),
        })
        .collect();
    out.csv("reports.csv", &reports)?;
    out.csv("envelope.csv", &rows)?;
    Ok(out)
}

#[derive(Serialize)]
struct DampingSummary<'a> {
    sigma: f64,
    sigma_clamped: bool,
    normalization: f64,
    constants: &'a fuplab::damping::DampingConstants,
    params: &'a fuplab::constants::DampingParams,
    support: &'a [[f64; 2]],
    leakage: f64,
    report: &'a fuplab::damping::DampingReport,
}

#[derive(Serialize)]
struct ProfileRow {
    xi: f64,
    abs_psi_hat: f64,
}

fn damping(p: &mut DampingCliParams) -> Result<Artifacts, Failure> {
    if p.set.dimension != 1 {
        return Err(Failure::Config("regular-set damping is one-dimensional".into()));
    }
    if p.plot_density == 0 {
        return Err(Failure::Config("plot_density must be positive".into()));
    }
    let spec = cantor_spec(&p.set)?;
    let y = build_cantor(&spec)?;
    let delta1 = *p.delta1.get_or_insert(spec.delta());
    if p.c_r.is_none() {
        let unit = CantorSpec::new_1d(p.set.base, &p.set.alphabet, p.set.depth, [0.0, 1.0]);
        let s = build_cantor(&unit)?;
        let mu = natural_measure(&unit)?;
        let r = check_regularity(&s, &mu, &RegularityQuery::new(delta1, s.resolution(), 1.0, f64::INFINITY))?;
        p.c_r = Some(r.constant());
    }
    let mut cfg = RegularDampingConfig::new(delta1, p.c_r.unwrap_or(1.0));
    cfg.iota = p.iota;
    cfg.leakage_tol = p.leakage_tol;
    let built = build_regular_damping(&y, p.c1, &cfg)?;
    let mut out = Artifacts::default();
    let names = ["support", "lower bound", "decay on Y", "global decay"];
    for (name, ok) in names.iter().zip(built.report.bullets) {
        out.checks.push(check(name, ok, ""));
    }
    out.json(
        "damping.json",
        &DampingSummary {
            sigma: built.sigma,
            sigma_clamped: built.sigma_clamped,
            normalization: built.normalization,
            constants: &built.psi.constants,
            params: &built.params,
            support: &built.psi.support,
            leakage: built.psi.leakage,
            report: &built.report,
        },
    )?;
    let [lo, hi] = p.set.extent;
    let n = ((hi - lo) * p.plot_density as f64).round() as usize;
    let profile: Vec<ProfileRow> = (0..=n)
        .map(|i| {
            let xi = lo + (hi - lo) * i as f64 / n as f64;
            ProfileRow {
                xi,
                abs_psi_hat: built.psi.eval_hat(&[xi]).norm(),
            }
        })
        .collect();
    out.csv("psi_hat.csv", &profile)?;
    Ok(out)
}

fn curve_spec(family: Family, base: u32, alphabet: &[u32], angle_deg: f64, dimension: usize) -> CurveSpec {
    match family {
        Family::Cantor1d => CurveSpec::Cantor1D {
            base,
            alphabet: alphabet.to_vec(),
        },
        Family::Rotated => CurveSpec::RotatedProduct {
            base,
            alphabet: alphabet.to_vec(),
            angle_deg,
        },
        Family::Full => CurveSpec::Full { base, dimension },
    }
}

#[derive(Serialize)]
struct CurveCsvRow {
    k: u32,
    n: f64,
    dimension: usize,
    rows: usize,
    cols: usize,
    norm: f64,
    method: &'static str,
    iterations: usize,
    residual: f64,
}

#[derive(Serialize)]
struct PlotRow {
    log_n: f64,
    neg_log_norm: f64,
}

#[derive(Serialize)]
struct BetaSummary<'a> {
    beta_hat: f64,
    intercept: f64,
    r_squared: f64,
    residual_max: f64,
    excluded_first: bool,
    submultiplicativity: &'a [fuplab::fup_operator::SubmultiplicativityRow],
}

fn fup_scan(p: &mut FupScanParams) -> Result<Artifacts, Failure> {
    if p.k_max < p.k_min {
        return Err(Failure::Config("k_max must be at least k_min".into()));
    }
    let spec = curve_spec(p.family, p.base, &p.alphabet, p.angle_deg, p.dimension);
    let disc = Discretization {
        oversampling: p.oversampling,
        freq_refine: p.freq_refine,
    };
    let ks: Vec<u32> = (p.k_min..=p.k_max).collect();
    let curve = fup_decay_curve(&spec, &ks, disc)?;
    let sub = submultiplicativity(&curve);
    let mut out = Artifacts::default();
    let in_range = curve.rows.iter().all(|r| r.norm >= 0.0 && r.norm <= 1.0 + 1e-12);
    out.checks.push(check("norms in [0, 1]", in_range, ""));
    out.checks.push(check(
        "decay exponent",
        curve.beta_hat >= p.min_beta - 1e-12,
        format!("beta_hat = {:.6} against {}", curve.beta_hat, p.min_beta),
    ));
    let rows: Vec<CurveCsvRow> = curve
        .rows
        .iter()
        .map(|r| CurveCsvRow {
            k: r.k,
            n: r.n_scale,
            dimension: r.dimension,
            rows: r.rows,
            cols: r.cols,
            norm: r.norm,
            method: r.method.label(),
            iterations: r.iterations,
            residual: r.residual,
        })
        .collect();
    let plot: Vec<PlotRow> = curve
        .rows
        .iter()
        .map(|r| PlotRow {
            log_n: r.n_scale.ln(),
            neg_log_norm: -r.norm.ln(),
        })
        .collect();
    out.csv("curve.csv", &rows)?;
    out.csv("curve_plot.csv", &plot)?;
    out.json(
        "beta.json",
        &BetaSummary {
            beta_hat: curve.beta_hat,
            intercept: curve.intercept,
            r_squared: curve.r_squared,
            residual_max: curve.residual_max,
            excluded_first: curve.excluded_first,
            submultiplicativity: &sub,
        },
    )?;
    Ok(out)
}

fn constants(p: &mut ConstantsParams, precision: Precision) -> Result<Artifacts, Failure> {
    let inputs = ChainInputs {
        d: p.d,
        delta: p.delta,
        delta1: p.delta1,
        c_r: p.c_r,
        eps0: p.eps0,
        iota: p.iota,
        m: p.m,
        c1: p.c1,
        alpha: p.alpha,
        q_star: p.q_star,
        cartan_c: p.cartan_c,
    };
    let chain = beta_chain(&inputs)?;
    let mut out = Artifacts::default();
    out.checks.push(check("chain beta at least headline beta", chain.chain_dominates_headline, ""));
    out.checks.push(check("two-sided beta bound", chain.beta_two_sided_ok, ""));
    out.checks.push(check(
        "double vs extended precision",
        chain.precision_max_rel_dev <= 1e-6,
        format!("max relative deviation {:.3e}", chain.precision_max_rel_dev),
    ));
    out.json("chain.json", &chain)?;
    let levels = match precision {
        Precision::Double => &chain.double,
        Precision::Extended => &chain.extended,
    };
    out.json("levels.json", levels)?;
    Ok(out)
}

#[derive(Serialize)]
struct DistortRow {
    amplitude: f64,
    d0: f64,
    sup_d: f64,
    min_det: f64,
    distorted: f64,
    straight: f64,
    ratio: f64,
}

fn distort_scan(p: &mut DistortParams) -> Result<Artifacts, Failure> {
    if p.amplitudes.is_empty() {
        return Err(Failure::Config("amplitudes must not be empty".into()));
    }
    let dim = match p.family {
        Family::Cantor1d => 1,
        Family::Rotated => 2,
        Family::Full => return Err(Failure::Config("distort-scan uses the cantor1d or rotated family".into())),
    };
    let make = |a: f64| -> Result<DiffeoSpec, Failure> {
        let kind = match p.diffeo {
            DiffeoFamily::Shear => DiffeoKind::Shear { a },
            DiffeoFamily::RadialBump => DiffeoKind::RadialBump { a, r0: p.bump_radius },
        };
        Ok(DiffeoSpec::new(dim, kind)?)
    };
    let maps = p.amplitudes.iter().map(|a| make(*a)).collect::<Result<Vec<_>, _>>()?;
    if p.freq_refine.is_none() {
        let sup = maps.iter().map(|m| m.bounds().sup_d).fold(0.0, f64::max);
        p.freq_refine = Some((4.0 * (dim as f64).sqrt() * sup - 1e-9).ceil().max(1.0) as usize);
    }
    let disc = Discretization {
        oversampling: p.oversampling,
        freq_refine: p.freq_refine.unwrap_or(1),
    };
    let spec = curve_spec(p.family, p.base, &p.alphabet, p.angle_deg, dim);
    let base = spec.instance(p.k, disc)?;
    let op = assemble_operator(&base, AssembleMode::Auto)?;
    let method = if op.dense.is_some() {
        NormMethod::Svd
    } else {
        NormMethod::Power
    };
    let straight = operator_norm(&op, method)?.norm;
    let mut rows = Vec::new();
    for (a, map) in p.amplitudes.iter().zip(maps) {
        let r = distorted_fup_norm(&base.clone().with_distortion(map)?)?;
        rows.push(DistortRow {
            amplitude: *a,
            d0: r.bounds.d0,
            sup_d: r.bounds.sup_d,
            min_det: r.bounds.min_det,
            distorted: r.norm,
            straight,
            ratio: r.norm / straight,
        });
    }
    let mut out = Artifacts::default();
    let worst = rows
        .iter()
        .map(|r| r.ratio.max(1.0 / r.ratio))
        .fold(1.0, f64::max);
    out.checks.push(check(
        "distorted within factor of straight",
        worst <= p.max_ratio,
        format!("worst factor {worst:.4}"),
    ));
    out.csv("distort.csv", &rows)?;
    Ok(out)
}
