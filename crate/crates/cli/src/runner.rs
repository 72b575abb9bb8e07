//! Task execution and file output.
//!
//! Every run writes its data file(s) plus a `.sidecar.json` holding the
//! fully resolved scenario; feeding the sidecar back through `--config`
//! reproduces the output byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use cv_teleport::gaussian_states::{gaussian_cf, GaussianState, SqueezingParam, StateFamily};
use cv_teleport::hermite::{PrecisionPolicy, DEFAULT_MANTISSA_BITS};
use cv_teleport::optimize::{
    optimize_e_with, optimize_e_with_policy, optimize_g_with_policy, ObjectiveConfig,
    ObjectiveDomain, ObjectiveEvaluator, OptimizeRun, PSOConfig,
};
use cv_teleport::pv_ops::{
    response_ratio_radial, FourIndexConsts, GeneralizedPVSpec, GeneralizedPvState,
    OperationDescriptor, PVSpec, PhotonVariedState,
};
use cv_teleport::teleport::{
    fidelity, h_max, BoundFamily, HPrime, InputState, PvOperation, QuadratureGrid, ResourceCF,
};

use crate::scenario::{
    figure_scenarios, GridSpec, InputDescriptor, LabeledOperation, Scenario, Task, FIGURE_IDS,
};

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or scenario schema; exit code 2.
    Config(String),
    /// Engine-level numerical failure; exit code 3.
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<cv_teleport::Error> for CliError {
    fn from(e: cv_teleport::Error) -> Self {
        use cv_teleport::Error::*;
        match e {
            InvalidParameter(_) | OutOfRange(_) | DimensionMismatch { .. } => {
                Self::Config(e.to_string())
            }
            _ => Self::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn parse_precision(text: &str) -> CliResult<PrecisionPolicy> {
    if text == "machine" {
        return Ok(PrecisionPolicy::machine());
    }
    if let Some(bits) = text.strip_prefix("extended:") {
        let bits: u32 = bits
            .parse()
            .map_err(|_| CliError::Config(format!("invalid mantissa bit count in '{text}'")))?;
        return Ok(PrecisionPolicy::extended(bits)?);
    }
    if text == "extended" {
        return Ok(PrecisionPolicy::extended(DEFAULT_MANTISSA_BITS)?);
    }
    Err(CliError::Config(format!(
        "precision must be 'machine' or 'extended:<bits>', got '{text}'"
    )))
}

/// Seventeen significant digits, '.' decimal separator.
fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> CliResult<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {path:?}: {e}")))
}

fn write_sidecar(dir: &Path, scenario: &Scenario) -> CliResult<PathBuf> {
    let path = dir.join(format!("{}.sidecar.json", scenario.name));
    let mut resolved = scenario.clone();
    resolved.engine_version = Some(env!("CARGO_PKG_VERSION").to_string());
    let json =
        serde_json::to_string_pretty(&resolved).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(&path, json).map_err(|e| CliError::Config(format!("cannot write {path:?}: {e}")))?;
    Ok(path)
}

fn grid_points(grid: &GridSpec) -> Vec<Complex64> {
    match grid {
        GridSpec::Radial { max, points } => (1..=*points)
            .map(|k| Complex64::new(max * k as f64 / *points as f64, 0.0))
            .collect(),
        GridSpec::Cartesian {
            re_max,
            im_max,
            points,
        } => {
            let n = *points;
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let re = -re_max + 2.0 * re_max * i as f64 / (n - 1).max(1) as f64;
                    let im = -im_max + 2.0 * im_max * j as f64 / (n - 1).max(1) as f64;
                    out.push(Complex64::new(re, im));
                }
            }
            out
        }
    }
}

fn grid_coordinate_columns(grid: &GridSpec) -> Vec<String> {
    match grid {
        GridSpec::Radial { .. } => vec!["abs_xi".to_string()],
        GridSpec::Cartesian { .. } => vec!["re_xi".to_string(), "im_xi".to_string()],
    }
}

fn coordinate_values(grid: &GridSpec, xi: Complex64) -> Vec<f64> {
    match grid {
        GridSpec::Radial { .. } => vec![xi.re],
        GridSpec::Cartesian { .. } => vec![xi.re, xi.im],
    }
}

enum PvResource {
    Simple(PhotonVariedState),
    Generalized(GeneralizedPvState),
}

impl PvResource {
    fn build(
        base: GaussianState,
        op: &OperationDescriptor,
        policy: PrecisionPolicy,
    ) -> CliResult<Self> {
        if let Some(spec) = op.pv_spec()? {
            return Ok(Self::Simple(PhotonVariedState::new(base, spec, policy)?));
        }
        let spec = op
            .generalized_spec()?
            .expect("descriptor is pv or generalized");
        Ok(Self::Generalized(GeneralizedPvState::new(
            base, spec, policy,
        )?))
    }

    fn response_ratio(&self, xi: Complex64) -> cv_teleport::Result<f64> {
        match self {
            Self::Simple(s) => s.response_ratio(xi),
            Self::Generalized(g) => g.response_ratio(xi),
        }
    }

    fn into_resource(self) -> ResourceCF {
        match self {
            Self::Simple(s) => ResourceCF::PhotonVaried(s),
            Self::Generalized(g) => ResourceCF::GeneralizedPv(g),
        }
    }
}

fn bound_family(scenario: &Scenario) -> CliResult<BoundFamily> {
    let r = scenario.resource.squeezing()?;
    match scenario.resource.family {
        StateFamily::Tmsv => Ok(BoundFamily::Tmsv { r }),
        StateFamily::Tmst => Ok(BoundFamily::Tmst {
            r,
            nbar: scenario.resource.nbar.unwrap_or(0.0),
        }),
        StateFamily::Tmsc => Err(CliError::Config(
            "H_max is defined for tmsv and tmst resources".into(),
        )),
    }
}

/// Run one scenario; returns the paths written.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {out_dir:?}: {e}")))?;
    let policy = parse_precision(&scenario.precision)?;
    match &scenario.task {
        Task::Figure { id } => {
            let expansions =
                figure_scenarios(id, scenario.seed, &scenario.precision).ok_or_else(|| {
                    CliError::Config(format!(
                        "unknown figure id '{id}' (expected one of {FIGURE_IDS:?})"
                    ))
                })?;
            let mut paths = Vec::new();
            for sub in &expansions {
                paths.extend(run_scenario(sub, out_dir)?);
            }
            Ok(paths)
        }
        Task::ResponseRatioGrid {
            operations,
            grid,
            include_h_max,
        } => run_response_ratio_grid(scenario, operations, grid, *include_h_max, policy, out_dir),
        Task::Fidelity {
            operation,
            input,
            radial_cutoff,
            nodes,
        } => run_fidelity(
            scenario,
            operation,
            input,
            *radial_cutoff,
            *nodes,
            policy,
            out_dir,
        ),
        Task::Optimize { .. } => run_optimize(scenario, policy, out_dir),
        Task::HPrimeGrid { operation, grid } => {
            run_h_prime(scenario, operation, grid, policy, out_dir)
        }
        Task::OracleValidate {
            r_values,
            max_total_photons,
            max_order,
            grid_points,
            tolerance,
        } => run_oracle_validate(
            scenario,
            r_values,
            *max_total_photons,
            *max_order,
            *grid_points,
            *tolerance,
            out_dir,
        ),
    }
}

fn run_response_ratio_grid(
    scenario: &Scenario,
    operations: &[LabeledOperation],
    grid: &GridSpec,
    include_h_max: bool,
    policy: PrecisionPolicy,
    out_dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    if scenario.resource.loss.is_some() {
        return Err(CliError::Config(
            "response-ratio grids take a loss-free resource; use the h-prime task for channels"
                .into(),
        ));
    }
    if operations.is_empty() {
        return Err(CliError::Config("at least one operation required".into()));
    }
    let base = scenario.resource.family_state()?;
    let resources: Vec<PvResource> = operations
        .iter()
        .map(|op| PvResource::build(base.clone(), &op.op, policy))
        .collect::<CliResult<_>>()?;
    let points = grid_points(grid);
    let rows: Result<Vec<Vec<f64>>, cv_teleport::Error> = points
        .par_iter()
        .map(|&xi| {
            let mut row = coordinate_values(grid, xi);
            for res in &resources {
                row.push(res.response_ratio(xi)?);
            }
            Ok(row)
        })
        .collect();
    let mut rows = rows.map_err(CliError::from)?;
    let mut header = grid_coordinate_columns(grid);
    header.extend(operations.iter().map(|o| o.label.clone()));
    if include_h_max {
        let family = bound_family(scenario)?;
        header.push("H_max".into());
        for (row, &xi) in rows.iter_mut().zip(&points) {
            row.push(h_max(family, xi));
        }
    }
    let csv = out_dir.join(format!("{}.csv", scenario.name));
    write_csv(&csv, &header, &rows)?;
    let sidecar = write_sidecar(out_dir, scenario)?;
    Ok(vec![csv, sidecar])
}

fn input_state(desc: &InputDescriptor) -> InputState {
    match desc {
        InputDescriptor::Coherent { alpha } => InputState::Coherent((*alpha).into()),
        InputDescriptor::Squeezed { s } => InputState::SqueezedVacuum(*s),
        InputDescriptor::Fock { n } => InputState::Fock(*n),
    }
}

fn run_fidelity(
    scenario: &Scenario,
    operation: &Option<OperationDescriptor>,
    input: &InputDescriptor,
    radial_cutoff: f64,
    nodes: usize,
    policy: PrecisionPolicy,
    out_dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    let base = scenario.resource.family_state()?;
    // Operations act before loss.
    let mut resource = match operation {
        Some(op) => PvResource::build(base, op, policy)?.into_resource(),
        None => ResourceCF::Gaussian(base),
    };
    if let Some(loss) = scenario.resource.loss {
        resource = resource.with_loss(loss);
    }
    let grid = QuadratureGrid {
        radial_cutoff,
        nodes,
        ..QuadratureGrid::default()
    };
    let value = fidelity(&resource, &input_state(input), &grid)?;
    let json_path = out_dir.join(format!("{}.json", scenario.name));
    let body = serde_json::json!({ "fidelity": value });
    fs::write(&json_path, serde_json::to_string_pretty(&body).unwrap())
        .map_err(|e| CliError::Config(format!("cannot write {json_path:?}: {e}")))?;
    let sidecar = write_sidecar(out_dir, scenario)?;
    Ok(vec![json_path, sidecar])
}

fn parse_domain(text: &str) -> CliResult<ObjectiveDomain> {
    match text {
        "radial_line" => Ok(ObjectiveDomain::RadialLine),
        "disk" => Ok(ObjectiveDomain::Disk),
        _ => Err(CliError::Config(format!(
            "domain must be 'radial_line' or 'disk', got '{text}'"
        ))),
    }
}

fn run_optimize(
    scenario: &Scenario,
    policy: PrecisionPolicy,
    out_dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    let Task::Optimize {
        schemes,
        orders,
        xi_lim,
        radial_nodes,
        domain,
        dagger,
        swarm,
        iters,
        restarts,
        curve_grid,
    } = &scenario.task
    else {
        unreachable!("dispatched on task kind");
    };
    if scenario.resource.loss.is_some() {
        return Err(CliError::Config(
            "optimization targets loss-free resources".into(),
        ));
    }
    let r = scenario.resource.squeezing()?;
    let domain = parse_domain(domain)?;
    let ocfg = ObjectiveConfig {
        xi_lim: *xi_lim,
        radial_nodes: *radial_nodes,
        domain,
    };
    let pcfg = PSOConfig {
        swarm: *swarm,
        iters: *iters,
        restarts: *restarts,
        ..PSOConfig::seeded(scenario.seed)
    };
    let family = scenario.resource.family;
    let base = scenario.resource.family_state()?;

    let mut runs: Vec<OptimizeRun> = Vec::new();
    for &scheme in schemes {
        for &order in orders {
            let run = match scheme {
                1 => {
                    if family == StateFamily::Tmsv
                        && *dagger
                        && domain == ObjectiveDomain::RadialLine
                    {
                        optimize_e_with_policy(order, r, &ocfg, &pcfg, policy)?
                    } else {
                        let ev = match family {
                            StateFamily::Tmsc => {
                                ObjectiveEvaluator::for_state(&base, *dagger, order, &ocfg, policy)?
                            }
                            _ => ObjectiveEvaluator::for_radial_family(
                                FourIndexConsts::for_state(&base, *dagger)?,
                                order,
                                &ocfg,
                                policy,
                            )?,
                        };
                        optimize_e_with(&ev, r.r_db(), &pcfg)?
                    }
                }
                2 => {
                    if family != StateFamily::Tmsv || !dagger {
                        return Err(CliError::Config(
                            "scheme 2 (gain optimization) applies to the daggered operation \
                             on a tmsv resource"
                                .into(),
                        ));
                    }
                    optimize_g_with_policy(order, r, &ocfg, &pcfg, policy)?
                }
                other => {
                    return Err(CliError::Config(format!(
                        "scheme must be 1 or 2, got {other}"
                    )))
                }
            };
            runs.push(run);
        }
    }

    let json_path = out_dir.join(format!("{}.json", scenario.name));
    fs::write(&json_path, serde_json::to_string_pretty(&runs).unwrap())
        .map_err(|e| CliError::Config(format!("cannot write {json_path:?}: {e}")))?;
    let mut paths = vec![json_path];

    if let Some(grid) = curve_grid {
        let points = grid_points(grid);
        let mut header = grid_coordinate_columns(grid);
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for run in &runs {
            header.push(format!("H_s{}_N{}", run.scheme, run.order));
            let spec = GeneralizedPVSpec::new(run.e_opt.clone(), *dagger)?;
            let values: Result<Vec<f64>, cv_teleport::Error> = match family {
                StateFamily::Tmsc => {
                    let gen = GeneralizedPvState::new(base.clone(), spec, policy)?;
                    points
                        .par_iter()
                        .map(|&xi| gen.response_ratio(xi))
                        .collect()
                }
                _ => {
                    let consts = FourIndexConsts::for_state(&base, *dagger)?;
                    points
                        .par_iter()
                        .map(|&xi| response_ratio_radial(consts, &spec, xi, policy))
                        .collect()
                }
            };
            columns.push(values.map_err(CliError::from)?);
        }
        if family != StateFamily::Tmsc {
            let bound = bound_family(scenario)?;
            header.push("H_max".into());
            columns.push(points.iter().map(|&xi| h_max(bound, xi)).collect());
        }
        let rows: Vec<Vec<f64>> = points
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let mut row = coordinate_values(grid, xi);
                for col in &columns {
                    row.push(col[i]);
                }
                row
            })
            .collect();
        let csv = out_dir.join(format!("{}.csv", scenario.name));
        write_csv(&csv, &header, &rows)?;
        paths.push(csv);
    }
    paths.push(write_sidecar(out_dir, scenario)?);
    Ok(paths)
}

fn run_h_prime(
    scenario: &Scenario,
    operation: &OperationDescriptor,
    grid: &GridSpec,
    policy: PrecisionPolicy,
    out_dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    if scenario.resource.family != StateFamily::Tmsv {
        return Err(CliError::Config(
            "the dissipative ratio is defined for tmsv resources".into(),
        ));
    }
    let channel = scenario.resource.loss.ok_or_else(|| {
        CliError::Config("h-prime needs a loss entry {T1, T2} on the resource".into())
    })?;
    let r = scenario.resource.squeezing()?;
    let op = if let Some(spec) = operation.pv_spec()? {
        PvOperation::Simple(spec)
    } else {
        PvOperation::Generalized(operation.generalized_spec()?.expect("pv or generalized"))
    };
    let hp = HPrime::new(r, &op, channel, policy)?;
    let points = grid_points(grid);
    let rows: Result<Vec<Vec<f64>>, cv_teleport::Error> = points
        .par_iter()
        .map(|&xi| {
            let mut row = coordinate_values(grid, xi);
            row.push(hp.eval(xi)?);
            Ok(row)
        })
        .collect();
    let rows = rows.map_err(CliError::from)?;
    let mut header = grid_coordinate_columns(grid);
    header.push("H_prime".into());
    let csv = out_dir.join(format!("{}.csv", scenario.name));
    write_csv(&csv, &header, &rows)?;
    let sidecar = write_sidecar(out_dir, scenario)?;
    Ok(vec![csv, sidecar])
}

enum OracleJob {
    Pv(PVSpec),
    Generalized(GeneralizedPVSpec),
}

impl OracleJob {
    fn label(&self) -> String {
        match self {
            Self::Pv(spec) => {
                let o = &spec.ops;
                format!("pv(t{}n{},t{}n{})", o[0].t, o[0].n, o[1].t, o[1].n)
            }
            Self::Generalized(spec) => {
                format!("generalized(N{},dagger={})", spec.order(), spec.dagger())
            }
        }
    }

    /// Max CF / ratio disagreement against the oracle, escalating the oracle
    /// dimension until its truncation tails pass the guard.
    fn run(
        &self,
        r: SqueezingParam,
        points: &[Complex64],
        policy: PrecisionPolicy,
    ) -> cv_teleport::Result<(f64, f64, usize)> {
        use cv_teleport::fock_oracle::{
            oracle_apply, oracle_apply_generalized, oracle_cf, oracle_response, oracle_tmsv,
        };
        use cv_teleport::gaussian_states::tmsv;

        let mut dim = 60;
        let (base, varied) = loop {
            let base = oracle_tmsv(r, dim, 1e-6)?;
            let (varied, _) = match self {
                Self::Pv(spec) => oracle_apply(&base, spec)?,
                Self::Generalized(spec) => oracle_apply_generalized(&base, spec)?,
            };
            if base.tail_mass(5).max(varied.tail_mass(5)) <= 1e-13 || dim >= 140 {
                break (base, varied);
            }
            dim += 20;
        };
        let analytic: Box<dyn Fn(Complex64, Complex64) -> cv_teleport::Result<Complex64>> =
            match self {
                Self::Pv(spec) => {
                    let pv = PhotonVariedState::new(tmsv(r), spec.clone(), policy)?;
                    Box::new(move |x1, x2| {
                        Ok(pv.cf_ratio_at(x1, x2)? * gaussian_cf(pv.base(), &[x1, x2]))
                    })
                }
                Self::Generalized(spec) => {
                    let gen = GeneralizedPvState::new(tmsv(r), spec.clone(), policy)?;
                    Box::new(move |x1, x2| gen.cf(&[x1, x2]))
                }
            };
        let mut cf_diff = 0.0f64;
        let mut rr_diff = 0.0f64;
        for &xi in points {
            let a_cf = analytic(xi, xi.conj())?;
            let o_cf = oracle_cf(&varied, &[xi, xi.conj()]);
            cf_diff = cf_diff.max((a_cf - o_cf).norm());
            let base_resp = oracle_response(&base, xi);
            let a_rr = a_cf / gaussian_cf(&tmsv(r), &[xi, xi.conj()]);
            let o_rr = oracle_response(&varied, xi) / base_resp;
            rr_diff = rr_diff.max((a_rr.re - o_rr.re).abs());
        }
        Ok((cf_diff, rr_diff, dim))
    }
}

fn run_oracle_validate(
    scenario: &Scenario,
    r_values: &[f64],
    max_total_photons: u32,
    max_order: usize,
    grid_points_count: usize,
    tolerance: f64,
    out_dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    use cv_teleport::pv_ops::ModeOp;

    let policy = parse_precision(&scenario.precision)?;
    let points: Vec<Complex64> = (1..=grid_points_count)
        .map(|k| Complex64::new(3.0 * k as f64 / grid_points_count as f64, 0.0))
        .collect();

    let mut jobs = Vec::new();
    for n1 in 0..=max_total_photons {
        for n2 in 0..=(max_total_photons - n1) {
            for (t1, t2) in [(-1i8, -1i8), (1, 1), (-1, 1)] {
                if (n1 == 0 && t1 == 1) || (n2 == 0 && t2 == 1) || (n1 + n2 == 0) {
                    continue;
                }
                jobs.push(OracleJob::Pv(
                    PVSpec::new(vec![ModeOp { t: t1, n: n1 }, ModeOp { t: t2, n: n2 }])
                        .map_err(CliError::from)?,
                ));
            }
        }
    }
    for order in 1..=max_order {
        let e: Vec<f64> = (0..=order).map(|k| 0.6f64.powi(k as i32)).collect();
        for dagger in [true, false] {
            jobs.push(OracleJob::Generalized(
                GeneralizedPVSpec::new(e.clone(), dagger).map_err(CliError::from)?,
            ));
        }
    }

    let mut text = String::from("spec,r,max_cf_diff,max_ratio_diff,oracle_dim\n");
    let mut worst = 0.0f64;
    for &rv in r_values {
        let r = SqueezingParam::from_r(rv).map_err(CliError::from)?;
        for job in &jobs {
            let (cf_diff, rr_diff, dim) = job.run(r, &points, policy).map_err(CliError::from)?;
            worst = worst.max(cf_diff).max(rr_diff);
            let _ = writeln!(
                text,
                "{},{},{},{},{dim}",
                job.label(),
                fmt_num(rv),
                fmt_num(cf_diff),
                fmt_num(rr_diff)
            );
        }
    }

    let csv = out_dir.join(format!("{}.csv", scenario.name));
    fs::write(&csv, text).map_err(|e| CliError::Config(format!("cannot write {csv:?}: {e}")))?;
    let sidecar = write_sidecar(out_dir, scenario)?;
    if worst > tolerance {
        return Err(CliError::Numerical(format!(
            "oracle disagreement {worst:e} exceeds tolerance {tolerance:e} (see {csv:?})"
        )));
    }
    Ok(vec![csv, sidecar])
}
