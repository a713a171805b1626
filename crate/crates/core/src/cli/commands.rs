//! Subcommand bodies. Each returns its output files in memory; writing them
//! is left to the caller.

use serde::Serialize;

use crate::diagnostics::{fp_residual_sweep, wasserstein2, FPResidualReport, ReplicateRun};
use crate::dynamics::{gaussian_stationary_reference, integrate, TrajectoryRecord};
use crate::error::Error;
use crate::linalg::frobenius;
use crate::noise::derive_seed;

use super::config::{ConfigError, Role, RunConfig};
use super::table::{format_float, Provenance, ResultTable, Value};
use super::verify::{run_family, FamilyOutcome};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{error}")]
    BlowUp { error: Error, config: String },
    #[error(transparent)]
    Numerical(Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    fn from_run(error: Error, cfg: &RunConfig) -> Self {
        match error {
            Error::BlowUp { .. } => RunError::BlowUp { error, config: cfg.to_json() },
            other => RunError::Numerical(other),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    fn csv(name: &str, table: &ResultTable) -> Self {
        Self { name: name.into(), bytes: table.to_csv_bytes() }
    }
}

/// Files produced by a run, plus the reason it counts as a verification
/// failure, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub files: Vec<OutputFile>,
    pub failure: Option<String>,
    pub summary: String,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub table: ResultTable,
    pub trajectory: TrajectoryRecord,
    pub final_spread: f64,
    pub final_distance: Option<f64>,
    pub success: bool,
}

pub fn run_optimize(cfg: &RunConfig) -> Result<OptimizeOutcome, RunError> {
    let setup = cfg.setup(Role::Optimize)?;
    let tol = cfg.optimize_spec()?;
    let traj = integrate(&setup.dynamics, &setup.objective).map_err(|e| RunError::from_run(e, cfg))?;
    let minimizer = setup.objective.analytic_minimizer().map(<[f64]>::to_vec);
    let prov = Provenance::of(&setup.dynamics);
    let mut table = ResultTable::new([
        "kind",
        "t",
        "consensus_spread",
        "distance_to_minimizer",
        "m2",
        "m4",
        "m6",
        "min_cov_eig",
        "success",
    ]);
    let verdict = |k: usize| {
        let spread = traj.consensus_spread[k];
        let dist = minimizer.as_ref().map(|m| distance(&traj.weighted[k].mean, m));
        let ok = spread < tol.spread_tol && dist.is_none_or(|d| d < tol.distance_tol);
        (spread, dist, ok)
    };
    let row = |kind: &str, k: usize| {
        let (spread, dist, ok) = verdict(k);
        let m = traj.raw_moments[k];
        vec![
            kind.into(),
            traj.times[k].into(),
            spread.into(),
            dist.into(),
            m[0].into(),
            m[1].into(),
            m[2].into(),
            traj.min_cov_eig[k].into(),
            ok.into(),
        ]
    };
    for k in 0..traj.len() {
        table.push(prov.clone(), row("trajectory", k));
    }
    let last = traj.len() - 1;
    table.push(prov, row("summary", last));
    let (final_spread, final_distance, success) = verdict(last);
    Ok(OptimizeOutcome { table, trajectory: traj, final_spread, final_distance, success })
}

#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub table: ResultTable,
    pub final_mean: Vec<f64>,
    pub final_cov: Vec<Vec<f64>>,
    /// `(max_i |mean_i − m_i|, ‖C − A⁻¹‖_F / ‖A⁻¹‖_F)` when the target is quadratic.
    pub errors: Option<(f64, f64)>,
    pub within_tolerance: Option<bool>,
}

pub fn run_sample(cfg: &RunConfig) -> Result<SampleOutcome, RunError> {
    let setup = cfg.setup(Role::Sample)?;
    let tol = cfg.sample_spec()?;
    let reference = gaussian_stationary_reference(&setup.objective).ok();
    let traj = integrate(&setup.dynamics, &setup.objective).map_err(|e| RunError::from_run(e, cfg))?;
    let d = setup.objective.dim();
    let mut columns: Vec<String> = vec!["kind".into(), "t".into()];
    columns.extend((1..=d).map(|i| format!("mean_{i}")));
    for i in 1..=d {
        columns.extend((i..=d).map(|k| format!("cov_{i}_{k}")));
    }
    if reference.is_some() {
        columns.extend(["mean_error".into(), "cov_rel_error".into(), "within_tolerance".into()]);
    }
    let mut table = ResultTable::new(columns);
    let prov = Provenance::of(&setup.dynamics);
    let stats = |k: usize| {
        let ens = &traj.snapshots[k];
        let mean = ens.sample_mean();
        let cov = ens.sample_covariance();
        let errors = reference.as_ref().map(|r| {
            let mean_err = mean.iter().zip(&r.mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let cov_err = frobenius(&(cov.as_matrix() - r.cov.as_matrix())) / r.cov.frobenius();
            (mean_err, cov_err)
        });
        (mean, cov, errors)
    };
    let row = |kind: &str, k: usize| {
        let (mean, cov, errors) = stats(k);
        let mut values: Vec<Value> = vec![kind.into(), traj.times[k].into()];
        values.extend(mean.iter().map(|&v| Value::from(v)));
        for i in 0..d {
            values.extend((i..d).map(|k| Value::from(cov.get(i, k))));
        }
        if let Some((me, ce)) = errors {
            values.extend([me.into(), ce.into(), (me <= tol.mean_tol && ce <= tol.cov_tol).into()]);
        }
        values
    };
    for k in 0..traj.len() {
        table.push(prov.clone(), row("trajectory", k));
    }
    let last = traj.len() - 1;
    table.push(prov, row("summary", last));
    let (mean, cov, errors) = stats(last);
    Ok(SampleOutcome {
        table,
        final_mean: mean,
        final_cov: cov.to_rows(),
        errors,
        within_tolerance: errors.map(|(me, ce)| me <= tol.mean_tol && ce <= tol.cov_tol),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct W2Pair {
    pub j_small: usize,
    pub j_large: usize,
    /// Per replicate, in replicate order.
    pub values: Vec<f64>,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanfieldReport {
    pub residual: FPResidualReport,
    pub w2: Vec<W2Pair>,
    /// Medians strictly decrease along `j_list`.
    pub w2_monotone: bool,
}

#[derive(Clone, Debug)]
pub struct MeanfieldOutcome {
    pub report: MeanfieldReport,
    pub residual_table: ResultTable,
    pub w2_table: ResultTable,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// `W₂` between the final ensembles of replicate `r` at consecutive sizes,
/// the larger one truncated to its first `J_small` particles (which share
/// their initial draws and noise with the smaller run).
pub fn cross_j_w2(runs: &[ReplicateRun], j_list: &[usize], reps: usize) -> crate::Result<Vec<W2Pair>> {
    let at = |k: usize, r: usize| &runs[k * reps + r];
    j_list
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let values = (0..reps)
                .map(|r| {
                    let (small, large) = (at(k, r), at(k + 1, r));
                    debug_assert_eq!((small.j, large.j, small.rep, large.rep), (w[0], w[1], r, r));
                    wasserstein2(&small.final_ensemble, &large.final_ensemble.truncated(w[0])?)
                })
                .collect::<crate::Result<Vec<f64>>>()?;
            Ok(W2Pair { j_small: w[0], j_large: w[1], median: median(&values), values })
        })
        .collect()
}

pub fn run_meanfield(cfg: &RunConfig) -> Result<MeanfieldOutcome, RunError> {
    let plan = cfg.meanfield_plan()?;
    let base = &plan.setup.dynamics;
    let runs = fp_residual_sweep(base, &plan.setup.objective, &plan.j_list, &plan.seeds, &plan.phi)
        .map_err(|e| RunError::from_run(e, cfg))?;
    let residual = FPResidualReport::from_runs(&runs, derive_seed(cfg.seed, u64::MAX)).map_err(RunError::Numerical)?;
    let reps = plan.seeds.len();
    let w2 = cross_j_w2(&runs, &plan.j_list, reps).map_err(RunError::Numerical)?;
    let w2_monotone = w2.windows(2).all(|p| p[1].median < p[0].median);

    let prov = |j: Option<usize>, seed: u64| Provenance {
        j,
        seed,
        ..Provenance::of(base)
    };
    let mut residual_table =
        ResultTable::new(["kind", "rep", "residual", "mean_square", "slope", "intercept", "slope_ci_lo", "slope_ci_hi"]);
    for s in &residual.samples {
        residual_table.push(
            prov(Some(s.j), s.seed),
            vec!["replicate".into(), s.rep.into(), s.residual.into(), Value::Missing, Value::Missing, Value::Missing, Value::Missing, Value::Missing],
        );
    }
    for s in &residual.per_j {
        residual_table.push(
            prov(Some(s.j), cfg.seed),
            vec!["per_j".into(), Value::Missing, Value::Missing, s.mean_square.into(), Value::Missing, Value::Missing, Value::Missing, Value::Missing],
        );
    }
    residual_table.push(
        prov(None, cfg.seed),
        vec![
            "fit".into(),
            Value::Missing,
            Value::Missing,
            Value::Missing,
            residual.slope.into(),
            residual.intercept.into(),
            residual.slope_ci[0].into(),
            residual.slope_ci[1].into(),
        ],
    );

    let mut w2_table = ResultTable::new(["kind", "j_small", "rep", "w2", "monotone"]);
    for pair in &w2 {
        for (r, v) in pair.values.iter().enumerate() {
            w2_table.push(
                prov(Some(pair.j_large), plan.seeds[r]),
                vec!["replicate".into(), pair.j_small.into(), r.into(), (*v).into(), Value::Missing],
            );
        }
        w2_table.push(
            prov(Some(pair.j_large), cfg.seed),
            vec!["median".into(), pair.j_small.into(), Value::Missing, pair.median.into(), Value::Missing],
        );
    }
    w2_table.push(
        prov(None, cfg.seed),
        vec!["summary".into(), Value::Missing, Value::Missing, Value::Missing, w2_monotone.into()],
    );
    Ok(MeanfieldOutcome { report: MeanfieldReport { residual, w2, w2_monotone }, residual_table, w2_table })
}

#[derive(Clone, Debug)]
pub struct VerifyOutcome {
    pub table: ResultTable,
    pub families: Vec<FamilyOutcome>,
}

impl VerifyOutcome {
    pub fn total_failures(&self) -> usize {
        self.families.iter().map(|f| f.failures).sum()
    }
}

pub fn run_verify(cfg: &RunConfig) -> Result<VerifyOutcome, RunError> {
    let spec = cfg.verify_spec()?;
    let mut table = ResultTable::new(["family", "cases", "failures", "worst_margin", "corrupt_certificate"]);
    let mut families = Vec::new();
    for &family in &spec.checks {
        let cases = spec.cases.unwrap_or_else(|| family.default_cases());
        let out = run_family(family, cases, cfg.seed, spec.corrupt_certificate).map_err(RunError::Numerical)?;
        table.push(
            Provenance::seed_only(cfg.seed),
            vec![
                family.as_str().into(),
                out.cases.into(),
                out.failures.into(),
                out.worst_margin.into(),
                spec.corrupt_certificate.into(),
            ],
        );
        families.push(out);
    }
    Ok(VerifyOutcome { table, families })
}

fn dat_line(values: impl IntoIterator<Item = f64>) -> String {
    let mut line = values.into_iter().map(format_float).collect::<Vec<_>>().join(" ");
    line.push('\n');
    line
}

/// Whitespace-separated data files for gnuplot: the trajectory statistics
/// and the initial and final particle clouds.
pub fn run_render(cfg: &RunConfig) -> Result<Vec<OutputFile>, RunError> {
    let setup = cfg.setup(Role::Render)?;
    let traj = integrate(&setup.dynamics, &setup.objective).map_err(|e| RunError::from_run(e, cfg))?;
    let d = setup.objective.dim();
    let mut header = String::from("# t consensus_spread");
    (1..=d).for_each(|i| header.push_str(&format!(" M_{i}")));
    header.push_str(" m2 m4 m6 min_cov_eig\n");
    let mut trajectory = header;
    for k in 0..traj.len() {
        let mut row = vec![traj.times[k], traj.consensus_spread[k]];
        row.extend(&traj.weighted[k].mean);
        row.extend(traj.raw_moments[k]);
        row.push(traj.min_cov_eig[k]);
        trajectory.push_str(&dat_line(row));
    }
    let cloud = |label: &str, k: usize| {
        let mut text = format!("# {label} particles at t = {}\n", format_float(traj.times[k]));
        for p in traj.snapshots[k].particles() {
            text.push_str(&dat_line(p.iter().copied()));
        }
        text.into_bytes()
    };
    Ok(vec![
        OutputFile { name: "trajectory.dat".into(), bytes: trajectory.into_bytes() },
        OutputFile { name: "particles_initial.dat".into(), bytes: cloud("initial", 0) },
        OutputFile { name: "particles_final.dat".into(), bytes: cloud("final", traj.len() - 1) },
    ])
}

/// The subcommands addressable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Optimize,
    Sample,
    Meanfield,
    Verify,
    Render,
}

impl Subcommand {
    pub fn as_str(&self) -> &'static str {
        match self {
            Subcommand::Optimize => "optimize",
            Subcommand::Sample => "sample",
            Subcommand::Meanfield => "meanfield",
            Subcommand::Verify => "verify",
            Subcommand::Render => "render",
        }
    }
}

/// Runs `sub` and collects its files. Verification failures (a failing
/// check family, non-decreasing cross-J `W₂`) are reported in
/// `Artifacts::failure`, not as errors, so the files are still written.
pub fn execute(sub: Subcommand, cfg: &RunConfig) -> Result<Artifacts, RunError> {
    Ok(match sub {
        Subcommand::Optimize => {
            let out = run_optimize(cfg)?;
            let summary = format!(
                "optimize: spread {} distance {} success {}",
                format_float(out.final_spread),
                out.final_distance.map_or("n/a".into(), format_float),
                out.success
            );
            Artifacts { files: vec![OutputFile::csv("optimize.csv", &out.table)], failure: None, summary }
        }
        Subcommand::Sample => {
            let out = run_sample(cfg)?;
            let summary = match out.errors {
                Some((me, ce)) => format!(
                    "sample: mean error {} covariance error {} within tolerance {}",
                    format_float(me),
                    format_float(ce),
                    out.within_tolerance.unwrap_or(false)
                ),
                None => format!("sample: final mean {:?} (no analytic reference)", out.final_mean),
            };
            Artifacts { files: vec![OutputFile::csv("sample.csv", &out.table)], failure: None, summary }
        }
        Subcommand::Meanfield => {
            let out = run_meanfield(cfg)?;
            let r = &out.report;
            let json = serde_json::to_vec_pretty(r).expect("report serializes");
            let summary = format!(
                "meanfield: slope {} (95% CI {} .. {}), W2 medians {:?}, monotone {}",
                format_float(r.residual.slope),
                format_float(r.residual.slope_ci[0]),
                format_float(r.residual.slope_ci[1]),
                r.w2.iter().map(|p| p.median).collect::<Vec<_>>(),
                r.w2_monotone
            );
            Artifacts {
                files: vec![
                    OutputFile::csv("meanfield.csv", &out.residual_table),
                    OutputFile::csv("meanfield_w2.csv", &out.w2_table),
                    OutputFile { name: "meanfield.json".into(), bytes: json },
                ],
                failure: (!r.w2_monotone).then(|| "cross-J W2 medians do not decrease along j_list".into()),
                summary,
            }
        }
        Subcommand::Verify => {
            let out = run_verify(cfg)?;
            let failures = out.total_failures();
            let summary = out
                .families
                .iter()
                .map(|f| format!("{}: {}/{} failed", f.family.as_str(), f.failures, f.cases))
                .collect::<Vec<_>>()
                .join(", ");
            Artifacts {
                files: vec![OutputFile::csv("verify.csv", &out.table)],
                failure: (failures > 0).then(|| format!("{failures} check failures")),
                summary: format!("verify: {summary}"),
            }
        }
        Subcommand::Render => {
            let files = run_render(cfg)?;
            let summary = format!("render: wrote {} data files", files.len());
            Artifacts { files, failure: None, summary }
        }
    })
}
