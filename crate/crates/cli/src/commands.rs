use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use cfloor_core::closed_form::homogeneous_value_unchecked;
use cfloor_core::dual::{solve_dual, DualGrid, SolverConfig};
use cfloor_core::montecarlo::{
    compare_to_value, dt_halving_allowance, simulate as run_paths, ClippedMertonPolicy, Feedback,
    FloorPolicy, LinearPolicy, SimConfig, SimReport, TablePolicy, Verdict,
};
use cfloor_core::policy::{homogeneous_grid, invert, PolicyTable};
use cfloor_core::verify::{run_all, Tolerances, VerificationReport};
use cfloor_core::{Error, Feasibility, ProblemCase, ProblemConfig, ProblemSpec};

use crate::artifacts::{sha256_hex, to_json, OutputDir};
use crate::{GridArgs, PolicyChoice};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub source: anyhow::Error,
}

impl Failure {
    pub fn input(source: anyhow::Error) -> Self {
        Self { code: EXIT_INPUT, source }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. }
            | Error::ConvexityLoss { .. }
            | Error::NumericalBlowup { .. }
            | Error::Domain(_) => EXIT_SOLVER,
            Error::PolicyInadmissible { .. } | Error::FloorBreached { .. } => EXIT_VERIFY,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            source: e.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

struct Loaded {
    bytes: Vec<u8>,
    config: ProblemConfig,
    spec: ProblemSpec,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)?;
    let text = std::str::from_utf8(&bytes)
        .context("config is not UTF-8")
        .map_err(Failure::input)?;
    let config = ProblemConfig::from_json_str(text)?;
    let spec = config.to_spec()?;
    Ok(Loaded {
        bytes,
        config,
        spec,
    })
}

fn require_solvable(spec: &ProblemSpec) -> CmdResult {
    match spec.classify() {
        ProblemCase::InfeasibleAll => Err(Failure::input(anyhow!(
            "k = {} >= r = {} with l = {} > 0: no finite wealth can sustain the floor",
            spec.k(),
            spec.r(),
            spec.l()
        ))),
        ProblemCase::ValuePossiblyInfinite => Err(spec.require_positive_kappa().unwrap_err().into()),
        _ => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct Classification {
    case: ProblemCase,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    merton_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_xe: Option<f64>,
}

pub fn classify(config: &Path) -> CmdResult {
    let spec = load(config)?.spec;
    let case = spec.classify();
    let d = spec.derived;
    let c = if case == ProblemCase::InfeasibleAll {
        Classification {
            case,
            kappa: None,
            merton_fraction: None,
            x_e: None,
            c_e: None,
            v_xe: None,
        }
    } else {
        Classification {
            case,
            kappa: Some(d.kappa),
            merton_fraction: Some(d.merton_fraction),
            x_e: d.x_e,
            c_e: d.c_e,
            v_xe: d.v_xe,
        }
    };
    print!("{}", String::from_utf8(to_json(&c)?).expect("JSON is UTF-8"));
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSummary {
    pub method: String,
    pub y_min: f64,
    pub y_max: f64,
    pub n_nodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub case: ProblemCase,
    pub kappa: f64,
    pub merton_fraction: f64,
    pub x_e: f64,
    pub c_e: f64,
    pub v_xe: f64,
    pub x_star_list: Vec<f64>,
    pub residual_inf: f64,
    pub scheme_residual: f64,
    pub newton_iterations: usize,
    pub grid: GridSummary,
    pub table_nodes: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub checks_pass: bool,
    /// sha256 of the report that `verify` writes for these files.
    pub check_digest: String,
}

/// Dual grid for a solvable spec: closed form when `l = 0`, numerical otherwise.
fn build_grid(spec: &ProblemSpec, grid: &GridArgs) -> Result<(DualGrid, &'static str), Failure> {
    require_solvable(spec)?;
    if spec.l() == 0.0 {
        Ok((homogeneous_grid(spec, grid.x_lo, grid.x_hi, grid.nodes)?, "closed_form"))
    } else {
        let cfg = SolverConfig::around_reference(spec, grid.y_lo, grid.y_hi, grid.nodes);
        Ok((solve_dual(spec, &cfg)?, "dual_solver"))
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> cfloor_core::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn verify_files(
    spec: &ProblemSpec,
    dual_csv: &[u8],
    policy_csv: &[u8],
    x_star_list: Vec<f64>,
) -> Result<VerificationReport, Failure> {
    let grid = DualGrid::read_csv(spec, dual_csv)?;
    let table = PolicyTable::read_csv(spec, policy_csv, x_star_list)?;
    Ok(run_all(spec, &table, Some(&grid), &Tolerances::default()))
}

pub fn solve(config: &Path, out: &Path, grid_args: &GridArgs) -> CmdResult {
    let Loaded { bytes, spec, .. } = load(config)?;
    let (grid, method) = build_grid(&spec, grid_args)?;
    let table = invert(&spec, &grid)?;

    let dual_csv = csv_bytes(|b| grid.write_csv(b))?;
    let policy_csv = csv_bytes(|b| table.write_csv(b))?;
    // The digest is taken over what `verify` will see: the files, not the in-memory solve.
    let report = verify_files(&spec, &dual_csv, &policy_csv, table.x_star_list.clone())?;
    let report_json = to_json(&report)?;

    let d = spec.derived;
    let summary = Summary {
        case: spec.classify(),
        kappa: d.kappa,
        merton_fraction: d.merton_fraction,
        x_e: spec.x_e(),
        c_e: spec.c_e(),
        v_xe: spec.v_xe(),
        x_star_list: table.x_star_list.clone(),
        residual_inf: grid.residual_inf,
        scheme_residual: grid.scheme_residual,
        newton_iterations: grid.iterations,
        grid: GridSummary {
            method: method.to_string(),
            y_min: grid.y[0],
            y_max: grid.y[grid.len() - 1],
            n_nodes: grid.len(),
        },
        table_nodes: table.len(),
        x_min: table.x_min(),
        x_max: table.x_max(),
        checks_pass: report.overall,
        check_digest: sha256_hex(&report_json),
    };

    let mut dir = OutputDir::create(out, "solve", &bytes)?;
    dir.write("summary.json", &to_json(&summary)?)?;
    dir.write("dual.csv", &dual_csv)?;
    dir.write("policy.csv", &policy_csv)?;
    dir.finish()?;
    eprintln!(
        "solved {} ({} nodes); x* = {:?}; checks {}",
        summary.case,
        summary.table_nodes,
        summary.x_star_list,
        if report.overall { "pass" } else { "FAIL" }
    );
    Ok(())
}

fn read_in(out: &Path, name: &str) -> Result<Vec<u8>, Failure> {
    let path = out.join(name);
    fs::read(&path)
        .with_context(|| format!("reading {} (run `cfloor solve` first)", path.display()))
        .map_err(Failure::input)
}

pub fn verify(config: &Path, out: &Path) -> CmdResult {
    let Loaded { bytes, spec, .. } = load(config)?;
    let summary: Summary = serde_json::from_slice(&read_in(out, "summary.json")?)
        .context("parsing summary.json")
        .map_err(Failure::input)?;
    let dual_csv = read_in(out, "dual.csv")?;
    let policy_csv = read_in(out, "policy.csv")?;
    let report = verify_files(&spec, &dual_csv, &policy_csv, summary.x_star_list)?;
    let report_json = to_json(&report)?;

    let mut dir = OutputDir::create(out, "verify", &bytes)?;
    dir.write("report.json", &report_json)?;
    dir.finish()?;

    for c in &report.checks {
        let mark = if c.pass { "pass" } else { "FAIL" };
        eprintln!("{mark:>4}  {:<22} worst {:.3e}", c.name, c.worst);
    }
    if report.overall {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Err(Failure {
            code: EXIT_VERIFY,
            source: anyhow!("verification failed: {}", failed.join(", ")),
        })
    }
}

pub struct SimArgs {
    pub x0: Option<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub policy: PolicyChoice,
    pub dt_check: bool,
}

#[derive(Debug, Serialize)]
struct SimOutput {
    policy: &'static str,
    config: SimConfig,
    report: SimReport,
    /// Value the estimate is compared with: closed form when `l = 0`, else the solved table.
    reference_value: Option<f64>,
    dt_allowance: f64,
    verdict: Option<Verdict>,
}

pub fn simulate(config: &Path, args: &SimArgs, out: Option<&Path>, grid_args: &GridArgs) -> CmdResult {
    let Loaded {
        bytes,
        config: problem,
        spec,
    } = load(config)?;
    let x0 = args
        .x0
        .or(problem.x0)
        .ok_or_else(|| Failure::input(anyhow!("no initial wealth: pass --x0 or set x0 in the config")))?;
    let cfg = SimConfig {
        x0,
        dt: args.dt,
        horizon: args.horizon,
        n_paths: args.paths,
        seed: args.seed,
        clamp_at_floor: true,
    };
    require_solvable(&spec)?;
    let feasibility = cfg.validate(&spec)?;

    let table = if spec.l() == 0.0 {
        None
    } else {
        let (grid, _) = build_grid(&spec, grid_args)?;
        Some(invert(&spec, &grid)?)
    };
    let reference_value = match (feasibility, &table) {
        (Feasibility::ZeroWealth, _) => Some(0.0),
        (Feasibility::Marginal, _) => Some(spec.v_xe()),
        (Feasibility::Interior, None) => Some(homogeneous_value_unchecked(&spec, x0)?),
        (Feasibility::Interior, Some(t)) => t.value_at(x0).ok(),
    };

    let homogeneous;
    let table_policy;
    let floor = FloorPolicy::new(&spec);
    let merton = ClippedMertonPolicy::new(&spec);
    let policy: &dyn Feedback = match args.policy {
        PolicyChoice::Optimal => match &table {
            Some(t) => {
                table_policy = TablePolicy::new(t);
                &table_policy
            }
            None => {
                homogeneous = LinearPolicy::homogeneous(&spec)?;
                &homogeneous
            }
        },
        PolicyChoice::Floor => &floor,
        PolicyChoice::Merton => &merton,
    };

    let report = run_paths(&spec, policy, &cfg)?;
    let dt_allowance = if args.dt_check {
        dt_halving_allowance(&spec, policy, &cfg, &report)?
    } else {
        0.0
    };
    let verdict = reference_value.map(|v| compare_to_value(&report, v, dt_allowance));
    let output = SimOutput {
        policy: args.policy.as_str(),
        config: cfg,
        report,
        reference_value,
        dt_allowance,
        verdict,
    };
    let json = to_json(&output)?;
    if let Some(dir) = out {
        let mut dir = OutputDir::create(dir, "simulate", &bytes)?;
        dir.write("sim.json", &json)?;
        dir.finish()?;
    }
    print!("{}", String::from_utf8(json).expect("JSON is UTF-8"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        let code = |e: Error| Failure::from(e).code;
        assert_eq!(code(Error::NoConvergence { iterations: 3, residual: 1.0 }), EXIT_SOLVER);
        assert_eq!(code(Error::ConvexityLoss { y: 1.0, v_yy: -1.0 }), EXIT_SOLVER);
        assert_eq!(code(Error::InfeasibleWealth { x0: 1.0, x_e: 2.0 }), EXIT_INPUT);
        assert_eq!(code(Error::KappaNonPositive { kappa: -0.1 }), EXIT_INPUT);
        assert_eq!(code(Error::Parse("x".into())), EXIT_INPUT);
        assert_eq!(code(Error::PolicyInadmissible { x: 1.0, c: 0.0, floor: 1.0 }), EXIT_VERIFY);
    }

    #[test]
    fn unsolvable_cases_are_input_errors() {
        let infeasible = ProblemSpec::from_values(0.03, 0.05, 0.2, 0.1, 0.5, 0.05, 1.0).unwrap();
        assert_eq!(require_solvable(&infeasible).unwrap_err().code, EXIT_INPUT);
        let infinite = ProblemSpec::from_values(0.03, 0.05, 0.2, 0.01, 0.5, 0.0, 1.0).unwrap();
        assert!(infinite.kappa() <= 0.0);
        assert_eq!(require_solvable(&infinite).unwrap_err().code, EXIT_INPUT);
    }
}
