//! Batch reproduction of the bundled benchmark artifacts.
//!
//! `tables`: for each bundled table scenario and each assignment design,
//! simulate a trial, tabulate the exact estimand values, estimate the same
//! requests from the simulated data, and write truth/empirical/compare CSVs
//! plus per-table cell roll-ups and a digest manifest. `figures`: write the
//! exact controlled-outcome and effect curves for the bundled curve
//! scenarios on a quarter-unit time grid.
//!
//! Every artifact is a deterministic function of (bundled config, seed,
//! draws, thread-independent simulation), so re-running a manifest's
//! command reproduces its digests byte for byte; manifests carry no
//! timestamps.

use crate::run::{bundled_config, eval_rows, write_text};
use contagion_core::dataset::digest_normalized;
use contagion_core::design::AssignmentDesign;
use contagion_core::estimand::{EstimandArgs, EstimandKind, EstimandRequest, Provenance};
use contagion_core::sim::simulate_trial;
use contagion_core::table::{compare, write_table, TableRow};
use contagion_core::{Error, Estimator, EstimatorConfig, Result, TruthEngine};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// Bundled table scenarios, in emission order.
pub const TABLE_SCENARIOS: [&str; 8] = [
    "table1_constant",
    "table1_constant_no_contagion",
    "table1_timevarying",
    "table1_timevarying_no_contagion",
    "table2_constant",
    "table2_constant_no_contagion",
    "table2_timevarying",
    "table2_timevarying_no_contagion",
];

/// Bundled curve scenarios.
pub const FIGURE_SCENARIOS: [&str; 2] = ["figure_leaky", "figure_blocking"];

/// Evaluation time for every table cell.
const TABLE_T: f64 = 2.0;

const DESIGNS: [(AssignmentDesign, &str); 4] = [
    (AssignmentDesign::Bernoulli, "bernoulli"),
    (AssignmentDesign::Block, "block"),
    (AssignmentDesign::Cluster, "cluster"),
    (AssignmentDesign::Observational, "observational"),
];

/// Covariate bins for the observational-design estimator; randomized
/// designs need no adjustment.
const OBSERVATIONAL_BINS: usize = 4;

#[derive(Serialize)]
struct ScenarioEntry {
    name: String,
    seed: u64,
    n: u64,
    tau: f64,
    standardize_draws: u64,
}

#[derive(Serialize)]
struct DatasetEntry {
    scenario: String,
    design: String,
    sha256: String,
}

#[derive(Serialize)]
struct ArtifactEntry {
    path: String,
    sha256: String,
}

/// Record of one reproduction run: what was executed, over which scenario
/// set and seeds, and the digest of every emitted file.
#[derive(Serialize)]
struct RunManifest {
    tool: String,
    command: String,
    scenario: Vec<ScenarioEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    dataset: Vec<DatasetEntry>,
    artifact: Vec<ArtifactEntry>,
}

fn tool_version() -> String {
    format!("contagion {}", env!("CARGO_PKG_VERSION"))
}

fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    let text = toml::to_string(manifest)
        .map_err(|e| Error::config(format!("manifest serialization: {e}")))?;
    write_text(&out_dir.join("manifest.toml"), &text)?;
    Ok(())
}

/// Write one artifact under `out_dir` and record its digest.
fn emit(
    out_dir: &Path,
    artifacts: &mut Vec<ArtifactEntry>,
    rel_path: &str,
    text: &str,
) -> Result<()> {
    let sha256 = write_text(&out_dir.join(rel_path), text)?;
    artifacts.push(ArtifactEntry { path: rel_path.to_string(), sha256 });
    Ok(())
}

fn req(kind: EstimandKind, t: f64, args: EstimandArgs) -> EstimandRequest {
    EstimandRequest::new(kind, t, args)
}

fn arm(x_i: Option<bool>, x_j: Option<bool>) -> EstimandArgs {
    EstimandArgs { x_i, x_j, ..Default::default() }
}

/// The request set each design's table files carry. Designs that cannot
/// identify a request are still asked for provably-undefined consistency
/// rows only when both sides flag them (IDE and VE_I_net need both
/// treatment-discordant and treatment-concordant pairs, which block and
/// cluster assignment respectively never produce on one side).
fn table_requests(design: AssignmentDesign) -> Vec<EstimandRequest> {
    let t = TABLE_T;
    match design {
        AssignmentDesign::Bernoulli => vec![
            req(EstimandKind::CeNatural, t, arm(Some(false), Some(false))),
            req(EstimandKind::CeNatural, t, arm(Some(false), Some(true))),
            req(EstimandKind::SeNatural, t, arm(None, Some(false))),
            req(EstimandKind::IeNatural, t, arm(Some(false), None)),
            req(EstimandKind::De, t, arm(None, None)),
            req(EstimandKind::Ide, t, arm(None, None)),
            req(EstimandKind::VeINet, t, arm(None, None)),
            req(EstimandKind::Sar, t, arm(Some(false), Some(true))),
            req(EstimandKind::Sar, t, arm(Some(false), Some(false))),
        ],
        AssignmentDesign::Block | AssignmentDesign::Cluster => vec![
            req(EstimandKind::De, t, arm(None, None)),
            req(EstimandKind::Ide, t, arm(None, None)),
            req(EstimandKind::VeINet, t, arm(None, None)),
        ],
        AssignmentDesign::Observational => vec![
            req(EstimandKind::De, t, arm(None, None)),
            req(EstimandKind::SeNatural, t, arm(None, Some(false))),
        ],
    }
}

/// One roll-up cell: the empirical estimate a benchmark table reports.
struct Cell {
    scenario: String,
    label: &'static str,
    value: Option<f64>,
    mc_se: Option<f64>,
}

fn push_cell(
    cells: &mut Vec<Cell>,
    scenario: &str,
    label: &'static str,
    rows: &[TableRow],
    kind: EstimandKind,
    args: EstimandArgs,
) {
    let row = rows.iter().find(|r| r.kind == kind && r.args == args);
    cells.push(Cell {
        scenario: scenario.to_string(),
        label,
        value: row.and_then(|r| r.value),
        mc_se: row.and_then(|r| r.mc_se),
    });
}

fn collect_cells(
    cells: &mut Vec<Cell>,
    scenario: &str,
    design: AssignmentDesign,
    rows: &[TableRow],
) {
    match design {
        AssignmentDesign::Bernoulli => {
            push_cell(cells, scenario, "CE_natural", rows, EstimandKind::CeNatural, arm(Some(false), Some(false)));
            push_cell(cells, scenario, "SE_natural", rows, EstimandKind::SeNatural, arm(None, Some(false)));
            push_cell(cells, scenario, "IE_natural", rows, EstimandKind::IeNatural, arm(Some(false), None));
            push_cell(cells, scenario, "DE_bernoulli", rows, EstimandKind::De, arm(None, None));
            push_cell(cells, scenario, "IDE", rows, EstimandKind::Ide, arm(None, None));
            push_cell(cells, scenario, "VE_I_net", rows, EstimandKind::VeINet, arm(None, None));
            push_cell(cells, scenario, "SAR_10", rows, EstimandKind::Sar, arm(Some(false), Some(true)));
            push_cell(cells, scenario, "SAR_00", rows, EstimandKind::Sar, arm(Some(false), Some(false)));
        }
        AssignmentDesign::Block => {
            push_cell(cells, scenario, "DE_block", rows, EstimandKind::De, arm(None, None));
        }
        AssignmentDesign::Cluster => {
            push_cell(cells, scenario, "DE_cluster", rows, EstimandKind::De, arm(None, None));
        }
        AssignmentDesign::Observational => {
            push_cell(cells, scenario, "DE_observational", rows, EstimandKind::De, arm(None, None));
        }
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "-".to_string(),
    }
}

fn cells_csv(cells: &[&Cell]) -> String {
    let mut out = String::from("scenario,cell,value,mc_se\n");
    for c in cells {
        let _ = writeln!(out, "{},{},{},{}", c.scenario, c.label, fmt_cell(c.value), fmt_cell(c.mc_se));
    }
    out
}

/// Regenerate the benchmark tables; exit code 1 when any truth-vs-empirical
/// row fails the 3-SE agreement gate.
pub fn tables(
    out_dir: &Path,
    n_override: Option<u64>,
    draws: u64,
    only: &[String],
    verbose: bool,
) -> Result<i32> {
    for name in only {
        if !TABLE_SCENARIOS.contains(&name.as_str()) {
            return Err(Error::config(format!(
                "unknown table scenario {name:?} (expected one of: {})",
                TABLE_SCENARIOS.join(", ")
            )));
        }
    }
    let selected: Vec<&str> = TABLE_SCENARIOS
        .iter()
        .copied()
        .filter(|s| only.is_empty() || only.iter().any(|o| o == s))
        .collect();

    let mut scenarios = Vec::new();
    let mut datasets = Vec::new();
    let mut artifacts = Vec::new();
    let mut cells: Vec<Cell> = Vec::new();
    let mut failures = 0usize;

    for name in &selected {
        let mut cfg = bundled_config(name)?;
        if let Some(n) = n_override {
            cfg.n = n;
        }
        let base = cfg.to_scenario()?;
        if verbose {
            eprintln!("scenario {name}: n = {}, seed = {}", base.n, base.seed);
        }
        let engine = TruthEngine::from_scenario(&base)?.with_draws(draws)?;
        scenarios.push(ScenarioEntry {
            name: base.name.clone(),
            seed: base.seed,
            n: base.n,
            tau: base.tau,
            standardize_draws: draws,
        });

        for (design, design_name) in DESIGNS {
            let mut scenario = base.clone();
            scenario.design = design;
            let data = simulate_trial(&scenario)?;
            datasets.push(DatasetEntry {
                scenario: base.name.clone(),
                design: design_name.to_string(),
                sha256: digest_normalized(&data.to_text()?),
            });

            let requests = table_requests(design);
            let (truth_rows, _) = eval_rows(&requests, Provenance::Truth, verbose, |r| {
                engine.estimand(design, r)
            })?;

            let mut estimator_config = EstimatorConfig::default();
            if design == AssignmentDesign::Observational {
                estimator_config.covariate_bins = OBSERVATIONAL_BINS;
            }
            let estimator = Estimator::new(&data, estimator_config)?;
            let (empirical_rows, _) =
                eval_rows(&requests, Provenance::Empirical, verbose, |r| estimator.estimand(r))?;

            let report = compare(&truth_rows, &empirical_rows)?;
            if !report.all_pass() {
                failures += report.failures();
                if verbose {
                    for row in report.rows.iter().filter(|r| !r.pass) {
                        eprintln!(
                            "  FAIL {name}/{design_name} {} {} (z {:?})",
                            row.kind.code(),
                            row.args.encode(),
                            row.z
                        );
                    }
                }
            }

            emit(out_dir, &mut artifacts, &format!("{name}/{design_name}.truth.csv"), &write_table(&truth_rows))?;
            emit(
                out_dir,
                &mut artifacts,
                &format!("{name}/{design_name}.empirical.csv"),
                &write_table(&empirical_rows),
            )?;
            emit(out_dir, &mut artifacts, &format!("{name}/{design_name}.compare.csv"), &report.to_csv())?;
            collect_cells(&mut cells, name, design, &empirical_rows);
        }
    }

    for (file, prefix) in [("table1_cells.csv", "table1"), ("table2_cells.csv", "table2")] {
        let subset: Vec<&Cell> = cells.iter().filter(|c| c.scenario.starts_with(prefix)).collect();
        if !subset.is_empty() {
            emit(out_dir, &mut artifacts, file, &cells_csv(&subset))?;
        }
    }

    let mut command = format!("reproduce-tables --draws {draws}");
    if let Some(n) = n_override {
        let _ = write!(command, " --n {n}");
    }
    for name in &selected {
        if !only.is_empty() {
            let _ = write!(command, " --scenario {name}");
        }
    }
    write_manifest(
        out_dir,
        &RunManifest { tool: tool_version(), command, scenario: scenarios, dataset: datasets, artifact: artifacts },
    )?;

    println!(
        "reproduced {} scenario(s) into {} ({} comparison failure(s))",
        selected.len(),
        out_dir.display(),
        failures
    );
    Ok(if failures == 0 { 0 } else { 1 })
}

/// Quarter-unit evaluation grid over the bundled horizon.
fn time_grid() -> Vec<f64> {
    (1..=16).map(|k| k as f64 * 0.25).collect()
}

/// Partner infection times for the controlled-outcome curve family.
const CURVE_WJ: [f64; 3] = [0.5, 1.0, 2.0];
/// Earlier/later partner-time pair for the controlled contagion contrast.
const CONTRAST_WJ: f64 = 0.5;
const CONTRAST_WJ_PRIME: f64 = 1.5;

fn controlled_requests(grid: &[f64]) -> Vec<EstimandRequest> {
    let mut reqs = Vec::new();
    for (x_i, x_j) in [(false, false), (true, false), (false, true)] {
        for w_j in CURVE_WJ {
            for &t in grid {
                reqs.push(req(
                    EstimandKind::OutcomeControlled,
                    t,
                    EstimandArgs {
                        w_j: Some(w_j),
                        x_i: Some(x_i),
                        x_j: Some(x_j),
                        ..Default::default()
                    },
                ));
            }
        }
    }
    for &t in grid {
        // the contrast is identically zero before the earlier partner time
        if t > CONTRAST_WJ {
            reqs.push(req(
                EstimandKind::CeControlled,
                t,
                EstimandArgs {
                    w_j: Some(CONTRAST_WJ),
                    w_j_prime: Some(CONTRAST_WJ_PRIME),
                    x_i: Some(false),
                    x_j: Some(false),
                    ..Default::default()
                },
            ));
        }
    }
    for &t in grid {
        reqs.push(req(
            EstimandKind::SeControlled,
            t,
            EstimandArgs { w_j: Some(CONTRAST_WJ), x_j: Some(false), ..Default::default() },
        ));
    }
    for &t in grid {
        reqs.push(req(
            EstimandKind::IeControlled,
            t,
            EstimandArgs { w_j: Some(CONTRAST_WJ), x_i: Some(false), ..Default::default() },
        ));
    }
    reqs
}

fn effect_requests(design: AssignmentDesign, grid: &[f64]) -> Vec<EstimandRequest> {
    let mut reqs = Vec::new();
    if design == AssignmentDesign::Bernoulli {
        for &t in grid {
            reqs.push(req(EstimandKind::CeNatural, t, arm(Some(false), Some(false))));
        }
        for &t in grid {
            reqs.push(req(EstimandKind::SeNatural, t, arm(None, Some(false))));
        }
        for &t in grid {
            reqs.push(req(EstimandKind::IeNatural, t, arm(Some(false), None)));
        }
        for &t in grid {
            reqs.push(req(EstimandKind::Ide, t, arm(None, None)));
        }
        for &t in grid {
            reqs.push(req(EstimandKind::VeINet, t, arm(None, None)));
        }
        for &t in grid {
            reqs.push(req(EstimandKind::VeAr, t, arm(None, None)));
        }
    }
    for &t in grid {
        reqs.push(req(EstimandKind::De, t, arm(None, None)));
    }
    reqs
}

/// Regenerate the effect-curve CSVs (exact values only; nothing is
/// simulated or compared, so success is exit 0).
pub fn figures(out_dir: &Path, verbose: bool) -> Result<i32> {
    let grid = time_grid();
    let mut scenarios = Vec::new();
    let mut artifacts = Vec::new();

    for name in FIGURE_SCENARIOS {
        let cfg = bundled_config(name)?;
        let scenario = cfg.to_scenario()?;
        if verbose {
            eprintln!("curves for {name}");
        }
        let engine = TruthEngine::from_scenario(&scenario)?;
        scenarios.push(ScenarioEntry {
            name: scenario.name.clone(),
            seed: scenario.seed,
            n: scenario.n,
            tau: scenario.tau,
            standardize_draws: 1,
        });

        let controlled = controlled_requests(&grid);
        let (rows, _) = eval_rows(&controlled, Provenance::Truth, verbose, |r| {
            engine.estimand(scenario.design, r)
        })?;
        emit(out_dir, &mut artifacts, &format!("controlled_{name}.csv"), &write_table(&rows))?;

        for (design, design_name) in &DESIGNS[..3] {
            let requests = effect_requests(*design, &grid);
            let (rows, _) = eval_rows(&requests, Provenance::Truth, verbose, |r| {
                engine.estimand(*design, r)
            })?;
            emit(
                out_dir,
                &mut artifacts,
                &format!("effects_{name}_{design_name}.csv"),
                &write_table(&rows),
            )?;
        }
    }

    write_manifest(
        out_dir,
        &RunManifest {
            tool: tool_version(),
            command: "reproduce-figures".to_string(),
            scenario: scenarios,
            dataset: Vec::new(),
            artifact: artifacts,
        },
    )?;
    println!("reproduced curve CSVs into {}", out_dir.display());
    Ok(0)
}
