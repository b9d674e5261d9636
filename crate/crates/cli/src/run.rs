//! Single-verb command implementations and the helpers they share with the
//! batch reproduction verbs: bundled-config resolution, file IO that keeps
//! error paths, and the evaluate-or-flag loop over a request list.

use contagion_core::dataset::digest_normalized;
use contagion_core::estimand::{EstimandRequest, EstimandValue, Provenance};
use contagion_core::table::{compare, parse_requests, parse_table, write_table, TableRow};
use contagion_core::{Dataset, Error, Estimator, EstimatorConfig, Result, ScenarioConfig, SubjectSel, TruthEngine};
use std::fs;
use std::path::Path;

/// Bundled scenario configs, addressable by name (with or without the
/// `.cfg` suffix) wherever a config path is accepted.
pub const BUNDLED_CONFIGS: &[(&str, &str)] = &[
    ("table1_constant", include_str!("../configs/table1_constant.cfg")),
    (
        "table1_constant_no_contagion",
        include_str!("../configs/table1_constant_no_contagion.cfg"),
    ),
    ("table1_timevarying", include_str!("../configs/table1_timevarying.cfg")),
    (
        "table1_timevarying_no_contagion",
        include_str!("../configs/table1_timevarying_no_contagion.cfg"),
    ),
    ("table2_constant", include_str!("../configs/table2_constant.cfg")),
    (
        "table2_constant_no_contagion",
        include_str!("../configs/table2_constant_no_contagion.cfg"),
    ),
    ("table2_timevarying", include_str!("../configs/table2_timevarying.cfg")),
    (
        "table2_timevarying_no_contagion",
        include_str!("../configs/table2_timevarying_no_contagion.cfg"),
    ),
    ("figure_leaky", include_str!("../configs/figure_leaky.cfg")),
    ("figure_blocking", include_str!("../configs/figure_blocking.cfg")),
];

/// Load a scenario config from a filesystem path, falling back to the
/// bundled set when no such file exists.
pub fn resolve_config(arg: &str) -> Result<ScenarioConfig> {
    let path = Path::new(arg);
    if path.is_file() {
        return ScenarioConfig::load(path);
    }
    let name = arg.strip_suffix(".cfg").unwrap_or(arg);
    if let Some((_, text)) = BUNDLED_CONFIGS.iter().find(|(n, _)| *n == name) {
        return ScenarioConfig::parse(text, arg);
    }
    let names: Vec<&str> = BUNDLED_CONFIGS.iter().map(|(n, _)| *n).collect();
    Err(Error::config(format!(
        "config {arg:?} is neither a readable file nor a bundled scenario (bundled: {})",
        names.join(", ")
    )))
}

pub fn bundled_config(name: &str) -> Result<ScenarioConfig> {
    let text = BUNDLED_CONFIGS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::config(format!("no bundled scenario named {name:?}")))?;
    ScenarioConfig::parse(text, name)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write text creating parent directories; returns the normalized digest.
pub fn write_text(path: &Path, text: &str) -> Result<String> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(digest_normalized(text))
}

/// Evaluate every request, turning undefined-estimand and insufficient-data
/// failures into flagged rows (the run continues); anything else aborts.
/// Returns the rows and the number flagged.
pub fn eval_rows<F>(
    requests: &[EstimandRequest],
    provenance: Provenance,
    verbose: bool,
    mut eval: F,
) -> Result<(Vec<TableRow>, usize)>
where
    F: FnMut(&EstimandRequest) -> Result<EstimandValue>,
{
    let mut rows = Vec::with_capacity(requests.len());
    let mut flagged = 0;
    for request in requests {
        match eval(request) {
            Ok(v) => rows.push(TableRow::from_value(&v)),
            Err(e @ (Error::UndefinedEstimand(_) | Error::InsufficientData(_))) => {
                if verbose {
                    eprintln!("  flagged {}: {e}", request.key());
                }
                flagged += 1;
                rows.push(TableRow::flagged(request, provenance, &e));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((rows, flagged))
}

pub fn cmd_simulate(
    config: &str,
    out: &Path,
    seed: Option<u64>,
    n: Option<u64>,
    verbose: bool,
) -> Result<()> {
    let mut cfg = resolve_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = n {
        cfg.n = n;
    }
    let scenario = cfg.to_scenario()?;
    if verbose {
        eprintln!(
            "simulating {:?}: n = {}, tau = {}, seed = {}",
            scenario.name, scenario.n, scenario.tau, scenario.seed
        );
    }
    let data = contagion_core::sim::simulate_trial(&scenario)?;
    let digest = data.write(out)?;
    println!("wrote {} ({} partnerships, sha256 {digest})", out.display(), data.records.len());
    Ok(())
}

pub fn cmd_truth(
    config: &str,
    requests: &Path,
    out: &Path,
    seed: Option<u64>,
    draws: Option<u64>,
    verbose: bool,
) -> Result<()> {
    let mut cfg = resolve_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let scenario = cfg.to_scenario()?;
    let mut engine = TruthEngine::from_scenario(&scenario)?;
    if let Some(d) = draws {
        engine = engine.with_draws(d)?;
    }
    let reqs = parse_requests(&read_text(requests)?, &requests.display().to_string())?;
    let (rows, flagged) =
        eval_rows(&reqs, Provenance::Truth, verbose, |r| engine.estimand(scenario.design, r))?;
    write_text(out, &write_table(&rows))?;
    println!("wrote {} ({} rows, {flagged} flagged)", out.display(), rows.len());
    Ok(())
}

/// Command-line adjustments applied on top of `--estimator-config`.
pub struct EstimateOverrides {
    pub estimator_config: Option<std::path::PathBuf>,
    pub bins: Option<usize>,
    pub bandwidth: Option<f64>,
    pub subjects: Option<String>,
    pub min_stratum: Option<usize>,
}

fn parse_subjects(raw: &str) -> Result<SubjectSel> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "one" | "1" => Ok(SubjectSel::One),
        "two" | "2" => Ok(SubjectSel::Two),
        "both" => Ok(SubjectSel::Both),
        other => Err(Error::config(format!(
            "--subjects must be one, two, or both (got {other:?})"
        ))),
    }
}

impl EstimateOverrides {
    fn into_config(self) -> Result<EstimatorConfig> {
        let mut config = match &self.estimator_config {
            Some(path) => {
                let text = read_text(path)?;
                toml::from_str::<EstimatorConfig>(&text).map_err(|e| {
                    Error::config(format!("estimator config {}: {e}", path.display()))
                })?
            }
            None => EstimatorConfig::default(),
        };
        if let Some(b) = self.bins {
            config.covariate_bins = b;
        }
        if let Some(h) = self.bandwidth {
            config.wj_bandwidth = Some(h);
        }
        if let Some(s) = &self.subjects {
            config.subjects = parse_subjects(s)?;
        }
        if let Some(m) = self.min_stratum {
            config.min_stratum_size = m;
        }
        Ok(config)
    }
}

pub fn cmd_estimate(
    dataset: &Path,
    requests: &Path,
    out: &Path,
    overrides: EstimateOverrides,
    verbose: bool,
) -> Result<()> {
    let data = Dataset::read(dataset)?;
    let config = overrides.into_config()?;
    let estimator = Estimator::new(&data, config)?;
    let reqs = parse_requests(&read_text(requests)?, &requests.display().to_string())?;
    let (rows, flagged) =
        eval_rows(&reqs, Provenance::Empirical, verbose, |r| estimator.estimand(r))?;
    write_text(out, &write_table(&rows))?;
    println!("wrote {} ({} rows, {flagged} flagged)", out.display(), rows.len());
    Ok(())
}

/// Exit code 1 when any row fails the 3-SE agreement gate.
pub fn cmd_compare(
    truth: &Path,
    empirical: &Path,
    out: Option<&Path>,
    verbose: bool,
) -> Result<i32> {
    let truth_rows = parse_table(&read_text(truth)?, &truth.display().to_string())?;
    let empirical_rows = parse_table(&read_text(empirical)?, &empirical.display().to_string())?;
    let report = compare(&truth_rows, &empirical_rows)?;
    let csv = report.to_csv();
    match out {
        Some(path) => {
            write_text(path, &csv)?;
        }
        None => print!("{csv}"),
    }
    if verbose {
        for row in report.rows.iter().filter(|r| !r.pass) {
            eprintln!(
                "  FAIL {} {} {}: truth {:?} vs empirical {:?} (z {:?})",
                row.kind.code(),
                row.t,
                row.args.encode(),
                row.truth,
                row.empirical,
                row.z
            );
        }
    }
    println!("{} rows compared, {} failed", report.rows.len(), report.failures());
    Ok(if report.all_pass() { 0 } else { 1 })
}
