// SPDX-License-Identifier: Apache-2.0
use std::fs;
use std::path::{Path, PathBuf};

use rigidnet_core::defaults::{classify_defaults_single_shock, exact_default_predicate, Verdict};
use rigidnet_core::document::{BackendKind, Document, EngineSpec};
use rigidnet_core::equilibrium::{leverage_comparative_statics, solve};
use rigidnet_core::montecarlo::{run_campaign, CampaignConfig, SimulationReport, DEFAULT_BINS};
use rigidnet_core::scenarios::{reproduce, TableId};
use rigidnet_core::shocks::NormalizedShocks;
use rigidnet_core::{Economy, Leontief, Setup, ShockModel, Solution};
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::output::{OutDir, Provenance, Row};

/// Whether the command's own checks held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

pub fn load(path: &Path) -> CliResult<Document> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    Document::parse(&text).map_err(|source| CliError::Document { path: path.to_path_buf(), source })
}

fn setup(path: &Path, doc: &Document) -> CliResult<Setup> {
    doc.setup().map_err(|source| CliError::Document { path: path.to_path_buf(), source })
}

fn backend_name(kind: BackendKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn provenance(command: &str, input: Option<&Path>, spec: &EngineSpec) -> Provenance {
    let mut p = Provenance::new(command, input, backend_name(spec.backend));
    if spec.backend == BackendKind::MonteCarlo {
        p.seed = Some(spec.seed);
        p.num_draws = Some(spec.num_draws);
    }
    p
}

/// Applies command-line overrides to the document's engine.
fn engine_spec(doc: &Document, draws: Option<usize>, seed: Option<u64>) -> EngineSpec {
    let mut spec = doc.engine_spec();
    if let Some(d) = draws {
        spec.num_draws = d;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec
}

struct Solved {
    leontief: Leontief,
    solution: Solution,
}

fn solve_setup(s: &Setup) -> CliResult<Solved> {
    let leontief = Leontief::new(&s.economy)?;
    let law = s.engine.condition(s.model()?, &s.signal, &s.observation)?;
    let solution = solve(&s.economy, &leontief, &law)?;
    Ok(Solved { leontief, solution })
}

fn warn(s: &Setup) {
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
}

pub fn validate(file: &Path) -> CliResult<Outcome> {
    let doc = load(file)?;
    let s = setup(file, &doc)?;
    warn(&s);
    print!("{}", doc.to_canonical_string()?);
    Ok(Outcome::Pass)
}

fn equilibrium_rows(econ: &Economy, leontief: &Leontief, sol: &Solution) -> Vec<Row> {
    let p = &sol.profile;
    let q = &sol.equilibrium;
    let v0 = leontief.centrality();
    let mut rows = Vec::new();
    for k in 0..econ.n() {
        let theta = econ.leverage()[k];
        let e = sol.expected_exp_rho[k];
        let stats = [
            ("zeta", p.zeta[k], 0.0),
            ("xi", p.xi[k], 0.0),
            ("v0", v0[k], 0.0),
            ("v_zeta", p.discounted_centrality[k], 0.0),
            ("y", q.y0[k], 0.0),
            ("l", q.labor[k], 0.0),
            ("c", q.c0[k], 0.0),
            ("p/w", q.p_over_w[k], 0.0),
            ("p_rel", q.p_rel[k], 0.0),
            ("r", q.rates[k], 0.0),
            ("expected_exp_rho", e.value, e.std_err),
        ];
        rows.extend(stats.iter().map(|(name, v, se)| Row::new(theta, k + 1, name, *v, *se)));
    }
    rows
}

fn print_equilibrium(econ: &Economy, leontief: &Leontief, sol: &Solution) {
    let p = &sol.profile;
    let q = &sol.equilibrium;
    println!(
        "{:>6} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}",
        "sector", "theta", "zeta", "xi", "v0", "v_zeta", "y", "l", "c", "p/w"
    );
    for k in 0..econ.n() {
        println!(
            "{:>6} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>10.4}",
            k + 1,
            econ.leverage()[k],
            p.zeta[k],
            p.xi[k],
            leontief.centrality()[k],
            p.discounted_centrality[k],
            q.y0[k],
            q.labor[k],
            q.c0[k],
            q.p_over_w[k]
        );
    }
}

#[derive(Serialize)]
struct EquilibriumReport<'a> {
    label: Option<&'a str>,
    n: usize,
    solution: &'a Solution,
    centrality: &'a [f64],
    labor_clearing_residual: f64,
    goods_clearing_residual: f64,
    welfare_slack: f64,
}

pub fn equilibrium(
    file: &Path,
    out: &Path,
    draws: Option<usize>,
    seed: Option<u64>,
) -> CliResult<Outcome> {
    let mut doc = load(file)?;
    let spec = engine_spec(&doc, draws, seed);
    doc.engine = Some(spec.clone());
    let s = setup(file, &doc)?;
    warn(&s);
    let solved = solve_setup(&s)?;
    let prov = provenance("equilibrium", Some(file), &spec);
    let dir = OutDir::create(out)?;
    let econ = &s.economy;
    let q = &solved.solution.equilibrium;
    let labor_residual = (q.labor.iter().sum::<f64>() - 1.0).abs();
    let report = EquilibriumReport {
        label: econ.label(),
        n: econ.n(),
        solution: &solved.solution,
        centrality: solved.leontief.centrality(),
        labor_clearing_residual: labor_residual,
        goods_clearing_residual: q.clearing_residual(),
        welfare_slack: solved.solution.profile.welfare_slack(solved.leontief.centrality()),
    };
    dir.csv("equilibrium.csv", &prov, &equilibrium_rows(econ, &solved.leontief, &solved.solution))?;
    dir.json("report.json", &prov, &report)?;
    print_equilibrium(econ, &solved.leontief, &solved.solution);
    Ok(Outcome::Pass)
}

fn simulation_rows(r: &SimulationReport) -> Vec<Row> {
    let mut rows = Vec::new();
    for k in 0..r.n() {
        let theta = r.theta[k];
        for (name, e) in [
            ("profit_mean", r.profit_mean[k]),
            ("profit_sd", r.profit_sd[k]),
            ("default_prob", r.default_prob[k]),
            ("tau_mean", r.tau_mean[k]),
            ("epsilon_mean", r.epsilon_mean[k]),
        ] {
            rows.push(Row::new(theta, k + 1, name, e.value, e.std_err));
        }
        for (name, v) in [("zeta", r.zeta[k]), ("xi", r.xi[k]), ("y", r.y0[k]), ("c", r.c0[k])] {
            rows.push(Row::new(theta, k + 1, name, v, 0.0));
        }
    }
    rows
}

/// The report as JSON with one-based cascade members and without the
/// histograms, which go to their own files.
fn simulation_json(r: &SimulationReport) -> CliResult<Value> {
    let mut v = serde_json::to_value(r)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("histograms");
        if let Some(Value::Array(cascades)) = obj.get_mut("cascades") {
            for c in cascades {
                if let Some(Value::Array(members)) = c.get_mut("sectors") {
                    for m in members.iter_mut() {
                        *m = Value::from(m.as_u64().unwrap_or(0) + 1);
                    }
                }
            }
        }
    }
    Ok(v)
}

pub fn simulate(
    file: &Path,
    out: &Path,
    draws: Option<usize>,
    seed: Option<u64>,
    bins: Option<usize>,
) -> CliResult<Outcome> {
    let mut doc = load(file)?;
    let spec = engine_spec(&doc, draws, seed);
    doc.engine = Some(spec.clone());
    let s = setup(file, &doc)?;
    warn(&s);
    let solved = solve_setup(&s)?;
    let config = CampaignConfig { num_draws: spec.num_draws, seed: spec.seed, bins: bins.unwrap_or(DEFAULT_BINS) };
    let report = run_campaign(
        &s.economy,
        &solved.leontief,
        &solved.solution.profile,
        &solved.solution.equilibrium,
        s.model()?,
        &s.signal,
        &s.observation,
        config,
    )?;

    let mut prov = provenance("simulate", Some(file), &spec);
    prov.seed = Some(config.seed);
    prov.num_draws = Some(config.num_draws);
    prov.bins = Some(config.bins);
    let dir = OutDir::create(out)?;
    dir.csv("simulation.csv", &prov, &simulation_rows(&report))?;
    dir.json("report.json", &prov, &simulation_json(&report)?)?;
    for (k, h) in report.histograms.iter().enumerate() {
        for (name, hist) in [("tau", &h.tau), ("epsilon", &h.epsilon), ("profit", &h.profit)] {
            dir.histogram(&format!("hist_{name}_sector{}.txt", k + 1), &prov, hist)?;
        }
    }

    println!("{:>6} {:>12} {:>12} {:>12} {:>10}", "sector", "profit_mean", "profit_sd", "default_prob", "stderr");
    for k in 0..report.n() {
        println!(
            "{:>6} {:>12.5} {:>12.5} {:>12.5} {:>10.5}",
            k + 1,
            report.profit_mean[k].value,
            report.profit_sd[k].value,
            report.default_prob[k].value,
            report.default_prob[k].std_err
        );
    }
    println!("accepted draws: {} of {}", report.accepted_draws, report.num_draws);
    if report.welfare_bound_violations > 0 {
        eprintln!(
            "welfare bound violated on {} draws (min slack {:e})",
            report.welfare_bound_violations, report.min_welfare_slack
        );
        return Ok(Outcome::Fail);
    }
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct VerdictRow {
    sector: usize,
    theta: f64,
    verdict: Verdict,
    l_minus: f64,
    exposure: f64,
    tau: f64,
    epsilon: f64,
    defaults: bool,
}

#[derive(Serialize)]
struct Thresholds {
    shocked_sector: usize,
    eta: f64,
    t_bar: Option<f64>,
    scan_limit: f64,
    /// Exponential law only: sectors with `L⁻ ≤ -2/η - λ` cannot default.
    #[serde(skip_serializing_if = "Option::is_none")]
    no_default_exposure_bound: Option<f64>,
    /// Exponential law only: below this every exposed sector defaults.
    #[serde(skip_serializing_if = "Option::is_none")]
    certain_default_below: Option<f64>,
    /// Exponential law only: the shocked sector's own threshold when it
    /// does not feed back on itself.
    #[serde(skip_serializing_if = "Option::is_none")]
    own_threshold: Option<f64>,
    verdicts: Vec<Verdict>,
}

pub fn defaults(file: &Path, out: &Path, eta_o: f64) -> CliResult<Outcome> {
    if !(eta_o.is_finite() && eta_o <= 0.0) {
        return Err(CliError::Usage(format!("--eta-o must be a finite non-positive number, got {eta_o}")));
    }
    let doc = load(file)?;
    let spec = doc.engine_spec();
    let s = setup(file, &doc)?;
    warn(&s);
    let model = s.model()?;
    let o = model.shocked_sector().ok_or(rigidnet_core::Error::UnsupportedShock)?;
    let econ = &s.economy;
    let leontief = Leontief::new(econ)?;
    let law = s.engine.condition(model, &s.signal, &s.observation)?;
    let classification = classify_defaults_single_shock(econ, &leontief, &law, o, eta_o)?;

    let mut eta = vec![0.0; econ.n()];
    eta[o] = eta_o;
    let expected = law.expected_exp_rho(&leontief);
    let shocks = NormalizedShocks::new(econ, &leontief, &expected, &eta)?;

    let rows: Vec<VerdictRow> = classification
        .sectors
        .iter()
        .enumerate()
        .map(|(k, v)| VerdictRow {
            sector: k + 1,
            theta: econ.leverage()[k],
            verdict: v.verdict,
            l_minus: v.l_minus,
            exposure: v.exposure,
            tau: shocks.tau[k],
            epsilon: shocks.epsilon[k],
            defaults: exact_default_predicate(&shocks.tau, &shocks.epsilon, k),
        })
        .collect();

    let rate = match model {
        ShockModel::SingleNodeExponential { rate, .. } => Some(*rate),
        _ => None,
    };
    let thresholds = Thresholds {
        shocked_sector: o + 1,
        eta: eta_o,
        t_bar: classification.t_bar,
        scan_limit: classification.scan_limit,
        no_default_exposure_bound: rate.filter(|_| eta_o < 0.0).map(|l| -2.0 / eta_o - l),
        certain_default_below: rate.map(|l| -2.0 / l),
        own_threshold: rate.filter(|_| leontief.get(o, o) == 1.0).map(|l| (l / (1.0 + l)).ln()),
        verdicts: classification.verdicts(),
    };

    let prov = provenance("defaults", Some(file), &spec);
    let dir = OutDir::create(out)?;
    let path = dir.path("defaults.csv");
    let mut text = prov.header().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut text);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(CliError::io(&path))?;
    }
    fs::write(&path, text).map_err(CliError::io(&path))?;
    dir.json("thresholds.json", &prov, &thresholds)?;

    println!("{:>6} {:>13} {:>8} {:>8} {:>9} {:>9} {:>8}", "sector", "verdict", "l_minus", "L_ko", "tau", "epsilon", "defaults");
    for r in &rows {
        let verdict = serde_json::to_value(r.verdict)?;
        println!(
            "{:>6} {:>13} {:>8.4} {:>8.4} {:>9.4} {:>9.4} {:>8}",
            r.sector,
            verdict.as_str().unwrap_or_default(),
            r.l_minus,
            r.exposure,
            r.tau,
            r.epsilon,
            r.defaults
        );
    }
    let contradicted = rows.iter().any(|r| match r.verdict {
        Verdict::Default => !r.defaults,
        Verdict::NoDefault | Verdict::Never => r.defaults,
        Verdict::Undetermined => false,
    });
    if contradicted {
        eprintln!("a verdict contradicts the realized profit sign");
        return Ok(Outcome::Fail);
    }
    Ok(Outcome::Pass)
}

/// Parses `start:stop:step` into an inclusive ascending grid.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let usage = || CliError::Usage(format!("--theta-grid expects start:stop:step, got `{s}`"));
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| usage())?;
    let [start, stop, step] = parts[..] else { return Err(usage()) };
    if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
        return Err(usage());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|i| start + step * i as f64).collect();
    if let Some(last) = grid.last_mut() {
        if (stop - *last).abs() < 1e-9 * step.max(1.0) {
            *last = stop;
        }
    }
    Ok(grid)
}

pub fn sweep(file: &Path, out: &Path, sector: usize, grid: &str) -> CliResult<Outcome> {
    let grid = parse_grid(grid)?;
    let doc = load(file)?;
    let spec = doc.engine_spec();
    let s = setup(file, &doc)?;
    warn(&s);
    let n = s.economy.n();
    if sector == 0 || sector > n {
        return Err(CliError::Usage(format!("--sector must lie in 1..={n}, got {sector}")));
    }
    let leontief = Leontief::new(&s.economy)?;
    let law = s.engine.condition(s.model()?, &s.signal, &s.observation)?;
    let report = leverage_comparative_statics(&s.economy, &leontief, &law, sector - 1, &grid)?;

    let mut rows = Vec::new();
    for p in &report.points {
        for k in 0..n {
            for (name, v) in [
                ("zeta", p.zeta[k]),
                ("xi", p.xi[k]),
                ("l", p.labor[k]),
                ("c", p.c0[k]),
                ("p/w", p.p_over_w[k]),
                ("p_rel", p.p_rel[k]),
            ] {
                rows.push(Row::new(p.theta, k + 1, name, v, 0.0));
            }
        }
    }
    let prov = provenance("sweep", Some(file), &spec);
    let dir = OutDir::create(out)?;
    dir.csv("sweep.csv", &prov, &rows)?;
    let mut json = serde_json::to_value(&report)?;
    json["sector"] = Value::from(sector);
    dir.json("report.json", &prov, &json)?;

    if report.passed() {
        println!("sector {sector}: all leverage monotonicity checks hold on {} grid points", grid.len());
        Ok(Outcome::Pass)
    } else {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        Ok(Outcome::Fail)
    }
}

pub fn reproduce_table(table: &str, out: &Path, draws: usize, seed: u64) -> CliResult<Outcome> {
    let id: TableId = table.parse().map_err(|_| {
        let known: Vec<&str> = TableId::ALL.iter().map(|t| t.label()).collect();
        CliError::Usage(format!("unknown table `{table}`, expected one of {}", known.join(", ")))
    })?;
    let result = reproduce(id, draws, seed)?;
    let mut prov = Provenance::new("reproduce", None, if id.is_simulated() { "monte_carlo" } else { "analytic_exponential" });
    if id.is_simulated() {
        prov.seed = Some(seed);
        prov.num_draws = Some(draws);
    }
    let dir = OutDir::create(out)?;
    let stem = format!("table_{}", id.label());
    let rows: Vec<Row> = result
        .cells
        .iter()
        .map(|c| Row::new(c.golden.theta.unwrap_or(1.0), c.golden.sector, c.golden.column, c.computed, c.std_err))
        .collect();
    dir.csv(&format!("{stem}.csv"), &prov, &rows)?;
    let rendered = result.render();
    dir.text(&format!("{stem}_diff.txt"), &prov, &rendered)?;
    dir.json(&format!("{stem}.json"), &prov, &result)?;
    print!("{rendered}");
    Ok(if result.passed() { Outcome::Pass } else { Outcome::Fail })
}

pub fn default_out() -> PathBuf {
    PathBuf::from("out")
}
