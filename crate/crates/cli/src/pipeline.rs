//! Runs the requested experiments and writes plot-ready CSV reports.

use std::path::{Path, PathBuf};

use vshare_core::aggregator::{
    profit_sweep, search_lnp_price, search_op_price, AggregatorModel, PriceSearchResult, ProfitPoint,
    SearchFlag,
};
use vshare_core::benchmark::{solve_benchmarks, BenchmarkPrices, BenchmarkResult};
use vshare_core::model::ScenarioSet;
use vshare_core::peak::{emit_peak_report, PeakReport};
use vshare_core::{Error, Result};

use crate::config::{Experiment, ExperimentConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: ProfitPoint,
    /// `None` when the price sits on a threshold.
    pub limiting_profit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub price_kind: &'static str,
    pub preset: &'static str,
    pub user: String,
    pub virtual_cost: f64,
    pub benchmark_cost: f64,
}

impl ComparisonRow {
    pub fn reduction_pct(&self) -> f64 {
        100.0 * (self.benchmark_cost - self.virtual_cost) / self.benchmark_cost
    }
}

#[derive(Debug, Default)]
pub struct ExperimentReport {
    pub users: Vec<String>,
    /// `(scenario, user, prices, capacities)`.
    pub thresholds: Vec<(String, String, Vec<f64>, Vec<f64>)>,
    pub sweep: Vec<SweepRow>,
    pub op: Option<PriceSearchResult>,
    pub lnp: Option<PriceSearchResult>,
    pub benchmarks: Vec<(&'static str, Vec<BenchmarkResult>)>,
    pub comparisons: Vec<ComparisonRow>,
    pub peaks: Vec<(&'static str, PeakReport)>,
}

/// Evenly spaced midpoints of `sweep_points` cells over the configured range.
pub fn sweep_prices(config: &ExperimentConfig, model: &AggregatorModel) -> Vec<f64> {
    let top = model.thresholds().last().copied().unwrap_or(0.0);
    let max = config.sweep_max.unwrap_or(1.05 * top.max(1e-6));
    let n = config.sweep_points;
    (0..n)
        .map(|k| config.sweep_min + (k as f64 + 0.5) / n as f64 * (max - config.sweep_min))
        .filter(|q| *q > 0.0)
        .collect()
}

pub fn run_pipeline(
    config: &ExperimentConfig,
    set: ScenarioSet,
    experiments: &[Experiment],
) -> Result<ExperimentReport> {
    config.validate()?;
    let tariff = config.tariff()?;
    let tech = config.tech()?;
    let wants = |e: Experiment| experiments.contains(&e);
    let mut report = ExperimentReport { users: set.users.clone(), ..Default::default() };

    if wants(Experiment::Benchmark) {
        for (preset, prices) in [
            ("production", BenchmarkPrices::production(&tech)),
            ("retailer", BenchmarkPrices::retailer(&tech, config.retail_markup)),
        ] {
            report.benchmarks.push((preset, solve_benchmarks(&set, &tariff, &tech, prices)?));
        }
    }
    let needs_model = experiments.iter().any(|e| *e != Experiment::Benchmark);
    if !needs_model {
        return Ok(report);
    }
    let model = AggregatorModel::new(set, tariff, tech)?;

    if wants(Experiment::Thresholds) {
        for p in model.profiles.iter().flatten() {
            report.thresholds.push((p.scenario.clone(), p.user.clone(), p.prices.clone(), p.capacities.clone()));
        }
    }
    if wants(Experiment::Sweep) {
        let prices = sweep_prices(config, &model);
        let points = profit_sweep(&model, &prices, config.sweep_epsilon)?;
        for point in points {
            let limiting_profit = match model.limiting_profit(point.price) {
                Ok(p) => Some(p.profit),
                Err(Error::AmbiguousPrice { .. }) => None,
                Err(e) => return Err(e),
            };
            report.sweep.push(SweepRow { point, limiting_profit });
        }
    }
    let peak_needs_search = wants(Experiment::PeakReport) && config.peak_price.is_none();
    if wants(Experiment::OpPrice) || peak_needs_search {
        report.op = Some(search_op_price(&model, config.err1, config.err2, config.eps0)?);
    }
    if wants(Experiment::LnpPrice) || peak_needs_search {
        report.lnp = Some(search_lnp_price(&model, config.err3, config.err4, config.eps0)?);
    }
    for (kind, search) in [("lnp", &report.lnp), ("op", &report.op)] {
        let Some(search) = search else { continue };
        for (preset, results) in &report.benchmarks {
            for (i, b) in results.iter().enumerate() {
                report.comparisons.push(ComparisonRow {
                    price_kind: kind,
                    preset,
                    user: b.user.clone(),
                    virtual_cost: search.user_costs[i],
                    benchmark_cost: b.cost,
                });
            }
        }
    }
    if wants(Experiment::PeakReport) {
        match config.peak_price {
            Some(q) => report.peaks.push(("configured", emit_peak_report(&model, q)?)),
            None => {
                for (kind, search) in [("lnp", &report.lnp), ("op", &report.op)] {
                    if let Some(s) = search.as_ref().filter(|s| s.price > 0.0) {
                        report.peaks.push((kind, emit_peak_report(&model, s.price)?));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Formats with 9 significant digits.
pub fn fmt9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" { "0".into() } else { s }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn writer(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<csv::Writer<std::fs::File>> {
    let path = dir.join(name);
    written.push(path.clone());
    csv::Writer::from_path(&path).map_err(csv_err)
}

fn flags(s: &PriceSearchResult) -> String {
    s.flags
        .iter()
        .map(|f| match f {
            SearchFlag::NoSales => "no-sales",
            SearchFlag::NonPositiveProfit => "non-positive-profit",
            SearchFlag::Clamped => "clamped",
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes one CSV per populated section; returns the files written.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let user_cols: Vec<String> = report.users.iter().map(|u| format!("cost_{u}")).collect();

    if !report.thresholds.is_empty() {
        let mut w = writer(dir, "thresholds.csv", &mut written)?;
        w.write_record(["scenario_id", "user_id", "k", "price", "capacity_kwh"]).map_err(csv_err)?;
        for (scenario, user, prices, caps) in &report.thresholds {
            for (k, (q, x)) in prices.iter().zip(caps).enumerate() {
                w.write_record([scenario.clone(), user.clone(), k.to_string(), fmt9(*q), fmt9(*x)])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
    }
    if !report.sweep.is_empty() {
        let mut w = writer(dir, "sweep.csv", &mut written)?;
        let mut header: Vec<String> = [
            "price", "penalty", "sold_kwh", "physical_kwh", "power_kw", "revenue", "cost", "profit",
            "limiting_profit",
        ]
        .map(String::from)
        .to_vec();
        header.extend(user_cols.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for row in &report.sweep {
            let p = &row.point;
            let mut rec = vec![
                fmt9(p.price),
                p.penalty.map(fmt9).unwrap_or_default(),
                fmt9(p.sold),
                fmt9(p.capacity),
                fmt9(p.power),
                fmt9(p.revenue),
                fmt9(p.cost),
                fmt9(p.profit),
                row.limiting_profit.map(fmt9).unwrap_or_default(),
            ];
            rec.extend(p.user_costs.iter().map(|c| fmt9(*c)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
    }
    let searches: Vec<(&str, &PriceSearchResult)> =
        [("lnp", report.lnp.as_ref()), ("op", report.op.as_ref())].into_iter().filter_map(|(k, s)| s.map(|s| (k, s))).collect();
    if !searches.is_empty() {
        let mut w = writer(dir, "search.csv", &mut written)?;
        let mut header: Vec<String> = [
            "kind", "price", "penalty", "case", "flags", "sold_kwh", "physical_kwh", "power_kw",
            "capacity_reduction_pct", "revenue", "cost", "profit", "limiting_profit",
        ]
        .map(String::from)
        .to_vec();
        header.extend(user_cols.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (kind, s) in &searches {
            let reduction = if s.sold > 0.0 { 100.0 * (s.sold - s.capacity) / s.sold } else { 0.0 };
            let mut rec = vec![
                kind.to_string(),
                fmt9(s.price),
                fmt9(s.penalty),
                s.case.map(|c| c.number().to_string()).unwrap_or_default(),
                flags(s),
                fmt9(s.sold),
                fmt9(s.capacity),
                fmt9(s.power),
                fmt9(reduction),
                fmt9(s.revenue),
                fmt9(s.cost),
                fmt9(s.profit),
                fmt9(s.limiting_profit),
            ];
            rec.extend(s.user_costs.iter().map(|c| fmt9(*c)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        let mut w = writer(dir, "search_trace.csv", &mut written)?;
        w.write_record(["kind", "step", "penalty", "profit", "limiting_profit"]).map_err(csv_err)?;
        for (kind, s) in &searches {
            for (k, t) in s.trace.iter().enumerate() {
                w.write_record([
                    kind.to_string(),
                    (k + 1).to_string(),
                    fmt9(t.penalty),
                    fmt9(t.profit),
                    fmt9(t.limiting_profit),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
    }
    if !report.benchmarks.is_empty() {
        let mut w = writer(dir, "benchmark.csv", &mut written)?;
        w.write_record([
            "preset", "user_id", "capacity_kwh", "power_kw", "capital_cost", "operation_cost", "bill", "cost",
        ])
        .map_err(csv_err)?;
        for (preset, results) in &report.benchmarks {
            for b in results {
                w.write_record([
                    preset.to_string(),
                    b.user.clone(),
                    fmt9(b.capacity),
                    fmt9(b.power),
                    fmt9(b.capital_cost),
                    fmt9(b.operation_cost),
                    fmt9(b.bill),
                    fmt9(b.cost),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
    }
    if !report.comparisons.is_empty() {
        let mut w = writer(dir, "comparison.csv", &mut written)?;
        w.write_record(["price_kind", "preset", "user_id", "virtual_cost", "benchmark_cost", "reduction_pct"])
            .map_err(csv_err)?;
        for c in &report.comparisons {
            w.write_record([
                c.price_kind.to_string(),
                c.preset.to_string(),
                c.user.clone(),
                fmt9(c.virtual_cost),
                fmt9(c.benchmark_cost),
                fmt9(c.reduction_pct()),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    if !report.peaks.is_empty() {
        let mut slots = writer(dir, "peak_slots.csv", &mut written)?;
        slots
            .write_record(["price_kind", "price", "scenario_id", "slot", "original_kw", "after_kw"])
            .map_err(csv_err)?;
        let mut users = writer(dir, "peak_users.csv", &mut written)?;
        users
            .write_record(["price_kind", "price", "scenario_id", "user_id", "original_peak_kw", "after_peak_kw"])
            .map_err(csv_err)?;
        let mut summary = writer(dir, "peak_summary.csv", &mut written)?;
        summary
            .write_record([
                "price_kind", "price", "scenario_id", "probability", "system_original_kw", "system_after_kw",
                "demand_original_kw", "demand_after_kw", "system_reduction_pct", "demand_reduction_pct",
            ])
            .map_err(csv_err)?;
        for (kind, r) in &report.peaks {
            for s in &r.slots {
                slots
                    .write_record([
                        kind.to_string(),
                        fmt9(r.price),
                        s.scenario.clone(),
                        s.slot.to_string(),
                        fmt9(s.original),
                        fmt9(s.after),
                    ])
                    .map_err(csv_err)?;
            }
            for u in &r.users {
                users
                    .write_record([
                        kind.to_string(),
                        fmt9(r.price),
                        u.scenario.clone(),
                        u.user.clone(),
                        fmt9(u.original),
                        fmt9(u.after),
                    ])
                    .map_err(csv_err)?;
            }
            for s in &r.scenarios {
                let pct = |o: f64, a: f64| if o != 0.0 { 100.0 * (o - a) / o } else { 0.0 };
                summary
                    .write_record([
                        kind.to_string(),
                        fmt9(r.price),
                        s.scenario.clone(),
                        fmt9(s.probability),
                        fmt9(s.system_original),
                        fmt9(s.system_after),
                        fmt9(s.demand_original),
                        fmt9(s.demand_after),
                        fmt9(pct(s.system_original, s.system_after)),
                        fmt9(pct(s.demand_original, s.demand_after)),
                    ])
                    .map_err(csv_err)?;
            }
            summary
                .write_record([
                    kind.to_string(),
                    fmt9(r.price),
                    "expected".to_string(),
                    "1".to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    fmt9(r.system_peak_reduction_pct),
                    fmt9(r.demand_peak_reduction_pct),
                ])
                .map_err(csv_err)?;
        }
        slots.flush()?;
        users.flush()?;
        summary.flush()?;
    }
    Ok(written)
}
