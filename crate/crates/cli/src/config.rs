//! Flat `key = value` experiment configuration. Blank lines and `#` comments
//! are ignored; unknown keys are rejected.

use std::path::{Path, PathBuf};

use vshare_core::benchmark::RETAIL_MARKUP;
use vshare_core::model::{capital_recovery_factor, daily_peak_price_uniform, StorageTech, Tariff};
use vshare_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Thresholds,
    Sweep,
    OpPrice,
    LnpPrice,
    Benchmark,
    PeakReport,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Thresholds,
        Experiment::Sweep,
        Experiment::OpPrice,
        Experiment::LnpPrice,
        Experiment::Benchmark,
        Experiment::PeakReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Thresholds => "thresholds",
            Experiment::Sweep => "sweep",
            Experiment::OpPrice => "op-price",
            Experiment::LnpPrice => "lnp-price",
            Experiment::Benchmark => "benchmark",
            Experiment::PeakReport => "peak-report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenarios: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub slot_hours: f64,
    pub tariff: Tariff,
    /// Used instead of `pi_p` when set: monthly price spread over `peak_days`.
    pub monthly_peak_price: Option<f64>,
    pub peak_days: usize,
    pub eta_c: f64,
    pub eta_d: f64,
    pub eta_a_c: f64,
    pub eta_a_d: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub c_x: f64,
    pub c_p: f64,
    pub c_s: f64,
    pub c_a_c: f64,
    pub c_a_d: f64,
    pub interest_rate: f64,
    pub years: f64,
    pub days_per_year: f64,
    pub err1: f64,
    pub err2: f64,
    pub err3: f64,
    pub err4: f64,
    pub eps0: f64,
    pub experiments: Vec<Experiment>,
    pub sweep_points: usize,
    pub sweep_min: f64,
    /// `None`: 1.05 × the largest threshold price.
    pub sweep_max: Option<f64>,
    pub sweep_epsilon: f64,
    pub retail_markup: f64,
    /// `None`: report at the searched prices.
    pub peak_price: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let tariff = Tariff::default();
        let tech = StorageTech::default();
        Self {
            scenarios: None,
            out_dir: PathBuf::from("out"),
            slot_hours: 1.0,
            tariff,
            monthly_peak_price: None,
            peak_days: 30,
            eta_c: tech.user_charge_eff,
            eta_d: tech.user_discharge_eff,
            eta_a_c: tech.agg_charge_eff,
            eta_a_d: tech.agg_discharge_eff,
            gamma_min: tech.gamma_min,
            gamma_max: tech.gamma_max,
            c_x: tech.capacity_cost,
            c_p: tech.power_cost,
            c_s: tech.operation_cost,
            c_a_c: tech.extra_charge_cost,
            c_a_d: tech.extra_discharge_cost,
            interest_rate: 0.05,
            years: 15.0,
            days_per_year: 365.0,
            err1: 1e-3,
            err2: 1e-3,
            err3: 1e-4,
            err4: 1e-4,
            eps0: 3e-7,
            experiments: Experiment::ALL.to_vec(),
            sweep_points: 100,
            sweep_min: 0.0,
            sweep_max: None,
            sweep_epsilon: 1e-7,
            retail_markup: RETAIL_MARKUP,
            peak_price: None,
        }
    }
}

fn number(key: &str, value: &str, line: usize) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse { line, message: format!("{key}: '{value}' is not a number") })
}

fn count(key: &str, value: &str, line: usize) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::Parse { line, message: format!("{key}: '{value}' is not a count") })
}

impl ExperimentConfig {
    /// Parses config text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse { line, message: format!("expected key = value, got '{content}'") })?;
            let num = || number(key, value, line);
            match key {
                "scenarios" => c.scenarios = Some(base.join(value)),
                "out_dir" => c.out_dir = base.join(value),
                "slot_hours" => c.slot_hours = num()?,
                "pi_b" => c.tariff.energy_price = num()?,
                "pi_p" => c.tariff.peak_price = num()?,
                "pi_s" => c.tariff.feed_in_price = num()?,
                "monthly_peak_price" => c.monthly_peak_price = Some(num()?),
                "peak_days" => c.peak_days = count(key, value, line)?,
                "eta_c" => c.eta_c = num()?,
                "eta_d" => c.eta_d = num()?,
                "eta_a_c" => c.eta_a_c = num()?,
                "eta_a_d" => c.eta_a_d = num()?,
                "gamma_min" => c.gamma_min = num()?,
                "gamma_max" => c.gamma_max = num()?,
                "c_x" => c.c_x = num()?,
                "c_p" => c.c_p = num()?,
                "c_s" => c.c_s = num()?,
                "c_a_c" => c.c_a_c = num()?,
                "c_a_d" => c.c_a_d = num()?,
                "interest_rate" => c.interest_rate = num()?,
                "years" => c.years = num()?,
                "days_per_year" => c.days_per_year = num()?,
                "err1" => c.err1 = num()?,
                "err2" => c.err2 = num()?,
                "err3" => c.err3 = num()?,
                "err4" => c.err4 = num()?,
                "eps0" => c.eps0 = num()?,
                "experiments" => {
                    c.experiments = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            Experiment::parse(s).ok_or_else(|| Error::Parse {
                                line,
                                message: format!("unknown experiment '{s}'"),
                            })
                        })
                        .collect::<Result<_>>()?;
                }
                "sweep_points" => c.sweep_points = count(key, value, line)?,
                "sweep_min" => c.sweep_min = num()?,
                "sweep_max" => c.sweep_max = Some(num()?),
                "sweep_epsilon" => c.sweep_epsilon = num()?,
                "retail_markup" => c.retail_markup = num()?,
                "peak_price" => c.peak_price = Some(num()?),
                _ => return Err(Error::Parse { line, message: format!("unknown key '{key}'") }),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Checks tolerances and parameters before any solve.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("slot_hours", self.slot_hours),
            ("err1", self.err1),
            ("err2", self.err2),
            ("err3", self.err3),
            ("err4", self.err4),
            ("eps0", self.eps0),
            ("sweep_epsilon", self.sweep_epsilon),
            ("retail_markup", self.retail_markup),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if self.err1 >= 1.0 || self.err2 >= 1.0 {
            return Err(Error::Validation("err1 and err2 are relative and must be below 1".into()));
        }
        if self.sweep_points == 0 {
            return Err(Error::Validation("sweep_points must be at least 1".into()));
        }
        if let Some(max) = self.sweep_max {
            if !(max > self.sweep_min) {
                return Err(Error::Validation("sweep_max must exceed sweep_min".into()));
            }
        }
        if self.sweep_min < 0.0 {
            return Err(Error::Validation("sweep_min must be nonnegative".into()));
        }
        if let Some(q) = self.peak_price {
            if !(q > 0.0) {
                return Err(Error::Validation("peak_price must be positive".into()));
            }
        }
        if let Some(path) = &self.scenarios {
            if !path.is_file() {
                return Err(Error::Validation(format!("scenario file {} does not exist", path.display())));
            }
        }
        self.tariff()?.validate().map_err(|e| Error::Validation(e.to_string()))?;
        self.tech()?.validate().map_err(|e| Error::Validation(e.to_string()))?;
        Ok(())
    }

    pub fn tariff(&self) -> Result<Tariff> {
        let mut t = self.tariff;
        if let Some(monthly) = self.monthly_peak_price {
            t.peak_price = daily_peak_price_uniform(monthly, self.peak_days)?;
        }
        Ok(t)
    }

    pub fn kappa(&self) -> Result<f64> {
        capital_recovery_factor(self.interest_rate, self.years, self.days_per_year)
            .map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn tech(&self) -> Result<StorageTech> {
        Ok(StorageTech {
            user_charge_eff: self.eta_c,
            user_discharge_eff: self.eta_d,
            agg_charge_eff: self.eta_a_c,
            agg_discharge_eff: self.eta_a_d,
            gamma_min: self.gamma_min,
            gamma_max: self.gamma_max,
            capacity_cost: self.c_x,
            power_cost: self.c_p,
            operation_cost: self.c_s,
            extra_charge_cost: self.c_a_c,
            extra_discharge_cost: self.c_a_d,
            kappa: self.kappa()?,
        })
    }
}
