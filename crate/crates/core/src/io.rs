//! Scenario CSV: `scenario_id,probability,user_id,slot_index,load_kw,renewable_kw`,
//! one row per (scenario, user, slot) with slots numbered from 1.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Scenario, ScenarioSet, TimeGrid};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    scenario_id: String,
    probability: f64,
    user_id: String,
    slot_index: usize,
    load_kw: f64,
    renewable_kw: f64,
}

pub fn load_scenarios(path: impl AsRef<Path>, slot_hours: f64) -> Result<ScenarioSet> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_scenarios(file, slot_hours)
}

pub fn read_scenarios(reader: impl Read, slot_hours: f64) -> Result<ScenarioSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut scenario_ids: Vec<String> = Vec::new();
    let mut probability: Vec<f64> = Vec::new();
    let mut users: Vec<String> = Vec::new();
    // (scenario, user) -> slot -> (load, renewable)
    let mut cells: HashMap<(usize, usize), Vec<Option<(f64, f64)>>> = HashMap::new();
    let mut rows = 0;
    for record in rdr.deserialize::<Row>() {
        let line = rows + 2;
        let row = record.map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        rows += 1;
        if row.slot_index == 0 {
            return Err(Error::Parse { line, message: "slot_index starts at 1".into() });
        }
        let w = match scenario_ids.iter().position(|s| *s == row.scenario_id) {
            Some(w) => {
                if probability[w] != row.probability {
                    return Err(Error::Parse {
                        line,
                        message: format!("inconsistent probability for scenario {}", row.scenario_id),
                    });
                }
                w
            }
            None => {
                scenario_ids.push(row.scenario_id.clone());
                probability.push(row.probability);
                scenario_ids.len() - 1
            }
        };
        let i = match users.iter().position(|u| *u == row.user_id) {
            Some(i) => i,
            None => {
                users.push(row.user_id.clone());
                users.len() - 1
            }
        };
        let slots = cells.entry((w, i)).or_default();
        if slots.len() < row.slot_index {
            slots.resize(row.slot_index, None);
        }
        if slots[row.slot_index - 1].replace((row.load_kw, row.renewable_kw)).is_some() {
            return Err(Error::Parse { line, message: format!("duplicate slot {}", row.slot_index) });
        }
    }
    if rows == 0 {
        return Err(Error::Parse { line: 1, message: "no scenario rows".into() });
    }
    let t_len = cells.values().map(Vec::len).max().unwrap_or(0);
    let mut scenarios = Vec::with_capacity(scenario_ids.len());
    for (w, id) in scenario_ids.iter().enumerate() {
        let mut load = Vec::with_capacity(users.len());
        let mut renewable = Vec::with_capacity(users.len());
        for (i, user) in users.iter().enumerate() {
            let series = cells
                .get(&(w, i))
                .ok_or_else(|| Error::Validation(format!("scenario {id} has no rows for user {user}")))?;
            if series.len() != t_len || series.iter().any(Option::is_none) {
                return Err(Error::Validation(format!(
                    "scenario {id} user {user} does not cover slots 1..{t_len}"
                )));
            }
            let (l, r): (Vec<f64>, Vec<f64>) = series.iter().map(|c| c.expect("checked")).unzip();
            load.push(l);
            renewable.push(r);
        }
        scenarios.push(Scenario { id: id.clone(), probability: probability[w], load, renewable });
    }
    ScenarioSet::new(TimeGrid::new(t_len, slot_hours)?, users, scenarios)
}

pub fn write_scenarios(writer: impl Write, set: &ScenarioSet) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in &set.scenarios {
        for (i, user) in set.users.iter().enumerate() {
            for t in 0..set.time.slots {
                wtr.serialize(Row {
                    scenario_id: s.id.clone(),
                    probability: s.probability,
                    user_id: user.clone(),
                    slot_index: t + 1,
                    load_kw: s.load[i][t],
                    renewable_kw: s.renewable[i][t],
                })
                .map_err(|e| Error::Io(e.to_string()))?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
