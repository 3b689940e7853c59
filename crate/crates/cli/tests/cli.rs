use std::path::{Path, PathBuf};
use std::process::Command;

fn vshare() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vshare"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vshare-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny2_csv(dir: &Path) -> PathBuf {
    let path = dir.join("tiny2.csv");
    std::fs::write(
        &path,
        "scenario_id,probability,user_id,slot_index,load_kw,renewable_kw\n\
         s1,1,A,1,2,0\ns1,1,A,2,0,0\ns1,1,B,1,0,0\ns1,1,B,2,2,0\n",
    )
    .unwrap();
    path
}

fn lossless_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("tiny.conf");
    std::fs::write(
        &path,
        format!(
            "scenarios = tiny2.csv\nout_dir = out\neta_c = 1\neta_d = 1\neta_a_c = 1\neta_a_d = 1\n\
             gamma_min = 0\nc_x = 0.1\nc_p = 0.05\ninterest_rate = 0\nyears = 1\ndays_per_year = 1\n{extra}"
        ),
    )
    .unwrap();
    path
}

#[test]
fn tiny2_sweep_csv() {
    let dir = scratch("sweep");
    tiny2_csv(&dir);
    let conf = lossless_config(&dir, "sweep_points = 10\nsweep_max = 0.5\n");
    let out = vshare().arg("--config").arg(&conf).arg("sweep").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.join("out/sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "price,penalty,sold_kwh,physical_kwh,power_kw,revenue,cost,profit,limiting_profit,cost_A,cost_B"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        let (q, sold, limiting) = (r[0], r[2], r[8]);
        if q < 0.4 {
            assert!((sold - 2.0).abs() < 1e-5);
            assert!((limiting - 2.0 * q).abs() < 1e-7);
        } else {
            assert!(sold.abs() < 1e-9);
            assert_eq!(limiting, 0.0);
        }
    }
}

#[test]
fn zero_tolerance_exits_with_validation_code() {
    let dir = scratch("err1");
    tiny2_csv(&dir);
    let conf = lossless_config(&dir, "err1 = 0\n");
    let out = vshare().arg("--config").arg(&conf).arg("op-price").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "validation");
    assert!(!dir.join("out").exists());
}

#[test]
fn missing_scenario_file_exits_with_validation_code() {
    let dir = scratch("missing");
    let out = vshare().arg("--scenarios").arg(dir.join("nope.csv")).arg("--out").arg(&dir).arg("thresholds").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn no_viable_price_exit_code() {
    // a single user whose storage needs always cost more than it pays
    let dir = scratch("noviable");
    let csv = dir.join("one.csv");
    std::fs::write(
        &csv,
        "scenario_id,probability,user_id,slot_index,load_kw,renewable_kw\ns1,1,A,1,2,0\ns1,1,A,2,0,0\n",
    )
    .unwrap();
    let conf = dir.join("dear.conf");
    std::fs::write(
        &conf,
        "scenarios = one.csv\nout_dir = out\neta_c = 1\neta_d = 1\neta_a_c = 1\neta_a_d = 1\ngamma_min = 0\n\
         c_x = 1\nc_p = 1\nc_a_d = 1\ninterest_rate = 0\nyears = 1\ndays_per_year = 1\n",
    )
    .unwrap();
    let out = vshare().arg("--config").arg(&conf).arg("lnp-price").output().unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn benchmark_only_writes_benchmark_csv() {
    let dir = scratch("bench");
    tiny2_csv(&dir);
    let conf = lossless_config(&dir, "");
    let out = vshare().arg("--config").arg(&conf).arg("benchmark").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<String> = std::fs::read_dir(dir.join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["benchmark.csv"]);
    let text = std::fs::read_to_string(dir.join("out/benchmark.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}

#[test]
fn runs_are_byte_identical() {
    let dir = scratch("determinism");
    tiny2_csv(&dir);
    let conf = lossless_config(&dir, "sweep_points = 7\n");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.join(run);
        let out = vshare().arg("--config").arg(&conf).arg("--out").arg(&out_dir).arg("run").output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0].len(), 9);
    assert_eq!(outputs[0], outputs[1]);
}
