use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use copula_indep::{pseudo_sample, CopulaSamplerSpec, RngSeed, TiePolicy};
use copula_indep_cli::data::{Preprocess, Table};
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copula-indep")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(r.iter().map(|x| x.to_string())).unwrap();
    }
    w.flush().unwrap();
}

fn spec_rows(spec: &str, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let raw = spec.parse::<CopulaSamplerSpec>().unwrap().sample(n, RngSeed::new(seed, 0)).unwrap();
    (0..n).map(|i| raw.row(i).to_vec()).collect()
}

#[test]
fn price_returns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    fs::write(&path, "a,b\n100,1\n110,2\n99,4\n").unwrap();
    let table = Table::read(&path, true).unwrap();
    let raw = table.extract(&[0, 1], Preprocess::Returns).unwrap();
    let a: Vec<f64> = raw.column(0).collect();
    assert_eq!(raw.n(), 2);
    assert!((a[0] - 0.10).abs() < 1e-15 && (a[1] + 0.10).abs() < 1e-15);
}

#[test]
fn csv_roundtrip_preserves_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    let raw = "t:d=3,rho=0.4,nu=4".parse::<CopulaSamplerSpec>().unwrap().sample(120, RngSeed::new(3, 1)).unwrap();
    let rows: Vec<Vec<f64>> = (0..raw.n()).map(|i| raw.row(i).to_vec()).collect();
    write_csv(&path, &["x", "y", "z"], &rows);
    let table = Table::read(&path, true).unwrap();
    let back = table.extract(&table.select(&[]).unwrap(), Preprocess::None).unwrap();
    assert_eq!(back, raw);
    assert_eq!(
        pseudo_sample(&back, TiePolicy::Error).unwrap(),
        pseudo_sample(&raw, TiePolicy::Error).unwrap()
    );
}

#[test]
fn data_diagnostics_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    fs::write(p("bad.csv"), "a,b\n1,2\n2,x\n").unwrap();
    let o = bin(&["test", &p("bad.csv")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3, column `b`"), "{}", stderr(&o));

    fs::write(p("ok.csv"), "alpha,beta,gamma\n1,2,3\n").unwrap();
    let o = bin(&["test", &p("ok.csv"), "--columns", "alpha,delta"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha, beta, gamma"), "{}", stderr(&o));

    let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![f64::from(i), f64::from(i % 3)]).collect();
    write_csv(&dir.path().join("ties.csv"), &["u", "v"], &rows);
    let o = bin(&["test", &p("ties.csv"), "--null-sims", "200"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("`v`"), "{}", stderr(&o));
    let o = bin(&["test", &p("ties.csv"), "--null-sims", "200", "--tie-policy", "random"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    write_csv(&dir.path().join("odd.csv"), &["u", "v"], &spec_rows("indep:d=2", 35, 1));
    let o = bin(&["test", &p("odd.csv"), "--null-sims", "200"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("--truncate"));
    let doc = json(&bin(&["test", &p("odd.csv"), "--null-sims", "200", "--truncate"]));
    assert_eq!(doc["provenance"]["data"]["dropped"], 5);
    assert_eq!(doc["result"]["n"], 30);

    let o = bin(&["test", &p("odd.csv"), "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["null-table", "--d", "2", "--n", "36", "--null-sims", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn decisions_do_not_change_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let rows: Vec<Vec<f64>> = (0..36).map(|i| vec![f64::from(i), f64::from(i)]).collect();
    write_csv(&path, &["x", "y"], &rows);
    let doc = json(&bin(&["test", path.to_str().unwrap(), "--null-sims", "500", "--stat", "kl"]));
    let levels = doc["result"]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 3);
    assert!(levels.iter().all(|l| l["reject"] == true));
}

#[test]
fn null_table_cache_behaviour() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let args = ["null-table", "--stat", "sup", "--d", "2", "--n", "36", "--null-sims", "2000", "--cache-dir", cache.to_str().unwrap()];
    let first = bin(&args);
    let second = bin(&args);
    assert!(stderr(&second).contains("served from cache"));
    assert_eq!(first.stdout, second.stdout);
    let doc = json(&first);
    assert!(doc["notes"][0].as_str().unwrap().contains("heavily discretized"));

    let file = fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    fs::write(&file, "corrupted").unwrap();
    let third = bin(&args);
    assert!(stderr(&third).contains("warning"), "{}", stderr(&third));
    assert_eq!(third.stdout, first.stdout);
}

#[test]
fn screen_reports_nine_tests() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("five.csv");
    let triple = spec_rows("clayton:theta=3,d=3", 600, 1);
    let pair = spec_rows("gumbel:theta=2", 600, 2);
    let rows: Vec<Vec<f64>> = triple.iter().zip(&pair).map(|(a, b)| [a.clone(), b.clone()].concat()).collect();
    write_csv(&data, &["X1", "X2", "X3", "X4", "X5"], &rows);
    let hyp = dir.path().join("h.toml");
    fs::write(&hyp, "groups = [[\"X1\", \"X2\", \"X3\"], [\"X4\", 5]]\n").unwrap();
    let args = ["screen", data.to_str().unwrap(), "--hypothesis", hyp.to_str().unwrap(), "--null-sims", "1000"];
    let doc = json(&bin(&args));
    let result = &doc["result"];
    assert_eq!(result["test_count"], 9);
    let pairs = result["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 9);
    let consistent = pairs.iter().all(|p| p["as_expected"] == true);
    assert_eq!(result["verdict"] == "consistent", consistent);
    let cross: Vec<(String, String)> = pairs
        .iter()
        .filter(|p| p["role"] == "cross")
        .map(|p| (p["a"].as_str().unwrap().to_string(), p["b"].as_str().unwrap().to_string()))
        .collect();
    assert_eq!(cross.len(), 6);
    assert!(cross.contains(&("X3".to_string(), "X5".to_string())));

    let csv_out = bin(&[&args[..], &["--format", "csv"]].concat());
    assert_eq!(stdout(&csv_out).lines().count(), 10);

    fs::write(&hyp, "groups = [[\"X1\", \"X2\"], [\"X2\", \"X3\"]]\n").unwrap();
    assert_eq!(bin(&args).status.code(), Some(2));
    fs::write(&hyp, "groups = [[\"X1\", \"X2\"]]\n").unwrap();
    assert_eq!(bin(&args).status.code(), Some(2));
}

fn power_rows(args: &[&str]) -> Vec<csv::StringRecord> {
    let o = bin(args);
    assert!(o.status.success(), "{}", stderr(&o));
    csv::Reader::from_reader(o.stdout.as_slice()).records().map(Result::unwrap).collect()
}

#[test]
fn power_grid_is_long_format() {
    let rows = power_rows(&[
        "power", "--spec", "indep:d=2", "--spec", "fm:p=0.5", "--stat", "hellinger,kl", "--n", "36", "--null-sims", "2000",
        "--alt-sims", "400", "--format", "csv",
    ]);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let (power, se): (f64, f64) = (r[5].parse().unwrap(), r[6].parse().unwrap());
        if &r[0] == "indep" {
            let se0 = (0.05f64 * 0.95 / 400.0).sqrt();
            assert!((power - 0.05).abs() <= 3.0 * se0, "{r:?}");
        } else {
            assert!(power >= 0.9, "{r:?}");
        }
        assert!((se - (power * (1.0 - power) / 400.0).sqrt()).abs() < 1e-15);
    }
}

#[test]
fn hellinger_and_kl_dominate_tv_on_frechet_mardia() {
    let mut args = vec!["power"];
    let specs: Vec<String> = (1..=9).map(|k| format!("fm:p=0.{k}")).collect();
    for s in &specs {
        args.extend(["--spec", s.as_str()]);
    }
    args.extend(["--stat", "tv,hellinger,kl", "--n", "36", "--null-sims", "5000", "--alt-sims", "500", "--format", "csv"]);
    let rows = power_rows(&args);
    let power = |spec: &str, kind: &str| -> f64 {
        rows.iter().find(|r| &r[1] == spec && &r[2] == kind).unwrap()[5].parse().unwrap()
    };
    let dominated = (1..=9)
        .filter(|k| {
            let s = format!("p=0.{k}");
            power(&s, "hellinger") >= power(&s, "tv") && power(&s, "kl") >= power(&s, "tv")
        })
        .count();
    assert!(dominated >= 5, "dominance at {dominated} of 9 values");
}

#[test]
fn gumbel_power_grows_with_n() {
    let rows = power_rows(&[
        "power", "--spec", "gumbel:theta=1.25,d=3", "--stat", "hellinger", "--n", "60,120,216", "--null-sims", "2000",
        "--alt-sims", "500", "--format", "csv",
    ]);
    let est: Vec<(f64, f64)> = rows.iter().map(|r| (r[5].parse().unwrap(), r[6].parse().unwrap())).collect();
    for w in est.windows(2) {
        assert!(w[1].0 + 2.0 * w[1].1 >= w[0].0 - 2.0 * w[0].1, "{est:?}");
    }
}
