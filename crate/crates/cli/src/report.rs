use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde_json::Value;
use streetsim::benchmark::{aggregate_vln, DetectionReport, VlnRecord, VlnReport};

use crate::config::Task;
use crate::failure::{CliResult, WithCode, IO};
use crate::tasks::{pool_detection, SweepRecord, VqaRecord};

fn read_records<T: DeserializeOwned>(dir: &Path) -> anyhow::Result<Vec<T>> {
    let path = dir.join("records.jsonl");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.6}"))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `run.json` and `records.jsonl` from `dir` and writes the task's
/// CSV tables into `out`. Returns the file names written.
pub fn report(dir: &Path, out: &Path) -> CliResult<Vec<String>> {
    let run_path = dir.join("run.json");
    let run: Value = fs::read(&run_path)
        .with_context(|| format!("reading {}", run_path.display()))
        .and_then(|b| serde_json::from_slice(&b).context("run.json is not valid JSON"))
        .code(IO)?;
    let task: Task = serde_json::from_value(run["task"].clone())
        .context("run.json has no valid task")
        .code(IO)?;
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .code(IO)?;
    let written = match task {
        Task::DetectBench => detection_tables(dir, out),
        Task::Vln => vln_table(dir, out),
        Task::VqaBench => vqa_table(dir, out),
        Task::RegionSweep => sweep_table(dir, out),
        Task::RouteOptimize => route_table(dir, out),
        Task::Clean => cleaning_table(dir, out),
    }
    .code(IO)?;
    Ok(written)
}

fn detection_tables(dir: &Path, out: &Path) -> anyhow::Result<Vec<String>> {
    let reports: Vec<DetectionReport> = read_records(dir)?;
    let pooled = pool_detection(&reports);
    let mut rows = Vec::new();
    for r in reports.iter().chain(std::iter::once(&pooled)) {
        for (c, v) in &r.per_category {
            if v.recall.is_some() {
                rows.push(vec![
                    r.region.clone(),
                    c.clone(),
                    v.n_tp.to_string(),
                    v.n_fn.to_string(),
                    cell(v.recall),
                ]);
            }
        }
        rows.push(vec![r.region.clone(), "AR".into(), String::new(), String::new(), cell(r.ar)]);
    }
    let empty: Vec<&str> = pooled
        .per_category
        .iter()
        .filter(|(_, v)| v.recall.is_none())
        .map(|(c, _)| c.as_str())
        .collect();
    if !empty.is_empty() {
        rows.push(vec![
            "note".into(),
            format!("no ground truth, excluded from AR: {}", empty.join(" ")),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    write_csv(&out.join("recall.csv"), &["region", "category", "n_tp", "n_fn", "recall"], &rows)?;
    Ok(vec!["recall.csv".into()])
}

fn vln_row(name: &str, r: &VlnReport) -> Vec<String> {
    vec![
        name.to_string(),
        r.routes.to_string(),
        format!("{:.6}", r.success),
        cell(r.start_reac),
        cell(r.intersection_arr),
        cell(r.intersection_reac),
        cell(r.stop_arr),
        cell(r.stop_reac),
    ]
}

fn vln_table(dir: &Path, out: &Path) -> anyhow::Result<Vec<String>> {
    let records: Vec<VlnRecord> = read_records(dir)?;
    let mut by_region: BTreeMap<&str, Vec<VlnRecord>> = BTreeMap::new();
    for r in &records {
        by_region.entry(&r.region).or_default().push(r.clone());
    }
    let mut rows: Vec<Vec<String>> = by_region
        .iter()
        .filter_map(|(k, v)| aggregate_vln(v).map(|a| vln_row(k, &a)))
        .collect();
    if let Some(all) = aggregate_vln(&records) {
        rows.push(vln_row("all", &all));
    }
    write_csv(
        &out.join("vln.csv"),
        &[
            "region",
            "routes",
            "success",
            "start_reac",
            "intersection_arr",
            "intersection_reac",
            "stop_arr",
            "stop_reac",
        ],
        &rows,
    )?;
    Ok(vec!["vln.csv".into()])
}

/// Macro mean over answer types of `(plain, circular)` accuracy.
fn macc(records: &[&VqaRecord]) -> (Option<f64>, Option<f64>) {
    let mut by_type: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for r in records {
        let e = by_type.entry(&r.answer_type).or_default();
        e.0 += r.plain_correct as usize;
        e.1 += r.circular_correct as usize;
        e.2 += 1;
    }
    if by_type.is_empty() {
        return (None, None);
    }
    let k = by_type.len() as f64;
    let plain = by_type.values().map(|(p, _, n)| *p as f64 / *n as f64).sum::<f64>() / k;
    let circ = by_type.values().map(|(_, c, n)| *c as f64 / *n as f64).sum::<f64>() / k;
    (Some(plain), Some(circ))
}

fn vqa_table(dir: &Path, out: &Path) -> anyhow::Result<Vec<String>> {
    let records: Vec<VqaRecord> = read_records(dir)?;
    let mut by_region: BTreeMap<&str, Vec<&VqaRecord>> = BTreeMap::new();
    for r in &records {
        by_region.entry(&r.region).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (k, v) in &by_region {
        let (p, c) = macc(v);
        rows.push(vec![k.to_string(), v.len().to_string(), cell(p), cell(c)]);
    }
    let all: Vec<&VqaRecord> = records.iter().collect();
    let (p, c) = macc(&all);
    rows.push(vec!["all".into(), all.len().to_string(), cell(p), cell(c)]);
    write_csv(
        &out.join("macc_by_region.csv"),
        &["region", "n_items", "plain_macc", "circular_macc"],
        &rows,
    )?;
    Ok(vec!["macc_by_region.csv".into()])
}

fn sweep_table(dir: &Path, out: &Path) -> anyhow::Result<Vec<String>> {
    let records: Vec<SweepRecord> = read_records(dir)?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.area.clone(),
                r.region.clone(),
                r.tour_nodes.to_string(),
                format!("{:.3}", r.tour_cost_m),
                r.detections.to_string(),
                r.counted.to_string(),
                r.ground_truth.to_string(),
                r.in_region.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("counts.csv"),
        &["area", "region", "tour_nodes", "tour_cost_m", "detections", "counted", "ground_truth", "in_region"],
        &rows,
    )?;
    Ok(vec!["counts.csv".into()])
}

fn route_table(dir: &Path, out: &Path) -> anyhow::Result<Vec<String>> {
    let records: Vec<Value> = read_records(dir)?;
    let mut rows = Vec::new();
    for r in &records {
        let start = r["start"].as_str().unwrap_or_default().to_string();
        rows.push(vec!["0".into(), start]);
        for (i, id) in r["ordering"].as_array().into_iter().flatten().enumerate() {
            rows.push(vec![(i + 1).to_string(), id.as_str().unwrap_or_default().to_string()]);
        }
    }
    write_csv(&out.join("route.csv"), &["position", "node_id"], &rows)?;
    Ok(vec!["route.csv".into()])
}

fn cleaning_table(dir: &Path, out: &Path) -> anyhow::Result<Vec<String>> {
    let records: Vec<streetsim::benchmark::RemovalEntry> = read_records(dir)?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|e| {
            vec![
                e.place_id.clone(),
                serde_json::to_value(e.rule)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                e.photo_id.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(&out.join("cleaning.csv"), &["place_id", "rule", "photo_id"], &rows)?;
    Ok(vec!["cleaning.csv".into()])
}
