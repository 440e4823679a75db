//! Markdown and CSV tables rendered from the CSV artifacts of a run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn col(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse(format!("missing column {name}")))
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| Ok(rec?.iter().map(String::from).collect())).collect::<Result<_>>()?;
    Ok(Table { header, rows })
}

fn optional(dir: &Path, name: &str) -> Result<Option<Table>> {
    let p = dir.join(name);
    if p.exists() {
        read_table(&p).map(Some)
    } else {
        Ok(None)
    }
}

fn required(dir: &Path, name: &str) -> Result<Table> {
    let p = dir.join(name);
    if !p.exists() {
        return Err(Error::Io(format!("missing run artifact {}", p.display())));
    }
    read_table(&p)
}

/// Marker used in the comparison table for a p-value band.
pub fn bucket_symbol(p: f64) -> &'static str {
    if p < 0.05 {
        "—"
    } else if p < 0.1 {
        "★"
    } else {
        "★★"
    }
}

fn markdown(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn num(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")))
}

fn is_model(p: &str) -> bool {
    p.starts_with('M') && p[1..].chars().all(|c| c.is_ascii_digit())
}

/// Renders `report.md` and the `table_*.csv` files into `dir` from the
/// artifacts of a completed run. Rerunning overwrites them with identical
/// content.
pub fn render_report(dir: &Path) -> Result<Vec<PathBuf>> {
    let rankings = required(dir, "rankings.csv")?;
    let tests = required(dir, "tests.csv")?;
    let mcs = required(dir, "mcs.csv")?;
    let econ = optional(dir, "econ.csv")?;
    let density = optional(dir, "density.csv")?;
    let optimal = optional(dir, "optimal_naive.csv")?;
    let mut md = String::from("# Forecast evaluation report\n\n");
    let mut written = Vec::new();

    // rankings with separate ranks among models and among combinations
    let (cp, crho, cphi, chs, cstat, crank) = (
        rankings.col("producer")?,
        rankings.col("rho")?,
        rankings.col("phi")?,
        rankings.col("horizon_set")?,
        rankings.col("loss_stat")?,
        rankings.col("rank")?,
    );
    let mut blocks: BTreeMap<(String, String, String), Vec<&Vec<String>>> = BTreeMap::new();
    for r in &rankings.rows {
        blocks.entry((r[chs].clone(), r[crho].clone(), r[cphi].clone())).or_default().push(r);
    }
    let mut rank_rows = Vec::new();
    md.push_str("## Rankings\n\n");
    for ((hs, rho, phi), rows) in &blocks {
        let mut rows = rows.clone();
        rows.sort_by_key(|r| r[crank].parse::<usize>().unwrap_or(usize::MAX));
        let (mut nm, mut nc) = (0, 0);
        let mut table = Vec::new();
        for r in rows {
            let kind = if is_model(&r[cp]) { "model" } else { "combination" };
            let sub = if kind == "model" {
                nm += 1;
                nm
            } else {
                nc += 1;
                nc
            };
            let row = vec![r[cp].clone(), rho.clone(), phi.clone(), hs.clone(), r[cstat].clone(), r[crank].clone(), kind.into(), sub.to_string()];
            table.push(vec![row[0].clone(), format!("{:.4}", num(&row[4])?), row[5].clone(), kind.into(), sub.to_string()]);
            rank_rows.push(row);
        }
        let _ = writeln!(md, "### ρ = {rho}, φ = {phi}, {hs}\n");
        markdown(&mut md, &["producer", "loss", "rank", "kind", "rank within kind"], &table);
    }
    let p = dir.join("table_rankings.csv");
    write_csv(&p, &["producer", "rho", "phi", "horizon_set", "loss_stat", "rank", "kind", "kind_rank"], &rank_rows)?;
    written.push(p);

    let (cb, ct, cpv) = (tests.col("benchmark")?, tests.col("test")?, tests.col("p_value")?);
    let mut spa_rows = Vec::new();
    let mut dm_rows = Vec::new();
    for r in &tests.rows {
        let pv = num(&r[cpv])?;
        if r[ct] == "spa" {
            spa_rows.push(vec![r[cb].clone(), format!("{pv:.3}"), bucket_symbol(pv).to_string()]);
        } else if let Some(alt) = r[ct].strip_prefix("dm:") {
            dm_rows.push(vec![r[cb].clone(), alt.to_string(), format!("{pv:.3}"), bucket_symbol(pv).to_string()]);
        }
    }
    md.push_str("## Superior predictive ability\n\n— p < 0.05, ★ 0.05 ≤ p < 0.1, ★★ p ≥ 0.1\n\n");
    markdown(&mut md, &["benchmark", "p-value", "band"], &spa_rows);
    let p = dir.join("table_spa.csv");
    write_csv(&p, &["benchmark", "p_value", "band"], &spa_rows)?;
    written.push(p);
    if !dm_rows.is_empty() {
        md.push_str("## Diebold-Mariano\n\n");
        markdown(&mut md, &["benchmark", "alternative", "p-value", "band"], &dm_rows);
    }

    let (mp, min, mpv) = (mcs.col("producer")?, mcs.col("in_mcs")?, mcs.col("elimination_p")?);
    let mcs_rows: Vec<Vec<String>> = mcs
        .rows
        .iter()
        .map(|r| Ok(vec![r[mp].clone(), if r[min] == "true" { "yes" } else { "no" }.to_string(), format!("{:.3}", num(&r[mpv])?)]))
        .collect::<Result<_>>()?;
    md.push_str("## Model confidence set\n\n");
    markdown(&mut md, &["producer", "in set", "MCS p-value"], &mcs_rows);
    let p = dir.join("table_mcs.csv");
    write_csv(&p, &["producer", "in_mcs", "mcs_p_value"], &mcs_rows)?;
    written.push(p);

    if let Some(e) = econ {
        let cols: Vec<usize> =
            ["producer", "lambda", "payoff", "eu", "v", "delta_v", "ce", "delta"].iter().map(|c| e.col(c)).collect::<Result<_>>()?;
        let rows: Vec<Vec<String>> = e
            .rows
            .iter()
            .map(|r| {
                Ok(vec![
                    r[cols[0]].clone(),
                    r[cols[1]].clone(),
                    format!("{:.2}", num(&r[cols[2]])?),
                    format!("{:.6}", num(&r[cols[3]])?),
                    format!("{:.2}", num(&r[cols[4]])?),
                    format!("{:.2}", num(&r[cols[5]])?),
                    format!("{:.2}", num(&r[cols[6]])?),
                    format!("{:.2}", num(&r[cols[7]])?),
                ])
            })
            .collect::<Result<_>>()?;
        let header = ["producer", "lambda", "payoff", "eu", "v", "delta_v", "ce", "delta"];
        md.push_str("## Economic evaluation (one-day-ahead, Euro)\n\n");
        markdown(&mut md, &header, &rows);
        let p = dir.join("table_econ.csv");
        write_csv(&p, &header, &rows)?;
        written.push(p);
    }

    if let Some(o) = optimal {
        let (op, or) = (o.col("producer")?, o.col("ratio")?);
        let rows: Vec<Vec<String>> =
            o.rows.iter().map(|r| Ok(vec![r[op].clone(), format!("{:.4}", num(&r[or])?)])).collect::<Result<_>>()?;
        md.push_str("## Optimal over naive RMSFE (one-day-ahead)\n\n");
        markdown(&mut md, &["producer", "ratio"], &rows);
        let p = dir.join("table_optimal_naive.csv");
        write_csv(&p, &["producer", "ratio"], &rows)?;
        written.push(p);
    }

    if let Some(d) = density {
        let header = ["producer", "avg_rps", "ecp_05", "ecp_25", "ecp_75", "ecp_95"];
        let cols: Vec<usize> = header.iter().map(|c| d.col(c)).collect::<Result<_>>()?;
        let rows: Vec<Vec<String>> = d
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![r[cols[0]].clone(), format!("{:.2}", num(&r[cols[1]])?)];
                for &c in &cols[2..] {
                    row.push(format!("{:.2}", 100.0 * num(&r[c])?));
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        md.push_str("## Density forecasts (RPS, coverage in %)\n\n");
        markdown(&mut md, &header, &rows);
        let p = dir.join("table_density.csv");
        write_csv(&p, &header, &rows)?;
        written.push(p);
    }

    let p = dir.join("report.md");
    fs::write(&p, md)?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_and_missing_artifacts() {
        assert_eq!(bucket_symbol(0.07), "★");
        assert_eq!(bucket_symbol(0.01), "—");
        assert_eq!(bucket_symbol(0.5), "★★");
        let d = tempfile::tempdir().unwrap();
        let e = render_report(d.path()).unwrap_err();
        assert!(e.to_string().contains("rankings.csv"));
    }

    #[test]
    fn singleton_report_is_idempotent() {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("rankings.csv"), "producer,rho,phi,horizon_set,loss_stat,rank\nM1,2,0.5,h1,3.5,1\n").unwrap();
        fs::write(d.path().join("tests.csv"), "benchmark,test,statistic,p_value,bucket\n").unwrap();
        fs::write(d.path().join("mcs.csv"), "producer,in_mcs,elimination_p\nM1,true,1\n").unwrap();
        let files = render_report(d.path()).unwrap();
        let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        render_report(d.path()).unwrap();
        let second: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        assert_eq!(first, second);
        let t = fs::read_to_string(d.path().join("table_rankings.csv")).unwrap();
        assert!(t.contains("M1,2,0.5,h1,3.5,1,model,1"));
    }
}
