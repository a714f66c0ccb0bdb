//! CSV traces and JSON summaries.

use std::io::Write;
use std::path::Path;

use super::run::{MabRow, RunTrace};
use crate::error::{Error, Result};
use crate::fusion_mab::mask_string;

pub const TRACE_HEADER: [&str; 19] = [
    "t_s",
    "v_f_mps",
    "d_m",
    "v_l_mps",
    "v_f_hat_mps",
    "d_hat_m",
    "v_l_hat_mps",
    "u_mps2",
    "regret_m2",
    "cum_regret_m2",
    "gap_m",
    "flags",
    "arm_bitmask",
    "D",
    "xi",
    "xi_star",
    "cum_cyber_regret",
    "bound",
    "collision",
];

pub const MAB_HEADER: [&str; 7] = [
    "t",
    "arm_bitmask",
    "D",
    "xi",
    "xi_star",
    "cum_regret",
    "bound",
];

pub const ARM_HEADER: [&str; 3] = ["arm_bitmask", "plays", "frequency"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing to a Vec cannot fail
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// Step trace as CSV bytes.
pub fn trace_csv(tr: &RunTrace) -> Vec<u8> {
    let n_l = tr.n_l;
    csv_bytes(
        &TRACE_HEADER,
        tr.rows.iter().map(|r| {
            vec![
                r.t.to_string(),
                r.v_f.to_string(),
                r.d.to_string(),
                r.v_l.to_string(),
                r.v_f_hat.to_string(),
                r.d_hat.to_string(),
                r.v_l_hat.to_string(),
                r.u.to_string(),
                r.regret.to_string(),
                r.cum_regret.to_string(),
                r.gap.to_string(),
                r.flags.to_string(),
                r.arm.map(|a| mask_string(a, n_l)).unwrap_or_default(),
                opt(r.sm),
                opt(r.xi),
                opt(r.xi_star),
                r.cum_cyber_regret.to_string(),
                opt(r.bound),
                u8::from(r.collision).to_string(),
            ]
        }),
    )
}

/// Bandit plays as CSV bytes.
pub fn mab_csv(rows: &[MabRow], n_l: usize) -> Vec<u8> {
    csv_bytes(
        &MAB_HEADER,
        rows.iter().map(|r| {
            vec![
                r.t.to_string(),
                mask_string(r.arm, n_l),
                r.d.to_string(),
                r.xi.to_string(),
                r.xi_star.to_string(),
                r.cum_regret.to_string(),
                r.bound.to_string(),
            ]
        }),
    )
}

/// Arm play counts, most played first (ties by bitmask).
pub fn arm_frequency_csv(counts: &[(String, u64)]) -> Vec<u8> {
    let total: u64 = counts.iter().map(|c| c.1).sum();
    let mut sorted = counts.to_vec();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    csv_bytes(
        &ARM_HEADER,
        sorted.into_iter().map(|(m, n)| {
            vec![
                m,
                n.to_string(),
                (n as f64 / total.max(1) as f64).to_string(),
            ]
        }),
    )
}

pub fn summary_json(tr: &RunTrace) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(&tr.summary).expect("summary serializes");
    v.push(b'\n');
    v
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(bytes).map_err(|e| io_err(path, e))
}

/// Writes `<stem>.csv`, `<stem>.json` and, with the bandit on,
/// `<stem>_mab.csv` into `dir`. Returns the paths written.
pub fn write_run(tr: &RunTrace, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
    let mut out = vec![
        dir.join(format!("{stem}.csv")),
        dir.join(format!("{stem}.json")),
    ];
    write_file(&out[0], &trace_csv(tr))?;
    write_file(&out[1], &summary_json(tr))?;
    if !tr.mab.is_empty() {
        let p = dir.join(format!("{stem}_mab.csv"));
        write_file(&p, &mab_csv(&tr.mab, tr.n_l))?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::preset;
    use crate::harness::run::run_scenario;

    fn short_fig9() -> RunTrace {
        let mut s = preset("fig9").unwrap().resolve().unwrap();
        s.duration = 5.0;
        run_scenario(&s).unwrap()
    }

    #[test]
    fn trace_has_header_and_one_line_per_step() {
        let tr = short_fig9();
        let text = String::from_utf8(trace_csv(&tr)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 50);
        assert!(rows
            .iter()
            .all(|r| r.split(',').count() == TRACE_HEADER.len()));
    }

    #[test]
    fn mab_columns_and_bitmask() {
        let tr = short_fig9();
        let text = String::from_utf8(mab_csv(&tr.mab, tr.n_l)).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,arm_bitmask,D,xi,xi_star,cum_regret,bound"
        );
        for l in lines {
            let mask = l.split(',').nth(1).unwrap();
            assert_eq!(mask.len(), 4);
            assert!(mask.chars().all(|c| c == '0' || c == '1') && mask != "0000");
        }
    }

    #[test]
    fn arm_frequency_sorted() {
        let text = String::from_utf8(arm_frequency_csv(&[
            ("0001".into(), 1),
            ("1011".into(), 6),
            ("0111".into(), 1),
        ]))
        .unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[1], "1011,6,0.75");
        assert_eq!(lines[2], "0001,1,0.125");
        assert_eq!(lines[3], "0111,1,0.125");
    }

    #[test]
    fn write_run_creates_files() {
        let tr = short_fig9();
        let dir = tempfile::tempdir().unwrap();
        let nested = dir.path().join("a/b");
        let paths = write_run(&tr, &nested, "run").unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths.iter().all(|p| p.exists()));
        let summary: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&paths[1]).unwrap()).unwrap();
        assert_eq!(summary["steps"], 50);
    }
}
