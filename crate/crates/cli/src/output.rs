//! Trajectory tables and flat key-value documents.
//!
//! Trajectory columns, left to right:
//!
//! * `t`
//! * `q_v{i}_{c}`, `qstar_v{i}_{c}`, `e_v{i}_{c}`, `gu_v{i}_{c}` for each agent
//!   vertex `i` in ascending order and each stalk coordinate `c`
//! * `p_v{k}_{c}` for each target vertex `k` in ascending order
//! * `e_norm`, `bound`
//!
//! `gu` is the applied control velocity `g_i u_i`, which lives in the agent
//! stalk whatever the control dimension. Values are written with 17
//! significant digits so they read back bit-for-bit.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DVector;
use sheaftrack::{TrackingProblem, TrajectoryLog};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn names(prefix: &str, ids: &[usize], dims: &[usize]) -> Vec<String> {
    ids.iter()
        .flat_map(|&v| (0..dims[v]).map(move |c| format!("{prefix}_v{v}_{c}")))
        .collect()
}

impl Table {
    pub fn from_log(problem: &TrackingProblem<f64>, log: &TrajectoryLog<f64>) -> Result<Self> {
        ensure!(!log.is_empty(), "trajectory log is empty");
        ensure!(
            log.bound.len() == log.len(),
            "trajectory log has no bound column"
        );
        let dims = problem.sheaf().vertex_dims();
        let agents = problem.agents().members();
        let targets = problem.targets().members();
        let mut header = vec!["t".to_string()];
        for prefix in ["q", "qstar", "e", "gu"] {
            header.extend(names(prefix, agents, dims));
        }
        header.extend(names("p", targets, dims));
        header.push("e_norm".into());
        header.push("bound".into());
        let rows = (0..log.len())
            .map(|k| {
                let mut row = Vec::with_capacity(header.len());
                row.push(log.time[k]);
                for v in [&log.q[k], &log.q_star[k], &log.e[k], &log.gu[k], &log.p[k]] {
                    row.extend(v.iter().copied());
                }
                row.push(log.e_norm[k]);
                row.push(log.bound[k]);
                row
            })
            .collect();
        Ok(Table { header, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Vertices carrying columns with `prefix`, each with its column indices
    /// in coordinate order.
    pub fn vertices(&self, prefix: &str) -> Vec<(usize, Vec<usize>)> {
        let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
        let lead = format!("{prefix}_v");
        for (c, h) in self.header.iter().enumerate() {
            let Some(rest) = h.strip_prefix(&lead) else {
                continue;
            };
            let Some((v, _)) = rest.split_once('_') else {
                continue;
            };
            let Ok(v) = v.parse::<usize>() else {
                continue;
            };
            match out.last_mut() {
                Some((last, cols)) if *last == v => cols.push(c),
                _ => out.push((v, vec![c])),
            }
        }
        out
    }

    /// State of every vertex with `prefix` at row `k`.
    pub fn states(&self, prefix: &str, k: usize) -> Vec<(usize, DVector<f64>)> {
        self.vertices(prefix)
            .into_iter()
            .map(|(v, cols)| {
                (
                    v,
                    DVector::from_iterator(cols.len(), cols.iter().map(|&c| self.rows[k][c])),
                )
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format!("{x:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r =
            csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            ensure!(
                rec.len() == header.len(),
                "row {k}: {} fields, expected {}",
                rec.len(),
                header.len()
            );
            let row = rec
                .iter()
                .map(|x| {
                    x.parse::<f64>()
                        .with_context(|| format!("row {k}: bad number {x:?}"))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if header.first().map(String::as_str) != Some("t") {
            bail!("{}: first column must be `t`", path.display());
        }
        Ok(Table { header, rows })
    }
}

/// `key=value` lines in the given order.
pub fn key_values(pairs: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

/// Parses `key=value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key=value", n + 1);
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
