//! Regression goldens: every `<name>.cfg` in a directory is rerun and its
//! table compared with `<name>.csv` under the column tolerances listed in
//! `tolerances.txt`.
//!
//! Tolerance lines are `column rel abs` or `name.column rel abs`; the more
//! specific entry wins. A cell passes when `|x - g| <= abs + rel |g|`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use cfl_core::table::{Cell, Table};

use crate::config::RawConfig;
use crate::error::{io_error, CliError, CliResult};
use crate::experiments;

pub const TOLERANCE_FILE: &str = "tolerances.txt";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tolerances {
    entries: BTreeMap<String, Tolerance>,
}

impl Tolerances {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let f: Vec<&str> = body.split_whitespace().collect();
            let bad = || CliError::Golden(format!("{TOLERANCE_FILE} line {}: expected `column rel abs`", i + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            let rel: f64 = f[1].parse().map_err(|_| bad())?;
            let abs: f64 = f[2].parse().map_err(|_| bad())?;
            if !(rel >= 0.0 && abs >= 0.0) {
                return Err(bad());
            }
            entries.insert(f[0].to_string(), Tolerance { rel, abs });
        }
        Ok(Self { entries })
    }

    pub fn lookup(&self, golden: &str, column: &str) -> Option<Tolerance> {
        self.entries
            .get(&format!("{golden}.{column}"))
            .or_else(|| self.entries.get(column))
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Blessed,
    Fail(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenResult {
    pub name: String,
    pub verdict: Verdict,
}

impl fmt::Display for GoldenResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.verdict {
            Verdict::Pass => write!(f, "PASS {}", self.name),
            Verdict::Blessed => write!(f, "BLESSED {}", self.name),
            Verdict::Fail(why) => write!(f, "FAIL {}: {why}", self.name),
        }
    }
}

/// First divergence between `got` and `golden`, if any.
pub fn compare_tables(name: &str, got: &Table, golden: &Table, tol: &Tolerances) -> CliResult<Option<String>> {
    if got.columns() != golden.columns() {
        return Ok(Some(format!(
            "columns differ: got {:?}, golden {:?}",
            got.columns(),
            golden.columns()
        )));
    }
    if got.rows().len() != golden.rows().len() {
        return Ok(Some(format!(
            "row count differs: got {}, golden {}",
            got.rows().len(),
            golden.rows().len()
        )));
    }
    for (r, (a, b)) in got.rows().iter().zip(golden.rows()).enumerate() {
        for (c, (x, g)) in a.iter().zip(b).enumerate() {
            let column = &got.columns()[c];
            match (x.as_f64(), g) {
                (Some(x), Cell::Num(g)) => {
                    let t = tol.lookup(name, column).ok_or_else(|| {
                        CliError::Golden(format!("{name}: no tolerance for numeric column {column:?}"))
                    })?;
                    let same_special = x.to_bits() == g.to_bits() || (x.is_nan() && g.is_nan());
                    if !same_special && !((x - g).abs() <= t.abs + t.rel * g.abs()) {
                        return Ok(Some(format!(
                            "row {r} column {column}: got {x:e}, golden {g:e} (rel {}, abs {})",
                            t.rel, t.abs
                        )));
                    }
                }
                _ => {
                    let (xs, gs) = (render(x), render(g));
                    if xs != gs {
                        return Ok(Some(format!("row {r} column {column}: got {xs:?}, golden {gs:?}")));
                    }
                }
            }
        }
    }
    Ok(None)
}

fn render(c: &Cell) -> String {
    match c {
        Cell::Num(x) => cfl_core::table::format_float(*x),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) => s.clone(),
    }
}

/// Reruns every golden in `dir`. With `bless`, rewrites the expected tables
/// instead of comparing.
pub fn golden_check(dir: &Path, bless: bool) -> CliResult<Vec<GoldenResult>> {
    let tol_path = dir.join(TOLERANCE_FILE);
    if !tol_path.is_file() {
        return Err(CliError::Golden(format!("missing {}", tol_path.display())));
    }
    let tol = Tolerances::parse(&std::fs::read_to_string(&tol_path).map_err(|e| io_error(&tol_path, e))?)?;
    let mut configs: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    configs.sort();
    if configs.is_empty() {
        return Err(CliError::Golden(format!("no *.cfg goldens in {}", dir.display())));
    }
    let mut results = Vec::new();
    for cfg_path in configs {
        let name = cfg_path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let csv_path = cfg_path.with_extension("csv");
        let verdict = (|| -> CliResult<Verdict> {
            let cfg = RawConfig::read(&cfg_path)?.resolve()?;
            let out = experiments::run(&cfg)?;
            if bless {
                std::fs::write(&csv_path, out.table.to_csv()).map_err(|e| io_error(&csv_path, e))?;
                return Ok(Verdict::Blessed);
            }
            if !csv_path.is_file() {
                return Ok(Verdict::Fail(format!("missing golden {}", csv_path.display())));
            }
            let text = std::fs::read_to_string(&csv_path).map_err(|e| io_error(&csv_path, e))?;
            let golden = Table::from_csv(&text).map_err(|e| CliError::Golden(format!("{}: {e}", csv_path.display())))?;
            let got = Table::from_csv(&out.table.to_csv()).map_err(CliError::Golden)?;
            Ok(match compare_tables(&name, &got, &golden, &tol)? {
                None => Verdict::Pass,
                Some(why) => Verdict::Fail(why),
            })
        })();
        let verdict = match verdict {
            Ok(v) => v,
            Err(e @ CliError::Golden(_)) => return Err(e),
            Err(e) => Verdict::Fail(format!("{}: {e}", e.category())),
        };
        results.push(GoldenResult { name, verdict });
    }
    Ok(results)
}
