use std::fmt::Write as _;
use std::path::Path;

use super::{AblationCondition, AblationRow, AblationTable};
use crate::classifier::TrainMode;
use crate::encoder::Backbone;
use crate::{Error, Result};

const HEADERS: [&str; 7] = ["Background", "Fish", "Pattern", "No background", "No fish", "No pattern", "All"];
const SINGLES: std::ops::Range<usize> = 0..3;
const COMBINATIONS: std::ops::Range<usize> = 3..6;
const ALL: usize = 6;
const TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellMark {
    pub best: bool,
    pub worst: bool,
}

/// Bold/italic marks for one row. Single regions and combinations are ranked
/// separately and every tied cell is marked. `All` is only marked when the
/// whole row is constant.
pub fn row_marks(accuracy: &[Option<f64>; 7]) -> [CellMark; 7] {
    let mut marks = [CellMark::default(); 7];
    for group in [SINGLES, COMBINATIONS] {
        let present: Vec<f64> = accuracy[group.clone()].iter().flatten().copied().collect();
        if present.is_empty() {
            continue;
        }
        let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
        for i in group {
            if let Some(v) = accuracy[i] {
                marks[i] = CellMark { best: (v - hi).abs() <= TIE, worst: (v - lo).abs() <= TIE };
            }
        }
    }
    let present: Vec<f64> = accuracy.iter().flatten().copied().collect();
    if let Some(v) = accuracy[ALL] {
        if present.iter().all(|p| (p - v).abs() <= TIE) {
            marks[ALL] = CellMark { best: true, worst: true };
        }
    }
    marks
}

fn styled(value: Option<f64>, mark: CellMark) -> String {
    let Some(v) = value else { return "-".into() };
    let s = format!("{v:.2}");
    match (mark.best, mark.worst) {
        (true, true) => format!("***{s}***"),
        (true, false) => format!("**{s}**"),
        (false, true) => format!("*{s}*"),
        (false, false) => s,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub csv: String,
    pub text: String,
    /// Marks per table row, in row order.
    pub marks: Vec<[CellMark; 7]>,
}

impl AblationReport {
    /// Writes `ablation.csv` and `ablation.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [("ablation.csv", &self.csv), ("ablation.txt", &self.text)] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Accuracy CSV in the table's column order plus a plain-text rendering per
/// training mode with **best** and *worst* cells marked.
pub fn render_ablation_report(table: &AblationTable) -> AblationReport {
    let marks: Vec<[CellMark; 7]> = table.rows.iter().map(|r| row_marks(&r.accuracy)).collect();

    let mut csv = String::from("algorithm,mode");
    for c in AblationCondition::ALL {
        csv.push(',');
        csv.push_str(&c.name());
    }
    csv.push('\n');
    for row in &table.rows {
        csv.push_str(&format!("{},{}", row.backbone, row.mode));
        for v in row.accuracy {
            csv.push(',');
            if let Some(v) = v {
                csv.push_str(&v.to_string());
            }
        }
        csv.push('\n');
    }

    let mut text = String::new();
    for mode in TrainMode::ALL {
        let rows: Vec<(&AblationRow, &[CellMark; 7])> =
            table.rows.iter().zip(&marks).filter(|(r, _)| r.mode == mode).collect();
        if rows.is_empty() {
            continue;
        }
        let cells: Vec<Vec<String>> = rows
            .iter()
            .map(|(r, m)| {
                std::iter::once(r.backbone.to_string())
                    .chain((0..7).map(|i| styled(r.accuracy[i], m[i])))
                    .collect()
            })
            .collect();
        let header: Vec<String> = std::iter::once("Algorithm".to_string()).chain(HEADERS.map(String::from)).collect();
        let widths: Vec<usize> = (0..8)
            .map(|j| cells.iter().map(|c| c[j].len()).chain([header[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |c: &[String]| {
            c.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect::<Vec<_>>().join(" | ").trim_end().to_string()
        };
        let _ = writeln!(text, "Accuracy per region, {mode} backpropagation");
        let _ = writeln!(text, "{}", line(&header));
        let _ = writeln!(text, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
        for c in &cells {
            let _ = writeln!(text, "{}", line(c));
        }
        text.push('\n');
    }
    text.push_str("**x** best and *x* worst single region / combination per row; ties are all marked.\n");
    if !table.skipped.is_empty() {
        text.push_str("\nSkipped:\n");
        for s in &table.skipped {
            let _ = writeln!(text, "  {} ({}): {}", s.backbone, s.mode, s.reason);
        }
    }
    AblationReport { csv, text, marks }
}

impl AblationTable {
    /// Parses the CSV written by [`render_ablation_report`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let expected: Vec<String> =
            ["algorithm", "mode"].map(String::from).into_iter().chain(AblationCondition::ALL.map(|c| c.name())).collect();
        let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
        if header != expected {
            return Err(Error::Dataset(format!("{}: unexpected ablation columns {header:?}", path.display())));
        }
        let mut table = AblationTable::default();
        for rec in reader.records() {
            let rec = rec?;
            let backbone: Backbone = rec[0].parse()?;
            let mode: TrainMode = rec[1].parse()?;
            let mut accuracy = [None; 7];
            for (i, slot) in accuracy.iter_mut().enumerate() {
                let cell = &rec[i + 2];
                if !cell.is_empty() {
                    *slot = Some(cell.parse().map_err(|_| {
                        Error::Dataset(format!("{}: bad accuracy `{cell}`", path.display()))
                    })?);
                }
            }
            table.rows.push(AblationRow { backbone, mode, accuracy });
        }
        Ok(table)
    }
}
