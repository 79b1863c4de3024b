//! Static SVG line plots of a [`ResultTable`].

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid_arg, DoaError, Result};
use crate::harness::experiment::{ResultRow, ResultTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Resolution,
    Rmse,
    RmseDbWithCrb,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [PlotKind::Resolution, PlotKind::Rmse, PlotKind::RmseDbWithCrb];

    pub fn name(&self) -> &'static str {
        match self {
            PlotKind::Resolution => "resolution",
            PlotKind::Rmse => "rmse",
            PlotKind::RmseDbWithCrb => "rmse_db_with_crb",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            PlotKind::Resolution => "Probability of resolution versus SNR",
            PlotKind::Rmse => "RMSE versus SNR",
            PlotKind::RmseDbWithCrb => "RMSE and the square root of CRB versus SNR",
        }
    }

    fn y_label(&self) -> &'static str {
        match self {
            PlotKind::Resolution => "Probability of resolution",
            PlotKind::Rmse => "RMSE (degrees)",
            PlotKind::RmseDbWithCrb => "RMSE (dB re 1 degree)",
        }
    }

    fn value(&self, row: &ResultRow) -> f64 {
        match self {
            PlotKind::Resolution => row.prob_resolution,
            PlotKind::Rmse => row.rmse_deg,
            PlotKind::RmseDbWithCrb => row.rmse_db,
        }
    }
}

impl FromStr for PlotKind {
    type Err = DoaError;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid_arg(format!("unknown plot kind `{s}`")))
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const TICKS: usize = 5;

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        None
    } else if lo == hi {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn points(&self, pts: &[(f64, f64)]) -> String {
        pts.iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Renders the plot as an SVG document.
pub fn render_svg(table: &ResultTable, kind: PlotKind) -> Result<String> {
    if table.is_empty() {
        return Err(invalid_arg("cannot plot an empty table"));
    }
    let estimators = table.estimators();
    let crb: Vec<(f64, f64)> = {
        let mut seen = Vec::new();
        for r in &table.rows {
            if !seen.iter().any(|&(s, _)| s == r.snr_db) {
                seen.push((r.snr_db, 20.0 * r.crb_sqrt_deg.log10()));
            }
        }
        seen
    };
    let x = finite_range(table.rows.iter().map(|r| r.snr_db))
        .ok_or_else(|| invalid_arg("no finite SNR values to plot"))?;
    let y = match kind {
        PlotKind::Resolution => (0.0, 1.0),
        PlotKind::Rmse => finite_range(table.rows.iter().map(|r| r.rmse_deg)).unwrap_or((0.0, 1.0)),
        PlotKind::RmseDbWithCrb => finite_range(
            table
                .rows
                .iter()
                .map(|r| r.rmse_db)
                .chain(crb.iter().map(|&(_, c)| c)),
        )
        .unwrap_or((0.0, 1.0)),
    };
    let frame = Frame { x, y };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text class="title" x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        kind.title()
    );

    // axes
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=TICKS {
        let t = k as f64 / TICKS as f64;
        let xv = frame.x.0 + t * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + t * (frame.y.1 - frame.y.0);
        let (px, py) = (frame.px(xv), frame.py(yv));
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.1}</text>"#,
            y0 + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#,
            x0 - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle">SNR (dB)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text class="ylabel" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        kind.y_label()
    );

    for (i, est) in estimators.iter().enumerate() {
        let pts: Vec<(f64, f64)> = table
            .rows_for(*est)
            .iter()
            .map(|r| (r.snr_db, kind.value(r)))
            .collect();
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<polyline class="curve" data-estimator="{est}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            frame.points(&pts)
        );
        legend(&mut s, i, color, est.name(), false);
    }
    if kind == PlotKind::RmseDbWithCrb {
        let _ = writeln!(
            s,
            r#"<polyline class="crb" fill="none" stroke="black" stroke-width="1.2" stroke-dasharray="6,4" points="{}"/>"#,
            frame.points(&crb)
        );
        legend(&mut s, estimators.len(), "black", "sqrt(CRB)", true);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn legend(s: &mut String, slot: usize, color: &str, label: &str, dashed: bool) {
    let x = WIDTH - RIGHT + 12.0;
    let y = TOP + 10.0 + 18.0 * slot as f64;
    let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
    let _ = writeln!(
        s,
        r#"<line class="legend" x1="{x}" y1="{y}" x2="{:.1}" y2="{y}" stroke="{color}"{dash}/>"#,
        x + 24.0
    );
    let _ = writeln!(s, r#"<text class="legend" x="{:.1}" y="{:.1}">{label}</text>"#, x + 30.0, y + 4.0);
}

pub fn emit_plot(table: &ResultTable, kind: PlotKind, path: &Path) -> Result<()> {
    let svg = render_svg(table, kind)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, svg)?;
    Ok(())
}
