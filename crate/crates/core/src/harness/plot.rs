//! Top-down SVG of evaluation trajectories.
//!
//! North (+x) points up the page and east (+y) to the right. Path colours by
//! outcome:
//!
//! | outcome   | colour    |
//! |-----------|-----------|
//! | goal      | `#2ca02c` |
//! | violation | `#d62728` |
//! | timeout   | `#ff7f0e` |
//! | none      | `#7f7f7f` |

use std::fmt::Write;

use crate::env::{EnvConfig, TerminalKind};
use crate::error::{DockError, Result};
use crate::harness::records::EpisodeRecord;
use crate::reward::DockGeometry;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 30.0;

pub fn outcome_color(outcome: TerminalKind) -> &'static str {
    match outcome {
        TerminalKind::Goal => "#2ca02c",
        TerminalKind::Violation => "#d62728",
        TerminalKind::Timeout => "#ff7f0e",
        TerminalKind::None => "#7f7f7f",
    }
}

/// World-to-page mapping for a square workspace of half-width `half`.
#[derive(Debug, Clone, Copy)]
pub struct PageMap {
    half: f64,
}

impl PageMap {
    pub fn new(half: f64) -> Self {
        PageMap { half }
    }

    fn scale(&self) -> f64 {
        SIZE / (2.0 * self.half)
    }

    /// `(x north, y east)` to SVG `(px, py)`.
    pub fn to_page(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + (y + self.half) * self.scale(), MARGIN + (self.half - x) * self.scale())
    }
}

fn pt(v: f64) -> String {
    format!("{v:.2}")
}

pub fn plot_trajectories(records: &[EpisodeRecord], geom: &DockGeometry, env: &EnvConfig) -> Result<String> {
    if records.is_empty() {
        return Err(DockError::Usage("nothing to plot: no episode records".into()));
    }
    let map = PageMap::new(env.workspace_half_extent);
    let total = SIZE + 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{t}" height="{t}" viewBox="0 0 {t} {t}">"#,
        t = pt(total)
    );
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{t}" height="{t}" fill="#ffffff"/>"##, t = pt(total));

    let (x0, y0) = map.to_page(env.workspace_half_extent, -env.workspace_half_extent);
    let _ = writeln!(
        svg,
        r##"<rect class="workspace" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333333" stroke-width="1.5"/>"##,
        pt(x0),
        pt(y0),
        pt(SIZE),
        pt(SIZE)
    );

    // docking triangle: apex at the goal, opening along the goal heading
    let g = &geom.goal;
    let (s, c) = g.psi.sin_cos();
    let half_width = geom.triangle_length * geom.triangle_half_angle.tan();
    let corner = |side: f64| {
        let along = geom.triangle_length;
        (g.x + c * along - s * side * half_width, g.y + s * along + c * side * half_width)
    };
    let corners = [(g.x, g.y), corner(1.0), corner(-1.0)];
    let points: Vec<String> = corners
        .iter()
        .map(|&(x, y)| {
            let (px, py) = map.to_page(x, y);
            format!("{},{}", pt(px), pt(py))
        })
        .collect();
    let _ = writeln!(
        svg,
        r##"<polygon class="docking-triangle" points="{}" fill="#1f77b4" fill-opacity="0.12" stroke="#1f77b4" stroke-dasharray="4 3"/>"##,
        points.join(" ")
    );
    let (gx, gy) = map.to_page(g.x, g.y);
    let _ = writeln!(
        svg,
        r##"<circle class="goal-tolerance" cx="{}" cy="{}" r="{}" fill="none" stroke="#000000" stroke-width="1"/>"##,
        pt(gx),
        pt(gy),
        pt(geom.goal_pos_tol * map.scale())
    );

    for (i, record) in records.iter().enumerate() {
        let color = outcome_color(record.outcome);
        let path: Vec<String> = record
            .path()
            .iter()
            .map(|&(x, y)| {
                let (px, py) = map.to_page(x, y);
                format!("{},{}", pt(px), pt(py))
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="episode {}" data-episode="{i}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            record.outcome.as_str(),
            path.join(" ")
        );
        let (sx, sy) = map.to_page(record.initial_state.pose.x, record.initial_state.pose.y);
        let _ = writeln!(
            svg,
            r#"<circle class="spawn" cx="{}" cy="{}" r="3" fill="{color}"/>"#,
            pt(sx),
            pt(sy)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
