//! 5 x 3 grids of impulse responses, outcomes down the rows and shocks
//! across the columns.

use std::collections::BTreeMap;

use nlproj::inference::{outcome_label, shock_label};
use nlproj::panel::{Outcome, ShockKind};
use nlproj::svg::{axis_range, SvgDoc};

pub struct Line {
    pub values: Vec<f64>,
    pub colour: &'static str,
    pub dashed: bool,
}

pub struct Band {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub colour: &'static str,
    pub opacity: f64,
}

#[derive(Default)]
pub struct Cell {
    pub bands: Vec<Band>,
    pub lines: Vec<Line>,
}

pub const BLUE: &str = "#1f4e9c";
pub const RED: &str = "#c0392b";
pub const GREEN: &str = "#2e8b57";
pub const GREY: &str = "#7f7f7f";
/// One colour per member of a scaled family, smallest scale first.
pub const FAMILY: [&str; 5] = ["#9ecae1", "#6baed6", "#3182bd", "#08519c", "#08306b"];

const CELL_W: f64 = 220.0;
const CELL_H: f64 = 140.0;
const LEFT: f64 = 90.0;
const TOP: f64 = 70.0;
const GAP: f64 = 24.0;

pub fn grid_svg(title: &str, legend: &[(&str, &str)], cells: &BTreeMap<(Outcome, ShockKind), Cell>) -> String {
    let n_rows = Outcome::ALL.len() as f64;
    let n_cols = ShockKind::ALL.len() as f64;
    let width = LEFT + n_cols * (CELL_W + GAP) + 10.0;
    let height = TOP + n_rows * (CELL_H + GAP) + 10.0;
    let mut doc = SvgDoc::new(width, height);
    doc.text(LEFT, 22.0, 14.0, "start", title);
    let mut lx = LEFT;
    for (label, colour) in legend {
        doc.line(lx, 40.0, lx + 20.0, 40.0, colour, 2.0);
        doc.text(lx + 24.0, 44.0, 10.0, "start", label);
        lx += 30.0 + 7.0 * label.len() as f64;
    }
    for (ci, s) in ShockKind::ALL.iter().enumerate() {
        let x = LEFT + ci as f64 * (CELL_W + GAP) + CELL_W / 2.0;
        doc.text(x, TOP - 8.0, 12.0, "middle", shock_label(*s));
    }
    for (ri, o) in Outcome::ALL.iter().enumerate() {
        let y0 = TOP + ri as f64 * (CELL_H + GAP);
        doc.text(8.0, y0 + CELL_H / 2.0, 12.0, "start", outcome_label(*o));
        for (ci, s) in ShockKind::ALL.iter().enumerate() {
            let x0 = LEFT + ci as f64 * (CELL_W + GAP);
            if let Some(cell) = cells.get(&(*o, *s)) {
                draw_cell(&mut doc, x0, y0, cell);
            }
        }
    }
    doc.finish()
}

fn draw_cell(doc: &mut SvgDoc, x0: f64, y0: f64, cell: &Cell) {
    doc.rect(x0, y0, CELL_W, CELL_H, "none", "#444444");
    let all = cell
        .lines
        .iter()
        .flat_map(|l| l.values.iter())
        .chain(cell.bands.iter().flat_map(|b| b.lo.iter().chain(&b.hi)))
        .copied();
    let (lo, hi) = axis_range(all);
    let n = cell
        .lines
        .iter()
        .map(|l| l.values.len())
        .chain(cell.bands.iter().map(|b| b.lo.len()))
        .max()
        .unwrap_or(1)
        .max(2);
    let px = |h: usize| x0 + CELL_W * h as f64 / (n - 1) as f64;
    let py = |v: f64| y0 + CELL_H * (hi - v) / (hi - lo);

    for band in &cell.bands {
        let mut pts: Vec<(f64, f64)> = band.hi.iter().enumerate().map(|(h, v)| (px(h), py(*v))).collect();
        pts.extend(band.lo.iter().enumerate().rev().map(|(h, v)| (px(h), py(*v))));
        doc.polygon(&pts, band.colour, band.opacity);
    }
    doc.line(x0, py(0.0), x0 + CELL_W, py(0.0), GREY, 0.6);
    for line in &cell.lines {
        let pts: Vec<(f64, f64)> = line.values.iter().enumerate().map(|(h, v)| (px(h), py(*v))).collect();
        doc.polyline(&pts, line.colour, 1.5, line.dashed);
    }
    doc.text(x0 - 3.0, y0 + 9.0, 8.0, "end", &format!("{hi:.2}"));
    doc.text(x0 - 3.0, y0 + CELL_H, 8.0, "end", &format!("{lo:.2}"));
    doc.text(x0, y0 + CELL_H + 10.0, 8.0, "start", "0");
    doc.text(x0 + CELL_W, y0 + CELL_H + 10.0, 8.0, "end", &(n - 1).to_string());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_one_frame_per_cell_and_is_stable() {
        let mut cells = BTreeMap::new();
        for o in Outcome::ALL {
            for s in ShockKind::ALL {
                cells.insert(
                    (o, s),
                    Cell {
                        bands: vec![Band {
                            lo: vec![-1.0, -0.5, 0.0],
                            hi: vec![1.0, 1.5, 2.0],
                            colour: BLUE,
                            opacity: 0.2,
                        }],
                        lines: vec![Line {
                            values: vec![0.0, 0.5, 1.0],
                            colour: RED,
                            dashed: false,
                        }],
                    },
                );
            }
        }
        let a = grid_svg("t", &[("linear", RED)], &cells);
        assert_eq!(a.matches("<polyline").count(), 15);
        assert_eq!(a.matches("<polygon").count(), 15);
        assert_eq!(a, grid_svg("t", &[("linear", RED)], &cells));
    }
}
