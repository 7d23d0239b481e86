//! Deterministic SVG figures: one or more square panels side by side, each
//! with its own world-coordinate viewport.

use stoilow_core::region::CellRegion;
use stoilow_core::{Rect, C64};
use svg::node::element::{Circle, Group, Path, Polyline as SvgPolyline, Rectangle, Text, Title};
use svg::Document;

const PANEL_PX: f64 = 360.0;
const GAP_PX: f64 = 24.0;
const TITLE_PX: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    /// Cell set drawn as a single path of merged row runs.
    Cells { region: CellRegion, fill: &'static str },
    Line { points: Vec<C64>, stroke: &'static str },
    /// Circle with a radius in world units.
    Disk { center: C64, radius: f64, stroke: &'static str },
    Outline { rect: Rect, stroke: &'static str },
    /// Fixed-size marker with an optional label.
    Marker { at: C64, label: Option<String>, fill: &'static str },
    Dots { points: Vec<C64>, fill: &'static str },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub view: Rect,
    pub items: Vec<Item>,
}

impl Panel {
    pub fn new(title: impl Into<String>, view: Rect) -> Self {
        Panel {
            title: title.into(),
            view,
            items: Vec::new(),
        }
    }

    pub fn with(mut self, item: Item) -> Self {
        self.items.push(item);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Figure {
    pub panels: Vec<Panel>,
}

/// Square view around a disk with a 10% margin.
pub fn disk_view(center: C64, radius: f64) -> Rect {
    Rect::centered(center, 1.1 * radius.max(1e-9))
}

/// Square view containing every point, with a 10% margin.
pub fn points_view(points: &[C64]) -> Rect {
    if points.is_empty() {
        return Rect::centered(C64::new(0.0, 0.0), 1.0);
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    let half = 0.5 * (x1 - x0).max(y1 - y0).max(1e-9);
    Rect::centered(C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)), 1.1 * half)
}

struct Frame {
    view: Rect,
    scale: f64,
    ox: f64,
    oy: f64,
}

impl Frame {
    fn new(view: Rect, ox: f64, oy: f64) -> Self {
        let scale = PANEL_PX / view.width().max(view.height());
        Frame { view, scale, ox, oy }
    }

    fn x(&self, re: f64) -> f64 {
        self.ox + (re - self.view.x0) * self.scale
    }

    fn y(&self, im: f64) -> f64 {
        self.oy + (self.view.y1 - im) * self.scale
    }

    fn pt(&self, z: C64) -> (f64, f64) {
        (self.x(z.re), self.y(z.im))
    }
}

// Two decimals are ample at panel scale and keep output compact.
fn n(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn cells_path(frame: &Frame, region: &CellRegion) -> String {
    let g = &region.grid;
    let h = g.cell_size;
    let mut d = String::new();
    let mut members = region.members.clone();
    members.sort_unstable();
    let mut i = 0;
    while i < members.len() {
        let (row, col) = g.row_col(members[i]);
        let mut j = i + 1;
        while j < members.len() {
            let (r2, c2) = g.row_col(members[j]);
            if r2 != row || c2 != col + (j - i) {
                break;
            }
            j += 1;
        }
        let x0 = g.bounds.x0 + col as f64 * h;
        let y0 = g.bounds.y0 + row as f64 * h;
        let w = (j - i) as f64 * h * frame.scale;
        let hh = h * frame.scale;
        d.push_str(&format!(
            "M{} {}h{}v{}h{}z",
            n(frame.x(x0)),
            n(frame.y(y0)),
            n(w),
            n(-hh),
            n(-w)
        ));
        i = j;
    }
    d
}

fn points_attr(frame: &Frame, points: &[C64]) -> String {
    points
        .iter()
        .map(|&p| {
            let (x, y) = frame.pt(p);
            format!("{},{}", n(x), n(y))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn render_panel(panel: &Panel, ox: f64) -> Group {
    let frame = Frame::new(panel.view, ox, TITLE_PX);
    let mut g = Group::new().add(
        Rectangle::new()
            .set("x", n(ox))
            .set("y", n(TITLE_PX))
            .set("width", n(PANEL_PX))
            .set("height", n(PANEL_PX))
            .set("fill", "white")
            .set("stroke", "#999"),
    );
    g = g.add(
        Text::new(panel.title.clone())
            .set("x", n(ox + 4.0))
            .set("y", n(TITLE_PX - 6.0))
            .set("font-size", 12),
    );
    for item in &panel.items {
        g = match item {
            Item::Cells { region, fill } => g.add(
                Path::new()
                    .set("d", cells_path(&frame, region))
                    .set("fill", *fill)
                    .set("fill-opacity", "0.5")
                    .set("stroke", "none"),
            ),
            Item::Line { points, stroke } => g.add(
                SvgPolyline::new()
                    .set("points", points_attr(&frame, points))
                    .set("fill", "none")
                    .set("stroke", *stroke)
                    .set("stroke-width", "1.5"),
            ),
            Item::Disk { center, radius, stroke } => {
                let (x, y) = frame.pt(*center);
                g.add(
                    Circle::new()
                        .set("cx", n(x))
                        .set("cy", n(y))
                        .set("r", n(radius * frame.scale))
                        .set("fill", "none")
                        .set("stroke", *stroke),
                )
            }
            Item::Outline { rect, stroke } => g.add(
                Rectangle::new()
                    .set("x", n(frame.x(rect.x0)))
                    .set("y", n(frame.y(rect.y1)))
                    .set("width", n(rect.width() * frame.scale))
                    .set("height", n(rect.height() * frame.scale))
                    .set("fill", "none")
                    .set("stroke", *stroke)
                    .set("stroke-dasharray", "4 2"),
            ),
            Item::Marker { at, label, fill } => {
                let (x, y) = frame.pt(*at);
                let mut m = Group::new().add(
                    Circle::new()
                        .set("cx", n(x))
                        .set("cy", n(y))
                        .set("r", "4")
                        .set("fill", *fill),
                );
                if let Some(l) = label {
                    m = m
                        .add(Title::new(l.clone()))
                        .add(
                            Text::new(l.clone())
                                .set("x", n(x + 6.0))
                                .set("y", n(y - 6.0))
                                .set("font-size", 11),
                        );
                }
                g.add(m)
            }
            Item::Dots { points, fill } => {
                let mut d = String::new();
                for &p in points {
                    let (x, y) = frame.pt(p);
                    d.push_str(&format!("M{} {}h1v1h-1z", n(x), n(y)));
                }
                g.add(Path::new().set("d", d).set("fill", *fill))
            }
        };
    }
    g
}

pub fn render(figure: &Figure) -> String {
    let count = figure.panels.len().max(1) as f64;
    let width = count * PANEL_PX + (count + 1.0) * GAP_PX;
    let height = PANEL_PX + TITLE_PX + GAP_PX;
    let mut doc = Document::new()
        .set("width", n(width))
        .set("height", n(height))
        .set("viewBox", format!("0 0 {} {}", n(width), n(height)));
    for (i, panel) in figure.panels.iter().enumerate() {
        let ox = GAP_PX + i as f64 * (PANEL_PX + GAP_PX);
        doc = doc.add(render_panel(panel, ox));
    }
    let mut out = doc.to_string();
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use stoilow_core::region::Grid;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn row_runs_merge_into_one_path() {
        let g = Grid::new(Rect::new(0.0, 0.0, 4.0, 4.0).unwrap(), 1.0).unwrap();
        let region = CellRegion::from_cells(g, vec![0, 1, 2, 5, 6]);
        let frame = Frame::new(g.bounds, 0.0, 0.0);
        let d = cells_path(&frame, &region);
        assert_eq!(d.matches('M').count(), 2, "{d}");
    }

    #[test]
    fn rendering_is_byte_stable() {
        let fig = Figure {
            panels: vec![
                Panel::new("domain", Rect::centered(c(0.0, 0.0), 1.0))
                    .with(Item::Line {
                        points: vec![c(0.0, 0.0), c(0.5, 0.5)],
                        stroke: "black",
                    })
                    .with(Item::Marker {
                        at: c(0.0, 0.0),
                        label: Some("deg 2".into()),
                        fill: "red",
                    }),
                Panel::new("image", disk_view(c(0.0, 0.0), 0.25)).with(Item::Disk {
                    center: c(0.0, 0.0),
                    radius: 0.25,
                    stroke: "blue",
                }),
            ],
        };
        let a = render(&fig);
        assert_eq!(a, render(&fig));
        assert!(a.starts_with("<svg"));
        assert_eq!(a.matches("<g").count(), 3);
        assert!(a.contains("deg 2"));
    }

    #[test]
    fn y_axis_points_up() {
        let f = Frame::new(Rect::new(0.0, 0.0, 1.0, 1.0).unwrap(), 0.0, 0.0);
        assert!(f.y(1.0) < f.y(0.0));
    }
}
