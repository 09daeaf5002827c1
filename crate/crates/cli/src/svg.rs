//! Minimal SVG rendering of a decision grid.

use std::fmt::Write;

use turnpike::{Dataset, Decision, GridPoint};

fn color(decision: Decision) -> &'static str {
    match decision {
        Decision::Class(1) => "#f4a6a6",
        Decision::Class(2) => "#a6c8f4",
        Decision::Class(_) => "#c8f4a6",
        Decision::Reject => "#ffffff",
    }
}

/// Renders grid cells as rectangles and optionally overlays dataset points.
pub fn render(grid: &[GridPoint], lo: f64, hi: f64, res: usize, data: Option<&Dataset>) -> String {
    const SIZE: f64 = 600.0;
    let scale = SIZE / (hi - lo);
    let cell = SIZE / res as f64;
    let px = |x: f64| (x - lo) * scale;
    let py = |y: f64| SIZE - (y - lo) * scale;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    for p in grid {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            px(p.x) - cell / 2.0,
            py(p.y) - cell / 2.0,
            cell,
            cell,
            color(p.decision)
        );
    }
    if let Some(data) = data {
        for i in 0..data.len() {
            let (x, label) = data.sample(i);
            let fill = if label == 1 { "#c00000" } else { "#0040c0" };
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{fill}"/>"#,
                px(x[0]),
                py(x[1])
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
