//! Static SVG chart of a simulated fundamental diagram.
//!
//! Gray dots are congested samples, green diamonds are free-flow samples, the
//! red polyline is the sample mean and the blue polyline the deterministic curve.

use std::fmt::Write;

use crate::experiments::diagram::DiagramScan;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

struct Frame {
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + v / self.x_max * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - v / self.y_max * (HEIGHT - 2.0 * MARGIN)
    }
}

fn polyline(out: &mut String, frame: &Frame, pts: impl Iterator<Item = (f64, f64)>, colour: &str) {
    let coords: Vec<String> = pts.map(|(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y))).collect();
    if coords.is_empty() {
        return;
    }
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
        coords.join(" ")
    );
}

/// Render `scan` as flow against concentration. An empty scan gives axes only.
pub fn render_diagram(scan: &DiagramScan, title: &str) -> String {
    let x_max = scan.points.iter().map(|p| p.k).fold(0.0, f64::max);
    let y_max = scan
        .samples()
        .map(|(_, s)| s.q)
        .chain(scan.points.iter().map(|p| p.q_det))
        .fold(0.0, f64::max);
    let frame = Frame {
        x_max: if x_max > 0.0 { x_max * 1.05 } else { 1.0 },
        y_max: if y_max > 0.0 { y_max * 1.05 } else { 1.0 },
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(out, r#"<g id="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (tx, ty) = (frame.x(f * frame.x_max), frame.y(f * frame.y_max));
        let _ = writeln!(out, r#"<line x1="{tx:.2}" y1="{y0}" x2="{tx:.2}" y2="{}"/>"#, y0 + 4.0);
        let _ = writeln!(out, r#"<line x1="{}" y1="{ty:.2}" x2="{x0}" y2="{ty:.2}"/>"#, x0 - 4.0);
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="10">"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.0}</text>"#,
            frame.x(f * frame.x_max),
            y0 + 16.0,
            f * frame.x_max
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{:.0}</text>"#,
            x0 - 6.0,
            frame.y(f * frame.y_max) + 3.0,
            f * frame.y_max
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">concentration k</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">flow q</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r##"<g id="samples" fill="#999999">"##);
    for (p, s) in scan.samples().filter(|(_, s)| !s.is_free_flow) {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.6"/>"#, frame.x(p.k), frame.y(s.q));
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g id="free-flow" fill="#2ca02c">"##);
    for (p, s) in scan.samples().filter(|(_, s)| s.is_free_flow) {
        let (cx, cy) = (frame.x(p.k), frame.y(s.q));
        let _ = writeln!(
            out,
            r#"<path d="M{:.2},{:.2} l2.5,2.5 l-2.5,2.5 l-2.5,-2.5 z"/>"#,
            cx,
            cy - 2.5
        );
    }
    let _ = writeln!(out, "</g>");
    polyline(&mut out, &frame, scan.points.iter().map(|p| (p.k, p.q_det)), "blue");
    polyline(&mut out, &frame, scan.points.iter().map(|p| (p.k, p.q_mean)), "red");
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::diagram::{fundamental_diagram_scan, DiagramConfig};
    use crate::model::ModelParams;
    use crate::sde::SimConfig;

    fn scan(sigma: f64) -> DiagramScan {
        fundamental_diagram_scan(
            &ModelParams::default().with_sigma(sigma),
            &[5.0, 20.0, 120.0, 140.0],
            &DiagramConfig { sims_per_n: 3, ..Default::default() },
            &SimConfig::with_horizon(27.0),
        )
        .unwrap()
    }

    #[test]
    fn renders_all_layers() {
        let svg = render_diagram(&scan(1.0), "a < b");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(r#"stroke="red""#) && svg.contains(r#"stroke="blue""#));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("<circle") || svg.contains("<path d="));
        assert_eq!(svg, render_diagram(&scan(1.0), "a < b"));
    }

    #[test]
    fn noise_free_mean_sits_on_the_deterministic_curve() {
        let svg = render_diagram(&scan(0.0), "");
        let lines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
        let points = |l: &str| l.split("points=\"").nth(1).unwrap().to_owned();
        assert_eq!(points(lines[0]), points(lines[1]));
    }

    #[test]
    fn empty_scan_gives_axes_only() {
        let mut s = scan(1.0);
        s.points.clear();
        let svg = render_diagram(&s, "empty");
        assert!(svg.contains(r#"id="axes""#));
        assert!(!svg.contains("<polyline") && !svg.contains("<circle"));
    }
}
