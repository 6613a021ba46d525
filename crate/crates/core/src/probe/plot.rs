use std::fmt::Write;

use super::transition::{ProbeTrajectory, TransitionReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Accuracy-versus-layer line chart, one polyline per trajectory, with the
/// transition layer marked by a dashed line.
pub fn trajectory_svg(trajectories: &[ProbeTrajectory], transition: Option<&TransitionReport>) -> String {
    let layers: Vec<u16> = trajectories.iter().flat_map(|t| t.layers()).collect();
    let lo = layers.iter().copied().min().unwrap_or(0) as f64;
    let hi = (layers.iter().copied().max().unwrap_or(1) as f64).max(lo + 1.0);
    let px = |l: f64| MARGIN + (l - lo) / (hi - lo) * (WIDTH - 2.0 * MARGIN);
    let py = |a: f64| HEIGHT - MARGIN - a.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (px(lo), px(hi), py(0.0), py(1.0));
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#);
    for tick in 0..=4 {
        let a = tick as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{a:.2}</text>"#, x0 - 6.0, py(a) + 4.0);
    }
    let mut seen: Vec<u16> = layers.clone();
    seen.sort_unstable();
    seen.dedup();
    for l in seen {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{l}</text>"#, px(l as f64), y0 + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">layer</text>"#, (x0 + x1) / 2.0, HEIGHT - 10.0);
    let _ = writeln!(s, r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">AP@IoU50</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0);

    if let Some(l) = transition.and_then(|t| t.l_star) {
        let x = px(l as f64);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="gray" stroke-dasharray="4 4"/>"#);
    }
    for (i, t) in trajectories.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = t.points.iter().map(|p| format!("{:.2},{:.2}", px(p.layer_index as f64), py(p.ap50))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#, x1 - 100.0, y1 + 16.0 * i as f64, t.task);
    }
    s.push_str("</svg>\n");
    s
}
