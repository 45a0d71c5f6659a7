//! Static SVG line charts of `p_i(t)`.

use std::fmt::Write as _;

use crate::dynamics::FractionTable;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Step of roughly `span / target` rounded to 1, 2 or 5 times a power of ten.
fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let magnitude = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * magnitude)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * magnitude)
}

fn ticks(max: f64, target: usize) -> (f64, Vec<f64>) {
    let step = nice_step(max, target);
    let top = (max / step).ceil() * step;
    let count = (top / step).round() as usize;
    (top, (0..=count).map(|k| k as f64 * step).collect())
}

fn tick_label(value: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    };
    format!("{value:.decimals$}")
}

/// One polyline per region over the infected fractions of `table`.
pub fn line_chart(table: &FractionTable, title: &str) -> String {
    let t_min = table.times.first().copied().unwrap_or(0.0);
    let t_max = table.times.last().copied().unwrap_or(1.0);
    let p_max = table
        .p
        .iter()
        .flatten()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let (y_top, y_ticks) = ticks(if p_max > 0.0 { p_max } else { 1.0 }, 5);
    let (x_top, x_ticks) = ticks(if t_max > t_min { t_max - t_min } else { 1.0 }, 8);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + (t - t_min) / x_top * plot_w;
    let sy = |p: f64| TOP + (1.0 - p / y_top) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    let x_step = x_ticks.get(1).copied().unwrap_or(1.0);
    for &tick in &x_ticks {
        let x = sx(t_min + tick);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP,
            TOP + plot_h,
            TOP + plot_h + 18.0,
            tick_label(t_min + tick, x_step)
        );
    }
    let y_step = y_ticks.get(1).copied().unwrap_or(1.0);
    for &tick in &y_ticks {
        let y = sy(tick);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0,
            tick_label(tick, y_step)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">infected fraction</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for node in 0..table.n {
        let hue = (node as f64 * 360.0 / table.n.max(1) as f64).round();
        // Empty regions (NaN) split the line into segments.
        let mut segments: Vec<Vec<String>> = vec![Vec::new()];
        for (t, row) in table.times.iter().zip(&table.p) {
            let p = row[node];
            if p.is_finite() {
                segments
                    .last_mut()
                    .expect("non-empty")
                    .push(format!("{:.2},{:.2}", sx(*t), sy(p)));
            } else if !segments.last().expect("non-empty").is_empty() {
                segments.push(Vec::new());
            }
        }
        for points in segments.iter().filter(|s| !s.is_empty()) {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="hsl({hue},70%,45%)" stroke-width="1.2" points="{}"><title>p_{}</title></polyline>"#,
                points.join(" "),
                node + 1
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
