//! Minimal SVG rendering for sweeps, selection histograms and schedule
//! Gantt charts.

use std::fmt::Write as _;

use crate::corpus::ComparisonReport;
use crate::geometry::GridRatio;
use crate::sched::{Resource, Schedule};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 4] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Grouped bar chart: one group per label, one bar per series.
pub fn bar_chart(title: &str, y_label: &str, labels: &[String], series: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0, f64::max)
        .max(1e-9);
    let group_w = plot_w / labels.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let base_y = HEIGHT - MARGIN;
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{base_y}" x2="{}" y2="{base_y}" stroke="black"/>"#,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{base_y}" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{:.0}</text>"#,
        MARGIN - 4.0,
        MARGIN + 4.0,
        max
    );
    for (i, label) in labels.iter().enumerate() {
        let gx = MARGIN + i as f64 * group_w + group_w * 0.1;
        for (s, (_, values)) in series.iter().enumerate() {
            let v = values.get(i).copied().unwrap_or(0.0);
            let h = plot_h * v / max;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{:.3}</title></rect>"#,
                gx + s as f64 * bar_w,
                base_y - h,
                bar_w,
                h,
                PALETTE[s % PALETTE.len()],
                v
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            gx + group_w * 0.4,
            base_y + 16.0,
            escape(label)
        );
    }
    for (s, (name, _)) in series.iter().enumerate() {
        let y = MARGIN + 14.0 * s as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/>"#,
            WIDTH - MARGIN - 110.0,
            y - 9.0,
            PALETTE[s % PALETTE.len()]
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}">{}</text>"#,
            WIDTH - MARGIN - 95.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Selected-grid histogram per method.
pub fn selection_histogram(report: &ComparisonReport) -> String {
    let mut grids: Vec<GridRatio> = report.histograms.values().flatten().map(|b| b.grid).collect();
    grids.sort_by_key(|g| (g.area(), g.m));
    grids.dedup();
    let labels: Vec<String> = grids.iter().map(ToString::to_string).collect();
    let series: Vec<(String, Vec<f64>)> = report
        .histograms
        .iter()
        .map(|(method, bins)| {
            let values = grids
                .iter()
                .map(|g| bins.iter().find(|b| b.grid == *g).map_or(0.0, |b| b.count as f64))
                .collect();
            (method.clone(), values)
        })
        .collect();
    bar_chart("Selected grid per method", "images", &labels, &series)
}

/// Single-series bar chart of a sweep.
pub fn sweep_chart<T: ToString>(title: &str, y_label: &str, ranked: &[(T, f64)]) -> String {
    let labels: Vec<String> = ranked.iter().map(|(k, _)| k.to_string()).collect();
    let values = ranked.iter().map(|(_, v)| *v).collect();
    bar_chart(title, y_label, &labels, &[("latency".to_string(), values)])
}

/// Gantt chart with one lane per resource.
pub fn gantt(title: &str, schedule: &Schedule) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let lanes = [Resource::Cpu, Resource::Npu, Resource::User];
    let span = schedule.makespan_ms.max(1e-9);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let lane_h = (HEIGHT - 2.0 * MARGIN) / lanes.len() as f64;
    for (i, lane) in lanes.iter().enumerate() {
        let y = MARGIN + i as f64 * lane_h;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            y + lane_h / 2.0,
            lane.name()
        );
        for e in schedule.events_on(*lane) {
            let x = MARGIN + plot_w * e.start_ms / span;
            let w = (plot_w * e.duration() / span).max(0.5);
            let color = PALETTE[e.stage.len() % PALETTE.len()];
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{color}" stroke="white"><title>{} {:.1}-{:.1} ms</title></rect>"#,
                y + 4.0,
                lane_h - 8.0,
                escape(&e.stage),
                e.start_ms,
                e.end_ms
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{:.0} ms</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 18.0,
        schedule.makespan_ms
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_well_formed() {
        let svg = sweep_chart("batch <sweep>", "ms", &[(1usize, 10.0), (2, 5.0)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("batch &lt;sweep&gt;"));
        assert_eq!(svg.matches("<rect").count(), 1 + 2 + 1);
    }
}
