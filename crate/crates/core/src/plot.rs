//! CSV and SVG output for learning curves and relative trajectories.
//!
//! SVG elements carry `class` attributes (`curve`, `band`, `origin`,
//! `red-trace`, `zone-trace`) so that figures can be checked structurally.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::learner::EvalReport;
use crate::orchestrator::EpisodeRecord;
use crate::sim::{EntityId, Event, Vec2};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

/// Maps data coordinates onto the plot area (y up).
#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut f = Frame { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for (x, y) in points {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            return Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        }
        if f.x1 - f.x0 < 1e-9 {
            f.x0 -= 0.5;
            f.x1 += 0.5;
        }
        if f.y1 - f.y0 < 1e-9 {
            f.y0 -= 0.5;
            f.y1 += 0.5;
        }
        f
    }

    /// Same scale on both axes, centered on the data.
    fn square(self) -> Self {
        let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let scale = ((self.x1 - self.x0) / w).max((self.y1 - self.y0) / h);
        let (cx, cy) = ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0);
        Frame { x0: cx - scale * w / 2.0, x1: cx + scale * w / 2.0, y0: cy - scale * h / 2.0, y1: cy + scale * h / 2.0 }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let u = MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN);
        let v = HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN);
        (u, v)
    }

    fn points(&self, pts: impl Iterator<Item = (f64, f64)>) -> String {
        let mut s = String::new();
        for (x, y) in pts {
            let (u, v) = self.px(x, y);
            let _ = write!(s, "{}{u:.2},{v:.2}", if s.is_empty() { "" } else { " " });
        }
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <title>{}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        escape(title)
    )
}

fn axes(svg: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, b) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        "<g class=\"axes\" stroke=\"#333\"><line x1=\"{l}\" y1=\"{b}\" x2=\"{}\" y2=\"{b}\"/><line x1=\"{l}\" y1=\"{b}\" x2=\"{l}\" y2=\"{MARGIN}\"/></g>",
        WIDTH - MARGIN
    );
    let _ = writeln!(svg, "<text x=\"{l}\" y=\"{}\">{:.4}</text>", b + 16.0, f.x0);
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4}</text>", WIDTH - MARGIN, b + 16.0, f.x1);
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{b}\" text-anchor=\"end\">{:.4}</text>", l - 4.0, f.y0);
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{MARGIN}\" text-anchor=\"end\">{:.4}</text>", l - 4.0, f.y1);
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", WIDTH / 2.0, HEIGHT - 12.0, escape(xlabel));
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

/// Mean and population standard deviation across seeds at one evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub episode: u64,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

/// Aggregates per-seed reports into one curve. Episodes missing from some
/// seeds are averaged over the seeds that have them.
pub fn aggregate_curve(reports: &[EvalReport]) -> Vec<CurvePoint> {
    let mut by_ep: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for p in &r.points {
            by_ep.entry(p.episode).or_default().push(p.success_rate);
        }
    }
    by_ep
        .into_iter()
        .map(|(episode, xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            CurvePoint { episode, mean, std: var.sqrt(), seeds: xs.len() }
        })
        .collect()
}

/// `label,seed,episode,success_rate` for every evaluation point.
pub fn curves_csv(runs: &[(String, Vec<EvalReport>)]) -> String {
    let mut out = String::from("label,seed,episode,success_rate\n");
    for (label, reports) in runs {
        for r in reports {
            for p in &r.points {
                let _ = writeln!(out, "{label},{},{},{}", r.seed, p.episode, p.success_rate);
            }
        }
    }
    out
}

/// Success rate against training episodes: one mean line per label with a
/// ±1 std band across seeds.
pub fn curves_svg(runs: &[(String, Vec<EvalReport>)]) -> String {
    let curves: Vec<(&str, Vec<CurvePoint>)> = runs.iter().map(|(l, r)| (l.as_str(), aggregate_curve(r))).collect();
    let mut f = Frame::fit(curves.iter().flat_map(|(_, c)| c.iter().map(|p| (p.episode as f64, p.mean))));
    f.y0 = 0.0;
    f.y1 = 1.0;
    let mut svg = svg_open("Success rate during training");
    axes(&mut svg, &f, "training episode", "success rate");
    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = curve.iter().map(|p| (p.episode as f64, (p.mean + p.std).min(1.0)));
        let lower = curve.iter().rev().map(|p| (p.episode as f64, (p.mean - p.std).max(0.0)));
        let _ = writeln!(
            svg,
            "<polygon class=\"band\" data-label=\"{}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\" points=\"{}\"/>",
            escape(label),
            f.points(upper.chain(lower))
        );
        let _ = writeln!(
            svg,
            "<polyline class=\"curve\" data-label=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            escape(label),
            f.points(curve.iter().map(|p| (p.episode as f64, p.mean)))
        );
        let y = MARGIN + 8.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<g class=\"legend\"><line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\">{}</text></g>",
            WIDTH - MARGIN - 110.0,
            WIDTH - MARGIN - 90.0,
            WIDTH - MARGIN - 84.0,
            y + 4.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Red and zone positions relative to the blue UAV that neutralized the
/// red, sampled at every step of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeTrajectory {
    pub label: String,
    pub blue: EntityId,
    pub red: EntityId,
    pub red_trace: Vec<Vec2>,
    pub zone_trace: Vec<Vec2>,
}

/// `None` unless the episode ended with a neutralization.
pub fn relative_trajectory(record: &EpisodeRecord, label: impl Into<String>) -> Option<RelativeTrajectory> {
    let (blue, red) = record.steps.iter().rev().flat_map(|s| &s.events).find_map(|e| match e {
        Event::Neutralization { by, target, .. } => Some((*by, *target)),
        _ => None,
    })?;
    let tracks = record.tracks();
    let (b, r) = (tracks.get(&blue)?, tracks.get(&red)?);
    let zone = record.header.config.zone.center;
    Some(RelativeTrajectory {
        label: label.into(),
        blue,
        red,
        red_trace: b.iter().zip(r).map(|(b, r)| *r - *b).collect(),
        zone_trace: b.iter().map(|b| zone - *b).collect(),
    })
}

/// Relative trajectories for every neutralization in `records`, labelled by
/// position in the input. Episodes without one are skipped.
pub fn relative_trajectories(records: &[EpisodeRecord]) -> Vec<RelativeTrajectory> {
    records.iter().enumerate().filter_map(|(i, r)| relative_trajectory(r, format!("episode {}", i + 1))).collect()
}

/// `trace,t,x,y` rows; `trace` is `<label>/red` or `<label>/zone`.
pub fn trajectories_csv(trajs: &[RelativeTrajectory]) -> String {
    let mut out = String::from("trace,t,x,y\n");
    for tr in trajs {
        for (kind, pts) in [("red", &tr.red_trace), ("zone", &tr.zone_trace)] {
            for (t, p) in pts.iter().enumerate() {
                let _ = writeln!(out, "{}/{kind},{t},{},{}", tr.label, p.x, p.y);
            }
        }
    }
    out
}

fn star(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|k| {
            let rad = if k % 2 == 0 { r } else { r * 0.45 };
            let a = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
            format!("{:.2},{:.2}", cx + rad * a.cos(), cy + rad * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Overlaid relative trajectories: a blue star at the origin, one red trace
/// and one dashed zone trace per episode. Red traces end at a cross.
pub fn trajectories_svg(trajs: &[RelativeTrajectory]) -> String {
    let all = trajs.iter().flat_map(|t| t.red_trace.iter().chain(&t.zone_trace)).map(|p| (p.x, p.y));
    let f = Frame::fit(all.chain([(0.0, 0.0)])).square();
    let mut svg = svg_open("Trajectories relative to the neutralizing blue UAV");
    axes(&mut svg, &f, "x relative to blue (m)", "y relative to blue (m)");
    for (i, tr) in trajs.iter().enumerate() {
        let shade = 0.45 + 0.55 * (i as f64 + 1.0) / trajs.len() as f64;
        let _ = writeln!(
            svg,
            "<polyline class=\"zone-trace\" data-episode=\"{}\" fill=\"none\" stroke=\"#2ca02c\" stroke-opacity=\"{shade:.2}\" stroke-dasharray=\"4 3\" points=\"{}\"/>",
            escape(&tr.label),
            f.points(tr.zone_trace.iter().map(|p| (p.x, p.y)))
        );
        let _ = writeln!(
            svg,
            "<polyline class=\"red-trace\" data-episode=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-opacity=\"{shade:.2}\" stroke-width=\"1.5\" points=\"{}\"/>",
            escape(&tr.label),
            f.points(tr.red_trace.iter().map(|p| (p.x, p.y)))
        );
        if let Some(end) = tr.red_trace.last() {
            let (u, v) = f.px(end.x, end.y);
            let _ = writeln!(
                svg,
                "<path class=\"red-end\" stroke=\"#d62728\" d=\"M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}\"/>",
                u - 4.0,
                v - 4.0,
                u + 4.0,
                v + 4.0,
                u - 4.0,
                v + 4.0,
                u + 4.0,
                v - 4.0
            );
        }
    }
    let (ou, ov) = f.px(0.0, 0.0);
    let _ = writeln!(svg, "<polygon class=\"origin\" fill=\"#1f77b4\" points=\"{}\"/>", star(ou, ov, 9.0));
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::EvalPoint;

    fn report(seed: u64, rates: &[f64]) -> EvalReport {
        EvalReport {
            seed,
            points: rates.iter().enumerate().map(|(i, &r)| EvalPoint { episode: 100 * (i as u64 + 1), success_rate: r }).collect(),
        }
    }

    #[test]
    fn aggregate_averages_over_seeds() {
        let c = aggregate_curve(&[report(1, &[0.2, 0.6]), report(2, &[0.4, 1.0])]);
        assert_eq!(c.len(), 2);
        assert!((c[0].mean - 0.3).abs() < 1e-12 && (c[0].std - 0.1).abs() < 1e-12);
        assert!((c[1].mean - 0.8).abs() < 1e-12 && (c[1].std - 0.2).abs() < 1e-12);
    }

    #[test]
    fn curves_have_one_line_per_label() {
        let runs = vec![("plain".to_string(), vec![report(1, &[0.1, 0.5])]), ("ph".to_string(), vec![report(1, &[0.3, 0.9])])];
        let svg = curves_svg(&runs);
        assert_eq!(svg.matches("class=\"curve\"").count(), 2);
        assert_eq!(curves_csv(&runs).lines().count(), 5);
    }

    #[test]
    fn origin_maps_inside_plot() {
        let f = Frame::fit([(-100.0, 20.0), (300.0, 50.0), (0.0, 0.0)].into_iter()).square();
        let (u, v) = f.px(0.0, 0.0);
        assert!((MARGIN..=WIDTH - MARGIN).contains(&u) && (MARGIN..=HEIGHT - MARGIN).contains(&v));
    }
}
