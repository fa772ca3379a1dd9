use std::fmt::Write as _;
use std::io::{Read, Write};

use super::{ConnectivityTimeline, NeuronSnapshot};
use crate::agents::NetworkKind;
use crate::error::{Error, Result};

pub const TIMELINE_HEADER: [&str; 4] = ["step", "relevant_mean", "noise_mean", "network"];
pub const SNAPSHOT_HEADER: [&str; 4] = ["step", "neuron_index", "count", "is_relevant"];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(format!("{other:?}")),
    }
}

fn network_from_name(name: &str) -> Result<NetworkKind> {
    NetworkKind::ALL
        .iter()
        .copied()
        .find(|k| k.name() == name)
        .ok_or_else(|| Error::format(format!("unknown network tag {name:?}")))
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::format(format!("bad {what} value {field:?}")))
}

/// Timeline rows grouped by network; an absent noise mean is an empty field.
pub fn write_timeline_csv<W: Write>(out: W, timelines: &[ConnectivityTimeline]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIMELINE_HEADER).map_err(csv_err)?;
    for tl in timelines {
        for i in 0..tl.len() {
            let noise = tl.noise_mean[i].map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                tl.steps[i].to_string(),
                tl.relevant_mean[i].to_string(),
                noise,
                tl.network.name().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_timeline_csv<R: Read>(input: R) -> Result<Vec<ConnectivityTimeline>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(TIMELINE_HEADER) {
        return Err(Error::format(format!("unexpected timeline header {header:?}")));
    }
    let mut out: Vec<ConnectivityTimeline> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let network = network_from_name(&rec[3])?;
        let noise = if rec[2].is_empty() {
            None
        } else {
            Some(parse(&rec[2], "noise_mean")?)
        };
        let idx = match out.iter().position(|t| t.network == network) {
            Some(i) => i,
            None => {
                out.push(ConnectivityTimeline::new(network));
                out.len() - 1
            }
        };
        out[idx].push(parse(&rec[0], "step")?, parse(&rec[1], "relevant_mean")?, noise);
    }
    Ok(out)
}

/// Snapshots of a single network, one row per input neuron.
pub fn write_snapshot_csv<W: Write>(out: W, snapshots: &[NeuronSnapshot]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SNAPSHOT_HEADER).map_err(csv_err)?;
    for s in snapshots {
        for (i, c) in s.counts.iter().enumerate() {
            w.write_record([
                s.step.to_string(),
                i.to_string(),
                c.to_string(),
                u8::from(s.is_relevant(i)).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot_csv<R: Read>(input: R, network: NetworkKind) -> Result<Vec<NeuronSnapshot>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(SNAPSHOT_HEADER) {
        return Err(Error::format(format!("unexpected snapshot header {header:?}")));
    }
    let mut out: Vec<NeuronSnapshot> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let step: u64 = parse(&rec[0], "step")?;
        let neuron: usize = parse(&rec[1], "neuron_index")?;
        let count: usize = parse(&rec[2], "count")?;
        let relevant = match &rec[3] {
            "1" => true,
            "0" => false,
            other => return Err(Error::format(format!("bad is_relevant value {other:?}"))),
        };
        let start_new = out
            .last()
            .is_none_or(|s| s.step != step || neuron == 0);
        if start_new {
            out.push(NeuronSnapshot {
                network,
                step,
                counts: Vec::new(),
                relevant: Vec::new(),
            });
        }
        let s = out.last_mut().expect("pushed above");
        if neuron != s.counts.len() {
            return Err(Error::format(format!(
                "snapshot rows for step {step} are not in neuron order"
            )));
        }
        s.counts.push(count);
        if relevant {
            s.relevant.push(neuron);
        }
    }
    Ok(out)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Frame {
            x: range(&mut xs.clone()),
            y: range(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open_svg(title: &str, frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" text-anchor="start">{}</text>"#, y0 + 16.0, fmt(frame.x.0));
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#, y0 + 16.0, fmt(frame.x.1));
    let _ = writeln!(s, r#"<text x="{}" y="{y0}" text-anchor="end">{}</text>"#, x0 - 4.0, fmt(frame.y.0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 4.0, y1 + 8.0, fmt(frame.y.1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 8.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    s
}

fn fmt(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(frame: &Frame, points: &[(f64, f64)], color: &str, label: &str) -> String {
    let pts: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
        .collect();
    format!(
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
        pts.join(" "),
        escape(label)
    ) + "\n"
}

fn legend(labels: &[(String, &str)]) -> String {
    let mut s = String::new();
    for (i, (label, color)) in labels.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let x = WIDTH - MARGIN - 150.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(label));
    }
    s
}

/// Line chart with one polyline per series: relevant and noise means of
/// every timeline.
pub fn timeline_svg(timelines: &[ConnectivityTimeline]) -> String {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for tl in timelines {
        let xs = tl.steps.iter().map(|&s| s as f64);
        series.push((
            format!("{} relevant", tl.network.name()),
            xs.clone().zip(tl.relevant_mean.iter().copied()).collect(),
        ));
        if tl.noise_mean.iter().any(Option::is_some) {
            series.push((
                format!("{} noise", tl.network.name()),
                xs.zip(&tl.noise_mean)
                    .filter_map(|(x, n)| n.map(|v| (x, v)))
                    .collect(),
            ));
        }
    }
    line_chart("Input-layer connections per feature", "environment step", "mean connections", &series)
}

/// Mean return curves, each optionally with a confidence band drawn as a
/// translucent polygon.
pub fn learning_curve_svg(steps: &[u64], curves: &[(String, Vec<f64>, Option<Vec<f64>>)]) -> String {
    let xs: Vec<f64> = steps.iter().map(|&s| s as f64).collect();
    let mut ys: Vec<f64> = Vec::new();
    for (_, mean, hw) in curves {
        for (i, m) in mean.iter().enumerate() {
            let h = hw.as_ref().map_or(0.0, |h| h[i]);
            ys.push(m - h);
            ys.push(m + h);
        }
    }
    let frame = Frame::new(xs.iter().copied(), ys.iter().copied());
    let mut s = open_svg("Evaluation return", &frame, "environment step", "return");
    let mut labels = Vec::new();
    for (i, (label, mean, hw)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some(hw) = hw {
            let upper = xs.iter().zip(mean.iter().zip(hw)).map(|(&x, (m, h))| (x, m + h));
            let lower = xs.iter().zip(mean.iter().zip(hw)).rev().map(|(&x, (m, h))| (x, m - h));
            let pts: Vec<String> = upper
                .chain(lower)
                .map(|(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
                .collect();
            let _ = writeln!(s, r#"<polygon fill="{color}" fill-opacity="0.2" stroke="none" points="{}"/>"#, pts.join(" "));
        }
        let pts: Vec<(f64, f64)> = xs.iter().copied().zip(mean.iter().copied()).collect();
        s.push_str(&polyline(&frame, &pts, color, label));
        labels.push((label.clone(), color));
    }
    s.push_str(&legend(&labels));
    s.push_str("</svg>\n");
    s
}

fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let frame = Frame::new(all.clone().map(|p| p.0), all.map(|p| p.1));
    let mut s = open_svg(title, &frame, x_label, y_label);
    let mut labels = Vec::new();
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        s.push_str(&polyline(&frame, pts, color, label));
        labels.push((label.clone(), color));
    }
    s.push_str(&legend(&labels));
    s.push_str("</svg>\n");
    s
}

/// Bar chart of connections per input neuron; relevant neurons in red.
pub fn snapshot_svg(snapshot: &NeuronSnapshot) -> String {
    let n = snapshot.counts.len().max(1);
    let max = snapshot.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame {
        x: (0.0, n as f64),
        y: (0.0, max),
    };
    let title = format!("{} input neurons at step {}", snapshot.network.name(), snapshot.step);
    let mut s = open_svg(&title, &frame, "input neuron", "connections");
    let bar = (WIDTH - 2.0 * MARGIN) / n as f64;
    for (i, &c) in snapshot.counts.iter().enumerate() {
        let color = if snapshot.is_relevant(i) { PALETTE[1] } else { PALETTE[0] };
        let top = frame.py(c as f64);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            frame.px(i as f64),
            (bar * 0.9).max(0.5),
            frame.py(0.0) - top
        );
    }
    s.push_str(&legend(&[("relevant".into(), PALETTE[1]), ("noise".into(), PALETTE[0])]));
    s.push_str("</svg>\n");
    s
}
