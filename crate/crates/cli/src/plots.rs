//! Plot emission: accuracy curve, pseudo-label-vs-true marginal bars and
//! confidence histograms, written as self-contained SVG files.

use std::path::{Path, PathBuf};

use rda_core::error::{Error, Result};
use rda_core::trainer::RunMetrics;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const HIST_BINS: usize = 20;

struct Svg {
    body: String,
}

impl Svg {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        body.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        body.push_str(&format!(
            "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
        ));
        body.push_str(&format!(
            "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" \
             text-anchor=\"middle\">{title}</text>\n",
            WIDTH / 2.0
        ));
        Svg { body }
    }

    fn plot_area(&self) -> (f64, f64, f64, f64) {
        (
            MARGIN_LEFT,
            MARGIN_TOP,
            WIDTH - MARGIN_RIGHT,
            HEIGHT - MARGIN_BOTTOM,
        )
    }

    fn axes(&mut self, xlabel: &str, ylabel: &str) {
        let (x0, y0, x1, y1) = self.plot_area();
        self.body.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y1}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"black\"/>\n\
             <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
        ));
        self.body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">{xlabel}</text>\n",
            (x0 + x1) / 2.0,
            HEIGHT - 12.0
        ));
        self.body.push_str(&format!(
            "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{ylabel}</text>\n",
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0
        ));
    }

    fn y_ticks(&mut self, max: f64) {
        let (x0, y0, _, y1) = self.plot_area();
        for k in 0..=4 {
            let frac = k as f64 / 4.0;
            let y = y1 - frac * (y1 - y0);
            let value = frac * max;
            self.body.push_str(&format!(
                "<line x1=\"{}\" y1=\"{y}\" x2=\"{x0}\" y2=\"{y}\" stroke=\"black\"/>\n\
                 <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
                 text-anchor=\"end\">{value:.2}</text>\n",
                x0 - 4.0,
                x0 - 7.0,
                y + 3.5
            ));
        }
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        let (x0, y0, _, _) = self.plot_area();
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = y0 + 14.0 * i as f64 + 4.0;
            self.body.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\" \
                 fill-opacity=\"0.7\"/>\n\
                 <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n",
                x0 + 8.0,
                y - 8.0,
                x0 + 22.0,
                y + 1.0
            ));
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Accuracy versus epoch; a lone point becomes a marker.
pub fn accuracy_svg(metrics: &RunMetrics) -> Result<String> {
    if metrics.records.is_empty() {
        return Err(Error::Usage("no epochs to plot".into()));
    }
    let mut svg = Svg::new("Test accuracy");
    svg.axes("epoch", "accuracy");
    svg.y_ticks(1.0);
    let (x0, y0, x1, y1) = svg.plot_area();
    let max_epoch = metrics.records.last().unwrap().epoch.max(1) as f64;
    let map = |epoch: usize, acc: f64| {
        (
            x0 + (epoch as f64 / max_epoch) * (x1 - x0),
            y1 - acc.clamp(0.0, 1.0) * (y1 - y0),
        )
    };
    if metrics.records.len() == 1 {
        let r = &metrics.records[0];
        let (cx, cy) = map(r.epoch, r.accuracy);
        svg.body.push_str(&format!(
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"4\" fill=\"#1f6fb2\"/>\n"
        ));
    } else {
        let points: Vec<String> = metrics
            .records
            .iter()
            .map(|r| {
                let (x, y) = map(r.epoch, r.accuracy);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        svg.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\"/>\n",
            points.join(" ")
        ));
    }
    Ok(svg.finish())
}

/// Final pseudo-label marginal next to the true unlabeled marginal.
pub fn marginal_svg(metrics: &RunMetrics) -> Result<String> {
    let last = metrics
        .records
        .last()
        .ok_or_else(|| Error::Usage("no epochs to plot".into()))?;
    let pseudo = last.pseudo_label_marginal.values();
    let truth = metrics.true_unlabeled_marginal.values();
    let n = pseudo.len();
    let max = pseudo
        .iter()
        .chain(truth)
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-9);

    let mut svg = Svg::new("Pseudo-label marginal vs true unlabeled marginal");
    svg.axes("class", "probability");
    svg.y_ticks(max);
    svg.legend(&[("pseudo-labels", "#1f6fb2"), ("true marginal", "#d08a18")]);
    let (x0, y0, x1, y1) = svg.plot_area();
    let group = (x1 - x0) / n as f64;
    let bar = group * 0.38;
    for c in 0..n {
        let gx = x0 + c as f64 * group;
        for (k, (value, color)) in [(pseudo[c], "#1f6fb2"), (truth[c], "#d08a18")]
            .iter()
            .enumerate()
        {
            let h = (value / max) * (y1 - y0);
            let x = gx + group * 0.1 + k as f64 * bar;
            svg.body.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{bar:.2}\" height=\"{h:.2}\" \
                 fill=\"{color}\" fill-opacity=\"0.8\"/>\n",
                y1 - h
            ));
        }
        svg.body.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{c}</text>\n",
            gx + group / 2.0,
            y1 + 14.0
        ));
    }
    Ok(svg.finish())
}

/// 20-bin confidence histograms, split by prediction correctness.
pub fn confidence_svg(metrics: &RunMetrics) -> Result<String> {
    if metrics.records.is_empty() {
        return Err(Error::Usage("no epochs to plot".into()));
    }
    let mut correct = [0usize; HIST_BINS];
    let mut wrong = [0usize; HIST_BINS];
    for &(confidence, ok) in &metrics.final_confidences {
        let bin = ((confidence * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        if ok {
            correct[bin] += 1;
        } else {
            wrong[bin] += 1;
        }
    }
    let max = correct
        .iter()
        .chain(wrong.iter())
        .cloned()
        .max()
        .unwrap_or(0)
        .max(1) as f64;

    let mut svg = Svg::new("Prediction confidence (final epoch)");
    svg.axes("max predicted probability", "count");
    svg.y_ticks(max);
    svg.legend(&[("correct", "#2a8f4e"), ("false", "#c23b3b")]);
    let (x0, y0, x1, y1) = svg.plot_area();
    let bin_w = (x1 - x0) / HIST_BINS as f64;
    for b in 0..HIST_BINS {
        let x = x0 + b as f64 * bin_w;
        for (count, color) in [(correct[b], "#2a8f4e"), (wrong[b], "#c23b3b")] {
            if count == 0 {
                continue;
            }
            let h = (count as f64 / max) * (y1 - y0);
            svg.body.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" \
                 fill=\"{color}\" fill-opacity=\"0.55\"/>\n",
                x + 1.0,
                y1 - h,
                bin_w - 2.0
            ));
        }
    }
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        svg.body.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{frac:.2}</text>\n",
            x0 + frac * (x1 - x0),
            y1 + 14.0
        ));
    }
    Ok(svg.finish())
}

/// Writes the three plots into `out_dir`, returning the created paths.
pub fn emit_plots(metrics: &RunMetrics, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if metrics.records.is_empty() {
        return Err(Error::Usage("cannot plot empty metrics".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let files = [
        ("accuracy.svg", accuracy_svg(metrics)?),
        ("marginal.svg", marginal_svg(metrics)?),
        ("confidence.svg", confidence_svg(metrics)?),
    ];
    let mut paths = Vec::new();
    for (name, content) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rda_core::probvec::ProbVec;
    use rda_core::trainer::EpochRecord;

    fn metrics(epochs: usize) -> RunMetrics {
        let records = (0..epochs)
            .map(|e| EpochRecord {
                epoch: e,
                accuracy: 0.5 + 0.1 * e as f64,
                loss_total: 1.0,
                loss_sd: 0.5,
                loss_sa: 0.2,
                loss_cd: 0.2,
                loss_ca: 0.1,
                pseudo_label_marginal: ProbVec::normalize(&[1.0, 2.0]).unwrap(),
                marginal_tv: 0.1,
                expected_pred_entropy: 0.6,
                mean_pred_entropy: 0.5,
                mutual_info_proxy: 0.1,
                mask_rate: 1.0,
                min_step_mask_rate: 1.0,
            })
            .collect();
        RunMetrics {
            n: 2,
            records,
            final_confidences: vec![(0.9, true), (0.4, false), (0.97, true)],
            final_per_class_accuracy: vec![0.6, 0.6],
            true_unlabeled_marginal: ProbVec::uniform(2),
        }
    }

    #[test]
    fn empty_metrics_violate_the_precondition() {
        let m = metrics(0);
        assert!(accuracy_svg(&m).is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plots(&m, dir.path()).is_err());
    }

    #[test]
    fn single_epoch_yields_a_valid_single_point_plot() {
        let svg = accuracy_svg(&metrics(1)).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("<circle"));
    }

    #[test]
    fn marginal_bars_cover_both_series() {
        let m = metrics(3);
        let svg = marginal_svg(&m).unwrap();
        // Two classes x two series = four bars.
        assert_eq!(svg.matches("fill=\"#1f6fb2\" fill-opacity=\"0.8\"").count(), 2);
        assert_eq!(svg.matches("fill=\"#d08a18\" fill-opacity=\"0.8\"").count(), 2);
        // Each plotted series sums to ~1 by the simplex invariant.
        let sum: f64 = m.records.last().unwrap().pseudo_label_marginal.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn emit_writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_plots(&metrics(4), dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        for p in paths {
            let text = std::fs::read_to_string(p).unwrap();
            assert!(text.starts_with("<svg"));
            assert!(text.trim_end().ends_with("</svg>"));
        }
    }
}
