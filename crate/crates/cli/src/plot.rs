//! Observed-vs-predicted diagnostic outputs: a frequency table as CSV and a
//! grouped barplot as a hand-rolled static SVG (no plotting dependency).
//! Every bar carries `data-series`, `data-y`, and `data-value` attributes so
//! tests and downstream tools can read the plotted numbers back out.

use oicount::Error;

const OBSERVED_COLOR: &str = "#9aa0a6";
const SERIES_COLORS: [&str; 4] = ["#1a73e8", "#d93025", "#188038", "#f9ab00"];

/// Tally a response column into per-outcome frequencies for y = 1..=max(y).
/// The models only exist on positive integers, so anything else is rejected.
pub fn observed_frequencies(column: &str, y: &[f64]) -> oicount::Result<Vec<f64>> {
    let mut max_y = 0usize;
    for &v in y {
        if !v.is_finite() || v.fract() != 0.0 || v < 1.0 {
            return Err(Error::BadResponse {
                column: column.to_string(),
                message: format!(
                    "value {v} outside the zero-truncated support (positive integers)"
                ),
            });
        }
        max_y = max_y.max(v as usize);
    }
    if max_y == 0 {
        return Err(Error::BadResponse {
            column: column.to_string(),
            message: "empty response column".to_string(),
        });
    }
    let mut freq = vec![0.0; max_y];
    for &v in y {
        freq[v as usize - 1] += 1.0;
    }
    Ok(freq)
}

/// CSV with one row per outcome value: observed frequency first, then one
/// predicted-count column per overlaid family.
pub fn table_csv(observed: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let mut out = String::from("y,observed");
    for (label, _) in series {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for (i, obs) in observed.iter().enumerate() {
        out.push_str(&format!("{},{}", i + 1, obs));
        for (_, counts) in series {
            out.push_str(&format!(",{}", counts.get(i).copied().unwrap_or(0.0)));
        }
        out.push('\n');
    }
    out
}

/// Static grouped barplot: observed frequencies in grey, one colored bar per
/// family, outcome values along the x axis, counts up the y axis.
pub fn barplot_svg(observed: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let width = 900.0;
    let height = 480.0;
    let (left, right, top, bottom) = (64.0, 20.0, 46.0, 52.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let base_y = height - bottom;

    let groups = observed.len().max(1);
    let bars_per_group = 1 + series.len();
    let group_w = plot_w / groups as f64;
    let bar_w = group_w * 0.8 / bars_per_group as f64;

    let mut max_v = observed.iter().cloned().fold(0.0_f64, f64::max);
    for (_, counts) in series {
        max_v = counts.iter().cloned().fold(max_v, f64::max);
    }
    let max_v = max_v.max(1.0);

    let mut svg = format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
        ),
        w = width,
        h = height
    );

    // horizontal grid lines and y-axis tick labels
    for k in 0..=4 {
        let v = max_v * k as f64 / 4.0;
        let y = base_y - plot_h * k as f64 / 4.0;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dadce0\"/>\n",
            left,
            width - right,
        ));
        let label = if max_v >= 10.0 { format!("{v:.0}") } else { format!("{v:.1}") };
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>\n",
            left - 8.0,
            y + 4.0,
        ));
    }

    // bars: observed first, then each family's predictions
    let bar = |svg: &mut String, series_name: &str, color: &str, group: usize, slot: usize, v: f64| {
        let x = left + group as f64 * group_w + group_w * 0.1 + slot as f64 * bar_w;
        let h = (v.max(0.0) / max_v * plot_h).min(plot_h);
        svg.push_str(&format!(
            concat!(
                "<rect data-series=\"{name}\" data-y=\"{y}\" data-value=\"{v:.4}\" ",
                "x=\"{x:.2}\" y=\"{top:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" ",
                "fill=\"{color}\"/>\n"
            ),
            name = series_name,
            y = group + 1,
            v = v,
            x = x,
            top = base_y - h,
            w = bar_w,
            h = h,
            color = color,
        ));
    };
    for (i, &obs) in observed.iter().enumerate() {
        bar(&mut svg, "observed", OBSERVED_COLOR, i, 0, obs);
        for (s, (label, counts)) in series.iter().enumerate() {
            let v = counts.get(i).copied().unwrap_or(0.0);
            bar(&mut svg, label, SERIES_COLORS[s % SERIES_COLORS.len()], i, s + 1, v);
        }
    }

    // x-axis line and tick labels (thinned when there are many outcomes)
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#202124\"/>\n",
        left,
        base_y,
        width - right,
        base_y,
    ));
    let step = groups.div_ceil(20);
    for i in (0..groups).step_by(step.max(1)) {
        let x = left + (i as f64 + 0.5) * group_w;
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            base_y + 16.0,
            i + 1,
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">outcome count y</text>\n",
        left + plot_w / 2.0,
        height - 12.0,
    ));
    svg.push_str(&format!(
        concat!(
            "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" ",
            "transform=\"rotate(-90 16 {:.2})\">frequency</text>\n"
        ),
        top + plot_h / 2.0,
        top + plot_h / 2.0,
    ));

    // legend along the top edge
    let mut lx = left;
    let mut legend = |svg: &mut String, label: &str, color: &str| {
        svg.push_str(&format!(
            "<rect x=\"{lx:.2}\" y=\"14\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n"
        ));
        svg.push_str(&format!("<text x=\"{:.2}\" y=\"24\">{label}</text>\n", lx + 16.0));
        lx += 16.0 + 8.0 * label.len() as f64 + 24.0;
    };
    legend(&mut svg, "observed", OBSERVED_COLOR);
    for (s, (label, _)) in series.iter().enumerate() {
        legend(&mut svg, label, SERIES_COLORS[s % SERIES_COLORS.len()]);
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies_tally_positive_integer_counts() {
        let freq = observed_frequencies("y", &[1.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(freq, vec![2.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_and_fractional_responses_are_rejected() {
        for bad in [0.0, -1.0, 2.5, f64::NAN] {
            let err = observed_frequencies("los", &[1.0, bad]).unwrap_err();
            assert!(err.to_string().contains("los"), "{err}");
        }
    }

    #[test]
    fn csv_has_one_column_per_series() {
        let series = vec![
            ("ZTNB".to_string(), vec![1.5, 0.5]),
            ("OIZTNB".to_string(), vec![2.0, 0.25]),
        ];
        let text = table_csv(&[2.0, 1.0], &series);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "y,observed,ZTNB,OIZTNB");
        assert_eq!(lines[1], "1,2,1.5,2");
        assert_eq!(lines[2], "2,1,0.5,0.25");
    }

    #[test]
    fn svg_has_a_readable_bar_per_value() {
        let series = vec![("OIPP".to_string(), vec![1.0, 2.0, 3.0])];
        let svg = barplot_svg(&[3.0, 2.0, 1.0], &series);
        let bars = svg.matches("data-series=").count();
        assert_eq!(bars, 6);
        assert!(svg.contains("data-series=\"OIPP\" data-y=\"3\" data-value=\"3.0000\""), "{svg}");
        assert!(svg.contains("</svg>"));
    }
}
