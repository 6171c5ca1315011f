//! Static horizontal bar charts.

use std::fmt::Write;

const ROW_HEIGHT: f64 = 22.0;
const LABEL_WIDTH: f64 = 220.0;
const PLOT_WIDTH: f64 = 360.0;
const VALUE_WIDTH: f64 = 90.0;
const TITLE_HEIGHT: f64 = 30.0;

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// One `<rect class="bar">` per entry; negative values extend left of the
/// zero line. Non-finite values are drawn as empty bars.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let finite = bars.iter().map(|b| b.1).filter(|v| v.is_finite());
    let lo = finite.clone().fold(0.0f64, f64::min);
    let hi = finite.fold(0.0f64, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let scale = PLOT_WIDTH / span;
    let zero = LABEL_WIDTH + (-lo) * scale;
    let width = LABEL_WIDTH + PLOT_WIDTH + VALUE_WIDTH;
    let height = TITLE_HEIGHT + ROW_HEIGHT * bars.len() as f64 + 10.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="8" y="20" font-size="14" font-weight="bold">{}</text>"#, escape(title));
    for (k, (label, value)) in bars.iter().enumerate() {
        let y = TITLE_HEIGHT + ROW_HEIGHT * k as f64;
        let v = if value.is_finite() { *value } else { 0.0 };
        let (x, w) = if v >= 0.0 { (zero, v * scale) } else { (zero + v * scale, -v * scale) };
        let fill = if v >= 0.0 { "#3b75af" } else { "#c44e52" };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LABEL_WIDTH - 6.0,
            y + 15.0,
            escape(label)
        );
        let _ = writeln!(
            s,
            r#"<rect class="bar" x="{x:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{fill}"><title>{}: {value}</title></rect>"#,
            y + 3.0,
            ROW_HEIGHT - 6.0,
            escape(label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{value:.4}</text>"#,
            LABEL_WIDTH + PLOT_WIDTH + 6.0,
            y + 15.0
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{zero:.2}" y1="{TITLE_HEIGHT}" x2="{zero:.2}" y2="{:.2}" stroke="#333"/>"##,
        height - 10.0
    );
    s.push_str("</svg>\n");
    s
}

/// Grouped bars: one chart section per group, each with its own title.
pub fn grouped_bar_chart(title: &str, groups: &[(String, Vec<(String, f64)>)]) -> String {
    let bars: Vec<(String, f64)> = groups
        .iter()
        .flat_map(|(g, rows)| rows.iter().map(move |(l, v)| (format!("{g} · {l}"), *v)))
        .collect();
    bar_chart(title, &bars)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn one_rect_per_bar() {
        let bars = vec![("a".to_string(), 1.0), ("b<".to_string(), -2.0), ("c".to_string(), f64::NAN)];
        let svg = bar_chart("t & u", &bars);
        assert_eq!(svg.matches(r#"class="bar""#).count(), 3);
        assert!(svg.contains("b&lt;"));
        assert!(svg.starts_with("<svg"));
    }
}
