//! SVG attention heatmaps: hypothesis tokens down the side, premise tokens across the
//! top, one cell per weight shaded linearly from white to a saturated blue.

const CELL: usize = 36;
const CHAR_W: usize = 7;
const PAD: usize = 10;
const FULL: (f64, f64, f64) = (8.0, 48.0, 107.0);

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
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

/// Fill colour for a weight; values outside `[0, 1]` are clamped.
pub fn shade(w: f64) -> String {
    let w = if w.is_nan() { 0.0 } else { w.clamp(0.0, 1.0) };
    let mix = |full: f64| (255.0 + (full - 255.0) * w).round() as u8;
    format!("rgb({},{},{})", mix(FULL.0), mix(FULL.1), mix(FULL.2))
}

/// What to draw. `rows` pairs each row label with its weights over `columns`.
pub struct Heatmap<'a> {
    pub title: String,
    pub columns: &'a [String],
    pub rows: Vec<(String, &'a [f64])>,
    /// Print each weight inside its cell.
    pub annotate: bool,
}

impl Heatmap<'_> {
    pub fn render(&self) -> String {
        let label_w = self.rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0) * CHAR_W + PAD;
        // Column labels are rotated 60°, so their height is roughly their length.
        let top = self.columns.iter().map(|c| c.chars().count()).max().unwrap_or(0) * CHAR_W + 2 * PAD + 20;
        let width = label_w + self.columns.len() * CELL + 2 * PAD;
        let height = top + self.rows.len() * CELL + PAD;

        let mut s = String::new();
        let mut w = |t: String| s.push_str(&t);
        w(format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
             viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        ));
        w(format!("<title>{}</title>\n", escape(&self.title)));
        w("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n".into());
        w(format!("<text x=\"{PAD}\" y=\"16\" font-weight=\"bold\">{}</text>\n", escape(&self.title)));

        for (j, col) in self.columns.iter().enumerate() {
            let x = label_w + j * CELL + CELL / 2;
            let y = top - 6;
            w(format!(
                "<text class=\"premise\" transform=\"translate({x},{y}) rotate(-60)\">{}</text>\n",
                escape(col)
            ));
        }
        for (i, (label, weights)) in self.rows.iter().enumerate() {
            let y = top + i * CELL;
            w(format!(
                "<text class=\"hypothesis\" x=\"{}\" y=\"{}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>\n",
                label_w - 6,
                y + CELL / 2,
                escape(label)
            ));
            for (j, &weight) in weights.iter().enumerate() {
                let x = label_w + j * CELL;
                w(format!(
                    "<rect class=\"cell\" x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\" stroke=\"#ddd\">\
                     <title>{} → {}: {weight:.3}</title></rect>\n",
                    shade(weight),
                    escape(label),
                    escape(self.columns.get(j).map_or("", String::as_str)),
                ));
                if self.annotate {
                    let ink = if weight > 0.5 { "white" } else { "black" };
                    w(format!(
                        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" dominant-baseline=\"middle\" font-size=\"10\" fill=\"{ink}\">{weight:.2}</text>\n",
                        x + CELL / 2,
                        y + CELL / 2
                    ));
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}
