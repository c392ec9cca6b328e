//! SVG heat map for influence matrices.
//!
//! The color scale is anchored at the class boundaries 0.2 / 0.6 / 0.99:
//! weak values fade from white to light gray, significant values ramp
//! through blues, strong values through oranges, and decisive values render
//! solid red. Undefined rows (targets with no events) are drawn as hatched
//! gray cells so missing data is never mistaken for zero influence.

use crate::error::{Error, Result};
use crate::influence::PimMatrix;

const CELL: f64 = 46.0;
const MARGIN_LEFT: f64 = 110.0;
const MARGIN_TOP: f64 = 70.0;

fn lerp(a: u8, b: u8, t: f64) -> u8 {
    (a as f64 + (b as f64 - a as f64) * t).round() as u8
}

fn blend(from: (u8, u8, u8), to: (u8, u8, u8), t: f64) -> String {
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(from.0, to.0, t),
        lerp(from.1, to.1, t),
        lerp(from.2, to.2, t)
    )
}

/// Map an influence value in `[0, 1]` to a fill color, piecewise over the
/// class bands.
fn color_for(value: f64) -> String {
    if value <= 0.2 {
        blend((255, 255, 255), (205, 205, 205), value / 0.2)
    } else if value <= 0.6 {
        blend((198, 219, 239), (33, 113, 181), (value - 0.2) / 0.4)
    } else if value <= 0.99 {
        blend((253, 208, 162), (230, 85, 13), (value - 0.6) / 0.39)
    } else {
        "#a50f15".to_string()
    }
}

/// Render a `PimMatrix` as a self-contained SVG string. `labels` names the
/// processes (the background column is labeled automatically).
pub fn render_heatmap_svg(pim: &PimMatrix, labels: &[String]) -> Result<String> {
    let p = pim.num_processes();
    if labels.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {p} processes",
            labels.len()
        )));
    }
    let cols = p + 1;
    let width = MARGIN_LEFT + cols as f64 * CELL + 20.0;
    let height = MARGIN_TOP + p as f64 * CELL + 70.0;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    svg.push_str(
        "<defs><pattern id=\"undef\" width=\"6\" height=\"6\" patternTransform=\"rotate(45)\" \
         patternUnits=\"userSpaceOnUse\"><rect width=\"6\" height=\"6\" fill=\"#eeeeee\"/>\
         <line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#999999\" stroke-width=\"2\"/>\
         </pattern></defs>\n",
    );
    svg.push_str(&format!(
        "<text x=\"{MARGIN_LEFT}\" y=\"20\" font-size=\"13\">influence heat map, window \
         [{:.1}, {:.1}] h</text>\n",
        pim.window[0], pim.window[1]
    ));

    // Column headers: background, then one per source process.
    let header = |c: usize| -> &str {
        if c == 0 {
            "background"
        } else {
            &labels[c - 1]
        }
    };
    for c in 0..cols {
        let x = MARGIN_LEFT + c as f64 * CELL + CELL / 2.0;
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"end\" \
             transform=\"rotate(-40 {x:.1} {:.1})\">{}</text>\n",
            MARGIN_TOP - 8.0,
            MARGIN_TOP - 8.0,
            header(c)
        ));
    }

    for (i, label) in labels.iter().enumerate() {
        let y = MARGIN_TOP + i as f64 * CELL;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>\n",
            MARGIN_LEFT - 8.0,
            y + CELL / 2.0 + 4.0,
        ));
        for c in 0..cols {
            let x = MARGIN_LEFT + c as f64 * CELL;
            match &pim.rows[i] {
                Some(row) => {
                    let v = row[c];
                    svg.push_str(&format!(
                        "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL}\" height=\"{CELL}\" \
                         fill=\"{}\" stroke=\"#ffffff\"/>\n",
                        color_for(v)
                    ));
                    let text_fill = if v > 0.6 { "#ffffff" } else { "#333333" };
                    svg.push_str(&format!(
                        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" \
                         fill=\"{text_fill}\">{v:.2}</text>\n",
                        x + CELL / 2.0,
                        y + CELL / 2.0 + 4.0
                    ));
                }
                None => {
                    svg.push_str(&format!(
                        "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL}\" height=\"{CELL}\" \
                         fill=\"url(#undef)\" stroke=\"#ffffff\"/>\n"
                    ));
                }
            }
        }
    }

    // Legend: one swatch per class band.
    let legend_y = MARGIN_TOP + p as f64 * CELL + 24.0;
    let swatches = [
        (0.1, "weak"),
        (0.4, "significant"),
        (0.8, "strong"),
        (0.995, "decisive"),
    ];
    for (k, (v, name)) in swatches.iter().enumerate() {
        let x = MARGIN_LEFT + k as f64 * 95.0;
        svg.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"{legend_y:.1}\" width=\"14\" height=\"14\" fill=\"{}\" \
             stroke=\"#777777\"/>\n<text x=\"{:.1}\" y=\"{:.1}\">{name}</text>\n",
            color_for(*v),
            x + 19.0,
            legend_y + 11.0
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PimMatrix {
        PimMatrix {
            rows: vec![Some(vec![0.5, 0.3, 0.2]), None],
            counts: vec![10, 0],
            window: [0.0, 48.0],
        }
    }

    #[test]
    fn renders_all_cells_and_labels() {
        let labels = vec!["alpha".to_string(), "beta".to_string()];
        let svg = render_heatmap_svg(&sample(), &labels).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        // 3 value cells + 3 undefined cells (+1 pattern def, +4 legend swatches).
        assert_eq!(svg.matches("<rect").count(), 1 + 3 + 3 + 4);
        assert_eq!(svg.matches("url(#undef)").count(), 3);
        assert!(svg.contains("alpha") && svg.contains("beta"));
        assert!(svg.contains("background"));
    }

    #[test]
    fn label_count_must_match() {
        let labels = vec!["only-one".to_string()];
        assert!(render_heatmap_svg(&sample(), &labels).is_err());
    }

    #[test]
    fn color_bands_are_anchored_at_class_boundaries() {
        assert_eq!(color_for(0.0), "#ffffff");
        assert_eq!(color_for(1.0), "#a50f15");
        // Either side of each boundary lands in a different band.
        let ulp = |x: f64| f64::from_bits(x.to_bits() + 1);
        assert_ne!(color_for(0.2), color_for(ulp(0.2)));
        assert_ne!(color_for(0.6), color_for(ulp(0.6)));
        assert_ne!(color_for(0.99), color_for(ulp(0.99)));
    }
}
