use std::fmt::Write;

use crate::error::{Error, Result};
use crate::explain::ExplanationReport;
use crate::ingest::Modality;

/// 0 for zero weight, then 1..=3 for weights up to 1/3, 2/3 and above 2/3
/// of `max`.
pub fn weight_level(weight: f64, max: f64) -> u8 {
    if weight <= 0.0 || max <= 0.0 {
        0
    } else if weight <= max / 3.0 {
        1
    } else if weight <= 2.0 * max / 3.0 {
        2
    } else {
        3
    }
}

fn bracket(token: &str, level: u8) -> String {
    match level {
        0 => token.to_string(),
        1 => format!("({token})"),
        2 => format!("[{token}]"),
        _ => format!("[[{token}]]"),
    }
}

/// Plain-text view. Lyrics print as a token stream with `(low)`, `[mid]`
/// and `[[high]]` markers; audio prints one bar per second.
pub fn render_text_heatmap(report: &ExplanationReport) -> String {
    let max = report.max_weight();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} ({}) predicted: {}",
        report.id, report.modality, report.predicted_genre
    );
    match report.modality {
        Modality::Lyric => {
            let words: Vec<String> = report
                .attributions
                .iter()
                .map(|a| bracket(&a.unit.to_string(), weight_level(a.weight, max)))
                .collect();
            for line in words.chunks(16) {
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        Modality::Audio => {
            for a in &report.attributions {
                let bar = "#".repeat(weight_level(a.weight, max) as usize);
                let _ = writeln!(out, "{:>4} {:.6} {bar}", a.unit.to_string(), a.weight);
            }
        }
    }
    out
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Self-contained HTML page; each unit's highlight opacity is its weight
/// divided by the largest weight.
pub fn render_html(report: &ExplanationReport) -> String {
    let max = report.max_weight();
    let mut body = String::new();
    for a in &report.attributions {
        let opacity = if max > 0.0 { a.weight / max } else { 0.0 };
        let _ = write!(
            body,
            "<span style=\"background-color: rgba(220, 38, 38, {opacity:.3}); padding: 1px 2px;\" \
             title=\"{:.6}\">{}</span> ",
            a.weight,
            escape_html(&a.unit.to_string())
        );
    }
    let mut probs = String::new();
    for (label, p) in &report.probabilities {
        let _ = write!(probs, "<li>{}: {p:.4}</li>", escape_html(label));
    }
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{id}</title>\n</head>\n\
         <body style=\"font-family: sans-serif; line-height: 1.8;\">\n\
         <h1 style=\"font-size: 1.2em;\">{id} ({modality})</h1>\n\
         <p>Predicted genre: <strong>{genre}</strong></p>\n\
         <div>{body}</div>\n<ul>{probs}</ul>\n</body>\n</html>\n",
        id = escape_html(&report.id),
        modality = report.modality,
        genre = escape_html(&report.predicted_genre),
    )
}

/// `second,weight` CSV with CRLF line endings; audio reports only.
pub fn render_audio_csv(report: &ExplanationReport) -> Result<String> {
    if report.modality != Modality::Audio {
        return Err(Error::Contract(format!(
            "CSV rendering needs an audio report, {:?} is {}",
            report.id, report.modality
        )));
    }
    let mut out = String::from("second,weight\r\n");
    for a in &report.attributions {
        let _ = write!(out, "{},{:.6}\r\n", a.position, a.weight);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{TokenAttribution, Unit};

    fn report(modality: Modality, weights: &[f64]) -> ExplanationReport {
        ExplanationReport {
            id: "s<1>".into(),
            modality,
            attributions: weights
                .iter()
                .enumerate()
                .map(|(i, &w)| TokenAttribution {
                    position: i,
                    unit: match modality {
                        Modality::Lyric => Unit::Word(format!("w{i}")),
                        Modality::Audio => Unit::Second(i),
                    },
                    aggregated: w,
                    weight: w,
                })
                .collect(),
            predicted_genre: "rock".into(),
            probabilities: vec![("rock".into(), 0.7), ("pop".into(), 0.3)],
        }
    }

    #[test]
    fn levels() {
        assert_eq!(weight_level(0.0, 0.9), 0);
        assert_eq!(weight_level(0.3, 0.9), 1);
        assert_eq!(weight_level(0.5, 0.9), 2);
        assert_eq!(weight_level(0.9, 0.9), 3);
    }

    #[test]
    fn html_opacity_bounds_and_escaping() {
        let html = render_html(&report(Modality::Lyric, &[0.0, 0.2, 0.4]));
        assert!(html.contains("rgba(220, 38, 38, 0.000)"));
        assert!(html.contains("rgba(220, 38, 38, 1.000)"));
        assert!(html.contains("s&lt;1&gt;"));
        assert!(!html.contains("<link") && !html.contains("<script"));
    }

    #[test]
    fn text_markers() {
        let text = render_text_heatmap(&report(Modality::Lyric, &[0.0, 0.05, 0.15, 0.3]));
        assert!(text.contains("w0 (w1) [w2] [[w3]]"), "{text}");
    }

    #[test]
    fn csv_shape() {
        let r = report(Modality::Audio, &[1.0 / 30.0; 30]);
        let csv = render_audio_csv(&r).unwrap();
        assert_eq!(csv.split("\r\n").filter(|l| !l.is_empty()).count(), 31);
        assert!(csv.starts_with("second,weight\r\n0,0.033333\r\n"));
        assert!(render_audio_csv(&report(Modality::Lyric, &[1.0])).is_err());
    }

    #[test]
    fn renderers_are_pure() {
        let r = report(Modality::Audio, &[0.1, 0.5, 0.0]);
        assert_eq!(render_html(&r), render_html(&r));
        assert_eq!(render_text_heatmap(&r), render_text_heatmap(&r));
    }
}
