// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::fmt::Write;

use super::{ImportanceReport, RocCurve};

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f",
];

/// ROC curves on a unit square with the chance diagonal.
pub fn roc_svg(curves: &[(&str, &RocCurve)]) -> String {
    let (w, h, pad) = (420.0, 420.0, 40.0);
    let side = w - 2.0 * pad;
    let px = |x: f64| pad + x * side;
    let py = |y: f64| h - pad - y * side;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        s,
        r##"<rect x="{pad}" y="{pad}" width="{side}" height="{side}" fill="none" stroke="#000"/>"##
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#aaa" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for (i, (name, c)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{colour}">{} (AUC {:.3})</text>"#,
            px(0.45),
            py(0.05) + 14.0 * i as f64 - 14.0 * curves.len() as f64,
            escape(name),
            c.auc
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12">false positive rate</text>"#,
        px(0.35),
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" font-size="12" transform="rotate(-90 12 {})">true positive rate</text>"#,
        py(0.3),
        py(0.3)
    );
    s.push_str("</svg>\n");
    s
}

/// Horizontal bars of mean AUC drop with one-std whiskers.
pub fn importance_svg(report: &ImportanceReport) -> String {
    let n = report.features.len();
    let (label_w, bar_w, row_h) = (130.0, 300.0, 18.0);
    let h = 30.0 + row_h * n as f64;
    let max = report
        .features
        .iter()
        .map(|f| f.mean_drop + f.std)
        .fold(1e-9, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{h}">"#,
        label_w + bar_w + 60.0
    );
    for (i, f) in report.features.iter().enumerate() {
        let y = 10.0 + row_h * i as f64;
        let len = (f.mean_drop.max(0.0) / max) * bar_w;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
            label_w - 6.0,
            y + 12.0,
            escape(&f.feature)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{label_w}" y="{y}" width="{len:.2}" height="{}" fill="#1f77b4"/>"##,
            row_h - 4.0
        );
        let (lo, hi) = (
            label_w + ((f.mean_drop - f.std).max(0.0) / max) * bar_w,
            label_w + ((f.mean_drop + f.std).max(0.0) / max) * bar_w,
        );
        let _ = writeln!(
            s,
            r##"<line x1="{lo:.2}" y1="{0}" x2="{hi:.2}" y2="{0}" stroke="#000"/>"##,
            y + (row_h - 4.0) / 2.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{roc_auc, FeatureImportance};

    #[test]
    fn svg_documents_are_well_formed() {
        let c = roc_auc(&[0.9, 0.1, 0.5], &[1, 0, 1]).unwrap();
        let s = roc_svg(&[("all <features>", &c)]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("&lt;features&gt;"));
        let rep = ImportanceReport {
            baseline_auc: 0.9,
            n_repeats: 2,
            features: vec![FeatureImportance {
                feature: "pagerank".into(),
                mean_drop: 0.2,
                std: 0.01,
                std_error: 0.007,
                n_repeats: 2,
            }],
        };
        assert!(importance_svg(&rep).contains("pagerank"));
    }
}
