//! Summaries of a sweep result table: accuracy-vs-dr series per (model,
//! setting), the drop from dr = 0 to dr = 1, and optional SVG charts.
//!
//! Everything here is a pure function of the parsed table.

use std::fmt::Write as _;

use drf_core::synthdata::{Setting, Strategy};
use drf_core::trainer::sweep::{aggregate, Aggregate, ResultRow};

/// Mean accuracy vs dr for one (model, setting), sorted by dr.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub model: String,
    pub setting: Setting,
    pub points: Vec<Aggregate>,
}

impl Series {
    fn at(&self, dr: f64) -> Option<f64> {
        self.points.iter().find(|p| p.dr == dr).map(|p| p.acc_mean)
    }

    /// Mean accuracy at dr = 0 minus mean accuracy at dr = 1; `None` unless both exist.
    pub fn drop(&self) -> Option<f64> {
        Some(self.at(0.0)? - self.at(1.0)?)
    }

    pub fn file_stem(&self) -> String {
        format!("series_{}_{}", self.model, setting_slug(self.setting))
    }

    pub fn to_csv(&self, echo: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in echo {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("model,setting,dr,n,acc_mean,acc_std,f1_mean,f1_std\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.model,
                self.setting.as_str(),
                p.dr,
                p.n,
                p.acc_mean,
                p.acc_std,
                p.f1_mean,
                p.f1_std
            );
        }
        out
    }
}

fn setting_slug(s: Setting) -> &'static str {
    match s {
        Setting::Corrupt => "C",
        Setting::Discard => "D",
        Setting::Both => "CD",
    }
}

/// Random-strategy series in first-appearance order of (model, setting).
pub fn series(rows: &[ResultRow]) -> Vec<Series> {
    let random: Vec<ResultRow> = rows.iter().filter(|r| r.strategy == Strategy::Random).cloned().collect();
    let mut out: Vec<Series> = Vec::new();
    for a in aggregate(&random) {
        match out.iter_mut().find(|s| s.model == a.model && s.setting == a.setting) {
            Some(s) => s.points.push(a),
            None => out.push(Series {
                model: a.model.clone(),
                setting: a.setting,
                points: vec![a],
            }),
        }
    }
    for s in &mut out {
        s.points.sort_by(|a, b| a.dr.total_cmp(&b.dr));
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// Human-readable summary.
pub fn summary(rows: &[ResultRow], echo: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in echo {
        let _ = writeln!(out, "# {k}={v}");
    }
    let all = series(rows);
    if !all.is_empty() {
        out.push_str("\naccuracy vs dr (random strategy, mean ± sd over seeds)\n");
        let _ = writeln!(out, "{:<10} {:<7} {:>5} {:>3} {:>9} {:>8}", "model", "setting", "dr", "n", "acc_mean", "acc_std");
        for s in &all {
            for p in &s.points {
                let _ = writeln!(
                    out,
                    "{:<10} {:<7} {:>5} {:>3} {:>9.4} {:>8.4}",
                    s.model,
                    s.setting.as_str(),
                    p.dr,
                    p.n,
                    p.acc_mean,
                    p.acc_std
                );
            }
        }

        out.push_str("\naccuracy drop from dr=0 to dr=1.0\n");
        let _ = writeln!(out, "{:<10} {:<7} {:>9} {:>9} {:>9}", "model", "setting", "acc@0", "acc@1", "drop");
        for s in &all {
            let _ = writeln!(
                out,
                "{:<10} {:<7} {:>9} {:>9} {:>9}",
                s.model,
                s.setting.as_str(),
                fmt_opt(s.at(0.0)),
                fmt_opt(s.at(1.0)),
                fmt_opt(s.drop())
            );
        }

        out.push('\n');
        for setting in Setting::ALL {
            let find = |m: &str| all.iter().find(|s| s.model == m && s.setting == setting).and_then(Series::drop);
            if !all.iter().any(|s| s.setting == setting) {
                continue;
            }
            match (find("drf"), find("baseline")) {
                (Some(d), Some(b)) => {
                    let _ = writeln!(
                        out,
                        "{}: drop(drf) < drop(baseline): {} ({d:.4} vs {b:.4})",
                        setting.as_str(),
                        if d < b { "yes" } else { "no" }
                    );
                }
                _ => {
                    let _ = writeln!(out, "{}: drop(drf) < drop(baseline): n/a", setting.as_str());
                }
            }
        }
    }

    let fixed: Vec<ResultRow> = rows.iter().filter(|r| r.strategy == Strategy::Fixed).cloned().collect();
    if !fixed.is_empty() {
        out.push_str("\nfixed strategy (mean ± sd over seeds)\n");
        let _ = writeln!(out, "{:<10} {:<7} {:<7} {:>3} {:>9} {:>8}", "model", "target", "setting", "n", "acc_mean", "acc_std");
        for a in aggregate(&fixed) {
            let _ = writeln!(
                out,
                "{:<10} {:<7} {:<7} {:>3} {:>9.4} {:>8.4}",
                a.model,
                a.target.map_or("-", |t| t.as_str()),
                a.setting.as_str(),
                a.n,
                a.acc_mean,
                a.acc_std
            );
        }
    }
    out
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line chart of accuracy vs dr for every model under one setting.
pub fn svg(setting: Setting, all: &[Series]) -> String {
    let (w, h, pad) = (480.0, 320.0, 40.0);
    let x = |dr: f64| pad + dr * (w - 2.0 * pad);
    let y = |acc: f64| h - pad - acc * (h - 2.0 * pad);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-size="14" text-anchor="middle">accuracy vs dr, setting {}</text>"#,
        w / 2.0,
        xml_escape(setting.as_str())
    );
    let _ = writeln!(
        out,
        r#"<polyline points="{},{} {},{} {},{}" fill="none" stroke="black"/>"#,
        x(0.0),
        y(1.0),
        x(0.0),
        y(0.0),
        x(1.0),
        y(0.0)
    );
    for t in [0.0, 0.5, 1.0] {
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{t}</text>"#, x(t), h - pad + 14.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{t}</text>"#, pad - 4.0, y(t) + 3.0);
    }
    for (i, s) in all.iter().filter(|s| s.setting == setting).enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", x(p.dr), y(p.acc_mean))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, pts.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{colour}">{}</text>"#,
            w - pad - 60.0,
            pad + 14.0 * (i as f64 + 1.0),
            xml_escape(&s.model)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// All report artifacts as (file name, contents), in a fixed order.
pub fn render(rows: &[ResultRow], echo: &[(String, String)], with_svg: bool) -> Vec<(String, String)> {
    let all = series(rows);
    let mut files = vec![("summary.txt".to_string(), summary(rows, echo))];
    for s in &all {
        files.push((format!("{}.csv", s.file_stem()), s.to_csv(echo)));
    }
    if with_svg {
        for setting in Setting::ALL {
            if all.iter().any(|s| s.setting == setting) {
                files.push((format!("accuracy_{}.svg", setting_slug(setting)), svg(setting, &all)));
            }
        }
    }
    files
}
