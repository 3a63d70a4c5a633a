//! Plain-text views of a report: FPR bars for single-filter sweeps and an
//! `l1 x l2` heatmap for trie/Bloom sweeps.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::report::ReportRow;

const SHADES: &[u8] = b" .:-=+*#%@";

fn shade(fpr: f64) -> char {
    let i = (fpr.clamp(0.0, 1.0) * (SHADES.len() - 1) as f64).round() as usize;
    SHADES[i] as char
}

/// One line per row: predicted and observed FPR as numbers and bars.
pub fn render_bars(rows: &[ReportRow], width: usize) -> String {
    let mut s = String::new();
    for r in rows {
        let label = format!(
            "{} l1={} l2={}",
            r.family,
            r.l1.map_or("-".into(), |v| v.to_string()),
            r.l2.map_or("-".into(), |v| v.to_string())
        );
        match (r.predicted_fpr, r.observed_fpr) {
            (Some(p), Some(o)) if r.is_ok() => {
                let bar = "#".repeat((o.clamp(0.0, 1.0) * width as f64).round() as usize);
                let _ = writeln!(s, "{label:<28} pred {p:6.4} obs {o:6.4} |{bar}");
            }
            _ => {
                let _ = writeln!(s, "{label:<28} {}", r.status);
            }
        }
    }
    s
}

/// Predicted and observed FPR heatmaps, `l1` down and `l2` across (`l2 = 0`
/// is the trie-only column). `X` marks infeasible designs.
pub fn render_heatmap(rows: &[ReportRow]) -> String {
    let mut cells: BTreeMap<(u32, u32), &ReportRow> = BTreeMap::new();
    for r in rows {
        if let (Some(l1), Some(l2)) = (r.l1, r.l2) {
            cells.insert((l1, l2), r);
        }
    }
    let mut l1s: Vec<u32> = cells.keys().map(|&(a, _)| a).collect();
    let mut l2s: Vec<u32> = cells.keys().map(|&(_, b)| b).collect();
    for v in [&mut l1s, &mut l2s] {
        v.sort_unstable();
        v.dedup();
    }
    let mut s = String::new();
    for (title, predicted) in [("predicted", true), ("observed", false)] {
        let _ = write!(s, "{title}\nl1\\l2 ");
        for l in &l2s {
            let _ = write!(s, "{}", l % 10);
        }
        s.push('\n');
        for &a in &l1s {
            let _ = write!(s, "{a:>5} ");
            for &b in &l2s {
                let c = match cells.get(&(a, b)) {
                    None => ' ',
                    Some(r) if !r.is_ok() => 'X',
                    Some(r) => {
                        let v = if predicted { r.predicted_fpr } else { r.observed_fpr };
                        v.map_or('?', shade)
                    }
                };
                s.push(c);
            }
            s.push('\n');
        }
    }
    let _ = writeln!(s, "scale: '{}' = 0 .. 1", String::from_utf8_lossy(SHADES));
    s
}

/// Bars for single-length sweeps, a heatmap otherwise.
pub fn render(rows: &[ReportRow]) -> String {
    let two_dim = rows.iter().any(|r| r.l1.is_some_and(|l| l > 0));
    if two_dim {
        render_heatmap(rows)
    } else {
        render_bars(rows, 50)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use protean::filters::DesignPoint;

    #[test]
    fn heatmap_marks_cells() {
        let mut a = ReportRow::for_design(
            "w",
            DesignPoint::Proteus {
                trie_depth: 1,
                bloom_len: 2,
            },
            8.0,
        );
        a.predicted_fpr = Some(1.0);
        a.observed_fpr = Some(0.0);
        let mut b = ReportRow::for_design(
            "w",
            DesignPoint::Proteus {
                trie_depth: 2,
                bloom_len: 0,
            },
            8.0,
        );
        b.status = "infeasible".into();
        let text = render(&[a, b]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "predicted");
        assert_eq!(lines[1], "l1\\l2 02");
        assert_eq!(lines[2], "    1  @");
        assert_eq!(lines[3], "    2 X ");
        assert_eq!(lines[6], "    1   ");
    }
}
