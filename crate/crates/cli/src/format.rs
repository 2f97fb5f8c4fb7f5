//! Plain-text rendering of command results.

use compshare_core::codec::CompositionId;
use compshare_core::model::{Rect, Timestamp};
use compshare_core::preview::Annotation;
use compshare_core::resolver::InstallPlan;
use compshare_protocol::bodies::RosterEntry;

/// Left-aligned columns separated by two spaces.
pub fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols).map(|i| rows.iter().filter_map(|r| r.get(i)).map(|c| c.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (i, cell) in r.iter().enumerate() {
            line.push_str(cell);
            if i + 1 < r.len() {
                line.push_str(&" ".repeat(widths[i] - cell.chars().count() + 2));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn short(id: &CompositionId) -> String {
    id.to_string()[..12].to_string()
}

pub fn time(t: Timestamp) -> String {
    chrono::DateTime::from_timestamp(t.0, 0)
        .map(|d| d.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
        .unwrap_or_else(|| t.to_string())
}

pub fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}

pub fn rect(r: &Rect) -> String {
    format!("{:.3},{:.3} {:.3}x{:.3}", r.x(), r.y(), r.w(), r.h())
}

pub fn roster(entries: &[RosterEntry]) -> String {
    if entries.is_empty() {
        return "no contacts\n".to_string();
    }
    let mut rows = vec![vec!["USER".into(), "ONLINE".into(), "SHARING".into()]];
    rows.extend(entries.iter().map(|e| vec![e.user.to_string(), yes_no(e.online), yes_no(e.online && e.sharing)]));
    table(&rows)
}

pub fn annotations(list: &[Annotation]) -> String {
    if list.is_empty() {
        return "no annotated regions\n".to_string();
    }
    let mut rows = vec![vec!["PART".into(), "FEATURE".into(), "NAME".into(), "REGION".into()]];
    rows.extend(list.iter().map(|a| vec![a.part.to_string(), a.feature.to_string(), a.feature_name.clone(), rect(&a.region)]));
    table(&rows)
}

pub fn plan(p: &InstallPlan) -> String {
    if p.is_noop() {
        return "nothing to install\n".to_string();
    }
    let mut rows = Vec::new();
    for r in &p.already_present {
        rows.push(vec!["present".into(), format!("{} {}", r.id, r.version)]);
    }
    for r in &p.missing {
        rows.push(vec!["missing".into(), format!("{} {}", r.id, r.version)]);
    }
    for m in &p.version_mismatch {
        rows.push(vec!["mismatch".into(), format!("{} {} -> {}", m.id, m.local, m.required)]);
    }
    for (i, r) in p.install_order.iter().enumerate() {
        rows.push(vec!["install".into(), format!("{}. {} {}", i + 1, r.id, r.version)]);
    }
    if p.include_composition {
        rows.push(vec!["layout".into(), "copy composition".into()]);
    }
    table(&rows)
}
