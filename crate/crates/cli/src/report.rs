use std::fmt::Write;

use relprove_core::status::ReportRow;

/// One block per property: id and status on the first line, then the
/// explanation and whatever the status depends on.
pub fn text(rows: &[ReportRow]) -> String {
    let width = rows.iter().map(|r| r.id.as_str().len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in rows {
        let time = r.time_ms.map(|t| format!(" ({t} ms)")).unwrap_or_default();
        writeln!(out, "{:width$}  {}{time}", r.id.as_str(), r.status).unwrap();
        writeln!(out, "{:width$}    {}", "", r.explanation).unwrap();
        if !r.pending.is_empty() {
            writeln!(out, "{:width$}    pending: {}", "", join(&r.pending)).unwrap();
        }
        if !r.evidence.is_empty() {
            writeln!(out, "{:width$}    evidence: {}", "", join(&r.evidence)).unwrap();
        }
        if let Some(cex) = &r.counterexample {
            let vals: Vec<String> = cex.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            writeln!(out, "{:width$}    counterexample: {}", "", vals.join(", ")).unwrap();
        }
    }
    let count = |s: &str| rows.iter().filter(|r| r.status == s).count();
    writeln!(
        out,
        "{} properties: {} valid, {} proven, {} assumed valid, {} valid under condition, {} unknown, {} invalid",
        rows.len(),
        count("valid"),
        count("proven"),
        count("assumed_valid"),
        count("valid_under_condition"),
        count("unknown"),
        count("invalid"),
    )
    .unwrap();
    out
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}
