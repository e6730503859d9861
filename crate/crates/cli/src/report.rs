//! Aligned text tables for human-readable command output.

use tracemark_core::harness::TrackingReport;
use tracemark_core::CandidatePool;

use crate::eval::RobustnessReport;

pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let render_row = |cells: &[String], widths: &[usize]| -> String {
        cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    out.push_str(&render_row(&header_cells, &widths));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&render_row(row, &widths));
        out.push('\n');
    }
    out
}

pub fn frequency_table(pool: &CandidatePool) -> String {
    let rows: Vec<Vec<String>> = pool
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                (i + 1).to_string(),
                t.clone(),
                format!("{:.3}", pool.frequency_of(t).unwrap_or(0.0)),
            ]
        })
        .collect();
    render_table(&["Index", "Token", "Frequency"], &rows)
}

pub fn tracking_table(report: &TrackingReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.user_id.to_string(),
                r.tokens.join(" "),
                format!("{:.3}", r.total_frequency),
                if r.success { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    let mut out = render_table(&["User", "Tokens", "Total Frequency", "Success"], &rows);
    out.push_str(&format!(
        "\ntracked {}/{} users\n",
        report.successes, report.users
    ));
    out
}

pub fn robustness_table(report: &RobustnessReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.degradation.clone(),
                format!("{:.3}", r.accuracy),
                r.mean_informed_score
                    .map(|s| format!("{s:.3}"))
                    .unwrap_or_else(|| "-".into()),
                r.frac_informed_ge_half
                    .map(|s| format!("{s:.3}"))
                    .unwrap_or_else(|| "-".into()),
            ]
        })
        .collect();
    let mut out = render_table(
        &["Degradation", "Accuracy", "Informed score (mean)", "Score >= 0.5"],
        &rows,
    );
    out.push_str(&format!(
        "\nbaseline accuracy (no damage): {:.3}\n",
        report.baseline_accuracy
    ));
    out
}
