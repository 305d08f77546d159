//! Text and CSV rendering of result tables.

use std::fmt::Write;

use crate::analysis::ModuliReport;
use crate::coverage::{format_percent, DeltaReport};
use crate::search::SuccessRecord;

/// Decimal places used for every printed percentage.
pub const PERCENT_PLACES: u32 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Text,
    Csv,
}

pub fn render_delta_tables(report: &DeltaReport, format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Text => {
            let _ = writeln!(out, "{:<24} Pct complete change", "Factor");
            for (t, gain) in &report.powers {
                let _ = writeln!(
                    out,
                    "{:<24} {}%",
                    format!("2^{t}"),
                    format_percent(gain, PERCENT_PLACES)
                );
            }
            out.push('\n');
            let _ = writeln!(out, "{:<24} Pct complete change", "Factor range");
            for (t, gain) in &report.between {
                let label = format!("between 2^{t} and 2^{}", t + 1);
                let _ = writeln!(out, "{label:<24} {}%", format_percent(gain, PERCENT_PLACES));
            }
        }
        TableFormat::Csv => {
            out.push_str("table,t,pct_change\n");
            for (t, gain) in &report.powers {
                let _ = writeln!(out, "power,{t},{}", format_percent(gain, PERCENT_PLACES));
            }
            for (t, gain) in &report.between {
                let _ = writeln!(out, "between,{t},{}", format_percent(gain, PERCENT_PLACES));
            }
        }
    }
    out
}

/// One row per record: `b c stop d e join`, with `-` for drop certificates.
pub fn render_results_table(records: &[SuccessRecord], format: TableFormat) -> String {
    let mut out = String::new();
    let dash = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    match format {
        TableFormat::Text => {
            let _ = writeln!(
                out,
                "{:>10} {:>10} {:>5} {:>10} {:>10} {:>5}",
                "b", "c", "stop", "d", "e", "join"
            );
            for r in records {
                let j = r.joined();
                let _ = writeln!(
                    out,
                    "{:>10} {:>10} {:>5} {:>10} {:>10} {:>5}",
                    r.class.modulus(),
                    r.class.remainder(),
                    r.stop_index,
                    dash(j.map(|(c, _)| c.modulus().to_string())),
                    dash(j.map(|(c, _)| c.remainder().to_string())),
                    dash(j.map(|(_, i)| i.to_string())),
                );
            }
        }
        TableFormat::Csv => {
            out.push_str("b,c,stop_index,join_b,join_c,join_index\n");
            for r in records {
                let j = r.joined();
                let blank = |v: Option<String>| v.unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.class.modulus(),
                    r.class.remainder(),
                    r.stop_index,
                    blank(j.map(|(c, _)| c.modulus().to_string())),
                    blank(j.map(|(c, _)| c.remainder().to_string())),
                    blank(j.map(|(_, i)| i.to_string())),
                );
            }
        }
    }
    out
}

pub fn render_moduli_report(report: &ModuliReport) -> String {
    let mut out = String::new();
    let yes_no = |b: bool| if b { "yes" } else { "NO" };
    let _ = writeln!(out, "successful moduli (2^t*3^s?):");
    for (b, smooth) in &report.moduli {
        let _ = writeln!(out, "  {b:>10}  {}", yes_no(*smooth));
    }
    let _ = writeln!(out, "joins with b = 2d (c - e = 2^t*3^s?):");
    for j in &report.halving_joins {
        let _ = writeln!(
            out,
            "  {} -> {}  c-e = {}  {}",
            j.class,
            j.joined,
            j.difference,
            yes_no(j.smooth)
        );
    }
    let _ = writeln!(out, "largest modulus in (2^t, 2^(t+1)) vs 3*2^(t-1):");
    for row in &report.dead_zone {
        let _ = writeln!(
            out,
            "  t={:<3} {:>10} <= {:<10} {}",
            row.t,
            row.largest,
            row.midpoint,
            yes_no(row.within())
        );
    }
    let _ = writeln!(
        out,
        "all moduli 2^t*3^s: {}; halving joins: {}; dead zone respected: {}",
        yes_no(report.all_moduli_smooth()),
        yes_no(report.all_halving_joins_smooth()),
        yes_no(report.dead_zone_respected())
    );
    out
}
