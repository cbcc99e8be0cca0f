use std::io::{self, Write};

use storykg_core::annotation::{StatisticsReport, STAT_ROWS};
use storykg_core::concepts::CandidateConcept;
use storykg_core::rank::RankedTriple;

/// Splits in display order; others (like `unsplit`) follow.
const SPLIT_ORDER: [&str; 4] = ["train", "val", "test", "all"];

pub fn ranked(out: &mut dyn Write, ranked: &[RankedTriple]) -> io::Result<()> {
    writeln!(out, "{:>4}  {:>8}  {:>8}  {:>8}  triple", "rank", "s_bar", "w", "score")?;
    for (i, r) in ranked.iter().enumerate() {
        writeln!(
            out,
            "{:>4}  {:>8.4}  {:>8.4}  {:>8.4}  {}",
            i + 1,
            r.mean_similarity,
            r.weight,
            r.score,
            r.triple
        )?;
    }
    Ok(())
}

pub fn candidates(out: &mut dyn Write, cands: &[CandidateConcept]) -> io::Result<()> {
    let width = cands.iter().map(|c| c.lemma.len()).max().unwrap_or(5).max(5);
    writeln!(out, "  {:<width$}  {:<6}  {:<14}  spans", "lemma", "pos", "roles")?;
    for c in cands {
        let roles: Vec<String> = c.roles.iter().map(|r| format!("{r:?}").to_lowercase()).collect();
        let spans: Vec<String> = c.spans.iter().map(|o| format!("{}..{}", o.span.start, o.span.end)).collect();
        writeln!(
            out,
            "  {:<width$}  {:<6}  {:<14}  {}",
            c.lemma,
            c.pos.tag(),
            roles.join(","),
            spans.join(" ")
        )?;
    }
    Ok(())
}

fn split_columns(report: &StatisticsReport) -> Vec<&str> {
    let mut cols: Vec<&str> = SPLIT_ORDER
        .iter()
        .copied()
        .filter(|s| report.splits.contains_key(*s))
        .collect();
    cols.extend(
        report
            .splits
            .keys()
            .map(String::as_str)
            .filter(|k| !SPLIT_ORDER.contains(k)),
    );
    cols
}

/// Corpus statistics per split, then question-type and relation tables.
pub fn statistics(out: &mut dyn Write, report: &StatisticsReport) -> io::Result<()> {
    let cols = split_columns(report);
    const CELL: usize = 26;
    write!(out, "{:<18}", "")?;
    for c in &cols {
        write!(out, "{c:>CELL$}")?;
    }
    writeln!(out)?;
    for (label, get) in [
        ("stories", (|s| s.stories) as fn(&storykg_core::annotation::SplitStatistics) -> usize),
        ("sections", |s| s.sections),
        ("questions", |s| s.questions),
    ] {
        write!(out, "{label:<18}")?;
        for c in &cols {
            write!(out, "{:>CELL$}", get(&report.splits[*c]))?;
        }
        writeln!(out)?;
    }
    for row in STAT_ROWS {
        write!(out, "{row:<18}")?;
        for c in &cols {
            let cell = report.splits[*c]
                .rows
                .iter()
                .find(|(l, _)| l == row)
                .map(|(_, s)| format!("{:.2} ± {:.2} [{:.0}, {:.0}]", s.mean, s.sd, s.min, s.max))
                .unwrap_or_else(|| "-".into());
            write!(out, "{cell:>CELL$}")?;
        }
        writeln!(out)?;
    }

    writeln!(out)?;
    writeln!(out, "{:<14}{:>8}{:>10}", "question type", "count", "percent")?;
    for r in &report.question_types {
        writeln!(out, "{:<14}{:>8}{:>9.2}%", r.key.as_str(), r.count, r.fraction * 100.0)?;
    }

    writeln!(out)?;
    writeln!(out, "{:<18}{:>8}{:>10}", "relation", "count", "percent")?;
    for r in &report.relations {
        writeln!(out, "{:<18}{:>8}{:>9.2}%", r.key.phrase(), r.count, r.fraction * 100.0)?;
    }
    Ok(())
}

/// Tab-separated `key=value` lines for scripts.
pub fn machine_lines(out: &mut dyn Write, report: &StatisticsReport) -> io::Result<()> {
    for (split, stats) in &report.splits {
        writeln!(
            out,
            "split\tname={split}\tstories={}\tsections={}\tquestions={}",
            stats.stories, stats.sections, stats.questions
        )?;
        for (row, s) in &stats.rows {
            writeln!(
                out,
                "stat\tsplit={split}\trow={row}\tmean={:.6}\tsd={:.6}\tmin={}\tmax={}",
                s.mean, s.sd, s.min, s.max
            )?;
        }
    }
    for r in &report.question_types {
        writeln!(out, "qtype\tname={}\tcount={}\tfraction={:.6}", r.key.as_str(), r.count, r.fraction)?;
    }
    for r in &report.relations {
        writeln!(out, "relation\tname={}\tcount={}\tfraction={:.6}", r.key.name(), r.count, r.fraction)?;
    }
    Ok(())
}
