//! Plain-text rendering for terminal output.

use std::path::Path;

use hypex_core::counterfactual::toys::OracleCheck;
use hypex_core::gbdt::{CvReport, EvalReport, GridPoint};
use hypex_core::session::{CaseSet, ExplanationBundle};
use hypex_core::{ClassLabel, DatasetSchema, IngestReport, TrainConfig};

const BAR_WIDTH: usize = 20;

pub fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e12 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    }
}

/// Left-aligned first column, the rest padded to their widest cell.
fn table(rows: &[Vec<String>]) {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:<w$}", w = widths[c]))
            .collect();
        println!("  {}", line.join("  ").trim_end());
    }
}

pub fn ingest(report: &IngestReport, schema: &DatasetSchema) {
    println!(
        "read {} rows, dropped {} with missing values, kept {}",
        report.rows_read, report.rows_dropped, report.records
    );
    let props = report.class_proportions();
    let mut rows = vec![vec!["class".into(), "records".into(), "share".into()]];
    for c in ClassLabel::all() {
        rows.push(vec![
            schema.class_name(c).to_owned(),
            report.class_counts[c.index()].to_string(),
            format!("{:.2}%", 100.0 * props[c.index()]),
        ]);
    }
    table(&rows);
}

pub fn eval_report(r: &EvalReport) {
    println!("accuracy {:.4}", r.accuracy);
    let mut rows = vec![vec!["class".into(), "precision".into(), "recall".into(), "f1".into()]];
    for c in ClassLabel::all() {
        let i = c.index();
        rows.push(vec![
            c.to_string(),
            format!("{:.4}", r.precision[i]),
            format!("{:.4}", r.recall[i]),
            format!("{:.4}", r.f1[i]),
        ]);
    }
    table(&rows);
    println!("confusion (rows true, columns predicted)");
    let mut rows = vec![std::iter::once(String::new()).chain(ClassLabel::all().map(|c| c.to_string())).collect()];
    for c in ClassLabel::all() {
        let mut row = vec![c.to_string()];
        row.extend(r.confusion[c.index()].iter().map(|n| n.to_string()));
        rows.push(row);
    }
    table(&rows);
}

pub fn train(out: &Path, fingerprint: &str, config: &TrainConfig, n_train: usize, n_test: usize, r: &EvalReport) {
    println!("model written to {} (fingerprint {fingerprint})", out.display());
    println!(
        "rounds {}, depth {}, learning rate {}, seed {}; {n_train} training and {n_test} held-out records",
        config.n_rounds, config.max_depth, config.learning_rate, config.seed
    );
    println!("held-out evaluation:");
    eval_report(r);
}

pub fn grid(points: &[GridPoint]) {
    println!("grid search (best first)");
    let mut rows = vec![vec!["depth".into(), "learning rate".into(), "accuracy".into(), "macro f1".into()]];
    for p in points {
        rows.push(vec![
            p.config.max_depth.to_string(),
            num(p.config.learning_rate),
            format!("{:.4}", p.mean_accuracy),
            format!("{:.4}", p.mean_f1),
        ]);
    }
    table(&rows);
}

pub fn cv(cv: &CvReport) {
    println!("{}-fold cross-validation (seed {})", cv.k, cv.seed);
    let mut header = vec!["fold".to_owned(), "accuracy".to_owned()];
    header.extend(ClassLabel::all().map(|c| format!("f1 {c}")));
    let mut rows = vec![header];
    for (i, f) in cv.folds.iter().enumerate() {
        let mut row = vec![(i + 1).to_string(), format!("{:.4}", f.accuracy)];
        row.extend(f.f1.iter().map(|v| format!("{v:.4}")));
        rows.push(row);
    }
    let mut mean = vec!["mean".to_owned(), format!("{:.4}", cv.mean.accuracy)];
    mean.extend(cv.mean.f1.iter().map(|v| format!("{v:.4}")));
    rows.push(mean);
    table(&rows);
}

fn case_table(title: &str, set: &CaseSet, bundle: &ExplanationBundle) {
    println!();
    if set.requested == 0 {
        println!("{title}: none requested");
        return;
    }
    println!("{title}: {} of {} requested", set.cases.len(), set.requested);
    if set.budget_exhausted {
        println!("  fewer found than requested");
    }
    if set.cases.is_empty() {
        return;
    }
    let mut header = vec!["feature".to_owned(), "query".to_owned()];
    header.extend(set.cases.iter().enumerate().map(|(i, _)| format!("#{}", i + 1)));
    let mut rows = vec![header];
    for (f, q) in bundle.record.iter().enumerate() {
        let mut row = vec![q.name.clone(), num(q.value)];
        for case in &set.cases {
            let cell = &case.values[f];
            row.push(match cell.was {
                Some(old) if cell.changed => format!("{} → {} *", num(old), num(cell.value)),
                _ => num(cell.value),
            });
        }
        rows.push(row);
    }
    let mut prox = vec!["proximity".to_owned(), String::new()];
    prox.extend(set.cases.iter().map(|c| format!("{:.4}", c.proximity)));
    let mut sparsity = vec!["changed".to_owned(), String::new()];
    sparsity.extend(set.cases.iter().map(|c| c.sparsity.to_string()));
    rows.push(prox);
    rows.push(sparsity);
    table(&rows);
}

pub fn bundle(b: &ExplanationBundle, schema: &DatasetSchema) {
    println!(
        "record {} under hypothesis {} (seed {}, model {})",
        b.record_id,
        schema.class_name(b.hypothesis),
        b.provenance.seed,
        b.provenance.model_fingerprint
    );
    println!();
    println!("Record");
    let rows: Vec<Vec<String>> = b.record.iter().map(|c| vec![c.name.clone(), num(c.value)]).collect();
    table(&rows);

    case_table(
        &format!("Similar cases ({})", schema.class_name(b.hypothesis)),
        &b.similar_cases,
        b,
    );
    for (class, set) in &b.counterexamples {
        case_table(&format!("Counterexamples: {}", schema.class_name(*class)), set, b);
    }

    if let Some(iv) = &b.importance {
        println!();
        println!(
            "Feature importance toward {} (surrogate r2 {:.3}{})",
            schema.class_name(iv.hypothesis),
            iv.surrogate_r2,
            if iv.quality == hypex_core::FitQuality::Degenerate { ", degenerate fit" } else { "" }
        );
        let max = iv.weights.iter().map(|w| w.weight.abs()).fold(0.0, f64::max);
        let mut rows = Vec::new();
        for j in iv.ranked() {
            let w = &iv.weights[j];
            let len = if max > 0.0 {
                ((w.weight.abs() / max) * BAR_WIDTH as f64).round() as usize
            } else {
                0
            };
            let (neg, pos) = if w.weight < 0.0 {
                (format!("{:>BAR_WIDTH$}", "-".repeat(len)), String::new())
            } else {
                (" ".repeat(BAR_WIDTH), "+".repeat(len))
            };
            rows.push(vec![w.name.clone(), format!("{:+.4}", w.weight), format!("{neg}|{pos}")]);
        }
        table(&rows);
    }
}

pub fn oracle(checks: &[OracleCheck]) {
    for c in checks {
        let Some(opt) = &c.optimum else {
            println!("{}: no counterfactual in grid, pass (vacuous)", c.toy);
            continue;
        };
        println!(
            "{}: optimum {:?} proximity {:.4} sparsity {}",
            c.toy, opt.candidate.values, opt.proximity, opt.sparsity
        );
        for r in &c.runs {
            let ratio = r.ratio.map_or_else(|| "inf".to_owned(), |v| format!("{v:.2}"));
            println!(
                "  seed {}: ratio {ratio}, sparsity {}  {}",
                r.seed,
                r.sparsity.map_or_else(|| "-".to_owned(), |s| s.to_string()),
                if r.pass { "pass" } else { "FAIL" }
            );
        }
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} of {} toys pass", checks.len() - failed, checks.len());
}
