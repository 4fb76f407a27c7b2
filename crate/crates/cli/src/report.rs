//! Evaluation CSV: `pair_id,psnr_db,ssim,iqi,fsim`, six decimals, `inf`
//! for infinite PSNR, LF line endings, closing `MEDIAN` row.

use moco_core::metrics::MetricReport;

pub const CSV_HEADER: &str = "pair_id,psnr_db,ssim,iqi,fsim";

pub fn fmt_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

/// Median with the two middle values averaged for even counts.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a == b {
            a
        } else {
            (a + b) / 2.0
        }
    }
}

pub fn median_report(rows: &[MetricReport]) -> MetricReport {
    let col = |f: fn(&MetricReport) -> f64| median(&rows.iter().map(f).collect::<Vec<_>>());
    MetricReport {
        pair_id: "MEDIAN".into(),
        psnr_db: col(|r| r.psnr_db),
        ssim: col(|r| r.ssim),
        iqi: col(|r| r.iqi),
        fsim: col(|r| r.fsim),
    }
}

fn row(r: &MetricReport) -> String {
    format!(
        "{},{},{},{},{}\n",
        r.pair_id,
        fmt_value(r.psnr_db),
        fmt_value(r.ssim),
        fmt_value(r.iqi),
        fmt_value(r.fsim)
    )
}

/// Rows sorted by `pair_id`, then the median row.
pub fn render_csv(rows: &[MetricReport]) -> String {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &sorted {
        out.push_str(&row(r));
    }
    out.push_str(&row(&median_report(&sorted)));
    out
}
