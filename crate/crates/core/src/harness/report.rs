use std::fmt::Write as _;

use crate::harness::experiment::SweepResult;

pub const CSV_HEADER: &str =
    "axis,strategy,trials,bleu_mean,bleu_std,cosine_mean,cosine_std,fail_rate,symbols_per_sentence_mean";

/// `%g`-style formatting with `sig` significant digits.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if exp < -4 || exp >= sig as i32 {
        let s = format!("{:.*e}", sig - 1, x);
        let (m, e) = s.split_once('e').expect("scientific format");
        format!("{}e{}", trim_zeros(m), e)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One line per `(axis, strategy)` row, numbers at 6 significant digits.
pub fn to_csv(result: &SweepResult) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &result.rows {
        let f = |x: f64| fmt_sig(x, 6);
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            f(r.axis),
            r.strategy,
            r.trials,
            f(r.bleu_mean),
            f(r.bleu_std),
            f(r.cosine_mean),
            f(r.cosine_std),
            f(r.fail_rate),
            f(r.symbols_per_sentence_mean)
        )
        .expect("writing to a String");
    }
    s
}

/// Gnuplot script drawing mean BLEU per strategy from `csv_path`.
pub fn gnuplot_script(result: &SweepResult, csv_path: &str) -> String {
    let mut strategies: Vec<_> = result.rows.iter().map(|r| r.strategy).collect();
    strategies.dedup();
    strategies.sort_by_key(|k| k.name());
    strategies.dedup();
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    writeln!(s, "set xlabel '{}'", result.axis_name).expect("writing to a String");
    s.push_str("set ylabel 'BLEU'\nset yrange [0:1]\nset grid\n");
    let plots: Vec<String> = strategies
        .iter()
        .map(|k| {
            format!(
                "'{csv_path}' using 1:(strcol(2) eq '{k}' ? $4 : 1/0) with linespoints title '{k}'"
            )
        })
        .collect();
    writeln!(s, "plot {}", plots.join(", \\\n     ")).expect("writing to a String");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::SweepRow;
    use crate::relay::StrategyKind;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.0, 6), "0");
        assert_eq!(fmt_sig(1.0, 6), "1");
        assert_eq!(fmt_sig(0.5f64.sqrt(), 6), "0.707107");
        assert_eq!(fmt_sig(-12.0, 6), "-12");
        assert_eq!(fmt_sig(123456789.0, 6), "1.23457e8");
        assert_eq!(fmt_sig(0.000012345678, 6), "1.23457e-5");
        assert_eq!(fmt_sig(96.0, 6), "96");
        assert_eq!(fmt_sig(0.1, 6), "0.1");
    }

    #[test]
    fn csv_layout() {
        let r = SweepResult {
            axis_name: "snr_db".into(),
            rows: vec![SweepRow {
                axis: -10.0,
                strategy: StrategyKind::DfSemantic,
                trials: 200,
                bleu_mean: 0.25,
                bleu_std: 0.1,
                cosine_mean: 0.5,
                cosine_std: 0.05,
                fail_rate: 0.0,
                symbols_per_sentence_mean: 112.0,
            }],
        };
        let csv = to_csv(&r);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "-10,df-semantic,200,0.25,0.1,0.5,0.05,0,112");
        assert!(gnuplot_script(&r, "out.csv").contains("'df-semantic'"));
    }
}
