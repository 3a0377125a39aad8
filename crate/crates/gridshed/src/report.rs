//! Box-plot style summary statistics for per-bus error series.

/// Five-number summary plus mean; quartiles use linear interpolation
/// between order statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// `None` for an empty series.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(BoxStats {
        n: sorted.len(),
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
    })
}

/// CSV: `label,n,min,q1,median,q3,max,mean`, one row per labeled series,
/// plus an `aggregate` row averaging the per-series means.
pub fn stats_csv(rows: &[(String, BoxStats)]) -> String {
    let mut s = String::from("label,n,min,q1,median,q3,max,mean\n");
    for (label, b) in rows {
        s.push_str(&format!(
            "{label},{},{},{},{},{},{},{}\n",
            b.n, b.min, b.q1, b.median, b.q3, b.max, b.mean
        ));
    }
    if !rows.is_empty() {
        let mean_of_means = rows.iter().map(|(_, b)| b.mean).sum::<f64>() / rows.len() as f64;
        let total_n: usize = rows.iter().map(|(_, b)| b.n).sum();
        s.push_str(&format!(
            "aggregate,{total_n},,,,,,{mean_of_means}\n"
        ));
    }
    s
}

/// Fixed-width plain-text table of the same rows.
pub fn stats_table(rows: &[(String, BoxStats)]) -> String {
    let mut s = format!(
        "{:<12} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "label", "n", "min", "q1", "median", "q3", "max", "mean"
    );
    for (label, b) in rows {
        s.push_str(&format!(
            "{:<12} {:>6} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
            label, b.n, b.min, b.q1, b.median, b.q3, b.max, b.mean
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_checked_quartiles() {
        // 1..=5: quartiles fall exactly on order statistics
        let b = box_stats(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!(b.min, 1.0);
        assert_eq!(b.q1, 2.0);
        assert_eq!(b.median, 3.0);
        assert_eq!(b.q3, 4.0);
        assert_eq!(b.max, 5.0);
        assert_eq!(b.mean, 3.0);
        // interpolated case: 4 points
        let b = box_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(b.q1, 1.75);
        assert_eq!(b.median, 2.5);
        assert_eq!(b.q3, 3.25);
    }

    #[test]
    fn degenerate_series() {
        assert!(box_stats(&[]).is_none());
        let b = box_stats(&[7.0]).unwrap();
        assert_eq!((b.min, b.median, b.max, b.mean), (7.0, 7.0, 7.0, 7.0));
    }

    #[test]
    fn csv_has_aggregate_row() {
        let rows = vec![
            ("bus3".to_string(), box_stats(&[1.0, 3.0]).unwrap()),
            ("bus4".to_string(), box_stats(&[5.0, 7.0]).unwrap()),
        ];
        let csv = stats_csv(&rows);
        assert!(csv.starts_with("label,n,min,q1,median,q3,max,mean\n"));
        let last = csv.lines().last().unwrap();
        // per-series means are 2 and 6; aggregate mean of means is 4
        assert_eq!(last, "aggregate,4,,,,,,4");
        let table = stats_table(&rows);
        assert!(table.contains("bus3"));
    }
}
