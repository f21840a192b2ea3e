//! Display rounding for the printed tables.

/// Probabilities: `~1` above `1 - 1e-4`, two significant figures in
/// scientific notation below `1e-2`, three decimals otherwise.
pub fn probability(p: f64) -> String {
    if p > 1.0 - 1e-4 {
        "~1".into()
    } else if p == 0.0 {
        "0".into()
    } else if p < 1e-2 {
        format!("{p:.1e}")
    } else {
        format!("{p:.3}")
    }
}

/// Decimal places that show `x` (in `(0, 1)`) to one significant figure.
fn one_sig_decimals(x: f64) -> usize {
    let mut d = (-x.log10().floor()) as i32;
    // Rounding can carry into the next decade, e.g. 0.096 -> 0.1.
    if (x * 10f64.powi(d)).round() >= 10.0 {
        d -= 1;
    }
    d.max(0) as usize
}

/// Integer with thousands separators.
pub fn grouped(x: f64) -> String {
    let r = x.round();
    let neg = r < 0.0;
    let digits = format!("{:.0}", r.abs());
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    if neg {
        format!("-{out}")
    } else {
        out
    }
}

/// Normalized bounty: one significant figure below 1, else a whole number.
pub fn bounty(b: f64) -> String {
    if b == 0.0 {
        "0".into()
    } else if b.abs() < 1.0 {
        format!("{b:.*}", one_sig_decimals(b.abs()))
    } else {
        grouped(b)
    }
}

/// The value `bounty` displays, parsed back.
pub fn displayed_bounty(b: f64) -> f64 {
    bounty(b).replace(',', "").parse().unwrap_or(b)
}

/// Main-table USD: cents, or `~$0` below half a cent.
pub fn usd_cents(x: f64) -> String {
    if x.abs() < 0.005 {
        "~$0".into()
    } else if x.abs() >= 1000.0 {
        format!(
            "${}.{:02}",
            grouped(x.trunc()),
            ((x.abs().fract()) * 100.0).round() as u32 % 100
        )
    } else {
        format!("${x:.2}")
    }
}

/// Cost-table USD: one significant figure below $1, cents below $10,
/// three significant figures as a whole number above.
pub fn usd_cost(x: f64) -> String {
    if x == 0.0 {
        "$0".into()
    } else if x.abs() < 1.0 {
        format!("${x:.*}", one_sig_decimals(x.abs()))
    } else if x.abs() < 10.0 {
        format!("${x:.2}")
    } else {
        let digits = x.abs().log10().floor() as i32 + 1;
        let scale = 10f64.powi(digits - 3);
        format!("${}", grouped((x / scale).round() * scale))
    }
}

/// Whole dollars print without cents; anything else as [`usd_cost`].
pub fn usd_quote(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() >= 1.0 {
        format!("${}", grouped(x))
    } else {
        usd_cost(x)
    }
}

/// Percentage to two decimals.
pub fn percent(ratio: f64) -> String {
    format!("{:.2}%", ratio * 100.0)
}

/// One decimal.
pub fn one_decimal(x: f64) -> String {
    format!("{x:.1}")
}

/// Console table with a header rule. Columns listed in `left` are
/// left-aligned, the rest right-aligned.
pub fn render_table(headers: &[&str], rows: &[Vec<String>], left: &[usize]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if left.contains(&i) {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(
        &widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("  "),
    );
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities() {
        assert_eq!(probability(8.0e-5), "8.0e-5");
        assert_eq!(probability(6.5e-4), "6.5e-4");
        assert_eq!(probability(1.9e-21), "1.9e-21");
        assert_eq!(probability(0.993), "0.993");
        assert_eq!(probability(1.0 - 1e-11), "~1");
        assert_eq!(probability(0.0), "0");
    }

    #[test]
    fn bounties() {
        assert_eq!(bounty(0.04), "0.04");
        assert_eq!(bounty(0.0399), "0.04");
        assert_eq!(bounty(0.096), "0.1");
        assert_eq!(bounty(496.6), "497");
        assert_eq!(bounty(2610.3), "2,610");
        assert_eq!(displayed_bounty(2610.3), 2610.0);
    }

    #[test]
    fn currency() {
        assert_eq!(usd_cents(49.7), "$49.70");
        assert_eq!(usd_cents(0.004), "~$0");
        assert_eq!(usd_cents(1234.5), "$1,234.50");
        assert_eq!(usd_cost(3.398), "$3.40");
        assert_eq!(usd_cost(33.98), "$34");
        assert_eq!(usd_cost(3398.0), "$3,400");
        assert_eq!(usd_cost(0.002), "$0.002");
        assert_eq!(usd_cost(0.02), "$0.02");
        assert_eq!(usd_cost(2.0), "$2.00");
        assert_eq!(percent(4.0e-4), "0.04%");
        assert_eq!(usd_quote(5.0), "$5");
        assert_eq!(usd_quote(5000.0), "$5,000");
        assert_eq!(usd_quote(2.5), "$2.50");
    }

    #[test]
    fn table_layout() {
        let t = render_table(&["a", "bb"], &[vec!["1".into(), "22".into()]], &[]);
        assert_eq!(t, "a  bb\n-  --\n1  22\n");
        let t = render_table(&["name", "v"], &[vec!["x".into(), "1".into()]], &[0]);
        assert_eq!(t, "name  v\n----  -\nx     1\n");
    }
}
