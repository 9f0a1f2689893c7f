//! Price ingestion: CSV of daily prices to a matrix of net returns.

use robustmsd::numerics::Matrix;

use crate::CliError;

/// Parsed price file: asset names from the header and the derived
/// one-period net returns, one row per consecutive price pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub asset_names: Vec<String>,
    pub returns: Matrix,
}

/// Reads `date,asset1,asset2,...` with ISO dates, strictly increasing,
/// positive prices and no gaps, and returns per-asset net returns
/// `P_t / P_{t-1} - 1`.
pub fn ingest_prices(path: &str) -> Result<PriceTable, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read prices {path}: {e}")))?;
    ingest_prices_text(&text).map_err(|e| match e {
        CliError::Parse(msg) => CliError::Parse(format!("{path}: {msg}")),
        other => other,
    })
}

/// Same parser on in-memory text; the file reader wraps it.
pub fn ingest_prices_text(text: &str) -> Result<PriceTable, CliError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::Parse("empty price file".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 {
        return Err(CliError::Parse(
            "header must be 'date,asset1[,asset2,...]'".into(),
        ));
    }
    let asset_names: Vec<String> = columns[1..].iter().map(|c| c.to_string()).collect();
    let width = asset_names.len();

    let mut dates: Vec<String> = Vec::new();
    let mut prices: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in lines {
        let row_no = line_no + 1; // 1-based, counting the header as row 1
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != width + 1 {
            return Err(CliError::Parse(format!(
                "row {row_no}: expected {} fields, got {}",
                width + 1,
                fields.len()
            )));
        }
        let date = fields[0];
        if date.is_empty() {
            return Err(CliError::Parse(format!("row {row_no}: missing date")));
        }
        if let Some(prev) = dates.last() {
            if date == prev {
                return Err(CliError::Parse(format!("row {row_no}: duplicate date {date}")));
            }
            if date < prev.as_str() {
                return Err(CliError::Parse(format!(
                    "row {row_no}: dates must increase, {date} follows {prev}"
                )));
            }
        }
        let mut row = Vec::with_capacity(width);
        for (j, field) in fields[1..].iter().enumerate() {
            if field.is_empty() {
                return Err(CliError::Parse(format!(
                    "row {row_no}, column {}: missing value",
                    asset_names[j]
                )));
            }
            let price: f64 = field.parse().map_err(|_| {
                CliError::Parse(format!(
                    "row {row_no}, column {}: not a number: '{field}'",
                    asset_names[j]
                ))
            })?;
            if !(price > 0.0) || !price.is_finite() {
                return Err(CliError::Parse(format!(
                    "row {row_no}, column {}: price must be positive, got {price}",
                    asset_names[j]
                )));
            }
            row.push(price);
        }
        dates.push(date.to_string());
        prices.push(row);
    }

    if prices.len() < 2 {
        return Err(CliError::Parse(format!(
            "need at least 2 price rows, got {}",
            prices.len()
        )));
    }
    let mut returns = Vec::with_capacity(prices.len() - 1);
    for t in 1..prices.len() {
        let row: Vec<f64> = (0..width)
            .map(|j| prices[t][j] / prices[t - 1][j] - 1.0)
            .collect();
        returns.push(row);
    }
    let returns = Matrix::from_rows(&returns)
        .map_err(|e| CliError::Parse(format!("return matrix: {e}")))?;
    Ok(PriceTable { asset_names, returns })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_return() {
        let table = ingest_prices_text("date,A\n2015-01-01,100\n2015-01-02,110\n").unwrap();
        assert_eq!(table.asset_names, vec!["A"]);
        assert_eq!(table.returns.rows(), 1);
        assert!((table.returns.get(0, 0) - 0.10).abs() < 1e-15);
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let table =
            ingest_prices_text("date,A,B\n2015-01-01,5,7\n2015-01-02,5,7\n2015-01-05,5,7\n")
                .unwrap();
        assert_eq!(table.returns.rows(), 2);
        assert_eq!(table.returns.max_abs(), 0.0);
    }

    #[test]
    fn price_rows_to_return_rows_arithmetic() {
        let mut text = String::from("date,A\n");
        for day in 0..262 {
            text.push_str(&format!("2015-{:03},{}\n", day + 1, 100 + day));
        }
        let table = ingest_prices_text(&text).unwrap();
        assert_eq!(table.returns.rows(), 261);
    }

    #[test]
    fn missing_value_names_row_and_column() {
        let err =
            ingest_prices_text("date,A,B\n2015-01-01,1,2\n2015-01-02,1,\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3"), "{msg}");
        assert!(msg.contains("column B"), "{msg}");
    }

    #[test]
    fn nonpositive_price_is_rejected() {
        let err = ingest_prices_text("date,A\n2015-01-01,1\n2015-01-02,0\n").unwrap_err();
        assert!(err.to_string().contains("positive"));
    }

    #[test]
    fn duplicate_and_decreasing_dates_are_rejected() {
        let dup = ingest_prices_text("date,A\n2015-01-01,1\n2015-01-01,2\n").unwrap_err();
        assert!(dup.to_string().contains("duplicate date"));
        let dec =
            ingest_prices_text("date,A\n2015-01-02,1\n2015-01-01,2\n").unwrap_err();
        assert!(dec.to_string().contains("must increase"));
    }

    #[test]
    fn too_few_rows_is_rejected() {
        assert!(ingest_prices_text("date,A\n2015-01-01,1\n").is_err());
    }
}
