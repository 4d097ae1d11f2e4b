//! One-column numeric data: CSV with an optional header, or plain lines.
//! `#` comments and blank lines are skipped; row numbers in errors are
//! 1-based file lines.

use crate::CliError;

pub fn parse_values(text: &str, origin: &str) -> Result<Vec<f64>, CliError> {
    let mut values = Vec::new();
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 1 {
            return Err(CliError::input(format!("{origin}: row {line}: expected one column, found {}", fields.len())));
        }
        let field = row.trim_matches('"').trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => return Err(CliError::input(format!("{origin}: row {line}: `{field}` is not finite"))),
            // a non-numeric first row is a header
            Err(_) if first => {}
            Err(_) => return Err(CliError::input(format!("{origin}: row {line}: `{field}` is not a number"))),
        }
        first = false;
    }
    Ok(values)
}
