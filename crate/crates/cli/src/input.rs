use std::fs;
use std::path::Path;

use nsvh::calibrate::{OptionSide, QuoteKind, SmileQuote};
use nsvh::moments::percent_returns;
use nsvh::Params;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError {
        kind: "invalid_input",
        ..CliError::usage(format!("{what} file {}: {e}", path.display()))
    })
}

pub fn read_params(path: &Path) -> CliResult<Params> {
    parse_json(path, "params")
}

/// One numeric column. A non-numeric first row is taken as the header.
pub fn read_column(path: &Path) -> CliResult<Vec<f64>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(&path.display().to_string(), e))?;
        let Some(field) = rec.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(x) => out.push(x),
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(CliError::usage(format!(
                    "{}: line {}: not a number: {field:?}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::usage(format!("{}: no numeric rows", path.display())));
    }
    Ok(out)
}

/// Returns in percent; with `levels` the column holds index levels.
pub fn read_returns(path: &Path, levels: bool) -> CliResult<Vec<f64>> {
    let col = read_column(path)?;
    if levels {
        Ok(percent_returns(&col)?)
    } else {
        Ok(col)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuoteEntry {
    offset: f64,
    kind: QuoteKind,
    value: f64,
    #[serde(default)]
    side: Option<OptionSide>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuoteFile {
    #[serde(default)]
    forward: Option<f64>,
    #[serde(default)]
    expiry: Option<f64>,
    quotes: Vec<QuoteEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuoteSet {
    pub forward: Option<f64>,
    pub expiry: Option<f64>,
    pub quotes: Vec<SmileQuote>,
}

pub fn read_quotes(path: &Path) -> CliResult<QuoteSet> {
    let file: QuoteFile = parse_json(path, "quotes")?;
    let mut quotes = Vec::with_capacity(file.quotes.len());
    for (i, q) in file.quotes.into_iter().enumerate() {
        let quote = match (q.kind, q.side) {
            (QuoteKind::NormalVol, _) => SmileQuote::normal_vol(q.offset, q.value),
            (QuoteKind::OptionPrice, Some(side)) => SmileQuote::price(q.offset, q.value, side),
            (QuoteKind::OptionPrice, None) => {
                return Err(CliError::usage(format!("quote {i}: option_price needs a side")))
            }
        };
        quotes.push(quote);
    }
    Ok(QuoteSet {
        forward: file.forward,
        expiry: file.expiry,
        quotes,
    })
}
