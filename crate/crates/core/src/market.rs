//! Day-ahead market records for the wind plant and the derived hourly
//! export limit and availability.

use std::io::Read;

use serde::{Deserialize, Serialize};

pub const MARKET_CSV_HEADER: [&str; 6] =
    ["hour", "bid_price_usd_mwh", "cleared_price_usd_mwh", "hsl_mw", "lsl_mw", "cleared_power_mw"];

/// Synthetic one-week hourly dataset bundled with the crate. Prices and
/// wind shapes are generated, not recorded market data.
pub const DEMO_WEEK_CSV: &str = include_str!("../../../data/demo_week_synthetic.csv");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarketError {
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("line {line}: duplicate hour {hour}")]
    DuplicateHour { line: u64, hour: usize },
    #[error("missing hour {0}")]
    MissingHour(usize),
    #[error("market file has no rows")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketRecord {
    pub hour: usize,
    /// USD/MWh
    pub bid_price: f64,
    /// USD/MWh, the day-ahead price paid for exports
    pub cleared_price: f64,
    /// MW
    pub hsl: f64,
    /// MW, parsed and validated but not used by the scheduling model
    pub lsl: f64,
    /// MW
    pub cleared_power: f64,
}

impl MarketRecord {
    pub fn validate(&self) -> Result<(), String> {
        let vals = [self.bid_price, self.cleared_price, self.hsl, self.lsl, self.cleared_power];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        if !(0.0 <= self.lsl && self.lsl <= self.hsl) {
            return Err(format!("need 0 <= lsl ({}) <= hsl ({})", self.lsl, self.hsl));
        }
        if !(0.0 <= self.cleared_power && self.cleared_power <= self.hsl) {
            return Err(format!("need 0 <= cleared power ({}) <= hsl ({})", self.cleared_power, self.hsl));
        }
        Ok(())
    }
}

/// Maximum power the plant may sell in the hour.
///
/// The full availability when the bid exceeds the cleared price, otherwise the
/// cleared quantity. A tie takes the cleared-quantity branch.
pub fn export_limit(record: &MarketRecord) -> f64 {
    if record.bid_price > record.cleared_price {
        availability(record)
    } else {
        record.cleared_power
    }
}

/// Wind power available in the hour, taken as the high sustainable limit.
pub fn availability(record: &MarketRecord) -> f64 {
    record.hsl
}

/// Contiguous hourly records starting at hour 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSeries {
    records: Vec<MarketRecord>,
}

impl MarketSeries {
    /// Sorts by hour and checks validity and contiguity.
    pub fn new(mut records: Vec<MarketRecord>) -> Result<Self, MarketError> {
        if records.is_empty() {
            return Err(MarketError::Empty);
        }
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(|message| MarketError::Invalid { line: i as u64 + 2, message })?;
        }
        records.sort_by_key(|r| r.hour);
        check_contiguous(records.iter().map(|r| (r.hour, 0)))?;
        Ok(Self { records })
    }

    pub fn records(&self) -> &[MarketRecord] {
        &self.records
    }

    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    pub fn export_limits(&self) -> Vec<f64> {
        self.records.iter().map(export_limit).collect()
    }

    pub fn availabilities(&self) -> Vec<f64> {
        self.records.iter().map(availability).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cleared_price).collect()
    }

    /// Hours `[start, start + len)` renumbered from zero.
    pub fn window(&self, start: usize, len: usize) -> Result<Self, MarketError> {
        let end = (start + len).min(self.records.len());
        let records =
            self.records[start.min(end)..end].iter().enumerate().map(|(i, r)| MarketRecord { hour: i, ..*r }).collect();
        Self::new(records)
    }

    pub fn demo_week() -> Self {
        parse_market_csv(DEMO_WEEK_CSV.as_bytes()).expect("bundled demo data is valid")
    }
}

fn check_contiguous(sorted_hours: impl Iterator<Item = (usize, u64)>) -> Result<(), MarketError> {
    for (expected, (hour, line)) in sorted_hours.enumerate() {
        if hour < expected {
            return Err(MarketError::DuplicateHour { line, hour });
        }
        if hour > expected {
            return Err(MarketError::MissingHour(expected));
        }
    }
    Ok(())
}

/// Parses the market CSV format (see [`MARKET_CSV_HEADER`]).
pub fn parse_market_csv<R: Read>(source: R) -> Result<MarketSeries, MarketError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| MarketError::Parse { line: 1, message: e.to_string() })?.clone();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(MARKET_CSV_HEADER) {
        *slot = headers.iter().position(|h| h == name).ok_or(MarketError::MissingColumn(name))?;
    }
    let mut rows: Vec<(MarketRecord, u64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MarketError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let num = |k: usize| -> Result<f64, MarketError> {
            let raw = record.get(idx[k]).unwrap_or("");
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| MarketError::Parse {
                line,
                message: format!("{}: cannot parse `{raw}` as a finite number", MARKET_CSV_HEADER[k]),
            })
        };
        let raw_hour = record.get(idx[0]).unwrap_or("");
        let hour = raw_hour.parse::<usize>().map_err(|_| MarketError::Parse {
            line,
            message: format!("hour: cannot parse `{raw_hour}` as a non-negative integer"),
        })?;
        let rec = MarketRecord {
            hour,
            bid_price: num(1)?,
            cleared_price: num(2)?,
            hsl: num(3)?,
            lsl: num(4)?,
            cleared_power: num(5)?,
        };
        rec.validate().map_err(|message| MarketError::Invalid { line, message })?;
        rows.push((rec, line));
    }
    if rows.is_empty() {
        return Err(MarketError::Empty);
    }
    rows.sort_by_key(|(r, _)| r.hour);
    check_contiguous(rows.iter().map(|(r, line)| (r.hour, *line)))?;
    Ok(MarketSeries { records: rows.into_iter().map(|(r, _)| r).collect() })
}

/// Writes records in the format read by [`parse_market_csv`].
pub fn write_market_csv<W: std::io::Write>(series: &MarketSeries, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MARKET_CSV_HEADER)?;
    for r in series.records() {
        w.write_record([
            r.hour.to_string(),
            r.bid_price.to_string(),
            r.cleared_price.to_string(),
            r.hsl.to_string(),
            r.lsl.to_string(),
            r.cleared_power.to_string(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(bid: f64, cleared: f64, hsl: f64, cp: f64) -> MarketRecord {
        MarketRecord { hour: 0, bid_price: bid, cleared_price: cleared, hsl, lsl: 0.0, cleared_power: cp }
    }

    fn csv_of(rows: &[&str]) -> String {
        let mut s = MARKET_CSV_HEADER.join(",");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s
    }

    #[test]
    fn export_limit_branches() {
        assert_eq!(export_limit(&rec(25.0, 20.0, 150.0, 90.0)), 150.0);
        assert_eq!(export_limit(&rec(18.0, 20.0, 150.0, 90.0)), 90.0);
        assert_eq!(export_limit(&rec(20.0, 20.0, 150.0, 90.0)), 90.0);
    }

    #[test]
    fn availability_is_hsl() {
        assert_eq!(availability(&rec(0.0, 0.0, 150.0, 0.0)), 150.0);
        assert_eq!(availability(&rec(0.0, 0.0, 0.0, 0.0)), 0.0);
        let r = rec(-5.0, 30.0, 120.0, 80.0);
        assert!(availability(&r) >= r.cleared_power);
    }

    #[test]
    fn parses_rows_out_of_order() {
        let s = csv_of(&["1,5,20,100,10,50", "0,25,20,150,10,90"]);
        let m = parse_market_csv(s.as_bytes()).unwrap();
        assert_eq!(m.horizon(), 2);
        assert_eq!(m.export_limits(), vec![150.0, 50.0]);
        assert_eq!(m.availabilities(), vec![150.0, 100.0]);
    }

    #[test]
    fn missing_hour_reported() {
        let s = csv_of(&["0,1,2,10,1,5", "1,1,2,10,1,5", "3,1,2,10,1,5"]);
        let err = parse_market_csv(s.as_bytes()).unwrap_err();
        assert_eq!(err, MarketError::MissingHour(2));
        assert_eq!(err.to_string(), "missing hour 2");
    }

    #[test]
    fn duplicate_hour_reported_with_line() {
        let s = csv_of(&["0,1,2,10,1,5", "1,1,2,10,1,5", "1,1,2,10,1,5"]);
        assert!(matches!(parse_market_csv(s.as_bytes()), Err(MarketError::DuplicateHour { hour: 1, .. })));
    }

    #[test]
    fn hsl_below_lsl_names_row() {
        let s = csv_of(&["0,1,2,10,1,5", "1,1,2,10,20,5"]);
        match parse_market_csv(s.as_bytes()) {
            Err(MarketError::Invalid { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        assert_eq!(parse_market_csv(csv_of(&[]).as_bytes()).unwrap_err(), MarketError::Empty);
        let s = "hour,bid_price_usd_mwh\n0,1\n";
        assert!(matches!(parse_market_csv(s.as_bytes()), Err(MarketError::MissingColumn(_))));
        let s = csv_of(&["0,x,2,10,1,5"]);
        assert!(matches!(parse_market_csv(s.as_bytes()), Err(MarketError::Parse { line: 2, .. })));
        let s = csv_of(&["-1,1,2,10,1,5"]);
        assert!(matches!(parse_market_csv(s.as_bytes()), Err(MarketError::Parse { .. })));
        let s = csv_of(&["0,1,NaN,10,1,5"]);
        assert!(matches!(parse_market_csv(s.as_bytes()), Err(MarketError::Parse { .. })));
    }

    #[test]
    fn negative_prices_are_allowed() {
        let s = csv_of(&["0,-20,-5,10,1,5"]);
        let m = parse_market_csv(s.as_bytes()).unwrap();
        assert_eq!(m.prices(), vec![-5.0]);
        assert_eq!(m.export_limits(), vec![5.0]);
    }

    #[test]
    fn window_renumbers() {
        let s = csv_of(&["0,1,2,10,1,5", "1,1,3,10,1,5", "2,1,4,10,1,5"]);
        let m = parse_market_csv(s.as_bytes()).unwrap();
        let w = m.window(1, 2).unwrap();
        assert_eq!(w.horizon(), 2);
        assert_eq!(w.records()[0].hour, 0);
        assert_eq!(w.prices(), vec![3.0, 4.0]);
    }
}
