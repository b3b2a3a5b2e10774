//! Delimited-text readers and writers for panels.
//!
//! Price tables come in long form (`date,label,price`) or wide form (a date
//! column followed by one column per series); the layout and delimiter are
//! detected from the header line. Return panels are written wide with every
//! value at 17 significant digits.

use std::io::{Read, Write};

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{load_price_table, Frequency, PricePanel, PriceRecord, ReturnPanel};
use crate::error::{Error, Result};
use crate::label::SeriesLabel;

pub(crate) fn detect_delimiter(header: &str) -> u8 {
    b",;\t|"
        .iter()
        .copied()
        .max_by_key(|d| header.bytes().filter(|b| b == d).count())
        .filter(|d| header.as_bytes().contains(d))
        .unwrap_or(b',')
}

pub(crate) fn reader_for(text: &str) -> csv::Reader<&[u8]> {
    let header = text.lines().next().unwrap_or_default();
    csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_bytes())
}

fn parse_date(s: &str, row: usize) -> Result<NaiveDate> {
    s.parse::<NaiveDate>().map_err(|e| Error::Parse {
        row,
        message: format!("invalid ISO-8601 date {s:?}: {e}"),
    })
}

fn parse_value(s: &str, row: usize) -> Result<Option<f64>> {
    match s {
        "" | "NA" | "na" | "NaN" | "nan" | "null" => Ok(None),
        _ => s.parse::<f64>().map(Some).map_err(|e| Error::Parse {
            row,
            message: format!("invalid number {s:?}: {e}"),
        }),
    }
}

/// Reads a price table in long or wide layout. Row numbers in errors count
/// data lines from 1 (the header is line 0).
pub fn read_price_csv<R: Read>(mut input: R) -> Result<PricePanel> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut rdr = reader_for(&text);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let lower: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if lower == ["date", "label", "price"] {
        read_long(rdr)
    } else {
        read_wide(rdr, &headers)
    }
}

fn read_long(mut rdr: csv::Reader<&[u8]>) -> Result<PricePanel> {
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let price = parse_value(&rec[2], row)?.ok_or_else(|| Error::Parse {
            row,
            message: "missing price".into(),
        })?;
        if !(price > 0.0) {
            return Err(Error::NonPositivePrice { row, label: rec[1].to_owned(), price });
        }
        records.push(PriceRecord::new(parse_date(&rec[0], row)?, &rec[1], price));
    }
    load_price_table(records).map_err(|e| match e {
        // record indices are zero-based; report data-line numbers
        Error::ConflictingDuplicate { row, date, label } => {
            Error::ConflictingDuplicate { row: row + 1, date, label }
        }
        other => other,
    })
}

fn read_wide(mut rdr: csv::Reader<&[u8]>, headers: &[String]) -> Result<PricePanel> {
    if headers.len() < 2 {
        return Err(Error::invalid("wide price table needs a date column and at least one series"));
    }
    let labels: Vec<String> = headers[1..].to_vec();
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let date = parse_date(&rec[0], row)?;
        for (j, label) in labels.iter().enumerate() {
            if let Some(price) = parse_value(rec.get(j + 1).unwrap_or(""), row)? {
                if !(price > 0.0) {
                    return Err(Error::NonPositivePrice { row, label: label.clone(), price });
                }
                records.push(PriceRecord::new(date, label, price));
            }
        }
    }
    let panel = load_price_table(records)?;
    // keep the header's column order even when a column's first value is blank
    let order: Vec<usize> = labels
        .iter()
        .map(|l| panel.labels().iter().position(|p| p == l).ok_or_else(|| Error::EmptySeries(l.clone())))
        .collect::<Result<_>>()?;
    let n_t = panel.n_dates();
    PricePanel::new(
        panel.dates().to_vec(),
        labels,
        DMatrix::from_fn(n_t, order.len(), |t, j| panel.prices()[(t, order[j])]),
        DMatrix::from_fn(n_t, order.len(), |t, j| panel.missing()[(t, order[j])]),
    )
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a price panel in wide layout; missing observations are blank.
pub fn write_price_csv<W: Write>(panel: &PricePanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["date".to_owned()];
    header.extend(panel.labels().iter().cloned());
    w.write_record(&header)?;
    for t in 0..panel.n_dates() {
        let mut row = vec![panel.dates()[t].to_string()];
        row.extend((0..panel.n_series()).map(|i| panel.price(t, i).map(fmt_f64).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a return panel in wide layout.
pub fn write_return_csv<W: Write>(panel: &ReturnPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["date".to_owned()];
    header.extend(panel.labels().iter().map(ToString::to_string));
    w.write_record(&header)?;
    for t in 0..panel.n_rows() {
        let mut row = vec![panel.dates()[t].to_string()];
        row.extend((0..panel.n_series()).map(|i| fmt_f64(panel.returns()[(t, i)])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a wide return table as written by [`write_return_csv`]. The
/// frequency is not part of the file and must be supplied.
pub fn read_return_csv<R: Read>(mut input: R, frequency: Frequency) -> Result<ReturnPanel> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut rdr = reader_for(&text);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::invalid("return table needs a date column and at least one series"));
    }
    let labels: Vec<SeriesLabel> = headers.iter().skip(1).map(SeriesLabel::from).collect();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        dates.push(parse_date(&rec[0], row)?);
        for (j, label) in labels.iter().enumerate() {
            let v = parse_value(rec.get(j + 1).unwrap_or(""), row)?
                .ok_or_else(|| Error::Parse { row, message: format!("missing value for {label}") })?;
            values.push(v);
        }
    }
    let returns = DMatrix::from_row_slice(dates.len(), labels.len(), &values);
    ReturnPanel::new(dates, labels, returns, frequency)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_and_wide_layouts_agree() {
        let long = "date,label,price\n2003-01-02,A,100\n2003-01-02,B,50\n2003-01-03,A,101\n";
        let wide = "Date;A;B\n2003-01-02;100;50\n2003-01-03;101;\n";
        let a = read_price_csv(long.as_bytes()).unwrap();
        let b = read_price_csv(wide.as_bytes()).unwrap();
        assert_eq!(a.labels(), b.labels());
        assert_eq!(a.missing(), b.missing());
        assert_eq!(a.price(1, 0), b.price(1, 0));
        assert!(a.missing()[(1, 1)]);
    }

    #[test]
    fn errors_name_the_data_line() {
        let bad = "date,label,price\n2003-01-02,A,100\n2003-01-03,A,0\n";
        match read_price_csv(bad.as_bytes()).unwrap_err() {
            Error::NonPositivePrice { row, .. } => assert_eq!(row, 2),
            e => panic!("unexpected {e}"),
        }
        let bad_date = "date\tA\n2003-13-02\t1\n";
        assert!(matches!(read_price_csv(bad_date.as_bytes()).unwrap_err(), Error::Parse { row: 1, .. }));
    }

    #[test]
    fn return_csv_round_trips_bit_exactly() {
        let r = ReturnPanel::from_columns(
            vec![SeriesLabel::new("A"), SeriesLabel::lagged("A", 1)],
            &[vec![0.1, 1.0 / 3.0, -2.5e-17], vec![std::f64::consts::PI, 0.0, 1e300]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_return_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("date,A,A@lag1\n"));
        let back = read_return_csv(buf.as_slice(), Frequency::Daily).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn delimiter_detection() {
        assert_eq!(detect_delimiter("date,a,b"), b',');
        assert_eq!(detect_delimiter("date;a;b"), b';');
        assert_eq!(detect_delimiter("date\ta"), b'\t');
        assert_eq!(detect_delimiter("date"), b',');
    }
}
