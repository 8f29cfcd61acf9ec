use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::EventSeries;
use crate::{Error, Result, Scalar};

pub const CSV_HEADER: [&str; 4] = ["index", "input", "output", "event_end"];

pub fn read_series_csv<T: Scalar, R: Read>(reader: R, name: &str) -> Result<EventSeries<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv { row: 0, message: e.to_string() })?
        .clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Csv {
            row: 0,
            message: format!("missing column `{name}`"),
        })
    };
    let (c_in, c_out, c_end) = (column("input")?, column("output")?, column("event_end")?);

    let mut input = Vec::new();
    let mut output = Vec::new();
    let mut event_ends = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // data rows are numbered from 1, the header is row 0
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv { row, message: e.to_string() })?;
        let field = |c: usize| -> Result<&str> {
            record.get(c).ok_or_else(|| Error::Csv {
                row,
                message: format!("missing field {}", c + 1),
            })
        };
        let parse = |c: usize, what: &str| -> Result<T> {
            let text = field(c)?;
            text.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::of)
                .ok_or_else(|| Error::Csv {
                    row,
                    message: format!("{what} `{text}` is not a finite number"),
                })
        };
        input.push(parse(c_in, "input")?);
        output.push(parse(c_out, "output")?);
        match field(c_end)? {
            "1" => event_ends.push(input.len() - 1),
            "0" => {}
            other => {
                return Err(Error::Csv {
                    row,
                    message: format!("event_end must be 0 or 1, got `{other}`"),
                })
            }
        }
    }
    if input.is_empty() {
        return Err(Error::Csv { row: 0, message: "no data rows".into() });
    }
    if event_ends.is_empty() {
        return Err(Error::Csv { row: 0, message: "no event_end marks".into() });
    }
    if *event_ends.last().unwrap() != input.len() - 1 {
        return Err(Error::Csv {
            row: input.len(),
            message: "last row must carry event_end = 1".into(),
        });
    }
    EventSeries::new(name, input, output, event_ends)
}

pub fn load_series_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<EventSeries<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_series_csv(file, &name)
}

/// Writes `index,input,output,event_end` rows. Values use the shortest
/// decimal form that parses back to the same number.
pub fn write_series_csv<T: Scalar, W: Write>(series: &EventSeries<T>, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Csv { row: 0, message: e.to_string() };
    wtr.write_record(CSV_HEADER).map_err(csv_err)?;
    let mut ends = series.event_ends().iter().peekable();
    for (i, (x, y)) in series.input().iter().zip(series.output()).enumerate() {
        let end = if ends.peek() == Some(&&i) {
            ends.next();
            "1"
        } else {
            "0"
        };
        wtr.write_record([i.to_string(), x.to_string(), y.to_string(), end.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Csv { row: 0, message: e.to_string() })
}

pub fn save_series_csv<T: Scalar>(series: &EventSeries<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_series_csv(series, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_rows_two_events() {
        let text = "index,input,output,event_end\n0,0.1,1.0,0\n1,0.2,2.0,1\n2,0.3,3.0,0\n3,0.4,4.0,1\n";
        let s = read_series_csv::<f64, _>(text.as_bytes(), "t").unwrap();
        assert_eq!(s.n_events(), 2);
        assert_eq!(s.event_range(0), 0..2);
        assert_eq!(s.event_range(1), 2..4);
    }

    #[test]
    fn error_cases() {
        let cases = [
            ("", "missing column"),
            ("index,input,output,event_end\n", "no data"),
            ("index,input,event_end\n0,1,1\n", "missing column"),
            ("index,input,output,event_end\n0,x,1,1\n", "not a finite"),
            ("index,input,output,event_end\n0,1,1,0\n", "no event_end"),
            ("index,input,output,event_end\n0,1,1,1\n1,1,1,0\n", "last row"),
            ("index,input,output,event_end\n0,1,1,2\n", "0 or 1"),
        ];
        for (text, needle) in cases {
            let err = read_series_csv::<f64, _>(text.as_bytes(), "t").unwrap_err();
            assert!(err.to_string().contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn reports_offending_row() {
        let text = "index,input,output,event_end\n0,1,1,0\n1,1,nan,1\n";
        match read_series_csv::<f64, _>(text.as_bytes(), "t") {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            values in proptest::collection::vec((-1e9f64..1e9, -1e-3f64..1e3), 1..60),
            cut in 0usize..60,
        ) {
            let n = values.len();
            let mut ends = vec![n - 1];
            if cut + 1 < n {
                ends.insert(0, cut);
            }
            let s = EventSeries::new(
                "p",
                values.iter().map(|v| v.0).collect(),
                values.iter().map(|v| v.1).collect(),
                ends,
            ).unwrap();
            let mut buf = Vec::new();
            write_series_csv(&s, &mut buf).unwrap();
            let back = read_series_csv::<f64, _>(buf.as_slice(), "p").unwrap();
            prop_assert_eq!(back.input(), s.input());
            prop_assert_eq!(back.output(), s.output());
            prop_assert_eq!(back.event_ends(), s.event_ends());
        }
    }
}
