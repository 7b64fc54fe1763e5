//! Tab-separated flow logs.
//!
//! The first line is the fixed [`HEADER`]; every following line holds one flow
//! with nine fields in header order. Numbers use C-locale notation.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use cdnwatch_core::flow::FlowRecord;

pub const HEADER: &str =
    "start_time\tclient_id\tserver_ip\thostname\tmin_rtt_ms\tttl\tbytes_up\tbytes_down\tavg_thr_kbps";

const FIELDS: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("flow log is empty; expected header line")]
    MissingHeader,
    #[error("unexpected flow log header: {0:?}")]
    BadHeader(String),
    #[error("flow log is not valid UTF-8 text: {0}")]
    Read(String),
}

/// A malformed data line. Line numbers count the header as line 1.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct LineError {
    pub line: usize,
    pub reason: String,
}

/// Parses one data line.
pub fn parse_line(text: &str, line: usize) -> Result<FlowRecord, LineError> {
    let err = |reason: String| LineError { line, reason };
    let fields: Vec<&str> = text.split('\t').collect();
    if fields.len() != FIELDS {
        return Err(err(format!("expected {FIELDS} fields, found {}", fields.len())));
    }
    fn num<T: std::str::FromStr>(name: &str, v: &str) -> Result<T, String> {
        v.parse().map_err(|_| format!("invalid {name}: {v:?}"))
    }
    let record = (|| -> Result<FlowRecord, String> {
        let record = FlowRecord {
            start_time: num("start_time", fields[0])?,
            client_id: fields[1].to_owned(),
            server_ip: fields[2].to_owned(),
            hostname: fields[3].to_owned(),
            min_rtt: num("min_rtt_ms", fields[4])?,
            ttl: num("ttl", fields[5])?,
            bytes_up: num("bytes_up", fields[6])?,
            bytes_down: num("bytes_down", fields[7])?,
            avg_throughput: num("avg_thr_kbps", fields[8])?,
        };
        record.validate().map_err(|e| e.to_string())?;
        Ok(record)
    })();
    record.map_err(err)
}

/// Streaming reader over a flow log. Yields one item per data line.
pub struct FlowLogReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> FlowLogReader<R> {
    /// Reads and checks the header.
    pub fn new(reader: R) -> Result<Self, FormatError> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or(FormatError::MissingHeader)?
            .map_err(|e| FormatError::Read(e.to_string()))?;
        if header.trim_end_matches('\r') != HEADER {
            return Err(FormatError::BadHeader(header));
        }
        Ok(FlowLogReader { lines, line: 1 })
    }
}

impl<R: BufRead> Iterator for FlowLogReader<R> {
    type Item = Result<FlowRecord, LineError>;

    fn next(&mut self) -> Option<Self::Item> {
        let text = self.lines.next()?;
        self.line += 1;
        Some(match text {
            Ok(t) => parse_line(t.trim_end_matches('\r'), self.line),
            Err(e) => Err(LineError { line: self.line, reason: e.to_string() }),
        })
    }
}

/// What to do with malformed lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnError {
    #[default]
    Skip,
    Abort,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub records: Vec<FlowRecord>,
    pub skipped: Vec<LineError>,
}

/// Reads a whole flow log.
pub fn parse_flow_log<R: BufRead>(reader: R, on_error: OnError) -> crate::Result<ParsedLog> {
    let mut out = ParsedLog::default();
    for item in FlowLogReader::new(reader)? {
        match item {
            Ok(r) => out.records.push(r),
            Err(e) if on_error == OnError::Skip => {
                log::warn!("skipping {e}");
                out.skipped.push(e);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Formats one record as a data line, without the newline.
pub fn format_line(r: &FlowRecord) -> Result<String, LineError> {
    for (name, v) in [("client_id", &r.client_id), ("server_ip", &r.server_ip), ("hostname", &r.hostname)] {
        if v.contains(['\t', '\n', '\r']) {
            return Err(LineError { line: 0, reason: format!("{name} contains a tab or newline") });
        }
    }
    let mut s = String::with_capacity(96);
    write!(
        s,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.start_time, r.client_id, r.server_ip, r.hostname, r.min_rtt, r.ttl, r.bytes_up, r.bytes_down, r.avg_throughput
    )
    .expect("writing to a String");
    Ok(s)
}

pub fn write_flow_log<W: Write>(mut w: W, records: &[FlowRecord]) -> crate::Result<()> {
    writeln!(w, "{HEADER}")?;
    for (i, r) in records.iter().enumerate() {
        let line = format_line(r).map_err(|e| LineError { line: i + 2, ..e })?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE: &str =
        "1391212800.5\tC1\t10.0.0.1\tr7---fra07t16.c.youtube.com\t15.2\t54\t1200\t8000000\t1350.0";

    #[test]
    fn parses_example_line() {
        let r = parse_line(EXAMPLE, 2).unwrap();
        assert_eq!(r.min_rtt, 15.2);
        assert_eq!(r.ttl, 54);
        assert_eq!(r.start_time, 1391212800.5);
        assert_eq!(r.server_ip, "10.0.0.1");
        assert_eq!(r.bytes_down, 8_000_000);
        assert_eq!(r.avg_throughput, 1350.0);
    }

    #[test]
    fn short_line_is_skipped_with_its_number() {
        let short = EXAMPLE.rsplit_once('\t').unwrap().0;
        let text = format!("{HEADER}\n{EXAMPLE}\n{short}\n{EXAMPLE}\n");
        let log = parse_flow_log(text.as_bytes(), OnError::Skip).unwrap();
        assert_eq!(log.records.len(), 2);
        assert_eq!(log.skipped.len(), 1);
        assert_eq!(log.skipped[0].line, 3);
        assert!(log.skipped[0].reason.contains("found 8"));
        assert!(matches!(parse_flow_log(text.as_bytes(), OnError::Abort), Err(crate::Error::Line(_))));
    }

    #[test]
    fn field_errors() {
        for bad in [
            EXAMPLE.replace("\t54\t", "\t256\t"),
            EXAMPLE.replace("15.2", "-1"),
            EXAMPLE.replace("15.2", "abc"),
            EXAMPLE.replace("10.0.0.1", ""),
            EXAMPLE.replace("1350.0", "1,350"),
        ] {
            assert!(parse_line(&bad, 5).is_err(), "{bad}");
        }
    }

    #[test]
    fn header_only_and_bad_header() {
        assert!(parse_flow_log(format!("{HEADER}\n").as_bytes(), OnError::Abort).unwrap().records.is_empty());
        assert!(matches!(
            parse_flow_log("a\tb\n".as_bytes(), OnError::Skip),
            Err(crate::Error::Format(FormatError::BadHeader(_)))
        ));
        assert!(matches!(
            parse_flow_log("".as_bytes(), OnError::Skip),
            Err(crate::Error::Format(FormatError::MissingHeader))
        ));
    }

    #[test]
    fn tabs_in_fields_are_rejected() {
        let mut r = parse_line(EXAMPLE, 2).unwrap();
        r.hostname.push('\t');
        assert!(write_flow_log(Vec::new(), &[r]).is_err());
    }

    fn record() -> impl Strategy<Value = FlowRecord> {
        (
            0.0f64..2e9,
            "[A-Za-z0-9]{1,8}",
            "[a-z0-9.]{1,15}",
            "[a-z0-9.-]{0,30}",
            0.0f64..1e4,
            any::<u8>(),
            any::<u64>(),
            any::<u64>(),
            0.0f64..1e6,
        )
            .prop_map(|(t, c, s, h, rtt, ttl, up, down, thr)| FlowRecord {
                start_time: t,
                client_id: c,
                server_ip: s,
                hostname: h,
                min_rtt: rtt,
                ttl,
                bytes_up: up,
                bytes_down: down,
                avg_throughput: thr,
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(records in prop::collection::vec(record(), 0..30)) {
            let mut buf = Vec::new();
            write_flow_log(&mut buf, &records).unwrap();
            let back = parse_flow_log(buf.as_slice(), OnError::Abort).unwrap();
            prop_assert_eq!(back.records, records);
        }
    }
}
