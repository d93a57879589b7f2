//! Event data model, the `EVTS` binary and CSV stream formats, and stream
//! validation.
//!
//! Binary layout (little endian):
//!
//! ```text
//! header  : "EVTS" | version u16 = 1 | width u16 | height u16 | 6 zero bytes
//! record  : t u64 | x u16 | y u16 | p i8 | 3 zero bytes
//! ```
//!
//! CSV layout: a `t,x,y,p` header line followed by one decimal record per line.

use std::fmt;
use std::io::{self, BufRead, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"EVTS";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 16;
pub const CSV_HEADER: &str = "t,x,y,p";

#[derive(Debug, Error)]
pub enum EventError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("truncated record {index}: {got} of {RECORD_LEN} bytes")]
    Truncated { index: u64, got: usize },
    #[error("malformed record {index}: {reason}")]
    Record { index: u64, reason: String },
    #[error("non-monotonic timestamp at record {index}: {t} < {prev}")]
    NonMonotonic { index: u64, t: u64, prev: u64 },
    #[error("record {index}: pixel ({x}, {y}) outside {width}x{height} sensor")]
    OutOfBounds {
        index: u64,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("invalid sensor geometry {width}x{height}")]
    Geometry { width: u32, height: u32 },
}

/// Sign of the log-intensity change that fired an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            -1 => Some(Polarity::Negative),
            1 => Some(Polarity::Positive),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Negative => -1,
            Polarity::Positive => 1,
        }
    }

    /// Channel index used by two-channel surfaces: 0 = negative, 1 = positive.
    pub fn channel(self) -> usize {
        match self {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarity::Negative => "neg",
            Polarity::Positive => "pos",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds since recording start.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Self { t, x, y, p }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SensorGeometry {
    width: u16,
    height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Result<Self, EventError> {
        if width == 0 || height == 0 {
            return Err(EventError::Geometry {
                width: width as u32,
                height: height as u32,
            });
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    /// Parses `WIDTHxHEIGHT`, e.g. `1280x720`.
    pub fn parse(s: &str) -> Result<Self, EventError> {
        let bad = || EventError::Header(format!("geometry must be WIDTHxHEIGHT, got '{s}'"));
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let w: u16 = w.trim().parse().map_err(|_| bad())?;
        let h: u16 = h.trim().parse().map_err(|_| bad())?;
        Self::new(w, h)
    }
}

impl fmt::Display for SensorGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// A materialized event sequence on a sensor. Construction does not check the
/// ordering or bounds invariants; use [`validate_stream`] for that.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    pub geometry: SensorGeometry,
    pub events: Vec<Event>,
}

impl EventStream {
    pub fn new(geometry: SensorGeometry, events: Vec<Event>) -> Self {
        Self { geometry, events }
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self::new(geometry, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventFormat {
    Binary,
    Csv,
}

impl EventFormat {
    /// `.csv` files are CSV, everything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EventFormat::Csv,
            _ => EventFormat::Binary,
        }
    }
}

impl std::str::FromStr for EventFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" | "bin" | "evt" => Ok(EventFormat::Binary),
            "csv" => Ok(EventFormat::Csv),
            other => Err(format!("unknown event format '{other}' (expected binary|csv)")),
        }
    }
}

enum Decoder<R> {
    Binary(R),
    Csv { reader: R, line: String },
}

/// Lazy, bounded-memory event reader. Yields events in file order and, unless
/// [`EventReader::unchecked`] was called, rejects out-of-order timestamps and
/// out-of-bounds pixels.
pub struct EventReader<R> {
    decoder: Decoder<R>,
    geometry: SensorGeometry,
    index: u64,
    prev_t: Option<u64>,
    checked: bool,
    done: bool,
}

impl<R: BufRead> EventReader<R> {
    /// Opens a stream. `csv_geometry` is required for CSV input and ignored
    /// for binary input, where the header carries the geometry.
    pub fn new(
        mut reader: R,
        format: EventFormat,
        csv_geometry: Option<SensorGeometry>,
    ) -> Result<Self, EventError> {
        let (decoder, geometry) = match format {
            EventFormat::Binary => {
                let geometry = read_header(&mut reader)?;
                (Decoder::Binary(reader), geometry)
            }
            EventFormat::Csv => {
                let geometry = csv_geometry.ok_or_else(|| {
                    EventError::Header("CSV input needs an explicit sensor geometry".into())
                })?;
                let mut line = String::new();
                reader.read_line(&mut line)?;
                if line.trim_end_matches(['\r', '\n']).trim() != CSV_HEADER {
                    return Err(EventError::Header(format!(
                        "expected CSV header '{CSV_HEADER}', got '{}'",
                        line.trim_end()
                    )));
                }
                line.clear();
                (Decoder::Csv { reader, line }, geometry)
            }
        };
        Ok(Self {
            decoder,
            geometry,
            index: 0,
            prev_t: None,
            checked: true,
            done: false,
        })
    }

    /// Skips the monotonicity and bounds checks.
    pub fn unchecked(mut self) -> Self {
        self.checked = false;
        self
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    fn next_raw(&mut self) -> Result<Option<Event>, EventError> {
        let index = self.index;
        match &mut self.decoder {
            Decoder::Binary(reader) => {
                let mut buf = [0u8; RECORD_LEN];
                let got = read_full(reader, &mut buf)?;
                if got == 0 {
                    return Ok(None);
                }
                if got < RECORD_LEN {
                    return Err(EventError::Truncated { index, got });
                }
                decode_record(&buf, index).map(Some)
            }
            Decoder::Csv { reader, line } => loop {
                line.clear();
                if reader.read_line(line)? == 0 {
                    return Ok(None);
                }
                let text = line.trim();
                if text.is_empty() {
                    continue;
                }
                return parse_csv_record(text, index).map(Some);
            },
        }
    }
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = Result<Event, EventError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let result = match self.next_raw() {
            Ok(None) => {
                self.done = true;
                return None;
            }
            Ok(Some(ev)) => self.check(ev),
            Err(e) => Err(e),
        };
        if result.is_err() {
            self.done = true;
        }
        self.index += 1;
        Some(result)
    }
}

impl<R> EventReader<R> {
    fn check(&mut self, ev: Event) -> Result<Event, EventError> {
        if self.checked {
            if let Some(prev) = self.prev_t {
                if ev.t < prev {
                    return Err(EventError::NonMonotonic {
                        index: self.index,
                        t: ev.t,
                        prev,
                    });
                }
            }
            if !self.geometry.contains(ev.x, ev.y) {
                return Err(EventError::OutOfBounds {
                    index: self.index,
                    x: ev.x,
                    y: ev.y,
                    width: self.geometry.width,
                    height: self.geometry.height,
                });
            }
        }
        self.prev_t = Some(ev.t);
        Ok(ev)
    }
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn read_header<R: Read>(reader: &mut R) -> Result<SensorGeometry, EventError> {
    let mut buf = [0u8; HEADER_LEN];
    let got = read_full(reader, &mut buf)?;
    if got < HEADER_LEN {
        return Err(EventError::Header(format!(
            "header is {got} bytes, expected {HEADER_LEN}"
        )));
    }
    if buf[0..4] != MAGIC {
        return Err(EventError::Header(format!("bad magic {:?}", &buf[0..4])));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != FORMAT_VERSION {
        return Err(EventError::Header(format!("unsupported version {version}")));
    }
    if buf[10..16].iter().any(|&b| b != 0) {
        return Err(EventError::Header("reserved bytes are not zero".into()));
    }
    let width = u16::from_le_bytes([buf[6], buf[7]]);
    let height = u16::from_le_bytes([buf[8], buf[9]]);
    SensorGeometry::new(width, height).map_err(|_| {
        EventError::Header(format!("invalid sensor geometry {width}x{height}"))
    })
}

fn decode_record(buf: &[u8; RECORD_LEN], index: u64) -> Result<Event, EventError> {
    let t = u64::from_le_bytes(buf[0..8].try_into().unwrap());
    let x = u16::from_le_bytes([buf[8], buf[9]]);
    let y = u16::from_le_bytes([buf[10], buf[11]]);
    let raw_p = buf[12] as i8;
    let p = Polarity::from_i8(raw_p).ok_or_else(|| EventError::Record {
        index,
        reason: format!("polarity {raw_p} is not -1 or +1"),
    })?;
    if buf[13..16].iter().any(|&b| b != 0) {
        return Err(EventError::Record {
            index,
            reason: "padding bytes are not zero".into(),
        });
    }
    Ok(Event { t, x, y, p })
}

fn parse_csv_record(text: &str, index: u64) -> Result<Event, EventError> {
    let bad = |reason: String| EventError::Record { index, reason };
    let mut fields = text.split(',').map(str::trim);
    let mut field = |name: &str| {
        fields
            .next()
            .ok_or_else(|| bad(format!("missing field '{name}' in '{text}'")))
    };
    let t = field("t")?;
    let x = field("x")?;
    let y = field("y")?;
    let p = field("p")?;
    if fields.next().is_some() {
        return Err(bad(format!("too many fields in '{text}'")));
    }
    let t: u64 = t.parse().map_err(|_| bad(format!("bad timestamp '{t}'")))?;
    let x: u16 = x.parse().map_err(|_| bad(format!("bad x '{x}'")))?;
    let y: u16 = y.parse().map_err(|_| bad(format!("bad y '{y}'")))?;
    let raw_p: i8 = p.parse().map_err(|_| bad(format!("bad polarity '{p}'")))?;
    let p = Polarity::from_i8(raw_p).ok_or_else(|| bad(format!("polarity {raw_p} is not -1 or 1")))?;
    Ok(Event { t, x, y, p })
}

pub fn encode_header(geometry: SensorGeometry) -> [u8; HEADER_LEN] {
    let mut buf = [0u8; HEADER_LEN];
    buf[0..4].copy_from_slice(&MAGIC);
    buf[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf[6..8].copy_from_slice(&geometry.width.to_le_bytes());
    buf[8..10].copy_from_slice(&geometry.height.to_le_bytes());
    buf
}

pub fn encode_record(ev: &Event) -> [u8; RECORD_LEN] {
    let mut buf = [0u8; RECORD_LEN];
    buf[0..8].copy_from_slice(&ev.t.to_le_bytes());
    buf[8..10].copy_from_slice(&ev.x.to_le_bytes());
    buf[10..12].copy_from_slice(&ev.y.to_le_bytes());
    buf[12] = ev.p.as_i8() as u8;
    buf
}

/// Reads a whole stream into memory.
pub fn read_events<R: BufRead>(
    reader: R,
    format: EventFormat,
    csv_geometry: Option<SensorGeometry>,
) -> Result<EventStream, EventError> {
    let reader = EventReader::new(reader, format, csv_geometry)?;
    let geometry = reader.geometry();
    let events = reader.collect::<Result<Vec<_>, _>>()?;
    Ok(EventStream { geometry, events })
}

/// Writes `stream` and returns the number of bytes written.
pub fn write_events<W: Write>(
    stream: &EventStream,
    sink: W,
    format: EventFormat,
) -> Result<u64, EventError> {
    let mut writer = EventWriter::new(sink, format, stream.geometry)?;
    for ev in &stream.events {
        writer.write(ev)?;
    }
    Ok(writer.finish()?)
}

/// Incremental writer, for producers that never hold the full stream.
pub struct EventWriter<W: Write> {
    sink: W,
    format: EventFormat,
    bytes: u64,
}

impl<W: Write> EventWriter<W> {
    pub fn new(mut sink: W, format: EventFormat, geometry: SensorGeometry) -> io::Result<Self> {
        let bytes = match format {
            EventFormat::Binary => {
                sink.write_all(&encode_header(geometry))?;
                HEADER_LEN as u64
            }
            EventFormat::Csv => {
                sink.write_all(CSV_HEADER.as_bytes())?;
                sink.write_all(b"\n")?;
                CSV_HEADER.len() as u64 + 1
            }
        };
        Ok(Self {
            sink,
            format,
            bytes,
        })
    }

    pub fn write(&mut self, ev: &Event) -> io::Result<()> {
        match self.format {
            EventFormat::Binary => {
                self.sink.write_all(&encode_record(ev))?;
                self.bytes += RECORD_LEN as u64;
            }
            EventFormat::Csv => {
                let line = format!("{},{},{},{}\n", ev.t, ev.x, ev.y, ev.p.as_i8());
                self.sink.write_all(line.as_bytes())?;
                self.bytes += line.len() as u64;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<u64> {
        self.sink.flush()?;
        Ok(self.bytes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Violation {
    NonMonotonic { index: usize, t: u64, prev: u64 },
    OutOfBounds { index: usize, x: u16, y: u16 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub count: usize,
    pub first_t: Option<u64>,
    pub last_t: Option<u64>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every ordering and bounds violation. An event violates ordering
/// when its timestamp is below its predecessor's.
pub fn validate_stream(stream: &EventStream) -> ValidationReport {
    let mut violations = Vec::new();
    for (index, ev) in stream.events.iter().enumerate() {
        if index > 0 {
            let prev = stream.events[index - 1].t;
            if ev.t < prev {
                violations.push(Violation::NonMonotonic {
                    index,
                    t: ev.t,
                    prev,
                });
            }
        }
        if !stream.geometry.contains(ev.x, ev.y) {
            violations.push(Violation::OutOfBounds {
                index,
                x: ev.x,
                y: ev.y,
            });
        }
    }
    ValidationReport {
        count: stream.events.len(),
        first_t: stream.events.first().map(|e| e.t),
        last_t: stream.events.last().map(|e| e.t),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom(w: u16, h: u16) -> SensorGeometry {
        SensorGeometry::new(w, h).unwrap()
    }

    fn ev(t: u64, x: u16, y: u16, p: i8) -> Event {
        Event::new(t, x, y, Polarity::from_i8(p).unwrap())
    }

    fn random_stream(rng: &mut ChaCha8Rng, n: usize, g: SensorGeometry) -> EventStream {
        let mut t = 0u64;
        let events = (0..n)
            .map(|_| {
                t += rng.random_range(0..50);
                let p = if rng.random_bool(0.5) { 1 } else { -1 };
                ev(t, rng.random_range(0..g.width()), rng.random_range(0..g.height()), p)
            })
            .collect();
        EventStream::new(g, events)
    }

    fn round_trip(s: &EventStream, f: EventFormat) -> EventStream {
        let mut buf = Vec::new();
        write_events(s, &mut buf, f).unwrap();
        read_events(&buf[..], f, Some(s.geometry)).unwrap()
    }

    #[test]
    fn empty_binary_is_header_only() {
        let s = EventStream::empty(geom(1280, 720));
        let mut buf = Vec::new();
        assert_eq!(write_events(&s, &mut buf, EventFormat::Binary).unwrap(), 16);
        assert_eq!(buf.len(), 16);
        let back = read_events(&buf[..], EventFormat::Binary, None).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.geometry, geom(1280, 720));
    }

    #[test]
    fn csv_line_parses_fields() {
        let text = "t,x,y,p\n1000,5,7,1\n";
        let s = read_events(text.as_bytes(), EventFormat::Csv, Some(geom(10, 10))).unwrap();
        assert_eq!(s.events, vec![ev(1000, 5, 7, 1)]);
    }

    #[test]
    fn x_at_width_is_out_of_bounds() {
        let g = geom(1280, 720);
        let bad = EventStream::new(g, vec![ev(0, 1279, 0, 1), ev(1, 1280, 5, -1)]);
        let mut buf = Vec::new();
        write_events(&bad, &mut buf, EventFormat::Binary).unwrap();
        let err = read_events(&buf[..], EventFormat::Binary, None).unwrap_err();
        assert!(matches!(err, EventError::OutOfBounds { index: 1, x: 1280, .. }));
    }

    #[test]
    fn three_event_round_trip() {
        let s = EventStream::new(
            geom(64, 48),
            vec![ev(1, 0, 0, 1), ev(1, 63, 47, -1), ev(9, 5, 6, 1)],
        );
        for f in [EventFormat::Binary, EventFormat::Csv] {
            assert_eq!(round_trip(&s, f), s);
        }
    }

    #[test]
    fn ten_thousand_random_events_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_stream(&mut rng, 10_000, geom(1280, 720));
        for f in [EventFormat::Binary, EventFormat::Csv] {
            assert_eq!(round_trip(&s, f), s);
        }
        let mut buf = Vec::new();
        write_events(&s, &mut buf, EventFormat::Binary).unwrap();
        assert_eq!(buf.len(), 16 + 16 * 10_000);
    }

    #[test]
    fn truncated_record() {
        let s = EventStream::new(geom(8, 8), vec![ev(1, 1, 1, 1), ev(2, 2, 2, 1)]);
        let mut buf = Vec::new();
        write_events(&s, &mut buf, EventFormat::Binary).unwrap();
        buf.truncate(buf.len() - 5);
        let err = read_events(&buf[..], EventFormat::Binary, None).unwrap_err();
        assert!(matches!(err, EventError::Truncated { index: 1, got: 11 }));
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(
            read_events(&b"EVT"[..], EventFormat::Binary, None),
            Err(EventError::Header(_))
        ));
        let mut hdr = encode_header(geom(4, 4));
        hdr[0] = b'X';
        assert!(matches!(
            read_events(&hdr[..], EventFormat::Binary, None),
            Err(EventError::Header(_))
        ));
        assert!(matches!(
            read_events(&b"a,b,c\n"[..], EventFormat::Csv, Some(geom(4, 4))),
            Err(EventError::Header(_))
        ));
    }

    #[test]
    fn zero_polarity_rejected() {
        let text = "t,x,y,p\n5,1,1,0\n";
        let err = read_events(text.as_bytes(), EventFormat::Csv, Some(geom(4, 4))).unwrap_err();
        assert!(matches!(err, EventError::Record { index: 0, .. }));
        let mut bytes = encode_header(geom(4, 4)).to_vec();
        let mut rec = encode_record(&ev(1, 1, 1, 1));
        rec[12] = 0;
        bytes.extend_from_slice(&rec);
        assert!(matches!(
            read_events(&bytes[..], EventFormat::Binary, None),
            Err(EventError::Record { index: 0, .. })
        ));
    }

    #[test]
    fn reader_reports_non_monotonic_index() {
        let text = "t,x,y,p\n10,0,0,1\n10,0,0,1\n5,1,1,-1\n";
        let err = read_events(text.as_bytes(), EventFormat::Csv, Some(geom(4, 4))).unwrap_err();
        assert!(matches!(
            err,
            EventError::NonMonotonic {
                index: 2,
                t: 5,
                prev: 10
            }
        ));
        let lax = EventReader::new(text.as_bytes(), EventFormat::Csv, Some(geom(4, 4)))
            .unwrap()
            .unchecked();
        assert_eq!(lax.count(), 3);
    }

    #[test]
    fn validate_clean_stream() {
        let s = EventStream::new(
            geom(10, 10),
            (0..5).map(|i| ev(i * 10, i as u16, 0, 1)).collect(),
        );
        let r = validate_stream(&s);
        assert!(r.is_valid());
        assert_eq!((r.count, r.first_t, r.last_t), (5, Some(0), Some(40)));
    }

    #[test]
    fn validate_flags_single_decrease() {
        let s = EventStream::new(geom(10, 10), vec![ev(10, 0, 0, 1), ev(5, 0, 0, 1)]);
        let r = validate_stream(&s);
        assert_eq!(
            r.violations,
            vec![Violation::NonMonotonic {
                index: 1,
                t: 5,
                prev: 10
            }]
        );
    }

    #[test]
    fn validate_counts_injected_swaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = geom(32, 32);
        for _ in 0..20 {
            // strictly increasing so every adjacent swap is a real inversion
            let mut events: Vec<Event> = (0..400u64).map(|i| ev(i * 3, 1, 1, 1)).collect();
            let k = rng.random_range(0..40);
            // non-overlapping adjacent pairs, spaced so swaps do not interact
            let mut slots: Vec<usize> = (0..130).map(|s| s * 3).collect();
            for i in (1..slots.len()).rev() {
                let j = rng.random_range(0..=i);
                slots.swap(i, j);
            }
            for &s in &slots[..k] {
                events.swap(s, s + 1);
            }
            let r = validate_stream(&EventStream::new(g, events));
            assert_eq!(r.violations.len(), k);
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(
            raw in proptest::collection::vec((0u64..1_000, 0u16..640, 0u16..480, any::<bool>()), 0..200),
            csv in any::<bool>(),
        ) {
            let mut t = 0;
            let events = raw
                .into_iter()
                .map(|(dt, x, y, pos)| {
                    t += dt;
                    Event::new(t, x, y, if pos { Polarity::Positive } else { Polarity::Negative })
                })
                .collect();
            let s = EventStream::new(geom(640, 480), events);
            let f = if csv { EventFormat::Csv } else { EventFormat::Binary };
            prop_assert_eq!(round_trip(&s, f), s);
        }
    }
}
