use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use crate::codec::encode_message;
use crate::message::WireMessage;
use crate::stream::{DecodeStats, StreamDecoder};
use crate::WireError;

pub const LOG_MAGIC: [u8; 8] = *b"RVLOG\0\0\x01";

/// Appends frames to a session log.
pub struct LogWriter<W: Write> {
    out: W,
    count: u64,
}

impl LogWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self, WireError> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut out: W) -> Result<Self, WireError> {
        out.write_all(&LOG_MAGIC)?;
        Ok(Self { out, count: 0 })
    }

    pub fn write(&mut self, m: &WireMessage) -> Result<(), WireError> {
        self.write_frame(&encode_message(m)?)
    }

    /// Writes already-encoded frame bytes unchanged.
    pub fn write_frame(&mut self, frame: &[u8]) -> Result<(), WireError> {
        self.out.write_all(frame)?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn into_inner(mut self) -> Result<W, WireError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Contents of a session log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogContents {
    pub messages: Vec<WireMessage>,
    /// Count of warnings raised while reading, currently only a cut-off
    /// final frame.
    pub warnings: u32,
    pub stats: DecodeStats,
}

pub fn parse_log(bytes: &[u8]) -> Result<LogContents, WireError> {
    if bytes.len() < LOG_MAGIC.len() || bytes[..LOG_MAGIC.len()] != LOG_MAGIC {
        return Err(WireError::BadLogMagic);
    }
    let mut dec = StreamDecoder::new();
    let mut messages = dec.push(&bytes[LOG_MAGIC.len()..]);
    let mut warnings = 0;
    if dec.pending() > 0 {
        warnings += 1;
        log::warn!("session log ends in a truncated frame ({} bytes)", dec.pending());
        messages.extend(dec.finish());
    }
    Ok(LogContents { messages, warnings, stats: dec.stats() })
}

pub fn read_log(path: &Path) -> Result<LogContents, WireError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_log(&bytes)
}

/// Feeds a log's messages to `sink` in recorded order. With `realtime`,
/// delivery is paced by the recorded `stamp_ns` differences.
pub fn replay(path: &Path, realtime: bool, mut sink: impl FnMut(WireMessage)) -> Result<LogContents, WireError> {
    let contents = read_log(path)?;
    let start = Instant::now();
    let first = contents.messages.first().map(|m| m.stamp_ns);
    for m in &contents.messages {
        if let (true, Some(t0)) = (realtime, first) {
            let due = Duration::from_nanos(m.stamp_ns.saturating_sub(t0));
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                thread::sleep(wait);
            }
        }
        sink(m.clone());
    }
    Ok(contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::Payload;

    fn messages(n: u32) -> Vec<WireMessage> {
        (1..=n).map(|i| WireMessage::new(i, i as u64 * 1000, Payload::Subscribe { mask: i as u16 })).collect()
    }

    fn record(ms: &[WireMessage]) -> Vec<u8> {
        let mut w = LogWriter::new(Vec::new()).unwrap();
        for m in ms {
            w.write(m).unwrap();
        }
        w.into_inner().unwrap()
    }

    #[test]
    fn record_then_parse() {
        let ms = messages(5);
        let c = parse_log(&record(&ms)).unwrap();
        assert_eq!(c.messages, ms);
        assert_eq!(c.warnings, 0);
    }

    #[test]
    fn magic_only_is_empty() {
        let c = parse_log(&LOG_MAGIC).unwrap();
        assert!(c.messages.is_empty());
        assert_eq!(c.warnings, 0);
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(parse_log(b"RVLOG\0\0\x02"), Err(WireError::BadLogMagic)));
        assert!(matches!(parse_log(b"RV"), Err(WireError::BadLogMagic)));
    }

    #[test]
    fn truncated_tail_keeps_earlier_messages() {
        let ms = messages(4);
        let bytes = record(&ms);
        let c = parse_log(&bytes[..bytes.len() - 5]).unwrap();
        assert_eq!(c.messages, ms[..3]);
        assert_eq!(c.warnings, 1);
    }
}
