use crate::codec::{decode_payload, Header, CRC_LEN, HEADER_LEN, MAGIC};
use crate::crc::crc32;
use crate::message::{MsgType, WireMessage};

/// Counters for everything the decoder had to throw away.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub frames: u64,
    pub crc_errors: u64,
    /// Magic found but version, type or length implausible.
    pub header_errors: u64,
    /// CRC valid but the payload did not match its schema.
    pub schema_errors: u64,
    /// Frame candidates cut off by the end of input.
    pub truncated: u64,
    /// Bytes discarded while searching for the next frame.
    pub skipped_bytes: u64,
}

impl DecodeStats {
    pub fn dropped(&self) -> u64 {
        self.crc_errors + self.header_errors + self.schema_errors + self.truncated
    }
}

fn find_magic(buf: &[u8], from: usize) -> Option<usize> {
    buf.get(from..)?.windows(2).position(|w| w == MAGIC).map(|i| i + from)
}

/// Scans `buf` for frames. Returns decoded messages and the number of
/// bytes that can be discarded. With `eof`, nothing is left waiting for
/// more input.
fn scan(buf: &[u8], stats: &mut DecodeStats, eof: bool) -> (Vec<WireMessage>, usize) {
    let mut out = Vec::new();
    let mut pos = 0;
    loop {
        let Some(start) = find_magic(buf, pos) else {
            // A trailing first magic byte may still begin a frame.
            let keep = !eof && buf.len() > pos && buf[buf.len() - 1] == MAGIC[0];
            let end = if keep { buf.len() - 1 } else { buf.len() };
            stats.skipped_bytes += (end - pos) as u64;
            pos = end;
            break;
        };
        stats.skipped_bytes += (start - pos) as u64;
        pos = start;
        if buf.len() - pos < HEADER_LEN {
            if eof {
                stats.truncated += 1;
                stats.skipped_bytes += (buf.len() - pos) as u64;
                pos = buf.len();
            }
            break;
        }
        let h = Header::parse(&buf[pos..]);
        if !h.is_sane() {
            stats.header_errors += 1;
            stats.skipped_bytes += 1;
            pos += 1;
            continue;
        }
        let len = h.frame_len();
        if buf.len() - pos < len {
            if eof {
                stats.truncated += 1;
                stats.skipped_bytes += 1;
                pos += 1;
                continue;
            }
            break;
        }
        let payload = &buf[pos + HEADER_LEN..pos + len - CRC_LEN];
        let crc = u32::from_le_bytes(buf[pos + len - CRC_LEN..pos + len].try_into().unwrap());
        if crc32(payload) != crc {
            stats.crc_errors += 1;
            stats.skipped_bytes += 1;
            pos += 1;
            continue;
        }
        let msg_type = MsgType::from_code(h.msg_type).expect("checked by is_sane");
        match decode_payload(msg_type, payload) {
            Ok(payload) => {
                stats.frames += 1;
                out.push(WireMessage { seq: h.seq, stamp_ns: h.stamp_ns, payload });
            }
            Err(_) => {
                stats.schema_errors += 1;
                stats.skipped_bytes += len as u64;
            }
        }
        pos += len;
    }
    (out, pos)
}

/// Decodes every complete frame in `buf`. The second value is the number of
/// leading bytes consumed; a partial trailing frame is left unconsumed.
pub fn decode_stream(buf: &[u8]) -> (Vec<WireMessage>, usize) {
    scan(buf, &mut DecodeStats::default(), false)
}

/// Same as [`decode_stream`], also reporting what was dropped.
pub fn decode_stream_with_stats(buf: &[u8]) -> (Vec<WireMessage>, usize, DecodeStats) {
    let mut stats = DecodeStats::default();
    let (msgs, used) = scan(buf, &mut stats, false);
    (msgs, used, stats)
}

/// Incremental decoder owning its input buffer.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    buf: Vec<u8>,
    stats: DecodeStats,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<WireMessage> {
        self.buf.extend_from_slice(bytes);
        let (msgs, used) = scan(&self.buf, &mut self.stats, false);
        self.buf.drain(..used);
        msgs
    }

    /// Declares end of input: frames hidden behind a false or cut-off
    /// header are recovered and the remainder is counted as truncated.
    pub fn finish(&mut self) -> Vec<WireMessage> {
        let (msgs, _) = scan(&self.buf, &mut self.stats, true);
        self.buf.clear();
        msgs
    }

    /// Bytes held back waiting for the rest of a frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    pub fn stats(&self) -> DecodeStats {
        self.stats
    }
}
