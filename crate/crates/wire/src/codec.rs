use rvops_core::mapping::SurfaceMesh;
use rvops_core::perception::{BBox, Detection};
use rvops_core::safety::{CommandSource, SafetyState, SafetyStatus};
use rvops_core::{Pose, Quat, Vec3, Vec3f};

use crate::crc::crc32;
use crate::message::{
    DepthImage, Hello, LandmarkRecord, MetricsRecord, MsgType, Payload, RgbImage, Role, TwistRecord,
    WireMessage,
};
use crate::WireError;

pub const MAGIC: [u8; 2] = [0x52, 0x56];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 20;
pub const CRC_LEN: usize = 4;
/// Payloads must be strictly shorter than this.
pub const MAX_PAYLOAD: usize = 16 * 1024 * 1024;

/// Parsed fixed-size frame header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub version: u8,
    pub msg_type: u8,
    pub seq: u32,
    pub stamp_ns: u64,
    pub payload_len: u32,
}

impl Header {
    /// Reads the header fields; `bytes` must hold at least `HEADER_LEN`
    /// bytes starting with the magic.
    pub fn parse(bytes: &[u8]) -> Header {
        Header {
            version: bytes[2],
            msg_type: bytes[3],
            seq: u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
            stamp_ns: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            payload_len: u32::from_le_bytes(bytes[16..20].try_into().unwrap()),
        }
    }

    pub fn is_sane(&self) -> bool {
        self.version == VERSION && MsgType::from_code(self.msg_type).is_some() && (self.payload_len as usize) < MAX_PAYLOAD
    }

    pub fn frame_len(&self) -> usize {
        HEADER_LEN + self.payload_len as usize + CRC_LEN
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn vec3(&mut self, v: Vec3) {
        self.f64(v.x);
        self.f64(v.y);
        self.f64(v.z);
    }
    fn vec3f(&mut self, v: Vec3f) {
        self.f32(v.x);
        self.f32(v.y);
        self.f32(v.z);
    }
}

fn count_u16(n: usize, what: &'static str) -> Result<u16, WireError> {
    u16::try_from(n).map_err(|_| WireError::TooMany(what))
}

fn count_u32(n: usize, what: &'static str) -> Result<u32, WireError> {
    u32::try_from(n).map_err(|_| WireError::TooMany(what))
}

pub fn encode_payload(p: &Payload) -> Result<Vec<u8>, WireError> {
    let mut w = Writer(Vec::new());
    match p {
        Payload::Hello(h) => {
            w.u8(h.role.code());
            w.u8(h.version);
        }
        Payload::Subscribe { mask } => w.u16(*mask),
        Payload::RgbFrame(img) => {
            if img.data.len() != img.width as usize * img.height as usize * 3 {
                return Err(WireError::ImageSize);
            }
            w.u16(img.width);
            w.u16(img.height);
            w.0.extend_from_slice(&img.data);
        }
        Payload::DepthFrame(img) => {
            if img.data.len() != img.width as usize * img.height as usize {
                return Err(WireError::ImageSize);
            }
            w.u16(img.width);
            w.u16(img.height);
            w.0.reserve(img.data.len() * 2);
            for &d in &img.data {
                w.u16(d);
            }
        }
        Payload::PoseEstimate { pose } => {
            let q = pose.rotation;
            for v in [q.w, q.x, q.y, q.z] {
                w.f64(v);
            }
            w.vec3(pose.translation);
        }
        Payload::DetectionSet { detections } => {
            w.u16(count_u16(detections.len(), "detections")?);
            for d in detections {
                w.u16(d.bbox.u_min);
                w.u16(d.bbox.v_min);
                w.u16(d.bbox.u_max);
                w.u16(d.bbox.v_max);
                w.u32(d.pixel_count);
                w.vec3(d.centroid_world);
                w.f64(d.radius_est);
                w.f64(d.confidence);
                w.u32(d.frame_seq);
            }
        }
        Payload::LandmarkSet { landmarks } => {
            w.u16(count_u16(landmarks.len(), "landmarks")?);
            for l in landmarks {
                w.u32(l.id);
                w.vec3(l.position);
                w.f64(l.radius);
                w.u32(l.hits);
                w.u8(l.confirmed as u8);
            }
        }
        Payload::PointCloudChunk { points } => {
            w.u32(count_u32(points.len(), "points")?);
            for &p in points {
                w.vec3f(p);
            }
        }
        Payload::MeshChunk(m) => {
            w.u32(count_u32(m.vertices.len(), "vertices")?);
            for &v in &m.vertices {
                w.vec3f(v);
            }
            w.u32(count_u32(m.triangles.len(), "triangles")?);
            for t in &m.triangles {
                t.iter().for_each(|&i| w.u32(i));
            }
            w.u32(m.generation);
        }
        Payload::TwistCommand(t) => {
            w.f64(t.v);
            w.f64(t.omega);
            w.u8(t.source.code());
        }
        Payload::SafetyStatus(s) => {
            w.u8(s.state.code());
            w.u32(s.nearest_obstacle_id.unwrap_or(0));
            w.f64(s.clearance);
            w.f64(s.horizon);
        }
        Payload::Heartbeat => {}
        Payload::MetricsReport(m) => {
            w.f64(m.elapsed_s);
            w.u32(m.collisions);
            w.f64(m.min_clearance_m);
            w.f64(m.distance_m);
            w.u8(m.completed as u8);
        }
    }
    if w.0.len() >= MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(w.0.len()));
    }
    Ok(w.0)
}

/// Complete frame bytes for a message.
pub fn encode_message(m: &WireMessage) -> Result<Vec<u8>, WireError> {
    let payload = encode_payload(&m.payload)?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CRC_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(m.msg_type().code());
    out.extend_from_slice(&m.seq.to_le_bytes());
    out.extend_from_slice(&m.stamp_ns.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32(&payload).to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32, WireError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn vec3(&mut self) -> Result<Vec3, WireError> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
    fn vec3f(&mut self) -> Result<Vec3f, WireError> {
        Ok(Vec3f::new(self.f32()?, self.f32()?, self.f32()?))
    }
    fn flag(&mut self) -> Result<bool, WireError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            c => Err(WireError::BadEnum("flag", c)),
        }
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
    /// Checks that `count` records of `size` bytes fit before allocating.
    fn expect(&self, count: usize, size: usize) -> Result<(), WireError> {
        if count.checked_mul(size).is_none_or(|n| n > self.remaining()) {
            return Err(WireError::Truncated);
        }
        Ok(())
    }
}

const DETECTION_LEN: usize = 8 + 4 + 24 + 8 + 8 + 4;
const LANDMARK_LEN: usize = 4 + 24 + 8 + 4 + 1;

pub fn decode_payload(msg_type: MsgType, bytes: &[u8]) -> Result<Payload, WireError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let p = match msg_type {
        MsgType::Hello => {
            let c = r.u8()?;
            let role = Role::from_code(c).ok_or(WireError::BadEnum("role", c))?;
            Payload::Hello(Hello { role, version: r.u8()? })
        }
        MsgType::Subscribe => Payload::Subscribe { mask: r.u16()? },
        MsgType::RgbFrame => {
            let (width, height) = (r.u16()?, r.u16()?);
            let n = width as usize * height as usize * 3;
            if r.remaining() != n {
                return Err(WireError::ImageSize);
            }
            Payload::RgbFrame(RgbImage { width, height, data: r.take(n)?.to_vec() })
        }
        MsgType::DepthFrame => {
            let (width, height) = (r.u16()?, r.u16()?);
            let n = width as usize * height as usize;
            if r.remaining() != n * 2 {
                return Err(WireError::ImageSize);
            }
            let data = r.take(n * 2)?.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
            Payload::DepthFrame(DepthImage { width, height, data })
        }
        MsgType::PoseEstimate => {
            let rotation = Quat { w: r.f64()?, x: r.f64()?, y: r.f64()?, z: r.f64()? };
            Payload::PoseEstimate { pose: Pose { rotation, translation: r.vec3()? } }
        }
        MsgType::DetectionSet => {
            let n = r.u16()? as usize;
            r.expect(n, DETECTION_LEN)?;
            let mut detections = Vec::with_capacity(n);
            for _ in 0..n {
                let bbox = BBox { u_min: r.u16()?, v_min: r.u16()?, u_max: r.u16()?, v_max: r.u16()? };
                detections.push(Detection {
                    bbox,
                    pixel_count: r.u32()?,
                    centroid_world: r.vec3()?,
                    radius_est: r.f64()?,
                    confidence: r.f64()?,
                    frame_seq: r.u32()?,
                });
            }
            Payload::DetectionSet { detections }
        }
        MsgType::LandmarkSet => {
            let n = r.u16()? as usize;
            r.expect(n, LANDMARK_LEN)?;
            let mut landmarks = Vec::with_capacity(n);
            for _ in 0..n {
                landmarks.push(LandmarkRecord {
                    id: r.u32()?,
                    position: r.vec3()?,
                    radius: r.f64()?,
                    hits: r.u32()?,
                    confirmed: r.flag()?,
                });
            }
            Payload::LandmarkSet { landmarks }
        }
        MsgType::PointCloudChunk => {
            let n = r.u32()? as usize;
            r.expect(n, 12)?;
            let points = (0..n).map(|_| r.vec3f()).collect::<Result<_, _>>()?;
            Payload::PointCloudChunk { points }
        }
        MsgType::MeshChunk => {
            let nv = r.u32()? as usize;
            r.expect(nv, 12)?;
            let vertices = (0..nv).map(|_| r.vec3f()).collect::<Result<_, _>>()?;
            let nt = r.u32()? as usize;
            r.expect(nt, 12)?;
            let triangles = (0..nt).map(|_| Ok([r.u32()?, r.u32()?, r.u32()?])).collect::<Result<_, WireError>>()?;
            Payload::MeshChunk(SurfaceMesh { vertices, triangles, generation: r.u32()? })
        }
        MsgType::TwistCommand => {
            let (v, omega) = (r.f64()?, r.f64()?);
            let c = r.u8()?;
            let source = CommandSource::from_code(c).ok_or(WireError::BadEnum("source", c))?;
            Payload::TwistCommand(TwistRecord { v, omega, source })
        }
        MsgType::SafetyStatus => {
            let c = r.u8()?;
            let state = SafetyState::from_code(c).ok_or(WireError::BadEnum("safety state", c))?;
            let id = r.u32()?;
            Payload::SafetyStatus(SafetyStatus {
                state,
                nearest_obstacle_id: (id != 0).then_some(id),
                clearance: r.f64()?,
                horizon: r.f64()?,
            })
        }
        MsgType::Heartbeat => Payload::Heartbeat,
        MsgType::MetricsReport => Payload::MetricsReport(MetricsRecord {
            elapsed_s: r.f64()?,
            collisions: r.u32()?,
            min_clearance_m: r.f64()?,
            distance_m: r.f64()?,
            completed: r.flag()?,
        }),
    };
    if r.remaining() != 0 {
        return Err(WireError::TrailingBytes(r.remaining()));
    }
    Ok(p)
}

/// Decodes one complete frame occupying all of `frame`.
pub fn decode_frame(frame: &[u8]) -> Result<WireMessage, WireError> {
    if frame.len() < HEADER_LEN + CRC_LEN || frame[..2] != MAGIC {
        return Err(WireError::BadHeader);
    }
    let h = Header::parse(frame);
    if !h.is_sane() {
        return Err(WireError::BadHeader);
    }
    if frame.len() != h.frame_len() {
        return Err(WireError::Truncated);
    }
    let payload = &frame[HEADER_LEN..HEADER_LEN + h.payload_len as usize];
    let crc = u32::from_le_bytes(frame[frame.len() - CRC_LEN..].try_into().unwrap());
    if crc32(payload) != crc {
        return Err(WireError::Crc);
    }
    let msg_type = MsgType::from_code(h.msg_type).ok_or(WireError::BadHeader)?;
    Ok(WireMessage { seq: h.seq, stamp_ns: h.stamp_ns, payload: decode_payload(msg_type, payload)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heartbeat_frame_layout() {
        let bytes = encode_message(&WireMessage::new(1, 0, Payload::Heartbeat)).unwrap();
        assert_eq!(
            bytes,
            [0x52, 0x56, 1, 12, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]
        );
    }

    #[test]
    fn identity_pose_payload() {
        let p = encode_payload(&Payload::PoseEstimate { pose: Pose::identity() }).unwrap();
        assert_eq!(p.len(), 56);
        assert_eq!(p[..8], 1.0f64.to_le_bytes());
        assert!(p[8..].iter().all(|&b| b == 0));
    }

    #[test]
    fn empty_detection_set_is_two_bytes() {
        assert_eq!(encode_payload(&Payload::DetectionSet { detections: vec![] }).unwrap(), [0, 0]);
    }

    #[test]
    fn safety_status_none_id_is_zero() {
        let s = SafetyStatus::clear(1.0);
        let p = encode_payload(&Payload::SafetyStatus(s)).unwrap();
        assert_eq!(p.len(), 21);
        assert_eq!(p[1..5], [0, 0, 0, 0]);
        assert_eq!(decode_payload(MsgType::SafetyStatus, &p).unwrap(), Payload::SafetyStatus(s));
    }

    #[test]
    fn count_mismatch_is_rejected() {
        // Declares two detections but carries none.
        assert!(decode_payload(MsgType::DetectionSet, &[2, 0]).is_err());
        assert!(decode_payload(MsgType::PointCloudChunk, &[0xFF, 0xFF, 0xFF, 0xFF]).is_err());
        assert!(decode_payload(MsgType::Heartbeat, &[0]).is_err());
        assert!(decode_payload(MsgType::DepthFrame, &[1, 0, 1, 0, 5]).is_err());
    }

    #[test]
    fn bad_enum_codes_are_rejected() {
        assert!(decode_payload(MsgType::Hello, &[4, 1]).is_err());
        let mut t = encode_payload(&Payload::TwistCommand(TwistRecord { v: 0.0, omega: 0.0, source: CommandSource::Console })).unwrap();
        t[16] = 9;
        assert!(decode_payload(MsgType::TwistCommand, &t).is_err());
    }

    #[test]
    fn oversized_image_is_an_encode_error() {
        let img = RgbImage { width: 4096, height: 4096, data: vec![0; 4096 * 4096 * 3] };
        assert!(matches!(encode_payload(&Payload::RgbFrame(img)), Err(WireError::PayloadTooLarge(_))));
    }
}
