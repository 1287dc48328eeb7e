//! JSON mirror used on the console link: one object per message with the
//! type name, `seq`, `stamp_ns` and the payload fields side by side. Image
//! data travels as base64 (depth as little-endian u16 samples).

use crate::message::WireMessage;
use crate::WireError;

pub fn to_json(m: &WireMessage) -> String {
    serde_json::to_string(m).expect("wire messages always serialize")
}

pub fn from_json(text: &str) -> Result<WireMessage, WireError> {
    serde_json::from_str(text).map_err(|e| WireError::Json(e.to_string()))
}

pub(crate) mod b64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(data: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(data))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod b64_u16 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(data: &[u16], s: S) -> Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u16>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text).map_err(serde::de::Error::custom)?;
        if bytes.len() % 2 != 0 {
            return Err(serde::de::Error::custom("odd byte count in u16 image"));
        }
        Ok(bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{DepthImage, Hello, Payload, Role};
    use serde_json::Value;

    #[test]
    fn heartbeat_shape() {
        let v: Value = serde_json::from_str(&to_json(&WireMessage::new(4, 99, Payload::Heartbeat))).unwrap();
        assert_eq!(v, serde_json::json!({"type": "Heartbeat", "seq": 4, "stamp_ns": 99}));
    }

    #[test]
    fn hello_from_console() {
        let m = from_json(r#"{"type":"Hello","seq":1,"stamp_ns":0,"role":"console","version":1}"#).unwrap();
        assert_eq!(m.payload, Payload::Hello(Hello { role: Role::Console, version: 1 }));
    }

    #[test]
    fn depth_is_base64_little_endian() {
        let m = WireMessage::new(1, 0, Payload::DepthFrame(DepthImage { width: 2, height: 1, data: vec![1, 0x0201] }));
        let v: Value = serde_json::from_str(&to_json(&m)).unwrap();
        assert_eq!(v["data"], "AQABAg==");
        assert_eq!(from_json(&to_json(&m)).unwrap(), m);
    }

    #[test]
    fn unknown_type_is_an_error() {
        assert!(from_json(r#"{"type":"Nope","seq":1,"stamp_ns":0}"#).is_err());
        assert!(from_json("not json").is_err());
    }
}
