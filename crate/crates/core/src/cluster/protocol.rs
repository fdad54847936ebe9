//! Wire protocol between master and workers.
//!
//! Every message is one frame: a 4-byte big-endian body length followed by
//! a UTF-8 JSON body `{"type": ..., "payload": ...}`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CostModel;
use crate::partitioning::{PartialResult, Partition, SubtaskOptions};

pub const PROTOCOL_VERSION: u32 = 1;

/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME_LEN: u32 = 256 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Message {
    Hello(Hello),
    BroadcastArtifact(Broadcast),
    AssignSubtask(Assign),
    PartialResult(PartialReply),
    Heartbeat(Heartbeat),
    Shutdown(Shutdown),
}

impl Message {
    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello(_) => "HELLO",
            Message::BroadcastArtifact(_) => "BROADCAST_ARTIFACT",
            Message::AssignSubtask(_) => "ASSIGN_SUBTASK",
            Message::PartialResult(_) => "PARTIAL_RESULT",
            Message::Heartbeat(_) => "HEARTBEAT",
            Message::Shutdown(_) => "SHUTDOWN",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    /// `master` or `worker`.
    pub role: String,
    pub version: u32,
    #[serde(default)]
    pub capabilities: Vec<String>,
    /// Artifact hashes already in the worker's cache.
    #[serde(default)]
    pub cached_artifacts: Vec<String>,
    #[serde(default)]
    pub heartbeat_ms: Option<u64>,
}

/// Master to worker: `artifact` holds the program text. Worker to master
/// (acknowledgement): `artifact` is absent and `status` is set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Broadcast {
    pub hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<BroadcastStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BroadcastStatus {
    Stored,
    AlreadyCached,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assign {
    pub program_hash: String,
    pub partition: Partition,
    pub step_limit: u64,
    pub cost_model: CostModel,
    #[serde(default)]
    pub options: SubtaskOptions,
}

/// Either a result or the reason the worker refused the subtask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialReply {
    pub partition_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<PartialResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heartbeat {
    pub seq: u64,
    /// Partition being executed, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub busy_with: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shutdown {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("connection closed")]
    Closed,
    #[error("truncated frame: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(u32),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unexpected {got} message while waiting for {expected}")]
    Unexpected {
        expected: &'static str,
        got: &'static str,
    },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl ProtocolError {
    /// Read timeouts surface as `WouldBlock` or `TimedOut` depending on the
    /// platform.
    pub fn is_timeout(&self) -> bool {
        matches!(self, ProtocolError::Io(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
    }
}

pub fn encode(msg: &Message) -> Vec<u8> {
    let body = serde_json::to_vec(msg).expect("messages serialize");
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    frame
}

pub fn decode_body(body: &[u8]) -> Result<Message, ProtocolError> {
    serde_json::from_slice(body).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

/// Decode exactly one frame from `bytes`.
pub fn decode(bytes: &[u8]) -> Result<Message, ProtocolError> {
    let mut cursor = bytes;
    let msg = read_message(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(ProtocolError::Malformed(format!(
            "{} trailing bytes after frame",
            cursor.len()
        )));
    }
    Ok(msg)
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> Result<(), ProtocolError> {
    w.write_all(&encode(msg))?;
    w.flush()?;
    Ok(())
}

pub fn read_message<R: Read>(r: &mut R) -> Result<Message, ProtocolError> {
    let mut len = [0u8; 4];
    let got = read_full(r, &mut len)?;
    if got == 0 {
        return Err(ProtocolError::Closed);
    }
    if got < 4 {
        return Err(ProtocolError::Truncated { expected: 4, got });
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_LEN {
        return Err(ProtocolError::TooLarge(len));
    }
    let mut body = vec![0u8; len as usize];
    let got = read_full(r, &mut body)?;
    if got < body.len() {
        return Err(ProtocolError::Truncated {
            expected: body.len(),
            got,
        });
    }
    decode_body(&body)
}

/// Like `read_exact`, but reports how much arrived before end of stream.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, ProtocolError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples() -> Vec<Message> {
        vec![
            Message::Hello(Hello {
                role: "worker".into(),
                version: PROTOCOL_VERSION,
                capabilities: vec!["subtask".into()],
                cached_artifacts: vec!["ab".into()],
                heartbeat_ms: Some(1000),
            }),
            Message::BroadcastArtifact(Broadcast {
                hash: "ab".into(),
                artifact: Some("class A\n{\n}\n".into()),
                status: None,
                error: None,
            }),
            Message::Heartbeat(Heartbeat {
                seq: 7,
                busy_with: Some(3),
            }),
            Message::PartialResult(PartialReply {
                partition_id: 4,
                result: None,
                error: Some("artifact missing".into()),
            }),
            Message::Shutdown(Shutdown::default()),
        ]
    }

    #[test]
    fn envelope_shape() {
        let frame = encode(&Message::Heartbeat(Heartbeat {
            seq: 1,
            busy_with: None,
        }));
        let len = u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize;
        assert_eq!(len, frame.len() - 4);
        let v: serde_json::Value = serde_json::from_slice(&frame[4..]).unwrap();
        assert_eq!(v["type"], "HEARTBEAT");
        assert_eq!(v["payload"]["seq"], 1);
    }

    #[test]
    fn round_trips() {
        for m in samples() {
            assert_eq!(decode(&encode(&m)).unwrap(), m, "{}", m.type_name());
        }
    }

    #[test]
    fn unknown_type_is_rejected() {
        let body = br#"{"type":"STEAL_WORK","payload":{}}"#;
        assert!(matches!(
            decode_body(body),
            Err(ProtocolError::Malformed(_))
        ));
    }

    #[test]
    fn truncation_is_detected() {
        let frame = encode(&samples()[1]);
        for cut in 1..frame.len() {
            let err = decode(&frame[..cut]).unwrap_err();
            assert!(
                matches!(err, ProtocolError::Truncated { .. }),
                "cut {cut}: {err}"
            );
        }
        assert!(matches!(decode(&[]), Err(ProtocolError::Closed)));
    }

    #[test]
    fn oversized_frame_is_rejected() {
        let mut frame = (MAX_FRAME_LEN + 1).to_be_bytes().to_vec();
        frame.extend_from_slice(b"{}");
        assert!(matches!(decode(&frame), Err(ProtocolError::TooLarge(_))));
    }

    proptest! {
        #[test]
        fn heartbeat_and_broadcast_round_trip(seq in any::<u64>(), busy in any::<Option<u32>>(), text in "\\PC{0,200}") {
            let m = Message::Heartbeat(Heartbeat { seq, busy_with: busy });
            prop_assert_eq!(decode(&encode(&m)).unwrap(), m);
            let b = Message::BroadcastArtifact(Broadcast { hash: "h".into(), artifact: Some(text), status: None, error: None });
            prop_assert_eq!(decode(&encode(&b)).unwrap(), b);
        }
    }
}
