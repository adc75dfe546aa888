//! Binary wire codec for the five cooperation messages exchanged by the fleet:
//! CAM (awareness beacon), DENM (decentralized event notification), CPM
//! (collective perception), MCM (maneuver coordination request) and ACK_MCM
//! (maneuver coordination answer).
//!
//! Layout rules: little-endian, fields serialized in declaration order, no
//! padding, no framing. Floats are IEEE-754 binary64 bit patterns, bools one
//! byte (0/1), and the CPM object list is prefixed with a u8 count. Every
//! valid message has exactly one encoding and `decode` accepts exactly those
//! encodings: out-of-range code bytes, short buffers and trailing garbage are
//! all rejected.

use thiserror::Error;

// ---------------------------------------------------------------------------
// wire codes
// ---------------------------------------------------------------------------

/// Message/field code points carried on the wire.
pub mod codes {
    pub mod message_id {
        pub const CAM: u8 = 1;
        pub const DENM: u8 = 2;
        pub const CPM: u8 = 3;
        pub const MCM: u8 = 4;
        pub const ACK_MCM: u8 = 5;
    }

    pub mod station_type {
        pub const UNKNOWN: u8 = 0;
        pub const PEDESTRIAN: u8 = 1;
        pub const IAV: u8 = 2;
        pub const BEACON: u8 = 3;
    }

    pub mod denm_type {
        pub const TRIGGER: u8 = 1;
        pub const UPDATE: u8 = 2;
        pub const TERMINATE: u8 = 3;
    }

    pub mod cause {
        pub const TRAFFIC_CONDITION: u8 = 1;
        pub const ACCIDENT: u8 = 2;
        pub const SLOW_VEHICLE: u8 = 26;
        pub const COLLISION_RISK: u8 = 97;
    }

    /// Sub-causes for `cause::COLLISION_RISK`.
    pub mod collision_sub_cause {
        pub const UNAVAILABLE: u8 = 0;
        pub const LONGITUDINAL: u8 = 1;
        pub const CROSSING: u8 = 2;
        pub const LATERAL: u8 = 3;
        pub const VULNERABLE_USER: u8 = 4;
    }

    pub mod information_quality {
        pub const UNAVAILABLE: u8 = 0;
        pub const LOWEST: u8 = 1;
        pub const HIGHEST: u8 = 7;
    }

    pub mod sensor_type {
        pub const UNKNOWN: u8 = 0;
        pub const LIDAR: u8 = 1;
    }

    pub mod sensor_confidence {
        pub const UNKNOWN: u8 = 0;
        pub const LOW: u8 = 1;
        pub const MEDIUM: u8 = 2;
        pub const HIGH: u8 = 3;
    }

    /// Object classes in the CPM perceived-object list.
    pub mod object_class {
        pub const UNKNOWN: u8 = 0;
        pub const PEDESTRIAN: u8 = 1;
        pub const IAV: u8 = 2;
        pub const OBJECT: u8 = 3;
    }

    /// Announced maneuver through an intersection.
    pub mod direction {
        pub const STRAIGHT: u8 = 0;
        pub const LEFT: u8 = 1;
        pub const RIGHT: u8 = 2;
    }
}

pub const PROTOCOL_VERSION: u8 = 1;

pub const HEADER_SIZE: usize = 6;
pub const CAM_SIZE: usize = 25;
pub const DENM_SIZE: usize = 31;
pub const CPM_BASE_SIZE: usize = 28;
pub const CPM_RECORD_SIZE: usize = 25;
pub const MCM_SIZE: usize = 27;
pub const ACK_MCM_SIZE: usize = 33;

// ---------------------------------------------------------------------------
// message types
// ---------------------------------------------------------------------------

/// Common header: protocol version (always 1), message id, sender station id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItsPduHeader {
    pub protocol_version: u8,
    pub message_id: u8,
    pub station_id: u32,
}

impl ItsPduHeader {
    pub fn new(message_id: u8, station_id: u32) -> Self {
        ItsPduHeader {
            protocol_version: PROTOCOL_VERSION,
            message_id,
            station_id,
        }
    }
}

/// Periodic awareness beacon: who I am and where I am.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CamMessage {
    pub header: ItsPduHeader,
    /// Simulated milliseconds modulo 65536.
    pub generation_time: u16,
    pub station_type: u8,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManagementContainer {
    /// Simulation step at which the event was detected.
    pub detection_time: u64,
    /// Distance to the detected hazard, meters.
    pub distance: f64,
    /// Seconds the notification stays valid.
    pub validity_duration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SituationContainer {
    pub cause_code: u8,
    pub sub_cause_code: u8,
    pub information_quality: u8,
}

/// Event notification: trigger, update or terminate for a detected hazard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenmMessage {
    pub header: ItsPduHeader,
    pub message_type: u8,
    pub station_type: u8,
    pub management: ManagementContainer,
    pub situation: SituationContainer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorInformation {
    pub sensor_type: u8,
    pub confidence: u8,
}

/// One entry of the CPM perceived-object list. Distance and yaw are relative
/// to the sender: yaw is the bearing of the object from the sender's heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceivedObjectRecord {
    pub object_id: u8,
    pub distance: f64,
    pub acceleration: f64,
    pub yaw_angle: f64,
}

/// Collective perception: sensor description plus the objects currently seen.
#[derive(Debug, Clone, PartialEq)]
pub struct CpmMessage {
    pub header: ItsPduHeader,
    pub generation_time: u16,
    pub station_type: u8,
    pub position: [f64; 2],
    pub sensor_information: SensorInformation,
    pub perceived_objects: Vec<PerceivedObjectRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManeuverContainer {
    pub id_intersection: u8,
    pub direction: u8,
}

/// Request to cross an intersection with the announced maneuver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmMessage {
    pub header: ItsPduHeader,
    pub generation_time: u16,
    pub station_type: u8,
    pub position: [f64; 2],
    pub maneuver: ManeuverContainer,
}

/// Answer to an MCM: echoes the maneuver and names the requester.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AckMcmMessage {
    pub header: ItsPduHeader,
    pub generation_time: u16,
    pub station_type: u8,
    pub position: [f64; 2],
    pub station_type_destinator: u8,
    pub station_id_destinator: u32,
    pub maneuver: ManeuverContainer,
    /// true = go ahead, false = I refuse (crossing or higher priority).
    pub ack_mcm_response: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Cam(CamMessage),
    Denm(DenmMessage),
    Cpm(CpmMessage),
    Mcm(McmMessage),
    AckMcm(AckMcmMessage),
}

impl Message {
    pub fn header(&self) -> &ItsPduHeader {
        match self {
            Message::Cam(m) => &m.header,
            Message::Denm(m) => &m.header,
            Message::Cpm(m) => &m.header,
            Message::Mcm(m) => &m.header,
            Message::AckMcm(m) => &m.header,
        }
    }

    pub fn station_id(&self) -> u32 {
        self.header().station_id
    }

    /// Wire code this variant must carry in its header.
    pub fn message_id(&self) -> u8 {
        match self {
            Message::Cam(_) => codes::message_id::CAM,
            Message::Denm(_) => codes::message_id::DENM,
            Message::Cpm(_) => codes::message_id::CPM,
            Message::Mcm(_) => codes::message_id::MCM,
            Message::AckMcm(_) => codes::message_id::ACK_MCM,
        }
    }
}

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

#[derive(Error, Debug, Clone, PartialEq)]
pub enum CodecError {
    /// Encode input violates a type invariant (bad code value, bad range).
    #[error("field `{field}` violates a message invariant")]
    InvariantViolation { field: &'static str },
    /// Buffer ends before the message does.
    #[error("truncated message: needed {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    /// Second byte is not one of the five known message ids.
    #[error("unknown message id {0}")]
    UnknownMessageId(u8),
    /// A code byte is outside its enumerated range.
    #[error("field `{field}` holds out-of-range code {value}")]
    BadEnum { field: &'static str, value: u8 },
    /// Well-formed message followed by extra bytes.
    #[error("{extra} trailing bytes after message end")]
    TrailingBytes { extra: usize },
}

/// What a field check found; encode and decode map these to different errors.
enum FieldIssue {
    Code { field: &'static str, value: u8 },
    Range { field: &'static str },
}

impl FieldIssue {
    fn encode_error(self) -> CodecError {
        match self {
            FieldIssue::Code { field, .. } => CodecError::InvariantViolation { field },
            FieldIssue::Range { field } => CodecError::InvariantViolation { field },
        }
    }

    fn decode_error(self) -> CodecError {
        match self {
            FieldIssue::Code { field, value } => CodecError::BadEnum { field, value },
            FieldIssue::Range { field } => CodecError::InvariantViolation { field },
        }
    }
}

// ---------------------------------------------------------------------------
// validation (shared between encode and decode)
// ---------------------------------------------------------------------------

fn check_code(field: &'static str, value: u8, max: u8) -> Result<(), FieldIssue> {
    if value > max {
        Err(FieldIssue::Code { field, value })
    } else {
        Ok(())
    }
}

fn check_header(h: &ItsPduHeader, expected_id: u8) -> Result<(), FieldIssue> {
    if h.protocol_version != PROTOCOL_VERSION {
        return Err(FieldIssue::Code {
            field: "protocol_version",
            value: h.protocol_version,
        });
    }
    if h.message_id != expected_id {
        return Err(FieldIssue::Code {
            field: "message_id",
            value: h.message_id,
        });
    }
    Ok(())
}

fn check_message(msg: &Message) -> Result<(), FieldIssue> {
    match msg {
        Message::Cam(m) => {
            check_header(&m.header, codes::message_id::CAM)?;
            check_code("station_type", m.station_type, 3)
        }
        Message::Denm(m) => {
            check_header(&m.header, codes::message_id::DENM)?;
            check_code("station_type", m.station_type, 3)?;
            if !matches!(m.message_type, 1..=3) {
                return Err(FieldIssue::Code {
                    field: "message_type",
                    value: m.message_type,
                });
            }
            let c = m.situation.cause_code;
            if !matches!(c, 1 | 2 | 26 | 97) {
                return Err(FieldIssue::Code {
                    field: "cause_code",
                    value: c,
                });
            }
            if c == codes::cause::COLLISION_RISK {
                check_code("sub_cause_code", m.situation.sub_cause_code, 4)?;
            }
            check_code("information_quality", m.situation.information_quality, 7)
        }
        Message::Cpm(m) => {
            check_header(&m.header, codes::message_id::CPM)?;
            check_code("station_type", m.station_type, 3)?;
            check_code("sensor_type", m.sensor_information.sensor_type, 1)?;
            check_code("sensor_confidence", m.sensor_information.confidence, 3)?;
            if m.perceived_objects.len() > 255 {
                return Err(FieldIssue::Range {
                    field: "perceived_objects",
                });
            }
            for obj in &m.perceived_objects {
                check_code("object_id", obj.object_id, 3)?;
                if !(obj.distance.is_finite() && obj.distance >= 0.0) {
                    return Err(FieldIssue::Range { field: "distance" });
                }
                if !(obj.yaw_angle.is_finite()
                    && obj.yaw_angle > -180.0
                    && obj.yaw_angle <= 180.0)
                {
                    return Err(FieldIssue::Range { field: "yaw_angle" });
                }
            }
            Ok(())
        }
        Message::Mcm(m) => {
            check_header(&m.header, codes::message_id::MCM)?;
            check_code("station_type", m.station_type, 3)?;
            check_code("direction", m.maneuver.direction, 2)
        }
        Message::AckMcm(m) => {
            check_header(&m.header, codes::message_id::ACK_MCM)?;
            check_code("station_type", m.station_type, 3)?;
            check_code("station_type_destinator", m.station_type_destinator, 3)?;
            check_code("direction", m.maneuver.direction, 2)
        }
    }
}

// ---------------------------------------------------------------------------
// encode
// ---------------------------------------------------------------------------

fn put_header(out: &mut Vec<u8>, h: &ItsPduHeader) {
    out.push(h.protocol_version);
    out.push(h.message_id);
    out.extend_from_slice(&h.station_id.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Serialize a message to its unique wire form.
pub fn encode(msg: &Message) -> Result<Vec<u8>, CodecError> {
    check_message(msg).map_err(FieldIssue::encode_error)?;
    let mut out = Vec::with_capacity(64);
    match msg {
        Message::Cam(m) => {
            put_header(&mut out, &m.header);
            out.extend_from_slice(&m.generation_time.to_le_bytes());
            out.push(m.station_type);
            put_f64(&mut out, m.position[0]);
            put_f64(&mut out, m.position[1]);
        }
        Message::Denm(m) => {
            put_header(&mut out, &m.header);
            out.push(m.message_type);
            out.push(m.station_type);
            out.extend_from_slice(&m.management.detection_time.to_le_bytes());
            put_f64(&mut out, m.management.distance);
            out.extend_from_slice(&m.management.validity_duration.to_le_bytes());
            out.push(m.situation.cause_code);
            out.push(m.situation.sub_cause_code);
            out.push(m.situation.information_quality);
        }
        Message::Cpm(m) => {
            put_header(&mut out, &m.header);
            out.extend_from_slice(&m.generation_time.to_le_bytes());
            out.push(m.station_type);
            put_f64(&mut out, m.position[0]);
            put_f64(&mut out, m.position[1]);
            out.push(m.sensor_information.sensor_type);
            out.push(m.sensor_information.confidence);
            out.push(m.perceived_objects.len() as u8);
            for obj in &m.perceived_objects {
                out.push(obj.object_id);
                put_f64(&mut out, obj.distance);
                put_f64(&mut out, obj.acceleration);
                put_f64(&mut out, obj.yaw_angle);
            }
        }
        Message::Mcm(m) => {
            put_header(&mut out, &m.header);
            out.extend_from_slice(&m.generation_time.to_le_bytes());
            out.push(m.station_type);
            put_f64(&mut out, m.position[0]);
            put_f64(&mut out, m.position[1]);
            out.push(m.maneuver.id_intersection);
            out.push(m.maneuver.direction);
        }
        Message::AckMcm(m) => {
            put_header(&mut out, &m.header);
            out.extend_from_slice(&m.generation_time.to_le_bytes());
            out.push(m.station_type);
            put_f64(&mut out, m.position[0]);
            put_f64(&mut out, m.position[1]);
            out.push(m.station_type_destinator);
            out.extend_from_slice(&m.station_id_destinator.to_le_bytes());
            out.push(m.maneuver.id_intersection);
            out.push(m.maneuver.direction);
            out.push(m.ack_mcm_response as u8);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.buf.len() {
            return Err(CodecError::Truncated {
                needed: self.pos + n,
                got: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn position(&mut self) -> Result<[f64; 2], CodecError> {
        Ok([self.f64()?, self.f64()?])
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Parse the unique message a byte sequence encodes, or say why there is none.
pub fn decode(bytes: &[u8]) -> Result<Message, CodecError> {
    let mut r = Reader::new(bytes);
    let protocol_version = r.u8()?;
    let message_id = r.u8()?;
    if !matches!(message_id, 1..=5) {
        return Err(CodecError::UnknownMessageId(message_id));
    }
    let station_id = r.u32()?;
    let header = ItsPduHeader {
        protocol_version,
        message_id,
        station_id,
    };

    let msg = match message_id {
        codes::message_id::CAM => Message::Cam(CamMessage {
            header,
            generation_time: r.u16()?,
            station_type: r.u8()?,
            position: r.position()?,
        }),
        codes::message_id::DENM => Message::Denm(DenmMessage {
            header,
            message_type: r.u8()?,
            station_type: r.u8()?,
            management: ManagementContainer {
                detection_time: r.u64()?,
                distance: r.f64()?,
                validity_duration: r.u32()?,
            },
            situation: SituationContainer {
                cause_code: r.u8()?,
                sub_cause_code: r.u8()?,
                information_quality: r.u8()?,
            },
        }),
        codes::message_id::CPM => {
            let generation_time = r.u16()?;
            let station_type = r.u8()?;
            let position = r.position()?;
            let sensor_information = SensorInformation {
                sensor_type: r.u8()?,
                confidence: r.u8()?,
            };
            let count = r.u8()? as usize;
            let mut perceived_objects = Vec::with_capacity(count);
            for _ in 0..count {
                perceived_objects.push(PerceivedObjectRecord {
                    object_id: r.u8()?,
                    distance: r.f64()?,
                    acceleration: r.f64()?,
                    yaw_angle: r.f64()?,
                });
            }
            Message::Cpm(CpmMessage {
                header,
                generation_time,
                station_type,
                position,
                sensor_information,
                perceived_objects,
            })
        }
        codes::message_id::MCM => Message::Mcm(McmMessage {
            header,
            generation_time: r.u16()?,
            station_type: r.u8()?,
            position: r.position()?,
            maneuver: ManeuverContainer {
                id_intersection: r.u8()?,
                direction: r.u8()?,
            },
        }),
        codes::message_id::ACK_MCM => {
            let generation_time = r.u16()?;
            let station_type = r.u8()?;
            let position = r.position()?;
            let station_type_destinator = r.u8()?;
            let station_id_destinator = r.u32()?;
            let maneuver = ManeuverContainer {
                id_intersection: r.u8()?,
                direction: r.u8()?,
            };
            let ack_byte = r.u8()?;
            if ack_byte > 1 {
                return Err(CodecError::BadEnum {
                    field: "ack_mcm_response",
                    value: ack_byte,
                });
            }
            Message::AckMcm(AckMcmMessage {
                header,
                generation_time,
                station_type,
                position,
                station_type_destinator,
                station_id_destinator,
                maneuver,
                ack_mcm_response: ack_byte == 1,
            })
        }
        _ => unreachable!(),
    };

    if r.remaining() > 0 {
        return Err(CodecError::TrailingBytes {
            extra: r.remaining(),
        });
    }
    check_message(&msg).map_err(FieldIssue::decode_error)?;
    Ok(msg)
}
