//! Run traces: every externally visible effect of a simulation step is
//! recorded as one event line, so two runs can be compared byte-for-byte and
//! metrics can be recomputed from a stored file without re-running.
//!
//! Line shape: `step|entity|kind|k=v|k=v|...`, floats printed with six
//! decimals. Events within a step are ordered by entity, then kind, then
//! emission order, which makes serialization independent of agent iteration
//! order.

use crate::agent::Phase;
use crate::wire::{codes, Message};
use std::fmt;
use thiserror::Error;

/// Identity of anything that occupies floor space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityId {
    Vehicle(u32),
    Obstacle(u32),
    Pedestrian(u32),
}

impl EntityId {
    fn rank(self) -> (u8, u32) {
        match self {
            EntityId::Vehicle(id) => (0, id),
            EntityId::Obstacle(id) => (1, id),
            EntityId::Pedestrian(id) => (2, id),
        }
    }

    pub fn station_id(self) -> Option<u32> {
        match self {
            EntityId::Vehicle(id) => Some(id),
            _ => None,
        }
    }
}

impl PartialOrd for EntityId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EntityId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityId::Vehicle(id) => write!(f, "v{id}"),
            EntityId::Obstacle(id) => write!(f, "o{id}"),
            EntityId::Pedestrian(id) => write!(f, "p{id}"),
        }
    }
}

impl std::str::FromStr for EntityId {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let (tag, digits) = s.split_at(1.min(s.len()));
        let id: u32 = digits.parse().map_err(|_| ())?;
        match tag {
            "v" => Ok(EntityId::Vehicle(id)),
            "o" => Ok(EntityId::Obstacle(id)),
            "p" => Ok(EntityId::Pedestrian(id)),
            _ => Err(()),
        }
    }
}

/// Compact description of a sent message, enough to recompute metrics and
/// replay protocol activity without storing raw frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MessageSummary {
    Cam,
    Denm {
        message_type: u8,
        cause: u8,
        sub_cause: u8,
        quality: u8,
        detection_time: u64,
    },
    Cpm {
        objects: u8,
    },
    Mcm {
        intersection: u8,
        direction: u8,
    },
    AckMcm {
        dest: u32,
        intersection: u8,
        direction: u8,
        response: bool,
    },
}

impl MessageSummary {
    pub fn of(message: &Message) -> Self {
        match message {
            Message::Cam(_) => MessageSummary::Cam,
            Message::Denm(m) => MessageSummary::Denm {
                message_type: m.message_type,
                cause: m.situation.cause_code,
                sub_cause: m.situation.sub_cause_code,
                quality: m.situation.information_quality,
                detection_time: m.management.detection_time,
            },
            Message::Cpm(m) => MessageSummary::Cpm {
                objects: m.perceived_objects.len() as u8,
            },
            Message::Mcm(m) => MessageSummary::Mcm {
                intersection: m.maneuver.id_intersection,
                direction: m.maneuver.direction,
            },
            Message::AckMcm(m) => MessageSummary::AckMcm {
                dest: m.station_id_destinator,
                intersection: m.maneuver.id_intersection,
                direction: m.maneuver.direction,
                response: m.ack_mcm_response,
            },
        }
    }

    pub fn message_id(&self) -> u8 {
        match self {
            MessageSummary::Cam => codes::message_id::CAM,
            MessageSummary::Denm { .. } => codes::message_id::DENM,
            MessageSummary::Cpm { .. } => codes::message_id::CPM,
            MessageSummary::Mcm { .. } => codes::message_id::MCM,
            MessageSummary::AckMcm { .. } => codes::message_id::ACK_MCM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventData {
    Moved {
        x: f64,
        y: f64,
        heading: f64,
        speed: f64,
    },
    Sent(MessageSummary),
    Delivered {
        sender: u32,
        message_id: u8,
    },
    PhaseChanged {
        phase: Phase,
    },
    CollisionDetected {
        other: EntityId,
        distance: f64,
    },
    GoalReached {
        x: f64,
        y: f64,
        goal_index: u32,
        cycle: u32,
    },
    ObstacleInjected {
        x: f64,
        y: f64,
        radius: f64,
    },
}

impl EventData {
    pub fn kind_index(&self) -> u8 {
        match self {
            EventData::Moved { .. } => 0,
            EventData::Sent(_) => 1,
            EventData::Delivered { .. } => 2,
            EventData::PhaseChanged { .. } => 3,
            EventData::CollisionDetected { .. } => 4,
            EventData::GoalReached { .. } => 5,
            EventData::ObstacleInjected { .. } => 6,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            EventData::Moved { .. } => "moved",
            EventData::Sent(_) => "sent",
            EventData::Delivered { .. } => "delivered",
            EventData::PhaseChanged { .. } => "phase",
            EventData::CollisionDetected { .. } => "collision",
            EventData::GoalReached { .. } => "goal",
            EventData::ObstacleInjected { .. } => "obstacle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub step: u64,
    pub entity: EntityId,
    pub data: EventData,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum TraceError {
    #[error("malformed trace at line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },
}

fn phase_token(phase: Phase) -> String {
    match phase {
        Phase::Cruising => "cruising".into(),
        Phase::Following => "following".into(),
        Phase::Requesting(i) => format!("requesting:{i}"),
        Phase::Waiting(i) => format!("waiting:{i}"),
        Phase::Crossing(i) => format!("crossing:{i}"),
        Phase::Avoiding => "avoiding".into(),
        Phase::Blocked => "blocked".into(),
    }
}

fn parse_phase(token: &str) -> Option<Phase> {
    if let Some((name, arg)) = token.split_once(':') {
        let i: u8 = arg.parse().ok()?;
        return match name {
            "requesting" => Some(Phase::Requesting(i)),
            "waiting" => Some(Phase::Waiting(i)),
            "crossing" => Some(Phase::Crossing(i)),
            _ => None,
        };
    }
    match token {
        "cruising" => Some(Phase::Cruising),
        "following" => Some(Phase::Following),
        "avoiding" => Some(Phase::Avoiding),
        "blocked" => Some(Phase::Blocked),
        _ => None,
    }
}

impl Trace {
    pub fn push(&mut self, step: u64, entity: EntityId, data: EventData) {
        self.events.push(TraceEvent { step, entity, data });
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&format_event(ev));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut events = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            events.push(parse_event(line).map_err(|reason| TraceError::MalformedTrace {
                line: idx + 1,
                reason,
            })?);
        }
        Ok(Trace { events })
    }
}

fn format_event(ev: &TraceEvent) -> String {
    let mut s = format!("{}|{}|{}", ev.step, ev.entity, ev.data.kind_name());
    match &ev.data {
        EventData::Moved {
            x,
            y,
            heading,
            speed,
        } => {
            s.push_str(&format!(
                "|x={x:.6}|y={y:.6}|heading={heading:.6}|speed={speed:.6}"
            ));
        }
        EventData::Sent(summary) => match summary {
            MessageSummary::Cam => s.push_str("|msg=cam"),
            MessageSummary::Denm {
                message_type,
                cause,
                sub_cause,
                quality,
                detection_time,
            } => s.push_str(&format!(
                "|msg=denm|type={message_type}|cause={cause}|sub={sub_cause}|iq={quality}|det={detection_time}"
            )),
            MessageSummary::Cpm { objects } => {
                s.push_str(&format!("|msg=cpm|objects={objects}"))
            }
            MessageSummary::Mcm {
                intersection,
                direction,
            } => s.push_str(&format!("|msg=mcm|inter={intersection}|dir={direction}")),
            MessageSummary::AckMcm {
                dest,
                intersection,
                direction,
                response,
            } => s.push_str(&format!(
                "|msg=ack|dest={dest}|inter={intersection}|dir={direction}|resp={}",
                u8::from(*response)
            )),
        },
        EventData::Delivered { sender, message_id } => {
            s.push_str(&format!("|from={sender}|msg_id={message_id}"));
        }
        EventData::PhaseChanged { phase } => {
            s.push_str(&format!("|phase={}", phase_token(*phase)));
        }
        EventData::CollisionDetected { other, distance } => {
            s.push_str(&format!("|other={other}|distance={distance:.6}"));
        }
        EventData::GoalReached {
            x,
            y,
            goal_index,
            cycle,
        } => {
            s.push_str(&format!("|x={x:.6}|y={y:.6}|index={goal_index}|cycle={cycle}"));
        }
        EventData::ObstacleInjected { x, y, radius } => {
            s.push_str(&format!("|x={x:.6}|y={y:.6}|radius={radius:.6}"));
        }
    }
    s
}

fn parse_event(line: &str) -> Result<TraceEvent, String> {
    let mut parts = line.split('|');
    let step: u64 = parts
        .next()
        .ok_or("missing step")?
        .parse()
        .map_err(|_| "bad step number".to_string())?;
    let entity: EntityId = parts
        .next()
        .ok_or("missing entity")?
        .parse()
        .map_err(|_| "bad entity id".to_string())?;
    let kind = parts.next().ok_or("missing kind")?;

    let mut fields = std::collections::BTreeMap::new();
    for part in parts {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("field without '=': {part}"))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<&String, String> {
        fields.get(k).ok_or_else(|| format!("missing field {k}"))
    };
    let num = |k: &str| -> Result<f64, String> {
        get(k)?.parse().map_err(|_| format!("bad number in {k}"))
    };
    let int = |k: &str| -> Result<u64, String> {
        get(k)?.parse().map_err(|_| format!("bad integer in {k}"))
    };

    let data = match kind {
        "moved" => EventData::Moved {
            x: num("x")?,
            y: num("y")?,
            heading: num("heading")?,
            speed: num("speed")?,
        },
        "sent" => {
            let summary = match get("msg")?.as_str() {
                "cam" => MessageSummary::Cam,
                "denm" => MessageSummary::Denm {
                    message_type: int("type")? as u8,
                    cause: int("cause")? as u8,
                    sub_cause: int("sub")? as u8,
                    quality: int("iq")? as u8,
                    detection_time: int("det")?,
                },
                "cpm" => MessageSummary::Cpm {
                    objects: int("objects")? as u8,
                },
                "mcm" => MessageSummary::Mcm {
                    intersection: int("inter")? as u8,
                    direction: int("dir")? as u8,
                },
                "ack" => MessageSummary::AckMcm {
                    dest: int("dest")? as u32,
                    intersection: int("inter")? as u8,
                    direction: int("dir")? as u8,
                    response: int("resp")? != 0,
                },
                other => return Err(format!("unknown message tag {other}")),
            };
            EventData::Sent(summary)
        }
        "delivered" => EventData::Delivered {
            sender: int("from")? as u32,
            message_id: int("msg_id")? as u8,
        },
        "phase" => EventData::PhaseChanged {
            phase: parse_phase(get("phase")?)
                .ok_or_else(|| format!("unknown phase {}", get("phase").unwrap()))?,
        },
        "collision" => EventData::CollisionDetected {
            other: get("other")?
                .parse()
                .map_err(|_| "bad entity in other".to_string())?,
            distance: num("distance")?,
        },
        "goal" => EventData::GoalReached {
            x: num("x")?,
            y: num("y")?,
            goal_index: int("index")? as u32,
            cycle: int("cycle")? as u32,
        },
        "obstacle" => EventData::ObstacleInjected {
            x: num("x")?,
            y: num("y")?,
            radius: num("radius")?,
        },
        other => return Err(format!("unknown event kind {other}")),
    };
    Ok(TraceEvent { step, entity, data })
}
