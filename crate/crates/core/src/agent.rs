//! Per-vehicle controller. Each simulation step the controller ingests the
//! messages delivered since the last step, reacts to its own radar scan,
//! runs the intersection handshake, and emits a speed command, a lateral
//! offset target and the outgoing messages for this step.
//!
//! The controller is a pure function of its inputs: no clocks, no randomness,
//! only ordered containers. Two calls with equal inputs produce equal
//! outputs, which is what makes whole runs replayable.

use crate::geometry::{heading_vec, Vec2};
use crate::perception::{alert_sub_cause, classify_risk, PerceivedObject, RiskLevel, SensorConfig};
use crate::plan::{zone_of, TrafficPlan, Zone};
use crate::trace::EntityId;
use crate::wire::{
    codes, AckMcmMessage, CamMessage, CpmMessage, DenmMessage, ItsPduHeader, ManagementContainer,
    ManeuverContainer, McmMessage, Message, PerceivedObjectRecord, SensorInformation,
    SituationContainer,
};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Cruising,
    Following,
    /// Sent a crossing request for this intersection, collecting answers.
    Requesting(u8),
    /// Lost the arbitration; parked at the core rim until the next retry.
    Waiting(u8),
    /// Holds the crossing grant for this intersection.
    Crossing(u8),
    /// Tracking a lateral offset around an obstruction.
    Avoiding,
    /// Forced stop that outlasted the block timeout.
    Blocked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mission {
    pub goals: Vec<Vec2>,
    pub next_goal: usize,
    pub cyclic: bool,
    pub cycles_completed: u32,
    pub done: bool,
}

impl Mission {
    pub fn new(goals: Vec<Vec2>, cyclic: bool) -> Self {
        let done = goals.is_empty();
        Mission {
            goals,
            next_goal: 0,
            cyclic,
            cycles_completed: 0,
            done,
        }
    }

    pub fn current_goal(&self) -> Option<Vec2> {
        if self.done {
            None
        } else {
            self.goals.get(self.next_goal).copied()
        }
    }

    /// Advance past the current goal. Cyclic missions wrap and count a
    /// completed cycle; finite missions finish after the last goal.
    pub fn arrive(&mut self) {
        if self.done {
            return;
        }
        self.next_goal += 1;
        if self.next_goal >= self.goals.len() {
            if self.cyclic {
                self.next_goal = 0;
                self.cycles_completed += 1;
            } else {
                self.done = true;
            }
        }
    }
}

/// Mission precedence used in intersection conflicts. Higher wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TaskClaim {
    pub priority: u8,
    pub urgency: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConflictClaim {
    pub station_id: u32,
    pub priority: u8,
    pub urgency: u8,
}

/// Winner among conflicting crossing claims: highest priority, then highest
/// urgency, then the lowest station id. Total order, so every participant
/// computes the same winner from the same set.
pub fn resolve_conflict(claims: &[ConflictClaim]) -> Option<u32> {
    claims
        .iter()
        .max_by_key(|c| (c.priority, c.urgency, std::cmp::Reverse(c.station_id)))
        .map(|c| c.station_id)
}

fn beats(a: ConflictClaim, b: ConflictClaim) -> bool {
    resolve_conflict(&[a, b]) == Some(a.station_id)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeerTrack {
    pub position: Vec2,
    pub station_type: u8,
    pub last_seen: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RivalRequest {
    pub intersection: u8,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenmRecord {
    pub detection_time: u64,
    pub last_emitted_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub station_id: u32,
    pub position: Vec2,
    pub heading_deg: f64,
    pub speed: f64,
    pub phase: Phase,
    pub mission: Mission,
    pub task_priority: u8,
    pub task_urgency: u8,
    pub cruise_speed: f64,
    /// Where the current mission leg started; motion tracks the segment from
    /// here to the current goal.
    pub segment_anchor: Vec2,
    /// Precedence of every station in the fleet, fixed at assignment time.
    pub peer_tasks: BTreeMap<u32, TaskClaim>,
    /// Stations heard from recently via their beacons.
    pub known_peers: BTreeMap<u32, PeerTrack>,
    /// Grid cells flagged by peer reports, with expiry step.
    pub obstacle_map: BTreeMap<(i64, i64), u64>,
    /// Last step each radar track was included in a perception report.
    pub last_cpm: BTreeMap<EntityId, u64>,
    /// Open hazard notifications keyed by (cause, sub-cause).
    pub active_denms: BTreeMap<(u8, u8), DenmRecord>,
    /// Crossing requests heard from other stations, with arrival step.
    pub rival_requests: BTreeMap<u32, RivalRequest>,
    /// Stations that refused the current crossing request.
    pub refusals: BTreeSet<u32>,
    /// Step of the last own crossing request.
    pub mcm_step: Option<u64>,
    /// Whether the current grant has physically reached the core yet.
    pub entered_core: bool,
    /// Consecutive steps of alert- or avoidance-forced standstill.
    pub forced_stop_steps: u64,
    /// Messages dropped for semantic reasons (unknown intersection etc.).
    pub ignored_messages: u64,
}

impl AgentState {
    pub fn new(station_id: u32, position: Vec2, mission: Mission) -> Self {
        AgentState {
            station_id,
            position,
            heading_deg: 0.0,
            speed: 0.0,
            phase: Phase::Cruising,
            mission,
            task_priority: 0,
            task_urgency: 0,
            cruise_speed: 1.0,
            segment_anchor: position,
            peer_tasks: BTreeMap::new(),
            known_peers: BTreeMap::new(),
            obstacle_map: BTreeMap::new(),
            last_cpm: BTreeMap::new(),
            active_denms: BTreeMap::new(),
            rival_requests: BTreeMap::new(),
            refusals: BTreeSet::new(),
            mcm_step: None,
            entered_core: false,
            forced_stop_steps: 0,
            ignored_messages: 0,
        }
    }

    pub fn claim(&self) -> ConflictClaim {
        ConflictClaim {
            station_id: self.station_id,
            priority: self.task_priority,
            urgency: self.task_urgency,
        }
    }

    fn claim_of(&self, station_id: u32) -> ConflictClaim {
        let task = self.peer_tasks.get(&station_id).copied().unwrap_or_default();
        ConflictClaim {
            station_id,
            priority: task.priority,
            urgency: task.urgency,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Step length, seconds.
    pub dt: f64,
    /// Beacon every this many steps.
    pub cam_period: u64,
    /// Minimum steps between perception reports about the same track.
    pub cpm_period: u64,
    /// Steps a peer-reported obstacle cell stays on the map.
    pub cpm_expiry: u64,
    /// Steps a parked requester waits before asking again.
    pub ack_timeout: u64,
    /// Steps between sending a crossing request and trusting the answers
    /// (one delivery each way at minimum bus latency).
    pub ack_round_trip: u64,
    /// Answer crossing requests from stations within this multiple of the
    /// intersection's approach radius.
    pub ack_scope_factor: f64,
    /// Consecutive forced-stop steps before declaring the vehicle blocked.
    pub block_timeout: u64,
    /// Re-notify a hazard when its distance moved by more than this, m.
    pub update_epsilon: f64,
    /// Extra lateral room kept when passing an obstruction, m.
    pub clearance: f64,
    /// Radius assumed for radar contacts that do not report one, m.
    pub assumed_obstacle_radius: f64,
    /// Lateral offset slew rate, m/s.
    pub lateral_rate: f64,
    /// Standstill gap kept behind a leading vehicle, m.
    pub follow_gap: f64,
    /// Own body radius, m.
    pub vehicle_radius: f64,
    /// A goal counts as reached within this distance, m.
    pub arrival_tolerance: f64,
    /// Advertised hazard validity, seconds.
    pub denm_validity: u32,
    /// Steps a beacon keeps a peer on the known list.
    pub peer_ttl: u64,
    pub handshake_enabled: bool,
    pub avoidance_enabled: bool,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            dt: 0.1,
            cam_period: 5,
            cpm_period: 10,
            cpm_expiry: 50,
            ack_timeout: 10,
            ack_round_trip: 2,
            ack_scope_factor: 2.0,
            block_timeout: 50,
            update_epsilon: 0.1,
            clearance: 0.3,
            assumed_obstacle_radius: 0.25,
            lateral_rate: 0.5,
            follow_gap: 1.2,
            vehicle_radius: 0.2,
            arrival_tolerance: 0.3,
            denm_validity: 30,
            peer_ttl: 20,
            handshake_enabled: true,
            avoidance_enabled: true,
        }
    }
}

/// Kinematic command for this step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub speed: f64,
    pub target_lateral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: AgentState,
    pub outbox: Vec<Message>,
    pub motion: Motion,
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum AgentError {
    #[error("crossing request names unknown intersection {0}")]
    UnknownIntersection(u8),
}

/// Lateral avoidance decision for one obstruction ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Maneuver {
    /// Track this lateral offset from the lane centerline.
    Offset(f64),
    /// No clear corridor inside the lane; hold position.
    Stop,
}

/// Pick a lateral offset that clears an obstruction at `obstacle_lateral`
/// (lane frame, left positive) with radius `obstacle_radius`. Candidates are
/// the centerline and the two tracks one required-separation to either side
/// of the obstruction; of those inside the lane and not blocked, the one
/// with more room to the lane edge wins, left on ties. The centerline is in
/// the list so an obstruction sitting off the lane never forces a swerve or
/// a stop.
pub fn avoidance_maneuver(
    obstacle_lateral: f64,
    obstacle_radius: f64,
    half_width: f64,
    occupied: &[f64],
    params: &ProtocolParams,
) -> Maneuver {
    let separation = obstacle_radius + params.clearance;
    let candidates = [
        0.0,
        obstacle_lateral + separation,
        obstacle_lateral - separation,
    ];
    let mut best: Option<f64> = None;
    for &cand in &candidates {
        if cand.abs() > half_width {
            continue;
        }
        if (obstacle_lateral - cand).abs() < separation - 1e-9 {
            continue;
        }
        if occupied.iter().any(|&lat| (lat - cand).abs() < separation) {
            continue;
        }
        let better = match best {
            None => true,
            Some(cur) => {
                let margin = half_width - cand.abs();
                let cur_margin = half_width - cur.abs();
                margin > cur_margin + 1e-12
                    || ((margin - cur_margin).abs() <= 1e-12 && cand > cur)
            }
        };
        if better {
            best = Some(cand);
        }
    }
    match best {
        Some(offset) => Maneuver::Offset(offset),
        None => Maneuver::Stop,
    }
}

/// Answer another station's crossing request. Refusal means either holding
/// the grant for that intersection or contending for it with a winning claim.
pub fn answer_mcm(
    state: &AgentState,
    request: &McmMessage,
    plan: &TrafficPlan,
    now: u64,
    params: &ProtocolParams,
) -> Result<AckMcmMessage, AgentError> {
    let intersection = request.maneuver.id_intersection;
    plan.intersection(intersection)
        .map_err(|_| AgentError::UnknownIntersection(intersection))?;
    let requester = request.header.station_id;
    let refuse = match state.phase {
        Phase::Crossing(i) if i == intersection => true,
        Phase::Requesting(i) | Phase::Waiting(i) if i == intersection => {
            beats(state.claim(), state.claim_of(requester))
        }
        _ => false,
    };
    Ok(AckMcmMessage {
        header: ItsPduHeader::new(codes::message_id::ACK_MCM, state.station_id),
        generation_time: gen_time_u16(now, params.dt),
        station_type: codes::station_type::IAV,
        position: [state.position.x, state.position.y],
        station_type_destinator: request.station_type,
        station_id_destinator: requester,
        maneuver: request.maneuver,
        ack_mcm_response: !refuse,
    })
}

fn gen_time_ms(now: u64, dt: f64) -> u64 {
    (now as f64 * dt * 1000.0).round() as u64
}

fn gen_time_u16(now: u64, dt: f64) -> u16 {
    (gen_time_ms(now, dt) % 65536) as u16
}

fn cell_of(pos: Vec2) -> (i64, i64) {
    (pos.x.floor() as i64, pos.y.floor() as i64)
}

fn cell_center(cell: (i64, i64)) -> Vec2 {
    Vec2::new(cell.0 as f64 + 0.5, cell.1 as f64 + 0.5)
}

/// Turn the vehicle will take at the given intersection center, judged from
/// the mission goal sequence. Straight when the intersection is not a goal
/// node (through traffic) or the heading barely changes.
fn planned_direction_at(state: &AgentState, center: Vec2, tolerance: f64) -> u8 {
    let goals = &state.mission.goals;
    let n = goals.len();
    if n < 3 || state.mission.done {
        return codes::direction::STRAIGHT;
    }
    let Some(k) = goals.iter().position(|g| g.distance(center) <= tolerance) else {
        return codes::direction::STRAIGHT;
    };
    if !state.mission.cyclic && (k == 0 || k + 1 >= n) {
        return codes::direction::STRAIGHT;
    }
    let incoming = goals[k].sub(goals[(k + n - 1) % n]).unit();
    let outgoing = goals[(k + 1) % n].sub(goals[k]).unit();
    let cross = incoming.cross(outgoing);
    if cross > 0.5 {
        codes::direction::LEFT
    } else if cross < -0.5 {
        codes::direction::RIGHT
    } else {
        codes::direction::STRAIGHT
    }
}

fn absolute_position_of(state: &AgentState, contact: &PerceivedObject) -> Vec2 {
    let angle = state.heading_deg + contact.bearing_deg;
    state
        .position
        .add(heading_vec(angle).scale(contact.distance))
}

/// One control step. Pure: equal inputs give equal outputs.
pub fn step_agent(
    state: &AgentState,
    inbox: &[Message],
    contacts: &[PerceivedObject],
    plan: &TrafficPlan,
    now: u64,
    params: &ProtocolParams,
    sensor: &SensorConfig,
) -> StepOutput {
    let mut st = state.clone();
    let mut outbox: Vec<Message> = Vec::new();

    if st.mission.done {
        return StepOutput {
            state: st,
            outbox,
            motion: Motion {
                speed: 0.0,
                target_lateral: 0.0,
            },
        };
    }

    // -- 1: ingest delivered messages ------------------------------------
    st.known_peers
        .retain(|_, peer| now.saturating_sub(peer.last_seen) <= params.peer_ttl);
    st.rival_requests
        .retain(|_, req| now.saturating_sub(req.step) <= params.ack_timeout);
    st.obstacle_map.retain(|_, expiry| *expiry >= now);

    for msg in inbox {
        match msg {
            Message::Cam(m) => {
                st.known_peers.insert(
                    m.header.station_id,
                    PeerTrack {
                        position: Vec2::new(m.position[0], m.position[1]),
                        station_type: m.station_type,
                        last_seen: now,
                    },
                );
            }
            Message::Cpm(m) => {
                // flag the reporter's cell only for non-vehicle objects;
                // vehicle spacing is the following logic's job
                let hazardous = m
                    .perceived_objects
                    .iter()
                    .any(|o| o.object_id != codes::object_class::IAV);
                if hazardous {
                    let cell = cell_of(Vec2::new(m.position[0], m.position[1]));
                    st.obstacle_map.insert(cell, now + params.cpm_expiry);
                }
            }
            Message::Denm(m) => {
                let peer = st.known_peers.get(&m.header.station_id);
                if let Some(peer) = peer {
                    let cell = cell_of(peer.position);
                    if m.message_type == codes::denm_type::TERMINATE {
                        st.obstacle_map.remove(&cell);
                    } else {
                        st.obstacle_map.insert(cell, now + params.cpm_expiry);
                    }
                }
            }
            Message::Mcm(m) => {
                let intersection = m.maneuver.id_intersection;
                match plan.intersection(intersection) {
                    Err(_) => st.ignored_messages += 1,
                    Ok(inter) => {
                        let sender_pos = Vec2::new(m.position[0], m.position[1]);
                        let scope = params.ack_scope_factor * inter.approach_radius;
                        if sender_pos.distance(inter.center) <= scope {
                            st.rival_requests.insert(
                                m.header.station_id,
                                RivalRequest {
                                    intersection,
                                    step: now,
                                },
                            );
                            // plan lookup already succeeded, answer cannot fail
                            if let Ok(ack) = answer_mcm(&st, m, plan, now, params) {
                                outbox.push(Message::AckMcm(ack));
                            }
                        }
                    }
                }
            }
            Message::AckMcm(m) => {
                if m.station_id_destinator != st.station_id {
                    continue;
                }
                let intersection = m.maneuver.id_intersection;
                if plan.intersection(intersection).is_err() {
                    st.ignored_messages += 1;
                    continue;
                }
                if let Phase::Requesting(i) = st.phase {
                    if i == intersection {
                        if m.ack_mcm_response {
                            st.refusals.remove(&m.header.station_id);
                        } else {
                            st.refusals.insert(m.header.station_id);
                        }
                    }
                }
            }
        }
    }

    // -- 2: react to the radar scan --------------------------------------
    let mut speed_cap = st.cruise_speed;
    let mut cap = |v: f64| {
        if v < speed_cap {
            speed_cap = v;
        }
    };

    // perception report for fresh frontal contacts in the observation band
    let mut cpm_records: Vec<PerceivedObjectRecord> = Vec::new();
    for obj in contacts {
        if classify_risk(obj.distance, sensor) != RiskLevel::Observe {
            continue;
        }
        if obj.bearing_deg.abs() >= sensor.longitudinal_cone_deg {
            continue;
        }
        let due = st
            .last_cpm
            .get(&obj.source)
            .is_none_or(|&last| now.saturating_sub(last) >= params.cpm_period);
        if due {
            st.last_cpm.insert(obj.source, now);
            cpm_records.push(PerceivedObjectRecord {
                object_id: obj.object_class,
                distance: obj.distance,
                acceleration: 0.0,
                yaw_angle: obj.bearing_deg,
            });
        }
    }
    if !cpm_records.is_empty() {
        outbox.push(Message::Cpm(CpmMessage {
            header: ItsPduHeader::new(codes::message_id::CPM, st.station_id),
            generation_time: gen_time_u16(now, params.dt),
            station_type: codes::station_type::IAV,
            position: [st.position.x, st.position.y],
            sensor_information: SensorInformation {
                sensor_type: codes::sensor_type::LIDAR,
                confidence: codes::sensor_confidence::HIGH,
            },
            perceived_objects: cpm_records,
        }));
    }

    // following: hold a gap behind the nearest leading vehicle
    let mut following = false;
    if let Some(leader) = contacts.iter().find(|o| {
        o.object_class == codes::object_class::IAV
            && o.bearing_deg.abs() < sensor.longitudinal_cone_deg
    }) {
        let leader_speed = (st.speed - leader.relative_speed).max(0.0);
        let follow_cap = (leader_speed + (leader.distance - params.follow_gap))
            .clamp(0.0, st.cruise_speed);
        if follow_cap < st.cruise_speed {
            following = true;
        }
        cap(follow_cap);
    }

    // lateral avoidance around the nearest non-vehicle obstruction ahead
    let mut avoidance_stop = false;
    let mut target_lateral = 0.0;
    if params.avoidance_enabled {
        let nearest_obstruction = contacts.iter().find(|o| {
            o.object_class == codes::object_class::OBJECT
                && o.bearing_deg.abs() < sensor.longitudinal_cone_deg
        });
        // keep an offset while anything non-vehicle is near, or we would cut
        // back in right on top of what we just passed
        let any_obstruction_near = contacts
            .iter()
            .any(|o| o.object_class == codes::object_class::OBJECT);
        if let Some(obj) = nearest_obstruction {
            let half_width = plan
                .nearest_lane(st.position)
                .map(|(lane, _)| lane.width / 2.0)
                .unwrap_or(1.0);
            let own_lateral = current_lateral_offset(&st);
            let obstacle_lateral =
                own_lateral + lane_frame_lateral(&st, absolute_position_of(&st, obj).sub(st.position));
            let occupied: Vec<f64> = contacts
                .iter()
                .filter(|o| {
                    o.source != obj.source && o.bearing_deg.abs() < sensor.longitudinal_cone_deg
                })
                .map(|o| {
                    own_lateral + lane_frame_lateral(&st, absolute_position_of(&st, o).sub(st.position))
                })
                .collect();
            match avoidance_maneuver(
                obstacle_lateral,
                params.assumed_obstacle_radius,
                half_width,
                &occupied,
                params,
            ) {
                Maneuver::Offset(offset) => target_lateral = offset,
                Maneuver::Stop => avoidance_stop = true,
            }
        } else if any_obstruction_near {
            target_lateral = current_lateral_offset(&st);
        }
    }

    // alerts: notify everyone, react to anything not behind us. A fixed
    // obstruction our present offset already clears is let by; one we are
    // still sliding away from trades forward motion for the slide instead
    // of freezing mid-maneuver.
    let mut alert_stop = false;
    let mut current_alerts: BTreeMap<(u8, u8), f64> = BTreeMap::new();
    let side_separation = params.assumed_obstacle_radius + params.clearance;
    for obj in contacts {
        if classify_risk(obj.distance, sensor) != RiskLevel::Alert {
            continue;
        }
        let key = (codes::cause::COLLISION_RISK, alert_sub_cause(obj, sensor));
        let entry = current_alerts.entry(key).or_insert(obj.distance);
        if obj.distance < *entry {
            *entry = obj.distance;
        }
        if obj.bearing_deg.abs() >= 90.0 {
            continue;
        }
        let side = lane_frame_lateral(&st, absolute_position_of(&st, obj).sub(st.position));
        match obj.object_class {
            codes::object_class::IAV => {
                // a vehicle beside us in another track is not in our way;
                // one overlapping our corridor is
                if side.abs() < 2.0 * params.vehicle_radius + params.clearance - 1e-6 {
                    alert_stop = true;
                }
            }
            codes::object_class::OBJECT if params.avoidance_enabled && !avoidance_stop => {
                if side.abs() < side_separation - 1e-6 {
                    // escape offset exists but we still overlap its path:
                    // slide out sideways before closing any further
                    cap(params.lateral_rate);
                }
            }
            _ => alert_stop = true,
        }
    }

    // slow down near peer-reported trouble
    let near_reported = st
        .obstacle_map
        .keys()
        .any(|&cell| cell_center(cell).distance(st.position) <= sensor.observation_distance);
    if near_reported {
        cap(st.cruise_speed / 2.0);
    }

    // hazard notification lifecycle
    emit_denms(&mut st, &current_alerts, &mut outbox, now, params);

    // -- 3: intersection handshake ---------------------------------------
    if params.handshake_enabled {
        run_handshake(&mut st, plan, contacts, &mut outbox, now, params);
        // never roll into a core without holding its grant
        for inter in &plan.intersections {
            if st.phase == Phase::Crossing(inter.id) {
                continue;
            }
            let d = st.position.distance(inter.center);
            if d <= inter.approach_radius {
                let toward = inter.center.sub(st.position).dot(heading_vec(st.heading_deg));
                if toward > 0.0 {
                    // park a standoff short of the rim: landing exactly on the
                    // core boundary would count as occupying it and wedge the
                    // whole arbitration
                    let rim = inter.core_radius + params.clearance;
                    cap(((d - rim) / params.dt).max(0.0));
                }
            }
        }
    }

    // -- stop resolution and block escalation ----------------------------
    if alert_stop || avoidance_stop {
        cap(0.0);
        st.forced_stop_steps += 1;
        if st.forced_stop_steps == params.block_timeout {
            st.phase = Phase::Blocked;
            escalate_block(&mut st, &current_alerts, contacts, &mut outbox, now, params, sensor);
        }
    } else {
        st.forced_stop_steps = 0;
        if st.phase == Phase::Blocked {
            st.phase = Phase::Cruising;
        }
    }
    if st.phase == Phase::Blocked {
        cap(0.0);
    }

    // -- 4: phase bookkeeping for the steady modes -----------------------
    match st.phase {
        Phase::Cruising | Phase::Following | Phase::Avoiding => {
            st.phase = if target_lateral != 0.0 || avoidance_stop {
                Phase::Avoiding
            } else if following {
                Phase::Following
            } else {
                Phase::Cruising
            };
        }
        _ => {}
    }

    // -- 5: heartbeat beacon ---------------------------------------------
    if now.is_multiple_of(params.cam_period) {
        outbox.push(Message::Cam(CamMessage {
            header: ItsPduHeader::new(codes::message_id::CAM, st.station_id),
            generation_time: gen_time_u16(now, params.dt),
            station_type: codes::station_type::IAV,
            position: [st.position.x, st.position.y],
        }));
    }

    outbox.sort_by_key(|m| m.message_id());
    StepOutput {
        state: st,
        outbox,
        motion: Motion {
            speed: speed_cap.max(0.0),
            target_lateral,
        },
    }
}

/// Lateral coordinate of `rel` (an offset from the vehicle position) in the
/// current mission-segment frame, left of travel positive.
fn lane_frame_lateral(state: &AgentState, rel: Vec2) -> f64 {
    let along = match state.mission.current_goal() {
        Some(goal) => goal.sub(state.segment_anchor).unit(),
        None => heading_vec(state.heading_deg),
    };
    along.cross(rel)
}

/// Current own lateral offset from the mission segment centerline.
fn current_lateral_offset(state: &AgentState) -> f64 {
    lane_frame_lateral(state, state.position.sub(state.segment_anchor))
}

fn emit_denms(
    st: &mut AgentState,
    current_alerts: &BTreeMap<(u8, u8), f64>,
    outbox: &mut Vec<Message>,
    now: u64,
    params: &ProtocolParams,
) {
    let make = |st: &AgentState, message_type, key: (u8, u8), detection_time, distance, quality| {
        Message::Denm(DenmMessage {
            header: ItsPduHeader::new(codes::message_id::DENM, st.station_id),
            message_type,
            station_type: codes::station_type::IAV,
            management: ManagementContainer {
                detection_time,
                distance,
                validity_duration: params.denm_validity,
            },
            situation: SituationContainer {
                cause_code: key.0,
                sub_cause_code: key.1,
                information_quality: quality,
            },
        })
    };

    for (&key, &distance) in current_alerts {
        match st.active_denms.get_mut(&key) {
            None => {
                let detection_time = gen_time_ms(now, params.dt);
                outbox.push(make(
                    st,
                    codes::denm_type::TRIGGER,
                    key,
                    detection_time,
                    distance,
                    5,
                ));
                st.active_denms.insert(
                    key,
                    DenmRecord {
                        detection_time,
                        last_emitted_distance: distance,
                    },
                );
            }
            Some(rec) => {
                if (distance - rec.last_emitted_distance).abs() > params.update_epsilon {
                    let detection_time = rec.detection_time;
                    rec.last_emitted_distance = distance;
                    outbox.push(make(
                        st,
                        codes::denm_type::UPDATE,
                        key,
                        detection_time,
                        distance,
                        5,
                    ));
                }
            }
        }
    }

    let stale: Vec<(u8, u8)> = st
        .active_denms
        .keys()
        .filter(|k| !current_alerts.contains_key(k))
        .copied()
        .collect();
    for key in stale {
        let rec = st.active_denms.remove(&key).unwrap();
        outbox.push(make(
            st,
            codes::denm_type::TERMINATE,
            key,
            rec.detection_time,
            rec.last_emitted_distance,
            5,
        ));
    }
}

/// On entering the blocked state, raise the open notification for the
/// blocking hazard to highest quality; if the stop came from an observation
/// band obstruction with no open notification yet, open one.
fn escalate_block(
    st: &mut AgentState,
    current_alerts: &BTreeMap<(u8, u8), f64>,
    contacts: &[PerceivedObject],
    outbox: &mut Vec<Message>,
    now: u64,
    params: &ProtocolParams,
    sensor: &SensorConfig,
) {
    let key;
    let distance;
    if let Some((&k, &d)) = current_alerts.iter().next() {
        key = k;
        distance = d;
    } else {
        key = (
            codes::cause::COLLISION_RISK,
            codes::collision_sub_cause::LONGITUDINAL,
        );
        distance = contacts
            .iter()
            .find(|o| o.bearing_deg.abs() < sensor.longitudinal_cone_deg)
            .map(|o| o.distance)
            .unwrap_or(0.0);
    }
    let (message_type, detection_time) = match st.active_denms.get(&key) {
        Some(rec) => (codes::denm_type::UPDATE, rec.detection_time),
        None => (codes::denm_type::TRIGGER, gen_time_ms(now, params.dt)),
    };
    st.active_denms.insert(
        key,
        DenmRecord {
            detection_time,
            last_emitted_distance: distance,
        },
    );
    outbox.push(Message::Denm(DenmMessage {
        header: ItsPduHeader::new(codes::message_id::DENM, st.station_id),
        message_type,
        station_type: codes::station_type::IAV,
        management: ManagementContainer {
            detection_time,
            distance,
            validity_duration: params.denm_validity,
        },
        situation: SituationContainer {
            cause_code: key.0,
            sub_cause_code: key.1,
            information_quality: codes::information_quality::HIGHEST,
        },
    }));
}

fn send_mcm(
    st: &mut AgentState,
    intersection: u8,
    center: Vec2,
    core_radius: f64,
    outbox: &mut Vec<Message>,
    now: u64,
    params: &ProtocolParams,
) {
    outbox.push(Message::Mcm(McmMessage {
        header: ItsPduHeader::new(codes::message_id::MCM, st.station_id),
        generation_time: gen_time_u16(now, params.dt),
        station_type: codes::station_type::IAV,
        position: [st.position.x, st.position.y],
        maneuver: ManeuverContainer {
            id_intersection: intersection,
            direction: planned_direction_at(st, center, core_radius),
        },
    }));
    st.phase = Phase::Requesting(intersection);
    st.mcm_step = Some(now);
    st.refusals.clear();
    st.entered_core = false;
}

fn run_handshake(
    st: &mut AgentState,
    plan: &TrafficPlan,
    contacts: &[PerceivedObject],
    outbox: &mut Vec<Message>,
    now: u64,
    params: &ProtocolParams,
) {
    match st.phase {
        Phase::Requesting(i) => {
            let inter = match plan.intersection(i) {
                Ok(inter) => *inter,
                Err(_) => {
                    st.phase = Phase::Cruising;
                    return;
                }
            };
            if !st.refusals.is_empty() {
                // outvoted or the crossing is held: park at the rim and retry
                st.phase = Phase::Waiting(i);
                st.refusals.clear();
                return;
            }
            let answered = st
                .mcm_step
                .is_some_and(|sent| now >= sent + params.ack_round_trip);
            if !answered {
                return;
            }
            let rivals_beaten = st
                .rival_requests
                .iter()
                .filter(|(_, req)| req.intersection == i)
                .all(|(&station, _)| beats(st.claim(), st.claim_of(station)));
            let core_clear = st
                .known_peers
                .values()
                .all(|peer| peer.position.distance(inter.center) > inter.core_radius);
            if rivals_beaten && core_clear {
                st.phase = Phase::Crossing(i);
                st.entered_core = false;
                st.refusals.clear();
            } else {
                // a lost round ends here; lingering would let the next
                // evaluation run on rival claims that age out while the
                // winner is still on its way into the core
                st.phase = Phase::Waiting(i);
            }
        }
        Phase::Waiting(i) => {
            if plan.intersection(i).is_err() {
                st.phase = Phase::Cruising;
                return;
            }
            let retry = st
                .mcm_step
                .is_none_or(|sent| now.saturating_sub(sent) >= params.ack_timeout);
            if retry {
                let inter = *plan.intersection(i).unwrap();
                send_mcm(st, i, inter.center, inter.core_radius, outbox, now, params);
            }
        }
        Phase::Crossing(i) => {
            let zone = zone_of(plan, i, st.position).unwrap_or(Zone::Outside);
            if zone == Zone::Core {
                st.entered_core = true;
            } else if st.entered_core {
                // crossed and out the far side: release the grant
                st.phase = Phase::Cruising;
                st.entered_core = false;
                st.mcm_step = None;
            } else if zone == Zone::Outside {
                // granted but the path never reached the core; drop the claim
                st.phase = Phase::Cruising;
                st.mcm_step = None;
            }
        }
        Phase::Cruising | Phase::Following | Phase::Avoiding => {
            let hv = heading_vec(st.heading_deg);
            // nearest intersection whose approach ring we are in, heading in
            let mut target: Option<(u8, Vec2, f64, f64)> = None;
            for inter in &plan.intersections {
                let d = st.position.distance(inter.center);
                if d > inter.approach_radius {
                    continue;
                }
                if inter.center.sub(st.position).dot(hv) <= 0.0 {
                    continue;
                }
                if target.is_none_or(|(_, _, _, best)| d < best) {
                    target = Some((inter.id, inter.center, inter.core_radius, d));
                }
            }
            if let Some((id, center, core_radius, my_distance)) = target {
                // queue holdback: if another vehicle is ahead in our corridor
                // and closer to the crossing, let it negotiate first. Radar
                // only reaches a few meters, so the beacon table covers the
                // rest of the queue; requesting past the head inverts grant
                // order against queue order and wedges the crossing.
                let in_corridor_ahead = |pos: Vec2| {
                    let rel = pos.sub(st.position);
                    let ahead = rel.dot(hv) > 0.0;
                    let lateral = hv.cross(rel).abs();
                    ahead && lateral <= 1.0 && pos.distance(center) < my_distance
                };
                let queued_ahead = contacts.iter().any(|o| {
                    o.object_class == codes::object_class::IAV
                        && in_corridor_ahead(absolute_position_of(st, o))
                }) || st.known_peers.values().any(|peer| {
                    peer.station_type == codes::station_type::IAV
                        && in_corridor_ahead(peer.position)
                });
                if !queued_ahead {
                    send_mcm(st, id, center, core_radius, outbox, now, params);
                }
            }
        }
        Phase::Blocked => {}
    }
}
