//! Discrete-time simulation engine. Each step: scripted obstacles arrive and
//! leave, the bus delivers messages that fell due, every vehicle perceives the
//! same frozen snapshot and runs one control step, outgoing messages are
//! queued, motions are integrated, scripted walkers advance, and two oracles
//! audit the result (body overlap, simultaneous crossing grants).
//!
//! Determinism is load-bearing: equal scenario and seed must reproduce the
//! trace byte for byte, and the order agents are stepped in must not matter.
//! All iteration runs over ordered maps, randomness comes from two dedicated
//! counter-mode streams (bus loss, obstacle placement), and each step's events
//! are sorted by (entity, kind) before they are appended to the trace.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agent::{step_agent, AgentState, Mission, Motion, Phase, TaskClaim};
use crate::geometry::{heading_vec, Vec2};
use crate::perception::{scan, SensorConfig, SnapshotEntity, WorldSnapshot};
use crate::plan::TrafficPlan;
use crate::scenario::{BusConfig, ObstacleKind, Placement, Scenario, VehicleSetup};
use crate::trace::{EntityId, EventData, MessageSummary, Trace, TraceEvent};
use crate::wire::{codes, Message};
use crate::agent::ProtocolParams;

/// Body radius used for scripted walkers, m.
pub const PEDESTRIAN_RADIUS: f64 = 0.3;

/// Minimum clear gap demanded when placing a random obstacle, m.
const PLACEMENT_GAP: f64 = 0.3;

/// Attempts before random placement gives up.
const PLACEMENT_TRIES: u32 = 200;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EngineError {
    #[error("obstacle {id} at ({x}, {y}) is outside every lane corridor")]
    OffLane { id: u32, x: f64, y: f64 },
    #[error("no clear spot found for randomly placed obstacle {0}")]
    NoClearPlacement(u32),
    #[error("more route vehicles than spawn points")]
    SpawnExhausted,
    #[error("route vehicle {0} has no route in the plan")]
    MissingRoute(u32),
}

/// Knobs that change how the engine runs without changing the outcome.
#[derive(Debug, Clone, Default)]
pub struct EngineOptions {
    /// Step agents in this station order instead of ascending. Stations not
    /// listed are stepped afterwards in ascending order. The recorded trace
    /// must not depend on this.
    pub agent_order: Option<Vec<u32>>,
}

/// Travel back and forth along a polyline at constant speed.
#[derive(Debug, Clone, PartialEq)]
struct PathMotion {
    points: Vec<Vec2>,
    speed: f64,
    arc: f64,
    dir: f64,
}

impl PathMotion {
    fn new(points: Vec<Vec2>, speed: f64) -> Self {
        PathMotion {
            points,
            speed,
            arc: 0.0,
            dir: 1.0,
        }
    }

    fn total(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].distance(w[1]))
            .sum()
    }

    fn advance(&mut self, dt: f64) {
        let total = self.total();
        if total <= 0.0 {
            return;
        }
        self.arc += self.speed * dt * self.dir;
        // reflect at both ends
        loop {
            if self.arc > total {
                self.arc = 2.0 * total - self.arc;
                self.dir = -self.dir;
            } else if self.arc < 0.0 {
                self.arc = -self.arc;
                self.dir = -self.dir;
            } else {
                break;
            }
        }
    }

    fn position(&self) -> Vec2 {
        let mut remaining = self.arc;
        for w in self.points.windows(2) {
            let len = w[0].distance(w[1]);
            if remaining <= len || len <= 0.0 {
                if len <= 0.0 {
                    continue;
                }
                return w[0].add(w[1].sub(w[0]).scale(remaining / len));
            }
            remaining -= len;
        }
        *self.points.last().unwrap_or(&Vec2::ZERO)
    }

    fn velocity(&self) -> Vec2 {
        let mut remaining = self.arc;
        for w in self.points.windows(2) {
            let len = w[0].distance(w[1]);
            if len <= 0.0 {
                continue;
            }
            if remaining <= len {
                return w[1].sub(w[0]).scale(1.0 / len).scale(self.speed * self.dir);
            }
            remaining -= len;
        }
        Vec2::ZERO
    }
}

#[derive(Debug, Clone)]
struct ObstacleBody {
    position: Vec2,
    radius: f64,
    motion: Option<PathMotion>,
}

#[derive(Debug, Clone)]
struct PedestrianBody {
    position: Vec2,
    radius: f64,
    motion: PathMotion,
}

#[derive(Debug, Clone)]
struct VehicleSlot {
    agent: AgentState,
    motion: Motion,
}

#[derive(Debug, Clone)]
struct PendingObstacle {
    id: u32,
    step: u64,
    placement: Option<Placement>,
    radius: f64,
    kind: ObstacleKind,
    path: Vec<Vec2>,
    speed: f64,
}

#[derive(Debug, Clone)]
struct QueuedMessage {
    send_step: u64,
    sender: u32,
    outbox_index: u32,
    message: Message,
}

/// Everything a finished run hands back.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Trace,
    pub steps: u64,
    /// Distinct overlap events between a vehicle and another body.
    pub collisions: u64,
    /// Steps-with-extra-holders summed over every intersection.
    pub mutex_violations: u64,
    pub vehicles: BTreeMap<u32, AgentState>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub step: u64,
    pub trace: Trace,
    pub collisions: u64,
    pub mutex_violations: u64,
    plan: TrafficPlan,
    params: ProtocolParams,
    sensor: SensorConfig,
    bus: BusConfig,
    steps: u64,
    options: EngineOptions,
    vehicles: BTreeMap<u32, VehicleSlot>,
    obstacles: BTreeMap<u32, ObstacleBody>,
    pedestrians: BTreeMap<u32, PedestrianBody>,
    pending: Vec<PendingObstacle>,
    removals: Vec<(u64, u32)>,
    queue: BTreeMap<u64, Vec<QueuedMessage>>,
    /// Vehicle pairs (and vehicle-body pairs) currently overlapping, so a
    /// lasting overlap is one event, not one per step.
    contacts: BTreeSet<(EntityId, EntityId)>,
    rng_bus: ChaCha8Rng,
    rng_place: ChaCha8Rng,
}

impl World {
    pub fn new(scenario: &Scenario, options: EngineOptions) -> Result<World, EngineError> {
        let plan = scenario.plan.clone();
        let params = scenario.params;
        let mut spawn_iter = plan.spawn_points.clone().into_iter();

        // fleet-wide precedence table, shared by every station
        let mut tasks: BTreeMap<u32, TaskClaim> = BTreeMap::new();
        for v in &scenario.vehicles {
            tasks.insert(
                v.station_id,
                TaskClaim {
                    priority: v.task_priority,
                    urgency: v.task_urgency,
                },
            );
        }

        let mut vehicles = BTreeMap::new();
        for setup in &scenario.vehicles {
            let slot = build_vehicle(setup, &plan, &tasks, &mut spawn_iter)?;
            vehicles.insert(setup.station_id, slot);
        }

        let mut pending = Vec::new();
        let mut removals = Vec::new();
        for o in &scenario.obstacles {
            if o.kind == ObstacleKind::Static {
                if let Some(Placement::At(p)) = o.placement {
                    if !plan.on_lanes(p) {
                        return Err(EngineError::OffLane {
                            id: o.id,
                            x: p.x,
                            y: p.y,
                        });
                    }
                }
            }
            pending.push(PendingObstacle {
                id: o.id,
                step: o.step,
                placement: o.placement,
                radius: o.radius,
                kind: o.kind,
                path: o.path.clone(),
                speed: o.speed,
            });
            if let Some(at) = o.remove_step {
                removals.push((at, o.id));
            }
        }
        pending.sort_by_key(|p| (p.step, p.id));
        removals.sort();

        let mut pedestrians = BTreeMap::new();
        for p in &scenario.pedestrians {
            let motion = PathMotion::new(p.path.clone(), p.speed);
            pedestrians.insert(
                p.id,
                PedestrianBody {
                    position: motion.position(),
                    radius: PEDESTRIAN_RADIUS,
                    motion,
                },
            );
        }

        let mut rng_bus = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng_bus.set_stream(1);
        let mut rng_place = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng_place.set_stream(2);

        Ok(World {
            step: 0,
            trace: Trace::default(),
            collisions: 0,
            mutex_violations: 0,
            plan,
            params,
            sensor: scenario.sensor,
            bus: scenario.bus,
            steps: scenario.steps,
            options,
            vehicles,
            obstacles: BTreeMap::new(),
            pedestrians,
            pending,
            removals,
            queue: BTreeMap::new(),
            contacts: BTreeSet::new(),
            rng_bus,
            rng_place,
        })
    }

    pub fn vehicle(&self, station_id: u32) -> Option<&AgentState> {
        self.vehicles.get(&station_id).map(|s| &s.agent)
    }

    /// Run the scenario's full schedule and hand back the records.
    pub fn run(mut self) -> Result<RunResult, EngineError> {
        for _ in 0..self.steps {
            self.step_once()?;
        }
        Ok(RunResult {
            trace: self.trace,
            steps: self.steps,
            collisions: self.collisions,
            mutex_violations: self.mutex_violations,
            vehicles: self
                .vehicles
                .into_iter()
                .map(|(id, slot)| (id, slot.agent))
                .collect(),
        })
    }

    pub fn step_once(&mut self) -> Result<(), EngineError> {
        let now = self.step;
        let mut buf: Vec<TraceEvent> = Vec::new();

        self.admit_obstacles(now, &mut buf)?;
        let inboxes = self.deliver(now, &mut buf);
        let snapshot = self.snapshot();

        // one control step per station, all reading the same snapshot
        let order = self.stepping_order();
        let mut phase_changes: Vec<(u32, Phase)> = Vec::new();
        for id in order {
            let slot = self.vehicles.get(&id).expect("ordered id exists");
            let contacts = scan(&snapshot, EntityId::Vehicle(id), &self.sensor);
            let empty = Vec::new();
            let inbox = inboxes.get(&id).unwrap_or(&empty);
            let out = step_agent(
                &slot.agent,
                inbox,
                &contacts,
                &self.plan,
                now,
                &self.params,
                &self.sensor,
            );
            if out.state.phase != slot.agent.phase {
                phase_changes.push((id, out.state.phase));
            }
            for (idx, message) in out.outbox.iter().enumerate() {
                buf.push(TraceEvent {
                    step: now,
                    entity: EntityId::Vehicle(id),
                    data: EventData::Sent(MessageSummary::of(message)),
                });
                let due = now + self.bus.latency_steps.max(1);
                self.queue.entry(due).or_default().push(QueuedMessage {
                    send_step: now,
                    sender: id,
                    outbox_index: idx as u32,
                    message: message.clone(),
                });
            }
            let slot = self.vehicles.get_mut(&id).expect("ordered id exists");
            slot.agent = out.state;
            slot.motion = out.motion;
        }
        for (id, phase) in phase_changes {
            buf.push(TraceEvent {
                step: now,
                entity: EntityId::Vehicle(id),
                data: EventData::PhaseChanged { phase },
            });
        }

        for (&id, slot) in self.vehicles.iter_mut() {
            apply_motion(id, slot, &self.params, now, &mut buf);
        }

        for body in self.obstacles.values_mut() {
            if let Some(motion) = &mut body.motion {
                motion.advance(self.params.dt);
                body.position = motion.position();
            }
        }
        for body in self.pedestrians.values_mut() {
            body.motion.advance(self.params.dt);
            body.position = body.motion.position();
        }

        self.audit_overlaps(now, &mut buf);
        self.audit_crossings();

        buf.sort_by_key(|ev| (ev.entity, ev.data.kind_index()));
        self.trace.events.extend(buf);
        self.step = now + 1;
        Ok(())
    }

    fn stepping_order(&self) -> Vec<u32> {
        let mut order: Vec<u32> = Vec::new();
        if let Some(requested) = &self.options.agent_order {
            for &id in requested {
                if self.vehicles.contains_key(&id) && !order.contains(&id) {
                    order.push(id);
                }
            }
        }
        for &id in self.vehicles.keys() {
            if !order.contains(&id) {
                order.push(id);
            }
        }
        order
    }

    fn admit_obstacles(&mut self, now: u64, buf: &mut Vec<TraceEvent>) -> Result<(), EngineError> {
        while let Some(next) = self.pending.first() {
            if next.step > now {
                break;
            }
            let spec = self.pending.remove(0);
            let body = self.materialize(&spec)?;
            buf.push(TraceEvent {
                step: now,
                entity: EntityId::Obstacle(spec.id),
                data: EventData::ObstacleInjected {
                    x: body.position.x,
                    y: body.position.y,
                    radius: body.radius,
                },
            });
            self.obstacles.insert(spec.id, body);
        }
        self.removals.retain(|&(at, id)| {
            if at <= now {
                self.obstacles.remove(&id);
                false
            } else {
                true
            }
        });
        Ok(())
    }

    fn materialize(&mut self, spec: &PendingObstacle) -> Result<ObstacleBody, EngineError> {
        if spec.kind == ObstacleKind::Dynamic {
            let motion = PathMotion::new(spec.path.clone(), spec.speed);
            return Ok(ObstacleBody {
                position: motion.position(),
                radius: spec.radius,
                motion: Some(motion),
            });
        }
        let position = match spec.placement {
            Some(Placement::At(p)) => p,
            Some(Placement::Random) => self.draw_position(spec)?,
            None => return Err(EngineError::NoClearPlacement(spec.id)),
        };
        Ok(ObstacleBody {
            position,
            radius: spec.radius,
            motion: None,
        })
    }

    /// Uniform over the lane network, rejecting spots that would overlap a
    /// body already on the floor.
    fn draw_position(&mut self, spec: &PendingObstacle) -> Result<Vec2, EngineError> {
        let total = self.plan.total_lane_length();
        for _ in 0..PLACEMENT_TRIES {
            let arc = self.rng_place.gen::<f64>() * total;
            let Some(candidate) = self.plan.point_at_lane_arc(arc) else {
                break;
            };
            if self.is_clear(candidate, spec.radius) {
                return Ok(candidate);
            }
        }
        Err(EngineError::NoClearPlacement(spec.id))
    }

    fn is_clear(&self, point: Vec2, radius: f64) -> bool {
        let clear = |position: Vec2, body_radius: f64| {
            point.distance(position) >= radius + body_radius + PLACEMENT_GAP
        };
        self.vehicles
            .values()
            .all(|s| clear(s.agent.position, self.params.vehicle_radius))
            && self
                .obstacles
                .values()
                .all(|o| clear(o.position, o.radius))
            && self
                .pedestrians
                .values()
                .all(|p| clear(p.position, p.radius))
    }

    /// Hand every station the messages that fell due this step. Loss is drawn
    /// per (message, receiver) in a fixed order so the draw sequence does not
    /// depend on how agents were stepped.
    fn deliver(&mut self, now: u64, buf: &mut Vec<TraceEvent>) -> BTreeMap<u32, Vec<Message>> {
        let mut inboxes: BTreeMap<u32, Vec<Message>> = BTreeMap::new();
        let Some(mut due) = self.queue.remove(&now) else {
            return inboxes;
        };
        due.sort_by_key(|q| (q.send_step, q.sender, q.message.message_id(), q.outbox_index));
        let receivers: Vec<u32> = self.vehicles.keys().copied().collect();
        for queued in &due {
            for &receiver in &receivers {
                if receiver == queued.sender {
                    continue;
                }
                if self.bus.loss_probability > 0.0
                    && self.rng_bus.gen::<f64>() < self.bus.loss_probability
                {
                    continue;
                }
                inboxes
                    .entry(receiver)
                    .or_default()
                    .push(queued.message.clone());
                buf.push(TraceEvent {
                    step: now,
                    entity: EntityId::Vehicle(receiver),
                    data: EventData::Delivered {
                        sender: queued.sender,
                        message_id: queued.message.message_id(),
                    },
                });
            }
        }
        inboxes
    }

    fn snapshot(&self) -> WorldSnapshot {
        let mut entities = Vec::new();
        for (&id, slot) in &self.vehicles {
            let a = &slot.agent;
            entities.push(SnapshotEntity {
                id: EntityId::Vehicle(id),
                object_class: codes::object_class::IAV,
                position: a.position,
                velocity: heading_vec(a.heading_deg).scale(a.speed),
                heading_deg: a.heading_deg,
                radius: self.params.vehicle_radius,
            });
        }
        for (&id, body) in &self.obstacles {
            let velocity = body
                .motion
                .as_ref()
                .map(|m| m.velocity())
                .unwrap_or(Vec2::ZERO);
            entities.push(SnapshotEntity {
                id: EntityId::Obstacle(id),
                object_class: codes::object_class::OBJECT,
                position: body.position,
                velocity,
                heading_deg: velocity.angle_deg(),
                radius: body.radius,
            });
        }
        for (&id, body) in &self.pedestrians {
            let velocity = body.motion.velocity();
            entities.push(SnapshotEntity {
                id: EntityId::Pedestrian(id),
                object_class: codes::object_class::PEDESTRIAN,
                position: body.position,
                velocity,
                heading_deg: velocity.angle_deg(),
                radius: body.radius,
            });
        }
        WorldSnapshot { entities }
    }

    /// Flag every fresh body overlap involving a vehicle. Touching exactly at
    /// the rim is not an overlap.
    fn audit_overlaps(&mut self, now: u64, buf: &mut Vec<TraceEvent>) {
        let mut bodies: Vec<(EntityId, Vec2, f64)> = Vec::new();
        for (&id, slot) in &self.vehicles {
            bodies.push((
                EntityId::Vehicle(id),
                slot.agent.position,
                self.params.vehicle_radius,
            ));
        }
        for (&id, body) in &self.obstacles {
            bodies.push((EntityId::Obstacle(id), body.position, body.radius));
        }
        for (&id, body) in &self.pedestrians {
            bodies.push((EntityId::Pedestrian(id), body.position, body.radius));
        }
        for i in 0..bodies.len() {
            for j in (i + 1)..bodies.len() {
                let (a, pa, ra) = bodies[i];
                let (b, pb, rb) = bodies[j];
                if a.station_id().is_none() && b.station_id().is_none() {
                    continue;
                }
                let key = (a.min(b), a.max(b));
                let distance = pa.distance(pb);
                if distance < ra + rb {
                    if self.contacts.insert(key) {
                        self.collisions += 1;
                        buf.push(TraceEvent {
                            step: now,
                            entity: key.0,
                            data: EventData::CollisionDetected {
                                other: key.1,
                                distance,
                            },
                        });
                    }
                } else {
                    self.contacts.remove(&key);
                }
            }
        }
    }

    /// Count extra simultaneous grant holders, per intersection, per step.
    fn audit_crossings(&mut self) {
        let mut holders: BTreeMap<u8, u64> = BTreeMap::new();
        for slot in self.vehicles.values() {
            if let Phase::Crossing(i) = slot.agent.phase {
                *holders.entry(i).or_default() += 1;
            }
        }
        for (_, n) in holders {
            if n > 1 {
                self.mutex_violations += n - 1;
            }
        }
    }
}

fn build_vehicle(
    setup: &VehicleSetup,
    plan: &TrafficPlan,
    tasks: &BTreeMap<u32, TaskClaim>,
    spawn_iter: &mut impl Iterator<Item = crate::plan::WaypointId>,
) -> Result<VehicleSlot, EngineError> {
    let (spawn, goals, cyclic) = match setup.route {
        Some(role) => {
            let route = plan
                .route(role)
                .ok_or(EngineError::MissingRoute(setup.station_id))?;
            let goals: Vec<Vec2> = route
                .waypoints
                .iter()
                .filter_map(|&id| plan.position_of(id).ok())
                .collect();
            let spawn = match setup.spawn {
                Some(p) => p,
                None => {
                    let id = spawn_iter.next().ok_or(EngineError::SpawnExhausted)?;
                    plan.position_of(id).map_err(|_| EngineError::SpawnExhausted)?
                }
            };
            (spawn, goals, setup.cyclic.unwrap_or(true))
        }
        None => (
            setup.spawn.expect("checked at parse"),
            setup.goals.clone(),
            setup.cyclic.unwrap_or(false),
        ),
    };

    let mut agent = AgentState::new(setup.station_id, spawn, Mission::new(goals, cyclic));
    agent.task_priority = setup.task_priority;
    agent.task_urgency = setup.task_urgency;
    agent.cruise_speed = setup.cruise_speed;
    agent.peer_tasks = tasks.clone();
    if let Some(goal) = agent.mission.current_goal() {
        let leg = goal.sub(spawn);
        if leg.norm() > 1e-9 {
            agent.heading_deg = leg.angle_deg();
        }
    }
    Ok(VehicleSlot {
        agent,
        motion: Motion {
            speed: 0.0,
            target_lateral: 0.0,
        },
    })
}

/// Integrate one vehicle's commanded motion: spend the speed budget on
/// closing the lateral offset first (rate-limited), the rest along the leg.
fn apply_motion(
    id: u32,
    slot: &mut VehicleSlot,
    params: &ProtocolParams,
    now: u64,
    buf: &mut Vec<TraceEvent>,
) {
    let st = &mut slot.agent;
    let goal = st.mission.current_goal();
    if let Some(goal) = goal {
        let leg = goal.sub(st.segment_anchor);
        let leg_len = leg.norm();
        let along = if leg_len > 1e-12 {
            leg.scale(1.0 / leg_len)
        } else {
            heading_vec(st.heading_deg)
        };
        let budget = slot.motion.speed * params.dt;
        let current_lateral = along.cross(st.position.sub(st.segment_anchor));
        let slew = params.lateral_rate * params.dt;
        let dlat = (slot.motion.target_lateral - current_lateral)
            .clamp(-slew, slew)
            .clamp(-budget, budget);
        let forward = (budget * budget - dlat * dlat).max(0.0).sqrt();
        st.position = st
            .position
            .add(along.scale(forward))
            .add(along.left_normal().scale(dlat));
        st.heading_deg = along.angle_deg();
        st.speed = slot.motion.speed;

        let travelled = st.position.sub(st.segment_anchor).dot(along);
        if st.position.distance(goal) <= params.arrival_tolerance || travelled >= leg_len {
            let goal_index = st.mission.next_goal as u32;
            st.mission.arrive();
            st.segment_anchor = goal;
            buf.push(TraceEvent {
                step: now,
                entity: EntityId::Vehicle(id),
                data: EventData::GoalReached {
                    x: goal.x,
                    y: goal.y,
                    goal_index,
                    cycle: st.mission.cycles_completed,
                },
            });
        }
    } else {
        st.speed = 0.0;
    }
    buf.push(TraceEvent {
        step: now,
        entity: EntityId::Vehicle(id),
        data: EventData::Moved {
            x: st.position.x,
            y: st.position.y,
            heading: st.heading_deg,
            speed: st.speed,
        },
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{Intersection, Lane, Waypoint};
    use crate::scenario::ObstacleSetup;

    fn line_plan() -> TrafficPlan {
        TrafficPlan {
            waypoints: vec![
                Waypoint {
                    id: 1,
                    position: Vec2::new(0.0, 0.0),
                },
                Waypoint {
                    id: 2,
                    position: Vec2::new(40.0, 0.0),
                },
            ],
            lanes: vec![
                Lane {
                    from: 1,
                    to: 2,
                    width: 2.0,
                },
                Lane {
                    from: 2,
                    to: 1,
                    width: 2.0,
                },
            ],
            intersections: Vec::new(),
            spawn_points: Vec::new(),
            routes: Vec::new(),
        }
    }

    fn crossing_plan() -> TrafficPlan {
        TrafficPlan {
            waypoints: vec![
                Waypoint {
                    id: 1,
                    position: Vec2::new(-12.0, 0.0),
                },
                Waypoint {
                    id: 2,
                    position: Vec2::new(12.0, 0.0),
                },
                Waypoint {
                    id: 3,
                    position: Vec2::new(0.0, -12.0),
                },
                Waypoint {
                    id: 4,
                    position: Vec2::new(0.0, 12.0),
                },
            ],
            lanes: vec![
                Lane {
                    from: 1,
                    to: 2,
                    width: 2.0,
                },
                Lane {
                    from: 3,
                    to: 4,
                    width: 2.0,
                },
            ],
            intersections: vec![Intersection {
                id: 1,
                center: Vec2::ZERO,
                core_radius: 2.0,
                approach_radius: 6.0,
            }],
            spawn_points: Vec::new(),
            routes: Vec::new(),
        }
    }

    fn direct_vehicle(id: u32, spawn: Vec2, goals: Vec<Vec2>) -> VehicleSetup {
        VehicleSetup {
            station_id: id,
            route: None,
            spawn: Some(spawn),
            goals,
            cyclic: Some(false),
            task_priority: 0,
            task_urgency: 0,
            cruise_speed: 1.0,
        }
    }

    fn static_obstacle(id: u32, step: u64, position: Vec2) -> ObstacleSetup {
        ObstacleSetup {
            id,
            step,
            placement: Some(Placement::At(position)),
            radius: 0.25,
            kind: ObstacleKind::Static,
            remove_step: None,
            path: Vec::new(),
            speed: 0.0,
        }
    }

    fn delivered_steps(trace: &Trace) -> Vec<(u64, EntityId, u32)> {
        trace
            .events
            .iter()
            .filter_map(|ev| match ev.data {
                EventData::Delivered { sender, .. } => Some((ev.step, ev.entity, sender)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn broadcasts_reach_everyone_else_next_step() {
        let mut s = Scenario::new(line_plan());
        s.vehicles.push(direct_vehicle(
            1,
            Vec2::new(0.0, 0.0),
            vec![Vec2::new(1.0, 0.0)],
        ));
        s.vehicles.push(direct_vehicle(
            2,
            Vec2::new(30.0, 0.0),
            vec![Vec2::new(31.0, 0.0)],
        ));
        s.steps = 2;
        let result = World::new(&s, EngineOptions::default()).unwrap().run().unwrap();
        let delivered = delivered_steps(&result.trace);
        // both beacons from step 0 arrive at the other station at step 1
        assert_eq!(
            delivered,
            vec![
                (1, EntityId::Vehicle(1), 2),
                (1, EntityId::Vehicle(2), 1),
            ]
        );
    }

    #[test]
    fn latency_defers_delivery_and_loss_silences_it() {
        let mut s = Scenario::new(line_plan());
        s.vehicles.push(direct_vehicle(
            1,
            Vec2::new(0.0, 0.0),
            vec![Vec2::new(1.0, 0.0)],
        ));
        s.vehicles.push(direct_vehicle(
            2,
            Vec2::new(30.0, 0.0),
            vec![Vec2::new(31.0, 0.0)],
        ));
        s.steps = 4;
        s.bus.latency_steps = 2;
        let result = World::new(&s, EngineOptions::default()).unwrap().run().unwrap();
        assert!(delivered_steps(&result.trace)
            .iter()
            .all(|&(step, _, _)| step % 2 == 0 && step > 0));

        s.bus.loss_probability = 1.0;
        let result = World::new(&s, EngineOptions::default()).unwrap().run().unwrap();
        assert!(delivered_steps(&result.trace).is_empty());
    }

    #[test]
    fn a_ten_meter_leg_arrives_on_schedule() {
        let mut s = Scenario::new(line_plan());
        s.vehicles.push(direct_vehicle(
            1,
            Vec2::new(0.0, 0.0),
            vec![Vec2::new(10.0, 0.0)],
        ));
        s.params.arrival_tolerance = 0.05;
        s.steps = 120;
        let result = World::new(&s, EngineOptions::default()).unwrap().run().unwrap();
        let arrival = result
            .trace
            .events
            .iter()
            .find(|ev| matches!(ev.data, EventData::GoalReached { .. }))
            .expect("goal reached");
        // 10 m at 1 m/s and 0.1 s steps: the hundredth step lands on the goal
        assert_eq!(arrival.step, 99);
        let state = &result.vehicles[&1];
        assert!(state.mission.done);
        assert!(state.position.distance(Vec2::new(10.0, 0.0)) < 1e-9);
    }

    #[test]
    fn overlap_means_strictly_inside_the_rims() {
        let mut s = Scenario::new(line_plan());
        s.vehicles.push(direct_vehicle(
            1,
            Vec2::new(0.0, 0.0),
            vec![Vec2::new(0.0, 0.0)],
        ));
        s.vehicles.push(direct_vehicle(
            2,
            Vec2::new(10.0, 0.0),
            vec![Vec2::new(10.0, 0.0)],
        ));
        let mut world = World::new(&s, EngineOptions::default()).unwrap();
        // first step finishes both missions; a done body never moves again
        world.step_once().unwrap();
        // park the bodies exactly rim to rim: 0.2 + 0.2 apart
        world.vehicles.get_mut(&1).unwrap().agent.position = Vec2::ZERO;
        world.vehicles.get_mut(&2).unwrap().agent.position = Vec2::new(0.4, 0.0);
        world.step_once().unwrap();
        assert_eq!(world.collisions, 0);
        world.vehicles.get_mut(&2).unwrap().agent.position = Vec2::new(0.39, 0.0);
        world.step_once().unwrap();
        assert_eq!(world.collisions, 1);
    }

    #[test]
    fn a_lasting_overlap_is_one_event() {
        let mut s = Scenario::new(line_plan());
        // blind sensors: the bodies drive straight through each other
        s.sensor.observation_distance = 0.0;
        s.vehicles.push(direct_vehicle(
            1,
            Vec2::new(0.0, 0.0),
            vec![Vec2::new(10.0, 0.0)],
        ));
        s.vehicles.push(direct_vehicle(
            2,
            Vec2::new(10.0, 0.0),
            vec![Vec2::new(0.0, 0.0)],
        ));
        s.steps = 120;
        let result = World::new(&s, EngineOptions::default()).unwrap().run().unwrap();
        assert_eq!(result.collisions, 1);
        let events: Vec<_> = result
            .trace
            .events
            .iter()
            .filter(|ev| matches!(ev.data, EventData::CollisionDetected { .. }))
            .collect();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].entity, EntityId::Vehicle(1));
    }

    #[test]
    fn scripted_obstacles_come_and_go() {
        let mut s = Scenario::new(line_plan());
        let mut o = static_obstacle(1, 3, Vec2::new(5.0, 0.0));
        o.remove_step = Some(6);
        s.obstacles.push(o);
        let mut world = World::new(&s, EngineOptions::default()).unwrap();
        for _ in 0..3 {
            world.step_once().unwrap();
            assert!(world.obstacles.is_empty());
        }
        world.step_once().unwrap();
        assert!(world.obstacles.contains_key(&1));
        let injected = world
            .trace
            .events
            .iter()
            .find(|ev| matches!(ev.data, EventData::ObstacleInjected { .. }))
            .unwrap();
        assert_eq!(injected.step, 3);
        assert_eq!(injected.entity, EntityId::Obstacle(1));
        for _ in 4..=6 {
            world.step_once().unwrap();
        }
        assert!(world.obstacles.is_empty());
    }

    #[test]
    fn obstacles_must_land_on_the_lane_network() {
        let mut s = Scenario::new(line_plan());
        s.obstacles.push(static_obstacle(7, 0, Vec2::new(5.0, 7.0)));
        let err = World::new(&s, EngineOptions::default()).unwrap_err();
        assert_eq!(
            err,
            EngineError::OffLane {
                id: 7,
                x: 5.0,
                y: 7.0
            }
        );
    }

    #[test]
    fn random_placement_is_seeded_and_stays_on_the_lanes() {
        let mut s = Scenario::new(line_plan());
        let mut o = static_obstacle(1, 0, Vec2::ZERO);
        o.placement = Some(Placement::Random);
        s.obstacles.push(o);
        s.seed = 42;
        let mut first = World::new(&s, EngineOptions::default()).unwrap();
        first.step_once().unwrap();
        let mut again = World::new(&s, EngineOptions::default()).unwrap();
        again.step_once().unwrap();
        let p1 = first.obstacles[&1].position;
        let p2 = again.obstacles[&1].position;
        assert_eq!(p1, p2);
        assert!(first.plan.on_lanes(p1));

        s.seed = 43;
        let mut other = World::new(&s, EngineOptions::default()).unwrap();
        other.step_once().unwrap();
        assert_ne!(other.obstacles[&1].position, p1);
    }

    #[test]
    fn simultaneous_grant_holders_are_counted() {
        let mut s = Scenario::new(crossing_plan());
        s.vehicles.push(direct_vehicle(
            1,
            Vec2::new(-1.0, 0.0),
            vec![Vec2::new(-1.0, 0.0)],
        ));
        s.vehicles.push(direct_vehicle(
            2,
            Vec2::new(0.0, -1.0),
            vec![Vec2::new(0.0, -1.0)],
        ));
        let mut world = World::new(&s, EngineOptions::default()).unwrap();
        world.vehicles.get_mut(&1).unwrap().agent.phase = Phase::Crossing(1);
        world.vehicles.get_mut(&2).unwrap().agent.phase = Phase::Crossing(1);
        world.step_once().unwrap();
        assert_eq!(world.mutex_violations, 1);
    }

    #[test]
    fn stepping_order_does_not_change_the_story() {
        let mut s = Scenario::new(line_plan());
        // a close convoy so the stations genuinely interact
        s.vehicles.push(direct_vehicle(
            1,
            Vec2::new(4.0, 0.0),
            vec![Vec2::new(30.0, 0.0)],
        ));
        s.vehicles.push(direct_vehicle(
            2,
            Vec2::new(2.0, 0.0),
            vec![Vec2::new(30.0, 0.0)],
        ));
        s.vehicles.push(direct_vehicle(
            3,
            Vec2::new(0.0, 0.0),
            vec![Vec2::new(30.0, 0.0)],
        ));
        s.vehicles[0].cruise_speed = 0.6;
        s.steps = 150;
        let forward = World::new(&s, EngineOptions::default()).unwrap().run().unwrap();
        let reversed = World::new(
            &s,
            EngineOptions {
                agent_order: Some(vec![3, 2, 1]),
            },
        )
        .unwrap()
        .run()
        .unwrap();
        assert_eq!(forward.trace.serialize(), reversed.trace.serialize());
    }
}
