//! Scenario files: a line-oriented `key = value` format describing one run —
//! the floor plan, the fleet, scripted obstacles and pedestrians, sensor and
//! protocol tuning, the message bus, and the simulation schedule.
//!
//! Parsing is strict: unknown sections and keys are errors, as are malformed
//! values, so a typo fails loudly instead of silently running a different
//! experiment. `serialize` emits a canonical form; parsing it back yields an
//! equal scenario, and re-serializing that yields identical bytes.

use crate::agent::ProtocolParams;
use crate::geometry::Vec2;
use crate::perception::SensorConfig;
use crate::plan::{
    build_benchmark_plan, Intersection, Lane, Route, RouteRole, TrafficPlan, Waypoint, WaypointId,
};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusConfig {
    /// Chance each (message, receiver) delivery is dropped, 0..=1.
    pub loss_probability: f64,
    /// Extra delivery delay in steps; delivery always takes at least one.
    pub latency_steps: u64,
}

impl Default for BusConfig {
    fn default() -> Self {
        BusConfig {
            loss_probability: 0.0,
            latency_steps: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSetup {
    pub station_id: u32,
    /// Patrol one of the plan's routes...
    pub route: Option<RouteRole>,
    /// ...or drive an explicit goal list from an explicit spawn.
    pub spawn: Option<Vec2>,
    pub goals: Vec<Vec2>,
    pub cyclic: Option<bool>,
    pub task_priority: u8,
    pub task_urgency: u8,
    pub cruise_speed: f64,
}

impl VehicleSetup {
    fn new(station_id: u32) -> Self {
        VehicleSetup {
            station_id,
            route: None,
            spawn: None,
            goals: Vec::new(),
            cyclic: None,
            task_priority: 0,
            task_urgency: 0,
            cruise_speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    At(Vec2),
    /// Uniform over the lane network, drawn from the injection RNG stream.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSetup {
    pub id: u32,
    /// Step the obstacle appears.
    pub step: u64,
    pub placement: Option<Placement>,
    pub radius: f64,
    pub kind: ObstacleKind,
    pub remove_step: Option<u64>,
    /// Dynamic obstacles ping-pong along this polyline.
    pub path: Vec<Vec2>,
    pub speed: f64,
}

impl ObstacleSetup {
    fn new(id: u32) -> Self {
        ObstacleSetup {
            id,
            step: 0,
            placement: None,
            radius: 0.25,
            kind: ObstacleKind::Static,
            remove_step: None,
            path: Vec::new(),
            speed: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianSetup {
    pub id: u32,
    pub path: Vec<Vec2>,
    pub speed: f64,
}

impl PedestrianSetup {
    fn new(id: u32) -> Self {
        PedestrianSetup {
            id,
            path: Vec::new(),
            speed: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Set when the plan came from a named built-in rather than inline parts.
    pub builtin_plan: Option<String>,
    pub plan: TrafficPlan,
    pub vehicles: Vec<VehicleSetup>,
    pub obstacles: Vec<ObstacleSetup>,
    pub pedestrians: Vec<PedestrianSetup>,
    pub sensor: SensorConfig,
    pub params: ProtocolParams,
    pub bus: BusConfig,
    pub steps: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn new(plan: TrafficPlan) -> Self {
        Scenario {
            builtin_plan: None,
            plan,
            vehicles: Vec::new(),
            obstacles: Vec::new(),
            pedestrians: Vec::new(),
            sensor: SensorConfig::default(),
            params: ProtocolParams::default(),
            bus: BusConfig::default(),
            steps: 1000,
            seed: 0,
        }
    }

    pub fn benchmark() -> Self {
        let mut s = Scenario::new(build_benchmark_plan());
        s.builtin_plan = Some("benchmark".to_string());
        s
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("syntax error at line {line}")]
    SyntaxError { line: usize },
    #[error("unknown section '{section}' at line {line}")]
    UnknownSection { line: usize, section: String },
    #[error("unknown key '{key}' at line {line}")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for '{key}' at line {line}: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("duplicate station id {0}")]
    DuplicateStationId(u32),
    #[error("duplicate {kind} id {id}")]
    DuplicateEntity { kind: &'static str, id: u32 },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid setup: {0}")]
    InvalidSetup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Plan,
    Vehicle(usize),
    Obstacle(usize),
    Pedestrian(usize),
    Sensor,
    Protocol,
    Bus,
    Sim,
}

struct PlanDraft {
    builtin: Option<String>,
    waypoints: Vec<Waypoint>,
    lanes: Vec<Lane>,
    intersections: Vec<Intersection>,
    spawn_points: Vec<WaypointId>,
    seen: bool,
}

pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
    let mut draft = PlanDraft {
        builtin: None,
        waypoints: Vec::new(),
        lanes: Vec::new(),
        intersections: Vec::new(),
        spawn_points: Vec::new(),
        seen: false,
    };
    let mut vehicles: Vec<VehicleSetup> = Vec::new();
    let mut obstacles: Vec<ObstacleSetup> = Vec::new();
    let mut pedestrians: Vec<PedestrianSetup> = Vec::new();
    let mut sensor = SensorConfig::default();
    let mut params = ProtocolParams::default();
    let mut bus = BusConfig::default();
    let mut steps: u64 = 1000;
    let mut seed: u64 = 0;
    let mut section = Section::None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }

        if let Some(header) = line.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or(ScenarioError::SyntaxError { line: line_no })?
                .trim();
            section = parse_section_header(header, line_no, &mut vehicles, &mut obstacles, &mut pedestrians)?;
            if section == Section::Plan {
                draft.seen = true;
            }
            continue;
        }

        let (key, value) = line
            .split_once('=')
            .ok_or(ScenarioError::SyntaxError { line: line_no })?;
        let key = key.trim();
        let value = value.trim();
        let ctx = |reason: String| ScenarioError::InvalidValue {
            line: line_no,
            key: key.to_string(),
            reason,
        };

        match section {
            Section::None => return Err(ScenarioError::SyntaxError { line: line_no }),
            Section::Plan => match key {
                "builtin" => {
                    if value != "benchmark" {
                        return Err(ctx(format!("unknown builtin plan '{value}'")));
                    }
                    draft.builtin = Some(value.to_string());
                }
                "waypoint" => {
                    let f = parse_floats(value).map_err(&ctx)?;
                    if f.len() != 3 {
                        return Err(ctx("expected id, x, y".into()));
                    }
                    draft.waypoints.push(Waypoint {
                        id: f[0] as WaypointId,
                        position: Vec2::new(f[1], f[2]),
                    });
                }
                "lane" => {
                    let f = parse_floats(value).map_err(&ctx)?;
                    if f.len() != 3 {
                        return Err(ctx("expected from, to, width".into()));
                    }
                    draft.lanes.push(Lane {
                        from: f[0] as WaypointId,
                        to: f[1] as WaypointId,
                        width: f[2],
                    });
                }
                "intersection" => {
                    let f = parse_floats(value).map_err(&ctx)?;
                    if f.len() != 5 {
                        return Err(ctx("expected id, cx, cy, core, approach".into()));
                    }
                    draft.intersections.push(Intersection {
                        id: f[0] as u8,
                        center: Vec2::new(f[1], f[2]),
                        core_radius: f[3],
                        approach_radius: f[4],
                    });
                }
                "spawn_points" => {
                    let f = parse_floats(value).map_err(&ctx)?;
                    draft.spawn_points.extend(f.iter().map(|&v| v as WaypointId));
                }
                _ => {
                    return Err(ScenarioError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            },
            Section::Vehicle(i) => {
                let v = &mut vehicles[i];
                match key {
                    "route" => {
                        v.route = Some(match value {
                            "red" => RouteRole::Red,
                            "blue" => RouteRole::Blue,
                            "yellow" => RouteRole::Yellow,
                            other => return Err(ctx(format!("unknown route '{other}'"))),
                        })
                    }
                    "spawn" => v.spawn = Some(parse_vec2(value).map_err(&ctx)?),
                    "goals" => v.goals = parse_points(value).map_err(&ctx)?,
                    "cyclic" => v.cyclic = Some(parse_switch(value).map_err(&ctx)?),
                    "task_priority" => v.task_priority = parse_int(value).map_err(&ctx)? as u8,
                    "task_urgency" => v.task_urgency = parse_int(value).map_err(&ctx)? as u8,
                    "cruise_speed" => {
                        v.cruise_speed = parse_float(value).map_err(&ctx)?;
                        if v.cruise_speed <= 0.0 {
                            return Err(ctx("cruise speed must be positive".into()));
                        }
                    }
                    _ => {
                        return Err(ScenarioError::UnknownKey {
                            line: line_no,
                            key: key.to_string(),
                        })
                    }
                }
            }
            Section::Obstacle(i) => {
                let o = &mut obstacles[i];
                match key {
                    "step" => o.step = parse_int(value).map_err(&ctx)?,
                    "position" => {
                        o.placement = Some(if value == "random" {
                            Placement::Random
                        } else {
                            Placement::At(parse_vec2(value).map_err(&ctx)?)
                        })
                    }
                    "radius" => {
                        o.radius = parse_float(value).map_err(&ctx)?;
                        if o.radius <= 0.0 {
                            return Err(ctx("radius must be positive".into()));
                        }
                    }
                    "kind" => {
                        o.kind = match value {
                            "static" => ObstacleKind::Static,
                            "dynamic" => ObstacleKind::Dynamic,
                            other => return Err(ctx(format!("unknown kind '{other}'"))),
                        }
                    }
                    "remove_step" => o.remove_step = Some(parse_int(value).map_err(&ctx)?),
                    "path" => o.path = parse_points(value).map_err(&ctx)?,
                    "speed" => o.speed = parse_float(value).map_err(&ctx)?,
                    _ => {
                        return Err(ScenarioError::UnknownKey {
                            line: line_no,
                            key: key.to_string(),
                        })
                    }
                }
            }
            Section::Pedestrian(i) => {
                let p = &mut pedestrians[i];
                match key {
                    "path" => p.path = parse_points(value).map_err(&ctx)?,
                    "speed" => p.speed = parse_float(value).map_err(&ctx)?,
                    _ => {
                        return Err(ScenarioError::UnknownKey {
                            line: line_no,
                            key: key.to_string(),
                        })
                    }
                }
            }
            Section::Sensor => match key {
                "observation_distance" => {
                    sensor.observation_distance = parse_float(value).map_err(&ctx)?
                }
                "safety_distance" => sensor.safety_distance = parse_float(value).map_err(&ctx)?,
                "field_of_view" => sensor.field_of_view_deg = parse_float(value).map_err(&ctx)?,
                "longitudinal_cone" => {
                    sensor.longitudinal_cone_deg = parse_float(value).map_err(&ctx)?
                }
                _ => {
                    return Err(ScenarioError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            },
            Section::Protocol => match key {
                "cam_period" => params.cam_period = parse_int(value).map_err(&ctx)?,
                "cpm_period" => params.cpm_period = parse_int(value).map_err(&ctx)?,
                "cpm_expiry" => params.cpm_expiry = parse_int(value).map_err(&ctx)?,
                "ack_timeout" => params.ack_timeout = parse_int(value).map_err(&ctx)?,
                "ack_round_trip" => params.ack_round_trip = parse_int(value).map_err(&ctx)?,
                "ack_scope_factor" => params.ack_scope_factor = parse_float(value).map_err(&ctx)?,
                "block_timeout" => params.block_timeout = parse_int(value).map_err(&ctx)?,
                "update_epsilon" => params.update_epsilon = parse_float(value).map_err(&ctx)?,
                "clearance" => params.clearance = parse_float(value).map_err(&ctx)?,
                "assumed_obstacle_radius" => {
                    params.assumed_obstacle_radius = parse_float(value).map_err(&ctx)?
                }
                "lateral_rate" => params.lateral_rate = parse_float(value).map_err(&ctx)?,
                "follow_gap" => params.follow_gap = parse_float(value).map_err(&ctx)?,
                "vehicle_radius" => params.vehicle_radius = parse_float(value).map_err(&ctx)?,
                "arrival_tolerance" => {
                    params.arrival_tolerance = parse_float(value).map_err(&ctx)?
                }
                "denm_validity" => {
                    params.denm_validity = parse_int(value).map_err(&ctx)? as u32
                }
                "peer_ttl" => params.peer_ttl = parse_int(value).map_err(&ctx)?,
                "handshake" => params.handshake_enabled = parse_switch(value).map_err(&ctx)?,
                "avoidance" => params.avoidance_enabled = parse_switch(value).map_err(&ctx)?,
                _ => {
                    return Err(ScenarioError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            },
            Section::Bus => match key {
                "loss_probability" => {
                    bus.loss_probability = parse_float(value).map_err(&ctx)?;
                    if !(0.0..=1.0).contains(&bus.loss_probability) {
                        return Err(ctx("loss probability must be in [0, 1]".into()));
                    }
                }
                "latency_steps" => bus.latency_steps = parse_int(value).map_err(&ctx)?,
                _ => {
                    return Err(ScenarioError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            },
            Section::Sim => match key {
                "dt" => {
                    params.dt = parse_float(value).map_err(&ctx)?;
                    if params.dt <= 0.0 {
                        return Err(ctx("dt must be positive".into()));
                    }
                }
                "steps" => steps = parse_int(value).map_err(&ctx)?,
                "seed" => seed = parse_int(value).map_err(&ctx)?,
                _ => {
                    return Err(ScenarioError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            },
        }
    }

    // resolve the plan
    let (builtin_plan, plan) = match (&draft.builtin, draft.seen) {
        (Some(name), _) => {
            if !draft.waypoints.is_empty()
                || !draft.lanes.is_empty()
                || !draft.intersections.is_empty()
                || !draft.spawn_points.is_empty()
            {
                return Err(ScenarioError::InvalidPlan(
                    "builtin plan cannot be mixed with inline plan parts".into(),
                ));
            }
            (Some(name.clone()), build_benchmark_plan())
        }
        (None, true)
            if !draft.waypoints.is_empty() =>
        {
            let plan = TrafficPlan {
                waypoints: draft.waypoints,
                lanes: draft.lanes,
                intersections: draft.intersections,
                spawn_points: draft.spawn_points,
                routes: Vec::new(),
            };
            (None, plan)
        }
        _ => (Some("benchmark".to_string()), build_benchmark_plan()),
    };
    plan.validate()
        .map_err(|e| ScenarioError::InvalidPlan(e.to_string()))?;

    // canonical entity order and id uniqueness
    vehicles.sort_by_key(|v| v.station_id);
    for pair in vehicles.windows(2) {
        if pair[0].station_id == pair[1].station_id {
            return Err(ScenarioError::DuplicateStationId(pair[0].station_id));
        }
    }
    obstacles.sort_by_key(|o| o.id);
    for pair in obstacles.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(ScenarioError::DuplicateEntity {
                kind: "obstacle",
                id: pair[0].id,
            });
        }
    }
    pedestrians.sort_by_key(|p| p.id);
    for pair in pedestrians.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(ScenarioError::DuplicateEntity {
                kind: "pedestrian",
                id: pair[0].id,
            });
        }
    }

    // cross-field checks
    for v in &vehicles {
        match v.route {
            Some(role) => {
                if plan.route(role).is_none() {
                    return Err(ScenarioError::InvalidSetup(format!(
                        "vehicle {} patrols route {} which the plan does not define",
                        v.station_id,
                        role.name()
                    )));
                }
                if !v.goals.is_empty() {
                    return Err(ScenarioError::InvalidSetup(format!(
                        "vehicle {} sets both a route and explicit goals",
                        v.station_id
                    )));
                }
            }
            None => {
                if v.goals.is_empty() {
                    return Err(ScenarioError::InvalidSetup(format!(
                        "vehicle {} has neither a route nor goals",
                        v.station_id
                    )));
                }
                if v.spawn.is_none() {
                    return Err(ScenarioError::InvalidSetup(format!(
                        "vehicle {} drives explicit goals but has no spawn",
                        v.station_id
                    )));
                }
            }
        }
    }
    for o in &obstacles {
        match o.kind {
            ObstacleKind::Static => {
                if o.placement.is_none() {
                    return Err(ScenarioError::InvalidSetup(format!(
                        "obstacle {} has no position",
                        o.id
                    )));
                }
            }
            ObstacleKind::Dynamic => {
                if o.path.len() < 2 {
                    return Err(ScenarioError::InvalidSetup(format!(
                        "dynamic obstacle {} needs a path of at least two points",
                        o.id
                    )));
                }
                if o.speed <= 0.0 {
                    return Err(ScenarioError::InvalidSetup(format!(
                        "dynamic obstacle {} needs a positive speed",
                        o.id
                    )));
                }
            }
        }
    }
    for p in &pedestrians {
        if p.path.len() < 2 {
            return Err(ScenarioError::InvalidSetup(format!(
                "pedestrian {} needs a path of at least two points",
                p.id
            )));
        }
        if p.speed <= 0.0 {
            return Err(ScenarioError::InvalidSetup(format!(
                "pedestrian {} needs a positive speed",
                p.id
            )));
        }
    }

    Ok(Scenario {
        builtin_plan,
        plan,
        vehicles,
        obstacles,
        pedestrians,
        sensor,
        params,
        bus,
        steps,
        seed,
    })
}

fn parse_section_header(
    header: &str,
    line: usize,
    vehicles: &mut Vec<VehicleSetup>,
    obstacles: &mut Vec<ObstacleSetup>,
    pedestrians: &mut Vec<PedestrianSetup>,
) -> Result<Section, ScenarioError> {
    let mut parts = header.split_whitespace();
    let name = parts.next().unwrap_or("");
    let arg = parts.next();
    if parts.next().is_some() {
        return Err(ScenarioError::SyntaxError { line });
    }
    let parse_id = |arg: Option<&str>| -> Result<u32, ScenarioError> {
        arg.and_then(|a| a.parse().ok())
            .ok_or(ScenarioError::SyntaxError { line })
    };
    match (name, arg) {
        ("plan", None) => Ok(Section::Plan),
        ("sensor", None) => Ok(Section::Sensor),
        ("protocol", None) => Ok(Section::Protocol),
        ("bus", None) => Ok(Section::Bus),
        ("sim", None) => Ok(Section::Sim),
        ("vehicle", _) => {
            let id = parse_id(arg)?;
            if vehicles.iter().any(|v| v.station_id == id) {
                return Err(ScenarioError::DuplicateStationId(id));
            }
            vehicles.push(VehicleSetup::new(id));
            Ok(Section::Vehicle(vehicles.len() - 1))
        }
        ("obstacle", _) => {
            let id = parse_id(arg)?;
            if obstacles.iter().any(|o| o.id == id) {
                return Err(ScenarioError::DuplicateEntity {
                    kind: "obstacle",
                    id,
                });
            }
            obstacles.push(ObstacleSetup::new(id));
            Ok(Section::Obstacle(obstacles.len() - 1))
        }
        ("pedestrian", _) => {
            let id = parse_id(arg)?;
            if pedestrians.iter().any(|p| p.id == id) {
                return Err(ScenarioError::DuplicateEntity {
                    kind: "pedestrian",
                    id,
                });
            }
            pedestrians.push(PedestrianSetup::new(id));
            Ok(Section::Pedestrian(pedestrians.len() - 1))
        }
        _ => Err(ScenarioError::UnknownSection {
            line,
            section: header.to_string(),
        }),
    }
}

fn parse_float(value: &str) -> Result<f64, String> {
    value
        .parse()
        .map_err(|_| format!("'{value}' is not a number"))
}

fn parse_int(value: &str) -> Result<u64, String> {
    value
        .parse()
        .map_err(|_| format!("'{value}' is not an integer"))
}

fn parse_switch(value: &str) -> Result<bool, String> {
    match value {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("'{other}' is not on/off")),
    }
}

fn parse_floats(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|p| parse_float(p.trim()))
        .collect()
}

fn parse_vec2(value: &str) -> Result<Vec2, String> {
    let f = parse_floats(value)?;
    if f.len() != 2 {
        return Err("expected x, y".into());
    }
    Ok(Vec2::new(f[0], f[1]))
}

fn parse_points(value: &str) -> Result<Vec<Vec2>, String> {
    value.split(';').map(|p| parse_vec2(p.trim())).collect()
}

fn fmt_points(points: &[Vec2]) -> String {
    points
        .iter()
        .map(|p| format!("{}, {}", p.x, p.y))
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn serialize(s: &Scenario) -> String {
    let mut out = String::new();
    let mut push = |line: String| {
        out.push_str(&line);
        out.push('\n');
    };

    push("[plan]".into());
    match &s.builtin_plan {
        Some(name) => push(format!("builtin = {name}")),
        None => {
            for w in &s.plan.waypoints {
                push(format!("waypoint = {}, {}, {}", w.id, w.position.x, w.position.y));
            }
            for l in &s.plan.lanes {
                push(format!("lane = {}, {}, {}", l.from, l.to, l.width));
            }
            for i in &s.plan.intersections {
                push(format!(
                    "intersection = {}, {}, {}, {}, {}",
                    i.id, i.center.x, i.center.y, i.core_radius, i.approach_radius
                ));
            }
            if !s.plan.spawn_points.is_empty() {
                push(format!(
                    "spawn_points = {}",
                    s.plan
                        .spawn_points
                        .iter()
                        .map(|id| id.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                ));
            }
        }
    }

    for v in &s.vehicles {
        push(String::new());
        push(format!("[vehicle {}]", v.station_id));
        if let Some(route) = v.route {
            push(format!("route = {}", route.name()));
        }
        if let Some(spawn) = v.spawn {
            push(format!("spawn = {}, {}", spawn.x, spawn.y));
        }
        if !v.goals.is_empty() {
            push(format!("goals = {}", fmt_points(&v.goals)));
        }
        if let Some(cyclic) = v.cyclic {
            push(format!("cyclic = {}", if cyclic { "on" } else { "off" }));
        }
        push(format!("task_priority = {}", v.task_priority));
        push(format!("task_urgency = {}", v.task_urgency));
        push(format!("cruise_speed = {}", v.cruise_speed));
    }

    for o in &s.obstacles {
        push(String::new());
        push(format!("[obstacle {}]", o.id));
        push(format!("step = {}", o.step));
        match o.placement {
            Some(Placement::At(p)) => push(format!("position = {}, {}", p.x, p.y)),
            Some(Placement::Random) => push("position = random".into()),
            None => {}
        }
        push(format!("radius = {}", o.radius));
        push(format!(
            "kind = {}",
            match o.kind {
                ObstacleKind::Static => "static",
                ObstacleKind::Dynamic => "dynamic",
            }
        ));
        if let Some(step) = o.remove_step {
            push(format!("remove_step = {step}"));
        }
        if !o.path.is_empty() {
            push(format!("path = {}", fmt_points(&o.path)));
            push(format!("speed = {}", o.speed));
        }
    }

    for p in &s.pedestrians {
        push(String::new());
        push(format!("[pedestrian {}]", p.id));
        push(format!("path = {}", fmt_points(&p.path)));
        push(format!("speed = {}", p.speed));
    }

    push(String::new());
    push("[sensor]".into());
    push(format!("observation_distance = {}", s.sensor.observation_distance));
    push(format!("safety_distance = {}", s.sensor.safety_distance));
    push(format!("field_of_view = {}", s.sensor.field_of_view_deg));
    push(format!("longitudinal_cone = {}", s.sensor.longitudinal_cone_deg));

    push(String::new());
    push("[protocol]".into());
    push(format!("cam_period = {}", s.params.cam_period));
    push(format!("cpm_period = {}", s.params.cpm_period));
    push(format!("cpm_expiry = {}", s.params.cpm_expiry));
    push(format!("ack_timeout = {}", s.params.ack_timeout));
    push(format!("ack_round_trip = {}", s.params.ack_round_trip));
    push(format!("ack_scope_factor = {}", s.params.ack_scope_factor));
    push(format!("block_timeout = {}", s.params.block_timeout));
    push(format!("update_epsilon = {}", s.params.update_epsilon));
    push(format!("clearance = {}", s.params.clearance));
    push(format!(
        "assumed_obstacle_radius = {}",
        s.params.assumed_obstacle_radius
    ));
    push(format!("lateral_rate = {}", s.params.lateral_rate));
    push(format!("follow_gap = {}", s.params.follow_gap));
    push(format!("vehicle_radius = {}", s.params.vehicle_radius));
    push(format!("arrival_tolerance = {}", s.params.arrival_tolerance));
    push(format!("denm_validity = {}", s.params.denm_validity));
    push(format!("peer_ttl = {}", s.params.peer_ttl));
    push(format!(
        "handshake = {}",
        if s.params.handshake_enabled { "on" } else { "off" }
    ));
    push(format!(
        "avoidance = {}",
        if s.params.avoidance_enabled { "on" } else { "off" }
    ));

    push(String::new());
    push("[bus]".into());
    push(format!("loss_probability = {}", s.bus.loss_probability));
    push(format!("latency_steps = {}", s.bus.latency_steps));

    push(String::new());
    push("[sim]".into());
    push(format!("dt = {}", s.params.dt));
    push(format!("steps = {}", s.steps));
    push(format!("seed = {}", s.seed));

    out
}

/// Goal positions of a route, in patrol order.
pub fn route_goals(plan: &TrafficPlan, route: &Route) -> Vec<Vec2> {
    route
        .waypoints
        .iter()
        .filter_map(|&id| plan.position_of(id).ok())
        .collect()
}
