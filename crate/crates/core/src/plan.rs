//! Warehouse traffic plan: waypoints, directed lanes, intersection zones and
//! the cyclic routes vehicles patrol.
//!
//! The built-in benchmark plan models a 50 m x 30 m floor with aisles on a
//! 10 m grid: a central horizontal aisle carrying the spawn points, three
//! nested clockwise loops (red: small top-left circuit; blue: the top run
//! extended to the fourth vertical aisle and back along the central aisle;
//! yellow: the full perimeter) and four arbitrated intersections at the nodes
//! where those flows merge or cross.

use crate::geometry::{segment_distance, Vec2};
use thiserror::Error;

pub type WaypointId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub id: WaypointId,
    pub position: Vec2,
}

/// Directed lane segment between two waypoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lane {
    pub from: WaypointId,
    pub to: WaypointId,
    pub width: f64,
}

/// Arbitrated crossing: a core disc that only one granted vehicle may occupy
/// and a wider approach ring where crossing requests are negotiated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub id: u8,
    pub center: Vec2,
    pub core_radius: f64,
    pub approach_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RouteRole {
    Red,
    Blue,
    Yellow,
}

impl RouteRole {
    pub fn name(self) -> &'static str {
        match self {
            RouteRole::Red => "red",
            RouteRole::Blue => "blue",
            RouteRole::Yellow => "yellow",
        }
    }
}

/// Cyclic ordered waypoint list; consecutive entries (wrapping) are lanes.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub role: RouteRole,
    pub waypoints: Vec<WaypointId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    Outside,
    Approach,
    Core,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficPlan {
    pub waypoints: Vec<Waypoint>,
    pub lanes: Vec<Lane>,
    pub intersections: Vec<Intersection>,
    /// Waypoints vehicles may start from, in assignment order.
    pub spawn_points: Vec<WaypointId>,
    pub routes: Vec<Route>,
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PlanError {
    #[error("unknown intersection id {0}")]
    UnknownIntersection(u8),
    #[error("unknown waypoint id {0}")]
    UnknownWaypoint(WaypointId),
    #[error("position is not on the route corridor")]
    OffRoute,
    #[error("invalid plan: {0}")]
    Invalid(String),
}

impl TrafficPlan {
    pub fn waypoint(&self, id: WaypointId) -> Result<&Waypoint, PlanError> {
        self.waypoints
            .iter()
            .find(|w| w.id == id)
            .ok_or(PlanError::UnknownWaypoint(id))
    }

    pub fn position_of(&self, id: WaypointId) -> Result<Vec2, PlanError> {
        Ok(self.waypoint(id)?.position)
    }

    pub fn intersection(&self, id: u8) -> Result<&Intersection, PlanError> {
        self.intersections
            .iter()
            .find(|i| i.id == id)
            .ok_or(PlanError::UnknownIntersection(id))
    }

    pub fn route(&self, role: RouteRole) -> Option<&Route> {
        self.routes.iter().find(|r| r.role == role)
    }

    /// Positions of a route's waypoints, in cycle order.
    pub fn route_points(&self, route: &Route) -> Result<Vec<Vec2>, PlanError> {
        route.waypoints.iter().map(|&id| self.position_of(id)).collect()
    }

    /// Smallest distance from `pos` to any lane centerline, with that lane.
    pub fn nearest_lane(&self, pos: Vec2) -> Option<(&Lane, f64)> {
        let mut best: Option<(&Lane, f64)> = None;
        for lane in &self.lanes {
            let (a, b) = match (self.position_of(lane.from), self.position_of(lane.to)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            let d = segment_distance(pos, a, b);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((lane, d));
            }
        }
        best
    }

    /// True when `pos` lies inside some lane corridor (centerline +- width/2).
    pub fn on_lanes(&self, pos: Vec2) -> bool {
        self.nearest_lane(pos)
            .is_some_and(|(lane, d)| d <= lane.width / 2.0)
    }

    /// Sum of all lane centerline lengths.
    pub fn total_lane_length(&self) -> f64 {
        self.lanes
            .iter()
            .filter_map(|l| {
                let a = self.position_of(l.from).ok()?;
                let b = self.position_of(l.to).ok()?;
                Some(a.distance(b))
            })
            .sum()
    }

    /// Point at arc length `s` along the concatenated lane centerlines
    /// (lane declaration order). `s` is clamped into [0, total).
    pub fn point_at_lane_arc(&self, s: f64) -> Option<Vec2> {
        let total = self.total_lane_length();
        if total <= 0.0 {
            return None;
        }
        let mut s = s.rem_euclid(total);
        for lane in &self.lanes {
            let a = self.position_of(lane.from).ok()?;
            let b = self.position_of(lane.to).ok()?;
            let len = a.distance(b);
            if s <= len {
                let t = if len > 0.0 { s / len } else { 0.0 };
                return Some(a.add(b.sub(a).scale(t)));
            }
            s -= len;
        }
        // numeric leftovers land on the last lane's end
        let last = self.lanes.last()?;
        self.position_of(last.to).ok()
    }

    /// Structural checks: waypoint references resolve, routes follow declared
    /// lanes (wrapping), spawn points sit on lanes, intersection zones hold at
    /// least two crossing lanes, and route waypoints form one connected graph.
    pub fn validate(&self) -> Result<(), PlanError> {
        for lane in &self.lanes {
            self.waypoint(lane.from)?;
            self.waypoint(lane.to)?;
            if lane.width <= 0.0 {
                return Err(PlanError::Invalid(format!(
                    "lane {}->{} has non-positive width",
                    lane.from, lane.to
                )));
            }
        }
        for route in &self.routes {
            if route.waypoints.len() < 2 {
                return Err(PlanError::Invalid(format!(
                    "route {} has fewer than two waypoints",
                    route.role.name()
                )));
            }
            let n = route.waypoints.len();
            for i in 0..n {
                let from = route.waypoints[i];
                let to = route.waypoints[(i + 1) % n];
                if !self.lanes.iter().any(|l| l.from == from && l.to == to) {
                    return Err(PlanError::Invalid(format!(
                        "route {} uses missing lane {}->{}",
                        route.role.name(),
                        from,
                        to
                    )));
                }
            }
        }
        for &sp in &self.spawn_points {
            let p = self.position_of(sp)?;
            if !self.on_lanes(p) {
                return Err(PlanError::Invalid(format!(
                    "spawn waypoint {sp} is off every lane corridor"
                )));
            }
        }
        for inter in &self.intersections {
            if !(inter.core_radius > 0.0 && inter.core_radius < inter.approach_radius) {
                return Err(PlanError::Invalid(format!(
                    "intersection {} radii out of order",
                    inter.id
                )));
            }
            let mut directions: Vec<Vec2> = Vec::new();
            for lane in &self.lanes {
                let a = self.position_of(lane.from)?;
                let b = self.position_of(lane.to)?;
                if segment_distance(inter.center, a, b) <= inter.core_radius {
                    directions.push(b.sub(a).unit());
                }
            }
            let crossing = directions.iter().enumerate().any(|(i, u)| {
                directions
                    .iter()
                    .skip(i + 1)
                    .any(|v| u.cross(*v).abs() > 1e-6)
            });
            if !crossing {
                return Err(PlanError::Invalid(format!(
                    "intersection {} has no crossing lanes in its core",
                    inter.id
                )));
            }
        }
        // connectivity over route-referenced waypoints, lanes as undirected edges
        let mut referenced: Vec<WaypointId> = self
            .routes
            .iter()
            .flat_map(|r| r.waypoints.iter().copied())
            .collect();
        referenced.sort_unstable();
        referenced.dedup();
        if let Some(&start) = referenced.first() {
            let mut seen = vec![start];
            let mut stack = vec![start];
            while let Some(w) = stack.pop() {
                for lane in &self.lanes {
                    for next in [
                        (lane.from == w).then_some(lane.to),
                        (lane.to == w).then_some(lane.from),
                    ]
                    .into_iter()
                    .flatten()
                    {
                        if !seen.contains(&next) {
                            seen.push(next);
                            stack.push(next);
                        }
                    }
                }
            }
            if let Some(&missing) = referenced.iter().find(|w| !seen.contains(w)) {
                return Err(PlanError::Invalid(format!(
                    "waypoint {missing} is disconnected from the route graph"
                )));
            }
        }
        Ok(())
    }
}

/// Zone of `pos` relative to one intersection. The core boundary belongs to
/// the core, the approach boundary to the approach ring.
pub fn zone_of(plan: &TrafficPlan, intersection_id: u8, pos: Vec2) -> Result<Zone, PlanError> {
    let inter = plan.intersection(intersection_id)?;
    let d = pos.distance(inter.center);
    Ok(if d <= inter.core_radius {
        Zone::Core
    } else if d <= inter.approach_radius {
        Zone::Approach
    } else {
        Zone::Outside
    })
}

/// Move `distance` meters of arc length along a route's cyclic polyline,
/// starting from `position` (which must lie on the route corridor; `heading`
/// breaks ties at corners). Returns the new position and the lane heading
/// there, degrees.
pub fn advance_along(
    plan: &TrafficPlan,
    route: &Route,
    position: Vec2,
    heading: f64,
    distance: f64,
) -> Result<(Vec2, f64), PlanError> {
    let points = plan.route_points(route)?;
    let n = points.len();
    if n < 2 {
        return Err(PlanError::Invalid("route too short".into()));
    }
    let seg_len: Vec<f64> = (0..n).map(|i| points[i].distance(points[(i + 1) % n])).collect();
    let total: f64 = seg_len.iter().sum();
    if total <= 0.0 {
        return Err(PlanError::Invalid("route has zero length".into()));
    }

    // locate `position` on the polyline: nearest segment, heading breaks ties
    let hv = crate::geometry::heading_vec(heading);
    let mut best: Option<(usize, f64, f64)> = None; // (segment, dist, along)
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        let proj = crate::geometry::project_on_segment(position, a, b);
        let d = position.distance(proj);
        let along = a.distance(proj);
        let better = match best {
            None => true,
            Some((bi, bd, _)) => {
                if (d - bd).abs() <= 1e-9 {
                    // same distance: prefer the segment pointing with us
                    let cur = b.sub(a).unit().dot(hv);
                    let prev =
                        points[(bi + 1) % n].sub(points[bi]).unit().dot(hv);
                    cur > prev
                } else {
                    d < bd
                }
            }
        };
        if better {
            best = Some((i, d, along));
        }
    }
    let (seg, dist_to_line, along) = best.unwrap();
    let half_width = route_corridor_half_width(plan, route, seg);
    if dist_to_line > half_width {
        return Err(PlanError::OffRoute);
    }

    let mut s: f64 = seg_len[..seg].iter().sum::<f64>() + along;
    s = (s + distance).rem_euclid(total);

    // walk to the segment containing arc position s
    let mut acc = 0.0;
    for i in 0..n {
        if s <= acc + seg_len[i] + 1e-12 {
            let a = points[i];
            let b = points[(i + 1) % n];
            let t = if seg_len[i] > 0.0 { (s - acc) / seg_len[i] } else { 0.0 };
            let p = a.add(b.sub(a).scale(t.clamp(0.0, 1.0)));
            return Ok((p, b.sub(a).angle_deg()));
        }
        acc += seg_len[i];
    }
    let a = points[n - 1];
    let b = points[0];
    Ok((b, b.sub(a).angle_deg()))
}

fn route_corridor_half_width(plan: &TrafficPlan, route: &Route, seg: usize) -> f64 {
    let n = route.waypoints.len();
    let from = route.waypoints[seg];
    let to = route.waypoints[(seg + 1) % n];
    plan.lanes
        .iter()
        .find(|l| l.from == from && l.to == to)
        .map(|l| l.width / 2.0)
        .unwrap_or(1.0)
}

// ---------------------------------------------------------------------------
// benchmark plan
// ---------------------------------------------------------------------------

pub const BENCHMARK_LANE_WIDTH: f64 = 2.0;
pub const BENCHMARK_CORE_RADIUS: f64 = 2.0;
pub const BENCHMARK_APPROACH_RADIUS: f64 = 6.0;

// waypoint ids of the 10 m grid nodes the routes use
const A: WaypointId = 1; // (5,15)  west end of the central aisle
const D: WaypointId = 2; // (15,15) red descent meets the aisle
const D2: WaypointId = 3; // (25,15)
const G: WaypointId = 4; // (35,15) blue descent meets the aisle
const I: WaypointId = 5; // (45,15)
const B: WaypointId = 6; // (5,25)
const C: WaypointId = 7; // (15,25) red leaves the top run
const C2: WaypointId = 8; // (25,25)
const F: WaypointId = 9; // (35,25) blue leaves the top run
const H: WaypointId = 10; // (45,25)
const N: WaypointId = 11; // (5,5)
const M: WaypointId = 12; // (15,5)
const L: WaypointId = 13; // (25,5)
const K: WaypointId = 14; // (35,5)
const J: WaypointId = 15; // (45,5)

/// Ten-vehicle benchmark floor: three nested clockwise loops over a 10 m
/// aisle grid, four arbitrated intersections, spawn points strung along the
/// central aisle (westmost first, so the red group leads).
pub fn build_benchmark_plan() -> TrafficPlan {
    let wp = |id, x, y| Waypoint {
        id,
        position: Vec2::new(x, y),
    };
    let mut waypoints = vec![
        wp(A, 5.0, 15.0),
        wp(D, 15.0, 15.0),
        wp(D2, 25.0, 15.0),
        wp(G, 35.0, 15.0),
        wp(I, 45.0, 15.0),
        wp(B, 5.0, 25.0),
        wp(C, 15.0, 25.0),
        wp(C2, 25.0, 25.0),
        wp(F, 35.0, 25.0),
        wp(H, 45.0, 25.0),
        wp(N, 5.0, 5.0),
        wp(M, 15.0, 5.0),
        wp(L, 25.0, 5.0),
        wp(K, 35.0, 5.0),
        wp(J, 45.0, 5.0),
    ];
    // spawn markers sit on the central aisle clear of both intersection cores
    let spawn_xs = [7.5, 10.0, 12.5, 17.5, 20.0, 22.5, 26.0, 28.5, 31.0, 33.5];
    let mut spawn_points = Vec::new();
    for (i, &x) in spawn_xs.iter().enumerate() {
        let id = 101 + i as WaypointId;
        waypoints.push(wp(id, x, 15.0));
        spawn_points.push(id);
    }

    let lane = |from, to| Lane {
        from,
        to,
        width: BENCHMARK_LANE_WIDTH,
    };
    let lanes = vec![
        // central aisle, westbound return flow
        lane(I, G),
        lane(G, D2),
        lane(D2, D),
        lane(D, A),
        // west edge climbs, east edge descends
        lane(N, A),
        lane(A, B),
        lane(H, I),
        lane(I, J),
        // top run, eastbound
        lane(B, C),
        lane(C, C2),
        lane(C2, F),
        lane(F, H),
        // loop descents
        lane(C, D),
        lane(F, G),
        // bottom run, westbound
        lane(J, K),
        lane(K, L),
        lane(L, M),
        lane(M, N),
    ];

    let intersections = vec![
        Intersection {
            id: 1,
            center: Vec2::new(15.0, 15.0), // red descent merges into the aisle
            core_radius: BENCHMARK_CORE_RADIUS,
            approach_radius: BENCHMARK_APPROACH_RADIUS,
        },
        Intersection {
            id: 2,
            center: Vec2::new(5.0, 15.0), // aisle meets the perimeter climb
            core_radius: BENCHMARK_CORE_RADIUS,
            approach_radius: BENCHMARK_APPROACH_RADIUS,
        },
        Intersection {
            id: 3,
            center: Vec2::new(15.0, 25.0), // red turns off the top run
            core_radius: BENCHMARK_CORE_RADIUS,
            approach_radius: BENCHMARK_APPROACH_RADIUS,
        },
        Intersection {
            id: 4,
            center: Vec2::new(35.0, 25.0), // blue turns off the top run
            core_radius: BENCHMARK_CORE_RADIUS,
            approach_radius: BENCHMARK_APPROACH_RADIUS,
        },
    ];

    let routes = vec![
        Route {
            role: RouteRole::Red,
            waypoints: vec![A, B, C, D],
        },
        Route {
            role: RouteRole::Blue,
            waypoints: vec![A, B, C, C2, F, G, D2, D],
        },
        Route {
            role: RouteRole::Yellow,
            waypoints: vec![A, B, C, C2, F, H, I, J, K, L, M, N],
        },
    ];

    TrafficPlan {
        waypoints,
        lanes,
        intersections,
        spawn_points,
        routes,
    }
}
