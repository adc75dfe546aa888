//! On-board radar model: each vehicle sees every other entity inside its
//! observation range as a classified point object with distance, bearing and
//! closing speed. Detection is ground truth (no noise, no occlusion) so runs
//! stay reproducible; the risk ladder downstream decides what to do about a
//! contact.

use crate::geometry::{bearing_deg, Vec2};
use crate::trace::EntityId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    /// Detection range, m. Contacts at exactly this distance are seen.
    pub observation_distance: f64,
    /// Alert range, m. Contacts at or inside trigger collision handling.
    pub safety_distance: f64,
    /// Angular aperture, degrees. 360 scans all around.
    pub field_of_view_deg: f64,
    /// Half-angle of the frontal cone used to call a contact longitudinal.
    pub longitudinal_cone_deg: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            observation_distance: 3.0,
            safety_distance: 1.0,
            field_of_view_deg: 360.0,
            longitudinal_cone_deg: 45.0,
        }
    }
}

/// One entity as the physics sees it; input to a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotEntity {
    pub id: EntityId,
    /// Classification code (see wire object class codes).
    pub object_class: u8,
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading_deg: f64,
    pub radius: f64,
}

/// Positions of everything at one instant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldSnapshot {
    pub entities: Vec<SnapshotEntity>,
}

impl WorldSnapshot {
    pub fn entity(&self, id: EntityId) -> Option<&SnapshotEntity> {
        self.entities.iter().find(|e| e.id == id)
    }
}

/// One radar contact, relative to the scanning vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceivedObject {
    pub source: EntityId,
    pub object_class: u8,
    /// Center-to-center distance, m.
    pub distance: f64,
    /// Direction to the contact relative to own heading, degrees in
    /// (-180, 180]; 0 is dead ahead, positive is to the left.
    pub bearing_deg: f64,
    /// Closing speed along the line of sight, m/s; positive means the gap is
    /// shrinking.
    pub relative_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RiskLevel {
    None,
    Observe,
    Alert,
}

/// All contacts visible to `vehicle_id`, nearest first (entity id breaks
/// distance ties). The scanning vehicle itself is never a contact.
pub fn scan(snapshot: &WorldSnapshot, vehicle_id: EntityId, config: &SensorConfig) -> Vec<PerceivedObject> {
    let me = match snapshot.entity(vehicle_id) {
        Some(e) => *e,
        None => return Vec::new(),
    };
    let mut contacts: Vec<PerceivedObject> = snapshot
        .entities
        .iter()
        .filter(|e| e.id != vehicle_id)
        .filter_map(|e| {
            let distance = me.position.distance(e.position);
            if distance > config.observation_distance {
                return None;
            }
            let bearing = bearing_deg(me.position, me.heading_deg, e.position);
            if config.field_of_view_deg < 360.0 && bearing.abs() > config.field_of_view_deg / 2.0 {
                return None;
            }
            let los = e.position.sub(me.position).unit();
            let relative_speed = -(e.velocity.sub(me.velocity)).dot(los);
            Some(PerceivedObject {
                source: e.id,
                object_class: e.object_class,
                distance,
                bearing_deg: bearing,
                relative_speed,
            })
        })
        .collect();
    contacts.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.source.cmp(&b.source))
    });
    contacts
}

/// Risk ladder: nothing past observation range, observation band outside the
/// safety bubble, alert at or inside it. Both boundaries count inward.
pub fn classify_risk(distance: f64, config: &SensorConfig) -> RiskLevel {
    if distance > config.observation_distance {
        RiskLevel::None
    } else if distance > config.safety_distance {
        RiskLevel::Observe
    } else {
        RiskLevel::Alert
    }
}

/// Collision sub-cause for an alert contact: vulnerable road users first,
/// then by geometry — frontal cone is longitudinal, flanks are lateral,
/// everything behind is a crossing conflict.
pub fn alert_sub_cause(object: &PerceivedObject, config: &SensorConfig) -> u8 {
    use crate::wire::codes::{collision_sub_cause, object_class};
    if object.object_class == object_class::PEDESTRIAN {
        return collision_sub_cause::VULNERABLE_USER;
    }
    let abs = object.bearing_deg.abs();
    if abs < config.longitudinal_cone_deg {
        collision_sub_cause::LONGITUDINAL
    } else if abs < 180.0 - config.longitudinal_cone_deg {
        collision_sub_cause::LATERAL
    } else {
        collision_sub_cause::CROSSING
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::codes::{collision_sub_cause, object_class};

    fn vehicle(id: u32, x: f64, y: f64, vx: f64, vy: f64, heading: f64) -> SnapshotEntity {
        SnapshotEntity {
            id: EntityId::Vehicle(id),
            object_class: object_class::IAV,
            position: Vec2::new(x, y),
            velocity: Vec2::new(vx, vy),
            heading_deg: heading,
            radius: 0.2,
        }
    }

    fn obstacle(id: u32, x: f64, y: f64) -> SnapshotEntity {
        SnapshotEntity {
            id: EntityId::Obstacle(id),
            object_class: object_class::OBJECT,
            position: Vec2::new(x, y),
            velocity: Vec2::ZERO,
            heading_deg: 0.0,
            radius: 0.25,
        }
    }

    #[test]
    fn scan_excludes_self_and_out_of_range_contacts() {
        let snapshot = WorldSnapshot {
            entities: vec![
                vehicle(1, 0.0, 0.0, 1.0, 0.0, 0.0),
                obstacle(1, 2.0, 0.0),
                obstacle(2, 3.0, 0.0),       // exactly at range: still seen
                obstacle(3, 3.0 + 1e-9, 0.0), // just past range: dropped
            ],
        };
        let seen = scan(&snapshot, EntityId::Vehicle(1), &SensorConfig::default());
        let sources: Vec<_> = seen.iter().map(|o| o.source).collect();
        assert_eq!(sources, vec![EntityId::Obstacle(1), EntityId::Obstacle(2)]);
    }

    #[test]
    fn contacts_come_back_nearest_first_with_id_tiebreak() {
        let snapshot = WorldSnapshot {
            entities: vec![
                vehicle(5, 0.0, 0.0, 0.0, 0.0, 0.0),
                obstacle(9, 0.0, 2.0),
                obstacle(2, 2.0, 0.0),  // same distance as o9, lower rank wins? same rank, lower id
                vehicle(1, 2.0, 0.0, 0.0, 0.0, 0.0), // vehicles sort before obstacles on ties
                obstacle(4, 1.0, 0.0),
            ],
        };
        let seen = scan(&snapshot, EntityId::Vehicle(5), &SensorConfig::default());
        let sources: Vec<_> = seen.iter().map(|o| o.source).collect();
        assert_eq!(
            sources,
            vec![
                EntityId::Obstacle(4),
                EntityId::Vehicle(1),
                EntityId::Obstacle(2),
                EntityId::Obstacle(9),
            ]
        );
    }

    #[test]
    fn closing_speed_is_positive_when_the_gap_shrinks() {
        // contact dead ahead, standing still, we drive at it: closing at 1
        let snapshot = WorldSnapshot {
            entities: vec![vehicle(1, 0.0, 0.0, 1.0, 0.0, 0.0), obstacle(1, 2.0, 0.0)],
        };
        let seen = scan(&snapshot, EntityId::Vehicle(1), &SensorConfig::default());
        assert!((seen[0].relative_speed - 1.0).abs() < 1e-12);

        // contact running away faster than us: negative closing speed
        let snapshot = WorldSnapshot {
            entities: vec![
                vehicle(1, 0.0, 0.0, 1.0, 0.0, 0.0),
                vehicle(2, 2.0, 0.0, 2.5, 0.0, 0.0),
            ],
        };
        let seen = scan(&snapshot, EntityId::Vehicle(1), &SensorConfig::default());
        assert!((seen[0].relative_speed + 1.5).abs() < 1e-12);
    }

    #[test]
    fn bearing_is_measured_from_own_heading() {
        let snapshot = WorldSnapshot {
            entities: vec![vehicle(1, 0.0, 0.0, 0.0, 1.0, 90.0), obstacle(1, -2.0, 0.0)],
        };
        // heading north, contact due west = 90 degrees to our left
        let seen = scan(&snapshot, EntityId::Vehicle(1), &SensorConfig::default());
        assert!((seen[0].bearing_deg - 90.0).abs() < 1e-9);
    }

    #[test]
    fn risk_ladder_boundaries_count_inward() {
        let cfg = SensorConfig::default();
        assert_eq!(classify_risk(3.0 + 1e-9, &cfg), RiskLevel::None);
        assert_eq!(classify_risk(3.0, &cfg), RiskLevel::Observe);
        assert_eq!(classify_risk(1.5, &cfg), RiskLevel::Observe);
        assert_eq!(classify_risk(1.0, &cfg), RiskLevel::Alert);
        assert_eq!(classify_risk(0.1, &cfg), RiskLevel::Alert);
    }

    #[test]
    fn sub_cause_follows_bearing_sectors() {
        let cfg = SensorConfig::default();
        let at = |bearing: f64, class: u8| PerceivedObject {
            source: EntityId::Obstacle(1),
            object_class: class,
            distance: 0.5,
            bearing_deg: bearing,
            relative_speed: 0.0,
        };
        let iav = object_class::IAV;
        assert_eq!(alert_sub_cause(&at(0.0, iav), &cfg), collision_sub_cause::LONGITUDINAL);
        assert_eq!(alert_sub_cause(&at(44.9, iav), &cfg), collision_sub_cause::LONGITUDINAL);
        assert_eq!(alert_sub_cause(&at(45.0, iav), &cfg), collision_sub_cause::LATERAL);
        assert_eq!(alert_sub_cause(&at(-100.0, iav), &cfg), collision_sub_cause::LATERAL);
        assert_eq!(alert_sub_cause(&at(134.9, iav), &cfg), collision_sub_cause::LATERAL);
        assert_eq!(alert_sub_cause(&at(135.0, iav), &cfg), collision_sub_cause::CROSSING);
        assert_eq!(alert_sub_cause(&at(180.0, iav), &cfg), collision_sub_cause::CROSSING);
        // pedestrians outrank geometry
        assert_eq!(
            alert_sub_cause(&at(0.0, object_class::PEDESTRIAN), &cfg),
            collision_sub_cause::VULNERABLE_USER
        );
    }

    #[test]
    fn risk_never_drops_as_a_contact_closes_in() {
        let cfg = SensorConfig::default();
        let mut last = RiskLevel::None;
        let mut d = 4.0;
        while d > 0.05 {
            let level = classify_risk(d, &cfg);
            assert!(level >= last, "risk fell from {last:?} to {level:?} at {d}");
            last = level;
            d -= 0.01;
        }
    }
}
