//! Run statistics reconstructed from a trace alone, so a recorded file can be
//! scored later without re-running the simulation.
//!
//! Phase bookkeeping: each vehicle starts the run cruising, and a phase lasts
//! from its change event until the next one. Within one step the phase
//! changes are applied before that step's movement is classified, because the
//! controller picks its phase before the body moves.

use std::collections::BTreeMap;

use crate::trace::{EntityId, EventData, Trace};
use crate::agent::Phase;
use crate::wire::codes;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VehicleMetrics {
    pub station_id: u32,
    /// Overlap events this vehicle was part of.
    pub collisions: u64,
    /// Maximal standstill runs outside intersection waits.
    pub full_stops: u64,
    /// Steps spent parked at an intersection rim.
    pub wait_steps: u64,
    pub goals_reached: u64,
    pub cycles_completed: u64,
    pub cam_sent: u64,
    pub denm_sent: u64,
    pub cpm_sent: u64,
    pub mcm_sent: u64,
    pub ack_mcm_sent: u64,
    /// Distinct rim waits (for the mean below).
    pub waiting_intervals: u64,
}

impl VehicleMetrics {
    pub fn mean_intersection_wait(&self) -> f64 {
        if self.waiting_intervals == 0 {
            0.0
        } else {
            self.wait_steps as f64 / self.waiting_intervals as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    /// Per-station rows, ascending by station id.
    pub vehicles: Vec<VehicleMetrics>,
    /// Distinct overlap events in the run (a two-vehicle overlap is one).
    pub fleet_collisions: u64,
}

impl MetricsReport {
    pub fn fleet_row(&self) -> VehicleMetrics {
        let mut total = VehicleMetrics::default();
        for v in &self.vehicles {
            total.full_stops += v.full_stops;
            total.wait_steps += v.wait_steps;
            total.goals_reached += v.goals_reached;
            total.cycles_completed += v.cycles_completed;
            total.cam_sent += v.cam_sent;
            total.denm_sent += v.denm_sent;
            total.cpm_sent += v.cpm_sent;
            total.mcm_sent += v.mcm_sent;
            total.ack_mcm_sent += v.ack_mcm_sent;
            total.waiting_intervals += v.waiting_intervals;
        }
        total.collisions = self.fleet_collisions;
        total
    }
}

#[derive(Debug, Clone, Copy)]
struct PhaseTrack {
    phase: Phase,
    in_stop: bool,
}

impl Default for PhaseTrack {
    fn default() -> Self {
        PhaseTrack {
            phase: Phase::Cruising,
            in_stop: false,
        }
    }
}

pub fn compute(trace: &Trace) -> MetricsReport {
    let mut rows: BTreeMap<u32, VehicleMetrics> = BTreeMap::new();
    let mut tracks: BTreeMap<u32, PhaseTrack> = BTreeMap::new();
    let mut fleet_collisions = 0u64;

    let mut i = 0;
    let events = &trace.events;
    while i < events.len() {
        let step = events[i].step;
        let mut j = i;
        while j < events.len() && events[j].step == step {
            j += 1;
        }
        let group = &events[i..j];

        // phases first, then classify this step's movement
        for ev in group {
            if let (EntityId::Vehicle(id), EventData::PhaseChanged { phase }) =
                (ev.entity, &ev.data)
            {
                let track = tracks.entry(id).or_default();
                let was_waiting = matches!(track.phase, Phase::Waiting(_));
                let is_waiting = matches!(phase, Phase::Waiting(_));
                if is_waiting && !was_waiting {
                    rows.entry(id)
                        .or_insert_with(|| VehicleMetrics {
                            station_id: id,
                            ..VehicleMetrics::default()
                        })
                        .waiting_intervals += 1;
                }
                track.phase = *phase;
            }
        }
        for ev in group {
            let EntityId::Vehicle(id) = ev.entity else {
                continue;
            };
            let metrics = rows.entry(id).or_insert_with(|| VehicleMetrics {
                station_id: id,
                ..VehicleMetrics::default()
            });
            match &ev.data {
                EventData::Moved { speed, .. } => {
                    let track = tracks.entry(id).or_default();
                    if matches!(track.phase, Phase::Waiting(_)) {
                        metrics.wait_steps += 1;
                        track.in_stop = false;
                    } else if *speed == 0.0 {
                        if !track.in_stop {
                            metrics.full_stops += 1;
                            track.in_stop = true;
                        }
                    } else {
                        track.in_stop = false;
                    }
                }
                EventData::Sent(summary) => match summary.message_id() {
                    id if id == codes::message_id::CAM => metrics.cam_sent += 1,
                    id if id == codes::message_id::DENM => metrics.denm_sent += 1,
                    id if id == codes::message_id::CPM => metrics.cpm_sent += 1,
                    id if id == codes::message_id::MCM => metrics.mcm_sent += 1,
                    _ => metrics.ack_mcm_sent += 1,
                },
                EventData::GoalReached { cycle, .. } => {
                    metrics.goals_reached += 1;
                    metrics.cycles_completed = metrics.cycles_completed.max(*cycle as u64);
                }
                EventData::CollisionDetected { other, .. } => {
                    fleet_collisions += 1;
                    metrics.collisions += 1;
                    if let Some(other_id) = other.station_id() {
                        rows.entry(other_id)
                            .or_insert_with(|| VehicleMetrics {
                                station_id: other_id,
                                ..VehicleMetrics::default()
                            })
                            .collisions += 1;
                    }
                }
                _ => {}
            }
        }
        i = j;
    }

    MetricsReport {
        vehicles: rows.into_values().collect(),
        fleet_collisions,
    }
}

pub const CSV_HEADER: &str = "station_id,collisions,full_stops,wait_steps,goals_reached,\
cycles_completed,cam_sent,denm_sent,cpm_sent,mcm_sent,ack_mcm_sent,mean_intersection_wait";

pub fn to_csv(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut write_row = |label: String, m: &VehicleMetrics| {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3}\n",
            label,
            m.collisions,
            m.full_stops,
            m.wait_steps,
            m.goals_reached,
            m.cycles_completed,
            m.cam_sent,
            m.denm_sent,
            m.cpm_sent,
            m.mcm_sent,
            m.ack_mcm_sent,
            m.mean_intersection_wait()
        ));
    };
    for v in &report.vehicles {
        write_row(v.station_id.to_string(), v);
    }
    write_row("fleet".to_string(), &report.fleet_row());
    out
}
