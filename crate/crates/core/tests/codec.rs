//! Wire conformance for the five cooperation messages: golden byte fixtures
//! (generated by an independent field-by-field serializer, see
//! `golden/make_golden.py`), structured round-trips, and rejection of
//! corrupted frames.

use iavsim_core::wire::{
    codes, decode, encode, AckMcmMessage, CamMessage, CodecError, CpmMessage, DenmMessage,
    ItsPduHeader, ManagementContainer, ManeuverContainer, McmMessage, Message,
    PerceivedObjectRecord, SensorInformation, SituationContainer, ACK_MCM_SIZE, CAM_SIZE,
    CPM_BASE_SIZE, CPM_RECORD_SIZE, DENM_SIZE, MCM_SIZE,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unhex(text: &str) -> Vec<u8> {
    let text = text.trim();
    (0..text.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&text[i..i + 2], 16).unwrap())
        .collect()
}

fn golden_cam() -> (Message, Vec<u8>) {
    let msg = Message::Cam(CamMessage {
        header: ItsPduHeader::new(codes::message_id::CAM, 42),
        generation_time: 1000,
        station_type: codes::station_type::IAV,
        position: [1.5, -3.0],
    });
    (msg, unhex(include_str!("golden/cam.hex")))
}

fn golden_denm() -> (Message, Vec<u8>) {
    let msg = Message::Denm(DenmMessage {
        header: ItsPduHeader::new(codes::message_id::DENM, 7),
        message_type: codes::denm_type::TRIGGER,
        station_type: codes::station_type::IAV,
        management: ManagementContainer {
            detection_time: 1234,
            distance: 0.5,
            validity_duration: 30,
        },
        situation: SituationContainer {
            cause_code: codes::cause::COLLISION_RISK,
            sub_cause_code: codes::collision_sub_cause::LONGITUDINAL,
            information_quality: codes::information_quality::LOWEST,
        },
    });
    (msg, unhex(include_str!("golden/denm.hex")))
}

fn golden_cpm() -> (Message, Vec<u8>) {
    let msg = Message::Cpm(CpmMessage {
        header: ItsPduHeader::new(codes::message_id::CPM, 3),
        generation_time: 500,
        station_type: codes::station_type::IAV,
        position: [10.0, 2.5],
        sensor_information: SensorInformation {
            sensor_type: codes::sensor_type::LIDAR,
            confidence: codes::sensor_confidence::HIGH,
        },
        perceived_objects: vec![PerceivedObjectRecord {
            object_id: codes::object_class::OBJECT,
            distance: 2.0,
            acceleration: 0.0,
            yaw_angle: -90.0,
        }],
    });
    (msg, unhex(include_str!("golden/cpm.hex")))
}

fn golden_mcm() -> (Message, Vec<u8>) {
    let msg = Message::Mcm(McmMessage {
        header: ItsPduHeader::new(codes::message_id::MCM, 9),
        generation_time: 250,
        station_type: codes::station_type::IAV,
        position: [45.0, 1.0],
        maneuver: ManeuverContainer {
            id_intersection: 2,
            direction: codes::direction::LEFT,
        },
    });
    (msg, unhex(include_str!("golden/mcm.hex")))
}

fn golden_ack() -> (Message, Vec<u8>) {
    let msg = Message::AckMcm(AckMcmMessage {
        header: ItsPduHeader::new(codes::message_id::ACK_MCM, 5),
        generation_time: 251,
        station_type: codes::station_type::IAV,
        position: [0.25, 100.0],
        station_type_destinator: codes::station_type::IAV,
        station_id_destinator: 9,
        maneuver: ManeuverContainer {
            id_intersection: 2,
            direction: codes::direction::LEFT,
        },
        ack_mcm_response: true,
    });
    (msg, unhex(include_str!("golden/ack_mcm.hex")))
}

fn all_goldens() -> Vec<(Message, Vec<u8>)> {
    vec![
        golden_cam(),
        golden_denm(),
        golden_cpm(),
        golden_mcm(),
        golden_ack(),
    ]
}

#[test]
fn golden_frames_encode_to_the_reference_bytes() {
    for (msg, bytes) in all_goldens() {
        assert_eq!(encode(&msg).unwrap(), bytes, "{:?}", msg.message_id());
    }
}

#[test]
fn golden_frames_decode_to_the_reference_structs() {
    for (msg, bytes) in all_goldens() {
        assert_eq!(decode(&bytes).unwrap(), msg, "{:?}", msg.message_id());
    }
}

#[test]
fn encoded_lengths_follow_the_size_constants() {
    let (cam, _) = golden_cam();
    let (denm, _) = golden_denm();
    let (mcm, _) = golden_mcm();
    let (ack, _) = golden_ack();
    assert_eq!(encode(&cam).unwrap().len(), CAM_SIZE);
    assert_eq!(encode(&denm).unwrap().len(), DENM_SIZE);
    assert_eq!(encode(&mcm).unwrap().len(), MCM_SIZE);
    assert_eq!(encode(&ack).unwrap().len(), ACK_MCM_SIZE);
    let (cpm, _) = golden_cpm();
    let Message::Cpm(mut inner) = cpm else {
        unreachable!()
    };
    for n in [0usize, 1, 4] {
        inner.perceived_objects = (0..n)
            .map(|i| PerceivedObjectRecord {
                object_id: (i % 4) as u8,
                distance: i as f64,
                acceleration: 0.0,
                yaw_angle: 10.0 * i as f64,
            })
            .collect();
        let bytes = encode(&Message::Cpm(inner.clone())).unwrap();
        assert_eq!(bytes.len(), CPM_BASE_SIZE + n * CPM_RECORD_SIZE);
    }
}

#[test]
fn the_code_tables_hold_their_wire_values() {
    assert_eq!(
        [
            codes::message_id::CAM,
            codes::message_id::DENM,
            codes::message_id::CPM,
            codes::message_id::MCM,
            codes::message_id::ACK_MCM,
        ],
        [1, 2, 3, 4, 5]
    );
    assert_eq!(
        [
            codes::station_type::UNKNOWN,
            codes::station_type::PEDESTRIAN,
            codes::station_type::IAV,
            codes::station_type::BEACON,
        ],
        [0, 1, 2, 3]
    );
    assert_eq!(
        [
            codes::denm_type::TRIGGER,
            codes::denm_type::UPDATE,
            codes::denm_type::TERMINATE,
        ],
        [1, 2, 3]
    );
    assert_eq!(
        [
            codes::cause::TRAFFIC_CONDITION,
            codes::cause::ACCIDENT,
            codes::cause::SLOW_VEHICLE,
            codes::cause::COLLISION_RISK,
        ],
        [1, 2, 26, 97]
    );
    assert_eq!(
        [
            codes::collision_sub_cause::UNAVAILABLE,
            codes::collision_sub_cause::LONGITUDINAL,
            codes::collision_sub_cause::CROSSING,
            codes::collision_sub_cause::LATERAL,
            codes::collision_sub_cause::VULNERABLE_USER,
        ],
        [0, 1, 2, 3, 4]
    );
    assert_eq!(
        [
            codes::object_class::UNKNOWN,
            codes::object_class::PEDESTRIAN,
            codes::object_class::IAV,
            codes::object_class::OBJECT,
        ],
        [0, 1, 2, 3]
    );
    assert_eq!(
        [
            codes::direction::STRAIGHT,
            codes::direction::LEFT,
            codes::direction::RIGHT,
        ],
        [0, 1, 2]
    );
}

// --- corrupted frames ------------------------------------------------------

#[test]
fn every_truncation_is_rejected_as_truncated() {
    for (_, bytes) in all_goldens() {
        for n in 0..bytes.len() {
            match decode(&bytes[..n]) {
                Err(CodecError::Truncated { .. }) => {}
                other => panic!("prefix of {n} bytes gave {other:?}"),
            }
        }
    }
}

#[test]
fn trailing_bytes_are_rejected() {
    for (_, bytes) in all_goldens() {
        let mut long = bytes.clone();
        long.push(0);
        match decode(&long) {
            Err(CodecError::TrailingBytes { extra: 1 }) => {}
            other => panic!("padded frame gave {other:?}"),
        }
    }
}

#[test]
fn unknown_ids_and_versions_are_rejected() {
    for (_, bytes) in all_goldens() {
        let mut bad = bytes.clone();
        bad[0] = 2;
        assert!(decode(&bad).is_err(), "protocol version 2 accepted");
        let mut bad = bytes.clone();
        bad[1] = 0;
        assert!(matches!(decode(&bad), Err(CodecError::UnknownMessageId(0))));
        let mut bad = bytes.clone();
        bad[1] = 6;
        assert!(matches!(decode(&bad), Err(CodecError::UnknownMessageId(6))));
    }
}

/// Flip each enumerated code byte just past its top value and expect the
/// decoder to name the field.
#[test]
fn out_of_range_code_bytes_are_rejected_by_field() {
    let cases: Vec<(&str, Vec<u8>, usize, u8, &str)> = vec![
        ("cam", golden_cam().1, 8, 4, "station_type"),
        ("denm type", golden_denm().1, 6, 4, "message_type"),
        ("denm type zero", golden_denm().1, 6, 0, "message_type"),
        ("denm cause", golden_denm().1, 28, 3, "cause_code"),
        ("denm sub", golden_denm().1, 29, 5, "sub_cause_code"),
        ("denm quality", golden_denm().1, 30, 8, "information_quality"),
        ("cpm sensor", golden_cpm().1, 25, 2, "sensor_type"),
        ("cpm confidence", golden_cpm().1, 26, 4, "sensor_confidence"),
        ("cpm object class", golden_cpm().1, 28, 4, "object_id"),
        ("mcm direction", golden_mcm().1, 26, 3, "direction"),
        ("ack dest type", golden_ack().1, 25, 4, "station_type_destinator"),
        ("ack direction", golden_ack().1, 31, 3, "direction"),
    ];
    for (label, mut bytes, offset, value, field) in cases {
        bytes[offset] = value;
        match decode(&bytes) {
            Err(CodecError::BadEnum { field: f, value: v }) => {
                assert_eq!((f, v), (field, value), "{label}");
            }
            other => panic!("{label}: expected BadEnum({field}), got {other:?}"),
        }
    }
}

#[test]
fn ack_response_byte_accepts_only_zero_and_one() {
    let (_, bytes) = golden_ack();
    for value in [2u8, 7, 255] {
        let mut bad = bytes.clone();
        bad[32] = value;
        assert!(decode(&bad).is_err(), "response byte {value} accepted");
    }
    let mut ok = bytes.clone();
    ok[32] = 0;
    match decode(&ok).unwrap() {
        Message::AckMcm(m) => assert!(!m.ack_mcm_response),
        other => panic!("{other:?}"),
    }
}

// --- bulk fuzz -------------------------------------------------------------

/// Random byte soup must never panic the decoder; whatever it does accept
/// must re-encode to exactly the bytes it came from.
#[test]
fn a_hundred_thousand_random_frames_never_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DEC);
    let mut accepted = 0u32;
    for _ in 0..100_000 {
        let len = rng.gen_range(0..=64usize);
        let mut buf = vec![0u8; len];
        rng.fill(&mut buf[..]);
        if let Ok(msg) = decode(&buf) {
            accepted += 1;
            assert_eq!(encode(&msg).unwrap(), buf);
        }
    }
    // raw noise essentially never forms a valid frame
    assert!(accepted < 100);
}

/// Single-byte corruptions of valid frames: never a panic, and any mutation
/// the decoder lets through must be canonical (re-encodes to the same bytes).
#[test]
fn mutated_valid_frames_decode_canonically_or_fail() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBADBEEF);
    let goldens = all_goldens();
    for _ in 0..100_000 {
        let (_, bytes) = &goldens[rng.gen_range(0..goldens.len())];
        let mut buf = bytes.clone();
        let at = rng.gen_range(0..buf.len());
        buf[at] = buf[at].wrapping_add(rng.gen_range(1..=255u8));
        if let Ok(msg) = decode(&buf) {
            assert_eq!(encode(&msg).unwrap(), buf, "mutation at {at}");
        }
    }
}

// --- structured round-trips ------------------------------------------------

fn arb_header(id: u8) -> impl Strategy<Value = ItsPduHeader> {
    any::<u32>().prop_map(move |sid| ItsPduHeader::new(id, sid))
}

fn arb_position() -> impl Strategy<Value = [f64; 2]> {
    prop::array::uniform2(-1.0e6..1.0e6f64)
}

proptest! {
    #[test]
    fn cam_roundtrips(
        header in arb_header(codes::message_id::CAM),
        generation_time in any::<u16>(),
        station_type in 0u8..=3,
        position in arb_position(),
    ) {
        let msg = Message::Cam(CamMessage { header, generation_time, station_type, position });
        prop_assert_eq!(decode(&encode(&msg).unwrap()).unwrap(), msg);
    }

    #[test]
    fn denm_roundtrips(
        header in arb_header(codes::message_id::DENM),
        message_type in 1u8..=3,
        station_type in 0u8..=3,
        detection_time in any::<u64>(),
        distance in 0.0..1.0e6f64,
        validity_duration in any::<u32>(),
        cause_code in prop_oneof![Just(1u8), Just(2), Just(26), Just(97)],
        sub_cause_code in 0u8..=4,
        information_quality in 0u8..=7,
    ) {
        let msg = Message::Denm(DenmMessage {
            header,
            message_type,
            station_type,
            management: ManagementContainer { detection_time, distance, validity_duration },
            situation: SituationContainer { cause_code, sub_cause_code, information_quality },
        });
        prop_assert_eq!(decode(&encode(&msg).unwrap()).unwrap(), msg);
    }

    #[test]
    fn denm_sub_cause_is_free_outside_collision_risk(
        header in arb_header(codes::message_id::DENM),
        cause_code in prop_oneof![Just(1u8), Just(2), Just(26)],
        sub_cause_code in any::<u8>(),
    ) {
        let msg = Message::Denm(DenmMessage {
            header,
            message_type: codes::denm_type::TRIGGER,
            station_type: codes::station_type::IAV,
            management: ManagementContainer {
                detection_time: 0,
                distance: 1.0,
                validity_duration: 30,
            },
            situation: SituationContainer {
                cause_code,
                sub_cause_code,
                information_quality: 5,
            },
        });
        prop_assert_eq!(decode(&encode(&msg).unwrap()).unwrap(), msg);
    }

    #[test]
    fn cpm_roundtrips(
        header in arb_header(codes::message_id::CPM),
        generation_time in any::<u16>(),
        station_type in 0u8..=3,
        position in arb_position(),
        sensor_type in 0u8..=1,
        confidence in 0u8..=3,
        objects in prop::collection::vec(
            (0u8..=3, 0.0..1.0e4f64, -1.0e3..1.0e3f64, -179.0..180.0f64),
            0..8,
        ),
    ) {
        let perceived_objects = objects
            .into_iter()
            .map(|(object_id, distance, acceleration, yaw_angle)| PerceivedObjectRecord {
                object_id,
                distance,
                acceleration,
                yaw_angle,
            })
            .collect();
        let msg = Message::Cpm(CpmMessage {
            header,
            generation_time,
            station_type,
            position,
            sensor_information: SensorInformation { sensor_type, confidence },
            perceived_objects,
        });
        prop_assert_eq!(decode(&encode(&msg).unwrap()).unwrap(), msg);
    }

    #[test]
    fn mcm_roundtrips(
        header in arb_header(codes::message_id::MCM),
        generation_time in any::<u16>(),
        station_type in 0u8..=3,
        position in arb_position(),
        id_intersection in any::<u8>(),
        direction in 0u8..=2,
    ) {
        let msg = Message::Mcm(McmMessage {
            header,
            generation_time,
            station_type,
            position,
            maneuver: ManeuverContainer { id_intersection, direction },
        });
        prop_assert_eq!(decode(&encode(&msg).unwrap()).unwrap(), msg);
    }

    #[test]
    fn ack_mcm_roundtrips(
        header in arb_header(codes::message_id::ACK_MCM),
        generation_time in any::<u16>(),
        station_type in 0u8..=3,
        position in arb_position(),
        station_type_destinator in 0u8..=3,
        station_id_destinator in any::<u32>(),
        id_intersection in any::<u8>(),
        direction in 0u8..=2,
        ack_mcm_response in any::<bool>(),
    ) {
        let msg = Message::AckMcm(AckMcmMessage {
            header,
            generation_time,
            station_type,
            position,
            station_type_destinator,
            station_id_destinator,
            maneuver: ManeuverContainer { id_intersection, direction },
            ack_mcm_response,
        });
        prop_assert_eq!(decode(&encode(&msg).unwrap()).unwrap(), msg);
    }
}

/// Deterministic volume pass: a hundred thousand structured frames drawn from
/// a seeded generator, each encoded and decoded back.
#[test]
fn structured_frames_roundtrip_in_bulk() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    for i in 0..100_000u32 {
        let kind = (i % 5) + 1;
        let sid = rng.gen::<u32>();
        let pos = [rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)];
        let gen_time = rng.gen::<u16>();
        let msg = match kind as u8 {
            codes::message_id::CAM => Message::Cam(CamMessage {
                header: ItsPduHeader::new(codes::message_id::CAM, sid),
                generation_time: gen_time,
                station_type: rng.gen_range(0..=3),
                position: pos,
            }),
            codes::message_id::DENM => Message::Denm(DenmMessage {
                header: ItsPduHeader::new(codes::message_id::DENM, sid),
                message_type: rng.gen_range(1..=3),
                station_type: rng.gen_range(0..=3),
                management: ManagementContainer {
                    detection_time: rng.gen(),
                    distance: rng.gen_range(0.0..50.0),
                    validity_duration: rng.gen(),
                },
                situation: SituationContainer {
                    cause_code: [1, 2, 26, 97][rng.gen_range(0..4)],
                    sub_cause_code: rng.gen_range(0..=4),
                    information_quality: rng.gen_range(0..=7),
                },
            }),
            codes::message_id::CPM => {
                let n = rng.gen_range(0..5);
                Message::Cpm(CpmMessage {
                    header: ItsPduHeader::new(codes::message_id::CPM, sid),
                    generation_time: gen_time,
                    station_type: rng.gen_range(0..=3),
                    position: pos,
                    sensor_information: SensorInformation {
                        sensor_type: rng.gen_range(0..=1),
                        confidence: rng.gen_range(0..=3),
                    },
                    perceived_objects: (0..n)
                        .map(|_| PerceivedObjectRecord {
                            object_id: rng.gen_range(0..=3),
                            distance: rng.gen_range(0.0..30.0),
                            acceleration: rng.gen_range(-5.0..5.0),
                            yaw_angle: rng.gen_range(-179.0..180.0),
                        })
                        .collect(),
                })
            }
            codes::message_id::MCM => Message::Mcm(McmMessage {
                header: ItsPduHeader::new(codes::message_id::MCM, sid),
                generation_time: gen_time,
                station_type: rng.gen_range(0..=3),
                position: pos,
                maneuver: ManeuverContainer {
                    id_intersection: rng.gen(),
                    direction: rng.gen_range(0..=2),
                },
            }),
            _ => Message::AckMcm(AckMcmMessage {
                header: ItsPduHeader::new(codes::message_id::ACK_MCM, sid),
                generation_time: gen_time,
                station_type: rng.gen_range(0..=3),
                position: pos,
                station_type_destinator: rng.gen_range(0..=3),
                station_id_destinator: rng.gen(),
                maneuver: ManeuverContainer {
                    id_intersection: rng.gen(),
                    direction: rng.gen_range(0..=2),
                },
                ack_mcm_response: rng.gen(),
            }),
        };
        let bytes = encode(&msg).unwrap();
        assert_eq!(decode(&bytes).unwrap(), msg);
    }
}
