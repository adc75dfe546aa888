# Independent byte-layout oracle for the golden wire fixtures.
# Serializes each message field-by-field with struct.pack, little-endian,
# in the documented field order. Run: python3 make_golden.py
import struct


def header(pv, mid, sid):
    return struct.pack("<BBI", pv, mid, sid)


def cam(sid, gen_time, station_type, x, y):
    return header(1, 1, sid) + struct.pack("<HBdd", gen_time, station_type, x, y)


def denm(sid, mtype, station_type, det_time, distance, validity, cause, sub, iq):
    return (
        header(1, 2, sid)
        + struct.pack("<BB", mtype, station_type)
        + struct.pack("<QdI", det_time, distance, validity)
        + struct.pack("<BBB", cause, sub, iq)
    )


def cpm(sid, gen_time, station_type, x, y, sensor_type, confidence, objects):
    out = header(1, 3, sid) + struct.pack("<HBdd", gen_time, station_type, x, y)
    out += struct.pack("<BBB", sensor_type, confidence, len(objects))
    for (oid, dist, accel, yaw) in objects:
        out += struct.pack("<Bddd", oid, dist, accel, yaw)
    return out


def mcm(sid, gen_time, station_type, x, y, intersection, direction):
    return (
        header(1, 4, sid)
        + struct.pack("<HBdd", gen_time, station_type, x, y)
        + struct.pack("<BB", intersection, direction)
    )


def ack_mcm(sid, gen_time, station_type, x, y, st_dest, sid_dest, intersection, direction, ack):
    return (
        header(1, 5, sid)
        + struct.pack("<HBdd", gen_time, station_type, x, y)
        + struct.pack("<BI", st_dest, sid_dest)
        + struct.pack("<BBB", intersection, direction, 1 if ack else 0)
    )


FIXTURES = {
    # station 42, t=1000ms, IAV at (1.5, -3.0)
    "cam.hex": cam(42, 1000, 2, 1.5, -3.0),
    # station 7, TRIGGER, IAV, detected step 1234, 0.5 m away, valid 30 s,
    # collision risk (97) / longitudinal (1), quality lowest (1)
    "denm.hex": denm(7, 1, 2, 1234, 0.5, 30, 97, 1, 1),
    # station 3, t=500ms, IAV at (10.0, 2.5), lidar/high confidence,
    # one perceived object: class OBJECT, 2.0 m, no accel, yaw -90
    "cpm.hex": cpm(3, 500, 2, 10.0, 2.5, 1, 3, [(3, 2.0, 0.0, -90.0)]),
    # station 9, t=250ms, IAV at (45.0, 1.0), intersection 2, LEFT
    "mcm.hex": mcm(9, 250, 2, 45.0, 1.0, 2, 1),
    # station 5 answers station 9: t=251ms, IAV at (0.25, 100.0), echo
    # intersection 2 / LEFT, response granted
    "ack_mcm.hex": ack_mcm(5, 251, 2, 0.25, 100.0, 2, 9, 2, 1, True),
}

for name, data in FIXTURES.items():
    with open(name, "w") as f:
        f.write(data.hex() + "\n")
    print(f"{name}: {len(data)} bytes: {data.hex()}")
