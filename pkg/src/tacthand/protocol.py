"""Command/telemetry surface of the hand: a line-oriented console grammar
and a compact binary telemetry frame.

Console grammar (keywords case-insensitive):

    grasp <name> [speed <0..1>]
    stop
    mode <finger> <pos|vel|cur>
    set <finger> <value>
    state
    param <path> <value>

Binary frame, little-endian, 82 bytes:

    magic 0xA5 0x5A | u16 seq | u32 t_ms |
    6 x (f32 angle_rad, f32 current_A, f32 force_N) | u16 crc

with CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection) over all
preceding bytes. Values are quantized to f32 at frame construction so
decode(encode(frame)) == frame exactly.
"""

import struct
from dataclasses import dataclass, field

MAGIC = b"\xa5\x5a"
FRAME_SIZE = 2 + 2 + 4 + 6 * 12 + 2
TELEMETRY_PERIOD_S = 0.1
N_UNITS = 6

CANONICAL_GRASPS = ("Tripod", "PowerSphere", "Thumb2Finger", "LateralPinch",
                    "MediumWrap", "Pinch", "Edge")


class ParseError(ValueError):
    def __init__(self, offset: int, expected: str):
        super().__init__(f"at byte {offset}: expected {expected}")
        self.offset = offset
        self.expected = expected


@dataclass(frozen=True)
class ExecuteGrasp:
    name: str
    global_speed: float = 1.0


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class SetMode:
    finger: int
    mode: str  # "pos" | "vel" | "cur"


@dataclass(frozen=True)
class SetSetpoint:
    finger: int
    value: float


@dataclass(frozen=True)
class QueryState:
    pass


@dataclass(frozen=True)
class SetParam:
    path: str
    value: float


def _tokenize(line: str):
    """Tokens with their byte offsets."""
    tokens = []
    i = 0
    n = len(line)
    while i < n:
        if line[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not line[j].isspace():
            j += 1
        tokens.append((line[i:j], i))
        i = j
    return tokens


class _Cursor:
    def __init__(self, line, tokens):
        self.line = line
        self.tokens = tokens
        self.k = 0

    def next(self, expected):
        if self.k >= len(self.tokens):
            raise ParseError(len(self.line.rstrip("\r\n")), expected)
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def done(self):
        if self.k < len(self.tokens):
            tok, off = self.tokens[self.k]
            raise ParseError(off, "end of command")


def _parse_float(tok, off, expected, lo=None, hi=None, lo_open=False):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(off, expected) from None
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ParseError(off, expected)
    if hi is not None and v > hi:
        raise ParseError(off, expected)
    return v


def _parse_finger(tok, off):
    try:
        v = int(tok)
    except ValueError:
        raise ParseError(off, "finger index 0..5") from None
    if not (0 <= v <= 5):
        raise ParseError(off, "finger index 0..5")
    return v


def parse_console(line: str):
    """Parse one console line into a command. Raises ParseError with the
    byte offset of the failure."""
    if len(line.encode()) > 256:
        raise ParseError(256, "line of at most 256 bytes")
    tokens = _tokenize(line.rstrip("\r\n"))
    cur = _Cursor(line, tokens)
    word, off = cur.next("a command keyword")
    kw = word.lower()

    if kw == "grasp":
        name, noff = cur.next("a grasp name")
        for canonical in CANONICAL_GRASPS:
            if name.lower() == canonical.lower():
                name = canonical
                break
        speed = 1.0
        if cur.k < len(cur.tokens):
            sword, soff = cur.next("'speed'")
            if sword.lower() != "speed":
                raise ParseError(soff, "'speed'")
            vtok, voff = cur.next("speed value in (0, 1]")
            speed = _parse_float(vtok, voff, "speed value in (0, 1]",
                                 lo=0.0, hi=1.0, lo_open=True)
        cur.done()
        return ExecuteGrasp(name=name, global_speed=speed)

    if kw == "stop":
        cur.done()
        return Stop()

    if kw == "mode":
        ftok, foff = cur.next("finger index 0..5")
        finger = _parse_finger(ftok, foff)
        mtok, moff = cur.next("one of pos|vel|cur")
        mode = mtok.lower()
        if mode not in ("pos", "vel", "cur"):
            raise ParseError(moff, "one of pos|vel|cur")
        cur.done()
        return SetMode(finger=finger, mode=mode)

    if kw == "set":
        ftok, foff = cur.next("finger index 0..5")
        finger = _parse_finger(ftok, foff)
        vtok, voff = cur.next("a numeric setpoint")
        value = _parse_float(vtok, voff, "a numeric setpoint")
        cur.done()
        return SetSetpoint(finger=finger, value=value)

    if kw == "state":
        cur.done()
        return QueryState()

    if kw == "param":
        ptok, _ = cur.next("a parameter path")
        vtok, voff = cur.next("a numeric value")
        value = _parse_float(vtok, voff, "a numeric value")
        cur.done()
        return SetParam(path=ptok, value=value)

    raise ParseError(off, "one of grasp|stop|mode|set|state|param")


def _crc16_table():
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _crc16_table()


def crc16_ccitt_false(data: bytes) -> int:
    crc = 0xFFFF
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ b) & 0xFF]
    return crc


def _f32(x: float) -> float:
    return struct.unpack("<f", struct.pack("<f", x))[0]


class BadMagic(ValueError):
    pass


class BadCrc(ValueError):
    pass


class Truncated(ValueError):
    pass


@dataclass(frozen=True)
class TelemetryFrame:
    seq: int
    t_ms: int
    angles: tuple    # rad, one per actuation unit
    currents: tuple  # A
    forces: tuple    # N (0.0 where the unit has no taxel)

    def __post_init__(self):
        for name in ("angles", "currents", "forces"):
            vals = getattr(self, name)
            if len(vals) != N_UNITS:
                raise ValueError(f"{name} must have {N_UNITS} entries")
            object.__setattr__(self, name, tuple(_f32(v) for v in vals))
        object.__setattr__(self, "seq", self.seq & 0xFFFF)
        object.__setattr__(self, "t_ms", self.t_ms & 0xFFFFFFFF)


def encode_frame(f: TelemetryFrame) -> bytes:
    body = bytearray(MAGIC)
    body += struct.pack("<HI", f.seq, f.t_ms)
    for i in range(N_UNITS):
        body += struct.pack("<fff", f.angles[i], f.currents[i], f.forces[i])
    body += struct.pack("<H", crc16_ccitt_false(bytes(body)))
    return bytes(body)


def decode_frame(data: bytes) -> TelemetryFrame:
    if len(data) < FRAME_SIZE:
        raise Truncated(f"{len(data)} bytes, need {FRAME_SIZE}")
    if data[:2] != MAGIC:
        raise BadMagic(data[:2].hex())
    (crc_wire,) = struct.unpack_from("<H", data, FRAME_SIZE - 2)
    if crc16_ccitt_false(data[:FRAME_SIZE - 2]) != crc_wire:
        raise BadCrc(f"crc mismatch")
    seq, t_ms = struct.unpack_from("<HI", data, 2)
    angles, currents, forces = [], [], []
    off = 8
    for _ in range(N_UNITS):
        a, c, fo = struct.unpack_from("<fff", data, off)
        angles.append(a)
        currents.append(c)
        forces.append(fo)
        off += 12
    return TelemetryFrame(seq=seq, t_ms=t_ms, angles=tuple(angles),
                          currents=tuple(currents), forces=tuple(forces))


TELEMETRY_CSV_HEADER = ("seq,t_ms,"
                        + ",".join(f"angle{i}_rad,current{i}_A,force{i}_N"
                                   for i in range(N_UNITS)))


def frame_to_csv(f: TelemetryFrame) -> str:
    cells = [str(f.seq), str(f.t_ms)]
    for i in range(N_UNITS):
        cells += [repr(f.angles[i]), repr(f.currents[i]), repr(f.forces[i])]
    return ",".join(cells)


class TelemetryScheduler:
    """Emits one frame per 100 ms of simulation time. Must be polled at
    least once per period (the hand loop polls every outer tick)."""

    def __init__(self, period_s: float = TELEMETRY_PERIOD_S):
        self.period_s = period_s
        self.seq = 0

    def tick(self, t_sim: float, snapshot):
        """snapshot() -> (angles, currents, forces); returns a frame when
        one is due at t_sim, else None."""
        if t_sim + 1e-12 < (self.seq + 1) * self.period_s:
            return None
        self.seq += 1
        angles, currents, forces = snapshot()
        return TelemetryFrame(seq=self.seq,
                              t_ms=int(round(t_sim * 1000.0)),
                              angles=tuple(angles), currents=tuple(currents),
                              forces=tuple(forces))
