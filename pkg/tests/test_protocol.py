import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tacthand.protocol import (BadCrc, BadMagic, ExecuteGrasp, ParseError,
                               QueryState, SetMode, SetParam, SetSetpoint,
                               Stop, TelemetryFrame, TelemetryScheduler,
                               Truncated, crc16_ccitt_false, decode_frame,
                               encode_frame, parse_console)


def crc16_bitwise_oracle(data: bytes) -> int:
    """Bit-by-bit CRC-16/CCITT-FALSE reference."""
    crc = 0xFFFF
    for byte in data:
        for bit in range(7, -1, -1):
            make_xor = (crc >> 15) ^ ((byte >> bit) & 1)
            crc = (crc << 1) & 0xFFFF
            if make_xor:
                crc ^= 0x1021
    return crc


class TestCrc:
    def test_check_value(self):
        # standard check input for this CRC variant
        assert crc16_ccitt_false(b"123456789") == 0x29B1

    def test_matches_bitwise_oracle(self):
        import random
        rnd = random.Random(5)
        for _ in range(100):
            data = bytes(rnd.randrange(256)
                         for _ in range(rnd.randrange(1, 120)))
            assert crc16_ccitt_false(data) == crc16_bitwise_oracle(data)

    def test_zero_frame_crc_matches_oracle(self):
        f = TelemetryFrame(seq=0, t_ms=0, angles=(0.0,) * 6,
                           currents=(0.0,) * 6, forces=(0.0,) * 6)
        wire = encode_frame(f)
        (crc,) = struct.unpack_from("<H", wire, len(wire) - 2)
        assert crc == crc16_bitwise_oracle(wire[:-2])


class TestParser:
    def test_grasp_with_speed(self):
        cmd = parse_console("grasp mediumwrap speed 0.5")
        assert cmd == ExecuteGrasp(name="MediumWrap", global_speed=0.5)

    def test_grasp_defaults_full_speed(self):
        assert parse_console("GRASP Tripod") == ExecuteGrasp("Tripod", 1.0)

    def test_stop(self):
        assert parse_console("stop") == Stop()
        assert parse_console("  STOP  ") == Stop()

    def test_missing_grasp_name_offset(self):
        with pytest.raises(ParseError) as exc:
            parse_console("grasp")
        assert exc.value.offset == 5

    def test_mode_command(self):
        assert parse_console("mode 3 cur") == SetMode(finger=3, mode="cur")
        with pytest.raises(ParseError):
            parse_console("mode 9 cur")
        with pytest.raises(ParseError):
            parse_console("mode 3 warp")

    def test_set_command(self):
        assert parse_console("set 0 1.25") == SetSetpoint(0, 1.25)

    def test_state_and_param(self):
        assert parse_console("state") == QueryState()
        assert parse_console("param controller.0.omega_lim 0.5") == SetParam(
            "controller.0.omega_lim", 0.5)

    def test_speed_out_of_range(self):
        with pytest.raises(ParseError):
            parse_console("grasp Pinch speed 1.5")
        with pytest.raises(ParseError):
            parse_console("grasp Pinch speed 0")

    def test_trailing_garbage_rejected_with_offset(self):
        with pytest.raises(ParseError) as exc:
            parse_console("stop now")
        assert exc.value.offset == 5

    def test_unknown_keyword_offset(self):
        with pytest.raises(ParseError) as exc:
            parse_console("  fly away")
        assert exc.value.offset == 2

    @given(st.text(min_size=0, max_size=60))
    @settings(max_examples=300, deadline=None)
    def test_grammar_totality(self, line):
        # every input either parses or raises ParseError with a valid offset
        try:
            parse_console(line)
        except ParseError as e:
            assert 0 <= e.offset <= max(len(line.encode()), 256)


f32s = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False,
                 width=32)


class TestCodec:
    @given(seq=st.integers(0, 0xFFFF), t_ms=st.integers(0, 0xFFFFFFFF),
           vals=st.lists(f32s, min_size=18, max_size=18))
    @settings(max_examples=300, deadline=None)
    def test_roundtrip_identity(self, seq, t_ms, vals):
        f = TelemetryFrame(seq=seq, t_ms=t_ms, angles=tuple(vals[0:6]),
                           currents=tuple(vals[6:12]),
                           forces=tuple(vals[12:18]))
        assert decode_frame(encode_frame(f)) == f

    def test_single_bit_flip_detected(self):
        f = TelemetryFrame(seq=7, t_ms=1234, angles=(0.1,) * 6,
                           currents=(0.2,) * 6, forces=(0.3,) * 6)
        wire = encode_frame(f)
        for byte_i in range(2, len(wire)):  # past magic: must be BadCrc
            for bit in range(8):
                corrupted = bytearray(wire)
                corrupted[byte_i] ^= 1 << bit
                with pytest.raises(BadCrc):
                    decode_frame(bytes(corrupted))

    def test_magic_flip_is_bad_magic(self):
        f = TelemetryFrame(seq=1, t_ms=5, angles=(0.0,) * 6,
                           currents=(0.0,) * 6, forces=(0.0,) * 6)
        wire = bytearray(encode_frame(f))
        wire[0] ^= 0x01
        with pytest.raises(BadMagic):
            decode_frame(bytes(wire))

    def test_truncated(self):
        f = TelemetryFrame(seq=1, t_ms=5, angles=(0.0,) * 6,
                           currents=(0.0,) * 6, forces=(0.0,) * 6)
        with pytest.raises(Truncated):
            decode_frame(encode_frame(f)[:-1])


class TestTelemetryScheduler:
    def snapshot(self):
        return ((0.0,) * 6, (0.0,) * 6, (0.0,) * 6)

    def test_exactly_ten_frames_per_second(self):
        sched = TelemetryScheduler()
        frames = []
        dt = 1e-3
        for k in range(1000):
            f = sched.tick((k + 1) * dt, self.snapshot)
            if f:
                frames.append(f)
        assert len(frames) == 10

    def test_seq_continuity(self):
        sched = TelemetryScheduler()
        seqs = []
        for k in range(200000):
            f = sched.tick((k + 1) * 1e-3, self.snapshot)
            if f:
                seqs.append(f.seq)
        assert len(seqs) == 2000
        assert seqs == list(range(1, 2001))

    def test_rate_exactness_fractional(self):
        sched = TelemetryScheduler()
        count = 0
        t = 0.0
        while t < 2.345:
            t += 1e-3
            if sched.tick(t, self.snapshot):
                count += 1
        assert count == int(2.345 / 0.1)
