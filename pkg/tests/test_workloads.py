import io
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssdgc.errors import InvalidArgument, TraceParseError
from ssdgc.workloads import (
    SECTOR,
    Arrival,
    IoRequest,
    Op,
    Pattern,
    SyntheticSpec,
    align_to_pages,
    generate,
    parse_trace,
    replay,
    sequential_ratio,
    write_trace_csv,
)

SPACE = 8 * 10_000


def spec(**kw):
    kw.setdefault("request_count", 1000)
    return SyntheticSpec(**kw)


class TestIoRequest:
    def test_rejects_empty_and_negative(self):
        with pytest.raises(InvalidArgument):
            IoRequest(0.0, 0, 0)
        with pytest.raises(InvalidArgument):
            IoRequest(0.0, -8, 4096)

    def test_end_rounds_up_to_sector(self):
        assert IoRequest(0.0, 10, 513).end_lba == 12


class TestGenerate:
    def test_sequential_addresses(self):
        reqs = list(generate(spec(pattern="sequential", request_count=3), SPACE))
        assert [r.start_lba for r in reqs] == [0, 8, 16]

    def test_sequential_wraps(self):
        reqs = list(generate(spec(pattern="sequential", request_count=5), 24))
        assert [r.start_lba for r in reqs] == [0, 8, 16, 0, 8]

    def test_poisson_mean(self):
        reqs = list(generate(spec(request_count=100_000, seed=5), SPACE))
        gaps = [b.arrival_time - a.arrival_time for a, b in zip([IoRequest(0.0, 0, 512)] + reqs, reqs)]
        assert statistics.fmean(gaps) == pytest.approx(100.0, abs=2.0)

    def test_normal_arrivals(self):
        reqs = list(generate(spec(arrival="normal", request_count=20_000, seed=2), SPACE))
        gaps = [b.arrival_time - a.arrival_time for a, b in zip(reqs, reqs[1:])]
        assert statistics.fmean(gaps) == pytest.approx(100.0, abs=0.5)
        assert statistics.stdev(gaps) == pytest.approx(10.0, abs=0.5)
        assert min(gaps) >= 0

    def test_hybrid_is_a_fair_mix(self):
        stream = generate(spec(pattern="hybrid", request_count=100_000, seed=9), SPACE)
        n = sum(1 for _ in stream)
        assert n == 100_000
        assert stream.random_requests / n == pytest.approx(0.5, abs=0.01)
        assert stream.random_requests + stream.sequential_requests == n

    def test_random_is_uniform_and_aligned(self):
        reqs = list(generate(spec(request_count=40_000, seed=1), SPACE))
        assert all(r.start_lba % 8 == 0 and r.end_lba <= SPACE for r in reqs)
        half = sum(r.start_lba < SPACE // 2 for r in reqs) / len(reqs)
        assert half == pytest.approx(0.5, abs=0.01)

    def test_write_ratio(self):
        reqs = list(generate(spec(write_ratio=0.78, request_count=50_000, seed=4), SPACE))
        assert sum(r.is_write for r in reqs) / len(reqs) == pytest.approx(0.78, abs=0.01)
        assert all(r.is_write for r in generate(spec(), SPACE))

    @pytest.mark.parametrize("kw", [
        {"write_ratio": 1.5}, {"request_count": -1}, {"mean_interarrival": 0.0},
        {"interarrival_stddev": -1.0}, {"request_size": 1000}, {"pattern": "zipf"}, {"arrival": "uniform"},
    ])
    def test_rejects_bad_specs(self, kw):
        with pytest.raises((InvalidArgument, ValueError)):
            spec(**kw)

    def test_rejects_bad_space(self):
        with pytest.raises(InvalidArgument):
            generate(spec(), 0)
        with pytest.raises(InvalidArgument):
            generate(spec(request_size=8192), 8)

    @given(st.sampled_from(list(Pattern)), st.sampled_from(list(Arrival)), st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_reproducible_and_ordered(self, pattern, arrival, seed):
        s = spec(pattern=pattern, arrival=arrival, seed=seed, request_count=200)
        a, b = list(generate(s, SPACE)), list(generate(s, SPACE))
        assert a == b
        stream = generate(s, SPACE)
        assert list(stream) == a
        assert all(x.arrival_time <= y.arrival_time for x, y in zip(a, a[1:]))


class TestParseTrace:
    def test_spc_line(self):
        tr = parse_trace(["0,20941264,8192,W,0.551706"])
        (r,) = tr.requests
        assert r.op is Op.WRITE and r.start_lba == 20941264 and r.size == 8192
        assert r.arrival_time == pytest.approx(551.706)

    def test_empty_input(self):
        tr = parse_trace([])
        assert len(tr) == 0 and tr.filtered == 0 and tr.diagnostics == []

    def test_read_op(self):
        (r,) = parse_trace(["1,8,4096,r,1.0"]).requests
        assert r.op is Op.READ and not r.is_write

    def test_malformed_line_is_reported_with_number(self):
        tr = parse_trace(["0,8,4096,W,0.1", "garbage", "0,16,4096,X,0.2", "0,24,4096,W,0.3"])
        assert [r.start_lba for r in tr] == [8, 24]
        assert tr.diagnostics[0].startswith("line 2:")
        assert tr.diagnostics[1].startswith("line 3:")
        with pytest.raises(TraceParseError) as err:
            parse_trace(["0,8,4096,W,0.1", "garbage"], strict=True)
        assert err.value.line == 2

    def test_out_of_range_filtered(self):
        tr = parse_trace(["0,0,4096,W,0.1", "0,1000,4096,W,0.2"], logical_space=512)
        assert len(tr) == 1 and tr.filtered == 1

    def test_time_going_backwards(self):
        tr = parse_trace(["0,0,4096,W,0.2", "0,8,4096,W,0.1"])
        assert len(tr) == 1 and "backwards" in tr.diagnostics[0]

    def test_generic_csv(self):
        text = "time_ms,op,lba,bytes\n# comment\n1.5,W,16,4096\n2.0,read,24,512\n"
        tr = parse_trace(io.StringIO(text), fmt="csv")
        assert [(r.arrival_time, r.op, r.start_lba, r.size) for r in tr] == [
            (1.5, Op.WRITE, 16, 4096), (2.0, Op.READ, 24, 512)]

    def test_generic_csv_needs_header(self):
        with pytest.raises(TraceParseError):
            parse_trace(["1.5,W,16,4096"], fmt="csv")

    def test_unknown_format(self):
        with pytest.raises(InvalidArgument):
            parse_trace([], fmt="blk")

    def test_csv_round_trip(self, tmp_path):
        reqs = list(generate(spec(write_ratio=0.5, request_count=50, seed=3), SPACE))
        path = tmp_path / "t.csv"
        write_trace_csv(path, reqs)
        assert parse_trace(path.open(), fmt="csv").requests == reqs


class TestAlignment:
    def test_single_sector(self):
        (p,) = align_to_pages([IoRequest(0.0, 1, 512)])
        assert (p.start_lba, p.size) == (0, 4096)

    def test_two_aligned_pages(self):
        assert len(list(align_to_pages([IoRequest(0.0, 16, 8192)]))) == 2

    def test_financial_sized_requests_mostly_touch_one_page(self):
        reqs = [IoRequest(float(i), 8 * i, 5 * 1024 if i % 5 == 0 else 4096) for i in range(1000)]
        pages = list(align_to_pages(reqs))
        assert len(pages) / len(reqs) < 1.5

    def test_rejects_bad_page_size(self):
        with pytest.raises(InvalidArgument):
            list(align_to_pages([], 3000))

    @given(st.integers(0, 10**6), st.integers(1, 64 * 1024), st.sampled_from([512, 1024, 4096, 16384]))
    def test_never_shrinks_and_grows_under_two_pages(self, lba, size, page):
        req = IoRequest(0.0, lba, size)
        pages = list(align_to_pages([req], page))
        spp = page // SECTOR
        lo, hi = pages[0].start_lba, pages[-1].end_lba
        assert lo <= req.start_lba and hi >= req.end_lba
        assert (hi - lo) * SECTOR - size < 2 * page
        assert all(p.start_lba % spp == 0 and p.size == page for p in pages)


class TestReplay:
    BASE = [IoRequest(10.0 * i + (10.0 if i == 9 else 0.0), 8 * i, 4096) for i in range(10)]

    def test_identity(self):
        assert list(replay(self.BASE, 1)) == self.BASE

    def test_three_cycles(self):
        out = list(replay(self.BASE, 3))
        assert len(out) == 30
        assert all(a.arrival_time <= b.arrival_time for a, b in zip(out, out[1:]))
        span = self.BASE[-1].arrival_time - self.BASE[0].arrival_time
        shift = span + span / 9
        assert out[10].arrival_time - out[0].arrival_time == pytest.approx(shift)
        assert shift == pytest.approx(100.0 + 100.0 / 9)

    def test_target_total(self):
        assert sum(1 for _ in replay(self.BASE, target_total=57)) == 57

    def test_empty_base(self):
        with pytest.raises(InvalidArgument):
            list(replay([], 2))

    @given(st.lists(st.floats(0, 1000), min_size=1, max_size=30), st.integers(1, 5))
    def test_preserves_gaps_and_pattern(self, times, cycles):
        times = sorted(times)
        base = [IoRequest(t, 8 * i, 4096) for i, t in enumerate(times)]
        out = list(replay(base, cycles))
        n = len(base)
        assert len(out) == n * cycles
        for j in range(cycles):
            copy = out[j * n:(j + 1) * n]
            assert [r.start_lba for r in copy] == [r.start_lba for r in base]
            for a, b, x, y in zip(copy, copy[1:], base, base[1:]):
                assert b.arrival_time - a.arrival_time == pytest.approx(y.arrival_time - x.arrival_time, abs=1e-9)
        assert all(a.arrival_time <= b.arrival_time + 1e-9 for a, b in zip(out, out[1:]))


class TestSequentialRatio:
    def test_sequential_stream(self):
        reqs = list(generate(spec(pattern="sequential", request_count=100), SPACE))
        assert sequential_ratio(reqs) == pytest.approx(99 / 100)

    def test_empty(self):
        assert sequential_ratio([]) == 0.0
