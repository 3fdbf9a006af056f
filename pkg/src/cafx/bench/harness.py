"""Timing, 50 ms resident-memory sampling, and CSV reports."""
from __future__ import annotations

import csv
import os
import resource
import statistics
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

SAMPLE_INTERVAL_S = 0.05
CSV_FIELDS = ("benchmark", "param_string", "workers", "run_index", "wall_clock_ms",
              "peak_rss_bytes", "checksum")


# -- memory probes -----------------------------------------------------------
class ProcStatmProbe:
    """Resident set size from /proc/self/statm (Linux)."""

    path = "/proc/self/statm"

    def __init__(self):
        self._page = os.sysconf("SC_PAGE_SIZE")

    @classmethod
    def available(cls) -> bool:
        return os.path.exists(cls.path)

    def rss_bytes(self) -> int:
        with open(self.path, "rb") as f:
            return int(f.read().split()[1]) * self._page


class NullProbe:
    def rss_bytes(self) -> int | None:
        return None


def default_probe():
    return ProcStatmProbe() if ProcStatmProbe.available() else NullProbe()


def max_rss_bytes() -> int:
    """Process-lifetime peak RSS as reported by getrusage (KiB on Linux)."""
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024


class MemorySampler:
    def __init__(self, probe=None, interval: float = SAMPLE_INTERVAL_S):
        self.probe = probe if probe is not None else default_probe()
        self.interval = interval
        self.samples: list[tuple[float, int]] = []
        self._stop = threading.Event()
        self._thread = None
        self._t0 = 0.0

    def _take(self):
        rss = self.probe.rss_bytes()
        if rss is not None:
            self.samples.append(((time.perf_counter() - self._t0) * 1000.0, rss))

    def _run(self):
        while not self._stop.wait(self.interval):
            self._take()

    def __enter__(self):
        self._t0 = time.perf_counter()
        self._take()
        self._thread = threading.Thread(target=self._run, name="cafx-rss-sampler", daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        self._thread.join()
        self._take()

    @property
    def peak(self) -> int:
        return max((r for _, r in self.samples), default=0)


@dataclass
class BenchReport:
    benchmark: str
    params: dict
    workers: int
    run_index: int
    wall_clock_ms: float
    checksum: int
    memory_samples: list = field(default_factory=list)
    peak_rss_bytes: int = 0

    @property
    def param_string(self) -> str:
        return " ".join(f"{k}={v}" for k, v in self.params.items())

    def row(self) -> dict:
        return {"benchmark": self.benchmark, "param_string": self.param_string,
                "workers": self.workers, "run_index": self.run_index,
                "wall_clock_ms": f"{self.wall_clock_ms:.3f}",
                "peak_rss_bytes": self.peak_rss_bytes, "checksum": self.checksum}


def measure(name: str, fn, params: dict, workers: int, run_index: int = 0,
            probe=None) -> BenchReport:
    """Run ``fn()`` (which returns the checksum) under the clock and the sampler."""
    with MemorySampler(probe) as sampler:
        t0 = time.perf_counter()
        checksum = fn()
        wall = (time.perf_counter() - t0) * 1000.0
    return BenchReport(name, params, workers, run_index, wall, int(checksum),
                       sampler.samples, sampler.peak)


def repeat(name: str, fn, params: dict, workers: int, runs: int, probe=None) -> list[BenchReport]:
    return [measure(name, fn, params, workers, i, probe) for i in range(runs)]


def summarize(reports: list[BenchReport]) -> str:
    walls = [r.wall_clock_ms for r in reports]
    sd = statistics.stdev(walls) if len(walls) > 1 else 0.0
    sums = {r.checksum for r in reports}
    check = reports[0].checksum if len(sums) == 1 else f"INCONSISTENT {sorted(sums)}"
    peak = max(r.peak_rss_bytes for r in reports) / 2**20
    return (f"{reports[0].benchmark} [{reports[0].param_string}] workers={reports[0].workers} "
            f"runs={len(reports)}: mean {statistics.fmean(walls):.1f} ms (sd {sd:.1f}), "
            f"peak rss {peak:.1f} MiB, checksum {check}")


def write_csv(path, reports: list[BenchReport]) -> None:
    """Append one row per run; the last run's memory series goes to ``<benchmark>.mem.csv``."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as f:
        w = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        if new:
            w.writeheader()
        for r in reports:
            w.writerow(r.row())
    if reports:
        last = reports[-1]
        mem = path.with_name(f"{last.benchmark}.mem.csv")
        with mem.open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(("t_ms", "rss_bytes"))
            for t, rss in last.memory_samples:
                w.writerow((f"{t:.1f}", rss))
