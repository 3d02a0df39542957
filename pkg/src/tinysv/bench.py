"""Batch versus streaming latency measurement.

Latency is the wall time from end-pointing (the last sample delivered) to the
embedding being available. In batch mode the whole pipeline runs after the
end-point; in stream mode features and the sequence network consume the
audio as it arrives, optionally paced to real time, and only the tail flush
and the aggregation finalization remain.
"""

import csv
import io
import platform
import time
from dataclasses import asdict, dataclass, fields

import numpy as np


@dataclass
class BenchRecord:
    device_label: str
    mode: str
    audio_seconds: float
    latency_ms: float
    rtf: float
    runs: int


def device_label():
    try:
        with open("/proc/cpuinfo") as f:
            for line in f:
                if line.startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine()


def synthetic_audio(seconds, sample_rate=16000, seed=0):
    rng = np.random.default_rng(seed)
    n = int(round(seconds * sample_rate))
    t = np.arange(n) / sample_rate
    tone = 0.3 * np.sin(2 * np.pi * 220.0 * t) * (1 + np.sin(2 * np.pi * 3.0 * t))
    return np.clip((tone + 0.05 * rng.standard_normal(n)) * 32767, -32768, 32767).astype(np.int16)


def _run_batch(model, pcm):
    t0 = time.perf_counter()
    model.embed_batch(pcm)
    elapsed = time.perf_counter() - t0
    return elapsed, elapsed


def _run_stream(model, pcm, chunk, pacing, sample_rate):
    session = model.stream()
    busy = 0.0
    start = time.perf_counter()
    for i in range(0, len(pcm), chunk):
        if pacing:
            due = start + min(i + chunk, len(pcm)) / sample_rate
            delay = due - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
        t0 = time.perf_counter()
        session.push(pcm[i:i + chunk])
        busy += time.perf_counter() - t0
    t0 = time.perf_counter()
    session.finish()
    latency = time.perf_counter() - t0
    return latency, busy + latency


def run_bench(model, durations, modes=("batch", "stream"), runs=5, pacing=True,
              chunk_ms=100.0, label=None, seed=0):
    """One ``BenchRecord`` per (duration, mode), averaged over ``runs``."""
    label = label or device_label()
    sr = model.cfg.features.sample_rate_hz
    chunk = max(1, int(round(sr * chunk_ms / 1000.0)))
    records = []
    for seconds in durations:
        if not seconds > 0:
            raise ValueError("durations must be positive")
        pcm = synthetic_audio(seconds, sr, seed)
        for mode in modes:
            if mode == "batch":
                def once():
                    return _run_batch(model, pcm)
            elif mode == "stream":
                def once():
                    return _run_stream(model, pcm, chunk, pacing, sr)
            else:
                raise ValueError(f"unknown bench mode {mode!r}")
            once()  # warm-up
            results = [once() for _ in range(runs)]
            latency = float(np.mean([r[0] for r in results]))
            processing = float(np.mean([r[1] for r in results]))
            records.append(BenchRecord(label, mode, float(seconds), latency * 1000.0,
                                       processing / seconds, runs))
    return records


def records_to_csv(records):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=[f.name for f in fields(BenchRecord)],
                       lineterminator="\n")
    w.writeheader()
    for r in records:
        row = asdict(r)
        row["latency_ms"] = f"{r.latency_ms:.4f}"
        row["rtf"] = f"{r.rtf:.6f}"
        w.writerow(row)
    return buf.getvalue()
