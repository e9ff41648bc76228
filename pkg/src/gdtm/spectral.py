"""Frequency-domain checks on rollouts and attention time histories."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

PSD_HEADER = ["frequency_hz", "power"]
SPECTROGRAM_HEADER = ["frame_time_s", "frequency_hz", "magnitude"]
ATTENTION_HEADER = ["step", "time_s", "label", "source", "target", "type", "direction", "alpha"]


def psd(series, fs=100.0, segment_length=256, overlap_fraction=0.5):
    """One-sided Welch PSD with a Hann window; returns ``(frequencies, power)``."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("psd expects a 1-D series")
    if len(x) < segment_length:
        raise ValueError(f"series of length {len(x)} shorter than segment {segment_length}")
    if not 0 <= overlap_fraction < 1:
        raise ValueError("overlap_fraction must be in [0, 1)")
    noverlap = int(round(segment_length * overlap_fraction))
    return sps.welch(x, fs=fs, window="hann", nperseg=segment_length, noverlap=noverlap,
                     detrend=False, return_onesided=True, scaling="density")


@dataclass(frozen=True)
class Spectrogram:
    frame_times: np.ndarray
    frequencies: np.ndarray
    magnitudes: np.ndarray
    window: tuple = ("hann", 0, 0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SPECTROGRAM_HEADER)
            for t, row in zip(self.frame_times, self.magnitudes):
                for f, mag in zip(self.frequencies, row):
                    w.writerow([repr(float(t)), repr(float(f)), repr(float(mag))])


def stft(series, fs=100.0, window_length=256, hop=128) -> Spectrogram:
    """Hann-windowed sliding FFT magnitudes, no padding.

    Frame ``k`` covers samples ``[k * hop, k * hop + window_length)`` and is
    stamped at its centre.
    """
    x = np.asarray(series, dtype=float)
    if window_length < 1 or hop < 1:
        raise ValueError("window_length and hop must be >= 1")
    if window_length > len(x):
        raise ValueError(f"window {window_length} longer than series {len(x)}")
    frames = np.lib.stride_tricks.sliding_window_view(x, window_length)[::hop]
    win = sps.get_window("hann", window_length)
    mags = np.abs(np.fft.rfft(frames * win, axis=-1))
    freqs = np.fft.rfftfreq(window_length, 1.0 / fs)
    times = (np.arange(len(frames)) * hop + window_length / 2) / fs
    return Spectrogram(times, freqs, mags, ("hann", window_length, hop))


def write_psd_csv(frequencies, power, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PSD_HEADER)
        for f, p in zip(frequencies, power):
            w.writerow([repr(float(f)), repr(float(p))])


def read_psd_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != PSD_HEADER:
            raise ValueError(f"{path}: header must be {PSD_HEADER}")
        data = np.array([row for row in reader if row], dtype=float).reshape(-1, 2)
    return data[:, 0], data[:, 1]


@dataclass(frozen=True)
class AttentionEdge:
    source: int
    target: int
    type_label: int
    direction: str

    @property
    def label(self) -> str:
        return f"t{self.type_label}:{self.source}->{self.target}:{self.direction}"


@dataclass
class AttentionHistory:
    """Attention of ``source`` on ``target`` per rollout step, one series per directed edge."""

    edges: list
    series: np.ndarray
    dt: float = 1.0
    labels: list = field(init=False)

    def __post_init__(self):
        self.labels = [e.label for e in self.edges]

    def __getitem__(self, label):
        return self.series[self.labels.index(label)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ATTENTION_HEADER)
            for step in range(self.series.shape[1]):
                for e, s in zip(self.edges, self.series):
                    w.writerow([step, repr(step * self.dt), e.label, e.source, e.target,
                                e.type_label, e.direction, repr(float(s[step]))])


def _edge_catalog(graph):
    out = []
    for e in graph.edges:
        lo, hi = min(e.i, e.j), max(e.i, e.j)
        out.append(AttentionEdge(lo, hi, e.type_label, "forward"))
        out.append(AttentionEdge(hi, lo, e.type_label, "backward"))
    for v in range(graph.vertex_count):
        out.append(AttentionEdge(v, v, -1, "self"))
    return out


def extract_attention_history(attention, graph, selector="all", dt=1.0) -> AttentionHistory:
    """Pull per-step ``alpha`` series out of a ``T x V x V`` capture.

    ``selector`` is ``"all"``, ``"self"``, an edge type label (int), or a
    list of ``(source, target)`` pairs. Both directions of an edge are
    distinct series: ``forward`` runs from the lower to the higher index.
    """
    att = np.asarray(attention, dtype=float)
    if att.ndim != 3 or att.shape[1:] != (graph.vertex_count, graph.vertex_count):
        raise ValueError(f"attention capture {att.shape} does not match the graph")
    catalog = _edge_catalog(graph)
    if isinstance(selector, str) and selector == "all":
        chosen = catalog
    elif isinstance(selector, str) and selector == "self":
        chosen = [e for e in catalog if e.direction == "self"]
    elif isinstance(selector, (int, np.integer)):
        chosen = [e for e in catalog if e.type_label == selector]
    else:
        pairs = {tuple(p) for p in selector}
        chosen = [e for e in catalog if (e.source, e.target) in pairs]
    if not chosen:
        raise ValueError(f"selector {selector!r} matches no edge")
    series = np.stack([att[:, e.source, e.target] for e in chosen])
    return AttentionHistory(chosen, series, dt)
