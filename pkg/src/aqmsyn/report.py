"""Machine-readable result records and trace figures.

A ResultRecord is a flat ordered key = value text document.  Flat and
ordered are both load-bearing: records from identical runs must be
byte-identical so they can be diffed and archived, which also rules out
timestamps and environment-dependent content.  Provenance is carried as
the configuration digest, the toolkit version, and solver iteration
counts.

The figure side renders queue trajectories to image files next to the
delimited traces, using the non-interactive backend only; nothing here
ever opens a window.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .sim import CrossTraffic, DelayStep, Scenario, SimTrace

__all__ = ["ResultRecord", "config_digest", "render_queue_figure"]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


class ResultRecord:
    """Ordered flat record; insertion order is the serialization order."""

    def __init__(self):
        self._items: list[tuple[str, str]] = []

    def add(self, key: str, value) -> "ResultRecord":
        if any(ch in key for ch in " =\n"):
            raise ValueError(f"bad record key {key!r}")
        self._items.append((key, _fmt(value)))
        return self

    def extend(self, prefix: str, mapping: dict) -> "ResultRecord":
        for k, v in mapping.items():
            self.add(f"{prefix}.{k}", v)
        return self

    def keys(self) -> list[str]:
        return [k for k, _ in self._items]

    def get(self, key: str) -> str | None:
        for k, v in self._items:
            if k == key:
                return v
        return None

    def render(self) -> str:
        self._check_verified()
        return "".join(f"{k} = {v}\n" for k, v in self._items)

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())

    def _check_verified(self) -> None:
        """A record that reports a gain must also carry its evidence."""
        keys = self.keys()
        has_gain = any(k.split(".")[-1] in ("k1", "k2") for k in keys)
        if not has_gain:
            return
        has_cert = any(".certificate" in k or k.startswith("certificate") for k in keys)
        has_oracle = any("oracle" in k for k in keys)
        if not (has_cert and has_oracle):
            raise ValueError("record reports a gain without certificate and oracle evidence")


def config_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def render_queue_figure(
    path: str,
    traces: list[tuple[str, SimTrace]],
    q_ref: float,
    title: str,
) -> None:
    """Plot queue-length trajectories against the reference level.

    Disturbance windows found in the first trace's scenario metadata are
    shaded (cross-traffic) or marked (delay step) so the figure is
    readable without the config that produced it.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    for label, trace in traces:
        ax.plot(trace.t, trace.q, label=label, linewidth=1.2)
    ax.axhline(q_ref, color="black", linestyle=":", linewidth=0.9, label="reference")
    scenario = traces[0][1].metadata.get("scenario")
    if isinstance(scenario, Scenario):
        for d in scenario.disturbances:
            if isinstance(d, CrossTraffic):
                ax.axvspan(d.t_on, d.t_off, color="gray", alpha=0.2)
            elif isinstance(d, DelayStep):
                ax.axvline(d.t_on, color="gray", linestyle="--", linewidth=0.9)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("queue length (packets)")
    ax.set_title(title)
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
