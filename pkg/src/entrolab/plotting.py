"""PNG figures for CLI reports (matplotlib, Agg backend)."""

from __future__ import annotations

import math
import os
import tempfile

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# strip the software/date chunks so identical data gives identical files
_PNG_META = {"Software": None}


def _save(fig, path: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".png.tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", dpi=100, metadata=_PNG_META)
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)


def series_figure(path: str, x, y, running=None, title: str = "", xlabel: str = "|F|",
                  ylabel: str = "nats", reference: float | None = None, ref_label: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    finite = [(a, b) for a, b in zip(x, y) if math.isfinite(b)]
    if finite:
        ax.plot(*zip(*finite), "o", label="per-item value")
    if running is not None:
        ax.step(x, running, where="post", label="running min")
    if reference is not None:
        ax.axhline(reference, linestyle="--", color="gray", label=ref_label or "reference")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def sep_span_figure(path: str, eps, sep, spn, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(eps, sep, where="post", label="sep")
    ax.step(eps, spn, where="post", label="spn")
    ax.set_xlabel("eps")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def bar_figure(path: str, labels, values, title: str = "", ylabel: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(values)), values)
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
