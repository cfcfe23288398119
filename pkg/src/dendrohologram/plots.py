"""Static SVG line plots with byte-stable output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed element ids and no timestamp, so reruns are byte-identical
matplotlib.rcParams["svg.hashsalt"] = "dendrohologram"
matplotlib.rcParams["svg.fonttype"] = "none"


def write_svg(path, x, y, title: str) -> None:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for row in y:
        ax.plot(x, row, lw=1.0)
    ax.set_xlabel("Q")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
