"""Figure specs and renderers for the four supported figure kinds.

A figure spec is a JSON document:

    {
      "kind": "learning_curve" | "bar_sweep" | "line_sweep" | "trajectory",
      "inputs": [{"path": "...", "label": "..."}, ...],
      "output": "figure.png",
      "title": "optional"
    }

Relative paths are resolved against the spec file's directory. Every
render also writes `<output stem>.data.csv` holding exactly the values
that were drawn, in the same delimited format as the inputs, so plotted
numbers can be re-read and checked without parsing the image.
"""

import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics_io import SCHEMA_LINE, column, read_metrics  # noqa: E402

FIGURE_KINDS = ("learning_curve", "bar_sweep", "line_sweep", "trajectory")


class FigureSpecError(ValueError):
    pass


@dataclass
class FigureSpec:
    kind: str
    inputs: list                     # [(path, label)]
    output: str
    title: str = ""
    options: dict = field(default_factory=dict)

    def validate(self):
        if self.kind not in FIGURE_KINDS:
            raise FigureSpecError(
                f"kind must be one of {FIGURE_KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise FigureSpecError("spec needs at least one input file")
        for path, _ in self.inputs:
            if not os.path.exists(path):
                raise FigureSpecError(f"input file does not exist: {path}")
        if not self.output:
            raise FigureSpecError("spec needs an output path")


def load_spec(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FigureSpecError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FigureSpecError(f"{path}: spec must be a JSON object")
    unknown = set(doc) - {"kind", "inputs", "output", "title", "options"}
    if unknown:
        raise FigureSpecError(f"{path}: unknown spec keys {sorted(unknown)}")
    base = os.path.dirname(os.path.abspath(path))
    inputs = []
    for entry in doc.get("inputs", []):
        if isinstance(entry, str):
            entry = {"path": entry}
        p = entry["path"]
        if not os.path.isabs(p):
            p = os.path.join(base, p)
        inputs.append((p, entry.get("label", os.path.basename(entry["path"]))))
    output = doc.get("output", "")
    if output and not os.path.isabs(output):
        output = os.path.join(base, output)
    spec = FigureSpec(kind=doc.get("kind", ""), inputs=inputs, output=output,
                      title=doc.get("title", ""),
                      options=doc.get("options", {}))
    spec.validate()
    return spec


def build_learning_curve(spec):
    fig, (ax_r, ax_a) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    data_rows = []
    for path, label in spec.inputs:
        header, rows = read_metrics(path)
        eps = column(header, rows, "episode", path)
        rew = column(header, rows, "mean_reward", path)
        aoi = column(header, rows, "avg_aoi", path)
        ax_r.plot(eps, rew, label=label)
        ax_a.plot(eps, aoi, label=label)
        data_rows.extend([label, e, r, a] for e, r, a in zip(eps, rew, aoi))
    ax_r.set_ylabel("mean reward")
    ax_a.set_ylabel("average AoI")
    ax_a.set_xlabel("episode")
    if data_rows:
        ax_r.legend()
        ax_a.legend()
    return fig, ["label", "episode", "mean_reward", "avg_aoi"], data_rows


def _sweep_series(spec):
    """(label, num_users) -> sorted [(value, mean, lo, hi, fail_frac)]."""
    series = {}
    for path, label in spec.inputs:
        header, rows = read_metrics(path)
        vals = column(header, rows, "value", path)
        users = column(header, rows, "num_users", path)
        mean = column(header, rows, "mean_avg_aoi", path)
        lo = column(header, rows, "ci_lo", path)
        hi = column(header, rows, "ci_hi", path)
        fail = column(header, rows, "transmission_fail_frac", path)
        for v, m_users, m, l, h, f in zip(vals, users, mean, lo, hi, fail):
            series.setdefault((label, int(m_users)), []).append((v, m, l, h, f))
    for key in series:
        series[key].sort()
    return series


_SWEEP_DATA_HEADER = ["label", "num_users", "value", "mean_avg_aoi",
                      "ci_lo", "ci_hi", "transmission_fail_frac"]


def _sweep_data_rows(series):
    rows = []
    for (label, users), points in sorted(series.items()):
        rows.extend([label, users, v, m, l, h, f]
                    for v, m, l, h, f in points)
    return rows


def build_bar_sweep(spec):
    series = _sweep_series(spec)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    keys = sorted(series)
    values = sorted({v for pts in series.values() for v, *_ in pts})
    width = 0.8 / max(len(keys), 1)
    for k, key in enumerate(keys):
        label, users = key
        pts = {v: (m, l, h) for v, m, l, h, _ in series[key]}
        xs, ys, errs = [], [], []
        for i, v in enumerate(values):
            if v in pts:
                m, l, h = pts[v]
                xs.append(i + (k - (len(keys) - 1) / 2) * width)
                ys.append(m)
                errs.append([m - l, h - m])
        ax.bar(xs, ys, width=width,
               yerr=list(zip(*errs)) if errs else None, capsize=3,
               label=f"{label} (M={users})")
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels([f"{v:g}" for v in values])
    ax.set_ylabel("average AoI")
    if keys:
        ax.legend()
    return fig, _SWEEP_DATA_HEADER, _sweep_data_rows(series)


def build_line_sweep(spec):
    series = _sweep_series(spec)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (label, users), points in sorted(series.items()):
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.plot(xs, ys, marker="o", label=f"{label} (M={users})")
        ax.fill_between(xs, [p[2] for p in points], [p[3] for p in points],
                        alpha=0.2)
        fails = [(x, y) for x, y, f in
                 zip(xs, ys, (p[4] for p in points)) if f > 0]
        if fails:
            fx, fy = zip(*fails)
            ax.scatter(fx, fy, marker="x", s=80, color="red", zorder=3,
                       label=f"{label}: transmission fail")
    ax.set_xlabel("axis value")
    ax.set_ylabel("average AoI")
    if series:
        ax.legend()
    return fig, _SWEEP_DATA_HEADER, _sweep_data_rows(series)


def build_trajectory(spec):
    fig, ax = plt.subplots(figsize=(6, 6))
    data_rows = []
    for path, label in spec.inputs:
        header, rows = read_metrics(path)
        if rows:
            # plot a single episode: by default the first (seed, episode)
            want_seed = spec.options.get("seed", rows[0][header.index("seed")])
            want_ep = spec.options.get("episode",
                                       rows[0][header.index("episode")])
            rows = [r for r in rows
                    if r[header.index("seed")] == want_seed
                    and r[header.index("episode")] == want_ep]
        uav_ids = sorted({h[len("uav"):-2] for h in header
                          if h.startswith("uav") and h.endswith("_x")})
        for u in uav_ids:
            xs = column(header, rows, f"uav{u}_x", path)
            ys = column(header, rows, f"uav{u}_y", path)
            ax.plot(xs, ys, marker=".", label=f"{label} UAV {u}")
            if xs:
                ax.scatter([xs[0]], [ys[0]], marker="^", zorder=3)
                ax.scatter([xs[-1]], [ys[-1]], marker="s", zorder=3)
            data_rows.extend([f"{label} uav{u}", x, y]
                             for x, y in zip(xs, ys))
        user_ids = sorted({h[len("user"):-2] for h in header
                           if h.startswith("user") and h.endswith("_x")})
        for m in user_ids:
            xs = column(header, rows, f"user{m}_x", path)
            ys = column(header, rows, f"user{m}_y", path)
            ax.scatter(xs, ys, s=8, alpha=0.5)
            data_rows.extend([f"{label} user{m}", x, y]
                             for x, y in zip(xs, ys))
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    if data_rows:
        ax.legend(fontsize="small")
    return fig, ["series", "x", "y"], data_rows


BUILDERS = {
    "learning_curve": build_learning_curve,
    "bar_sweep": build_bar_sweep,
    "line_sweep": build_line_sweep,
    "trajectory": build_trajectory,
}


def _write_data_table(output, header, rows):
    stem, _ = os.path.splitext(output)
    path = stem + ".data.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SCHEMA_LINE + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    return path


def render(spec):
    """Render one figure spec to its image + data table; returns the image
    path. Inputs are only ever read."""
    spec.validate()
    fig, header, rows = BUILDERS[spec.kind](spec)
    if spec.title:
        fig.suptitle(spec.title)
    os.makedirs(os.path.dirname(spec.output) or ".", exist_ok=True)
    metadata = {"Date": None} if spec.output.endswith(".svg") else None
    fig.savefig(spec.output, dpi=120, metadata=metadata)
    plt.close(fig)
    _write_data_table(spec.output, header, rows)
    return spec.output
