"""Static five-panel window reports: preprocessed signals, dissimilarity
heatmap, dendrogram, cluster partition, and anomaly scores."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .clustering import Dendrogram
from .pipeline import RunResult

# Matplotlib's default cycle is fine for signals; clusters get tab10 colors.
_FAULTY_COLOR = "#d62728"
_HEALTHY_COLOR = "#7f9db9"


def _leaf_order(dendrogram: Dendrogram) -> list[int]:
    """Left-to-right leaf indices of the tree."""
    order: list[int] = []
    stack = [dendrogram.root]
    n = dendrogram.n_leaves
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
        else:
            merge = dendrogram.merges[node - n]
            stack.append(merge.right)
            stack.append(merge.left)
    return order


def _draw_dendrogram(ax, dendrogram: Dendrogram, leaf_colors: dict[str, str]) -> None:
    n = dendrogram.n_leaves
    order = _leaf_order(dendrogram)
    xpos = {leaf: i for i, leaf in enumerate(order)}
    node_x: dict[int, float] = {leaf: float(xpos[leaf]) for leaf in range(n)}
    node_h: dict[int, float] = {leaf: 0.0 for leaf in range(n)}
    for k, merge in enumerate(dendrogram.merges):
        xl, xr = node_x[merge.left], node_x[merge.right]
        hl, hr = node_h[merge.left], node_h[merge.right]
        h = merge.height
        ax.plot([xl, xl, xr, xr], [hl, h, h, hr], color="0.35", linewidth=1.0)
        node_x[n + k] = 0.5 * (xl + xr)
        node_h[n + k] = h
    ax.set_xticks(range(n))
    labels = [dendrogram.leaves[i] for i in order]
    ax.set_xticklabels(labels, rotation=90, fontsize=7)
    for tick, leaf in zip(ax.get_xticklabels(), labels):
        tick.set_color(leaf_colors.get(leaf, "black"))
    ax.set_ylabel("merge height")


def build_report_figure(result: RunResult, window_index: int):
    """Assemble the five-panel figure for one analyzed window."""
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt
    from matplotlib import cm

    matplotlib.rcParams["svg.hashsalt"] = "fleetmon"

    pos = _window_position(result, window_index)
    analysis = result.analyses[pos]
    verdict = result.verdicts[pos]
    part = result.partitions[pos]
    if analysis.skipped or part is None:
        raise ValueError(f"window {window_index} was skipped; nothing to report")

    cluster_cmap = cm.get_cmap("tab10")
    cluster_color = {i: cluster_cmap(i % 10) for i in range(len(part.clusters))}
    machine_cluster = {mid: part.cluster_of(mid) for mid in analysis.matrix.machine_ids}

    fig, axes = plt.subplots(1, 5, figsize=(18, 3.4))
    ax_sig, ax_mat, ax_den, ax_part, ax_score = axes

    # a. preprocessed signals
    x = analysis.display_x
    for mid, y in analysis.display.items():
        xs = x if x is not None and len(x) == len(y) else np.arange(len(y))
        color = cluster_color[machine_cluster[mid]] if mid in machine_cluster else "0.6"
        ax_sig.plot(xs, y, linewidth=0.8, color=color, label=mid)
    ax_sig.set_title(f"a. {analysis.display_label}")
    ax_sig.legend(fontsize=5, ncol=2)

    # b. dissimilarity heatmap
    ids = analysis.matrix.machine_ids
    im = ax_mat.imshow(analysis.matrix.values, cmap="viridis")
    ax_mat.set_xticks(range(len(ids)))
    ax_mat.set_yticks(range(len(ids)))
    ax_mat.set_xticklabels(ids, rotation=90, fontsize=7)
    ax_mat.set_yticklabels(ids, fontsize=7)
    ax_mat.set_title(f"b. dissimilarity ({analysis.matrix.measure_tag})")
    fig.colorbar(im, ax=ax_mat, fraction=0.046)

    # c. dendrogram with leaves tinted by cluster
    leaf_colors = {
        mid: cluster_color[machine_cluster[mid]] for mid in analysis.matrix.machine_ids
    }
    _draw_dendrogram(ax_den, analysis.dendrogram, leaf_colors)
    ax_den.set_title("c. dendrogram")

    # d. cluster partition
    order = list(result.machine_ids)
    for i, mid in enumerate(order):
        if mid in machine_cluster:
            ax_part.barh(i, 1.0, color=cluster_color[machine_cluster[mid]])
        else:
            ax_part.barh(i, 1.0, color="0.85")
    ax_part.set_yticks(range(len(order)))
    ax_part.set_yticklabels(order, fontsize=7)
    ax_part.set_xticks([])
    ax_part.invert_yaxis()
    ax_part.set_title(f"d. partition ({len(part.clusters)} clusters)")

    # e. anomaly scores; debounce-flagged machines stand out
    scores = [verdict.scores.get(mid) or 0.0 for mid in order]
    colors = [
        _FAULTY_COLOR if verdict.debounced_faulty[mid] else _HEALTHY_COLOR for mid in order
    ]
    ax_score.bar(range(len(order)), scores, color=colors)
    ax_score.axhline(result.config.thr_ad, color="black", linestyle="--", linewidth=1.0)
    ax_score.set_xticks(range(len(order)))
    ax_score.set_xticklabels(order, rotation=90, fontsize=7)
    ax_score.set_ylim(0.0, 1.0)
    ax_score.set_title("e. anomaly score")

    fig.suptitle(f"window {window_index}" + (
        f" ({analysis.speed_rpm:.0f} rpm)" if analysis.speed_rpm is not None else ""
    ))
    fig.tight_layout()
    return fig


def _window_position(result: RunResult, window_index: int) -> int:
    for pos, analysis in enumerate(result.analyses):
        if analysis.index == window_index:
            return pos
    raise ValueError(f"window {window_index} does not exist in this run")


def report_json_obj(result: RunResult, window_index: int) -> dict:
    """The numbers behind one window's report, bit-exact with the run."""
    pos = _window_position(result, window_index)
    analysis = result.analyses[pos]
    verdict = result.verdicts[pos]
    part = result.partitions[pos]
    return {
        "schema": "fleetmon/report-v1",
        "window_index": window_index,
        "variant": result.config.variant,
        "thr_cc": result.config.thr_cc,
        "thr_ad": result.config.thr_ad,
        "machine_ids": list(result.machine_ids),
        "excluded": list(analysis.excluded),
        "speed_rpm": analysis.speed_rpm,
        "matrix": {
            "machine_ids": list(analysis.matrix.machine_ids),
            "values": analysis.matrix.values.tolist(),
            "measure": analysis.matrix.measure_tag,
        } if analysis.matrix is not None else None,
        "dendrogram": analysis.dendrogram.to_nested() if analysis.dendrogram is not None else None,
        "clusters": [sorted(c) for c in part.clusters] if part is not None else None,
        "scores": dict(verdict.scores),
        "instant_anomalous": dict(verdict.instant_anomalous),
        "debounced_faulty": dict(verdict.debounced_faulty),
    }


def emit_report(
    result: RunResult,
    window_index: int,
    out_dir: str | Path,
    stem: str | None = None,
) -> tuple[Path, Path]:
    """Write the SVG report and its JSON sidecar for one window."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or f"report_w{window_index}"
    fig = build_report_figure(result, window_index)
    svg_path = out_dir / f"{stem}.svg"
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    import matplotlib.pyplot as plt

    plt.close(fig)
    json_path = out_dir / f"{stem}.json"
    json_path.write_text(json.dumps(report_json_obj(result, window_index), indent=2) + "\n")
    return svg_path, json_path
