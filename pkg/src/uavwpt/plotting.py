"""Static SVG route plots."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .errors import InvalidParameterError  # noqa: E402
from .routing import CostBreakdown, Instance, Solution, check_feasible  # noqa: E402

_STYLES = ["-", "--", "-.", ":"]


def plot_solution(instance: Instance, solution: Solution, cost: CostBreakdown, path,
                  uav=None) -> None:
    """Write ``path`` (SVG) showing nodes, the base station and one polyline per sortie.

    Each sortie is emitted as an SVG group with id ``sortie-<k>``. Output bytes
    are fixed for fixed inputs.
    """
    if any(not 0 <= i <= instance.n for i in solution.route):
        raise InvalidParameterError("solution refers to nodes missing from the instance")
    if uav is not None:
        bad = [v for v in check_feasible(instance, solution, uav) if v.kind != "energy"]
        if bad:
            raise InvalidParameterError(f"solution does not match the instance: {bad[0].message}")
    xy = instance.coords
    with plt.rc_context({"svg.hashsalt": "uavwpt", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 6))
        cmap = plt.get_cmap("tab10")
        for k, tasks in enumerate(solution.sorties()):
            path_idx = [0, *tasks, 0]
            line, = ax.plot(xy[path_idx, 0], xy[path_idx, 1], _STYLES[k % len(_STYLES)],
                            color=cmap(k % 10), linewidth=1.2, label=f"sortie {k + 1}")
            line.set_gid(f"sortie-{k}")
        ax.scatter(xy[1:, 0], xy[1:, 1], s=14, color="black", zorder=3, label="task node")
        ax.scatter(xy[:1, 0], xy[:1, 1], s=90, marker="s", color="red", zorder=4,
                   label="base station")
        ax.set_xlim(0, instance.side_km)
        ax.set_ylim(0, instance.side_km)
        ax.set_aspect("equal")
        ax.set_xlabel("x (km)")
        ax.set_ylabel("y (km)")
        ax.set_title(f"N={instance.n}  total {cost.total:.4f} h  "
                     f"(fly {cost.t_fly:.4f} h, hover {cost.t_hover:.4f} h, K={cost.K})",
                     fontsize=9)
        ax.legend(loc="upper right", fontsize=7)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
