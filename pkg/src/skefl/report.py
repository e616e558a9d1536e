"""Figure rendering for CLI reports.

Every figure lands as a PNG next to the CSV/JSON artifacts it illustrates.
Figures are a presentation layer only — the delimited files remain the
authoritative outputs (and the deterministic ones; PNG encoders embed
library metadata).
"""

from __future__ import annotations

from typing import List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_trajectory(round_results, holdout_accuracy: Sequence[float], path: str) -> str:
    """Global-model norm and holdout accuracy per round."""
    rounds = [r.round_no for r in round_results]
    norms = [sum(v * v for v in r.global_model) ** 0.5 for r in round_results]
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.plot(rounds, norms, marker="o", color="tab:blue", label="global model L2 norm")
    ax1.set_xlabel("round")
    ax1.set_ylabel("L2 norm", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(rounds, list(holdout_accuracy), marker="s", color="tab:green", label="holdout accuracy")
    ax2.set_ylabel("holdout accuracy", color="tab:green")
    ax2.set_ylim(0.0, 1.05)
    ax1.set_title("Federated training trajectory")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_traffic(round_results, path: str) -> str:
    """Message counts by direction, with total bytes overlaid."""
    rounds = [r.round_no for r in round_results]
    c2c = [r.msg_counts["c2c"] for r in round_results]
    c2s = [r.msg_counts["c2s"] for r in round_results]
    s2c = [r.msg_counts["s2c"] for r in round_results]
    width = 0.28
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.bar([r - width for r in rounds], c2c, width, label="client-client")
    ax1.bar(rounds, c2s, width, label="client-server")
    ax1.bar([r + width for r in rounds], s2c, width, label="server-client")
    ax1.set_xlabel("round")
    ax1.set_ylabel("messages")
    ax1.legend(loc="upper left")
    ax2 = ax1.twinx()
    ax2.plot(rounds, [r.bytes_total for r in round_results], color="black", marker=".", label="bytes")
    ax2.set_ylabel("total bytes")
    ax1.set_title("Per-round traffic")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_bench(rows: List[dict], path: str) -> str:
    """Split/merge scaling over vector length."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for op, color in (("split", "tab:blue"), ("merge", "tab:orange")):
        pts = sorted(
            (r["m"], r["value"]) for r in rows if r["section"] == "atss" and r["op"] == op
        )
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", color=color, label=op)
    ax.set_xlabel("vector length m")
    ax.set_ylabel("median ms")
    ax.set_title("Share split/merge scaling")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_attack(game_json: dict, sanity_json: dict, path: str) -> str:
    """Distinguishing-game accuracy against the chance band."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = ["protocol on", "garbling off"]
    values = [game_json["accuracy"], sanity_json["accuracy"]]
    colors = ["tab:green" if game_json["passed"] else "tab:red", "tab:gray"]
    ax.bar(labels, values, color=colors)
    lo = 0.5 - game_json["bound"]
    hi = 0.5 + game_json["bound"]
    ax.axhspan(lo, hi, color="tab:blue", alpha=0.2, label="chance band")
    ax.axhline(0.5, color="tab:blue", linestyle="--", linewidth=1)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("adversary accuracy")
    ax.set_title("Distinguishing game")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
