"""Learning-curve SVGs: one panel per metric, one line per strategy."""

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import AVERAGING, METRIC_NAMES  # noqa: E402


def _data_comment(rows):
    lines = ["strategy,cycle,metric,mean,std,n_seeds"]
    lines += [f"{s},{c},{m},{mean!r},{std!r},{n}" for s, c, m, mean, std, n in rows]
    # "--" may not appear inside an XML comment.
    return "<!--\n" + "\n".join(lines).replace("--", "- -") + "\n-->\n"


def learning_curves_svg(comparison) -> str:
    rows = comparison.summary()
    with plt.rc_context({"svg.hashsalt": "stepal", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(1, len(METRIC_NAMES), figsize=(4 * len(METRIC_NAMES), 3.4), squeeze=False)
        for ax, metric in zip(axes[0], METRIC_NAMES):
            for strategy in comparison.strategies:
                pts = [(c, mean, std) for s, c, m, mean, std, _ in rows if s == strategy and m == metric]
                if not pts:
                    continue
                cycles, means, stds = zip(*pts)
                ax.errorbar(cycles, means, yerr=stds, marker="o", capsize=3, label=strategy)
            ax.set_title(metric.replace("_", " "))
            ax.set_xlabel("AL cycle r")
            ax.grid(alpha=0.3)
        axes[0][0].set_ylabel("test score (mean ± std over seeds)")
        axes[0][-1].legend(fontsize="small")
        fig.suptitle(f"precision/recall/jaccard: {AVERAGING}", fontsize="small")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    svg = buf.getvalue()
    head, sep, body = svg.partition("<svg")
    return head + _data_comment(rows) + sep + body
