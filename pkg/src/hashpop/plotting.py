"""Static SVG rendering of a validation report (requires matplotlib)."""
from __future__ import annotations

import io
from pathlib import Path


def render_report_svg(report, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed ids and no date stamp keep the file byte-reproducible
    matplotlib.rcParams["svg.hashsalt"] = "hashpop"

    fig, (ax_w, ax_x) = plt.subplots(1, 2, figsize=(10, 4))
    t = report.w_raw.times
    ax_w.plot(t, report.w_raw.values, color="0.6", lw=0.8, label="empirical")
    ax_w.plot(t, report.w_smooth.values, color="tab:orange", label="smoothed")
    ax_w.plot(t, report.w_fit(), color="tab:blue", ls="--", label="fitted")
    ax_w.set_xlabel("t")
    ax_w.set_ylabel("w(t)")
    ax_w.legend(frameon=False)

    c = report.curves
    ax_x.fill_between(c.times, c.band_low, c.band_high, color="tab:blue", alpha=0.25, lw=0,
                      label=f"{c.level:.0%} band")
    ax_x.plot(c.times, c.mean, color="k", ls="--", label="E[X(t)]")
    ax_x.step(c.times, report.empirical_reads.values, where="post", color="tab:red", label="observed")
    ax_x.axhline(report.long_run_limit, color="tab:blue", ls=":", label="long-run limit")
    ax_x.set_xlabel("t")
    ax_x.set_ylabel("reads X(t)")
    ax_x.legend(frameon=False)
    fig.tight_layout()

    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    from .pipeline import atomic_write_text

    atomic_write_text(path, buf.getvalue())
    return Path(path)
