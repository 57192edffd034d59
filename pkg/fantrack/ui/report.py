import math
from typing import List, Tuple

from ..services.evaluation import MetricReport


class ReportFormatter:
    """Plain-text renderings of metric reports for the console."""

    @staticmethod
    def summary(report: MetricReport) -> List[str]:
        lines = [
            f"success_rate: {report.success_rate:.1f}",
            f"auc: {report.auc:.2f}",
        ]
        for k, fraction in sorted(report.add_fractions.items()):
            lines.append(f"add_{k:g}: {fraction:.1f}")
        lines.append(f"resets: {report.resets}")
        lines.append(f"mean_runtime_ms: {report.mean_runtime_ms:.2f}")
        return lines

    @staticmethod
    def per_frame(report: MetricReport) -> List[str]:
        lines = [f"{'frame':>6} {'e_t [mm]':>10} {'e_r [deg]':>10} {'e_T [mm]':>10} {'ok':>3} {'ms':>8}"]
        for index, frame in enumerate(report.per_frame):
            lines.append(
                f"{index:>6} {frame.e_t * 1000:>10.2f} {math.degrees(frame.e_r):>10.3f} "
                f"{frame.e_T * 1000:>10.2f} {'y' if frame.success else 'n':>3} {frame.runtime_ms:>8.2f}"
            )
        return lines

    @staticmethod
    def bench_table(results: List[Tuple[str, MetricReport]]) -> List[str]:
        name_width = max([len("sequence")] + [len(name) for name, _ in results])
        lines = [f"{'sequence':<{name_width}} {'success':>8} {'auc':>6} {'resets':>7} {'mean ms':>8}"]
        for name, report in results:
            lines.append(
                f"{name:<{name_width}} {report.success_rate:>8.1f} {report.auc:>6.2f} "
                f"{report.resets:>7} {report.mean_runtime_ms:>8.2f}"
            )
        if results:
            mean_success = sum(r.success_rate for _, r in results) / len(results)
            mean_ms = sum(r.mean_runtime_ms for _, r in results) / len(results)
            lines.append(f"{'mean':<{name_width}} {mean_success:>8.1f} {'':>6} {'':>7} {mean_ms:>8.2f}")
        return lines
