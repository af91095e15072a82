"""Estimation-error statistics by condition and runtime-cost measurement.

Errors are estimate minus truth (seconds for T60, dB for DRR), summarized
per (noise kind, SNR) group as box-plot statistics: quartiles by linear
interpolation, outliers beyond 1.5*IQR from the quartiles, whiskers at the
most extreme non-outliers.

Runtime cost is the real-time factor: processing time over audio duration,
averaged as mean-of-ratios, with a per-stage split between feature
extraction and the MLP forward pass. FPS converts via RTF = 100 / FPS at
the 10 ms frame hop.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .audio_io import read_wav
from .estimator import estimate_utterance
from .mlp import MlpModel

FRAMES_PER_SECOND_NOMINAL = 100.0  # 10 ms hop


@dataclass
class BoxStats:
    median: float
    q25: float
    q75: float
    whisker_lo: float
    whisker_hi: float
    outliers: list
    n: int

    def to_dict(self) -> dict:
        return {
            "median": self.median,
            "q25": self.q25,
            "q75": self.q75,
            "whisker_lo": self.whisker_lo,
            "whisker_hi": self.whisker_hi,
            "outliers": list(self.outliers),
            "n": self.n,
        }


def boxplot_stats(values) -> BoxStats:
    """Box-plot summary of a sample (n >= 1)."""
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot summarize an empty sample")
    q25, median, q75 = np.percentile(values, [25.0, 50.0, 75.0])
    iqr = q75 - q25
    lo_fence, hi_fence = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    inside = values[(values >= lo_fence) & (values <= hi_fence)]
    outliers = values[(values < lo_fence) | (values > hi_fence)]
    return BoxStats(
        median=float(median),
        q25=float(q25),
        q75=float(q75),
        whisker_lo=float(inside.min()),
        whisker_hi=float(inside.max()),
        outliers=sorted(float(v) for v in outliers),
        n=int(values.size),
    )


@dataclass
class EvalRecord:
    item_id: int
    t60: float
    drr: float
    t60_hat: float
    drr_hat: float
    e_t60: float
    e_drr: float
    noise_kind: str
    snr_db: float | None
    audio_s: float
    proc_s: float
    features_s: float
    mlp_s: float


@dataclass
class RtfReport:
    mean_rtf: float
    fps: float
    stage_rtf: dict

    def to_dict(self) -> dict:
        return {"mean_rtf": self.mean_rtf, "fps": self.fps, "stage_rtf": dict(self.stage_rtf)}


def fps_to_rtf(fps: float) -> float:
    """Real-time factor of a classifier running at ``fps`` 10 ms frames/s."""
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    return 100.0 / fps


def measure_rtf(runs, stage_runs: dict | None = None) -> RtfReport:
    """Mean-of-ratios RTF over (processing seconds, audio seconds) runs.

    ``stage_runs`` optionally maps a stage name to per-run processing
    seconds aligned with ``runs``; each stage gets its own mean RTF.
    """
    runs = list(runs)
    if not runs:
        raise ValueError("no runs to measure")
    proc = np.asarray([r[0] for r in runs], dtype=np.float64)
    audio = np.asarray([r[1] for r in runs], dtype=np.float64)
    if np.any(audio <= 0.0):
        raise ValueError("every run needs positive audio duration")
    stage_rtf = {}
    if stage_runs:
        for stage, secs in stage_runs.items():
            stage_rtf[stage] = float(np.mean(np.asarray(secs, dtype=np.float64) / audio))
    fps = FRAMES_PER_SECOND_NOMINAL * audio.sum() / proc.sum() if proc.sum() > 0 else float("inf")
    return RtfReport(mean_rtf=float(np.mean(proc / audio)), fps=float(fps), stage_rtf=stage_rtf)


@dataclass
class EvalResult:
    records: list
    stats: dict  # (noise_kind, snr_db) -> {"t60": BoxStats, "drr": BoxStats}
    rtf: RtfReport
    excluded: list = field(default_factory=list)  # (item_id, reason)


def _load_item_audio(item):
    if item.buffer is not None:
        return item.buffer
    if not item.path:
        raise ValueError("item has neither buffer nor path")
    return read_wav(item.path)


def evaluate(items, model: MlpModel, bank, params, jobs: int = 1) -> EvalResult:
    """Run the estimator over corpus items and summarize errors by condition.

    ``items`` is a CorpusManifest or a list of CorpusItems. Unreadable items
    are excluded from the statistics and reported in ``excluded``. Use
    jobs=1 whenever the timing figures matter.
    """
    item_list = list(getattr(items, "items", items))

    def run_one(pair):
        idx, item = pair
        audio = _load_item_audio(item)
        timings = {}
        est = estimate_utterance(audio, model, bank, params, timings=timings)
        return EvalRecord(
            item_id=idx,
            t60=item.t60,
            drr=item.drr,
            t60_hat=est.t60_hat,
            drr_hat=est.drr_hat,
            e_t60=est.t60_hat - item.t60,
            e_drr=est.drr_hat - item.drr,
            noise_kind=item.noise_kind,
            snr_db=item.snr_db,
            audio_s=audio.duration,
            proc_s=timings["features_s"] + timings["mlp_s"],
            features_s=timings["features_s"],
            mlp_s=timings["mlp_s"],
        )

    records, excluded = [], []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [(i, pool.submit(run_one, (i, item))) for i, item in enumerate(item_list)]
        for i, fut in futures:
            try:
                records.append(fut.result())
            except (OSError, ValueError) as exc:
                excluded.append((i, str(exc)))
    else:
        for i, item in enumerate(item_list):
            try:
                records.append(run_one((i, item)))
            except (OSError, ValueError) as exc:
                excluded.append((i, str(exc)))

    stats = {}
    for key in sorted({(r.noise_kind, r.snr_db) for r in records}, key=lambda k: (k[0], str(k[1]))):
        group = [r for r in records if (r.noise_kind, r.snr_db) == key]
        stats[key] = {
            "t60": boxplot_stats([r.e_t60 for r in group]),
            "drr": boxplot_stats([r.e_drr for r in group]),
        }

    if records:
        rtf = measure_rtf(
            [(r.proc_s, r.audio_s) for r in records],
            stage_runs={
                "features": [r.features_s for r in records],
                "mlp_forward": [r.mlp_s for r in records],
            },
        )
    else:
        rtf = RtfReport(mean_rtf=float("nan"), fps=float("nan"), stage_rtf={})
    return EvalResult(records, stats, rtf, excluded)
