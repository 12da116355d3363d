"""Episode detectors: the extended-arm rule, SD outliers, and exchange pairing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from . import kernels
from .model import (
    DEFAULT_LAYOUT,
    KeypointLayout,
    PersonTrack,
    Side,
    SuspicionEpisode,
    SuspicionRule,
    track_to_arrays,
)
from .series import AngleSeries, person_stats

# SD flagging needs a minimally informative series before outliers mean anything.
SD_MIN_SAMPLES = 10


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds and gates for all detectors.

    ``elbow_min_deg`` is the extended-arm elbow threshold (a nearly straight
    arm); ``shoulder_min_deg`` the companion shoulder-neck threshold, which
    may be set to 0 to disable that condition.
    """

    elbow_min_deg: float = 148.0
    shoulder_min_deg: float = 90.0
    min_duration_ms: float = 200.0
    merge_gap_frames: int = 1
    sd_k: float = 1.0
    pair_max_wrist_px: float = 120.0
    pair_min_overlap_ms: float = 120.0

    def __post_init__(self) -> None:
        if not 0.0 < self.elbow_min_deg <= 180.0:
            raise ValueError(f"elbow_min_deg must be in (0, 180], got {self.elbow_min_deg}")
        if not 0.0 <= self.shoulder_min_deg <= 180.0:
            raise ValueError(f"shoulder_min_deg must be in [0, 180], got {self.shoulder_min_deg}")
        if self.min_duration_ms < 0:
            raise ValueError("min_duration_ms must be >= 0")
        if self.merge_gap_frames < 0:
            raise ValueError("merge_gap_frames must be >= 0")
        if self.sd_k < 0:
            raise ValueError("sd_k must be >= 0")
        if self.pair_max_wrist_px < 0 or self.pair_min_overlap_ms < 0:
            raise ValueError("pair gates must be >= 0")


def extended_arm(
    elbow_deg: Optional[float], shoulder_deg: Optional[float], cfg: DetectorConfig
) -> bool:
    """True iff both angles are present and at or above their thresholds."""
    if elbow_deg is None or shoulder_deg is None:
        return False
    if math.isnan(elbow_deg) or math.isnan(shoulder_deg):
        return False
    return elbow_deg >= cfg.elbow_min_deg and shoulder_deg >= cfg.shoulder_min_deg


def _mask_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as inclusive (start, end) sample-index pairs."""
    if mask.size == 0:
        return []
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def _merge_runs(
    runs: list[tuple[int, int]], frames: np.ndarray, merge_gap_frames: int
) -> list[tuple[int, int]]:
    if not runs:
        return []
    merged = [runs[0]]
    for start, end in runs[1:]:
        prev_start, prev_end = merged[-1]
        gap = int(frames[start]) - int(frames[prev_end]) - 1
        if gap <= merge_gap_frames:
            merged[-1] = (prev_start, end)
        else:
            merged.append((start, end))
    return merged


def _span_episode(
    series: AngleSeries,
    start: int,
    end: int,
    rule: SuspicionRule,
) -> SuspicionEpisode:
    span = series.elbow_deg[start : end + 1]
    present = span[~np.isnan(span)]
    return SuspicionEpisode(
        track_id=series.track_id,
        side=series.side,
        start_frame=int(series.frames[start]),
        end_frame=int(series.frames[end]),
        start_ms=float(series.timestamps_ms[start]),
        end_ms=float(series.timestamps_ms[end]),
        peak_elbow_angle_deg=float(np.max(present)),
        mean_elbow_angle_deg=float(np.mean(present)),
        rule=rule,
    )


def detect_episodes(series: AngleSeries, cfg: DetectorConfig) -> list[SuspicionEpisode]:
    """Maximal sustained extended-arm runs, merged across short dropouts.

    Runs separated by at most ``merge_gap_frames`` non-qualifying frames are
    coalesced; an episode survives only if its inclusive duration
    (last - first + one frame period) reaches ``min_duration_ms``. Peak and
    mean elbow angles are taken over the whole merged span.
    """
    with np.errstate(invalid="ignore"):
        mask = (
            ~np.isnan(series.elbow_deg)
            & ~np.isnan(series.shoulder_deg)
            & (series.elbow_deg >= cfg.elbow_min_deg)
            & (series.shoulder_deg >= cfg.shoulder_min_deg)
        )
    runs = _merge_runs(_mask_runs(mask), series.frames, cfg.merge_gap_frames)
    period = series.frame_period_ms
    episodes = []
    for start, end in runs:
        duration = float(series.timestamps_ms[end] - series.timestamps_ms[start]) + period
        if duration >= cfg.min_duration_ms:
            episodes.append(_span_episode(series, start, end, SuspicionRule.EXTENDED_ARM))
    return episodes


def sd_outliers(series: AngleSeries, cfg: DetectorConfig) -> list[SuspicionEpisode]:
    """Frames whose elbow angle exceeds mean + sd_k * SD, coalesced per frame run.

    Quiet on degenerate series: fewer than ``SD_MIN_SAMPLES`` present samples
    or zero spread produce no flags. Only the high side is flagged since arm
    extension raises the angle.
    """
    stats = person_stats(series)
    if stats.n < SD_MIN_SAMPLES or stats.sd is None or stats.sd == 0.0:
        return []
    threshold = stats.mean + cfg.sd_k * stats.sd
    with np.errstate(invalid="ignore"):
        mask = series.elbow_deg > threshold
    episodes = []
    for start, end in _mask_runs(mask):
        # split where flagged samples are not on consecutive frames
        piece_start = start
        for i in range(start + 1, end + 1):
            if series.frames[i] != series.frames[i - 1] + 1:
                episodes.append(_span_episode(series, piece_start, i - 1, SuspicionRule.SD_OUTLIER))
                piece_start = i
        episodes.append(_span_episode(series, piece_start, end, SuspicionRule.SD_OUTLIER))
    return episodes


def _wrist_positions(
    track: PersonTrack, side: Side, layout: KeypointLayout
) -> tuple[np.ndarray, np.ndarray]:
    frames, _, kps = track_to_arrays(track)
    wrist_slot = layout.arm_slots(side)[0]
    return frames, kps[:, wrist_slot, 0:2]


def exchange_candidates(
    episodes: Iterable[SuspicionEpisode],
    tracks: Union[Mapping[str, PersonTrack], Sequence[PersonTrack]],
    cfg: DetectorConfig,
    fps: float,
    layout: KeypointLayout = DEFAULT_LAYOUT,
) -> list[SuspicionEpisode]:
    """Pair extended-arm episodes from distinct tracks into exchange candidates.

    Two episodes qualify when their spans overlap for at least
    ``pair_min_overlap_ms`` (inclusive duration) and the two extended-side
    wrists come within ``pair_max_wrist_px`` at some frame of the overlap.
    The emitted episode spans the overlap and references both tracks; its
    peak is the larger of the two episode peaks and its mean the average of
    the two episode means. Deterministic: episodes are processed sorted by
    (track_id, start_frame, side).
    """
    if fps <= 0:
        raise ValueError(f"fps must be > 0, got {fps}")
    if not isinstance(tracks, Mapping):
        tracks = {t.track_id: t for t in tracks}
    ext = sorted(
        (e for e in episodes if e.rule is SuspicionRule.EXTENDED_ARM),
        key=lambda e: (e.track_id, e.start_frame, e.side.value),
    )
    period = 1000.0 / fps
    wrist_cache: dict[tuple[str, Side], tuple[np.ndarray, np.ndarray]] = {}

    def wrists(track_id: str, side: Side) -> tuple[np.ndarray, np.ndarray]:
        key = (track_id, side)
        if key not in wrist_cache:
            wrist_cache[key] = _wrist_positions(tracks[track_id], side, layout)
        return wrist_cache[key]

    candidates = []
    for i in range(len(ext)):
        for j in range(i + 1, len(ext)):
            a, b = ext[i], ext[j]
            if a.track_id == b.track_id:
                continue
            start_f = max(a.start_frame, b.start_frame)
            end_f = min(a.end_frame, b.end_frame)
            if end_f < start_f:
                continue
            start_ms = max(a.start_ms, b.start_ms)
            end_ms = min(a.end_ms, b.end_ms)
            if end_ms - start_ms + period < cfg.pair_min_overlap_ms:
                continue
            fa, wa = wrists(a.track_id, a.side)
            fb, wb = wrists(b.track_id, b.side)
            sel_a = (fa >= start_f) & (fa <= end_f) & ~np.isnan(wa[:, 0])
            sel_b = (fb >= start_f) & (fb <= end_f) & ~np.isnan(wb[:, 0])
            common, ia, ib = np.intersect1d(fa[sel_a], fb[sel_b], return_indices=True)
            if common.size == 0:
                continue
            pa = wa[sel_a][ia]
            pb = wb[sel_b][ib]
            dist = np.hypot(pa[:, 0] - pb[:, 0], pa[:, 1] - pb[:, 1])
            if float(np.min(dist)) > cfg.pair_max_wrist_px:
                continue
            candidates.append(
                SuspicionEpisode(
                    track_id=a.track_id,
                    side=a.side,
                    start_frame=start_f,
                    end_frame=end_f,
                    start_ms=start_ms,
                    end_ms=end_ms,
                    peak_elbow_angle_deg=max(a.peak_elbow_angle_deg, b.peak_elbow_angle_deg),
                    mean_elbow_angle_deg=0.5 * (a.mean_elbow_angle_deg + b.mean_elbow_angle_deg),
                    rule=SuspicionRule.EXCHANGE_CANDIDATE,
                    partner_track_id=b.track_id,
                    partner_side=b.side,
                )
            )
    candidates.sort(key=lambda e: (e.track_id, e.start_frame, str(e.partner_track_id)))
    return candidates
