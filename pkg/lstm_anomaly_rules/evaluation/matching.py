from typing import Iterable, List, Tuple

import numpy as np

from lstm_anomaly_rules.dto.reports import ConfusionCounts, MatchSpec

Event = Tuple[int, int]


def label_events(labels: Iterable[int], event_level: bool = True) -> List[Event]:
    """
    Group labeled indices into inclusive ``(start, end)`` anomalies. With ``event_level`` each
    run of consecutive indices is one anomaly, otherwise every index is its own.
    """
    ordered = sorted(set(int(i) for i in labels))
    if not event_level:
        return [(i, i) for i in ordered]

    events: List[Event] = []
    for i in ordered:
        if events and i == events[-1][1] + 1:
            events[-1] = (events[-1][0], i)
        else:
            events.append((i, i))
    return events


def _distance(flag: int, event: Event) -> int:
    start, end = event
    if flag < start:
        return start - flag
    if flag > end:
        return flag - end
    return 0


def match_detections(
    flags: Iterable[int], labels: Iterable[int], spec: MatchSpec = MatchSpec()
) -> ConfusionCounts:
    """
    Greedy nearest-first one-to-one assignment of flags to labeled anomalies.

    TP counts matched anomalies, FN unmatched ones and FP unmatched flags. With
    ``spec.event_level`` an unmatched flag within tolerance of a detected anomaly is absorbed
    into it and not counted.
    """
    flags = np.array(sorted(set(int(f) for f in flags)), dtype=np.int64)
    events = label_events(labels, spec.event_level)
    tol = spec.tolerance

    candidates = []
    for e, event in enumerate(events):
        lo = np.searchsorted(flags, event[0] - tol, side="left")
        hi = np.searchsorted(flags, event[1] + tol, side="right")
        for k in range(lo, hi):
            candidates.append((_distance(int(flags[k]), event), event[0], int(flags[k]), e, k))
    candidates.sort()

    matched_events, used_flags = set(), set()
    for _, _, _, e, k in candidates:
        if e in matched_events or k in used_flags:
            continue
        matched_events.add(e)
        used_flags.add(k)

    if spec.event_level:
        for _, _, _, e, k in candidates:
            if e in matched_events:
                used_flags.add(k)

    true_positives = len(matched_events)
    return ConfusionCounts(
        true_positives=true_positives,
        false_positives=int(flags.size) - len(used_flags),
        false_negatives=len(events) - true_positives,
    )
