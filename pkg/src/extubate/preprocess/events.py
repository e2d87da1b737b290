"""Conversion of event records to a long-format frame."""

from __future__ import annotations

import pandas as pd

COLUMNS = ["patient_id", "feature", "time", "value"]


def as_event_frame(events) -> pd.DataFrame:
    """Accept a frame or an iterable of ``EventRecord``; return a frame with the four columns.

    Input order is preserved: it decides which of two same-minute
    observations is the later-recorded one.
    """
    if isinstance(events, pd.DataFrame):
        missing = set(COLUMNS) - set(events.columns)
        if missing:
            raise ValueError(f"event frame lacks columns {sorted(missing)}")
        return events
    rows = [(e.patient_id, e.feature, e.time, e.value) for e in events]
    return pd.DataFrame(rows, columns=COLUMNS).astype({"time": float, "value": float})
