"""Bridge stream recorder: captures every op a wildcard-subscribed UI
client would see, as JSON lines, for offline replay (UI tests, demos).

The recorder registers under the session id the scenario script uses, so
scripted command acks land in the recording too.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from .dpsl import DpslNode

SCRIPT_SESSION_ID = "script"


class BridgeRecorder:
    def __init__(self, dpsl: DpslNode, session_id: str = SCRIPT_SESSION_ID) -> None:
        self.dpsl = dpsl
        self.rows: list[dict] = []
        self.session = dpsl.attach_session(session_id, self._record)
        self.dpsl.handle_op(self.session, {"op": "subscribe", "uav": "*", "topic": "*"})

    def _record(self, op: dict) -> None:
        self.rows.append({"t_ms": round(self.dpsl.sim.now, 3), "msg": op})

    def to_jsonl(self) -> str:
        return "".join(json.dumps(row, sort_keys=True) + "\n" for row in self.rows)

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")
