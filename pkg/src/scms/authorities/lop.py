"""Location obscurer proxy.

Forwards end-entity messages with the source identifier replaced by the
proxy's own id, leaving the payload byte-identical, so the registration
and misbehavior authorities never observe which device a request came
from. Replies are routed back through per-message reply references chosen
freshly by the device, never a stable device identifier.
"""

from __future__ import annotations

from ..bus import Envelope
from ..errors import InvariantViolation
from .base import Component


class Lop(Component):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._sessions: dict[bytes, str] = {}

    def handle(self, env: Envelope) -> None:
        if env.mtype == "lop.fwd":
            self._forward(env)
        else:
            self._reply(env)

    def _forward(self, env: Envelope) -> None:
        dst = env.payload["dst"]
        mtype = env.payload["mtype"]
        body = env.payload["body"]
        ref = body.get("reply_ref")
        if ref is not None:
            self._sessions[ref] = env.src
        self.bus.send(Envelope(self.id, dst, mtype, body))

    def _reply(self, env: Envelope) -> None:
        ref = env.payload.get("reply_ref")
        device = self._sessions.get(ref)
        if device is None:
            raise InvariantViolation("reply for unknown proxy session")
        self.bus.send(Envelope(self.id, device, env.mtype, env.payload))
