"""Common machinery for SCMS components.

Each component is a single-threaded state machine with a private store
namespace, its own deterministic random stream and a signing identity.
Envelopes dispatch to ``on_<message_type>`` methods (dots become
underscores).
"""

from __future__ import annotations

from ..bus import Envelope, MessageBus
from ..certmodel import Certificate
from ..crypto import DeterministicRandom, KeyPair
from ..errors import InvariantViolation
from ..persistence import StoreRegistry


class Component:
    def __init__(
        self,
        component_id: str,
        bus: MessageBus,
        registry: StoreRegistry,
        rng: DeterministicRandom,
    ):
        self.id = component_id
        self.bus = bus
        self.clock = bus.clock
        self.store = registry.create(component_id)
        self.rng = rng.child(component_id)
        self.keypair: KeyPair | None = None
        self.enc_keypair: KeyPair | None = None
        self.cert: Certificate | None = None
        bus.register(component_id, self)

    def install_identity(
        self,
        keypair: KeyPair,
        cert: Certificate,
        enc_keypair: KeyPair | None = None,
    ) -> None:
        self.keypair = keypair
        self.cert = cert
        self.enc_keypair = enc_keypair

    def send(self, dst: str, mtype: str, payload: dict) -> None:
        self.bus.send(Envelope(self.id, dst, mtype, payload))

    def handle(self, env: Envelope) -> None:
        handler = getattr(self, "on_" + env.mtype.replace(".", "_"), None)
        if handler is None:
            raise InvariantViolation(
                f"component {self.id} cannot handle message type {env.mtype!r}"
            )
        handler(env)

    def audit_log(self, requester: str, op: str, obj: bytes | str) -> None:
        """Append-only record of a served sensitive request."""
        self.store.put(
            "audit",
            {
                "period": self.clock.period,
                "requester": requester,
                "op": op,
                "object": obj.hex() if isinstance(obj, bytes) else obj,
            },
        )
