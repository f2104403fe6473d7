"""Linkage authority.

Keeps one seed chain per linkage chain identifier (LCI), hands out
pre-linkage values encrypted for the PCA (routed opaquely through the RA),
and answers two tightly controlled misbehavior-authority queries: whether
two encrypted pre-linkage values belong to the same chain (one bit), and
the chain's seed at the current period for CRL publication. Every served
query is rate-limited, signature-checked and written to the audit log.
"""

from __future__ import annotations

import hashlib

from ..certmodel import Certificate, SignedMessage, verify_message
from ..crypto import channel_encrypt, channel_key, hybrid_decrypt, hybrid_encrypt
from ..crypto.hybrid import HybridCiphertext
from ..encoding import decode, encode
from ..linkage import LinkageSeed, check_la_id, pre_linkage_values, seed_at
from .base import Component


class LinkageAuthority(Component):
    def configure(
        self,
        la_id: bytes,
        pca_enc_pub,
        ma_cert: Certificate,
        ma_query_limit: int = 64,
    ) -> None:
        self.la_id = check_la_id(la_id)
        self._pca_channel = channel_key(
            self.enc_keypair.private, pca_enc_pub, b"la-to-pca|" + la_id
        )
        self.ma_cert = ma_cert
        self.ma_query_limit = ma_query_limit
        self._ma_queries: dict[int, int] = {}

    # --- chain management (RA-facing) ---

    def _chain_record(self, lci_digest: str) -> dict | None:
        return self.store.first("chain", lci_digest=lci_digest)

    def _seed_for(self, record: dict, period: int) -> LinkageSeed:
        start = LinkageSeed(record["seed0"], record["period0"])
        return seed_at(self.la_id, start, period)

    def _encrypted_plvs(self, record: dict, start: int, n_periods: int,
                        j_max: int, lci_digest: str) -> list:
        out = []
        for i in range(start, start + n_periods):
            seed = self._seed_for(record, i)
            for plv in pre_linkage_values(self.la_id, seed, j_max):
                ct = channel_encrypt(
                    self._pca_channel,
                    encode({"plv": plv.value, "i": plv.i, "j": plv.j}),
                    self.rng,
                )
                self.store.put(
                    "plv_index",
                    {"ct_digest": hashlib.sha256(ct).hexdigest(),
                     "lci_digest": lci_digest},
                )
                out.append([plv.i, plv.j, ct])
        return out

    def on_chain_open(self, env) -> None:
        """Open a fresh chain for an anonymous device and return the LCI
        plus the requested grid of encrypted pre-linkage values."""
        start = env.payload["start"]
        seed0 = self.rng.randbytes(16)
        lci = hybrid_encrypt(
            self.enc_keypair.public,
            encode({"seed": seed0, "period": start}),
            self.rng,
        ).encode()
        lci_digest = hashlib.sha256(lci).hexdigest()
        record = self.store.put(
            "chain",
            {"lci_digest": lci_digest, "seed0": seed0, "period0": start,
             "la_id": self.la_id},
        )
        plvs = self._encrypted_plvs(
            record, start, env.payload["n_periods"], env.payload["j_max"],
            lci_digest,
        )
        self.send(env.src, "chain.plvs", {
            "ref": env.payload["ref"], "lci": lci, "plvs": plvs,
        })

    def on_plv_request(self, env) -> None:
        """Further pre-linkage values for an existing chain (top-off)."""
        lci = env.payload["lci"]
        lci_digest = hashlib.sha256(lci).hexdigest()
        record = self._chain_record(lci_digest)
        if record is None:
            self.send(env.src, "chain.error", {
                "ref": env.payload["ref"], "reason": "unknown chain",
            })
            return
        plvs = self._encrypted_plvs(
            record, env.payload["start"], env.payload["n_periods"],
            env.payload["j_max"], lci_digest,
        )
        self.send(env.src, "chain.plvs", {
            "ref": env.payload["ref"], "lci": lci, "plvs": plvs,
        })

    # --- misbehavior-authority queries ---

    def _check_ma_request(self, env):
        """Verify the MA signature and the per-period quota; returns the
        decoded payload plus its digest (the audit-log object), or None
        after sending a refusal."""
        msg = SignedMessage.decode(env.payload["q"])
        if not verify_message(msg, self.ma_cert):
            self.audit_log(env.src, env.mtype + ".refused", b"bad-signature")
            self.send(env.src, "ma.refused", {
                "op": env.mtype, "reason": "bad signature",
            })
            return None
        period = self.clock.period
        count = self._ma_queries.get(period, 0)
        if count >= self.ma_query_limit:
            self.audit_log(env.src, env.mtype + ".refused", b"over-quota")
            self.send(env.src, "ma.refused", {
                "op": env.mtype, "reason": "rate limited",
            })
            return None
        self._ma_queries[period] = count + 1
        digest = hashlib.sha256(msg.payload).hexdigest()
        self.audit_log(env.src, env.mtype, digest)
        return decode(msg.payload), digest

    def on_ma_samedev(self, env) -> None:
        checked = self._check_ma_request(env)
        if checked is None:
            return
        request, digest = checked
        rec_a = self.store.first(
            "plv_index", ct_digest=hashlib.sha256(request["ct_a"]).hexdigest()
        )
        rec_b = self.store.first(
            "plv_index", ct_digest=hashlib.sha256(request["ct_b"]).hexdigest()
        )
        same = (
            rec_a is not None
            and rec_b is not None
            and rec_a["lci_digest"] == rec_b["lci_digest"]
        )
        self.send(env.src, "ma.samedev.resp", {"same": same, "echo": digest})

    def on_ma_lci2seed(self, env) -> None:
        checked = self._check_ma_request(env)
        if checked is None:
            return
        request, digest = checked
        lci = request["lci"]
        record = self._chain_record(hashlib.sha256(lci).hexdigest())
        if record is None:
            self.send(env.src, "ma.lci2seed.resp", {
                "found": False, "echo": digest,
            })
            return
        # self-decryption sanity: the LCI must open to the stored seed
        opened = decode(
            hybrid_decrypt(
                self.enc_keypair.private, HybridCiphertext.decode(lci)
            )
        )
        assert opened["seed"] == record["seed0"]
        seed = self._seed_for(record, request["period"])
        self.send(env.src, "ma.lci2seed.resp", {
            "found": True, "ls": seed.value, "la_id": self.la_id,
            "echo": digest,
        })
