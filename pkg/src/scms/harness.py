"""Scenario harness: world construction, deterministic runner, audits.

A scenario builds a complete SCMS instance (electors, root, intermediate
and enrollment CAs, RA, PCA, two LAs, MA with CRL generator, LOP, policy
generator, CRL store) plus a fleet of devices, then drives the lifecycle
period by period: bootstrap, provisioning, batch pickup, CRL pulls, BSM
traffic, scripted misbehavior and root-management events. Runs are fully
deterministic under a seed; the trace digest is the replay fingerprint.

Post-run audits enforce the separation-of-duties content rules on every
authority store, reconcile the MA's signed-query log against the
authorities' audit logs, and verify structural properties like shuffle
dispersion and request-hash traceability.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, asdict

from .authorities import (
    CertificationServices,
    CrlStore,
    Dcm,
    Eca,
    LinkageAuthority,
    Lop,
    Pca,
    Pg,
    Ra,
)
from .bus import Clock, Envelope, MessageBus, Trace
from .certmodel import (
    ALG_DOMAIN_SEP,
    CertType,
    Certificate,
    SeriesConfig,
    SignedMessage,
    issue_certificate,
)
from .crypto import DeterministicRandom, KeyPair
from .device import Device, FixedIntervalRotation
from .encoding import decode
from .errors import ScmsError
from .linkage import LinkageSeed, pre_linkage_values, seed_at
from .misbehavior import Crlg, Ma, ThresholdDetector
from .persistence import StoreRegistry
from .rootmgmt import (
    ENDORSE_ELECTOR,
    ENDORSE_ROOT,
    REVOKE_ELECTOR,
    REVOKE_ROOT,
    TrustState,
    build_ballot,
    make_elector,
)

LA1_ID = b"\x00\x00\x00\x01"
LA2_ID = b"\x00\x00\x00\x02"
CRLG_SERIES = [1, 2, 3, 4, 256]


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 1
    devices: int = 10
    periods: int = 4
    batch_size: int = 20
    psid: int = 32
    shuffle_max_count: int = 10_000
    shuffle_max_days: int = 1
    detector_threshold: int = 3
    detector_window: int = 4
    rotation_minutes: int = 5
    bsms_per_device_per_period: int = 2
    listeners_per_bsm: int = 2
    crl_capacity: int = 10_000
    mitm_devices: list[int] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    keep_trace_events: bool = False

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        data = json.loads(text)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ScmsError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


class World:
    """A fully wired SCMS instance."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.rng = DeterministicRandom(config.seed, "world")
        self.series = SeriesConfig()
        self.clock = Clock()
        self.trace = Trace(keep_events=config.keep_trace_events)
        self.bus = MessageBus(clock=self.clock, trace=self.trace)
        self.registry = StoreRegistry()
        self._build_pki()
        self._build_components()
        self._build_devices()

    # --- PKI and component identities ---

    def _component_cert(self, key, role, issuer_cert, issuer_key, series,
                        enc_pub=None, root_managed=False):
        cert = Certificate(
            ctype=CertType.COMPONENT,
            subject_key=key.public,
            valid_from=0,
            valid_to=1 << 20,
            psid=0,
            craca_id=(b"\x00" * 8 if issuer_cert is None
                      else self.root_cert.cert_id()),
            crl_series=self.series.root_managed if root_managed else series,
            issuer_id=(b"\x00" * 8 if issuer_cert is None
                       else issuer_cert.cert_id()),
            enc_key=enc_pub,
            subject_info=role,
            self_signed=issuer_cert is None,
        )
        signer = issuer_key if issuer_key is not None else key
        return issue_certificate(cert, signer.private)

    def _build_pki(self) -> None:
        rng = self.rng.child("pki")
        self.electors = [
            make_elector(rng, ALG_DOMAIN_SEP if n == 2 else 0) for n in range(3)
        ]
        self.root_key = KeyPair.generate(rng)
        self.root_cert = self._component_cert(
            self.root_key, "root", None, None, self.series.component
        )
        self.ica_key = KeyPair.generate(rng)
        self.ica_cert = self._component_cert(
            self.ica_key, "ica", self.root_cert, self.root_key,
            self.series.component,
        )

        def issue(role, issuer_cert, issuer_key, enc=False, root_managed=False):
            key = KeyPair.generate(rng)
            enc_key = KeyPair.generate(rng) if enc else None
            cert = self._component_cert(
                key, role, issuer_cert, issuer_key, self.series.component,
                enc_pub=enc_key.public if enc_key else None,
                root_managed=root_managed,
            )
            return key, enc_key, cert

        self.eca_key, _, self.eca_cert = issue("eca", self.ica_cert, self.ica_key)
        self.pca_key, self.pca_enc, self.pca_cert = issue(
            "pca", self.ica_cert, self.ica_key, enc=True
        )
        self.ra_key, self.ra_enc, self.ra_cert = issue(
            "ra", self.ica_cert, self.ica_key, enc=True
        )
        self.la1_key, self.la1_enc, self.la1_cert = issue(
            "la1", self.ica_cert, self.ica_key, enc=True
        )
        self.la2_key, self.la2_enc, self.la2_cert = issue(
            "la2", self.ica_cert, self.ica_key, enc=True
        )
        self.ma_key, self.ma_enc, self.ma_cert = issue(
            "ma", self.root_cert, self.root_key, enc=True, root_managed=True
        )
        self.crlg_key, _, self.crlg_cert = issue(
            "crlg", self.root_cert, self.root_key, root_managed=True
        )
        self.pg_key, _, self.pg_cert = issue(
            "pg", self.root_cert, self.root_key, root_managed=True
        )

    def _authority_trust(self) -> TrustState:
        trust = TrustState([cert for _, cert in self.electors])
        trust.store.add_cert(self.root_cert)
        trust.store.endorse_root(self.root_cert.cert_id())
        for cert in (self.ica_cert, self.eca_cert, self.pca_cert, self.ra_cert,
                     self.la1_cert, self.la2_cert, self.ma_cert,
                     self.crlg_cert, self.pg_cert):
            trust.store.add_cert(cert)
        return trust

    def _build_components(self) -> None:
        args = (self.bus, self.registry, self.rng)
        self.lop = Lop("lop", *args)
        self.crl_store = CrlStore("crlstore", *args)

        self.eca = Eca("eca", *args)
        self.eca.install_identity(self.eca_key, self.eca_cert)
        self.eca.configure(self.series, self.root_cert.cert_id())

        self.pca = Pca("pca", *args)
        self.pca.install_identity(self.pca_key, self.pca_cert, self.pca_enc)
        self.pca.configure(
            self.series,
            self.root_cert.cert_id(),
            {LA1_ID: self.la1_enc.public, LA2_ID: self.la2_enc.public},
            ma_cert=self.ma_cert,
            ma_query_limit=max(64, self.config.devices * 4),
        )

        self.la1 = LinkageAuthority("la1", *args)
        self.la1.install_identity(self.la1_key, self.la1_cert, self.la1_enc)
        self.la1.configure(LA1_ID, self.pca_enc.public, self.ma_cert,
                           ma_query_limit=max(64, self.config.devices * 4))
        self.la2 = LinkageAuthority("la2", *args)
        self.la2.install_identity(self.la2_key, self.la2_cert, self.la2_enc)
        self.la2.configure(LA2_ID, self.pca_enc.public, self.ma_cert,
                           ma_query_limit=max(64, self.config.devices * 4))

        self.ra = Ra("ra", *args)
        self.ra.install_identity(self.ra_key, self.ra_cert, self.ra_enc)
        self.ra.configure(
            self._authority_trust(),
            la_ids=(LA1_ID, LA2_ID),
            ma_cert=self.ma_cert,
            shuffle_max_count=self.config.shuffle_max_count,
            shuffle_max_days=self.config.shuffle_max_days,
            default_psid=self.config.psid,
        )

        crlg = Crlg(self.crlg_key, self.crlg_cert, self.root_cert.cert_id())
        self.ma = Ma("ma", *args)
        self.ma.install_identity(self.ma_key, self.ma_cert, self.ma_enc)
        self.ma.configure(
            crlg,
            self.series,
            detector=ThresholdDetector(
                threshold=self.config.detector_threshold,
                window_periods=self.config.detector_window,
            ),
        )

        self.pg = Pg("pg", *args)
        self.pg.install_identity(self.pg_key, self.pg_cert)
        self.pg.init_generator()
        gpf = self.pg.publish_gpf({
            "batch_size": self.config.batch_size,
            "rotation_minutes": self.config.rotation_minutes,
            "crl_capacity": self.config.crl_capacity,
        })
        gccf = self.pg.publish_gccf([
            [self.pca_cert.encode(), self.ica_cert.encode(),
             self.root_cert.encode()],
            [self.eca_cert.encode(), self.ica_cert.encode(),
             self.root_cert.encode()],
            [self.ma_cert.encode(), self.root_cert.encode()],
            [self.crlg_cert.encode(), self.root_cert.encode()],
        ])
        self.bus.run()

        self.certification = CertificationServices(
            {"obe-model-a", "rse-model-a"}
        )
        self.bundle = {
            "electors": [cert.encode() for _, cert in self.electors],
            "roots": [self.root_cert.encode()],
            "ica": self.ica_cert.encode(),
            "pca": self.pca_cert.encode(),
            "eca": self.eca_cert.encode(),
            "ra": self.ra_cert.encode(),
            "ma": self.ma_cert.encode(),
            "pg": self.pg_cert.encode(),
            "crlg": self.crlg_cert.encode(),
            "crlg_series": CRLG_SERIES,
            "gpf": gpf.encode(),
            "gccf": gccf.encode(),
        }
        self.dcm = Dcm(self.certification, self.eca, self.bundle)

    def _build_devices(self) -> None:
        self.devices: list[Device] = []
        for n in range(self.config.devices):
            device = Device(
                f"obe{n}",
                self.bus,
                self.rng,
                rotation=FixedIntervalRotation(self.config.rotation_minutes),
                crl_capacity=self.config.crl_capacity,
            )
            device.bootstrap(self.dcm)
            self.devices.append(device)

    # --- cross-store joins for audits and assertions ---

    def issued_certificates(self) -> list[dict]:
        """Join PCA issuance records with RA request indexes: every issued
        pseudonym certificate attributed to its device handle."""
        handles = {}
        for record in self.registry.audit_view("ra").scan("request_index"):
            handles[record["rh"]] = record["handle"]
        rows = []
        for record in self.registry.audit_view("pca").scan("issued"):
            rows.append({
                "handle": handles.get(record["rh"]),
                "rh": record["rh"],
                "i": record["i"],
                "j": record["j"],
                "lv": record["lv"],
                "cert": record["cert"],
            })
        return rows

    def device_handles(self) -> dict[str, str]:
        return {d.id: d.handle_id for d in self.devices}


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    trace_digest: str
    metrics: dict
    violations: list[str]
    world: World


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    started = time.perf_counter()
    world = World(config)
    bus, clock = world.bus, world.clock
    events_by_period: dict[int, list[dict]] = {}
    for event in config.events:
        events_by_period.setdefault(event["period"], []).append(event)

    # provisioning request phase (period 0): whole span up front
    for device in world.devices:
        if device.handle_id in {world.devices[i].handle_id for i in config.mitm_devices}:
            world.ra.mitm_handles.add(device.handle_id)
    for device in world.devices:
        device.request_certs(0, config.periods, j_max=config.batch_size,
                             psid=config.psid)
        bus.run()
    # a day passes; any sub-threshold remainder flushes on the day rule
    clock.advance_minutes(24 * 60)
    world.ra.maybe_flush()
    bus.run()

    # devices pick up every pre-generated weekly batch while they have
    # connectivity; revocation must catch offenders who already hold
    # future certificates, which is the point of linkage values
    for device in world.devices:
        for period in range(config.periods):
            device.download_batch(period)
        bus.run()

    report_periods: dict[bytes, int] = {}
    for period in range(config.periods):
        clock.set(period, 0)
        for device in world.devices:
            device.fetch_crl()
        bus.run()

        for event in events_by_period.get(period, []):
            _apply_event(world, event, report_periods)
            bus.run()

        _bsm_traffic(world, period)
        world.ra.flush_reports()
        bus.run()

    # final propagation: everyone pulls the latest CRLs once more
    clock.set(config.periods - 1, 0)
    for device in world.devices:
        device.fetch_crl()
    bus.run()

    violations = run_audits(world)
    metrics = collect_metrics(world, report_periods)
    metrics["elapsed_seconds"] = round(time.perf_counter() - started, 3)
    return ScenarioResult(
        config=config,
        trace_digest=world.trace.digest(),
        metrics=metrics,
        violations=violations,
        world=world,
    )


def _bsm_traffic(world: World, period: int) -> None:
    config = world.config
    n = len(world.devices)
    if n < 2 or config.bsms_per_device_per_period == 0:
        return
    listeners = min(config.listeners_per_bsm, n - 1)
    for b in range(config.bsms_per_device_per_period):
        # spread emissions across the week so rotation kicks in
        minute = (b * (7 * 24 * 60)) // max(1, config.bsms_per_device_per_period)
        world.clock.set(period, minute)
        for idx, device in enumerate(world.devices):
            peers = [
                world.devices[(idx + k + 1) % n].id for k in range(listeners)
            ]
            device.broadcast_bsm(peers, position=[idx, period], speed=50)
        world.bus.run()


def _apply_event(world: World, event: dict, report_periods: dict) -> None:
    action = event["action"]
    if action == "misbehavior":
        offender = world.devices[event["offender"]]
        reporters = [world.devices[i] for i in event["reporters"]]
        bsm = offender.broadcast_bsm(
            [r.id for r in reporters], position=[-3, 0], speed=50
        )
        world.bus.run()
        if bsm is None:
            raise ScmsError("offender has no certificate to misbehave with")
        reported_cert = SignedMessage.decode(bsm).cert_bytes
        lv = Certificate.decode(reported_cert).linkage_value
        report_periods.setdefault(lv, world.clock.period)
        for reporter in reporters:
            reporter.report_misbehavior(bsm)
        world.bus.run()
        world.ra.flush_reports()
    elif action == "ballot":
        _apply_ballot_event(world, event)
    elif action == "topoff":
        device = world.devices[event["device"]]
        device.request_certs(
            event["start"], event["n_periods"],
            j_max=world.config.batch_size, psid=world.config.psid,
        )
        world.bus.run()
        world.ra.flush()
    else:
        raise ScmsError(f"unknown scenario action {action!r}")


def _apply_ballot_event(world: World, event: dict) -> None:
    kind = event["kind"]
    voters = [world.electors[i] for i in event["voters"]]
    if kind == "revoke-elector":
        ballot = build_ballot(REVOKE_ELECTOR, world.electors[event["index"]][1],
                              voters)
    elif kind == "add-elector":
        new = make_elector(world.rng.child("new-elector"))
        world.electors.append(new)
        ballot = build_ballot(ENDORSE_ELECTOR, new[1], voters)
    elif kind == "endorse-root":
        ballot = build_ballot(ENDORSE_ROOT, world.root_cert, voters)
    elif kind == "revoke-root":
        ballot = build_ballot(REVOKE_ROOT, world.root_cert, voters)
    else:
        raise ScmsError(f"unknown ballot kind {kind!r}")
    payload = {"ballot": ballot.encode()}
    world.bus.send(Envelope("pg", "ra", "ballot.publish", payload))
    for device in world.devices:
        world.bus.send(Envelope("pg", device.id, "ballot.publish", payload))


# --- metrics ---

def collect_metrics(world: World, report_periods: dict) -> dict:
    pca_store = world.registry.audit_view("pca")
    certs_issued = pca_store.count("issued") + pca_store.count("issued_plain")
    rejected = {}
    accepted = 0
    for device in world.devices:
        accepted += sum(1 for ok, _ in device.received if ok)
        for reason, count in device.reject_counts.items():
            rejected[reason] = rejected.get(reason, 0) + count
    ma_store = world.registry.audit_view("ma")
    latency = []
    for record in ma_store.scan("revocation"):
        reported = report_periods.get(record["lv"])
        if reported is not None:
            latency.append(record["period"] - reported)
    return {
        "certs_issued": certs_issued,
        "crl_composite_bytes": len(world.crl_store.composite()),
        "bsms_accepted": accepted,
        "bsms_rejected": dict(sorted(rejected.items())),
        "reports_received": ma_store.count("report"),
        "revocations": world.ma.revocations_completed,
        "revocation_latency_periods": latency,
        "mitm_injected": world.ra.mitm_injected,
        "mitm_detected": sum(d.mitm_detected for d in world.devices),
        "bus_messages": world.bus.delivered,
    }


# --- post-run audits (organizational separation and bookkeeping) ---

def _walk_leaves(value, size_limit=None):
    """Yield every bytes/str leaf in a nested store record."""
    if isinstance(value, dict):
        for item in value.values():
            yield from _walk_leaves(item)
    elif isinstance(value, (list, tuple)):
        for item in value:
            yield from _walk_leaves(item)
    elif isinstance(value, (bytes, str)):
        yield value


def _namespace_leaves(namespace):
    for kind in namespace.kinds():
        for record in namespace.scan(kind):
            for leaf in _walk_leaves(record):
                yield kind, leaf


def _parses_as_cert_type(leaf: bytes, ctypes: set[CertType]) -> bool:
    from .certmodel import CERT_MAGIC

    if len(leaf) < 4 or leaf[:2] != CERT_MAGIC:
        return False
    try:
        cert = Certificate.decode(leaf)
    except Exception:
        return False
    return cert.ctype in ctypes


def _window_hits(leaf: bytes, needles: set[bytes], width: int) -> bool:
    if len(leaf) < width or len(leaf) > 256:
        return False
    return any(
        leaf[k : k + width] in needles for k in range(len(leaf) - width + 1)
    )


def run_audits(world: World) -> list[str]:
    violations: list[str] = []
    registry = world.registry
    config = world.config

    pca_ns = registry.audit_view("pca")
    ra_ns = registry.audit_view("ra")
    la1_ns = registry.audit_view("la1")
    la2_ns = registry.audit_view("la2")
    ma_ns = registry.audit_view("ma")

    pseudo_certs = {r["cert"] for r in pca_ns.scan("issued")}
    enrollment_certs = {
        r["cert"] for r in ra_ns.scan("enrollment") if r["cert"] is not None
    }
    handles = {r["handle"] for r in ra_ns.scan("enrollment")}

    # plaintext pre-linkage values and seeds per LA, over the full horizon
    la_plvs: dict[str, set[bytes]] = {}
    la_seeds: dict[str, dict[bytes, tuple[str, int]]] = {}
    for name, ns, la_id in (("la1", la1_ns, LA1_ID), ("la2", la2_ns, LA2_ID)):
        plvs: set[bytes] = set()
        seeds: dict[bytes, tuple[str, int]] = {}
        for chain in ns.scan("chain"):
            seed = LinkageSeed(chain["seed0"], chain["period0"])
            for period in range(chain["period0"],
                                chain["period0"] + config.periods + 1):
                evolved = seed_at(la_id, seed, period)
                seeds[evolved.value] = (chain["lci_digest"], period)
                for plv in pre_linkage_values(la_id, evolved,
                                              config.batch_size):
                    plvs.add(plv.value)
        la_plvs[name] = plvs
        la_seeds[name] = seeds

    # RA: no plaintext pseudonym certificates, no pre-linkage values
    all_plvs = la_plvs["la1"] | la_plvs["la2"]
    for kind, leaf in _namespace_leaves(ra_ns):
        if isinstance(leaf, str):
            continue
        if leaf in pseudo_certs or _parses_as_cert_type(
            leaf, {CertType.OBE_PSEUDONYM}
        ):
            violations.append(f"ra:{kind}: plaintext pseudonym certificate")
        if leaf in all_plvs or _window_hits(leaf, all_plvs, 9):
            violations.append(f"ra:{kind}: plaintext pre-linkage value")

    # PCA: no enrollment certificates, no device identifiers
    enrollment_types = {CertType.OBE_ENROLLMENT, CertType.RSE_ENROLLMENT}
    for kind, leaf in _namespace_leaves(pca_ns):
        if isinstance(leaf, str):
            if leaf in handles:
                violations.append(f"pca:{kind}: device handle present")
            continue
        if leaf in enrollment_certs or _parses_as_cert_type(
            leaf, enrollment_types
        ):
            violations.append(f"pca:{kind}: enrollment certificate present")

    # LA isolation: neither LA holds the other's seeds or pre-linkage values
    for mine, theirs in (("la1", "la2"), ("la2", "la1")):
        ns = registry.audit_view(mine)
        other_seeds = set(la_seeds[theirs])
        other_plvs = la_plvs[theirs]
        for kind, leaf in _namespace_leaves(ns):
            if isinstance(leaf, str):
                continue
            if leaf in other_seeds or _window_hits(leaf, other_seeds, 16):
                violations.append(f"{mine}:{kind}: foreign linkage seed")
            if leaf in other_plvs or _window_hits(leaf, other_plvs, 9):
                violations.append(f"{mine}:{kind}: foreign pre-linkage value")

    # MA: linkage material only for investigated devices, current period on
    investigated_chains: set[str] = set()
    revocation_periods: dict[str, int] = {}
    for record in ma_ns.scan("revocation"):
        for name in ("la1", "la2"):
            hit = la_seeds[name].get(record["ls1"]) or la_seeds[name].get(
                record["ls2"]
            )
            if hit is not None:
                investigated_chains.add(hit[0])
                revocation_periods[hit[0]] = record["period"]
    all_seed_maps = {**la_seeds["la1"], **la_seeds["la2"]}
    for kind, leaf in _namespace_leaves(ma_ns):
        if isinstance(leaf, str) or len(leaf) != 16:
            continue
        hit = all_seed_maps.get(leaf)
        if hit is None:
            continue
        chain, period = hit
        if chain not in investigated_chains:
            violations.append(f"ma:{kind}: seed for uninvestigated device")
        elif period < revocation_periods.get(chain, 0):
            violations.append(f"ma:{kind}: pre-revocation seed (backward privacy)")

    # every issued certificate traces to exactly one enrollment record
    index_by_rh = {}
    for record in ra_ns.scan("request_index"):
        index_by_rh.setdefault(record["rh"], []).append(record["handle"])
    for record in pca_ns.scan("issued"):
        owners = index_by_rh.get(record["rh"], [])
        if len(owners) != 1:
            violations.append("traceability: request hash maps to "
                              f"{len(owners)} enrollment records")

    # audit reconciliation: every served MA query has a matching signed
    # request logged at the MA
    sent = {
        (r["dst"], r["op"], r["object"]) for r in ma_ns.scan("audit_sent")
    }
    for ns_name in ("pca", "la1", "la2", "ra"):
        for record in registry.audit_view(ns_name).scan("audit"):
            if record["op"].endswith(".refused"):
                continue
            if (ns_name, record["op"], record["object"]) not in sent:
                violations.append(
                    f"audit: orphan {record['op']} served by {ns_name}"
                )

    # CRL propagation: all devices hold the latest CRL per series
    for crl in world.crl_store._crls.all_crls():
        for device in world.devices:
            meta = device.crl_store._meta.get((crl.craca_id, crl.series))
            if meta is None or meta[0] < crl.sequence:
                if not _device_revoked(world, device):
                    violations.append(
                        f"distribution: {device.id} missing CRL series "
                        f"{crl.series}"
                    )

    # quarantined packages must never yield usable certificates
    for device in world.devices:
        quarantined = {q["digest"] for q in device.quarantined}
        if quarantined and world.ra.mitm_injected:
            for per_period in device.certs.values():
                for entry in per_period:
                    if hashlib.sha256(entry["cert_bytes"]).digest() in quarantined:
                        violations.append(
                            f"{device.id}: quarantined certificate in use"
                        )
    return violations


def _device_revoked(world: World, device: Device) -> bool:
    record = None
    for r in world.registry.audit_view("ra").scan("enrollment"):
        if r["handle"] == device.handle_id:
            record = r
            break
    return bool(record and record["blacklisted"])


def shuffle_dispersion(world: World) -> float:
    """Fraction of devices whose requests did NOT arrive contiguously at
    the PCA (structural unlinkability of the shuffle)."""
    arrivals: dict[str, list[int]] = {}
    index_by_rh = {
        r["rh"]: r["handle"]
        for r in world.registry.audit_view("ra").scan("request_index")
    }
    for pos, record in enumerate(world.registry.audit_view("pca").scan("issued")):
        handle = index_by_rh.get(record["rh"])
        arrivals.setdefault(handle, []).append(pos)
    if not arrivals:
        return 1.0
    non_contiguous = 0
    for positions in arrivals.values():
        if len(positions) <= 1:
            non_contiguous += 1
            continue
        span = max(positions) - min(positions) + 1
        if span != len(positions):
            non_contiguous += 1
    return non_contiguous / len(arrivals)
