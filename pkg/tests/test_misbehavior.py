"""MA pipeline tests: detection thresholds, boolean investigation,
pseudonym and non-pseudonym revocation, rate limits, audit trails."""

import pytest

from scms.bus import Envelope
from scms.certmodel import (
    CertType,
    Certificate,
    check_crl_signature,
    crl_check,
    CrlSet,
    sign_message,
    verify_chain,
)
from scms.crypto import DeterministicRandom, KeyPair
from scms.device import Device
from scms.encoding import encode
from scms.misbehavior import ThresholdDetector
from tests.conftest import make_world, provision_all


def _report(lv, reporter, period=0):
    return {"lv": lv, "reporter_cert_id": reporter, "period": period}


# --- detector ---

def test_detector_empty():
    detector = ThresholdDetector(threshold=3)
    assert detector([], period=0) == set()


def test_detector_threshold_met():
    detector = ThresholdDetector(threshold=3)
    reports = [_report(b"lv-a" * 2 + b"x", f"r{k}".encode()) for k in range(3)]
    assert detector(reports, period=0) == {b"lv-a" * 2 + b"x"}


def test_detector_below_threshold():
    detector = ThresholdDetector(threshold=3)
    reports = [_report(b"lv-b" * 2 + b"x", f"r{k}".encode()) for k in range(2)]
    assert detector(reports, period=0) == set()
    # duplicate reporters do not inflate the count
    reports.append(_report(b"lv-b" * 2 + b"x", b"r0"))
    assert detector(reports, period=0) == set()


def test_detector_window():
    detector = ThresholdDetector(threshold=2, window_periods=1)
    reports = [
        _report(b"lv-old-old!", b"r0", period=0),
        _report(b"lv-old-old!", b"r1", period=5),
    ]
    assert detector(reports, period=5) == set()  # r0 outside the window
    reports.append(_report(b"lv-old-old!", b"r2", period=4))
    assert detector(reports, period=5) == {b"lv-old-old!"}


# --- full pipeline via scenario ---

def _revocation_world():
    world = make_world(devices=5, periods=4, batch_size=4,
                       bsms_per_device_per_period=0)
    provision_all(world)
    return world


def _file_reports(world, offender_idx, reporter_idxs, period):
    world.clock.set(period, 0)
    offender = world.devices[offender_idx]
    reporters = [world.devices[i] for i in reporter_idxs]
    bsm = offender.broadcast_bsm([r.id for r in reporters],
                                 position=[-3, 0], speed=50)
    world.bus.run()
    for reporter in reporters:
        reporter.report_misbehavior(bsm)
    world.bus.run()
    world.ra.flush_reports()
    world.bus.run()
    return bsm


def test_reports_reach_ma_shuffled_and_encrypted():
    world = _revocation_world()
    _file_reports(world, 0, [1, 2], period=1)  # below threshold: no action
    ma_store = world.registry.audit_view("ma")
    assert ma_store.count("report") == 2
    # the RA only ever held ciphertext digests
    ra_store = world.registry.audit_view("ra")
    assert ra_store.count("report_ciphertext") == 2
    assert world.ma.revocations_completed == 0


def test_malformed_reports_quarantined_not_crash():
    world = _revocation_world()
    from scms.bus import Envelope as E
    from scms.crypto import hybrid_encrypt

    junk_encrypted = hybrid_encrypt(
        world.ma_enc.public, b"\xde\xad", world.rng
    ).encode()
    world.bus.send(E("ra", "ma", "mb.batch", {
        "reports": [b"\x00" * 60, junk_encrypted],
    }))
    world.bus.run()
    bad = world.registry.audit_view("ma").scan("bad_report")
    assert len(bad) == 2
    assert world.ma.revocations_completed == 0


def test_report_batch_order_decorrelated_from_filing_order():
    # reporter-path privacy: the MA's arrival order is a shuffle of the
    # filing order, so report position does not identify the reporter
    world = make_world(devices=10, periods=2, batch_size=3,
                       detector_threshold=99)
    provision_all(world)
    world.clock.set(1, 0)
    offender = world.devices[0]
    reporters = world.devices[1:]
    bsm = offender.broadcast_bsm([r.id for r in reporters],
                                 position=[-3, 0], speed=50)
    world.bus.run()
    for reporter in reporters:
        reporter.report_misbehavior(bsm)
    world.bus.run()
    world.ra.flush_reports()
    world.bus.run()
    # recover arrival order from the MA batch the RA sent: reports are
    # stored in arrival order with one record per report
    arrival = world.registry.audit_view("ma").scan("report")
    assert len(arrival) == 9
    reporter_ids = [r["reporter_cert_id"] for r in arrival]
    # map filing order to reporter cert ids for comparison
    assert len(set(reporter_ids)) == 9
    filed_ids = []
    for reporter in reporters:
        entry = reporter.current_certs()[
            reporter.rotation.choose(len(reporter.current_certs()),
                                     world.clock.minute)
        ]
        filed_ids.append(entry["cert"].cert_id())
    assert set(filed_ids) == set(reporter_ids)
    assert filed_ids != reporter_ids  # seeded shuffle reordered them


def test_full_revocation_flags_forward_periods_only():
    world = _revocation_world()
    _file_reports(world, 0, [1, 2, 3], period=2)
    assert world.ma.revocations_completed == 1

    offender = world.devices[0]
    crl_set = CrlSet()
    for crl in world.crl_store._crls.all_crls():
        crl_set.add(crl)
    flagged = {
        (r["i"], r["j"])
        for r in world.issued_certificates()
        if r["handle"] == offender.handle_id
        and crl_check(Certificate.decode(r["cert"]), crl_set).is_revoked
    }
    assert flagged == {(i, j) for i in (2, 3) for j in range(4)}

    # blacklist: the next provisioning request is denied
    offender.request_certs(10, 1)
    world.bus.run()
    assert offender.provision_status == "denied"

    # MA holds the period-2 seeds and nothing earlier
    ma_store = world.registry.audit_view("ma")
    revocation = ma_store.scan("revocation")[0]
    assert revocation["period"] == 2
    la1 = world.registry.audit_view("la1")
    from scms.linkage import LinkageSeed, seed_at

    chain = None
    for c in la1.scan("chain"):
        s2 = seed_at(b"\x00\x00\x00\x01", LinkageSeed(c["seed0"], c["period0"]), 2)
        if s2.value == revocation["ls1"]:
            chain = c
            break
    assert chain is not None, "revoked seed must come from an LA chain"
    s1 = seed_at(b"\x00\x00\x00\x01", LinkageSeed(chain["seed0"], chain["period0"]), 1)
    for kind in ma_store.kinds():
        for record in ma_store.scan(kind):
            assert s1.value not in record.values()


def test_revocation_idempotent_for_same_lv():
    world = _revocation_world()
    _file_reports(world, 0, [1, 2, 3], period=1)
    assert world.ma.revocations_completed == 1
    # more reports against the same linkage value change nothing
    _file_reports(world, 0, [1, 2, 3], period=1)
    assert world.ma.revocations_completed == 1


# --- investigation (boolean only) ---

def test_same_device_verdicts():
    world = _revocation_world()
    issued = world.issued_certificates()
    by_handle = {}
    for row in issued:
        by_handle.setdefault(row["handle"], []).append(row)
    h0 = world.devices[0].handle_id
    h1 = world.devices[1].handle_id
    same_a, same_b = by_handle[h0][0], by_handle[h0][1]
    other = by_handle[h1][0]

    world.ma.request_same_device(same_a["lv"], same_b["lv"])
    world.bus.run()
    world.ma.request_same_device(same_a["lv"], other["lv"])
    world.bus.run()
    verdicts = world.registry.audit_view("ma").scan("verdict")
    assert len(verdicts) == 2
    assert verdicts[0]["same"] is True
    assert verdicts[1]["same"] is False
    # the MA learned booleans; the LA logged both served queries
    la_audit = world.registry.audit_view("la1").where("audit", op="ma.samedev")
    assert len(la_audit) == 2


def test_unsigned_ma_query_refused_and_logged():
    world = _revocation_world()
    intruder = KeyPair.generate(DeterministicRandom(999))
    fake = sign_message(intruder.private, world.ma_cert, encode({"lv": b"x" * 9}))
    world.bus.send(Envelope("ma", "pca", "ma.lv2plv", {"q": fake.encode()}))
    world.bus.run()
    refusals = world.registry.audit_view("ma").scan("refusal")
    assert refusals and refusals[0]["reason"] == "bad signature"
    audit = world.registry.audit_view("pca").where(
        "audit", op="ma.lv2plv.refused"
    )
    assert len(audit) == 1


def test_rate_limited_queries_refused():
    world = _revocation_world()
    # one seed query per revocation: a quota of one stalls the second
    world.la1.ma_query_limit = 1
    _file_reports(world, 0, [1, 2, 3], period=1)
    assert world.ma.revocations_completed == 1
    _file_reports(world, 1, [2, 3, 4], period=1)
    assert world.ma.revocations_completed == 1  # blocked by the quota
    refusals = world.registry.audit_view("ma").scan("refusal")
    assert any(r["reason"] == "rate limited" for r in refusals)
    over_quota = world.registry.audit_view("la1").where(
        "audit", op="ma.lci2seed.refused"
    )
    assert len(over_quota) == 1


def test_audit_reconciliation_finds_no_orphans():
    world = _revocation_world()
    _file_reports(world, 0, [1, 2, 3], period=1)
    for device in world.devices:
        device.fetch_crl()
    world.bus.run()
    from scms.harness import run_audits

    violations = run_audits(world)
    assert violations == []


# --- non-pseudonym revocation ---

def _rse_world():
    world = make_world(devices=2, periods=3)
    rse = Device("rse0", world.bus, world.rng, model="rse-model-a")
    rse.bootstrap(world.dcm, ctype=CertType.RSE_ENROLLMENT,
                  subject_info="rse-unit-0")
    world.rse = rse
    return world


def test_rse_application_issuance_and_revocation():
    world = _rse_world()
    rse = world.rse
    rse.request_app_certs(
        CertType.RSE_APPLICATION,
        validities=[[0, 10], [11, 20], [21, 30]],
        psid=130,
        with_enc_key=True,
    )
    world.bus.run()
    assert len(rse.app_certs) == 3
    for entry in rse.app_certs:
        cert = entry["cert"]
        assert cert.ctype == CertType.RSE_APPLICATION
        assert cert.enc_key is not None
        assert verify_chain(cert, rse.trust.store).ok

    world.ma.start_certificate_revocation(rse.app_certs[0]["cert_bytes"])
    world.bus.run()
    crl = world.crl_store._crls.get(world.root_cert.cert_id(), 3)
    assert crl is not None
    assert len(crl.certid_entries) == 3
    assert all(len(e.cert_id) == 8 for e in crl.certid_entries)
    ids = {e.cert_id for e in crl.certid_entries}
    assert ids == {e["cert"].cert_id() for e in rse.app_certs}
    # enrollment blacklisted: further app requests denied
    rse.request_app_certs(CertType.RSE_APPLICATION, [[31, 40]], psid=130)
    world.bus.run()
    assert rse.provision_status == "denied"


def test_expired_only_device_blacklist_without_crl_delta():
    world = _rse_world()
    rse = world.rse
    rse.request_app_certs(CertType.RSE_APPLICATION, [[0, 1]], psid=130)
    world.bus.run()
    world.clock.set(2, 0)  # the only cert is now expired
    world.ma.start_certificate_revocation(rse.app_certs[0]["cert_bytes"])
    world.bus.run()
    assert world.crl_store._crls.get(world.root_cert.cert_id(), 3) is None
    record = world.registry.audit_view("ma").scan("revocation_nonpseudo")[0]
    assert record["cert_ids"] == []
    rse.request_app_certs(CertType.RSE_APPLICATION, [[5, 6]], psid=130)
    world.bus.run()
    assert rse.provision_status == "denied"


def test_pseudonym_cert_rejected_by_nonpseudonym_pipeline():
    world = _revocation_world()
    row = world.issued_certificates()[0]
    with pytest.raises(ValueError):
        world.ma.start_certificate_revocation(row["cert"])


# --- CRLG ---

def test_crlg_groups_and_sequence():
    world = make_world(devices=6, periods=3, batch_size=3)
    provision_all(world)
    world.clock.set(1, 0)
    _file_reports(world, 0, [2, 3, 4], period=1)
    _file_reports(world, 1, [2, 3, 4], period=1)
    crl = world.crl_store._crls.get(world.root_cert.cert_id(), 1)
    assert crl.sequence == 2  # one publication per completed revocation
    assert len(crl.linkage_entries) == 2
    raw = crl.tbs_bytes()
    n_groups = int.from_bytes(raw[29:31], "big")
    assert n_groups == 1  # same la_id pair and period: one group header

    # reissue with no new orders: same entries, new sequence
    reissued = world.ma.publish_crl(1)
    assert reissued.sequence == 3
    assert reissued.linkage_entries == crl.linkage_entries

    # the CRLG signature chains to the CRACA of the series
    assert check_crl_signature(reissued, world.crlg_cert)
    assert verify_chain(world.crlg_cert, world.devices[0].trust.store).ok
