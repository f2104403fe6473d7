"""Shared fixtures: deterministic RNG and a miniature CA hierarchy."""

from dataclasses import dataclass

import pytest

from scms.certmodel import (
    ALG_DEFAULT,
    CertType,
    Certificate,
    SeriesConfig,
    TrustStore,
    issue_certificate,
)
from scms.crypto import DeterministicRandom, KeyPair


@dataclass
class MiniPki:
    rng: DeterministicRandom
    series: SeriesConfig
    root_key: KeyPair
    root_cert: Certificate
    ica_key: KeyPair
    ica_cert: Certificate
    pca_key: KeyPair
    pca_cert: Certificate
    crlg_key: KeyPair
    crlg_cert: Certificate
    trust: TrustStore


def make_component_cert(
    key: KeyPair,
    role: str,
    issuer_cert: Certificate | None,
    issuer_key: KeyPair | None,
    craca_id: bytes,
    series: int,
    enc_key=None,
    valid=(0, 10000),
) -> Certificate:
    cert = Certificate(
        ctype=CertType.COMPONENT,
        subject_key=key.public,
        valid_from=valid[0],
        valid_to=valid[1],
        psid=0,
        craca_id=craca_id,
        crl_series=series,
        issuer_id=b"\x00" * 8 if issuer_cert is None else issuer_cert.cert_id(),
        enc_key=enc_key,
        subject_info=role,
        self_signed=issuer_cert is None,
    )
    signer = key if issuer_key is None else issuer_key
    return issue_certificate(cert, signer.private, ALG_DEFAULT)


def build_mini_pki(seed: int = 1000) -> MiniPki:
    rng = DeterministicRandom(seed, "mini-pki")
    series = SeriesConfig()

    root_key = KeyPair.generate(rng)
    # the root itself is revoked via elector ballots, not a CRL, and its
    # own id cannot appear inside its encoding; zero craca marks that
    root_cert = make_component_cert(
        root_key, "root", None, None, b"\x00" * 8, series.component
    )
    craca = root_cert.cert_id()

    ica_key = KeyPair.generate(rng)
    ica_cert = make_component_cert(
        ica_key, "ica", root_cert, root_key, craca, series.component
    )
    pca_key = KeyPair.generate(rng)
    pca_cert = make_component_cert(
        pca_key, "pca", ica_cert, ica_key, craca, series.component
    )
    crlg_key = KeyPair.generate(rng)
    crlg_cert = make_component_cert(
        crlg_key, "crlg", root_cert, root_key, craca, series.root_managed
    )

    trust = TrustStore()
    for cert in (root_cert, ica_cert, pca_cert, crlg_cert):
        trust.add_cert(cert)
    trust.endorse_root(root_cert.cert_id())
    return MiniPki(
        rng=rng,
        series=series,
        root_key=root_key,
        root_cert=root_cert,
        ica_key=ica_key,
        ica_cert=ica_cert,
        pca_key=pca_key,
        pca_cert=pca_cert,
        crlg_key=crlg_key,
        crlg_cert=crlg_cert,
        trust=trust,
    )


@pytest.fixture
def pki() -> MiniPki:
    return build_mini_pki()


def make_world(**overrides):
    """Small fully wired world for component-level tests."""
    from scms.harness import ScenarioConfig, World

    defaults = dict(
        name="test", seed=123, devices=4, periods=3, batch_size=5,
        bsms_per_device_per_period=0,
    )
    defaults.update(overrides)
    return World(ScenarioConfig(**defaults))


def provision_all(world) -> None:
    """Drive request, expansion, issuance and batch pickup to completion."""
    for device in world.devices:
        device.request_certs(
            0, world.config.periods, j_max=world.config.batch_size,
            psid=world.config.psid,
        )
        world.bus.run()
    world.clock.advance_minutes(24 * 60)
    world.ra.maybe_flush()
    world.bus.run()
    for device in world.devices:
        for period in range(world.config.periods):
            device.download_batch(period)
    world.bus.run()
