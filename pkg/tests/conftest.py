import random

import pytest

from fakturchain import crypto, identity
from fakturchain.chaincode import VatConfig, WorldState
from fakturchain.identity import CertificateAuthority, Role


@pytest.fixture
def ca() -> CertificateAuthority:
    return CertificateAuthority(random.Random("ca-fixture"))


@pytest.fixture
def pkp(ca):
    """(keypair, certificate) for a taxable enterprise."""
    keypair = crypto.generate_keypair(random.Random("pkp-key"))
    cert = identity.issue_certificate(ca, "pkp-01", Role.PKP, keypair.public_bundle)
    return keypair, cert


@pytest.fixture
def djp(ca):
    """(keypair, certificate) for the tax authority."""
    keypair = crypto.generate_keypair(random.Random("djp-key"))
    cert = identity.issue_certificate(ca, "djp", Role.DJP, keypair.public_bundle)
    return keypair, cert


@pytest.fixture
def vat_config() -> VatConfig:
    return VatConfig()


@pytest.fixture
def state() -> WorldState:
    return WorldState()
