"""Network simulator: config validation, determinism, faults, and recovery."""

import pytest

from fakturchain import ledger, netsim, scenarios
from fakturchain.identity import Role
from fakturchain.netsim import (
    BadConfig,
    FaultKind,
    FaultRule,
    NetsimError,
    NetworkConfig,
    OrgSpec,
    config_from_dict,
    config_to_dict,
    default_config,
    spawn_network,
)


def _booted(seed, pkp_count=2, **kwargs):
    net = spawn_network(default_config(seed=seed, pkp_count=pkp_count, **kwargs))
    assert net.run_until(lambda n: n.leader() is not None, 200)
    return net


# -- configuration -----------------------------------------------------------------


def test_default_config_shape():
    config = default_config(seed=3, pkp_count=4, orderer_count=5)
    roles = [spec.role for spec in config.orgs]
    assert roles.count(Role.DJP) == 1
    assert roles.count(Role.PKP) == 4
    assert len(config.orderers) == 5
    assert config.seed == 3


@pytest.mark.parametrize(
    "mangle,complaint",
    [
        (lambda c: NetworkConfig(orgs=c.orgs, orderers=()), "orderer"),
        (
            lambda c: NetworkConfig(
                orgs=tuple(s for s in c.orgs if s.role is not Role.DJP),
                orderers=c.orderers,
            ),
            "tax-authority",
        ),
        (
            lambda c: NetworkConfig(
                orgs=c.orgs + (OrgSpec("djp-2", Role.DJP),), orderers=c.orderers
            ),
            "tax-authority",
        ),
        (
            lambda c: NetworkConfig(
                orgs=tuple(s for s in c.orgs if s.role is not Role.PKP),
                orderers=c.orderers,
            ),
            "taxable-enterprise",
        ),
        (
            lambda c: NetworkConfig(
                orgs=c.orgs + (OrgSpec("ord-x", Role.ORDERER),), orderers=c.orderers
            ),
            "named in config.orderers",
        ),
        (
            lambda c: NetworkConfig(
                orgs=c.orgs + (OrgSpec("orderer-1", Role.PKP),), orderers=c.orderers
            ),
            "unique",
        ),
        (
            lambda c: NetworkConfig(
                orgs=c.orgs,
                orderers=c.orderers,
                fault_rules=(FaultRule(FaultKind.DROP, start=10, end=10),),
            ),
            "empty",
        ),
    ],
)
def test_config_validation(mangle, complaint):
    with pytest.raises(BadConfig, match=complaint):
        spawn_network(mangle(default_config()))


def test_config_record_round_trip():
    config = default_config(seed=11, pkp_count=2)
    config = netsim.NetworkConfig(
        orgs=config.orgs,
        orderers=config.orderers,
        seed=config.seed,
        fault_rules=(
            FaultRule(FaultKind.CRASH, start=5, end=30, nodes=("orderer-1",)),
            FaultRule(
                FaultKind.TAMPER,
                start=10,
                end=20,
                message_kinds=("block",),
                offset=7,
                mask=0x20,
            ),
            FaultRule(
                FaultKind.PARTITION,
                start=40,
                end=60,
                groups=(("orderer-1", "orderer-2"),),
            ),
        ),
        tick_limit=config.tick_limit,
        vat=config.vat,
    )
    assert config_from_dict(config_to_dict(config)) == config


def test_config_from_dict_rejects_garbage():
    with pytest.raises(BadConfig):
        config_from_dict({"orgs": "nope"})
    data = config_to_dict(default_config())
    del data["orderers"]
    with pytest.raises(BadConfig):
        config_from_dict(data)


# -- determinism --------------------------------------------------------------------


def _drive(seed):
    net = _booted(seed)
    resp = net.api("pkp-01", "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 3})
    assert resp.status == 200
    body = scenarios.faktur_body(resp.body["serials"][0], "pkp-01", 0)
    assert net.api("pkp-01", "POST", "/api/v1/faktur", body).status == 200
    net.run_for(50)
    return net


def test_equal_seeds_equal_traces():
    first = _drive(71)
    second = _drive(71)
    assert first.export_trace() == second.export_trace()
    assert [b.block_hash() for b in first.org("pkp-01").chain.blocks] == [
        b.block_hash() for b in second.org("pkp-01").chain.blocks
    ]


def test_different_seeds_different_traces():
    assert _drive(71).export_trace() != _drive(72).export_trace()


def test_wire_log_captures_every_send():
    net = _booted(81)
    sends = [ev for ev in net.trace_log if ev.kind == "send"]
    assert len(net.wire_log) >= len(sends)


# -- convergence ---------------------------------------------------------------------


def test_all_members_converge_to_one_state():
    net = _drive(82)
    assert net.run_until(lambda n: len(set(n.heights().values())) == 1, 300)
    state_hashes = {
        node.chain.state_hashes[-1].hex()
        for node in list(net.org_nodes.values()) + list(net.orderer_nodes.values())
    }
    assert len(state_hashes) == 1
    for node in net.org_nodes.values():
        assert ledger.verify_chain(node.chain).ok


# -- faults ---------------------------------------------------------------------------


def test_leader_crash_recovers():
    net = _booted(83)
    fallen = net.leader()
    net.add_fault(FaultRule(FaultKind.CRASH, start=net.tick + 1, end=net.tick + 2000,
                            nodes=(fallen,)))
    net.run_for(2)
    assert net.run_until(lambda n: n.leader() is not None and n.leader() != fallen, 200)
    resp = net.api("pkp-01", "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 1})
    assert resp.status == 200, resp.error


def test_crashed_org_catches_up_after_revival():
    net = _booted(84)
    start = net.tick + 1
    net.add_fault(FaultRule(FaultKind.CRASH, start=start, end=start + 120, nodes=("pkp-02",)))
    net.run_for(2)
    resp = net.api("pkp-01", "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 2})
    assert resp.status == 200
    assert net.org("pkp-02").chain.height == 0
    net.run_until(lambda n: n.tick > start + 120, 400)
    assert net.run_until(
        lambda n: n.org("pkp-02").chain.height == n.org("pkp-01").chain.height, 400
    )
    assert ledger.verify_chain(net.org("pkp-02").chain).ok


def test_minority_partition_heals():
    net = _booted(85, orderer_count=3)
    loner = net.config.orderers[0]
    start = net.tick + 1
    net.add_fault(
        FaultRule(FaultKind.PARTITION, start=start, end=start + 80, groups=((loner,),))
    )
    net.run_for(5)
    resp = net.api("pkp-01", "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 1})
    assert resp.status == 200, resp.error
    net.run_until(lambda n: n.tick > start + 80, 400)
    assert net.run_until(
        lambda n: n.orderer(loner).chain.height
        == max(o.chain.height for o in n.orderer_nodes.values()),
        400,
    )


def test_tampered_blocks_never_corrupt_state():
    net = _booted(86)
    start = net.tick + 1
    net.add_fault(
        FaultRule(FaultKind.TAMPER, start=start, end=start + 60, message_kinds=("block",))
    )
    resp = net.api("pkp-01", "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 2})
    assert resp.status in (200, 503)
    net.run_until(lambda n: n.tick > start + 60, 400)
    tampered = [ev for ev in net.trace_log if ev.kind == "tamper"]
    assert tampered
    assert net.run_until(lambda n: len(set(n.heights().values())) == 1, 400)
    for node in net.org_nodes.values():
        assert ledger.verify_chain(node.chain).ok


def test_dropped_submits_are_retried():
    net = _booted(87)
    start = net.tick + 1
    net.add_fault(
        FaultRule(FaultKind.DROP, start=start, end=start + 30, message_kinds=("submit",))
    )
    net.run_for(2)
    resp = net.api("pkp-01", "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 1})
    assert resp.status == 200, resp.error


def test_delayed_messages_still_converge():
    net = _booted(88)
    start = net.tick + 1
    net.add_fault(
        FaultRule(FaultKind.DELAY, start=start, end=start + 50, delay=7,
                  message_kinds=("block",))
    )
    resp = net.api("pkp-01", "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 1})
    assert resp.status == 200
    assert net.run_until(lambda n: len(set(n.heights().values())) == 1, 600)


# -- attacker access ---------------------------------------------------------------


def test_attacker_node_registration():
    net = _booted(89)
    attacker = net.ensure_attacker("mallory")
    assert net.ensure_attacker("mallory") is attacker
    with pytest.raises(NetsimError):
        net.ensure_attacker("pkp-01")


def test_attacker_receives_replies():
    net = _booted(90)
    attacker = net.ensure_attacker("mallory")
    attacker.send(net.config.orderers[0], "block_request", {"number": 0})
    net.run_for(5)
    # Block zero is never served; the request falls outside the valid range.
    assert attacker.inbox == []


def test_stolen_credential_registered():
    net = _booted(91)
    keypair, cert = net.steal_credential("pkp-01")
    assert cert.subject == "pkp-01"
    assert net.stolen["pkp-01"] == (keypair, cert)
    assert any(ev.kind == "steal" for ev in net.trace_log)


def test_tick_limit_enforced():
    config = default_config(seed=92)
    config = netsim.NetworkConfig(
        orgs=config.orgs, orderers=config.orderers, seed=92, tick_limit=10
    )
    net = spawn_network(config)
    with pytest.raises(NetsimError, match="tick limit"):
        net.run_for(11)
