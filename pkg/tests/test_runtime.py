import json

import numpy as np
import pytest

from consumelab.matching import MhmInstance, random_instance
from consumelab.mlrs import identity_instance
from consumelab.quantum import make_rng, normalize
from consumelab.runtime import (
    PROTOCOLS,
    CostLedger,
    LedgerMismatch,
    ProtocolSpec,
    ScenarioConfig,
    ScenarioViolation,
    Session,
    charge_classical,
    mint_register,
    register_protocol,
    run_protocol,
)


class TestLedger:
    def test_charge_classical(self):
        ledger = charge_classical(CostLedger(), 5)
        assert ledger.classical_bits == 5
        charge_classical(ledger, 0)
        assert ledger.classical_bits == 5

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            charge_classical(CostLedger(), -1)
        with pytest.raises(ValueError):
            CostLedger().charge_qubits(-1)

    @pytest.mark.parametrize("dim, qubits", [(4, 2), (1000, 10), (1, 0)])
    def test_mint_charges_qubits(self, dim, qubits):
        ledger = CostLedger()
        mint_register(normalize(np.ones(dim)), ledger)
        assert ledger.qubits == qubits

    def test_minting_is_additive(self):
        ledger = CostLedger()
        for _ in range(7):
            mint_register(normalize(np.ones(16)), ledger)
        assert ledger.qubits == 28

    def test_iadd(self):
        a = CostLedger(3, 4)
        a += CostLedger(1, 2)
        assert (a.classical_bits, a.qubits) == (4, 6)


class TestSession:
    def test_classical_message_charged(self):
        s = Session()
        msg = s.send_classical([1, 0, 1])
        assert msg.payload == (1, 0, 1) and msg.size == 3
        assert s.ledger.classical_bits == 3
        assert s.transcript[-1].charged

    def test_quantum_blocked_on_classical_channel(self):
        s = Session(ScenarioConfig(alice_channel="classical"))
        with pytest.raises(ScenarioViolation):
            s.send_quantum(normalize([1, 0]), "bob1")

    def test_bob_traffic_free_but_logged(self):
        s = Session()
        s.bob_message("bob1", "bob2", 100)
        assert s.ledger.classical_bits == 0
        assert s.transcript[-1].charged is False

    @pytest.mark.parametrize(
        "interconnect, kind, sender",
        [("quantum", "classical", "bob1"), ("classical", "quantum", "bob1"),
         ("none", "classical", "bob1"), ("classical", "classical", "alice")],
    )
    def test_bob_traffic_violations(self, interconnect, kind, sender):
        s = Session(ScenarioConfig(bobs_interconnect=interconnect))
        with pytest.raises(ScenarioViolation):
            s.bob_message(sender, "bob2", 1, kind=kind)

    def test_transcript_jsonl(self):
        s = Session()
        s.send_classical([1])
        s.send_quantum(normalize([1, 0, 0, 0]), "bob1")
        lines = [json.loads(line) for line in s.transcript_jsonl().splitlines()]
        assert [r["kind"] for r in lines] == ["classical", "quantum"]
        assert lines[1]["size"] == 2

    def test_bad_config(self):
        with pytest.raises(ValueError):
            ScenarioConfig(m=0)
        with pytest.raises(ValueError):
            ScenarioConfig(alice_channel="carrier pigeon")


class TestRunProtocol:
    def test_det_ledger(self):
        inst = random_instance(8, 3, make_rng(0))
        assert run_protocol(inst, "mhm-det").ledger.classical_bits == 5

    def test_quantum_ledger(self):
        inst = random_instance(4, 3, make_rng(0))
        run = run_protocol(inst, "mhm-quantum", make_rng(1))
        assert run.ledger.qubits == 6
        assert len(run.transcript) == 3

    def test_unknown_protocol(self):
        with pytest.raises(KeyError):
            run_protocol(random_instance(4, 1, make_rng(0)), "telepathy")

    def test_wrong_instance_type(self):
        with pytest.raises(TypeError):
            run_protocol(identity_instance(4, 1, make_rng(0)), "mhm-det")

    def test_quantum_interconnect_disallowed(self):
        cfg = ScenarioConfig(alice_channel="quantum", bobs_interconnect="quantum")
        with pytest.raises(ScenarioViolation):
            run_protocol(random_instance(4, 1, make_rng(0)), "mhm-quantum", config=cfg)

    def test_channel_mismatch(self):
        cfg = ScenarioConfig(alice_channel="classical")
        with pytest.raises(ScenarioViolation):
            run_protocol(random_instance(4, 1, make_rng(0)), "mhm-quantum", config=cfg)

    def test_seed_from_config(self):
        inst = random_instance(16, 4, make_rng(0))
        a = run_protocol(inst, "mhm-quantum", config=ScenarioConfig(seed=9)).outputs
        b = run_protocol(inst, "mhm-quantum", config=ScenarioConfig(seed=9)).outputs
        assert a == b

    def test_ledger_audit_catches_drift(self):
        def leaky(inst, rng, session, **_):
            session.send_classical([0, 0])
            return None, session.ledger

        register_protocol(ProtocolSpec("leaky", MhmInstance, "classical", leaky, lambda *a, **k: CostLedger(1)))
        try:
            with pytest.raises(LedgerMismatch):
                run_protocol(random_instance(4, 1, make_rng(0)), "leaky")
        finally:
            PROTOCOLS.pop("leaky")
