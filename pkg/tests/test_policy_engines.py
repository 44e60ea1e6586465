import random
import uuid
from collections import Counter

import pytest

from policy.engines.base import OutputProposal
from policy.engines.model_engine import ModelPolicyEngine
from policy.engines.registry import EngineRegistry, default_registry
from policy.engines.training_engine import SHARE_PER_PAD, TrainingPolicyEngine
from policy.errors import DuplicateEngine
from policy.model import (
    MODEL_POLICY_LANG_ID,
    TRAINING_POLICY_LANG_ID,
    AuthUserRule,
    CustodianRule,
    Policy,
    ProgramHashRule,
    ProgramKind,
    RateLimitRule,
    RuleType,
    SamePolicyRule,
    ShareCapRule,
    UnknownRule,
)
from policy.rate_limiter import QueryRateLimiter, window_start_of
from scenario.policies import model_policy, owner_restriction, training_data_policy
from tests.conftest import TEST_URI, decrypted, program

JOINT = uuid.uuid4()
A, B, C = uuid.uuid4(), uuid.uuid4(), uuid.uuid4()


class FakeClock:
    def __init__(self, now: float = 1_700_000_040.0):
        self.now = now

    def __call__(self) -> float:
        return self.now


@pytest.fixture
def trainer():
    return program(ProgramKind.TRAINING, A)


@pytest.fixture
def hospitals(trainer):
    def build(*members):
        caps = {A: (100, 60), B: (50, 30), C: (50, 40)}
        return [decrypted([training_data_policy(caps[h][1], trainer.program_hash, JOINT)], h, caps[h][0])
                for h in members]
    return build


class TestTrainingEngine:
    def test_all_hospitals_pass(self, hospitals, trainer):
        assert TrainingPolicyEngine().input_eval(hospitals(A, B, C), trainer)

    def test_dropping_a_hospital_breaks_the_cap(self, hospitals, trainer):
        # A holds 100/150 = 66.7% > 60%
        assert not TrainingPolicyEngine().input_eval(hospitals(A, B), trainer)

    def test_unapproved_program_is_denied(self, hospitals):
        assert not TrainingPolicyEngine().input_eval(hospitals(A, B, C), program(ProgramKind.TRAINING, A, b"evil"))

    def test_cap_boundary_is_inclusive(self, trainer):
        policy = training_data_policy(50, trainer.program_hash, JOINT)
        pads = [decrypted([policy], A, 50), decrypted([policy], B, 50)]
        assert TrainingPolicyEngine().input_eval(pads, trainer)

    def test_shares_are_summed_per_custodian(self, trainer):
        capped = training_data_policy(40, trainer.program_hash, JOINT)
        free = training_data_policy(100, trainer.program_hash, JOINT)
        # two A PADs of 30 each: 60/100 per custodian, 30/100 per PAD
        pads = [decrypted([capped], A, 30), decrypted([capped], A, 30), decrypted([free], B, 40)]
        assert not TrainingPolicyEngine().input_eval(pads, trainer)
        assert TrainingPolicyEngine(share_basis=SHARE_PER_PAD).input_eval(pads, trainer)

    def test_capped_pad_without_count_is_denied(self, trainer):
        pads = [decrypted([training_data_policy(100, trainer.program_hash, JOINT)], A)]
        assert not TrainingPolicyEngine().input_eval(pads, trainer)

    def test_unknown_rule_denies(self, trainer):
        policy = Policy(TRAINING_POLICY_LANG_ID, input_constraints=(UnknownRule(0x99, b""),))
        assert not TrainingPolicyEngine().input_eval([decrypted([policy], A, 1)], trainer)

    def test_output_custodian(self, hospitals, trainer):
        pads = hospitals(A, B, C)
        engine = TrainingPolicyEngine()
        good = OutputProposal(b"model", (training_data_policy(100, trainer.program_hash, JOINT),), JOINT, TEST_URI)
        bad = OutputProposal(b"model", good.policies, A, TEST_URI)
        assert engine.output_eval(good, pads, trainer)
        assert not engine.output_eval(bad, pads, trainer)

    def test_share_caps_agree_with_exact_enumeration(self, trainer):
        rng = random.Random(2024)
        engine = TrainingPolicyEngine()
        outcomes = Counter()
        for _ in range(500):
            layout = [(rng.choice((A, B, C)), rng.randint(1, 50), rng.choice((25, 34, 50, 60, 75, 100)))
                      for _ in range(rng.randint(1, 8))]
            pads = [decrypted([training_data_policy(cap, trainer.program_hash, JOINT)], custodian, count)
                    for custodian, count, cap in layout]

            total = sum(count for _, count, _ in layout)
            held = Counter()
            for custodian, count, _ in layout:
                held[custodian] += count
            expected = all(held[custodian] * 100 <= cap * total for custodian, _, cap in layout)

            observed = engine.input_eval(pads, trainer)
            assert observed == expected, layout
            outcomes[observed] += 1
        assert outcomes[True] and outcomes[False]


class TestModelEngine:
    @pytest.fixture
    def clock(self):
        return FakeClock()

    @pytest.fixture
    def query_program(self):
        return program(ProgramKind.QUERY, A, b"query-v1")

    @pytest.fixture
    def model_pad(self, query_program):
        policy = model_policy([A, B], {A: 3, B: 1}, [query_program.program_hash], JOINT)
        return decrypted([policy], JOINT, 150)

    def test_rate_limit_per_owner_and_window(self, clock, query_program, model_pad):
        engine = ModelPolicyEngine(clock=clock)
        verdicts = [engine.input_eval([model_pad], query_program) for _ in range(5)]
        assert verdicts == [True, True, True, False, False]

        other = program(ProgramKind.QUERY, B, b"query-v1")
        assert engine.input_eval([model_pad], other)
        assert not engine.input_eval([model_pad], other)

        clock.now += 60
        assert engine.input_eval([model_pad], query_program)

    def test_unauthorized_owner_uses_no_budget(self, clock, query_program, model_pad):
        engine = ModelPolicyEngine(clock=clock)
        outsider = program(ProgramKind.QUERY, uuid.uuid4(), b"query-v1")
        assert not engine.input_eval([model_pad], outsider)
        assert engine.rate_limiter.state_of(model_pad.data_id).counts == {}

    def test_owner_missing_from_rate_table(self, clock, query_program):
        policy = Policy(MODEL_POLICY_LANG_ID,
                        input_constraints=model_policy([A, B], {A: 3}, [query_program.program_hash],
                                                       JOINT).input_constraints)
        pad = decrypted([policy], JOINT)
        assert not ModelPolicyEngine(clock=clock).input_eval([pad], program(ProgramKind.QUERY, B, b"query-v1"))

    def test_non_query_programs_are_not_counted(self, clock, model_pad):
        fine_tune = program(ProgramKind.FINE_TUNE, A, b"query-v1")
        engine = ModelPolicyEngine(clock=clock)
        assert all(engine.input_eval([model_pad], fine_tune) for _ in range(10))

    def test_fine_tune_must_keep_policy_and_custodian(self, model_pad):
        engine = ModelPolicyEngine()
        fine_tune = program(ProgramKind.FINE_TUNE, A)
        inherited = model_pad.payload.policies[0]
        extra = owner_restriction([A])

        keep = OutputProposal(b"m", (inherited, extra), JOINT, TEST_URI)
        assert engine.output_eval(keep, [model_pad], fine_tune)

        dropped = OutputProposal(b"m", (inherited.without_rule_type(RuleType.AUTH_USER), extra), JOINT, TEST_URI)
        assert not engine.output_eval(dropped, [model_pad], fine_tune)

        moved = OutputProposal(b"m", (inherited,), A, TEST_URI)
        assert not engine.output_eval(moved, [model_pad], fine_tune)

        query = program(ProgramKind.QUERY, A)
        assert engine.output_eval(dropped, [model_pad], query)


def test_rate_limiter_matches_reference_counts():
    rng = random.Random(3)
    clock = FakeClock(1_700_000_000.0)
    limiter = QueryRateLimiter(clock=clock)
    data_id = uuid.uuid4()
    owners = [uuid.uuid4() for _ in range(3)]
    limits = {owners[0]: 2, owners[1]: 4, owners[2]: 7}
    reference = Counter()

    for _ in range(500):
        clock.now += rng.choice([0.0, 0.5, 3.0, 17.0, 61.0])
        owner = rng.choice(owners)
        reference[(window_start_of(clock.now), owner)] += 1
        expected = reference[(window_start_of(clock.now), owner)] <= limits[owner]
        admitted, count = limiter.admit(data_id, owner, [limits[owner]])
        assert admitted == expected
        assert count == reference[(window_start_of(clock.now), owner)]


def test_query_replay_admits_each_owner_up_to_its_rate():
    hashes = [program(ProgramKind.QUERY, A, b"query-v1").program_hash]
    pad = decrypted([model_policy([A, B, C], {A: 10, B: 5, C: 5}, hashes, JOINT)], JOINT)
    engine = ModelPolicyEngine(clock=FakeClock())
    admitted = Counter()
    for _ in range(30):
        for owner in (A, B, C):
            if engine.input_eval([pad], program(ProgramKind.QUERY, owner, b"query-v1")):
                admitted[owner] += 1
    assert admitted == {A: 10, B: 5, C: 5}
    assert engine.rate_limiter.state_of(pad.data_id).counts == {A: 30, B: 30, C: 30}


def rate_only_policy(rng: random.Random, owners) -> Policy:
    rules = tuple(RateLimitRule({owner: rng.randint(1, 6) for owner in owners}) for _ in range(rng.randint(1, 2)))
    return Policy(MODEL_POLICY_LANG_ID, input_constraints=rules)


def test_rate_limits_match_exact_counting_over_many_sequences():
    owners = (A, B, C)
    # listed in at most one rate table, so always denied without being counted
    stranger = uuid.uuid4()
    for seed in range(1000):
        rng = random.Random(seed)
        policies = [rate_only_policy(rng, owners) for _ in range(rng.randint(1, 3))]
        if rng.random() < 0.2:
            policies.append(rate_only_policy(rng, owners + (stranger,)))
        pad = decrypted(policies, JOINT)
        limits = {owner: min(rule.limits[owner] for policy in policies
                             for rule in policy.rules_of(RuleType.RATE_LIMIT))
                  for owner in owners}

        clock = FakeClock()
        engine = ModelPolicyEngine(clock=clock)
        reference = Counter()
        for _ in range(20):
            clock.now += rng.choice((0.0, 0.0, 1.0, 7.0, 30.0, 61.0))
            owner = rng.choice(owners + (stranger,))
            if owner == stranger:
                expected = False
            else:
                reference[(window_start_of(clock.now), owner)] += 1
                expected = reference[(window_start_of(clock.now), owner)] <= limits[owner]
            assert engine.input_eval([pad], program(ProgramKind.QUERY, owner, b"query-v1")) == expected, seed
        assert stranger not in engine.rate_limiter.state_of(pad.data_id).counts


def test_passed_windows_are_forgotten():
    clock = FakeClock()
    limiter = QueryRateLimiter(clock=clock)
    pads = [uuid.uuid4() for _ in range(3)]
    for data_id in pads:
        limiter.admit(data_id, A, [1])
    assert limiter.tracked_pads() == 3

    clock.now += 60
    assert limiter.admit(pads[0], A, [1]) == (True, 1)
    assert limiter.tracked_pads() == 1
    assert limiter.state_of(pads[1]).counts == {}


def add_rule(policy: Policy, rule) -> Policy:
    if isinstance(rule, UnknownRule):
        return Policy(policy.policy_lang_id, policy.input_constraints + (rule,),
                      policy.program_constraints, policy.output_constraints)
    return policy.with_rules(rule)


def random_rule(rng: random.Random, known_hash: bytes):
    makers = (
        lambda: ShareCapRule(rng.choice((10, 34, 50, 75, 100))),
        lambda: ProgramHashRule(frozenset({rng.choice((known_hash, rng.randbytes(32)))})),
        lambda: CustodianRule(rng.choice((JOINT, A, B))),
        lambda: AuthUserRule(frozenset(rng.sample((A, B, C), rng.randint(1, 3)))),
        lambda: RateLimitRule({owner: rng.randint(1, 3) for owner in rng.sample((A, B, C), rng.randint(1, 3))}),
        lambda: SamePolicyRule(),
        lambda: UnknownRule(rng.randint(0x20, 0xFFFF), rng.randbytes(rng.randint(0, 6))),
    )
    return rng.choice(makers)()


def with_extra_rule(rng: random.Random, layout, known_hash: bytes):
    """Copy of layout [(policies, custodian, count)] with one rule added to one policy"""
    layout = [(list(policies), custodian, count) for policies, custodian, count in layout]
    policies = rng.choice(layout)[0]
    index = rng.randrange(len(policies))
    rule = random_rule(rng, known_hash)
    policies[index] = add_rule(policies[index], rule)
    return layout, rule


def build(layout):
    return [decrypted(policies, custodian, count) for policies, custodian, count in layout]


def test_adding_rules_never_turns_a_denial_into_a_pass():
    trainer = program(ProgramKind.TRAINING, A)
    query = program(ProgramKind.QUERY, A, b"query-v1")
    denials = 0
    for seed in range(400):
        rng = random.Random(seed)
        if seed % 2:
            engine_of = TrainingPolicyEngine
            known_hash = trainer.program_hash
            layout = [([training_data_policy(rng.choice((34, 50, 75, 100)),
                                             rng.choice((known_hash,) * 4 + (rng.randbytes(32),)), JOINT)],
                       rng.choice((A, B, C)), rng.randint(1, 50))
                      for _ in range(rng.randint(1, 5))]
            consumer = trainer
        else:
            engine_of = ModelPolicyEngine
            known_hash = query.program_hash
            layout = []
            for _ in range(rng.randint(1, 3)):
                owners = rng.sample((A, B, C), rng.randint(1, 3))
                layout.append(([model_policy(owners, {o: rng.randint(1, 3) for o in owners}, [known_hash], JOINT)],
                               JOINT, None))
            consumer = program(rng.choice((ProgramKind.QUERY, ProgramKind.FINE_TUNE)), rng.choice((A, B, C)),
                               b"query-v1")
        originals = tuple(policy for policies, _, _ in layout for policy in policies)
        proposal = OutputProposal(b"derived", originals, rng.choice((JOINT, A)), TEST_URI)

        before = build(layout)
        input_before = engine_of().input_eval(before, consumer)
        output_before = engine_of().output_eval(proposal, before, consumer)

        for _ in range(3):
            layout, rule = with_extra_rule(rng, layout, known_hash)
            after = build(layout)
            input_after = engine_of().input_eval(after, consumer)
            output_after = engine_of().output_eval(proposal, after, consumer)
            assert input_after <= input_before, (seed, rule)
            assert output_after <= output_before, (seed, rule)
            if isinstance(rule, UnknownRule):
                assert not input_after and not output_after
            input_before, output_before = input_after, output_after
        denials += not input_before
    assert denials


def test_fine_tune_output_must_carry_every_inherited_policy():
    tuner = program(ProgramKind.FINE_TUNE, A)
    query_hash = program(ProgramKind.QUERY, A, b"query-v1").program_hash
    engine = ModelPolicyEngine()
    for seed in range(300):
        rng = random.Random(seed)
        layout = []
        for _ in range(rng.randint(1, 3)):
            policies = []
            for _ in range(rng.randint(1, 2)):
                owners = rng.sample((A, B, C), rng.randint(1, 3)) + [uuid.UUID(int=rng.getrandbits(128))]
                policies.append(model_policy(owners, {o: rng.randint(1, 9) for o in owners}, [query_hash], JOINT))
            layout.append((policies, JOINT, None))
        pads = build(layout)
        inherited = [policy for policies, _, _ in layout for policy in policies]
        extras = [owner_restriction(rng.sample((A, B, C), rng.randint(1, 3))) for _ in range(rng.randint(0, 2))]

        full = inherited + extras
        rng.shuffle(full)
        assert engine.output_eval(OutputProposal(b"m", tuple(full), JOINT, TEST_URI), pads, tuner), seed

        dropped = set(rng.sample(range(len(inherited)), rng.randint(1, len(inherited))))
        kept = [policy for i, policy in enumerate(inherited) if i not in dropped] + extras
        if kept:
            assert not engine.output_eval(OutputProposal(b"m", tuple(kept), JOINT, TEST_URI), pads, tuner), seed

        weakened = list(inherited)
        target = rng.randrange(len(weakened))
        weakened[target] = weakened[target].without_rule_type(rng.choice((RuleType.AUTH_USER, RuleType.RATE_LIMIT)))
        assert not engine.output_eval(OutputProposal(b"m", tuple(weakened + extras), JOINT, TEST_URI),
                                      pads, tuner), seed


def test_registry_refuses_a_second_engine_for_a_language():
    registry = EngineRegistry()
    registry.register_engine(TRAINING_POLICY_LANG_ID, TrainingPolicyEngine())
    with pytest.raises(DuplicateEngine):
        registry.register_engine(TRAINING_POLICY_LANG_ID, TrainingPolicyEngine())
    assert set(default_registry().language_ids()) == {TRAINING_POLICY_LANG_ID, MODEL_POLICY_LANG_ID}
