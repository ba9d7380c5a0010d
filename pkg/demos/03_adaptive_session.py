"""One adaptive session, step by step.

Drives the engine directly with a simulated examinee and prints the item
choices, running theta, and the stopping decision; then shows that replaying
the recorded responses reproduces the identical session.
Run: python demos/03_adaptive_session.py
"""

import numpy as np

from catlab.bank import generate_bank
from catlab.engine import (
    CutoffBand,
    StopDecision,
    StudyConfig,
    begin_session,
    finalize,
    next_item,
    replay_session,
    start_session,
    submit_response,
)
from catlab.irt import Response, probability_correct

bank = generate_bank("2PL", 100, seed=42, a_log_mean=np.log(1.5))
config = StudyConfig(
    name="walkthrough",
    model="2PL",
    max_items=20,
    min_items=5,
    min_sem=0.30,
    adaptive_start=2,
    cutoffs=(
        CutoffBand("below", -np.inf, -0.5),
        CutoffBand("on level", -0.5, 0.5),
        CutoffBand("above", 0.5, np.inf),
    ),
)

theta_true = 0.9
examinee = np.random.default_rng(123)
state = start_session(config, bank, seed=2024, now=0.0)
begin_session(state, config, now=0.0)

print(f"simulated examinee at theta = {theta_true:+.2f}\n")
print("step  item     answer  theta    se     method")
while True:
    step = next_item(state, config, bank, now=0.0)
    if isinstance(step, StopDecision):
        print(f"\nstopped: {step.reason.value} ({step.message})")
        break
    item = bank.get(step)
    value = int(examinee.random() < probability_correct(item, theta_true))
    estimate = submit_response(state, config, bank, Response(step, value), now=0.0)
    print(
        f"{len(state.responses):>4}  {step:<14} {value}  {estimate.theta:+.3f}  "
        f"{estimate.se:.3f}  {estimate.method}"
    )

result = finalize(state, config, now=60.0)
print(f"\nfinal: theta = {result.final.theta:+.3f} +- {result.final.se:.3f}")
print(f"classification: {result.classification}")
print(f"items used: {result.n_items} of max {config.max_items}")

replayed, _ = replay_session(
    config,
    bank,
    [r.value for r in state.responses],
    seed=2024,
    session_id=state.session_id,
    created_at=0.0,
    finished_at=60.0,
)
print(f"\nreplay from the response log matches: {replayed == result}")
