"""Train the score on Alice's sessions, then tell her apart from an Eve who copies the CFO.

Run: python demos/train_and_authenticate.py
"""
import numpy as np

from phyauth import default_scenario, generate_stream, median_heuristic_width, train
from phyauth.authenticator import Verdict, decide, default_grid, md_at_fa, sweep_threshold, tradeoff_area

# 300 labeled Phase-I/Phase-II sessions, all from Alice
scenario = default_scenario(trials=300, eve_imitates=frozenset({"CFO"}))
stream = generate_stream(scenario)
print("attributes:", stream.names)
print("first features:", np.round(stream.features[0], 4), "label", stream.labels[0])

width = median_heuristic_width(stream.features, seed=scenario.seed)
model, errors = train(stream, mu=0.1, kernel=width)
print(f"kernel width {width.width:.4f}, dictionary size {len(model)}")
print("squared error at iterations 1, 10, 50, 300:", np.round(errors[[0, 9, 49, 299]] ** 2, 4))

# fresh sessions from separate seed substreams
test = scenario.replace(trials=5000)
alice = generate_stream(test.replace(stream_id=1), hypotheses=0).features
eve = generate_stream(test.replace(stream_id=2), hypotheses=1).features
s_alice, s_eve = model.predict_many(alice), model.predict_many(eve)
print(f"mean score: Alice {s_alice.mean():.3f}, Eve {s_eve.mean():.3f}")

op = md_at_fa(s_alice, s_eve, fa_target=0.015)
print(f"threshold for FA <= 1.5%: nu = {op.nu:.3f} -> FA {op.fa:.4f}, MD {op.md:.4f}")

pts = sweep_threshold(s_alice, s_eve, default_grid())
print(f"area under the MD-vs-FA curve: {tradeoff_area(pts):.4f}")

for score in (s_alice[0], s_eve[0]):
    d = decide(score, op.nu)
    print(f"score {score:+.3f} -> {d.verdict.value}" + ("" if d.verdict is Verdict.ALICE else " (rejected)"))
