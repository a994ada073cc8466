"""Four agents, each blind along three of four axes, agree on names for five clusters.

Every agent sees one coordinate of the same 1000 objects.  On its own axis two
of the five clusters overlap, so no single agent can separate all five.  We
play the recursive naming game for 100 iterations and watch two numbers:

* ARI of each agent's signs against the true clusters,
* kappa, how much the agents agree with one another.

Then we run the one-sample variant (T=1), the same agents without talking, and with a listener that accepts
everything, to see what communication buys.

    python demos/01_four_agents_name_clusters.py
"""

import numpy as np

from rmhng import GameConfig, Hyperparams, Method, RngStream, generate_synthetic, init_agents, play
from rmhng.metrics import adjusted_rand_index, kappa_coefficient

data = generate_synthetic(200, seed=0)
print(f"{data.n_agents} agents, {data.n_objects} objects, {data.n_classes} true clusters")
for n in range(data.n_agents):
    means = [data.features[n][data.ground_truth == c].mean() for c in range(5)]
    print(f"  agent {n} sees cluster means {np.round(means, 1)}")

hyper = Hyperparams.isotropic(1, 5, alpha_bar=1.0, m=0.0, w=0.01, nu=1.0)


def play_method(method, T):
    agents = init_agents(data.features, hyper, RngStream(0, 0))
    history = []

    def watch(i, agents):
        signs = np.stack([a.signs for a in agents])
        history.append(([adjusted_rand_index(s, data.ground_truth) for s in signs], kappa_coefficient(signs, 5)))

    config = GameConfig(4, 5, data.n_objects, iterations=100, internal_iterations=T, method=method)
    play(config, agents, RngStream(0, 1), callback=watch)
    return history


for method, T in [(Method.RMHNG, 4), (Method.OS, 1), (Method.NO_COMMUNICATION, 1), (Method.ALL_ACCEPTANCE, 4)]:
    history = play_method(method, T)
    print(f"\n{method.value}")
    for i in (0, 9, 49, 99):
        ari, kappa = history[i]
        print(f"  iteration {i + 1:3d}: ARI per agent {np.round(ari, 2)}  kappa {kappa:.2f}")

print("\nTalking lifts every agent well past what it reaches alone, and the agents share names.")
print("Some runs, like RMHNG on this seed, keep two clusters merged for all 100 iterations;")
print("the agents then agree on the merged name, so kappa stays high while ARI plateaus.")
print("Alone, each agent's names are unrelated to the others'. Accepting everything agrees on noise.")
