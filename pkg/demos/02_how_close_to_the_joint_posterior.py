"""Does one recursive exchange sample the posterior of all agents' observations?

Freeze every agent's Gaussian mixture, give each one scalar observation, and
ask what sign the chain returns.  The target is the posterior over the sign
given all agents' observations, which three signs make easy to enumerate.

With two agents the exchange is an ordinary Metropolis-Hastings chain and
matches the target.  With three agents the recursive proposal is not the
distribution the acceptance ratio assumes, so for some instances the returned
sign settles somewhere else.  More internal iterations do not close the gap.

    python demos/02_how_close_to_the_joint_posterior.py
"""

import numpy as np

from rmhng import AgentState, ComponentParams, Hyperparams, RngStream, rmh_communicate

K, D = 3, 50_000


def instance(rng, n_agents):
    return [(rng.uniform(-1.5, 1.5), rng.uniform(-2, 2, K), rng.uniform(0.5, 2, K)) for _ in range(n_agents)]


def target(inst):
    log_post = np.zeros(K)
    for x, means, prec in inst:
        log_post += 0.5 * np.log(prec) - 0.5 * prec * (x - means) ** 2
    post = np.exp(log_post - log_post.max())
    return post / post.sum()


def returned_signs(inst, T, seed):
    rng = RngStream(seed)
    agents = []
    for n, (x, means, prec) in enumerate(inst):
        theta = ComponentParams(means.reshape(K, 1), prec.reshape(K, 1, 1))
        agents.append(AgentState(n, np.full((D, 1), x), Hyperparams.isotropic(1, K), signs=rng.spawn(n).integers(K, size=D),
                                 theta=theta))
    for i in range(4):
        order = rng.spawn(10, i).permutation(len(agents))
        ret = rmh_communicate([agents[j] for j in order], np.arange(D), T, rng.spawn(20, i))
    return np.bincount(ret, minlength=K) / D


rng = np.random.default_rng(0)
for n_agents in (2, 3):
    print(f"\n{n_agents} agents")
    for i in range(3):
        inst = instance(rng, n_agents)
        exact = target(inst)
        for T in (2, 10):
            got = returned_signs(inst, T, i)
            tv = 0.5 * np.abs(got - exact).sum()
            print(f"  instance {i} T={T:2d}: returned {np.round(got, 3)}  posterior {np.round(exact, 3)}  TV {tv:.3f}")
