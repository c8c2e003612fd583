"""Brute-force search over linear tanh policies on the toy benchmark.

Evaluates a large random sample of bias-augmented 2x3 weight matrices on
jittered starts and reports the best unconstrained return, the best return
among policies that never enter the hazard, and whether the unconstrained
optimum crosses the hazard. Used once to fix the toy thresholds.
"""

import argparse

import numpy as np

from safe_ars.toy_env import ToyParams, ToyScenario


def rollout_batch(W, starts, params):
    """W: (P, 2, 3); starts: (S, 2). Returns returns (P, S) and min safety (P, S)."""
    P, S = W.shape[0], starts.shape[0]
    x = np.broadcast_to(starts, (P, S, 2)).copy()
    g = np.array(params.goal)
    hz = np.array(params.hazard_center)
    ret = np.zeros((P, S))
    fmin = np.full((P, S), np.inf)
    for _ in range(params.horizon):
        z = x - g
        raw = np.einsum("pij,psj->psi", W[:, :, :2], z) + W[:, None, :, 2]
        x = x + np.tanh(raw) * params.dt
        ret -= ((x - g) ** 2).sum(-1)
        f = ((x - hz) ** 2).sum(-1) - params.hazard_radius ** 2
        fmin = np.minimum(fmin, f)
    return ret, fmin


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    params, scen = ToyParams(), ToyScenario()
    rng = np.random.default_rng(args.seed)
    starts = np.array(scen.start) + rng.uniform(-scen.jitter, scen.jitter, size=(10, 2))
    best_any = (-np.inf, None, None)
    best_safe = (-np.inf, None)
    for _ in range(args.samples // 20_000):
        W = rng.normal(0, 1, size=(20_000, 2, 3)) * rng.choice([0.3, 1, 3, 10], size=(20_000, 1, 1))
        ret, fmin = rollout_batch(W, starts, params)
        mean = ret.mean(1)
        i = int(np.argmax(mean))
        if mean[i] > best_any[0]:
            best_any = (mean[i], W[i], (fmin[i] < 0).sum())
        safe = (fmin >= 0).all(1)
        if safe.any():
            j = int(np.argmax(np.where(safe, mean, -np.inf)))
            if mean[j] > best_safe[0]:
                best_safe = (mean[j], W[j])
    print(f"best unconstrained mean return {best_any[0]:.4f}, hazard episodes {best_any[2]}/10")
    print(f"best hazard-free mean return  {best_safe[0]:.4f}")
    # local refinement of both by hill climbing
    for label, (val, W0) in (("unconstrained", best_any[:2]), ("safe", best_safe)):
        cur, curW = val, W0
        for _ in range(200):
            cand = curW + rng.normal(0, 0.05, size=(500, 2, 3))
            ret, fmin = rollout_batch(cand, starts, params)
            mean = np.where((fmin >= 0).all(1) | (label == "unconstrained"), ret.mean(1), -np.inf)
            k = int(np.argmax(mean))
            if mean[k] > cur:
                cur, curW = mean[k], cand[k]
        ret, fmin = rollout_batch(curW[None], starts, params)
        print(f"refined {label}: mean return {cur:.4f}, hazard episodes {(fmin < 0).sum()}/10")


if __name__ == "__main__":
    main()
