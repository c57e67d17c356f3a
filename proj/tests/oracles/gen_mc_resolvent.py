#!/usr/bin/env python3
"""Monte Carlo reference values for the resolvent tests (logistic models).

Run:  python3 gen_mc_resolvent.py
The printed means / standard errors are frozen (by hand) into
tests/test_resolvent.cpp and tests/acceptance.cpp.  Euler-Maruyama with
Brownian-bridge absorption for the killed integrals; the half-step runs
measure the remaining discretization drift so the frozen tolerances can
include it explicitly.
"""
import math

import numpy as np

Q = 0.33
T_HORIZON = 30.0  # e^{-qT} ~ 5e-5: tail far below the Monte Carlo error
SEED = 20260816


def logistic_model(mu0, mu1, cap, s0, s1, f0, f1):
    """Extended coefficients: affine drift/bound and frozen sigma below 0."""

    def mu(x):
        return np.where(x < 0.0, mu0 + mu1 * x, mu0 + mu1 * x * (1.0 - x / cap))

    def sigma(x):
        return np.where(x < 0.0, math.sqrt(s0), np.sqrt(s0 + s1 * np.maximum(x, 0.0)))

    def bound(x):
        return f0 + f1 * x  # affine: extension coincides with the formula

    return mu, sigma, bound


def killed_withdrawal_integral(model, x0, n, dt, rng):
    """E_x [ int_0^{tau_0} e^{-qt} F(X_t) dt ] for dX = (mu-F)dt + sigma dW,
    absorbed at 0 (Brownian-bridge sub-step absorption)."""
    mu, sigma, bound = model
    steps = int(round(T_HORIZON / dt))
    x = np.full(n, float(x0))
    alive = np.ones(n, dtype=bool)
    acc = np.zeros(n)
    sq = math.sqrt(dt)
    for k in range(steps):
        disc = math.exp(-Q * k * dt)
        f = bound(x)
        acc += np.where(alive, disc * f * dt, 0.0)
        drift = mu(x) - f
        sig = sigma(x)
        x_new = x + drift * dt + sig * sq * rng.standard_normal(n)
        # bridge kill probability while both endpoints are positive
        pk = np.exp(-2.0 * np.maximum(x, 0.0) * np.maximum(x_new, 0.0) / (sig * sig * dt))
        killed = (x_new <= 0.0) | (rng.random(n) < pk)
        alive &= ~killed
        x = np.where(alive, x_new, 0.0)
    return acc.mean(), acc.std(ddof=1) / math.sqrt(n)


def extended_resolvent_integrals(model, x0, n, dt, rng):
    """E_x of int e^{-qt} F(X_t) dt  and  int e^{-qt} (mu(X_t) - q X_t) dt
    for the full-withdrawal diffusion extended to the whole line (no kill)."""
    mu, sigma, bound = model
    steps = int(round(T_HORIZON / dt))
    x = np.full(n, float(x0))
    acc_f = np.zeros(n)
    acc_d = np.zeros(n)
    sq = math.sqrt(dt)
    for k in range(steps):
        disc = math.exp(-Q * k * dt)
        f = bound(x)
        m = mu(x)
        acc_f += disc * f * dt
        acc_d += disc * (m - Q * x) * dt
        x = x + (m - f) * dt + sigma(x) * sq * rng.standard_normal(n)
    return (
        (acc_f.mean(), acc_f.std(ddof=1) / math.sqrt(n)),
        (acc_d.mean(), acc_d.std(ddof=1) / math.sqrt(n)),
    )


def main():
    rng = np.random.default_rng(SEED)

    fig5 = logistic_model(0.25, 0.3, 5.0, 0.75, 0.75, 0.15, 0.25)
    print("// J_0(x) for the steep-growth logistic model"
          " (mu 0.25/0.3/K=5, sigma^2 = 0.75+0.75x, F = 0.15+0.25x, q = 0.33)")
    for x0 in (0.5, 1.0, 2.0):
        mean, se = killed_withdrawal_integral(fig5, x0, 150_000, 1e-3, rng)
        mean2, se2 = killed_withdrawal_integral(fig5, x0, 40_000, 5e-4, rng)
        print(f"// x0={x0}: mean={mean:.6f} se={se:.6f}  half-dt drift={mean2 - mean:+.6f} (se {se2:.6f})")

    fig4 = logistic_model(0.15, 0.21, 10.0, 0.75, 0.5, 0.3, 0.3)
    print("// I_F and Dynkin integrals for the flat-growth logistic model"
          " (mu 0.15/0.21/K=10, sigma^2 = 0.75+0.5x, F = 0.3+0.3x, q = 0.33)")
    for x0 in (0.0, 1.0):
        (fm, fs), (dm, dse) = extended_resolvent_integrals(fig4, x0, 200_000, 1e-3, rng)
        (fm2, _), (dm2, _) = extended_resolvent_integrals(fig4, x0, 50_000, 5e-4, rng)
        print(f"// x0={x0}: IF mean={fm:.6f} se={fs:.6f} drift={fm2 - fm:+.6f}"
              f" | dynkin mean={dm:.6f} se={dse:.6f} drift={dm2 - dm:+.6f}")


if __name__ == "__main__":
    main()
