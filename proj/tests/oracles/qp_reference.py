#!/usr/bin/env python3
"""Independent reference evaluation of the structured MPC program.

Builds the same convex program as the C++ assembly with an unrelated
modeling stack (cvxpy) and prints optimal values to freeze into the C++
test suite. Run from anywhere; output is deterministic.
"""

import cvxpy as cp
import numpy as np

N = 10
GAMMA = 0.9
S_MIN = np.array([0.0, -1.0])
S_MAX = np.array([1.0, 1.0])
U_MIN = np.array([-1.0])
U_MAX = np.array([1.0])


def build_theta_default(deg):
    return {
        "v": 0.0,
        "x_lo": np.zeros(2),
        "x_hi": np.zeros(2),
        "bias": np.zeros(2),
        "f": np.zeros(3),
        "Q": np.array([1.0, 1.0]),
        "R": np.array([0.5]),
        "w": np.array([500.0, 500.0]),
        "A": np.array([[1.0, 0.25], [0.0, 1.0]]),
        "coupling": np.zeros(deg),
        "B": np.array([[0.0312], [0.25]]),
    }


def solve(thetas, neighbors, states, actions=None):
    M = len(thetas)
    X = [cp.Variable((2, N + 1)) for _ in range(M)]
    U = [cp.Variable((1, N)) for _ in range(M)]
    S = [cp.Variable((2, N)) for _ in range(M)]
    cons = []
    obj = 0
    for i in range(M):
        th = thetas[i]
        obj += th["v"]
        cons.append(X[i][:, 0] == states[i])
        if actions is not None:
            cons.append(U[i][:, 0] == actions[i])
        for k in range(N):
            gk = GAMMA**k
            obj += th["f"][:2] @ X[i][:, k] + th["f"][2:] @ U[i][:, k]
            obj += 0.5 * gk * cp.square(th["Q"] @ X[i][:, k])
            obj += 0.5 * gk * cp.square(th["R"] @ U[i][:, k])
            obj += 0.5 * gk * (th["w"] @ S[i][:, k])
            rhs = th["A"] @ X[i][:, k] + th["B"] @ U[i][:, k] + th["bias"]
            for jj, j in enumerate(neighbors[i]):
                Aij = np.zeros((2, 2))
                Aij[1, 1] = th["coupling"][jj]
                rhs = rhs + Aij @ X[j][:, k]
            cons.append(X[i][:, k + 1] == rhs)
            cons.append(S_MIN + th["x_lo"] - S[i][:, k] <= X[i][:, k])
            cons.append(X[i][:, k] <= S_MAX + th["x_hi"] + S[i][:, k])
            cons.append(U[i][:, k] >= U_MIN)
            cons.append(U[i][:, k] <= U_MAX)
            cons.append(S[i][:, k] >= 0)
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12,
               tol_feas=1e-12)
    first_inputs = [float(U[i][0, 0].value) for i in range(M)]
    return prob.value, first_inputs


def main():
    neighbors = [[1], [0, 2], [1]]

    # Probe A: default parameters, all agents at [0.5, 0], zero action.
    thetas = [build_theta_default(len(nb)) for nb in neighbors]
    states = [np.array([0.5, 0.0])] * 3
    q_val, _ = solve(thetas, neighbors, states, actions=[np.zeros(1)] * 3)
    v_val, greedy = solve(thetas, neighbors, states)
    print(f"probeA_q  = {q_val:.12f}")
    print(f"probeA_v  = {v_val:.12f}")
    print(f"probeA_u* = " + ", ".join(f"{u:.12f}" for u in greedy))

    # Probe B: perturbed parameters exercising every block (coupling, bias,
    # linear cost, bound offsets) at a state that activates the penalties.
    thetas = [build_theta_default(len(nb)) for nb in neighbors]
    for i, th in enumerate(thetas):
        th["v"] = 0.3 * (i + 1)
        th["x_lo"] = np.array([-0.05, 0.02 * (i + 1)])
        th["x_hi"] = np.array([0.04, -0.03])
        th["bias"] = np.array([0.01 * (i + 1), -0.02])
        th["f"] = np.array([0.1, -0.05, 0.2 * (i + 1)])
        th["Q"] = np.array([1.1, 0.8 + 0.1 * i])
        th["R"] = np.array([0.6])
        th["w"] = np.array([480.0, 520.0])
        th["A"] = np.array([[0.95, 0.2], [0.0, 1.05]])
        th["coupling"] = -0.08 * np.ones(len(neighbors[i]))
        th["B"] = np.array([[0.05], [0.22]])
    states = [np.array([-0.08, 0.9]), np.array([0.95, -0.85]), np.array([0.4, 0.2])]
    actions = [np.array([0.3]), np.array([-0.7]), np.array([0.05])]
    q_val, _ = solve(thetas, neighbors, states, actions=actions)
    v_val, greedy = solve(thetas, neighbors, states)
    print(f"probeB_q  = {q_val:.12f}")
    print(f"probeB_v  = {v_val:.12f}")
    print(f"probeB_u* = " + ", ".join(f"{u:.12f}" for u in greedy))


if __name__ == "__main__":
    main()
