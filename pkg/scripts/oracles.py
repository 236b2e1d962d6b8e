"""Independent oracle computations whose outputs are frozen into the unit tests.

Nothing here calls the FFT convolution, the flux-form operators or the cascade;
each value is produced by a brute-force or closed-form route.
"""

import itertools

import numpy as np
from scipy import integrate

R = 2.0 / 3.0


def nodes(n_v, v_max):
    h = 2.0 * v_max / n_v
    return -v_max + (np.arange(n_v) + 0.5) * h, h


def mu(v, T_c=1.0):
    return (2.0 * np.pi * R * T_c) ** -1.5 * np.exp(-np.sum(v * v, axis=-1) / (2.0 * R * T_c))


def sigma_point_bruteforce(n_v, v_max, target_index, T_c=1.0):
    """sigma_mu^{ij} at one node by an explicit triple loop over all other nodes."""
    x, h = nodes(n_v, v_max)
    v = np.array([x[i] for i in target_index])
    out = np.zeros((3, 3))
    for a, b, c in itertools.product(range(n_v), repeat=3):
        w = np.array([x[a], x[b], x[c]])
        d = v - w
        r2 = d @ d
        if r2 == 0.0:
            continue
        phi = (np.eye(3) - np.outer(d, d) / r2) / np.sqrt(r2)
        out += phi * mu(w[None, :], T_c)[0] * h**3
    return out


def sigma_field_bruteforce(n_v, v_max, T_c=1.0):
    """Full sigma_mu table by the O(n_v^6) double loop."""
    x, h = nodes(n_v, v_max)
    V = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    m = mu(V, T_c) * h**3
    out = np.zeros((len(V), 3, 3))
    for p, v in enumerate(V):
        d = v - V
        r2 = np.sum(d * d, axis=1)
        live = r2 > 0
        dd, rr = d[live], r2[live]
        phi = (np.eye(3)[None] - dd[:, :, None] * dd[:, None, :] / rr[:, None, None]) / np.sqrt(rr)[:, None, None]
        out[p] = np.einsum("kij,k->ij", phi, m[live])
    return out.reshape((n_v,) * 3 + (3, 3))


def maxwellian_mass_1d(n_v, v_max, T=1.0):
    x, h = nodes(n_v, v_max)
    g = (2.0 * np.pi * R * T) ** -0.5 * np.exp(-x * x / (2.0 * R * T))
    return float(np.sum(g) * h) ** 3


def sigma11_continuum_origin(T_c=1.0):
    """sigma^{11}_mu(0) = int (1 - w_1^2/|w|^2) |w|^-1 mu(w) dw on R^3 = (2/3) int |w|^-1 mu(w) dw."""
    a = 2.0 * R * T_c
    radial = integrate.quad(lambda r: 4.0 * np.pi * r * (np.pi * a) ** -1.5 * np.exp(-r * r / a), 0, np.inf)[0]
    return 2.0 / 3.0 * radial


def acoustic_speed(T=1.0):
    return np.sqrt(5.0 * R * T / 3.0)


if __name__ == "__main__":
    np.set_printoptions(precision=17)
    s12 = sigma_field_bruteforce(12, 6.0)
    print("sigma_mu n_v=12 at node (5,5,5):", repr(s12[5, 5, 5]))
    print("sigma_mu n_v=12 at node (0,3,7):", repr(s12[0, 3, 7]))
    print("sigma_mu n_v=12 sum of |entries|:", repr(float(np.sum(np.abs(s12)))))
    p32 = sigma_point_bruteforce(32, 6.0, (16, 16, 16))
    print("sigma_mu n_v=32 at node (16,16,16):", repr(p32))
    print("sigma11 continuum at v=0:", repr(sigma11_continuum_origin()))
    print("mu mass n_v=32:", repr(maxwellian_mass_1d(32, 6.0)), " n_v=128:", repr(maxwellian_mass_1d(128, 6.0)))
    print("acoustic speed T=1:", repr(acoustic_speed()))
