"""Avoided crossings of the vibronic spectrum and the closed-form predictors.

The control parameter of every scan is the normalized ac-Stark shift
``r = eps_ac / omega``; it is moved by scaling g1 and g2 jointly so that their
ratio and the trap frequency stay fixed.

Frequencies returned here are in units of 2*pi*MHz, like the inputs.  The
prediction curves take times in us and multiply by 2*pi internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .errors import BracketingError, ParameterError, PairIdentificationError, TrackDiscontinuityError
from .model import (
    TWO_PI,
    SystemParams,
    build_hamiltonian,
    build_space,
    dressed_states,
    electronic_hamiltonian,
    params_at_ratio,
)
from .numerics import general_eig, hermitian_eig

TRACK_OVERLAP = 0.9
PAIR_OVERLAP = 0.5
DEFAULT_WINDOW = (0.8, 1.2)


# --------------------------------------------------------------------------
# spectrum scans


@dataclass(frozen=True)
class SpectrumScan:
    control: np.ndarray  # eps_ac / omega, ascending
    eigenvalues: np.ndarray  # (n_points, dim), sorted per point, 2*pi*MHz
    tracks: np.ndarray | None  # (n_points, dim), column k follows one level
    order: np.ndarray | None  # eigenvalues[i, order[i, k]] == tracks[i, k]
    min_overlap: float
    n_fock: int
    labels: np.ndarray | None = None  # product-state index -> track index

    def track_of(self, e: int, n: int) -> int:
        """Track that starts on the product state ``|phi_{e+1}, n>`` (0-based ``e``)."""
        if self.tracks is None:
            raise ParameterError("single-point scan has no tracks")
        return int(self.labels[e * self.n_fock + n])

    def separation(self, track_a: int, track_b: int) -> np.ndarray:
        if self.tracks is None:
            raise ParameterError("single-point scan has no tracks")
        return np.abs(self.tracks[:, track_a] - self.tracks[:, track_b])


def _dressed_product_basis(p: SystemParams, n_fock: int) -> np.ndarray:
    """Columns ``|phi_i> (x) |n>`` in electronic-major order, i = 1, 2, 3."""
    return np.kron(dressed_states(p).vectors, np.eye(n_fock))


def _align_clusters(vals: np.ndarray, vecs: np.ndarray, prev: np.ndarray, tol: float) -> np.ndarray:
    """Rotate eigenvectors inside (near-)degenerate clusters towards ``prev``."""
    vecs = vecs.copy()
    start = 0
    dim = vals.size
    while start < dim:
        stop = start + 1
        while stop < dim and vals[stop] - vals[stop - 1] < tol:
            stop += 1
        if stop - start > 1:
            block = vecs[:, start:stop]
            s = block.conj().T @ prev
            cols = np.sort(np.argsort(np.linalg.norm(s, axis=0))[-(stop - start):])
            x, _, yh = np.linalg.svd(s[:, cols])
            vecs[:, start:stop] = block @ (x @ yh)
        start = stop
    return vecs


def spectrum_scan(
    p: SystemParams,
    scale_range=DEFAULT_WINDOW,
    n_points: int = 41,
    n_fock: int = 30,
) -> SpectrumScan:
    """Eigenvalues of the full Hamiltonian across a range of ``eps_ac / omega``.

    Levels are followed from point to point by maximal eigenvector overlap;
    a matched overlap below 0.9 raises ``TrackDiscontinuityError``.
    """
    lo, hi = float(scale_range[0]), float(scale_range[1])
    if not lo <= 1.0 <= hi:
        raise BracketingError(f"scan range [{lo}, {hi}] does not bracket eps_ac/omega = 1")
    if lo == hi:
        n_points = 1
    elif n_points < 3:
        raise ParameterError(f"a scan needs at least 3 points, got {n_points}")
    control = np.linspace(lo, hi, n_points)
    space = build_space(n_fock)

    values, vectors = [], []
    for r in control:
        dec = hermitian_eig(build_hamiltonian(space, params_at_ratio(p, r)))
        values.append(dec.eigenvalues / TWO_PI)
        vectors.append(dec.eigenvectors)
    values = np.array(values)
    if n_points == 1:
        return SpectrumScan(control, values, None, None, 1.0, n_fock)

    dim = space.total_dim
    # label tracks at the first point by the dressed product state they resemble
    ref = _dressed_product_basis(params_at_ratio(p, control[0]), n_fock)
    first = np.abs(vectors[0].conj().T @ ref) ** 2
    _, labels0 = linear_sum_assignment(-first)

    order = np.zeros((n_points, dim), dtype=int)
    order[0] = np.arange(dim)
    prev = vectors[0]
    worst = 1.0
    cluster_tol = 1e-9 * max(1.0, float(np.max(np.abs(values))))
    for i in range(1, n_points):
        vecs = _align_clusters(values[i], vectors[i], prev, cluster_tol)
        overlap = np.abs(prev.conj().T @ vecs)
        rows, cols = linear_sum_assignment(-overlap)
        matched = overlap[rows, cols]
        if matched.min() < TRACK_OVERLAP:
            raise TrackDiscontinuityError(
                f"level tracking lost continuity between points {i - 1} and {i} "
                f"(overlap {matched.min():.3f} at eps_ac/omega = {control[i]:.6g})",
                index=i,
            )
        worst = min(worst, float(matched.min()))
        # column k of prev (track k) continues as column cols[k] here
        order[i] = cols
        prev = vecs[:, cols]
    tracks = np.take_along_axis(values, order, axis=1)
    # labels: product state index -> track index
    label_map = np.empty(dim, dtype=int)
    label_map[labels0] = np.arange(dim)
    return SpectrumScan(control, values, tracks, order, worst, n_fock, label_map)


# --------------------------------------------------------------------------
# avoided crossings


@dataclass(frozen=True)
class AvoidedCrossing:
    n: int
    gap: float  # 2*pi*MHz
    center: float  # eps_ac / omega at the minimum gap
    e_plus: float
    e_minus: float
    params: SystemParams  # couplings scaled to the center
    n_fock: int
    pair_weight: tuple[float, float]


def _pair(p: SystemParams, n: int, n_fock: int):
    """Eigenpairs of the full Hamiltonian with most weight on the LZ pair."""
    space = build_space(n_fock)
    dec = hermitian_eig(build_hamiltonian(space, p))
    basis = dressed_states(p).vectors
    fock = np.eye(n_fock)
    b2 = np.kron(basis[:, 1], fock[n])
    b1 = np.kron(basis[:, 0], fock[n - 1])
    v = dec.eigenvectors
    weight = np.abs(v.conj().T @ b2) ** 2 + np.abs(v.conj().T @ b1) ** 2
    idx = np.sort(np.argsort(weight)[-2:])
    w = weight[idx]
    if w.min() < PAIR_OVERLAP:
        raise PairIdentificationError(
            f"no eigenvector pair carries weight >= {PAIR_OVERLAP} on |phi2,{n}>, "
            f"|phi1,{n - 1}> (best {w.max():.3f}, {w.min():.3f}); "
            "the two-state picture does not hold here"
        )
    e = dec.eigenvalues[idx] / TWO_PI
    return e, v[:, idx], (float(w[0]), float(w[1])), b2, b1


def _pair_gap(p: SystemParams, n: int, n_fock: int, r: float) -> float:
    e, *_ = _pair(params_at_ratio(p, r), n, n_fock)
    return float(e[1] - e[0])


def find_avoided_crossing(
    p: SystemParams,
    n: int,
    n_fock: int | None = None,
    window=DEFAULT_WINDOW,
    n_coarse: int = 41,
    tol: float = 1e-6,
) -> AvoidedCrossing:
    """Locate the minimum splitting of ``|phi2, n>`` and ``|phi1, n-1>``.

    A coarse grid brackets the minimum, golden-section search refines it to
    relative tolerance ``tol`` and a final parabolic step on ``gap^2`` (which
    is quadratic near the minimum) removes the residual bias.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"crossing index n must be an integer >= 1, got {n}")
    n = int(n)
    if n_fock is None:
        n_fock = n + 25
    if n_fock < n + 2:
        raise ParameterError(f"n_fock={n_fock} too small for the pair at n={n}")
    gap = lambda r: _pair_gap(p, n, n_fock, r)

    grid = np.linspace(window[0], window[1], n_coarse)
    coarse = np.array([gap(r) for r in grid])
    k = int(np.argmin(coarse))
    if k == 0 or k == n_coarse - 1:
        raise BracketingError(
            f"gap minimum for n={n} lies on the edge of eps_ac/omega in [{window[0]}, {window[1]}]"
        )
    res = minimize_scalar(gap, bracket=(grid[k - 1], grid[k], grid[k + 1]), method="golden", tol=tol)
    r0 = float(res.x)

    h = 1e-3 * (window[1] - window[0])
    g2 = np.array([gap(r0 - h), gap(r0), gap(r0 + h)]) ** 2
    curv = g2[0] - 2 * g2[1] + g2[2]
    if curv > 0:
        shift = 0.5 * h * (g2[0] - g2[2]) / curv
        if abs(shift) < h:
            r0 += shift

    pc = params_at_ratio(p, r0)
    e, _, w, _, _ = _pair(pc, n, n_fock)
    return AvoidedCrossing(n, float(e[1] - e[0]), r0, float(e[1]), float(e[0]), pc, n_fock, w)


@dataclass(frozen=True)
class LZPair:
    chi_plus: np.ndarray
    chi_minus: np.ndarray
    e_plus: float
    e_minus: float
    overlap_quality: tuple[float, float]  # (plus, minus)
    theta: float  # relative phase of the two product states
    degenerate: bool


def lz_pair(p: SystemParams, crossing: AvoidedCrossing) -> LZPair:
    """Eigenstates at the crossing center and their fidelity with the ideal pair.

    The ideal pair is ``(|phi2,n> +/- e^{i theta} |phi1,n-1>)/sqrt2``.  With the
    dressed-state phase convention the coupling between the two product states
    is imaginary; ``theta``, the phase of ``<phi1,n-1|H|phi2,n>``, is the choice
    that makes the even/odd combinations the eigenstates.  ``p`` is only used
    for consistency checks; the crossing carries the scaled parameters.
    """
    if abs(p.eta - crossing.params.eta) > 0 or abs(p.omega - crossing.params.omega) > 0:
        raise ParameterError("crossing was located for different parameters")
    pc, n = crossing.params, crossing.n
    e, vecs, _, b2, b1 = _pair(pc, n, crossing.n_fock)
    h = build_hamiltonian(build_space(crossing.n_fock), pc)
    coupling = b1.conj() @ h @ b2
    scale = max(1.0, abs(crossing.e_plus))
    degenerate = crossing.gap < 1e-10 * scale or abs(coupling) < 1e-14
    theta = 0.0 if degenerate else float(np.angle(coupling))
    ideal_p = (b2 + np.exp(1j * theta) * b1) / np.sqrt(2)
    ideal_m = (b2 - np.exp(1j * theta) * b1) / np.sqrt(2)
    if degenerate:
        # any orthonormal pair of the subspace is an eigenbasis; use the ideal one
        chi_p, chi_m = ideal_p, ideal_m
    else:
        chi_m, chi_p = vecs[:, 0], vecs[:, 1]
    q = (float(abs(ideal_p.conj() @ chi_p) ** 2), float(abs(ideal_m.conj() @ chi_m) ** 2))
    return LZPair(chi_p, chi_m, crossing.e_plus, crossing.e_minus, q, theta, degenerate)


# --------------------------------------------------------------------------
# closed forms


def predict_negativity_pure(gap: float, t):
    """``|sin(dE t)| / 2`` with ``dE = 2 pi gap``; period ``1 / (2 gap)`` us."""
    if gap <= 0:
        raise ParameterError(f"gap must be > 0, got {gap}")
    return 0.5 * np.abs(np.sin(TWO_PI * gap * np.asarray(t, dtype=float)))


def _sin_over_nu(z, t, exact: bool):
    if not exact:
        # sum_k (-z)^k t^(2k+1) / (2k+1)!
        term = t.copy()
        out = term.copy()
        for k in range(1, 10):
            term = term * (-z * t * t) / ((2 * k) * (2 * k + 1))
            out = out + term
        return out
    nu = np.sqrt(z)
    return np.sin(nu * t) / nu


def _one_minus_cos_over_nu2(z, t, exact: bool):
    if not exact:
        # sum_k (-z)^k t^(2k+2) / (2k+2)!
        term = 0.5 * t * t
        out = term.copy()
        for k in range(1, 10):
            term = term * (-z * t * t) / ((2 * k + 1) * (2 * k + 2))
            out = out + term
        return out
    nu = np.sqrt(z)
    return (1.0 - np.cos(nu * t)) / z


def predict_negativity_damped(gap: float, gamma1: float, t):
    """Negativity of the damped Landau-Zener pair.

    ``(dE/2) |sin(nu t)/nu + g (1 - cos nu t)/(2 nu^2)| exp(-g t/2)`` with
    ``nu^2 = dE^2 - g^2/4``.  Below critical damping ``nu`` is real; above it
    the trigonometric functions turn hyperbolic; near ``nu = 0`` a power
    series in ``nu^2 t^2`` keeps the expression continuous.
    """
    if gap <= 0:
        raise ParameterError(f"gap must be > 0, got {gap}")
    if gamma1 < 0:
        raise ParameterError(f"gamma1 must be >= 0, got {gamma1}")
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    d = TWO_PI * gap
    g = TWO_PI * gamma1
    z = d * d - 0.25 * g * g
    out = np.empty_like(t)

    series = np.abs(z) * t * t < 1e-2
    if np.any(series):
        ts = t[series]
        s = _sin_over_nu(z, ts, False)
        c = _one_minus_cos_over_nu2(z, ts, False)
        out[series] = 0.5 * d * np.abs(s + 0.5 * g * c) * np.exp(-0.5 * g * ts)
    rest = ~series
    if np.any(rest):
        tr = t[rest]
        if z > 0:
            s = _sin_over_nu(z, tr, True)
            c = _one_minus_cos_over_nu2(z, tr, True)
            out[rest] = 0.5 * d * np.abs(s + 0.5 * g * c) * np.exp(-0.5 * g * tr)
        else:
            # sinh/cosh folded into the decay so large kappa*t cannot overflow
            kappa = np.sqrt(-z)
            ep = np.exp((kappa - 0.5 * g) * tr)
            em = np.exp((-kappa - 0.5 * g) * tr)
            e0 = np.exp(-0.5 * g * tr)
            sinh_part = 0.5 * (ep - em) / kappa
            cosh_m1 = (0.5 * (ep + em) - e0) / (kappa * kappa)
            out[rest] = 0.5 * d * np.abs(sinh_part + 0.5 * g * cosh_m1)
    return float(out[0]) if scalar else out


def gamma1(p: SystemParams) -> float:
    """Width of the bright member of the pair, ``Gamma (g1^2 + g2^2) / (4 Delta^2)``."""
    _need_detuning(p)
    return p.gamma * (p.g1**2 + p.g2**2) / (4.0 * p.delta**2)


def gamma1_approx(p: SystemParams) -> float:
    _need_detuning(p)
    return p.gamma * p.g1**2 / (4.0 * p.delta**2)


def gap_approx(p: SystemParams, n: int) -> float:
    """Lamb-Dicke estimate ``eta sqrt(n) g1 g2 / Delta`` of the splitting."""
    _need_detuning(p)
    return p.eta * np.sqrt(n) * p.g1 * p.g2 / p.delta


def damping_threshold(p: SystemParams, n: int) -> float:
    """Emission rate ``8 eta sqrt(n) Delta g2 / g1`` at which the pair becomes overdamped."""
    _need_detuning(p)
    if p.g1 == 0:
        raise ParameterError("threshold undefined for g1 = 0")
    return 8.0 * p.eta * np.sqrt(n) * p.delta * p.g2 / p.g1


def steady_negativity_limit(p: SystemParams) -> float:
    """Residual negativity ``eta g2 / g1`` of the stationary state for small Gamma."""
    if p.g1 == 0:
        raise ParameterError("limit undefined for g1 = 0")
    return p.eta * p.g2 / p.g1


def lz_coupling_element_analytic(p: SystemParams) -> float:
    """Closed-form value ``eta g1 g2 / (4 Delta)`` of <phi2,0|H_int|phi1,1>."""
    _need_detuning(p)
    return p.eta * p.g1 * p.g2 / (4.0 * p.delta)


def lz_coupling_element_numeric(p: SystemParams, n_fock: int = 30) -> float:
    """``|<phi2,0| H_int |phi1,1>|`` evaluated with the full interaction, 2*pi*MHz."""
    if n_fock < 3:
        raise ParameterError(f"n_fock must be >= 3, got {n_fock}")
    from .model import build_operators

    ops = build_operators(build_space(n_fock), p)
    basis = dressed_states(p).vectors
    fock = np.eye(n_fock)
    b2 = np.kron(basis[:, 1], fock[0])
    b1 = np.kron(basis[:, 0], fock[1])
    return float(abs(b2.conj() @ ops.h_int @ b1)) / TWO_PI


def _need_detuning(p: SystemParams) -> None:
    if p.delta <= 0:
        raise ParameterError(f"closed forms assume Delta > 0, got {p.delta}")


@dataclass(frozen=True)
class EffectiveParams:
    gamma1: float
    eps1: complex
    eps2: complex
    eps3: complex
    nu: complex | None
    gap_used: float | None
    exact: np.ndarray  # numerical eigenvalues of the 3x3, matched to eps1..eps3
    discrepancy: np.ndarray  # exact - closed form

    @property
    def closed_form(self) -> np.ndarray:
        return np.array([self.eps1, self.eps2, self.eps3])


def effective_eigs(p: SystemParams, gap: float | None = None, n: int | None = None) -> EffectiveParams:
    """Complex eigenvalues of the electronic effective Hamiltonian at eta=0.

    Returns the weak-coupling closed forms together with the exact values of
    the 3x3 matrix.  ``nu`` needs a splitting: pass ``gap`` directly or ``n``
    to use the Lamb-Dicke estimate.
    """
    g1_ = gamma1(p)
    shift = (p.g1**2 + p.g2**2) / (4.0 * p.delta)
    closed = np.array(
        [
            p.delta + shift - 0.5j * g1_,
            complex(p.delta),
            -shift - 0.5j * (p.gamma - g1_),
        ]
    )
    exact = general_eig(electronic_hamiltonian(p, with_width=True)).eigenvalues
    _, match = linear_sum_assignment(np.abs(closed[:, None] - exact[None, :]))
    exact = exact[match]
    if gap is None and n is not None:
        gap = gap_approx(p, n)
    nu = None if gap is None else complex(np.sqrt(complex(gap**2 - 0.25 * g1_**2)))
    return EffectiveParams(g1_, *closed, nu, gap, exact, exact - closed)
