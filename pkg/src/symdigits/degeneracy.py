"""Probes of the symmetry-induced degeneracy of symmetrized training losses.

Training on a dataset closed under a symmetry group makes the total loss
invariant under the matching transformation of the first-layer weights,
so minima come in whole group orbits.  For the grayscale-inversion group
this is exact: flipping the sign of the first-layer weight matrix of a
bias-free network permutes the per-sample loss terms of an inversion-closed
dataset and leaves their sum unchanged up to float reassociation.

The continuous-rotation story is probed on a 2-D toy task closed under
the cyclic group C_n: as n grows the loss valley along the weight orbit
flattens toward a continuous (Goldstone-like) flat direction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .digits import Dataset
from .features import FeatureMapKind, GroupElement
from .network import Mlp, total_loss, sample_loss

MACHINE_EPS = float(np.finfo(np.float64).eps)

# ---------------------------------------------------------------------------
# image-network probes
# ---------------------------------------------------------------------------


def dataset_is_inversion_closed(ds: Dataset) -> bool:
    """True if the multiset of (pixels, label) pairs is closed under x -> -x."""
    rows = np.column_stack([ds.pixels, ds.labels.astype(np.float64)])
    inverted = np.column_stack([-ds.pixels, ds.labels.astype(np.float64)])
    order_a = np.lexsort(rows.T)
    order_b = np.lexsort(inverted.T)
    return bool(np.array_equal(rows[order_a], inverted[order_b]))


def flip_first_layer(mlp: Mlp) -> Mlp:
    """The inversion image of the parameters: W1 -> -W1, everything else kept."""
    flipped = mlp.copy()
    flipped.layers[0].weights = -flipped.layers[0].weights
    return flipped


def weight_flip_deviation(mlp: Mlp, ds: Dataset) -> float:
    """|Omega(W1) - Omega(-W1)| / Omega(W1) on raw pixels (no closure guard)."""
    omega = total_loss(mlp, ds.pixels, ds.labels)
    omega_flipped = total_loss(flip_first_layer(mlp), ds.pixels, ds.labels)
    return abs(omega - omega_flipped) / abs(omega)


def weight_orbit_invariance(mlp: Mlp, ds: Dataset) -> float:
    """Relative change of the total loss under W1 -> -W1.

    Requires a bias-free model and an inversion-closed dataset; then the
    two losses are the same sum in a different order and the deviation is
    pure float reassociation (<= 1e-9 by a wide margin).
    """
    if mlp.use_bias:
        raise ValueError("weight-orbit probe requires a bias-free model")
    if not dataset_is_inversion_closed(ds):
        raise ValueError("dataset is not closed under inversion; symmetrize it first")
    return weight_flip_deviation(mlp, ds)


def per_sample_inversion_gap(mlp: Mlp, kind: FeatureMapKind, ds: Dataset) -> float:
    """Max |loss(features(x)) - loss(features(-x))| over samples.

    For inversion-invariant feature maps the features agree bit-for-bit,
    so the gap is exactly zero: the feature map removes the group action
    (U(g) acts as the identity on features) and with it the weight-orbit
    degeneracy.
    """
    losses = sample_loss(mlp, kind.apply(ds.pixels), ds.labels)
    losses_inv = sample_loss(mlp, kind.apply(-ds.pixels), ds.labels)
    return float(np.max(np.abs(losses - losses_inv)))


@dataclass
class SampledLossReport:
    mu: float
    trials: int
    omega: float            # full symmetrized loss, Eq-style double sum
    expected: float         # mu * omega
    empirical_mean: float
    ratio: float            # empirical_mean / (mu * omega)
    ratio_std_error: float  # standard error of the ratio, from trial variance
    trial_min: float        # at mu=1 every single trial equals omega exactly
    trial_max: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("mu", "trials", "omega", "expected", "empirical_mean",
                 "ratio", "ratio_std_error", "trial_min", "trial_max")}


def sampled_loss_expectation(mlp: Mlp, ds: Dataset, group: list[GroupElement],
                             mu: float, trials: int, seed: int = 0) -> SampledLossReport:
    """Monte Carlo check that random sample inclusion restores symmetry in
    expectation.

    Each (sample, group element) term of the symmetrized loss is kept with
    independent probability mu; a single draw breaks the symmetry, but the
    mean over trials converges to mu times the full symmetrized loss.
    """
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"inclusion probability must be in (0, 1], got {mu}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    terms = np.concatenate([
        np.asarray(sample_loss(mlp, g.apply(ds.pixels), ds.labels), dtype=np.float64)
        for g in group
    ])
    omega = float(np.sum(terms))
    rng = np.random.default_rng(seed)
    values = np.empty(trials)
    for t in range(trials):
        keep = rng.random(terms.shape) < mu
        values[t] = np.sum(np.where(keep, terms, 0.0))
    empirical = float(np.mean(values))
    expected = mu * omega
    spread = float(np.std(values, ddof=1)) if trials > 1 else 0.0
    return SampledLossReport(
        mu=mu, trials=trials, omega=omega, expected=expected,
        empirical_mean=empirical, ratio=empirical / expected,
        ratio_std_error=spread / np.sqrt(trials) / expected,
        trial_min=float(values.min()), trial_max=float(values.max()))


# ---------------------------------------------------------------------------
# toy rotation task (cyclic approximants of a continuous symmetry)
# ---------------------------------------------------------------------------

ROTATION_GENERATOR = np.array([[0.0, -1.0], [1.0, 0.0]])


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass
class ToyRotationTask:
    """2-D points on two circles, labels a function of radius only, and the
    cyclic group C_n of plane rotations.

    The model is a single bias-free tanh unit read out through its square,
    f(x; w) = tanh(w.x)^2, with squared-error loss.  The even readout is
    what gives the group-averaged loss a ring of minima at |w| > 0; an odd
    readout averages to zero over every rotation orbit and collapses the
    minimum to the trivial fixed point w = 0.
    """

    base_points: np.ndarray   # (m, 2)
    base_labels: np.ndarray   # (m,)
    n: int                    # group order
    closed: bool              # True if the loss sums over all n rotations

    def __post_init__(self):
        self.base_points = np.asarray(self.base_points, dtype=np.float64).reshape(-1, 2)
        self.base_labels = np.asarray(self.base_labels, dtype=np.float64).reshape(-1)
        if len(self.base_points) != len(self.base_labels):
            raise ValueError("points and labels must have equal length")
        if self.n < 1:
            raise ValueError("group order n must be >= 1")
        self._points = None
        self._labels = None

    @property
    def group_angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n) / self.n

    def points(self) -> np.ndarray:
        """The training inputs: all C_n rotations of the base points when
        closed, otherwise the base points alone.  Cached; loss evaluations
        hit this on every call."""
        if not self.closed:
            return self.base_points
        if self._points is None:
            mats = np.stack([rotation_matrix(t) for t in self.group_angles])  # (n, 2, 2)
            rotated = np.einsum("kab,mb->kma", mats, self.base_points)
            self._points = rotated.reshape(-1, 2)
        return self._points

    def labels(self) -> np.ndarray:
        if not self.closed:
            return self.base_labels
        if self._labels is None:
            self._labels = np.tile(self.base_labels, self.n)
        return self._labels


def make_toy_task(n: int, n_points: int = 200, seed: int = 0,
                  radii=(0.5, 1.0), label_values=(0.2, 0.8),
                  closed: bool = True) -> ToyRotationTask:
    """Points at random angles on two circles; labels depend on the radius."""
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n_points)
    half = n_points // 2
    radius = np.where(np.arange(n_points) < half, radii[0], radii[1])
    labels = np.where(np.arange(n_points) < half, label_values[0], label_values[1])
    points = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)
    return ToyRotationTask(points, labels, n=n, closed=closed)


def toy_loss(task: ToyRotationTask, w) -> float:
    """Omega(w) = sum over the (closed) dataset of (y - tanh(w.x)^2)^2."""
    x, y = task.points(), task.labels()
    f = np.tanh(x @ np.asarray(w, dtype=np.float64)) ** 2
    return float(np.sum((y - f) ** 2))


def toy_gradient(task: ToyRotationTask, w) -> np.ndarray:
    x, y = task.points(), task.labels()
    t = np.tanh(x @ np.asarray(w, dtype=np.float64))
    f = t * t
    coeff = 2.0 * (f - y) * 2.0 * t * (1.0 - t * t)
    return x.T @ coeff


def toy_hessian(task: ToyRotationTask, w) -> np.ndarray:
    """Analytic 2x2 Hessian (used by the damped-Newton polish)."""
    x, y = task.points(), task.labels()
    t = np.tanh(x @ np.asarray(w, dtype=np.float64))
    f = t * t
    fp = 2.0 * t * (1.0 - t * t)
    fpp = 2.0 * (1.0 - t * t) * (1.0 - 3.0 * t * t)
    coeff = 2.0 * (fp * fp + (f - y) * fpp)
    return (x * coeff[:, None]).T @ x


def train_toy(task: ToyRotationTask, init=(0.9, 0.4), gd_iters: int = 800,
              gd_rate: float = 0.5, grad_tol: float = 1e-9) -> np.ndarray:
    """Find a minimum of the toy loss: gradient descent to reach the valley,
    an orbit scan over one modulation period to pick the right angular
    basin, then damped Newton down to machine-level gradient norms."""
    w = np.asarray(init, dtype=np.float64).copy()
    n_points = len(task.points())
    for _ in range(gd_iters):
        w -= gd_rate * toy_gradient(task, w) / n_points
    # place w at the best angle within one period of the C_n modulation
    period = 2.0 * np.pi / task.n
    offsets = np.linspace(0.0, period, 64, endpoint=False)
    losses = [toy_loss(task, rotation_matrix(t) @ w) for t in offsets]
    w = rotation_matrix(offsets[int(np.argmin(losses))]) @ w
    # damped Newton (Levenberg) polish
    lam = 1e-8
    for _ in range(200):
        g = toy_gradient(task, w)
        gn = float(np.linalg.norm(g))
        if gn < grad_tol:
            break
        H = toy_hessian(task, w)
        for _ in range(60):
            try:
                step = np.linalg.solve(H + lam * np.eye(2), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            if np.linalg.norm(toy_gradient(task, w - step)) < gn:
                w = w - step
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
        else:
            break
    return w


@dataclass
class OrbitScan:
    angles: np.ndarray
    losses: np.ndarray
    relative_spread: float

    def to_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.angles.tolist(), self.losses.tolist()))


def orbit_profile(task: ToyRotationTask, w, angles) -> np.ndarray:
    """Loss at the weight vector rotated through each angle (no guard)."""
    return np.array([toy_loss(task, rotation_matrix(t) @ np.asarray(w, float))
                     for t in angles])


def orbit_loss_scan(task: ToyRotationTask, w) -> OrbitScan:
    """Loss along the weight orbit {R(2 pi k / n) w}.

    For a C_n-closed dataset every orbit point sums the same loss terms in
    a different order, so all n values agree to float reassociation.
    Rejects non-closed tasks; use orbit_profile to measure the witness
    spread of an unclosed dataset.
    """
    if not task.closed:
        raise ValueError("orbit scan requires a C_n-closed task dataset")
    angles = task.group_angles
    losses = orbit_profile(task, w, angles)
    spread = float((losses.max() - losses.min()) / np.mean(losses))
    return OrbitScan(angles=angles, losses=losses, relative_spread=spread)


# ---------------------------------------------------------------------------
# curvature along the symmetry generator
# ---------------------------------------------------------------------------


def _hessian_vector_product(task: ToyRotationTask, w, v, h: float = 1e-6) -> np.ndarray:
    """Central-difference H v from analytic gradients."""
    v = np.asarray(v, dtype=np.float64)
    return (toy_gradient(task, w + h * v) - toy_gradient(task, w - h * v)) / (2.0 * h)


def smallest_hessian_eigenvalue(task: ToyRotationTask, w, iters: int = 200,
                                seed: int = 0) -> float:
    """Power iteration on the shifted operator (c I - H) using
    finite-difference Hessian-vector products; never forms H."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2)
    v /= np.linalg.norm(v)
    lam_max = 0.0
    for _ in range(iters):
        hv = _hessian_vector_product(task, w, v)
        norm = np.linalg.norm(hv)
        if norm == 0.0:
            break
        lam_max = float(v @ hv)
        v = hv / norm
    shift = abs(lam_max) * 1.05 + 1.0
    v = rng.normal(size=2)
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(iters):
        bv = shift * v - _hessian_vector_product(task, w, v)
        norm = np.linalg.norm(bv)
        if norm == 0.0:
            break
        mu = float(v @ bv)
        v = bv / norm
    return shift - mu


@dataclass
class CurvatureReport:
    """Second-order probe of the loss along the symmetry generator."""

    n: int
    loss: float
    gradient_norm: float
    directional_derivative: float    # grad . (G w), ~0 for a group-averaged loss
    generator_curvature: float       # floored at the estimator resolution
    generator_curvature_raw: float
    curvature_resolution: float
    radial_curvature: float
    curvature_ratio: float           # generator / radial, after flooring
    smallest_hessian_eigenvalue: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "n", "loss", "gradient_norm", "directional_derivative",
            "generator_curvature", "generator_curvature_raw",
            "curvature_resolution", "radial_curvature", "curvature_ratio",
            "smallest_hessian_eigenvalue")}


def generator_curvature(task: ToyRotationTask, w_star, step: float = 1e-4,
                        grad_norm_limit: float = 1e-6) -> CurvatureReport:
    """Directional derivative and curvature along the generator direction
    d = G w_star, compared with the radial direction w_star/|w_star|.

    Curvatures are unit-direction second differences with spacing ``step``.
    A second difference cannot resolve curvature below roughly
    64 eps |Omega| / step^2; raw values inside that bound are reported as
    zero, with the bound recorded, so an exponentially flat valley does
    not read as noise.
    """
    w = np.asarray(w_star, dtype=np.float64)
    g = toy_gradient(task, w)
    grad_norm = float(np.linalg.norm(g))
    if grad_norm > grad_norm_limit:
        warnings.warn(
            f"generator_curvature called away from a minimum "
            f"(|grad| = {grad_norm:.2e} > {grad_norm_limit:.0e}); results returned anyway",
            stacklevel=2)
    d = ROTATION_GENERATOR @ w
    directional = float(g @ d)
    d_unit = d / np.linalg.norm(d)
    r_unit = w / np.linalg.norm(w)

    loss_0 = toy_loss(task, w)

    def second_difference(direction):
        up = toy_loss(task, w + step * direction)
        down = toy_loss(task, w - step * direction)
        raw = (up - 2.0 * loss_0 + down) / step**2
        resolution = 64.0 * MACHINE_EPS * max(abs(up), abs(loss_0), abs(down)) / step**2
        return raw, resolution

    gen_raw, resolution = second_difference(d_unit)
    gen = 0.0 if abs(gen_raw) < resolution else gen_raw
    radial_raw, _ = second_difference(r_unit)
    return CurvatureReport(
        n=task.n, loss=loss_0, gradient_norm=grad_norm,
        directional_derivative=directional,
        generator_curvature=gen, generator_curvature_raw=gen_raw,
        curvature_resolution=resolution, radial_curvature=radial_raw,
        curvature_ratio=gen / radial_raw if radial_raw != 0.0 else float("inf"),
        smallest_hessian_eigenvalue=smallest_hessian_eigenvalue(task, w))


def generator_curvature_sweep(ns=(4, 16, 64, 360), n_points: int = 200,
                              seed: int = 0) -> list[CurvatureReport]:
    """Train the toy task for each group order and measure the generator
    curvature at the minimum; flattening toward the continuous limit shows
    up as a non-increasing sequence."""
    reports = []
    for n in ns:
        task = make_toy_task(n, n_points=n_points, seed=seed)
        w_star = train_toy(task)
        reports.append(generator_curvature(task, w_star))
    return reports
