"""Online kernel least-mean-square learner for the authentication score.

The learned score is the kernel expansion ``f(q) = sum_i alpha_i k(c_i, q)`` over a
dictionary holding every training input seen so far.  Each step appends the new input
with coefficient ``mu * e`` where ``e`` is the a-priori prediction error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _csvio
from .attributes import NormalizedSample
from .errors import DataError, DimensionError, InsufficientDataError, ParameterError, StepSizeError
from .kernel import KernelParams, gaussian_kernel, kernel_matrix

CHECKPOINT_MAGIC = "PHYAUTH-KLMS"
CHECKPOINT_VERSION = 1

STEADY_WINDOW = 20
STEADY_TOL = 0.05


@dataclass(frozen=True)
class StepOutcome:
    prediction_error: float
    prediction: float


class ModelState:
    """Dictionary, coefficients and hyper-parameters of a KLMS model.

    Mutated in place by :meth:`step`; reads (:meth:`predict`) are side-effect free.
    """

    def __init__(self, step_size: float, kernel: KernelParams, n_features: int | None = None,
                 safety: bool = True):
        if not (math.isfinite(step_size) and step_size > 0):
            raise StepSizeError(f"step size must be positive, got {step_size}")
        self.step_size = float(step_size)
        self.kernel = kernel if isinstance(kernel, KernelParams) else KernelParams(float(kernel))
        self.safety = safety
        self.n_features = n_features
        self._dict = np.empty((0, n_features or 0))
        self._coef = np.empty(0)
        self._size = 0
        self._diag_sum = 0.0

    # -- views -----------------------------------------------------------------
    @property
    def dictionary(self) -> np.ndarray:
        return self._dict[: self._size]

    @property
    def coefficients(self) -> np.ndarray:
        return self._coef[: self._size]

    @property
    def iteration(self) -> int:
        return self._size

    def __len__(self):
        return self._size

    def copy(self) -> "ModelState":
        m = ModelState(self.step_size, self.kernel, self.n_features, self.safety)
        m._dict = self.dictionary.copy()
        m._coef = self.coefficients.copy()
        m._size = self._size
        m._diag_sum = self._diag_sum
        return m

    def snapshot(self, size: int) -> "ModelState":
        """Frozen copy holding only the first ``size`` dictionary entries."""
        if not 0 <= size <= self._size:
            raise ParameterError(f"snapshot size {size} outside [0, {self._size}]")
        m = self.copy()
        m._size = size
        m._dict = m._dict[:size].copy()
        m._coef = m._coef[:size].copy()
        m._diag_sum = float(size)  # Gaussian kernel: k(x, x) = 1
        return m

    @classmethod
    def from_arrays(cls, dictionary, coefficients, step_size: float, kernel: KernelParams,
                    safety: bool = True) -> "ModelState":
        D = np.atleast_2d(np.asarray(dictionary, dtype=float))
        a = np.asarray(coefficients, dtype=float).ravel()
        if D.shape[0] != a.shape[0]:
            raise DimensionError(f"{D.shape[0]} dictionary rows but {a.shape[0]} coefficients")
        m = cls(step_size, kernel, D.shape[1], safety)
        m._dict, m._coef, m._size = D.copy(), a.copy(), a.shape[0]
        m._diag_sum = float(a.shape[0])
        return m

    # -- evaluation --------------------------------------------------------------
    def _check_query(self, q: np.ndarray) -> None:
        if self.n_features is not None and q.shape[-1] != self.n_features:
            raise DimensionError(f"query has {q.shape[-1]} features, model expects {self.n_features}")

    def predict(self, query) -> float:
        q = np.asarray(query, dtype=float)
        self._check_query(q)
        if self._size == 0:
            return 0.0
        k = kernel_matrix(q[None, :], self.dictionary, self.kernel)[0]
        return float(k @ self.coefficients)

    def predict_many(self, queries) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(queries, dtype=float))
        self._check_query(Q)
        if self._size == 0:
            return np.zeros(Q.shape[0])
        return kernel_matrix(Q, self.dictionary, self.kernel) @ self.coefficients

    # -- learning ----------------------------------------------------------------
    def _grow(self, n_features: int) -> None:
        cap = max(16, 2 * self._dict.shape[0])
        d = np.empty((cap, n_features))
        d[: self._size] = self.dictionary
        c = np.empty(cap)
        c[: self._size] = self.coefficients
        self._dict, self._coef = d, c

    def step(self, sample: NormalizedSample) -> StepOutcome:
        x = np.asarray(sample.features, dtype=float)
        y = float(sample.label)
        if not (np.all(np.isfinite(x)) and math.isfinite(y)):
            raise DataError("sample contains non-finite values")
        if self.n_features is None:
            self.n_features = x.shape[0]
            self._dict = np.empty((0, x.shape[0]))
        self._check_query(x)
        kxx = gaussian_kernel(x, x, self.kernel)
        if self.safety:
            bound = (self._size + 1) / (self._diag_sum + kxx)
            if not self.step_size < bound:
                raise StepSizeError(
                    f"step size {self.step_size} violates the convergence bound {bound}; "
                    "disable safety mode to run anyway")
        pred = self.predict(x)
        err = y - pred
        if self._size == self._dict.shape[0]:
            self._grow(x.shape[0])
        self._dict[self._size] = x
        self._coef[self._size] = self.step_size * err
        self._size += 1
        self._diag_sum += kxx
        return StepOutcome(prediction_error=err, prediction=pred)


def predict(state: ModelState, query) -> float:
    return state.predict(query)


def step(state: ModelState, sample: NormalizedSample) -> tuple[ModelState, StepOutcome]:
    out = state.step(sample)
    return state, out


def step_size_upper_bound(samples, kernel: KernelParams | Callable) -> float:
    """Largest admissible step size: L / sum_l k(x_l, x_l).

    ``kernel`` is either Gaussian :class:`KernelParams` or any callable ``k(x, y)``.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise InsufficientDataError("step-size bound needs at least one sample")
    k = kernel if callable(kernel) else (lambda a, b: gaussian_kernel(a, b, kernel))
    diag = sum(k(x, x) for x in X)
    return X.shape[0] / diag


def _as_samples(stream) -> Iterable[NormalizedSample]:
    if hasattr(stream, "samples"):
        return stream.samples()
    return stream


def train(stream: Sequence[NormalizedSample], mu: float, kernel: KernelParams,
          safety: bool = True, state: ModelState | None = None) -> tuple[ModelState, np.ndarray]:
    """Run the learner over ``stream`` in order; returns the model and the error trace.

    Passing ``state`` continues training an existing model.
    """
    samples = list(_as_samples(stream))
    if not samples:
        raise InsufficientDataError("training stream is empty")
    if state is None:
        state = ModelState(mu, kernel, safety=safety)
    trace = np.empty(len(samples))
    for i, s in enumerate(samples):
        trace[i] = state.step(s).prediction_error
    return state, trace


def train_arrays(features: np.ndarray, labels: np.ndarray, mu: float, kernel: KernelParams,
                 safety: bool = True, state: ModelState | None = None) -> tuple[ModelState, np.ndarray]:
    samples = [NormalizedSample(f, y) for f, y in zip(np.asarray(features), np.asarray(labels))]
    return train(samples, mu, kernel, safety=safety, state=state)


def batch_predictions(dictionary: np.ndarray, coefficients: np.ndarray, kernel: KernelParams,
                      queries: np.ndarray) -> np.ndarray:
    """Kernel expansion evaluated from scratch (no incremental state)."""
    return kernel_matrix(queries, dictionary, kernel) @ coefficients


def steady_state_index(curve, window: int = STEADY_WINDOW, tol: float = STEADY_TOL) -> int | None:
    """First 1-based iteration from which the curve is declared steady.

    With ``m_l`` the mean of the ``window`` iterations ending at ``l`` and ``m_end`` the
    last such mean, the curve is steady from the first ``l`` after which
    ``|m_l - m_end|`` stays below ``tol * |curve[0] - m_end|``: what change remains is
    under ``tol`` of the total change.  Returns None when the steady stretch is shorter
    than one window (the curve is still moving at its end) or the curve is too short.
    """
    c = np.asarray(curve, dtype=float)
    if c.ndim != 1 or len(c) < 2 * window:
        return None
    m = np.convolve(c, np.ones(window) / window, mode="valid")  # m[j] ends at j + window
    final = m[-1]
    total = abs(c[0] - final)
    outside = np.abs(m - final) > tol * total
    if not outside.any():
        return window
    first = int(np.flatnonzero(outside)[-1]) + 1
    if first > len(m) - window:
        return None
    return first + window


def mse_curve(scenario, runs: int = 100, mu: float = 0.1, kernel: KernelParams | str = "median",
              safety: bool = True) -> np.ndarray:
    """Ensemble estimate of E[e[l]^2] over ``runs`` independently seeded streams."""
    from .simulation import generate_stream
    from .kernel import median_heuristic_width

    if runs < 1:
        raise ParameterError("runs must be >= 1")
    acc = None
    for r in range(runs):
        stream = generate_stream(scenario.with_seed_offset(r))
        kp = median_heuristic_width(stream.features, seed=scenario.seed + r) if kernel == "median" else kernel
        _, trace = train_arrays(stream.features, stream.labels, mu, kp, safety=safety)
        sq = trace ** 2
        acc = sq if acc is None else acc + sq
    return acc / runs


def write_error_trace(path, trace) -> Path:
    t = np.asarray(trace, dtype=float)
    return _csvio.write_csv(path, ["iteration", "error", "squared_error"],
                            ((i + 1, e, e * e) for i, e in enumerate(t)))


def save_checkpoint(state: ModelState, path) -> Path:
    """Text checkpoint; floats written with ``float.hex`` so the file is platform-neutral."""
    n = state.n_features or 0
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        f"sigma {state.kernel.width.hex()}",
        f"mu {state.step_size.hex()}",
        f"n_features {n}",
        f"iterations {state.iteration}",
        f"safety {int(state.safety)}",
    ]
    for row, a in zip(state.dictionary, state.coefficients):
        lines.append(" ".join(float(v).hex() for v in row) + " | " + float(a).hex())
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", newline="")
    return path


def load_checkpoint(path) -> ModelState:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 2 or head[0] != CHECKPOINT_MAGIC:
        raise DataError(f"not a KLMS checkpoint: {path}")
    if head[1] != str(CHECKPOINT_VERSION):
        raise DataError(f"unsupported checkpoint version {head[1]}")
    try:
        hdr = dict(line.split(None, 1) for line in lines[1:6])
        n, size = int(hdr["n_features"]), int(hdr["iterations"])
        rows, coefs = [], []
        for line in lines[6:6 + size]:
            left, right = line.split("|")
            rows.append([float.fromhex(t) for t in left.split()])
            coefs.append(float.fromhex(right.strip()))
        D = np.array(rows, dtype=float).reshape(size, n)
        mu, sigma, safety = float.fromhex(hdr["mu"]), float.fromhex(hdr["sigma"]), bool(int(hdr["safety"]))
    except (KeyError, ValueError) as e:
        raise DataError(f"corrupt checkpoint {path}: {e}") from None
    m = ModelState.from_arrays(D, coefs, mu, KernelParams(sigma), safety=safety)
    m.n_features = n
    return m
