"""Linear Kalman filtering used to smooth feature time series.

The general predict/update recursion operates on vector states; the
feature pipeline applies the scalar random-walk special case (F=1, H=1,
B=0) independently to every channel of a sequence via
:func:`smooth_series`.

Model:
    x_k = F x_{k-1} + B u_k + w_k,   w_k ~ N(0, Q)
    z_k = H x_k + v_k,               v_k ~ N(0, R)
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError, UsageError, ValidationError

_SYM_TOL = 1e-9


@dataclass(frozen=True)
class KalmanModel:
    """Time-invariant system matrices.

    Parameters
    ----------
    F : (n, n) ndarray
        State transition matrix.
    B : (n, m) ndarray
        Control input matrix.
    H : (p, n) ndarray
        Measurement matrix.
    Q : (n, n) ndarray
        Process noise covariance; symmetric positive semidefinite.
    R : (p, p) ndarray
        Measurement noise covariance; symmetric, positive definite for
        the update step to be well posed.
    """

    F: np.ndarray
    B: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ("F", "B", "H", "Q", "R"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=np.float64)))
        n = self.F.shape[0]
        if self.F.shape != (n, n):
            raise DimensionError(f"F must be square, got {self.F.shape}")
        if self.B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {self.B.shape}")
        if self.H.shape[1] != n:
            raise DimensionError(f"H must have {n} columns, got {self.H.shape}")
        p = self.H.shape[0]
        _check_symmetric_psd(self.Q, (n, n), "Q")
        _check_symmetric_psd(self.R, (p, p), "R")

    @property
    def state_dim(self):
        return self.F.shape[0]


def _check_symmetric_psd(mat, shape, name):
    if mat.shape != shape:
        raise DimensionError(f"{name} must have shape {shape}, got {mat.shape}")
    if not np.allclose(mat, mat.T, atol=_SYM_TOL, rtol=0.0):
        raise ValidationError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() < -_SYM_TOL:
        raise ValidationError(f"{name} must be positive semidefinite")


@dataclass(frozen=True)
class KalmanState:
    """State estimate x, its covariance P, and the step index k."""

    x: np.ndarray
    P: np.ndarray
    k: int = 0

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=np.float64)))
        object.__setattr__(self, "P", np.atleast_2d(np.asarray(self.P, dtype=np.float64)))
        n = self.x.shape[0]
        if self.P.shape != (n, n):
            raise DimensionError(f"P must be {n}x{n}, got {self.P.shape}")
        if not np.allclose(self.P, self.P.T, atol=_SYM_TOL, rtol=0.0):
            raise ValidationError("P must be symmetric")
        if self.P.diagonal().min() < -_SYM_TOL:
            raise ValidationError("P must have a nonnegative diagonal")


def predict(s: KalmanState, m: KalmanModel, u=None) -> KalmanState:
    """Time update: project the estimate through the system dynamics.

    Returns the a priori state F x + B u with covariance F P F^T + Q.
    The step index is unchanged; it advances when a measurement is
    consumed.
    """
    if s.x.shape[0] != m.state_dim:
        raise DimensionError(f"state dim {s.x.shape[0]} does not match model dim {m.state_dim}")
    x = m.F @ s.x
    if u is not None:
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        if u.shape[0] != m.B.shape[1]:
            raise DimensionError(f"control dim {u.shape[0]} does not match B {m.B.shape}")
        x = x + m.B @ u
    P = m.F @ s.P @ m.F.T + m.Q
    P = 0.5 * (P + P.T)
    return KalmanState(x=x, P=P, k=s.k)


def update(s: KalmanState, m: KalmanModel, z) -> KalmanState:
    """Measurement update: blend the prediction with an observation.

    The gain K = P H^T (H P H^T + R)^{-1} weights the innovation
    z - H x.  Gain entries that underflow to subnormal magnitude are
    forced to exactly zero, so an overwhelming R leaves the estimate
    unchanged.  The step index advances by one.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if z.shape[0] != m.H.shape[0]:
        raise DimensionError(f"measurement dim {z.shape[0]} does not match H {m.H.shape}")
    if s.x.shape[0] != m.state_dim:
        raise DimensionError(f"state dim {s.x.shape[0]} does not match model dim {m.state_dim}")
    pht = s.P @ m.H.T
    innov_cov = m.H @ pht + m.R
    try:
        gain = np.linalg.solve(innov_cov.T, pht.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular innovation covariance at step {s.k}") from exc
    if not np.isfinite(gain).all():
        raise NumericError(f"non-finite Kalman gain at step {s.k}")
    gain[np.abs(gain) < np.finfo(np.float64).tiny] = 0.0
    x = s.x + gain @ (z - m.H @ s.x)
    P = (np.eye(m.state_dim) - gain @ m.H) @ s.P
    P = 0.5 * (P + P.T)
    return KalmanState(x=x, P=P, k=s.k + 1)


def smooth_series(series, q: float, r: float) -> np.ndarray:
    """Smooth every channel of a (T, D) series with a scalar random-walk
    filter (F=1, H=1, B=0, Q=q, R=r).

    The state starts at the channel's first observation with P0 = r, so
    short sequences carry no burn-in transient.  Row t of the output is
    the posterior estimate after consuming observation t.  The gain
    schedule depends only on q and r, so all channels share it.
    """
    series = np.atleast_2d(np.asarray(series, dtype=np.float64))
    if series.size == 0:
        raise UsageError("smooth_series needs a nonempty series")
    if q < 0:
        raise UsageError(f"process noise q must be nonnegative, got {q}")
    if r <= 0:
        raise UsageError(f"measurement noise r must be positive, got {r}")
    steps = series.shape[0]
    out = np.empty_like(series)
    x = series[0].copy()
    out[0] = x
    cov = r
    for t in range(1, steps):
        cov = cov + q
        gain = cov / (cov + r)
        x = x + gain * (series[t] - x)
        cov = (1.0 - gain) * cov
        out[t] = x
    return out
