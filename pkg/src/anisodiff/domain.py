"""Anisotropic geometry and divergence-free velocity fields.

The domain is a periodic box [-Lx, Lx) x [-Ly, Ly).  Velocity fields are
built from a stream function psi(x, y) = A * f(x) * g(y), where the scaling
profiles f and g carry the anisotropy exponents p and q:

    f(x) = (x^2 + eps^2)^(p/2),    g(y) = (y^2 + eps^2)^(q/2)

With eps = 0 these reduce to |x|^p and |y|^q; a positive eps keeps the
profiles smooth at the axes so that derivatives (and hence the velocity)
stay bounded for exponents below 2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class AnisotropyParams:
    """Directional scaling exponents p, q and regularity tags alpha, beta.

    alpha and beta are carried as metadata only; no operation enforces
    Holder continuity numerically.
    """

    p: float
    q: float
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("p", "q", "alpha", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ConfigError(f"params.{name}: must be a positive finite real, got {v}")


@dataclass(frozen=True)
class DomainBox:
    """Periodic box [-Lx, Lx) x [-Ly, Ly) sampled on an nx-by-ny grid.

    Grid values live at cell centers: x_i = -Lx + (i + 1/2) * hx.
    """

    half_width_x: float = 1.0
    half_width_y: float = 1.0
    nx: int = 128
    ny: int = 128

    def __post_init__(self):
        if not (np.isfinite(self.half_width_x) and self.half_width_x > 0):
            raise ConfigError(f"box.half_width_x: must be > 0, got {self.half_width_x}")
        if not (np.isfinite(self.half_width_y) and self.half_width_y > 0):
            raise ConfigError(f"box.half_width_y: must be > 0, got {self.half_width_y}")
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if not isinstance(n, (int, np.integer)) or n < 8 or n % 2 != 0:
                raise ConfigError(f"box.{name}: must be an even integer >= 8, got {n!r}")

    @property
    def hx(self) -> float:
        return 2.0 * self.half_width_x / self.nx

    @property
    def hy(self) -> float:
        return 2.0 * self.half_width_y / self.ny

    @property
    def area(self) -> float:
        return 4.0 * self.half_width_x * self.half_width_y

    def x_centers(self) -> np.ndarray:
        return -self.half_width_x + (np.arange(self.nx) + 0.5) * self.hx

    def y_centers(self) -> np.ndarray:
        return -self.half_width_y + (np.arange(self.ny) + 0.5) * self.hy

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinate arrays of shape (nx, ny)."""
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="ij")

    def wrap_x(self, x):
        lx = self.half_width_x
        return np.mod(np.asarray(x) + lx, 2.0 * lx) - lx

    def wrap_y(self, y):
        ly = self.half_width_y
        return np.mod(np.asarray(y) + ly, 2.0 * ly) - ly


def _pow_half(base, half_exponent: float):
    """(base)^(half_exponent) for base >= 0, with fast paths for the
    exponents that dominate production runs (0, 1/2, 1, 3/2, 2)."""
    e = float(half_exponent)
    if e == 0.0:
        return np.ones_like(np.asarray(base, dtype=float))
    if e == 0.5:
        return np.sqrt(base)
    if e == 1.0:
        return np.asarray(base, dtype=float)
    if e == 1.5:
        return base * np.sqrt(base)
    if e == 2.0:
        return np.asarray(base, dtype=float) ** 2
    return np.power(base, e)


def scaling_f(x, params: AnisotropyParams, epsilon: float = 0.0):
    """Regularized x-direction profile (x^2 + eps^2)^(p/2).

    Equals |x|^p exactly when epsilon is 0; even in x for any epsilon.
    """
    if epsilon < 0:
        raise ConfigError(f"epsilon: must be >= 0, got {epsilon}")
    x = np.asarray(x, dtype=float)
    return _pow_half(x * x + epsilon * epsilon, params.p / 2.0)


def scaling_g(y, params: AnisotropyParams, epsilon: float = 0.0):
    """Regularized y-direction profile (y^2 + eps^2)^(q/2)."""
    if epsilon < 0:
        raise ConfigError(f"epsilon: must be >= 0, got {epsilon}")
    y = np.asarray(y, dtype=float)
    return _pow_half(y * y + epsilon * epsilon, params.q / 2.0)


def _profile_derivative(s, exponent: float, epsilon: float):
    # d/ds (s^2 + eps^2)^(m/2) = m * s * (s^2 + eps^2)^(m/2 - 1)
    s = np.asarray(s, dtype=float)
    base = s * s + epsilon * epsilon
    if epsilon == 0.0 and exponent < 2.0:
        # 0 * base^(negative) is 0/0 at the axis; the one-sided limit is 0
        # for exponent > 1 and bounded for exponent == 1, so pin it to 0.
        out = np.zeros_like(s)
        nz = s != 0.0
        out[nz] = exponent * s[nz] * _pow_half(base[nz], exponent / 2.0 - 1.0)
        return out
    return exponent * s * _pow_half(base, exponent / 2.0 - 1.0)


@dataclass(frozen=True)
class VelocityField:
    """Incompressible 2-D velocity field with closed-form components.

    Families:
      * ``stream``:   u = (dpsi/dy, -dpsi/dx), psi = A * f(x) * g(y).
      * ``shear``:    u = (A * g(y), 0), the classical shear comparison.
      * ``constant``: u = (cx, cy), test plumbing.
      * ``zero``:     u = 0, pure-diffusion runs.

    Evaluation is a pure function of (x, y); callers that live on the
    periodic box are responsible for wrapping coordinates first.
    """

    family: str = "stream"
    params: AnisotropyParams | None = None
    amplitude: float = 1.0
    regularization: float = 0.0
    constant: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.family not in ("stream", "shear", "constant", "zero"):
            raise ConfigError(f"velocity.family: unknown family {self.family!r}")
        if self.family in ("stream", "shear"):
            if self.params is None:
                raise ConfigError(f"velocity.params: required for family {self.family!r}")
            if not np.isfinite(self.amplitude):
                raise ConfigError("velocity.amplitude: must be finite")
            if self.regularization < 0:
                raise ConfigError(
                    f"velocity.regularization: must be >= 0, got {self.regularization}"
                )

    @property
    def is_zero(self) -> bool:
        if self.family == "zero":
            return True
        if self.family == "constant":
            return self.constant == (0.0, 0.0)
        return self.amplitude == 0.0

    @classmethod
    def zero(cls) -> "VelocityField":
        return cls(family="zero")

    @classmethod
    def of_constant(cls, cx: float, cy: float) -> "VelocityField":
        return cls(family="constant", constant=(float(cx), float(cy)))

    @classmethod
    def shear(cls, params: AnisotropyParams, amplitude: float = 1.0,
              epsilon: float = 0.0) -> "VelocityField":
        return cls(family="shear", params=params, amplitude=amplitude,
                   regularization=epsilon)

    def stream_function(self, x, y):
        if self.family != "stream":
            raise ConfigError(f"velocity.family: {self.family!r} has no stream function")
        eps = self.regularization
        return self.amplitude * scaling_f(x, self.params, eps) * scaling_g(y, self.params, eps)

    def velocity(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Component arrays (u_x, u_y) at the given coordinates."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.family == "zero":
            return np.zeros_like(x), np.zeros_like(y)
        if self.family == "constant":
            cx, cy = self.constant
            return np.full_like(x, cx), np.full_like(y, cy)
        eps = self.regularization
        a = self.amplitude
        if self.family == "shear":
            ux = a * scaling_g(y, self.params, eps)
            return ux, np.zeros_like(y)
        # stream family: u = (psi_y, -psi_x)
        fx = scaling_f(x, self.params, eps)
        gy = scaling_g(y, self.params, eps)
        dfx = _profile_derivative(x, self.params.p, eps)
        dgy = _profile_derivative(y, self.params.q, eps)
        return a * fx * dgy, -a * dfx * gy

    def max_speed(self, box: DomainBox) -> float:
        """Largest per-component speed sampled on the box grid (CFL input)."""
        xg, yg = box.grid()
        ux, uy = self.velocity(xg, yg)
        return float(max(np.max(np.abs(ux)), np.max(np.abs(uy))))


def make_velocity(params: AnisotropyParams, amplitude: float, epsilon: float,
                  pure_diffusion: bool = False) -> VelocityField:
    """Stream-function field with the prescribed anisotropy.

    amplitude == 0 is rejected unless the run is explicitly flagged as
    pure diffusion, in which case the zero field is returned.  epsilon
    must be positive when either exponent is below 1, otherwise the
    velocity components are unbounded near the axes.
    """
    if amplitude == 0.0:
        if pure_diffusion:
            return VelocityField.zero()
        raise ConfigError(
            "velocity.amplitude: 0 requested for an advective run; "
            "pass pure_diffusion=True for a deliberately degenerate field"
        )
    if epsilon <= 0.0 and (params.p < 1.0 or params.q < 1.0):
        raise ConfigError(
            f"velocity.regularization: must be > 0 when p < 1 or q < 1 "
            f"(got epsilon={epsilon}, p={params.p}, q={params.q})"
        )
    return VelocityField(family="stream", params=params, amplitude=amplitude,
                         regularization=epsilon)


def divergence_residual(field: VelocityField, box: DomainBox) -> float:
    """Max |centered-difference divergence| over the grid.

    The stencil evaluates the analytic components at x +/- hx and
    y +/- hy directly (the field extends smoothly past the box edge),
    so the residual measures how far the construction is from exact
    incompressibility: O(h^2) for smooth fields, 0 for constants.
    """
    xg, yg = box.grid()
    hx, hy = box.hx, box.hy
    ux_p, _ = field.velocity(xg + hx, yg)
    ux_m, _ = field.velocity(xg - hx, yg)
    _, uy_p = field.velocity(xg, yg + hy)
    _, uy_m = field.velocity(xg, yg - hy)
    div = (ux_p - ux_m) / (2.0 * hx) + (uy_p - uy_m) / (2.0 * hy)
    return float(np.max(np.abs(div)))
