"""Truncated Fourier fields on the 2*pi-periodic interval and the basic
spectral operators they support.

Conventions (used everywhere in the package):

* A field is u(x) = sum_{|n| <= n_max} c_n e^{inx} per component; coefficients
  are stored densely for n = -n_max .. n_max, complex even for real fields
  (realness is the conjugate-symmetry invariant, not a representation).
* Inner products are the unnormalized L2(-pi, pi) ones, so ||sin||^2 = pi and
  ||e^{inx}||^2 = 2*pi.
* The Sobolev scale is weighted by the eigenvalues of 1 - d^2/dx^2:
  ||u||_{H^s}^2 = 2*pi * sum_n (n^2+1)^s |c_n|^2, so s=0 is L2 and s=1 is the
  energy norm ||u'||^2 + ||u||^2.
* Physical-space work happens on a uniform grid x_j = -pi + 2*pi*j/M with
  M >= 4*n_max + 4 by default, which keeps quadratic and cubic pointwise
  products of band-limited fields alias-free; for non-polynomial maps the
  residual aliasing of smooth fields is below ~1e-10 at n_max >= 64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import TruncationError

__all__ = [
    "TWO_PI",
    "Grid",
    "get_grid",
    "FourierField",
    "eigenvalue",
    "eigenvalue_split",
    "low_pass",
    "high_pass",
    "shifted_laplacian",
    "sobolev_norm",
    "inner_l2",
    "inner_sobolev",
    "mean_value",
    "apply_pointwise",
    "random_real_field",
    "random_singular_field",
    "write_field_csv",
    "read_field_csv",
    "write_field_bin",
    "read_field_bin",
]

TWO_PI = 2.0 * np.pi


def default_n_phys(n_max):
    # alias-free up to cubic products of band-limited inputs (M >= 4*n_max+2)
    return 4 * n_max + 4


class Grid:
    """Uniform collocation grid on [-pi, pi) paired with a mode truncation."""

    def __init__(self, n_max, n_phys=None):
        if n_phys is None:
            n_phys = default_n_phys(n_max)
        if n_phys < 2 * n_max + 2:
            raise ValueError("physical grid must resolve the truncation")
        if n_phys % 2:
            raise ValueError("physical grid size must be even")
        self.n_max = int(n_max)
        self.n_phys = int(n_phys)
        self.x = -np.pi + TWO_PI * np.arange(self.n_phys) / self.n_phys
        self.wavenumbers = np.arange(-self.n_max, self.n_max + 1)
        # FFT-layout wavenumbers of the full grid and the e^{ik(-pi)} phases
        # that move the transform origin from 0 to -pi.
        half = self.n_phys // 2
        self._k_full = np.concatenate(
            [np.arange(0, half), np.arange(-half, 0)]
        ).astype(np.int64)
        self._phase_full = np.where(self._k_full % 2 == 0, 1.0, -1.0)
        self._idx = self.wavenumbers % self.n_phys
        self._phase = np.where(self.wavenumbers % 2 == 0, 1.0, -1.0)

    # -- truncated coefficients <-> physical values ------------------------

    def to_physical(self, coeffs):
        """Evaluate truncated coefficients (..., 2*n_max+1) on the grid."""
        coeffs = np.asarray(coeffs)
        buf = np.zeros(coeffs.shape[:-1] + (self.n_phys,), dtype=complex)
        buf[..., self._idx] = coeffs * self._phase * self.n_phys
        return np.fft.ifft(buf, axis=-1)

    def from_physical(self, values):
        """Truncate grid values (..., M) to coefficients (..., 2*n_max+1)."""
        spec = np.fft.fft(np.asarray(values, dtype=complex), axis=-1) / self.n_phys
        return spec[..., self._idx] * self._phase

    # -- full-resolution spectral helpers (used by the quadrature machinery) --

    def val2spec(self, values):
        spec = np.fft.fft(np.asarray(values, dtype=complex), axis=-1) / self.n_phys
        return spec * self._phase_full

    def spec2val(self, spec):
        return np.fft.ifft(spec * self._phase_full * self.n_phys, axis=-1)

    def deriv_values(self, values, order=1):
        spec = np.fft.fft(np.asarray(values, dtype=complex), axis=-1)
        mult = (1j * self._k_full) ** order
        if order % 2:
            # zero the unpaired Nyquist mode for odd derivatives
            mult = mult.copy()
            mult[self.n_phys // 2] = 0.0
        return np.fft.ifft(spec * mult, axis=-1)

    def mean_values(self, values):
        return np.asarray(values).mean(axis=-1)

    def antideriv_values(self, values):
        """F(x) = integral_{-pi}^{x} v(s) ds on the grid, spectrally accurate.

        The mean of v contributes the linear-in-x term; the mean-free part is
        integrated mode by mode.
        """
        spec = self.val2spec(values)
        mean = spec[..., 0].copy()
        with np.errstate(divide="ignore", invalid="ignore"):
            anti = spec / (1j * self._k_full)
        anti[..., 0] = 0.0
        per = self.spec2val(anti)
        per = per - per[..., 0:1]
        return per + mean[..., None] * (self.x + np.pi)

    def weighted_antideriv_values(self, values, mu):
        """G(x) = integral_{-pi}^{x} e^{mu*s} p(s) ds for periodic p, real mu.

        Exact for band-limited p: each mode integrates in closed form, so the
        non-periodic exponential weight costs no accuracy.
        """
        if abs(mu) < 1e-13:
            return self.antideriv_values(values)
        spec = self.val2spec(values)
        q = self.spec2val(spec / (1j * self._k_full + mu))
        return np.exp(mu * self.x) * q - np.exp(-mu * np.pi) * q[..., 0:1]

    def weighted_full_integral(self, values, mu):
        """integral_{-pi}^{pi} e^{mu*s} p(s) ds for periodic p, real mu."""
        if abs(mu) < 1e-13:
            return self.mean_values(values) * TWO_PI
        spec = self.val2spec(values)
        q0 = self.spec2val(spec / (1j * self._k_full + mu))[..., 0]
        return (np.exp(mu * np.pi) - np.exp(-mu * np.pi)) * q0


@lru_cache(maxsize=64)
def get_grid(n_max, n_phys=None):
    return Grid(n_max, n_phys)


@dataclass
class FourierField:
    """Truncated complex Fourier coefficients of a (vector of) 2*pi-periodic
    function(s); shape (n_components, 2*n_max+1), index k <-> wavenumber
    k - n_max."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)  # no copy when complex128
        if c.ndim == 1:
            c = c[None, :]
        if c.ndim != 2 or c.shape[1] % 2 == 0:
            raise ValueError(f"bad coefficient shape {c.shape}")
        self.coeffs = c

    # -- constructors -------------------------------------------------------

    @classmethod
    def zeros(cls, n_max, n_components=1):
        return cls(np.zeros((n_components, 2 * n_max + 1), dtype=complex))

    @classmethod
    def from_modes(cls, n_max, modes, n_components=1):
        """Build a field from {(component, wavenumber): coefficient}."""
        f = cls.zeros(n_max, n_components)
        for (comp, n), val in modes.items():
            if abs(n) > n_max:
                raise TruncationError(f"mode {n} exceeds truncation {n_max}")
            f.coeffs[comp, n + n_max] = val
        return f

    @classmethod
    def from_function(cls, fn, n_max, n_components=1, n_phys=None):
        """Sample fn(x) (returning (n_components, M) or (M,)) and transform."""
        grid = get_grid(n_max, n_phys)
        vals = np.asarray(fn(grid.x), dtype=complex)
        if vals.ndim == 1:
            vals = vals[None, :]
        if vals.shape != (n_components, grid.n_phys):
            raise ValueError(f"sampled shape {vals.shape} inconsistent")
        return cls(grid.from_physical(vals))

    # -- basic structure -----------------------------------------------------

    @property
    def n_max(self):
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def n_components(self):
        return self.coeffs.shape[0]

    @property
    def wavenumbers(self):
        return np.arange(-self.n_max, self.n_max + 1)

    def copy(self):
        return FourierField(self.coeffs.copy())

    def component(self, i):
        return FourierField(self.coeffs[i : i + 1].copy())

    def coefficient(self, n, component=0):
        return self.coeffs[component, n + self.n_max]

    def physical(self, n_phys=None):
        return get_grid(self.n_max, n_phys).to_physical(self.coeffs)

    def dx(self, order=1):
        mult = (1j * self.wavenumbers) ** order
        return FourierField(self.coeffs * mult)

    def pad_to(self, n_max):
        if n_max < self.n_max:
            raise ValueError("pad_to cannot shrink; use truncate")
        out = FourierField.zeros(n_max, self.n_components)
        lo = n_max - self.n_max
        out.coeffs[:, lo : lo + self.coeffs.shape[1]] = self.coeffs
        return out

    def truncate(self, n_max):
        if n_max > self.n_max:
            return self.pad_to(n_max)
        lo = self.n_max - n_max
        return FourierField(self.coeffs[:, lo : lo + 2 * n_max + 1].copy())

    def stack(self, other):
        if other.n_max != self.n_max:
            raise ValueError("truncations differ")
        return FourierField(np.vstack([self.coeffs, other.coeffs]))

    def conj_symmetry_defect(self):
        """max |c(-n) - conj(c(n))|; zero for real-valued fields."""
        flipped = np.conj(self.coeffs[:, ::-1])
        return float(np.max(np.abs(self.coeffs - flipped)))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.coeffs)))

    # -- linear arithmetic ----------------------------------------------------

    def __add__(self, other):
        return FourierField(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return FourierField(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return FourierField(self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return FourierField(self.coeffs / scalar)

    def __neg__(self):
        return FourierField(-self.coeffs)


# -- eigenvalue bookkeeping of 1 - d^2/dx^2 ------------------------------------


def eigenvalue(index):
    """Eigenvalues of 1 - d^2/dx^2 on periodic functions in non-decreasing
    order: lambda_0 = 1, lambda_{2n-1} = lambda_{2n} = n^2 + 1 (sin nx, cos nx).
    """
    index = np.asarray(index)
    n = (index + 1) // 2
    return (n * n + 1).astype(float)


def eigenvalue_split(n_split):
    """(lambda_{2N}, lambda_{2N+1}) around the |n| <= N / |n| > N split."""
    lam_lo = float(n_split**2 + 1)
    lam_hi = float((n_split + 1) ** 2 + 1)
    return lam_lo, lam_hi


# -- module operations ----------------------------------------------------------


def low_pass(field, k_cut):
    """Orthogonal projection onto the modes |n| <= k_cut (the first 2k+1
    eigenfunctions in the sin/cos ordering)."""
    if k_cut > field.n_max:
        raise TruncationError(
            f"cut {k_cut} exceeds field truncation {field.n_max}"
        )
    out = field.copy()
    mask = np.abs(out.wavenumbers) > k_cut
    out.coeffs[:, mask] = 0.0
    return out


def high_pass(field, k_cut):
    """Complementary projection onto |n| > k_cut."""
    return field - low_pass(field, k_cut)


def shifted_laplacian(field):
    """Apply 1 - d^2/dx^2: multiply mode n by n^2 + 1."""
    n = field.wavenumbers
    return FourierField(field.coeffs * (n * n + 1.0))


def _weights(field, s):
    n = field.wavenumbers
    return (n * n + 1.0) ** s


def sobolev_norm(field, s=0.0):
    """(2*pi * sum_n (n^2+1)^s |c_n|^2)^{1/2}, summed over components.

    Underflow-safe: coefficients are rescaled before squaring so norms of
    super-exponentially small states remain exact to relative rounding.
    """
    c = field.coeffs
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    z = np.abs(c / scale) ** 2 * _weights(field, s)
    return scale * float(np.sqrt(TWO_PI * z.sum()))


def inner_l2(f, g):
    """Hermitian L2(-pi,pi) inner product (f, g) = int f * conj(g) dx."""
    return TWO_PI * complex(np.sum(f.coeffs * np.conj(g.coeffs)))


def inner_sobolev(f, g, s=1.0):
    return TWO_PI * complex(np.sum(f.coeffs * np.conj(g.coeffs) * _weights(f, s)))


def mean_value(field):
    """Spatial mean (1/2pi) * integral = the n = 0 coefficient."""
    vals = field.coeffs[:, field.n_max]
    return complex(vals[0]) if field.n_components == 1 else vals.copy()


def apply_pointwise(fn, *fields, n_phys=None, n_max=None):
    """Evaluate a smooth pointwise map of one or more fields with dealiasing.

    All fields are pushed to the shared physical grid (>= 4*n_max+4 points by
    default), fn is applied to their value arrays, and the result is truncated
    back; modes created beyond the truncation are discarded.
    """
    base = fields[0]
    if any(f.n_max != base.n_max for f in fields[1:]):
        raise ValueError("fields must share a truncation")
    out_n_max = base.n_max if n_max is None else n_max
    grid = get_grid(base.n_max, n_phys)
    vals = fn(*[grid.to_physical(f.coeffs) for f in fields])
    vals = np.atleast_2d(np.asarray(vals, dtype=complex))
    out = get_grid(out_n_max, grid.n_phys) if out_n_max != base.n_max else grid
    return FourierField(out.from_physical(vals))


def random_singular_field(rng, n_max, decay, x0=None, jitter=0.3, target=None,
                          target_s=0.0):
    """Real field with aligned-phase tail |c_n| ~ n^{-decay}: a point
    singularity at x0. These saturate interpolation bounds that random-phase
    samples (whose products decorrelate) do not reach."""
    if x0 is None:
        x0 = rng.uniform(-np.pi, np.pi)
    n = np.arange(1, n_max + 1)
    amp = n.astype(float) ** (-decay)
    if jitter:
        amp = amp * (1.0 + jitter * rng.standard_normal(n_max))
    pos = 0.5 * amp * np.exp(-1j * n * x0)
    c = np.zeros((1, 2 * n_max + 1), dtype=complex)
    c[0, n_max + 1 :] = pos
    c[0, :n_max] = np.conj(pos[::-1])
    field = FourierField(c)
    if target is not None:
        cur = sobolev_norm(field, target_s)
        if cur > 0:
            field = field * (target / cur)
    return field


def random_real_field(rng, n_max, n_components=1, decay=2.0, target_h1=None):
    """Random real-valued field with |c_n| ~ (|n|+1)^-decay.

    decay just above 1.5 gives near-extremal H1 tails (used by the K^{-1/2}
    law probes); larger decay gives smooth samples.
    """
    c = np.zeros((n_components, 2 * n_max + 1), dtype=complex)
    n = np.arange(1, n_max + 1)
    amp = (n + 1.0) ** (-decay)
    re = rng.standard_normal((n_components, n_max)) * amp
    im = rng.standard_normal((n_components, n_max)) * amp
    pos = (re + 1j * im) / 2.0
    c[:, n_max + 1 :] = pos
    c[:, :n_max] = np.conj(pos[:, ::-1])
    c[:, n_max] = rng.standard_normal(n_components)
    field = FourierField(c)
    if target_h1 is not None:
        cur = sobolev_norm(field, 1.0)
        if cur > 0:
            field = field * (target_h1 / cur)
    return field


# -- serialization ----------------------------------------------------------------

_BIN_MAGIC = b"RDAF"


def write_field_csv(path, field):
    """Columnar CSV: n, component, re, im (17 significant digits)."""
    with open(path, "w") as fh:
        fh.write("n,component,re,im\n")
        for comp in range(field.n_components):
            for i, n in enumerate(field.wavenumbers):
                c = field.coeffs[comp, i]
                fh.write(f"{n},{comp},{c.real:.17g},{c.imag:.17g}\n")


def read_field_csv(path):
    rows = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float, ndmin=2)
    n_vals = rows[:, 0].astype(int)
    comps = rows[:, 1].astype(int)
    n_max = int(np.max(np.abs(n_vals)))
    field = FourierField.zeros(n_max, int(comps.max()) + 1)
    field.coeffs[comps, n_vals + n_max] = rows[:, 2] + 1j * rows[:, 3]
    return field


def write_field_bin(path, field):
    """Little-endian blob: magic, uint32 n_max, uint32 n_components, then
    interleaved (re, im) float64 pairs, component-major, n = -n_max..n_max."""
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<II", field.n_max, field.n_components))
        inter = np.empty(field.coeffs.size * 2, dtype="<f8")
        inter[0::2] = field.coeffs.real.ravel()
        inter[1::2] = field.coeffs.imag.ravel()
        fh.write(inter.tobytes())


def read_field_bin(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _BIN_MAGIC:
            raise ValueError("not a field blob")
        n_max, n_comp = struct.unpack("<II", fh.read(8))
        count = n_comp * (2 * n_max + 1) * 2
        inter = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
    coeffs = (inter[0::2] + 1j * inter[1::2]).reshape(n_comp, 2 * n_max + 1)
    return FourierField(coeffs)
