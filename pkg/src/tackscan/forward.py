"""One-dimensional frequency-domain radar forward model.

Each trace is the inverse transform of (source spectrum x global reflection
coefficient) of the local layer stack at normal incidence. The global
coefficient combines Fresnel interface coefficients bottom-up through the
classic recursion

    R_i = (r_i + R_{i+1} phi_{i+1}) / (1 + r_i R_{i+1} phi_{i+1}),
    phi = exp(-2j k d),

with complex wavenumbers k = 2 pi f sqrt(eps_c) / c and
eps_c = eps_r - j sigma / (2 pi f eps0). Layer 0 of a stack is the
incidence medium (where the antenna sits); the response is referenced at
its lower interface, so a two-layer stack reduces to a single Fresnel
coefficient.

Synthesis is circular (spectral), so an echo delayed beyond the time window
wraps around; windows are sized well past the deepest interface of
interest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .scene import Layer, PavementScene, ValidationError

__all__ = [
    "C_VACUUM",
    "PulseSpec",
    "AcquisitionSpec",
    "AScan",
    "BScan",
    "Survey",
    "Profile",
    "fresnel_reflection",
    "layered_reflection_response",
    "ricker_wavelet",
    "source_spectrum",
    "synthesize_ascan",
    "simulate_survey",
    "envelope",
    "AIR",
]

logger = logging.getLogger(__name__)

C_VACUUM = 299792458.0  # m/s
EPS0 = 8.8541878128e-12  # F/m

AIR = Layer("air", 0.0, 1.0, 0.0, half_space=True)


# ---------------------------------------------------------------------------
# Acquisition geometry and containers
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PulseSpec:
    """Source pulse: zero-phase Ricker at the antenna center frequency."""

    center_frequency: float = 2.6e9
    kind: str = "ricker"
    amplitude: float = 1.0

    def __post_init__(self):
        if self.center_frequency <= 0.0:
            raise ValidationError("pulse center_frequency must be > 0")
        if self.kind != "ricker":
            raise ValidationError(f"unsupported pulse kind {self.kind!r}")


@dataclass(frozen=True)
class AcquisitionSpec:
    """Time sampling, spatial density, and noise level of a survey.

    coupling_amplitude adds a fixed early-time antenna-coupling ring-down
    (identical on every trace); 0 disables it.
    """

    time_window: float = 20.0e-9
    samples_per_trace: int = 2048
    traces_per_meter: float = 50.0
    noise_snr_db: Optional[float] = None
    seed: int = 0
    coupling_amplitude: float = 0.0

    def __post_init__(self):
        if self.time_window <= 0.0:
            raise ValidationError("time_window must be > 0")
        if self.samples_per_trace < 2:
            raise ValidationError("samples_per_trace must be >= 2")
        if self.traces_per_meter <= 0.0:
            raise ValidationError("traces_per_meter must be > 0")

    @property
    def dt(self) -> float:
        return self.time_window / self.samples_per_trace

    def frequencies(self) -> np.ndarray:
        """Real-transform frequency grid implied by the time sampling."""
        return np.fft.rfftfreq(self.samples_per_trace, d=self.dt)


@dataclass
class AScan:
    """One time-domain trace with its acquisition context."""

    samples: np.ndarray
    dt: float
    position: tuple[float, float]
    truth_quantity: Optional[float] = None

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.dt


@dataclass
class BScan:
    """Ordered traces along one survey profile."""

    name: str
    offset: float
    traces: list[AScan]

    def matrix(self) -> np.ndarray:
        return np.stack([t.samples for t in self.traces])


@dataclass(frozen=True)
class Profile:
    """A straight acquisition line: axis 'x' (longitudinal, fixed y=offset)
    or 'y' (transverse, fixed x=offset)."""

    name: str
    axis: str
    offset: float

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ValidationError(f"profile axis must be 'x' or 'y', got {self.axis!r}")


@dataclass
class Survey:
    """All traces of one simulated acquisition, plus grouping metadata."""

    x: np.ndarray  # (n,)
    y: np.ndarray  # (n,)
    quantity: np.ndarray  # (n,) truth labels, g/m^2
    samples: np.ndarray  # (n, samples_per_trace)
    dt: float
    pulse: PulseSpec
    acquisition: AcquisitionSpec
    profile_names: list[str]
    profile_of_trace: np.ndarray  # (n,) index into profile_names

    @property
    def n_traces(self) -> int:
        return self.samples.shape[0]

    def ascan(self, i: int) -> AScan:
        return AScan(
            self.samples[i],
            self.dt,
            (float(self.x[i]), float(self.y[i])),
            float(self.quantity[i]),
        )

    def bscans(self) -> list[BScan]:
        out = []
        for p, name in enumerate(self.profile_names):
            idx = np.flatnonzero(self.profile_of_trace == p)
            offset = float(self.y[idx[0]]) if len(set(self.y[idx])) == 1 else float(self.x[idx[0]])
            out.append(BScan(name, offset, [self.ascan(int(i)) for i in idx]))
        return out


# ---------------------------------------------------------------------------
# Electromagnetics
# ---------------------------------------------------------------------------
def complex_permittivity(eps_r, sigma, freqs) -> np.ndarray:
    """eps_c(f) = eps_r - j sigma / (2 pi f eps0); lossless value at DC."""
    freqs = np.asarray(freqs, dtype=float)
    eps_r = np.asarray(eps_r, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore"):
        loss = np.where(freqs > 0.0, sigma / (2.0 * np.pi * np.where(freqs > 0, freqs, 1.0) * EPS0), 0.0)
    return eps_r - 1j * loss


def fresnel_reflection(eps1, eps2) -> complex:
    """Normal-incidence Fresnel coefficient between two media.

    Accepts real or complex relative permittivities (arrays broadcast).
    """
    n1 = np.sqrt(np.asarray(eps1, dtype=complex))
    n2 = np.sqrt(np.asarray(eps2, dtype=complex))
    r = (n1 - n2) / (n1 + n2)
    if r.ndim == 0:
        return complex(r)
    return r


def layered_reflection_response(stack: Sequence[Layer], freqs) -> np.ndarray:
    """Global reflection coefficient of a layer stack on a frequency grid.

    The stack's first layer is the incidence medium; the last must be a
    half-space. Returns a complex array of the same length as freqs.
    """
    if len(stack) < 2:
        raise ValidationError("reflection response needs at least 2 layers")
    if not stack[-1].half_space:
        raise ValidationError("last layer of the stack must be a half-space")
    freqs = np.asarray(freqs, dtype=float)
    eps = [complex_permittivity(l.rel_permittivity, l.conductivity, freqs) for l in stack]

    # Bottom-up recursion over interfaces; R references the top interface.
    r_bottom = fresnel_reflection(eps[-2], eps[-1])
    response = np.broadcast_to(r_bottom, freqs.shape).astype(complex)
    for i in range(len(stack) - 3, -1, -1):
        inner = stack[i + 1]
        k = 2.0 * np.pi * freqs * np.sqrt(eps[i + 1]) / C_VACUUM
        phase = np.exp(-2j * k * inner.thickness)
        r_top = fresnel_reflection(eps[i], eps[i + 1])
        rp = response * phase
        response = (r_top + rp) / (1.0 + r_top * rp)
    return response


def _stack_response_batch(
    eps_r: np.ndarray, sigma: np.ndarray, thickness: np.ndarray, freqs: np.ndarray
) -> np.ndarray:
    """Reflection response for a batch of stacks sharing one layer count.

    eps_r, sigma, thickness: (n_stacks, n_layers). Returns (n_stacks, n_freqs).
    Identical recursion to layered_reflection_response, vectorized over
    stacks; the survey simulator uses this and the per-trace path verifies
    against the scalar routine in tests.
    """
    n_stacks, n_layers = eps_r.shape
    f = freqs[None, :]
    with np.errstate(divide="ignore"):
        inv_f = np.where(freqs > 0.0, 1.0 / (2.0 * np.pi * np.where(freqs > 0, freqs, 1.0) * EPS0), 0.0)[None, :]

    def eps_c(j):
        return eps_r[:, j, None] - 1j * sigma[:, j, None] * inv_f

    e_lower = eps_c(n_layers - 1)
    e_upper = eps_c(n_layers - 2)
    response = fresnel_reflection(e_upper, e_lower)
    for i in range(n_layers - 3, -1, -1):
        e_top = eps_c(i)
        e_inner = e_upper
        k = 2.0 * np.pi * f * np.sqrt(e_inner) / C_VACUUM
        phase = np.exp(-2j * k * thickness[:, i + 1, None])
        r_top = fresnel_reflection(e_top, e_inner)
        rp = response * phase
        response = (r_top + rp) / (1.0 + r_top * rp)
        e_upper = e_top
    return response


# ---------------------------------------------------------------------------
# Source and synthesis
# ---------------------------------------------------------------------------
def ricker_wavelet(times, fc: float, amplitude: float = 1.0) -> np.ndarray:
    """Zero-phase Ricker wavelet, unit peak at t = 0."""
    a = (np.pi * fc * np.asarray(times, dtype=float)) ** 2
    return amplitude * (1.0 - 2.0 * a) * np.exp(-a)


def source_spectrum(pulse: PulseSpec, acq: AcquisitionSpec) -> np.ndarray:
    """Spectrum of the periodic zero-phase source on the transform grid."""
    n = acq.samples_per_trace
    t = np.arange(n, dtype=float) * acq.dt
    t[n // 2:] -= acq.time_window  # wrap negative lobe to keep zero phase
    return np.fft.rfft(ricker_wavelet(t, pulse.center_frequency, pulse.amplitude))


def coupling_template(pulse: PulseSpec, acq: AcquisitionSpec) -> np.ndarray:
    """Fixed early-time antenna coupling ring-down, added to every trace."""
    if acq.coupling_amplitude == 0.0:
        return np.zeros(acq.samples_per_trace)
    t = np.arange(acq.samples_per_trace, dtype=float) * acq.dt
    fc = pulse.center_frequency
    tau = 1.0 / fc
    tpl = np.cos(2.0 * np.pi * fc * t) * np.exp(-t / tau)
    tpl[t > 6.0 * tau] = 0.0
    return acq.coupling_amplitude * pulse.amplitude * tpl


def envelope(samples: np.ndarray) -> np.ndarray:
    """Magnitude of the analytic signal (FFT Hilbert transform)."""
    x = np.asarray(samples, dtype=float)
    n = x.shape[-1]
    spec = np.fft.fft(x, axis=-1)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1 : n // 2] = 2.0
    else:
        h[1 : (n + 1) // 2] = 2.0
    return np.abs(np.fft.ifft(spec * h, axis=-1))


def _noise_std(power: float, snr_db: float) -> float:
    return float(np.sqrt(power / (10.0 ** (snr_db / 10.0))))


def synthesize_ascan(
    response: np.ndarray,
    pulse: PulseSpec,
    acq: AcquisitionSpec,
    position: tuple[float, float] = (0.0, 0.0),
    truth_quantity: Optional[float] = None,
) -> AScan:
    """Time-domain trace from a sampled reflection response.

    The response must be sampled on acq.frequencies(). With noise_snr_db
    set, white Gaussian noise is added at that SNR relative to this trace's
    own mean power, seeded from acq.seed.
    """
    response = np.asarray(response)
    n_freq = acq.samples_per_trace // 2 + 1
    if response.shape != (n_freq,):
        raise ValidationError(
            f"response sampled on wrong frequency grid: got {response.shape}, "
            f"expected ({n_freq},) for {acq.samples_per_trace} samples"
        )
    trace = np.fft.irfft(source_spectrum(pulse, acq) * response, n=acq.samples_per_trace)
    trace += coupling_template(pulse, acq)
    if acq.noise_snr_db is not None:
        power = float(np.mean(trace**2))
        if power > 0.0:
            rng = np.random.default_rng(acq.seed)
            trace = trace + rng.normal(0.0, _noise_std(power, acq.noise_snr_db), trace.shape)
    return AScan(trace, acq.dt, position, truth_quantity)


# ---------------------------------------------------------------------------
# Survey simulation
# ---------------------------------------------------------------------------
def _survey_positions(
    scene: PavementScene, acq: AcquisitionSpec, profiles: Optional[Sequence[Profile]]
) -> tuple[np.ndarray, np.ndarray, list[str], np.ndarray]:
    if profiles is None:
        # Full grid at the scene step: one trace per ground-truth node.
        nx, ny = scene.shape
        x, y = scene.node_positions()
        names = [f"row_{j}" for j in range(ny)]
        prof = np.tile(np.arange(ny), nx)
        return x, y, names, prof
    xs, ys, names, prof = [], [], [], []
    spacing = 1.0 / acq.traces_per_meter
    for p, profile in enumerate(profiles):
        extent = scene.length if profile.axis == "x" else scene.width
        along = np.arange(0.0, extent + 0.5 * spacing, spacing)
        along = along[along <= extent + 1e-9]
        if profile.axis == "x":
            xs.append(along)
            ys.append(np.full_like(along, profile.offset))
        else:
            xs.append(np.full_like(along, profile.offset))
            ys.append(along)
        names.append(profile.name)
        prof.append(np.full(along.shape, p, dtype=int))
    return np.concatenate(xs), np.concatenate(ys), names, np.concatenate(prof)


def simulate_survey(
    scene: PavementScene,
    pulse: PulseSpec,
    acq: AcquisitionSpec,
    profiles: Optional[Sequence[Profile]] = None,
    chunk: int = 512,
) -> Survey:
    """Simulate one trace per survey position over a scene.

    With profiles=None the survey covers every ground-truth grid node; with
    a profile list, traces run along each line at acq.traces_per_meter.
    Every trace is built from the local stack (air incidence + base courses
    + tack film from the exact-position quantity) and carries its truth
    quantity. Noise is seeded per trace index from acq.seed, so output is
    deterministic and independent of chunking.
    """
    x, y, names, prof = _survey_positions(scene, acq, profiles)
    n = x.size
    q = scene.quantity_at(x, y)
    freqs = acq.frequencies()
    src = source_spectrum(pulse, acq)
    coupling = coupling_template(pulse, acq)

    base_len = len(scene.spec.base_stack)
    n_layers = base_len + 2  # + air incidence + tack film slot
    eps_r = np.empty((n, n_layers))
    sigma = np.empty((n, n_layers))
    thick = np.zeros((n, n_layers))
    for i in range(n):
        stack = (AIR,) + scene.stack_at(float(x[i]), float(y[i]))
        if len(stack) == n_layers - 1:  # no tack film: pad with zero-thickness
            rule = scene.spec.tack_rule
            filler = Layer("tack_coat", 0.0, rule.eps_base, rule.conductivity)
            stack = stack[:2] + (filler,) + stack[2:]
        eps_r[i] = [l.rel_permittivity for l in stack]
        sigma[i] = [l.conductivity for l in stack]
        thick[i] = [l.thickness for l in stack]

    samples = np.empty((n, acq.samples_per_trace))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        resp = _stack_response_batch(eps_r[lo:hi], sigma[lo:hi], thick[lo:hi], freqs)
        samples[lo:hi] = np.fft.irfft(src[None, :] * resp, n=acq.samples_per_trace, axis=1)
    samples += coupling[None, :]

    if acq.noise_snr_db is not None:
        # Common noise floor for the whole survey, per-trace seed streams.
        ref_power = float(np.mean(samples**2))
        std = _noise_std(ref_power, acq.noise_snr_db)
        for i in range(n):
            rng = np.random.default_rng((acq.seed, i))
            samples[i] += rng.normal(0.0, std, acq.samples_per_trace)

    logger.info("simulated survey: %d traces, %d samples each", n, acq.samples_per_trace)
    return Survey(
        x=x,
        y=y,
        quantity=np.asarray(q, dtype=float),
        samples=samples,
        dt=acq.dt,
        pulse=pulse,
        acquisition=acq,
        profile_names=names,
        profile_of_trace=prof,
    )
