"""Pavement scene definitions and ground-truth generation.

A scene is a rectangular survey area over a layered pavement. The tack coat
(a sub-millimetric bituminous emulsion film between the wearing and binder
courses) varies spatially, either as piecewise-constant longitudinal
sections or as a smooth Gaussian-bell thickness surface. Every grid node
carries the applied emulsion quantity in g/m^2 plus the class label implied
by the active classing scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "Layer",
    "ClassScheme",
    "BINARY_SCHEME",
    "FOUR_CLASS_SCHEME",
    "quantity_label_scheme",
    "TackCoatRule",
    "ThicknessFieldSpec",
    "Section",
    "SceneSpec",
    "PavementScene",
    "ValidationError",
    "quantity_to_class",
    "quantity_to_layer",
    "sample_thickness_map",
    "build_scene",
    "scene_preset",
    "grid_shape",
    "SCENE_PRESETS",
]


class ValidationError(ValueError):
    """Invalid user-supplied configuration or arguments."""


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Layer:
    """One homogeneous pavement layer.

    Attributes
    ----------
    name : str
    thickness : float
        Thickness [m]; ignored (semantically infinite) when half_space.
    rel_permittivity : float
        Relative permittivity, >= 1.
    conductivity : float
        Electrical conductivity [S/m], >= 0.
    half_space : bool
        True for the terminating medium of a stack.
    """

    name: str
    thickness: float
    rel_permittivity: float
    conductivity: float = 0.0
    half_space: bool = False

    def __post_init__(self):
        if self.rel_permittivity < 1.0:
            raise ValidationError(
                f"layer {self.name!r}: rel_permittivity {self.rel_permittivity} < 1"
            )
        if self.conductivity < 0.0:
            raise ValidationError(f"layer {self.name!r}: conductivity < 0")
        if self.thickness < 0.0:
            raise ValidationError(f"layer {self.name!r}: thickness < 0")


# ---------------------------------------------------------------------------
# Emulsion classing schemes
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ClassScheme:
    """Maps an emulsion quantity [g/m^2] to a class label.

    kind:
      * ``binary``          -> {absent, present}
      * ``four_class``      -> {absent, under, correct, over}
      * ``quantity_labels`` -> nearest of a finite quantity set, labelled by
        the quantity itself (ties go to the lower quantity).
    """

    kind: str
    labels: tuple[str, ...]
    quantities: tuple[float, ...] = ()

    def classify(self, q: float) -> str:
        return quantity_to_class(q, self)

    def classify_array(self, q: np.ndarray) -> np.ndarray:
        out = np.empty(q.shape, dtype=object)
        flat = out.reshape(-1)
        for i, v in enumerate(np.asarray(q, dtype=float).reshape(-1)):
            flat[i] = quantity_to_class(float(v), self)
        return out


BINARY_SCHEME = ClassScheme(kind="binary", labels=("absent", "present"))

# Correct proportioning bracketed around 300 g/m^2; bounds are inclusive.
FOUR_CLASS_UNDER_MAX = 250.0
FOUR_CLASS_OVER_MIN = 350.0
FOUR_CLASS_SCHEME = ClassScheme(
    kind="four_class", labels=("absent", "under", "correct", "over")
)


def quantity_label_scheme(quantities: Sequence[float]) -> ClassScheme:
    """Scheme whose classes are the listed quantities themselves."""
    qs = tuple(sorted(float(q) for q in quantities))
    if len(qs) < 2:
        raise ValidationError("quantity label scheme needs >= 2 quantities")
    if len(set(qs)) != len(qs):
        raise ValidationError("duplicate quantity labels")
    return ClassScheme(
        kind="quantity_labels",
        labels=tuple(format_quantity_label(q) for q in qs),
        quantities=qs,
    )


def format_quantity_label(q: float) -> str:
    return f"{q:g}"


def quantity_to_class(q: float, scheme: ClassScheme) -> str:
    """Class label for an emulsion quantity under a scheme.

    Raises
    ------
    ValidationError
        If q < 0.
    """
    if q < 0.0:
        raise ValidationError(f"emulsion quantity must be >= 0, got {q}")
    if scheme.kind == "binary":
        return "absent" if q == 0.0 else "present"
    if scheme.kind == "four_class":
        if q == 0.0:
            return "absent"
        if q < FOUR_CLASS_UNDER_MAX:
            return "under"
        if q <= FOUR_CLASS_OVER_MIN:
            return "correct"
        return "over"
    if scheme.kind == "quantity_labels":
        # Nearest listed quantity; ties resolved toward the lower label.
        best = min(scheme.quantities, key=lambda c: (abs(q - c), c))
        return format_quantity_label(best)
    raise ValidationError(f"unknown class scheme kind {scheme.kind!r}")


# ---------------------------------------------------------------------------
# Quantity -> physical tack-coat layer
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TackCoatRule:
    """Residual-film rule converting applied quantity to a dielectric layer.

    A residual emulsion film of 1 g/m^2 is about 1 um thick, and the film
    permittivity grows linearly with quantity on top of a bitumen-like base
    value. Both slopes are configuration, not physics constants.
    """

    film_per_unit: float = 1.0e-6  # m of film per g/m^2
    eps_base: float = 6.0
    eps_slope: float = 0.01  # permittivity per g/m^2
    conductivity: float = 0.01  # S/m

    def layer(self, q: float) -> Layer:
        thickness, eps = quantity_to_layer(q, self)
        return Layer("tack_coat", thickness, eps, self.conductivity)


def quantity_to_layer(
    q: float, rule: TackCoatRule = TackCoatRule()
) -> tuple[float, float]:
    """Thickness [m] and relative permittivity of the tack-coat film.

    Both outputs are monotone non-decreasing in q. q = 0 yields zero
    thickness (the film is omitted from the stack).
    """
    if q < 0.0:
        raise ValidationError(f"emulsion quantity must be >= 0, got {q}")
    if q == 0.0:
        return 0.0, rule.eps_base
    return q * rule.film_per_unit, rule.eps_base + rule.eps_slope * q


# ---------------------------------------------------------------------------
# Thickness field
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ThicknessFieldSpec:
    """Spatial tack-coat thickness reference.

    mode ``constant`` gives d_min everywhere. mode ``bivariate_normal_surface``
    is a deterministic Gaussian-density-shaped bell:

        d(p) = d_min + (d_max - d_min) * exp(-0.5 (p-mu)^T Sigma^-1 (p-mu))

    The seed does not influence either mode; it is carried so that a field
    spec fully identifies the ground truth it generates.
    """

    mode: str = "constant"
    mean_position: tuple[float, float] = (0.0, 0.0)
    covariance: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0))
    d_min: float = 0.0
    d_max: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("constant", "bivariate_normal_surface"):
            raise ValidationError(f"unknown thickness field mode {self.mode!r}")
        if self.d_min > self.d_max:
            raise ValidationError("thickness field requires d_min <= d_max")
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (2, 2):
            raise ValidationError("covariance must be 2x2")
        if not np.allclose(cov, cov.T):
            raise ValidationError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0.0:
            raise ValidationError("covariance must be positive definite")

    def thickness_at(self, x, y):
        """Thickness [m] at arbitrary positions (vectorized)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.mode == "constant":
            return np.broadcast_to(np.float64(self.d_min), np.broadcast(x, y).shape).copy()
        cov = np.asarray(self.covariance, dtype=float)
        inv = np.linalg.inv(cov)
        dx = x - self.mean_position[0]
        dy = y - self.mean_position[1]
        quad = inv[0, 0] * dx * dx + (inv[0, 1] + inv[1, 0]) * dx * dy + inv[1, 1] * dy * dy
        return self.d_min + (self.d_max - self.d_min) * np.exp(-0.5 * quad)


def grid_shape(length: float, width: float, step: float) -> tuple[int, int]:
    """Survey grid dimensions: floor(extent/step) + 1 nodes per axis."""
    if step <= 0.0:
        raise ValidationError("grid step must be > 0")
    return int(math.floor(length / step)) + 1, int(math.floor(width / step)) + 1


def sample_thickness_map(spec: ThicknessFieldSpec, shape: tuple[int, int], step: float) -> np.ndarray:
    """Thickness grid [m] of the given shape sampled at node positions."""
    nx, ny = shape
    x = np.arange(nx, dtype=float)[:, None] * step
    y = np.arange(ny, dtype=float)[None, :] * step
    return spec.thickness_at(x, y)


# ---------------------------------------------------------------------------
# Scene specification and construction
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Section:
    """A longitudinal stretch with uniform tack-coat quantity.

    wearing_thickness optionally overrides the wearing-course thickness of
    the base stack within the section (BBM vs BBSG geometry changes).
    """

    name: str
    length: float
    quantity: float
    wearing_thickness: Optional[float] = None


def default_base_stack(wearing_thickness: float = 0.05, binder_thickness: float = 0.07) -> tuple[Layer, ...]:
    """Typical HMA stack: wearing course / binder course / subgrade half-space."""
    return (
        Layer("wearing_course", wearing_thickness, 5.0, 0.005),
        Layer("binder_course", binder_thickness, 7.0, 0.01),
        Layer("subgrade", 0.0, 9.0, 0.02, half_space=True),
    )


@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to build a PavementScene."""

    length: float
    width: float
    step: float = 0.25
    base_stack: tuple[Layer, ...] = field(default_factory=default_base_stack)
    scheme: ClassScheme = FOUR_CLASS_SCHEME
    tack_rule: TackCoatRule = TackCoatRule()
    # Exactly one quantity source: sections, or a thickness surface.
    sections: tuple[Section, ...] = ()
    thickness_field: Optional[ThicknessFieldSpec] = None
    # Thickness below quantity_floor * film_per_unit collapses to no film:
    # sub-monolayer residue does not form a continuous coat.
    quantity_floor: float = 0.0

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValidationError("scene step must be > 0")
        if self.length <= 0.0 or self.width <= 0.0:
            raise ValidationError("scene extents must be > 0")
        if not self.base_stack:
            raise ValidationError("base stack must not be empty")
        if not self.base_stack[-1].half_space:
            raise ValidationError("last base-stack layer must be a half-space")
        has_sections = len(self.sections) > 0
        has_field = self.thickness_field is not None
        if has_sections == has_field:
            raise ValidationError(
                "scene needs exactly one of: a section list, a thickness field"
            )
        if has_sections:
            total = sum(s.length for s in self.sections)
            if not math.isclose(total, self.length, rel_tol=0.0, abs_tol=1e-9):
                raise ValidationError(
                    f"section lengths sum to {total} m, scene length is {self.length} m"
                )


class PavementScene:
    """Built scene: quantity/class grids plus exact-position evaluation.

    Grids sample the underlying quantity field at the survey nodes
    (i*step, j*step). ``quantity_at`` evaluates the same field at arbitrary
    positions so simulated traces off the node lattice stay consistent with
    their labels. Instances are immutable after construction.
    """

    def __init__(self, spec: SceneSpec):
        self.spec = spec
        self.shape = grid_shape(spec.length, spec.width, spec.step)
        nx, ny = self.shape
        x = np.arange(nx, dtype=float)[:, None] * spec.step
        y = np.arange(ny, dtype=float)[None, :] * spec.step
        self.tack_coat_quantity = self.quantity_at(x, y)
        self.ground_truth_class = spec.scheme.classify_array(self.tack_coat_quantity)
        self.tack_coat_quantity.setflags(write=False)
        self.ground_truth_class.setflags(write=False)

    # -- geometry ----------------------------------------------------------
    @property
    def length(self) -> float:
        return self.spec.length

    @property
    def width(self) -> float:
        return self.spec.width

    @property
    def step(self) -> float:
        return self.spec.step

    @property
    def scheme(self) -> ClassScheme:
        return self.spec.scheme

    def section_boundaries(self) -> list[float]:
        """Interior x positions where adjacent sections meet."""
        edges = []
        pos = 0.0
        for s in self.spec.sections[:-1]:
            pos += s.length
            edges.append(pos)
        return edges

    def node_positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (x, y) coordinates of every grid node, row-major in x."""
        nx, ny = self.shape
        x = np.repeat(np.arange(nx) * self.step, ny)
        y = np.tile(np.arange(ny) * self.step, nx)
        return x, y

    # -- quantity field ----------------------------------------------------
    def quantity_at(self, x, y) -> np.ndarray:
        """Emulsion quantity [g/m^2] at arbitrary scene positions."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        spec = self.spec
        if spec.thickness_field is not None:
            d = spec.thickness_field.thickness_at(x, y)
            q = d / spec.tack_rule.film_per_unit
            q = np.where(q < spec.quantity_floor, 0.0, q)
            return q + np.zeros(np.broadcast(x, y).shape)
        edges = np.cumsum([s.length for s in spec.sections])
        idx = np.minimum(np.searchsorted(edges, x, side="right"), len(spec.sections) - 1)
        quantities = np.asarray([s.quantity for s in spec.sections])
        return quantities[idx] + np.zeros(np.broadcast(x, y).shape)

    def section_at(self, x: float) -> Optional[Section]:
        spec = self.spec
        if not spec.sections:
            return None
        edges = np.cumsum([s.length for s in spec.sections])
        idx = min(int(np.searchsorted(edges, x, side="right")), len(spec.sections) - 1)
        return spec.sections[idx]

    def stack_at(self, x, y=0.0) -> tuple[Layer, ...]:
        """Local layer stack (without incidence medium) at one position.

        Inserts the tack-coat film between the wearing and binder courses
        when the local quantity is non-zero, and applies any per-section
        wearing-course thickness override.
        """
        q = float(self.quantity_at(x, y))
        stack = list(self.spec.base_stack)
        section = self.section_at(float(x))
        if section is not None and section.wearing_thickness is not None:
            stack[0] = replace(stack[0], thickness=section.wearing_thickness)
        if q > 0.0:
            stack.insert(1, self.spec.tack_rule.layer(q))
        return tuple(stack)


def build_scene(config: Union[SceneSpec, str]) -> PavementScene:
    """Build a scene from a spec or a preset name.

    Raises
    ------
    ValidationError
        Unknown preset name, empty section list, non-positive step.
    """
    if isinstance(config, str):
        return PavementScene(scene_preset(config))
    return PavementScene(config)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------
def _preset_base_stack(wearing_thickness: float = 0.05) -> tuple[Layer, ...]:
    """Study-preset stack: binder course below the base permittivity of the
    tack film, so the film contrast grows monotonically from q = 0 instead
    of self-cancelling where film and binder permittivities cross."""
    return (
        Layer("wearing_course", wearing_thickness, 5.0, 0.005),
        Layer("binder_course", 0.07, 6.0, 0.01),
        Layer("subgrade", 0.0, 9.0, 0.02, half_space=True),
    )


def _carousel_spec() -> SceneSpec:
    """Accelerated-loading carousel layout: 60 m x 3.5 m, five sections.

    S1a/S1b carry a thin (BBM) wearing course, S2a/S2b/S2c a thicker (BBSG)
    one; tack coat alternates 300 / 0 / 0 / 300 / 300 g/m^2 so presence
    flips at 12 m and 34 m while geometry changes at 23 m.
    """
    sections = (
        Section("S1a", 12.0, 300.0, wearing_thickness=0.04),
        Section("S1b", 11.0, 0.0, wearing_thickness=0.04),
        Section("S2a", 11.0, 0.0, wearing_thickness=0.06),
        Section("S2b", 13.0, 300.0, wearing_thickness=0.06),
        Section("S2c", 13.0, 300.0, wearing_thickness=0.06),
    )
    return SceneSpec(
        length=60.0,
        width=3.5,
        step=0.25,
        base_stack=_preset_base_stack(),
        sections=sections,
        scheme=BINARY_SCHEME,
    )


def _vendee_spec() -> SceneSpec:
    """Vendee road layout: 120 m, 450/250/300 g/m^2 over 40 m each, BBSG 5 cm."""
    sections = (
        Section("Z450", 40.0, 450.0),
        Section("Z250", 40.0, 250.0),
        Section("Z300", 40.0, 300.0),
    )
    return SceneSpec(
        length=120.0,
        width=5.0,
        step=0.25,
        base_stack=_preset_base_stack(wearing_thickness=0.05),
        sections=sections,
        scheme=quantity_label_scheme((450.0, 250.0, 300.0)),
    )


def _numerical_study_spec() -> SceneSpec:
    """Synthetic parametric study: 50 m x 5 m, Gaussian-bell tack thickness.

    The bell peaks at 750 um (750 g/m^2, over-proportioned) in the scene
    center and decays below the 150 g/m^2 film floor near the edges, so the
    four proportioning classes all occur with usable node counts.
    """
    fieldspec = ThicknessFieldSpec(
        mode="bivariate_normal_surface",
        mean_position=(25.0, 2.5),
        covariance=((90.0, 0.0), (0.0, 3.0)),
        d_min=0.0,
        d_max=750.0e-6,
        seed=0,
    )
    return SceneSpec(
        length=50.0,
        width=5.0,
        step=0.25,
        base_stack=_preset_base_stack(),
        thickness_field=fieldspec,
        scheme=FOUR_CLASS_SCHEME,
        quantity_floor=150.0,
    )


SCENE_PRESETS = {
    "carousel": _carousel_spec,
    "vendee": _vendee_spec,
    "numerical-study": _numerical_study_spec,
}


def scene_preset(name: str) -> SceneSpec:
    try:
        factory = SCENE_PRESETS[name]
    except KeyError:
        raise ValidationError(
            f"unknown scene preset {name!r}; available: {sorted(SCENE_PRESETS)}"
        ) from None
    return factory()
