"""Rigid mass distributions and their spatial Fourier transforms.

All quantities are SI.  The transform convention is
``rho~(q) = integral rho(r) exp(-i q.r) d^3r`` so that ``rho~(0)`` is the
mass and a translation by ``a`` multiplies the transform by ``exp(-i q.a)``.

Box-like bodies (cuboids and multilayer stacks) are axis-aligned and
separable: their density is ``scale * p_x(x) p_y(y) p_z(z)`` with each
``p`` a sum of top-hat segments (:class:`AxisProfile`).  The CSL engine
uses this to factor the 3D integral into 1D ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from ._kernels import profile_transform


class GeometryError(ValueError):
    """Invalid geometry definition."""


def _vec3(v, name="vector"):
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise GeometryError(f"{name} must be a finite 3-vector, got {v!r}")
    return tuple(float(x) for x in a)


def _unit(v, name):
    a = np.asarray(_vec3(v, name))
    if abs(np.linalg.norm(a) - 1.0) > 1e-9:
        raise GeometryError(f"{name} must have unit norm, got {v!r}")
    return tuple(float(x) for x in a)


def axis_index(axis) -> int:
    """Index (0, 1, 2) of a coordinate-aligned unit vector; sign ignored."""
    a = np.abs(np.asarray(axis, dtype=float))
    k = int(np.argmax(a))
    if abs(a[k] - 1.0) > 1e-12 or np.sum(a) - a[k] > 1e-12:
        raise GeometryError(f"axis {axis!r} is not aligned with a coordinate axis")
    return k


@dataclass(frozen=True)
class AxisProfile:
    """1D density profile ``sum_s w_s * 1[|x - c_s| <= h_s]``."""

    centers: tuple
    halfwidths: tuple
    weights: tuple

    def transform(self, q, times_q=False):
        re, im = profile_transform(np.ravel(q), self.centers, self.halfwidths, self.weights, times_q)
        return (re + 1j * im).reshape(np.shape(q))

    def edges(self):
        """Sorted segment end points."""
        c = np.asarray(self.centers)
        h = np.asarray(self.halfwidths)
        return np.unique(np.concatenate([c - h, c + h]))


@dataclass(frozen=True)
class Cuboid:
    density: float
    lengths: tuple
    center: tuple = (0.0, 0.0, 0.0)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lengths", _vec3(self.lengths, "lengths"))
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        if not self.density > 0:
            raise GeometryError("cuboid density must be positive")
        if min(self.lengths) <= 0:
            raise GeometryError("cuboid side lengths must be positive")

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    @property
    def mass(self):
        return self.density * self.volume

    def profiles(self):
        return self.density, tuple(
            AxisProfile((c,), (0.5 * L,), (1.0,)) for c, L in zip(self.center, self.lengths)
        )

    def bounds(self):
        c = np.asarray(self.center)
        h = 0.5 * np.asarray(self.lengths)
        return c - h, c + h


@dataclass(frozen=True)
class Sphere:
    density: float
    radius: float
    center: tuple = (0.0, 0.0, 0.0)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        if not self.density > 0:
            raise GeometryError("sphere density must be positive")
        if not self.radius > 0:
            raise GeometryError("sphere radius must be positive")

    @property
    def volume(self):
        return 4.0 / 3.0 * np.pi * self.radius ** 3

    @property
    def mass(self):
        return self.density * self.volume

    def radial_transform(self, qnorm):
        """Transform without the translation phase, as a function of ``|q|``."""
        x = np.asarray(qnorm, dtype=float) * self.radius
        small = np.abs(x) < 1e-2
        xs = np.where(small, 1.0, x)
        x2 = x * x
        series = 1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 ** 3 / 45360.0
        direct = (np.sin(xs) - xs * np.cos(xs)) / xs ** 3
        return 4.0 * np.pi * self.density * self.radius ** 3 * np.where(small, series, direct)

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class MultilayerStack:
    """``2 n_lay + 1`` contiguous layers of thickness ``d`` along ``axis``.

    Odd layers (both ends) have density ``rho1``, even layers ``rho2``.  The
    base is ``L1`` along the next coordinate axis after ``axis`` (cyclically)
    and ``L2`` along the one after that.  ``center`` is the geometric midpoint.
    """

    rho1: float
    rho2: float
    n_lay: int
    d: float
    L1: float
    L2: float
    center: tuple = (0.0, 0.0, 0.0)
    axis: tuple = (1.0, 0.0, 0.0)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "axis", _unit(self.axis, "stacking axis"))
        axis_index(self.axis)
        if not (self.rho1 > self.rho2 > 0):
            raise GeometryError("multilayer needs rho1 > rho2 > 0")
        if int(self.n_lay) != self.n_lay or self.n_lay < 0:
            raise GeometryError("n_lay must be a non-negative integer")
        object.__setattr__(self, "n_lay", int(self.n_lay))
        if not (self.d > 0 and self.L1 > 0 and self.L2 > 0):
            raise GeometryError("layer thickness and base lengths must be positive")

    @property
    def n_layers(self):
        return 2 * self.n_lay + 1

    @property
    def thickness(self):
        return self.n_layers * self.d

    @property
    def stacking_index(self):
        return axis_index(self.axis)

    def layer_densities(self):
        j = np.arange(self.n_layers)
        return np.where(j % 2 == 0, self.rho1, self.rho2)

    def layer_offsets(self):
        """Layer centers relative to the stack midpoint, along the stacking axis."""
        return (np.arange(self.n_layers) - self.n_lay) * self.d

    @property
    def mass(self):
        return float(np.sum(self.layer_densities())) * self.d * self.L1 * self.L2

    def lengths(self):
        k = self.stacking_index
        out = [0.0, 0.0, 0.0]
        out[k] = self.thickness
        out[(k + 1) % 3] = self.L1
        out[(k + 2) % 3] = self.L2
        return tuple(out)

    def profiles(self):
        k = self.stacking_index
        lengths = self.lengths()
        profs = []
        for a in range(3):
            if a == k:
                profs.append(AxisProfile(
                    tuple(self.center[a] + self.layer_offsets()),
                    (0.5 * self.d,) * self.n_layers,
                    tuple(self.layer_densities()),
                ))
            else:
                profs.append(AxisProfile((self.center[a],), (0.5 * lengths[a],), (1.0,)))
        return 1.0, tuple(profs)

    def bounds(self):
        c = np.asarray(self.center)
        h = 0.5 * np.asarray(self.lengths())
        return c - h, c + h

    def homogenized(self):
        """Single cuboid with the stack's outline and mean density."""
        rho = ((self.n_lay + 1) * self.rho1 + self.n_lay * self.rho2) / self.n_layers
        return Cuboid(rho, self.lengths(), self.center, self.label)


Component = Union[Cuboid, Sphere, MultilayerStack]
BoxLike = (Cuboid, MultilayerStack)


@dataclass(frozen=True)
class CompositeMass:
    components: tuple
    motion_axis: tuple = (1.0, 0.0, 0.0)
    name: str = ""
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise GeometryError("a composite mass needs at least one component")
        for c in comps:
            if not isinstance(c, (Cuboid, Sphere, MultilayerStack)):
                raise GeometryError(f"unsupported component {c!r}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "motion_axis", _unit(self.motion_axis, "motion axis"))

    @property
    def mass(self):
        return sum(c.mass for c in self.components)

    def select(self, labels):
        """Sub-composite with the components whose label is in ``labels``."""
        comps = tuple(c for c in self.components if c.label in set(labels))
        return CompositeMass(comps, self.motion_axis, self.name)


def _q_array(q):
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 3:
        raise ValueError("wavevectors must have a trailing dimension of 3")
    if not np.all(np.isfinite(q)):
        raise ValueError("wavevector must be finite")
    return q


def fourier_transform(component, q):
    """Density transform of one component at wavevector(s) ``q`` (1/m).

    ``q`` has shape ``(..., 3)``; the result has shape ``q.shape[:-1]`` and
    includes the translation phase ``exp(-i q.center)``.
    """
    q = _q_array(q)
    if isinstance(component, Sphere):
        qn = np.linalg.norm(q, axis=-1)
        phase = np.exp(-1j * (q @ np.asarray(component.center)))
        return component.radial_transform(qn) * phase
    scale, profs = component.profiles()
    out = np.full(q.shape[:-1], scale, dtype=complex)
    for a, p in enumerate(profs):
        out = out * p.transform(q[..., a])
    return out


def composite_transform(mass: CompositeMass, q):
    """Coherent sum of the component transforms."""
    q = _q_array(q)
    total = np.zeros(q.shape[:-1], dtype=complex)
    for c in mass.components:
        total = total + fourier_transform(c, q)
    return total


# --- geometry files -------------------------------------------------------

def _component_from_dict(d):
    kind = d.get("type")
    label = str(d.get("label", ""))
    try:
        if kind == "cuboid":
            return Cuboid(float(d["density"]), d["lengths"], d.get("center", (0, 0, 0)), label)
        if kind == "sphere":
            return Sphere(float(d["density"]), float(d["radius"]), d.get("center", (0, 0, 0)), label)
        if kind == "multilayer":
            return MultilayerStack(
                float(d["rho1"]), float(d["rho2"]), d["n_lay"], float(d["d"]),
                float(d["L1"]), float(d["L2"]), d.get("center", (0, 0, 0)),
                d.get("axis", (1, 0, 0)), label,
            )
    except (KeyError, TypeError) as exc:
        raise GeometryError(f"component {label or kind!r}: missing or bad field {exc}") from exc
    raise GeometryError(f"unknown component type {kind!r}")


def geometry_from_dict(d) -> CompositeMass:
    if not isinstance(d, dict) or "components" not in d:
        raise GeometryError("geometry must be an object with a 'components' list")
    comps = [_component_from_dict(c) for c in d["components"]]
    return CompositeMass(tuple(comps), d.get("motion_axis", (1, 0, 0)), str(d.get("name", "")),
                         str(d.get("notes", "")))


def _component_to_dict(c):
    if isinstance(c, Cuboid):
        return {"type": "cuboid", "label": c.label, "density": c.density,
                "lengths": list(c.lengths), "center": list(c.center)}
    if isinstance(c, Sphere):
        return {"type": "sphere", "label": c.label, "density": c.density,
                "radius": c.radius, "center": list(c.center)}
    return {"type": "multilayer", "label": c.label, "rho1": c.rho1, "rho2": c.rho2,
            "n_lay": c.n_lay, "d": c.d, "L1": c.L1, "L2": c.L2,
            "center": list(c.center), "axis": list(c.axis)}


def geometry_to_dict(mass: CompositeMass):
    return {"name": mass.name, "notes": mass.notes, "motion_axis": list(mass.motion_axis),
            "components": [_component_to_dict(c) for c in mass.components]}


def load_geometry(path) -> CompositeMass:
    """Read a geometry JSON file (schema in README)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise GeometryError(f"cannot read geometry {path}: {exc}") from exc
    return geometry_from_dict(data)


def reference_geometry_path() -> Path:
    return Path(__file__).parent / "data" / "reference_geometry.json"


def reference_geometry() -> CompositeMass:
    """The cantilever + multilayer + microsphere resonator (approximate offsets)."""
    return load_geometry(reference_geometry_path())
