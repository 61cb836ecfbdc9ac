"""Bounds on continuous spontaneous localization from cantilever force noise."""

from ._kernels import BACKEND
from .constants import CONSTANTS, PHI0, PhysicalConstants
from .mass_model import CompositeMass, Cuboid, MultilayerStack, Sphere, load_geometry, reference_geometry
from .quadrature import QuadConfig, QuadratureError
from .csl_noise import CslParams, csl_psd_multilayer, csl_psd_quadrature, csl_psd_scan

__version__ = "0.1.0"
