"""Conformal factors with prescribed negative Gaussian curvature on closed triangle meshes."""

__version__ = "0.1.0"

from .curvature import NegativityViolation, TargetCurvature, constant_curvature, evaluate_on_mesh
from .diagnostics import green_apply, mean_value_split, omega_partition, snapshot
from .expression import parse_expression
from .functional import curvature_of, functional_gradient, functional_value, residual
from .geometry import BackgroundGeometry, build_geometry, dirichlet_gradient_density, laplacian_apply
from .mesh import TriangleMesh, euler_characteristic, generate_genus_g, genus, load_obj, refine, save_obj
from .solver import SolverConfig, SolveReport, descent_minimize, newton_solve

__all__ = [
    "BackgroundGeometry",
    "NegativityViolation",
    "SolveReport",
    "SolverConfig",
    "TargetCurvature",
    "TriangleMesh",
    "build_geometry",
    "constant_curvature",
    "curvature_of",
    "descent_minimize",
    "dirichlet_gradient_density",
    "euler_characteristic",
    "evaluate_on_mesh",
    "functional_gradient",
    "functional_value",
    "generate_genus_g",
    "genus",
    "green_apply",
    "laplacian_apply",
    "load_obj",
    "mean_value_split",
    "newton_solve",
    "omega_partition",
    "parse_expression",
    "refine",
    "residual",
    "save_obj",
    "snapshot",
]
