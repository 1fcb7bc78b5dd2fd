"""Hybrid free-surface liquid simulator with locally moving grid windows.

The background is a staggered finite-volume grid; axis-aligned windows of
cells translate with the flow on a displaced lattice, stitched to the
background by a one-cell ring of deformable finite elements.
"""

from .grid import (GridDesc, ScalarField, StaggeredVelocityField,
                   read_field_dump, write_field_dump)
from .interp import (CellSampler, FaceSampler, mls_fit, sample_cell_value,
                     sample_face_value)
from .kernels import BACKEND
from .levelset import (LevelSet, cfl_time_step, liquid_fraction_faces,
                       reinitialize, sdf_box, sdf_halfspace, sdf_sphere,
                       sdf_union)
from .pressure import (FIRST_ORDER, FULL_SECOND_ORDER, MODES, SPD_PROJECTED,
                       PressureError, SolveInfo, divergence, project_velocity,
                       solve_pressure)
from .regions import (FEM_BAND, FVM_MOVING, FVM_STATIC, HybridLayout,
                      MovingRegion, RegionError, label_cells,
                      update_region_position, update_region_velocity)
from .elements import Element, build_seam_elements, rebuild_hybrid
from .transport import (advect_scalar_cells, advect_velocity,
                        extrapolate_velocity, semi_lagrangian)
from .sim import (SceneConfig, SimState, StepInfo, initial_state, parse_config,
                  run, step)

__version__ = "1.0.0"

__all__ = [
    "BACKEND", "GridDesc", "ScalarField", "StaggeredVelocityField",
    "read_field_dump", "write_field_dump",
    "CellSampler", "FaceSampler", "mls_fit", "sample_cell_value",
    "sample_face_value",
    "LevelSet", "cfl_time_step", "liquid_fraction_faces", "reinitialize",
    "sdf_box", "sdf_halfspace", "sdf_sphere", "sdf_union",
    "FIRST_ORDER", "FULL_SECOND_ORDER", "MODES", "SPD_PROJECTED",
    "PressureError", "SolveInfo", "divergence", "project_velocity",
    "solve_pressure",
    "FEM_BAND", "FVM_MOVING", "FVM_STATIC", "HybridLayout", "MovingRegion",
    "RegionError", "label_cells", "update_region_position",
    "update_region_velocity",
    "Element", "build_seam_elements", "rebuild_hybrid",
    "advect_scalar_cells", "advect_velocity", "extrapolate_velocity",
    "semi_lagrangian",
    "SceneConfig", "SimState", "StepInfo", "initial_state", "parse_config",
    "run", "step",
]
