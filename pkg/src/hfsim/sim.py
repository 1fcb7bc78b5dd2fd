"""Scene configuration and the simulation loop.

Step order: CFL time step, velocity extrapolation into air, window advance,
semi-Lagrangian advection of level set and velocity onto the post-step
lattices, reinitialization, mesh rebuild, gravity, pressure solve, projection,
window-velocity update.  Steps are pure functions of the previous state, so
runs are deterministic.
"""

from __future__ import annotations

import configparser
import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .elements import rebuild_hybrid
from .grid import (GridDesc, ScalarField, StaggeredVelocityField,
                   write_field_dump)
from .levelset import (LevelSet, cfl_time_step, reinitialize, sdf_box,
                       sdf_halfspace, sdf_sphere, sdf_union)
from .pressure import MODES, SPD_PROJECTED, SolveInfo, project_velocity, solve_pressure
from .regions import (HybridLayout, MovingRegion, label_cells,
                      update_region_position, update_region_velocity)
from .transport import advect_scalar_cells, advect_velocity, extrapolate_velocity


class ConfigError(ValueError):
    pass


_ALLOWED_KEYS = {
    "grid": {"shape", "dx", "origin"},
    "time": {"cfl", "dt_min", "dt_max", "steps"},
    "physics": {"gravity", "surface_mode", "solver_tol"},
    "liquid": None,      # pool / sphere* / box* keys, checked separately
    "velocity": {"uniform"},
    "output": {"directory", "frame_interval", "fields"},
}
_REGION_KEYS = {"lo", "hi", "axes", "offset", "velocity"}
_OUTPUT_FIELDS = ("phi", "pressure", "velocity")


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(t) for t in s.split())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(t) for t in s.split())


@dataclass
class SceneConfig:
    shape: tuple[int, ...]
    dx: float
    origin: tuple[float, ...]
    cfl: float = 1.0
    dt_min: float = 1e-8
    dt_max: float = 1e-2
    steps: int = 100
    gravity: tuple[float, ...] = None
    surface_mode: str = SPD_PROJECTED
    solver_tol: float = 1e-4
    liquid: list = field(default_factory=list)   # (kind, params) tuples
    uniform_velocity: tuple[float, ...] = None
    regions: list = field(default_factory=list)  # MovingRegion specs
    directory: str = "out"
    frame_interval: int = 10
    fields: tuple[str, ...] = ("phi", "pressure", "velocity")

    @property
    def dim(self) -> int:
        return len(self.shape)

    def __post_init__(self):
        dim = self.dim
        if self.gravity is None:
            self.gravity = (0.0,) * dim
        if self.uniform_velocity is None:
            self.uniform_velocity = (0.0,) * dim
        for name, v in (("origin", self.origin), ("gravity", self.gravity),
                        ("uniform_velocity", self.uniform_velocity)):
            if len(v) != dim:
                raise ConfigError(f"{name} needs {dim} components, got {len(v)}")
        if self.surface_mode not in MODES:
            raise ConfigError(f"surface_mode must be one of {MODES}")
        if not self.liquid:
            raise ConfigError("at least one liquid primitive is required")
        for f_ in self.fields:
            if f_ not in _OUTPUT_FIELDS:
                raise ConfigError(f"unknown output field {f_!r}")

    def grid_desc(self) -> GridDesc:
        return GridDesc(self.dim, self.shape, self.dx, self.origin)

    def level_set_fn(self):
        fns = []
        for kind, params in self.liquid:
            if kind == "pool":
                up = np.zeros(self.dim)
                up[-1] = 1.0
                point = np.asarray(self.origin, dtype=float)
                point[-1] = params[0]
                fns.append(sdf_halfspace(point, up))
            elif kind == "sphere":
                fns.append(sdf_sphere(params[:-1], params[-1]))
            elif kind == "box":
                fns.append(sdf_box(params[:self.dim], params[self.dim:]))
            else:
                raise ConfigError(f"unknown liquid primitive {kind!r}")
        return sdf_union(*fns)

    def build_regions(self) -> list[MovingRegion]:
        out = []
        for spec in self.regions:
            out.append(MovingRegion(
                lo=spec["lo"], hi=spec["hi"],
                axis_mask=tuple(bool(a) for a in spec.get("axes", (1,) * self.dim)),
                offset=spec.get("offset"), u_g=spec.get("velocity")))
        return out


def parse_config(path_or_text: str) -> SceneConfig:
    """Read a scene description; unknown sections or keys are rejected."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if os.path.exists(path_or_text):
        cp.read(path_or_text)
    else:
        cp.read_string(path_or_text)
    kwargs = {}
    regions = []
    for sec in cp.sections():
        if sec.startswith("region"):
            bad = set(cp[sec]) - _REGION_KEYS
            if bad:
                raise ConfigError(f"unknown keys {sorted(bad)} in [{sec}]")
            spec = {"lo": _ints(cp[sec]["lo"]), "hi": _ints(cp[sec]["hi"])}
            if "axes" in cp[sec]:
                spec["axes"] = _ints(cp[sec]["axes"])
            if "offset" in cp[sec]:
                spec["offset"] = _floats(cp[sec]["offset"])
            if "velocity" in cp[sec]:
                spec["velocity"] = _floats(cp[sec]["velocity"])
            regions.append(spec)
            continue
        if sec not in _ALLOWED_KEYS:
            raise ConfigError(f"unknown section [{sec}]")
        allowed = _ALLOWED_KEYS[sec]
        if allowed is not None:
            bad = set(cp[sec]) - allowed
            if bad:
                raise ConfigError(f"unknown keys {sorted(bad)} in [{sec}]")
    g = cp["grid"]
    kwargs["shape"] = _ints(g["shape"])
    kwargs["dx"] = float(g["dx"])
    kwargs["origin"] = _floats(g.get("origin", " ".join(["0"] * len(kwargs["shape"]))))
    if "time" in cp:
        t = cp["time"]
        for k in ("cfl", "dt_min", "dt_max"):
            if k in t:
                kwargs[k] = float(t[k])
        if "steps" in t:
            kwargs["steps"] = int(t["steps"])
    if "physics" in cp:
        p = cp["physics"]
        if "gravity" in p:
            kwargs["gravity"] = _floats(p["gravity"])
        if "surface_mode" in p:
            kwargs["surface_mode"] = p["surface_mode"]
        if "solver_tol" in p:
            kwargs["solver_tol"] = float(p["solver_tol"])
    liquid = []
    if "liquid" in cp:
        for key, val in cp["liquid"].items():
            base = key.rstrip("0123456789")
            if base == "pool":
                liquid.append(("pool", (float(val),)))
            elif base in ("sphere", "box"):
                liquid.append((base, _floats(val)))
            else:
                raise ConfigError(f"unknown liquid primitive key {key!r}")
    kwargs["liquid"] = liquid
    if "velocity" in cp and "uniform" in cp["velocity"]:
        kwargs["uniform_velocity"] = _floats(cp["velocity"]["uniform"])
    if "output" in cp:
        o = cp["output"]
        if "directory" in o:
            kwargs["directory"] = o["directory"]
        if "frame_interval" in o:
            kwargs["frame_interval"] = int(o["frame_interval"])
        if "fields" in o:
            kwargs["fields"] = tuple(o["fields"].split())
    kwargs["regions"] = regions
    return SceneConfig(**kwargs)


@dataclass
class StepInfo:
    index: int
    t: float
    dt: float
    solve: SolveInfo
    pressure: ScalarField = None   # the step's solved pressure, for output

    def to_row(self) -> dict:
        row = {"step": self.index, "t": self.t, "dt": self.dt}
        row.update(self.solve.to_dict())
        return row


@dataclass
class SimState:
    cfg: SceneConfig
    ls: LevelSet
    u: StaggeredVelocityField
    layout: HybridLayout
    t: float = 0.0
    index: int = 0

    @property
    def desc(self) -> GridDesc:
        return self.ls.desc

    @property
    def regions(self) -> list[MovingRegion]:
        return self.layout.regions


def initial_state(cfg: SceneConfig) -> SimState:
    desc = cfg.grid_desc()
    regions = cfg.build_regions()
    sdf = cfg.level_set_fn()
    # sample the level set at the interpreted (offset) cell positions
    skel = label_cells(desc, regions)
    phi = ScalarField.zeros(desc)
    phi.values = np.ascontiguousarray(sdf(skel.cell_positions()))
    layout = rebuild_hybrid(desc, regions, phi)
    u = StaggeredVelocityField.zeros(desc)
    for a in range(desc.dim):
        u.comps[a] += cfg.uniform_velocity[a]
    return SimState(cfg, LevelSet(phi), u, layout)


def step(state: SimState) -> tuple[SimState, StepInfo]:
    cfg = state.cfg
    desc = state.desc
    dt = cfl_time_step(state.u, state.regions, cfg.cfl, cfg.dt_min, cfg.dt_max)

    u = extrapolate_velocity(state.u, state.ls.phi)
    layout_old = state.layout

    regions_new = [update_region_position(r, dt, desc) for r in state.regions]
    skel = label_cells(desc, regions_new)

    phi_new = advect_scalar_cells(state.ls.phi, u, layout_old, skel, dt)
    u_adv = advect_velocity(u, layout_old, skel, dt)
    ls_new = reinitialize(LevelSet(phi_new, state.ls.band_width))

    layout_new = rebuild_hybrid(desc, regions_new, ls_new.phi)

    u_star = u_adv.copy()
    for a in range(desc.dim):
        u_star.comps[a] += dt * cfg.gravity[a]
    q, info = solve_pressure(layout_new, ls_new.phi, u_star, cfg.surface_mode,
                             tol=cfg.solver_tol)
    u_final = project_velocity(u_star, q, layout_new, ls_new.phi, cfg.surface_mode)

    layout_new.regions = [update_region_velocity(r, u_final, ls_new.phi)
                          for r in layout_new.regions]
    new_state = replace(state, ls=ls_new, u=u_final, layout=layout_new,
                        t=state.t + dt, index=state.index + 1)
    return new_state, StepInfo(new_state.index, new_state.t, dt, info, q)


def _write_frame(state: SimState, out_dir: str, pressure: ScalarField = None) -> None:
    desc = state.desc
    tag = f"frame_{state.index:05d}"
    fields = state.cfg.fields
    if "phi" in fields:
        write_field_dump(os.path.join(out_dir, f"{tag}_phi.dump"),
                         desc, state.ls.phi.values, "cell")
    if "pressure" in fields and pressure is not None:
        write_field_dump(os.path.join(out_dir, f"{tag}_pressure.dump"),
                         desc, pressure.values, "cell")
    if "velocity" in fields:
        for a in range(desc.dim):
            write_field_dump(os.path.join(out_dir, f"{tag}_u{'xyz'[a]}.dump"),
                             desc, state.u.comps[a], f"face{'XYZ'[a]}")


def run(cfg: SceneConfig, steps: int = None, out_dir: str = None) -> SimState:
    """Run the scene, writing frame dumps and a per-step diagnostics CSV."""
    steps = cfg.steps if steps is None else steps
    out_dir = cfg.directory if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    state = initial_state(cfg)
    _write_frame(state, out_dir)
    rows = []
    for _ in range(steps):
        state, info = step(state)
        rows.append(info.to_row())
        if cfg.frame_interval > 0 and state.index % cfg.frame_interval == 0:
            _write_frame(state, out_dir, info.pressure)
    with open(os.path.join(out_dir, "diagnostics.csv"), "w", newline="") as fh:
        if rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return state
