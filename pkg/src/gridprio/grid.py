"""Domain types shared by every stage of the pipeline.

A :class:`GridCase` is a plain mutable container of buses, branches and
generators.  Scenario transforms copy a case and mutate the copy; solvers
only read it.  All powers are stored in MW/MVar, conversion to per-unit
happens inside the solvers (``base_mva`` is always 100 for RTS-style data).
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

CONVENTIONAL = "conventional"
SOLAR = "solar"
WIND = "wind"
HYDRO = "hydro"
CSP = "csp"
SYNC_COND = "sync_cond"
STORAGE = "storage"

GEN_TYPES = (CONVENTIONAL, SOLAR, WIND, HYDRO, CSP, SYNC_COND, STORAGE)
RENEWABLE_TYPES = (SOLAR, WIND, HYDRO, CSP)

SLACK, PV, PQ = "slack", "pv", "pq"
BUS_KINDS = (SLACK, PV, PQ)

METHOD_TAGS = ("USS", "MILP_UC", "MNG")


class GridError(ValueError):
    """Raised for structurally invalid cases or queries."""


@dataclass
class Bus:
    id: int
    area: int
    base_kv: float
    bus_kind: str = PQ
    voltage_setpoint: float = 1.0
    pd: float = 0.0
    qd: float = 0.0
    gs: float = 0.0
    bs: float = 0.0
    in_service: bool = True


@dataclass
class Generator:
    id: str
    bus_id: int
    gtype: str
    status: bool = True
    pg: float = 0.0
    qg: float = 0.0
    pgmin: float = 0.0
    pgmax: float = 0.0
    qgmin: float = 0.0
    qgmax: float = 0.0
    fuel_cost: float = 0.0
    op_cost_points: Tuple[Tuple[float, float], ...] = ()
    startup_cost: float = 0.0
    ramp_rate: float = 0.0
    heat_rate: Optional[float] = None
    vg: float = 1.0
    added: bool = False

    @property
    def is_renewable(self) -> bool:
        return self.gtype in RENEWABLE_TYPES

    @property
    def is_conventional(self) -> bool:
        return self.gtype == CONVENTIONAL


@dataclass
class Branch:
    id: str
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0
    rating: float = 0.0
    in_service: bool = True
    voltage_class: float = 0.0


@dataclass
class GridCase:
    buses: List[Bus]
    branches: List[Branch]
    generators: List[Generator]
    base_mva: float = 100.0
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self._reindex()

    def _reindex(self):
        self._bus_by_id = {b.id: b for b in self.buses}
        self._gen_by_id = {g.id: g for g in self.generators}

    @property
    def areas(self) -> List[int]:
        return sorted({b.area for b in self.buses})

    def bus(self, bus_id: int) -> Bus:
        try:
            return self._bus_by_id[bus_id]
        except KeyError:
            raise GridError(f"unknown bus {bus_id}") from None

    def gen(self, gen_id: str) -> Generator:
        try:
            return self._gen_by_id[gen_id]
        except KeyError:
            raise GridError(f"unknown generator {gen_id!r}") from None

    def has_bus(self, bus_id: int) -> bool:
        return bus_id in self._bus_by_id

    def gen_area(self, gen: Generator) -> int:
        return self.bus(gen.bus_id).area

    def remove_generators(self, ids: Iterable[str]) -> None:
        drop = set(ids)
        self.generators = [g for g in self.generators if g.id not in drop]
        self._reindex()

    def add_generator(self, gen: Generator) -> None:
        if gen.id in self._gen_by_id:
            raise GridError(f"duplicate generator id {gen.id!r}")
        self.generators.append(gen)
        self._gen_by_id[gen.id] = gen

    def copy(self) -> "GridCase":
        # per-element shallow copies; op_cost_points is an immutable tuple
        return GridCase(
            buses=[copy.copy(b) for b in self.buses],
            branches=[copy.copy(br) for br in self.branches],
            generators=[copy.copy(g) for g in self.generators],
            base_mva=self.base_mva,
            name=self.name,
            meta=dict(self.meta),
        )

    def active_generators(self) -> List[Generator]:
        """Enabled units sitting on in-service buses."""
        return [g for g in self.generators
                if g.status and self._bus_by_id[g.bus_id].in_service]

    def validate(self) -> None:
        if len(self._bus_by_id) != len(self.buses):
            raise GridError("duplicate bus ids")
        for g in self.generators:
            if g.bus_id not in self._bus_by_id:
                raise GridError(f"generator {g.id!r} references missing bus {g.bus_id}")
            if g.gtype not in GEN_TYPES:
                raise GridError(f"generator {g.id!r} has unknown type {g.gtype!r}")
            if g.pgmin > g.pgmax + 1e-9 or g.qgmin > g.qgmax + 1e-9:
                raise GridError(f"generator {g.id!r} has inverted limits")
        for br in self.branches:
            for end in (br.from_bus, br.to_bus):
                if end not in self._bus_by_id:
                    raise GridError(f"branch {br.id!r} references missing bus {end}")
            if br.x == 0:
                raise GridError(f"branch {br.id!r} has zero reactance")
        for b in self.buses:
            if b.base_kv <= 0:
                raise GridError(f"bus {b.id} has non-positive base kV")
            if b.bus_kind not in BUS_KINDS:
                raise GridError(f"bus {b.id} has unknown kind {b.bus_kind!r}")


@dataclass
class Schedule:
    period_index: int
    method_tag: str
    unit_status: Dict[str, bool] = field(default_factory=dict)
    setpoints: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    feasible: bool = False
    elapsed: float = 0.0
    step_reached: Optional[int] = None
    renewable_share: float = float("nan")
    notes: List[str] = field(default_factory=list)

    def enabled(self) -> List[str]:
        return [uid for uid, on in self.unit_status.items() if on]

    def is_enabled(self, unit_id: str) -> bool:
        return bool(self.unit_status.get(unit_id, False))


def total_area_demand(case: GridCase, area: int) -> Tuple[float, float]:
    """Sum of (pd, qd) over in-service buses of ``area``."""
    if area not in case.areas:
        raise GridError(f"unknown area {area}")
    pd = qd = 0.0
    for b in case.buses:
        if b.area == area and b.in_service:
            pd += b.pd
            qd += b.qd
    return pd, qd


def load_count(case: GridCase) -> int:
    return sum(1 for b in case.buses if b.pd != 0 or b.qd != 0)


def detect_islands(case: GridCase) -> List[set]:
    """Connected components of in-service buses over in-service branches.

    Components are ordered by their smallest bus id.
    """
    live = sorted(b.id for b in case.buses if b.in_service)
    parent = {i: i for i in live}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for br in case.branches:
        if not br.in_service:
            continue
        if br.from_bus in parent and br.to_bus in parent:
            ra, rb = find(br.from_bus), find(br.to_bus)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: Dict[int, set] = {}
    for i in live:
        groups.setdefault(find(i), set()).add(i)
    return [groups[k] for k in sorted(groups)]


def slack_candidate(case: GridCase, island: Iterable[int],
                    unit_ids: Optional[Iterable[str]] = None) -> Optional[Generator]:
    """Largest-pgmax enabled conventional unit in ``island`` (ties: lowest bus, then id).

    ``unit_ids`` restricts the search to a given pool; by default every
    enabled unit is considered.
    """
    members = set(island)
    pool = case.generators if unit_ids is None else [case.gen(u) for u in unit_ids]
    best = None
    for g in pool:
        if not g.is_conventional or g.bus_id not in members:
            continue
        if unit_ids is None and not g.status:
            continue
        key = (-g.pgmax, g.bus_id, g.id)
        if best is None or key < best[0]:
            best = (key, g)
    return None if best is None else best[1]


def assign_slack_buses(case: GridCase) -> Dict[int, Optional[str]]:
    """Reassign bus kinds in place: one slack per energized island.

    Returns a map island-index -> slack unit id (``None`` when the island
    has no enabled unit able to take the role).
    """
    islands = detect_islands(case)
    result = {}
    for b in case.buses:
        if b.bus_kind == SLACK:
            b.bus_kind = PV
    for k, island in enumerate(islands):
        g = slack_candidate(case, island)
        if g is None:
            # no conventional unit: fall back to any enabled unit with real capacity
            pool = [u for u in case.generators
                    if u.status and u.bus_id in island and u.pgmax > 0]
            if pool:
                g = min(pool, key=lambda u: (-u.pgmax, u.bus_id, u.id))
        if g is not None:
            case.bus(g.bus_id).bus_kind = SLACK
        result[k] = None if g is None else g.id
    return result
