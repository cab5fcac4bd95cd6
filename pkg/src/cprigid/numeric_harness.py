"""Check registry, tolerance policy and suite runner.

A suite is a named builder that turns run parameters into a list of
:class:`CheckSpec`.  Each spec carries its own tolerance constant and, for
Monte Carlo checks, a seed derived from the run seed and the check id, so a
check gives the same number whether it runs alone, in a pool, or in a
different order.  Results are always returned sorted by id.
"""

from __future__ import annotations

import importlib
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

from .finite_diff import MAX_STEP, MIN_STEP, Stencil

__all__ = [
    "FDConfig",
    "MCConfig",
    "RunParams",
    "CheckResult",
    "CheckSpec",
    "Outcome",
    "UnknownSuiteError",
    "register",
    "suite_ids",
    "suite_is_exact_only",
    "derive_seed",
    "run_suite",
    "run_suites",
]

KINDS = ("exact", "fd", "mc")
MC_SIGMAS = 3.0


@dataclass(frozen=True)
class FDConfig:
    step: float = 1e-4
    richardson: bool = True
    max_retries: int = 2

    def __post_init__(self):
        if not (MIN_STEP <= self.step <= MAX_STEP):
            raise ValueError(f"fd step {self.step} outside [{MIN_STEP}, {MAX_STEP}]")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def stencil(self, step: float | None = None) -> Stencil:
        return Stencil(self.step if step is None else step, self.richardson)


@dataclass(frozen=True)
class MCConfig:
    samples: int = 100_000
    seed: int = 7

    def __post_init__(self):
        if self.samples < 100:
            raise ValueError("at least 100 Monte Carlo samples are required")


@dataclass(frozen=True)
class RunParams:
    """``m`` is an integer ``>= 2`` or ``"sym"``; ``n2`` is the dimension of
    the second factor for the product suite."""

    m: int | str = 2
    n2: int = 3
    fd: FDConfig = field(default_factory=FDConfig)
    mc: MCConfig = field(default_factory=MCConfig)
    points: int = 10
    workers: int = 1

    def __post_init__(self):
        if self.m != "sym" and (isinstance(self.m, bool) or not isinstance(self.m, int) or self.m < 2):
            raise ValueError(f"m must be an integer >= 2 or 'sym', got {self.m!r}")
        if self.points < 1:
            raise ValueError("points must be >= 1")

    @property
    def symbolic(self) -> bool:
        return self.m == "sym"


@dataclass(frozen=True)
class CheckResult:
    id: str
    kind: str
    status: str
    observed: object  # exact: canonical string; fd: error magnitude; mc: |z|
    tolerance: float | None
    details: str = ""
    seed: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Outcome:
    """What a check function returns.  ``passed`` is required for exact
    checks; numeric checks are judged against the tolerance."""

    observed: object
    passed: bool | None = None
    details: str = ""


@dataclass(frozen=True)
class CheckSpec:
    id: str
    kind: str
    fn: Callable[..., Outcome]
    args: tuple = ()
    tolerance: float | None = None
    seed: int | None = None
    group: str | None = None  # checks sharing a cache run in one worker

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown check kind {self.kind!r}")
        if self.kind == "exact" and self.tolerance is not None:
            raise ValueError("exact checks carry no tolerance")
        if self.kind != "exact" and self.tolerance is None:
            raise ValueError(f"{self.kind} check {self.id} needs a tolerance")
        if self.kind == "mc" and self.seed is None:
            raise ValueError(f"mc check {self.id} needs a seed")


def derive_seed(seed: int, check_id: str) -> int:
    """Independent stream per check: the run seed mixed with the id."""
    return (seed * 0x9E3779B1 ^ zlib.crc32(check_id.encode())) & 0x7FFFFFFF


def _judge(spec: CheckSpec, out: Outcome) -> CheckResult:
    if spec.kind == "exact":
        if out.passed is None:
            raise ValueError(f"exact check {spec.id} did not report a verdict")
        ok = bool(out.passed)
        observed = out.observed
    else:
        observed = float(out.observed)
        ok = observed <= spec.tolerance if out.passed is None else bool(out.passed) and observed <= spec.tolerance
    return CheckResult(spec.id, spec.kind, "pass" if ok else "fail", observed, spec.tolerance, out.details, spec.seed)


def _execute(spec: CheckSpec) -> CheckResult:
    try:
        out = spec.fn(*spec.args)
    except Exception as exc:  # a crashing check is a failing check
        return CheckResult(spec.id, spec.kind, "fail", None, spec.tolerance, f"{type(exc).__name__}: {exc}", spec.seed)
    return _judge(spec, out)


def _execute_group(specs: list[CheckSpec]) -> list[CheckResult]:
    return [_execute(s) for s in specs]


# ---------------------------------------------------------------------------
# registry


class UnknownSuiteError(KeyError):
    pass


_SUITES: dict[str, tuple[Callable[[RunParams], list[CheckSpec]], bool]] = {}


def register(name: str, exact_only: bool = False):
    """Decorator registering ``builder(params) -> list[CheckSpec]``."""

    def deco(builder):
        if name in _SUITES:
            raise ValueError(f"suite {name} registered twice")
        _SUITES[name] = (builder, exact_only)
        return builder

    return deco


def _load():
    # importing the module registers the suites
    importlib.import_module(f"{__package__}.suites")


def suite_ids() -> list[str]:
    _load()
    return sorted(_SUITES)


def suite_is_exact_only(name: str) -> bool:
    _load()
    return _SUITES[name][1]


def _specs(name: str, params: RunParams) -> list[CheckSpec]:
    _load()
    if name not in _SUITES:
        raise UnknownSuiteError(f"unknown suite {name!r}; known: {', '.join(sorted(_SUITES))}")
    specs = _SUITES[name][0](params)
    if params.symbolic:
        specs = [s for s in specs if s.kind == "exact"]
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate check ids in suite {name}")
    return specs


def run_suite(name: str, params: RunParams) -> list[CheckResult]:
    """Run one suite; deterministic given ``params``."""
    specs = _specs(name, params)
    if params.workers > 1 and len(specs) > 1:
        groups: dict[str, list[CheckSpec]] = {}
        for s in specs:
            groups.setdefault(s.group or s.id, []).append(s)
        with ProcessPoolExecutor(params.workers) as pool:
            results = [r for rs in pool.map(_execute_group, groups.values()) for r in rs]
    else:
        results = [_execute(s) for s in specs]
    return sorted(results, key=lambda r: r.id)


def run_suites(names: list[str], params: RunParams) -> list[CheckResult]:
    out: list[CheckResult] = []
    for name in names:
        out.extend(run_suite(name, params))
    return sorted(out, key=lambda r: r.id)
