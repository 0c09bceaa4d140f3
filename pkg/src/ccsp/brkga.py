"""Biased random-key genetic algorithm.

The engine knows nothing about routing: a decoder maps a key vector in
[0, 1)^n to ``(fitness, payload)`` and the population is minimised.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

Decoder = Callable[[np.ndarray], Tuple[float, Any]]


@dataclass
class BrkgaParams:
    population_size: int = 1000
    elite_fraction: float = 0.40
    mutant_fraction: float = 0.20
    crossover_elite_probability: float = 0.70
    seed: int = 0
    max_generations: Optional[int] = 500
    max_seconds: Optional[float] = 60.0
    stagnation_generations: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if not 0 < self.elite_fraction < 1 or not 0 < self.mutant_fraction < 1:
            raise ValueError("elite and mutant fractions must lie in (0, 1)")
        if self.elite_fraction + self.mutant_fraction >= 1:
            raise ValueError("elite_fraction + mutant_fraction must be below 1")
        if self.n_elite < 1:
            raise ValueError("the elite set must hold at least one individual")
        if not 0.5 < self.crossover_elite_probability < 1:
            raise ValueError("crossover_elite_probability must lie in (0.5, 1)")

    @property
    def n_elite(self) -> int:
        return int(math.floor(self.elite_fraction * self.population_size))

    @property
    def n_mutants(self) -> int:
        return int(math.floor(self.mutant_fraction * self.population_size))

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


PARAM_KEYS = {
    "pop": ("population_size", int),
    "population_size": ("population_size", int),
    "elite": ("elite_fraction", float),
    "elite_fraction": ("elite_fraction", float),
    "mutants": ("mutant_fraction", float),
    "mutant_fraction": ("mutant_fraction", float),
    "rho": ("crossover_elite_probability", float),
    "crossover_elite_probability": ("crossover_elite_probability", float),
    "seed": ("seed", int),
    "max_gen": ("max_generations", int),
    "max_generations": ("max_generations", int),
    "max_sec": ("max_seconds", float),
    "max_seconds": ("max_seconds", float),
    "stagnation": ("stagnation_generations", int),
    "stagnation_generations": ("stagnation_generations", int),
    "workers": ("workers", int),
}


def parse_config(text: str) -> Dict[str, Any]:
    """``key = value`` lines ('#' comments) -> BrkgaParams keyword arguments."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in PARAM_KEYS:
            raise ValueError(f"config line {lineno}: cannot read {raw!r}")
        name, conv = PARAM_KEYS[key]
        out[name] = conv(value.strip())
    return out


@dataclass
class Population:
    keys: np.ndarray  # (size, n)
    fitness: np.ndarray  # (size,)
    payloads: List[Any]

    def __len__(self):
        return len(self.fitness)

    @property
    def best_fitness(self) -> float:
        return float(self.fitness[0])


def _sorted(keys, fitness, payloads) -> Population:
    # fitness first, then lexicographic keys, so the order is total
    order = np.lexsort(tuple(keys[:, j] for j in range(keys.shape[1] - 1, -1, -1)) + (fitness,))
    return Population(keys[order], fitness[order], [payloads[i] for i in order])


def _decode_all(keys: np.ndarray, decoder: Decoder, workers: int = 1):
    if workers > 1 and len(keys) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(decoder, list(keys), chunksize=max(1, len(keys) // (4 * workers))))
    else:
        results = [decoder(k) for k in keys]
    fitness = np.array([r[0] for r in results], dtype=float)
    return fitness, [r[1] for r in results]


def initialize(params: BrkgaParams, n: int, decoder: Decoder, rng: Optional[np.random.Generator] = None) -> Population:
    if n < 1:
        raise ValueError("empty problem: chromosomes need at least one key")
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    keys = rng.random((params.population_size, n))
    fitness, payloads = _decode_all(keys, decoder, params.workers)
    return _sorted(keys, fitness, payloads)


def crossover(elite: np.ndarray, other: np.ndarray, rho: float, rng) -> np.ndarray:
    """Each allele comes from the elite parent with probability rho."""
    take = rng.random(len(elite)) < rho
    return np.where(take, elite, other)


def evolve(population: Population, params: BrkgaParams, decoder: Decoder, rng: np.random.Generator) -> Population:
    size, n = population.keys.shape
    ne, nm = params.n_elite, params.n_mutants
    n_off = size - ne - nm
    mutants = rng.random((nm, n))
    children = np.empty((n_off, n))
    for i in range(n_off):
        a = int(rng.integers(ne))
        b = int(rng.integers(ne, size))
        children[i] = crossover(population.keys[a], population.keys[b], params.crossover_elite_probability, rng)
    fresh = np.vstack([mutants, children])
    fit, pay = _decode_all(fresh, decoder, params.workers)
    keys = np.vstack([population.keys[:ne], fresh])
    fitness = np.concatenate([population.fitness[:ne], fit])
    payloads = population.payloads[:ne] + pay
    return _sorted(keys, fitness, payloads)


# ---------------------------------------------------------------------------
# run loop with the elite route archive used by the matheuristic
# ---------------------------------------------------------------------------


class RouteArchive:
    """Distinct routes of elite solutions, each tagged with the last generation
    (and elite rank) in which it appeared."""

    def __init__(self):
        self._entries: Dict[Any, Tuple[int, int, int, Any]] = {}
        self._counter = 0

    def add_generation(self, generation: int, solutions: Sequence[Any]):
        for rank, sol in enumerate(solutions):
            for r in sol.routes:
                key = route_key(r)
                self._counter += 1
                self._entries[key] = (generation, -rank, self._counter, r)

    def newest_first(self) -> List[Any]:
        items = sorted(self._entries.values(), key=lambda e: (-e[0], -e[1], e[2]))
        return [e[3] for e in items]

    def __len__(self):
        return len(self._entries)


def route_key(route) -> Tuple:
    """Orientation-free identity of a route: canonical vertex sequence plus service map."""
    seq = tuple(route.nodes)
    rev = seq[::-1]
    return (min(seq, rev), tuple(sorted(route.serviced.items())))


@dataclass
class BrkgaResult:
    best: Any
    best_fitness: float
    history: List[float]
    generations: int
    elapsed: float
    archive: Optional[RouteArchive] = None
    population: Optional[Population] = field(default=None, repr=False)


def run(instance, params: BrkgaParams, decoder: Optional[Decoder] = None, keep_archive: bool = True) -> BrkgaResult:
    """Evolve until a stopping rule fires; the first one triggered wins.

    ``instance`` is a CcspInstance; when ``decoder`` is omitted the CCSP
    decoder is used.  ``history[g]`` is the best fitness after generation g
    (g = 0 is the initial population).
    """
    if decoder is None:
        from .decoder import CcspDecoder

        decoder = CcspDecoder(instance)
    n = len(instance.demand_vertices)
    start = time.perf_counter()
    rng = np.random.default_rng(params.seed)
    pop = initialize(params, n, decoder, rng)
    archive = RouteArchive() if keep_archive else None
    if archive is not None:
        archive.add_generation(0, pop.payloads[: params.n_elite])
    history = [pop.best_fitness]
    gen = 0
    stale = 0
    while True:
        if params.max_generations is not None and gen >= params.max_generations:
            break
        if params.max_seconds is not None and time.perf_counter() - start >= params.max_seconds:
            break
        if params.stagnation_generations is not None and stale >= params.stagnation_generations:
            break
        pop = evolve(pop, params, decoder, rng)
        gen += 1
        if archive is not None:
            archive.add_generation(gen, pop.payloads[: params.n_elite])
        stale = stale + 1 if pop.best_fitness >= history[-1] - 1e-9 else 0
        history.append(pop.best_fitness)
    return BrkgaResult(pop.payloads[0], pop.best_fitness, history, gen, time.perf_counter() - start, archive, pop)
