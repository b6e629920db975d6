"""Clan-structured elephant-herd optimizer over mixed search spaces.

Candidates live in a normalized [0,1] hypercube and are decoded per
dimension (continuous ranges linearly, discrete lists by index).  Each
generation every member drifts toward its clan's fittest member, the
fittest member itself moves to a scaled clan center, and the lowest
scoring members are re-seeded across the full decoded range.  The global
best is kept verbatim (elitism), so best-so-far fitness never decreases.
Fitness is maximized; negate to minimize.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_rng
from .exceptions import OptimizerError


@dataclass(frozen=True)
class Continuous:
    """A real-valued dimension on [minimum, maximum]."""

    minimum: float
    maximum: float

    def __post_init__(self):
        if not (
            np.isfinite(self.minimum)
            and np.isfinite(self.maximum)
            and self.minimum < self.maximum
        ):
            raise ValueError(
                f"continuous dimension needs finite minimum < maximum, got "
                f"[{self.minimum!r}, {self.maximum!r}]"
            )

    def decode(self, u):
        return float(self.minimum + u * (self.maximum - self.minimum))

    def reseed(self, gamma):
        """Re-seed across the decoded range; the +1 overshoot is clamped."""
        raw = self.minimum + (self.maximum - self.minimum + 1.0) * gamma
        value = min(max(raw, self.minimum), self.maximum)
        return (value - self.minimum) / (self.maximum - self.minimum)


@dataclass(frozen=True)
class Discrete:
    """An ordered list of allowed values, selected by index."""

    values: tuple

    def __post_init__(self):
        values = tuple(self.values)
        if not values:
            raise ValueError("discrete dimension needs at least one value")
        if len(set(values)) != len(values):
            raise ValueError(f"discrete values must be duplicate-free, got {values!r}")
        object.__setattr__(self, "values", values)

    def decode(self, u):
        index = min(int(math.floor(u * len(self.values))), len(self.values) - 1)
        return self.values[index]

    def reseed(self, gamma):
        """Re-seed in index space [0, len-1]; +1 overshoot clamps to the end."""
        raw = (len(self.values) - 1 + 1.0) * gamma
        index = min(max(int(math.floor(raw)), 0), len(self.values) - 1)
        return (index + 0.5) / len(self.values)


@dataclass(frozen=True)
class SearchSpace:
    """Ordered dimensions, optionally named for decoded dict views."""

    dimensions: tuple
    names: tuple = None

    def __post_init__(self):
        dims = tuple(self.dimensions)
        if not dims:
            raise ValueError("search space needs at least one dimension")
        for d in dims:
            if not isinstance(d, (Continuous, Discrete)):
                raise TypeError(f"dimension must be Continuous or Discrete, got {d!r}")
        object.__setattr__(self, "dimensions", dims)
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != len(dims):
                raise ValueError(
                    f"{len(names)} names for {len(dims)} dimensions"
                )
            object.__setattr__(self, "names", names)

    def __len__(self):
        return len(self.dimensions)

    def decode(self, position):
        """Concrete values for a normalized position vector."""
        position = np.asarray(position, dtype=np.float64)
        if position.shape != (len(self.dimensions),):
            raise ValueError(
                f"position has shape {position.shape}, expected ({len(self.dimensions)},)"
            )
        if np.any(position < 0.0) or np.any(position > 1.0):
            raise ValueError("position components must lie in [0, 1]")
        return tuple(d.decode(u) for d, u in zip(self.dimensions, position))

    def decode_named(self, position):
        if self.names is None:
            raise ValueError("search space has no dimension names")
        return dict(zip(self.names, self.decode(position)))


@dataclass(frozen=True)
class EhoConfig:
    """Herd shape, operator scales, and generation budget."""

    clan_count: int = 12
    per_clan_size: int = 10
    beta_scale: float = 0.5
    lambda_scale: float = 1.0
    worst_count: int = 1
    max_generations: int = 50
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.clan_count, int) or self.clan_count < 1:
            raise ValueError(f"clan_count must be a positive integer, got {self.clan_count!r}")
        if not isinstance(self.per_clan_size, int) or self.per_clan_size < 1:
            raise ValueError(
                f"per_clan_size must be a positive integer, got {self.per_clan_size!r}"
            )
        if not (0.0 <= self.beta_scale <= 1.0):
            raise ValueError(f"beta_scale must lie in [0, 1], got {self.beta_scale!r}")
        if not (0.0 <= self.lambda_scale <= 1.0):
            raise ValueError(f"lambda_scale must lie in [0, 1], got {self.lambda_scale!r}")
        if not isinstance(self.worst_count, int) or not (
            0 <= self.worst_count < self.per_clan_size
        ):
            raise ValueError(
                "worst_count must be a non-negative integer smaller than "
                f"per_clan_size, got {self.worst_count!r}"
            )
        if not isinstance(self.max_generations, int) or self.max_generations < 0:
            raise ValueError(
                f"max_generations must be a non-negative integer, got {self.max_generations!r}"
            )


def accuracy_fitness(predictions, targets, margin=0.5):
    """Fraction of samples with |target - prediction| < margin.

    With integer class labels and any margin in (0, 1] this is plain
    exact-match accuracy.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise ValueError(
            f"length mismatch: {predictions.shape} predictions vs {targets.shape} targets"
        )
    if predictions.size == 0:
        raise ValueError("need at least one sample")
    return float(np.mean(np.abs(targets - predictions) < margin))


def clan_update(position, clan_best, beta_scale, rng):
    """Drift one member toward the clan's best with per-component noise."""
    position = np.asarray(position, dtype=np.float64)
    clan_best = np.asarray(clan_best, dtype=np.float64)
    gamma = rng.uniform(size=position.shape)
    return np.clip(position + beta_scale * (clan_best - position) * gamma, 0.0, 1.0)


def matriarch_update(clan_positions, lambda_scale):
    """New position for a clan's fittest member: scaled clan center."""
    clan_positions = np.asarray(clan_positions, dtype=np.float64)
    center = clan_positions.mean(axis=0)
    return np.clip(lambda_scale * center, 0.0, 1.0)


def reseed_position(space, rng):
    """Fresh position drawn across each dimension's decoded range."""
    return np.array([d.reseed(rng.uniform()) for d in space.dimensions])


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_decoded: tuple


@dataclass(frozen=True)
class OptimizeResult:
    best_position: np.ndarray = field(repr=False)
    best_decoded: tuple
    best_fitness: float
    history: tuple
    evaluations: int


class ElephantHerdingOptimizer:
    """Runs the clan herd over a search space for a fitness callable.

    The objective receives the *decoded* assignment (a tuple in dimension
    order) and returns a fitness to maximize.  An objective exception
    marks that candidate's fitness as -inf and the run continues; if an
    entire evaluation sweep fails, an OptimizerError is raised.
    """

    def __init__(self, space, config=None):
        if not isinstance(space, SearchSpace):
            raise TypeError(f"space must be a SearchSpace, got {space!r}")
        self.space = space
        self.config = config or EhoConfig()

    def optimize(self, objective):
        cfg = self.config
        rng = as_rng(cfg.seed)
        n_dims = len(self.space)
        # positions[clan, member, dim] in normalized coordinates
        positions = rng.uniform(size=(cfg.clan_count, cfg.per_clan_size, n_dims))
        fitness = np.empty((cfg.clan_count, cfg.per_clan_size))
        evaluations = 0

        def evaluate_all():
            nonlocal evaluations
            any_ok = False
            for ci in range(cfg.clan_count):
                for mi in range(cfg.per_clan_size):
                    decoded = self.space.decode(positions[ci, mi])
                    try:
                        value = float(objective(decoded))
                    except Exception:
                        value = -np.inf
                    if np.isnan(value):
                        value = -np.inf
                    fitness[ci, mi] = value
                    evaluations += 1
                    any_ok = any_ok or value > -np.inf
            if not any_ok:
                raise OptimizerError(
                    "every candidate in the population failed evaluation"
                )

        def population_best():
            """Deterministic argmax: fitness, then lowest clan id, member id."""
            best = None
            for ci in range(cfg.clan_count):
                for mi in range(cfg.per_clan_size):
                    if best is None or fitness[ci, mi] > fitness[best]:
                        best = (ci, mi)
            return best

        evaluate_all()
        bi = population_best()
        best_position = positions[bi].copy()
        best_fitness = float(fitness[bi])
        history = [
            GenerationRecord(
                generation=0,
                best_fitness=best_fitness,
                mean_fitness=float(fitness.mean()),
                best_decoded=self.space.decode(best_position),
            )
        ]

        for generation in range(1, cfg.max_generations + 1):
            for ci in range(cfg.clan_count):
                clan = positions[ci]
                clan_fit = fitness[ci]
                order = sorted(
                    range(cfg.per_clan_size), key=lambda m: (-clan_fit[m], m)
                )
                leader = order[0]
                snapshot = clan.copy()
                # the drift rule is an identity on the leader itself, so it
                # applies uniformly; the leader then moves to the center
                gamma = rng.uniform(size=snapshot.shape)
                clan[:] = np.clip(
                    snapshot + cfg.beta_scale * (snapshot[leader] - snapshot) * gamma,
                    0.0,
                    1.0,
                )
                clan[leader] = matriarch_update(snapshot, cfg.lambda_scale)
                worst = sorted(
                    range(cfg.per_clan_size), key=lambda m: (clan_fit[m], m)
                )[: cfg.worst_count]
                for mi in worst:
                    clan[mi] = reseed_position(self.space, rng)

            evaluate_all()
            # elitism: if the sweep lost the best solution, put it back over
            # the current worst member
            bi = population_best()
            if fitness[bi] < best_fitness:
                worst_ci, worst_mi = min(
                    (
                        (ci, mi)
                        for ci in range(cfg.clan_count)
                        for mi in range(cfg.per_clan_size)
                    ),
                    key=lambda cm: (fitness[cm], cm),
                )
                positions[worst_ci, worst_mi] = best_position
                fitness[worst_ci, worst_mi] = best_fitness
                bi = (worst_ci, worst_mi)
            if fitness[bi] > best_fitness:
                best_position = positions[bi].copy()
                best_fitness = float(fitness[bi])
            history.append(
                GenerationRecord(
                    generation=generation,
                    best_fitness=best_fitness,
                    mean_fitness=float(fitness.mean()),
                    best_decoded=self.space.decode(best_position),
                )
            )

        return OptimizeResult(
            best_position=best_position,
            best_decoded=self.space.decode(best_position),
            best_fitness=best_fitness,
            history=tuple(history),
            evaluations=evaluations,
        )


def optimize(objective, space, config=None):
    """Functional entry point mirroring ElephantHerdingOptimizer.optimize."""
    return ElephantHerdingOptimizer(space, config).optimize(objective)


def sphere_problem(n_dims=4):
    """Negative sphere centered at 0.5 on the unit cube; optimum fitness 0."""
    space = SearchSpace(tuple(Continuous(0.0, 1.0) for _ in range(n_dims)))

    def objective(decoded):
        x = np.asarray(decoded)
        return -float(np.sum((x - 0.5) ** 2))

    return space, objective


def rastrigin_problem(n_dims=4):
    """Negative Rastrigin on [-5.12, 5.12]^n; optimum fitness 0 at the origin."""
    space = SearchSpace(tuple(Continuous(-5.12, 5.12) for _ in range(n_dims)))

    def objective(decoded):
        x = np.asarray(decoded)
        return -float(10.0 * x.size + np.sum(x**2 - 10.0 * np.cos(2.0 * np.pi * x)))

    return space, objective
