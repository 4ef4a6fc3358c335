"""Monte-Carlo studies of finite-size convergence to the kernel limits.

The central quantity is the squared Frobenius distance between the Gram
matrix of finite reservoirs and the deterministic Gram matrix of the
matching kernel recursion, averaged over weight draws.  On top of that
metric this module provides:

* ``convergence_scan`` - the error over a grid of weight scale factors;
* ``sparsity_scan`` - error versus sparsity level and reservoir size, with
  the per-size admissible-sparsity threshold;
* ``deep_size_scan`` / ``optimize_deep_sizes`` - two-layer (and deeper)
  size allocation under a quadratic cost budget;
* ``cross_term_probe`` - magnitude of the product terms dropped by the
  leaky kernel recursion;
* ``sparse_rf_experiment`` - single-step random-feature approximation error
  for dense versus sparse weights.

Seeding discipline: inputs come from one stream per scan, and repetition r
draws everything else from a stream derived from (master_seed, r), so runs
are reproducible bit for bit and independent of execution order or worker
count.  Within a repetition, all parameter points are carved out of shared
master draws (leading sub-matrices, nested sparsity masks), which leaves
every point's distribution untouched while correlating their noise; curve
shapes and argmin comparisons are far more stable that way.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .kernels import (
    Activation,
    KernelArgs,
    KernelDomainError,
    KernelFunction,
    kernel_closed_form,
)
from .reservoir import (
    DeepConfig,
    DivergenceError,
    ReservoirConfig,
    WeightSet,
    deep_run_batch,
    rc_gram,
    run_batch,
    sample_weights,
)
from .rkernel import RKParams, deep_rk_gram, rk_gram
from .simplex import NelderMeadResult, nelder_mead

__all__ = [
    "DeepSizesResult",
    "ExperimentResult",
    "ScanSpec",
    "Topology",
    "convergence_metric",
    "convergence_scan",
    "cross_term_probe",
    "deep_size_scan",
    "nelder_mead",
    "optimize_deep_sizes",
    "rf_error_curve",
    "sparse_rf_experiment",
    "sparsity_scan",
]

#: Grid cells whose divergence fraction exceeds this are flagged (value NaN).
DIVERGENCE_FLAG_FRACTION = 0.5

#: Sparsity at or below which carved recurrent matrices are stored CSR.
_CSR_THRESHOLD = 0.25


@dataclass(frozen=True)
class Topology:
    """Reservoir variant under study: exactly one of the four kinds."""

    kind: str
    sparsity: float = 1.0
    leak: float = 1.0
    layer_sizes: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("vanilla", "sparse", "leaky", "deep"):
            raise ValueError(f"unknown topology kind {self.kind!r}")
        if self.kind != "deep" and self.layer_sizes is not None:
            raise ValueError("layer_sizes only applies to the deep topology")
        if self.kind == "deep" and (self.layer_sizes is None or len(self.layer_sizes) < 1):
            raise ValueError("deep topology needs layer_sizes")
        if self.kind != "sparse" and self.sparsity != 1.0:
            raise ValueError("sparsity only applies to the sparse topology")
        if self.kind != "leaky" and self.leak != 1.0:
            raise ValueError("leak only applies to the leaky topology")
        if not 0.0 < self.sparsity <= 1.0:
            raise ValueError(f"sparsity must lie in (0, 1], got {self.sparsity}")
        if not 0.0 <= self.leak <= 1.0:
            raise ValueError(f"leak must lie in [0, 1], got {self.leak}")

    @classmethod
    def vanilla(cls):
        return cls(kind="vanilla")

    @classmethod
    def sparse(cls, sparsity: float):
        return cls(kind="sparse", sparsity=sparsity)

    @classmethod
    def leaky(cls, leak: float):
        return cls(kind="leaky", leak=leak)

    @classmethod
    def deep(cls, layer_sizes):
        return cls(kind="deep", layer_sizes=tuple(int(s) for s in layer_sizes))


@dataclass(frozen=True)
class ScanSpec:
    """Full description of one Monte-Carlo scan."""

    topology: Topology
    activation: Activation
    sigma_r_grid: tuple[float, ...]
    sigma_i_grid: tuple[float, ...]
    n: int
    t: int
    m: int
    d: int
    reps: int
    master_seed: int

    def __post_init__(self):
        object.__setattr__(self, "sigma_r_grid", tuple(float(s) for s in self.sigma_r_grid))
        object.__setattr__(self, "sigma_i_grid", tuple(float(s) for s in self.sigma_i_grid))
        if not self.sigma_r_grid or not self.sigma_i_grid:
            raise ValueError("scale grids must be nonempty")
        if any(s <= 0.0 for s in self.sigma_r_grid + self.sigma_i_grid):
            raise ValueError("scale factors must be positive")
        for name in ("n", "t", "m", "d", "reps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.master_seed < 0:
            raise ValueError("master_seed must be a nonnegative integer")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["activation"] = self.activation.value
        out["topology"] = {k: v for k, v in asdict(self.topology).items() if v is not None}
        return out


@dataclass
class ExperimentResult:
    """Labeled grid of metric values with full provenance.

    ``axes`` and ``values`` map column names to per-row entries (all columns
    share one length); ``seeds`` records the derived per-repetition streams.
    """

    axes: dict[str, list]
    values: dict[str, list]
    diverged_fraction: list[float]
    spec: dict
    seeds: list[int]

    def __post_init__(self):
        lengths = {len(col) for col in self.axes.values()}
        lengths |= {len(col) for col in self.values.values()}
        lengths.add(len(self.diverged_fraction))
        if len(lengths) != 1:
            raise ValueError("all result columns must have the same length")
        if next(iter(lengths)) == 0:
            raise ValueError("experiment result has no rows")
        for frac in self.diverged_fraction:
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"diverged fraction {frac} outside [0, 1]")

    @property
    def n_rows(self) -> int:
        return len(self.diverged_fraction)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "axes": self.axes,
            "values": self.values,
            "diverged_fraction": self.diverged_fraction,
            "seeds": self.seeds,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentResult":
        return cls(
            axes=data["axes"],
            values=data["values"],
            diverged_fraction=data["diverged_fraction"],
            spec=data["spec"],
            seeds=data["seeds"],
        )


# --------------------------------------------------------------------------
# seeding
# --------------------------------------------------------------------------

def _input_stream(master_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(0,)))


def _rep_sequence(master_seed: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(1, rep))


def _rep_rng(master_seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(_rep_sequence(master_seed, rep))


def _rep_seed_ints(master_seed: int, reps: int) -> list[int]:
    return [int(_rep_sequence(master_seed, r).generate_state(1, np.uint64)[0])
            for r in range(reps)]


def sample_scan_inputs(spec: ScanSpec) -> np.ndarray:
    """The M shared input sequences of a scan, entries N(0, 1/d)."""
    rng = _input_stream(spec.master_seed)
    return rng.standard_normal((spec.m, spec.t, spec.d)) / math.sqrt(spec.d)


# --------------------------------------------------------------------------
# Monte-Carlo engine: shared master draws carved per parameter point
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _Cell:
    """One parameter point of a scan (single-layer or deep)."""

    sigma_r: float
    sigma_i: float
    n: int = 0                      # single-layer size; 0 for deep cells
    sparsity: float = 1.0
    leak: float = 1.0
    sizes: tuple[int, ...] | None = None

    def layer_dims(self, d: int) -> list[tuple[int, int]]:
        if self.sizes is None:
            return [(self.n, d)]
        dims = []
        prev = d
        for size in self.sizes:
            dims.append((size, prev))
            prev = size
        return dims


def _master_dims(cells, d: int) -> list[tuple[int, int]]:
    """Per-layer (size, input-dim) maxima over all cells."""
    layer_count = max(len(cell.layer_dims(d)) for cell in cells)
    dims = []
    for layer in range(layer_count):
        pairs = [cell.layer_dims(d)[layer] for cell in cells
                 if len(cell.layer_dims(d)) > layer]
        dims.append((max(p[0] for p in pairs), max(p[1] for p in pairs)))
    return dims


def _draw_masters(rng, dims, m: int, with_uniforms: bool):
    """Raw per-repetition draws at the maximal dimensions.

    Draw order is fixed (per layer: values, mask uniforms, input weights,
    initial states) so any cell carves identical numbers from them.
    """
    masters = []
    for n_max, d_max in dims:
        masters.append({
            "values": rng.standard_normal((n_max, n_max)),
            "uniforms": rng.random((n_max, n_max)) if with_uniforms else None,
            "wi": rng.standard_normal((n_max, d_max)),
            "x0": rng.standard_normal((m, n_max)),
        })
    return masters


def _carve_layer(master, n: int, d: int, sparsity: float):
    """Weights and initial states of one layer from the master draws.

    Leading sub-blocks of an i.i.d. array are i.i.d. with the same law, and
    thresholding shared uniforms gives Bernoulli masks nested across
    sparsity levels.
    """
    if sparsity == 1.0:
        w_r = np.ascontiguousarray(master["values"][:n, :n])
    else:
        values = master["values"][:n, :n] / math.sqrt(sparsity)
        mask = master["uniforms"][:n, :n] < sparsity
        w_r = np.where(mask, values, 0.0)
        if sparsity <= _CSR_THRESHOLD:
            w_r = csr_matrix(w_r)
    w_i = np.ascontiguousarray(master["wi"][:n, :d])
    x0 = master["x0"][:, :n]
    x0 = x0 / np.linalg.norm(x0, axis=1, keepdims=True)
    return WeightSet(w_r=w_r, w_i=w_i, sparsity_used=sparsity), x0


def _cell_gram(spec: ScanSpec, inputs: np.ndarray, cell: _Cell, masters) -> np.ndarray:
    """Finite-size Gram matrix of one repetition at one parameter point."""
    dims = cell.layer_dims(spec.d)
    if cell.sizes is not None:
        configs, weights, x0s = [], [], []
        for (n, d), master in zip(dims, masters):
            configs.append(ReservoirConfig(
                n=n, d=d, sigma_r=cell.sigma_r, sigma_i=cell.sigma_i,
                activation=spec.activation,
            ))
            w, x0 = _carve_layer(master, n, d, 1.0)
            weights.append(w)
            x0s.append(x0)
        states = deep_run_batch(inputs, DeepConfig(tuple(configs)), weights, x0s)
        return rc_gram([layer[-1] for layer in states])
    n, d = dims[0]
    config = ReservoirConfig(
        n=n, d=d, sigma_r=cell.sigma_r, sigma_i=cell.sigma_i,
        activation=spec.activation, leak=cell.leak, sparsity=cell.sparsity,
    )
    w, x0 = _carve_layer(masters[0], n, d, cell.sparsity)
    states = run_batch(inputs, w, config, x0)
    return rc_gram(states[-1])


def _rk_reference(spec: ScanSpec, inputs: np.ndarray, cell: _Cell) -> np.ndarray | None:
    """Limit Gram matrix at one parameter point; None when non-finite."""
    kernel = KernelFunction(spec.activation)
    try:
        if cell.sizes is not None:
            params = [RKParams(kernel=kernel, sigma_r=cell.sigma_r,
                               sigma_i=cell.sigma_i) for _ in cell.sizes]
            gram = deep_rk_gram(inputs, params)
        else:
            params = RKParams(kernel=kernel, sigma_r=cell.sigma_r,
                              sigma_i=cell.sigma_i, leak=cell.leak)
            gram = rk_gram(inputs, params)
    except (KernelDomainError, FloatingPointError, OverflowError):
        return None
    if not np.all(np.isfinite(gram)):
        return None
    return gram


def _rep_block(task):
    """Metric values for a contiguous block of repetitions (NaN = diverged)."""
    spec, inputs, cells, rk_grams, rep_indices = task
    dims = _master_dims(cells, spec.d)
    with_uniforms = any(cell.sparsity < 1.0 for cell in cells)
    active = [i for i, gram in enumerate(rk_grams) if gram is not None]
    out = np.full((len(rep_indices), len(cells)), np.nan)
    for row, rep in enumerate(rep_indices):
        rng = _rep_rng(spec.master_seed, rep)
        masters = _draw_masters(rng, dims, spec.m, with_uniforms)
        for idx in active:
            try:
                gram = _cell_gram(spec, inputs, cells[idx], masters)
            except DivergenceError:
                continue
            out[row, idx] = convergence_metric(gram, rk_grams[idx])
    return out


def _mc_cells(spec: ScanSpec, inputs: np.ndarray, cells, workers: int = 1):
    """Mean metric and divergence fraction for every cell.

    Parallelism is over repetition blocks; rows are reassembled in
    repetition order and reduced in a fixed order, so results do not depend
    on the worker count.
    """
    rk_cache: dict = {}
    rk_grams = []
    for cell in cells:
        key = (cell.sigma_r, cell.sigma_i, cell.leak,
               None if cell.sizes is None else len(cell.sizes))
        if key not in rk_cache:
            rk_cache[key] = _rk_reference(spec, inputs, cell)
        rk_grams.append(rk_cache[key])
    reps = spec.reps
    workers = max(1, workers)
    if workers == 1 or reps < 2 * workers:
        blocks = [list(range(reps))]
    else:
        size = math.ceil(reps / (4 * workers))
        blocks = [list(range(lo, min(lo + size, reps)))
                  for lo in range(0, reps, size)]
    tasks = [(spec, inputs, cells, rk_grams, block) for block in blocks]
    if len(tasks) == 1 or workers == 1:
        rows = [_rep_block(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_rep_block, tasks))
    table = np.vstack(rows)

    means, fracs = [], []
    for idx, gram in enumerate(rk_grams):
        if gram is None:
            means.append(math.nan)
            fracs.append(1.0)
            continue
        column = table[:, idx]
        valid = np.isfinite(column)
        fraction = 1.0 - valid.sum() / reps
        if fraction > DIVERGENCE_FLAG_FRACTION or not valid.any():
            means.append(math.nan)
        else:
            means.append(float(column[valid].mean()))
        fracs.append(float(fraction))
    return means, fracs


# --------------------------------------------------------------------------
# metric and scans
# --------------------------------------------------------------------------

def convergence_metric(g_rc: np.ndarray, g_rk: np.ndarray) -> float:
    """Squared Frobenius distance between two Gram matrices."""
    g_rc = np.asarray(g_rc, dtype=float)
    g_rk = np.asarray(g_rk, dtype=float)
    if g_rc.shape != g_rk.shape:
        raise ValueError(f"Gram shapes differ: {g_rc.shape} vs {g_rk.shape}")
    return float(((g_rc - g_rk) ** 2).sum())


def _topology_cell(spec: ScanSpec, sigma_r: float, sigma_i: float,
                   n: int | None = None, sparsity: float | None = None) -> _Cell:
    topo = spec.topology
    if topo.kind == "deep":
        return _Cell(sigma_r=sigma_r, sigma_i=sigma_i, sizes=topo.layer_sizes)
    return _Cell(
        sigma_r=sigma_r, sigma_i=sigma_i,
        n=n if n is not None else spec.n,
        sparsity=sparsity if sparsity is not None else topo.sparsity,
        leak=topo.leak,
    )


def convergence_scan(spec: ScanSpec, workers: int = 1) -> ExperimentResult:
    """Mean metric over the (sigma_r, sigma_i) grid.

    Inputs are drawn once per scan; weights and initial states are redrawn
    per repetition from streams shared across grid points.
    """
    inputs = sample_scan_inputs(spec)
    points = [(sr, si) for sr in spec.sigma_r_grid for si in spec.sigma_i_grid]
    cells = [_topology_cell(spec, sr, si) for sr, si in points]
    means, fracs = _mc_cells(spec, inputs, cells, workers)
    return ExperimentResult(
        axes={
            "sigma_r": [p[0] for p in points],
            "sigma_i": [p[1] for p in points],
        },
        values={"value": means},
        diverged_fraction=fracs,
        spec=spec.to_dict(),
        seeds=_rep_seed_ints(spec.master_seed, spec.reps),
    )


def cross_term_probe(spec: ScanSpec, sigma_r: float | None = None,
                     sigma_i: float | None = None) -> ExperimentResult:
    """Empirical size of the product terms the leaky recursion drops.

    For reservoirs n and m the dropped term at step t is
    ``a(1-a)/sqrt(N) * f(...)^T x_m(t)``; it is recovered from consecutive
    states as ``(1-a) (x_n(t+1) - (1-a) x_n(t))^T x_m(t)`` and averaged in
    absolute value over ordered pairs and repetitions.  The mean metric at
    the same operating point is reported alongside.
    """
    if spec.topology.kind != "leaky":
        raise ValueError("cross_term_probe requires a leaky topology")
    sigma_r = spec.sigma_r_grid[0] if sigma_r is None else sigma_r
    sigma_i = spec.sigma_i_grid[0] if sigma_i is None else sigma_i
    leak = spec.topology.leak
    inputs = sample_scan_inputs(spec)
    cell = _topology_cell(spec, sigma_r, sigma_i)
    config = ReservoirConfig(
        n=spec.n, d=spec.d, sigma_r=sigma_r, sigma_i=sigma_i,
        activation=spec.activation, leak=leak,
    )
    g_rk = _rk_reference(spec, inputs, cell)

    sums = np.zeros(spec.t)
    successes = 0
    metric_total = 0.0
    for rep in range(spec.reps):
        rng = _rep_rng(spec.master_seed, rep)
        masters = _draw_masters(rng, [(spec.n, spec.d)], spec.m, False)
        weights, x0s = _carve_layer(masters[0], spec.n, spec.d, 1.0)
        try:
            states = run_batch(inputs, weights, config, x0s)
        except DivergenceError:
            continue
        successes += 1
        if g_rk is not None:
            metric_total += convergence_metric(rc_gram(states[-1]), g_rk)
        for t in range(spec.t):
            delta = (1.0 - leak) * (states[t + 1] - (1.0 - leak) * states[t])
            cross = delta @ states[t].T
            sums[t] += np.abs(cross).sum()
    pairs = spec.m * spec.m
    mean_abs = sums / (successes * pairs) if successes else np.full(spec.t, math.nan)
    mean_metric = (metric_total / successes
                   if successes and g_rk is not None else math.nan)
    return ExperimentResult(
        axes={"step": list(range(1, spec.t + 1))},
        values={
            "cross_term_mean_abs": [float(v) for v in mean_abs],
            "mean_metric": [mean_metric] * spec.t,
        },
        diverged_fraction=[1.0 - successes / spec.reps] * spec.t,
        spec={**spec.to_dict(), "sigma_r": sigma_r, "sigma_i": sigma_i},
        seeds=_rep_seed_ints(spec.master_seed, spec.reps),
    )


def sparsity_scan(n_list, s_list, spec: ScanSpec, workers: int = 1):
    """Mean metric versus sparsity for several reservoir sizes.

    ``s_list`` must contain 1.0, the dense reference.  Returns the curve
    result (raw, per-size min-max normalized, and per-size threshold
    columns) together with a dict mapping each size to its admissible
    sparsity threshold: the smallest grid value whose mean metric stays
    within 10% of the dense reference.
    """
    n_list = [int(n) for n in n_list]
    s_list = [float(s) for s in s_list]
    if 1.0 not in s_list:
        raise ValueError("s_list must include the dense reference 1.0")
    if spec.topology.kind not in ("vanilla", "sparse"):
        raise ValueError("sparsity_scan applies to the sparse topology")
    sigma_r, sigma_i = spec.sigma_r_grid[0], spec.sigma_i_grid[0]
    inputs = sample_scan_inputs(spec)
    rows = [(n, s) for n in n_list for s in s_list]
    cells = [_Cell(sigma_r=sigma_r, sigma_i=sigma_i, n=n, sparsity=s)
             for n, s in rows]
    means, fracs = _mc_cells(spec, inputs, cells, workers)

    raw = dict(zip(rows, means))
    thresholds: dict[int, float] = {}
    normalized = {}
    for n in n_list:
        curve = np.array([raw[(n, s)] for s in s_list])
        lo, hi = np.nanmin(curve), np.nanmax(curve)
        span = hi - lo
        for s, value in zip(s_list, curve):
            normalized[(n, s)] = (value - lo) / span if span > 0 else 0.0
        dense = raw[(n, 1.0)]
        admissible = [s for s in s_list if raw[(n, s)] <= 1.1 * dense]
        thresholds[n] = min(admissible)
    return ExperimentResult(
        axes={
            "n": [row[0] for row in rows],
            "sparsity": [row[1] for row in rows],
        },
        values={
            "value": [raw[row] for row in rows],
            "normalized": [float(normalized[row]) for row in rows],
            "threshold": [thresholds[row[0]] for row in rows],
        },
        diverged_fraction=fracs,
        spec={**spec.to_dict(), "n_list": n_list, "s_list": s_list},
        seeds=_rep_seed_ints(spec.master_seed, spec.reps),
    ), thresholds


def deep_size_scan(budget: int, n1_list, spec: ScanSpec, workers: int = 1) -> ExperimentResult:
    """Two-layer total-Gram metric versus first-layer size at fixed budget.

    The budget constrains the quadratic cost ``n1^2 + n2^2``; the second
    layer gets all remaining capacity.
    """
    n1_list = [int(n1) for n1 in n1_list]
    for n1 in n1_list:
        if n1 * n1 >= budget:
            raise ValueError(f"n1={n1} infeasible for budget {budget}")
    sigma_r, sigma_i = spec.sigma_r_grid[0], spec.sigma_i_grid[0]
    inputs = sample_scan_inputs(spec)
    sizes = [(n1, int(round(math.sqrt(budget - n1 * n1)))) for n1 in n1_list]
    cells = [_Cell(sigma_r=sigma_r, sigma_i=sigma_i, sizes=pair) for pair in sizes]
    means, fracs = _mc_cells(spec, inputs, cells, workers)
    return ExperimentResult(
        axes={
            "n1": [pair[0] for pair in sizes],
            "n2": [pair[1] for pair in sizes],
        },
        values={"value": means},
        diverged_fraction=fracs,
        spec={**spec.to_dict(), "budget": budget},
        seeds=_rep_seed_ints(spec.master_seed, spec.reps),
    )


@dataclass(frozen=True)
class DeepSizesResult:
    sizes: tuple[int, ...]
    objective_value: float
    nonincreasing: bool
    optimizer: NelderMeadResult


def _budget_sizes(free, budget: int) -> tuple[int, ...] | None:
    """Round free sizes and give the remaining budget to the last layer."""
    sizes = [int(round(v)) for v in np.atleast_1d(free)]
    if any(s < 2 for s in sizes):
        return None
    used = sum(s * s for s in sizes)
    if used >= budget - 4:
        return None
    return tuple(sizes) + (int(round(math.sqrt(budget - used))),)


def optimize_deep_sizes(layer_count: int, budget: int, spec: ScanSpec,
                        objective_override=None) -> DeepSizesResult:
    """Pick layer sizes minimizing the total-Gram metric under the budget.

    The first ``layer_count - 1`` sizes are free; the last is determined by
    the remaining budget.  The Monte-Carlo objective reuses one fixed set of
    repetition streams and carves every size from the same master draws
    (common random numbers), so the simplex search sees a smooth,
    quasi-deterministic function.
    """
    if layer_count < 2:
        raise ValueError("optimize_deep_sizes needs at least two layers")
    equal = math.sqrt(budget / layer_count)
    if equal < 2.0:
        raise ValueError(f"budget {budget} infeasible for {layer_count} layers")
    inputs = sample_scan_inputs(spec)
    sigma_r, sigma_i = spec.sigma_r_grid[0], spec.sigma_i_grid[0]
    bound = int(math.isqrt(budget)) + 1
    dims = [(bound, spec.d)] + [(bound, bound)] * (layer_count - 1)

    def mc_objective(free) -> float:
        sizes = _budget_sizes(free, budget)
        if sizes is None:
            overshoot = sum(v * v for v in np.atleast_1d(free)) - budget
            return 1e6 + max(overshoot, 0.0)
        cell = _Cell(sigma_r=sigma_r, sigma_i=sigma_i, sizes=sizes)
        g_rk = _rk_reference(spec, inputs, cell)
        if g_rk is None:
            return 1e6
        total = 0.0
        count = 0
        for rep in range(spec.reps):
            rng = _rep_rng(spec.master_seed, rep)
            masters = _draw_masters(rng, dims, spec.m, False)
            try:
                gram = _cell_gram(spec, inputs, cell, masters)
            except DivergenceError:
                continue
            total += convergence_metric(gram, g_rk)
            count += 1
        if count == 0:
            return 1e6
        return total / count

    objective = objective_override if objective_override is not None else mc_objective
    x0 = np.full(layer_count - 1, equal)
    result = nelder_mead(objective, x0, initial_step=0.08 * equal, tol=1.0, max_iter=200)
    sizes = _budget_sizes(result.x, budget)
    if sizes is None:
        raise RuntimeError(f"optimizer left the feasible region at {result.x}")
    return DeepSizesResult(
        sizes=sizes,
        objective_value=result.fun,
        nonincreasing=all(a >= b for a, b in zip(sizes, sizes[1:])),
        optimizer=result,
    )


# --------------------------------------------------------------------------
# single-step random-feature experiment
# --------------------------------------------------------------------------

def rf_error_curve(u: np.ndarray, v: np.ndarray, n_list, sparsity: float,
                   activation: Activation, rng) -> np.ndarray:
    """Squared error of the random-feature kernel estimate at each width.

    One weight draw at the largest width serves all smaller widths through
    prefix averages of ``f(Wu) f(Wv)``; the reference is the dense-limit
    kernel of the activation.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n_list = [int(n) for n in n_list]
    n_max = max(n_list)
    d = u.shape[0]
    if sparsity == 1.0:
        w = rng.standard_normal((n_max, d))
    else:
        values = rng.standard_normal((n_max, d)) / math.sqrt(sparsity)
        mask = rng.random((n_max, d)) < sparsity
        w = np.where(mask, values, 0.0)
    feats = activation.apply(w @ u) * activation.apply(w @ v)
    prefix = np.cumsum(feats)
    reference = kernel_closed_form(
        activation, KernelArgs(float(u @ u), float(v @ v), float(u @ v))
    )
    return np.array([(prefix[n - 1] / n - reference) ** 2 for n in n_list])


def sparse_rf_experiment(d_list, n_list, sparsity: float, reps: int,
                         activation: Activation = Activation.ERF,
                         master_seed: int = 0) -> ExperimentResult:
    """Mean random-feature error for dense and sparse weights.

    Inputs are uniform on [0, 1] per dimension, fixed per input dimension;
    weights are redrawn every repetition.  Dense curves decay like 1/n,
    sparse curves flatten once the width passes the sparse-bias floor.
    """
    d_list = [int(d) for d in d_list]
    n_list = sorted(int(n) for n in n_list)
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if not 0.0 < sparsity <= 1.0:
        raise ValueError(f"sparsity must lie in (0, 1], got {sparsity}")
    input_rng = _input_stream(master_seed)
    rows_axis_d, rows_axis_kind, rows_axis_n, rows_value = [], [], [], []
    for d in d_list:
        u = input_rng.random(d)
        v = input_rng.random(d)
        for kind, s in (("dense", 1.0), ("sparse", sparsity)):
            total = np.zeros(len(n_list))
            for rep in range(reps):
                rng = _rep_rng(master_seed, rep)
                total += rf_error_curve(u, v, n_list, s, activation, rng)
            for n, value in zip(n_list, total / reps):
                rows_axis_d.append(d)
                rows_axis_kind.append(kind)
                rows_axis_n.append(n)
                rows_value.append(float(value))
    return ExperimentResult(
        axes={"d": rows_axis_d, "weights": rows_axis_kind, "n": rows_axis_n},
        values={"value": rows_value},
        diverged_fraction=[0.0] * len(rows_value),
        spec={
            "experiment": "sparse_rf",
            "d_list": d_list,
            "n_list": n_list,
            "sparsity": sparsity,
            "reps": reps,
            "activation": activation.value,
            "master_seed": master_seed,
        },
        seeds=_rep_seed_ints(master_seed, reps),
    )
