"""Synthetic demand instances, global-search labels and dataset files."""
from __future__ import annotations

import csv
import io
import logging
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DelmuError
from .globalsearch import GsOptions, multistart_solve
from .model import DemandInstance, Topology, builtin_topology, min_rate_feasible
from .utility import total_utility

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEMAND_STEP = 50
DEMAND_MAX = 750
MIN_RATE_MAX = 100
SHAPE = (4, 3)


@dataclass(frozen=True)
class LabelledRow:
    row: int
    instance: DemandInstance
    label: np.ndarray
    utility: float
    gs_seconds: float


@dataclass
class Dataset:
    topology_index: int
    seed: int
    rows: list = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def __len__(self):
        return len(self.rows)

    def features_and_labels(self):
        from .nn import RATE_SCALE, featurize

        X = np.stack([featurize(r.instance, self.topology_index) for r in self.rows])
        Y = np.stack([r.label.ravel() / RATE_SCALE for r in self.rows])
        return X, Y


def _row_rng(seed: int, row: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(row), stream]))


def row_seed(seed: int, row: int) -> int:
    """Per-row solver seed derived from the dataset seed."""
    return int(np.random.SeedSequence([int(seed), int(row), 1]).generate_state(1)[0])


def generate_instance(topology: Topology, seed: int, row: int, shape=None):
    """One instance: demands on a 50 Mbps grid up to 750, minimum rates
    uniform integers in [0, 100] capped by the demand. Redraws until the
    minimum-rate allocation fits. Returns ``(instance, redraws)``."""
    shape = topology.shape if shape is None else shape
    rng = _row_rng(seed, row)
    redraws = 0
    while True:
        d = rng.integers(0, DEMAND_MAX // DEMAND_STEP + 1, size=shape) * float(DEMAND_STEP)
        lo = np.minimum(rng.integers(0, MIN_RATE_MAX + 1, size=shape).astype(float), d)
        inst = DemandInstance(lo, d)
        if min_rate_feasible(topology, inst):
            return inst, redraws
        redraws += 1


def generate_instances(topology_index: int, count: int, seed: int,
                       topology: Topology | None = None) -> list[DemandInstance]:
    if count < 1:
        raise ValueError("count must be >= 1")
    topology = builtin_topology(topology_index) if topology is None else topology
    out, redraws = [], 0
    for row in range(count):
        inst, n = generate_instance(topology, seed, row)
        out.append(inst)
        redraws += n
    if redraws:
        log.info("redrew %d instances with infeasible minimum rates", redraws)
    return out


def label_row(topology: Topology, instance: DemandInstance, params, options: GsOptions,
              seed: int, row: int) -> LabelledRow:
    opts = replace(options, seed=row_seed(seed, row))
    t0 = time.perf_counter()
    label = multistart_solve(topology, instance, params, opts)
    elapsed = time.perf_counter() - t0
    return LabelledRow(row, instance, label, total_utility(params, label), elapsed)


def label_instances(topology: Topology, instances, params=None, gs_options: GsOptions = GsOptions(),
                    topology_index: int = 1, seed: int = 0, path=None, progress=None) -> Dataset:
    """Label every instance with the multistart optimum.

    With ``path``, rows already in the file (same seed and topology) are
    reused and new rows are appended as they finish, so an interrupted or
    extended run picks up where it stopped.
    """
    done = {}
    if path is not None and os.path.exists(path):
        try:
            old = load_dataset(path)
        except ValueError:
            old = None
        if old is not None and old.seed == seed and old.topology_index == topology_index:
            done = {r.row: r for r in old.rows}
    ds = Dataset(topology_index, seed)
    fh = None
    if path is not None:
        fresh = not os.path.exists(path) or not done
        fh = open(path, "w" if fresh else "a", newline="")
        if fresh:
            fh.write(_header_text())
    try:
        for row, inst in enumerate(instances):
            if row in done and done[row].instance == inst:
                ds.rows.append(done[row])
                continue
            try:
                lr = label_row(topology, inst, params, gs_options, seed, row)
            except (DelmuError, FloatingPointError) as exc:
                log.warning("row %d excluded: %s", row, exc)
                continue
            ds.rows.append(lr)
            if fh is not None:
                fh.write(_row_text(ds, lr))
                fh.flush()
            if progress is not None:
                progress(row, lr)
    finally:
        if fh is not None:
            fh.close()
    return ds


def split_dataset(dataset: Dataset, ratio: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    n = len(dataset)
    k = int(round(ratio * n))
    if k == 0 or k == n:
        raise ValueError(f"split of {n} rows at {ratio} leaves one side empty")
    order = np.random.default_rng(seed).permutation(n)
    pick = lambda idx: Dataset(dataset.topology_index, dataset.seed,
                               [dataset.rows[i] for i in sorted(idx)], dataset.schema_version)
    return pick(order[:k]), pick(order[k:])


def _columns(n: int = 12) -> list[str]:
    return (["topo", "seed", "row"]
            + [f"delta_{k}" for k in range(n)]
            + [f"d_{k}" for k in range(n)]
            + [f"r_{k}" for k in range(n)]
            + ["utility", "gs_seconds"])


def _header_text() -> str:
    return f"# delmu-dataset v{SCHEMA_VERSION}\n" + ",".join(_columns()) + "\n"


def _row_text(ds: Dataset, r: LabelledRow) -> str:
    vals = [str(ds.topology_index), str(ds.seed), str(r.row)]
    vals += [repr(float(x)) for x in r.instance.min_rate.ravel()]
    vals += [repr(float(x)) for x in r.instance.max_demand.ravel()]
    vals += [repr(float(x)) for x in r.label.ravel()]
    vals += [repr(float(r.utility)), repr(float(r.gs_seconds))]
    return ",".join(vals) + "\n"


def dumps_dataset(ds: Dataset) -> str:
    return _header_text() + "".join(_row_text(ds, r) for r in ds.rows)


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dumps_dataset(ds))


def loads_dataset(text: str) -> Dataset:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    n = sum(1 for c in (reader.fieldnames or []) if c.startswith("delta_"))
    shape = SHAPE if n == SHAPE[0] * SHAPE[1] else (1, n)
    ds = None
    for rec in reader:
        if ds is None:
            ds = Dataset(int(rec["topo"]), int(rec["seed"]))
        get = lambda p: np.array([float(rec[f"{p}_{k}"]) for k in range(n)]).reshape(shape)
        ds.rows.append(LabelledRow(
            row=int(rec["row"]),
            instance=DemandInstance(get("delta"), get("d")),
            label=get("r"),
            utility=float(rec["utility"]),
            gs_seconds=float(rec["gs_seconds"]),
        ))
    if ds is None:
        raise ValueError("dataset file has no rows")
    return ds


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        return loads_dataset(fh.read())
