"""Instance and solution files and the dataset manifest."""

from __future__ import annotations
from dataclasses import asdict, dataclass, field, replace
from logging import getLogger
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Union

import numpy as np

from dagnn.exceptions import DataError
from dagnn.functions import parallel_map
from dagnn.json import dump_json, load_json
from dagnn.oracle import DAConfig, OracleSolution, dual_ascent
from dagnn.problem import (
    InstanceDistributionConfig,
    MIQPInstance,
    RelaxedQP,
    generate_instance,
    relax,
)
from dagnn.types import Split


__all__ = [
    "MANIFEST",
    "LabeledInstance",
    "Manifest",
    "ManifestEntry",
    "SolveReport",
    "build_dataset",
    "instance_from_json",
    "instance_seed",
    "instance_to_json",
    "load_instance",
    "load_solution",
    "load_split",
    "save_instance",
    "save_solution",
    "solution_path",
    "solve_dataset",
]


LOGGER = getLogger("dagnn.dataset")
MANIFEST = "manifest.json"
INSTANCE_DIR = "instances"


def instance_to_json(inst: MIQPInstance) -> dict:
    """Returns a JSON representation of an instance."""

    json = {
        "n": inst.n,
        "m": inst.m,
        "r": inst.r,
        "intIdx": list(inst.int_idx),
        "P": inst.P,
        "q": inst.q,
        "Abar": inst.abar,
        "bbar": inst.bbar,
        "seed": inst.seed,
    }

    if inst.planted is not None:
        json["planted"] = inst.planted

    return json


def instance_from_json(json: dict, path: Union[Path, str] = "<instance>") -> MIQPInstance:
    """Creates an instance from a JSON-ish dict."""

    try:
        n, m = int(json["n"]), int(json["m"])
        abar = np.array(json["Abar"], dtype=np.float64).reshape(m, n)
        planted = json.get("planted")
        inst = MIQPInstance(
            P=np.array(json["P"], dtype=np.float64).reshape(n, n),
            q=np.array(json["q"], dtype=np.float64).reshape(n),
            abar=abar,
            bbar=np.array(json["bbar"], dtype=np.float64).reshape(m),
            int_idx=tuple(int(index) for index in json["intIdx"]),
            seed=json.get("seed"),
            planted=None if planted is None else np.array(planted, dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as error:
        raise DataError(path, f"Corrupt instance: {error}.") from None

    if inst.r != int(json["r"]):
        raise DataError(path, "r does not match intIdx.")

    return inst


def save_instance(path: Union[Path, str], inst: MIQPInstance) -> None:
    """Writes an instance file."""

    dump_json(path, instance_to_json(inst), indent=None)


def load_instance(path: Union[Path, str]) -> MIQPInstance:
    """Reads an instance file."""

    return instance_from_json(load_json(path), path)


def solution_path(path: Union[Path, str]) -> Path:
    """Returns the solution file belonging to an instance file."""

    return Path(path).with_suffix(".sol")


def save_solution(path: Union[Path, str], solution: OracleSolution) -> None:
    """Writes the solution of the given instance file."""

    dump_json(solution_path(path), solution, indent=None)


def load_solution(path: Union[Path, str]) -> OracleSolution:
    """Reads the solution of the given instance file."""

    if not (file := solution_path(path)).exists():
        raise DataError(path, "No oracle solution for this instance.")

    try:
        return OracleSolution.from_json(load_json(file))
    except (KeyError, TypeError, ValueError) as error:
        raise DataError(file, f"Corrupt solution: {error}.") from None


def instance_seed(master: int, index: int) -> int:
    """Returns the seed of the instance with the given index."""

    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


class ManifestEntry(NamedTuple):
    """An instance file of the dataset."""

    path: str
    split: Split


@dataclass
class Manifest:
    """Lists the instance files of a dataset with their split tags."""

    root: Path
    seed: int = 0
    problem: dict = field(default_factory=dict)
    entries: list[ManifestEntry] = field(default_factory=list)
    excluded: list[str] = field(default_factory=list)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def split(self, split: Split) -> list[ManifestEntry]:
        """Returns the entries of a split."""
        return [entry for entry in self.entries if entry.split == split]

    def file(self, entry: ManifestEntry) -> Path:
        """Returns the absolute path of an entry."""
        return self.root / entry.path

    def to_json(self) -> dict:
        """Returns a JSON representation of the manifest."""
        return {
            "seed": self.seed,
            "problem": self.problem,
            "instances": [entry._asdict() for entry in self.entries],
            "excluded": self.excluded,
        }

    def save(self) -> None:
        """Writes the manifest into its root directory."""
        dump_json(self.root / MANIFEST, self)

    @classmethod
    def load(cls, root: Union[Path, str]) -> Manifest:
        """Reads the manifest of a dataset directory."""
        root = Path(root)
        json = load_json(root / MANIFEST)

        try:
            return cls(
                root=root,
                seed=json.get("seed", 0),
                problem=json.get("problem", {}),
                entries=[
                    ManifestEntry(item["path"], item["split"]) for item in json["instances"]
                ],
                excluded=list(json.get("excluded", [])),
            )
        except (KeyError, TypeError) as error:
            raise DataError(root / MANIFEST, f"Corrupt manifest: {error}.") from None


def _generate(job: tuple[InstanceDistributionConfig, int, int, str]) -> str:
    """Generates and writes one instance."""

    cfg, master, index, path = job
    seed = instance_seed(master, index)
    inst = generate_instance(replace(cfg, seed=seed), np.random.default_rng(seed))
    save_instance(path, inst)
    return path


def build_dataset(
    root: Union[Path, str],
    cfg: InstanceDistributionConfig,
    train: int,
    test: int = 0,
    *,
    jobs: int = 1,
) -> Manifest:
    """Generates train and test instances with per-index seeds."""

    root = Path(root)
    (root / INSTANCE_DIR).mkdir(parents=True, exist_ok=True)
    manifest = Manifest(root, cfg.seed, asdict(cfg))
    jobs_ = []

    for index in range(train + test):
        name = f"{INSTANCE_DIR}/{index:05d}.json"
        manifest.entries.append(ManifestEntry(name, "train" if index < train else "test"))
        jobs_.append((cfg, cfg.seed, index, str(root / name)))

    parallel_map(_generate, jobs_, jobs)
    manifest.save()
    LOGGER.info("Wrote %i train and %i test instances to %s.", train, test, root)
    return manifest


class SolveReport(NamedTuple):
    """Outcome of solving a dataset."""

    solved: int
    excluded: list[str]
    max_kkt: float

    def to_json(self) -> dict:
        """Returns a JSON representation of the report."""
        return {"solved": self.solved, "excluded": self.excluded, "maxKKT": self.max_kkt}


def _solve(job: tuple[str, DAConfig]) -> tuple[bool, float]:
    """Solves one instance file and writes its solution."""

    path, cfg = job
    solution = dual_ascent(relax(load_instance(path)), cfg)
    save_solution(path, solution)
    return solution.converged, solution.kkt.worst


def solve_dataset(
    manifest: Manifest, cfg: DAConfig = DAConfig(), *, jobs: int = 1
) -> SolveReport:
    """Solves every instance of the manifest and drops those
    whose oracle run did not converge.
    """

    entries = list(manifest.entries)
    results = parallel_map(
        _solve, [(str(manifest.file(entry)), cfg) for entry in entries], jobs
    )
    kept, excluded = [], []

    for entry, (converged, _) in zip(entries, results):
        if converged:
            kept.append(entry)
        else:
            LOGGER.warning("Excluding %s: oracle did not converge.", entry.path)
            excluded.append(entry.path)

    manifest.entries = kept
    manifest.excluded = [*manifest.excluded, *excluded]
    manifest.save()
    max_kkt = max((kkt for _, kkt in results), default=0.0)
    return SolveReport(len(kept), excluded, max_kkt)


@dataclass(frozen=True, eq=False)
class LabeledInstance:
    """A dataset instance, its relaxation and optionally its oracle solution."""

    name: str
    instance: MIQPInstance
    relaxed: RelaxedQP
    solution: Optional[OracleSolution] = None


def load_split(
    manifest: Manifest, split: Split, *, solutions: bool = False
) -> list[LabeledInstance]:
    """Loads the instances of a split, optionally with their solutions."""

    instances = []

    for entry in manifest.split(split):
        path = manifest.file(entry)
        inst = load_instance(path)
        instances.append(
            LabeledInstance(
                entry.path, inst, relax(inst), load_solution(path) if solutions else None
            )
        )

    return instances
