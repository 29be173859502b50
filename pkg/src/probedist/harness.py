"""Experiment harness: repeated tester trials, aggregation, calibration.

An experiment is a JSON-serializable spec naming a tester, its parameters,
and one or two instance generators.  Running it replays the tester over
many trials with independent oracle and tester randomness but one shared
instance, then reports acceptance rates with Wilson confidence bounds and
query statistics.

Seed discipline: the experiment seed feeds a SeedSequence whose first
child seeds instance construction and whose second child emits one 64-bit
seed per trial; each trial seed then splits into an oracle stream and a
tester stream.  Trial outcomes therefore depend only on (experiment seed,
trial index), never on worker count or execution order.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .constants import DEFAULT_CONSTANTS, Constants
from .core import BilledOracle, FiniteDistribution, TesterReport, new_rng
from .generators import (
    code_lift,
    coordinate_noise_dist,
    hadamard_code,
    inside_outside_mixture,
    iso_copies_dist,
    mixture,
    perturb_dist,
    shift_dist,
    uniform_random_subset,
)
from .std_testers import GrainedInner, SupportInner
from .strings import ConstantTester, LinearityTester, hadamard_property
from .testers import (
    cyclic_shift_tester,
    graph_copies_tester,
    grained_tester,
    membership_tester,
    noisy_membership_tester,
    pair_equality_tester,
    perturbation_tester,
    projection_tester,
    self_correcting_tester,
    shift_law_tester,
    support_tester,
    uniformity_tester,
)

__all__ = [
    "ExperimentSpec",
    "TrialRecord",
    "ExperimentReport",
    "run_experiment",
    "wilson_interval",
    "calibrate_constant",
    "calibrate_tester",
    "TESTER_CONSTANTS",
    "CalibrationResult",
    "build_source",
    "build_tester",
    "save_distribution",
    "load_distribution",
    "TESTERS",
    "GENERATORS",
]


# ---------------------------------------------------------------------------
# instance generators reachable from specs


def _gen_point(params, rng):
    return FiniteDistribution.point(params["x"])


def _gen_uniform_strings(params, rng):
    return FiniteDistribution.uniform_over(params["strings"])


def _gen_atoms(params, rng):
    return FiniteDistribution(atoms=[(bits, float(w)) for bits, w in params["atoms"]])


def _gen_uniform_random_subset(params, rng):
    return uniform_random_subset(
        rng,
        n=int(params["n"]),
        m=int(params["m"]),
        min_distance=float(params.get("min_distance", 0.0)),
    )


def _gen_rotations(params, rng):
    return shift_dist(params["x"], law=params.get("law"))


def _gen_perturbation(params, rng):
    return perturb_dist(
        params["x"],
        eta=float(params["eta"]),
        delta=float(params["delta"]),
        rate=params.get("rate"),
    )


def _gen_coordinate_noise(params, rng):
    return coordinate_noise_dist(params["x"], params["flip_probs"])


def _gen_inside_outside(params, rng):
    return inside_outside_mixture(params["strings"])


def _gen_graph_copies(params, rng):
    return iso_copies_dist(params["adjacency"])


def _gen_hadamard_codewords(params, rng):
    code = hadamard_code(int(params["k"]))
    msgs = params["messages"]
    p = FiniteDistribution.uniform_over(msgs)
    return code_lift(code, p)


def _gen_mixture(params, rng):
    comps = [build_source(c, rng) for c in params["components"]]
    return mixture(comps, params["weights"])


GENERATORS = {
    "point": _gen_point,
    "uniform-strings": _gen_uniform_strings,
    "atoms": _gen_atoms,
    "uniform-random-subset": _gen_uniform_random_subset,
    "rotations": _gen_rotations,
    "perturbation": _gen_perturbation,
    "coordinate-noise": _gen_coordinate_noise,
    "inside-outside": _gen_inside_outside,
    "graph-copies": _gen_graph_copies,
    "hadamard-codewords": _gen_hadamard_codewords,
    "mixture": _gen_mixture,
}


def build_source(spec: dict, seed):
    """Build one instance from {"kind": ..., "params": {...}}."""
    kind = spec["kind"]
    if kind not in GENERATORS:
        raise ValueError(f"unknown generator kind {kind!r}")
    return GENERATORS[kind](spec.get("params", {}), new_rng(seed))


# ---------------------------------------------------------------------------
# testers reachable from specs


def _t_support(oracle, params, constants, seed):
    return support_tester(
        oracle, m=int(params["m"]), eps=float(params["eps"]), seed=seed, constants=constants
    )


def _t_grained(oracle, params, constants, seed):
    return grained_tester(
        oracle, m=int(params["m"]), eps=float(params["eps"]), seed=seed, constants=constants
    )


def _t_uniformity(oracle, params, constants, seed):
    return uniformity_tester(
        oracle, m=int(params["m"]), eps=float(params["eps"]), seed=seed, constants=constants
    )


def _t_pair_equality(oracle, params, constants, seed):
    return pair_equality_tester(
        oracle,
        m=int(params["m"]),
        eps=float(params["eps"]),
        seed=seed,
        constants=constants,
        both_bounded=bool(params.get("both_bounded", True)),
    )


def _t_perturbation(oracle, params, constants, seed):
    return perturbation_tester(
        oracle,
        eta=float(params["eta"]),
        delta=float(params["delta"]),
        eps=float(params["eps"]),
        seed=seed,
        constants=constants,
    )


def _t_rotation_family(oracle, params, constants, seed):
    return cyclic_shift_tester(
        oracle,
        eps=float(params["eps"]),
        seed=seed,
        constants=constants,
        mode=params.get("mode", "plain"),
    )


def _t_rotation_law(oracle, params, constants, seed):
    return shift_law_tester(
        oracle, law=params["law"], eps=float(params["eps"]), seed=seed, constants=constants
    )


def _t_graph_copies(oracle, params, constants, seed):
    return graph_copies_tester(
        oracle, eps=float(params["eps"]), seed=seed, constants=constants
    )


_STRING_TESTERS = {
    "linearity": lambda params: LinearityTester(),
    "constant": lambda params: ConstantTester(),
}


def _t_membership(oracle, params, constants, seed):
    maker = _STRING_TESTERS.get(params.get("property", "linearity"))
    if maker is None:
        raise ValueError(f"unknown string property {params.get('property')!r}")
    return membership_tester(
        oracle,
        string_tester=maker(params),
        eps=float(params["eps"]),
        seed=seed,
        constants=constants,
        mode=params.get("mode", "plain"),
    )


def _t_noisy_membership(oracle, params, constants, seed):
    maker = _STRING_TESTERS.get(params.get("property", "constant"))
    if maker is None:
        raise ValueError(f"unknown string property {params.get('property')!r}")
    return noisy_membership_tester(
        oracle,
        string_tester=maker(params),
        eta=float(params["eta"]),
        delta=float(params["delta"]),
        eps=float(params["eps"]),
        seed=seed,
        constants=constants,
    )


def _make_inner(params, constants):
    kind = params.get("inner", "support")
    m = int(params["m"])
    if kind == "support":
        return SupportInner(m=m, constants=constants)
    if kind == "grained":
        return GrainedInner(m=m, constants=constants)
    raise ValueError(f"unknown inner decision rule {kind!r}")


def _t_projected(oracle, params, constants, seed):
    return projection_tester(
        oracle,
        inner=_make_inner(params, constants),
        eps=float(params["eps"]),
        seed=seed,
        constants=constants,
    )


def _t_self_correcting(oracle, params, constants, seed):
    k = int(params["k"])
    return self_correcting_tester(
        oracle,
        prop=hadamard_property(k),
        inner=_make_inner(params, constants),
        eps=float(params["eps"]),
        seed=seed,
        constants=constants,
    )


TESTERS = {
    "support": _t_support,
    "grained": _t_grained,
    "uniformity": _t_uniformity,
    "pair-equality": _t_pair_equality,
    "perturbation": _t_perturbation,
    "rotation-family": _t_rotation_family,
    "rotation-law": _t_rotation_law,
    "graph-copies": _t_graph_copies,
    "membership": _t_membership,
    "noisy-membership": _t_noisy_membership,
    "projected": _t_projected,
    "self-correcting-hadamard": _t_self_correcting,
}


def build_tester(name: str):
    if name not in TESTERS:
        raise ValueError(f"unknown tester {name!r}")
    return TESTERS[name]


# ---------------------------------------------------------------------------
# experiment spec and records


@dataclass
class ExperimentSpec:
    """One repeatable experiment: a tester against generated instances."""

    name: str
    tester: str
    tester_params: dict
    sources: list
    trials: int = 100
    seed: int = 0
    workers: int = 1
    expectation: str | None = None

    def __post_init__(self):
        if self.tester not in TESTERS:
            raise ValueError(f"unknown tester {self.tester!r}")
        if not 1 <= len(self.sources) <= 2:
            raise ValueError("need one or two sources")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.expectation not in (None, "accept", "reject"):
            raise ValueError("expectation must be accept, reject, or omitted")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    verdict: str
    samples: tuple
    queries: int

    @property
    def total_samples(self) -> int:
        return int(sum(self.samples))


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    records: list
    elapsed_seconds: float
    constants: Constants = field(default_factory=lambda: DEFAULT_CONSTANTS)

    @property
    def accept_rate(self) -> float:
        return sum(r.verdict == "accept" for r in self.records) / len(self.records)

    @property
    def success_rate(self) -> float | None:
        """Rate of matching the declared expectation, when there is one."""
        if self.spec.expectation is None:
            return None
        return sum(r.verdict == self.spec.expectation for r in self.records) / len(
            self.records
        )

    def aggregates(self) -> dict:
        # deliberately excludes wall-clock time: serialized reports must be
        # byte-stable given equal seeds
        accepts = sum(r.verdict == "accept" for r in self.records)
        trials = len(self.records)
        lo, hi = wilson_interval(accepts, trials)
        queries = np.array([r.queries for r in self.records])
        samples = np.array([r.total_samples for r in self.records])
        out = {
            "trials": trials,
            "accepts": int(accepts),
            "accept_rate": accepts / trials,
            "wilson_low": lo,
            "wilson_high": hi,
            "mean_queries": float(queries.mean()),
            "max_queries": int(queries.max()),
            "mean_samples": float(samples.mean()),
        }
        if self.spec.expectation is not None:
            out["expectation"] = self.spec.expectation
            out["success_rate"] = self.success_rate
        return out

    def to_json_dict(self) -> dict:
        from . import __version__

        return {
            "spec": self.spec.to_dict(),
            "version": __version__,
            "aggregates": self.aggregates(),
            "records": [
                {
                    "trial": r.trial,
                    "seed": r.seed,
                    "verdict": r.verdict,
                    "samples": r.total_samples,
                    "samples_per_source": list(r.samples),
                    "queries": r.queries,
                }
                for r in self.records
            ],
        }

    def to_csv_text(self) -> str:
        lines = ["trial,seed,verdict,samples,queries"]
        for r in self.records:
            lines.append(
                f"{r.trial},{r.seed},{r.verdict},{r.total_samples},{r.queries}"
            )
        return "\n".join(lines) + "\n"


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (
        z
        * np.sqrt(phat * (1.0 - phat) / trials + z * z / (4 * trials * trials))
        / denom
    )
    return (max(0.0, center - half), min(1.0, center + half))


def run_experiment(
    spec: ExperimentSpec, constants: Constants = DEFAULT_CONSTANTS
) -> ExperimentReport:
    """Run every trial of an experiment; deterministic given its seed."""
    root = np.random.SeedSequence(spec.seed)
    instance_ss, trials_ss = root.spawn(2)
    source_seeds = instance_ss.spawn(len(spec.sources))
    sources = [build_source(s, ss) for s, ss in zip(spec.sources, source_seeds)]
    trial_seeds = trials_ss.generate_state(spec.trials, dtype=np.uint64)
    tester_fn = build_tester(spec.tester)

    def one_trial(i: int) -> TrialRecord:
        tseed = int(trial_seeds[i])
        oracle_ss, tester_ss = np.random.SeedSequence(tseed).spawn(2)
        oracle = BilledOracle(sources, seed=oracle_ss)
        report = tester_fn(oracle, spec.tester_params, constants, tester_ss)
        return TrialRecord(
            trial=i,
            seed=tseed,
            verdict=report.verdict,
            samples=tuple(report.samples_used),
            queries=report.queries_used,
        )

    start = time.perf_counter()
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            records = list(pool.map(one_trial, range(spec.trials)))
    else:
        records = [one_trial(i) for i in range(spec.trials)]
    elapsed = time.perf_counter() - start
    return ExperimentReport(
        spec=spec, records=records, elapsed_seconds=elapsed, constants=constants
    )


# ---------------------------------------------------------------------------
# calibration


@dataclass
class CalibrationResult:
    constant: str
    value: float
    target: float
    trials: int
    confirm_trials: int
    case_rates: dict
    suite_hash: str

    def to_dict(self) -> dict:
        return asdict(self)


def _suite_hash(suite) -> str:
    payload = json.dumps([s.to_dict() for s in suite], sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


def calibrate_constant(
    name: str,
    suite,
    lo: float = 1.0,
    hi: float = 4096.0,
    target: float = 0.9,
    trials: int = 120,
    confirm_trials: int = 600,
    constants: Constants = DEFAULT_CONSTANTS,
) -> CalibrationResult:
    """Find a small value of one constant meeting the target rate suite-wide.

    Every suite case must declare an expectation.  The search doubles the
    value until the whole suite clears the target, bisects eight times,
    then re-checks the winner at confirm_trials with fresh seeds, stepping
    up 25 percent at a time if the confirmation disagrees.
    """
    if name not in constants.to_dict():
        raise ValueError(f"unknown constant {name!r}")
    if not suite:
        raise ValueError("calibration suite is empty")
    if any(case.expectation is None for case in suite):
        raise ValueError("every calibration case needs an expectation")

    def rates(value: float, ntrials: int, salt: int) -> dict:
        cs = constants.replace(**{name: value})
        out = {}
        for case in suite:
            run_spec = replace(case, trials=ntrials, seed=case.seed * 1000003 + salt)
            out[case.name] = run_experiment(run_spec, cs).success_rate
        return out

    def passes(value: float, ntrials: int, salt: int) -> bool:
        return all(r >= target for r in rates(value, ntrials, salt).values())

    value = lo
    while not passes(value, trials, 1):
        value *= 2.0
        if value > hi:
            raise RuntimeError(
                f"no value of {name} up to {hi} meets the {target} target"
            )
    a, b = value / 2.0, value
    for _ in range(8):
        mid = (a + b) / 2.0
        if passes(mid, trials, 2):
            b = mid
        else:
            a = mid
    final = b
    for _ in range(5):
        final_rates = rates(final, confirm_trials, 3)
        if all(r >= target for r in final_rates.values()):
            return CalibrationResult(
                constant=name,
                value=final,
                target=target,
                trials=trials,
                confirm_trials=confirm_trials,
                case_rates=final_rates,
                suite_hash=_suite_hash(suite),
            )
        final *= 1.25
    raise RuntimeError(f"calibrated value of {name} failed confirmation")


# constants worth searching per tester; the rest are shared plumbing whose
# defaults the suites exercise implicitly
TESTER_CONSTANTS = {
    "support": ["support_samples"],
    "grained": ["grained_phase2"],
    "uniformity": ["grained_phase2"],
    "pair-equality": ["equality_mean"],
    "perturbation": ["perturb_positions"],
    "rotation-family": ["shift_count", "offset_count"],
    "rotation-law": ["equality_mean"],
    "graph-copies": ["ideal_samples"],
    "membership": ["membership_samples"],
    "noisy-membership": ["noisy_majority"],
    "projected": ["lift_positions"],
    "self-correcting-hadamard": ["correction_positions"],
}


def calibrate_tester(
    tester: str,
    suite,
    target: float = 0.9,
    trials: int = 120,
    confirm_trials: int = 600,
    constants: Constants = DEFAULT_CONSTANTS,
    only: str | None = None,
) -> dict:
    """Calibrate a tester's searchable constants in sequence over one suite.

    Each constant is searched with the previously calibrated ones already
    substituted.  Returns {"tester", "constants", "results", "suite_hash"}.
    """
    if tester not in TESTER_CONSTANTS:
        raise ValueError(f"unknown tester {tester!r}")
    names = TESTER_CONSTANTS[tester] if only is None else [only]
    current = constants
    results = []
    for name in names:
        result = calibrate_constant(
            name,
            suite,
            target=target,
            trials=trials,
            confirm_trials=confirm_trials,
            constants=current,
        )
        current = current.replace(**{name: result.value})
        results.append(result.to_dict())
    return {
        "tester": tester,
        "constants": {r["constant"]: r["value"] for r in results},
        "results": results,
        "suite_hash": _suite_hash(suite),
    }


# ---------------------------------------------------------------------------
# distribution file I/O


def save_distribution(path, dist: FiniteDistribution) -> None:
    """Write an explicit distribution as 'n <n>' then '<bits> <weight>' lines."""
    if not isinstance(dist, FiniteDistribution):
        raise ValueError("only explicit distributions can be saved")
    lines = [f"n {dist.n}"]
    for row, w in zip(dist.rows, dist.weights):
        lines.append("".join(str(b) for b in row) + f" {float(w)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_distribution(path) -> FiniteDistribution:
    """Read the save_distribution format; weights must sum to 1 within 1e-9."""
    with open(path) as fh:
        raw = [line.strip() for line in fh if line.strip()]
    if not raw or not raw[0].startswith("n "):
        raise ValueError("first line must be 'n <length>'")
    n = int(raw[0].split()[1])
    atoms = []
    for line in raw[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad atom line: {line!r}")
        bits, weight = parts
        if len(bits) != n or set(bits) - {"0", "1"}:
            raise ValueError(f"bad bit string: {bits!r}")
        atoms.append((bits, float(weight)))
    if not atoms:
        raise ValueError("no atoms")
    total = sum(w for _, w in atoms)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {total}, expected 1")
    atoms = [(bits, w / total) for bits, w in atoms]
    return FiniteDistribution(atoms=atoms)
