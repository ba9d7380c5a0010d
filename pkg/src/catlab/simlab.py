"""Monte Carlo laboratory: headless sessions against the engine, recovery
metrics, a linear-test comparator, and report emission.

Every run is deterministic in the master seed. Each (replication, examinee)
pair derives its own generators from (master_seed, replication, index, tag),
so replications are independent and could run concurrently without changing
a single output byte; aggregation is an ordered reduction.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bank import ItemBank, generate_bank, load_bank_file
from .engine import (
    CutoffBand,
    SessionResult,
    StopDecision,
    StudyConfig,
    begin_session,
    classify,
    config_from_dict,
    estimate_for,
    finalize,
    next_item,
    start_session,
    submit_response,
    validate_config,
)
from .errors import CatlabError
from .irt import ItemParameters, Response, category_probabilities
from .selection import ExposureLedger

ABILITY_DISTRIBUTIONS = ("normal", "skewed", "neg_skewed", "bimodal")

_TAG_THETA = 10
_TAG_RESPONSE = 20
_TAG_SESSION = 30
_TAG_RETEST = 40
_TAG_LINEAR = 0xFEED

CSV_COLUMNS = ["model", "n_items", "length", "rmse", "bias", "r", "efficiency"]


def sample_abilities(dist: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n true abilities; every distribution is standardized to mean 0.

    skewed is (chi2_3 - 3)/sqrt(6) (sd 1), neg_skewed its mirror, bimodal the
    even mixture of N(-1, 0.5^2) and N(1, 0.5^2).
    """
    if dist == "normal":
        return rng.normal(0.0, 1.0, n)
    if dist == "skewed":
        return (rng.chisquare(3, n) - 3.0) / math.sqrt(6.0)
    if dist == "neg_skewed":
        return -(rng.chisquare(3, n) - 3.0) / math.sqrt(6.0)
    if dist == "bimodal":
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return sign + rng.normal(0.0, 0.5, n)
    raise ValueError(f"unknown ability distribution {dist!r}")


def simulate_examinee_response(
    item: ItemParameters, theta_true: float, rng: np.random.Generator
) -> Response:
    """Draw a response category by inverse CDF over the model probabilities."""
    probs = category_probabilities(item, theta_true)
    value = int(np.searchsorted(np.cumsum(probs), rng.random()))
    return Response(item.item_id, min(value, item.n_categories - 1))


def run_headless_session(
    config: StudyConfig,
    bank: ItemBank,
    theta_true: float,
    response_rng: np.random.Generator,
    ledger: ExposureLedger,
    seed,
    session_id: str = "sim",
) -> SessionResult:
    """Run one complete CAT session with simulated responses."""
    state = start_session(config, bank, ledger=ledger, seed=seed, session_id=session_id, now=0.0)
    begin_session(state, config, now=0.0)
    while True:
        step = next_item(state, config, bank, now=0.0)
        if isinstance(step, StopDecision):
            break
        response = simulate_examinee_response(bank.get(step), theta_true, response_rng)
        submit_response(state, config, bank, response, now=0.0)
    return finalize(state, config, now=0.0)


@dataclass
class SimulationSpec:
    """One fully resolved simulation condition."""

    model: str
    bank: ItemBank
    config: StudyConfig
    n_examinees: int
    replications: int
    master_seed: int
    ability_dist: str = "normal"
    oracle_estimator: bool = False
    linear_comparator: bool = False
    positive_band: str | None = None
    keep_records: bool = False


@dataclass
class SimulationReport:
    """Recovery metrics for one condition, plus exposure and content tables."""

    model: str
    n_items: int
    n_examinees: int
    replications: int
    master_seed: int
    ability_dist: str
    mean_length: float
    mean_final_se: float
    rmse: float
    bias: float
    mae: float
    pearson_r: float
    efficiency: float | None = None
    linear_mean_length: float | None = None
    max_exposure: float = 0.0
    exposure_rates: dict[str, float] = field(default_factory=dict)
    group_shares: dict[str, float] = field(default_factory=dict)
    classification: dict | None = None
    ci: dict[str, tuple[float, float]] = field(default_factory=dict)
    records: list[tuple[float, float]] | None = None  # (theta_true, theta_hat)

    def to_json(self) -> bytes:
        return json.dumps(asdict(self), sort_keys=True, indent=2).encode("utf-8")


def _recovery_metrics(true: np.ndarray, hat: np.ndarray) -> dict[str, float]:
    err = hat - true
    return {
        "rmse": float(np.sqrt(np.mean(err**2))),
        "bias": float(np.mean(err)),
        "mae": float(np.mean(np.abs(err))),
        "r": float(np.corrcoef(hat, true)[0, 1]),
    }


def classification_metrics(
    records: Iterable[tuple[float, float]],
    cutoffs: Sequence[CutoffBand],
    positive_band: str | None = None,
) -> dict:
    """Band agreement between estimated and true theta.

    Sensitivity/specificity are computed for the designated positive band
    (default: the highest band) against all others; a denominator of zero
    reports None for the affected rate.
    """
    bands = sorted(cutoffs, key=lambda band: band.lo)
    if bands[0].lo != -np.inf or bands[-1].hi != np.inf or any(
        left.hi != right.lo for left, right in zip(bands, bands[1:])
    ):
        raise ValueError("cutoff bands do not partition the real line")
    positive = positive_band if positive_band is not None else bands[-1].label
    if positive not in {band.label for band in bands}:
        raise ValueError(f"positive band {positive!r} is not a cutoff label")
    hits = tp = fn = tn = fp = total = 0
    for theta_true, theta_hat in records:
        true_band = classify(theta_true, bands)
        hat_band = classify(theta_hat, bands)
        total += 1
        hits += true_band == hat_band
        if true_band == positive:
            tp += hat_band == positive
            fn += hat_band != positive
        else:
            tn += hat_band != positive
            fp += hat_band == positive
    return {
        "accuracy": hits / total if total else None,
        "sensitivity": tp / (tp + fn) if tp + fn else None,
        "specificity": tn / (tn + fp) if tn + fp else None,
    }


def _confidence_interval(values: Sequence[float]) -> tuple[float, float] | None:
    if len(values) < 2:
        return None
    arr = np.asarray(values)
    half = 1.96 * arr.std(ddof=1) / math.sqrt(len(arr))
    return (float(arr.mean() - half), float(arr.mean() + half))


def run_condition(spec: SimulationSpec) -> SimulationReport:
    """Simulate every (replication, examinee) session and aggregate metrics."""
    config, bank = spec.config, spec.bank
    target = config.exposure_target if config.exposure_control else 1.0
    ledger = ExposureLedger.for_bank(bank, target)
    true_all: list[float] = []
    hat_all: list[float] = []
    se_all: list[float] = []
    lengths: list[int] = []
    per_rep: dict[str, list[float]] = {"rmse": [], "bias": [], "mae": [], "r": []}
    for rep in range(spec.replications):
        theta_rng = np.random.default_rng((spec.master_seed, rep, _TAG_THETA))
        thetas = sample_abilities(spec.ability_dist, spec.n_examinees, theta_rng)
        rep_true: list[float] = []
        rep_hat: list[float] = []
        for idx, theta_true in enumerate(thetas):
            response_rng = np.random.default_rng((spec.master_seed, rep, idx, _TAG_RESPONSE))
            try:
                result = run_headless_session(
                    config,
                    bank,
                    float(theta_true),
                    response_rng,
                    ledger,
                    seed=(spec.master_seed, rep, idx, _TAG_SESSION),
                    session_id=f"sim-{rep}-{idx}",
                )
            except CatlabError as exc:
                raise CatlabError(
                    f"replication {rep}, examinee {idx} (theta={theta_true:.3f}): {exc}"
                ) from exc
            hat = float(theta_true) if spec.oracle_estimator else result.final.theta
            rep_true.append(float(theta_true))
            rep_hat.append(hat)
            se_all.append(result.final.se)
            lengths.append(result.n_items)
        metrics = _recovery_metrics(np.asarray(rep_true), np.asarray(rep_hat))
        for key in per_rep:
            per_rep[key].append(metrics[key])
        true_all.extend(rep_true)
        hat_all.extend(rep_hat)
    pooled = _recovery_metrics(np.asarray(true_all), np.asarray(hat_all))
    total_administrations = sum(ledger.administrations.values())
    group_shares = {}
    for label, ids in bank.groups.items():
        count = sum(ledger.administrations.get(item_id, 0) for item_id in ids)
        group_shares[label] = count / total_administrations if total_administrations else 0.0
    report = SimulationReport(
        model=spec.model,
        n_items=len(bank),
        n_examinees=spec.n_examinees,
        replications=spec.replications,
        master_seed=spec.master_seed,
        ability_dist=spec.ability_dist,
        mean_length=float(np.mean(lengths)),
        mean_final_se=float(np.mean(se_all)),
        rmse=pooled["rmse"],
        bias=pooled["bias"],
        mae=pooled["mae"],
        pearson_r=pooled["r"],
        max_exposure=ledger.max_rate(),
        exposure_rates={i: ledger.exposure_rate(i) for i in sorted(ledger.administrations)},
        group_shares=group_shares,
        ci={k: ci for k, v in per_rep.items() if (ci := _confidence_interval(v)) is not None},
    )
    if spec.keep_records:
        report.records = list(zip(true_all, hat_all))
    if config.cutoffs:
        report.classification = classification_metrics(
            zip(true_all, hat_all), config.cutoffs, spec.positive_band
        )
    if spec.linear_comparator:
        report.linear_mean_length = linear_comparator(spec, config.min_sem)
        report.efficiency = 1.0 - report.mean_length / report.linear_mean_length
    return report


def linear_comparator(spec: SimulationSpec, target_sem: float) -> float:
    """Mean test length of a fixed-order linear test stopped at target_sem.

    The item order is one seeded-random permutation shared by every examinee;
    each item is administered before the stopping check, so even an infinite
    target yields length 1. Estimation matches the adaptive runs.
    """
    config, bank = spec.config, spec.bank
    order = np.random.default_rng((spec.master_seed, _TAG_LINEAR)).permutation(len(bank))
    lengths: list[int] = []
    for rep in range(spec.replications):
        theta_rng = np.random.default_rng((spec.master_seed, rep, _TAG_THETA))
        thetas = sample_abilities(spec.ability_dist, spec.n_examinees, theta_rng)
        for idx, theta_true in enumerate(thetas):
            response_rng = np.random.default_rng((spec.master_seed, rep, idx, _TAG_RESPONSE))
            items: list[ItemParameters] = []
            responses: list[Response] = []
            for position in order:
                item = bank.items[int(position)]
                items.append(item)
                responses.append(simulate_examinee_response(item, float(theta_true), response_rng))
                estimate = estimate_for(config, items, responses)
                if estimate.se <= target_sem:
                    break
            lengths.append(len(responses))
    return float(np.mean(lengths))


def retest_correlation(spec: SimulationSpec) -> float:
    """Correlation between theta estimates from two independent CAT runs per
    examinee (one interpretation of retest reliability; the protocol is not
    standardized)."""
    config, bank = spec.config, spec.bank
    first: list[float] = []
    second: list[float] = []
    for rep in range(spec.replications):
        theta_rng = np.random.default_rng((spec.master_seed, rep, _TAG_THETA))
        thetas = sample_abilities(spec.ability_dist, spec.n_examinees, theta_rng)
        for idx, theta_true in enumerate(thetas):
            estimates = []
            for round_tag in (0, 1):
                ledger = ExposureLedger.for_bank(bank)
                rng = np.random.default_rng((spec.master_seed, rep, idx, _TAG_RETEST + round_tag))
                result = run_headless_session(
                    config, bank, float(theta_true), rng, ledger,
                    seed=(spec.master_seed, rep, idx, _TAG_RETEST + 10 + round_tag),
                )
                estimates.append(result.final.theta)
            first.append(estimates[0])
            second.append(estimates[1])
    return float(np.corrcoef(first, second)[0, 1])


# ---------------------------------------------------------------------------
# Report emission.


def _format_cell(value: float | None) -> str:
    return "" if value is None else f"{value:.12g}"


def emit_report(
    reports: SimulationReport | Sequence[SimulationReport], format: str = "table"
) -> bytes:
    """Render one or more condition reports; column order is fixed."""
    if isinstance(reports, SimulationReport):
        reports = [reports]
    if format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for report in reports:
            writer.writerow(
                [
                    report.model,
                    report.n_items,
                    _format_cell(report.mean_length),
                    _format_cell(report.rmse),
                    _format_cell(report.bias),
                    _format_cell(report.pearson_r),
                    _format_cell(report.efficiency),
                ]
            )
        return out.getvalue().encode("utf-8")
    if format == "table":
        header = ["Model", "N Items", "Length", "RMSE", "Bias", "r", "Efficiency"]
        rows = [
            [
                report.model,
                str(report.n_items),
                f"{report.mean_length:.1f}",
                f"{report.rmse:.3f}",
                f"{report.bias:+.3f}",
                f"{report.pearson_r:.3f}",
                "-" if report.efficiency is None else f"{report.efficiency * 100:.1f}%",
            ]
            for report in reports
        ]
        widths = [max(len(header[col]), *(len(row[col]) for row in rows)) for col in range(len(header))]
        lines = [
            "  ".join(header[col].ljust(widths[col]) for col in range(len(header))),
            "  ".join("-" * widths[col] for col in range(len(header))),
        ]
        lines += ["  ".join(row[col].ljust(widths[col]) for col in range(len(header))) for row in rows]
        return ("\n".join(lines) + "\n").encode("utf-8")
    if format == "json":
        docs = [asdict(report) for report in reports]
        return json.dumps(docs[0] if len(docs) == 1 else docs, sort_keys=True, indent=2).encode("utf-8")
    raise ValueError(f"unknown report format {format!r}")


def parse_report_csv(data: bytes) -> list[dict]:
    """Read an emitted csv back into numeric row dicts."""
    reader = csv.DictReader(io.StringIO(data.decode("utf-8")))
    rows = []
    for raw in reader:
        rows.append(
            {
                "model": raw["model"],
                "n_items": int(raw["n_items"]),
                "length": float(raw["length"]),
                "rmse": float(raw["rmse"]),
                "bias": float(raw["bias"]),
                "r": float(raw["r"]),
                "efficiency": float(raw["efficiency"]) if raw["efficiency"] else None,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Spec files and the command line.


_SPEC_KEYS = {
    "model", "bank", "config", "n_examinees", "replications", "master_seed",
    "ability_dist", "oracle_estimator", "linear_comparator", "positive_band",
}
_BANK_KEYS = {
    "file", "n_items", "seed", "n_categories", "a_log_mean", "a_log_sd",
    "a_range", "b_sd", "b_range", "c_range", "group_labels", "name",
}


def _resolve_bank(doc: Mapping, model: str, base_dir: Path | None) -> ItemBank:
    unknown = set(doc) - _BANK_KEYS
    if unknown:
        raise ValueError(f"unknown bank keys: {sorted(unknown)}")
    if "file" in doc:
        path = Path(doc["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_bank_file(path)
    if "n_items" not in doc or "seed" not in doc:
        raise ValueError("bank needs either a file or n_items + seed")
    kwargs = {k: doc[k] for k in doc if k not in ("file", "n_items", "seed")}
    for key in ("a_range", "b_range", "c_range"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return generate_bank(model, int(doc["n_items"]), int(doc["seed"]), **kwargs)


def spec_from_dict(doc: Mapping, base_dir: Path | None = None) -> SimulationSpec:
    """Resolve a spec document; raises ValueError listing every problem."""
    unknown = set(doc) - _SPEC_KEYS
    if unknown:
        raise ValueError(f"unknown spec keys: {sorted(unknown)}")
    problems = [key for key in ("model", "bank", "config", "n_examinees", "master_seed") if key not in doc]
    if problems:
        raise ValueError(f"spec is missing required keys: {problems}")
    model = doc["model"]
    bank = _resolve_bank(doc["bank"], model, base_dir)
    config = config_from_dict(doc["config"])
    violations = validate_config(config, bank)
    if violations:
        raise ValueError("invalid config: " + "; ".join(violations))
    dist = doc.get("ability_dist", "normal")
    if dist not in ABILITY_DISTRIBUTIONS:
        raise ValueError(f"unknown ability distribution {dist!r}")
    n_examinees = int(doc["n_examinees"])
    replications = int(doc.get("replications", 1))
    if n_examinees < 1 or replications < 1:
        raise ValueError("n_examinees and replications must be positive")
    return SimulationSpec(
        model=model,
        bank=bank,
        config=config,
        n_examinees=n_examinees,
        replications=replications,
        master_seed=int(doc["master_seed"]),
        ability_dist=dist,
        oracle_estimator=bool(doc.get("oracle_estimator", False)),
        linear_comparator=bool(doc.get("linear_comparator", False)),
        positive_band=doc.get("positive_band"),
    )


def load_spec(path: str | Path) -> SimulationSpec:
    path = Path(path)
    return spec_from_dict(json.loads(path.read_text()), base_dir=path.parent)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simlab", description="Monte Carlo CAT simulation lab")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one simulation condition")
    run.add_argument("--spec", required=True, help="json spec file")
    run.add_argument("--seed", type=int, default=None, help="override the master seed")
    run.add_argument("--out", default=None, help="directory for report files")
    run.add_argument("--format", choices=["csv", "table"], default="table")
    compare = sub.add_parser("compare", help="adaptive vs linear efficiency run")
    compare.add_argument("--adaptive", required=True, help="json spec file for the adaptive run")
    compare.add_argument("--linear", action="store_true", help="run the linear comparator baseline")
    compare.add_argument("--target-sem", type=float, default=None, help="override the stopping SEM")
    compare.add_argument("--seed", type=int, default=None, help="override the master seed")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    spec_path = args.spec if args.command == "run" else args.adaptive
    try:
        spec = load_spec(spec_path)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        spec.master_seed = args.seed

    if args.command == "run":
        report = run_condition(spec)
        rendering = emit_report(report, args.format)
        sys.stdout.write(rendering.decode("utf-8"))
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.json").write_bytes(report.to_json())
            suffix = "csv" if args.format == "csv" else "txt"
            (out / f"report.{suffix}").write_bytes(rendering)
        return 0

    target = args.target_sem if args.target_sem is not None else spec.config.min_sem
    spec.config.min_sem = target
    report = run_condition(spec)
    print(f"adaptive mean length: {report.mean_length:.2f} (target SEM {target})")
    if args.linear:
        linear_mean = linear_comparator(spec, target)
        efficiency = 1.0 - report.mean_length / linear_mean
        print(f"linear mean length:   {linear_mean:.2f}")
        print(f"efficiency:           {efficiency * 100:.1f}% shorter")
    return 0


if __name__ == "__main__":
    sys.exit(main())
