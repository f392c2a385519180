"""Writers for experiment and comparison records: one JSON summary plus flat CSV tables."""
import csv
import logging
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from robust_game.errors import ConfigurationError, InputError
from robust_game.schemas.record import ComparisonRecord, ExperimentRecord

logger = logging.getLogger(__name__)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _flat(matrix) -> list[float]:
    return [v for row in matrix for v in row]


def _gain_header(prefix: str, matrix) -> list[str]:
    return [f"{prefix}_{i + 1}{j + 1}" for i, row in enumerate(matrix) for j in range(len(row))]


def export_record(record: ExperimentRecord, path: Union[Path, str]) -> Path:
    """
    Write summary.json, gains.csv, volume.csv, polytopes/iter_j.json and trajectory.csv.

    Output is byte-identical for identical records.

    Raises:
        InputError: If the output directory cannot be written
    """
    out = Path(path)
    try:
        (out / "polytopes").mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(record.model_dump_json(indent=2))

        if record.iterations:
            first = record.iterations[0].K1
            header = ["iteration", "time"] + _gain_header("K1", first)
            star = record.terminal.K1_star if record.terminal is not None else None
            if star is not None:
                header += _gain_header("K1_star", star)
            rows = []
            for it in record.iterations:
                row = [it.iteration, it.time] + _flat(it.K1)
                if star is not None:
                    row += _flat(star)
                rows.append(row)
        else:
            header, rows = ["iteration", "time"], []
        _write_csv(out / "gains.csv", header, rows)

        _write_csv(
            out / "volume.csv",
            ["iteration", "volume", "volume_raw", "volume_stderr", "n_vertices", "n_constraints"],
            [[it.iteration, it.volume, it.volume_raw, it.volume_stderr, it.n_vertices, it.n_constraints]
             for it in record.iterations],
        )

        for it in record.iterations:
            (out / "polytopes" / f"iter_{it.iteration}.json").write_text(it.polytope.model_dump_json(indent=2))

        traj = record.trajectory
        if traj is not None and traj.times:
            nx, nu1, nu2 = len(traj.states[0]), len(traj.u1[0]), len(traj.u2[0])
            header = (["t"] + [f"x{i + 1}" for i in range(nx)] + [f"u1_{i + 1}" for i in range(nu1)]
                      + [f"u2_{i + 1}" for i in range(nu2)] + [f"w_{i + 1}" for i in range(nx)])
            rows = [[t] + x + u1 + u2 + w for t, x, u1, u2, w in zip(traj.times, traj.states, traj.u1, traj.u2, traj.w)]
            _write_csv(out / "trajectory.csv", header, rows)
    except OSError as e:
        raise InputError(f"Cannot write results to {out}: {e}") from e

    logger.info("Wrote %d iterations to %s", len(record.iterations), out)
    return out


def export_comparison(record: ComparisonRecord, path: Union[Path, str]) -> Path:
    """
    Write comparison.json and traces.csv (time, then x1 per vertex under each gain).

    Raises:
        InputError: If the output directory cannot be written
    """
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.json").write_text(record.model_dump_json(indent=2))
        n_v = len(record.robust_traces)
        header = ["t"] + [f"robust_v{k + 1}" for k in range(n_v)] + [f"ls_v{k + 1}" for k in range(n_v)]
        rows = []
        for k, t in enumerate(record.trace_times):
            rows.append([t] + [tr[k] for tr in record.robust_traces] + [tr[k] for tr in record.ls_traces])
        _write_csv(out / "traces.csv", header, rows)
    except OSError as e:
        raise InputError(f"Cannot write results to {out}: {e}") from e
    return out


def load_record(path: Union[Path, str]) -> ExperimentRecord:
    """
    Parse a summary.json (or a directory holding one) back into a record.

    Raises:
        ConfigurationError: If the file is missing or does not validate
    """
    path = Path(path)
    if path.is_dir():
        path = path / "summary.json"
    try:
        return ExperimentRecord.model_validate_json(path.read_text())
    except FileNotFoundError as e:
        raise ConfigurationError(f"Record file not found: {path}") from e
    except ValidationError as e:
        raise ConfigurationError(f"Invalid record {path}: {e}") from e
