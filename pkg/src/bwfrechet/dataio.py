"""Reading and writing datasets and result files.

Two dataset layouts are supported: a single JSON document, and a tabular
directory holding ``meta.json``, ``covariates.csv`` and ``responses.csv``
with responses in long (sample_id, row, col, value) form, 0-based indices.
Off-diagonal response entries may be given once (the mirror entry is
completed) or twice (the two values must agree); missing or contradictory
entries are rejected with the offending sample named.

All files are written without timestamps so byte-identical inputs and
settings produce byte-identical outputs.
"""

import csv
import hashlib
import json
import os

import numpy as np

from .errors import InvalidInputError
from .frechet import Dataset

DATASET_FORMAT = "bwfrechet-dataset"
RESULT_FORMAT = "bwfrechet-result"
FORMAT_VERSION = 1

_META_NAME = "meta.json"
_COV_NAME = "covariates.csv"
_RESP_NAME = "responses.csv"


def _float_cell(value):
    return repr(float(value))


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path} is not valid JSON: {exc}") from None


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_dataset(path, data, fmt="json", metadata=None):
    """Write a dataset as one JSON file or as a tabular directory.

    ``fmt`` is "json" or "tabular"; for "tabular", ``path`` names a
    directory that is created if needed.
    """
    metadata = dict(metadata or {})
    if fmt == "json":
        payload = {
            "format": DATASET_FORMAT,
            "version": FORMAT_VERSION,
            "n": data.n,
            "p": data.p,
            "p1": data.p1,
            "d": data.d,
            "covariates": [[float(v) for v in row] for row in data.covariates],
            "responses": [
                [[float(v) for v in row] for row in mat] for mat in data.responses
            ],
            "metadata": metadata,
        }
        _write_json(path, payload)
        return
    if fmt != "tabular":
        raise InvalidInputError(f"unknown dataset format {fmt!r}")

    os.makedirs(path, exist_ok=True)
    meta = {
        "format": DATASET_FORMAT,
        "version": FORMAT_VERSION,
        "layout": "tabular",
        "n": data.n,
        "p": data.p,
        "p1": data.p1,
        "d": data.d,
        "metadata": metadata,
    }
    _write_json(os.path.join(path, _META_NAME), meta)

    with open(os.path.join(path, _COV_NAME), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id"] + [f"x_{j + 1}" for j in range(data.p)])
        for i, row in enumerate(data.covariates):
            writer.writerow([i] + [_float_cell(v) for v in row])

    with open(os.path.join(path, _RESP_NAME), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "row", "col", "value"])
        for i, mat in enumerate(data.responses):
            for r in range(data.d):
                for c in range(r, data.d):
                    writer.writerow([i, r, c, _float_cell(mat[r, c])])


def _require_keys(payload, keys, where):
    missing = [k for k in keys if k not in payload]
    if missing:
        raise InvalidInputError(f"{where}: missing keys {missing}")


def _check_header(payload, where):
    if payload.get("format") != DATASET_FORMAT:
        raise InvalidInputError(
            f"{where}: format is {payload.get('format')!r}, expected {DATASET_FORMAT!r}"
        )
    if payload.get("version") != FORMAT_VERSION:
        raise InvalidInputError(
            f"{where}: unsupported version {payload.get('version')!r}"
        )


def _precheck_responses(responses, sample_ids, where):
    vals = np.linalg.eigvalsh(responses)
    bad = vals[:, 0] <= 1e-10 * np.maximum(vals[:, -1], 0.0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise InvalidInputError(
            f"{where}: response for sample {sample_ids[i]} is not positive definite "
            f"(minimum eigenvalue {vals[i, 0]:.6g})"
        )


def _load_json_dataset(path, p1_override):
    payload = _read_json(path)
    _check_header(payload, path)
    _require_keys(payload, ["n", "p", "p1", "d", "covariates", "responses"], path)
    try:
        covariates = np.asarray(payload["covariates"], dtype=float)
        responses = np.asarray(payload["responses"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{path}: malformed arrays: {exc}") from None
    n, p, d = int(payload["n"]), int(payload["p"]), int(payload["d"])
    if covariates.shape != (n, p):
        raise InvalidInputError(
            f"{path}: covariates shape {covariates.shape} does not match n={n}, p={p}"
        )
    if responses.shape != (n, d, d):
        raise InvalidInputError(
            f"{path}: responses shape {responses.shape} does not match n={n}, d={d}"
        )
    p1 = int(payload["p1"]) if p1_override is None else int(p1_override)
    if not np.all(np.isfinite(responses)):
        raise InvalidInputError(f"{path}: responses contain non-finite values")
    _precheck_responses(0.5 * (responses + responses.transpose(0, 2, 1)), list(range(n)), path)
    return Dataset(covariates=covariates, responses=responses, p1=p1)


def _read_csv_rows(path, expected_header):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    if rows[0] != expected_header:
        raise InvalidInputError(
            f"{path}: header {rows[0]} does not match expected {expected_header}"
        )
    return rows[1:]


def _load_tabular_dataset(path, p1_override):
    meta_path = os.path.join(path, _META_NAME)
    meta = _read_json(meta_path)
    _check_header(meta, meta_path)
    _require_keys(meta, ["n", "p", "p1", "d"], meta_path)
    n, p, d = int(meta["n"]), int(meta["p"]), int(meta["d"])
    p1 = int(meta["p1"]) if p1_override is None else int(p1_override)

    cov_path = os.path.join(path, _COV_NAME)
    header = ["sample_id"] + [f"x_{j + 1}" for j in range(p)]
    rows = _read_csv_rows(cov_path, header)
    if len(rows) != n:
        raise InvalidInputError(f"{cov_path}: expected {n} rows, found {len(rows)}")
    sample_ids = []
    covariates = np.empty((n, p))
    seen = set()
    for i, row in enumerate(rows):
        if len(row) != p + 1:
            raise InvalidInputError(f"{cov_path}: row {i + 2} has {len(row)} fields, expected {p + 1}")
        try:
            sid = int(row[0])
            covariates[i] = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise InvalidInputError(f"{cov_path}: row {i + 2}: {exc}") from None
        if sid in seen:
            raise InvalidInputError(f"{cov_path}: duplicate sample_id {sid}")
        seen.add(sid)
        sample_ids.append(sid)
    id_to_index = {sid: i for i, sid in enumerate(sample_ids)}

    resp_path = os.path.join(path, _RESP_NAME)
    rows = _read_csv_rows(resp_path, ["sample_id", "row", "col", "value"])
    responses = np.full((n, d, d), np.nan)
    explicit = set()
    for line_no, row in enumerate(rows, start=2):
        if len(row) != 4:
            raise InvalidInputError(f"{resp_path}: row {line_no} has {len(row)} fields, expected 4")
        try:
            sid, r, c = int(row[0]), int(row[1]), int(row[2])
            value = float(row[3])
        except ValueError as exc:
            raise InvalidInputError(f"{resp_path}: row {line_no}: {exc}") from None
        if sid not in id_to_index:
            raise InvalidInputError(f"{resp_path}: row {line_no}: unknown sample_id {sid}")
        if not (0 <= r < d and 0 <= c < d):
            raise InvalidInputError(
                f"{resp_path}: row {line_no}: index ({r}, {c}) outside [0, {d})"
            )
        i = id_to_index[sid]
        existing = responses[i, r, c]
        if not np.isnan(existing):
            tol = 1e-12 * max(abs(existing), abs(value), 1.0)
            if abs(existing - value) > tol:
                # a conflicting value may come from a repeat of this entry or
                # through the mirror of the transposed one
                if (i, r, c) in explicit:
                    raise InvalidInputError(
                        f"sample {sid}: entry ({r}, {c}) given twice with "
                        f"different values {float(existing)!r} and {value!r}"
                    )
                raise InvalidInputError(
                    f"sample {sid}: entries ({r}, {c}) and ({c}, {r}) disagree: "
                    f"{value!r} vs {float(existing)!r}"
                )
        responses[i, r, c] = value
        explicit.add((i, r, c))
        if np.isnan(responses[i, c, r]):
            responses[i, c, r] = value

    for i, sid in enumerate(sample_ids):
        if np.isnan(responses[i]).any():
            r, c = np.argwhere(np.isnan(responses[i]))[0]
            raise InvalidInputError(f"sample {sid}: missing response entry ({r}, {c})")

    _precheck_responses(responses, sample_ids, resp_path)
    return Dataset(covariates=covariates, responses=responses, p1=p1)


def load_dataset(path, p1=None):
    """Load a dataset written by :func:`write_dataset`.

    A directory is read as the tabular layout, a file as JSON. Pass ``p1``
    to override the retained-block size recorded in the file.
    """
    if os.path.isdir(path):
        return _load_tabular_dataset(path, p1)
    return _load_json_dataset(path, p1)


def dataset_checksum(path):
    """SHA-256 hex digest of a dataset file, or of a tabular directory's files."""
    digest = hashlib.sha256()
    if os.path.isdir(path):
        names = [_META_NAME, _COV_NAME, _RESP_NAME]
        for name in names:
            full = os.path.join(path, name)
            try:
                with open(full, "rb") as fh:
                    digest.update(fh.read())
            except OSError as exc:
                raise InvalidInputError(f"cannot read {full}: {exc}") from None
        return digest.hexdigest()
    try:
        with open(path, "rb") as fh:
            digest.update(fh.read())
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from None
    return digest.hexdigest()


def write_result(path, kind, body):
    """Write a result document: a typed JSON envelope around ``body``."""
    payload = {"format": RESULT_FORMAT, "version": FORMAT_VERSION, "kind": kind}
    payload.update(body)
    _write_json(path, payload)


def load_result(path):
    payload = _read_json(path)
    if payload.get("format") != RESULT_FORMAT:
        raise InvalidInputError(
            f"{path}: format is {payload.get('format')!r}, expected {RESULT_FORMAT!r}"
        )
    if payload.get("version") != FORMAT_VERSION:
        raise InvalidInputError(f"{path}: unsupported version {payload.get('version')!r}")
    return payload


def test_result_body(result, input_sha256=None):
    """JSON-ready dictionary for a partial-effect test result."""
    body = {
        "statistic": float(result.statistic),
        "p_value": float(result.p_value),
        "quantile": float(result.quantile),
        "reject": bool(result.reject),
        "alpha": float(result.alpha),
        "mc_draws": int(result.mc_draws),
        "seed": int(result.seed),
        "eigenvalues": [float(v) for v in result.eigenvalues],
        "diagnostics": {
            "n1": result.diagnostics.n1,
            "n2": result.diagnostics.n2,
            "n_fits": result.diagnostics.n_fits,
            "nonconverged": result.diagnostics.nonconverged,
            "min_hessian_eigenvalue": float(result.diagnostics.min_hessian_eigenvalue),
            "adjustment_dropped_modes": result.diagnostics.adjustment_dropped_modes,
        },
    }
    if input_sha256 is not None:
        body["input_sha256"] = input_sha256
    return body


def write_table(path, header, rows):
    """Write a CSV table with plain repr formatting for floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            out = []
            for cell in row:
                if isinstance(cell, float):
                    out.append(_float_cell(cell))
                else:
                    out.append(cell)
            writer.writerow(out)
