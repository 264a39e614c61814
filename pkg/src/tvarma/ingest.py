"""Dataset ingestion, preprocessing hooks and result export.

Realisations use a long CSV layout, one row per (realization, node, time)
with an optional ``observed`` flag; empty value fields also mean missing.
Floats are written with ``repr`` so every file parses back bit-exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .simulate import MaskedRealizations


class IngestError(ValueError):
    """Malformed input file; ``rows`` lists the offending 1-based line numbers."""

    def __init__(self, message: str, rows=()):
        self.rows = list(rows)
        if self.rows:
            shown = ", ".join(map(str, self.rows[:10]))
            more = "" if len(self.rows) <= 10 else f" (+{len(self.rows) - 10} more)"
            message = f"{message} at line(s) {shown}{more}"
        super().__init__(message)


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def _parse_float(text: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise IngestError(f"cannot parse number {text!r}", [line]) from None


def _parse_int(text: str, line: int, what: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise IngestError(f"{what} must be an integer, got {text!r}", [line]) from None
    if v < 0:
        raise IngestError(f"{what} must be nonnegative", [line])
    return v


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        rows = [(i + 2, [c.strip() for c in r]) for i, r in enumerate(reader) if any(c.strip() for c in r)]
    return header, rows


def _check_contiguous(values, what):
    present = sorted(set(values))
    if present != list(range(len(present))):
        gaps = sorted(set(range(max(present) + 1)) - set(present)) if present else []
        raise IngestError(f"{what} indices must be contiguous from 0; missing {gaps[:10]}")
    return len(present)


# -- realisations -------------------------------------------------------------

REALIZATION_COLUMNS = ("realization", "node", "time", "value")


@dataclass(frozen=True)
class LoadedRealizations:
    """``values`` holds every value present in the file, imputed ones included (NaN elsewhere)."""

    obs: MaskedRealizations
    imputed: np.ndarray | None = None
    values: np.ndarray | None = None


def read_realizations_full(path) -> LoadedRealizations:
    """Parse the long CSV layout, including the optional ``imputed`` flag of filled-data exports."""
    header, rows = _read_rows(path)
    col = {h: i for i, h in enumerate(header)}
    missing = [c for c in REALIZATION_COLUMNS if c not in col]
    if missing:
        raise IngestError(f"{path}: missing column(s) {missing}; need {list(REALIZATION_COLUMNS)}")
    has_obs = "observed" in col
    has_imp = "imputed" in col
    keys, seen, dup = [], {}, []
    vals, flags, imp = [], [], []
    for line, r in rows:
        if len(r) != len(header):
            raise IngestError(f"expected {len(header)} fields, got {len(r)}", [line])
        key = (
            _parse_int(r[col["realization"]], line, "realization"),
            _parse_int(r[col["node"]], line, "node"),
            _parse_int(r[col["time"]], line, "time"),
        )
        if key in seen:
            dup.append(line)
            continue
        seen[key] = line
        text = r[col["value"]]
        observed = text != ""
        if has_obs:
            o = r[col["observed"]]
            if o not in ("0", "1"):
                raise IngestError(f"observed flag must be 0 or 1, got {o!r}", [line])
            if o == "1" and text == "":
                raise IngestError("row marked observed has an empty value", [line])
            observed = observed and o == "1"
        # unobserved values are ignored, except in filled-data exports where they are the imputations
        keep = observed or (has_imp and text != "")
        value = _parse_float(text, line) if keep else math.nan
        if keep and not math.isfinite(value):
            raise IngestError("values must be finite", [line])
        keys.append(key)
        vals.append(value)
        flags.append(observed)
        if has_imp:
            f = r[col["imputed"]]
            if f not in ("0", "1"):
                raise IngestError(f"imputed flag must be 0 or 1, got {f!r}", [line])
            imp.append(f == "1")
    if dup:
        raise IngestError("duplicate (realization, node, time) key", dup)
    if not keys:
        raise IngestError(f"{path}: no data rows")
    k = np.array(keys)
    L = _check_contiguous(k[:, 0], "realization")
    N = _check_contiguous(k[:, 1], "node")
    T = _check_contiguous(k[:, 2], "time")
    if len(keys) != L * N * T:
        per: dict = {}
        for (l, _, _), line in seen.items():
            per.setdefault(l, []).append(line)
        ragged = [l for l in range(L) if len(per[l]) != N * T]
        raise IngestError(
            f"ragged realizations {ragged}: each needs {N}x{T} = {N * T} rows", [min(per[l]) for l in ragged]
        )
    data = np.full((L, N, T), np.nan)
    masks = np.zeros((L, N, T), dtype=bool)
    data[k[:, 0], k[:, 1], k[:, 2]] = vals
    masks[k[:, 0], k[:, 1], k[:, 2]] = flags
    imputed = None
    if has_imp:
        imputed = np.zeros((L, N, T), dtype=bool)
        imputed[k[:, 0], k[:, 1], k[:, 2]] = imp
        # imputed rows carry values but were not observed originally
        values = np.where(masks | imputed, data, np.nan)
        try:
            obs = MaskedRealizations(values, masks)
        except ValueError as exc:
            raise IngestError(str(exc)) from None
        return LoadedRealizations(obs, imputed, values)
    try:
        obs = MaskedRealizations(data, masks)
    except ValueError as exc:
        raise IngestError(str(exc)) from None
    return LoadedRealizations(obs, values=np.array(obs.data))


def read_realizations(path) -> MaskedRealizations:
    return read_realizations_full(path).obs


def write_realizations(path, data: np.ndarray, masks: np.ndarray | None = None, imputed: np.ndarray | None = None) -> None:
    """Write L x N x T values in long format, rows ordered by (realization, node, time).

    With ``imputed`` given (filled-data export) every value is written and an
    ``imputed`` column flags the entries that were filled in.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 2:
        data = data[None]
    masks = np.ones(data.shape, dtype=bool) if masks is None else np.asarray(masks, dtype=bool).reshape(data.shape)
    header = list(REALIZATION_COLUMNS) + ["observed"]
    if imputed is not None:
        imputed = np.asarray(imputed, dtype=bool).reshape(data.shape)
        header.append("imputed")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for l, n, t in np.ndindex(*data.shape):
            obs = bool(masks[l, n, t])
            show = obs or (imputed is not None and imputed[l, n, t])
            row = [l, n, t, _fmt(data[l, n, t]) if show else "", int(obs)]
            if imputed is not None:
                row.append(int(imputed[l, n, t]))
            w.writerow(row)


def write_filled(path, result) -> None:
    """Export an ImputationResult: original entries flagged observed, filled entries flagged imputed."""
    write_realizations(path, result.filled, result.masks, imputed=~np.asarray(result.masks))


# -- graph inputs ----------------------------------------------------------------


def read_coordinates(path) -> np.ndarray:
    """``node_id,coord_1,...,coord_D`` with node ids 0..N-1 (any row order)."""
    header, rows = _read_rows(path)
    if not header or header[0] != "node_id" or len(header) < 2:
        raise IngestError(f"{path}: header must be node_id,coord_1,...,coord_D")
    D = len(header) - 1
    ids, coords, dup, seen = [], [], [], set()
    for line, r in rows:
        if len(r) != D + 1:
            raise IngestError(f"expected {D + 1} fields, got {len(r)}", [line])
        i = _parse_int(r[0], line, "node_id")
        if i in seen:
            dup.append(line)
            continue
        seen.add(i)
        xs = [_parse_float(c, line) for c in r[1:]]
        if not all(map(math.isfinite, xs)):
            raise IngestError("coordinates must be finite", [line])
        ids.append(i)
        coords.append(xs)
    if dup:
        raise IngestError("duplicate node_id", dup)
    N = _check_contiguous(ids, "node_id")
    out = np.empty((N, D))
    out[ids] = coords
    return out


def write_coordinates(path, points: np.ndarray) -> None:
    points = np.asarray(points, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id"] + [f"coord_{j + 1}" for j in range(points.shape[1])])
        for i, p in enumerate(points):
            w.writerow([i] + [_fmt(x) for x in p])


def read_distance_matrix(path) -> np.ndarray:
    """Square CSV of pairwise distances, no header; must be symmetric, nonnegative, zero diagonal."""
    rows = []
    with open(path, newline="") as fh:
        for line, r in enumerate(csv.reader(fh), start=1):
            if not any(c.strip() for c in r):
                continue
            rows.append((line, [_parse_float(c.strip(), line) for c in r]))
    if not rows:
        raise IngestError(f"{path}: empty distance matrix")
    N = len(rows)
    bad = [line for line, r in rows if len(r) != N]
    if bad:
        raise IngestError(f"distance matrix must be {N}x{N}", bad)
    D = np.array([r for _, r in rows])
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise IngestError("distances must be finite and nonnegative")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12 * max(1.0, D.max())):
        raise IngestError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0):
        raise IngestError("distance matrix must have a zero diagonal", [rows[i][0] for i in np.flatnonzero(np.diag(D))])
    return D


def write_distance_matrix(path, D: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in np.asarray(D, dtype=float):
            w.writerow([_fmt(x) for x in r])


# -- preprocessing hooks ----------------------------------------------------------


def moving_average(obs: MaskedRealizations, window: int) -> MaskedRealizations:
    """Trailing moving average over time, ``y_t = mean(x_{t-w+1..t})``.

    Only observed samples are averaged and the divisor is the number of them in
    the window, so the first w-1 times (edge) and gaps are renormalised rather
    than zero-padded. An entry stays missing when its whole window is missing.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    x = obs.zero_filled()
    m = obs.masks.astype(float)
    cs = np.cumsum(np.pad(x, ((0, 0), (0, 0), (1, 0))), axis=-1)
    cm = np.cumsum(np.pad(m, ((0, 0), (0, 0), (1, 0))), axis=-1)
    T = obs.T
    hi = np.arange(1, T + 1)
    lo = np.maximum(hi - window, 0)
    s = cs[..., hi] - cs[..., lo]
    c = cm[..., hi] - cm[..., lo]
    mask = c > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        y = np.where(mask, s / np.where(mask, c, 1.0), np.nan)
    return MaskedRealizations(y, mask)


@dataclass(frozen=True)
class Normalization:
    """Affine map ``(x - offset) / scale`` applied to a dataset; ``invert`` undoes it."""

    offset: float = 0.0
    scale: float = 1.0

    def apply(self, obs: MaskedRealizations) -> MaskedRealizations:
        return MaskedRealizations((obs.data - self.offset) / self.scale, obs.masks)

    def invert(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X) * self.scale + self.offset

    def to_dict(self) -> dict:
        return {"offset": self.offset, "scale": self.scale}


def fit_normalization(obs: MaskedRealizations, kind: str = "none") -> Normalization:
    """Per-dataset normalisation from observed entries: ``none``, ``zscore`` or ``maxabs``."""
    vals = obs.data[obs.masks]
    if kind == "none":
        return Normalization()
    if kind == "zscore":
        sd = float(vals.std())
        return Normalization(float(vals.mean()), sd if sd > 0 else 1.0)
    if kind == "maxabs":
        mx = float(np.abs(vals).max())
        return Normalization(0.0, mx if mx > 0 else 1.0)
    raise ValueError(f"unknown normalization {kind!r}")


# -- JSON and result tables ---------------------------------------------------------


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays, dataclass-like dicts and tuples to JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: invalid JSON ({exc.msg})", [exc.lineno]) from None


def write_table(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if isinstance(r[c], (float, np.floating)) else ("" if r[c] is None else r[c]) for c in columns])


def read_table(path, types: dict | None = None) -> list[dict]:
    """Read a CSV table written by ``write_table``; ``types`` maps column -> converter (empty -> None/NaN)."""
    header, rows = _read_rows(path)
    types = types or {}
    out = []
    for line, r in rows:
        if len(r) != len(header):
            raise IngestError(f"expected {len(header)} fields, got {len(r)}", [line])
        rec = {}
        for h, v in zip(header, r):
            conv = types.get(h)
            if conv is float:
                rec[h] = math.nan if v == "" else _parse_float(v, line)
            elif conv is int:
                rec[h] = None if v == "" else int(v)
            else:
                rec[h] = v
        out.append(rec)
    return out


RATE_COLUMNS = ["L", "mean_err", "quantile_err"]


def write_rate_study(csv_path, json_path, study, extra: dict | None = None) -> None:
    write_table(csv_path, study.to_rows(), RATE_COLUMNS)
    summary = study.summary()
    if extra:
        summary.update(extra)
    write_json(json_path, summary)


def read_rate_study(csv_path, json_path=None):
    from .theory import RateStudy

    rows = read_table(csv_path, {"L": int, "mean_err": float, "quantile_err": float})
    if json_path is None:
        L = [r["L"] for r in rows]
        from .theory import loglog_slope

        slope, icpt = loglog_slope(L, [r["mean_err"] for r in rows])
        n = len(rows)
        return RateStudy("unknown", L, [r["mean_err"] for r in rows], [math.nan] * n,
                         [r["quantile_err"] for r in rows], math.nan, slope, icpt, [0] * n, [0] * n)
    s = read_json(json_path)
    nan = lambda xs: [math.nan if x is None else x for x in xs]  # noqa: E731
    return RateStudy(
        error=s["error"],
        L_grid=[r["L"] for r in rows],
        mean=[r["mean_err"] for r in rows],
        std=nan(s["std"]),
        quantile=[r["quantile_err"] for r in rows],
        delta=s["delta"],
        slope=s["slope"],
        intercept=s["intercept"],
        n_trials=s["n_trials"],
        excluded=s["excluded"],
    )


WEIGHT_COLUMNS = ["mu_A", "mu_B", "nme"]


def write_weight_sweep(path, sweep) -> None:
    write_table(path, sweep.to_rows(), WEIGHT_COLUMNS)


def read_weight_sweep(path):
    from .pipeline import WeightSweep

    rows = read_table(path, {"mu_A": float, "mu_B": float, "nme": float})
    mA = list(dict.fromkeys(r["mu_A"] for r in rows))
    mB = list(dict.fromkeys(r["mu_B"] for r in rows))
    table = np.full((len(mA), len(mB)), np.nan)
    for r in rows:
        table[mA.index(r["mu_A"]), mB.index(r["mu_B"])] = r["nme"]
    return WeightSweep(mA, mB, table, {})


ORDER_COLUMNS = ["P", "K", "Q", "M", "d", "L", "mean_jpsd_rel", "L_required"]


def order_sweep_rows(rows) -> list[dict]:
    out = []
    for r in rows:
        P, K, Q, M = r.orders.as_tuple()
        for L, m in zip(r.L_grid, r.mean_jpsd_rel):
            out.append({"P": P, "K": K, "Q": Q, "M": M, "d": r.d, "L": L, "mean_jpsd_rel": float(m), "L_required": r.L_required})
    return out


def write_order_sweep(path, rows) -> None:
    write_table(path, order_sweep_rows(rows), ORDER_COLUMNS)


def read_order_sweep(path) -> list[dict]:
    types = {c: int for c in ORDER_COLUMNS}
    types["mean_jpsd_rel"] = float
    return read_table(path, types)
