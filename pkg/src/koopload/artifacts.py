"""Serialization of pipeline artifacts.

Matrices go to CSV (sparse ones as ``i,j,value`` triplets), metadata to
JSON. Floats are written with 17 significant digits so artifacts are
byte-stable across identical runs and value-stable through round trips.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .kernel import DelayGraph, MarkovMatrix


def fmt(x) -> str:
    return f"{float(x):.17g}"


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_triplets(matrix, path) -> None:
    """Sparse matrix as sorted ``i,j,value`` rows."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "value"])
        for k in order:
            writer.writerow([int(coo.row[k]), int(coo.col[k]), fmt(coo.data[k])])


def read_triplets(path, shape) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for i, j, v in reader:
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
    return sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()


def save_graph(graph: DelayGraph, config, q_delays: int, base: Path) -> None:
    """DelayGraph as triplet CSV of d2 plus a JSON header."""
    mat = sp.coo_matrix((graph.d2, (graph.row, graph.col)),
                        shape=(graph.n_points, graph.n_points))
    write_triplets(mat, base.with_suffix(".csv"))
    write_json({
        "n_points": graph.n_points,
        "Q": q_delays,
        "k_nn": graph.knn,
        "eps0": graph.eps0,
        "alpha": config.alpha,
        "mode": config.bandwidth_mode,
        "rho": [float(r) for r in graph.rho],
    }, base.with_suffix(".json"))


def save_markov(markov: MarkovMatrix, config, q_delays: int, eps0: float,
                base: Path) -> None:
    write_triplets(markov.P, base.with_suffix(".csv"))
    write_json({
        "n_points": markov.n_points,
        "Q": q_delays,
        "k_nn": config.knn,
        "eps0": eps0,
        "alpha": config.alpha,
        "mode": config.bandwidth_mode,
        "q": [float(v) for v in markov.q],
        "sigma": [float(v) for v in markov.sigma],
    }, base.with_suffix(".json"))


def save_basis(basis, params: dict, base: Path) -> None:
    """KoopmanBasis: JSON header plus a CSV of eigenfunction samples."""
    header = {
        "gamma": [[float(g.real), float(g.imag)] for g in basis.gamma],
        "omega_hz": [float(w) for w in basis.omega_hz],
        "energies": [float(e) for e in basis.energies],
        "pair_map": [int(p) for p in basis.pair],
        "tau_s": basis.tau,
        "params": params,
    }
    write_json(header, base.with_suffix(".json"))
    with open(base.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        cols = []
        for k in range(basis.n_modes):
            cols += [f"psi{k}_re", f"psi{k}_im"]
        writer.writerow(cols)
        for row in basis.psi:
            out = []
            for v in row:
                out += [fmt(v.real), fmt(v.imag)]
            writer.writerow(out)


def save_modes_table(basis, projection, path) -> None:
    """Per-mode frequency, energy, and per-station spatial amplitudes."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "omega_hz", "energy",
                         *[f"amp_{s}" for s in projection.station_ids]])
        for k in range(basis.n_modes):
            writer.writerow([k, fmt(basis.omega_hz[k]), fmt(basis.energies[k]),
                             *[fmt(a) for a in projection.spatial_pattern(k)]])


def save_temporal(basis, k: int, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "re", "im"])
        for n in range(basis.psi.shape[0]):
            writer.writerow([fmt(n * basis.tau), fmt(basis.psi[n, k].real),
                             fmt(basis.psi[n, k].imag)])


def save_spectrum(freq_hz, power, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_hz", "power"])
        for f, p in zip(freq_hz, power):
            writer.writerow([fmt(f), fmt(p)])


def save_forecast(timestamps, station_ids, predicted, actual, path) -> None:
    """Long-format forecast rows; actual column empty when unknown."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "station", "predicted", "actual"])
        for i, ts in enumerate(timestamps):
            for j, sid in enumerate(station_ids):
                act = fmt(actual[i, j]) if actual is not None else ""
                writer.writerow([fmt(ts), sid, fmt(predicted[i, j]), act])


def save_station_table(station_ids, values, column: str, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station", column])
        for sid, v in zip(station_ids, values):
            writer.writerow([sid, fmt(v)])


def save_matrix_csv(matrix, header, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in np.atleast_2d(matrix):
            writer.writerow([fmt(v) for v in row])


def save_phate(embedding, station_ids, path_csv, path_meta,
               mds_seed: int, kmeans_seed: int) -> None:
    m = embedding.coords.shape[1]
    with open(path_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station_id", *[f"z{j + 1}" for j in range(m)], "cluster"])
        for sid, coords, label in zip(station_ids, embedding.coords, embedding.labels):
            writer.writerow([sid, *[fmt(c) for c in coords], int(label)])
    write_json({
        "t_prime": embedding.t_prime,
        "stress": embedding.stress,
        "k": embedding.k,
        "empty_clusters": list(embedding.empty_clusters),
        "seeds": {"mds": mds_seed, "kmeans": kmeans_seed},
    }, path_meta)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
