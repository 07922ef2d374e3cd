"""Bundle writers: deterministic CSV artifacts, plot data, and rendered figures.

Every file is written with fixed row order, ``\\n`` newlines, and
shortest-roundtrip float formatting, so byte-identical inputs produce
byte-identical bundles regardless of worker count or wall-clock.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .coherent import CoherentFamily, PairResult  # noqa: E402
from .experiments import ExperimentResult  # noqa: E402
from .grid import BoxSet  # noqa: E402

__all__ = ["write_bundle", "write_summary", "emit_plotdata", "SUMMARY_SCHEMA_VERSION",
           "read_summary", "PLOTDATA_FIGURES"]

SUMMARY_SCHEMA_VERSION = 1


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_rows(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary(path: Path, items: list[tuple[str, object]],
                  config_items: list[tuple[str, object]]) -> None:
    rows = [("schema_version", SUMMARY_SCHEMA_VERSION)]
    rows += [(f"config_{k}", v) for k, v in config_items]
    rows += list(items)
    _write_rows(path, ["key", "value"], rows)


def read_summary(path) -> dict[str, str]:
    out: dict[str, str] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line in lines[1:]:
        key, _, value = line.partition(",")
        out[key] = value
    return out


def _write_vector(path: Path, values: np.ndarray) -> None:
    _write_rows(path, ["box", "value"], enumerate(values))


def _write_boxset_flags(path: Path, boxset: BoxSet) -> None:
    mask = boxset.mask()
    _write_rows(path, ["box", "in_set"], ((i, int(v)) for i, v in enumerate(mask)))


def _write_indices(path: Path, boxset: BoxSet) -> None:
    _write_rows(path, ["box"], ((i,) for i in boxset.indices))


def _time_tag(t: float) -> str:
    return str(int(t)) if float(t) == int(t) else str(float(t)).replace(".", "p")


def _write_pair(outdir: Path, tag: str, pair: PairResult) -> None:
    _write_rows(outdir / f"threshold_curve_{tag}.csv",
                ["c", "measure", "rho"],
                zip(pair.scan.thresholds, pair.scan.measures, pair.scan.rhos))
    _write_boxset_flags(outdir / f"pair_{tag}_src.csv", pair.src)
    _write_boxset_flags(outdir / f"pair_{tag}_dst.csv", pair.dst)


def _write_family(outdir: Path, tag: str, fam: CoherentFamily) -> None:
    _write_rows(outdir / f"family_{tag}.csv",
                ["k", "c", "measure", "rho"],
                ((k, fam.thresholds[k], fam.sets[k].measure,
                  fam.rho[k] if k < len(fam.rho) else "")
                 for k in range(len(fam.sets))))
    for k, s in enumerate(fam.sets):
        _write_boxset_flags(outdir / f"family_{tag}_set_{k}.csv", s)


def write_bundle(result: ExperimentResult, outdir, figures: bool = True) -> Path:
    """Write an experiment's artifacts under ``outdir`` and return that path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    art = result.artifacts
    if "modes" in art:
        approx = art["modes"]
        _write_rows(outdir / "amplitudes.csv",
                    ["mode", "singular_value", "amplitude"],
                    ((j + 1, approx.spectral.singular_values[j], approx.amplitudes[j])
                     for j in range(approx.k)))
        for t in approx.times:
            for j in range(approx.k):
                _write_vector(outdir / f"mode{j + 1}_t{_time_tag(t)}.csv",
                              approx.vectors[t][:, j])
    if "eigenvalues" in art:
        _write_rows(outdir / "eigenvalues.csv", ["rank", "real", "imag"],
                    ((j + 1, v.real, v.imag) for j, v in enumerate(art["eigenvalues"])))
    if "triple_eigenvalues" in art:
        _write_rows(outdir / "eigenvalues.csv", ["rank", "real", "imag"],
                    ((j + 1, v.real, v.imag)
                     for j, v in enumerate(art["triple_eigenvalues"])))
    if "f2" in art:
        _write_vector(outdir / "f2.csv", art["f2"])
    if "f2_positive" in art:
        _write_indices(outdir / "f2_positive.csv", art["f2_positive"])
    if "positive_sets" in art:
        for k, s in art["positive_sets"].items():
            _write_indices(outdir / f"f2_positive_{k}.csv", s)
    if "delta" in art:
        _write_rows(outdir / "delta.csv", ["N", "delta"], art["delta"])
    if "rho_curve" in art:
        measures, curve = art["rho_curve"]
        _write_rows(outdir / "rho_mean.csv", ["ell", "mean_rho"],
                    zip(measures, curve))
    if "pairs" in art:
        for direction, tag in (("+", "plus"), ("-", "minus")):
            _write_pair(outdir, tag, art["pairs"][direction])
    if "families" in art:
        for direction, tag in (("+", "plus"), ("-", "minus")):
            _write_family(outdir, tag, art["families"][direction])
    if "independent_mode2" in art:
        _write_vector(outdir / "mode2_independent.csv", art["independent_mode2"])

    _write_rows(outdir / "checks.csv", ["check", "ok", "detail"],
                ((name, "pass" if ok else "FAIL", detail)
                 for name, ok, detail in result.checks))
    write_summary(outdir / "summary.csv", result.summary, result.config.as_items())

    if figures:
        for figure_id in _available_figures(outdir, result.config.experiment):
            try:
                emit_plotdata(outdir, figure_id, outdir, render=True)
            except FileNotFoundError:
                pass
    return outdir


# ---------------------------------------------------------------------------
# plot data + figure rendering
# ---------------------------------------------------------------------------

PLOTDATA_FIGURES = {
    "delta-n": "equivariance defect against the push depth (semilog)",
    "rho-mean": "mean retention ratio against the common measure",
    "threshold-curve": "retention ratio against the threshold, both directions",
    "mode2-profile": "second mode at every written checkpoint (1D)",
    "mode2-field": "second mode over the cylinder (2D)",
}


def _available_figures(bundle: Path, experiment: str) -> list[str]:
    if experiment == "aperiodic4":
        return ["delta-n", "rho-mean", "threshold-curve", "mode2-profile"]
    if experiment == "wave2d":
        return ["threshold-curve", "mode2-field"]
    return ["mode2-profile"]


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return header, data


def emit_plotdata(bundle_dir, figure_id: str, out_dir=None, render: bool = True) -> list[Path]:
    """Reformat one figure's data as whitespace-delimited text, optionally rendered.

    Outputs ``<figure-id>.dat`` (plus companions for multi-series figures) and
    ``<figure-id>.png`` next to it.  Data files are bit-stable across runs
    with the same bundle.
    """
    bundle = Path(bundle_dir)
    out = Path(out_dir) if out_dir is not None else bundle
    out.mkdir(parents=True, exist_ok=True)
    if figure_id not in PLOTDATA_FIGURES:
        raise ValueError(f"unknown figure id {figure_id!r}; "
                         f"choose from {', '.join(sorted(PLOTDATA_FIGURES))}")
    written: list[Path] = []

    def emit(name: str, columns: list[np.ndarray]) -> Path:
        path = out / name
        rows = zip(*columns)
        path.write_text("\n".join(" ".join(_fmt(v) for v in row) for row in rows) + "\n",
                        encoding="utf-8")
        written.append(path)
        return path

    if figure_id == "delta-n":
        _, data = _read_csv(bundle / "delta.csv")
        emit("delta-n.dat", [data[:, 0], data[:, 1]])
        if render:
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.semilogy(data[:, 0], data[:, 1], "o-")
            ax.set_xlabel("push depth")
            ax.set_ylabel("equivariance defect")
            written.append(_save(fig, out / "delta-n.png"))
    elif figure_id == "rho-mean":
        _, data = _read_csv(bundle / "rho_mean.csv")
        emit("rho-mean.dat", [data[:, 0], data[:, 1]])
        if render:
            fig, ax = plt.subplots(figsize=(6, 4))
            half = data[:, 0] <= 0.5
            ax.plot(data[half, 0], data[half, 1], color="tab:red", label="superlevel")
            ax.plot(data[~half, 0], data[~half, 1], color="tab:blue", label="sublevel")
            ax.set_xlabel("common measure")
            ax.set_ylabel("mean retention ratio")
            ax.legend()
            written.append(_save(fig, out / "rho-mean.png"))
    elif figure_id == "threshold-curve":
        series = []
        for tag in ("plus", "minus"):
            _, data = _read_csv(bundle / f"threshold_curve_{tag}.csv")
            emit(f"threshold-curve-{tag}.dat", [data[:, 0], data[:, 1], data[:, 2]])
            series.append((tag, data))
        if render:
            fig, ax = plt.subplots(figsize=(6, 4))
            for (tag, data), color in zip(series, ("black", "grey")):
                ax.plot(data[:, 0], data[:, 2], color=color, label=tag)
            ax.set_xlabel("threshold")
            ax.set_ylabel("retention ratio")
            ax.legend()
            written.append(_save(fig, out / "threshold-curve.png"))
    elif figure_id == "mode2-profile":
        profiles = sorted(bundle.glob("mode2_t*.csv"))
        if not profiles:
            raise FileNotFoundError("no second-mode checkpoint files in bundle")
        datas = []
        for path in profiles:
            _, data = _read_csv(path)
            n = data.shape[0]
            centers = (data[:, 0] + 0.5) / n
            emit(path.stem + ".dat", [centers, data[:, 1]])
            datas.append((path.stem, centers, data[:, 1]))
        if render:
            fig, axes = plt.subplots(len(datas), 1, figsize=(6, 1.8 * len(datas)),
                                     sharex=True, squeeze=False)
            for ax, (stem, centers, values) in zip(axes[:, 0], datas):
                ax.plot(centers, values, lw=1)
                ax.axhline(0.0, color="k", lw=0.5)
                ax.set_ylabel(stem.split("_t")[-1])
            axes[-1, 0].set_xlabel("position")
            written.append(_save(fig, out / "mode2-profile.png"))
    elif figure_id == "mode2-field":
        path = bundle / "mode2_t0.csv"
        if not path.exists():
            raise FileNotFoundError(f"{path} missing from bundle")
        summary = read_summary(bundle / "summary.csv")
        nx, ny = (int(v) for v in summary["config_boxes"].split("x"))
        _, data = _read_csv(path)
        values = data[:, 1]
        xs = (np.arange(nx) + 0.5) * (2.0 * np.pi / nx)
        ys = (np.arange(ny) + 0.5) * (np.pi / ny)
        xc = np.tile(xs, ny)
        yc = np.repeat(ys, nx)
        emit("mode2-field.dat", [xc, yc, values])
        if render:
            fig, ax = plt.subplots(figsize=(8, 4))
            field = values.reshape(ny, nx)
            im = ax.imshow(field, origin="lower", extent=(0, 2 * np.pi, 0, np.pi),
                           aspect="auto", cmap="RdBu_r")
            fig.colorbar(im, ax=ax, label="mode value")
            ax.set_xlabel("x")
            ax.set_ylabel("y")
            written.append(_save(fig, out / "mode2-field.png"))
    return written


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
