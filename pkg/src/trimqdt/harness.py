"""Command-line harness: configuration, bundled data, tasks, and comparison
reports.

Tasks (subcommands):

- ``ion-levels``   solve ion rovibrational levels on a potential surface
- ``p-levels``     neutral n=3 p-wave levels from a defect parameter file
- ``d-levels``     neutral d-wave levels from multipole constants
- ``channels``     dump channel sets, thresholds and lab-frame matrices
- ``compare``      match two level files and report difference statistics
- ``fit-defects``  fit defect-surface coefficients to a sample table

All tasks read a JSON config (``--config``) and write deterministic text
artifacts into ``--out``: a levels (or parameters) file, a report file, and
a run log.  File paths inside configs may use the prefix ``bundled:`` to
reference packaged data.  Exit codes: 0 ok, 1 comparison over tolerance,
2 error (a machine-readable JSON error record is printed to stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__, geom, qdefect
from .frametrans import (LabChannel, build_rot_channels, load_ion_levels,
                         tilde_terms, transform_constant_surface,
                         transform_rotational_only, unitarity_check)
from .ionbasis import SplineBasis
from .ionsolver import (DvrGrid, HyperangularBlock, assign_labels,
                        solve_block)
from .longrange import k_body_longrange, load_multipole
from .mqdtsolve import find_levels
from .pes import load_pes, validate_s3_symmetry
from .qdefect import MuSurfaceParams, k_from_mu, load_params, mu_body
from .units import HARTREE_TO_INVCM, cm_to_hartree


class ConfigError(Exception):
    pass


def bundled_path(name: str) -> Path:
    return Path(resources.files("trimqdt.data") / name)


def resolve_path(value: str, base: Path) -> Path:
    if value.startswith("bundled:"):
        p = bundled_path(value[len("bundled:"):])
    else:
        p = Path(value)
        if not p.is_absolute():
            p = base / p
    if not p.exists():
        raise ConfigError(f"referenced file does not exist: {value}")
    return p


@dataclass
class RunConfig:
    task: str
    raw: dict
    base: Path
    threads: int = 1

    def path(self, key: str, default=None) -> Path | None:
        v = self.raw.get(key, default)
        if v is None:
            return None
        return resolve_path(v, self.base)

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def sha256(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path: str, task: str) -> RunConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg_task = raw.get("task", task)
    if cfg_task != task:
        raise ConfigError(
            f"config task {cfg_task!r} does not match subcommand {task!r}")
    for key in ("tolerance",):
        if raw.get(key) is not None and raw[key] <= 0:
            raise ConfigError(f"{key} must be positive")
    return RunConfig(task, raw, p.parent.resolve())


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _header_lines(cfg: RunConfig):
    return [
        "# trimqdt output",
        f"# task = {cfg.task}",
        f"# config_sha256 = {cfg.sha256}",
        f"# trimqdt = {__version__}",
        f"# numpy = {np.__version__}",
        f"# scipy = {scipy.__version__}",
    ]


class RunLog:
    def __init__(self):
        self.lines = []

    def add(self, msg: str):
        self.lines.append(msg)

    def write(self, path: Path, cfg: RunConfig):
        path.write_text("\n".join(_header_lines(cfg) + self.lines) + "\n")


def write_levels(path: Path, cfg: RunConfig, columns: str, rows):
    lines = _header_lines(cfg)
    lines.append(f"# columns = {columns}")
    lines.extend(rows)
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# reference / level file parsing for comparisons
# ---------------------------------------------------------------------------

def read_keyed_energies(path: Path, column: str = "auto"):
    """Read ``key ... energy`` rows, driven by the ``# columns = ...``
    header.

    The key is the field named "key" (or the first field).  The energy
    field is selected by ``column``: "cal" -> E_cal, "ref" -> E_ref/E_exp/
    E_fit, "auto" -> E_cm if present, else E_cal, else the last field.
    """
    rows = {}
    order = []
    fields = None
    with open(path) as fh:
        lines = fh.readlines()
    for ln in lines:
        s = ln.strip()
        if s.startswith("#"):
            if s[1:].strip().startswith("columns"):
                _, _, rest = s.partition("=")
                fields = rest.split()
            continue
    if fields is None:
        raise ValueError(f"{path} has no '# columns =' header")

    def field_index(names):
        for nm in names:
            if nm in fields:
                return fields.index(nm)
        return None

    key_idx = field_index(["key"]) or 0
    if column == "cal":
        e_idx = field_index(["E_cal"])
    elif column == "ref":
        e_idx = field_index(["E_ref", "E_exp", "E_fit"])
    else:
        e_idx = field_index(["E_cm", "E_cal"])
        if e_idx is None:
            e_idx = len(fields) - 1
    if e_idx is None:
        raise ValueError(
            f"{path} has no energy column matching {column!r}: {fields}")
    for ln in lines:
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != len(fields):
            raise ValueError(
                f"row has {len(parts)} fields, header declares "
                f"{len(fields)}: {ln!r}")
        key = parts[key_idx]
        if key in rows:
            raise ValueError(f"duplicate key {key!r} in {path}")
        rows[key] = float(parts[e_idx])
        order.append(key)
    if not rows:
        raise ValueError(f"no data rows in {path}")
    return rows, order


@dataclass
class ComparisonReport:
    mode: str
    rows: list                    # (key, E_calc, E_ref, diff)
    rms: float
    max_abs: float
    offset: float
    unmatched_calc: list = field(default_factory=list)
    unmatched_ref: list = field(default_factory=list)

    def render(self) -> str:
        out = [f"# mode = {self.mode}",
               f"# offset_applied_cm = {self.offset:.6f}",
               f"# rms_cm = {self.rms:.6f}",
               f"# max_abs_cm = {self.max_abs:.6f}",
               f"# n_rows = {len(self.rows)}",
               "# key E_calc E_ref diff"]
        for key, a, b, d in self.rows:
            out.append(f"{key} {a:.6f} {b:.6f} {d:+.6f}")
        if self.unmatched_calc:
            out.append("# unmatched computed keys: "
                       + " ".join(self.unmatched_calc))
        if self.unmatched_ref:
            out.append("# unmatched reference keys: "
                       + " ".join(self.unmatched_ref))
        return "\n".join(out) + "\n"


def compare(levels: dict, reference: dict, mode: str = "absolute",
            ref_order=None) -> ComparisonReport:
    """Difference statistics between label-matched level sets.

    Modes: ``absolute`` (raw differences), ``offset-fit`` (mean difference
    subtracted before statistics), ``differences`` (each row measured
    relative to the first matched row, in both data sets).
    """
    if mode not in ("absolute", "offset-fit", "differences"):
        raise ValueError(f"unknown comparison mode {mode!r}")
    keys = [k for k in (ref_order or reference) if k in levels]
    unmatched_ref = [k for k in reference if k not in levels]
    unmatched_calc = [k for k in levels if k not in reference]
    if not keys:
        raise ValueError("no matching labels between the two level sets")
    a = np.array([levels[k] for k in keys])
    b = np.array([reference[k] for k in keys])
    offset = 0.0
    if mode == "offset-fit":
        offset = float(np.mean(b - a))
    elif mode == "differences":
        a = a - a[0]
        b = b - b[0]
        keys = [f"{k}-{keys[0]}" for k in keys]
    diffs = a + offset - b
    rows = [(k, ai + offset, bi, di)
            for k, ai, bi, di in zip(keys, a, b, diffs)]
    if mode == "differences":
        rows = rows[1:]
        diffs = diffs[1:]
    rms = float(np.sqrt(np.mean(diffs ** 2))) if len(diffs) else 0.0
    mx = float(np.max(np.abs(diffs))) if len(diffs) else 0.0
    return ComparisonReport(mode, rows, rms, mx, offset,
                            unmatched_calc, unmatched_ref)


# ---------------------------------------------------------------------------
# neutral-level machinery shared by p-levels / d-levels / channels
# ---------------------------------------------------------------------------

def _neutral_blocks(levels_rows, l, N_values, Np_max, coriolis_sign):
    for N in N_values:
        for spin in ("ortho", "para"):
            for parity in (1, -1):
                ch = build_rot_channels(levels_rows, l, N, spin, parity,
                                        Np_max=Np_max,
                                        coriolis_sign=coriolis_sign)
                if ch:
                    yield N, spin, parity, ch


def _pi_fraction(channels, weights):
    """Share of the level's channel weights carried by |Lambda| = l body
    components (sigma/pi/... classifier for p waves)."""
    l = channels[0].l
    N = channels[0].N
    frac = 0.0
    for i, c in enumerate(channels):
        by_lam: dict = {}
        for Lam in range(-l, l + 1):
            for t in tilde_terms(c.ion.components(), l, Lam, N, c.Np):
                by_lam[Lam] = by_lam.get(Lam, 0.0) + t[0] ** 2
        tot = sum(by_lam.values())
        pi = by_lam.get(1, 0.0) + by_lam.get(-1, 0.0)
        frac += weights[i] * (pi / tot if tot > 0.0 else 0.0)
    return frac


def run_p_levels(cfg: RunConfig, outdir: Path, log: RunLog):
    params = load_params(cfg.path("defects", "bundled:defects_equilibrium.txt"))
    ion_rows = load_ion_levels(
        cfg.path("ion_levels", "bundled:ion_levels.txt"))
    s = int(cfg.get("coriolis_sign", 1))
    Np_max = int(cfg.get("Np_max", 4))
    N_values = cfg.get("N_values", [0, 1, 2, 3])
    nu_window = cfg.get("nu_window", [2.25, 3.35])
    vibrational = bool(cfg.get("vibrational", False))
    if vibrational:
        raise ConfigError(
            "vibrational p-level runs are driven through the library API "
            "(trimqdt.frametrans.transform_mu); the CLI task covers the "
            "rotational transformation of the constant defect matrix")
    mu_eq = mu_body(geom.SymCoords(0.0, 0.0, 0.0), params)
    body = {(0, 0): mu_eq[0, 0], (1, 1): mu_eq[1, 1], (-1, -1): mu_eq[2, 2],
            (1, -1): mu_eq[1, 2], (-1, 1): mu_eq[2, 1]}
    log.add(f"equilibrium defects: mu00={mu_eq[0, 0]:.4f} "
            f"mu11={mu_eq[1, 1]:.4f}")

    records = []
    for N, spin, parity, ch in _neutral_blocks(ion_rows, 1, N_values,
                                               Np_max, s):
        dev = unitarity_check(ch)
        log.add(f"block N={N} {spin} parity={parity:+d}: "
                f"{len(ch)} channels, unitarity dev {dev:.2e}")
        mu_lab = transform_constant_surface(ch, body)
        K = k_from_mu(mu_lab)
        thr = np.array([c.threshold_h for c in ch])
        lo = float(min(thr)) - 1.0 / (2.0 * nu_window[0] ** 2)
        hi = float(min(thr)) - 1.0 / (2.0 * nu_window[1] ** 2)
        levels = find_levels(K, thr, window=(lo, hi),
                             threads=cfg.threads)
        log.add(f"  found {len(levels)} levels")
        for lv in levels:
            frac = lv.nu_dominant % 1.0
            pi_like = 0.40 <= frac <= 0.80
            records.append({
                "N": N, "spin": spin, "parity": parity,
                "G": ch[lv.dominant].Kp, "E_cm": lv.energy_cm,
                "nu": lv.nu_dominant, "dom": ch[lv.dominant].label,
                "pi_like": pi_like,
                "pi_weight": _pi_fraction(ch, lv.weights),
            })
    # rank pi-like levels within each (N, G) group by energy
    records.sort(key=lambda r: (r["N"], r["G"], r["E_cm"]))
    counters: dict = {}
    rows = []
    for r in records:
        if r["pi_like"]:
            k = (r["N"], r["G"])
            rank = counters.get(k, 0)
            counters[k] = rank + 1
            key = f"{r['N']}:{r['G']}:{rank}"
        else:
            k = (r["N"], r["G"], "s")
            rank = counters.get(k, 0)
            counters[k] = rank + 1
            key = f"{r['N']}:{r['G']}:s{rank}"
        rows.append(f"{key} {r['N']} {r['spin']} {r['parity']:+d} {r['dom']} "
                    f"{r['nu']:.6f} {r['pi_weight']:.3f} {r['E_cm']:.6f}")
    write_levels(outdir / "levels.txt", cfg,
                 "key N spin parity dominant nu pi_weight E_cm", rows)
    _maybe_compare(cfg, outdir, log)
    return 0


def run_d_levels(cfg: RunConfig, outdir: Path, log: RunLog):
    mp = load_multipole(
        cfg.path("multipole", "bundled:multipole_example.txt"))
    ion_rows = load_ion_levels(
        cfg.path("ion_levels", "bundled:ion_levels.txt"))
    l = int(cfg.get("l", 2))
    n_pr = int(cfg.get("n_principal", 3))
    s = int(cfg.get("coriolis_sign", 1))
    Np_max = int(cfg.get("Np_max", 4))
    N_values = cfg.get("N_values", [0, 1, 2])
    nu_window = cfg.get("nu_window", [n_pr - 0.35, n_pr + 0.35])
    lams, Kb = k_body_longrange(n_pr, l, mp)
    log.add("body K diag: " + " ".join(
        f"{lam}:{v:+.5f}" for lam, v in zip(lams, Kb)))

    entries = []
    for N, spin, parity, ch in _neutral_blocks(ion_rows, l, N_values,
                                               Np_max, s):
        K = transform_rotational_only(lams, Kb, ch)
        thr = np.array([c.threshold_h for c in ch])
        lo = float(min(thr)) - 1.0 / (2.0 * nu_window[0] ** 2)
        hi = float(min(thr)) - 1.0 / (2.0 * nu_window[1] ** 2)
        levels = find_levels(K, thr, window=(lo, hi), threads=cfg.threads)
        log.add(f"block N={N} {spin} parity={parity:+d}: {len(ch)} channels,"
                f" {len(levels)} levels")
        for lv in levels:
            dom = ch[lv.dominant]
            entries.append((dom.Np, dom.Kp, N, spin, parity, lv))
    entries.sort(key=lambda e: (e[2], e[0], e[1], e[5].energy_h))
    seen: dict = {}
    rows = []
    for Np, Kp, N, spin, parity, lv in entries:
        base = f"{Np}:{Kp}:{N}"
        cnt = seen.get(base, 0)
        seen[base] = cnt + 1
        key = base if cnt == 0 else f"{base}:{cnt}"
        rows.append(f"{key} {N} {spin} {parity:+d} ({Np},{Kp}) "
                    f"{lv.nu_dominant:.6f} {lv.energy_cm:.6f}")
    write_levels(outdir / "levels.txt", cfg,
                 "key N spin parity dominant nu E_cm", rows)
    _maybe_compare(cfg, outdir, log)
    return 0


def run_ion_levels(cfg: RunConfig, outdir: Path, log: RunLog):
    pot = load_pes(cfg.path("pes", "bundled:model_pes.txt"))
    worst = validate_s3_symmetry(pot)
    log.add(f"surface {pot.name}: permutation-symmetry deviation {worst:.2e}")
    spline = SplineBasis(count=int(cfg.get("spline_count", 60)))
    dvr_cfg = cfg.get("dvr", {})
    grid = DvrGrid(float(dvr_cfg.get("rmin", 1.0)),
                   float(dvr_cfg.get("rmax", 12.0)),
                   int(dvr_cfg.get("n", 40)),
                   geom.H3_CONSTANTS.mu3b)
    m2_max = float(cfg.get("m2_max", 12.0))
    n_chan = int(cfg.get("n_chan", 10))
    n_states = int(cfg.get("n_states", 6))
    s = int(cfg.get("coriolis_sign", 1))
    blocks = cfg.get("blocks",
                     [[1, "para", -1], [1, "ortho", 1], [2, "para", 1]])
    all_states = []
    for Np, spin, parity in blocks:
        blk = HyperangularBlock(int(Np), 0, spin, int(parity), spline,
                                m2_max=m2_max, coriolis_sign=s)
        if blk.dim == 0:
            log.add(f"block N+={Np} {spin} {parity:+d}: empty")
            continue
        sol = solve_block(blk, grid, pot, n_chan=min(n_chan, blk.dim),
                          n_states=n_states)
        assign_labels(sol)
        log.add(f"block N+={Np} {spin} {parity:+d}: dim {blk.dim}, "
                f"{len(sol.states)} states")
        all_states.extend(sol.states)
    all_states.sort(key=lambda st: st.energy_h)
    if not all_states:
        raise ConfigError("no states produced; check block list")
    e0 = all_states[0].energy_h
    rows = []
    for i, st in enumerate(all_states):
        lb = st.labels
        band = f"{{{lb.get('v1', '?')},{lb.get('v2', '?')}^{abs(lb.get('l2', 0))}}}"
        key = (f"({lb.get('Np', '?')},{lb.get('G', '?')}){band}"
               f"{lb.get('tag', '-')}")
        rows.append(f"{key}#{i} {st.energy_h:.12e} "
                    f"{(st.energy_h - e0) * HARTREE_TO_INVCM:.6f}")
    write_levels(outdir / "levels.txt", cfg,
                 "key E_hartree E_cm_rel_ground", rows)
    _maybe_compare(cfg, outdir, log)
    return 0


def run_channels(cfg: RunConfig, outdir: Path, log: RunLog):
    ion_rows = load_ion_levels(
        cfg.path("ion_levels", "bundled:ion_levels.txt"))
    l = int(cfg.get("l", 1))
    s = int(cfg.get("coriolis_sign", 1))
    Np_max = int(cfg.get("Np_max", 4))
    N_values = cfg.get("N_values", [0, 1, 2, 3])
    rows = []
    for N, spin, parity, ch in _neutral_blocks(ion_rows, l, N_values,
                                               Np_max, s):
        dev = unitarity_check(ch)
        rows.append(f"# block N={N} l={l} {spin} parity={parity:+d} "
                    f"unitarity_dev={dev:.3e}")
        for c in ch:
            rows.append(f"{c.label} threshold_cm="
                        f"{c.threshold_h * HARTREE_TO_INVCM:.3f}")
    write_levels(outdir / "channels.txt", cfg, "channel listing", rows)
    return 0


def run_fit_defects(cfg: RunConfig, outdir: Path, log: RunLog):
    samples = qdefect.load_samples(cfg.path("samples"))
    n_pr = int(cfg.get("n_principal", 3))
    params, rms = qdefect.fit_defect_surface(samples, n_pr)
    qdefect.save_params(params, outdir / "defects_fitted.txt",
                        header=f"fitted from {cfg.get('samples')}; "
                               f"rms residual {rms:.3e}")
    log.add(f"fitted {samples.shape[0]} samples, rms residual {rms:.3e}")
    write_levels(outdir / "report.txt", cfg, "fit summary",
                 [f"rms_residual {rms:.6e}"])
    return 0


def _maybe_compare(cfg: RunConfig, outdir: Path, log: RunLog) -> int:
    ref = cfg.path("reference")
    if ref is None:
        return 0
    mode = cfg.get("compare_mode", "offset-fit")
    levels, _ = read_keyed_energies(outdir / "levels.txt")
    reference, order = read_keyed_energies(ref, column="cal")
    rep = compare(levels, reference, mode, ref_order=order)
    (outdir / "report.txt").write_text(
        "\n".join(_header_lines(cfg)) + "\n" + rep.render())
    log.add(f"comparison vs {cfg.get('reference')}: rms {rep.rms:.3f}, "
            f"max {rep.max_abs:.3f} ({mode})")
    tol = cfg.get("tolerance")
    if tol is not None and rep.rms > tol:
        log.add(f"rms exceeds tolerance {tol}")
        return 1
    return 0


def run_compare(cfg: RunConfig, outdir: Path, log: RunLog):
    levels, _ = read_keyed_energies(cfg.path("levels"),
                                    column=cfg.get("levels_column", "auto"))
    reference, order = read_keyed_energies(
        cfg.path("reference"), column=cfg.get("reference_column", "ref"))
    mode = cfg.get("mode", "absolute")
    rep = compare(levels, reference, mode, ref_order=order)
    (outdir / "report.txt").write_text(
        "\n".join(_header_lines(cfg)) + "\n" + rep.render())
    log.add(f"rms {rep.rms:.6f} max {rep.max_abs:.6f} over {len(rep.rows)}")
    if rep.unmatched_ref or rep.unmatched_calc:
        log.add(f"unmatched: {len(rep.unmatched_ref)} reference, "
                f"{len(rep.unmatched_calc)} computed")
    tol = cfg.get("tolerance")
    if tol is not None and rep.rms > tol:
        return 1
    return 0


TASKS = {
    "ion-levels": run_ion_levels,
    "p-levels": run_p_levels,
    "d-levels": run_d_levels,
    "channels": run_channels,
    "compare": run_compare,
    "fit-defects": run_fit_defects,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trimqdt",
        description="Rovibrational + MQDT Rydberg level calculations "
                    "for X3 molecules")
    sub = parser.add_subparsers(dest="task", required=True)
    for name in TASKS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="out")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--tolerance", type=float, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.task)
        cfg.threads = max(1, args.threads)
        if args.tolerance is not None:
            cfg.raw["tolerance"] = args.tolerance
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        log = RunLog()
        rc = TASKS[args.task](cfg, outdir, log)
        log.write(outdir / "run.log", cfg)
        return int(rc or 0)
    except Exception as exc:  # noqa: BLE001 - single CLI error boundary
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
