"""Command-line front end.

Subcommands::

    crtk moments   --model-json ...
    crtk theta     --model-json ... --V 0.75 --k 0,1,100 --v-min -3 --v-max -1.5 --steps 301
    crtk critical  --model-json ... --V 3 --k 0,1,2
    crtk mc        --model-json ... --V 3 --k 0 --v -1.8,0,inf --d 50,100 --samples 2000
    crtk oracle    --model-json ... --k 0 --samples 100000
    crtk figure    --out DIR

Exit codes: 0 ok, 2 invalid configuration, 3 numerical failure, 4 regime refusal.
``CRTK_THREADS`` caps the number of Monte Carlo worker threads.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import complexity as cx
from . import goe_lab as gl
from . import kac_rice as kr
from .covariance import CovarianceModel, Matern, SquaredExponential, model_from_json, spectral_moments
from .errors import CrtkError, DomainError, ModelError, NumericalFailure, RegimeRefusal

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_REGIME = 0, 2, 3, 4

FIGURE_PANELS = {
    "panel_a": (Matern(4.0, 1.0), 0.75, (0, 1, 100), -3.0, -1.5),
    "panel_b": (Matern(4.0, 1.0), 3.0, (0, 1, 100), -4.0, -1.5),
    "panel_c": (SquaredExponential(5.0), 0.0, (0, 1, 100), -2.2, -1.95),
}


@dataclass
class RunConfig:
    model: Optional[CovarianceModel] = None
    domain: Optional[kr.DomainSpec] = None
    ks: list[int] = field(default_factory=lambda: [0])
    v_min: float = -3.0
    v_max: float = -1.5
    steps: int = 301
    v_list: list[float] = field(default_factory=lambda: [math.inf])
    u_list: list[float] = field(default_factory=lambda: [-2.0, -1.0, 0.0, 1.0, 2.0])
    d_list: list[int] = field(default_factory=lambda: [50, 100, 200, 400])
    samples: int = 2000
    seed: int = 0
    out: Optional[str] = None
    fmt: Optional[str] = None

    def validate(self) -> None:
        if not self.ks or any(k < 0 for k in self.ks):
            raise ModelError("k-list must be nonempty nonnegative integers")
        if not self.v_min < self.v_max:
            raise ModelError(f"v-grid needs v_min < v_max, got {self.v_min} >= {self.v_max}")
        if self.steps < 2:
            raise ModelError(f"v-grid needs steps >= 2, got {self.steps}")
        if not self.d_list or any(d < 1 for d in self.d_list):
            raise ModelError("d-list must be nonempty positive integers")
        if self.samples < 1:
            raise ModelError("samples must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ModelError("seed must be a 64-bit unsigned integer")
        if self.fmt not in (None, "csv", "json"):
            raise ModelError(f"format must be csv or json, got {self.fmt!r}")

    @property
    def V(self) -> float:
        if self.domain is None:
            raise ModelError("this command needs a domain: --V, --radius or --side")
        return kr.limiting_volume_exponent(self.domain)

    def need_model(self) -> CovarianceModel:
        if self.model is None:
            raise ModelError("this command needs --model-json")
        return self.model

    def v_grid(self) -> np.ndarray:
        return np.linspace(self.v_min, self.v_max, self.steps)


def fmt_float(x: float) -> str:
    return "%.17g" % x


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt_float(c) if isinstance(c, float) else str(c) for c in row) + "\n")
    return buf.getvalue()


# --- commands -----------------------------------------------------------


def moments_report(model: CovarianceModel) -> dict:
    m = spectral_moments(model)
    e1, e2 = cx.edges(m)
    vc1, vc2 = cx.critical_volume_1(m), cx.critical_volume_2(m)
    R1, L1 = cx.domain_scale(vc1)
    rep = {
        "lambda2": m.lambda2,
        "lambda4": m.lambda4,
        "excess": m.excess,
        "bargmann_fock": m.is_bargmann_fock,
        "E_star": e1,
        "E_2star": e2,
        "V_c1": vc1,
        "V_c2": vc2,
        "R_c1": R1,
        "L_c1": L1,
    }
    if m.is_bargmann_fock:
        rep["V_c"] = vc1
    return rep


def cmd_moments(cfg: RunConfig) -> str:
    rep = moments_report(cfg.need_model())
    if cfg.fmt == "json":
        return _dump_json(rep)
    rows = [(k, fmt_float(v) if isinstance(v, float) else str(v).lower()) for k, v in rep.items()]
    return _csv(["quantity", "value"], rows)


def theta_table(model: CovarianceModel, V: float, ks: Sequence[int], grid: np.ndarray) -> np.ndarray:
    """Rows ``[v, theta_k1(v), theta_k2(v), ...]`` after monotonicity sanity checks."""
    params = cx.LandscapeParams(spectral_moments(model), V)
    table = np.empty((len(grid), len(ks) + 1))
    for i, v in enumerate(grid):
        table[i, 0] = v
        for j, k in enumerate(ks):
            table[i, j + 1] = cx.theta_k(params, k, float(v)).value
    cols = table[:, 1:]
    if np.any(np.diff(cols, axis=0) < -1e-12):
        raise NumericalFailure("sanity check failed: theta_k decreases in v")
    order = np.argsort(ks, kind="stable")
    if np.any(np.diff(cols[:, order], axis=1) > 1e-12):
        raise NumericalFailure("sanity check failed: theta_k increases in k")
    return table


def cmd_theta(cfg: RunConfig) -> str:
    table = theta_table(cfg.need_model(), cfg.V, cfg.ks, cfg.v_grid())
    header = ["v"] + [f"theta_k{k}" for k in cfg.ks]
    if cfg.fmt == "json":
        return _dump_json({"columns": header, "rows": table.tolist()})
    return _csv(header, [[float(x) for x in row] for row in table])


def critical_report(model: CovarianceModel, V: float, ks: Sequence[int]) -> dict:
    params = cx.LandscapeParams(spectral_moments(model), V)
    lv = cx.critical_levels(params, ks)
    rep = {"V": V, "V_c1": lv.V_c1, "V_c2": lv.V_c2}
    if lv.v_c is not None:
        rep["v_c"] = lv.v_c
    if lv.v_c_k is not None:
        rep["k"] = list(lv.ks)
        rep["v_c_k"] = list(lv.v_c_k)
    rep["regime"] = lv.note
    return rep


def cmd_critical(cfg: RunConfig) -> str:
    rep = critical_report(cfg.need_model(), cfg.V, cfg.ks)
    if cfg.fmt == "csv":
        rows = []
        for key, val in rep.items():
            if key == "v_c_k":
                rows += [(f"v_c_k{k}", fmt_float(x)) for k, x in zip(rep["k"], val)]
            elif key != "k":
                rows.append((key, fmt_float(val) if isinstance(val, float) else str(val)))
        return _csv(["quantity", "value"], rows)
    return _dump_json(rep)


def cmd_mc(cfg: RunConfig) -> str:
    model = cfg.need_model()
    if cfg.domain is None:
        raise ModelError("mc needs a domain: --V, --radius or --side")
    m = spectral_moments(model)
    spec = gl.GoeSpec(seed=cfg.seed, samples=cfg.samples)
    rows = []
    e1, _ = cx.edges(m)
    for v in cfg.v_list:
        if not v >= e1:
            raise RegimeRefusal(
                f"regime not MC-verifiable (v = {v} < E_star = {e1}); "
                "use the closed-form maximization oracle"
            )
    for k in cfg.ks:
        for v in cfg.v_list:
            for res in kr.convergence_study(cfg.domain, m, k, v, cfg.d_list, spec):
                rows.append(
                    (res.d, k, float(v), res.log_mean / res.d, res.se_log / res.d,
                     res.theta_target, res.gap)
                )
    header = ["d", "k", "v", "log_mean_over_d", "se", "theta", "gap"]
    if cfg.fmt == "json":
        return _dump_json([dict(zip(header, r)) for r in rows])
    return _csv(header, rows)


def oracle_rows(model: CovarianceModel, ks: Sequence[int], us: Sequence[float], samples: int, seed: int):
    m = spectral_moments(model)
    rows = []
    for d in (1, 2):
        spec = gl.GoeSpec(seed=gl.derive_seed(seed, d), samples=samples)
        for k in ks:
            if k > d:
                continue
            pairs = [(gl.oracle_exp_term(d, k), gl.estimate_exp_term(d, k, spec))]
            for u in us:
                if not m.is_bargmann_fock:
                    pairs.append(
                        (gl.oracle_exp_phi_term(d, k, u, m), gl.estimate_exp_phi_term(d, k, u, m, spec))
                    )
                pairs.append((gl.oracle_indicator_term(d, k, u), gl.estimate_indicator_term(d, k, u, spec)))
            for exact, est in pairs:
                z = (est.log_mean - exact.log_mean) / est.se_log if est.se_log > 0 else math.nan
                rows.append((d, k, exact.kind, float(exact.u), exact.log_mean, est.log_mean, est.se_log, z))
    return rows


def cmd_oracle(cfg: RunConfig) -> str:
    rows = oracle_rows(cfg.need_model(), cfg.ks, cfg.u_list, cfg.samples, cfg.seed)
    header = ["d", "k", "kind", "u", "exact_log", "mc_log_mean", "mc_se_log", "z"]
    if cfg.fmt == "json":
        return _dump_json([dict(zip(header, r)) for r in rows])
    return _csv(header, rows)


def cmd_figure(cfg: RunConfig) -> dict[str, str]:
    """Data for the three reference panels, keyed by file stem."""
    out = {}
    for name, (model, V, ks, lo, hi) in FIGURE_PANELS.items():
        grid = np.linspace(lo, hi, cfg.steps)
        table = theta_table(model, V, ks, grid)
        header = ["v"] + [f"theta_k{k}" for k in ks]
        out[name] = _csv(header, [[float(x) for x in row] for row in table])
    return out


# --- argument parsing ---------------------------------------------------


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _u64(text: str) -> int:
    val = int(text, 0)
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return val


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model-json", help='model JSON, e.g. \'{"model":"matern","nu":4,"ell":1}\', or @file')
    dom = common.add_mutually_exclusive_group()
    dom.add_argument("--V", type=float, help="limiting volume exponent")
    dom.add_argument("--radius", type=float, help="ball radius R")
    dom.add_argument("--side", type=float, help="cube side parameter L (cube [0, L/sqrt d]^d)")
    common.add_argument("--k", type=_ints, default=[0], help="comma-separated indices")
    common.add_argument("--v-min", type=float, default=-3.0)
    common.add_argument("--v-max", type=float, default=-1.5)
    common.add_argument("--steps", type=int, default=301)
    common.add_argument("--v", type=_floats, default=[math.inf], help="scaled levels for mc (inf allowed)")
    common.add_argument("--u", type=_floats, default=[-2.0, -1.0, 0.0, 1.0, 2.0], help="levels for oracle")
    common.add_argument("--d", type=_ints, default=[50, 100, 200, 400], help="dimensions for mc")
    common.add_argument("--samples", type=int, default=2000)
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--out", help="output file (directory for figure); stdout if omitted")
    common.add_argument("--format", choices=("csv", "json"), dest="fmt")

    parser = argparse.ArgumentParser(prog="crtk", description="Landscape complexity toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("moments", "spectral moments, thresholds and critical volumes"),
        ("theta", "complexity curves over a grid of levels"),
        ("critical", "critical volumes and levels"),
        ("mc", "finite-d Monte Carlo convergence table"),
        ("oracle", "exact small-d GOE values against Monte Carlo"),
        ("figure", "data files for the three reference panels"),
    ]:
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        model=model_from_json(ns.model_json) if ns.model_json else None,
        ks=ns.k,
        v_min=ns.v_min,
        v_max=ns.v_max,
        steps=ns.steps,
        v_list=ns.v,
        u_list=ns.u,
        d_list=ns.d,
        samples=ns.samples,
        seed=ns.seed,
        out=ns.out,
        fmt=ns.fmt,
    )
    if ns.V is not None:
        cfg.domain = kr.AbstractVolume(ns.V)
    elif ns.radius is not None:
        cfg.domain = kr.Ball(ns.radius)
    elif ns.side is not None:
        cfg.domain = kr.Cube(ns.side)
    cfg.validate()
    return cfg


COMMANDS = {
    "moments": cmd_moments,
    "theta": cmd_theta,
    "critical": cmd_critical,
    "mc": cmd_mc,
    "oracle": cmd_oracle,
}


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        if ns.command == "figure":
            outdir = Path(cfg.out or ".")
            outdir.mkdir(parents=True, exist_ok=True)
            for stem, text in cmd_figure(cfg).items():
                _write(text, str(outdir / f"{stem}.csv"))
        else:
            _write(COMMANDS[ns.command](cfg), cfg.out)
    except RegimeRefusal as exc:
        print(f"crtk: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except NumericalFailure as exc:
        print(f"crtk: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ModelError, DomainError) as exc:
        print(f"crtk: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CrtkError as exc:
        print(f"crtk: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"crtk: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
