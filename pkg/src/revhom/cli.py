"""Command-line front end: ``revhom <command> [options]``.

Options may come from a JSON file (``--config``); flags given on the command
line win.  Every output file starts with the resolved configuration (as
``#`` comment lines in CSV files, a ``config`` entry in JSON files and an
XML comment in SVG files).
Output locations are not part of that record, so identical settings give
byte-identical files wherever they are written.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bvp as B
from . import continuation as C
from . import duffing, melnikov, monodromy
from .duffing import ExampleParams
from .svg import Marker, Series, line_plot
from .system import ConfigurationError, registered_systems

__all__ = ["RunConfig", "Diagram", "FigureSpec", "FIGURES", "build_parser", "resolve", "diagram",
           "figure_panel", "run", "main"]

KINDS = ("resonance", "melnikov", "solve", "continue", "monodromy", "figures")

DEFAULTS = {
    "system": "duffing4d",
    "s": 2.0,
    "ell": [0],
    "beta1": None,
    "beta2": 0.0,
    "beta3": 0.0,
    "coupling": 8.0,
    "mode": "saddle_node",
    "T": 20.0,
    "intervals": 400,
    "tol": 1e-10,
    "T_q": None,
    "param": "beta2",
    "range": None,
    "ds": 2e-3,
    "max_steps": 200,
    "switch": False,
    "perturb": 0.0,
    "seed": 0,
    "eps": [1e-4],
    "block": [1, 2],
    "svg": False,
}
OUTPUT_KEYS = ("out",)
BETA2_RANGE = 0.15
BETA1_HALF_WIDTH = 0.1
SWITCH_FRACTION = 0.1


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one run."""

    kind: str
    system: str
    params: dict
    numerics: dict
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown experiment kind {self.kind!r}")
        if self.system not in registered_systems():
            raise ConfigurationError(f"unknown system {self.system!r}")
        if not self.params["s"] > 0:
            raise ConfigurationError("s must be positive")
        if any(int(e) < 0 for e in self.params["ell"]):
            raise ConfigurationError("ell must be non-negative")
        for k in ("tol", "ds", "T"):
            if not self.numerics[k] > 0:
                raise ConfigurationError(f"{k} must be positive")
        if self.numerics["T_q"] is not None and not self.numerics["T_q"] > 0:
            raise ConfigurationError("T_q must be positive")
        if any(not e > 0 for e in self.numerics["eps"]):
            raise ConfigurationError("eps values must be positive")
        if self.numerics["intervals"] < 2 or self.numerics["max_steps"] < 1:
            raise ConfigurationError("intervals and max_steps must be positive")

    @property
    def ells(self) -> list[int]:
        return list(self.params["ell"])

    @property
    def ell(self) -> int:
        if len(self.params["ell"]) != 1:
            raise ConfigurationError(f"{self.kind} takes a single ell value")
        return int(self.params["ell"][0])

    def example(self, ell: int | None = None, **override) -> ExampleParams:
        p = dict(self.params)
        ell = self.ell if ell is None else ell
        beta1 = p["beta1"]
        if beta1 is None:
            beta1 = duffing.resonance_beta1(p["s"], ell)
        coupling = p["coupling"]
        if coupling in ("tied", None):
            coupling = None
        kw = {"s": p["s"], "beta1": beta1, "beta2": p["beta2"], "beta3": p["beta3"],
              "ell": ell, "coupling": coupling}
        kw.update(override)
        return ExampleParams(**kw)

    def record(self) -> dict:
        """Configuration as written into output headers."""
        return {"kind": self.kind, "system": self.system, "params": self.params,
                "numerics": self.numerics}

    def header(self) -> str:
        return f"revhom {self.kind}\nconfig: {json.dumps(self.record(), sort_keys=True)}"


# argument parsing

def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _coupling(text: str):
    if str(text).lower() == "tied":
        return "tied"
    return float(text)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON file with default settings")
    p.add_argument("--system", help="registered system name")
    p.add_argument("--s", type=float, help="block-2 stiffness s > 0")
    p.add_argument("--ell", type=_int_list, help="resonance index (comma list where allowed)")
    p.add_argument("--beta1", type=float, help="beta1 (default: resonance value)")
    p.add_argument("--beta2", type=float)
    p.add_argument("--beta3", type=float)
    p.add_argument("--coupling", type=_coupling, help="x2^2 x1 coupling, or 'tied' to use beta1")
    p.add_argument("--T", type=float, help="BVP half-interval length")
    p.add_argument("--intervals", type=int, help="collocation intervals")
    p.add_argument("--tol", type=float, help="Newton residual tolerance")
    p.add_argument("--out", type=Path, help="output file (or directory for figures)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revhom",
                                     description="Bifurcations of symmetric homoclinic orbits")
    sub = parser.add_subparsers(dest="kind", required=True)
    p = sub.add_parser("resonance", help="beta1 values with a bounded block-2 solution")
    _common(p)
    p = sub.add_parser("melnikov", help="Melnikov coefficients and classification")
    _common(p)
    p.add_argument("--mode", choices=melnikov.MODES)
    p.add_argument("--T-q", dest="T_q", type=float, help="quadrature window (default adaptive)")
    p = sub.add_parser("solve", help="solve the homoclinic BVP once")
    _common(p)
    p.add_argument("--perturb", type=float, help="noise amplitude added to the exact-orbit guess")
    p.add_argument("--seed", type=int)
    p = sub.add_parser("continue", help="continue a branch of homoclinic orbits")
    _common(p)
    p.add_argument("--param", choices=("beta1", "beta2", "beta3"))
    p.add_argument("--range", type=_float_list, help="lo,hi parameter window")
    p.add_argument("--ds", type=float, help="initial arclength step")
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--switch", action="store_const", const=True,
                   help="also follow the branches bifurcating at branch points")
    p.add_argument("--svg", action="store_const", const=True, help="write an SVG diagram")
    p = sub.add_parser("monodromy", help="monodromy matrices of the variational blocks")
    _common(p)
    p.add_argument("--eps", type=_float_list, help="chart radii")
    p.add_argument("--block", type=_int_list, help="blocks (1, 2)")
    p = sub.add_parser("figures", help="branch and profile data for the example diagrams")
    _common(p)
    p.add_argument("--ds", type=float)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--svg", action="store_const", const=True)
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the JSON config file and command-line flags."""
    merged = dict(DEFAULTS)
    data = {}
    if getattr(args, "config", None) is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(data) - set(DEFAULTS) - set(OUTPUT_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "kind") and v is not None}
    merged.update(flags)
    if args.kind == "figures" and "ell" not in flags and "ell" not in data:
        merged["ell"] = [0, 1, 2]
    ell = merged["ell"]
    merged["ell"] = [int(e) for e in (ell if isinstance(ell, (list, tuple)) else [ell])]
    params = {k: merged[k] for k in ("s", "ell", "beta1", "beta2", "beta3", "coupling")}
    numerics = {k: merged[k] for k in ("mode", "T", "intervals", "tol", "T_q", "param", "range",
                                       "ds", "max_steps", "switch", "perturb", "seed", "eps",
                                       "block", "svg")}
    numerics["switch"] = bool(numerics["switch"])
    numerics["svg"] = bool(numerics["svg"])
    outputs = {"out": None if merged.get("out") is None else str(merged["out"])}
    return RunConfig(args.kind, merged["system"], params, numerics, outputs)


# pipelines

@dataclass
class Diagram:
    """A continued branch and the branches switched onto at its branch points."""

    params: ExampleParams
    param: str
    base: C.Branch
    bifurcating: list = field(default_factory=list)

    @property
    def branches(self) -> list[C.Branch]:
        return [self.base] + list(self.bifurcating)


def default_range(param: str, p: ExampleParams) -> tuple[float, float]:
    if param == "beta2":
        return (-BETA2_RANGE, BETA2_RANGE)
    if param == "beta1":
        r = duffing.resonance_beta1(p.s, p.ell)
        return (r - BETA1_HALF_WIDTH, r + BETA1_HALF_WIDTH)
    return (p.beta3 - 1.0, p.beta3 + 1.0)


def diagram(p: ExampleParams, param: str, mu_range=None, *, switch: bool = True,
            T: float = 20.0, intervals: int = 400, ds: float = 2e-3,
            max_steps: int = 200) -> Diagram:
    """Continue from the exact orbit and optionally switch at branch points.

    ``beta2`` runs start at the given parameters and go both ways.  Other
    parameters start at the lower end of the window and march upward.  At a
    branch point with ``beta3 = 0`` both halves of the pitchfork are
    followed; otherwise the crossing branch is followed in both directions.
    """
    if p.beta2 != 0 and param != "beta2":
        raise ConfigurationError("the exact starting orbit needs beta2 = 0")
    lo, hi = default_range(param, p) if mu_range is None else tuple(mu_range)
    if not lo < hi:
        raise ConfigurationError(f"empty parameter window ({lo}, {hi})")
    both = param == "beta2"
    start = p if both else ExampleParams(**{**p.__dict__, param: lo})
    bvp = B.HomoclinicBVP(duffing.make_system(start), T=T, n_intervals=intervals)
    orbit = B.solve(bvp, duffing.homoclinic_exact(bvp.mesh))
    base = C.continue_branch(bvp, orbit, param, (lo, hi), ds=ds, ds_max=25 * ds,
                             max_steps=max_steps, both=both)
    out = Diagram(p, param, base)
    if not switch:
        return out
    # keep the first switched point well inside the window
    max_dmu = SWITCH_FRACTION * (hi - lo)
    for k, _ in enumerate(base.specials(C.BP)):
        if p.beta3 == 0:
            for sign in (1, -1):
                orb, tan = C.switch_branch(bvp, base, k, sign=sign, max_dmu=max_dmu)
                out.bifurcating.append(C.continue_branch(
                    bvp, orb, param, (lo, hi), ds=ds, ds_max=25 * ds, max_steps=max_steps,
                    tangent=tan))
        else:
            orb, tan = C.switch_branch(bvp, base, k, max_dmu=max_dmu)
            out.bifurcating.append(C.continue_branch(
                bvp, orb, param, (lo, hi), ds=ds, ds_max=25 * ds, max_steps=max_steps,
                tangent=tan, both=True))
    return out


def _write(path: Path | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _json(cfg: RunConfig, payload: dict) -> str:
    return json.dumps({"config": cfg.record(), **payload}, indent=2) + "\n"


def _branch_plot(d: Diagram, title: str, comment: str = "") -> str:
    series = [Series(br.params, br.measure("x2_at_0"), label)
              for br, label in zip(d.branches, ["base"] + [f"branch {k + 1}" for k in
                                                            range(len(d.bifurcating))])]
    markers = []
    for br in d.branches[:1]:
        for sp in br.special:
            pt = br.points[sp.index] if 0 <= sp.index < len(br.points) else None
            if pt is not None:
                markers.append(Marker(sp.param, pt.measures.x2_at_0, sp.kind))
    return line_plot(series, title=title, xlabel=d.param, ylabel="x2(0)", markers=markers,
                     comment=comment)


# commands

def cmd_resonance(cfg: RunConfig) -> int:
    lines = [f"{ell} {duffing.resonance_beta1(cfg.params['s'], ell):.8f}" for ell in cfg.ells]
    text = "\n".join(lines) + "\n"
    if cfg.outputs["out"]:
        text = "".join(f"# {h}\n" for h in cfg.header().splitlines()) + "# ell beta1\n" + text
    _write(Path(cfg.outputs["out"]) if cfg.outputs["out"] else None, text)
    return 0


def cmd_melnikov(cfg: RunConfig) -> int:
    mode = cfg.numerics["mode"]
    p = cfg.example()
    notes = []
    if mode == "pitchfork" and p.beta3 != 0:
        notes.append("pitchfork coefficients are defined for beta3 = 0; beta3 set to 0")
        p = cfg.example(beta3=0.0)
    rep = melnikov.example_report(p, mode, cfg.numerics["T_q"])
    payload = {"params": p.as_dict(), **rep.to_dict()}
    payload["params"] = {k: (None if v != v else v) for k, v in payload["params"].items()}
    if notes:
        payload["notes"] = notes
        for n in notes:
            print(f"note: {n}", file=sys.stderr)
    _write(Path(cfg.outputs["out"]) if cfg.outputs["out"] else None, _json(cfg, payload))
    return 0


def cmd_solve(cfg: RunConfig) -> int:
    p = cfg.example()
    n = cfg.numerics
    bvp = B.HomoclinicBVP(duffing.make_system(p), T=n["T"], n_intervals=n["intervals"])
    guess = duffing.homoclinic_exact(bvp.mesh)
    if n["perturb"]:
        rng = np.random.default_rng(n["seed"])
        guess = guess + n["perturb"] * rng.standard_normal(guess.shape)
    orbit = B.solve(bvp, guess, tol=n["tol"])
    out = Path(cfg.outputs["out"]) if cfg.outputs["out"] else None
    _write(out, B.orbit_csv(orbit, cfg.header()))
    summary = json.loads(B.orbit_json(orbit))
    text = _json(cfg, summary)
    if out is None:
        sys.stderr.write(text)
    else:
        _write(out.with_suffix(".json"), text)
    return 0


def cmd_continue(cfg: RunConfig) -> int:
    n = cfg.numerics
    param = n["param"]
    p = cfg.example()
    rng = n["range"]
    if rng is not None and len(rng) != 2:
        raise ConfigurationError("--range takes two numbers lo,hi")
    d = diagram(p, param, rng, switch=n["switch"], T=n["T"], intervals=n["intervals"],
                ds=n["ds"], max_steps=n["max_steps"])
    out = Path(cfg.outputs["out"]) if cfg.outputs["out"] else None
    _write(out, C.branch_csv(d.base, cfg.header()))
    extra = []
    if out is not None:
        for k, br in enumerate(d.bifurcating):
            path = out.with_name(f"{out.stem}_branch{k + 1}{out.suffix or '.csv'}")
            _write(path, C.branch_csv(br, cfg.header()))
            extra.append(path.name)
        if n["svg"]:
            _write(out.with_suffix(".svg"),
                   _branch_plot(d, f"continuation in {param}", cfg.header()))
        summary = {"base": json.loads(C.branch_json(d.base)),
                   "bifurcating": [json.loads(C.branch_json(b)) for b in d.bifurcating],
                   "files": extra}
        _write(out.with_suffix(".json"), _json(cfg, summary))
    return 0


def cmd_monodromy(cfg: RunConfig) -> int:
    p = cfg.example()
    if p.beta2 != 0:
        raise ConfigurationError("the variational equation splits into blocks only at beta2 = 0")
    reports = []
    for eps in cfg.numerics["eps"]:
        res = {}
        for blk in cfg.numerics["block"]:
            for ch in monodromy.CHARTS:
                res[blk, ch] = monodromy.monodromy_matrix(blk, monodromy.ChartSpec(ch, eps), p)
        entry = {"eps": eps, "blocks": []}
        for blk in cfg.numerics["block"]:
            plus, minus = res[blk, "plus"], res[blk, "minus"]
            bounded = [1.0, 0.0] if plus.basis_label == "bounded-mate" else None
            diag = monodromy.check_triangularizable(plus, minus, bounded)
            doc = json.loads(monodromy.monodromy_json([plus, minus], diag))
            entry["blocks"].append({"block": blk, **doc})
        if set(cfg.numerics["block"]) == {1, 2}:
            M4 = [monodromy.assemble(res[1, ch], res[2, ch]) for ch in monodromy.CHARTS]
            entry["flag"] = monodromy.common_flag(*M4)
        reports.append(entry)
    _write(Path(cfg.outputs["out"]) if cfg.outputs["out"] else None,
           _json(cfg, {"params": {k: (None if v != v else v) for k, v in p.as_dict().items()},
                       "runs": reports}))
    return 0


@dataclass(frozen=True)
class FigureSpec:
    """One bifurcation diagram and its orbit-profile companion."""

    name: str
    param: str
    beta3: float
    profile: str
    ranges: dict
    targets: dict


FIGURES = (
    FigureSpec("fig5", "beta2", 4.0, "fig6",
               {0: (-0.15, 0.15), 1: (-0.15, 0.15), 2: (-0.15, 0.15)},
               {0: (-0.1,), 1: (-0.05,), 2: (-0.006,)}),
    FigureSpec("fig7", "beta1", 4.0, "fig8",
               {0: (1.4, 2.1), 1: (7.2, 7.8), 2: (17.2, 17.5)},
               {0: (1.5, 2.0), 1: (7.7, 7.3), 2: (17.3, 17.4)}),
    FigureSpec("fig9", "beta1", 0.0, "fig10",
               {0: (1.6, 2.1), 1: (6.9, 7.6), 2: (15.9, 17.4)},
               {0: (2.0,), 1: (7.0,), 2: (16.0,)}),
)


def _profile_starts(spec: FigureSpec, d: Diagram) -> list[tuple[C.Branch, int]]:
    """Branches carrying the profiles and the index of their bifurcation point."""
    mu_star = 0.0 if spec.param == "beta2" else duffing.resonance_beta1(d.params.s, d.params.ell)
    if spec.param == "beta2":
        folds = d.base.specials(C.FOLD)
        if not folds:
            return []
        f = min(folds, key=lambda sp: abs(sp.param - mu_star))
        return [(d.base, f.index)]
    out = []
    for br in d.bifurcating:
        bps = br.specials(C.BP)
        if bps:
            out.append((br, min(bps, key=lambda sp: abs(sp.param - mu_star)).index))
        else:
            out.append((br, int(np.argmin(np.abs(br.params - mu_star)))))
    return out


def figure_panel(spec: FigureSpec, p: ExampleParams, *, T: float = 20.0, intervals: int = 400,
                 ds: float = 2e-3, max_steps: int = 200):
    """Diagram and profile orbits of one panel: ``(diagram, [(target, orbit), ...])``."""
    if p.ell not in spec.ranges:
        raise ConfigurationError(f"{spec.name} is defined for ell in {sorted(spec.ranges)}")
    d = diagram(p, spec.param, spec.ranges[p.ell], switch=spec.param == "beta1", T=T,
                intervals=intervals, ds=ds, max_steps=max_steps)
    profiles = []
    for br, k0 in _profile_starts(spec, d):
        for target in spec.targets[p.ell]:
            profiles.extend((target, o) for o in C.orbits_at(br, target, k0))
    return d, profiles


def cmd_figures(cfg: RunConfig) -> int:
    n = cfg.numerics
    outdir = Path(cfg.outputs["out"] or "figures")
    outdir.mkdir(parents=True, exist_ok=True)
    header = cfg.header()
    manifest = []
    for spec in FIGURES:
        for ell in cfg.ells:
            p = cfg.example(ell, beta2=0.0, beta3=spec.beta3,
                            beta1=duffing.resonance_beta1(cfg.params["s"], ell))
            d, profiles = figure_panel(spec, p, T=n["T"], intervals=n["intervals"], ds=n["ds"],
                                       max_steps=n["max_steps"])
            files = []
            for k, br in enumerate(d.branches):
                fn = f"{spec.name}_ell{ell}_{'base' if k == 0 else f'branch{k}'}.csv"
                (outdir / fn).write_text(C.branch_csv(br, header))
                files.append(fn)
            series, extrema = [], []
            for j, (target, orbit) in enumerate(profiles):
                fn = f"{spec.profile}_ell{ell}_{j + 1}.csv"
                note = f"{spec.param}={target:g} x2(0)={orbit.measures.x2_at_0:.6g}"
                (outdir / fn).write_text(B.orbit_csv(orbit, header + "\n" + note))
                files.append(fn)
                extrema.append(B.count_extrema(orbit))
                t, X = orbit.full()
                series.append(Series(t, X[:, 1], f"{spec.param}={target:g}"))
            if n["svg"]:
                fn = f"{spec.name}_ell{ell}.svg"
                (outdir / fn).write_text(_branch_plot(d, f"{spec.name} ell={ell}", header))
                files.append(fn)
                if series:
                    fn = f"{spec.profile}_ell{ell}.svg"
                    (outdir / fn).write_text(line_plot(series, title=f"{spec.profile} ell={ell}",
                                                       xlabel="t", ylabel="x2", comment=header))
                    files.append(fn)
            manifest.append({
                "figure": spec.name, "profiles": spec.profile, "ell": ell, "param": spec.param,
                "beta3": spec.beta3, "files": files,
                "special_points": [{"type": sp.kind, "param": sp.param} for sp in d.base.special],
                "profile_extrema": extrema,
            })
    (outdir / "manifest.json").write_text(_json(cfg, {"panels": manifest}))
    return 0


COMMANDS = {
    "resonance": cmd_resonance,
    "melnikov": cmd_melnikov,
    "solve": cmd_solve,
    "continue": cmd_continue,
    "monodromy": cmd_monodromy,
    "figures": cmd_figures,
}


def run(cfg: RunConfig) -> int:
    return COMMANDS[cfg.kind](cfg)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
    except ConfigurationError as exc:
        parser.error(str(exc))
    try:
        return run(cfg)
    except ConfigurationError as exc:
        print(f"revhom: error: {exc}", file=sys.stderr)
        return 2
    except (B.ConvergenceError, C.ContinuationError, C.SwitchError,
            monodromy.MonodromyQualityError, ArithmeticError) as exc:
        print(f"revhom: solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
