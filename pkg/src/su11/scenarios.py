"""Configuration-driven scenarios: sweeps, maps and cross-validation reports.

A scenario file is TOML. The smallest valid file is a single line such as
`scenario = "fringe-scan"`; every other field has a default matching the
standard operating points (gain G = 2, unbalanced G2 = 5, coherent alpha = 3).
"""

import csv
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import bisect

from . import engine, formulary, montecarlo, states
from .engine import MeasurementScheme, Port, grid_delta_phi
from .formulary import FormId, REGISTRY
from .optics import InterferometerConfig, LossBudget, PAGain, Sign, Topology
from .states import tomllib

SCENARIOS = ("fringe-scan", "internal-loss-line", "loss-contour", "best-config-map",
             "external-loss-scan", "formulary-check", "mc-check")
LOSS_MAX = 0.999
TIE_TOL = 1e-12
FORMULARY_TOL = 1e-10
MC_DELTA_TOL = 0.03
MC_SAMPLES = 1_000_000
MC_SEED = 20240611
PHASE_POINTS = 1024
LINE_POINTS = 201
MAP_POINTS = 101
LOSS_RANGE = (0.0, 0.9)
CROSSOVER_XTOL = 1e-4
FLOAT_FORMAT = ".12g"


class ConfigError(ValueError):
    """Invalid scenario configuration; carries the offending line when known."""

    def __init__(self, message, line=None, source="<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Curve:
    label: str
    config: InterferometerConfig
    scheme: MeasurementScheme


@dataclass
class ScenarioConfig:
    scenario: str
    state: states.MomentState
    curves: list
    grid: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    mc: dict = field(default_factory=dict)
    output: str = ""
    plot_script: bool = True


@dataclass
class ScenarioResult:
    scenario: str
    columns: list
    rows: list
    passed: bool = True
    summary: dict = field(default_factory=dict)


# --- default scheme sets ---------------------------------------------------

def _curve(label, G1, G2=None, port="signal", phi0=np.pi, topology="full", theta=0.0, **losses):
    G2 = G1 if G2 is None else G2
    topo = Topology(topology)
    pa2 = PAGain.from_gain(G2) if topo is Topology.FULL else PAGain()
    cfg = InterferometerConfig(topo, PAGain.from_gain(G1), pa2, phi0, LossBudget(**losses))
    return Curve(label, cfg, MeasurementScheme(port, theta))


def default_curves(scenario, G1=2.0, G2=5.0):
    """Scheme set used when a config lists no [[schemes]].

    G1 is the balanced gain (and the first gain of the unbalanced device), G2
    the second gain of the unbalanced device.
    """
    if scenario == "fringe-scan":
        return [_curve("balanced-sp", G1), _curve("unbalanced-sp", G1, G2),
                _curve("joint-minus", G1, port="joint-minus"),
                _curve("joint-plus", G1, port="joint-plus")]
    if scenario == "external-loss-scan":
        return [_curve("sp_balanced", G1), _curve("sp_unbalanced", G1, G2),
                _curve("joint_minus_dark", G1, port="joint-minus"),
                _curve("joint_plus_bright", G1, port="joint-plus", phi0=0.0)]
    return [_curve("balanced-sp", G1), _curve("unbalanced-sp", G1, G2),
            _curve("joint", G1, port="joint-minus")]


# --- parsing -----------------------------------------------------------------

def _line_of(text, key):
    """1-based line of the first `key =` or `[key]` occurrence, if any."""
    pattern = re.compile(rf"^\s*(\[+\s*{re.escape(key)}\s*\]+|{re.escape(key)}\s*=)", re.M)
    m = pattern.search(text or "")
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Parser:
    def __init__(self, text, source):
        self.text = text
        self.source = source

    def error(self, message, key=None):
        return ConfigError(message, _line_of(self.text, key) if key else None, self.source)

    def number(self, table, key, default=None, lo=None, hi=None):
        if key not in table:
            if default is None:
                raise self.error(f"missing required key '{key}'", key)
            return default
        v = table[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise self.error(f"'{key}' must be a finite number, got {v!r}", key)
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise self.error(f"'{key}' = {v} outside [{lo}, {hi}]", key)
        return float(v)

    def complex_value(self, table, key, default=0.0):
        v = table.get(key, default)
        try:
            if isinstance(v, list):
                if len(v) != 2:
                    raise ValueError
                return complex(float(v[0]), float(v[1]))
            if isinstance(v, bool):
                raise ValueError
            return complex(v)
        except (TypeError, ValueError):
            raise self.error(f"'{key}' must be a number, a [re, im] pair or a complex string",
                             key) from None

    def check_keys(self, table, allowed, where):
        for k in table:
            if k not in allowed:
                raise self.error(f"unknown key '{k}' in {where}", k)

    def state(self, table):
        if table is None:
            return states.coherent(3.0)
        self.check_keys(table, {"kind", "alpha", "alpha_s", "alpha_i", "R", "r", "axis", "mean",
                                "cov", "gaussian", "text"}, "[state]")
        kind = table.get("kind", "moments" if "mean" in table or "text" in table else "coherent")
        try:
            if kind == "vacuum":
                return states.vacuum()
            if kind == "coherent":
                a = self.complex_value(table, "alpha_s" if "alpha_s" in table else "alpha", 3.0)
                return states.coherent(a, self.complex_value(table, "alpha_i"))
            if kind == "squeezed":
                return states.squeezed_signal(self.complex_value(table, "alpha", 3.0),
                                              self.number(table, "R", lo=0.0),
                                              table.get("axis", "Y"))
            if kind == "two-mode-squeezed":
                return states.two_mode_squeezed(self.number(table, "r", lo=0.0),
                                                self.complex_value(table, "alpha_s"),
                                                self.complex_value(table, "alpha_i"))
            if kind == "moments":
                if "text" in table:
                    return states.MomentState.from_text(table["text"], label="config")
                if "mean" not in table or "cov" not in table:
                    raise self.error("moments state needs 'mean' and 'cov'", "state")
                return states.state_from_mapping(table, label="config")
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError, tomllib.TOMLDecodeError) as exc:
            raise self.error(f"invalid state: {exc}", "state") from None
        raise self.error(f"unknown state kind {kind!r}", "kind")

    def gain(self, table, G_key, r_key, default):
        if G_key in table:
            return PAGain.from_gain(self.number(table, G_key, lo=1.0))
        if r_key in table:
            return PAGain(self.number(table, r_key, lo=0.0))
        return default

    def curves(self, items, scenario, gains):
        self.check_keys(gains, {"G1", "G2", "r1", "r2"}, "[gains]")
        base1 = self.gain(gains, "G1", "r1", PAGain.from_gain(2.0))
        if not items:
            return default_curves(scenario, base1.G,
                                  self.gain(gains, "G2", "r2", PAGain.from_gain(5.0)).G)
        out = []
        for k, item in enumerate(items):
            self.check_keys(item, {"label", "topology", "G1", "G2", "r1", "r2", "port", "theta",
                                   "phi0", "L_s", "L_i", "l_s", "l_i"}, "[[schemes]]")
            try:
                topo = Topology(item.get("topology", "full"))
                port = Port(item.get("port", "signal"))
            except ValueError as exc:
                raise self.error(str(exc), "schemes") from None
            pa1 = self.gain(item, "G1", "r1", base1)
            pa2 = self.gain(item, "G2", "r2", pa1) if topo is Topology.FULL else PAGain()
            losses = LossBudget(**{n: self.number(item, n, 0.0, 0.0, LOSS_MAX)
                                   for n in ("L_s", "L_i", "l_s", "l_i")})
            cfg = InterferometerConfig(topo, pa1, pa2, self.number(item, "phi0", np.pi), losses)
            label = str(item.get("label", f"scheme{k}"))
            out.append(Curve(label, cfg, MeasurementScheme(port, self.number(item, "theta", 0.0))))
        labels = [c.label for c in out]
        if len(set(labels)) != len(labels):
            raise self.error("curve labels must be unique", "label")
        return out

    def axis(self, table, key, default_steps):
        """Loss axis from {start, stop, steps} or {values}."""
        spec = table.get(key, {})
        if not isinstance(spec, dict):
            raise self.error(f"'{key}' must be a table with start/stop/steps or values", key)
        if "values" in spec:
            vals = np.asarray(spec["values"], dtype=float)
            if vals.ndim != 1 or vals.size < 1:
                raise self.error(f"'{key}.values' must be a non-empty list", key)
        else:
            start = self.number(spec, "start", LOSS_RANGE[0])
            stop = self.number(spec, "stop", LOSS_RANGE[1])
            steps = self.number(spec, "steps", float(default_steps))
            if steps < 2 or steps != int(steps):
                raise self.error(f"'{key}.steps' must be an integer >= 2", key)
            vals = np.linspace(start, stop, int(steps))
        if np.any(vals < 0) or np.any(vals > LOSS_MAX) or not np.all(np.isfinite(vals)):
            raise self.error(f"losses in '{key}' must lie in [0, {LOSS_MAX}]", key)
        return vals


def parse_config(text, source="<config>"):
    """Parse scenario text into a `ScenarioConfig`.

    Raises:
        ConfigError: With the line number of the offending entry when known.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(str(exc), int(m.group(1)) if m else None, source) from None
    p = _Parser(text, source)
    p.check_keys(data, {"scenario", "output", "plot_script", "state", "gains", "schemes", "grid",
                        "sweep", "mc"}, "the top level")
    scenario = data.get("scenario")
    if scenario not in SCENARIOS:
        raise p.error(f"'scenario' must be one of {', '.join(SCENARIOS)}; got {scenario!r}",
                      "scenario")
    grid = data.get("grid", {})
    sweep = data.get("sweep", {})
    mc = data.get("mc", {})
    gains = data.get("gains", {})
    for name, table in (("grid", grid), ("sweep", sweep), ("mc", mc), ("gains", gains)):
        if not isinstance(table, dict):
            raise p.error(f"[{name}] must be a table", name)
    curves = data.get("schemes", [])
    if not isinstance(curves, list) or not all(isinstance(c, dict) for c in curves):
        raise p.error("schemes must be an array of tables ([[schemes]])", "schemes")
    cfg = ScenarioConfig(scenario, p.state(data.get("state")), p.curves(curves, scenario, gains),
                         output=str(data.get("output", f"{scenario}.csv")),
                         plot_script=bool(data.get("plot_script", True)))

    if scenario == "fringe-scan":
        p.check_keys(grid, {"points"}, "[grid]")
        points = p.number(grid, "points", float(PHASE_POINTS))
        if points < 2 or points != int(points):
            raise p.error("'points' must be an integer >= 2", "points")
        cfg.grid = {"points": int(points)}
    elif scenario in ("loss-contour", "best-config-map"):
        p.check_keys(grid, {"L_s", "L_i"}, "[grid]")
        cfg.grid = {"L_s": p.axis(grid, "L_s", MAP_POINTS), "L_i": p.axis(grid, "L_i", MAP_POINTS)}
    elif scenario == "internal-loss-line":
        p.check_keys(sweep, {"parameter", "start", "stop", "steps", "values", "fixed"}, "[sweep]")
        param = sweep.get("parameter", "L_s")
        if param not in ("L_s", "L_i"):
            raise p.error("internal-loss-line sweeps 'L_s' or 'L_i'", "parameter")
        other = "L_i" if param == "L_s" else "L_s"
        fixed = p.number(sweep, "fixed", 0.2, 0.0, LOSS_MAX)
        cfg.sweep = {"parameter": param, "other": other, "fixed": fixed,
                     "values": p.axis({"sweep": sweep}, "sweep", LINE_POINTS)}
    elif scenario == "external-loss-scan":
        p.check_keys(sweep, {"sweeps", "start", "stop", "steps", "values", "fixed"}, "[sweep]")
        sweeps = sweep.get("sweeps", ["l_s", "l_i", "both"])
        if not isinstance(sweeps, list) or any(s not in ("l_s", "l_i", "both") for s in sweeps):
            raise p.error("'sweeps' must list any of 'l_s', 'l_i', 'both'", "sweeps")
        cfg.sweep = {"sweeps": sweeps, "fixed": p.number(sweep, "fixed", 0.0, 0.0, LOSS_MAX),
                     "values": p.axis({"sweep": sweep}, "sweep", LINE_POINTS)}
    elif scenario == "mc-check":
        p.check_keys(mc, {"n_samples", "seed"}, "[mc]")
        n = p.number(mc, "n_samples", float(MC_SAMPLES), lo=montecarlo.MIN_SAMPLES)
        seed = p.number(mc, "seed", float(MC_SEED), lo=0.0, hi=2.0 ** 64 - 1)
        cfg.mc = {"n_samples": int(n), "seed": int(seed)}
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from None
    return parse_config(text, source=str(path))


# --- helpers -----------------------------------------------------------------

def normalization(state):
    """Factor |alpha_s| used for normalized columns; 1 for an undisplaced signal."""
    a = abs(state.alpha_s)
    return a if a > 0 else 1.0


def _curve_grid(state, curve, threads, **grid):
    grid.setdefault("phi", curve.config.phi0)
    return grid_delta_phi(state, curve.config, curve.scheme, threads=threads, **grid)


def find_crossover(fn, lo, hi, xtol=CROSSOVER_XTOL, samples=90):
    """First sign change of fn on [lo, hi], refined by bisection to xtol.

    Returns:
        The crossing point, or None if fn keeps one sign on the scan.
    """
    xs = np.linspace(lo, hi, samples + 1)
    vals = [fn(x) for x in xs]
    for a, b, fa, fb in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if fa == 0:
            return float(a)
        if fa * fb < 0:
            return float(bisect(fn, a, b, xtol=xtol))
    return None


def internal_loss_closed_forms(L_s, L_i, G=2.0, G2_unbalanced=5.0, alpha=3.0):
    """Normalized dark-fringe sensitivities of the three standard schemes from closed forms.

    Uses the general internal-loss expressions, which are exact for a coherent
    input at any asymmetric loss pair.
    """
    state = states.coherent(alpha)
    pa, pu = PAGain.from_gain(G), PAGain.from_gain(G2_unbalanced)
    lossy = LossBudget(L_s, L_i)
    lossless = not lossy.has_internal

    def cf(fid, pa2, sign=None):
        if lossless:
            fid = {FormId.SP_INTERNAL_GENERAL: FormId.SP_DARK_GENERAL,
                   FormId.JOINT_INTERNAL_GENERAL: FormId.JOINT_GENERAL}[fid]
        return formulary.closed_form(fid, state, pa, pa2, None if lossless else lossy,
                                     np.pi, sign) * alpha

    return {"balanced-sp": cf(FormId.SP_INTERNAL_GENERAL, pa),
            "unbalanced-sp": cf(FormId.SP_INTERNAL_GENERAL, pu),
            "joint": cf(FormId.JOINT_INTERNAL_GENERAL, pa, Sign.MINUS)}


def _crossovers(values_fn, lo, hi, balanced="balanced-sp"):
    """Loss values where the balanced scheme overtakes the best / becomes the worst."""
    def gap(x, pick):
        v = values_fn(x)
        others = [val for k, val in v.items() if k != balanced]
        return v[balanced] - pick(others)
    return {"beats_best_other": find_crossover(lambda x: gap(x, min), lo, hi),
            "becomes_worst": find_crossover(lambda x: gap(x, max), lo, hi)}


# --- scenario runners --------------------------------------------------------

def run_fringe_scan(cfg, threads=1):
    n = cfg.grid.get("points", PHASE_POINTS)
    phis = np.arange(n) * (2.0 * np.pi / n)
    norm = normalization(cfg.state)
    rows, summary = [], {}
    for curve in cfg.curves:
        d = _curve_grid(cfg.state, curve, threads, phi=phis)
        rows.extend((phi, curve.label, v, v * norm) for phi, v in zip(phis, d))
        finite = np.isfinite(d)
        if finite.any():
            k = int(np.argmin(np.where(finite, d, np.inf)))
            summary[curve.label] = {"min_normalized": float(d[k] * norm), "phi0": float(phis[k])}
    return ScenarioResult(cfg.scenario, ["phi0", "scheme", "delta_phi", "delta_phi_normalized"],
                          rows, summary=summary)


def run_internal_loss_line(cfg, threads=1):
    sw = cfg.sweep or {"parameter": "L_s", "other": "L_i", "fixed": 0.2,
                       "values": np.linspace(*LOSS_RANGE, LINE_POINTS)}
    vals = sw["values"]
    norm = normalization(cfg.state)
    series = {}
    for curve in cfg.curves:
        grid = {sw["parameter"]: vals, sw["other"]: sw["fixed"]}
        series[curve.label] = _curve_grid(cfg.state, curve, threads, **grid) * norm
    rows = []
    for k, x in enumerate(vals):
        rows.extend((x, label, series[label][k]) for label in series)
        rows.append((x, "mzi", 1.0))

    def at(x):
        grid = {sw["parameter"]: np.array([x]), sw["other"]: sw["fixed"]}
        return {c.label: float(_curve_grid(cfg.state, c, 1, **grid)[0] * norm) for c in cfg.curves}

    summary = {"parameter": sw["parameter"], "fixed": sw["fixed"]}
    if "balanced-sp" in series and len(series) > 1:
        summary.update(_crossovers(at, float(vals.min()), float(vals.max())))
    above = np.all(np.vstack(list(series.values())) > 1.0, axis=0)
    summary["all_above_mzi_from"] = float(vals[np.argmax(above)]) if above.any() else None
    return ScenarioResult(cfg.scenario, ["loss_value", "scheme", "delta_phi_normalized"], rows,
                          summary=summary)


def _loss_mesh(cfg):
    ls = cfg.grid.get("L_s", np.linspace(*LOSS_RANGE, MAP_POINTS))
    li = cfg.grid.get("L_i", np.linspace(*LOSS_RANGE, MAP_POINTS))
    return ls, li, *np.meshgrid(ls, li, indexing="ij")


def _map_values(cfg, threads):
    ls, li, LS, LI = _loss_mesh(cfg)
    norm = normalization(cfg.state)
    vals = np.stack([_curve_grid(cfg.state, c, threads, L_s=LS, L_i=LI) * norm
                     for c in cfg.curves])
    return LS, LI, vals


def run_loss_contour(cfg, threads=1):
    LS, LI, vals = _map_values(cfg, threads)
    rows = []
    for i in range(LS.shape[0]):
        for j in range(LS.shape[1]):
            rows.extend((LS[i, j], LI[i, j], c.label, vals[k, i, j])
                        for k, c in enumerate(cfg.curves))
    return ScenarioResult(cfg.scenario, ["L_s", "L_i", "scheme", "delta_phi_normalized"], rows,
                          summary=monotonicity(vals))


def monotonicity(vals, tol=1e-12):
    """Whether values grow with each loss, on the zero-loss axis lines and everywhere.

    Args:
        vals: Array (scheme, L_s index, L_i index) on ascending loss axes.

    Returns:
        Dict with "along_axes" (L_s swept at L_i[0] and L_i swept at L_s[0]) and
        "whole_grid". Far from the axes extra idler loss can lower the noise more
        than the signal, so the whole-grid property does not hold in general.
    """
    d_s, d_i = np.diff(vals, axis=1), np.diff(vals, axis=2)
    axes = bool(np.all(d_s[:, :, 0] >= -tol) and np.all(d_i[:, 0, :] >= -tol))
    grid = bool(np.all(d_s >= -tol) and np.all(d_i >= -tol))
    return {"along_axes": axes, "whole_grid": grid}


def best_config(values, labels, tie_tol=TIE_TOL):
    """Winner among per-scheme values with ordered tie-breaking.

    Args:
        values: Sequence of delta_phi values in priority order.
        labels: Scheme labels in the same order.

    Returns:
        (winner label, winner value, margin to the runner-up, tie flag). Schemes
        within tie_tol of the best count as tied; the earliest of them wins.
    """
    v = np.asarray(values, dtype=float)
    best = np.min(v)
    tied = np.flatnonzero(v <= best + tie_tol)
    k = int(tied[0])
    others = np.delete(v, k)
    margin = float(np.min(others) - v[k]) if others.size else np.inf
    return labels[k], float(v[k]), margin, bool(tied.size > 1)


def run_best_config_map(cfg, threads=1):
    LS, LI, vals = _map_values(cfg, threads)
    labels = [c.label for c in cfg.curves]
    rows = []
    for i in range(LS.shape[0]):
        for j in range(LS.shape[1]):
            w, wv, margin, tie = best_config(vals[:, i, j], labels)
            rows.append((LS[i, j], LI[i, j], w, wv, margin, int(tie)))
    counts = {lab: sum(1 for r in rows if r[2] == lab) for lab in labels}
    return ScenarioResult(cfg.scenario, ["L_s", "L_i", "winner", "winner_delta_phi", "margin",
                                         "tie"], rows,
                          summary={"wins": counts, "ties": sum(r[5] for r in rows)})


def run_external_loss_scan(cfg, threads=1):
    sw = cfg.sweep or {"sweeps": ["l_s", "l_i", "both"], "fixed": 0.0,
                       "values": np.linspace(*LOSS_RANGE, LINE_POINTS)}
    vals = sw["values"]
    norm = normalization(cfg.state)
    rows, summary = [], {}
    for name in sw["sweeps"]:
        if name == "both":
            grid = {"l_s": vals, "l_i": vals}
        else:
            grid = {name: vals, ("l_i" if name == "l_s" else "l_s"): sw["fixed"]}
        cols = [_curve_grid(cfg.state, c, threads, **grid) * norm for c in cfg.curves]
        rows.extend((name, x, *(col[k] for col in cols)) for k, x in enumerate(vals))
        summary[name] = {c.label: [float(col[0]), float(col[-1])]
                         for c, col in zip(cfg.curves, cols)}
    return ScenarioResult(cfg.scenario, ["sweep", "loss_value"] + [c.label for c in cfg.curves],
                          rows, summary=summary)


# --- formulary check ---------------------------------------------------------

CHECK_INTERNAL = LossBudget(L_s=0.1, L_i=0.25)
CHECK_INTERNAL_SYM = LossBudget(L_s=0.2, L_i=0.2)
CHECK_EXTERNAL = LossBudget(l_s=0.15, l_i=0.3)
CHECK_EXTERNAL_SYM = LossBudget(l_s=0.2, l_i=0.2)


def _check_states(info):
    """Input states each closed form is checked with."""
    if info.coherent:
        out = [("coherent-real", states.coherent(3.0))]
        # a complex amplitude is matched by rotating the local oscillator, which
        # cannot align both detected ports at once
        if info.port != "joint":
            out.append(("coherent-complex", states.coherent(3.0 * np.exp(0.4j))))
        return out
    return [("displaced-squeezed", states.squeezed_signal(2.5 * np.exp(0.3j), 0.4)),
            ("two-mode-squeezed", states.two_mode_squeezed(0.3, 2.0 + 1.0j, 0.5 - 0.3j))]


def _check_cases(G1=2.0, G2=5.0):
    """(form, gains, losses, phi, sign) combinations covering every form."""
    pa1, pa_bal, pa_unb = PAGain.from_gain(G1), PAGain.from_gain(G1), PAGain.from_gain(G2)
    for fid in FormId:
        info = REGISTRY[fid]
        if info.balanced:
            gains = [pa_bal]
        elif info.asymptotic:
            gains = [pa_unb]
        elif info.topology is Topology.TRUNCATED:
            gains = [PAGain()]
        else:
            gains = [pa_bal, pa_unb]
        losses = {"none": LossBudget(),
                  "internal": CHECK_INTERNAL_SYM if info.symmetric else CHECK_INTERNAL,
                  "external": CHECK_EXTERNAL_SYM if info.symmetric else CHECK_EXTERNAL}[info.loss]
        phis = {"dark": [np.pi], "bright": [0.0], "fringe": [np.pi, 0.0], "any": [0.7, 2.0],
                None: [None]}[info.fringe]
        signs = [Sign.PLUS, Sign.MINUS] if info.port == "joint" else [None]
        if fid in formulary._FIXED_SIGN:
            signs = [formulary._FIXED_SIGN[fid][0]]
        for pa2 in gains:
            for phi in phis:
                for sign in signs:
                    yield fid, pa1, pa2, losses, phi, sign


def run_formulary_check(cfg=None, threads=1):
    """Compare every closed form with the engine at its operating point."""
    rows, skipped, failures = [], 0, []
    for fid, pa1, pa2, losses, phi, sign in _check_cases():
        info = REGISTRY[fid]
        if fid is FormId.MZI_BASELINE:
            value = formulary.closed_form(fid, states.coherent(3.0), pa1)
            rows.append((fid.value, "", "", pa1.G, pa2.G, "coherent-real", value, value, 0.0, 0.0,
                         "baseline", "pass"))
            continue
        domain_ok = info.coherent or formulary.covariance_term_sign(
            fid, pa1, pa2, losses, phi, sign) > 0
        tol = formulary.asymptotic_tolerance(pa1, pa2) if info.asymptotic else FORMULARY_TOL
        for label, state in _check_states(info):
            if not domain_ok and not state.is_separable_moments():
                skipped += 1      # literal cross-covariance sign does not apply
                continue
            value = formulary.closed_form(fid, state, pa1, pa2, losses, phi, sign)
            cfg_, port, theta, ph = formulary.operating_point(fid, pa1, pa2, losses, phi, sign,
                                                              state.alpha_s)
            ref = engine.delta_phi(state, cfg_, MeasurementScheme(port, theta), ph)
            err = abs(value / ref - 1.0)
            ok = err <= tol
            if not ok:
                failures.append(fid.value)
            rows.append((fid.value, sign.value if sign else "", "" if phi is None else phi,
                         pa1.G, pa2.G, label, value, ref, err, tol,
                         "asymptotic" if info.asymptotic else "exact", "pass" if ok else "fail"))
    arbitration = arbitrate_unbalanced_external_row()
    for reading, (value, ref, err) in arbitration["readings"].items():
        rows.append((reading, "", "", 2.0, 5.0, "coherent-real", value, ref, err,
                     arbitration["tolerance"], "arbitration",
                     "winner" if reading == arbitration["winner"] else "loser"))
    summary = {"checked": len(rows), "skipped_correlated_outside_literal_domain": skipped,
               "failures": sorted(set(failures)), "table_row_winner": arbitration["winner"]}
    return ScenarioResult("formulary-check",
                          ["form", "sign", "phi", "G1", "G2", "state", "formulary", "engine",
                           "rel_error", "tolerance", "kind", "status"],
                          rows, passed=not failures, summary=summary)


def arbitrate_unbalanced_external_row(G1=2.0, G2=5.0, l=0.2, alpha=3.0):
    """Evaluate both readings of the unbalanced external-loss coherent row against the engine.

    Returns:
        Dict with per-reading (value, engine, relative error), the winner
        (smaller error) and the asymptotic tolerance.
    """
    state = states.coherent(alpha)
    pa1, pa2 = PAGain.from_gain(G1), PAGain.from_gain(G2)
    losses = LossBudget(l_s=l)
    out = {}
    for fid in (FormId.COHERENT_EXT_SP_UNBALANCED, FormId.COHERENT_EXT_SP_UNBALANCED_ALT):
        value = formulary.closed_form(fid, state, pa1, pa2, losses)
        cfg_, port, theta, phi = formulary.operating_point(fid, pa1, pa2, losses)
        ref = engine.delta_phi(state, cfg_, MeasurementScheme(port, theta), phi)
        out[fid.value] = (value, ref, abs(value / ref - 1.0))
    winner = min(out, key=lambda k: out[k][2])
    return {"readings": out, "winner": winner,
            "tolerance": formulary.asymptotic_tolerance(pa1, pa2)}


# --- Monte Carlo check -------------------------------------------------------

def mc_cases():
    """The three standard coherent-input configurations at their optimal fringe."""
    return [_curve("balanced-sp", 2.0), _curve("unbalanced-sp", 2.0, 5.0),
            _curve("joint", 2.0, port="joint-minus")]


def run_mc_check(cfg=None, threads=1, n_samples=None, seed=None):
    """Compare sampled variance and sensitivity with the engine."""
    mc = (cfg.mc if cfg is not None else {}) or {}
    n = int(n_samples or mc.get("n_samples", MC_SAMPLES))
    seed = int(mc.get("seed", MC_SEED) if seed is None else seed)
    state = states.coherent(3.0) if cfg is None else cfg.state
    curves = mc_cases() if cfg is None else cfg.curves
    bound = montecarlo.variance_bound(n)
    rows, passed = [], True
    for k, curve in enumerate(curves):
        spec = montecarlo.SampleSpec(n, (seed + k) % 2 ** 64)
        phi = curve.config.phi0
        _, var = engine.observable_stats(state, curve.config, curve.scheme, phi)
        _, svar = montecarlo.sample_observable(state, curve.config, curve.scheme, phi, spec)
        verr = abs(svar / var - 1.0)
        analytic = engine.delta_phi(state, curve.config, curve.scheme, phi)
        est = montecarlo.estimate_sensitivity(state, curve.config, curve.scheme, phi, spec)
        derr = abs(est.delta_phi / analytic - 1.0) if np.isfinite(analytic) else np.nan
        ok_v, ok_d = verr <= bound, bool(derr <= MC_DELTA_TOL)
        passed &= ok_v and ok_d
        rows.append((curve.label, "variance", var, svar, verr, bound, n, spec.seed,
                     "pass" if ok_v else "fail"))
        rows.append((curve.label, "delta_phi", analytic, est.delta_phi, derr, MC_DELTA_TOL, n,
                     spec.seed, "pass" if ok_d else "fail"))
    return ScenarioResult("mc-check", ["case", "quantity", "analytic", "estimated", "rel_error",
                                       "tolerance", "n", "seed", "status"], rows, passed=passed)


RUNNERS = {
    "fringe-scan": run_fringe_scan,
    "internal-loss-line": run_internal_loss_line,
    "loss-contour": run_loss_contour,
    "best-config-map": run_best_config_map,
    "external-loss-scan": run_external_loss_scan,
    "formulary-check": run_formulary_check,
}


def run_scenario(cfg, threads=1, seed=None):
    """Run a parsed scenario and return its result."""
    if cfg.scenario == "mc-check":
        return run_mc_check(cfg, threads, seed=seed)
    return RUNNERS[cfg.scenario](cfg, threads)


# --- output ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, FLOAT_FORMAT)
    return str(v)


def write_csv(path, columns, rows):
    """Write rows with a header line, 12 significant digits and '.' decimals."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


_PLOT_HEAD = '''"""Regenerate the figure for {csv}. Requires matplotlib."""
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

with open({csv!r}) as fh:
    rows = list(csv.DictReader(fh))
'''

_PLOT_BODY = {
    "lines": '''
series = defaultdict(lambda: ([], []))
for r in rows:
    xs, ys = series[r[{group!r}]]
    xs.append(float(r[{x!r}]))
    ys.append(float(r[{y!r}]))
fig, ax = plt.subplots()
for label, (xs, ys) in series.items():
    ax.plot(xs, ys, label=label)
ax.set_xlabel({x!r})
ax.set_ylabel({y!r})
ax.set_yscale("log")
ax.legend()
''',
    "contour": '''
import numpy as np
schemes = sorted({{r["scheme"] for r in rows}})
fig, axes = plt.subplots(1, len(schemes), figsize=(4 * len(schemes), 4))
for ax, s in zip(np.atleast_1d(axes), schemes):
    sub = [r for r in rows if r["scheme"] == s]
    xs = sorted({{float(r["L_s"]) for r in sub}})
    ys = sorted({{float(r["L_i"]) for r in sub}})
    z = np.array([float(r["delta_phi_normalized"]) for r in sub]).reshape(len(xs), len(ys))
    cs = ax.contourf(xs, ys, z.T, levels=20)
    fig.colorbar(cs, ax=ax)
    ax.set_title(s)
    ax.set_xlabel("L_s")
    ax.set_ylabel("L_i")
''',
    "map": '''
import numpy as np
xs = sorted({{float(r["L_s"]) for r in rows}})
ys = sorted({{float(r["L_i"]) for r in rows}})
names = list(dict.fromkeys(r["winner"] for r in rows))
z = np.array([names.index(r["winner"]) for r in rows]).reshape(len(xs), len(ys))
v = np.array([float(r["winner_delta_phi"]) for r in rows]).reshape(len(xs), len(ys))
fig, ax = plt.subplots()
ax.pcolormesh(xs, ys, z.T, cmap="tab10", vmin=0, vmax=9, shading="nearest",
              alpha=np.clip(1.0 - v.T / v.max(), 0.2, 1.0))
ax.set_xlabel("L_s")
ax.set_ylabel("L_i")
ax.set_title(", ".join(f"{{k}}: {{n}}" for k, n in enumerate(names)))
''',
    "wide": '''
sweeps = list(dict.fromkeys(r["sweep"] for r in rows))
cols = [c for c in rows[0] if c not in ("sweep", "loss_value")]
fig, axes = plt.subplots(1, len(sweeps), figsize=(4 * len(sweeps), 4), squeeze=False)
for ax, s in zip(axes[0], sweeps):
    sub = [r for r in rows if r["sweep"] == s]
    for c in cols:
        ax.plot([float(r["loss_value"]) for r in sub], [float(r[c]) for r in sub], label=c)
    ax.set_title(s)
    ax.set_xlabel("loss")
    ax.set_yscale("log")
axes[0][0].legend()
''',
}

_PLOT_KIND = {
    "fringe-scan": ("lines", dict(x="phi0", group="scheme", y="delta_phi_normalized")),
    "internal-loss-line": ("lines", dict(x="loss_value", group="scheme",
                                         y="delta_phi_normalized")),
    "loss-contour": ("contour", {}),
    "best-config-map": ("map", {}),
    "external-loss-scan": ("wide", {}),
}


def plot_script(scenario, csv_name):
    """Source of a standalone plotting script for a scenario CSV, or None."""
    if scenario not in _PLOT_KIND:
        return None
    kind, fields = _PLOT_KIND[scenario]
    body = _PLOT_BODY[kind].format(**fields)
    png = str(Path(csv_name).with_suffix(".png"))
    return (_PLOT_HEAD.format(csv=csv_name) + body
            + f"fig.tight_layout()\nfig.savefig({png!r})\n")


def write_outputs(cfg, result, out_dir):
    """Write the CSV (and plot script) for a result; returns the written paths."""
    out_dir = Path(out_dir)
    csv_path = write_csv(out_dir / cfg.output, result.columns, result.rows)
    paths = [csv_path]
    if cfg.plot_script:
        src = plot_script(result.scenario, csv_path.name)
        if src:
            script = csv_path.with_suffix(".plot.py")
            script.write_text(src)
            paths.append(script)
    return paths


def builtin_config(scenario):
    """Configuration equivalent to a file holding only the scenario line."""
    return parse_config(f'scenario = "{scenario}"\n', source=f"<{scenario}>")
