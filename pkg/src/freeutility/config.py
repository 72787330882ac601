"""Experiment configuration files.

Configs are YAML documents.  Top-level keys:

``config_version`` (must be 1), ``experiment_id``, ``kind`` (control,
estimate, bcr, gvp or verify), ``alpha`` (number, list, or a comma
separated string such as ``"0.001,0.1,1,10"``), ``horizon``, ``seeds``
(integer, list, or a range string ``"0-99"``), ``out`` (CSV path), plus
one section named after the kind.  The README documents every section.

Table rows are keyed by history strings: symbol names separated by spaces.
``"*"`` matches every history; for tables indexed by the current action
(the environment and observation rewards) a bare action name is a
stationary row used at every cycle.  The most specific key wins.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from .errors import ValidationError
from .prob import NORM_TOL, Alphabet, IOType, VPMode

CONFIG_VERSION = 1
KINDS = ("control", "estimate", "bcr", "gvp", "verify")
TOP_KEYS = ("config_version", "experiment_id", "kind", "alpha", "horizon", "seeds", "out") + KINDS

SECTION_KEYS = {
    "control": ("actions", "observations", "reference", "environment",
                "reward_action", "reward_observation"),
    "estimate": ("observations", "sources", "prior", "truth"),
    "bcr": ("environment", "means", "prior", "parameters", "transitions", "reward_map",
            "reward_values", "initial_state", "mode", "floor", "controller"),
    "gvp": ("variables", "reference", "utility"),
    "verify": ("suites", "scale"),
}
VARIABLE_KEYS = ("name", "alphabet", "io", "mode")
IO_NAMES = {
    "output": IOType.OUTPUT,
    "disclosed": IOType.DISCLOSED_INPUT,
    "disclosed_input": IOType.DISCLOSED_INPUT,
    "undisclosed": IOType.UNDISCLOSED_INPUT,
    "undisclosed_input": IOType.UNDISCLOSED_INPUT,
}
MODE_NAMES = {"controlled": VPMode.CONTROLLED, "estimated": VPMode.ESTIMATED}


class ConfigError(ValidationError):
    """Invalid experiment config, with file and line context in the message."""


@dataclass(frozen=True)
class HistoryTable:
    """Rows keyed by history strings, resolved most specific first."""

    name: str
    rows: dict  # key string -> np.ndarray

    def lookup(self, keys):
        for key in keys:
            if key in self.rows:
                return self.rows[key]
        raise ConfigError(f"{self.name}: no row for history {keys[0]!r} and no '*' default")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    kind: str
    alphas: tuple
    horizon: int
    seeds: tuple
    out: Optional[str]
    section: dict
    config_version: int = CONFIG_VERSION
    source: str = "<config>"


class _Lines:
    """Map from key paths in the document to 1-based line numbers."""

    def __init__(self, text: str, source: str):
        self.source = source
        self.lines = {}
        try:
            node = yaml.compose(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{source}: malformed YAML: {exc}") from None
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self.lines[path + (str(k.value),)] = k.start_mark.line + 1
                self._walk(v, path + (str(k.value),))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def error(self, path, message):
        path = tuple(path)
        while path and path not in self.lines:
            path = path[:-1]
        line = self.lines.get(path)
        where = f"{self.source}:{line}" if line else f"{self.source} (override)"
        dotted = ".".join(str(p) for p in path) or "<top>"
        return ConfigError(f"{where}: {dotted}: {message}")


def _check_keys(ctx, data, valid, path):
    if not isinstance(data, dict):
        raise ctx.error(path, f"expected a mapping with keys {', '.join(valid)}")
    unknown = [k for k in data if k not in valid]
    if unknown:
        raise ctx.error(path + (str(unknown[0]),),
                        f"unknown key {unknown[0]!r}; valid keys are: {', '.join(valid)}")


def _parse_alphas(ctx, raw):
    if raw is None:
        return (1.0,)
    if isinstance(raw, str):
        parts = [p.strip() for p in raw.split(",") if p.strip()]
    elif isinstance(raw, (list, tuple)):
        parts = list(raw)
    else:
        parts = [raw]
    if not parts:
        raise ctx.error(("alpha",), "sweep list must be non-empty")
    out = []
    for p in parts:
        try:
            a = float(p)
        except (TypeError, ValueError):
            raise ctx.error(("alpha",), f"not a number: {p!r}") from None
        if not np.isfinite(a) or a <= 0:
            raise ctx.error(("alpha",), f"alpha must be positive and finite, got {p!r}")
        out.append(a)
    return tuple(out)


def _parse_seeds(ctx, raw):
    if raw is None:
        return (0,)
    if isinstance(raw, bool):
        raise ctx.error(("seeds",), "seeds must be integers")
    if isinstance(raw, int):
        return (raw,)
    if isinstance(raw, str):
        seeds = []
        for part in raw.split(","):
            part = part.strip()
            lo, sep, hi = part.partition("-")
            try:
                seeds.extend(range(int(lo), int(hi) + 1) if sep else [int(part)])
            except ValueError:
                raise ctx.error(("seeds",), f"bad seed spec {part!r}") from None
        raw = seeds
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ctx.error(("seeds",), "seeds must be a non-empty list, an integer or a range 'a-b'")
    if not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in raw):
        raise ctx.error(("seeds",), "seeds must be non-negative integers")
    return tuple(raw)


def _alphabet(ctx, raw, path):
    if isinstance(raw, int) and not isinstance(raw, bool):
        if raw < 1:
            raise ctx.error(path, "alphabet size must be at least 1")
        return Alphabet.of_size(raw)
    if isinstance(raw, list) and raw:
        try:
            return Alphabet(tuple(raw))
        except ValidationError as exc:
            raise ctx.error(path, str(exc)) from None
    raise ctx.error(path, "alphabet must be a size or a non-empty list of symbol names")


def _vector(ctx, raw, alphabet, path, probs):
    """Row given as a list in alphabet order or a mapping symbol -> value."""
    if isinstance(raw, dict):
        vec = np.zeros(len(alphabet))
        for sym, val in raw.items():
            if str(sym) not in alphabet.symbols:
                raise ctx.error(path + (str(sym),),
                                f"unknown symbol {sym!r}; expected one of {list(alphabet.symbols)}")
            vec[alphabet.symbols.index(str(sym))] = _number(ctx, val, path + (str(sym),))
    elif isinstance(raw, list):
        if len(raw) != len(alphabet):
            raise ctx.error(path, f"row has {len(raw)} entries, expected {len(alphabet)}")
        vec = np.array([_number(ctx, v, path + (i,)) for i, v in enumerate(raw)])
    elif not probs and isinstance(raw, (int, float)) and not isinstance(raw, bool):
        vec = np.full(len(alphabet), float(raw))
    else:
        raise ctx.error(path, "expected a list or a symbol -> value mapping")
    if probs:
        if np.any(vec < 0):
            raise ctx.error(path, "negative probability")
        s = vec.sum()
        if abs(s - 1.0) > NORM_TOL:
            raise ctx.error(path, f"row sums to {s:.12g}, expected 1")
        vec = vec / s
    vec.setflags(write=False)
    return vec


def _number(ctx, raw, path):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ctx.error(path, f"expected a number, got {raw!r}")
    if not np.isfinite(raw):
        raise ctx.error(path, "value must be finite")
    return float(raw)


def _history_table(ctx, raw, path, name, parts, alphabet, probs, allow_stationary=None):
    """Parse a mapping from history keys to rows.

    ``parts(tokens, allow_stationary)`` returns True for a well-formed key
    or a reason string.  A bare row is shorthand for ``{"*": row}``.
    """
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raw = {"*": raw}
    rows = {}
    for key, row in raw.items():
        key = "" if key is None else str(key)
        kpath = path + (key,)
        tokens = key.split()
        if key.strip() != "*":
            ok = parts(tokens, allow_stationary)
            if ok is not True:
                raise ctx.error(kpath, f"bad history key {key!r}: {ok}")
            key = " ".join(tokens)
        else:
            key = "*"
        rows[key] = _vector(ctx, row, alphabet, kpath, probs)
    return HistoryTable(name, rows)


def _control_key_checker(actions, observations, ends_with_action, horizon):
    def check(tokens, allow_stationary):
        if allow_stationary and len(tokens) == 1 and tokens[0] in actions.symbols:
            return True
        if (len(tokens) % 2 == 1) != ends_with_action:
            return "expected alternating actions and observations" + (
                " ending with an action" if ends_with_action else "")
        for i, tok in enumerate(tokens):
            alph = actions if i % 2 == 0 else observations
            if tok not in alph.symbols:
                return f"symbol {tok!r} at position {i + 1} is not in {list(alph.symbols)}"
        if (len(tokens) + 1) // 2 > horizon:
            return f"history is longer than the horizon {horizon}"
        return True
    return check


def _parse_control(ctx, sec, horizon):
    path = ("control",)
    _check_keys(ctx, sec, SECTION_KEYS["control"], path)
    actions = _alphabet(ctx, sec.get("actions", 2), path + ("actions",))
    observations = _alphabet(ctx, sec.get("observations", 2), path + ("observations",))
    if "environment" not in sec:
        raise ctx.error(path, "missing required key 'environment'")
    hist_keys = _control_key_checker(actions, observations, False, horizon)
    act_keys = _control_key_checker(actions, observations, True, horizon)
    A = len(actions)
    return {
        "actions": actions,
        "observations": observations,
        "environment": _history_table(ctx, sec["environment"], path + ("environment",),
                                      "control.environment", act_keys, observations, True, True),
        "reference": _history_table(ctx, sec.get("reference", [1.0 / A] * A), path + ("reference",),
                                    "control.reference", hist_keys, actions, True),
        "reward_action": _history_table(ctx, sec.get("reward_action", 0.0), path + ("reward_action",),
                                        "control.reward_action", hist_keys, actions, False),
        "reward_observation": _history_table(
            ctx, sec.get("reward_observation", 0.0), path + ("reward_observation",),
            "control.reward_observation", act_keys, observations, False, True),
    }


def _named_weights(ctx, raw, names, path):
    alph = Alphabet(tuple(names))
    if raw is None:
        w = np.full(len(alph), 1.0 / len(alph))
        w.setflags(write=False)
        return w
    return _vector(ctx, raw, alph, path, True)


def _parse_estimate(ctx, sec):
    path = ("estimate",)
    _check_keys(ctx, sec, SECTION_KEYS["estimate"], path)
    observations = _alphabet(ctx, sec.get("observations", 2), path + ("observations",))
    sources = sec.get("sources")
    if not isinstance(sources, dict) or not sources:
        raise ctx.error(path + ("sources",), "expected a non-empty mapping source name -> distribution")
    names = [str(k) for k in sources]
    probs = np.stack([
        _vector(ctx, row, observations, path + ("sources", str(k)), True) for k, row in sources.items()
    ])
    prior = _named_weights(ctx, sec.get("prior"), names, path + ("prior",))
    truth = sec.get("truth")
    if truth is not None and str(truth) not in names:
        raise ctx.error(path + ("truth",), f"unknown source {truth!r}; expected one of {names}")
    return {
        "observations": observations,
        "names": tuple(names),
        "probs": probs,
        "prior": prior,
        "truth": None if truth is None else names.index(str(truth)),
    }


def _matrix(ctx, raw, path, ndim, probs):
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ctx.error(path, "expected a nested numeric list") from None
    if arr.ndim != ndim:
        raise ctx.error(path, f"expected a {ndim}-dimensional nested list, got {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ctx.error(path, "non-finite entry")
    if probs:
        bad = np.argwhere((np.abs(arr.sum(-1) - 1.0) > NORM_TOL) | np.any(arr < 0, axis=-1))
        if bad.size:
            idx = tuple(int(i) for i in bad[0])
            raise ctx.error(path + idx, f"row {list(idx)} sums to {arr[idx].sum():.12g}, expected 1")
        arr = arr / arr.sum(-1, keepdims=True)
    return arr


def _parse_bcr(ctx, sec):
    path = ("bcr",)
    _check_keys(ctx, sec, SECTION_KEYS["bcr"], path)
    env = sec.get("environment", "bernoulli-bandit")
    out = {"environment": env}
    if env == "bernoulli-bandit":
        if "means" not in sec:
            raise ctx.error(path, "bernoulli-bandit needs 'means' (one row of arm means per parameter)")
        means = _matrix(ctx, sec["means"], path + ("means",), 2, False)
        if np.any((means < 0) | (means > 1)):
            raise ctx.error(path + ("means",), "arm means must lie in [0, 1]")
        out["means"] = means
        n_theta = means.shape[0]
    elif env == "finite-mdp":
        if "transitions" not in sec:
            raise ctx.error(path, "finite-mdp needs 'transitions' with shape (parameter, action, state, state)")
        trans = _matrix(ctx, sec["transitions"], path + ("transitions",), 4, True)
        n_theta, A, S, S2 = trans.shape
        if S != S2:
            raise ctx.error(path + ("transitions",), "transition matrices must be square")
        out["transitions"] = trans
        values = sec.get("reward_values", [0.0])
        out["reward_values"] = _matrix(ctx, values, path + ("reward_values",), 1, False)
        rmap = sec.get("reward_map")
        if rmap is not None:
            rmap = _matrix(ctx, rmap, path + ("reward_map",), 3, False).astype(int)
            if rmap.shape != (S, A, S):
                raise ctx.error(path + ("reward_map",), f"expected shape {(S, A, S)}, got {rmap.shape}")
            if np.any((rmap < 0) | (rmap >= out["reward_values"].size)):
                raise ctx.error(path + ("reward_map",), "entries must index reward_values")
        out["reward_map"] = rmap
        init = sec.get("initial_state", 0)
        if not isinstance(init, int) or not 0 <= init < S:
            raise ctx.error(path + ("initial_state",), f"must be an integer state in [0, {S})")
        out["initial_state"] = init
    else:
        raise ctx.error(path + ("environment",),
                        f"unknown environment {env!r}; valid: bernoulli-bandit, finite-mdp")
    names = sec.get("parameters", [f"theta{i}" for i in range(n_theta)])
    if not isinstance(names, list) or len(names) != n_theta:
        raise ctx.error(path + ("parameters",), f"expected {n_theta} parameter names")
    out["names"] = tuple(str(n) for n in names)
    out["prior"] = _named_weights(ctx, sec.get("prior"), out["names"], path + ("prior",))
    mode = sec.get("mode", "mixture")
    if mode not in ("mixture", "posterior-sample"):
        raise ctx.error(path + ("mode",), "mode must be 'mixture' or 'posterior-sample'")
    out["mode"] = mode
    floor = sec.get("floor", 0.0)
    if isinstance(floor, bool) or not isinstance(floor, (int, float)) or not 0 <= floor < 1:
        raise ctx.error(path + ("floor",), "floor must be a number in [0, 1)")
    out["floor"] = float(floor)
    controller = sec.get("controller", "greedy")
    if controller not in ("greedy", "soft"):
        raise ctx.error(path + ("controller",), "controller must be 'greedy' or 'soft'")
    out["controller"] = controller
    return out


def _parse_gvp(ctx, sec):
    path = ("gvp",)
    _check_keys(ctx, sec, SECTION_KEYS["gvp"], path)
    raw_vars = sec.get("variables")
    if not isinstance(raw_vars, list) or not raw_vars:
        raise ctx.error(path + ("variables",), "expected a non-empty list of variables")
    variables = []
    for i, rv in enumerate(raw_vars):
        vpath = path + ("variables", i)
        _check_keys(ctx, rv, VARIABLE_KEYS, vpath)
        if "name" not in rv:
            raise ctx.error(vpath, "variable needs a 'name'")
        io = str(rv.get("io", "disclosed"))
        mode = str(rv.get("mode", "estimated"))
        if io not in IO_NAMES:
            raise ctx.error(vpath + ("io",), f"unknown io {io!r}; valid: {', '.join(IO_NAMES)}")
        if mode not in MODE_NAMES:
            raise ctx.error(vpath + ("mode",), f"unknown mode {mode!r}; valid: {', '.join(MODE_NAMES)}")
        variables.append((str(rv["name"]), _alphabet(ctx, rv.get("alphabet", 2), vpath + ("alphabet",)),
                          IO_NAMES[io], MODE_NAMES[mode]))
    names = [v[0] for v in variables]
    if len(set(names)) != len(names):
        raise ctx.error(path + ("variables",), "variable names must be unique")

    def prefix_checker(t):
        def check(tokens, _):
            if len(tokens) != t:
                return f"expected values of the {t} preceding variable(s) {names[:t]}"
            for i, tok in enumerate(tokens):
                if tok not in variables[i][1].symbols:
                    return f"{tok!r} is not a value of {names[i]!r}"
            return True
        return check

    tables = {}
    for part, probs in (("reference", True), ("utility", False)):
        raw = sec.get(part, {})
        if not isinstance(raw, dict):
            raise ctx.error(path + (part,), "expected a mapping variable name -> table")
        for key in raw:
            if str(key) not in names:
                raise ctx.error(path + (part, str(key)),
                                f"unknown variable {key!r}; valid: {', '.join(names)}")
        tables[part] = []
        for t, (name, alph, _, _) in enumerate(variables):
            if part == "reference" and name not in raw:
                raise ctx.error(path + (part,), f"missing table for variable {name!r}")
            tables[part].append(_history_table(
                ctx, raw.get(name, 0.0), path + (part, name), f"gvp.{part}.{name}",
                prefix_checker(t), alph, probs))
    return {"variables": tuple(variables), "reference": tuple(tables["reference"]),
            "utility": tuple(tables["utility"])}


def _parse_verify(ctx, sec):
    from .verify import SUITES

    path = ("verify",)
    sec = sec or {}
    _check_keys(ctx, sec, SECTION_KEYS["verify"], path)
    suites = sec.get("suites", "all")
    if suites == "all":
        suites = list(SUITES)
    if isinstance(suites, str):
        suites = [s.strip() for s in suites.split(",")]
    for s in suites:
        if s not in SUITES:
            raise ctx.error(path + ("suites",), f"unknown suite {s!r}; valid: {', '.join(SUITES)}")
    scale = sec.get("scale", 1.0)
    if isinstance(scale, bool) or not isinstance(scale, (int, float)) or not 0 < scale <= 1:
        raise ctx.error(path + ("scale",), "scale must be a number in (0, 1]")
    return {"suites": tuple(suites), "scale": float(scale)}


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key=value`` pairs; dotted keys reach into sections."""
    data = copy.deepcopy(data)
    for item in overrides or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        parts = key.split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {p!r} is not a section")
        node[parts[-1]] = yaml.safe_load(value) if value.strip() else None
    return data


def parse_text(text: str, source: str = "<config>", overrides=()) -> ExperimentConfig:
    ctx = _Lines(text, source)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: malformed YAML: {exc}") from None
    data = apply_overrides(data or {}, overrides)
    _check_keys(ctx, data, TOP_KEYS, ())
    version = data.get("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ctx.error(("config_version",), f"unsupported config_version {version!r}; this build reads {CONFIG_VERSION}")
    kind = data.get("kind")
    if kind not in KINDS:
        raise ctx.error(("kind",), f"kind must be one of {', '.join(KINDS)}, got {kind!r}")
    for other in KINDS:
        if other != kind and other in data:
            raise ctx.error((other,), f"section {other!r} does not apply to kind {kind!r}")
    horizon = data.get("horizon", 1)
    if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 0:
        raise ctx.error(("horizon",), "horizon must be a non-negative integer")
    sec = data.get(kind)
    if sec is None and kind != "verify":
        raise ctx.error((), f"missing section {kind!r}")
    if kind == "control":
        section = _parse_control(ctx, sec, horizon)
    elif kind == "estimate":
        section = _parse_estimate(ctx, sec)
    elif kind == "bcr":
        section = _parse_bcr(ctx, sec)
    elif kind == "gvp":
        section = _parse_gvp(ctx, sec)
    else:
        section = _parse_verify(ctx, sec)
    out = data.get("out")
    seeds_default = None
    if kind == "verify" and "seeds" not in data:
        from .verify import SEED
        seeds_default = SEED
    return ExperimentConfig(
        experiment_id=str(data.get("experiment_id", kind)),
        kind=kind,
        alphas=_parse_alphas(ctx, data.get("alpha")),
        horizon=horizon,
        seeds=_parse_seeds(ctx, data.get("seeds", seeds_default)),
        out=None if out is None else str(out),
        section=section,
        config_version=version,
        source=source,
    )


def parse_config(path, overrides=()) -> ExperimentConfig:
    """Read and validate a config file; ``overrides`` are ``key=value`` strings."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_text(text, str(path), overrides)


def control_keys(history_names, action=None):
    """Lookup order for a control table row, most specific first."""
    full = " ".join(history_names + ([action] if action is not None else []))
    keys = [full]
    if action is not None:
        keys.append(action)
    keys.append("*")
    return keys
