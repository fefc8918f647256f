"""Scenario files: YAML with explicit units in field names.

Layout::

    name: two-carrier
    n_frames: 10000
    loss_threshold_db: 140
    rate_unit_bps: 1.0e6        # utilities and rates are in this unit
    policy: compare             # upf | pf | pf-weighted | compare
    kkt_tol: 1.0e-8             # oracle tolerance
    early_stop_tol: null        # optional online stopping residual
    seed: 0
    output_dir: out
    channel:
      ref_distance_m: 1.0
      pathloss_exponent: 3.76
      noise_power_per_rb_w: 4.3e-15
      gain_mode: equal          # equal | pathloss
      equal_gain: 1.0e-12
      log_base: 2               # 2 | e
    carriers:
      - {id: 1, freq_hz: 3.5e9, power_w: 20, n_rbs: 100, rb_bandwidth_hz: 180000, snr_gap: 1.0}
    users:
      - {id: 1, distance_m: 120, pf_weight: 2, utility: {kind: sigmoidal, a: 5, b: 10}}
      - {id: 3, distance_m: 250, utility: {kind: logarithmic, k: 15, r_max: 100}}

Every validation failure raises :class:`ScenarioError` naming the field path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Union

import yaml

from .channel import Carrier, ChannelModel, GainMode
from .errors import CaschedError, ScenarioError
from .grouping import UserEquipment
from .scheduler import Policy
from .utility import UtilityKind, make_logarithmic, make_sigmoidal

COMPARE = "compare"

BUNDLED_DIR = Path(__file__).parent / "scenarios"


@dataclass
class Scenario:
    carriers: list[Carrier]
    users: list[UserEquipment]
    channel: ChannelModel
    loss_threshold: float
    n_frames: int = 10_000
    policy: Union[Policy, str] = COMPARE
    seed: int = 0
    output_dir: str = "out"
    rate_unit: float = 1e6
    kkt_tol: float = 1e-8
    early_stop_tol: float | None = None
    name: str = "scenario"

    def with_overrides(self, **kw) -> "Scenario":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def bundled(name: str = "two_carrier_8ue") -> Path:
    return BUNDLED_DIR / f"{name}.scenario"


class _Reader:
    """Pulls typed fields out of a mapping, tracking the dotted path."""

    def __init__(self, data, path: str):
        if not isinstance(data, dict):
            raise ScenarioError(f"expected a mapping, got {type(data).__name__}", path or "<root>")
        self.data = data
        self.path = path

    def loc(self, key) -> str:
        return f"{self.path}.{key}" if self.path else str(key)

    def get(self, key, kind, default=...):
        if key not in self.data or self.data[key] is None:
            if default is ...:
                raise ScenarioError("required field is missing", self.loc(key))
            return default
        v = self.data[key]
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ScenarioError(f"expected a number, got {v!r}", self.loc(key))
            v = float(v)
            if not math.isfinite(v):
                raise ScenarioError(f"expected a finite number, got {v!r}", self.loc(key))
        elif kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ScenarioError(f"expected an integer, got {v!r}", self.loc(key))
        elif kind is str:
            v = str(v)
        return v

    def sub(self, key):
        return _Reader(self.get(key, dict), self.loc(key))

    def items(self, key):
        v = self.get(key, list)
        if not isinstance(v, list) or not v:
            raise ScenarioError("expected a non-empty list", self.loc(key))
        return [_Reader(x, f"{self.loc(key)}[{i}]") for i, x in enumerate(v)]


def _wrap(fn, loc, *args, **kw):
    try:
        return fn(*args, **kw)
    except ScenarioError:
        raise
    except CaschedError as exc:
        raise ScenarioError(str(exc), loc) from exc


def _utility(r: _Reader):
    kind = r.get("kind", str).lower()
    if kind == UtilityKind.SIGMOIDAL.value:
        return _wrap(make_sigmoidal, r.path, r.get("a", float), r.get("b", float))
    if kind == UtilityKind.LOGARITHMIC.value:
        return _wrap(make_logarithmic, r.path, r.get("k", float), r.get("r_max", float))
    raise ScenarioError(f"unknown utility kind {kind!r} (sigmoidal | logarithmic)", r.loc("kind"))


def _log_base(v, loc):
    if v in (2, 2.0, "2"):
        return 2.0
    if v in ("e", math.e):
        return math.e
    raise ScenarioError(f"log_base must be 2 or e, got {v!r}", loc)


def parse_policy(value, loc="policy") -> Union[Policy, str]:
    if value == COMPARE:
        return COMPARE
    try:
        return Policy(value)
    except ValueError:
        raise ScenarioError(f"unknown policy {value!r} (upf | pf | pf-weighted | compare)", loc) from None


def scenario_from_dict(data: Any) -> Scenario:
    root = _Reader(data, "")
    ch = root.sub("channel")
    gain_mode = ch.get("gain_mode", str, "equal")
    try:
        gain_mode = GainMode(gain_mode)
    except ValueError:
        raise ScenarioError(f"gain_mode must be 'equal' or 'pathloss', got {gain_mode!r}",
                            ch.loc("gain_mode")) from None
    channel = _wrap(
        ChannelModel, ch.path,
        ref_distance=ch.get("ref_distance_m", float, 1.0),
        pathloss_exponent=ch.get("pathloss_exponent", float, 3.76),
        noise_power_per_rb=ch.get("noise_power_per_rb_w", float),
        gain_mode=gain_mode,
        equal_gain=ch.get("equal_gain", float, 1.0),
        log_base=_log_base(ch.data.get("log_base", 2), ch.loc("log_base")),
    )

    carriers = []
    for c in root.items("carriers"):
        carriers.append(_wrap(
            Carrier, c.path,
            id=c.get("id", int),
            freq=c.get("freq_hz", float),
            total_power=c.get("power_w", float),
            n_rbs=c.get("n_rbs", int),
            rb_bandwidth=c.get("rb_bandwidth_hz", float, 180e3),
            snr_gap=c.get("snr_gap", float, 1.0),
        ))
    users = []
    for u in root.items("users"):
        users.append(_wrap(
            UserEquipment, u.path,
            id=u.get("id", int),
            distance=u.get("distance_m", float),
            utility=_utility(u.sub("utility")),
            pf_weight=u.get("pf_weight", float, 1.0),
        ))
    for what, items in (("carriers", carriers), ("users", users)):
        ids = [x.id for x in items]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            raise ScenarioError(f"duplicate ids {dup}", what)

    n_frames = root.get("n_frames", int, 10_000)
    if n_frames < 1:
        raise ScenarioError("must be >= 1", "n_frames")
    rate_unit = root.get("rate_unit_bps", float, 1e6)
    kkt_tol = root.get("kkt_tol", float, 1e-8)
    early = root.get("early_stop_tol", float, None)
    for name, v in (("rate_unit_bps", rate_unit), ("kkt_tol", kkt_tol), ("early_stop_tol", early)):
        if v is not None and v <= 0:
            raise ScenarioError("must be > 0", name)
    return Scenario(
        carriers=carriers,
        users=users,
        channel=channel,
        loss_threshold=root.get("loss_threshold_db", float),
        n_frames=n_frames,
        policy=parse_policy(root.get("policy", str, COMPARE)),
        seed=root.get("seed", int, 0),
        output_dir=root.get("output_dir", str, "out"),
        rate_unit=rate_unit,
        kkt_tol=kkt_tol,
        early_stop_tol=early,
        name=root.get("name", str, "scenario"),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        loc = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise ScenarioError(f"parse error: {exc.problem}", loc) from exc
    return scenario_from_dict(data)


def scenario_to_dict(s: Scenario) -> dict:
    ch = s.channel
    return {
        "name": s.name,
        "n_frames": s.n_frames,
        "loss_threshold_db": s.loss_threshold,
        "rate_unit_bps": s.rate_unit,
        "policy": s.policy if isinstance(s.policy, str) else s.policy.value,
        "kkt_tol": s.kkt_tol,
        "early_stop_tol": s.early_stop_tol,
        "seed": s.seed,
        "output_dir": s.output_dir,
        "channel": {
            "ref_distance_m": ch.ref_distance,
            "pathloss_exponent": ch.pathloss_exponent,
            "noise_power_per_rb_w": ch.noise_power_per_rb,
            "gain_mode": ch.gain_mode.value,
            "equal_gain": ch.equal_gain,
            "log_base": 2 if ch.log_base == 2.0 else "e",
        },
        "carriers": [
            {"id": c.id, "freq_hz": c.freq, "power_w": c.total_power, "n_rbs": c.n_rbs,
             "rb_bandwidth_hz": c.rb_bandwidth, "snr_gap": c.snr_gap}
            for c in s.carriers
        ],
        "users": [
            {"id": u.id, "distance_m": u.distance, "pf_weight": u.pf_weight, "utility": u.utility.to_dict()}
            for u in s.users
        ],
    }


def dump_scenario(s: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(scenario_to_dict(s), sort_keys=False))
    return path
