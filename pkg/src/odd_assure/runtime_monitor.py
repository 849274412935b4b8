"""Runtime confidence monitor: observations in, posterior reports out.

A model bundle ties an ODD spec to a Bayesian network by binding leaf ODD
classes to network nodes whose states are the class's attribute names. Each
tick discretizes the incoming readings, feeds the resulting states in as
evidence, and reports the posterior over the objective node together with its
mean and variance under the bundle's state values. Ticks are independent: no
state is carried between observations, so a shared bundle may serve many
threads.

Readings that leave the ODD are, by default, dropped from the evidence and
flagged; a bundle may instead declare a worst-case state per class to pin
them to.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from . import bayes_core, odd_model
from .bayes_core import BayesNet, EvidenceSet, Posterior
from .confidence_templates import AcpBinding
from .odd_model import Observation, OddSpec, OUT_OF_ODD

DROP = "drop"
WORST_CASE = "worst-case"

log = logging.getLogger("odd_assure.runtime_monitor")


class MonitorError(Exception):
    pass


class DocumentError(MonitorError):
    pass


class BindingMismatch(MonitorError):
    """A binding points at a missing node or the state sets disagree."""


class OutOfOrderTimestamp(MonitorError):
    pass


class BadScript(MonitorError):
    pass


@dataclass(frozen=True)
class ModelBundle:
    odd: OddSpec
    net: BayesNet
    bindings: Mapping[str, str]  # ODD class name -> BN node id
    acp: AcpBinding
    oodd_policy: str = DROP
    worst_states: Mapping[str, str] = field(default_factory=dict)

    @property
    def state_values(self) -> Mapping[str, float]:
        return self.acp.state_values


@dataclass(frozen=True)
class ConfidenceReport:
    time: float
    evidence: dict[str, str]
    posterior: Posterior | None
    mean: float | None
    variance: float | None
    in_odd: bool
    dropped_readings: tuple[str, ...]
    degenerate: bool = False


def _check_bindings(bundle: ModelBundle) -> None:
    for class_name, node_id in bundle.bindings.items():
        cls = bundle.odd.classes.get(class_name)
        if cls is None:
            raise BindingMismatch(f"binding names unknown ODD class {class_name!r}")
        if node_id not in bundle.net.nodes:
            raise BindingMismatch(f"binding for {class_name!r} names unknown node {node_id!r}")
        attr_names = {a.name for a in cls.attributes}
        node_states = set(bundle.net.nodes[node_id].states)
        if attr_names != node_states:
            raise BindingMismatch(
                f"states of node {node_id!r} {sorted(node_states)} do not match "
                f"attributes of class {class_name!r} {sorted(attr_names)}"
            )
    if bundle.oodd_policy not in (DROP, WORST_CASE):
        raise DocumentError(f"unknown out-of-ODD policy {bundle.oodd_policy!r}")
    if bundle.oodd_policy == WORST_CASE:
        for class_name in bundle.bindings:
            worst = bundle.worst_states.get(class_name)
            if worst is None:
                raise BindingMismatch(f"worst-case policy needs a worst state for {class_name!r}")
            if worst not in {a.name for a in bundle.odd.classes[class_name].attributes}:
                raise BindingMismatch(f"worst state {worst!r} is not a state of {class_name!r}")
    objective = bundle.acp.objective
    if objective != bundle.net.objective:
        raise BindingMismatch(
            f"ACP objective {objective!r} is not the net objective {bundle.net.objective!r}"
        )
    missing = set(bundle.net.nodes[objective].states) - set(bundle.acp.state_values)
    if missing:
        raise BindingMismatch(f"state values missing for objective states {sorted(missing)}")


def load_bundle(manifest_path) -> ModelBundle:
    """Load a bundle manifest and the files it references.

    Manifest schema: ``{"odd": path, "net": path, "bindings": {class: node},
    "acp": {solution_id, objective, state_values}, "oodd_policy": "drop" |
    "worst-case", "worst_states": {class: state}}``. Relative paths resolve
    against the manifest's directory. All cross-references are validated
    before the immutable bundle is returned.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON in {manifest_path}: {exc}") from exc
    try:
        odd_path = manifest_path.parent / manifest["odd"]
        net_path = manifest_path.parent / manifest["net"]
        acp_doc = manifest["acp"]
        acp = AcpBinding(
            solution_id=acp_doc["solution_id"],
            objective=acp_doc["objective"],
            state_values={k: float(v) for k, v in acp_doc["state_values"].items()},
        )
        bundle = ModelBundle(
            odd=odd_model.load_odd_spec(odd_path),
            net=bayes_core.load_bn(net_path),
            bindings=dict(manifest.get("bindings", {})),
            acp=acp,
            oodd_policy=manifest.get("oodd_policy", DROP),
            worst_states=dict(manifest.get("worst_states", {})),
        )
    except KeyError as exc:
        raise DocumentError(f"bundle manifest misses key {exc}") from exc
    _check_bindings(bundle)
    return bundle


def make_bundle(odd: OddSpec, net: BayesNet, bindings: Mapping[str, str], acp: AcpBinding,
                oodd_policy: str = DROP, worst_states: Mapping[str, str] | None = None) -> ModelBundle:
    """Assemble and validate a bundle from in-memory parts."""
    bundle = ModelBundle(odd, net, dict(bindings), acp, oodd_policy, dict(worst_states or {}))
    _check_bindings(bundle)
    return bundle


def step(bundle: ModelBundle, obs: Observation) -> ConfidenceReport:
    """Evaluate one observation against the bundle.

    Discretized readings of bound classes become evidence; out-of-ODD and
    defective readings are dropped and flagged (or pinned to the worst state
    under that policy). Evidence with ~zero probability yields a degenerate
    report instead of raising.
    """
    interp = odd_model.interpret(bundle.odd, obs)
    evidence: dict[str, str] = {}
    dropped: list[str] = []
    for class_name in sorted(obs.readings):
        if class_name in interp.errors:
            dropped.append(class_name)
            continue
        state = interp.states[class_name]
        node_id = bundle.bindings.get(class_name)
        if state is OUT_OF_ODD:
            if bundle.oodd_policy == WORST_CASE and node_id is not None:
                evidence[node_id] = bundle.worst_states[class_name]
            else:
                dropped.append(class_name)
            continue
        if node_id is not None:
            evidence[node_id] = state

    in_odd = not any(s is OUT_OF_ODD for s in interp.states.values())
    try:
        post = bayes_core.posterior(
            bundle.net, bundle.acp.objective, EvidenceSet(evidence)
        )
    except bayes_core.ZeroProbabilityEvidence:
        return ConfidenceReport(
            time=obs.time,
            evidence=evidence,
            posterior=None,
            mean=None,
            variance=None,
            in_odd=in_odd,
            dropped_readings=tuple(dropped),
            degenerate=True,
        )
    mean, variance = bayes_core.mean_variance(post, bundle.state_values)
    return ConfidenceReport(
        time=obs.time,
        evidence=evidence,
        posterior=post,
        mean=mean,
        variance=variance,
        in_odd=in_odd,
        dropped_readings=tuple(dropped),
    )


def run(
    bundle: ModelBundle,
    stream: Iterable[Observation],
    on_out_of_order: str = "raise",
) -> Iterator[ConfidenceReport]:
    """One report per observation, in input order; ticks are independent.

    Timestamps must be non-decreasing; a violation raises OutOfOrderTimestamp
    or, with ``on_out_of_order="warn"``, is passed through untouched.
    """
    if on_out_of_order not in ("raise", "warn"):
        raise MonitorError(f"on_out_of_order must be 'raise' or 'warn', got {on_out_of_order!r}")
    last_time = None
    for obs in stream:
        if last_time is not None and obs.time < last_time:
            if on_out_of_order == "raise":
                raise OutOfOrderTimestamp(f"time {obs.time} after {last_time}")
            log.warning("out-of-order timestamp %s after %s", obs.time, last_time)
        last_time = obs.time if last_time is None else max(last_time, obs.time)
        yield step(bundle, obs)


# ---------------------------------------------------------------------------
# Observation stream I/O


def parse_observation(line: str) -> Observation:
    doc = json.loads(line)
    return Observation(
        time=float(doc["t"]),
        x=float(doc.get("x", 0.0)),
        y=float(doc.get("y", 0.0)),
        readings={k: float(v) for k, v in doc.get("readings", {}).items()},
    )


def observation_to_line(obs: Observation) -> str:
    return json.dumps(
        {"t": obs.time, "x": obs.x, "y": obs.y, "readings": dict(obs.readings)}
    )


def report_to_document(report: ConfidenceReport) -> dict:
    return {
        "t": report.time,
        "evidence": report.evidence,
        "posterior": report.posterior.as_dict() if report.posterior else None,
        "mean": report.mean,
        "variance": report.variance,
        "in_odd": report.in_odd,
        "dropped_readings": list(report.dropped_readings),
        "degenerate": report.degenerate,
    }


REPORT_CSV_COLUMNS = (
    "t",
    "in_odd",
    "mean",
    "variance",
    "degenerate",
    "evidence",
    "dropped_readings",
    "posterior",
)


def report_to_csv_row(report: ConfidenceReport) -> list[str]:
    post = report.posterior
    return [
        repr(report.time),
        str(report.in_odd).lower(),
        "" if report.mean is None else f"{report.mean:.6f}",
        "" if report.variance is None else f"{report.variance:.6f}",
        str(report.degenerate).lower(),
        ";".join(f"{k}={v}" for k, v in sorted(report.evidence.items())),
        ";".join(report.dropped_readings),
        "" if post is None else ";".join(
            f"{s}={p:.6f}" for s, p in zip(post.states, post.probs)
        ),
    ]


# ---------------------------------------------------------------------------
# Synthetic traces (stands in for a live simulation feed)


def synth_trace(config, seed: int = 0) -> list[Observation]:
    """Generate a deterministic observation trace from a scenario script.

    Script schema: ``{"t0": s, "dt": s, "x": v, "y": v, "channels": {class:
    {"segments": [{"mode": "const"|"ramp", ...fields, "ticks": n}], "noise":
    amplitude}}}``. Ramps hit their endpoints exactly; noise adds a uniform
    [-amplitude, amplitude] term drawn from the seeded generator. All
    channels must cover the same number of ticks.
    """
    if isinstance(config, str):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as exc:
            raise BadScript(f"invalid JSON: {exc}") from exc
    if not isinstance(config, dict) or not isinstance(config.get("channels"), dict):
        raise BadScript("script must be an object with a 'channels' map")
    if not config["channels"]:
        raise BadScript("script declares no channels")

    t0 = float(config.get("t0", 0.0))
    dt = float(config.get("dt", 1.0))
    x = float(config.get("x", 0.0))
    y = float(config.get("y", 0.0))
    if dt <= 0:
        raise BadScript("dt must be positive")

    series: dict[str, list[float]] = {}
    noise_amp: dict[str, float] = {}
    for class_name, channel in config["channels"].items():
        if not isinstance(channel, dict):
            raise BadScript(f"channel {class_name!r} must be an object")
        segments = channel.get("segments")
        if segments is None:
            segments = [dict(channel, ticks=channel.get("ticks"))]
        values: list[float] = []
        for seg in segments:
            ticks = seg.get("ticks")
            if not isinstance(ticks, int) or ticks < 1:
                raise BadScript(f"channel {class_name!r}: segment needs integer ticks >= 1")
            mode = seg.get("mode", "const")
            if mode == "const":
                if "value" not in seg:
                    raise BadScript(f"channel {class_name!r}: const segment needs 'value'")
                values.extend([float(seg["value"])] * ticks)
            elif mode == "ramp":
                if "start" not in seg or "end" not in seg:
                    raise BadScript(f"channel {class_name!r}: ramp segment needs start/end")
                start, end = float(seg["start"]), float(seg["end"])
                if ticks == 1:
                    values.append(start)
                else:
                    step_size = (end - start) / (ticks - 1)
                    values.extend(start + i * step_size for i in range(ticks))
            else:
                raise BadScript(f"channel {class_name!r}: unknown mode {mode!r}")
        series[class_name] = values
        amp = float(channel.get("noise", 0.0))
        if amp < 0:
            raise BadScript(f"channel {class_name!r}: noise amplitude must be >= 0")
        noise_amp[class_name] = amp

    lengths = {len(v) for v in series.values()}
    if len(lengths) != 1:
        raise BadScript(f"channels cover different tick counts: {sorted(lengths)}")
    n_ticks = lengths.pop()

    rng = random.Random(seed)
    observations = []
    for i in range(n_ticks):
        readings = {}
        for class_name in sorted(series):
            value = series[class_name][i]
            amp = noise_amp[class_name]
            if amp > 0.0:
                value += rng.uniform(-amp, amp)
            readings[class_name] = value
        observations.append(Observation(time=t0 + i * dt, x=x, y=y, readings=readings))
    return observations
