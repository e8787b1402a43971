"""Combine per-band reconstructions into one signal.

Each band is known only up to its own sign.  On an overlap region both
``g_lambda^ / psi_lambda^`` and ``g_mu^ / psi_mu^`` estimate the same
``f^``, so their correlation fixes the relative sign.  Relative signs are
propagated breadth-first over the overlap graph and the result is
synthesized with the canonical dual.
"""
from __future__ import annotations

import json
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .blcore import BandLimitedSignal, forward_spectrum, signal_distance
from .errors import (
    NoInformativeOverlapError,
    PipelineError,
    RecoveryError,
    SignPropagationError,
    SignretError,
)
from .frames import analyze, dual_frame, overlap_graph, synthesize
from .recovery import CANONICAL_REL, RecoveryConfig, canonical_sign, recover_band

TAU_REL = 1e-4
MIN_CONFIDENCE = 0.9
MEASUREMENT_TOL = 1e-5
NULL_BAND_REL = 1e-12
# spectral values below this fraction of a band's peak are roundoff
SPECTRAL_ZERO_REL = 1e-10


@dataclass(frozen=True)
class SignMatchEdge:
    a: str
    b: str
    region: np.ndarray
    sign: int
    confidence: float

    def to_dict(self):
        return {
            "a": self.a,
            "b": self.b,
            "sign": self.sign,
            "confidence": self.confidence,
            "bins": int(np.count_nonzero(self.region)),
        }


def _estimate(g, band, where):
    return forward_spectrum(g)[where] / band.spectrum[where]


def match_pair(g_a, g_b, frame, edge, tau=TAU_REL):
    """Relative sign of ``g_a`` (band ``edge.a``) and ``g_b`` (band ``edge.b``).

    ``tau`` is relative to the largest spectral estimate on the overlap;
    bins where either band's spectrum is at roundoff level never count.
    """
    sub = np.asarray(edge.subregion)
    ea = _estimate(g_a, frame[edge.a], sub)
    eb = _estimate(g_b, frame[edge.b], sub)
    floor = SPECTRAL_ZERO_REL * max(np.abs(forward_spectrum(g)).max() for g in (g_a, g_b))
    top = max(np.abs(ea).max(initial=0.0), np.abs(eb).max(initial=0.0))
    thr = max(tau * top, floor)
    keep = (np.abs(ea) > thr) & (np.abs(eb) > thr) if top > 0 else np.zeros(ea.shape, bool)
    if not keep.any():
        raise NoInformativeOverlapError(f"no informative overlap between {edge.a} and {edge.b}")
    a, b = ea[keep], eb[keep]
    inner = np.vdot(b, a)
    conf = float(abs(inner) / (np.linalg.norm(a) * np.linalg.norm(b)))
    region = sub.copy()
    region[sub] = keep
    return SignMatchEdge(edge.a, edge.b, region, 1 if inner.real >= 0 else -1, min(conf, 1.0))


def sign_edges(parts, frame, graph, tau=TAU_REL, active=None):
    """Match every overlap edge between active bands; uninformative edges are returned separately."""
    by_label = dict(zip(frame.labels, parts))
    active = set(frame.labels) if active is None else active
    matched, dropped = [], []
    for e in graph.edges:
        if e.a not in active or e.b not in active:
            continue
        try:
            matched.append(match_pair(by_label[e.a], by_label[e.b], frame, e, tau))
        except NoInformativeOverlapError:
            dropped.append((e.a, e.b))
    return matched, dropped


def propagate_signs(parts, frame, graph=None, tau=TAU_REL, min_confidence=MIN_CONFIDENCE, return_edges=False):
    """Flip bands so all accepted overlap edges agree, then fix the global sign.

    Bands with negligible energy carry no sign information and keep +1.
    """
    graph = overlap_graph(frame) if graph is None else graph
    labels = frame.labels
    norms = np.array([p.norm() for p in parts])
    top = norms.max(initial=0.0)
    active = {l for l, n in zip(labels, norms) if n > NULL_BAND_REL * top}
    matched, _ = sign_edges(parts, frame, graph, tau, active)
    accepted = [m for m in matched if m.confidence >= min_confidence]
    adj = {l: [] for l in active}
    for m in accepted:
        adj[m.a].append((m.b, m.sign))
        adj[m.b].append((m.a, m.sign))
    sigma = {l: 1 for l in labels}
    if active:
        root = labels[int(np.argmax(norms))]
        seen = {root}
        q = deque([root])
        while q:
            u = q.popleft()
            for v, s in sorted(adj[u]):
                if v not in seen:
                    sigma[v] = sigma[u] * s
                    seen.add(v)
                    q.append(v)
        if seen != active:
            raise SignPropagationError(_components([l for l in labels if l in active], adj))
        bad = [(m.a, m.b) for m in accepted if sigma[m.a] * sigma[m.b] * m.sign != 1]
        if bad:
            raise SignPropagationError([sorted(active)], f"inconsistent cycle through edges {bad}")
    out = [p if sigma[l] > 0 else -p for l, p in zip(labels, parts)]
    f = synthesize(out, frame)
    if canonical_sign(f.values, CANONICAL_REL) < 0:
        out = [-p for p in out]
    return (out, accepted) if return_edges else out


def _components(nodes, adj):
    seen, comps = set(), []
    for n in nodes:
        if n in seen:
            continue
        comp, q = [], deque([n])
        seen.add(n)
        while q:
            u = q.popleft()
            comp.append(u)
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    q.append(v)
        comps.append(comp)
    return comps


@dataclass
class PipelineConfig:
    recovery: RecoveryConfig = field(default_factory=RecoveryConfig)
    tau: float = TAU_REL
    min_confidence: float = MIN_CONFIDENCE
    measurement_tol: float = MEASUREMENT_TOL
    strict: bool = True
    jobs: int = 1


def measurement_residual(f, measurements, frame):
    """Relative misfit of ``|f * psi_lambda|(X_lambda)`` against the normalized measurements."""
    got, want, per_band = [], [], {}
    for band, part in zip(frame.bands, analyze(f, frame)):
        m = measurements[band.label]
        mags = np.abs(np.asarray(part.values)[m.lattice.sites])
        per_band[band.label] = float(
            np.linalg.norm(mags - m.magnitudes) / max(np.linalg.norm(m.magnitudes), 1e-300)
        )
        got.append(m.normalization * mags)
        want.append(m.normalization * m.magnitudes)
    got, want = np.concatenate(got), np.concatenate(want)
    return float(np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-300)), per_band


def full_pipeline(measurements, frame, config=None, reference=None):
    """Recover f (canonical sign) from phaseless frame samples; returns ``(signal, report)``."""
    cfg = config or PipelineConfig()
    rcfg = RecoveryConfig(**{**cfg.recovery.__dict__, "strict": cfg.strict})
    report = {"bands": [], "edges": [], "stages": {}, "ok": True}

    def one(band):
        m = measurements[band.label]
        return recover_band(m.magnitudes, m.lattice, band.support, rcfg, label=band.label)

    try:
        if cfg.jobs > 1:
            with ThreadPoolExecutor(cfg.jobs) as ex:
                results = list(ex.map(one, frame.bands))
        else:
            results = [one(b) for b in frame.bands]
    except (RecoveryError, SignretError, ValueError) as exc:
        raise PipelineError("recovery", exc) from exc
    parts = [r[0] for r in results]
    report["bands"] = [r[1].to_dict() for r in results]
    report["stages"]["recovery"] = all(r[1].converged for r in results)

    try:
        graph = overlap_graph(frame)
        parts, edges = propagate_signs(parts, frame, graph, cfg.tau, cfg.min_confidence, return_edges=True)
        report["edges"] = [e.to_dict() for e in edges]
        report["stages"]["propagation"] = True
    except SignretError as exc:
        raise PipelineError("propagation", exc) from exc

    try:
        f = synthesize(parts, frame, dual_frame(frame))
    except SignretError as exc:
        raise PipelineError("synthesis", exc) from exc

    res, per_band = measurement_residual(f, measurements, frame)
    report["measurement_residual"] = res
    for b in report["bands"]:
        b["remeasured_residual"] = per_band[b["label"]]
    report["stages"]["verification"] = res <= cfg.measurement_tol
    if reference is not None:
        report["error"] = float(signal_distance(f, reference) / max(reference.norm(), 1e-300))
    report["ok"] = all(report["stages"].values())
    if cfg.strict and res > cfg.measurement_tol:
        raise PipelineError(
            "verification", SignretError(f"measurement residual {res:.3e} exceeds {cfg.measurement_tol:.1e}")
        )
    return f, report


def report_json(report):
    return json.dumps(report, sort_keys=True, indent=2, default=float)
