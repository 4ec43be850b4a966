"""Activity-driven gate pruning.

Every gate gets ``tau`` (how often its output holds its majority value under the
profiling stimulus), that majority ``const`` value, and ``phi`` (the most
significant tracked output bit it can reach). Regressors track their primary
outputs; classifiers track the argmax-input words, and their argmax gates are
never pruned (``phi is NEVER``).

A gate is pruned when ``tau >= tau_c`` and ``phi <= phi_c``. Because no pruned
gate reaches a tracked bit above ``phi_c``, each tracked word changes by less
than ``2**(phi_c + 1)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .cells import CellLibrary
from .netlist import CLASSIFIER_KINDS, Netlist, NetlistError, levelize, optimize, tie_many
from .sim import ActivityProfile

NEVER = None


@dataclass(frozen=True)
class PruneCandidate:
    gate: int
    tau: float
    const: int
    phi: int | None

    def to_dict(self) -> dict:
        return {"gate": self.gate, "tau": self.tau, "const": self.const,
                "phi": "NEVER" if self.phi is NEVER else self.phi}


def compute_tau(a: ActivityProfile, n: Netlist) -> dict[int, tuple[float, int]]:
    out = {}
    for gid, g in n.gates.items():
        if g.output not in a.ones:
            raise NetlistError(f"activity profile has no entry for net {g.output} (gate {gid})")
        ones = a.ones[g.output]
        zeros = a.vector_count - ones
        # exact half goes to 0
        const = 1 if ones > zeros else 0
        out[gid] = (max(ones, zeros) / a.vector_count, const)
    return out


def tracked_buses(n: Netlist):
    if n.kind in CLASSIFIER_KINDS:
        if not n.obuses:
            raise NetlistError("classifier netlist has no argmax-input bus metadata")
        return n.obuses
    return n.outputs


def compute_phi(n: Netlist) -> dict[int, int | None]:
    """Highest tracked bit index reachable from each gate, ``-1`` if none."""
    net_phi: dict[int, int] = {}
    for bus in tracked_buses(n).values():
        for k, net in enumerate(bus.nets):
            if net_phi.get(net, -1) < k:
                net_phi[net] = k
    fanout = n.fanout()
    reach: dict[int, int] = {}
    for gid in reversed(levelize(n)):
        g = n.gates[gid]
        best = net_phi.get(g.output, -1)
        for user in fanout.get(g.output, ()):
            if reach[user] > best:
                best = reach[user]
        reach[gid] = best
    return {gid: (NEVER if gid in n.decision_gates else reach[gid]) for gid in n.gates}


def candidates(n: Netlist, a: ActivityProfile) -> list[PruneCandidate]:
    tau = compute_tau(a, n)
    phi = compute_phi(n)
    return [PruneCandidate(gid, tau[gid][0], tau[gid][1], phi[gid]) for gid in sorted(n.gates)]


def select(cands: list[PruneCandidate], tau_c: float, phi_c: int) -> list[PruneCandidate]:
    return [c for c in cands if c.phi is not NEVER and c.tau >= tau_c and c.phi <= phi_c]


def phi_values(cands: list[PruneCandidate], tau_c: float) -> list[int]:
    """Distinct ``phi`` among gates passing the ``tau`` threshold, ascending."""
    return sorted({c.phi for c in cands if c.phi is not NEVER and c.tau >= tau_c})


def prune(n: Netlist, cands: list[PruneCandidate], tau_c: float, phi_c: int,
          lib: CellLibrary | None = None) -> Netlist:
    if not 0.5 <= tau_c <= 1.0:
        raise ValueError(f"tau_c must be in [0.5, 1], got {tau_c}")
    if phi_c < -1:
        raise ValueError(f"phi_c must be >= -1, got {phi_c}")
    chosen = select(cands, tau_c, phi_c)
    return apply_prune(n, chosen, lib, {"tau_c": tau_c, "phi_c": phi_c})


def apply_prune(n: Netlist, chosen: list[PruneCandidate], lib: CellLibrary | None = None,
                info: dict | None = None) -> Netlist:
    tied = tie_many(n, {c.gate: c.const for c in chosen})
    out = optimize(tied, lib)
    meta = dict(n.meta)
    meta["prune"] = dict(info or {}, removed=sorted(c.gate for c in chosen))
    return replace(out, meta=meta)


def save_candidates(cands: list[PruneCandidate], path) -> None:
    Path(path).write_text(json.dumps([c.to_dict() for c in cands], indent=1) + "\n")


def load_candidates(path) -> list[PruneCandidate]:
    out = []
    for d in json.loads(Path(path).read_text()):
        phi = NEVER if d["phi"] == "NEVER" else int(d["phi"])
        out.append(PruneCandidate(int(d["gate"]), float(d["tau"]), int(d["const"]), phi))
    return out
