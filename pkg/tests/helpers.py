import numpy as np

from semnet.assignment import Instance
from semnet.semantics import B2MProfile, MatchingProfile
from semnet.topology import ChannelState


def make_instance(eff, budgets, tau=1.0, slope=1.0, intercept=0.0, eligible=None, tau0=0.0,
                  min_bit_rate=1e4):
    """Instance from spectral efficiencies (U x B) instead of a layout."""
    eff = np.asarray(eff, dtype=float)
    sinr = 2.0 ** eff - 1.0
    ch = ChannelState.from_sinr(sinr, min_bit_rate)
    shape = eff.shape
    b2m = B2MProfile(np.broadcast_to(np.asarray(slope, float), shape).copy(),
                     np.broadcast_to(np.asarray(intercept, float), shape).copy())
    tau = np.broadcast_to(np.asarray(tau, float), shape).copy()
    elig = np.ones(shape, bool) if eligible is None else np.asarray(eligible, bool)
    matching = MatchingProfile(tau, tau0, elig, elig & (tau >= tau0))
    return Instance(ch, b2m, matching, np.asarray(budgets, float))


def feasible(assignment, inst, mode="pkm"):
    return assignment.violations(inst.n_threshold, inst.budgets,
                                 inst.matching.eligible(mode)) == []
