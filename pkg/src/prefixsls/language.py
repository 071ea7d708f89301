"""Switching signals, finite languages, and prefix trees.

A switching signal assigns one mode index to each time step 0..T.  A language
is a finite set of such signals, optionally weighted by probabilities.  The
prefix tree groups signals by shared history: two signals sit in the same node
at depth t exactly when the controller cannot yet tell them apart, which is
what makes the tree the variable-sharing skeleton for synthesis and the gain
lookup table for online execution.

An observation delay d >= 0 coarsens the tree: at depth t only the prefix
through time t - d has been observed, so nodes at the first d depths collapse
to one per depth and deeper nodes are keyed by the shortened prefix.
"""

from dataclasses import dataclass


class UnknownSignal(KeyError):
    """Raised when a prefix lookup walks off the tree."""


@dataclass(frozen=True)
class SwitchingSignal:
    """Mode sequence sigma_0..sigma_T, modes numbered from 1."""

    modes: tuple

    def __post_init__(self):
        modes = tuple(int(s) for s in self.modes)
        if len(modes) == 0:
            raise ValueError("a signal needs at least time step 0")
        if any(s < 1 for s in modes):
            raise ValueError("mode indices are numbered from 1")
        object.__setattr__(self, "modes", modes)

    @property
    def horizon(self):
        return len(self.modes) - 1

    def prefix(self, t):
        """Modes through time t inclusive."""
        return self.modes[: t + 1]

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, t):
        return self.modes[t]


def prefixes_equal(a, b, t):
    """True iff signals a and b agree on all of time steps 0..t."""
    if not 0 <= t <= min(a.horizon, b.horizon):
        raise ValueError(f"step {t} outside both horizons")
    return a.prefix(t) == b.prefix(t)


def fault_time(signal):
    """First step at which the signal leaves mode 1, or T+1 if it never does."""
    for t, s in enumerate(signal.modes):
        if s != 1:
            return t
    return len(signal.modes)


class SwitchingLanguage:
    """Finite ordered set of distinct signals with optional probabilities."""

    def __init__(self, signals, probabilities=None):
        signals = tuple(
            s if isinstance(s, SwitchingSignal) else SwitchingSignal(tuple(s))
            for s in signals
        )
        if not signals:
            raise ValueError("language must contain at least one signal")
        horizons = {s.horizon for s in signals}
        if len(horizons) != 1:
            raise ValueError("all signals in a language share one horizon")
        if len({s.modes for s in signals}) != len(signals):
            raise ValueError("duplicate signals in language")
        if probabilities is not None:
            probabilities = tuple(float(q) for q in probabilities)
            if len(probabilities) != len(signals):
                raise ValueError("need one probability per signal")
            if any(q < 0 for q in probabilities):
                raise ValueError("probabilities must be non-negative")
            if abs(sum(probabilities) - 1.0) > 1e-12:
                raise ValueError("probabilities must sum to 1 within 1e-12")
        self.signals = signals
        self.probabilities = probabilities

    @property
    def horizon(self):
        return self.signals[0].horizon

    @property
    def max_mode(self):
        return max(max(s.modes) for s in self.signals)

    def __len__(self):
        return len(self.signals)

    def __iter__(self):
        return iter(self.signals)

    def __getitem__(self, i):
        return self.signals[i]

    def index_of(self, signal):
        if not isinstance(signal, SwitchingSignal):
            signal = SwitchingSignal(tuple(signal))
        for i, s in enumerate(self.signals):
            if s.modes == signal.modes:
                return i
        raise UnknownSignal(f"signal {signal.modes} not in language")


def fault_language(horizon, include_never_faulty=False):
    """Signals that run mode 1 until some fault time, then mode 2 forever.

    Fault times range over 0..horizon, so the all-faulty signal is included
    and the never-faulty all-ones signal is not unless requested.
    Probabilities are left unset.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    sigs = []
    for t_fault in range(horizon + 1):
        sigs.append(tuple(1 if t < t_fault else 2 for t in range(horizon + 1)))
    if include_never_faulty:
        sigs.append((1,) * (horizon + 1))
    return SwitchingLanguage(sigs)


def uniform(lang):
    """Same language with probability 1/|L| on every signal."""
    k = len(lang)
    return SwitchingLanguage(lang.signals, (1.0 / k,) * k)


@dataclass(frozen=True)
class TreeNode:
    depth: int
    prefix: tuple
    parent: int


class PrefixTree:
    """Prefix-sharing structure of a language under an observation delay.

    Node at depth t is keyed by the observed prefix sigma_{0:t-delay} (the
    empty tuple while t < delay).  paths[i][t] is the node index signal i
    occupies at depth t; leaf_map collects the depth-T nodes.
    """

    def __init__(self, lang, delay=0, dedup=True):
        T = lang.horizon
        if not 0 <= delay <= T + 1:
            raise ValueError(f"delay must lie in 0..{T + 1}")
        self.language = lang
        self.delay = int(delay)
        self.horizon = T
        self.dedup = bool(dedup)
        nodes = []
        by_key = [dict() for _ in range(T + 1)]
        paths = []
        for sig_i, sig in enumerate(lang):
            path = []
            for t in range(T + 1):
                key = self.observed_prefix(sig.modes, t)
                if not self.dedup:
                    key = (sig_i,) + key
                idx = by_key[t].get(key)
                if idx is None:
                    parent = path[t - 1] if t > 0 else -1
                    idx = len(nodes)
                    nodes.append(TreeNode(t, key, parent))
                    by_key[t][key] = idx
                path.append(idx)
            paths.append(path)
        self.nodes = tuple(nodes)
        self.paths = tuple(tuple(p) for p in paths)
        self.leaf_map = tuple(p[T] for p in paths)
        self._by_key = by_key
        members = [[] for _ in nodes]
        for i, path in enumerate(self.paths):
            for idx in path:
                members[idx].append(i)
        self._members = tuple(tuple(sorted(set(m))) for m in members)

    def observed_prefix(self, modes, t):
        """The part of sigma visible when choosing the depth-t gain row."""
        cut = t - self.delay + 1
        return tuple(modes[:cut]) if cut > 0 else ()

    def __len__(self):
        return len(self.nodes)

    def nodes_at_depth(self, t):
        return tuple(self._by_key[t].values())

    def node_at(self, t, observed):
        """Node index for an observed prefix tuple at depth t."""
        try:
            return self._by_key[t][tuple(observed)]
        except KeyError:
            raise UnknownSignal(
                f"no depth-{t} node for observed prefix {tuple(observed)}"
            ) from None

    def node_for_signal(self, modes, t):
        return self.node_at(t, self.observed_prefix(modes, t))

    def signals_through(self, node_index):
        """Indices of the language's signals whose path visits this node."""
        return self._members[node_index]


def build_prefix_tree(lang, delay=0):
    """Prefix tree of a language; see PrefixTree."""
    return PrefixTree(lang, delay)


def chain_forest(lang):
    """Degenerate tree with one unshared chain per signal.

    Used by the explicit synthesis formulation, where prefix agreement is
    imposed as equality constraints instead of by variable sharing.  Online
    prefix lookup is meaningless on a forest; only paths matter here.
    """
    return PrefixTree(lang, 0, dedup=False)
