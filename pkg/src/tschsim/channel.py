"""Quantized i.i.d. fading channels, packet capacity and TSCH channel hopping."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .validation import as_generator, check_pmf, check_positive

DEFAULT_LEVELS_DB = (-13.0, -8.47, -5.41, -3.28, -1.59, -0.08, 1.42, 3.18)


@dataclass(frozen=True)
class ChannelStateSpace:
    """Representative SNR levels (dB) and the quantization intervals around them.

    ``boundaries_db`` has one more entry than ``levels_db``; state ``k``
    covers ``[boundaries_db[k], boundaries_db[k + 1])``.
    """

    levels_db: tuple[float, ...] = DEFAULT_LEVELS_DB
    boundaries_db: tuple[float, ...] | None = None

    def __post_init__(self):
        levels = tuple(float(x) for x in self.levels_db)
        object.__setattr__(self, "levels_db", levels)
        if len(levels) == 0:
            raise ValueError("need at least one channel level")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if self.boundaries_db is None:
            # each level is the lower edge of its interval; the bottom state
            # absorbs everything below the second level
            bounds = (-np.inf,) + levels[1:] + (np.inf,)
        else:
            bounds = tuple(float(b) for b in self.boundaries_db)
        if len(bounds) != len(levels) + 1:
            raise ValueError("need len(levels) + 1 boundaries")
        for k, x in enumerate(levels):
            if not bounds[k] <= x < bounds[k + 1]:
                raise ValueError(f"level {x} dB lies outside [{bounds[k]}, {bounds[k + 1]})")
        object.__setattr__(self, "boundaries_db", bounds)

    @property
    def n_states(self):
        return len(self.levels_db)

    @property
    def levels_linear(self):
        return 10.0 ** (np.asarray(self.levels_db) / 10.0)

    def quantize(self, x_db):
        """Map SNR values in dB to state indices."""
        inner = np.asarray(self.boundaries_db[1:-1])
        return np.searchsorted(inner, np.asarray(x_db, dtype=float), side="right")


@dataclass(frozen=True)
class RadioParams:
    """Radio and slot-frame constants.

    ``beta`` defaults to ``packet_bits`` so capacities come out in packets
    per slot.
    """

    power_mw: float = 10.0
    beta_n0: float = 2.0
    packet_bits: float = 5000.0
    beta: float | None = None
    slot_ms: float = 15.0
    n_frequencies: int = 3
    n_slots: int = 8

    def __post_init__(self):
        if self.beta is None:
            object.__setattr__(self, "beta", float(self.packet_bits))
        for name in ("power_mw", "beta_n0", "packet_bits", "beta", "slot_ms"):
            check_positive(getattr(self, name), name)
        check_positive(self.n_frequencies, "n_frequencies", integer=True)
        check_positive(self.n_slots, "n_slots", integer=True)

    @property
    def n_cells(self):
        return self.n_frequencies * self.n_slots


def hop_frequency(asn, ch_offset, n_channels, mapping=None):
    """Physical channel used by ``ch_offset`` at absolute slot number ``asn``."""
    if not 0 <= ch_offset < n_channels:
        raise ValueError(f"ch_offset must lie in [0, {n_channels}), got {ch_offset}")
    idx = (asn + ch_offset) % n_channels
    return idx if mapping is None else int(mapping[idx])


def random_hop_map(n_channels, seed=None):
    return as_generator(seed).permutation(n_channels)


def power_required(x, u, params=None):
    """Transmit power needed to push ``u`` packets through linear gain ``x``."""
    params = params or RadioParams()
    x = np.asarray(x, dtype=float)
    if (x <= 0).any():
        raise ValueError("channel gain x must be > 0")
    u = np.asarray(u, dtype=float)
    if (u < 0).any():
        raise ValueError("packet count u must be >= 0")
    out = params.beta_n0 / x * np.expm1(u * params.packet_bits / params.beta * np.log(2.0))
    return out if out.ndim else float(out)


def capacity(x_db, params=None):
    """Packets per slot over a link whose channel sits at ``x_db``."""
    params = params or RadioParams()
    x_lin = 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
    out = params.beta / params.packet_bits * np.log2(1.0 + x_lin * params.power_mw / params.beta_n0)
    return out if out.ndim else float(out)


@dataclass
class LinkChannelDistribution:
    """``pmf[link, frequency, state]``: per-(link, frequency) state distributions."""

    pmf: np.ndarray

    def __post_init__(self):
        self.pmf = check_pmf(self.pmf)
        if self.pmf.ndim != 3:
            raise ValueError("pmf must have shape (links, frequencies, states)")

    @property
    def n_links(self):
        return self.pmf.shape[0]

    @property
    def n_frequencies(self):
        return self.pmf.shape[1]

    @property
    def n_states(self):
        return self.pmf.shape[2]

    def save(self, path):
        L, F, S = self.pmf.shape
        rows = [f"{L} {F} {S}"]
        rows += [" ".join(repr(float(p)) for p in row) for row in self.pmf.reshape(L * F, S)]
        Path(path).write_text("\n".join(rows) + "\n")

    @classmethod
    def load(cls, path):
        lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
        try:
            L, F, S = (int(v) for v in lines[0].split())
            data = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}: malformed distribution file ({exc})") from None
        if data.shape != (L * F, S):
            raise ValueError(f"{path}: expected {L * F} rows of {S} values, got {data.shape}")
        return cls(data.reshape(L, F, S))


def generate_distributions(n_links, space=None, n_frequencies=3, seed=None):
    """Random Dirichlet(1, ..., 1) state distributions for every (link, frequency).

    Frequency ``f`` draws from its own child stream of ``seed``, so the rows
    for the first ``k`` frequencies do not depend on ``n_frequencies``.
    """
    if hasattr(n_links, "n_links"):
        n_links = n_links.n_links
    space = space or ChannelStateSpace()
    check_positive(n_links, "n_links", integer=True)
    check_positive(n_frequencies, "n_frequencies", integer=True)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    pmf = np.empty((n_links, n_frequencies, space.n_states))
    for f in range(n_frequencies):
        child = np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (f,))
        e = np.random.default_rng(child).standard_exponential((n_links, space.n_states))
        pmf[:, f, :] = e / e.sum(axis=1, keepdims=True)
    return LinkChannelDistribution(pmf)


@dataclass
class ChannelRealization:
    """``state[link, frequency, slot]``: sampled state indices for one cycle."""

    state: np.ndarray


def sample_cycle(dist, space, rng, n_slots):
    """Independent state draws for every (link, frequency, slot) of one cycle."""
    rng = as_generator(rng)
    cdf = np.cumsum(dist.pmf, axis=-1)
    cdf[..., -1] = 1.0
    u = rng.random((dist.n_links, dist.n_frequencies, n_slots))
    state = (u[..., None] >= cdf[:, :, None, :]).sum(axis=-1)
    return ChannelRealization(np.minimum(state, space.n_states - 1))


def mean_capacity(link, dist, space=None, params=None):
    """Expected packets per slot on ``link``, averaged uniformly over frequencies."""
    space = space or ChannelStateSpace()
    caps = capacity(np.asarray(space.levels_db), params)
    return float((dist.pmf[link] @ caps).mean())


class ChannelModel:
    """A state space, per-link distributions and radio constants bundled together.

    The per-state capacity table is computed once; ``link_capacity`` turns a
    realization into per-(link, slot) packet counts averaged over the
    frequencies each cell visits during the cycle.
    """

    def __init__(self, dist, space=None, params=None, hop_map=None):
        self.dist = dist
        self.space = space or ChannelStateSpace()
        self.params = params or RadioParams(n_frequencies=dist.n_frequencies)
        if dist.n_states != self.space.n_states:
            raise ValueError("distribution and state space disagree on the number of states")
        if dist.n_frequencies != self.params.n_frequencies:
            raise ValueError("distribution and radio params disagree on the number of frequencies")
        F = self.params.n_frequencies
        self.hop_map = np.arange(F) if hop_map is None else np.asarray(hop_map)
        if sorted(self.hop_map.tolist()) != list(range(F)):
            raise ValueError("hop_map must be a permutation of the channel indices")
        self.state_capacity = capacity(np.asarray(self.space.levels_db), self.params)

    @property
    def n_links(self):
        return self.dist.n_links

    def link_means(self):
        return (self.dist.pmf @ self.state_capacity).mean(axis=1)

    def max_capacity(self):
        return float(self.state_capacity.max())

    def sample_cycle(self, rng):
        return sample_cycle(self.dist, self.space, rng, self.params.n_slots)

    def visited_channels(self, ch_offset):
        """Physical channels a cell with ``ch_offset`` uses over one cycle."""
        F = self.params.n_frequencies
        return [hop_frequency(r, ch_offset, F, self.hop_map) for r in range(F)]

    def link_capacity(self, realization):
        """Per-(link, slot) packets averaged over the channels visited in the cycle."""
        # every offset visits each channel exactly once per cycle, so the
        # average over visits is the plain mean over the frequency axis
        return self.state_capacity[realization.state].mean(axis=1)
