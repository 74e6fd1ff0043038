"""
Синтетический поток щелчков: независимые импульсы из точного распределения 8 наборов (E, F, G).
"""
import logging
from dataclasses import dataclass
from itertools import product
from typing import Iterator

import numpy as np

from dfsim.exceptions import ConfigurationError
from dfsim.protocol import ExperimentConfig, run_phase_averaged


logger = logging.getLogger("dfsim")

# Индекс 0 -- ни одного щелчка
PATTERNS: tuple[tuple[bool, bool, bool], ...] = tuple(product((False, True), repeat=3))
CHUNK = 1_000_000


@dataclass(frozen=True)
class ClickEvent:
    pulse: int
    click_e: bool
    click_f: bool
    click_g: bool


def pattern_probabilities(cfg: ExperimentConfig) -> np.ndarray:
    """Вероятности PATTERNS; вес, потерянный обрезкой, отдаётся исходу без щелчков."""
    patterns = run_phase_averaged(cfg, bases=()).table.patterns
    probs = np.array([max(0.0, patterns.get(p, 0.0)) for p in PATTERNS])
    probs[0] += max(0.0, 1.0 - probs.sum())
    return probs / probs.sum()


def sample_events(cfg: ExperimentConfig, n_pulses: int, seed: int,
                  probabilities: np.ndarray | None = None) -> Iterator[ClickEvent]:
    """Детерминированный при фиксированном seed поток импульсов, где щёлкнул хотя бы один детектор."""
    if n_pulses < 0:
        raise ConfigurationError("Number of pulses must be non-negative", errors={"pulses": n_pulses})
    if n_pulses == 0:
        return

    probs = pattern_probabilities(cfg) if probabilities is None else probabilities
    rng = np.random.default_rng(seed)
    start = 0

    while start < n_pulses:
        size = min(CHUNK, n_pulses - start)
        draws = rng.choice(len(PATTERNS), size=size, p=probs)
        for offset in np.flatnonzero(draws):
            e, f, g = PATTERNS[draws[offset]]
            yield ClickEvent(start + int(offset), e, f, g)
        start += size

    logger.debug("Sampled %d pulses (seed %d)", n_pulses, seed)


def empirical_rates(events: Iterator[ClickEvent], n_pulses: int) -> dict[tuple[bool, bool, bool], float]:
    """Частоты наборов щелчков по потоку событий."""
    counts = {p: 0 for p in PATTERNS}
    clicked = 0
    for event in events:
        counts[(event.click_e, event.click_f, event.click_g)] += 1
        clicked += 1
    counts[PATTERNS[0]] = n_pulses - clicked
    return {p: c / n_pulses for p, c in counts.items()} if n_pulses else {}
