"""
Источники (SPDC-пары, когерентный импульс) и пороговые детекторы с тёмными отсчётами.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import poisson

from dfsim.exceptions import ConfigurationError, EmptyPostSelectionError
from dfsim.fock import (
    FockStateVector,
    ModeRegistry,
    ModeTransform,
    Polarization,
    PolarizationDensityMatrix,
    apply_transform,
    coherent_product,
    reduce_to_polarization_dm,
)
from dfsim.optics import analyzer, jones_vector, polarizer_projection


logger = logging.getLogger("dfsim")

TAIL_WARNING = 1e-6

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class SpdcParams:
    """gamma -- квадрат амплитуды в экспоненте SPDC (вероятность одной пары ~ 2 gamma)."""

    gamma: float
    pair_cutoff: int = 2
    # True, если обрезку задал вариант схемы (эталонный однопарный источник)
    reference_cutoff: bool = False

    def __post_init__(self):
        if not 0 <= self.gamma < 0.5:
            raise ConfigurationError("SPDC gamma must lie in [0, 0.5)", errors={"gamma": self.gamma})
        if self.pair_cutoff < 1:
            raise ConfigurationError("Pair cutoff must be at least 1", errors={"pair_cutoff": self.pair_cutoff})

    def pair_probability(self, k: int) -> float:
        """Вероятность k пар в нормированном усечённом состоянии."""
        norm = sum((j + 1) * self.gamma ** j for j in range(self.pair_cutoff + 1))
        return (k + 1) * self.gamma ** k / norm if k <= self.pair_cutoff else 0.0


@dataclass(frozen=True)
class CoherentParams:
    """
    Когерентный импульс R. mu -- среднее число фотонов у Алисы, mu_b = mu / T -- у Боба
    (интенсивность на стороне Боба пропорциональна 1/T).
    """

    mu: float
    transmittance: float = 1.0
    polarization: str = "D"

    def __post_init__(self):
        if self.mu < 0:
            raise ConfigurationError("Mean photon number must be non-negative", errors={"mu": self.mu})
        if not 0 <= self.transmittance <= 1:
            raise ConfigurationError("Transmittance must lie in [0, 1]", errors={"transmittance": self.transmittance})
        jones_vector(self.polarization)

    @classmethod
    def from_bob(cls, mu_b: float, transmittance: float, polarization: str = "D") -> "CoherentParams":
        return cls(mu_b * transmittance, transmittance, polarization)

    @property
    def mu_b(self) -> float:
        # При T = 0 до Алисы ничего не доходит, интенсивность у Боба формально бесконечна
        return self.mu / self.transmittance if self.transmittance > 0 else math.inf


@dataclass(frozen=True)
class DetectorModel:
    """Пороговый детектор: P(щелчок | n) = 1 - (1 - d)(1 - eta)^n."""

    name: str
    efficiency: float = 1.0
    dark_count: float = 0.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ConfigurationError(f"{self.name}: efficiency must lie in [0, 1]",
                                     errors={"efficiency": self.efficiency})
        if not 0 <= self.dark_count < 1:
            raise ConfigurationError(f"{self.name}: dark count must lie in [0, 1)",
                                     errors={"dark_count": self.dark_count})

    def no_click(self, n: int) -> float:
        return (1.0 - self.dark_count) * (1.0 - self.efficiency) ** n

    def click(self, n: int) -> float:
        return 1.0 - self.no_click(n)

    def outcome(self, n: int, clicked: bool) -> float:
        return self.click(n) if clicked else self.no_click(n)


def spdc_state(p: SpdcParams, registry: ModeRegistry, mode_a: str, mode_b: str, cutoff: int) -> FockStateVector:
    """
    Нормированное усечение exp[sqrt(gamma)(a_H^+ b_H^+ + a_V^+ b_V^+)]|0>.
    Каждое слагаемое |j H, k-j V> k-парного сектора имеет амплитуду gamma^(k/2).
    """
    pairs = min(p.pair_cutoff, cutoff // 2)
    a_h, a_v = registry.index(mode_a, Polarization.H), registry.index(mode_a, Polarization.V)
    b_h, b_v = registry.index(mode_b, Polarization.H), registry.index(mode_b, Polarization.V)

    terms: dict[tuple[int, ...], complex] = {}
    for k in range(pairs + 1):
        amp = math.sqrt(p.gamma) ** k
        for j in range(k + 1):
            occ = [0] * len(registry)
            occ[a_h] = occ[b_h] = j
            occ[a_v] = occ[b_v] = k - j
            terms[tuple(occ)] = amp

    norm = math.sqrt(sum(abs(a) ** 2 for a in terms.values()))
    # Хвост бесконечного ряда: полная норма^2 равна (1 - gamma)^-2
    tail = max(0.0, 1.0 - norm ** 2 * (1.0 - p.gamma) ** 2)
    if tail > TAIL_WARNING:
        level = logging.DEBUG if p.reference_cutoff else logging.WARNING
        logger.log(level, "SPDC truncation at %d pairs drops weight %.3e (gamma=%g)", pairs, tail, p.gamma)

    return FockStateVector.from_terms(registry, cutoff, {k: v / norm for k, v in terms.items()},
                                      truncated_weight=tail)


def encoded_pair_state(registry: ModeRegistry, mode_a: str, mode_b: str, alpha: complex, beta: complex,
                       pair_probability: float, cutoff: int) -> FockStateVector:
    """Источник, кодирующий кубит alpha|H> + beta|V> в пару alpha|HH> + beta|VV> с вероятностью pair_probability."""
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-9:
        raise ConfigurationError("Qubit amplitudes must be normalized",
                                 errors={"norm": abs(alpha) ** 2 + abs(beta) ** 2})
    if not 0 <= pair_probability <= 1:
        raise ConfigurationError("Pair probability must lie in [0, 1]", errors={"pair_probability": pair_probability})

    size = len(registry)
    hh = [0] * size
    vv = [0] * size
    hh[registry.index(mode_a, Polarization.H)] = hh[registry.index(mode_b, Polarization.H)] = 1
    vv[registry.index(mode_a, Polarization.V)] = vv[registry.index(mode_b, Polarization.V)] = 1

    root = math.sqrt(pair_probability)
    terms = {
        (0,) * size: math.sqrt(1.0 - pair_probability),
        tuple(hh): root * alpha,
        tuple(vv): root * beta,
    }
    return FockStateVector.from_terms(registry, cutoff, terms)


def coherent_amplitudes(registry: ModeRegistry, spatial: str, mean_photons: float,
                        polarization: str | Sequence[complex] = "D") -> dict[int, complex]:
    """Амплитуды alpha по модам метки для когерентного импульса с поляризацией polarization."""
    jones = jones_vector(polarization) * math.sqrt(mean_photons)
    return {
        registry.index(spatial, Polarization.H): complex(jones[0]),
        registry.index(spatial, Polarization.V): complex(jones[1]),
    }


def coherent_state(p: CoherentParams, registry: ModeRegistry, spatial: str, cutoff: int) -> FockStateVector:
    """Усечённое когерентное состояние с амплитудой sqrt(mu_b) в поляризации p.polarization."""
    state = coherent_product(registry, coherent_amplitudes(registry, spatial, p.mu_b, p.polarization), cutoff)
    if state.truncated_weight > TAIL_WARNING:
        logger.warning("Coherent state mu_b=%.4g loses %.3e above cutoff %d", p.mu_b, state.truncated_weight, cutoff)
    return state


def number_state(registry: ModeRegistry, amplitudes: Mapping[int, complex], n: int, cutoff: int) -> FockStateVector:
    """
    n фотонов в моде, заданной направлением вектора amplitudes (фазово-рандомизированный
    когерентный импульс -- смесь таких состояний с весами Пуассона).
    """
    modes = sorted(m for m, a in amplitudes.items() if abs(a) > 0)
    if not modes:
        raise ConfigurationError("Mode amplitudes are all zero")
    vec = np.array([amplitudes[m] for m in modes], dtype=complex)
    vec /= np.linalg.norm(vec)

    seed = modes[0]
    basis = FockStateVector.basis(registry, {seed: n}, cutoff)
    if n == 0:
        return basis
    t = ModeTransform((seed,), tuple(modes), vec.reshape(-1, 1), label="number-state")
    return apply_transform(basis, t)


def poisson_weights(mean: float, n_max: int) -> np.ndarray:
    return poisson.pmf(np.arange(n_max + 1), mean)


def photon_count_distribution(state: FockStateVector, groups: Sequence[Sequence[int]]) -> dict[tuple[int, ...], float]:
    """Совместное распределение суммарных чисел фотонов в группах мод (ненормированное)."""
    result: dict[tuple[int, ...], float] = {}
    for occ, amp in state.terms.items():
        key = tuple(sum(occ[i] for i in group) for group in groups)
        result[key] = result.get(key, 0.0) + abs(amp) ** 2
    return result


def click_probabilities(state: FockStateVector, detectors: Mapping[DetectorModel, Iterable[int]],
                        required_pattern: Mapping[str, bool]) -> float:
    """
    Вероятность точного набора щелчков/молчаний для детекторов из required_pattern (по имени).
    Остальные моды (потери, сброс, детекторы вне шаблона) суммируются.
    """
    assigned: dict[DetectorModel, tuple[int, ...]] = {d: tuple(m) for d, m in detectors.items()}
    seen: set[int] = set()
    for d, modes in assigned.items():
        if seen & set(modes):
            raise ConfigurationError("Detectors share modes", errors={"detector": d.name})
        seen.update(modes)

    names = {d.name: d for d in assigned}
    unknown = set(required_pattern) - set(names)
    if unknown:
        raise ConfigurationError("Pattern refers to unknown detectors", errors={"detectors": sorted(unknown)})

    used = [names[n] for n in required_pattern]
    counts = photon_count_distribution(state, [assigned[d] for d in used])
    total = 0.0
    for key, weight in counts.items():
        p = weight
        for d, n in zip(used, key):
            p *= d.outcome(n, required_pattern[d.name])
        total += p
    return total


@dataclass(frozen=True)
class Herald:
    """Условие на вспомогательный детектор (D_F за поляризатором или детектор отражённого порта)."""

    detector: DetectorModel
    spatial: str
    clicked: bool = True


SIGNS = (1, -1)


@dataclass
class CoincidenceTable:
    """
    settings[(basis_E, basis_G)] -- 2x2 вероятности P(a, b) совпадений E.F.G при установке анализаторов
    a, b in {+, -} (индексы 0, 1); patterns[(e, f, g)] -- вероятности 8 наборов щелчков без анализа
    поляризации (f -- выполнено условие на F).
    """

    settings: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    patterns: dict[tuple[bool, bool, bool], float] = field(default_factory=dict)

    def __add__(self, other: "CoincidenceTable") -> "CoincidenceTable":
        settings = dict(self.settings)
        for key, value in other.settings.items():
            settings[key] = settings[key] + value if key in settings else value.copy()
        patterns = dict(self.patterns)
        for key, value in other.patterns.items():
            patterns[key] = patterns.get(key, 0.0) + value
        return CoincidenceTable(settings, patterns)

    def scaled(self, factor: float) -> "CoincidenceTable":
        return CoincidenceTable(
            {k: v * factor for k, v in self.settings.items()},
            {k: v * factor for k, v in self.patterns.items()},
        )

    @property
    def triple(self) -> float:
        return self.patterns.get((True, True, True), 0.0)

    @property
    def bases(self) -> tuple[tuple[str, str], ...]:
        return tuple(self.settings)

    def coincidences(self, basis_e: str, basis_g: str) -> float:
        return float(np.sum(self.settings[(basis_e, basis_g)]))

    def correlator(self, basis_e: str, basis_g: str) -> float:
        """<sigma_E sigma_G> по нормированным частотам одной пары базисов."""
        p = self.settings[(basis_e, basis_g)]
        total = float(np.sum(p))
        if total <= 0:
            raise EmptyPostSelectionError("No coincidences for basis pair",
                                          errors={"bases": f"{basis_e}{basis_g}"})
        return float(sum(SIGNS[a] * SIGNS[b] * p[a, b] for a in range(2) for b in range(2)) / total)

    def marginal(self, side: int, basis: str) -> float:
        """Среднее одного кубита, усреднённое по всем установкам второго."""
        values = []
        for (be, bg), p in self.settings.items():
            if (be, bg)[side] != basis:
                continue
            total = float(np.sum(p))
            if total <= 0:
                continue
            row = p.sum(axis=1 - side)
            values.append(float((row[0] - row[1]) / total))
        return float(np.mean(values)) if values else 0.0

    def density_matrix(self, labels: tuple[str, str] = ("E", "G")) -> PolarizationDensityMatrix:
        """Линейная инверсия: rho = 1/4 sum S_ij sigma_i x sigma_j по 9 парам базисов {Z, X, Y}^2."""
        missing = [f"{a}{b}" for a in "ZXY" for b in "ZXY" if (a, b) not in self.settings]
        if missing:
            raise ConfigurationError("Tomography needs all nine basis pairs", errors={"missing": missing})

        rho = np.kron(PAULI["I"], PAULI["I"]).astype(complex)
        for a in "ZXY":
            rho += self.marginal(0, a) * np.kron(PAULI[a], PAULI["I"])
            rho += self.marginal(1, a) * np.kron(PAULI["I"], PAULI[a])
            for b in "ZXY":
                rho += self.correlator(a, b) * np.kron(PAULI[a], PAULI[b])
        dm = PolarizationDensityMatrix(rho / 4, labels)

        # Многофотонные события могут дать слегка неположительную томограмму
        low = float(np.min(dm.eigenvalues()))
        if low < -1e-10:
            logger.warning("Reconstructed density matrix has eigenvalue %.3e below zero", low)
        return dm


def coincidence_table(state: FockStateVector, e: DetectorModel, g: DetectorModel, heralds: Sequence[Herald],
                      bases: Iterable[tuple[str, str]], *, label_e: str = "E", label_g: str = "G") -> CoincidenceTable:
    """
    Таблица совпадений для одного чистого состояния. Анализатор перед детектором -- пластинка из
    optics.analyzer: "+" исход попадает в H-моды, "-" в V-моды (обе временные компоненты).
    """
    reg = state.registry
    herald_groups = [reg.indices(h.spatial) for h in heralds]
    e_all, g_all = reg.indices(label_e), reg.indices(label_g)
    e_pol = (reg.indices(label_e, Polarization.H), reg.indices(label_e, Polarization.V))
    g_pol = (reg.indices(label_g, Polarization.H), reg.indices(label_g, Polarization.V))

    def herald_weight(counts: Sequence[int]) -> float:
        w = 1.0
        for h, n in zip(heralds, counts):
            w *= h.detector.outcome(n, h.clicked)
        return w

    table = CoincidenceTable()
    nh = len(heralds)

    # 1. Щелчки без анализа поляризации
    for counts, weight in photon_count_distribution(state, [*herald_groups, e_all, g_all]).items():
        n_e, n_g = counts[nh], counts[nh + 1]
        h = herald_weight(counts[:nh])
        for ce in (True, False):
            for cg in (True, False):
                base = weight * e.outcome(n_e, ce) * g.outcome(n_g, cg)
                table.patterns[(ce, True, cg)] = table.patterns.get((ce, True, cg), 0.0) + base * h
                table.patterns[(ce, False, cg)] = table.patterns.get((ce, False, cg), 0.0) + base * (1.0 - h)

    # 2. Установки анализаторов: сначала поворот E, затем G
    rotated_e: dict[str, FockStateVector] = {}
    for basis_e, basis_g in bases:
        if basis_e not in rotated_e:
            t = analyzer(reg, label_e, basis_e)
            rotated_e[basis_e] = state if t is None else apply_transform(state, t)
        t = analyzer(reg, label_g, basis_g)
        rotated = rotated_e[basis_e] if t is None else apply_transform(rotated_e[basis_e], t)

        p = np.zeros((2, 2))
        groups = [*herald_groups, *e_pol, *g_pol]
        for counts, weight in photon_count_distribution(rotated, groups).items():
            h = herald_weight(counts[:nh])
            if h == 0.0:
                continue
            for a in range(2):
                for b in range(2):
                    p[a, b] += weight * h * e.click(counts[nh + a]) * g.click(counts[nh + 2 + b])
        table.settings[(basis_e, basis_g)] = p

    return table


def conditioned_polarization_dm(state: FockStateVector, detectors: Mapping[str, DetectorModel], *,
                                label_e: str = "E", label_f: str | None = "F", label_g: str = "G",
                                target: str = "D", reject: str = "FR",
                                ) -> tuple[PolarizationDensityMatrix, float]:
    """
    Проекция F на |target>, щелчки D_F, D_E, D_G и сектор с одним фотоном в E и в G.
    Возвращает нормированную матрицу E,G и безусловную вероятность тройного совпадения.
    detectors: {"E": ..., "F": ..., "G": ...}.
    """
    reg = state.registry
    f_modes: tuple[int, ...] = ()
    if label_f is not None:
        state = apply_transform(state, polarizer_projection(reg, label_f, target, reject))
        f_modes = reg.indices(label_f)

    d_f = detectors.get("F")
    e_click = detectors["E"].click(1)
    g_click = detectors["G"].click(1)

    def weight(env: tuple[int, ...]) -> float:
        w = e_click * g_click
        if d_f is not None and f_modes:
            w *= d_f.click(sum(env[i] for i in f_modes))
        return w

    dm = reduce_to_polarization_dm(state, label_e, label_g, environment_weight=weight)
    success = dm.trace
    if success <= 0:
        raise EmptyPostSelectionError("Conditioned sector is empty", errors={"labels": [label_e, label_g]})
    return dm.normalized(), success
