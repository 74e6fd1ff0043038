"""
Протокол распределения запутанности через подпространство, свободное от декогеренции.

Цепочка (встречное распространение):
1) пара SPDC в модах A, B у Алисы; B уходит к Бобу (фаза канала, потери T, стеклянная пластинка -> D_G);
2) когерентный импульс R отражается от пластинки к Алисе через тот же канал;
3) у Алисы R инвертируется HWP, смешивается с A на PBS_A (проверка чётности: выходы E, F);
4) F проецируется на |D> и регистрируется D_F; E и G анализируются детекторами D_E, D_G.

Импульс R не имеет стабилизированной фазы относительно пар, поэтому он входит как смесь
фоковских секторов с весами Пуассона; сектора (k пар, n фотонов R) складываются по вероятностям.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Iterable

import numpy as np

from dfsim.exceptions import ConfigurationError, EmptyPostSelectionError
from dfsim.fock import (
    FockStateVector,
    ModeRegistry,
    PolarizationDensityMatrix,
    apply_transform,
    fidelity_to_pure,
    make_registry,
    propagate_coherent,
    split_by_total,
    tensor,
)
from dfsim.optics import ElementKind, ElementSpec, OverlapModel, build_path, phase_shifter
from dfsim.sources import (
    CoherentParams,
    CoincidenceTable,
    DetectorModel,
    Herald,
    SpdcParams,
    coherent_amplitudes,
    coincidence_table,
    encoded_pair_state,
    number_state,
    poisson_weights,
    spdc_state,
)


logger = logging.getLogger("dfsim")

REPETITION_RATE_HZ = 82e6
CHSH_THRESHOLD = 1 / math.sqrt(2)

ALL_BASES: tuple[tuple[str, str], ...] = tuple((a, b) for a in "ZXY" for b in "ZXY")
VISIBILITY_BASES: tuple[tuple[str, str], ...] = (("Z", "Z"), ("X", "X"))

# Имена компонент по секторам (пары, фотоны R)
COMPONENTS = {
    "desired": lambda k, n: (k, n) == (1, 1),
    "coherent_two_photon": lambda k, n: (k, n) == (1, 2),
    "double_pair": lambda k, n: (k, n) == (2, 0),
    "dark": lambda k, n: k == 0,
}


class Variant(str, Enum):
    COUNTER_PROPAGATING = "counter_propagating"
    FORWARD_ALL_FROM_BOB = "forward_all_from_bob"
    SINGLE_PHOTON_ANCILLA = "single_photon_ancilla"
    DIRECT_NO_DFS = "direct_no_dfs"


class GammaConvention(str, Enum):
    PAIR_PROBABILITY = "pair_probability"
    SQUARED_AMPLITUDE = "squared_amplitude"


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Полный набор параметров прогона. По умолчанию -- параметры эксперимента
    (mu = mu*eta / eta = 1.4e-2 / 0.13).
    source_fidelity -- верность пары |phi+> у источника (томография пары: 0.98 +- 0.01);
    остаток p -- некогерентная смесь |HV> и |VH>: V_Z падает в (1 - 2p) раз, V_X -- в (1 - p) раз.
    """

    gamma: float = 3.0e-3
    gamma_convention: GammaConvention = GammaConvention.PAIR_PROBABILITY
    mu: float = 1.4e-2 / 0.13
    transmittance: float = 0.1
    eta: float = 0.13
    eta_g: float = 0.09
    dark_count: float = 1.5e-6
    dark_count_e: float = 0.0
    dark_count_f: float = 0.0
    overlap: float = 1.0
    sigma_um: float = 100.0
    delay_um: float = 0.0
    gp_reflectance: float = 0.05
    source_fidelity: float = 0.97
    phase_steps: int = 8
    phase_delta: float = 0.0
    cutoff: int = 4
    pair_cutoff: int = 2
    variant: Variant = Variant.COUNTER_PROPAGATING
    include_dbar_branch: bool = False
    qubit: tuple[complex, complex] | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "gamma_convention", GammaConvention(self.gamma_convention))
        errors: dict[str, str] = {}

        for name in ("transmittance", "eta", "eta_g", "overlap", "gp_reflectance", "source_fidelity"):
            if not 0 <= getattr(self, name) <= 1:
                errors[name] = "must lie in [0, 1]"
        for name in ("dark_count", "dark_count_e", "dark_count_f"):
            if not 0 <= getattr(self, name) < 1:
                errors[name] = "must lie in [0, 1)"
        if not 0 <= self.gamma < 0.5:
            errors["gamma"] = "must lie in [0, 0.5)"
        if self.mu < 0:
            errors["mu"] = "must be non-negative"
        if self.sigma_um <= 0:
            errors["sigma_um"] = "must be positive"
        if self.phase_steps < 1:
            errors["phase_steps"] = "must be at least 1"
        if not 0 <= self.cutoff <= 8:
            errors["cutoff"] = "must lie in [0, 8]"
        if self.pair_cutoff < 1:
            errors["pair_cutoff"] = "must be at least 1"
        if self.variant is Variant.COUNTER_PROPAGATING and self.gp_reflectance == 0 and self.mu > 0:
            errors["gp_reflectance"] = "must be positive when the ancilla is reflected by the glass plate"
        if self.qubit is not None:
            alpha, beta = self.qubit
            if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-9:
                errors["qubit"] = "|alpha|^2 + |beta|^2 must equal 1"

        if errors:
            raise ConfigurationError("Invalid experiment configuration", errors=errors)

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    @property
    def spdc(self) -> SpdcParams:
        gamma = self.gamma / 2 if self.gamma_convention is GammaConvention.PAIR_PROBABILITY else self.gamma
        if self.variant is Variant.SINGLE_PHOTON_ANCILLA:
            return SpdcParams(gamma, 1, reference_cutoff=True)
        return SpdcParams(gamma, self.pair_cutoff)

    @property
    def flip_probability(self) -> float:
        return 1.0 - self.source_fidelity

    @property
    def pair_probability(self) -> float:
        """Вероятность одной пары в импульсе в главном порядке."""
        return self.gamma if self.gamma_convention is GammaConvention.PAIR_PROBABILITY else 2 * self.gamma

    @property
    def ancilla(self) -> CoherentParams:
        return CoherentParams(self.mu, self.transmittance)

    @property
    def overlap_model(self) -> OverlapModel:
        return OverlapModel(self.overlap, self.sigma_um)

    @property
    def effective_overlap(self) -> float:
        return self.overlap_model.at(self.delay_um)

    @property
    def phases(self) -> tuple[tuple[float, float], ...]:
        """Коллективный шум: phi_H = 0, phi_V = 2 pi n / phase_steps (n pi / 4 при 8 шагах)."""
        return tuple((0.0, 2 * math.pi * n / self.phase_steps) for n in range(self.phase_steps))

    @property
    def detectors(self) -> dict[str, DetectorModel]:
        return {
            "E": DetectorModel("D_E", self.eta, self.dark_count_e),
            "F": DetectorModel("D_F", self.eta, self.dark_count_f),
            "FR": DetectorModel("D_Fbar", self.eta, self.dark_count_f),
            "G": DetectorModel("D_G", self.eta_g, self.dark_count),
        }

    def as_dict(self) -> dict:
        data = {name: getattr(self, name) for name in self.__dataclass_fields__}
        data["variant"] = self.variant.value
        data["gamma_convention"] = self.gamma_convention.value
        if self.qubit is not None:
            data["qubit"] = [[complex(z).real, complex(z).imag] for z in self.qubit]
        return data


@dataclass
class ProtocolOutcome:
    """Результат прогона: таблица совпадений, вклад секторов и диагностика обрезки."""

    config: ExperimentConfig
    table: CoincidenceTable
    sectors: dict[tuple[int, int], float] = field(default_factory=dict)
    truncated_weight: float = 0.0
    phases: tuple[tuple[float, float], ...] = ()

    @property
    def triple_probability(self) -> float:
        return self.table.triple

    @property
    def density_matrix(self) -> PolarizationDensityMatrix:
        return self.table.density_matrix(("E", "G"))

    def components(self) -> dict[str, float]:
        result = {name: 0.0 for name in (*COMPONENTS, "other")}
        for (k, n), p in self.sectors.items():
            name = next((c for c, match in COMPONENTS.items() if match(k, n)), "other")
            result[name] += p
        return result

    def diagnostics(self) -> dict:
        return {
            "truncated_weight": self.truncated_weight,
            "components": self.components(),
            "phases": len(self.phases),
        }


@lru_cache(maxsize=None)
def protocol_registry(variant: Variant) -> ModeRegistry:
    """Реестр мод варианта. Один объект на процесс: состояния одного прогона живут в нём."""
    alice = [("R", True), ("E", True), ("F", True), ("FR", True)]
    match Variant(variant):
        case Variant.COUNTER_PROPAGATING:
            return make_registry(["A", "B", *alice, "G", "LB", "XB", ("LR", True), ("XR", True)])
        case Variant.SINGLE_PHOTON_ANCILLA:
            return make_registry(["A", "B", *alice, "G", "LB", "XB", ("LR", True)])
        case Variant.FORWARD_ALL_FROM_BOB:
            return make_registry(["A", "B", *alice, "G", "LA", ("LR", True)])
        case Variant.DIRECT_NO_DFS:
            return make_registry(["A", "B", "E", "G", "LB", "XB"])


def _channel(spatial: str, loss_label: str, cfg: ExperimentConfig, phase_h: float, phase_v: float) -> list[ElementSpec]:
    """Общий канал: фаза, затем потери T."""
    return [
        ElementSpec(ElementKind.PHASE_SHIFTER, (spatial,), phase_h=phase_h, phase_v=phase_v),
        ElementSpec(ElementKind.LOSS, (spatial, loss_label), transmittance=cfg.transmittance),
    ]


def pair_path(cfg: ExperimentConfig, phase_h: float, phase_v: float) -> list[ElementSpec]:
    """Путь фотонов пары до детекторов (B -> G; в прямой схеме ещё A -> канал)."""
    if cfg.variant is Variant.FORWARD_ALL_FROM_BOB:
        return [*_channel("A", "LA", cfg, phase_h, phase_v), ElementSpec(ElementKind.ROUTE, ("B", "G"))]

    plate = ElementSpec(ElementKind.GLASS_PLATE, ("B", None, "G", "R", "XB", None),
                        reflectance=cfg.gp_reflectance)
    path = [*_channel("B", "LB", cfg, phase_h, phase_v), plate]
    if cfg.variant is Variant.DIRECT_NO_DFS:
        path.append(ElementSpec(ElementKind.ROUTE, ("A", "E")))
    return path


def ancilla_path(cfg: ExperimentConfig, phase_h: float, phase_v: float) -> list[ElementSpec]:
    """Путь импульса R от Боба к PBS_A. При T = 0 потери опущены: mu у Алисы фиксировано по построению."""
    phase_v = phase_v + cfg.phase_delta
    path: list[ElementSpec] = []
    if cfg.variant is Variant.COUNTER_PROPAGATING:
        path.append(ElementSpec(ElementKind.GLASS_PLATE, (None, "R", "G", "R", None, "XR"),
                                reflectance=cfg.gp_reflectance))
    channel = _channel("R", "LR", cfg, phase_h, phase_v)
    if cfg.variant is not Variant.SINGLE_PHOTON_ANCILLA and cfg.transmittance == 0:
        channel = channel[:1]
    path += channel
    path += [
        ElementSpec(ElementKind.HWP, ("R",), angle=math.pi / 4),
        ElementSpec(ElementKind.OVERLAP_SPLIT, ("R",), overlap=cfg.effective_overlap),
    ]
    return path


def alice_path(cfg: ExperimentConfig) -> list[ElementSpec]:
    """Проверка чётности и проекция F на |D> (отражённая часть уходит в FR)."""
    if cfg.variant is Variant.DIRECT_NO_DFS:
        return []
    return [
        ElementSpec(ElementKind.PBS, ("A", "R", "E", "F")),
        ElementSpec(ElementKind.POLARIZER_PROJECTION, ("F", "FR"), target="D"),
    ]


def _run(state: FockStateVector, transforms) -> FockStateVector:
    for t in transforms:
        state = apply_transform(state, t)
    return state


def source_state(cfg: ExperimentConfig, registry: ModeRegistry) -> FockStateVector:
    if cfg.qubit is not None:
        alpha, beta = cfg.qubit
        return encoded_pair_state(registry, "A", "B", alpha, beta, cfg.pair_probability, cfg.cutoff)
    return spdc_state(cfg.spdc, registry, "A", "B", cfg.cutoff)


def ancilla_at_alice(cfg: ExperimentConfig, registry: ModeRegistry, phase_h: float, phase_v: float) -> dict[int, complex]:
    """
    Амплитуды когерентного R перед PBS_A: alpha_out = M alpha по всей цепочке.
    Интенсивность у Боба до пластинки mu_b / R_gp, так что у Алисы остаётся mu.
    """
    params = cfg.ancilla
    mean = params.mu_b if cfg.transmittance > 0 else params.mu
    if cfg.variant is Variant.COUNTER_PROPAGATING:
        mean /= cfg.gp_reflectance
    amplitudes = coherent_amplitudes(registry, "R", mean, params.polarization)
    for t in build_path(registry, ancilla_path(cfg, phase_h, phase_v)):
        amplitudes = propagate_coherent(amplitudes, t)
    r_modes = set(registry.indices("R"))
    return {m: a for m, a in amplitudes.items() if m in r_modes}


def _heralds(cfg: ExperimentConfig, dbar: bool = False) -> list[Herald]:
    det = cfg.detectors
    if cfg.variant is Variant.DIRECT_NO_DFS:
        return []
    if dbar:
        return [Herald(det["F"], "F", clicked=False), Herald(det["FR"], "FR", clicked=True)]
    return [Herald(det["F"], "F", clicked=True)]


def _measure(cfg: ExperimentConfig, state: FockStateVector, bases) -> CoincidenceTable:
    det = cfg.detectors
    table = coincidence_table(state, det["E"], det["G"], _heralds(cfg), bases)
    if cfg.include_dbar_branch and cfg.variant is not Variant.DIRECT_NO_DFS:
        # Исход |D-bar>_F: sigma_z на фотоне E перед анализом
        corrected = apply_transform(state, phase_shifter(state.registry, "E", 0.0, math.pi))
        table = table + coincidence_table(corrected, det["E"], det["G"], _heralds(cfg, dbar=True), bases)
    return table


def _ancilla_sectors(cfg: ExperimentConfig, registry: ModeRegistry, phase_h: float, phase_v: float,
                     n_max: int) -> list[tuple[int, float, FockStateVector | None]]:
    """[(n, вес, состояние R)] для фазово-рандомизированного импульса; None -- вакуум."""
    if cfg.variant is Variant.DIRECT_NO_DFS:
        return [(0, 1.0, None)]

    if cfg.variant is Variant.SINGLE_PHOTON_ANCILLA:
        photon = number_state(registry, coherent_amplitudes(registry, "R", 1.0), 1, cfg.cutoff)
        return [(1, 1.0, _run(photon, build_path(registry, ancilla_path(cfg, phase_h, phase_v))))]

    amplitudes = ancilla_at_alice(cfg, registry, phase_h, phase_v)
    mean = sum(abs(a) ** 2 for a in amplitudes.values())
    if mean == 0:
        return [(0, 1.0, None)]
    weights = poisson_weights(mean, n_max)
    return [(n, float(weights[n]), number_state(registry, amplitudes, n, cfg.cutoff) if n else None)
            for n in range(n_max + 1)]


def source_branches(cfg: ExperimentConfig, phase_h: float, phase_v: float) -> list[tuple[float, list[ElementSpec]]]:
    """
    Некогерентная смесь источника: (вес, путь пары).
    С вероятностью 1 - source_fidelity пара уходит в смесь |HV> и |VH>:
    поровну |psi+> (HWP 45 на A) и |psi-> (ещё фаза pi на A_V).
    """
    path = pair_path(cfg, phase_h, phase_v)
    p = cfg.flip_probability
    if p == 0:
        return [(1.0, path)]
    flip = ElementSpec(ElementKind.HWP, ("A",), angle=math.pi / 4)
    sign = ElementSpec(ElementKind.PHASE_SHIFTER, ("A",), phase_h=0.0, phase_v=math.pi)
    return [(1.0 - p, path), (p / 2, [flip, *path]), (p / 2, [flip, sign, *path])]


def run_fixed_phase(cfg: ExperimentConfig, phase_h: float, phase_v: float,
                    bases: Iterable[tuple[str, str]] = ALL_BASES) -> ProtocolOutcome:
    """Один экземпляр протокола при фиксированных фазах канала (одинаковых для B и R)."""
    bases = tuple(bases)
    registry = protocol_registry(cfg.variant)

    source = source_state(cfg, registry)
    branches = [(w, build_path(registry, path)) for w, path in source_branches(cfg, phase_h, phase_v)]
    alice = build_path(registry, alice_path(cfg))
    truncated = source.truncated_weight

    table = CoincidenceTable()
    sectors: dict[tuple[int, int], float] = {}

    # Сектора по числу испущенных пар (до потерь): разные k не интерферируют
    for k, emitted in split_by_total(source, registry.indices("A")).items():
        n_max = cfg.cutoff - 2 * k
        if n_max < 0:
            continue
        ancillas = _ancilla_sectors(cfg, registry, phase_h, phase_v, n_max)
        # Пуассоновский хвост за обрезкой
        truncated += emitted.norm_squared() * max(0.0, 1.0 - sum(w for _, w, _ in ancillas))

        for branch_weight, pair_transforms in branches:
            pair_sector = _run(emitted, pair_transforms)
            for n, weight, ancilla in ancillas:
                if weight == 0.0:
                    continue
                state = pair_sector if ancilla is None else tensor(pair_sector, ancilla)
                state = _run(state, alice)
                sector_table = _measure(cfg, state, bases).scaled(branch_weight * weight)
                table = table + sector_table
                sectors[(k, n)] = sectors.get((k, n), 0.0) + sector_table.triple

    logger.debug("phase (%.3f, %.3f): triple %.4e over %d sectors", phase_h, phase_v, table.triple, len(sectors))
    return ProtocolOutcome(cfg, table, sectors, truncated, ((phase_h, phase_v),))


def run_phase_averaged(cfg: ExperimentConfig, bases: Iterable[tuple[str, str]] = ALL_BASES) -> ProtocolOutcome:
    """Равновесная смесь по набору фаз; усреднение в фиксированном порядке."""
    bases = tuple(bases)
    phases = cfg.phases
    if not phases:
        raise ConfigurationError("Phase set is empty", errors={"phase_steps": cfg.phase_steps})

    weight = 1.0 / len(phases)
    table = CoincidenceTable()
    sectors: dict[tuple[int, int], float] = {}
    truncated = 0.0

    for phase_h, phase_v in phases:
        outcome = run_fixed_phase(cfg, phase_h, phase_v, bases)
        table = table + outcome.table.scaled(weight)
        truncated += outcome.truncated_weight * weight
        for key, p in outcome.sectors.items():
            sectors[key] = sectors.get(key, 0.0) + p * weight

    logger.info("%s T=%g: triple coincidence %.4e per pulse", cfg.variant.value, cfg.transmittance, table.triple)
    return ProtocolOutcome(cfg, table, sectors, truncated, phases)


def visibilities(outcome: ProtocolOutcome) -> tuple[float, float]:
    """V_Z = <Z_E Z_G>, V_X = <X_E X_G>."""
    table = outcome.table
    for pair in VISIBILITY_BASES:
        if pair not in table.settings:
            raise ConfigurationError("Outcome lacks ZZ/XX settings", errors={"bases": list(table.bases)})
    try:
        return table.correlator("Z", "Z"), table.correlator("X", "X")
    except EmptyPostSelectionError as exc:
        raise EmptyPostSelectionError("Visibilities are undefined for an empty post-selection",
                                      errors=exc.errors) from exc


def f_low(v_z: float, v_x: float) -> float:
    return (v_z + v_x) / 2


def chsh_violated(fidelity_bound: float) -> bool:
    return fidelity_bound > CHSH_THRESHOLD


def sharing_rate(cfg: ExperimentConfig, repetition_rate: float = REPETITION_RATE_HZ) -> tuple[float, float]:
    """(вероятность тройного совпадения на импульс, отсчёты в секунду)."""
    probability = run_phase_averaged(cfg, bases=()).triple_probability
    return probability, probability * repetition_rate


def component_probabilities(cfg: ExperimentConfig) -> dict[str, float]:
    """Вклады в тройные совпадения: полезные события, ошибки mu^2, двойные пары, тёмные отсчёты."""
    return run_phase_averaged(cfg, bases=()).components()


def qubit_target(alpha: complex, beta: complex) -> np.ndarray:
    return np.array([alpha, 0, 0, beta], dtype=complex)


def distribute_qubit(cfg: ExperimentConfig) -> tuple[PolarizationDensityMatrix, float]:
    """Кубит alpha|H> + beta|V>, закодированный в alpha|HH> + beta|VV>; точность усреднённого по фазам выхода."""
    if cfg.qubit is None:
        raise ConfigurationError("Qubit amplitudes are not set", errors={"qubit": "required"})
    dm = run_phase_averaged(cfg).density_matrix
    return dm, fidelity_to_pure(dm, qubit_target(*cfg.qubit))


def rate_ratio(cfg: ExperimentConfig, transmittance: float, repetition_rate: float = REPETITION_RATE_HZ) -> float:
    """Отношение скоростей когерентной и однофотонной схем при одном T."""
    coherent, _ = sharing_rate(cfg.replace(transmittance=transmittance, variant=Variant.COUNTER_PROPAGATING),
                               repetition_rate)
    single, _ = sharing_rate(cfg.replace(transmittance=transmittance, variant=Variant.SINGLE_PHOTON_ANCILLA),
                             repetition_rate)
    if single <= 0:
        raise EmptyPostSelectionError("Single-photon reference rate vanishes", errors={"transmittance": transmittance})
    return coherent / single
