"""
Оптические элементы схемы как построители ModeTransform.

Соглашения:
- светоделитель: вещественный поворот [[cos, -sin], [sin, cos]], PBS без дополнительных фаз отражения;
- волновая пластинка: матрица Джонса R(theta) diag(1, e^{i delta}) R(-theta);
- все элементы действуют одинаково на согласованную и ортогональную временные компоненты.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from dfsim.exceptions import ConfigurationError
from dfsim.fock import ModeRegistry, ModeTransform, Polarization, Temporal


logger = logging.getLogger("dfsim")

HWP_RETARDANCE = math.pi
QWP_RETARDANCE = math.pi / 2

# Векторы Джонса в базисе (H, V)
JONES = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "A": np.array([1, -1], dtype=complex) / math.sqrt(2),
    "R": np.array([1, 1j], dtype=complex) / math.sqrt(2),
    "L": np.array([1, -1j], dtype=complex) / math.sqrt(2),
}

# Анализатор: пластинка, после которой "+" исход базиса лежит в H, "-" в V
ANALYZERS = {
    "Z": None,
    "X": (math.pi / 8, HWP_RETARDANCE),
    "Y": (math.pi / 4, QWP_RETARDANCE),
}


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def jones_waveplate(theta: float, retardance: float) -> np.ndarray:
    return rotation(theta) @ np.diag([1, np.exp(1j * retardance)]) @ rotation(-theta)


def jones_vector(state: str | Sequence[complex]) -> np.ndarray:
    if isinstance(state, str):
        try:
            return JONES[state]
        except KeyError:
            raise ConfigurationError(f"Unknown polarization {state!r}",
                                     errors={"polarization": sorted(JONES)}) from None
    v = np.asarray(state, dtype=complex)
    norm = np.linalg.norm(v)
    if v.shape != (2,) or norm == 0:
        raise ConfigurationError("Jones vector must have two non-zero components")
    return v / norm


def _check_unit_interval(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise ConfigurationError(f"{name} must lie in [0, 1]", errors={name: value})


def _temporals(registry: ModeRegistry, spatial: str) -> tuple[Temporal, ...]:
    if registry.has_twins(spatial):
        return Temporal.MATCHED, Temporal.ORTHOGONAL
    return (Temporal.MATCHED,)


def _polarization_block(registry: ModeRegistry, spatial: str, jones: np.ndarray, label: str) -> ModeTransform:
    """Одна и та же 2x2 матрица на каждой временной компоненте метки."""
    inputs: list[int] = []
    blocks = []
    for temporal in _temporals(registry, spatial):
        inputs += [registry.index(spatial, Polarization.H, temporal), registry.index(spatial, Polarization.V, temporal)]
        blocks.append(jones)

    size = len(inputs)
    matrix = np.zeros((size, size), dtype=complex)
    for k, block in enumerate(blocks):
        matrix[2 * k:2 * k + 2, 2 * k:2 * k + 2] = block
    return ModeTransform(tuple(inputs), tuple(inputs), matrix, label=label)


def waveplate(registry: ModeRegistry, spatial: str, angle: float, retardance: float) -> ModeTransform:
    if not (math.isfinite(angle) and math.isfinite(retardance)):
        raise ConfigurationError("Waveplate angle and retardance must be finite")
    return _polarization_block(registry, spatial, jones_waveplate(angle, retardance),
                               label=f"WP({spatial}, {math.degrees(angle):.2f} deg)")


def hwp(registry: ModeRegistry, spatial: str, angle: float) -> ModeTransform:
    return waveplate(registry, spatial, angle, HWP_RETARDANCE)


def qwp(registry: ModeRegistry, spatial: str, angle: float) -> ModeTransform:
    return waveplate(registry, spatial, angle, QWP_RETARDANCE)


def phase_shifter(registry: ModeRegistry, spatial: str, phase_h: float, phase_v: float) -> ModeTransform:
    jones = np.diag([np.exp(1j * phase_h), np.exp(1j * phase_v)])
    return _polarization_block(registry, spatial, jones, label=f"phase({spatial})")


def analyzer(registry: ModeRegistry, spatial: str, basis: str) -> ModeTransform | None:
    """
    Поворот перед детектором: Z -- ничего, X -- HWP 22.5 (D -> H), Y -- QWP 45 (R -> H, L -> V).
    Для Z возвращает None, чтобы не гонять тождественное преобразование.
    """
    try:
        setting = ANALYZERS[basis]
    except KeyError:
        raise ConfigurationError(f"Unknown analysis basis {basis!r}", errors={"basis": sorted(ANALYZERS)}) from None
    if setting is None:
        return None
    return waveplate(registry, spatial, *setting)


def _paired_modes(registry: ModeRegistry, source: str, target: str) -> list[tuple[int, int]]:
    """Пары (мода source, та же поляризация/временная компонента в target)."""
    pairs = []
    for temporal in _temporals(registry, source):
        for pol in Polarization:
            pairs.append((registry.index(source, pol, temporal), registry.index(target, pol, temporal)))
    return pairs


def loss_channel(registry: ModeRegistry, spatial: str, transmittance: float, loss_label: str,
                 output: str | None = None) -> ModeTransform:
    """
    Поляризационно-независимые потери: a^+ -> sqrt(T) out^+ + sqrt(1-T) loss^+.
    Моды потерь должны быть пустыми (свежими) до применения.
    """
    _check_unit_interval("transmittance", transmittance)
    output = output or spatial
    keep = math.sqrt(transmittance)
    lose = math.sqrt(1.0 - transmittance)

    signal = _paired_modes(registry, spatial, output)
    lost = _paired_modes(registry, spatial, loss_label)
    inputs = [i for i, _ in signal]
    outputs = [o for _, o in signal] + [o for _, o in lost]
    matrix = np.zeros((len(outputs), len(inputs)), dtype=complex)
    for col in range(len(inputs)):
        matrix[col, col] = keep
        matrix[len(inputs) + col, col] = lose
    return ModeTransform(tuple(inputs), tuple(outputs), matrix, label=f"loss({spatial}, T={transmittance:g})")


def route(registry: ModeRegistry, source: str, target: str) -> ModeTransform:
    """Перенос поля метки source в метку target без изменений (свободное распространение)."""
    pairs = _paired_modes(registry, source, target)
    inputs = tuple(i for i, _ in pairs)
    outputs = tuple(o for _, o in pairs)
    return ModeTransform(inputs, outputs, np.eye(len(pairs), dtype=complex), label=f"{source}->{target}")


def pbs(registry: ModeRegistry, in_1: str, in_2: str, out_1: str, out_2: str) -> ModeTransform:
    """
    Поляризационный светоделитель: H проходит (in_1 -> out_1, in_2 -> out_2), V отражается
    (in_1 -> out_2, in_2 -> out_1). Входы могут совпадать с выходами.
    """
    if len({in_1, in_2}) != 2 or len({out_1, out_2}) != 2:
        raise ConfigurationError("PBS ports must be distinct", errors={"ports": [in_1, in_2, out_1, out_2]})

    routing: list[tuple[int, int]] = []
    for source, straight, crossed in ((in_1, out_1, out_2), (in_2, out_2, out_1)):
        for temporal in _temporals(registry, source):
            routing.append((registry.index(source, Polarization.H, temporal),
                            registry.index(straight, Polarization.H, temporal)))
            routing.append((registry.index(source, Polarization.V, temporal),
                            registry.index(crossed, Polarization.V, temporal)))

    inputs = tuple(i for i, _ in routing)
    outputs = tuple(sorted({o for _, o in routing}))
    matrix = np.zeros((len(outputs), len(inputs)), dtype=complex)
    for col, (_, out) in enumerate(routing):
        matrix[outputs.index(out), col] = 1.0
    return ModeTransform(inputs, outputs, matrix, label=f"PBS({in_1},{in_2})")


def glass_plate(registry: ModeRegistry, transmit_in: str | None, reflect_in: str | None, reflectance: float, *,
                transmit_out: str, reflect_out: str,
                transmit_discard: str | None = None, reflect_discard: str | None = None) -> ModeTransform:
    """
    Несимметричный делитель: transmit_in проходит с амплитудой sqrt(1-R) в transmit_out,
    reflect_in отражается с амплитудой sqrt(R) в reflect_out. Дополнительные порты уходят в discard-метки.
    Любой из входов можно опустить (None).
    """
    _check_unit_interval("reflectance", reflectance)
    columns: list[tuple[int, list[tuple[int, float]]]] = []

    ports = (
        (transmit_in, transmit_out, transmit_discard, math.sqrt(1.0 - reflectance), math.sqrt(reflectance)),
        (reflect_in, reflect_out, reflect_discard, math.sqrt(reflectance), math.sqrt(1.0 - reflectance)),
    )
    for source, useful, discard, main_amp, side_amp in ports:
        if source is None:
            continue
        if discard is None and side_amp > 0:
            raise ConfigurationError("Glass plate needs a discard label for a partial port",
                                     errors={"port": source})
        main = dict(_paired_modes(registry, source, useful))
        side = dict(_paired_modes(registry, source, discard)) if discard is not None else {}
        for mode_in, mode_out in main.items():
            image = [(mode_out, main_amp)]
            if side:
                image.append((side[mode_in], side_amp))
            columns.append((mode_in, image))

    inputs = tuple(mode_in for mode_in, _ in columns)
    outputs = tuple(sorted({m for _, image in columns for m, _ in image}))
    matrix = np.zeros((len(outputs), len(inputs)), dtype=complex)
    for col, (_, image) in enumerate(columns):
        for mode_out, amp in image:
            matrix[outputs.index(mode_out), col] += amp
    return ModeTransform(inputs, outputs, matrix, label=f"GP(R={reflectance:g})")


def polarizer_projection(registry: ModeRegistry, spatial: str, target: str | Sequence[complex],
                         reject: str) -> ModeTransform:
    """
    Поляризатор на состояние target: проекция остаётся в H-модах метки, ортогональная часть
    уходит в H-моды метки reject (туда можно поставить второй детектор).
    """
    t = jones_vector(target)
    o = np.array([-np.conj(t[1]), np.conj(t[0])])

    inputs: list[int] = []
    outputs: list[int] = []
    for temporal in _temporals(registry, spatial):
        inputs += [registry.index(spatial, Polarization.H, temporal), registry.index(spatial, Polarization.V, temporal)]
        outputs += [registry.index(spatial, Polarization.H, temporal), registry.index(reject, Polarization.H, temporal)]

    matrix = np.zeros((len(outputs), len(inputs)), dtype=complex)
    for k in range(len(inputs) // 2):
        # строки: <t|, <o| ; столбцы: H, V
        matrix[2 * k, 2 * k:2 * k + 2] = np.conj(t)
        matrix[2 * k + 1, 2 * k:2 * k + 2] = np.conj(o)
    return ModeTransform(tuple(inputs), tuple(outputs), matrix, label=f"POL({spatial})")


def overlap_split(registry: ModeRegistry, spatial: str, overlap: float) -> ModeTransform:
    """
    Внутренний поворот временных компонент: a_P -> s a_P + sqrt(1-s^2) a_P'.
    Видность двухфотонной интерференции на PBS масштабируется как s^2.
    """
    _check_unit_interval("overlap", overlap)
    if not registry.has_twins(spatial):
        raise ConfigurationError(f"Label {spatial!r} has no orthogonal temporal modes", errors={"label": spatial})

    c, s = overlap, math.sqrt(max(0.0, 1.0 - overlap ** 2))
    inputs: list[int] = []
    for pol in Polarization:
        inputs += [registry.index(spatial, pol, Temporal.MATCHED), registry.index(spatial, pol, Temporal.ORTHOGONAL)]

    matrix = np.zeros((4, 4), dtype=complex)
    for k in (0, 2):
        matrix[k:k + 2, k:k + 2] = [[c, -s], [s, c]]
    return ModeTransform(tuple(inputs), tuple(inputs), matrix, label=f"overlap({spatial}, s={overlap:.4f})")


@dataclass(frozen=True)
class OverlapModel:
    """Гауссово перекрытие импульсов: s(dx) = s0 exp(-dx^2 / 2 sigma^2), dx и sigma в мкм."""

    s0: float = 1.0
    sigma_um: float = 100.0

    def __post_init__(self):
        _check_unit_interval("overlap", self.s0)
        if not self.sigma_um > 0:
            raise ConfigurationError("sigma_um must be positive", errors={"sigma_um": self.sigma_um})

    def at(self, delay_um: float) -> float:
        return overlap_at_delay(self, delay_um)


def overlap_at_delay(model: OverlapModel, delay_um: float) -> float:
    return model.s0 * math.exp(-delay_um ** 2 / (2 * model.sigma_um ** 2))


class ElementKind(str, Enum):
    PBS = "PBS"
    HWP = "HWP"
    QWP = "QWP"
    PHASE_SHIFTER = "phase_shifter"
    LOSS = "loss"
    GLASS_PLATE = "glass_plate"
    POLARIZER_PROJECTION = "polarizer_projection"
    OVERLAP_SPLIT = "overlap_split"
    ROUTE = "route"


@dataclass(frozen=True)
class ElementSpec:
    """
    Описание элемента оптического пути. Смысл ports зависит от kind:
    PBS (in_1, in_2, out_1, out_2); LOSS (signal, loss[, output]); ROUTE (source, target);
    GLASS_PLATE (transmit_in, reflect_in, transmit_out, reflect_out, transmit_discard, reflect_discard);
    POLARIZER_PROJECTION (spatial, reject); остальные (spatial,).
    """

    kind: ElementKind
    ports: tuple[str | None, ...]
    angle: float = 0.0
    retardance: float = 0.0
    transmittance: float = 1.0
    reflectance: float = 0.0
    phase_h: float = 0.0
    phase_v: float = 0.0
    overlap: float = 1.0
    target: str = "D"

    def __post_init__(self):
        object.__setattr__(self, "kind", ElementKind(self.kind))
        _check_unit_interval("transmittance", self.transmittance)
        _check_unit_interval("reflectance", self.reflectance)
        _check_unit_interval("overlap", self.overlap)
        if not all(math.isfinite(x) for x in (self.angle, self.retardance, self.phase_h, self.phase_v)):
            raise ConfigurationError("Element angles and phases must be finite", errors={"kind": self.kind.value})

    def build(self, registry: ModeRegistry) -> ModeTransform:
        p = self.ports
        match self.kind:
            case ElementKind.PBS:
                return pbs(registry, *p)
            case ElementKind.HWP:
                return hwp(registry, p[0], self.angle)
            case ElementKind.QWP:
                return qwp(registry, p[0], self.angle)
            case ElementKind.PHASE_SHIFTER:
                return phase_shifter(registry, p[0], self.phase_h, self.phase_v)
            case ElementKind.LOSS:
                return loss_channel(registry, p[0], self.transmittance, p[1], p[2] if len(p) > 2 else None)
            case ElementKind.GLASS_PLATE:
                return glass_plate(registry, p[0], p[1], self.reflectance, transmit_out=p[2], reflect_out=p[3],
                                   transmit_discard=p[4], reflect_discard=p[5])
            case ElementKind.POLARIZER_PROJECTION:
                return polarizer_projection(registry, p[0], self.target, p[1])
            case ElementKind.OVERLAP_SPLIT:
                return overlap_split(registry, p[0], self.overlap)
            case ElementKind.ROUTE:
                return route(registry, p[0], p[1])
        raise ConfigurationError(f"Unsupported element {self.kind}")


def build_path(registry: ModeRegistry, elements: Sequence[ElementSpec]) -> list[ModeTransform]:
    transforms = [element.build(registry) for element in elements]
    logger.debug("Built path: %s", " -> ".join(t.label for t in transforms))
    return transforms
