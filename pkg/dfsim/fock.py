"""
Алгебра многомодовых бозонных чистых состояний с обрезкой по полному числу фотонов.

Состояние хранится разреженно: кортеж заполнений (в порядке индексов реестра мод) -> комплексная амплитуда.
Оптические элементы действуют подстановкой операторов рождения a_i^+ -> sum_j M[j, i] b_j^+.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from itertools import product
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from dfsim.exceptions import (
    ConfigurationError,
    EmptyPostSelectionError,
    TransformError,
    TruncationError,
    UnknownModeError,
    UnphysicalStateError,
)


logger = logging.getLogger("dfsim")

# Амплитуды меньше порога считаем нулём
PRUNE_THRESHOLD = 1e-15
ISOMETRY_TOLERANCE = 1e-12
NORM_TOLERANCE = 1e-9
DEFAULT_CUTOFF = 4

# sqrt(n!) для n <= 16 хватает с запасом при cutoff <= 8
_SQRT_FACTORIAL = tuple(math.sqrt(math.factorial(n)) for n in range(17))


class Polarization(str, Enum):
    H = "H"
    V = "V"


class Temporal(str, Enum):
    MATCHED = "matched"
    ORTHOGONAL = "orthogonal"


@dataclass(frozen=True)
class Mode:
    """Оптическая мода: пространственная метка x поляризация x временная компонента."""

    spatial: str
    polarization: Polarization
    temporal: Temporal = Temporal.MATCHED

    def __str__(self) -> str:
        suffix = "'" if self.temporal is Temporal.ORTHOGONAL else ""
        return f"{self.spatial}_{self.polarization.value}{suffix}"


class ModeRegistry:
    """
    Упорядоченный реестр мод.
    Индексы 0..n-1 неизменны всё время жизни реестра, тройки (label, pol, temporal) уникальны.
    """

    def __init__(self, modes: Iterable[Mode]):
        self._modes: tuple[Mode, ...] = tuple(modes)
        self._index: dict[Mode, int] = {}
        by_label: dict[str, list[int]] = {}

        for i, mode in enumerate(self._modes):
            if mode in self._index:
                raise ConfigurationError(f"Duplicate mode {mode}", errors={"mode": str(mode)})
            self._index[mode] = i
            by_label.setdefault(mode.spatial, []).append(i)

        self._by_label = {label: tuple(idx) for label, idx in by_label.items()}

    def __len__(self) -> int:
        return len(self._modes)

    def __iter__(self):
        return iter(self._modes)

    def __contains__(self, label: str) -> bool:
        return label in self._by_label

    def __repr__(self) -> str:
        return f"ModeRegistry({', '.join(str(m) for m in self._modes)})"

    @property
    def modes(self) -> tuple[Mode, ...]:
        return self._modes

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._by_label)

    def mode(self, index: int) -> Mode:
        return self._modes[index]

    def index(self, spatial: str, polarization: Polarization | str,
              temporal: Temporal | str = Temporal.MATCHED) -> int:
        key = Mode(spatial, Polarization(polarization), Temporal(temporal))
        try:
            return self._index[key]
        except KeyError:
            raise UnknownModeError(f"Mode {key} is not registered", errors={"mode": str(key)}) from None

    def indices(self, spatial: str, polarization: Polarization | str | None = None) -> tuple[int, ...]:
        """Все моды метки (обе временные компоненты); при заданной поляризации только её."""
        if spatial not in self._by_label:
            raise UnknownModeError(f"Spatial label {spatial!r} is not registered", errors={"label": spatial})
        idx = self._by_label[spatial]
        if polarization is None:
            return idx
        pol = Polarization(polarization)
        return tuple(i for i in idx if self._modes[i].polarization is pol)

    def has_twins(self, spatial: str) -> bool:
        return any(self._modes[i].temporal is Temporal.ORTHOGONAL for i in self.indices(spatial))

    def resolve(self, mode: int | Mode) -> int:
        if isinstance(mode, Mode):
            return self.index(mode.spatial, mode.polarization, mode.temporal)
        if not 0 <= mode < len(self._modes):
            raise UnknownModeError(f"Mode index {mode} out of range", errors={"mode": mode})
        return mode


def make_registry(spec: Iterable[str | tuple[str, bool]]) -> ModeRegistry:
    """
    Реестр из списка меток. Элемент: "A" или ("R", True), где True добавляет ортогональных временных двойников.
    Порядок мод внутри метки: H, V, затем H', V'.
    """
    modes: list[Mode] = []
    seen: set[str] = set()

    for item in spec:
        label, split = (item, False) if isinstance(item, str) else item
        if label in seen:
            raise ConfigurationError(f"Duplicate spatial label {label!r}", errors={"label": label})
        seen.add(label)

        temporals = (Temporal.MATCHED, Temporal.ORTHOGONAL) if split else (Temporal.MATCHED,)
        for temporal in temporals:
            for pol in Polarization:
                modes.append(Mode(label, pol, temporal))

    return ModeRegistry(modes)


@dataclass(frozen=True, eq=False)
class FockStateVector:
    """
    Разреженный вектор состояния.
    normalized=False помечает промежуточные (после проекции) состояния.
    truncated_weight накапливает вес, отброшенный обрезкой.
    """

    registry: ModeRegistry
    cutoff: int
    terms: Mapping[tuple[int, ...], complex]
    truncated_weight: float = 0.0
    normalized: bool = True

    @classmethod
    def from_terms(cls, registry: ModeRegistry, cutoff: int, terms: Mapping[tuple[int, ...], complex], *,
                   truncated_weight: float = 0.0, normalized: bool = True) -> "FockStateVector":
        if cutoff < 0:
            raise ConfigurationError("Cutoff must be non-negative", errors={"cutoff": cutoff})

        size = len(registry)
        clean: dict[tuple[int, ...], complex] = {}
        dropped = 0.0

        for occ, amp in terms.items():
            occ = tuple(occ)
            if len(occ) != size:
                raise UnknownModeError(f"Occupation {occ} does not match registry of {size} modes")
            if sum(occ) > cutoff:
                dropped += abs(amp) ** 2
                continue
            if abs(amp) > PRUNE_THRESHOLD:
                clean[occ] = complex(amp)

        state = cls(registry, cutoff, MappingProxyType(clean), truncated_weight + dropped, normalized)
        if normalized and state.norm_squared() > 1 + NORM_TOLERANCE:
            raise UnphysicalStateError("Prepared state has norm above one",
                                       errors={"norm_squared": state.norm_squared()})
        return state

    @classmethod
    def vacuum(cls, registry: ModeRegistry, cutoff: int = DEFAULT_CUTOFF) -> "FockStateVector":
        return cls.from_terms(registry, cutoff, {(0,) * len(registry): 1.0})

    @classmethod
    def basis(cls, registry: ModeRegistry, occupation: Mapping[int | Mode, int],
              cutoff: int = DEFAULT_CUTOFF, amplitude: complex = 1.0) -> "FockStateVector":
        """Базисный вектор |n_1, ..., n_k> по словарю {мода: число фотонов}."""
        occ = [0] * len(registry)
        for mode, n in occupation.items():
            occ[registry.resolve(mode)] = n
        if sum(occ) > cutoff:
            raise TruncationError("Basis state exceeds cutoff", errors={"cutoff": cutoff, "photons": sum(occ)})
        return cls.from_terms(registry, cutoff, {tuple(occ): amplitude})

    def norm_squared(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return self.terms.get(tuple(occupation), 0j)

    def support(self) -> frozenset[int]:
        """Моды, заполненные хотя бы в одном слагаемом."""
        return frozenset(i for occ in self.terms for i, n in enumerate(occ) if n)

    def scaled(self, factor: complex) -> "FockStateVector":
        return FockStateVector.from_terms(
            self.registry, self.cutoff, {k: v * factor for k, v in self.terms.items()},
            truncated_weight=self.truncated_weight, normalized=False,
        )

    def isclose(self, other: "FockStateVector", atol: float = 1e-10, up_to_global_phase: bool = False) -> bool:
        if other.registry is not self.registry:
            return False
        keys = set(self.terms) | set(other.terms)
        phase = 1.0 + 0j
        if up_to_global_phase and keys:
            anchor = max(keys, key=lambda k: abs(self.amplitude(k)))
            a, b = self.amplitude(anchor), other.amplitude(anchor)
            if abs(b) > PRUNE_THRESHOLD:
                phase = (a / b) / abs(a / b)
        return all(abs(self.amplitude(k) - phase * other.amplitude(k)) <= atol for k in keys)


@dataclass(frozen=True, eq=False)
class ModeTransform:
    """
    Линейное отображение операторов рождения: столбец i матрицы -- образ входной моды inputs[i]
    в базисе выходных мод outputs. Обязано быть изометрией (M^+ M = 1).
    """

    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    matrix: np.ndarray
    label: str = "transform"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        object.__setattr__(self, "inputs", tuple(int(i) for i in self.inputs))
        object.__setattr__(self, "outputs", tuple(int(i) for i in self.outputs))

        if m.shape != (len(self.outputs), len(self.inputs)):
            raise TransformError(f"{self.label}: matrix shape {m.shape} does not match "
                                 f"{len(self.outputs)} outputs x {len(self.inputs)} inputs")
        if len(set(self.inputs)) != len(self.inputs) or len(set(self.outputs)) != len(self.outputs):
            raise TransformError(f"{self.label}: repeated mode indices")

        gram = m.conj().T @ m
        deviation = float(np.max(np.abs(gram - np.eye(len(self.inputs))))) if self.inputs else 0.0
        if deviation > ISOMETRY_TOLERANCE:
            raise TransformError(f"{self.label}: matrix is not an isometry",
                                 errors={"max_deviation": deviation})

        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @cached_property
    def images(self) -> dict[int, tuple[tuple[int, complex], ...]]:
        """{входная мода: ((выходная мода, коэффициент), ...)} без нулевых коэффициентов."""
        result = {}
        for col, mode_in in enumerate(self.inputs):
            result[mode_in] = tuple(
                (mode_out, complex(self.matrix[row, col]))
                for row, mode_out in enumerate(self.outputs)
                if abs(self.matrix[row, col]) > PRUNE_THRESHOLD
            )
        return result

    def check_registry(self, registry: ModeRegistry) -> None:
        size = len(registry)
        bad = [i for i in (*self.inputs, *self.outputs) if not 0 <= i < size]
        if bad:
            raise UnknownModeError(f"{self.label}: modes {bad} are not in the registry")

    def embedded(self, modes: Sequence[int]) -> np.ndarray:
        """Матрица на наборе мод modes: не входные моды отображаются сами в себя."""
        pos = {m: i for i, m in enumerate(modes)}
        full = np.eye(len(modes), dtype=complex)
        for col, mode_in in enumerate(self.inputs):
            full[:, pos[mode_in]] = 0
            for row, mode_out in enumerate(self.outputs):
                full[pos[mode_out], pos[mode_in]] = self.matrix[row, col]
        return full

    def after(self, first: "ModeTransform") -> "ModeTransform":
        """Композиция self o first (сначала first, затем self)."""
        modes = sorted({*first.inputs, *first.outputs, *self.inputs, *self.outputs})
        full = self.embedded(modes) @ first.embedded(modes)
        # Моды, в которые пишет first, входами композиции не являются
        inputs = sorted({*first.inputs, *(set(self.inputs) - set(first.outputs))})
        cols = [modes.index(m) for m in inputs]
        return ModeTransform(tuple(inputs), tuple(modes), full[:, cols], label=f"{self.label}*{first.label}")


def apply_transform(state: FockStateVector, t: ModeTransform) -> FockStateVector:
    """
    Подстановка операторов рождения по матрице t и переразложение по базису Фока.
    Слагаемые выше cutoff отбрасываются, их вес копится в truncated_weight.
    """
    t.check_registry(state.registry)
    images = t.images
    sqrt_fact = _SQRT_FACTORIAL
    out: dict[tuple[int, ...], complex] = {}

    for occ, amp in state.terms.items():
        # Амплитуда -> коэффициент при мономе prod (a^+)^n / sqrt(n!)
        coeff = amp
        for n in occ:
            if n > 1:
                coeff /= sqrt_fact[n]

        base = list(occ)
        factors: list[tuple[tuple[int, complex], ...]] = []
        for mode_in, image in images.items():
            n = occ[mode_in]
            if n:
                base[mode_in] = 0
                factors.extend([image] * n)

        partial: dict[tuple[int, ...], complex] = {tuple(base): coeff}
        for image in factors:
            expanded: dict[tuple[int, ...], complex] = {}
            for mono, c in partial.items():
                for mode_out, m in image:
                    lst = list(mono)
                    lst[mode_out] += 1
                    key = tuple(lst)
                    expanded[key] = expanded.get(key, 0j) + c * m
            partial = expanded

        for mono, c in partial.items():
            for n in mono:
                if n > 1:
                    c *= sqrt_fact[n]
            out[mono] = out.get(mono, 0j) + c

    result = FockStateVector.from_terms(
        state.registry, state.cutoff, out,
        truncated_weight=state.truncated_weight, normalized=False,
    )
    logger.debug("%s: %d -> %d terms, truncated %.3e", t.label, len(state.terms), len(result.terms),
                 result.truncated_weight - state.truncated_weight)
    return FockStateVector(result.registry, result.cutoff, result.terms, result.truncated_weight, state.normalized)


def tensor(a: FockStateVector, b: FockStateVector) -> FockStateVector:
    """Произведение состояний на непересекающихся модах общего реестра."""
    if a.registry is not b.registry:
        raise ConfigurationError("States live in different registries")
    if a.cutoff != b.cutoff:
        raise ConfigurationError("States use different cutoffs", errors={"cutoff": [a.cutoff, b.cutoff]})
    overlap = a.support() & b.support()
    if overlap:
        raise ConfigurationError("States share occupied modes",
                                 errors={"modes": sorted(str(a.registry.mode(i)) for i in overlap)})

    terms: dict[tuple[int, ...], complex] = {}
    for occ_a, amp_a in a.terms.items():
        for occ_b, amp_b in b.terms.items():
            key = tuple(x + y for x, y in zip(occ_a, occ_b))
            terms[key] = amp_a * amp_b

    return FockStateVector.from_terms(
        a.registry, a.cutoff, terms,
        truncated_weight=a.truncated_weight + b.truncated_weight,
        normalized=a.normalized and b.normalized,
    )


def project_occupation(state: FockStateVector, mode: int | Mode, n: int) -> FockStateVector:
    """Оставляет слагаемые ровно с n фотонами в моде; норма^2 = вероятность исхода."""
    if n > state.cutoff:
        raise TruncationError("Projection above cutoff", errors={"n": n, "cutoff": state.cutoff})
    idx = state.registry.resolve(mode)
    return FockStateVector(
        state.registry, state.cutoff,
        MappingProxyType({occ: amp for occ, amp in state.terms.items() if occ[idx] == n}),
        state.truncated_weight, normalized=False,
    )


def split_by_total(state: FockStateVector, modes: Iterable[int]) -> dict[int, FockStateVector]:
    """Разбиение по числу фотонов в группе мод: {n: ненормированная компонента}."""
    modes = tuple(modes)
    buckets: dict[int, dict[tuple[int, ...], complex]] = {}
    for occ, amp in state.terms.items():
        buckets.setdefault(sum(occ[i] for i in modes), {})[occ] = amp
    return {
        n: FockStateVector(state.registry, state.cutoff, MappingProxyType(terms), state.truncated_weight, False)
        for n, terms in sorted(buckets.items())
    }


def norm_squared(state: FockStateVector) -> float:
    return state.norm_squared()


def coherent_product(registry: ModeRegistry, amplitudes: Mapping[int, complex],
                     cutoff: int = DEFAULT_CUTOFF) -> FockStateVector:
    """
    Произведение когерентных состояний |alpha_j> по модам, обрезанное по полному числу фотонов.
    Отброшенный хвост распределения Пуассона записывается в truncated_weight.
    """
    active = [(registry.resolve(m), complex(a)) for m, a in amplitudes.items() if abs(a) > PRUNE_THRESHOLD]
    mean = sum(abs(a) ** 2 for _, a in active)
    prefactor = math.exp(-mean / 2)
    size = len(registry)
    terms: dict[tuple[int, ...], complex] = {}

    for counts in product(range(cutoff + 1), repeat=len(active)):
        if sum(counts) > cutoff:
            continue
        occ = [0] * size
        amp = prefactor + 0j
        for (mode, alpha), n in zip(active, counts):
            occ[mode] = n
            amp *= alpha ** n / _SQRT_FACTORIAL[n]
        terms[tuple(occ)] = amp

    kept = sum(abs(a) ** 2 for a in terms.values())
    return FockStateVector.from_terms(registry, cutoff, terms, truncated_weight=max(0.0, 1.0 - kept))


def propagate_coherent(amplitudes: Mapping[int, complex], t: ModeTransform) -> dict[int, complex]:
    """
    Когерентное состояние переходит в когерентное: alpha_out = M alpha.
    Моды вне t.inputs сохраняют свои амплитуды (выходные моды изометрии предполагаются свободными).
    """
    result: dict[int, complex] = {m: a for m, a in amplitudes.items() if m not in t.images}
    for mode_in, image in t.images.items():
        alpha = amplitudes.get(mode_in, 0j)
        if alpha == 0:
            continue
        for mode_out, m in image:
            result[mode_out] = result.get(mode_out, 0j) + m * alpha
    return {m: a for m, a in result.items() if abs(a) > PRUNE_THRESHOLD}


# Двухкубитные поляризационные матрицы

POLARIZATION_BASIS = ("HH", "HV", "VH", "VV")
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)


@dataclass(frozen=True, eq=False)
class PolarizationDensityMatrix:
    """
    4x4 матрица в базисе {HH, HV, VH, VV} двух выделенных пространственных мод.
    След равен вероятности пост-селекции, пока матрица не нормирована.
    """

    matrix: np.ndarray
    labels: tuple[str, str] = ("A", "B")

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise UnphysicalStateError(f"Expected a 4x4 matrix, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def element(self, row: str, col: str) -> complex:
        return complex(self.matrix[POLARIZATION_BASIS.index(row), POLARIZATION_BASIS.index(col)])

    def normalized(self) -> "PolarizationDensityMatrix":
        tr = self.trace
        if tr <= 0:
            raise EmptyPostSelectionError("Density matrix has zero trace", errors={"labels": list(self.labels)})
        return PolarizationDensityMatrix(self.matrix / tr, self.labels)

    def expectation(self, operator: np.ndarray) -> float:
        return float(np.real(np.trace(self.matrix @ operator)))

    def purity(self) -> float:
        rho = self.normalized().matrix
        return float(np.real(np.trace(rho @ rho)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh((self.matrix + self.matrix.conj().T) / 2)

    def trace_distance(self, other: "PolarizationDensityMatrix") -> float:
        diff = self.normalized().matrix - other.normalized().matrix
        return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))

    def validate(self, hermitian_tol: float = 1e-12, psd_tol: float = 1e-10) -> None:
        """Эрмитовость, положительность и след в (0, 1 + 1e-9]."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > hermitian_tol:
            raise UnphysicalStateError("Density matrix is not Hermitian")
        low = float(np.min(self.eigenvalues()))
        if low < -psd_tol:
            raise UnphysicalStateError("Density matrix is not positive", errors={"min_eigenvalue": low})
        if not 0 < self.trace <= 1 + NORM_TOLERANCE:
            raise UnphysicalStateError("Trace out of range", errors={"trace": self.trace})

    @classmethod
    def from_pure(cls, vector: Sequence[complex], labels: tuple[str, str] = ("A", "B")):
        v = np.asarray(vector, dtype=complex)
        return cls(np.outer(v, v.conj()), labels)


def reduce_to_polarization_dm(state: FockStateVector, spatial_a: str, spatial_b: str,
                              environment_weight: Callable[[tuple[int, ...]], float] | None = None,
                              ) -> PolarizationDensityMatrix:
    """
    Сектор ровно с одним фотоном в каждой из меток; остальное (моды потерь, F, временные
    компоненты) следится некогерентно. След результата -- вероятность сектора.
    environment_weight(env) -- вес исхода на остальных модах (например, вероятность щелчка D_F).
    """
    reg = state.registry
    a_modes = reg.indices(spatial_a)
    b_modes = reg.indices(spatial_b)
    pol_bit = {i: int(reg.mode(i).polarization is Polarization.V) for i in (*a_modes, *b_modes)}
    groups: dict[tuple, np.ndarray] = {}

    for occ, amp in state.terms.items():
        occupied_a = [i for i in a_modes if occ[i]]
        occupied_b = [i for i in b_modes if occ[i]]
        if len(occupied_a) != 1 or len(occupied_b) != 1:
            continue
        ia, ib = occupied_a[0], occupied_b[0]
        if occ[ia] != 1 or occ[ib] != 1:
            continue

        env = list(occ)
        env[ia] = env[ib] = 0
        # Окружение: прочие моды + временные компоненты двух фотонов
        key = (tuple(env), reg.mode(ia).temporal, reg.mode(ib).temporal)
        vec = groups.setdefault(key, np.zeros(4, dtype=complex))
        vec[2 * pol_bit[ia] + pol_bit[ib]] += amp

    rho = np.zeros((4, 4), dtype=complex)
    for (env, _, _), vec in groups.items():
        weight = 1.0 if environment_weight is None else environment_weight(env)
        if weight:
            rho += weight * np.outer(vec, vec.conj())
    return PolarizationDensityMatrix(rho, (spatial_a, spatial_b))


def fidelity_to_pure(dm: PolarizationDensityMatrix, target: Sequence[complex]) -> float:
    rho = dm.normalized().matrix
    v = np.asarray(target, dtype=complex)
    v = v / np.linalg.norm(v)
    return float(min(1.0, max(0.0, np.real(v.conj() @ rho @ v))))


def fidelity_to_phi_plus(dm: PolarizationDensityMatrix) -> float:
    return fidelity_to_pure(dm, PHI_PLUS)
