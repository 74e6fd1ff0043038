"""
Независимый плотный конвейер на матрицах плотности (до 10 мод, обрезка <= 3).

Не пользуется разреженной подстановкой: каждый пассивный элемент -- фоковский унитарный оператор
exp(i sum K_jl a_j^+ a_l) для U = exp(iK), потери -- операторы Крауса, детекторы -- диагональные POVM.
Моды E и F совпадают с модами A и R (PBS переставляет их поляризации), G совпадает с B.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
from scipy.linalg import expm, schur
from scipy.stats import poisson

from dfsim.exceptions import ConfigurationError, OracleMismatchError
from dfsim.optics import jones_waveplate
from dfsim.protocol import VISIBILITY_BASES, ExperimentConfig, Variant, run_phase_averaged
from dfsim.sources import DetectorModel


logger = logging.getLogger("dfsim")

MAX_MODES = 10
MAX_CUTOFF = 3
TOLERANCE = 1e-9

# Порядок мод плотного пространства
MODES = ("A_H", "A_V", "A_H'", "A_V'", "B_H", "B_V", "R_H", "R_V", "R_H'", "R_V'")
M = {name: i for i, name in enumerate(MODES)}

ANALYZER_JONES = {
    "Z": np.eye(2, dtype=complex),
    "X": jones_waveplate(math.pi / 8, math.pi),
    "Y": jones_waveplate(math.pi / 4, math.pi / 2),
}


class DenseSpace:
    """Фоковское пространство с полным числом фотонов <= cutoff."""

    def __init__(self, n_modes: int, cutoff: int):
        if n_modes > MAX_MODES or cutoff > MAX_CUTOFF:
            raise ConfigurationError("Dense oracle is limited to 10 modes and cutoff 3",
                                     errors={"modes": n_modes, "cutoff": cutoff})
        self.n_modes = n_modes
        self.cutoff = cutoff
        self.basis = [occ for occ in product(range(cutoff + 1), repeat=n_modes) if sum(occ) <= cutoff]
        self.index = {occ: i for i, occ in enumerate(self.basis)}
        self.dim = len(self.basis)
        self.occupations = np.array(self.basis, dtype=int)

    @cached_property
    def annihilators(self) -> list[np.ndarray]:
        ops = []
        for j in range(self.n_modes):
            a = np.zeros((self.dim, self.dim), dtype=complex)
            for col, occ in enumerate(self.basis):
                if occ[j]:
                    lowered = list(occ)
                    lowered[j] -= 1
                    a[self.index[tuple(lowered)], col] = math.sqrt(occ[j])
            ops.append(a)
        return ops

    def creator(self, j: int) -> np.ndarray:
        return self.annihilators[j].conj().T

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index[(0,) * self.n_modes]] = 1.0
        return v

    def passive_unitary(self, modes: tuple[int, ...], u: np.ndarray) -> np.ndarray:
        """
        Фоковский оператор одночастичного унитарного U на модах modes.
        Генератор K из спектрального разложения U (для нормальной матрицы форма Шура диагональна).
        """
        t, z = schur(np.asarray(u, dtype=complex), output="complex")
        k = z @ np.diag(np.angle(np.diag(t))) @ z.conj().T
        k = (k + k.conj().T) / 2

        generator = np.zeros((self.dim, self.dim), dtype=complex)
        for row, mj in enumerate(modes):
            for col, ml in enumerate(modes):
                if abs(k[row, col]) > 1e-14:
                    generator += k[row, col] * self.creator(mj) @ self.annihilators[ml]
        return expm(1j * generator)

    def loss_kraus(self, modes: tuple[int, ...], transmittance: float) -> list[np.ndarray]:
        """K_l = sqrt((1-T)^l / l!) T^(N/2) a^l для каждой моды; произведения по модам."""
        per_mode = []
        for j in modes:
            n = self.occupations[:, j]
            damping = np.diag(np.sqrt(transmittance) ** n).astype(complex)
            ops = []
            power = np.eye(self.dim, dtype=complex)
            for lost in range(self.cutoff + 1):
                coeff = math.sqrt((1 - transmittance) ** lost / math.factorial(lost))
                ops.append(coeff * damping @ power)
                power = self.annihilators[j] @ power
            per_mode.append(ops)

        kraus = []
        for combo in product(*per_mode):
            k = np.eye(self.dim, dtype=complex)
            for op in combo:
                k = op @ k
            kraus.append(k)
        return kraus

    def counts(self, modes: tuple[int, ...]) -> np.ndarray:
        return self.occupations[:, list(modes)].sum(axis=1)


def _block(jones: np.ndarray, pairs: int) -> np.ndarray:
    u = np.zeros((2 * pairs, 2 * pairs), dtype=complex)
    for p in range(pairs):
        u[2 * p:2 * p + 2, 2 * p:2 * p + 2] = jones
    return u


@dataclass
class DenseOutcome:
    patterns: dict[tuple[bool, bool, bool], float] = field(default_factory=dict)
    settings: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)

    def probabilities(self) -> dict[str, float]:
        flat = {f"pattern_{int(e)}{int(f)}{int(g)}": p for (e, f, g), p in self.patterns.items()}
        for (be, bg), p in self.settings.items():
            for a, b in product(range(2), repeat=2):
                flat[f"{be}{bg}_{'+-'[a]}{'+-'[b]}"] = float(p[a, b])
        return flat


class DensePipeline:
    """Тот же эксперимент на явных матрицах плотности."""

    def __init__(self, cfg: ExperimentConfig):
        if cfg.variant not in (Variant.COUNTER_PROPAGATING, Variant.DIRECT_NO_DFS):
            raise ConfigurationError("Dense oracle covers counter_propagating and direct_no_dfs only",
                                     errors={"variant": cfg.variant.value})
        if cfg.include_dbar_branch or cfg.qubit is not None:
            raise ConfigurationError("Dense oracle does not model the D-bar branch or the encoded source")
        self.cfg = cfg
        self.space = DenseSpace(len(MODES), cfg.cutoff)
        self.direct = cfg.variant is Variant.DIRECT_NO_DFS
        self._analyzers: dict[tuple[str, str], np.ndarray] = {}

    def pair_vector(self) -> np.ndarray:
        """sum_k (sqrt(gamma))^k / k! (a_H^+ b_H^+ + a_V^+ b_V^+)^k |0>, нормированная."""
        sp = self.space
        gamma = self.cfg.spdc.gamma
        pair_op = sp.creator(M["A_H"]) @ sp.creator(M["B_H"]) + sp.creator(M["A_V"]) @ sp.creator(M["B_V"])
        vec = sp.vacuum()
        term = sp.vacuum()
        for k in range(1, min(self.cfg.spdc.pair_cutoff, self.cfg.cutoff // 2) + 1):
            term = math.sqrt(gamma) * pair_op @ term / k
            vec = vec + term
        return vec / np.linalg.norm(vec)

    def ancilla_unitary(self, phase_h: float, phase_v: float) -> np.ndarray:
        """H -> D (HWP 22.5), фаза канала, инверсия HWP 45, разделение временных компонент."""
        cfg = self.cfg
        r = (M["R_H"], M["R_V"], M["R_H'"], M["R_V'"])
        s = cfg.effective_overlap
        c = math.sqrt(max(0.0, 1 - s * s))

        prepare = _block(jones_waveplate(math.pi / 8, math.pi), 2)
        phase = _block(np.diag([np.exp(1j * phase_h), np.exp(1j * (phase_v + cfg.phase_delta))]), 2)
        flip = _block(jones_waveplate(math.pi / 4, math.pi), 2)
        # порядок (H, V, H', V'): поворот в парах (H, H') и (V, V')
        split = np.array([[s, 0, -c, 0], [0, s, 0, -c], [c, 0, s, 0], [0, c, 0, s]], dtype=complex)
        return self.space.passive_unitary(r, split @ flip @ phase @ prepare)

    @cached_property
    def alice_unitary(self) -> np.ndarray:
        """PBS_A на совмещённых модах (E = A, F = R) и поворот F: |D> -> |H>."""
        sp = self.space
        modes = tuple(range(len(MODES)))
        pbs = np.eye(len(MODES), dtype=complex)
        for v_a, v_r in (("A_V", "R_V"), ("A_V'", "R_V'")):
            i, j = M[v_a], M[v_r]
            pbs[[i, j]] = pbs[[j, i]]
        rotate = np.eye(len(MODES), dtype=complex)
        rotate[np.ix_([M["R_H"], M["R_V"]], [M["R_H"], M["R_V"]])] = jones_waveplate(math.pi / 8, math.pi)
        rotate[np.ix_([M["R_H'"], M["R_V'"]], [M["R_H'"], M["R_V'"]])] = jones_waveplate(math.pi / 8, math.pi)
        return sp.passive_unitary(modes, rotate @ pbs)

    def sources(self) -> list[tuple[float, np.ndarray]]:
        """Пара |phi+> и, с весом 1 - source_fidelity, поровну |psi+> и |psi->."""
        pair = self.pair_vector()
        p = self.cfg.flip_probability
        if p == 0:
            return [(1.0, pair)]
        a = (M["A_H"], M["A_V"])
        flipped = self.space.passive_unitary(a, jones_waveplate(math.pi / 4, math.pi)) @ pair
        signed = self.space.passive_unitary(a, np.diag([1.0, -1.0]).astype(complex)) @ flipped
        return [(1.0 - p, pair), (p / 2, flipped), (p / 2, signed)]

    def state(self, phase_h: float, phase_v: float) -> np.ndarray:
        """Матрица плотности перед анализаторами E и G."""
        cfg = self.cfg
        sp = self.space
        b = (M["B_H"], M["B_V"])
        bob = sp.passive_unitary(b, np.diag([np.exp(1j * phase_h), np.exp(1j * phase_v)]))
        t_b = cfg.transmittance * (1 - cfg.gp_reflectance)
        kraus = sp.loss_kraus(b, t_b)

        if self.direct:
            branches = self.sources()
        else:
            ancilla = self.ancilla_unitary(phase_h, phase_v)
            weights = poisson.pmf(np.arange(cfg.cutoff + 1), cfg.mu)
            branches = []
            raise_h = sp.creator(M["R_H"])
            for source_weight, vec in self.sources():
                for n, w in enumerate(weights):
                    if n:
                        vec = raise_h @ vec / math.sqrt(n)
                    branches.append((source_weight * float(w), ancilla @ vec))

        rho = np.zeros((sp.dim, sp.dim), dtype=complex)
        for w, vec in branches:
            vec = bob @ vec
            for k in kraus:
                out = k @ vec
                rho += w * np.outer(out, out.conj())

        if not self.direct:
            u = self.alice_unitary
            rho = u @ rho @ u.conj().T
        return rho

    def analyzers(self, basis_e: str, basis_g: str) -> np.ndarray:
        key = (basis_e, basis_g)
        if key not in self._analyzers:
            sp = self.space
            ue = sp.passive_unitary((M["A_H"], M["A_V"], M["A_H'"], M["A_V'"]), _block(ANALYZER_JONES[basis_e], 2))
            ug = sp.passive_unitary((M["B_H"], M["B_V"]), ANALYZER_JONES[basis_g])
            self._analyzers[key] = ug @ ue
        return self._analyzers[key]

    def measure(self, rho: np.ndarray, bases) -> DenseOutcome:
        sp = self.space
        det = self.cfg.detectors
        e_det, f_det, g_det = det["E"], det["F"], det["G"]
        e_modes = (M["A_H"], M["A_V"], M["A_H'"], M["A_V'"])
        g_modes = (M["B_H"], M["B_V"])

        def click(model: DetectorModel, n: np.ndarray) -> np.ndarray:
            return 1.0 - (1.0 - model.dark_count) * (1.0 - model.efficiency) ** n

        if self.direct:
            herald = np.ones(sp.dim)
        else:
            herald = click(f_det, sp.counts((M["R_H"], M["R_H'"])))

        outcome = DenseOutcome()
        diag = np.real(np.diag(rho))
        pe, pg = click(e_det, sp.counts(e_modes)), click(g_det, sp.counts(g_modes))
        for ce, cf, cg in product((True, False), repeat=3):
            if self.direct and not cf:
                outcome.patterns[(ce, cf, cg)] = 0.0
                continue
            weight = (pe if ce else 1 - pe) * (herald if cf else 1 - herald) * (pg if cg else 1 - pg)
            outcome.patterns[(ce, cf, cg)] = float(diag @ weight)

        for be, bg in bases:
            w = self.analyzers(be, bg)
            d = np.real(np.diag(w @ rho @ w.conj().T))
            p = np.zeros((2, 2))
            e_sides = (sp.counts((M["A_H"], M["A_H'"])), sp.counts((M["A_V"], M["A_V'"])))
            g_sides = (sp.counts((M["B_H"],)), sp.counts((M["B_V"],)))
            for a, b in product(range(2), repeat=2):
                p[a, b] = float(d @ (herald * click(e_det, e_sides[a]) * click(g_det, g_sides[b])))
            outcome.settings[(be, bg)] = p
        return outcome

    def run(self, bases=VISIBILITY_BASES) -> DenseOutcome:
        """Усреднение по фазам в том же порядке, что и у основного движка."""
        total = DenseOutcome()
        phases = self.cfg.phases
        for phase_h, phase_v in phases:
            part = self.measure(self.state(phase_h, phase_v), bases)
            for key, p in part.patterns.items():
                total.patterns[key] = total.patterns.get(key, 0.0) + p / len(phases)
            for key, p in part.settings.items():
                total.settings[key] = total.settings.get(key, np.zeros((2, 2))) + p / len(phases)
        return total


@dataclass
class OracleReport:
    configs: list[dict] = field(default_factory=list)
    tolerance: float = TOLERANCE

    @property
    def max_deviation(self) -> float:
        return max((c["max_deviation"] for c in self.configs), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def compare(cfg: ExperimentConfig, bases=VISIBILITY_BASES) -> dict:
    """max |dp| между плотным конвейером и разреженным движком по всем вероятностям исходов."""
    dense = DensePipeline(cfg).run(bases).probabilities()
    table = run_phase_averaged(cfg, bases).table
    sparse = {f"pattern_{int(e)}{int(f)}{int(g)}": p for (e, f, g), p in table.patterns.items()}
    for (be, bg), p in table.settings.items():
        for a, b in product(range(2), repeat=2):
            sparse[f"{be}{bg}_{'+-'[a]}{'+-'[b]}"] = float(p[a, b])

    keys = sorted(set(dense) | set(sparse))
    deviations = {k: abs(dense.get(k, 0.0) - sparse.get(k, 0.0)) for k in keys}
    worst = max(deviations, key=deviations.get)
    return {"config": cfg.as_dict(), "max_deviation": deviations[worst], "worst": worst}


def random_config(seed: int) -> ExperimentConfig:
    """Малая случайная конфигурация для проверки (обрезка 2 или 3)."""
    rng = np.random.default_rng(seed)
    return ExperimentConfig(
        gamma=float(rng.uniform(1e-3, 0.1)),
        mu=float(rng.uniform(0.01, 0.5)),
        transmittance=float(rng.uniform(0.05, 1.0)),
        eta=float(rng.uniform(0.1, 1.0)),
        eta_g=float(rng.uniform(0.1, 1.0)),
        dark_count=float(rng.uniform(0.0, 0.01)),
        dark_count_e=float(rng.uniform(0.0, 0.01)),
        dark_count_f=float(rng.uniform(0.0, 0.01)),
        overlap=float(rng.uniform(0.0, 1.0)),
        gp_reflectance=float(rng.uniform(0.01, 0.5)),
        source_fidelity=float(rng.uniform(0.9, 1.0)),
        phase_steps=int(rng.integers(1, 5)),
        phase_delta=float(rng.uniform(0.0, 0.5)),
        cutoff=int(rng.integers(2, 4)),
        variant=Variant.DIRECT_NO_DFS if rng.random() < 0.2 else Variant.COUNTER_PROPAGATING,
    )


def oracle_check(cfg: ExperimentConfig | None = None, n_random: int = 20, seed: int = 0,
                 tolerance: float = TOLERANCE, bases=VISIBILITY_BASES) -> OracleReport:
    """Сверка на заданной конфигурации и на n_random случайных; расхождение выше допуска -- ошибка."""
    report = OracleReport(tolerance=tolerance)
    configs = ([cfg] if cfg is not None else []) + [random_config(seed + i) for i in range(n_random)]

    for c in configs:
        result = compare(c, bases)
        logger.info("oracle: %s cutoff=%d max|dp|=%.2e (%s)", c.variant.value, c.cutoff,
                    result["max_deviation"], result["worst"])
        report.configs.append(result)

    if not report.passed:
        raise OracleMismatchError("Dense oracle disagrees with the sparse engine",
                                  errors={"max_deviation": report.max_deviation, "tolerance": tolerance})
    return report
