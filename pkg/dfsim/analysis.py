"""
Аналитика поверх протокола: калибровка перекрытия, развёртка по T, наклоны в log-log,
сканирование задержки и томография без DFS.
Функции возвращают списки словарей (строки таблиц), которые дальше сериализуются командами.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import linregress

from dfsim import __version__
from dfsim.exceptions import CalibrationError, ConfigurationError, FitError
from dfsim.fock import PolarizationDensityMatrix, fidelity_to_phi_plus
from dfsim.protocol import (
    ALL_BASES,
    REPETITION_RATE_HZ,
    VISIBILITY_BASES,
    ExperimentConfig,
    Variant,
    chsh_violated,
    component_probabilities,
    f_low,
    rate_ratio,
    run_fixed_phase,
    run_phase_averaged,
    sharing_rate,
    visibilities,
)


logger = logging.getLogger("dfsim")

# Точки таблицы эксперимента
TABLE_TRANSMITTANCES = (0.1, 0.03, 0.01, 0.005, 0.003)
CALIBRATION_TOLERANCE = 1e-4

RESULT_COLUMNS = ("transmittance", "v_z", "v_x", "f_low", "rate_per_pulse", "rate_per_second", "chsh_flag")
DELAY_COLUMNS = ("delay_um", "overlap", "p_r", "p_l", "visibility")


@dataclass(frozen=True)
class SweepSpec:
    """Развёртка по T при постоянном mu у Алисы (mu_b = mu / T) с якорем калибровки."""

    transmittances: tuple[float, ...] = TABLE_TRANSMITTANCES
    anchor_transmittance: float = 0.1
    anchor_visibility: float = 0.82
    calibrate: bool = True

    def __post_init__(self):
        ts = tuple(float(t) for t in self.transmittances)
        object.__setattr__(self, "transmittances", ts)
        bad = [t for t in (*ts, self.anchor_transmittance) if not 0 < t <= 1]
        if not ts or bad:
            raise ConfigurationError("Transmittances must lie in (0, 1]", errors={"transmittances": bad or "empty"})
        if not -1 <= self.anchor_visibility <= 1:
            raise ConfigurationError("Anchor visibility must lie in [-1, 1]",
                                     errors={"anchor_visibility": self.anchor_visibility})


@dataclass
class ResultsTable:
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    columns: tuple[str, ...] = RESULT_COLUMNS

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]

    def validate(self) -> None:
        """Каждая строка полна, F_low = (V_Z + V_X) / 2 и флаг CHSH согласован с F_low."""
        for row in self.rows:
            missing = [c for c in self.columns if c not in row]
            if missing:
                raise ConfigurationError("Result row is incomplete", errors={"missing": missing})
            if "f_low" in row:
                if row["f_low"] != f_low(row["v_z"], row["v_x"]) or row["chsh_flag"] != chsh_violated(row["f_low"]):
                    raise ConfigurationError("Inconsistent result row", errors={"transmittance": row["transmittance"]})


@dataclass(frozen=True)
class CalibrationResult:
    s0: float
    v_x: float
    max_attainable: float

    @property
    def mode_matching(self) -> float:
        """Интенсивностное перекрытие s0^2 (модельный аналог V_sp)."""
        return self.s0 ** 2


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    stderr: float
    intercept: float

    def __str__(self) -> str:
        return f"{self.slope:.4f} ± {self.stderr:.4f}"


def x_visibility(cfg: ExperimentConfig) -> float:
    return run_phase_averaged(cfg, bases=(("X", "X"),)).table.correlator("X", "X")


def calibrate_overlap(cfg: ExperimentConfig, anchor_transmittance: float = 0.1,
                      target: float = 0.82) -> CalibrationResult:
    """
    Подбор s0 так, чтобы V_X(T = anchor) совпала с target.
    V_X монотонно растёт с s0, поэтому достаточно поиска корня на [0, 1].
    """
    anchored = cfg.replace(transmittance=anchor_transmittance, delay_um=0.0)

    def residual(s: float) -> float:
        return x_visibility(anchored.replace(overlap=s)) - target

    # 1. Верхняя граница: полное перекрытие
    best = residual(1.0) + target
    if best < target - CALIBRATION_TOLERANCE:
        raise CalibrationError(f"V_X cannot reach {target} at T={anchor_transmittance}", max_attainable=best)
    if abs(best - target) < CALIBRATION_TOLERANCE:
        return CalibrationResult(1.0, best, best)

    # 2. Нижняя граница: полностью различимые импульсы
    if residual(0.0) > 0:
        raise CalibrationError("V_X exceeds the target even without interference",
                               max_attainable=best, errors={"v_x_at_zero_overlap": residual(0.0) + target})

    s0 = brentq(residual, 0.0, 1.0, xtol=1e-8)
    v_x = residual(s0) + target
    logger.info("Calibrated overlap s0=%.6f (V_X=%.5f at T=%g)", s0, v_x, anchor_transmittance)
    return CalibrationResult(s0, v_x, best)


def _sweep_point(cfg: ExperimentConfig, repetition_rate: float) -> dict:
    """Одна строка таблицы; верхний уровень модуля, чтобы передаваться в процессы."""
    outcome = run_phase_averaged(cfg, bases=VISIBILITY_BASES)
    v_z, v_x = visibilities(outcome)
    fl = f_low(v_z, v_x)
    p = outcome.triple_probability
    return {
        "transmittance": cfg.transmittance,
        "v_z": v_z,
        "v_x": v_x,
        "f_low": fl,
        "rate_per_pulse": p,
        "rate_per_second": p * repetition_rate,
        "chsh_flag": chsh_violated(fl),
        "_diagnostics": outcome.diagnostics(),
    }


def evaluate_points(configs: Sequence[ExperimentConfig], repetition_rate: float = REPETITION_RATE_HZ,
                    workers: int = 1) -> list[dict]:
    """Точки независимы; при workers > 1 считаются в пуле процессов, порядок результата = порядок входа."""
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, configs, [repetition_rate] * len(configs)))
    return [_sweep_point(c, repetition_rate) for c in configs]


def sweep_transmittance(cfg: ExperimentConfig, spec: SweepSpec, repetition_rate: float = REPETITION_RATE_HZ,
                        workers: int = 1) -> ResultsTable:
    """
    Таблица V_Z, V_X, F_low и скорости по T (строки по убыванию T).
    При spec.calibrate s0 сначала подбирается по якорю.
    """
    # 1. Калибровка перекрытия
    calibration = None
    if spec.calibrate:
        calibration = calibrate_overlap(cfg, spec.anchor_transmittance, spec.anchor_visibility)
        cfg = cfg.replace(overlap=calibration.s0)

    # 2. Точки развёртки
    transmittances = sorted(set(spec.transmittances), reverse=True)
    rows = evaluate_points([cfg.replace(transmittance=t) for t in transmittances], repetition_rate, workers)

    # 3. Диагностика уходит в метаданные
    diagnostics = {}
    for row in rows:
        diagnostics[repr(row["transmittance"])] = row.pop("_diagnostics")

    metadata = {
        "version": __version__,
        "config": cfg.as_dict(),
        "calibration": None if calibration is None else {
            "s0": calibration.s0, "v_x": calibration.v_x, "mode_matching": calibration.mode_matching,
            "anchor_transmittance": spec.anchor_transmittance, "anchor_visibility": spec.anchor_visibility,
        },
        "repetition_rate_hz": repetition_rate,
        "diagnostics": diagnostics,
    }
    table = ResultsTable(rows, metadata)
    table.validate()
    return table


def fit_loglog_slope(points: Iterable[tuple[float, float]]) -> LogLogFit:
    """Наклон log(y) от log(x) методом наименьших квадратов."""
    points = list(points)
    if len(points) < 3:
        raise FitError("At least three points are needed", errors={"points": len(points)})
    bad = [p for p in points if p[0] <= 0 or p[1] <= 0]
    if bad:
        raise FitError("Log-log fit needs positive values", errors={"points": [list(p) for p in bad]})

    x = np.log([p[0] for p in points])
    y = np.log([p[1] for p in points])
    fit = linregress(x, y)
    return LogLogFit(float(fit.slope), float(fit.stderr), float(fit.intercept))


def rate_crossing(cfg: ExperimentConfig, low: float, high: float,
                  repetition_rate: float = REPETITION_RATE_HZ) -> float:
    """T, при котором скорости когерентной и однофотонной схем равны (корень log-отношения)."""
    if cfg.mu <= 0:
        raise FitError("Rate crossing needs a positive ancilla intensity", errors={"mu": cfg.mu})
    if not 0 < low < high <= 1:
        raise FitError("Crossing bracket must satisfy 0 < low < high <= 1", errors={"bracket": [low, high]})

    def log_ratio(t: float) -> float:
        ratio = rate_ratio(cfg, t, repetition_rate)
        if ratio <= 0:
            raise FitError("Coherent-ancilla rate vanishes", errors={"transmittance": t})
        return math.log(ratio)

    f_low_end, f_high_end = log_ratio(low), log_ratio(high)
    if f_low_end * f_high_end > 0:
        raise FitError("Rate curves do not cross inside the bracket", errors={"bracket": [low, high]})
    return float(brentq(log_ratio, low, high, xtol=1e-6 * low))


def rate_scaling(cfg: ExperimentConfig, transmittances: Sequence[float] = TABLE_TRANSMITTANCES,
                 repetition_rate: float = REPETITION_RATE_HZ) -> dict:
    """Наклоны скорости по T для когерентной и однофотонной схем и точка их пересечения."""
    report = {}
    for variant in (Variant.COUNTER_PROPAGATING, Variant.SINGLE_PHOTON_ANCILLA):
        points = [(t, sharing_rate(cfg.replace(transmittance=t, variant=variant), repetition_rate)[0])
                  for t in transmittances]
        fit = fit_loglog_slope(points)
        report[variant.value] = {"slope": fit.slope, "stderr": fit.stderr, "points": points}

    report["crossing_transmittance"] = rate_crossing(cfg, cfg.mu / 10, min(1.0, cfg.mu * 10), repetition_rate)
    report["mu"] = cfg.mu
    return report


def forward_variant_scaling(cfg: ExperimentConfig, mus: Sequence[float] = (1e-3, 3e-3, 1e-2),
                            transmittances: Sequence[float] = (0.01, 0.003, 0.001),
                            gammas: Sequence[float] = (1e-3, 3e-3, 1e-2)) -> list[dict]:
    """
    Показатели степени компонент (без тёмных отсчётов): полезные события (mu, T),
    когерентные двухфотонные ошибки (mu, T), двойные пары (gamma, T) для встречной и прямой схем.
    """
    base = cfg.replace(dark_count=0.0, dark_count_e=0.0, dark_count_f=0.0)
    result: list[dict] = []

    for variant in (Variant.COUNTER_PROPAGATING, Variant.FORWARD_ALL_FROM_BOB):
        point = base.replace(variant=variant)
        grids = {
            "mu": [(m, component_probabilities(point.replace(mu=m))) for m in mus],
            "transmittance": [(t, component_probabilities(point.replace(transmittance=t))) for t in transmittances],
            "gamma": [(g, component_probabilities(point.replace(gamma=g))) for g in gammas],
        }
        for component, parameters in (("desired", ("mu", "transmittance")),
                                      ("coherent_two_photon", ("mu", "transmittance")),
                                      ("double_pair", ("gamma", "transmittance"))):
            for parameter in parameters:
                fit = fit_loglog_slope((x, comps[component]) for x, comps in grids[parameter])
                result.append({
                    "variant": variant.value,
                    "component": component,
                    "parameter": parameter,
                    "exponent": fit.slope,
                    "stderr": fit.stderr,
                })
    return result


def delay_point(cfg: ExperimentConfig, delay_um: float) -> dict:
    """
    Фотон A приготовлен в |R> проекцией G на |L>, импульс R в |D>; F анализируется в |D>,
    E в базисе R/L. Фаза канала фиксирована (0).
    """
    point = cfg.replace(delay_um=delay_um)
    p = run_fixed_phase(point, 0.0, 0.0, bases=(("Y", "Y"),)).table.settings[("Y", "Y")]
    # Столбец b = 1: G зарегистрирован в |L>
    p_r, p_l = float(p[0, 1]), float(p[1, 1])
    high, low = max(p_r, p_l), min(p_r, p_l)
    return {
        "delay_um": delay_um,
        "overlap": point.effective_overlap,
        "p_r": p_r,
        "p_l": p_l,
        "visibility": (high - low) / (high + low) if high + low > 0 else 0.0,
    }


def delay_scan(cfg: ExperimentConfig, delays_um: Iterable[float]) -> list[dict]:
    return [delay_point(cfg, float(dx)) for dx in delays_um]


def delay_visibility_at_overlap(cfg: ExperimentConfig, overlap: float) -> float:
    return delay_point(cfg.replace(overlap=overlap, delay_um=0.0), 0.0)["visibility"]


def calibrate_sigma(cfg: ExperimentConfig, target_fwhm_um: float = 180.0) -> float:
    """
    sigma по ширине провала: видность падает вдвое при s = s_half, откуда
    FWHM = 2 sigma sqrt(2 ln(s0 / s_half)).
    """
    if target_fwhm_um <= 0:
        raise ConfigurationError("Target FWHM must be positive", errors={"target_fwhm_um": target_fwhm_um})
    s0 = cfg.overlap
    peak = delay_visibility_at_overlap(cfg, s0)
    if peak <= 0:
        raise CalibrationError("Zero-delay visibility vanishes", max_attainable=peak)

    s_half = brentq(lambda s: delay_visibility_at_overlap(cfg, s) - peak / 2, 0.0, s0, xtol=1e-9)
    sigma = target_fwhm_um / (2 * math.sqrt(2 * math.log(s0 / s_half)))
    logger.info("Calibrated sigma=%.3f um (s_half=%.5f, peak visibility %.4f)", sigma, s_half, peak)
    return sigma


def scan_fwhm(rows: Sequence[dict]) -> float:
    """Ширина пика видности на полувысоте по таблице сканирования (линейная интерполяция)."""
    ordered = sorted(rows, key=lambda r: r["delay_um"])
    x = np.array([r["delay_um"] for r in ordered])
    v = np.array([r["visibility"] for r in ordered])
    peak = int(np.argmax(v))
    half = v[peak] / 2

    left = v[:peak + 1]
    right = v[peak:]
    if left.min() > half or right.min() > half:
        raise FitError("Scan does not reach half maximum on both sides")

    # np.interp требует возрастающих абсцисс: слева видность растёт, справа убывает
    i = int(np.where(left <= half)[0][-1])
    x_left = np.interp(half, left[i:i + 2], x[i:i + 2])
    j = int(np.where(right <= half)[0][0])
    x_right = np.interp(half, right[j - 1:j + 1][::-1], x[peak + j - 1:peak + j + 1][::-1])
    return float(x_right - x_left)


def tomography_experiment(cfg: ExperimentConfig, noise: bool) -> tuple[PolarizationDensityMatrix, float]:
    """
    Пара без DFS: B через канал, A сразу на D_E, совпадения D_E.D_G.
    noise=True -- усреднение по фазам канала, иначе фаза 0.
    """
    direct = cfg.replace(variant=Variant.DIRECT_NO_DFS)
    outcome = run_phase_averaged(direct) if noise else run_fixed_phase(direct, 0.0, 0.0, ALL_BASES)
    dm = outcome.density_matrix
    return dm, fidelity_to_phi_plus(dm)


def coherence_magnitudes(dm: PolarizationDensityMatrix) -> list[float]:
    """|rho_HH,VV|, |rho_VV,HH|, |rho_HV,VH|, |rho_VH,HV| -- элементы, которые гасит дефазировка."""
    return [abs(dm.element(a, b)) for a, b in (("HH", "VV"), ("VV", "HH"), ("HV", "VH"), ("VH", "HV"))]
