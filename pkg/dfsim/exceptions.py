"""
Исключения движка.
У каждого есть стабильный code: его отдаёт командный слой в едином формате ошибок.
"""


class SimulationError(Exception):
    """Базовая ошибка симулятора."""

    code = "simulation_error"
    message = "Simulation error"

    def __init__(self, detail: str | None = None, *, errors: dict | None = None):
        self.detail = detail or self.message
        self.errors = errors or {}
        super().__init__(self.detail)


class ConfigurationError(SimulationError):
    """Неверные параметры (диапазоны, дубликаты меток, несогласованные ключи)."""

    code = "configuration_error"
    message = "Validation error"


class UnknownModeError(SimulationError):
    code = "unknown_mode"
    message = "Unknown mode"


class TransformError(SimulationError):
    """Матрица преобразования не изометрия или ссылается на чужие моды."""

    code = "transform_error"
    message = "Invalid mode transform"


class TruncationError(SimulationError):
    code = "truncation_error"
    message = "Photon-number cutoff violated"


class EmptyPostSelectionError(SimulationError):
    """Пост-селекция пустая: матрица плотности с нулевым следом."""

    code = "empty_post_selection"
    message = "Post-selected sector is empty"


class CalibrationError(SimulationError):
    code = "calibration_error"
    message = "Calibration target is not achievable"

    def __init__(self, detail: str | None = None, *, max_attainable: float | None = None, errors: dict | None = None):
        errors = dict(errors or {})
        if max_attainable is not None:
            errors.setdefault("max_attainable", max_attainable)
        self.max_attainable = max_attainable
        super().__init__(detail, errors=errors)


class FitError(SimulationError):
    code = "fit_error"
    message = "Log-log fit is undefined"


class OracleMismatchError(SimulationError):
    code = "oracle_mismatch"
    message = "Dense oracle disagrees with the sparse engine"


class UnphysicalStateError(SimulationError):
    """Матрица плотности не эрмитова, не положительна или со следом вне (0, 1]."""

    code = "unphysical_state"
    message = "Density matrix is not physical"
