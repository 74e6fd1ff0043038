import json
import logging

from dfsim.exceptions import SimulationError


# Получаем логгер с именем "dfsim"
logger = logging.getLogger("dfsim")

# Коды выхода процесса
EXIT_DOMAIN_ERROR = 2
EXIT_UNEXPECTED = 1


def error_payload(exc: BaseException) -> dict:
    """
    Единый формат ошибок для командного слоя:
    {"status": "error", "code": ..., "message": ..., "errors": {...}}
    Traceback в payload не попадает.
    """
    # Ошибки движка: у каждой свой стабильный code
    if isinstance(exc, SimulationError):
        return {
            "status": "error",
            "code": exc.code,
            "message": exc.detail,
            "errors": exc.errors,
        }

    # Всё остальное -- внутренняя ошибка
    return {
        "status": "error",
        "code": "internal_error",
        "message": "Internal error",
        "errors": {},
    }


def handle_exception(exc: BaseException, command: str, write) -> int:
    """
    Отдаёт одну JSON-строку ошибки в write и возвращает код выхода.
    Ошибки движка логируются как WARNING, неожиданные -- с traceback.
    """
    payload = error_payload(exc)

    if isinstance(exc, SimulationError):
        # Пишем в лог: команда, код, тип ошибки
        logger.warning("%s -> %s (%s)", command, exc.code, exc.__class__.__name__)
        code = EXIT_DOMAIN_ERROR
    else:
        logger.exception("%s -> unhandled exception", command)
        code = EXIT_UNEXPECTED

    write(json.dumps(payload, sort_keys=True, default=str))
    return code
