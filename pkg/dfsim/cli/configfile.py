"""
Плоский конфиг прогона: одна пара key=value на строку, # -- комментарий,
списки через запятую. Значения остаются строками, типы приводят сериализаторы.
"""
from pathlib import Path

from dfsim.exceptions import ConfigurationError


# Ключи, значения которых всегда списки (даже из одного элемента)
LIST_KEYS = frozenset({"transmittances", "delays_um"})


def parse_config_text(text: str) -> dict[str, str | list[str]]:
    data: dict[str, str | list[str]] = {}
    errors: dict[str, str] = {}

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors[f"line {number}"] = f"expected key=value, got {raw.strip()!r}"
            continue

        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            errors[f"line {number}"] = "empty key"
            continue
        if key in data:
            errors[key] = f"duplicate key (line {number})"
            continue

        if key in LIST_KEYS or "," in value:
            data[key] = [item.strip() for item in value.split(",") if item.strip()]
        else:
            data[key] = value

    if errors:
        raise ConfigurationError("Malformed configuration file", errors=errors)
    return data


def read_config(path: str | Path | None) -> dict[str, str | list[str]]:
    """Без файла -- пустой словарь: все параметры берутся по умолчанию."""
    if path is None:
        return {}
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError("Cannot read configuration file", errors={"config": f"{path}: {exc.strerror}"}) from exc
    return parse_config_text(text)
