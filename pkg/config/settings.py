from pathlib import Path
import os

from dotenv import load_dotenv


# Базовая директория проекта
BASE_DIR = Path(__file__).resolve().parent.parent
# Загружаем переменные окружения из файла .env
load_dotenv(BASE_DIR / ".env")

SECRET_KEY = os.getenv("SECRET_KEY", "dfsim-local-only")

# Режим отладки:
DEBUG = True if os.getenv("DEBUG") == "True" else False

ALLOWED_HOSTS: list[str] = []


# Установленные приложения: веб-части нет, только команды manage.py
INSTALLED_APPS = [
    "django.contrib.auth",
    "django.contrib.contenttypes",

    # сторонние
    "rest_framework",

    # наши приложения
    "dfsim",
]


# База данных не используется командами, но Django требует настройку
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "db.sqlite3",
    }
}


# Локализация
LANGUAGE_CODE = "ru"

TIME_ZONE = "Europe/Moscow"

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Параметры симулятора уровня процесса
DFSIM = {
    "CUTOFF": int(os.getenv("DFSIM_CUTOFF", "4")),                        # обрезка по числу фотонов
    "WORKERS": int(os.getenv("DFSIM_WORKERS", "1")),                      # процессов на развёртку
    "REPETITION_RATE_HZ": float(os.getenv("DFSIM_REPETITION_RATE_HZ", "82e6")),  # частота импульсов
    "LOG_LEVEL": os.getenv("DFSIM_LOG_LEVEL", "INFO"),
}


# Логирование: Logger -> Handler -> Formatter -> Вывод
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,   # если поставить True,то Django отключит стандартные логгеры
    "formatters": {                      # формат
        "simple": {"format": "%(levelname)s | %(name)s | %(message)s"},
    },
    "handlers": {                        # куда писать лог (stderr, чтобы не мешать выводу команд)
        "console": {"class": "logging.StreamHandler", "formatter": "simple"},
    },
    "loggers": {
        "dfsim": {"handlers": ["console"], "level": DFSIM["LOG_LEVEL"], "propagate": False},
    },
    "root": {"handlers": ["console"], "level": "WARNING"},  # "запасной" логгер (WARNING и выше)
}
