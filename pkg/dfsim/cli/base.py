import logging
import sys

from django.conf import settings
from django.core.management.base import BaseCommand

from dfsim.cli.configfile import read_config
from dfsim.cli.exceptions import handle_exception
from dfsim.cli.serializers import ExperimentConfigSerializer, pick, reject_unknown_keys
from dfsim.protocol import ExperimentConfig


logger = logging.getLogger("dfsim")


class SimulationCommand(BaseCommand):
    """
    Общая основа команд симулятора.
    Каждая команда:
    1) читает плоский конфиг (--config) и проверяет его сериализаторами
    2) считает результат в run()
    3) пишет CSV/JSON в --out
    Любая ошибка превращается в одну JSON-строку на stderr и ненулевой код выхода.
    """

    # Команды не трогают БД и модели, системные проверки не нужны
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument("--config", default=None, help="Файл key=value с параметрами прогона")
        parser.add_argument("--out", required=True, help="Путь к CSV (JSON пишется рядом)")

    def config_overrides(self, data: dict) -> dict:
        """Подстановки по умолчанию конкретной команды до валидации."""
        return data

    def build_config(self, data: dict) -> ExperimentConfig:
        fields = self.config_overrides(pick(data, ExperimentConfigSerializer))
        return ExperimentConfigSerializer(data=fields).to_config()

    def run(self, cfg: ExperimentConfig, data: dict, options: dict) -> None:
        raise NotImplementedError

    @property
    def workers(self) -> int:
        return settings.DFSIM["WORKERS"]

    @property
    def repetition_rate(self) -> float:
        return settings.DFSIM["REPETITION_RATE_HZ"]

    def handle(self, *args, **options):
        try:
            # 1. Конфиг и валидация
            data = read_config(options["config"])
            reject_unknown_keys(data)
            cfg = self.build_config(data)

            # 2. Расчёт и вывод
            logger.info("%s: variant=%s T=%g cutoff=%d", self.command_name, cfg.variant.value,
                        cfg.transmittance, cfg.cutoff)
            self.run(cfg, data, options)
        except Exception as exc:  # noqa: BLE001
            sys.exit(handle_exception(exc, self.command_name, self.stderr.write))

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit(".", 1)[-1]
