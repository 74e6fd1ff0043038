import numpy as np

from dfsim.analysis import DELAY_COLUMNS, calibrate_sigma, delay_scan, scan_fwhm
from dfsim.cli.base import SimulationCommand
from dfsim.cli.serializers import DelayRowSerializer, DelayScanSerializer, pick, validated
from dfsim.cli.writers import write_results
from dfsim.exceptions import FitError


# -600..600 мкм с шагом 20 мкм
DEFAULT_DELAYS_UM = tuple(float(x) for x in np.linspace(-600.0, 600.0, 61))


class Command(SimulationCommand):
    help = "Сканирование задержки: совпадения R/D и L/D и видность от смещения"

    def run(self, cfg, data, options):
        params = validated(DelayScanSerializer(data=pick(data, DelayScanSerializer)))

        # 1. sigma по заданной ширине провала
        if "target_fwhm_um" in params:
            cfg = cfg.replace(sigma_um=calibrate_sigma(cfg, params["target_fwhm_um"]))

        # 2. Скан
        rows = delay_scan(cfg, params.get("delays_um", DEFAULT_DELAYS_UM))
        try:
            fwhm = scan_fwhm(rows)
        except FitError:
            fwhm = None

        metadata = {"config": cfg.as_dict(), "sigma_um": cfg.sigma_um, "fwhm_um": fwhm}
        write_results(options["out"], DelayRowSerializer(rows, many=True).data, DELAY_COLUMNS, metadata)
        self.stdout.write(f"{len(rows)} delays, FWHM={fwhm}")
