from dfsim.analysis import RESULT_COLUMNS, fit_loglog_slope, sweep_transmittance
from dfsim.cli.base import SimulationCommand
from dfsim.cli.serializers import SweepRowSerializer, SweepSpecSerializer, pick
from dfsim.cli.writers import write_results


class Command(SimulationCommand):
    help = "Развёртка по пропусканию канала: V_Z, V_X, F_low и скорость по T"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--no-calibrate", action="store_true",
                            help="Не подбирать перекрытие s0, взять overlap из конфига")

    def run(self, cfg, data, options):
        spec = SweepSpecSerializer(data=pick(data, SweepSpecSerializer)).to_spec(calibrate=not options["no_calibrate"])
        table = sweep_transmittance(cfg, spec, self.repetition_rate, self.workers)

        # Наклон скорости в log-log, если точек хватает
        metadata = dict(table.metadata)
        if len(table.rows) >= 3:
            fit = fit_loglog_slope((row["transmittance"], row["rate_per_pulse"]) for row in table.rows)
            metadata["rate_slope"] = {"slope": fit.slope, "stderr": fit.stderr}

        rows = SweepRowSerializer(table.rows, many=True).data
        write_results(options["out"], rows, RESULT_COLUMNS, metadata)
        self.stdout.write(f"{len(rows)} rows -> {options['out']}")
