from dfsim.analysis import calibrate_overlap, forward_variant_scaling, rate_scaling
from dfsim.cli.base import SimulationCommand
from dfsim.cli.serializers import ScalingRowSerializer, SweepSpecSerializer, pick
from dfsim.cli.writers import write_results


CALIBRATION_COLUMNS = ("s0", "v_x", "mode_matching", "max_attainable")
SCALING_COLUMNS = ("variant", "component", "parameter", "exponent", "stderr")


class Command(SimulationCommand):
    help = "Подбор перекрытия s0 по V_X на якорном T; с --scaling ещё и показатели степени скоростей"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--scaling", action="store_true",
                            help="Наклоны скорости по T, точка пересечения и показатели компонент (вместо s0)")

    def run(self, cfg, data, options):
        spec = SweepSpecSerializer(data=pick(data, SweepSpecSerializer)).to_spec()
        result = calibrate_overlap(cfg, spec.anchor_transmittance, spec.anchor_visibility)
        metadata = {
            "config": cfg.as_dict(),
            "anchor_transmittance": spec.anchor_transmittance,
            "anchor_visibility": spec.anchor_visibility,
        }

        if not options["scaling"]:
            row = {"s0": result.s0, "v_x": result.v_x, "mode_matching": result.mode_matching,
                   "max_attainable": result.max_attainable}
            write_results(options["out"], [row], CALIBRATION_COLUMNS, metadata)
            self.stdout.write(f"s0={result.s0:.6f} V_sp={result.mode_matching:.6f}")
            return

        # Наклоны считаются на откалиброванной модели
        calibrated = cfg.replace(overlap=result.s0)
        metadata["s0"] = result.s0
        metadata["rate_scaling"] = rate_scaling(calibrated, spec.transmittances, self.repetition_rate)
        rows = ScalingRowSerializer(forward_variant_scaling(calibrated), many=True).data
        write_results(options["out"], rows, SCALING_COLUMNS, metadata)
        self.stdout.write(f"{len(rows)} exponents -> {options['out']}")
