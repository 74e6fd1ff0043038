from dfsim.cli.base import SimulationCommand
from dfsim.cli.serializers import OracleSerializer, pick, validated
from dfsim.cli.writers import write_results
from dfsim.oracle import MAX_CUTOFF, oracle_check


REPORT_COLUMNS = ("index", "variant", "cutoff", "max_deviation", "worst")
DEFAULT_RANDOM_CONFIGS = 20


class Command(SimulationCommand):
    help = "Сверка разреженного движка с плотным конвейером матриц плотности"

    def config_overrides(self, data):
        # Плотное пространство ограничено обрезкой 3
        data = dict(data)
        data.setdefault("cutoff", str(MAX_CUTOFF))
        return data

    def run(self, cfg, data, options):
        params = validated(OracleSerializer(data=pick(data, OracleSerializer)))
        n_random = params.get("oracle_configs", DEFAULT_RANDOM_CONFIGS)
        report = oracle_check(cfg, n_random, params.get("oracle_seed", 0))

        rows = [
            {"index": i, "variant": c["config"]["variant"], "cutoff": c["config"]["cutoff"],
             "max_deviation": c["max_deviation"], "worst": c["worst"]}
            for i, c in enumerate(report.configs)
        ]
        metadata = {"tolerance": report.tolerance, "max_deviation": report.max_deviation, "passed": report.passed}
        write_results(options["out"], rows, REPORT_COLUMNS, metadata)
        self.stdout.write(f"{len(rows)} configs, max |dp| = {report.max_deviation:.3e}")
