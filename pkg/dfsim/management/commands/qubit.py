from dfsim.cli.base import SimulationCommand
from dfsim.cli.writers import DENSITY_COLUMNS, density_rows, write_results
from dfsim.protocol import distribute_qubit


class Command(SimulationCommand):
    help = "Передача произвольного кубита alpha|H> + beta|V> через DFS-протокол"

    def config_overrides(self, data):
        # Без амплитуд -- равная суперпозиция (|phi+>)
        data = dict(data)
        if "qubit_alpha" not in data and "qubit_beta" not in data:
            data.update(qubit_alpha="1", qubit_beta="1")
        return data

    def run(self, cfg, data, options):
        dm, fidelity = distribute_qubit(cfg)
        alpha, beta = cfg.qubit
        metadata = {"config": cfg.as_dict(), "fidelity": fidelity, "purity": dm.purity()}
        write_results(options["out"], density_rows(dm, "output"), DENSITY_COLUMNS, metadata)
        self.stdout.write(f"alpha={alpha:.4f} beta={beta:.4f} F={fidelity:.4f}")
