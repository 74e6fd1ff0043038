from dfsim.analysis import coherence_magnitudes, tomography_experiment
from dfsim.cli.base import SimulationCommand
from dfsim.cli.writers import DENSITY_COLUMNS, density_rows, write_results


class Command(SimulationCommand):
    help = "Томография пары без DFS: матрицы плотности без шума и с шумом фазы"

    def run(self, cfg, data, options):
        rows = []
        metadata = {"config": cfg.as_dict()}

        for label, noise in (("without_noise", False), ("with_noise", True)):
            dm, fidelity = tomography_experiment(cfg, noise)
            rows.extend(density_rows(dm, label))
            metadata[label] = {"fidelity": fidelity, "coherences": coherence_magnitudes(dm), "purity": dm.purity()}
            self.stdout.write(f"{label}: F={fidelity:.4f}")

        write_results(options["out"], rows, DENSITY_COLUMNS, metadata)
