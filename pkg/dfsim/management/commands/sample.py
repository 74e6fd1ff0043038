import csv
from pathlib import Path

from dfsim.cli.base import SimulationCommand
from dfsim.cli.serializers import SampleSerializer, pick, validated
from dfsim.cli.writers import json_path_for, write_json
from dfsim.sampling import PATTERNS, pattern_probabilities, sample_events


EVENT_COLUMNS = ("pulse", "click_e", "click_f", "click_g")
DEFAULT_PULSES = 1_000_000


def _pattern_key(pattern: tuple[bool, bool, bool]) -> str:
    return "".join(str(int(c)) for c in pattern)


class Command(SimulationCommand):
    help = "Синтетический поток щелчков D_E, D_F, D_G с фиксированным seed"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--pulses", type=int, default=None, help="Число импульсов (иначе ключ pulses конфига)")

    def run(self, cfg, data, options):
        params = validated(SampleSerializer(data=pick(data, SampleSerializer)))
        n_pulses = options["pulses"] if options["pulses"] is not None else params.get("pulses", DEFAULT_PULSES)
        probabilities = pattern_probabilities(cfg)

        # 1. Поток событий пишется построчно, без накопления в памяти (для --out *.json только сводка)
        counts = {p: 0 for p in PATTERNS}
        events = sample_events(cfg, n_pulses, options["seed"], probabilities)
        if Path(options["out"]).suffix == ".json":
            for event in events:
                counts[(event.click_e, event.click_f, event.click_g)] += 1
        else:
            with open(options["out"], "w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(EVENT_COLUMNS)
                for event in events:
                    writer.writerow((event.pulse, int(event.click_e), int(event.click_f), int(event.click_g)))
                    counts[(event.click_e, event.click_f, event.click_g)] += 1
        counts[PATTERNS[0]] = n_pulses - sum(counts.values())

        # 2. Сводка: точные вероятности рядом с частотами
        write_json(json_path_for(options["out"]), {
            "columns": list(EVENT_COLUMNS),
            "metadata": {
                "config": cfg.as_dict(),
                "seed": options["seed"],
                "pulses": n_pulses,
                "probabilities": {_pattern_key(p): float(q) for p, q in zip(PATTERNS, probabilities)},
                "counts": {_pattern_key(p): c for p, c in counts.items()},
            },
        })
        self.stdout.write(f"{n_pulses} pulses, {n_pulses - counts[PATTERNS[0]]} with clicks")
