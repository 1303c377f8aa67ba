"""Re-derive the shipped per-shot alpha / lambda defaults on the synthetic benchmark.

Usage: python scripts/tune_defaults.py [n_validation_tasks] [shots,...]
"""

import sys

from alphatim.benchmark import synthetic_benchmark
from alphatim.classifiers import LossConfig
from alphatim.evaluation import EvalConfig, sweep, best_value
from alphatim.tasks import TaskSpec

ALPHA_GRID = [1, 2, 3, 5, 7]
LAMBDA_GRID = [0, 0.25, 0.5, 0.75, 1]


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 500
    shot_list = [int(s) for s in sys.argv[2].split(",")] if len(sys.argv) > 2 else [1, 5, 10, 20]
    _, val = synthetic_benchmark()
    for shots in shot_list:
        spec = TaskSpec(ways=5, shots=shots, dirichlet_a=1.0, seed=0)
        for method, param, grid in (("alpha_tim", "alpha", ALPHA_GRID), ("tim", "lambda", LAMBDA_GRID)):
            cfg = EvalConfig(method=method, task_spec=spec, loss_config=LossConfig(), n_tasks=n)
            results = sweep(val, cfg, param, grid)
            accs = ", ".join(f"{v:g}:{r.mean_accuracy:.4f}" for v, r in results)
            print(f"shots={shots} {param}: best={best_value(results):g}  [{accs}]", flush=True)


if __name__ == "__main__":
    main()
