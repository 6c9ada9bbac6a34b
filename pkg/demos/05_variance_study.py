"""Empirical versus analytical variance, the way the harness reports it.

The same study runs from the shell with a config file:

    mts experiment study.ini --log-runs runs.jsonl -o rows.csv

Run: python demos/05_variance_study.py
"""

from mtsketch.experiment import ExperimentSpec, run_experiment, write_csv

two = ExperimentSpec(alpha_list=(0.1, 0.5, 0.9), runs=100, seed=1)
print(write_csv(run_experiment(two)))

three = ExperimentSpec(scenario="three_stream", ab_list=(2000, 5000, 8500), runs=100,
                       algorithms=("expression",), expr="(A & B) - C", seed=1)
print(write_csv(run_experiment(three)))
