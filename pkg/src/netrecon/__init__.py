"""netrecon: sparse reconstruction of LTI network structure from
steady-state perturbation experiments, plus certificates, resolution-change
structure inference, experiment design, and a benchmark harness."""

__version__ = "0.1.0"
