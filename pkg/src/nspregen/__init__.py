"""nspregen: difficulty-graded 2D Navier-Stokes dataset pre-generation.

Generates flow-past-object and lid-driven-cavity trajectories on a
difficulty grid (geometry = obstacle count, physics = Reynolds number),
profiles their generation cost, plans training-set mixtures under
compute budgets, and scores predicted trajectories with a global
relative-L1 metric.
"""

__version__ = "0.1.0"
