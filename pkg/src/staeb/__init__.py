"""Solvers for skilled spatial task assignment with extra travel budgets."""

from staeb.feasibility import (
    GridIndex,
    ValidationReport,
    build_index,
    candidate_workers,
    validate_matching,
    validate_pair,
)
from staeb.game import GameConfig, GameState, solve_ebgt
from staeb.greedy import GreedyConfig, rank_tasks, solve_greedy
from staeb.instances import GenConfig, canonical_instance, generate_instance, load_instance, save_instance
from staeb.model import (
    Instance,
    Matching,
    Member,
    PairAssignment,
    Params,
    Point,
    SkillCatalog,
    SolveReport,
    Task,
    Worker,
    extra_cost,
    matching_revenue,
    pair_revenue,
    to_money,
    travel_cost,
    worker_revenue,
)
from staeb.oracle import OracleLimits, OracleOverflow, solve_exact, solve_random

__version__ = "0.1.0"
