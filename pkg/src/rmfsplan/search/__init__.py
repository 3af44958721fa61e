from .alns import AlnsParams, OperatorWeights, alns_run
from .chromosome import (
    ALL_OPERATORS,
    GUIDED_OPERATORS,
    RANDOM_OPERATORS,
    Chromosome,
    arc_crossover,
    arrange,
    arrangement,
    guided_arrangement,
    guided_insertion,
    guided_swap,
    pmx,
    pmx_crossover,
    random_arrangement,
    random_chromosome,
    random_insertion,
    random_swap,
    repair_counts,
)
from .evaluation import Budget, Evaluator, InvalidParams, dump_log_jsonl
from .nsga2 import BENCH, IMPROVED, NsgaParams, nsga2_run
from .pareto import ParetoArchive, crowding_distance, dominates, non_dominated_sort, weakly_dominates

__all__ = [n for n in dir() if not n.startswith("_")]
