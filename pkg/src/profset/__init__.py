"""Cross-selling product selection from retail market baskets."""
from .allocation import (AllocationResult, allocate_all, allocate_transaction,
                         maximal_frequent_subsets, theta)
from .basket import (Catalog, Category, Product, Transaction, TransactionDb, load_catalog,
                     load_transactions, transaction_margin)
from .errors import (BudgetExceededError, DataError, ExpectedModeBudgetError, InfeasibleError,
                     ProfsetError, SolverBudgetError)
from .mining import FrequentSetIndex, frequent_subsets_of, mine_frequent
from .optimizer import (ConstraintConfig, ProfsetModel, Solution, build_model, objective_value,
                        solve_brute, solve_exact)
from .synth import SynthConfig, generate_synthetic

__version__ = "0.1.0"
