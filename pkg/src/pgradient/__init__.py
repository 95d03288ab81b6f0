"""Exact Betti-number approximations along finite-index normal chains."""
from .errors import (AlphabetMismatchError, DomainError, InvariantViolation, MalformedInputError,
                     NestingError, NotAHomomorphismError, NotSurjectiveError, PGradientError,
                     ResourceLimitError, UndefinedRootError)
from .words import (Alphabet, RootDecomposition, Word, commutator, conjugate, cyclic_reduce, e_p,
                    format_word, invert, multiply, p_root_decomposition, parse_word, reduce)
from .presentations import (Presentation, PresentationStats, abelianized_relator_matrix,
                            format_presentation, p_deficiency, parse_presentation,
                            small_cancellation_check)
from .homology import (AbelianInvariants, IntMatrix, abelian_invariants, rank_mod_p,
                       smith_normal_form)
from .quotients import (FiniteQuotientMap, RelatorCountCertificate, SubgroupPresentation,
                        e_p_in_subgroup, membership, refined_presentation, quotient_from_images,
                        reidemeister_schreier, trivial_quotient)
from .chains import (Chain, ChainReport, ReferenceConstants, check_fp_monotone, cyclic_chain,
                     derived_p_series, derived_p_step, report)

__version__ = "0.1.0"

__all__ = [
    "AlphabetMismatchError",
    "DomainError",
    "InvariantViolation",
    "MalformedInputError",
    "NestingError",
    "NotAHomomorphismError",
    "NotSurjectiveError",
    "PGradientError",
    "ResourceLimitError",
    "UndefinedRootError",
    "Alphabet",
    "RootDecomposition",
    "Word",
    "commutator",
    "conjugate",
    "cyclic_reduce",
    "e_p",
    "format_word",
    "invert",
    "multiply",
    "p_root_decomposition",
    "parse_word",
    "reduce",
    "Presentation",
    "PresentationStats",
    "abelianized_relator_matrix",
    "format_presentation",
    "p_deficiency",
    "parse_presentation",
    "small_cancellation_check",
    "AbelianInvariants",
    "IntMatrix",
    "abelian_invariants",
    "rank_mod_p",
    "smith_normal_form",
    "FiniteQuotientMap",
    "RelatorCountCertificate",
    "SubgroupPresentation",
    "e_p_in_subgroup",
    "membership",
    "refined_presentation",
    "quotient_from_images",
    "reidemeister_schreier",
    "trivial_quotient",
    "Chain",
    "ChainReport",
    "ReferenceConstants",
    "check_fp_monotone",
    "cyclic_chain",
    "derived_p_series",
    "derived_p_step",
    "report",
    "__version__",
]
