"""Survey harness for probing geographic lexical variation in Spanish.

Generates dialectological survey questions from a lexical-variation corpus,
collects answers from virtual informants (LLM endpoints, baselines, and
gold-reading oracles), validates responses, and scores dialectal knowledge
with chance-corrected metrics and rank-correlation analyses.
"""

__version__ = "0.1.0"

from .corpus import Corpus, CorpusError, LexicalItem, load_corpus, save_corpus
from .metrics import adjusted_jaccard, expected_intersection, expected_jaccard, f1_binary, jaccard
from .questionnaire import mcqf_questions, render_prompt, sample_questions, ynqf_universe
from .survey import make_informant, parse_mcqf, parse_ynqf, run_survey
from .analysis import aggregate_area, correlate, evaluate_run, spearman

__all__ = [
    "Corpus",
    "CorpusError",
    "LexicalItem",
    "load_corpus",
    "save_corpus",
    "adjusted_jaccard",
    "expected_intersection",
    "expected_jaccard",
    "f1_binary",
    "jaccard",
    "mcqf_questions",
    "render_prompt",
    "sample_questions",
    "ynqf_universe",
    "make_informant",
    "parse_mcqf",
    "parse_ynqf",
    "run_survey",
    "aggregate_area",
    "correlate",
    "evaluate_run",
    "spearman",
]
