from .audit import contamination_audit
from .generate import GenTask, extract_final_number, run_generation_eval
from .scoring import UniformModel, perplexity, score_option, score_options
from .seal import manifest_path, seal_run
from .tasks import QUERY, TEMPLATE, MCItem, MCTask, build_prompt, predict, run_mc_eval

__all__ = [
    "GenTask",
    "MCItem",
    "MCTask",
    "QUERY",
    "TEMPLATE",
    "UniformModel",
    "build_prompt",
    "contamination_audit",
    "extract_final_number",
    "manifest_path",
    "perplexity",
    "predict",
    "run_generation_eval",
    "run_mc_eval",
    "score_option",
    "score_options",
    "seal_run",
]
