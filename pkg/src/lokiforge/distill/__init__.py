from .cache import CachedTeacher, write_teacher_cache
from .objective import GRANULARITIES, branch_losses, kd_schedule, min_ce_loss, select_branches
from .regen import regen_on_contamination
from .teachers import (
    DEFAULT_TOP_K,
    ModelTeacher,
    Teacher,
    TeacherDistribution,
    teacher_logits,
    topk_distribution,
)

__all__ = [
    "CachedTeacher",
    "DEFAULT_TOP_K",
    "GRANULARITIES",
    "ModelTeacher",
    "Teacher",
    "TeacherDistribution",
    "branch_losses",
    "kd_schedule",
    "min_ce_loss",
    "regen_on_contamination",
    "select_branches",
    "teacher_logits",
    "topk_distribution",
    "write_teacher_cache",
]
