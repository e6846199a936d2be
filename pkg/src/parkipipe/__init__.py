"""Multi-modal Parkinson's disease classification and subtype clustering.

Smartwatch movement, voice, finger tapping and questionnaire data are turned
into per-modality features, classified by modality-specific learners combined
through stacking, and clustered within the PD group.
"""

__version__ = "0.1.0"

from .datamodel import Cohort, DiseaseClass, Modality, PdMotorType, SubjectRecord, filter_cohort, modality_mask
from .errors import PipelineError

__all__ = [
    "Cohort",
    "DiseaseClass",
    "Modality",
    "PdMotorType",
    "PipelineError",
    "SubjectRecord",
    "filter_cohort",
    "modality_mask",
]
