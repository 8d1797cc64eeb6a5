"""Adaptive clinical decision support toolkit.

Learns individualized treatment-response models from EHR-style records
and ranks pre-defined service packages by the probability of an
above-average outcome for a patient at intake.
"""

from .ensemble import SelectionResult, VoteOutcome, ensemble_select, vote_max_prob
from .evaluation import (
    ComparisonTable,
    CvResult,
    FoldPlan,
    MetricsRow,
    SelectorSpec,
    compare_models,
    cross_validate,
    make_folds,
)
from .bundle import load_model, save_model
from .metrics import RocCurve, auc, h_measure, roc, spearman, tpr_fpr_accuracy
from .models import (
    Dataset,
    ModelSpec,
    ProbabilisticPrediction,
    TrainedModel,
    predict_proba,
    train,
)
from .preprocess import (
    BIN_TARGET,
    CAIM,
    FeatureScheme,
    TargetBinarizer,
    ZScaler,
    caim_apply,
    caim_fit,
    fit_binarizer,
    fit_zscaler,
)
from .records import (
    ChangeFrequencies,
    Cohort,
    DescriptiveStats,
    PatientRecord,
    delta_frequencies,
    describe,
    filter_cohort,
    load_cohort,
    save_cohort,
)
from .synth import (
    GeneratorSpec,
    load_reference_fixture,
    make_reference_fixture,
    parse_generator_spec,
    preset,
    synthesize_cohort,
    synthesize_with_report,
)

__version__ = "0.1.0"
