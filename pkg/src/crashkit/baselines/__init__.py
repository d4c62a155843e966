"""Classical baseline predictors over encoded crash features.

Six model kinds are provided: logreg, tree, forest, adaboost, naive_bayes,
and gbdt. naive_bayes and gbdt are declared stand-ins for externally trained
reference models of the same family; report rows carry that annotation.
"""

from .encode import EncodedDataset, EncoderState, encode_apply, encode_fit
from .api import (
    MODEL_KINDS,
    BaselineModel,
    ModelSpec,
    display_name,
    load_model,
    predict,
    save_model,
    train,
)

__all__ = [
    "EncodedDataset", "EncoderState", "encode_fit", "encode_apply",
    "ModelSpec", "BaselineModel", "MODEL_KINDS", "train", "predict",
    "save_model", "load_model", "display_name",
]
