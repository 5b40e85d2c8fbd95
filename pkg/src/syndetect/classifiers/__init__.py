from .models import ARCHITECTURES, Classifier, build_classifier
from .train import accuracy, load_classifier, load_external_robust, save_classifier, train_classifier

__all__ = [
    "ARCHITECTURES",
    "Classifier",
    "build_classifier",
    "accuracy",
    "load_classifier",
    "load_external_robust",
    "save_classifier",
    "train_classifier",
]
