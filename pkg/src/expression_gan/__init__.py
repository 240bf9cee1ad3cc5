from .config import LossWeights, TrainConfig
from .data import Dataset, FaceSample, LandmarkSet, TrainingPair, load_manifest, synth_corpus
from .landmarks import extract_landmarks, render_landmark_image
from .trainer import train, train_step
from .inference import GenerationResult, generate, synthesize_dataset
from .metrics import MetricsReport, augmentation_experiment, evaluate_model

__version__ = "0.1.0"

__all__ = ["LossWeights", "TrainConfig", "Dataset", "FaceSample", "LandmarkSet", "TrainingPair",
           "load_manifest", "synth_corpus", "extract_landmarks", "render_landmark_image",
           "train", "train_step", "GenerationResult", "generate", "synthesize_dataset",
           "MetricsReport", "augmentation_experiment", "evaluate_model"]
