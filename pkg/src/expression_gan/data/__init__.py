# Data package: types, manifests, synthetic corpus and training pairs
from .types import NUM_LANDMARKS, Dataset, FaceSample, LabelVector, LandmarkSet, TrainingPair
from .manifest import ingest_raw_directory, load_manifest, read_manifest, write_manifest
from .synthetic import DEFAULT_EXPRESSIONS, synth_corpus
from .pairs import (SplitPolicy, collate_pairs, intensity_one_hot, make_pair, make_training_pairs, one_hot,
                    split)

__all__ = ['NUM_LANDMARKS', 'Dataset', 'FaceSample', 'LabelVector', 'LandmarkSet', 'TrainingPair',
           'ingest_raw_directory', 'load_manifest', 'read_manifest', 'write_manifest',
           'DEFAULT_EXPRESSIONS', 'synth_corpus', 'SplitPolicy', 'collate_pairs', 'intensity_one_hot',
           'make_pair', 'make_training_pairs', 'one_hot', 'split']
